//! Spectrum of `−𝓛` per sector, the unstable subspace, Riesz projections, the
//! cutoff-localized modified unstable space and the `B̃` inner product.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grids::{RadialField, RadialGrid};
use crate::linop::{SectorOperator, Which};

/// Eigenvalues moving by more than this under `n → 3n/2` are flagged non-physical.
pub const REFINEMENT_THRESHOLD: f64 = 1e-3;
/// `|Re λ|` below this counts as unstable.
pub const NEUTRAL_BAND: f64 = 1e-6;
/// Upper bound on the gap.
pub const MAX_GAP: f64 = 1.0 / 16.0;

/// Smooth cutoff `χ(x)`: 1 for `|x| ≤ 1`, 0 for `|x| ≥ 2`, built from `e^{−1/t}`.
pub fn cutoff(x: f64) -> f64 {
    let h = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let t = (2.0 - x.abs()).clamp(0.0, 1.0);
    let a = h(t);
    a / (a + h(1.0 - t))
}

/// Full eigen-decomposition of `−𝓛` in one sector.
#[derive(Debug, Clone)]
pub struct SectorEigen {
    pub op: SectorOperator,
    /// Sorted by descending real part, then descending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors, column `i` for `eigenvalues[i]`.
    pub vectors: DMatrix<Complex64>,
    pub refinement_stable: Vec<bool>,
}

/// Dense eigensolve of `−𝓛` with refinement flags from a re-solve at `3n/2` nodes.
pub fn eig_sector(op: &SectorOperator) -> Result<SectorEigen> {
    let (eigenvalues, vectors) = dense_eigen(&-op.matrix(Which::L), true)?;
    let g = &op.grid;
    let fine_grid = Arc::new(RadialGrid::new(3 * g.n() / 2, g.map_scale(), g.r_max())?);
    let fine = SectorOperator::assemble(op.ell, fine_grid, op.k)?;
    let (fine_ev, _) = dense_eigen(&-fine.matrix(Which::L), false)?;
    let refinement_stable = eigenvalues
        .iter()
        .map(|l| fine_ev.iter().any(|f| (f - l).norm() < REFINEMENT_THRESHOLD))
        .collect();
    Ok(SectorEigen { op: op.clone(), eigenvalues, vectors, refinement_stable })
}

fn dense_eigen(a: &DMatrix<f64>, vectors: bool) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let fail = |e| Error::NumericalFailure(format!("eigensolver did not converge: {e:?}"));
    let (vals, vecs) = if vectors {
        let evd = m.eigen().map_err(fail)?;
        let s = evd.S();
        let u = evd.U();
        let vals: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
        (vals, DMatrix::from_fn(n, n, |i, j| u[(i, j)]))
    } else {
        (m.eigenvalues().map_err(fail)?, DMatrix::zeros(0, 0))
    };
    if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NumericalFailure("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].re.total_cmp(&vals[i].re).then(vals[j].im.total_cmp(&vals[i].im)));
    let sorted = order.iter().map(|&i| vals[i]).collect();
    let v = if vectors { DMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]) } else { vecs };
    Ok((sorted, v))
}

/// Largest distance from an eigenvalue's conjugate to the nearest eigenvalue.
pub fn conjugate_symmetry_defect(eigenvalues: &[Complex64]) -> f64 {
    eigenvalues
        .iter()
        .map(|l| eigenvalues.iter().map(|m| (m - l.conj()).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// Measured gap; 0 when refinement-stable eigenvalues approach the imaginary axis.
    pub delta_g: f64,
    /// Unstable eigenvalue count per sector (not counting the `2ℓ+1` degeneracy).
    pub counts: Vec<(usize, usize)>,
    /// Leading refinement-stable eigenvalue outside the unstable set.
    pub next: Option<Complex64>,
}

fn is_unstable_candidate(l: Complex64) -> bool {
    l.re >= 0.0 || l.re.abs() < NEUTRAL_BAND
}

/// `δ_g = min(−2 Re λ_next, 1/16)` where `λ_next` is the leading refinement-stable
/// eigenvalue with `Re λ < 0` outside the neutral band.
pub fn measure_gap(sectors: &[SectorEigen]) -> GapReport {
    let mut next: Option<Complex64> = None;
    let mut counts = Vec::new();
    for s in sectors {
        let mut c = 0;
        for (l, &ok) in s.eigenvalues.iter().zip(&s.refinement_stable) {
            if !ok {
                continue;
            }
            if is_unstable_candidate(*l) {
                c += 1;
            } else if next.is_none_or(|m| l.re > m.re) {
                next = Some(*l);
            }
        }
        counts.push((s.op.ell, c));
    }
    let delta_g = match next {
        Some(l) => (-2.0 * l.re).clamp(0.0, MAX_GAP),
        None => MAX_GAP,
    };
    GapReport { delta_g, counts, next }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModePart {
    Real,
    Re,
    Im,
}

/// One real unstable direction in sector `(ℓ, m)`.
#[derive(Debug, Clone)]
pub struct UnstableMode {
    pub ell: usize,
    pub m: i64,
    pub lambda: Complex64,
    pub part: ModePart,
    pub phi: Vec<f64>,
    /// Discrete dual: `(f, ψ)_{H^k} = dual · f`.
    pub dual: Vec<f64>,
}

/// Sector-local unstable data shared by every `m`.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub eigen: SectorEigen,
    pub unstable: Vec<bool>,
    /// Real basis of the unstable subspace, one column per direction.
    pub basis: DMatrix<f64>,
    /// Biorthonormal left vectors, `dualᵀ basis = I`.
    pub dual: DMatrix<f64>,
    /// `−𝓛` restricted to the unstable subspace in the `basis` coordinates.
    pub block: DMatrix<f64>,
    pub lambdas: Vec<(Complex64, ModePart)>,
    pub near_degenerate: bool,
}

impl SectorSpectrum {
    pub fn ell(&self) -> usize {
        self.eigen.op.ell
    }
}

/// A field given by its sector components `(m, f_ℓm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub m: i64,
    pub field: RadialField,
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub k: usize,
    pub grid: Arc<RadialGrid>,
    pub sectors: Vec<SectorSpectrum>,
    pub gap: GapReport,
    pub modes: Vec<UnstableMode>,
}

impl SpectralDecomposition {
    /// Decomposes sectors `0..=ell_max` on `grid` in `H^k`.
    pub fn new(grid: Arc<RadialGrid>, ell_max: usize, k: usize) -> Result<Self> {
        let eigs = (0..=ell_max)
            .map(|ell| SectorOperator::assemble(ell, grid.clone(), k).and_then(|op| eig_sector(&op)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_sectors(eigs)
    }

    pub fn from_sectors(eigs: Vec<SectorEigen>) -> Result<Self> {
        let Some(first) = eigs.first() else {
            return invalid("no sectors to decompose");
        };
        let grid = first.op.grid.clone();
        let k = first.op.k;
        if eigs.iter().any(|e| e.op.grid.id() != grid.id() || e.op.k != k) {
            return invalid("sectors assembled on different grids or Sobolev indices");
        }
        let gap = measure_gap(&eigs);
        let threshold = -0.5 * gap.delta_g;
        let mut sectors = Vec::new();
        let mut modes = Vec::new();
        for e in eigs {
            let s = unstable_subspace(e, threshold)?;
            let ell = s.ell();
            for m in -(ell as i64)..=ell as i64 {
                for (j, &(lambda, part)) in s.lambdas.iter().enumerate() {
                    modes.push(UnstableMode {
                        ell,
                        m,
                        lambda,
                        part,
                        phi: s.basis.column(j).iter().copied().collect(),
                        dual: s.dual.column(j).iter().copied().collect(),
                    });
                }
            }
            sectors.push(s);
        }
        Ok(Self { k, grid, sectors, gap, modes })
    }

    pub fn delta_g(&self) -> f64 {
        self.gap.delta_g
    }

    pub fn sector(&self, ell: usize) -> Option<&SectorSpectrum> {
        self.sectors.iter().find(|s| s.ell() == ell)
    }

    /// `H^k` dual function `ψ = G⁻¹ y` of mode `i`.
    pub fn psi(&self, i: usize) -> Result<Vec<f64>> {
        let mode = &self.modes[i];
        let s = self.sector(mode.ell).expect("mode sector present");
        let lu = s.eigen.op.gram.clone().lu();
        lu.solve(&DVector::from_column_slice(&mode.dual))
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::NumericalFailure("singular Gram matrix".into()))
    }

    fn component<'a>(&self, f: &'a [Component], ell: usize, m: i64) -> Result<Option<&'a RadialField>> {
        let mut found = None;
        for c in f {
            self.grid.check(&c.field)?;
            if c.field.ell == ell && c.m == m {
                if found.is_some() {
                    return invalid(format!("duplicate component (ℓ, m) = ({ell}, {m})"));
                }
                found = Some(&c.field);
            }
        }
        Ok(found)
    }

    /// `a_j = (f, ψ_j)_{H^k}` for every unstable mode.
    pub fn coefficients(&self, f: &[Component]) -> Result<Vec<f64>> {
        for c in f {
            if c.m.unsigned_abs() as usize > c.field.ell {
                return invalid(format!("component m = {} outside sector {}", c.m, c.field.ell));
            }
            if self.sector(c.field.ell).is_none() {
                return invalid(format!("sector {} not decomposed", c.field.ell));
            }
        }
        self.modes
            .iter()
            .map(|mode| {
                Ok(self
                    .component(f, mode.ell, mode.m)?
                    .map_or(0.0, |g| dot(&mode.dual, &g.values)))
            })
            .collect()
    }

    /// Sum of `a_j v_j` over modes with `v_j` chosen by `pick`, merged into the components of `like`.
    fn synthesize(&self, a: &[f64], like: &[Component], pick: impl Fn(usize) -> Vec<f64>) -> Vec<Component> {
        let mut out: Vec<Component> = like
            .iter()
            .map(|c| Component { m: c.m, field: self.grid.field(c.field.ell, vec![0.0; self.grid.n()]) })
            .collect();
        for (i, mode) in self.modes.iter().enumerate() {
            if a[i] == 0.0 {
                continue;
            }
            let pos = match out.iter().position(|c| c.field.ell == mode.ell && c.m == mode.m) {
                Some(p) => p,
                None => {
                    out.push(Component { m: mode.m, field: self.grid.field(mode.ell, vec![0.0; self.grid.n()]) });
                    out.len() - 1
                }
            };
            let v = pick(i);
            for (o, x) in out[pos].field.values.iter_mut().zip(&v) {
                *o += a[i] * x;
            }
        }
        out
    }

    /// `(P_u f, f − P_u f)` with `P_u f = Σ (f, ψ_j)_{H^k} φ_j`.
    pub fn riesz_project(&self, f: &[Component]) -> Result<(Vec<Component>, Vec<Component>)> {
        let a = self.coefficients(f)?;
        let pu = self.synthesize(&a, f, |i| self.modes[i].phi.clone());
        let ps = subtract(f, &pu);
        Ok((pu, ps))
    }

    /// Unstable part of the spectrum of `−𝓛` over all modes, block diagonal.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.modes.len();
        let mut j = DMatrix::zeros(n, n);
        let mut start = 0;
        for s in &self.sectors {
            let d = s.block.nrows();
            for _ in 0..2 * s.ell() + 1 {
                j.view_mut((start, start), (d, d)).copy_from(&s.block);
                start += d;
            }
        }
        j
    }

    /// Builds the modified unstable space with cutoff radius `R`.
    pub fn build_modified(&self, radius: f64) -> Result<ModifiedSpace> {
        if !(radius > 0.0) {
            return invalid(format!("cutoff radius must be positive, got {radius}"));
        }
        if 2.0 * radius > self.grid.r_max() {
            return invalid(format!("cutoff support 2R = {} exceeds r_max = {}", 2.0 * radius, self.grid.r_max()));
        }
        let r = self.grid.r();
        let chi: Vec<f64> = r.iter().map(|&x| cutoff(x / radius)).collect();
        let n = self.modes.len();
        // M_R − I = ((χ_R − 1)φ_i, ψ_j), summed only where χ_R < 1 so small entries keep their size
        let mut defect = DMatrix::zeros(n, n);
        for (i, mi) in self.modes.iter().enumerate() {
            for (j, mj) in self.modes.iter().enumerate() {
                if mi.ell != mj.ell || mi.m != mj.m {
                    continue;
                }
                defect[(i, j)] = (0..r.len())
                    .filter(|&q| chi[q] < 1.0)
                    .map(|q| (chi[q] - 1.0) * mi.phi[q] * mj.dual[q])
                    .sum();
            }
        }
        let m_r = DMatrix::<f64>::identity(n, n) + &defect;
        let svd = m_r.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if n == 0 { 1.0 } else { smax / smin };
        if !(condition <= 1e6) {
            return invalid(format!("M_R is numerically singular (condition {condition:.3e}); use a larger R"));
        }
        let inv = m_r
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("M_R is singular; use a larger R".into()))?;
        let phi_t: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut v = vec![0.0; r.len()];
                for (kk, mk) in self.modes.iter().enumerate() {
                    let c = inv[(i, kk)];
                    if c != 0.0 {
                        for q in 0..r.len() {
                            v[q] += c * chi[q] * mk.phi[q];
                        }
                    }
                }
                v
            })
            .collect();
        let jordan = JordanCoordinates::new(&self.generator(), self.delta_g())?;
        Ok(ModifiedSpace { decomp: self.clone(), radius, m_r, defect, condition, phi_t, jordan })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `f − g` componentwise, matching components by `(ℓ, m)`.
pub fn subtract(f: &[Component], g: &[Component]) -> Vec<Component> {
    let mut out = f.to_vec();
    for c in g {
        match out.iter_mut().find(|o| o.m == c.m && o.field.ell == c.field.ell) {
            Some(o) => {
                for (a, b) in o.field.values.iter_mut().zip(&c.field.values) {
                    *a -= b;
                }
            }
            None => {
                let mut neg = c.clone();
                neg.field.values.iter_mut().for_each(|v| *v = -*v);
                out.push(neg);
            }
        }
    }
    out
}

/// Real basis of the unstable eigenspace in one sector, with biorthonormal duals.
fn unstable_subspace(eigen: SectorEigen, threshold: f64) -> Result<SectorSpectrum> {
    let op = &eigen.op;
    let n = op.grid.n();
    let a = -op.matrix(Which::L);
    let unstable: Vec<bool> = eigen
        .eigenvalues
        .iter()
        .zip(&eigen.refinement_stable)
        .map(|(l, &ok)| ok && (l.re > threshold || l.re.abs() < NEUTRAL_BAND))
        .collect();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut lefts: Vec<DVector<f64>> = Vec::new();
    let mut lambdas = Vec::new();
    let mut picked: Vec<Complex64> = Vec::new();
    for (i, l) in eigen.eigenvalues.iter().enumerate() {
        if !unstable[i] || l.im < -1e-10 * l.norm().max(1.0) {
            continue;
        }
        let v = eigen.vectors.column(i).into_owned();
        let y = left_vector(&a, *l)?;
        picked.push(*l);
        if l.im.abs() <= 1e-10 * l.norm().max(1.0) {
            let v = real_phase(&v);
            let y = real_phase(&y);
            cols.push(v);
            lefts.push(y);
            lambdas.push((Complex64::new(l.re, 0.0), ModePart::Real));
        } else {
            cols.push(v.map(|z| z.re));
            cols.push(v.map(|z| z.im));
            lefts.push(y.map(|z| z.re));
            lefts.push(y.map(|z| z.im));
            lambdas.push((*l, ModePart::Re));
            lambdas.push((*l, ModePart::Im));
        }
    }
    let near_degenerate = picked
        .iter()
        .enumerate()
        .any(|(i, a)| picked[i + 1..].iter().any(|b| (a - b).norm() < 1e-6));
    let d = cols.len();
    let mut basis = DMatrix::zeros(n, d);
    for (j, c) in cols.iter().enumerate() {
        // unit H^k norm, largest entry positive
        let norm = c.dot(&(&op.gram * c)).sqrt();
        let imax = c.iamax();
        let sign = if c[imax] < 0.0 { -1.0 } else { 1.0 };
        basis.set_column(j, &(c * (sign / norm)));
    }
    let mut y = DMatrix::zeros(n, d);
    for (j, c) in lefts.iter().enumerate() {
        y.set_column(j, c);
    }
    let (dual, block) = if d == 0 {
        (y, DMatrix::zeros(0, 0))
    } else {
        // Y ← Y (Φᵀ Y)⁻¹ so that Yᵀ Φ = I
        let pair = basis.transpose() * &y;
        let inv = pair
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("left and right unstable vectors are not dual".into()))?;
        let dual = y * inv;
        let block = dual.transpose() * &a * &basis;
        (dual, block)
    };
    Ok(SectorSpectrum { eigen, unstable, basis, dual, block, lambdas, near_degenerate })
}

/// Left eigenvector `yᵀA = λyᵀ` by two steps of shifted inverse iteration on `Aᵀ`.
fn left_vector(a: &DMatrix<f64>, lambda: Complex64) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let shift = lambda + Complex64::new(1e-10 * lambda.norm().max(1.0), 0.0);
    let at = DMatrix::from_fn(n, n, |i, j| Complex64::new(a[(j, i)], 0.0) - if i == j { shift } else { 0.0.into() });
    let lu = at.lu();
    let mut y = DVector::from_element(n, Complex64::new(1.0, 0.0));
    for _ in 0..3 {
        y = lu
            .solve(&y)
            .ok_or_else(|| Error::NumericalFailure("inverse iteration hit a singular shift".into()))?;
        let s = y.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        if !s.is_finite() || s == 0.0 {
            return Err(Error::NumericalFailure("inverse iteration diverged".into()));
        }
        y /= Complex64::new(s, 0.0);
    }
    Ok(y)
}

/// Rotates a complex vector so its largest entry is real, then drops the imaginary part.
fn real_phase(v: &DVector<Complex64>) -> DVector<f64> {
    let imax = (0..v.len()).max_by(|&i, &j| v[i].norm().total_cmp(&v[j].norm())).unwrap_or(0);
    let p = v[imax].conj() / v[imax].norm();
    v.map(|z| (z * p).re)
}

/// Real block-Jordan coordinates `w = V⁻¹a` in which the unstable generator
/// `J_B = V⁻¹JV` has real or rotation `[[α, β], [−β, α]]` diagonal blocks and
/// off-diagonal coupling at most `δ_g/(10N)` per entry.
#[derive(Debug, Clone)]
pub struct JordanCoordinates {
    pub v: DMatrix<f64>,
    pub v_inv: DMatrix<f64>,
    pub j_b: DMatrix<f64>,
}

impl JordanCoordinates {
    pub fn new(j: &DMatrix<f64>, delta_g: f64) -> Result<Self> {
        let n = j.nrows();
        if n == 0 {
            let z = DMatrix::zeros(0, 0);
            return Ok(Self { v: z.clone(), v_inv: z.clone(), j_b: z });
        }
        let (q, t) = nalgebra::Schur::new(j.clone()).unpack();
        // standardize 2×2 blocks
        let mut s = DMatrix::<f64>::identity(n, n);
        let mut block_of = vec![0usize; n];
        let mut i = 0;
        let mut b = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * t.amax().max(1.0) {
                let blk = t.fixed_view::<2, 2>(i, i).into_owned();
                let tr = 0.5 * (blk[(0, 0)] + blk[(1, 1)]);
                let det = blk[(0, 0)] * blk[(1, 1)] - blk[(0, 1)] * blk[(1, 0)];
                let beta = (det - tr * tr).max(0.0).sqrt();
                // eigenvector of blk for α + iβ: ((α + iβ − d), c)ᵀ up to scale
                let (p, qv) = ((tr - blk[(1, 1)], blk[(1, 0)]), (beta, 0.0));
                s[(i, i)] = p.0;
                s[(i + 1, i)] = p.1;
                s[(i, i + 1)] = qv.0;
                s[(i + 1, i + 1)] = qv.1;
                block_of[i] = b;
                block_of[i + 1] = b;
                i += 2;
            } else {
                block_of[i] = b;
                i += 1;
            }
            b += 1;
        }
        let s_inv = s.clone().try_inverse().ok_or_else(|| Error::NumericalFailure("degenerate 2×2 Schur block".into()))?;
        let that = &s_inv * &t * &s;
        let mut off = 0.0_f64;
        for r in 0..n {
            for c in 0..n {
                if block_of[c] > block_of[r] {
                    off = off.max(that[(r, c)].abs());
                }
            }
        }
        let target = delta_g.max(f64::MIN_POSITIVE) / (10.0 * n as f64);
        let eps = if off > target { target / off } else { 1.0 };
        let dvec = DVector::from_iterator(n, block_of.iter().map(|&p| eps.powi(p as i32)));
        let d = DMatrix::from_diagonal(&dvec);
        let d_inv = DMatrix::from_diagonal(&dvec.map(|x| 1.0 / x));
        let j_b = &d_inv * that * &d;
        let v = q * s * d;
        let v_inv = v.clone().try_inverse().ok_or_else(|| Error::NumericalFailure("singular Jordan basis".into()))?;
        Ok(Self { v, v_inv, j_b })
    }

    /// `min_w wᵀJ_Bw / |w|²`.
    pub fn coercivity(&self) -> f64 {
        if self.j_b.nrows() == 0 {
            return 0.0;
        }
        let sym = (&self.j_b + self.j_b.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

/// Span of the cutoff-localized modes `φ̃ = M_R⁻¹(χ_Rφ)`.
#[derive(Debug, Clone)]
pub struct ModifiedSpace {
    pub decomp: SpectralDecomposition,
    pub radius: f64,
    pub m_r: DMatrix<f64>,
    /// `M_R − I`, accumulated without cancellation against the identity.
    pub defect: DMatrix<f64>,
    pub condition: f64,
    pub phi_t: Vec<Vec<f64>>,
    pub jordan: JordanCoordinates,
}

impl ModifiedSpace {
    pub fn defect_max(&self) -> f64 {
        if self.defect.is_empty() {
            0.0
        } else {
            self.defect.amax()
        }
    }

    /// `P̃_u f = Σ (f, ψ_j)_{H^k} φ̃_j`.
    pub fn project(&self, f: &[Component]) -> Result<Vec<Component>> {
        let a = self.decomp.coefficients(f)?;
        Ok(self.synthesize(&a, f))
    }

    /// `Σ a_j φ̃_j`.
    pub fn synthesize(&self, a: &[f64], like: &[Component]) -> Vec<Component> {
        self.decomp.synthesize(a, like, |i| self.phi_t[i].clone())
    }

    /// `B̃` coordinates of `Σ a_j φ̃_j`.
    pub fn b_coords(&self, a: &[f64]) -> Vec<f64> {
        (&self.jordan.v_inv * DVector::from_column_slice(a)).iter().copied().collect()
    }

    pub fn b_norm_coeffs(&self, a: &[f64]) -> f64 {
        self.b_coords(a).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `(f, g)_{B̃}` for elements of the span; fails if either is not in it.
    pub fn b_inner(&self, f: &[Component], g: &[Component]) -> Result<f64> {
        let a = self.span_coefficients(f)?;
        let b = self.span_coefficients(g)?;
        Ok(dot(&self.b_coords(&a), &self.b_coords(&b)))
    }

    /// Coefficients `a` with `f = Σ a_j φ̃_j`, checking the residual.
    pub fn span_coefficients(&self, f: &[Component]) -> Result<Vec<f64>> {
        let a = self.decomp.coefficients(f)?;
        let back = self.synthesize(&a, f);
        let res = subtract(f, &back);
        let scale = f.iter().flat_map(|c| c.field.values.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = res.iter().flat_map(|c| c.field.values.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        if err > 1e-8 * scale.max(1e-300) && err > 0.0 {
            return invalid(format!("field is not in the modified unstable span (residual {err:.3e})"));
        }
        Ok(a)
    }

    /// Coefficients of `−P̃_u𝓛P_u f` for `f = Σ a_j φ̃_j`, using the sector matrices.
    pub fn generator_apply(&self, a: &[f64]) -> Vec<f64> {
        let d = &self.decomp;
        let mut out = vec![0.0; a.len()];
        for (i, mi) in d.modes.iter().enumerate() {
            if a[i] == 0.0 {
                continue;
            }
            let s = d.sector(mi.ell).expect("mode sector present");
            let lphi = -(s.eigen.op.matrix(Which::L) * DVector::from_column_slice(&mi.phi));
            for (j, mj) in d.modes.iter().enumerate() {
                if mj.ell == mi.ell && mj.m == mi.m {
                    out[j] += a[i] * dot(&mj.dual, lphi.as_slice());
                }
            }
        }
        out
    }

    /// Bounds `c₁ ≤ ‖f‖_{B̃}/‖f‖_{H^k} ≤ c₂` over the span.
    pub fn norm_equivalence(&self) -> (f64, f64) {
        let n = self.phi_t.len();
        if n == 0 {
            return (1.0, 1.0);
        }
        let d = &self.decomp;
        let mut h = DMatrix::zeros(n, n);
        for (i, mi) in d.modes.iter().enumerate() {
            let s = d.sector(mi.ell).expect("mode sector present");
            let gi = &s.eigen.op.gram * DVector::from_column_slice(&self.phi_t[i]);
            for (j, mj) in d.modes.iter().enumerate() {
                if mj.ell == mi.ell && mj.m == mi.m {
                    h[(i, j)] = dot(&self.phi_t[j], gi.as_slice());
                }
            }
        }
        // ‖f‖²_B = aᵀ V⁻ᵀV⁻¹ a, ‖f‖²_H = aᵀ H a
        let b = self.jordan.v_inv.transpose() * &self.jordan.v_inv;
        let chol = match h.clone().cholesky() {
            Some(c) => c,
            None => return (0.0, f64::INFINITY),
        };
        let l_inv = chol.l().try_inverse().unwrap_or_else(|| DMatrix::zeros(n, n));
        let m = &l_inv * b * l_inv.transpose();
        let ev = m.symmetric_eigenvalues();
        (ev.min().max(0.0).sqrt(), ev.max().sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile;

    fn decomp(n: usize, ell_max: usize) -> SpectralDecomposition {
        SpectralDecomposition::new(Arc::new(RadialGrid::with_defaults(n).unwrap()), ell_max, 2).unwrap()
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(1.0), 1.0);
        assert_eq!(cutoff(2.0), 0.0);
        assert_eq!(cutoff(-3.0), 0.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let c = cutoff(1.0 + i as f64 / 100.0);
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn leading_modes_and_gap() {
        let d = decomp(96, 1);
        let s0 = d.sector(0).unwrap();
        let s1 = d.sector(1).unwrap();
        assert!((s0.eigen.eigenvalues[0].re - 1.0).abs() < 1e-5);
        assert!((s1.eigen.eigenvalues[0].re - 0.5).abs() < 1e-5);
        assert_eq!(d.gap.counts, vec![(0, 1), (1, 1)]);
        assert!(d.delta_g() > 0.0 && d.delta_g() <= MAX_GAP);
        // one radial mode plus three translations
        assert_eq!(d.modes.len(), 4);
        let g = &d.grid;
        let lq = g.sample(profile::lambda_q);
        let gram = &s0.eigen.op.gram;
        let phi = DVector::from_column_slice(&d.modes[0].phi);
        let v = DVector::from_column_slice(&lq);
        let cos = phi.dot(&(gram * &v)).abs() / (phi.dot(&(gram * &phi)) * v.dot(&(gram * &v))).sqrt();
        assert!(cos > 1.0 - 1e-6, "cos {cos}");
        assert!(conjugate_symmetry_defect(&s0.eigen.eigenvalues) < 1e-8);
    }

    #[test]
    fn biorthogonality_and_riesz() {
        let d = decomp(64, 1);
        for (i, a) in d.modes.iter().enumerate() {
            for (j, b) in d.modes.iter().enumerate() {
                let v = if a.ell == b.ell && a.m == b.m { dot(&a.phi, &b.dual) } else { 0.0 };
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-8);
            }
        }
        let phi1 = vec![Component { m: 0, field: d.grid.field(0, d.modes[0].phi.clone()) }];
        let (pu, ps) = d.riesz_project(&phi1).unwrap();
        assert!(ps[0].field.values.iter().all(|v| v.abs() < 1e-8));
        assert!(pu[0].field.values.iter().zip(&phi1[0].field.values).all(|(a, b)| (a - b).abs() < 1e-8));
        // H^k duality of ψ
        let psi = d.psi(0).unwrap();
        let hk = d.sector(0).unwrap().eigen.op.hk_inner(&d.modes[0].phi, &psi);
        assert!((hk - 1.0).abs() < 1e-8);
    }

    #[test]
    fn modified_space_identities() {
        let d = decomp(64, 1);
        let mut prev = f64::INFINITY;
        for &r in &[5.0, 10.0, 20.0, 40.0] {
            let ms = d.build_modified(r).unwrap();
            assert!(ms.defect_max() < prev);
            prev = ms.defect_max();
            for p in &ms.phi_t {
                for (x, v) in d.grid.r().iter().zip(p) {
                    if *x >= 2.0 * r {
                        assert_eq!(*v, 0.0);
                    }
                }
            }
        }
        assert!(d.build_modified(60.0).is_err());
        assert!(d.build_modified(-1.0).is_err());
    }

    #[test]
    fn jordan_coordinates_handle_rotation_blocks() {
        let j = DMatrix::from_row_slice(3, 3, &[0.3, 2.0, 5.0, -1.0, 0.3, 1.0, 0.0, 0.0, 0.8]);
        let jc = JordanCoordinates::new(&j, 0.05).unwrap();
        let back = &jc.v * &jc.j_b * &jc.v_inv;
        assert!((back - &j).amax() < 1e-10);
        assert!(jc.coercivity() >= 0.3 - 0.05 / 10.0 - 1e-12);
        assert!((jc.j_b[(0, 0)] - jc.j_b[(1, 1)]).abs() < 1e-10 || (jc.j_b[(1, 1)] - jc.j_b[(2, 2)]).abs() < 1e-10);
    }
}
