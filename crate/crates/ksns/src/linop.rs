//! The linearized operator `𝓛 = 𝓛₀ + 𝓛′` around `Q`.
//!
//! `𝓛₀f = −Δf + ½Λf` and `𝓛′f = −2Qf − ∇Δ⁻¹Q·∇f − ∇Q·∇Δ⁻¹f`, restricted to one
//! spherical-harmonic sector at a time.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grids::{poisson_matrix, BoxField, FourierGrid3, RadialField, RadialGrid};
use crate::profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    L0,
    LPrime,
    L,
}

/// Dense realization of `𝓛₀`, `𝓛′` and `𝓛` in one sector.
///
/// The last row of `𝓛₀` is an outflow closure: at `r_max` the diffusion term
/// `f″` is dropped and the first-order part (drift, `2f′/r`, angular term) is
/// kept, which lets the scaling drift carry slowly decaying tails out of the
/// domain without a boundary layer.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub ell: usize,
    pub k: usize,
    pub grid: Arc<RadialGrid>,
    pub l0: DMatrix<f64>,
    pub lprime: DMatrix<f64>,
    pub l: DMatrix<f64>,
    /// `H^k` Gram matrix.
    pub gram: DMatrix<f64>,
    /// Solution operator of the sector Poisson problem used inside `𝓛′`.
    pub poisson: DMatrix<f64>,
}

impl SectorOperator {
    pub fn assemble(ell: usize, grid: Arc<RadialGrid>, k: usize) -> Result<Self> {
        let l0 = l0_matrix(&grid, ell);
        let n = grid.n();
        let r = grid.r();
        let d1 = grid.d1(ell);
        // sector-ℓ eigenfunction tails decay like r^{-ℓ-2}
        let poisson = poisson_matrix(&grid, ell, Some(ell as f64 + 2.0))?;
        let dp = d1 * &poisson;
        let lprime = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { -2.0 * profile::q(r[i]) } else { 0.0 };
            diag - profile::inv_lap_q_dr(r[i]) * d1[(i, j)] - profile::dq(r[i]) * dp[(i, j)]
        });
        let l = &l0 + &lprime;
        let gram = grid.gram(ell, k);
        Ok(Self { ell, k, grid, l0, lprime, l, gram, poisson })
    }

    pub fn matrix(&self, which: Which) -> &DMatrix<f64> {
        match which {
            Which::L0 => &self.l0,
            Which::LPrime => &self.lprime,
            Which::L => &self.l,
        }
    }

    /// Index of the far-field closure row.
    pub fn closure_row(&self) -> usize {
        self.grid.n() - 1
    }

    pub fn apply(&self, which: Which, f: &RadialField) -> Result<RadialField> {
        self.grid.check(f)?;
        if f.ell != self.ell {
            return invalid(format!("field in sector {} applied to operator of sector {}", f.ell, self.ell));
        }
        let v = self.matrix(which) * DVector::from_column_slice(&f.values);
        Ok(self.grid.field(self.ell, v.as_slice().to_vec()))
    }

    /// `(f, g)_{H^k}` of raw coefficient vectors.
    pub fn hk_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let fv = DVector::from_column_slice(f);
        fv.dot(&(&self.gram * DVector::from_column_slice(g)))
    }
}

pub fn l0_matrix(grid: &RadialGrid, ell: usize) -> DMatrix<f64> {
    let n = grid.n();
    let r = grid.r();
    let d1 = grid.d1(ell);
    let lap = grid.lap(ell);
    let ang = (ell * (ell + 1)) as f64;
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        -lap[(i, j)] + id + 0.5 * r[i] * d1[(i, j)]
    });
    let last = n - 1;
    let rm = r[last];
    for j in 0..n {
        m[(last, j)] = (0.5 * rm - 2.0 / rm) * d1[(last, j)];
    }
    m[(last, last)] += ang / (rm * rm) + 1.0;
    m
}

/// Galerkin matrix `S_ij = (𝓛₀ b_j, b_i)_{L²_ω}`, `ω = e^{−r²/4}`, on the first `m`
/// functions `r^{ℓ+2j} e^{−r²/16}` orthonormalized in `L²_ω`. Symmetric because
/// `𝓛₀` is self-adjoint in `L²_ω`.
pub fn omega_galerkin(grid: &RadialGrid, ell: usize, m: usize) -> DMatrix<f64> {
    let n = grid.n();
    let r = grid.r();
    let wo: Vec<f64> = grid
        .weights()
        .iter()
        .zip(r)
        .map(|(w, &x)| 4.0 * PI * w * (-x * x / 4.0).exp())
        .collect();
    let inner = |a: &DVector<f64>, b: &DVector<f64>| (0..n).map(|i| wo[i] * a[i] * b[i]).sum::<f64>();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut v = DVector::from_iterator(
            n,
            r.iter().map(|&x| (-x * x / 16.0).exp() * x.powi((ell + 2 * j) as i32)),
        );
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&v, b);
                v -= b * c;
            }
        }
        let nv = inner(&v, &v).sqrt();
        basis.push(v / nv);
    }
    let l0 = l0_matrix(grid, ell);
    DMatrix::from_fn(m, m, |i, j| inner(&(&l0 * &basis[j]), &basis[i]))
}

/// `e^{−z} i_ℓ(z)` for the modified spherical Bessel function of the first kind, `z ≥ 0`.
/// The `count` smallest real parts of the collocation spectrum of `𝓛₀` in sector `ℓ`.
pub fn l0_ladder(grid: &RadialGrid, ell: usize, count: usize) -> Vec<f64> {
    let mut ev: Vec<f64> = l0_matrix(grid, ell).complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev.truncate(count);
    ev
}

pub fn scaled_sph_bessel_i(ell: usize, z: f64) -> f64 {
    if z == 0.0 {
        return if ell == 0 { 1.0 } else { 0.0 };
    }
    if z < 20.0 + ell as f64 {
        bessel_series(ell, z)
    } else {
        bessel_closed(ell, z)
    }
}

// i_ℓ(z) = z^ℓ/(2ℓ+1)!! Σ_k (z²/2)^k / (k! (2ℓ+3)(2ℓ+5)…(2ℓ+2k+1))
fn bessel_series(ell: usize, z: f64) -> f64 {
    let mut lead = 1.0;
    for j in 0..ell {
        lead *= z / (2 * j + 3) as f64;
    }
    let half = 0.5 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1;
    loop {
        term *= half / (k as f64 * (2 * ell + 2 * k + 1) as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1;
    }
    lead * sum * (-z).exp()
}

// closed forms of i₀, i₁ and upward recurrence, stable for z > ℓ
fn bessel_closed(ell: usize, z: f64) -> f64 {
    let e2 = (-2.0 * z).exp();
    let mut a = (1.0 - e2) / (2.0 * z);
    if ell == 0 {
        return a;
    }
    let mut b = ((z - 1.0) + (z + 1.0) * e2) / (2.0 * z * z);
    for l in 1..ell {
        let c = a - (2 * l + 1) as f64 / z * b;
        a = b;
        b = c;
    }
    b
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return invalid(format!("semigroup time must be finite and >= 0, got {tau}"));
    }
    Ok(())
}

/// `e^{−τ𝓛₀}f` for one radial sector, by quadrature of the sector heat kernel.
///
/// `(G_λ ∗ f)(ρ) = (4πλ)^{−3/2} 4π ∫ e^{−(ρ−s)²/4λ} [e^{−z} i_ℓ(z)] f(s) s² ds`,
/// `z = ρs/2λ`, evaluated at `ρ = e^{−τ/2} r_i` by the trapezoid rule on a uniform
/// window of half-width `12√λ` (the integrand is even in `s`, so the rule is
/// spectrally accurate up to the origin). Beyond `r_max` the data are continued
/// by their outer value.
pub fn semigroup_l0(grid: &RadialGrid, f: &RadialField, tau: f64) -> Result<RadialField> {
    grid.check(f)?;
    check_tau(tau)?;
    if tau == 0.0 {
        return Ok(f.clone());
    }
    let lam = -(-tau).exp_m1();
    let c = (-0.5 * tau).exp();
    let amp = (-tau).exp();
    let ell = f.ell;
    let rmax = grid.r_max();
    let outer = f.values[grid.n() - 1];
    let eval = |s: f64| if s <= rmax { grid.interpolate(&f.values, ell, s).unwrap_or(outer) } else { outer };
    let sl = lam.sqrt();
    let h = (sl / 6.0).min(0.02);
    let half_w = 12.0 * sl;
    let pref = 4.0 * PI * (4.0 * PI * lam).powf(-1.5);
    let out: Vec<f64> = grid
        .r()
        .iter()
        .map(|&ri| {
            let rho = c * ri;
            let lo = ((rho - half_w) / h).floor().max(0.0) as usize;
            let hi = ((rho + half_w) / h).ceil() as usize;
            let mut s = 0.0;
            for j in lo..=hi {
                let sj = j as f64 * h;
                let z = rho * sj / (2.0 * lam);
                let kern = (-(rho - sj) * (rho - sj) / (4.0 * lam)).exp() * scaled_sph_bessel_i(ell, z);
                let wgt = if j == 0 { 0.5 } else { 1.0 };
                s += wgt * kern * eval(sj) * sj * sj;
            }
            amp * pref * h * s
        })
        .collect();
    Ok(grid.field(ell, out))
}

/// Exact `e^{−τ𝓛₀}` on the Fourier box, `amp · M ⊗ M ⊗ M`, with `M` the Gaussian
/// multiplier `e^{−(1−e^{−τ})|k|²}` followed by resampling at `e^{−τ/2}y`.
/// The density uses `amp = e^{−τ}`, the velocity `amp = e^{−τ/2}`.
#[derive(Debug, Clone)]
pub struct BoxPropagator {
    pub tau: f64,
    pub amp: f64,
    m: DMatrix<f64>,
}

impl BoxPropagator {
    pub fn new(grid: &FourierGrid3, tau: f64, amp: f64) -> Result<Self> {
        check_tau(tau)?;
        let lam = -(-tau).exp_m1();
        let c = (-0.5 * tau).exp();
        let targets: Vec<f64> = grid.coords().iter().map(|&x| c * x).collect();
        let m = grid.resample_matrix(&targets, |k| (-lam * k * k).exp());
        Ok(Self { tau, amp, m })
    }

    pub fn density(grid: &FourierGrid3, tau: f64) -> Result<Self> {
        Self::new(grid, tau, (-tau).exp())
    }

    pub fn velocity(grid: &FourierGrid3, tau: f64) -> Result<Self> {
        Self::new(grid, tau, (-0.5 * tau).exp())
    }

    pub fn apply(&self, grid: &FourierGrid3, f: &[f64]) -> Vec<f64> {
        let mut out = grid.apply_separable(&self.m, f);
        for v in &mut out {
            *v *= self.amp;
        }
        out
    }
}

pub fn semigroup_l0_box(grid: &FourierGrid3, f: &BoxField, tau: f64) -> Result<BoxField> {
    if f.values.len() != grid.len() {
        return invalid("box field does not match the grid");
    }
    Ok(BoxField { values: BoxPropagator::density(grid, tau)?.apply(grid, &f.values) })
}

/// `(𝓛₀ − λ)⁻¹f = ∫₀^∞ e^{λτ} e^{−τ𝓛₀}f dτ`, by Gauss-Legendre panels of growing
/// width until the panel contribution is below `1e−12` of the accumulated value.
///
/// `Re λ ≥ 1` is rejected outright (the bottom of the discrete spectrum); for
/// `1/4 ≤ Re λ < 1` the result is returned only if the tail is seen to converge.
pub fn resolvent_l0(grid: &RadialGrid, f: &RadialField, lambda: Complex64) -> Result<(RadialField, RadialField)> {
    grid.check(f)?;
    if !(lambda.re < 1.0) {
        return Err(Error::Domain(format!("resolvent needs Re λ < 1, got {lambda}")));
    }
    let (gx, gw) = crate::grids::gauss_legendre(16);
    let n = grid.n();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut a = 0.0;
    let mut width: f64 = 0.25;
    let mut quiet = 0;
    while a < 4000.0 {
        let b = a + width;
        let mut panel = vec![Complex64::new(0.0, 0.0); n];
        for (x, w) in gx.iter().zip(&gw) {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let s = semigroup_l0(grid, f, t)?;
            let e = (lambda * t).exp() * (0.5 * (b - a) * w);
            for (p, v) in panel.iter_mut().zip(&s.values) {
                *p += e * v;
            }
        }
        let pn = panel.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        for (s, p) in acc.iter_mut().zip(&panel) {
            *s += p;
        }
        let an = acc.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if !an.is_finite() {
            break;
        }
        if pn <= 1e-12 * an.max(1e-300) {
            quiet += 1;
            if quiet >= 2 {
                let re = acc.iter().map(|c| c.re).collect();
                let im = acc.iter().map(|c| c.im).collect();
                return Ok((grid.field(f.ell, re), grid.field(f.ell, im)));
            }
        } else {
            quiet = 0;
        }
        a = b;
        width = (2.0 * width).min(32.0);
    }
    Err(Error::Domain(format!("Laplace integral of the semigroup does not converge at λ = {lambda}")))
}
