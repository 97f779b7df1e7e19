use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::field::RadialField;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_MAP_SCALE: f64 = 6.0;
pub const DEFAULT_R_MAX: f64 = 100.0;

/// Mapped Chebyshev collocation grid on `(0, r_max]`.
///
/// The grid is the positive half of a Chebyshev-Gauss-Lobatto grid with an odd
/// number of intervals on `[-1, 1]`, mapped by `r = L tan(θx)`, `θ = atan(r_max/L)`.
/// There is no node at the origin. A field in sector `ℓ` has parity `(-1)^ℓ` under
/// `r → -r`, and the differentiation matrices are folded accordingly, which
/// builds the regularity `f ~ r^ℓ` into the basis.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    n: usize,
    map_scale: f64,
    r_max: f64,
    id: u64,
    r: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
    d1: [DMatrix<f64>; 2],
    d2: [DMatrix<f64>; 2],
}

impl RadialGrid {
    pub fn new(n: usize, map_scale: f64, r_max: f64) -> Result<Self> {
        if n < 2 {
            return invalid(format!("radial grid needs n >= 2, got {n}"));
        }
        if !(map_scale > 0.0 && r_max > 0.0) || !map_scale.is_finite() || !r_max.is_finite() {
            return invalid("radial grid needs positive map scale and outer radius");
        }
        let nn = 2 * n - 1;
        let (d, xs) = cheb(nn);
        let theta = (r_max / map_scale).atan();
        let rp: Vec<f64> = xs
            .iter()
            .map(|&x| map_scale * theta / (theta * x).cos().powi(2))
            .collect();
        let cc = clenshaw_curtis(nn);
        // nodes with x > 0 in increasing r, and their mirror images
        let idx: Vec<usize> = (0..n).rev().collect();
        let mir: Vec<usize> = idx.iter().map(|&i| nn - i).collect();
        let r: Vec<f64> = idx.iter().map(|&i| map_scale * (theta * xs[i]).tan()).collect();
        let w: Vec<f64> = idx
            .iter()
            .zip(&r)
            .map(|(&i, &ri)| cc[i] * rp[i] * ri * ri)
            .collect();
        let dr = DMatrix::from_fn(nn + 1, nn + 1, |i, j| d[(i, j)] / rp[i]);
        let d2r = &dr * &dr;
        let fold = |m: &DMatrix<f64>, p: f64| {
            DMatrix::from_fn(n, n, |a, b| m[(idx[a], idx[b])] + p * m[(idx[a], mir[b])])
        };
        let d1 = [fold(&dr, 1.0), fold(&dr, -1.0)];
        let d2 = [fold(&d2r, 1.0), fold(&d2r, -1.0)];
        let id = fingerprint(n, map_scale, r_max);
        Ok(Self { n, map_scale, r_max, id, r, x: xs, w, d1, d2 })
    }

    pub fn with_defaults(n: usize) -> Result<Self> {
        Self::new(n, DEFAULT_MAP_SCALE, DEFAULT_R_MAX)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn map_scale(&self) -> f64 {
        self.map_scale
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Nodes, strictly increasing.
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Weights for `∫₀^{r_max} f(r) r² dr`.
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// First-derivative matrix for sector `ℓ`.
    pub fn d1(&self, ell: usize) -> &DMatrix<f64> {
        &self.d1[ell % 2]
    }

    pub fn d2(&self, ell: usize) -> &DMatrix<f64> {
        &self.d2[ell % 2]
    }

    /// Sector Laplacian `d²/dr² + (2/r) d/dr − ℓ(ℓ+1)/r²`.
    pub fn lap(&self, ell: usize) -> DMatrix<f64> {
        let l = (ell * (ell + 1)) as f64;
        let d1 = self.d1(ell);
        let mut m = self.d2(ell).clone();
        for i in 0..self.n {
            let ri = self.r[i];
            for j in 0..self.n {
                m[(i, j)] += 2.0 / ri * d1[(i, j)];
            }
            m[(i, i)] -= l / (ri * ri);
        }
        m
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.r.iter().map(|&r| f(r)).collect()
    }

    /// `(f, g)_{L²(ℝ³)}` for two sector fields, `4π ∫ f g r² dr`.
    pub fn l2_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        4.0 * PI * self.w.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum::<f64>()
    }

    /// Gram matrix of the `H^k` inner product `(f,g)_{L²} + (D^k f, D^k g)_{L²}` in sector `ℓ`.
    /// `D^{2j} = Δ^j`, `D^{2j+1} = ∇Δ^j`.
    pub fn gram(&self, ell: usize, k: usize) -> DMatrix<f64> {
        let n = self.n;
        let wd = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            self.w.iter().map(|w| 4.0 * PI * w),
        ));
        let mut g = wd.clone();
        if k == 0 {
            return g;
        }
        let lap = self.lap(ell);
        let mut p = DMatrix::<f64>::identity(n, n);
        for _ in 0..k / 2 {
            p = &lap * p;
        }
        if k % 2 == 0 {
            g += p.transpose() * &wd * &p;
        } else {
            let dp = self.d1(ell) * &p;
            g += dp.transpose() * &wd * &dp;
            let l = (ell * (ell + 1)) as f64;
            if l > 0.0 {
                let s = DMatrix::from_fn(n, n, |i, j| l.sqrt() / self.r[i] * p[(i, j)]);
                g += s.transpose() * &wd * &s;
            }
        }
        g
    }

    /// Homogeneous seminorm Gram matrix `(D^k f, D^k g)_{L²}`.
    pub fn gram_dot(&self, ell: usize, k: usize) -> DMatrix<f64> {
        let mut g = self.gram(ell, k);
        for i in 0..self.n {
            g[(i, i)] -= 4.0 * PI * self.w[i];
        }
        g
    }

    pub fn sobolev_inner(&self, f: &RadialField, g: &RadialField, k: usize) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        if f.ell != g.ell {
            return invalid("sobolev inner product of fields in different sectors");
        }
        let gm = self.gram(f.ell, k);
        let fv = DVector::from_column_slice(&f.values);
        let gv = DVector::from_column_slice(&g.values);
        Ok(fv.dot(&(gm * gv)))
    }

    pub fn check(&self, f: &RadialField) -> Result<()> {
        if f.grid_id != self.id || f.values.len() != self.n {
            return Err(Error::InvalidArgument("field does not live on this radial grid".into()));
        }
        Ok(())
    }

    pub fn field(&self, ell: usize, values: Vec<f64>) -> RadialField {
        debug_assert_eq!(values.len(), self.n);
        RadialField { ell, grid_id: self.id, values }
    }

    /// Barycentric interpolant of sector data at radius `rr ∈ [0, r_max]`,
    /// or `None` beyond the outer node.
    pub fn interpolate(&self, values: &[f64], ell: usize, rr: f64) -> Option<f64> {
        let rr = rr.abs();
        if rr > self.r_max * (1.0 + 1e-14) {
            return None;
        }
        let nn = self.x.len() - 1;
        let theta = (self.r_max / self.map_scale).atan();
        let xv = (rr / self.map_scale).atan() / theta;
        let p = if ell % 2 == 0 { 1.0 } else { -1.0 };
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, &xj) in self.x.iter().enumerate() {
            // full-grid sample: positive half j < n holds values[n-1-j]
            let fj = if j < self.n {
                values[self.n - 1 - j]
            } else {
                p * values[j - self.n]
            };
            let dx = xv - xj;
            if dx == 0.0 {
                return Some(fj);
            }
            let mut c = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == nn {
                c *= 0.5;
            }
            let t = c / dx;
            num += t * fj;
            den += t;
        }
        Some(num / den)
    }

    /// Interpolation matrix onto arbitrary radii (rows beyond `r_max` are zero).
    pub fn interpolation_matrix(&self, ell: usize, targets: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(targets.len(), self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            for (i, &t) in targets.iter().enumerate() {
                m[(i, j)] = self.interpolate(&e, ell, t).unwrap_or(0.0);
            }
            e[j] = 0.0;
        }
        m
    }
}

fn fingerprint(n: usize, a: f64, b: f64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in [n as u64, a.to_bits(), b.to_bits()] {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Chebyshev differentiation matrix on `x_j = cos(πj/N)`.
pub(crate) fn cheb(nn: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..=nn).map(|j| (PI * j as f64 / nn as f64).cos()).collect();
    let c: Vec<f64> = (0..=nn)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == nn {
                2.0 * s
            } else {
                s
            }
        })
        .collect();
    let mut d = DMatrix::zeros(nn + 1, nn + 1);
    for i in 0..=nn {
        let mut row = 0.0;
        for j in 0..=nn {
            if i != j {
                let v = c[i] / c[j] / (x[i] - x[j]);
                d[(i, j)] = v;
                row += v;
            }
        }
        d[(i, i)] = -row;
    }
    (d, x)
}

/// Clenshaw-Curtis weights for the nodes `cos(πj/N)` on `[-1, 1]`.
pub(crate) fn clenshaw_curtis(nn: usize) -> Vec<f64> {
    let mut w = vec![0.0; nn + 1];
    let nf = nn as f64;
    let theta: Vec<f64> = (0..=nn).map(|j| PI * j as f64 / nf).collect();
    let mut v = vec![1.0; nn.saturating_sub(1)];
    if nn % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[nn] = w[0];
        for k in 1..nn / 2 {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * k as f64 * theta[i + 1]).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta[i + 1]).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[nn] = w[0];
        for k in 1..=(nn - 1) / 2 {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * k as f64 * theta[i + 1]).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
    }
    for (i, vi) in v.iter().enumerate() {
        w[i + 1] = 2.0 * vi / nf;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_quad_err(n: usize) -> f64 {
        let g = RadialGrid::with_defaults(n).unwrap();
        let s: f64 = g.weights().iter().zip(g.r()).map(|(w, r)| w * (-r * r / 4.0).exp()).sum();
        (s - 2.0 * PI.sqrt()).abs() / (2.0 * PI.sqrt())
    }

    #[test]
    fn nodes_increase_without_origin() {
        let g = RadialGrid::with_defaults(32).unwrap();
        assert!(g.r()[0] > 0.0);
        assert!(g.r().windows(2).all(|p| p[1] > p[0]));
        assert!((g.r()[31] - DEFAULT_R_MAX).abs() < 1e-12);
    }

    #[test]
    fn quadrature_and_derivative_accuracy() {
        assert!(gauss_quad_err(64) < 1e-10);
        let g = RadialGrid::with_defaults(64).unwrap();
        let r2 = DVector::from_vec(g.sample(|r| r * r));
        let d = g.d1(0) * r2;
        for (i, &r) in g.r().iter().enumerate() {
            assert!((d[i] - 2.0 * r).abs() <= 1e-9 * (2.0 * r).max(1.0));
        }
    }

    #[test]
    fn spectral_convergence() {
        assert!(gauss_quad_err(32) < gauss_quad_err(16) / 4.0);
        let err = |n: usize| {
            let g = RadialGrid::with_defaults(n).unwrap();
            let f = DVector::from_vec(g.sample(|r| (-r * r / 4.0).exp()));
            let d = g.d1(0) * f;
            g.r()
                .iter()
                .enumerate()
                .map(|(i, &r)| (d[i] + 0.5 * r * (-r * r / 4.0).exp()).abs())
                .fold(0.0, f64::max)
        };
        assert!(err(32) < err(16) / 4.0);
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = RadialGrid::with_defaults(96).unwrap();
        let f = g.field(0, g.sample(|r| (-r * r / 4.0).exp()));
        let n2 = g.sobolev_inner(&f, &f, 0).unwrap();
        assert!((n2 - (2.0 * PI).powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn gram_matches_direct_laplacian() {
        let g = RadialGrid::with_defaults(48).unwrap();
        let vals = g.sample(|r| r * (-r * r / 3.0).exp());
        let f = g.field(1, vals.clone());
        let lap = g.lap(1) * DVector::from_column_slice(&vals);
        let direct = g.l2_inner(&vals, &vals) + g.l2_inner(lap.as_slice(), lap.as_slice());
        assert!((g.sobolev_inner(&f, &f, 2).unwrap() - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn interpolation_reproduces_smooth_functions() {
        let g = RadialGrid::with_defaults(64).unwrap();
        let even = g.sample(|r| (-r * r / 5.0).exp());
        let odd = g.sample(|r| r * (-r * r / 5.0).exp());
        for &t in &[0.0, 0.3, 1.7, 5.2, 12.0] {
            let e = g.interpolate(&even, 0, t).unwrap();
            let o = g.interpolate(&odd, 1, t).unwrap();
            assert!((e - (-t * t / 5.0).exp()).abs() < 1e-10);
            assert!((o - t * (-t * t / 5.0).exp()).abs() < 1e-10);
        }
        assert!(g.interpolate(&even, 0, DEFAULT_R_MAX + 1.0).is_none());
    }

    #[test]
    fn mismatched_fields_rejected() {
        let a = RadialGrid::with_defaults(16).unwrap();
        let b = RadialGrid::with_defaults(24).unwrap();
        let f = b.field(0, vec![0.0; 24]);
        assert!(a.sobolev_inner(&f, &f, 1).is_err());
    }
}
