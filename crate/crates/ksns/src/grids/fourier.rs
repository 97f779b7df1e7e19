use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::VectorField;
use crate::error::{invalid, Result};

/// Periodic box `[-B, B)³` with `n` points per direction, stored row-major with
/// the last index fastest. Wavenumbers are `πm/B`.
#[derive(Clone)]
pub struct FourierGrid3 {
    n: usize,
    b: f64,
    h: f64,
    x: Vec<f64>,
    k: Vec<f64>,
    kd: Vec<f64>,
    keep: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierGrid3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierGrid3").field("n", &self.n).field("b", &self.b).finish()
    }
}

impl FourierGrid3 {
    /// Any even `n ≥ 4` is accepted; sizes with small prime factors keep the FFTs fast.
    pub fn new(n: usize, b: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return invalid(format!("Fourier box needs an even n >= 4, got {n}"));
        }
        if !(b > 0.0) || !b.is_finite() {
            return invalid(format!("Fourier box half-width must be positive, got {b}"));
        }
        let h = 2.0 * b / n as f64;
        let x = (0..n).map(|i| -b + h * i as f64).collect();
        let m_of = |i: usize| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        let k: Vec<f64> = (0..n).map(|i| PI * m_of(i) / b).collect();
        let kd = (0..n).map(|i| if i == n / 2 { 0.0 } else { k[i] }).collect();
        let keep = (0..n).map(|i| 3.0 * m_of(i).abs() < n as f64).collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Self { n, b, h, x, k, kd, keep, fwd, inv })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.b
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// One-dimensional coordinates `-B + h i`.
    pub fn coords(&self) -> &[f64] {
        &self.x
    }

    /// One-dimensional wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.n + l
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        [self.x[idx / (n * n)], self.x[(idx / n) % n], self.x[idx % n]]
    }

    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }

    /// `∫ f dy` over the box (rectangle rule, spectrally accurate for periodic data).
    pub fn integral(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.h.powi(3)
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        buf
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse(&self, mut fh: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut fh, false);
        let s = 1.0 / self.len() as f64;
        fh.iter().map(|c| c.re * s).collect()
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let n = self.n;
        plan.process(buf);
        let mut scratch = vec![Complex64::new(0.0, 0.0); buf.len()];
        // axis 1: (i, j, l) -> (i, l, j)
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    scratch[(i * n + l) * n + j] = buf[(i * n + j) * n + l];
                }
            }
        }
        plan.process(&mut scratch);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    buf[(i * n + j) * n + l] = scratch[(i * n + l) * n + j];
                }
            }
        }
        // axis 0: (i, j, l) -> (j, l, i)
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    scratch[(j * n + l) * n + i] = buf[(i * n + j) * n + l];
                }
            }
        }
        plan.process(&mut scratch);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    buf[(i * n + j) * n + l] = scratch[(j * n + l) * n + i];
                }
            }
        }
    }

    #[inline]
    fn mode(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Derivative wavenumber vector of a mode (Nyquist components zeroed).
    #[inline]
    pub fn kvec(&self, idx: usize) -> [f64; 3] {
        let (a, b, c) = self.mode(idx);
        [self.kd[a], self.kd[b], self.kd[c]]
    }

    /// `|k|²` of a mode, Nyquist included.
    #[inline]
    pub fn k2(&self, idx: usize) -> f64 {
        let (a, b, c) = self.mode(idx);
        self.k[a] * self.k[a] + self.k[b] * self.k[b] + self.k[c] * self.k[c]
    }

    /// Whether a mode survives the 2/3 rule.
    #[inline]
    pub fn kept(&self, idx: usize) -> bool {
        let (a, b, c) = self.mode(idx);
        self.keep[a] && self.keep[b] && self.keep[c]
    }

    pub fn dealias(&self, fh: &mut [Complex64]) {
        for (i, v) in fh.iter_mut().enumerate() {
            if !self.kept(i) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn deriv_hat(&self, fh: &[Complex64], axis: usize) -> Vec<Complex64> {
        fh.iter()
            .enumerate()
            .map(|(i, v)| Complex64::new(0.0, self.kvec(i)[axis]) * v)
            .collect()
    }

    pub fn grad(&self, f: &[f64]) -> [Vec<f64>; 3] {
        let fh = self.forward(f);
        [0, 1, 2].map(|d| self.inverse(self.deriv_hat(&fh, d)))
    }

    /// `Δ⁻¹` in Fourier space with the zero mode set to zero.
    pub fn inv_lap_hat(&self, fh: &[Complex64]) -> Vec<Complex64> {
        fh.iter()
            .enumerate()
            .map(|(i, v)| {
                let k2 = self.k2(i);
                if k2 == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    -v / k2
                }
            })
            .collect()
    }

    /// `∇Δ⁻¹f`.
    pub fn grad_inv_lap(&self, f: &[f64]) -> [Vec<f64>; 3] {
        let ph = self.inv_lap_hat(&self.forward(f));
        [0, 1, 2].map(|d| self.inverse(self.deriv_hat(&ph, d)))
    }

    pub fn divergence(&self, u: &VectorField) -> Vec<f64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.len()];
        for d in 0..3 {
            let dh = self.deriv_hat(&self.forward(&u.comps[d]), d);
            for (a, v) in acc.iter_mut().zip(dh) {
                *a += v;
            }
        }
        self.inverse(acc)
    }

    /// Leray projection `û − k(k·û)/|k|²` applied in place to transformed components.
    pub fn leray_hat(&self, uh: &mut [Vec<Complex64>; 3]) {
        for i in 0..self.len() {
            let k = self.kvec(i);
            let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if kk == 0.0 {
                continue;
            }
            let kdotu = (uh[0][i] * k[0] + uh[1][i] * k[1] + uh[2][i] * k[2]) / kk;
            for d in 0..3 {
                uh[d][i] -= kdotu * k[d];
            }
        }
    }

    pub fn leray_project(&self, u: &VectorField) -> VectorField {
        let mut uh = [0, 1, 2].map(|d| self.forward(&u.comps[d]));
        self.leray_hat(&mut uh);
        let [a, b, c] = uh;
        VectorField { comps: [self.inverse(a), self.inverse(b), self.inverse(c)], solenoidal: true }
    }

    /// Matrix `M[j, i]` mapping samples to values at `targets[j]` of the trigonometric
    /// interpolant after multiplying each mode by `mult(k)`.
    pub fn resample_matrix(&self, targets: &[f64], mult: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.n;
        let half = (n / 2) as i64;
        let kn = PI * half as f64 / self.b;
        let gn = mult(kn);
        let modes: Vec<(f64, f64)> = (-half + 1..half)
            .map(|m| {
                let k = PI * m as f64 / self.b;
                (k, mult(k))
            })
            .collect();
        DMatrix::from_fn(targets.len(), n, |j, i| {
            let t = targets[j];
            let xi = self.x[i];
            let mut s = 0.0;
            for &(k, g) in &modes {
                s += g * (k * (t - xi)).cos();
            }
            s += gn * (kn * (t + self.b)).cos() * (kn * (xi + self.b)).cos();
            s / n as f64
        })
    }

    /// Apply an `n × n` matrix along each of the three axes.
    pub fn apply_separable(&self, m: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let nn = n * n;
        let mt = m.transpose();
        let mut a = f.to_vec();
        let mut b = vec![0.0; f.len()];
        // last axis: column-major (n × n²) view, out = M · F
        {
            let src = DMatrixView::from_slice(&a, n, nn);
            let mut dst = DMatrixViewMut::from_slice(&mut b, n, nn);
            dst.gemm(1.0, m, &src, 0.0);
        }
        // middle axis: per slab, column-major (n × n) view [l, j], out = S · Mᵀ
        for i in 0..n {
            let src = DMatrixView::from_slice(&b[i * nn..(i + 1) * nn], n, n);
            let mut dst = DMatrixViewMut::from_slice(&mut a[i * nn..(i + 1) * nn], n, n);
            dst.gemm(1.0, &src, &mt, 0.0);
        }
        // first axis: column-major (n² × n) view, out = F · Mᵀ
        {
            let src = DMatrixView::from_slice(&a, nn, n);
            let mut dst = DMatrixViewMut::from_slice(&mut b, nn, n);
            dst.gemm(1.0, &src, &mt, 0.0);
        }
        b
    }

    /// Trigonometric interpolant at an arbitrary point.
    pub fn interpolate(&self, f: &[f64], p: [f64; 3]) -> f64 {
        let n = self.n;
        let w: Vec<DMatrix<f64>> = p.iter().map(|&t| self.resample_matrix(&[t], |_| 1.0)).collect();
        let mut plane = vec![0.0; n * n];
        for (ij, v) in plane.iter_mut().enumerate() {
            let row = &f[ij * n..(ij + 1) * n];
            *v = (0..n).map(|l| w[2][(0, l)] * row[l]).sum();
        }
        let mut line = vec![0.0; n];
        for (i, v) in line.iter_mut().enumerate() {
            *v = (0..n).map(|j| w[1][(0, j)] * plane[i * n + j]).sum();
        }
        (0..n).map(|i| w[0][(0, i)] * line[i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let g = FourierGrid3::new(12, 3.0).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let back = g.inverse(g.forward(&f));
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_sine() {
        let g = FourierGrid3::new(16, 5.0).unwrap();
        let b = g.half_width();
        let f = g.sample(|y| (PI * y[0] / b).sin());
        let d = g.grad(&f);
        for i in 0..g.len() {
            let y = g.point(i);
            assert!((d[0][i] - PI / b * (PI * y[0] / b).cos()).abs() < 1e-13);
            assert!(d[1][i].abs() < 1e-13 && d[2][i].abs() < 1e-13);
        }
    }

    #[test]
    fn leray_kills_gradients_and_keeps_curls() {
        let g = FourierGrid3::new(16, PI).unwrap();
        let phi = g.sample(|y| (y[0]).sin() * (2.0 * y[1]).cos() + (y[2]).cos());
        let grad = g.grad(&phi);
        let u = VectorField { comps: grad, solenoidal: false };
        assert!(g.leray_project(&u).max_abs() < 1e-12);
        // curl of (0, 0, sin x cos y) = (-sin x sin y, -cos x cos y, 0)
        let v = VectorField {
            comps: [
                g.sample(|y| -(y[0]).sin() * (y[1]).sin()),
                g.sample(|y| -(y[0]).cos() * (y[1]).cos()),
                vec![0.0; g.len()],
            ],
            solenoidal: false,
        };
        let pv = g.leray_project(&v);
        for d in 0..3 {
            for i in 0..g.len() {
                assert!((pv.comps[d][i] - v.comps[d][i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn resampling_reproduces_trig_polynomials() {
        let g = FourierGrid3::new(8, 2.0).unwrap();
        let targets = [0.13, -1.7, 1.99];
        let m = g.resample_matrix(&targets, |_| 1.0);
        let k = PI * 3.0 / 2.0;
        for (j, &t) in targets.iter().enumerate() {
            let v: f64 = (0..8).map(|i| m[(j, i)] * (k * g.coords()[i]).cos()).sum();
            assert!((v - (k * t).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn separable_identity() {
        let g = FourierGrid3::new(8, 2.0).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let id = g.resample_matrix(g.coords(), |_| 1.0);
        let out = g.apply_separable(&id, &f);
        for (a, b) in f.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = g.point(123);
        assert!((g.interpolate(&f, p) - f[123]).abs() < 1e-12);
    }
}
