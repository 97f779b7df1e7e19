use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::grids::{poisson_matrix, RadialGrid};
use crate::linop::{SectorOperator, Which};

/// Radial renormalized Keller-Segel around `Q`, `Ψ = Q + ε`:
/// `∂_τε = −𝓛ε + ε′Φ′ + ε²` with `ΔΦ = ε`.
///
/// Strang splitting: the linear part `e^{−(dt/2)𝓛}` is a precomputed matrix
/// exponential, the quadratic part one SSP-RK2 step.
#[derive(Debug, Clone)]
pub struct RadialKs {
    pub op: SectorOperator,
    pub dt: f64,
    half: DMatrix<f64>,
    d1: DMatrix<f64>,
    /// `D₁ ∘ Δ⁻¹`.
    grad_inv_lap: DMatrix<f64>,
}

impl RadialKs {
    pub fn new(grid: Arc<RadialGrid>, k: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        let op = SectorOperator::assemble(0, grid.clone(), k)?;
        let half = (op.matrix(Which::L) * (-0.5 * dt)).exp();
        let d1 = grid.d1(0).clone();
        let grad_inv_lap = &d1 * poisson_matrix(&grid, 0, None)?;
        Ok(Self { op, dt, half, d1, grad_inv_lap })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.op.grid
    }

    /// `ε′Φ′ + ε²`.
    pub fn nonlinear(&self, eps: &DVector<f64>) -> DVector<f64> {
        let de = &self.d1 * eps;
        let dphi = &self.grad_inv_lap * eps;
        de.component_mul(&dphi) + eps.component_mul(eps)
    }

    pub fn step(&self, eps: &mut Vec<f64>, tau: f64) -> Result<()> {
        let e = &self.half * DVector::from_column_slice(eps);
        let k1 = self.nonlinear(&e);
        let e1 = &e + &k1 * self.dt;
        let k2 = self.nonlinear(&e1);
        let e2 = (&e + &e1 + &k2 * self.dt) * 0.5;
        let out = &self.half * e2;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { tau: tau + self.dt });
        }
        eps.copy_from_slice(out.as_slice());
        Ok(())
    }

    pub fn hk_norm(&self, f: &[f64]) -> f64 {
        self.op.hk_inner(f, f).max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile;

    fn ks(n: usize, dt: f64) -> RadialKs {
        RadialKs::new(Arc::new(RadialGrid::with_defaults(n).unwrap()), 2, dt).unwrap()
    }

    #[test]
    fn zero_perturbation_is_a_fixed_point() {
        let s = ks(48, 0.05);
        let mut e = vec![0.0; 48];
        for i in 0..20 {
            s.step(&mut e, i as f64 * 0.05).unwrap();
        }
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonlinear_term_matches_closed_form() {
        // ε = Q: ε′Φ′ + ε² = Q′F′ + Q²
        let s = ks(96, 0.1);
        let g = s.grid();
        let q = DVector::from_vec(g.sample(profile::q));
        let nl = s.nonlinear(&q);
        for (i, &r) in g.r().iter().enumerate().take(80) {
            let want = profile::dq(r) * profile::inv_lap_q_dr(r) + profile::q(r).powi(2);
            assert!((nl[i] - want).abs() < 1e-8, "r = {r}: {} vs {want}", nl[i]);
        }
    }

    #[test]
    fn second_order_in_time() {
        let g = Arc::new(RadialGrid::with_defaults(48).unwrap());
        let init: Vec<f64> = g.sample(|r| 0.05 * (-r * r / 2.0).exp());
        let run = |dt: f64| {
            let s = RadialKs::new(g.clone(), 2, dt).unwrap();
            let mut e = init.clone();
            let steps = (1.0 / dt).round() as usize;
            for i in 0..steps {
                s.step(&mut e, i as f64 * dt).unwrap();
            }
            e
        };
        let a = run(0.05);
        let b = run(0.025);
        let c = run(0.0125);
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let ratio = d(&a, &b) / d(&b, &c);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }
}
