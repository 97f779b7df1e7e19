use nalgebra::{DMatrix, DVector};

use super::{RadialField, RadialGrid};
use crate::error::{Error, Result};

/// Result of a sector Poisson solve.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub u: RadialField,
    /// The source did not decay at the outer node (`|f(r_max)| > 1e-6 max|f|`).
    pub far_field_warning: bool,
}

/// Dense solution operator `f ↦ u` of the sector Poisson problem
/// `u″ + (2/r)u′ − ℓ(ℓ+1)u/r² = f`.
///
/// Regularity at the origin comes from the parity-folded basis. The outer node
/// carries the Robin row `u′ + (ℓ+1)u/R = c`, exact for the decaying harmonic
/// `r^{−ℓ−1}`. With `tail_power = Some(p)` and `ℓ ≥ 1`, `c = −R f(R)/(p+ℓ−2)`
/// accounts for a source tail `f ~ r^{−p}` beyond `R`; otherwise `c = 0`.
/// For `ℓ = 0`, `u′` is fixed by the source alone and the row only sets the gauge.
pub fn poisson_matrix(grid: &RadialGrid, ell: usize, tail_power: Option<f64>) -> Result<DMatrix<f64>> {
    let n = grid.n();
    let rmax = grid.r_max();
    let mut a = grid.lap(ell);
    let d1 = grid.d1(ell);
    for j in 0..n {
        a[(n - 1, j)] = d1[(n - 1, j)];
    }
    a[(n - 1, n - 1)] += (ell + 1) as f64 / rmax;
    let mut b = DMatrix::<f64>::identity(n, n);
    b[(n - 1, n - 1)] = match tail_power {
        Some(p) if ell >= 1 => -rmax / (p + ell as f64 - 2.0),
        _ => 0.0,
    };
    let lu = a.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure(format!("singular Poisson matrix in sector {ell}")))?;
    let cond = a.norm() * inv.norm();
    if !(cond < 1e14) {
        return Err(Error::NumericalFailure(format!(
            "Poisson matrix in sector {ell} has condition number {cond:e}"
        )));
    }
    Ok(inv * b)
}

pub fn poisson_sector(grid: &RadialGrid, f: &RadialField) -> Result<PoissonSolution> {
    grid.check(f)?;
    let p = poisson_matrix(grid, f.ell, None)?;
    let u = p * DVector::from_column_slice(&f.values);
    let fmax = f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let far_field_warning = f.values[grid.n() - 1].abs() > 1e-6 * fmax;
    Ok(PoissonSolution { u: grid.field(f.ell, u.as_slice().to_vec()), far_field_warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile;

    #[test]
    fn potential_of_q_has_closed_form_gradient() {
        let g = RadialGrid::with_defaults(128).unwrap();
        let f = g.field(0, g.sample(profile::q));
        let sol = poisson_sector(&g, &f).unwrap();
        assert!(sol.far_field_warning);
        let du = g.d1(0) * DVector::from_column_slice(&sol.u.values);
        for (i, &r) in g.r().iter().enumerate() {
            assert!((du[i] - profile::inv_lap_q_dr(r)).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn homogeneous_problem_has_zero_solution() {
        let g = RadialGrid::with_defaults(64).unwrap();
        let sol = poisson_sector(&g, &g.field(1, vec![0.0; 64])).unwrap();
        assert!(sol.u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_source_against_quadrature() {
        // u'(r) = r⁻² ∫₀^r s² e^{-s²/4} ds, evaluated by composite Simpson
        let g = RadialGrid::with_defaults(96).unwrap();
        let f = g.field(0, g.sample(|r| (-r * r / 4.0).exp()));
        let sol = poisson_sector(&g, &f).unwrap();
        assert!(!sol.far_field_warning);
        let du = g.d1(0) * DVector::from_column_slice(&sol.u.values);
        for (i, &r) in g.r().iter().enumerate().filter(|(_, &r)| r < 20.0) {
            let m = 4000;
            let h = r / m as f64;
            let mut s = 0.0;
            for k in 0..=m {
                let x = k as f64 * h;
                let c = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                s += c * x * x * (-x * x / 4.0).exp();
            }
            let exact = s * h / 3.0 / (r * r);
            assert!((du[i] - exact).abs() < 1e-9, "r = {r}: {} vs {exact}", du[i]);
        }
    }

    #[test]
    fn laplacian_of_solution_recovers_source() {
        let g = RadialGrid::with_defaults(64).unwrap();
        let vals = g.sample(|r| r * r * (-r * r / 2.0).exp());
        let f = g.field(2, vals.clone());
        let u = poisson_sector(&g, &f).unwrap().u;
        let back = g.lap(2) * DVector::from_column_slice(&u.values);
        for i in 0..g.n() - 2 {
            assert!((back[i] - vals[i]).abs() < 1e-9);
        }
    }
}
