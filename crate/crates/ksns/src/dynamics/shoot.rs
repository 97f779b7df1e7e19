use std::sync::Arc;

use nalgebra::DMatrix;

use super::{mu_at, physical_time, DeltaBudget, DiagnosticsRow, RadialKs, RunConfig};
use crate::error::{invalid, Error, Result};
use crate::grids::RadialGrid;
use crate::profile;
use crate::spectral::{cutoff, Component, ModifiedSpace, SpectralDecomposition};

/// First time the unstable part left the ball `‖ε̃_u‖_{B̃} ≤ δ₃e^{−(7/10)δ_gτ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Exit {
    pub tau: f64,
    /// `B̃` coordinates of `ε̃_u` at exit.
    pub coords: Vec<f64>,
    /// Backward difference of `e^{(7/5)δ_gτ}‖ε̃_u‖²_{B̃}` at exit.
    pub flux: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<DiagnosticsRow>,
    pub exit: Option<Exit>,
    pub final_state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootRecord {
    pub iteration: usize,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    /// Sign of the exiting coordinate at the midpoint, 0 if it never exited.
    pub exit_side: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootOutcome {
    pub a: Vec<f64>,
    pub records: Vec<ShootRecord>,
    /// Whether the final trajectory stayed in the unstable ball up to the end time.
    pub converged: bool,
    pub trajectory: Trajectory,
}

fn side_of(exit: &Option<Vec<f64>>, coord: usize) -> i8 {
    match exit {
        None => 0,
        Some(c) if c[coord] < 0.0 => -1,
        Some(_) => 1,
    }
}

/// Nested coordinate bisection on `a ∈ [−w, w]^dim`.
///
/// `run(a)` returns the `B̃` coordinates at exit, or `None` if the trajectory stayed
/// in the ball. Coordinate `i` is bisected on the sign of its exit coordinate, with
/// coordinates `i+1..` re-solved for every trial value.
pub fn nested_bisection(
    dim: usize,
    half_width: f64,
    tol: f64,
    max_iter: usize,
    run: &mut dyn FnMut(&[f64]) -> Result<Option<Vec<f64>>>,
    records: &mut Vec<ShootRecord>,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    fn solve(
        level: usize,
        prefix: &mut Vec<f64>,
        dim: usize,
        w: f64,
        tol: f64,
        max_iter: usize,
        run: &mut dyn FnMut(&[f64]) -> Result<Option<Vec<f64>>>,
        records: &mut Vec<ShootRecord>,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        if level == dim {
            let exit = run(prefix)?;
            return Ok((prefix.clone(), exit));
        }
        let mut eval = |x: f64, prefix: &mut Vec<f64>, records: &mut Vec<ShootRecord>| {
            prefix.push(x);
            let out = solve(level + 1, prefix, dim, w, tol, max_iter, run, records);
            prefix.pop();
            out
        };
        let (mut lo, mut hi) = (-w, w);
        let lo_out = eval(lo, prefix, records)?;
        let s_lo = side_of(&lo_out.1, level);
        if s_lo == 0 {
            return Ok(lo_out);
        }
        let hi_out = eval(hi, prefix, records)?;
        let s_hi = side_of(&hi_out.1, level);
        if s_hi == 0 {
            return Ok(hi_out);
        }
        if s_lo == s_hi {
            return Err(Error::SearchFailure(format!(
                "no bracket on coordinate {level}: both ends of [{lo}, {hi}] exit on side {s_lo}"
            )));
        }
        let mut best = lo_out;
        for _ in 0..max_iter {
            let mid = 0.5 * (lo + hi);
            let out = eval(mid, prefix, records)?;
            let s = side_of(&out.1, level);
            records.push(ShootRecord { iteration: records.len() + 1, bracket_lo: lo, bracket_hi: hi, exit_side: s });
            best = out;
            if s == 0 {
                break;
            }
            if s == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < tol {
                break;
            }
        }
        Ok(best)
    }
    let mut prefix = Vec::with_capacity(dim);
    solve(0, &mut prefix, dim, half_width, tol, max_iter, run, records)
}

/// Pure Keller-Segel radial run around `Q` with the initial datum
/// `Ψ₀ = χ_{R₀}Q + P̃_u((1−χ_{R₀})Q) + Σ a_jφ̃_j`.
#[derive(Debug, Clone)]
pub struct RadialExperiment {
    pub ks: RadialKs,
    pub space: ModifiedSpace,
    pub delta_g: f64,
    /// Budget after scaling to the initial datum.
    pub deltas: DeltaBudget,
    pub delta_scale: f64,
    pub mu0: f64,
    pub tau_end: f64,
    pub output_every: usize,
    /// `−P̃_s((1−χ_{R₀})Q)`.
    pub stable_init: Vec<f64>,
    gram_dot: DMatrix<f64>,
}

impl RadialExperiment {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        if !(cfg.mu0 > 0.0) {
            return invalid("radial runs need model.mu0 > 0 to report physical quantities");
        }
        let grid = Arc::new(RadialGrid::with_defaults(cfg.n)?);
        let ks = RadialKs::new(grid.clone(), cfg.k, cfg.dt)?;
        let decomp = SpectralDecomposition::new(grid.clone(), 0, cfg.k)?;
        let delta_g = cfg.delta_g.unwrap_or(decomp.delta_g());
        if !(delta_g > 0.0) {
            return Err(Error::NumericalFailure("no spectral gap measured in the radial sector".into()));
        }
        let space = decomp.build_modified(cfg.r_cut)?;
        let tail = grid.field(0, grid.sample(|r| (1.0 - cutoff(r / cfg.r0)) * profile::q(r)));
        let tail = vec![Component { m: 0, field: tail }];
        let pu = space.project(&tail)?;
        let stable_init: Vec<f64> = tail[0].field.values.iter().zip(&pu[0].field.values).map(|(t, p)| p - t).collect();
        let gram_dot = grid.gram_dot(0, cfg.k + 1);
        let mut exp = Self {
            ks,
            space,
            delta_g,
            deltas: cfg.deltas,
            delta_scale: 1.0,
            mu0: cfg.mu0,
            tau_end: cfg.tau_end,
            output_every: cfg.output_every,
            stable_init,
            gram_dot,
        };
        if cfg.auto_scale_deltas {
            let (hk, hk1) = (exp.ks.hk_norm(&exp.stable_init), exp.hk1_norm(&exp.stable_init));
            let s = (2.0 * hk / cfg.deltas.d1).max(2.0 * hk1 / cfg.deltas.d2).max(1.0);
            exp.delta_scale = s;
            exp.deltas = cfg.deltas.scaled(s);
        }
        Ok(exp)
    }

    pub fn modes(&self) -> usize {
        self.space.phi_t.len()
    }

    pub fn initial(&self, a: &[f64]) -> Vec<f64> {
        let mut e = self.stable_init.clone();
        for (c, p) in a.iter().zip(&self.space.phi_t) {
            for (v, x) in e.iter_mut().zip(p) {
                *v += c * x;
            }
        }
        e
    }

    fn hk1_norm(&self, f: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(f);
        v.dot(&(&self.gram_dot * &v)).max(0.0).sqrt()
    }

    /// `(a, ε̃_s)` with `ε̃_u = Σ a_jφ̃_j`.
    pub fn split(&self, eps: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a: Vec<f64> = self
            .space
            .decomp
            .modes
            .iter()
            .map(|m| m.dual.iter().zip(eps).map(|(y, e)| y * e).sum())
            .collect();
        let mut s = eps.to_vec();
        for (c, p) in a.iter().zip(&self.space.phi_t) {
            for (v, x) in s.iter_mut().zip(p) {
                *v -= c * x;
            }
        }
        (a, s)
    }

    pub fn row(&self, tau: f64, eps: &[f64]) -> DiagnosticsRow {
        let (a, stable) = self.split(eps);
        let grid = self.ks.grid();
        let mu = mu_at(self.mu0, tau);
        let psi: Vec<f64> = grid.r().iter().zip(eps).map(|(&r, e)| profile::q(r) + e).collect();
        let mu2 = mu * mu;
        let ones = vec![1.0; psi.len()];
        // the grid has no node at the origin, where Ψ peaks
        let psi0 = profile::q(0.0) + grid.interpolate(eps, 0, 0.0).unwrap_or(eps[0]);
        DiagnosticsRow {
            tau,
            t: physical_time(self.mu0, tau),
            h_k_stable: self.ks.hk_norm(&stable),
            b_unstable: self.space.b_norm_coeffs(&a),
            u_h1hk1: 0.0,
            max_rho: psi.iter().fold(psi0, |m, &v| m.max(v)) / mu2,
            min_rho: psi.iter().fold(psi0, |m, &v| m.min(v)) / mu2,
            max_u: 0.0,
            max_gradpi: 0.0,
            mass: mu * grid.l2_inner(&psi, &ones),
            hk1_stable: self.hk1_norm(&stable),
        }
    }

    fn bound3(&self, tau: f64) -> f64 {
        self.deltas.d3 * (-0.7 * self.delta_g * tau).exp()
    }

    fn flux_value(&self, tau: f64, b: f64) -> f64 {
        (1.4 * self.delta_g * tau).exp() * b * b
    }

    /// Runs from `ε₀ = stable_init + Σ a_jφ̃_j`; with `exit_test` the run stops when the
    /// unstable part leaves its ball.
    pub fn run(&self, a: &[f64], exit_test: bool) -> Result<Trajectory> {
        self.run_from(self.initial(a), exit_test)
    }

    pub fn run_from(&self, mut eps: Vec<f64>, exit_test: bool) -> Result<Trajectory> {
        let dt = self.ks.dt;
        let steps = (self.tau_end / dt - 1e-9).ceil().max(0.0) as usize;
        let mut rows = vec![self.row(0.0, &eps)];
        let mut prev_flux = self.flux_value(0.0, rows[0].b_unstable);
        for i in 0..steps {
            let tau0 = i as f64 * dt;
            self.ks.step(&mut eps, tau0)?;
            let tau = (i + 1) as f64 * dt;
            let row = self.row(tau, &eps);
            let flux = self.flux_value(tau, row.b_unstable);
            let exited = exit_test && row.b_unstable > self.bound3(tau);
            if exited || (i + 1) % self.output_every == 0 || i + 1 == steps {
                rows.push(row);
            }
            if exited {
                let (a, _) = self.split(&eps);
                let exit = Exit { tau, coords: self.space.b_coords(&a), flux: (flux - prev_flux) / dt };
                return Ok(Trajectory { rows, exit: Some(exit), final_state: eps });
            }
            prev_flux = flux;
        }
        Ok(Trajectory { rows, exit: None, final_state: eps })
    }

    /// Bisection on the unstable coefficients within the `δ₃` ball.
    pub fn shoot(&self, tol: f64, max_iter: usize) -> Result<ShootOutcome> {
        let mut records = Vec::new();
        let mut run = |a: &[f64]| -> Result<Option<Vec<f64>>> { Ok(self.run(a, true)?.exit.map(|e| e.coords)) };
        let (a, exit) = nested_bisection(self.modes(), self.deltas.d3, tol, max_iter, &mut run, &mut records)?;
        let trajectory = self.run(&a, true)?;
        Ok(ShootOutcome { a, records, converged: exit.is_none() && trajectory.exit.is_none(), trajectory })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_the_root_of_a_linear_dichotomy() {
        let target = 0.123_456;
        let mut run = |a: &[f64]| -> Result<Option<Vec<f64>>> {
            let d = a[0] - target;
            Ok(if d.abs() < 1e-6 { None } else { Some(vec![d]) })
        };
        let mut rec = Vec::new();
        let (a, exit) = nested_bisection(1, 1.0, 1e-12, 60, &mut run, &mut rec).unwrap();
        assert!(exit.is_none());
        assert!((a[0] - target).abs() < 1e-6);
        assert!(rec.windows(2).all(|w| w[1].bracket_hi - w[1].bracket_lo < w[0].bracket_hi - w[0].bracket_lo));
    }

    #[test]
    fn nested_bisection_in_two_dimensions() {
        let t = [0.3, -0.2];
        let mut run = |a: &[f64]| -> Result<Option<Vec<f64>>> {
            let d = [a[0] - t[0], a[1] - t[1] + 0.5 * (a[0] - t[0])];
            Ok(if d[0].abs() < 1e-7 && d[1].abs() < 1e-7 { None } else { Some(d.to_vec()) })
        };
        let mut rec = Vec::new();
        let (a, _) = nested_bisection(2, 1.0, 1e-10, 60, &mut run, &mut rec).unwrap();
        assert!((a[0] - t[0]).abs() < 1e-6 && (a[1] - t[1]).abs() < 1e-6);
    }

    #[test]
    fn missing_bracket_is_a_search_failure() {
        let mut run = |_: &[f64]| -> Result<Option<Vec<f64>>> { Ok(Some(vec![1.0])) };
        let err = nested_bisection(1, 1.0, 1e-8, 10, &mut run, &mut Vec::new()).unwrap_err();
        assert!(matches!(err, Error::SearchFailure(_)));
    }

    #[test]
    fn zero_data_stays_at_the_profile() {
        let cfg = RunConfig { n: 48, tau_end: 1.0, dt: 0.05, ..RunConfig::default() };
        let exp = RadialExperiment::new(&cfg).unwrap();
        let tr = exp.run_from(vec![0.0; 48], true).unwrap();
        assert!(tr.exit.is_none());
        assert!(tr.final_state.iter().all(|&v| v == 0.0));
        let last = tr.rows.last().unwrap();
        assert_eq!(last.h_k_stable, 0.0);
        assert!((last.max_rho * (1.0 - last.t) - 6.0).abs() < 1e-10);
    }
}
