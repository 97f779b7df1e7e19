use super::{linear_fit, DeltaBudget, DiagnosticsRow};

/// One bootstrap bound `norm(τ) < δ·e^{−rate·τ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: &'static str,
    pub threshold: f64,
    pub rate: f64,
    pub first_violation: Option<f64>,
    /// Least-squares decay exponent of the norm; infinite if it vanishes identically.
    pub fitted_exponent: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    pub stable: BoundReport,
    pub stable_higher: BoundReport,
    pub unstable: BoundReport,
    pub flow: BoundReport,
}

impl BootstrapReport {
    pub fn all(&self) -> [&BoundReport; 4] {
        [&self.stable, &self.stable_higher, &self.unstable, &self.flow]
    }

    pub fn all_hold(&self) -> bool {
        self.all().iter().all(|b| b.holds())
    }
}

/// Decay exponent `−d log(norm)/dτ` fitted over rows with positive norm.
pub fn fitted_exponent(rows: &[DiagnosticsRow], norm: impl Fn(&DiagnosticsRow) -> f64) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| norm(r) > 0.0).map(|r| (r.tau, norm(r).ln())).unzip();
    if x.len() < 2 {
        return f64::INFINITY;
    }
    match linear_fit(&x, &y) {
        Some(f) => -f.slope,
        None => f64::INFINITY,
    }
}

fn bound(
    rows: &[DiagnosticsRow],
    name: &'static str,
    threshold: f64,
    rate: f64,
    strict: bool,
    norm: impl Fn(&DiagnosticsRow) -> f64 + Copy,
) -> BoundReport {
    let first_violation = rows
        .iter()
        .find(|r| {
            let lim = threshold * (-rate * r.tau).exp();
            let v = norm(r);
            if strict {
                !(v < lim)
            } else {
                !(v <= lim)
            }
        })
        .map(|r| r.tau);
    BoundReport { name, threshold, rate, first_violation, fitted_exponent: fitted_exponent(rows, norm) }
}

/// Checks the four bootstrap bounds along a trajectory; reports only, asserts nothing.
pub fn monitor_bootstrap(rows: &[DiagnosticsRow], deltas: &DeltaBudget, delta_g: f64) -> BootstrapReport {
    BootstrapReport {
        stable: bound(rows, "stable_hk", deltas.d1, 0.5 * delta_g, true, |r| r.h_k_stable),
        stable_higher: bound(rows, "stable_hk1", deltas.d2, 0.5 * delta_g, true, |r| r.hk1_stable),
        unstable: bound(rows, "unstable_b", deltas.d3, 0.7 * delta_g, false, |r| r.b_unstable),
        flow: bound(rows, "flow", deltas.d4, 0.125, true, |r| r.u_h1hk1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tau: f64, hk: f64) -> DiagnosticsRow {
        DiagnosticsRow {
            tau,
            t: 0.0,
            h_k_stable: hk,
            b_unstable: 0.0,
            u_h1hk1: 0.0,
            max_rho: 0.0,
            min_rho: 0.0,
            max_u: 0.0,
            max_gradpi: 0.0,
            mass: 0.0,
            hk1_stable: 0.0,
        }
    }

    #[test]
    fn trivial_when_everything_vanishes() {
        let rows: Vec<_> = (0..10).map(|i| row(i as f64, 0.0)).collect();
        let rep = monitor_bootstrap(&rows, &DeltaBudget::default(), 0.05);
        assert!(rep.all_hold());
        assert!(rep.all().iter().all(|b| b.fitted_exponent.is_infinite()));
    }

    #[test]
    fn detects_violation_and_fits_rate() {
        let rows: Vec<_> = (0..20).map(|i| row(i as f64 * 0.5, 5e-3 * (-0.3 * i as f64 * 0.5).exp())).collect();
        let d = DeltaBudget::default();
        let rep = monitor_bootstrap(&rows, &d, 0.05);
        assert!(rep.stable.holds());
        assert!((rep.stable.fitted_exponent - 0.3).abs() < 1e-12);
        let tight = DeltaBudget { d1: 4e-3, ..d };
        assert_eq!(monitor_bootstrap(&rows, &tight, 0.05).stable.first_violation, Some(0.0));
    }
}
