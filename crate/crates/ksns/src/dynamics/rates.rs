use super::DiagnosticsRow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`; `None` for fewer than two
/// points or constant `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { slope, intercept: my - slope * mx, r2 })
}

/// Blowup time from the zero of the line through `(t, 1/max ρ)`.
pub fn estimate_blowup_time(t: &[f64], max_rho: &[f64]) -> Option<f64> {
    let inv: Vec<f64> = max_rho.iter().map(|m| 1.0 / m).collect();
    let f = linear_fit(t, &inv)?;
    if !(f.slope < 0.0) {
        return None;
    }
    Some(-f.intercept / f.slope)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub t_blowup: f64,
    /// Decades of `T − t` inside the fit window.
    pub decades: f64,
    pub fit_unreliable: bool,
    /// `‖u‖_∞` against `|log(T − t)|`.
    pub u_fit: LineFit,
    /// `log ‖∇π‖_∞` against `log(T − t)`; the slope is the power exponent.
    pub gradpi_fit: LineFit,
    /// `max ρ·(T − t)` over the last decade of the window.
    pub rho_scaled: Vec<f64>,
}

/// Rate fits over the last two decades of `T − t`, with `T` from
/// [`estimate_blowup_time`] on the same window.
pub fn fluid_blowup_rates(rows: &[DiagnosticsRow]) -> Option<RateReport> {
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let m: Vec<f64> = rows.iter().map(|r| r.max_rho).collect();
    let t_first = estimate_blowup_time(&t, &m)?;
    let gap_min = rows.iter().map(|r| t_first - r.t).filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
    if !gap_min.is_finite() {
        return None;
    }
    // refine T on the last two decades, where max ρ·(T − t) has settled
    let window: Vec<&DiagnosticsRow> = rows.iter().filter(|r| t_first - r.t <= 100.0 * gap_min).collect();
    let tw: Vec<f64> = window.iter().map(|r| r.t).collect();
    let mw: Vec<f64> = window.iter().map(|r| r.max_rho).collect();
    let t_blowup = estimate_blowup_time(&tw, &mw).unwrap_or(t_first);
    let gaps: Vec<f64> = window.iter().map(|r| t_blowup - r.t).collect();
    if gaps.iter().any(|g| !(*g > 0.0)) {
        return None;
    }
    let gmax = gaps.iter().cloned().fold(0.0, f64::max);
    let gmin = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let decades = (gmax / gmin).log10();
    let logs: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let abs_logs: Vec<f64> = logs.iter().map(|l| l.abs()).collect();
    let u: Vec<f64> = window.iter().map(|r| r.max_u).collect();
    let gp: Vec<f64> = window.iter().map(|r| r.max_gradpi.ln()).collect();
    let u_fit = linear_fit(&abs_logs, &u)?;
    let gradpi_fit = linear_fit(&logs, &gp)?;
    let rho_scaled = window
        .iter()
        .zip(&gaps)
        .filter(|(_, g)| **g <= 10.0 * gmin)
        .map(|(r, g)| r.max_rho * g)
        .collect();
    Some(RateReport { t_blowup, decades, fit_unreliable: decades < 1.5, u_fit, gradpi_fit, rho_scaled })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept + 1.0).abs() < 1e-15);
        assert!((f.r2 - 1.0).abs() < 1e-15);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn synthetic_blowup_recovers_rates() {
        let big_t = 1e-2;
        let rows: Vec<DiagnosticsRow> = (0..200)
            .map(|i| {
                let tau = i as f64 * 0.05;
                let gap = big_t * (-tau).exp();
                DiagnosticsRow {
                    tau,
                    t: big_t - gap,
                    h_k_stable: 0.0,
                    b_unstable: 0.0,
                    u_h1hk1: 0.0,
                    max_rho: 6.0 / gap,
                    min_rho: 0.0,
                    max_u: 0.3 * gap.ln().abs() + 1.0,
                    max_gradpi: 2.0 / gap,
                    mass: 0.0,
                    hk1_stable: 0.0,
                }
            })
            .collect();
        let rep = fluid_blowup_rates(&rows).unwrap();
        assert!((rep.t_blowup - big_t).abs() < 1e-12);
        assert!((rep.gradpi_fit.slope + 1.0).abs() < 1e-6);
        assert!(rep.u_fit.r2 > 0.9999);
        assert!(rep.rho_scaled.iter().all(|v| (v - 6.0).abs() < 1e-6));
        assert!(!rep.fit_unreliable);
    }
}
