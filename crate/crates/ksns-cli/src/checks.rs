//! Closed-form and spectral checks behind `profile check`, `linop check` and `spectrum`.

use std::f64::consts::PI;
use std::sync::Arc;

use ksns::grids::{FourierGrid3, RadialGrid, VectorField};
use ksns::linop::{l0_ladder, omega_galerkin, resolvent_l0, semigroup_l0, SectorOperator, Which};
use ksns::profile::{self, eval_profile, ProfileField};
use ksns::spectral::{conjugate_symmetry_defect, eig_sector, Component, SpectralDecomposition};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::{Check, Report};
use crate::CliError;

fn grid(n: usize) -> Result<Arc<RadialGrid>, CliError> {
    Ok(Arc::new(RadialGrid::with_defaults(n)?))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Max error over all nodes but the closure row, relative to the max of `want`.
fn interior_rel(got: &[f64], want: &[f64]) -> f64 {
    let n = got.len() - 1;
    let scale = want[..n].iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    (0..n).map(|i| (got[i] - want[i]).abs()).fold(0.0, f64::max) / scale
}

fn max_rel(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// Stationarity residual of `Q` at `n` nodes and the pointwise closed-form identities.
pub fn profile_report(n: usize, seed: u64) -> Result<Report, CliError> {
    let mut r = Report::new(format!("profile check n={n}"));
    let g = RadialGrid::with_defaults(n)?;
    r.push(Check::at_most("stationarity_residual", profile::profile_residual(&g)?, 1e-8));
    r.push(Check::at_most("q_at_origin", (profile::q(0.0) - 6.0).abs(), 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut grad_f, mut lap_f, mut leray, mut lambda) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let y: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-20.0..20.0));
        let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        let rr = r2.sqrt();
        let p = 2.0 + r2;
        let gv = eval_profile(ProfileField::GradInvLapQ, y).vector().expect("vector field");
        for d in 0..3 {
            grad_f = grad_f.max(rel(gv[d], 4.0 * y[d] / p));
        }
        // F'' + 2F'/r with F' = 4r/(2+r²), F'' = (8 − 4r²)/(2+r²)²
        let lap = (8.0 - 4.0 * r2) / (p * p) + 2.0 * profile::inv_lap_q_dr(rr) / rr;
        lap_f = lap_f.max(rel(lap, profile::q(rr)));
        let lb = eval_profile(ProfileField::LerayBuoyancy3, y).scalar().expect("scalar field");
        leray = leray.max(rel(lb, 8.0 * (2.0 + y[2] * y[2]) / (p * p)));
        let gq = eval_profile(ProfileField::GradQ, y).vector().expect("vector field");
        let lq = eval_profile(ProfileField::LambdaQ, y).scalar().expect("scalar field");
        lambda = lambda.max(rel(lq, 2.0 * profile::q(rr) + y[0] * gq[0] + y[1] * gq[1] + y[2] * gq[2]));
    }
    r.push(Check::at_most("grad_inv_lap_q_closed_form", grad_f, 1e-12));
    r.push(Check::at_most("laplacian_of_potential_is_q", lap_f, 1e-12));
    r.push(Check::at_most("leray_buoyancy3_closed_form", leray, 1e-12));
    r.push(Check::at_most("lambda_q_closed_form", lambda, 1e-12));
    r.push(Check::at_most(
        "leray_buoyancy3_at_origin",
        (eval_profile(ProfileField::LerayBuoyancy3, [0.0; 3]).scalar().unwrap_or(f64::NAN) - 4.0).abs(),
        1e-12,
    ));
    let slope = profile::truncated_mass(200.0)? / 200.0;
    r.push(Check::at_most("mass_slope_rel_to_16pi", (slope - 16.0 * PI).abs() / (16.0 * PI), 0.05));
    Ok(r)
}

/// Invariants of the sector operators for each `ℓ` in `ells`: the splitting
/// `𝓛 = 𝓛₀ + 𝓛′`, eigen-identities of `𝓛₀`, weighted symmetry and the oscillator ladder.
pub fn l0_report(n: usize, ells: &[usize], k: usize) -> Result<Report, CliError> {
    let mut r = Report::new(format!("L0 exactness n={n} ell={ells:?} k={k}"));
    let g = grid(n)?;
    for &ell in ells {
        let op = SectorOperator::assemble(ell, g.clone(), k)?;
        let split = (op.matrix(Which::L) - (op.matrix(Which::L0) + op.matrix(Which::LPrime))).amax();
        r.push(Check::at_most(format!("ell{ell}_split_l0_plus_lprime"), split, 0.0));
        match ell {
            0 => {
                let one = g.field(0, vec![1.0; g.n()]);
                let out = op.apply(Which::L0, &one)?;
                r.push(Check::at_most("l0_one", interior_rel(&out.values, &one.values), 1e-8));
                let p = g.field(0, g.sample(|x| x * x - 6.0));
                let out = op.apply(Which::L0, &p)?;
                let want: Vec<f64> = p.values.iter().map(|v| 2.0 * v).collect();
                r.push(Check::at_most("l0_r2_minus_6", interior_rel(&out.values, &want), 1e-8));
            }
            1 => {
                // y₃ in sector ℓ = 1 has radial profile r
                let y3 = g.field(1, g.r().to_vec());
                let out = op.apply(Which::L0, &y3)?;
                let want: Vec<f64> = g.r().iter().map(|x| 1.5 * x).collect();
                r.push(Check::at_most("l0_y3", interior_rel(&out.values, &want), 1e-8));
            }
            _ => {}
        }
        let s = omega_galerkin(&g, ell, 3);
        r.push(Check::at_most(format!("ell{ell}_weighted_asymmetry"), (&s - s.transpose()).amax() / s.amax(), 1e-8));
        // (|n| + 2)/2 with |n| = ℓ, ℓ + 2
        let ladder = l0_ladder(&g, ell, 2);
        for (j, got) in ladder.iter().enumerate() {
            let want = (ell + 2 * j + 2) as f64 / 2.0;
            r.push(Check::within(format!("ell{ell}_ladder_{want}"), *got, want, 1e-6));
        }
    }
    Ok(r)
}

/// Defining relation `(𝓛₀ − λ)R(λ)f = f` of the Laplace-quadrature resolvent.
pub fn resolvent_report(n: usize, ells: &[usize]) -> Result<Report, CliError> {
    let mut r = Report::new(format!("resolvent n={n}"));
    let g = grid(n)?;
    for &ell in ells {
        let op = SectorOperator::assemble(ell, g.clone(), 2)?;
        let f = g.field(ell, g.sample(|x| x.powi(ell as i32) * (-x * x / 4.0).exp()));
        let lam = Complex64::new(0.5, 0.3);
        let (re, im) = resolvent_l0(&g, &f, lam)?;
        let lre = op.apply(Which::L0, &re)?;
        let lim = op.apply(Which::L0, &im)?;
        let res_re: Vec<f64> =
            (0..g.n()).map(|i| lre.values[i] - lam.re * re.values[i] + lam.im * im.values[i]).collect();
        let res_im: Vec<f64> =
            (0..g.n()).map(|i| lim.values[i] - lam.re * im.values[i] - lam.im * re.values[i]).collect();
        let scale = f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = interior_rel(&res_re, &f.values).max(res_im[..g.n() - 1].iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale);
        r.push(Check::at_most(format!("ell{ell}_resolvent_relation"), err, 1e-6));
    }
    Ok(r)
}

fn g1(r: f64) -> f64 {
    (4.0 * PI).powf(-1.5) * (-r * r / 4.0).exp()
}

/// Gaussian test of the radial semigroup `e^{−τ𝓛₀}` and its composition law in each sector.
pub fn semigroup_report(n: usize, ells: &[usize]) -> Result<Report, CliError> {
    let mut r = Report::new(format!("semigroup n={n}"));
    let g = grid(n)?;
    let f = g.field(0, g.sample(g1));
    for (name, tau) in [("gaussian_tau_0.1", 0.1), ("gaussian_tau_ln2", 2f64.ln()), ("gaussian_tau_2", 2.0)] {
        let out = semigroup_l0(&g, &f, tau)?;
        let a = 2.0 - (-tau).exp();
        let c = (-0.5 * tau).exp();
        let want = g.sample(|x| {
            let y = c * x;
            (-tau).exp() * (4.0 * PI * a).powf(-1.5) * (-y * y / (4.0 * a)).exp()
        });
        r.push(Check::at_most(name, max_rel(&out.values, &want), 1e-7));
    }
    let (s, t) = (0.3, 0.45);
    for &ell in ells {
        let h = g.field(ell, g.sample(|x| x.powi(ell as i32) * (1.0 + x * x) * (-x * x / 6.0).exp()));
        let two = semigroup_l0(&g, &semigroup_l0(&g, &h, s)?, t)?;
        let one = semigroup_l0(&g, &h, s + t)?;
        r.push(Check::at_most(format!("ell{ell}_composition"), max_rel(&two.values, &one.values), 1e-8));
    }
    Ok(r)
}

/// One line of `spectrum.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub ell: usize,
    pub lambda: Complex64,
    pub refinement_stable: bool,
    pub unstable: bool,
}

pub const SPECTRUM_HEADER: &str = "ell,re_lambda,im_lambda,refinement_stable,unstable";

/// `|⟨v, w⟩_G| / (‖v‖_G ‖w‖_G)` for a complex `v` and real `w`.
fn gram_cosine(gram: &nalgebra::DMatrix<f64>, v: &[Complex64], w: &[f64]) -> f64 {
    let gw = gram * DVector::from_column_slice(w);
    let vr: Vec<f64> = v.iter().map(|z| z.re).collect();
    let vi: Vec<f64> = v.iter().map(|z| z.im).collect();
    let gr = gram * DVector::from_column_slice(&vr);
    let gi = gram * DVector::from_column_slice(&vi);
    let dot = |a: &[f64], b: &DVector<f64>| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
    let num = Complex64::new(dot(&vr, &gw), dot(&vi, &gw)).norm();
    let vv = dot(&vr, &gr) + dot(&vi, &gi);
    num / (vv * dot(w, &gw)).sqrt()
}

/// Sector spectra of `−𝓛` for `ℓ ≤ ell_max`, the leading modes and the gap.
pub fn spectrum_report(ell_max: usize, n: usize, k: usize) -> Result<(Report, Vec<SpectrumRow>), CliError> {
    let mut r = Report::new(format!("spectrum ell_max={ell_max} n={n} k={k}"));
    let g = grid(n)?;
    let eigs = (0..=ell_max)
        .map(|ell| SectorOperator::assemble(ell, g.clone(), k).and_then(|op| eig_sector(&op)))
        .collect::<ksns::Result<Vec<_>>>()?;
    let conj = eigs.iter().map(|e| conjugate_symmetry_defect(&e.eigenvalues)).fold(0.0, f64::max);
    let decomp = SpectralDecomposition::from_sectors(eigs)?;
    let mut rows = Vec::new();
    for s in &decomp.sectors {
        for (i, l) in s.eigen.eigenvalues.iter().enumerate() {
            rows.push(SpectrumRow {
                ell: s.ell(),
                lambda: *l,
                refinement_stable: s.eigen.refinement_stable[i],
                unstable: s.unstable[i],
            });
        }
    }
    let targets: [(usize, f64, &str, fn(f64) -> f64); 2] =
        [(0, 1.0, "lambda_q", profile::lambda_q), (1, 0.5, "grad_q", profile::dq)];
    for (ell, want, shape, f) in targets {
        let Some(s) = decomp.sector(ell) else { continue };
        let e = &s.eigen;
        let (i, l) = e
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - want).norm().total_cmp(&(b.1 - want).norm()))
            .expect("nonempty spectrum");
        r.push(Check::at_most(format!("ell{ell}_eigenvalue_error"), (l - want).norm(), 1e-5));
        r.push(Check::flag(format!("ell{ell}_refinement_stable"), e.refinement_stable[i]));
        let v: Vec<Complex64> = e.vectors.column(i).iter().copied().collect();
        let cos = gram_cosine(&e.op.gram, &v, &g.sample(f));
        r.push(Check::at_least(format!("ell{ell}_cosine_{shape}"), cos, 1.0 - 1e-6));
    }
    r.push(Check::at_most("conjugate_symmetry", conj, 1e-8));
    r.push(Check::at_least("delta_g_positive", decomp.delta_g(), f64::MIN_POSITIVE));
    for (ell, c) in &decomp.gap.counts {
        r.note(format!("sector {ell}: {c} unstable eigenvalue(s)"));
    }
    if let Some(l) = decomp.gap.next {
        r.note(format!("leading stable eigenvalue {:.6} {:+.6}i; delta_g = {}", l.re, l.im, decomp.delta_g()));
    }
    Ok((r, rows))
}

fn random_components(rng: &mut ChaCha8Rng, g: &RadialGrid) -> Vec<Component> {
    let mut out = Vec::new();
    for ell in 0..=1usize {
        for m in -(ell as i64)..=ell as i64 {
            let c: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
            let s = rng.gen_range(1.0..6.0);
            let v = g.sample(|x| {
                let z = x * x / s;
                x.powi(ell as i32) * (c[0] + c[1] * z + c[2] * z * z) * (-z).exp()
            });
            out.push(Component { m, field: g.field(ell, v) });
        }
    }
    out
}

fn comp_diff(a: &[Component], b: &[Component]) -> f64 {
    let scale = b.iter().flat_map(|c| c.field.values.iter()).fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut err = 0.0_f64;
    for ca in a {
        let cb = b.iter().find(|c| c.m == ca.m && c.field.ell == ca.field.ell);
        for (i, v) in ca.field.values.iter().enumerate() {
            let w = cb.map_or(0.0, |c| c.field.values[i]);
            err = err.max((v - w).abs());
        }
    }
    err / scale
}

/// Modified unstable projections at each cutoff radius.
pub fn modified_report(radii: &[f64], n: usize, k: usize, seed: u64) -> Result<Report, CliError> {
    let mut r = Report::new(format!("modified projections n={n} R={radii:?}"));
    let g = grid(n)?;
    let decomp = SpectralDecomposition::new(g.clone(), 1, k)?;
    let dg = decomp.delta_g();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for &radius in radii {
        let ms = decomp.build_modified(radius)?;
        let d = ms.defect_max();
        monotone &= d < prev;
        prev = d;
        r.push(Check::at_most(format!("R{radius}_condition"), ms.condition, 1e6));
        r.note(format!("R = {radius}: |M_R - I|_max = {d:.6e}, cond(M_R) = {:.6e}", ms.condition));
        let (mut e1, mut e2) = (0.0_f64, 0.0_f64);
        for _ in 0..50 {
            let f = random_components(&mut rng, &g);
            let (pu, _) = decomp.riesz_project(&f)?;
            let pt = ms.project(&f)?;
            e1 = e1.max(comp_diff(&ms.project(&pu)?, &pt));
            e2 = e2.max(comp_diff(&decomp.riesz_project(&pt)?.0, &pu));
        }
        r.push(Check::at_most(format!("R{radius}_tilde_pu_pu"), e1, 1e-8));
        r.push(Check::at_most(format!("R{radius}_pu_tilde_pu"), e2, 1e-8));
        let outside = ms
            .phi_t
            .iter()
            .flat_map(|p| g.r().iter().zip(p).filter(|(x, _)| **x >= 2.0 * radius).map(|(_, v)| v.abs()))
            .fold(0.0, f64::max);
        r.push(Check::at_most(format!("R{radius}_support_outside_2R"), outside, 0.0));
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let a: Vec<f64> = (0..ms.phi_t.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let la = ms.generator_apply(&a);
            let num: f64 = ms.b_coords(&la).iter().zip(ms.b_coords(&a)).map(|(x, y)| x * y).sum();
            let den = ms.b_norm_coeffs(&a).powi(2);
            worst = worst.min(num / den);
        }
        r.push(Check::at_least(format!("R{radius}_b_coercivity"), worst, -0.6 * dg));
    }
    if radii.len() > 1 {
        r.push(Check::flag("defect_decreases_with_R", monotone));
    }
    Ok(r)
}

/// Fourier Leray projection of `Qe₃` at the origin against `(ℙ(Qe₃))₃(0) = 4`.
pub fn leray_origin(n: usize, half_width: f64) -> Result<f64, CliError> {
    let g = FourierGrid3::new(n, half_width)?;
    let len = g.len();
    let q = g.sample(|y| profile::q((y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()));
    let u = VectorField { comps: [vec![0.0; len], vec![0.0; len], q], solenoidal: false };
    let p = g.leray_project(&u);
    let c = n / 2;
    Ok(p.comps[2][g.index(c, c, c)])
}

/// Pure Keller-Segel box runs: per-step mass conservation, positivity and agreement
/// of the physical and self-similar frames.
pub fn wellposedness_report() -> Result<Report, CliError> {
    use ksns::dynamics::{mu_at, BoxSim, Frame3};
    let mut r = Report::new("well-posedness");
    let gauss = |amp: f64| move |x: [f64; 3]| amp * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp();

    // mass and positivity in the physical frame, with the fluid switched on
    let g = FourierGrid3::new(32, 8.0)?;
    let sim = BoxSim::new(g.clone(), Frame3::Physical, 2e-3, 2, 1.0, true)?;
    let len = g.len();
    let u = VectorField {
        comps: [g.sample(|x| -0.5 * x[1] * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp()),
            g.sample(|x| 0.5 * x[0] * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp()),
            vec![0.0; len]],
        solenoidal: false,
    };
    let mut s = sim.state(g.sample(gauss(0.5)), u);
    let (mut dm, mut neg) = (0.0_f64, 0.0_f64);
    for _ in 0..50 {
        let before = g.integral(&s.density);
        sim.step(&mut s)?;
        dm = dm.max((g.integral(&s.density) - before).abs() / before.abs());
        let (lo, hi) = s.density.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
        neg = neg.max(-lo / hi);
    }
    r.push(Check::at_most("mass_change_per_step", dm, 1e-10));
    r.push(Check::at_most("negative_part_over_max", neg, 1e-8));

    // the same datum in both frames on the same grid, compared at t = 1 − e^{−τ};
    // the periodic Poisson solve makes the frames differ by O(mass/B³) otherwise
    let tau = 0.1;
    let steps = 50;
    let gc = FourierGrid3::new(48, 12.0)?;
    let ss = BoxSim::new(gc.clone(), Frame3::SelfSim { background: false }, tau / steps as f64, 2, 1.0, false)?;
    let mut a = ss.state(gc.sample(gauss(0.05)), VectorField::zeros(gc.len()));
    let t_end = -(-tau).exp_m1();
    let ph = BoxSim::new(gc.clone(), Frame3::Physical, t_end / steps as f64, 2, 1.0, false)?;
    let mut b = ph.state(gc.sample(gauss(0.05)), VectorField::zeros(gc.len()));
    let m_ss0 = gc.integral(&a.density);
    for _ in 0..steps {
        ss.step(&mut a)?;
        ph.step(&mut b)?;
    }
    let mu = mu_at(1.0, a.tau);
    let targets: Vec<f64> = gc.coords().iter().map(|x| x / mu).collect();
    let m = gc.resample_matrix(&targets, |_| 1.0);
    let psi = gc.apply_separable(&m, &a.density);
    let peak = b.density.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = psi.iter().zip(&b.density).map(|(p, rho)| (p / (mu * mu) - rho).abs()).fold(0.0, f64::max);
    r.push(Check::at_most("frame_consistency", diff / peak, 1e-5));
    let m_ss = mu * gc.integral(&a.density);
    r.note(format!("self-similar mass drift mu*int(Psi): {:.3e} relative", (m_ss - m_ss0).abs() / m_ss0));
    r.note(format!("physical t = {:.6}, self-similar tau = {:.6}", b.t, a.tau));
    Ok(r)
}
