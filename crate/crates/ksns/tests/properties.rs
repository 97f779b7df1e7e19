use std::sync::{Arc, OnceLock};

use ksns::dynamics::{mu_at, nested_bisection, physical_time, DeltaBudget};
use ksns::grids::{poisson_sector, FourierGrid3, RadialGrid, VectorField};
use ksns::linop::{semigroup_l0, SectorOperator, Which};
use ksns::profile::{self, eval_profile, ProfileField};
use ksns::spectral::{Component, JordanCoordinates, ModifiedSpace, SpectralDecomposition};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn radial(n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::with_defaults(n).unwrap())
}

fn modified() -> &'static ModifiedSpace {
    static M: OnceLock<ModifiedSpace> = OnceLock::new();
    M.get_or_init(|| SpectralDecomposition::new(radial(64), 1, 2).unwrap().build_modified(10.0).unwrap())
}

fn box16() -> &'static FourierGrid3 {
    static G: OnceLock<FourierGrid3> = OnceLock::new();
    G.get_or_init(|| FourierGrid3::new(16, 5.0).unwrap())
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-15.0..15.0f64, -15.0..15.0f64, -15.0..15.0f64]
}

fn pot(y: [f64; 3]) -> f64 {
    eval_profile(ProfileField::InvLapQ, y).scalar().unwrap()
}

fn shift(y: [f64; 3], d: usize, h: f64) -> [f64; 3] {
    let mut z = y;
    z[d] += h;
    z
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn grad_inv_lap_q_is_the_gradient_of_the_potential(y in point()) {
        let g = eval_profile(ProfileField::GradInvLapQ, y).vector().unwrap();
        let h = 1e-4;
        for d in 0..3 {
            // fourth-order central difference
            let fd = (-pot(shift(y, d, 2.0 * h)) + 8.0 * pot(shift(y, d, h)) - 8.0 * pot(shift(y, d, -h))
                + pot(shift(y, d, -2.0 * h))) / (12.0 * h);
            prop_assert!((fd - g[d]).abs() < 1e-8, "axis {}: {} vs {}", d, fd, g[d]);
        }
    }

    #[test]
    fn divergence_of_grad_inv_lap_q_is_q(y in point()) {
        let h = 1e-3;
        let div: f64 = (0..3)
            .map(|d| {
                let gp = eval_profile(ProfileField::GradInvLapQ, shift(y, d, h)).vector().unwrap()[d];
                let gm = eval_profile(ProfileField::GradInvLapQ, shift(y, d, -h)).vector().unwrap()[d];
                (gp - gm) / (2.0 * h)
            })
            .sum();
        let q = eval_profile(ProfileField::Q, y).scalar().unwrap();
        prop_assert!((div - q).abs() < 1e-5 * q.max(1e-2));
    }

    #[test]
    fn leray_buoyancy_closed_forms_and_lower_bound(y in point()) {
        let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        let p = 2.0 + r2;
        let v = eval_profile(ProfileField::LerayBuoyancy3, y).scalar().unwrap();
        // Q − ∂₃(4y₃/(2+r²)) by central differences
        let f = |z: [f64; 3]| 4.0 * z[2] / (2.0 + z[0] * z[0] + z[1] * z[1] + z[2] * z[2]);
        let h = 1e-4;
        let d3 = (f(shift(y, 2, h)) - f(shift(y, 2, -h))) / (2.0 * h);
        prop_assert!((v - (profile::q(r2.sqrt()) - d3)).abs() < 1e-7);
        prop_assert!((v - 8.0 * (2.0 + y[2] * y[2]) / (p * p)).abs() <= 1e-15 * v.max(1.0));
        prop_assert!(v >= 16.0 / (p * p));
    }

    #[test]
    fn truncated_mass_is_increasing(r in 0.1..150.0f64) {
        prop_assert!(profile::truncated_mass(2.0 * r).unwrap() > profile::truncated_mass(r).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fourier_round_trip_and_leray(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let g = box16();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut noise = || (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let f = noise();
        let back = g.inverse(g.forward(&f));
        prop_assert!(f.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-13));
        let u = VectorField { comps: [noise(), noise(), noise()], solenoidal: false };
        let p = g.leray_project(&u);
        let pp = g.leray_project(&p);
        let m = p.max_abs();
        for d in 0..3 {
            prop_assert!(p.comps[d].iter().zip(&pp.comps[d]).all(|(a, b)| (a - b).abs() <= 1e-13 * m));
        }
        let div = g.divergence(&p);
        let scale = m * std::f64::consts::PI * 8.0 / 5.0;
        prop_assert!(div.iter().all(|v| v.abs() <= 1e-12 * scale));
    }

    #[test]
    fn poisson_inverts_the_sector_laplacian(ell in 0usize..3, width in 1.0..4.0f64) {
        let g = radial(64);
        let f = g.field(ell, g.sample(|r| r.powi(ell as i32) * (-r * r / width).exp()));
        let u = poisson_sector(&g, &f).unwrap().u;
        let lap = g.lap(ell) * DVector::from_column_slice(&u.values);
        let n = g.n();
        let scale = f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = (0..n - 2).map(|i| (lap[i] - f.values[i]).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-7 * scale, "ell {}: {}", ell, err / scale);
    }

    #[test]
    fn operator_splitting_is_exact(ell in 0usize..3) {
        let op = SectorOperator::assemble(ell, radial(48), 2).unwrap();
        let d = op.matrix(Which::L) - (op.matrix(Which::L0) + op.matrix(Which::LPrime));
        prop_assert_eq!(d.amax(), 0.0);
    }

    #[test]
    fn semigroup_composes(ell in 0usize..3, s in 0.05..1.0f64, t in 0.05..1.0f64, width in 2.0..8.0f64) {
        let g = radial(64);
        let f = g.field(ell, g.sample(|r| r.powi(ell as i32) * (-r * r / width).exp()));
        let two = semigroup_l0(&g, &semigroup_l0(&g, &f, s).unwrap(), t).unwrap();
        let one = semigroup_l0(&g, &f, s + t).unwrap();
        let scale = one.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = one.values.iter().zip(&two.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8 * scale, "{}", err / scale);
    }

    #[test]
    fn modified_projections_are_consistent(c in proptest::collection::vec(-1.0..1.0f64, 4), width in 1.0..6.0f64) {
        let ms = modified();
        let g = &ms.decomp.grid;
        let mut f = Vec::new();
        let mut i = 0;
        for ell in 0..=1usize {
            for m in -(ell as i64)..=ell as i64 {
                let a = c[i];
                i += 1;
                f.push(Component { m, field: g.field(ell, g.sample(|r| a * r.powi(ell as i32) * (-r * r / width).exp())) });
            }
        }
        let diff = |x: &[Component], y: &[Component]| {
            x.iter().zip(y).flat_map(|(p, q)| p.field.values.iter().zip(&q.field.values).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max)
        };
        let scale = f.iter().flat_map(|p| p.field.values.iter()).fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
        let (pu, _) = ms.decomp.riesz_project(&f).unwrap();
        let pt = ms.project(&f).unwrap();
        prop_assert!(diff(&ms.project(&pu).unwrap(), &pt) <= 1e-8 * scale);
        prop_assert!(diff(&ms.decomp.riesz_project(&pt).unwrap().0, &pu) <= 1e-8 * scale);
        // φ̃ vanish beyond 2R, and the span is closed under P̃_u
        for p in &ms.phi_t {
            prop_assert!(g.r().iter().zip(p).all(|(r, v)| *r < 2.0 * ms.radius || *v == 0.0));
        }
        prop_assert!(ms.span_coefficients(&pt).is_ok());
    }

    #[test]
    fn jordan_blocks_are_almost_coercive(w in proptest::collection::vec(-1.0..1.0f64, 4)) {
        let ms = modified();
        let dg = ms.decomp.delta_g();
        let w = DVector::from_vec(w);
        let q = w.dot(&(&ms.jordan.j_b * &w));
        prop_assert!(q >= -0.6 * dg * w.norm_squared());
    }
}

proptest! {
    #[test]
    fn mu_law_is_exact(mu0 in 1e-4..10.0f64, tau in 0.0..30.0f64) {
        let mu = mu_at(mu0, tau);
        let t = physical_time(mu0, tau);
        let big_t = mu0 * mu0;
        prop_assert!((mu * mu - (big_t - t)).abs() <= 4.0 * f64::EPSILON * big_t);
        prop_assert!(t < big_t || tau > 36.0);
    }

    #[test]
    fn physical_time_increases(mu0 in 1e-3..10.0f64, tau in 0.0..20.0f64, dtau in 1e-3..1.0f64) {
        prop_assert!(physical_time(mu0, tau + dtau) > physical_time(mu0, tau));
    }

    #[test]
    fn ordered_budgets_do_not_warn(d0 in 1e-9..1e-8f64, k in 10.0..100.0f64) {
        let b = DeltaBudget { d0, d4: d0 * k, d3: d0 * k * k, d1: d0 * k.powi(3), d2: d0 * k.powi(4) };
        prop_assert!(b.warnings().is_empty());
        prop_assert_eq!(b.scaled(2.0).warnings().len(), 0);
    }

    #[test]
    fn bisection_brackets_shrink(target in -0.9..0.9f64) {
        let mut run = |a: &[f64]| -> ksns::Result<Option<Vec<f64>>> {
            let d = a[0] - target;
            Ok(if d.abs() < 1e-9 { None } else { Some(vec![d]) })
        };
        let mut rec = Vec::new();
        let (a, _) = nested_bisection(1, 1.0, 1e-12, 80, &mut run, &mut rec).unwrap();
        prop_assert!((a[0] - target).abs() < 1e-8);
        prop_assert!(rec.iter().all(|r| r.bracket_lo <= target && target <= r.bracket_hi));
    }
}

#[test]
fn jordan_coordinates_of_a_rotation_block() {
    let j = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.3, -0.2, 0.5, 0.0, 0.0, 0.0, 1.0]);
    let jc = JordanCoordinates::new(&j, 0.05).unwrap();
    let back = &jc.v * &jc.j_b * &jc.v_inv;
    assert!((back - j).amax() < 1e-12);
    assert!(jc.coercivity() > 0.0);
}
