use std::f64::consts::PI;

use super::{BoxField, FourierGrid3, RadialField, RadialGrid};
use crate::error::{invalid, Result};

/// Orthonormal real spherical harmonic `Y_ℓm` at the unit vector `ω`
/// (no Condon-Shortley phase, so `Y₁₁ ∝ ω₁`, `Y₁,₋₁ ∝ ω₂`, `Y₁₀ ∝ ω₃`).
pub fn real_sph_harm(ell: usize, m: i64, omega: [f64; 3]) -> f64 {
    let am = m.unsigned_abs() as usize;
    assert!(am <= ell, "|m| must not exceed ell");
    let ct = omega[2].clamp(-1.0, 1.0);
    let st = (omega[0] * omega[0] + omega[1] * omega[1]).sqrt();
    let phi = omega[1].atan2(omega[0]);
    // P_ℓ^m(cos θ) by upward recurrence in ℓ
    let mut pmm = 1.0;
    for i in 0..am {
        pmm *= (2 * i + 1) as f64 * st;
    }
    let p = if ell == am {
        pmm
    } else {
        let mut p0 = pmm;
        let mut p1 = (2 * am + 1) as f64 * ct * pmm;
        for l in am + 2..=ell {
            let p2 = ((2 * l - 1) as f64 * ct * p1 - (l + am - 1) as f64 * p0) / (l - am) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    let mut ratio = 1.0;
    for i in ell - am + 1..=ell + am {
        ratio /= i as f64;
    }
    let norm = ((2 * ell + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => norm * p,
        std::cmp::Ordering::Greater => 2f64.sqrt() * norm * p * (am as f64 * phi).cos(),
        std::cmp::Ordering::Less => 2f64.sqrt() * norm * p * (am as f64 * phi).sin(),
    }
}

/// Samples `f(r)·√(4π)·Y_ℓm` on the box; zero beyond the radial grid's outer node.
/// The `√(4π)` matches the sector normalization of [`RadialField`].
pub fn transfer_radial_to_box(
    grid: &RadialGrid,
    f: &RadialField,
    m: i64,
    target: &FourierGrid3,
) -> Result<BoxField> {
    grid.check(f)?;
    if m.unsigned_abs() as usize > f.ell {
        return invalid(format!("harmonic order m = {m} outside sector {}", f.ell));
    }
    let c = (4.0 * PI).sqrt();
    let values = target.sample(|y| {
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let omega = if r > 0.0 { [y[0] / r, y[1] / r, y[2] / r] } else { [0.0, 0.0, 1.0] };
        match grid.interpolate(&f.values, f.ell, r) {
            Some(v) => c * v * real_sph_harm(f.ell, m, omega),
            None => 0.0,
        }
    });
    Ok(BoxField { values })
}

/// Inverse of [`transfer_radial_to_box`] on one shell: `(4π)^{-1/2} ∫ F(rω) Y_ℓm(ω) dω`,
/// using Gauss-Legendre × trapezoid quadrature and trigonometric interpolation of `F`.
pub fn shell_coefficient(target: &FourierGrid3, field: &BoxField, ell: usize, m: i64, r: f64) -> f64 {
    let nt = ell + 8;
    let np = 2 * ell + 10;
    let (ct, wt) = gauss_legendre(nt);
    let mut s = 0.0;
    for (c, w) in ct.iter().zip(&wt) {
        let st = (1.0 - c * c).sqrt();
        for k in 0..np {
            let phi = 2.0 * PI * k as f64 / np as f64;
            let omega = [st * phi.cos(), st * phi.sin(), *c];
            let p = [r * omega[0], r * omega[1], r * omega[2]];
            s += w * (2.0 * PI / np as f64) * target.interpolate(&field.values, p) * real_sph_harm(ell, m, omega);
        }
    }
    s / (4.0 * PI).sqrt()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for l in 2..=n {
                let p2 = ((2 * l - 1) as f64 * z * p1 - (l - 1) as f64 * p0) / l as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonics_are_orthonormal() {
        let (ct, wt) = gauss_legendre(12);
        let np = 24;
        let pairs = [(0usize, 0i64), (1, -1), (1, 0), (1, 1), (2, -2), (2, 1), (3, 2)];
        for &(l1, m1) in &pairs {
            for &(l2, m2) in &pairs {
                let mut s = 0.0;
                for (c, w) in ct.iter().zip(&wt) {
                    let st = (1.0 - c * c).sqrt();
                    for k in 0..np {
                        let phi = 2.0 * PI * k as f64 / np as f64;
                        let o = [st * phi.cos(), st * phi.sin(), *c];
                        s += w * 2.0 * PI / np as f64 * real_sph_harm(l1, m1, o) * real_sph_harm(l2, m2, o);
                    }
                }
                let e = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12, "({l1},{m1}) ({l2},{m2}) -> {s}");
            }
        }
    }

    #[test]
    fn low_order_shapes() {
        let o = [0.36, 0.48, 0.8];
        let c = (3.0 / (4.0 * PI)).sqrt();
        assert!((real_sph_harm(1, 1, o) - c * o[0]).abs() < 1e-14);
        assert!((real_sph_harm(1, -1, o) - c * o[1]).abs() < 1e-14);
        assert!((real_sph_harm(1, 0, o) - c * o[2]).abs() < 1e-14);
    }

    #[test]
    fn transfer_of_q_and_dipole() {
        let rg = RadialGrid::with_defaults(128).unwrap();
        let bx = FourierGrid3::new(16, 4.0).unwrap();
        let q = rg.field(0, rg.sample(crate::profile::q));
        let bq = transfer_radial_to_box(&rg, &q, 0, &bx).unwrap();
        for (i, v) in bq.values.iter().enumerate() {
            let y = bx.point(i);
            let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            assert!((v - crate::profile::q(r)).abs() < 1e-10);
        }
        let d = rg.field(1, rg.sample(|r| r * (-r * r).exp()));
        let bd = transfer_radial_to_box(&rg, &d, 0, &bx).unwrap();
        for (i, v) in bd.values.iter().enumerate() {
            let y = bx.point(i);
            let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
            assert!((v - 3f64.sqrt() * y[2] * (-r2).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn shell_roundtrip() {
        let rg = RadialGrid::with_defaults(64).unwrap();
        let bx = FourierGrid3::new(32, 8.0).unwrap();
        let f = rg.field(2, rg.sample(|r| r * r * (-r * r / 4.0).exp()));
        let b = transfer_radial_to_box(&rg, &f, 1, &bx).unwrap();
        for &r in &[0.8, 1.5, 2.5] {
            let c = shell_coefficient(&bx, &b, 2, 1, r);
            assert!((c - r * r * (-r * r / 4.0).exp()).abs() < 1e-6, "r = {r}: {c}");
            assert!(shell_coefficient(&bx, &b, 2, 0, r).abs() < 1e-6);
        }
    }
}
