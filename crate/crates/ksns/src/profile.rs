//! The stationary profile `Q(y) = 4(6+|y|²)/(2+|y|²)²` and its companion fields.
//!
//! `Q` solves `ΔQ + ∇·(Q∇Δ⁻¹Q) − ½ΛQ = 0` with `Λf = 2f + y·∇f`. The potential
//! `Δ⁻¹Q` is gauged as `2 log(2+|y|²)`; only its gradient enters the dynamics.

use crate::error::{invalid, Result};
use crate::grids::RadialGrid;

/// Which closed-form field to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileField {
    Q,
    GradQ,
    LambdaQ,
    InvLapQ,
    GradInvLapQ,
    /// Third component of the Leray projection of `Q e₃`.
    LerayBuoyancy3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileValue {
    Scalar(f64),
    Vector([f64; 3]),
}

impl ProfileValue {
    pub fn scalar(self) -> Option<f64> {
        match self {
            ProfileValue::Scalar(v) => Some(v),
            ProfileValue::Vector(_) => None,
        }
    }

    pub fn vector(self) -> Option<[f64; 3]> {
        match self {
            ProfileValue::Vector(v) => Some(v),
            ProfileValue::Scalar(_) => None,
        }
    }
}

/// `Q` as a function of `r = |y|`.
#[inline]
pub fn q(r: f64) -> f64 {
    let z = r * r;
    4.0 * (6.0 + z) / ((2.0 + z) * (2.0 + z))
}

/// `dQ/dr`.
#[inline]
pub fn dq(r: f64) -> f64 {
    let z = r * r;
    -8.0 * r * (10.0 + z) / ((2.0 + z) * (2.0 + z) * (2.0 + z))
}

/// `d²Q/dr²`.
#[inline]
pub fn d2q(r: f64) -> f64 {
    let z = r * r;
    let p = 2.0 + z;
    // d/dr [-8 r (10+z) p⁻³]
    -8.0 * ((10.0 + 3.0 * z) / (p * p * p) - 6.0 * z * (10.0 + z) / (p * p * p * p))
}

/// `ΛQ = 2Q + r Q'`.
#[inline]
pub fn lambda_q(r: f64) -> f64 {
    2.0 * q(r) + r * dq(r)
}

/// `Δ⁻¹Q = 2 log(2 + r²)`.
#[inline]
pub fn inv_lap_q(r: f64) -> f64 {
    2.0 * (2.0 + r * r).ln()
}

/// Radial derivative of `Δ⁻¹Q`, i.e. `4r/(2+r²)`.
#[inline]
pub fn inv_lap_q_dr(r: f64) -> f64 {
    4.0 * r / (2.0 + r * r)
}

/// `(ℙ(Q e₃))₃ = 8(2 + y₃²)/(2 + |y|²)²`.
#[inline]
pub fn leray_buoyancy3(y: [f64; 3]) -> f64 {
    let r2 = norm2(y);
    8.0 * (2.0 + y[2] * y[2]) / ((2.0 + r2) * (2.0 + r2))
}

#[inline]
fn norm2(y: [f64; 3]) -> f64 {
    y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
}

pub fn eval_profile(kind: ProfileField, y: [f64; 3]) -> ProfileValue {
    let r2 = norm2(y);
    let r = r2.sqrt();
    match kind {
        ProfileField::Q => ProfileValue::Scalar(q(r)),
        ProfileField::GradQ => {
            // Q'(r) y / r, written without the division: Q' = -8 r (10+z)/(2+z)³
            let s = -8.0 * (10.0 + r2) / ((2.0 + r2) * (2.0 + r2) * (2.0 + r2));
            ProfileValue::Vector([s * y[0], s * y[1], s * y[2]])
        }
        ProfileField::LambdaQ => ProfileValue::Scalar(lambda_q(r)),
        ProfileField::InvLapQ => ProfileValue::Scalar(inv_lap_q(r)),
        ProfileField::GradInvLapQ => {
            let s = 4.0 / (2.0 + r2);
            ProfileValue::Vector([s * y[0], s * y[1], s * y[2]])
        }
        ProfileField::LerayBuoyancy3 => ProfileValue::Scalar(leray_buoyancy3(y)),
    }
}

/// Max-norm of `ΔQ + ∇·(Q∇Δ⁻¹Q) − ½ΛQ` on the nodes of `grid`, using the grid's
/// differentiation matrices and the closed forms for `Q` and `∇Δ⁻¹Q`.
pub fn profile_residual(grid: &RadialGrid) -> Result<f64> {
    if grid.n() < 8 {
        return invalid(format!("profile residual needs at least 8 nodes, got {}", grid.n()));
    }
    let r = grid.r();
    let qv: Vec<f64> = r.iter().map(|&x| q(x)).collect();
    // Q∇Δ⁻¹Q is odd in r, so it is differentiated with the odd-parity matrix
    let flux: Vec<f64> = r.iter().map(|&x| q(x) * inv_lap_q_dr(x)).collect();
    let lap_q = grid.lap(0) * nalgebra::DVector::from_column_slice(&qv);
    let dflux = grid.d1(1) * nalgebra::DVector::from_column_slice(&flux);
    let dq_num = grid.d1(0) * nalgebra::DVector::from_column_slice(&qv);
    let mut worst: f64 = 0.0;
    for i in 0..grid.n() {
        let div = dflux[i] + 2.0 * flux[i] / r[i];
        let half_lambda = qv[i] + 0.5 * r[i] * dq_num[i];
        worst = worst.max((lap_q[i] + div - half_lambda).abs());
    }
    Ok(worst)
}

/// `∫_{|y|≤R} Q dy`, by Clenshaw-Curtis quadrature on a mapped grid over `[0, R]`.
pub fn truncated_mass(radius: f64) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return invalid(format!("truncated mass needs R > 0, got {radius}"));
    }
    let grid = RadialGrid::new(160, radius.min(3.0), radius)?;
    let s: f64 = grid
        .weights()
        .iter()
        .zip(grid.r())
        .map(|(w, &x)| w * q(x))
        .sum();
    Ok(4.0 * std::f64::consts::PI * s)
}
