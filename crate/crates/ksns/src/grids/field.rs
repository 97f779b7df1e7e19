/// Samples of one spherical-harmonic sector on a [`RadialGrid`](super::RadialGrid).
///
/// The sampled profile `f(r)` stands for the three-dimensional field
/// `f(r)·√(4π)·Y_ℓm(ω)`, so an `ℓ = 0` field is the radial function itself and
/// the `L²(ℝ³)` norm is `4π∫f²r²dr` for every sector.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub ell: usize,
    pub grid_id: u64,
    pub values: Vec<f64>,
}

/// Row-major samples on a [`FourierGrid3`](super::FourierGrid3).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxField {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub comps: [Vec<f64>; 3],
    /// Set by the Leray projection; cleared by any operation that may break it.
    pub solenoidal: bool,
}

impl VectorField {
    pub fn zeros(len: usize) -> Self {
        Self { comps: [vec![0.0; len], vec![0.0; len], vec![0.0; len]], solenoidal: true }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise maximum of the Euclidean length.
    pub fn max_norm(&self) -> f64 {
        (0..self.comps[0].len())
            .map(|i| {
                (self.comps[0][i].powi(2) + self.comps[1][i].powi(2) + self.comps[2][i].powi(2))
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}
