//! Time integration of the renormalized Keller-Segel(-Navier-Stokes) systems,
//! unstable-mode shooting, bootstrap monitors and blowup-rate fits.

mod boxsim;
mod monitor;
mod radial;
mod rates;
mod shoot;

pub use boxsim::{BoxRun, BoxSim, BoxState, Frame3, ModeProjector, MODE_GRID_N};
pub use monitor::{monitor_bootstrap, BootstrapReport, BoundReport};
pub use radial::RadialKs;
pub use rates::{estimate_blowup_time, fluid_blowup_rates, linear_fit, LineFit, RateReport};
pub use shoot::{nested_bisection, Exit, RadialExperiment, ShootOutcome, ShootRecord, Trajectory};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    RadialSelfsim,
    Box3dSelfsim,
    Box3dPhysical,
}

impl Frame {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "radial_selfsim" => Ok(Self::RadialSelfsim),
            "box3d_selfsim" => Ok(Self::Box3dSelfsim),
            "box3d_physical" => Ok(Self::Box3dPhysical),
            _ => invalid(format!("unknown frame {s:?}")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RadialSelfsim => "radial_selfsim",
            Self::Box3dSelfsim => "box3d_selfsim",
            Self::Box3dPhysical => "box3d_physical",
        }
    }
}

/// Bootstrap thresholds `(δ₀, δ₄, δ₃, δ₁, δ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBudget {
    pub d0: f64,
    pub d4: f64,
    pub d3: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Default for DeltaBudget {
    fn default() -> Self {
        Self { d0: 1e-6, d4: 1e-4, d3: 1e-3, d1: 1e-2, d2: 3e-2 }
    }
}

impl DeltaBudget {
    /// Warnings for non-positive thresholds or a broken `δ₀ < δ₄ < δ₃ < δ₁ < δ₂` ordering.
    pub fn warnings(&self) -> Vec<String> {
        let seq = [("delta0", self.d0), ("delta4", self.d4), ("delta3", self.d3), ("delta1", self.d1), ("delta2", self.d2)];
        let mut w = Vec::new();
        for (name, v) in seq {
            if !(v > 0.0) {
                w.push(format!("{name} = {v} is not positive"));
            }
        }
        for p in seq.windows(2) {
            if !(p[0].1 < p[1].1) {
                w.push(format!("ordering {} < {} violated ({} vs {})", p[0].0, p[1].0, p[0].1, p[1].1));
            }
        }
        w
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { d0: self.d0 * s, d4: self.d4 * s, d3: self.d3 * s, d1: self.d1 * s, d2: self.d2 * s }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootConfig {
    pub enabled: bool,
    /// Bisection stops once the bracket is narrower than `tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self { enabled: true, tol: 1e-12, max_iter: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub frame: Frame,
    /// Radial nodes or Fourier points per direction.
    pub n: usize,
    /// Fourier box half-width `B`.
    pub box_half_width: f64,
    pub k: usize,
    pub mu0: f64,
    pub dt: f64,
    pub tau_end: f64,
    /// Physical end time for `box3d_physical`.
    pub t_end: f64,
    /// Cutoff radius of the initial density.
    pub r0: f64,
    /// Cutoff radius of the modified unstable space.
    pub r_cut: f64,
    pub deltas: DeltaBudget,
    /// Scale the budget to the size of the initial stable part.
    pub auto_scale_deltas: bool,
    /// Overrides the measured gap when set.
    pub delta_g: Option<f64>,
    pub shoot: ShootConfig,
    /// Amplitude of the initial velocity `u₀ = A sin(πx₂/L)e₁`.
    pub u_amplitude: f64,
    /// Project the unstable modes out of box runs after every step.
    pub project_unstable: bool,
    /// Buoyancy coupling `−μΨe₃`; off gives pure Keller-Segel when `U₀ = 0`.
    pub buoyancy: bool,
    /// Multiplier of the physical-frame initial density.
    pub density_amplitude: f64,
    pub output_every: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frame: Frame::RadialSelfsim,
            n: 128,
            box_half_width: 40.0,
            k: 2,
            mu0: 1.0,
            dt: 0.02,
            tau_end: 8.0,
            t_end: 0.1,
            r0: 10.0,
            r_cut: 10.0,
            deltas: DeltaBudget::default(),
            auto_scale_deltas: true,
            delta_g: None,
            shoot: ShootConfig::default(),
            u_amplitude: 1.0,
            project_unstable: true,
            buoyancy: true,
            density_amplitude: 1.0,
            output_every: 1,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return invalid(format!("sim.dt must be positive, got {}", self.dt));
        }
        if !(self.tau_end >= 0.0) || !(self.t_end >= 0.0) {
            return invalid("end times must be non-negative");
        }
        if self.k == 0 {
            return invalid("model.k must be at least 1");
        }
        if !(self.mu0 >= 0.0) {
            return invalid(format!("model.mu0 must be non-negative, got {}", self.mu0));
        }
        if !(self.r0 > 0.0) || !(self.r_cut > 0.0) {
            return invalid("cutoff radii must be positive");
        }
        if self.output_every == 0 {
            return invalid("output.every must be at least 1");
        }
        if !(self.shoot.tol > 0.0) {
            return invalid("shoot.tol must be positive");
        }
        if let Some(g) = self.delta_g {
            if !(g > 0.0) {
                return invalid(format!("delta.g must be positive, got {g}"));
            }
        }
        Ok(())
    }
}

pub const DIAGNOSTICS_HEADER: &str = "tau,t,h_k_stable,b_unstable,u_h1hk1,max_rho,min_rho,max_u,max_gradpi,mass";

/// One output row in physical variables `ρ = Ψ/μ²`, `u = U/μ`, `∇π = ∇Π/μ³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub tau: f64,
    pub t: f64,
    pub h_k_stable: f64,
    pub b_unstable: f64,
    pub u_h1hk1: f64,
    pub max_rho: f64,
    pub min_rho: f64,
    pub max_u: f64,
    pub max_gradpi: f64,
    pub mass: f64,
    /// `‖ε̃_s‖_{Ḣ^{k+1}}`; monitored but not written to the CSV.
    pub hk1_stable: f64,
}

impl DiagnosticsRow {
    pub fn values(&self) -> [f64; 10] {
        [
            self.tau,
            self.t,
            self.h_k_stable,
            self.b_unstable,
            self.u_h1hk1,
            self.max_rho,
            self.min_rho,
            self.max_u,
            self.max_gradpi,
            self.mass,
        ]
    }
}

/// `μ(τ) = μ₀e^{−τ/2}`.
pub fn mu_at(mu0: f64, tau: f64) -> f64 {
    mu0 * (-0.5 * tau).exp()
}

/// `t = T − μ²` with `T = μ₀²`, written as `μ₀²(1 − e^{−τ})` to avoid cancellation.
pub fn physical_time(mu0: f64, tau: f64) -> f64 {
    -mu0 * mu0 * (-tau).exp_m1()
}
