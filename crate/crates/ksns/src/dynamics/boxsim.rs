use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{mu_at, physical_time, DiagnosticsRow, Frame, RunConfig};
use crate::error::{invalid, Error, Result};
use crate::grids::snapshot::{GridKind, Snapshot};
use crate::grids::{transfer_radial_to_box, FourierGrid3, RadialGrid, VectorField};
use crate::linop::BoxPropagator;
use crate::profile;
use crate::spectral::{cutoff, ModifiedSpace, SpectralDecomposition};

/// Radial nodes used to build the unstable modes that box runs project out.
pub const MODE_GRID_N: usize = 128;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame3 {
    /// Renormalized variables `(Ψ, U)`; with `background` the density is stored
    /// as `ε = Ψ − Q` and the profile enters through its closed forms.
    SelfSim { background: bool },
    /// Physical variables `(ρ, u)`.
    Physical,
}

#[derive(Debug, Clone)]
pub struct BoxState {
    pub tau: f64,
    pub t: f64,
    /// `ε`, `Ψ` or `ρ` depending on the frame.
    pub density: Vec<f64>,
    pub velocity: VectorField,
    pub steps: usize,
    /// Unstable coefficients removed by the last projection.
    pub removed: Vec<f64>,
}

impl BoxState {
    pub fn snapshot(&self, grid: &FourierGrid3) -> Snapshot {
        let n = grid.n() as u64;
        let mut data = self.density.clone();
        for c in &self.velocity.comps {
            data.extend_from_slice(c);
        }
        Snapshot { kind: GridKind::Box, dims: vec![4, n, n, n], params: vec![grid.half_width(), self.tau], data }
    }
}

/// Oblique projection onto box modes `φ_j` along the annihilator of the duals `ψ_i`:
/// `f ↦ f − Σ a_jφ_j` with `a = G⁻¹((ψ_i, f))_i`, `G_ij = (ψ_i, φ_j)`.
#[derive(Debug, Clone)]
pub struct ModeProjector {
    phi: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
    gram_inv: DMatrix<f64>,
    dv: f64,
}

impl ModeProjector {
    pub fn new(grid: &FourierGrid3, phi: Vec<Vec<f64>>, psi: Vec<Vec<f64>>) -> Result<Self> {
        if phi.len() != psi.len() || phi.iter().chain(&psi).any(|v| v.len() != grid.len()) {
            return invalid("mode and dual lists must match each other and the box");
        }
        let dv = grid.spacing().powi(3);
        let m = phi.len();
        let g = DMatrix::from_fn(m, m, |i, j| dv * dot(&psi[i], &phi[j]));
        let gram_inv = g
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("singular mode Gram matrix on the box".into()))?;
        Ok(Self { phi, psi, gram_inv, dv })
    }

    /// Box samples of the modified modes `φ̃_j` and their `L²` duals `y_j/(4πw)`.
    pub fn from_space(space: &ModifiedSpace, grid: &FourierGrid3) -> Result<Self> {
        let rg = &space.decomp.grid;
        let mut phi = Vec::new();
        let mut psi = Vec::new();
        for (mode, pt) in space.decomp.modes.iter().zip(&space.phi_t) {
            let dual: Vec<f64> =
                mode.dual.iter().zip(rg.weights()).map(|(y, w)| y / (4.0 * std::f64::consts::PI * w)).collect();
            phi.push(transfer_radial_to_box(rg, &rg.field(mode.ell, pt.clone()), mode.m, grid)?.values);
            psi.push(transfer_radial_to_box(rg, &rg.field(mode.ell, dual), mode.m, grid)?.values);
        }
        Self::new(grid, phi, psi)
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let b = DVector::from_iterator(self.len(), self.psi.iter().map(|p| self.dv * dot(p, f)));
        (&self.gram_inv * b).iter().copied().collect()
    }

    /// Removes the mode content of `f` in place and returns the removed coefficients.
    pub fn remove(&self, f: &mut [f64]) -> Vec<f64> {
        let a = self.coefficients(f);
        for (c, p) in a.iter().zip(&self.phi) {
            for (v, x) in f.iter_mut().zip(p) {
                *v -= c * x;
            }
        }
        a
    }
}

#[derive(Debug, Clone)]
struct Background {
    q: Vec<f64>,
    q_hat: Vec<Complex64>,
    /// `∇Δ⁻¹Q = ∇F` in closed form.
    grad_f: [Vec<f64>; 3],
}

#[derive(Debug, Clone)]
enum HalfStep {
    Rescaled { density: BoxPropagator, velocity: BoxPropagator },
    Heat(Vec<f64>),
}

struct Rhs {
    density: Vec<f64>,
    velocity: [Vec<f64>; 3],
    /// `max(|U| + |∇Δ⁻¹Ψ|)`.
    speed: f64,
}

/// Outcome of [`BoxSim::run`]; a numerical blowup ends the run early.
#[derive(Debug, Clone)]
pub struct BoxRun {
    pub rows: Vec<DiagnosticsRow>,
    pub state: BoxState,
    pub blowup_tau: Option<f64>,
}

/// Keller-Segel-Navier-Stokes with buoyancy on the periodic box, self-similar or
/// physical frame.
///
/// Strang splitting: half a step of the exact linear propagator (rescaled heat kernel
/// in the self-similar frame, heat multiplier in the physical one), one dealiased
/// SSP-RK2 step of the nonlinear and buoyancy terms, another linear half step, then a
/// Leray projection of the velocity and, if configured, removal of the unstable modes.
#[derive(Debug, Clone)]
pub struct BoxSim {
    pub grid: FourierGrid3,
    pub frame: Frame3,
    pub dt: f64,
    pub k: usize,
    pub mu0: f64,
    pub buoyancy: bool,
    background: Option<Background>,
    half: HalfStep,
    projector: Option<ModeProjector>,
    space: Option<Arc<ModifiedSpace>>,
}

impl BoxSim {
    pub fn new(grid: FourierGrid3, frame: Frame3, dt: f64, k: usize, mu0: f64, buoyancy: bool) -> Result<Self> {
        if !(dt > 0.0) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        if !(mu0 > 0.0) {
            return invalid("box runs need model.mu0 > 0 to report physical quantities");
        }
        let half = match frame {
            Frame3::SelfSim { .. } => HalfStep::Rescaled {
                density: BoxPropagator::density(&grid, 0.5 * dt)?,
                velocity: BoxPropagator::velocity(&grid, 0.5 * dt)?,
            },
            Frame3::Physical => HalfStep::Heat((0..grid.len()).map(|i| (-0.5 * dt * grid.k2(i)).exp()).collect()),
        };
        let background = match frame {
            Frame3::SelfSim { background: true } => {
                let q = grid.sample(|y| profile::q(norm(y)));
                let q_hat = grid.forward(&q);
                let grad_f = [0, 1, 2].map(|d| grid.sample(|y| 4.0 * y[d] / (2.0 + norm(y).powi(2))));
                Some(Background { q, q_hat, grad_f })
            }
            _ => None,
        };
        Ok(Self { grid, frame, dt, k, mu0, buoyancy, background, half, projector: None, space: None })
    }

    /// Box simulation for a `box3d_*` configuration, with the unstable-mode projector
    /// attached in the self-similar frame when `project_unstable` is set.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let frame = match cfg.frame {
            Frame::Box3dSelfsim => Frame3::SelfSim { background: true },
            Frame::Box3dPhysical => Frame3::Physical,
            Frame::RadialSelfsim => return invalid("radial frame passed to the box simulator"),
        };
        if frame == Frame3::Physical && !(cfg.t_end < cfg.mu0 * cfg.mu0) {
            return invalid(format!("sim.t_end = {} must be below T = mu0^2 = {}", cfg.t_end, cfg.mu0 * cfg.mu0));
        }
        let grid = FourierGrid3::new(cfg.n, cfg.box_half_width)?;
        let mut sim = Self::new(grid, frame, cfg.dt, cfg.k, cfg.mu0, cfg.buoyancy)?;
        if cfg.project_unstable && frame != Frame3::Physical {
            if !(2.0 * cfg.r_cut < cfg.box_half_width) {
                return invalid(format!(
                    "modified modes need support 2R = {} inside the box half-width {}",
                    2.0 * cfg.r_cut,
                    cfg.box_half_width
                ));
            }
            let rg = Arc::new(RadialGrid::with_defaults(MODE_GRID_N)?);
            let decomp = SpectralDecomposition::new(rg, 1, cfg.k)?;
            sim.attach_modes(Arc::new(decomp.build_modified(cfg.r_cut)?))?;
        }
        Ok(sim)
    }

    pub fn attach_modes(&mut self, space: Arc<ModifiedSpace>) -> Result<()> {
        self.projector = Some(ModeProjector::from_space(&space, &self.grid)?);
        self.space = Some(space);
        Ok(())
    }

    pub fn projector(&self) -> Option<&ModeProjector> {
        self.projector.as_ref()
    }

    pub fn space(&self) -> Option<&ModifiedSpace> {
        self.space.as_deref()
    }

    /// Initial data of a configuration.
    ///
    /// Self-similar: `ε₀ = (χ_{R₀} − 1)Q` with the unstable part removed, and
    /// `U₀ = μ₀u₀(μ₀y)`. Physical: `ρ₀ = a μ₀⁻²(χ_{R₀}Q)(x/μ₀)`. In both,
    /// `u₀ = A sin(πx₂/B_phys)e₁` with `B_phys` the box half-width in physical units.
    pub fn initial_state(&self, cfg: &RunConfig) -> BoxState {
        let g = &self.grid;
        let b = g.half_width();
        let (density, velocity) = match self.frame {
            Frame3::SelfSim { background } => {
                let rho = g.sample(|y| {
                    let r = norm(y);
                    let c = cutoff(r / cfg.r0);
                    if background {
                        (c - 1.0) * profile::q(r)
                    } else {
                        c * profile::q(r)
                    }
                });
                let u1 = g.sample(|y| self.mu0 * cfg.u_amplitude * (std::f64::consts::PI * y[1] / b).sin());
                (rho, u1)
            }
            Frame3::Physical => {
                let m = self.mu0;
                let rho = g.sample(|x| {
                    let r = norm(x) / m;
                    cfg.density_amplitude * cutoff(r / cfg.r0) * profile::q(r) / (m * m)
                });
                let u1 = g.sample(|x| cfg.u_amplitude * (std::f64::consts::PI * x[1] / b).sin());
                (rho, u1)
            }
        };
        let len = g.len();
        let velocity = VectorField { comps: [velocity, vec![0.0; len], vec![0.0; len]], solenoidal: true };
        self.state(density, velocity)
    }

    /// A state at time zero from arbitrary data; the velocity is Leray-projected and
    /// unstable modes are removed.
    pub fn state(&self, mut density: Vec<f64>, velocity: VectorField) -> BoxState {
        let velocity = self.grid.leray_project(&velocity);
        let removed = match &self.projector {
            Some(p) => p.remove(&mut density),
            None => Vec::new(),
        };
        BoxState { tau: 0.0, t: 0.0, density, velocity, steps: 0, removed }
    }

    fn buoyancy_coefficient(&self, tau: f64) -> f64 {
        match (self.buoyancy, self.frame) {
            (false, _) => 0.0,
            (true, Frame3::SelfSim { .. }) => mu_at(self.mu0, tau),
            (true, Frame3::Physical) => 1.0,
        }
    }

    fn linear_half(&self, f: &mut Vec<f64>, u: &mut [Vec<f64>; 3]) {
        let g = &self.grid;
        match &self.half {
            HalfStep::Rescaled { density, velocity } => {
                *f = density.apply(g, f);
                for c in u.iter_mut() {
                    *c = velocity.apply(g, c);
                }
            }
            HalfStep::Heat(mult) => {
                let heat = |v: &[f64]| {
                    let mut h = g.forward(v);
                    for (x, m) in h.iter_mut().zip(mult) {
                        *x *= m;
                    }
                    g.inverse(h)
                };
                *f = heat(f);
                for c in u.iter_mut() {
                    *c = heat(c);
                }
            }
        }
    }

    fn total_density(&self, f: &[f64]) -> Vec<f64> {
        match &self.background {
            Some(b) => b.q.iter().zip(f).map(|(q, e)| q + e).collect(),
            None => f.to_vec(),
        }
    }

    fn rhs(&self, f: &[f64], u: &[Vec<f64>; 3], buoy: f64) -> Rhs {
        let g = &self.grid;
        let len = g.len();
        let fh = g.forward(f);
        let gh = g.inv_lap_hat(&fh);
        let grad = [0, 1, 2].map(|d| g.inverse(g.deriv_hat(&gh, d)));
        let psi = self.total_density(f);
        let bg = self.background.as_ref();
        let mut acc = vec![ZERO; len];
        for d in 0..3 {
            let flux: Vec<f64> = (0..len)
                .map(|i| {
                    let mut v = f[i] * grad[d][i] - u[d][i] * psi[i];
                    if let Some(b) = bg {
                        v += f[i] * b.grad_f[d][i] + b.q[i] * grad[d][i];
                    }
                    v
                })
                .collect();
            let mut h = g.forward(&flux);
            g.dealias(&mut h);
            for (a, v) in acc.iter_mut().zip(g.deriv_hat(&h, d)) {
                *a += v;
            }
        }
        let speed = (0..len)
            .map(|i| {
                let mut c = [grad[0][i], grad[1][i], grad[2][i]];
                if let Some(b) = bg {
                    for d in 0..3 {
                        c[d] += b.grad_f[d][i];
                    }
                }
                norm([u[0][i], u[1][i], u[2][i]]) + norm(c)
            })
            .fold(0.0, f64::max);
        let density = g.inverse(acc);
        let quiet = buoy == 0.0 && u.iter().all(|c| c.iter().all(|&v| v == 0.0));
        let velocity = if quiet {
            [vec![0.0; len], vec![0.0; len], vec![0.0; len]]
        } else {
            let mut adv = self.advection_hat(u);
            if buoy != 0.0 {
                let psi_hat = match bg {
                    Some(b) => fh.iter().zip(&b.q_hat).map(|(a, q)| a + q).collect(),
                    None => fh,
                };
                for (i, (a, p)) in adv[2].iter_mut().zip(&psi_hat).enumerate() {
                    if i != 0 {
                        *a -= buoy * p;
                    }
                }
            }
            g.leray_hat(&mut adv);
            adv.map(|h| g.inverse(h))
        };
        Rhs { density, velocity, speed }
    }

    /// `−div(U⊗U)` in Fourier space, dealiased.
    fn advection_hat(&self, u: &[Vec<f64>; 3]) -> [Vec<Complex64>; 3] {
        let g = &self.grid;
        let mut adv = [vec![ZERO; g.len()], vec![ZERO; g.len()], vec![ZERO; g.len()]];
        for i in 0..3 {
            for j in i..3 {
                let prod: Vec<f64> = u[i].iter().zip(&u[j]).map(|(a, b)| a * b).collect();
                let mut h = g.forward(&prod);
                g.dealias(&mut h);
                for (a, v) in adv[i].iter_mut().zip(g.deriv_hat(&h, j)) {
                    *a -= v;
                }
                if i != j {
                    for (a, v) in adv[j].iter_mut().zip(g.deriv_hat(&h, i)) {
                        *a -= v;
                    }
                }
            }
        }
        adv
    }

    /// Advective step limit `0.5·h / max(|U| + |∇Δ⁻¹Ψ|)`.
    pub fn cfl_limit(&self, s: &BoxState) -> f64 {
        let speed = self.rhs(&s.density, &s.velocity.comps, 0.0).speed;
        if speed > 0.0 {
            0.5 * self.grid.spacing() / speed
        } else {
            f64::INFINITY
        }
    }

    pub fn step(&self, s: &mut BoxState) -> Result<()> {
        let dt = self.dt;
        let buoy = match self.frame {
            Frame3::SelfSim { .. } => self.buoyancy_coefficient(s.tau + 0.5 * dt),
            Frame3::Physical => self.buoyancy_coefficient(0.0),
        };
        let mut f = s.density.clone();
        let mut u = s.velocity.comps.clone();
        self.linear_half(&mut f, &mut u);
        let k1 = self.rhs(&f, &u, buoy);
        let limit = 0.5 * self.grid.spacing() / k1.speed;
        if dt > limit {
            return Err(Error::Domain(format!("dt = {dt} exceeds the advective limit {limit:.6e} at tau = {}", s.tau)));
        }
        let f1: Vec<f64> = f.iter().zip(&k1.density).map(|(a, b)| a + dt * b).collect();
        let u1: [Vec<f64>; 3] =
            [0, 1, 2].map(|d| u[d].iter().zip(&k1.velocity[d]).map(|(a, b)| a + dt * b).collect());
        let k2 = self.rhs(&f1, &u1, buoy);
        for i in 0..f.len() {
            f[i] = 0.5 * (f[i] + f1[i] + dt * k2.density[i]);
        }
        for d in 0..3 {
            for i in 0..f.len() {
                u[d][i] = 0.5 * (u[d][i] + u1[d][i] + dt * k2.velocity[d][i]);
            }
        }
        self.linear_half(&mut f, &mut u);
        let velocity = self.grid.leray_project(&VectorField { comps: u, solenoidal: false });
        let removed = match &self.projector {
            Some(p) => p.remove(&mut f),
            None => Vec::new(),
        };
        let finite = f.iter().chain(velocity.comps.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NumericalBlowup { tau: s.tau });
        }
        s.density = f;
        s.velocity = velocity;
        s.removed = removed;
        s.steps += 1;
        match self.frame {
            Frame3::SelfSim { .. } => {
                s.tau = s.steps as f64 * dt;
                s.t = physical_time(self.mu0, s.tau);
            }
            Frame3::Physical => {
                s.t = s.steps as f64 * dt;
                s.tau = -(-s.t / (self.mu0 * self.mu0)).ln_1p();
            }
        }
        Ok(())
    }

    /// `Σ_k |k|^{2p}|f̂_k|² · h³/N³`, i.e. `‖f‖²_{Ḣ^p}` by Parseval.
    fn seminorm_sq(&self, fh: &[Complex64], p: usize) -> f64 {
        let g = &self.grid;
        let s: f64 = fh.iter().enumerate().map(|(i, v)| g.k2(i).powi(p as i32) * v.norm_sqr()).sum();
        s * g.spacing().powi(3) / g.len() as f64
    }

    /// `‖f‖_{H^k} = (‖f‖²_{L²} + ‖f‖²_{Ḣ^k})^{1/2}`.
    pub fn hk_norm(&self, f: &[f64]) -> f64 {
        let fh = self.grid.forward(f);
        (self.seminorm_sq(&fh, 0) + self.seminorm_sq(&fh, self.k)).sqrt()
    }

    /// `‖U‖_{Ḣ¹∩Ḣ^{k+1}}`.
    pub fn velocity_norm(&self, u: &VectorField) -> f64 {
        u.comps
            .iter()
            .map(|c| {
                let h = self.grid.forward(c);
                self.seminorm_sq(&h, 1) + self.seminorm_sq(&h, self.k + 1)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `∇Π = −∇Δ⁻¹(div(U·∇U) + c∂₃Ψ)` with `c = μ` (self-similar) or `1` (physical).
    pub fn pressure_gradient(&self, s: &BoxState) -> VectorField {
        let g = &self.grid;
        let adv = self.advection_hat(&s.velocity.comps);
        let buoy = self.buoyancy_coefficient(s.tau);
        let psi_hat = g.forward(&self.total_density(&s.density));
        // div(U·∇U) = −Σ ik_i adv_i
        let src: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let k = g.kvec(i);
                let mut v = ZERO;
                for d in 0..3 {
                    v -= Complex64::new(0.0, k[d]) * adv[d][i];
                }
                v + Complex64::new(0.0, buoy * k[2]) * psi_hat[i]
            })
            .collect();
        let ph: Vec<Complex64> = g.inv_lap_hat(&src).iter().map(|v| -v).collect();
        let comps = [0, 1, 2].map(|d| g.inverse(g.deriv_hat(&ph, d)));
        VectorField { comps, solenoidal: false }
    }

    pub fn diagnostics(&self, s: &BoxState) -> DiagnosticsRow {
        let g = &self.grid;
        let dv = g.spacing().powi(3);
        let total = self.total_density(&s.density);
        let gp = self.pressure_gradient(s).max_norm();
        let (max, min) = total.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), &v| (a.max(v), b.min(v)));
        let mass = total.iter().sum::<f64>() * dv;
        let unorm = self.velocity_norm(&s.velocity);
        let umax = s.velocity.max_norm();
        let mut stable = s.density.clone();
        let b_unstable = match (&self.projector, &self.space) {
            (Some(p), Some(space)) => {
                p.remove(&mut stable);
                space.b_norm_coeffs(&s.removed)
            }
            _ => 0.0,
        };
        let sh = g.forward(&stable);
        let h_k_stable = (self.seminorm_sq(&sh, 0) + self.seminorm_sq(&sh, self.k)).sqrt();
        let hk1_stable = self.seminorm_sq(&sh, self.k + 1).sqrt();
        match self.frame {
            Frame3::SelfSim { .. } => {
                let mu = mu_at(self.mu0, s.tau);
                DiagnosticsRow {
                    tau: s.tau,
                    t: s.t,
                    h_k_stable,
                    b_unstable,
                    u_h1hk1: unorm,
                    max_rho: max / (mu * mu),
                    min_rho: min / (mu * mu),
                    max_u: umax / mu,
                    max_gradpi: gp / (mu * mu * mu),
                    mass: mu * mass,
                    hk1_stable,
                }
            }
            Frame3::Physical => DiagnosticsRow {
                tau: s.tau,
                t: s.t,
                h_k_stable,
                b_unstable,
                u_h1hk1: unorm,
                max_rho: max,
                min_rho: min,
                max_u: umax,
                max_gradpi: gp,
                mass,
                hk1_stable,
            },
        }
    }

    /// Steps until `end` (`τ` in the self-similar frame, `t` in the physical one),
    /// recording a row every `every` steps and at the end. A numerical blowup stops
    /// the run and is reported rather than raised.
    pub fn run(
        &self,
        mut state: BoxState,
        end: f64,
        every: usize,
        mut on_step: impl FnMut(&BoxState),
    ) -> Result<BoxRun> {
        let every = every.max(1);
        let steps = (end / self.dt - 1e-9).ceil().max(0.0) as usize;
        let mut rows = vec![self.diagnostics(&state)];
        for i in 0..steps {
            match self.step(&mut state) {
                Ok(()) => {}
                Err(Error::NumericalBlowup { tau }) => {
                    return Ok(BoxRun { rows, state, blowup_tau: Some(tau) });
                }
                Err(e) => return Err(e),
            }
            on_step(&state);
            if (i + 1) % every == 0 || i + 1 == steps {
                rows.push(self.diagnostics(&state));
            }
        }
        Ok(BoxRun { rows, state, blowup_tau: None })
    }
}

#[inline]
fn norm(y: [f64; 3]) -> f64 {
    (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
