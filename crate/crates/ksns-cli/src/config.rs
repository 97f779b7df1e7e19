//! TOML run configuration.
//!
//! ```toml
//! frame = "box3d_selfsim"
//! [grid]
//! n = 96
//! box = 40.0
//! [model]
//! k = 2
//! mu0 = 1e-3
//! [sim]
//! dt = 0.1
//! tau_end = 10.0
//! [init]
//! R0 = 10.0
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use ksns::dynamics::{DeltaBudget, Frame, RunConfig, ShootConfig};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    frame: Option<String>,
    #[serde(default)]
    grid: Grid,
    #[serde(default)]
    model: Model,
    #[serde(default)]
    sim: Sim,
    #[serde(default)]
    init: Init,
    #[serde(default)]
    shoot: Shoot,
    #[serde(default)]
    delta: Delta,
    #[serde(default)]
    modes: Modes,
    #[serde(default)]
    output: Output,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Grid {
    n: Option<usize>,
    #[serde(rename = "box")]
    half_width: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Model {
    k: Option<usize>,
    mu0: Option<f64>,
    buoyancy: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sim {
    dt: Option<f64>,
    tau_end: Option<f64>,
    t_end: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Init {
    #[serde(rename = "R0")]
    r0: Option<f64>,
    u_amplitude: Option<f64>,
    density_amplitude: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Shoot {
    enabled: Option<bool>,
    tol: Option<f64>,
    max_iter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Delta {
    g: Option<f64>,
    d0: Option<f64>,
    d1: Option<f64>,
    d2: Option<f64>,
    d3: Option<f64>,
    d4: Option<f64>,
    auto_scale: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Modes {
    #[serde(rename = "R")]
    r_cut: Option<f64>,
    project: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Output {
    every: Option<usize>,
}

/// Parsed configuration together with the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub run: RunConfig,
    pub text: String,
}

impl LoadedConfig {
    pub fn hash(&self) -> String {
        sha256_hex(self.text.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let f: File = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {}", e.message())))?;
    let mut c = RunConfig::default();
    if let Some(fr) = f.frame {
        c.frame = Frame::parse(&fr).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    set(&mut c.n, f.grid.n);
    set(&mut c.box_half_width, f.grid.half_width);
    set(&mut c.k, f.model.k);
    set(&mut c.mu0, f.model.mu0);
    set(&mut c.buoyancy, f.model.buoyancy);
    set(&mut c.dt, f.sim.dt);
    set(&mut c.tau_end, f.sim.tau_end);
    set(&mut c.t_end, f.sim.t_end);
    set(&mut c.seed, f.sim.seed);
    set(&mut c.r0, f.init.r0);
    set(&mut c.u_amplitude, f.init.u_amplitude);
    set(&mut c.density_amplitude, f.init.density_amplitude);
    c.shoot = ShootConfig {
        enabled: f.shoot.enabled.unwrap_or(c.shoot.enabled),
        tol: f.shoot.tol.unwrap_or(c.shoot.tol),
        max_iter: f.shoot.max_iter.unwrap_or(c.shoot.max_iter),
    };
    let d = c.deltas;
    c.deltas = DeltaBudget {
        d0: f.delta.d0.unwrap_or(d.d0),
        d1: f.delta.d1.unwrap_or(d.d1),
        d2: f.delta.d2.unwrap_or(d.d2),
        d3: f.delta.d3.unwrap_or(d.d3),
        d4: f.delta.d4.unwrap_or(d.d4),
    };
    c.delta_g = f.delta.g.or(c.delta_g);
    set(&mut c.auto_scale_deltas, f.delta.auto_scale);
    // the modified space follows the density cutoff unless set
    c.r_cut = f.modes.r_cut.unwrap_or(c.r0);
    set(&mut c.project_unstable, f.modes.project);
    set(&mut c.output_every, f.output.every);
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let run = parse(&text)?;
    Ok(LoadedConfig { run, text })
}

/// Built-in configuration of the `reproduce radial-stability` run.
pub const RADIAL_STABILITY: &str = r#"frame = "radial_selfsim"

[grid]
n = 128

[model]
k = 2
mu0 = 1.0

[sim]
dt = 0.02
tau_end = 8.0

[init]
R0 = 10.0

[shoot]
enabled = true
tol = 1e-12
max_iter = 60
"#;

/// Built-in configuration of the `reproduce appendix-b` run.
pub const APPENDIX_B: &str = r#"frame = "box3d_selfsim"

[grid]
n = 96
box = 40.0

[model]
k = 2
mu0 = 1e-3
buoyancy = true

[sim]
dt = 0.1
tau_end = 10.0

[init]
R0 = 10.0
u_amplitude = 1.0

[modes]
project = true
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        let r = parse(RADIAL_STABILITY).unwrap();
        assert_eq!(r.frame, Frame::RadialSelfsim);
        assert_eq!(r.r_cut, 10.0);
        let b = parse(APPENDIX_B).unwrap();
        assert_eq!((b.n, b.box_half_width, b.mu0), (96, 40.0, 1e-3));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(parse("[grid]\nm = 3\n"), Err(CliError::Usage(_))));
        assert!(matches!(parse("[sim]\ndt = -1.0\n"), Err(CliError::Usage(_))));
        assert!(matches!(parse("frame = \"disk\"\n"), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_is_content_only() {
        let a = LoadedConfig { run: parse("").unwrap(), text: "x = 1".into() };
        assert_eq!(a.hash(), sha256_hex(b"x = 1"));
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
