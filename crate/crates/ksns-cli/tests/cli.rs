use std::path::PathBuf;
use std::process::Command;

fn ksns(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ksns")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn scratch(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn exit_codes() {
    assert_eq!(ksns(&["profile", "check", "--n", "128"]).0, 0);
    // too coarse for the residual tolerance
    let (code, out) = ksns(&["profile", "check", "--n", "8"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("FAIL  stationarity_residual"));
    assert_eq!(ksns(&["warp-drive"]).0, 2);
    assert_eq!(ksns(&["spectrum", "--ell-max", "two"]).0, 2);
}

#[test]
fn spectrum_csv_contract() {
    let d = scratch("spectrum");
    let csv = d.join("spectrum.csv");
    let (code, _) = ksns(&["spectrum", "--ell-max", "1", "--n", "64", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ell,re_lambda,im_lambda,refinement_stable,unstable"));
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f.len(), 5);
        assert!(["0", "1"].contains(&f[3]) && ["0", "1"].contains(&f[4]));
        f[1].parse::<f64>().unwrap();
    }
}

#[test]
fn simulate_radial_and_box() {
    let d = scratch("simulate");
    let cfg = d.join("radial.toml");
    std::fs::write(&cfg, "frame = \"radial_selfsim\"\n[grid]\nn = 48\n[sim]\ndt = 0.05\ntau_end = 0.5\n[shoot]\nenabled = false\n").unwrap();
    let out = d.join("radial");
    let (code, text) = ksns(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let diag = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("tau,t,h_k_stable,b_unstable,u_h1hk1,max_rho,min_rho,max_u,max_gradpi,mass\n"));
    assert_eq!(diag.lines().count(), 12);
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    let bytes = std::fs::read(&cfg).unwrap();
    assert!(manifest.contains(&ksns_cli::config::sha256_hex(&bytes)));

    let cfg = d.join("box.toml");
    std::fs::write(
        &cfg,
        "frame = \"box3d_physical\"\n[grid]\nn = 16\nbox = 2.0\n[model]\nmu0 = 0.5\n[sim]\ndt = 1e-3\nt_end = 4e-3\n[init]\nR0 = 3.0\ndensity_amplitude = 0.2\n",
    )
    .unwrap();
    let out = d.join("box");
    let (code, text) = ksns(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--snapshot-every", "2",
    ]);
    assert_eq!(code, 0, "{text}");
    let snap = std::fs::read(out.join("snapshot_000004.bllb")).unwrap();
    assert_eq!(&snap[..4], b"BLLB");
}

#[test]
fn bad_config_is_a_usage_error() {
    let d = scratch("badcfg");
    let cfg = d.join("bad.toml");
    std::fs::write(&cfg, "[grid]\nnodes = 3\n").unwrap();
    assert_eq!(ksns(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", d.to_str().unwrap()]).0, 2);
}

#[test]
fn shoot_appends_records() {
    let d = scratch("shoot");
    let cfg = d.join("shoot.toml");
    std::fs::write(&cfg, "frame = \"radial_selfsim\"\n[grid]\nn = 48\n[sim]\ndt = 0.05\ntau_end = 1.0\n").unwrap();
    for _ in 0..2 {
        let (code, text) = ksns(&["shoot", "--config", cfg.to_str().unwrap(), "--out-dir", d.to_str().unwrap()]);
        assert_eq!(code, 0, "{text}");
    }
    let text = std::fs::read_to_string(d.join("shoot_report.csv")).unwrap();
    assert_eq!(text.matches("iteration,bracket_lo,bracket_hi,exit_side").count(), 1);
    assert!(text.lines().count() >= 3);
}
