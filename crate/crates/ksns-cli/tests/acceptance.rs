//! Acceptance criteria 1-9. One line per criterion; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;
use std::time::{Duration, Instant};

use ksns_cli::checks;
use ksns_cli::report::Report;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ksns")
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).expect("scratch dir");
    d
}

/// Runs the binary; returns (exit code, stdout).
fn ksns(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin()).args(args).output().expect("spawn ksns");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn failures(text: &str) -> String {
    let f: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    if f.is_empty() {
        "all checks pass".into()
    } else {
        f.join("; ")
    }
}

fn from_reports(reports: &[Report]) -> (bool, String) {
    let pass = reports.iter().all(|r| r.passed());
    let text: String = reports.iter().map(|r| r.render()).collect();
    (pass, failures(&text))
}

fn timed(id: u32, name: &'static str, limit: Duration, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, mut detail) = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    if !in_time {
        detail = format!("{detail}; runtime over {:.0} s", limit.as_secs_f64());
    }
    Outcome { id, name, pass: pass && in_time, detail, elapsed }
}

fn c1() -> Outcome {
    timed(1, "profile check --n 128", Duration::from_secs(1), || {
        let (code, out) = ksns(&["profile", "check", "--n", "128"]);
        (code == 0, failures(&out))
    })
}

fn c2() -> Outcome {
    timed(2, "L0 exactness", Duration::from_secs(10), || match checks::l0_report(128, &[0, 1, 2], 2) {
        Ok(r) => from_reports(&[r]),
        Err(e) => (false, e.to_string()),
    })
}

fn c3() -> Outcome {
    timed(3, "semigroup", Duration::from_secs(5), || match checks::semigroup_report(128, &[0, 1]) {
        Ok(r) => from_reports(&[r]),
        Err(e) => (false, e.to_string()),
    })
}

fn c4() -> Outcome {
    timed(4, "spectrum --ell-max 2 --n 192", Duration::from_secs(120), || {
        let dir = scratch("c4");
        let csv = dir.join("spectrum.csv");
        let (code, out) =
            ksns(&["spectrum", "--ell-max", "2", "--n", "192", "--k", "2", "--out", csv.to_str().expect("utf-8 path")]);
        let header = std::fs::read_to_string(&csv).ok().and_then(|s| s.lines().next().map(str::to_owned));
        let ok_header = header.as_deref() == Some(checks::SPECTRUM_HEADER);
        let mut detail = failures(&out);
        if !ok_header {
            detail.push_str("; bad spectrum.csv header");
        }
        (code == 0 && ok_header, detail)
    })
}

fn c5() -> Outcome {
    timed(5, "modified projections R = 5, 10, 20, 40", Duration::from_secs(60), || {
        match checks::modified_report(&[5.0, 10.0, 20.0, 40.0], 128, 2, 7) {
            Ok(r) => from_reports(&[r]),
            Err(e) => (false, e.to_string()),
        }
    })
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_default()
}

/// Criteria 6 and 9: one radial-stability reproduction, then a second for bytes.
fn c6_c9() -> (Outcome, Outcome) {
    let a = scratch("c6a");
    let six = timed(6, "reproduce radial-stability", Duration::from_secs(600), || {
        let (code, out) = ksns(&["reproduce", "radial-stability", "--out-dir", a.to_str().expect("utf-8 path")]);
        let shoot = std::fs::read_to_string(a.join("shoot_report.csv")).unwrap_or_default();
        let bisected = shoot.starts_with("iteration,bracket_lo,bracket_hi,exit_side\n") && shoot.lines().count() > 1;
        let mut detail = failures(&out);
        if !bisected {
            detail.push_str("; no bisection records");
        }
        (code == 0 && bisected, detail)
    });
    let b = scratch("c6b");
    let nine = timed(9, "determinism of diagnostics.csv", Duration::from_secs(600), || {
        let (code, _) = ksns(&["reproduce", "radial-stability", "--out-dir", b.to_str().expect("utf-8 path")]);
        let (x, y) = (read(&a.join("diagnostics.csv")), read(&b.join("diagnostics.csv")));
        let same = !x.is_empty() && x == y;
        (code == 0 && same, format!("{} bytes, identical: {same}", x.len()))
    });
    (six, nine)
}

fn c7() -> Outcome {
    timed(7, "reproduce appendix-b", Duration::from_secs(1800), || {
        let d = scratch("c7");
        let (code, out) = ksns(&["reproduce", "appendix-b", "--out-dir", d.to_str().expect("utf-8 path")]);
        (code == 0, failures(&out))
    })
}

fn c8() -> Outcome {
    timed(8, "well-posedness", Duration::from_secs(300), || match checks::wellposedness_report() {
        Ok(r) => from_reports(&[r]),
        Err(e) => (false, e.to_string()),
    })
}

fn main() {
    // the long box run goes first on its own thread
    let long = thread::spawn(c7);
    let mut outs = vec![c1(), c2(), c3(), c4(), c5()];
    let (six, nine) = c6_c9();
    outs.push(six);
    outs.push(c8());
    outs.push(long.join().expect("criterion 7 thread"));
    outs.push(nine);
    outs.sort_by_key(|o| o.id);
    println!("\nacceptance criteria");
    let mut all = true;
    for o in &outs {
        all &= o.pass;
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag}  criterion {}  {:<40} {:>9.2} s  {}", o.id, o.name, o.elapsed.as_secs_f64(), o.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
