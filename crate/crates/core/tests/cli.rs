use std::fs;
use std::process::Command as Process;

use molguide::cli::*;
use molguide::coupling::{beta_factor, stack_for, ModeCache};
use molguide::modesolver::SolverConfig;
use molguide::stratified::DipoleSource;
use molguide::Error;

fn errors_of(text: &str, strict: bool) -> Vec<String> {
    match parse_config_str(text, strict) {
        Err(Error::Config(v)) => v,
        other => panic!("expected config errors, got {other:?}"),
    }
}

#[test]
fn bundled_config_parses_cleanly() {
    let p = parse_config_str(PAPER_DEVICE_CFG, true).unwrap();
    assert!(p.warnings.is_empty());
    let c = p.config;
    assert_eq!(c.budget.eta_c.value, 0.25);
    assert_eq!(c.budget_best.eta_c.value, 0.40);
    assert_eq!(c.budget_best.s_c, c.budget.s_c);
    assert_eq!(c.budget_best.beta_meas.as_ref().unwrap().value, 0.42);
    assert_eq!(c.emitter.lifetime_tau, 4.2);
    assert_eq!(c.seed("emitter"), 1);
    let file = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/paper_device.cfg");
    assert!(parse_config(&file, true).is_ok());
}

#[test]
fn out_of_range_value_names_the_key() {
    let text = PAPER_DEVICE_CFG.replace("eta_c = [0.25, 0.02]", "eta_c = [1.2, 0.02]");
    let errs = errors_of(&text, false);
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(errs[0].contains("budget.eta_c"), "{errs:?}");
}

#[test]
fn missing_lifetime_is_reported() {
    let text = PAPER_DEVICE_CFG.replace("lifetime_tau_ns = 4.2\n", "").replace("tau = [4.2, 0.4]\n", "");
    let errs = errors_of(&text, false);
    assert!(errs.iter().any(|e| e.contains("missing key `emitter.lifetime_tau_ns`")), "{errs:?}");
    assert!(errs.iter().any(|e| e.contains("missing key `budget.tau`")), "{errs:?}");
}

#[test]
fn every_error_is_reported() {
    let text = PAPER_DEVICE_CFG
        .replace("n_core = 2.0", "n_core = 0.5")
        .replace("saturation_s = 0.2", "saturation_s = \"high\"")
        .replace("efficiency = 1.0", "efficiency = 2.0")
        .replace("h_nm = [50.0, 100.0, 150.0, 200.0]", "h_nm = [-5.0]");
    let errs = errors_of(&text, false);
    assert_eq!(errs.len(), 4, "{errs:?}");
}

#[test]
fn unknown_keys_warn_or_fail() {
    let text = PAPER_DEVICE_CFG.replace("[sweep]", "[sweep]\ncolour = \"blue\"");
    let p = parse_config_str(&text, false).unwrap();
    assert_eq!(p.warnings, vec!["unknown key `sweep.colour`".to_string()]);
    let errs = errors_of(&text, true);
    assert_eq!(errs, vec!["unknown key `sweep.colour`".to_string()]);
}

#[test]
fn absent_tables_use_the_reference_device() {
    let c = parse_config_str("", true).unwrap().config;
    assert_eq!(c.budget.s_c.value, 48e3);
    assert_eq!(c.budget_best.beta_meas.as_ref().unwrap().value, 0.42);
}

#[test]
fn seed_flags_parse() {
    assert_eq!(parse_seed("emitter=7").unwrap(), ("emitter".to_string(), 7));
    assert!(parse_seed("emitter").is_err());
    assert!(parse_seed("emitter=-1").is_err());
    assert!("beta-map".parse::<Command>().is_ok());
    assert!("nope".parse::<Command>().is_err());
}

fn loaded(text: &str) -> Loaded {
    let config = parse_config_str(text, true).unwrap().config;
    Loaded { config, digest: sha256_hex(text.as_bytes()), warnings: Vec::new() }
}

#[test]
fn budget_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_command(Command::BudgetReport, &loaded(PAPER_DEVICE_CFG), dir.path()).unwrap();
    assert_eq!(m.outputs.len(), 3);
    let csv = fs::read_to_string(dir.path().join("budget_report.csv")).unwrap();
    let value = |table: &str, sym: &str| -> f64 {
        let line = csv.lines().find(|l| l.starts_with(&format!("{table},{sym},"))).unwrap();
        line.split(',').nth(4).unwrap().parse().unwrap()
    };
    assert!((0.14..=0.19).contains(&value("1", "beta_est")));
    assert!((value("1", "p") - 0.79).abs() <= 0.01);
    assert!((value("2", "S_on_sat") - 24e6).abs() <= 1.5e6);
    assert!((value("2", "BR_off_sat") - 0.16).abs() <= 0.015);
    assert!(csv.contains("# note: on-chip purity"));
}

#[test]
fn manifest_lists_outputs_and_audit_checks_them() {
    let dir = tempfile::tempdir().unwrap();
    let l = loaded(PAPER_DEVICE_CFG);
    let m = run_command(Command::BudgetReport, &l, dir.path()).unwrap();
    let on_disk: RunManifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("budget-report.manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, m);
    assert_eq!(m.config_digest, sha256_hex(PAPER_DEVICE_CFG.as_bytes()));
    for o in &m.outputs {
        assert_eq!(sha256_hex(&fs::read(dir.path().join(&o.path)).unwrap()), o.sha256);
    }
    assert!(self_audit(dir.path()).unwrap().is_clean());
    // no temporary files are left behind
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));

    fs::write(dir.path().join("stray.csv"), "x").unwrap();
    let r = self_audit(dir.path()).unwrap();
    assert_eq!(r.problems.len(), 1);
    assert!(r.problems[0].contains("orphan"));
    fs::remove_file(dir.path().join("stray.csv")).unwrap();

    fs::write(dir.path().join("budget_report.txt"), "edited").unwrap();
    let r = self_audit(dir.path()).unwrap();
    assert!(r.problems.iter().any(|p| p.contains("digest")), "{r:?}");
}

#[test]
fn simulate_hbt_is_reproducible() {
    let l = loaded(PAPER_DEVICE_CFG);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_command(Command::SimulateHbt, &l, a.path()).unwrap();
    run_command(Command::SimulateHbt, &l, b.path()).unwrap();
    for f in ["timetags.bin", "g2.csv", "g2_fit.json", "hbt_summary.json", "g2.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let mut other = l.clone();
    other.config.seeds.insert("emitter".into(), 99);
    let c = tempfile::tempdir().unwrap();
    run_command(Command::SimulateHbt, &other, c.path()).unwrap();
    assert_ne!(fs::read(a.path().join("timetags.bin")).unwrap(), fs::read(c.path().join("timetags.bin")).unwrap());
    let tags =
        molguide::photostats::read_timetags(&mut fs::File::open(a.path().join("timetags.bin")).unwrap()).unwrap();
    assert_eq!(tags.len(), 2);
}

#[test]
fn single_cell_beta_map_matches_direct_evaluation() {
    let text = PAPER_DEVICE_CFG
        .replace("dx_nm = 10.0", "dx_nm = 20.0")
        .replace("dy_nm = 10.0", "dy_nm = 20.0")
        .replace("dy_nm = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0]", "dy_nm = [30.0]")
        .replace("h_nm = [50.0, 100.0, 150.0, 200.0]", "h_nm = [100.0]");
    let l = loaded(&text);
    let dir = tempfile::tempdir().unwrap();
    run_command(Command::BetaMap, &l, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join("beta_map.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);

    let c = &l.config;
    let g = c.geometry.with_crystal(100.0);
    let mode = ModeCache::new(SolverConfig::default()).fundamental(&g, 785.0).unwrap();
    let dipole = DipoleSource::in_crystal(785.0, 100.0, 30.0, [1.0, 0.0, 0.0]).unwrap();
    let r = beta_factor(&mode, &stack_for(&g).unwrap(), &dipole, 0.95, &c.template().coupling).unwrap();
    let expect =
        format!("100,30,{:.12e},{:.12e},{:.12e},{:.12e}", r.beta, r.gamma_wg_rel, r.gamma_free_rel, r.total_rate_rel);
    assert_eq!(rows[0], expect);
}

#[test]
fn exit_status_follows_errors() {
    let bin = env!("CARGO_BIN_EXE_molguide");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, PAPER_DEVICE_CFG.replace("eta_c = [0.25, 0.02]", "eta_c = [1.2, 0.02]")).unwrap();
    let out = Process::new(bin)
        .args(["budget-report", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget.eta_c"));

    // an unknown key only warns unless --strict
    fs::write(&cfg, PAPER_DEVICE_CFG.replace("[sweep]", "[sweep]\ncolour = 1")).unwrap();
    let run = |strict: bool| {
        let mut c = Process::new(bin);
        c.args(["budget-report", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o"));
        if strict {
            c.arg("--strict");
        }
        c.output().unwrap().status.success()
    };
    assert!(run(false));
    assert!(!run(true));
    let audit = Process::new(bin).args(["self-audit", "--out"]).arg(dir.path().join("o")).output().unwrap();
    assert!(audit.status.success());
    let seeded = Process::new(bin)
        .args(["simulate-hbt", "--seed", "emitter=5", "--threads", "1", "--out"])
        .arg(dir.path().join("h"))
        .output()
        .unwrap();
    assert!(seeded.status.success(), "{}", String::from_utf8_lossy(&seeded.stderr));
    let m: RunManifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("h/simulate-hbt.manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seeds["emitter"], 5);
}
