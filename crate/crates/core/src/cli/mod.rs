//! Configuration-driven runs: each command reads an experiment config,
//! writes its outputs atomically into one directory and records them in a
//! manifest written last.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::budget::{budget_report, Quantity};
use crate::coupling::{beta_map, stack_for, CouplingResult, ModeCache};
use crate::error::{Error, Result};
use crate::modesolver::{solve_modes, ModeField, SolverConfig};
use crate::photostats::{
    apply_detection, fit_g2, g2_histogram, hbt_split, on_chip_purity, simulate_emitter, write_timetags, Detection,
    G2Fit, G2Histogram,
};
use crate::stratified::{
    collection_efficiency, power_budget, radiation_pattern, DipoleSource, Hemisphere, RadiationPattern,
};
use crate::svg::{Plot, Series};

pub use config::{parse_config, parse_config_str, DipoleSpec, ExperimentConfig, HbtSpec, Parsed, PAPER_DEVICE_CFG};
pub use manifest::{self_audit, sha256_hex, AuditReport, OutputDir, OutputEntry, RunManifest, MANIFEST_SUFFIX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Modes,
    Radiate,
    BetaMap,
    SimulateHbt,
    BudgetReport,
    ReproducePaper,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Modes,
        Command::Radiate,
        Command::BetaMap,
        Command::SimulateHbt,
        Command::BudgetReport,
        Command::ReproducePaper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Modes => "modes",
            Command::Radiate => "radiate",
            Command::BetaMap => "beta-map",
            Command::SimulateHbt => "simulate-hbt",
            Command::BudgetReport => "budget-report",
            Command::ReproducePaper => "reproduce-paper",
        }
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::domain("command", format!("unknown command `{s}`")))
    }
}

/// Parses a `NAME=U64` seed override.
pub fn parse_seed(s: &str) -> Result<(String, u64)> {
    let (name, value) = s.split_once('=').ok_or_else(|| Error::domain("seed", format!("`{s}` is not NAME=U64")))?;
    let value = value.trim().parse().map_err(|_| Error::domain("seed", format!("`{value}` is not a u64")))?;
    if name.trim().is_empty() {
        return Err(Error::domain("seed", "empty seed name"));
    }
    Ok((name.trim().to_string(), value))
}

/// A validated config with the digest of the text it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub digest: String,
    pub warnings: Vec<String>,
}

/// Reads `path`, or the bundled reference device when `None`, then applies
/// seed overrides.
pub fn load_config(path: Option<&Path>, seeds: &[(String, u64)], strict: bool) -> Result<Loaded> {
    let (text, parsed) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let parsed = parse_config_str(&text, strict).map_err(|e| e.context(p.display().to_string()))?;
            (text, parsed)
        }
        None => (PAPER_DEVICE_CFG.to_string(), parse_config_str(PAPER_DEVICE_CFG, strict)?),
    };
    let mut config = parsed.config;
    for (name, value) in seeds {
        config.seeds.insert(name.clone(), *value);
    }
    Ok(Loaded { config, digest: sha256_hex(text.as_bytes()), warnings: parsed.warnings })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn ctx<T>(r: Result<T>, what: &str) -> Result<T> {
    r.map_err(|e| e.context(what.to_string()))
}

/// Runs one command and returns its manifest.
pub fn run_command(command: Command, loaded: &Loaded, out_dir: &Path) -> Result<RunManifest> {
    let cfg = &loaded.config;
    let mut out = OutputDir::create(out_dir)?;
    match command {
        Command::Modes => modes(cfg, &mut out)?,
        Command::Radiate => radiate(cfg, &mut out)?,
        Command::BetaMap => run_beta_map(cfg, &mut out)?,
        Command::SimulateHbt => {
            let hbt = ctx(hbt(cfg, cfg.detection.signal_fraction), "photostats")?;
            write_hbt(&hbt, "", &mut out)?;
        }
        Command::BudgetReport => {
            let report = ctx(budget_report(&cfg.budget, &cfg.budget_best), "budget")?;
            out.write("budget_report.csv", &csv_bytes(|b| report.write_csv(b)))?;
            out.write("budget_report.txt", &csv_bytes(|b| report.write_text(b)))?;
            out.write_json("budget_report.json", &report)?;
        }
        Command::ReproducePaper => reproduce(cfg, &mut out)?,
    }
    out.finish(command.name(), &loaded.digest, &cfg.seeds)
}

#[derive(Serialize)]
struct ModeSummary {
    index: usize,
    n_eff: f64,
    n_g: f64,
    /// Power fractions in Ex, Ey, Ez.
    component_fractions: [f64; 3],
    edge_ratio: f64,
}

fn mode_summary(k: usize, m: &ModeField) -> ModeSummary {
    ModeSummary {
        index: k,
        n_eff: m.n_eff,
        n_g: m.n_g,
        component_fractions: m.component_fractions(),
        edge_ratio: m.edge_ratio(),
    }
}

fn intensity_cuts(m: &ModeField, y_mid: f64) -> String {
    let g = m.grid;
    let cut = |pts: Vec<(f64, f64)>| pts.into_iter().filter(|p| p.1.is_finite()).collect::<Vec<_>>();
    let intensity =
        |x: f64, y: f64| m.field_at(x, y).map(|e| e.iter().map(|c| c.norm_sqr()).sum::<f64>()).unwrap_or(f64::NAN);
    let horizontal = cut((0..g.nx).map(|i| (g.x(i), intensity(g.x(i), y_mid))).collect());
    let vertical = cut((0..g.ny).map(|j| (g.y(j), intensity(0.0, g.y(j)))).collect());
    Plot {
        title: format!("Fundamental mode, n_eff = {:.5}", m.n_eff),
        x_label: "position (nm)".into(),
        y_label: "|E|^2 (1/nm)".into(),
        series: vec![
            Series { label: "along x, mid-ridge".into(), points: horizontal, line: true },
            Series { label: "along y, x = 0".into(), points: vertical, line: true },
        ],
    }
    .render()
}

fn modes(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let cs = cfg.geometry.cross_section()?;
    let found = ctx(solve_modes(&cs, cfg.wavelength, cfg.max_modes), "modesolver::solve_modes")?;
    if found.is_empty() {
        return Err(Error::ModeLost { wavelength_nm: cfg.wavelength }.context("modesolver::solve_modes"));
    }
    let summary: Vec<ModeSummary> = found.iter().enumerate().map(|(k, m)| mode_summary(k, m)).collect();
    out.write_json("modes.json", &summary)?;
    for (k, m) in found.iter().enumerate() {
        out.write(&format!("mode_{k}.csv"), &csv_bytes(|b| m.write_csv(b)))?;
    }
    out.write("modes.svg", intensity_cuts(&found[0], 0.5 * cfg.geometry.thickness).as_bytes())?;
    Ok(())
}

fn pattern_svg(up: &RadiationPattern, down: &RadiationPattern) -> String {
    let mut series = Vec::new();
    for p in [up, down] {
        for (k, phi) in [(0usize, 0.0), (p.phi_deg.len() / 4, 90.0)] {
            let sign = if p.hemisphere == Hemisphere::Up { 1.0 } else { -1.0 };
            series.push(Series {
                label: format!("{} phi={phi}", p.hemisphere.label()),
                points: (0..p.theta_deg.len()).map(|i| (sign * p.theta_deg[i], p.at(i, k))).collect(),
                line: true,
            });
        }
    }
    Plot {
        title: "Far-field pattern (up: positive angles)".into(),
        x_label: "polar angle from the normal (deg)".into(),
        y_label: "power per sr".into(),
        series,
    }
    .render()
}

#[derive(Serialize)]
struct RadiationSummary {
    crystal_thickness_nm: f64,
    height_nm: f64,
    orientation: [f64; 3],
    decay_rate_rel: f64,
    up: f64,
    down: f64,
    trapped: f64,
    numerical_aperture: f64,
    collection_efficiency: f64,
}

fn chip_dipole(cfg: &ExperimentConfig) -> Result<(crate::stratified::LayerStack, DipoleSource)> {
    let stack = stack_for(&cfg.geometry)?;
    let h = cfg.geometry.crystal_thickness;
    let dipole = DipoleSource::in_crystal(cfg.wavelength, h, cfg.dipole.height, cfg.dipole.orientation)?;
    Ok((stack, dipole))
}

fn radiate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let (stack, dipole) = ctx(chip_dipole(cfg), "stratified")?;
    let pb = ctx(power_budget(&stack, &dipole, &cfg.radiation), "stratified::power_budget")?;
    let eta = ctx(
        collection_efficiency(&stack, &dipole, cfg.numerical_aperture, &cfg.radiation),
        "stratified::collection_efficiency",
    )?;
    let (up, down) = ctx(radiation_pattern(&stack, &dipole, &cfg.radiation), "stratified::radiation_pattern")?;
    out.write_json(
        "radiation.json",
        &RadiationSummary {
            crystal_thickness_nm: cfg.geometry.crystal_thickness,
            height_nm: cfg.dipole.height,
            orientation: cfg.dipole.orientation,
            decay_rate_rel: pb.total,
            up: pb.up,
            down: pb.down,
            trapped: pb.trapped,
            numerical_aperture: cfg.numerical_aperture,
            collection_efficiency: eta,
        },
    )?;
    out.write("pattern_up.csv", &csv_bytes(|b| up.write_csv(b)))?;
    out.write("pattern_down.csv", &csv_bytes(|b| down.write_csv(b)))?;
    out.write("pattern.svg", pattern_svg(&up, &down).as_bytes())?;
    Ok(())
}

fn run_beta_map(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let cache = ModeCache::new(SolverConfig::default());
    let map = ctx(beta_map(&cfg.template(), &cfg.dy_values, &cfg.h_values, &cache), "coupling::beta_map")?;
    out.write("beta_map.csv", &csv_bytes(|b| map.write_csv(b)))?;
    out.write_json("beta_map.json", &map)?;
    out.write("beta_map.svg", map.to_svg().as_bytes())?;
    Ok(())
}

/// Streams, histogram and fit of one simulated coincidence measurement.
#[derive(Debug, Clone)]
pub struct HbtRun {
    pub arms: [crate::photostats::TimestampStream; 2],
    pub histogram: G2Histogram,
    pub fit: G2Fit,
    pub summary: HbtSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct HbtSummary {
    pub emitted_rate_hz: f64,
    pub expected_rate_hz: f64,
    pub antibunching_time_ns: f64,
    pub arm_rates_hz: [f64; 2],
    pub background_rate_per_arm_hz: f64,
    /// Guided share of clicks per arm.
    pub signal_fraction: f64,
    pub g2_zero: Quantity,
    pub t_ns: Quantity,
    /// Background-corrected zero-delay value.
    pub on_chip_g2_zero: Quantity,
    pub warnings: Vec<String>,
}

/// Emitter, beamsplitter and detection chain. With `signal_fraction` set,
/// each arm gets the background that makes that share of its clicks signal.
pub fn hbt(cfg: &ExperimentConfig, signal_fraction: Option<f64>) -> Result<HbtRun> {
    let d = &cfg.detection;
    let stream = simulate_emitter(&cfg.emitter, d.duration_ns, cfg.seed("emitter"))?;
    let (a, b) = hbt_split(&stream, cfg.seed("split"));
    let arm_signal = 0.5 * stream.rate() * d.chain.efficiency;
    let background = match signal_fraction {
        Some(p) => arm_signal * (1.0 / p - 1.0),
        None => d.chain.background_rate,
    };
    let chain = Detection { background_rate: background, ..d.chain };
    let seed = cfg.seed("detection");
    let a = apply_detection(&a, &chain, seed)?;
    let b = apply_detection(&b, &chain, seed.wrapping_add(1))?;
    let histogram = g2_histogram(&a, &b, d.bin_width_ps, d.window_ns)?;
    let fit = fit_g2(&histogram)?;
    let total = 0.5 * (a.rate() + b.rate());
    let p = if total > 0.0 { ((total - background) / total).clamp(0.0, 1.0) } else { 0.0 };
    let g = Quantity { value: fit.g2_zero, sigma: fit.se_g2_zero, unit: String::new() };
    let on_chip = on_chip_purity(&g, &Quantity::exact(total, "Hz"), &Quantity::exact(background, "Hz"))?;
    let summary = HbtSummary {
        emitted_rate_hz: stream.rate(),
        expected_rate_hz: cfg.emitter.expected_rate(),
        antibunching_time_ns: cfg.emitter.antibunching_time(),
        arm_rates_hz: [a.rate(), b.rate()],
        background_rate_per_arm_hz: background,
        signal_fraction: p,
        g2_zero: g,
        t_ns: Quantity { value: fit.t_ns, sigma: fit.se_t_ns, unit: "ns".into() },
        on_chip_g2_zero: on_chip,
        warnings: histogram.warnings.clone(),
    };
    Ok(HbtRun { arms: [a, b], histogram, fit, summary })
}

fn g2_svg(h: &G2Histogram, f: &G2Fit) -> String {
    let data = h.delays_ns.iter().copied().zip(h.normalized.iter().copied()).collect();
    let model = h.delays_ns.iter().map(|&t| (t, 1.0 - f.b * (-t.abs() / f.t_ns).exp())).collect();
    Plot {
        title: format!("Coincidences, fitted g2(0) = {:.3}", f.g2_zero),
        x_label: "delay (ns)".into(),
        y_label: "normalized coincidences".into(),
        series: vec![
            Series { label: "data".into(), points: data, line: false },
            Series { label: "fit".into(), points: model, line: true },
        ],
    }
    .render()
}

fn write_hbt(run: &HbtRun, prefix: &str, out: &mut OutputDir) -> Result<()> {
    let [a, b] = &run.arms;
    out.write(&format!("{prefix}timetags.bin"), &csv_bytes(|buf| write_timetags(&[a, b], buf)))?;
    out.write(&format!("{prefix}g2.csv"), &csv_bytes(|buf| run.histogram.write_csv(buf)))?;
    out.write_json(&format!("{prefix}g2_fit.json"), &run.fit)?;
    out.write_json(&format!("{prefix}hbt_summary.json"), &run.summary)?;
    out.write(&format!("{prefix}g2.svg"), g2_svg(&run.histogram, &run.fit).as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct ReferenceSummary {
    n_eff: f64,
    n_g: f64,
    ex_fraction: f64,
    coupling: CouplingResult,
    collection_efficiency: f64,
    numerical_aperture: f64,
    hbt: HbtSummary,
    budget_rows: Vec<crate::budget::ReportRow>,
    notes: Vec<String>,
}

/// Mode solve, coupling at the configured emitter position, collection
/// efficiency, coincidence simulation at the device's signal fraction,
/// purity, and the two budget tables.
fn reproduce(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let cache = ModeCache::new(SolverConfig::default());
    let mode = ctx(cache.fundamental(&cfg.geometry, cfg.wavelength), "modesolver")?;
    let h = cfg.geometry.crystal_thickness;
    let coupling = ctx(cfg.template().evaluate(&cache, cfg.dipole.height, h), "coupling::beta_factor")?;
    let (stack, dipole) = ctx(chip_dipole(cfg), "stratified")?;
    let eta_f = ctx(
        collection_efficiency(&stack, &dipole, cfg.numerical_aperture, &cfg.radiation),
        "stratified::collection_efficiency",
    )?;
    let (s_c, b) = (cfg.budget.s_c.value, cfg.budget.b.value);
    let run = ctx(hbt(cfg, Some((s_c - b) / s_c)), "photostats")?;
    let report = ctx(budget_report(&cfg.budget, &cfg.budget_best), "budget")?;
    write_hbt(&run, "paper_", out)?;
    out.write("paper_budget_report.csv", &csv_bytes(|buf| report.write_csv(buf)))?;
    out.write("paper_budget_report.txt", &csv_bytes(|buf| report.write_text(buf)))?;
    out.write_json(
        "paper_summary.json",
        &ReferenceSummary {
            n_eff: mode.n_eff,
            n_g: mode.n_g,
            ex_fraction: mode.component_fractions()[0],
            coupling,
            collection_efficiency: eta_f,
            numerical_aperture: cfg.numerical_aperture,
            hbt: run.summary,
            budget_rows: report.rows,
            notes: report.notes,
        },
    )?;
    Ok(())
}

/// Top-level options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seeds: Vec<(String, u64)>,
    pub out: Option<PathBuf>,
    pub strict: bool,
}

impl RunOptions {
    /// `--out`, else the config's `run.out`, else `out`.
    pub fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Loads the config and runs `command`.
pub fn run(command: Command, opts: &RunOptions) -> Result<(RunManifest, PathBuf)> {
    let loaded = load_config(opts.config.as_deref(), &opts.seeds, opts.strict)?;
    let dir = opts.out_dir(&loaded.config);
    let manifest = run_command(command, &loaded, &dir)?;
    Ok((manifest, dir))
}

/// Seeds in effect, for display.
pub fn describe_seeds(seeds: &BTreeMap<String, u64>) -> String {
    seeds.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}
