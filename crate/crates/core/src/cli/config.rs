//! Experiment configuration: a TOML file with one table per concern.
//! Absent tables fall back to the reference device; a table that is
//! present must give its required keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::budget::{EfficiencyBudget, Quantity};
use crate::coupling::{CouplingConfig, MapTemplate};
use crate::error::{Error, Result};
use crate::modesolver::RidgeGeometry;
use crate::photostats::{Detection, EmitterParams};
use crate::stratified::RadiationConfig;

/// Reference device description shipped with the tool.
pub const PAPER_DEVICE_CFG: &str = include_str!("../../data/paper_device.cfg");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleSpec {
    /// Height above the ridge top (nm).
    pub height: f64,
    /// Stack axes, unit length.
    pub orientation: [f64; 3],
    /// Offset from the ridge axis (nm).
    pub lateral_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbtSpec {
    pub chain: Detection,
    /// Target guided fraction of clicks per arm; overrides the background rate.
    pub signal_fraction: Option<f64>,
    pub duration_ns: f64,
    pub bin_width_ps: u64,
    pub window_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub wavelength: f64,
    pub max_modes: usize,
    pub out: Option<PathBuf>,
    pub geometry: RidgeGeometry,
    pub emitter: EmitterParams,
    pub dipole: DipoleSpec,
    pub numerical_aperture: f64,
    pub radiation: RadiationConfig,
    pub detection: HbtSpec,
    pub dy_values: Vec<f64>,
    pub h_values: Vec<f64>,
    pub budget: EfficiencyBudget,
    pub budget_best: EfficiencyBudget,
    pub seeds: BTreeMap<String, u64>,
}

/// Parse outcome: the config plus non-fatal findings.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn template(&self) -> MapTemplate {
        MapTemplate {
            geometry: self.geometry,
            wavelength: self.wavelength,
            quantum_yield: self.emitter.quantum_yield,
            orientation: self.dipole.orientation,
            coupling: CouplingConfig { lateral_offset: self.dipole.lateral_offset, radiation: self.radiation },
        }
    }

    pub fn seed(&self, name: &str) -> u64 {
        self.seeds.get(name).copied().unwrap_or(0)
    }
}

struct Diag {
    errors: Vec<String>,
    warnings: Vec<String>,
    strict: bool,
}

impl Diag {
    fn unknown(&mut self, section: &str, table: &Table, known: &[&str]) {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                let msg = if section.is_empty() {
                    format!("unknown table or key `{key}`")
                } else {
                    format!("unknown key `{section}.{key}`")
                };
                if self.strict {
                    self.errors.push(msg);
                } else {
                    self.warnings.push(msg);
                }
            }
        }
    }
}

/// Typed access to one table, recording problems instead of stopping.
struct Sec<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl<'a> Sec<'a> {
    fn key(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    /// `required` only applies when the table is present.
    fn num(&self, d: &mut Diag, key: &str, default: f64, required: bool, ok: impl Fn(f64) -> bool, rule: &str) -> f64 {
        let Some(t) = self.table else { return default };
        match t.get(key) {
            None if required => {
                d.errors.push(format!("missing key `{}`", self.key(key)));
                default
            }
            None => default,
            Some(v) => match as_f64(v) {
                Some(x) if ok(x) && x.is_finite() => x,
                Some(x) => {
                    d.errors.push(format!("`{}` = {x} out of range: {rule}", self.key(key)));
                    default
                }
                None => {
                    d.errors.push(format!("`{}` must be a number", self.key(key)));
                    default
                }
            },
        }
    }

    fn opt_num(&self, d: &mut Diag, key: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Option<f64> {
        let present = self.table.is_some_and(|t| t.contains_key(key));
        present.then(|| self.num(d, key, f64::NAN, false, ok, rule))
    }

    fn list(&self, d: &mut Diag, key: &str, default: &[f64], ok: impl Fn(f64) -> bool, rule: &str) -> Vec<f64> {
        let Some(v) = self.table.and_then(|t| t.get(key)) else { return default.to_vec() };
        let Some(items) = v.as_array() else {
            d.errors.push(format!("`{}` must be an array of numbers", self.key(key)));
            return default.to_vec();
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            match as_f64(item) {
                Some(x) if ok(x) && x.is_finite() => out.push(x),
                _ => d.errors.push(format!("`{}[{i}]` = {item} out of range: {rule}", self.key(key))),
            }
        }
        if items.is_empty() {
            d.errors.push(format!("`{}` is empty", self.key(key)));
        }
        out
    }

    fn quantity(&self, d: &mut Diag, key: &str, default: &Quantity, required: bool) -> Quantity {
        let Some(t) = self.table else { return default.clone() };
        let bad = |d: &mut Diag| {
            d.errors.push(format!("`{}` must be a number, a [value, sigma] pair or {{ value, sigma }}", self.key(key)))
        };
        let (value, sigma) = match t.get(key) {
            None => {
                if required {
                    d.errors.push(format!("missing key `{}`", self.key(key)));
                }
                return default.clone();
            }
            Some(v) => match v {
                Value::Array(a) if a.len() == 2 => match (as_f64(&a[0]), as_f64(&a[1])) {
                    (Some(x), Some(s)) => (x, s),
                    _ => {
                        bad(d);
                        return default.clone();
                    }
                },
                Value::Table(q) => match (q.get("value").and_then(as_f64), q.get("sigma").map_or(Some(0.0), as_f64)) {
                    (Some(x), Some(s)) => (x, s),
                    _ => {
                        bad(d);
                        return default.clone();
                    }
                },
                other => match as_f64(other) {
                    Some(x) => (x, 0.0),
                    None => {
                        bad(d);
                        return default.clone();
                    }
                },
            },
        };
        if !(sigma >= 0.0 && sigma.is_finite() && value.is_finite()) {
            d.errors.push(format!("`{}`: sigma {sigma} must be finite and >= 0", self.key(key)));
            return default.clone();
        }
        Quantity { value, sigma, unit: default.unit.clone() }
    }
}

const BUDGET_KEYS: [&str; 14] = [
    "tau",
    "QY",
    "s",
    "eta_c",
    "eta_opt",
    "eta_det",
    "eta_f",
    "S_c",
    "B",
    "g2_zero",
    "S_coupler_image",
    "S_free_image",
    "beta_meas",
    "g2_on_reference",
];

fn budget(d: &mut Diag, sec: &Sec, base: &EfficiencyBudget, required: bool) -> EfficiencyBudget {
    let optional = |d: &mut Diag, key: &str, base: &Option<Quantity>| -> Option<Quantity> {
        match sec.table {
            Some(t) if t.contains_key(key) => Some(sec.quantity(d, key, &Quantity::exact(f64::NAN, ""), false)),
            _ => base.clone(),
        }
    };
    let out = EfficiencyBudget {
        tau: sec.quantity(d, "tau", &base.tau, required),
        qy: sec.quantity(d, "QY", &base.qy, required),
        s: sec.quantity(d, "s", &base.s, required),
        eta_c: sec.quantity(d, "eta_c", &base.eta_c, required),
        eta_opt: sec.quantity(d, "eta_opt", &base.eta_opt, required),
        eta_det: sec.quantity(d, "eta_det", &base.eta_det, required),
        eta_f: sec.quantity(d, "eta_f", &base.eta_f, required),
        s_c: sec.quantity(d, "S_c", &base.s_c, required),
        b: sec.quantity(d, "B", &base.b, required),
        g2_zero: sec.quantity(d, "g2_zero", &base.g2_zero, required),
        s_coupler_image: sec.quantity(d, "S_coupler_image", &base.s_coupler_image, required),
        s_free_image: sec.quantity(d, "S_free_image", &base.s_free_image, required),
        beta_meas: optional(d, "beta_meas", &base.beta_meas),
        g2_on_reference: optional(d, "g2_on_reference", &base.g2_on_reference),
    };
    for e in out.check() {
        d.errors.push(format!("{}.{e}", sec.name));
    }
    out
}

/// Validates a configuration document. All problems are reported together.
pub fn parse_config_str(text: &str, strict: bool) -> Result<Parsed> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let mut d = Diag { errors: Vec::new(), warnings: Vec::new(), strict };
    let known = ["run", "geometry", "emitter", "radiation", "detection", "sweep", "budget", "budget_best", "seeds"];
    d.unknown("", &root, &known);
    let mut section = |name: &'static str| -> Sec {
        match root.get(name) {
            None => Sec { name, table: None },
            Some(Value::Table(t)) => Sec { name, table: Some(t) },
            Some(_) => {
                d.errors.push(format!("`{name}` must be a table"));
                Sec { name, table: None }
            }
        }
    };
    let (run, geo, emi, rad, det, sweep, bud, best, seeds_sec) = (
        section("run"),
        section("geometry"),
        section("emitter"),
        section("radiation"),
        section("detection"),
        section("sweep"),
        section("budget"),
        section("budget_best"),
        section("seeds"),
    );
    let pos = |x: f64| x > 0.0;
    let nonneg = |x: f64| x >= 0.0;
    let frac = |x: f64| (0.0..=1.0).contains(&x);
    let index = |x: f64| x >= 1.0;

    let wavelength = run.num(&mut d, "wavelength_nm", crate::EMISSION_WAVELENGTH_NM, false, pos, "> 0");
    let max_modes = run.num(&mut d, "max_modes", 4.0, false, |x| x >= 1.0 && x.fract() == 0.0, "integer >= 1") as usize;
    let out = match run.table.and_then(|t| t.get("out")) {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => {
            d.errors.push("`run.out` must be a string".into());
            None
        }
    };
    if let Some(t) = run.table {
        d.unknown("run", t, &["wavelength_nm", "max_modes", "out"]);
    }

    let g0 = RidgeGeometry::default();
    let geometry = RidgeGeometry {
        width: geo.num(&mut d, "width_nm", g0.width, false, pos, "> 0"),
        thickness: geo.num(&mut d, "thickness_nm", g0.thickness, false, pos, "> 0"),
        crystal_thickness: geo.num(&mut d, "crystal_thickness_nm", g0.crystal_thickness, false, nonneg, ">= 0"),
        n_core: geo.num(&mut d, "n_core", g0.n_core, false, index, ">= 1"),
        n_crystal: geo.num(&mut d, "n_crystal", g0.n_crystal, false, index, ">= 1"),
        n_substrate: geo.num(&mut d, "n_substrate", g0.n_substrate, false, index, ">= 1"),
        n_cover: geo.num(&mut d, "n_cover", g0.n_cover, false, index, ">= 1"),
        margin: geo.num(&mut d, "margin_nm", g0.margin, false, |x| x >= crate::modesolver::MIN_MARGIN_NM, ">= 1000"),
        dx: geo.num(&mut d, "dx_nm", g0.dx, false, pos, "> 0"),
        dy: geo.num(&mut d, "dy_nm", g0.dy, false, pos, "> 0"),
    };
    if let Some(t) = geo.table {
        d.unknown(
            "geometry",
            t,
            &[
                "width_nm",
                "thickness_nm",
                "crystal_thickness_nm",
                "n_core",
                "n_crystal",
                "n_substrate",
                "n_cover",
                "margin_nm",
                "dx_nm",
                "dy_nm",
            ],
        );
    }

    let e0 = EmitterParams::default();
    let emitter = EmitterParams {
        lifetime_tau: emi.num(&mut d, "lifetime_tau_ns", e0.lifetime_tau, true, pos, "> 0"),
        saturation_s: emi.num(&mut d, "saturation_s", e0.saturation_s, true, nonneg, ">= 0"),
        quantum_yield: emi.num(&mut d, "quantum_yield", e0.quantum_yield, true, |x| x > 0.0 && x <= 1.0, "(0, 1]"),
        isc_yield: emi.num(&mut d, "isc_yield", e0.isc_yield, false, frac, "[0, 1]"),
        triplet_lifetime: emi.num(&mut d, "triplet_lifetime_ns", e0.triplet_lifetime, false, pos, "> 0"),
    };
    let height = emi.num(&mut d, "height_nm", 10.0, false, nonneg, ">= 0");
    let lateral_offset = emi.num(&mut d, "lateral_offset_nm", 0.0, false, |_| true, "finite");
    let orientation = match emi.table.and_then(|t| t.get("orientation")) {
        None => [1.0, 0.0, 0.0],
        Some(v) => {
            let o: Vec<f64> = v.as_array().map(|a| a.iter().filter_map(as_f64).collect()).unwrap_or_default();
            let norm = o.iter().map(|x| x * x).sum::<f64>().sqrt();
            if o.len() != 3 || !(norm > 0.0) {
                d.errors.push("`emitter.orientation` must be three numbers, not all zero".into());
                [1.0, 0.0, 0.0]
            } else {
                [o[0] / norm, o[1] / norm, o[2] / norm]
            }
        }
    };
    if height > geometry.crystal_thickness {
        d.errors.push(format!(
            "`emitter.height_nm` = {height} exceeds `geometry.crystal_thickness_nm` = {}",
            geometry.crystal_thickness
        ));
    }
    if let Some(t) = emi.table {
        d.unknown(
            "emitter",
            t,
            &[
                "lifetime_tau_ns",
                "saturation_s",
                "quantum_yield",
                "isc_yield",
                "triplet_lifetime_ns",
                "height_nm",
                "orientation",
                "lateral_offset_nm",
            ],
        );
    }

    let r0 = RadiationConfig::default();
    let numerical_aperture = rad.num(&mut d, "numerical_aperture", 0.6, false, |x| x > 0.0 && x <= 1.0, "(0, 1]");
    let radiation = RadiationConfig {
        angular_step_deg: rad.num(
            &mut d,
            "angular_step_deg",
            r0.angular_step_deg,
            false,
            |x| x > 0.0 && x <= 90.0,
            "(0, 90]",
        ),
        rel_tol: rad.num(&mut d, "rel_tol", r0.rel_tol, false, |x| x > 0.0 && x < 1e-2, "(0, 1e-2)"),
        ..r0
    };
    if let Some(t) = rad.table {
        d.unknown("radiation", t, &["numerical_aperture", "angular_step_deg", "rel_tol"]);
    }

    let detection = HbtSpec {
        chain: Detection {
            efficiency: det.num(&mut d, "efficiency", 1.0, false, frac, "[0, 1]"),
            background_rate: det.num(&mut d, "background_rate_hz", 0.0, false, nonneg, ">= 0"),
            dead_time: det.num(&mut d, "dead_time_ns", 0.0, false, nonneg, ">= 0"),
            jitter_ps: det.num(&mut d, "jitter_ps", 0.0, false, nonneg, ">= 0"),
        },
        signal_fraction: det.opt_num(&mut d, "signal_fraction", |x| x > 0.0 && x <= 1.0, "(0, 1]"),
        duration_ns: det.num(&mut d, "duration_ns", 1e7, false, pos, "> 0"),
        bin_width_ps: det.num(&mut d, "bin_width_ps", 200.0, false, |x| x >= 1.0 && x.fract() == 0.0, "integer >= 1")
            as u64,
        window_ns: det.num(&mut d, "window_ns", 50.0, false, pos, "> 0"),
    };
    if (detection.bin_width_ps as f64) > detection.window_ns * 1e3 {
        d.errors.push("`detection.bin_width_ps` exceeds the window".into());
    }
    if let Some(t) = det.table {
        d.unknown(
            "detection",
            t,
            &[
                "efficiency",
                "background_rate_hz",
                "signal_fraction",
                "dead_time_ns",
                "jitter_ps",
                "duration_ns",
                "bin_width_ps",
                "window_ns",
            ],
        );
    }

    let dy_values =
        sweep.list(&mut d, "dy_nm", &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0], nonneg, ">= 0");
    let h_values = sweep.list(&mut d, "h_nm", &[50.0, 100.0, 150.0, 200.0], pos, "> 0");
    if let Some(t) = sweep.table {
        d.unknown("sweep", t, &["dy_nm", "h_nm"]);
    }

    let budget_main = budget(&mut d, &bud, &EfficiencyBudget::reference_device(), true);
    if let Some(t) = bud.table {
        d.unknown("budget", t, &BUDGET_KEYS);
    }
    // the best-device table inherits everything it does not override
    let best_base = if best.table.is_some() {
        EfficiencyBudget { beta_meas: None, g2_on_reference: None, ..budget_main.clone() }
    } else {
        EfficiencyBudget::best_device()
    };
    let budget_best = budget(&mut d, &best, &best_base, false);
    if let Some(t) = best.table {
        d.unknown("budget_best", t, &BUDGET_KEYS);
    }

    let mut seeds = BTreeMap::new();
    for name in ["emitter", "split", "detection"] {
        seeds.insert(name.to_string(), 0);
    }
    if let Some(t) = seeds_sec.table {
        for (k, v) in t {
            match v.as_integer() {
                Some(i) if i >= 0 => {
                    seeds.insert(k.clone(), i as u64);
                }
                _ => d.errors.push(format!("`seeds.{k}` must be a non-negative integer")),
            }
        }
    }

    if let Err(e) = emitter.validate() {
        d.errors.push(format!("emitter: {e}"));
    }
    if d.errors.is_empty() {
        if let Err(e) = geometry.cross_section() {
            d.errors.push(format!("geometry: {e}"));
        }
    }
    if !d.errors.is_empty() {
        return Err(Error::Config(d.errors));
    }
    for w in &d.warnings {
        log::warn!("{w}");
    }
    Ok(Parsed {
        config: ExperimentConfig {
            wavelength,
            max_modes,
            out,
            geometry,
            emitter,
            dipole: DipoleSpec { height, orientation, lateral_offset },
            numerical_aperture,
            radiation,
            detection,
            dy_values,
            h_values,
            budget: budget_main,
            budget_best,
            seeds,
        },
        warnings: d.warnings,
    })
}

pub fn parse_config(path: &Path, strict: bool) -> Result<Parsed> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, strict).map_err(|e| e.context(path.display().to_string()))
}
