//! Efficiency-budget algebra for a waveguide-coupled single-photon source,
//! with first-order propagation of independent 1-sigma uncertainties.
//!
//! Lifetimes are in ns, rates in Hz, efficiencies are fractions.

mod quantity;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use quantity::linearized;
pub use quantity::Quantity;
pub use report::{budget_report, BudgetReport, ReportRow};

/// Relative sigma assigned to entries quoted without an error bar.
pub const DEFAULT_REL_SIGMA: f64 = 0.10;

/// Measured and assumed inputs of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    /// Excited-state lifetime (ns).
    pub tau: Quantity,
    #[serde(rename = "QY")]
    pub qy: Quantity,
    pub s: Quantity,
    pub eta_c: Quantity,
    pub eta_opt: Quantity,
    pub eta_det: Quantity,
    pub eta_f: Quantity,
    /// Detected count rate summed over both couplers (Hz).
    #[serde(rename = "S_c")]
    pub s_c: Quantity,
    /// Background rate (Hz).
    #[serde(rename = "B")]
    pub b: Quantity,
    pub g2_zero: Quantity,
    /// Background-subtracted camera intensity in the coupler areas.
    #[serde(rename = "S_coupler_image")]
    pub s_coupler_image: Quantity,
    /// Background-subtracted camera intensity of the free-space emission.
    #[serde(rename = "S_free_image")]
    pub s_free_image: Quantity,
    /// Coupling efficiency measured directly; replaces the image ratio when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_meas: Option<Quantity>,
    /// Independently reported on-chip purity to compare against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2_on_reference: Option<Quantity>,
}

fn q(value: f64, sigma: f64, unit: &str) -> Quantity {
    Quantity { value, sigma, unit: unit.into() }
}

impl EfficiencyBudget {
    /// Device characterized by count rates and coincidences: 25 % couplers,
    /// 48 kHz signal over 10 kHz background.
    pub fn reference_device() -> Self {
        let r = DEFAULT_REL_SIGMA;
        EfficiencyBudget {
            tau: q(4.2, 0.4, "ns"),
            qy: q(0.95, 0.95 * r, ""),
            s: q(0.2, 0.2 * r, ""),
            eta_c: q(0.25, 0.02, ""),
            eta_opt: q(0.10, 0.10 * r, ""),
            eta_det: q(0.50, 0.50 * r, ""),
            eta_f: q(0.05, 0.015, ""),
            s_c: q(48e3, 4e3, "Hz"),
            b: q(10e3, 2e3, "Hz"),
            g2_zero: q(0.50, 0.05, ""),
            // coupler : free intensities, each over its collection efficiency, as 1 : 4
            s_coupler_image: q(0.25, 0.0125, "a.u."),
            s_free_image: q(0.20, 0.010, "a.u."),
            beta_meas: None,
            g2_on_reference: Some(q(0.02, 0.12, "")),
        }
    }

    /// Best device: 40 % couplers and 42 % coupling efficiency.
    pub fn best_device() -> Self {
        EfficiencyBudget {
            eta_c: q(0.40, 0.02, ""),
            beta_meas: Some(q(0.42, 0.02, "")),
            g2_on_reference: None,
            ..Self::reference_device()
        }
    }

    /// Every violated range, not just the first.
    pub fn check(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let mut need = |name: &str, v: &Quantity, ok: bool, what: &str| {
            if !ok || !v.value.is_finite() || !(v.sigma >= 0.0) || !v.sigma.is_finite() {
                bad.push(format!("{name} = {v}: {what}"));
            }
        };
        for (name, v) in [
            ("QY", &self.qy),
            ("eta_c", &self.eta_c),
            ("eta_opt", &self.eta_opt),
            ("eta_det", &self.eta_det),
            ("eta_f", &self.eta_f),
        ] {
            need(name, v, (0.0..=1.0).contains(&v.value), "must lie in [0, 1]");
        }
        if let Some(beta) = &self.beta_meas {
            need("beta_meas", beta, (0.0..=1.0).contains(&beta.value), "must lie in [0, 1]");
        }
        need("tau", &self.tau, self.tau.value > 0.0, "must be > 0");
        need("s", &self.s, self.s.value >= 0.0, "must be >= 0");
        need("S_c", &self.s_c, self.s_c.value >= 0.0, "must be >= 0");
        need("B", &self.b, self.b.value >= 0.0, "must be >= 0");
        need("g2_zero", &self.g2_zero, self.g2_zero.value >= 0.0, "must be >= 0");
        need("S_coupler_image", &self.s_coupler_image, self.s_coupler_image.value >= 0.0, "must be >= 0");
        need("S_free_image", &self.s_free_image, self.s_free_image.value >= 0.0, "must be >= 0");
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.check();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: EfficiencyBudget = serde_json::from_str(text)?;
        b.validate()?;
        Ok(b)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Coupling efficiency: the direct value if present, else the image ratio.
    pub fn beta(&self) -> Result<Quantity> {
        match &self.beta_meas {
            Some(b) => Ok(b.clone()),
            None => beta_from_images(&self.s_coupler_image, &self.s_free_image, &self.eta_c, &self.eta_f),
        }
    }
}

/// Grating coupler with a Gaussian spectral response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplerModel {
    pub peak_efficiency: Quantity,
    /// nm.
    pub center_wavelength: f64,
    /// nm.
    pub bandwidth_fwhm: f64,
    /// Free-space output beam width (um).
    pub output_mode_fwhm: f64,
}

impl Default for CouplerModel {
    /// Average measured coupler: 35 +- 5 % at 785 nm, 50 nm wide, 4 um beam.
    fn default() -> Self {
        CouplerModel {
            peak_efficiency: q(0.35, 0.05, ""),
            center_wavelength: 785.0,
            bandwidth_fwhm: 50.0,
            output_mode_fwhm: 4.0,
        }
    }
}

impl CouplerModel {
    /// Simulated design ceiling.
    pub const SIMULATED_PEAK: f64 = 0.90;

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.peak_efficiency.value) {
            return Err(Error::domain(
                "coupler",
                format!("peak efficiency {} outside [0, 1]", self.peak_efficiency.value),
            ));
        }
        if !(self.bandwidth_fwhm > 0.0) || !(self.center_wavelength > 0.0) || !(self.output_mode_fwhm > 0.0) {
            return Err(Error::domain("coupler", "wavelength, bandwidth and beam width must be > 0"));
        }
        Ok(())
    }
}

/// Single-coupler efficiency as the square root of the two-coupler throughput.
pub fn coupler_efficiency_from_throughput(throughput: &Quantity) -> Result<Quantity> {
    let t = throughput.value;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("coupler_efficiency_from_throughput", format!("throughput {t} outside [0, 1]")));
    }
    let v = t.sqrt();
    let d = if t > 0.0 { 0.5 / v } else { f64::INFINITY };
    Ok(linearized(v, &[(d, throughput.sigma)], ""))
}

pub fn coupler_response(model: &CouplerModel, wavelength: f64) -> Result<f64> {
    model.validate()?;
    if !(wavelength > 0.0) {
        return Err(Error::domain("coupler_response", format!("wavelength {wavelength} nm")));
    }
    let x = (wavelength - model.center_wavelength) / model.bandwidth_fwhm;
    Ok(model.peak_efficiency.value * (-4.0 * std::f64::consts::LN_2 * x * x).exp())
}

/// `10^(-loss * length / 10)` for length in cm and loss in dB/cm.
pub fn propagation_transmission(length_cm: f64, loss_db_per_cm: f64) -> Result<f64> {
    if !(length_cm >= 0.0 && loss_db_per_cm >= 0.0) {
        return Err(Error::domain("propagation_transmission", "length and loss must be >= 0"));
    }
    Ok(10f64.powf(-loss_db_per_cm * length_cm / 10.0))
}

fn positive(op: &'static str, pairs: &[(&str, f64)]) -> Result<()> {
    let bad: Vec<String> = pairs.iter().filter(|p| !(p.1 > 0.0)).map(|p| format!("{} = {}", p.0, p.1)).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("must be > 0: {}", bad.join(", "))))
    }
}

/// `(S_c - B) 2 tau (s + 1) / s / (QY eta_c eta_opt eta_det)`.
pub fn beta_from_count_rate(b: &EfficiencyBudget) -> Result<Quantity> {
    positive(
        "beta_from_count_rate",
        &[
            ("s", b.s.value),
            ("tau", b.tau.value),
            ("QY", b.qy.value),
            ("eta_c", b.eta_c.value),
            ("eta_opt", b.eta_opt.value),
            ("eta_det", b.eta_det.value),
        ],
    )?;
    let net = b.s_c.value - b.b.value;
    let tau = b.tau.value * 1e-9;
    let s = b.s.value;
    let chain = b.qy.value * b.eta_c.value * b.eta_opt.value * b.eta_det.value;
    let v = net * 2.0 * tau * (s + 1.0) / s / chain;
    let dnet = 2.0 * tau * (s + 1.0) / s / chain;
    Ok(linearized(
        v,
        &[
            (dnet, b.s_c.sigma),
            (-dnet, b.b.sigma),
            (v / b.tau.value, b.tau.sigma),
            (-v / (s * (s + 1.0)), b.s.sigma),
            (-v / b.qy.value, b.qy.sigma),
            (-v / b.eta_c.value, b.eta_c.sigma),
            (-v / b.eta_opt.value, b.eta_opt.sigma),
            (-v / b.eta_det.value, b.eta_det.sigma),
        ],
        "",
    ))
}

/// `(S_c / eta_c) / (S_c / eta_c + S_f / eta_f)` from camera intensities.
pub fn beta_from_images(
    s_coupler: &Quantity,
    s_free: &Quantity,
    eta_c: &Quantity,
    eta_f: &Quantity,
) -> Result<Quantity> {
    positive("beta_from_images", &[("eta_c", eta_c.value), ("eta_f", eta_f.value)])?;
    if !(s_coupler.value >= 0.0 && s_free.value >= 0.0) {
        return Err(Error::domain("beta_from_images", "image intensities must be >= 0"));
    }
    let x = s_coupler.value / eta_c.value;
    let y = s_free.value / eta_f.value;
    if x + y == 0.0 {
        return Err(Error::domain("beta_from_images", "both image intensities are zero"));
    }
    let v = x / (x + y);
    // dv/dx = y / (x+y)^2, dv/dy = -x / (x+y)^2
    let (dx, dy) = (y / (x + y).powi(2), -x / (x + y).powi(2));
    Ok(linearized(
        v,
        &[
            (dx / eta_c.value, s_coupler.sigma),
            (-dx * x / eta_c.value, eta_c.sigma),
            (dy / eta_f.value, s_free.sigma),
            (-dy * y / eta_f.value, eta_f.sigma),
        ],
        "",
    ))
}

/// Guided photon flux at saturation, `QY beta / (4 tau)` (Hz).
pub fn saturation_on_chip_rate(tau: &Quantity, qy: &Quantity, beta: &Quantity) -> Result<Quantity> {
    positive("saturation_on_chip_rate", &[("tau", tau.value)])?;
    let t = tau.value * 1e-9;
    let v = qy.value * beta.value / (4.0 * t);
    Ok(linearized(
        v,
        &[(-v / tau.value, tau.sigma), (beta.value / (4.0 * t), qy.sigma), (qy.value / (4.0 * t), beta.sigma)],
        "Hz",
    ))
}

/// Probability per excitation of a photon leaving through a coupler, `QY beta eta_c`.
pub fn off_chip_brightness(qy: &Quantity, beta: &Quantity, eta_c: &Quantity) -> Result<Quantity> {
    for (name, v) in [("QY", qy), ("beta", beta), ("eta_c", eta_c)] {
        if !(0.0..=1.0).contains(&v.value) {
            return Err(Error::domain("off_chip_brightness", format!("{name} = {} outside [0, 1]", v.value)));
        }
    }
    let (a, b, c) = (qy.value, beta.value, eta_c.value);
    Ok(linearized(a * b * c, &[(b * c, qy.sigma), (a * c, beta.sigma), (a * b, eta_c.sigma)], ""))
}

/// Forward signal chain: `(1 / 2 tau) s / (1 + s) QY beta eta_c eta_opt eta_det` (Hz).
pub fn expected_detected_rate(b: &EfficiencyBudget, beta: &Quantity) -> Result<Quantity> {
    positive("expected_detected_rate", &[("s", b.s.value), ("tau", b.tau.value)])?;
    let tau = b.tau.value * 1e-9;
    let s = b.s.value;
    let pre = s / (1.0 + s) / (2.0 * tau);
    let chain = b.qy.value * b.eta_c.value * b.eta_opt.value * b.eta_det.value;
    let v = pre * chain * beta.value;
    let ratio = |x: f64| if x != 0.0 { v / x } else { 0.0 };
    Ok(linearized(
        v,
        &[
            (-v / b.tau.value, b.tau.sigma),
            (v / (s * (1.0 + s)), b.s.sigma),
            (ratio(b.qy.value), b.qy.sigma),
            (ratio(b.eta_c.value), b.eta_c.sigma),
            (ratio(b.eta_opt.value), b.eta_opt.sigma),
            (ratio(b.eta_det.value), b.eta_det.sigma),
            (pre * chain, beta.sigma),
        ],
        "Hz",
    ))
}
