use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    beta_from_count_rate, linearized, off_chip_brightness, saturation_on_chip_rate, EfficiencyBudget, Quantity,
};
use crate::error::Result;
use crate::photostats::on_chip_purity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub table: u8,
    pub symbol: String,
    pub description: String,
    /// `input` or `derived`.
    pub kind: String,
    pub value: f64,
    pub sigma: f64,
    pub unit: String,
}

/// Two-table summary: the characterized device and the best device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

impl BudgetReport {
    fn push(&mut self, table: u8, symbol: &str, description: &str, kind: &str, q: &Quantity) {
        self.rows.push(ReportRow {
            table,
            symbol: symbol.into(),
            description: description.into(),
            kind: kind.into(),
            value: q.value,
            sigma: q.sigma,
            unit: q.unit.clone(),
        });
    }

    pub fn get(&self, table: u8, symbol: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.table == table && r.symbol == symbol)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "table,symbol,description,kind,value,sigma,unit")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{:.9e},{:.9e},{}",
                r.table, r.symbol, r.description, r.kind, r.value, r.sigma, r.unit
            )?;
        }
        for n in &self.notes {
            writeln!(out, "# note: {n}")?;
        }
        Ok(())
    }

    pub fn write_text(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (table, title) in [(1u8, "Characterized device"), (2, "Best device, extrapolated to saturation")] {
            writeln!(out, "Table {table}: {title}")?;
            for r in self.rows.iter().filter(|r| r.table == table) {
                writeln!(
                    out,
                    "  {:<12} {:<34} {:<8} {:>12.4e} +- {:<10.3e} {}",
                    r.symbol, r.description, r.kind, r.value, r.sigma, r.unit
                )?;
            }
            writeln!(out)?;
        }
        for n in &self.notes {
            writeln!(out, "warning: {n}")?;
        }
        Ok(())
    }
}

/// Reproduces both budget tables from the two device profiles.
pub fn budget_report(device: &EfficiencyBudget, best: &EfficiencyBudget) -> Result<BudgetReport> {
    device.validate().map_err(|e| e.context("device profile"))?;
    best.validate().map_err(|e| e.context("best-device profile"))?;
    let mut r = BudgetReport { rows: Vec::new(), notes: Vec::new() };
    let d = device;
    for (sym, desc, q) in [
        ("g2_zero", "coincidence dip at the coupler", &d.g2_zero),
        ("S_c", "detected signal", &d.s_c),
        ("B", "background", &d.b),
        ("tau", "excited-state lifetime", &d.tau),
        ("QY", "quantum yield", &d.qy),
        ("s", "saturation parameter", &d.s),
        ("eta_c", "coupler efficiency", &d.eta_c),
        ("eta_opt", "optics transmission", &d.eta_opt),
        ("eta_det", "detector efficiency", &d.eta_det),
        ("eta_f", "free-space collection efficiency", &d.eta_f),
    ] {
        r.push(1, sym, desc, "input", q);
    }
    let (s, b) = (d.s_c.value, d.b.value);
    let p = linearized((s - b) / s, &[(b / (s * s), d.s_c.sigma), (-1.0 / s, d.b.sigma)], "");
    r.push(1, "p", "guided fraction of detected clicks", "derived", &p);
    let g_on = on_chip_purity(&d.g2_zero, &d.s_c, &d.b).map_err(|e| e.context("on-chip purity"))?;
    r.push(1, "g2_on", "on-chip purity", "derived", &g_on);
    let beta_est = beta_from_count_rate(d).map_err(|e| e.context("beta from count rate"))?;
    r.push(1, "beta_est", "coupling from count rate", "derived", &beta_est);
    let beta_meas = d.beta().map_err(|e| e.context("beta from images"))?;
    r.push(1, "beta_meas", "coupling from camera images", "derived", &beta_meas);
    if let Some(reference) = &d.g2_on_reference {
        if (reference.value - g_on.value).abs() > 0.01 {
            r.notes.push(format!(
                "on-chip purity from g2(0) = {:.2} and p = {:.4} is {:.4}; the reference value {:.2} +- {:.2} for this device \
                 is not reproduced by direct substitution of these inputs",
                d.g2_zero.value, p.value, g_on.value, reference.value, reference.sigma
            ));
        }
    }
    let beta_best = best.beta().map_err(|e| e.context("best-device beta"))?;
    r.push(2, "eta_c", "coupler efficiency", "input", &best.eta_c);
    r.push(2, "beta_meas", "coupling efficiency", "input", &beta_best);
    let s_on = saturation_on_chip_rate(&best.tau, &best.qy, &beta_best)?;
    r.push(2, "S_on_sat", "guided photon flux at saturation", "derived", &s_on);
    let br = off_chip_brightness(&best.qy, &beta_best, &best.eta_c)?;
    r.push(2, "BR_off_sat", "off-chip brightness at saturation", "derived", &br);
    for n in &r.notes {
        log::warn!("{n}");
    }
    Ok(r)
}
