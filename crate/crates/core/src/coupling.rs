//! Emitter-waveguide coupling efficiency.
//!
//! The guided channel comes from the waveguide mode (both propagation
//! directions); the free-space channel from the unpatterned planar stack;
//! non-radiative decay from the quantum yield. Rates are relative to the
//! same dipole in vacuum.
//!
//! Stack coordinates `(x, y, z)` with `z` normal map to cross-section
//! coordinates as `x -> x` (lateral), `z -> y` (vertical), `y -> z`
//! (propagation).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modesolver::{solve_modes_with, ModeField, RidgeGeometry, SolverConfig};
use crate::stratified::{relative_decay_rate, DipoleSource, LayerStack, RadiationConfig};
use crate::svg::{Plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    pub gamma_wg_rel: f64,
    pub gamma_free_rel: f64,
    pub gamma_nr_rel: f64,
    pub beta: f64,
    pub total_rate_rel: f64,
}

impl CouplingResult {
    pub fn from_channels(gamma_wg_rel: f64, gamma_free_rel: f64, gamma_nr_rel: f64) -> Result<Self> {
        for (name, v) in [("gamma_wg", gamma_wg_rel), ("gamma_free", gamma_free_rel), ("gamma_nr", gamma_nr_rel)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain("beta_factor", format!("{name} = {v}")));
            }
        }
        let total = gamma_wg_rel + gamma_free_rel + gamma_nr_rel;
        if total <= 0.0 {
            return Err(Error::domain("beta_factor", "all decay channels vanish"));
        }
        Ok(CouplingResult {
            gamma_wg_rel,
            gamma_free_rel,
            gamma_nr_rel,
            beta: gamma_wg_rel / total,
            total_rate_rel: total,
        })
    }
}

/// Stack orientation vector expressed in cross-section axes.
pub fn to_cross_section_axes(o: [f64; 3]) -> [f64; 3] {
    [o[0], o[2], o[1]]
}

/// Height of a dipole above the substrate surface (bottom of the lowest
/// interior layer), i.e. its vertical cross-section coordinate.
pub fn height_above_substrate(stack: &LayerStack, dipole: &DipoleSource) -> f64 {
    let below: f64 = (dipole.layer_index + 1..stack.len()).filter_map(|i| stack.thickness(i)).sum();
    below + stack.thickness(dipole.layer_index).unwrap_or(0.0) - dipole.depth_in_layer
}

/// Guided-mode decay rate over the vacuum rate,
/// `3 n_g lambda^2 / (4 pi A_eff)`, both directions counted.
/// `orientation` is in cross-section axes.
pub fn gamma_wg_relative(mode: &ModeField, position: (f64, f64), orientation: [f64; 3]) -> Result<f64> {
    if !(mode.n_g.is_finite() && mode.n_g > 0.0) {
        return Err(Error::domain("gamma_wg_relative", format!("mode has no valid group index ({})", mode.n_g)));
    }
    let a = mode.effective_area(position.0, position.1, orientation)?;
    Ok(if a.is_infinite() { 0.0 } else { 3.0 * mode.n_g * mode.wavelength.powi(2) / (4.0 * PI * a) })
}

/// `(gamma_free_rel, gamma_nr_rel)`: host bulk rate times the stack
/// correction, and the non-radiative rate implied by the quantum yield.
pub fn gamma_free_relative(
    stack: &LayerStack,
    dipole: &DipoleSource,
    quantum_yield: f64,
    cfg: &RadiationConfig,
) -> Result<(f64, f64)> {
    if !(quantum_yield > 0.0 && quantum_yield <= 1.0) {
        return Err(Error::domain("gamma_free_relative", format!("quantum yield {quantum_yield} outside (0, 1]")));
    }
    dipole.validate(stack)?;
    let n_host = stack.index(dipole.layer_index);
    let free = n_host * relative_decay_rate(stack, dipole, cfg).map_err(|e| e.context("gamma_free_relative"))?;
    Ok((free, n_host * (1.0 / quantum_yield - 1.0)))
}

/// Where and how the emitter sits relative to the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingConfig {
    /// Lateral offset from the ridge axis (nm).
    pub lateral_offset: f64,
    pub radiation: RadiationConfig,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig { lateral_offset: 0.0, radiation: RadiationConfig::default() }
    }
}

pub fn beta_factor(
    mode: &ModeField,
    stack: &LayerStack,
    dipole: &DipoleSource,
    quantum_yield: f64,
    cfg: &CouplingConfig,
) -> Result<CouplingResult> {
    if (mode.wavelength - dipole.wavelength_vacuum).abs() > 1e-9 * mode.wavelength {
        return Err(Error::domain(
            "beta_factor",
            format!("mode at {} nm but dipole at {} nm", mode.wavelength, dipole.wavelength_vacuum),
        ));
    }
    let y = height_above_substrate(stack, dipole);
    let wg = gamma_wg_relative(mode, (cfg.lateral_offset, y), to_cross_section_axes(dipole.orientation))
        .map_err(|e| e.context("beta_factor"))?;
    let (free, nr) = gamma_free_relative(stack, dipole, quantum_yield, &cfg.radiation)?;
    CouplingResult::from_channels(wg, free, nr)
}

/// Planar stack matching a ridge geometry away from the ridge.
pub fn stack_for(g: &RidgeGeometry) -> Result<LayerStack> {
    let mut films = Vec::new();
    if g.crystal_thickness > 0.0 {
        films.push((g.n_crystal, g.crystal_thickness));
    }
    films.push((g.n_core, g.thickness));
    LayerStack::from_parts(g.n_cover, &films, g.n_substrate)
}

/// Guided modes keyed by geometry and wavelength. Readers share the lock;
/// a miss solves outside the lock and inserts once.
#[derive(Default)]
pub struct ModeCache {
    map: RwLock<HashMap<String, Arc<ModeField>>>,
    solver: SolverConfig,
}

impl ModeCache {
    pub fn new(solver: SolverConfig) -> Self {
        ModeCache { map: RwLock::new(HashMap::new()), solver }
    }

    fn key(g: &RidgeGeometry, wavelength: f64) -> String {
        let v = serde_json::to_value(g).unwrap_or_default();
        format!("{v}@{:x}", wavelength.to_bits())
    }

    /// Fundamental guided mode.
    pub fn fundamental(&self, g: &RidgeGeometry, wavelength: f64) -> Result<Arc<ModeField>> {
        let key = Self::key(g, wavelength);
        if let Some(m) = self.map.read().expect("mode cache poisoned").get(&key) {
            return Ok(m.clone());
        }
        let cs = g.cross_section()?;
        let mode = solve_modes_with(&cs, wavelength, 1, &self.solver)?
            .into_iter()
            .next()
            .ok_or(Error::ModeLost { wavelength_nm: wavelength })?;
        let mode = Arc::new(mode);
        let mut w = self.map.write().expect("mode cache poisoned");
        Ok(w.entry(key).or_insert(mode).clone())
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("mode cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shared inputs for a map over emitter height and crystal thickness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapTemplate {
    pub geometry: RidgeGeometry,
    pub wavelength: f64,
    pub quantum_yield: f64,
    /// Stack axes.
    pub orientation: [f64; 3],
    pub coupling: CouplingConfig,
}

impl Default for MapTemplate {
    fn default() -> Self {
        MapTemplate {
            geometry: RidgeGeometry::default(),
            wavelength: crate::EMISSION_WAVELENGTH_NM,
            quantum_yield: 0.95,
            orientation: [1.0, 0.0, 0.0],
            coupling: CouplingConfig::default(),
        }
    }
}

impl MapTemplate {
    /// One cell: emitter `dy` nm above the ridge top in a crystal of thickness `h`.
    pub fn evaluate(&self, cache: &ModeCache, dy: f64, h: f64) -> Result<CouplingResult> {
        if !(dy >= 0.0 && dy <= h) {
            return Err(Error::domain("beta_map", format!("emitter height {dy} nm outside crystal of {h} nm")));
        }
        let g = self.geometry.with_crystal(h);
        let mode = cache.fundamental(&g, self.wavelength)?;
        let stack = stack_for(&g)?;
        let dipole = DipoleSource::in_crystal(self.wavelength, h, dy, self.orientation)?;
        beta_factor(&mode, &stack, &dipole, self.quantum_yield, &self.coupling)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapCell {
    pub h_nm: f64,
    pub dy_nm: f64,
    pub result: std::result::Result<CouplingResult, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaMap {
    /// `h` outer, `dy` inner, both in input order.
    pub cells: Vec<MapCell>,
}

/// Coupling over every `(dy, h)` pair. One mode solve per `h`; cell
/// failures are recorded without stopping the map.
pub fn beta_map(template: &MapTemplate, dy_values: &[f64], h_values: &[f64], cache: &ModeCache) -> Result<BetaMap> {
    if dy_values.is_empty() || h_values.is_empty() {
        return Err(Error::Empty("beta_map value list"));
    }
    // warm the cache in parallel, one solve per thickness
    h_values.par_iter().for_each(|&h| {
        if let Err(e) = cache.fundamental(&template.geometry.with_crystal(h), template.wavelength) {
            log::warn!("mode solve for h = {h} nm failed: {e}");
        }
    });
    let pairs: Vec<(f64, f64)> = h_values.iter().flat_map(|&h| dy_values.iter().map(move |&dy| (h, dy))).collect();
    let cells = pairs
        .par_iter()
        .map(|&(h, dy)| MapCell {
            h_nm: h,
            dy_nm: dy,
            result: template.evaluate(cache, dy, h).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(BetaMap { cells })
}

impl BetaMap {
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "h_nm,dy_nm,beta,gamma_wg_rel,gamma_free_rel,total_rate_rel")?;
        for c in &self.cells {
            match &c.result {
                Ok(r) => writeln!(
                    out,
                    "{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
                    c.h_nm, c.dy_nm, r.beta, r.gamma_wg_rel, r.gamma_free_rel, r.total_rate_rel
                )?,
                Err(_) => writeln!(out, "{},{},NaN,NaN,NaN,NaN", c.h_nm, c.dy_nm)?,
            }
        }
        Ok(())
    }

    /// Scatter of beta against emitter height, one colour per thickness.
    pub fn to_svg(&self) -> String {
        let mut hs: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !hs.contains(&c.h_nm) {
                hs.push(c.h_nm);
            }
        }
        let series = hs
            .iter()
            .map(|&h| Series {
                label: format!("h = {h} nm"),
                points: self
                    .cells
                    .iter()
                    .filter(|c| c.h_nm == h)
                    .filter_map(|c| c.result.as_ref().ok().map(|r| (c.dy_nm, r.beta)))
                    .collect(),
                line: false,
            })
            .collect();
        Plot {
            title: "Coupling into the guided mode".into(),
            x_label: "emitter height above ridge (nm)".into(),
            y_label: "beta".into(),
            series,
        }
        .render()
    }

    pub fn max_beta(&self) -> Option<f64> {
        self.cells.iter().filter_map(|c| c.result.as_ref().ok()).map(|r| r.beta).reduce(f64::max)
    }
}

/// Total decay rate next to the ridge over the rate in the bare stack far
/// from it (no guided channel), for an emitter at `dy_near` and at the
/// crystal surface respectively.
pub fn total_rate_ratio(template: &MapTemplate, cache: &ModeCache, dy_near: f64, h: f64) -> Result<f64> {
    let near = template.evaluate(cache, dy_near, h)?;
    let g = template.geometry.with_crystal(h);
    let stack = stack_for(&g)?;
    let far = DipoleSource::in_crystal(template.wavelength, h, h, template.orientation)?;
    let (free, nr) = gamma_free_relative(&stack, &far, template.quantum_yield, &template.coupling.radiation)?;
    Ok(near.total_rate_rel / (free + nr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_arithmetic() {
        let r = CouplingResult::from_channels(0.0, 1.0, 0.2).unwrap();
        assert_eq!(r.beta, 0.0);
        let r = CouplingResult::from_channels(1.0, 2.0, 1.0).unwrap();
        assert_eq!(r.beta, 0.25);
        assert_eq!(r.total_rate_rel, 4.0);
        assert!(CouplingResult::from_channels(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn free_and_nonradiative_channels() {
        let cfg = RadiationConfig::default();
        let vac = LayerStack::uniform(1.0, 100.0).unwrap();
        let d = DipoleSource::new(785.0, 1, 50.0, [1.0, 0.0, 0.0]).unwrap();
        let (f, nr) = gamma_free_relative(&vac, &d, 1.0, &cfg).unwrap();
        assert!((f - 1.0).abs() < 1e-9);
        assert_eq!(nr, 0.0);
        let host = LayerStack::uniform(1.8, 100.0).unwrap();
        let (f, nr) = gamma_free_relative(&host, &d, 0.95, &cfg).unwrap();
        assert!((f - 1.8).abs() < 1e-9);
        assert!((nr - 1.8 * (1.0 / 0.95 - 1.0)).abs() < 1e-15);
        assert!((nr - 0.0947).abs() < 1e-4);
        assert!(gamma_free_relative(&host, &d, 0.0, &cfg).is_err());
    }

    #[test]
    fn geometry_bookkeeping() {
        let g = RidgeGeometry::default().with_crystal(120.0);
        let s = stack_for(&g).unwrap();
        assert_eq!(s, LayerStack::chip(120.0).unwrap());
        let d = DipoleSource::in_crystal(785.0, 120.0, 30.0, [1.0, 0.0, 0.0]).unwrap();
        assert!((height_above_substrate(&s, &d) - 205.0).abs() < 1e-12);
        assert_eq!(to_cross_section_axes([0.1, 0.2, 0.3]), [0.1, 0.3, 0.2]);
    }
}
