//! Dipole radiation in planar multilayers.
//!
//! Layers are ordered top to bottom: `layers[0]` is the upper half-space
//! (the collection side), the last entry is the lower half-space. Depths
//! inside a layer are measured downward from its upper interface. Dipole
//! orientations use `z` along the stack normal, pointing toward layer 0.

mod emission;
mod fresnel;
mod transfer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use emission::{
    collection_efficiency, power_budget, radiation_pattern, relative_decay_rate, Hemisphere, PowerBudget,
    RadiationConfig, RadiationPattern,
};
pub use fresnel::{flux_factor, fresnel_interface, FresnelCoefficients};
pub use transfer::{stack_reflection, Side, SubStack};

/// Field polarization with respect to the plane of incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    /// Electric field normal to the plane of incidence.
    Te,
    /// Magnetic field normal to the plane of incidence. Amplitudes refer to `H`.
    Tm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub refractive_index: f64,
    /// Nanometers; `None` for the two bounding half-spaces.
    pub thickness: Option<f64>,
}

impl Layer {
    pub fn half_space(refractive_index: f64) -> Self {
        Layer { refractive_index, thickness: None }
    }

    pub fn film(refractive_index: f64, thickness: f64) -> Self {
        Layer { refractive_index, thickness: Some(thickness) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Layer>", into = "Vec<Layer>")]
pub struct LayerStack {
    layers: Vec<Layer>,
}

impl TryFrom<Vec<Layer>> for LayerStack {
    type Error = Error;
    fn try_from(layers: Vec<Layer>) -> Result<Self> {
        LayerStack::new(layers)
    }
}

impl From<LayerStack> for Vec<Layer> {
    fn from(s: LayerStack) -> Self {
        s.layers
    }
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Structure("a stack needs at least two layers".into()));
        }
        let last = layers.len() - 1;
        for (i, l) in layers.iter().enumerate() {
            if !(l.refractive_index >= 1.0) || !l.refractive_index.is_finite() {
                return Err(Error::Structure(format!(
                    "layer {i}: refractive index {} must be finite and >= 1",
                    l.refractive_index
                )));
            }
            match (i == 0 || i == last, l.thickness) {
                (true, Some(_)) => {
                    return Err(Error::Structure(format!("layer {i}: bounding layers are semi-infinite")))
                }
                (false, None) => return Err(Error::Structure(format!("layer {i}: interior layer needs a thickness"))),
                (false, Some(t)) if !(t > 0.0) || !t.is_finite() => {
                    return Err(Error::Structure(format!("layer {i}: thickness {t} must be > 0")))
                }
                _ => {}
            }
        }
        Ok(LayerStack { layers })
    }

    /// Top half-space, interior `(index, thickness)` films, bottom half-space.
    pub fn from_parts(top: f64, films: &[(f64, f64)], bottom: f64) -> Result<Self> {
        let mut layers = vec![Layer::half_space(top)];
        layers.extend(films.iter().map(|&(n, d)| Layer::film(n, d)));
        layers.push(Layer::half_space(bottom));
        LayerStack::new(layers)
    }

    /// Homogeneous medium with a nominal interior layer to host a source.
    pub fn uniform(n: f64, host_thickness: f64) -> Result<Self> {
        LayerStack::from_parts(n, &[(n, host_thickness)], n)
    }

    /// Air / organic crystal of thickness `h` / silicon nitride film / glass.
    pub fn chip(h: f64) -> Result<Self> {
        LayerStack::from_parts(
            crate::AIR_INDEX,
            &[(crate::ANTHRACENE_INDEX, h), (crate::NITRIDE_INDEX, crate::NITRIDE_THICKNESS_NM)],
            crate::GLASS_INDEX,
        )
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn index(&self, i: usize) -> f64 {
        self.layers[i].refractive_index
    }

    pub fn thickness(&self, i: usize) -> Option<f64> {
        self.layers[i].thickness
    }

    pub fn max_index(&self) -> f64 {
        self.layers.iter().map(|l| l.refractive_index).fold(1.0, f64::max)
    }

    pub fn is_interior(&self, i: usize) -> bool {
        i > 0 && i + 1 < self.layers.len()
    }

    /// Same stack seen upside down.
    pub fn flipped(&self) -> Self {
        let mut layers = self.layers.clone();
        layers.reverse();
        LayerStack { layers }
    }

    /// Every thickness multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer { refractive_index: l.refractive_index, thickness: l.thickness.map(|t| t * factor) })
            .collect();
        LayerStack { layers }
    }
}

/// A point electric dipole inside one layer of a stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSource {
    pub wavelength_vacuum: f64,
    pub layer_index: usize,
    /// Nanometers below the hosting layer's upper interface.
    pub depth_in_layer: f64,
    pub orientation: [f64; 3],
}

impl DipoleSource {
    pub fn new(wavelength_vacuum: f64, layer_index: usize, depth_in_layer: f64, orientation: [f64; 3]) -> Result<Self> {
        let norm = orientation.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::domain("dipole", format!("orientation norm {norm} is not 1")));
        }
        if !(wavelength_vacuum > 0.0) {
            return Err(Error::domain("dipole", "wavelength must be > 0"));
        }
        if !(depth_in_layer >= 0.0) {
            return Err(Error::domain("dipole", "depth must be >= 0"));
        }
        Ok(DipoleSource { wavelength_vacuum, layer_index, depth_in_layer, orientation })
    }

    /// Dipole in the crystal layer (index 1) of [`LayerStack::chip`], sitting
    /// `height` nanometers above the nitride surface of a crystal of thickness `h`.
    pub fn in_crystal(wavelength_vacuum: f64, h: f64, height: f64, orientation: [f64; 3]) -> Result<Self> {
        if !(0.0..=h).contains(&height) {
            return Err(Error::domain("dipole", format!("height {height} nm outside crystal of {h} nm")));
        }
        DipoleSource::new(wavelength_vacuum, 1, h - height, orientation)
    }

    pub fn validate(&self, stack: &LayerStack) -> Result<()> {
        if !stack.is_interior(self.layer_index) {
            return Err(Error::Structure(format!(
                "source layer {} is not an interior layer of a {}-layer stack",
                self.layer_index,
                stack.len()
            )));
        }
        let t = stack.thickness(self.layer_index).unwrap_or(0.0);
        if self.depth_in_layer > t {
            return Err(Error::domain("dipole", format!("depth {} exceeds layer thickness {t}", self.depth_in_layer)));
        }
        Ok(())
    }

    pub fn horizontal_weight(&self) -> f64 {
        self.orientation[0].powi(2) + self.orientation[1].powi(2)
    }

    pub fn vertical_weight(&self) -> f64 {
        self.orientation[2].powi(2)
    }

    /// Position mirrored for [`LayerStack::flipped`].
    pub fn flipped(&self, stack: &LayerStack) -> Self {
        let t = stack.thickness(self.layer_index).unwrap_or(0.0);
        let [x, y, z] = self.orientation;
        DipoleSource {
            wavelength_vacuum: self.wavelength_vacuum,
            layer_index: stack.len() - 1 - self.layer_index,
            depth_in_layer: t - self.depth_in_layer,
            orientation: [x, y, -z],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DipoleSource {
            wavelength_vacuum: self.wavelength_vacuum * factor,
            depth_in_layer: self.depth_in_layer * factor,
            ..*self
        }
    }
}
