use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value with a 1-sigma uncertainty and a unit label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub sigma: f64,
    #[serde(default)]
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, sigma: f64, unit: impl Into<String>) -> Result<Self> {
        if !(sigma >= 0.0) || !value.is_finite() || !sigma.is_finite() {
            return Err(Error::domain("quantity", format!("{value} +- {sigma}")));
        }
        Ok(Quantity { value, sigma, unit: unit.into() })
    }

    pub fn exact(value: f64, unit: impl Into<String>) -> Self {
        Quantity { value, sigma: 0.0, unit: unit.into() }
    }

    /// Dimensionless value with a relative uncertainty.
    pub fn relative(value: f64, rel: f64) -> Self {
        Quantity { value, sigma: (value * rel).abs(), unit: String::new() }
    }

    pub fn rel_sigma(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.sigma / self.value.abs()
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = f.precision().unwrap_or(4);
        write!(f, "{:.*} +- {:.*}", p, self.value, p, self.sigma)?;
        if !self.unit.is_empty() {
            write!(f, " {}", self.unit)?;
        }
        Ok(())
    }
}

/// First-order propagation: `terms` holds `(partial derivative, input sigma)`.
pub(crate) fn linearized(value: f64, terms: &[(f64, f64)], unit: &str) -> Quantity {
    let var: f64 = terms.iter().filter(|t| t.1 > 0.0).map(|(d, s)| (d * s).powi(2)).sum();
    Quantity { value, sigma: var.sqrt(), unit: unit.to_string() }
}
