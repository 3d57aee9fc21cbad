use num_complex::Complex64;

use super::fresnel::{interface, normal_wavevector};
use super::{LayerStack, Polarization};
use crate::error::{Error, Result};

/// Which part of the stack a reflection looks into, relative to the source layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Toward layer 0.
    Above,
    /// Toward the last layer.
    Below,
}

/// 2x2 matrix mapping (forward, backward) amplitudes across part of a stack.
#[derive(Debug, Clone, Copy)]
struct Transfer([[Complex64; 2]; 2]);

impl Transfer {
    fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Transfer([[o, z], [z, o]])
    }

    fn then(self, o: Transfer) -> Transfer {
        let a = self.0;
        let b = o.0;
        Transfer([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    fn interface(r: Complex64, t: Complex64) -> Transfer {
        let o = Complex64::new(1.0, 0.0);
        Transfer([[o / t, r / t], [r / t, o / t]])
    }

    /// Propagation with the common factor `exp(-i kz d)` removed, leaving
    /// only decaying exponentials in the matrix.
    fn propagation(phase2: Complex64) -> Transfer {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Transfer([[o, z], [z, phase2]])
    }
}

/// Reflection and transmission of the part of a stack on one side of a
/// source layer, referenced to the source layer's bounding interface.
#[derive(Debug, Clone, Copy)]
pub struct SubStack {
    /// Generalized reflection coefficient seen from inside the source layer.
    pub r: Complex64,
    /// Amplitude in the outer half-space per unit amplitude leaving the source layer.
    pub t: Complex64,
}

pub(crate) fn substack(
    stack: &LayerStack,
    source: usize,
    side: Side,
    k0: f64,
    kx: Complex64,
    pol: Polarization,
) -> SubStack {
    let path: Vec<usize> = match side {
        Side::Above => (0..source).rev().collect(),
        Side::Below => (source + 1..stack.len()).collect(),
    };
    let mut m = Transfer::identity();
    let mut carried = Complex64::new(1.0, 0.0);
    let mut prev = source;
    let mut kz_prev = normal_wavevector(stack.index(prev), k0, kx);
    for &layer in &path {
        let kz = normal_wavevector(stack.index(layer), k0, kx);
        let c = interface(stack.index(prev), stack.index(layer), kz_prev, kz, pol);
        m = m.then(Transfer::interface(c.r, c.t));
        if let Some(d) = stack.thickness(layer) {
            let half = (Complex64::i() * kz * d).exp();
            carried *= half;
            m = m.then(Transfer::propagation(half * half));
        }
        prev = layer;
        kz_prev = kz;
    }
    let m = m.0;
    SubStack { r: m[1][0] / m[0][0], t: carried / m[0][0] }
}

/// Generalized reflection coefficient of the stack as seen from inside
/// `source_layer`, looking toward `side`, composed from interface and
/// propagation transfer matrices.
pub fn stack_reflection(
    stack: &LayerStack,
    source_layer: usize,
    side: Side,
    kx: f64,
    wavelength: f64,
    pol: Polarization,
) -> Result<Complex64> {
    let ok = match side {
        Side::Above => source_layer > 0 && source_layer < stack.len(),
        Side::Below => source_layer + 1 < stack.len(),
    };
    if !ok {
        return Err(Error::Structure(format!(
            "no interfaces {} layer {source_layer} of a {}-layer stack",
            if side == Side::Above { "above" } else { "below" },
            stack.len()
        )));
    }
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    Ok(substack(stack, source_layer, side, k0, Complex64::new(kx, 0.0), pol).r)
}
