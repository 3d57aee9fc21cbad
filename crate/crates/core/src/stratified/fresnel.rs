use num_complex::Complex64;

use super::Polarization;

/// Amplitude reflection and transmission of a single planar interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelCoefficients {
    pub r: Complex64,
    pub t: Complex64,
}

/// Normal wavevector component `sqrt(n^2 k0^2 - kx^2)` on the decaying branch.
pub(crate) fn normal_wavevector(n: f64, k0: f64, kx: Complex64) -> Complex64 {
    let kz = (Complex64::new(n * n * k0 * k0, 0.0) - kx * kx).sqrt();
    if kz.im < 0.0 || (kz.im == 0.0 && kz.re < 0.0) {
        -kz
    } else {
        kz
    }
}

pub(crate) fn interface(n1: f64, n2: f64, kz1: Complex64, kz2: Complex64, pol: Polarization) -> FresnelCoefficients {
    match pol {
        Polarization::Te => {
            let den = kz1 + kz2;
            FresnelCoefficients { r: (kz1 - kz2) / den, t: 2.0 * kz1 / den }
        }
        Polarization::Tm => {
            let (e1, e2) = (n1 * n1, n2 * n2);
            let den = kz1 * e2 + kz2 * e1;
            FresnelCoefficients { r: (kz1 * e2 - kz2 * e1) / den, t: 2.0 * e2 * kz1 / den }
        }
    }
}

/// Fresnel coefficients for a plane wave in medium `n1` meeting medium `n2`
/// with in-plane wavevector `kx` (1/nm). TM amplitudes refer to the magnetic
/// field. Beyond the critical angle the transmitted wave is evanescent and
/// `|r| = 1`.
pub fn fresnel_interface(n1: f64, n2: f64, kx: f64, wavelength: f64, pol: Polarization) -> FresnelCoefficients {
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    let kx = Complex64::new(kx, 0.0);
    let kz1 = normal_wavevector(n1, k0, kx);
    let kz2 = normal_wavevector(n2, k0, kx);
    interface(n1, n2, kz1, kz2, pol)
}

/// Ratio of transmitted to incident normal power flux per unit `|t|^2`.
pub fn flux_factor(n1: f64, n2: f64, kx: f64, wavelength: f64, pol: Polarization) -> f64 {
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    let kx = Complex64::new(kx, 0.0);
    let kz1 = normal_wavevector(n1, k0, kx);
    let kz2 = normal_wavevector(n2, k0, kx);
    match pol {
        Polarization::Te => kz2.re / kz1.re,
        Polarization::Tm => (kz2.re / (n2 * n2)) / (kz1.re / (n1 * n1)),
    }
}
