//! Plane-wave expansion of a point dipole in a planar multilayer.
//!
//! All powers are normalized to the dipole's rate in the unbounded host
//! medium. The in-plane wavevector is expressed as `s = k_parallel / k_host`.
//! The decay-rate integral runs on a contour dipping into the fourth quadrant
//! of the complex `s` plane, which passes below the guided-mode poles and
//! branch points that sit on the real axis for lossless layers. The
//! contribution of the part of that contour lying beyond both outer light
//! lines is the power bound in guided and trapped modes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fresnel::normal_wavevector;
use super::transfer::{substack, Side};
use super::{DipoleSource, LayerStack, Polarization};
use crate::error::{Error, Result};
use crate::quad::{adaptive, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Up,
    Down,
}

impl Hemisphere {
    pub fn label(self) -> &'static str {
        match self {
            Hemisphere::Up => "up",
            Hemisphere::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadiationConfig {
    pub angular_step_deg: f64,
    /// Relative margin past the highest light line where the contour rejoins the real axis.
    pub light_line_margin: f64,
    /// Real-axis truncation of the decay-rate integral, in units of `k0 * n_max`.
    pub tail_factor: f64,
    /// Depth of the contour below the real axis, relative to its length.
    pub path_depth: f64,
    pub rel_tol: f64,
}

impl Default for RadiationConfig {
    fn default() -> Self {
        RadiationConfig {
            angular_step_deg: 1.0,
            light_line_margin: 0.1,
            tail_factor: 5.0,
            path_depth: 0.15,
            rel_tol: 1e-9,
        }
    }
}

impl RadiationConfig {
    fn tol(&self) -> Tolerance {
        Tolerance { rel: self.rel_tol, abs: 1e-14 }
    }
}

/// Far-field power per unit solid angle on a (theta, phi) grid in one of
/// the bounding half-spaces; theta is measured from the outward normal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiationPattern {
    pub hemisphere: Hemisphere,
    pub theta_deg: Vec<f64>,
    pub phi_deg: Vec<f64>,
    /// Row-major, one row per theta.
    pub power_per_sr: Vec<f64>,
}

impl RadiationPattern {
    pub fn at(&self, theta_idx: usize, phi_idx: usize) -> f64 {
        self.power_per_sr[theta_idx * self.phi_deg.len() + phi_idx]
    }

    /// Grid estimate of the hemispherical power: trapezoid in theta,
    /// periodic rectangle rule in phi.
    pub fn total_power(&self) -> f64 {
        let nphi = self.phi_deg.len();
        let dphi = 2.0 * PI / nphi as f64;
        let ring: Vec<f64> = (0..self.theta_deg.len())
            .map(|i| {
                let s: f64 = self.power_per_sr[i * nphi..(i + 1) * nphi].iter().sum();
                s * dphi * self.theta_deg[i].to_radians().sin()
            })
            .collect();
        ring.windows(2)
            .zip(self.theta_deg.windows(2))
            .map(|(v, t)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]).to_radians())
            .sum()
    }

    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        for (i, t) in self.theta_deg.iter().enumerate() {
            for (k, p) in self.phi_deg.iter().enumerate() {
                writeln!(out, "{},{},{},{:e}", self.hemisphere.label(), t, p, self.at(i, k))?;
            }
        }
        Ok(())
    }
}

/// Where the emitted power goes, relative to the unbounded host rate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerBudget {
    pub up: f64,
    pub down: f64,
    /// Power in guided or otherwise trapped waves that never reach either half-space.
    pub trapped: f64,
    pub total: f64,
}

struct Engine<'a> {
    stack: &'a LayerStack,
    k0: f64,
    host: usize,
    n_host: f64,
    above: f64,
    below: f64,
}

/// Far-field amplitudes in one outer medium at one polar angle.
struct Outgoing {
    prefactor: f64,
    te: Complex64,
    /// TM coefficient of the in-plane dipole component along the azimuth.
    tm_h: Complex64,
    /// TM coefficient of the normal dipole component.
    tm_v: Complex64,
    flux_te: f64,
    flux_tm: f64,
}

impl Outgoing {
    fn azimuthal_integral(&self, horizontal: f64, vertical: f64) -> f64 {
        self.prefactor
            * (PI * horizontal * (self.te.norm_sqr() * self.flux_te + self.tm_h.norm_sqr() * self.flux_tm)
                + 2.0 * PI * vertical * self.tm_v.norm_sqr() * self.flux_tm)
    }
}

struct Mirrors {
    ra: Complex64,
    rb: Complex64,
    ta: Complex64,
    tb: Complex64,
    ea: Complex64,
    eb: Complex64,
}

impl Mirrors {
    fn denominator(&self) -> Complex64 {
        1.0 - self.ra * self.rb
    }
}

impl<'a> Engine<'a> {
    fn new(stack: &'a LayerStack, dipole: &DipoleSource) -> Result<Self> {
        dipole.validate(stack)?;
        let host = dipole.layer_index;
        let d = stack.thickness(host).unwrap_or(0.0);
        Ok(Engine {
            stack,
            k0: 2.0 * PI / dipole.wavelength_vacuum,
            host,
            n_host: stack.index(host),
            above: dipole.depth_in_layer,
            below: d - dipole.depth_in_layer,
        })
    }

    fn k_host(&self) -> f64 {
        self.k0 * self.n_host
    }

    fn mirrors(&self, s: Complex64, pol: Polarization) -> (Mirrors, Complex64) {
        let kx = s * self.k_host();
        let kz = normal_wavevector(self.n_host, self.k0, kx);
        let up = substack(self.stack, self.host, Side::Above, self.k0, kx, pol);
        let dn = substack(self.stack, self.host, Side::Below, self.k0, kx, pol);
        let ea = (Complex64::i() * kz * self.above).exp();
        let eb = (Complex64::i() * kz * self.below).exp();
        let m = Mirrors { ra: up.r * ea * ea, rb: dn.r * eb * eb, ta: up.t, tb: dn.t, ea, eb };
        (m, kz / self.k_host())
    }

    /// Reflected-field integrands `(horizontal, vertical)` per unit `s`.
    fn rate_integrand(&self, s: Complex64) -> (Complex64, Complex64) {
        let (te, sz) = self.mirrors(s, Polarization::Te);
        let (tm, _) = self.mirrors(s, Polarization::Tm);
        let even_te = (te.ra + te.rb + 2.0 * te.ra * te.rb) / te.denominator();
        let even_tm = (tm.ra + tm.rb + 2.0 * tm.ra * tm.rb) / tm.denominator();
        let odd_tm = -(tm.ra + tm.rb - 2.0 * tm.ra * tm.rb) / tm.denominator();
        let horizontal = 0.75 * s / sz * even_te + 0.75 * s * sz * odd_tm;
        let vertical = 1.5 * s * s * s / sz * even_tm;
        (horizontal, vertical)
    }

    fn outer_index(&self, hemisphere: Hemisphere) -> f64 {
        match hemisphere {
            Hemisphere::Up => self.stack.index(0),
            Hemisphere::Down => self.stack.index(self.stack.len() - 1),
        }
    }

    fn outgoing(&self, hemisphere: Hemisphere, theta: f64) -> Outgoing {
        let n_out = self.outer_index(hemisphere);
        let ratio = n_out / self.n_host;
        let s = Complex64::new(ratio * theta.sin(), 0.0);
        let cos = theta.cos();
        let (te, sz) = self.mirrors(s, Polarization::Te);
        let (tm, _) = self.mirrors(s, Polarization::Tm);
        let (te_amp, tm_h, tm_v) = match hemisphere {
            Hemisphere::Up => (
                (1.0 + te.rb) / te.denominator() * te.ea * te.ta,
                sz * (1.0 - tm.rb) / tm.denominator() * tm.ea * tm.ta,
                -s * (1.0 + tm.rb) / tm.denominator() * tm.ea * tm.ta,
            ),
            Hemisphere::Down => (
                (1.0 + te.ra) / te.denominator() * te.eb * te.tb,
                -sz * (1.0 - tm.ra) / tm.denominator() * tm.eb * tm.tb,
                -s * (1.0 + tm.ra) / tm.denominator() * tm.eb * tm.tb,
            ),
        };
        Outgoing {
            prefactor: 3.0 / (8.0 * PI) * ratio * ratio * cos / sz.norm_sqr(),
            te: te_amp,
            tm_h,
            tm_v,
            flux_te: ratio * cos,
            flux_tm: cos / ratio,
        }
    }

    fn light_lines(&self) -> Vec<f64> {
        self.stack.layers().iter().map(|l| l.refractive_index / self.n_host).collect()
    }

    fn contour_end(&self, cfg: &RadiationConfig) -> f64 {
        self.stack.max_index() / self.n_host * (1.0 + cfg.light_line_margin)
    }

    fn outer_light_line(&self) -> f64 {
        self.outer_index(Hemisphere::Up).max(self.outer_index(Hemisphere::Down)) / self.n_host
    }

    /// `Re` of the reflected-field integral along a contour from `a` to `b`
    /// bowing below the real axis, as `[horizontal, vertical]`.
    fn contour(&self, a: f64, b: f64, cfg: &RadiationConfig) -> Result<[f64; 2]> {
        if b <= a {
            return Ok([0.0; 2]);
        }
        let len = b - a;
        let depth = cfg.path_depth * len;
        let breaks = self.light_lines();
        adaptive(a, b, &breaks, cfg.tol(), |t| {
            let u = PI * (t - a) / len;
            let s = Complex64::new(t, -depth * u.sin());
            let ds = Complex64::new(1.0, -depth * PI / len * u.cos());
            let (h, v) = self.rate_integrand(s);
            [(h * ds).re, (v * ds).re]
        })
    }

    fn real_tail(&self, a: f64, b: f64, cfg: &RadiationConfig) -> Result<[f64; 2]> {
        if b <= a {
            return Ok([0.0; 2]);
        }
        adaptive(a, b, &[], cfg.tol(), |t| {
            let (h, v) = self.rate_integrand(Complex64::new(t, 0.0));
            [h.re, v.re]
        })
    }

    /// Relative rates `[horizontal, vertical]`.
    fn rates(&self, cfg: &RadiationConfig) -> Result<[f64; 2]> {
        let end = self.contour_end(cfg);
        let tail_end = cfg.tail_factor * self.stack.max_index() / self.n_host;
        let c = self.contour(0.0, end, cfg)?;
        let t = self.real_tail(end, tail_end, cfg)?;
        Ok([1.0 + c[0] + t[0], 1.0 + c[1] + t[1]])
    }

    fn trapped(&self, cfg: &RadiationConfig) -> Result<[f64; 2]> {
        let end = self.contour_end(cfg);
        let tail_end = cfg.tail_factor * self.stack.max_index() / self.n_host;
        let a = self.outer_light_line();
        let c = self.contour(a, end, cfg)?;
        let t = self.real_tail(end, tail_end, cfg)?;
        let direct = direct_beyond(a);
        Ok([direct[0] + c[0] + t[0], direct[1] + c[1] + t[1]])
    }

    fn angular_breaks(&self, hemisphere: Hemisphere) -> Vec<f64> {
        let n_out = self.outer_index(hemisphere);
        self.stack
            .layers()
            .iter()
            .filter(|l| l.refractive_index < n_out)
            .map(|l| (l.refractive_index / n_out).asin())
            .collect()
    }

    /// Hemispherical power inside the cone `theta <= theta_max`, as `[horizontal, vertical]`.
    fn cone_power(&self, hemisphere: Hemisphere, theta_max: f64, cfg: &RadiationConfig) -> Result<[f64; 2]> {
        let breaks = self.angular_breaks(hemisphere);
        adaptive(0.0, theta_max, &breaks, cfg.tol(), |theta| {
            let o = self.outgoing(hemisphere, theta);
            [theta.sin() * o.azimuthal_integral(1.0, 0.0), theta.sin() * o.azimuthal_integral(0.0, 1.0)]
        })
    }
}

/// Direct (unreflected) host-wave power with `a < s < 1`, as
/// `[horizontal, vertical]`. Nonzero only when the host is denser than both
/// outer media, so that these waves are totally reflected.
fn direct_beyond(a: f64) -> [f64; 2] {
    let c = (1.0 - a.min(1.0).powi(2)).sqrt();
    [0.75 * (c + c.powi(3) / 3.0), 1.5 * (c - c.powi(3) / 3.0)]
}

fn weigh(dipole: &DipoleSource, v: [f64; 2]) -> f64 {
    dipole.horizontal_weight() * v[0] + dipole.vertical_weight() * v[1]
}

/// Decay rate in the stack relative to the same dipole in the unbounded host,
/// including evanescent and guided contributions.
pub fn relative_decay_rate(stack: &LayerStack, dipole: &DipoleSource, cfg: &RadiationConfig) -> Result<f64> {
    let e = Engine::new(stack, dipole)?;
    Ok(weigh(dipole, e.rates(cfg)?))
}

/// Splits the total rate into up, down and trapped channels. The three
/// channels are computed independently of the total: the far-field ones from
/// transmitted amplitudes and the trapped one from the contour segment beyond
/// both outer light lines.
pub fn power_budget(stack: &LayerStack, dipole: &DipoleSource, cfg: &RadiationConfig) -> Result<PowerBudget> {
    let e = Engine::new(stack, dipole)?;
    let up = weigh(dipole, e.cone_power(Hemisphere::Up, PI / 2.0, cfg)?);
    let down = weigh(dipole, e.cone_power(Hemisphere::Down, PI / 2.0, cfg)?);
    let trapped = weigh(dipole, e.trapped(cfg)?);
    let total = weigh(dipole, e.rates(cfg)?);
    Ok(PowerBudget { up, down, trapped, total })
}

/// Far-field patterns in the upper and lower half-spaces.
pub fn radiation_pattern(
    stack: &LayerStack,
    dipole: &DipoleSource,
    cfg: &RadiationConfig,
) -> Result<(RadiationPattern, RadiationPattern)> {
    let e = Engine::new(stack, dipole)?;
    let step = cfg.angular_step_deg;
    if !(step > 0.0 && step <= 90.0) {
        return Err(Error::domain("radiation_pattern", format!("angular step {step} deg")));
    }
    let n_theta = (90.0 / step).round() as usize;
    let n_phi = (360.0 / step).round() as usize;
    let theta_deg: Vec<f64> = (0..=n_theta).map(|i| 90.0 * i as f64 / n_theta as f64).collect();
    let phi_deg: Vec<f64> = (0..n_phi).map(|k| 360.0 * k as f64 / n_phi as f64).collect();
    let [px, py, pz] = dipole.orientation;
    let build = |hemisphere: Hemisphere| {
        let mut power = Vec::with_capacity(theta_deg.len() * phi_deg.len());
        for &t in &theta_deg {
            // the grazing ray is taken as a limit
            let theta = t.to_radians().min(PI / 2.0 - 1e-5);
            let o = e.outgoing(hemisphere, theta);
            for &p in &phi_deg {
                let (sp, cp) = p.to_radians().sin_cos();
                let p_te = -px * sp + py * cp;
                let p_rho = px * cp + py * sp;
                let te = o.te * p_te;
                let tm = o.tm_h * p_rho + o.tm_v * pz;
                power.push(o.prefactor * (te.norm_sqr() * o.flux_te + tm.norm_sqr() * o.flux_tm));
            }
        }
        RadiationPattern { hemisphere, theta_deg: theta_deg.clone(), phi_deg: phi_deg.clone(), power_per_sr: power }
    };
    Ok((build(Hemisphere::Up), build(Hemisphere::Down)))
}

/// Fraction of all emitted power (including non-radiating channels) that
/// leaves through the upper half-space inside the acceptance cone of an
/// objective with the given numerical aperture.
pub fn collection_efficiency(
    stack: &LayerStack,
    dipole: &DipoleSource,
    numerical_aperture: f64,
    cfg: &RadiationConfig,
) -> Result<f64> {
    let n_top = stack.index(0);
    if !(numerical_aperture > 0.0 && numerical_aperture <= n_top) {
        return Err(Error::domain(
            "collection_efficiency",
            format!("numerical aperture {numerical_aperture} outside (0, {n_top}]"),
        ));
    }
    let e = Engine::new(stack, dipole)?;
    let cone = (numerical_aperture / n_top).min(1.0).asin();
    let collected = weigh(dipole, e.cone_power(Hemisphere::Up, cone, cfg)?);
    let total = weigh(dipole, e.rates(cfg)?);
    Ok((collected / total).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const WL: f64 = 785.0;

    fn cfg() -> RadiationConfig {
        RadiationConfig::default()
    }

    #[test]
    fn homogeneous_rate_is_one() {
        let s = LayerStack::uniform(1.8, 200.0).unwrap();
        for o in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]] {
            let d = DipoleSource::new(WL, 1, 70.0, o).unwrap();
            let r = relative_decay_rate(&s, &d, &cfg()).unwrap();
            assert!((r - 1.0).abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn homogeneous_pattern_is_sin_squared() {
        let s = LayerStack::uniform(1.0, 100.0).unwrap();
        let d = DipoleSource::new(WL, 1, 50.0, [1.0, 0.0, 0.0]).unwrap();
        let (up, down) = radiation_pattern(&s, &d, &RadiationConfig { angular_step_deg: 5.0, ..cfg() }).unwrap();
        for pat in [&up, &down] {
            for (i, t) in pat.theta_deg.iter().enumerate() {
                for (k, p) in pat.phi_deg.iter().enumerate() {
                    let cos_axis = t.to_radians().sin() * p.to_radians().cos();
                    let expect = 3.0 / (8.0 * PI) * (1.0 - cos_axis * cos_axis);
                    assert!((pat.at(i, k) - expect).abs() < 1e-6, "{t} {p}");
                }
            }
        }
        assert!((up.total_power() + down.total_power() - 1.0).abs() < 2e-3);
    }

    #[test]
    fn collection_limits_in_vacuum() {
        let s = LayerStack::uniform(1.0, 100.0).unwrap();
        for o in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]] {
            let d = DipoleSource::new(WL, 1, 50.0, o).unwrap();
            let full = collection_efficiency(&s, &d, 1.0, &cfg()).unwrap();
            assert!((full - 0.5).abs() < 1e-9);
            let tiny = collection_efficiency(&s, &d, 1e-4, &cfg()).unwrap();
            assert!(tiny < 1e-7);
        }
        let d = DipoleSource::new(WL, 1, 50.0, [1.0, 0.0, 0.0]).unwrap();
        assert!(collection_efficiency(&s, &d, 1.2, &cfg()).is_err());
        assert!(collection_efficiency(&s, &d, 0.0, &cfg()).is_err());
    }

    #[test]
    fn horizontal_and_vertical_rates_differ() {
        let s = LayerStack::chip(100.0).unwrap();
        let h = DipoleSource::in_crystal(WL, 100.0, 30.0, [1.0, 0.0, 0.0]).unwrap();
        let v = DipoleSource::in_crystal(WL, 100.0, 30.0, [0.0, 0.0, 1.0]).unwrap();
        let rh = relative_decay_rate(&s, &h, &cfg()).unwrap();
        let rv = relative_decay_rate(&s, &v, &cfg()).unwrap();
        assert!((rh - rv).abs() > 1e-3, "{rh} {rv}");
    }

    #[test]
    fn near_mirror_asymmetry_and_bookkeeping() {
        // dipole in an air gap 100 nm above a high-index quarter-wave mirror
        let mut films = vec![(1.0, 100.0)];
        for _ in 0..6 {
            films.push((3.5, WL / (4.0 * 3.5)));
            films.push((1.45, WL / (4.0 * 1.45)));
        }
        let s = LayerStack::from_parts(1.0, &films, 1.45).unwrap();
        let d = DipoleSource::new(WL, 1, 0.0, [1.0, 0.0, 0.0]).unwrap();
        let b = power_budget(&s, &d, &cfg()).unwrap();
        assert!(b.up > 5.0 * b.down, "{b:?}");
        let sum = b.up + b.down + b.trapped;
        assert!(((sum - b.total) / b.total).abs() < 1e-3, "{b:?}");
    }

    /// Direct evaluation of the one-interface decay-rate integral with its own
    /// parametrization: `s = sin(a)` on the propagating part and
    /// `s = cosh(u)` on the evanescent part, both by composite Simpson.
    fn single_interface_rate(n1: f64, n2: f64, z0: f64, vertical: bool) -> f64 {
        let k1 = 2.0 * PI * n1 / WL;
        let integrand = |s: Complex64, sz: Complex64| {
            let e1 = n1 * n1;
            let e2 = n2 * n2;
            let kz2 = (Complex64::new((n2 / n1).powi(2), 0.0) - s * s).sqrt();
            let kz2 = if kz2.im < 0.0 { -kz2 } else { kz2 };
            let rs = (sz - kz2) / (sz + kz2);
            let rp = (sz * e2 - kz2 * e1) / (sz * e2 + kz2 * e1);
            let ph = (Complex64::i() * 2.0 * k1 * sz * z0).exp();
            if vertical {
                1.5 * s * s * rp * ph
            } else {
                0.75 * (rs - sz * sz * rp) * ph
            }
        };
        let simpson = |a: f64, b: f64, n: usize, f: &dyn Fn(f64) -> f64| {
            let h = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for i in 1..n {
                acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        // s ds / sz = sin(a) da on the propagating part
        let prop = simpson(0.0, PI / 2.0, 20000, &|a: f64| {
            let s = Complex64::new(a.sin(), 0.0);
            let sz = Complex64::new(a.cos(), 0.0);
            (integrand(s, sz) * a.sin()).re
        });
        // s ds / sz = -i cosh(u) du on the evanescent part
        let umax = (60.0 / (2.0 * k1 * z0)).asinh().max(4.0);
        let evan = simpson(0.0, umax, 40000, &|u: f64| {
            let s = Complex64::new(u.cosh(), 0.0);
            let sz = Complex64::new(0.0, u.sinh());
            (integrand(s, sz) * Complex64::new(0.0, -u.cosh())).re
        });
        1.0 + prop + evan
    }

    #[test]
    fn drexhage_oscillation_matches_direct_integral() {
        let (n1, n2) = (1.0, 1.51);
        let mut deviations = Vec::new();
        for z0 in [600.0, 1200.0, 2400.0, 4800.0] {
            let s = LayerStack::from_parts(n1, &[(n1, z0 + 50.0)], n2).unwrap();
            for (o, vertical) in [([1.0, 0.0, 0.0], false), ([0.0, 0.0, 1.0], true)] {
                let d = DipoleSource::new(WL, 1, 50.0, o).unwrap();
                let r = relative_decay_rate(&s, &d, &cfg()).unwrap();
                let oracle = single_interface_rate(n1, n2, z0, vertical);
                assert!((r - oracle).abs() < 1e-6, "z0 {z0} vertical {vertical}: {r} vs {oracle}");
                if !vertical {
                    deviations.push((r - 1.0).abs());
                }
            }
        }
        // envelope decays roughly as 1/z0
        assert!(deviations[3] < deviations[0]);
    }

    #[test]
    fn chip_stack_horizontal_dipole_radiates_into_glass() {
        let s = LayerStack::chip(100.0).unwrap();
        let d = DipoleSource::in_crystal(WL, 100.0, 10.0, [1.0, 0.0, 0.0]).unwrap();
        let b = power_budget(&s, &d, &cfg()).unwrap();
        assert!(b.down > 2.0 * b.up, "{b:?}");
        assert!(b.trapped > 0.0, "{b:?}");
    }

    #[test]
    fn flipping_the_stack_preserves_the_rate() {
        let s = LayerStack::chip(120.0).unwrap();
        for o in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.6, 0.0, 0.8]] {
            let d = DipoleSource::in_crystal(WL, 120.0, 25.0, o).unwrap();
            let a = relative_decay_rate(&s, &d, &cfg()).unwrap();
            let b = relative_decay_rate(&s.flipped(), &d.flipped(&s), &cfg()).unwrap();
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn collection_grows_with_aperture() {
        let s = LayerStack::chip(80.0).unwrap();
        let d = DipoleSource::in_crystal(WL, 80.0, 20.0, [0.8, 0.0, 0.6]).unwrap();
        let mut last = 0.0;
        for i in 1..=20 {
            let na = i as f64 * 0.05;
            let c = collection_efficiency(&s, &d, na, &cfg()).unwrap();
            assert!(c >= last - 1e-12, "NA {na}: {c} < {last}");
            last = c;
        }
    }

    #[test]
    fn outputs_are_scale_invariant() {
        let s = LayerStack::chip(100.0).unwrap();
        let d = DipoleSource::in_crystal(WL, 100.0, 30.0, [0.6, 0.0, 0.8]).unwrap();
        for f in [0.5, 3.0] {
            let (s2, d2) = (s.scaled(f), d.scaled(f));
            let a = relative_decay_rate(&s, &d, &cfg()).unwrap();
            let b = relative_decay_rate(&s2, &d2, &cfg()).unwrap();
            assert!((a - b).abs() < 1e-9 * a);
            let a = collection_efficiency(&s, &d, 0.8, &cfg()).unwrap();
            let b = collection_efficiency(&s2, &d2, 0.8, &cfg()).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }
}
