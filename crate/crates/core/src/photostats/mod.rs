//! Photon streams from a single three-level emitter, the detection chain,
//! and Hanbury Brown-Twiss analysis.
//!
//! Timestamps are integer picoseconds. Rates in public signatures are in Hz
//! unless the name says otherwise; lifetimes and durations are in ns.

mod g2;
mod timetag;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::budget::{linearized, Quantity};
use crate::error::{Error, Result};

pub use g2::{fit_g2, g2_histogram, G2Fit, G2Histogram};
pub use timetag::{read_timetags, read_timetags_csv, write_timetags, write_timetags_csv, TIMETAG_MAGIC};

const PS_PER_NS: f64 = 1e3;
const PS_PER_S: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitterParams {
    /// Excited-state lifetime (ns).
    pub lifetime_tau: f64,
    pub saturation_s: f64,
    /// Probability that a decay crosses into the triplet.
    pub isc_yield: f64,
    /// Triplet lifetime (ns).
    pub triplet_lifetime: f64,
    pub quantum_yield: f64,
}

impl Default for EmitterParams {
    fn default() -> Self {
        EmitterParams {
            lifetime_tau: 4.2,
            saturation_s: 0.2,
            isc_yield: 1e-7,
            triplet_lifetime: 5000.0,
            quantum_yield: 0.95,
        }
    }
}

impl EmitterParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.lifetime_tau > 0.0) {
            bad.push(format!("lifetime_tau = {} must be > 0", self.lifetime_tau));
        }
        if !(self.saturation_s >= 0.0 && self.saturation_s.is_finite()) {
            bad.push(format!("saturation_s = {} must be >= 0", self.saturation_s));
        }
        if !(0.0..=1.0).contains(&self.isc_yield) {
            bad.push(format!("isc_yield = {} outside [0, 1]", self.isc_yield));
        }
        if !(self.triplet_lifetime > 0.0) {
            bad.push(format!("triplet_lifetime = {} must be > 0", self.triplet_lifetime));
        }
        if !(self.quantum_yield > 0.0 && self.quantum_yield <= 1.0) {
            bad.push(format!("quantum_yield = {} outside (0, 1]", self.quantum_yield));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::domain("emitter", bad.join("; ")))
        }
    }

    /// Ground-to-excited pump rate (1/ns) that makes the steady-state decay
    /// rate `s / (2 tau (1 + s))`.
    pub fn pump_rate(&self) -> f64 {
        self.saturation_s / ((2.0 + self.saturation_s) * self.lifetime_tau)
    }

    /// Expected photon rate (Hz), triplet visits included.
    pub fn expected_rate(&self) -> f64 {
        if self.saturation_s == 0.0 {
            return 0.0;
        }
        let cycle_ns = 1.0 / self.pump_rate() + self.lifetime_tau + self.isc_yield * self.triplet_lifetime;
        (1.0 - self.isc_yield) * self.quantum_yield / cycle_ns * 1e9
    }

    /// Antibunching recovery time `1 / (k_p + 1/tau)` (ns).
    pub fn antibunching_time(&self) -> f64 {
        1.0 / (self.pump_rate() + 1.0 / self.lifetime_tau)
    }
}

/// Photon arrival times on one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampStream {
    pub detector_id: u8,
    /// Strictly increasing, picoseconds.
    pub timestamps: Vec<u64>,
    /// Picoseconds.
    pub duration: u64,
    pub metadata: StreamMetadata,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamMetadata {
    pub seed: u64,
    pub generator: String,
    pub parameters: BTreeMap<String, f64>,
}

impl TimestampStream {
    pub fn new(detector_id: u8, timestamps: Vec<u64>, duration: u64, metadata: StreamMetadata) -> Result<Self> {
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format("timestamps are not strictly increasing".into()));
        }
        if timestamps.last().is_some_and(|&t| t > duration) {
            return Err(Error::Format("timestamp beyond stream duration".into()));
        }
        Ok(TimestampStream { detector_id, timestamps, duration, metadata })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Mean count rate (Hz).
    pub fn rate(&self) -> f64 {
        if self.duration == 0 {
            0.0
        } else {
            self.timestamps.len() as f64 / (self.duration as f64 / PS_PER_S)
        }
    }
}

/// Appends `t` keeping the sequence strictly increasing; a collision on
/// the picosecond grid moves the later event forward by 1 ps.
fn push_strict(out: &mut Vec<u64>, t: u64) {
    match out.last() {
        Some(&last) if t <= last => out.push(last + 1),
        _ => out.push(t),
    }
}

/// Event-by-event Monte Carlo over ground, excited and triplet states.
pub fn simulate_emitter(params: &EmitterParams, duration_ns: f64, seed: u64) -> Result<TimestampStream> {
    params.validate()?;
    if !(duration_ns > 0.0) {
        return Err(Error::domain("simulate_emitter", format!("duration {duration_ns} ns")));
    }
    if duration_ns < 1e4 * params.lifetime_tau {
        log::warn!("simulated duration {duration_ns} ns is shorter than 1e4 lifetimes; statistics will be poor");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exp = |rate: f64| -> f64 {
        let e: f64 = Exp1.sample(&mut rng);
        e / rate
    };
    let duration_ps = (duration_ns * PS_PER_NS).round() as u64;
    let kp = params.pump_rate();
    let kd = 1.0 / params.lifetime_tau;
    let kt = 1.0 / params.triplet_lifetime;
    let mut times = Vec::new();
    if kp > 0.0 {
        let mut branch = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut t = 0.0;
        loop {
            t += exp(kp);
            t += exp(kd);
            if t > duration_ns {
                break;
            }
            if branch.random::<f64>() < params.isc_yield {
                t += exp(kt);
                continue;
            }
            if branch.random::<f64>() < params.quantum_yield {
                let ps = (t * PS_PER_NS).round() as u64;
                if ps > duration_ps {
                    break;
                }
                push_strict(&mut times, ps);
            }
        }
    }
    if times.last().is_some_and(|&t| t > duration_ps) {
        times.pop();
    }
    let mut parameters = BTreeMap::new();
    parameters.insert("lifetime_tau_ns".into(), params.lifetime_tau);
    parameters.insert("saturation_s".into(), params.saturation_s);
    parameters.insert("isc_yield".into(), params.isc_yield);
    parameters.insert("triplet_lifetime_ns".into(), params.triplet_lifetime);
    parameters.insert("quantum_yield".into(), params.quantum_yield);
    Ok(TimestampStream {
        detector_id: 0,
        timestamps: times,
        duration: duration_ps,
        metadata: StreamMetadata { seed, generator: "emitter".into(), parameters },
    })
}

/// Detector and optics between the emitter and the time tagger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Detection {
    pub efficiency: f64,
    /// Hz.
    pub background_rate: f64,
    /// ns.
    pub dead_time: f64,
    /// Optional Gaussian timing blur (ps, 1 sigma).
    pub jitter_ps: f64,
}

impl Default for Detection {
    fn default() -> Self {
        Detection { efficiency: 1.0, background_rate: 0.0, dead_time: 0.0, jitter_ps: 0.0 }
    }
}

/// Bernoulli thinning, Poisson background, optional jitter, then dead time.
pub fn apply_detection(stream: &TimestampStream, det: &Detection, seed: u64) -> Result<TimestampStream> {
    if !(0.0..=1.0).contains(&det.efficiency) {
        return Err(Error::domain("apply_detection", format!("efficiency {} outside [0, 1]", det.efficiency)));
    }
    if !(det.background_rate >= 0.0 && det.dead_time >= 0.0 && det.jitter_ps >= 0.0) {
        return Err(Error::domain("apply_detection", "background rate, dead time and jitter must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<u64> =
        stream.timestamps.iter().copied().filter(|_| rng.random::<f64>() < det.efficiency).collect();
    if det.background_rate > 0.0 {
        let rate_per_ps = det.background_rate / PS_PER_S;
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(&mut rng);
            t += e / rate_per_ps;
            if t > stream.duration as f64 {
                break;
            }
            events.push(t.round() as u64);
        }
    }
    if det.jitter_ps > 0.0 {
        let blur = Normal::new(0.0, det.jitter_ps).map_err(|e| Error::domain("apply_detection", e.to_string()))?;
        for t in events.iter_mut() {
            let v = *t as f64 + blur.sample(&mut rng);
            *t = v.round().clamp(0.0, stream.duration as f64) as u64;
        }
    }
    events.sort_unstable();
    events.dedup();
    let dead = (det.dead_time * PS_PER_NS).round() as u64;
    let mut out = Vec::with_capacity(events.len());
    let mut last: Option<u64> = None;
    for t in events {
        if let Some(l) = last {
            if t - l < dead.max(1) {
                continue;
            }
        }
        out.push(t);
        last = Some(t);
    }
    let mut metadata = stream.metadata.clone();
    metadata.seed = seed;
    metadata.generator = format!("{} | detection", stream.metadata.generator);
    metadata.parameters.insert("efficiency".into(), det.efficiency);
    metadata.parameters.insert("background_rate_hz".into(), det.background_rate);
    metadata.parameters.insert("dead_time_ns".into(), det.dead_time);
    Ok(TimestampStream { detector_id: stream.detector_id, timestamps: out, duration: stream.duration, metadata })
}

/// Routes each event to detector 1 or 2 with equal probability.
pub fn hbt_split(stream: &TimestampStream, seed: u64) -> (TimestampStream, TimestampStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for &t in &stream.timestamps {
        if rng.random::<bool>() {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    let arm = |id: u8, ts: Vec<u64>| {
        let mut metadata = stream.metadata.clone();
        metadata.seed = seed;
        metadata.generator = format!("{} | split", stream.metadata.generator);
        TimestampStream { detector_id: id, timestamps: ts, duration: stream.duration, metadata }
    };
    (arm(1, a), arm(2, b))
}

/// Background-corrected zero-delay correlation
/// `1 + (g2 - 1) / p^2` with `p = (S_c - B) / S_c`, to first order in the
/// input uncertainties.
pub fn on_chip_purity(g2_zero: &Quantity, s_c: &Quantity, b: &Quantity) -> Result<Quantity> {
    let (g, s, bg) = (g2_zero.value, s_c.value, b.value);
    if !(bg >= 0.0 && bg < s) {
        return Err(Error::domain("on_chip_purity", format!("background {bg} Hz must lie in [0, S_c = {s} Hz)")));
    }
    let p = (s - bg) / s;
    let value = 1.0 + (g - 1.0) / (p * p);
    let df_dp = -2.0 * (g - 1.0) / (p * p * p);
    Ok(linearized(
        value,
        &[(1.0 / (p * p), g2_zero.sigma), (df_dp * bg / (s * s), s_c.sigma), (-df_dp / s, b.sigma)],
        "",
    ))
}

/// Signal fraction `(S_c - B) / S_c`.
pub fn signal_fraction(s_c: f64, b: f64) -> f64 {
    (s_c - b) / s_c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pump_rate_reproduces_steady_state() {
        let p = EmitterParams { isc_yield: 0.0, quantum_yield: 1.0, ..Default::default() };
        let expect = 1.0 / (2.0 * 4.2e-9) * (0.2 / 1.2);
        assert!((p.expected_rate() - expect).abs() < 1e-6 * expect);
        assert!((p.antibunching_time() - 4.2 * 2.2 / 2.4).abs() < 1e-12);
    }

    #[test]
    fn push_strict_bumps_collisions() {
        let mut v = vec![5];
        push_strict(&mut v, 5);
        push_strict(&mut v, 3);
        push_strict(&mut v, 10);
        assert_eq!(v, vec![5, 6, 7, 10]);
    }

    #[test]
    fn stream_invariants() {
        assert!(TimestampStream::new(0, vec![1, 1], 5, StreamMetadata::default()).is_err());
        assert!(TimestampStream::new(0, vec![1, 9], 5, StreamMetadata::default()).is_err());
        assert!(TimestampStream::new(0, vec![1, 5], 5, StreamMetadata::default()).is_ok());
    }

    #[test]
    fn purity_fixed_points_and_domain() {
        let q = |v| Quantity::exact(v, "");
        let r = on_chip_purity(&q(0.3), &q(5e4), &q(0.0)).unwrap();
        assert!((r.value - 0.3).abs() < 1e-15);
        let r = on_chip_purity(&q(1.0), &q(5e4), &q(2e4)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!(on_chip_purity(&q(0.5), &q(1e4), &q(1e4)).is_err());
    }
}
