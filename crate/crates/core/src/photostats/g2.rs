use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TimestampStream;
use crate::error::{Error, Result};

/// Coincidences between two channels binned by delay `t2 - t1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Histogram {
    pub bin_width_ps: u64,
    pub window_ns: f64,
    /// Bin centres (ns), symmetric about zero.
    pub delays_ns: Vec<f64>,
    pub raw: Vec<u64>,
    /// Coincidences expected per bin for uncorrelated streams.
    pub expected: Vec<f64>,
    pub normalized: Vec<f64>,
    pub rate1_hz: f64,
    pub rate2_hz: f64,
    pub duration_ps: u64,
    pub warnings: Vec<String>,
}

impl G2Histogram {
    /// Noise-free histogram of a prescribed curve, for checking fits.
    pub fn synthetic(bin_width_ps: u64, window_ns: f64, counts_per_bin: f64, curve: impl Fn(f64) -> f64) -> Self {
        let k = (window_ns * 1e3 / bin_width_ps as f64).floor() as i64;
        let delays_ns: Vec<f64> = (-k..=k).map(|i| i as f64 * bin_width_ps as f64 / 1e3).collect();
        let normalized: Vec<f64> = delays_ns.iter().map(|&t| curve(t)).collect();
        G2Histogram {
            bin_width_ps,
            window_ns,
            raw: normalized.iter().map(|v| (v * counts_per_bin).round().max(0.0) as u64).collect(),
            expected: vec![counts_per_bin; delays_ns.len()],
            delays_ns,
            normalized,
            rate1_hz: 0.0,
            rate2_hz: 0.0,
            duration_ps: 0,
            warnings: Vec::new(),
        }
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "delay_ns,raw,expected,normalized")?;
        for i in 0..self.raw.len() {
            writeln!(out, "{},{},{:.9e},{:.9e}", self.delays_ns[i], self.raw[i], self.expected[i], self.normalized[i])?;
        }
        Ok(())
    }

    /// Index of the zero-delay bin.
    pub fn zero_bin(&self) -> usize {
        self.delays_ns.len() / 2
    }
}

/// Timestamps present in both streams.
fn shared_events(a: &[u64], b: &[u64]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// All-pairs correlation within `+-window_ns`, bins of width
/// `bin_width_ps` centred on multiples of the width.
pub fn g2_histogram(
    s1: &TimestampStream,
    s2: &TimestampStream,
    bin_width_ps: u64,
    window_ns: f64,
) -> Result<G2Histogram> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::Empty("g2_histogram input stream"));
    }
    if bin_width_ps == 0 || !(window_ns * 1e3 >= bin_width_ps as f64) {
        return Err(Error::domain("g2_histogram", format!("bin {bin_width_ps} ps, window {window_ns} ns")));
    }
    let w = bin_width_ps as i64;
    let k = (window_ns * 1e3 / w as f64).floor() as i64;
    let nbins = (2 * k + 1) as usize;
    // delays in [-(k + 1/2) w, (k + 1/2) w)
    let lo_edge = -(2 * k + 1) * w;
    let span = (k * w + w / 2 + 1) as u64;
    let b = &s2.timestamps;
    let counts = s1
        .timestamps
        .par_chunks(4096)
        .map(|chunk| {
            let mut c = vec![0u64; nbins];
            let mut j = b.partition_point(|&t| t + span < chunk[0]);
            for &t1 in chunk {
                while j < b.len() && b[j] + span < t1 {
                    j += 1;
                }
                let mut m = j;
                while m < b.len() && b[m] <= t1 + span {
                    let tau2 = 2 * (b[m] as i64 - t1 as i64);
                    if tau2 >= lo_edge && tau2 < -lo_edge {
                        let bin = (tau2 - lo_edge) / (2 * w);
                        c[bin as usize] += 1;
                    }
                    m += 1;
                }
            }
            c
        })
        .reduce(
            || vec![0u64; nbins],
            |mut a, c| {
                a.iter_mut().zip(&c).for_each(|(x, y)| *x += y);
                a
            },
        );
    let duration = s1.duration.min(s2.duration);
    let (r1, r2) = (s1.len() as f64 / duration as f64, s2.len() as f64 / duration as f64);
    let delays_ns: Vec<f64> = (-k..=k).map(|i| (i * w) as f64 / 1e3).collect();
    let expected: Vec<f64> =
        delays_ns.iter().map(|&d| r1 * r2 * w as f64 * (duration as f64 - (d * 1e3).abs())).collect();
    let normalized = counts.iter().zip(&expected).map(|(&c, &e)| c as f64 / e).collect();
    let mut warnings = Vec::new();
    let shared = shared_events(&s1.timestamps, &s2.timestamps);
    if shared as f64 > 0.005 * s1.len().min(s2.len()) as f64 {
        let msg = format!(
            "{shared} timestamps appear in both channels; the zero-delay bin is dominated by self-coincidences"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(G2Histogram {
        bin_width_ps,
        window_ns,
        delays_ns,
        raw: counts,
        expected,
        normalized,
        rate1_hz: r1 * 1e12,
        rate2_hz: r2 * 1e12,
        duration_ps: duration,
        warnings,
    })
}

/// Antibunching fit `g2(t) = 1 - b exp(-|t| / T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    pub g2_zero: f64,
    pub b: f64,
    pub t_ns: f64,
    pub se_g2_zero: f64,
    pub se_b: f64,
    pub se_t_ns: f64,
    pub chi2_reduced: f64,
    pub bins: usize,
}

struct FitData {
    tau: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl FitData {
    /// Best amplitude and chi-square at fixed `T`.
    fn profile(&self, t: f64) -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.y.len() {
            let g = (-self.tau[k].abs() / t).exp();
            num += self.w[k] * g * (1.0 - self.y[k]);
            den += self.w[k] * g * g;
        }
        let b = if den > 0.0 { num / den } else { 0.0 };
        (b, self.chi2(b, t))
    }

    fn chi2(&self, b: f64, t: f64) -> f64 {
        (0..self.y.len())
            .map(|k| {
                let r = self.y[k] - 1.0 + b * (-self.tau[k].abs() / t).exp();
                self.w[k] * r * r
            })
            .sum()
    }

    /// Normal matrix `J^T W J` and gradient `J^T W r` in `(b, T)`.
    fn normal_equations(&self, b: f64, t: f64) -> ([[f64; 2]; 2], [f64; 2]) {
        let mut a = [[0.0; 2]; 2];
        let mut g = [0.0; 2];
        for k in 0..self.y.len() {
            let e = (-self.tau[k].abs() / t).exp();
            let j = [-e, -b * e * self.tau[k].abs() / (t * t)];
            let r = self.y[k] - (1.0 - b * e);
            for p in 0..2 {
                g[p] += self.w[k] * j[p] * r;
                for q in 0..2 {
                    a[p][q] += self.w[k] * j[p] * j[q];
                }
            }
        }
        (a, g)
    }
}

fn invert2(a: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a[0][0].abs() * a[1][1].abs();
    if !(det.abs() > 1e-12 * scale) || scale == 0.0 {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

/// Weighted least squares with Poisson weights. The amplitude is
/// eliminated in closed form and the recovery time found by a bracketed
/// search in `log T`, then polished by Gauss-Newton.
pub fn fit_g2(hist: &G2Histogram) -> Result<G2Fit> {
    let n = hist.normalized.len();
    if n < 20 {
        return Err(Error::Fit(format!("{n} bins; at least 20 are needed")));
    }
    let wing = (n / 10).max(1);
    let wings: u64 = hist.raw[..wing].iter().chain(&hist.raw[n - wing..]).sum();
    if wings == 0 {
        return Err(Error::Fit("no coincidences in the histogram wings".into()));
    }
    let data = FitData {
        tau: hist.delays_ns.clone(),
        y: hist.normalized.clone(),
        w: hist
            .raw
            .iter()
            .zip(&hist.expected)
            .map(|(&c, &e)| {
                let sigma = (c.max(1) as f64).sqrt() / e;
                1.0 / (sigma * sigma)
            })
            .collect(),
    };
    let bin_ns = hist.bin_width_ps as f64 / 1e3;
    let (lo, hi) = ((0.1 * bin_ns).ln(), hist.window_ns.ln());
    // coarse scan, then golden-section refinement around the best point
    let steps = 240;
    let at = |i: usize| lo + (hi - lo) * i as f64 / steps as f64;
    let best =
        (0..=steps).min_by(|&i, &j| data.profile(at(i).exp()).1.total_cmp(&data.profile(at(j).exp()).1)).unwrap_or(0);
    let (mut a, mut c) = (at(best.saturating_sub(1)), at((best + 1).min(steps)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = c - phi * (c - a);
    let mut x2 = a + phi * (c - a);
    let (mut f1, mut f2) = (data.profile(x1.exp()).1, data.profile(x2.exp()).1);
    for _ in 0..200 {
        if (c - a).abs() < 1e-14 {
            break;
        }
        if f1 < f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - phi * (c - a);
            f1 = data.profile(x1.exp()).1;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (c - a);
            f2 = data.profile(x2.exp()).1;
        }
    }
    let mut t = (0.5 * (a + c)).exp();
    let mut b = data.profile(t).0;
    for _ in 0..20 {
        let (m, g) = data.normal_equations(b, t);
        let Some(inv) = invert2(m) else { break };
        let db = -(inv[0][0] * g[0] + inv[0][1] * g[1]);
        let dt = -(inv[1][0] * g[0] + inv[1][1] * g[1]);
        let (nb, nt) = (b + db, t + dt);
        if !(nt > 0.0) || data.chi2(nb, nt) > data.chi2(b, t) {
            break;
        }
        b = nb;
        t = nt;
        if dt.abs() < 1e-14 * t && db.abs() < 1e-14 {
            break;
        }
    }
    let chi2 = data.chi2(b, t);
    let chi2_reduced = chi2 / (n - 2) as f64;
    if !(b.is_finite() && t.is_finite()) {
        return Err(Error::Fit(format!("fit did not converge (b = {b}, T = {t} ns)")));
    }
    if !(-0.5..=1.5).contains(&b) {
        return Err(Error::Fit(format!(
            "amplitude b = {b:.4} outside [-0.5, 1.5] (T = {t:.4} ns, reduced chi2 = {chi2_reduced:.3})"
        )));
    }
    let (m, _) = data.normal_equations(b, t);
    let (se_b, se_t) = match invert2(m) {
        Some(cov) => ((cov[0][0] * chi2_reduced).sqrt(), (cov[1][1] * chi2_reduced).sqrt()),
        None => (((1.0 / m[0][0]) * chi2_reduced).sqrt(), f64::INFINITY),
    };
    Ok(G2Fit { g2_zero: 1.0 - b, b, t_ns: t, se_g2_zero: se_b, se_b, se_t_ns: se_t, chi2_reduced, bins: n })
}
