//! Guided modes of a waveguide cross-section.
//!
//! Semi-vectorial finite differences for the dominant lateral field `Ex`
//! on a uniform node grid. Nodes on the window edge are held at zero. The
//! `x` operator carries the permittivity-jump weights that make `eps*Ex`
//! continuous-gradient across vertical interfaces; the `y` operator is the
//! plain Laplacian. The longitudinal component follows from the transverse
//! divergence condition; `Ey` is zero in this approximation.
//!
//! Coordinates: `x` lateral, `y` vertical (up), propagation along `z`.

mod eigen;
mod geometry;

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use eigen::{nearest_eigenpairs, EigenOptions, SparseMatrix};
pub use geometry::{CrossSection, Rect, RidgeGeometry, MIN_MARGIN_NM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Wavelength step for the centered group-index difference (nm).
    pub group_delta: f64,
    pub krylov_dim: usize,
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { group_delta: 1.0, krylov_dim: 40, tol: 1e-11, max_restarts: 80 }
    }
}

impl SolverConfig {
    fn eigen(&self) -> EigenOptions {
        EigenOptions {
            krylov_dim: self.krylov_dim,
            tol: self.tol,
            max_restarts: self.max_restarts,
            restarts_per_shift: 2,
        }
    }
}

/// Node grid including the zero-field edge nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    fn for_section(cs: &CrossSection) -> Result<Self> {
        let [x0, x1, y0, y1] = cs.window();
        let (dx, dy) = cs.steps();
        let nx = ((x1 - x0) / dx).round() as usize + 1;
        let ny = ((y1 - y0) / dy).round() as usize + 1;
        if nx < 5 || ny < 5 {
            return Err(Error::domain("solve_modes", format!("grid {nx} x {ny} too small")));
        }
        Ok(Grid { x0, y0, dx, dy, nx, ny })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    fn at(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    fn unknown(&self, i: usize, j: usize) -> usize {
        (j - 1) * (self.nx - 2) + (i - 1)
    }
}

/// Metadata written next to an exported field.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeHeader {
    pub n_eff: f64,
    pub n_g: f64,
    pub wavelength: f64,
    pub grid: Grid,
}

/// One guided mode. Fields are normalized so that the sum of
/// `eps * |E|^2 * dx * dy` over the grid is 1 (units 1/nm).
#[derive(Debug, Clone)]
pub struct ModeField {
    pub grid: Grid,
    pub wavelength: f64,
    pub n_eff: f64,
    pub n_g: f64,
    pub ex: Vec<Complex64>,
    pub ey: Vec<Complex64>,
    pub ez: Vec<Complex64>,
    /// Relative permittivity at each node.
    pub permittivity: Vec<f64>,
}

impl ModeField {
    pub fn header(&self) -> ModeHeader {
        ModeHeader { n_eff: self.n_eff, n_g: self.n_g, wavelength: self.wavelength, grid: self.grid }
    }

    pub fn node(&self, i: usize, j: usize) -> [Complex64; 3] {
        let k = self.grid.at(i, j);
        [self.ex[k], self.ey[k], self.ez[k]]
    }

    /// Bilinear interpolation of `E`; exact at nodes.
    pub fn field_at(&self, x: f64, y: f64) -> Result<[Complex64; 3]> {
        let g = &self.grid;
        let u = (x - g.x0) / g.dx;
        let v = (y - g.y0) / g.dy;
        let (umax, vmax) = ((g.nx - 1) as f64, (g.ny - 1) as f64);
        if !(u >= -1e-9 && u <= umax + 1e-9 && v >= -1e-9 && v <= vmax + 1e-9) {
            return Err(Error::domain("field_at", format!("({x}, {y}) nm is outside the window")));
        }
        let u = u.clamp(0.0, umax);
        let v = v.clamp(0.0, vmax);
        let i = (u.floor() as usize).min(g.nx - 2);
        let j = (v.floor() as usize).min(g.ny - 2);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (di, dj, w) in
            [(0, 0, (1.0 - fu) * (1.0 - fv)), (1, 0, fu * (1.0 - fv)), (0, 1, (1.0 - fu) * fv), (1, 1, fu * fv)]
        {
            if w == 0.0 {
                continue;
            }
            let e = self.node(i + di, j + dj);
            for c in 0..3 {
                out[c] += e[c] * w;
            }
        }
        Ok(out)
    }

    /// Normalization integral over the local intensity along `orientation`
    /// (nm^2). Infinite when the projection vanishes.
    pub fn effective_area(&self, x: f64, y: f64, orientation: [f64; 3]) -> Result<f64> {
        let e = self.field_at(x, y)?;
        let p: Complex64 = (0..3).map(|c| e[c] * orientation[c]).sum();
        let q = p.norm_sqr();
        Ok(if q > 0.0 { self.norm_integral() / q } else { f64::INFINITY })
    }

    pub fn norm_integral(&self) -> f64 {
        self.weighted_overlap(self)
    }

    /// `sum eps * E_a . conj(E_b) dA` between two modes on the same grid.
    pub fn overlap(&self, other: &ModeField) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.ex.len() {
            let e = self.permittivity[k];
            acc += e
                * (self.ex[k] * other.ex[k].conj() + self.ey[k] * other.ey[k].conj() + self.ez[k] * other.ez[k].conj());
        }
        acc * self.grid.dx * self.grid.dy
    }

    fn weighted_overlap(&self, other: &ModeField) -> f64 {
        self.overlap(other).re
    }

    /// Share of the normalization integral carried by each component.
    pub fn component_fractions(&self) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for k in 0..self.ex.len() {
            let e = self.permittivity[k];
            acc[0] += e * self.ex[k].norm_sqr();
            acc[1] += e * self.ey[k].norm_sqr();
            acc[2] += e * self.ez[k].norm_sqr();
        }
        let t: f64 = acc.iter().sum();
        acc.map(|a| a / t)
    }

    /// Largest `|E|` on the ring of nodes next to the window edge, relative
    /// to the global maximum.
    pub fn edge_ratio(&self) -> f64 {
        let g = &self.grid;
        let mag = |i, j| {
            let e = self.node(i, j);
            e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
        };
        let mut peak = 0.0f64;
        for j in 0..g.ny {
            for i in 0..g.nx {
                peak = peak.max(mag(i, j));
            }
        }
        let mut edge = 0.0f64;
        for i in 1..g.nx - 1 {
            edge = edge.max(mag(i, 1)).max(mag(i, g.ny - 2));
        }
        for j in 1..g.ny - 1 {
            edge = edge.max(mag(1, j)).max(mag(g.nx - 2, j));
        }
        edge / peak
    }

    /// CSV rows `x_nm,y_nm,ReEx,ImEx,ReEy,ImEy,ReEz,ImEz`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "x_nm,y_nm,ReEx,ImEx,ReEy,ImEy,ReEz,ImEz")?;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let [ex, ey, ez] = self.node(i, j);
                writeln!(
                    out,
                    "{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                    self.grid.x(i),
                    self.grid.y(j),
                    ex.re,
                    ex.im,
                    ey.re,
                    ey.im,
                    ez.re,
                    ez.im
                )?;
            }
        }
        Ok(())
    }
}

struct RawMode {
    n_eff: f64,
    ex: Vec<f64>,
}

struct Discretization {
    grid: Grid,
    eps: Vec<f64>,
}

impl Discretization {
    fn new(cs: &CrossSection) -> Result<Self> {
        let grid = Grid::for_section(cs)?;
        let mut eps = vec![0.0; grid.nx * grid.ny];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                eps[grid.at(i, j)] = cs.cell_permittivity(grid.x(i), grid.y(j));
            }
        }
        Ok(Discretization { grid, eps })
    }

    fn operator(&self, k0: f64) -> SparseMatrix {
        let g = &self.grid;
        let n = (g.nx - 2) * (g.ny - 2);
        let mut entries = Vec::with_capacity(5 * n);
        let (idx2, idy2) = (1.0 / (g.dx * g.dx), 1.0 / (g.dy * g.dy));
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let row = g.unknown(i, j);
                let e = self.eps[g.at(i, j)];
                let el = self.eps[g.at(i - 1, j)];
                let er = self.eps[g.at(i + 1, j)];
                let wl = 2.0 / (e + el);
                let wr = 2.0 / (e + er);
                entries.push((row, row, -(wl + wr) * e * idx2 - 2.0 * idy2 + k0 * k0 * e));
                if i > 1 {
                    entries.push((row, g.unknown(i - 1, j), wl * el * idx2));
                }
                if i < g.nx - 2 {
                    entries.push((row, g.unknown(i + 1, j), wr * er * idx2));
                }
                if j > 1 {
                    entries.push((row, g.unknown(i, j - 1), idy2));
                }
                if j < g.ny - 2 {
                    entries.push((row, g.unknown(i, j + 1), idy2));
                }
            }
        }
        SparseMatrix { n, entries }
    }

    /// Guided modes sorted by descending effective index.
    fn solve(&self, cs: &CrossSection, wavelength: f64, max_modes: usize, cfg: &SolverConfig) -> Result<Vec<RawMode>> {
        let k0 = 2.0 * PI / wavelength;
        let a = self.operator(k0);
        let sigma = k0 * k0 * cs.max_index().powi(2);
        let pairs = nearest_eigenpairs(&a, sigma, max_modes, &cfg.eigen())?;
        let n_clad = cs.cladding_index();
        let g = &self.grid;
        let mut modes: Vec<RawMode> = pairs
            .into_iter()
            .filter(|p| p.value > 0.0)
            .map(|p| {
                let mut ex = vec![0.0; g.nx * g.ny];
                for j in 1..g.ny - 1 {
                    for i in 1..g.nx - 1 {
                        ex[g.at(i, j)] = p.vector[g.unknown(i, j)];
                    }
                }
                RawMode { n_eff: p.value.sqrt() / k0, ex }
            })
            .filter(|m| m.n_eff > n_clad)
            .collect();
        modes.sort_by(|a, b| b.n_eff.total_cmp(&a.n_eff));
        Ok(modes)
    }

    fn field(&self, raw: &RawMode, wavelength: f64, n_g: f64) -> ModeField {
        let g = self.grid;
        let beta = 2.0 * PI / wavelength * raw.n_eff;
        let len = g.nx * g.ny;
        let mut ez = vec![Complex64::new(0.0, 0.0); len];
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let d = self.eps[g.at(i + 1, j)] * raw.ex[g.at(i + 1, j)]
                    - self.eps[g.at(i - 1, j)] * raw.ex[g.at(i - 1, j)];
                ez[g.at(i, j)] = Complex64::new(0.0, d / (2.0 * g.dx * beta * self.eps[g.at(i, j)]));
            }
        }
        let mut ex: Vec<Complex64> = raw.ex.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let peak = raw.ex.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let mut scale = if peak < 0.0 { -1.0 } else { 1.0 };
        let norm: f64 =
            (0..len).map(|k| self.eps[k] * (ex[k].norm_sqr() + ez[k].norm_sqr())).sum::<f64>() * g.dx * g.dy;
        scale /= norm.sqrt();
        ex.iter_mut().for_each(|v| *v *= scale);
        ez.iter_mut().for_each(|v| *v *= scale);
        ModeField {
            grid: g,
            wavelength,
            n_eff: raw.n_eff,
            n_g,
            ex,
            ey: vec![Complex64::new(0.0, 0.0); len],
            ez,
            permittivity: self.eps.clone(),
        }
    }
}

fn check_wavelength(op: &'static str, wavelength: f64) -> Result<()> {
    if wavelength > 0.0 && wavelength.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("wavelength {wavelength} nm")))
    }
}

/// Group index from effective indices at `wavelength` and `wavelength +- delta`.
pub fn centered_group_index(n_eff: f64, n_minus: f64, n_plus: f64, wavelength: f64, delta: f64) -> f64 {
    n_eff - wavelength * (n_plus - n_minus) / (2.0 * delta)
}

/// Up to `max_modes` guided modes, highest effective index first. A
/// structure without guided modes gives an empty list. Each mode's group
/// index comes from two extra solves at `wavelength +- cfg.group_delta`.
pub fn solve_modes_with(
    cs: &CrossSection,
    wavelength: f64,
    max_modes: usize,
    cfg: &SolverConfig,
) -> Result<Vec<ModeField>> {
    check_wavelength("solve_modes", wavelength)?;
    let disc = Discretization::new(cs)?;
    let modes = disc.solve(cs, wavelength, max_modes, cfg)?;
    if modes.is_empty() {
        return Ok(Vec::new());
    }
    let d = cfg.group_delta;
    let minus = disc.solve(cs, wavelength - d, modes.len(), cfg)?;
    let plus = disc.solve(cs, wavelength + d, modes.len(), cfg)?;
    let out: Vec<ModeField> = modes
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let n_g = match (minus.get(k), plus.get(k)) {
                (Some(a), Some(b)) => centered_group_index(m.n_eff, a.n_eff, b.n_eff, wavelength, d),
                (Some(a), None) => m.n_eff - wavelength * (m.n_eff - a.n_eff) / d,
                (None, Some(b)) => m.n_eff - wavelength * (b.n_eff - m.n_eff) / d,
                (None, None) => f64::NAN,
            };
            if !n_g.is_finite() {
                log::warn!("mode {k} at {wavelength} nm has no neighbours for a group index");
            }
            disc.field(m, wavelength, n_g)
        })
        .collect();
    for (k, m) in out.iter().enumerate() {
        let r = m.edge_ratio();
        if r > 1e-3 {
            log::warn!(
                "mode {k} (n_eff {:.5}) reaches the window edge at {r:.1e} of its peak; widen the margin",
                m.n_eff
            );
        }
    }
    Ok(out)
}

pub fn solve_modes(cs: &CrossSection, wavelength: f64, max_modes: usize) -> Result<Vec<ModeField>> {
    solve_modes_with(cs, wavelength, max_modes, &SolverConfig::default())
}

/// Fundamental-mode group index `n_eff - lambda * dn_eff/dlambda` by a
/// centered difference of step `delta` nm.
pub fn group_index(cs: &CrossSection, wavelength: f64, delta: f64) -> Result<f64> {
    check_wavelength("group_index", wavelength)?;
    if !(0.1..=5.0).contains(&delta) {
        return Err(Error::domain("group_index", format!("delta {delta} nm outside [0.1, 5]")));
    }
    let disc = Discretization::new(cs)?;
    let cfg = SolverConfig::default();
    let n_at = |wl: f64| -> Result<f64> {
        disc.solve(cs, wl, 1, &cfg)?.first().map(|m| m.n_eff).ok_or(Error::ModeLost { wavelength_nm: wl })
    };
    let n0 = n_at(wavelength)?;
    let nm = n_at(wavelength - delta)?;
    let np = n_at(wavelength + delta)?;
    Ok(centered_group_index(n0, nm, np, wavelength, delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_medium_has_no_guided_mode() {
        let cs = CrossSection::uniform(1.6, 1500.0, 1500.0, 30.0).unwrap();
        assert!(solve_modes(&cs, 785.0, 3).unwrap().is_empty());
    }

    #[test]
    fn nondispersive_group_index() {
        assert!((centered_group_index(1.7, 1.7, 1.7, 785.0, 1.0) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cs = RidgeGeometry::default().cross_section().unwrap();
        assert!(solve_modes(&cs, -1.0, 1).is_err());
        assert!(group_index(&cs, 785.0, 10.0).is_err());
    }
}
