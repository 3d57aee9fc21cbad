use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest clearance between the guiding core and the window edge.
pub const MIN_MARGIN_NM: f64 = 1000.0;

/// Axis-aligned region of constant index. Bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub n: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn new(n: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        Rect { n, x, y }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x.0 && x < self.x.1 && y >= self.y.0 && y < self.y.1
    }
}

/// Parameters of the ridge cross-section: a nitride ridge on glass under a
/// conformal crystal layer, with air above. `y = 0` is the substrate
/// surface and `x = 0` the ridge axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeGeometry {
    pub width: f64,
    pub thickness: f64,
    pub crystal_thickness: f64,
    pub n_core: f64,
    pub n_crystal: f64,
    pub n_substrate: f64,
    pub n_cover: f64,
    pub margin: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Default for RidgeGeometry {
    fn default() -> Self {
        RidgeGeometry {
            width: crate::RIDGE_WIDTH_NM,
            thickness: crate::NITRIDE_THICKNESS_NM,
            crystal_thickness: 100.0,
            n_core: crate::NITRIDE_INDEX,
            n_crystal: crate::ANTHRACENE_INDEX,
            n_substrate: crate::GLASS_INDEX,
            n_cover: crate::AIR_INDEX,
            margin: 1500.0,
            dx: 10.0,
            dy: 10.0,
        }
    }
}

impl RidgeGeometry {
    pub fn with_crystal(self, h: f64) -> Self {
        RidgeGeometry { crystal_thickness: h, ..self }
    }

    pub fn with_grid(self, dx: f64, dy: f64) -> Self {
        RidgeGeometry { dx, dy, ..self }
    }

    pub fn cross_section(&self) -> Result<CrossSection> {
        let (w, t, h) = (self.width, self.thickness, self.crystal_thickness);
        if !(w > 0.0 && t > 0.0 && h >= 0.0) {
            return Err(Error::domain("ridge", format!("width {w}, thickness {t}, crystal {h}")));
        }
        let inf = f64::INFINITY;
        let half = w / 2.0;
        let mut rects = vec![Rect::new(self.n_substrate, (-inf, inf), (-inf, 0.0))];
        if h > 0.0 {
            rects.push(Rect::new(self.n_crystal, (-inf, inf), (0.0, h)));
            rects.push(Rect::new(self.n_crystal, (-half - h, half + h), (0.0, t + h)));
        }
        rects.push(Rect::new(self.n_core, (-half, half), (0.0, t)));
        let m = self.margin;
        CrossSection::new(
            self.n_cover,
            rects,
            [-half - h - m, half + h + m, -m, t + h + m],
            [-half, half, 0.0, t],
            self.dx,
            self.dy,
        )
    }
}

/// Piecewise-constant index map over a rectangular window. Later
/// rectangles paint over earlier ones; uncovered points take the background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    background: f64,
    rects: Vec<Rect>,
    /// `[x_min, x_max, y_min, y_max]`
    window: [f64; 4],
    /// Bounding box of the guiding core, used for the margin check.
    core: [f64; 4],
    dx: f64,
    dy: f64,
}

impl CrossSection {
    pub fn new(background: f64, rects: Vec<Rect>, window: [f64; 4], core: [f64; 4], dx: f64, dy: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if !(background >= 1.0) {
            bad.push(format!("background index {background} < 1"));
        }
        for (i, r) in rects.iter().enumerate() {
            if !(r.n >= 1.0) || !r.n.is_finite() {
                bad.push(format!("rectangle {i}: index {} < 1", r.n));
            }
        }
        if !(dx > 0.0 && dy > 0.0) {
            bad.push(format!("grid steps {dx} x {dy} must be positive"));
        }
        let [x0, x1, y0, y1] = window;
        let [cx0, cx1, cy0, cy1] = core;
        let m = (cx0 - x0).min(x1 - cx1).min(cy0 - y0).min(y1 - cy1);
        if !(m >= MIN_MARGIN_NM - 1e-9) {
            bad.push(format!("window leaves only {m} nm around the core, need {MIN_MARGIN_NM}"));
        }
        if !bad.is_empty() {
            return Err(Error::Structure(bad.join("; ")));
        }
        Ok(CrossSection { background, rects, window, core, dx, dy })
    }

    pub fn index_at(&self, x: f64, y: f64) -> f64 {
        self.rects.iter().rev().find(|r| r.contains(x, y)).map_or(self.background, |r| r.n)
    }

    pub fn window(&self) -> [f64; 4] {
        self.window
    }

    pub fn core(&self) -> [f64; 4] {
        self.core
    }

    pub fn steps(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }

    pub fn max_index(&self) -> f64 {
        self.rects.iter().map(|r| r.n).fold(self.background, f64::max)
    }

    /// Largest index of the bulk claddings, sampled at the window corners.
    /// Thin films reaching the window edge do not count: a ridge mode may
    /// sit below their bulk index.
    pub fn cladding_index(&self) -> f64 {
        let [x0, x1, y0, y1] = self.window;
        let e = 1e-9;
        [(x0, y0), (x1 - e, y0), (x0, y1 - e), (x1 - e, y1 - e)]
            .iter()
            .map(|&(x, y)| self.index_at(x, y))
            .fold(1.0, f64::max)
    }

    /// Permittivity averaged over the cell centred on `(x, y)`.
    pub(crate) fn cell_permittivity(&self, x: f64, y: f64) -> f64 {
        const SUB: usize = 8;
        let mut acc = 0.0;
        for a in 0..SUB {
            for b in 0..SUB {
                let px = x + self.dx * ((a as f64 + 0.5) / SUB as f64 - 0.5);
                let py = y + self.dy * ((b as f64 + 0.5) / SUB as f64 - 0.5);
                acc += self.index_at(px, py).powi(2);
            }
        }
        acc / (SUB * SUB) as f64
    }

    /// Copy with the window widened by `extra` nm on every side.
    pub fn expanded(&self, extra: f64) -> Result<Self> {
        let [x0, x1, y0, y1] = self.window;
        CrossSection::new(
            self.background,
            self.rects.clone(),
            [x0 - extra, x1 + extra, y0 - extra, y1 + extra],
            self.core,
            self.dx,
            self.dy,
        )
    }

    pub fn with_steps(&self, dx: f64, dy: f64) -> Result<Self> {
        CrossSection::new(self.background, self.rects.clone(), self.window, self.core, dx, dy)
    }

    /// Uniform medium over a window of the given half-widths.
    pub fn uniform(n: f64, half_width: f64, half_height: f64, step: f64) -> Result<Self> {
        CrossSection::new(n, Vec::new(), [-half_width, half_width, -half_height, half_height], [0.0; 4], step, step)
    }
}
