//! Parallel-beam projection matrix by exact ray/pixel intersection.
//!
//! The image is a `g × g` grid of square pixels of side `h` centred at the
//! origin; pixel `(row, col)` has index `row · g + col`, row 0 at the top.
//! Projection angle `a` is `a · angle_step` degrees, the ray direction is
//! `(cos θ, sin θ)` and detector `d` sits at signed offset
//! `−R + (d + ½)·2R/n_det` along `(−sin θ, cos θ)`, where `R` is the radius of
//! the circle circumscribing the grid. Sinogram row `(a, d)` is `a · n_det + d`.

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadonGeometry {
    pub grid_side: usize,
    pub n_angles: usize,
    /// Degrees between consecutive projection angles.
    pub angle_step: f64,
    pub n_detectors: usize,
    pub pixel_size: f64,
}

impl RadonGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side == 0 || self.n_angles == 0 || self.n_detectors == 0 {
            return Err(Error::Config(
                "grid side, angle and detector counts must be ≥ 1".into(),
            ));
        }
        if !(self.pixel_size.is_finite() && self.pixel_size > 0.0) {
            return Err(Error::Config(format!(
                "pixel size {} must be positive",
                self.pixel_size
            )));
        }
        if !(self.angle_step.is_finite() && self.angle_step >= 0.0) {
            return Err(Error::Config(format!(
                "angle step {} must be ≥ 0",
                self.angle_step
            )));
        }
        let coverage = (self.n_angles - 1) as f64 * self.angle_step;
        if coverage > 180.0 + 1e-9 {
            return Err(Error::Config(format!(
                "angular coverage {coverage}° exceeds 180°"
            )));
        }
        Ok(())
    }

    pub fn n_rays(&self) -> usize {
        self.n_angles * self.n_detectors
    }

    pub fn n_pixels(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// Half the side length of the square image domain.
    pub fn half_width(&self) -> f64 {
        0.5 * self.grid_side as f64 * self.pixel_size
    }

    pub fn detector_radius(&self) -> f64 {
        self.half_width() * std::f64::consts::SQRT_2
    }

    pub fn angle_radians(&self, a: usize) -> f64 {
        (a as f64 * self.angle_step).to_radians()
    }

    pub fn detector_offset(&self, d: usize) -> f64 {
        let r = self.detector_radius();
        -r + (d as f64 + 0.5) * 2.0 * r / self.n_detectors as f64
    }

    /// Exact values at multiples of 90°, so rays along grid lines pick the same
    /// pixels for opposite directions.
    fn direction_sin_cos(&self, a: usize) -> (f64, f64) {
        let deg = a as f64 * self.angle_step;
        let quarter = deg / 90.0;
        if quarter == quarter.round() {
            match (quarter as i64).rem_euclid(4) {
                0 => (0.0, 1.0),
                1 => (1.0, 0.0),
                2 => (0.0, -1.0),
                _ => (-1.0, 0.0),
            }
        } else {
            self.angle_radians(a).sin_cos()
        }
    }

    /// Point on ray `(a, d)` closest to the origin, and the unit direction.
    pub fn ray(&self, a: usize, d: usize) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.direction_sin_cos(a);
        let off = self.detector_offset(d);
        ([-s * off, c * off], [c, s])
    }
}

/// Dense system matrix of size `(n_angles · n_detectors) × grid_side²`.
/// Entries are physical intersection lengths; rays missing the grid give zero rows.
pub fn build_radon_operator(geom: &RadonGeometry) -> Result<Matrix> {
    geom.validate()?;
    let g = geom.grid_side;
    let mut m = Matrix::zeros(geom.n_rays(), geom.n_pixels());
    let mut hits = Vec::new();
    for a in 0..geom.n_angles {
        for d in 0..geom.n_detectors {
            let (origin, dir) = geom.ray(a, d);
            trace_ray(geom, origin, dir, &mut hits);
            let row = m.row_mut(a * geom.n_detectors + d);
            for &(pix, len) in &hits {
                row[pix] += len;
            }
        }
    }
    debug_assert_eq!(m.cols(), g * g);
    Ok(m)
}

/// Siddon traversal: collects `(pixel index, length)` for every pixel the ray crosses.
fn trace_ray(geom: &RadonGeometry, origin: [f64; 2], dir: [f64; 2], hits: &mut Vec<(usize, f64)>) {
    hits.clear();
    let g = geom.grid_side;
    let h = geom.pixel_size;
    let half = geom.half_width();
    const PARALLEL: f64 = 1e-12;

    // Parameter interval inside the square.
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for ax in 0..2 {
        if dir[ax].abs() < PARALLEL {
            if origin[ax] < -half || origin[ax] > half {
                return;
            }
        } else {
            let t0 = (-half - origin[ax]) / dir[ax];
            let t1 = (half - origin[ax]) / dir[ax];
            t_min = t_min.max(t0.min(t1));
            t_max = t_max.min(t0.max(t1));
        }
    }
    if t_max - t_min <= 0.0 {
        return;
    }

    // Crossings with the interior grid lines of each axis.
    let mut ts = vec![t_min, t_max];
    for ax in 0..2 {
        if dir[ax].abs() < PARALLEL {
            continue;
        }
        for k in 1..g {
            let line = -half + k as f64 * h;
            let t = (line - origin[ax]) / dir[ax];
            if t > t_min && t < t_max {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).expect("finite ray parameters"));

    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-14 * h {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let x = origin[0] + tm * dir[0];
        let y = origin[1] + tm * dir[1];
        let col = ((x + half) / h).floor();
        let row = ((half - y) / h).floor();
        if col < 0.0 || row < 0.0 {
            continue;
        }
        let (col, row) = (col as usize, row as usize);
        if col < g && row < g {
            hits.push((row * g + col, len));
        }
    }
}

/// Disks `(centre x, centre y, radius, intensity)` in units of the image side,
/// with `y` measured from the top row.
pub const PHANTOM_DISKS: [(f64, f64, f64, f64); 5] = [
    (0.30, 0.35, 0.08, 1.0),
    (0.65, 0.30, 0.06, 2.0),
    (0.50, 0.65, 0.10, 1.0),
    (0.25, 0.70, 0.05, 2.0),
    (0.72, 0.70, 0.06, 1.0),
];

/// Row-major `g × g` image of disjoint constant disks on a zero background.
pub fn sparse_disk_phantom(grid_side: usize) -> Result<Vec<f64>> {
    if grid_side < 16 {
        return Err(Error::Config(format!(
            "phantom grid side {grid_side} must be at least 16"
        )));
    }
    let g = grid_side as f64;
    let mut img = vec![0.0; grid_side * grid_side];
    for row in 0..grid_side {
        for col in 0..grid_side {
            let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
            for &(cx, cy, r, v) in &PHANTOM_DISKS {
                let (dx, dy) = (px - cx * g, py - cy * g);
                if dx * dx + dy * dy <= (r * g) * (r * g) {
                    img[row * grid_side + col] = v;
                }
            }
        }
    }
    Ok(img)
}
