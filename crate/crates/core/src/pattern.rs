//! Beam patterns, region segmentation and synthetic target generation.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{compute_pattern, AngleGrid, ArrayConfig, DB_FLOOR};
use crate::error::{Error, Result};

/// Cells at or above this level (dB) belong to the main lobe.
pub const MAIN_LOBE_DB: f64 = -10.0;
/// Cells strictly below this level (dB) belong to the side-lobe region.
pub const SIDE_LOBE_DB: f64 = -20.0;

/// Peak-normalized pattern in dB on an angle grid, row-major (zenith rows,
/// azimuth columns). The peak is 0 dB and every value lies in [-60, 0].
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    grid: Arc<AngleGrid>,
    values: Vec<f64>,
}

impl BeamPattern {
    /// Converts raw array-factor magnitudes to `20 log10(g / max g)`,
    /// floored at [`DB_FLOOR`].
    pub fn from_magnitudes(grid: Arc<AngleGrid>, mags: &[f64]) -> Result<Self> {
        if mags.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "pattern cells",
                expected: grid.len(),
                actual: mags.len(),
            });
        }
        let peak = mags.iter().copied().fold(0.0f64, f64::max);
        if !(peak.is_finite() && peak > 0.0) {
            return Err(Error::Degenerate("pattern has no positive finite peak".into()));
        }
        let values = mags.iter().map(|&g| magnitude_to_db(g, peak)).collect();
        Ok(Self { grid, values })
    }

    /// Accepts dB values, shifting them so the peak is 0 dB and flooring at
    /// [`DB_FLOOR`].
    pub fn from_db(grid: Arc<AngleGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "pattern cells",
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Degenerate("pattern has NaN or +inf entries".into()));
        }
        let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::Degenerate("pattern has no finite peak".into()));
        }
        let values = values.into_iter().map(|v| (v - peak).max(DB_FLOOR)).collect();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<AngleGrid> {
        Arc::clone(&self.grid)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn same_grid(&self, other: &BeamPattern) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Flat index of the (first) 0 dB cell.
    pub fn peak_index(&self) -> usize {
        self.values
            .iter()
            .position(|&v| v == 0.0)
            .expect("normalized pattern has a 0 dB cell")
    }
}

pub(crate) fn magnitude_to_db(g: f64, peak: f64) -> f64 {
    let db = 20.0 * (g / peak).log10();
    if db.is_nan() || db < DB_FLOOR {
        DB_FLOOR
    } else {
        db
    }
}

/// Region label of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    MainLobe,
    Moderate,
    SideLobe,
}

impl Region {
    pub fn of(db: f64) -> Region {
        if db >= MAIN_LOBE_DB {
            Region::MainLobe
        } else if db < SIDE_LOBE_DB {
            Region::SideLobe
        } else {
            Region::Moderate
        }
    }
}

/// Partition of the grid into main-lobe (M), moderate (T) and side-lobe (S)
/// index sets, derived from a target pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    labels: Vec<Region>,
    main_lobe: Vec<usize>,
    moderate: Vec<usize>,
    side_lobe: Vec<usize>,
}

impl RegionMask {
    /// Builds a mask from explicit per-cell labels.
    pub fn from_labels(labels: Vec<Region>) -> Self {
        let mut main_lobe = Vec::new();
        let mut moderate = Vec::new();
        let mut side_lobe = Vec::new();
        for (idx, r) in labels.iter().enumerate() {
            match r {
                Region::MainLobe => main_lobe.push(idx),
                Region::Moderate => moderate.push(idx),
                Region::SideLobe => side_lobe.push(idx),
            }
        }
        Self {
            labels,
            main_lobe,
            moderate,
            side_lobe,
        }
    }

    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    pub fn main_lobe(&self) -> &[usize] {
        &self.main_lobe
    }

    pub fn moderate(&self) -> &[usize] {
        &self.moderate
    }

    pub fn side_lobe(&self) -> &[usize] {
        &self.side_lobe
    }

    pub fn n_ml(&self) -> usize {
        self.main_lobe.len()
    }

    pub fn n_md(&self) -> usize {
        self.moderate.len()
    }

    pub fn n_sl(&self) -> usize {
        self.side_lobe.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Thresholds the target into M (≥ −10 dB), T (−20 ≤ x < −10 dB) and
/// S (< −20 dB).
pub fn segment_regions(target: &BeamPattern) -> RegionMask {
    RegionMask::from_labels(target.values.iter().map(|&v| Region::of(v)).collect())
}

/// Main-lobe geometry of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetShape {
    /// A single 0 dB cell.
    Pencil,
    /// Isosceles triangle: base along azimuth, apex toward increasing zenith.
    Triangular { base_deg: f64, height_deg: f64 },
    /// Axis-aligned rectangle.
    FlatTop { width_deg: f64, height_deg: f64 },
    /// Pattern of a given beamformer; see [`target_from_beamformer`].
    FromBeamformer,
    /// Pattern read from a CSV grid.
    FromFile,
}

/// Description of a synthetic target pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub shape: TargetShape,
    #[serde(default = "default_center_zenith")]
    pub center_zenith_deg: f64,
    #[serde(default)]
    pub center_azimuth_deg: f64,
    #[serde(default = "default_side_lobe")]
    pub side_lobe_db: f64,
    /// Width of the linear 0 → −10 dB edge taper, in degrees.
    #[serde(default = "default_taper")]
    pub taper_deg: f64,
}

fn default_center_zenith() -> f64 {
    90.0
}

fn default_side_lobe() -> f64 {
    -25.0
}

fn default_taper() -> f64 {
    3.0
}

impl TargetSpec {
    /// Triangular main lobe with base 40° and height 30° at broadside and a
    /// −25 dB side-lobe level.
    pub fn triangle_40x30() -> Self {
        Self {
            shape: TargetShape::Triangular {
                base_deg: 40.0,
                height_deg: 30.0,
            },
            center_zenith_deg: 90.0,
            center_azimuth_deg: 0.0,
            side_lobe_db: -25.0,
            taper_deg: 3.0,
        }
    }

    pub fn pencil(center_zenith_deg: f64, center_azimuth_deg: f64, side_lobe_db: f64) -> Self {
        Self {
            shape: TargetShape::Pencil,
            center_zenith_deg,
            center_azimuth_deg,
            side_lobe_db,
            taper_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.center_zenith_deg,
            self.center_azimuth_deg,
            self.side_lobe_db,
            self.taper_deg,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite parameter".into()));
        }
        if self.side_lobe_db >= MAIN_LOBE_DB {
            return Err(Error::InvalidSpec(format!(
                "side-lobe level must be below {MAIN_LOBE_DB} dB, got {}",
                self.side_lobe_db
            )));
        }
        if self.taper_deg < 0.0 {
            return Err(Error::InvalidSpec("taper width must be non-negative".into()));
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be positive")))
            }
        };
        match self.shape {
            TargetShape::Triangular { base_deg, height_deg } => {
                positive("base", base_deg)?;
                positive("height", height_deg)?;
            }
            TargetShape::FlatTop { width_deg, height_deg } => {
                positive("width", width_deg)?;
                positive("height", height_deg)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Main-lobe polygon as (azimuth, zenith) vertices in counter-clockwise
    /// order, or `None` for shapes without a polygon.
    fn polygon(&self) -> Option<Vec<(f64, f64)>> {
        let (cz, ca) = (self.center_zenith_deg, self.center_azimuth_deg);
        match self.shape {
            TargetShape::Triangular { base_deg, height_deg } => {
                let base_z = cz - height_deg / 2.0;
                Some(vec![
                    (ca - base_deg / 2.0, base_z),
                    (ca + base_deg / 2.0, base_z),
                    (ca, cz + height_deg / 2.0),
                ])
            }
            TargetShape::FlatTop { width_deg, height_deg } => {
                let (hw, hh) = (width_deg / 2.0, height_deg / 2.0);
                Some(vec![
                    (ca - hw, cz - hh),
                    (ca + hw, cz - hh),
                    (ca + hw, cz + hh),
                    (ca - hw, cz + hh),
                ])
            }
            _ => None,
        }
    }
}

/// Euclidean distance (degrees) from `p` to a convex CCW polygon; zero inside.
pub(crate) fn distance_outside(poly: &[(f64, f64)], p: (f64, f64)) -> f64 {
    let n = poly.len();
    let inside = (0..n).all(|k| {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0
    });
    if inside {
        return 0.0;
    }
    (0..n)
        .map(|k| segment_distance(poly[k], poly[(k + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

fn check_inside_grid(grid: &AngleGrid, zen: f64, az: f64) -> Result<()> {
    let (z0, z1) = grid.zenith_range();
    let (a0, a1) = grid.azimuth_range();
    if zen < z0 || zen > z1 || az < a0 || az > a1 {
        return Err(Error::InvalidSpec(format!(
            "point (zenith {zen}, azimuth {az}) lies outside the grid"
        )));
    }
    Ok(())
}

/// Generates a synthetic target pattern (pencil, triangular or flat-top).
///
/// Cells inside the main-lobe polygon are 0 dB; cells within `taper_deg` of
/// it fall linearly from 0 to −10 dB; the rest sit at the side-lobe level.
pub fn make_target(spec: &TargetSpec, grid: &AngleGrid) -> Result<BeamPattern> {
    spec.validate()?;
    let shared = Arc::new(grid.clone());
    let sll = spec.side_lobe_db.max(DB_FLOOR);
    match spec.shape {
        TargetShape::Pencil => {
            check_inside_grid(grid, spec.center_zenith_deg, spec.center_azimuth_deg)?;
            let (i, j) = grid.nearest(spec.center_zenith_deg, spec.center_azimuth_deg);
            let mut values = vec![sll; grid.len()];
            values[grid.index(i, j)] = 0.0;
            BeamPattern::from_db(shared, values)
        }
        TargetShape::Triangular { .. } | TargetShape::FlatTop { .. } => {
            let poly = spec.polygon().expect("polygon shapes");
            for &(az, zen) in &poly {
                check_inside_grid(grid, zen, az)?;
            }
            let values = (0..grid.len())
                .map(|idx| {
                    let (zen, az) = grid.direction(idx);
                    let d = distance_outside(&poly, (az, zen));
                    if d == 0.0 {
                        0.0
                    } else if d <= spec.taper_deg {
                        MAIN_LOBE_DB * d / spec.taper_deg
                    } else {
                        sll
                    }
                })
                .collect();
            BeamPattern::from_db(shared, values)
        }
        TargetShape::FromBeamformer | TargetShape::FromFile => Err(Error::InvalidSpec(
            "shape is not synthetic; use target_from_beamformer or load the file".into(),
        )),
    }
}

/// Target derived from a beamforming vector (e.g. the MRT vector of a
/// channel); identical to [`compute_pattern`].
pub fn target_from_beamformer(cfg: &ArrayConfig, grid: &AngleGrid, f: &[Complex64]) -> Result<BeamPattern> {
    compute_pattern(cfg, grid, f)
}
