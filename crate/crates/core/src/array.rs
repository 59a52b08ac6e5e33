//! URA geometry, steering vectors and far-field pattern evaluation.
//!
//! Elements sit in the yoz plane. Element `l = m * n_z + n` (0-based, `m`
//! along y, `n` along z) responds to direction (zenith θ, azimuth φ) with
//! phase `k d (m sinθ sinφ + n cosθ)`. The array factor of a weight vector
//! `f` is `g(θ, φ) = Σ_l f_l e^{j k d (m sinθ sinφ + n cosθ)}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::BeamPattern;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Lowest representable pattern value in dB relative to the peak.
pub const DB_FLOOR: f64 = -60.0;

/// Uniform rectangular array geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// Elements along y (horizontal).
    pub n_y: usize,
    /// Elements along z (vertical).
    pub n_z: usize,
    /// Element spacing in meters.
    pub spacing: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// RF chains available to hybrid architectures.
    pub n_rf: usize,
}

impl ArrayConfig {
    pub fn new(n_y: usize, n_z: usize, spacing: f64, wavelength: f64, n_rf: usize) -> Result<Self> {
        let cfg = Self {
            n_y,
            n_z,
            spacing,
            wavelength,
            n_rf,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Half-wavelength spaced array at the given carrier frequency.
    pub fn half_wavelength(n_y: usize, n_z: usize, n_rf: usize, carrier_hz: f64) -> Result<Self> {
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        Self::new(n_y, n_z, wavelength / 2.0, wavelength, n_rf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_y == 0 || self.n_z == 0 {
            return Err(Error::InvalidConfig("element counts must be at least 1".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidConfig("spacing must be positive".into()));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::InvalidConfig("wavelength must be positive".into()));
        }
        if self.n_rf == 0 || self.n_rf > self.n_t() {
            return Err(Error::InvalidConfig(format!(
                "n_rf must lie in 1..={}, got {}",
                self.n_t(),
                self.n_rf
            )));
        }
        Ok(())
    }

    /// Total element count `n_y * n_z`.
    pub fn n_t(&self) -> usize {
        self.n_y * self.n_z
    }

    /// `2π / λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub(crate) fn kd(&self) -> f64 {
        self.wavenumber() * self.spacing
    }
}

impl Default for ArrayConfig {
    /// 16×16 half-wavelength URA at 28 GHz with two RF chains.
    fn default() -> Self {
        Self::half_wavelength(16, 16, 2, 28.0e9).expect("default array is valid")
    }
}

/// Zenith/azimuth sampling grid in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct AngleGrid {
    zeniths: Vec<f64>,
    azimuths: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    zeniths: Vec<f64>,
    azimuths: Vec<f64>,
}

impl TryFrom<RawGrid> for AngleGrid {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        AngleGrid::new(raw.zeniths, raw.azimuths)
    }
}

impl From<AngleGrid> for RawGrid {
    fn from(g: AngleGrid) -> Self {
        RawGrid {
            zeniths: g.zeniths,
            azimuths: g.azimuths,
        }
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} axis is empty")));
    }
    if axis.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} axis has non-finite entries")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

impl AngleGrid {
    pub fn new(zeniths: Vec<f64>, azimuths: Vec<f64>) -> Result<Self> {
        check_axis("zenith", &zeniths)?;
        check_axis("azimuth", &azimuths)?;
        Ok(Self { zeniths, azimuths })
    }

    /// Inclusive uniform grid; both axes share `step`.
    pub fn uniform(zenith: (f64, f64), azimuth: (f64, f64), step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidConfig("grid step must be positive".into()));
        }
        let axis = |lo: f64, hi: f64| -> Vec<f64> {
            let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| lo + i as f64 * step).collect()
        };
        Self::new(axis(zenith.0, zenith.1), axis(azimuth.0, azimuth.1))
    }

    /// H, the number of zenith samples (rows).
    pub fn height(&self) -> usize {
        self.zeniths.len()
    }

    /// W, the number of azimuth samples (columns).
    pub fn width(&self) -> usize {
        self.azimuths.len()
    }

    pub fn len(&self) -> usize {
        self.height() * self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeniths(&self) -> &[f64] {
        &self.zeniths
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    /// Row-major flat index of (zenith index, azimuth index).
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.width() + j
    }

    /// Direction (zenith, azimuth) in degrees of a flat index.
    pub fn direction(&self, idx: usize) -> (f64, f64) {
        let w = self.width();
        (self.zeniths[idx / w], self.azimuths[idx % w])
    }

    /// Grid indices nearest to a direction; ties go to the lower index.
    pub fn nearest(&self, zenith: f64, azimuth: f64) -> (usize, usize) {
        (nearest_on(&self.zeniths, zenith), nearest_on(&self.azimuths, azimuth))
    }

    /// Common step of both axes when the grid is uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        let step_of = |axis: &[f64]| -> Option<f64> {
            if axis.len() < 2 {
                return None;
            }
            let s = axis[1] - axis[0];
            axis.windows(2)
                .all(|w| ((w[1] - w[0]) - s).abs() <= 1e-9 * s.abs().max(1.0))
                .then_some(s)
        };
        match (step_of(&self.zeniths), step_of(&self.azimuths)) {
            (Some(a), Some(b)) if (a - b).abs() <= 1e-9 => Some(a),
            (Some(a), None) if self.azimuths.len() == 1 => Some(a),
            (None, Some(b)) if self.zeniths.len() == 1 => Some(b),
            _ => None,
        }
    }

    pub fn zenith_range(&self) -> (f64, f64) {
        (self.zeniths[0], *self.zeniths.last().unwrap())
    }

    pub fn azimuth_range(&self) -> (f64, f64) {
        (self.azimuths[0], *self.azimuths.last().unwrap())
    }
}

fn nearest_on(axis: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &a) in axis.iter().enumerate() {
        let d = (a - x).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

impl Default for AngleGrid {
    /// Zenith 1°..180°, azimuth −89°..90°, 1° step (180 × 180).
    fn default() -> Self {
        Self::uniform((1.0, 180.0), (-89.0, 90.0), 1.0).expect("default grid is valid")
    }
}

/// Array response toward (zenith, azimuth) in degrees.
pub fn steering_vector(cfg: &ArrayConfig, zenith: f64, azimuth: f64) -> Vec<Complex64> {
    let (sin_t, cos_t) = zenith.to_radians().sin_cos();
    let sin_p = azimuth.to_radians().sin();
    let kd = cfg.kd();
    let mut v = Vec::with_capacity(cfg.n_t());
    for m in 0..cfg.n_y {
        for n in 0..cfg.n_z {
            let phase = kd * (m as f64 * sin_t * sin_p + n as f64 * cos_t);
            v.push(Complex64::cis(phase));
        }
    }
    v
}

/// Steering vectors of every grid direction, one column per direction.
#[derive(Debug, Clone)]
pub struct SteeringMatrix {
    n_t: usize,
    n_dirs: usize,
    /// Column-major: column `c` occupies `data[c * n_t..(c + 1) * n_t]`.
    data: Vec<Complex64>,
}

impl SteeringMatrix {
    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_dirs(&self) -> usize {
        self.n_dirs
    }

    pub fn column(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.n_t..(c + 1) * self.n_t]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.data.chunks_exact(self.n_t)
    }

    /// Builds a matrix from explicit columns.
    pub fn from_columns(n_t: usize, columns: Vec<Vec<Complex64>>) -> Result<Self> {
        let n_dirs = columns.len();
        let mut data = Vec::with_capacity(n_t * n_dirs);
        for col in columns {
            if col.len() != n_t {
                return Err(Error::DimensionMismatch {
                    what: "steering column",
                    expected: n_t,
                    actual: col.len(),
                });
            }
            data.extend(col);
        }
        Ok(Self { n_t, n_dirs, data })
    }
}

/// Stacks `steering_vector` for every grid direction, row-major over
/// (zenith index, azimuth index).
pub fn build_steering_matrix(cfg: &ArrayConfig, grid: &AngleGrid) -> Result<SteeringMatrix> {
    let n_t = cfg.n_t();
    let n_dirs = grid.len();
    let total = n_t
        .checked_mul(n_dirs)
        .ok_or_else(|| Error::Resource("steering matrix size overflows".into()))?;
    let mut data: Vec<Complex64> = Vec::new();
    data.try_reserve_exact(total)
        .map_err(|e| Error::Resource(format!("steering matrix allocation: {e}")))?;
    data.resize(total, Complex64::new(0.0, 0.0));
    data.par_chunks_mut(n_t).enumerate().for_each(|(c, col)| {
        let (zen, az) = grid.direction(c);
        col.copy_from_slice(&steering_vector(cfg, zen, az));
    });
    Ok(SteeringMatrix { n_t, n_dirs, data })
}

/// Separable evaluation tables for fast array-factor sums on a fixed grid.
///
/// The URA phase splits into a zenith-only z term and a per-direction y
/// term, so `g(i, j) = Σ_m Y[i,j,m] Σ_n f[m, n] Z[i, n]`. Both the forward
/// sum and its adjoint cost `O(H W n_y + H n_t)` instead of `O(H W n_t)`.
#[derive(Debug, Clone)]
pub struct ArrayResponse {
    n_y: usize,
    n_z: usize,
    height: usize,
    width: usize,
    /// `Z[i * n_z + n] = e^{j k d n cosθ_i}`
    zen: Vec<Complex64>,
    /// `Y[(i * W + j) * n_y + m] = e^{j k d m sinθ_i sinφ_j}`
    az: Vec<Complex64>,
}

impl ArrayResponse {
    pub fn new(cfg: &ArrayConfig, grid: &AngleGrid) -> Self {
        let (n_y, n_z) = (cfg.n_y, cfg.n_z);
        let (height, width) = (grid.height(), grid.width());
        let kd = cfg.kd();
        let mut zen = Vec::with_capacity(height * n_z);
        for &t in grid.zeniths() {
            let cos_t = t.to_radians().cos();
            zen.extend((0..n_z).map(|n| Complex64::cis(kd * (n as f64 * cos_t))));
        }
        let sin_p: Vec<f64> = grid.azimuths().iter().map(|p| p.to_radians().sin()).collect();
        let mut az = vec![Complex64::new(0.0, 0.0); height * width * n_y];
        az.par_chunks_mut(width * n_y)
            .zip(grid.zeniths().par_iter())
            .for_each(|(row, &t)| {
                let sin_t = t.to_radians().sin();
                for (j, cell) in row.chunks_exact_mut(n_y).enumerate() {
                    for (m, e) in cell.iter_mut().enumerate() {
                        *e = Complex64::cis(kd * (m as f64 * sin_t * sin_p[j]));
                    }
                }
            });
        Self {
            n_y,
            n_z,
            height,
            width,
            zen,
            az,
        }
    }

    pub fn n_t(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn n_cells(&self) -> usize {
        self.height * self.width
    }

    /// Complex array factor at every grid cell, row-major.
    pub fn field(&self, f: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.n_t(), "weight vector length");
        let (n_y, n_z, width) = (self.n_y, self.n_z, self.width);
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_cells()];
        out.par_chunks_mut(width).enumerate().for_each(|(i, row)| {
            let z = &self.zen[i * n_z..(i + 1) * n_z];
            let b: Vec<Complex64> = (0..n_y)
                .map(|m| f[m * n_z..(m + 1) * n_z].iter().zip(z).map(|(a, b)| a * b).sum())
                .collect();
            let y_row = &self.az[i * width * n_y..(i + 1) * width * n_y];
            for (g, y) in row.iter_mut().zip(y_row.chunks_exact(n_y)) {
                *g = y.iter().zip(&b).map(|(a, b)| a * b).sum();
            }
        });
        out
    }

    /// Adjoint of [`field`](Self::field): `γ_l = Σ_c w_c conj(a_l(c))`.
    ///
    /// Rows are reduced in a fixed order, so the result does not depend on
    /// thread scheduling.
    pub fn adjoint(&self, weights: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(weights.len(), self.n_cells(), "cell weight length");
        let (n_y, n_z, width) = (self.n_y, self.n_z, self.width);
        let per_row: Vec<Vec<Complex64>> = (0..self.height)
            .into_par_iter()
            .map(|i| {
                let y_row = &self.az[i * width * n_y..(i + 1) * width * n_y];
                let w_row = &weights[i * width..(i + 1) * width];
                let mut e = vec![Complex64::new(0.0, 0.0); n_y];
                for (w, y) in w_row.iter().zip(y_row.chunks_exact(n_y)) {
                    if *w == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for (acc, ym) in e.iter_mut().zip(y) {
                        *acc += w * ym.conj();
                    }
                }
                e
            })
            .collect();
        let mut gamma = vec![Complex64::new(0.0, 0.0); self.n_t()];
        for (i, e) in per_row.iter().enumerate() {
            let z = &self.zen[i * n_z..(i + 1) * n_z];
            for m in 0..n_y {
                for n in 0..n_z {
                    gamma[m * n_z + n] += e[m] * z[n].conj();
                }
            }
        }
        gamma
    }
}

fn check_weights(cfg: &ArrayConfig, f: &[Complex64]) -> Result<()> {
    if f.len() != cfg.n_t() {
        return Err(Error::DimensionMismatch {
            what: "beamforming vector",
            expected: cfg.n_t(),
            actual: f.len(),
        });
    }
    if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Degenerate("beamforming vector has non-finite entries".into()));
    }
    if f.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::Degenerate("beamforming vector is identically zero".into()));
    }
    Ok(())
}

/// Peak-normalized dB pattern of `f` on `grid`.
pub fn compute_pattern(cfg: &ArrayConfig, grid: &AngleGrid, f: &[Complex64]) -> Result<BeamPattern> {
    check_weights(cfg, f)?;
    let response = ArrayResponse::new(cfg, grid);
    pattern_with(&response, grid, f)
}

/// Same as [`compute_pattern`] with prebuilt tables.
pub fn pattern_with(response: &ArrayResponse, grid: &AngleGrid, f: &[Complex64]) -> Result<BeamPattern> {
    if f.len() != response.n_t() {
        return Err(Error::DimensionMismatch {
            what: "beamforming vector",
            expected: response.n_t(),
            actual: f.len(),
        });
    }
    if response.n_cells() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let mags: Vec<f64> = response.field(f).iter().map(|g| g.norm()).collect();
    BeamPattern::from_magnitudes(std::sync::Arc::new(grid.clone()), &mags)
}
