//! Clustered multipath channel generation and channel file I/O.
//!
//! A channel is `h = Σ_p α_p conj(a(θ_p, φ_p))`, so the matched beamformer
//! `h / ‖h‖` peaks at the path departure angles.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, AngleGrid, ArrayConfig};
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, laplace, rng_for};

/// One propagation path: linear complex gain and departure angles (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub gain_re: f64,
    pub gain_im: f64,
    pub zenith_deg: f64,
    pub azimuth_deg: f64,
}

impl PathParams {
    pub fn new(gain: Complex64, zenith_deg: f64, azimuth_deg: f64) -> Self {
        Self {
            gain_re: gain.re,
            gain_im: gain.im,
            zenith_deg,
            azimuth_deg,
        }
    }

    pub fn gain(&self) -> Complex64 {
        Complex64::new(self.gain_re, self.gain_im)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    h: Vec<Complex64>,
    paths: Vec<PathParams>,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn synthesize_h(cfg: &ArrayConfig, paths: &[PathParams]) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(0.0, 0.0); cfg.n_t()];
    for p in paths {
        let a = steering_vector(cfg, p.zenith_deg, p.azimuth_deg);
        let g = p.gain();
        for (hl, al) in h.iter_mut().zip(&a) {
            *hl += g * al.conj();
        }
    }
    h
}

impl Channel {
    /// Channel without path metadata.
    pub fn new(h: Vec<Complex64>) -> Result<Self> {
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Degenerate("channel has non-finite entries".into()));
        }
        if norm(&h) == 0.0 {
            return Err(Error::Degenerate("channel vector is zero".into()));
        }
        Ok(Self { h, paths: Vec::new() })
    }

    pub fn from_paths(cfg: &ArrayConfig, paths: Vec<PathParams>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidConfig("a channel needs at least one path".into()));
        }
        if let Some(p) = paths.iter().find(|p| p.gain().norm() == 0.0) {
            return Err(Error::Degenerate(format!(
                "path toward ({}, {}) has zero gain",
                p.zenith_deg, p.azimuth_deg
            )));
        }
        let mut ch = Self::new(synthesize_h(cfg, &paths))?;
        ch.paths = paths;
        Ok(ch)
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }

    pub fn paths(&self) -> &[PathParams] {
        &self.paths
    }

    pub fn n_t(&self) -> usize {
        self.h.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.h)
    }

    /// Relative distance between `h` and its reconstruction from the paths.
    pub fn reconstruction_error(&self, cfg: &ArrayConfig) -> Option<f64> {
        if self.paths.is_empty() {
            return None;
        }
        let rebuilt = synthesize_h(cfg, &self.paths);
        let diff: f64 = self
            .h
            .iter()
            .zip(&rebuilt)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        Some(diff / self.norm())
    }
}

/// Parameters of the clustered channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModelConfig {
    /// Inclusive range of paths per channel.
    pub paths: (usize, usize),
    /// Inclusive range of clusters per channel (capped by the path count).
    pub clusters: (usize, usize),
    /// Probability that the first path is line-of-sight (fixed amplitude).
    pub los_probability: f64,
    /// Mean power drop from one path to the next.
    pub decay_db_per_path: f64,
    /// Laplacian scale of path angles around their cluster center.
    pub angle_spread_deg: f64,
    pub zenith_range_deg: (f64, f64),
    pub azimuth_range_deg: (f64, f64),
    pub seed: u64,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        let grid = AngleGrid::default();
        Self {
            paths: (3, 5),
            clusters: (1, 3),
            los_probability: 0.5,
            decay_db_per_path: 8.0,
            angle_spread_deg: 5.0,
            zenith_range_deg: grid.zenith_range(),
            azimuth_range_deg: grid.azimuth_range(),
            seed: 0,
        }
    }
}

impl ChannelModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.paths.0 == 0 || self.paths.0 > self.paths.1 {
            return bad("path count range must satisfy 1 <= min <= max");
        }
        if self.clusters.0 == 0 || self.clusters.0 > self.clusters.1 {
            return bad("cluster count range must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.los_probability) {
            return bad("LOS probability must lie in [0, 1]");
        }
        if !self.decay_db_per_path.is_finite() || !(self.angle_spread_deg >= 0.0) {
            return bad("decay must be finite and angle spread non-negative");
        }
        for (lo, hi) in [self.zenith_range_deg, self.azimuth_range_deg] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad("angle ranges must be finite with lo <= hi");
            }
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<PathParams> {
        let n_paths = rng.random_range(self.paths.0..=self.paths.1);
        let n_clusters = rng.random_range(self.clusters.0..=self.clusters.1).min(n_paths);
        let (z_lo, z_hi) = self.zenith_range_deg;
        let (a_lo, a_hi) = self.azimuth_range_deg;
        let uniform = |rng: &mut R, lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
        let centers: Vec<(f64, f64)> = (0..n_clusters)
            .map(|_| (uniform(rng, z_lo, z_hi), uniform(rng, a_lo, a_hi)))
            .collect();
        let powers: Vec<f64> = (0..n_paths)
            .map(|p| 10f64.powf(-self.decay_db_per_path * p as f64 / 10.0))
            .collect();
        let total: f64 = powers.iter().sum();
        let los = rng.random::<f64>() < self.los_probability;
        (0..n_paths)
            .map(|p| {
                let amp = (powers[p] / total).sqrt();
                let gain = if p == 0 && los {
                    Complex64::from_polar(amp, std::f64::consts::TAU * rng.random::<f64>())
                } else {
                    amp * complex_gaussian(rng)
                };
                let (zc, ac) = centers[p % n_clusters];
                let zenith = (zc + laplace(rng, self.angle_spread_deg)).clamp(z_lo, z_hi);
                let azimuth = (ac + laplace(rng, self.angle_spread_deg)).clamp(a_lo, a_hi);
                PathParams::new(gain, zenith, azimuth)
            })
            .collect()
    }
}

/// `count` channels; channel `c` uses its own sub-seed of `model.seed`.
pub fn generate_channels(cfg: &ArrayConfig, model: &ChannelModelConfig, count: usize) -> Result<Vec<Channel>> {
    cfg.validate()?;
    model.validate()?;
    (0..count)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(model.seed, c as u64);
            // A zero complex Gaussian draw has probability zero; redraw anyway.
            loop {
                let paths = model.draw(&mut rng);
                if paths.iter().all(|p| p.gain().norm() > 0.0) {
                    return Channel::from_paths(cfg, paths);
                }
            }
        })
        .collect()
}

/// One CSV row per channel with Re/Im interleaved, in shortest round-trip
/// decimal form.
pub fn channels_to_csv(channels: &[Channel]) -> String {
    let mut out = String::new();
    for ch in channels {
        let row: Vec<String> = ch.h.iter().flat_map(|z| [z.re.to_string(), z.im.to_string()]).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn save_channels(csv_path: &Path, sidecar: Option<&Path>, channels: &[Channel]) -> Result<()> {
    fs::write(csv_path, channels_to_csv(channels))?;
    if let Some(side) = sidecar {
        let meta: Vec<&[PathParams]> = channels.iter().map(|c| c.paths()).collect();
        fs::write(side, serde_json::to_string_pretty(&meta)? + "\n")?;
    }
    Ok(())
}

/// Reads channels from CSV, attaching path metadata from an optional
/// sidecar. With `cfg`, row lengths are checked against `2 n_t` and sidecar
/// paths must reproduce the stored vectors.
pub fn load_channels(csv_path: &Path, sidecar: Option<&Path>, cfg: Option<&ArrayConfig>) -> Result<Vec<Channel>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(csv_path)?;
    let mut channels = Vec::new();
    let mut width = cfg.map(|c| 2 * c.n_t());
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected || !expected.is_multiple_of(2) || expected == 0 {
            return Err(Error::Parse {
                row: r + 1,
                column: record.len().min(expected) + 1,
                message: format!(
                    "expected {expected} values (even, Re/Im interleaved), found {}",
                    record.len()
                ),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|e| Error::Parse {
                    row: r + 1,
                    column: c + 1,
                    message: format!("'{field}': {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let h = values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let ch = Channel::new(h).map_err(|e| match e {
            Error::Degenerate(m) => Error::Degenerate(format!("row {}: {m}", r + 1)),
            other => other,
        })?;
        channels.push(ch);
    }
    if let Some(side) = sidecar {
        let meta: Vec<Vec<PathParams>> = serde_json::from_str(&fs::read_to_string(side)?)?;
        if meta.len() != channels.len() {
            return Err(Error::DimensionMismatch {
                what: "sidecar channel entries",
                expected: channels.len(),
                actual: meta.len(),
            });
        }
        for (r, (ch, paths)) in channels.iter_mut().zip(meta).enumerate() {
            ch.paths = paths;
            if let Some(err) = cfg.and_then(|c| ch.reconstruction_error(c)) {
                if !(err <= 1e-12) {
                    return Err(Error::InvalidConfig(format!(
                        "sidecar paths of channel {} do not reproduce its vector (relative error {err:e})",
                        r + 1
                    )));
                }
            }
        }
    }
    Ok(channels)
}
