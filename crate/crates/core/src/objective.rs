//! Pattern-discrepancy losses and their analytic gradients.
//!
//! The composite loss compares a synthesized dB pattern `F` against a
//! target `T` over the target's region mask:
//!
//! ```text
//! l_ml = mean over M of (T - F)^2
//! l_sl = mean over S of max(0, F - T)^2
//! l_md = mean over T-region of (T - F)^2
//! total = l_ml + l_sl + l_md
//! ```
//!
//! Gradients are taken with respect to the realized vector and then pulled
//! back through the architecture. Complex gradients use the convention
//! `γ = ∂L/∂Re f + j ∂L/∂Im f`, so `dL = Re Σ conj(γ_l) df_l`.

use std::f64::consts::LN_10;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{AngleGrid, ArrayConfig, ArrayResponse, DB_FLOOR};
use crate::beamformer::Beamformer;
use crate::error::{Error, Result};
use crate::pattern::{magnitude_to_db, segment_regions, BeamPattern, Region, RegionMask};

/// Per-region loss components and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub l_ml: f64,
    pub l_sl: f64,
    pub l_md: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l_ml: f64, l_sl: f64, l_md: f64) -> Self {
        Self {
            l_ml,
            l_sl,
            l_md,
            total: l_ml + l_sl + l_md,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }

    /// Component-wise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        if items.is_empty() {
            return LossBreakdown::default();
        }
        let n = items.len() as f64;
        let sum = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
        LossBreakdown::new(sum(|b| b.l_ml), sum(|b| b.l_sl), sum(|b| b.l_md))
    }
}

/// Which loss components contribute to a gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossTerms {
    pub main_lobe: bool,
    pub side_lobe: bool,
    pub moderate: bool,
}

impl LossTerms {
    pub const ALL: LossTerms = LossTerms {
        main_lobe: true,
        side_lobe: true,
        moderate: true,
    };

    pub fn only(region: Region) -> Self {
        LossTerms {
            main_lobe: region == Region::MainLobe,
            side_lobe: region == Region::SideLobe,
            moderate: region == Region::Moderate,
        }
    }

    fn includes(&self, region: Region) -> bool {
        match region {
            Region::MainLobe => self.main_lobe,
            Region::SideLobe => self.side_lobe,
            Region::Moderate => self.moderate,
        }
    }
}

impl Default for LossTerms {
    fn default() -> Self {
        Self::ALL
    }
}

/// Gradient of the loss with respect to a beamformer's flat parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Mean squared dB difference over all cells.
pub fn pattern_mse(a: &BeamPattern, b: &BeamPattern) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    let n = a.values().len() as f64;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / n)
}

fn check_mask(target: &BeamPattern, mask: &RegionMask) -> Result<()> {
    if mask.len() != target.values().len() {
        return Err(Error::DimensionMismatch {
            what: "region mask",
            expected: target.values().len(),
            actual: mask.len(),
        });
    }
    Ok(())
}

/// Composite loss of `synth` against `target` over `mask`.
pub fn composite_loss(target: &BeamPattern, synth: &BeamPattern, mask: &RegionMask) -> Result<LossBreakdown> {
    if !target.same_grid(synth) {
        return Err(Error::GridMismatch);
    }
    check_mask(target, mask)?;
    Ok(breakdown(target.values(), synth.values(), mask))
}

fn region_mean(idx: &[usize], mut term: impl FnMut(usize) -> f64) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().map(|&c| term(c)).sum::<f64>() / idx.len() as f64
}

fn breakdown(target: &[f64], synth: &[f64], mask: &RegionMask) -> LossBreakdown {
    let sq = |c: usize| (target[c] - synth[c]).powi(2);
    let l_ml = region_mean(mask.main_lobe(), sq);
    let l_sl = region_mean(mask.side_lobe(), |c| (synth[c] - target[c]).max(0.0).powi(2));
    let l_md = region_mean(mask.moderate(), sq);
    LossBreakdown::new(l_ml, l_sl, l_md)
}

/// Loss against a fixed target, with precomputed array tables.
#[derive(Debug, Clone)]
pub struct Objective {
    cfg: ArrayConfig,
    response: Arc<ArrayResponse>,
    target: BeamPattern,
    mask: RegionMask,
    terms: LossTerms,
    peak: PeakMode,
}

/// How the peak reference enters [`Objective::vector_gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PeakMode {
    /// Differentiates through the argmax cell.
    Exact,
    /// Holds the reference constant.
    Detached,
    /// Spreads the reference term over cells with weights `(|g|/|g*|)^exponent`,
    /// normalized. Near ties between lobes both receive part of it.
    Soft { exponent: f64 },
}

impl PeakMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PeakMode::Soft { exponent } if !(exponent.is_finite() && exponent > 0.0) => Err(Error::InvalidConfig(
                format!("soft peak exponent must be positive, got {exponent}"),
            )),
            _ => Ok(()),
        }
    }
}

impl Objective {
    /// Objective whose mask is segmented from the target.
    pub fn new(cfg: &ArrayConfig, target: &BeamPattern) -> Result<Self> {
        let mask = segment_regions(target);
        Self::with_mask(cfg, target, mask)
    }

    pub fn with_mask(cfg: &ArrayConfig, target: &BeamPattern, mask: RegionMask) -> Result<Self> {
        let response = Arc::new(ArrayResponse::new(cfg, target.grid()));
        Self::with_response(cfg, response, target, mask)
    }

    /// Reuses tables built for the target's grid.
    pub fn with_response(
        cfg: &ArrayConfig,
        response: Arc<ArrayResponse>,
        target: &BeamPattern,
        mask: RegionMask,
    ) -> Result<Self> {
        cfg.validate()?;
        check_mask(target, &mask)?;
        if response.n_cells() != target.grid().len() || response.n_t() != cfg.n_t() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            cfg: *cfg,
            response,
            target: target.clone(),
            mask,
            terms: LossTerms::ALL,
            peak: PeakMode::Exact,
        })
    }

    pub fn with_terms(mut self, terms: LossTerms) -> Self {
        self.terms = terms;
        self
    }

    /// Anything but [`PeakMode::Exact`] turns [`Objective::vector_gradient`]
    /// into a search direction rather than the gradient of the loss.
    pub fn with_peak_mode(mut self, mode: PeakMode) -> Self {
        self.peak = mode;
        self
    }

    pub fn peak_mode(&self) -> PeakMode {
        self.peak
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.cfg
    }

    pub fn target(&self) -> &BeamPattern {
        &self.target
    }

    pub fn mask(&self) -> &RegionMask {
        &self.mask
    }

    pub fn grid(&self) -> &AngleGrid {
        self.target.grid()
    }

    pub fn response(&self) -> &Arc<ArrayResponse> {
        &self.response
    }

    /// Pattern of a physical vector on the target's grid.
    pub fn synthesized(&self, f: &[Complex64]) -> Result<BeamPattern> {
        self.check_vector(f)?;
        let mags: Vec<f64> = self.response.field(f).iter().map(|g| g.norm()).collect();
        BeamPattern::from_magnitudes(self.target.shared_grid(), &mags)
    }

    pub fn loss_of_vector(&self, f: &[Complex64]) -> Result<LossBreakdown> {
        let synth = self.synthesized(f)?;
        Ok(breakdown(self.target.values(), synth.values(), &self.mask))
    }

    pub fn loss(&self, bf: &Beamformer) -> Result<LossBreakdown> {
        self.loss_of_vector(&bf.realize(&self.cfg)?)
    }

    fn check_vector(&self, f: &[Complex64]) -> Result<()> {
        if f.len() != self.cfg.n_t() {
            return Err(Error::DimensionMismatch {
                what: "beamforming vector",
                expected: self.cfg.n_t(),
                actual: f.len(),
            });
        }
        Ok(())
    }

    /// Loss and complex gradient with respect to the physical vector `f`.
    ///
    /// The dB value of a cell is `20 log10(|g| / |g*|)` with `g*` the peak
    /// cell, so each cell contributes through its own magnitude and through
    /// the peak. Cells clamped at the floor contribute nothing.
    pub fn vector_gradient(&self, f: &[Complex64]) -> Result<(LossBreakdown, Vec<Complex64>)> {
        self.check_vector(f)?;
        let field = self.response.field(f);
        let mut peak_idx = 0;
        let mut peak = 0.0f64;
        let mags: Vec<f64> = field
            .iter()
            .enumerate()
            .map(|(c, g)| {
                let m = g.norm();
                if m > peak {
                    peak = m;
                    peak_idx = c;
                }
                m
            })
            .collect();
        if !(peak.is_finite() && peak > 0.0) {
            return Err(Error::Degenerate("synthesized pattern has no positive peak".into()));
        }
        let raw: Vec<f64> = mags.iter().map(|&m| 20.0 * (m / peak).log10()).collect();
        let synth: Vec<f64> = mags.iter().map(|&m| magnitude_to_db(m, peak)).collect();
        let target = self.target.values();
        let loss = breakdown(target, &synth, &self.mask);

        let scale = 20.0 / LN_10;
        let inv = |n: usize| if n == 0 { 0.0 } else { 1.0 / n as f64 };
        let (w_ml, w_sl, w_md) = (inv(self.mask.n_ml()), inv(self.mask.n_sl()), inv(self.mask.n_md()));
        let mut weights = vec![Complex64::new(0.0, 0.0); field.len()];
        let mut peak_weight = 0.0;
        for (c, region) in self.mask.labels().iter().enumerate() {
            // The floor clamp is flat below −60 dB.
            if !self.terms.includes(*region) || !(raw[c] >= DB_FLOOR) {
                continue;
            }
            let diff = synth[c] - target[c];
            let d_loss = match region {
                Region::MainLobe => 2.0 * diff * w_ml,
                Region::Moderate => 2.0 * diff * w_md,
                Region::SideLobe => 2.0 * diff.max(0.0) * w_sl,
            };
            if d_loss == 0.0 {
                continue;
            }
            let s = d_loss * scale;
            weights[c] = field[c] * (s / (mags[c] * mags[c]));
            peak_weight += s;
        }
        match self.peak {
            PeakMode::Exact => weights[peak_idx] -= field[peak_idx] * (peak_weight / (peak * peak)),
            PeakMode::Detached => {}
            PeakMode::Soft { exponent } => {
                let share: Vec<f64> = mags.iter().map(|&m| (m / peak).powf(exponent)).collect();
                let z: f64 = share.iter().sum();
                for (c, pi) in share.iter().enumerate() {
                    let pi = pi / z;
                    if pi > 1e-12 {
                        weights[c] -= field[c] * (peak_weight * pi / (mags[c] * mags[c]));
                    }
                }
            }
        }
        Ok((loss, self.response.adjoint(&weights)))
    }

    /// Loss and gradient with respect to the beamformer's flat parameters.
    pub fn gradient(&self, bf: &Beamformer) -> Result<(LossBreakdown, GradientVector)> {
        let f = bf.realize(&self.cfg)?;
        let (loss, gamma) = self.vector_gradient(&f)?;
        Ok((loss, GradientVector(pull_back(bf, &f, &gamma))))
    }
}

/// Chains a gradient with respect to the realized vector `f` back to the
/// beamformer's flat parameters.
pub fn pull_back(bf: &Beamformer, f: &[Complex64], gamma: &[Complex64]) -> Vec<f64> {
    // f = u / ‖u‖  ⇒  γ_u = (γ_f − Re⟨f, γ_f⟩ f) / ‖u‖
    let through_norm = |u: &[Complex64]| -> Vec<Complex64> {
        let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let rho: f64 = f.iter().zip(gamma).map(|(a, b)| (a.conj() * b).re).sum();
        gamma.iter().zip(f).map(|(g, fl)| (g - fl * rho) / norm).collect()
    };
    match bf {
        Beamformer::Digital { w } => through_norm(w).iter().flat_map(|z| [z.re, z.im]).collect(),
        Beamformer::Analog { .. } => f.iter().zip(gamma).map(|(fl, g)| -(g.conj() * fl).im).collect(),
        Beamformer::Hybrid { phi_rf, w_bb } => {
            let gamma_u = through_norm(&bf.raw_vector());
            let n_t = f.len();
            let scale = 1.0 / (n_t as f64).sqrt();
            let mut out = Vec::with_capacity(phi_rf.len() + 2 * w_bb.len());
            let mut gamma_b = vec![Complex64::new(0.0, 0.0); w_bb.len()];
            for (r, b) in w_bb.iter().enumerate() {
                for l in 0..n_t {
                    let entry = Complex64::cis(phi_rf[r * n_t + l]) * scale;
                    out.push(-(gamma_u[l].conj() * entry * b).im);
                    gamma_b[r] += entry.conj() * gamma_u[l];
                }
            }
            out.extend(gamma_b.iter().flat_map(|z| [z.re, z.im]));
            out
        }
    }
}

/// Gradient of the composite loss for `bf` against `target` under `mask`.
pub fn loss_gradient(
    cfg: &ArrayConfig,
    grid: &AngleGrid,
    target: &BeamPattern,
    mask: &RegionMask,
    bf: &Beamformer,
) -> Result<GradientVector> {
    if target.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let objective = Objective::with_mask(cfg, target, mask.clone())?;
    Ok(objective.gradient(bf)?.1)
}
