//! Reference beamformers: matched filter, partial-CSI, OMP hybrid, DFT
//! codebook, and least-squares recovery from a complex pattern.

mod ls;
mod omp;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{steering_vector, ArrayConfig};
use crate::beamformer::Beamformer;
use crate::channel::{Channel, PathParams};
use crate::error::{Error, Result};

pub use ls::{ls_recover, LsRecovery, PhasePattern};
pub use omp::{omp_hybrid, OmpDictionary, OmpOutcome};

/// `hᴴ f`.
pub fn inner(h: &[Complex64], f: &[Complex64]) -> Complex64 {
    h.iter().zip(f).map(|(a, b)| a.conj() * b).sum()
}

/// Matched filter `h / ‖h‖`.
pub fn mrt(h: &Channel) -> Result<Beamformer> {
    let norm = h.norm();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("zero channel".into()));
    }
    Ok(Beamformer::Digital {
        w: h.h().iter().map(|z| z / norm).collect(),
    })
}

/// Steering sum weighted by path amplitudes with the gain phases dropped.
pub fn partial_csi_dbf(paths: &[PathParams], cfg: &ArrayConfig) -> Result<Beamformer> {
    if paths.is_empty() {
        return Err(Error::Precondition(
            "partial-CSI beamforming needs path metadata".into(),
        ));
    }
    let mut w = vec![Complex64::new(0.0, 0.0); cfg.n_t()];
    for p in paths {
        let amp = p.gain().norm();
        for (wl, al) in w.iter_mut().zip(steering_vector(cfg, p.zenith_deg, p.azimuth_deg)) {
            *wl += amp * al.conj();
        }
    }
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("partial-CSI steering sum cancels".into()));
    }
    Ok(Beamformer::Digital {
        w: w.into_iter().map(|z| z / norm).collect(),
    })
}

/// Phases of codeword `index = p · n_z + q`: `2π (m p / n_y + n q / n_z)`.
pub fn dft_codeword(cfg: &ArrayConfig, index: usize) -> Vec<f64> {
    let (p, q) = (index / cfg.n_z, index % cfg.n_z);
    let mut phases = Vec::with_capacity(cfg.n_t());
    for m in 0..cfg.n_y {
        for n in 0..cfg.n_z {
            let turns = ((m * p) % cfg.n_y) as f64 / cfg.n_y as f64 + ((n * q) % cfg.n_z) as f64 / cfg.n_z as f64;
            phases.push(TAU * turns);
        }
    }
    phases
}

/// Codeword gains `|hᴴ f|` for the whole codebook, in index order.
pub fn dft_codebook_gains(h: &Channel, cfg: &ArrayConfig) -> Result<Vec<f64>> {
    if h.n_t() != cfg.n_t() {
        return Err(Error::DimensionMismatch {
            what: "channel length",
            expected: cfg.n_t(),
            actual: h.n_t(),
        });
    }
    let scale = 1.0 / (cfg.n_t() as f64).sqrt();
    Ok((0..cfg.n_t())
        .into_par_iter()
        .map(|k| {
            let f: Vec<Complex64> = dft_codeword(cfg, k)
                .into_iter()
                .map(|p| Complex64::cis(p) * scale)
                .collect();
            inner(h.h(), &f).norm()
        })
        .collect())
}

/// Best codeword; ties keep the lowest index.
pub fn dft_codebook_abf(h: &Channel, cfg: &ArrayConfig) -> Result<Beamformer> {
    let gains = dft_codebook_gains(h, cfg)?;
    let mut best = 0;
    for (k, &g) in gains.iter().enumerate() {
        if g > gains[best] {
            best = k;
        }
    }
    Ok(Beamformer::Analog {
        phases: dft_codeword(cfg, best),
    })
}
