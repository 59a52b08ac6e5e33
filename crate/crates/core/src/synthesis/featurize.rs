//! Fixed pooling feature map: a 180 × 180 dB pattern averaged into
//! 32 × 32 bins and rescaled to [0, 1].

use crate::array::DB_FLOOR;
use crate::error::{Error, Result};
use crate::pattern::BeamPattern;

pub const FEATURE_SIDE: usize = 32;
pub const N_FEATURES: usize = FEATURE_SIDE * FEATURE_SIDE;
const GRID_SIDE: usize = 180;

/// Start of bin `k` along one axis; bins hold 5 or 6 cells.
fn edge(k: usize) -> usize {
    k * GRID_SIDE / FEATURE_SIDE
}

pub fn featurize(target: &BeamPattern) -> Result<Vec<f64>> {
    if target.height() != GRID_SIDE || target.width() != GRID_SIDE {
        return Err(Error::Unsupported(format!(
            "featurizer needs a {GRID_SIDE}x{GRID_SIDE} grid, got {}x{}",
            target.height(),
            target.width()
        )));
    }
    let values = target.values();
    let mut out = Vec::with_capacity(N_FEATURES);
    for bi in 0..FEATURE_SIDE {
        let rows = edge(bi)..edge(bi + 1);
        for bj in 0..FEATURE_SIDE {
            let cols = edge(bj)..edge(bj + 1);
            let mut sum = 0.0;
            for i in rows.clone() {
                sum += values[i * GRID_SIDE + cols.start..i * GRID_SIDE + cols.end]
                    .iter()
                    .sum::<f64>();
            }
            let mean = sum / (rows.len() * cols.len()) as f64;
            out.push((mean - DB_FLOOR) / -DB_FLOOR);
        }
    }
    Ok(out)
}
