//! File formats: pattern CSV grids, PGM heatmaps and target sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::array::{AngleGrid, DB_FLOOR};
use crate::error::{Error, Result};
use crate::pattern::{BeamPattern, TargetShape, TargetSpec};

/// Pattern as CSV: one row per zenith sample, one column per azimuth
/// sample, dB values with six decimals.
pub fn pattern_to_csv(pattern: &BeamPattern) -> String {
    let mut out = String::with_capacity(pattern.values().len() * 11);
    for row in pattern.values().chunks_exact(pattern.width()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_pattern_csv(path: &Path, pattern: &BeamPattern) -> Result<()> {
    fs::write(path, pattern_to_csv(pattern))?;
    Ok(())
}

/// Reads a dB grid from CSV (no header).
pub fn read_db_grid(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
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
        rows.push(row);
    }
    Ok(rows)
}

/// Loads a pattern CSV on `grid`, renormalizing to a 0 dB peak and
/// flooring at −60 dB.
pub fn read_pattern_csv(path: &Path, grid: &AngleGrid) -> Result<BeamPattern> {
    let rows = read_db_grid(path)?;
    if rows.len() != grid.height() {
        return Err(Error::DimensionMismatch {
            what: "pattern rows",
            expected: grid.height(),
            actual: rows.len(),
        });
    }
    let mut values = Vec::with_capacity(grid.len());
    for row in rows {
        if row.len() != grid.width() {
            return Err(Error::DimensionMismatch {
                what: "pattern columns",
                expected: grid.width(),
                actual: row.len(),
            });
        }
        values.extend(row);
    }
    BeamPattern::from_db(Arc::new(grid.clone()), values)
}

/// 8-bit grayscale heatmap: −60 dB maps to 0, 0 dB to 255.
pub fn pattern_to_pgm(pattern: &BeamPattern) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", pattern.width(), pattern.height()).into_bytes();
    out.extend(pattern.values().iter().map(|&v| {
        let level = ((v - DB_FLOOR) / -DB_FLOOR * 255.0).round();
        level.clamp(0.0, 255.0) as u8
    }));
    out
}

pub fn write_pgm(path: &Path, pattern: &BeamPattern) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&pattern_to_pgm(pattern))?;
    Ok(())
}

/// JSON sidecar stored next to a target CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSidecar {
    pub spec: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<AngleGrid>,
}

/// `target.csv` → `target.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the target CSV and its sidecar.
pub fn write_target(csv_path: &Path, pattern: &BeamPattern, spec: &TargetSpec) -> Result<()> {
    write_pattern_csv(csv_path, pattern)?;
    let grid = (*pattern.grid() != AngleGrid::default()).then(|| pattern.grid().clone());
    let sidecar = TargetSidecar {
        spec: spec.clone(),
        grid,
    };
    fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}

/// Loads a target CSV. The grid comes from the sidecar when present and
/// defaults to the 180 × 180 grid otherwise.
pub fn read_target(csv_path: &Path) -> Result<(BeamPattern, TargetSpec)> {
    let side = sidecar_path(csv_path);
    let sidecar: Option<TargetSidecar> = if side.exists() {
        Some(serde_json::from_str(&fs::read_to_string(&side)?)?)
    } else {
        None
    };
    let grid = sidecar.as_ref().and_then(|s| s.grid.clone()).unwrap_or_default();
    let pattern = read_pattern_csv(csv_path, &grid)?;
    let spec = sidecar.map(|s| s.spec).unwrap_or(TargetSpec {
        shape: TargetShape::FromFile,
        center_zenith_deg: 90.0,
        center_azimuth_deg: 0.0,
        side_lobe_db: -25.0,
        taper_deg: 0.0,
    });
    Ok((pattern, spec))
}
