//! Least-squares recovery of a digital beamformer from its complex
//! (phase-bearing) pattern.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::SteeringMatrix;
use crate::beamformer::Beamformer;
use crate::error::{Error, Result};

/// Un-normalized complex response `x_c = Σ_l conj(f_l) A_lc` over the
/// columns of a steering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePattern {
    pub values: Vec<Complex64>,
}

impl PhasePattern {
    pub fn from_vector(a: &SteeringMatrix, f: &[Complex64]) -> Result<Self> {
        if f.len() != a.n_t() {
            return Err(Error::DimensionMismatch {
                what: "beamforming vector",
                expected: a.n_t(),
                actual: f.len(),
            });
        }
        let values = a
            .columns()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|col| col.iter().zip(f).map(|(a, fl)| fl.conj() * a).sum())
            .collect();
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

const CHUNK: usize = 512;

/// `A Aᴴ`, accumulated over fixed column chunks and summed in chunk order.
pub fn gram(a: &SteeringMatrix) -> DMatrix<Complex64> {
    let n = a.n_t();
    let cols: Vec<&[Complex64]> = a.columns().collect();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = cols
        .par_chunks(CHUNK)
        .map(|chunk| {
            // Upper triangle, row l holding entries k >= l.
            let mut g_re = vec![0.0; n * n];
            let mut g_im = vec![0.0; n * n];
            let mut ar = vec![0.0; n];
            let mut ai = vec![0.0; n];
            for col in chunk {
                for (l, z) in col.iter().enumerate() {
                    ar[l] = z.re;
                    ai[l] = z.im;
                }
                for l in 0..n {
                    let (xr, xi) = (ar[l], ai[l]);
                    let row_re = &mut g_re[l * n + l..(l + 1) * n];
                    for (g, (yr, yi)) in row_re.iter_mut().zip(ar[l..].iter().zip(&ai[l..])) {
                        *g += xr * yr + xi * yi;
                    }
                    let row_im = &mut g_im[l * n + l..(l + 1) * n];
                    for (g, (yr, yi)) in row_im.iter_mut().zip(ar[l..].iter().zip(&ai[l..])) {
                        *g += xi * yr - xr * yi;
                    }
                }
            }
            (g_re, g_im)
        })
        .collect();
    let mut g_re = vec![0.0; n * n];
    let mut g_im = vec![0.0; n * n];
    for (pr, pi) in &partials {
        g_re.iter_mut().zip(pr).for_each(|(a, b)| *a += b);
        g_im.iter_mut().zip(pi).for_each(|(a, b)| *a += b);
    }
    DMatrix::from_fn(n, n, |l, k| {
        if k >= l {
            Complex64::new(g_re[l * n + k], g_im[l * n + k])
        } else {
            Complex64::new(g_re[k * n + l], -g_im[k * n + l])
        }
    })
}

/// Factorized normal equations for one steering matrix, reusable across
/// patterns.
pub struct LsRecovery<'a> {
    a: &'a SteeringMatrix,
    chol: Cholesky<Complex64, Dyn>,
    ridge: f64,
}

fn well_conditioned(chol: &Cholesky<Complex64, Dyn>) -> bool {
    let d = chol.l_dirty().diagonal();
    let (lo, hi) = d
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), z| (lo.min(z.re), hi.max(z.re)));
    // Pivots are square roots of the eigenvalue scale.
    lo > 0.0 && (lo / hi).powi(2) > 1e-13
}

impl<'a> LsRecovery<'a> {
    pub fn new(a: &'a SteeringMatrix) -> Result<Self> {
        if a.n_dirs() < a.n_t() {
            return Err(Error::Precondition(format!(
                "need at least as many directions ({}) as elements ({})",
                a.n_dirs(),
                a.n_t()
            )));
        }
        let g = gram(a);
        if let Some(chol) = g.clone().cholesky().filter(well_conditioned) {
            return Ok(Self { a, chol, ridge: 0.0 });
        }
        let n = a.n_t();
        let ridge = 1e-9 * g.trace().re / n as f64;
        let mut repaired = g;
        for k in 0..n {
            repaired[(k, k)] += ridge;
        }
        let chol = repaired
            .cholesky()
            .filter(well_conditioned)
            .ok_or(Error::SingularGram)?;
        Ok(Self { a, chol, ridge })
    }

    /// Diagonal loading applied to the Gram matrix (0 when none was needed).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// `f̂ = (A Aᴴ)⁻¹ A conj(x) / max|x|`, normalized.
    pub fn recover(&self, xp: &PhasePattern) -> Result<Beamformer> {
        if xp.len() != self.a.n_dirs() {
            return Err(Error::DimensionMismatch {
                what: "phase pattern",
                expected: self.a.n_dirs(),
                actual: xp.len(),
            });
        }
        let peak = xp.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(peak.is_finite() && peak > 0.0) {
            return Err(Error::Degenerate("phase pattern is zero".into()));
        }
        let n = self.a.n_t();
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for (col, x) in self.a.columns().zip(&xp.values) {
            let w = x.conj() / peak;
            for (r, a) in rhs.iter_mut().zip(col) {
                *r += a * w;
            }
        }
        let f = self.chol.solve(&DVector::from_vec(rhs));
        let norm = f.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Degenerate("recovered vector is zero".into()));
        }
        Ok(Beamformer::Digital {
            w: f.iter().map(|z| z / norm).collect(),
        })
    }
}

/// One-shot recovery; see [`LsRecovery`] to reuse the factorization.
pub fn ls_recover(xp: &PhasePattern, a: &SteeringMatrix) -> Result<Beamformer> {
    LsRecovery::new(a)?.recover(xp)
}
