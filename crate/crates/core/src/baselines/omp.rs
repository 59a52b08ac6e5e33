//! Orthogonal matching pursuit over a steering dictionary for hybrid
//! precoding.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::ArrayConfig;
use crate::beamformer::Beamformer;
use crate::error::{Error, Result};

/// Constant-modulus steering atoms `e^{j k d (m s_y + n s_z)} / √n_t` on a
/// grid uniform in the sine domain of each axis.
#[derive(Debug, Clone)]
pub struct OmpDictionary {
    n_t: usize,
    /// Atom phases, atom-major.
    phases: Vec<f64>,
}

impl OmpDictionary {
    /// `per_axis²` atoms with sines `−1 + 2k / per_axis`.
    pub fn sine_grid(cfg: &ArrayConfig, per_axis: usize) -> Result<Self> {
        if per_axis == 0 {
            return Err(Error::InvalidConfig(
                "dictionary needs at least one atom per axis".into(),
            ));
        }
        let kd = cfg.kd();
        let sines: Vec<f64> = (0..per_axis).map(|k| -1.0 + 2.0 * k as f64 / per_axis as f64).collect();
        let mut phases = Vec::with_capacity(per_axis * per_axis * cfg.n_t());
        for &sy in &sines {
            for &sz in &sines {
                for m in 0..cfg.n_y {
                    for n in 0..cfg.n_z {
                        phases.push(kd * (m as f64 * sy + n as f64 * sz));
                    }
                }
            }
        }
        Ok(Self { n_t: cfg.n_t(), phases })
    }

    pub fn len(&self) -> usize {
        self.phases.len() / self.n_t
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self, g: usize) -> &[f64] {
        &self.phases[g * self.n_t..(g + 1) * self.n_t]
    }

    pub fn atom(&self, g: usize) -> Vec<Complex64> {
        let scale = 1.0 / (self.n_t as f64).sqrt();
        self.phases(g).iter().map(|&p| Complex64::cis(p) * scale).collect()
    }

    fn correlations(&self, r: &[Complex64]) -> Vec<f64> {
        let scale = 1.0 / (self.n_t as f64).sqrt();
        (0..self.len())
            .into_par_iter()
            .map(|g| {
                let c: Complex64 = self
                    .phases(g)
                    .iter()
                    .zip(r)
                    .map(|(&p, rl)| Complex64::cis(-p) * rl)
                    .sum();
                c.norm() * scale
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OmpOutcome {
    pub beamformer: Beamformer,
    /// Dictionary indices in selection order.
    pub selected: Vec<usize>,
    /// `‖f_opt − F_rf f_bb‖` after each iteration.
    pub residual_norms: Vec<f64>,
}

/// Least-squares coefficients of `f` on the given atoms, or `None` when the
/// atoms are numerically dependent.
pub(crate) fn ls_fit(atoms: &[Vec<Complex64>], f: &[Complex64]) -> Option<(Vec<Complex64>, f64)> {
    let n_t = f.len();
    let a = DMatrix::from_fn(n_t, atoms.len(), |l, k| atoms[k][l]);
    let gram = a.adjoint() * &a;
    let chol = gram.clone().cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let min_pivot = diag.iter().map(|d| d.re).fold(f64::INFINITY, f64::min);
    let max_gram = gram.diagonal().iter().map(|d| d.re).fold(0.0, f64::max);
    if !(min_pivot * min_pivot > 1e-10 * max_gram) {
        return None;
    }
    let fv = DVector::from_column_slice(f);
    let b = chol.solve(&(a.adjoint() * &fv));
    let residual = (fv - &a * &b).norm();
    Some((b.iter().copied().collect(), residual))
}

/// Greedy hybrid approximation of `f_opt` with `cfg.n_rf` atoms.
pub fn omp_hybrid(f_opt: &[Complex64], cfg: &ArrayConfig, dict: &OmpDictionary) -> Result<OmpOutcome> {
    let n_t = cfg.n_t();
    if f_opt.len() != n_t || dict.n_t != n_t {
        return Err(Error::DimensionMismatch {
            what: "OMP target vector",
            expected: n_t,
            actual: if f_opt.len() != n_t { f_opt.len() } else { dict.n_t },
        });
    }
    let norm = f_opt.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("OMP target must be unit norm, got {norm}")));
    }
    if dict.len() < cfg.n_rf {
        return Err(Error::InvalidConfig(format!(
            "dictionary has {} atoms, fewer than {} RF chains",
            dict.len(),
            cfg.n_rf
        )));
    }
    let mut residual = f_opt.to_vec();
    let mut selected: Vec<usize> = Vec::with_capacity(cfg.n_rf);
    let mut atoms: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.n_rf);
    let mut coeffs = Vec::new();
    let mut residual_norms = Vec::with_capacity(cfg.n_rf);
    for _ in 0..cfg.n_rf {
        let corr = dict.correlations(&residual);
        let mut order: Vec<usize> = (0..dict.len()).filter(|g| !selected.contains(g)).collect();
        order.sort_by(|&a, &b| corr[b].total_cmp(&corr[a]).then(a.cmp(&b)));
        let mut accepted = None;
        for g in order {
            atoms.push(dict.atom(g));
            match ls_fit(&atoms, f_opt) {
                Some(fit) => {
                    accepted = Some((g, fit));
                    break;
                }
                None => {
                    atoms.pop();
                }
            }
        }
        let (g, (b, res_norm)) = accepted.ok_or(Error::RankDeficient)?;
        selected.push(g);
        coeffs = b;
        residual_norms.push(res_norm);
        let approx: Vec<Complex64> = (0..n_t)
            .map(|l| atoms.iter().zip(&coeffs).map(|(a, c)| a[l] * c).sum())
            .collect();
        residual = f_opt.iter().zip(&approx).map(|(f, a)| f - a).collect();
        let r_norm = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if r_norm > 0.0 {
            residual.iter_mut().for_each(|z| *z /= r_norm);
        }
    }
    let phi_rf = selected.iter().flat_map(|&g| dict.phases(g).iter().copied()).collect();
    Ok(OmpOutcome {
        beamformer: Beamformer::Hybrid { phi_rf, w_bb: coeffs },
        selected,
        residual_norms,
    })
}
