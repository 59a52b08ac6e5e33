//! Digital, analog and hybrid beamformer parametrizations.
//!
//! Every variant realizes to a unit-norm physical vector `f`:
//!
//! * digital: `f = w / ‖w‖`
//! * analog: `f_l = e^{j φ_l} / √n_t`
//! * hybrid: `f = F_rf w_bb / ‖F_rf w_bb‖` with `F_rf = e^{j Φ_rf} / √n_t`
//!
//! Flat real parameter layouts (used by the optimizers and the decoder head):
//! digital is `[Re w_0, Im w_0, Re w_1, ...]` (2 n_t); analog is the n_t
//! phases; hybrid is `vec(Φ_rf)` column-major followed by interleaved
//! `Re/Im` of `w_bb` ((n_t + 2) n_rf).

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::ArrayConfig;
use crate::error::{Error, Result};
use crate::rng::unit_complex_vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Digital,
    Analog,
    Hybrid,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Digital => "digital",
            Architecture::Analog => "analog",
            Architecture::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "digital" => Ok(Architecture::Digital),
            "analog" => Ok(Architecture::Analog),
            "hybrid" => Ok(Architecture::Hybrid),
            other => Err(Error::Unsupported(format!("architecture '{other}'"))),
        }
    }
}

/// Shape of the flat real parameter vector of an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterLayout {
    pub architecture: Architecture,
    pub n_t: usize,
    pub n_rf: usize,
}

impl ParameterLayout {
    pub fn new(architecture: Architecture, cfg: &ArrayConfig) -> Self {
        Self {
            architecture,
            n_t: cfg.n_t(),
            n_rf: cfg.n_rf,
        }
    }

    /// Number of real parameters.
    pub fn len(&self) -> usize {
        match self.architecture {
            Architecture::Digital => 2 * self.n_t,
            Architecture::Analog => self.n_t,
            Architecture::Hybrid => (self.n_t + 2) * self.n_rf,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether parameter `k` is a phase (radians) rather than an amplitude
    /// component.
    pub fn is_phase(&self, k: usize) -> bool {
        match self.architecture {
            Architecture::Digital => false,
            Architecture::Analog => true,
            Architecture::Hybrid => k < self.n_t * self.n_rf,
        }
    }
}

/// A beamformer in one of the three architectures.
#[derive(Debug, Clone, PartialEq)]
pub enum Beamformer {
    Digital {
        w: Vec<Complex64>,
    },
    Analog {
        phases: Vec<f64>,
    },
    Hybrid {
        /// `n_t × n_rf` phase matrix, column-major.
        phi_rf: Vec<f64>,
        w_bb: Vec<Complex64>,
    },
}

fn unit_norm(v: Vec<Complex64>, what: &str) -> Result<Vec<Complex64>> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Degenerate(format!("{what} has zero or non-finite norm")));
    }
    Ok(v.into_iter().map(|z| z / norm).collect())
}

impl Beamformer {
    pub fn architecture(&self) -> Architecture {
        match self {
            Beamformer::Digital { .. } => Architecture::Digital,
            Beamformer::Analog { .. } => Architecture::Analog,
            Beamformer::Hybrid { .. } => Architecture::Hybrid,
        }
    }

    pub fn n_t(&self) -> usize {
        match self {
            Beamformer::Digital { w } => w.len(),
            Beamformer::Analog { phases } => phases.len(),
            Beamformer::Hybrid { phi_rf, w_bb } => phi_rf.len() / w_bb.len().max(1),
        }
    }

    pub fn layout(&self) -> ParameterLayout {
        let n_rf = match self {
            Beamformer::Hybrid { w_bb, .. } => w_bb.len(),
            _ => 1,
        };
        ParameterLayout {
            architecture: self.architecture(),
            n_t: self.n_t(),
            n_rf,
        }
    }

    /// Checks dimensions against an array configuration.
    pub fn check(&self, cfg: &ArrayConfig) -> Result<()> {
        let n_t = cfg.n_t();
        let mismatch = |what, expected, actual| Error::DimensionMismatch { what, expected, actual };
        match self {
            Beamformer::Digital { w } if w.len() != n_t => Err(mismatch("digital weights", n_t, w.len())),
            Beamformer::Analog { phases } if phases.len() != n_t => Err(mismatch("analog phases", n_t, phases.len())),
            Beamformer::Hybrid { phi_rf, w_bb } => {
                if w_bb.len() != cfg.n_rf {
                    Err(mismatch("baseband weights", cfg.n_rf, w_bb.len()))
                } else if phi_rf.len() != n_t * cfg.n_rf {
                    Err(mismatch("RF phase matrix", n_t * cfg.n_rf, phi_rf.len()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Unnormalized vector before the final power projection (`w`, the
    /// analog vector, or `F_rf w_bb`).
    pub(crate) fn raw_vector(&self) -> Vec<Complex64> {
        match self {
            Beamformer::Digital { w } => w.clone(),
            Beamformer::Analog { phases } => {
                let scale = 1.0 / (phases.len() as f64).sqrt();
                phases.iter().map(|&p| Complex64::cis(p) * scale).collect()
            }
            Beamformer::Hybrid { phi_rf, w_bb } => {
                let n_rf = w_bb.len();
                let n_t = phi_rf.len() / n_rf;
                let scale = 1.0 / (n_t as f64).sqrt();
                let mut u = vec![Complex64::new(0.0, 0.0); n_t];
                for (r, b) in w_bb.iter().enumerate() {
                    for (l, ul) in u.iter_mut().enumerate() {
                        *ul += Complex64::cis(phi_rf[r * n_t + l]) * scale * b;
                    }
                }
                u
            }
        }
    }

    /// The physical unit-norm beamforming vector.
    pub fn realize(&self, cfg: &ArrayConfig) -> Result<Vec<Complex64>> {
        self.check(cfg)?;
        match self {
            Beamformer::Analog { .. } => Ok(self.raw_vector()),
            Beamformer::Digital { .. } => unit_norm(self.raw_vector(), "digital weight vector"),
            Beamformer::Hybrid { .. } => unit_norm(self.raw_vector(), "hybrid vector F_rf w_bb"),
        }
    }

    /// Flat real parameters in the architecture's layout.
    pub fn parameters(&self) -> Vec<f64> {
        match self {
            Beamformer::Digital { w } => w.iter().flat_map(|z| [z.re, z.im]).collect(),
            Beamformer::Analog { phases } => phases.clone(),
            Beamformer::Hybrid { phi_rf, w_bb } => phi_rf
                .iter()
                .copied()
                .chain(w_bb.iter().flat_map(|z| [z.re, z.im]))
                .collect(),
        }
    }

    /// Inverse of [`parameters`](Self::parameters).
    pub fn from_parameters(layout: ParameterLayout, params: &[f64]) -> Result<Self> {
        if params.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: layout.len(),
                actual: params.len(),
            });
        }
        let pairs = |s: &[f64]| -> Vec<Complex64> { s.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect() };
        Ok(match layout.architecture {
            Architecture::Digital => Beamformer::Digital { w: pairs(params) },
            Architecture::Analog => Beamformer::Analog {
                phases: params.to_vec(),
            },
            Architecture::Hybrid => {
                let split = layout.n_t * layout.n_rf;
                Beamformer::Hybrid {
                    phi_rf: params[..split].to_vec(),
                    w_bb: pairs(&params[split..]),
                }
            }
        })
    }

    /// Random initialization: unit-norm complex Gaussian amplitudes and
    /// phases uniform on [0, 2π).
    pub fn random<R: Rng + ?Sized>(arch: Architecture, cfg: &ArrayConfig, rng: &mut R) -> Self {
        let n_t = cfg.n_t();
        let mut phase = |count: usize| -> Vec<f64> {
            (0..count)
                .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                .collect()
        };
        match arch {
            Architecture::Digital => Beamformer::Digital {
                w: unit_complex_vector(rng, n_t),
            },
            Architecture::Analog => Beamformer::Analog { phases: phase(n_t) },
            Architecture::Hybrid => {
                let phi_rf = phase(n_t * cfg.n_rf);
                Beamformer::Hybrid {
                    phi_rf,
                    w_bb: unit_complex_vector(rng, cfg.n_rf),
                }
            }
        }
    }

    /// Analog beamformer whose phases are those of `f`.
    pub fn analog_from_vector(f: &[Complex64]) -> Result<Self> {
        let phases = f
            .iter()
            .enumerate()
            .map(|(l, z)| {
                if z.norm_sqr() == 0.0 {
                    Err(Error::UndefinedPhase(l))
                } else {
                    Ok(z.arg())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Beamformer::Analog { phases })
    }

    /// A beamformer of `arch` realizing `f` as closely as the architecture
    /// allows. Digital is exact. Analog keeps the element phases. Hybrid
    /// with two or more RF chains is exact: each element is split as
    /// `f_l = (a/2)(e^{jα} + e^{jβ})` with `a = max |f_l|`, the remaining
    /// chains getting zero baseband weight. A single chain falls back to the
    /// analog phases.
    pub fn from_vector(arch: Architecture, f: &[Complex64], cfg: &ArrayConfig) -> Result<Self> {
        let n_t = cfg.n_t();
        if f.len() != n_t {
            return Err(Error::DimensionMismatch {
                what: "beamforming vector",
                expected: n_t,
                actual: f.len(),
            });
        }
        match arch {
            Architecture::Digital => Ok(Beamformer::Digital {
                w: unit_norm(f.to_vec(), "beamforming vector")?,
            }),
            Architecture::Analog => Beamformer::analog_from_vector(f),
            Architecture::Hybrid if cfg.n_rf == 1 => {
                let Beamformer::Analog { phases } = Beamformer::analog_from_vector(f)? else {
                    unreachable!()
                };
                Ok(Beamformer::Hybrid {
                    phi_rf: phases,
                    w_bb: vec![Complex64::new(1.0, 0.0)],
                })
            }
            Architecture::Hybrid => {
                let a = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::Degenerate("beamforming vector is zero".into()));
                }
                let mut phi_rf = vec![0.0; n_t * cfg.n_rf];
                for (l, z) in f.iter().enumerate() {
                    let spread = (z.norm() / a).min(1.0).acos();
                    phi_rf[l] = z.arg() + spread;
                    phi_rf[n_t + l] = z.arg() - spread;
                }
                let mut w_bb = vec![Complex64::new(0.0, 0.0); cfg.n_rf];
                let half = Complex64::new(a * (n_t as f64).sqrt() / 2.0, 0.0);
                w_bb[0] = half;
                w_bb[1] = half;
                Ok(Beamformer::Hybrid { phi_rf, w_bb })
            }
        }
    }
}

/// Projects a hybrid beamformer onto the constant-modulus set by keeping the
/// element phases of its realized vector.
pub fn analog_from_hybrid(bf: &Beamformer, cfg: &ArrayConfig) -> Result<Beamformer> {
    if bf.architecture() != Architecture::Hybrid {
        return Err(Error::Unsupported(format!(
            "analog projection expects a hybrid beamformer, got {}",
            bf.architecture().name()
        )));
    }
    Beamformer::analog_from_vector(&bf.realize(cfg)?)
}

/// Returns the realized vector of `f`'s parameters' layout; convenience for
/// `Beamformer::from_parameters(..)?.realize(..)`.
pub fn realize_parameters(layout: ParameterLayout, params: &[f64], cfg: &ArrayConfig) -> Result<Vec<Complex64>> {
    Beamformer::from_parameters(layout, params)?.realize(cfg)
}

// JSON form: an architecture tag plus plain decimal arrays.
#[derive(Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "lowercase")]
enum BeamformerFile {
    Digital {
        w_re: Vec<f64>,
        w_im: Vec<f64>,
    },
    Analog {
        phases: Vec<f64>,
    },
    Hybrid {
        n_t: usize,
        n_rf: usize,
        phi_rf: Vec<f64>,
        w_bb_re: Vec<f64>,
        w_bb_im: Vec<f64>,
    },
}

fn join(re: Vec<f64>, im: Vec<f64>) -> std::result::Result<Vec<Complex64>, String> {
    if re.len() != im.len() {
        return Err(format!("real/imaginary lengths differ ({} vs {})", re.len(), im.len()));
    }
    Ok(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect())
}

impl Serialize for Beamformer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let file = match self {
            Beamformer::Digital { w } => BeamformerFile::Digital {
                w_re: w.iter().map(|z| z.re).collect(),
                w_im: w.iter().map(|z| z.im).collect(),
            },
            Beamformer::Analog { phases } => BeamformerFile::Analog { phases: phases.clone() },
            Beamformer::Hybrid { phi_rf, w_bb } => BeamformerFile::Hybrid {
                n_t: phi_rf.len() / w_bb.len().max(1),
                n_rf: w_bb.len(),
                phi_rf: phi_rf.clone(),
                w_bb_re: w_bb.iter().map(|z| z.re).collect(),
                w_bb_im: w_bb.iter().map(|z| z.im).collect(),
            },
        };
        file.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Beamformer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        Ok(match BeamformerFile::deserialize(d)? {
            BeamformerFile::Digital { w_re, w_im } => Beamformer::Digital {
                w: join(w_re, w_im).map_err(D::Error::custom)?,
            },
            BeamformerFile::Analog { phases } => Beamformer::Analog { phases },
            BeamformerFile::Hybrid {
                n_t,
                n_rf,
                phi_rf,
                w_bb_re,
                w_bb_im,
            } => {
                let w_bb = join(w_bb_re, w_bb_im).map_err(D::Error::custom)?;
                if w_bb.len() != n_rf || phi_rf.len() != n_t * n_rf || n_rf == 0 {
                    return Err(D::Error::custom("hybrid dimensions are inconsistent"));
                }
                Beamformer::Hybrid { phi_rf, w_bb }
            }
        })
    }
}
