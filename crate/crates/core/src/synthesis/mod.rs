//! Pattern-to-beamformer synthesis.
//!
//! Two pathways share one Adam loop: direct optimization of the beamformer
//! parameters against a target, and an MLP decoder trained online over a
//! small set of targets.

mod adam;
mod decoder;
mod featurize;
mod mlp;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::array::{build_steering_matrix, ArrayConfig};
use crate::baselines::{LsRecovery, PhasePattern};
use crate::beamformer::{Architecture, Beamformer, ParameterLayout};
use crate::error::{Error, Result};
use crate::objective::{LossBreakdown, Objective, PeakMode};
use crate::pattern::BeamPattern;
use crate::rng::rng_for;

pub use adam::Adam;
pub use decoder::{decode, train_decoder, train_decoder_from, DecoderConfig, MlpDecoder, TrainedDecoder};
pub use featurize::{featurize, FEATURE_SIDE, N_FEATURES};
pub use mlp::{Activation, ForwardCache, Mlp};

/// Optimizer settings shared by direct synthesis and decoder training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub architecture: Architecture,
    pub learning_rate: f64,
    pub epochs: usize,
    pub betas: (f64, f64),
    pub epsilon: f64,
    pub seed: u64,
    pub restarts: usize,
    pub schedule: LrSchedule,
    /// Treatment of the peak reference in the search direction.
    pub peak: PeakMode,
    /// Starting point of the first restart; later restarts are random.
    pub init: Init,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Random,
    /// Least-squares fit of the target's linear amplitude with zero phase,
    /// mapped onto the architecture by [`Beamformer::from_vector`].
    LeastSquares,
    /// A digital run of the same length from a random start, mapped onto the
    /// architecture by [`Beamformer::from_vector`]. Doubles the epochs spent.
    Relaxed,
}

/// Learning-rate schedule over the epochs of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Cosine decay from the base rate to `final_fraction` of it.
    Cosine { final_fraction: f64 },
}

impl LrSchedule {
    pub fn factor(&self, epoch: usize, epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { final_fraction } => {
                let t = if epochs > 1 {
                    epoch as f64 / (epochs - 1) as f64
                } else {
                    0.0
                };
                final_fraction + (1.0 - final_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Digital,
            learning_rate: 1e-3,
            epochs: 500,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            seed: 0,
            restarts: 1,
            schedule: LrSchedule::Constant,
            peak: PeakMode::Soft { exponent: 10.0 },
            init: Init::Random,
        }
    }
}

impl SynthesisConfig {
    pub fn for_architecture(architecture: Architecture) -> Self {
        Self {
            architecture,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !beta_ok(self.betas.0) || !beta_ok(self.betas.1) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if let LrSchedule::Cosine { final_fraction } = self.schedule {
            if !(final_fraction > 0.0 && final_fraction <= 1.0) {
                return bad("cosine final fraction must lie in (0, 1]");
            }
        }
        self.peak.validate()
    }

    pub(crate) fn bind(&self, objective: &Objective) -> Objective {
        objective.clone().with_peak_mode(self.peak)
    }

    fn adam(&self, len: usize) -> Adam {
        Adam::new(len, self.learning_rate, self.betas, self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub beamformer: Beamformer,
    pub loss: LossBreakdown,
    /// Total loss at each epoch before its update.
    pub trajectory: Vec<f64>,
    pub wall_clock_s: f64,
}

pub(crate) struct Run<T> {
    pub params: Vec<f64>,
    pub loss: LossBreakdown,
    pub aux: T,
    pub trajectory: Vec<f64>,
}

/// Adam for `syn.epochs` steps, keeping the best iterate seen. The final
/// iterate after the last step is evaluated as well.
pub(crate) fn run_adam<T, F>(
    init: Vec<f64>,
    syn: &SynthesisConfig,
    lr_scale: Option<&[f64]>,
    mut eval: F,
) -> Result<Run<T>>
where
    F: FnMut(&[f64]) -> Result<(LossBreakdown, Vec<f64>, T)>,
{
    let mut params = init;
    let mut adam = syn.adam(params.len());
    let mut trajectory = Vec::with_capacity(syn.epochs);
    let mut best: Option<(Vec<f64>, LossBreakdown, T)> = None;
    for epoch in 0..=syn.epochs {
        let (loss, grads, aux) = eval(&params)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if best.as_ref().is_none_or(|b| loss.total < b.1.total) {
            best = Some((params.clone(), loss, aux));
        }
        if epoch == syn.epochs {
            break;
        }
        trajectory.push(loss.total);
        adam.set_learning_rate(syn.learning_rate * syn.schedule.factor(epoch, syn.epochs));
        adam.step(&mut params, &grads, lr_scale);
    }
    let (params, loss, aux) = best.expect("at least one evaluation");
    Ok(Run {
        params,
        loss,
        aux,
        trajectory,
    })
}

/// Step multipliers per parameter. A unit phase change moves the realized
/// vector by about 1/√n_t of its norm, so phase parameters take √n_t-times
/// larger steps than amplitude parameters.
fn phase_scale(layout: ParameterLayout) -> Option<Vec<f64>> {
    if layout.architecture == Architecture::Digital {
        return None;
    }
    let s = (layout.n_t as f64).sqrt();
    Some(
        (0..layout.len())
            .map(|k| if layout.is_phase(k) { s } else { 1.0 })
            .collect(),
    )
}

/// Minimizes the mean loss over `objectives` starting from `init`.
fn optimize(objectives: &[Objective], init: &Beamformer, syn: &SynthesisConfig) -> Result<Run<()>> {
    let cfg = *objectives[0].config();
    init.check(&cfg)?;
    let objectives: Vec<Objective> = objectives.iter().map(|o| syn.bind(o)).collect();
    let layout = init.layout();
    let scale = phase_scale(layout);
    let n = objectives.len() as f64;
    run_adam(init.parameters(), syn, scale.as_deref(), |p| {
        let bf = Beamformer::from_parameters(layout, p)?;
        let mut losses = Vec::with_capacity(objectives.len());
        let mut grads = vec![0.0; p.len()];
        for obj in &objectives {
            let (loss, g) = obj.gradient(&bf)?;
            losses.push(loss);
            for (acc, x) in grads.iter_mut().zip(&g.0) {
                *acc += x / n;
            }
        }
        Ok((LossBreakdown::mean(&losses), grads, ()))
    })
}

fn finish(run: Run<()>, layout: ParameterLayout, start: Instant) -> Result<SynthesisResult> {
    Ok(SynthesisResult {
        beamformer: Beamformer::from_parameters(layout, &run.params)?,
        loss: run.loss,
        trajectory: run.trajectory,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Direct gradient synthesis from seeded random starts. With several
/// restarts the lowest final loss wins; ties go to the earliest restart.
pub fn synthesize_direct(target: &BeamPattern, cfg: &ArrayConfig, syn: &SynthesisConfig) -> Result<SynthesisResult> {
    let objective = Objective::new(cfg, target)?;
    synthesize_with(&objective, syn)
}

/// [`synthesize_direct`] against a prepared objective.
pub fn synthesize_with(objective: &Objective, syn: &SynthesisConfig) -> Result<SynthesisResult> {
    syn.validate()?;
    let start = Instant::now();
    let cfg = *objective.config();
    let fitted = match syn.init {
        Init::Random => None,
        Init::LeastSquares => Some(least_squares_start(objective, syn.architecture)?),
        Init::Relaxed => Some(relaxed_start(objective, syn)?),
    };
    let runs: Vec<Result<(Run<()>, ParameterLayout)>> = (0..syn.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(syn.seed, r as u64);
            let init = match (&fitted, r) {
                (Some(bf), 0) => bf.clone(),
                _ => Beamformer::random(syn.architecture, &cfg, &mut rng),
            };
            let layout = init.layout();
            Ok((optimize(std::slice::from_ref(objective), &init, syn)?, layout))
        })
        .collect();
    let mut best: Option<(Run<()>, ParameterLayout)> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.0.loss.total < b.0.loss.total) {
            best = Some(run);
        }
    }
    let (run, layout) = best.expect("restarts >= 1");
    finish(run, layout, start)
}

/// Band-limited start: the array vector whose response best matches the
/// target's linear amplitude in the least-squares sense.
pub fn least_squares_start(objective: &Objective, arch: Architecture) -> Result<Beamformer> {
    let cfg = objective.config();
    let a = build_steering_matrix(cfg, objective.grid())?;
    let values = objective
        .target()
        .values()
        .iter()
        .map(|&db| Complex64::new(10f64.powf(db / 20.0), 0.0))
        .collect();
    let fit = LsRecovery::new(&a)?.recover(&PhasePattern { values })?;
    Beamformer::from_vector(arch, &fit.realize(cfg)?, cfg)
}

fn relaxed_start(objective: &Objective, syn: &SynthesisConfig) -> Result<Beamformer> {
    let cfg = objective.config();
    let mut rng = rng_for(syn.seed, 0);
    let init = Beamformer::random(Architecture::Digital, cfg, &mut rng);
    let run = optimize(std::slice::from_ref(objective), &init, syn)?;
    let digital = Beamformer::from_parameters(init.layout(), &run.params)?;
    Beamformer::from_vector(syn.architecture, &digital.realize(cfg)?, cfg)
}

/// Direct synthesis from a given starting beamformer (no restarts).
pub fn synthesize_from(objective: &Objective, init: &Beamformer, syn: &SynthesisConfig) -> Result<SynthesisResult> {
    syn.validate()?;
    let start = Instant::now();
    let run = optimize(std::slice::from_ref(objective), init, syn)?;
    finish(run, init.layout(), start)
}

/// One beamformer minimizing the mean loss over several objectives; the
/// best input-independent predictor for that set.
pub fn synthesize_shared(
    objectives: &[Objective],
    cfg: &ArrayConfig,
    syn: &SynthesisConfig,
) -> Result<SynthesisResult> {
    syn.validate()?;
    if objectives.is_empty() {
        return Err(Error::InvalidConfig("at least one objective is required".into()));
    }
    let start = Instant::now();
    let mut rng = rng_for(syn.seed, 0);
    let init = Beamformer::random(syn.architecture, cfg, &mut rng);
    let run = optimize(objectives, &init, syn)?;
    finish(run, init.layout(), start)
}
