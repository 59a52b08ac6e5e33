//! MLP decoder from pattern features to beamformer parameters, trained
//! online over a small target set.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::featurize::{featurize, N_FEATURES};
use super::mlp::Mlp;
use super::{run_adam, SynthesisConfig};
use crate::array::ArrayConfig;
use crate::beamformer::{analog_from_hybrid, Architecture, Beamformer, ParameterLayout};
use crate::error::{Error, Result};
use crate::objective::{LossBreakdown, Objective};
use crate::pattern::BeamPattern;
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    /// Hidden layer widths between the 1024 features and the output.
    pub hidden: Vec<usize>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            hidden: vec![1024, 2048, 1024],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDecoder {
    pub architecture: Architecture,
    pub n_t: usize,
    pub n_rf: usize,
    pub mlp: Mlp,
}

impl MlpDecoder {
    /// Randomly initialized decoder for `architecture` (digital or hybrid).
    pub fn new(architecture: Architecture, cfg: &ArrayConfig, dec: &DecoderConfig, seed: u64) -> Result<Self> {
        let layout = head_layout(architecture, cfg)?;
        let mut widths = vec![N_FEATURES];
        widths.extend(&dec.hidden);
        widths.push(layout.len());
        let mut rng = rng_for(seed, 0);
        Ok(Self::from_mlp(architecture, cfg, Mlp::new(&widths, &mut rng)?))
    }

    pub fn from_mlp(architecture: Architecture, cfg: &ArrayConfig, mlp: Mlp) -> Self {
        Self {
            architecture,
            n_t: cfg.n_t(),
            n_rf: cfg.n_rf,
            mlp,
        }
    }

    pub fn layout(&self) -> ParameterLayout {
        ParameterLayout {
            architecture: self.architecture,
            n_t: self.n_t,
            n_rf: self.n_rf,
        }
    }

    pub fn validate(&self, cfg: &ArrayConfig) -> Result<()> {
        self.mlp.validate()?;
        if self.n_t != cfg.n_t() {
            return Err(Error::DimensionMismatch {
                what: "decoder elements",
                expected: cfg.n_t(),
                actual: self.n_t,
            });
        }
        if self.architecture == Architecture::Hybrid && self.n_rf != cfg.n_rf {
            return Err(Error::DimensionMismatch {
                what: "decoder RF chains",
                expected: cfg.n_rf,
                actual: self.n_rf,
            });
        }
        if self.mlp.n_inputs() != N_FEATURES || self.mlp.n_outputs() != self.layout().len() {
            return Err(Error::DimensionMismatch {
                what: "decoder output",
                expected: self.layout().len(),
                actual: self.mlp.n_outputs(),
            });
        }
        Ok(())
    }
}

fn head_layout(architecture: Architecture, cfg: &ArrayConfig) -> Result<ParameterLayout> {
    match architecture {
        Architecture::Digital | Architecture::Hybrid => Ok(ParameterLayout::new(architecture, cfg)),
        Architecture::Analog => Err(Error::Unsupported(
            "decoders are trained with a digital or hybrid head; request analog output at decode time".into(),
        )),
    }
}

#[derive(Debug, Clone)]
pub struct TrainedDecoder {
    pub decoder: MlpDecoder,
    /// Mean total loss at each epoch before its update.
    pub trajectory: Vec<f64>,
    /// Mean breakdown of the returned decoder over the training targets.
    pub loss: LossBreakdown,
    pub per_target: Vec<LossBreakdown>,
    pub wall_clock_s: f64,
}

fn feature_matrix(targets: &[BeamPattern]) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((targets.len(), N_FEATURES));
    for (mut row, t) in x.rows_mut().into_iter().zip(targets) {
        row.assign(&ndarray::Array1::from(featurize(t)?));
    }
    Ok(x)
}

/// Full-batch online training from a seeded random initialization.
pub fn train_decoder(
    targets: &[BeamPattern],
    cfg: &ArrayConfig,
    syn: &SynthesisConfig,
    dec: &DecoderConfig,
) -> Result<TrainedDecoder> {
    let init = MlpDecoder::new(syn.architecture, cfg, dec, syn.seed)?;
    train_decoder_from(init, targets, cfg, syn)
}

/// Online training starting from a given decoder.
pub fn train_decoder_from(
    init: MlpDecoder,
    targets: &[BeamPattern],
    cfg: &ArrayConfig,
    syn: &SynthesisConfig,
) -> Result<TrainedDecoder> {
    syn.validate()?;
    init.validate(cfg)?;
    if targets.is_empty() {
        return Err(Error::InvalidConfig(
            "decoder training needs at least one target".into(),
        ));
    }
    let start = Instant::now();
    let x = feature_matrix(targets)?;
    let objectives = targets
        .iter()
        .map(|t| {
            if !t.same_grid(&targets[0]) {
                return Err(Error::GridMismatch);
            }
            Ok(syn.bind(&Objective::new(cfg, t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let layout = init.layout();
    let n = targets.len() as f64;
    let mlp = &init.mlp;
    let run = run_adam(mlp.params().to_vec(), syn, None, |p| {
        let cache = mlp.forward_with(p, x.clone())?;
        let out = cache.output();
        let rows: Vec<Vec<f64>> = out.outer_iter().map(|r| r.to_vec()).collect();
        let per: Vec<(LossBreakdown, Vec<f64>)> = objectives
            .par_iter()
            .zip(rows.par_iter())
            .map(|(obj, row)| {
                let bf = Beamformer::from_parameters(layout, row)?;
                let (loss, g) = obj.gradient(&bf)?;
                Ok((loss, g.0))
            })
            .collect::<Result<_>>()?;
        let mut d_out = Array2::zeros(out.raw_dim());
        for (mut row, (_, g)) in d_out.rows_mut().into_iter().zip(&per) {
            row.iter_mut().zip(g).for_each(|(d, gk)| *d = gk / n);
        }
        let grads = mlp.backward_with(p, &cache, d_out);
        let losses: Vec<LossBreakdown> = per.into_iter().map(|(l, _)| l).collect();
        Ok((LossBreakdown::mean(&losses), grads, losses))
    })?;
    let mut decoder = init;
    decoder.mlp.params_mut().copy_from_slice(&run.params);
    Ok(TrainedDecoder {
        decoder,
        trajectory: run.trajectory,
        loss: run.loss,
        per_target: run.aux,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Forward pass for one target. An analog request on a hybrid decoder keeps
/// the element phases of the hybrid output.
pub fn decode(
    dec: &MlpDecoder,
    target: &BeamPattern,
    cfg: &ArrayConfig,
    architecture: Architecture,
) -> Result<Beamformer> {
    dec.validate(cfg)?;
    let x = Array2::from_shape_vec((1, N_FEATURES), featurize(target)?).expect("feature vector has N_FEATURES entries");
    let cache = dec.mlp.forward(x)?;
    let bf = Beamformer::from_parameters(dec.layout(), cache.output().as_slice().expect("contiguous output"))?;
    match (dec.architecture, architecture) {
        (a, b) if a == b => Ok(bf),
        (Architecture::Hybrid, Architecture::Analog) => analog_from_hybrid(&bf, cfg),
        (a, b) => Err(Error::Unsupported(format!(
            "a {} decoder cannot produce {} beamformers",
            a.name(),
            b.name()
        ))),
    }
}
