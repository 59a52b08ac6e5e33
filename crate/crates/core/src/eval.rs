//! Spectral efficiency, SNR sweeps and pattern-compliance metrics.
//!
//! A sweep derives one target per channel from its MRT beamformer, runs
//! every requested method against it and averages `log2(1 + ρ |hᴴf|²)`
//! over the channels. Methods that fail on a channel are excluded from that
//! channel's averages and listed in the report.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{build_steering_matrix, pattern_with, AngleGrid, ArrayConfig, ArrayResponse};
use crate::baselines::{
    dft_codebook_abf, inner, mrt, omp_hybrid, partial_csi_dbf, LsRecovery, OmpDictionary, PhasePattern,
};
use crate::beamformer::Architecture;
use crate::channel::{generate_channels, load_channels, Channel, ChannelModelConfig};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::pattern::{segment_regions, BeamPattern, RegionMask};
use crate::rng::mix;
use crate::synthesis::{decode, synthesize_with, train_decoder, DecoderConfig, Init, MlpDecoder, SynthesisConfig};

/// `log2(1 + 10^{snr/10} |hᴴf|²)`, bits/s/Hz.
pub fn spectral_efficiency(h: &Channel, f: &[Complex64], snr_db: f64) -> Result<f64> {
    if f.len() != h.n_t() {
        return Err(Error::DimensionMismatch {
            what: "beamforming vector",
            expected: h.n_t(),
            actual: f.len(),
        });
    }
    let norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "beamformer must have unit norm, got {norm}"
        )));
    }
    Ok(rate(inner(h.h(), f).norm_sqr(), snr_db))
}

fn rate(gain: f64, snr_db: f64) -> f64 {
    (1.0 + 10f64.powf(snr_db / 10.0) * gain).log2()
}

/// −20, −15, ..., 20 dB.
pub fn default_snrs() -> Vec<f64> {
    (0..9).map(|k| -20.0 + 5.0 * k as f64).collect()
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::InvalidConfig(format!("SNR list '{s}': {msg}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| bad(format!("'{t}': {e}")));
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(bad("expected start <= stop and a positive step".into()));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| start + step * k as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("expected start:step:stop or a comma list".into())),
    };
    if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
        return Err(bad("no finite values".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mrt,
    PartialCsi,
    Omp,
    Dft,
    Ls,
    DirectDigital,
    DirectAnalog,
    DirectHybrid,
    DecoderDigital,
    DecoderHybrid,
    DecoderAnalog,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Mrt,
        Method::PartialCsi,
        Method::Omp,
        Method::Dft,
        Method::Ls,
        Method::DirectDigital,
        Method::DirectAnalog,
        Method::DirectHybrid,
        Method::DecoderDigital,
        Method::DecoderHybrid,
        Method::DecoderAnalog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mrt => "mrt",
            Method::PartialCsi => "partial-csi",
            Method::Omp => "omp",
            Method::Dft => "dft",
            Method::Ls => "ls",
            Method::DirectDigital => "direct-digital",
            Method::DirectAnalog => "direct-analog",
            Method::DirectHybrid => "direct-hybrid",
            Method::DecoderDigital => "decoder-digital",
            Method::DecoderHybrid => "decoder-hybrid",
            Method::DecoderAnalog => "decoder-analog",
        }
    }

    /// Architecture of the produced beamformer.
    pub fn architecture(self) -> Architecture {
        match self {
            Method::Mrt | Method::PartialCsi | Method::Ls | Method::DirectDigital | Method::DecoderDigital => {
                Architecture::Digital
            }
            Method::Dft | Method::DirectAnalog | Method::DecoderAnalog => Architecture::Analog,
            Method::Omp | Method::DirectHybrid | Method::DecoderHybrid => Architecture::Hybrid,
        }
    }

    /// Whether the method works from the target pattern alone.
    pub fn is_pattern_based(self) -> bool {
        matches!(
            self,
            Method::DirectDigital
                | Method::DirectAnalog
                | Method::DirectHybrid
                | Method::DecoderDigital
                | Method::DecoderHybrid
                | Method::DecoderAnalog
        )
    }

    fn code(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).expect("listed") as u64
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// Comma-separated method names; `all` expands to every method.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if name == "all" {
            out.extend(Method::ALL);
        } else {
            out.push(name.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("no methods given".into()));
    }
    let mut seen = Vec::new();
    out.retain(|m| {
        let fresh = !seen.contains(m);
        seen.push(*m);
        fresh
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSource {
    Generated { model: ChannelModelConfig, count: usize },
    File { csv: PathBuf, sidecar: Option<PathBuf> },
}

impl Default for ChannelSource {
    fn default() -> Self {
        ChannelSource::Generated {
            model: ChannelModelConfig::default(),
            count: 10,
        }
    }
}

impl ChannelSource {
    pub fn load(&self, cfg: &ArrayConfig) -> Result<Vec<Channel>> {
        match self {
            ChannelSource::Generated { model, count } => generate_channels(cfg, model, *count),
            ChannelSource::File { csv, sidecar } => load_channels(csv, sidecar.as_deref(), Some(cfg)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub snrs_db: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub channels: ChannelSource,
    /// Settings for the direct methods; the seed and architecture are
    /// overridden per run.
    pub synthesis: SynthesisConfig,
    /// Optimizer settings for decoder training, overridden likewise.
    pub decoder_training: SynthesisConfig,
    pub decoder: DecoderConfig,
    /// Dictionary resolution per sine axis for OMP.
    pub omp_per_axis: usize,
    /// Include wall-clock seconds in the report (makes it non-reproducible).
    pub record_timing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            snrs_db: default_snrs(),
            methods: vec![
                Method::Mrt,
                Method::PartialCsi,
                Method::Omp,
                Method::Dft,
                Method::Ls,
                Method::DirectDigital,
                Method::DirectAnalog,
                Method::DirectHybrid,
            ],
            seed: 0,
            channels: ChannelSource::default(),
            synthesis: SynthesisConfig {
                learning_rate: 1e-2,
                init: Init::Relaxed,
                ..SynthesisConfig::default()
            },
            decoder_training: SynthesisConfig::default(),
            decoder: DecoderConfig::default(),
            omp_per_axis: 64,
            record_timing: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snrs_db.is_empty() || self.snrs_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("SNR list must be non-empty and finite".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods given".into()));
        }
        if self.omp_per_axis == 0 {
            return Err(Error::InvalidConfig(
                "OMP dictionary needs at least one point per axis".into(),
            ));
        }
        self.synthesis.validate()?;
        self.decoder_training.validate()
    }
}

/// Agreement of a synthesized pattern with its target, per region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceMetrics {
    /// Largest |synth − target| over main-lobe cells, dB.
    pub main_lobe_max_dev_db: f64,
    /// Fraction of main-lobe cells within 2 dB of the target.
    pub main_lobe_within_2db: f64,
    /// Fraction of side-lobe cells where synth exceeds the target.
    pub side_lobe_violation: f64,
    /// RMS deviation over moderate cells, dB.
    pub moderate_rms_db: f64,
}

pub fn pattern_compliance(target: &BeamPattern, synth: &BeamPattern, mask: &RegionMask) -> Result<ComplianceMetrics> {
    if !target.same_grid(synth) || mask.len() != target.values().len() {
        return Err(Error::GridMismatch);
    }
    let (t, s) = (target.values(), synth.values());
    let dev = |c: usize| (s[c] - t[c]).abs();
    let frac = |n: usize, of: usize| if of == 0 { 0.0 } else { n as f64 / of as f64 };
    let ml = mask.main_lobe();
    let moderate_rms_db = if mask.n_md() == 0 {
        0.0
    } else {
        (mask.moderate().iter().map(|&c| dev(c).powi(2)).sum::<f64>() / mask.n_md() as f64).sqrt()
    };
    Ok(ComplianceMetrics {
        main_lobe_max_dev_db: ml.iter().map(|&c| dev(c)).fold(0.0, f64::max),
        main_lobe_within_2db: if ml.is_empty() {
            1.0
        } else {
            frac(ml.iter().filter(|&&c| dev(c) <= 2.0).count(), ml.len())
        },
        side_lobe_violation: frac(mask.side_lobe().iter().filter(|&&c| s[c] > t[c]).count(), mask.n_sl()),
        moderate_rms_db,
    })
}

impl ComplianceMetrics {
    fn mean(items: &[ComplianceMetrics]) -> Option<ComplianceMetrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let avg = |f: fn(&ComplianceMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Some(ComplianceMetrics {
            main_lobe_max_dev_db: avg(|m| m.main_lobe_max_dev_db),
            main_lobe_within_2db: avg(|m| m.main_lobe_within_2db),
            side_lobe_violation: avg(|m| m.side_lobe_violation),
            moderate_rms_db: avg(|m| m.moderate_rms_db),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub channel: usize,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Mean spectral efficiency per SNR over the channels the method solved.
    pub mean_se: Vec<f64>,
    /// Per SNR, mean SE divided by MRT's mean SE on the same channels.
    pub percent_of_optimal: Vec<f64>,
    /// Mean of `percent_of_optimal` over the SNR grid.
    pub mean_percent_of_optimal: Option<f64>,
    /// `|hᴴf|²` per channel; `None` where the method failed.
    pub channel_gains: Vec<Option<f64>>,
    pub failures: Vec<Failure>,
    /// Mean compliance against the MRT target (pattern-based methods only).
    pub compliance: Option<ComplianceMetrics>,
    pub wall_clock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub snrs_db: Vec<f64>,
    pub n_channels: usize,
    pub seed: u64,
    /// MRT spectral efficiency per channel and SNR.
    pub mrt_se: Vec<Vec<f64>>,
    pub methods: Vec<MethodReport>,
    /// Total number of (channel, method) failures.
    pub warnings: usize,
}

impl EvalReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// SE of `m` on channel `c` at SNR index `k`, if the method succeeded.
    pub fn se(&self, m: Method, c: usize, k: usize) -> Option<f64> {
        let g = self.method(m)?.channel_gains.get(c).copied().flatten()?;
        Some(rate(g, self.snrs_db[k]))
    }
}

/// Shared state built once per sweep.
struct Context<'a> {
    cfg: &'a ArrayConfig,
    eval: &'a EvalConfig,
    grid: Arc<AngleGrid>,
    response: Arc<ArrayResponse>,
    channels: &'a [Channel],
    mrt: Vec<Vec<Complex64>>,
    targets: Vec<BeamPattern>,
    masks: Vec<RegionMask>,
}

struct Outcome {
    f: Vec<Complex64>,
    compliance: Option<ComplianceMetrics>,
}

impl Context<'_> {
    fn seed(&self, m: Method, c: usize) -> u64 {
        mix(mix(self.eval.seed, m.code()), c as u64)
    }

    fn outcome(&self, c: usize, f: Vec<Complex64>, pattern_based: bool) -> Result<Outcome> {
        let compliance = if pattern_based {
            let synth = pattern_with(&self.response, &self.grid, &f)?;
            Some(pattern_compliance(&self.targets[c], &synth, &self.masks[c])?)
        } else {
            None
        };
        Ok(Outcome { f, compliance })
    }

    fn direct(&self, m: Method, c: usize) -> Result<Outcome> {
        let syn = SynthesisConfig {
            architecture: m.architecture(),
            seed: self.seed(m, c),
            ..self.eval.synthesis.clone()
        };
        let objective =
            Objective::with_response(self.cfg, self.response.clone(), &self.targets[c], self.masks[c].clone())?;
        let res = synthesize_with(&objective, &syn)?;
        self.outcome(c, res.beamformer.realize(self.cfg)?, true)
    }

    fn train(&self, arch: Architecture, m: Method) -> Result<MlpDecoder> {
        let syn = SynthesisConfig {
            architecture: arch,
            seed: mix(self.eval.seed, 100 + m.code()),
            ..self.eval.decoder_training.clone()
        };
        Ok(train_decoder(&self.targets, self.cfg, &syn, &self.eval.decoder)?.decoder)
    }
}

/// Runs every configured method on every channel.
pub fn run_sweep(cfg: &ArrayConfig, eval: &EvalConfig, channels: &[Channel]) -> Result<EvalReport> {
    cfg.validate()?;
    eval.validate()?;
    if channels.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one channel".into()));
    }
    if let Some(ch) = channels.iter().find(|ch| ch.n_t() != cfg.n_t()) {
        return Err(Error::DimensionMismatch {
            what: "channel vector",
            expected: cfg.n_t(),
            actual: ch.n_t(),
        });
    }
    let grid = Arc::new(AngleGrid::default());
    let response = Arc::new(ArrayResponse::new(cfg, &grid));
    let mrt = channels
        .iter()
        .map(|ch| mrt(ch)?.realize(cfg))
        .collect::<Result<Vec<_>>>()?;
    let targets = mrt
        .iter()
        .map(|f| pattern_with(&response, &grid, f))
        .collect::<Result<Vec<_>>>()?;
    let masks = targets.iter().map(segment_regions).collect();
    let ctx = Context {
        cfg,
        eval,
        grid,
        response,
        channels,
        mrt,
        targets,
        masks,
    };

    let wants = |ms: &[Method]| eval.methods.iter().any(|m| ms.contains(m));
    let steering = if wants(&[Method::Ls]) {
        Some(build_steering_matrix(cfg, &ctx.grid)?)
    } else {
        None
    };
    let ls = steering.as_ref().map(LsRecovery::new).transpose()?;
    let dict = if wants(&[Method::Omp]) {
        Some(OmpDictionary::sine_grid(cfg, eval.omp_per_axis)?)
    } else {
        None
    };

    let mrt_se: Vec<Vec<f64>> = channels
        .iter()
        .zip(&ctx.mrt)
        .map(|(ch, f)| eval.snrs_db.iter().map(|&s| spectral_efficiency(ch, f, s)).collect())
        .collect::<Result<_>>()?;

    let mut methods = Vec::with_capacity(eval.methods.len());
    for &m in &eval.methods {
        let start = Instant::now();
        // Decoders are trained once per sweep on all targets.
        let decoder = match m {
            Method::DecoderDigital => Some(ctx.train(Architecture::Digital, m)),
            Method::DecoderHybrid | Method::DecoderAnalog => Some(ctx.train(Architecture::Hybrid, m)),
            _ => None,
        };
        let outcomes: Vec<Result<Outcome>> = (0..channels.len())
            .into_par_iter()
            .map(|c| {
                let ch = &channels[c];
                match m {
                    Method::Mrt => ctx.outcome(c, ctx.mrt[c].clone(), false),
                    Method::PartialCsi => ctx.outcome(c, partial_csi_dbf(ch.paths(), cfg)?.realize(cfg)?, false),
                    Method::Omp => {
                        let dict = dict.as_ref().expect("built when requested");
                        ctx.outcome(c, omp_hybrid(&ctx.mrt[c], cfg, dict)?.beamformer.realize(cfg)?, false)
                    }
                    Method::Dft => ctx.outcome(c, dft_codebook_abf(ch, cfg)?.realize(cfg)?, false),
                    Method::Ls => {
                        let a = steering.as_ref().expect("built when requested");
                        let xp = PhasePattern::from_vector(a, &ctx.mrt[c])?;
                        let bf = ls.as_ref().expect("built when requested").recover(&xp)?;
                        ctx.outcome(c, bf.realize(cfg)?, false)
                    }
                    Method::DirectDigital | Method::DirectAnalog | Method::DirectHybrid => ctx.direct(m, c),
                    Method::DecoderDigital | Method::DecoderHybrid | Method::DecoderAnalog => {
                        let dec = match decoder.as_ref().expect("trained for decoder methods") {
                            Ok(d) => d,
                            Err(e) => return Err(Error::Degenerate(format!("decoder training failed: {e}"))),
                        };
                        let bf = decode(dec, &ctx.targets[c], cfg, m.architecture())?;
                        ctx.outcome(c, bf.realize(cfg)?, true)
                    }
                }
            })
            .collect();
        let elapsed = start.elapsed().as_secs_f64();
        methods.push(summarize(
            &ctx,
            &mrt_se,
            m,
            outcomes,
            eval.record_timing.then_some(elapsed),
        )?);
    }
    let warnings = methods.iter().map(|r| r.failures.len()).sum();
    Ok(EvalReport {
        snrs_db: eval.snrs_db.clone(),
        n_channels: channels.len(),
        seed: eval.seed,
        mrt_se,
        methods,
        warnings,
    })
}

fn summarize(
    ctx: &Context,
    mrt_se: &[Vec<f64>],
    m: Method,
    outcomes: Vec<Result<Outcome>>,
    wall_clock_s: Option<f64>,
) -> Result<MethodReport> {
    let snrs = &ctx.eval.snrs_db;
    let mut gains = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    let mut compliance = Vec::new();
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(o) => {
                gains.push(Some(inner(ctx.channels[c].h(), &o.f).norm_sqr()));
                compliance.extend(o.compliance);
            }
            Err(e) => {
                gains.push(None);
                failures.push(Failure {
                    channel: c,
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }
    let solved: Vec<(usize, f64)> = gains
        .iter()
        .enumerate()
        .filter_map(|(c, g)| g.map(|g| (c, g)))
        .collect();
    let (mut mean_se, mut percent) = (Vec::new(), Vec::new());
    if !solved.is_empty() {
        let n = solved.len() as f64;
        for (k, &snr) in snrs.iter().enumerate() {
            let own = solved.iter().map(|&(_, g)| rate(g, snr)).sum::<f64>() / n;
            let best = solved.iter().map(|&(c, _)| mrt_se[c][k]).sum::<f64>() / n;
            mean_se.push(own);
            percent.push(if best > 0.0 { (own / best).min(1.0) } else { 1.0 });
        }
    }
    let mean_percent = (!percent.is_empty()).then(|| percent.iter().sum::<f64>() / percent.len() as f64);
    Ok(MethodReport {
        method: m,
        mean_se,
        percent_of_optimal: percent,
        mean_percent_of_optimal: mean_percent,
        channel_gains: gains,
        failures,
        compliance: ComplianceMetrics::mean(&compliance),
        wall_clock_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PathParams;
    use crate::rng::{rng_for, unit_complex_vector};

    fn small() -> ArrayConfig {
        ArrayConfig::new(4, 4, 0.5, 1.0, 2).unwrap()
    }

    #[test]
    fn se_oracles() {
        let cfg = small();
        let mut rng = rng_for(3, 0);
        let h = Channel::new(unit_complex_vector(&mut rng, cfg.n_t())).unwrap();
        let f = mrt(&h).unwrap().realize(&cfg).unwrap();
        assert!((spectral_efficiency(&h, &f, 0.0).unwrap() - 1.0).abs() < 1e-12);

        // Orthogonal beam built from two entries of h.
        let mut o = vec![Complex64::new(0.0, 0.0); cfg.n_t()];
        o[0] = h.h()[1].conj();
        o[1] = -h.h()[0].conj();
        let n = o.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let o: Vec<Complex64> = o.iter().map(|z| z / n).collect();
        assert!(spectral_efficiency(&h, &o, 10.0).unwrap().abs() < 1e-12);

        let g = unit_complex_vector(&mut rng, cfg.n_t());
        let direct: Complex64 = h.h().iter().zip(&g).map(|(a, b)| a.conj() * b).sum();
        let want = (1.0 + 10.0 * direct.norm_sqr()).log2();
        assert!((spectral_efficiency(&h, &g, 10.0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn se_rejects_non_unit_vectors() {
        let cfg = small();
        let h = Channel::new(vec![Complex64::new(1.0, 0.0); cfg.n_t()]).unwrap();
        let f = vec![Complex64::new(1.0, 0.0); cfg.n_t()];
        assert!(matches!(spectral_efficiency(&h, &f, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn snr_lists() {
        assert_eq!(parse_snr_list("-20:5:20").unwrap(), default_snrs());
        assert_eq!(parse_snr_list("0, 10").unwrap(), vec![0.0, 10.0]);
        assert_eq!(parse_snr_list("3:1:3").unwrap(), vec![3.0]);
        assert!(parse_snr_list("1:0:3").is_err());
        assert!(parse_snr_list("x").is_err());
        assert!(parse_snr_list("1:2").is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert_eq!(parse_methods("mrt,dft,mrt").unwrap(), vec![Method::Mrt, Method::Dft]);
        assert_eq!(parse_methods("all").unwrap().len(), Method::ALL.len());
        assert!(parse_methods("mrt,bogus").is_err());
    }

    #[test]
    fn compliance_cases() {
        let grid = Arc::new(AngleGrid::uniform((10.0, 170.0), (-80.0, 80.0), 20.0).unwrap());
        let n = grid.len();
        let mut t = vec![-30.0; n];
        t[0] = 0.0;
        t[1] = -5.0;
        t[2] = -15.0;
        let target = BeamPattern::from_db(grid.clone(), t.clone()).unwrap();
        let mask = segment_regions(&target);
        let same = pattern_compliance(&target, &target, &mask).unwrap();
        assert_eq!(same.main_lobe_max_dev_db, 0.0);
        assert_eq!(same.side_lobe_violation, 0.0);
        assert_eq!(same.moderate_rms_db, 0.0);

        let mut s = t.clone();
        s[1] = -2.0;
        s[2] = -11.0;
        s[5] = -29.0;
        let synth = BeamPattern::from_db(grid, s).unwrap();
        let m = pattern_compliance(&target, &synth, &mask).unwrap();
        assert!((m.main_lobe_max_dev_db - 3.0).abs() < 1e-12);
        assert!((m.main_lobe_within_2db - 0.5).abs() < 1e-12);
        assert!((m.moderate_rms_db - 4.0).abs() < 1e-12);
        assert!((m.side_lobe_violation - 1.0 / mask.n_sl() as f64).abs() < 1e-12);
    }

    fn steering_channels(cfg: &ArrayConfig) -> Vec<Channel> {
        [(90.0, 0.0), (70.0, 20.0), (110.0, -35.0)]
            .iter()
            .map(|&(z, a)| Channel::from_paths(cfg, vec![PathParams::new(Complex64::new(1.0, 0.0), z, a)]).unwrap())
            .collect()
    }

    #[test]
    fn mrt_only_sweep_is_fully_optimal() {
        let cfg = small();
        let eval = EvalConfig {
            methods: vec![Method::Mrt],
            ..EvalConfig::default()
        };
        let report = run_sweep(&cfg, &eval, &steering_channels(&cfg)).unwrap();
        let r = report.method(Method::Mrt).unwrap();
        assert!(r.percent_of_optimal.iter().all(|&p| p == 1.0));
        assert_eq!(r.mean_percent_of_optimal, Some(1.0));
        assert_eq!(report.warnings, 0);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let cfg = small();
        let mut rng = rng_for(9, 0);
        let mut channels = steering_channels(&cfg);
        channels.push(Channel::new(unit_complex_vector(&mut rng, cfg.n_t())).unwrap());
        let eval = EvalConfig {
            methods: vec![Method::Mrt, Method::PartialCsi],
            ..EvalConfig::default()
        };
        let report = run_sweep(&cfg, &eval, &channels).unwrap();
        let r = report.method(Method::PartialCsi).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].channel, 3);
        assert_eq!(r.channel_gains[3], None);
        assert_eq!(report.warnings, 1);
        // One-path channels: partial CSI equals MRT up to phase.
        assert!(r.percent_of_optimal.iter().all(|&p| (p - 1.0).abs() < 1e-9));
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = small();
        let eval = EvalConfig {
            methods: vec![Method::Mrt, Method::Dft, Method::Omp, Method::DirectAnalog],
            synthesis: SynthesisConfig {
                epochs: 20,
                learning_rate: 1e-2,
                ..SynthesisConfig::default()
            },
            ..EvalConfig::default()
        };
        let ch = steering_channels(&cfg);
        let a = serde_json::to_string(&run_sweep(&cfg, &eval, &ch).unwrap()).unwrap();
        let b = serde_json::to_string(&run_sweep(&cfg, &eval, &ch).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("wall_clock_s\":0") && a.contains("\"wall_clock_s\":null"));
    }

    #[test]
    fn config_json_defaults() {
        let eval: EvalConfig = serde_json::from_str(r#"{"seed": 4, "methods": ["mrt", "dft"]}"#).unwrap();
        assert_eq!(eval.seed, 4);
        assert_eq!(eval.snrs_db, default_snrs());
        assert!(serde_json::from_str::<EvalConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
