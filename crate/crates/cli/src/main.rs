use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use beamsynth::array::compute_pattern;
use beamsynth::channel::{generate_channels, load_channels, save_channels};
use beamsynth::eval::{parse_methods, parse_snr_list, run_sweep, EvalConfig, EvalReport};
use beamsynth::io::{read_target, write_pattern_csv, write_pgm, write_target};
use beamsynth::pattern::make_target;
use beamsynth::synthesis::{decode, synthesize_direct, train_decoder, DecoderConfig, MlpDecoder, SynthesisConfig};
use beamsynth::{
    AngleGrid, Architecture, ArrayConfig, Beamformer, ChannelModelConfig, Error, LossBreakdown, Objective, Result,
    TargetShape, TargetSpec,
};

#[derive(Parser)]
#[command(name = "beamsynth", version, about = "Beamforming design from target beam patterns")]
struct Cli {
    /// Record wall-clock seconds in reports (their bytes then differ per run).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate channels from the clustered model.
    GenChannels {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Write a synthetic target pattern and its JSON sidecar.
    GenTarget {
        #[arg(long, value_enum)]
        shape: Shape,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a beamformer for a target pattern.
    Synth {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum)]
        arch: Arch,
        #[arg(long, value_enum, default_value_t = Mode::Direct)]
        mode: Mode,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trained decoder, required with `--mode decoder`.
        #[arg(long)]
        decoder: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train an MLP decoder on every target CSV in a directory.
    TrainDecoder {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, value_enum)]
        arch: Arch,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Spectral-efficiency sweep over channels and methods.
    Eval {
        /// Channel CSV; without it channels come from the config.
        #[arg(long)]
        channels: Option<PathBuf>,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long)]
        methods: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        plots: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export the pattern of a beamformer.
    Pattern {
        #[arg(long)]
        beamformer: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Pencil,
    Triangular,
    Flattop,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Digital,
    Analog,
    Hybrid,
}

impl From<Arch> for Architecture {
    fn from(a: Arch) -> Self {
        match a {
            Arch::Digital => Architecture::Digital,
            Arch::Analog => Architecture::Analog,
            Arch::Hybrid => Architecture::Hybrid,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Direct,
    Decoder,
}

/// Shared configuration file; every section is optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    array: Option<ArrayConfig>,
    synthesis: SynthesisConfig,
    decoder: DecoderConfig,
    channel_model: ChannelModelConfig,
    eval: EvalConfig,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        cfg.array().validate()?;
        Ok(cfg)
    }

    fn array(&self) -> ArrayConfig {
        self.array.unwrap_or_default()
    }
}

/// Optional overrides for `gen-target`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TargetParams {
    center_zenith_deg: Option<f64>,
    center_azimuth_deg: Option<f64>,
    side_lobe_db: Option<f64>,
    taper_deg: Option<f64>,
    base_deg: Option<f64>,
    width_deg: Option<f64>,
    height_deg: Option<f64>,
}

fn target_spec(shape: Shape, p: &TargetParams) -> TargetSpec {
    let shape = match shape {
        Shape::Pencil => TargetShape::Pencil,
        Shape::Triangular => TargetShape::Triangular {
            base_deg: p.base_deg.unwrap_or(40.0),
            height_deg: p.height_deg.unwrap_or(30.0),
        },
        Shape::Flattop => TargetShape::FlatTop {
            width_deg: p.width_deg.unwrap_or(20.0),
            height_deg: p.height_deg.unwrap_or(20.0),
        },
    };
    let default_taper = if shape == TargetShape::Pencil { 0.0 } else { 3.0 };
    TargetSpec {
        shape,
        center_zenith_deg: p.center_zenith_deg.unwrap_or(90.0),
        center_azimuth_deg: p.center_azimuth_deg.unwrap_or(0.0),
        side_lobe_db: p.side_lobe_db.unwrap_or(-25.0),
        taper_deg: p.taper_deg.unwrap_or(default_taper),
    }
}

#[derive(Serialize)]
struct SynthReport<'a> {
    mode: Mode,
    array: ArrayConfig,
    synthesis: &'a SynthesisConfig,
    target: String,
    loss: LossBreakdown,
    trajectory: Vec<f64>,
    wall_clock_s: Option<f64>,
}

#[derive(Serialize)]
struct DecoderReport<'a> {
    array: ArrayConfig,
    synthesis: &'a SynthesisConfig,
    decoder: &'a DecoderConfig,
    targets: Vec<String>,
    loss: LossBreakdown,
    per_target: Vec<LossBreakdown>,
    trajectory: Vec<f64>,
    wall_clock_s: Option<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn target_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no target CSV files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn write_plots(dir: &Path, report: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let table = |pick: fn(&beamsynth::eval::MethodReport) -> &Vec<f64>| {
        let mut out = String::from("snr_db");
        for m in &report.methods {
            out.push(',');
            out.push_str(m.method.name());
        }
        out.push('\n');
        for (k, snr) in report.snrs_db.iter().enumerate() {
            out.push_str(&snr.to_string());
            for m in &report.methods {
                out.push(',');
                if let Some(v) = pick(m).get(k) {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    };
    fs::write(dir.join("se_vs_snr.csv"), table(|m| &m.mean_se))?;
    fs::write(dir.join("percent_of_optimal.csv"), table(|m| &m.percent_of_optimal))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let timing = cli.timing;
    match cli.command {
        Command::GenChannels {
            config,
            out,
            sidecar,
            seed,
            count,
        } => {
            let rc = RunConfig::load(config.as_deref())?;
            let mut model = rc.channel_model.clone();
            if let Some(s) = seed {
                model.seed = s;
            }
            let channels = generate_channels(&rc.array(), &model, count)?;
            save_channels(&out, sidecar.as_deref(), &channels)
        }
        Command::GenTarget { shape, params, out } => {
            let params: TargetParams = match params {
                Some(p) => read_json(&p)?,
                None => TargetParams::default(),
            };
            let spec = target_spec(shape, &params);
            let pattern = make_target(&spec, &AngleGrid::default())?;
            write_target(&out, &pattern, &spec)
        }
        Command::Synth {
            target,
            arch,
            mode,
            config,
            decoder,
            out,
            report,
            seed,
        } => {
            let rc = RunConfig::load(config.as_deref())?;
            let cfg = rc.array();
            let (pattern, _) = read_target(&target)?;
            let mut syn = rc.synthesis.clone();
            syn.architecture = arch.into();
            if let Some(s) = seed {
                syn.seed = s;
            }
            let (bf, loss, trajectory, elapsed) = match mode {
                Mode::Direct => {
                    let res = synthesize_direct(&pattern, &cfg, &syn)?;
                    (res.beamformer, res.loss, res.trajectory, res.wall_clock_s)
                }
                Mode::Decoder => {
                    let path = decoder.ok_or_else(|| Error::InvalidConfig("--mode decoder needs --decoder".into()))?;
                    let start = std::time::Instant::now();
                    let dec: MlpDecoder = read_json(&path)?;
                    let bf = decode(&dec, &pattern, &cfg, syn.architecture)?;
                    let loss = Objective::new(&cfg, &pattern)?.loss(&bf)?;
                    (bf, loss, Vec::new(), start.elapsed().as_secs_f64())
                }
            };
            write_json(&out, &bf)?;
            if let Some(path) = report {
                let r = SynthReport {
                    mode,
                    array: cfg,
                    synthesis: &syn,
                    target: file_name(&target),
                    loss,
                    trajectory,
                    wall_clock_s: timing.then_some(elapsed),
                };
                write_json(&path, &r)?;
            }
            Ok(())
        }
        Command::TrainDecoder {
            targets,
            arch,
            config,
            out,
            report,
            seed,
        } => {
            let rc = RunConfig::load(config.as_deref())?;
            let cfg = rc.array();
            let files = target_files(&targets)?;
            let patterns = files
                .iter()
                .map(|f| read_target(f).map(|(p, _)| p))
                .collect::<Result<Vec<_>>>()?;
            let mut syn = rc.synthesis.clone();
            syn.architecture = arch.into();
            if let Some(s) = seed {
                syn.seed = s;
            }
            let trained = train_decoder(&patterns, &cfg, &syn, &rc.decoder)?;
            write_json(&out, &trained.decoder)?;
            if let Some(path) = report {
                let r = DecoderReport {
                    array: cfg,
                    synthesis: &syn,
                    decoder: &rc.decoder,
                    targets: files.iter().map(|f| file_name(f)).collect(),
                    loss: trained.loss,
                    per_target: trained.per_target.clone(),
                    trajectory: trained.trajectory.clone(),
                    wall_clock_s: timing.then_some(trained.wall_clock_s),
                };
                write_json(&path, &r)?;
            }
            Ok(())
        }
        Command::Eval {
            channels,
            sidecar,
            methods,
            snr,
            config,
            report,
            plots,
            seed,
        } => {
            let rc = RunConfig::load(config.as_deref())?;
            let cfg = rc.array();
            let mut eval = rc.eval.clone();
            if let Some(m) = methods {
                eval.methods = parse_methods(&m)?;
            }
            if let Some(s) = snr {
                eval.snrs_db = parse_snr_list(&s)?;
            }
            if let Some(s) = seed {
                eval.seed = s;
            }
            eval.record_timing = timing;
            let chans = match channels {
                Some(csv) => load_channels(&csv, sidecar.as_deref(), Some(&cfg))?,
                None => eval.channels.load(&cfg)?,
            };
            let rep = run_sweep(&cfg, &eval, &chans)?;
            write_json(&report, &rep)?;
            if let Some(dir) = plots {
                write_plots(&dir, &rep)?;
            }
            Ok(())
        }
        Command::Pattern {
            beamformer,
            config,
            out,
            pgm,
        } => {
            let rc = RunConfig::load(config.as_deref())?;
            let cfg = rc.array();
            let bf: Beamformer = read_json(&beamformer)?;
            let pattern = compute_pattern(&cfg, &AngleGrid::default(), &bf.realize(&cfg)?)?;
            write_pattern_csv(&out, &pattern)?;
            if let Some(p) = pgm {
                write_pgm(&p, &pattern)?;
            }
            Ok(())
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": message, "kind": kind });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
