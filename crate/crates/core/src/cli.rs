//! Command-line front end.
//!
//! Settings resolve in three layers: built-in defaults, then an optional
//! TOML config file (`--config`), then command-line flags. The config file
//! uses the long flag names with underscores as keys, for example
//!
//! ```toml
//! sample_rate = 16000
//! channels = 16
//! lambda = 0.1
//! iters = 64
//! learning_rate = 0.0002
//! epochs = 10
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adaptation::{make_synthetic_corpus, train, write_training_log, TrainConfig};
use crate::audio_io::{prepare, read_wav, write_wav, AudioClip};
use crate::dictionary::{padded_len, GramTable, StridedDictionary};
use crate::error::{Error, Result};
use crate::filterbank::{Filterbank, FilterbankConfig, Preset};
use crate::lca::{encode, spikegram, write_spikegram_csv, LcaConfig};
use crate::metrics::{
    evaluate_corpus, inhibition_matrix, magnitude_response, write_clip_csv, write_matrix_csv,
    write_response_csv, write_summary_json, write_trace_csv, NamedSignal,
};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// Where a dictionary comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DictSpec {
    Preset(Preset),
    File(PathBuf),
}

impl std::str::FromStr for DictSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<Preset>() {
            Ok(p) => DictSpec::Preset(p),
            Err(_) => DictSpec::File(PathBuf::from(s)),
        })
    }
}

impl DictSpec {
    pub fn load(&self, config: &FilterbankConfig) -> Result<Filterbank> {
        match self {
            DictSpec::Preset(p) => Filterbank::from_preset(*config, *p),
            DictSpec::File(path) => {
                let bank = Filterbank::from_json(&fs::read_to_string(path)?)?;
                if bank.config.sample_rate_hz != config.sample_rate_hz {
                    return Err(Error::InvalidConfig(format!(
                        "{} was built for {} Hz, run is configured for {} Hz",
                        path.display(),
                        bank.config.sample_rate_hz,
                        config.sample_rate_hz
                    )));
                }
                Ok(bank)
            }
        }
    }

    fn label(&self) -> String {
        match self {
            DictSpec::Preset(p) => p.name().to_string(),
            DictSpec::File(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
        }
    }
}

/// Every tunable; flags and config-file keys share these names.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Sample rate in Hz; WAV files at other rates are rejected
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Number of filterbank channels
    #[arg(long)]
    pub channels: Option<usize>,
    /// Impulse response length in samples
    #[arg(long)]
    pub filter_len: Option<usize>,
    /// Hop between atom shifts in samples
    #[arg(long)]
    pub stride: Option<usize>,
    /// Lowest center frequency in Hz
    #[arg(long)]
    pub fmin: Option<f64>,
    /// Highest center frequency in Hz
    #[arg(long)]
    pub fmax: Option<f64>,
    /// Neuron time constant in seconds
    #[arg(long)]
    pub tau: Option<f64>,
    /// Euler step in seconds
    #[arg(long)]
    pub dt: Option<f64>,
    /// LCA iterations
    #[arg(long)]
    pub iters: Option<usize>,
    /// Activation threshold
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Adam learning rate
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Signals per mini-batch group
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Groups buffered per optimizer step
    #[arg(long)]
    pub buffer_size: Option<usize>,
    /// Passes over the training corpus
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seed for shuffling and synthetic corpora
    #[arg(long)]
    pub seed: Option<u64>,
    /// Synthetic clip duration in seconds
    #[arg(long)]
    pub duration: Option<f64>,
}

impl Settings {
    fn overlay(self, top: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: top.$f.or(self.$f)),* } };
        }
        pick!(
            sample_rate, channels, filter_len, stride, fmin, fmax, tau, dt, iters, lambda,
            learning_rate, batch_size, buffer_size, epochs, seed, duration
        )
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub filterbank: FilterbankConfig,
    pub lca: LcaConfig,
    pub train: TrainConfig,
    pub duration_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            filterbank: FilterbankConfig::default(),
            lca: LcaConfig::default(),
            train: TrainConfig::default(),
            duration_s: 0.25,
        }
    }
}

impl RunConfig {
    pub fn resolve(config_file: Option<&Path>, flags: &Settings) -> Result<Self> {
        let file = match config_file {
            Some(path) => toml::from_str::<Settings>(&fs::read_to_string(path)?)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
            None => Settings::default(),
        };
        let s = file.overlay(flags.clone());
        let mut rc = RunConfig::default();
        let fb = &mut rc.filterbank;
        fb.sample_rate_hz = s.sample_rate.unwrap_or(fb.sample_rate_hz);
        fb.num_channels = s.channels.unwrap_or(fb.num_channels);
        fb.filter_len = s.filter_len.unwrap_or(fb.filter_len);
        fb.stride = s.stride.unwrap_or(fb.stride);
        fb.freq_min_hz = s.fmin.unwrap_or(fb.freq_min_hz);
        fb.freq_max_hz = s.fmax.unwrap_or(fb.freq_max_hz);
        let lca = &mut rc.lca;
        lca.tau = s.tau.unwrap_or(lca.tau);
        lca.dt = s.dt.unwrap_or(lca.dt);
        lca.num_iters = s.iters.unwrap_or(lca.num_iters);
        lca.threshold = s.lambda.unwrap_or(lca.threshold);
        let tr = &mut rc.train;
        tr.learning_rate = s.learning_rate.unwrap_or(tr.learning_rate);
        tr.batch_size = s.batch_size.unwrap_or(tr.batch_size);
        tr.buffer_size = s.buffer_size.unwrap_or(tr.buffer_size);
        tr.num_epochs = s.epochs.unwrap_or(tr.num_epochs);
        tr.rng_seed = s.seed.unwrap_or(tr.rng_seed);
        rc.duration_s = s.duration.unwrap_or(rc.duration_s);
        rc.filterbank.validate()?;
        rc.lca.validate()?;
        rc.train.validate()?;
        Ok(rc)
    }

    fn sample_rate_u32(&self) -> Result<u32> {
        let fs = self.filterbank.sample_rate_hz;
        if fs.fract() != 0.0 || fs > u32::MAX as f64 {
            return Err(Error::InvalidConfig(format!("sample rate {fs} is not an integer")));
        }
        Ok(fs as u32)
    }
}

#[derive(Debug, Parser)]
#[command(name = "spikegram", version, about = "Sparse spikegram coding with adaptive gammachirp filterbanks")]
pub struct Cli {
    /// TOML file with default settings (flags take precedence)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode one WAV file into a spikegram
    Encode {
        wav: PathBuf,
        /// gt, cgc, or a parameter JSON file
        #[arg(long, default_value = "gt")]
        dict: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Adapt a filterbank on a WAV directory or a synthetic corpus
    Train {
        #[command(flatten)]
        source: CorpusSource,
        /// Initial dictionary: gt, cgc, or a parameter JSON file
        #[arg(long, default_value = "gt")]
        dict: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Compare dictionaries on a corpus
    Eval {
        #[command(flatten)]
        source: CorpusSource,
        /// NAME=SPEC or SPEC, repeatable
        #[arg(long = "dict", required = true)]
        dicts: Vec<String>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Also write per-clip iteration traces
        #[arg(long)]
        traces: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Export magnitude responses and inhibition weights of a dictionary
    Inspect {
        /// gt, cgc, or a parameter JSON file
        #[arg(long, default_value = "gt")]
        dict: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Points on the log-frequency grid
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write a synthetic corpus as 16-bit WAV files
    SynthCorpus {
        /// Number of clips
        #[arg(long)]
        count: usize,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct CorpusSource {
    /// Directory of WAV files
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Generate this many synthetic clips instead
    #[arg(long)]
    pub synthetic: Option<usize>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_corpus(source: &CorpusSource, rc: &RunConfig) -> Result<Vec<NamedSignal>> {
    let (fl, stride) = (rc.filterbank.filter_len, rc.filterbank.stride);
    let named = if let Some(count) = source.synthetic {
        make_synthetic_corpus(count, rc.train.rng_seed, rc.filterbank.sample_rate_hz, rc.duration_s)?
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("synth_{i:04}"), s))
            .collect::<Vec<_>>()
    } else {
        let dir = source.corpus.as_ref().expect("clap enforces one source");
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")));
        paths.sort();
        let rate = rc.sample_rate_u32()?;
        paths
            .iter()
            .map(|p| {
                let clip = read_wav(p, rate)?;
                let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                Ok((name, clip.samples))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let mut out = Vec::with_capacity(named.len());
    for (name, samples) in named {
        match prepare(&samples, fl, stride) {
            Ok(samples) => out.push(NamedSignal { name, samples }),
            Err(e) => log::warn!("skipping {name}: {e}"),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("no usable signals in the corpus".into()));
    }
    Ok(out)
}

fn cmd_encode(wav: &Path, dict: &str, out: &Path, rc: &RunConfig) -> Result<serde_json::Value> {
    let bank = dict.parse::<DictSpec>()?.load(&rc.filterbank)?;
    let clip = read_wav(wav, rc.sample_rate_u32()?)?;
    let (fl, stride) = (bank.config.filter_len, bank.config.stride);
    let peak = clip.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let signal = if peak > 0.0 {
        prepare(&clip.samples, fl, stride)?
    } else {
        let mut s = clip.samples.clone();
        s.resize(padded_len(s.len(), fl, stride), 0.0);
        s
    };
    let filters = bank.filters()?;
    let gram = GramTable::new(&filters, stride);
    let d = StridedDictionary::new(filters, stride, signal.len())?;
    let result = encode(&signal, &d, &gram, &rc.lca)?;

    fs::create_dir_all(out)?;
    write_spikegram_csv(create(&out.join("spikegram.csv"))?, &spikegram(&result, &d))?;
    write_trace_csv(create(&out.join("trace.csv"))?, &result)?;
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let mut recon = d.synthesize_signal(&result.coefficients)?;
    recon.truncate(clip.samples.len().max(1));
    recon.iter_mut().for_each(|v| *v *= scale);
    write_wav(
        out.join("reconstruction.wav"),
        &AudioClip {
            samples: recon,
            sample_rate_hz: clip.sample_rate_hz,
            source_path: out.join("reconstruction.wav"),
        },
    )?;
    Ok(json!({
        "mse": result.mse,
        "spike_count": result.spike_count,
        "num_atoms": d.num_atoms(),
        "iterations": rc.lca.num_iters,
    }))
}

fn cmd_train(source: &CorpusSource, dict: &str, out: &Path, rc: &RunConfig) -> Result<serde_json::Value> {
    let initial = dict.parse::<DictSpec>()?.load(&rc.filterbank)?;
    let corpus = load_corpus(source, rc)?;
    let signals: Vec<Vec<f64>> = corpus.into_iter().map(|c| c.samples).collect();
    let outcome = train(&signals, &initial, &rc.lca, &rc.train)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("params.json"), outcome.filterbank.to_json()?)?;
    let mut log = create(&out.join("train_log.jsonl"))?;
    write_training_log(&mut log, &outcome.log)?;
    log.flush()?;
    Ok(json!({
        "signals": signals.len(),
        "flushes": outcome.log.len(),
        "optimizer_steps": outcome.adam.step_count,
        "skipped": outcome.skipped,
        "clamped": outcome.clamped,
        "first_mean_loss": outcome.log.first().map(|r| r.mean_loss),
        "last_mean_loss": outcome.log.last().map(|r| r.mean_loss),
    }))
}

fn parse_named(spec: &str) -> Result<(String, DictSpec)> {
    match spec.split_once('=') {
        Some((name, rest)) if !name.is_empty() => Ok((name.to_string(), rest.parse()?)),
        _ => {
            let d: DictSpec = spec.parse()?;
            Ok((d.label(), d))
        }
    }
}

fn cmd_eval(
    source: &CorpusSource,
    dicts: &[String],
    out: &Path,
    traces: bool,
    rc: &RunConfig,
) -> Result<serde_json::Value> {
    let banks = dicts
        .iter()
        .map(|s| {
            let (name, spec) = parse_named(s)?;
            Ok((name, spec.load(&rc.filterbank)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for (name, _) in &banks {
        if !seen.insert(name) {
            return Err(Error::InvalidConfig(format!("dictionary name `{name}` given twice")));
        }
    }
    let corpus = load_corpus(source, rc)?;
    let eval = evaluate_corpus(&banks, &corpus, &rc.lca)?;
    fs::create_dir_all(out)?;
    write_clip_csv(create(&out.join("eval_clips.csv"))?, &eval.records)?;
    let mut summary = create(&out.join("eval_summary.json"))?;
    write_summary_json(&mut summary, &eval.summary)?;
    summary.flush()?;
    if traces {
        let dir = out.join("traces");
        fs::create_dir_all(&dir)?;
        for (name, bank) in &banks {
            let filters = std::sync::Arc::new(bank.filters()?);
            let gram = GramTable::new(&filters, bank.config.stride);
            for clip in &corpus {
                let d = StridedDictionary::new(filters.clone(), bank.config.stride, clip.samples.len())?;
                let result = encode(&clip.samples, &d, &gram, &rc.lca)?;
                write_trace_csv(create(&dir.join(format!("{}__{name}.csv", clip.name)))?, &result)?;
            }
        }
    }
    Ok(serde_json::to_value(&eval.summary)?)
}

fn cmd_inspect(dict: &str, out: &Path, grid: usize, rc: &RunConfig) -> Result<serde_json::Value> {
    let bank = dict.parse::<DictSpec>()?.load(&rc.filterbank)?;
    let filters = bank.filters()?;
    let response = magnitude_response(&filters, bank.config.sample_rate_hz, grid)?;
    let matrix = inhibition_matrix(&GramTable::new(&filters, bank.config.stride));
    fs::create_dir_all(out)?;
    write_response_csv(create(&out.join("response.csv"))?, &response)?;
    write_matrix_csv(create(&out.join("inhibition.csv"))?, &matrix)?;
    Ok(json!({
        "channels": filters.num_channels(),
        "grid_points": grid,
        "mean_off_adjacent_inhibition": crate::metrics::mean_off_adjacent(&matrix),
    }))
}

fn cmd_synth(count: usize, out: &Path, rc: &RunConfig) -> Result<serde_json::Value> {
    let rate = rc.sample_rate_u32()?;
    let corpus = make_synthetic_corpus(count, rc.train.rng_seed, rc.filterbank.sample_rate_hz, rc.duration_s)?;
    fs::create_dir_all(out)?;
    for (i, samples) in corpus.into_iter().enumerate() {
        let path = out.join(format!("synth_{i:04}.wav"));
        write_wav(
            &path,
            &AudioClip {
                samples,
                sample_rate_hz: rate,
                source_path: path.clone(),
            },
        )?;
    }
    Ok(json!({ "written": count, "dir": out.display().to_string() }))
}

/// Runs a parsed command and returns the JSON printed on standard output.
pub fn run(cli: &Cli) -> Result<serde_json::Value> {
    if let Some(n) = cli.threads {
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Encode {
            wav,
            dict,
            out,
            settings,
        } => cmd_encode(wav, dict, out, &RunConfig::resolve(config, settings)?),
        Command::Train {
            source,
            dict,
            out,
            settings,
        } => cmd_train(source, dict, out, &RunConfig::resolve(config, settings)?),
        Command::Eval {
            source,
            dicts,
            out,
            traces,
            settings,
        } => cmd_eval(source, dicts, out, *traces, &RunConfig::resolve(config, settings)?),
        Command::Inspect {
            dict,
            out,
            grid,
            settings,
        } => cmd_inspect(dict, out, *grid, &RunConfig::resolve(config, settings)?),
        Command::SynthCorpus {
            count,
            out,
            settings,
        } => cmd_synth(*count, out, &RunConfig::resolve(config, settings)?),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    if err.is_io() {
        EXIT_IO
    } else if err.is_numeric() {
        EXIT_NUMERIC
    } else if matches!(
        err,
        Error::InvalidConfig(_) | Error::InvalidParams(_) | Error::EmptyInput(_) | Error::Domain(_)
    ) {
        EXIT_USAGE
    } else {
        1
    }
}

/// Entry point used by the `spikegram` binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
