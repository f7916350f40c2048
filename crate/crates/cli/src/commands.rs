//! Subcommands. Each one reads its inputs, calls the library and writes
//! its artifacts; no signal processing happens here.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sinkbss::evaluation::{self, DEFAULT_PROJ_LEN};
use sinkbss::mixsim::{self, MixSpec, RirBank};
use sinkbss::separation;
use sinkbss::stft::{self, StftConfig};
use sinkbss::AudioBuffer;

use crate::audio_io::{read_wav, write_wav, Encoding, WavError};
use crate::config::{ConfigError, MethodName, RuleName, RunConfig};
use crate::report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<WavError> for CliError {
    fn from(e: WavError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<sinkbss::Error> for CliError {
    fn from(e: sinkbss::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sinkbss", version, about = "Determined blind source separation with Sinkhorn-regularized source models")]
pub struct Cli {
    /// Worker threads (default: all cores; 1 runs sequentially).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a multichannel mixture and its reference images.
    Mix(MixArgs),
    /// Separate a multichannel recording.
    Separate(SeparateArgs),
    /// Score estimates against references.
    Evaluate(EvaluateArgs),
    /// Export power histograms or inter-band correlations.
    Hist(HistArgs),
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Mono source files, one per source.
    #[arg(long, num_args = 1..)]
    pub sources: Vec<PathBuf>,
    /// Impulse responses, one file per source with one channel per microphone.
    #[arg(long, num_args = 1.., conflicts_with = "synthetic")]
    pub rirs: Vec<PathBuf>,
    /// Use seeded synthetic impulse responses.
    #[arg(long)]
    pub synthetic: bool,
    /// Synthetic decay time to -60 dB, in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub t60: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Synthetic response length in samples (default: 2 * t60 * rate).
    #[arg(long)]
    pub rir_len: Option<usize>,
    /// Microphone at which reference images are taken.
    #[arg(long, default_value_t = 0)]
    pub ref_channel: usize,
    /// Re-run the mix recorded in a manifest.
    #[arg(long, conflicts_with_all = ["sources", "rirs", "synthetic"])]
    pub manifest: Option<PathBuf>,
    /// Write 16-bit PCM instead of 32-bit float.
    #[arg(long)]
    pub pcm16: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MixingRecord {
    Synthetic { t60: f64, seed: u64, rir_len: usize },
    Files { rirs: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub sources: Vec<PathBuf>,
    pub mixing: MixingRecord,
    pub ref_channel: usize,
    pub sample_rate: u32,
    pub samples: usize,
    pub mics: usize,
    pub encoding: Encoding,
    pub mix: String,
    pub references: Vec<String>,
}

fn encoding(pcm16: bool) -> Encoding {
    if pcm16 {
        Encoding::Pcm16
    } else {
        Encoding::Float32
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_audio(path: &Path, buf: &AudioBuffer, enc: Encoding) -> CliResult {
    let rep = write_wav(path, buf, enc)?;
    if rep.clipped > 0 {
        eprintln!("warning: {}: {} samples clipped to full scale", path.display(), rep.clipped);
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(io_err(path))
}

fn load_sources(paths: &[PathBuf]) -> CliResult<AudioBuffer> {
    let mut chans = Vec::with_capacity(paths.len());
    let mut rate = None;
    for p in paths {
        let buf = read_wav(p)?;
        if buf.num_channels() != 1 {
            return Err(CliError::Runtime(format!(
                "{}: sources must be mono, found {} channels",
                p.display(),
                buf.num_channels()
            )));
        }
        match rate {
            None => rate = Some(buf.sample_rate()),
            Some(r) if r != buf.sample_rate() => {
                return Err(CliError::Runtime(format!(
                    "{}: sample rate {} differs from {}",
                    p.display(),
                    buf.sample_rate(),
                    r
                )))
            }
            _ => {}
        }
        chans.push(buf.into_channels().remove(0));
    }
    let len = chans.iter().map(Vec::len).max().unwrap_or(0);
    for c in &mut chans {
        c.resize(len, 0.0);
    }
    Ok(AudioBuffer::new(chans, rate.unwrap_or(1))?)
}

fn load_bank(paths: &[PathBuf], sample_rate: u32) -> CliResult<RirBank> {
    let mut per_source = Vec::with_capacity(paths.len());
    for p in paths {
        let buf = read_wav(p)?;
        if buf.sample_rate() != sample_rate {
            return Err(CliError::Runtime(format!(
                "{}: sample rate {} differs from the sources' {}",
                p.display(),
                buf.sample_rate(),
                sample_rate
            )));
        }
        per_source.push(buf.into_channels());
    }
    let mics = per_source[0].len();
    if let Some((p, b)) = paths.iter().zip(&per_source).find(|(_, b)| b.len() != mics) {
        return Err(CliError::Runtime(format!(
            "{}: {} channels, expected {mics} microphones",
            p.display(),
            b.len()
        )));
    }
    let responses = (0..mics)
        .map(|m| per_source.iter().map(|chans| chans[m].clone()).collect())
        .collect();
    Ok(RirBank::new(responses)?)
}

fn cmd_mix(args: MixArgs) -> CliResult {
    let (sources, mixing, ref_channel, enc) = match &args.manifest {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            (m.sources, m.mixing, m.ref_channel, m.encoding)
        }
        None => {
            if args.sources.is_empty() {
                return Err(CliError::Usage("--sources is required".into()));
            }
            let mixing = if args.synthetic {
                if !(args.t60 >= 0.0 && args.t60.is_finite()) {
                    return Err(CliError::Usage("--t60 must be a non-negative number".into()));
                }
                MixingRecord::Synthetic {
                    t60: args.t60,
                    seed: args.seed,
                    rir_len: args.rir_len.unwrap_or(0),
                }
            } else if !args.rirs.is_empty() {
                if args.rirs.len() != args.sources.len() {
                    return Err(CliError::Usage(format!(
                        "{} sources but {} impulse response files",
                        args.sources.len(),
                        args.rirs.len()
                    )));
                }
                MixingRecord::Files { rirs: args.rirs.clone() }
            } else {
                return Err(CliError::Usage("one of --rirs or --synthetic is required".into()));
            };
            (args.sources.clone(), mixing, args.ref_channel, encoding(args.pcm16))
        }
    };
    let src = load_sources(&sources)?;
    let sr = src.sample_rate();
    let n = src.num_channels();
    let mixing = match mixing {
        MixingRecord::Synthetic { t60, seed, rir_len } => {
            let len = if rir_len > 0 {
                rir_len
            } else {
                ((2.0 * t60 * f64::from(sr)).round() as usize).max(1)
            };
            MixingRecord::Synthetic { t60, seed, rir_len: len }
        }
        files => files,
    };
    let bank = match &mixing {
        MixingRecord::Synthetic { t60, seed, rir_len } => RirBank::synthetic(*seed, n, n, *rir_len, *t60, sr)?,
        MixingRecord::Files { rirs } => {
            if rirs.len() != n {
                return Err(CliError::Usage(format!("{n} sources but {} impulse response files", rirs.len())));
            }
            load_bank(rirs, sr)?
        }
    };
    if ref_channel >= bank.mics() {
        return Err(CliError::Usage(format!(
            "--ref-channel {ref_channel} out of range for {} microphones",
            bank.mics()
        )));
    }
    let spec = MixSpec::Convolutive(bank);
    let mix = mixsim::convolve_mix(&src, &spec)?;
    let images = mixsim::source_images(&src, &spec, ref_channel)?;

    create_dir(&args.out)?;
    write_audio(&args.out.join("mix.wav"), &mix, enc)?;
    let mut references = Vec::with_capacity(n);
    for i in 0..n {
        let name = format!("ref_{}.wav", i + 1);
        write_audio(&args.out.join(&name), &images.select(i), enc)?;
        references.push(name);
    }
    let manifest = Manifest {
        sources,
        mixing,
        ref_channel,
        sample_rate: sr,
        samples: mix.len(),
        mics: mix.num_channels(),
        encoding: enc,
        mix: "mix.wav".into(),
        references,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&args.out.join("manifest.json"), &json)
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodName>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// NMF bases per source.
    #[arg(long)]
    pub bases: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sinkhorn_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub nmf_rule: Option<RuleName>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ref_channel: Option<usize>,
    #[arg(long)]
    pub frame_len: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub fft_len: Option<usize>,
    /// Leave the wall_ms column of trace.csv empty.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub pcm16: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SeparateArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v.into(); })*
            };
        }
        set!(
            method => method,
            iters => iters,
            bases => bases,
            lambda => sinkhorn.lambda,
            gamma => sinkhorn.gamma,
            sinkhorn_iters => sinkhorn.inner_iters,
            nmf_rule => nmf_rule,
            seed => seed,
            ref_channel => ref_channel,
            frame_len => stft.frame_len,
            hop => stft.hop,
            fft_len => stft.fft_len,
        );
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        if let Some(p) = &self.out {
            cfg.out = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn cmd_separate(args: SeparateArgs) -> CliResult {
    let cfg = args.resolve()?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let stft_cfg = cfg.stft_config()?;
    let sep_cfg = cfg.separation_config()?;

    let mix = read_wav(&input)?;
    if mix.num_channels() < 2 {
        return Err(CliError::Runtime(format!(
            "{}: separation needs at least two channels, found {}",
            input.display(),
            mix.num_channels()
        )));
    }
    if cfg.ref_channel >= mix.num_channels() {
        return Err(CliError::Runtime(format!(
            "reference channel {} out of range for {} channels",
            cfg.ref_channel,
            mix.num_channels()
        )));
    }
    let x = stft::analyze(&mix, stft_cfg)?;
    let start = Instant::now();
    let mut timing = Vec::with_capacity(sep_cfg.iters);
    let result = separation::run_separation_with(&x, &sep_cfg, |_| {
        timing.push(start.elapsed().as_secs_f64() * 1e3);
    })?;
    let y = separation::project_back(&result.estimates, &result.demixing, cfg.ref_channel)?;
    let est = stft::synthesize(&y)?.resized(mix.len());

    create_dir(&out)?;
    let enc = encoding(args.pcm16);
    for n in 0..est.num_channels() {
        write_audio(&out.join(format!("est_{}.wav", n + 1)), &est.select(n), enc)?;
    }
    let trace_path = out.join("trace.csv");
    let file = fs::File::create(&trace_path).map_err(io_err(&trace_path))?;
    let timing = (!args.no_timing).then_some(&timing[..]);
    report::write_trace(file, &result.trace, timing)?;
    write_text(&out.join("resolved_config.json"), &cfg.to_json())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory holding est_1.wav ... est_N.wav.
    #[arg(long)]
    pub est: PathBuf,
    /// Directory holding ref_1.wav ... ref_N.wav.
    #[arg(long)]
    pub refs: PathBuf,
    /// Mixture; its reference channel is the baseline for the deltas.
    #[arg(long)]
    pub mix: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PROJ_LEN)]
    pub proj_len: usize,
    #[arg(long, default_value_t = 0)]
    pub ref_channel: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// `prefix<k>.wav` files in `dir`, ordered by `k`.
fn numbered_wavs(dir: &Path, prefix: &str) -> CliResult<Vec<PathBuf>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let index = name
            .strip_prefix(prefix)
            .and_then(|rest| rest.strip_suffix(".wav"))
            .and_then(|k| k.parse::<usize>().ok());
        if let Some(k) = index {
            found.push((k, path));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(CliError::Runtime(format!("{}: no {prefix}N.wav files", dir.display())));
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn load_mono_set(paths: &[PathBuf]) -> CliResult<(Vec<Vec<f64>>, u32)> {
    let mut out = Vec::with_capacity(paths.len());
    let mut rate = 0;
    for p in paths {
        let buf = read_wav(p)?;
        if rate != 0 && buf.sample_rate() != rate {
            return Err(CliError::Runtime(format!("{}: sample rate mismatch", p.display())));
        }
        rate = buf.sample_rate();
        out.push(buf.channel(0).to_vec());
    }
    Ok((out, rate))
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    if args.proj_len == 0 {
        return Err(CliError::Usage("--proj-len must be at least 1".into()));
    }
    let (ests, est_rate) = load_mono_set(&numbered_wavs(&args.est, "est_")?)?;
    let (refs, ref_rate) = load_mono_set(&numbered_wavs(&args.refs, "ref_")?)?;
    if ests.len() != refs.len() {
        return Err(CliError::Runtime(format!(
            "{} estimates but {} references",
            ests.len(),
            refs.len()
        )));
    }
    let mix = read_wav(&args.mix)?;
    if est_rate != ref_rate || mix.sample_rate() != ref_rate {
        return Err(CliError::Runtime("estimates, references and mixture differ in sample rate".into()));
    }
    if args.ref_channel >= mix.num_channels() {
        return Err(CliError::Runtime(format!(
            "reference channel {} out of range for {} channels",
            args.ref_channel,
            mix.num_channels()
        )));
    }
    let rep = evaluation::evaluate(&ests, &refs, mix.channel(args.ref_channel), args.proj_len)?;
    let file = fs::File::create(&args.out).map_err(io_err(&args.out))?;
    report::write_eval(file, &rep)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HistMode {
    Hist,
    Interband,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = HistMode::Hist)]
    pub mode: HistMode,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// One histogram per frequency bin.
    #[arg(long)]
    pub per_band: bool,
    #[arg(long, default_value_t = 512)]
    pub frame_len: usize,
    #[arg(long, default_value_t = 256)]
    pub hop: usize,
    #[arg(long, default_value_t = 1024)]
    pub fft_len: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn cmd_hist(args: HistArgs) -> CliResult {
    let cfg = StftConfig::new(args.frame_len, args.hop, args.fft_len).map_err(|e| CliError::Usage(e.to_string()))?;
    if args.bins == 0 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    let buf = read_wav(&args.input)?;
    let create = || fs::File::create(&args.out).map_err(io_err(&args.out));
    match args.mode {
        HistMode::Hist => {
            let hists = evaluation::spectral_histogram(&buf, cfg, args.bins, args.per_band)?;
            report::write_histograms(create()?, &hists)?;
        }
        HistMode::Interband => {
            let corr = evaluation::interband_correlation(&buf, cfg)?;
            report::write_interband(create()?, &corr, cfg.bins())?;
        }
    }
    Ok(())
}

pub fn execute(cli: Cli) -> CliResult {
    let run = move || match cli.command {
        Command::Mix(a) => cmd_mix(a),
        Command::Separate(a) => cmd_separate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Hist(a) => cmd_hist(a),
    };
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(run),
        None => run(),
    }
}
