use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rawfe::analysis::{
    frequency_response, probe_grid, ranking_for_masking, sine_probe, sort_filters, ProbeTarget, RESPONSE_N_FFT,
};
use rawfe::dsp::{normalize_waveform, Waveform};
use rawfe::fixed::{
    default_gammatone_bank, default_mel_matrix, gammatone_extract, logmel_extract, GAMMATONE_MIN_SAMPLES,
    HOP_SAMPLES, WIN_SAMPLES,
};
use rawfe::io::{
    encode_archive, load_weights, read_wav, save_weights, write_feature_binary, write_matrix_csv,
};
use rawfe::neural::{
    audit_geometry, count_params, forward, geometry_of, init_model, mask_filters, model_preset, round_count,
    FeConfig, FeKind, FeModel, MaskMode, MaskSpec,
};
use rawfe::train::{finite_diff_report, synthetic_corpus, train_distill, Schedule, TrainConfig, FD_EPSILON};
use rawfe::{Error, FeatureMatrix, SAMPLE_RATE};

/// `println!` that exits quietly when stdout is closed (e.g. piped to `head`).
macro_rules! out {
    ($($arg:tt)*) => {
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    };
}

#[derive(Parser)]
#[command(name = "rawfe", version, about = "Raw-waveform speech front-ends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features from a WAV file
    Extract(ExtractArgs),
    /// Print receptive field and frame shift
    Audit(ModelArgs),
    /// Print exact and rounded parameter counts
    Params(ModelArgs),
    /// Write the sorted first-layer frequency responses (dB) as CSV
    Respond(RespondArgs),
    /// Run sine probes through a front-end and write mean activations as CSV
    Probe(ProbeArgs),
    /// Zero the sharpest or softest first-layer filters of an archive
    Mask(MaskArgs),
    /// Compare backprop gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Distill a learnable front-end towards log Mel targets
    Train(TrainArgs),
    /// Create or describe weight archives
    #[command(subcommand)]
    Weights(WeightsCommand),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeName {
    Logmel,
    Gammatone,
    W2v,
    Sc,
}

#[derive(Args)]
struct ModelArgs {
    /// Preset name (w2v7, w2v6@512, sc, ..., or logmel / gammatone)
    #[arg(long)]
    preset: Option<String>,
    /// RFE1 weight archive
    #[arg(long, conflicts_with = "preset")]
    weights: Option<PathBuf>,
    /// Initialization seed when no archive is given
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, value_enum)]
    fe: FeName,
    #[command(flatten)]
    model: ModelArgs,
    input: PathBuf,
    /// Output path; `.csv` writes text, anything else RFM1 binary
    output: PathBuf,
}

#[derive(Args)]
struct RespondArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = RESPONSE_N_FFT)]
    n_fft: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Fixed front-end to probe instead of a model
    #[arg(long, value_enum, conflicts_with_all = ["preset", "weights"])]
    fe: Option<FeName>,
    /// `lo:hi:step` in Hz
    #[arg(long, default_value = "50:7950:50")]
    grid: String,
    /// Sine duration in seconds
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sharp,
    Soft,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input length in samples
    #[arg(long, default_value_t = 4000)]
    samples: usize,
    /// Parameter entries to check; 0 checks all of them
    #[arg(long, default_value_t = 512)]
    entries: usize,
    #[arg(long, default_value_t = FD_EPSILON)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "sc")]
    fe: FeName,
    /// Model preset; defaults to `sc` or `w2v6@512`
    #[arg(long)]
    preset: Option<String>,
    /// Directory of 16 kHz mono WAV files
    #[arg(long, required_unless_present = "synthetic")]
    corpus: Option<PathBuf>,
    /// Train on this many generated utterances instead of a corpus
    #[arg(long, conflicts_with = "corpus")]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 3e-3)]
    peak_lr: f64,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, value_enum, default_value = "one-cycle")]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Loss curve CSV
    #[arg(long)]
    out: PathBuf,
    /// Also save the trained front-end
    #[arg(long)]
    save_weights: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Constant,
    OneCycle,
}

#[derive(Subcommand)]
enum WeightsCommand {
    /// Write a randomly initialized archive for a preset
    Export {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe an archive
    Inspect { path: PathBuf },
}

enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownPreset(_) | Error::BadRange(_) | Error::InvalidEpsilon(_) | Error::BadCount { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Data(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (1, m),
                Failure::Data(m) => (2, m),
                Failure::Numeric(m) => (3, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Extract(a) => extract(a),
        Command::Audit(a) => audit(a),
        Command::Params(a) => params(a),
        Command::Respond(a) => respond(a),
        Command::Probe(a) => probe(a),
        Command::Mask(a) => mask(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Train(a) => train(a),
        Command::Weights(w) => weights(w),
    }
}

/// Six significant digits, trailing zeros trimmed.
fn real(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let s = format!("{:.*}", (5 - mag).max(0) as usize, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}

fn load_model(args: &ModelArgs) -> Result<FeModel, Failure> {
    match (&args.weights, &args.preset) {
        (Some(path), _) => Ok(load_weights(path)?),
        (None, Some(p)) => Ok(init_model(model_preset(p)?, args.seed)?),
        (None, None) => Err(Failure::Usage("one of --preset or --weights is required".into())),
    }
}

fn write_features(feat: &FeatureMatrix, path: &Path, fe: &str) -> CliResult {
    if path.extension().is_some_and(|e| e == "csv") {
        write_matrix_csv(
            &feat.values,
            feat.frame_shift_ms,
            feat.dim_labels.as_deref(),
            &[("fe", fe.to_string())],
            path,
        )?;
    } else {
        write_feature_binary(feat, path)?;
    }
    Ok(())
}

fn extract(a: ExtractArgs) -> CliResult {
    let wav = read_wav(&a.input)?;
    let (feat, name) = match a.fe {
        FeName::Logmel => (logmel_extract(&wav)?, "logmel"),
        FeName::Gammatone => (gammatone_extract(&wav)?, "gammatone"),
        FeName::W2v | FeName::Sc => {
            let model = load_model(&a.model)?;
            let (want, name) = if a.fe == FeName::W2v { (FeKind::W2v, "w2v") } else { (FeKind::Sc, "sc") };
            if model.kind() != want {
                return Err(Failure::Data(format!("--fe {name} given a {:?} model", model.kind())));
            }
            (forward(&model, &normalize_waveform(&wav)?)?, name)
        }
    };
    write_features(&feat, &a.output, name)?;
    out!("frames={}", feat.n_frames());
    out!("dims={}", feat.n_dims());
    out!("shift_ms={}", real(feat.frame_shift_ms));
    Ok(())
}

fn fixed_geometry(name: &str) -> Option<(usize, usize)> {
    match name {
        "logmel" => Some((WIN_SAMPLES, HOP_SAMPLES)),
        "gammatone" => Some((GAMMATONE_MIN_SAMPLES, HOP_SAMPLES)),
        _ => None,
    }
}

fn audit(a: ModelArgs) -> CliResult {
    let g = match a.preset.as_deref().and_then(fixed_geometry) {
        Some((rf, shift)) => geometry_of(&[(rf, shift)]),
        None => audit_geometry(&load_model(&a)?),
    };
    out!(
        "rf={} samples ({:.1} ms), shift={} ({:.1} ms)",
        g.receptive_field_samples, g.receptive_field_ms, g.frame_shift_samples, g.frame_shift_ms
    );
    out!("rf_samples={}", g.receptive_field_samples);
    out!("rf_ms={}", real(g.receptive_field_ms));
    out!("shift_samples={}", g.frame_shift_samples);
    out!("shift_ms={}", real(g.frame_shift_ms));
    Ok(())
}

fn params(a: ModelArgs) -> CliResult {
    let n = match a.preset.as_deref() {
        Some("logmel") => default_mel_matrix().weights.len(),
        Some("gammatone") => default_gammatone_bank().bank.kernels.len(),
        _ => count_params(&load_model(&a)?),
    };
    out!("{n} (~{})", round_count(n));
    out!("params={n}");
    out!("rounded={}", round_count(n));
    Ok(())
}

fn respond(a: RespondArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let fr = frequency_response(&model.first_layer(), a.n_fft)?;
    let order = sort_filters(&fr);
    let sorted = fr.permuted(&order);
    let labels: Vec<String> = (0..sorted.magnitudes.ncols())
        .map(|k| real(k as f64 * sorted.bin_hz))
        .collect();
    let order_text: Vec<String> = order.iter().map(|i| i.to_string()).collect();
    write_matrix_csv(
        &sorted.to_db(),
        model.frame_shift_ms(),
        Some(&labels),
        &[("unit", "dB".into()), ("order", order_text.join(";"))],
        &a.out,
    )?;
    out!("filters={}", sorted.magnitudes.nrows());
    out!("bins={}", sorted.magnitudes.ncols());
    out!("bin_hz={}", real(sorted.bin_hz));
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Usage(format!("--grid {s}: {e}")))?;
    match parts[..] {
        [lo, hi, step] => Ok(probe_grid(lo, hi, step)?),
        _ => Err(Failure::Usage(format!("--grid {s}: expected lo:hi:step"))),
    }
}

fn probe(a: ProbeArgs) -> CliResult {
    let freqs = parse_grid(&a.grid)?;
    let model;
    let target = match a.fe {
        Some(FeName::Gammatone) => ProbeTarget::GammatoneBank,
        Some(FeName::Logmel) => ProbeTarget::LogMelBank,
        Some(_) | None => {
            model = load_model(&a.model)?;
            ProbeTarget::Model(&model)
        }
    };
    let resp = sine_probe(target, &freqs, a.duration)?;
    let labels: Vec<String> = (0..resp.matrix.ncols()).map(|c| format!("ch{c}")).collect();
    let freq_text: Vec<String> = freqs.iter().map(|&f| real(f)).collect();
    write_matrix_csv(&resp.matrix, 0.0, Some(&labels), &[("freqs_hz", freq_text.join(";"))], &a.out)?;
    let mean_ratio = resp.peak_to_mean.iter().sum::<f64>() / resp.peak_to_mean.len() as f64;
    out!("points={}", resp.matrix.nrows());
    out!("channels={}", resp.matrix.ncols());
    out!("mean_peak_to_mean={}", real(mean_ratio));
    Ok(())
}

fn mask(a: MaskArgs) -> CliResult {
    let model = load_weights(&a.weights)?;
    let ranking = ranking_for_masking(&model)?;
    let mode = match a.mode {
        ModeArg::Sharp => MaskMode::Sharp,
        ModeArg::Soft => MaskMode::Soft,
    };
    let masked = mask_filters(&model, MaskSpec { mode, count: a.n }, &ranking)?;
    save_weights(&masked, &a.out)?;
    out!("masked={}", a.n);
    out!("filters={}", ranking.len());
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> CliResult {
    let model = init_model(model_preset(&a.preset)?, a.seed)?;
    let wav = synthetic_corpus(1, a.seed)
        .pop()
        .map(|w| Waveform::new(w.samples[..a.samples.min(w.samples.len())].to_vec(), SAMPLE_RATE))
        .expect("one utterance")?;
    let sample = (a.entries > 0).then_some((a.entries, a.seed));
    let report = finite_diff_report(&model, &normalize_waveform(&wav)?, a.eps, sample)?;
    let err = report.max_rel_error;
    let pass = err <= a.tol;
    out!("checked={}", report.checked);
    out!("skipped_kinks={}", report.skipped_kinks);
    out!("max_rel_error={}", real(err));
    out!("tolerance={}", real(a.tol));
    out!("status={}", if pass { "pass" } else { "fail" });
    if pass {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("relative error {err:e} exceeds {:e}", a.tol)))
    }
}

fn read_corpus(dir: &Path) -> Result<Vec<Waveform>, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Data(format!("no .wav files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| read_wav(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display()))))
        .collect()
}

fn train(a: TrainArgs) -> CliResult {
    let preset = match (a.preset.as_deref(), a.fe) {
        (Some(p), _) => p,
        (None, FeName::Sc) => "sc",
        (None, FeName::W2v) => "w2v6@512",
        (None, _) => return Err(Failure::Usage("only sc and w2v front-ends are trainable".into())),
    };
    let config = model_preset(preset)?;
    let want = if a.fe == FeName::W2v { FeKind::W2v } else { FeKind::Sc };
    if config.kind() != want || matches!(a.fe, FeName::Logmel | FeName::Gammatone) {
        return Err(Failure::Usage(format!("preset {preset} does not match --fe")));
    }
    let corpus = match (&a.corpus, a.synthetic) {
        (Some(dir), _) => read_corpus(dir)?,
        (None, Some(n)) => synthetic_corpus(n, a.seed),
        (None, None) => unreachable!("clap requires one of them"),
    };
    let mut model = init_model(config, a.seed)?;
    let cfg = TrainConfig {
        steps: a.steps,
        peak_lr: a.peak_lr,
        schedule: match a.schedule {
            ScheduleArg::Constant => Schedule::Constant,
            ScheduleArg::OneCycle => Schedule::OneCycle,
        },
        seed: a.seed,
        batch_utterances: a.batch,
    };
    eprintln!("training {preset} on {} utterances for {} steps", corpus.len(), a.steps);
    let outcome = train_distill(&mut model, &corpus, &cfg)?;
    std::fs::write(&a.out, outcome.curve.to_csv()).map_err(|e| Failure::Data(e.to_string()))?;
    if let Some(path) = &a.save_weights {
        save_weights(&model, path)?;
    }
    let window = 10.min(outcome.curve.points.len());
    let (first, last) = (outcome.curve.initial(), outcome.curve.final_smoothed(window));
    if !last.is_finite() {
        return Err(Failure::Numeric("loss diverged".into()));
    }
    out!("steps={}", outcome.curve.points.len());
    out!("initial_loss={}", real(first));
    out!("final_loss={}", real(last));
    out!("ratio={}", real(last / first));
    Ok(())
}

fn weights(cmd: WeightsCommand) -> CliResult {
    match cmd {
        WeightsCommand::Export { preset, seed, out } => {
            let model = init_model(model_preset(&preset)?, seed)?;
            save_weights(&model, &out)?;
            out!("bytes={}", encode_archive(&model)?.len());
            out!("params={}", count_params(&model));
        }
        WeightsCommand::Inspect { path } => {
            let model = load_weights(&path)?;
            let g = audit_geometry(&model);
            let kind = match model.kind() {
                FeKind::W2v => "w2v",
                FeKind::Sc => "sc",
            };
            out!("kind={kind}");
            match &model.config {
                FeConfig::W2v(c) => {
                    out!("layers={}", c.layers.len());
                    out!("channels={}", c.output_channels());
                    out!("output_dim={}", c.output_dim());
                }
                FeConfig::Sc(c) => {
                    out!("filters={}", c.fb_channels);
                    out!("output_dim={}", model.config.output_dim());
                }
            }
            out!("params={}", count_params(&model));
            out!("rf_samples={}", g.receptive_field_samples);
            out!("shift_ms={}", real(g.frame_shift_ms));
            for (name, t) in &model.params {
                let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
                out!("tensor.{name}={}", dims.join("x"));
            }
        }
    }
    Ok(())
}
