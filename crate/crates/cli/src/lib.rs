//! The `lutfuse` command line: argument parsing, subcommands and exit codes.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal error |
//! | 2 | invalid arguments |
//! | 3 | data, I/O, PNG or bundle errors (including checksum mismatch) |
//! | 4 | numeric failure (non-finite values) |
//! | 5 | gradient check failed |
//!
//! Data goes to stdout as tab-separated text; diagnostics go to stderr.

use std::ffi::OsString;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lutfuse::apply::flatten_bank;
use lutfuse::formats::{encode_bundle, load_bundle, save_bundle, write_cube, BUNDLE_VERSION};
use lutfuse::gradcheck::{run_gradcheck, GradcheckConfig, TOLERANCE_32, TOLERANCE_64};
use lutfuse::imageio::{load_png, save_gray_png, save_png};
use lutfuse::losses::{monotonicity_loss, LossWeights};
use lutfuse::model::{Model, ModelConfig, PredictorKind, DEFAULT_CATEGORY_SPREAD};
use lutfuse::predictor::Predictor;
use lutfuse::train::synthetic::{run_two_zone, two_zone_pair, SyntheticConfig};
use lutfuse::train::{format_db, psnr, ssim, Dataset, EpochMetrics, TrainConfig, Trainer};
use lutfuse::{Error, Image, Lut};

pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const GRADCHECK: i32 = 5;
}

/// Published GPU timings of the reference implementation, shown next to the
/// bench results for scale. Not a target for this CPU implementation.
pub const GPU_REFERENCE_MS: [(&str, f64); 2] = [("640x480", 2.27), ("3840x2160", 4.39)];

pub const BENCH_HEADER: &str = "resolution\tpixels\treps\tpredictor_median_ms\tpredictor_p95_ms\tinterp_median_ms\tinterp_p95_ms\ttotal_median_ms\ttotal_p95_ms";

#[derive(Parser, Debug)]
#[command(name = "lutfuse", version, about = "Spatial-aware 3D LUT image enhancement")]
struct Cli {
    /// Worker threads (defaults to LUTFUSE_THREADS, then the core count).
    #[arg(long, global = true, env = "LUTFUSE_THREADS", value_parser = positive_usize)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a freshly initialized bundle (identity LUTs, uniform weights).
    Init(InitArgs),
    /// Train on a directory of input/ and target/ PNG pairs.
    Train(TrainArgs),
    /// Enhance one PNG.
    Apply(ApplyArgs),
    /// PSNR and SSIM of a bundle over a dataset.
    Eval(EvalArgs),
    /// Time predictor and interpolation on noise images.
    Bench(BenchArgs),
    /// Finite-difference check of every analytic gradient.
    Gradcheck(GradcheckArgs),
    /// Flatten a bundle under constant weights and write a .cube file.
    ExportCube(ExportCubeArgs),
    /// Print a bundle summary.
    Inspect(InspectArgs),
    /// Write the per-pixel category maps and scenario weights for an image.
    DumpWeights(DumpWeightsArgs),
    /// Train the two-zone synthetic task for M = 1..max-m.
    SweepM(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PredictorArg {
    Conv,
    Grid,
}

#[derive(Args, Debug, Clone)]
struct ShapeArgs {
    /// Scenario sets.
    #[arg(long = "t", default_value_t = 3, value_parser = positive_usize)]
    t: usize,
    /// Categories per scenario.
    #[arg(long = "m", default_value_t = 10, value_parser = positive_usize)]
    m: usize,
    /// Lattice points per axis.
    #[arg(long = "n", default_value_t = 33, value_parser = bins)]
    n: usize,
    #[arg(long, value_enum, default_value_t = PredictorArg::Conv)]
    predictor: PredictorArg,
    /// Side of the learnable logit grid (grid predictor).
    #[arg(long, default_value_t = 64, value_parser = positive_usize)]
    grid_size: usize,
    /// Amplitude of the zero-sum perturbation separating fresh categories.
    #[arg(long, default_value_t = DEFAULT_CATEGORY_SPREAD)]
    category_spread: f64,
}

impl ShapeArgs {
    fn config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            scenarios: self.t,
            categories: self.m,
            n_bins: self.n,
            predictor: match self.predictor {
                PredictorArg::Conv => PredictorKind::Conv,
                PredictorArg::Grid => PredictorKind::Grid,
            },
            conv_arch: None,
            grid_size: self.grid_size,
            category_spread: self.category_spread,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct LossArgs {
    #[arg(long = "loss-w-mse", default_value_t = 1.0)]
    mse: f64,
    #[arg(long = "loss-w-smooth", default_value_t = 1e-4)]
    smooth: f64,
    #[arg(long = "loss-w-mono", default_value_t = 10.0)]
    mono: f64,
    #[arg(long = "loss-w-color", default_value_t = 0.005)]
    color: f64,
    /// Needs a perceptual feature network, which is not bundled; the weight
    /// is accepted and has no effect from the command line.
    #[arg(long = "loss-w-perceptual", default_value_t = 0.05)]
    perceptual: f64,
    /// Leave the per-pixel Σα² term out of the smoothness loss.
    #[arg(long)]
    no_alpha_smooth: bool,
}

impl LossArgs {
    fn weights(&self) -> LossWeights {
        LossWeights {
            mse: self.mse,
            smooth: self.smooth,
            mono: self.mono,
            color: self.color,
            perceptual: self.perceptual,
            smooth_alpha: !self.no_alpha_smooth,
        }
    }
}

#[derive(Args, Debug)]
struct InitArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory with input/ and target/ subdirectories of same-named PNGs.
    #[arg(long)]
    data: PathBuf,
    /// Output bundle, rewritten after every epoch.
    #[arg(long)]
    out: PathBuf,
    /// Metrics log (default: <out>.metrics.tsv).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 400, value_parser = positive_u64)]
    epochs: u64,
    /// Peak learning rate of the cosine schedule.
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    /// Cosine restart period in epochs.
    #[arg(long, default_value_t = 20, value_parser = positive_u64)]
    period: u64,
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    batch: usize,
    /// Seeds initialization and data order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train on every pair instead of holding some out for validation.
    #[arg(long)]
    no_holdout: bool,
    /// Visit pairs in file-name order.
    #[arg(long)]
    no_shuffle: bool,
    /// Optimizer checkpoint written after every epoch.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint; the shape and loss flags must match.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    loss: LossArgs,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Only score the held-out pairs.
    #[arg(long)]
    holdout: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Comma-separated WIDTHxHEIGHT list.
    #[arg(long, value_delimiter = ',', value_parser = resolution, default_value = "640x480,1920x1080,3840x2160")]
    resolutions: Vec<(usize, usize)>,
    /// Timed repetitions per resolution.
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    reps: usize,
    /// Untimed runs before the timed ones.
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// Seeds the noise images.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flip the sign of one group's analytic gradient.
    #[arg(long)]
    inject_fault: Option<String>,
}

#[derive(Args, Debug)]
struct ExportCubeArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated scenario weights (default uniform).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    omega: Option<Vec<f64>>,
    /// Comma-separated category weights (default uniform).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Option<Vec<f64>>,
    #[arg(long, default_value = "lutfuse")]
    title: String,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Args, Debug)]
struct DumpWeightsArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 4, value_parser = positive_usize)]
    max_m: usize,
    #[arg(long, default_value_t = 2000, value_parser = positive_u64)]
    steps: u64,
    #[arg(long, default_value_t = 128, value_parser = positive_usize)]
    size: usize,
    #[arg(long = "n", default_value_t = 17, value_parser = bins)]
    n: usize,
    #[arg(long, default_value_t = 64, value_parser = positive_usize)]
    grid_size: usize,
    #[arg(long, default_value_t = 2e-2)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write m<M>.slut bundles and the input.png/target.png pair here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_u64(s: &str) -> Result<u64, String> {
    positive_usize(s).map(|v| v as u64)
}

fn bins(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v < 2 => Err("needs at least 2 lattice points".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn resolution(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    Ok((positive_usize(w.trim())?, positive_usize(h.trim())?))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Engine(Error),
    Output(std::io::Error),
    Gradcheck(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Output(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => exit::USAGE,
            Failure::Output(_) => exit::DATA,
            Failure::Gradcheck(_) => exit::GRADCHECK,
            Failure::Engine(e) => match e {
                Error::InvalidArgument(_) => exit::USAGE,
                Error::NonFinite(_) => exit::NUMERIC,
                Error::InvalidState(_) => exit::INTERNAL,
                Error::Io { .. }
                | Error::PngDecode(_)
                | Error::PngUnsupported(_)
                | Error::PngEncode(_)
                | Error::Format(_)
                | Error::Checksum { .. }
                | Error::Data(_) => exit::DATA,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Engine(e) => e.to_string(),
            Failure::Output(e) => format!("writing output: {e}"),
            Failure::Gradcheck(n) => format!("{n} gradient group(s) above tolerance"),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    exit::OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    if e.kind() != ErrorKind::MissingSubcommand && e.kind() != ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        let _ = writeln!(err, "\n{}", Cli::command().render_usage());
                    }
                    exit::USAGE
                }
            };
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, &mut *out, &mut *err)),
            Err(e) => Err(Failure::Usage(format!("cannot start {n} threads: {e}"))),
        },
        None => dispatch(cli.command, &mut *out, &mut *err),
    };
    let _ = out.flush();
    match result {
        Ok(()) => exit::OK,
        Err(f) => {
            let code = f.code();
            let _ = writeln!(err, "lutfuse: error: {}", f.message());
            if code == exit::USAGE {
                let _ = writeln!(err, "run `lutfuse --help` for usage");
            }
            code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match command {
        Command::Init(a) => cmd_init(a, err),
        Command::Train(a) => cmd_train(a, out, err),
        Command::Apply(a) => cmd_apply(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Bench(a) => cmd_bench(a, out, err),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::ExportCube(a) => cmd_export_cube(a, err),
        Command::Inspect(a) => cmd_inspect(a, out),
        Command::DumpWeights(a) => cmd_dump_weights(a, out),
        Command::SweepM(a) => cmd_sweep_m(a, out, err),
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn cmd_init(a: InitArgs, err: &mut dyn Write) -> CmdResult {
    let model = Model::<f32>::fresh(&a.shape.config(a.seed))?;
    save_bundle(&model, &a.out)?;
    writeln!(err, "wrote {}", a.out.display())?;
    Ok(())
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".metrics.tsv");
    PathBuf::from(s)
}

fn open_log(path: &Path, append: bool) -> Result<BufWriter<File>, Failure> {
    let exists = path.exists();
    let file = if append && exists {
        OpenOptions::new().append(true).open(path)
    } else {
        File::create(path)
    }
    .map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    if !(append && exists) {
        writeln!(w, "{}", EpochMetrics::HEADER)?;
    }
    Ok(w)
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        lr_amplitude: a.lr,
        lr_period_epochs: a.period,
        seed: a.seed,
        loss_weights: a.loss.weights(),
        model: a.shape.config(a.seed),
        shuffle: !a.no_shuffle,
        ..TrainConfig::default()
    };
    config.validate()?;
    if a.loss.perceptual != 0.0 {
        log::info!("no perceptual network is bundled; --loss-w-perceptual has no effect");
    }
    let data = Dataset::load(&a.data, !a.no_holdout)?;
    writeln!(err, "{} training pairs, {} validation pairs", data.train.len(), data.val.len())?;

    let mut trainer = match &a.resume {
        Some(path) => Trainer::<f32>::load_checkpoint(config, path)?,
        None => Trainer::<f32>::new(config)?,
    };
    let log_path = a.log.clone().unwrap_or_else(|| default_log_path(&a.out));
    let mut log = open_log(&log_path, a.resume.is_some())?;
    writeln!(out, "{}", EpochMetrics::HEADER)?;
    while trainer.epoch() < a.epochs {
        let m = trainer.run_epoch(&data, None)?;
        if !m.total.is_finite() || !trainer.model.all_finite() {
            return Err(Error::NonFinite(format!("training diverged in epoch {}", m.epoch)).into());
        }
        let line = m.to_tsv();
        writeln!(log, "{line}")?;
        log.flush()?;
        writeln!(out, "{line}")?;
        save_bundle(&trainer.model, &a.out)?;
        if let Some(path) = &a.checkpoint {
            trainer.save_checkpoint(path)?;
        }
    }
    save_bundle(&trainer.model, &a.out)?;
    writeln!(err, "wrote {} and {}", a.out.display(), log_path.display())?;
    Ok(())
}

fn cmd_apply(a: ApplyArgs, out: &mut dyn Write) -> CmdResult {
    let model = load_bundle(&a.bundle)?;
    let image = load_png(&a.input)?;
    let e = model.enhance(&image)?;
    if !e.output.data().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("enhanced image".into()).into());
    }
    save_png(&e.output, &a.output)?;
    let (p, i) = (ms(e.predictor_time), ms(e.interp_time));
    writeln!(out, "predictor_ms\tinterp_ms\ttotal_ms")?;
    writeln!(out, "{p:.3}\t{i:.3}\t{:.3}", p + i)?;
    Ok(())
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> CmdResult {
    let model = load_bundle(&a.bundle)?;
    let data = Dataset::load(&a.data, a.holdout)?;
    let pairs = if a.holdout { &data.val[..] } else { &data.train[..] };
    if pairs.is_empty() {
        return Err(Error::Data("no pairs to evaluate".into()).into());
    }
    writeln!(out, "name\tpsnr_db\tssim")?;
    let (mut ps, mut ss) = (0.0, 0.0);
    for pair in pairs {
        let y = model.enhance(&pair.input)?.output.clamped();
        let (p, s) = (psnr(&y, &pair.target)?, ssim(&y, &pair.target)?);
        ps += p;
        ss += s;
        writeln!(out, "{}\t{}\t{s:.6}", pair.name, format_db(p))?;
    }
    let n = pairs.len() as f64;
    writeln!(out, "mean\t{}\t{:.6}", format_db(ps / n), ss / n)?;
    Ok(())
}

/// Median and nearest-rank 95th percentile, in milliseconds.
fn summarize(samples: &mut [f64]) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    };
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    (median, samples[rank - 1])
}

fn noise_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Image {
    let data = (0..width * height * 3).map(|_| rng.gen::<f32>()).collect();
    Image::new(height, width, data).expect("noise image dimensions")
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = load_bundle(&a.bundle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let images: Vec<Image> = a.resolutions.iter().map(|&(w, h)| noise_image(&mut rng, w, h)).collect();
    for image in &images {
        for _ in 0..a.warmup {
            model.enhance(image)?;
        }
    }
    // resolutions interleaved within each round so host drift hits all alike
    let mut samples = vec![[Vec::new(), Vec::new(), Vec::new()]; images.len()];
    for _ in 0..a.reps {
        for (image, s) in images.iter().zip(&mut samples) {
            let e = model.enhance(image)?;
            s[0].push(ms(e.predictor_time));
            s[1].push(ms(e.interp_time));
            s[2].push(ms(e.predictor_time + e.interp_time));
        }
    }
    writeln!(out, "{BENCH_HEADER}")?;
    for (&(w, h), s) in a.resolutions.iter().zip(&mut samples) {
        let [p, i, t] = s.each_mut().map(|v| summarize(v));
        writeln!(
            out,
            "{w}x{h}\t{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            w * h,
            a.reps,
            p.0,
            p.1,
            i.0,
            i.1,
            t.0,
            t.1
        )?;
    }
    let reference: Vec<String> = GPU_REFERENCE_MS.iter().map(|(r, v)| format!("{v} ms @ {r}")).collect();
    writeln!(err, "published GPU reference (V100, not comparable to CPU): {}", reference.join(", "))?;
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> CmdResult {
    let reports = run_gradcheck(&GradcheckConfig {
        seed: a.seed,
        inject_fault: a.inject_fault,
    })?;
    writeln!(out, "group\tparams\tmax_rel_err_f32\tmax_rel_err_f64\ttol_f32\ttol_f64\tresult")?;
    let mut failed = 0;
    for r in &reports {
        let ok = r.passed();
        failed += usize::from(!ok);
        writeln!(
            out,
            "{}\t{}\t{:.3e}\t{:.3e}\t{TOLERANCE_32:.0e}\t{TOLERANCE_64:.0e}\t{}",
            r.name,
            r.params,
            r.err32,
            r.err64,
            if ok { "pass" } else { "FAIL" }
        )?;
    }
    if failed > 0 {
        return Err(Failure::Gradcheck(failed));
    }
    Ok(())
}

fn weights_or_uniform(given: Option<Vec<f64>>, len: usize, name: &str) -> Result<Vec<f32>, Failure> {
    match given {
        None => Ok(vec![1.0 / len as f32; len]),
        Some(v) if v.len() != len => Err(Failure::Usage(format!(
            "--{name} has {} values but the bundle has {len}",
            v.len()
        ))),
        Some(v) => Ok(v.into_iter().map(|x| x as f32).collect()),
    }
}

fn cmd_export_cube(a: ExportCubeArgs, err: &mut dyn Write) -> CmdResult {
    let model = load_bundle(&a.bundle)?;
    let omega = weights_or_uniform(a.omega, model.bank.scenarios(), "omega")?;
    let alpha = weights_or_uniform(a.alpha, model.bank.categories(), "alpha")?;
    let lut = flatten_bank(&model.bank, &omega, &alpha)?;
    write_cube(&lut, &a.title, &a.out)?;
    writeln!(err, "wrote {}", a.out.display())?;
    Ok(())
}

fn cmd_inspect(a: InspectArgs, out: &mut dyn Write) -> CmdResult {
    let model = load_bundle(&a.bundle)?;
    let bytes = encode_bundle(&model)?.len();
    let bank = &model.bank;
    let cells = bank.flat_values();
    let (lo, hi) = cells.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let identity = Lut::identity(bank.n_bins())?;
    let deviation = bank
        .luts()
        .iter()
        .flat_map(|l| l.values().iter().zip(identity.values()).map(|(a, b)| (a - b).abs()))
        .fold(0.0f32, f32::max);
    let predictor = match &model.predictor {
        Predictor::Conv(p) => format!("conv {0}x{0} input", p.arch().input_size),
        Predictor::Grid(g) => format!("grid {0}x{0}", g.alpha_size()),
    };
    let rows = [
        ("format", format!("SLUT v{BUNDLE_VERSION}")),
        ("bytes", bytes.to_string()),
        ("scenarios", bank.scenarios().to_string()),
        ("categories", bank.categories().to_string()),
        ("n_bins", bank.n_bins().to_string()),
        ("predictor", predictor),
        ("predictor_params", model.predictor.params().len().to_string()),
        ("cell_min", format!("{lo:.6}")),
        ("cell_max", format!("{hi:.6}")),
        ("max_identity_deviation", format!("{deviation:.6}")),
        ("monotonicity_loss", format!("{:.6e}", monotonicity_loss(bank).value)),
    ];
    for (k, v) in rows {
        writeln!(out, "{k}\t{v}")?;
    }
    Ok(())
}

fn cmd_dump_weights(a: DumpWeightsArgs, out: &mut dyn Write) -> CmdResult {
    let model = load_bundle(&a.bundle)?;
    let image = load_png(&a.input)?;
    let weights = model.weight_map(&image)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let (h, w, m) = (image.height(), image.width(), weights.categories());
    writeln!(out, "file\tmean_weight")?;
    for c in 0..m {
        let channel: Vec<f32> = weights.alpha().iter().skip(c).step_by(m).copied().collect();
        let name = format!("alpha_{c:02}.png");
        save_gray_png(&channel, h, w, a.out_dir.join(&name))?;
        let mean = channel.iter().map(|&v| v as f64).sum::<f64>() / channel.len() as f64;
        writeln!(out, "{name}\t{mean:.6}")?;
    }
    let omega: String = weights.omega().iter().enumerate().map(|(t, v)| format!("{t}\t{v:.9}\n")).collect();
    let path = a.out_dir.join("omega.txt");
    std::fs::write(&path, omega).map_err(|e| Error::Io { path, source: e })?;
    writeln!(out, "omega.txt\t-")?;
    Ok(())
}

fn cmd_sweep_m(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(Failure::Usage(format!("--lr must be positive, got {}", a.lr)));
    }
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let (input, target) = two_zone_pair(a.size, a.seed);
        save_png(&input, dir.join("input.png"))?;
        save_png(&target, dir.join("target.png"))?;
    }
    writeln!(out, "M\tpsnr_db\tsteps\twall_s")?;
    for m in 1..=a.max_m {
        let start = Instant::now();
        let run = run_two_zone(&SyntheticConfig {
            size: a.size,
            categories: m,
            n_bins: a.n,
            grid_size: a.grid_size,
            steps: a.steps,
            lr: a.lr,
            seed: a.seed,
            ..SyntheticConfig::default()
        })?;
        if !run.model.all_finite() {
            return Err(Error::NonFinite(format!("synthetic run with M={m}")).into());
        }
        let wall = start.elapsed().as_secs_f64();
        writeln!(out, "{m}\t{}\t{}\t{wall:.1}", format_db(run.final_psnr), a.steps)?;
        out.flush()?;
        if let Some(dir) = &a.out_dir {
            save_bundle(&run.model, dir.join(format!("m{m}.slut")))?;
        }
        log::info!("M={m}: {:.2} dB in {wall:.1} s", run.final_psnr);
    }
    writeln!(err, "two-zone task: {}x{} pixels, {} steps per M", a.size, a.size, a.steps)?;
    Ok(())
}
