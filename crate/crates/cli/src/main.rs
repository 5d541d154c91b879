//! `lgnlab` command-line front end. Exit codes: 0 success, 1 usage error,
//! 2 computation error. Failures end with one `ERROR <code>: <detail>` line
//! on stderr.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lgnlab::gabor::{effective_bank, fit_bank, fit_ringach_lines, load_bank, scatter_csv, single_line_sse};
use lgnlab::inverse::{invert_kernel, InverseConfig, InverseMode};
use lgnlab::io::{list_files, load_kernel, load_pgm, save_kernel, save_pgm, PgmOptions};
use lgnlab::kernels::log_kernel;
use lgnlab::retinex::{
    entropy_pipeline, probe_report, shadowed_checker, standard_circles, MeanPolicy, Point, ADELSON_HALF_WINDOW,
};
use lgnlab::symmetry::{fit_gaussian, symmetrize};
use lgnlab::toy::{train_with_progress, DatasetFiles, ToyModel, TrainConfig};
use lgnlab::{delta_kernel, discrete_laplacian, gaussian_kernel, Error, Image, Kernel};

#[derive(Parser, Debug)]
#[command(
    name = "lgnlab",
    version,
    about = "Kernel inversion, Retinex, filter symmetry and Gabor statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write an analytic kernel as KMAT.
    Kernel(KernelCmd),
    /// Rotationally symmetrize a KMAT kernel.
    Symmetrize(SymmetrizeCmd),
    /// Compute the approximate inverse of a kernel.
    Invert(InvertCmd),
    /// Reconstruct an image from its filtered version and probe it.
    Retinex(RetinexCmd),
    /// Fit Gabor functions to a filter bank and summarize (n_x, n_y).
    GaborFit(GaborFitCmd),
    /// Train the single-filter digit/clothing classifier.
    TrainToy(TrainToyCmd),
    /// Mean entropies of images, their filtered versions and reconstructions.
    Entropy(EntropyCmd),
    /// Symmetry and Gaussian-fit report for a learned first-layer filter.
    AnalyzePsi0(AnalyzePsi0Cmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    Gaussian,
    Log,
    MinusLog,
    Laplacian,
    Delta,
}

/// `--kernel` takes an analytic kernel name or a KMAT path.
#[derive(Args, Debug)]
struct KernelSource {
    /// gaussian, log, minus-log, laplacian, delta, or a KMAT file
    #[arg(long, default_value = "minus-log")]
    kernel: String,
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    /// Side of analytic kernels (the Laplacian is always 3)
    #[arg(long, default_value_t = 7)]
    side: usize,
    /// Amplitude of the Gaussian
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl KernelSource {
    fn describe(&self, cfg: &mut Config) {
        cfg.add("kernel", &self.kernel);
        if KernelKind::from_str(&self.kernel, true).is_ok() {
            cfg.add("sigma", self.sigma);
            cfg.add("side", self.side);
            cfg.add("alpha", self.alpha);
        }
    }

    fn load(&self) -> Result<Kernel, Failure> {
        match KernelKind::from_str(&self.kernel, true) {
            Ok(kind) => analytic(kind, self.side, self.sigma, self.alpha).map_err(Failure::Usage),
            Err(_) => Ok(load_kernel(&self.kernel)?),
        }
    }
}

fn analytic(kind: KernelKind, side: usize, sigma: f64, alpha: f64) -> Result<Kernel, Error> {
    match kind {
        KernelKind::Gaussian => gaussian_kernel(side, sigma, alpha),
        KernelKind::Log => log_kernel(side, sigma, false),
        KernelKind::MinusLog => log_kernel(side, sigma, true),
        KernelKind::Laplacian => Ok(discrete_laplacian()),
        KernelKind::Delta => delta_kernel(side),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Richardson,
    LeastSquares,
}

#[derive(Args, Debug)]
struct InverseArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::LeastSquares)]
    mode: ModeArg,
    #[arg(long, default_value_t = InverseConfig::default().dt, allow_negative_numbers = true)]
    dt: f64,
    #[arg(long, default_value_t = InverseConfig::default().epsilon)]
    epsilon: f64,
    #[arg(long, default_value_t = InverseConfig::default().max_iters)]
    max_iters: usize,
    /// Odd side of the inverse's support
    #[arg(long, default_value_t = InverseConfig::default().support_side)]
    support: usize,
}

impl InverseArgs {
    fn config(&self) -> InverseConfig {
        InverseConfig {
            dt: self.dt,
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            support_side: self.support,
            mode: match self.mode {
                ModeArg::Richardson => InverseMode::Richardson,
                ModeArg::LeastSquares => InverseMode::LeastSquares,
            },
        }
    }

    fn describe(&self, cfg: &mut Config) {
        let c = self.config();
        cfg.add("mode", c.mode.name());
        cfg.add("dt", c.dt);
        cfg.add("epsilon", c.epsilon);
        cfg.add("max_iters", c.max_iters);
        cfg.add("support", c.support_side);
    }
}

#[derive(Args, Debug)]
struct KernelCmd {
    #[arg(long = "type", value_enum)]
    kind: KernelKind,
    #[arg(long, default_value_t = 7)]
    side: usize,
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Output KMAT; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SymmetrizeCmd {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InvertCmd {
    #[command(flatten)]
    kernel: KernelSource,
    #[command(flatten)]
    inverse: InverseArgs,
    /// Output KMAT for the inverse
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output CSV with the residual and update norms per iteration
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Synthetic {
    Circles,
    Checker,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    MatchInput,
    ZeroMean,
}

#[derive(Args, Debug)]
struct RetinexCmd {
    /// Input PGM image
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    /// Built-in stimulus instead of an input file
    #[arg(long, value_enum)]
    synthetic: Option<Synthetic>,
    #[command(flatten)]
    kernel: KernelSource,
    #[command(flatten)]
    inverse: InverseArgs,
    #[arg(long, value_enum, default_value_t = PolicyArg::MatchInput)]
    mean_policy: PolicyArg,
    /// Probe the two marked points of the synthetic stimulus
    #[arg(long, requires = "synthetic")]
    probe_dots: bool,
    /// Extra probe at ROW,COL (repeatable)
    #[arg(long, value_parser = parse_point)]
    probe: Vec<Point>,
    #[arg(long, default_value_t = ADELSON_HALF_WINDOW)]
    half_window: usize,
    /// Reconstruction as PGM, mapped from its own value range
    #[arg(long)]
    out: Option<PathBuf>,
    /// Probe values as CSV
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (r, c) = s
        .split_once(',')
        .ok_or_else(|| format!("expected ROW,COL, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(r)?, p(c)?))
}

#[derive(Args, Debug)]
struct GaborFitCmd {
    /// KBANK file or directory of KMAT files
    #[arg(long)]
    bank: PathBuf,
    /// Compose every filter with this first-layer kernel before fitting
    #[arg(long)]
    psi0: Option<PathBuf>,
    /// Output CSV with one row per filter
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainToyCmd {
    /// Directory holding mnist/ and fashion/ IDX files
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    mnist_train: Option<PathBuf>,
    #[arg(long)]
    fashion_train: Option<PathBuf>,
    #[arg(long)]
    mnist_test: Option<PathBuf>,
    #[arg(long)]
    fashion_test: Option<PathBuf>,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    momentum: f64,
    #[arg(long, default_value_t = TrainConfig::default().l2)]
    l2: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    /// Seeds initialization, dataset order and batch order
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    augment_rotation: bool,
    /// Output checkpoint
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Write the learned first-layer filter as KMAT
    #[arg(long)]
    psi0_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EntropyCmd {
    /// Directory of PGM images
    #[arg(long)]
    images: PathBuf,
    #[command(flatten)]
    kernel: KernelSource,
    #[command(flatten)]
    inverse: InverseArgs,
}

#[derive(Args, Debug)]
struct AnalyzePsi0Cmd {
    /// TOYMODEL checkpoint
    #[arg(long, conflicts_with = "kernel", required_unless_present = "kernel")]
    model: Option<PathBuf>,
    /// A bare KMAT kernel instead of a checkpoint
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Output KMAT for the symmetrized filter
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(Error),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

/// Resolved settings, printed before any computation.
struct Config(Vec<(String, String)>);

impl Config {
    fn new(command: &str) -> Self {
        Config(vec![("command".into(), command.into())])
    }

    fn add(&mut self, key: &str, value: impl Display) {
        self.0.push((key.into(), value.to_string()));
    }

    fn add_path(&mut self, key: &str, value: &Option<PathBuf>) {
        if let Some(p) = value {
            self.add(key, p.display());
        }
    }

    fn print(&self) {
        for (k, v) in &self.0 {
            println!("config {k}={v}");
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let first = e.to_string();
            let first = first
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("ERROR usage: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("ERROR usage: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("ERROR {}: {e}", e.code());
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Kernel(c) => kernel(c),
        Command::Symmetrize(c) => symmetrize_cmd(c),
        Command::Invert(c) => invert(c),
        Command::Retinex(c) => retinex(c),
        Command::GaborFit(c) => gabor_fit(c),
        Command::TrainToy(c) => train_toy(c),
        Command::Entropy(c) => entropy(c),
        Command::AnalyzePsi0(c) => analyze_psi0(c),
    }
}

fn kernel(c: KernelCmd) -> Result<(), Failure> {
    let mut cfg = Config::new("kernel");
    cfg.add("type", value_name(c.kind));
    cfg.add("side", c.side);
    cfg.add("sigma", c.sigma);
    cfg.add("alpha", c.alpha);
    cfg.add_path("out", &c.out);
    let k = analytic(c.kind, c.side, c.sigma, c.alpha).map_err(Failure::Usage)?;
    cfg.print();
    match &c.out {
        Some(p) => save_kernel(p, &k)?,
        None => print!("{}", lgnlab::io::encode_kmat(k.as_image(), &[])),
    }
    Ok(())
}

fn symmetrize_cmd(c: SymmetrizeCmd) -> Result<(), Failure> {
    let mut cfg = Config::new("symmetrize");
    cfg.add("input", c.input.display());
    cfg.add_path("out", &c.out);
    cfg.print();
    let k = load_kernel(&c.input)?;
    let report = symmetrize(&k)?;
    println!("correlation {:.16e}", report.correlation);
    if let Some(p) = &c.out {
        save_kernel(p, &report.symmetrized)?;
    }
    Ok(())
}

/// Validates flags against the kernel before any iteration starts.
fn resolve_inverse(
    kernel: &KernelSource,
    inverse: &InverseArgs,
    cfg: &mut Config,
) -> Result<(Kernel, InverseConfig), Failure> {
    kernel.describe(cfg);
    inverse.describe(cfg);
    let m = kernel.load()?;
    let icfg = inverse.config();
    icfg.validate(&m).map_err(Failure::Usage)?;
    Ok((m, icfg))
}

fn invert(c: InvertCmd) -> Result<(), Failure> {
    let mut cfg = Config::new("invert");
    let (m, icfg) = resolve_inverse(&c.kernel, &c.inverse, &mut cfg)?;
    cfg.add_path("out", &c.out);
    cfg.add_path("trace", &c.trace);
    cfg.print();
    let result = invert_kernel(&m, &icfg)?;
    println!("iterations {}", result.iterations);
    println!("converged {}", result.converged);
    println!("residual_l1 {:.16e}", result.residual_l1);
    if let Some(p) = &c.out {
        save_kernel(p, &result.m_tilde)?;
    }
    if let Some(p) = &c.trace {
        result.save_trace(p)?;
    }
    Ok(())
}

fn retinex(c: RetinexCmd) -> Result<(), Failure> {
    let mut cfg = Config::new("retinex");
    match (&c.input, c.synthetic) {
        (Some(p), _) => cfg.add("input", p.display()),
        (None, Some(s)) => cfg.add("synthetic", value_name(s)),
        (None, None) => unreachable!("clap requires one of --input/--synthetic"),
    }
    let (m, icfg) = resolve_inverse(&c.kernel, &c.inverse, &mut cfg)?;
    let policy = match c.mean_policy {
        PolicyArg::MatchInput => MeanPolicy::MatchInput,
        PolicyArg::ZeroMean => MeanPolicy::ZeroMean,
    };
    cfg.add("mean_policy", value_name(c.mean_policy));
    cfg.add("half_window", c.half_window);
    cfg.add_path("out", &c.out);
    cfg.add_path("report", &c.report);

    let (image, marked): (Image, Vec<(String, Point)>) = match (&c.input, c.synthetic) {
        (Some(p), _) => (load_pgm(p)?, Vec::new()),
        (None, Some(Synthetic::Circles)) => {
            let (img, l, r) = standard_circles();
            (img, vec![("left".into(), l), ("right".into(), r)])
        }
        (None, Some(Synthetic::Checker)) => {
            let (img, a, b) = shadowed_checker();
            (img, vec![("A".into(), a), ("B".into(), b)])
        }
        (None, None) => unreachable!(),
    };
    let mut points: Vec<(String, Point)> = if c.probe_dots { marked } else { Vec::new() };
    points.extend(c.probe.iter().map(|&(r, col)| (format!("{r}_{col}"), (r, col))));
    for (label, (r, col)) in &points {
        cfg.add(&format!("probe.{label}"), format!("{r},{col}"));
    }
    cfg.print();

    let inverse = invert_kernel(&m, &icfg)?;
    println!("iterations {}", inverse.iterations);
    println!("residual_l1 {:.16e}", inverse.residual_l1);
    let labelled: Vec<(&str, Point)> = points.iter().map(|(l, p)| (l.as_str(), *p)).collect();
    let report = probe_report(&image, &m, &inverse.m_tilde, policy, &labelled, c.half_window)?;
    for p in &report.probes {
        println!("probe {} before {:.6} after {:.6}", p.label, p.before, p.after);
    }
    if let Some(path) = &c.out {
        let r = &report.reconstruction;
        let range = if r.max() > r.min() {
            (r.min(), r.max())
        } else {
            (r.min() - 1.0, r.max() + 1.0)
        };
        save_pgm(
            path,
            r,
            &PgmOptions {
                range,
                ..PgmOptions::default()
            },
        )?;
    }
    if let Some(path) = &c.report {
        write_text(path, &report.probe_csv())?;
    }
    Ok(())
}

fn gabor_fit(c: GaborFitCmd) -> Result<(), Failure> {
    let mut cfg = Config::new("gabor-fit");
    cfg.add("bank", c.bank.display());
    cfg.add_path("psi0", &c.psi0);
    cfg.add_path("scatter", &c.scatter);
    cfg.print();
    let mut bank = load_bank(&c.bank)?;
    if let Some(p) = &c.psi0 {
        bank = effective_bank(&load_kernel(p)?, &bank)?;
    }
    let fits = fit_bank(&bank)?;
    let points: Vec<_> = fits.iter().map(|f| f.point).collect();
    println!("filters {}", fits.len());
    let mean_corr = fits.iter().map(|f| f.fit.corr).sum::<f64>() / fits.len() as f64;
    println!("mean_corr {mean_corr:.6}");
    if let Some(p) = &c.scatter {
        write_text(p, &scatter_csv(&fits))?;
    }
    let fit = fit_ringach_lines(&points)?;
    println!("alpha {:.6}", fit.alpha);
    println!("breakpoint {:.6},{:.6}", fit.breakpoint.0, fit.breakpoint.1);
    println!("slope2 {:.6}", fit.slope2);
    println!("sse {:.6e}", fit.sse);
    println!("single_line_sse {:.6e}", single_line_sse(&points));
    Ok(())
}

fn train_toy(c: TrainToyCmd) -> Result<(), Failure> {
    let mut cfg = Config::new("train-toy");
    let defaults = DatasetFiles::in_dir(&c.data_dir);
    let files = DatasetFiles {
        mnist_train: c.mnist_train.clone().unwrap_or(defaults.mnist_train),
        fashion_train: c.fashion_train.clone().unwrap_or(defaults.fashion_train),
        mnist_test: c.mnist_test.clone().unwrap_or(defaults.mnist_test),
        fashion_test: c.fashion_test.clone().unwrap_or(defaults.fashion_test),
    };
    let tcfg = TrainConfig {
        epochs: c.epochs,
        lr: c.lr,
        momentum: c.momentum,
        l2: c.l2,
        batch_size: c.batch_size,
        seed: c.seed,
        augment_rotation: c.augment_rotation,
    };
    for (k, p) in [
        ("mnist_train", &files.mnist_train),
        ("fashion_train", &files.fashion_train),
        ("mnist_test", &files.mnist_test),
        ("fashion_test", &files.fashion_test),
    ] {
        cfg.add(k, p.display());
    }
    cfg.add("epochs", tcfg.epochs);
    cfg.add("lr", tcfg.lr);
    cfg.add("momentum", tcfg.momentum);
    cfg.add("l2", tcfg.l2);
    cfg.add("batch_size", tcfg.batch_size);
    cfg.add("seed", tcfg.seed);
    cfg.add("augment_rotation", tcfg.augment_rotation);
    cfg.add("threads", lgnlab::parallel::threads());
    cfg.add_path("out", &c.out);
    cfg.add_path("loss_csv", &c.loss_csv);
    cfg.add_path("psi0_out", &c.psi0_out);
    tcfg.validate().map_err(Failure::Usage)?;
    cfg.print();

    let (train_set, test_set) = files.build(tcfg.seed)?;
    println!("train_size {}", train_set.len());
    println!("test_size {}", test_set.len());
    let mut model = ToyModel::init(tcfg.seed);
    let report = train_with_progress(&mut model, &train_set, &test_set, &tcfg, |e, l| {
        println!("epoch {} loss {l:.6}", e + 1);
    })?;
    println!("test_accuracy {:.6}", report.final_test_accuracy);
    match &report.psi0_symmetry {
        Some(s) => println!("psi0_symmetry_corr {:.6}", s.correlation),
        None => println!("psi0_symmetry_corr n/a"),
    }
    match &report.gaussian_fit {
        Some((g, corr)) => println!("gaussian_fit alpha {:.6} sigma {:.6} corr {corr:.6}", g.alpha, g.sigma),
        None => println!("gaussian_fit n/a"),
    }
    if let Some(p) = &c.out {
        model.save(p)?;
    }
    if let Some(p) = &c.loss_csv {
        write_text(p, &report.loss_curve_csv())?;
    }
    if let Some(p) = &c.psi0_out {
        save_kernel(p, &model.psi0)?;
    }
    Ok(())
}

fn entropy(c: EntropyCmd) -> Result<(), Failure> {
    let mut cfg = Config::new("entropy");
    cfg.add("images", c.images.display());
    let (m, icfg) = resolve_inverse(&c.kernel, &c.inverse, &mut cfg)?;
    cfg.print();
    let files = list_files(&c.images, "pgm")?;
    let images = files.iter().map(load_pgm).collect::<Result<Vec<_>, _>>()?;
    println!("images {}", images.len());
    let means = entropy_pipeline(&images, &m, &icfg)?;
    println!("entropy_original {:.6}", means.original);
    println!("entropy_convolved {:.6}", means.convolved);
    println!("entropy_reconstructed {:.6}", means.reconstructed);
    Ok(())
}

fn analyze_psi0(c: AnalyzePsi0Cmd) -> Result<(), Failure> {
    let mut cfg = Config::new("analyze-psi0");
    cfg.add_path("model", &c.model);
    cfg.add_path("kernel", &c.kernel);
    cfg.add_path("out", &c.out);
    cfg.print();
    let psi0 = match (&c.model, &c.kernel) {
        (Some(p), _) => ToyModel::load(p)?.psi0,
        (None, Some(p)) => load_kernel(p)?,
        (None, None) => unreachable!("clap requires one of --model/--kernel"),
    };
    let sym = symmetrize(&psi0)?;
    println!("symmetry_corr {:.6}", sym.correlation);
    if let Some(p) = &c.out {
        save_kernel(p, &sym.symmetrized)?;
    }
    let (g, corr) = fit_gaussian(&psi0)?;
    println!("gaussian alpha {:.6} sigma {:.6} corr {corr:.6}", g.alpha, g.sigma);
    Ok(())
}

fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value()
        .map_or_else(String::new, |p| p.get_name().to_string())
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
