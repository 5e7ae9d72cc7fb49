//! `sio-lab`: generate measures, certify growth, kernels and good radii,
//! trace pairings, and run convergence suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sio_core::experiments::{
    emit_report, generate, run_convergence_suite, ConvergenceReport, GeneratorSpec, ReportFormat,
    SuiteConfig,
};
use sio_core::good_radii::{
    materialize_good_set, select_good_radius_near, GoodRadiusOracle, GoodSetParams, Verdict,
};
use sio_core::kernel::{check_antisymmetry, check_size_bound, KernelSpec};
use sio_core::measure::{DiscreteMeasure, MeasureFile};
use sio_core::metric::{validate_metric, PointCloudFile};
use sio_core::operator::{pairing_trace, EpsGrid, SimpleFunction};
use sio_core::rational;

#[derive(Parser)]
#[command(name = "sio-lab", version, about)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random choices.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test measure (writes cloud.json and measure.json).
    Generate(GenerateArgs),
    /// Validate the metric and certify the s-growth constant.
    CheckGrowth(GrowthArgs),
    /// Check kernel antisymmetry and its size bound.
    CheckKernel(KernelCheckArgs),
    /// Certify, select or materialize good radii about a center.
    GoodRadii(GoodRadiiArgs),
    /// Trace a pairing along an epsilon grid as CSV.
    Pairing(PairingArgs),
    /// Run a convergence suite.
    Converge(ConvergeArgs),
    /// Re-emit a saved report.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    FourCorner,
    Cantor1d,
    UniformRandom,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Generator spec as JSON (overrides --family).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    level: u32,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    ratio: f64,
    #[arg(long, default_value_t = 256)]
    count: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Args)]
struct GrowthArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long)]
    r_min: f64,
    /// Normalize to total mass 1 first.
    #[arg(long)]
    normalize: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Riesz,
    Custom,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "riesz")]
    kernel: KernelKind,
    /// Coordinate of the Riesz kernel (1-based).
    #[arg(long, default_value_t = 1)]
    riesz_i: usize,
    /// Dimension parameter of the Riesz kernel.
    #[arg(long, default_value_t = 1)]
    riesz_n: u32,
    /// Kernel exponent (defaults to the Riesz `n`).
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    kernel_file: Option<PathBuf>,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec> {
        Ok(match self.kernel {
            KernelKind::Riesz => {
                let mut k = KernelSpec::riesz(self.riesz_i, self.riesz_n);
                if let Some(s) = self.s {
                    k.s = s;
                }
                k
            }
            KernelKind::Custom => {
                let path = self.kernel_file.as_ref().context("--kernel custom needs --kernel-file")?;
                let mut k = KernelSpec::load(path)?;
                if let Some(s) = self.s {
                    k.s = s;
                }
                k
            }
        })
    }
}

#[derive(Args)]
struct KernelCheckArgs {
    #[arg(long)]
    measure: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args)]
struct GoodRadiiArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    center: usize,
    #[arg(long, default_value_t = 5)]
    lambda: u32,
    #[arg(long, default_value_t = 3)]
    depth: u32,
    /// Write the good set as JSON to this file (relative to --out-dir).
    #[arg(long, group = "mode")]
    materialize: Option<PathBuf>,
    /// Certify this radius (decimal or p/q).
    #[arg(long, group = "mode")]
    test: Option<String>,
    /// Select the good radius nearest to this target.
    #[arg(long, group = "mode")]
    near: Option<f64>,
    /// Shell budget for --materialize.
    #[arg(long, default_value_t = sio_core::good_radii::DEFAULT_BUDGET)]
    budget: u128,
}

#[derive(Args)]
struct PairingArgs {
    #[arg(long)]
    measure: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
    #[arg(long, default_value = "geometric:start=0.5,ratio=0.5,count=20")]
    eps_grid: String,
    /// CSV output (relative to --out-dir); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Suite configuration JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator level.
    #[arg(long)]
    level: Option<u32>,
    #[arg(long)]
    lambda: Option<u32>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    balls: Option<usize>,
    #[arg(long)]
    eps_grid: Option<String>,
    /// Comma-separated levels for the boundary trend.
    #[arg(long, value_delimiter = ',')]
    trend_levels: Option<Vec<u32>>,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json written by `converge --format json`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    MeasureFile::load(path).with_context(|| format!("loading measure {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<bool> {
    let spec = match (&a.spec, a.family) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<GeneratorSpec>(&text)?
        }
        (None, Some(Family::FourCorner)) => GeneratorSpec::four_corner(a.level),
        (None, Some(Family::Cantor1d)) => GeneratorSpec::cantor_1d(a.ratio, a.level),
        (None, Some(Family::UniformRandom)) => {
            GeneratorSpec::uniform_random(a.count, a.dim, cli.seed.unwrap_or(0))
        }
        (None, None) => bail!("pass --family or --spec"),
    };
    let g = generate(&spec)?;
    std::fs::create_dir_all(&cli.out_dir)?;
    write_json(&cli.out_dir.join("cloud.json"), &PointCloudFile::from_cloud(&g.cloud))?;
    let mut file = MeasureFile::from_measure(&g.measure);
    file.cloud = sio_core::measure::CloudRef::Path("cloud.json".into());
    write_json(&cli.out_dir.join("measure.json"), &file)?;
    print_json(&serde_json::json!({
        "generator": spec,
        "atoms": g.cloud.len(),
        "diameter": g.cloud.diameter(),
        "r_min": g.r_min,
    }))?;
    Ok(true)
}

fn cmd_check_growth(cli: &Cli, a: &GrowthArgs) -> Result<bool> {
    let mut m = load_measure(&a.measure)?;
    if a.normalize {
        m = m.normalize()?.0;
    }
    let metric = validate_metric(m.cloud(), cli.seed.unwrap_or(0));
    let growth = m.growth_constant(a.s, a.r_min)?;
    let ok = metric.symmetry_ok && metric.identity_ok && metric.triangle_ok;
    print_json(&serde_json::json!({ "metric": metric, "growth": growth }))?;
    Ok(ok)
}

fn cmd_check_kernel(a: &KernelCheckArgs) -> Result<bool> {
    let m = load_measure(&a.measure)?;
    let k = a.kernel.spec()?;
    let anti = check_antisymmetry(&k, m.cloud())?;
    let size = check_size_bound(&k, m.cloud(), k.s)?;
    let ok = anti.ok;
    print_json(&serde_json::json!({ "kernel": k, "antisymmetry": anti, "size_bound": size }))?;
    Ok(ok)
}

fn cmd_good_radii(cli: &Cli, a: &GoodRadiiArgs) -> Result<bool> {
    let m = load_measure(&a.measure)?;
    let mu_z = m.radial_pushforward(a.center)?;
    let params = GoodSetParams::unit(a.lambda, a.depth)?;
    if let Some(out) = &a.materialize {
        let set = materialize_good_set(&mu_z, &params, a.budget)?;
        std::fs::create_dir_all(&cli.out_dir)?;
        let path = cli.out_dir.join(out);
        set.write_json(&path)?;
        print_json(&serde_json::json!({
            "intervals": set.len(),
            "total_length": rational::display(&set.total_length()),
            "lower_bound": rational::display(&params.lower_bound()),
            "file": path,
        }))?;
        return Ok(true);
    }
    if let Some(t) = &a.test {
        let t = rational::parse(t)?;
        let oracle = GoodRadiusOracle::new(&mu_z, &params)?;
        return match oracle.certify(&t)? {
            Verdict::Good(cert) => {
                print_json(&serde_json::json!({ "good": true, "certificate": cert }))?;
                Ok(true)
            }
            Verdict::Rejected(rej) => {
                print_json(&serde_json::json!({ "good": false, "rejection": rej }))?;
                Ok(false)
            }
        };
    }
    if let Some(target) = a.near {
        let t = select_good_radius_near(&mu_z, target, &params)?;
        print_json(&serde_json::json!({
            "radius": rational::display(&t),
            "approx": rational::to_f64(&t),
        }))?;
        return Ok(true);
    }
    bail!("pass one of --materialize, --test or --near")
}

fn cmd_pairing(cli: &Cli, a: &PairingArgs) -> Result<bool> {
    let m = load_measure(&a.measure)?;
    let k = a.kernel.spec()?;
    let f = SimpleFunction::load(&a.f)?;
    let g = SimpleFunction::load(&a.g)?;
    let grid: EpsGrid = a.eps_grid.parse()?;
    let trace = pairing_trace(&k, &m, &f, &g, &grid)?;
    match &a.out {
        Some(out) => {
            std::fs::create_dir_all(&cli.out_dir)?;
            trace.write_csv(&cli.out_dir.join(out))?;
        }
        None => print!("{}", trace.to_csv()),
    }
    if !trace.ok {
        eprintln!("four-term bound violated on at least one step");
    }
    Ok(trace.ok)
}

fn write_run_meta(cli: &Cli, command: &str, extra: serde_json::Value) -> Result<()> {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_json(
        &cli.out_dir.join("run_meta.json"),
        &serde_json::json!({
            "command": command,
            "args": std::env::args().collect::<Vec<_>>(),
            "threads": rayon::current_num_threads(),
            "unix_time": now,
            "version": env!("CARGO_PKG_VERSION"),
            "details": extra,
        }),
    )
}

fn cmd_converge(cli: &Cli, a: &ConvergeArgs) -> Result<bool> {
    let mut cfg = match &a.config {
        Some(path) => SuiteConfig::load(path)?,
        None => SuiteConfig::default(),
    };
    if let Some(level) = a.level {
        cfg.generator = cfg
            .generator
            .at_level(level)
            .context("--level needs a generator with levels")?;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = a.depth {
        cfg.depth = v;
    }
    if let Some(v) = a.balls {
        cfg.balls = v;
    }
    if let Some(v) = &a.eps_grid {
        cfg.eps_grid = v.parse()?;
    }
    if let Some(v) = &a.trend_levels {
        cfg.trend_levels = Some(v.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let format: ReportFormat = a.format.parse()?;
    let report = run_convergence_suite(&cfg)?;
    let files = emit_report(&report, format, &cli.out_dir)?;
    write_run_meta(cli, "converge", serde_json::json!({ "config": cfg }))?;
    for f in &files {
        println!("{}", f.display());
    }
    if !report.all_ok() {
        for r in &report.records {
            for c in r.checks.iter().filter(|c| !c.ok) {
                eprintln!("FAILED {} {}: {} > {}", c.kind, c.subject, c.lhs, c.rhs);
            }
        }
    }
    Ok(report.all_ok())
}

fn cmd_report(cli: &Cli, a: &ReportArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let report: ConvergenceReport = serde_json::from_str(&text)?;
    let format: ReportFormat = a.format.parse()?;
    for f in emit_report(&report, format, &cli.out_dir)? {
        println!("{}", f.display());
    }
    Ok(report.all_ok())
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a),
        Command::CheckGrowth(a) => cmd_check_growth(cli, a),
        Command::CheckKernel(a) => cmd_check_kernel(a),
        Command::GoodRadii(a) => cmd_good_radii(cli, a),
        Command::Pairing(a) => cmd_pairing(cli, a),
        Command::Converge(a) => cmd_converge(cli, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
