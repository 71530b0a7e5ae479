use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng as _;

use padamp_core::diagnostics::{norm_growth_limit, simulate_norm_growth, DiagnosticsReport};
use padamp_core::harness::telemetry::{check_telemetry, read_convergence, read_telemetry};
use padamp_core::harness::{run, sibling, sweep, ConfigMap};
use padamp_core::objectives::gradient_check;
use padamp_core::types::seeded_rng;
use padamp_core::{Error, Result};

#[derive(Parser)]
#[command(name = "padamp", version, about = "Partially adaptive projected optimizers and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Step budget (points to check for grad-check, rows to replay for check)
    #[arg(long)]
    steps: Option<u64>,
    /// Output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for outputs when --out is not given
    #[arg(long, env = "PADAMP_OUT_DIR", default_value = "padamp-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Key-value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set hp.p=0.125
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self, common: &Common) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(path) => ConfigMap::parse(&std::fs::read_to_string(path)?)?,
            None => ConfigMap::default(),
        };
        for o in &self.overrides {
            map.set_pair(o)?;
        }
        if let Some(seed) = common.seed {
            map.set("seed", &seed.to_string())?;
        }
        if let Some(steps) = common.steps {
            map.remove("budget.epochs");
            map.set("budget.steps", &steps.to_string())?;
        }
        Ok(map)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write telemetry, diagnostics and convergence CSVs
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat a run over values of one config key, in parallel
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Config key to vary
        #[arg(long)]
        axis: String,
        /// Values for the axis, separated by `;`
        #[arg(long, value_delimiter = ';', required = true)]
        values: Vec<String>,
        /// Worker threads (default: all cores)
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare squared weight-norm growth with and without momentum
    NormSim {
        /// Momentum coefficients
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.9, 0.99])]
        beta: Vec<f64>,
        /// Update norms decay as t^-power
        #[arg(long, default_value_t = 2.0)]
        power: f64,
        /// Multiply each update norm by a seeded factor in [1-jitter, 1+jitter]
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Initial squared weight norm
        #[arg(long, default_value_t = 1.0)]
        theta0_norm_sq: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Replay a telemetry CSV through the checks decidable from telemetry
    Check {
        /// Telemetry CSV written by `run`
        telemetry: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare analytic gradients with central differences at random points
    GradCheck {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Difference step
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
        #[command(flatten)]
        common: Common,
    },
}

fn out_path(common: &Common, default_name: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| common.out_dir.join(default_name))
}

fn print_report(report: &DiagnosticsReport) {
    for r in &report.rows {
        let verdict = if r.info { "info" } else if r.pass { "ok" } else { "FAIL" };
        println!("  {:<36} {:>14.6e}  {verdict}", r.name, r.value);
    }
}

fn write_report(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    report.write_csv(BufWriter::new(File::create(path)?))
}

fn failed(what: &str, report: &DiagnosticsReport) -> Error {
    let names: Vec<&str> = report.failures().map(|r| r.name.as_str()).collect();
    Error::InvalidArgument(format!("{what}: failed checks: {}", names.join(", ")))
}

fn cmd_run(cfg: &ConfigArgs, common: &Common) -> Result<()> {
    let mut map = cfg.load(common)?;
    if common.out.is_some() || map.get("output.path").is_none() {
        map.set("output.path", &out_path(common, "run.csv").to_string_lossy())?;
    }
    let config = map.resolve()?;
    let result = run(&config)?;
    let s = &result.summary;
    println!(
        "{} on {}: {} steps in {:.2}s",
        config.optimizer,
        config.objective.kind,
        result.records.len(),
        s.wall_time_secs
    );
    println!("  final loss {:e}", s.final_loss);
    if let Some(a) = s.final_accuracy {
        println!("  final accuracy {a:.4}");
    }
    println!("  min grad-norm^2 estimate {:e}", s.min_grad_norm_sq);
    print_report(&result.report);
    if let Some(p) = &config.output_path {
        println!("wrote {}", p.display());
    }
    if result.report.all_pass() {
        Ok(())
    } else {
        Err(failed("run diagnostics", &result.report))
    }
}

fn cmd_sweep(
    cfg: &ConfigArgs,
    axis: &str,
    values: &[String],
    workers: Option<usize>,
    common: &Common,
) -> Result<()> {
    let map = cfg.load(common)?;
    let dir = common.out.clone().unwrap_or_else(|| common.out_dir.join("sweep"));
    let result = sweep(&map, axis, values, workers, Some(&dir))?;
    println!("{:<16} {:>14} {:>10} {:>14}  diagnostics", axis, "final_loss", "accuracy", "min_grad_sq");
    for i in result.ranking() {
        let r = &result.runs[i];
        let s = &r.result.summary;
        let acc = s.final_accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
        let pass = if r.result.report.all_pass() { "ok" } else { "FAIL" };
        println!("{:<16} {:>14.6e} {:>10} {:>14.6e}  {pass}", r.value, s.final_loss, acc, s.min_grad_norm_sq);
    }
    println!("wrote {}", dir.join("summary.csv").display());
    if result.all_pass() {
        Ok(())
    } else {
        Err(Error::InvalidArgument("sweep: some runs failed their diagnostics".into()))
    }
}

fn cmd_norm_sim(
    betas: &[f64],
    power: f64,
    jitter: f64,
    eta: f64,
    theta0_norm_sq: f64,
    common: &Common,
) -> Result<()> {
    if !(0.0..1.0).contains(&jitter) {
        return Err(Error::InvalidArgument(format!("jitter must lie in [0,1), got {jitter}")));
    }
    let steps = common.steps.unwrap_or(100_000) as usize;
    let mut rng = seeded_rng(common.seed.unwrap_or(0));
    let norms: Vec<f64> = (1..=steps)
        .map(|t| {
            let j = if jitter > 0.0 { rng.random_range(1.0 - jitter..=1.0 + jitter) } else { 1.0 };
            j * (t as f64).powf(-power)
        })
        .collect();
    let path = out_path(common, "norm_sim.csv");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    out.write_record(["beta", "t", "norm_sq_gd", "norm_sq_gdm", "ratio"])?;
    let mut report = DiagnosticsReport::default();
    for &beta in betas {
        let trace = simulate_norm_growth(&norms, beta, eta, theta0_norm_sq)?;
        for tr in &trace {
            out.write_record([
                format!("{beta:e}"),
                (tr.t + 1).to_string(),
                format!("{:e}", tr.norm_sq_gd),
                format!("{:e}", tr.norm_sq_gdm),
                format!("{:e}", tr.ratio),
            ])?;
        }
        let last = trace.last().map_or(f64::NAN, |t| t.ratio);
        let limit = norm_growth_limit(beta);
        let rel = (last - limit).abs() / limit;
        println!("beta {beta}: ratio {last:.6} limit {limit:.6} relative gap {rel:.3e}");
        report.push(format!("ratio_gap_beta_{beta}"), rel, rel < 0.01);
    }
    out.flush()?;
    println!("wrote {}", path.display());
    if report.all_pass() {
        Ok(())
    } else {
        Err(failed("norm growth", &report))
    }
}

fn cmd_check(telemetry: &Path, common: &Common) -> Result<()> {
    let mut tel = read_telemetry(File::open(telemetry)?)?;
    if let Some(n) = common.steps {
        tel.rows.truncate(n as usize);
    }
    let conv_path = sibling(telemetry, "convergence");
    let convergence = if conv_path.exists() {
        Some(read_convergence(File::open(&conv_path)?)?)
    } else {
        None
    };
    let report = check_telemetry(&tel, convergence.as_ref());
    println!("{} rows, groups: {}", tel.rows.len(), tel.group_names.join(", "));
    print_report(&report);
    if let Some(path) = &common.out {
        write_report(&report, path)?;
    }
    if report.all_pass() {
        Ok(())
    } else {
        Err(failed("telemetry check", &report))
    }
}

fn cmd_grad_check(cfg: &ConfigArgs, h: f64, common: &Common) -> Result<()> {
    // --steps counts points here, not training steps
    let config = cfg.load(&Common { steps: None, ..common.clone() })?.resolve()?;
    let obj = config.objective.build()?;
    let points = common.steps.unwrap_or(20) as usize;
    let tol = config.objective.kind.gradient_tolerance();
    let errors = gradient_check(obj.as_ref(), points, h, &mut seeded_rng(config.seed))?;
    let mut report = DiagnosticsReport::default();
    for (i, e) in errors.iter().enumerate() {
        report.push(format!("point_{i}"), *e, *e < tol);
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    println!("{}: {points} points, worst relative error {worst:.3e} (tolerance {tol:e})", obj.name());
    if let Some(path) = &common.out {
        write_report(&report, path)?;
    }
    if report.all_pass() {
        Ok(())
    } else {
        Err(failed("gradient check", &report))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { cfg, common } => cmd_run(cfg, common),
        Command::Sweep { cfg, axis, values, workers, common } => {
            cmd_sweep(cfg, axis, values, *workers, common)
        }
        Command::NormSim { beta, power, jitter, eta, theta0_norm_sq, common } => {
            cmd_norm_sim(beta, *power, *jitter, *eta, *theta0_norm_sq, common)
        }
        Command::Check { telemetry, common } => cmd_check(telemetry, common),
        Command::GradCheck { cfg, h, common } => cmd_grad_check(cfg, *h, common),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
