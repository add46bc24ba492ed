use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nclmat_core::filter::to_db;
use nclmat_core::harness::{
    moment_report, preset, run_experiment, sweep, theory_overlay, write_experiment, ExperimentConfig, Summary,
    SweepGrid,
};
use nclmat_core::signals::{NoiseFamily, Seed};
use nclmat_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "nclmat", version, about = "NCLMAT adaptive filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file (or a preset) and write CSV + JSON results.
    Run(RunArgs),
    /// Run the preset for a figure, 1..=9.
    Figure {
        /// Figure number.
        id: Option<u32>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Cartesian sweep over step-size and constraint parameters.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated α values (μ for LMAT entries).
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        beta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
    },
    /// Print stability bounds and steady-state predictions.
    Theory(RunArgs),
    /// Compare empirical noise moments with their reference values.
    Moments {
        #[arg(long, default_value = "gaussian")]
        family: String,
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    figure: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "NCLMAT_OUT", default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Scale trials and iterations down by 10x.
    #[arg(long)]
    quick: bool,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let cfg = match (&self.config, self.figure) {
            (Some(path), None) => ExperimentConfig::from_file(path)?,
            (None, Some(id)) => preset(id)?,
            (Some(_), Some(_)) => return Err(Error::Usage("give either --config or --figure, not both".into())),
            (None, None) => return Err(Error::Usage("missing --config or --figure".into())),
        };
        let cfg = if self.quick { cfg.quick() } else { cfg };
        cfg.with_overrides(self.trials, self.iters, self.seed)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6e}"))
}

fn fmt_db(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.2} dB"))
}

fn print_summary(s: &Summary) {
    println!(
        "{} ({} trials, {} iterations, seed {})",
        s.name, s.trials, s.iterations, s.seed
    );
    println!("  {:<24} {:>14} {:>10}", "algorithm", "steady MSD", "diverged");
    for c in &s.curves {
        let msd = if c.valid {
            format!("{:.2} dB", c.steady_msd_db)
        } else {
            "invalid".into()
        };
        println!("  {:<24} {:>14} {:>7}/{}", c.label, msd, c.diverged_trials, c.trials);
    }
    if let Some(t) = &s.theory {
        println!(
            "  theory ({}): fixed point {}, closed form {}",
            t.label,
            fmt_db(t.steady_msd_db_fixed_point),
            fmt_db(t.steady_msd_db_closed_form)
        );
        if let Some(k) = t.model_diverged_at {
            println!("  theory model diverged at iteration {k}");
        }
    }
}

fn any_all_diverged(s: &Summary) -> Option<String> {
    s.curves.iter().find(|c| !c.valid).map(|c| c.label.clone())
}

fn run_and_write(cfg: &ExperimentConfig, out: &Path) -> Result<Summary, Error> {
    let exp = run_experiment(cfg)?;
    let summary = write_experiment(&exp, out)?;
    print_summary(&summary);
    eprintln!("wrote {}", out.join(format!("{}.csv", cfg.name)).display());
    match any_all_diverged(&summary) {
        Some(label) => Err(Error::AllTrialsDiverged(label)),
        None => Ok(summary),
    }
}

fn cmd_theory(cfg: &ExperimentConfig) -> Result<(), Error> {
    let o = theory_overlay(cfg)?;
    let tp = o.params;
    println!(
        "{} / {}: N={} alpha={} beta={} gamma={} J_min={:.6e}",
        cfg.name, o.label, tp.n_taps, tp.alpha, tp.beta, tp.gamma, tp.j_min
    );
    println!(
        "  sigma_x^2={:.6e} sigma_xi^2={:.6e} E[xi^4]={:.6e} rho_max={:.6e}",
        tp.sigma_x2, tp.sigma_xi2, tp.xi4, tp.rho_max
    );
    let rows = [
        (
            format!("mean stability bound (k={})", cfg.iterations),
            fmt_opt(o.mean_bound),
        ),
        (
            "mean-square stability bound".into(),
            fmt_opt(o.bounds.ms_stability_bound),
        ),
        ("optimal alpha".into(), fmt_opt(o.bounds.optimal_alpha)),
        (
            "steady-state MSD (fixed point)".into(),
            fmt_db(o.fixed_point.map(|s| to_db(s.msd))),
        ),
        (
            "steady-state MSD (closed form)".into(),
            fmt_db(o.closed_form.map(|s| to_db(s.msd))),
        ),
        ("steady-state MSE".into(), fmt_opt(o.fixed_point.map(|s| s.mse))),
        (
            format!("model MSD at k={}", cfg.iterations),
            fmt_db(o.msd.last().map(|&m| to_db(m)).filter(|v| !v.is_nan())),
        ),
    ];
    for (name, value) in rows {
        println!("  {name:<34} {value}");
    }
    if let Some(k) = o.diverged_at {
        println!("  model diverged at iteration {k}");
    }
    Ok(())
}

fn cmd_moments(family: &str, variance: f64, n: usize, seed: u64) -> Result<(), Error> {
    let family = NoiseFamily::parse(family).ok_or_else(|| Error::Usage(format!("unknown noise family `{family}`")))?;
    let r = moment_report(family, variance, n, Seed(seed))?;
    println!("{} noise, variance {}, {} samples", r.family, r.variance, r.samples);
    println!(
        "  {:<28} {:>12} {:>12} {:>9}",
        "quantity", "empirical", "reference", "rel.err"
    );
    let row = |name: &str, emp: f64, reference: f64| {
        let err = if reference == 0.0 {
            (emp - reference).abs()
        } else {
            ((emp - reference) / reference).abs()
        };
        println!("  {name:<28} {emp:>12.5} {reference:>12.5} {:>8.2}%", 100.0 * err);
    };
    println!("  {:<28} {:>12.5} {:>12.5}", "mean", r.mean, 0.0);
    row("variance", r.sample_variance, r.variance);
    row("E[xi^4]/s^4 raw vs table", r.raw_fourth_ratio, r.table_fourth_ratio);
    row("E[xi^4]/s^4 centered", r.fourth_ratio, r.centered_fourth_ratio_analytic);
    row("E[xi^4]/s^4 centered vs table", r.fourth_ratio, r.table_fourth_ratio);
    row("E|xi|^3/s^3 centered", r.abs_third_ratio, r.abs_third_ratio_analytic);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            run_and_write(&cfg, &args.out).map(|_| ())
        }
        Command::Figure { id, mut run } => {
            if let Some(id) = id {
                if run.figure.is_some_and(|f| f != id) {
                    return Err(Error::Usage("conflicting figure ids".into()));
                }
                run.figure = Some(id);
            }
            if run.config.is_some() {
                return Err(Error::Usage("`figure` takes a figure id, not --config".into()));
            }
            let cfg = run.load()?;
            run_and_write(&cfg, &run.out).map(|_| ())
        }
        Command::Sweep {
            run,
            alpha,
            beta,
            gamma,
        } => {
            let cfg = run.load()?;
            let grid = SweepGrid { alpha, beta, gamma };
            if grid.alpha.is_empty() && grid.beta.is_empty() && grid.gamma.is_empty() {
                return Err(Error::Usage("empty grid: give --alpha, --beta and/or --gamma".into()));
            }
            let points = sweep(&cfg, &grid)?;
            let dir = run.out.join(format!("{}_sweep", cfg.name));
            println!("{:>4}  {:<28} {:>14}", "rank", "point", "steady MSD");
            for (rank, p) in points.iter().enumerate() {
                let mut exp = p.experiment.clone();
                exp.config.name = p.tag();
                write_experiment(&exp, &dir)?;
                let score = p.score();
                let shown = if score.is_finite() {
                    format!("{:.2} dB", to_db(score))
                } else {
                    "invalid".into()
                };
                println!("{:>4}  {:<28} {:>14}", rank + 1, p.tag(), shown);
            }
            eprintln!("wrote {}", dir.display());
            Ok(())
        }
        Command::Theory(args) => cmd_theory(&args.load()?),
        Command::Moments {
            family,
            variance,
            n,
            seed,
        } => cmd_moments(&family, variance, n, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(EXIT_CONFIG)
            } else if matches!(e, Error::AllTrialsDiverged(_)) {
                ExitCode::from(EXIT_DIVERGED)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
