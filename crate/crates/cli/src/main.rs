use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use strip_lab::config::{ExperimentConfig, ExperimentKind, KindList};
use strip_lab::plot::{emit_plot, PlotKind};
use strip_lab::{run, CliError, CliResult, RunOptions};
use strip_lab_core::oracle::{
    flat_kernel, flat_survival, killed_halfline_kernel, transverse_modes, SeriesOptions,
};
use strip_lab_core::Region;

#[derive(Parser)]
#[command(name = "strip-lab", version, about = "Heat flow, spectra and killed diffusions on curved strips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments named in a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; all cores by default.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the acceptance suite (criteria from the config, all by default).
    Report {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate closed-form flat-strip quantities.
    Oracle {
        #[command(subcommand)]
        query: OracleQuery,
    },
    /// Draw an SVG from a CSV written by `run`.
    Plot {
        csv: PathBuf,
        /// decay-loglog, nu-vs-s or histogram
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleQuery {
    /// Transverse energies and mode values at x2.
    Modes {
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        x2: f64,
    },
    /// Flat-strip heat kernel s0(x, y, t).
    Kernel {
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        y: Vec<f64>,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        a: f64,
    },
    /// Half-line kernel killed at the origin, p0(t, x, y).
    Halfline {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
    /// Survival probability P(X_t in B, tau > t) on the flat strip.
    Survival {
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        x0: Vec<f64>,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        a: f64,
        /// x1_lo x1_hi x2_lo x2_hi; the whole strip when absent
        #[arg(long = "box", num_args = 4, allow_negative_numbers = true)]
        region: Option<Vec<f64>>,
    },
}

fn oracle(q: OracleQuery) -> CliResult<()> {
    let opts = SeriesOptions::default();
    match q {
        OracleQuery::Modes { a, n, x2 } => {
            println!("n,energy,mode_at_x2");
            for m in transverse_modes(a, n.max(1)) {
                println!("{},{:e},{:e}", m.index, m.energy, m.eval(x2));
            }
        }
        OracleQuery::Kernel { x, y, t, a } => {
            let v = flat_kernel([x[0], x[1]], [y[0], y[1]], t, a, &opts)?;
            println!("value = {:e}\ntail_bound = {:e}\nterms = {}", v.value, v.tail_bound, v.n_terms);
        }
        OracleQuery::Halfline { t, x, y } => {
            if !(t > 0.0 && x > 0.0 && y > 0.0) {
                return Err(CliError::ConfigInvalid("halfline needs t, x, y > 0".into()));
            }
            println!("value = {:e}", killed_halfline_kernel(t, x, y));
        }
        OracleQuery::Survival { x0, t, a, region } => {
            let region = match region {
                None => Region::Whole,
                Some(b) => Region::rect((b[0], b[1]), (b[2], b[3])),
            };
            let v = flat_survival([x0[0], x0[1]], region, t, a, &opts)?;
            println!("value = {:e}\ntail_bound = {:e}\nterms = {}", v.value, v.tail_bound, v.n_terms);
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, out, seed, jobs } => {
            if let Some(n) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build_global()
                    .map_err(|e| CliError::ConfigInvalid(format!("--jobs: {e}")))?;
            }
            let cfg = ExperimentConfig::load(&config)?;
            let m = run(cfg, &RunOptions { out, seed })?;
            eprintln!("wrote {}", m.out_dir.join("manifest.txt").display());
        }
        Command::Report { config, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.experiment.kind = KindList::One(ExperimentKind::Report);
            let m = run(cfg, &RunOptions { out, seed: None })?;
            eprintln!("all selected criteria passed; see {}", m.out_dir.display());
        }
        Command::Oracle { query } => oracle(query)?,
        Command::Plot { csv, kind, out } => {
            let kind: PlotKind = kind.parse()?;
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            emit_plot(&csv, kind, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("strip-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
