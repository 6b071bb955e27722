//! `nhssb`: Monte Carlo, exact sums, mean field and analysis for the
//! non-reciprocal fermion–Ising chain.

mod commands;
mod config;
mod error;
mod output;
mod render;
mod svg;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nhssb_core::mc::Start;
use nhssb_core::Boundary;

use crate::commands::Ctx;
use crate::config::JobConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "nhssb", version, about = "Non-reciprocal fermions on an Ising bond chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file, or the manifest.json of an earlier job.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (output file for `render`). Default `out/<command>`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Print the execution plan and exit without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Worker threads; defaults to all cores. Overrides `workers` in the config.
    #[arg(long, global = true, env = "NHSSB_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long, conflicts_with = "temperature")]
    beta: Option<f64>,
    #[arg(long = "T")]
    temperature: Option<f64>,
    #[arg(long = "U", allow_hyphen_values = true)]
    u: Option<f64>,
    #[arg(long = "U-im", allow_hyphen_values = true)]
    u_im: Option<f64>,
    #[arg(long = "J", allow_hyphen_values = true)]
    j: Option<f64>,
    #[arg(long = "t", allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long = "t-prime", allow_hyphen_values = true)]
    t_prime: Option<f64>,
    /// PBC or OBC.
    #[arg(long, value_parser = parse_bc)]
    bc: Option<Boundary>,
    /// Grid axis `name=start:stop:count` (inclusive) or `name=value`;
    /// several axes give their cartesian product. Axes: beta, T, U, U_im,
    /// J, L, t_prime.
    #[arg(long, num_args = 1..)]
    grid: Vec<String>,
}

#[derive(Args, Debug, Default)]
struct McArgs {
    /// Base seed; grid point `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    therm: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    measure_every: Option<usize>,
    /// Dense eigensolves for every proposal, even when `t' = 0`.
    #[arg(long)]
    slow_path: bool,
    /// hot or cold.
    #[arg(long, value_parser = parse_start)]
    start: Option<Start>,
    /// Write every measured record to raw/.
    #[arg(long)]
    raw_dump: bool,
    #[arg(long)]
    hist_bins: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Metropolis sampling over the bond field.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Exact thermodynamics: class sums at t' = 0 (PBC), enumeration for L ≤ 16.
    Exact {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Self-consistent mean-field solutions.
    Meanfield {
        #[command(flatten)]
        model: ModelArgs,
        /// Momentum grid size (overrides L).
        #[arg(long)]
        mf_l: Option<usize>,
    },
    /// Order-parameter map over a U × T grid plus the mean-field boundary.
    PhaseScan {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        mf_l: Option<usize>,
    },
    /// Ground-state domain-wall energies.
    Domainwall {
        #[command(flatten)]
        model: ModelArgs,
        /// fixed_L, fixed_r or fixed_alpha.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        ls: Option<Vec<usize>>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        r_min: Option<usize>,
        #[arg(long)]
        r_max: Option<usize>,
    },
    /// Winding plateaus and specific-heat scaling from earlier mc or exact jobs.
    Analyze {
        /// Job directories containing summary.csv or exact.csv.
        #[arg(long, required_unless_present = "config")]
        input: Vec<PathBuf>,
    },
    /// Oracle suite on small systems; exits 4 if any invariant fails.
    Validate {
        /// Largest system size checked.
        #[arg(long, default_value_t = validate::DEFAULT_MAX_L)]
        max_l: usize,
    },
    /// SVG plot of a CSV produced by another command.
    Render {
        #[command(flatten)]
        plot: render::PlotArgs,
    },
}

fn parse_bc(s: &str) -> Result<Boundary, String> {
    match s.to_ascii_uppercase().as_str() {
        "PBC" => Ok(Boundary::Pbc),
        "OBC" => Ok(Boundary::Obc),
        _ => Err(format!("`{s}` is not PBC or OBC")),
    }
}

fn parse_start(s: &str) -> Result<Start, String> {
    match s {
        "hot" => Ok(Start::Hot),
        "cold" => Ok(Start::Cold),
        _ => Err(format!("`{s}` is not hot or cold")),
    }
}

impl ModelArgs {
    fn config(self) -> JobConfig {
        JobConfig {
            l: self.l,
            beta: self.beta,
            temperature: self.temperature,
            u: self.u,
            u_im: self.u_im,
            j: self.j,
            t: self.t,
            t_prime: self.t_prime,
            bc: self.bc,
            grid: (!self.grid.is_empty()).then_some(self.grid),
            ..Default::default()
        }
    }
}

impl McArgs {
    fn over(self, cfg: JobConfig) -> JobConfig {
        JobConfig {
            seed: self.seed,
            n_sweeps: self.sweeps,
            n_therm: self.therm,
            n_chains: self.chains,
            measure_every: self.measure_every,
            fast_path: self.slow_path.then_some(false),
            start: self.start,
            raw_dump: self.raw_dump.then_some(true),
            hist_bins: self.hist_bins,
            ..cfg
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mc { .. } => "mc",
            Command::Exact { .. } => "exact",
            Command::Meanfield { .. } => "meanfield",
            Command::PhaseScan { .. } => "phase-scan",
            Command::Domainwall { .. } => "domainwall",
            Command::Analyze { .. } => "analyze",
            Command::Validate { .. } => "validate",
            Command::Render { .. } => "render",
        }
    }
}

fn run(cli: Cli, file: JobConfig, ctx: &Ctx) -> Result<(), CliError> {
    match cli.command {
        Command::Mc { model, mc } => commands::mc(mc.over(model.config()).over(file), ctx),
        Command::Exact { model } => commands::exact(model.config().over(file), ctx),
        Command::Meanfield { model, mf_l } => {
            commands::meanfield(JobConfig { mf_l, ..model.config() }.over(file), ctx)
        }
        Command::PhaseScan { model, mc, mf_l } => {
            commands::phase_scan(JobConfig { mf_l, ..mc.over(model.config()) }.over(file), ctx)
        }
        Command::Domainwall { model, mode, r, ls, alpha, r_min, r_max } => {
            let cfg = JobConfig { mode, r, ls, alpha, r_min, r_max, ..model.config() };
            commands::domainwall(cfg.over(file), ctx)
        }
        Command::Analyze { input } => {
            let cfg = JobConfig { input: (!input.is_empty()).then_some(input), ..Default::default() };
            commands::analyze(cfg.over(file), ctx)
        }
        Command::Validate { max_l } => validate::validate(max_l, ctx),
        Command::Render { plot } => render::render(plot, cli.common.out.as_deref(), cli.common.dry_run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.common.config.as_deref().map(JobConfig::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Some(n) = cli.common.workers.or(file.workers) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let name = cli.command.name();
    let ctx = Ctx {
        out: cli.common.out.clone().unwrap_or_else(|| PathBuf::from("out").join(name)),
        dry_run: cli.common.dry_run,
    };
    match run(cli, file, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Numerical { message, diagnostic } = &e {
                if !ctx.dry_run && std::fs::create_dir_all(&ctx.out).is_ok() {
                    let body = serde_json::json!({ "command": name, "message": message, "diagnostic": diagnostic });
                    let path = ctx.out.join("failure.json");
                    let text = serde_json::to_string_pretty(&body).unwrap_or_default() + "\n";
                    if let Err(w) = std::fs::write(&path, text) {
                        eprintln!("error: cannot write {}: {w}", path.display());
                    }
                }
            }
            e.exit_code()
        }
    }
}
