//! `rwld`: command-line front-end for the rough-noise stochastic wave
//! equation toolkit. Subcommands sample noise panels, run the stochastic
//! and skeleton solvers, minimize the large-deviation rate function,
//! sweep Monte Carlo tail probabilities, and verify the toolkit against
//! its own identities. Every compute run leaves a replayable manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod config;
mod manifest;
mod run;
mod verify;

use config::{load_config_file, CliError, ConfigDoc};

#[derive(Parser)]
#[command(name = "rwld", version, about = "Rough-noise stochastic wave equation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Parameters every compute subcommand understands. Precedence: flags
/// beat the `--config` JSON file, which beats built-in defaults; the
/// RWLD_SEED environment variable beats every seed source.
#[derive(Args)]
struct CommonArgs {
    /// Hurst index in (1/4, 1/2); required (flag or config file)
    #[arg(long = "H")]
    hurst: Option<f64>,
    /// Domain half-width: space is [-L, L]
    #[arg(long = "L")]
    l: Option<f64>,
    /// Spatial cells (nodes are nx + 1)
    #[arg(long)]
    nx: Option<usize>,
    /// Time horizon
    #[arg(long = "T")]
    t: Option<f64>,
    /// Time steps
    #[arg(long)]
    nt: Option<usize>,
    /// Base seed for noise sampling
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling method: cholesky | circulant
    #[arg(long)]
    method: Option<String>,
    /// JSON config file; a run manifest works too (its resolved_config
    /// is used)
    #[arg(long)]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn doc(&self) -> ConfigDoc {
        ConfigDoc {
            hurst: self.hurst,
            l: self.l,
            nx: self.nx,
            t: self.t,
            nt: self.nt,
            seed: self.seed,
            method: self.method.clone(),
            ..ConfigDoc::default()
        }
    }

    /// Flag document overlaid on the config file, if one was given.
    fn merged(&self, extra: ConfigDoc) -> Result<(ConfigDoc, Option<PathBuf>), CliError> {
        let flags = extra.overlaid_on(self.doc());
        let merged = match &self.config {
            Some(path) => flags.overlaid_on(load_config_file(path)?),
            None => flags,
        };
        Ok((merged, self.config.clone()))
    }
}

#[derive(Args)]
struct SigmaDataArgs {
    /// Diffusion coefficient: linear[:C] | damped[:C]
    #[arg(long)]
    sigma: Option<String>,
    /// Initial displacement: zero | bump | table:FILE
    #[arg(long)]
    u0: Option<String>,
    /// Initial velocity: zero | bump | table:FILE
    #[arg(long)]
    v0: Option<String>,
    /// Declared Hölder exponent of the initial data, in (0, 1]
    #[arg(long)]
    alpha: Option<f64>,
}

impl SigmaDataArgs {
    fn fill(&self, doc: &mut ConfigDoc) {
        doc.sigma = self.sigma.clone();
        doc.u0 = self.u0.clone();
        doc.v0 = self.v0.clone();
        doc.alpha = self.alpha;
    }
}

#[derive(Args)]
struct EventArgs {
    /// Terminal-point event location x* (a grid node)
    #[arg(long = "x-star")]
    x_star: Option<f64>,
    /// Event threshold a: the event is {functional >= a}
    #[arg(long)]
    level: Option<f64>,
    /// Switch to a sup event over these node indices (comma-separated)
    #[arg(long = "sup-nodes", value_delimiter = ',')]
    sup_nodes: Option<Vec<usize>>,
}

impl EventArgs {
    fn fill(&self, doc: &mut ConfigDoc) {
        doc.x_star = self.x_star;
        doc.level = self.level;
        doc.sup_nodes = self.sup_nodes.clone();
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample one noise increment panel; writes the panel, its spec
    /// JSON, and a manifest
    Noise {
        #[command(flatten)]
        common: CommonArgs,
        /// Replicate index within the seed's stream
        #[arg(long)]
        replicate: Option<u64>,
        /// Output file (RWLD1 binary)
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV dump next to the output
        #[arg(long)]
        csv: bool,
    },
    /// Solve the stochastic wave equation at noise intensity eps
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        physics: SigmaDataArgs,
        /// Noise intensity (eps = 0 reproduces the deterministic I0)
        #[arg(long)]
        eps: Option<f64>,
        /// Replicate index within the seed's stream
        #[arg(long)]
        replicate: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Solve the deterministic skeleton equation by Picard iteration
    Skeleton {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        physics: SigmaDataArgs,
        /// Control: zero | bump-energy:E | FILE
        #[arg(long)]
        g: Option<String>,
        /// Mollification of the drift pairing (0 = rough product)
        #[arg(long = "eps-mollify")]
        eps_mollify: Option<f64>,
        /// Picard stopping tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Picard iteration budget
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Write the iteration distance trace to this file (next to --out)
        #[arg(long = "trace-out")]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Upper-bound the rate function at an event by penalty minimization
    Rate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        physics: SigmaDataArgs,
        #[command(flatten)]
        event: EventArgs,
        /// Coarse control lattice: time coefficients
        #[arg(long = "nc-t")]
        nc_t: Option<usize>,
        /// Coarse control lattice: space coefficients
        #[arg(long = "nc-x")]
        nc_x: Option<usize>,
        /// Initial penalty weight (stage k uses mu0 4^k)
        #[arg(long)]
        mu0: Option<f64>,
        /// Penalty stages
        #[arg(long)]
        stages: Option<usize>,
        /// Descent iterations per stage
        #[arg(long = "iters-per-stage")]
        iters_per_stage: Option<usize>,
        /// Initial descent step
        #[arg(long)]
        step0: Option<f64>,
        /// Finite-difference step for the gradient
        #[arg(long = "fd-step")]
        fd_step: Option<f64>,
        /// Feasibility tolerance on the event functional
        #[arg(long = "constraint-tol")]
        constraint_tol: Option<f64>,
        /// Mollification used inside the optimizer's solves
        #[arg(long = "eps-mollify")]
        eps_mollify: Option<f64>,
        /// Output JSON report; the minimizing control lands next to it
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo tail probabilities along a decreasing eps ladder
    LdpSweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        physics: SigmaDataArgs,
        #[command(flatten)]
        event: EventArgs,
        /// Decreasing eps ladder, comma-separated
        #[arg(long = "eps-ladder", value_delimiter = ',')]
        eps_ladder: Option<Vec<f64>>,
        /// Replicates per rung (>= 1000)
        #[arg(long = "n-samples")]
        n_samples: Option<usize>,
        /// Rate-function energy for the comparison column
        #[arg(long)]
        energy: Option<f64>,
        /// Read the energy from a `rate` output JSON instead
        #[arg(long = "rate-json")]
        rate_json: Option<PathBuf>,
        /// Worker threads (results are identical for any value)
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Run the hermetic property table; exit 1 if any check fails
    Verify {
        /// Reduced Monte Carlo sample counts
        #[arg(long)]
        quick: bool,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Noise {
            common,
            replicate,
            out,
            csv,
        } => {
            let extra = ConfigDoc {
                replicate,
                ..ConfigDoc::default()
            };
            let (doc, config) = common.merged(extra)?;
            run::cmd_noise(doc, config.as_deref(), &out, csv)
        }
        Command::Solve {
            common,
            physics,
            eps,
            replicate,
            out,
            csv,
        } => {
            let mut extra = ConfigDoc {
                eps,
                replicate,
                ..ConfigDoc::default()
            };
            physics.fill(&mut extra);
            let (doc, config) = common.merged(extra)?;
            run::cmd_solve(doc, config.as_deref(), &out, csv)
        }
        Command::Skeleton {
            common,
            physics,
            g,
            eps_mollify,
            tol,
            max_iter,
            trace_out,
            out,
            csv,
        } => {
            let mut extra = ConfigDoc {
                g,
                eps_mollify,
                tol,
                max_iter,
                ..ConfigDoc::default()
            };
            physics.fill(&mut extra);
            let (doc, config) = common.merged(extra)?;
            run::cmd_skeleton(doc, config.as_deref(), &out, csv, trace_out.as_deref())
        }
        Command::Rate {
            common,
            physics,
            event,
            nc_t,
            nc_x,
            mu0,
            stages,
            iters_per_stage,
            step0,
            fd_step,
            constraint_tol,
            eps_mollify,
            out,
        } => {
            let mut extra = ConfigDoc {
                nc_t,
                nc_x,
                mu0,
                stages,
                iters_per_stage,
                step0,
                fd_step,
                constraint_tol,
                eps_mollify,
                ..ConfigDoc::default()
            };
            physics.fill(&mut extra);
            event.fill(&mut extra);
            let (doc, config) = common.merged(extra)?;
            run::cmd_rate(doc, config.as_deref(), &out)
        }
        Command::LdpSweep {
            common,
            physics,
            event,
            eps_ladder,
            n_samples,
            energy,
            rate_json,
            jobs,
            out,
            csv,
        } => {
            let mut extra = ConfigDoc {
                eps_ladder,
                n_samples,
                energy,
                jobs,
                ..ConfigDoc::default()
            };
            physics.fill(&mut extra);
            event.fill(&mut extra);
            let (doc, config) = common.merged(extra)?;
            run::cmd_ldp_sweep(doc, config.as_deref(), &out, csv, rate_json.as_deref())
        }
        Command::Verify { quick } => verify::cmd_verify(quick),
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
