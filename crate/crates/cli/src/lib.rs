//! Command-line driver for scoring, estimation, auctions, simulations and
//! audit-log verification.

pub mod commands;
pub mod config;
pub mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::ValueFn;
use mia_core::canonical::to_canonical_string;
use mia_core::mechanism::Mechanism;
use mia_core::strategy::Suite;
use mia_core::utility::EstimatorSpec;

#[derive(Debug, Parser)]
#[command(name = "mia", version, about = "Truthful data-procurement mechanisms with auditable oracles")]
pub struct Cli {
    /// Hash-chained log that every command appends to.
    #[arg(long, global = true, default_value = "audit.jsonl")]
    pub audit_log: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MechanismArg {
    Qmia,
    Mut,
    Mixed,
    Dst,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Qmia => Mechanism::Qmia,
            MechanismArg::Mut => Mechanism::Mut,
            MechanismArg::Mixed => Mechanism::Mixed,
            MechanismArg::Dst => Mechanism::Dst,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SuiteArg {
    Dsic,
    Ir,
    Collusion,
    Rho,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Dsic => Suite::Dsic,
            SuiteArg::Ir => Suite::Ir,
            SuiteArg::Collusion => Suite::Collusion,
            SuiteArg::Rho => Suite::Rho,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    Loo,
    Sampled,
    Influence,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every dataset in a corpus with the quality oracle.
    Score {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Reference documents for novelty, one per line.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate each agent's marginal utility.
    Estimate {
        /// JSONL of {"agent_id", "examples": [{"features", "label"}]}.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        holdout: PathBuf,
        /// Public seed examples included in every coalition.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "influence")]
        estimator: EstimatorArg,
        #[arg(long, value_enum, default_value = "logistic")]
        value_fn: ValueFn,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        damping: f64,
        #[arg(long, default_value_t = 1e-8)]
        solver_tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
        /// Solve with the explicit Hessian instead of conjugate gradients.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a mechanism over reports, quality scores and estimates.
    Auction {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mechanism: MechanismArg,
        #[arg(long)]
        strict_budget: bool,
        /// Outcome JSON; the payments CSV is written beside it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a strategic-behavior suite over seeded instances.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the verdict table and summary.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute an audit log's digest chain.
    AuditVerify {
        log: PathBuf,
        /// Also require the chain to end at this digest.
        #[arg(long)]
        expect_head: Option<String>,
    },
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let audit_log = cli.audit_log.as_path();
    match cli.command {
        Command::Score { corpus, config, reference, out } => {
            let reports = commands::score(commands::ScoreArgs {
                corpus: &corpus,
                config: config.as_deref(),
                reference: reference.as_deref(),
                out: &out,
                audit_log,
            })?;
            println!("scored {} agents -> {}", reports.len(), out.display());
            Ok(true)
        }
        Command::Estimate {
            data,
            holdout,
            base,
            estimator,
            value_fn,
            samples,
            seed,
            damping,
            solver_tol,
            max_iters,
            exact,
            out,
        } => {
            let spec = match estimator {
                EstimatorArg::Loo => EstimatorSpec::Loo,
                EstimatorArg::Sampled => EstimatorSpec::Sampled { num_samples: samples, seed },
                EstimatorArg::Influence => EstimatorSpec::Influence { damping, solver_tol, max_iters, exact },
            };
            let estimates = commands::estimate_cmd(commands::EstimateArgs {
                data: &data,
                holdout: &holdout,
                base: base.as_deref(),
                value_fn,
                spec,
                out: &out,
                audit_log,
            })?;
            println!("estimated {} agents -> {}", estimates.len(), out.display());
            Ok(true)
        }
        Command::Auction { reports, scores, estimates, config, mechanism, strict_budget, out } => {
            commands::auction(commands::AuctionArgs {
                reports: &reports,
                scores: &scores,
                estimates: &estimates,
                config: config.as_deref(),
                mechanism: mechanism.into(),
                strict_budget,
                out: &out,
                audit_log,
            })?;
            println!("outcome -> {}, payments -> {}", out.display(), commands::csv_path(&out).display());
            Ok(true)
        }
        Command::Simulate { config, suite, seed, out } => {
            let summary = commands::simulate(commands::SimulateArgs {
                config: config.as_deref(),
                suite: suite.into(),
                seed,
                out: &out,
                audit_log,
            })?;
            println!("{}", to_canonical_string(&summary)?);
            Ok(summary.violations == 0)
        }
        Command::AuditVerify { log, expect_head } => {
            let (v, ok) = commands::audit_verify(&log, expect_head.as_deref())?;
            println!("{}", to_canonical_string(&v)?);
            if let Some(b) = &v.first_break {
                eprintln!("chain broken at sequence {}: {}", b.sequence, b.reason);
            } else if !ok {
                eprintln!("chain head {} does not match the expected digest", v.head_digest);
            }
            Ok(ok)
        }
    }
}

/// Exit status: 0 on success, 1 when a check fails or input is invalid,
/// 2 on usage errors.
pub fn run(cli: Cli) -> ExitCode {
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
