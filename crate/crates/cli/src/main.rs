use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use unlearn_audit::gnn::Backbone;
use unlearn_audit::graph::GraphFormat;
use unlearn_audit::runner::{
    emit_report, run_plan, DatasetSpec, ExperimentPlan, ModelSettings, ReportFormat, ReportStatus,
};
use unlearn_audit::unlearning::{MethodArgs, Registry};
use unlearn_audit::Error;

const EXIT_PARTIAL: u8 = 1;
const EXIT_INVALID_PLAN: u8 = 2;

#[derive(Parser)]
#[command(
    name = "unlearn-audit",
    version,
    about = "Explanation-based checks of node unlearning in GNNs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a backbone × method × seed grid and write the report.
    Verify(VerifyArgs),
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Dataset directory or file, or `sbm:blocks=100/100,p_in=0.1,p_out=0.01,d=16,seed=7`.
    #[arg(long)]
    dataset: String,

    /// On-disk layout of a file dataset.
    #[arg(long, default_value = "edge-list")]
    format: GraphFormat,

    #[arg(long, value_delimiter = ',', default_value = "gcn,gat")]
    backbone: Vec<Backbone>,

    #[arg(
        long,
        value_delimiter = ',',
        default_value = "retrain,local-finetune,noop"
    )]
    method: Vec<String>,

    #[arg(long, value_delimiter = ',', default_value = "1001,1002,1003")]
    seeds: Vec<u64>,

    #[arg(long, default_value_t = 0.05)]
    forget_frac: f64,

    /// Hop radius of the proxy graphs.
    #[arg(long, default_value_t = 2)]
    k: usize,

    #[arg(long)]
    out: PathBuf,

    /// Strategy hyperparameter `key=value`; repeatable.
    #[arg(long = "method-arg")]
    method_arg: Vec<String>,

    /// Accept graphs above the size gate.
    #[arg(long)]
    allow_large: bool,

    /// Write pre/post parameter checkpoints into each cell directory.
    #[arg(long)]
    save_params: bool,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long)]
    hidden: Option<usize>,

    #[arg(long)]
    lr: Option<f64>,

    #[arg(long)]
    dropout: Option<f64>,

    /// Surrogate tree depth.
    #[arg(long, default_value_t = 3)]
    tree_depth: usize,
}

fn build_plan(a: &VerifyArgs) -> Result<ExperimentPlan, Error> {
    let defaults = ModelSettings::default();
    let mut plan = ExperimentPlan::new(DatasetSpec::parse(&a.dataset, a.format)?, &a.out);
    plan.backbones = a.backbone.clone();
    plan.methods = a.method.clone();
    plan.seeds = a.seeds.clone();
    plan.forget_frac = a.forget_frac;
    plan.k = a.k;
    plan.tree_depth = a.tree_depth;
    plan.method_args = MethodArgs::parse(a.method_arg.iter().map(String::as_str))?;
    plan.allow_large = a.allow_large;
    plan.save_params = a.save_params;
    plan.model = ModelSettings {
        hidden: a.hidden.unwrap_or(defaults.hidden),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        lr: a.lr.unwrap_or(defaults.lr),
        dropout: a.dropout.unwrap_or(defaults.dropout),
    };
    Ok(plan)
}

fn verify(a: VerifyArgs) -> anyhow::Result<ExitCode> {
    let registry = Registry::default();
    let plan = match build_plan(&a).and_then(|p| p.validate(&registry).map(|_| p)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_INVALID_PLAN));
        }
    };
    let report = match run_plan(&plan, &registry) {
        Ok(r) => r,
        // Only plan validation and dataset loading fail the whole run.
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_INVALID_PLAN));
        }
    };
    emit_report(
        &report,
        &plan.out,
        &[ReportFormat::Records, ReportFormat::Table],
    )
    .context("writing report")?;
    print!("{}", unlearn_audit::runner::metrics_table(&report));
    for c in report.failed_cells() {
        eprintln!(
            "failed: {}/{}/{}: {}",
            c.backbone,
            c.method,
            c.seed,
            c.error.as_deref().unwrap_or("")
        );
    }
    Ok(match report.status() {
        ReportStatus::Complete => ExitCode::SUCCESS,
        ReportStatus::Partial => ExitCode::from(EXIT_PARTIAL),
        ReportStatus::AllFailed => {
            eprintln!("error: every cell failed");
            ExitCode::from(EXIT_PARTIAL)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
