//! `hyperscene`: detections to hypergraph knowledge and plan metrics.
//!
//! Subcommands: `build`, `train`, `export`, `eval`, `grad-check`.
//! Exit codes: 0 success, 2 validation failure, 3 I/O failure,
//! 4 numeric failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{cmd_build, cmd_eval, cmd_export, cmd_grad_check, cmd_train, derive_output};
use config::{AnnotatorMode, ConfigFlags, Profile};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "hyperscene",
    version,
    about = "Scene detections -> spatial hypergraph -> contrastive embeddings -> knowledge export, plus plan metrics"
)]
struct Cli {
    /// TOML config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset: desk (small, fast) or paper (full-scale dims).
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the enriched hypergraph for one detection file.
    Build {
        /// Scene detection JSON.
        scene: PathBuf,
        /// Output graph JSON (default: `<scene>.graph.json`).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Absolute DBSCAN radius in pixels.
        #[arg(long)]
        epsilon: Option<f64>,
        /// DBSCAN radius as a fraction of max(image width, height).
        #[arg(long)]
        epsilon_scale: Option<f64>,
        /// DBSCAN core-point threshold.
        #[arg(long)]
        min_pts: Option<usize>,
        /// Annotation source.
        #[arg(long, value_enum)]
        annotator: Option<AnnotatorMode>,
        /// Remote annotator endpoint (also via HYPERSCENE_ANNOTATOR_ENDPOINT).
        #[arg(long)]
        endpoint: Option<String>,
        /// Replay transcript path (JSON lines).
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Train the tri-view encoder heads on a built graph.
    Train {
        /// Enriched hypergraph JSON from `build`.
        graph: PathBuf,
        /// Output parameter container (default: `<graph>.params.bin`).
        #[arg(long)]
        params_out: Option<PathBuf>,
        /// Output loss trace CSV (default: `<graph>.trace.csv`).
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Number of optimization steps.
        #[arg(long)]
        steps: Option<usize>,
        /// RNG seed for masking and initialization.
        #[arg(long)]
        seed: Option<u64>,
        /// Adam learning rate.
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Export hypergraph knowledge XML and an assembled prompt.
    Export {
        /// Enriched hypergraph JSON from `build`.
        graph: PathBuf,
        /// Prompt template id (`xml` or `narrative`).
        #[arg(long, default_value = "xml")]
        template: String,
        /// Output XML path (default: `<graph>.graph.xml`).
        #[arg(long)]
        xml_out: Option<PathBuf>,
        /// Output prompt path (default: `<graph>.prompt.txt`).
        #[arg(long)]
        prompt_out: Option<PathBuf>,
        /// Counterfactual flag threshold.
        #[arg(long, default_value_t = 0.5)]
        cf_threshold: f64,
    },
    /// Score generated plans against environments and gold plans.
    Eval {
        /// Directory of `{id}.plan.json` files.
        #[arg(long)]
        plans: PathBuf,
        /// Directory of `{id}.env.json` files.
        #[arg(long)]
        envs: PathBuf,
        /// Directory of `{id}.gold.json` files.
        #[arg(long)]
        golds: PathBuf,
        /// Output report CSV (default: `report.csv` in the plans dir).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Worker threads for sample evaluation.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Verify training gradients against finite differences.
    GradCheck {
        /// Number of random instances.
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = run(cli);
    if let Err(err) = result {
        eprintln!("error: {}", err.message);
        std::process::exit(err.exit_code);
    }
}

fn run(cli: Cli) -> Result<(), commands::CliError> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Build {
            scene,
            out,
            epsilon,
            epsilon_scale,
            min_pts,
            annotator,
            endpoint,
            transcript,
        } => {
            let flags = ConfigFlags {
                profile: cli.profile,
                epsilon,
                epsilon_scale,
                min_pts,
                annotator,
                endpoint,
                transcript,
                ..ConfigFlags::default()
            };
            let config = config::resolve(config_path, &flags).map_err(config_error)?;
            let out = out.unwrap_or_else(|| derive_output(&scene, ".json", ".graph.json"));
            cmd_build(&scene, &out, &config)
        }
        Command::Train {
            graph,
            params_out,
            trace_out,
            steps,
            seed,
            learning_rate,
        } => {
            let flags = ConfigFlags {
                profile: cli.profile,
                steps,
                seed,
                learning_rate,
                ..ConfigFlags::default()
            };
            let config = config::resolve(config_path, &flags).map_err(config_error)?;
            let params_out =
                params_out.unwrap_or_else(|| derive_output(&graph, ".graph.json", ".params.bin"));
            let trace_out =
                trace_out.unwrap_or_else(|| derive_output(&graph, ".graph.json", ".trace.csv"));
            cmd_train(&graph, &params_out, &trace_out, &config)
        }
        Command::Export {
            graph,
            template,
            xml_out,
            prompt_out,
            cf_threshold,
        } => {
            let xml_out =
                xml_out.unwrap_or_else(|| derive_output(&graph, ".graph.json", ".graph.xml"));
            let prompt_out =
                prompt_out.unwrap_or_else(|| derive_output(&graph, ".graph.json", ".prompt.txt"));
            cmd_export(&graph, &template, &xml_out, &prompt_out, cf_threshold)
        }
        Command::Eval {
            plans,
            envs,
            golds,
            out,
            workers,
        } => {
            let out = out.unwrap_or_else(|| plans.join("report.csv"));
            cmd_eval(&plans, &envs, &golds, &out, workers.max(1))
        }
        Command::GradCheck { trials, seed } => {
            let flags = ConfigFlags {
                profile: cli.profile,
                seed,
                ..ConfigFlags::default()
            };
            let config = config::resolve(config_path, &flags).map_err(config_error)?;
            cmd_grad_check(trials, &config)
        }
    }
}

fn config_error(err: config::ConfigError) -> commands::CliError {
    let exit_code = match err {
        config::ConfigError::Io(_) => 3,
        _ => 2,
    };
    commands::CliError {
        exit_code,
        message: err.to_string(),
    }
}
