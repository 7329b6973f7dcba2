//! Subcommand implementations. Every function returns `Result<(), CliError>`
//! where the error carries the process exit code: 2 for validation
//! failures, 3 for I/O failures, 4 for numeric failures.

use crate::config::{AnnotatorMode, RunConfig};
use hyperscene_core::enrich::{enrich, Annotator, ReplayTransport};
use hyperscene_core::export::{assemble_prompt, export_xml, knowledge_of};
use hyperscene_core::graph_io::{self, GraphIoError};
use hyperscene_core::hypergraph::build_hypergraph;
use hyperscene_core::plan::{parse_golds, parse_plan, MetricReport, SymbolicEnv};
use hyperscene_core::scene::{load_scene, SceneError, TaskSpec};
use hyperscene_core::template::TemplateError;
use hyperscene_core::triview::{grad_check, save_params, train, TraceRow, TrainError};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Exit codes: 0 ok, 2 validation, 3 I/O, 4 numeric failure.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            exit_code: 2,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            exit_code: 3,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self {
            exit_code: 4,
            message: message.into(),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(err: SceneError) -> Self {
        match err {
            SceneError::Io(_) => Self::io(err.to_string()),
            _ => Self::validation(err.to_string()),
        }
    }
}

impl From<GraphIoError> for CliError {
    fn from(err: GraphIoError) -> Self {
        match err {
            GraphIoError::Io(_) => Self::io(err.to_string()),
            GraphIoError::Malformed(_) => Self::validation(err.to_string()),
        }
    }
}

impl From<TemplateError> for CliError {
    fn from(err: TemplateError) -> Self {
        Self::validation(err.to_string())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// Derive an output path from the input: strip `strip` (or the final
/// extension) and append `suffix`.
pub fn derive_output(input: &Path, strip: &str, suffix: &str) -> PathBuf {
    let name = input.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let base = name
        .strip_suffix(strip)
        .map(str::to_string)
        .unwrap_or_else(|| {
            input
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("out")
                .to_string()
        });
    input.with_file_name(format!("{base}{suffix}"))
}

fn annotator_from(config: &RunConfig) -> Result<Annotator, CliError> {
    match config.annotator_mode {
        AnnotatorMode::Fallback => Ok(Annotator::fallback()),
        AnnotatorMode::Remote => Ok(Annotator::remote(
            config.endpoint.clone().expect("validated by resolve"),
        )),
        AnnotatorMode::Replay => {
            let path = config.transcript.clone().expect("validated by resolve");
            let transport = ReplayTransport::from_path(&path).map_err(|e| {
                CliError::io(format!("cannot open transcript {}: {e}", path.display()))
            })?;
            Ok(Annotator::replay(transport))
        }
    }
}

/// `build`: detections -> clustered, enriched hypergraph JSON.
pub fn cmd_build(scene_path: &Path, out: &Path, config: &RunConfig) -> Result<(), CliError> {
    let scene = load_scene(scene_path)?;
    let graph = build_hypergraph(&scene, &config.clustering)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let annotator = annotator_from(config)?;
    let enriched = enrich(&graph, &annotator);
    write_file(out, &graph_io::to_json(&enriched))?;
    println!(
        "built {}: {} nodes, {} areas -> {}",
        enriched.base.scene_id,
        enriched.base.node_count(),
        enriched.base.edge_count(),
        out.display()
    );
    Ok(())
}

fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,node_loss,area_loss,membership_loss,total_loss\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.step, row.node, row.area, row.membership, row.total
        ));
    }
    out
}

/// `train`: enriched hypergraph -> trained parameters + loss trace CSV.
pub fn cmd_train(
    graph_path: &Path,
    params_out: &Path,
    trace_out: &Path,
    config: &RunConfig,
) -> Result<(), CliError> {
    let graph = graph_io::load_graph(graph_path)?;
    let outcome = train(&graph, &config.triview).map_err(|e| match e {
        TrainError::NonFiniteLoss { .. } => CliError::numeric(e.to_string()),
        TrainError::TooFewNodes(_) => CliError::validation(e.to_string()),
    })?;
    save_params(&outcome.params, &config.triview, params_out)
        .map_err(|e| CliError::io(e.to_string()))?;
    write_file(trace_out, &trace_csv(&outcome.trace))?;
    match outcome.trace.last() {
        Some(last) => println!(
            "trained {} steps: node={} area={} membership={} total={}",
            outcome.trace.len(),
            last.node,
            last.area,
            last.membership,
            last.total
        ),
        None => println!("trained 0 steps"),
    }
    Ok(())
}

/// `export`: enriched hypergraph -> canonical XML + assembled prompt.
pub fn cmd_export(
    graph_path: &Path,
    template_id: &str,
    xml_out: &Path,
    prompt_out: &Path,
    cf_threshold: f64,
) -> Result<(), CliError> {
    let graph = graph_io::load_graph(graph_path)?;
    let xml = export_xml(&graph);
    write_file(xml_out, &xml)?;
    let knowledge = knowledge_of(&graph, cf_threshold);
    let task = graph.base.task.clone().unwrap_or_else(TaskSpec::default);
    let prompt = assemble_prompt(&task, &knowledge, template_id)?;
    write_file(prompt_out, &prompt.rendered())?;
    println!(
        "exported {} ({} areas, {} flagged) -> {}, {}",
        knowledge.scene_id,
        knowledge.areas.len(),
        knowledge.flags.len(),
        xml_out.display(),
        prompt_out.display()
    );
    Ok(())
}

fn ids_in(dir: &Path, suffix: &str) -> Result<BTreeSet<String>, CliError> {
    let mut ids = BTreeSet::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(e.to_string()))?;
        if let Some(name) = entry.file_name().to_str() {
            if let Some(id) = name.strip_suffix(suffix) {
                ids.insert(id.to_string());
            }
        }
    }
    Ok(ids)
}

/// `eval`: score a corpus of `{id}.plan.json` against `{id}.env.json`
/// and `{id}.gold.json`, producing a CSV report.
pub fn cmd_eval(
    plans_dir: &Path,
    envs_dir: &Path,
    golds_dir: &Path,
    report_out: &Path,
    workers: usize,
) -> Result<(), CliError> {
    let plan_ids = ids_in(plans_dir, ".plan.json")?;
    let env_ids = ids_in(envs_dir, ".env.json")?;
    let gold_ids = ids_in(golds_dir, ".gold.json")?;
    for id in plan_ids.union(&env_ids).chain(gold_ids.difference(&plan_ids)) {
        if !(plan_ids.contains(id) && env_ids.contains(id) && gold_ids.contains(id)) {
            return Err(CliError::validation(format!(
                "sample {id} is missing a plan, environment, or gold file"
            )));
        }
    }

    let load_sample = |id: &String| -> Result<(String, MetricReport), CliError> {
        let read = |path: PathBuf| {
            std::fs::read_to_string(&path)
                .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
        };
        let env_text = read(envs_dir.join(format!("{id}.env.json")))?;
        let env = SymbolicEnv::from_json(&env_text)
            .map_err(|e| CliError::validation(format!("sample {id}: {e}")))?;
        let plan_text = read(plans_dir.join(format!("{id}.plan.json")))?;
        let plan = parse_plan(&plan_text)
            .map_err(|e| CliError::validation(format!("sample {id}: {e}")))?;
        let gold_text = read(golds_dir.join(format!("{id}.gold.json")))?;
        let golds = parse_golds(&gold_text)
            .map_err(|e| CliError::validation(format!("sample {id}: {e}")))?;
        Ok((id.clone(), MetricReport::evaluate(&env, &plan, &golds)))
    };

    let ids: Vec<String> = plan_ids.into_iter().collect();
    let mut results: Vec<(String, MetricReport)> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::io(e.to_string()))?;
        pool.install(|| ids.par_iter().map(load_sample).collect::<Result<Vec<_>, _>>())?
    } else {
        ids.iter().map(load_sample).collect::<Result<Vec<_>, _>>()?
    };
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let mut csv = String::from("sample,exec,lcs,correct\n");
    for (id, report) in &results {
        csv.push_str(&format!(
            "{id},{},{},{}\n",
            report.executability, report.lcs, report.correct
        ));
    }
    if !results.is_empty() {
        let reports: Vec<MetricReport> = results.iter().map(|(_, r)| *r).collect();
        let corpus = hyperscene_core::plan::CorpusReport::from_reports(&reports);
        csv.push_str(&format!(
            "aggregate,{},{},{}\n",
            corpus.mean_executability, corpus.mean_lcs, corpus.fraction_correct
        ));
        println!(
            "evaluated {} samples: exec={} lcs={} correct={}",
            corpus.samples, corpus.mean_executability, corpus.mean_lcs, corpus.fraction_correct
        );
    } else {
        println!("evaluated 0 samples");
    }
    write_file(report_out, &csv)?;
    Ok(())
}

/// `grad-check`: finite-difference verification of the training gradients.
pub fn cmd_grad_check(trials: usize, config: &RunConfig) -> Result<(), CliError> {
    let report = grad_check(&config.triview, trials);
    println!(
        "checked {} parameters over {} trials: max relative error {:e}",
        report.params_checked,
        report.per_trial.len(),
        report.max_rel_err
    );
    if report.max_rel_err >= 1e-5 {
        return Err(CliError::numeric(format!(
            "gradient check failed: max relative error {:e} >= 1e-5",
            report.max_rel_err
        )));
    }
    Ok(())
}
