//! Run configuration: profile presets, optional TOML file, CLI flags.
//!
//! Precedence, lowest to highest: profile preset ("desk" unless chosen
//! otherwise), values from the config file, explicit CLI flags. The
//! `HYPERSCENE_ANNOTATOR_ENDPOINT` environment variable overrides the
//! annotator endpoint from any source.
//!
//! File format (TOML, all sections and keys optional):
//!
//! ```toml
//! profile = "desk"            # or "paper"
//!
//! [clustering]
//! epsilon = 76.8              # absolute pixels; wins over epsilon_scale
//! epsilon_scale = 0.12        # relative to max(image_width, image_height)
//! min_pts = 2
//!
//! [triview]
//! tau_n = 0.07
//! steps = 200
//! seed = 42
//!
//! [triview.optimizer]
//! learning_rate = 1e-3
//!
//! [annotator]
//! mode = "fallback"           # fallback | replay | remote
//! endpoint = "http://127.0.0.1:8700"
//! transcript = "replies.jsonl"
//! ```

use hyperscene_core::hypergraph::{ClusteringSettings, EpsilonSpec};
use hyperscene_core::triview::TriViewConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const ENDPOINT_ENV_VAR: &str = "HYPERSCENE_ANNOTATOR_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnnotatorMode {
    Fallback,
    Replay,
    Remote,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub clustering: ClusteringSettings,
    pub triview: TriViewConfig,
    pub annotator_mode: AnnotatorMode,
    pub endpoint: Option<String>,
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    profile: Option<String>,
    clustering: Option<FileClustering>,
    triview: Option<FileTriview>,
    annotator: Option<FileAnnotator>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileClustering {
    epsilon: Option<f64>,
    epsilon_scale: Option<f64>,
    min_pts: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTriview {
    tau_n: Option<f64>,
    tau_g: Option<f64>,
    tau_m: Option<f64>,
    alpha_g: Option<f64>,
    alpha_m: Option<f64>,
    mask_prob_text: Option<f64>,
    mask_prob_incidence: Option<f64>,
    d: Option<usize>,
    d_p: Option<usize>,
    seed: Option<u64>,
    steps: Option<usize>,
    normalize_by_memberships: Option<bool>,
    optimizer: Option<FileOptimizer>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOptimizer {
    learning_rate: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    eps_stability: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAnnotator {
    mode: Option<String>,
    endpoint: Option<String>,
    transcript: Option<PathBuf>,
}

/// CLI flag values that feed the config resolution; `None` means the
/// flag was not given.
#[derive(Debug, Default, Clone)]
pub struct ConfigFlags {
    pub profile: Option<Profile>,
    pub epsilon: Option<f64>,
    pub epsilon_scale: Option<f64>,
    pub min_pts: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
    pub annotator: Option<AnnotatorMode>,
    pub endpoint: Option<String>,
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(std::io::Error),
    #[error("malformed config file: {0}")]
    Malformed(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Resolve the final configuration from an optional file and the flags.
pub fn resolve(
    config_path: Option<&Path>,
    flags: &ConfigFlags,
) -> Result<RunConfig, ConfigError> {
    let file: FileConfig = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
            toml::from_str(&text).map_err(|e| ConfigError::Malformed(e.to_string()))?
        }
        None => FileConfig::default(),
    };

    let profile = match flags.profile {
        Some(p) => p,
        None => match file.profile.as_deref() {
            Some("paper") => Profile::Paper,
            Some("desk") | None => Profile::Desk,
            Some(other) => {
                return Err(ConfigError::Invalid(format!("unknown profile {other}")))
            }
        },
    };

    let mut triview = match profile {
        Profile::Desk => TriViewConfig::desk(),
        Profile::Paper => TriViewConfig::paper(),
    };
    let mut clustering = ClusteringSettings::default();
    let mut annotator_mode = AnnotatorMode::Fallback;
    let mut endpoint = None;
    let mut transcript = None;

    if let Some(section) = &file.clustering {
        if let Some(scale) = section.epsilon_scale {
            clustering.epsilon = EpsilonSpec::Relative(scale);
        }
        if let Some(epsilon) = section.epsilon {
            clustering.epsilon = EpsilonSpec::Absolute(epsilon);
        }
        if let Some(min_pts) = section.min_pts {
            clustering.min_pts = min_pts;
        }
    }
    if let Some(section) = &file.triview {
        apply_file_triview(&mut triview, section);
    }
    if let Some(section) = &file.annotator {
        match section.mode.as_deref() {
            Some("fallback") | None => {}
            Some("replay") => annotator_mode = AnnotatorMode::Replay,
            Some("remote") => annotator_mode = AnnotatorMode::Remote,
            Some(other) => {
                return Err(ConfigError::Invalid(format!("unknown annotator mode {other}")))
            }
        }
        endpoint = section.endpoint.clone().or(endpoint);
        transcript = section.transcript.clone().or(transcript);
    }

    // Explicit flags win over everything from the file.
    if let Some(scale) = flags.epsilon_scale {
        clustering.epsilon = EpsilonSpec::Relative(scale);
    }
    if let Some(epsilon) = flags.epsilon {
        clustering.epsilon = EpsilonSpec::Absolute(epsilon);
    }
    if let Some(min_pts) = flags.min_pts {
        clustering.min_pts = min_pts;
    }
    if let Some(steps) = flags.steps {
        triview.steps = steps;
    }
    if let Some(seed) = flags.seed {
        triview.seed = seed;
    }
    if let Some(lr) = flags.learning_rate {
        triview.optimizer.learning_rate = lr;
    }
    if let Some(mode) = flags.annotator {
        annotator_mode = mode;
    }
    if let Some(value) = &flags.endpoint {
        endpoint = Some(value.clone());
    }
    if let Some(path) = &flags.transcript {
        transcript = Some(path.clone());
    }
    if let Ok(value) = std::env::var(ENDPOINT_ENV_VAR) {
        if !value.is_empty() {
            endpoint = Some(value);
        }
    }

    triview
        .validate()
        .map_err(ConfigError::Invalid)?;
    if clustering.min_pts == 0 {
        return Err(ConfigError::Invalid("min_pts must be at least 1".to_string()));
    }
    match clustering.epsilon {
        EpsilonSpec::Absolute(e) | EpsilonSpec::Relative(e) if !(e > 0.0) => {
            return Err(ConfigError::Invalid("epsilon must be positive".to_string()))
        }
        _ => {}
    }
    if annotator_mode == AnnotatorMode::Replay && transcript.is_none() {
        return Err(ConfigError::Invalid(
            "replay annotator mode needs a transcript path".to_string(),
        ));
    }
    if annotator_mode == AnnotatorMode::Remote && endpoint.is_none() {
        return Err(ConfigError::Invalid(
            "remote annotator mode needs an endpoint".to_string(),
        ));
    }

    Ok(RunConfig {
        clustering,
        triview,
        annotator_mode,
        endpoint,
        transcript,
    })
}

fn apply_file_triview(config: &mut TriViewConfig, file: &FileTriview) {
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(value) = file.$field { config.$field = value; })*
        };
    }
    take!(
        tau_n,
        tau_g,
        tau_m,
        alpha_g,
        alpha_m,
        mask_prob_text,
        mask_prob_incidence,
        d,
        d_p,
        seed,
        steps,
        normalize_by_memberships
    );
    if let Some(optimizer) = &file.optimizer {
        if let Some(v) = optimizer.learning_rate {
            config.optimizer.learning_rate = v;
        }
        if let Some(v) = optimizer.beta1 {
            config.optimizer.beta1 = v;
        }
        if let Some(v) = optimizer.beta2 {
            config.optimizer.beta2 = v;
        }
        if let Some(v) = optimizer.eps_stability {
            config.optimizer.eps_stability = v;
        }
    }
}
