//! Central finite-difference verification of the analytic gradients.
//!
//! Each trial builds a random small instance (N <= 6, K <= 4, d <= 8),
//! evaluates the analytic gradient of the total loss for every head and
//! discriminator parameter, and compares it against the central
//! difference `(L(p + h) - L(p - h)) / 2h` with `h = 1e-6`.
//!
//! The reported relative error is `|a - n| / max(|a|, |n|, 1e-3)`; the
//! floor guards entries where both gradients vanish and the quotient
//! would only amplify finite-difference roundoff.

use super::loss::{forward_backward, BatchInputs};
use super::model::ModelParams;
use super::TriViewConfig;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
const REL_ERR_FLOOR: f64 = 1e-3;

/// Outcome of a gradient check run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error of each trial.
    pub per_trial: Vec<f64>,
    /// Maximum relative error over all trials and parameters.
    pub max_rel_err: f64,
    /// Total number of parameters compared.
    pub params_checked: usize,
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = 2.0 * rng.random::<f64>() - 1.0;
    }
    m
}

/// Random incidence with at least one 1 per row.
fn random_incidence(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<u8> {
    let mut h = Array2::zeros((n, k));
    for i in 0..n {
        let forced = rng.random_range(0..k);
        h[(i, forced)] = 1;
        for j in 0..k {
            if j != forced && rng.random::<f64>() < 0.3 {
                h[(i, j)] = 1;
            }
        }
    }
    h
}

fn random_params(d: usize, d_p: usize, rng: &mut ChaCha8Rng) -> ModelParams {
    let mut params = ModelParams::zeros(d, d_p);
    for slot in params.flat_mut() {
        *slot = 0.6 * (2.0 * rng.random::<f64>() - 1.0);
    }
    params
}

/// Verify analytic gradients against central finite differences on
/// `trials` random small instances. Temperatures, loss weights, and the
/// membership normalization switch come from `config`; dimensions are
/// fixed small so the check stays well inside a second per trial.
pub fn grad_check(config: &TriViewConfig, trials: usize) -> GradCheckReport {
    grad_check_with_step(config, trials, DEFAULT_FD_STEP)
}

/// [`grad_check`] with an explicit finite-difference step.
pub fn grad_check_with_step(config: &TriViewConfig, trials: usize, h: f64) -> GradCheckReport {
    let mut per_trial = Vec::with_capacity(trials);
    let mut max_rel_err = 0.0_f64;
    let mut params_checked = 0;

    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1 + trial as u64));
        let n = rng.random_range(2..=6);
        let k = rng.random_range(1..=4);
        let d = rng.random_range(3..=8);
        let d_p = rng.random_range(2..=6);
        let small = TriViewConfig {
            d,
            d_p,
            ..config.clone()
        };

        let node_embed_1 = random_matrix(n, d, &mut rng);
        let node_embed_2 = random_matrix(n, d, &mut rng);
        let edge_embed_1 = random_matrix(k, d, &mut rng);
        let edge_embed_2 = random_matrix(k, d, &mut rng);
        let incidence_1 = random_incidence(n, k, &mut rng);
        let incidence_2 = random_incidence(n, k, &mut rng);
        let mut params = random_params(d, d_p, &mut rng);

        let inputs = BatchInputs {
            node_embed_1: &node_embed_1,
            node_embed_2: &node_embed_2,
            edge_embed_1: &edge_embed_1,
            edge_embed_2: &edge_embed_2,
            incidence_1: &incidence_1,
            incidence_2: &incidence_2,
        };

        let (_, grads) = forward_backward(&inputs, &params, &small, true);
        let analytic: Vec<f64> = grads.expect("gradients requested").flat().copied().collect();

        let mut trial_worst = 0.0_f64;
        let count = params.param_count();
        for idx in 0..count {
            let original = *params.flat_mut().nth(idx).expect("index in range");
            *params.flat_mut().nth(idx).expect("index in range") = original + h;
            let (plus, _) = forward_backward(&inputs, &params, &small, false);
            *params.flat_mut().nth(idx).expect("index in range") = original - h;
            let (minus, _) = forward_backward(&inputs, &params, &small, false);
            *params.flat_mut().nth(idx).expect("index in range") = original;

            let numeric = (plus.total - minus.total) / (2.0 * h);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            trial_worst = trial_worst.max(rel);
        }
        params_checked += count;
        per_trial.push(trial_worst);
        max_rel_err = max_rel_err.max(trial_worst);
    }

    GradCheckReport {
        per_trial,
        max_rel_err,
        params_checked,
    }
}
