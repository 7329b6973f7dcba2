//! The three planning metrics: executability, LCS similarity, and task
//! correctness.
//!
//! Executability is the executed prefix length over the plan length
//! (empty plans score 0). LCS similarity is the classic dynamic program
//! over exact verb+argument matches (case-insensitive identifiers),
//! normalized by the longer sequence; two empty sequences score 1, and
//! with several gold references the maximum wins. Correctness is the
//! conjunction of the goal predicates over the final state.

use super::{execute, predicate_holds, Action, Predicate, SymbolicEnv};

/// Metric scores for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub executability: f64,
    pub lcs: f64,
    pub correct: bool,
}

impl MetricReport {
    /// Score one sample end to end against its environment and gold plans.
    pub fn evaluate(env: &SymbolicEnv, plan: &[Action], golds: &[Vec<Action>]) -> Self {
        let (final_env, prefix) = execute(env, plan);
        let _ = prefix;
        Self {
            executability: executability(plan, env),
            lcs: lcs_score_multi(plan, golds),
            correct: correctness(&final_env, &env.goal),
        }
    }
}

/// Aggregates over a corpus of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusReport {
    pub samples: usize,
    pub mean_executability: f64,
    pub mean_lcs: f64,
    /// Fraction of samples whose final state satisfies the goal.
    pub fraction_correct: f64,
}

impl CorpusReport {
    pub fn from_reports(reports: &[MetricReport]) -> Self {
        let n = reports.len();
        if n == 0 {
            return Self {
                samples: 0,
                mean_executability: 0.0,
                mean_lcs: 0.0,
                fraction_correct: 0.0,
            };
        }
        let count = n as f64;
        Self {
            samples: n,
            mean_executability: reports.iter().map(|r| r.executability).sum::<f64>() / count,
            mean_lcs: reports.iter().map(|r| r.lcs).sum::<f64>() / count,
            fraction_correct: reports.iter().filter(|r| r.correct).count() as f64 / count,
        }
    }
}

/// Fraction of the plan that executes before the first failure.
pub fn executability(plan: &[Action], env: &SymbolicEnv) -> f64 {
    if plan.is_empty() {
        return 0.0;
    }
    let (_, prefix) = execute(env, plan);
    prefix as f64 / plan.len() as f64
}

/// Length of the longest common subsequence of two action sequences.
fn lcs_length(generated: &[Action], gold: &[Action]) -> usize {
    let (m, n) = (generated.len(), gold.len());
    let mut table = vec![vec![0usize; n + 1]; m + 1];
    for i in 1..=m {
        for j in 1..=n {
            table[i][j] = if generated[i - 1].matches(&gold[j - 1]) {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table[m][n]
}

/// LCS similarity normalized by the longer sequence; both empty scores 1.
pub fn lcs_score(generated: &[Action], gold: &[Action]) -> f64 {
    let longest = generated.len().max(gold.len());
    if longest == 0 {
        return 1.0;
    }
    lcs_length(generated, gold) as f64 / longest as f64
}

/// Maximum LCS similarity over several gold references. No references
/// score 0.
pub fn lcs_score_multi(generated: &[Action], golds: &[Vec<Action>]) -> f64 {
    golds
        .iter()
        .map(|gold| lcs_score(generated, gold))
        .fold(0.0, f64::max)
}

/// Do all goal predicates hold in the final state? An empty goal list is
/// vacuously true; predicates over unknown objects are false.
pub fn correctness(final_env: &SymbolicEnv, goal: &[Predicate]) -> bool {
    goal.iter().all(|p| predicate_holds(final_env, p))
}
