//! Marginal-utility estimation over a pluggable value function.

mod estimators;
mod value;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use estimators::{
    attribution_loo, conjugate_gradient, draw_coalition, exact_marginal, influence_marginal,
    marginal_gain_loo, sampled_marginal, Attribution, CoalitionValue, InfluenceEstimates,
    LinearSolve, SampledMarginals, Solver,
};
pub use value::{
    feature_dim, Differentiable, Example, LogisticRegression, RidgeRegression, ValueFunction,
};

use crate::error::{Error, Result};
use crate::model::AgentId;

/// Lower bound on a rescaled estimate, keeping virtual costs finite.
pub const PHI_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentData {
    pub agent_id: AgentId,
    pub examples: Vec<Example>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Loo,
    Sampled,
    Influence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate {
    pub agent_id: AgentId,
    pub raw: f64,
    pub rescaled: f64,
    pub estimator: EstimatorKind,
    pub samples_used: u64,
    pub seed: u64,
}

/// Min-max rescale to `[0, 1]` with a floor of [`PHI_FLOOR`]. A constant
/// population maps to 1.
pub fn rescale_population(raw: &BTreeMap<AgentId, f64>) -> Result<BTreeMap<AgentId, f64>> {
    if let Some((id, _)) = raw.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::data(format!("non-finite estimate for agent {id}")));
    }
    let lo = raw.values().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.values().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(raw
        .iter()
        .map(|(id, v)| {
            let unit = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
            (id.clone(), unit.clamp(PHI_FLOOR, 1.0))
        })
        .collect())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mean_rank = (start + end - 1) as f64 / 2.0 + 1.0;
        for &k in &order[start..end] {
            out[k] = mean_rank;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `NaN` when either
/// side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs equal lengths");
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - mean) * (y - mean)).sum();
    let var_a: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    let var_b: f64 = rb.iter().map(|y| (y - mean).powi(2)).sum();
    cov / (var_a * var_b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Loo,
    Sampled {
        num_samples: usize,
        seed: u64,
    },
    Influence {
        damping: f64,
        solver_tol: f64,
        max_iters: usize,
        #[serde(default)]
        exact: bool,
    },
}

impl EstimatorSpec {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorSpec::Loo => EstimatorKind::Loo,
            EstimatorSpec::Sampled { .. } => EstimatorKind::Sampled,
            EstimatorSpec::Influence { .. } => EstimatorKind::Influence,
        }
    }
}

/// Reproducibility trail for one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateAudit {
    pub spec: EstimatorSpec,
    pub agents: Vec<AgentId>,
    pub sample_digest: Option<String>,
    pub solver_residual: Option<f64>,
    pub solver_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRun {
    pub estimates: Vec<MarginalEstimate>,
    pub audit: EstimateAudit,
}

/// Runs one estimator and rescales its output across the population.
pub fn estimate<V: Differentiable>(problem: &Attribution<V>, spec: EstimatorSpec) -> Result<EstimateRun> {
    let ids: Vec<AgentId> = problem.agents().iter().map(|a| a.agent_id.clone()).collect();
    let mut audit = EstimateAudit {
        spec,
        agents: ids.clone(),
        sample_digest: None,
        solver_residual: None,
        solver_iterations: None,
    };
    let (raw, samples, seed) = match spec {
        EstimatorSpec::Loo => (attribution_loo(problem)?, 1, 0),
        EstimatorSpec::Sampled { num_samples, seed } => {
            let s = sampled_marginal(problem, num_samples, seed)?;
            audit.sample_digest = Some(s.sample_digest);
            (s.values, num_samples as u64, seed)
        }
        EstimatorSpec::Influence {
            damping,
            solver_tol,
            max_iters,
            exact,
        } => {
            let solver = if exact {
                Solver::Exact
            } else {
                Solver::ConjugateGradient { max_iters }
            };
            let s = influence_marginal(problem, damping, solver_tol, solver)?;
            audit.solver_residual = Some(s.residual);
            audit.solver_iterations = Some(s.iterations);
            (s.values, 0, 0)
        }
    };
    let raw_map: BTreeMap<AgentId, f64> = ids.iter().cloned().zip(raw).collect();
    let rescaled = rescale_population(&raw_map)?;
    let estimates = ids
        .iter()
        .map(|id| MarginalEstimate {
            agent_id: id.clone(),
            raw: raw_map[id],
            rescaled: rescaled[id],
            estimator: spec.kind(),
            samples_used: samples,
            seed,
        })
        .collect();
    Ok(EstimateRun { estimates, audit })
}

/// Seeded linear-regression attribution instance: a shared ground-truth
/// line, agents with different label-noise levels, and a clean holdout.
pub fn regression_instance(
    seed: u64,
    agents: usize,
    points_per_agent: usize,
    dim: usize,
) -> (Vec<AgentData>, Vec<Example>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..=dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let truth = |x: &[f64]| x.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() + weights[dim];
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let point = |rng: &mut ChaCha8Rng, sigma: f64| {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = truth(&x) + sigma * unit.sample(rng);
        Example::new(x, y)
    };
    let data = (0..agents)
        .map(|i| {
            let sigma = rng.gen_range(0.05..2.0);
            AgentData {
                agent_id: format!("a{i:02}"),
                examples: (0..points_per_agent).map(|_| point(&mut rng, sigma)).collect(),
            }
        })
        .collect();
    let holdout = (0..20).map(|_| point(&mut rng, 0.05)).collect();
    (data, holdout)
}
