//! Leave-one-out, sampled-subset and influence-function estimators.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::value::{feature_dim, Differentiable, Example, ValueFunction};
use super::AgentData;
use crate::canonical::digest_of;
use crate::error::{Error, Result};

/// A cooperative game over players `0..players()`.
pub trait CoalitionValue: Sync {
    fn players(&self) -> usize;
    /// Value of a coalition given as ascending player indices.
    fn value(&self, coalition: &[usize]) -> Result<f64>;
}

/// Agents' datasets scored by retraining a value function on their union.
#[derive(Debug, Clone)]
pub struct Attribution<'a, V> {
    value_fn: &'a V,
    agents: &'a [AgentData],
    holdout: &'a [Example],
    base: &'a [Example],
    dim: usize,
}

impl<'a, V: ValueFunction> Attribution<'a, V> {
    pub fn new(value_fn: &'a V, agents: &'a [AgentData], holdout: &'a [Example]) -> Result<Self> {
        Self::with_base(value_fn, agents, holdout, &[])
    }

    /// `base` is a public seed set included in every coalition.
    pub fn with_base(
        value_fn: &'a V,
        agents: &'a [AgentData],
        holdout: &'a [Example],
        base: &'a [Example],
    ) -> Result<Self> {
        if agents.len() < 2 {
            return Err(Error::config("attribution needs at least 2 agents"));
        }
        if holdout.is_empty() {
            return Err(Error::config("holdout set is empty"));
        }
        let mut ids: Vec<&str> = agents.iter().map(|a| a.agent_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::data(format!("duplicate agent id {}", w[0])));
        }
        let sets = agents
            .iter()
            .map(|a| a.examples.as_slice())
            .chain([holdout, base]);
        let dim = feature_dim(sets)?.unwrap_or(0);
        Ok(Self {
            value_fn,
            agents,
            holdout,
            base,
            dim,
        })
    }

    pub fn agents(&self) -> &[AgentData] {
        self.agents
    }

    fn union(&self, coalition: &[usize]) -> Vec<Example> {
        let mut data = self.base.to_vec();
        for &i in coalition {
            data.extend_from_slice(&self.agents[i].examples);
        }
        data
    }

    fn train(&self, coalition: &[usize]) -> Result<Vec<f64>> {
        self.value_fn.train(&self.union(coalition), self.dim)
    }
}

impl<V: ValueFunction> CoalitionValue for Attribution<'_, V> {
    fn players(&self) -> usize {
        self.agents.len()
    }

    fn value(&self, coalition: &[usize]) -> Result<f64> {
        let params = self.train(coalition)?;
        Ok(self.value_fn.evaluate(&params, self.holdout))
    }
}

fn without(n: usize, i: usize) -> Vec<usize> {
    (0..n).filter(|&j| j != i).collect()
}

fn in_context(err: Error, agent: Option<&AgentData>, i: usize) -> Error {
    let label = agent.map_or_else(|| format!("player {i}"), |a| format!("agent {}", a.agent_id));
    match err {
        Error::Numeric {
            context: None,
            reason,
            residual,
        } => Error::Numeric {
            context: Some(label),
            reason,
            residual,
        },
        other => other,
    }
}

/// `V(N) − V(N ∖ {i})` for every player.
pub fn marginal_gain_loo<G: CoalitionValue>(game: &G) -> Result<Vec<f64>> {
    let n = game.players();
    let full = game.value(&(0..n).collect::<Vec<_>>())?;
    (0..n)
        .into_par_iter()
        .map(|i| game.value(&without(n, i)).map(|v| full - v))
        .collect()
}

/// [`marginal_gain_loo`] with agent names attached to numeric failures.
pub fn attribution_loo<V: ValueFunction>(problem: &Attribution<V>) -> Result<Vec<f64>> {
    let n = problem.players();
    let full = problem
        .value(&(0..n).collect::<Vec<_>>())
        .map_err(|e| Error::Numeric {
            context: Some("full coalition".into()),
            reason: e.to_string(),
            residual: f64::NAN,
        })?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            problem
                .value(&without(n, i))
                .map(|v| full - v)
                .map_err(|e| in_context(e, Some(&problem.agents[i]), i))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledMarginals {
    pub values: Vec<f64>,
    /// Digest of every drawn coalition, per player, in draw order.
    pub sample_digest: String,
}

/// Draws `T ⊆ N ∖ {i}`: size uniform on `{0, …, n−1}`, then members uniform.
pub fn draw_coalition(rng: &mut ChaCha8Rng, n: usize, i: usize) -> Vec<usize> {
    let others = without(n, i);
    let size = rng.gen_range(0..n);
    let mut t: Vec<usize> = sample(rng, others.len(), size)
        .into_iter()
        .map(|k| others[k])
        .collect();
    t.sort_unstable();
    t
}

fn player_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

fn with_player(t: &[usize], i: usize) -> Vec<usize> {
    let mut s = t.to_vec();
    let pos = s.partition_point(|&x| x < i);
    s.insert(pos, i);
    s
}

/// Monte Carlo average of `V(T ∪ {i}) − V(T)`.
pub fn sampled_marginal<G: CoalitionValue>(
    game: &G,
    num_samples: usize,
    seed: u64,
) -> Result<SampledMarginals> {
    if num_samples == 0 {
        return Err(Error::config("num_samples must be at least 1"));
    }
    let n = game.players();
    let per_player: Vec<(f64, Vec<Vec<usize>>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = player_rng(seed, i);
            let mut total = 0.0;
            let mut drawn = Vec::with_capacity(num_samples);
            for _ in 0..num_samples {
                let t = draw_coalition(&mut rng, n, i);
                total += game.value(&with_player(&t, i))? - game.value(&t)?;
                drawn.push(t);
            }
            Ok((total / num_samples as f64, drawn))
        })
        .collect::<Result<_>>()?;
    let draws: Vec<&Vec<Vec<usize>>> = per_player.iter().map(|(_, d)| d).collect();
    Ok(SampledMarginals {
        sample_digest: digest_of(&draws)?,
        values: per_player.iter().map(|(v, _)| *v).collect(),
    })
}

/// Expectation of the sampled estimator, by enumerating all coalitions.
pub fn exact_marginal<G: CoalitionValue>(game: &G) -> Result<Vec<f64>> {
    let n = game.players();
    if n > 20 {
        return Err(Error::config("exact enumeration is limited to 20 players"));
    }
    let binom = |k: usize| -> f64 {
        (0..k).fold(1.0, |acc, j| acc * (n - 1 - j) as f64 / (j + 1) as f64)
    };
    (0..n)
        .map(|i| {
            let others = without(n, i);
            let mut total = 0.0;
            for mask in 0u32..(1 << others.len()) {
                let t: Vec<usize> = others
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &p)| p)
                    .collect();
                let weight = 1.0 / (n as f64 * binom(t.len()));
                total += weight * (game.value(&with_player(&t, i))? - game.value(&t)?);
            }
            Ok(total)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    ConjugateGradient { max_iters: usize },
    /// Dense Cholesky solve of the explicit Hessian.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` given as a product.
/// Stops once `‖b − A x‖ ≤ tol`.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], tol: f64, max_iters: usize) -> Result<LinearSolve>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..=max_iters {
        if rr.sqrt() <= tol {
            let true_residual: Vec<f64> = apply(&x).iter().zip(b).map(|(ax, b)| b - ax).collect();
            return Ok(LinearSolve {
                residual: norm(&true_residual),
                x,
                iterations: it,
            });
        }
        if it == max_iters {
            break;
        }
        let ap = apply(&p);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::Numeric {
                context: Some("conjugate gradient".into()),
                reason: "operator is not positive definite".into(),
                residual: rr.sqrt(),
            });
        }
        let alpha = rr / curvature;
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for k in 0..p.len() {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_next;
    }
    Err(Error::Numeric {
        context: Some("conjugate gradient".into()),
        reason: format!("no convergence within {max_iters} iterations"),
        residual: rr.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceEstimates {
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// `−g_iᵀ (H + damping·I)⁻¹ ḡ`, with `g_i` the summed loss gradient of
/// agent `i`'s data and `ḡ` the held-out value gradient, both at the
/// parameters trained on every agent.
pub fn influence_marginal<V: Differentiable>(
    problem: &Attribution<V>,
    damping: f64,
    solver_tol: f64,
    solver: Solver,
) -> Result<InfluenceEstimates> {
    if !(damping > 0.0 && damping.is_finite()) {
        return Err(Error::config("damping must be positive"));
    }
    if !(solver_tol > 0.0 && solver_tol.is_finite()) {
        return Err(Error::config("solver_tol must be positive"));
    }
    let n = problem.players();
    let data = problem.union(&(0..n).collect::<Vec<_>>());
    let theta = problem.value_fn.train(&data, problem.dim)?;
    let vf = problem.value_fn;
    let target = vf.value_gradient(&theta, problem.holdout);
    let solve = match solver {
        Solver::ConjugateGradient { max_iters } => conjugate_gradient(
            |v| {
                let mut hv = vf.hessian_vector(&theta, &data, v);
                hv.iter_mut().zip(v).for_each(|(h, x)| *h += damping * x);
                hv
            },
            &target,
            solver_tol,
            max_iters,
        )?,
        Solver::Exact => {
            let p = theta.len();
            let a = vf.hessian(&theta, &data) + DMatrix::<f64>::identity(p, p) * damping;
            let b = DVector::from_column_slice(&target);
            let x = a.clone().cholesky().ok_or_else(|| Error::Numeric {
                context: Some("exact solve".into()),
                reason: "damped Hessian is not positive definite".into(),
                residual: f64::NAN,
            })?;
            let x = x.solve(&b);
            LinearSolve {
                residual: (b - a * &x).norm(),
                x: x.iter().copied().collect(),
                iterations: 0,
            }
        }
    };
    let values = problem
        .agents
        .iter()
        .map(|a| -dot(&vf.loss_gradient(&theta, &a.examples), &solve.x))
        .collect();
    Ok(InfluenceEstimates {
        values,
        residual: solve.residual,
        iterations: solve.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::value::RidgeRegression;
    use proptest::prelude::*;

    struct Additive(Vec<f64>);

    impl CoalitionValue for Additive {
        fn players(&self) -> usize {
            self.0.len()
        }
        fn value(&self, c: &[usize]) -> Result<f64> {
            Ok(c.iter().map(|&i| self.0[i]).sum())
        }
    }

    /// Superadditive game `V(S) = |S|² · w(S)` with per-player weights.
    struct Quadratic(Vec<f64>);

    impl CoalitionValue for Quadratic {
        fn players(&self) -> usize {
            self.0.len()
        }
        fn value(&self, c: &[usize]) -> Result<f64> {
            let w: f64 = c.iter().map(|&i| self.0[i]).sum();
            Ok(w * c.len() as f64)
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = vec![];
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    /// Average marginal contribution over all arrival orders.
    fn shapley_by_orders<G: CoalitionValue>(g: &G) -> Vec<f64> {
        let n = g.players();
        let orders = permutations(n);
        let mut phi = vec![0.0; n];
        for order in &orders {
            for (pos, &i) in order.iter().enumerate() {
                let mut before: Vec<usize> = order[..pos].to_vec();
                before.sort_unstable();
                let mut with = before.clone();
                with.push(i);
                with.sort_unstable();
                phi[i] += g.value(&with).unwrap() - g.value(&before).unwrap();
            }
        }
        phi.iter().map(|p| p / orders.len() as f64).collect()
    }

    #[test]
    fn enumeration_matches_arrival_order_average() {
        for n in 2..=5 {
            let g = Quadratic((0..n).map(|i| 1.0 + i as f64 * 0.7).collect());
            let exact = exact_marginal(&g).unwrap();
            let oracle = shapley_by_orders(&g);
            for (a, b) in exact.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9, "{exact:?} vs {oracle:?}");
            }
        }
    }

    #[test]
    fn three_player_enumeration_by_hand() {
        // Sizes 0,1,1,2 weigh 1/3, 1/6, 1/6, 1/3 for player 0.
        let g = Quadratic(vec![1.0, 2.0, 3.0]);
        let v = |c: &[usize]| g.value(c).unwrap();
        let by_hand = (v(&[0]) - v(&[])) / 3.0
            + (v(&[0, 1]) - v(&[1])) / 6.0
            + (v(&[0, 2]) - v(&[2])) / 6.0
            + (v(&[0, 1, 2]) - v(&[1, 2])) / 3.0;
        assert!((exact_marginal(&g).unwrap()[0] - by_hand).abs() < 1e-12);
    }

    #[test]
    fn sampled_converges_to_enumeration() {
        let g = Quadratic(vec![1.0, 2.0, 3.0, 0.5]);
        let exact = exact_marginal(&g).unwrap();
        let est = sampled_marginal(&g, 40_000, 11).unwrap();
        for (a, b) in est.values.iter().zip(&exact) {
            assert!((a - b).abs() < 0.05 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn coalition_sizes_are_uniform() {
        let mut rng = player_rng(3, 0);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            let t = draw_coalition(&mut rng, 4, 0);
            assert!(!t.contains(&0));
            counts[t.len()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(matches!(
            sampled_marginal(&Additive(vec![1.0, 2.0]), 0, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = Quadratic(vec![1.0, 2.0, 3.0]);
        assert_eq!(sampled_marginal(&g, 50, 9).unwrap(), sampled_marginal(&g, 50, 9).unwrap());
        assert_ne!(
            sampled_marginal(&g, 50, 9).unwrap().sample_digest,
            sampled_marginal(&g, 50, 10).unwrap().sample_digest
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn additive_games_are_exact(
            v in prop::collection::vec(-100.0f64..100.0, 2..8),
            samples in 1usize..30,
            seed in any::<u64>(),
        ) {
            let g = Additive(v.clone());
            let est = sampled_marginal(&g, samples, seed).unwrap();
            let scale = v.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            for (e, x) in est.values.iter().zip(&v) {
                prop_assert!((e - x).abs() <= 8.0 * f64::EPSILON * scale);
            }
        }
    }

    #[test]
    fn cg_matches_dense_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let b = [1.0, -2.0, 0.5];
        let cg = conjugate_gradient(
            |v| (&a * DVector::from_column_slice(v)).iter().copied().collect(),
            &b,
            1e-12,
            50,
        )
        .unwrap();
        let dense = a.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        for (x, y) in cg.x.iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(cg.residual <= 1e-12);
    }

    #[test]
    fn cg_reports_non_convergence_with_residual() {
        let b = [1.0, 1.0, 1.0];
        let diag = [1.0, 10.0, 100.0];
        let err = conjugate_gradient(
            |v| v.iter().zip(diag).map(|(x, d)| x * d).collect(),
            &b,
            1e-14,
            1,
        )
        .unwrap_err();
        match err {
            Error::Numeric { residual, .. } => assert!(residual > 1e-14),
            other => panic!("{other}"),
        }
    }

    fn agents(groups: &[&[(f64, f64)]]) -> Vec<AgentData> {
        groups
            .iter()
            .enumerate()
            .map(|(i, g)| AgentData {
                agent_id: format!("a{i}"),
                examples: g.iter().map(|(x, y)| Example::new(vec![*x], *y)).collect(),
            })
            .collect()
    }

    #[test]
    fn duplicate_data_has_zero_gain() {
        let data = agents(&[&[(0.0, 1.0), (1.0, 2.0)], &[(2.0, 2.5)], &[(2.0, 2.5)]]);
        let holdout = vec![Example::new(vec![1.5], 2.2)];
        // Trains on the distinct label set, so a repeated copy adds nothing.
        struct DistinctMean;
        impl ValueFunction for DistinctMean {
            fn train(&self, data: &[Example], _dim: usize) -> Result<Vec<f64>> {
                let mut ys: Vec<f64> = data.iter().map(|e| e.label).collect();
                ys.sort_by(f64::total_cmp);
                ys.dedup();
                Ok(vec![ys.iter().sum::<f64>() / ys.len().max(1) as f64])
            }
            fn evaluate(&self, p: &[f64], h: &[Example]) -> f64 {
                1.0 / (1.0 + (p[0] - h[0].label).abs())
            }
        }
        let problem = Attribution::new(&DistinctMean, &data, &holdout).unwrap();
        let gains = attribution_loo(&problem).unwrap();
        assert_eq!(gains[1], 0.0);
        assert_eq!(gains[2], 0.0);
    }

    #[test]
    fn threshold_classifier_fixture() {
        // Midpoint-of-class-means classifier on one feature.
        struct Midpoint;
        impl ValueFunction for Midpoint {
            fn train(&self, data: &[Example], _dim: usize) -> Result<Vec<f64>> {
                let mean = |label: f64| {
                    let xs: Vec<f64> = data
                        .iter()
                        .filter(|e| e.label == label)
                        .map(|e| e.features[0])
                        .collect();
                    xs.iter().sum::<f64>() / xs.len() as f64
                };
                Ok(vec![(mean(0.0) + mean(1.0)) / 2.0])
            }
            fn evaluate(&self, p: &[f64], h: &[Example]) -> f64 {
                let ok = h
                    .iter()
                    .filter(|e| (e.features[0] >= p[0]) == (e.label == 1.0))
                    .count();
                ok as f64 / h.len() as f64
            }
        }
        // All six points: class means 1 and 5, threshold 3.
        // Without A's two points: class means 0 and 3, threshold 1.5.
        let data = agents(&[
            &[(3.0, 0.0), (7.0, 1.0)],
            &[(0.0, 0.0), (3.0, 1.0)],
            &[(0.0, 0.0), (5.0, 1.0)],
        ]);
        let data: Vec<AgentData> = data
            .into_iter()
            .map(|mut a| {
                a.examples.iter_mut().for_each(|e| e.label = if e.label == 1.0 { 1.0 } else { 0.0 });
                a
            })
            .collect();
        let holdout: Vec<Example> = [(0.5, 0.0), (2.0, 0.0), (4.0, 1.0), (6.0, 1.0), (8.0, 1.0)]
            .iter()
            .map(|(x, y)| Example::new(vec![*x], *y))
            .collect();
        let problem = Attribution::new(&Midpoint, &data, &holdout).unwrap();
        assert_eq!(problem.value(&[0, 1, 2]).unwrap(), 1.0);
        let gains = attribution_loo(&problem).unwrap();
        assert!((gains[0] - 0.2).abs() < 1e-12, "{gains:?}");
    }

    #[test]
    fn identical_agents_have_equal_gains() {
        let data = agents(&[&[(1.0, 2.0)], &[(1.0, 2.0)], &[(1.0, 2.0)]]);
        let holdout = vec![Example::new(vec![0.0], 0.5)];
        let vf = RidgeRegression::default();
        let gains = attribution_loo(&Attribution::new(&vf, &data, &holdout).unwrap()).unwrap();
        assert!(gains.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn influence_routes_agree() {
        let data = agents(&[
            &[(0.0, 1.0), (1.0, 2.9)],
            &[(2.0, 5.2), (3.0, 7.1)],
            &[(1.5, 9.0), (0.5, -3.0)],
        ]);
        let holdout: Vec<Example> = (0..5)
            .map(|k| Example::new(vec![k as f64 * 0.7], 1.0 + 2.0 * k as f64 * 0.7))
            .collect();
        let vf = RidgeRegression::default();
        let problem = Attribution::new(&vf, &data, &holdout).unwrap();
        let tol = 1e-8;
        let cg = influence_marginal(&problem, 1e-6, tol, Solver::ConjugateGradient { max_iters: 100 }).unwrap();
        let exact = influence_marginal(&problem, 1e-6, tol, Solver::Exact).unwrap();
        for (a, b) in cg.values.iter().zip(&exact.values) {
            assert!((a - b).abs() <= 10.0 * tol, "{a} vs {b}");
        }
        // The noisy third agent is the least valuable by both routes.
        let loo = attribution_loo(&problem).unwrap();
        assert!(loo[2] < loo[0] && loo[2] < loo[1]);
        assert!(exact.values[2] < exact.values[0] && exact.values[2] < exact.values[1]);
    }

    #[test]
    fn zero_gradient_agent_has_zero_influence() {
        // The third agent's point lies on the fitted line of the others
        // with an unpenalized fit, so its residual gradient vanishes.
        let data = agents(&[&[(0.0, 1.0), (2.0, 5.0)], &[(1.0, 3.0), (3.0, 7.0)], &[(1.5, 4.0)]]);
        let holdout = vec![Example::new(vec![0.5], 2.1)];
        let vf = RidgeRegression { l2: 1e-12 };
        let problem = Attribution::new(&vf, &data, &holdout).unwrap();
        let est = influence_marginal(&problem, 1e-6, 1e-10, Solver::Exact).unwrap();
        assert!(est.values[2].abs() < 1e-8, "{:?}", est.values);
    }

    #[test]
    fn first_order_tracks_parameter_change() {
        // Dropping one small group from a large ridge fit: −H⁻¹g_i predicts
        // the retrained parameter shift up to the group's leverage.
        let mut groups: Vec<Vec<(f64, f64)>> = (0..6)
            .map(|g| {
                (0..8)
                    .map(|k| {
                        let x = (g * 8 + k) as f64 / 10.0;
                        (x, 0.5 + 1.5 * x + if (g + k) % 2 == 0 { 0.1 } else { -0.1 })
                    })
                    .collect()
            })
            .collect();
        groups.push(vec![(2.0, 4.8)]);
        let refs: Vec<&[(f64, f64)]> = groups.iter().map(|g| g.as_slice()).collect();
        let data = agents(&refs);
        let holdout = vec![Example::new(vec![1.0], 2.0)];
        let vf = RidgeRegression::default();
        let problem = Attribution::new(&vf, &data, &holdout).unwrap();
        let last = data.len() - 1;
        let full = problem.train(&(0..=last).collect::<Vec<_>>()).unwrap();
        let dropped = problem.train(&(0..last).collect::<Vec<_>>()).unwrap();
        let all = problem.union(&(0..=last).collect::<Vec<_>>());
        let h = vf.hessian(&full, &all);
        let g = DVector::from_vec(vf.loss_gradient(&full, &data[last].examples));
        let predicted = -(h.cholesky().unwrap().solve(&g));
        let actual = DVector::from_vec(full.iter().zip(&dropped).map(|(a, b)| a - b).collect());
        assert!((&predicted - &actual).norm() < 0.05 * actual.norm(), "{predicted} vs {actual}");
    }
}
