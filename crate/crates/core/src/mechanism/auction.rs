//! Q-MIA critical payments, MUT shares and the Mixed-MIA hybrid reward.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::scoring::{score_agent, score_denominator};
use super::selection::{qmia_select, ranking, wins_with_report};
use super::threshold::{
    bisect_supremum, find_monotonicity_violation, grid, sweep_supremum, FALLBACK_GRID_POINTS,
    MONOTONICITY_PROBES,
};
use crate::error::{Error, Result};
use crate::model::{
    AgentId, AuctionOutcome, Diagnostics, MechanismConfig, MonotonicityViolation, Participant,
    ScoredAgent,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPayment {
    pub payment: f64,
    /// Set when the pre-check found the selection rule non-monotone for this
    /// agent; the payment then comes from the brute-force sweep.
    pub violation: Option<MonotonicityViolation>,
}

/// Reports at which agent `idx` can change rank or stop fitting the budget.
fn breakpoints(agents: &[ScoredAgent], idx: usize, denominator: f64, cfg: &MechanismConfig) -> Vec<f64> {
    let mut points = Vec::with_capacity(2 * agents.len() + 1);
    points.push(cfg.budget);
    let mut prefix = 0.0;
    for j in ranking(agents, cfg) {
        if j == idx {
            continue;
        }
        points.push(agents[j].virtual_cost * denominator);
        prefix += agents[j].reported_cost;
        points.push(cfg.budget - prefix);
    }
    points
}

/// Myerson threshold: the supremum of reports at which agent `idx` is still
/// selected, others fixed. Never below the agent's own report.
pub fn critical_payment(
    agents: &[ScoredAgent],
    idx: usize,
    cfg: &MechanismConfig,
) -> Result<CriticalPayment> {
    critical_payment_capped(agents, idx, cfg, None)
}

fn critical_payment_capped(
    agents: &[ScoredAgent],
    idx: usize,
    cfg: &MechanismConfig,
    max_winners: Option<usize>,
) -> Result<CriticalPayment> {
    let me = &agents[idx];
    let denominator = score_denominator(me.quality, me.marginal_utility, cfg);
    let wins = |x: f64| wins_with_report(agents, idx, x, denominator, cfg, max_winners);
    if !wins(me.reported_cost) {
        return Err(Error::data(format!(
            "agent {} is not selected under its own report",
            me.agent_id
        )));
    }

    let mut probes = grid(0.0, cfg.budget, MONOTONICITY_PROBES);
    probes.push(me.reported_cost);
    probes.sort_by(f64::total_cmp);
    if let Some((winning, losing)) = find_monotonicity_violation(wins, &probes) {
        let mut points = grid(0.0, cfg.budget, FALLBACK_GRID_POINTS);
        points.push(me.reported_cost);
        let payment = sweep_supremum(wins, &points)
            .unwrap_or(me.reported_cost)
            .max(me.reported_cost);
        return Ok(CriticalPayment {
            payment,
            violation: Some(MonotonicityViolation {
                agent_id: me.agent_id.clone(),
                winning_report: winning,
                losing_report: losing,
            }),
        });
    }

    let payment = bisect_supremum(
        wins,
        me.reported_cost,
        cfg.budget,
        cfg.grid_resolution(),
        &breakpoints(agents, idx, denominator, cfg),
    );
    Ok(CriticalPayment {
        payment,
        violation: None,
    })
}

pub fn score_participants(participants: &[Participant], cfg: &MechanismConfig) -> Result<Vec<ScoredAgent>> {
    let mut seen = BTreeSet::new();
    participants
        .iter()
        .map(|p| {
            p.report.validate()?;
            if !seen.insert(p.agent_id()) {
                return Err(Error::data(format!("duplicate agent id {}", p.agent_id())));
            }
            score_agent(
                p.agent_id(),
                p.report.reported_cost,
                p.quality,
                p.marginal_utility,
                cfg,
            )
        })
        .collect()
}

/// Winners, their monetary threshold payments, and strict-mode removals.
struct MonetaryRun {
    scored: Vec<ScoredAgent>,
    winners: Vec<usize>,
    payments: Vec<f64>,
    dropped: Vec<usize>,
    violations: Vec<MonotonicityViolation>,
}

fn run_monetary(participants: &[Participant], cfg: &MechanismConfig) -> Result<MonetaryRun> {
    cfg.validate()?;
    let scored = score_participants(participants, cfg)?;
    let mut winners = qmia_select(&scored, cfg);
    let mut dropped = Vec::new();
    let mut cap = None;
    loop {
        let mut payments = Vec::with_capacity(winners.len());
        let mut violations = Vec::new();
        for &w in &winners {
            let cp = critical_payment_capped(&scored, w, cfg, cap)?;
            payments.push(cp.payment);
            violations.extend(cp.violation);
        }
        let total: f64 = payments.iter().sum();
        if !cfg.strict_budget_mode || total <= cfg.budget || winners.is_empty() {
            return Ok(MonetaryRun {
                scored,
                winners,
                payments,
                dropped,
                violations,
            });
        }
        // Highest virtual cost among winners is the last one selected.
        dropped.extend(winners.pop());
        cap = Some(winners.len());
    }
}

fn products(scored: &[ScoredAgent], winners: &[usize]) -> Vec<f64> {
    winners
        .iter()
        .map(|&w| scored[w].quality * scored[w].marginal_utility)
        .collect()
}

/// Normalized shares; all zero when no winner contributes.
fn normalized(products: &[f64]) -> Vec<f64> {
    let total: f64 = products.iter().sum();
    if total > 0.0 {
        products.iter().map(|p| p / total).collect()
    } else {
        vec![0.0; products.len()]
    }
}

/// MUT shares `s_i = q_i·φ̂_i / Σ_j q_j·φ̂_j` over `(agent, q, φ̂)` winners.
pub fn mut_shares(winners: &[(AgentId, f64, f64)]) -> Result<BTreeMap<AgentId, f64>> {
    let products: Vec<f64> = winners.iter().map(|(_, q, phi)| q * phi).collect();
    if let Some(bad) = products.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::data(format!(
            "agent {}: q·phi must be finite and non-negative",
            winners[bad].0
        )));
    }
    if !products.iter().any(|&p| p > 0.0) {
        let ids: Vec<&str> = winners.iter().map(|(id, _, _)| id.as_str()).collect();
        return Err(Error::degenerate(ids.join(","), "every winner has q·phi = 0"));
    }
    Ok(winners
        .iter()
        .map(|(id, _, _)| id.clone())
        .zip(normalized(&products))
        .collect())
}

/// Hybrid reward `ρ·p^Q + (1−ρ)·U·s`.
pub fn hybrid_payment(monetary: f64, share: f64, rho: f64, utility_pool: f64) -> f64 {
    rho * monetary + (1.0 - rho) * utility_pool * share
}

/// Winner utility `ρ·(p^Q − c) + (1−ρ)·s·U`; the cost is carried by the
/// monetary leg only.
pub fn hybrid_utility(monetary: f64, share: f64, true_cost: f64, rho: f64, utility_pool: f64) -> f64 {
    rho * (monetary - true_cost) + (1.0 - rho) * share * utility_pool
}

fn build_outcome(
    participants: &[Participant],
    run: MonetaryRun,
    rho: f64,
    cfg: &MechanismConfig,
) -> AuctionOutcome {
    let shares = normalized(&products(&run.scored, &run.winners));
    let known_costs = participants.iter().all(|p| p.report.true_cost.is_some());

    let mut outcome = AuctionOutcome::default();
    for p in participants {
        outcome.payments.insert(p.agent_id().to_owned(), 0.0);
        outcome.shares.insert(p.agent_id().to_owned(), 0.0);
    }
    let mut utilities: BTreeMap<AgentId, f64> = participants
        .iter()
        .map(|p| (p.agent_id().to_owned(), 0.0))
        .collect();

    let mut payment_sum = 0.0;
    for (k, &w) in run.winners.iter().enumerate() {
        let id = run.scored[w].agent_id.clone();
        let pay = hybrid_payment(run.payments[k], shares[k], rho, cfg.utility_pool);
        payment_sum += pay;
        if let Some(c) = participants[w].report.true_cost {
            utilities.insert(
                id.clone(),
                hybrid_utility(run.payments[k], shares[k], c, rho, cfg.utility_pool),
            );
        }
        outcome.payments.insert(id.clone(), pay);
        outcome.shares.insert(id.clone(), shares[k]);
        outcome.winners.push(id);
    }
    let monetary_sum: f64 = run.payments.iter().sum();
    outcome.utilities = known_costs.then_some(utilities);
    outcome.diagnostics = Diagnostics {
        payment_sum,
        payment_overrun: monetary_sum > cfg.budget,
        monotonicity_violations: run.violations,
        dropped_for_budget: run
            .dropped
            .iter()
            .map(|&d| run.scored[d].agent_id.clone())
            .collect(),
    };
    outcome
}

/// Q-MIA: rank by virtual cost, select the greedy budget prefix, pay each
/// winner its critical report.
pub fn qmia(participants: &[Participant], cfg: &MechanismConfig) -> Result<AuctionOutcome> {
    let run = run_monetary(participants, cfg)?;
    Ok(build_outcome(participants, run, 1.0, cfg))
}

/// Mixed-MIA: Q-MIA winners and thresholds, paid `ρ·p^Q + (1−ρ)·U·s`.
pub fn mixed_mia(participants: &[Participant], cfg: &MechanismConfig) -> Result<AuctionOutcome> {
    let run = run_monetary(participants, cfg)?;
    Ok(build_outcome(participants, run, cfg.rho, cfg))
}

/// Pure utility sharing: Mixed-MIA at `ρ = 0`.
pub fn mut_mechanism(participants: &[Participant], cfg: &MechanismConfig) -> Result<AuctionOutcome> {
    let run = run_monetary(participants, cfg)?;
    Ok(build_outcome(participants, run, 0.0, cfg))
}

/// What one agent receives under a given report profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentOutcome {
    pub selected: bool,
    /// Monetary threshold payment `p^Q`; zero for losers.
    pub critical_payment: f64,
    pub share: f64,
}

impl AgentOutcome {
    pub fn utility(&self, true_cost: f64, rho: f64, utility_pool: f64) -> f64 {
        if self.selected {
            hybrid_utility(self.critical_payment, self.share, true_cost, rho, utility_pool)
        } else {
            0.0
        }
    }
}

/// Outcome for agent `idx` alone, without computing other winners'
/// payments unless strict budget mode needs them.
pub fn agent_outcome(participants: &[Participant], idx: usize, cfg: &MechanismConfig) -> Result<AgentOutcome> {
    if cfg.strict_budget_mode {
        let run = run_monetary(participants, cfg)?;
        let shares = normalized(&products(&run.scored, &run.winners));
        return Ok(match run.winners.iter().position(|&w| w == idx) {
            Some(k) => AgentOutcome {
                selected: true,
                critical_payment: run.payments[k],
                share: shares[k],
            },
            None => AgentOutcome {
                selected: false,
                critical_payment: 0.0,
                share: 0.0,
            },
        });
    }
    cfg.validate()?;
    let scored = score_participants(participants, cfg)?;
    let winners = qmia_select(&scored, cfg);
    let Some(k) = winners.iter().position(|&w| w == idx) else {
        return Ok(AgentOutcome {
            selected: false,
            critical_payment: 0.0,
            share: 0.0,
        });
    };
    let cp = critical_payment(&scored, idx, cfg)?;
    Ok(AgentOutcome {
        selected: true,
        critical_payment: cp.payment,
        share: normalized(&products(&scored, &winners))[k],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPreference {
    /// Cost per unit of verified contribution, `c / (q·φ̂)`.
    pub theta: f64,
    /// `du/dρ = (p^Q − c) − s·U`; positive prefers money, negative prefers shares.
    pub slope: f64,
}

pub fn rho_preference(
    agent_id: &str,
    true_cost: f64,
    quality: f64,
    marginal_utility: f64,
    monetary: f64,
    share: f64,
    utility_pool: f64,
) -> Result<RhoPreference> {
    let contribution = quality * marginal_utility;
    if !(contribution > 0.0) {
        return Err(Error::degenerate(agent_id, "q·phi is zero"));
    }
    Ok(RhoPreference {
        theta: true_cost / contribution,
        slope: (monetary - true_cost) - share * utility_pool,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AgentReport;

    fn participant(id: &str, cost: f64) -> Participant {
        Participant {
            report: AgentReport::new(id, cost).with_true_cost(cost),
            quality: 1.0,
            marginal_utility: 1.0,
        }
    }

    fn witness() -> Vec<Participant> {
        vec![participant("1", 2.0), participant("2", 3.0), participant("3", 10.0)]
    }

    fn budget(b: f64) -> MechanismConfig {
        MechanismConfig {
            budget: b,
            ..Default::default()
        }
    }

    /// Exhaustive sweep over a fine grid, independent of the bisection path.
    fn swept_threshold(agents: &[ScoredAgent], idx: usize, cfg: &MechanismConfig, points: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for x in grid(0.0, cfg.budget, points) {
            let mut modified = agents.to_vec();
            modified[idx].reported_cost = x;
            modified[idx].virtual_cost = x;
            if qmia_select(&modified, cfg).contains(&idx) {
                best = best.max(x);
            }
        }
        best
    }

    #[test]
    fn witness_thresholds_match_sweep() {
        let cfg = budget(6.0);
        let scored = score_participants(&witness(), &cfg).unwrap();
        // Grid step 6/6000 = 0.001 hits 3 and 4 exactly.
        assert_eq!(swept_threshold(&scored, 0, &cfg, 6001), 3.0);
        assert_eq!(swept_threshold(&scored, 1, &cfg, 6001), 4.0);
        assert_eq!(critical_payment(&scored, 0, &cfg).unwrap().payment, 3.0);
        assert_eq!(critical_payment(&scored, 1, &cfg).unwrap().payment, 4.0);
    }

    #[test]
    fn sole_agent_is_paid_the_budget() {
        let cfg = budget(5.0);
        let scored = score_participants(&[participant("x", 1.0)], &cfg).unwrap();
        assert_eq!(critical_payment(&scored, 0, &cfg).unwrap().payment, 5.0);
    }

    #[test]
    fn loser_has_no_threshold() {
        let cfg = budget(6.0);
        let scored = score_participants(&witness(), &cfg).unwrap();
        assert!(critical_payment(&scored, 2, &cfg).is_err());
    }

    #[test]
    fn qmia_witness_overruns() {
        let out = qmia(&witness(), &budget(6.0)).unwrap();
        assert_eq!(out.winners, vec!["1", "2"]);
        assert_eq!(out.payment("1"), 3.0);
        assert_eq!(out.payment("2"), 4.0);
        assert_eq!(out.payment("3"), 0.0);
        assert_eq!(out.share("3"), 0.0);
        assert!(out.diagnostics.payment_overrun);
        assert_eq!(out.diagnostics.payment_sum, 7.0);
        assert!(out.diagnostics.dropped_for_budget.is_empty());
        let u = out.utilities.unwrap();
        assert_eq!((u["1"], u["2"], u["3"]), (1.0, 1.0, 0.0));
    }

    #[test]
    fn strict_mode_drops_highest_virtual_cost() {
        let cfg = MechanismConfig {
            strict_budget_mode: true,
            ..budget(6.0)
        };
        let out = qmia(&witness(), &cfg).unwrap();
        assert_eq!(out.winners, vec!["1"]);
        assert_eq!(out.payment("1"), 3.0);
        assert_eq!(out.payment("2"), 0.0);
        assert_eq!(out.diagnostics.dropped_for_budget, vec!["2"]);
        assert!(!out.diagnostics.payment_overrun);
        assert!(out.diagnostics.payment_sum <= 6.0);
    }

    #[test]
    fn empty_auction() {
        let out = qmia(&[], &budget(6.0)).unwrap();
        assert!(out.winners.is_empty());
        assert!(!out.diagnostics.payment_overrun);
        assert!(out.diagnostics.monotonicity_violations.is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let agents = vec![participant("a", 1.0), participant("a", 2.0)];
        assert!(matches!(qmia(&agents, &budget(6.0)), Err(Error::Data(_))));
    }

    #[test]
    fn mut_share_examples() {
        let s = mut_shares(&[("a".into(), 0.5, 0.4), ("b".into(), 0.4, 0.5)]).unwrap();
        assert_eq!(s["a"], 0.5);
        assert_eq!(s["b"], 0.5);
        let s = mut_shares(&[("a".into(), 1.0, 0.2), ("b".into(), 1.0, 0.3), ("c".into(), 1.0, 0.5)])
            .unwrap();
        assert!((s["a"] - 0.2).abs() < 1e-12 && (s["b"] - 0.3).abs() < 1e-12 && (s["c"] - 0.5).abs() < 1e-12);
        let s = mut_shares(&[("a".into(), 1.0, 1.0), ("b".into(), 0.0, 1.0)]).unwrap();
        assert_eq!((s["a"], s["b"]), (1.0, 0.0));
        assert!(matches!(
            mut_shares(&[("a".into(), 0.0, 1.0)]),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn mixed_reductions() {
        let agents = witness();
        let base = qmia(&agents, &budget(6.0)).unwrap();
        let at_one = mixed_mia(&agents, &MechanismConfig { rho: 1.0, ..budget(6.0) }).unwrap();
        assert_eq!(base, at_one);

        let cfg = MechanismConfig {
            rho: 0.0,
            utility_pool: 8.0,
            ..budget(6.0)
        };
        let at_zero = mixed_mia(&agents, &cfg).unwrap();
        assert_eq!(at_zero.payment("1"), 4.0);
        assert_eq!(at_zero.payment("2"), 4.0);
        assert_eq!(mut_mechanism(&agents, &cfg).unwrap(), at_zero);
        assert!((hybrid_payment(4.0, 0.25, 0.5, 8.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn agent_outcome_agrees_with_full_run() {
        let agents = witness();
        for strict in [false, true] {
            let cfg = MechanismConfig {
                strict_budget_mode: strict,
                ..budget(6.0)
            };
            let full = qmia(&agents, &cfg).unwrap();
            for (k, p) in agents.iter().enumerate() {
                let one = agent_outcome(&agents, k, &cfg).unwrap();
                assert_eq!(one.selected, full.is_winner(p.agent_id()));
                assert_eq!(one.critical_payment, full.payment(p.agent_id()));
                assert_eq!(one.share, full.share(p.agent_id()));
            }
        }
    }

    #[test]
    fn rho_preference_examples() {
        let p = rho_preference("a", 1.0, 1.0, 1.0, 3.0, 0.25, 8.0).unwrap();
        assert_eq!(p.theta, 1.0);
        assert_eq!(p.slope, 0.0);
        let p = rho_preference("a", 1.0, 1.0, 1.0, 4.0, 0.25, 8.0).unwrap();
        assert_eq!(p.slope, 1.0);
        assert!(rho_preference("a", 1.0, 0.0, 1.0, 4.0, 0.25, 8.0).is_err());
    }
}
