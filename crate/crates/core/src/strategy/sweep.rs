//! Unilateral, pairwise and liquidity sweeps over one instance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{effective_rho, DsicVerdict};
use crate::error::{Error, Result};
use crate::mechanism::threshold::grid;
use crate::mechanism::{agent_outcome, mixed_mia, rho_preference, AgentOutcome, Mechanism};
use crate::model::{AgentId, MechanismConfig, Participant};

/// `1e-9` plus one payment-grid step.
pub fn default_tolerance(cfg: &MechanismConfig) -> f64 {
    1e-9 + cfg.grid_resolution()
}

fn with_reports(instance: &[Participant], reports: &[(usize, f64)]) -> Vec<Participant> {
    let mut profile = instance.to_vec();
    for &(idx, r) in reports {
        profile[idx].report.reported_cost = r;
    }
    profile
}

fn truthful_profile(instance: &[Participant]) -> Vec<Participant> {
    let reports: Vec<(usize, f64)> = instance
        .iter()
        .enumerate()
        .map(|(k, p)| (k, p.true_cost()))
        .collect();
    with_reports(instance, &reports)
}

fn require_true_costs(instance: &[Participant]) -> Result<()> {
    match instance.iter().find(|p| p.report.true_cost.is_none()) {
        Some(p) => Err(Error::data(format!("agent {} has no true cost", p.agent_id()))),
        None => Ok(()),
    }
}

/// One agent's outcomes across a report grid, others truthful.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSweep {
    pub agent_id: AgentId,
    pub true_cost: f64,
    pub truthful: AgentOutcome,
    pub reports: Vec<f64>,
    pub outcomes: Vec<AgentOutcome>,
    pub monotonicity_flag: bool,
}

impl AgentSweep {
    pub fn verdict(&self, rho: f64, utility_pool: f64, tolerance: f64) -> DsicVerdict {
        let u = |o: &AgentOutcome| o.utility(self.true_cost, rho, utility_pool);
        let truthful_utility = u(&self.truthful);
        let (best_deviation_report, best_deviation_utility) = self
            .reports
            .iter()
            .zip(&self.outcomes)
            .map(|(r, o)| (*r, u(o)))
            .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        DsicVerdict {
            agent_id: self.agent_id.clone(),
            truthful_utility,
            best_deviation_utility,
            best_deviation_report,
            violation: best_deviation_utility > truthful_utility + tolerance,
            monotonicity_flag: self.monotonicity_flag,
        }
    }
}

/// Winning must be downward closed in the report: flags a lost report
/// below a winning one.
fn non_monotone(points: &mut [(f64, bool)]) -> bool {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lost_below = false;
    for &(_, won) in points.iter() {
        if won && lost_below {
            return true;
        }
        lost_below |= !won;
    }
    false
}

/// Evaluates agent `idx` at `grid_steps` reports spanning `[0, B]`.
pub fn sweep_agent(
    instance: &[Participant],
    idx: usize,
    cfg: &MechanismConfig,
    grid_steps: usize,
) -> Result<AgentSweep> {
    require_true_costs(instance)?;
    let truthful_profile = truthful_profile(instance);
    let true_cost = instance[idx].true_cost();
    let truthful = agent_outcome(&truthful_profile, idx, cfg)?;
    let reports = grid(0.0, cfg.budget, grid_steps);
    let outcomes = reports
        .iter()
        .map(|&r| agent_outcome(&with_reports(&truthful_profile, &[(idx, r)]), idx, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut points: Vec<(f64, bool)> = reports
        .iter()
        .zip(&outcomes)
        .map(|(r, o)| (*r, o.selected))
        .chain([(true_cost, truthful.selected)])
        .collect();
    Ok(AgentSweep {
        agent_id: instance[idx].agent_id().to_owned(),
        true_cost,
        truthful,
        reports,
        outcomes,
        monotonicity_flag: non_monotone(&mut points),
    })
}

/// Per-agent best unilateral deviation, others truthful.
pub fn dsic_sweep(
    instance: &[Participant],
    mechanism: Mechanism,
    cfg: &MechanismConfig,
    grid_steps: usize,
    tolerance: f64,
) -> Result<Vec<DsicVerdict>> {
    let rho = effective_rho(mechanism, cfg)?;
    Ok(dsic_sweep_rhos(instance, cfg, &[rho], grid_steps, tolerance)?
        .pop()
        .map(|(_, v)| v)
        .unwrap_or_default())
}

/// [`dsic_sweep`] for Mixed-MIA at several liquidity weights. Winner sets
/// and thresholds do not depend on `ρ`, so each report is evaluated once.
pub fn dsic_sweep_rhos(
    instance: &[Participant],
    cfg: &MechanismConfig,
    rhos: &[f64],
    grid_steps: usize,
    tolerance: f64,
) -> Result<Vec<(f64, Vec<DsicVerdict>)>> {
    if grid_steps == 0 {
        return Err(Error::config("grid_steps must be positive"));
    }
    if let Some(r) = rhos.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::config(format!("rho {r} outside [0, 1]")));
    }
    let sweeps = (0..instance.len())
        .into_par_iter()
        .map(|idx| sweep_agent(instance, idx, cfg, grid_steps))
        .collect::<Result<Vec<_>>>()?;
    Ok(rhos
        .iter()
        .map(|&rho| {
            let verdicts = sweeps
                .iter()
                .map(|s| s.verdict(rho, cfg.utility_pool, tolerance))
                .collect();
            (rho, verdicts)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollusionRecord {
    pub pair: (AgentId, AgentId),
    /// `max min(Δu_a, Δu_b)` over the joint grid; at least 0 because the
    /// truthful profile is included.
    pub joint_gain: f64,
    pub profile: (f64, f64),
}

/// Joint report sweep for a pair under non-transferable utility.
pub fn collusion_probe(
    instance: &[Participant],
    pair: (usize, usize),
    mechanism: Mechanism,
    cfg: &MechanismConfig,
    grid_steps: usize,
) -> Result<CollusionRecord> {
    let (a, b) = pair;
    if a == b || a >= instance.len() || b >= instance.len() {
        return Err(Error::config("collusion needs two distinct agents"));
    }
    require_true_costs(instance)?;
    let rho = effective_rho(mechanism, cfg)?;
    let truthful = truthful_profile(instance);
    let (ca, cb) = (instance[a].true_cost(), instance[b].true_cost());
    let utility = |profile: &[Participant], idx: usize, c: f64| -> Result<f64> {
        Ok(agent_outcome(profile, idx, cfg)?.utility(c, rho, cfg.utility_pool))
    };
    let base_a = utility(&truthful, a, ca)?;
    let base_b = utility(&truthful, b, cb)?;
    let axis = |c: f64| {
        let mut g = grid(0.0, cfg.budget, grid_steps);
        g.push(c);
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    };
    let (grid_a, grid_b) = (axis(ca), axis(cb));
    let rows = grid_a
        .par_iter()
        .map(|&ra| {
            let mut best = (f64::NEG_INFINITY, (ra, cb));
            for &rb in &grid_b {
                let profile = with_reports(&truthful, &[(a, ra), (b, rb)]);
                let gain = (utility(&profile, a, ca)? - base_a).min(utility(&profile, b, cb)? - base_b);
                if gain > best.0 {
                    best = (gain, (ra, rb));
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let (joint_gain, profile) = rows
        .into_iter()
        .fold((f64::NEG_INFINITY, (ca, cb)), |best, cur| if cur.0 > best.0 { cur } else { best });
    Ok(CollusionRecord {
        pair: (instance[a].agent_id().to_owned(), instance[b].agent_id().to_owned()),
        joint_gain,
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoCurve {
    pub agent_id: AgentId,
    pub winner: bool,
    pub rhos: Vec<f64>,
    pub utilities: Vec<f64>,
    /// Least-squares affine fit `u ≈ intercept + slope·ρ`.
    pub slope: f64,
    pub intercept: f64,
    pub max_affine_deviation: f64,
    /// `du/dρ` predicted from the Q-MIA payment and MUT share.
    pub preference_slope: f64,
}

fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Truthful Mixed-MIA utilities at each `ρ`, winners fixed by the `ρ = 1`
/// run.
pub fn rho_sweep(instance: &[Participant], cfg: &MechanismConfig, rho_values: &[f64]) -> Result<Vec<RhoCurve>> {
    require_true_costs(instance)?;
    if rho_values.is_empty() {
        return Err(Error::config("rho_values is empty"));
    }
    let truthful = truthful_profile(instance);
    let anchor = mixed_mia(&truthful, &MechanismConfig { rho: 1.0, ..cfg.clone() })?;
    let runs = rho_values
        .iter()
        .map(|&rho| {
            let out = mixed_mia(&truthful, &MechanismConfig { rho, ..cfg.clone() })?;
            if out.winners != anchor.winners {
                return Err(Error::data(format!("winner set changed at rho {rho}")));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    instance
        .iter()
        .map(|p| {
            let id = p.agent_id();
            let utilities: Vec<f64> = runs
                .iter()
                .map(|o| o.utilities.as_ref().and_then(|u| u.get(id).copied()).unwrap_or(0.0))
                .collect();
            let (slope, intercept) = affine_fit(rho_values, &utilities);
            let max_affine_deviation = rho_values
                .iter()
                .zip(&utilities)
                .map(|(r, u)| (u - (intercept + slope * r)).abs())
                .fold(0.0, f64::max);
            let winner = anchor.is_winner(id);
            let preference_slope = if winner {
                rho_preference(
                    id,
                    p.true_cost(),
                    p.quality,
                    p.marginal_utility,
                    anchor.payment(id),
                    anchor.share(id),
                    cfg.utility_pool,
                )?
                .slope
            } else {
                0.0
            };
            Ok(RhoCurve {
                agent_id: id.to_owned(),
                winner,
                rhos: rho_values.to_vec(),
                utilities,
                slope,
                intercept,
                max_affine_deviation,
                preference_slope,
            })
        })
        .collect()
}
