//! Strategic-behavior simulation: misreport sweeps, IR audits, pairwise
//! collusion, liquidity sweeps and risk-sensitive utilities.

mod suite;
mod sweep;

use serde::{Deserialize, Serialize};

pub use suite::{run_suite, simulation_instances, SimulationConfig, Suite, SuiteReport, SuiteRow, SuiteSummary};
pub use sweep::{
    collusion_probe, default_tolerance, dsic_sweep, dsic_sweep_rhos, rho_sweep, sweep_agent,
    AgentSweep, CollusionRecord, RhoCurve,
};

use crate::error::{Error, Result};
use crate::mechanism::threshold::grid;
use crate::mechanism::Mechanism;
use crate::model::{AgentId, AuctionOutcome, MechanismConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Truthful,
    Overreport { factor: f64 },
    Underreport { factor: f64 },
    GridSweep { min: f64, max: f64, steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub agent_id: AgentId,
    pub strategy: Strategy,
}

impl StrategyProfile {
    pub fn validate(&self) -> Result<()> {
        match self.strategy {
            Strategy::Truthful => Ok(()),
            Strategy::Overreport { factor } | Strategy::Underreport { factor } => {
                if factor > 0.0 && factor.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config(format!("{}: factor must be positive", self.agent_id)))
                }
            }
            Strategy::GridSweep { min, max, steps } => {
                if min < max && steps >= 2 && min.is_finite() && max.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "{}: grid needs min < max and at least 2 steps",
                        self.agent_id
                    )))
                }
            }
        }
    }

    /// Reports this strategy submits for an agent with `true_cost`.
    pub fn reports(&self, true_cost: f64) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match self.strategy {
            Strategy::Truthful => vec![true_cost],
            Strategy::Overreport { factor } => vec![true_cost * (1.0 + factor)],
            Strategy::Underreport { factor } => vec![true_cost / (1.0 + factor)],
            Strategy::GridSweep { min, max, steps } => grid(min, max, steps),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsicVerdict {
    pub agent_id: AgentId,
    pub truthful_utility: f64,
    pub best_deviation_utility: f64,
    pub best_deviation_report: f64,
    pub violation: bool,
    /// Selection was not monotone in this agent's report along the sweep.
    pub monotonicity_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrViolation {
    pub agent_id: AgentId,
    pub utility: f64,
}

/// Winners whose realized utility is below `−1e-9`.
pub fn ir_audit(outcome: &AuctionOutcome) -> Result<Vec<IrViolation>> {
    let utilities = outcome
        .utilities
        .as_ref()
        .ok_or_else(|| Error::data("IR audit needs true costs for every agent"))?;
    Ok(outcome
        .winners
        .iter()
        .filter_map(|id| {
            let u = *utilities.get(id)?;
            (u < -1e-9).then(|| IrViolation {
                agent_id: id.clone(),
                utility: u,
            })
        })
        .collect())
}

/// `reward^{1−γ}/(1−γ) − cost`, logarithmic at `γ = 1`. Zero reward with
/// `γ ≥ 1` yields negative infinity.
pub fn crra_utility(reward: f64, cost: f64, gamma_risk: f64) -> f64 {
    if reward < 0.0 || gamma_risk < 0.0 {
        return f64::NAN;
    }
    if reward == 0.0 && gamma_risk >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if gamma_risk == 1.0 {
        reward.ln() - cost
    } else {
        reward.powf(1.0 - gamma_risk) / (1.0 - gamma_risk) - cost
    }
}

/// Liquidity weight a sweep uses for `mechanism`.
pub fn effective_rho(mechanism: Mechanism, cfg: &MechanismConfig) -> Result<f64> {
    match mechanism {
        Mechanism::Qmia => Ok(1.0),
        Mechanism::Mixed => Ok(cfg.rho),
        Mechanism::Mut => Ok(0.0),
        Mechanism::Dst => Err(Error::config("dst has no reports to deviate on")),
    }
}
