//! Seeded batches of instances run through one strategy check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::{collusion_probe, default_tolerance, dsic_sweep_rhos, rho_sweep};
use super::ir_audit;
use crate::error::{Error, Result};
use crate::mechanism::{mixed_mia, Mechanism};
use crate::model::{generate_instance, AgentId, InstanceSpec, MechanismConfig, Participant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Dsic,
    Ir,
    Collusion,
    Rho,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dsic" => Ok(Suite::Dsic),
            "ir" => Ok(Suite::Ir),
            "collusion" => Ok(Suite::Collusion),
            "rho" => Ok(Suite::Rho),
            other => Err(Error::config(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub instances: usize,
    pub min_agents: usize,
    pub max_agents: usize,
    pub grid_steps: usize,
    /// Liquidity weights to test; the mechanism config's `rho` when absent.
    pub rhos: Option<Vec<f64>>,
    pub collusion_grid_steps: usize,
    pub collusion_pairs_per_instance: usize,
    /// Defaults to `1e-9` plus one payment-grid step.
    pub tolerance: Option<f64>,
    pub instance_spec: InstanceSpec,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            instances: 500,
            min_agents: 2,
            max_agents: 10,
            grid_steps: 200,
            rhos: None,
            collusion_grid_steps: 50,
            collusion_pairs_per_instance: 1,
            tolerance: None,
            instance_spec: InstanceSpec::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::config("simulation needs at least one instance"));
        }
        if self.min_agents < 2 || self.min_agents > self.max_agents {
            return Err(Error::config("need 2 <= min_agents <= max_agents"));
        }
        if self.grid_steps < 2 || self.collusion_grid_steps < 2 {
            return Err(Error::config("grids need at least 2 steps"));
        }
        if let Some(r) = self.rhos.iter().flatten().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::config(format!("rho {r} outside [0, 1]")));
        }
        Ok(())
    }
}

/// One line of a verdict table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub instance: usize,
    pub agent_id: AgentId,
    pub partner_id: Option<AgentId>,
    pub rho: Option<f64>,
    pub report: Option<f64>,
    pub partner_report: Option<f64>,
    pub baseline_utility: Option<f64>,
    pub deviation_utility: Option<f64>,
    pub gain: f64,
    pub violation: bool,
    pub monotonicity_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub seed: u64,
    pub instances: usize,
    pub records: usize,
    /// Violations on instances that passed the monotonicity check.
    pub violations: usize,
    pub flagged_instances: usize,
    pub flagged_violations: usize,
    pub monotonicity_rate: f64,
    pub tolerance: f64,
    pub max_gain: f64,
    pub worst: Option<SuiteRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub summary: SuiteSummary,
    pub rows: Vec<SuiteRow>,
}

/// The seeded instances a suite runs over, with their per-instance seeds.
pub fn simulation_instances(seed: u64, sim: &SimulationConfig) -> Result<Vec<(Vec<Participant>, u64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sim.instances)
        .map(|_| {
            let n = rng.gen_range(sim.min_agents..=sim.max_agents);
            let s = rng.gen::<u64>();
            Ok((generate_instance(s, n, &sim.instance_spec)?, s))
        })
        .collect()
}

fn row(instance: usize, agent_id: &str) -> SuiteRow {
    SuiteRow {
        instance,
        agent_id: agent_id.to_owned(),
        partner_id: None,
        rho: None,
        report: None,
        partner_report: None,
        baseline_utility: None,
        deviation_utility: None,
        gain: 0.0,
        violation: false,
        monotonicity_flag: false,
    }
}

fn run_instance(
    suite: Suite,
    k: usize,
    instance: &[Participant],
    instance_seed: u64,
    cfg: &MechanismConfig,
    sim: &SimulationConfig,
    rhos: &[f64],
    tolerance: f64,
) -> Result<Vec<SuiteRow>> {
    match suite {
        Suite::Dsic => Ok(dsic_sweep_rhos(instance, cfg, rhos, sim.grid_steps, tolerance)?
            .into_iter()
            .flat_map(|(rho, verdicts)| {
                verdicts.into_iter().map(move |v| SuiteRow {
                    rho: Some(rho),
                    report: Some(v.best_deviation_report),
                    baseline_utility: Some(v.truthful_utility),
                    deviation_utility: Some(v.best_deviation_utility),
                    gain: v.best_deviation_utility - v.truthful_utility,
                    violation: v.violation,
                    monotonicity_flag: v.monotonicity_flag,
                    ..row(k, &v.agent_id)
                })
            })
            .collect()),
        Suite::Ir => {
            let mut rows = Vec::new();
            for &rho in rhos {
                let outcome = mixed_mia(instance, &MechanismConfig { rho, ..cfg.clone() })?;
                rows.extend(ir_audit(&outcome)?.into_iter().map(|v| SuiteRow {
                    rho: Some(rho),
                    baseline_utility: Some(v.utility),
                    gain: v.utility,
                    violation: true,
                    monotonicity_flag: !outcome.diagnostics.monotonicity_violations.is_empty(),
                    ..row(k, &v.agent_id)
                }));
            }
            Ok(rows)
        }
        Suite::Collusion => {
            let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
            let mut rows = Vec::new();
            for &rho in rhos {
                let c = MechanismConfig { rho, ..cfg.clone() };
                for _ in 0..sim.collusion_pairs_per_instance {
                    let picked = rand::seq::index::sample(&mut rng, instance.len(), 2);
                    let pair = (picked.index(0), picked.index(1));
                    let rec = collusion_probe(instance, pair, Mechanism::Mixed, &c, sim.collusion_grid_steps)?;
                    rows.push(SuiteRow {
                        partner_id: Some(rec.pair.1.clone()),
                        rho: Some(rho),
                        report: Some(rec.profile.0),
                        partner_report: Some(rec.profile.1),
                        gain: rec.joint_gain,
                        violation: rec.joint_gain > tolerance,
                        ..row(k, &rec.pair.0)
                    });
                }
            }
            Ok(rows)
        }
        Suite::Rho => Ok(rho_sweep(instance, cfg, rhos)?
            .into_iter()
            .map(|c| {
                let slope_gap = if c.winner { (c.slope - c.preference_slope).abs() } else { 0.0 };
                let gap = c.max_affine_deviation.max(slope_gap);
                SuiteRow {
                    baseline_utility: c.utilities.first().copied(),
                    deviation_utility: c.utilities.last().copied(),
                    gain: gap,
                    violation: gap > 1e-9,
                    ..row(k, &c.agent_id)
                }
            })
            .collect()),
    }
}

/// Runs `suite` over `sim.instances` seeded instances.
pub fn run_suite(suite: Suite, cfg: &MechanismConfig, sim: &SimulationConfig, seed: u64) -> Result<SuiteReport> {
    cfg.validate()?;
    sim.validate()?;
    let rhos = match (&sim.rhos, suite) {
        (Some(r), _) => r.clone(),
        (None, Suite::Rho) => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        (None, _) => vec![cfg.rho],
    };
    let tolerance = sim.tolerance.unwrap_or_else(|| default_tolerance(cfg));
    let per_instance = simulation_instances(seed, sim)?
        .par_iter()
        .enumerate()
        .map(|(k, (inst, s))| run_instance(suite, k, inst, *s, cfg, sim, &rhos, tolerance))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = SuiteSummary {
        suite,
        seed,
        instances: sim.instances,
        records: 0,
        violations: 0,
        flagged_instances: 0,
        flagged_violations: 0,
        monotonicity_rate: 0.0,
        tolerance,
        max_gain: f64::NEG_INFINITY,
        worst: None,
    };
    for rows in &per_instance {
        let flagged = rows.iter().any(|r| r.monotonicity_flag);
        summary.flagged_instances += usize::from(flagged);
        for r in rows {
            summary.records += 1;
            match (r.violation, flagged) {
                (true, false) => summary.violations += 1,
                (true, true) => summary.flagged_violations += 1,
                _ => {}
            }
            if r.gain > summary.max_gain {
                summary.max_gain = r.gain;
                summary.worst = Some(r.clone());
            }
        }
    }
    if summary.records == 0 {
        summary.max_gain = 0.0;
    }
    summary.monotonicity_rate = summary.flagged_instances as f64 / sim.instances as f64;
    Ok(SuiteReport {
        summary,
        rows: per_instance.into_iter().flatten().collect(),
    })
}
