//! Data Share Token allocation: a fixed token supply split by weighted
//! volume, quality and impact scores, with a per-agent floor and cap.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentId, MechanismConfig};

/// Absorbs float noise before integer rounding.
const ROUNDING_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DstAllocation {
    pub scores: BTreeMap<AgentId, f64>,
    pub tokens: BTreeMap<AgentId, u64>,
    pub floor_applied: BTreeSet<AgentId>,
    pub cap_applied: BTreeSet<AgentId>,
}

impl DstAllocation {
    pub fn total_tokens(&self) -> u64 {
        self.tokens.values().sum()
    }
}

fn normalize_component(name: &str, values: &BTreeMap<AgentId, f64>) -> Result<Option<BTreeMap<AgentId, f64>>> {
    if let Some((id, v)) = values.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::data(format!(
            "{name} for agent {id} must be finite and non-negative, got {v}"
        )));
    }
    let total: f64 = values.values().sum();
    if total > 0.0 {
        Ok(Some(values.iter().map(|(id, v)| (id.clone(), v / total)).collect()))
    } else {
        Ok(None)
    }
}

/// `DST_i = α·Volume_i + β·Quality_i + γ·Impact_i`, each component
/// normalized to sum 1. A component whose inputs are all zero is dropped and
/// the remaining weights are renormalized.
pub fn dst_scores(
    volumes: &BTreeMap<AgentId, f64>,
    qualities: &BTreeMap<AgentId, f64>,
    impacts: &BTreeMap<AgentId, f64>,
    weights: [f64; 3],
) -> Result<BTreeMap<AgentId, f64>> {
    let ids: BTreeSet<&AgentId> = volumes.keys().collect();
    for (name, m) in [("qualities", qualities), ("impacts", impacts)] {
        let other: BTreeSet<&AgentId> = m.keys().collect();
        if other != ids {
            let orphans: Vec<&str> = ids
                .symmetric_difference(&other)
                .map(|s| s.as_str())
                .collect();
            return Err(Error::data(format!(
                "{name} and volumes cover different agents: {}",
                orphans.join(", ")
            )));
        }
    }

    let components = [
        normalize_component("volume", volumes)?,
        normalize_component("quality", qualities)?,
        normalize_component("impact", impacts)?,
    ];
    let used_weight: f64 = components
        .iter()
        .zip(weights)
        .filter(|(c, _)| c.is_some())
        .map(|(_, w)| w)
        .sum();

    Ok(ids
        .into_iter()
        .map(|id| {
            let score = if used_weight > 0.0 {
                components
                    .iter()
                    .zip(weights)
                    .filter_map(|(c, w)| c.as_ref().map(|c| w / used_weight * c[id]))
                    .sum()
            } else {
                0.0
            };
            (id.clone(), score)
        })
        .collect())
}

/// Solves `Σ clamp(λ·w_i, floor, cap) = total` for λ and returns the clamped
/// allocations. The left side is piecewise linear and non-decreasing in λ.
fn water_fill(weights: &[f64], floor: f64, cap: f64, total: f64) -> Vec<f64> {
    let alloc = |lambda: f64| -> Vec<f64> {
        weights.iter().map(|w| (lambda * w).clamp(floor, cap)).collect()
    };
    let mut breaks: Vec<f64> = weights
        .iter()
        .flat_map(|w| [floor / w, cap / w])
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut lo = 0.0;
    for hi in breaks {
        let at_hi: f64 = alloc(hi).iter().sum();
        if at_hi >= total {
            // Between lo and hi the set of clamped agents is fixed.
            let mid = 0.5 * (lo + hi);
            let (mut fixed, mut free) = (0.0, 0.0);
            for w in weights {
                let x = mid * w;
                if x <= floor {
                    fixed += floor;
                } else if x >= cap {
                    fixed += cap;
                } else {
                    free += w;
                }
            }
            let lambda = if free > 0.0 { ((total - fixed) / free).clamp(lo, hi) } else { hi };
            return alloc(lambda);
        }
        lo = hi;
    }
    alloc(lo)
}

/// Splits `cfg.token_supply` according to `scores` (expected to sum to 1 over
/// positive entries).
pub fn allocate_tokens(scores: &BTreeMap<AgentId, f64>, cfg: &MechanismConfig) -> Result<DstAllocation> {
    let supply = cfg.token_supply;
    let total = supply as f64;
    let n = scores.len();
    if cfg.dst_floor_fraction * n as f64 > 1.0 + 1e-12 {
        return Err(Error::config(format!(
            "token floor {} for {n} agents exceeds the supply",
            cfg.dst_floor_fraction
        )));
    }
    if let Some((id, s)) = scores.iter().find(|(_, s)| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::data(format!("DST score for agent {id} is invalid: {s}")));
    }

    let positive: Vec<(&AgentId, f64)> = scores
        .iter()
        .filter(|(_, s)| **s > 0.0)
        .map(|(id, s)| (id, *s))
        .collect();
    let mut allocation = DstAllocation {
        scores: scores.clone(),
        tokens: scores.keys().map(|id| (id.clone(), 0)).collect(),
        ..Default::default()
    };
    if positive.is_empty() {
        return Ok(allocation);
    }
    if cfg.dst_cap_fraction * (positive.len() as f64) < 1.0 - 1e-12 {
        return Err(Error::config(format!(
            "token cap {} cannot place the whole supply among {} agents",
            cfg.dst_cap_fraction,
            positive.len()
        )));
    }
    let floor = cfg.dst_floor_fraction * total;
    let cap = cfg.dst_cap_fraction * total;
    if floor > cap {
        return Err(Error::config("token floor exceeds token cap"));
    }

    let score_sum: f64 = positive.iter().map(|(_, s)| s).sum();
    let weights: Vec<f64> = positive.iter().map(|(_, s)| total * s / score_sum).collect();
    let real = water_fill(&weights, floor, cap, total);

    let floor_tokens = (floor - ROUNDING_SLACK).ceil().max(0.0) as u64;
    let cap_tokens = (cap + ROUNDING_SLACK).floor() as u64;
    let mut tokens: Vec<u64> = real
        .iter()
        .map(|a| ((a + ROUNDING_SLACK).floor() as u64).clamp(floor_tokens, cap_tokens))
        .collect();
    for (k, ((id, _), w)) in positive.iter().zip(&weights).enumerate() {
        if w * 1.0 < floor && real[k] <= floor + ROUNDING_SLACK && floor > 0.0 {
            allocation.floor_applied.insert((*id).clone());
        }
        if real[k] + ROUNDING_SLACK < *w && real[k] >= cap - ROUNDING_SLACK {
            allocation.cap_applied.insert((*id).clone());
        }
    }

    // Integer remainder, handed out one token at a time in agent-id order.
    let mut assigned: u64 = tokens.iter().sum();
    while assigned < supply {
        let before = assigned;
        for t in tokens.iter_mut() {
            if assigned < supply && *t < cap_tokens {
                *t += 1;
                assigned += 1;
            }
        }
        if assigned == before {
            break;
        }
    }
    while assigned > supply {
        let before = assigned;
        for t in tokens.iter_mut().rev() {
            if assigned > supply && *t > floor_tokens {
                *t -= 1;
                assigned -= 1;
            }
        }
        if assigned == before {
            break;
        }
    }

    for ((id, _), t) in positive.iter().zip(tokens) {
        allocation.tokens.insert((*id).clone(), t);
    }
    Ok(allocation)
}

pub fn dst_allocate(
    volumes: &BTreeMap<AgentId, f64>,
    qualities: &BTreeMap<AgentId, f64>,
    impacts: &BTreeMap<AgentId, f64>,
    cfg: &MechanismConfig,
) -> Result<DstAllocation> {
    cfg.validate()?;
    let scores = dst_scores(volumes, qualities, impacts, cfg.dst_weights)?;
    allocate_tokens(&scores, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(values: &[f64]) -> BTreeMap<AgentId, f64> {
        values
            .iter()
            .enumerate()
            .map(|(k, v)| (format!("a{k}"), *v))
            .collect()
    }

    fn cfg(floor: f64, cap: f64) -> MechanismConfig {
        MechanismConfig {
            dst_floor_fraction: floor,
            dst_cap_fraction: cap,
            token_supply: 100_000,
            ..Default::default()
        }
    }

    #[test]
    fn symmetric_agents_split_evenly() {
        let ones = map(&[1.0; 4]);
        let a = dst_allocate(&ones, &ones, &ones, &cfg(0.0, 1.0)).unwrap();
        assert!(a.tokens.values().all(|&t| t == 25_000));
        assert!(a.floor_applied.is_empty() && a.cap_applied.is_empty());
    }

    #[test]
    fn volume_only_normalization() {
        let c = MechanismConfig {
            dst_weights: [1.0, 0.0, 0.0],
            ..cfg(0.0, 1.0)
        };
        let s = dst_scores(&map(&[100.0, 300.0]), &map(&[1.0, 1.0]), &map(&[1.0, 1.0]), c.dst_weights)
            .unwrap();
        assert_eq!(s["a0"], 0.25);
        assert_eq!(s["a1"], 0.75);
    }

    #[test]
    fn zero_component_is_renormalized_away() {
        let s = dst_scores(&map(&[0.0, 0.0]), &map(&[1.0, 3.0]), &map(&[1.0, 3.0]), [0.5, 0.25, 0.25])
            .unwrap();
        assert!((s["a0"] - 0.25).abs() < 1e-12);
        assert!((s["a1"] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cap_waterfall_two_agents() {
        let scores = map(&[0.9, 0.1]);
        let a = allocate_tokens(&scores, &cfg(0.0, 0.5)).unwrap();
        assert_eq!(a.tokens["a0"], 50_000);
        assert_eq!(a.tokens["a1"], 50_000);
        assert!(a.cap_applied.contains("a0"));
    }

    #[test]
    fn floor_lifts_small_agents() {
        let scores = map(&[0.9995, 0.0005]);
        let a = allocate_tokens(&scores, &cfg(0.01, 1.0)).unwrap();
        assert_eq!(a.tokens["a1"], 1_000);
        assert_eq!(a.tokens["a0"], 99_000);
        assert!(a.floor_applied.contains("a1"));
    }

    #[test]
    fn zero_score_gets_nothing() {
        let scores = map(&[1.0, 0.0]);
        let a = allocate_tokens(&scores, &cfg(0.1, 1.0)).unwrap();
        assert_eq!(a.tokens["a1"], 0);
        assert_eq!(a.tokens["a0"], 100_000);
    }

    #[test]
    fn infeasible_floor_and_cap() {
        let scores = map(&[0.5, 0.5, 0.0]);
        assert!(matches!(allocate_tokens(&scores, &cfg(0.4, 1.0)), Err(Error::Config(_))));
        assert!(matches!(allocate_tokens(&scores, &cfg(0.0, 0.3)), Err(Error::Config(_))));
    }

    #[test]
    fn mismatched_agents_rejected() {
        assert!(dst_scores(&map(&[1.0]), &map(&[1.0, 1.0]), &map(&[1.0]), [1.0, 0.0, 0.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn tokens_conserved_and_bounded(
            raw in prop::collection::vec(0.0f64..1.0, 1..30),
            floor in 0.0f64..0.03,
            cap in 0.05f64..1.0,
            supply in 1_000u64..1_000_000,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let positive = raw.iter().filter(|x| **x > 0.0).count();
            prop_assume!(cap * positive as f64 >= 1.0);
            prop_assume!(floor * raw.len() as f64 <= 1.0 && floor <= cap);
            let scores = map(&raw.iter().map(|x| x / total).collect::<Vec<_>>());
            let c = MechanismConfig { token_supply: supply, ..cfg(floor, cap) };
            let a = allocate_tokens(&scores, &c).unwrap();
            let n = raw.len() as u64;
            let sum = a.total_tokens();
            prop_assert!(sum <= supply && sum + n >= supply, "sum {} supply {}", sum, supply);
            for (id, t) in &a.tokens {
                prop_assert!((*t as f64) <= cap * supply as f64 + 1e-6);
                if scores[id] > 0.0 {
                    prop_assert!((*t as f64) >= floor * supply as f64 - 1e-6);
                }
            }
        }
    }
}
