//! Greedy budget-constrained selection in ascending virtual-cost order.

use std::cmp::Ordering;

use crate::model::{MechanismConfig, ScoredAgent, TieBreak};

fn rank_cmp(psi_a: f64, id_a: &str, psi_b: f64, id_b: &str, tie: TieBreak) -> Ordering {
    psi_a.total_cmp(&psi_b).then_with(|| match tie {
        TieBreak::AscendingAgentId => id_a.cmp(id_b),
    })
}

/// Indices of `agents` in ranking order: ascending virtual cost, ties by the
/// configured rule.
pub fn ranking(agents: &[ScoredAgent], cfg: &MechanismConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..agents.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&agents[a], &agents[b]);
        rank_cmp(x.virtual_cost, &x.agent_id, y.virtual_cost, &y.agent_id, cfg.tie_break)
    });
    order
}

/// Greedy prefix selection: walk the ranking, admit while the cumulative
/// reported cost stays within budget, stop at the first agent that does not
/// fit. Returns indices in selection order.
pub fn qmia_select(agents: &[ScoredAgent], cfg: &MechanismConfig) -> Vec<usize> {
    qmia_select_capped(agents, cfg, None)
}

/// [`qmia_select`] admitting at most `max_winners` agents.
pub fn qmia_select_capped(
    agents: &[ScoredAgent],
    cfg: &MechanismConfig,
    max_winners: Option<usize>,
) -> Vec<usize> {
    let mut selected = Vec::new();
    let mut spent = 0.0;
    for idx in ranking(agents, cfg) {
        if max_winners.is_some_and(|m| selected.len() >= m) {
            break;
        }
        let cost = agents[idx].reported_cost;
        if spent + cost <= cfg.budget {
            selected.push(idx);
            spent += cost;
        } else {
            break;
        }
    }
    selected
}

/// Whether agent `idx` would be selected if it reported `report` (virtual
/// cost `report / denominator`) with everyone else fixed.
///
/// Equivalent to running [`qmia_select_capped`] on the modified profile: with
/// non-negative costs every shorter prefix fits whenever the prefix ending at
/// the agent fits, so only that one sum matters.
pub fn wins_with_report(
    agents: &[ScoredAgent],
    idx: usize,
    report: f64,
    denominator: f64,
    cfg: &MechanismConfig,
    max_winners: Option<usize>,
) -> bool {
    let me = &agents[idx];
    let psi = report / denominator;
    let mut ahead = 0usize;
    let mut spent = report;
    for (j, other) in agents.iter().enumerate() {
        if j == idx {
            continue;
        }
        if rank_cmp(other.virtual_cost, &other.agent_id, psi, &me.agent_id, cfg.tie_break)
            == Ordering::Less
        {
            ahead += 1;
            spent += other.reported_cost;
        }
    }
    spent <= cfg.budget && max_winners.map_or(true, |m| ahead < m)
}
