use crate::error::{Error, Result};
use crate::model::{ConcaveTransform, MechanismConfig, ScoredAgent};

/// Denominator of the virtual cost: `q^η·(φ̂+κ)^γ`, or `√(q·φ̂)` under the
/// concave transform.
pub fn score_denominator(quality: f64, marginal_utility: f64, cfg: &MechanismConfig) -> f64 {
    match cfg.concave_transform {
        ConcaveTransform::None => {
            quality.powf(cfg.eta) * (marginal_utility + cfg.kappa).powf(cfg.gamma_exp)
        }
        ConcaveTransform::Sqrt => (quality * marginal_utility).sqrt(),
    }
}

/// Regularized virtual cost `ĉ / (q^η·(φ̂+κ)^γ)`.
pub fn virtual_cost(
    agent_id: &str,
    reported_cost: f64,
    quality: f64,
    marginal_utility: f64,
    cfg: &MechanismConfig,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&quality) {
        return Err(Error::data(format!(
            "agent {agent_id}: quality {quality} outside [0, 1]"
        )));
    }
    if !(marginal_utility >= 0.0 && marginal_utility.is_finite()) {
        return Err(Error::data(format!(
            "agent {agent_id}: marginal utility {marginal_utility} must be finite and non-negative"
        )));
    }
    let denominator = score_denominator(quality, marginal_utility, cfg);
    if !(denominator > 0.0 && denominator.is_finite()) {
        return Err(Error::degenerate(
            agent_id,
            format!(
                "virtual cost denominator is {denominator} (q = {quality}, phi = {marginal_utility}, kappa = {})",
                cfg.kappa
            ),
        ));
    }
    Ok(reported_cost / denominator)
}

pub fn score_agent(
    agent_id: &str,
    reported_cost: f64,
    quality: f64,
    marginal_utility: f64,
    cfg: &MechanismConfig,
) -> Result<ScoredAgent> {
    Ok(ScoredAgent {
        agent_id: agent_id.to_owned(),
        reported_cost,
        quality,
        marginal_utility,
        virtual_cost: virtual_cost(agent_id, reported_cost, quality, marginal_utility, cfg)?,
    })
}

/// Quality-weighted marginal payment `Γ·q^η·(φ̂+κ)^γ`.
pub fn qwmp_payment(quality: f64, marginal_utility: f64, cfg: &MechanismConfig) -> f64 {
    cfg.qwmp_normalizer * quality.powf(cfg.eta) * (marginal_utility + cfg.kappa).powf(cfg.gamma_exp)
}
