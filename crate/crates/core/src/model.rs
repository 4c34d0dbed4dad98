//! Domain types shared by every mechanism, and seeded instance generation.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub type AgentId = String;

/// Splits text into tokens: NFC normalization, lowercasing, whitespace split.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    normalized.split_whitespace().map(str::to_owned).collect()
}

pub fn token_count(text: &str) -> u64 {
    tokenize(text).len() as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    pub date: NaiveDate,
}

impl Document {
    pub fn new(text: impl Into<String>, date: NaiveDate) -> Self {
        Self {
            text: text.into(),
            date,
        }
    }
}

/// An agent's submitted corpus.
///
/// `token_count` is always derived from the documents, so it cannot disagree
/// with the tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct DatasetDescriptor {
    id: String,
    documents: Vec<Document>,
    metadata: BTreeMap<String, Option<String>>,
    token_count: u64,
}

#[derive(Deserialize)]
struct RawDataset {
    id: String,
    documents: Vec<Document>,
    #[serde(default)]
    metadata: BTreeMap<String, Option<String>>,
    token_count: Option<u64>,
}

impl TryFrom<RawDataset> for DatasetDescriptor {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        let ds = DatasetDescriptor::new(raw.id, raw.documents, raw.metadata);
        match raw.token_count {
            Some(n) if n != ds.token_count => Err(Error::data(format!(
                "dataset {}: token_count {} does not match tokenizer count {}",
                ds.id, n, ds.token_count
            ))),
            _ => Ok(ds),
        }
    }
}

impl DatasetDescriptor {
    pub fn new(
        id: impl Into<String>,
        documents: Vec<Document>,
        metadata: BTreeMap<String, Option<String>>,
    ) -> Self {
        let token_count = documents.iter().map(|d| token_count(&d.text)).sum();
        Self {
            id: id.into(),
            documents,
            metadata,
            token_count,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn doc_dates(&self) -> Vec<NaiveDate> {
        self.documents.iter().map(|d| d.date).collect()
    }

    pub fn metadata(&self) -> &BTreeMap<String, Option<String>> {
        &self.metadata
    }

    pub fn token_count(&self) -> u64 {
        self.token_count
    }
}

/// An agent's strategic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent_id: AgentId,
    pub reported_cost: f64,
    /// Identifier of the submitted dataset.
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_cost: Option<f64>,
}

impl AgentReport {
    pub fn new(agent_id: impl Into<String>, reported_cost: f64) -> Self {
        let agent_id = agent_id.into();
        Self {
            dataset: agent_id.clone(),
            agent_id,
            reported_cost,
            true_cost: None,
        }
    }

    pub fn with_true_cost(mut self, cost: f64) -> Self {
        self.true_cost = Some(cost);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reported_cost >= 0.0 && self.reported_cost.is_finite()) {
            return Err(Error::data(format!(
                "agent {}: reported cost must be a finite non-negative number, got {}",
                self.agent_id, self.reported_cost
            )));
        }
        if let Some(c) = self.true_cost {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::data(format!(
                    "agent {}: true cost must be a finite non-negative number, got {c}",
                    self.agent_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Lexicographically smaller agent id first.
    #[default]
    AscendingAgentId,
}

/// Concave utility applied to `q·φ̂` in the risk-sensitive virtual cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcaveTransform {
    #[default]
    None,
    Sqrt,
}

/// Planner parameters for every mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechanismConfig {
    pub eta: f64,
    pub gamma_exp: f64,
    pub kappa: f64,
    /// Liquidity factor: share of the reward paid as immediate money.
    pub rho: f64,
    pub lambda: f64,
    pub budget: f64,
    pub utility_pool: f64,
    pub qwmp_normalizer: f64,
    /// (volume, quality, impact) weights.
    pub dst_weights: [f64; 3],
    /// (cleanliness, diversity, novelty, metadata) weights.
    pub quality_weights: [f64; 4],
    /// (recency, uniqueness) weights.
    pub novelty_weights: [f64; 2],
    pub token_supply: u64,
    pub dst_floor_fraction: f64,
    pub dst_cap_fraction: f64,
    pub tie_break: TieBreak,
    /// Absolute resolution of the threshold search; `None` means `1e-6 · budget`.
    pub payment_grid_resolution: Option<f64>,
    pub strict_budget_mode: bool,
    pub concave_transform: ConcaveTransform,
}

impl Default for MechanismConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            gamma_exp: 1.0,
            kappa: 0.0,
            rho: 1.0,
            lambda: 1.0,
            budget: 10.0,
            utility_pool: 10.0,
            qwmp_normalizer: 1.0,
            dst_weights: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            quality_weights: [0.25; 4],
            novelty_weights: [0.5, 0.5],
            token_supply: 100_000,
            dst_floor_fraction: 0.001,
            dst_cap_fraction: 0.2,
            tie_break: TieBreak::AscendingAgentId,
            payment_grid_resolution: None,
            strict_budget_mode: false,
            concave_transform: ConcaveTransform::None,
        }
    }
}

const WEIGHT_TOLERANCE: f64 = 1e-9;

fn check_weights(name: &str, weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::config(format!("{name} must be finite and non-negative")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::config(format!("{name} must sum to 1, got {sum}")));
    }
    Ok(())
}

fn check_non_negative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite and non-negative, got {value}")))
    }
}

impl MechanismConfig {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("eta", self.eta)?;
        check_non_negative("gamma_exp", self.gamma_exp)?;
        check_non_negative("kappa", self.kappa)?;
        check_non_negative("lambda", self.lambda)?;
        check_non_negative("budget", self.budget)?;
        check_non_negative("utility_pool", self.utility_pool)?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.qwmp_normalizer > 0.0 && self.qwmp_normalizer.is_finite()) {
            return Err(Error::config("qwmp_normalizer must be positive"));
        }
        check_weights("dst_weights", &self.dst_weights)?;
        check_weights("quality_weights", &self.quality_weights)?;
        check_weights("novelty_weights", &self.novelty_weights)?;
        if self.token_supply == 0 {
            return Err(Error::config("token_supply must be positive"));
        }
        if !(0.0..1.0).contains(&self.dst_floor_fraction) {
            return Err(Error::config("dst_floor_fraction must lie in [0, 1)"));
        }
        if !(self.dst_cap_fraction > 0.0 && self.dst_cap_fraction <= 1.0) {
            return Err(Error::config("dst_cap_fraction must lie in (0, 1]"));
        }
        if let Some(r) = self.payment_grid_resolution {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config("payment_grid_resolution must be positive"));
            }
        }
        Ok(())
    }

    /// Resolution used by the critical-payment search.
    pub fn grid_resolution(&self) -> f64 {
        self.payment_grid_resolution
            .unwrap_or(1e-6 * self.budget)
            .max(f64::MIN_POSITIVE)
    }
}

/// An agent with every signal the auction ranks on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAgent {
    pub agent_id: AgentId,
    pub reported_cost: f64,
    pub quality: f64,
    pub marginal_utility: f64,
    pub virtual_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub agent_id: AgentId,
    /// A report at which the agent wins.
    pub winning_report: f64,
    /// A smaller report at which it loses.
    pub losing_report: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub payment_sum: f64,
    pub payment_overrun: bool,
    pub monotonicity_violations: Vec<MonotonicityViolation>,
    pub dropped_for_budget: Vec<AgentId>,
}

/// Result of running a mechanism. Maps cover every participating agent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    /// Winners in selection order.
    pub winners: Vec<AgentId>,
    pub payments: BTreeMap<AgentId, f64>,
    pub shares: BTreeMap<AgentId, f64>,
    /// Present only when true costs are known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<BTreeMap<AgentId, f64>>,
    pub diagnostics: Diagnostics,
}

impl AuctionOutcome {
    pub fn is_winner(&self, agent_id: &str) -> bool {
        self.winners.iter().any(|w| w == agent_id)
    }

    pub fn payment(&self, agent_id: &str) -> f64 {
        self.payments.get(agent_id).copied().unwrap_or(0.0)
    }

    pub fn share(&self, agent_id: &str) -> f64 {
        self.shares.get(agent_id).copied().unwrap_or(0.0)
    }
}

/// Closed real interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::config(format!(
                "{name} interval [{}, {}] is invalid",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

/// An agent's report joined with its verifiable quality and marginal-utility signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub report: AgentReport,
    pub quality: f64,
    pub marginal_utility: f64,
}

impl Participant {
    pub fn agent_id(&self) -> &str {
        &self.report.agent_id
    }

    pub fn true_cost(&self) -> f64 {
        self.report.true_cost.unwrap_or(self.report.reported_cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub cost_range: Interval,
    pub quality_range: Interval,
    pub phi_range: Interval,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            cost_range: Interval::new(1.0, 10.0),
            quality_range: Interval::new(0.1, 1.0),
            phi_range: Interval::new(0.01, 1.0),
        }
    }
}

/// Draws `n` truthful agents. Identical arguments give identical instances.
pub fn generate_instance(seed: u64, n: usize, spec: &InstanceSpec) -> Result<Vec<Participant>> {
    if n == 0 {
        return Err(Error::config("instance size must be at least 1"));
    }
    spec.cost_range.validate("cost")?;
    spec.quality_range.validate("quality")?;
    spec.phi_range.validate("phi")?;
    if spec.cost_range.lo < 0.0 {
        return Err(Error::config("costs must be non-negative"));
    }
    if spec.quality_range.lo < 0.0 || spec.quality_range.hi > 1.0 {
        return Err(Error::config("quality range must lie within [0, 1]"));
    }
    if spec.phi_range.lo < 0.0 {
        return Err(Error::config("phi range must be non-negative"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (n - 1).to_string().len().max(2);
    Ok((0..n)
        .map(|k| {
            let cost = spec.cost_range.sample(&mut rng);
            let quality = spec.quality_range.sample(&mut rng);
            let marginal_utility = spec.phi_range.sample(&mut rng);
            Participant {
                report: AgentReport::new(format!("a{k:0width$}"), cost).with_true_cost(cost),
                quality,
                marginal_utility,
            }
        })
        .collect())
}

/// Planner objective `V − λ·Σp` over the selected agents.
pub fn evaluate_surplus(
    selection: &[AgentId],
    payments: &BTreeMap<AgentId, f64>,
    model_value: f64,
    lambda: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for id in selection {
        total += payments
            .get(id)
            .ok_or_else(|| Error::data(format!("no payment recorded for agent {id}")))?;
    }
    Ok(model_value - lambda * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenizer_normalizes_and_lowercases() {
        // "e" + combining acute composes to the same token as precomposed "é".
        assert_eq!(tokenize("Cafe\u{301}  BAR\tbaz\n"), vec!["café", "bar", "baz"]);
        assert_eq!(tokenize("café"), tokenize("Cafe\u{301}"));
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn dataset_token_count_matches_documents() {
        let d = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let ds = DatasetDescriptor::new(
            "x",
            vec![Document::new("one two three", d), Document::new("four", d)],
            BTreeMap::new(),
        );
        assert_eq!(ds.token_count(), 4);
        assert_eq!(ds.doc_dates().len(), ds.documents().len());
    }

    #[test]
    fn dataset_rejects_wrong_token_count() {
        let json = r#"{"id":"x","documents":[{"text":"a b","date":"2024-01-01"}],"token_count":5}"#;
        assert!(serde_json::from_str::<DatasetDescriptor>(json).is_err());
        let json = r#"{"id":"x","documents":[{"text":"a b","date":"2024-01-01"}],"token_count":2}"#;
        assert!(serde_json::from_str::<DatasetDescriptor>(json).is_ok());
    }

    #[test]
    fn default_config_is_valid() {
        MechanismConfig::default().validate().unwrap();
        let mut cfg = MechanismConfig::default();
        cfg.rho = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = MechanismConfig::default();
        cfg.quality_weights = [0.3, 0.3, 0.3, 0.3];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = InstanceSpec::default();
        assert_eq!(
            generate_instance(1, 3, &spec).unwrap(),
            generate_instance(1, 3, &spec).unwrap()
        );
        assert_ne!(
            generate_instance(1, 3, &spec).unwrap(),
            generate_instance(2, 3, &spec).unwrap()
        );
    }

    #[test]
    fn generation_rejects_bad_arguments() {
        let spec = InstanceSpec::default();
        assert!(matches!(generate_instance(1, 0, &spec), Err(Error::Config(_))));
        let bad = InstanceSpec {
            cost_range: Interval::new(5.0, 1.0),
            ..spec
        };
        assert!(matches!(generate_instance(1, 3, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn generated_fields_in_range() {
        let spec = InstanceSpec {
            cost_range: Interval::new(1.0, 10.0),
            quality_range: Interval::new(0.1, 1.0),
            phi_range: Interval::new(0.01, 1.0),
        };
        let agents = generate_instance(7, 12, &spec).unwrap();
        assert_eq!(agents.len(), 12);
        for a in &agents {
            assert!(spec.cost_range.contains(a.report.reported_cost));
            assert!(spec.quality_range.contains(a.quality));
            assert!(spec.phi_range.contains(a.marginal_utility));
            assert_eq!(a.report.true_cost, Some(a.report.reported_cost));
        }
    }

    #[test]
    fn surplus_substitution() {
        let sel = vec!["a".to_string(), "b".to_string()];
        let pay: BTreeMap<_, _> = [("a".to_string(), 1.5), ("b".to_string(), 2.5)].into();
        assert_eq!(evaluate_surplus(&sel, &pay, 10.0, 1.0).unwrap(), 6.0);
        assert_eq!(evaluate_surplus(&sel, &pay, 10.0, 0.0).unwrap(), 10.0);
        let pay: BTreeMap<_, _> = [("a".to_string(), 0.2), ("b".to_string(), 0.3)].into();
        assert!((evaluate_surplus(&sel, &pay, 0.8, 0.2).unwrap() - 0.7).abs() < 1e-12);
        let missing = vec!["c".to_string()];
        assert!(matches!(
            evaluate_surplus(&missing, &pay, 1.0, 1.0),
            Err(Error::Data(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn generated_values_respect_ranges(
            seed in any::<u64>(),
            n in 1usize..20,
            c_lo in 0.0f64..5.0, c_w in 0.0f64..5.0,
            q_lo in 0.0f64..0.5, q_w in 0.0f64..0.5,
            p_lo in 0.0f64..1.0, p_w in 0.0f64..2.0,
        ) {
            let spec = InstanceSpec {
                cost_range: Interval::new(c_lo, c_lo + c_w),
                quality_range: Interval::new(q_lo, q_lo + q_w),
                phi_range: Interval::new(p_lo, p_lo + p_w),
            };
            let agents = generate_instance(seed, n, &spec).unwrap();
            prop_assert_eq!(agents.len(), n);
            for a in &agents {
                prop_assert!(spec.cost_range.contains(a.report.reported_cost));
                prop_assert!(spec.quality_range.contains(a.quality));
                prop_assert!(spec.phi_range.contains(a.marginal_utility));
            }
        }
    }
}
