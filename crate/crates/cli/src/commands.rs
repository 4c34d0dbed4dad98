//! Command implementations. Each returns whether its check passed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use mia_core::audit::{verify_file, AuditKind, AuditLog, Verification};
use mia_core::canonical::{to_canonical_string, ZERO_DIGEST};
use mia_core::mechanism::{dst_allocate, run_auction, Mechanism};
use mia_core::model::{AgentReport, Participant};
use mia_core::quality::{Oracle, QualityReport};
use mia_core::strategy::{run_suite, Suite};
use mia_core::utility::{
    estimate, AgentData, Attribution, Differentiable, EstimatorSpec, LogisticRegression, MarginalEstimate,
    RidgeRegression,
};

use crate::config::load_config;
use crate::input::{check_ids, read_examples, read_jsonl, CorpusLine, DataLine, ReportLine};

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = String::new();
    for item in items {
        out += &to_canonical_string(item)?;
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, to_canonical_string(value)? + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub struct ScoreArgs<'a> {
    pub corpus: &'a Path,
    pub config: Option<&'a Path>,
    pub reference: Option<&'a Path>,
    pub out: &'a Path,
    pub audit_log: &'a Path,
}

pub fn score(a: ScoreArgs) -> Result<Vec<QualityReport>> {
    let cfg = load_config(a.config)?;
    let corpus: Vec<CorpusLine> = read_jsonl(a.corpus)?;
    if corpus.is_empty() {
        bail!("corpus {} has no agents", a.corpus.display());
    }
    let mut oracle_cfg = cfg.oracle;
    oracle_cfg.quality_weights = cfg.mechanism.quality_weights;
    oracle_cfg.novelty_weights = cfg.mechanism.novelty_weights;
    if let Some(path) = a.reference {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        oracle_cfg
            .reference_documents
            .extend(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_owned));
    }
    if oracle_cfg.current_date.is_none() {
        oracle_cfg.current_date = corpus.iter().flat_map(|l| l.documents.iter().map(|d| d.date)).max();
    }
    let oracle = Oracle::new(oracle_cfg)?;
    let reports = corpus
        .iter()
        .map(|line| oracle.score(&line.dataset()).with_context(|| format!("scoring agent {}", line.agent_id)))
        .collect::<Result<Vec<_>>>()?;
    write_jsonl(a.out, &reports)?;
    let mut log = AuditLog::open(a.audit_log)?;
    for r in &reports {
        log.append(AuditKind::QualityScore, r)?;
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ValueFn {
    Logistic,
    Ridge,
}

pub struct EstimateArgs<'a> {
    pub data: &'a Path,
    pub holdout: &'a Path,
    pub base: Option<&'a Path>,
    pub value_fn: ValueFn,
    pub spec: EstimatorSpec,
    pub out: &'a Path,
    pub audit_log: &'a Path,
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    estimate: &'a MarginalEstimate,
    audit: &'a mia_core::utility::EstimateAudit,
}

fn run_estimate<V: Differentiable>(vf: &V, a: &EstimateArgs) -> Result<Vec<MarginalEstimate>> {
    let agents: Vec<AgentData> = read_jsonl::<DataLine>(a.data)?.into_iter().map(Into::into).collect();
    let holdout = read_examples(a.holdout)?;
    let base = match a.base {
        Some(p) => read_examples(p)?,
        None => Vec::new(),
    };
    let problem = Attribution::with_base(vf, &agents, &holdout, &base)?;
    let run = estimate(&problem, a.spec)?;
    write_jsonl(a.out, &run.estimates)?;
    let mut log = AuditLog::open(a.audit_log)?;
    for e in &run.estimates {
        log.append(AuditKind::MarginalEstimate, &EstimateRecord { estimate: e, audit: &run.audit })?;
    }
    Ok(run.estimates)
}

pub fn estimate_cmd(a: EstimateArgs) -> Result<Vec<MarginalEstimate>> {
    match a.value_fn {
        ValueFn::Logistic => run_estimate(&LogisticRegression::default(), &a),
        ValueFn::Ridge => run_estimate(&RidgeRegression::default(), &a),
    }
}

pub struct AuctionArgs<'a> {
    pub reports: &'a Path,
    pub scores: &'a Path,
    pub estimates: &'a Path,
    pub config: Option<&'a Path>,
    pub mechanism: Mechanism,
    pub strict_budget: bool,
    pub out: &'a Path,
    pub audit_log: &'a Path,
}

#[derive(Serialize)]
struct PaymentRow<'a> {
    agent_id: &'a str,
    selected: bool,
    payment: f64,
    share: f64,
    utility: Option<f64>,
}

pub fn csv_path(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

fn write_rows(path: &Path, rows: &[PaymentRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn auction(a: AuctionArgs) -> Result<()> {
    let mut cfg = load_config(a.config)?.mechanism;
    cfg.strict_budget_mode |= a.strict_budget;
    cfg.validate()?;
    let reports: Vec<ReportLine> = read_jsonl(a.reports)?;
    let scores: Vec<QualityReport> = read_jsonl(a.scores)?;
    let estimates: Vec<MarginalEstimate> = read_jsonl(a.estimates)?;
    check_ids(&[
        ("reports", reports.iter().map(|r| r.agent_id.as_str()).collect()),
        ("scores", scores.iter().map(|r| r.agent_id.as_str()).collect()),
        ("estimates", estimates.iter().map(|r| r.agent_id.as_str()).collect()),
    ])?;
    let quality: BTreeMap<&str, f64> = scores.iter().map(|s| (s.agent_id.as_str(), s.composite)).collect();
    let phi: BTreeMap<&str, f64> = estimates.iter().map(|e| (e.agent_id.as_str(), e.rescaled)).collect();
    ensure_parent(a.out)?;

    if a.mechanism == Mechanism::Dst {
        let mut volumes = BTreeMap::new();
        for r in &reports {
            let v = r
                .volume()
                .with_context(|| format!("agent {} has neither token_count nor documents", r.agent_id))?;
            volumes.insert(r.agent_id.clone(), v as f64);
        }
        let owned = |m: &BTreeMap<&str, f64>| m.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let alloc = dst_allocate(&volumes, &owned(&quality), &owned(&phi), &cfg)?;
        write_json(a.out, &alloc)?;
        let rows: Vec<PaymentRow> = reports
            .iter()
            .map(|r| {
                let tokens = alloc.tokens[&r.agent_id];
                PaymentRow {
                    agent_id: &r.agent_id,
                    selected: tokens > 0,
                    payment: tokens as f64,
                    share: alloc.scores[&r.agent_id],
                    utility: None,
                }
            })
            .collect();
        write_rows(&csv_path(a.out), &rows)?;
        AuditLog::open(a.audit_log)?.append(AuditKind::Auction, &alloc)?;
        return Ok(());
    }

    let participants: Vec<Participant> = reports
        .iter()
        .map(|r| {
            let mut report = AgentReport::new(r.agent_id.clone(), r.reported_cost);
            report.true_cost = r.true_cost;
            Participant {
                report,
                quality: quality[r.agent_id.as_str()],
                marginal_utility: phi[r.agent_id.as_str()],
            }
        })
        .collect();
    let outcome = run_auction(a.mechanism, &participants, &cfg)?;
    write_json(a.out, &outcome)?;
    let rows: Vec<PaymentRow> = reports
        .iter()
        .map(|r| PaymentRow {
            agent_id: &r.agent_id,
            selected: outcome.is_winner(&r.agent_id),
            payment: outcome.payment(&r.agent_id),
            share: outcome.share(&r.agent_id),
            utility: outcome.utilities.as_ref().and_then(|u| u.get(&r.agent_id).copied()),
        })
        .collect();
    write_rows(&csv_path(a.out), &rows)?;
    AuditLog::open(a.audit_log)?.append(AuditKind::Auction, &outcome)?;
    Ok(())
}

pub struct SimulateArgs<'a> {
    pub config: Option<&'a Path>,
    pub suite: Suite,
    pub seed: u64,
    pub out: &'a Path,
    pub audit_log: &'a Path,
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Dsic => "dsic",
        Suite::Ir => "ir",
        Suite::Collusion => "collusion",
        Suite::Rho => "rho",
    }
}

/// Returns the summary; the check passes iff it records no violations.
pub fn simulate(a: SimulateArgs) -> Result<mia_core::strategy::SuiteSummary> {
    let cfg = load_config(a.config)?;
    let report = run_suite(a.suite, &cfg.mechanism, &cfg.simulation, a.seed)?;
    fs::create_dir_all(a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let name = suite_name(a.suite);
    let table = a.out.join(format!("{name}_verdicts.csv"));
    let mut w = csv::Writer::from_path(&table).with_context(|| format!("cannot write {}", table.display()))?;
    if report.rows.is_empty() {
        w.write_record([
            "instance", "agent_id", "partner_id", "rho", "report", "partner_report",
            "baseline_utility", "deviation_utility", "gain", "violation", "monotonicity_flag",
        ])?;
    }
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    write_json(&a.out.join(format!("{name}_summary.json")), &report.summary)?;
    AuditLog::open(a.audit_log)?.append(AuditKind::Simulation, &report.summary)?;
    Ok(report.summary)
}

pub fn audit_verify(log: &Path, expect_head: Option<&str>) -> Result<(Verification, bool)> {
    if !log.exists() {
        bail!("audit log {} does not exist", log.display());
    }
    let v = verify_file(log)?;
    let head_ok = match expect_head {
        Some(h) => h == v.head_digest || (h == ZERO_DIGEST && v.records == 0),
        None => true,
    };
    let ok = v.intact && head_ok;
    Ok((v, ok))
}
