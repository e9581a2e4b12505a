//! Seeded batches of random instances run through the transport verifiers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_order::same_dim;
use crate::measures::ProbabilityMeasure;
use crate::operations::{ExponentQuadruple, LatticeOperation};
use crate::random::{self, DbmFlavor};
use crate::report::{Outcome, VerificationReport, Witness};
use crate::verify;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SuiteCheck {
    Pointwise,
    PBound,
    Entropy,
    Fiber,
    Marginals,
    Dbm,
    LogLaplace,
}

impl SuiteCheck {
    pub const ALL: [SuiteCheck; 7] = [
        SuiteCheck::Pointwise,
        SuiteCheck::PBound,
        SuiteCheck::Entropy,
        SuiteCheck::Fiber,
        SuiteCheck::Marginals,
        SuiteCheck::Dbm,
        SuiteCheck::LogLaplace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteCheck::Pointwise => "pointwise",
            SuiteCheck::PBound => "p-bound",
            SuiteCheck::Entropy => "entropy",
            SuiteCheck::Fiber => "fiber",
            SuiteCheck::Marginals => "marginals",
            SuiteCheck::Dbm => "dbm",
            SuiteCheck::LogLaplace => "log-laplace",
        }
    }

    /// Parses a comma-separated list, dropping duplicates and keeping the given order.
    pub fn parse_list(csv: &str) -> Result<Vec<SuiteCheck>> {
        let mut out = Vec::new();
        for part in csv.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let c: SuiteCheck = part.parse()?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("no checks requested".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for SuiteCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteCheck {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('_', "-");
        SuiteCheck::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown check {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    pub instances: u64,
    pub dim: usize,
    pub op: LatticeOperation,
    /// Fixed exponents; random valid exponents per instance when `None`.
    pub exponents: Option<ExponentQuadruple>,
    pub checks: Vec<SuiteCheck>,
    pub tolerance: f64,
    /// Box radius for the operation checks run by `dbm`.
    pub radius: u32,
}

/// One line of suite output.
#[derive(Clone, Debug, Serialize)]
pub struct InstanceResult {
    pub kind: &'static str,
    pub index: u64,
    pub passed: bool,
    pub exponents: [String; 4],
    pub mu: ProbabilityMeasure,
    pub nu: ProbabilityMeasure,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub reports: Vec<VerificationReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckCount {
    pub verified: u64,
    pub violated: u64,
    pub inapplicable: u64,
}

/// Last line of suite output.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub kind: &'static str,
    pub seed: u64,
    pub dim: usize,
    pub operation: String,
    pub checks: Vec<&'static str>,
    pub instances: u64,
    pub passed: u64,
    pub failed: u64,
    pub per_check: BTreeMap<&'static str, CheckCount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_log_p: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub operation_reports: Vec<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<InstanceResult>,
}

impl SuiteSummary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Runs every instance in index order, handing each result to `sink` before
/// folding it into the summary.
pub fn run_suite(config: &SuiteConfig, mut sink: impl FnMut(&InstanceResult)) -> Result<SuiteSummary> {
    same_dim(config.dim, config.op.dim())?;
    let op_reports = if config.checks.contains(&SuiteCheck::Dbm) { config.op.check_all(config.radius) } else { Vec::new() };
    let mut summary = SuiteSummary {
        kind: "summary",
        seed: config.seed,
        dim: config.dim,
        operation: format!("{:?}", config.op),
        checks: config.checks.iter().map(|c| c.as_str()).collect(),
        instances: config.instances,
        passed: 0,
        failed: 0,
        per_check: config.checks.iter().map(|c| (c.as_str(), CheckCount::default())).collect(),
        worst_gap: None,
        worst_log_p: None,
        operation_reports: op_reports.clone(),
        first_failure: None,
    };
    for index in 0..config.instances {
        let result = run_instance(config, &op_reports, index)?;
        sink(&result);
        for (check, report) in config.checks.iter().zip(&result.reports) {
            let c = summary.per_check.get_mut(check.as_str()).expect("check listed");
            match report.outcome {
                Outcome::Verified => c.verified += 1,
                Outcome::Violated => c.violated += 1,
                Outcome::Inapplicable => c.inapplicable += 1,
            }
        }
        if let Some(g) = result.gap {
            summary.worst_gap = Some(summary.worst_gap.map_or(g, |w: f64| w.min(g)));
        }
        if let Some(l) = result.log_p {
            summary.worst_log_p = Some(summary.worst_log_p.map_or(l, |w: f64| w.max(l)));
        }
        if result.passed {
            summary.passed += 1;
        } else {
            summary.failed += 1;
            if summary.first_failure.is_none() {
                summary.first_failure = Some(result);
            }
        }
    }
    Ok(summary)
}

/// Instance `index` of the suite: one report per requested check, in order.
pub fn run_instance(config: &SuiteConfig, op_reports: &[VerificationReport], index: u64) -> Result<InstanceResult> {
    let inst = random::instance(config.seed, index, config.dim);
    let e = config.exponents.clone().unwrap_or(inst.exponents);
    let op = &config.op;
    let needs_transport = config
        .checks
        .iter()
        .any(|c| matches!(c, SuiteCheck::Pointwise | SuiteCheck::PBound | SuiteCheck::Entropy | SuiteCheck::Fiber | SuiteCheck::Marginals));
    let knothe = if needs_transport { Some(verify::default_coupling(&inst.mu, &inst.nu, op)?) } else { None };
    let transport = match &knothe {
        Some(k) if config.checks.iter().any(|c| matches!(c, SuiteCheck::Pointwise | SuiteCheck::PBound | SuiteCheck::Entropy)) => {
            Some(verify::transport_reports(&k.coupling, op, &e, config.tolerance)?)
        }
        _ => None,
    };
    let mut reports = Vec::with_capacity(config.checks.len());
    let (mut log_p, mut gap) = (None, None);
    for check in &config.checks {
        let report = match check {
            SuiteCheck::Pointwise => transport.as_ref().expect("computed").pointwise.clone(),
            SuiteCheck::PBound => {
                let t = transport.as_ref().expect("computed");
                log_p = Some(t.log_p);
                t.p_bound.clone()
            }
            SuiteCheck::Entropy => {
                let t = transport.as_ref().expect("computed");
                gap = Some(t.gap);
                t.entropy.clone()
            }
            SuiteCheck::Fiber => {
                let k = knothe.as_ref().expect("computed");
                if op.decomposition().num_blocks() == 1 {
                    k.coupling.check_fiber_structure(op)
                } else {
                    k.check_fiber_structure(op)
                }
            }
            SuiteCheck::Marginals => {
                let pi = &knothe.as_ref().expect("computed").coupling;
                if pi.has_exact_marginals() && pi.left() == &inst.mu && pi.right() == &inst.nu {
                    VerificationReport::verified("marginals")
                } else {
                    VerificationReport::violated("marginals", Witness::Masses { values: Vec::new() })
                        .with_note("coupling projections differ from the input measures")
                }
            }
            SuiteCheck::Dbm => {
                let flavor = DbmFlavor::ALL[(index % 3) as usize];
                let q = random::dbm_quadruple(config.seed, index, op, &e, flavor)?;
                let mut r = verify::verify_dbm_given(&q, &e, op, op_reports)?;
                r.subreports.drain(..op_reports.len().min(r.subreports.len()));
                r.with_note(format!("{flavor:?} quadruple"))
            }
            SuiteCheck::LogLaplace => {
                let phi = random::phi(config.seed, index, config.dim);
                verify::log_laplace_gap(&phi, config.seed ^ index.rotate_left(32), config.tolerance)?.1
            }
        };
        reports.push(report);
    }
    let passed = reports.iter().all(VerificationReport::is_verified);
    Ok(InstanceResult {
        kind: "instance",
        index,
        passed,
        exponents: e.as_strings(),
        mu: inst.mu,
        nu: inst.nu,
        log_p,
        gap,
        reports,
    })
}
