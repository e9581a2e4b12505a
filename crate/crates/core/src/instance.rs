//! JSON instance files consumed by the `verify` command.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::lattice_order::{AdditiveTotalOrder, LatticePoint};
use crate::measures::{FiniteMeasure, ProbabilityMeasure};
use crate::operations::{ExponentQuadruple, LatticeOperation, OperationSpec};
use crate::report::VerificationReport;
use crate::verify::{self, FunctionQuadruple};

/// The verifier selected on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckName {
    Dbm,
    SetBm,
    Entropy,
    PBound,
    Pointwise,
    LogLaplace,
}

impl CheckName {
    pub const ALL: [CheckName; 6] =
        [CheckName::Dbm, CheckName::SetBm, CheckName::Entropy, CheckName::PBound, CheckName::Pointwise, CheckName::LogLaplace];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Dbm => "dbm",
            CheckName::SetBm => "set-bm",
            CheckName::Entropy => "entropy",
            CheckName::PBound => "p-bound",
            CheckName::Pointwise => "pointwise",
            CheckName::LogLaplace => "log-laplace",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('_', "-");
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown check {s:?}")))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OpField {
    Name(String),
    Spec(OperationSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsField {
    pub alpha: String,
    pub beta: String,
    pub gamma: String,
    pub delta: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum CouplingField {
    Mode(String),
    Explicit(Coupling),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionsField {
    pub f: FiniteMeasure,
    pub g: FiniteMeasure,
    pub h: FiniteMeasure,
    pub k: FiniteMeasure,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsField {
    pub a: Vec<LatticePoint>,
    pub b: Vec<LatticePoint>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiEntry {
    pub x: LatticePoint,
    pub v: f64,
}

/// Everything a single verification may need; each check reads only its own fields.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub op: Option<OpField>,
    #[serde(default)]
    pub exponents: Option<ExponentsField>,
    #[serde(default)]
    pub mu: Option<ProbabilityMeasure>,
    #[serde(default)]
    pub nu: Option<ProbabilityMeasure>,
    /// `"monotone"`, `"knothe"` (default) or an explicit coupling.
    #[serde(default)]
    pub coupling: Option<CouplingField>,
    /// Order for the monotone coupling; standard lexicographic by default.
    #[serde(default)]
    pub order: Option<AdditiveTotalOrder>,
    #[serde(default)]
    pub functions: Option<FunctionsField>,
    #[serde(default)]
    pub sets: Option<SetsField>,
    #[serde(default)]
    pub phi: Option<Vec<PhiEntry>>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub radius: Option<u32>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// `alpha, beta, gamma, delta` as `p/q` strings.
    pub exponents: [Option<String>; 4],
    pub tolerance: Option<f64>,
    pub radius: Option<u32>,
    pub seed: Option<u64>,
    pub op: Option<OperationSpec>,
    pub dim: Option<usize>,
}

pub const DEFAULT_RADIUS: u32 = 3;

fn missing(field: &str, check: CheckName) -> Error {
    Error::InvalidInput(format!("check {check} needs the {field:?} field"))
}

impl InstanceSpec {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The exponent quadruple after overrides; unspecified values are 1.
    pub fn exponents(&self, overrides: &Overrides) -> Result<ExponentQuadruple> {
        let file = self.exponents.as_ref().map(|e| [e.alpha.clone(), e.beta.clone(), e.gamma.clone(), e.delta.clone()]);
        let values: Vec<String> = (0..4)
            .map(|i| {
                overrides.exponents[i]
                    .clone()
                    .or_else(|| file.as_ref().map(|f| f[i].clone()))
                    .unwrap_or_else(|| "1".to_string())
            })
            .collect();
        ExponentQuadruple::parse(&values[0], &values[1], &values[2], &values[3])
    }

    pub fn tolerance(&self, overrides: &Overrides) -> f64 {
        overrides.tolerance.or(self.tolerance).unwrap_or(verify::DEFAULT_TOLERANCE)
    }

    /// Dimension from `dim`, the overrides, or the first measure, function or set present.
    pub fn dim(&self, overrides: &Overrides) -> Option<usize> {
        overrides
            .dim
            .or(self.dim)
            .or_else(|| self.mu.as_ref().map(|m| m.dim()))
            .or_else(|| self.functions.as_ref().map(|f| f.f.dim()))
            .or_else(|| self.sets.as_ref().and_then(|s| s.a.first().map(LatticePoint::dim)))
            .or_else(|| self.phi.as_ref().and_then(|p| p.first().map(|e| e.x.dim())))
    }

    pub fn operation(&self, overrides: &Overrides) -> Result<LatticeOperation> {
        let spec = match (&overrides.op, &self.op) {
            (Some(s), _) => s.clone(),
            (None, Some(OpField::Name(n))) => OperationSpec::parse(n)?,
            (None, Some(OpField::Spec(s))) => s.clone(),
            (None, None) => return Err(Error::InvalidInput("instance has no operation".into())),
        };
        spec.build(self.dim(overrides))
    }

    fn measures(&self, check: CheckName) -> Result<(&ProbabilityMeasure, &ProbabilityMeasure)> {
        Ok((self.mu.as_ref().ok_or_else(|| missing("mu", check))?, self.nu.as_ref().ok_or_else(|| missing("nu", check))?))
    }

    fn coupling(&self, mu: &ProbabilityMeasure, nu: &ProbabilityMeasure, op: &LatticeOperation) -> Result<Coupling> {
        match &self.coupling {
            None => Ok(verify::default_coupling(mu, nu, op)?.coupling),
            Some(CouplingField::Mode(m)) if m == "knothe" => Ok(verify::default_coupling(mu, nu, op)?.coupling),
            Some(CouplingField::Mode(m)) if m == "monotone" => {
                let order = self.order.clone().unwrap_or_else(|| AdditiveTotalOrder::lex(mu.dim()));
                Coupling::monotone(mu, nu, &order)
            }
            Some(CouplingField::Mode(m)) => Err(Error::InvalidInput(format!("unknown coupling mode {m:?}"))),
            Some(CouplingField::Explicit(c)) => Ok(c.clone()),
        }
    }

    /// Runs one verifier. Input problems (missing fields, bad exponents,
    /// dimension mismatches) are errors; mathematical outcomes are reports.
    pub fn run(&self, check: CheckName, overrides: &Overrides) -> Result<VerificationReport> {
        let e = self.exponents(overrides)?;
        let tol = self.tolerance(overrides);
        match check {
            CheckName::LogLaplace => {
                let entries = self.phi.as_ref().ok_or_else(|| missing("phi", check))?;
                let mut phi = BTreeMap::new();
                for PhiEntry { x, v } in entries {
                    if phi.insert(x.clone(), *v).is_some() {
                        return Err(Error::InvalidInput(format!("phi lists {x} twice")));
                    }
                }
                let seed = overrides.seed.or(self.seed).unwrap_or(0);
                Ok(verify::log_laplace_gap(&phi, seed, tol)?.1)
            }
            CheckName::SetBm => {
                let s = self.sets.as_ref().ok_or_else(|| missing("sets", check))?;
                verify::set_dbm(&s.a, &s.b, &self.operation(overrides)?, &e)
            }
            CheckName::Dbm => {
                let f = self.functions.as_ref().ok_or_else(|| missing("functions", check))?;
                let q = FunctionQuadruple::new(f.f.clone(), f.g.clone(), f.h.clone(), f.k.clone())?;
                let radius = overrides.radius.or(self.radius).unwrap_or(DEFAULT_RADIUS);
                verify::verify_dbm(&q, &e, &self.operation(overrides)?, radius)
            }
            CheckName::Entropy => {
                let (mu, nu) = self.measures(check)?;
                let op = self.operation(overrides)?;
                let pi = self.coupling(mu, nu, &op)?;
                if pi.left() != mu || pi.right() != nu {
                    return Err(Error::InvalidCoupling("coupling marginals differ from mu and nu".into()));
                }
                Ok(verify::entropy_gap_for_coupling(&pi, &op, &e, tol)?.1)
            }
            CheckName::PBound | CheckName::Pointwise => {
                let (mu, nu) = self.measures(check)?;
                let op = self.operation(overrides)?;
                let pi = self.coupling(mu, nu, &op)?;
                if check == CheckName::PBound {
                    Ok(verify::p_value(mu, nu, &pi, &op, &e, tol)?.1)
                } else {
                    verify::pointwise_term_bound(mu, nu, &pi, &op, &e)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{Outcome, Witness};

    const EQUALITY: &str = r#"{
        "op": "midpoint",
        "mu": {"dim": 1, "atoms": [{"x": [0], "w": "1/3"}, {"x": [1], "w": "1/3"}, {"x": [2], "w": "1/3"}]},
        "nu": {"dim": 1, "atoms": [{"x": [0], "w": "1/2"}, {"x": [1], "w": "1/2"}]}
    }"#;

    const NEGATIVE: &str = r#"{
        "op": {"kind": "difference_map", "dim": 1, "table": [], "default": "negate"},
        "mu": {"dim": 1, "atoms": [{"x": [0], "w": "1/2"}, {"x": [1], "w": "1/2"}]},
        "nu": {"dim": 1, "atoms": [{"x": [0], "w": "1/2"}, {"x": [2], "w": "1/2"}]},
        "coupling": "monotone"
    }"#;

    #[test]
    fn runs_each_check() {
        let eq = InstanceSpec::parse(EQUALITY).unwrap();
        let o = Overrides::default();
        let r = eq.run(CheckName::PBound, &o).unwrap();
        assert!(r.is_verified());
        assert!(r.log_p.unwrap().abs() < 1e-12);
        assert!(eq.run(CheckName::Entropy, &o).unwrap().is_verified());
        assert!(eq.run(CheckName::Pointwise, &o).unwrap().is_verified());
        assert!(eq.run(CheckName::Dbm, &o).is_err());

        let neg = InstanceSpec::parse(NEGATIVE).unwrap();
        let r = neg.run(CheckName::Pointwise, &o).unwrap();
        assert_eq!(r.outcome, Outcome::Violated);
        assert_eq!(r.witness, Some(Witness::Pair { x: LatticePoint::ints(&[0]), y: LatticePoint::ints(&[0]) }));

        let sets = InstanceSpec::parse(r#"{"op":"meet_join","sets":{"a":[[0,0],[1,1]],"b":[[0,1],[1,0]]}}"#).unwrap();
        assert!(sets.run(CheckName::SetBm, &o).unwrap().is_verified());

        let phi = InstanceSpec::parse(r#"{"phi":[{"x":[0],"v":0.0},{"x":[1],"v":1.0986122886681098}]}"#).unwrap();
        assert!(phi.run(CheckName::LogLaplace, &o).unwrap().is_verified());

        let dbm = InstanceSpec::parse(
            r#"{"op":"midpoint","functions":{
                "f":{"dim":1,"atoms":[{"x":[0],"w":"1"},{"x":[2],"w":"1"}]},
                "g":{"dim":1,"atoms":[{"x":[0],"w":"1"},{"x":[2],"w":"1"}]},
                "h":{"dim":1,"atoms":[{"x":[0],"w":"1"},{"x":[1],"w":"1"},{"x":[2],"w":"1"}]},
                "k":{"dim":1,"atoms":[{"x":[0],"w":"1"},{"x":[1],"w":"1"},{"x":[2],"w":"1"}]}}}"#,
        )
        .unwrap();
        assert!(dbm.run(CheckName::Dbm, &o).unwrap().is_verified());
    }

    #[test]
    fn exponent_overrides_and_validation() {
        let eq = InstanceSpec::parse(EQUALITY).unwrap();
        let mut o = Overrides::default();
        o.exponents[0] = Some("2".into());
        assert!(matches!(eq.run(CheckName::PBound, &o), Err(Error::InvalidExponents(_))));
        o.exponents[2] = Some("2".into());
        o.exponents[3] = Some("3".into());
        assert_eq!(eq.exponents(&o).unwrap(), ExponentQuadruple::parse("2", "1", "2", "3").unwrap());
    }

    #[test]
    fn parse_errors() {
        assert!(InstanceSpec::parse(r#"{"unknown": 1}"#).is_err());
        assert!(InstanceSpec::parse(r#"{"mu": {"dim": 1, "atoms": [{"x":[0], "w":"1/2"}]}}"#).is_err());
        assert!("nope".parse::<CheckName>().is_err());
        assert_eq!("p_bound".parse::<CheckName>().unwrap(), CheckName::PBound);
        let no_op = InstanceSpec::parse(r#"{"sets":{"a":[[0]],"b":[[0]]}}"#).unwrap();
        assert!(no_op.run(CheckName::SetBm, &Overrides::default()).is_err());
    }
}
