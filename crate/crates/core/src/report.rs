//! Outcome of a verification run, serialized as one JSON object per check.

use num_rational::BigRational;
use serde::{Serialize, Serializer};

use crate::lattice_order::LatticePoint;
use crate::rational::format_rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Verified,
    Violated,
    Inapplicable,
}

/// Either an exact rational or a real computed from logarithms.
#[derive(Clone, Debug, PartialEq)]
pub enum Quantity {
    Exact(BigRational),
    Real(f64),
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Quantity::Exact(r) => serializer.serialize_str(&format_rational(r)),
            Quantity::Real(v) => serializer.serialize_str(&format!("{v}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }
}

/// Where a check failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Point { x: LatticePoint },
    Pair { x: LatticePoint, y: LatticePoint },
    /// Two support pairs of a coupling that are not comparable in the product order.
    Crossing { first: [LatticePoint; 2], second: [LatticePoint; 2] },
    Translation { x: LatticePoint, y: LatticePoint, z: LatticePoint, side: Side },
    Monotonicity {
        block: usize,
        prefix_x: Option<LatticePoint>,
        prefix_y: Option<LatticePoint>,
        lower: [LatticePoint; 2],
        upper: [LatticePoint; 2],
        side: Side,
    },
    /// Perturbing `coordinate` of argument `argument` (0 = x, 1 = y) changed an earlier block's output.
    Triangularity { block: usize, x: LatticePoint, y: LatticePoint, argument: usize, coordinate: usize, side: Side },
    Masses { values: Vec<String> },
    Fiber { side: Side, image: LatticePoint, members: Vec<[LatticePoint; 2]>, rule: String },
    Competitor { index: usize, value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub subreports: Vec<VerificationReport>,
}

impl VerificationReport {
    /// A verified exact report with no quantities attached yet.
    pub fn verified(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            outcome: Outcome::Verified,
            lhs: None,
            rhs: None,
            log_p: None,
            gap: None,
            witness: None,
            tolerance: 0.0,
            note: None,
            subreports: Vec::new(),
        }
    }

    pub fn violated(check: impl Into<String>, witness: Witness) -> Self {
        Self { outcome: Outcome::Violated, witness: Some(witness), ..Self::verified(check) }
    }

    pub fn inapplicable(check: impl Into<String>, note: impl Into<String>) -> Self {
        Self { outcome: Outcome::Inapplicable, note: Some(note.into()), ..Self::verified(check) }
    }

    pub fn is_verified(&self) -> bool {
        self.outcome == Outcome::Verified
    }

    pub fn with_sides(mut self, lhs: Quantity, rhs: Quantity) -> Self {
        self.lhs = Some(lhs);
        self.rhs = Some(rhs);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn json_shape() {
        let r = VerificationReport::violated("pointwise", Witness::Pair { x: LatticePoint::ints(&[0]), y: LatticePoint::ints(&[0]) })
            .with_sides(Quantity::Exact(ratio(1, 2)), Quantity::Exact(ratio(1, 4)));
        assert_eq!(
            r.to_json(),
            r#"{"check":"pointwise","outcome":"violated","lhs":"1/2","rhs":"1/4","witness":{"kind":"pair","x":[0],"y":[0]},"tolerance":0.0}"#
        );
        let ok = VerificationReport::verified("p_bound");
        assert_eq!(ok.to_json(), r#"{"check":"p_bound","outcome":"verified","tolerance":0.0}"#);
    }
}
