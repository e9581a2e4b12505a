//! Complementing lattice operations `(T-, T+)` with `T-(x,y) + T+(x,y) = x + y`,
//! and box checkers for translation equivariance and Knothe monotonicity.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_order::{centered_box, centered_coords, centered_grid, same_dim, Decomposition, LatticePoint};
use crate::rational::{format_rational, parse_rational};
use crate::report::{Side, VerificationReport, Witness};

pub type PointMap = Arc<dyn Fn(&LatticePoint) -> LatticePoint + Send + Sync>;
pub type PairMap = Arc<dyn Fn(&LatticePoint, &LatticePoint) -> LatticePoint + Send + Sync>;

/// Value of a difference map outside its explicit table.
#[derive(Clone)]
pub enum DifferenceDefault {
    /// `t(w) = floor(w / 2)`, which reproduces the midpoint operation.
    FloorHalf,
    /// `t(w) = w`, giving `T-(x, y) = x`.
    Identity,
    /// `t(w) = -w`, giving `T-(x, y) = 2y - x`.
    Negate,
    Custom(PointMap),
}

impl DifferenceDefault {
    fn eval(&self, w: &LatticePoint) -> LatticePoint {
        match self {
            Self::FloorHalf => w.map_coords(|c| c.div_floor(&BigInt::from(2))),
            Self::Identity => w.clone(),
            Self::Negate => -w,
            Self::Custom(f) => f(w),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::FloorHalf => "floor_half",
            Self::Identity => "identity",
            Self::Negate => "negate",
            Self::Custom(_) => "custom",
        }
    }
}

/// The single-variable map `t(w) = T(w, 0)` that determines a translation
/// equivariant operation through `T(x, y) = t(x - y) + y`.
#[derive(Clone)]
pub struct DifferenceMap {
    pub table: BTreeMap<LatticePoint, LatticePoint>,
    pub default: DifferenceDefault,
}

impl DifferenceMap {
    pub fn new(default: DifferenceDefault) -> Self {
        Self { table: BTreeMap::new(), default }
    }

    pub fn eval(&self, w: &LatticePoint) -> LatticePoint {
        self.table.get(w).cloned().unwrap_or_else(|| self.default.eval(w))
    }
}

#[derive(Clone)]
enum Kind {
    MeetJoin,
    Midpoint,
    Product(Box<LatticeOperation>, Box<LatticeOperation>),
    DifferenceMap(DifferenceMap),
    Pair { t_minus: PairMap, t_plus: PairMap },
}

/// A complementing pair `(T-, T+)` on Z^n together with the decomposition
/// against which Knothe monotonicity is claimed.
#[derive(Clone)]
pub struct LatticeOperation {
    dim: usize,
    decomposition: Decomposition,
    kind: Kind,
}

impl fmt::Debug for LatticeOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Product(a, b) => write!(f, "product({a:?}, {b:?})"),
            Kind::DifferenceMap(m) => {
                write!(f, "difference_map(dim={}, default={}, table={})", self.dim, m.default.name(), m.table.len())
            }
            _ => write!(f, "{}(dim={})", self.kind_name(), self.dim),
        }
    }
}

impl LatticeOperation {
    /// Coordinatewise min and max.
    pub fn meet_join(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { dim, decomposition: Decomposition::standard(dim), kind: Kind::MeetJoin })
    }

    /// Coordinatewise floor and ceiling of `(x + y) / 2`.
    pub fn midpoint(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { dim, decomposition: Decomposition::standard(dim), kind: Kind::Midpoint })
    }

    /// Acts as `a` on the leading coordinates and `b` on the rest.
    pub fn product(a: LatticeOperation, b: LatticeOperation) -> Self {
        Self {
            dim: a.dim + b.dim,
            decomposition: a.decomposition.concat(&b.decomposition),
            kind: Kind::Product(Box::new(a), Box::new(b)),
        }
    }

    /// `T-(x, y) = t(x - y) + y`, `T+ = x + y - T-`. Translation equivariance and
    /// the complement identity hold by construction; Knothe monotonicity does not.
    pub fn from_difference_map(dim: usize, decomposition: Decomposition, map: DifferenceMap) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        same_dim(dim, decomposition.total_dim())?;
        for (w, t) in &map.table {
            same_dim(dim, w.dim())?;
            same_dim(dim, t.dim())?;
        }
        Ok(Self { dim, decomposition, kind: Kind::DifferenceMap(map) })
    }

    /// An arbitrary pair of maps, with no structural guarantee at all. Only
    /// meant for exercising the checkers; the JSON front end never builds one.
    pub fn from_pair_unchecked(dim: usize, decomposition: Decomposition, t_minus: PairMap, t_plus: PairMap) -> Result<Self> {
        same_dim(dim, decomposition.total_dim())?;
        Ok(Self { dim, decomposition, kind: Kind::Pair { t_minus, t_plus } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::MeetJoin => "meet_join",
            Kind::Midpoint => "midpoint",
            Kind::Product(..) => "product",
            Kind::DifferenceMap(_) => "difference_map",
            Kind::Pair { .. } => "pair",
        }
    }

    pub fn t_minus(&self, x: &LatticePoint, y: &LatticePoint) -> LatticePoint {
        match &self.kind {
            Kind::MeetJoin => x.zip_with(y, |a, b| a.min(b).clone()),
            Kind::Midpoint => x.zip_with(y, |a, b| (a + b).div_floor(&BigInt::from(2))),
            Kind::Product(a, b) => {
                let (xa, xb) = (x.slice(0..a.dim), x.slice(a.dim..self.dim));
                let (ya, yb) = (y.slice(0..a.dim), y.slice(a.dim..self.dim));
                a.t_minus(&xa, &ya).concat(&b.t_minus(&xb, &yb))
            }
            Kind::DifferenceMap(m) => &m.eval(&(x - y)) + y,
            Kind::Pair { t_minus, .. } => t_minus(x, y),
        }
    }

    pub fn t_plus(&self, x: &LatticePoint, y: &LatticePoint) -> LatticePoint {
        match &self.kind {
            Kind::MeetJoin => x.zip_with(y, |a, b| a.max(b).clone()),
            Kind::Pair { t_plus, .. } => t_plus(x, y),
            _ => &(x + y) - &self.t_minus(x, y),
        }
    }

    pub fn apply(&self, side: Side, x: &LatticePoint, y: &LatticePoint) -> LatticePoint {
        match side {
            Side::Minus => self.t_minus(x, y),
            Side::Plus => self.t_plus(x, y),
        }
    }

    /// Both sides with dimension checks.
    pub fn evaluate(&self, x: &LatticePoint, y: &LatticePoint) -> Result<(LatticePoint, LatticePoint)> {
        same_dim(self.dim, x.dim())?;
        same_dim(self.dim, y.dim())?;
        let lo = self.t_minus(x, y);
        let hi = self.t_plus(x, y);
        same_dim(self.dim, lo.dim())?;
        same_dim(self.dim, hi.dim())?;
        Ok((lo, hi))
    }

    /// The block-`i` component of the operation with the earlier coordinates
    /// frozen to `x_prefix` and `y_prefix` and the later ones set to zero, as a
    /// single-block operation on the block's coordinates.
    pub fn section(&self, block: usize, x_prefix: Option<&LatticePoint>, y_prefix: Option<&LatticePoint>) -> LatticeOperation {
        let range = self.decomposition.block_range(block);
        let order = self.decomposition.blocks()[block].order.clone();
        let tail = self.dim - range.end;
        let embed = move |prefix: Option<&LatticePoint>, z: &LatticePoint| {
            let mut p = match prefix {
                Some(p) => p.concat(z),
                None => z.clone(),
            };
            if tail > 0 {
                p = p.concat(&LatticePoint::zero(tail));
            }
            p
        };
        let make = |side: Side| -> PairMap {
            let op = self.clone();
            let (xp, yp) = (x_prefix.cloned(), y_prefix.cloned());
            let range = range.clone();
            Arc::new(move |x: &LatticePoint, y: &LatticePoint| {
                op.apply(side, &embed(xp.as_ref(), x), &embed(yp.as_ref(), y)).slice(range.clone())
            })
        };
        LatticeOperation {
            dim: range.len(),
            decomposition: Decomposition::single(order),
            kind: Kind::Pair { t_minus: make(Side::Minus), t_plus: make(Side::Plus) },
        }
    }

    /// Runs the complement, translation and Knothe checks on `[-radius, radius]^n`.
    pub fn check_all(&self, radius: u32) -> Vec<VerificationReport> {
        vec![self.check_complement(radius), self.check_p1(radius), self.check_p2(radius)]
    }

    /// `T-(x,y) + T+(x,y) = x + y` for every `x, y` in the box.
    pub fn check_complement(&self, radius: u32) -> VerificationReport {
        let grid = centered_box(self.dim, radius as i64);
        for x in &grid {
            for y in &grid {
                if &self.t_minus(x, y) + &self.t_plus(x, y) != x + y {
                    return VerificationReport::violated("complement", Witness::Pair { x: x.clone(), y: y.clone() })
                        .with_note(format!("box radius {radius}"));
                }
            }
        }
        VerificationReport::verified("complement").with_note(format!("box radius {radius}"))
    }

    /// Translation equivariance for all `x, y` in the box and `z` among
    /// `+-e_i` and `(1, ..., 1)`.
    pub fn check_p1(&self, radius: u32) -> VerificationReport {
        let grid = centered_box(self.dim, radius as i64);
        let mut shifts = Vec::new();
        for i in 0..self.dim {
            let e = LatticePoint::basis(self.dim, i);
            shifts.push(e.clone());
            shifts.push(-&e);
        }
        shifts.push(LatticePoint::splat(self.dim, 1));
        for x in &grid {
            for y in &grid {
                let base = [self.t_minus(x, y), self.t_plus(x, y)];
                for z in &shifts {
                    let (xz, yz) = (x + z, y + z);
                    for (side, b) in [Side::Minus, Side::Plus].into_iter().zip(&base) {
                        if self.apply(side, &xz, &yz) != b + z {
                            return VerificationReport::violated(
                                "p1_translation",
                                Witness::Translation { x: x.clone(), y: y.clone(), z: z.clone(), side },
                            )
                            .with_note(format!("box radius {radius}"));
                        }
                    }
                }
            }
        }
        VerificationReport::verified("p1_translation").with_note(format!("box radius {radius}"))
    }

    /// Knothe monotonicity on the box: every block section
    /// `T_i((a, .), (b, .))` is monotone in each argument for the block order,
    /// and `T_i` ignores coordinates of later blocks.
    ///
    /// With at most two blocks every prefix pair inside the box is tried.
    /// With more, prefix coordinates are restricted to `{0, 1, -1, r, -r}`;
    /// the triangularity scan uses the same restriction once the full box has
    /// more than `TRIANGULARITY_BUDGET` argument pairs.
    pub fn check_p2(&self, radius: u32) -> VerificationReport {
        let note = format!("box radius {radius}");
        match self.check_block_monotonicity(radius as i64).or_else(|| self.check_triangularity(radius as i64)) {
            Some(w) => VerificationReport::violated("p2_knothe", w).with_note(note),
            None => VerificationReport::verified("p2_knothe").with_note(note),
        }
    }

    fn check_block_monotonicity(&self, r: i64) -> Option<Witness> {
        let d = &self.decomposition;
        let k = d.num_blocks();
        for (i, block) in d.blocks().iter().enumerate() {
            let plen = d.prefix_len(i);
            let prefixes: Vec<Option<LatticePoint>> = if plen == 0 {
                vec![None]
            } else if k <= 2 {
                centered_box(plen, r).into_iter().map(Some).collect()
            } else {
                centered_grid(plen, &sparse_coords(r)).into_iter().map(Some).collect()
            };
            let points = centered_box(block.dim, r);
            let mut sorted = points.clone();
            block.order.sort(&mut sorted);
            let successor: BTreeMap<&LatticePoint, &LatticePoint> =
                sorted.iter().zip(sorted.iter().skip(1)).collect();
            let range = d.block_range(i);
            let tail = self.dim - range.end;
            let full = |prefix: &Option<LatticePoint>, v: &LatticePoint| {
                let mut p = match prefix {
                    Some(a) => a.concat(v),
                    None => v.clone(),
                };
                if tail > 0 {
                    p = p.concat(&LatticePoint::zero(tail));
                }
                p
            };
            let section = |side: Side, a: &Option<LatticePoint>, x: &LatticePoint, b: &Option<LatticePoint>, y: &LatticePoint| {
                self.apply(side, &full(a, x), &full(b, y)).slice(range.clone())
            };
            for a in &prefixes {
                for b in &prefixes {
                    for fixed in &points {
                        for moving in &points {
                            let Some(next) = successor.get(moving) else { continue };
                            for side in [Side::Minus, Side::Plus] {
                                // moving first argument, then moving second argument
                                let cases = [
                                    ([moving, fixed], [*next, fixed]),
                                    ([fixed, moving], [fixed, *next]),
                                ];
                                for (lo, hi) in cases {
                                    let t_lo = section(side, a, lo[0], b, lo[1]);
                                    let t_hi = section(side, a, hi[0], b, hi[1]);
                                    if !block.order.le(&t_lo, &t_hi) {
                                        return Some(Witness::Monotonicity {
                                            block: i,
                                            prefix_x: a.clone(),
                                            prefix_y: b.clone(),
                                            lower: [lo[0].clone(), lo[1].clone()],
                                            upper: [hi[0].clone(), hi[1].clone()],
                                            side,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn check_triangularity(&self, r: i64) -> Option<Witness> {
        let d = &self.decomposition;
        if d.num_blocks() == 1 {
            return None;
        }
        let side_len = (2 * r + 1) as u128;
        let grid = if side_len.pow(2 * self.dim as u32) <= TRIANGULARITY_BUDGET {
            centered_box(self.dim, r)
        } else {
            centered_grid(self.dim, &sparse_coords(r))
        };
        let block_of: Vec<usize> =
            (0..d.num_blocks()).flat_map(|i| std::iter::repeat_n(i, d.blocks()[i].dim)).collect();
        for x in &grid {
            for y in &grid {
                let base = [self.t_minus(x, y), self.t_plus(x, y)];
                for c in d.prefix_len(1)..self.dim {
                    let j = block_of[c];
                    let e = LatticePoint::basis(self.dim, c);
                    for argument in 0..2 {
                        let (px, py) = if argument == 0 { (x + &e, y.clone()) } else { (x.clone(), y + &e) };
                        for (side, b) in [Side::Minus, Side::Plus].into_iter().zip(&base) {
                            let out = self.apply(side, &px, &py);
                            let earlier = d.prefix_len(j);
                            if out.coords()[..earlier] != b.coords()[..earlier] {
                                let block = block_of[(0..earlier).find(|&q| out.coords()[q] != b.coords()[q]).unwrap()];
                                return Some(Witness::Triangularity {
                                    block,
                                    x: x.clone(),
                                    y: y.clone(),
                                    argument,
                                    coordinate: c,
                                    side,
                                });
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

/// Number of `(x, y)` pairs above which the triangularity scan switches to the sparse grid.
pub const TRIANGULARITY_BUDGET: u128 = 40_000;

fn sparse_coords(r: i64) -> Vec<i64> {
    let mut v: Vec<i64> = Vec::new();
    for c in [0, 1, -1, r, -r] {
        if c.abs() <= r && !v.contains(&c) {
            v.push(c);
        }
    }
    if v.is_empty() {
        v = centered_coords(0);
    }
    v
}

/// Positive exponents `(alpha, beta, gamma, delta)` with `max(alpha, beta) <= min(gamma, delta)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentQuadruple {
    values: [BigRational; 4],
    common_denominator: BigInt,
}

impl ExponentQuadruple {
    pub fn new(alpha: BigRational, beta: BigRational, gamma: BigRational, delta: BigRational) -> Result<Self> {
        let values = [alpha, beta, gamma, delta];
        if let Some(v) = values.iter().find(|v| !v.is_positive()) {
            return Err(Error::InvalidExponents(format!("exponent {} is not positive", format_rational(v))));
        }
        let [a, b, g, d] = &values;
        if a.max(b) > g.min(d) {
            return Err(Error::InvalidExponents(format!(
                "max(alpha, beta) = {} exceeds min(gamma, delta) = {}",
                format_rational(a.max(b)),
                format_rational(g.min(d))
            )));
        }
        let common_denominator = values.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        Ok(Self { values, common_denominator })
    }

    pub fn unit() -> Self {
        let one = BigRational::one();
        Self::new(one.clone(), one.clone(), one.clone(), one).unwrap()
    }

    pub fn parse(alpha: &str, beta: &str, gamma: &str, delta: &str) -> Result<Self> {
        Self::new(parse_rational(alpha)?, parse_rational(beta)?, parse_rational(gamma)?, parse_rational(delta)?)
    }

    pub fn alpha(&self) -> &BigRational {
        &self.values[0]
    }
    pub fn beta(&self) -> &BigRational {
        &self.values[1]
    }
    pub fn gamma(&self) -> &BigRational {
        &self.values[2]
    }
    pub fn delta(&self) -> &BigRational {
        &self.values[3]
    }

    /// Least common denominator `N` of the four exponents.
    pub fn common_denominator(&self) -> &BigInt {
        &self.common_denominator
    }

    pub fn is_integral(&self) -> bool {
        self.common_denominator.is_one()
    }

    /// `(alpha N, beta N, gamma N, delta N)` as machine integers.
    pub fn scaled(&self) -> [usize; 4] {
        let n = BigRational::from_integer(self.common_denominator.clone());
        self.values.clone().map(|v| {
            let s = (v * &n).to_integer();
            usize::try_from(&s).expect("scaled exponent fits in usize")
        })
    }

    pub fn as_f64(&self) -> [f64; 4] {
        self.values.clone().map(|v| crate::rational::to_f64(&v))
    }

    pub fn as_strings(&self) -> [String; 4] {
        self.values.clone().map(|v| format_rational(&v))
    }
}

/// Defaults for [`DifferenceDefault`] in the JSON form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultName {
    FloorHalf,
    Identity,
    Negate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub w: LatticePoint,
    pub t: LatticePoint,
}

/// JSON description of an operation. `dim` may be omitted when the caller
/// supplies one (e.g. the CLI's `--dim`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperationSpec {
    Midpoint {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    MeetJoin {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Product {
        factors: Vec<OperationSpec>,
    },
    DifferenceMap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        #[serde(default)]
        table: Vec<TableEntry>,
        default: DefaultName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decomposition: Option<Decomposition>,
    },
}

impl OperationSpec {
    /// Accepts a JSON object or one of the bare names `midpoint`, `meet_join`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        match t {
            "midpoint" => Ok(Self::Midpoint { dim: None }),
            "meet_join" | "meet-join" => Ok(Self::MeetJoin { dim: None }),
            _ => Ok(serde_json::from_str(t)?),
        }
    }

    pub fn build(&self, fallback_dim: Option<usize>) -> Result<LatticeOperation> {
        let dim_of = |dim: &Option<usize>| -> Result<usize> {
            dim.or(fallback_dim)
                .ok_or_else(|| Error::InvalidOperation("operation needs a dimension".into()))
        };
        match self {
            Self::Midpoint { dim } => LatticeOperation::midpoint(dim_of(dim)?),
            Self::MeetJoin { dim } => LatticeOperation::meet_join(dim_of(dim)?),
            Self::Product { factors } => {
                let mut it = factors.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::InvalidOperation("product needs at least one factor".into()))?
                    .build(None)?;
                it.try_fold(first, |acc, f| Ok(LatticeOperation::product(acc, f.build(None)?)))
            }
            Self::DifferenceMap { dim, table, default, decomposition } => {
                let dim = dim_of(dim)?;
                if dim == 0 {
                    return Err(Error::ZeroDimension);
                }
                let default = match default {
                    DefaultName::FloorHalf => DifferenceDefault::FloorHalf,
                    DefaultName::Identity => DifferenceDefault::Identity,
                    DefaultName::Negate => DifferenceDefault::Negate,
                };
                let mut map = DifferenceMap::new(default);
                for e in table {
                    if map.table.insert(e.w.clone(), e.t.clone()).is_some() {
                        return Err(Error::InvalidOperation(format!("table lists {} twice", e.w)));
                    }
                }
                let d = decomposition.clone().unwrap_or_else(|| Decomposition::standard(dim));
                LatticeOperation::from_difference_map(dim, d, map)
            }
        }
    }
}
