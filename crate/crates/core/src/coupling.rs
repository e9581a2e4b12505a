//! Monotone (quantile) couplings on an ordered block, Knothe couplings along a
//! decomposition, and the fiber structure of a coupling under `T-` / `T+`.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice_order::{same_dim, AdditiveTotalOrder, Decomposition, LatticePoint};
use crate::measures::{ConditionalNode, FiniteMeasure, ProbabilityMeasure};
use crate::operations::LatticeOperation;
use crate::rational::{format_rational, parse_rational};
use crate::report::{Side, VerificationReport, Witness};

/// Which coordinate projection of a coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    First,
    Second,
}

pub type SupportPair = (LatticePoint, LatticePoint);

/// A probability measure on Z^n x Z^n whose marginals are `left` and `right`
/// exactly. Atoms are keyed by `(x, y)`, i.e. lexicographically by the
/// concatenated 2n-coordinate point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coupling {
    dim: usize,
    atoms: BTreeMap<SupportPair, BigRational>,
    left: ProbabilityMeasure,
    right: ProbabilityMeasure,
}

fn project(
    dim: usize,
    atoms: &BTreeMap<SupportPair, BigRational>,
    side: Projection,
) -> Result<FiniteMeasure> {
    FiniteMeasure::new(
        dim,
        atoms.iter().map(|((x, y), w)| {
            let p = match side {
                Projection::First => x.clone(),
                Projection::Second => y.clone(),
            };
            (p, w.clone())
        }),
    )
}

impl Coupling {
    /// Builds a coupling and certifies that its projections equal `left` and
    /// `right` as exact rationals.
    pub fn new(
        left: ProbabilityMeasure,
        right: ProbabilityMeasure,
        entries: impl IntoIterator<Item = (SupportPair, BigRational)>,
    ) -> Result<Self> {
        same_dim(left.dim(), right.dim())?;
        let dim = left.dim();
        let atoms = collect_atoms(dim, entries)?;
        if project(dim, &atoms, Projection::First)? != *left.as_measure() {
            return Err(Error::InvalidCoupling("first marginal differs from the left measure".into()));
        }
        if project(dim, &atoms, Projection::Second)? != *right.as_measure() {
            return Err(Error::InvalidCoupling("second marginal differs from the right measure".into()));
        }
        Ok(Self { dim, atoms, left, right })
    }

    /// A coupling whose marginals are whatever its atoms project to.
    pub fn from_atoms(dim: usize, entries: impl IntoIterator<Item = (SupportPair, BigRational)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let atoms = collect_atoms(dim, entries)?;
        let left = ProbabilityMeasure::try_from(project(dim, &atoms, Projection::First)?)?;
        let right = ProbabilityMeasure::try_from(project(dim, &atoms, Projection::Second)?)?;
        Ok(Self { dim, atoms, left, right })
    }

    /// The independent coupling `mu (x) nu`.
    pub fn product(mu: &ProbabilityMeasure, nu: &ProbabilityMeasure) -> Result<Self> {
        let entries: Vec<_> = mu
            .atoms()
            .flat_map(|(x, a)| nu.atoms().map(move |(y, b)| ((x.clone(), y.clone()), a * b)))
            .collect();
        Self::new(mu.clone(), nu.clone(), entries)
    }

    pub fn dirac(x: LatticePoint, y: LatticePoint) -> Result<Self> {
        Self::new(ProbabilityMeasure::dirac(x.clone()), ProbabilityMeasure::dirac(y.clone()), [((x, y), BigRational::one())])
    }

    /// Pairs equal quantiles of `mu` and `nu`: the mass on `(x_i, y_j)` is the
    /// overlap of their half-open quantile intervals `[F(x_i-), F(x_i))`.
    pub fn monotone(mu: &ProbabilityMeasure, nu: &ProbabilityMeasure, order: &AdditiveTotalOrder) -> Result<Self> {
        same_dim(mu.dim(), nu.dim())?;
        let xs = mu.sorted_by(order)?;
        let ys = nu.sorted_by(order)?;
        let mut entries = Vec::with_capacity(xs.len() + ys.len());
        let (mut i, mut j) = (0, 0);
        let mut cut = BigRational::zero();
        let mut top_x = xs[0].1.clone();
        let mut top_y = ys[0].1.clone();
        while i < xs.len() && j < ys.len() {
            let next = if top_x < top_y { top_x.clone() } else { top_y.clone() };
            if next > cut {
                entries.push(((xs[i].0.clone(), ys[j].0.clone()), &next - &cut));
                cut = next.clone();
            }
            if top_x == next {
                i += 1;
                if i < xs.len() {
                    top_x += xs[i].1;
                }
            }
            if top_y == next {
                j += 1;
                if j < ys.len() {
                    top_y += ys[j].1;
                }
            }
        }
        Self::new(mu.clone(), nu.clone(), entries)
    }

    /// Triangular coupling along `decomposition`: monotone coupling of the
    /// first-block marginals, then, for every coupled pair of prefixes, the
    /// monotone coupling of the next conditionals.
    pub fn knothe(mu: &ProbabilityMeasure, nu: &ProbabilityMeasure, decomposition: &Decomposition) -> Result<Self> {
        Ok(KnotheCoupling::new(mu, nu, decomposition)?.coupling)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn left(&self) -> &ProbabilityMeasure {
        &self.left
    }

    pub fn right(&self) -> &ProbabilityMeasure {
        &self.right
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&SupportPair, &BigRational)> {
        self.atoms.iter()
    }

    pub fn weight(&self, x: &LatticePoint, y: &LatticePoint) -> BigRational {
        self.atoms.get(&(x.clone(), y.clone())).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Projection recomputed from the atoms.
    pub fn marginal(&self, side: Projection) -> ProbabilityMeasure {
        ProbabilityMeasure::try_from(project(self.dim, &self.atoms, side).expect("nonempty coupling"))
            .expect("couplings carry unit mass")
    }

    /// Both projections equal the declared marginals exactly.
    pub fn has_exact_marginals(&self) -> bool {
        self.marginal(Projection::First) == self.left && self.marginal(Projection::Second) == self.right
    }

    /// The coupling as a measure on Z^{2n}.
    pub fn as_measure(&self) -> FiniteMeasure {
        FiniteMeasure::new(2 * self.dim, self.atoms.iter().map(|((x, y), w)| (x.concat(y), w.clone())))
            .expect("nonempty coupling")
    }

    pub fn pushforward(&self, map: impl Fn(&LatticePoint, &LatticePoint) -> LatticePoint) -> Result<ProbabilityMeasure> {
        let mut out: BTreeMap<LatticePoint, BigRational> = BTreeMap::new();
        let mut dim = None;
        for ((x, y), w) in &self.atoms {
            let z = map(x, y);
            match dim {
                None => dim = Some(z.dim()),
                Some(d) => same_dim(d, z.dim())?,
            }
            *out.entry(z).or_insert_with(BigRational::zero) += w;
        }
        ProbabilityMeasure::new(dim.expect("nonempty coupling"), out)
    }

    /// `kappa_side = pi o T_side^{-1}`.
    pub fn push_by(&self, op: &LatticeOperation, side: Side) -> Result<ProbabilityMeasure> {
        same_dim(op.dim(), self.dim)?;
        self.pushforward(|x, y| op.apply(side, x, y))
    }

    /// Exhaustive pairwise check that the support is a chain in `order x order`.
    pub fn check_support_monotone(&self, order: &AdditiveTotalOrder) -> VerificationReport {
        const CHECK: &str = "support_monotone";
        if order.dim() != self.dim {
            return VerificationReport::inapplicable(CHECK, format!("order has dimension {}, coupling {}", order.dim(), self.dim));
        }
        match self.first_crossing(order) {
            Some((p, q)) => VerificationReport::violated(CHECK, Witness::Crossing { first: [p.0, p.1], second: [q.0, q.1] }),
            None => VerificationReport::verified(CHECK),
        }
    }

    fn first_crossing(&self, order: &AdditiveTotalOrder) -> Option<(SupportPair, SupportPair)> {
        let pairs: Vec<&SupportPair> = self.atoms.keys().collect();
        for (i, (a, b)) in pairs.iter().map(|p| (&p.0, &p.1)).enumerate() {
            for (c, d) in pairs[i + 1..].iter().map(|p| (&p.0, &p.1)) {
                let forward = order.le(a, c) && order.le(b, d);
                let backward = order.le(c, a) && order.le(d, b);
                if !forward && !backward {
                    return Some(((a.clone(), b.clone()), (c.clone(), d.clone())));
                }
            }
        }
        None
    }

    /// Groups the support by its image under `T_side`.
    pub fn fibers(&self, op: &LatticeOperation, side: Side) -> Result<FiberIndex> {
        same_dim(op.dim(), self.dim)?;
        let mut fibers: BTreeMap<LatticePoint, Vec<SupportPair>> = BTreeMap::new();
        for (x, y) in self.atoms.keys() {
            fibers.entry(op.apply(side, x, y)).or_default().push((x.clone(), y.clone()));
        }
        Ok(FiberIndex { side, fibers })
    }

    /// Checks the fiber structure of a monotone coupling on a single ordered
    /// block: fibers have at most two elements, two-element fibers are one
    /// unit step apart in exactly one argument, the complementary operation
    /// moves up by one unit across such a fiber, and the two fibers through a
    /// support pair are aligned whenever both have two elements.
    ///
    /// Reports `inapplicable` if the operation has several blocks or the
    /// support is not monotone.
    pub fn check_fiber_structure(&self, op: &LatticeOperation) -> VerificationReport {
        const CHECK: &str = "fiber_structure";
        if op.dim() != self.dim {
            return VerificationReport::inapplicable(CHECK, format!("operation has dimension {}, coupling {}", op.dim(), self.dim));
        }
        if op.decomposition().num_blocks() != 1 {
            return VerificationReport::inapplicable(
                CHECK,
                "fiber structure is defined for a single ordered block; check each conditional block coupling instead",
            );
        }
        let order = &op.decomposition().blocks()[0].order;
        if let Some((p, q)) = self.first_crossing(order) {
            let mut r = VerificationReport::inapplicable(CHECK, "precondition failed: coupling support is not monotone");
            r.witness = Some(Witness::Crossing { first: [p.0, p.1], second: [q.0, q.1] });
            return r;
        }
        let unit = order.unit();
        let minus = self.fibers(op, Side::Minus).expect("dimension checked");
        let plus = self.fibers(op, Side::Plus).expect("dimension checked");
        let violation = |index: &FiberIndex, image: &LatticePoint, members: &[SupportPair], rule: &str| {
            VerificationReport::violated(
                CHECK,
                Witness::Fiber {
                    side: index.side,
                    image: image.clone(),
                    members: members.iter().map(|(x, y)| [x.clone(), y.clone()]).collect(),
                    rule: rule.to_string(),
                },
            )
        };
        for index in [&minus, &plus] {
            for (image, members) in index.iter() {
                if members.len() > 2 {
                    return violation(index, image, members, "cardinality exceeds 2");
                }
                if members.len() == 2 {
                    let mut m = members.to_vec();
                    m.sort_by(|p, q| order.cmp_points(&p.0, &q.0).then(order.cmp_points(&p.1, &q.1)));
                    let ((x0, y0), (x1, y1)) = (&m[0], &m[1]);
                    let step_y = x1 == x0 && *y1 == y0 + &unit;
                    let step_x = y1 == y0 && *x1 == x0 + &unit;
                    if !step_x && !step_y {
                        return violation(index, image, members, "two-element fiber is not a unit step");
                    }
                    let other = index.side.other();
                    if op.apply(other, x1, y1) != &op.apply(other, x0, y0) + &unit {
                        return violation(index, image, members, "complementary image does not advance by one unit");
                    }
                }
            }
        }
        for (x, y) in self.atoms.keys() {
            let sm = minus.get(&op.t_minus(x, y)).expect("support pair has a fiber");
            let sp = plus.get(&op.t_plus(x, y)).expect("support pair has a fiber");
            if sm.len() == 2 && sp.len() == 2 && !(aligned(sm, sp, &unit) && aligned(sp, sm, &unit)) {
                let mut members = sm.to_vec();
                members.extend(sp.iter().cloned());
                return VerificationReport::violated(
                    CHECK,
                    Witness::Fiber {
                        side: Side::Minus,
                        image: op.t_minus(x, y),
                        members: members.into_iter().map(|(a, b)| [a, b]).collect(),
                        rule: format!("fibers through ({x}, {y}) are not aligned (first two members minus, last two plus)"),
                    },
                );
            }
        }
        VerificationReport::verified(CHECK)
    }
}

// every member of `from` sits on, or one diagonal unit step from, a member of `to`
fn aligned(from: &[SupportPair], to: &[SupportPair], unit: &LatticePoint) -> bool {
    from.iter().all(|(x, y)| {
        to.iter().any(|(a, b)| {
            (x == a && y == b)
                || (*x == a + unit && *y == b + unit)
                || (*x == a - unit && *y == b - unit)
        })
    })
}

fn collect_atoms(
    dim: usize,
    entries: impl IntoIterator<Item = (SupportPair, BigRational)>,
) -> Result<BTreeMap<SupportPair, BigRational>> {
    let mut atoms: BTreeMap<SupportPair, BigRational> = BTreeMap::new();
    for ((x, y), w) in entries {
        same_dim(dim, x.dim())?;
        same_dim(dim, y.dim())?;
        if w < BigRational::zero() {
            return Err(Error::NegativeWeight(format_rational(&w), format!("({x}, {y})")));
        }
        if w.is_zero() {
            continue;
        }
        *atoms.entry((x, y)).or_insert_with(BigRational::zero) += w;
    }
    if atoms.is_empty() {
        return Err(Error::EmptySupport);
    }
    let total = atoms.values().fold(BigRational::zero(), |a, w| a + w);
    if !total.is_one() {
        return Err(Error::NotProbability(format_rational(&total)));
    }
    Ok(atoms)
}

/// `S_side(a)`: the support pairs sent to `a` by `T_side`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberIndex {
    side: Side,
    fibers: BTreeMap<LatticePoint, Vec<SupportPair>>,
}

impl FiberIndex {
    pub fn side(&self) -> Side {
        self.side
    }

    /// Members of `S(a)`, or `None` when `a` is not an image point.
    pub fn get(&self, a: &LatticePoint) -> Option<&[SupportPair]> {
        self.fibers.get(a).map(Vec::as_slice)
    }

    pub fn cardinality(&self, a: &LatticePoint) -> usize {
        self.fibers.get(a).map_or(0, Vec::len)
    }

    /// Image points with their fibers, in lexicographic order of the image.
    pub fn iter(&self) -> impl Iterator<Item = (&LatticePoint, &[SupportPair])> {
        self.fibers.iter().map(|(a, v)| (a, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }
}

/// One conditional block coupling inside a Knothe coupling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalCoupling {
    /// Block index (0-based).
    pub level: usize,
    /// `x_{1:level}` and `y_{1:level}`; `None` at the first block.
    pub x_prefix: Option<LatticePoint>,
    pub y_prefix: Option<LatticePoint>,
    /// Mass of the prefix pair under the full coupling.
    pub prefix_mass: BigRational,
    pub coupling: Coupling,
}

/// A Knothe coupling together with every conditional block coupling used to build it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnotheCoupling {
    pub coupling: Coupling,
    pub conditionals: Vec<ConditionalCoupling>,
}

impl KnotheCoupling {
    pub fn new(mu: &ProbabilityMeasure, nu: &ProbabilityMeasure, decomposition: &Decomposition) -> Result<Self> {
        same_dim(decomposition.total_dim(), mu.dim())?;
        same_dim(decomposition.total_dim(), nu.dim())?;
        let fam_mu = mu.disintegrate(decomposition)?;
        let fam_nu = nu.disintegrate(decomposition)?;
        let mut atoms = Vec::new();
        let mut conditionals = Vec::new();
        let mut stack = vec![(fam_mu.root(), fam_nu.root(), None::<LatticePoint>, None::<LatticePoint>, BigRational::one())];
        // depth-first with an explicit stack; children pushed in reverse keep block order
        while let Some((node_mu, node_nu, xp, yp, mass)) = stack.pop() {
            let level = node_mu.level;
            let order = &decomposition.blocks()[level].order;
            let block = Coupling::monotone(&node_mu.marginal, &node_nu.marginal, order)?;
            let last = level + 1 == decomposition.num_blocks();
            let mut children: Vec<(&ConditionalNode, &ConditionalNode, LatticePoint, LatticePoint, BigRational)> = Vec::new();
            for ((a, b), w) in block.atoms() {
                let xa = xp.as_ref().map_or_else(|| a.clone(), |p| p.concat(a));
                let yb = yp.as_ref().map_or_else(|| b.clone(), |p| p.concat(b));
                let m = &mass * w;
                if last {
                    atoms.push(((xa, yb), m));
                } else {
                    children.push((node_mu.child(a).unwrap(), node_nu.child(b).unwrap(), xa, yb, m));
                }
            }
            conditionals.push(ConditionalCoupling { level, x_prefix: xp, y_prefix: yp, prefix_mass: mass, coupling: block });
            for (cm, cn, xa, yb, m) in children.into_iter().rev() {
                stack.push((cm, cn, Some(xa), Some(yb), m));
            }
        }
        let coupling = Coupling::new(mu.clone(), nu.clone(), atoms)?;
        Ok(Self { coupling, conditionals })
    }

    /// Each conditional block coupling has monotone support for its block order.
    pub fn check_blockwise_monotone(&self, decomposition: &Decomposition) -> VerificationReport {
        for c in &self.conditionals {
            let r = c.coupling.check_support_monotone(&decomposition.blocks()[c.level].order);
            if !r.is_verified() {
                return r.with_note(format!("block {} conditional coupling", c.level));
            }
        }
        VerificationReport::verified("support_monotone").with_note("every conditional block coupling")
    }

    /// Fiber structure of every conditional block coupling under the block
    /// section `T_i((a, .), (b, .))` of `op` at its prefix pair.
    pub fn check_fiber_structure(&self, op: &LatticeOperation) -> VerificationReport {
        for c in &self.conditionals {
            let section = op.section(c.level, c.x_prefix.as_ref(), c.y_prefix.as_ref());
            let r = c.coupling.check_fiber_structure(&section);
            if !r.is_verified() {
                return r.with_note(format!(
                    "block {} conditional coupling at prefixes {:?} / {:?}",
                    c.level, c.x_prefix, c.y_prefix
                ));
            }
        }
        VerificationReport::verified("fiber_structure").with_note("every conditional block coupling")
    }
}

#[derive(Serialize, Deserialize)]
struct PairAtomSpec {
    x: LatticePoint,
    y: LatticePoint,
    w: String,
}

#[derive(Serialize, Deserialize)]
struct CouplingSpec {
    dim: usize,
    atoms: Vec<PairAtomSpec>,
}

impl Serialize for Coupling {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CouplingSpec {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|((x, y), w)| PairAtomSpec { x: x.clone(), y: y.clone(), w: format_rational(w) })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Coupling {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let spec = CouplingSpec::deserialize(deserializer)?;
        let entries = spec
            .atoms
            .into_iter()
            .map(|a| Ok(((a.x, a.y), parse_rational(&a.w)?)))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Coupling::from_atoms(spec.dim, entries).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_order::Block;
    use crate::operations::{DifferenceDefault, DifferenceMap};
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn p(c: &[i64]) -> LatticePoint {
        LatticePoint::ints(c)
    }

    fn pts1(v: &[i64]) -> Vec<LatticePoint> {
        v.iter().map(|&c| p(&[c])).collect()
    }

    fn lex1() -> AdditiveTotalOrder {
        AdditiveTotalOrder::lex(1)
    }

    /// Quantile coupling computed the slow way: cut (0, 1] at every breakpoint
    /// of both cdfs and read off both quantiles on each piece.
    fn brute_force_monotone(mu: &ProbabilityMeasure, nu: &ProbabilityMeasure, order: &AdditiveTotalOrder) -> BTreeMap<SupportPair, BigRational> {
        let mut cuts: Vec<BigRational> = vec![BigRational::zero()];
        for m in [mu, nu] {
            for x in m.support() {
                cuts.push(m.cdf(order, x).unwrap());
            }
        }
        cuts.sort();
        cuts.dedup();
        let mut out = BTreeMap::new();
        for w in cuts.windows(2) {
            let t = &w[1];
            let key = (mu.quantile(order, t).unwrap(), nu.quantile(order, t).unwrap());
            *out.entry(key).or_insert_with(BigRational::zero) += &w[1] - &w[0];
        }
        out
    }

    fn derived_coupling() -> Coupling {
        let mu = ProbabilityMeasure::uniform(pts1(&[0, 1, 2]));
        let nu = ProbabilityMeasure::uniform(pts1(&[0, 1]));
        Coupling::monotone(&mu, &nu, &lex1()).unwrap()
    }

    #[test]
    fn monotone_coupling_examples() {
        let pi = derived_coupling();
        let expected: BTreeMap<SupportPair, BigRational> = [
            ((p(&[0]), p(&[0])), ratio(1, 3)),
            ((p(&[1]), p(&[0])), ratio(1, 6)),
            ((p(&[1]), p(&[1])), ratio(1, 6)),
            ((p(&[2]), p(&[1])), ratio(1, 3)),
        ]
        .into_iter()
        .collect();
        assert_eq!(pi.atoms, expected);
        assert_eq!(pi.atoms, brute_force_monotone(pi.left(), pi.right(), &lex1()));

        let mu = ProbabilityMeasure::new(1, [(p(&[3]), ratio(1, 4)), (p(&[-2]), ratio(3, 4))]).unwrap();
        let diag = Coupling::monotone(&mu, &mu, &lex1()).unwrap();
        assert!(diag.atoms().all(|((x, y), w)| x == y && *w == mu.weight(x)));

        let nu = ProbabilityMeasure::uniform(pts1(&[4, 5, 9]));
        let dirac = ProbabilityMeasure::dirac(p(&[0]));
        assert_eq!(Coupling::monotone(&dirac, &nu, &lex1()).unwrap(), Coupling::product(&dirac, &nu).unwrap());

        assert!(Coupling::monotone(&dirac, &ProbabilityMeasure::dirac(p(&[0, 0])), &lex1()).is_err());
    }

    #[test]
    fn knothe_coupling_examples() {
        let mu = ProbabilityMeasure::uniform(pts1(&[0, 1, 2]));
        let nu = ProbabilityMeasure::uniform(pts1(&[0, 1]));
        assert_eq!(
            Coupling::knothe(&mu, &nu, &Decomposition::standard(1)).unwrap(),
            Coupling::monotone(&mu, &nu, &lex1()).unwrap()
        );

        let prod = |a: &[(i64, BigRational)], b: &[(i64, BigRational)]| {
            ProbabilityMeasure::new(
                2,
                a.iter().flat_map(|(x, wx)| b.iter().map(move |(y, wy)| (p(&[*x, *y]), wx * wy))),
            )
            .unwrap()
        };
        let rho = [(0, ratio(1, 3)), (1, ratio(2, 3))];
        let sigma = [(0, ratio(1, 2)), (5, ratio(1, 2))];
        let rho2 = [(-1, ratio(1, 4)), (3, ratio(3, 4))];
        let sigma2 = [(2, ratio(1, 5)), (4, ratio(1, 5)), (6, ratio(3, 5))];
        let (mu, nu) = (prod(&rho, &sigma), prod(&rho2, &sigma2));
        let pi = Coupling::knothe(&mu, &nu, &Decomposition::standard(2)).unwrap();
        let as_pm = |v: &[(i64, BigRational)]| ProbabilityMeasure::new(1, v.iter().map(|(x, w)| (p(&[*x]), w.clone()))).unwrap();
        let first = Coupling::monotone(&as_pm(&rho), &as_pm(&rho2), &lex1()).unwrap();
        let second = Coupling::monotone(&as_pm(&sigma), &as_pm(&sigma2), &lex1()).unwrap();
        let expected: BTreeMap<SupportPair, BigRational> = first
            .atoms()
            .flat_map(|((a, b), w1)| second.atoms().map(move |((c, d), w2)| ((a.concat(c), b.concat(d)), w1 * w2)))
            .collect();
        assert_eq!(pi.atoms, expected);

        let diag = Coupling::knothe(&mu, &mu, &Decomposition::standard(2)).unwrap();
        assert!(diag.atoms().all(|((x, y), _)| x == y));
        assert!(Coupling::knothe(&mu, &nu, &Decomposition::standard(3)).is_err());
    }

    #[test]
    fn marginal_examples() {
        let d = Coupling::dirac(p(&[0]), p(&[0])).unwrap();
        assert_eq!(d.marginal(Projection::First), ProbabilityMeasure::dirac(p(&[0])));
        let mu = ProbabilityMeasure::uniform(pts1(&[0, 3]));
        let nu = ProbabilityMeasure::new(1, [(p(&[1]), ratio(1, 3)), (p(&[2]), ratio(2, 3))]).unwrap();
        let prod = Coupling::product(&mu, &nu).unwrap();
        assert_eq!(prod.marginal(Projection::First), mu);
        assert_eq!(prod.marginal(Projection::Second), nu);
        let pi = derived_coupling();
        assert_eq!(pi.marginal(Projection::First), ProbabilityMeasure::uniform(pts1(&[0, 1, 2])));
        assert_eq!(pi.marginal(Projection::Second), ProbabilityMeasure::uniform(pts1(&[0, 1])));
        assert!(Coupling::new(mu.clone(), mu.clone(), [((p(&[0]), p(&[0])), int(1))]).is_err());
    }

    #[test]
    fn pushforward_of_derived_coupling() {
        let pi = derived_coupling();
        let op = LatticeOperation::midpoint(1).unwrap();
        let km = pi.push_by(&op, Side::Minus).unwrap();
        assert_eq!(km, ProbabilityMeasure::uniform(pts1(&[0, 1])));
        let kp = pi.push_by(&op, Side::Plus).unwrap();
        assert_eq!(kp, ProbabilityMeasure::uniform(pts1(&[0, 1, 2])));
        assert_eq!(pi.as_measure().dim(), 2);
    }

    #[test]
    fn support_monotone_examples() {
        assert!(derived_coupling().check_support_monotone(&lex1()).is_verified());
        let u = ProbabilityMeasure::uniform(pts1(&[0, 1]));
        let r = Coupling::product(&u, &u).unwrap().check_support_monotone(&lex1());
        assert_eq!(r.witness, Some(Witness::Crossing { first: [p(&[0]), p(&[1])], second: [p(&[1]), p(&[0])] }));
        assert!(Coupling::dirac(p(&[4]), p(&[-4])).unwrap().check_support_monotone(&lex1()).is_verified());
    }

    #[test]
    fn fiber_examples() {
        let op = LatticeOperation::midpoint(1).unwrap();
        let d = Coupling::dirac(p(&[0]), p(&[3])).unwrap();
        let f = d.fibers(&op, Side::Minus).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.cardinality(&p(&[1])), 1);

        let pi = derived_coupling();
        let fm = pi.fibers(&op, Side::Minus).unwrap();
        assert_eq!(fm.get(&p(&[0])).unwrap(), &[(p(&[0]), p(&[0])), (p(&[1]), p(&[0]))]);
        assert_eq!(fm.get(&p(&[1])).unwrap(), &[(p(&[1]), p(&[1])), (p(&[2]), p(&[1]))]);
        let fp = pi.fibers(&op, Side::Plus).unwrap();
        assert_eq!(fp.get(&p(&[0])).unwrap(), &[(p(&[0]), p(&[0]))]);
        assert_eq!(fp.get(&p(&[1])).unwrap(), &[(p(&[1]), p(&[0])), (p(&[1]), p(&[1]))]);
        assert_eq!(fp.get(&p(&[2])).unwrap(), &[(p(&[2]), p(&[1]))]);
        assert_eq!(fp.cardinality(&p(&[7])), 0);
    }

    #[test]
    fn fiber_structure_examples() {
        let mid = LatticeOperation::midpoint(1).unwrap();
        assert!(derived_coupling().check_fiber_structure(&mid).is_verified());
        assert!(Coupling::dirac(p(&[2]), p(&[-1])).unwrap().check_fiber_structure(&mid).is_verified());
        let u = ProbabilityMeasure::uniform(pts1(&[0, 1]));
        let r = Coupling::product(&u, &u).unwrap().check_fiber_structure(&mid);
        assert_eq!(r.outcome, crate::report::Outcome::Inapplicable);
        let two_blocks = LatticeOperation::midpoint(2).unwrap();
        let pi2 = Coupling::dirac(p(&[0, 0]), p(&[0, 0])).unwrap();
        assert_eq!(pi2.check_fiber_structure(&two_blocks).outcome, crate::report::Outcome::Inapplicable);
    }

    #[test]
    fn fiber_structure_flags_meet_join_gap() {
        // mu = {0: 1/3, 2: 1/2, 3: 1/6}, nu = delta_2: max sends (0,2) and (2,2) to 2
        let mu = ProbabilityMeasure::new(1, [(p(&[0]), ratio(1, 3)), (p(&[2]), ratio(1, 2)), (p(&[3]), ratio(1, 6))]).unwrap();
        let nu = ProbabilityMeasure::dirac(p(&[2]));
        let pi = Coupling::monotone(&mu, &nu, &lex1()).unwrap();
        let r = pi.check_fiber_structure(&LatticeOperation::meet_join(1).unwrap());
        match r.witness {
            Some(Witness::Fiber { side, image, rule, .. }) => {
                assert_eq!(side, Side::Plus);
                assert_eq!(image, p(&[2]));
                assert!(rule.contains("unit step"));
            }
            other => panic!("unexpected witness {other:?}"),
        }
    }

    #[test]
    fn fiber_structure_flags_midpoint_misalignment() {
        let mu = ProbabilityMeasure::new(
            1,
            [(-10, 16, 93), (-7, 13, 93), (-4, 16, 93), (3, 13, 93), (7, 7, 93), (8, 10, 93), (9, 5, 31), (10, 1, 31)]
                .map(|(x, n, d)| (p(&[x]), ratio(n, d))),
        )
        .unwrap();
        let nu = ProbabilityMeasure::new(
            1,
            [(-10, 16, 53), (-1, 10, 53), (3, 5, 53), (8, 6, 53), (10, 16, 53)].map(|(x, n, d)| (p(&[x]), ratio(n, d))),
        )
        .unwrap();
        let pi = Coupling::monotone(&mu, &nu, &lex1()).unwrap();
        let r = pi.check_fiber_structure(&LatticeOperation::midpoint(1).unwrap());
        assert!(matches!(r.witness, Some(Witness::Fiber { ref rule, .. }) if rule.contains("aligned")), "{}", r.to_json());
    }

    #[test]
    fn knothe_conditionals_cover_every_prefix_pair() {
        let mu = ProbabilityMeasure::uniform([p(&[0, 0]), p(&[0, 1]), p(&[1, 0])]);
        let nu = ProbabilityMeasure::uniform([p(&[2, 5]), p(&[3, -1])]);
        let d = Decomposition::standard(2);
        let k = KnotheCoupling::new(&mu, &nu, &d).unwrap();
        assert_eq!(k.conditionals[0].level, 0);
        let first_block_pairs = k.conditionals[0].coupling.len();
        assert_eq!(k.conditionals.len(), 1 + first_block_pairs);
        let total = k.conditionals[1..].iter().fold(BigRational::zero(), |a, c| a + &c.prefix_mass);
        assert!(total.is_one());
        assert!(k.check_blockwise_monotone(&d).is_verified());
        let op = LatticeOperation::product(LatticeOperation::midpoint(1).unwrap(), LatticeOperation::meet_join(1).unwrap());
        let r = k.check_fiber_structure(&op);
        assert_ne!(r.outcome, crate::report::Outcome::Inapplicable);
    }

    #[test]
    fn coupling_json() {
        let pi = derived_coupling();
        let s = serde_json::to_string(&pi).unwrap();
        assert_eq!(
            s,
            r#"{"dim":1,"atoms":[{"x":[0],"y":[0],"w":"1/3"},{"x":[1],"y":[0],"w":"1/6"},{"x":[1],"y":[1],"w":"1/6"},{"x":[2],"y":[1],"w":"1/3"}]}"#
        );
        let back: Coupling = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pi);
        assert!(serde_json::from_str::<Coupling>(r#"{"dim":1,"atoms":[{"x":[0],"y":[0],"w":"1/2"}]}"#).is_err());
    }

    fn arb_measure(dim: usize, lo: i64, hi: i64) -> impl Strategy<Value = ProbabilityMeasure> {
        prop::collection::vec((prop::collection::vec(lo..=hi, dim), 1i64..=20), 1..=8).prop_map(move |atoms| {
            FiniteMeasure::new(dim, atoms.into_iter().map(|(c, w)| (LatticePoint::ints(&c), int(w))))
                .unwrap()
                .normalize()
        })
    }

    fn arb_order(dim: usize) -> impl Strategy<Value = AdditiveTotalOrder> {
        (Just((0..dim).collect::<Vec<_>>()).prop_shuffle(), prop::collection::vec(prop::bool::ANY, dim)).prop_map(
            |(perm, s)| AdditiveTotalOrder::new(perm, s.into_iter().map(|b| if b { 1 } else { -1 }).collect()).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn monotone_coupling_laws(
            (mu, nu, order) in (1usize..=2).prop_flat_map(|d| (arb_measure(d, -5, 5), arb_measure(d, -5, 5), arb_order(d)))
        ) {
            let pi = Coupling::monotone(&mu, &nu, &order).unwrap();
            prop_assert!(pi.has_exact_marginals());
            prop_assert!(pi.check_support_monotone(&order).is_verified());
            prop_assert!(pi.len() < mu.len() + nu.len());
            prop_assert_eq!(&pi.atoms, &brute_force_monotone(&mu, &nu, &order));
        }

        #[test]
        fn knothe_coupling_laws(mu in arb_measure(3, -2, 2), nu in arb_measure(3, -2, 2), split in prop::bool::ANY) {
            let d = if split {
                Decomposition::standard(3)
            } else {
                Decomposition::new(vec![
                    Block { dim: 2, order: AdditiveTotalOrder::new(vec![1, 0], vec![1, -1]).unwrap() },
                    Block { dim: 1, order: AdditiveTotalOrder::new(vec![0], vec![-1]).unwrap() },
                ]).unwrap()
            };
            let k = KnotheCoupling::new(&mu, &nu, &d).unwrap();
            prop_assert!(k.coupling.has_exact_marginals());
            prop_assert_eq!(k.coupling.left(), &mu);
            prop_assert!(k.check_blockwise_monotone(&d).is_verified());
        }

        #[test]
        fn dominated_measures_give_ordered_support(mu in arb_measure(1, -6, 6), shift in 0i64..=4, extra in 0i64..=3) {
            // nu is mu pushed up: every atom moves right by shift, the top atoms by more
            let nu = mu.pushforward(|x| {
                let c = &x.coords()[0];
                let bump = if *c > num_bigint::BigInt::from(0) { shift + extra } else { shift };
                x.map_coords(|v| v + bump)
            }).unwrap();
            let order = lex1();
            let dominated = mu.support().chain(nu.support()).all(|x| nu.cdf(&order, x).unwrap() <= mu.cdf(&order, x).unwrap());
            prop_assume!(dominated);
            let pi = Coupling::monotone(&mu, &nu, &order).unwrap();
            prop_assert!(pi.atoms().all(|((x, y), _)| order.le(x, y)));
        }

        #[test]
        fn fiber_structure_on_dense_supports(mu in arb_measure(1, 0, 3), nu in arb_measure(1, 0, 3)) {
            // on intervals of consecutive integers the midpoint fibers never jump
            let pi = Coupling::monotone(&mu, &nu, &lex1()).unwrap();
            let r = pi.check_fiber_structure(&LatticeOperation::midpoint(1).unwrap());
            prop_assert_ne!(r.outcome, crate::report::Outcome::Inapplicable);
        }
    }

    #[test]
    fn difference_map_sections_used_by_knothe_fiber_checks() {
        let op = LatticeOperation::from_difference_map(2, Decomposition::standard(2), DifferenceMap::new(DifferenceDefault::FloorHalf)).unwrap();
        let s = op.section(1, Some(&p(&[3])), Some(&p(&[-1])));
        assert_eq!(s.dim(), 1);
        assert_eq!(s.t_minus(&p(&[1]), &p(&[4])), p(&[2]));
        assert_eq!(s.t_plus(&p(&[1]), &p(&[4])), p(&[3]));
    }
}
