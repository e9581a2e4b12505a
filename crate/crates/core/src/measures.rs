//! Exact finitely supported measures on Z^n.

use std::collections::BTreeMap;
use std::ops::Deref;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice_order::{same_dim, AdditiveTotalOrder, Decomposition, LatticePoint};
use crate::rational::{format_rational, ln_rational, parse_rational, to_f64};

/// A finitely supported measure with strictly positive rational weights.
///
/// Atoms are kept sorted by the ambient lexicographic order, so iteration and
/// serialization are deterministic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteMeasure {
    dim: usize,
    atoms: BTreeMap<LatticePoint, BigRational>,
    total: BigRational,
}

impl FiniteMeasure {
    /// Drops zero weights and merges repeated points.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (LatticePoint, BigRational)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut atoms: BTreeMap<LatticePoint, BigRational> = BTreeMap::new();
        for (x, w) in entries {
            same_dim(dim, x.dim())?;
            if w.is_negative() {
                return Err(Error::NegativeWeight(format_rational(&w), x.to_string()));
            }
            if w.is_zero() {
                continue;
            }
            *atoms.entry(x).or_insert_with(BigRational::zero) += w;
        }
        Self::from_atoms(dim, atoms)
    }

    fn from_atoms(dim: usize, atoms: BTreeMap<LatticePoint, BigRational>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        let total = atoms.values().fold(BigRational::zero(), |acc, w| acc + w);
        Ok(Self { dim, atoms, total })
    }

    /// Unit weight on every listed point.
    pub fn indicator(dim: usize, points: impl IntoIterator<Item = LatticePoint>) -> Result<Self> {
        Self::new(dim, points.into_iter().map(|x| (x, BigRational::one())))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_mass(&self) -> &BigRational {
        &self.total
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Weight at `x`; zero off the support.
    pub fn weight(&self, x: &LatticePoint) -> BigRational {
        self.atoms.get(x).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn get(&self, x: &LatticePoint) -> Option<&BigRational> {
        self.atoms.get(x)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&LatticePoint, &BigRational)> {
        self.atoms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &LatticePoint> {
        self.atoms.keys()
    }

    pub fn normalize(&self) -> ProbabilityMeasure {
        let atoms = self.atoms.iter().map(|(x, w)| (x.clone(), w / &self.total)).collect();
        ProbabilityMeasure(Self { dim: self.dim, atoms, total: BigRational::one() })
    }

    pub fn scale(&self, factor: &BigRational) -> Result<Self> {
        Self::new(self.dim, self.atoms.iter().map(|(x, w)| (x.clone(), w * factor)))
    }

    /// Image measure under `map`; the weight of a target is the sum over its preimage.
    pub fn pushforward(&self, map: impl Fn(&LatticePoint) -> LatticePoint) -> Result<Self> {
        let mut out: BTreeMap<LatticePoint, BigRational> = BTreeMap::new();
        let mut dim = None;
        for (x, w) in &self.atoms {
            let y = map(x);
            match dim {
                None => dim = Some(y.dim()),
                Some(d) => same_dim(d, y.dim())?,
            }
            *out.entry(y).or_insert_with(BigRational::zero) += w;
        }
        Self::from_atoms(dim.expect("nonempty support"), out)
    }

    /// Atoms sorted by `order` (ties cannot occur on a support).
    pub fn sorted_by(&self, order: &AdditiveTotalOrder) -> Result<Vec<(&LatticePoint, &BigRational)>> {
        same_dim(order.dim(), self.dim)?;
        let mut v: Vec<_> = self.atoms.iter().collect();
        v.sort_by(|a, b| order.cmp_points(a.0, b.0));
        Ok(v)
    }
}

/// A [`FiniteMeasure`] with total mass exactly 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbabilityMeasure(FiniteMeasure);

impl Deref for ProbabilityMeasure {
    type Target = FiniteMeasure;
    fn deref(&self) -> &FiniteMeasure {
        &self.0
    }
}

impl ProbabilityMeasure {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (LatticePoint, BigRational)>) -> Result<Self> {
        Self::try_from(FiniteMeasure::new(dim, entries)?)
    }

    pub fn dirac(x: LatticePoint) -> Self {
        let dim = x.dim();
        Self(FiniteMeasure::new(dim, [(x, BigRational::one())]).unwrap())
    }

    /// Uniform on the distinct points given. Panics on an empty list.
    pub fn uniform(points: impl IntoIterator<Item = LatticePoint>) -> Self {
        let pts: Vec<_> = points.into_iter().collect();
        let dim = pts.first().expect("uniform measure needs a point").dim();
        FiniteMeasure::indicator(dim, pts).expect("uniform measure").normalize()
    }

    pub fn as_measure(&self) -> &FiniteMeasure {
        &self.0
    }

    pub fn into_measure(self) -> FiniteMeasure {
        self.0
    }

    /// `F(x) = mass of { g : g << x or g = x }`.
    pub fn cdf(&self, order: &AdditiveTotalOrder, x: &LatticePoint) -> Result<BigRational> {
        same_dim(order.dim(), self.dim)?;
        same_dim(self.dim, x.dim())?;
        Ok(self.0.atoms.iter().filter(|(g, _)| order.le(g, x)).fold(BigRational::zero(), |acc, (_, w)| acc + w))
    }

    /// The order-least support point whose cdf reaches `t`, for `0 < t <= 1`.
    pub fn quantile(&self, order: &AdditiveTotalOrder, t: &BigRational) -> Result<LatticePoint> {
        if !t.is_positive() || *t > BigRational::one() {
            return Err(Error::QuantileOutOfRange(format_rational(t)));
        }
        let mut acc = BigRational::zero();
        for (x, w) in self.sorted_by(order)? {
            acc += w;
            if acc >= *t {
                return Ok(x.clone());
            }
        }
        unreachable!("total mass is 1")
    }

    /// `sum mu(x) log mu(x)` relative to counting measure, accumulated in
    /// lexicographic support order.
    pub fn relative_entropy(&self) -> f64 {
        self.0.atoms.values().map(|w| to_f64(w) * ln_rational(w)).sum()
    }

    pub fn pushforward(&self, map: impl Fn(&LatticePoint) -> LatticePoint) -> Result<Self> {
        Ok(Self(self.0.pushforward(map)?))
    }

    pub fn disintegrate(&self, decomposition: &Decomposition) -> Result<ConditionalFamily> {
        ConditionalFamily::new(self, decomposition)
    }
}

impl TryFrom<FiniteMeasure> for ProbabilityMeasure {
    type Error = Error;
    fn try_from(m: FiniteMeasure) -> Result<Self> {
        if !m.total.is_one() {
            return Err(Error::NotProbability(format_rational(&m.total)));
        }
        Ok(Self(m))
    }
}

/// One level of a disintegration: the conditional law of block `level` given
/// the prefix leading here, plus the subtrees for each value of that block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalNode {
    pub level: usize,
    pub marginal: ProbabilityMeasure,
    pub children: BTreeMap<LatticePoint, ConditionalNode>,
}

impl ConditionalNode {
    fn build(decomposition: &Decomposition, level: usize, atoms: Vec<(Vec<LatticePoint>, BigRational)>) -> Self {
        let block_dim = decomposition.blocks()[level].dim;
        let total = atoms.iter().fold(BigRational::zero(), |acc, (_, w)| acc + w);
        let mut groups: BTreeMap<LatticePoint, Vec<(Vec<LatticePoint>, BigRational)>> = BTreeMap::new();
        for (parts, w) in atoms {
            groups.entry(parts[level].clone()).or_default().push((parts, w));
        }
        let marginal = ProbabilityMeasure(
            FiniteMeasure::new(
                block_dim,
                groups
                    .iter()
                    .map(|(v, g)| (v.clone(), g.iter().fold(BigRational::zero(), |a, (_, w)| a + w) / &total)),
            )
            .expect("nonempty group"),
        );
        let children = if level + 1 == decomposition.num_blocks() {
            BTreeMap::new()
        } else {
            groups.into_iter().map(|(v, g)| (v, Self::build(decomposition, level + 1, g))).collect()
        };
        Self { level, marginal, children }
    }

    /// Conditional node after fixing this level's block value.
    pub fn child(&self, value: &LatticePoint) -> Option<&ConditionalNode> {
        self.children.get(value)
    }
}

/// Disintegration `mu(x) = mu^1(x_1) mu^2(x_2 | x_1) ... mu^k(x_k | x_{1:k-1})`.
///
/// Prefixes of zero mass are absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalFamily {
    decomposition: Decomposition,
    root: ConditionalNode,
}

impl ConditionalFamily {
    pub fn new(mu: &ProbabilityMeasure, decomposition: &Decomposition) -> Result<Self> {
        same_dim(decomposition.total_dim(), mu.dim())?;
        let atoms = mu
            .atoms()
            .map(|(x, w)| (decomposition.split(x).expect("dimension checked"), w.clone()))
            .collect();
        Ok(Self { decomposition: decomposition.clone(), root: ConditionalNode::build(decomposition, 0, atoms) })
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn root(&self) -> &ConditionalNode {
        &self.root
    }

    /// Node holding `mu^{i+1}(. | prefix)` where `prefix` lists the first `i` block values.
    pub fn node(&self, prefix: &[LatticePoint]) -> Option<&ConditionalNode> {
        prefix.iter().try_fold(&self.root, |node, v| node.child(v))
    }

    /// Product of conditionals along the path of `x`; zero off the support.
    pub fn density(&self, x: &LatticePoint) -> Result<BigRational> {
        let parts = self.decomposition.split(x)?;
        let mut node = &self.root;
        let mut acc = BigRational::one();
        for (i, v) in parts.iter().enumerate() {
            match node.marginal.get(v) {
                Some(w) => acc *= w,
                None => return Ok(BigRational::zero()),
            }
            if i + 1 < parts.len() {
                node = node.child(v).expect("child exists for every support value");
            }
        }
        Ok(acc)
    }

    /// Rebuilds the measure by multiplying conditionals along every full path.
    pub fn recombine(&self) -> ProbabilityMeasure {
        fn walk(node: &ConditionalNode, prefix: Option<LatticePoint>, w: BigRational, out: &mut Vec<(LatticePoint, BigRational)>) {
            for (v, p) in node.marginal.atoms() {
                let x = match &prefix {
                    Some(pre) => pre.concat(v),
                    None => v.clone(),
                };
                let wx = &w * p;
                match node.child(v) {
                    Some(child) => walk(child, Some(x), wx, out),
                    None => out.push((x, wx)),
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, None, BigRational::one(), &mut out);
        ProbabilityMeasure::new(self.decomposition.total_dim(), out).expect("recombination of a probability measure")
    }
}

#[derive(Serialize, Deserialize)]
struct AtomSpec {
    x: LatticePoint,
    w: String,
}

#[derive(Serialize, Deserialize)]
struct MeasureSpec {
    dim: usize,
    atoms: Vec<AtomSpec>,
}

impl Serialize for FiniteMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureSpec {
            dim: self.dim,
            atoms: self.atoms.iter().map(|(x, w)| AtomSpec { x: x.clone(), w: format_rational(w) }).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FiniteMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let spec = MeasureSpec::deserialize(deserializer)?;
        let entries = spec
            .atoms
            .into_iter()
            .map(|a| Ok((a.x, parse_rational(&a.w)?)))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        FiniteMeasure::new(spec.dim, entries).map_err(D::Error::custom)
    }
}

impl Serialize for ProbabilityMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ProbabilityMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        ProbabilityMeasure::try_from(FiniteMeasure::deserialize(deserializer)?).map_err(D::Error::custom)
    }
}
