//! Points of Z^n, signed-permutation lexicographic orders and block decompositions.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of Z^n with arbitrary-precision coordinates.
///
/// The derived `Ord` is the ambient (standard) lexicographic order, which is
/// what keys every map in this crate. Order-dependent algorithms take an
/// explicit [`AdditiveTotalOrder`] instead.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(Vec<BigInt>);

impl LatticePoint {
    pub fn new(coords: Vec<BigInt>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::ZeroDimension);
        }
        Ok(Self(coords))
    }

    /// Shorthand for small coordinates. Panics on an empty slice.
    pub fn ints(coords: &[i64]) -> Self {
        assert!(!coords.is_empty(), "lattice points need at least one coordinate");
        Self(coords.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim > 0);
        Self(vec![BigInt::zero(); dim])
    }

    /// The `i`-th standard basis vector (0-based).
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut p = Self::zero(dim);
        p.0[i] = BigInt::one();
        p
    }

    pub fn splat(dim: usize, value: i64) -> Self {
        assert!(dim > 0);
        Self(vec![BigInt::from(value); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(self + other)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(self - other)
    }

    /// Coordinates `range` as a new point.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self(self.0[range].to_vec())
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut c = self.0.clone();
        c.extend(other.0.iter().cloned());
        Self(c)
    }

    pub fn map_coords(&self, f: impl FnMut(&BigInt) -> BigInt) -> Self {
        Self(self.0.iter().map(f).collect())
    }

    pub fn zip_with(&self, other: &Self, mut f: impl FnMut(&BigInt, &BigInt) -> BigInt) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Self(self.0.iter().zip(&other.0).map(|(a, b)| f(a, b)).collect())
    }
}

pub(crate) fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        self.map_coords(|c| -c)
    }
}

// Coordinates travel as JSON numbers while they fit in i64 and as decimal
// strings beyond that; both forms are accepted on input.
impl Serialize for LatticePoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for c in &self.0 {
            match i64::try_from(c) {
                Ok(v) => seq.serialize_element(&v)?,
                Err(_) => seq.serialize_element(&c.to_string())?,
            }
        }
        seq.end()
    }
}

struct Coord(BigInt);

impl<'de> Deserialize<'de> for Coord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct CoordVisitor;
        impl Visitor<'_> for CoordVisitor {
            type Value = Coord;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a decimal integer string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Coord, E> {
                Ok(Coord(v.into()))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Coord, E> {
                Ok(Coord(v.into()))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Coord, E> {
                v.trim().parse().map(Coord).map_err(|_| E::custom(format!("bad integer {v:?}")))
            }
        }
        deserializer.deserialize_any(CoordVisitor)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PointVisitor;
        impl<'de> Visitor<'de> for PointVisitor {
            type Value = LatticePoint;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-empty array of integers")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<LatticePoint, A::Error> {
                let mut coords = Vec::new();
                while let Some(Coord(c)) = seq.next_element()? {
                    coords.push(c);
                }
                LatticePoint::new(coords).map_err(de::Error::custom)
            }
        }
        deserializer.deserialize_seq(PointVisitor)
    }
}

/// A signed-permutation lexicographic order on Z^dim.
///
/// `x << y` iff `(signs[k] * x[perm[k]])_k` precedes `(signs[k] * y[perm[k]])_k`
/// lexicographically. Every such order is total and translation invariant.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AdditiveTotalOrder {
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl AdditiveTotalOrder {
    /// `perm` is 0-based here; the JSON form is 1-based.
    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        let dim = perm.len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if signs.len() != dim {
            return Err(Error::InvalidOrder(format!(
                "{} signs for {} coordinates",
                signs.len(),
                dim
            )));
        }
        let mut seen = vec![false; dim];
        for &p in &perm {
            if p >= dim || seen[p] {
                return Err(Error::InvalidOrder(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        if let Some(s) = signs.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::InvalidOrder(format!("sign {s} is not ±1")));
        }
        Ok(Self { perm, signs })
    }

    /// The standard lexicographic order.
    pub fn lex(dim: usize) -> Self {
        assert!(dim > 0);
        Self { perm: (0..dim).collect(), signs: vec![1; dim] }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn compare(&self, x: &LatticePoint, y: &LatticePoint) -> Result<Ordering> {
        same_dim(self.dim(), x.dim())?;
        same_dim(self.dim(), y.dim())?;
        Ok(self.cmp_points(x, y))
    }

    /// Comparison without dimension checks; callers validate dimensions up front.
    pub fn cmp_points(&self, x: &LatticePoint, y: &LatticePoint) -> Ordering {
        for (&p, &s) in self.perm.iter().zip(&self.signs) {
            let ord = x.0[p].cmp(&y.0[p]);
            let ord = if s < 0 { ord.reverse() } else { ord };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    }

    pub fn le(&self, x: &LatticePoint, y: &LatticePoint) -> bool {
        self.cmp_points(x, y) != Ordering::Greater
    }

    /// The least element strictly above 0: `signs[last]` on the last-compared coordinate.
    pub fn unit(&self) -> LatticePoint {
        let last = self.dim() - 1;
        let mut u = LatticePoint::zero(self.dim());
        u.0[self.perm[last]] = BigInt::from(self.signs[last]);
        u
    }

    pub fn sort(&self, points: &mut [LatticePoint]) {
        points.sort_by(|a, b| self.cmp_points(a, b));
    }
}

#[derive(Serialize, Deserialize)]
struct OrderSpec {
    dim: usize,
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl Serialize for AdditiveTotalOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        OrderSpec {
            dim: self.dim(),
            perm: self.perm.iter().map(|p| p + 1).collect(),
            signs: self.signs.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AdditiveTotalOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = OrderSpec::deserialize(deserializer)?;
        if spec.perm.len() != spec.dim {
            return Err(de::Error::custom(format!(
                "order dim {} but perm has {} entries",
                spec.dim,
                spec.perm.len()
            )));
        }
        if spec.perm.contains(&0) {
            return Err(de::Error::custom("perm entries are 1-based"));
        }
        let perm = spec.perm.iter().map(|p| p - 1).collect();
        AdditiveTotalOrder::new(perm, spec.signs).map_err(de::Error::custom)
    }
}

/// One summand G_i of a decomposition of Z^n.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub dim: usize,
    pub order: AdditiveTotalOrder,
}

/// An ordered list of blocks `Z^n = G_1 x ... x G_k`, each with its own order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Decomposition {
    blocks: Vec<Block>,
    #[serde(skip)]
    offsets: Vec<usize>,
}

impl Decomposition {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidDecomposition("no blocks".into()));
        }
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut acc = 0;
        for (i, b) in blocks.iter().enumerate() {
            if b.dim == 0 {
                return Err(Error::InvalidDecomposition(format!("block {i} has dimension 0")));
            }
            if b.order.dim() != b.dim {
                return Err(Error::InvalidDecomposition(format!(
                    "block {i} has dimension {} but its order has dimension {}",
                    b.dim,
                    b.order.dim()
                )));
            }
            offsets.push(acc);
            acc += b.dim;
        }
        offsets.push(acc);
        Ok(Self { blocks, offsets })
    }

    /// `dim` one-dimensional blocks with the standard order.
    pub fn standard(dim: usize) -> Self {
        Self::new((0..dim).map(|_| Block { dim: 1, order: AdditiveTotalOrder::lex(1) }).collect())
            .expect("standard decomposition")
    }

    /// A single block carrying `order`.
    pub fn single(order: AdditiveTotalOrder) -> Self {
        Self::new(vec![Block { dim: order.dim(), order }]).expect("single block")
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().cloned());
        Self::new(blocks).expect("concatenation of valid decompositions")
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Coordinates of blocks `0..i` (empty range for `i == 0`).
    pub fn prefix_len(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Splits `x` into its block components `(x_1, ..., x_k)`.
    pub fn split(&self, x: &LatticePoint) -> Result<Vec<LatticePoint>> {
        same_dim(self.total_dim(), x.dim())?;
        Ok((0..self.num_blocks()).map(|i| x.slice(self.block_range(i))).collect())
    }

    /// The prefixes `x_{1:1}, x_{1:2}, ..., x_{1:k}`.
    pub fn prefixes(&self, x: &LatticePoint) -> Result<Vec<LatticePoint>> {
        same_dim(self.total_dim(), x.dim())?;
        Ok((1..=self.num_blocks()).map(|i| x.slice(0..self.offsets[i])).collect())
    }
}

#[derive(Deserialize)]
struct DecompositionSpec {
    blocks: Vec<Block>,
}

impl<'de> Deserialize<'de> for Decomposition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = DecompositionSpec::deserialize(deserializer)?;
        Decomposition::new(spec.blocks).map_err(de::Error::custom)
    }
}

/// All points of `[-radius, radius]^dim`, enumerated outward from the origin
/// coordinate by coordinate (0, 1, -1, 2, -2, ...) so that the first witness
/// found by a scan is a small one.
pub fn centered_box(dim: usize, radius: i64) -> Vec<LatticePoint> {
    centered_grid(dim, &centered_coords(radius))
}

pub(crate) fn centered_coords(radius: i64) -> Vec<i64> {
    let mut v = vec![0];
    for r in 1..=radius {
        v.push(r);
        v.push(-r);
    }
    v
}

pub(crate) fn centered_grid(dim: usize, coords: &[i64]) -> Vec<LatticePoint> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                coords.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(|c| LatticePoint::ints(&c)).collect()
}
