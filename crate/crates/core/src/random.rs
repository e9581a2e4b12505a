//! Seeded generators for measures, exponents, function quadruples and
//! log-Laplace test functions.
//!
//! Every draw comes from a ChaCha stream keyed by `(seed, purpose)` and
//! selected by the item index, so item `i` is the same whether items are
//! produced in order, out of order, or in parallel.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lattice_order::LatticePoint;
use crate::measures::{FiniteMeasure, ProbabilityMeasure};
use crate::operations::{ExponentQuadruple, LatticeOperation};
use crate::rational::{int, pow, ratio};
use crate::verify::FunctionQuadruple;

/// Stream purposes; distinct purposes never share a key.
pub mod purpose {
    pub const INSTANCE: u64 = 1;
    pub const DBM: u64 = 2;
    pub const PHI: u64 = 3;
    pub const COMPETITOR: u64 = 4;
}

pub const MAX_ATOMS: usize = 8;
pub const COORD_RADIUS: i64 = 10;
pub const MAX_WEIGHT: i64 = 20;
pub const MAX_EXPONENT_DENOMINATOR: i64 = 4;
pub const MAX_PHI_POINTS: usize = 10;
pub const PHI_RANGE: f64 = 3.0;
/// Coordinates of random point sets lie in `[-SET_RADIUS, SET_RADIUS]`.
pub const SET_RADIUS: i64 = 4;
pub const MAX_SET_POINTS: usize = 6;

/// The generator for item `index` of stream `purpose` under `seed`.
pub fn rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    let mut r = ChaCha8Rng::from_seed(key);
    r.set_stream(index);
    r
}

pub fn point(rng: &mut impl Rng, dim: usize, radius: i64) -> LatticePoint {
    let coords: Vec<i64> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
    LatticePoint::ints(&coords)
}

/// Between 1 and `max_points` distinct points.
pub fn point_set(rng: &mut impl Rng, dim: usize, max_points: usize, radius: i64) -> Vec<LatticePoint> {
    let n = rng.gen_range(1..=max_points);
    let set: BTreeSet<LatticePoint> = (0..n).map(|_| point(rng, dim, radius)).collect();
    set.into_iter().collect()
}

/// At most [`MAX_ATOMS`] atoms in `[-10, 10]^dim`, weights `i / sum` with `i` in `[1, 20]`.
pub fn measure(rng: &mut impl Rng, dim: usize) -> ProbabilityMeasure {
    let n = rng.gen_range(1..=MAX_ATOMS);
    let atoms: Vec<(LatticePoint, BigRational)> =
        (0..n).map(|_| (point(rng, dim, COORD_RADIUS), int(rng.gen_range(1..=MAX_WEIGHT)))).collect();
    FiniteMeasure::new(dim, atoms).expect("nonempty positive measure").normalize()
}

fn small_rational(rng: &mut impl Rng) -> BigRational {
    let q = rng.gen_range(1..=MAX_EXPONENT_DENOMINATOR);
    ratio(rng.gen_range(1..=2 * q), q)
}

/// Four rationals in `(0, 2]` with denominators at most 4; `gamma` and
/// `delta` are raised to `max(alpha, beta)` where needed.
pub fn exponents(rng: &mut impl Rng) -> ExponentQuadruple {
    let [a, b, mut c, mut d] = [(); 4].map(|_| small_rational(rng));
    let m = a.clone().max(b.clone());
    if c < m {
        c = m.clone();
    }
    if d < m {
        d = m;
    }
    ExponentQuadruple::new(a, b, c, d).expect("repaired exponents are valid")
}

/// A pair of random probability measures with random valid exponents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomInstance {
    pub index: u64,
    pub mu: ProbabilityMeasure,
    pub nu: ProbabilityMeasure,
    pub exponents: ExponentQuadruple,
}

pub fn instance(seed: u64, index: u64, dim: usize) -> RandomInstance {
    let mut r = rng(seed, purpose::INSTANCE, index);
    let mu = measure(&mut r, dim);
    let nu = measure(&mut r, dim);
    let exponents = exponents(&mut r);
    RandomInstance { index, mu, nu, exponents }
}

/// Up to [`MAX_PHI_POINTS`] distinct points with values uniform in `[-3, 3]`.
pub fn phi(seed: u64, index: u64, dim: usize) -> BTreeMap<LatticePoint, f64> {
    let mut r = rng(seed, purpose::PHI, index);
    let points = point_set(&mut r, dim, MAX_PHI_POINTS, COORD_RADIUS);
    points.into_iter().map(|p| (p, r.gen_range(-PHI_RANGE..=PHI_RANGE))).collect()
}

/// A random probability measure on a nonempty subset of `points`.
pub fn competitor(seed: u64, index: u64, points: &[&LatticePoint]) -> ProbabilityMeasure {
    let mut r = rng(seed, purpose::COMPETITOR, index);
    let mut chosen: Vec<&LatticePoint> = points.iter().copied().filter(|_| r.gen_bool(0.5)).collect();
    if chosen.is_empty() {
        chosen.push(points.choose(&mut r).expect("nonempty domain"));
    }
    let dim = chosen[0].dim();
    let atoms: Vec<_> = chosen.into_iter().map(|p| (p.clone(), int(r.gen_range(1..=MAX_WEIGHT)))).collect();
    FiniteMeasure::new(dim, atoms).expect("positive weights").normalize()
}

/// How a random hypothesis-satisfying quadruple is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbmFlavor {
    /// Indicators of `A`, `B`, `T-(A,B)`, `T+(A,B)`.
    Sets,
    /// `a 1_A`, `b 1_B`, `c 1_{T-(A,B)}`, `d 1_{T+(A,B)}` with `a, b <= 1 <= c, d`.
    ScalarMultiples,
    /// Random `g, h, k`, and the largest `f` allowed by the hypothesis, rounded down.
    MaximalF,
}

impl DbmFlavor {
    pub const ALL: [DbmFlavor; 3] = [DbmFlavor::Sets, DbmFlavor::ScalarMultiples, DbmFlavor::MaximalF];
}

fn image_sets(a: &[LatticePoint], b: &[LatticePoint], op: &LatticeOperation) -> (Vec<LatticePoint>, Vec<LatticePoint>) {
    let mut lo = BTreeSet::new();
    let mut hi = BTreeSet::new();
    for x in a {
        for y in b {
            lo.insert(op.t_minus(x, y));
            hi.insert(op.t_plus(x, y));
        }
    }
    (lo.into_iter().collect(), hi.into_iter().collect())
}

fn weighted(rng: &mut impl Rng, dim: usize, points: &[LatticePoint]) -> FiniteMeasure {
    FiniteMeasure::new(dim, points.iter().map(|p| (p.clone(), ratio(rng.gen_range(1..=MAX_WEIGHT), 10)))).expect("positive weights")
}

/// A quadruple satisfying the hypothesis for `op` and `e` by construction.
pub fn dbm_quadruple(seed: u64, index: u64, op: &LatticeOperation, e: &ExponentQuadruple, flavor: DbmFlavor) -> Result<FunctionQuadruple> {
    let mut r = rng(seed, purpose::DBM, index);
    let dim = op.dim();
    let a = point_set(&mut r, dim, MAX_SET_POINTS, SET_RADIUS);
    let b = point_set(&mut r, dim, MAX_SET_POINTS, SET_RADIUS);
    let (lo, hi) = image_sets(&a, &b, op);
    match flavor {
        DbmFlavor::Sets => FunctionQuadruple::from_sets(&a, &b, op),
        DbmFlavor::ScalarMultiples => {
            let small = |r: &mut ChaCha8Rng| {
                let q = r.gen_range(1..=MAX_EXPONENT_DENOMINATOR);
                ratio(r.gen_range(1..=q), q)
            };
            let (fa, gb) = (small(&mut r), small(&mut r));
            let (hc, kd) = (int(r.gen_range(1..=3)), int(r.gen_range(1..=3)));
            let ind = |pts: &[LatticePoint], c: &BigRational| FiniteMeasure::new(dim, pts.iter().map(|p| (p.clone(), c.clone())));
            FunctionQuadruple::new(ind(&a, &fa)?, ind(&b, &gb)?, ind(&lo, &hc)?, ind(&hi, &kd)?)
        }
        DbmFlavor::MaximalF => {
            let g = weighted(&mut r, dim, &b);
            let h = weighted(&mut r, dim, &lo);
            let k = weighted(&mut r, dim, &hi);
            let f = maximal_f(&a, &g, &h, &k, op, e)?;
            FunctionQuadruple::new(f, g, h, k)
        }
    }
}

/// `f(x) = min_y (h^c(T-) k^d(T+) / g^b(y))^{1/a}`, evaluated in floating
/// point, rounded down to about 40 significant bits, and lowered further until
/// the hypothesis holds exactly at every `y`.
pub fn maximal_f(
    a: &[LatticePoint],
    g: &FiniteMeasure,
    h: &FiniteMeasure,
    k: &FiniteMeasure,
    op: &LatticeOperation,
    e: &ExponentQuadruple,
) -> Result<FiniteMeasure> {
    let [af, bf, cf, df] = e.as_f64();
    let [an, bn, cn, dn] = e.scaled();
    let ln = |m: &FiniteMeasure, p: &LatticePoint| m.get(p).map_or(f64::NEG_INFINITY, crate::rational::ln_rational);
    let mut atoms = Vec::new();
    for x in a {
        let log_v = g
            .atoms()
            .map(|(y, _)| (cf * ln(h, &op.t_minus(x, y)) + df * ln(k, &op.t_plus(x, y)) - bf * ln(g, y)) / af)
            .fold(f64::INFINITY, f64::min);
        if !log_v.is_finite() {
            continue;
        }
        let shift = 40 - log_v.div_euclid(std::f64::consts::LN_2) as i64;
        let shift = shift.max(0) as usize;
        let scaled = (log_v + shift as f64 * std::f64::consts::LN_2).exp().floor();
        let denom = num_traits::pow(BigInt::from(2), shift);
        let mut numer = BigInt::from(scaled as i64);
        let holds = |f: &BigRational| {
            let fa = pow(f, an);
            g.atoms().all(|(y, gy)| {
                fa.clone() * pow(gy, bn) <= pow(&h.weight(&op.t_minus(x, y)), cn) * pow(&k.weight(&op.t_plus(x, y)), dn)
            })
        };
        let mut tries = 0;
        loop {
            if numer <= BigInt::zero() {
                break;
            }
            let f = BigRational::new(numer.clone(), denom.clone());
            if holds(&f) {
                atoms.push((x.clone(), f));
                break;
            }
            tries += 1;
            numer = if tries < 4 { numer - BigInt::one() } else { numer / 2 };
        }
    }
    FiniteMeasure::new(g.dim(), atoms)
}
