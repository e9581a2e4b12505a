//! Verifiers for the discrete Brunn–Minkowski inequality, its set form, the
//! pointwise and integrated transport bounds, the entropy inequality, and the
//! log-Laplace identity.
//!
//! Inequalities between products of rational powers are decided exactly: with
//! `N` the common denominator of the exponents, both sides are raised to the
//! power `N`, which leaves integer exponents only.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::coupling::{Coupling, KnotheCoupling};
use crate::error::{Error, Result};
use crate::lattice_order::{same_dim, Decomposition, LatticePoint};
use crate::measures::{FiniteMeasure, ProbabilityMeasure};
use crate::operations::{ExponentQuadruple, LatticeOperation};
use crate::random;
use crate::rational::{format_rational, ln_rational, pow, to_f64};
use crate::report::{Quantity, Side, VerificationReport, Witness};

/// Default absolute tolerance for checks that involve logarithms.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Number of random competitor measures in the log-Laplace check.
pub const LOG_LAPLACE_COMPETITORS: usize = 100;

/// Four nonnegative finitely supported functions on Z^n, stored as measures
/// (value 0 off the stored support).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionQuadruple {
    pub f: FiniteMeasure,
    pub g: FiniteMeasure,
    pub h: FiniteMeasure,
    pub k: FiniteMeasure,
}

impl FunctionQuadruple {
    pub fn new(f: FiniteMeasure, g: FiniteMeasure, h: FiniteMeasure, k: FiniteMeasure) -> Result<Self> {
        for m in [&g, &h, &k] {
            same_dim(f.dim(), m.dim())?;
        }
        Ok(Self { f, g, h, k })
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `f = 1_A`, `g = 1_B`, `h = 1_{T-(A,B)}`, `k = 1_{T+(A,B)}`.
    pub fn from_sets(a: &[LatticePoint], b: &[LatticePoint], op: &LatticeOperation) -> Result<Self> {
        let (lo, hi) = image_sets(a, b, op)?;
        let dim = op.dim();
        Self::new(
            FiniteMeasure::indicator(dim, a.iter().cloned())?,
            FiniteMeasure::indicator(dim, b.iter().cloned())?,
            FiniteMeasure::indicator(dim, lo)?,
            FiniteMeasure::indicator(dim, hi)?,
        )
    }
}

/// `base^k` for each stored value, computed once.
struct PowerCache<'a> {
    measure: &'a FiniteMeasure,
    exp: usize,
    cache: BTreeMap<LatticePoint, BigRational>,
}

impl<'a> PowerCache<'a> {
    fn new(measure: &'a FiniteMeasure, exp: usize) -> Self {
        Self { measure, exp, cache: BTreeMap::new() }
    }

    fn get(&mut self, x: &LatticePoint) -> BigRational {
        if let Some(v) = self.cache.get(x) {
            return v.clone();
        }
        let v = match self.measure.get(x) {
            Some(w) => pow(w, self.exp),
            None => BigRational::zero(),
        };
        self.cache.insert(x.clone(), v.clone());
        v
    }
}

fn power_note(e: &ExponentQuadruple) -> Option<String> {
    (!e.is_integral()).then(|| format!("both sides raised to the power N = {}", e.common_denominator()))
}

fn with_power_note(r: VerificationReport, e: &ExponentQuadruple) -> VerificationReport {
    match power_note(e) {
        Some(n) => r.with_note(n),
        None => r,
    }
}

/// Checks `f^a(x) g^b(y) <= h^c(T-(x,y)) k^d(T+(x,y))` on `supp f x supp g`.
pub fn verify_hypothesis(q: &FunctionQuadruple, e: &ExponentQuadruple, op: &LatticeOperation) -> Result<VerificationReport> {
    const CHECK: &str = "hypothesis";
    same_dim(op.dim(), q.dim())?;
    let [a, b, c, d] = e.scaled();
    let mut hc = PowerCache::new(&q.h, c);
    let mut kd = PowerCache::new(&q.k, d);
    let gb: Vec<(&LatticePoint, BigRational)> = q.g.atoms().map(|(y, w)| (y, pow(w, b))).collect();
    for (x, fx) in q.f.atoms() {
        let fa = pow(fx, a);
        for (y, gy) in &gb {
            let lhs = &fa * gy;
            let rhs = hc.get(&op.t_minus(x, y)) * kd.get(&op.t_plus(x, y));
            if lhs > rhs {
                let r = VerificationReport::violated(CHECK, Witness::Pair { x: x.clone(), y: (*y).clone() })
                    .with_sides(Quantity::Exact(lhs), Quantity::Exact(rhs));
                return Ok(with_power_note(r, e));
            }
        }
    }
    Ok(VerificationReport::verified(CHECK).with_note(format!("{} pairs checked", q.f.len() * q.g.len())))
}

/// Checks `(sum f)^a (sum g)^b <= (sum h)^c (sum k)^d`.
pub fn verify_conclusion(q: &FunctionQuadruple, e: &ExponentQuadruple) -> VerificationReport {
    compare_masses("conclusion", [q.f.total_mass(), q.g.total_mass(), q.h.total_mass(), q.k.total_mass()], e)
}

fn compare_masses(check: &str, masses: [&BigRational; 4], e: &ExponentQuadruple) -> VerificationReport {
    let [a, b, c, d] = e.scaled();
    let lhs = pow(masses[0], a) * pow(masses[1], b);
    let rhs = pow(masses[2], c) * pow(masses[3], d);
    let r = if lhs <= rhs {
        VerificationReport::verified(check)
    } else {
        VerificationReport::violated(check, Witness::Masses { values: masses.iter().map(|m| format_rational(m)).collect() })
    };
    with_power_note(r.with_sides(Quantity::Exact(lhs), Quantity::Exact(rhs)), e)
}

/// Runs the operation checks on `[-radius, radius]^n`, then the hypothesis,
/// then the conclusion. Only the conclusion decides `verified`/`violated`; a
/// failed operation check or hypothesis makes the result `inapplicable`.
pub fn verify_dbm(q: &FunctionQuadruple, e: &ExponentQuadruple, op: &LatticeOperation, radius: u32) -> Result<VerificationReport> {
    verify_dbm_given(q, e, op, &op.check_all(radius))
}

/// [`verify_dbm`] with operation reports computed beforehand.
pub fn verify_dbm_given(
    q: &FunctionQuadruple,
    e: &ExponentQuadruple,
    op: &LatticeOperation,
    op_reports: &[VerificationReport],
) -> Result<VerificationReport> {
    const CHECK: &str = "dbm";
    let mut subreports = op_reports.to_vec();
    if let Some(bad) = op_reports.iter().find(|r| !r.is_verified()) {
        let mut r = VerificationReport::inapplicable(CHECK, format!("operation fails {}", bad.check));
        r.witness = bad.witness.clone();
        r.subreports = subreports;
        return Ok(r);
    }
    let hyp = verify_hypothesis(q, e, op)?;
    subreports.push(hyp.clone());
    if !hyp.is_verified() {
        let mut r = VerificationReport::inapplicable(CHECK, "hypothesis fails; conclusion not asserted");
        r.witness = hyp.witness;
        r.subreports = subreports;
        return Ok(r);
    }
    let concl = verify_conclusion(q, e);
    subreports.push(concl.clone());
    let mut r = VerificationReport { check: CHECK.into(), subreports, ..concl };
    r.note = power_note(e);
    Ok(r)
}

fn image_sets(a: &[LatticePoint], b: &[LatticePoint], op: &LatticeOperation) -> Result<(BTreeSet<LatticePoint>, BTreeSet<LatticePoint>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySupport);
    }
    for p in a.iter().chain(b) {
        same_dim(op.dim(), p.dim())?;
    }
    let mut lo = BTreeSet::new();
    let mut hi = BTreeSet::new();
    for x in a {
        for y in b {
            lo.insert(op.t_minus(x, y));
            hi.insert(op.t_plus(x, y));
        }
    }
    Ok((lo, hi))
}

/// `|A|^a |B|^b <= |T-(A,B)|^c |T+(A,B)|^d`, decided exactly.
pub fn set_dbm(a: &[LatticePoint], b: &[LatticePoint], op: &LatticeOperation, e: &ExponentQuadruple) -> Result<VerificationReport> {
    let (lo, hi) = image_sets(a, b, op)?;
    let count = |n: usize| BigRational::from_integer(BigInt::from(n));
    let na = count(a.iter().collect::<BTreeSet<_>>().len());
    let nb = count(b.iter().collect::<BTreeSet<_>>().len());
    let (nl, nh) = (count(lo.len()), count(hi.len()));
    Ok(compare_masses("set_dbm", [&na, &nb, &nl, &nh], e))
}

/// One support pair of a coupling with its transport term.
struct Term {
    x: LatticePoint,
    y: LatticePoint,
    weight: BigRational,
    /// `term^N = kappa-(T-)^{cN} kappa+(T+)^{dN} / (mu(x)^{aN} nu(y)^{bN})`.
    powered: BigRational,
    /// `ln term`.
    log: f64,
}

fn check_marginals(mu: &ProbabilityMeasure, nu: &ProbabilityMeasure, pi: &Coupling) -> Result<()> {
    if pi.left() != mu || pi.right() != nu {
        return Err(Error::InvalidCoupling("coupling marginals differ from the given measures".into()));
    }
    Ok(())
}

fn terms(pi: &Coupling, op: &LatticeOperation, e: &ExponentQuadruple) -> Result<Vec<Term>> {
    same_dim(op.dim(), pi.dim())?;
    let k_minus = pi.push_by(op, Side::Minus)?;
    let k_plus = pi.push_by(op, Side::Plus)?;
    let [a, b, c, d] = e.scaled();
    let [af, bf, cf, df] = e.as_f64();
    let (mu, nu) = (pi.left(), pi.right());
    let mut km = PowerCache::new(k_minus.as_measure(), c);
    let mut kp = PowerCache::new(k_plus.as_measure(), d);
    let mut out = Vec::with_capacity(pi.len());
    for ((x, y), w) in pi.atoms() {
        let (lo, hi) = (op.t_minus(x, y), op.t_plus(x, y));
        let (mx, ny) = (mu.weight(x), nu.weight(y));
        let powered = km.get(&lo) * kp.get(&hi) / (pow(&mx, a) * pow(&ny, b));
        let log = cf * ln_rational(&k_minus.weight(&lo)) + df * ln_rational(&k_plus.weight(&hi))
            - af * ln_rational(&mx)
            - bf * ln_rational(&ny);
        out.push(Term { x: x.clone(), y: y.clone(), weight: w.clone(), powered, log });
    }
    Ok(out)
}

fn worst(terms: &[Term]) -> &Term {
    let mut best = &terms[0];
    for t in &terms[1..] {
        if t.powered > best.powered {
            best = t;
        }
    }
    best
}

/// Checks `kappa-^c(T-) kappa+^d(T+) <= mu^a(x) nu^b(y)` on every support
/// pair of `pi`, where `kappa_+- = pi o T_+-^{-1}`. Reports the largest
/// (powered) term as `lhs`.
pub fn pointwise_term_bound(
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
    pi: &Coupling,
    op: &LatticeOperation,
    e: &ExponentQuadruple,
) -> Result<VerificationReport> {
    check_marginals(mu, nu, pi)?;
    Ok(pointwise_from_terms(&terms(pi, op, e)?, e))
}

fn pointwise_from_terms(terms: &[Term], e: &ExponentQuadruple) -> VerificationReport {
    const CHECK: &str = "pointwise";
    let w = worst(terms);
    let r = if w.powered <= BigRational::one() {
        VerificationReport::verified(CHECK)
    } else {
        VerificationReport::violated(CHECK, Witness::Pair { x: w.x.clone(), y: w.y.clone() })
    };
    with_power_note(r.with_sides(Quantity::Exact(w.powered.clone()), Quantity::Exact(BigRational::one())), e)
}

/// `P = sum pi(x,y) kappa-^c(T-) kappa+^d(T+) / (mu^a(x) nu^b(y))`.
///
/// Returns `log P` (log-sum-exp over support terms, or the logarithm of the
/// exact `P` when the exponents are integers). The report is verified exactly
/// when every term is at most 1 or, for integer exponents, when `P <= 1`
/// exactly; otherwise it is verified iff `log P <= tolerance`.
pub fn p_value(
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
    pi: &Coupling,
    op: &LatticeOperation,
    e: &ExponentQuadruple,
    tolerance: f64,
) -> Result<(f64, VerificationReport)> {
    check_marginals(mu, nu, pi)?;
    Ok(p_value_from_terms(&terms(pi, op, e)?, e, tolerance))
}

fn p_value_from_terms(terms: &[Term], e: &ExponentQuadruple, tolerance: f64) -> (f64, VerificationReport) {
    const CHECK: &str = "p_bound";
    let logs: Vec<f64> = terms.iter().map(|t| ln_rational(&t.weight) + t.log).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut log_p = m + logs.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    let exact = e.is_integral().then(|| terms.iter().fold(BigRational::zero(), |acc, t| acc + &t.weight * &t.powered));
    if let Some(p) = &exact {
        log_p = ln_rational(p);
    }
    let pointwise_ok = worst(terms).powered <= BigRational::one();
    let (ok, tol) = match &exact {
        _ if pointwise_ok => (true, 0.0),
        Some(p) => (*p <= BigRational::one(), 0.0),
        None => (log_p <= tolerance, tolerance),
    };
    let w = worst(terms);
    let mut r = if ok {
        VerificationReport::verified(CHECK)
    } else {
        VerificationReport::violated(CHECK, Witness::Pair { x: w.x.clone(), y: w.y.clone() })
    };
    let lhs = match exact {
        Some(p) => Quantity::Exact(p),
        None => Quantity::Real(log_p.exp()),
    };
    r = r.with_sides(lhs, Quantity::Exact(BigRational::one()));
    r.log_p = Some(log_p);
    r.tolerance = tol;
    if pointwise_ok {
        r = r.with_note("every pointwise term is at most 1");
    }
    (log_p, r)
}

/// `gap = a H(mu) + b H(nu) - c H(kappa-) - d H(kappa+)` for the Knothe
/// coupling along `decomposition`; verified iff `gap >= -tolerance`.
pub fn entropy_gap(
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
    op: &LatticeOperation,
    decomposition: &Decomposition,
    e: &ExponentQuadruple,
    tolerance: f64,
) -> Result<(f64, VerificationReport)> {
    if decomposition != op.decomposition() {
        return Err(Error::InvalidDecomposition("decomposition differs from the operation's".into()));
    }
    let pi = Coupling::knothe(mu, nu, decomposition)?;
    entropy_gap_for_coupling(&pi, op, e, tolerance)
}

/// [`entropy_gap`] for an arbitrary coupling.
pub fn entropy_gap_for_coupling(pi: &Coupling, op: &LatticeOperation, e: &ExponentQuadruple, tolerance: f64) -> Result<(f64, VerificationReport)> {
    let terms = terms(pi, op, e)?;
    Ok(entropy_from_terms(pi, op, &terms, e, tolerance))
}

fn entropy_from_terms(pi: &Coupling, op: &LatticeOperation, terms: &[Term], e: &ExponentQuadruple, tolerance: f64) -> (f64, VerificationReport) {
    const CHECK: &str = "entropy";
    let [a, b, c, d] = e.as_f64();
    let k_minus = pi.push_by(op, Side::Minus).expect("dimension checked");
    let k_plus = pi.push_by(op, Side::Plus).expect("dimension checked");
    let lhs = a * pi.left().relative_entropy() + b * pi.right().relative_entropy();
    let rhs = c * k_minus.relative_entropy() + d * k_plus.relative_entropy();
    let gap = lhs - rhs;
    let mut r = if gap >= -tolerance {
        VerificationReport::verified(CHECK)
    } else {
        let w = worst(terms);
        VerificationReport::violated(CHECK, Witness::Pair { x: w.x.clone(), y: w.y.clone() })
    };
    r = r.with_sides(Quantity::Real(lhs), Quantity::Real(rhs));
    r.gap = Some(gap);
    r.tolerance = tolerance;
    (gap, r)
}

/// Pointwise, `P` and entropy reports for one coupling, sharing the term table.
pub struct TransportReports {
    pub pointwise: VerificationReport,
    pub p_bound: VerificationReport,
    pub log_p: f64,
    pub entropy: VerificationReport,
    pub gap: f64,
}

pub fn transport_reports(pi: &Coupling, op: &LatticeOperation, e: &ExponentQuadruple, tolerance: f64) -> Result<TransportReports> {
    let t = terms(pi, op, e)?;
    let pointwise = pointwise_from_terms(&t, e);
    let (log_p, p_bound) = p_value_from_terms(&t, e, tolerance);
    let (gap, entropy) = entropy_from_terms(pi, op, &t, e, tolerance);
    Ok(TransportReports { pointwise, p_bound, log_p, entropy, gap })
}

/// `L = log sum e^phi` against `R = int phi d nu* - H(nu*)` for the Gibbs
/// measure `nu* ~ e^phi`, plus [`LOG_LAPLACE_COMPETITORS`] seeded random
/// measures on the domain of `phi`, none of which may exceed `L + tolerance`.
/// Returns `L - R`.
pub fn log_laplace_gap(phi: &BTreeMap<LatticePoint, f64>, seed: u64, tolerance: f64) -> Result<(f64, VerificationReport)> {
    const CHECK: &str = "log_laplace";
    if phi.is_empty() {
        return Err(Error::EmptySupport);
    }
    if let Some(v) = phi.values().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("phi takes the non-finite value {v}")));
    }
    let m = phi.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = phi.values().map(|v| (v - m).exp()).sum();
    let l = m + z.ln();
    let r: f64 = phi
        .values()
        .map(|v| {
            let log_w = v - l;
            let w = log_w.exp();
            w * v - w * log_w
        })
        .sum();
    let gap = l - r;
    let points: Vec<&LatticePoint> = phi.keys().collect();
    let mut report = VerificationReport::verified(CHECK);
    if gap.abs() > tolerance {
        report = VerificationReport::violated(CHECK, Witness::Masses { values: vec![format!("{l}"), format!("{r}")] });
    } else {
        for index in 0..LOG_LAPLACE_COMPETITORS {
            let nu = random::competitor(seed, index as u64, &points);
            let value: f64 = nu.atoms().map(|(x, w)| to_f64(w) * phi[x]).sum::<f64>() - nu.relative_entropy();
            if value > l + tolerance {
                report = VerificationReport::violated(CHECK, Witness::Competitor { index, value });
                break;
            }
        }
    }
    report = report.with_sides(Quantity::Real(l), Quantity::Real(r));
    report.gap = Some(gap);
    report.tolerance = tolerance;
    Ok((gap, report))
}

/// A Knothe coupling along the operation's decomposition (the monotone
/// coupling when there is a single block).
pub fn default_coupling(mu: &ProbabilityMeasure, nu: &ProbabilityMeasure, op: &LatticeOperation) -> Result<KnotheCoupling> {
    KnotheCoupling::new(mu, nu, op.decomposition())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_order::AdditiveTotalOrder;
    use crate::operations::{DifferenceDefault, DifferenceMap};
    use crate::rational::{int, ratio};
    use crate::report::Outcome;

    fn p(c: &[i64]) -> LatticePoint {
        LatticePoint::ints(c)
    }

    fn pts1(v: &[i64]) -> Vec<LatticePoint> {
        v.iter().map(|&c| p(&[c])).collect()
    }

    fn ind(v: &[i64]) -> FiniteMeasure {
        FiniteMeasure::indicator(1, pts1(v)).unwrap()
    }

    fn scaled(m: FiniteMeasure, c: i64) -> FiniteMeasure {
        m.scale(&int(c)).unwrap()
    }

    fn mid() -> LatticeOperation {
        LatticeOperation::midpoint(1).unwrap()
    }

    fn negate() -> LatticeOperation {
        LatticeOperation::from_difference_map(1, Decomposition::standard(1), DifferenceMap::new(DifferenceDefault::Negate)).unwrap()
    }

    fn unit() -> ExponentQuadruple {
        ExponentQuadruple::unit()
    }

    fn mass(total: i64) -> FiniteMeasure {
        FiniteMeasure::new(1, [(p(&[0]), int(total))]).unwrap()
    }

    #[test]
    fn hypothesis_examples() {
        let i = ind(&[0, 1]);
        let q = FunctionQuadruple::new(i.clone(), i.clone(), i.clone(), i).unwrap();
        let r = verify_hypothesis(&q, &unit(), &mid()).unwrap();
        assert!(r.is_verified());
        assert_eq!(r.tolerance, 0.0);

        let q = FunctionQuadruple::new(ind(&[0]), ind(&[0]), ind(&[1]), ind(&[1])).unwrap();
        let r = verify_hypothesis(&q, &unit(), &mid()).unwrap();
        assert_eq!(r.witness, Some(Witness::Pair { x: p(&[0]), y: p(&[0]) }));
        assert_eq!(r.rhs, Some(Quantity::Exact(int(0))));

        let q = FunctionQuadruple::new(scaled(ind(&[0]), 2), ind(&[0]), scaled(ind(&[0]), 2), scaled(ind(&[0]), 2)).unwrap();
        let r = verify_hypothesis(&q, &unit(), &mid()).unwrap();
        assert!(r.is_verified());

        let q2 = FunctionQuadruple::new(ind(&[0]), ind(&[0]), ind(&[0]), FiniteMeasure::indicator(2, [p(&[0, 0])]).unwrap());
        assert!(q2.is_err());
    }

    #[test]
    fn hypothesis_with_fractional_exponents_is_exact() {
        // f(0) = 4, g(0) = 1, h(0) = k(0) = 2 with alpha = 1/2: 4^(1/2) = 2 <= 2 * 2
        let q = FunctionQuadruple::new(mass(4), mass(1), mass(2), mass(2)).unwrap();
        let e = ExponentQuadruple::parse("1/2", "1/2", "1/2", "1/2").unwrap();
        let r = verify_hypothesis(&q, &e, &mid()).unwrap();
        assert!(r.is_verified());
        // with gamma = delta = 1/2: 2 <= sqrt(2 * 2) = 2 is an equality
        let r = verify_conclusion(&q, &e);
        assert!(r.is_verified());
        assert_eq!(r.lhs, Some(Quantity::Exact(int(4))));
        assert_eq!(r.rhs, Some(Quantity::Exact(int(4))));
        let q = FunctionQuadruple::new(mass(5), mass(1), mass(2), mass(2)).unwrap();
        assert_eq!(verify_conclusion(&q, &e).outcome, Outcome::Violated);
    }

    #[test]
    fn conclusion_examples() {
        let one = FunctionQuadruple::new(mass(1), mass(1), mass(1), mass(1)).unwrap();
        let r = verify_conclusion(&one, &unit());
        assert!(r.is_verified());
        assert_eq!(r.lhs, r.rhs);

        let q = FunctionQuadruple::new(mass(2), mass(2), mass(3), mass(3)).unwrap();
        let r = verify_conclusion(&q, &unit());
        assert_eq!((r.lhs, r.rhs), (Some(Quantity::Exact(int(4))), Some(Quantity::Exact(int(9)))));

        let q = FunctionQuadruple::new(mass(4), mass(1), mass(2), mass(2)).unwrap();
        assert!(verify_conclusion(&q, &unit()).is_verified());
        let q = FunctionQuadruple::new(mass(5), mass(1), mass(2), mass(2)).unwrap();
        let r = verify_conclusion(&q, &unit());
        assert_eq!(r.outcome, Outcome::Violated);
        assert_eq!(r.witness, Some(Witness::Masses { values: vec!["5".into(), "1".into(), "2".into(), "2".into()] }));
        assert_eq!(r.tolerance, 0.0);
    }

    #[test]
    fn dbm_examples() {
        let a = pts1(&[0, 2]);
        let q = FunctionQuadruple::from_sets(&a, &a, &mid()).unwrap();
        let r = verify_dbm(&q, &unit(), &mid(), 3).unwrap();
        assert!(r.is_verified(), "{}", r.to_json());
        assert_eq!(r.subreports.len(), 5);

        let bad = FunctionQuadruple::new(ind(&[0]), ind(&[0]), ind(&[1]), ind(&[1])).unwrap();
        let r = verify_dbm(&bad, &unit(), &mid(), 2).unwrap();
        assert_eq!(r.outcome, Outcome::Inapplicable);
        assert_eq!(r.witness, Some(Witness::Pair { x: p(&[0]), y: p(&[0]) }));

        let q = FunctionQuadruple::from_sets(&pts1(&[0, 1]), &pts1(&[0, 2]), &negate()).unwrap();
        let r = verify_dbm(&q, &unit(), &negate(), 2).unwrap();
        assert_eq!(r.outcome, Outcome::Inapplicable);
        assert!(matches!(r.witness, Some(Witness::Monotonicity { .. })), "{}", r.to_json());
    }

    #[test]
    fn set_dbm_examples() {
        let e = unit();
        let r = set_dbm(&pts1(&[0]), &pts1(&[0]), &mid(), &e).unwrap();
        assert_eq!((r.lhs.clone(), r.rhs.clone()), (Some(Quantity::Exact(int(1))), Some(Quantity::Exact(int(1)))));
        assert!(r.is_verified());

        let mj = LatticeOperation::meet_join(2).unwrap();
        let r = set_dbm(&[p(&[0, 0]), p(&[1, 1])], &[p(&[0, 1]), p(&[1, 0])], &mj, &e).unwrap();
        assert_eq!((r.lhs.clone(), r.rhs.clone()), (Some(Quantity::Exact(int(4))), Some(Quantity::Exact(int(9)))));
        assert!(r.is_verified());

        let r = set_dbm(&pts1(&[0, 2]), &pts1(&[0, 2]), &mid(), &e).unwrap();
        assert_eq!((r.lhs.clone(), r.rhs.clone()), (Some(Quantity::Exact(int(4))), Some(Quantity::Exact(int(9)))));

        assert!(set_dbm(&[], &pts1(&[0]), &mid(), &e).is_err());
        assert_eq!(r.tolerance, 0.0);
    }

    fn derived() -> (ProbabilityMeasure, ProbabilityMeasure, Coupling) {
        let mu = ProbabilityMeasure::uniform(pts1(&[0, 1, 2]));
        let nu = ProbabilityMeasure::uniform(pts1(&[0, 1]));
        let pi = Coupling::monotone(&mu, &nu, &AdditiveTotalOrder::lex(1)).unwrap();
        (mu, nu, pi)
    }

    fn negative_control() -> (ProbabilityMeasure, ProbabilityMeasure, Coupling) {
        let mu = ProbabilityMeasure::uniform(pts1(&[0, 1]));
        let nu = ProbabilityMeasure::uniform(pts1(&[0, 2]));
        let pi = Coupling::monotone(&mu, &nu, &AdditiveTotalOrder::lex(1)).unwrap();
        (mu, nu, pi)
    }

    /// Term-by-term oracle with unit exponents.
    fn oracle_terms(pi: &Coupling, op: &LatticeOperation) -> Vec<BigRational> {
        let km = pi.push_by(op, Side::Minus).unwrap();
        let kp = pi.push_by(op, Side::Plus).unwrap();
        pi.atoms()
            .map(|((x, y), _)| km.weight(&op.t_minus(x, y)) * kp.weight(&op.t_plus(x, y)) / (pi.left().weight(x) * pi.right().weight(y)))
            .collect()
    }

    #[test]
    fn pointwise_examples() {
        let d = ProbabilityMeasure::dirac(p(&[0]));
        let pi = Coupling::dirac(p(&[0]), p(&[0])).unwrap();
        for op in [mid(), LatticeOperation::meet_join(1).unwrap()] {
            let r = pointwise_term_bound(&d, &d, &pi, &op, &unit()).unwrap();
            assert!(r.is_verified());
            assert_eq!(r.lhs, Some(Quantity::Exact(int(1))));
        }

        let (mu, nu, pi) = derived();
        assert!(oracle_terms(&pi, &mid()).iter().all(|t| t.is_one()));
        let r = pointwise_term_bound(&mu, &nu, &pi, &mid(), &unit()).unwrap();
        assert!(r.is_verified());
        assert_eq!(r.lhs, Some(Quantity::Exact(int(1))));
        assert_eq!(r.tolerance, 0.0);

        let (mu, nu, pi) = negative_control();
        assert_eq!(pi.len(), 2);
        assert_eq!(pi.weight(&p(&[1]), &p(&[2])), ratio(1, 2));
        let r = pointwise_term_bound(&mu, &nu, &pi, &negate(), &unit()).unwrap();
        assert_eq!(r.outcome, Outcome::Violated);
        assert_eq!(r.lhs, Some(Quantity::Exact(int(2))));
        assert_eq!(r.witness, Some(Witness::Pair { x: p(&[0]), y: p(&[0]) }));

        assert!(pointwise_term_bound(&nu, &mu, &pi, &negate(), &unit()).is_err());
    }

    #[test]
    fn pointwise_bound_fails_for_a_forced_midpoint_coupling() {
        // mu = delta_4, nu uniform{0,1,2}: the term at (4,1) is 4/3
        let mu = ProbabilityMeasure::dirac(p(&[4]));
        let nu = ProbabilityMeasure::uniform(pts1(&[0, 1, 2]));
        let pi = Coupling::monotone(&mu, &nu, &AdditiveTotalOrder::lex(1)).unwrap();
        let r = pointwise_term_bound(&mu, &nu, &pi, &mid(), &unit()).unwrap();
        assert_eq!(r.outcome, Outcome::Violated);
        assert_eq!(r.lhs, Some(Quantity::Exact(ratio(4, 3))));
        assert_eq!(r.witness, Some(Witness::Pair { x: p(&[4]), y: p(&[1]) }));
        let (log_p, r) = p_value(&mu, &nu, &pi, &mid(), &unit(), DEFAULT_TOLERANCE).unwrap();
        assert!(r.is_verified());
        assert_eq!(r.lhs, Some(Quantity::Exact(ratio(8, 9))));
        assert!((log_p - (8.0f64 / 9.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn weighted_p_bound_can_exceed_one() {
        let mu = ProbabilityMeasure::new(1, [(p(&[1]), ratio(1, 2)), (p(&[2]), ratio(1, 8)), (p(&[3]), ratio(3, 8))]).unwrap();
        let nu = ProbabilityMeasure::dirac(p(&[2]));
        let pi = Coupling::monotone(&mu, &nu, &AdditiveTotalOrder::lex(1)).unwrap();
        let e = ExponentQuadruple::parse("2", "1", "2", "2").unwrap();
        let (_, r) = p_value(&mu, &nu, &pi, &mid(), &e, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.outcome, Outcome::Violated);
        assert_eq!(r.lhs, Some(Quantity::Exact(ratio(137, 128))));
    }

    #[test]
    fn p_value_examples() {
        let d = ProbabilityMeasure::dirac(p(&[0]));
        let pi = Coupling::dirac(p(&[0]), p(&[0])).unwrap();
        let (log_p, r) = p_value(&d, &d, &pi, &mid(), &unit(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(log_p, 0.0);
        assert!(r.is_verified());

        let (mu, nu, pi) = derived();
        let (log_p, r) = p_value(&mu, &nu, &pi, &mid(), &unit(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(log_p, 0.0);
        assert_eq!(r.lhs, Some(Quantity::Exact(int(1))));
        assert_eq!(r.tolerance, 0.0);

        let (mu, nu, pi) = negative_control();
        let (log_p, r) = p_value(&mu, &nu, &pi, &negate(), &unit(), DEFAULT_TOLERANCE).unwrap();
        assert!((log_p - 2f64.ln()).abs() < 1e-15);
        assert_eq!(r.outcome, Outcome::Violated);
        assert_eq!(r.lhs, Some(Quantity::Exact(int(2))));
    }

    #[test]
    fn p_value_log_sum_exp_matches_exact_value() {
        let (mu, nu, pi) = negative_control();
        let e = ExponentQuadruple::parse("1/2", "1/3", "3/4", "1").unwrap();
        let (log_p, r) = p_value(&mu, &nu, &pi, &negate(), &e, DEFAULT_TOLERANCE).unwrap();
        // both pairs: (1/2)^(3/4) * 1 / ((1/2)^(1/2) (1/2)^(1/3)) = 2^(1/12)
        assert!((log_p - 2f64.ln() / 12.0).abs() < 1e-12);
        assert_eq!(r.outcome, Outcome::Violated);
        assert_eq!(r.tolerance, DEFAULT_TOLERANCE);
    }

    #[test]
    fn entropy_examples() {
        let d = ProbabilityMeasure::dirac(p(&[0]));
        let dec = Decomposition::standard(1);
        let (gap, r) = entropy_gap(&d, &d, &mid(), &dec, &unit(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(gap, 0.0);
        assert!(r.is_verified());

        let (mu, nu, _) = derived();
        let (gap, r) = entropy_gap(&mu, &nu, &mid(), &dec, &unit(), DEFAULT_TOLERANCE).unwrap();
        assert!(gap.abs() < 1e-12);
        assert!(r.is_verified());

        let (mu, nu, _) = negative_control();
        let (gap, r) = entropy_gap(&mu, &nu, &negate(), &dec, &unit(), DEFAULT_TOLERANCE).unwrap();
        assert!((gap + 2f64.ln()).abs() < 1e-9);
        assert_eq!(r.outcome, Outcome::Violated);
        assert!(r.witness.is_some());

        let two = LatticeOperation::midpoint(2).unwrap();
        let d2 = ProbabilityMeasure::dirac(p(&[0, 0]));
        let other = Decomposition::single(AdditiveTotalOrder::lex(2));
        assert!(entropy_gap(&d2, &d2, &two, &other, &unit(), DEFAULT_TOLERANCE).is_err());
    }

    #[test]
    fn log_laplace_examples() {
        let ln2 = 2f64.ln();
        let one: BTreeMap<_, _> = [(p(&[0]), 0.0)].into_iter().collect();
        let (gap, r) = log_laplace_gap(&one, 1, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.lhs, Some(Quantity::Real(0.0)));
        assert!(gap.abs() < 1e-15);
        assert!(r.is_verified());

        let two: BTreeMap<_, _> = [(p(&[0]), ln2), (p(&[1]), ln2)].into_iter().collect();
        let (gap, r) = log_laplace_gap(&two, 2, DEFAULT_TOLERANCE).unwrap();
        assert!(matches!(r.lhs, Some(Quantity::Real(l)) if (l - 4f64.ln()).abs() < 1e-12));
        assert!(gap.abs() < 1e-12);

        let skew: BTreeMap<_, _> = [(p(&[0]), 0.0), (p(&[1]), 3f64.ln())].into_iter().collect();
        let (_, r) = log_laplace_gap(&skew, 3, DEFAULT_TOLERANCE).unwrap();
        assert!(matches!(r.rhs, Some(Quantity::Real(v)) if (v - 4f64.ln()).abs() < 1e-12));
        assert!(r.is_verified());

        assert!(log_laplace_gap(&BTreeMap::new(), 0, DEFAULT_TOLERANCE).is_err());
    }

    #[test]
    fn transport_reports_agree_with_individual_verifiers() {
        let (mu, nu, pi) = derived();
        let t = transport_reports(&pi, &mid(), &unit(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(t.pointwise, pointwise_term_bound(&mu, &nu, &pi, &mid(), &unit()).unwrap());
        assert_eq!(t.p_bound, p_value(&mu, &nu, &pi, &mid(), &unit(), DEFAULT_TOLERANCE).unwrap().1);
        assert_eq!(t.entropy, entropy_gap(&mu, &nu, &mid(), &Decomposition::standard(1), &unit(), DEFAULT_TOLERANCE).unwrap().1);
    }
}
