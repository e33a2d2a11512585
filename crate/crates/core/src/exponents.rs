//! Exact exponent arithmetic and the number-theoretic deciders behind the
//! existence criteria.
//!
//! An [`Exponent`] is `r * L^t` with `r` a positive rational and `t` in
//! `{0, 1}`, where `L` is one fixed formal transcendental. Quotients of
//! exponents are [`ExtRatio`]s of `L`-degree `-1`, `0` or `1`. Because the
//! powers of `L` are linearly independent over the rationals, every
//! integrality question reduces to exact rational arithmetic on the
//! degree-0 part plus an exact vanishing test on the other degrees.

use crate::error::{Error, Result};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub type Rational = Ratio<i64>;

/// Above this many matchings callers should stream instead of collecting.
pub const MATCHING_COLLECT_CAP: u128 = 10_000;

/// A positive exponent `ratio * L^lambda_pow`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Exponent {
    ratio: Rational,
    lambda_pow: u8,
}

impl Exponent {
    pub fn new(ratio: Rational, lambda_pow: u8) -> Result<Self> {
        if ratio <= Rational::zero() {
            return Err(Error::InvalidExponent(format!("{ratio} is not positive")));
        }
        if lambda_pow > 1 {
            return Err(Error::InvalidExponent(format!(
                "L-power {lambda_pow} outside {{0, 1}}"
            )));
        }
        Ok(Self { ratio, lambda_pow })
    }

    /// Rational exponent `num/den`.
    pub fn rational(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidExponent("zero denominator".into()));
        }
        Self::new(Rational::new(num, den), 0)
    }

    /// `L`-scaled exponent `num/den * L`.
    pub fn scaled(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidExponent("zero denominator".into()));
        }
        Self::new(Rational::new(num, den), 1)
    }

    pub fn integer(n: i64) -> Result<Self> {
        Self::rational(n, 1)
    }

    pub fn one() -> Self {
        Self {
            ratio: Rational::one(),
            lambda_pow: 0,
        }
    }

    pub fn ratio(&self) -> Rational {
        self.ratio
    }

    pub fn lambda_pow(&self) -> u8 {
        self.lambda_pow
    }

    pub fn is_one(&self) -> bool {
        self.lambda_pow == 0 && self.ratio.is_one()
    }

    /// `self / other`.
    pub fn over(&self, other: &Exponent) -> ExtRatio {
        ext_ratio(*self, *other)
    }

    /// `self / r` for a positive integer `r`.
    pub fn div_nat(&self, r: u64) -> Exponent {
        Exponent {
            ratio: self.ratio / Rational::from_integer(r as i64),
            lambda_pow: self.lambda_pow,
        }
    }

    /// `self * r` for a positive integer `r`.
    pub fn mul_nat(&self, r: u64) -> Exponent {
        Exponent {
            ratio: self.ratio * Rational::from_integer(r as i64),
            lambda_pow: self.lambda_pow,
        }
    }

    /// Numeric value with the formal `L` replaced by `lambda`.
    pub fn value<T: crate::Scalar>(&self, lambda: T) -> T {
        let r = T::of(*self.ratio.numer() as f64) / T::of(*self.ratio.denom() as f64);
        if self.lambda_pow == 1 {
            r * lambda
        } else {
            r
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ratio.is_integer() {
            write!(f, "{}", self.ratio.numer())?;
        } else {
            write!(f, "{}/{}", self.ratio.numer(), self.ratio.denom())?;
        }
        if self.lambda_pow == 1 {
            write!(f, "*L")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Exponent({self})")
    }
}

impl FromStr for Exponent {
    type Err = Error;

    /// Accepts `a`, `a/b`, `a*L`, `a/b*L` and a bare `L`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidExponent(format!("cannot parse {s:?}"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (body, lambda_pow) = match t.strip_suffix('L') {
            Some(rest) => (rest.strip_suffix('*').unwrap_or(rest), 1u8),
            None => (t.as_str(), 0u8),
        };
        if body.is_empty() {
            return if lambda_pow == 1 {
                Self::new(Rational::one(), 1)
            } else {
                Err(bad())
            };
        }
        let ratio = match body.split_once('/') {
            Some((n, d)) => {
                let n: i64 = n.parse().map_err(|_| bad())?;
                let d: i64 = d.parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(bad());
                }
                Rational::new(n, d)
            }
            None => Rational::from_integer(body.parse().map_err(|_| bad())?),
        };
        Self::new(ratio, lambda_pow)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A nonempty vector of exponents.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
#[serde(transparent)]
pub struct ExponentVec(Vec<Exponent>);

impl ExponentVec {
    pub fn new(entries: Vec<Exponent>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidExponent("empty exponent vector".into()));
        }
        Ok(Self(entries))
    }

    pub fn single(e: Exponent) -> Self {
        Self(vec![e])
    }

    /// Parses each entry with the string format of [`Exponent`].
    pub fn parse<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        Self::new(
            items
                .iter()
                .map(|s| s.as_ref().parse())
                .collect::<Result<_>>()?,
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[Exponent] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Exponent> {
        self.0.iter()
    }

    /// `p_sigma = (p_{sigma(0)}, ..., p_{sigma(n-1)})`.
    pub fn permuted(&self, sigma: &[usize]) -> ExponentVec {
        Self(sigma.iter().map(|&i| self.0[i]).collect())
    }

    pub fn values<T: crate::Scalar>(&self, lambda: T) -> Vec<T> {
        self.0.iter().map(|e| e.value(lambda)).collect()
    }
}

impl std::ops::Index<usize> for ExponentVec {
    type Output = Exponent;
    fn index(&self, i: usize) -> &Exponent {
        &self.0[i]
    }
}

impl<'de> Deserialize<'de> for ExponentVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Exponent>::deserialize(d)?;
        ExponentVec::new(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for ExponentVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// A quotient of exponents: `ratio * L^lambda_deg`, `lambda_deg` in `-1..=1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct ExtRatio {
    pub ratio: Rational,
    pub lambda_deg: i8,
}

impl ExtRatio {
    pub fn is_nat(&self) -> bool {
        is_nat(*self)
    }

    /// The natural number this ratio equals, if any.
    pub fn as_nat(&self) -> Option<u64> {
        is_nat(*self).then(|| self.ratio.to_integer() as u64)
    }

    pub fn is_rational(&self) -> bool {
        self.lambda_deg == 0
    }

    pub fn recip(&self) -> ExtRatio {
        ExtRatio {
            ratio: self.ratio.recip(),
            lambda_deg: -self.lambda_deg,
        }
    }

    pub fn mul(&self, other: &ExtRatio) -> ExtRatio {
        ExtRatio {
            ratio: self.ratio * other.ratio,
            lambda_deg: self.lambda_deg + other.lambda_deg,
        }
    }
}

impl fmt::Display for ExtRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ratio)?;
        match self.lambda_deg {
            0 => Ok(()),
            1 => write!(f, "*L"),
            d => write!(f, "*L^{d}"),
        }
    }
}

/// `a / b`.
pub fn ext_ratio(a: Exponent, b: Exponent) -> ExtRatio {
    ExtRatio {
        ratio: a.ratio / b.ratio,
        lambda_deg: a.lambda_pow as i8 - b.lambda_pow as i8,
    }
}

/// True iff `r` is a natural number (degree 0, positive integer).
pub fn is_nat(r: ExtRatio) -> bool {
    r.lambda_deg == 0 && r.ratio.is_integer() && r.ratio.is_positive()
}

/// True iff the formal sum `sum c_i * r_i` is an integer: the degree-0 part
/// must be an integer and every other degree must cancel exactly.
pub fn is_int_diff(terms: &[(i64, ExtRatio)]) -> bool {
    let mut by_degree: BTreeMap<i8, Rational> = BTreeMap::new();
    for &(c, r) in terms {
        *by_degree.entry(r.lambda_deg).or_insert_with(Rational::zero) +=
            r.ratio * Rational::from_integer(c);
    }
    by_degree.iter().all(|(&deg, v)| {
        if deg == 0 {
            v.is_integer()
        } else {
            v.is_zero()
        }
    })
}

/// The integer value of `sum c_i * r_i` when [`is_int_diff`] holds.
pub fn int_value(terms: &[(i64, ExtRatio)]) -> Option<i64> {
    if !is_int_diff(terms) {
        return None;
    }
    let v: Rational = terms
        .iter()
        .filter(|(_, r)| r.lambda_deg == 0)
        .map(|&(c, r)| r.ratio * Rational::from_integer(c))
        .sum();
    v.to_integer().to_i64()
}

/// The permutations `sigma` with `a_{sigma(j)} / b_j` natural for every `j`,
/// enumerated lazily in lexicographic order.
///
/// Enumeration walks the bipartite graph `j -> {i : a_i / b_j in N}` and
/// prunes every branch whose residual graph has no perfect matching, so
/// each step costs a polynomial amount of work regardless of `n`.
#[derive(Clone, Debug)]
pub struct PermMatchings {
    adj: Vec<Vec<usize>>,
}

impl PermMatchings {
    pub fn new(a: &ExponentVec, b: &ExponentVec) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot match {} exponents against {}",
                a.len(),
                b.len()
            )));
        }
        let adj = b
            .iter()
            .map(|bj| {
                a.iter()
                    .enumerate()
                    .filter(|(_, ai)| is_nat(ext_ratio(**ai, *bj)))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Ok(Self { adj })
    }

    pub fn size(&self) -> usize {
        self.adj.len()
    }

    pub fn first(&self) -> Option<Vec<usize>> {
        self.iter().next()
    }

    pub fn is_empty(&self) -> bool {
        self.first().is_none()
    }

    pub fn iter(&self) -> MatchingIter<'_> {
        MatchingIter::new(&self.adj)
    }

    /// Number of matchings, by subset dynamic programming (`n <= 24`).
    pub fn count(&self) -> Option<u128> {
        let n = self.adj.len();
        if n > 24 {
            return None;
        }
        let mut ways = vec![0u128; 1 << n];
        ways[0] = 1;
        for mask in 0usize..(1 << n) {
            let w = ways[mask];
            if w == 0 {
                continue;
            }
            let row = mask.count_ones() as usize;
            if row == n {
                continue;
            }
            for &i in &self.adj[row] {
                if mask & (1 << i) == 0 {
                    ways[mask | (1 << i)] += w;
                }
            }
        }
        Some(ways[(1 << n) - 1])
    }

    /// All matchings, or `None` when there are more than
    /// [`MATCHING_COLLECT_CAP`]; use [`PermMatchings::iter`] then.
    pub fn collect_capped(&self) -> Option<Vec<Vec<usize>>> {
        match self.count() {
            Some(c) if c <= MATCHING_COLLECT_CAP => Some(self.iter().collect()),
            _ => None,
        }
    }
}

/// `perm_matchings(a, b)`: permutations with `a_sigma / b` in `N^n`.
pub fn perm_matchings(a: &ExponentVec, b: &ExponentVec) -> Result<PermMatchings> {
    PermMatchings::new(a, b)
}

/// Lexicographic DFS over perfect matchings with residual-feasibility pruning.
pub struct MatchingIter<'a> {
    adj: &'a [Vec<usize>],
    assign: Vec<usize>,
    // next candidate position in adj[row] for each assigned row
    cursor: Vec<usize>,
    used: Vec<bool>,
    done: bool,
}

impl<'a> MatchingIter<'a> {
    fn new(adj: &'a [Vec<usize>]) -> Self {
        let n = adj.len();
        let mut it = Self {
            adj,
            assign: Vec::with_capacity(n),
            cursor: vec![0],
            used: vec![false; n],
            done: false,
        };
        if !residual_feasible(adj, 0, &it.used) {
            it.done = true;
        }
        it
    }

    fn advance(&mut self) -> Option<Vec<usize>> {
        let n = self.adj.len();
        loop {
            if self.done {
                return None;
            }
            let row = self.assign.len();
            if row == n {
                let out = self.assign.clone();
                self.backtrack();
                return Some(out);
            }
            let pos = self.cursor[row];
            if pos >= self.adj[row].len() {
                if row == 0 {
                    self.done = true;
                    return None;
                }
                self.backtrack();
                continue;
            }
            self.cursor[row] += 1;
            let col = self.adj[row][pos];
            if self.used[col] {
                continue;
            }
            self.used[col] = true;
            if residual_feasible(self.adj, row + 1, &self.used) {
                self.assign.push(col);
                self.cursor.push(0);
            } else {
                self.used[col] = false;
            }
        }
    }

    fn backtrack(&mut self) {
        if let Some(col) = self.assign.pop() {
            self.used[col] = false;
            self.cursor.pop();
        } else {
            self.done = true;
        }
    }
}

impl Iterator for MatchingIter<'_> {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        self.advance()
    }
}

/// Whether rows `from..` can be perfectly matched into the unused columns
/// (Kuhn's augmenting paths).
fn residual_feasible(adj: &[Vec<usize>], from: usize, used: &[bool]) -> bool {
    let n = adj.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        adj: &[Vec<usize>],
        row: usize,
        used: &[bool],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &c in &adj[row] {
            if used[c] || seen[c] {
                continue;
            }
            seen[c] = true;
            if owner[c].is_none_or(|r| augment(adj, r, used, seen, owner)) {
                owner[c] = Some(row);
                return true;
            }
        }
        false
    }
    for row in from..n {
        let mut seen = vec![false; n];
        if !augment(adj, row, used, &mut seen, &mut owner) {
            return false;
        }
    }
    true
}

/// Lexicographically minimal `(l, k)` in `N^2` with `l * qpt - k * qp` an
/// integer, returned as `(k, l)`. `qp = q/p` of the source, `qpt` of the
/// target.
///
/// Degree 0 on both sides: `k * qp mod 1` is periodic in `k` with period
/// `den(qp)`, and `(k, l) = (den(qp), den(qpt))` always works, so the scan
/// below is exhaustive. Equal nonzero degrees: the `L`-parts must cancel,
/// `l * qpt = k * qp`, whose minimal solution is `l/k = qp/qpt` in lowest
/// terms. Different degrees never cancel.
pub fn solve_kl(qp: ExtRatio, qpt: ExtRatio) -> Option<(u64, u64)> {
    let found = if qp.lambda_deg == 0 && qpt.lambda_deg == 0 {
        let kmax = *qp.ratio.denom() as u64;
        let lmax = *qpt.ratio.denom() as u64;
        (1..=lmax).find_map(|l| {
            (1..=kmax)
                .find(|&k| is_int_diff(&[(l as i64, qpt), (-(k as i64), qp)]))
                .map(|k| (k, l))
        })
    } else if qp.lambda_deg == qpt.lambda_deg {
        let lk = qp.ratio / qpt.ratio;
        Some((*lk.denom() as u64, *lk.numer() as u64))
    } else {
        None
    };
    if let Some((k, l)) = found {
        debug_assert!(is_int_diff(&[(l as i64, qpt), (-(k as i64), qp)]));
    }
    found
}

/// The per-coordinate conditions `(r * qt - q) / pt_j in Z` as pairs
/// `(qt / pt_j, q / pt_j)`.
fn r_conditions(q: Exponent, qt: Exponent, pt: &ExponentVec) -> Vec<(ExtRatio, ExtRatio)> {
    pt.iter()
        .map(|pj| (ext_ratio(qt, *pj), ext_ratio(q, *pj)))
        .collect()
}

/// Whether `r` satisfies every condition `(r * qt - q) / pt_j in Z`.
pub fn r_condition_holds(q: Exponent, qt: Exponent, pt: &ExponentVec, r: u64) -> bool {
    r_conditions(q, qt, pt)
        .iter()
        .all(|&(a, b)| is_int_diff(&[(r as i64, a), (-1, b)]))
}

/// How `r` is constrained by `(r * qt - q) / pt_j in Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RConstraint {
    /// Some condition has an `L`-part in `r`; only this `r` can work.
    Forced(u64),
    /// An `L`-part can never cancel.
    Impossible,
    /// All conditions are periodic in `r` with this period.
    Periodic(u64),
}

/// Derives the search structure for [`solve_r`].
///
/// Write `a_j = qt/pt_j`, `b_j = q/pt_j`. If `a_j` has degree 0 the
/// condition `r * a_j - b_j in Z` only depends on `r mod den(a_j)`, so the
/// whole system is periodic with `P = lcm_j den(a_j)`. If some `a_j` has
/// nonzero degree, the `L`-part `r * a_j - b_j` must vanish, which pins
/// `r = b_j / a_j = q / qt` (impossible unless that is a natural number of
/// the same degree).
pub fn r_constraint(q: Exponent, qt: Exponent, pt: &ExponentVec) -> RConstraint {
    let conds = r_conditions(q, qt, pt);
    let mut period = 1u64;
    for &(a, b) in &conds {
        if a.lambda_deg != 0 {
            if b.lambda_deg != a.lambda_deg {
                return RConstraint::Impossible;
            }
            let r = b.ratio / a.ratio;
            return if r.is_integer() && r.is_positive() {
                RConstraint::Forced(r.to_integer() as u64)
            } else {
                RConstraint::Impossible
            };
        }
        period = period.lcm(&(*a.ratio.denom() as u64));
    }
    RConstraint::Periodic(period)
}

/// Smallest `r >= 1` with `(r * qt - q) / pt_j in Z` for every `j`.
pub fn solve_r(q: Exponent, qt: Exponent, pt: &ExponentVec) -> Option<u64> {
    match r_constraint(q, qt, pt) {
        RConstraint::Impossible => None,
        RConstraint::Forced(r) => r_condition_holds(q, qt, pt, r).then_some(r),
        RConstraint::Periodic(period) => (1..=period).find(|&r| r_condition_holds(q, qt, pt, r)),
    }
}
