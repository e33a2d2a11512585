//! Shared fixtures for the integration tests: exponent alphabets, pair
//! grids and a brute-force existence oracle that works on its own exact
//! representation rather than on the crate's `ExtRatio`.

#![allow(dead_code)]

use hartogs_core::hartogs::HartogsDomain;
use hartogs_core::{Exponent, ExponentVec, Rational};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n/d * L^g` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct X {
    pub n: i64,
    pub d: i64,
    pub g: i32,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl X {
    pub fn new(n: i64, d: i64, g: i32) -> Self {
        let c = gcd(n, d);
        X { n: n / c, d: d / c, g }
    }

    pub fn div(self, o: X) -> X {
        X::new(self.n * o.d, self.d * o.n, self.g - o.g)
    }

    pub fn is_nat(self) -> bool {
        self.g == 0 && self.n % self.d == 0
    }

    pub fn exponent(self) -> Exponent {
        Exponent::new(Rational::new(self.n, self.d), self.g as u8).unwrap()
    }
}

/// Every `a/b` with `1 <= a, b <= 4`, with and without the factor `L`.
pub fn full_alphabet() -> Vec<X> {
    let mut v: Vec<X> = Vec::new();
    for g in 0..2 {
        for a in 1..=4 {
            for b in 1..=4 {
                let x = X::new(a, b, g);
                if !v.contains(&x) {
                    v.push(x);
                }
            }
        }
    }
    v
}

pub fn alphabet6() -> Vec<X> {
    vec![X::new(1, 2, 0), X::new(1, 1, 0), X::new(2, 1, 0), X::new(3, 1, 0), X::new(1, 1, 1), X::new(2, 1, 1)]
}

pub fn alphabet5() -> Vec<X> {
    vec![X::new(1, 2, 0), X::new(1, 1, 0), X::new(2, 1, 0), X::new(1, 1, 1), X::new(2, 1, 1)]
}

#[derive(Clone, Debug)]
pub struct Dom {
    pub p: Vec<X>,
    pub q: Vec<X>,
}

impl Dom {
    pub fn domain(&self) -> HartogsDomain {
        let ev = |v: &[X]| ExponentVec::new(v.iter().map(|x| x.exponent()).collect()).unwrap();
        HartogsDomain::new(ev(&self.p), ev(&self.q))
    }
}

fn tuples(alpha: &[X], len: usize) -> Vec<Vec<X>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                alpha.iter().map(move |x| {
                    let mut t = t.clone();
                    t.push(*x);
                    t
                })
            })
            .collect();
    }
    out
}

/// All domains of shape `(n, m)` over `alpha`.
pub fn domains(alpha: &[X], n: usize, m: usize) -> Vec<Dom> {
    let ps = tuples(alpha, n);
    let qs = tuples(alpha, m);
    ps.iter()
        .flat_map(|p| qs.iter().map(move |q| Dom { p: p.clone(), q: q.clone() }))
        .collect()
}

pub fn random_dom<R: Rng>(alpha: &[X], n: usize, m: usize, rng: &mut R) -> Dom {
    Dom {
        p: (0..n).map(|_| *alpha.choose(rng).unwrap()).collect(),
        q: (0..m).map(|_| *alpha.choose(rng).unwrap()).collect(),
    }
}

/// The grid for the existence criterion: exhaustive for `n = m = 1` over
/// the full alphabet, exhaustive over small alphabets otherwise, plus
/// seeded random full-alphabet pairs.
pub struct Grid {
    pub shape: (usize, usize),
    pub doms: Vec<Dom>,
    /// Index pairs into `doms`.
    pub pairs: Vec<(usize, usize)>,
}

pub const RANDOM_PAIRS: usize = 20_000;

pub fn grids() -> Vec<Grid> {
    let mut out = Vec::new();
    let full = full_alphabet();
    let exhaustive = |doms: Vec<Dom>, shape| {
        let k = doms.len();
        let pairs = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
        Grid { shape, doms, pairs }
    };
    out.push(exhaustive(domains(&full, 1, 1), (1, 1)));
    out.push(exhaustive(domains(&alphabet6(), 1, 2), (1, 2)));
    out.push(exhaustive(domains(&alphabet6(), 2, 1), (2, 1)));
    out.push(exhaustive(domains(&alphabet5(), 2, 2), (2, 2)));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for (n, m) in [(1, 2), (2, 1), (2, 2)] {
        let mut doms = Vec::with_capacity(2 * RANDOM_PAIRS);
        let mut pairs = Vec::with_capacity(RANDOM_PAIRS);
        for i in 0..RANDOM_PAIRS {
            doms.push(random_dom(&full, n, m, &mut rng));
            doms.push(random_dom(&full, n, m, &mut rng));
            pairs.push((2 * i, 2 * i + 1));
        }
        out.push(Grid { shape: (n, m), doms, pairs });
    }
    out
}

/// `sum c_i x_i` is an integer: every `L`-degree other than 0 cancels and
/// the degree-0 part is integral.
fn lin_int(terms: &[(i64, X)]) -> bool {
    let mut degs: Vec<(i32, i128, i128)> = Vec::new();
    for &(c, x) in terms {
        let (n, d) = (c as i128 * x.n as i128, x.d as i128);
        match degs.iter_mut().find(|e| e.0 == x.g) {
            Some(e) => {
                e.1 = e.1 * d + n * e.2;
                e.2 *= d;
            }
            None => degs.push((x.g, n, d)),
        }
    }
    degs.iter().all(|&(g, n, d)| if g == 0 { n % d == 0 } else { n == 0 })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut p = p.clone();
            p.insert(i, n - 1);
            out.push(p);
        }
    }
    out
}

/// Some `sigma` with every `a[sigma(j)] / b[j]` natural.
fn some_matching(a: &[X], b: &[X]) -> bool {
    permutations(a.len())
        .iter()
        .any(|s| (0..a.len()).all(|j| a[s[j]].div(b[j]).is_nat()))
}

/// Brute-force existence over permutations and bounded `k, l, r`.
///
/// For `n = m = 1` a solution of `l q~/p~ - k q/p in Z` either has equal
/// nonzero `L`-degrees, forcing `l/k = (q p~)/(p q~)`, or degree 0 where
/// `l <= den(q~/p~)` and `k <= den(q/p)` suffice; both are covered by the
/// numerator/denominator products used as bounds below. For `m = 1` the
/// condition on `r` is periodic modulo the product of the denominators of
/// `q~/p~_j`, or pins `r = q/q~`.
pub fn oracle_exists(src: &Dom, dst: &Dom) -> bool {
    let (n, m) = (src.p.len(), src.q.len());
    if (n, m) != (dst.p.len(), dst.q.len()) {
        return false;
    }
    match (n, m) {
        (1, 1) => {
            let (p, q, pt, qt) = (src.p[0], src.q[0], dst.p[0], dst.q[0]);
            let lb = q.n * pt.n * p.d * qt.d;
            let kb = qt.n * p.n * pt.d * q.d;
            let (a, b) = (qt.div(pt), q.div(p));
            (1..=lb).any(|l| (1..=kb).any(|k| lin_int(&[(l, a), (-k, b)])))
        }
        (1, _) => src.p[0].div(dst.p[0]).is_nat() && some_matching(&src.q, &dst.q),
        (_, 1) => {
            let (q, qt) = (src.q[0], dst.q[0]);
            let rb = dst.p.iter().map(|pt| qt.d * pt.n).product::<i64>().max(q.n * qt.d);
            some_matching(&src.p, &dst.p)
                && (1..=rb).any(|r| dst.p.iter().all(|&ptj| lin_int(&[(r, qt.div(ptj)), (-1, q.div(ptj))])))
        }
        _ => some_matching(&src.p, &dst.p) && some_matching(&src.q, &dst.q),
    }
}
