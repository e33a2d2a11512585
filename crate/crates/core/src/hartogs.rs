//! Generalized Hartogs triangles `F_{p,q}` and the proper holomorphic maps
//! between them, split by the dimension regime `(n, m)`.

use crate::ellipsoid::{
    cone, czero, modulus_sum, nth_roots, random_unimodular, unimodular_tol, BallAut, EllipsoidAut,
    EllipsoidProperMap, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::exponents::{
    ext_ratio, int_value, is_int_diff, perm_matchings, r_constraint, solve_kl, solve_r, Exponent,
    ExponentVec, ExtRatio, RConstraint,
};
use crate::linalg::CMatrix;
use crate::scalar::{int_pow, Scalar};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "11")]
    Case11,
    #[serde(rename = "1m")]
    Case1m,
    #[serde(rename = "n1")]
    Casen1,
    #[serde(rename = "nm")]
    Casenm,
}

impl Regime {
    pub fn of(n: usize, m: usize) -> Self {
        match (n >= 2, m >= 2) {
            (false, false) => Regime::Case11,
            (false, true) => Regime::Case1m,
            (true, false) => Regime::Casen1,
            (true, true) => Regime::Casenm,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Case11 => "11",
            Regime::Case1m => "1m",
            Regime::Casen1 => "n1",
            Regime::Casenm => "nm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembershipVerdict {
    Interior,
    OnK,
    OnL,
    Origin,
    Outside,
}

impl MembershipVerdict {
    pub fn in_closure_minus_origin(&self) -> bool {
        matches!(self, Self::Interior | Self::OnK | Self::OnL)
    }
}

/// `F_{p,q} = { sum |z_j|^{2p_j} < sum |w_j|^{2q_j} < 1 }` in `C^n x C^m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HartogsDomain {
    pub p: ExponentVec,
    pub q: ExponentVec,
}

impl fmt::Display for HartogsDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F[{}; {}]", self.p, self.q)
    }
}

impl HartogsDomain {
    pub fn new(p: ExponentVec, q: ExponentVec) -> Self {
        Self { p, q }
    }

    /// Shorthand over exponent strings.
    pub fn parse<S: AsRef<str>>(p: &[S], q: &[S]) -> Result<Self> {
        Ok(Self::new(ExponentVec::parse(p)?, ExponentVec::parse(q)?))
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.n(), self.m())
    }

    pub fn same_dims(&self, other: &HartogsDomain) -> bool {
        self.n() == other.n() && self.m() == other.m()
    }

    /// `(s_z, s_w)`
    pub fn sums<T: Scalar>(&self, pt: &Point<T>, lambda: T) -> (T, T) {
        (modulus_sum(&self.p, &pt.z, lambda), modulus_sum(&self.q, &pt.w, lambda))
    }

    /// Classifies a point. `L` is tested absolutely (`|s_w - 1| <= tol`),
    /// `K` relative to `s_w`; corner points count as `L`.
    pub fn membership<T: Scalar>(&self, pt: &Point<T>, tol: T, lambda: T) -> Result<MembershipVerdict> {
        if pt.z.len() != self.n() || pt.w.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "point has shape ({}, {}), domain has ({}, {})",
                pt.z.len(),
                pt.w.len(),
                self.n(),
                self.m()
            )));
        }
        if pt.z.iter().chain(&pt.w).all(|c| c.norm() <= tol) {
            return Ok(MembershipVerdict::Origin);
        }
        let (sz, sw) = self.sums(pt, lambda);
        let verdict = if sw > T::one() + tol || sz > sw + tol * sw {
            MembershipVerdict::Outside
        } else if (sw - T::one()).abs() <= tol {
            MembershipVerdict::OnL
        } else if (sz - sw).abs() <= tol * sw {
            MembershipVerdict::OnK
        } else {
            MembershipVerdict::Interior
        };
        Ok(verdict)
    }
}

/// A point `(z, w)` of `C^n x C^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Point<T: Scalar> {
    pub z: Vec<Complex<T>>,
    pub w: Vec<Complex<T>>,
}

impl<T: Scalar> Point<T> {
    pub fn new(z: Vec<Complex<T>>, w: Vec<Complex<T>>) -> Self {
        Self { z, w }
    }

    /// Splits a flat coordinate list at `n`.
    pub fn from_flat(mut coords: Vec<Complex<T>>, n: usize) -> Result<Self> {
        if coords.len() < n {
            return Err(Error::DimensionMismatch(format!("{} coordinates, need more than {n}", coords.len())));
        }
        let w = coords.split_off(n);
        Ok(Self { z: coords, w })
    }

    pub fn to_flat(&self) -> Vec<Complex<T>> {
        self.z.iter().chain(&self.w).copied().collect()
    }

    /// Largest coordinate distance.
    pub fn dist(&self, other: &Point<T>) -> T {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .fold(T::zero(), |m, (a, b)| m.max((*a - b).norm()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BlaschkeZero<T: Scalar> {
    pub alpha: Complex<T>,
    pub multiplicity: u32,
}

/// `zeta * prod ((t - alpha) / (1 - conj(alpha) t))^mult`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BlaschkeProduct<T: Scalar> {
    pub zeros: Vec<BlaschkeZero<T>>,
    pub unimodular: Complex<T>,
}

impl<T: Scalar> BlaschkeProduct<T> {
    pub fn new(zeros: Vec<(Complex<T>, u32)>, unimodular: Complex<T>) -> Result<Self> {
        let out = Self {
            zeros: zeros
                .into_iter()
                .map(|(alpha, multiplicity)| BlaschkeZero { alpha, multiplicity })
                .collect(),
            unimodular,
        };
        let v = out.violations();
        if v.is_empty() {
            Ok(out)
        } else {
            Err(Error::InvalidMap(v.join("; ")))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if (self.unimodular.norm() - T::one()).abs() > unimodular_tol::<T>() {
            v.push("Blaschke constant is not unimodular".to_string());
        }
        for z in &self.zeros {
            if z.alpha.norm() >= T::one() {
                v.push(format!("Blaschke zero {} outside the disc", z.alpha));
            }
            if z.multiplicity == 0 {
                v.push("Blaschke zero with multiplicity 0".to_string());
            }
        }
        v
    }

    pub fn degree(&self) -> u32 {
        self.zeros.iter().map(|z| z.multiplicity).sum()
    }

    pub fn vanishes_at_zero(&self) -> bool {
        self.zeros.iter().any(|z| z.alpha == czero())
    }

    pub fn eval(&self, t: Complex<T>) -> Complex<T> {
        self.zeros.iter().fold(self.unimodular, |acc, z| {
            let f = (t - z.alpha) / (cone::<T>() - z.alpha.conj() * t);
            acc * int_pow(f, z.multiplicity as i64)
        })
    }

    /// A disc automorphism `u (t - a)/(1 - conj(a) t)` as a degree-1 product.
    pub fn from_disc_aut(h: &BallAut<T>) -> Self {
        assert_eq!(h.dim(), 1, "disc automorphism expected");
        Self {
            zeros: vec![BlaschkeZero {
                alpha: h.a[0],
                multiplicity: 1,
            }],
            unimodular: h.q[(0, 0)] * h.s(),
        }
    }

    /// The disc automorphism of a degree-1 product.
    pub fn to_disc_aut(&self) -> Option<BallAut<T>> {
        if self.degree() != 1 {
            return None;
        }
        let a = self.zeros[0].alpha;
        let s = (T::one() - a.norm_sqr()).sqrt();
        let q = CMatrix::from_rows(vec![vec![self.unimodular / s]])?;
        BallAut::from_parts(vec![a], q).ok()
    }
}

/// `B(z^{p'} w^{-q'})` factor of a one-dimensional map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BlaschkeFactor<T: Scalar> {
    pub p_prime: u64,
    pub q_prime: u64,
    pub product: BlaschkeProduct<T>,
}

/// The closed forms, one per dimension regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub enum ProperForm<T: Scalar> {
    /// `(zeta z^k w^b B(z^{p'} w^{-q'}), xi w^l)`, `b = l q~/p~ - k q/p`.
    #[serde(rename = "11")]
    Case11 {
        zeta: Complex<T>,
        xi: Complex<T>,
        k: u64,
        l: u64,
        b: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blaschke: Option<BlaschkeFactor<T>>,
    },
    /// `(zeta z^k, h(w))`
    #[serde(rename = "1m")]
    Case1m {
        zeta: Complex<T>,
        k: u64,
        h: EllipsoidProperMap<T>,
    },
    /// `(w^{r q~/p~_j} f_j(z_1 w^{-q/p_1}, ...), xi w^r)`
    #[serde(rename = "n1")]
    Casen1 {
        xi: Complex<T>,
        r: u64,
        f: EllipsoidProperMap<T>,
    },
    /// `(g(z), h(w))`
    #[serde(rename = "nm")]
    Casenm {
        g: EllipsoidProperMap<T>,
        h: EllipsoidProperMap<T>,
    },
}

impl<T: Scalar> ProperForm<T> {
    pub fn regime(&self) -> Regime {
        match self {
            ProperForm::Case11 { .. } => Regime::Case11,
            ProperForm::Case1m { .. } => Regime::Case1m,
            ProperForm::Casen1 { .. } => Regime::Casen1,
            ProperForm::Casenm { .. } => Regime::Casenm,
        }
    }
}

/// A map `F_{p,q} -> F_{p~,q~}` in closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct HartogsProperMap<T: Scalar> {
    pub src: HartogsDomain,
    pub dst: HartogsDomain,
    pub lambda: T,
    #[serde(flatten)]
    pub form: ProperForm<T>,
}

/// Parameters certifying existence, per regime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExistenceWitness {
    Case11 { k: u64, l: u64 },
    Case1m { k: u64, sigma: Vec<usize> },
    Casen1 { sigma: Vec<usize>, r: u64 },
    Casenm { sigma: Vec<usize>, tau: Vec<usize> },
}

fn unimodular<T: Scalar>(c: Complex<T>) -> bool {
    (c.norm() - T::one()).abs() <= unimodular_tol::<T>()
}

fn check_dims(src: &HartogsDomain, dst: &HartogsDomain) -> Result<()> {
    if !src.same_dims(dst) {
        return Err(Error::DimensionMismatch(format!(
            "source has (n, m) = ({}, {}), target has ({}, {})",
            src.n(),
            src.m(),
            dst.n(),
            dst.m()
        )));
    }
    Ok(())
}

fn one() -> Exponent {
    Exponent::one()
}

/// Decides whether a proper holomorphic map `src -> dst` exists.
pub fn exists_proper(src: &HartogsDomain, dst: &HartogsDomain) -> Result<Option<ExistenceWitness>> {
    check_dims(src, dst)?;
    let (p, q, pt, qt) = (&src.p, &src.q, &dst.p, &dst.q);
    Ok(match src.regime() {
        // With q/p and q~/p~ both rational, l = num(q/p) den(q~/p~) and
        // k = num(q~/p~) den(q/p) turn both products into the same integer,
        // so a witness always exists in that case.
        Regime::Case11 => solve_kl(ext_ratio(q[0], p[0]), ext_ratio(qt[0], pt[0]))
            .map(|(k, l)| ExistenceWitness::Case11 { k, l }),
        Regime::Case1m => {
            let k = ext_ratio(p[0], pt[0]).as_nat();
            let sigma = perm_matchings(q, qt)?.first();
            k.zip(sigma).map(|(k, sigma)| ExistenceWitness::Case1m { k, sigma })
        }
        Regime::Casen1 => {
            let sigma = perm_matchings(p, pt)?.first();
            let r = solve_r(q[0], qt[0], pt);
            sigma.zip(r).map(|(sigma, r)| ExistenceWitness::Casen1 { sigma, r })
        }
        Regime::Casenm => {
            let sigma = perm_matchings(p, pt)?.first();
            let tau = perm_matchings(q, qt)?.first();
            sigma.zip(tau).map(|(sigma, tau)| ExistenceWitness::Casenm { sigma, tau })
        }
    })
}

/// The deterministic representative built from the minimal witness.
pub fn canonical_proper<T: Scalar>(src: &HartogsDomain, dst: &HartogsDomain, lambda: T) -> Result<HartogsProperMap<T>> {
    let witness = exists_proper(src, dst)?.ok_or(Error::NoProperMap)?;
    let form = match witness {
        ExistenceWitness::Case11 { k, l } => {
            let b = case11_exponent(src, dst, k, l).ok_or(Error::NoProperMap)?;
            ProperForm::Case11 {
                zeta: cone(),
                xi: cone(),
                k,
                l,
                b,
                blaschke: None,
            }
        }
        ExistenceWitness::Case1m { k, .. } => ProperForm::Case1m {
            zeta: cone(),
            k,
            h: EllipsoidProperMap::canonical(&src.q, &dst.q, lambda)?,
        },
        ExistenceWitness::Casen1 { r, .. } => ProperForm::Casen1 {
            xi: cone(),
            r,
            f: EllipsoidProperMap::canonical(&src.p, &dst.p, lambda)?,
        },
        ExistenceWitness::Casenm { .. } => ProperForm::Casenm {
            g: EllipsoidProperMap::canonical(&src.p, &dst.p, lambda)?,
            h: EllipsoidProperMap::canonical(&src.q, &dst.q, lambda)?,
        },
    };
    Ok(HartogsProperMap {
        src: src.clone(),
        dst: dst.clone(),
        lambda,
        form,
    })
}

/// `l q~/p~ - k q/p` when it is an integer.
pub fn case11_exponent(src: &HartogsDomain, dst: &HartogsDomain, k: u64, l: u64) -> Option<i64> {
    int_value(&[
        (l as i64, ext_ratio(dst.q[0], dst.p[0])),
        (-(k as i64), ext_ratio(src.q[0], src.p[0])),
    ])
}

/// `p/q = p'/q'` in lowest terms, when rational.
pub fn lowest_terms(p: Exponent, q: Exponent) -> Option<(u64, u64)> {
    let r = ext_ratio(p, q);
    (r.lambda_deg == 0).then(|| (*r.ratio.numer() as u64, *r.ratio.denom() as u64))
}

/// Whether every proper self-map is an automorphism: `n >= 2` and `m >= 2`.
pub fn is_rigid(d: &HartogsDomain) -> bool {
    d.n() >= 2 && d.m() >= 2
}

/// A proper self-map of degree at least 2 allowed by the closed forms, with
/// the smallest parameter (`k = l = 2`, or the least `r >= 2`). `None` when
/// every proper self-map given by the closed forms is an automorphism.
pub fn degree_witness<T: Scalar>(d: &HartogsDomain, lambda: T) -> Option<HartogsProperMap<T>> {
    let form = match d.regime() {
        Regime::Case11 => ProperForm::Case11 {
            zeta: cone(),
            xi: cone(),
            k: 2,
            l: 2,
            b: case11_exponent(d, d, 2, 2)?,
            blaschke: None,
        },
        Regime::Casen1 => {
            let r = match r_constraint(d.q[0], d.q[0], &d.p) {
                RConstraint::Periodic(period) => {
                    (2..=period + 1).find(|&r| crate::exponents::r_condition_holds(d.q[0], d.q[0], &d.p, r))?
                }
                _ => return None,
            };
            ProperForm::Casen1 {
                xi: cone(),
                r,
                f: EllipsoidProperMap::identity(d.p.clone(), lambda),
            }
        }
        // k = p/p~ = 1 and every proper self-map of an ellipsoid fixing 0
        // is an automorphism, so no witness exists in these regimes.
        Regime::Case1m | Regime::Casenm => return None,
    };
    Some(HartogsProperMap {
        src: d.clone(),
        dst: d.clone(),
        lambda,
        form,
    })
}

impl<T: Scalar> HartogsProperMap<T> {
    pub fn regime(&self) -> Regime {
        self.form.regime()
    }

    pub fn is_valid(&self) -> bool {
        self.validate_proper_form().is_empty()
    }

    /// Every violated side condition of the closed form; empty iff valid.
    pub fn validate_proper_form(&self) -> Vec<String> {
        let mut v = Vec::new();
        let (src, dst) = (&self.src, &self.dst);
        if !src.same_dims(dst) {
            v.push("source and target dimensions differ".to_string());
            return v;
        }
        if src.regime() != self.regime() {
            v.push(format!(
                "form {} does not match dimensions (n, m) = ({}, {})",
                self.regime().tag(),
                src.n(),
                src.m()
            ));
            return v;
        }
        if !(self.lambda > T::zero()) {
            v.push("lambda must be positive".to_string());
        }
        match &self.form {
            ProperForm::Case11 {
                zeta,
                xi,
                k,
                l,
                b,
                blaschke,
            } => {
                if !unimodular(*zeta) || !unimodular(*xi) {
                    v.push("zeta and xi must be unimodular".to_string());
                }
                if *l == 0 {
                    v.push("l must be positive".to_string());
                }
                match case11_exponent(src, dst, *k, *l) {
                    Some(e) if e == *b => {}
                    Some(e) => v.push(format!("exponent of w is {e}, descriptor says {b}")),
                    None => v.push("l q~/p~ - k q/p is not an integer".to_string()),
                }
                match blaschke {
                    None if *k == 0 => v.push("B is constant, so k must be positive".to_string()),
                    None => {}
                    Some(bf) => match lowest_terms(src.p[0], src.q[0]) {
                        None => v.push("a Blaschke factor needs q/p rational".to_string()),
                        Some((pp, qq)) => {
                            if (bf.p_prime, bf.q_prime) != (pp, qq) {
                                v.push(format!(
                                    "(p', q') = ({}, {}) but p/q = {pp}/{qq}",
                                    bf.p_prime, bf.q_prime
                                ));
                            }
                            if bf.product.vanishes_at_zero() {
                                v.push("B vanishes at 0".to_string());
                            }
                            v.extend(bf.product.violations());
                        }
                    },
                }
            }
            ProperForm::Case1m { zeta, k, h } => {
                if !unimodular(*zeta) {
                    v.push("zeta must be unimodular".to_string());
                }
                if ext_ratio(src.p[0], dst.p[0]).as_nat() != Some(*k) {
                    v.push(format!("k = {k} is not p/p~ = {}", ext_ratio(src.p[0], dst.p[0])));
                }
                ellipsoid_part(&mut v, "h", h, &src.q, &dst.q, true);
            }
            ProperForm::Casen1 { xi, r, f } => {
                if !unimodular(*xi) {
                    v.push("xi must be unimodular".to_string());
                }
                if *r == 0 {
                    v.push("r must be positive".to_string());
                }
                ellipsoid_part(&mut v, "f", f, &src.p, &dst.p, false);
                let (q, qt) = (src.q[0], dst.q[0]);
                for (j, ptj) in dst.p.iter().enumerate() {
                    if !is_int_diff(&[(*r as i64, ext_ratio(qt, *ptj)), (-1, ext_ratio(q, *ptj))]) {
                        v.push(format!("(r q~ - q)/p~_{j} is not an integer"));
                    }
                }
                // Only a recentered f makes the branch of w^{-q/p_i} matter.
                if f.as_ok_ref().is_some_and(|f| !f.fixes_origin()) {
                    for (j, ptj) in dst.p.iter().enumerate() {
                        if !ext_ratio(one(), *ptj).is_nat() {
                            continue;
                        }
                        if !ext_ratio(q, one()).is_nat() {
                            v.push(format!("1/p~_{j} is natural and f recenters, so q must be natural"));
                        }
                        let rq = ext_ratio(qt, *ptj).mul(&ExtRatio {
                            ratio: (*r as i64).into(),
                            lambda_deg: 0,
                        });
                        if !rq.is_nat() {
                            v.push(format!("r q~/p~_{j} must be natural"));
                        }
                    }
                }
            }
            ProperForm::Casenm { g, h } => {
                ellipsoid_part(&mut v, "g", g, &src.p, &dst.p, true);
                ellipsoid_part(&mut v, "h", h, &src.q, &dst.q, true);
            }
        }
        v
    }

    /// Evaluation with a domain check.
    pub fn eval(&self, pt: &Point<T>) -> Result<Point<T>> {
        let verdict = self.src.membership(pt, T::of(DEFAULT_TOL), self.lambda)?;
        if !verdict.in_closure_minus_origin() {
            return Err(Error::NotInDomain);
        }
        self.apply(pt)
    }

    /// Evaluation of the closed form. Fractional powers of `w` all use one
    /// principal logarithm, so every product of them that is an integer
    /// power in total is single-valued.
    pub fn apply(&self, pt: &Point<T>) -> Result<Point<T>> {
        let lambda = self.lambda;
        match &self.form {
            ProperForm::Case11 {
                zeta,
                xi,
                k,
                l,
                b,
                blaschke,
            } => {
                let (z, w) = (pt.z[0], pt.w[0]);
                if w == czero() && (*b < 0 || blaschke.is_some()) {
                    return Err(Error::BranchPole);
                }
                let mut g = *zeta * int_pow(z, *k as i64) * int_pow(w, *b);
                if let Some(bf) = blaschke {
                    let t = int_pow(z, bf.p_prime as i64) * int_pow(w, -(bf.q_prime as i64));
                    g = g * bf.product.eval(t);
                }
                Ok(Point::new(vec![g], vec![*xi * int_pow(w, *l as i64)]))
            }
            ProperForm::Case1m { zeta, k, h } => Ok(Point::new(
                vec![*zeta * int_pow(pt.z[0], *k as i64)],
                h.apply(&pt.w),
            )),
            ProperForm::Casen1 { xi, r, f } => {
                let w = pt.w[0];
                if w == czero() {
                    return Err(Error::BranchPole);
                }
                let lw = w.ln();
                let wpow = |c: T| (lw * c).exp();
                let q = self.src.q[0].value(lambda);
                let qt = self.dst.q[0].value(lambda);
                let x: Vec<_> = (0..f.dim())
                    .map(|j| {
                        let s = f.sigma[j];
                        let rj = f.r[j];
                        int_pow(pt.z[s], rj as i64) * wpow(-q * T::of(rj as f64) / self.src.p[s].value(lambda))
                    })
                    .collect();
                let v = f.phi.apply(&x);
                let g = v
                    .into_iter()
                    .zip(f.outer_powers())
                    .enumerate()
                    .map(|(j, (vj, o))| {
                        int_pow(vj, o as i64) * wpow(T::of(*r as f64) * qt / self.dst.p[j].value(lambda))
                    })
                    .collect();
                Ok(Point::new(g, vec![*xi * int_pow(w, *r as i64)]))
            }
            ProperForm::Casenm { g, h } => Ok(Point::new(g.apply(&pt.z), h.apply(&pt.w))),
        }
    }

    /// All interior points of the source mapped to `y` (within `tol`),
    /// found by inverting the closed form layer by layer.
    pub fn preimages(&self, y: &Point<T>, tol: T) -> Result<Vec<Point<T>>> {
        let lambda = self.lambda;
        let candidates: Vec<Point<T>> = match &self.form {
            ProperForm::Case11 {
                zeta,
                xi,
                k,
                l,
                b,
                blaschke,
            } => {
                if blaschke.is_some() || *k == 0 {
                    return Err(Error::Unsupported("fibers of maps with a Blaschke factor".into()));
                }
                let mut out = Vec::new();
                for w in nth_roots(y.w[0] / *xi, *l) {
                    if w == czero() {
                        continue;
                    }
                    for z in nth_roots(y.z[0] / (*zeta * int_pow(w, *b)), *k) {
                        out.push(Point::new(vec![z], vec![w]));
                    }
                }
                out
            }
            ProperForm::Case1m { zeta, k, h } => {
                let ws = h.preimages(&y.w, tol)?;
                let zs = nth_roots(y.z[0] / *zeta, *k);
                zs.iter()
                    .flat_map(|z| ws.iter().map(move |w| Point::new(vec![*z], w.clone())))
                    .collect()
            }
            ProperForm::Casen1 { xi, r, f } => {
                let q = self.src.q[0].value(lambda);
                let qt = self.dst.q[0].value(lambda);
                let mut out = Vec::new();
                for w in nth_roots(y.w[0] / *xi, *r) {
                    if w == czero() {
                        continue;
                    }
                    let lw = w.ln();
                    let wpow = |c: T| (lw * c).exp();
                    let v: Vec<_> = (0..f.dim())
                        .map(|j| y.z[j] / wpow(T::of(*r as f64) * qt / self.dst.p[j].value(lambda)))
                        .collect();
                    for u in f.preimages(&v, tol)? {
                        let z = (0..f.dim())
                            .map(|i| u[i] * wpow(q / self.src.p[i].value(lambda)))
                            .collect();
                        out.push(Point::new(z, vec![w]));
                    }
                }
                out
            }
            ProperForm::Casenm { g, h } => {
                let zs = g.preimages(&y.z, tol)?;
                let ws = h.preimages(&y.w, tol)?;
                zs.iter()
                    .flat_map(|z| ws.iter().map(move |w| Point::new(z.clone(), w.clone())))
                    .collect()
            }
        };
        let mut out: Vec<Point<T>> = Vec::new();
        for c in candidates {
            if self.src.membership(&c, T::zero(), lambda)? != MembershipVerdict::Interior {
                continue;
            }
            match self.apply(&c) {
                Ok(img) if img.dist(y) <= tol => {}
                _ => continue,
            }
            if !out.iter().any(|o| o.dist(&c) <= tol) {
                out.push(c);
            }
        }
        Ok(out)
    }

    /// Whether the descriptor has the shape of an automorphism of `src`.
    pub fn in_aut_family(&self) -> bool {
        if self.src != self.dst || !self.is_valid() {
            return false;
        }
        match &self.form {
            ProperForm::Case11 { k, l, b, blaschke, .. } => match blaschke {
                None => *k == 1 && *l == 1 && *b == 0,
                Some(bf) => *k == 0 && *l == 1 && bf.p_prime == 1 && bf.product.degree() == 1,
            },
            ProperForm::Case1m { k, h, .. } => *k == 1 && h.as_aut().is_some(),
            ProperForm::Casen1 { r, f, .. } => *r == 1 && f.as_aut().is_some(),
            ProperForm::Casenm { g, h } => g.as_aut().is_some() && h.as_aut().is_some(),
        }
    }
}

trait AsOkRef {
    fn as_ok_ref(&self) -> Option<&Self>;
}

impl<T: Scalar> AsOkRef for EllipsoidProperMap<T> {
    /// `Some` when the map is structurally valid, so derived checks make sense.
    fn as_ok_ref(&self) -> Option<&Self> {
        self.validate().is_ok().then_some(self)
    }
}

fn ellipsoid_part<T: Scalar>(
    v: &mut Vec<String>,
    name: &str,
    e: &EllipsoidProperMap<T>,
    p: &ExponentVec,
    q: &ExponentVec,
    must_fix_origin: bool,
) {
    if &e.p != p || &e.q != q {
        v.push(format!("{name} must map E[{p}] to E[{q}], found E[{}] to E[{}]", e.p, e.q));
        return;
    }
    if let Err(err) = e.validate() {
        v.push(format!("{name}: {err}"));
        return;
    }
    if must_fix_origin && !e.fixes_origin() {
        v.push(format!("{name} must fix the origin"));
    }
}

/// Free parameters of `Aut(F_{p,q})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutFamily {
    pub regime: Regime,
    pub form: String,
    pub parameters: Vec<String>,
    /// Whether the disc/ball part may move the origin.
    pub recentering_allowed: bool,
    /// `|Sigma_n(p)|` and `|Sigma_m(q)|`.
    pub z_permutations: Option<u128>,
    pub w_permutations: Option<u128>,
}

fn recentering_allowed(d: &HartogsDomain) -> bool {
    match d.regime() {
        Regime::Case11 => ext_ratio(d.q[0], d.p[0]).is_nat(),
        Regime::Casen1 => ext_ratio(d.q[0], one()).is_nat() && d.p.iter().any(|e| e.is_one()),
        Regime::Case1m | Regime::Casenm => false,
    }
}

pub fn aut_family(d: &HartogsDomain) -> Result<AutFamily> {
    let perms = |v: &ExponentVec| -> Result<Option<u128>> { Ok(perm_matchings(v, v)?.count()) };
    let recenter = recentering_allowed(d);
    let (form, parameters) = match d.regime() {
        Regime::Case11 => (
            "(w^{q/p} phi(z w^{-q/p}), xi w)",
            vec![
                "xi: unimodular".to_string(),
                if recenter {
                    "phi: disc automorphism".to_string()
                } else {
                    "phi: rotation t -> zeta t".to_string()
                },
            ],
        ),
        Regime::Case1m => (
            "(zeta z, h(w))",
            vec!["zeta: unimodular".to_string(), "h: automorphism of E_q with h(0) = 0".to_string()],
        ),
        Regime::Casen1 => (
            "(w^{q/p_j} g_j(z_1 w^{-q/p_1}, ..., z_n w^{-q/p_n}), xi w)",
            vec![
                "xi: unimodular".to_string(),
                if recenter {
                    "g: automorphism of E_p".to_string()
                } else {
                    "g: automorphism of E_p with g(0) = 0".to_string()
                },
            ],
        ),
        Regime::Casenm => (
            "(g(z), h(w))",
            vec![
                "g: automorphism of E_p with g(0) = 0".to_string(),
                "h: automorphism of E_q with h(0) = 0".to_string(),
            ],
        ),
    };
    Ok(AutFamily {
        regime: d.regime(),
        form: form.to_string(),
        parameters,
        recentering_allowed: recenter,
        z_permutations: perms(&d.p)?,
        w_permutations: perms(&d.q)?,
    })
}

/// A pseudo-random automorphism, deterministic in `seed`. The ball or
/// disc part is recentered whenever the family allows it.
pub fn aut_sample<T: Scalar>(d: &HartogsDomain, seed: u64, lambda: T) -> HartogsProperMap<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recenter = recentering_allowed(d);
    let form = match d.regime() {
        Regime::Case11 => {
            let phi = BallAut::sample(1, &mut rng, recenter, 0.7);
            let phi = if recenter { phi } else { rotation(random_unimodular(&mut rng)) };
            return case11_from_parts(d, &phi, random_unimodular(&mut rng), lambda)
                .expect("sampled disc automorphism fits the family");
        }
        Regime::Case1m => ProperForm::Case1m {
            zeta: random_unimodular(&mut rng),
            k: 1,
            h: EllipsoidProperMap::from_aut(EllipsoidAut::sample(d.q.clone(), lambda, &mut rng, false)),
        },
        Regime::Casen1 => ProperForm::Casen1 {
            xi: random_unimodular(&mut rng),
            r: 1,
            f: EllipsoidProperMap::from_aut(EllipsoidAut::sample(d.p.clone(), lambda, &mut rng, recenter)),
        },
        Regime::Casenm => ProperForm::Casenm {
            g: EllipsoidProperMap::from_aut(EllipsoidAut::sample(d.p.clone(), lambda, &mut rng, false)),
            h: EllipsoidProperMap::from_aut(EllipsoidAut::sample(d.q.clone(), lambda, &mut rng, false)),
        },
    };
    HartogsProperMap {
        src: d.clone(),
        dst: d.clone(),
        lambda,
        form,
    }
}

fn rotation<T: Scalar>(c: Complex<T>) -> BallAut<T> {
    BallAut {
        a: vec![czero()],
        q: CMatrix::from_rows(vec![vec![c]]).expect("1x1"),
    }
}

fn cpow<T: Scalar>(c: Complex<T>, n: Option<u64>) -> Complex<T> {
    n.map_or(cone(), |n| int_pow(c, n as i64))
}

fn normalized<T: Scalar>(c: Complex<T>) -> Complex<T> {
    c / c.norm()
}

/// `(w^N phi(z w^{-N}), xi w)` as a descriptor; a rotation `phi` gives
/// `(zeta z, xi w)` for any `q/p`.
pub fn case11_from_parts<T: Scalar>(
    d: &HartogsDomain,
    phi: &BallAut<T>,
    xi: Complex<T>,
    lambda: T,
) -> Result<HartogsProperMap<T>> {
    let form = if phi.fixes_origin() {
        ProperForm::Case11 {
            zeta: normalized(phi.q[(0, 0)]),
            xi: normalized(xi),
            k: 1,
            l: 1,
            b: 0,
            blaschke: None,
        }
    } else {
        let n = ext_ratio(d.q[0], d.p[0])
            .as_nat()
            .ok_or_else(|| Error::InvalidMap("phi(0) != 0 needs q/p natural".into()))?;
        let mut product = BlaschkeProduct::from_disc_aut(phi);
        product.unimodular = normalized(product.unimodular);
        ProperForm::Case11 {
            zeta: cone(),
            xi: normalized(xi),
            k: 0,
            l: 1,
            b: n as i64,
            blaschke: Some(BlaschkeFactor {
                p_prime: 1,
                q_prime: n,
                product,
            }),
        }
    };
    Ok(HartogsProperMap {
        src: d.clone(),
        dst: d.clone(),
        lambda,
        form,
    })
}

impl<T: Scalar> HartogsProperMap<T> {
    fn require_aut(&self) -> Result<()> {
        if self.in_aut_family() {
            Ok(())
        } else {
            Err(Error::InvalidMap("not an automorphism descriptor".into()))
        }
    }

    /// `(phi, xi)` of a one-dimensional automorphism.
    fn case11_parts(&self) -> Option<(BallAut<T>, Complex<T>)> {
        match &self.form {
            ProperForm::Case11 { zeta, xi, blaschke, .. } => match blaschke {
                None => Some((rotation(*zeta), *xi)),
                Some(bf) => {
                    let mut product = bf.product.clone();
                    product.unimodular = product.unimodular * *zeta;
                    Some((product.to_disc_aut()?, *xi))
                }
            },
            _ => None,
        }
    }

    fn with_form(&self, form: ProperForm<T>) -> Self {
        Self {
            src: self.src.clone(),
            dst: self.dst.clone(),
            lambda: self.lambda,
            form,
        }
    }

    /// `q` when it is natural (the twist exponent of the ball part).
    fn n1_twist(&self) -> Option<u64> {
        ext_ratio(self.src.q[0], one()).as_nat()
    }

    /// Builds the `n1` automorphism with the given ball part and `sigma`,
    /// fitting the tail constants from one pair `(x, F(x))`.
    fn fit_n1(
        &self,
        ball: BallAut<T>,
        sigma: Vec<usize>,
        xi: Complex<T>,
        x: &Point<T>,
        fx: &Point<T>,
    ) -> Result<Self> {
        let p = &self.src.p;
        let lambda = self.lambda;
        let slots = crate::ellipsoid::ball_slots(p);
        let w = x.w[0];
        let wq = match self.n1_twist() {
            Some(qn) => int_pow(w, -(qn as i64)),
            None => cone(),
        };
        let xb: Vec<_> = slots.iter().map(|&i| x.z[i] * wq).collect();
        let fac = ball.factor(&xb);
        let zetas = (0..p.len())
            .map(|j| {
                if p[j].is_one() {
                    cone()
                } else {
                    let s = sigma[j];
                    let e = T::one() / p[s].value(lambda);
                    normalized(fx.z[j] / (x.z[s] * crate::scalar::principal_pow(fac, e)))
                }
            })
            .collect();
        let g = EllipsoidAut::new(p.clone(), ball, zetas, sigma, lambda)?;
        Ok(self.with_form(ProperForm::Casen1 {
            xi: normalized(xi),
            r: 1,
            f: EllipsoidProperMap::from_aut(g),
        }))
    }

    /// Interior reference point with real `w` and vanishing ball part.
    fn n1_reference(&self, g: &EllipsoidAut<T>) -> Point<T> {
        let w0 = T::of(0.9);
        let u = g.reference_point();
        let q = self.src.q[0].value(self.lambda);
        let z = u
            .iter()
            .zip(self.src.p.iter())
            .map(|(ui, pi)| *ui * w0.powf(q / pi.value(self.lambda)))
            .collect();
        Point::new(z, vec![Complex::new(w0, T::zero())])
    }

    /// `self . inner` for two automorphisms of the same domain, refitted
    /// to the family parametrization.
    pub fn compose_aut(&self, inner: &HartogsProperMap<T>) -> Result<Self> {
        self.require_aut()?;
        inner.require_aut()?;
        if self.src != inner.src {
            return Err(Error::DimensionMismatch("automorphisms of different domains".into()));
        }
        match (&self.form, &inner.form) {
            (ProperForm::Case11 { .. }, ProperForm::Case11 { .. }) => {
                let (phi2, xi2) = self.case11_parts().ok_or(Error::NoProperMap)?;
                let (phi1, xi1) = inner.case11_parts().ok_or(Error::NoProperMap)?;
                let n = ext_ratio(self.src.q[0], self.src.p[0]).as_nat();
                let phi3 = phi2.conjugate_by_scalar(cpow(xi1, n)).compose(&phi1)?;
                case11_from_parts(&self.src, &phi3, xi2 * xi1, self.lambda)
            }
            (ProperForm::Case1m { zeta: z2, h: h2, .. }, ProperForm::Case1m { zeta: z1, h: h1, .. }) => {
                let h = compose_ellipsoid_auts(h2, h1)?;
                Ok(self.with_form(ProperForm::Case1m {
                    zeta: normalized(*z2 * *z1),
                    k: 1,
                    h,
                }))
            }
            (ProperForm::Casen1 { xi: xi2, f: f2, .. }, ProperForm::Casen1 { xi: xi1, f: f1, .. }) => {
                let g2 = f2.as_aut().ok_or(Error::NoProperMap)?;
                let g1 = f1.as_aut().ok_or(Error::NoProperMap)?;
                let ball = g2
                    .ball
                    .conjugate_by_scalar(cpow(*xi1, self.n1_twist()))
                    .compose(&g1.ball)?;
                let sigma = (0..g1.dim()).map(|j| g1.sigma[g2.sigma[j]]).collect();
                let x = self.n1_reference(&g1);
                let fx = self.apply(&inner.apply(&x)?)?;
                self.fit_n1(ball, sigma, *xi2 * *xi1, &x, &fx)
            }
            (ProperForm::Casenm { g: g2, h: h2 }, ProperForm::Casenm { g: g1, h: h1 }) => {
                Ok(self.with_form(ProperForm::Casenm {
                    g: compose_ellipsoid_auts(g2, g1)?,
                    h: compose_ellipsoid_auts(h2, h1)?,
                }))
            }
            _ => Err(Error::InvalidMap("automorphisms of different regimes".into())),
        }
    }

    pub fn invert_aut(&self) -> Result<Self> {
        self.require_aut()?;
        match &self.form {
            ProperForm::Case11 { .. } => {
                let (phi, xi) = self.case11_parts().ok_or(Error::NoProperMap)?;
                let n = ext_ratio(self.src.q[0], self.src.p[0]).as_nat();
                let inv = phi.inverse()?.conjugate_by_scalar(cpow(xi.conj(), n));
                case11_from_parts(&self.src, &inv, xi.conj(), self.lambda)
            }
            ProperForm::Case1m { zeta, h, .. } => Ok(self.with_form(ProperForm::Case1m {
                zeta: zeta.conj(),
                k: 1,
                h: invert_ellipsoid_aut(h)?,
            })),
            ProperForm::Casen1 { xi, f, .. } => {
                let g = f.as_aut().ok_or(Error::NoProperMap)?;
                let ball = g.ball.inverse()?.conjugate_by_scalar(cpow(xi.conj(), self.n1_twist()));
                let mut sigma = vec![0; g.dim()];
                for (j, &s) in g.sigma.iter().enumerate() {
                    sigma[s] = j;
                }
                let x = self.n1_reference(&g);
                let fx = self.apply(&x)?;
                self.fit_n1(ball, sigma, xi.conj(), &fx, &x)
            }
            ProperForm::Casenm { g, h } => Ok(self.with_form(ProperForm::Casenm {
                g: invert_ellipsoid_aut(g)?,
                h: invert_ellipsoid_aut(h)?,
            })),
        }
    }
}

fn compose_ellipsoid_auts<T: Scalar>(
    outer: &EllipsoidProperMap<T>,
    inner: &EllipsoidProperMap<T>,
) -> Result<EllipsoidProperMap<T>> {
    let a = outer.as_aut().ok_or(Error::NoProperMap)?;
    let b = inner.as_aut().ok_or(Error::NoProperMap)?;
    Ok(EllipsoidProperMap::from_aut(a.compose(&b)?))
}

fn invert_ellipsoid_aut<T: Scalar>(m: &EllipsoidProperMap<T>) -> Result<EllipsoidProperMap<T>> {
    Ok(EllipsoidProperMap::from_aut(m.as_aut().ok_or(Error::NoProperMap)?.inverse()?))
}
