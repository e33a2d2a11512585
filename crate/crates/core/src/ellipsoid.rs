//! Complex ellipsoids `E_p`, unit-ball automorphisms and the proper maps
//! `Psi_{p_sigma/(q r)} . phi . Psi_r . sigma` between ellipsoids.

use crate::error::{Error, Result};
use crate::exponents::{ext_ratio, is_nat, perm_matchings, Exponent, ExponentVec};
use crate::linalg::{inner, norm2, CMatrix};
use crate::scalar::{abs2, abs_pow, cis, int_pow, principal_pow, Scalar};
use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Default absolute tolerance on modulus sums.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Centers closer than this to the unit sphere are rejected.
pub const SPHERE_MARGIN: f64 = 1e-9;

pub(crate) fn czero<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub(crate) fn cone<T: Scalar>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

/// Residual threshold for the matrix identity at scalar precision.
pub(crate) fn identity_tol<T: Scalar>() -> T {
    T::of(1e-12).max(T::epsilon() * T::of(1e4))
}

pub(crate) fn unimodular_tol<T: Scalar>() -> T {
    T::of(1e-14).max(T::epsilon() * T::of(64.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EllipsoidVerdict {
    Interior,
    Boundary,
    Outside,
}

/// `E_p = { sum |z_j|^{2 p_j} < 1 }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EllipsoidDomain {
    pub p: ExponentVec,
}

impl EllipsoidDomain {
    pub fn new(p: ExponentVec) -> Self {
        Self { p }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// Indices with exponent exactly 1, in increasing order.
    pub fn ball_slots(&self) -> Vec<usize> {
        ball_slots(&self.p)
    }

    pub fn modulus_sum<T: Scalar>(&self, z: &[Complex<T>], lambda: T) -> T {
        modulus_sum(&self.p, z, lambda)
    }

    /// `ep_membership`: compares `sum |z_j|^{2p_j}` with 1 at `tol`.
    pub fn membership<T: Scalar>(&self, z: &[Complex<T>], tol: T, lambda: T) -> Result<EllipsoidVerdict> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, ellipsoid has {}",
                z.len(),
                self.dim()
            )));
        }
        let s = self.modulus_sum(z, lambda);
        Ok(if (s - T::one()).abs() <= tol {
            EllipsoidVerdict::Boundary
        } else if s < T::one() {
            EllipsoidVerdict::Interior
        } else {
            EllipsoidVerdict::Outside
        })
    }
}

/// `sum |z_j|^{2 p_j}`
pub fn modulus_sum<T: Scalar>(p: &ExponentVec, z: &[Complex<T>], lambda: T) -> T {
    p.iter()
        .zip(z)
        .fold(T::zero(), |acc, (e, zj)| acc + abs_pow(*zj, T::of(2.0) * e.value(lambda)))
}

pub fn ball_slots(p: &ExponentVec) -> Vec<usize> {
    p.iter()
        .enumerate()
        .filter(|(_, e)| e.is_one())
        .map(|(i, _)| i)
        .collect()
}

/// `ep_exists`: the first `sigma` (lexicographic) with `p_sigma / q` in `N^n`.
pub fn ep_exists(p: &ExponentVec, q: &ExponentVec) -> Result<Option<Vec<usize>>> {
    Ok(perm_matchings(p, q)?.first())
}

/// Unit-ball automorphism
/// `H(z) = sqrt(1 - |a|^2) / (1 - <z, a>) * Q (z - a)`
/// with `conj(Q) (I - conj(a) a^T) Q^T = I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BallAut<T: Scalar> {
    pub a: Vec<Complex<T>>,
    #[serde(rename = "Q")]
    pub q: CMatrix<T>,
}

impl<T: Scalar> BallAut<T> {
    pub fn identity(k: usize) -> Self {
        Self {
            a: vec![czero(); k],
            q: CMatrix::identity(k),
        }
    }

    /// `ball_aut(a)`: the automorphism sending `a` to 0 with
    /// `conj(Q) = (I - conj(a) a^T)^{-1/2}` (principal root). The perturbed
    /// identity has eigenvalue `1 - |a|^2` along `conj(a)` and 1 elsewhere,
    /// so the root is `I + (1/s - 1) a a^H / |a|^2` after conjugation.
    pub fn new(a: Vec<Complex<T>>) -> Result<Self> {
        Self::with_unitary(a, None)
    }

    /// As [`BallAut::new`], followed by the unitary `u`.
    pub fn with_unitary(a: Vec<Complex<T>>, u: Option<&CMatrix<T>>) -> Result<Self> {
        let k = a.len();
        let na2 = norm2(&a);
        let na = na2.sqrt();
        if na >= T::one() - T::of(SPHERE_MARGIN) {
            return Err(Error::CenterTooCloseToSphere(na.to_f64().unwrap_or(f64::NAN)));
        }
        let mut q = CMatrix::identity(k);
        if na2 > T::zero() {
            let s = (T::one() - na2).sqrt();
            let c = (T::one() / s - T::one()) / na2;
            for i in 0..k {
                for j in 0..k {
                    q[(i, j)] = q[(i, j)] + a[i] * a[j].conj() * c;
                }
            }
        }
        if let Some(u) = u {
            if u.dim() != k {
                return Err(Error::DimensionMismatch("unitary has wrong size".into()));
            }
            q = u.mul(&q);
        }
        Ok(Self { a, q })
    }

    /// Validates an explicit `(a, Q)` pair against the matrix identity.
    pub fn from_parts(a: Vec<Complex<T>>, q: CMatrix<T>) -> Result<Self> {
        if q.dim() != a.len() {
            return Err(Error::DimensionMismatch("Q and a sizes differ".into()));
        }
        if norm2(&a).sqrt() >= T::one() - T::of(SPHERE_MARGIN) {
            return Err(Error::CenterTooCloseToSphere(norm2(&a).sqrt().to_f64().unwrap_or(f64::NAN)));
        }
        let out = Self { a, q };
        let res = out.identity_residual();
        if !(res <= identity_tol::<T>()) {
            return Err(Error::InvalidMap(format!(
                "ball automorphism matrix identity residual {res}"
            )));
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn fixes_origin(&self) -> bool {
        self.a.iter().all(|x| *x == czero())
    }

    /// `sqrt(1 - |a|^2)`
    pub fn s(&self) -> T {
        (T::one() - norm2(&self.a)).sqrt()
    }

    /// `|| conj(Q) (I - conj(a) a^T) Q^T - I ||_F`
    pub fn identity_residual(&self) -> T {
        let k = self.dim();
        let mut m = CMatrix::identity(k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = m[(i, j)] - self.a[i].conj() * self.a[j];
            }
        }
        self.q
            .conj()
            .mul(&m)
            .mul(&self.q.transpose())
            .sub(&CMatrix::identity(k))
            .frobenius()
    }

    /// `sqrt(1 - |a|^2) / (1 - <z, a>)`, the scalar factor of `H`.
    pub fn factor(&self, z: &[Complex<T>]) -> Complex<T> {
        Complex::new(self.s(), T::zero()) / (cone::<T>() - inner(z, &self.a))
    }

    pub fn eval(&self, z: &[Complex<T>]) -> Vec<Complex<T>> {
        let f = self.factor(z);
        let diff: Vec<_> = z.iter().zip(&self.a).map(|(x, y)| *x - *y).collect();
        self.q.apply(&diff).into_iter().map(|v| v * f).collect()
    }

    /// `[[sQ, -sQa], [-a^H, 1]]`, acting on `(z, 1)`.
    pub fn projective(&self) -> CMatrix<T> {
        let k = self.dim();
        let s = Complex::new(self.s(), T::zero());
        let sq = self.q.scale(s);
        let sqa = sq.apply(&self.a);
        let mut m = CMatrix::zeros(k + 1);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = sq[(i, j)];
            }
            m[(i, k)] = -sqa[i];
            m[(k, i)] = -self.a[i].conj();
        }
        m[(k, k)] = cone();
        m
    }

    /// Reads `(a, Q)` back from a projective matrix.
    pub fn from_projective(m: &CMatrix<T>) -> Result<Self> {
        let k = m.dim() - 1;
        let lam = m[(k, k)];
        if lam.norm() <= T::epsilon() {
            return Err(Error::InvalidMap("degenerate projective matrix".into()));
        }
        let a: Vec<_> = (0..k).map(|i| -(m[(k, i)] / lam).conj()).collect();
        let na2 = norm2(&a);
        if na2.sqrt() >= T::one() - T::of(SPHERE_MARGIN) {
            return Err(Error::CenterTooCloseToSphere(na2.sqrt().to_f64().unwrap_or(f64::NAN)));
        }
        let scale = lam * (T::one() - na2).sqrt();
        let mut q = CMatrix::zeros(k);
        for i in 0..k {
            for j in 0..k {
                q[(i, j)] = m[(i, j)] / scale;
            }
        }
        Ok(Self { a, q })
    }

    /// `self . inner`
    pub fn compose(&self, inner: &BallAut<T>) -> Result<Self> {
        Self::from_projective(&self.projective().mul(&inner.projective()))
    }

    /// Uses `M^H J M = s^2 J`, `J = diag(I, -1)`.
    pub fn inverse(&self) -> Result<Self> {
        let k = self.dim();
        let mut m = self.projective().adjoint();
        for i in 0..=k {
            for j in 0..=k {
                let sign = (i == k) != (j == k);
                if sign {
                    m[(i, j)] = -m[(i, j)];
                }
            }
        }
        Self::from_projective(&m)
    }

    /// `v -> c H(v / c)` for unimodular `c`: center `c a`, same `Q`.
    pub fn conjugate_by_scalar(&self, c: Complex<T>) -> Self {
        Self {
            a: self.a.iter().map(|x| *x * c).collect(),
            q: self.q.clone(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(k: usize, rng: &mut R, recenter: bool, radius: f64) -> Self {
        let a = if recenter && k > 0 {
            let dir: Vec<Complex<T>> = (0..k).map(|_| random_complex(rng)).collect();
            let n = norm2(&dir).sqrt();
            let rho = T::of(radius * rng.gen::<f64>().powf(1.0 / (2.0 * k as f64)));
            dir.into_iter().map(|x| x * (rho / n)).collect()
        } else {
            vec![czero(); k]
        };
        let u = random_unitary(k, rng);
        Self::with_unitary(a, Some(&u)).expect("sampled center inside the ball")
    }
}

pub(crate) fn random_complex<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    Complex::new(T::of(rng.gen_range(-1.0..1.0)), T::of(rng.gen_range(-1.0..1.0)))
}

pub(crate) fn random_unimodular<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    cis(T::of(rng.gen_range(0.0..std::f64::consts::TAU)))
}

pub(crate) fn random_unitary<T: Scalar, R: Rng + ?Sized>(k: usize, rng: &mut R) -> CMatrix<T> {
    loop {
        let mut m = CMatrix::zeros(k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = random_complex(rng);
            }
        }
        if let Some(u) = m.orthonormalized() {
            return u;
        }
    }
}

/// Automorphism of `E_p`: a ball automorphism `H` on the exponent-1 slots
/// and `zeta_j z_{sigma(j)} (sqrt(1-|a|^2)/(1 - <z', a>))^{1/p_{sigma(j)}}`
/// on the others.
///
/// `zetas` and `sigma` are indexed by original coordinates; on the
/// exponent-1 slots they are fixed to 1 and the identity. `a` and `Q` act
/// on the exponent-1 slots in increasing index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct EllipsoidAut<T: Scalar> {
    pub p: ExponentVec,
    #[serde(flatten)]
    pub ball: BallAut<T>,
    pub zetas: Vec<Complex<T>>,
    pub sigma: Vec<usize>,
    pub lambda: T,
}

impl<T: Scalar> EllipsoidAut<T> {
    /// `ep_aut`, validating every constraint on the parameters.
    pub fn new(
        p: ExponentVec,
        ball: BallAut<T>,
        zetas: Vec<Complex<T>>,
        sigma: Vec<usize>,
        lambda: T,
    ) -> Result<Self> {
        let out = Self {
            p,
            ball,
            zetas,
            sigma,
            lambda,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn identity(p: ExponentVec, lambda: T) -> Self {
        let n = p.len();
        let k = ball_slots(&p).len();
        Self {
            p,
            ball: BallAut::identity(k),
            zetas: vec![cone(); n],
            sigma: (0..n).collect(),
            lambda,
        }
    }

    /// The coordinate permutation `z -> z_sigma` for `sigma` in `Sigma_n(p)`;
    /// on the exponent-1 slots it becomes a permutation matrix.
    pub fn from_permutation(p: ExponentVec, sigma: &[usize], lambda: T) -> Result<Self> {
        let n = p.len();
        let slots = ball_slots(&p);
        let mut q = CMatrix::zeros(slots.len());
        for (row, &s) in slots.iter().enumerate() {
            let col = slots
                .iter()
                .position(|&t| t == sigma[s])
                .ok_or_else(|| Error::InvalidMap("sigma does not fix the exponent vector".into()))?;
            q[(row, col)] = cone();
        }
        let tail_sigma = (0..n).map(|j| if p[j].is_one() { j } else { sigma[j] }).collect();
        let ball = BallAut::from_parts(vec![czero(); slots.len()], q)?;
        Self::new(p, ball, vec![cone(); n], tail_sigma, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p.len();
        let slots = ball_slots(&self.p);
        if self.ball.dim() != slots.len() {
            return Err(Error::InvalidMap(format!(
                "ball part has dimension {}, ellipsoid has {} exponent-1 slots",
                self.ball.dim(),
                slots.len()
            )));
        }
        let res = self.ball.identity_residual();
        if !(res <= identity_tol::<T>()) {
            return Err(Error::InvalidMap(format!("ball matrix identity residual {res}")));
        }
        if self.zetas.len() != n || self.sigma.len() != n {
            return Err(Error::DimensionMismatch("zetas/sigma length".into()));
        }
        let mut seen = vec![false; n];
        for (j, &s) in self.sigma.iter().enumerate() {
            if s >= n || seen[s] {
                return Err(Error::InvalidMap("sigma is not a permutation".into()));
            }
            seen[s] = true;
            if self.p[s] != self.p[j] {
                return Err(Error::InvalidMap("sigma does not fix the exponent vector".into()));
            }
            if self.p[j].is_one() {
                if s != j {
                    return Err(Error::InvalidMap("sigma must fix exponent-1 slots".into()));
                }
                if self.zetas[j] != cone() {
                    return Err(Error::InvalidMap("zeta on an exponent-1 slot must be 1".into()));
                }
            } else if (self.zetas[j].norm() - T::one()).abs() > unimodular_tol::<T>() {
                return Err(Error::InvalidMap(format!("zeta_{j} is not unimodular")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn fixes_origin(&self) -> bool {
        self.ball.fixes_origin()
    }

    fn ball_part(&self, z: &[Complex<T>]) -> Vec<Complex<T>> {
        ball_slots(&self.p).iter().map(|&i| z[i]).collect()
    }

    /// Evaluation without a domain check.
    pub fn apply(&self, z: &[Complex<T>]) -> Vec<Complex<T>> {
        let slots = ball_slots(&self.p);
        let zb: Vec<_> = slots.iter().map(|&i| z[i]).collect();
        let hb = self.ball.eval(&zb);
        let f = self.ball.factor(&zb);
        let mut out = vec![czero(); z.len()];
        for (&i, v) in slots.iter().zip(hb) {
            out[i] = v;
        }
        for j in 0..z.len() {
            if self.p[j].is_one() {
                continue;
            }
            let s = self.sigma[j];
            let e = T::one() / self.p[s].value(self.lambda);
            out[j] = self.zetas[j] * z[s] * principal_pow(f, e);
        }
        out
    }

    /// `ep_aut_eval`
    pub fn eval(&self, z: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let d = EllipsoidDomain::new(self.p.clone());
        if d.membership(z, T::of(DEFAULT_TOL), self.lambda)? == EllipsoidVerdict::Outside {
            return Err(Error::NotInDomain);
        }
        Ok(self.apply(z))
    }

    /// An interior point with vanishing ball part and nonzero tail.
    pub fn reference_point(&self) -> Vec<Complex<T>> {
        let n = self.dim();
        let tail = n - ball_slots(&self.p).len();
        (0..n)
            .map(|j| {
                if self.p[j].is_one() {
                    czero()
                } else {
                    let t = T::one() / T::of(2.0 * tail as f64);
                    Complex::new(t.powf(T::one() / (T::of(2.0) * self.p[j].value(self.lambda))), T::zero())
                }
            })
            .collect()
    }

    /// Recovers the tail constants from one pair `(x, g(x))`. Along a
    /// connected domain the ratio of two continuous branches of the same
    /// power is constant, so one point fixes them.
    fn fit_zetas(&self, ball: &BallAut<T>, sigma: &[usize], x: &[Complex<T>], gx: &[Complex<T>]) -> Vec<Complex<T>> {
        let xb = self.ball_part(x);
        let f = ball.factor(&xb);
        (0..self.dim())
            .map(|j| {
                if self.p[j].is_one() {
                    cone()
                } else {
                    let s = sigma[j];
                    let e = T::one() / self.p[s].value(self.lambda);
                    let z = gx[j] / (x[s] * principal_pow(f, e));
                    z / z.norm()
                }
            })
            .collect()
    }

    /// `self . inner`, re-fitted to the automorphism parametrization.
    pub fn compose(&self, inner: &EllipsoidAut<T>) -> Result<Self> {
        if self.p != inner.p {
            return Err(Error::DimensionMismatch("automorphisms of different ellipsoids".into()));
        }
        let ball = self.ball.compose(&inner.ball)?;
        let sigma: Vec<usize> = (0..self.dim()).map(|j| inner.sigma[self.sigma[j]]).collect();
        let e = self.reference_point();
        let ge = self.apply(&inner.apply(&e));
        let zetas = self.fit_zetas(&ball, &sigma, &e, &ge);
        Self::new(self.p.clone(), ball, zetas, sigma, self.lambda)
    }

    pub fn inverse(&self) -> Result<Self> {
        let ball = self.ball.inverse()?;
        let n = self.dim();
        let mut sigma = vec![0; n];
        for (j, &s) in self.sigma.iter().enumerate() {
            sigma[s] = j;
        }
        let e = self.reference_point();
        let y = self.apply(&e);
        let zetas = self.fit_zetas(&ball, &sigma, &y, &e);
        Self::new(self.p.clone(), ball, zetas, sigma, self.lambda)
    }

    /// Same automorphism with the ball part conjugated by the scalar `c`.
    pub fn conjugate_ball_by_scalar(&self, c: Complex<T>) -> Self {
        Self {
            ball: self.ball.conjugate_by_scalar(c),
            ..self.clone()
        }
    }

    /// A random member: unitary or recentered ball part, unimodular tail
    /// constants and a random `sigma` in `Sigma_n(p)`.
    pub fn sample<R: Rng + ?Sized>(p: ExponentVec, lambda: T, rng: &mut R, recenter: bool) -> Self {
        let n = p.len();
        let slots = ball_slots(&p);
        let ball = BallAut::sample(slots.len(), rng, recenter, 0.7);
        let zetas = (0..n)
            .map(|j| if p[j].is_one() { cone() } else { random_unimodular(rng) })
            .collect();
        let mut sigma: Vec<usize> = (0..n).collect();
        // shuffle within groups of equal non-unit exponents
        for j in 0..n {
            if p[j].is_one() {
                continue;
            }
            let group: Vec<usize> = (j..n).filter(|&i| p[i] == p[j]).collect();
            let pick = group[rng.gen_range(0..group.len())];
            sigma.swap(j, pick);
        }
        Self::new(p, ball, zetas, sigma, lambda).expect("sampled automorphism is valid")
    }
}

/// Proper map `Psi_{p_sigma/(q r)} . phi . Psi_r . sigma : E_p -> E_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct EllipsoidProperMap<T: Scalar> {
    pub p: ExponentVec,
    pub q: ExponentVec,
    pub sigma: Vec<usize>,
    pub r: Vec<u64>,
    /// Automorphism of the intermediate ellipsoid `E_{p_sigma / r}`.
    pub phi: EllipsoidAut<T>,
}

impl<T: Scalar> EllipsoidProperMap<T> {
    pub fn new(p: ExponentVec, q: ExponentVec, sigma: Vec<usize>, r: Vec<u64>, phi: EllipsoidAut<T>) -> Result<Self> {
        let out = Self { p, q, sigma, r, phi };
        out.validate()?;
        Ok(out)
    }

    /// Canonical representative: first matching `sigma`, `phi = id` and
    /// `r = p_sigma / q`, so the map is `Psi_{p_sigma/q} . sigma`.
    pub fn canonical(p: &ExponentVec, q: &ExponentVec, lambda: T) -> Result<Self> {
        let sigma = ep_exists(p, q)?.ok_or(Error::NoProperMap)?;
        let ps = p.permuted(&sigma);
        let r: Vec<u64> = (0..p.len())
            .map(|j| ext_ratio(ps[j], q[j]).as_nat().expect("matching ratio is natural"))
            .collect();
        let mid = intermediate(&ps, &r);
        Self::new(p.clone(), q.clone(), sigma, r, EllipsoidAut::identity(mid, lambda))
    }

    /// An automorphism viewed as a proper self-map.
    pub fn from_aut(phi: EllipsoidAut<T>) -> Self {
        let n = phi.dim();
        Self {
            p: phi.p.clone(),
            q: phi.p.clone(),
            sigma: (0..n).collect(),
            r: vec![1; n],
            phi,
        }
    }

    pub fn identity(p: ExponentVec, lambda: T) -> Self {
        Self::from_aut(EllipsoidAut::identity(p, lambda))
    }

    pub fn lambda(&self) -> T {
        self.phi.lambda
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// `p_sigma / (q r)`, the outer power vector.
    pub fn outer_powers(&self) -> Vec<u64> {
        let ps = self.p.permuted(&self.sigma);
        (0..self.dim())
            .map(|j| {
                ext_ratio(ps[j].div_nat(self.r[j]), self.q[j])
                    .as_nat()
                    .unwrap_or(0)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p.len();
        if self.q.len() != n || self.sigma.len() != n || self.r.len() != n || self.phi.dim() != n {
            return Err(Error::DimensionMismatch("ellipsoid map component lengths differ".into()));
        }
        let mut seen = vec![false; n];
        for &s in &self.sigma {
            if s >= n || seen[s] {
                return Err(Error::InvalidMap("sigma is not a permutation".into()));
            }
            seen[s] = true;
        }
        if self.r.contains(&0) {
            return Err(Error::InvalidMap("r must be a natural vector".into()));
        }
        let ps = self.p.permuted(&self.sigma);
        for j in 0..n {
            if !is_nat(ext_ratio(ps[j], self.q[j])) {
                return Err(Error::InvalidMap(format!("p_sigma/q not natural at {j}")));
            }
            if !is_nat(ext_ratio(ps[j].div_nat(self.r[j]), self.q[j])) {
                return Err(Error::InvalidMap(format!("p_sigma/(q r) not natural at {j}")));
            }
        }
        if self.phi.p != intermediate(&ps, &self.r) {
            return Err(Error::InvalidMap("phi is not an automorphism of E_{p_sigma/r}".into()));
        }
        self.phi.validate()
    }

    pub fn fixes_origin(&self) -> bool {
        self.phi.fixes_origin()
    }

    /// The map as an automorphism `phi . sigma`, when it has degree 1.
    pub fn as_aut(&self) -> Option<EllipsoidAut<T>> {
        if self.p != self.q || self.r.iter().any(|&r| r != 1) {
            return None;
        }
        let perm = EllipsoidAut::from_permutation(self.p.clone(), &self.sigma, self.lambda()).ok()?;
        self.phi.compose(&perm).ok()
    }

    /// Whether output coordinate `j` is a monomial `c z_i^e`.
    pub fn is_monomial_component(&self, j: usize) -> bool {
        if !self.phi.fixes_origin() {
            return false;
        }
        if !self.phi.p[j].is_one() {
            return true;
        }
        let slots = ball_slots(&self.phi.p);
        let row = slots.iter().position(|&s| s == j).expect("ball slot");
        (0..slots.len())
            .filter(|&c| self.phi.ball.q[(row, c)] != czero())
            .count()
            <= 1
    }

    /// Evaluation without a domain check.
    pub fn apply(&self, z: &[Complex<T>]) -> Vec<Complex<T>> {
        let u: Vec<_> = (0..self.dim())
            .map(|j| int_pow(z[self.sigma[j]], self.r[j] as i64))
            .collect();
        let v = self.phi.apply(&u);
        v.into_iter()
            .zip(self.outer_powers())
            .map(|(x, e)| int_pow(x, e as i64))
            .collect()
    }

    /// `ep_proper_eval`
    pub fn eval(&self, z: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let d = EllipsoidDomain::new(self.p.clone());
        if d.membership(z, T::of(DEFAULT_TOL), self.lambda())? == EllipsoidVerdict::Outside {
            return Err(Error::NotInDomain);
        }
        Ok(self.apply(z))
    }

    /// All points of `E_p` mapped to `y`, found by inverting each layer
    /// (every branch of each root, then `phi^{-1}`).
    pub fn preimages(&self, y: &[Complex<T>], tol: T) -> Result<Vec<Vec<Complex<T>>>> {
        let n = self.dim();
        let outer = self.outer_powers();
        let phi_inv = self.phi.inverse()?;
        let mut out: Vec<Vec<Complex<T>>> = Vec::new();
        for v in root_products(y, &outer) {
            let u = phi_inv.apply(&v);
            for zs in root_products(&u, &self.r) {
                let mut z = vec![czero(); n];
                for j in 0..n {
                    z[self.sigma[j]] = zs[j];
                }
                if modulus_sum(&self.p, &z, self.lambda()) >= T::one() {
                    continue;
                }
                let fz = self.apply(&z);
                let err = fz.iter().zip(y).fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()));
                if err > tol {
                    continue;
                }
                if !out.iter().any(|o| o.iter().zip(&z).all(|(a, b)| (*a - *b).norm() <= tol)) {
                    out.push(z);
                }
            }
        }
        Ok(out)
    }
}

/// `E_{p_sigma / r}` exponents.
pub fn intermediate(ps: &ExponentVec, r: &[u64]) -> ExponentVec {
    ExponentVec::new(ps.iter().zip(r).map(|(e, &ri)| e.div_nat(ri)).collect::<Vec<Exponent>>())
        .expect("nonempty")
}

/// All `e_j`-th roots of every coordinate, combined.
pub(crate) fn root_products<T: Scalar>(y: &[Complex<T>], e: &[u64]) -> Vec<Vec<Complex<T>>> {
    let mut acc: Vec<Vec<Complex<T>>> = vec![Vec::new()];
    for (yj, &ej) in y.iter().zip(e) {
        let roots = nth_roots(*yj, ej);
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                roots.iter().map(move |r| {
                    let mut v = prefix.clone();
                    v.push(*r);
                    v
                })
            })
            .collect();
    }
    acc
}

pub(crate) fn nth_roots<T: Scalar>(y: Complex<T>, e: u64) -> Vec<Complex<T>> {
    if abs2(y) == T::zero() {
        return vec![czero()];
    }
    let base = principal_pow(y, T::one() / T::of(e as f64));
    (0..e)
        .map(|k| base * cis(T::of(std::f64::consts::TAU * k as f64 / e as f64)))
        .collect()
}
