//! Numerical checks of the closed forms: samplers, the Levi form of `K`,
//! finite-difference holomorphy, boundary invariance and a ray-based
//! properness proxy.

use crate::ellipsoid::{czero, EllipsoidAut, EllipsoidDomain, EllipsoidProperMap};
use crate::error::{Error, Result};
use crate::exponents::{Exponent, ExponentVec};
use crate::hartogs::{HartogsDomain, HartogsProperMap, MembershipVerdict, Point};
use crate::scalar::{abs2, abs_pow, Scalar};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Interior,
    OnK,
    OnL,
    /// Boundary of an ellipsoid.
    Boundary,
}

/// Stream-separated generator: sample `i` of `seed` never depends on how
/// many samples were drawn before it.
pub fn sample_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Nonnegative weights summing to 1 (uniform on the simplex).
pub fn simplex_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// A point with `sum |z_j|^{2 p_j} = level`, random phases.
pub fn sample_level<T: Scalar, R: Rng + ?Sized>(p: &ExponentVec, lambda: T, level: f64, rng: &mut R) -> Vec<Complex<T>> {
    let w = simplex_weights(p.len(), rng);
    level_point(p, lambda, level, &w, &random_phases(p.len(), rng))
}

fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}

fn level_point<T: Scalar>(p: &ExponentVec, lambda: T, level: f64, weights: &[f64], phases: &[f64]) -> Vec<Complex<T>> {
    p.iter()
        .zip(weights)
        .zip(phases)
        .map(|((e, wj), th)| {
            let pe = e.value(lambda).to_f64().expect("finite exponent");
            let r = (wj * level).powf(1.0 / (2.0 * pe));
            Complex::from_polar(T::of(r), T::of(*th))
        })
        .collect()
}

pub fn sample_ellipsoid_interior<T: Scalar, R: Rng + ?Sized>(p: &ExponentVec, lambda: T, rng: &mut R) -> Vec<Complex<T>> {
    let level = rng.gen_range(0.05..0.95);
    sample_level(p, lambda, level, rng)
}

pub fn sample_ellipsoid<T: Scalar>(
    e: &EllipsoidDomain,
    region: Region,
    count: usize,
    seed: u64,
    lambda: T,
) -> Result<Vec<Vec<Complex<T>>>> {
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    (0..count as u64)
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            match region {
                Region::Interior => Ok(sample_ellipsoid_interior(&e.p, lambda, &mut rng)),
                Region::Boundary => Ok(sample_level(&e.p, lambda, 1.0, &mut rng)),
                Region::OnK | Region::OnL => Err(Error::EmptyRegion),
            }
        })
        .collect()
}

/// `(s_w, s_z / s_w)` for one sample of a region.
fn region_levels<R: Rng + ?Sized>(region: Region, rng: &mut R) -> Result<(f64, f64)> {
    Ok(match region {
        Region::Interior => (rng.gen_range(0.2..0.95), rng.gen_range(0.05..0.95)),
        Region::OnK => (rng.gen_range(0.2..0.95), 1.0),
        Region::OnL => (1.0, rng.gen_range(0.05..0.95)),
        Region::Boundary => return Err(Error::EmptyRegion),
    })
}

/// Points of `F_{p,q}` with prescribed modulus sums, so boundary samples
/// sit on `K` or `L` up to rounding.
pub fn sample_points<T: Scalar>(
    d: &HartogsDomain,
    region: Region,
    count: usize,
    seed: u64,
    lambda: T,
) -> Result<Vec<Point<T>>> {
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    (0..count as u64)
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let (sw, t) = region_levels(region, &mut rng)?;
            let w = sample_level(&d.q, lambda, sw, &mut rng);
            let z = sample_level(&d.p, lambda, t * sw, &mut rng);
            Ok(Point::new(z, w))
        })
        .collect()
}

/// `sum |z_j|^{2(p_j - 1)} ...` weight with `0^0 = 1`.
fn weight<T: Scalar>(z: Complex<T>, p: T) -> T {
    abs_pow(z, T::of(2.0) * (p - T::one()))
}

fn on_k<T: Scalar>(p: &ExponentVec, q: Exponent, pt: &Point<T>, lambda: T) -> Result<()> {
    if pt.w.len() != 1 || pt.z.len() != p.len() {
        return Err(Error::DimensionMismatch("Levi form needs m = 1 and len(z) = n".into()));
    }
    let d = HartogsDomain::new(p.clone(), ExponentVec::single(q));
    if pt.w[0] == czero() || d.membership(pt, T::of(1e-9), lambda)? != MembershipVerdict::OnK {
        return Err(Error::NotOnK);
    }
    Ok(())
}

/// The `Y` making `(X, Y)` complex tangent to `K` at `pt`.
pub fn tangent_y<T: Scalar>(p: &ExponentVec, q: Exponent, pt: &Point<T>, x: &[Complex<T>], lambda: T) -> Complex<T> {
    let qv = q.value(lambda);
    let w = pt.w[0];
    let s = p.iter().zip(&pt.z).zip(x).fold(czero::<T>(), |acc, ((pj, zj), xj)| {
        if *zj == czero() {
            return acc;
        }
        let pv = pj.value(lambda);
        acc + zj.conj() * *xj * (pv * weight(*zj, pv))
    });
    s / (w.conj() * (qv * weight(w, qv)))
}

/// `dr (X, Y)` for `r = sum |z_j|^{2p_j} - |w|^{2q}` (up to the factor 2).
pub fn tangency_residual<T: Scalar>(
    p: &ExponentVec,
    q: Exponent,
    pt: &Point<T>,
    x: &[Complex<T>],
    y: Complex<T>,
    lambda: T,
) -> T {
    let qv = q.value(lambda);
    let w = pt.w[0];
    let s = p.iter().zip(&pt.z).zip(x).fold(czero::<T>(), |acc, ((pj, zj), xj)| {
        if *zj == czero() {
            return acc;
        }
        let pv = pj.value(lambda);
        acc + zj.conj() * *xj * (pv * weight(*zj, pv))
    });
    (s - w.conj() * y * (qv * weight(w, qv))).norm()
}

/// `sum p_j^2 |z_j|^{2(p_j-1)} |X_j|^2 - q^2 |w|^{2(q-1)} |Y|^2` at a point of `K`.
pub fn levi_form<T: Scalar>(
    p: &ExponentVec,
    q: Exponent,
    pt: &Point<T>,
    x: &[Complex<T>],
    y: Complex<T>,
    lambda: T,
) -> Result<T> {
    on_k(p, q, pt, lambda)?;
    let qv = q.value(lambda);
    let zs = p.iter().zip(&pt.z).zip(x).fold(T::zero(), |acc, ((pj, zj), xj)| {
        if abs2(*xj) == T::zero() {
            return acc;
        }
        let pv = pj.value(lambda);
        acc + pv * pv * weight(*zj, pv) * abs2(*xj)
    });
    Ok(zs - qv * qv * weight(pt.w[0], qv) * abs2(y))
}

/// Both sides of the identity expressing the Levi form on complex tangent
/// vectors as a sum of squares over pairs `j < k`.
pub fn levi_restricted_identity<T: Scalar>(
    p: &ExponentVec,
    q: Exponent,
    pt: &Point<T>,
    x: &[Complex<T>],
    lambda: T,
) -> Result<(T, T)> {
    on_k(p, q, pt, lambda)?;
    let y = tangent_y(p, q, pt, x, lambda);
    let lhs = levi_form(p, q, pt, x, y, lambda)?;
    let n = p.len();
    let pv: Vec<T> = p.values(lambda);
    let mut sum = T::zero();
    for j in 0..n {
        for k in j + 1..n {
            let d = pt.z[k] * x[j] * pv[j] - pt.z[j] * x[k] * pv[k];
            if abs2(d) == T::zero() {
                continue;
            }
            sum = sum + weight(pt.z[j], pv[j]) * weight(pt.z[k], pv[k]) * abs2(d);
        }
    }
    let rhs = sum / abs_pow(pt.w[0], T::of(2.0) * q.value(lambda));
    Ok((lhs, rhs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct LeviData<T: Scalar> {
    pub point: Point<T>,
    pub tangent: (Vec<Complex<T>>, Complex<T>),
    pub levi_value: T,
    pub restricted_identity_value: T,
}

pub fn levi_data<T: Scalar>(p: &ExponentVec, q: Exponent, pt: &Point<T>, x: &[Complex<T>], lambda: T) -> Result<LeviData<T>> {
    let y = tangent_y(p, q, pt, x, lambda);
    let (lhs, rhs) = levi_restricted_identity(p, q, pt, x, lambda)?;
    Ok(LeviData {
        point: pt.clone(),
        tangent: (x.to_vec(), y),
        levi_value: lhs,
        restricted_identity_value: rhs,
    })
}

/// Outcome of one property sweep; `pass` iff `worst_residual <= tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub property: String,
    pub samples: usize,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fitted: Vec<f64>,
}

impl VerificationReport {
    pub fn new(property: &str, samples: usize, worst_residual: f64, tolerance: f64, seed: u64) -> Self {
        Self {
            property: property.to_string(),
            samples,
            worst_residual,
            tolerance,
            // NaN residuals fail
            pass: worst_residual <= tolerance,
            seed,
            note: None,
            fitted: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// One JSON object per line; non-finite numbers become `null`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// A map on flat coordinate vectors, for the finite-difference check.
pub trait HolomorphicMap<T: Scalar> {
    fn eval_flat(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>>;
}

impl<T: Scalar> HolomorphicMap<T> for HartogsProperMap<T> {
    fn eval_flat(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        Ok(self.apply(&Point::from_flat(x.to_vec(), self.src.n())?)?.to_flat())
    }
}

impl<T: Scalar> HolomorphicMap<T> for EllipsoidProperMap<T> {
    fn eval_flat(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        Ok(self.apply(x))
    }
}

impl<T: Scalar> HolomorphicMap<T> for EllipsoidAut<T> {
    fn eval_flat(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        Ok(self.apply(x))
    }
}

/// Any closure on flat coordinates.
pub struct FnMap<F>(pub F);

impl<T: Scalar, F: Fn(&[Complex<T>]) -> Vec<Complex<T>>> HolomorphicMap<T> for FnMap<F> {
    fn eval_flat(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        Ok((self.0)(x))
    }
}

/// Largest central-difference `|dF_o/d conj(z_i)| / max(1, |dF_o/dz_i|)`
/// over output coordinates `o`, so maps with large derivatives are judged
/// on the same scale as the identity.
pub fn wirtinger_residual<T: Scalar, M: HolomorphicMap<T> + ?Sized>(map: &M, x: &[Complex<T>], h: T) -> Result<T> {
    let two = T::of(2.0);
    let mut worst = T::zero();
    for i in 0..x.len() {
        let shifted = |d: Complex<T>| -> Result<Vec<Complex<T>>> {
            let mut y = x.to_vec();
            y[i] = y[i] + d;
            map.eval_flat(&y)
        };
        let (xp, xm) = (shifted(Complex::new(h, T::zero()))?, shifted(Complex::new(-h, T::zero()))?);
        let (yp, ym) = (shifted(Complex::new(T::zero(), h))?, shifted(Complex::new(T::zero(), -h))?);
        for o in 0..xp.len() {
            let dx = (xp[o] - xm[o]) / (two * h);
            let dy = (yp[o] - ym[o]) / (two * h);
            let iy = Complex::new(T::zero(), T::one()) * dy;
            let dbar = (dx + iy) / two;
            let d = (dx - iy) / two;
            worst = worst.max(dbar.norm() / d.norm().max(T::one()));
        }
    }
    Ok(worst)
}

pub fn check_holomorphy_fd<T: Scalar, M: HolomorphicMap<T> + ?Sized>(
    map: &M,
    samples: &[Vec<Complex<T>>],
    h: f64,
    tol: f64,
    seed: u64,
) -> VerificationReport {
    let mut worst = 0.0f64;
    for x in samples {
        let r = match wirtinger_residual(map, x, T::of(h)) {
            Ok(r) => r.to_f64().unwrap_or(f64::NAN),
            Err(_) => f64::INFINITY,
        };
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    VerificationReport::new("holomorphy_fd", samples.len(), worst, tol, seed)
}

/// Relative `K` defect and `L` defect of an image point.
fn image_defects<T: Scalar>(dst: &HartogsDomain, y: &Point<T>, lambda: T) -> (f64, f64, f64, f64) {
    let (sz, sw) = dst.sums(y, lambda);
    let (sz, sw) = (sz.to_f64().unwrap_or(f64::NAN), sw.to_f64().unwrap_or(f64::NAN));
    ((sz - sw).abs() / sw, (sw - 1.0).abs(), sz, sw)
}

/// Samples on `K` (resp. `L`) of `src` must land on `K` (resp. `L`) of `dst`.
pub fn check_boundary_invariance<T: Scalar, F>(
    src: &HartogsDomain,
    dst: &HartogsDomain,
    f: F,
    region: Region,
    count: usize,
    seed: u64,
    tol: f64,
    lambda: T,
) -> Result<VerificationReport>
where
    F: Fn(&Point<T>) -> Result<Point<T>>,
{
    let pts = sample_points(src, region, count, seed, lambda)?;
    let mut worst = 0.0f64;
    for x in &pts {
        let r = match f(x) {
            Ok(y) => {
                let (k_def, l_def, sz, sw) = image_defects(dst, &y, lambda);
                match region {
                    Region::OnK => k_def.max(if sw >= 1.0 { 1.0 } else { 0.0 }),
                    // L images must also stay inside the cone
                    _ => l_def.max(((sz - sw) / sw).max(0.0)),
                }
            }
            Err(_) => f64::INFINITY,
        };
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    let name = match region {
        Region::OnK => "boundary_invariance_k",
        _ => "boundary_invariance_l",
    };
    let rep = VerificationReport::new(name, pts.len(), worst, tol, seed);
    Ok(if src.n() == 1 && src.m() == 1 {
        rep.with_note("extrapolated: n = m = 1")
    } else {
        rep
    })
}

/// Interior samples must land strictly inside, with relative margin
/// `min((s_w - s_z)/s_w, 1 - s_w) > margin`. The residual is minus the
/// smallest margin, so `pass` means every margin exceeds `margin`.
pub fn check_interior_soundness<T: Scalar, F>(
    src: &HartogsDomain,
    dst: &HartogsDomain,
    f: F,
    count: usize,
    seed: u64,
    margin: f64,
    lambda: T,
) -> Result<VerificationReport>
where
    F: Fn(&Point<T>) -> Result<Point<T>>,
{
    let pts = sample_points(src, Region::Interior, count, seed, lambda)?;
    let mut worst = f64::NEG_INFINITY;
    for x in &pts {
        let r = match f(x) {
            Ok(y) => {
                let (_, _, sz, sw) = image_defects(dst, &y, lambda);
                -((sw - sz) / sw).min(1.0 - sw)
            }
            Err(_) => f64::INFINITY,
        };
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    Ok(VerificationReport::new("interior_soundness", pts.len(), worst, -margin, seed))
}

/// `min(s_w - s_z, 1 - s_w)` for `F_{p,q}`.
pub fn boundary_gap<T: Scalar>(d: &HartogsDomain, pt: &Point<T>, lambda: T) -> f64 {
    let (sz, sw) = d.sums(pt, lambda);
    let (sz, sw) = (sz.to_f64().unwrap_or(f64::NAN), sw.to_f64().unwrap_or(f64::NAN));
    (sw - sz).min(1.0 - sw)
}

/// Along rays with source gap `~ 2^-i`, fits `log gap~ = log C + gamma log gap`.
/// The residual of a ray is `1/gamma` (infinite when the image gap does not
/// shrink); the sweep passes when every `gamma >= 1/max_inv_gamma`.
pub fn check_properness_ray<T: Scalar, F>(
    src: &HartogsDomain,
    dst: &HartogsDomain,
    f: F,
    ray_count: usize,
    steps: usize,
    seed: u64,
    lambda: T,
) -> Result<VerificationReport>
where
    F: Fn(&Point<T>) -> Result<Point<T>>,
{
    const MAX_INV_GAMMA: f64 = 10.0;
    if steps < 8 {
        return Err(Error::Unsupported("properness rays need at least 8 steps".into()));
    }
    let mut worst = 0.0f64;
    let mut fitted = Vec::with_capacity(ray_count);
    for ray in 0..ray_count as u64 {
        let mut rng = sample_rng(seed, ray);
        let toward_k = ray % 2 == 0;
        let (ww, wph) = (simplex_weights(src.m(), &mut rng), random_phases(src.m(), &mut rng));
        let (zw, zph) = (simplex_weights(src.n(), &mut rng), random_phases(src.n(), &mut rng));
        let base_sw = rng.gen_range(0.3..0.8);
        let base_t = rng.gen_range(0.2..0.8);
        let mut xs = Vec::with_capacity(steps);
        let mut ys = Vec::with_capacity(steps);
        let mut ok = true;
        for i in 0..steps {
            let eps = 0.5f64.powi(i as i32 + 4);
            let (sw, t) = if toward_k { (base_sw, 1.0 - eps) } else { (1.0 - eps, base_t) };
            let pt = Point::new(
                level_point(&src.p, lambda, t * sw, &zw, &zph),
                level_point(&src.q, lambda, sw, &ww, &wph),
            );
            let g = boundary_gap(src, &pt, lambda);
            match f(&pt) {
                Ok(y) => {
                    let gy = boundary_gap(dst, &y, lambda);
                    if !(gy > 0.0) || !(g > 0.0) {
                        ok = false;
                        break;
                    }
                    xs.push(g.ln());
                    ys.push(gy.ln());
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        let gamma = if ok { slope(&xs, &ys) } else { f64::NAN };
        fitted.push(gamma);
        let r = if gamma > 0.0 { 1.0 / gamma } else { f64::INFINITY };
        worst = worst.max(r);
    }
    let mut rep = VerificationReport::new("properness_ray", ray_count, worst, MAX_INV_GAMMA, seed)
        .with_note("residual is 1/gamma per ray");
    rep.fitted = fitted;
    Ok(rep)
}

/// Least-squares slope.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Violations of the closed-form side conditions, as a report.
pub fn check_proper_form<T: Scalar>(map: &HartogsProperMap<T>, seed: u64) -> VerificationReport {
    let v = map.validate_proper_form();
    let rep = VerificationReport::new("proper_form", 1, v.len() as f64, 0.0, seed);
    if v.is_empty() {
        rep
    } else {
        rep.with_note(v.join("; "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Form,
    Soundness,
    Boundary,
    Properness,
    Holomorphy,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "form" => Suite::Form,
            "soundness" => Suite::Soundness,
            "boundary" => Suite::Boundary,
            "properness" => Suite::Properness,
            "holomorphy" => Suite::Holomorphy,
            other => return Err(Error::Unsupported(format!("unknown suite {other:?}"))),
        })
    }
}

/// Sample sizes of [`run_suite`].
#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    pub samples: usize,
    pub rays: usize,
    pub steps: usize,
    pub boundary_tol: f64,
    pub interior_margin: f64,
    pub fd_step: f64,
    pub fd_tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            rays: 8,
            steps: 12,
            boundary_tol: 1e-8,
            interior_margin: 1e-10,
            fd_step: 1e-5,
            fd_tol: 1e-5,
        }
    }
}

/// Runs the selected checks on a map; `All` gives six reports.
pub fn run_suite<T: Scalar>(
    map: &HartogsProperMap<T>,
    suite: Suite,
    cfg: &SuiteConfig,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    let (src, dst, lambda) = (&map.src, &map.dst, map.lambda);
    let f = |x: &Point<T>| map.apply(x);
    let want = |s: Suite| suite == Suite::All || suite == s;
    let mut out = Vec::new();
    if want(Suite::Form) {
        out.push(check_proper_form(map, seed));
    }
    if want(Suite::Soundness) {
        out.push(check_interior_soundness(src, dst, f, cfg.samples, seed, cfg.interior_margin, lambda)?);
    }
    if want(Suite::Boundary) {
        out.push(check_boundary_invariance(src, dst, f, Region::OnK, cfg.samples, seed, cfg.boundary_tol, lambda)?);
        out.push(check_boundary_invariance(src, dst, f, Region::OnL, cfg.samples, seed, cfg.boundary_tol, lambda)?);
    }
    if want(Suite::Properness) {
        out.push(check_properness_ray(src, dst, f, cfg.rays, cfg.steps, seed, lambda)?);
    }
    if want(Suite::Holomorphy) {
        let pts: Vec<_> = sample_points(src, Region::Interior, cfg.samples.min(50), seed, lambda)?
            .into_iter()
            .map(|p| p.to_flat())
            .collect();
        out.push(check_holomorphy_fd(map, &pts, cfg.fd_step, cfg.fd_tol, seed));
    }
    Ok(out)
}
