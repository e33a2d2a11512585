//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! and then asserts it, so `--nocapture` shows the whole table.

mod common;

use common::{grids, oracle_exists, Dom, X};
use hartogs_core::ellipsoid::{BallAut, EllipsoidAut, EllipsoidDomain, EllipsoidProperMap};
use hartogs_core::hartogs::{
    aut_sample, canonical_proper, degree_witness, exists_proper, is_rigid, BlaschkeFactor, BlaschkeProduct,
    HartogsDomain, HartogsProperMap, Point, ProperForm, Regime,
};
use hartogs_core::verify::{
    check_boundary_invariance, check_holomorphy_fd, check_interior_soundness, levi_restricted_identity,
    sample_ellipsoid, sample_points, FnMap, Region,
};
use hartogs_core::{Complex64, ExponentVec, Point64};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::time::Instant;

const LAMBDA: f64 = std::f64::consts::SQRT_2;

const EXISTENCE_SECONDS: f64 = 60.0;
const SOUNDNESS_SAMPLES: usize = 1000;
const SOUNDNESS_MARGIN: f64 = 1e-10;
const BOUNDARY_MAPS: usize = 50;
const BOUNDARY_SAMPLES: usize = 500;
const BOUNDARY_TOL: f64 = 1e-8;
const LEVI_DOMAINS: usize = 20;
const LEVI_DRAWS: usize = 1000;
const LEVI_REL_TOL: f64 = 1e-10;
const LEVI_POSITIVE: f64 = 1e-12;
const LEVI_VANISH: f64 = 1e-12;
const BALL_CENTERS: usize = 100;
const BALL_RADIUS: f64 = 0.95;
const BALL_TOL: f64 = 1e-12;
const GROUP_PAIRS: usize = 50;
const GROUP_SAMPLES: usize = 100;
const GROUP_TOL: f64 = 1e-9;
const RIGID_DOMAINS: usize = 20;
const RIGID_TARGETS: usize = 100;
const FIBER_TOL: f64 = 1e-9;
const MONOMIAL_GAP: f64 = 1e-6;
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;
const FD_CONTROL: f64 = 0.5;

/// Written straight to stdout so the line shows up without `--nocapture`.
fn verdict(n: u32, pass: bool, detail: String) {
    let line = format!("\ncriterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {n}: {detail}");
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn unimodular<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// `min((s_w - s_z)/s_w, 1 - s_w)` of an image point.
fn interior_margin(dst: &HartogsDomain, y: &Point64) -> f64 {
    let (sz, sw) = dst.sums(y, LAMBDA);
    ((sw - sz) / sw).min(1.0 - sw)
}

/// Every existence-positive pair of the grid, by shape.
fn positive_pairs() -> Vec<(Dom, Dom)> {
    let mut out = Vec::new();
    for g in grids() {
        for &(i, j) in &g.pairs {
            if oracle_exists(&g.doms[i], &g.doms[j]) {
                out.push((g.doms[i].clone(), g.doms[j].clone()));
            }
        }
    }
    out
}

#[test]
fn criterion_01_existence_matches_oracle() {
    let start = Instant::now();
    let (mut checked, mut positive) = (0usize, 0usize);
    let mut mismatches = Vec::new();
    for g in grids() {
        let doms: Vec<HartogsDomain> = g.doms.iter().map(Dom::domain).collect();
        for &(i, j) in &g.pairs {
            let got = exists_proper(&doms[i], &doms[j]).unwrap().is_some();
            let want = oracle_exists(&g.doms[i], &g.doms[j]);
            checked += 1;
            positive += want as usize;
            if got != want && mismatches.len() < 5 {
                mismatches.push(format!("{} -> {}: got {got}, oracle {want}", doms[i], doms[j]));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        mismatches.is_empty() && secs < EXISTENCE_SECONDS,
        format!("{checked} pairs, {positive} positive, {secs:.1}s, mismatches {mismatches:?}"),
    );
}

#[test]
fn criterion_02_canonical_maps_are_sound() {
    let mut pairs = 0usize;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for g in grids() {
        let doms: Vec<HartogsDomain> = g.doms.iter().map(Dom::domain).collect();
        let mut cached: Option<(usize, Vec<Point64>)> = None;
        for &(i, j) in &g.pairs {
            if !oracle_exists(&g.doms[i], &g.doms[j]) {
                continue;
            }
            if cached.as_ref().map(|c| c.0) != Some(i) {
                let pts = sample_points(&doms[i], Region::Interior, SOUNDNESS_SAMPLES, i as u64, LAMBDA).unwrap();
                cached = Some((i, pts));
            }
            let pts = &cached.as_ref().unwrap().1;
            let map = canonical_proper(&doms[i], &doms[j], LAMBDA).unwrap();
            let mut pair_worst = f64::INFINITY;
            for x in pts {
                let m = map.apply(x).map_or(f64::NEG_INFINITY, |y| interior_margin(&doms[j], &y));
                pair_worst = if m.is_nan() { f64::NEG_INFINITY } else { pair_worst.min(m) };
            }
            pairs += 1;
            worst = worst.min(pair_worst);
            if !(pair_worst > SOUNDNESS_MARGIN) && failures.len() < 5 {
                failures.push(format!("{} -> {} margin {pair_worst:e}", doms[i], doms[j]));
            }
        }
    }
    verdict(
        2,
        failures.is_empty(),
        format!("{pairs} pairs x {SOUNDNESS_SAMPLES} samples, smallest margin {worst:e}, failures {failures:?}"),
    );
}

/// Fifty maps with `nm != 1`: canonical maps of seeded positive pairs,
/// every other one precomposed with a random source automorphism.
fn boundary_maps() -> Vec<(HartogsProperMap<f64>, Option<HartogsProperMap<f64>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pos: Vec<(Dom, Dom)> = positive_pairs().into_iter().filter(|(s, _)| s.p.len() * s.q.len() != 1).collect();
    let mut by_shape: Vec<Vec<&(Dom, Dom)>> = vec![vec![]; 3];
    for pr in &pos {
        let k = match (pr.0.p.len(), pr.0.q.len()) {
            (1, _) => 0,
            (_, 1) => 1,
            _ => 2,
        };
        by_shape[k].push(pr);
    }
    (0..BOUNDARY_MAPS)
        .map(|i| {
            let (s, d) = by_shape[i % 3].choose(&mut rng).unwrap();
            let (s, d) = (s.domain(), d.domain());
            let map = canonical_proper(&s, &d, LAMBDA).unwrap();
            let pre = (i % 2 == 1).then(|| aut_sample(&s, i as u64, LAMBDA));
            (map, pre)
        })
        .collect()
}

#[test]
fn criterion_03_boundary_invariance() {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let maps = boundary_maps();
    for (i, (map, pre)) in maps.iter().enumerate() {
        let f = |x: &Point64| match pre {
            Some(a) => map.apply(&a.apply(x)?),
            None => map.apply(x),
        };
        for region in [Region::OnK, Region::OnL] {
            let rep =
                check_boundary_invariance(&map.src, &map.dst, f, region, BOUNDARY_SAMPLES, i as u64, BOUNDARY_TOL, LAMBDA)
                    .unwrap();
            worst = if rep.worst_residual.is_nan() { f64::NAN } else { worst.max(rep.worst_residual) };
            if !rep.pass && failures.len() < 5 {
                failures.push(format!("{} -> {} {}: {:e}", map.src, map.dst, rep.property, rep.worst_residual));
            }
        }
    }
    verdict(
        3,
        failures.is_empty(),
        format!(
            "{} maps x {BOUNDARY_SAMPLES} K + {BOUNDARY_SAMPLES} L samples, worst defect {worst:e}, failures {failures:?}",
            maps.len()
        ),
    );
}

fn blaschke_example(blaschke: bool) -> HartogsProperMap<f64> {
    let d = |p: &str, q: &str| HartogsDomain::parse(&[p], &[q]).unwrap();
    HartogsProperMap {
        src: d("2", "3"),
        dst: d("2", "5"),
        lambda: LAMBDA,
        form: ProperForm::Case11 {
            zeta: c(1.0, 0.0),
            xi: c(1.0, 0.0),
            k: if blaschke { 3 } else { 0 },
            l: 3,
            b: if blaschke { 3 } else { 8 },
            blaschke: blaschke.then(|| BlaschkeFactor {
                p_prime: 2,
                q_prime: 3,
                product: BlaschkeProduct::new(vec![(c(0.5, 0.0), 1)], c(1.0, 0.0)).unwrap(),
            }),
        },
    }
}

#[test]
fn criterion_04_blaschke_example() {
    let m = blaschke_example(true);
    let violations = m.validate_proper_form();
    // direct evaluation of (z^3 w^3 B(z^2 w^-3), w^3) with B(t) = (t - 1/2)/(1 - t/2)
    let pts = sample_points(&m.src, Region::Interior, SOUNDNESS_SAMPLES, 4, LAMBDA).unwrap();
    let mut formula_gap = 0.0f64;
    for x in &pts {
        let (z, w) = (x.z[0], x.w[0]);
        let t = z * z / (w * w * w);
        let g = z.powu(3) * w.powu(3) * (t - 0.5) / (1.0 - t * 0.5);
        let y = m.eval(x).unwrap();
        formula_gap = formula_gap.max((y.z[0] - g).norm()).max((y.w[0] - w.powu(3)).norm());
    }
    let f = |x: &Point64| m.eval(x);
    let sound = check_interior_soundness(&m.src, &m.dst, f, SOUNDNESS_SAMPLES, 4, SOUNDNESS_MARGIN, LAMBDA).unwrap();
    let k = check_boundary_invariance(&m.src, &m.dst, f, Region::OnK, BOUNDARY_SAMPLES, 4, BOUNDARY_TOL, LAMBDA).unwrap();
    let l = check_boundary_invariance(&m.src, &m.dst, f, Region::OnL, BOUNDARY_SAMPLES, 4, BOUNDARY_TOL, LAMBDA).unwrap();
    let rejected = blaschke_example(false).validate_proper_form();
    verdict(
        4,
        violations.is_empty() && formula_gap < 1e-14 && sound.pass && k.pass && l.pass && !rejected.is_empty(),
        format!(
            "violations {violations:?}, formula gap {formula_gap:e}, interior {:e}, K {:e}, L {:e}, constant-B variant rejected: {rejected:?}",
            sound.worst_residual, k.worst_residual, l.worst_residual
        ),
    );
}

fn random_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

#[test]
fn criterion_05_levi_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let full = common::full_alphabet();
    let (mut identity_worst, mut min_positive, mut vanish_worst) = (0.0f64, f64::INFINITY, 0.0f64);
    let (mut generic, mut single) = (0usize, 0usize);
    let per_domain = LEVI_DRAWS / LEVI_DOMAINS;
    for di in 0..LEVI_DOMAINS {
        let n = rng.gen_range(2..=4);
        let dom = common::random_dom(&full, n, 1, &mut rng);
        let d = dom.domain();
        let pv = d.p.values(LAMBDA);
        let qv = d.q[0].value(LAMBDA);
        let pts = sample_points(&d, Region::OnK, per_domain, di as u64, LAMBDA).unwrap();
        for (k, pt) in pts.iter().enumerate() {
            // odd draws move to a point with one nonzero coordinate when the
            // other exponents all exceed 1
            let lone: Vec<usize> = (0..n).filter(|&i| (0..n).all(|j| j == i || pv[j] > 1.0)).collect();
            let single_draw = k % 2 == 1 && !lone.is_empty();
            let pt = if single_draw {
                let i = *lone.choose(&mut rng).unwrap();
                let s = pt.w[0].norm().powf(2.0 * qv);
                let mut z = vec![c(0.0, 0.0); n];
                z[i] = unimodular(&mut rng) * s.powf(1.0 / (2.0 * pv[i]));
                Point::new(z, pt.w.clone())
            } else {
                pt.clone()
            };
            let x = random_vec(n, &mut rng);
            let (lhs, rhs) = levi_restricted_identity(&d.p, d.q[0], &pt, &x, LAMBDA).unwrap();
            let scale = 1.0f64.max(lhs.abs()).max(rhs.abs());
            identity_worst = identity_worst.max((lhs - rhs).abs() / scale);
            if single_draw {
                single += 1;
                vanish_worst = vanish_worst.max(lhs.abs()).max(rhs.abs());
            } else {
                generic += 1;
                // remove the kernel direction (z_j / p_j)_j
                let v: Vec<Complex64> = (0..n).map(|j| pt.z[j] / pv[j]).collect();
                let vv: f64 = v.iter().map(|a| a.norm_sqr()).sum();
                let xv: Complex64 = x.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
                let xp: Vec<Complex64> = x.iter().zip(&v).map(|(a, b)| a - b * (xv / vv)).collect();
                let (l2, r2) = levi_restricted_identity(&d.p, d.q[0], &pt, &xp, LAMBDA).unwrap();
                min_positive = min_positive.min(l2).min(r2);
            }
        }
    }
    verdict(
        5,
        identity_worst <= LEVI_REL_TOL && min_positive > LEVI_POSITIVE && vanish_worst < LEVI_VANISH && single > 0,
        format!(
            "{} draws ({generic} generic, {single} single-coordinate), identity gap {identity_worst:e}, smallest off-kernel value {min_positive:e}, largest single-coordinate value {vanish_worst:e}",
            generic + single
        ),
    );
}

#[test]
fn criterion_06_ball_automorphisms() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut residual, mut at_center, mut defect) = (0.0f64, 0.0f64, 0.0f64);
    let mut escaped = 0usize;
    for _ in 0..BALL_CENTERS {
        let k = rng.gen_range(1..=4);
        let dir = random_vec(k, &mut rng);
        let norm = dir.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let radius = BALL_RADIUS * rng.gen::<f64>();
        let a: Vec<Complex64> = dir.iter().map(|x| x * (radius / norm)).collect();
        let h = BallAut::new(a.clone()).unwrap();
        residual = residual.max(h.identity_residual());
        at_center = at_center.max(h.eval(&a).iter().map(|x| x.norm()).fold(0.0, f64::max));
        let aa: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        for _ in 0..100 {
            let z = random_vec(k, &mut rng);
            let zn = z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let r = rng.gen::<f64>().powf(1.0 / (2.0 * k as f64)) * 0.999;
            let z: Vec<Complex64> = z.iter().map(|x| x * (r / zn)).collect();
            let hz = h.eval(&z);
            let hz2: f64 = hz.iter().map(|x| x.norm_sqr()).sum();
            escaped += (hz2 >= 1.0) as usize;
            // 1 - |H(z)|^2 = (1 - |a|^2)(1 - |z|^2) / |1 - <z, a>|^2
            let za: Complex64 = z.iter().zip(&a).map(|(x, y)| x * y.conj()).sum();
            let want = (1.0 - aa) * (1.0 - r * r) / (c(1.0, 0.0) - za).norm_sqr();
            defect = defect.max(((1.0 - hz2) - want).abs());
        }
    }
    verdict(
        6,
        residual <= BALL_TOL && at_center <= BALL_TOL && escaped == 0 && defect <= BALL_TOL,
        format!(
            "{BALL_CENTERS} centers, matrix identity residual {residual:e}, |H(a)| {at_center:e}, escaped {escaped}, modulus identity defect {defect:e}"
        ),
    );
}

fn times(x: X, k: i64) -> X {
    X::new(x.n * k, x.d, x.g)
}

/// A random domain of the regime, biased toward exponent-1 slots and
/// natural `q` (or `q/p`) so that recentered automorphisms occur.
fn group_domain<R: Rng>(regime: Regime, rng: &mut R) -> HartogsDomain {
    let full = common::full_alphabet();
    let one = X::new(1, 1, 0);
    let pick = |rng: &mut R| if rng.gen_bool(0.5) { one } else { *full.choose(rng).unwrap() };
    let dom = match regime {
        Regime::Case11 => {
            let p = *full.choose(rng).unwrap();
            let q = if rng.gen_bool(0.5) { times(p, rng.gen_range(1..=3)) } else { *full.choose(rng).unwrap() };
            Dom { p: vec![p], q: vec![q] }
        }
        Regime::Casen1 => {
            let n = rng.gen_range(2..=3);
            let p = (0..n).map(|_| pick(rng)).collect();
            let q = if rng.gen_bool(0.5) { X::new(rng.gen_range(1..=3), 1, 0) } else { *full.choose(rng).unwrap() };
            Dom { p, q: vec![q] }
        }
        Regime::Case1m => {
            let m = rng.gen_range(2..=3);
            Dom { p: vec![*full.choose(rng).unwrap()], q: (0..m).map(|_| pick(rng)).collect() }
        }
        Regime::Casenm => {
            let (n, m) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
            Dom { p: (0..n).map(|_| pick(rng)).collect(), q: (0..m).map(|_| pick(rng)).collect() }
        }
    };
    dom.domain()
}

const REGIMES: [Regime; 4] = [Regime::Case11, Regime::Case1m, Regime::Casen1, Regime::Casenm];

#[test]
fn criterion_07_group_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lines = Vec::new();
    let mut pass = true;
    for regime in REGIMES {
        let (mut compose_gap, mut inverse_gap) = (0.0f64, 0.0f64);
        let (mut outside_family, mut recentered) = (0usize, 0usize);
        for i in 0..GROUP_PAIRS as u64 {
            let d = group_domain(regime, &mut rng);
            let g1 = aut_sample(&d, 2 * i, LAMBDA);
            let g2 = aut_sample(&d, 2 * i + 1, LAMBDA);
            recentered += hartogs_core::hartogs::aut_family(&d).unwrap().recentering_allowed as usize;
            let g21 = g2.compose_aut(&g1).unwrap();
            let inv = g1.invert_aut().unwrap();
            outside_family += (!g21.in_aut_family()) as usize + (!inv.in_aut_family()) as usize;
            for x in sample_points(&d, Region::Interior, GROUP_SAMPLES, i, LAMBDA).unwrap() {
                let y = g1.eval(&x).unwrap();
                let direct = g2.eval(&y).unwrap();
                compose_gap = compose_gap.max(g21.eval(&x).map_or(f64::INFINITY, |z| z.dist(&direct)));
                inverse_gap = inverse_gap.max(inv.eval(&y).map_or(f64::INFINITY, |z| z.dist(&x)));
            }
        }
        pass &= compose_gap < GROUP_TOL && inverse_gap < GROUP_TOL && outside_family == 0;
        lines.push(format!(
            "{}: compose {compose_gap:e}, inverse {inverse_gap:e}, recentering domains {recentered}, outside family {outside_family}",
            regime.tag()
        ));
    }
    verdict(7, pass, format!("{GROUP_PAIRS} pairs x {GROUP_SAMPLES} samples per regime; {}", lines.join("; ")));
}

/// Size of the fiber of `f` over `f(x)` for interior samples `x`.
fn fiber_sizes(f: &HartogsProperMap<f64>, count: usize, seed: u64) -> Vec<usize> {
    sample_points(&f.src, Region::Interior, count, seed, LAMBDA)
        .unwrap()
        .iter()
        .map(|x| f.preimages(&f.eval(x).unwrap(), FIBER_TOL).map_or(0, |v| v.len()))
        .collect()
}

#[test]
fn criterion_08_rigidity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let full = common::full_alphabet();
    let mut rigid_bad = Vec::new();
    for i in 0..RIGID_DOMAINS as u64 {
        let (n, m) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
        let d = common::random_dom(&full, n, m, &mut rng).domain();
        let canonical = canonical_proper(&d, &d, LAMBDA).unwrap();
        let aut = aut_sample(&d, i, LAMBDA);
        for f in [&canonical, &aut] {
            let sizes = fiber_sizes(f, RIGID_TARGETS, i);
            if !is_rigid(&d) || sizes.iter().any(|&s| s != 1) {
                rigid_bad.push(format!("{d}: rigid {}, fibers {:?}", is_rigid(&d), sizes.iter().max()));
            }
        }
    }
    let mut flexible_bad = Vec::new();
    let shapes = [(1, 1), (1, 2), (2, 1)];
    for i in 0..RIGID_DOMAINS as u64 {
        let (n, m) = shapes[i as usize % 3];
        let d = common::random_dom(&full, n, m, &mut rng).domain();
        let fiber = degree_witness(&d, LAMBDA)
            .filter(|w| w.is_valid())
            .map(|w| fiber_sizes(&w, 1, i)[0]);
        if is_rigid(&d) || fiber.is_none_or(|s| s < 2) {
            flexible_bad.push(format!("{d}: fiber {fiber:?}"));
        }
    }
    verdict(
        8,
        rigid_bad.is_empty() && flexible_bad.is_empty(),
        format!(
            "n, m >= 2: {} of {RIGID_DOMAINS} domains with a fiber != 1 {rigid_bad:?}; n = 1 or m = 1: {} of {RIGID_DOMAINS} domains without a degree >= 2 self-map {flexible_bad:?}",
            rigid_bad.len(),
            flexible_bad.len()
        ),
    );
}

/// `Psi_(2,2) o phi o Psi_(2,2)` with `phi` the ball automorphism centered at
/// `(0.3, 0)`, from `E_(2,2)` to `E_(1/2,1/2)`.
fn recentered_power_map() -> EllipsoidProperMap<f64> {
    let p = ExponentVec::parse(&["2", "2"]).unwrap();
    let q = ExponentVec::parse(&["1/2", "1/2"]).unwrap();
    let mid = hartogs_core::ellipsoid::intermediate(&p, &[2, 2]);
    let ball = BallAut::new(vec![c(0.3, 0.0), c(0.0, 0.0)]).unwrap();
    let phi = EllipsoidAut::new(mid, ball, vec![c(1.0, 0.0); 2], vec![0, 1], LAMBDA).unwrap();
    EllipsoidProperMap::new(p, q, vec![0, 1], vec![2, 2], phi).unwrap()
}

#[test]
fn criterion_09_non_monomial_ellipsoid_map() {
    let f = recentered_power_map();
    let src = EllipsoidDomain::new(f.p.clone());
    let dst = EllipsoidDomain::new(f.q.clone());
    let interior = sample_ellipsoid(&src, Region::Interior, SOUNDNESS_SAMPLES, 9, LAMBDA).unwrap();
    let boundary = sample_ellipsoid(&src, Region::Boundary, BOUNDARY_SAMPLES, 9, LAMBDA).unwrap();
    let margin = interior.iter().map(|z| 1.0 - dst.modulus_sum(&f.apply(z), LAMBDA)).fold(f64::INFINITY, f64::min);
    let drift = boundary.iter().map(|z| (dst.modulus_sum(&f.apply(z), LAMBDA) - 1.0).abs()).fold(0.0, f64::max);
    // closest map of the form (zeta_1 z_pi(1)^4, zeta_2 z_pi(2)^4), with the
    // zetas fitted by least squares over the samples and the origin
    let mut pts = interior.clone();
    pts.push(vec![c(0.0, 0.0); 2]);
    let images: Vec<Vec<Complex64>> = pts.iter().map(|z| f.apply(z)).collect();
    let mut closest = f64::INFINITY;
    for pi in [[0usize, 1], [1, 0]] {
        let zetas: Vec<Complex64> = (0..2)
            .map(|j| {
                let s: Complex64 = pts.iter().zip(&images).map(|(z, y)| z[pi[j]].powu(4).conj() * y[j]).sum();
                if s.norm() > 0.0 { s / s.norm() } else { c(1.0, 0.0) }
            })
            .collect();
        let gap = pts
            .iter()
            .zip(&images)
            .map(|(z, y)| (0..2).map(|j| (zetas[j] * z[pi[j]].powu(4) - y[j]).norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        closest = closest.min(gap);
    }
    let at_origin = f.apply(&[c(0.0, 0.0); 2]);
    verdict(
        9,
        margin > SOUNDNESS_MARGIN && drift <= BOUNDARY_TOL && closest > MONOMIAL_GAP,
        format!(
            "interior margin {margin:e}, boundary drift {drift:e}, distance to monomial forms {closest:e}, image of origin {at_origin:?}"
        ),
    );
}

#[test]
fn criterion_10_holomorphy() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pos = positive_pairs();
    let mut maps: Vec<HartogsProperMap<f64>> = pos
        .choose_multiple(&mut rng, 200)
        .map(|(s, d)| canonical_proper(&s.domain(), &d.domain(), LAMBDA).unwrap())
        .collect();
    maps.push(blaschke_example(true));
    for i in 0..40u64 {
        let d = group_domain(REGIMES[i as usize % 4], &mut rng);
        maps.push(aut_sample(&d, i, LAMBDA));
    }
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (i, f) in maps.iter().enumerate() {
        let xs: Vec<Vec<Complex64>> = sample_points(&f.src, Region::Interior, 10, i as u64, LAMBDA)
            .unwrap()
            .iter()
            .map(Point::to_flat)
            .collect();
        let rep = check_holomorphy_fd(f, &xs, FD_STEP, FD_TOL, i as u64);
        worst = if rep.worst_residual.is_nan() { f64::NAN } else { worst.max(rep.worst_residual) };
        if !rep.pass && failures.len() < 5 {
            failures.push(format!("{} -> {} ({}): {:e}", f.src, f.dst, f.regime().tag(), rep.worst_residual));
        }
    }
    let e = recentered_power_map();
    let ez = sample_ellipsoid(&EllipsoidDomain::new(e.p.clone()), Region::Interior, 10, 10, LAMBDA).unwrap();
    let recentered = check_holomorphy_fd(&e, &ez, FD_STEP, FD_TOL, 10);
    let conj = FnMap(|x: &[Complex64]| x.iter().map(|z| z.conj()).collect::<Vec<_>>());
    let control = check_holomorphy_fd(&conj, &ez, FD_STEP, FD_TOL, 10);
    verdict(
        10,
        failures.is_empty() && recentered.pass && control.worst_residual > FD_CONTROL,
        format!(
            "{} maps, worst residual {worst:e}, non-monomial ellipsoid map {:e}, conjugation control {:e}, failures {failures:?}",
            maps.len() + 1,
            recentered.worst_residual,
            control.worst_residual
        ),
    );
}
