//! Composite geometric checks with serializable reports.
//!
//! Every check reduces to a worst-case residual compared against a declared
//! tolerance. Composite reports hold their parts as `subchecks` and report
//! the worst `residual / tolerance` ratio against a tolerance of 1.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::{random_ocs, OrthogonalComplexStructure, Quaternion};
use crate::fibers::{fiber_distance_stats, fit_great_circle, point_to_curve, trace_fiber, FiberCurve, TraceConfig};
use crate::linalg::{self, dot, norm};
use crate::lipschitz::{curve_length, great_circle_lift, spectral_estimate, Metric};
use crate::manifolds::{Bivector4, HodgeStar, Space};
use crate::maps::{stiefel_quat, Isometry, Map, MapDescriptor};
use crate::{Error, Result};

/// A piecewise-linear increasing bijection of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    /// `(x, f(x))` knots with increasing `x`, from `(0, 0)` to `(1, 1)`.
    pub breakpoints: Vec<[f64; 2]>,
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        let b = &self.breakpoints;
        if b.len() < 2 {
            return Err(Error::InvalidProfile("need at least two breakpoints".into()));
        }
        if b[0] != [0.0, 0.0] || b[b.len() - 1] != [1.0, 1.0] {
            return Err(Error::InvalidProfile("must run from (0,0) to (1,1)".into()));
        }
        for w in b.windows(2) {
            if !(w[1][0] > w[0][0] && w[1][1] > w[0][1]) {
                return Err(Error::InvalidProfile("must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        let x = x.clamp(0.0, 1.0);
        let k = b.partition_point(|p| p[0] < x).clamp(1, b.len() - 1);
        let ([x0, y0], [x1, y1]) = (b[k - 1], b[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn slope_at_start(&self) -> f64 {
        let b = &self.breakpoints;
        (b[1][1] - b[0][1]) / (b[1][0] - b[0][0])
    }

    pub fn slope_at_end(&self) -> f64 {
        let b = &self.breakpoints;
        let n = b.len();
        (b[n - 1][1] - b[n - 2][1]) / (b[n - 1][0] - b[n - 2][0])
    }

    /// `max |f(1 − f(x)) − (1 − x)|` over `points` evenly spaced `x`.
    pub fn reflection_defect(&self, points: usize) -> f64 {
        (0..points)
            .map(|k| {
                let x = k as f64 / (points - 1) as f64;
                (self.eval(1.0 - self.eval(x)) - (1.0 - x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `f(x) = 2x` on `[0, 1/3]`, `(1 + x)/2` on `[1/3, 1]`.
pub fn build_profile() -> Profile {
    Profile {
        breakpoints: vec![[0.0, 0.0], [1.0 / 3.0, 2.0 / 3.0], [1.0, 1.0]],
    }
}

pub fn profile_sphere_map(p: &Profile, n: usize) -> Result<MapDescriptor> {
    let d = MapDescriptor::ProfileSphere { n, profile: p.clone() };
    d.build()?;
    Ok(d)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub pass: bool,
    /// Set when a search exhausted its budget rather than finding a
    /// counterexample.
    #[serde(default)]
    pub inconclusive: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subchecks: Vec<VerificationReport>,
}

impl VerificationReport {
    pub fn leaf(check: &str, residual: f64, tolerance: f64) -> Self {
        VerificationReport {
            check: check.to_string(),
            pass: residual < tolerance,
            inconclusive: false,
            residual,
            tolerance,
            parameters: BTreeMap::new(),
            provenance: Provenance::default(),
            subchecks: Vec::new(),
        }
    }

    pub fn composite(check: &str, subchecks: Vec<VerificationReport>) -> Self {
        let mut worst = 0.0f64;
        for s in &subchecks {
            let r = s.residual / s.tolerance;
            worst = if r.is_nan() || worst.is_nan() {
                f64::NAN
            } else {
                worst.max(r)
            };
        }
        let mut out = VerificationReport::leaf(check, worst, 1.0);
        out.inconclusive = subchecks.iter().any(|s| s.inconclusive) && !out.pass;
        out.subchecks = subchecks;
        out
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable parameter"),
        );
        self
    }

    pub fn map(mut self, m: &MapDescriptor) -> Self {
        self.provenance.map = Some(m.clone());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.provenance.seed = Some(seed);
        self
    }

    pub fn subcheck(&self, name: &str) -> Option<&VerificationReport> {
        self.subchecks.iter().find(|s| s.check == name)
    }
}

/// Images of seeded domain samples: values a map actually takes.
pub fn sample_values(m: &Map, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = linalg::seeded_rng(seed);
    (0..count).map(|_| m.eval_raw(&m.domain().sample(&mut rng))).collect()
}

pub fn verify_great_circle_fibers(
    m: &Map,
    values: &[Vec<f64>],
    tol: f64,
    trace: &TraceConfig,
) -> Result<VerificationReport> {
    let mut worst = 0.0f64;
    let mut components = 0;
    for y in values {
        for c in trace_fiber(m, y, trace)? {
            worst = worst.max(fit_great_circle(&c.points)?.max_residual);
            components += 1;
        }
    }
    Ok(VerificationReport::leaf("great-circles", worst, tol)
        .param("values", values.len())
        .param("components", components)
        .param("step", trace.step)
        .map(m.descriptor()))
}

/// Spread of fiber distances for each pair of values, and agreement of the
/// common distance with the base distance.
pub fn verify_parallel_fibers(
    m: &Map,
    pairs: &[(Vec<f64>, Vec<f64>)],
    tol: f64,
    trace: &TraceConfig,
) -> Result<VerificationReport> {
    let mut spread = 0.0f64;
    let mut offset = 0.0f64;
    for (y1, y2) in pairs {
        let base = m.codomain().distance(y1, y2);
        let k1 = trace_fiber(m, y1, trace)?;
        let k2 = trace_fiber(m, y2, trace)?;
        for a in &k1 {
            for b in &k2 {
                let s = fiber_distance_stats(a, b);
                spread = spread.max(s.max - s.min);
                offset = offset.max((s.min - base).abs()).max((s.max - base).abs());
            }
        }
    }
    Ok(VerificationReport::composite(
        "parallel",
        vec![
            VerificationReport::leaf("spread", spread, tol),
            VerificationReport::leaf("base-distance", offset, tol),
        ],
    )
    .param("pairs", pairs.len())
    .param("step", trace.step)
    .map(m.descriptor()))
}

/// Fibers over `y` and `−y` bound a family of tori; a fiber over a point at
/// base distance `α` from `y` must lie on the torus at distance `α` from the
/// first and `π/2 − α` from the second.
pub fn verify_torus(
    m: &Map,
    y: &[f64],
    others: &[Vec<f64>],
    tol: f64,
    trace: &TraceConfig,
) -> Result<VerificationReport> {
    let anti = linalg::scale(y, -1.0);
    let k = single(trace_fiber(m, y, trace)?)?;
    let kp = single(trace_fiber(m, &anti, trace)?)?;
    let mut worst = 0.0f64;
    for other in others {
        let alpha = m.codomain().distance(y, other);
        for c in trace_fiber(m, other, trace)? {
            let w = c
                .points
                .par_iter()
                .map(|p| {
                    let a = (point_to_curve(p, &k) - alpha).abs();
                    let b = (point_to_curve(p, &kp) - (FRAC_PI_2 - alpha)).abs();
                    a.max(b)
                })
                .reduce(|| 0.0, f64::max);
            worst = worst.max(w);
        }
    }
    Ok(VerificationReport::leaf("torus", worst, tol)
        .param("values", others.len())
        .map(m.descriptor()))
}

fn single(mut v: Vec<FiberCurve>) -> Result<FiberCurve> {
    if v.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected one fiber component, found {}",
            v.len()
        )));
    }
    Ok(v.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyLemmaConfig {
    pub starts: usize,
    pub iterations: usize,
    pub initial_step: f64,
    /// Stop once the residual falls below this.
    pub target: f64,
    pub seed: u64,
}

impl Default for KeyLemmaConfig {
    fn default() -> Self {
        KeyLemmaConfig {
            starts: 200,
            iterations: 500,
            initial_step: 0.1,
            target: 1e-14,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaResult {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub residual: f64,
    pub starts_used: usize,
}

/// Search for `u, v` with `f₁(u) = −f₁(v)` and `f₂(u) = −f₂(v)` by
/// multi-start projected gradient descent on
/// `r(u, v) = |f₁(u) + f₁(v)|² + |f₂(u) + f₂(v)|²`.
pub fn key_lemma_search(f1: &Map, f2: &Map, cfg: &KeyLemmaConfig) -> Result<KeyLemmaResult> {
    let dim = match f1.domain() {
        Space::Sphere { dim, radius } if *radius == 1.0 => *dim,
        other => {
            return Err(Error::InvalidArgument(format!(
                "antipodal search needs maps of unit spheres, got {other:?}"
            )))
        }
    };
    let s = Space::sphere(dim, 1.0);
    for f in [f1, f2] {
        if *f.domain() != s || *f.codomain() != s {
            return Err(Error::InvalidArgument(
                "antipodal search needs two self-maps of the same unit sphere".into(),
            ));
        }
    }
    let r = |u: &[f64], v: &[f64]| -> Result<f64> {
        let a = linalg::add(&f1.eval_raw(u)?, &f1.eval_raw(v)?);
        let b = linalg::add(&f2.eval_raw(u)?, &f2.eval_raw(v)?);
        Ok(dot(&a, &a) + dot(&b, &b))
    };
    let mut rng = linalg::seeded_rng(cfg.seed);
    let mut best: Option<KeyLemmaResult> = None;
    for start in 0..cfg.starts {
        let mut u = s.sample(&mut rng);
        let mut v = s.sample(&mut rng);
        let mut val = r(&u, &v)?;
        let mut step = cfg.initial_step;
        for _ in 0..cfg.iterations {
            if val < cfg.target || step < 1e-12 {
                break;
            }
            let h = 1e-6;
            let fu = s.tangent_frame(&u)?;
            let fv = s.tangent_frame(&v)?;
            let mut gu = vec![0.0; dim + 1];
            let mut gv = vec![0.0; dim + 1];
            for e in &fu.basis {
                let d = (r(&s.retract(&linalg::axpy(&u, h, e)), &v)? - r(&s.retract(&linalg::axpy(&u, -h, e)), &v)?)
                    / (2.0 * h);
                gu = linalg::axpy(&gu, d, e);
            }
            for e in &fv.basis {
                let d = (r(&u, &s.retract(&linalg::axpy(&v, h, e)))? - r(&u, &s.retract(&linalg::axpy(&v, -h, e)))?)
                    / (2.0 * h);
                gv = linalg::axpy(&gv, d, e);
            }
            loop {
                let nu = s.retract(&linalg::axpy(&u, -step, &gu));
                let nv = s.retract(&linalg::axpy(&v, -step, &gv));
                let nval = r(&nu, &nv)?;
                if nval < val {
                    (u, v, val) = (nu, nv, nval);
                    break;
                }
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        if best.as_ref().is_none_or(|b| val < b.residual) {
            best = Some(KeyLemmaResult {
                u: u.clone(),
                v: v.clone(),
                residual: val,
                starts_used: start + 1,
            });
        }
        if val < cfg.target {
            break;
        }
    }
    let mut out = best.expect("at least one start");
    out.starts_used = out.starts_used.max(1);
    Ok(out)
}

/// Seeded pairs of self-maps of `Sⁿ` homotopic to the identity: rotations,
/// bump-perturbed identities and the profile map, mixed.
pub fn key_lemma_cases(count: usize, seed: u64) -> Vec<(MapDescriptor, MapDescriptor)> {
    let mut rng = linalg::seeded_rng(seed);
    (0..count)
        .map(|k| {
            let n = 2 + k % 2;
            let rot = |s: u64| MapDescriptor::IsometryConjugate {
                inner: Box::new(MapDescriptor::Identity { n }),
                domain: Isometry::Identity,
                codomain: Isometry::RandomRotation { seed: s },
            };
            let s1 = seed.wrapping_mul(1000).wrapping_add(2 * k as u64);
            let s2 = s1 + 1;
            let bump = |rng: &mut linalg::Rng| MapDescriptor::BumpPerturb {
                inner: Box::new(MapDescriptor::Identity { n }),
                center: linalg::random_unit(rng, n + 1),
                amplitude: 0.3,
                width: 1.0,
                direction: None,
            };
            match k % 4 {
                0 => (rot(s1), rot(s2)),
                1 => (rot(s1), bump(&mut rng)),
                2 => (
                    MapDescriptor::ProfileSphere {
                        n,
                        profile: build_profile(),
                    },
                    rot(s2),
                ),
                _ => (
                    bump(&mut rng),
                    MapDescriptor::ProfileSphere {
                        n,
                        profile: build_profile(),
                    },
                ),
            }
        })
        .collect()
}

/// Antipodal-pair search over [`key_lemma_cases`]; a case whose residual stays
/// above `threshold` makes the report inconclusive, not false.
pub fn verify_key_lemma(count: usize, seed: u64, threshold: f64) -> Result<VerificationReport> {
    let cases = key_lemma_cases(count, seed);
    let subs = cases
        .par_iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let cfg = KeyLemmaConfig {
                seed: seed.wrapping_add(k as u64),
                ..KeyLemmaConfig::default()
            };
            let res = key_lemma_search(&a.build()?, &b.build()?, &cfg)?;
            let mut rep = VerificationReport::leaf(&format!("case-{k}"), res.residual, threshold)
                .param("f1", a)
                .param("f2", b)
                .param("starts_used", res.starts_used);
            rep.inconclusive = !rep.pass;
            Ok(rep)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport::composite("key-lemma", subs)
        .param("cases", count)
        .seed(seed))
}

/// Checks on [`build_profile`] and its sphere map.
pub fn lemma_f_checks(n: usize, samples: usize, seed: u64) -> Result<VerificationReport> {
    let p = build_profile();
    p.validate()?;
    let desc = profile_sphere_map(&p, n)?;
    let f = desc.build()?;
    let symmetry = VerificationReport::leaf("reflection", p.reflection_defect(10_000), 1e-12);
    let slopes = VerificationReport::leaf(
        "end-slopes",
        (p.slope_at_start() - 2.0).abs().max((p.slope_at_end() - 0.5).abs()),
        1e-12,
    )
    .param("start", p.slope_at_start())
    .param("end", p.slope_at_end());

    let mut rng = linalg::seeded_rng(seed);
    let mut inv = 0.0f64;
    for _ in 0..samples {
        let x = linalg::random_unit(&mut rng, n + 1);
        let once = linalg::scale(&f.eval_raw(&x)?, -1.0);
        let twice = linalg::scale(&f.eval_raw(&once)?, -1.0);
        inv = inv.max(linalg::dist(&twice, &x));
    }
    let involution = VerificationReport::leaf("involution", inv, 1e-10);

    let mut north = vec![0.0; n + 1];
    north[n] = 1.0;
    let south = linalg::scale(&north, -1.0);
    let poles = linalg::dist(&f.eval_raw(&north)?, &north).max(linalg::dist(&f.eval_raw(&south)?, &south));
    let poles = VerificationReport::leaf("poles-fixed", poles, 1e-12);

    // displacement depends on colatitude only; sample strictly outside the
    // polar caps of radius 0.1 with random longitudes
    let cap = 0.1;
    let grid = 20_000;
    let mut min_disp = f64::INFINITY;
    for k in 0..grid {
        let theta = cap + (PI - 2.0 * cap) * (k as f64 + 0.5) / grid as f64;
        let w = linalg::random_unit(&mut rng, n);
        let mut x = linalg::scale(&w, theta.sin());
        x.push(theta.cos());
        min_disp = min_disp.min(linalg::angle_between(&f.eval_raw(&x)?, &x));
    }
    let fixed = VerificationReport::leaf("fixed-points", 0.05 / min_disp, 1.0)
        .param("cap_radius", cap)
        .param("min_displacement", min_disp);
    Ok(
        VerificationReport::composite("lemma-f", vec![symmetry, slopes, involution, poles, fixed])
            .param("n", n)
            .param("samples", samples)
            .map(&desc)
            .seed(seed),
    )
}

/// Graph of a Hopf vector field `x ↦ (x, Jx)`: (a) it lies in the unit
/// tangent bundle, (b) it is isometric to the diagonal, (c) `(g, g)` carries
/// it onto the graph of a second structure `J′ = gJg⁻¹`.
pub fn theorem_c_checks(j: &OrthogonalComplexStructure, samples: usize, seed: u64) -> Result<VerificationReport> {
    let dim = j.dim();
    let mut rng = linalg::seeded_rng(seed);
    let jm = j.matrix();
    let apply = |x: &[f64]| linalg::mat_vec(jm, x);

    let mut a = 0.0f64;
    for _ in 0..samples {
        let x = linalg::random_unit(&mut rng, dim);
        let jx = apply(&x);
        a = a.max(dot(&x, &jx).abs()).max((norm(&jx) - 1.0).abs());
    }

    let prod = Space::product(Space::sphere(dim - 1, 1.0), Space::sphere(dim - 1, 1.0));
    let mut b = 0.0f64;
    for _ in 0..samples {
        let x = linalg::random_unit(&mut rng, dim);
        let y = linalg::random_unit(&mut rng, dim);
        let mut px = x.clone();
        px.extend(apply(&x));
        let mut py = y.clone();
        py.extend(apply(&y));
        let d = prod.distance(&px, &py);
        b = b.max((d - SQRT_2 * linalg::angle_between(&x, &y)).abs());
    }

    let c = match random_ocs(dim, seed ^ 0xc0c0) {
        Ok(other) => match j.conjugator_to(&other) {
            Ok(g) => {
                let mut worst = 0.0f64;
                for _ in 0..samples {
                    let x = linalg::random_unit(&mut rng, dim);
                    let gjx = linalg::mat_vec(&g, &apply(&x));
                    let jgx = linalg::mat_vec(other.matrix(), &linalg::mat_vec(&g, &x));
                    worst = worst.max(linalg::dist(&gjx, &jgx));
                }
                worst
            }
            Err(_) => f64::INFINITY,
        },
        Err(_) => f64::INFINITY,
    };
    Ok(VerificationReport::composite(
        "theorem-c",
        vec![
            VerificationReport::leaf("unit-tangent", a, 1e-10),
            VerificationReport::leaf("diagonal-isometry", b, 1e-9),
            VerificationReport::leaf("conjugate-graphs", c, 1e-9),
        ],
    )
    .param("dim", dim)
    .param("samples", samples)
    .seed(seed))
}

/// Loop lengths of the velocity lift of a great circle in the two metrics.
pub fn sasaki_lengths_check(points: usize) -> Result<VerificationReport> {
    let lift = great_circle_lift(4, points);
    let s = curve_length(&lift, Metric::Sasaki)?;
    let p = curve_length(&lift, Metric::Product)?;
    Ok(VerificationReport::composite(
        "sasaki-lengths",
        vec![
            VerificationReport::leaf("sasaki", (s - 2.0 * PI).abs(), 1e-6).param("length", s),
            VerificationReport::leaf("product", (p - 2.0 * PI * SQRT_2).abs(), 1e-6).param("length", p),
        ],
    )
    .param("points", points))
}

fn random_pure_unit(rng: &mut linalg::Rng) -> Quaternion {
    let u = linalg::random_unit(rng, 3);
    Quaternion::pure([u[0], u[1], u[2]])
}

/// The Stiefel projection `V₂ℝ⁴ → S² × S²` and its neighbours.
pub fn theorem_d_checks(seed: u64) -> Result<VerificationReport> {
    theorem_d_checks_with(seed, 1000, &HodgeStar::standard())
}

pub fn theorem_d_checks_with(seed: u64, samples: usize, star: &HodgeStar) -> Result<VerificationReport> {
    let p = MapDescriptor::StiefelQuat.build()?;
    let mut rng = linalg::seeded_rng(seed);

    // (a) p(x, ux) = (u, x⁻¹ux)
    let mut a = 0.0f64;
    for _ in 0..samples {
        let x = Quaternion::from_slice(&linalg::random_unit(&mut rng, 4));
        let u = random_pure_unit(&mut rng);
        let mut pt = x.to_array().to_vec();
        pt.extend_from_slice(&(u * x).to_array());
        let out = p.eval_raw(&pt)?;
        let second = x.inverse() * u * x;
        a = a
            .max(linalg::dist(&out[..3], &u.vector()))
            .max(linalg::dist(&out[3..], &second.vector()));
    }

    // (b) both factors are purely imaginary unit quaternions
    let stiefel = Space::Stiefel { m: 4 };
    let mut b = 0.0f64;
    for _ in 0..samples {
        let pt = stiefel.sample(&mut rng);
        let (q1, q2) = stiefel_quat(&pt);
        for q in [q1, q2] {
            b = b.max(q.w.abs()).max((q.norm() - 1.0).abs());
        }
    }

    // (c) decomposable 2-vectors have equal self-dual and anti-self-dual
    // parts; generic ones do not
    let mut c = 0.0f64;
    for _ in 0..samples {
        let pt = stiefel.sample(&mut rng);
        let w = Bivector4::wedge(&pt[..4], &pt[4..]);
        let (np, nm) = w.projection_norms(star);
        c = c.max((np - nm).abs());
    }
    let mut equal_generic = 0usize;
    for _ in 0..samples {
        let w = Bivector4(linalg::random_unit(&mut rng, 6).try_into().expect("six components"));
        if w.pfaffian_form().abs() > 1e-3 {
            let (np, nm) = w.projection_norms(star);
            if (np - nm).abs() < 1e-6 {
                equal_generic += 1;
            }
        }
    }

    // (d) the stretch factor is √2
    let spec = spectral_estimate(&p, samples, seed)?;
    let d = (spec.sup - SQRT_2).abs();

    // (e) uV = {(x, ux)} is a round 3-sphere of radius √2 in ℝ⁸
    let u = random_pure_unit(&mut rng);
    let mut e = 0.0f64;
    for _ in 0..samples {
        let x = Quaternion::from_slice(&linalg::random_unit(&mut rng, 4));
        let y = Quaternion::from_slice(&linalg::random_unit(&mut rng, 4));
        let mut px = x.to_array().to_vec();
        px.extend_from_slice(&(u * x).to_array());
        let mut py = y.to_array().to_vec();
        py.extend_from_slice(&(u * y).to_array());
        let intrinsic = stiefel.distance(&px, &py);
        let round = SQRT_2 * linalg::angle_between(&px, &py);
        let chord = linalg::dist(&px, &py);
        let round_chord = 2.0 * SQRT_2 * (linalg::angle_between(&px, &py) / 2.0).sin();
        e = e.max((intrinsic - round).abs()).max((chord - round_chord).abs());
    }

    Ok(VerificationReport::composite(
        "theorem-d",
        vec![
            VerificationReport::leaf("fiber-formula", a, 1e-12),
            VerificationReport::leaf("pure-imaginary", b, 1e-12),
            VerificationReport::leaf("decomposable-split", c, 1e-12),
            VerificationReport::leaf("generic-split", equal_generic as f64, 0.5),
            VerificationReport::leaf("stretch", d, 1e-5).param("spectral_sup", spec.sup),
            VerificationReport::leaf("round-subsphere", e, 1e-9),
        ],
    )
    .param("samples", samples)
    .seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::bump_perturb;
    use nalgebra::DMatrix;

    #[test]
    fn profile_invariants() {
        let p = build_profile();
        p.validate().unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(1.0), 1.0);
        assert!((p.eval(1.0 / 3.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(p.reflection_defect(10_000) < 1e-12);
        assert!((p.slope_at_start() - 2.0).abs() < 1e-12);
        assert!((p.slope_at_end() - 0.5).abs() < 1e-12);
        assert!((0..1000).all(|k| {
            let x = (k as f64 + 0.5) / 1000.0;
            p.eval(x) > x
        }));
    }

    #[test]
    fn invalid_profiles() {
        for b in [
            vec![[0.0, 0.0]],
            vec![[0.0, 0.1], [1.0, 1.0]],
            vec![[0.0, 0.0], [0.5, 0.6], [0.4, 0.7], [1.0, 1.0]],
            vec![[0.0, 0.0], [0.5, 0.5], [0.6, 0.5], [1.0, 1.0]],
        ] {
            assert!(Profile { breakpoints: b }.validate().is_err());
        }
    }

    #[test]
    fn profile_sphere_map_checks_pass() {
        let r = lemma_f_checks(2, 1000, 1).unwrap();
        assert!(r.pass, "{r:#?}");
        let disp = r.subcheck("fixed-points").unwrap().parameters["min_displacement"]
            .as_f64()
            .unwrap();
        assert!(disp > 0.05);
    }

    #[test]
    fn report_invariant() {
        let r = VerificationReport::leaf("x", 0.5, 1.0);
        assert!(r.pass);
        let r = VerificationReport::leaf("x", f64::NAN, 1.0);
        assert!(!r.pass);
        let c = VerificationReport::composite(
            "c",
            vec![
                VerificationReport::leaf("a", 1e-13, 1e-12),
                VerificationReport::leaf("b", 2.0, 1.0),
            ],
        );
        assert!(!c.pass && c.residual == 2.0 && c.tolerance == 1.0);
    }

    #[test]
    fn antipodal_search_identity_and_rotations() {
        let id = MapDescriptor::Identity { n: 2 }.build().unwrap();
        let r = key_lemma_search(&id, &id, &KeyLemmaConfig::default()).unwrap();
        assert!(r.residual < 1e-10);
        assert!(linalg::dist(&r.u, &linalg::scale(&r.v, -1.0)) < 1e-5);
        let rot = |s| {
            MapDescriptor::IsometryConjugate {
                inner: Box::new(MapDescriptor::Identity { n: 3 }),
                domain: Isometry::Identity,
                codomain: Isometry::RandomRotation { seed: s },
            }
            .build()
            .unwrap()
        };
        let r = key_lemma_search(&rot(1), &rot(2), &KeyLemmaConfig::default()).unwrap();
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn antipodal_search_with_bump() {
        let rot = MapDescriptor::IsometryConjugate {
            inner: Box::new(MapDescriptor::Identity { n: 2 }),
            domain: Isometry::Identity,
            codomain: Isometry::RandomRotation { seed: 3 },
        };
        let bump = bump_perturb(&MapDescriptor::Identity { n: 2 }, &[0.0, 0.6, 0.8], 0.3, 1.0).unwrap();
        let r = key_lemma_search(
            &rot.build().unwrap(),
            &bump.build().unwrap(),
            &KeyLemmaConfig::default(),
        )
        .unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
    }

    #[test]
    fn vector_field_graph_checks_and_corruption() {
        let j = OrthogonalComplexStructure::standard(4).unwrap();
        let r = theorem_c_checks(&j, 1000, 1).unwrap();
        assert!(r.pass, "{r:#?}");
        let j8 = random_ocs(8, 5).unwrap();
        assert!(theorem_c_checks(&j8, 200, 2).unwrap().pass);
        let mut m = j.matrix().clone();
        m[(1, 0)] = 1.1;
        let bad = OrthogonalComplexStructure::from_matrix_unchecked(m).unwrap();
        let r = theorem_c_checks(&bad, 200, 1).unwrap();
        assert!(!r.subcheck("unit-tangent").unwrap().pass);
    }

    #[test]
    fn stiefel_identities_and_hodge_control() {
        let r = theorem_d_checks(7).unwrap();
        assert!(r.pass, "{r:#?}");
        let bad = theorem_d_checks_with(7, 200, &HodgeStar::with_flipped_sign(0)).unwrap();
        assert!(!bad.subcheck("decomposable-split").unwrap().pass);
    }

    #[test]
    fn e12_projections() {
        let w = Bivector4::wedge(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]);
        let (a, b) = w.projection_norms(&HodgeStar::standard());
        assert!((a - 0.5f64.sqrt()).abs() < 1e-15 && (b - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sasaki_check_passes() {
        assert!(sasaki_lengths_check(4096).unwrap().pass);
    }

    #[test]
    fn hopf_fiber_geometry() {
        let m = MapDescriptor::hopf().build().unwrap();
        let cfg = TraceConfig::default();
        let values = sample_values(&m, 4, 3).unwrap();
        assert!(verify_great_circle_fibers(&m, &values, 1e-6, &cfg).unwrap().pass);
        let pairs = vec![
            (values[0].clone(), values[1].clone()),
            (values[2].clone(), values[3].clone()),
        ];
        assert!(verify_parallel_fibers(&m, &pairs, 1e-6, &cfg).unwrap().pass);
        assert!(verify_torus(&m, &values[0], &values[1..], 1e-6, &cfg).unwrap().pass);
    }

    #[test]
    fn conjugated_hopf_fibers_are_great_circles() {
        let m = MapDescriptor::IsometryConjugate {
            inner: Box::new(MapDescriptor::hopf()),
            domain: Isometry::RandomRotation { seed: 1 },
            codomain: Isometry::RandomRotation { seed: 2 },
        }
        .build()
        .unwrap();
        let values = sample_values(&m, 3, 4).unwrap();
        assert!(
            verify_great_circle_fibers(&m, &values, 1e-6, &TraceConfig::default())
                .unwrap()
                .pass
        );
    }

    #[test]
    fn corrupted_conjugator_fails() {
        // conjugating by a non-orthogonal matrix is detected by (c) indirectly
        // through the structure itself
        let m = DMatrix::<f64>::identity(4, 4) * 2.0;
        assert!(OrthogonalComplexStructure::from_matrix(m, 1e-10).is_err());
    }
}
