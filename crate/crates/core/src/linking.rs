//! Linking numbers of closed curves in `S³` and the Hopf invariant.
//!
//! Curves are carried to `ℝ³` by an orientation-preserving stereographic
//! projection. The Gauss double integral and a signed crossing count of a
//! generic planar shadow are computed independently and must agree.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fibers::{orient_fiber, trace_fiber, FiberCurve, TraceConfig};
use crate::linalg::{self, dot, norm};
use crate::maps::Map;
use crate::{Error, Result};

/// Results farther than this from an integer trigger refinement.
pub const ACCEPT_GAP: f64 = 0.1;
const POLE_CANDIDATES: usize = 100;
const POLE_SEED: u64 = 0x57e7e0;
const MIN_POLE_DISTANCE: f64 = 0.2;
const MAX_JITTERS: usize = 50;
const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkingResult {
    pub raw: f64,
    pub rounded: i64,
    pub gap: f64,
}

impl LinkingResult {
    fn from_raw(raw: f64) -> Self {
        let rounded = raw.round();
        LinkingResult {
            raw,
            rounded: rounded as i64,
            gap: (raw - rounded).abs(),
        }
    }
}

pub type Point3 = [f64; 3];

/// Stereographic projection from `pole`, with the basis of `pole⊥` chosen so
/// that the map is orientation preserving.
#[derive(Debug, Clone)]
pub struct Stereographic {
    pub pole: Vec<f64>,
    basis: [Vec<f64>; 3],
}

impl Stereographic {
    pub fn new(pole: &[f64]) -> Result<Self> {
        let q = linalg::normalized(pole).ok_or_else(|| Error::InvalidArgument("zero pole".into()))?;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(3);
        for i in 0..4 {
            let mut e = vec![0.0; 4];
            e[i] = 1.0;
            let mut span = basis.clone();
            span.push(q.clone());
            let r = linalg::reject(&linalg::reject(&e, &span), &span);
            if norm(&r) > 0.1 && basis.len() < 3 {
                basis.push(linalg::scale(&r, 1.0 / norm(&r)));
            }
        }
        let neg = linalg::scale(&q, -1.0);
        if linalg::det_columns(&[&neg, &basis[0], &basis[1], &basis[2]]) < 0.0 {
            basis[2] = linalg::scale(&basis[2], -1.0);
        }
        Ok(Stereographic {
            pole: q,
            basis: [basis[0].clone(), basis[1].clone(), basis[2].clone()],
        })
    }

    /// Choose the best of a fixed set of candidate poles: the one farthest
    /// from every point of every curve.
    pub fn avoiding(curves: &[&FiberCurve]) -> Result<Self> {
        let mut rng = linalg::seeded_rng(POLE_SEED);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..POLE_CANDIDATES {
            let q = linalg::random_unit(&mut rng, 4);
            let clearance = curves
                .iter()
                .flat_map(|c| c.points.iter())
                .map(|p| linalg::angle_between(p, &q))
                .fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|(b, _)| clearance > *b) {
                best = Some((clearance, q));
            }
        }
        let (clearance, q) = best.expect("candidates");
        if clearance <= MIN_POLE_DISTANCE {
            return Err(Error::PoleSearchFailed);
        }
        Stereographic::new(&q)
    }

    pub fn project(&self, p: &[f64]) -> Point3 {
        let s = 1.0 / (1.0 - dot(p, &self.pole));
        [
            s * dot(p, &self.basis[0]),
            s * dot(p, &self.basis[1]),
            s * dot(p, &self.basis[2]),
        ]
    }

    pub fn project_curve(&self, c: &FiberCurve) -> Vec<Point3> {
        c.points.iter().map(|p| self.project(p)).collect()
    }
}

fn sub3(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn len3(a: &Point3) -> f64 {
    dot3(a, a).sqrt()
}

/// Midpoint rule for one pair of segments, each cut into `k` pieces.
fn segment_pair(a0: &Point3, a1: &Point3, b0: &Point3, b1: &Point3, k: usize) -> f64 {
    let kf = k as f64;
    let da = sub3(a1, a0).map(|v| v / kf);
    let db = sub3(b1, b0).map(|v| v / kf);
    let w = cross3(&da, &db);
    let mut total = 0.0;
    for i in 0..k {
        let s = (i as f64 + 0.5) / kf;
        let ra = [
            a0[0] + s * (a1[0] - a0[0]),
            a0[1] + s * (a1[1] - a0[1]),
            a0[2] + s * (a1[2] - a0[2]),
        ];
        for j in 0..k {
            let t = (j as f64 + 0.5) / kf;
            let rb = [
                b0[0] + t * (b1[0] - b0[0]),
                b0[1] + t * (b1[1] - b0[1]),
                b0[2] + t * (b1[2] - b0[2]),
            ];
            let r = sub3(&ra, &rb);
            let d = len3(&r);
            total += dot3(&r, &w) / (d * d * d);
        }
    }
    total
}

/// Gauss linking integral of two closed polygons in `ℝ³`.
///
/// Segment-midpoint quadrature, refined on segment pairs closer than five
/// segment lengths, and Richardson-extrapolated from the once- and
/// twice-subdivided sums.
pub fn gauss_linking_r3(a: &[Point3], b: &[Point3]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let blocks: Vec<(f64, f64)> = (0..na.div_ceil(BLOCK))
        .into_par_iter()
        .map(|blk| {
            let (mut coarse, mut fine) = (0.0, 0.0);
            for i in blk * BLOCK..((blk + 1) * BLOCK).min(na) {
                let (a0, a1) = (&a[i], &a[(i + 1) % na]);
                let la = len3(&sub3(a1, a0));
                let ma = [(a0[0] + a1[0]) / 2.0, (a0[1] + a1[1]) / 2.0, (a0[2] + a1[2]) / 2.0];
                for j in 0..nb {
                    let (b0, b1) = (&b[j], &b[(j + 1) % nb]);
                    let lb = len3(&sub3(b1, b0));
                    let mb = [(b0[0] + b1[0]) / 2.0, (b0[1] + b1[1]) / 2.0, (b0[2] + b1[2]) / 2.0];
                    let d = len3(&sub3(&ma, &mb));
                    let l = la.max(lb);
                    let k = if d < 5.0 * l {
                        ((5.0 * l / d).ceil() as usize).min(64)
                    } else {
                        1
                    };
                    coarse += segment_pair(a0, a1, b0, b1, k);
                    fine += segment_pair(a0, a1, b0, b1, 2 * k);
                }
            }
            (coarse, fine)
        })
        .collect();
    let (coarse, fine) = pairwise_sum(&blocks);
    (4.0 * fine - coarse) / 3.0 / (4.0 * PI)
}

/// Fixed-shape tree reduction so the result does not depend on scheduling.
fn pairwise_sum(v: &[(f64, f64)]) -> (f64, f64) {
    match v.len() {
        0 => (0.0, 0.0),
        1 => v[0],
        n => {
            let (l, r) = v.split_at(n / 2);
            let (a, b) = (pairwise_sum(l), pairwise_sum(r));
            (a.0 + b.0, a.1 + b.1)
        }
    }
}

fn check_separation(k1: &FiberCurve, k2: &FiberCurve) -> Result<()> {
    if !k1.closed || !k2.closed || k1.len() < 3 || k2.len() < 3 {
        return Err(Error::MalformedCurve("linking needs closed curves".into()));
    }
    let seg = k1.max_gap().max(k2.max_gap());
    let min = k1
        .points
        .par_iter()
        .map(|p| {
            k2.points
                .iter()
                .map(|q| linalg::dist(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    if min <= 10.0 * seg {
        return Err(Error::CurvesTooClose(min));
    }
    Ok(())
}

/// Linking number of two disjoint closed curves on `S³` by the Gauss
/// integral after stereographic projection.
pub fn gauss_linking(k1: &FiberCurve, k2: &FiberCurve) -> Result<LinkingResult> {
    check_separation(k1, k2)?;
    let proj = Stereographic::avoiding(&[k1, k2])?;
    let raw = gauss_linking_r3(&proj.project_curve(k1), &proj.project_curve(k2));
    Ok(LinkingResult::from_raw(raw))
}

/// Half the signed crossing count of a generic planar shadow of two closed
/// polygons in `ℝ³`. A crossing is positive when the over-strand turns
/// counterclockwise onto the under-strand, seen from the viewer.
pub fn crossing_linking_r3(a: &[Point3], b: &[Point3], seed: u64) -> Result<i64> {
    let mut rng = linalg::seeded_rng(seed);
    for _ in 0..MAX_JITTERS {
        let d = linalg::random_unit(&mut rng, 3);
        let view = [d[0], d[1], d[2]];
        if let Some(total) = signed_crossings(a, b, &view) {
            if total % 2 == 0 {
                return Ok(total / 2);
            }
        }
    }
    Err(Error::NoGenericProjection(MAX_JITTERS))
}

/// Sum of crossing signs, or `None` when the projection is not generic.
fn signed_crossings(a: &[Point3], b: &[Point3], view: &Point3) -> Option<i64> {
    let helper = if view[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let u = {
        let c = cross3(&helper, view);
        let l = len3(&c);
        c.map(|x| x / l)
    };
    let v = cross3(view, &u);
    let flat = |p: &Point3| [dot3(p, &u), dot3(p, &v), dot3(p, view)];
    let fa: Vec<Point3> = a.iter().map(flat).collect();
    let fb: Vec<Point3> = b.iter().map(flat).collect();
    let scale = fa
        .iter()
        .chain(&fb)
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(1e-300, f64::max);
    let eps = 1e-12 * scale;
    let (na, nb) = (fa.len(), fb.len());
    let partial: Vec<Option<i64>> = (0..na)
        .into_par_iter()
        .map(|i| {
            let (p0, p1) = (&fa[i], &fa[(i + 1) % na]);
            let (pminx, pmaxx) = (p0[0].min(p1[0]), p0[0].max(p1[0]));
            let (pminy, pmaxy) = (p0[1].min(p1[1]), p0[1].max(p1[1]));
            let mut total = 0i64;
            for j in 0..nb {
                let (q0, q1) = (&fb[j], &fb[(j + 1) % nb]);
                if q0[0].max(q1[0]) < pminx - eps
                    || q0[0].min(q1[0]) > pmaxx + eps
                    || q0[1].max(q1[1]) < pminy - eps
                    || q0[1].min(q1[1]) > pmaxy + eps
                {
                    continue;
                }
                let dp = [p1[0] - p0[0], p1[1] - p0[1]];
                let dq = [q1[0] - q0[0], q1[1] - q0[1]];
                let w = [q0[0] - p0[0], q0[1] - p0[1]];
                let denom = dp[0] * dq[1] - dp[1] * dq[0];
                let lp = dp[0].hypot(dp[1]);
                let lq = dq[0].hypot(dq[1]);
                if denom.abs() <= 1e-12 * lp * lq {
                    // parallel shadows: generic only if clearly apart
                    let off = (w[0] * dp[1] - w[1] * dp[0]).abs() / lp.max(1e-300);
                    if off <= eps {
                        return None;
                    }
                    continue;
                }
                let s = (w[0] * dq[1] - w[1] * dq[0]) / denom;
                let t = (w[0] * dp[1] - w[1] * dp[0]) / denom;
                let tol = 1e-9;
                if s < -tol || s > 1.0 + tol || t < -tol || t > 1.0 + tol {
                    continue;
                }
                if s.abs() <= tol || (s - 1.0).abs() <= tol || t.abs() <= tol || (t - 1.0).abs() <= tol {
                    return None;
                }
                let za = p0[2] + s * (p1[2] - p0[2]);
                let zb = q0[2] + t * (q1[2] - q0[2]);
                if (za - zb).abs() <= eps {
                    return None;
                }
                let c = if za > zb { denom } else { -denom };
                total += if c > 0.0 { 1 } else { -1 };
            }
            Some(total)
        })
        .collect();
    partial.into_iter().sum()
}

/// Independent linking number from signed crossings, for curves on `S³`.
pub fn crossing_linking(k1: &FiberCurve, k2: &FiberCurve) -> Result<i64> {
    check_separation(k1, k2)?;
    let proj = Stereographic::avoiding(&[k1, k2])?;
    crossing_linking_r3(&proj.project_curve(k1), &proj.project_curve(k2), POLE_SEED)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfConfig {
    pub trace: TraceConfig,
    /// Step-halving rounds allowed when the Gauss value is not near an
    /// integer.
    pub refinements: usize,
    /// Re-draws of a value that turns out not to be regular.
    pub jitter_attempts: usize,
    pub jitter_radius: f64,
}

impl Default for HopfConfig {
    fn default() -> Self {
        HopfConfig {
            trace: TraceConfig::default(),
            refinements: 3,
            jitter_attempts: 5,
            jitter_radius: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfInvariant {
    pub value: i64,
    pub gauss: LinkingResult,
    pub crossings: i64,
    /// The regular values actually used (after any jitter).
    pub values: [Vec<f64>; 2],
    pub components: [usize; 2],
    pub step: f64,
    #[serde(skip)]
    pub fibers: [Vec<FiberCurve>; 2],
}

fn trace_regular(m: &Map, y: &[f64], cfg: &HopfConfig, salt: u64) -> Result<(Vec<f64>, Vec<FiberCurve>)> {
    let mut rng = linalg::seeded_rng(cfg.trace.seed ^ (salt << 32));
    let mut value = y.to_vec();
    for attempt in 0..=cfg.jitter_attempts {
        match trace_fiber(m, &value, &cfg.trace) {
            Ok(curves) => {
                let oriented = curves.iter().map(|c| orient_fiber(m, c)).collect::<Result<Vec<_>>>();
                match oriented {
                    Ok(o) => return Ok((value, o)),
                    Err(Error::RankDeficient(s)) if attempt < cfg.jitter_attempts => {
                        let _ = s;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::NoPreimage) => return Ok((value, Vec::new())),
            Err(Error::RankDeficient(_)) if attempt < cfg.jitter_attempts => {}
            Err(e) => return Err(e),
        }
        let t = m
            .codomain()
            .project_tangent(y, &linalg::gaussian_vec(&mut rng, y.len()));
        let t = linalg::scale(&t, cfg.jitter_radius / norm(&t).max(1e-300));
        value = m.codomain().retract(&linalg::add(y, &t));
    }
    unreachable!("the last attempt returns")
}

/// Total linking number of the preimages of two regular values.
pub fn hopf_invariant(m: &Map, y: &[f64], y2: &[f64], cfg: &HopfConfig) -> Result<HopfInvariant> {
    m.codomain().check(y, 1e-9)?;
    m.codomain().check(y2, 1e-9)?;
    let sep = m.codomain().distance(y, y2);
    if sep <= 0.1 {
        return Err(Error::InvalidArgument(format!(
            "regular values must be more than 0.1 apart, got {sep}"
        )));
    }
    let mut last_gap = f64::NAN;
    for round in 0..=cfg.refinements {
        let mut c = *cfg;
        c.trace.step = cfg.trace.step / f64::powi(2.0, round as i32);
        if c.trace.step < 1e-4 {
            break;
        }
        let (v1, f1) = trace_regular(m, y, &c, 1)?;
        let (v2, f2) = trace_regular(m, y2, &c, 2)?;
        let mut raw = 0.0;
        let mut crossings = 0;
        for a in &f1 {
            for b in &f2 {
                raw += gauss_linking(a, b)?.raw;
                crossings += crossing_linking(a, b)?;
            }
        }
        let gauss = LinkingResult::from_raw(raw);
        if gauss.gap < ACCEPT_GAP {
            if gauss.rounded != crossings {
                return Err(Error::OracleDisagreement {
                    gauss: raw,
                    rounded: gauss.rounded,
                    crossings,
                });
            }
            return Ok(HopfInvariant {
                value: gauss.rounded,
                gauss,
                crossings,
                values: [v1, v2],
                components: [f1.len(), f2.len()],
                step: c.trace.step,
                fibers: [f1, f2],
            });
        }
        last_gap = gauss.gap;
    }
    Err(Error::LinkingGap(last_gap))
}

/// Default pair of regular values on `S²(r)`: generic points away from the
/// poles and from each other.
pub fn default_values(radius: f64) -> [Vec<f64>; 2] {
    let a = [0.3, -0.5, 0.8];
    let b = [-0.6, 0.2, -0.7];
    [
        linalg::scale(&a, radius / norm(&a)),
        linalg::scale(&b, radius / norm(&b)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapDescriptor;

    fn circle(center: Point3, e1: Point3, e2: Point3, r: f64, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let (c, s) = (r * t.cos(), r * t.sin());
                [
                    center[0] + c * e1[0] + s * e2[0],
                    center[1] + c * e1[1] + s * e2[1],
                    center[2] + c * e1[2] + s * e2[2],
                ]
            })
            .collect()
    }

    #[test]
    fn textbook_link_sign() {
        // K1 counterclockwise about +z; K2 pierces its disc downwards at the
        // origin, so the intersection number with the spanning disc is −1
        let k1 = circle([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 400);
        let k2 = circle([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0, 400);
        let g = gauss_linking_r3(&k1, &k2);
        assert!((g + 1.0).abs() < 1e-4, "{g}");
        assert_eq!(crossing_linking_r3(&k1, &k2, 1).unwrap(), -1);
        let rev: Vec<Point3> = k2.iter().rev().copied().collect();
        assert!((gauss_linking_r3(&k1, &rev) - 1.0).abs() < 1e-4);
        assert_eq!(crossing_linking_r3(&k1, &rev, 1).unwrap(), 1);
    }

    #[test]
    fn separated_circles_do_not_link() {
        let k1 = circle([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 300);
        let k2 = circle([5.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.5, 300);
        assert!(gauss_linking_r3(&k1, &k2).abs() < 1e-6);
        assert_eq!(crossing_linking_r3(&k1, &k2, 3).unwrap(), 0);
    }

    #[test]
    fn doubly_wound_torus_knot_links_twice() {
        // (1,2)-curve on a torus around the core circle winds twice round it
        let core = circle([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 2.0, 400);
        let n = 800;
        let knot: Vec<Point3> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let (big, small) = (2.0 + 0.5 * (2.0 * t).cos(), 0.5 * (2.0 * t).sin());
                [big * t.cos(), big * t.sin(), small]
            })
            .collect();
        let g = gauss_linking_r3(&core, &knot);
        assert!((g.abs() - 2.0).abs() < 1e-3, "{g}");
        assert_eq!(crossing_linking_r3(&core, &knot, 5).unwrap() as f64, g.round());
    }

    fn hopf_fibers() -> (Map, FiberCurve, FiberCurve) {
        let m = MapDescriptor::hopf().build().unwrap();
        let [y1, y2] = default_values(0.5);
        let cfg = TraceConfig::default();
        let a = orient_fiber(&m, &trace_fiber(&m, &y1, &cfg).unwrap()[0]).unwrap();
        let b = orient_fiber(&m, &trace_fiber(&m, &y2, &cfg).unwrap()[0]).unwrap();
        (m, a, b)
    }

    #[test]
    fn hopf_fibers_link_once() {
        let (_, a, b) = hopf_fibers();
        let g = gauss_linking(&a, &b).unwrap();
        assert_eq!(g.rounded.abs(), 1);
        assert!(g.gap < 0.02);
        assert_eq!(crossing_linking(&a, &b).unwrap(), g.rounded);
        let sym = gauss_linking(&b, &a).unwrap();
        assert!((sym.raw - g.raw).abs() < 1e-9);
        let rev = gauss_linking(&a.reversed(), &b).unwrap();
        assert!((rev.raw + g.raw).abs() < 1e-9);
    }

    #[test]
    fn linking_is_rotation_invariant() {
        let (_, a, b) = hopf_fibers();
        let g = gauss_linking(&a, &b).unwrap().raw;
        for seed in 0..5 {
            let r = linalg::random_rotation(4, seed);
            let h = gauss_linking(&a.transformed(&r), &b.transformed(&r)).unwrap().raw;
            assert!((g - h).abs() < 1e-6, "{g} {h}");
        }
    }

    #[test]
    fn too_close_curves_are_rejected() {
        let (_, a, _) = hopf_fibers();
        assert!(matches!(gauss_linking(&a, &a), Err(Error::CurvesTooClose(_))));
    }

    #[test]
    fn hopf_invariant_of_the_hopf_map() {
        let m = MapDescriptor::hopf().build().unwrap();
        let [y1, y2] = default_values(0.5);
        let h = hopf_invariant(&m, &y1, &y2, &HopfConfig::default()).unwrap();
        // sign pinned for outward-normal, right-handed conventions on ℝ⁴ and ℝ³
        assert_eq!(h.value, 1);
        assert_eq!(h.components, [1, 1]);
        assert!(h.gauss.gap < 0.02);
    }

    #[test]
    fn power_maps_multiply_the_invariant() {
        let [y1, y2] = default_values(0.5);
        for d in [-2, -1, 0, 1, 2, 3] {
            let m = crate::maps::power_precompose(&MapDescriptor::hopf(), d)
                .unwrap()
                .build()
                .unwrap();
            let h = hopf_invariant(&m, &y1, &y2, &HopfConfig::default()).unwrap();
            assert_eq!(h.value, d as i64, "d = {d}: {h:?}");
        }
    }
}
