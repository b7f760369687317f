//! Point-preimages of maps `S³ → S²(r)` traced as closed polygonal curves.
//!
//! Seeds are pulled onto the fiber by damped Gauss–Newton; each new
//! component is then followed by predictor–corrector continuation along the
//! kernel of the differential.

use std::io::{Read, Write};

use nalgebra::{DMatrix, Matrix2x3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, dot, norm};
use crate::manifolds::{Space, TangentFrame};
use crate::maps::Map;
use crate::{Error, Result};

/// Smallest singular value of the differential accepted along a fiber.
pub const RANK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    /// Number of random starting points.
    pub seeds: usize,
    /// Continuation step in radians.
    pub step: f64,
    /// Accepted `|f(p) − y|` at every curve point.
    pub tol: f64,
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            seeds: 64,
            step: 5e-3,
            tol: 1e-8,
            seed: 0,
        }
    }
}

/// A traced fiber component: a closed polygon on `S³`.
///
/// `orientation` is `0` until [`orient_fiber`] has run; afterwards the point
/// order is the induced orientation and the field is `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberCurve {
    pub points: Vec<Vec<f64>>,
    pub closed: bool,
    pub orientation: i8,
    pub residual: f64,
}

impl FiberCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Consecutive chords, including the closing one for closed curves.
    pub fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        let n = self.points.len();
        let count = if self.closed { n } else { n.saturating_sub(1) };
        (0..count).map(move |i| (&self.points[i][..], &self.points[(i + 1) % n][..]))
    }

    pub fn max_gap(&self) -> f64 {
        self.segments().map(|(a, b)| linalg::dist(a, b)).fold(0.0, f64::max)
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| linalg::dist(a, b)).sum()
    }

    /// Apply a linear map (typically a rotation of `ℝ⁴`) to every point.
    pub fn transformed(&self, g: &DMatrix<f64>) -> FiberCurve {
        FiberCurve {
            points: self.points.iter().map(|p| linalg::mat_vec(g, p)).collect(),
            ..self.clone()
        }
    }

    pub fn reversed(&self) -> FiberCurve {
        let mut c = self.clone();
        c.points.reverse();
        c
    }

    /// Write `index,x0,x1,x2,x3` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "x0", "x1", "x2", "x3"])?;
        for (i, p) in self.points.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(p.iter().map(|v| format!("{v:?}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Read a closed, oriented curve back from [`FiberCurve::write_csv`]
    /// output. The residual is unknown and set to NaN.
    pub fn read_csv<R: Read>(r: R) -> Result<FiberCurve> {
        let mut rd = csv::Reader::from_reader(r);
        let mut points = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::MalformedCurve(format!("row {row}: expected 5 fields")));
            }
            let idx: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::MalformedCurve(format!("row {row}: bad index")))?;
            if idx != row {
                return Err(Error::MalformedCurve(format!("row {row}: index {idx} out of order")));
            }
            let p = (1..5)
                .map(|k| {
                    rec[k]
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::MalformedCurve(format!("row {row}: bad coordinate")))
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(p);
        }
        Ok(FiberCurve {
            points,
            closed: true,
            orientation: 1,
            residual: f64::NAN,
        })
    }
}

struct Tracer<'a> {
    map: &'a Map,
    y: Vec<f64>,
    y_frame: TangentFrame,
    sphere: Space,
    cfg: TraceConfig,
}

/// Jacobian of `f` at `p`: codomain ambient vectors of the pushforwards of
/// the tangent frame at `p`.
struct Jac {
    frame: TangentFrame,
    cols: DMatrix<f64>,
}

const FD_STEP: f64 = 1e-6;

impl<'a> Tracer<'a> {
    fn new(map: &'a Map, y: &[f64], cfg: TraceConfig) -> Result<Self> {
        if *map.domain() != Space::sphere(3, 1.0) || !matches!(map.codomain(), Space::Sphere { dim: 2, .. }) {
            return Err(Error::InvalidArgument(
                "fiber tracing needs a map from the unit S³ to a 2-sphere".into(),
            ));
        }
        if !(1e-4..=1e-1).contains(&cfg.step) {
            return Err(Error::InvalidArgument(format!(
                "step {} outside [1e-4, 1e-1]",
                cfg.step
            )));
        }
        if cfg.seeds == 0 || !(cfg.tol > 0.0) {
            return Err(Error::InvalidArgument(
                "need at least one seed and a positive tolerance".into(),
            ));
        }
        map.codomain().check(y, 1e-9)?;
        Ok(Tracer {
            map,
            y: y.to_vec(),
            y_frame: map.codomain().tangent_frame(y)?,
            sphere: Space::sphere(3, 1.0),
            cfg,
        })
    }

    fn residual(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::sub(&self.map.eval_raw(p)?, &self.y))
    }

    fn jacobian(&self, p: &[f64]) -> Result<Jac> {
        let frame = self.sphere.tangent_frame(p)?;
        let mut cols = DMatrix::zeros(3, 3);
        for (j, e) in frame.basis.iter().enumerate() {
            let fp = self.map.eval_raw(&self.sphere.retract(&linalg::axpy(p, FD_STEP, e)))?;
            let fm = self.map.eval_raw(&self.sphere.retract(&linalg::axpy(p, -FD_STEP, e)))?;
            for i in 0..3 {
                cols[(i, j)] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
            }
        }
        Ok(Jac { frame, cols })
    }

    /// The differential in the codomain frame at `y`: a 2×3 matrix.
    fn reduced(&self, jac: &Jac) -> Matrix2x3<f64> {
        let mut a = Matrix2x3::zeros();
        for (i, b) in self.y_frame.basis.iter().enumerate() {
            for j in 0..3 {
                a[(i, j)] = (0..3).map(|k| b[k] * jac.cols[(k, j)]).sum();
            }
        }
        a
    }

    fn sigma_min(a: &Matrix2x3<f64>) -> f64 {
        let g = a * a.transpose();
        let (p, q, r) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        (mean - rad).max(0.0).sqrt()
    }

    /// Unit kernel direction of the differential, as an ambient vector.
    fn kernel(&self, jac: &Jac) -> Result<Vec<f64>> {
        let a = self.reduced(jac);
        let s = Self::sigma_min(&a);
        if s <= RANK_TOL {
            return Err(Error::RankDeficient(s));
        }
        let r0 = Vector3::new(a[(0, 0)], a[(0, 1)], a[(0, 2)]);
        let r1 = Vector3::new(a[(1, 0)], a[(1, 1)], a[(1, 2)]);
        let k = r0.cross(&r1).normalize();
        Ok(jac.frame.combine(k.as_slice()))
    }

    /// Minimum-norm Gauss–Newton update at `p` using `jac`.
    fn newton_update(&self, p: &[f64], jac: &Jac, r: &[f64], damping: f64) -> Option<Vec<f64>> {
        let pinv = jac.cols.clone().pseudo_inverse(1e-10).ok()?;
        let rv = DMatrix::from_column_slice(3, 1, r);
        let c = pinv * rv;
        let mut q = p.to_vec();
        for (k, e) in jac.frame.basis.iter().enumerate() {
            q = linalg::axpy(&q, -damping * c[k], e);
        }
        Some(self.sphere.retract(&q))
    }

    /// Pull a seed onto the fiber. Returns `None` if it does not converge.
    fn converge(&self, start: &[f64]) -> Result<Option<Vec<f64>>> {
        let mut p = start.to_vec();
        let mut res = norm(&self.residual(&p)?);
        for _ in 0..100 {
            if res < 1e-13 {
                break;
            }
            let jac = self.jacobian(&p)?;
            let r = self.residual(&p)?;
            let mut damping = 1.0;
            let mut improved = false;
            while damping > 1e-4 {
                let Some(q) = self.newton_update(&p, &jac, &r, damping) else {
                    break;
                };
                // keep steps short so a seed stays in its basin
                let q = if linalg::dist(&q, &p) > 0.5 {
                    let dir = linalg::sub(&q, &p);
                    self.sphere.retract(&linalg::axpy(&p, 0.5 / norm(&dir), &dir))
                } else {
                    q
                };
                let rq = norm(&self.residual(&q)?);
                if rq < res {
                    improved = rq < 0.999 * res;
                    p = q;
                    res = rq;
                    break;
                }
                damping *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Ok((res < self.cfg.tol * 1e-2).then_some(p))
    }

    /// Chord-Newton correction of a predicted point, reusing `jac`.
    fn correct(&self, q: &[f64], jac: &Jac) -> Result<Option<(Vec<f64>, f64)>> {
        let mut q = q.to_vec();
        let mut prev = f64::INFINITY;
        for _ in 0..12 {
            let r = self.residual(&q)?;
            let nr = norm(&r);
            if nr < 1e-13 || (nr > 0.5 * prev && nr < self.cfg.tol * 1e-2) {
                break;
            }
            prev = nr;
            match self.newton_update(&q, jac, &r, 1.0) {
                Some(next) => q = next,
                None => return Ok(None),
            }
        }
        let res = norm(&self.residual(&q)?);
        Ok((res < self.cfg.tol * 1e-1).then_some((q, res)))
    }

    fn follow(&self, start: Vec<f64>) -> Result<FiberCurve> {
        let step = self.cfg.step;
        let max_points = (64.0 * std::f64::consts::PI / step) as usize;
        let jac0 = self.jacobian(&start)?;
        let t_start = self.kernel(&jac0)?;
        let mut residual = norm(&self.residual(&start)?);
        let mut points = vec![start.clone()];
        let (mut p, mut t, mut jac) = (start.clone(), t_start.clone(), jac0);
        let mut h = step;
        loop {
            if points.len() > max_points {
                return Err(Error::Unclosed(points.len()));
            }
            let predicted = self.sphere.retract(&linalg::axpy(&p, h, &t));
            let accepted = match self.correct(&predicted, &jac)? {
                Some((q, res)) => {
                    let gap = linalg::dist(&q, &p);
                    if gap > 0.5 * h && gap < 1.5 * h {
                        let jq = self.jacobian(&q)?;
                        let mut tq = self.kernel(&jq)?;
                        let c = dot(&tq, &t);
                        if c < 0.0 {
                            tq = linalg::scale(&tq, -1.0);
                        }
                        (c.abs() > 0.5).then_some((q, res, jq, tq))
                    } else {
                        None
                    }
                }
                None => None,
            };
            let Some((q, res, jq, tq)) = accepted else {
                h *= 0.5;
                if h < step / 1024.0 {
                    return Err(Error::StepCollapse(h));
                }
                continue;
            };
            residual = residual.max(res);
            points.push(q.clone());
            (p, t, jac) = (q, tq, jq);
            h = (2.0 * h).min(step);
            if points.len() > 10 && dot(&t, &t_start) > 0.9 {
                let back = linalg::dist(&p, &start);
                if back < step {
                    break;
                }
            }
        }
        Ok(FiberCurve {
            points,
            closed: true,
            orientation: 0,
            residual,
        })
    }
}

/// All components of `f⁻¹(y)` reachable from `cfg.seeds` random starts.
pub fn trace_fiber(m: &Map, y: &[f64], cfg: &TraceConfig) -> Result<Vec<FiberCurve>> {
    let tracer = Tracer::new(m, y, *cfg)?;
    let mut rng = linalg::seeded_rng(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.seeds).map(|_| linalg::random_unit(&mut rng, 4)).collect();
    let landed: Vec<Option<Vec<f64>>> = starts.par_iter().map(|s| tracer.converge(s)).collect::<Result<_>>()?;
    let mut curves: Vec<FiberCurve> = Vec::new();
    for p in landed.into_iter().flatten() {
        let known = curves.iter().any(|c| point_curve_gap(&p, c) < 2.0 * cfg.step);
        if known {
            continue;
        }
        let curve = tracer.follow(p)?;
        if curves.iter().all(|c| hausdorff(c, &curve) >= cfg.step) {
            curves.push(curve);
        }
    }
    if curves.is_empty() {
        return Err(Error::NoPreimage);
    }
    Ok(curves)
}

fn point_curve_gap(p: &[f64], c: &FiberCurve) -> f64 {
    c.points
        .iter()
        .map(|q| linalg::dist(p, q))
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric Hausdorff distance between the vertex sets.
pub fn hausdorff(a: &FiberCurve, b: &FiberCurve) -> f64 {
    let one = |x: &FiberCurve, y: &FiberCurve| x.points.iter().map(|p| point_curve_gap(p, y)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

/// Orient a traced curve by the preimage-orientation recipe: if `(e₁, e₂)`
/// spans the normal plane at `p` with `df(e₁), df(e₂)` positive on the
/// codomain sphere (outward normal first), then `(e₁, e₂, t)` must be
/// positive on `S³`.
///
/// The result starts at the vertex with the largest first coordinate and
/// runs in the oriented direction, so the output does not depend on the
/// input's start or direction.
pub fn orient_fiber(m: &Map, curve: &FiberCurve) -> Result<FiberCurve> {
    let n = curve.points.len();
    if n < 3 || !curve.closed {
        return Err(Error::MalformedCurve("orientation needs a closed curve".into()));
    }
    let k = (0..n)
        .max_by(|&a, &b| curve.points[a][0].total_cmp(&curve.points[b][0]).then(b.cmp(&a)))
        .expect("nonempty");
    let mut pts: Vec<Vec<f64>> = curve.points[k..].to_vec();
    pts.extend_from_slice(&curve.points[..k]);
    let p = &pts[0];
    let y = m.eval_raw(p)?;
    let tracer = Tracer::new(m, &y, TraceConfig::default())?;
    let jac = tracer.jacobian(p)?;
    let s = Tracer::sigma_min(&tracer.reduced(&jac));
    if s <= RANK_TOL {
        return Err(Error::RankDeficient(s));
    }
    let t = linalg::normalized(&tracer.sphere.project_tangent(p, &linalg::sub(&pts[1], &pts[n - 1])))
        .ok_or_else(|| Error::MalformedCurve("repeated points".into()))?;
    let mut normal = Vec::with_capacity(2);
    for e in &jac.frame.basis {
        let r = linalg::reject(&linalg::reject(e, std::slice::from_ref(&t)), &normal);
        if let Some(u) = linalg::normalized(&r) {
            if normal.len() < 2 {
                normal.push(u);
            }
        }
    }
    let push = |v: &[f64]| -> Vec<f64> {
        let c = jac.frame.coordinates(v);
        (0..3).map(|i| (0..3).map(|j| jac.cols[(i, j)] * c[j]).sum()).collect()
    };
    let (d1, d2) = (push(&normal[0]), push(&normal[1]));
    if linalg::det_columns(&[&y, &d1, &d2]) < 0.0 {
        normal[1] = linalg::scale(&normal[1], -1.0);
    }
    let sign = linalg::det_columns(&[p, &normal[0], &normal[1], &t]);
    if sign < 0.0 {
        pts[1..].reverse();
    }
    Ok(FiberCurve {
        points: pts,
        closed: true,
        orientation: 1,
        residual: curve.residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreatCircleFit {
    /// Orthonormal basis of the best-fitting 2-plane.
    pub plane: [Vec<f64>; 2],
    /// Largest Euclidean distance from a point to the plane.
    pub max_residual: f64,
}

pub fn fit_great_circle(points: &[Vec<f64>]) -> Result<GreatCircleFit> {
    if points.len() < 8 {
        return Err(Error::DegenerateCloud(format!(
            "{} points, need at least 8",
            points.len()
        )));
    }
    let dim = points[0].len();
    let m = DMatrix::from_fn(points.len(), dim, |i, j| points[i][j]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let row = |i: usize| -> Vec<f64> { (0..dim).map(|j| vt[(order[i], j)]).collect() };
    let plane = [row(0), row(1)];
    let max_residual = points
        .iter()
        .map(|p| {
            let inplane = linalg::axpy(
                &linalg::scale(&plane[0], dot(p, &plane[0])),
                dot(p, &plane[1]),
                &plane[1],
            );
            linalg::dist(p, &inplane)
        })
        .fold(0.0, f64::max);
    let third = sv.get(2).copied().unwrap_or(0.0);
    if sv[1] <= 1e-12 * sv[0] || (sv[1] - third < 1e-12 && max_residual > 1e-6) {
        return Err(Error::DegenerateCloud(format!("singular values {sv:?}")));
    }
    Ok(GreatCircleFit { plane, max_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub min: f64,
    pub max: f64,
}

/// Geodesic distance from `p` to the closed polygon `c`, with the nearest
/// chord refined by golden-section search on the normalised interpolation.
pub fn point_to_curve(p: &[f64], c: &FiberCurve) -> f64 {
    let n = c.points.len();
    let k = (0..n)
        .min_by(|&a, &b| linalg::dist(p, &c.points[a]).total_cmp(&linalg::dist(p, &c.points[b])))
        .expect("nonempty curve");
    let along = |a: &[f64], b: &[f64], s: f64| -> f64 {
        let q = linalg::axpy(&linalg::scale(a, 1.0 - s), s, b);
        linalg::angle_between(p, &q)
    };
    let mut best = linalg::angle_between(p, &c.points[k]);
    for (a, b) in [((k + n - 1) % n, k), (k, (k + 1) % n)] {
        if !c.closed && b != a + 1 {
            continue;
        }
        best = best.min(golden_min(|s| along(&c.points[a], &c.points[b], s), 0.0, 1.0));
    }
    best
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    f1.min(f2).min(f(lo)).min(f(hi))
}

/// Range of the distance from points of `k1` to the curve `k2`.
pub fn fiber_distance_stats(k1: &FiberCurve, k2: &FiberCurve) -> DistanceStats {
    let d: Vec<f64> = k1.points.par_iter().map(|p| point_to_curve(p, k2)).collect();
    DistanceStats {
        min: d.iter().copied().fold(f64::INFINITY, f64::min),
        max: d.iter().copied().fold(0.0, f64::max),
    }
}
