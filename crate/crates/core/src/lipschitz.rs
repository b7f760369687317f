//! Lipschitz constants, energies and loop lengths.
//!
//! Pair sampling gives lower bounds on the Lipschitz constant; the supremum of
//! the top singular value of the differential estimates it from the
//! infinitesimal side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, dot, norm, Rng};
use crate::maps::{Map, DEFAULT_STEP};
use crate::{Error, Result};

/// Separation of the local pairs.
pub const LOCAL_PAIR_DISTANCE: f64 = 1e-3;
const PAIR_ASCENT_SWEEPS: usize = 50;
const SPECTRAL_ASCENT_SWEEPS: usize = 20;
/// Largest pair separation kept on domains whose distance is only extrinsic.
const EXTRINSIC_PAIR_CAP: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub pair_lower: f64,
    pub spectral_sup: f64,
    pub witness: Witness,
    pub samples: usize,
    pub seed: u64,
}

fn ratio(m: &Map, x: &[f64], xp: &[f64]) -> Result<f64> {
    let d = m.domain().distance(x, xp);
    if !(d > 0.0) {
        return Ok(0.0);
    }
    let (fx, fxp) = (m.eval_raw(x)?, m.eval_raw(xp)?);
    Ok(m.codomain().distance(&fx, &fxp) / d)
}

fn random_tangent(m: &Map, rng: &mut Rng, x: &[f64]) -> Vec<f64> {
    loop {
        let g = linalg::gaussian_vec(rng, x.len());
        if let Some(t) = linalg::normalized(&m.domain().project_tangent(x, &g)) {
            return t;
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Largest distance ratio over seeded pairs, refined by coordinate ascent.
///
/// Half of the pairs are independent uniform samples and half are local
/// pairs at distance about [`LOCAL_PAIR_DISTANCE`]. On domains whose
/// distance is extrinsic only local pairs are used, since the extrinsic
/// distance underestimates path length and would inflate ratios.
pub fn pair_lower_bound(m: &Map, samples: usize, seed: u64) -> Result<Witness> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let intrinsic = m.domain().distance_is_intrinsic();
    let mut rng = linalg::seeded_rng(seed);
    let global = if intrinsic { samples / 2 } else { 0 };
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..global {
        pairs.push((m.domain().sample(&mut rng), m.domain().sample(&mut rng)));
    }
    for _ in global..samples {
        let x = m.domain().sample(&mut rng);
        let t = random_tangent(m, &mut rng, &x);
        let xp = m.domain().retract(&linalg::axpy(&x, LOCAL_PAIR_DISTANCE, &t));
        pairs.push((x, xp));
    }
    let ratios: Vec<f64> = pairs.par_iter().map(|(x, xp)| ratio(m, x, xp)).collect::<Result<_>>()?;
    let k = argmax(&ratios);
    let (mut x, mut xp) = pairs.swap_remove(k);
    let mut best = ratios[k];
    let mut delta = 0.25 * m.domain().distance(&x, &xp);
    for _ in 0..PAIR_ASCENT_SWEEPS {
        let mut improved = false;
        for which in 0..2 {
            let base = if which == 0 { x.clone() } else { xp.clone() };
            let frame = m.domain().tangent_frame(&base)?;
            for e in &frame.basis {
                for sign in [1.0, -1.0] {
                    let moved = m.domain().retract(&linalg::axpy(&base, sign * delta, e));
                    let (cx, cxp) = if which == 0 { (&moved, &xp) } else { (&x, &moved) };
                    if !intrinsic && m.domain().distance(cx, cxp) > EXTRINSIC_PAIR_CAP {
                        continue;
                    }
                    let r = ratio(m, cx, cxp)?;
                    if r > best {
                        best = r;
                        if which == 0 {
                            x = moved;
                        } else {
                            xp = moved;
                        }
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    Ok(Witness {
        x,
        x_prime: xp,
        ratio: best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub sup: f64,
    pub point: Vec<f64>,
}

fn top_singular(m: &Map, x: &[f64]) -> Result<f64> {
    Ok(m.differential(x, DEFAULT_STEP)?
        .singular_values()
        .first()
        .copied()
        .unwrap_or(0.0))
}

/// Supremum of `σ_max(df_x)` over seeded samples, then coordinate ascent.
pub fn spectral_estimate(m: &Map, samples: usize, seed: u64) -> Result<SpectralEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = linalg::seeded_rng(seed);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| m.domain().sample(&mut rng)).collect();
    let sigmas: Vec<f64> = points.par_iter().map(|x| top_singular(m, x)).collect::<Result<_>>()?;
    let k = argmax(&sigmas);
    let mut x = points[k].clone();
    let mut best = sigmas[k];
    let mut delta = 0.1;
    for _ in 0..SPECTRAL_ASCENT_SWEEPS {
        let frame = m.domain().tangent_frame(&x)?;
        let mut improved = false;
        for e in &frame.basis {
            for sign in [1.0, -1.0] {
                let moved = m.domain().retract(&linalg::axpy(&x, sign * delta, e));
                let s = top_singular(m, &moved)?;
                if s > best {
                    best = s;
                    x = moved;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    Ok(SpectralEstimate { sup: best, point: x })
}

pub fn lipschitz_report(m: &Map, samples: usize, seed: u64) -> Result<LipschitzReport> {
    let witness = pair_lower_bound(m, samples, seed)?;
    let spectral = spectral_estimate(m, samples, seed)?;
    Ok(LipschitzReport {
        pair_lower: witness.ratio,
        spectral_sup: spectral.sup,
        witness,
        samples,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `E(f) = ½∫‖df‖²`, with the domain volume in
/// closed form.
pub fn energy(m: &Map, samples: usize, seed: u64) -> Result<EnergyEstimate> {
    if samples < 1000 {
        return Err(Error::InvalidArgument("energy needs at least 10³ samples".into()));
    }
    let vol = m
        .domain()
        .volume()
        .ok_or_else(|| Error::Unsupported(format!("no closed-form volume for {:?}", m.domain())))?;
    let mut rng = linalg::seeded_rng(seed);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| m.domain().sample(&mut rng)).collect();
    let dens: Vec<f64> = points
        .par_iter()
        .map(|x| {
            let d = m.differential(x, DEFAULT_STEP)?;
            Ok(0.5 * d.matrix.iter().map(|v| v * v).sum::<f64>())
        })
        .collect::<Result<_>>()?;
    let n = dens.len() as f64;
    let mean = dens.iter().sum::<f64>() / n;
    let var = dens.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    Ok(EnergyEstimate {
        value: mean * vol,
        std_error: (var / n).sqrt() * vol,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Product,
    Sasaki,
}

/// Length of a polygonal curve `t ↦ (x(t), v(t))` in the unit tangent
/// bundle of a unit sphere.
///
/// Each segment contributes `sqrt(Δx² + Δv²)` with `Δx`, `Δv` the geodesic
/// increments in each factor. For the Sasaki metric `Δv` is scaled by the
/// fraction of the chord of `v` that is tangent to the sphere at the
/// segment's midpoint base point, a discrete covariant derivative.
pub fn curve_length(curve: &[(Vec<f64>, Vec<f64>)], metric: Metric) -> Result<f64> {
    let bad = |i: usize, what: &str| Err(Error::MalformedCurve(format!("point {i}: {what}")));
    if curve.len() < 2 {
        return bad(0, "need at least two points");
    }
    let n = curve[0].0.len();
    for (i, (x, v)) in curve.iter().enumerate() {
        if x.len() != n || v.len() != n {
            return bad(i, "inconsistent dimensions");
        }
        if (norm(x) - 1.0).abs() > 1e-9 || (norm(v) - 1.0).abs() > 1e-9 {
            return bad(i, "x and v must be unit vectors");
        }
        if dot(x, v).abs() > 1e-9 {
            return bad(i, "v is not tangent at x");
        }
    }
    let mut total = 0.0;
    for (i, w) in curve.windows(2).enumerate() {
        let ((x0, v0), (x1, v1)) = (&w[0], &w[1]);
        if linalg::dist(x0, x1) >= 0.1 {
            return bad(i, "consecutive base points too far apart");
        }
        let dx = linalg::angle_between(x0, x1);
        let mut dv = linalg::angle_between(v0, v1);
        if metric == Metric::Sasaki {
            let chord = linalg::sub(v1, v0);
            let c = norm(&chord);
            if c > 0.0 {
                let mid = linalg::add(x0, x1);
                let mid = linalg::scale(&mid, 1.0 / norm(&mid));
                let tangential = linalg::axpy(&chord, -dot(&chord, &mid), &mid);
                dv *= norm(&tangential) / c;
            }
        }
        total += dx.hypot(dv);
    }
    Ok(total)
}

/// The velocity lift `(x(t), x′(t))` of a unit-speed great circle in the
/// plane of `e₁, e₂`, sampled at `n + 1` points with the last equal to the
/// first.
pub fn great_circle_lift(dim: usize, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..=n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * (k % n) as f64 / n as f64;
            let mut x = vec![0.0; dim];
            let mut v = vec![0.0; dim];
            (x[0], x[1]) = (t.cos(), t.sin());
            (v[0], v[1]) = (-t.sin(), t.cos());
            (x, v)
        })
        .collect()
}
