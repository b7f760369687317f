use std::f64::consts::PI;

use hopfmin::cli::{execute, CommandKind, RunConfig};
use hopfmin::fibers::{fit_great_circle, hausdorff, trace_fiber, FiberCurve, TraceConfig};
use hopfmin::linalg::{self, mat_vec};
use hopfmin::linking::{crossing_linking, default_values, gauss_linking, hopf_invariant, HopfConfig};
use hopfmin::lipschitz::{energy, lipschitz_report};
use hopfmin::maps::{Isometry, MapDescriptor};
use hopfmin::verify::{profile_sphere_map, Profile, VerificationReport};
use proptest::prelude::*;

const FAMILIES: &[&str] = &[
    "hopf",
    "hopf-complex(2)",
    "hopf-quat",
    "hopf-oct",
    "diagonal(3)",
    "hopf-vf",
    "stiefel-quat",
    "stiefel-pluecker",
    "power(2)",
    "power(-1)",
    "bump(0.1,0.5)",
    "suspend(hopf)",
];

/// The circle `t ↦ e^{it}·p` through `p ∈ S³ ⊂ ℂ²`.
fn hopf_circle(p: &[f64], n: usize) -> FiberCurve {
    let points = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            let (c, s) = (t.cos(), t.sin());
            vec![
                c * p[0] - s * p[1],
                s * p[0] + c * p[1],
                c * p[2] - s * p[3],
                s * p[2] + c * p[3],
            ]
        })
        .collect();
    FiberCurve {
        points,
        closed: true,
        orientation: 1,
        residual: 0.0,
    }
}

fn circle_distance(a: &FiberCurve, b: &FiberCurve) -> f64 {
    a.points
        .iter()
        .flat_map(|p| b.points.iter().map(move |q| linalg::dist(p, q)))
        .fold(f64::INFINITY, f64::min)
}

/// Profiles with the reflection symmetry, from an increasing chain below
/// the antidiagonal and its mirror image.
fn symmetric_profile() -> impl Strategy<Value = Profile> {
    prop::collection::vec((0.05f64..1.0, 0.05f64..1.0), 0..4).prop_map(|steps| {
        let (mut x, mut y) = (0.0, 0.0);
        let mut chain = Vec::new();
        for (dx, dy) in &steps {
            x += dx;
            y += dy;
            chain.push((x, y));
        }
        let s = 0.9 / (x + y).max(1e-9);
        let mut b = vec![[0.0, 0.0]];
        b.extend(chain.iter().map(|&(x, y)| [s * x, s * y]));
        b.extend(chain.iter().rev().map(|&(x, y)| [1.0 - s * y, 1.0 - s * x]));
        b.push([1.0, 1.0]);
        Profile { breakpoints: b }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_family_lands_in_its_codomain(family in 0..FAMILIES.len(), seed in any::<u64>()) {
        let m = MapDescriptor::builtin(FAMILIES[family]).unwrap().build().unwrap();
        let mut rng = linalg::seeded_rng(seed);
        for _ in 0..50 {
            let x = m.domain().sample(&mut rng);
            let y = m.evaluate(&x).unwrap();
            prop_assert!(m.codomain().check(&y, 1e-12).is_ok());
        }
    }

    #[test]
    fn conjugation_preserves_singular_values(s1 in any::<u64>(), s2 in any::<u64>(), seed in any::<u64>()) {
        let inner = MapDescriptor::builtin("hopf-quat").unwrap();
        let conj = MapDescriptor::IsometryConjugate {
            inner: Box::new(inner.clone()),
            domain: Isometry::RandomRotation { seed: s1 },
            codomain: Isometry::RandomRotation { seed: s2 },
        };
        let (a, b) = (inner.build().unwrap(), conj.build().unwrap());
        let g = Isometry::RandomRotation { seed: s1 }.resolve(a.domain()).unwrap();
        let mut rng = linalg::seeded_rng(seed);
        for _ in 0..5 {
            let x = a.domain().sample(&mut rng);
            let sa = a.singular_values(&x).unwrap();
            let sb = b.singular_values(&mat_vec(&g, &x)).unwrap();
            for (u, v) in sa.iter().zip(&sb) {
                prop_assert!((u - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn hopf_circles_link_once(seed in any::<u64>()) {
        let mut rng = linalg::seeded_rng(seed);
        let p = linalg::random_unit(&mut rng, 4);
        let q = linalg::random_unit(&mut rng, 4);
        let (k1, k2) = (hopf_circle(&p, 400), hopf_circle(&q, 400));
        prop_assume!(circle_distance(&k1, &k2) > 0.3);
        let a = gauss_linking(&k1, &k2).unwrap();
        let b = gauss_linking(&k2, &k1).unwrap();
        prop_assert_eq!(a.rounded.abs(), 1);
        prop_assert!((a.raw - b.raw).abs() < 1e-9);
        prop_assert!(a.gap < 0.02);
        prop_assert_eq!(crossing_linking(&k1, &k2).unwrap(), a.rounded);
        let r = linalg::random_rotation(4, seed ^ 0x5eed);
        let c = gauss_linking(&k1.transformed(&r), &k2.transformed(&r)).unwrap();
        prop_assert!((c.raw - a.raw).abs() < 1e-6);
        let rev = gauss_linking(&k1.reversed(), &k2).unwrap();
        prop_assert!((rev.raw + a.raw).abs() < 1e-9);
    }

    #[test]
    fn report_pass_iff_residual_below_tolerance(r in -1e3f64..1e3, t in 1e-15f64..1e3) {
        let rep = VerificationReport::leaf("x", r, t);
        prop_assert_eq!(rep.pass, r < t);
        let c = VerificationReport::composite("c", vec![rep.clone(), VerificationReport::leaf("y", 0.0, 1.0)]);
        prop_assert_eq!(c.pass, rep.pass);
        prop_assert_eq!(c.pass, c.residual < c.tolerance);
    }

    #[test]
    fn symmetric_profiles_give_involutions(p in symmetric_profile(), seed in any::<u64>()) {
        p.validate().unwrap();
        prop_assert!(p.reflection_defect(2001) < 1e-12);
        let f = profile_sphere_map(&p, 2).unwrap().build().unwrap();
        let mut rng = linalg::seeded_rng(seed);
        for _ in 0..50 {
            let x = linalg::random_unit(&mut rng, 3);
            let once = linalg::scale(&f.evaluate(&x).unwrap(), -1.0);
            let twice = linalg::scale(&f.evaluate(&once).unwrap(), -1.0);
            prop_assert!(linalg::dist(&twice, &x) < 1e-10);
        }
    }

    #[test]
    fn fiber_csv_round_trip(seed in any::<u64>(), n in 3usize..50) {
        let mut rng = linalg::seeded_rng(seed);
        let c = FiberCurve {
            points: (0..n).map(|_| linalg::random_unit(&mut rng, 4)).collect(),
            closed: true,
            orientation: 1,
            residual: f64::NAN,
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = FiberCurve::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.points, c.points);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn hopf_fibers_are_single_great_circles(seed in any::<u64>()) {
        let m = MapDescriptor::hopf().build().unwrap();
        let y = linalg::scale(&linalg::random_unit(&mut linalg::seeded_rng(seed), 3), 0.5);
        let fibers = trace_fiber(&m, &y, &TraceConfig::default()).unwrap();
        prop_assert_eq!(fibers.len(), 1);
        prop_assert!(fit_great_circle(&fibers[0].points).unwrap().max_residual < 1e-8);
    }

    #[test]
    fn tracing_is_rotation_equivariant(seed in any::<u64>()) {
        let hopf = MapDescriptor::hopf();
        let conj = MapDescriptor::IsometryConjugate {
            inner: Box::new(hopf.clone()),
            domain: Isometry::RandomRotation { seed },
            codomain: Isometry::Identity,
        };
        let (a, b) = (hopf.build().unwrap(), conj.build().unwrap());
        let g = Isometry::RandomRotation { seed }.resolve(a.domain()).unwrap();
        let cfg = TraceConfig::default();
        let y = default_values(0.5)[0].clone();
        let ka = trace_fiber(&a, &y, &cfg).unwrap();
        let kb = trace_fiber(&b, &y, &cfg).unwrap();
        prop_assert_eq!(ka.len(), kb.len());
        prop_assert!(hausdorff(&ka[0].transformed(&g), &kb[0]) < 2.0 * cfg.step);
    }

    #[test]
    fn hopf_invariant_does_not_depend_on_the_values(seed in any::<u64>()) {
        let m = MapDescriptor::hopf().build().unwrap();
        let mut rng = linalg::seeded_rng(seed);
        let y1 = linalg::scale(&linalg::random_unit(&mut rng, 3), 0.5);
        let y2 = linalg::scale(&linalg::random_unit(&mut rng, 3), 0.5);
        prop_assume!(m.codomain().distance(&y1, &y2) > 0.2);
        let h = hopf_invariant(&m, &y1, &y2, &HopfConfig::default()).unwrap();
        prop_assert_eq!(h.value, 1);
    }

    #[test]
    fn cli_runs_are_reproducible(seed in any::<u64>()) {
        let mut c = RunConfig::new(CommandKind::Lipschitz, seed);
        c.map = Some(MapDescriptor::builtin("power(2)").unwrap());
        c.samples = Some(64);
        let a = execute(&c).unwrap().report;
        let b = execute(&c).unwrap().report;
        prop_assert_eq!(a, b);
    }
}

#[test]
fn pair_bound_never_exceeds_spectral_estimate() {
    for name in FAMILIES {
        let m = MapDescriptor::builtin(name).unwrap().build().unwrap();
        for seed in 0..20 {
            let r = lipschitz_report(&m, 100, seed).unwrap();
            assert!(
                r.pair_lower <= r.spectral_sup + 1e-3,
                "{name} seed {seed}: {} > {}",
                r.pair_lower,
                r.spectral_sup
            );
        }
    }
}

#[test]
fn energy_is_isometry_invariant() {
    let inner = MapDescriptor::builtin("power(2)").unwrap();
    let conj = MapDescriptor::IsometryConjugate {
        inner: Box::new(inner.clone()),
        domain: Isometry::RandomRotation { seed: 1 },
        codomain: Isometry::RandomRotation { seed: 2 },
    };
    let a = energy(&inner.build().unwrap(), 4000, 3).unwrap();
    let b = energy(&conj.build().unwrap(), 4000, 4).unwrap();
    let se = a.std_error.hypot(b.std_error);
    assert!((a.value - b.value).abs() < 3.0 * se, "{a:?} {b:?}");
}
