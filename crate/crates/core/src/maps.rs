//! The closed family of analytic maps between the spaces in [`manifolds`].
//!
//! A [`MapDescriptor`] is plain serializable data. [`MapDescriptor::build`]
//! resolves it once (random rotations, complex structures, nested maps) into a
//! [`Map`] that can be evaluated cheaply and repeatedly.
//!
//! [`manifolds`]: crate::manifolds

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::algebra::{oct_mul, Octonion, OrthogonalComplexStructure, Quaternion};
use crate::linalg::{self, dot, mat_vec, norm};
use crate::manifolds::{Bivector4, Field, Space};
use crate::verify::Profile;
use crate::{Error, Result};

pub use crate::manifolds::TangentFrame;

/// Domain membership tolerance for [`Map::evaluate`].
pub const DOMAIN_TOL: f64 = 1e-9;
/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Agreement required between the `h` and `h/2` difference quotients.
pub const RICHARDSON_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ComplexStructureSpec {
    /// The block-diagonal structure on `ℝ^dim`.
    Standard {
        dim: usize,
    },
    /// `R·J₀·Rᵀ` for a seeded random rotation.
    Random {
        dim: usize,
        seed: u64,
    },
    Matrix {
        rows: Vec<Vec<f64>>,
    },
}

impl ComplexStructureSpec {
    pub fn resolve(&self) -> Result<OrthogonalComplexStructure> {
        match self {
            ComplexStructureSpec::Standard { dim } => OrthogonalComplexStructure::standard(*dim),
            ComplexStructureSpec::Random { dim, seed } => crate::algebra::random_ocs(*dim, *seed),
            ComplexStructureSpec::Matrix { rows } => {
                let m = linalg::matrix_from_rows(rows).ok_or_else(|| Error::InvalidArgument("ragged matrix".into()))?;
                OrthogonalComplexStructure::from_matrix(m, 1e-10)
            }
        }
    }
}

/// An isometry of a domain or codomain, used by
/// [`MapDescriptor::IsometryConjugate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Isometry {
    Identity,
    /// Seeded random element of the identity component of the isometry
    /// group of the space.
    RandomRotation {
        seed: u64,
    },
    /// An explicit orthogonal matrix on ambient coordinates.
    Matrix {
        rows: Vec<Vec<f64>>,
    },
}

impl Isometry {
    /// Resolve to an ambient orthogonal matrix that preserves `space` and its
    /// metric.
    pub fn resolve(&self, space: &Space) -> Result<DMatrix<f64>> {
        let n = space.ambient_dim();
        let m = match self {
            Isometry::Identity => return Ok(DMatrix::identity(n, n)),
            Isometry::RandomRotation { seed } => {
                let mut rng = linalg::seeded_rng(*seed);
                random_isometry(space, &mut rng)?
            }
            Isometry::Matrix { rows } => {
                linalg::matrix_from_rows(rows).ok_or_else(|| Error::InvalidArgument("ragged matrix".into()))?
            }
        };
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
        verify_isometry(space, &m)?;
        Ok(m)
    }
}

fn random_isometry(space: &Space, rng: &mut linalg::Rng) -> Result<DMatrix<f64>> {
    Ok(match space {
        Space::Sphere { dim, .. } => linalg::random_rotation_with(rng, dim + 1),
        Space::Product { first, second } => {
            let a = random_isometry(first, rng)?;
            let b = random_isometry(second, rng)?;
            block_diag(&a, &b)
        }
        Space::Stiefel { m } => {
            let g = linalg::random_rotation_with(rng, *m);
            block_diag(&g, &g)
        }
        Space::Grassmann => exterior_square(&linalg::random_rotation_with(rng, 4)),
        Space::Projective {
            field: Field::Complex,
            n,
        } => random_unitary(rng, n + 1),
        Space::Projective {
            field: Field::Quaternionic,
            ..
        } => {
            return Err(Error::Unsupported(
                "random isometries of quaternionic projective space".into(),
            ))
        }
    })
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// `Λ²g` on the basis `e12, e13, e14, e23, e24, e34`.
fn exterior_square(g: &DMatrix<f64>) -> DMatrix<f64> {
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut out = DMatrix::zeros(6, 6);
    for (col, &(i, j)) in PAIRS.iter().enumerate() {
        let gi: Vec<f64> = (0..4).map(|r| g[(r, i)]).collect();
        let gj: Vec<f64> = (0..4).map(|r| g[(r, j)]).collect();
        let w = Bivector4::wedge(&gi, &gj);
        for row in 0..6 {
            out[(row, col)] = w.0[row];
        }
    }
    out
}

/// Haar-ish random unitary on `ℂ^k`, as a real matrix on interleaved
/// `(re, im)` coordinates.
fn random_unitary(rng: &mut linalg::Rng, k: usize) -> DMatrix<f64> {
    let g = linalg::gaussian_vec(rng, 2 * k * k);
    let c = DMatrix::from_fn(k, k, |i, j| Complex::new(g[2 * (i * k + j)], g[2 * (i * k + j) + 1]));
    let q = c.qr().q();
    let mut out = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let z = q[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

fn verify_isometry(space: &Space, m: &DMatrix<f64>) -> Result<()> {
    if linalg::orthogonality_defect(m) > 1e-10 {
        return Err(Error::InvalidArgument("isometry matrix is not orthogonal".into()));
    }
    let mut rng = linalg::seeded_rng(0x150);
    for _ in 0..8 {
        let p = space.sample(&mut rng);
        let q = space.sample(&mut rng);
        let (gp, gq) = (mat_vec(m, &p), mat_vec(m, &q));
        space.check(&gp, 1e-9)?;
        let err = (space.distance(&gp, &gq) - space.distance(&p, &q)).abs();
        if err > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "matrix does not preserve distances on {space:?} (error {err:.2e})"
            )));
        }
    }
    Ok(())
}

/// Serializable description of a map. See the README for the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapDescriptor {
    /// `S^{2n+1} → ℂPⁿ`; for `n = 1` the codomain is `S²(1/2) ⊂ ℝ³`.
    HopfComplex {
        n: usize,
    },
    /// `S^{4n+3} → ℍPⁿ`; for `n = 1` the codomain is `S⁴(1/2) ⊂ ℝ⁵`.
    HopfQuaternionic {
        n: usize,
    },
    /// `S¹⁵ → S⁸(1/2)`, `(u, v) ↦ ½(|u|² − |v|², 2·u·v̄)`.
    HopfOctonionic,
    /// `ΔSⁿ → Sⁿ × Sⁿ`; the domain is represented as `Sⁿ(√2)`.
    DiagonalInclusion {
        n: usize,
    },
    /// `x ↦ (x, Jx)` from `S^{dim−1}` into the unit tangent bundle.
    HopfVectorField {
        structure: ComplexStructureSpec,
    },
    /// `V₂ℝ⁴ → G₂ℝ⁴`, `(x, y) ↦ x∧y / ‖x∧y‖`.
    StiefelPluecker,
    /// `V₂ℝ⁴ → S² × S²`, `(x, y) ↦ (y·x⁻¹, x⁻¹·y)`.
    StiefelQuat,
    /// `inner ∘ g_d` with `g_d(z₁, z₂) = (z₁, z₂^d)/‖·‖` on `S³ ⊂ ℂ²`.
    PowerPrecompose {
        inner: Box<MapDescriptor>,
        d: i32,
    },
    /// `(x cos t, sin t) ↦ (φ(x) cos t, r sin t)`, componentwise on products.
    Suspension {
        inner: Box<MapDescriptor>,
    },
    /// `g_cod ∘ inner ∘ g_dom⁻¹`.
    IsometryConjugate {
        inner: Box<MapDescriptor>,
        domain: Isometry,
        codomain: Isometry,
    },
    /// Push `inner` along a fixed codomain tangent field, weighted by a
    /// cosine bump of geodesic radius `width` around `center`.
    BumpPerturb {
        inner: Box<MapDescriptor>,
        center: Vec<f64>,
        amplitude: f64,
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<f64>>,
    },
    Identity {
        n: usize,
    },
    /// `Sⁿ → {value}`.
    Constant {
        n: usize,
        value: Vec<f64>,
    },
    /// A longitude-preserving map of `Sⁿ` copying an interval profile onto
    /// every meridian from the north pole `e_{n+1}` to the south pole.
    ProfileSphere {
        n: usize,
        profile: Profile,
    },
}

impl MapDescriptor {
    pub fn hopf() -> Self {
        MapDescriptor::HopfComplex { n: 1 }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptors always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Parse a builtin name such as `hopf`, `power(2)`, `bump(0.1,0.5)` or
    /// `suspend(identity(2))`.
    pub fn builtin(spec: &str) -> Result<Self> {
        parse_builtin(spec.trim())
    }

    pub fn build(&self) -> Result<Map> {
        Map::new(self.clone())
    }
}

impl fmt::Display for MapDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// Resolved form of a descriptor.
#[derive(Debug, Clone)]
enum Kind {
    HopfComplexSphere,
    HopfProjective,
    HopfQuatSphere,
    HopfOct,
    Diagonal,
    VectorField(OrthogonalComplexStructure),
    Pluecker,
    StiefelQuat,
    Power {
        inner: Box<Map>,
        d: i32,
    },
    Suspension {
        inner: Box<Map>,
    },
    Conjugate {
        inner: Box<Map>,
        dom_inv: DMatrix<f64>,
        cod: DMatrix<f64>,
    },
    Bump {
        inner: Box<Map>,
        center: Vec<f64>,
        amplitude: f64,
        width: f64,
        directions: Vec<Vec<f64>>,
    },
    Identity,
    Constant(Vec<f64>),
    Profile(Profile),
}

/// A built, evaluable map.
#[derive(Debug, Clone)]
pub struct Map {
    descriptor: MapDescriptor,
    domain: Space,
    codomain: Space,
    kind: Kind,
}

impl Map {
    pub fn new(descriptor: MapDescriptor) -> Result<Self> {
        use MapDescriptor as D;
        let (domain, codomain, kind) = match &descriptor {
            D::HopfComplex { n } => {
                if *n == 0 {
                    return Err(Error::InvalidArgument("HopfComplex needs n ≥ 1".into()));
                }
                if *n == 1 {
                    (Space::sphere(3, 1.0), Space::sphere(2, 0.5), Kind::HopfComplexSphere)
                } else {
                    (
                        Space::sphere(2 * n + 1, 1.0),
                        Space::Projective {
                            field: Field::Complex,
                            n: *n,
                        },
                        Kind::HopfProjective,
                    )
                }
            }
            D::HopfQuaternionic { n } => {
                if *n == 0 {
                    return Err(Error::InvalidArgument("HopfQuaternionic needs n ≥ 1".into()));
                }
                if *n == 1 {
                    (Space::sphere(7, 1.0), Space::sphere(4, 0.5), Kind::HopfQuatSphere)
                } else {
                    (
                        Space::sphere(4 * n + 3, 1.0),
                        Space::Projective {
                            field: Field::Quaternionic,
                            n: *n,
                        },
                        Kind::HopfProjective,
                    )
                }
            }
            D::HopfOctonionic => (Space::sphere(15, 1.0), Space::sphere(8, 0.5), Kind::HopfOct),
            D::DiagonalInclusion { n } => {
                if *n == 0 {
                    return Err(Error::InvalidArgument("DiagonalInclusion needs n ≥ 1".into()));
                }
                (
                    Space::sphere(*n, SQRT_2),
                    Space::product(Space::sphere(*n, 1.0), Space::sphere(*n, 1.0)),
                    Kind::Diagonal,
                )
            }
            D::HopfVectorField { structure } => {
                let j = structure.resolve()?;
                let m = j.dim();
                (Space::sphere(m - 1, 1.0), Space::Stiefel { m }, Kind::VectorField(j))
            }
            D::StiefelPluecker => (Space::Stiefel { m: 4 }, Space::Grassmann, Kind::Pluecker),
            D::StiefelQuat => (
                Space::Stiefel { m: 4 },
                Space::product(Space::sphere(2, 1.0), Space::sphere(2, 1.0)),
                Kind::StiefelQuat,
            ),
            D::PowerPrecompose { inner, d } => {
                let inner = inner.build()?;
                if inner.domain != Space::sphere(3, 1.0) {
                    return Err(Error::InvalidArgument(
                        "power precomposition needs a map defined on the unit S³".into(),
                    ));
                }
                if d.unsigned_abs() > 64 {
                    return Err(Error::InvalidArgument(format!("power {d} out of range")));
                }
                (
                    inner.domain.clone(),
                    inner.codomain.clone(),
                    Kind::Power {
                        inner: Box::new(inner),
                        d: *d,
                    },
                )
            }
            D::Suspension { inner } => {
                let inner = inner.build()?;
                let domain = match inner.domain {
                    Space::Sphere { dim, radius: 1.0 } => Space::sphere(dim + 1, 1.0),
                    _ => {
                        return Err(Error::InvalidArgument(
                            "suspension needs a map defined on a unit sphere".into(),
                        ))
                    }
                };
                let codomain = suspend_space(&inner.codomain)?;
                (domain, codomain, Kind::Suspension { inner: Box::new(inner) })
            }
            D::IsometryConjugate {
                inner,
                domain,
                codomain,
            } => {
                let inner = inner.build()?;
                let g_dom = domain.resolve(&inner.domain)?;
                let g_cod = codomain.resolve(&inner.codomain)?;
                (
                    inner.domain.clone(),
                    inner.codomain.clone(),
                    Kind::Conjugate {
                        dom_inv: g_dom.transpose(),
                        cod: g_cod,
                        inner: Box::new(inner),
                    },
                )
            }
            D::BumpPerturb {
                inner,
                center,
                amplitude,
                width,
                direction,
            } => {
                let inner = inner.build()?;
                if !amplitude.is_finite() || amplitude.abs() >= 1.0 {
                    return Err(Error::AmplitudeTooLarge(*amplitude));
                }
                if !(*width > 0.0 && *width <= PI) {
                    return Err(Error::InvalidArgument(format!(
                        "bump width must lie in (0, π], got {width}"
                    )));
                }
                inner.domain.check(center, DOMAIN_TOL)?;
                let y0 = inner.eval_raw(center)?;
                let directions = bump_directions(&inner.codomain, &y0, direction.as_deref())?;
                (
                    inner.domain.clone(),
                    inner.codomain.clone(),
                    Kind::Bump {
                        inner: Box::new(inner),
                        center: center.clone(),
                        amplitude: *amplitude,
                        width: *width,
                        directions,
                    },
                )
            }
            D::Identity { n } => (Space::sphere(*n, 1.0), Space::sphere(*n, 1.0), Kind::Identity),
            D::Constant { n, value } => {
                let r = norm(value);
                if r == 0.0 || value.len() < 2 {
                    return Err(Error::InvalidArgument("constant value must be a nonzero vector".into()));
                }
                (
                    Space::sphere(*n, 1.0),
                    Space::sphere(value.len() - 1, r),
                    Kind::Constant(value.clone()),
                )
            }
            D::ProfileSphere { n, profile } => {
                profile.validate()?;
                if *n == 0 {
                    return Err(Error::InvalidArgument("profile maps need n ≥ 1".into()));
                }
                (
                    Space::sphere(*n, 1.0),
                    Space::sphere(*n, 1.0),
                    Kind::Profile(profile.clone()),
                )
            }
        };
        Ok(Map {
            descriptor,
            domain,
            codomain,
            kind,
        })
    }

    pub fn descriptor(&self) -> &MapDescriptor {
        &self.descriptor
    }

    pub fn domain(&self) -> &Space {
        &self.domain
    }

    pub fn codomain(&self) -> &Space {
        &self.codomain
    }

    /// Evaluate at a point of the domain (checked to [`DOMAIN_TOL`]).
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.domain.check(x, DOMAIN_TOL)?;
        self.eval_raw(x)
    }

    /// Evaluate without the domain check; `x` must be on the domain to
    /// roundoff.
    pub(crate) fn eval_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.kind {
            Kind::HopfComplexSphere => hopf_complex(x).to_vec(),
            Kind::HopfProjective => x.to_vec(),
            Kind::HopfQuatSphere => {
                let u = Quaternion::from_slice(&x[..4]);
                let v = Quaternion::from_slice(&x[4..]);
                let uv = (u * v.conj()).to_array();
                let mut out = vec![0.5 * (u.norm_sq() - v.norm_sq())];
                out.extend_from_slice(&uv);
                out
            }
            Kind::HopfOct => {
                let u = Octonion::from_slice(&x[..8]);
                let v = Octonion::from_slice(&x[8..]);
                let uv = oct_mul(u, v.conj());
                let mut out = vec![0.5 * (dot(&u.c, &u.c) - dot(&v.c, &v.c))];
                out.extend_from_slice(&uv.c);
                out
            }
            Kind::Diagonal => {
                let p = linalg::scale(x, FRAC_1_SQRT_2);
                let mut out = p.clone();
                out.extend(p);
                out
            }
            Kind::VectorField(j) => {
                let mut out = x.to_vec();
                out.extend(mat_vec(j.matrix(), x));
                out
            }
            Kind::Pluecker => {
                let w = Bivector4::wedge(&x[..4], &x[4..]);
                linalg::scale(&w.0, 1.0 / w.norm())
            }
            Kind::StiefelQuat => {
                let (a, b) = stiefel_quat(x);
                let mut out = a.vector().to_vec();
                out.extend_from_slice(&b.vector());
                out
            }
            Kind::Power { inner, d } => inner.eval_raw(&power_map(x, *d))?,
            Kind::Suspension { inner } => {
                let (head, last) = x.split_at(x.len() - 1);
                let s = last[0];
                let c = norm(head);
                let y = if c > 0.0 {
                    Some(inner.eval_raw(&linalg::scale(head, 1.0 / c))?)
                } else {
                    None
                };
                suspend_point(&inner.codomain, y.as_deref(), c, s)
            }
            Kind::Conjugate { inner, dom_inv, cod } => {
                let y = inner.eval_raw(&mat_vec(dom_inv, x))?;
                mat_vec(cod, &y)
            }
            Kind::Bump {
                inner,
                center,
                amplitude,
                width,
                directions,
            } => {
                let y = inner.eval_raw(x)?;
                let d = self.domain.distance(x, center);
                if d >= *width || *amplitude == 0.0 {
                    y
                } else {
                    let weight = 0.5 * (1.0 + (PI * d / width).cos());
                    push_along(&self.codomain, &y, directions, amplitude * weight)?
                }
            }
            Kind::Identity => x.to_vec(),
            Kind::Constant(v) => v.clone(),
            Kind::Profile(p) => profile_point(p, x),
        })
    }

    /// Central-difference differential in tangent frames at `x` and `f(x)`.
    ///
    /// Quotients at `h` and `h/2` must agree to [`RICHARDSON_TOL`] (relative
    /// to the size of the entries); the Richardson extrapolant is returned.
    pub fn differential(&self, x: &[f64], h: f64) -> Result<Differential> {
        if !(1e-7..=1e-3).contains(&h) {
            return Err(Error::InvalidArgument(format!("step {h} outside [1e-7, 1e-3]")));
        }
        self.domain.check(x, DOMAIN_TOL)?;
        let dom_frame = self.domain.tangent_frame(x)?;
        let y = self.eval_raw(x)?;
        let cod_frame = self.codomain.tangent_frame(&y)?;
        let coarse = self.difference_quotient(&dom_frame, &cod_frame, h)?;
        let fine = self.difference_quotient(&dom_frame, &cod_frame, h / 2.0)?;
        let gap = (&fine - &coarse).amax();
        let size = fine.amax().max(1.0);
        if gap > RICHARDSON_TOL * size {
            return Err(Error::DifferentialUnstable(gap));
        }
        let matrix = &fine + (&fine - &coarse) / 3.0;
        Ok(Differential {
            matrix,
            domain_frame: dom_frame,
            codomain_frame: cod_frame,
        })
    }

    fn difference_quotient(&self, dom: &TangentFrame, cod: &TangentFrame, h: f64) -> Result<DMatrix<f64>> {
        let y = &cod.base;
        let mut m = DMatrix::zeros(cod.dim(), dom.dim());
        for (j, e) in dom.basis.iter().enumerate() {
            let xp = self.domain.retract(&linalg::axpy(&dom.base, h, e));
            let xm = self.domain.retract(&linalg::axpy(&dom.base, -h, e));
            let yp = self.codomain.align(y, &self.eval_raw(&xp)?);
            let ym = self.codomain.align(y, &self.eval_raw(&xm)?);
            let dy = linalg::scale(&linalg::sub(&yp, &ym), 0.5 / h);
            for (i, c) in cod.coordinates(&dy).into_iter().enumerate() {
                m[(i, j)] = c;
            }
        }
        Ok(m)
    }

    pub fn singular_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.differential(x, DEFAULT_STEP)?.singular_values())
    }
}

/// `df_x` as a matrix in orthonormal tangent frames; columns are the
/// pushforwards of the domain frame vectors.
#[derive(Debug, Clone)]
pub struct Differential {
    pub matrix: DMatrix<f64>,
    pub domain_frame: TangentFrame,
    pub codomain_frame: TangentFrame,
}

impl Differential {
    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values(&self.matrix)
    }

    /// Pushforward of an ambient tangent vector at the base point, in
    /// ambient codomain coordinates.
    pub fn push(&self, v: &[f64]) -> Vec<f64> {
        let c = self.domain_frame.coordinates(v);
        let out: Vec<f64> = (0..self.matrix.nrows())
            .map(|i| (0..c.len()).map(|j| self.matrix[(i, j)] * c[j]).sum())
            .collect();
        self.codomain_frame.combine(&out)
    }
}

pub fn evaluate(m: &MapDescriptor, x: &[f64]) -> Result<Vec<f64>> {
    m.build()?.evaluate(x)
}

pub fn differential(m: &MapDescriptor, x: &[f64], h: f64) -> Result<Differential> {
    m.build()?.differential(x, h)
}

/// `Σm`. Fails unless `m` maps a unit sphere into a sphere or a product of
/// spheres.
pub fn suspend(m: &MapDescriptor) -> Result<MapDescriptor> {
    let d = MapDescriptor::Suspension {
        inner: Box::new(m.clone()),
    };
    d.build()?;
    Ok(d)
}

pub fn power_precompose(m: &MapDescriptor, d: i32) -> Result<MapDescriptor> {
    let out = MapDescriptor::PowerPrecompose {
        inner: Box::new(m.clone()),
        d,
    };
    out.build()?;
    Ok(out)
}

pub fn bump_perturb(m: &MapDescriptor, center: &[f64], amplitude: f64, width: f64) -> Result<MapDescriptor> {
    let out = MapDescriptor::BumpPerturb {
        inner: Box::new(m.clone()),
        center: center.to_vec(),
        amplitude,
        width,
        direction: None,
    };
    out.build()?;
    Ok(out)
}

/// `½·(2 Re z₁z̄₂, 2 Im z₁z̄₂, |z₁|² − |z₂|²)` for `(z₁, z₂) ∈ S³ ⊂ ℂ²`.
pub fn hopf_complex(x: &[f64]) -> [f64; 3] {
    let (a, b, c, d) = (x[0], x[1], x[2], x[3]);
    [a * c + b * d, b * c - a * d, 0.5 * (a * a + b * b - c * c - d * d)]
}

/// `(y·x⁻¹, x⁻¹·y)` as quaternions, for `(x, y) ∈ V₂ℝ⁴`.
pub fn stiefel_quat(p: &[f64]) -> (Quaternion, Quaternion) {
    let x = Quaternion::from_slice(&p[..4]);
    let y = Quaternion::from_slice(&p[4..8]);
    let xi = x.inverse();
    (y * xi, xi * y)
}

fn complex_pow(re: f64, im: f64, d: i32) -> (f64, f64) {
    let (br, bi) = if d < 0 { (re, -im) } else { (re, im) };
    let (mut r, mut i) = (1.0, 0.0);
    for _ in 0..d.unsigned_abs() {
        (r, i) = (r * br - i * bi, r * bi + i * br);
    }
    (r, i)
}

/// `g_d(z₁, z₂) = (z₁, z₂^d)/‖·‖`, with `z^{−k} := z̄^k`.
pub fn power_map(x: &[f64], d: i32) -> Vec<f64> {
    let (wr, wi) = complex_pow(x[2], x[3], d);
    let v = [x[0], x[1], wr, wi];
    linalg::scale(&v, 1.0 / norm(&v))
}

fn suspend_space(s: &Space) -> Result<Space> {
    match s {
        Space::Sphere { dim, radius } => Ok(Space::sphere(dim + 1, *radius)),
        Space::Product { first, second } => Ok(Space::product(suspend_space(first)?, suspend_space(second)?)),
        other => Err(Error::InvalidArgument(format!(
            "cannot suspend a map into {other:?}; codomain must be a sphere or product of spheres"
        ))),
    }
}

fn suspend_point(cod: &Space, y: Option<&[f64]>, c: f64, s: f64) -> Vec<f64> {
    match cod {
        Space::Sphere { dim, radius } => {
            let mut out = match y {
                Some(y) => linalg::scale(y, c),
                None => vec![0.0; dim + 1],
            };
            out.push(radius * s);
            out
        }
        Space::Product { first, second } => {
            let k = first.ambient_dim();
            let mut out = suspend_point(first, y.map(|y| &y[..k]), c, s);
            out.extend(suspend_point(second, y.map(|y| &y[k..]), c, s));
            out
        }
        _ => unreachable!("checked when the map was built"),
    }
}

/// One ambient direction per sphere factor of the codomain.
fn bump_directions(cod: &Space, y0: &[f64], given: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
    let factors = sphere_factors(cod)?;
    if let Some(g) = given {
        if g.len() != cod.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: cod.ambient_dim(),
                got: g.len(),
            });
        }
        return Ok(factors
            .iter()
            .map(|&(off, len, _)| g[off..off + len].to_vec())
            .collect());
    }
    // default: the axis least aligned with the image of the bump centre
    Ok(factors
        .iter()
        .map(|&(off, len, _)| {
            let part = &y0[off..off + len];
            let k = (0..len)
                .min_by(|&a, &b| part[a].abs().total_cmp(&part[b].abs()))
                .expect("nonempty factor");
            let mut e = vec![0.0; len];
            e[k] = 1.0;
            e
        })
        .collect())
}

/// `(offset, ambient length, radius)` of every sphere factor.
fn sphere_factors(s: &Space) -> Result<Vec<(usize, usize, f64)>> {
    fn go(s: &Space, off: usize, out: &mut Vec<(usize, usize, f64)>) -> Result<()> {
        match s {
            Space::Sphere { dim, radius } => {
                out.push((off, dim + 1, *radius));
                Ok(())
            }
            Space::Product { first, second } => {
                go(first, off, out)?;
                go(second, off + first.ambient_dim(), out)
            }
            other => Err(Error::Unsupported(format!(
                "bump perturbation into {other:?}; codomain must be a sphere or product of spheres"
            ))),
        }
    }
    let mut out = Vec::new();
    go(s, 0, &mut out)?;
    Ok(out)
}

fn push_along(cod: &Space, y: &[f64], directions: &[Vec<f64>], eps: f64) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    for ((off, len, r), a) in sphere_factors(cod)?.into_iter().zip(directions) {
        let u = linalg::scale(&y[off..off + len], 1.0 / r);
        let t = linalg::axpy(a, -dot(a, &u), &u);
        let moved = linalg::axpy(&u, eps, &t);
        let n = norm(&moved);
        if !(n > 1e-12) {
            return Err(Error::AmplitudeTooLarge(eps));
        }
        for (o, m) in out[off..off + len].iter_mut().zip(&moved) {
            *o = r * m / n;
        }
    }
    Ok(out)
}

fn profile_point(p: &Profile, x: &[f64]) -> Vec<f64> {
    let (head, last) = x.split_at(x.len() - 1);
    let c = norm(head);
    if c == 0.0 {
        return x.to_vec();
    }
    let theta = c.atan2(last[0]);
    let moved = PI * p.eval(theta / PI);
    let mut out = linalg::scale(head, moved.sin() / c);
    out.push(moved.cos());
    out
}

fn parse_builtin(spec: &str) -> Result<MapDescriptor> {
    let bad = |msg: &str| Error::Config(format!("builtin map {spec:?}: {msg}"));
    let (name, args) = match spec.find('(') {
        Some(open) => {
            if !spec.ends_with(')') {
                return Err(bad("unbalanced parentheses"));
            }
            (&spec[..open], Some(&spec[open + 1..spec.len() - 1]))
        }
        None => (spec, None),
    };
    let nums = |want: usize| -> Result<Vec<f64>> {
        let a = args.unwrap_or("");
        let v: Vec<f64> = if a.trim().is_empty() {
            Vec::new()
        } else {
            a.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad("expected numeric arguments")))
                .collect::<Result<_>>()?
        };
        if v.len() != want {
            return Err(bad(&format!("expected {want} argument(s), got {}", v.len())));
        }
        Ok(v)
    };
    let opt_int = |default: usize| -> Result<usize> {
        match args {
            None => Ok(default),
            Some(_) => as_count(nums(1)?[0]).ok_or_else(|| bad("expected a non-negative integer")),
        }
    };
    let int = || -> Result<usize> { as_count(nums(1)?[0]).ok_or_else(|| bad("expected a non-negative integer")) };
    use MapDescriptor as D;
    Ok(match name.trim() {
        "hopf" => {
            nums(0)?;
            D::hopf()
        }
        "hopf-complex" => D::HopfComplex { n: opt_int(1)? },
        "hopf-quat" => D::HopfQuaternionic { n: opt_int(1)? },
        "hopf-oct" => {
            nums(0)?;
            D::HopfOctonionic
        }
        "diagonal" => D::DiagonalInclusion { n: int()? },
        "hopf-vf" => D::HopfVectorField {
            structure: ComplexStructureSpec::Standard {
                dim: 2 * opt_int(1)? + 2,
            },
        },
        "stiefel-quat" => {
            nums(0)?;
            D::StiefelQuat
        }
        "stiefel-pluecker" => {
            nums(0)?;
            D::StiefelPluecker
        }
        "power" => {
            let d = nums(1)?[0];
            if d.fract() != 0.0 {
                return Err(bad("power needs an integer"));
            }
            D::PowerPrecompose {
                inner: Box::new(D::hopf()),
                d: d as i32,
            }
        }
        "bump" => {
            let v = nums(2)?;
            D::BumpPerturb {
                inner: Box::new(D::hopf()),
                center: default_bump_center(),
                amplitude: v[0],
                width: v[1],
                direction: None,
            }
        }
        "suspend" => {
            let inner = args.ok_or_else(|| bad("suspend needs an inner map"))?;
            D::Suspension {
                inner: Box::new(parse_builtin(inner.trim())?),
            }
        }
        "identity" => D::Identity { n: int()? },
        "rotation" => {
            let v = nums(2)?;
            let n = as_count(v[0]).ok_or_else(|| bad("dimension must be a non-negative integer"))?;
            let seed = as_count(v[1]).ok_or_else(|| bad("seed must be a non-negative integer"))?;
            D::IsometryConjugate {
                inner: Box::new(D::Identity { n }),
                domain: Isometry::Identity,
                codomain: Isometry::RandomRotation { seed: seed as u64 },
            }
        }
        "profile" => D::ProfileSphere {
            n: int()?,
            profile: crate::verify::build_profile(),
        },
        other => return Err(bad(&format!("unknown name {other:?}"))),
    })
}

fn as_count(v: f64) -> Option<usize> {
    (v >= 0.0 && v.fract() == 0.0 && v < 1e9).then_some(v as usize)
}

/// Centre used by the `bump(amp,width)` builtin: a generic point of `S³`.
pub fn default_bump_center() -> Vec<f64> {
    let v = [0.8, 0.2, -0.4, 0.4];
    linalg::scale(&v, 1.0 / norm(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_unit, seeded_rng};
    use crate::manifolds::projective_distance;
    use crate::manifolds::ProjectivePoint;

    fn build(d: &MapDescriptor) -> Map {
        d.build().unwrap()
    }

    #[test]
    fn hopf_north_pole() {
        let m = build(&MapDescriptor::hopf());
        let y = m.evaluate(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 0.5]);
    }

    #[test]
    fn hopf_is_constant_on_complex_circles() {
        let m = build(&MapDescriptor::hopf());
        let mut rng = seeded_rng(1);
        for _ in 0..50 {
            let x = random_unit(&mut rng, 4);
            let t: f64 = 1.234;
            let rot =
                crate::manifolds::scalar_mul_right(Field::Complex, &x, Quaternion::new(t.cos(), t.sin(), 0.0, 0.0));
            let a = m.evaluate(&x).unwrap();
            let b = m.evaluate(&rot).unwrap();
            assert!(linalg::dist(&a, &b) < 1e-15);
        }
    }

    #[test]
    fn domain_violation_is_reported() {
        let m = build(&MapDescriptor::hopf());
        assert!(matches!(
            m.evaluate(&[1.0, 1.0, 0.0, 0.0]),
            Err(Error::DomainViolation(_))
        ));
        assert!(matches!(
            m.evaluate(&[1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn stiefel_quat_on_complex_lines() {
        let m = build(&MapDescriptor::StiefelQuat);
        let mut rng = seeded_rng(2);
        for _ in 0..50 {
            let x = Quaternion::from_slice(&random_unit(&mut rng, 4));
            let uv = random_unit(&mut rng, 3);
            let u = Quaternion::pure([uv[0], uv[1], uv[2]]);
            let ux = u * x;
            let mut p = x.to_array().to_vec();
            p.extend_from_slice(&ux.to_array());
            let out = m.evaluate(&p).unwrap();
            let expect2 = (x.inverse() * u) * x;
            assert!(linalg::dist(&out[..3], &uv) < 1e-12);
            assert!(linalg::dist(&out[3..], &expect2.vector()) < 1e-12);
        }
    }

    #[test]
    fn every_family_lands_in_its_codomain() {
        let fams = vec![
            MapDescriptor::hopf(),
            MapDescriptor::HopfComplex { n: 2 },
            MapDescriptor::HopfQuaternionic { n: 1 },
            MapDescriptor::HopfQuaternionic { n: 2 },
            MapDescriptor::HopfOctonionic,
            MapDescriptor::DiagonalInclusion { n: 3 },
            MapDescriptor::builtin("hopf-vf(2)").unwrap(),
            MapDescriptor::StiefelPluecker,
            MapDescriptor::StiefelQuat,
            MapDescriptor::builtin("power(3)").unwrap(),
            MapDescriptor::builtin("power(-2)").unwrap(),
            MapDescriptor::builtin("bump(0.2,0.5)").unwrap(),
            MapDescriptor::builtin("suspend(hopf)").unwrap(),
            MapDescriptor::builtin("rotation(3,4)").unwrap(),
            MapDescriptor::builtin("profile(2)").unwrap(),
            MapDescriptor::IsometryConjugate {
                inner: Box::new(MapDescriptor::hopf()),
                domain: Isometry::RandomRotation { seed: 1 },
                codomain: Isometry::RandomRotation { seed: 2 },
            },
            MapDescriptor::IsometryConjugate {
                inner: Box::new(MapDescriptor::HopfComplex { n: 2 }),
                domain: Isometry::RandomRotation { seed: 1 },
                codomain: Isometry::RandomRotation { seed: 2 },
            },
            MapDescriptor::IsometryConjugate {
                inner: Box::new(MapDescriptor::StiefelPluecker),
                domain: Isometry::RandomRotation { seed: 1 },
                codomain: Isometry::RandomRotation { seed: 2 },
            },
        ];
        let mut rng = seeded_rng(3);
        for d in fams {
            let m = build(&d);
            for _ in 0..10_000 / 18 {
                let x = m.domain().sample(&mut rng);
                let y = m.evaluate(&x).unwrap();
                m.codomain().check(&y, 1e-12).unwrap_or_else(|e| panic!("{d}: {e}"));
            }
        }
    }

    #[test]
    fn hopf_projective_distance_matches_sphere_image() {
        let m = build(&MapDescriptor::hopf());
        let mut rng = seeded_rng(4);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x = random_unit(&mut rng, 4);
            let y = random_unit(&mut rng, 4);
            let px = ProjectivePoint::new(x.clone(), Field::Complex).unwrap();
            let py = ProjectivePoint::new(y.clone(), Field::Complex).unwrap();
            let d1 = projective_distance(&px, &py).unwrap();
            let d2 = m
                .codomain()
                .distance(&m.evaluate(&x).unwrap(), &m.evaluate(&y).unwrap());
            worst = worst.max((d1 - d2).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn differential_of_hopf_is_submersion() {
        let m = build(&MapDescriptor::hopf());
        let mut rng = seeded_rng(5);
        for _ in 0..20 {
            let x = random_unit(&mut rng, 4);
            let s = m.singular_values(&x).unwrap();
            assert_eq!(s.len(), 2);
            assert!((s[0] - 1.0).abs() < 1e-6 && (s[1] - 1.0).abs() < 1e-6, "{s:?}");
        }
    }

    #[test]
    fn differential_rejects_bad_step() {
        let m = build(&MapDescriptor::hopf());
        assert!(m.differential(&[1.0, 0.0, 0.0, 0.0], 1e-2).is_err());
        assert!(m.differential(&[1.0, 0.0, 0.0, 0.0], 1e-9).is_err());
    }

    #[test]
    fn suspension_examples() {
        let id = MapDescriptor::Identity { n: 2 };
        let s = build(&suspend(&id).unwrap());
        let mut rng = seeded_rng(6);
        for _ in 0..50 {
            let x = random_unit(&mut rng, 4);
            assert!(linalg::dist(&s.evaluate(&x).unwrap(), &x) < 1e-15);
        }
        let h = build(&suspend(&MapDescriptor::hopf()).unwrap());
        assert_eq!(
            h.evaluate(&[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
            vec![0.0, 0.0, 0.0, 0.5]
        );
        assert_eq!(
            h.evaluate(&[0.0, 0.0, 0.0, 0.0, -1.0]).unwrap(),
            vec![0.0, 0.0, 0.0, -0.5]
        );
        assert!(suspend(&MapDescriptor::HopfComplex { n: 2 }).is_err());
        assert!(suspend(&MapDescriptor::DiagonalInclusion { n: 2 }).is_err());
    }

    #[test]
    fn power_one_is_inner() {
        let base = build(&MapDescriptor::hopf());
        let p1 = build(&power_precompose(&MapDescriptor::hopf(), 1).unwrap());
        let mut rng = seeded_rng(7);
        for _ in 0..50 {
            let x = random_unit(&mut rng, 4);
            assert!(linalg::dist(&base.evaluate(&x).unwrap(), &p1.evaluate(&x).unwrap()) < 1e-15);
        }
    }

    #[test]
    fn power_zero_misses_north_pole() {
        let p0 = build(&power_precompose(&MapDescriptor::hopf(), 0).unwrap());
        let mut rng = seeded_rng(8);
        for _ in 0..1000 {
            let y = p0.evaluate(&random_unit(&mut rng, 4)).unwrap();
            assert!(y[2] <= 1e-15);
        }
    }

    #[test]
    fn bump_with_zero_amplitude_is_inner() {
        let h = MapDescriptor::hopf();
        let b = build(&bump_perturb(&h, &default_bump_center(), 0.0, 0.5).unwrap());
        let base = build(&h);
        let mut rng = seeded_rng(9);
        for _ in 0..50 {
            let x = random_unit(&mut rng, 4);
            assert_eq!(b.evaluate(&x).unwrap(), base.evaluate(&x).unwrap());
        }
        assert!(matches!(
            bump_perturb(&h, &default_bump_center(), 1.5, 0.5),
            Err(Error::AmplitudeTooLarge(_))
        ));
        assert!(bump_perturb(&h, &[1.0, 1.0, 0.0, 0.0], 0.1, 0.5).is_err());
    }

    #[test]
    fn conjugation_preserves_spectra() {
        let inner = MapDescriptor::HopfComplex { n: 2 };
        let conj = MapDescriptor::IsometryConjugate {
            inner: Box::new(inner.clone()),
            domain: Isometry::RandomRotation { seed: 3 },
            codomain: Isometry::RandomRotation { seed: 4 },
        };
        let (a, b) = (build(&inner), build(&conj));
        let g = Isometry::RandomRotation { seed: 3 }.resolve(a.domain()).unwrap();
        let mut rng = seeded_rng(10);
        for _ in 0..10 {
            let x = random_unit(&mut rng, 6);
            let gx = mat_vec(&g, &x);
            let s1 = a.singular_values(&x).unwrap();
            let s2 = b.singular_values(&gx).unwrap();
            for (u, v) in s1.iter().zip(&s2) {
                assert!((u - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn suspension_commutes_with_pole_fixing_rotations() {
        // rotating the equatorial coordinates of S³ fixes both poles
        let inner = MapDescriptor::Identity { n: 2 };
        let seeds = (11u64, 12u64);
        let conj_then_suspend = build(
            &suspend(&MapDescriptor::IsometryConjugate {
                inner: Box::new(inner.clone()),
                domain: Isometry::RandomRotation { seed: seeds.0 },
                codomain: Isometry::RandomRotation { seed: seeds.1 },
            })
            .unwrap(),
        );
        let extend = |seed: u64| {
            let r = Isometry::RandomRotation { seed }
                .resolve(&Space::sphere(2, 1.0))
                .unwrap();
            let mut big = DMatrix::identity(4, 4);
            big.view_mut((0, 0), (3, 3)).copy_from(&r);
            Isometry::Matrix {
                rows: linalg::matrix_to_rows(&big),
            }
        };
        let suspend_then_conj = build(&MapDescriptor::IsometryConjugate {
            inner: Box::new(suspend(&inner).unwrap()),
            domain: extend(seeds.0),
            codomain: extend(seeds.1),
        });
        let mut rng = seeded_rng(13);
        for _ in 0..200 {
            let x = random_unit(&mut rng, 4);
            let a = conj_then_suspend.evaluate(&x).unwrap();
            let b = suspend_then_conj.evaluate(&x).unwrap();
            assert!(linalg::dist(&a, &b) < 1e-10);
        }
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let d = MapDescriptor::builtin("suspend(bump(0.1,0.5))").unwrap();
        let back = MapDescriptor::from_json(&d.to_json()).unwrap();
        assert_eq!(d, back);
        assert!(MapDescriptor::from_json(r#"{"family":"hopf_complex","n":1,"extra":2}"#).is_err());
        assert!(MapDescriptor::from_json(r#"{"family":"no_such_map"}"#).is_err());
        assert_eq!(
            MapDescriptor::from_json(r#"{"family":"hopf_complex","n":1}"#).unwrap(),
            MapDescriptor::hopf()
        );
    }

    #[test]
    fn builtin_names() {
        for name in [
            "hopf",
            "hopf-quat",
            "hopf-oct",
            "diagonal(2)",
            "hopf-vf",
            "stiefel-quat",
            "stiefel-pluecker",
            "power(2)",
            "bump(0.1,0.5)",
            "suspend(hopf)",
            "hopf-complex(2)",
            "identity(3)",
            "rotation(2,7)",
            "profile(3)",
            "suspend(suspend(identity(1)))",
        ] {
            let d = MapDescriptor::builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            d.build().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        for bad in ["nope", "power(1.5)", "bump(0.1)", "diagonal", "hopf(", "suspend"] {
            assert!(MapDescriptor::builtin(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn vector_field_structure_is_checked() {
        let bad = MapDescriptor::HopfVectorField {
            structure: ComplexStructureSpec::Matrix {
                rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
        };
        assert!(bad.build().is_err());
    }

    #[test]
    fn isometry_matrix_must_preserve_space() {
        // a reflection mixing complex coordinates is not an isometry of ℂP²
        let mut m = DMatrix::<f64>::identity(6, 6);
        m[(1, 1)] = -1.0;
        let d = MapDescriptor::IsometryConjugate {
            inner: Box::new(MapDescriptor::HopfComplex { n: 2 }),
            domain: Isometry::Identity,
            codomain: Isometry::Matrix {
                rows: linalg::matrix_to_rows(&m),
            },
        };
        // complex conjugation of one coordinate changes |⟨a,b⟩|
        assert!(d.build().is_err());
    }
}
