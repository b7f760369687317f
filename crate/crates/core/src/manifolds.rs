//! Points, metrics and tangent spaces of the spaces the maps act on.
//!
//! Every point is stored as flat ambient Euclidean coordinates; a [`Space`]
//! says which submanifold those coordinates live on and how distances are
//! measured there.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::algebra::Quaternion;
use crate::linalg::{self, angle_between, dot, norm, Rng};
use crate::{Error, Result};

/// Tolerance for classifying inner-product level sets.
pub const IP_CLASS_TOL: f64 = 1e-9;

const POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    coords: Vec<f64>,
    radius: f64,
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        let n = norm(&coords);
        if (n - radius).abs() > POINT_TOL * radius.max(1.0) {
            return Err(Error::DomainViolation(format!("|coords| = {n} but radius is {radius}")));
        }
        Ok(Self { coords, radius })
    }

    /// Scale an arbitrary nonzero vector onto the sphere of the given radius.
    pub fn from_direction(v: &[f64], radius: f64) -> Result<Self> {
        let u = linalg::normalized(v).ok_or_else(|| Error::InvalidArgument("zero vector has no direction".into()))?;
        Ok(Self {
            coords: linalg::scale(&u, radius),
            radius,
        })
    }

    pub fn unit(v: &[f64]) -> Result<Self> {
        Self::from_direction(v, 1.0)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Intrinsic dimension `n` of `Sⁿ`.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn antipode(&self) -> Self {
        Self {
            coords: linalg::scale(&self.coords, -1.0),
            radius: self.radius,
        }
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Round-metric distance, `r · ∠(a, b)`.
pub fn sphere_distance(a: &SpherePoint, b: &SpherePoint) -> Result<f64> {
    if a.coords.len() != b.coords.len() {
        return Err(Error::DimensionMismatch {
            expected: a.coords.len(),
            got: b.coords.len(),
        });
    }
    if (a.radius - b.radius).abs() > POINT_TOL * a.radius.max(1.0) {
        return Err(Error::RadiusMismatch(a.radius, b.radius));
    }
    Ok(a.radius * angle_between(&a.coords, &b.coords))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPoint {
    pub first: SpherePoint,
    pub second: SpherePoint,
}

impl ProductPoint {
    pub fn new(first: SpherePoint, second: SpherePoint) -> Self {
        Self { first, second }
    }

    /// The point `(x, x)` of the diagonal.
    pub fn diagonal(x: &SpherePoint) -> Self {
        Self::new(x.clone(), x.clone())
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.first.coords.clone();
        c.extend_from_slice(&self.second.coords);
        c
    }
}

pub fn product_distance(p: &ProductPoint, q: &ProductPoint) -> Result<f64> {
    let d1 = sphere_distance(&p.first, &q.first)?;
    let d2 = sphere_distance(&p.second, &q.second)?;
    Ok(d1.hypot(d2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Complex,
    Quaternionic,
}

impl Field {
    pub fn real_dim(self) -> usize {
        match self {
            Field::Complex => 2,
            Field::Quaternionic => 4,
        }
    }
}

/// Hermitian product `Σ conj(a_k)·b_k`, returned as a quaternion (complex
/// values occupy the `w`, `x` slots).
///
/// Quaternionic lines are right `ℍ`-modules: the line through `v` is
/// `{v·q}`, so `⟨a·p, b·q⟩ = p̄·⟨a, b⟩·q` and the modulus is well defined.
pub fn hermitian(field: Field, a: &[f64], b: &[f64]) -> Quaternion {
    let k = field.real_dim();
    let mut acc = Quaternion::ZERO;
    for (ca, cb) in a.chunks(k).zip(b.chunks(k)) {
        let (qa, qb) = match field {
            Field::Complex => (
                Quaternion::new(ca[0], ca[1], 0.0, 0.0),
                Quaternion::new(cb[0], cb[1], 0.0, 0.0),
            ),
            Field::Quaternionic => (Quaternion::from_slice(ca), Quaternion::from_slice(cb)),
        };
        acc = acc + qa.conj() * qb;
    }
    acc
}

/// Right-multiply every `𝔽`-coordinate of `v` by the scalar `s`.
pub fn scalar_mul_right(field: Field, v: &[f64], s: Quaternion) -> Vec<f64> {
    let k = field.real_dim();
    let mut out = Vec::with_capacity(v.len());
    for c in v.chunks(k) {
        match field {
            Field::Complex => {
                let (a, b) = (c[0], c[1]);
                out.push(a * s.w - b * s.x);
                out.push(a * s.x + b * s.w);
            }
            Field::Quaternionic => {
                out.extend_from_slice(&(Quaternion::from_slice(c) * s).to_array());
            }
        }
    }
    out
}

/// Representative of the line through `b` closest to `a`.
pub fn align_representative(field: Field, a: &[f64], b: &[f64]) -> Vec<f64> {
    let h = hermitian(field, b, a);
    let n = h.norm();
    if n == 0.0 {
        return b.to_vec();
    }
    scalar_mul_right(field, b, h.scale(1.0 / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectivePoint {
    representative: Vec<f64>,
    field: Field,
}

impl ProjectivePoint {
    pub fn new(representative: Vec<f64>, field: Field) -> Result<Self> {
        if !representative.len().is_multiple_of(field.real_dim()) || representative.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} real coordinates do not form an {:?} vector",
                representative.len(),
                field
            )));
        }
        let n = norm(&representative);
        if (n - 1.0).abs() > POINT_TOL {
            return Err(Error::DomainViolation(format!("representative has norm {n}")));
        }
        Ok(Self { representative, field })
    }

    pub fn representative(&self) -> &[f64] {
        &self.representative
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// `n` of `𝔽Pⁿ`.
    pub fn n(&self) -> usize {
        self.representative.len() / self.field.real_dim() - 1
    }
}

/// Fubini–Study distance `arccos |⟨a, b⟩|`, in `[0, π/2]`.
///
/// Evaluated as the sphere distance between `a` and the representative of
/// `[b]` nearest to it, which equals the arccos form but keeps full
/// precision for nearby lines.
pub fn projective_distance(a: &ProjectivePoint, b: &ProjectivePoint) -> Result<f64> {
    if a.field != b.field {
        return Err(Error::FieldMismatch);
    }
    if a.representative.len() != b.representative.len() {
        return Err(Error::DimensionMismatch {
            expected: a.representative.len(),
            got: b.representative.len(),
        });
    }
    Ok(projective_distance_raw(a.field, &a.representative, &b.representative))
}

fn projective_distance_raw(field: Field, a: &[f64], b: &[f64]) -> f64 {
    let b = align_representative(field, a, b);
    angle_between(a, &b).min(PI / 2.0)
}

/// `count` i.i.d. uniform points on the unit sphere `S^dim`.
pub fn uniform_sample(dim: usize, count: usize, seed: u64) -> Vec<SpherePoint> {
    let mut rng = linalg::seeded_rng(seed);
    (0..count)
        .map(|_| SpherePoint {
            coords: linalg::random_unit(&mut rng, dim + 1),
            radius: 1.0,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IpClass {
    /// `IP = 1`, the diagonal.
    D,
    /// `IP = 0`, orthonormal pairs: the Stiefel manifold.
    U,
    /// `IP = −1`, the anti-diagonal.
    A,
    Generic,
}

/// The inner-product function on `Sⁿ × Sⁿ`.
pub fn ip(x: &SpherePoint, y: &SpherePoint) -> f64 {
    dot(&x.coords, &y.coords) / (x.radius * y.radius)
}

pub fn classify_ip(value: f64) -> IpClass {
    if (value - 1.0).abs() <= IP_CLASS_TOL {
        IpClass::D
    } else if (value + 1.0).abs() <= IP_CLASS_TOL {
        IpClass::A
    } else if value.abs() <= IP_CLASS_TOL {
        IpClass::U
    } else {
        IpClass::Generic
    }
}

pub fn ip_class(x: &SpherePoint, y: &SpherePoint) -> IpClass {
    classify_ip(ip(x, y))
}

/// Orthogonal projection of `v` onto `T_x Sⁿ(r)`.
pub fn tangent_project(x: &SpherePoint, v: &[f64]) -> Vec<f64> {
    let r2 = x.radius * x.radius;
    linalg::axpy(v, -dot(v, &x.coords) / r2, &x.coords)
}

/// Volume of the round `Sⁿ(r)`.
pub fn sphere_volume(n: usize, r: f64) -> f64 {
    // vol(Sⁿ) = 2π^{(n+1)/2} / Γ((n+1)/2), via the recursion vol(Sⁿ) = 2π/(n−1)·vol(Sⁿ⁻²)
    let unit = if n == 0 {
        2.0
    } else if n == 1 {
        2.0 * PI
    } else {
        let mut v = if n.is_multiple_of(2) { 2.0 } else { 2.0 * PI };
        let mut k = if n.is_multiple_of(2) { 0 } else { 1 };
        while k < n {
            k += 2;
            v *= 2.0 * PI / (k as f64 - 1.0);
        }
        v
    };
    unit * r.powi(n as i32)
}

/// A 2-vector in `Λ²ℝ⁴`, components ordered `e12, e13, e14, e23, e24, e34`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bivector4(pub [f64; 6]);

/// Hodge star on `Λ²ℝ⁴` as a signed permutation of components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HodgeStar {
    signs: [f64; 6],
}

const HODGE_PERM: [usize; 6] = [5, 4, 3, 2, 1, 0];

impl HodgeStar {
    /// `*e12 = e34`, `*e13 = −e24`, `*e14 = e23` and symmetrically.
    pub fn standard() -> Self {
        Self {
            signs: [1.0, -1.0, 1.0, 1.0, -1.0, 1.0],
        }
    }

    /// The standard star with the sign of one output component flipped.
    pub fn with_flipped_sign(component: usize) -> Self {
        let mut s = Self::standard();
        s.signs[component % 6] *= -1.0;
        s
    }

    pub fn apply(&self, w: &Bivector4) -> Bivector4 {
        let mut out = [0.0; 6];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.signs[k] * w.0[HODGE_PERM[k]];
        }
        Bivector4(out)
    }
}

impl Bivector4 {
    pub fn wedge(x: &[f64], y: &[f64]) -> Self {
        let m = |i: usize, j: usize| x[i] * y[j] - x[j] * y[i];
        Bivector4([m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3)])
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Components in the orthonormal eigenbases
    /// `E₊ = {(e12+e34), (e13−e24), (e14+e23)}/√2` and
    /// `E₋ = {(e12−e34), (e13+e24), (e14−e23)}/√2` of the standard star.
    pub fn split(&self) -> ([f64; 3], [f64; 3]) {
        let w = &self.0;
        let s = FRAC_1_SQRT_2;
        (
            [s * (w[0] + w[5]), s * (w[1] - w[4]), s * (w[2] + w[3])],
            [s * (w[0] - w[5]), s * (w[1] + w[4]), s * (w[2] - w[3])],
        )
    }

    pub fn from_split(plus: [f64; 3], minus: [f64; 3]) -> Self {
        let s = FRAC_1_SQRT_2;
        Bivector4([
            s * (plus[0] + minus[0]),
            s * (plus[1] + minus[1]),
            s * (plus[2] + minus[2]),
            s * (plus[2] - minus[2]),
            s * (minus[1] - plus[1]),
            s * (plus[0] - minus[0]),
        ])
    }

    /// `(|P₊ω|, |P₋ω|)` with `P± = (1 ± *)/2` built from the given star.
    pub fn projection_norms(&self, star: &HodgeStar) -> (f64, f64) {
        let s = star.apply(self);
        let plus: Vec<f64> = self.0.iter().zip(&s.0).map(|(a, b)| 0.5 * (a + b)).collect();
        let minus: Vec<f64> = self.0.iter().zip(&s.0).map(|(a, b)| 0.5 * (a - b)).collect();
        (norm(&plus), norm(&minus))
    }

    /// `ω ∧ ω / (e1∧e2∧e3∧e4)`; vanishes exactly on decomposable 2-vectors.
    pub fn pfaffian_form(&self) -> f64 {
        let w = &self.0;
        2.0 * (w[0] * w[5] - w[1] * w[4] + w[2] * w[3])
    }
}

/// A tangent space given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub base: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl TangentFrame {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of an ambient vector in this frame.
    pub fn coordinates(&self, v: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|b| dot(b, v)).collect()
    }

    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.len()];
        for (c, b) in coeffs.iter().zip(&self.basis) {
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        out
    }

    /// Largest deviation from orthonormality and from tangency.
    pub fn defect(&self, space: &Space) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
            let t = space.project_tangent(&self.base, a);
            worst = worst.max(linalg::dist(&t, a));
        }
        worst
    }
}

/// The spaces maps are defined between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    /// `S^dim(radius) ⊂ ℝ^{dim+1}`.
    Sphere { dim: usize, radius: f64 },
    /// Riemannian product; coordinates are concatenated.
    Product { first: Box<Space>, second: Box<Space> },
    /// Orthonormal 2-frames `(x, y)` in `ℝ^m`, equivalently the unit tangent
    /// bundle `US^{m−1}`, with the metric induced from `S^{m−1} × S^{m−1}`.
    Stiefel { m: usize },
    /// `𝔽Pⁿ` with the metric making the Hopf projection a Riemannian
    /// submersion; points are unit representatives in `𝔽^{n+1}`.
    Projective { field: Field, n: usize },
    /// Oriented 2-planes in `ℝ⁴` as unit decomposable 2-vectors in `Λ²ℝ⁴`,
    /// isometric to `S²(1/√2) × S²(1/√2)` through the Hodge split.
    Grassmann,
}

impl Space {
    pub fn sphere(dim: usize, radius: f64) -> Self {
        Space::Sphere { dim, radius }
    }

    pub fn product(a: Space, b: Space) -> Self {
        Space::Product {
            first: Box::new(a),
            second: Box::new(b),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Space::Sphere { dim, .. } => dim + 1,
            Space::Product { first, second } => first.ambient_dim() + second.ambient_dim(),
            Space::Stiefel { m } => 2 * m,
            Space::Projective { field, n } => field.real_dim() * (n + 1),
            Space::Grassmann => 6,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Space::Sphere { dim, .. } => *dim,
            Space::Product { first, second } => first.intrinsic_dim() + second.intrinsic_dim(),
            Space::Stiefel { m } => 2 * m - 3,
            Space::Projective { field, n } => field.real_dim() * n,
            Space::Grassmann => 4,
        }
    }

    /// Whether [`Space::distance`] is the intrinsic geodesic distance. For
    /// Stiefel manifolds it is the (smaller) distance of the ambient product.
    pub fn distance_is_intrinsic(&self) -> bool {
        match self {
            Space::Stiefel { .. } => false,
            Space::Product { first, second } => first.distance_is_intrinsic() && second.distance_is_intrinsic(),
            _ => true,
        }
    }

    /// Radius when this is a round sphere.
    pub fn sphere_radius(&self) -> Option<f64> {
        match self {
            Space::Sphere { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    fn split_at(&self) -> Option<(usize, &Space, &Space)> {
        match self {
            Space::Product { first, second } => Some((first.ambient_dim(), first, second)),
            _ => None,
        }
    }

    pub fn check(&self, p: &[f64], tol: f64) -> Result<()> {
        if p.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: p.len(),
            });
        }
        let fail = |what: String| Err(Error::DomainViolation(what));
        match self {
            Space::Sphere { radius, .. } => {
                let n = norm(p);
                if (n - radius).abs() > tol * radius.max(1.0) {
                    return fail(format!("|x| = {n}, expected {radius}"));
                }
            }
            Space::Product { first, second } => {
                let k = first.ambient_dim();
                first.check(&p[..k], tol)?;
                second.check(&p[k..], tol)?;
            }
            Space::Stiefel { m } => {
                let (x, y) = p.split_at(*m);
                let (nx, ny, c) = (norm(x), norm(y), dot(x, y));
                if (nx - 1.0).abs() > tol || (ny - 1.0).abs() > tol || c.abs() > tol {
                    return fail(format!("not an orthonormal frame: |x|={nx}, |y|={ny}, x·y={c}"));
                }
            }
            Space::Projective { .. } => {
                let n = norm(p);
                if (n - 1.0).abs() > tol {
                    return fail(format!("representative has norm {n}"));
                }
            }
            Space::Grassmann => {
                let (a, b) = Bivector4(p.try_into().expect("length checked")).split();
                let (na, nb) = (norm(&a), norm(&b));
                if (na - FRAC_1_SQRT_2).abs() > tol || (nb - FRAC_1_SQRT_2).abs() > tol {
                    return fail(format!("not a unit decomposable 2-vector: |P+|={na}, |P-|={nb}"));
                }
            }
        }
        Ok(())
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Space::Sphere { radius, .. } => radius * angle_between(a, b),
            Space::Product { first, second } => {
                let k = first.ambient_dim();
                first
                    .distance(&a[..k], &b[..k])
                    .hypot(second.distance(&a[k..], &b[k..]))
            }
            Space::Stiefel { m } => {
                let d1 = angle_between(&a[..*m], &b[..*m]);
                let d2 = angle_between(&a[*m..], &b[*m..]);
                d1.hypot(d2)
            }
            Space::Projective { field, .. } => projective_distance_raw(*field, a, b),
            Space::Grassmann => {
                let (pa, ma) = Bivector4(a.try_into().expect("6 components")).split();
                let (pb, mb) = Bivector4(b.try_into().expect("6 components")).split();
                let d1 = FRAC_1_SQRT_2 * angle_between(&pa, &pb);
                let d2 = FRAC_1_SQRT_2 * angle_between(&ma, &mb);
                d1.hypot(d2)
            }
        }
    }

    /// Orthogonal projection of an ambient vector onto `T_p`.
    pub fn project_tangent(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Space::Sphere { .. } => {
                let r2 = dot(p, p);
                linalg::axpy(v, -dot(v, p) / r2, p)
            }
            Space::Product { first, second } => {
                let k = first.ambient_dim();
                let mut out = first.project_tangent(&p[..k], &v[..k]);
                out.extend(second.project_tangent(&p[k..], &v[k..]));
                out
            }
            Space::Stiefel { m } => {
                let (x, y) = p.split_at(*m);
                let (a, b) = v.split_at(*m);
                let mut t = linalg::axpy(a, -dot(a, x), x);
                t.extend(linalg::axpy(b, -dot(b, y), y));
                // normal of the constraint x·y = 0 inside S×S
                let mut nrm = y.to_vec();
                nrm.extend_from_slice(x);
                let c = dot(&t, &nrm) / dot(&nrm, &nrm);
                linalg::axpy(&t, -c, &nrm)
            }
            Space::Projective { field, .. } => {
                let vertical = vertical_basis(*field, p);
                linalg::reject(v, &vertical)
            }
            Space::Grassmann => {
                let w = Bivector4(p.try_into().expect("6 components"));
                let (a, b) = w.split();
                let ra = Bivector4::from_split(a, [0.0; 3]).0;
                let rb = Bivector4::from_split([0.0; 3], b).0;
                let ca = dot(v, &ra) / dot(&ra, &ra);
                let cb = dot(v, &rb) / dot(&rb, &rb);
                let t = linalg::axpy(v, -ca, &ra);
                linalg::axpy(&t, -cb, &rb)
            }
        }
    }

    /// Map a point of the ambient space near the manifold back onto it.
    pub fn retract(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Space::Sphere { radius, .. } => linalg::scale(p, radius / norm(p)),
            Space::Product { first, second } => {
                let k = first.ambient_dim();
                let mut out = first.retract(&p[..k]);
                out.extend(second.retract(&p[k..]));
                out
            }
            Space::Stiefel { m } => {
                let (x, y) = p.split_at(*m);
                let x = linalg::scale(x, 1.0 / norm(x));
                let y = linalg::axpy(y, -dot(y, &x), &x);
                let y = linalg::scale(&y, 1.0 / norm(&y));
                let mut out = x;
                out.extend(y);
                out
            }
            Space::Projective { .. } => linalg::scale(p, 1.0 / norm(p)),
            Space::Grassmann => {
                let (a, b) = Bivector4(p.try_into().expect("6 components")).split();
                let a = linalg::scale(&a, FRAC_1_SQRT_2 / norm(&a));
                let b = linalg::scale(&b, FRAC_1_SQRT_2 / norm(&b));
                Bivector4::from_split([a[0], a[1], a[2]], [b[0], b[1], b[2]]).0.to_vec()
            }
        }
    }

    /// Replace `p` by the representative nearest `reference` where points
    /// are only defined up to a symmetry (projective spaces); identity
    /// elsewhere.
    pub fn align(&self, reference: &[f64], p: &[f64]) -> Vec<f64> {
        match self {
            Space::Projective { field, .. } => align_representative(*field, reference, p),
            _ => p.to_vec(),
        }
    }

    /// Orthonormal tangent basis at `p`: ambient basis vectors are projected
    /// to `T_p`, taken in order of decreasing projected length, and
    /// Gram–Schmidt orthonormalised. For spheres this drops exactly the axis
    /// with the largest `|p_i|`.
    pub fn tangent_frame(&self, p: &[f64]) -> Result<TangentFrame> {
        let n = self.ambient_dim();
        let want = self.intrinsic_dim();
        let mut candidates: Vec<(f64, usize, Vec<f64>)> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let t = self.project_tangent(p, &e);
                (norm(&t), i, t)
            })
            .collect();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(want);
        for (_, _, t) in candidates {
            if basis.len() == want {
                break;
            }
            let r = linalg::reject(&linalg::reject(&t, &basis), &basis);
            let r = self.project_tangent(p, &r);
            let nr = norm(&r);
            if nr > 1e-6 {
                basis.push(linalg::scale(&r, 1.0 / nr));
            }
        }
        if basis.len() != want {
            return Err(Error::FrameConstruction(format!(
                "found {} of {want} tangent directions",
                basis.len()
            )));
        }
        Ok(TangentFrame {
            base: p.to_vec(),
            basis,
        })
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Space::Sphere { dim, radius } => linalg::scale(&linalg::random_unit(rng, dim + 1), *radius),
            Space::Product { first, second } => {
                let mut out = first.sample(rng);
                out.extend(second.sample(rng));
                out
            }
            Space::Stiefel { m } => {
                let x = linalg::random_unit(rng, *m);
                loop {
                    let g = linalg::gaussian_vec(rng, *m);
                    let y = linalg::axpy(&g, -dot(&g, &x), &x);
                    if let Some(y) = linalg::normalized(&y) {
                        let mut out = x;
                        out.extend(y);
                        return out;
                    }
                }
            }
            Space::Projective { field, n } => linalg::random_unit(rng, field.real_dim() * (n + 1)),
            Space::Grassmann => {
                let a = linalg::scale(&linalg::random_unit(rng, 3), FRAC_1_SQRT_2);
                let b = linalg::scale(&linalg::random_unit(rng, 3), FRAC_1_SQRT_2);
                Bivector4::from_split([a[0], a[1], a[2]], [b[0], b[1], b[2]]).0.to_vec()
            }
        }
    }

    /// Split product coordinates; `None` for non-products.
    pub fn split<'a>(&self, p: &'a [f64]) -> Option<(&'a [f64], &'a [f64])> {
        self.split_at().map(|(k, _, _)| p.split_at(k))
    }

    /// Volume, when known in closed form.
    pub fn volume(&self) -> Option<f64> {
        match self {
            Space::Sphere { dim, radius } => Some(sphere_volume(*dim, *radius)),
            Space::Product { first, second } => Some(first.volume()? * second.volume()?),
            _ => None,
        }
    }
}

/// Orthonormal basis of the fiber directions `p·𝔽₁` at a unit `p`.
fn vertical_basis(field: Field, p: &[f64]) -> Vec<Vec<f64>> {
    let units: &[Quaternion] = match field {
        Field::Complex => &[Quaternion::ONE, Quaternion::I],
        Field::Quaternionic => &[Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K],
    };
    let np = norm(p);
    units
        .iter()
        .map(|u| linalg::scale(&scalar_mul_right(field, p, *u), 1.0 / np))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_unit, seeded_rng};
    use std::f64::consts::SQRT_2;

    fn unit(v: &[f64]) -> SpherePoint {
        SpherePoint::unit(v).unwrap()
    }

    #[test]
    fn sphere_distance_examples() {
        let x = unit(&[1.0, 0.0, 0.0, 0.0]);
        let y = unit(&[0.0, 1.0, 0.0, 0.0]);
        assert!((sphere_distance(&x, &x.antipode()).unwrap() - PI).abs() < 1e-15);
        assert_eq!(sphere_distance(&x, &x).unwrap(), 0.0);
        assert!((sphere_distance(&x, &y).unwrap() - PI / 2.0).abs() < 1e-15);
        let z = SpherePoint::from_direction(&[1.0, 0.0, 0.0, 0.0], 2.0).unwrap();
        assert!(matches!(sphere_distance(&x, &z), Err(Error::RadiusMismatch(..))));
        assert!(sphere_distance(&x, &unit(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn sphere_point_rejects_wrong_radius() {
        assert!(SpherePoint::new(vec![1.0, 1.0], 1.0).is_err());
        assert!(SpherePoint::new(vec![0.6, 0.8], 1.0).is_ok());
        assert!(SpherePoint::new(vec![0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn product_distance_examples() {
        let mut rng = seeded_rng(1);
        let x = unit(&random_unit(&mut rng, 3));
        let y = unit(&random_unit(&mut rng, 3));
        let p = ProductPoint::new(x.clone(), y.clone());
        let far = ProductPoint::new(x.antipode(), y.antipode());
        assert!((product_distance(&p, &far).unwrap() - PI * SQRT_2).abs() < 1e-12);
        assert_eq!(product_distance(&p, &p).unwrap(), 0.0);
        let half = ProductPoint::new(x, y.antipode());
        assert!((product_distance(&p, &half).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn diagonal_is_a_sphere_of_radius_root_two() {
        let pts = uniform_sample(3, 2000, 4);
        let mut worst = 0.0f64;
        for pair in pts.chunks(2) {
            let (x, y) = (&pair[0], &pair[1]);
            let d = product_distance(&ProductPoint::diagonal(x), &ProductPoint::diagonal(y)).unwrap();
            let expected = SQRT_2 * ip(x, y).clamp(-1.0, 1.0).acos();
            worst = worst.max((d - expected).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn projective_examples() {
        let e1 = ProjectivePoint::new(vec![1.0, 0.0, 0.0, 0.0], Field::Complex).unwrap();
        let e2 = ProjectivePoint::new(vec![0.0, 0.0, 1.0, 0.0], Field::Complex).unwrap();
        assert!((projective_distance(&e1, &e2).unwrap() - PI / 2.0).abs() < 1e-15);

        let mut rng = seeded_rng(2);
        let v = random_unit(&mut rng, 6);
        let a = ProjectivePoint::new(v.clone(), Field::Complex).unwrap();
        let phase = Quaternion::new(0.3f64.cos(), 0.3f64.sin(), 0.0, 0.0);
        let b = ProjectivePoint::new(scalar_mul_right(Field::Complex, &v, phase), Field::Complex).unwrap();
        assert!(projective_distance(&a, &b).unwrap() < 1e-12);

        let w = random_unit(&mut rng, 8);
        let q = Quaternion::from_slice(&random_unit(&mut rng, 4));
        let a = ProjectivePoint::new(w.clone(), Field::Quaternionic).unwrap();
        let b = ProjectivePoint::new(scalar_mul_right(Field::Quaternionic, &w, q), Field::Quaternionic).unwrap();
        assert!(projective_distance(&a, &b).unwrap() < 1e-12);

        assert!(matches!(
            projective_distance(
                &e1,
                &ProjectivePoint::new(vec![1.0, 0.0, 0.0, 0.0], Field::Quaternionic).unwrap()
            ),
            Err(Error::FieldMismatch)
        ));
    }

    #[test]
    fn projective_distance_bounded_by_quarter_turn() {
        let mut rng = seeded_rng(8);
        for field in [Field::Complex, Field::Quaternionic] {
            for _ in 0..500 {
                let a = random_unit(&mut rng, 3 * field.real_dim());
                let b = random_unit(&mut rng, 3 * field.real_dim());
                let d = projective_distance_raw(field, &a, &b);
                assert!(d <= PI / 2.0 + 1e-12);
                let arccos = hermitian(field, &a, &b).norm().min(1.0).acos();
                assert!((d - arccos).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_centered() {
        let a = uniform_sample(2, 100_000, 17);
        let b = uniform_sample(2, 100_000, 17);
        assert_eq!(a, b);
        for k in 0..3 {
            let mean: f64 = a.iter().map(|p| p.coords()[k]).sum::<f64>() / a.len() as f64;
            assert!(mean.abs() < 0.02, "coordinate {k} mean {mean}");
        }
        for p in &a[..100] {
            assert!(SpherePoint::new(p.coords().to_vec(), 1.0).is_ok());
        }
    }

    #[test]
    fn ip_levels() {
        let x = unit(&[0.0, 0.6, 0.8]);
        assert_eq!(ip_class(&x, &x), IpClass::D);
        assert_eq!(ip_class(&x, &x.antipode()), IpClass::A);
        let y = unit(&[1.0, 0.0, 0.0]);
        assert_eq!(ip_class(&x, &y), IpClass::U);
        let mut frame = x.coords().to_vec();
        frame.extend_from_slice(y.coords());
        assert!(Space::Stiefel { m: 3 }.check(&frame, 1e-12).is_ok());
        assert_eq!(ip_class(&x, &unit(&[1.0, 1.0, 0.0])), IpClass::Generic);
    }

    #[test]
    fn ip_class_is_flip_symmetric() {
        let pts = uniform_sample(2, 200, 3);
        for pair in pts.chunks(2) {
            assert_eq!(ip_class(&pair[0], &pair[1]), ip_class(&pair[1], &pair[0]));
        }
    }

    #[test]
    fn tangent_projection_examples() {
        let x = unit(&[0.0, 0.0, 1.0]);
        assert!(norm(&tangent_project(&x, &[0.0, 0.0, 3.0])) < 1e-15);
        assert_eq!(tangent_project(&x, &[1.0, 2.0, 0.0]), vec![1.0, 2.0, 0.0]);
        let v = [0.3, -1.0, 2.0];
        let once = tangent_project(&x, &v);
        assert_eq!(tangent_project(&x, &once), once);
    }

    #[test]
    fn volumes() {
        assert!((sphere_volume(2, 1.0) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_volume(3, 1.0) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_volume(1, 2.0) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_volume(4, 1.0) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn frames_are_orthonormal_and_tangent() {
        let mut rng = seeded_rng(5);
        let spaces = [
            Space::sphere(3, 1.0),
            Space::sphere(2, 0.5),
            Space::product(Space::sphere(2, 1.0), Space::sphere(2, 1.0)),
            Space::Stiefel { m: 4 },
            Space::Projective {
                field: Field::Complex,
                n: 2,
            },
            Space::Projective {
                field: Field::Quaternionic,
                n: 1,
            },
            Space::Grassmann,
        ];
        for s in &spaces {
            for _ in 0..20 {
                let p = s.sample(&mut rng);
                s.check(&p, 1e-12).unwrap();
                let f = s.tangent_frame(&p).unwrap();
                assert_eq!(f.dim(), s.intrinsic_dim());
                assert!(f.defect(s) < 1e-10, "{s:?}");
            }
        }
    }

    #[test]
    fn sphere_frame_drops_largest_axis() {
        let s = Space::sphere(2, 1.0);
        let p = [0.1, 0.99498743710662, 0.0];
        let f = s.tangent_frame(&p).unwrap();
        // first axis is e3 (already tangent), then e1 projected
        assert_eq!(f.basis[0], vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn decomposable_bivectors_split_evenly() {
        let w = Bivector4::wedge(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]);
        let (p, m) = w.projection_norms(&HodgeStar::standard());
        assert!((p - FRAC_1_SQRT_2).abs() < 1e-15 && (m - FRAC_1_SQRT_2).abs() < 1e-15);
        let (a, b) = w.split();
        assert!((norm(&a) - p).abs() < 1e-15 && (norm(&b) - m).abs() < 1e-15);
        let back = Bivector4::from_split(a, b);
        assert!(linalg::dist(&back.0, &w.0) < 1e-15);
        // e12 + e34 is self-dual, hence not decomposable
        let sd = Bivector4([1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let (p, m) = sd.projection_norms(&HodgeStar::standard());
        assert!((p - SQRT_2).abs() < 1e-15 && m == 0.0);
        assert!(sd.pfaffian_form() != 0.0);
    }
}
