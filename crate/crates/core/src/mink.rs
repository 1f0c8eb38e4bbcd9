//! Minkowski space R^{1,2} with signature (-,+,+), the hyperboloid model of
//! H², and affine Lorentz isometries.

use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for membership invariants (unit hyperboloid, unit spacelike).
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Tolerance for derived identities (isometry invariance, compositions).
pub const IDENTITY_TOL: f64 = 1e-9;
/// Side tests with `|<p, v>|` at or below this value resolve to `Side::Plus`.
pub const TIE_BAND: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinkError {
    #[error("not in timelike future")]
    NotInTimelikeFuture,
    #[error("segment not visible")]
    SegmentNotVisible,
    #[error("segment is not spacelike")]
    SegmentNotSpacelike,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MinkVec(pub [f64; 3]);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CausalType {
    Timelike,
    Null,
    Spacelike,
}

impl MinkVec {
    pub const ZERO: MinkVec = MinkVec([0.0; 3]);
    pub const E0: MinkVec = MinkVec([1.0, 0.0, 0.0]);

    pub const fn new(t: f64, x: f64, y: f64) -> Self {
        MinkVec([t, x, y])
    }

    #[inline]
    pub fn inner(&self, other: &MinkVec) -> f64 {
        mink_inner(self, other)
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn causal_type(&self, tol: f64) -> CausalType {
        let q = self.norm_sq();
        if q < -tol {
            CausalType::Timelike
        } else if q > tol {
            CausalType::Spacelike
        } else {
            CausalType::Null
        }
    }

    pub fn is_future_timelike(&self) -> bool {
        self.0[0] > 0.0 && self.norm_sq() < 0.0
    }

    /// Euclidean max-norm of the coordinates, used for relative tolerances.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn dist_inf(&self, other: &MinkVec) -> f64 {
        (*self - *other).max_abs()
    }

    /// Lorentzian cross product: the vector w with `<w, z> = det[u, v, z]`.
    pub fn cross(&self, other: &MinkVec) -> MinkVec {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = other.0;
        let e = [a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0];
        // raise the index with J = diag(-1, 1, 1)
        MinkVec([-e[0], e[1], e[2]])
    }

    /// Rescale a spacelike vector to Minkowski norm one.
    pub fn unit_spacelike(&self) -> MinkVec {
        *self * (1.0 / self.norm_sq().sqrt())
    }

    pub fn t(&self) -> f64 {
        self.0[0]
    }
}

impl Index<usize> for MinkVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for MinkVec {
    type Output = MinkVec;
    fn add(self, o: MinkVec) -> MinkVec {
        MinkVec([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for MinkVec {
    fn add_assign(&mut self, o: MinkVec) {
        *self = *self + o;
    }
}

impl Sub for MinkVec {
    type Output = MinkVec;
    fn sub(self, o: MinkVec) -> MinkVec {
        MinkVec([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl SubAssign for MinkVec {
    fn sub_assign(&mut self, o: MinkVec) {
        *self = *self - o;
    }
}

impl Mul<f64> for MinkVec {
    type Output = MinkVec;
    fn mul(self, s: f64) -> MinkVec {
        MinkVec([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Neg for MinkVec {
    type Output = MinkVec;
    fn neg(self) -> MinkVec {
        self * -1.0
    }
}

impl fmt::Display for MinkVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

/// The Minkowski form `-u0 v0 + u1 v1 + u2 v2`.
#[inline]
pub fn mink_inner(u: &MinkVec, v: &MinkVec) -> f64 {
    -u.0[0] * v.0[0] + u.0[1] * v.0[1] + u.0[2] * v.0[2]
}

/// Row-major 3×3 real matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    pub const J: Mat3 = Mat3([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn apply(&self, v: &MinkVec) -> MinkVec {
        let m = &self.0;
        MinkVec([
            m[0][0] * v.0[0] + m[0][1] * v.0[1] + m[0][2] * v.0[2],
            m[1][0] * v.0[0] + m[1][1] * v.0[1] + m[1][2] * v.0[2],
            m[2][0] * v.0[0] + m[2][1] * v.0[1] + m[2][2] * v.0[2],
        ])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse of a Lorentz matrix, `J Aᵀ J`. Only valid for `A ∈ O(1,2)`.
    pub fn lorentz_inverse(&self) -> Mat3 {
        Mat3::J.mul(&self.transpose()).mul(&Mat3::J)
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn dist_inf(&self, o: &Mat3) -> f64 {
        let mut d = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.0[i][j] - o.0[i][j]).abs());
            }
        }
        d
    }

    pub fn column(&self, j: usize) -> MinkVec {
        MinkVec([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    /// Largest deviation of `AᵀJA` from `J`.
    pub fn lorentz_defect(&self) -> f64 {
        self.transpose().mul(&Mat3::J).mul(self).dist_inf(&Mat3::J)
    }

    pub fn is_orthochronous_lorentz(&self, tol: f64) -> bool {
        self.lorentz_defect() <= tol * self.max_abs().powi(2).max(1.0)
            && self.0[0][0] > 0.0
            && (self.det() - 1.0).abs() <= tol.max(1e-12) * self.max_abs().powi(3).max(1.0)
    }

    /// Rotation of the spatial plane by `theta`, fixing the time axis.
    pub fn rotation(theta: f64) -> Mat3 {
        let (s, c) = theta.sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    /// Boost along the x1 axis with rapidity `d`; moves the origin of H² a
    /// hyperbolic distance `d` toward positive x1.
    pub fn boost_x(d: f64) -> Mat3 {
        let (c, s) = (d.cosh(), d.sinh());
        Mat3([[c, s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }
}

/// Affine Lorentz isometry `p ↦ A p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub linear: Mat3,
    pub translation: MinkVec,
}

impl Isometry {
    pub const IDENTITY: Isometry = Isometry {
        linear: Mat3::IDENTITY,
        translation: MinkVec::ZERO,
    };

    pub fn new(linear: Mat3, translation: MinkVec) -> Self {
        Isometry {
            linear,
            translation,
        }
    }

    pub fn linear(linear: Mat3) -> Self {
        Isometry::new(linear, MinkVec::ZERO)
    }

    pub fn translation(t: MinkVec) -> Self {
        Isometry::new(Mat3::IDENTITY, t)
    }

    pub fn apply(&self, p: &MinkVec) -> MinkVec {
        self.linear.apply(p) + self.translation
    }

    /// `(A, t)(B, s) = (AB, A s + t)`.
    pub fn compose(&self, h: &Isometry) -> Isometry {
        Isometry {
            linear: self.linear.mul(&h.linear),
            translation: self.linear.apply(&h.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Isometry {
        let inv = self.linear.lorentz_inverse();
        Isometry {
            linear: inv,
            translation: -inv.apply(&self.translation),
        }
    }

    pub fn dist_inf(&self, o: &Isometry) -> f64 {
        self.linear
            .dist_inf(&o.linear)
            .max(self.translation.dist_inf(&o.translation))
    }
}

/// Point of the upper sheet of the unit hyperboloid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint(MinkVec);

impl HPoint {
    pub const ORIGIN: HPoint = HPoint(MinkVec::E0);

    /// Rescales a future timelike vector onto the hyperboloid.
    pub fn from_timelike(v: MinkVec) -> Option<HPoint> {
        let q = v.norm_sq();
        if q < 0.0 && v.0[0] > 0.0 {
            Some(HPoint(v * (1.0 / (-q).sqrt())))
        } else {
            None
        }
    }

    /// Wraps a vector already on the hyperboloid, renormalizing roundoff.
    pub fn new_unchecked(v: MinkVec) -> HPoint {
        HPoint::from_timelike(v).unwrap_or(HPoint(v))
    }

    /// Hyperbolic polar coordinates about the origin.
    pub fn from_polar(r: f64, theta: f64) -> HPoint {
        let (s, c) = theta.sin_cos();
        HPoint(MinkVec([r.cosh(), r.sinh() * c, r.sinh() * s]))
    }

    /// Point with Poincaré disk coordinates `(x, y)`, `x² + y² < 1`.
    pub fn from_disk(x: f64, y: f64) -> HPoint {
        let r2 = x * x + y * y;
        let k = 1.0 / (1.0 - r2);
        HPoint(MinkVec([(1.0 + r2) * k, 2.0 * x * k, 2.0 * y * k]))
    }

    pub fn to_disk(&self) -> (f64, f64) {
        let v = self.0;
        (v.0[1] / (1.0 + v.0[0]), v.0[2] / (1.0 + v.0[0]))
    }

    pub fn vec(&self) -> MinkVec {
        self.0
    }

    pub fn is_valid(&self) -> bool {
        (self.0.norm_sq() + 1.0).abs() <= MEMBERSHIP_TOL * self.0.max_abs().powi(2).max(1.0)
            && self.0 .0[0] > 0.0
    }

    pub fn transform(&self, a: &Mat3) -> HPoint {
        HPoint::new_unchecked(a.apply(&self.0))
    }

    /// Point at distance `t` along the unit tangent `dir` (tangent at self).
    pub fn exp(&self, dir: &MinkVec, t: f64) -> HPoint {
        HPoint::new_unchecked(self.0 * t.cosh() + *dir * t.sinh())
    }

    /// Unit tangent at self pointing toward `q`, or `None` if `q == self`.
    pub fn direction_to(&self, q: &HPoint) -> Option<MinkVec> {
        let c = -self.0.inner(&q.0);
        let w = q.0 - self.0 * c;
        let n = w.norm_sq();
        if n <= 1e-30 {
            None
        } else {
            Some(w * (1.0 / n.sqrt()))
        }
    }

    /// Point at fraction `s ∈ [0, 1]` of the geodesic segment to `q`.
    pub fn lerp(&self, q: &HPoint, s: f64) -> HPoint {
        match self.direction_to(q) {
            Some(dir) => self.exp(&dir, s * h2_dist(self, q)),
            None => *self,
        }
    }
}

/// Hyperbolic distance `arccosh(-<p, q>)`, argument clamped at 1.
pub fn h2_dist(p: &HPoint, q: &HPoint) -> f64 {
    let c = -p.0.inner(&q.0);
    if c < 1.0 + 1e-6 {
        // arccosh loses precision near 1; <p-q, p-q> = 4 sinh²(d/2)
        let chord = (p.0 - q.0).norm_sq().max(0.0).sqrt();
        return 2.0 * (chord / 2.0).asinh();
    }
    c.max(1.0).acosh()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }

    pub fn of_value(x: f64) -> Side {
        if x >= -TIE_BAND {
            Side::Plus
        } else {
            Side::Minus
        }
    }
}

/// Geodesic `H² ∩ v^⊥` with positive side `{p : <p, v> > 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicH2 {
    pub dual: MinkVec,
}

impl GeodesicH2 {
    pub fn new(dual: MinkVec) -> Self {
        GeodesicH2 {
            dual: dual.unit_spacelike(),
        }
    }

    pub fn transform(&self, a: &Mat3) -> GeodesicH2 {
        GeodesicH2 {
            dual: a.apply(&self.dual),
        }
    }

    /// Ideal endpoints as boundary angles, `(θ₁, θ₂)` with null vectors
    /// `(1, cos θ, sin θ)` orthogonal to the dual vector.
    pub fn endpoints(&self) -> (f64, f64) {
        // (1, cos θ, sin θ)·v = -v0 + v1 cos θ + v2 sin θ = 0
        let [v0, v1, v2] = self.dual.0;
        let rho = v1.hypot(v2);
        let phi = v2.atan2(v1);
        let delta = (v0 / rho).clamp(-1.0, 1.0).acos();
        (phi - delta, phi + delta)
    }

    /// Closest point of the geodesic to `p`.
    pub fn foot(&self, p: &HPoint) -> HPoint {
        let v = self.dual;
        HPoint::new_unchecked(p.vec() - v * p.vec().inner(&v))
    }

    /// Signed distance from `p` to the geodesic, positive on the plus side.
    pub fn signed_dist(&self, p: &HPoint) -> f64 {
        p.vec().inner(&self.dual).asinh()
    }
}

pub fn geodesic_side(l: &GeodesicH2, p: &HPoint) -> Side {
    Side::of_value(p.vec().inner(&l.dual))
}

/// Two geodesics cross iff their ideal endpoint pairs link on the circle.
pub fn geodesics_cross(a: &GeodesicH2, b: &GeodesicH2) -> bool {
    let (a1, a2) = a.endpoints();
    let (b1, b2) = b.endpoints();
    let inside = |t: f64| {
        // is angle t strictly within the arc (a1, a2) (counterclockwise)?
        let span = (a2 - a1).rem_euclid(std::f64::consts::TAU);
        let off = (t - a1).rem_euclid(std::f64::consts::TAU);
        off > 1e-12 && off < span - 1e-12
    };
    inside(b1) != inside(b2)
}

pub fn lorentz_dist_point(p: &MinkVec, q: &MinkVec) -> Result<f64, MinkError> {
    let d = *p - *q;
    let n = d.norm_sq();
    if n >= 0.0 || d.0[0] <= 0.0 {
        Err(MinkError::NotInTimelikeFuture)
    } else {
        Ok((-n).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentMax {
    pub value: f64,
    pub argmax: MinkVec,
    /// Segment parameter of the maximizer in `[0, 1]`.
    pub s: f64,
}

/// Maximal Lorentzian distance from `p` to the spacelike segment `[a, b]`.
pub fn lorentz_dist_segment(
    p: &MinkVec,
    a: &MinkVec,
    b: &MinkVec,
) -> Result<SegmentMax, MinkError> {
    let d = *b - *a;
    let dd = d.norm_sq();
    let w = *p - *a;
    let s = if dd <= 0.0 {
        if d.max_abs() > 0.0 {
            return Err(MinkError::SegmentNotSpacelike);
        }
        0.0
    } else {
        (w.inner(&d) / dd).clamp(0.0, 1.0)
    };
    let q = *a + d * s;
    match lorentz_dist_point(p, &q) {
        Ok(value) => Ok(SegmentMax { value, argmax: q, s }),
        Err(_) => Err(MinkError::SegmentNotVisible),
    }
}
