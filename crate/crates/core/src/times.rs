//! Time functions on the domain, their level sets and the flow of
//! `ξ = ∇T/⟨∇T,∇T⟩`.
//!
//! `gradient` returns the future-pointing vector `-J·dT`, so that
//! `⟨gradient, future timelike⟩ < 0`; in this convention `ξ = -g/⟨g,g⟩`.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::mink::{HPoint, MinkVec};
use crate::singularity::{CosmoPoint, GradientLine, Piece, SingularityError, Spacetime};

pub const GRAD_STEP: f64 = 1e-5;
pub const SHAPE_STEP: f64 = 1e-4;
pub const QUASICONCAVITY_SLACK: f64 = 1e-3;
pub const CONCAVITY_SLACK: f64 = 1e-7;
pub const LEVEL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeError {
    #[error(transparent)]
    Singularity(#[from] SingularityError),
    #[error("step size underflow in the level flow, last good point {0}")]
    StepUnderflow(MinkVec),
    #[error("flow left the domain at {0}")]
    LeftDomain(MinkVec),
    #[error("gradient is not timelike at {0}")]
    NotTimelike(MinkVec),
    #[error("level {level} not found on the line: {reason}")]
    RootFind { level: f64, reason: String },
    #[error("unknown time function {0:?}")]
    Unknown(String),
}

/// A Γ-invariant Cauchy time on the domain.
pub trait TimeFunction: Send + Sync {
    fn name(&self) -> String;

    fn smoothness(&self) -> &'static str {
        "C1"
    }

    fn value(&self, p: &MinkVec) -> Result<f64, TimeError>;

    fn gradient(&self, p: &MinkVec) -> Result<MinkVec, TimeError> {
        fd_gradient(self, p, GRAD_STEP)
    }

    /// Point of the cosmological gradient line at which `T = a`.
    fn level_on_line(&self, line: &GradientLine, a: f64) -> Result<MinkVec, TimeError> {
        let f = |t: f64| self.value(&line.at(t)).map(|v| v - a);
        let t = solve_increasing(f, a, a)?;
        Ok(line.at(t))
    }
}

/// Central-difference gradient, returned future-pointing.
pub fn fd_gradient<T: TimeFunction + ?Sized>(time: &T, p: &MinkVec, h: f64) -> Result<MinkVec, TimeError> {
    let mut d = [0.0; 3];
    for (i, di) in d.iter_mut().enumerate() {
        let mut e = MinkVec::ZERO;
        e.0[i] = h;
        *di = (time.value(&(*p + e))? - time.value(&(*p - e))?) / (2.0 * h);
    }
    Ok(MinkVec::new(d[0], -d[1], -d[2]))
}

/// `ξ = -g/⟨g,g⟩`, so `dT(ξ) = 1`.
pub fn xi(time: &dyn TimeFunction, p: &MinkVec) -> Result<MinkVec, TimeError> {
    let g = time.gradient(p)?;
    let n = g.norm_sq();
    if n >= 0.0 || g.0[0] <= 0.0 {
        return Err(TimeError::NotTimelike(*p));
    }
    Ok(g * (-1.0 / n))
}

/// Root of an increasing function on `(0, ∞)` by safeguarded secant steps,
/// starting from `guess`.
pub fn solve_increasing<F>(f: F, guess: f64, level: f64) -> Result<f64, TimeError>
where
    F: Fn(f64) -> Result<f64, TimeError>,
{
    let fail = |reason: &str| TimeError::RootFind {
        level,
        reason: reason.to_string(),
    };
    let mut t0 = guess.max(1e-300);
    let mut f0 = f(t0)?;
    if f0.abs() <= LEVEL_TOL * level.max(1.0) {
        return Ok(t0);
    }
    // bracket [lo, hi] with f(lo) < 0 < f(hi)
    let (mut lo, mut hi, mut flo, mut fhi) = if f0 < 0.0 {
        let mut hi = t0;
        let mut fhi = f0;
        while fhi < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(fail("no upper bracket"));
            }
            fhi = f(hi)?;
        }
        (t0.max(hi / 2.0), hi, f(t0.max(hi / 2.0))?, fhi)
    } else {
        let mut lo = t0;
        let mut flo = f0;
        while flo > 0.0 {
            lo *= 0.5;
            if lo < 1e-15 * guess {
                return Err(fail("no lower bracket"));
            }
            flo = match f(lo) {
                Ok(v) => v,
                Err(_) => return Err(fail("line leaves the domain below the level")),
            };
        }
        (lo, (2.0 * lo).min(t0), flo, f((2.0 * lo).min(t0))?)
    };
    if flo > 0.0 || fhi < 0.0 {
        (lo, hi, flo, fhi) = (lo.min(hi), lo.max(hi), flo.min(fhi), flo.max(fhi));
    }
    // Illinois regula falsi
    let mut side = 0;
    for _ in 0..200 {
        t0 = (lo * fhi - hi * flo) / (fhi - flo);
        f0 = f(t0)?;
        if f0.abs() <= LEVEL_TOL * level.max(1.0) || (hi - lo) < 1e-15 * hi {
            return Ok(t0);
        }
        if f0 < 0.0 {
            lo = t0;
            flo = f0;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t0;
            fhi = f0;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Err(fail("no convergence"))
}

/// The cosmological time.
#[derive(Clone)]
pub struct CosmologicalTime {
    pub st: Arc<Spacetime>,
}

impl TimeFunction for CosmologicalTime {
    fn name(&self) -> String {
        "cosmological".into()
    }

    fn smoothness(&self) -> &'static str {
        "C1,1"
    }

    fn value(&self, p: &MinkVec) -> Result<f64, TimeError> {
        Ok(self.st.cosmo_time(p)?.tau)
    }

    fn gradient(&self, p: &MinkVec) -> Result<MinkVec, TimeError> {
        Ok(self.st.cosmo_time(p)?.u.vec())
    }

    fn level_on_line(&self, line: &GradientLine, a: f64) -> Result<MinkVec, TimeError> {
        Ok(line.at(a))
    }
}

/// Lorentzian distance to the convex hull of the vertices of Σ.
#[derive(Clone)]
pub struct HullTime {
    pub st: Arc<Spacetime>,
    /// Radius around the gradient direction within which neighbouring
    /// vertices enter the candidate set.
    pub ring: f64,
    pub max_iter: usize,
}

impl HullTime {
    pub fn new(st: Arc<Spacetime>) -> Self {
        HullTime {
            st,
            ring: 1.0,
            max_iter: 200,
        }
    }

    /// Vertices of Σ around the retraction of `p`, with the barycentric
    /// coordinates of the retraction itself.
    pub fn candidates(&self, c: &CosmoPoint) -> (Vec<MinkVec>, Vec<f64>) {
        let leaves = self.st.leaves();
        let (rep, x) = match &c.piece {
            Piece::Vertex { rep } => (*rep, c.r),
            Piece::Band { leaf, start, .. } => (nudge(&c.u, &leaf.dual(), -1e-3), *start),
        };
        let mut verts = vec![x];
        for leaf in leaves.leaves_near(&c.u, self.ring).0 {
            let v = leaf.dual();
            let foot = leaf.geodesic.foot(&c.u);
            let far = if leaf.side(&rep).sign() > 0.0 { -1e-3 } else { 1e-3 };
            let q = nudge(&foot, &v, far);
            let y = x + self.st.bend(&rep, &q);
            if verts.iter().all(|z| z.dist_inf(&y) > 1e-9) {
                verts.push(y);
            }
        }
        let mut start = vec![0.0; verts.len()];
        match &c.piece {
            Piece::Vertex { .. } => start[0] = 1.0,
            Piece::Band { leaf, s, .. } => {
                let end = x + leaf.dual() * leaf.weight;
                let j = verts.iter().position(|z| z.dist_inf(&end) < 1e-9);
                match j {
                    Some(j) => {
                        start[0] = 1.0 - s;
                        start[j] = *s;
                    }
                    None => start[0] = 1.0,
                }
            }
        }
        (verts, start)
    }

    /// Maximum of the Lorentzian distance from `p` over the hull of `verts`
    /// by projected gradient ascent from each start.
    pub fn ascend(&self, p: &MinkVec, verts: &[MinkVec], starts: &[Vec<f64>]) -> f64 {
        let obj = |lam: &[f64]| -> f64 {
            let q = combine(verts, lam);
            let w = *p - q;
            let n = w.norm_sq();
            if n < 0.0 && w.0[0] > 0.0 {
                (-n).sqrt()
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut best = f64::NEG_INFINITY;
        for s in starts {
            let mut lam = s.clone();
            let mut f = obj(&lam);
            if !f.is_finite() {
                continue;
            }
            let mut step = 1.0;
            for _ in 0..self.max_iter {
                let w = *p - combine(verts, &lam);
                // d/dλ_i sqrt(-<w,w>) = <w, x_i>/f
                let grad: Vec<f64> = verts.iter().map(|x| w.inner(x) / f).collect();
                let mut improved = false;
                while step > 1e-14 {
                    let trial: Vec<f64> = lam.iter().zip(&grad).map(|(l, g)| l + step * g).collect();
                    let trial = project_simplex(&trial);
                    let ft = obj(&trial);
                    if ft > f + 1e-15 {
                        lam = trial;
                        f = ft;
                        improved = true;
                        step *= 2.0;
                        break;
                    }
                    step *= 0.5;
                }
                if !improved {
                    break;
                }
            }
            best = best.max(f);
        }
        best
    }
}

fn nudge(p: &HPoint, v: &MinkVec, t: f64) -> HPoint {
    let n = *v + p.vec() * v.inner(&p.vec());
    let n = n * (1.0 / n.norm_sq().sqrt());
    p.exp(&n, t)
}

fn combine(verts: &[MinkVec], lam: &[f64]) -> MinkVec {
    verts.iter().zip(lam).fold(MinkVec::ZERO, |acc, (x, l)| acc + *x * *l)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

impl TimeFunction for HullTime {
    fn name(&self) -> String {
        "hull".into()
    }

    fn smoothness(&self) -> &'static str {
        "C1,1"
    }

    fn value(&self, p: &MinkVec) -> Result<f64, TimeError> {
        let c = self.st.cosmo_time(p)?;
        let (verts, start) = self.candidates(&c);
        let m = verts.len() as f64;
        let mut starts = vec![start, vec![1.0 / m; verts.len()]];
        for i in 0..verts.len() {
            let mut e = vec![0.0; verts.len()];
            e[i] = 1.0;
            starts.push(e);
        }
        Ok(self.ascend(p, &verts, &starts).max(c.tau))
    }
}

/// `T = τ·φ(u)` with `φ(u) = 1 + ε·Σ g(⟨u, v_leaf⟩)`, `g(s) = (1 - s²/σ²)²`
/// on `|s| < σ`.
#[derive(Clone)]
pub struct WarpedTime {
    pub st: Arc<Spacetime>,
    pub eps: f64,
    pub sigma: f64,
}

impl WarpedTime {
    pub fn new(st: Arc<Spacetime>) -> Self {
        WarpedTime {
            st,
            eps: 0.05,
            sigma: 1.0,
        }
    }

    pub fn factor(&self, u: &HPoint) -> f64 {
        let reach = self.sigma.asinh() + 1e-9;
        let sum: f64 = self
            .st
            .leaves()
            .leaves_near(u, reach)
            .0
            .iter()
            .map(|l| {
                let s = u.vec().inner(&l.dual()) / self.sigma;
                if s.abs() < 1.0 {
                    (1.0 - s * s).powi(2)
                } else {
                    0.0
                }
            })
            .sum();
        1.0 + self.eps * sum
    }
}

impl TimeFunction for WarpedTime {
    fn name(&self) -> String {
        "warped".into()
    }

    fn value(&self, p: &MinkVec) -> Result<f64, TimeError> {
        let c = self.st.cosmo_time(p)?;
        Ok(c.tau * self.factor(&c.u))
    }

    fn level_on_line(&self, line: &GradientLine, a: f64) -> Result<MinkVec, TimeError> {
        Ok(line.at(a / self.factor(&line.u)))
    }
}

/// `τ + A·sin(k·x1)·bump(p)`: not quasi-concave, used as a negative example.
#[derive(Clone)]
pub struct WiggleTime {
    pub st: Arc<Spacetime>,
    pub amplitude: f64,
    pub frequency: f64,
    pub center: MinkVec,
    pub width: f64,
}

impl WiggleTime {
    pub fn new(st: Arc<Spacetime>) -> Self {
        WiggleTime {
            st,
            amplitude: 0.3,
            frequency: 5.0,
            center: MinkVec::new(2.0, 0.0, 0.0),
            width: 1.0,
        }
    }
}

impl TimeFunction for WiggleTime {
    fn name(&self) -> String {
        "user:wiggle".into()
    }

    fn smoothness(&self) -> &'static str {
        "C1"
    }

    fn value(&self, p: &MinkVec) -> Result<f64, TimeError> {
        let d = *p - self.center;
        let e2 = d.0.iter().map(|x| x * x).sum::<f64>() / (self.width * self.width);
        let bump = (-e2).exp();
        Ok(self.st.cosmo_time(p)?.tau + self.amplitude * (self.frequency * p.0[1]).sin() * bump)
    }
}

/// Names accepted in configurations.
pub const TIME_NAMES: [&str; 4] = ["cosmological", "hull", "warped", "user:wiggle"];

pub fn time_by_name(name: &str, st: Arc<Spacetime>) -> Result<Arc<dyn TimeFunction>, TimeError> {
    Ok(match name {
        "cosmological" => Arc::new(CosmologicalTime { st }),
        "hull" => Arc::new(HullTime::new(st)),
        "warped" => Arc::new(WarpedTime::new(st)),
        "user:wiggle" => Arc::new(WiggleTime::new(st)),
        other => return Err(TimeError::Unknown(other.to_string())),
    })
}

// Dormand-Prince 5(4) tableau
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Flow of `ξ` for time `t` with adaptive Dormand-Prince steps, followed by
/// a Newton correction onto the target level.
pub fn xi_flow(time: &dyn TimeFunction, p: &MinkVec, t: f64) -> Result<MinkVec, TimeError> {
    if t == 0.0 {
        return Ok(*p);
    }
    let start = time.value(p)?;
    if start + t <= 0.0 {
        return Err(TimeError::LeftDomain(*p));
    }
    let tol = 1e-10;
    let mut x = *p;
    let mut s = 0.0;
    let mut h = t.signum() * t.abs().min(0.1);
    let f = |q: &MinkVec| xi(time, q).map_err(|_| TimeError::LeftDomain(*q));
    // negligible flows are left to the Newton correction below
    while (t - s).abs() > 1e-12 * t.abs().max(1.0) {
        if (s + h - t) * t.signum() > 0.0 {
            h = t - s;
        }
        let mut k = [MinkVec::ZERO; 7];
        let mut ok = true;
        for i in 0..7 {
            let y = (0..i).fold(x, |acc, j| acc + k[j] * (h * DP_A[i][j]));
            match f(&y) {
                Ok(v) => k[i] = v,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        let err = if ok {
            let y5 = (0..7).fold(MinkVec::ZERO, |acc, i| acc + k[i] * DP_B5[i]);
            let y4 = (0..7).fold(MinkVec::ZERO, |acc, i| acc + k[i] * DP_B4[i]);
            (y5 - y4).max_abs() * h.abs()
        } else {
            f64::INFINITY
        };
        if err <= tol {
            x = (0..7).fold(x, |acc, i| acc + k[i] * (h * DP_B5[i]));
            s += h;
        }
        let factor = if err == 0.0 { 4.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 4.0) };
        h *= factor;
        if h.abs() < 1e-14 && (t - s).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(TimeError::StepUnderflow(x));
        }
    }
    let target = start + t;
    for _ in 0..3 {
        let gap = target - time.value(&x)?;
        if gap.abs() < 1e-12 {
            break;
        }
        x = x + xi(time, &x)? * gap;
    }
    Ok(x)
}

/// Minimum of the second fundamental form over sampled tangent directions.
#[derive(Clone, Debug, Serialize)]
pub struct ShapeReport {
    pub time: String,
    pub samples: usize,
    pub directions: usize,
    pub min_value: f64,
    pub argmin_point: MinkVec,
    pub argmin_direction: MinkVec,
    pub failures: Vec<MinkVec>,
    pub passed: bool,
}

/// Orthonormal basis of the spacelike plane orthogonal to the unit
/// timelike `n`.
pub fn tangent_basis(n: &MinkVec) -> (MinkVec, MinkVec) {
    let pick = |e: MinkVec| {
        let x = e + *n * e.inner(n);
        x * (1.0 / x.norm_sq().sqrt())
    };
    let e1 = pick(MinkVec::new(0.0, 1.0, 0.0));
    let e2 = MinkVec::new(0.0, 0.0, 1.0) + *n * n.0[2] - e1 * e1.0[2];
    (e1, e2 * (1.0 / e2.norm_sq().sqrt()))
}

fn unit_normal(time: &dyn TimeFunction, p: &MinkVec) -> Result<MinkVec, TimeError> {
    let g = time.gradient(p)?;
    let n = g.norm_sq();
    if n >= 0.0 {
        return Err(TimeError::NotTimelike(*p));
    }
    Ok(g * (1.0 / (-n).sqrt()))
}

/// `Π(X,X) = ⟨∇_X n, X⟩` by central differences at each sample, over
/// `directions` equally spaced unit tangent directions.
pub fn quasiconcavity_check(time: &dyn TimeFunction, samples: &[MinkVec], directions: usize) -> ShapeReport {
    let mut report = ShapeReport {
        time: time.name(),
        samples: samples.len(),
        directions,
        min_value: f64::INFINITY,
        argmin_point: MinkVec::ZERO,
        argmin_direction: MinkVec::ZERO,
        failures: Vec::new(),
        passed: true,
    };
    let h = SHAPE_STEP;
    for p in samples {
        let Ok(n) = unit_normal(time, p) else {
            report.failures.push(*p);
            continue;
        };
        let (e1, e2) = tangent_basis(&n);
        for k in 0..directions {
            let th = std::f64::consts::PI * k as f64 / directions as f64;
            let x = e1 * th.cos() + e2 * th.sin();
            let value = match (unit_normal(time, &(*p + x * h)), unit_normal(time, &(*p - x * h))) {
                (Ok(a), Ok(b)) => (a - b).inner(&x) / (2.0 * h),
                _ => {
                    report.failures.push(*p);
                    continue;
                }
            };
            if value < report.min_value {
                report.min_value = value;
                report.argmin_point = *p;
                report.argmin_direction = x;
            }
            if value < -QUASICONCAVITY_SLACK && !report.failures.contains(p) {
                report.failures.push(*p);
            }
        }
    }
    report.passed = report.failures.is_empty();
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcavityReport {
    pub time: String,
    pub segments: usize,
    pub worst_gap: f64,
    pub violations: usize,
    pub passed: bool,
}

/// Midpoint concavity `T((p+q)/2) ≥ (T(p)+T(q))/2` on each segment.
pub fn concavity_check(time: &dyn TimeFunction, segments: &[(MinkVec, MinkVec)]) -> ConcavityReport {
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for (p, q) in segments {
        let vals = (
            time.value(p),
            time.value(q),
            time.value(&((*p + *q) * 0.5)),
        );
        let (Ok(a), Ok(b), Ok(m)) = vals else {
            violations += 1;
            continue;
        };
        let gap = m - 0.5 * (a + b);
        worst = worst.min(gap);
        if gap < -CONCAVITY_SLACK {
            violations += 1;
        }
    }
    ConcavityReport {
        time: time.name(),
        segments: segments.len(),
        worst_gap: worst,
        violations,
        passed: violations == 0,
    }
}

/// Minkowski length of a spacelike polyline.
pub fn polyline_length(points: &[MinkVec]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm_sq().max(0.0).sqrt()).sum()
}
