//! Exact distance on a level set of the cosmological time.
//!
//! The level `{τ = a}` is made of sectors `x(R) + a·u` (metric `a²` times
//! hyperbolic) glued along flat bands `x + s·v̂ + a·n(θ)` over the edges
//! (metric `ds² + a²dθ²`, width = weight). A shortest path crosses exactly
//! the bands separating its ends, so only the entry and exit parameters on
//! each band are free, and the length is convex in them.

use nalgebra::{DMatrix, DVector};

use crate::lamination::Crossing;
use crate::mink::{HPoint, MinkVec};
use crate::singularity::{CosmoPoint, Piece, Spacetime};

use super::MetricError;

/// Arclength parametrization `θ ↦ cosh θ·f + sinh θ·e` of a leaf.
#[derive(Clone, Copy, Debug)]
pub struct LeafFrame {
    pub f: MinkVec,
    pub e: MinkVec,
}

impl LeafFrame {
    pub fn new(dual: &MinkVec, reference: &HPoint) -> Self {
        let v = *dual;
        let p = reference.vec();
        let f = p - v * p.inner(&v);
        let f = f * (1.0 / (-f.norm_sq()).sqrt());
        let e = v.cross(&f);
        let e = e * (1.0 / e.norm_sq().sqrt());
        LeafFrame { f, e }
    }

    pub fn point(&self, th: f64) -> MinkVec {
        self.f * th.cosh() + self.e * th.sinh()
    }

    pub fn tangent(&self, th: f64) -> MinkVec {
        self.f * th.sinh() + self.e * th.cosh()
    }

    /// Parameter of the point of the leaf nearest to `u`.
    pub fn param(&self, u: &MinkVec) -> f64 {
        let (x, y) = (-u.inner(&self.f), u.inner(&self.e));
        (y / x).atanh()
    }
}

/// Hyperbolic distance: from the chord for close points, where `acosh`
/// loses precision, and from the inner product otherwise, where the chord
/// cancels catastrophically for points far out on the hyperboloid.
pub fn hdist(p: &MinkVec, q: &MinkVec) -> f64 {
    let c = -p.inner(q);
    if c > 2.0 {
        return c.acosh();
    }
    let d = *p - *q;
    2.0 * (0.5 * d.norm_sq().max(0.0).sqrt()).asinh()
}

/// Derivative of `hdist(p, q(θ))` given `q` and `q'`.
fn hdist_deriv(p: &MinkVec, q: &MinkVec, dq: &MinkVec) -> f64 {
    let c = -p.inner(q);
    if c > 2.0 {
        return -p.inner(dq) / (c * c - 1.0).sqrt();
    }
    let d = *q - *p;
    let n = d.norm_sq().max(0.0).sqrt();
    if n < 1e-300 {
        return 0.0;
    }
    d.inner(dq) / n / (1.0 + 0.25 * n * n).sqrt()
}

/// A band crossed by the path.
#[derive(Clone, Debug)]
pub struct BandSpan {
    pub frame: LeafFrame,
    /// Unit dual vector oriented in the direction of travel.
    pub dir: MinkVec,
    /// Width crossed; partial when an end of the path lies in this band.
    pub width: f64,
    /// Point of Σ where the path enters the band.
    pub entry: MinkVec,
    pub theta_in: Option<f64>,
    pub theta_out: Option<f64>,
}

/// Combinatorics of a shortest path between two points of a τ-level.
#[derive(Clone, Debug)]
pub struct StructuredProblem {
    pub start: Option<(MinkVec, MinkVec)>,
    pub end: Option<(MinkVec, MinkVec)>,
    pub bands: Vec<BandSpan>,
    /// Both ends in the same band.
    pub same_band: Option<SameBand>,
    pub needed_radius: f64,
}

/// Two points over one edge: the path is straight in the flat band metric.
#[derive(Clone, Debug)]
pub struct SameBand {
    pub frame: LeafFrame,
    /// Distance across the band between the ends.
    pub offset: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    /// Retraction points of the ends on Σ.
    pub rx: MinkVec,
    pub ry: MinkVec,
}

/// `(vertex, direction)` of a point in a sector, `None` for band points.
fn sector_end(c: &CosmoPoint) -> Option<(MinkVec, MinkVec)> {
    match c.piece {
        Piece::Vertex { .. } => Some((c.r, c.u.vec())),
        Piece::Band { .. } => None,
    }
}

fn nudge(u: &HPoint, v: &MinkVec, t: f64) -> HPoint {
    let n = *v + u.vec() * v.inner(&u.vec());
    u.exp(&(n * (1.0 / n.norm_sq().sqrt())), t)
}

fn parallel(v: &MinkVec, w: &MinkVec) -> bool {
    (v.inner(w).abs() - 1.0).abs() < 1e-8 && (v.dist_inf(w) < 1e-6 * v.max_abs() || v.dist_inf(&-*w) < 1e-6 * v.max_abs())
}

/// Position across the band from the minus side of the leaf's stored dual.
fn band_position(c: &CosmoPoint, canonical: &MinkVec) -> Option<(f64, f64)> {
    match &c.piece {
        Piece::Band { leaf, s, .. } => {
            let w = leaf.weight;
            Some(if leaf.dual().inner(canonical) > 0.0 { (s * w, w) } else { ((1.0 - s) * w, w) })
        }
        Piece::Vertex { .. } => None,
    }
}

impl StructuredProblem {
    pub fn new(st: &Spacetime, cx: &CosmoPoint, cy: &CosmoPoint) -> Result<Self, MetricError> {
        if let (Piece::Band { leaf: lx, .. }, Piece::Band { leaf: ly, .. }) = (&cx.piece, &cy.piece) {
            if parallel(&lx.dual(), &ly.dual()) {
                let canon = lx.dual();
                let frame = LeafFrame::new(&canon, &cx.u);
                let (px, _) = band_position(cx, &canon).unwrap();
                let (py, _) = band_position(cy, &canon).unwrap();
                return Ok(StructuredProblem {
                    start: None,
                    end: None,
                    bands: Vec::new(),
                    same_band: Some(SameBand {
                        offset: (px - py).abs(),
                        theta_x: frame.param(&cx.u.vec()),
                        theta_y: frame.param(&cy.u.vec()),
                        frame,
                        rx: cx.r,
                        ry: cy.r,
                    }),
                    needed_radius: 0.0,
                });
            }
        }
        // move band ends off their leaf, to the side of the band they start in
        let off = |c: &CosmoPoint, other: &CosmoPoint| match &c.piece {
            Piece::Band { leaf, .. } => {
                let v = leaf.dual();
                let toward = if other.u.vec().inner(&v) > 0.0 { 1.0 } else { -1.0 };
                nudge(&c.u, &v, -toward * 1e-7)
            }
            Piece::Vertex { rep } => *rep,
        };
        let (ux, uy) = (off(cx, cy), off(cy, cx));
        let (crossings, needed) = st.leaves().crossings(&ux, &uy);
        let check = |c: Option<&Crossing>, p: &CosmoPoint| match (&p.piece, c) {
            (Piece::Band { leaf, .. }, Some(c)) => parallel(&leaf.dual(), &c.leaf.dual()),
            (Piece::Band { .. }, None) => false,
            _ => true,
        };
        if !check(crossings.first(), cx) || !check(crossings.last(), cy) {
            return Err(MetricError::Combinatorics(
                "band end not among the separating leaves".into(),
            ));
        }
        let dist = crate::mink::h2_dist(&ux, &uy);
        let dir = ux.direction_to(&uy);
        let mut cur = cx.r;
        let mut bands = Vec::with_capacity(crossings.len());
        let k = crossings.len();
        for (i, c) in crossings.iter().enumerate() {
            let d = c.leaf.dual() * c.sign;
            let mid = match dir {
                Some(dir) => ux.exp(&dir, c.param * dist),
                None => ux,
            };
            let frame = LeafFrame::new(&c.leaf.dual(), &mid);
            let mut width = c.leaf.weight;
            let mut theta_in = None;
            let mut theta_out = None;
            if i == 0 {
                if let Some((pos, w)) = band_position(cx, &d) {
                    width = w - pos;
                    theta_in = Some(frame.param(&cx.u.vec()));
                }
            }
            if i + 1 == k {
                if let Some((pos, _)) = band_position(cy, &d) {
                    width = if theta_in.is_some() { width - (c.leaf.weight - pos) } else { pos };
                    theta_out = Some(frame.param(&cy.u.vec()));
                }
            }
            bands.push(BandSpan {
                frame,
                dir: d,
                width: width.max(0.0),
                entry: cur,
                theta_in,
                theta_out,
            });
            cur += d * width.max(0.0);
        }
        Ok(StructuredProblem {
            start: sector_end(cx),
            end: sector_end(cy),
            bands,
            same_band: None,
            needed_radius: needed,
        })
    }

    /// Sum of crossed widths: the tree distance between the two ends.
    pub fn tree_distance(&self) -> f64 {
        match &self.same_band {
            Some(b) => b.offset,
            None => self.bands.iter().fold(0.0, |s, b| s + b.width),
        }
    }

    /// Entry and exit parameters of each band from the free variables.
    fn unpack(&self, x: &[f64]) -> Vec<(f64, f64)> {
        let mut it = x.iter();
        self.bands
            .iter()
            .map(|b| {
                let i = b.theta_in.unwrap_or_else(|| *it.next().unwrap());
                let o = b.theta_out.unwrap_or_else(|| *it.next().unwrap());
                (i, o)
            })
            .collect()
    }

    fn initial(&self) -> Vec<f64> {
        let mut x = Vec::new();
        for b in &self.bands {
            let mid = b.frame.param(&b.frame.f);
            if b.theta_in.is_none() {
                x.push(b.theta_out.unwrap_or(mid));
            }
            if b.theta_out.is_none() {
                x.push(b.theta_in.unwrap_or(mid));
            }
        }
        x
    }

    pub fn length(&self, a: f64, x: &[f64]) -> f64 {
        if let Some(b) = &self.same_band {
            return b.offset.hypot(a * (b.theta_x - b.theta_y));
        }
        let th = self.unpack(x);
        let mut total = 0.0;
        let mut prev = self.start.map(|(_, u)| u);
        for (b, (ti, to)) in self.bands.iter().zip(&th) {
            if let Some(p) = prev {
                total += a * hdist(&p, &b.frame.point(*ti));
            }
            total += b.width.hypot(a * (to - ti));
            prev = Some(b.frame.point(*to));
        }
        if let (Some(p), Some((_, u))) = (prev, self.end) {
            total += a * hdist(&p, &u);
        }
        total
    }

    pub fn gradient(&self, a: f64, x: &[f64]) -> Vec<f64> {
        let th = self.unpack(x);
        let n = self.bands.len();
        let mut d_in = vec![0.0; n];
        let mut d_out = vec![0.0; n];
        for (i, (b, (ti, to))) in self.bands.iter().zip(&th).enumerate() {
            let q = b.frame.point(*ti);
            let dq = b.frame.tangent(*ti);
            let prev = if i == 0 {
                self.start.map(|(_, u)| u)
            } else {
                Some(self.bands[i - 1].frame.point(th[i - 1].1))
            };
            if let Some(p) = prev {
                d_in[i] += a * hdist_deriv(&p, &q, &dq);
                if i > 0 {
                    let pb = &self.bands[i - 1];
                    d_out[i - 1] += a * hdist_deriv(&q, &p, &pb.frame.tangent(th[i - 1].1));
                }
            }
            let h = b.width.hypot(a * (to - ti));
            if h > 0.0 {
                let g = a * a * (to - ti) / h;
                d_out[i] += g;
                d_in[i] -= g;
            }
        }
        if let (Some(last), Some((_, u))) = (self.bands.last(), self.end) {
            let to = th[n - 1].1;
            d_out[n - 1] += a * hdist_deriv(&u, &last.frame.point(to), &last.frame.tangent(to));
        }
        let mut g = Vec::with_capacity(x.len());
        for (i, b) in self.bands.iter().enumerate() {
            if b.theta_in.is_none() {
                g.push(d_in[i]);
            }
            if b.theta_out.is_none() {
                g.push(d_out[i]);
            }
        }
        g
    }

    /// Minimal length at level `a` with the optimal band parameters.
    pub fn solve(&self, a: f64) -> Result<(f64, Vec<(f64, f64)>), MetricError> {
        if self.same_band.is_some() || self.bands.is_empty() {
            let len = match (self.start, self.end) {
                (Some((_, p)), Some((_, q))) if self.same_band.is_none() => a * hdist(&p, &q),
                _ => self.length(a, &[]),
            };
            return Ok((len, Vec::new()));
        }
        let x0 = self.initial();
        if x0.is_empty() {
            return Ok((self.length(a, &x0), self.unpack(&x0)));
        }
        let x = self.newton(a, x0);
        Ok((self.length(a, &x), self.unpack(&x)))
    }

    /// Length with overflowing leaf parameters mapped to `+∞`.
    fn guarded_length(&self, a: f64, x: &[f64]) -> f64 {
        if x.iter().any(|t| t.abs() > THETA_MAX) {
            return f64::INFINITY;
        }
        let len = self.length(a, x);
        if len.is_nan() {
            f64::INFINITY
        } else {
            len
        }
    }

    /// Damped Newton on the convex length, with a finite-difference Hessian
    /// of the analytic gradient. Stops once a step no longer decreases the
    /// length or the Newton decrement is at rounding level.
    fn newton(&self, a: f64, mut x: Vec<f64>) -> Vec<f64> {
        let n = x.len();
        let mut f = self.guarded_length(a, &x);
        for _ in 0..NEWTON_ITERS {
            let g = DVector::from_vec(self.gradient(a, &x));
            let mut hess = DMatrix::zeros(n, n);
            for j in 0..n {
                let h = 1e-5 * (1.0 + x[j].abs());
                let mut xp = x.clone();
                xp[j] += h;
                let mut xm = x.clone();
                xm[j] -= h;
                let col = (DVector::from_vec(self.gradient(a, &xp)) - DVector::from_vec(self.gradient(a, &xm))) / (2.0 * h);
                hess.set_column(j, &col);
            }
            let hess = (&hess + hess.transpose()) * 0.5;
            let scale = hess.diagonal().amax().max(1e-300);
            let mut mu = 0.0;
            let step = loop {
                let damped = &hess + DMatrix::identity(n, n) * mu;
                if let Some(ch) = damped.cholesky() {
                    break -ch.solve(&g);
                }
                mu = if mu == 0.0 { 1e-12 * scale } else { mu * 100.0 };
            };
            let slope = g.dot(&step);
            if slope.is_nan() || slope >= 0.0 || -slope <= 1e-15 * f {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, di)| xi + t * di).collect();
                let ft = self.guarded_length(a, &trial);
                if ft <= f + 1e-4 * t * slope {
                    x = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        x
    }

    /// Points of the optimal path on the level `a`. Nodes are spaced by
    /// `spacing` in the unscaled hyperbolic angle, which bounds the chord
    /// error on the level independently of `a`.
    pub fn path_points(&self, a: f64, thetas: &[(f64, f64)], spacing: f64, max_per_piece: usize) -> Vec<MinkVec> {
        let count = |len: f64| ((len / spacing).ceil() as usize).clamp(2, max_per_piece.max(2));
        let mut pts = Vec::new();
        let sector = |pts: &mut Vec<MinkVec>, x: MinkVec, p: MinkVec, q: MinkVec| {
            let (hp, hq) = (HPoint::new_unchecked(p), HPoint::new_unchecked(q));
            let n = count(hdist(&p, &q));
            for k in 0..n {
                let s = k as f64 / n as f64;
                pts.push(x + hp.lerp(&hq, s).vec() * a);
            }
        };
        if let Some(b) = &self.same_band {
            let n = count((b.theta_y - b.theta_x).abs());
            for k in 0..=n {
                let s = k as f64 / n as f64;
                let th = b.theta_x + s * (b.theta_y - b.theta_x);
                pts.push(b.rx + (b.ry - b.rx) * s + b.frame.point(th) * a);
            }
            return pts;
        }
        let mut prev = self.start;
        for (b, (ti, to)) in self.bands.iter().zip(thetas) {
            if let Some((x, p)) = prev {
                sector(&mut pts, x, p, b.frame.point(*ti));
            }
            // the level is ruled across a band, so only the turn along the leaf needs nodes
            let n = count((to - ti).abs());
            for k in 0..n {
                let s = k as f64 / n as f64;
                pts.push(b.entry + b.dir * (s * b.width) + b.frame.point(ti + s * (to - ti)) * a);
            }
            prev = Some((b.entry + b.dir * b.width, b.frame.point(*to)));
        }
        if let (Some((x, p)), Some((_, q))) = (prev, self.end) {
            sector(&mut pts, x, p, q);
        }
        if let Some((x, u)) = self.end {
            pts.push(x + u * a);
        } else if let (Some(b), Some(t)) = (self.bands.last(), thetas.last()) {
            pts.push(b.entry + b.dir * b.width + b.frame.point(t.1) * a);
        }
        pts
    }
}

/// Leaf parameters beyond this overflow `cosh`.
const THETA_MAX: f64 = 300.0;

const NEWTON_ITERS: usize = 60;
