//! Flat spacetime obtained by bending the Fuchsian cone along a multicurve.
//!
//! The initial singularity Σ is the dual tree embedded in Minkowski space:
//! the region `R` goes to `x(R)`, the sum of `weight·v̂` over leaves
//! separating it from the base region, with `v̂` the leaf's unit dual vector
//! pointing away from the base region. The domain Ω splits into cones
//! `x(R) + t·u` with `u ∈ R` and flat bands `x(R) + s·w·v̂ + t·n` with `n` on
//! the leaf. The cosmological time is the `t` of that decomposition.

use serde::Serialize;
use thiserror::Error;

use crate::fuchsian::{GroupError, SurfaceGroup, Word};
use crate::lamination::{LaminationError, Leaf, LeafSet, MeasuredMulticurve};
use crate::mink::{h2_dist, HPoint, Isometry, MinkVec};
use crate::tree::DualTree;

/// Upper bound on region-to-region moves in one time evaluation.
pub const WALK_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularityError {
    #[error("point {0} is not in the domain")]
    NotInDomain(MinkVec),
    #[error("search not conclusive: {0}")]
    Inconclusive(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Lamination(#[from] LaminationError),
}

/// Where the retraction of a point lands on Σ.
#[derive(Clone, Debug, Serialize)]
pub enum Piece {
    /// A vertex `x(R)`; `rep` is a point of `R` off every leaf.
    Vertex { rep: HPoint },
    /// The edge dual to `leaf`, at fraction `s` of its length from `start`.
    /// `leaf.geodesic.dual` is oriented from `start`'s region to the other.
    Band { leaf: Leaf, start: MinkVec, s: f64 },
}

/// Cosmological time with its retraction `r` and unit direction `u`, so
/// that `p = r + tau·u`.
#[derive(Clone, Debug, Serialize)]
pub struct CosmoPoint {
    pub tau: f64,
    pub r: MinkVec,
    pub u: HPoint,
    pub piece: Piece,
}

impl CosmoPoint {
    pub fn point(&self) -> MinkVec {
        self.r + self.u.vec() * self.tau
    }

    /// Point at time `t` on the same gradient line.
    pub fn at(&self, t: f64) -> MinkVec {
        self.r + self.u.vec() * t
    }

    pub fn line(&self) -> GradientLine {
        GradientLine { r: self.r, u: self.u }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradientLine {
    pub r: MinkVec,
    pub u: HPoint,
}

impl GradientLine {
    pub fn at(&self, t: f64) -> MinkVec {
        self.r + self.u.vec() * t
    }
}

/// Spacelike edge of Σ.
#[derive(Clone, Debug, Serialize)]
pub struct SigmaEdge {
    pub start: MinkVec,
    pub end: MinkVec,
    pub leaf: Leaf,
}

/// Region on the walk: a representative point and its vertex.
#[derive(Clone, Copy, Debug)]
struct Seed {
    rep: HPoint,
    x: MinkVec,
}

#[derive(Clone, Debug)]
pub struct Spacetime {
    pub lamination: MeasuredMulticurve,
    pub tree: DualTree,
}

fn future_norm(w: &MinkVec) -> Option<f64> {
    let n = w.norm_sq();
    (n < 0.0 && w.0[0] > 0.0).then(|| (-n).sqrt())
}

impl Spacetime {
    /// Builds the spacetime with leaves enumerated over `B(o, rho)`.
    pub fn new(g: &SurfaceGroup, lamination: MeasuredMulticurve, rho: f64) -> Result<Self, SingularityError> {
        let leaves = lamination.lift(g, rho)?;
        Ok(Self::from_leaves(lamination, leaves))
    }

    /// As [`Self::new`], enumerating at most `cap` group elements.
    pub fn with_cap(g: &SurfaceGroup, lamination: MeasuredMulticurve, rho: f64, cap: usize) -> Result<Self, SingularityError> {
        let leaves = lamination.lift_capped(g, rho, cap)?;
        Ok(Self::from_leaves(lamination, leaves))
    }

    pub fn from_leaves(lamination: MeasuredMulticurve, leaves: LeafSet) -> Self {
        Spacetime {
            lamination,
            tree: DualTree::new(leaves),
        }
    }

    pub fn group(&self) -> &SurfaceGroup {
        self.tree.group()
    }

    pub fn leaves(&self) -> &LeafSet {
        &self.tree.leaves
    }

    /// Perturbed basepoint in the base region `R₀`.
    pub fn base(&self) -> HPoint {
        self.tree.base
    }

    /// Sum of `weight·v̂` over leaves crossed from `from` to `to`, with `v̂`
    /// pointing away from `from`.
    pub fn bend(&self, from: &HPoint, to: &HPoint) -> MinkVec {
        self.leaves()
            .leaves_crossing(from, to)
            .iter()
            .fold(MinkVec::ZERO, |acc, c| acc + c.leaf.dual() * (c.sign * c.leaf.weight))
    }

    /// Vertex `x(R)` of the region containing `p`.
    pub fn vertex_at(&self, p: &HPoint) -> MinkVec {
        let p = self.leaves().perturb_off_leaves(p);
        self.bend(&self.base(), &p)
    }

    pub fn sigma_vertex(&self, region: &crate::tree::RegionId) -> MinkVec {
        self.vertex_at(&region.rep)
    }

    /// Holonomy `(A_γ, t_γ)` with `t_γ = x(γ·R₀)`.
    pub fn holonomy(&self, gamma: &Word) -> Isometry {
        let a = self.group().eval(gamma);
        let base = self.base();
        Isometry::new(a, self.bend(&base, &base.transform(&a)))
    }

    /// Cosmological data of `iso·c.point()` where `iso` is the holonomy of
    /// `gamma`. Exact by equivariance, so it needs no search near the image.
    pub fn cosmo_image(&self, c: &CosmoPoint, gamma: &Word, iso: &Isometry) -> CosmoPoint {
        let piece = match &c.piece {
            Piece::Vertex { rep } => Piece::Vertex {
                rep: rep.transform(&iso.linear),
            },
            Piece::Band { leaf, start, s } => Piece::Band {
                leaf: leaf.image(gamma, &iso.linear, &self.group().basepoint),
                start: iso.apply(start),
                s: *s,
            },
        };
        CosmoPoint {
            tau: c.tau,
            r: iso.apply(&c.r),
            u: c.u.transform(&iso.linear),
            piece,
        }
    }

    /// Vertices met walking from the region of `p` to the region of `q`.
    pub fn sigma_path(&self, p: &HPoint, q: &HPoint) -> Vec<MinkVec> {
        let p = self.leaves().perturb_off_leaves(p);
        let q = self.leaves().perturb_off_leaves(q);
        let mut x = self.bend(&self.base(), &p);
        let mut path = vec![x];
        for c in self.leaves().leaves_crossing(&p, &q) {
            x += c.leaf.dual() * (c.sign * c.leaf.weight);
            path.push(x);
        }
        path
    }

    /// Edges of Σ dual to leaves within `radius` of the projection of `p`.
    pub fn sigma_edges_near(&self, p: &MinkVec, radius: f64) -> Vec<SigmaEdge> {
        let center = project_to_h2(p);
        let (near, _) = self.leaves().leaves_near(&center, radius);
        near.into_iter()
            .map(|leaf| {
                let v = leaf.dual();
                let foot = leaf.geodesic.foot(&center);
                let normal = v + foot.vec() * v.inner(&foot.vec());
                let normal = normal * (1.0 / normal.norm_sq().sqrt());
                // step to the minus side, then the edge runs along +v
                let minus = foot.exp(&normal, -1e-3);
                let start = self.vertex_at(&minus);
                SigmaEdge {
                    start,
                    end: start + v * leaf.weight,
                    leaf,
                }
            })
            .collect()
    }

    /// Cosmological time of `p`, its retraction and gradient direction.
    pub fn cosmo_time(&self, p: &MinkVec) -> Result<CosmoPoint, SingularityError> {
        self.cosmo_time_hinted(p, None)
    }

    /// As [`Self::cosmo_time`], starting the walk from the region of `hint`
    /// when it gives a valid start.
    pub fn cosmo_time_hinted(&self, p: &MinkVec, hint: Option<&CosmoPoint>) -> Result<CosmoPoint, SingularityError> {
        let mut best: Option<(f64, Seed)> = None;
        let consider = |best: &mut Option<(f64, Seed)>, seed: Seed| {
            if let Some(n) = future_norm(&(*p - seed.x)) {
                if best.as_ref().is_none_or(|(b, _)| n > *b) {
                    *best = Some((n, seed));
                }
            }
        };
        if let Some(h) = hint {
            if let Some(seed) = self.seed_of(h) {
                consider(&mut best, seed);
            }
        }
        if best.is_none() {
            let target = project_to_h2(p);
            let base = self.base();
            let mut x = MinkVec::ZERO;
            consider(&mut best, Seed { rep: base, x });
            let dist = h2_dist(&base, &target);
            let crossings = self.leaves().leaves_crossing(&base, &target);
            if let Some(dir) = base.direction_to(&target) {
                for (i, c) in crossings.iter().enumerate() {
                    let d = c.leaf.dual() * (c.sign * c.leaf.weight);
                    if let Some(done) = self.band_check(p, x, &c.leaf, c.sign) {
                        return Ok(done);
                    }
                    x += d;
                    let next = crossings.get(i + 1).map_or(1.0, |n| n.param);
                    let rep = base.exp(&dir, 0.5 * (c.param + next) * dist);
                    consider(&mut best, Seed { rep, x });
                }
            }
        }
        if best.is_none() {
            match self.ring_search(p) {
                Ok(seed) => consider(&mut best, seed),
                Err(Some(done)) => return Ok(done),
                Err(None) => {}
            }
        }
        match best {
            Some((_, seed)) => self.walk(p, seed),
            None => Err(SingularityError::NotInDomain(*p)),
        }
    }

    /// Regions on both sides of leaves near the projection of `p`, widening
    /// the ring until one has its vertex in the past of `p` or `p` lies over
    /// one of the edges.
    #[allow(clippy::result_large_err)]
    fn ring_search(&self, p: &MinkVec) -> Result<Seed, Option<CosmoPoint>> {
        let center = project_to_h2(p);
        let mut best: Option<(f64, Seed)> = None;
        for radius in [1.0, 2.0, 3.0, 4.0] {
            for leaf in self.leaves().leaves_near(&center, radius).0 {
                let v = leaf.dual();
                let foot = leaf.geodesic.foot(&center);
                let normal = v + foot.vec() * v.inner(&foot.vec());
                let normal = normal * (1.0 / normal.norm_sq().sqrt());
                let minus = self.leaves().perturb_off_leaves(&foot.exp(&normal, -1e-3));
                let x = self.vertex_at(&minus);
                if let Some(done) = self.band_check(p, x, &leaf, 1.0) {
                    return Err(Some(done));
                }
                let plus = self.leaves().perturb_off_leaves(&foot.exp(&normal, 1e-3));
                for (rep, x) in [(minus, x), (plus, x + v * leaf.weight)] {
                    if let Some(n) = future_norm(&(*p - x)) {
                        if best.as_ref().is_none_or(|(b, _)| n > *b) {
                            best = Some((n, Seed { rep, x }));
                        }
                    }
                }
            }
            if let Some((_, seed)) = best {
                return Ok(seed);
            }
        }
        Err(None)
    }

    fn seed_of(&self, h: &CosmoPoint) -> Option<Seed> {
        match &h.piece {
            Piece::Vertex { rep } => Some(Seed { rep: *rep, x: h.r }),
            Piece::Band { leaf, start, .. } => {
                let v = leaf.dual();
                let foot = leaf.geodesic.foot(&h.u);
                let normal = v + foot.vec() * v.inner(&foot.vec());
                let normal = normal * (1.0 / normal.norm_sq().sqrt());
                let rep = self.leaves().perturb_off_leaves(&foot.exp(&normal, -1e-3));
                Some(Seed { rep, x: *start })
            }
        }
    }

    /// Retraction onto the edge dual to `leaf` leaving vertex `x`, if `p`
    /// lies over that edge. `sign` orients the dual vector away from `x`.
    fn band_check(&self, p: &MinkVec, x: MinkVec, leaf: &Leaf, sign: f64) -> Option<CosmoPoint> {
        let vhat = leaf.dual() * sign;
        let w = *p - x;
        let s = w.inner(&vhat) / leaf.weight;
        // points on the boundary rays of a band come out a rounding error outside
        if !(-BAND_SLACK..=1.0 + BAND_SLACK).contains(&s) {
            return None;
        }
        let s = s.clamp(0.0, 1.0);
        let r = x + vhat * (s * leaf.weight);
        let tau = future_norm(&(*p - r))?;
        Some(CosmoPoint {
            tau,
            r,
            u: HPoint::new_unchecked((*p - r) * (1.0 / tau)),
            piece: Piece::Band {
                leaf: oriented(leaf, sign),
                start: x,
                s,
            },
        })
    }

    /// Moves across leaves toward the direction of `p - x` until `p` lies in
    /// the cone of the current vertex or over one of its edges. Each move
    /// increases `-<p - x, p - x>` by at least `weight²`.
    fn walk(&self, p: &MinkVec, mut seed: Seed) -> Result<CosmoPoint, SingularityError> {
        for _ in 0..WALK_CAP {
            let w = *p - seed.x;
            let Some(norm) = future_norm(&w) else {
                return Err(SingularityError::NotInDomain(*p));
            };
            let u = HPoint::new_unchecked(w * (1.0 / norm));
            let crossings = self.leaves().leaves_crossing(&seed.rep, &u);
            let Some(first) = crossings.first() else {
                return Ok(CosmoPoint {
                    tau: norm,
                    r: seed.x,
                    u,
                    piece: Piece::Vertex { rep: seed.rep },
                });
            };
            if let Some(done) = self.band_check(p, seed.x, &first.leaf, first.sign) {
                return Ok(done);
            }
            let next = crossings.get(1).map_or(1.0, |n| n.param);
            let dist = h2_dist(&seed.rep, &u);
            let dir = seed
                .rep
                .direction_to(&u)
                .ok_or_else(|| SingularityError::Inconclusive("degenerate walk direction".into()))?;
            seed = Seed {
                rep: seed.rep.exp(&dir, 0.5 * (first.param + next) * dist),
                x: seed.x + first.leaf.dual() * (first.sign * first.leaf.weight),
            };
        }
        Err(SingularityError::Inconclusive(format!(
            "walk exceeded {WALK_CAP} moves"
        )))
    }

    pub fn gradient_line(&self, p: &MinkVec) -> Result<GradientLine, SingularityError> {
        Ok(self.cosmo_time(p)?.line())
    }

    /// `r + (τ(p) + t)·u`; defined for `τ(p) + t > 0`.
    pub fn cosmo_flow(&self, p: &MinkVec, t: f64) -> Result<MinkVec, SingularityError> {
        let c = self.cosmo_time(p)?;
        if c.tau + t <= 0.0 {
            return Err(SingularityError::NotInDomain(c.at(c.tau + t)));
        }
        Ok(c.at(c.tau + t))
    }

    /// Point at time `t` above the region or band selected by `u`, with `s`
    /// placing it across the band when `u` lies on a leaf.
    pub fn point_above(&self, u: &HPoint, t: f64) -> MinkVec {
        self.vertex_at(u) + u.vec() * t
    }

    /// Point at time `t` over the edge dual to `leaf` at fraction `s` from
    /// the minus side, in direction `n`, the point of the leaf nearest `near`.
    pub fn point_over_edge(&self, leaf: &Leaf, s: f64, near: &HPoint, t: f64) -> MinkVec {
        let v = leaf.dual();
        let n = leaf.geodesic.foot(near);
        let normal = v + n.vec() * v.inner(&n.vec());
        let normal = normal * (1.0 / normal.norm_sq().sqrt());
        let start = self.vertex_at(&n.exp(&normal, -1e-3));
        start + v * (s * leaf.weight) + n.vec() * t
    }
}

fn oriented(leaf: &Leaf, sign: f64) -> Leaf {
    let mut l = leaf.clone();
    l.geodesic.dual = l.geodesic.dual * sign;
    l
}

/// Relative slack on the band parameter in `band_check`.
const BAND_SLACK: f64 = 1e-9;

/// `p/|p|` for future timelike `p`; otherwise `p` is first pushed along `e0`
/// until it is.
pub fn project_to_h2(p: &MinkVec) -> HPoint {
    let spatial = p.0[1].hypot(p.0[2]);
    let shift = (spatial - p.0[0] + 1.0).max(0.0);
    let q = *p + MinkVec::E0 * shift;
    HPoint::new_unchecked(q * (1.0 / (-q.norm_sq()).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lamination::ComponentSpec;
    use crate::mink::lorentz_dist_segment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn group() -> &'static SurfaceGroup {
        static G: OnceLock<SurfaceGroup> = OnceLock::new();
        G.get_or_init(|| SurfaceGroup::genus2_octagon().unwrap())
    }

    fn spacetime(items: &[(&str, f64)]) -> Spacetime {
        let g = group();
        let spec: Vec<_> = items.iter().map(|(w, x)| ComponentSpec::new(w, *x).unwrap()).collect();
        let lam = MeasuredMulticurve::realize(g, &spec, &g.ball(3).unwrap()).unwrap();
        Spacetime::new(g, lam, 5.0).unwrap()
    }

    fn one() -> &'static Spacetime {
        static S: OnceLock<Spacetime> = OnceLock::new();
        S.get_or_init(|| spacetime(&[("a1", 1.0)]))
    }

    fn two() -> &'static Spacetime {
        static S: OnceLock<Spacetime> = OnceLock::new();
        S.get_or_init(|| spacetime(&[("a1", 1.0), ("a2", 0.5)]))
    }

    fn random_u(rng: &mut ChaCha8Rng, r: f64) -> HPoint {
        HPoint::from_polar(rng.gen_range(0.0..r), rng.gen_range(0.0..std::f64::consts::TAU))
    }

    /// Random point of Ω with known decomposition.
    fn random_point(st: &Spacetime, rng: &mut ChaCha8Rng) -> (MinkVec, MinkVec, f64) {
        let u = random_u(rng, 2.5);
        let t = rng.gen_range(0.05..3.0);
        if rng.gen_bool(0.3) {
            let (near, _) = st.leaves().leaves_near(&u, 2.0);
            if let Some(leaf) = near.first() {
                let s = rng.gen_range(0.0..1.0);
                let n = leaf.geodesic.foot(&u);
                let p = st.point_over_edge(leaf, s, &u, t);
                return (p, p - n.vec() * t, t);
            }
        }
        let x = st.vertex_at(&u);
        (x + u.vec() * t, x, t)
    }

    #[test]
    fn fuchsian_cone() {
        let st = spacetime(&[]);
        let c = st.cosmo_time(&MinkVec::new(2.0, 0.0, 0.0)).unwrap();
        assert!((c.tau - 2.0).abs() < 1e-12);
        assert_eq!(c.r, MinkVec::ZERO);
        let p = MinkVec::new(3.0, 1.0, -0.5);
        assert!((st.cosmo_time(&p).unwrap().tau - (-p.norm_sq()).sqrt()).abs() < 1e-12);
        assert!(matches!(
            st.cosmo_time(&MinkVec::new(0.5, 1.0, 0.0)),
            Err(SingularityError::NotInDomain(_))
        ));
    }

    #[test]
    fn cosmo_image_matches_a_direct_search() {
        let st = two();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for w in ["b1", "a2", "B1a1"] {
            let gamma: Word = w.parse().unwrap();
            let iso = st.holonomy(&gamma);
            for _ in 0..10 {
                let u = random_u(&mut rng, 1.0);
                let c = st.cosmo_time(&st.point_above(&u, rng.gen_range(0.05..2.0))).unwrap();
                let img = st.cosmo_image(&c, &gamma, &iso);
                let direct = st.cosmo_time(&iso.apply(&c.point())).unwrap();
                assert!((img.tau - direct.tau).abs() < 1e-9);
                assert!(img.r.dist_inf(&direct.r) < 1e-8, "{w}: {} vs {}", img.r, direct.r);
                assert!(img.u.vec().dist_inf(&direct.u.vec()) < 1e-8);
            }
        }
    }

    #[test]
    fn holonomy_examples() {
        let st = one();
        let id = st.holonomy(&Word::identity());
        assert_eq!(id.translation, MinkVec::ZERO);
        let a1 = st.holonomy(&"a1".parse().unwrap());
        assert!(a1.translation.max_abs() < 1e-12, "{}", a1.translation);
        let b1 = st.holonomy(&"b1".parse().unwrap());
        assert!((b1.translation.norm_sq() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cocycle_on_ball2() {
        let st = two();
        let ball = group().ball(2).unwrap();
        let hol: Vec<Isometry> = ball.elements.iter().map(|e| st.holonomy(&e.word)).collect();
        for (i, g) in ball.elements.iter().enumerate() {
            for (j, h) in ball.elements.iter().enumerate() {
                let gh = st.holonomy(&g.word.concat(&h.word));
                let expect = hol[i].translation + hol[i].linear.apply(&hol[j].translation);
                assert!(gh.translation.dist_inf(&expect) < 1e-9, "{} {}", g.word, h.word);
            }
        }
    }

    #[test]
    fn vertices_and_edges() {
        let st = one();
        let g = group();
        assert_eq!(st.vertex_at(&st.base()), MinkVec::ZERO);
        let axis = g.axis_of(&"a1".parse().unwrap()).unwrap();
        let foot = axis.foot(&g.basepoint);
        let v = axis.geodesic.dual;
        let n = v + foot.vec() * v.inner(&foot.vec());
        let n = n * (1.0 / n.norm_sq().sqrt());
        let (near_side, far_side) = if axis.geodesic.signed_dist(&g.basepoint) < 0.0 {
            (foot.exp(&n, -0.05), foot.exp(&n, 0.05))
        } else {
            (foot.exp(&n, 0.05), foot.exp(&n, -0.05))
        };
        assert_eq!(st.vertex_at(&near_side), MinkVec::ZERO);
        let x1 = st.vertex_at(&far_side);
        // v̂ points away from the base region
        let vhat = if v.inner(&g.basepoint.vec()) < 0.0 { v } else { -v };
        assert!(x1.dist_inf(&vhat) < 1e-12);
        for e in st.sigma_edges_near(&MinkVec::new(2.0, 0.3, 0.1), 2.0) {
            let len = (e.end - e.start).norm_sq().sqrt();
            assert!((len - e.leaf.weight).abs() < 1e-9);
        }
    }

    #[test]
    fn decomposition_is_recovered() {
        let st = two();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (p, r, t) = random_point(st, &mut rng);
            let c = st.cosmo_time(&p).unwrap_or_else(|e| panic!("{e} r={r} t={t} u={}", (p - r) * (1.0 / t)));
            assert!((c.tau - t).abs() < 1e-9, "{p}: {} vs {t}", c.tau);
            assert!(c.r.dist_inf(&r) < 1e-8, "{} vs {r}", c.r);
            assert!(c.point().dist_inf(&p) < 1e-9);
        }
    }

    /// Independent oracle: brute maximum of the Lorentzian distance to the
    /// edges near the projection of `p`.
    #[test]
    fn matches_brute_force_over_edges() {
        let st = two();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            let (p, _, _) = random_point(st, &mut rng);
            let c = st.cosmo_time(&p).unwrap();
            let mut best = f64::NEG_INFINITY;
            for e in st.sigma_edges_near(&p, 3.0) {
                if let Ok(m) = lorentz_dist_segment(&p, &e.start, &e.end) {
                    best = best.max(m.value);
                }
            }
            assert!((best - c.tau).abs() < 1e-9, "{best} vs {}", c.tau);
        }
    }

    #[test]
    fn midpoint_above_an_edge() {
        let st = one();
        let g = group();
        let axis = g.axis_of(&"a1".parse().unwrap()).unwrap();
        let foot = axis.foot(&g.basepoint);
        let vhat = if axis.geodesic.dual.inner(&g.basepoint.vec()) < 0.0 {
            axis.geodesic.dual
        } else {
            -axis.geodesic.dual
        };
        let m = vhat * 0.5;
        let p = m + foot.vec() * 1.7;
        let c = st.cosmo_time(&p).unwrap();
        assert!((c.tau - 1.7).abs() < 1e-12);
        assert!(c.r.dist_inf(&m) < 1e-12);
    }

    #[test]
    fn equivariance_and_flow() {
        let st = two();
        let ball = group().ball(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let (p, _, _) = random_point(st, &mut rng);
            let e = &ball.elements[rng.gen_range(0..ball.len())];
            let rho = st.holonomy(&e.word);
            let c = st.cosmo_time(&p).unwrap();
            let cg = st.cosmo_time(&rho.apply(&p)).unwrap();
            assert!((c.tau - cg.tau).abs() < 1e-8);
            let want = rho.apply(&c.r);
            assert!(cg.r.dist_inf(&want) < 1e-8 * (1.0 + want.max_abs()), "{} vs {want} ({})", cg.r, e.word);
            let t = rng.gen_range(-0.5 * c.tau..2.0);
            let q = st.cosmo_flow(&p, t).unwrap();
            let cq = st.cosmo_time(&q).unwrap();
            assert!((cq.tau - c.tau - t).abs() < 1e-8);
            assert!(cq.r.dist_inf(&c.r) < 1e-8 && cq.u.vec().dist_inf(&c.u.vec()) < 1e-8);
            assert!(st.cosmo_flow(&p, 0.0).unwrap().dist_inf(&p) < 1e-12);
        }
    }

    #[test]
    fn concavity_and_unit_gradient() {
        let st = two();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let tau = |p: &MinkVec| st.cosmo_time(p).unwrap().tau;
        for _ in 0..80 {
            let (p, _, _) = random_point(st, &mut rng);
            let (q, _, _) = random_point(st, &mut rng);
            let mid = (p + q) * 0.5;
            assert!(tau(&mid) >= 0.5 * (tau(&p) + tau(&q)) - 1e-8);
        }
        for _ in 0..40 {
            let (p, _, _) = random_point(st, &mut rng);
            let h = 1e-5;
            let mut grad = [0.0; 3];
            for (i, g) in grad.iter_mut().enumerate() {
                let mut e = MinkVec::ZERO;
                e.0[i] = h;
                *g = (tau(&(p + e)) - tau(&(p - e))) / (2.0 * h);
            }
            // raise the index: ∇τ = J dτ
            let raised = MinkVec::new(-grad[0], grad[1], grad[2]);
            assert!((raised.norm_sq() + 1.0).abs() < 1e-4, "{}", raised.norm_sq());
            let c = st.cosmo_time(&p).unwrap();
            assert!(raised.dist_inf(&(-c.u.vec())) < 1e-4);
        }
    }

    /// Closed form for the future of one segment `[0, w·v̂]` in the frame of
    /// the edge: cone over each endpoint, flat band between them.
    fn misner_tau(p: &MinkVec, vhat: &MinkVec, w: f64) -> f64 {
        let y = p.inner(vhat);
        let q = if y <= 0.0 {
            *p
        } else if y >= w {
            *p - *vhat * w
        } else {
            *p - *vhat * y
        };
        (-q.norm_sq()).sqrt()
    }

    #[test]
    fn misner_one_curve_oracle() {
        let g = group();
        let w = 0.8;
        let st = spacetime(&[("a1", w)]);
        let axis = g.axis_of(&"a1".parse().unwrap()).unwrap();
        let vhat = if axis.geodesic.dual.inner(&g.basepoint.vec()) < 0.0 {
            axis.geodesic.dual
        } else {
            -axis.geodesic.dual
        };
        let foot = axis.foot(&g.basepoint);
        let tangent = axis.tangent_at(&foot);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            // points whose direction stays within the two regions next to the
            // axis, where the cyclic model and the full spacetime agree
            let along = foot.exp(&tangent, rng.gen_range(-1.0..1.0));
            let off = rng.gen_range(-0.3..0.3);
            let normal = {
                let n = vhat + along.vec() * vhat.inner(&along.vec());
                n * (1.0 / n.norm_sq().sqrt())
            };
            let u = along.exp(&normal, off);
            let t = rng.gen_range(0.1..3.0);
            let p = MinkVec::ZERO + vhat * rng.gen_range(-0.2..w + 0.2) + u.vec() * t;
            let Ok(c) = st.cosmo_time(&p) else { continue };
            let closed = misner_tau(&p, &vhat, w);
            assert!((c.tau - closed).abs() < 1e-9, "{} vs {closed}", c.tau);
        }
    }
}
