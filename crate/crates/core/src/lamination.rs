//! Weighted multicurves on the surface and their lifts to H².
//!
//! A multicurve is given by conjugacy-class representatives and positive
//! weights. The lift is enumerated as translates `g·axis(c)` over a group
//! ball and deduplicated by dual vector, so over-enumeration is harmless.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuchsian::{Axis, GroupBall, GroupError, Reduction, SurfaceGroup, Word};
use crate::mink::{geodesic_side, geodesics_cross, h2_dist, GeodesicH2, HPoint, Mat3, MinkVec, Side};

/// Step used to push a point off a leaf it lies on.
pub const PERTURBATION: f64 = 1e-7;
/// Points closer than this to a leaf (in `|<p, v>|`) count as lying on it.
pub const ON_LEAF_TOL: f64 = 1e-9;
/// Smallest `|<x, v>|` accepted for the start of an axis segment.
pub const AXIS_CLEARANCE: f64 = 1e-3;
/// Relative tolerance for identifying two dual vectors.
pub const LEAF_MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaminationError {
    #[error("component not simple or components crossing: {first} meets {second}")]
    Crossing { first: String, second: String },
    #[error("components {0} and {1} share an axis")]
    SharedAxis(String, String),
    #[error("weight of component {word} must be positive, got {weight}")]
    BadWeight { word: String, weight: f64 },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// One entry of a lamination spec as it appears in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub word: Word,
    pub weight: f64,
}

impl ComponentSpec {
    pub fn new(word: &str, weight: f64) -> Result<Self, GroupError> {
        Ok(ComponentSpec {
            word: word.parse()?,
            weight,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Component {
    pub word: Word,
    pub weight: f64,
    pub axis: Axis,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MeasuredMulticurve {
    pub components: Vec<Component>,
}

fn label(component: usize, word: &Word, coset: &Word) -> String {
    format!("{coset}·axis({word}) [component {component}]")
}

fn same_line(v: &MinkVec, w: &MinkVec) -> bool {
    let tol = LEAF_MATCH_TOL * v.max_abs().max(w.max_abs()).max(1.0);
    v.dist_inf(w) <= tol || v.dist_inf(&-*w) <= tol
}

impl MeasuredMulticurve {
    pub fn empty() -> Self {
        MeasuredMulticurve::default()
    }

    /// Computes axes and validates simplicity against every translate in
    /// `validation`.
    pub fn realize(
        g: &SurfaceGroup,
        spec: &[ComponentSpec],
        validation: &GroupBall,
    ) -> Result<Self, LaminationError> {
        let mut components = Vec::with_capacity(spec.len());
        for c in spec {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(LaminationError::BadWeight {
                    word: c.word.to_string(),
                    weight: c.weight,
                });
            }
            components.push(Component {
                word: c.word.clone(),
                weight: c.weight,
                axis: g.axis_of(&c.word)?,
            });
        }
        let id = Word::identity();
        for (i, ci) in components.iter().enumerate() {
            let base = ci.axis.geodesic;
            for (j, cj) in components.iter().enumerate() {
                for e in &validation.elements {
                    let leaf = cj.axis.geodesic.transform(&e.matrix);
                    if same_line(&leaf.dual, &base.dual) {
                        if i != j {
                            return Err(LaminationError::SharedAxis(
                                label(i, &ci.word, &id),
                                label(j, &cj.word, &e.word),
                            ));
                        }
                        continue;
                    }
                    if geodesics_cross(&base, &leaf) {
                        return Err(LaminationError::Crossing {
                            first: label(i, &ci.word, &id),
                            second: label(j, &cj.word, &e.word),
                        });
                    }
                }
            }
        }
        Ok(MeasuredMulticurve { components })
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Largest `d(o, axis) + ℓ/2` over components: a leaf meeting the disk
    /// `B(o, ρ)` is a translate `g·axis` with `d(o, g·o)` at most `ρ` plus this.
    pub fn enumeration_pad(&self, o: &HPoint) -> f64 {
        self.components
            .iter()
            .map(|c| c.axis.geodesic.signed_dist(o).abs() + c.axis.translation_length / 2.0)
            .fold(0.0, f64::max)
    }

    /// Lift of the multicurve meeting `B(o, rho)`, enumerated over a metric ball.
    pub fn lift(&self, g: &SurfaceGroup, rho: f64) -> Result<LeafSet, LaminationError> {
        self.lift_capped(g, rho, crate::fuchsian::DEFAULT_BALL_CAP)
    }

    /// As [`Self::lift`], enumerating at most `cap` group elements.
    pub fn lift_capped(&self, g: &SurfaceGroup, rho: f64, cap: usize) -> Result<LeafSet, LaminationError> {
        let o = g.basepoint;
        let ball = GroupBall::metric(g, rho + self.enumeration_pad(&o), cap)?;
        let mut set = LeafSet::build(self, g, &ball);
        set.leaves.retain(|l| l.center_dist <= rho);
        set.covered_radius = rho;
        Ok(set)
    }

    pub fn weight_of(&self, component: usize) -> f64 {
        self.components[component].weight
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Leaf {
    pub geodesic: GeodesicH2,
    pub weight: f64,
    pub component: usize,
    pub coset: Word,
    /// Distance from the basepoint to the leaf.
    pub center_dist: f64,
}

impl Leaf {
    pub fn side(&self, p: &HPoint) -> Side {
        geodesic_side(&self.geodesic, p)
    }

    pub fn dual(&self) -> MinkVec {
        self.geodesic.dual
    }

    /// The leaf `g·self`, where `matrix` represents `word`.
    pub fn image(&self, word: &Word, matrix: &Mat3, basepoint: &HPoint) -> Leaf {
        let geodesic = self.geodesic.transform(matrix);
        Leaf {
            geodesic,
            weight: self.weight,
            component: self.component,
            coset: word.concat(&self.coset).reduced(),
            center_dist: geodesic.signed_dist(basepoint).abs(),
        }
    }
}

/// A leaf crossed by a segment, with orientation `+1` when the segment
/// passes from the minus side to the plus side.
#[derive(Clone, Debug)]
pub struct Crossing {
    pub leaf: Leaf,
    pub sign: f64,
    /// Arclength fraction along the segment from `p` (0) to `q` (1).
    pub param: f64,
}

/// Total weight of separating leaves with the truncation metadata needed
/// to judge it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparatingCount {
    pub weight: f64,
    pub leaves: usize,
    /// Distance from the basepoint that the query reaches.
    pub needed_radius: f64,
    pub covered_radius: f64,
}

impl SeparatingCount {
    pub fn is_complete(&self) -> bool {
        self.needed_radius <= self.covered_radius
    }
}

struct DualIndex {
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl DualIndex {
    const QUANTUM: f64 = 1e-7;

    fn key(v: &MinkVec) -> [i64; 3] {
        let n = (v.0[0] * v.0[0] + v.0[1] * v.0[1] + v.0[2] * v.0[2]).sqrt();
        let q = |x: f64| (x / n / Self::QUANTUM).round() as i64;
        [q(v.0[0]), q(v.0[1]), q(v.0[2])]
    }

    fn find(&self, v: &MinkVec, leaves: &[Leaf]) -> Option<usize> {
        let k = Self::key(v);
        let tol = LEAF_MATCH_TOL * v.max_abs().max(1.0);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if let Some(&i) = list.iter().find(|&&i| leaves[i].dual().dist_inf(v) <= tol) {
                            return Some(i);
                        }
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, v: &MinkVec, i: usize) {
        self.cells.entry(Self::key(v)).or_default().push(i);
    }
}

/// Enumerated lift of a multicurve near the basepoint, sorted by distance
/// from it. Queries anywhere in H² are answered by moving the query into
/// the fundamental domain and translating the local answer back.
#[derive(Clone, Debug, Serialize)]
pub struct LeafSet {
    pub leaves: Vec<Leaf>,
    pub basepoint: HPoint,
    /// Every leaf meeting `B(o, covered_radius)` is present.
    pub covered_radius: f64,
    pub ball_radius: usize,
    #[serde(skip)]
    group: SurfaceGroup,
}

impl LeafSet {
    /// Translates of every component axis by the elements of `ball`.
    ///
    /// For word balls the covered radius is estimated from the smallest
    /// displacement on the outer sphere; metric balls give it exactly.
    pub fn build(lam: &MeasuredMulticurve, g: &SurfaceGroup, ball: &GroupBall) -> LeafSet {
        let o = g.basepoint;
        let mut leaves: Vec<Leaf> = Vec::new();
        let mut index = DualIndex { cells: HashMap::new() };
        for (ci, c) in lam.components.iter().enumerate() {
            for e in &ball.elements {
                let geodesic = c.axis.geodesic.transform(&e.matrix);
                if index.find(&geodesic.dual, &leaves).is_some() {
                    continue;
                }
                index.insert(&geodesic.dual, leaves.len());
                leaves.push(Leaf {
                    geodesic,
                    weight: c.weight,
                    component: ci,
                    coset: e.word.clone(),
                    center_dist: geodesic.signed_dist(&o).abs(),
                });
            }
        }
        leaves.sort_by(|a, b| a.center_dist.total_cmp(&b.center_dist));
        let reach = ball.metric_radius.unwrap_or(ball.outer_displacement);
        LeafSet {
            leaves,
            basepoint: o,
            covered_radius: (reach - lam.enumeration_pad(&o)).max(0.0),
            ball_radius: ball.radius,
            group: g.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn group(&self) -> &SurfaceGroup {
        &self.group
    }

    /// Leaves of the local lift at distance at most `r` from the basepoint.
    pub fn within(&self, r: f64) -> &[Leaf] {
        let n = self.leaves.partition_point(|l| l.center_dist <= r);
        &self.leaves[..n]
    }

    fn reach(&self, p: &HPoint) -> f64 {
        h2_dist(&self.basepoint, p)
    }

    /// Group element moving `p` near the basepoint, when the group has a
    /// known fundamental domain.
    fn localize(&self, p: &HPoint) -> Option<Reduction> {
        self.group.circumradius.map(|_| self.group.reduce(p))
    }

    fn translate(&self, leaf: &Leaf, red: &Reduction) -> Leaf {
        leaf.image(&red.word, &red.matrix, &self.basepoint)
    }

    /// All leaves within distance `r` of `p`, and whether the local lift
    /// was large enough to guarantee the list is complete.
    pub fn leaves_near(&self, p: &HPoint, r: f64) -> (Vec<Leaf>, bool) {
        let red = self.localize(p).unwrap_or_else(|| identity_reduction(p));
        let x = red.point;
        let reach = self.reach(&x) + r;
        let leaves = self
            .within(reach)
            .iter()
            .filter(|l| l.geodesic.signed_dist(&x).abs() <= r)
            .map(|l| self.translate(l, &red))
            .collect();
        (leaves, reach <= self.covered_radius)
    }

    /// Longest piece of a segment whose local view is guaranteed complete.
    fn piece_length(&self) -> Option<f64> {
        let rc = self.group.circumradius?;
        let len = self.covered_radius - rc;
        (len > 0.0).then_some(len)
    }

    /// Leaves separating `p` from `q`, ordered from `p` to `q`, together
    /// with the largest local radius the query needed.
    pub fn crossings(&self, p: &HPoint, q: &HPoint) -> (Vec<Crossing>, f64) {
        match p.direction_to(q) {
            Some(dir) => self.crossings_along(p, &dir, h2_dist(p, q)),
            None => (Vec::new(), self.reach(p)),
        }
    }

    /// Leaves crossed by the geodesic segment of the given length leaving
    /// `p` in the unit direction `dir`. `param` is the arclength fraction.
    ///
    /// The segment is walked in pieces, each expressed in a frame where it
    /// sits near the basepoint, so points far from `o` are never formed in
    /// global coordinates.
    pub fn crossings_along(&self, p: &HPoint, dir: &MinkVec, length: f64) -> (Vec<Crossing>, f64) {
        let step = self.piece_length();
        let pieces = match step {
            Some(s) => (length / s).ceil().max(1.0) as usize,
            None => 1,
        };
        let seg = length / pieces as f64;
        let mut frame = match step {
            Some(_) => self.group.reduce(p),
            None => identity_reduction(p),
        };
        let mut x = frame.point;
        let mut d = tangent_at(&x, &frame.matrix.lorentz_inverse().apply(dir));
        let mut out = Vec::new();
        let mut needed: f64 = 0.0;
        for k in 0..pieces {
            let y = x.exp(&d, seg);
            let dy = d * seg.cosh() + x.vec() * seg.sinh();
            let reach = self.reach(&x).max(self.reach(&y));
            needed = needed.max(reach);
            for leaf in self.within(reach) {
                let v = leaf.geodesic.dual;
                let (va, vb) = (x.vec().inner(&v), y.vec().inner(&v));
                let (sa, sb) = (Side::of_value(va), Side::of_value(vb));
                if sa == sb {
                    continue;
                }
                let t = (-va / d.inner(&v)).atanh().clamp(0.0, seg);
                out.push(Crossing {
                    leaf: self.translate(leaf, &frame),
                    sign: if sb == Side::Plus { 1.0 } else { -1.0 },
                    param: (k as f64 * seg + t) / length,
                });
            }
            if k + 1 < pieces {
                let next = self.group.reduce(&y);
                let back = next.matrix.lorentz_inverse();
                x = next.point;
                d = tangent_at(&x, &back.apply(&dy));
                frame = Reduction {
                    word: frame.word.concat(&next.word).reduced(),
                    matrix: frame.matrix.mul(&next.matrix),
                    point: x,
                };
            }
        }
        out.sort_by(|x, y| x.param.total_cmp(&y.param));
        (out, needed)
    }

    pub fn leaves_crossing(&self, p: &HPoint, q: &HPoint) -> Vec<Crossing> {
        self.crossings(p, q).0
    }

    pub fn separating(&self, p: &HPoint, q: &HPoint) -> SeparatingCount {
        let (crossing, needed) = self.crossings(p, q);
        SeparatingCount {
            weight: crossing.iter().fold(0.0, |s, c| s + c.leaf.weight),
            leaves: crossing.len(),
            needed_radius: needed,
            covered_radius: self.covered_radius,
        }
    }

    /// Moves `p` off every leaf by steps of [`PERTURBATION`] along a fixed
    /// direction.
    pub fn perturb_off_leaves(&self, p: &HPoint) -> HPoint {
        let mut x = *p;
        let dir = fixed_direction(p);
        let (near, _) = self.leaves_near(p, 1.0);
        for k in 1..=64 {
            if near.iter().all(|l| x.vec().inner(&l.geodesic.dual).abs() > ON_LEAF_TOL) {
                return x;
            }
            x = p.exp(&dir, PERTURBATION * k as f64);
        }
        x
    }

    /// Total weight crossed by a fundamental segment of the axis of `gamma`.
    ///
    /// The segment starts at the foot of the basepoint on the axis, slid
    /// along the axis by multiples of `0.382·ℓ` until it is at least
    /// [`AXIS_CLEARANCE`] away from every leaf. Translates of points close to
    /// a leaf lose their side to roundoff once they are far from `o`.
    pub fn intersection_number(&self, gamma: &Word) -> Result<SeparatingCount, GroupError> {
        let g = &self.group;
        let axis = g.axis_of(gamma)?;
        let foot = axis.foot(&self.basepoint);
        let tangent = axis.tangent_at(&foot);
        let ell = axis.translation_length;
        let (near, _) = self.leaves_near(&foot, ell + 1.0);
        let clearance = |x: &HPoint| {
            near.iter()
                .map(|l| x.vec().inner(&l.geodesic.dual).abs())
                .fold(f64::INFINITY, f64::min)
        };
        let mut x0 = foot;
        let mut best = (clearance(&foot), foot);
        for k in 0..32 {
            let t = (k as f64 * 0.381_966_011_250_105).fract() * ell;
            let x = foot.exp(&tangent, t);
            let c = clearance(&x);
            if c >= AXIS_CLEARANCE {
                x0 = x;
                best.0 = f64::INFINITY;
                break;
            }
            if c > best.0 {
                best = (c, x);
            }
        }
        if best.0.is_finite() {
            x0 = self.perturb_off_leaves(&best.1);
        }
        // walk the axis from x0 rather than forming gamma·x0, which is far
        // from o for long words
        let (crossing, needed) = self.crossings_along(&x0, &axis.tangent_at(&x0), ell);
        Ok(SeparatingCount {
            weight: crossing.iter().fold(0.0, |s, c| s + c.leaf.weight),
            leaves: crossing.len(),
            needed_radius: needed,
            covered_radius: self.covered_radius,
        })
    }
}

fn identity_reduction(p: &HPoint) -> Reduction {
    Reduction {
        word: Word::identity(),
        matrix: Mat3::IDENTITY,
        point: *p,
    }
}

/// Unit tangent at `p` closest to `w`.
fn tangent_at(p: &HPoint, w: &MinkVec) -> MinkVec {
    let x = p.vec();
    let t = *w + x * w.inner(&x);
    t * (1.0 / t.norm_sq().sqrt())
}

/// Unit tangent at `p` obtained by projecting a fixed spatial direction.
pub fn fixed_direction(p: &HPoint) -> MinkVec {
    let x = p.vec();
    let pick = |w: MinkVec| {
        let t = w + x * w.inner(&x);
        let n = t.norm_sq();
        (n > 1e-6).then(|| t * (1.0 / n.sqrt()))
    };
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    pick(MinkVec::new(0.0, c, s))
        .or_else(|| pick(MinkVec::new(0.0, -s, c)))
        .expect("two orthogonal spatial directions cannot both be normal to H²")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn group() -> &'static SurfaceGroup {
        static G: OnceLock<SurfaceGroup> = OnceLock::new();
        G.get_or_init(|| SurfaceGroup::genus2_octagon().unwrap())
    }

    fn spec(items: &[(&str, f64)]) -> Vec<ComponentSpec> {
        items.iter().map(|(w, x)| ComponentSpec::new(w, *x).unwrap()).collect()
    }

    fn realize(items: &[(&str, f64)]) -> Result<MeasuredMulticurve, LaminationError> {
        let g = group();
        MeasuredMulticurve::realize(g, &spec(items), &g.ball(3).unwrap())
    }

    #[test]
    fn simple_curves_are_accepted() {
        assert!(realize(&[("a1", 1.0)]).is_ok());
        assert!(realize(&[("a1", 1.0), ("a2", 0.5)]).is_ok());
        assert!(realize(&[]).unwrap().is_empty());
    }

    #[test]
    fn crossing_components_are_rejected() {
        match realize(&[("a1", 1.0), ("a1b1", 1.0)]) {
            Err(LaminationError::Crossing { first, second }) => {
                assert!(first.contains("axis(a1)"), "{first}");
                assert!(second.contains("axis(a1b1)"), "{second}");
            }
            other => panic!("expected crossing error, got {other:?}"),
        }
        assert!(matches!(realize(&[("a1", 1.0), ("b1", 1.0)]), Err(LaminationError::Crossing { .. })));
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(realize(&[("a1", 0.0)]), Err(LaminationError::BadWeight { .. })));
        assert!(matches!(realize(&[("a1", -1.0)]), Err(LaminationError::BadWeight { .. })));
        assert!(matches!(
            realize(&[("a1A1", 1.0)]),
            Err(LaminationError::Group(GroupError::NotHyperbolic(..)))
        ));
        assert!(matches!(realize(&[("a1", 1.0), ("A1", 2.0)]), Err(LaminationError::SharedAxis(..))));
        assert!(matches!(realize(&[("a1", 1.0), ("b1a1B1", 2.0)]), Err(LaminationError::SharedAxis(..))));
    }

    #[test]
    fn lift_has_no_duplicates_and_is_sorted() {
        let lam = realize(&[("a1", 1.0)]).unwrap();
        let set = lam.lift(group(), 5.0).unwrap();
        assert!(set.len() >= 10, "{}", set.len());
        for w in set.leaves.windows(2) {
            assert!(w[0].center_dist <= w[1].center_dist);
        }
        for (i, a) in set.leaves.iter().enumerate() {
            for b in &set.leaves[i + 1..] {
                assert!(!same_line(&a.dual(), &b.dual()));
                // independent disjointness oracle: |<v, w>| ≥ 1 for disjoint lines
                assert!(a.dual().inner(&b.dual()).abs() > 1.0);
            }
        }
    }

    #[test]
    fn metric_lift_matches_word_lift_inside_covered_disk() {
        let g = group();
        let lam = realize(&[("a1", 1.0), ("a2", 0.5)]).unwrap();
        let metric = lam.lift(g, 3.0).unwrap();
        let words = LeafSet::build(&lam, g, &g.ball(6).unwrap());
        let inner = words.within(3.0);
        assert_eq!(inner.len(), metric.len());
        for l in inner {
            assert!(metric.leaves.iter().any(|m| m.dual().dist_inf(&l.dual()) < 1e-8 * l.dual().max_abs()));
        }
    }

    fn push_off(axis: &GeodesicH2, base: &HPoint, t: f64) -> HPoint {
        let foot = axis.foot(base);
        let n = axis.dual + foot.vec() * axis.dual.inner(&foot.vec());
        foot.exp(&(n * (1.0 / n.norm_sq().sqrt())), t)
    }

    #[test]
    fn straddling_the_axis_crosses_one_leaf() {
        let g = group();
        let lam = realize(&[("a1", 1.0)]).unwrap();
        let set = lam.lift(g, 5.0).unwrap();
        let axis = lam.components[0].axis.geodesic;
        let p = push_off(&axis, &g.basepoint, 0.05);
        let q = push_off(&axis, &g.basepoint, -0.05);
        let c = set.leaves_crossing(&p, &q);
        assert_eq!(c.len(), 1);
        assert!(same_line(&c[0].leaf.dual(), &axis.dual));
        assert_eq!(c[0].leaf.coset, Word::identity());
        assert_eq!(c[0].sign, -1.0);
        assert!(set.leaves_crossing(&p, &push_off(&axis, &g.basepoint, 0.3)).is_empty());
    }

    /// Independent oracle: total weight of leaves meeting the axis of
    /// `gamma` at a parameter in `[0, ℓ)`, using the inner-product crossing
    /// test `|<v, u>| < 1` and the crossing point on the axis.
    fn oracle_intersection(set: &LeafSet, g: &SurfaceGroup, gamma: &Word) -> f64 {
        let axis = g.axis_of(gamma).unwrap();
        let v = axis.geodesic.dual;
        let start = axis.foot(&g.basepoint);
        let tangent = axis.tangent_at(&start);
        let ell = axis.translation_length;
        set.leaves
            .iter()
            .filter(|leaf| v.inner(&leaf.dual()).abs() < 1.0 - 1e-12)
            .filter(|leaf| {
                // x(t) = cosh t·start + sinh t·tangent lies on u^⊥ when
                // tanh t = -<start,u>/<tangent,u>
                let u = leaf.dual();
                let t = (-start.vec().inner(&u) / tangent.inner(&u)).atanh();
                (0.0..ell).contains(&t)
            })
            .map(|leaf| leaf.weight)
            .sum()
    }

    #[test]
    fn intersection_numbers_match_curve_table() {
        let g = group();
        let lam = realize(&[("a1", 1.0)]).unwrap();
        let set = lam.lift(g, 6.0).unwrap();
        let table = [("a1", 0.0), ("b1", 1.0), ("b1b1", 2.0), ("a2", 0.0), ("b2", 0.0), ("a1b1", 1.0), ("b1a2", 1.0)];
        for (w, expected) in table {
            let got = set.intersection_number(&w.parse().unwrap()).unwrap();
            assert!(got.is_complete(), "{w}: {got:?}");
            assert_eq!(got.weight, expected, "{w}");
            assert_eq!(oracle_intersection(&set, g, &w.parse().unwrap()), expected, "{w}");
        }
    }

    #[test]
    fn intersection_is_homogeneous_in_weight() {
        let g = group();
        let w = 0.37;
        let lam = realize(&[("a1", w)]).unwrap();
        let set = lam.lift(g, 6.0).unwrap();
        let got = set.intersection_number(&"b1b1".parse().unwrap()).unwrap();
        assert!((got.weight - 2.0 * w).abs() < 1e-12);
    }

    #[test]
    fn intersection_conjugation_and_powers() {
        let g = group();
        let lam = realize(&[("a1", 1.0), ("a2", 0.5)]).unwrap();
        let set = lam.lift(g, 5.0).unwrap();
        for gamma in ["b1", "a1b1", "b2", "b1b2"] {
            let w: Word = gamma.parse().unwrap();
            let base = set.intersection_number(&w).unwrap();
            assert!(base.is_complete());
            for e in &g.ball(2).unwrap().elements {
                let c = set.intersection_number(&w.conjugate_by(&e.word)).unwrap();
                assert!(c.is_complete(), "{gamma} by {}: {c:?}", e.word);
                assert_eq!(c.weight, base.weight, "{gamma} by {}", e.word);
            }
            for n in 1..=4 {
                let c = set.intersection_number(&w.pow(n)).unwrap();
                assert!(c.is_complete(), "{gamma}^{n}");
                assert!((c.weight - n as f64 * base.weight).abs() < 1e-12, "{gamma}^{n}");
            }
        }
    }

    #[test]
    fn separating_count_is_stable_under_enlargement() {
        let g = group();
        let lam = realize(&[("a1", 1.0), ("a2", 0.5)]).unwrap();
        let p = HPoint::from_polar(1.3, 0.4);
        let q = HPoint::from_polar(1.9, 2.8);
        let counts: Vec<_> = [2.5, 3.5, 4.5]
            .iter()
            .map(|&r| lam.lift(g, r).unwrap().separating(&p, &q))
            .collect();
        assert!(counts.iter().all(|c| c.is_complete()));
        assert!(counts.windows(2).all(|w| w[0].weight == w[1].weight));
        assert!(counts[0].leaves > 0);
    }

    #[test]
    fn perturbation_moves_off_leaf() {
        let g = group();
        let lam = realize(&[("a1", 1.0)]).unwrap();
        let set = lam.lift(g, 3.0).unwrap();
        let on = lam.components[0].axis.foot(&g.basepoint);
        let off = set.perturb_off_leaves(&on);
        assert!(h2_dist(&on, &off) > 0.5 * PERTURBATION && h2_dist(&on, &off) < 2.0 * PERTURBATION);
        let p = HPoint::from_polar(0.3, 1.0);
        assert_eq!(set.perturb_off_leaves(&p), p);
    }

    #[test]
    fn linking_agrees_with_inner_product_test() {
        let g = group();
        let lam = realize(&[("a1", 1.0), ("a2", 1.0)]).unwrap();
        let set = lam.lift(g, 3.0).unwrap();
        let probe = g.axis_of(&"b1a2B1b2".parse().unwrap()).unwrap().geodesic;
        for l in &set.leaves {
            let by_inner = probe.dual.inner(&l.dual()).abs() < 1.0;
            assert_eq!(geodesics_cross(&probe, &l.geodesic), by_inner);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn leaves_crossing_is_equivariant(
                r1 in 0.0f64..1.2, t1 in 0.0f64..6.3,
                r2 in 0.0f64..1.2, t2 in 0.0f64..6.3,
                k in 0usize..57,
            ) {
                let g = group();
                let lam = realize(&[("a1", 1.0), ("a2", 0.5)]).unwrap();
                static SET: OnceLock<LeafSet> = OnceLock::new();
                let set = SET.get_or_init(|| lam.lift(g, 5.5).unwrap());
                let ball = g.ball(2).unwrap();
                let h = ball.elements[k % ball.len()].matrix;
                let (p, q) = (HPoint::from_polar(r1, t1), HPoint::from_polar(r2, t2));
                let base = set.leaves_crossing(&p, &q);
                let moved = set.leaves_crossing(&p.transform(&h), &q.transform(&h));
                prop_assert_eq!(base.len(), moved.len());
                for (a, b) in base.iter().zip(&moved) {
                    let image = h.apply(&a.leaf.dual());
                    prop_assert!(image.dist_inf(&b.leaf.dual()) < 1e-8 * image.max_abs());
                    prop_assert_eq!(a.sign, b.sign);
                }
                let sum: f64 = base.iter().map(|c| c.leaf.weight).sum();
                let back = set.separating(&q, &p);
                prop_assert!((sum - back.weight).abs() < 1e-12);
            }
        }
    }
}
