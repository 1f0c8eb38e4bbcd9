//! The real tree dual to a lifted multicurve, queried lazily.
//!
//! Vertices are complementary regions of the lift and edges are leaves with
//! length equal to their weight. Nothing is materialized: every query is a
//! separating-leaf computation on a [`LeafSet`].

use serde::Serialize;

use crate::fuchsian::{GroupError, SurfaceGroup, Word};
use crate::lamination::{fixed_direction, Leaf, LeafSet, SeparatingCount, PERTURBATION};
use crate::mink::{HPoint, MinkVec};

/// Slack for the four-point condition.
pub const FOUR_POINT_TOL: f64 = 1e-9;
/// Slack for the concatenation equality in the axis search.
pub const AXIS_SEARCH_TOL: f64 = 1e-6;

/// A complementary region, keyed by the leaves separating it from the
/// perturbed basepoint, each with its dual vector oriented away from it.
#[derive(Clone, Debug, Serialize)]
pub struct RegionId {
    pub key: Vec<MinkVec>,
    pub rep: HPoint,
}

impl PartialEq for RegionId {
    fn eq(&self, other: &Self) -> bool {
        self.key.len() == other.key.len()
            && self.key.iter().all(|v| {
                other
                    .key
                    .iter()
                    .any(|w| v.dist_inf(w) <= 1e-8 * v.max_abs().max(1.0))
            })
    }
}

#[derive(Clone, Debug, Serialize)]
pub enum TreePoint {
    Vertex(RegionId),
    /// Point at distance `s ∈ [0, weight]` from the minus-side vertex.
    Edge { leaf: Leaf, s: f64 },
}

/// Result of a four-point check.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FourPointReport {
    pub tuples: usize,
    /// Largest gap between the two largest pair sums.
    pub max_gap: f64,
    /// Indices of tuples whose gap exceeds [`FOUR_POINT_TOL`].
    pub violations: Vec<[usize; 4]>,
}

impl FourPointReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Element whose tree axis carries the segment between two points.
#[derive(Clone, Debug, Serialize)]
pub struct AxisWitness {
    pub gamma: Word,
    pub translation_length: f64,
    pub d_xy: f64,
    pub d_x_gx: f64,
    pub d_y_gx: f64,
}

#[derive(Clone, Debug)]
pub struct DualTree {
    pub leaves: LeafSet,
    /// Basepoint pushed off `o` by [`PERTURBATION`] along a fixed direction.
    pub base: HPoint,
}

impl DualTree {
    pub fn new(leaves: LeafSet) -> Self {
        let o = leaves.basepoint;
        let nudged = o.exp(&fixed_direction(&o), PERTURBATION);
        let base = leaves.perturb_off_leaves(&nudged);
        DualTree { leaves, base }
    }

    pub fn group(&self) -> &SurfaceGroup {
        self.leaves.group()
    }

    pub fn region_of(&self, p: &HPoint) -> RegionId {
        let p = self.leaves.perturb_off_leaves(p);
        let key = self
            .leaves
            .leaves_crossing(&self.base, &p)
            .into_iter()
            .map(|c| c.leaf.dual() * -c.sign)
            .collect();
        RegionId { key, rep: p }
    }

    pub fn tree_point(&self, p: &HPoint) -> TreePoint {
        TreePoint::Vertex(self.region_of(p))
    }

    pub fn tree_distance(&self, x: &HPoint, y: &HPoint) -> SeparatingCount {
        let x = self.leaves.perturb_off_leaves(x);
        let y = self.leaves.perturb_off_leaves(y);
        self.leaves.separating(&x, &y)
    }

    pub fn translation_length(&self, gamma: &Word) -> Result<SeparatingCount, GroupError> {
        self.leaves.intersection_number(gamma)
    }

    /// Four-point condition over every 4-subset of `points`.
    pub fn four_point(&self, points: &[HPoint]) -> FourPointReport {
        let n = points.len();
        let d = self.distance_matrix(points);
        let mut tuples = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for l in k + 1..n {
                        tuples.push([i, j, k, l]);
                    }
                }
            }
        }
        four_point_on(&d, &tuples)
    }

    /// Four-point condition over the given index tuples into `points`.
    pub fn four_point_tuples(&self, points: &[HPoint], tuples: &[[usize; 4]]) -> FourPointReport {
        four_point_on(&self.distance_matrix(points), tuples)
    }

    fn distance_matrix(&self, points: &[HPoint]) -> Vec<Vec<f64>> {
        let pts: Vec<HPoint> = points.iter().map(|p| self.leaves.perturb_off_leaves(p)).collect();
        let n = pts.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.leaves.separating(&pts[i], &pts[j]).weight;
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }

    /// Total transverse weight of a polyline: the sum of separating counts
    /// of its segments, with multiplicity.
    pub fn polyline_measure(&self, points: &[HPoint]) -> f64 {
        points
            .windows(2)
            .map(|w| self.tree_distance(&w[0], &w[1]).weight)
            .sum()
    }

    /// First `gamma` in `search` (in order) whose tree axis contains `x` and
    /// passes through `y` on the way to `gamma·x`.
    pub fn axis_search(&self, x: &HPoint, y: &HPoint, search: &[Word]) -> Option<AxisWitness> {
        let g = self.group();
        let d_xy = self.tree_distance(x, y).weight;
        for gamma in search {
            let Ok(tl) = self.translation_length(gamma) else { continue };
            if tl.weight <= AXIS_SEARCH_TOL {
                continue;
            }
            let gx = x.transform(&g.eval(gamma));
            let d_x_gx = self.tree_distance(x, &gx).weight;
            if (d_x_gx - tl.weight).abs() > AXIS_SEARCH_TOL || d_x_gx < d_xy - AXIS_SEARCH_TOL {
                continue;
            }
            let d_y_gx = self.tree_distance(y, &gx).weight;
            if (d_xy + d_y_gx - d_x_gx).abs() <= AXIS_SEARCH_TOL {
                return Some(AxisWitness {
                    gamma: gamma.clone(),
                    translation_length: tl.weight,
                    d_xy,
                    d_x_gx,
                    d_y_gx,
                });
            }
        }
        None
    }
}

fn four_point_on(d: &[Vec<f64>], tuples: &[[usize; 4]]) -> FourPointReport {
    let mut report = FourPointReport {
        tuples: tuples.len(),
        ..Default::default()
    };
    for t in tuples {
        let [i, j, k, l] = *t;
        let mut sums = [d[i][j] + d[k][l], d[i][k] + d[j][l], d[i][l] + d[j][k]];
        sums.sort_by(f64::total_cmp);
        let gap = sums[2] - sums[1];
        report.max_gap = report.max_gap.max(gap);
        if gap > FOUR_POINT_TOL {
            report.violations.push(*t);
        }
    }
    report
}

/// Candidate elements for the axis search: the distinct elements of the word
/// ball of radius `radius` and their powers up to `max_power`, shortest first.
pub fn search_words(g: &SurfaceGroup, radius: usize, max_power: usize) -> Result<Vec<Word>, GroupError> {
    let ball = g.ball(radius)?;
    let mut words: Vec<Word> = Vec::new();
    for e in ball.elements.iter().skip(1) {
        for n in 1..=max_power {
            words.push(e.word.pow(n));
        }
    }
    words.sort_by_key(|w| w.len());
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lamination::{ComponentSpec, MeasuredMulticurve};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn group() -> &'static SurfaceGroup {
        static G: OnceLock<SurfaceGroup> = OnceLock::new();
        G.get_or_init(|| SurfaceGroup::genus2_octagon().unwrap())
    }

    fn tree(items: &[(&str, f64)]) -> DualTree {
        let g = group();
        let spec: Vec<_> = items.iter().map(|(w, x)| ComponentSpec::new(w, *x).unwrap()).collect();
        let lam = MeasuredMulticurve::realize(g, &spec, &g.ball(3).unwrap()).unwrap();
        DualTree::new(lam.lift(g, 5.0).unwrap())
    }

    fn one() -> &'static DualTree {
        static T: OnceLock<DualTree> = OnceLock::new();
        T.get_or_init(|| tree(&[("a1", 1.0)]))
    }

    fn two() -> &'static DualTree {
        static T: OnceLock<DualTree> = OnceLock::new();
        T.get_or_init(|| tree(&[("a1", 1.0), ("a2", 0.5)]))
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<HPoint> {
        (0..n)
            .map(|_| HPoint::from_polar(rng.gen_range(0.0..r), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect()
    }

    fn straddle(eps: f64) -> (HPoint, HPoint) {
        let g = group();
        let axis = g.axis_of(&"a1".parse().unwrap()).unwrap();
        let foot = axis.foot(&g.basepoint);
        let v = axis.geodesic.dual;
        let n = v + foot.vec() * v.inner(&foot.vec());
        let n = n * (1.0 / n.norm_sq().sqrt());
        (foot.exp(&n, eps), foot.exp(&n, -eps))
    }

    #[test]
    fn regions() {
        let t = one();
        let r0 = t.region_of(&group().basepoint);
        assert!(r0.key.is_empty());
        let (p, q) = straddle(0.05);
        let (rp, rq) = (t.region_of(&p), t.region_of(&q));
        assert_ne!(rp, rq);
        let (p2, _) = straddle(0.2);
        assert_eq!(rp, t.region_of(&p2));
    }

    #[test]
    fn distances_on_small_cases() {
        let t = one();
        let p = HPoint::from_polar(0.7, 2.0);
        assert_eq!(t.tree_distance(&p, &p).weight, 0.0);
        let (x, y) = straddle(0.05);
        assert_eq!(t.tree_distance(&x, &y).weight, 1.0);
        let empty = tree(&[]);
        assert_eq!(empty.tree_distance(&x, &HPoint::from_polar(3.0, 1.0)).weight, 0.0);
        assert_eq!(empty.translation_length(&"b1".parse().unwrap()).unwrap().weight, 0.0);
        assert_eq!(t.translation_length(&"a1".parse().unwrap()).unwrap().weight, 0.0);
        assert_eq!(t.translation_length(&"b1".parse().unwrap()).unwrap().weight, 1.0);
    }

    #[test]
    fn four_point_condition_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = random_points(&mut rng, 9, 3.0);
        for t in [one(), two()] {
            let rep = t.four_point(&pts);
            assert_eq!(rep.tuples, 126);
            assert!(rep.passed(), "{rep:?}");
        }
        let same = vec![HPoint::from_polar(0.1, 0.0); 4];
        assert!(two().four_point(&same).passed());
    }

    #[test]
    fn invariance_and_powers() {
        let t = two();
        let g = group();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ball = g.ball(2).unwrap();
        for _ in 0..20 {
            let pts = random_points(&mut rng, 2, 2.5);
            let h = &ball.elements[rng.gen_range(0..ball.len())].matrix;
            let d = t.tree_distance(&pts[0], &pts[1]).weight;
            let dh = t.tree_distance(&pts[0].transform(h), &pts[1].transform(h)).weight;
            assert!((d - dh).abs() < 1e-9);
        }
        for w in ["b1", "a1b1", "b1a2"] {
            let gamma: Word = w.parse().unwrap();
            let base = t.translation_length(&gamma).unwrap().weight;
            for n in 1..=4 {
                let v = t.translation_length(&gamma.pow(n)).unwrap().weight;
                assert!((v - n as f64 * base).abs() < 1e-12, "{w}^{n}");
            }
        }
    }

    /// Open question check: on small instances no polyline from `x` to `y`
    /// has smaller transverse measure than the geodesic segment.
    #[test]
    fn polylines_never_beat_the_geodesic() {
        let t = two();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..15 {
            let ends = random_points(&mut rng, 2, 2.5);
            let direct = t.tree_distance(&ends[0], &ends[1]).weight;
            assert_eq!(t.polyline_measure(&ends), direct);
            for _ in 0..20 {
                let mut path = vec![ends[0]];
                let k = rng.gen_range(1..4);
                path.extend(random_points(&mut rng, k, 3.0));
                path.push(ends[1]);
                assert!(t.polyline_measure(&path) >= direct - 1e-12);
            }
        }
    }

    #[test]
    fn axis_search_finds_witness() {
        let t = one();
        let g = group();
        let words = search_words(g, 3, 6).unwrap();
        let (x, y) = straddle(0.05);
        let w = t.axis_search(&x, &y, &words).expect("witness");
        assert!((w.d_xy - 1.0).abs() < 1e-12);
        assert!(w.d_x_gx >= w.d_xy);
        assert!((w.d_xy + w.d_y_gx - w.d_x_gx).abs() <= AXIS_SEARCH_TOL);
        assert!((w.translation_length - w.d_x_gx).abs() <= AXIS_SEARCH_TOL);
    }
}
