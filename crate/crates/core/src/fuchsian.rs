//! The genus-2 surface group as a cocompact subgroup of SO⁺(1,2).
//!
//! Generators are the side pairings of the regular octagon with vertex angles
//! π/4. Also: word arithmetic, deduplicated group balls, and axes of
//! hyperbolic elements.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mink::{h2_dist, GeodesicH2, HPoint, Mat3, MinkVec};

/// Generator letters: `a1 b1 a2 b2` are 0..4, their inverses `A1 B1 A2 B2` 4..8.
pub const LETTER_NAMES: [&str; 8] = ["a1", "b1", "a2", "b2", "A1", "B1", "A2", "B2"];

pub const DEFAULT_BALL_CAP: usize = 200_000;
pub const RELATOR_TOL: f64 = 1e-8;
pub const DEDUP_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("surface group construction failed: {0}")]
    Construction(String),
    #[error("unknown generator letter in word {0:?}")]
    BadWord(String),
    #[error("group ball exceeds cap of {cap} elements at radius {radius}")]
    ResourceCap { cap: usize, radius: usize },
    #[error("element {0} is not hyperbolic (|trace| = {1})")]
    NotHyperbolic(String, f64),
}

#[inline]
pub fn inverse_letter(l: u8) -> u8 {
    (l + 4) % 8
}

/// Word over the generators, applied left to right as a matrix product.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn identity() -> Word {
        Word(Vec::new())
    }

    pub fn letter(l: u8) -> Word {
        Word(vec![l])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&l| inverse_letter(l)).collect())
    }

    /// Free reduction: cancels adjacent `x x⁻¹` pairs.
    pub fn reduced(&self) -> Word {
        let mut out: Vec<u8> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            if out.last() == Some(&inverse_letter(l)) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v).reduced()
    }

    pub fn pow(&self, n: usize) -> Word {
        let mut v = Vec::with_capacity(self.0.len() * n);
        for _ in 0..n {
            v.extend_from_slice(&self.0);
        }
        Word(v).reduced()
    }

    pub fn conjugate_by(&self, g: &Word) -> Word {
        g.concat(self).concat(&g.inverse())
    }
}

impl FromStr for Word {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Word, GroupError> {
        let cleaned: Vec<char> = s.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
        if cleaned.is_empty() || cleaned == ['e'] || cleaned == ['1'] {
            return Ok(Word::identity());
        }
        if !cleaned.len().is_multiple_of(2) {
            return Err(GroupError::BadWord(s.to_string()));
        }
        cleaned
            .chunks(2)
            .map(|pair| {
                let tok: String = pair.iter().collect();
                LETTER_NAMES
                    .iter()
                    .position(|n| *n == tok)
                    .map(|i| i as u8)
                    .ok_or_else(|| GroupError::BadWord(s.to_string()))
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(Word)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for &l in &self.0 {
            write!(f, "{}", LETTER_NAMES[l as usize])?;
        }
        Ok(())
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Word, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceGroup {
    generators: [Mat3; 8],
    pub relator: Word,
    pub basepoint: HPoint,
    /// Circumradius of the fundamental octagon, when built from one.
    pub circumradius: Option<f64>,
}

/// Interior angle of the regular hyperbolic octagon with inradius `r`.
fn octagon_vertex_angle(r: f64) -> f64 {
    let normal = |phi: f64| MinkVec::new(r.sinh(), r.cosh() * phi.cos(), r.cosh() * phi.sin());
    let c = normal(0.0).inner(&normal(PI / 4.0));
    if c >= 1.0 {
        0.0
    } else {
        (-c).acos()
    }
}

fn side_pairing(inradius: f64, from: usize, to: usize) -> Mat3 {
    let phi = |k: usize| k as f64 * PI / 4.0;
    Mat3::rotation(phi(to))
        .mul(&Mat3::boost_x(2.0 * inradius))
        .mul(&Mat3::rotation(PI - phi(from)))
}

impl SurfaceGroup {
    /// Surface group of the regular octagon with vertex angles π/4 and
    /// boundary word `a1 b1 A1 B1 a2 b2 A2 B2`.
    pub fn genus2_octagon() -> Result<SurfaceGroup, GroupError> {
        let target = PI / 4.0;
        let (mut lo, mut hi) = (1e-6, 5.0);
        if octagon_vertex_angle(lo) < target || octagon_vertex_angle(hi) > target {
            return Err(GroupError::Construction("angle bracket failed".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if octagon_vertex_angle(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        let a1 = side_pairing(r, 0, 2).lorentz_inverse();
        let b1 = side_pairing(r, 1, 3);
        let a2 = side_pairing(r, 4, 6).lorentz_inverse();
        let b2 = side_pairing(r, 5, 7);
        // circumradius from the right triangle (centre, side midpoint, vertex)
        let circ = ((PI / 8.0).tan().recip() * (target / 2.0).tan().recip()).acosh();
        let relator: Word = "a1b1A1B1a2b2A2B2".parse()?;
        let g = SurfaceGroup::from_generators([a1, b1, a2, b2], relator)?;
        Ok(SurfaceGroup {
            circumradius: Some(circ),
            ..g
        })
    }

    /// Custom group from the four generator matrices and a relator word.
    pub fn from_generators(gens: [Mat3; 4], relator: Word) -> Result<SurfaceGroup, GroupError> {
        let mut generators = [Mat3::IDENTITY; 8];
        for (i, m) in gens.iter().enumerate() {
            if !m.is_orthochronous_lorentz(1e-8) {
                return Err(GroupError::Construction(format!(
                    "generator {} is not in SO+(1,2)",
                    LETTER_NAMES[i]
                )));
            }
            generators[i] = *m;
            generators[i + 4] = m.lorentz_inverse();
        }
        let g = SurfaceGroup {
            generators,
            relator,
            basepoint: HPoint::ORIGIN,
            circumradius: None,
        };
        let defect = g.relator_defect();
        if defect > RELATOR_TOL {
            return Err(GroupError::Construction(format!(
                "relator {} evaluates {defect:e} away from the identity",
                g.relator
            )));
        }
        for (i, m) in generators.iter().enumerate().take(4) {
            if m.trace().abs() <= 3.0 {
                return Err(GroupError::Construction(format!(
                    "generator {} is not hyperbolic",
                    LETTER_NAMES[i]
                )));
            }
        }
        Ok(g)
    }

    pub fn relator_defect(&self) -> f64 {
        self.eval(&self.relator).dist_inf(&Mat3::IDENTITY)
    }

    pub fn generator(&self, l: u8) -> &Mat3 {
        &self.generators[l as usize]
    }

    pub fn generators(&self) -> &[Mat3; 8] {
        &self.generators
    }

    pub fn eval(&self, w: &Word) -> Mat3 {
        w.0.iter()
            .fold(Mat3::IDENTITY, |m, &l| m.mul(&self.generators[l as usize]))
    }

    /// Writes `p = h·x` with `x` in the Dirichlet domain of the basepoint,
    /// by repeatedly applying the generator that brings `p` closest to `o`.
    pub fn reduce(&self, p: &HPoint) -> Reduction {
        let o = self.basepoint.vec();
        let mut x = p.vec();
        let mut word = Vec::new();
        let mut h = Mat3::IDENTITY;
        for _ in 0..10_000 {
            let mut best = (-x.inner(&o), None);
            for l in 0..8u8 {
                let y = self.generators[l as usize].apply(&x);
                let c = -y.inner(&o);
                if c < best.0 * (1.0 - 1e-13) {
                    best = (c, Some((l, y)));
                }
            }
            match best.1 {
                Some((l, y)) => {
                    x = y;
                    // p = h·x_old and x_new = s·x_old, so h becomes h·s⁻¹
                    let inv = inverse_letter(l);
                    h = h.mul(&self.generators[inv as usize]);
                    word.push(inv);
                }
                None => break,
            }
        }
        let point = HPoint::from_timelike(x).unwrap_or_else(|| HPoint::new_unchecked(x));
        Reduction {
            word: Word(word).reduced(),
            matrix: h,
            point,
        }
    }

    pub fn metric_ball(&self, rho: f64) -> Result<GroupBall, GroupError> {
        GroupBall::metric(self, rho, DEFAULT_BALL_CAP)
    }

    pub fn ball(&self, radius: usize) -> Result<GroupBall, GroupError> {
        GroupBall::build(self, radius, DEFAULT_BALL_CAP)
    }

    pub fn axis_of(&self, w: &Word) -> Result<Axis, GroupError> {
        Axis::of_matrix(w.clone(), &self.eval(w))
    }
}

/// `p = matrix · point` with `point` in the fundamental domain.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub word: Word,
    pub matrix: Mat3,
    pub point: HPoint,
}

#[derive(Clone, Debug)]
pub struct BallElement {
    pub word: Word,
    pub matrix: Mat3,
}

/// Deduplicated elements of word length at most `radius`.
#[derive(Clone, Debug)]
pub struct GroupBall {
    pub radius: usize,
    pub elements: Vec<BallElement>,
    /// Number of elements first reached at each word length.
    pub sphere_sizes: Vec<usize>,
    /// Smallest displacement `d(o, g·o)` over the outermost sphere.
    pub outer_displacement: f64,
    /// Set for metric balls: every `g` with `d(o, g·o) ≤ ρ` is present.
    pub metric_radius: Option<f64>,
}

/// Spatial hash on `g·o`; distinct elements of a torsion-free discrete group
/// move the basepoint to points at least the systole apart, and Euclidean
/// distance on the hyperboloid dominates hyperbolic distance.
struct OrbitIndex {
    cells: HashMap<[i64; 3], Vec<usize>>,
    quantum: f64,
}

impl OrbitIndex {
    fn new() -> Self {
        OrbitIndex {
            cells: HashMap::new(),
            quantum: 1e-3,
        }
    }

    fn key(&self, v: &MinkVec) -> [i64; 3] {
        [
            (v.0[0] / self.quantum).floor() as i64,
            (v.0[1] / self.quantum).floor() as i64,
            (v.0[2] / self.quantum).floor() as i64,
        ]
    }

    fn find(&self, v: &MinkVec, m: &Mat3, elements: &[BallElement]) -> Option<usize> {
        let k = self.key(v);
        let tol = DEDUP_TOL * m.max_abs().max(1.0);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in list {
                            if elements[i].matrix.dist_inf(m) <= tol {
                                return Some(i);
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, v: &MinkVec, idx: usize) {
        let k = self.key(v);
        self.cells.entry(k).or_default().push(idx);
    }
}

impl GroupBall {
    pub fn build(g: &SurfaceGroup, radius: usize, cap: usize) -> Result<GroupBall, GroupError> {
        let o = g.basepoint.vec();
        let mut elements = vec![BallElement {
            word: Word::identity(),
            matrix: Mat3::IDENTITY,
        }];
        let mut index = OrbitIndex::new();
        index.insert(&o, 0);
        let mut frontier = vec![0usize];
        let mut sphere_sizes = vec![1];
        let mut outer_displacement = 0.0;
        for step in 1..=radius {
            let mut next = Vec::new();
            let mut min_disp = f64::INFINITY;
            for &fi in &frontier {
                let (word, mat) = (elements[fi].word.clone(), elements[fi].matrix);
                for l in 0..8u8 {
                    if word.0.last() == Some(&inverse_letter(l)) {
                        continue;
                    }
                    let m = mat.mul(g.generator(l));
                    let image = m.apply(&o);
                    if index.find(&image, &m, &elements).is_some() {
                        continue;
                    }
                    let mut w = word.0.clone();
                    w.push(l);
                    elements.push(BallElement {
                        word: Word(w),
                        matrix: m,
                    });
                    if elements.len() > cap {
                        return Err(GroupError::ResourceCap { cap, radius: step });
                    }
                    let idx = elements.len() - 1;
                    index.insert(&image, idx);
                    next.push(idx);
                    min_disp = min_disp.min((-image.inner(&o)).max(1.0).acosh());
                }
            }
            sphere_sizes.push(next.len());
            outer_displacement = min_disp;
            frontier = next;
        }
        Ok(GroupBall {
            radius,
            elements,
            sphere_sizes,
            outer_displacement,
            metric_radius: None,
        })
    }

    /// All elements moving the basepoint by at most `rho`.
    ///
    /// The search walks tiles of the fundamental octagon through side
    /// pairings. Tiles met by the segment `[o, g·o]` have centers within
    /// `d(o, g·o) + circumradius` of `o`, so pruning at `rho + circumradius`
    /// loses nothing.
    pub fn metric(g: &SurfaceGroup, rho: f64, cap: usize) -> Result<GroupBall, GroupError> {
        let rc = g.circumradius.ok_or_else(|| {
            GroupError::Construction("metric balls need the fundamental domain circumradius".into())
        })?;
        let o = g.basepoint.vec();
        let disp = |m: &Mat3| (-m.apply(&o).inner(&o)).max(1.0).acosh();
        let prune = rho + rc + 1e-9;
        let mut all = vec![BallElement {
            word: Word::identity(),
            matrix: Mat3::IDENTITY,
        }];
        let mut index = OrbitIndex::new();
        index.insert(&o, 0);
        let mut frontier = vec![0usize];
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            let mut next = Vec::new();
            for &fi in &frontier {
                let (word, mat) = (all[fi].word.clone(), all[fi].matrix);
                for l in 0..8u8 {
                    if word.0.last() == Some(&inverse_letter(l)) {
                        continue;
                    }
                    let m = mat.mul(g.generator(l));
                    if disp(&m) > prune {
                        continue;
                    }
                    let image = m.apply(&o);
                    if index.find(&image, &m, &all).is_some() {
                        continue;
                    }
                    let mut w = word.0.clone();
                    w.push(l);
                    all.push(BallElement {
                        word: Word(w),
                        matrix: m,
                    });
                    if all.len() > cap {
                        return Err(GroupError::ResourceCap { cap, radius: depth });
                    }
                    let idx = all.len() - 1;
                    index.insert(&image, idx);
                    next.push(idx);
                }
            }
            frontier = next;
        }
        let mut elements: Vec<BallElement> = all.into_iter().filter(|e| disp(&e.matrix) <= rho).collect();
        elements.sort_by_key(|e| e.word.len());
        let radius = elements.last().map_or(0, |e| e.word.len());
        let mut sphere_sizes = vec![0; radius + 1];
        for e in &elements {
            sphere_sizes[e.word.len()] += 1;
        }
        Ok(GroupBall {
            radius,
            elements,
            sphere_sizes,
            outer_displacement: rho,
            metric_radius: Some(rho),
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Index of the element equal to `m` within the deduplication tolerance.
    pub fn position(&self, m: &Mat3) -> Option<usize> {
        let tol = DEDUP_TOL * m.max_abs().max(1.0);
        self.elements.iter().position(|e| e.matrix.dist_inf(m) <= tol)
    }
}

/// Axis of a hyperbolic element acting on H².
#[derive(Clone, Debug, Serialize)]
pub struct Axis {
    pub word: Word,
    pub translation_length: f64,
    /// Null eigenvector for eigenvalue `e^ℓ`, normalized to time component 1.
    pub attracting: MinkVec,
    /// Null eigenvector for eigenvalue `e^{-ℓ}`.
    pub repelling: MinkVec,
    pub geodesic: GeodesicH2,
}

impl Axis {
    pub fn of_matrix(word: Word, a: &Mat3) -> Result<Axis, GroupError> {
        let tr = a.trace();
        if tr.abs() <= 3.0 + 1e-9 {
            return Err(GroupError::NotHyperbolic(word.to_string(), tr.abs()));
        }
        let ell = ((tr - 1.0) / 2.0).acosh();
        // A J - J Aᵀ is antisymmetric; its axial vector w gives the fixed
        // spacelike direction J w without eigen-solves
        let s = a.mul(&Mat3::J).0;
        let t = Mat3::J.mul(&a.transpose()).0;
        let k = |i: usize, j: usize| s[i][j] - t[i][j];
        let w = MinkVec([k(1, 2), -k(0, 2), k(0, 1)]);
        let mut v = MinkVec([-w.0[0], w.0[1], w.0[2]]).unit_spacelike();
        let (th1, th2) = GeodesicH2 { dual: v }.endpoints();
        let n1 = MinkVec::new(1.0, th1.cos(), th1.sin());
        let n2 = MinkVec::new(1.0, th2.cos(), th2.sin());
        let (attracting, repelling) = if a.apply(&n1).0[0] > a.apply(&n2).0[0] {
            (n1, n2)
        } else {
            (n2, n1)
        };
        let det = Mat3([
            [repelling.0[0], attracting.0[0], v.0[0]],
            [repelling.0[1], attracting.0[1], v.0[1]],
            [repelling.0[2], attracting.0[2], v.0[2]],
        ])
        .det();
        if det < 0.0 {
            v = -v;
        }
        Ok(Axis {
            word,
            translation_length: ell,
            attracting,
            repelling,
            geodesic: GeodesicH2 { dual: v },
        })
    }

    /// Closest point of the axis to `p`.
    pub fn foot(&self, p: &HPoint) -> HPoint {
        self.geodesic.foot(p)
    }

    /// Unit tangent of the axis at a point on it, pointing toward the
    /// attracting end.
    pub fn tangent_at(&self, on_axis: &HPoint) -> MinkVec {
        let t = self.geodesic.dual.cross(&on_axis.vec());
        let t = t * (1.0 / t.norm_sq().sqrt());
        if t.inner(&self.attracting) < 0.0 {
            // <tangent, attracting null point> < 0 means moving toward it
            t
        } else {
            -t
        }
    }
}

/// Smallest displacement `d(x, A x)` over a polar grid around the basepoint.
pub fn sampled_min_displacement(a: &Mat3, center: &HPoint, radius: f64, n: usize) -> f64 {
    let mut best = f64::INFINITY;
    let dir0 = MinkVec::new(0.0, 1.0, 0.0);
    let dir1 = MinkVec::new(0.0, 0.0, 1.0);
    // tangent frame at center via a boost taking the origin to center
    let c = center.vec();
    let t0 = {
        let w = dir0 + c * c.inner(&dir0);
        w * (1.0 / w.norm_sq().sqrt())
    };
    let t1 = {
        let w = dir1 + c * c.inner(&dir1) - t0 * t0.inner(&dir1);
        w * (1.0 / w.norm_sq().sqrt())
    };
    for i in 0..=n {
        let r = radius * i as f64 / n as f64;
        let m = if i == 0 { 1 } else { 8 * i };
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            let dir = t0 * th.cos() + t1 * th.sin();
            let p = center.exp(&dir, r);
            best = best.min(h2_dist(&p, &p.transform(a)));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> SurfaceGroup {
        SurfaceGroup::genus2_octagon().unwrap()
    }

    #[test]
    fn relator_and_symmetry() {
        let g = g();
        assert!(g.relator_defect() < 1e-8, "defect {}", g.relator_defect());
        let a1 = g.eval(&"a1".parse().unwrap());
        let a2 = g.eval(&"a2".parse().unwrap());
        assert!((a1.trace() - a2.trace()).abs() < 1e-8);
        for m in g.generators() {
            assert!(m.trace().abs() > 3.0);
        }
    }

    #[test]
    fn octagon_angle_is_quarter_turn() {
        let g = g();
        let circ = g.circumradius.unwrap();
        // closed form cosh R = cot²(π/8) used only as a check
        let expected = (1.0 / (PI / 8.0).tan()).powi(2).acosh();
        assert!((circ - expected).abs() < 1e-9, "{circ} vs {expected}");
    }

    #[test]
    fn translation_length_two_ways() {
        let g = g();
        let a = g.eval(&"a1".parse().unwrap());
        let ax = g.axis_of(&"a1".parse().unwrap()).unwrap();
        let foot = ax.foot(&HPoint::ORIGIN);
        let sampled = sampled_min_displacement(&a, &foot, 0.3, 30);
        assert!(sampled >= ax.translation_length - 1e-9);
        assert!((sampled - ax.translation_length) / ax.translation_length < 0.01);
    }

    #[test]
    fn word_parsing_and_reduction() {
        let w: Word = "a1b1B1A1a2".parse().unwrap();
        assert_eq!(w.reduced().to_string(), "a2");
        assert_eq!(w.inverse().to_string(), "A2a1b1B1A1");
        assert!("a3".parse::<Word>().is_err());
        assert_eq!("e".parse::<Word>().unwrap(), Word::identity());
    }

    #[test]
    fn small_balls() {
        let g = g();
        let b0 = g.ball(0).unwrap();
        assert_eq!(b0.len(), 1);
        let b1 = g.ball(1).unwrap();
        assert_eq!(b1.len(), 9);
        let b3 = g.ball(3).unwrap();
        assert!(b3.len() > b1.len());
        for e in &b3.elements {
            assert!(b3.position(&e.matrix.lorentz_inverse()).is_some());
        }
    }

    #[test]
    fn ball_dedups_relator_halves() {
        let g = g();
        let b4 = g.ball(4).unwrap();
        // free group ball of radius 4 has 3201 words; the relator of length 8
        // identifies each pair of complementary halves
        assert!(b4.len() < 3201, "{}", b4.len());
        let cap = GroupBall::build(&g, 4, 100);
        assert!(matches!(cap, Err(GroupError::ResourceCap { .. })));
    }

    #[test]
    fn metric_ball_contains_every_close_word() {
        let g = g();
        let rho = 3.5;
        let m = g.metric_ball(rho).unwrap();
        let o = g.basepoint;
        let w6 = g.ball(6).unwrap();
        let close = w6
            .elements
            .iter()
            .filter(|e| h2_dist(&o, &o.transform(&e.matrix)) <= rho)
            .count();
        assert_eq!(close, m.len());
        for e in &w6.elements {
            if h2_dist(&o, &o.transform(&e.matrix)) <= rho {
                assert!(m.position(&e.matrix).is_some(), "missing {}", e.word);
            }
        }
        for e in &m.elements {
            assert!(m.position(&e.matrix.lorentz_inverse()).is_some());
        }
    }

    #[test]
    fn reduction_lands_in_the_octagon() {
        let g = g();
        let rc = g.circumradius.unwrap();
        for (r, t) in [(0.3, 0.1), (3.0, 1.0), (7.5, 2.0), (12.0, 4.0), (16.0, 5.5)] {
            let p = HPoint::from_polar(r, t);
            let red = g.reduce(&p);
            assert!(h2_dist(&g.basepoint, &red.point) <= rc + 1e-9, "{r} {t}");
            let back = red.point.transform(&red.matrix);
            let tol = 1e-14 * r.cosh().powi(2) + 1e-12;
            assert!(back.vec().dist_inf(&p.vec()) < tol * p.vec().max_abs(), "{r} {} vs {}", back.vec(), p.vec());
            assert!(g.eval(&red.word).dist_inf(&red.matrix) < 1e-7 * red.matrix.max_abs());
            for l in 0..8 {
                let y = red.point.transform(g.generator(l));
                assert!(h2_dist(&g.basepoint, &y) >= h2_dist(&g.basepoint, &red.point) - 1e-9);
            }
        }
    }

    #[test]
    fn compose_matches_words_on_ball2() {
        let g = g();
        let b2 = g.ball(2).unwrap();
        for x in &b2.elements {
            for y in &b2.elements {
                let prod = g.eval(&x.word.concat(&y.word));
                assert!(prod.dist_inf(&x.matrix.mul(&y.matrix)) < 1e-9);
            }
        }
    }

    #[test]
    fn axis_properties() {
        let g = g();
        let a1: Word = "a1".parse().unwrap();
        let ax = g.axis_of(&a1).unwrap();
        assert!(ax.translation_length > 0.0);
        let a = g.eval(&a1);
        assert!(a.apply(&ax.geodesic.dual).dist_inf(&ax.geodesic.dual) < 1e-8);
        let conj = a1.conjugate_by(&"b1a2".parse().unwrap());
        let cx = g.axis_of(&conj).unwrap();
        assert!((cx.translation_length - ax.translation_length).abs() < 1e-9);
        for n in 1..=5 {
            let axn = g.axis_of(&a1.pow(n)).unwrap();
            assert!((axn.translation_length - n as f64 * ax.translation_length).abs() < 1e-8);
        }
        assert!(matches!(
            g.axis_of(&Word::identity()),
            Err(GroupError::NotHyperbolic(..))
        ));
        // axis dual vectors are equivariant under conjugation
        let h = g.eval(&"b1a2".parse().unwrap());
        let hv = h.apply(&ax.geodesic.dual);
        assert!(hv.dist_inf(&cx.geodesic.dual) < 1e-7 * hv.max_abs(), "{hv} vs {}", cx.geodesic.dual);
    }

    #[test]
    fn grid_refinement_approaches_from_above() {
        let g = g();
        let w: Word = "b1".parse().unwrap();
        let a = g.eval(&w);
        let ell = g.axis_of(&w).unwrap().translation_length;
        let coarse = sampled_min_displacement(&a, &HPoint::ORIGIN, 3.0, 6);
        let fine = sampled_min_displacement(&a, &HPoint::ORIGIN, 3.0, 60);
        assert!(coarse >= fine - 1e-12 && fine >= ell - 1e-9);
        assert!(fine - ell < coarse - ell + 1e-12);
    }
}
