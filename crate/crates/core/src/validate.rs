//! Invariant suite run by `build` and `validate`.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, STREAM_SHAPE, STREAM_SIGMA, STREAM_TREE};
use crate::fuchsian::{Word, RELATOR_TOL};
use crate::mink::{h2_dist, HPoint, MinkVec};
use crate::singularity::Spacetime;
use crate::times::{quasiconcavity_check, time_by_name, ShapeReport, QUASICONCAVITY_SLACK};
use crate::tree::FOUR_POINT_TOL;

/// Tolerance of the cocycle, equivariance and Σ-length identities.
pub const COCYCLE_TOL: f64 = 1e-8;
/// Margin kept inside the covered radius so perturbed points stay covered.
const COVER_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst defect found, or the minimum for shape checks.
    pub value: f64,
    pub tolerance: f64,
    pub checked: usize,
    /// Cases left out because they reach beyond the leaf lift.
    pub skipped: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub shape: Vec<ShapeReport>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &str, value: f64, tolerance: f64, checked: usize, skipped: usize, detail: String) -> Check {
    Check {
        name: name.into(),
        passed: value <= tolerance,
        value,
        tolerance,
        checked,
        skipped,
        detail,
    }
}

fn random_disk_point(rng: &mut ChaCha8Rng, r: f64) -> HPoint {
    HPoint::from_polar(rng.gen_range(0.0..=r), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn covered(st: &Spacetime, p: &HPoint) -> bool {
    h2_dist(&st.group().basepoint, p) <= st.leaves().covered_radius - COVER_MARGIN
}

pub fn relator_check(exp: &Experiment) -> Check {
    check(
        "relator",
        exp.group.relator_defect(),
        RELATOR_TOL,
        1,
        0,
        format!("relator {}", exp.group.relator),
    )
}

/// Simplicity is enforced when the lamination is realized; this records it.
pub fn simplicity_check(exp: &Experiment) -> Check {
    let words: Vec<String> = exp.st.lamination.components.iter().map(|c| c.word.to_string()).collect();
    check(
        "simplicity",
        0.0,
        0.0,
        exp.ball.len() * words.len().max(1),
        0,
        format!("components [{}] disjoint over ball({})", words.join(", "), exp.ball.radius),
    )
}

/// `t_{γη} = t_γ + A_γ t_η` over pairs of the validation ball whose
/// translates of the basepoint the leaf lift covers.
pub fn cocycle_check(exp: &Experiment) -> Check {
    let st = &exp.st;
    let base = st.base();
    let elems: Vec<(&Word, crate::mink::Isometry, bool)> = exp
        .ball
        .elements
        .iter()
        .map(|e| (&e.word, st.holonomy(&e.word), covered(st, &base.transform(&e.matrix))))
        .collect();
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    let mut detail = String::from("all covered pairs agree");
    for (g, hg, cg) in &elems {
        for (h, hh, ch) in &elems {
            let gh = g.concat(h);
            if !(*cg && *ch && covered(st, &base.transform(&exp.group.eval(&gh)))) {
                skipped += 1;
                continue;
            }
            let expect = hg.translation + hg.linear.apply(&hh.translation);
            let got = st.holonomy(&gh).translation;
            let defect = got.dist_inf(&expect) / expect.max_abs().max(1.0);
            checked += 1;
            if defect > worst {
                worst = defect;
                if defect > COCYCLE_TOL {
                    detail = format!("worst pair ({g}, {h})");
                }
            }
        }
    }
    check("cocycle", worst, COCYCLE_TOL, checked, skipped, detail)
}

/// `x(γR) = ρ(γ)x(R)` for sampled regions and the elements of the ball.
pub fn equivariance_check(exp: &Experiment, config: &ExperimentConfig) -> Check {
    let st = &exp.st;
    let mut rng = config.rng(STREAM_SIGMA);
    let points: Vec<HPoint> = (0..config.validation.sigma_pairs)
        .map(|_| st.leaves().perturb_off_leaves(&random_disk_point(&mut rng, config.validation.sample_radius)))
        .collect();
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    let mut detail = String::from("vertices are equivariant");
    for p in &points {
        let x = st.vertex_at(p);
        for e in &exp.ball.elements {
            let gp = p.transform(&e.matrix);
            if !covered(st, &gp) {
                skipped += 1;
                continue;
            }
            let expect = st.holonomy(&e.word).apply(&x);
            let got = st.vertex_at(&gp);
            let defect = got.dist_inf(&expect) / expect.max_abs().max(1.0);
            checked += 1;
            if defect > worst {
                worst = defect;
                if defect > COCYCLE_TOL {
                    detail = format!("worst element {}", e.word);
                }
            }
        }
    }
    check("equivariance", worst, COCYCLE_TOL, checked, skipped, detail)
}

/// Sum of Minkowski lengths of the Σ edges between two regions against
/// their tree distance.
pub fn sigma_isometry_check(exp: &Experiment, config: &ExperimentConfig) -> Check {
    let st = &exp.st;
    let mut rng = config.rng(STREAM_SIGMA);
    rng.set_word_pos(1 << 20);
    let r = config.pairs.radius;
    let (mut worst, mut total) = (0.0f64, 0.0);
    let n = config.validation.sigma_pairs;
    for _ in 0..n {
        let p = random_disk_point(&mut rng, r);
        let q = random_disk_point(&mut rng, r);
        let path = st.sigma_path(&p, &q);
        let len: f64 = path.windows(2).map(|w| (w[1] - w[0]).norm_sq().max(0.0).sqrt()).sum();
        let tree = st.tree.tree_distance(&p, &q).weight;
        worst = worst.max((len - tree).abs());
        total += tree;
    }
    check(
        "sigma_isometry",
        worst,
        COCYCLE_TOL,
        n,
        0,
        format!("mean tree distance {:.6}", total / n.max(1) as f64),
    )
}

fn tree_points(exp: &Experiment, config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Vec<HPoint> {
    (0..40).map(|_| exp.st.leaves().perturb_off_leaves(&random_disk_point(rng, config.pairs.radius))).collect()
}

/// Four-point condition on random 4-tuples.
pub fn four_point_check(exp: &Experiment, config: &ExperimentConfig) -> Check {
    let mut rng = config.rng(STREAM_TREE);
    let points = tree_points(exp, config, &mut rng);
    let tuples: Vec<[usize; 4]> = (0..config.validation.four_point_tuples)
        .map(|_| {
            let v = sample(&mut rng, points.len(), 4).into_vec();
            [v[0], v[1], v[2], v[3]]
        })
        .collect();
    let report = exp.st.tree.four_point_tuples(&points, &tuples);
    check(
        "four_point",
        report.max_gap,
        FOUR_POINT_TOL,
        report.tuples,
        0,
        format!("{} violations", report.violations.len()),
    )
}

/// `d(γx, γy) = d(x, y)` for the generators.
pub fn invariance_check(exp: &Experiment, config: &ExperimentConfig) -> Check {
    let st = &exp.st;
    let mut rng = config.rng(STREAM_TREE);
    rng.set_word_pos(1 << 20);
    let points = tree_points(exp, config, &mut rng);
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    for w in points.chunks(2) {
        let (x, y) = (&w[0], &w[1]);
        let d = st.tree.tree_distance(x, y).weight;
        for m in exp.group.generators() {
            let (gx, gy) = (x.transform(m), y.transform(m));
            let dg = st.tree.tree_distance(&gx, &gy);
            if !dg.is_complete() {
                skipped += 1;
                continue;
            }
            checked += 1;
            worst = worst.max((dg.weight - d).abs());
        }
    }
    check("gamma_invariance", worst, FOUR_POINT_TOL, checked, skipped, String::new())
}

/// `l(γⁿ) = n·l(γ)` for the configured words.
pub fn powers_check(exp: &Experiment, config: &ExperimentConfig) -> Check {
    let tree = &exp.st.tree;
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    let mut detail = Vec::new();
    for gamma in &config.gammas {
        let Ok(l1) = tree.translation_length(gamma) else {
            skipped += 1;
            continue;
        };
        detail.push(format!("l({gamma}) = {:.9}", l1.weight));
        for n in 2..=config.validation.max_power {
            match tree.translation_length(&gamma.pow(n)) {
                Ok(ln) if ln.is_complete() && l1.is_complete() => {
                    checked += 1;
                    worst = worst.max((ln.weight - n as f64 * l1.weight).abs());
                }
                _ => skipped += 1,
            }
        }
    }
    check("translation_powers", worst, FOUR_POINT_TOL, checked, skipped, detail.join("; "))
}

/// Points above regions and over bands at times in `[0.3, 2.5]`.
pub fn shape_samples(st: &Spacetime, n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<MinkVec> {
    (0..n)
        .map(|_| {
            let u = random_disk_point(rng, radius);
            let t = rng.gen_range(0.3..2.5);
            if rng.gen_bool(0.3) {
                let (near, _) = st.leaves().leaves_near(&u, 2.0);
                if let Some(leaf) = near.first() {
                    return st.point_over_edge(leaf, rng.gen_range(0.0..1.0), &u, t);
                }
            }
            st.vertex_at(&u) + u.vec() * t
        })
        .collect()
}

/// Second fundamental form sign for each configured time; times listed in
/// `validation.expect_fail` must fail.
pub fn shape_checks(exp: &Experiment, config: &ExperimentConfig) -> (Vec<Check>, Vec<ShapeReport>) {
    let v = &config.validation;
    let mut rng = config.rng(STREAM_SHAPE);
    let samples = shape_samples(&exp.st, v.shape_samples, v.sample_radius, &mut rng);
    let mut names: Vec<&String> = config.times.iter().collect();
    names.extend(v.expect_fail.iter().filter(|t| !config.times.contains(t)));
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for name in names {
        let Ok(time) = time_by_name(name, exp.st.clone()) else { continue };
        let report = quasiconcavity_check(time.as_ref(), &samples, v.directions);
        let expected = !v.expect_fail.contains(name);
        let detail = if report.passed {
            format!("min Π {:.3e}", report.min_value)
        } else {
            format!(
                "min Π {:.3e} at sample {} in direction {}",
                report.min_value, report.argmin_point, report.argmin_direction
            )
        };
        checks.push(Check {
            name: format!("quasiconcavity {name}"),
            passed: report.passed == expected,
            value: report.min_value,
            tolerance: -QUASICONCAVITY_SLACK,
            checked: report.samples * report.directions,
            skipped: 0,
            detail: if expected { detail } else { format!("expected to fail; {detail}") },
        });
        reports.push(report);
    }
    (checks, reports)
}

/// Checks recorded by `build`: relator, simplicity and cocycle.
pub fn build_checks(exp: &Experiment) -> Vec<Check> {
    vec![relator_check(exp), simplicity_check(exp), cocycle_check(exp)]
}

/// The whole suite.
pub fn validate(exp: &Experiment, config: &ExperimentConfig) -> ValidationReport {
    let mut checks = build_checks(exp);
    checks.push(equivariance_check(exp, config));
    checks.push(sigma_isometry_check(exp, config));
    checks.push(four_point_check(exp, config));
    checks.push(invariance_check(exp, config));
    checks.push(powers_check(exp, config));
    let (shape_checks, shape) = shape_checks(exp, config);
    checks.extend(shape_checks);
    let passed = checks.iter().all(|c| c.passed);
    ValidationReport { checks, shape, passed }
}
