//! a → 0 experiments: tabulate distances and spectra on a geometric grid,
//! extrapolate, and compare with the dual tree.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fuchsian::Word;
use crate::mink::HPoint;
use crate::singularity::{GradientLine, Spacetime};
use crate::times::TimeFunction;

use super::spectrum::{spectrum, SpectrumPoint, SpectrumReport};
use super::{mixed_distance, DistanceEstimate, LineRef, MetricError, MetricOptions};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ExtrapolationKind {
    /// Richardson step with the estimated order.
    Richardson,
    /// Last differences below the noise floor; the last value is the limit.
    Settled,
    /// Order below 0.5 or differences of mixed sign.
    Refused,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Extrapolation {
    pub limit: f64,
    pub order: Option<f64>,
    pub kind: ExtrapolationKind,
}

/// Richardson extrapolation to `a = 0` from the last three grid values.
pub fn richardson(grid: &[f64], values: &[f64], noise: f64) -> Extrapolation {
    let n = values.len();
    let last = values.last().copied().unwrap_or(f64::NAN);
    let refused = Extrapolation {
        limit: last,
        order: None,
        kind: ExtrapolationKind::Refused,
    };
    if n < 3 || grid.len() != n {
        return refused;
    }
    let (v0, v1, v2) = (values[n - 3], values[n - 2], values[n - 1]);
    let q = grid[n - 2] / grid[n - 1];
    let (d1, d2) = (v1 - v0, v2 - v1);
    let floor = noise * v2.abs().max(1.0);
    if d1.abs() <= floor && d2.abs() <= floor {
        return Extrapolation {
            limit: v2,
            order: None,
            kind: ExtrapolationKind::Settled,
        };
    }
    let ratio = d1 / d2;
    if ratio.is_nan() || ratio <= 0.0 || !ratio.is_finite() {
        return refused;
    }
    let p = ratio.ln() / q.ln();
    if p < 0.5 {
        return Extrapolation { order: Some(p), ..refused };
    }
    Extrapolation {
        limit: v2 + d2 / (q.powf(p) - 1.0),
        order: Some(p),
        kind: ExtrapolationKind::Richardson,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance on limits.
    pub relative: f64,
    /// Absolute tolerance used when the target is zero.
    pub absolute_at_zero: f64,
    /// Relative slack in the monotonicity check.
    pub monotone_slack: f64,
    /// Relative size of grid differences treated as noise.
    pub noise: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            relative: 0.02,
            absolute_at_zero: 0.02,
            monotone_slack: 1e-3,
            noise: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn matches(&self, value: f64, target: f64) -> bool {
        if target.abs() < 1e-12 {
            value.abs() <= self.absolute_at_zero
        } else {
            (value - target).abs() <= self.relative * target.abs()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceItem {
    /// `d_tau`, `delta_T`, `l`, `l_prime`.
    pub kind: String,
    pub label: String,
    pub level_time: String,
    pub line_time: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub lower: Vec<f64>,
    pub methods: Vec<String>,
    pub extrapolation: Extrapolation,
    pub target: f64,
    pub monotone: Option<bool>,
    pub status: Status,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainCheck {
    pub pair: usize,
    pub time: String,
    pub gamma: Option<Word>,
    pub tree_translation: f64,
    /// `l_{0,T}(γ)`, `δ^T_0(x, γx)`, `d^τ_0(x, γx)`, `l_{0,τ}(γ)`.
    pub chain: [f64; 4],
    pub status: Status,
}

/// Distances of one pair on one level family across the grid.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceSeries {
    pub kind: String,
    pub label: String,
    pub estimates: Vec<DistanceEstimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub items: Vec<ConvergenceItem>,
    pub chains: Vec<ChainCheck>,
    pub spectra: Vec<SpectrumReport>,
    pub distances: Vec<DistanceSeries>,
    pub status: Status,
}

/// Inputs of a convergence run.
pub struct ConvergeSetup<'a> {
    pub st: &'a Spacetime,
    pub tau: Arc<dyn TimeFunction>,
    /// Other times tested against τ.
    pub times: Vec<Arc<dyn TimeFunction>>,
    /// Pairs of points of H²; each stands for the τ-line above it.
    pub pairs: Vec<(HPoint, HPoint)>,
    pub gammas: Vec<Word>,
    /// Decreasing grid for distances.
    pub grid: Vec<f64>,
    /// Decreasing grid for spectra.
    pub spectrum_grid: Vec<f64>,
    /// Candidates for the axis search of the proof-path chain.
    pub search: Vec<Word>,
    pub chains: bool,
    pub opts: MetricOptions,
    pub tol: Tolerances,
}

/// Kind, estimates and level time of one distance series.
type Series = (String, Vec<DistanceEstimate>, String);

fn monotone(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack * w[0].abs().max(1e-12))
}

fn line_of(st: &Spacetime, u: &HPoint) -> Result<GradientLine, MetricError> {
    match LineRef::above(st, u)? {
        LineRef::Tau(l) => Ok(l),
        LineRef::Flow { .. } => unreachable!(),
    }
}

fn transform_line(st: &Spacetime, gamma: &Word, line: &GradientLine) -> GradientLine {
    let iso = st.holonomy(gamma);
    GradientLine {
        r: iso.apply(&line.r),
        u: line.u.transform(&iso.linear),
    }
}

/// `δ^T_a(x, y)` on each grid value (`d^τ_a` when `time` is τ).
pub fn distance_grid(
    st: &Spacetime,
    time: &dyn TimeFunction,
    tau: &dyn TimeFunction,
    grid: &[f64],
    x: &GradientLine,
    y: &GradientLine,
    opts: &MetricOptions,
) -> Result<Vec<DistanceEstimate>, MetricError> {
    grid.iter().map(|&a| mixed_distance(st, time, tau, a, x, y, opts)).collect()
}

/// Spectrum on each grid value, each minimization started from `warm[k]`
/// when given.
#[allow(clippy::too_many_arguments)]
pub fn spectrum_grid(
    st: &Spacetime,
    level_time: &dyn TimeFunction,
    line_time: &dyn TimeFunction,
    tau: &dyn TimeFunction,
    grid: &[f64],
    gamma: &Word,
    warm: Option<&[SpectrumPoint]>,
    opts: &MetricOptions,
) -> Result<Vec<SpectrumPoint>, MetricError> {
    let mut out: Vec<SpectrumPoint> = Vec::with_capacity(grid.len());
    for (k, &a) in grid.iter().enumerate() {
        let start = match warm {
            Some(w) => Some(w[k].argmin),
            None => out.last().map(|p| p.argmin),
        };
        let mut point = spectrum(st, level_time, line_time, tau, a, gamma, start, opts)?;
        if warm.is_none() && k > 0 {
            // the previous argmin may sit in a worse basin than the axis seeds
            let fresh = spectrum(st, level_time, line_time, tau, a, gamma, None, opts)?;
            if fresh.value < point.value {
                point = fresh;
            }
        }
        out.push(point);
    }
    Ok(out)
}

impl ConvergeSetup<'_> {
    #[allow(clippy::too_many_arguments)]
    fn item(
        &self,
        kind: &str,
        label: String,
        level: &dyn TimeFunction,
        line: &dyn TimeFunction,
        grid: &[f64],
        values: Vec<f64>,
        lower: Vec<f64>,
        methods: Vec<String>,
        target: f64,
        check_monotone: bool,
    ) -> ConvergenceItem {
        let extrapolation = richardson(grid, &values, self.tol.noise);
        let mono = check_monotone.then(|| monotone(&values, self.tol.monotone_slack));
        let status = if extrapolation.kind == ExtrapolationKind::Refused {
            Status::Inconclusive
        } else if self.tol.matches(extrapolation.limit, target) && mono != Some(false) {
            Status::Pass
        } else {
            Status::Fail
        };
        ConvergenceItem {
            kind: kind.into(),
            label,
            level_time: level.name(),
            line_time: line.name(),
            grid: grid.to_vec(),
            values,
            lower,
            methods,
            extrapolation,
            target,
            monotone: mono,
            status,
        }
    }

    fn distance_item(
        &self,
        kind: &str,
        label: String,
        time: &dyn TimeFunction,
        est: &[DistanceEstimate],
        target: f64,
    ) -> ConvergenceItem {
        self.item(
            kind,
            label,
            time,
            self.tau.as_ref(),
            &self.grid,
            est.iter().map(|e| e.upper).collect(),
            est.iter().map(|e| e.lower).collect(),
            est.iter().map(|e| e.method.clone()).collect(),
            target,
            true,
        )
    }

    /// Spectra `l` (level and lines of the same time) and, with `mixed`, `l'`
    /// (level of one time, lines of the other) for `gamma`.
    fn spectra_for(&self, gamma: &Word, mixed: bool) -> Result<Vec<SpectrumReport>, MetricError> {
        let st = self.st;
        let tau = self.tau.as_ref();
        let tree_value = st.tree.translation_length(gamma).map_err(crate::singularity::SingularityError::from)?.weight;
        let g = &self.spectrum_grid;
        let base = spectrum_grid(st, tau, tau, tau, g, gamma, None, &self.opts)?;
        let mut reports = vec![self.spectrum_report(gamma, tau, tau, base.clone(), tree_value)];
        for t in &self.times {
            let t = t.as_ref();
            let variants: &[(&dyn TimeFunction, &dyn TimeFunction)] =
                if mixed { &[(t, t), (t, tau), (tau, t)] } else { &[(t, t)] };
            for &(level, line) in variants {
                let pts = spectrum_grid(st, level, line, tau, g, gamma, Some(&base), &self.opts)?;
                reports.push(self.spectrum_report(gamma, level, line, pts, tree_value));
            }
        }
        Ok(reports)
    }

    fn spectrum_report(
        &self,
        gamma: &Word,
        level: &dyn TimeFunction,
        line: &dyn TimeFunction,
        points: Vec<SpectrumPoint>,
        tree_value: f64,
    ) -> SpectrumReport {
        let values: Vec<f64> = points.iter().map(|p| p.value).collect();
        SpectrumReport {
            gamma: gamma.clone(),
            level_time: level.name(),
            line_time: line.name(),
            extrapolation: richardson(&self.spectrum_grid, &values, self.tol.noise),
            points,
            tree_value,
        }
    }
}

fn spectrum_kind(r: &SpectrumReport) -> &'static str {
    if r.level_time == r.line_time {
        "l"
    } else {
        "l_prime"
    }
}

fn worst(statuses: impl IntoIterator<Item = Status>) -> Status {
    let mut out = Status::Pass;
    for s in statuses {
        match s {
            Status::Fail => return Status::Fail,
            Status::Inconclusive => out = Status::Inconclusive,
            Status::Pass => {}
        }
    }
    out
}

/// Runs the whole experiment: pairwise distances on every level family,
/// spectra for each word, and the proof-path chain for each pair.
pub fn converge(setup: &ConvergeSetup) -> Result<ConvergenceReport, MetricError> {
    let st = setup.st;
    let tau = setup.tau.as_ref();
    let lines: Vec<(GradientLine, GradientLine)> = setup
        .pairs
        .iter()
        .map(|(x, y)| Ok((line_of(st, x)?, line_of(st, y)?)))
        .collect::<Result<_, MetricError>>()?;

    let mut items = Vec::new();
    let mut distances = Vec::new();
    let per_pair: Vec<Result<Vec<Series>, MetricError>> = lines
        .par_iter()
        .map(|(x, y)| {
            let mut out = Vec::new();
            let d = distance_grid(st, tau, tau, &setup.grid, x, y, &setup.opts)?;
            out.push(("d_tau".to_string(), d, tau.name()));
            for t in &setup.times {
                let d = distance_grid(st, t.as_ref(), tau, &setup.grid, x, y, &setup.opts)?;
                out.push(("delta_T".to_string(), d, t.name()));
            }
            Ok(out)
        })
        .collect();
    for (i, res) in per_pair.into_iter().enumerate() {
        let rows = res?;
        let target = rows[0].1[0].lower;
        for (kind, est, name) in rows {
            let time = if name == tau.name() {
                setup.tau.clone()
            } else {
                setup.times.iter().find(|t| t.name() == name).unwrap().clone()
            };
            items.push(setup.distance_item(&kind, format!("pair {i}"), time.as_ref(), &est, target));
            distances.push(DistanceSeries {
                kind,
                label: format!("pair {i}"),
                estimates: est,
            });
        }
    }

    // words needed by the chain, found by the tree axis search
    let mut chain_words: Vec<(usize, Option<Word>)> = Vec::new();
    if setup.chains {
        for (i, (x, y)) in setup.pairs.iter().enumerate() {
            let x = st.leaves().perturb_off_leaves(x);
            let y = st.leaves().perturb_off_leaves(y);
            chain_words.push((i, st.tree.axis_search(&x, &y, &setup.search).map(|w| w.gamma)));
        }
    }
    let mut words: Vec<Word> = setup.gammas.clone();
    for (_, w) in &chain_words {
        if let Some(w) = w {
            if !words.contains(w) {
                words.push(w.clone());
            }
        }
    }
    let spectra: Vec<Result<Vec<SpectrumReport>, MetricError>> =
        words.par_iter().map(|g| setup.spectra_for(g, setup.gammas.contains(g))).collect();
    let mut by_word: BTreeMap<String, Vec<SpectrumReport>> = BTreeMap::new();
    let mut all_spectra = Vec::new();
    for (g, res) in words.iter().zip(spectra) {
        let reports = res?;
        if setup.gammas.contains(g) {
            for r in &reports {
                let values: Vec<f64> = r.points.iter().map(|p| p.value).collect();
                let level = find_time(setup, &r.level_time);
                let line = find_time(setup, &r.line_time);
                items.push(setup.item(
                    spectrum_kind(r),
                    format!("{g}"),
                    level.as_ref(),
                    line.as_ref(),
                    &setup.spectrum_grid,
                    values,
                    vec![0.0; r.points.len()],
                    vec!["spectrum".into(); r.points.len()],
                    r.tree_value,
                    false,
                ));
            }
        }
        all_spectra.extend(reports.iter().cloned());
        by_word.insert(g.to_string(), reports);
    }

    let mut chains = Vec::new();
    for (i, gamma) in &chain_words {
        let (x, _) = &lines[*i];
        for t in &setup.times {
            let Some(gamma) = gamma else {
                chains.push(ChainCheck {
                    pair: *i,
                    time: t.name(),
                    gamma: None,
                    tree_translation: f64::NAN,
                    chain: [f64::NAN; 4],
                    status: Status::Inconclusive,
                });
                continue;
            };
            let gx = transform_line(st, gamma, x);
            let reports = &by_word[&gamma.to_string()];
            let limit_of = |level: &str, line: &str| {
                reports
                    .iter()
                    .find(|r| r.level_time == level && r.line_time == line)
                    .map(|r| r.extrapolation)
            };
            let l_t = limit_of(&t.name(), &t.name());
            let l_tau = limit_of(&tau.name(), &tau.name());
            let delta = distance_grid(st, t.as_ref(), tau, &setup.grid, x, &gx, &setup.opts)?;
            let dtau = distance_grid(st, tau, tau, &setup.grid, x, &gx, &setup.opts)?;
            let ex = |d: &[DistanceEstimate]| {
                richardson(&setup.grid, &d.iter().map(|e| e.upper).collect::<Vec<_>>(), setup.tol.noise)
            };
            let parts = [l_t.unwrap(), ex(&delta), ex(&dtau), l_tau.unwrap()];
            let tree = reports[0].tree_value;
            let status = if parts.iter().any(|p| p.kind == ExtrapolationKind::Refused) {
                Status::Inconclusive
            } else if parts.iter().all(|p| setup.tol.matches(p.limit, tree)) {
                Status::Pass
            } else {
                Status::Fail
            };
            chains.push(ChainCheck {
                pair: *i,
                time: t.name(),
                gamma: Some(gamma.clone()),
                tree_translation: tree,
                chain: parts.map(|p| p.limit),
                status,
            });
        }
    }
    let status = worst(items.iter().map(|i| i.status).chain(chains.iter().map(|c| c.status)));
    Ok(ConvergenceReport {
        items,
        chains,
        spectra: all_spectra,
        distances,
        status,
    })
}

fn find_time(setup: &ConvergeSetup, name: &str) -> Arc<dyn TimeFunction> {
    if setup.tau.name() == name {
        return setup.tau.clone();
    }
    setup.times.iter().find(|t| t.name() == name).cloned().unwrap_or_else(|| setup.tau.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_recovers_linear_and_quadratic_tails() {
        let grid: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let lin: Vec<f64> = grid.iter().map(|a| 1.0 + 0.7 * a).collect();
        let e = richardson(&grid, &lin, 1e-12);
        assert_eq!(e.kind, ExtrapolationKind::Richardson);
        assert!((e.limit - 1.0).abs() < 1e-12 && (e.order.unwrap() - 1.0).abs() < 1e-9);
        let quad: Vec<f64> = grid.iter().map(|a| 2.0 - 0.3 * a * a).collect();
        let e = richardson(&grid, &quad, 1e-12);
        assert!((e.limit - 2.0).abs() < 1e-12 && (e.order.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn richardson_refuses_slow_or_erratic_tails() {
        let grid: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).collect();
        let slow: Vec<f64> = grid.iter().map(|a| 1.0 + a.powf(0.3)).collect();
        assert_eq!(richardson(&grid, &slow, 1e-12).kind, ExtrapolationKind::Refused);
        let erratic = vec![1.0, 1.1, 1.05, 1.2, 1.1];
        assert_eq!(richardson(&grid, &erratic, 1e-12).kind, ExtrapolationKind::Refused);
        let flat = vec![1.0; 5];
        let e = richardson(&grid, &flat, 1e-12);
        assert_eq!(e.kind, ExtrapolationKind::Settled);
        assert_eq!(e.limit, 1.0);
    }

    #[test]
    fn tolerance_rules() {
        let t = Tolerances::default();
        assert!(t.matches(1.015, 1.0) && !t.matches(1.03, 1.0));
        assert!(t.matches(0.019, 0.0) && !t.matches(0.03, 0.0));
    }
}
