//! Translation-length spectra of level sets: `inf_x d_a(x, γ·x)`.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use serde::Serialize;

use crate::fuchsian::Word;
use crate::mink::MinkVec;
use crate::singularity::{CosmoPoint, Spacetime};
use crate::times::TimeFunction;

use super::converge::Extrapolation;
use super::{distance_between_known, LineChart, LineRef, MetricError, MetricOptions};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SpectrumPoint {
    pub a: f64,
    /// Smallest displacement found; an upper estimate of the infimum.
    pub value: f64,
    /// Chart coordinates of the minimizing line.
    pub argmin: [f64; 2],
    /// Its point on the level.
    pub point: MinkVec,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SpectrumReport {
    pub gamma: Word,
    /// Time whose level carries the distance.
    pub level_time: String,
    /// Time whose lines parametrize the level.
    pub line_time: String,
    pub points: Vec<SpectrumPoint>,
    /// Translation length in the dual tree.
    pub tree_value: f64,
    pub extrapolation: Extrapolation,
}

struct Displacement<'a> {
    st: &'a Spacetime,
    level_time: &'a dyn TimeFunction,
    line_time: &'a dyn TimeFunction,
    tau: &'a dyn TimeFunction,
    chart: LineChart,
    a: f64,
    gamma: &'a Word,
    holonomy: crate::mink::Isometry,
    opts: &'a MetricOptions,
}

impl Displacement<'_> {
    /// Level point of the line charted at `y`, with the cosmological data of
    /// the chart point as a walk hint.
    fn level_point(&self, y: [f64; 2]) -> Result<(MinkVec, CosmoPoint), MetricError> {
        let base = self.st.cosmo_time(&self.chart.lift(y))?;
        let line = if self.line_time.name() == "cosmological" {
            LineRef::Tau(base.line())
        } else {
            // a flow line is named by its point on {T = 1}, reached along a τ-line
            LineRef::Flow {
                base: self.line_time.level_on_line(&base.line(), 1.0)?,
            }
        };
        Ok((line.level_point(self.level_time, self.line_time, self.a)?, base))
    }

    fn eval(&self, y: [f64; 2]) -> Result<(f64, MinkVec), MetricError> {
        let (p, hint) = self.level_point(y)?;
        let cp = self.st.cosmo_time_hinted(&p, Some(&hint))?;
        // the far end comes from equivariance; a search there may lack leaves
        let q = self.holonomy.apply(&p);
        let cq = self.st.cosmo_image(&cp, self.gamma, &self.holonomy);
        let d = distance_between_known(self.st, self.level_time, self.tau, self.a, (&p, &cp), (&q, &cq), self.opts)?;
        Ok((d.value(), p))
    }
}

impl CostFunction for Displacement<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, y: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok(self.eval([y[0], y[1]]).map_or(1e30, |v| v.0))
    }
}

/// Chart seeds along the axis of `gamma`, plus lines in the band over the
/// axis when the axis is a leaf.
pub fn axis_seeds(st: &Spacetime, gamma: &Word, chart: &LineChart) -> Result<Vec<[f64; 2]>, MetricError> {
    let g = st.group();
    let axis = g.axis_of(gamma).map_err(crate::singularity::SingularityError::from)?;
    let foot = axis.foot(&g.basepoint);
    let tangent = axis.tangent_at(&foot);
    let l = axis.translation_length;
    let mut seeds = Vec::new();
    for k in 0..4 {
        let t = (k as f64 - 2.0) * l / 4.0;
        let u = foot.exp(&tangent, t);
        seeds.push(chart.coords(st, &st.point_above(&u, 1.0))?);
        for leaf in st.leaves().leaves_near(&u, 1e-6).0 {
            let v = leaf.dual();
            if (v.inner(&axis.geodesic.dual).abs() - 1.0).abs() < 1e-8 {
                seeds.push(chart.coords(st, &st.point_over_edge(&leaf, 0.5, &u, 1.0))?);
            }
        }
    }
    Ok(seeds)
}

/// `inf_x d_a(x, γ·x)` on the level of `level_time`, over lines of
/// `line_time`. Starts from `warm` when given, otherwise from the best axis
/// seed, then refines with Nelder-Mead in the line chart.
#[allow(clippy::too_many_arguments)]
pub fn spectrum(
    st: &Spacetime,
    level_time: &dyn TimeFunction,
    line_time: &dyn TimeFunction,
    tau: &dyn TimeFunction,
    a: f64,
    gamma: &Word,
    warm: Option<[f64; 2]>,
    opts: &MetricOptions,
) -> Result<SpectrumPoint, MetricError> {
    let chart = LineChart { k: opts.chart_radius };
    let problem = Displacement {
        st,
        level_time,
        line_time,
        tau,
        chart,
        a,
        gamma,
        holonomy: st.holonomy(gamma),
        opts,
    };
    let mut evaluations = 0;
    let mut last_err = None;
    let mut best = warm.and_then(|w| best_seed(&problem, &[w], &mut evaluations, &mut last_err));
    // a failed warm start falls back to the axis seeds
    let warm = warm.filter(|_| best.is_some());
    if warm.is_none() {
        best = best_seed(&problem, &axis_seeds(st, gamma, &chart)?, &mut evaluations, &mut last_err);
    }
    let Some((value, mut y)) = best else {
        return Err(last_err.unwrap_or_else(|| MetricError::Chart(format!("no seed on the axis of {gamma}"))));
    };
    let budget = if warm.is_some() { opts.spectrum_warm_evals } else { opts.spectrum_evals };
    if budget > 0 {
        let step = 0.25;
        let simplex = vec![
            vec![y[0], y[1]],
            vec![y[0] + step, y[1]],
            vec![y[0], y[1] + step],
        ];
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-12)
            .map_err(MetricError::optimizer)?;
        if let Ok(r) = Executor::new(&problem, solver)
            .configure(|s| s.max_iters(budget))
            .run()
        {
            evaluations += r.state.iter as usize;
            if let Some(p) = r.state.best_param {
                if r.state.best_cost < value {
                    y = [p[0], p[1]];
                }
            }
        }
    }
    let (value_check, point) = problem.eval(y)?;
    Ok(SpectrumPoint {
        a,
        value: value_check,
        argmin: y,
        point,
        evaluations,
    })
}

fn best_seed(
    problem: &Displacement,
    seeds: &[[f64; 2]],
    evaluations: &mut usize,
    last_err: &mut Option<MetricError>,
) -> Option<(f64, [f64; 2])> {
    let mut best: Option<(f64, [f64; 2])> = None;
    for s in seeds {
        *evaluations += 1;
        match problem.eval(*s) {
            Ok((v, _)) if best.is_none_or(|(b, _)| v < b) => best = Some((v, *s)),
            Ok(_) => {}
            Err(e) => *last_err = Some(e),
        }
    }
    best
}

impl CostFunction for &Displacement<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, y: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        (*self).cost(y)
    }
}
