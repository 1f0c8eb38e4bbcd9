//! Distances on level sets, translation-length spectra and the a → 0
//! convergence experiments.
//!
//! Lines are points of `X_τ` (cosmological gradient lines) or of `X_T`
//! (flow lines of `ξ` for another time `T`). A line meets each level of each
//! time once; distances are measured on the level between those points.

pub mod converge;
pub mod generic;
pub mod spectrum;
pub mod structured;

use std::cell::RefCell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mink::{HPoint, MinkVec};
use crate::singularity::{CosmoPoint, GradientLine, SingularityError, Spacetime};
use crate::times::{solve_increasing, xi_flow, TimeError, TimeFunction};

pub use converge::{converge, richardson, ConvergeSetup, ConvergenceReport, Extrapolation, Tolerances};
pub use generic::{generic_distance, LineChart};
pub use spectrum::{spectrum, SpectrumPoint, SpectrumReport};
pub use structured::StructuredProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Singularity(#[from] SingularityError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error("optimizer failure: {0}")]
    Optimizer(String),
    #[error("chart failure: {0}")]
    Chart(String),
    #[error("inconsistent path combinatorics: {0}")]
    Combinatorics(String),
}

impl MetricError {
    pub(crate) fn optimizer(e: argmin::core::Error) -> Self {
        MetricError::Optimizer(e.to_string())
    }
}

/// Discretization and solver parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    /// Radius `K` of the hyperboloid charting the line space.
    pub chart_radius: f64,
    /// Target level length between consecutive path nodes.
    pub node_spacing: f64,
    pub max_nodes_per_piece: usize,
    /// Interior nodes when no initial path is available.
    pub default_nodes: usize,
    /// Straightening rounds; nodes are redistributed between rounds.
    pub rounds: usize,
    pub max_iters: u64,
    /// Iterations when the path starts as a straight line in the chart.
    pub cold_iters: u64,
    pub grad_tol: f64,
    /// Stop when an iteration improves the length by less than this fraction.
    pub cost_tol: f64,
    pub fd_step: f64,
    /// Also run the generic backend on τ-levels and keep the better value.
    pub cross_validate: bool,
    /// Nelder-Mead iterations for the spectrum minimization from the axis seeds.
    pub spectrum_evals: u64,
    /// Nelder-Mead iterations when started from a known minimizer.
    pub spectrum_warm_evals: u64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            chart_radius: 20.0,
            node_spacing: 0.15,
            max_nodes_per_piece: 24,
            default_nodes: 24,
            rounds: 1,
            max_iters: 40,
            cold_iters: 200,
            grad_tol: 1e-10,
            cost_tol: 1e-7,
            fd_step: 1e-7,
            cross_validate: false,
            spectrum_evals: 60,
            spectrum_warm_evals: 16,
        }
    }
}

/// A line of `X_τ`, or a flow line of `ξ_T` through `base` for the time
/// `T` supplied alongside.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum LineRef {
    Tau(GradientLine),
    Flow { base: MinkVec },
}

impl LineRef {
    /// The line of `X_τ` above the region (or band) of `u`, through the
    /// point at time `t`.
    pub fn above(st: &Spacetime, u: &HPoint) -> Result<LineRef, MetricError> {
        Ok(LineRef::Tau(st.gradient_line(&st.point_above(u, 1.0))?))
    }

    pub fn through(st: &Spacetime, p: &MinkVec) -> Result<LineRef, MetricError> {
        Ok(LineRef::Tau(st.gradient_line(p)?))
    }

    /// Point where the line meets `{level_time = a}`. For `Flow`, the line
    /// is a flow line of `line_time`.
    pub fn level_point(
        &self,
        level_time: &dyn TimeFunction,
        line_time: &dyn TimeFunction,
        a: f64,
    ) -> Result<MinkVec, MetricError> {
        match self {
            LineRef::Tau(line) => Ok(level_time.level_on_line(line, a)?),
            LineRef::Flow { base } => {
                let b = line_time.value(base)?;
                if level_time.name() == line_time.name() {
                    return Ok(xi_flow(line_time, base, a - b)?);
                }
                // flow from the closest point already visited on the line
                let visited = RefCell::new(vec![(b, *base)]);
                let flow_to = |s: f64| -> Result<MinkVec, TimeError> {
                    let (s0, p0) = *visited
                        .borrow()
                        .iter()
                        .min_by(|x, y| (x.0 - s).abs().total_cmp(&(y.0 - s).abs()))
                        .unwrap();
                    let p = xi_flow(line_time, &p0, s - s0)?;
                    visited.borrow_mut().push((s, p));
                    Ok(p)
                };
                let f = |s: f64| -> Result<f64, TimeError> { Ok(level_time.value(&flow_to(s)?)? - a) };
                let s = solve_increasing(f, a, a)?;
                Ok(flow_to(s)?)
            }
        }
    }
}

/// Backend value reported inside an estimate.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BackendValue {
    pub backend: String,
    pub value: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DistanceEstimate {
    pub a: f64,
    pub time: String,
    /// Length of the best path found on the level.
    pub upper: f64,
    /// Tree distance of the ends for τ-levels, 0 otherwise.
    pub lower: f64,
    pub certified_lower: bool,
    pub method: String,
    pub backends: Vec<BackendValue>,
    /// Covered radius of the leaf enumeration and whether the query fit.
    pub covered_radius: f64,
    pub complete: bool,
}

impl DistanceEstimate {
    pub fn value(&self) -> f64 {
        self.upper
    }
}

fn is_tau(t: &dyn TimeFunction) -> bool {
    t.name() == "cosmological"
}

/// Optimal τ-level path between two τ-level points, with its problem data.
pub fn tau_path(
    st: &Spacetime,
    a: f64,
    p: &MinkVec,
    q: &MinkVec,
    opts: &MetricOptions,
) -> Result<(f64, f64, Vec<MinkVec>, f64), MetricError> {
    tau_path_between(st, a, &st.cosmo_time(p)?, &st.cosmo_time(q)?, opts)
}

/// As [`tau_path`], from the cosmological data of both ends.
pub fn tau_path_between(
    st: &Spacetime,
    a: f64,
    cx: &CosmoPoint,
    cy: &CosmoPoint,
    opts: &MetricOptions,
) -> Result<(f64, f64, Vec<MinkVec>, f64), MetricError> {
    let problem = StructuredProblem::new(st, cx, cy)?;
    let (len, th) = problem.solve(a)?;
    let pts = problem.path_points(a, &th, opts.node_spacing, opts.max_nodes_per_piece);
    Ok((len, problem.tree_distance(), pts, problem.needed_radius))
}

/// Distance on `{time = a}` between two points of that level.
pub fn distance_between(
    st: &Spacetime,
    time: &dyn TimeFunction,
    tau: &dyn TimeFunction,
    a: f64,
    p: &MinkVec,
    q: &MinkVec,
    opts: &MetricOptions,
) -> Result<DistanceEstimate, MetricError> {
    if p.dist_inf(q) == 0.0 {
        return Ok(coincident(st, time, a));
    }
    let (cx, cy) = (st.cosmo_time(p)?, st.cosmo_time(q)?);
    distance_between_known(st, time, tau, a, (p, &cx), (q, &cy), opts)
}

fn coincident(st: &Spacetime, time: &dyn TimeFunction, a: f64) -> DistanceEstimate {
    DistanceEstimate {
        a,
        time: time.name(),
        upper: 0.0,
        lower: 0.0,
        certified_lower: true,
        method: "coincident".into(),
        backends: Vec::new(),
        covered_radius: st.leaves().covered_radius,
        complete: true,
    }
}

/// As [`distance_between`], given the cosmological data of both points.
pub fn distance_between_known(
    st: &Spacetime,
    time: &dyn TimeFunction,
    tau: &dyn TimeFunction,
    a: f64,
    (p, cx): (&MinkVec, &CosmoPoint),
    (q, cy): (&MinkVec, &CosmoPoint),
    opts: &MetricOptions,
) -> Result<DistanceEstimate, MetricError> {
    let covered = st.leaves().covered_radius;
    if p.dist_inf(q) == 0.0 {
        return Ok(coincident(st, time, a));
    }
    if is_tau(time) {
        let (len, tree, pts, needed) = tau_path_between(st, a, cx, cy, opts)?;
        let mut backends = vec![BackendValue {
            backend: "structured".into(),
            value: len,
            nodes: pts.len(),
        }];
        let mut upper = len;
        if opts.cross_validate {
            let g = generic_distance(st, time, a, *p, *q, &[], opts)?;
            upper = upper.min(g.length);
            backends.push(BackendValue {
                backend: "generic".into(),
                value: g.length,
                nodes: g.points.len(),
            });
        }
        return Ok(DistanceEstimate {
            a,
            time: time.name(),
            upper,
            lower: tree,
            certified_lower: true,
            method: "structured".into(),
            backends,
            covered_radius: covered,
            complete: needed <= covered,
        });
    }
    // start from the optimal τ-level path between the same two lines
    debug_assert!(is_tau(tau));
    let at_level = |c: &CosmoPoint| CosmoPoint { tau: a, ..c.clone() };
    let (_, _, init, needed) = tau_path_between(st, a, &at_level(cx), &at_level(cy), opts)?;
    let interior = if init.len() > 2 { &init[1..init.len() - 1] } else { &[][..] };
    let g = generic_distance(st, time, a, *p, *q, interior, opts)?;
    Ok(DistanceEstimate {
        a,
        time: time.name(),
        upper: g.length,
        lower: 0.0,
        certified_lower: false,
        method: "generic: no certified lower bound".into(),
        backends: vec![BackendValue {
            backend: "generic".into(),
            value: g.length,
            nodes: g.points.len(),
        }],
        covered_radius: covered,
        complete: needed <= covered,
    })
}

/// `d^T_a(x, y)`: both lines belong to the family of `time`
/// (`Tau` lines when `time` is τ, `Flow` lines otherwise).
pub fn level_distance(
    st: &Spacetime,
    time: &dyn TimeFunction,
    tau: &dyn TimeFunction,
    a: f64,
    x: &LineRef,
    y: &LineRef,
    opts: &MetricOptions,
) -> Result<DistanceEstimate, MetricError> {
    let p = x.level_point(time, time, a)?;
    let q = y.level_point(time, time, a)?;
    distance_between(st, time, tau, a, &p, &q, opts)
}

/// `δ^T_a(x, y)` for lines of `X_τ`: their points on `{T = a}`, measured
/// on that level.
pub fn mixed_distance(
    st: &Spacetime,
    time: &dyn TimeFunction,
    tau: &dyn TimeFunction,
    a: f64,
    x: &GradientLine,
    y: &GradientLine,
    opts: &MetricOptions,
) -> Result<DistanceEstimate, MetricError> {
    let p = time.level_on_line(x, a)?;
    let q = time.level_on_line(y, a)?;
    distance_between(st, time, tau, a, &p, &q, opts)
}

/// `δ^τ_a(x, y)` for flow lines of `time`: their points on `{τ = a}`,
/// measured on that level.
pub fn mixed_distance_tau(
    st: &Spacetime,
    time: &dyn TimeFunction,
    tau: &dyn TimeFunction,
    a: f64,
    x: &MinkVec,
    y: &MinkVec,
    opts: &MetricOptions,
) -> Result<DistanceEstimate, MetricError> {
    let p = LineRef::Flow { base: *x }.level_point(tau, time, a)?;
    let q = LineRef::Flow { base: *y }.level_point(tau, time, a)?;
    distance_between(st, tau, tau, a, &p, &q, opts)
}
