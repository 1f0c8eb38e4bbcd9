//! Level-set distance for an arbitrary time function by path straightening.
//!
//! Nodes are gradient lines of τ, charted by where they cross the
//! hyperboloid `F = {⟨x,x⟩ = -K²}` (coordinates: the spatial part). Each node
//! is mapped to the level `{T = a}` along its line, and the sum of Minkowski
//! chords between consecutive level points is minimized over the interior
//! nodes with L-BFGS on a finite-difference gradient.

use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;

use crate::mink::MinkVec;
use crate::singularity::Spacetime;
use crate::times::TimeFunction;

use super::{MetricError, MetricOptions};

/// Chart of the line space on the hyperboloid of radius `k`.
#[derive(Clone, Copy, Debug)]
pub struct LineChart {
    pub k: f64,
}

impl LineChart {
    pub fn lift(&self, y: [f64; 2]) -> MinkVec {
        MinkVec::new((self.k * self.k + y[0] * y[0] + y[1] * y[1]).sqrt(), y[0], y[1])
    }

    /// Chart coordinates of the τ-gradient line through `p`.
    pub fn coords(&self, st: &Spacetime, p: &MinkVec) -> Result<[f64; 2], MetricError> {
        let line = st.gradient_line(p)?;
        let (r, u) = (line.r, line.u.vec());
        let b = r.inner(&u);
        let disc = b * b + r.norm_sq() + self.k * self.k;
        if disc < 0.0 {
            return Err(MetricError::Chart(format!("line through {p} misses the chart")));
        }
        let q = line.at(b + disc.sqrt());
        Ok([q.0[1], q.0[2]])
    }

    /// Level point of the line charted at `y`.
    pub fn level_point(&self, st: &Spacetime, time: &dyn TimeFunction, a: f64, y: [f64; 2]) -> Result<MinkVec, MetricError> {
        let line = st.gradient_line(&self.lift(y))?;
        Ok(time.level_on_line(&line, a)?)
    }
}

fn chord(p: &MinkVec, q: &MinkVec) -> f64 {
    (*q - *p).norm_sq().max(0.0).sqrt()
}

struct PathCost<'a> {
    st: &'a Spacetime,
    time: &'a dyn TimeFunction,
    chart: LineChart,
    a: f64,
    start: MinkVec,
    end: MinkVec,
    fd_step: f64,
}

const INFEASIBLE: f64 = 1e30;

impl PathCost<'_> {
    fn node(&self, y: [f64; 2]) -> Option<MinkVec> {
        self.chart.level_point(self.st, self.time, self.a, y).ok()
    }

    fn nodes(&self, x: &[f64]) -> Option<Vec<MinkVec>> {
        let mut pts = Vec::with_capacity(x.len() / 2 + 2);
        pts.push(self.start);
        for c in x.chunks(2) {
            pts.push(self.node([c[0], c[1]])?);
        }
        pts.push(self.end);
        Some(pts)
    }

    fn total(pts: &[MinkVec]) -> f64 {
        pts.windows(2).map(|w| chord(&w[0], &w[1])).sum()
    }
}

impl CostFunction for PathCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok(self.nodes(x).map_or(INFEASIBLE, |p| Self::total(&p)))
    }
}

impl Gradient for PathCost<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    /// Central differences; moving node `i` only changes its two chords.
    fn gradient(&self, x: &Vec<f64>) -> Result<Vec<f64>, argmin::core::Error> {
        let Some(pts) = self.nodes(x) else {
            return Ok(vec![0.0; x.len()]);
        };
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() / 2 {
            let (prev, next) = (pts[i], pts[i + 2]);
            for j in 0..2 {
                let mut y = [x[2 * i], x[2 * i + 1]];
                let h = self.fd_step * (1.0 + y[j].abs());
                y[j] += h;
                let plus = self.node(y);
                y[j] -= 2.0 * h;
                let minus = self.node(y);
                if let (Some(p), Some(m)) = (plus, minus) {
                    let fp = chord(&prev, &p) + chord(&p, &next);
                    let fm = chord(&prev, &m) + chord(&m, &next);
                    g[2 * i + j] = (fp - fm) / (2.0 * h);
                }
            }
        }
        Ok(g)
    }
}

/// Result of the generic backend: chord length and the final level points.
#[derive(Clone, Debug)]
pub struct GenericPath {
    pub length: f64,
    pub points: Vec<MinkVec>,
    pub iterations: u64,
}

/// Shortest chord path on `{T = a}` from `start` to `end` (both on the
/// level), started from the lines through `init` (any points of Ω).
pub fn generic_distance(
    st: &Spacetime,
    time: &dyn TimeFunction,
    a: f64,
    start: MinkVec,
    end: MinkVec,
    init: &[MinkVec],
    opts: &MetricOptions,
) -> Result<GenericPath, MetricError> {
    let chart = LineChart { k: opts.chart_radius };
    let mut coords: Vec<[f64; 2]> = init.iter().map(|p| chart.coords(st, p)).collect::<Result<_, _>>()?;
    let budget = if coords.is_empty() { opts.cold_iters } else { opts.max_iters };
    if coords.is_empty() {
        let (c0, c1) = (chart.coords(st, &start)?, chart.coords(st, &end)?);
        let n = opts.default_nodes;
        coords = (1..n)
            .map(|k| {
                let s = k as f64 / n as f64;
                [c0[0] + s * (c1[0] - c0[0]), c0[1] + s * (c1[1] - c0[1])]
            })
            .collect();
    }
    let problem = PathCost {
        st,
        time,
        chart,
        a,
        start,
        end,
        fd_step: opts.fd_step,
    };
    let mut x: Vec<f64> = coords.iter().flat_map(|c| [c[0], c[1]]).collect();
    let mut iterations = 0;
    for round in 0..opts.rounds.max(1) {
        if round > 0 {
            x = resample(&problem, &x).unwrap_or(x);
        }
        if x.is_empty() {
            break;
        }
        let start_cost = problem.cost(&x).map_err(MetricError::optimizer)?;
        if start_cost >= INFEASIBLE {
            return Err(MetricError::Chart("initial path leaves the domain".into()));
        }
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), 8)
            .with_tolerance_grad(opts.grad_tol)
            .map_err(MetricError::optimizer)?
            .with_tolerance_cost(opts.cost_tol * start_cost)
            .map_err(MetricError::optimizer)?;
        let run = Executor::new(
            PathCost {
                st,
                time,
                chart,
                a,
                start,
                end,
                fd_step: opts.fd_step,
            },
            solver,
        )
        .configure(|s| s.param(x.clone()).max_iters(budget))
        .run();
        if let Ok(r) = run {
            iterations += r.state.iter;
            if let Some(best) = r.state.best_param {
                if r.state.best_cost <= start_cost {
                    x = best;
                }
            }
        }
    }
    let points = problem
        .nodes(&x)
        .ok_or_else(|| MetricError::Chart("optimized path leaves the domain".into()))?;
    Ok(GenericPath {
        length: PathCost::total(&points),
        points,
        iterations,
    })
}

/// Redistributes the interior nodes evenly by chord length along the path.
fn resample(problem: &PathCost, x: &[f64]) -> Option<Vec<f64>> {
    let pts = problem.nodes(x)?;
    let mut coords: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    coords.push(problem.chart.coords(problem.st, &problem.start).ok()?);
    coords.extend(x.chunks(2).map(|c| [c[0], c[1]]));
    coords.push(problem.chart.coords(problem.st, &problem.end).ok()?);
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + chord(&w[0], &w[1]));
    }
    let total = *cum.last().unwrap();
    if total <= 0.0 {
        return None;
    }
    let n = pts.len() - 1;
    let mut out = Vec::with_capacity(x.len());
    let mut j = 0;
    for k in 1..n {
        let target = total * k as f64 / n as f64;
        while cum[j + 1] < target {
            j += 1;
        }
        let span = cum[j + 1] - cum[j];
        let s = if span > 0.0 { (target - cum[j]) / span } else { 0.0 };
        out.extend((0..2).map(|d| coords[j][d] + s * (coords[j + 1][d] - coords[j][d])));
    }
    Some(out)
}
