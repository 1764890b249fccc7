//! Damped Newton solver for maximal and constant-mean-curvature graphs
//! `v = f(u, x)` in a 3-dimensional Brinkmann spacetime.
//!
//! The unknowns are node values of `f` on a tensor grid. Graph derivatives
//! at a node come from the biquadratic interpolant of its 3×3 stencil, and
//! the residual is `R = trace A + n 𝓗₀`, which vanishes exactly where
//! `𝓗 = 𝓗₀`. Axes that are periodic in the metric wrap around; the other
//! axes carry Dirichlet data on their end nodes.
//!
//! On a fully periodic torus `f ↦ f + const` is a symmetry. One node is
//! pinned and a scalar multiplier `c` is appended, so Newton works on
//! `R(f) + c = 0`. If that system converges with `c ≠ 0`, then `R = 0` has
//! no discrete solution and the outcome is [`SolveStatus::Stalled`].

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{chart_to_ambient, AmbientPoint, ChartBox, MetricSpec};
use crate::hypersurface::{ambient_index, geometry_from_jet, GraphChart, SurfaceJet};
use crate::identities::GridSpec;

/// Surface dimension for the `m = 1` solver.
const N: f64 = 2.0;

#[derive(Debug, Clone)]
pub enum Boundary {
    /// Values of `f` on the end nodes of non-periodic axes.
    Dirichlet(Expr),
    /// Fully periodic torus; both chart axes must be periodic in the metric.
    Periodic,
}

#[derive(Debug, Clone)]
pub enum InitialGuess {
    Expr(Expr),
    /// Row-major node values, e.g. a previous solution.
    Values(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub metric: MetricSpec,
    pub domain: ChartBox,
    /// Nodes along `u` and `x`.
    pub nodes: [usize; 2],
    pub boundary: Boundary,
    /// Target mean curvature `𝓗₀`.
    pub target: f64,
    /// Per-node target overriding `target` (row-major).
    pub target_field: Option<Vec<f64>>,
    pub initial: InitialGuess,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub backtrack: f64,
    pub min_step: f64,
    pub armijo: f64,
    /// Relative forward-difference step for Jacobian columns.
    pub fd_step: f64,
}

impl SolveConfig {
    pub fn new(metric: MetricSpec, domain: ChartBox, nodes: [usize; 2], boundary: Boundary, initial: InitialGuess) -> Self {
        Self {
            metric,
            domain,
            nodes,
            boundary,
            target: 0.0,
            target_field: None,
            initial,
            newton_tol: 1e-10,
            max_iter: 50,
            backtrack: 0.5,
            min_step: 2f64.powi(-20),
            armijo: 1e-4,
            fd_step: 1e-7,
        }
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = target;
        self
    }

    pub fn layout(&self) -> Result<GridLayout> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.metric.m() != 1 {
            return bad(format!("solver needs m = 1, got m = {}", self.metric.m()));
        }
        if self.domain.dim() != 2 {
            return bad("domain must be 2-dimensional".into());
        }
        if self.nodes.iter().any(|&n| n < 5) {
            return bad(format!("grid needs at least 5 nodes per axis, got {:?}", self.nodes));
        }
        let mut layout = GridLayout {
            nodes: self.nodes,
            lo: [self.domain.lo[0], self.domain.lo[1]],
            spacing: [0.0; 2],
            periodic: [false; 2],
        };
        for k in 0..2 {
            let extent = self.domain.hi[k] - self.domain.lo[k];
            if !(extent > 0.0 && extent.is_finite()) {
                return bad(format!("empty domain along axis {k}"));
            }
            match self.metric.periods()[ambient_index(k)] {
                Some(period) => {
                    if (extent - period).abs() > 1e-9 * period {
                        return bad(format!("periodic axis {k} spans {extent}, period is {period}"));
                    }
                    layout.periodic[k] = true;
                    layout.spacing[k] = period / self.nodes[k] as f64;
                }
                None => layout.spacing[k] = extent / (self.nodes[k] - 1) as f64,
            }
        }
        if matches!(self.boundary, Boundary::Periodic) && !layout.fully_periodic() {
            return bad("periodic boundary needs both u and x periodic in the metric".into());
        }
        let total = layout.len();
        if let Some(field) = &self.target_field {
            if field.len() != total {
                return bad(format!("target field has {} values, grid has {total}", field.len()));
            }
        }
        if let InitialGuess::Values(v) = &self.initial {
            if v.len() != total {
                return bad(format!("initial guess has {} values, grid has {total}", v.len()));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.min_step > 0.0) || !(self.fd_step > 0.0) {
            return bad("damping parameters out of range".into());
        }
        Ok(layout)
    }
}

/// Node geometry of the solver grid. Nodes are row-major (`x` fastest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridLayout {
    pub nodes: [usize; 2],
    pub lo: [f64; 2],
    pub spacing: [f64; 2],
    pub periodic: [bool; 2],
}

impl GridLayout {
    pub fn len(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fully_periodic(&self) -> bool {
        self.periodic[0] && self.periodic[1]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nodes[1] + j
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx / self.nodes[1], idx % self.nodes[1])
    }

    pub fn coords(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.lo[0] + i as f64 * self.spacing[0],
            self.lo[1] + j as f64 * self.spacing[1],
        ]
    }

    /// End node of a non-periodic axis.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        let end = |k: usize, a: usize| !self.periodic[k] && (a == 0 || a == self.nodes[k] - 1);
        end(0, i) || end(1, j)
    }

    /// Index shifted by `d` along axis `k`, wrapping on periodic axes.
    fn shift(&self, k: usize, a: usize, d: isize) -> Option<usize> {
        let n = self.nodes[k] as isize;
        let b = a as isize + d;
        if self.periodic[k] {
            Some(b.rem_euclid(n) as usize)
        } else {
            (0..n).contains(&b).then_some(b as usize)
        }
    }

    /// Region where stencil jets exist: one spacing inside every
    /// non-periodic end, the whole period otherwise.
    pub fn jet_domain(&self) -> ChartBox {
        let mut lo = vec![0.0; 2];
        let mut hi = vec![0.0; 2];
        for k in 0..2 {
            if self.periodic[k] {
                lo[k] = self.lo[k];
                hi[k] = self.lo[k] + self.spacing[k] * self.nodes[k] as f64;
            } else {
                lo[k] = self.lo[k] + self.spacing[k];
                hi[k] = self.lo[k] + self.spacing[k] * (self.nodes[k] - 2) as f64;
            }
        }
        ChartBox::new(lo, hi)
    }

    /// Nearest node to a chart point, if the point sits on the grid.
    pub fn locate(&self, q: &[f64]) -> Option<(usize, usize)> {
        let mut out = [0usize; 2];
        for k in 0..2 {
            let t = (q[k] - self.lo[k]) / self.spacing[k];
            let r = t.round();
            if (t - r).abs() > 1e-6 {
                return None;
            }
            out[k] = self.shift(k, 0, r as isize)?;
        }
        Some((out[0], out[1]))
    }
}

/// Jet of `F = v − f` at node `(i, j)` from the biquadratic interpolant of
/// the 3×3 stencil, with `value(idx)` supplying node values. `None` on
/// boundary nodes.
fn stencil_jet(metric: &MetricSpec, layout: &GridLayout, value: impl Fn(usize) -> f64, i: usize, j: usize) -> Option<SurfaceJet> {
    let at = |di: isize, dj: isize| -> Option<f64> {
        Some(value(layout.index(layout.shift(0, i, di)?, layout.shift(1, j, dj)?)))
    };
    let [hu, hx] = layout.spacing;
    let c = at(0, 0)?;
    let (up, um, xp, xm) = (at(1, 0)?, at(-1, 0)?, at(0, 1)?, at(0, -1)?);
    let f_ux = (at(1, 1)? - at(1, -1)? - at(-1, 1)? + at(-1, -1)?) / (4.0 * hu * hx);
    let grad = [(up - um) / (2.0 * hu), (xp - xm) / (2.0 * hx)];
    let hess = vec![
        vec![(up - 2.0 * c + um) / (hu * hu), f_ux],
        vec![f_ux, (xp - 2.0 * c + xm) / (hx * hx)],
    ];
    let point: AmbientPoint = metric.point(&chart_to_ambient(&layout.coords(i, j), c));
    Some(SurfaceJet::from_graph(point, &grad, &hess))
}

/// Residual `trace A + n𝓗₀` and spacelike margin at an interior node.
fn node_residual(
    metric: &MetricSpec,
    layout: &GridLayout,
    value: impl Fn(usize) -> f64,
    target: f64,
    i: usize,
    j: usize,
) -> Result<(f64, f64)> {
    let jet = stencil_jet(metric, layout, value, i, j).expect("residual needs an interior node");
    match geometry_from_jet(metric, &layout.coords(i, j), &jet) {
        Ok(pg) => Ok((pg.trace_a + N * target, pg.margin)),
        Err(Error::NotSpacelike { q, .. }) => Err(Error::LeftSpacelikeCone { i, j, margin: -q }),
        Err(e) => Err(e),
    }
}

/// A grid function `v = f(u, x)` viewed as a surface chart. Jets exist only
/// at grid nodes, so finite-difference steps must be multiples of the
/// spacing.
#[derive(Debug, Clone)]
pub struct GridSurface {
    metric: MetricSpec,
    layout: GridLayout,
    values: Vec<f64>,
    domain: ChartBox,
}

impl GridSurface {
    pub fn new(metric: MetricSpec, layout: GridLayout, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), layout.len());
        let domain = layout.jet_domain();
        Self {
            metric,
            layout,
            values,
            domain,
        }
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Identity-check grid on the nodes of this surface: step equal to the
    /// spacing, no refinement. Needs equal spacing on both axes.
    pub fn identity_grid(&self) -> Result<GridSpec> {
        let [hu, hx] = self.layout.spacing;
        if (hu - hx).abs() > 1e-12 * hu.max(hx) {
            return Err(Error::InvalidSurface(format!("identity checks need equal spacing, got {hu} and {hx}")));
        }
        let nodes = (0..2)
            .map(|k| self.layout.nodes[k] - if self.layout.periodic[k] { 0 } else { 2 })
            .collect();
        Ok(GridSpec {
            domain: self.domain.clone(),
            nodes,
            h: hu,
            refine: false,
        })
    }

    pub fn node_jet(&self, i: usize, j: usize) -> Option<SurfaceJet> {
        stencil_jet(&self.metric, &self.layout, |k| self.values[k], i, j)
    }
}

impl GraphChart for GridSurface {
    fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    fn domain(&self) -> &ChartBox {
        &self.domain
    }

    fn jet(&self, q: &[f64]) -> Result<SurfaceJet> {
        let off_grid = || Error::InvalidSurface(format!("chart point {q:?} is not a node of the grid"));
        let (i, j) = self.layout.locate(q).ok_or_else(off_grid)?;
        self.node_jet(i, j).ok_or(Error::BoundaryProximity {
            point: q.to_vec(),
            margin: self.layout.spacing[0].min(self.layout.spacing[1]),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Stalled,
    LeftSpacelikeCone,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Stalled => "stalled",
            SolveStatus::LeftSpacelikeCone => "left_spacelike_cone",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `sup |R|` over residual nodes.
    pub residual: f64,
    /// `sup |R + c|`; equals `residual` without a gauge multiplier.
    pub augmented_residual: f64,
    /// Damping factor of the step that produced this iterate.
    pub step: Option<f64>,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub layout: GridLayout,
    /// Row-major node values of `f`.
    pub values: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub iterations: usize,
    pub final_residual: f64,
    /// `max |𝓗 − 𝓗₀|`.
    pub max_mean_curvature_error: f64,
    pub min_margin: f64,
    /// Gauge multiplier on a fully periodic torus.
    pub multiplier: Option<f64>,
    #[serde(skip)]
    pub metric: MetricSpec,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn surface(&self) -> GridSurface {
        GridSurface::new(self.metric.clone(), self.layout, self.values.clone())
    }
}

/// Per-node residual on the full grid; Dirichlet nodes hold `0`.
pub fn residual(cfg: &SolveConfig, values: &[f64]) -> Result<Vec<f64>> {
    let problem = Problem::new(cfg)?;
    if values.len() != problem.layout.len() {
        return Err(Error::InvalidConfig(format!(
            "grid has {} nodes, got {} values",
            problem.layout.len(),
            values.len()
        )));
    }
    let (r, _) = problem.evaluate(values)?;
    let mut out = vec![0.0; values.len()];
    for (e, &node) in problem.equations.iter().enumerate() {
        out[node] = r[e];
    }
    Ok(out)
}

struct Problem<'a> {
    cfg: &'a SolveConfig,
    layout: GridLayout,
    /// Nodes carrying a residual equation, in node order.
    equations: Vec<usize>,
    equation_of: Vec<Option<usize>>,
    /// Nodes whose value is unknown, in node order.
    unknowns: Vec<usize>,
    gauge: bool,
    targets: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(cfg: &'a SolveConfig) -> Result<Self> {
        let layout = cfg.layout()?;
        let equations: Vec<usize> = (0..layout.len())
            .filter(|&k| {
                let (i, j) = layout.ij(k);
                !layout.is_boundary(i, j)
            })
            .collect();
        let mut equation_of = vec![None; layout.len()];
        for (e, &k) in equations.iter().enumerate() {
            equation_of[k] = Some(e);
        }
        let gauge = layout.fully_periodic();
        // pin the first node against v-translation
        let unknowns = equations.iter().copied().skip(usize::from(gauge)).collect();
        let targets = match &cfg.target_field {
            Some(field) => field.clone(),
            None => vec![cfg.target; layout.len()],
        };
        Ok(Self {
            cfg,
            layout,
            equations,
            equation_of,
            unknowns,
            gauge,
            targets,
        })
    }

    fn size(&self) -> usize {
        self.unknowns.len() + usize::from(self.gauge)
    }

    fn initial_values(&self) -> Result<Vec<f64>> {
        let metric = &self.cfg.metric;
        let eval_at = |e: &Expr, k: usize| -> Result<f64> {
            let (i, j) = self.layout.ij(k);
            let p = metric.point(&chart_to_ambient(&self.layout.coords(i, j), 0.0));
            Ok(e.eval(&metric.env(&p))?)
        };
        let mut values = match &self.cfg.initial {
            InitialGuess::Values(v) => v.clone(),
            InitialGuess::Expr(e) => (0..self.layout.len()).map(|k| eval_at(e, k)).collect::<Result<_>>()?,
        };
        if let Boundary::Dirichlet(g) = &self.cfg.boundary {
            for (k, value) in values.iter_mut().enumerate() {
                if self.equation_of[k].is_none() {
                    *value = eval_at(g, k)?;
                }
            }
        }
        Ok(values)
    }

    /// Residuals over equation nodes and the smallest spacelike margin.
    fn evaluate(&self, values: &[f64]) -> Result<(Vec<f64>, f64)> {
        let pairs = self
            .equations
            .par_iter()
            .map(|&k| {
                let (i, j) = self.layout.ij(k);
                node_residual(&self.cfg.metric, &self.layout, |n| values[n], self.targets[k], i, j)
            })
            .collect::<Result<Vec<_>>>()?;
        let min_margin = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        Ok((pairs.into_iter().map(|p| p.0).collect(), min_margin))
    }

    /// Forward-difference Jacobian of the augmented system. Column `c` of
    /// an unknown node touches only the equations of its 3×3 neighbours.
    fn jacobian(&self, values: &[f64], r: &[f64]) -> Result<SparseColMat<usize, f64>> {
        let columns = self
            .unknowns
            .par_iter()
            .enumerate()
            .map(|(col, &p)| {
                let (pi, pj) = self.layout.ij(p);
                let mut rows = Vec::with_capacity(9);
                for di in -1..=1 {
                    for dj in -1..=1 {
                        let (Some(i), Some(j)) = (self.layout.shift(0, pi, di), self.layout.shift(1, pj, dj)) else {
                            continue;
                        };
                        let k = self.layout.index(i, j);
                        if let Some(e) = self.equation_of[k] {
                            if !rows.iter().any(|&(row, _, _)| row == e) {
                                rows.push((e, i, j));
                            }
                        }
                    }
                }
                let delta = self.cfg.fd_step * values[p].abs().max(1.0);
                let column = |d: f64| -> Result<Vec<Triplet<usize, usize, f64>>> {
                    let value = |n: usize| if n == p { values[n] + d } else { values[n] };
                    rows.iter()
                        .map(|&(e, i, j)| {
                            let k = self.layout.index(i, j);
                            let (rp, _) = node_residual(&self.cfg.metric, &self.layout, value, self.targets[k], i, j)?;
                            Ok(Triplet::new(e, col, (rp - r[e]) / d))
                        })
                        .collect()
                };
                column(delta).or_else(|_| column(-delta))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut triplets: Vec<Triplet<usize, usize, f64>> = columns.into_iter().flatten().collect();
        if self.gauge {
            let col = self.unknowns.len();
            triplets.extend((0..self.equations.len()).map(|e| Triplet::new(e, col, 1.0)));
        }
        let n = self.size();
        SparseColMat::try_new_from_triplets(n, n, &triplets).map_err(|e| Error::LinearSolve(format!("{e:?}")))
    }

    fn newton_step(&self, values: &[f64], r_aug: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let jac = self.jacobian(values, r)?;
        let lu = jac.sp_lu().map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let rhs = Col::from_fn(r_aug.len(), |e| -r_aug[e]);
        let step = lu.solve(&rhs);
        let out: Vec<f64> = (0..step.nrows()).map(|e| step[e]).collect();
        if out.iter().any(|s| !s.is_finite()) {
            return Err(Error::LinearSolve("singular Jacobian".into()));
        }
        Ok(out)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton iteration on `R(f) = 0` (plus the gauge multiplier on a
/// torus). Fails only on configuration errors, a non-spacelike initial
/// guess or a failed factorization; non-convergence is a [`SolveStatus`].
pub fn newton_solve(cfg: &SolveConfig) -> Result<SolveResult> {
    let problem = Problem::new(cfg)?;
    let mut values = problem.initial_values()?;
    let (mut r, mut min_margin) = problem.evaluate(&values)?;
    let mut c = 0.0;
    let augmented = |r: &[f64], c: f64| r.iter().map(|x| x + c).collect::<Vec<_>>();

    let mut history = Vec::new();
    let mut last_step = None;
    let status = loop {
        let r_aug = augmented(&r, c);
        history.push(IterationRecord {
            iteration: history.len(),
            residual: sup(&r),
            augmented_residual: sup(&r_aug),
            step: last_step,
            min_margin,
        });
        if sup(&r) <= cfg.newton_tol {
            break SolveStatus::Converged;
        }
        // converged onto a nonzero multiplier: no solution of R = 0
        if problem.gauge && sup(&r_aug) <= cfg.newton_tol {
            break SolveStatus::Stalled;
        }
        if history.len() > cfg.max_iter {
            break SolveStatus::Stalled;
        }

        let step = problem.newton_step(&values, &r_aug, &r)?;
        let base = norm2(&r_aug);
        let mut t = 1.0;
        let mut lost_cone = false;
        let accepted = loop {
            let mut trial = values.clone();
            for (s, &node) in step.iter().zip(&problem.unknowns) {
                trial[node] += t * s;
            }
            let c_trial = if problem.gauge { c + t * step[problem.unknowns.len()] } else { 0.0 };
            match problem.evaluate(&trial) {
                Ok((rt, margin)) => {
                    if norm2(&augmented(&rt, c_trial)) <= (1.0 - cfg.armijo * t) * base {
                        break Some((trial, c_trial, rt, margin));
                    }
                }
                Err(Error::LeftSpacelikeCone { .. }) => lost_cone = true,
                Err(e) => return Err(e),
            }
            t *= cfg.backtrack;
            if t < cfg.min_step {
                break None;
            }
        };
        match accepted {
            Some((trial, c_trial, rt, margin)) => {
                values = trial;
                c = c_trial;
                r = rt;
                min_margin = margin;
                last_step = Some(t);
            }
            None if lost_cone => break SolveStatus::LeftSpacelikeCone,
            None => break SolveStatus::Stalled,
        }
    };

    let final_residual = sup(&r);
    Ok(SolveResult {
        status,
        layout: problem.layout,
        values,
        iterations: history.len() - 1,
        history,
        final_residual,
        max_mean_curvature_error: final_residual / N,
        min_margin,
        multiplier: problem.gauge.then_some(c),
        metric: cfg.metric.clone(),
    })
}

/// One stage of a continuation schedule.
#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub metric: MetricSpec,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    /// Results up to and including the first failed stage.
    pub results: Vec<SolveResult>,
    /// [`Error::Continuation`] for the first stage that errored or did not
    /// converge.
    pub failure: Option<Error>,
}

/// Solves each stage in turn on the grid of `cfg`, warm-starting from the
/// previous stage's solution.
pub fn continuation(cfg: &SolveConfig, schedule: &[ContinuationStep]) -> ContinuationOutcome {
    let mut results: Vec<SolveResult> = Vec::new();
    for (index, stage) in schedule.iter().enumerate() {
        let mut stage_cfg = cfg.clone();
        stage_cfg.metric = stage.metric.clone();
        stage_cfg.target = stage.target;
        if let Some(prev) = results.last() {
            stage_cfg.initial = InitialGuess::Values(prev.values.clone());
        }
        let fail = |source: Error| Error::Continuation {
            index,
            source: Box::new(source),
        };
        match newton_solve(&stage_cfg) {
            Ok(result) => {
                let failure = (!result.converged()).then(|| {
                    fail(Error::NotConverged {
                        status: result.status.as_str().into(),
                        residual: result.final_residual,
                    })
                });
                results.push(result);
                if failure.is_some() {
                    return ContinuationOutcome { results, failure };
                }
            }
            Err(e) => {
                return ContinuationOutcome {
                    results,
                    failure: Some(fail(e)),
                }
            }
        }
    }
    ContinuationOutcome { results, failure: None }
}
