//! Finite-difference verification of the differential identities satisfied
//! by the support function `η = ⟨N, ∂_v⟩` of a spacelike hypersurface.
//!
//! Every check compares an intrinsic finite-difference quantity (gradient,
//! Laplacian or Gaussian curvature of the induced metric) with the exact
//! extrinsic right-hand side, on a grid of chart points and at two steps
//! `h` and `h/2`, so that the observed convergence order can be reported.
//!
//! | id            | identity                                           |
//! |---------------|----------------------------------------------------|
//! | `grad_eta`    | `∇η = −A ξᵀ`                                        |
//! | `lap_eta`     | `Δη = n⟨∇𝓗, ξ⟩ + η (Ric̄(N,N) + trace A²)`          |
//! | `gradnorm_eta`| `|∇η|² = ½ trace(A²) η²` (n = 2, maximal)           |
//! | `gauss`       | `K = Ric̄(N,N) + ½ trace A²` (n = 2, maximal)        |
//! | `lap_inv_eta` | `Δ(1/η) = −(1/η) Ric̄(N,N)` (n = 2, maximal)         |
//! | `flux`        | `∫ Δη dA = 0` on a compact (fully periodic) chart   |

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ChartBox, U};
use crate::hypersurface::{
    gauss_intrinsic, induced_metric, intrinsic_gradient, intrinsic_gradient_norm_sq,
    intrinsic_laplacian, point_geometry, GraphChart, PointGeometry,
};

/// Residuals below this are treated as exact; no order is estimated.
pub const EXACTNESS_FLOOR: f64 = 1e-13;

/// Points where an identity is evaluated, and the finite-difference step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub domain: ChartBox,
    /// Nodes per chart axis.
    pub nodes: Vec<usize>,
    /// Finite-difference step.
    pub h: f64,
    /// Also evaluate at `h/2` and estimate the convergence order. Charts
    /// defined only on grid nodes cannot refine.
    pub refine: bool,
}

impl GridSpec {
    pub fn new(domain: ChartBox, nodes: Vec<usize>, h: f64) -> Self {
        Self {
            domain,
            nodes,
            h,
            refine: true,
        }
    }

    /// Default step: one hundredth of the smallest chart extent.
    pub fn default_step(domain: &ChartBox) -> f64 {
        domain
            .lo
            .iter()
            .zip(&domain.hi)
            .map(|(lo, hi)| hi - lo)
            .fold(f64::INFINITY, f64::min)
            * 1e-2
    }

    /// Evaluation points. Periodic axes use `N` nodes spaced one period
    /// over `N` starting at `lo`; other axes span `[lo, hi]` and drop nodes
    /// closer than `2h` to either end.
    pub fn points(&self, periods: &[Option<f64>]) -> Vec<Vec<f64>> {
        let reach = 2.0 * self.h;
        let axes: Vec<Vec<f64>> = (0..self.domain.dim())
            .map(|k| {
                let (lo, hi, n) = (self.domain.lo[k], self.domain.hi[k], self.nodes[k]);
                match periods[k] {
                    Some(period) => (0..n).map(|i| lo + period * i as f64 / n as f64).collect(),
                    None => (0..n)
                        .map(|i| {
                            if n == 1 {
                                0.5 * (lo + hi)
                            } else {
                                lo + (hi - lo) * i as f64 / (n - 1) as f64
                            }
                        })
                        .filter(|&c| c >= lo + reach * (1.0 - 1e-9) && c <= hi - reach * (1.0 - 1e-9))
                        .collect(),
                }
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&c| {
                        let mut p = prefix.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Volume of one periodic grid cell.
    fn cell_volume(&self, periods: &[Option<f64>]) -> f64 {
        periods
            .iter()
            .zip(&self.nodes)
            .map(|(p, &n)| p.unwrap_or(0.0) / n as f64)
            .product()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub id: String,
    pub identity: String,
    pub grid: GridSpec,
    pub points: Vec<Vec<f64>>,
    /// Per-point residuals at step `h`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub residual_h: f64,
    pub residual_h2: Option<f64>,
    /// `log₂(r_h / r_{h/2})`, only when `r_{h/2}` is above the exactness floor.
    pub order: Option<f64>,
    /// Largest magnitude of the identity's individual terms.
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Identity-specific side results.
    pub extra: BTreeMap<String, f64>,
}

/// `max(1e-8, 10 h² scale)`.
pub fn default_tolerance(h: f64, scale: f64) -> f64 {
    f64::max(1e-8, 10.0 * h * h * scale)
}

/// One identity evaluated at one point: residual and term magnitude.
struct Sample {
    residual: f64,
    scale: f64,
}

fn evaluate<C, F>(chart: &C, points: &[Vec<f64>], h: f64, eval: F) -> Result<Vec<Sample>>
where
    C: GraphChart + ?Sized,
    F: Fn(&C, &[f64], f64) -> Result<Sample> + Sync,
{
    points.par_iter().map(|q| eval(chart, q, h)).collect()
}

fn run<C, F>(chart: &C, grid: &GridSpec, id: &str, identity: &str, eval: F) -> Result<IdentityReport>
where
    C: GraphChart + ?Sized,
    F: Fn(&C, &[f64], f64) -> Result<Sample> + Sync,
{
    let points = grid.points(&chart.chart_periods());
    let coarse = evaluate(chart, &points, grid.h, &eval)?;
    let residuals: Vec<f64> = coarse.iter().map(|s| s.residual).collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let scale = coarse.iter().map(|s| s.scale).fold(0.0, f64::max);

    let (residual_h2, order) = if grid.refine {
        let fine = evaluate(chart, &points, 0.5 * grid.h, &eval)?;
        let r2 = fine.iter().map(|s| s.residual).fold(0.0, f64::max);
        let order = (r2 > EXACTNESS_FLOOR).then(|| (max_residual / r2).log2());
        (Some(r2), order)
    } else {
        (None, None)
    };
    let tolerance = default_tolerance(grid.h, scale);
    Ok(IdentityReport {
        id: id.into(),
        identity: identity.into(),
        grid: grid.clone(),
        points,
        residuals,
        max_residual,
        residual_h: max_residual,
        residual_h2,
        order,
        scale,
        tolerance,
        pass: max_residual <= tolerance,
        extra: BTreeMap::new(),
    })
}

fn eta_field<C: GraphChart + ?Sized>(chart: &C) -> impl FnMut(&[f64]) -> Result<f64> + '_ {
    move |q| Ok(point_geometry(chart, q)?.eta)
}

fn g_norm(g: &nalgebra::DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(g * v)).max(0.0).sqrt()
}

/// `∇η = −A ξᵀ`; residual `‖∇η + Aξᵀ‖_g`.
pub fn verify_gradient_eta<C: GraphChart + ?Sized>(chart: &C, grid: &GridSpec) -> Result<IdentityReport> {
    run(chart, grid, "grad_eta", "grad(eta) = -A xi^T", |chart, q, h| {
        let pg = point_geometry(chart, q)?;
        let grad = intrinsic_gradient(chart, eta_field(chart), q, h)?;
        let a_xi = pg.a_xi_t();
        let g = &pg.induced_metric;
        Ok(Sample {
            residual: g_norm(g, &(&grad + &a_xi)),
            scale: g_norm(g, &grad).max(g_norm(g, &a_xi)),
        })
    })
}

/// `Δη = n⟨∇𝓗, ξ⟩ + η(Ric̄(N,N) + trace A²)`. Also records the largest
/// violation of the reduction `Ric̄(ξᵀ, N) = η Ric̄(N, N)` under
/// `reduction_max`.
pub fn verify_laplacian_eta<C: GraphChart + ?Sized>(chart: &C, grid: &GridSpec) -> Result<IdentityReport> {
    let mut report = run(
        chart,
        grid,
        "lap_eta",
        "lap(eta) = n <grad H, xi> + eta (Ric(N,N) + tr A^2)",
        |chart, q, h| {
            let pg = point_geometry(chart, q)?;
            let n = chart.chart_dim() as f64;
            let lap = intrinsic_laplacian(chart, eta_field(chart), q, h)?;
            let grad_h = intrinsic_gradient(chart, |p| Ok(point_geometry(chart, p)?.mean_curvature), q, h)?;
            // ⟨w_i, ∂_v⟩ = g_{a(i) v}: only the u direction pairs with ξ.
            let mean_term = n * grad_h[U];
            let curvature_term = pg.eta * (pg.ricci_nn + pg.trace_a2);
            Ok(Sample {
                residual: (lap - mean_term - curvature_term).abs(),
                scale: lap.abs().max(mean_term.abs()).max(curvature_term.abs()),
            })
        },
    )?;
    let reduction = report
        .points
        .par_iter()
        .map(|q| {
            let pg = point_geometry(chart, q)?;
            ricci_reduction_residual(chart, &pg)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.extra.insert("reduction_max".into(), reduction);
    Ok(report)
}

/// `|Ric̄(ξᵀ, N) − η Ric̄(N, N)|`, exact (no finite differences).
pub fn ricci_reduction_residual<C: GraphChart + ?Sized>(chart: &C, pg: &PointGeometry) -> Result<f64> {
    let ric = chart.metric().ricci_at(&pg.point)?;
    Ok((ric.apply(&pg.xi_t, &pg.normal) - pg.eta * pg.ricci_nn).abs())
}

fn require_maximal<C: GraphChart + ?Sized>(chart: &C, grid: &GridSpec) -> Result<()> {
    if chart.chart_dim() != 2 {
        return Err(Error::DimensionMismatch(chart.chart_dim()));
    }
    let points = grid.points(&chart.chart_periods());
    let max_abs = points
        .par_iter()
        .map(|q| Ok(point_geometry(chart, q)?.mean_curvature.abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if max_abs >= 1e-8 {
        return Err(Error::NotMaximal { max_abs });
    }
    Ok(())
}

/// `|∇η|² = ½ trace(A²) η²` on maximal surfaces (`n = 2`).
pub fn verify_gradnorm_eta<C: GraphChart + ?Sized>(chart: &C, grid: &GridSpec) -> Result<IdentityReport> {
    require_maximal(chart, grid)?;
    run(chart, grid, "gradnorm_eta", "|grad eta|^2 = 1/2 tr(A^2) eta^2", |chart, q, h| {
        let pg = point_geometry(chart, q)?;
        let lhs = intrinsic_gradient_norm_sq(chart, eta_field(chart), q, h)?;
        let rhs = 0.5 * pg.trace_a2 * pg.eta * pg.eta;
        Ok(Sample {
            residual: (lhs - rhs).abs(),
            scale: lhs.abs().max(rhs.abs()),
        })
    })
}

/// `K = Ric̄(N,N) + ½ trace A²` with `K` from the Brioschi formula, on
/// maximal surfaces (`n = 2`). Side results: `min_k_minus_ricci` (the
/// inequality `K ≥ Ric̄(N,N)` with extrinsic `K`) and
/// `max_inequality_gap` (`|K − Ric̄(N,N) − ½ trace A²|` extrinsically).
pub fn verify_gauss_equation<C: GraphChart + ?Sized>(chart: &C, grid: &GridSpec) -> Result<IdentityReport> {
    require_maximal(chart, grid)?;
    let mut report = run(chart, grid, "gauss", "K = Ric(N,N) + 1/2 tr(A^2)", |chart, q, h| {
        let pg = point_geometry(chart, q)?;
        let k = gauss_intrinsic(chart, q, h)?;
        let rhs = pg.ricci_nn + 0.5 * pg.trace_a2;
        Ok(Sample {
            residual: (k - rhs).abs(),
            scale: k.abs().max(pg.ricci_nn.abs()).max(0.5 * pg.trace_a2),
        })
    })?;
    let (min_margin, max_gap) = report
        .points
        .par_iter()
        .map(|q| {
            let pg = point_geometry(chart, q)?;
            let k = pg.gauss_k.expect("two-dimensional surface");
            let margin = k - pg.ricci_nn;
            Ok((margin, (margin - 0.5 * pg.trace_a2).abs()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(m, g), (a, b)| (m.min(a), g.max(b)));
    report.extra.insert("min_k_minus_ricci".into(), min_margin);
    report.extra.insert("max_inequality_gap".into(), max_gap);
    if min_margin < -1e-12 {
        report.pass = false;
    }
    Ok(report)
}

/// `Δ(1/η) = −(1/η) Ric̄(N,N)` on maximal surfaces (`n = 2`).
pub fn verify_inv_eta<C: GraphChart + ?Sized>(chart: &C, grid: &GridSpec) -> Result<IdentityReport> {
    require_maximal(chart, grid)?;
    run(chart, grid, "lap_inv_eta", "lap(1/eta) = -(1/eta) Ric(N,N)", |chart, q, h| {
        let pg = point_geometry(chart, q)?;
        let lap = intrinsic_laplacian(chart, |p| Ok(1.0 / point_geometry(chart, p)?.eta), q, h)?;
        let rhs = -pg.ricci_nn / pg.eta;
        // Δ(1/η) = −Δη/η² + 2|∇η|²/η³; on a maximal surface these are
        // −(Ric̄(N,N) + trace A²)/η and trace A²/η, which cancel when Ric̄ = 0.
        let expanded = (pg.ricci_nn.abs() + pg.trace_a2) / pg.eta;
        Ok(Sample {
            residual: (lap - rhs).abs(),
            scale: lap.abs().max(rhs.abs()).max(expanded),
        })
    })
}

/// The maximal-surface suite: `grad_eta`, `lap_eta`, `gradnorm_eta`,
/// `gauss`, `lap_inv_eta`. Non-maximal or higher-dimensional surfaces get
/// only the first two.
pub fn verify_all<C: GraphChart + ?Sized>(chart: &C, grid: &GridSpec) -> Result<Vec<IdentityReport>> {
    let mut out = vec![verify_gradient_eta(chart, grid)?, verify_laplacian_eta(chart, grid)?];
    match require_maximal(chart, grid) {
        Ok(()) => {
            out.push(verify_gradnorm_eta(chart, grid)?);
            out.push(verify_gauss_equation(chart, grid)?);
            out.push(verify_inv_eta(chart, grid)?);
        }
        Err(Error::NotMaximal { .. } | Error::DimensionMismatch(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// `∫ Δη dA` over a fully periodic chart by the periodic Riemann sum.
///
/// The report's residual is `|∫ Δη dA|`. The divergence-form Laplacian
/// telescopes over a period, so this sum vanishes to roundoff. The same
/// integral taken over the exact-plus-`∇𝓗` right-hand side of the `Δη`
/// identity carries a genuine `O(h²)` error and is reported as
/// `rhs_integral` with `rhs_c_estimate = |∫|/h²`. Other side results:
/// `integral`, `c_estimate`, `min_laplacian` (finite-difference `Δη`),
/// `min_rhs` (exact right-hand side of the `Δη` identity), `max_trace_a2`,
/// `max_abs_mean_curvature` and `mean_curvature_spread`. Under the timelike
/// convergence condition with constant mean curvature the right-hand side
/// is non-negative, so `η` is subharmonic.
pub fn compact_flux_check<C: GraphChart + ?Sized>(chart: &C, grid: &GridSpec) -> Result<IdentityReport> {
    let periods = chart.chart_periods();
    for (k, p) in periods.iter().enumerate() {
        if p.is_none() {
            let name = if k == 0 { "u".to_string() } else { chart.metric().names()[k + 1].clone() };
            return Err(Error::ChartNotCompact(name));
        }
    }
    let points = grid.points(&periods);
    let h = grid.h;
    let n = chart.chart_dim() as f64;
    struct Node {
        weighted: f64,
        weighted_rhs: f64,
        lap: f64,
        rhs: f64,
        trace_a2: f64,
        mean: f64,
    }
    let nodes: Vec<Node> = points
        .par_iter()
        .map(|q| {
            let pg = point_geometry(chart, q)?;
            let lap = intrinsic_laplacian(chart, eta_field(chart), q, h)?;
            let grad_h = intrinsic_gradient(chart, |p| Ok(point_geometry(chart, p)?.mean_curvature), q, h)?;
            let sqrt_det = induced_metric(chart, q)?.determinant().sqrt();
            let rhs = n * grad_h[U] + pg.eta * (pg.ricci_nn + pg.trace_a2);
            Ok(Node {
                weighted: lap * sqrt_det,
                weighted_rhs: rhs * sqrt_det,
                lap,
                rhs,
                trace_a2: pg.trace_a2,
                mean: pg.mean_curvature,
            })
        })
        .collect::<Result<_>>()?;

    let cell = grid.cell_volume(&periods);
    // fixed node-major summation order
    let integral = nodes.iter().map(|n| n.weighted).sum::<f64>() * cell;
    let rhs_integral = nodes.iter().map(|n| n.weighted_rhs).sum::<f64>() * cell;
    let scale = nodes.iter().map(|n| n.weighted.abs()).fold(0.0, f64::max);
    let min_laplacian = nodes.iter().map(|n| n.lap).fold(f64::INFINITY, f64::min);
    let min_rhs = nodes.iter().map(|n| n.rhs).fold(f64::INFINITY, f64::min);
    let max_trace_a2 = nodes.iter().map(|n| n.trace_a2).fold(0.0, f64::max);
    let max_mean = nodes.iter().map(|n| n.mean.abs()).fold(0.0, f64::max);
    let mean_lo = nodes.iter().map(|n| n.mean).fold(f64::INFINITY, f64::min);
    let mean_hi = nodes.iter().map(|n| n.mean).fold(f64::NEG_INFINITY, f64::max);

    let tolerance = default_tolerance(h, scale);
    let mut extra = BTreeMap::new();
    extra.insert("integral".into(), integral);
    extra.insert("c_estimate".into(), integral.abs() / (h * h));
    extra.insert("rhs_integral".into(), rhs_integral);
    extra.insert("rhs_c_estimate".into(), rhs_integral.abs() / (h * h));
    extra.insert("min_laplacian".into(), min_laplacian);
    extra.insert("min_rhs".into(), min_rhs);
    extra.insert("max_trace_a2".into(), max_trace_a2);
    extra.insert("max_abs_mean_curvature".into(), max_mean);
    extra.insert("mean_curvature_spread".into(), mean_hi - mean_lo);
    Ok(IdentityReport {
        id: "flux".into(),
        identity: "integral of lap(eta) dA = 0".into(),
        grid: grid.clone(),
        residuals: nodes.iter().map(|n| n.lap).collect(),
        points,
        max_residual: integral.abs(),
        residual_h: integral.abs(),
        residual_h2: None,
        order: None,
        scale,
        tolerance,
        pass: integral.abs() <= tolerance,
        extra,
    })
}
