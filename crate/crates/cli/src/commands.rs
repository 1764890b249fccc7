//! The five subcommands. Each writes its report files into the output
//! directory and returns an error carrying the exit status on failure.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use ppwave::geometry::{chart_to_ambient, Christoffels, TccReport, U, V};
use ppwave::identities::{compact_flux_check, verify_all, IdentityReport};
use ppwave::solver::{newton_solve, GridLayout, IterationRecord, SolveStatus};
use ppwave::Error;

use crate::config::Run;
use crate::error::CliError;
use crate::oracle::{levi_civita, ricci_by_contraction};
use crate::report::{write_csv, write_json, GridHeader};

fn chart_names(run: &Run) -> Vec<&str> {
    run.metric.names().iter().map(String::as_str).filter(|n| *n != "v").collect()
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Structurally non-zero Christoffel symbols `(σ, μ, ν)` with `μ ≤ ν`:
/// `Γ^v_uu`, `Γ^v_{u x_i}` and `Γ^{x_i}_uu`.
fn christoffel_components(dim: usize) -> Vec<(usize, usize, usize)> {
    let mut out = vec![(V, U, U)];
    out.extend((2..dim).map(|i| (V, U, i)));
    out.extend((2..dim).map(|i| (i, U, U)));
    out
}

fn max_christoffel_delta(a: &Christoffels, b: &Christoffels) -> f64 {
    let d = a.dim();
    let mut m = 0.0f64;
    for s in 0..d {
        for mu in 0..d {
            for nu in 0..d {
                m = m.max((a.get(s, mu, nu) - b.get(s, mu, nu)).abs());
            }
        }
    }
    m
}

#[derive(Serialize)]
struct CurvaturePoint {
    chart_point: Vec<f64>,
    potential: f64,
    christoffels: Vec<f64>,
    ricci_uu: f64,
    christoffel_oracle_delta: f64,
    ricci_oracle_delta: f64,
}

#[derive(Serialize)]
struct CurvatureResult {
    samples: usize,
    /// Labels `sigma_mu,nu` of the entries in each point's `christoffels`.
    christoffel_components: Vec<String>,
    max_abs_christoffel: f64,
    max_abs_ricci_uu: f64,
    max_christoffel_oracle_delta: f64,
    max_ricci_oracle_delta: f64,
    points: Vec<CurvaturePoint>,
}

/// Closed-form Christoffels and `Ric_uu` on the sample grid (at `v = 0`),
/// with deltas against finite-difference oracles.
pub fn curvature(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let metric = &run.metric;
    let h = run.resolved.grid.h;
    let components = christoffel_components(metric.dim());
    let names = metric.names();
    let nodes = run.domain.nodes(&run.resolved.grid.nodes);
    let points = nodes
        .par_iter()
        .map(|q| {
            let p = metric.point(&chart_to_ambient(q, 0.0));
            let local = metric.local(&p)?;
            let gamma = local.christoffels();
            let ricci = local.ricci();
            let oracle_gamma = levi_civita(metric, &p, h)?;
            let oracle_ricci = ricci_by_contraction(metric, &p, h)?;
            let d = metric.dim();
            let ricci_delta = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .fold(0.0f64, |m, (i, j)| m.max((ricci.get(i, j) - oracle_ricci.get(i, j)).abs()));
            Ok(CurvaturePoint {
                chart_point: q.clone(),
                potential: local.h,
                christoffels: components.iter().map(|&(s, mu, nu)| gamma.get(s, mu, nu)).collect(),
                ricci_uu: local.ricci_uu(),
                christoffel_oracle_delta: max_christoffel_delta(&gamma, &oracle_gamma),
                ricci_oracle_delta: ricci_delta,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let result = CurvatureResult {
        samples: points.len(),
        christoffel_components: components
            .iter()
            .map(|&(s, mu, nu)| format!("{}_{},{}", names[s], names[mu], names[nu]))
            .collect(),
        max_abs_christoffel: max_abs(points.iter().flat_map(|p| p.christoffels.iter().copied())),
        max_abs_ricci_uu: max_abs(points.iter().map(|p| p.ricci_uu)),
        max_christoffel_oracle_delta: max_abs(points.iter().map(|p| p.christoffel_oracle_delta)),
        max_ricci_oracle_delta: max_abs(points.iter().map(|p| p.ricci_oracle_delta)),
        points,
    };
    Ok(vec![write_json(&run.out_dir, "curvature.json", "curvature", &run.resolved, result)?])
}

/// Timelike convergence condition on the sample grid.
pub fn tcc(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let report: TccReport = run.metric.tcc_report_grid(&run.domain, &run.resolved.grid.nodes)?;
    Ok(vec![write_json(&run.out_dir, "tcc.json", "tcc", &run.resolved, report)?])
}

#[derive(Serialize)]
struct AnalyzeSummary {
    points: usize,
    min_margin: f64,
    max_abs_mean_curvature: f64,
    max_trace_a2: f64,
    min_eta: f64,
    max_self_adjointness_residual: f64,
    /// `min (K − Ric̄(N,N))`, two-dimensional surfaces only.
    min_k_minus_ricci: Option<f64>,
}

/// Per-node extrinsic geometry dump (CSV) plus a JSON summary.
pub fn analyze(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let surface = run.surface()?;
    let nodes = run.domain.nodes(&run.resolved.grid.nodes);
    let geometry = nodes
        .par_iter()
        .map(|q| surface.point_geometry(q))
        .collect::<Result<Vec<_>, Error>>()?;

    let names = chart_names(run);
    let two_d = names.len() == 2;
    let mut columns: Vec<String> = names.iter().map(|n| n.to_string()).collect();
    columns.extend(
        ["v", "margin", "eta", "trace_a", "mean_curvature", "trace_a2", "ricci_nn"]
            .iter()
            .map(|s| s.to_string()),
    );
    if two_d {
        columns.push("gauss_k".into());
    }
    columns.push("self_adjointness".into());

    let rows: Vec<Vec<f64>> = geometry
        .iter()
        .map(|pg| {
            let mut row = pg.chart_point.clone();
            row.extend([pg.point.coords[V], pg.margin, pg.eta, pg.trace_a, pg.mean_curvature, pg.trace_a2, pg.ricci_nn]);
            if let Some(k) = pg.gauss_k {
                row.push(k);
            }
            row.push(pg.self_adjointness_residual());
            row
        })
        .collect();
    let header = GridHeader {
        names: &names,
        nodes: &run.resolved.grid.nodes,
        ranges: &run.resolved.grid.ranges,
    };
    let csv = write_csv(&run.out_dir, "analyze.csv", &header, &columns, &rows)?;

    let summary = AnalyzeSummary {
        points: geometry.len(),
        min_margin: geometry.iter().map(|g| g.margin).fold(f64::INFINITY, f64::min),
        max_abs_mean_curvature: max_abs(geometry.iter().map(|g| g.mean_curvature)),
        max_trace_a2: geometry.iter().map(|g| g.trace_a2).fold(0.0, f64::max),
        min_eta: geometry.iter().map(|g| g.eta).fold(f64::INFINITY, f64::min),
        max_self_adjointness_residual: max_abs(geometry.iter().map(|g| g.self_adjointness_residual())),
        min_k_minus_ricci: two_d.then(|| {
            geometry
                .iter()
                .filter_map(|g| g.gauss_k.map(|k| k - g.ricci_nn))
                .fold(f64::INFINITY, f64::min)
        }),
    };
    let json = write_json(&run.out_dir, "analyze.json", "analyze", &run.resolved, summary)?;
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct VerifyResult {
    all_pass: bool,
    reports: Vec<IdentityReport>,
}

/// Identity suite on the configured surface; the flux check is added when
/// every chart axis is periodic.
pub fn verify(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let surface = run.surface()?;
    let grid = run.identity_grid();
    let mut reports = verify_all(surface, &grid)?;
    let periods = run.metric.periods();
    let compact = periods[U].is_some() && periods[2..].iter().all(Option::is_some);
    if compact {
        reports.push(compact_flux_check(surface, &grid)?);
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.id.clone()).collect();
    let path = write_json(
        &run.out_dir,
        "verify.json",
        "verify",
        &run.resolved,
        VerifyResult {
            all_pass: failed.is_empty(),
            reports,
        },
    )?;
    if failed.is_empty() {
        Ok(vec![path])
    } else {
        Err(CliError::IdentityFailure(failed))
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    status: SolveStatus,
    layout: GridLayout,
    iterations: usize,
    final_residual: f64,
    max_mean_curvature_error: f64,
    min_margin: f64,
    multiplier: Option<f64>,
    history: &'a [IterationRecord],
}

/// Maximal/CMC graph solve: node values as CSV, status and history as
/// JSON.
pub fn solve(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let cfg = run.solver()?;
    let result = match newton_solve(cfg) {
        Ok(r) => r,
        Err(Error::LeftSpacelikeCone { i, j, margin }) => {
            let layout = cfg.layout()?;
            let [u, x] = layout.coords(i, j);
            return Err(CliError::Solver(format!(
                "initial guess is not spacelike at node ({i}, {j}), chart point (u, x) = ({u}, {x}): margin {margin}"
            )));
        }
        Err(e @ Error::InvalidConfig(_)) => return Err(CliError::Config(e.to_string())),
        Err(e) => return Err(CliError::Solver(e.to_string())),
    };

    let layout = result.layout;
    let names = chart_names(run);
    let columns: Vec<String> = vec![names[0].into(), names[1].into(), "f".into()];
    let rows: Vec<Vec<f64>> = result
        .values
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let (i, j) = layout.ij(k);
            let [u, x] = layout.coords(i, j);
            vec![u, x, f]
        })
        .collect();
    let ranges: Vec<[f64; 2]> = (0..2)
        .map(|k| [layout.lo[k], layout.lo[k] + layout.spacing[k] * (layout.nodes[k] - 1) as f64])
        .collect();
    let header = GridHeader {
        names: &names,
        nodes: &layout.nodes,
        ranges: &ranges,
    };
    let csv = write_csv(&run.out_dir, "solve.csv", &header, &columns, &rows)?;
    let summary = SolveSummary {
        status: result.status,
        layout,
        iterations: result.iterations,
        final_residual: result.final_residual,
        max_mean_curvature_error: result.max_mean_curvature_error,
        min_margin: result.min_margin,
        multiplier: result.multiplier,
        history: &result.history,
    };
    let json = write_json(&run.out_dir, "solve.json", "solve", &run.resolved, summary)?;
    if result.converged() {
        Ok(vec![csv, json])
    } else {
        Err(CliError::Solver(format!(
            "did not converge: {} after {} iterations, residual {:e}",
            result.status.as_str(),
            result.iterations,
            result.final_residual
        )))
    }
}
