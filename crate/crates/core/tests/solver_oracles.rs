//! Solver behaviour against exact solutions, manufactured solutions and the
//! identity suite evaluated on the discrete output.

use ppwave::expr::{parse, Expr};
use ppwave::geometry::{ChartBox, MetricSpec};
use ppwave::hypersurface::SurfaceSpec;
use ppwave::identities::{compact_flux_check, verify_all, verify_gauss_equation, verify_laplacian_eta, GridSpec};
use ppwave::solver::{
    continuation, newton_solve, residual, Boundary, ContinuationStep, GridLayout, InitialGuess, SolveConfig,
    SolveStatus,
};
use ppwave::Error;

fn expr(s: &str) -> Expr {
    parse(s, &["u", "x"]).unwrap()
}

fn unit_square() -> ChartBox {
    ChartBox::new(vec![0.0, 0.0], vec![1.0, 1.0])
}

fn torus(h: &str) -> (MetricSpec, ChartBox) {
    let tau = std::f64::consts::TAU;
    let metric = MetricSpec::parse(1, h)
        .unwrap()
        .with_period("u", tau)
        .unwrap()
        .with_period("x", tau)
        .unwrap();
    (metric, ChartBox::new(vec![0.0, 0.0], vec![tau, tau]))
}

fn sample(e: &Expr, layout: &GridLayout) -> Vec<f64> {
    (0..layout.len())
        .map(|k| {
            let (i, j) = layout.ij(k);
            let [u, x] = layout.coords(i, j);
            e.eval(&[("u", u), ("x", x)]).unwrap()
        })
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn newton_converges_quadratically_on_minkowski() {
    let metric = MetricSpec::parse(1, "1").unwrap();
    let cfg = SolveConfig::new(
        metric,
        unit_square(),
        [17, 17],
        Boundary::Dirichlet(expr("0.2*u + 0.1*x + 0.2*sin(2*u)*cos(3*x)")),
        InitialGuess::Expr(expr("0.2*u + 0.1*x + 0.2*sin(2*u)*cos(3*x) + 0.05*sin(3.14159265358979*u)*sin(3.14159265358979*x)")),
    );
    let result = newton_solve(&cfg).unwrap();
    assert!(result.converged(), "{:?}", result.history);
    let r: Vec<f64> = result.history.iter().map(|h| h.residual).collect();
    for w in r.windows(2) {
        if w[0] < 1e-3 && w[1] > 1e-12 {
            assert!(w[1] <= 50.0 * w[0] * w[0], "residuals {r:?}");
        }
    }
    assert!(result.history.iter().all(|h| h.min_margin > 0.0));
}

#[test]
fn residual_is_odd_to_first_order_about_a_solution() {
    let metric = MetricSpec::parse(1, "2 + 0.5*sin(x)").unwrap();
    let cfg = SolveConfig::new(
        metric,
        unit_square(),
        [13, 13],
        Boundary::Dirichlet(expr("0.1*u*x")),
        InitialGuess::Expr(expr("0.1*u*x")),
    );
    let solution = newton_solve(&cfg).unwrap();
    assert!(solution.converged());
    let layout = solution.layout;
    let bump = sample(&expr("sin(3.14159265358979*u)*sin(3.14159265358979*x)"), &layout);
    for eps in [1e-2, 5e-3] {
        let plus: Vec<f64> = solution.values.iter().zip(&bump).map(|(f, b)| f + eps * b).collect();
        let minus: Vec<f64> = solution.values.iter().zip(&bump).map(|(f, b)| f - eps * b).collect();
        let rp = residual(&cfg, &plus).unwrap();
        let rm = residual(&cfg, &minus).unwrap();
        let first = rp.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let even = rp.iter().zip(&rm).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        // R(f + εφ) + R(f − εφ) = O(ε²) while each term is O(ε)
        assert!(even <= 10.0 * eps * first, "eps {eps}: first {first}, even part {even}");
    }
}

#[test]
fn static_torus_solution_satisfies_identity_suite() {
    let (metric, domain) = torus("2 + sin(x)");
    let cfg = SolveConfig::new(metric, domain, [24, 24], Boundary::Periodic, InitialGuess::Expr(expr("0.2*sin(u)")));
    let result = newton_solve(&cfg).unwrap();
    assert_eq!(result.status, SolveStatus::Converged, "{:?}", result.history);
    let surface = result.surface();
    let grid = surface.identity_grid().unwrap();
    let reports = verify_all(&surface, &grid).unwrap();
    assert_eq!(reports.len(), 5);
    for r in &reports {
        assert!(r.pass, "{}: {} > {}", r.id, r.max_residual, r.tolerance);
    }
}

#[test]
fn flat_torus_maximal_solutions_are_totally_geodesic() {
    let (metric, domain) = torus("1.5");
    for guess in ["0.2*sin(u)", "0.1*cos(x) + 0.1*sin(u + x)"] {
        let cfg = SolveConfig::new(metric.clone(), domain.clone(), [16, 16], Boundary::Periodic, InitialGuess::Expr(expr(guess)));
        let result = newton_solve(&cfg).unwrap();
        assert!(result.converged(), "{guess}: {:?}", result.history);
        let surface = result.surface();
        let grid = surface.identity_grid().unwrap();
        let flux = compact_flux_check(&surface, &grid).unwrap();
        assert!(flux.extra["max_trace_a2"] <= 1e-8, "{guess}: {}", flux.extra["max_trace_a2"]);
        assert!(flux.extra["min_laplacian"] >= -1e-8);
    }
}

#[test]
fn torus_cmc_targets_are_classified_failures() {
    let (metric, domain) = torus("1.5");
    for target in [0.1, 0.5] {
        let cfg = SolveConfig::new(metric.clone(), domain.clone(), [16, 16], Boundary::Periodic, InitialGuess::Expr(expr("0.2*sin(u)")))
            .with_target(target);
        let result = newton_solve(&cfg).unwrap();
        assert_ne!(result.status, SolveStatus::Converged, "target {target}");
        assert!(result.final_residual > cfg.newton_tol);
    }
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let metric = MetricSpec::parse(1, "2 + 0.5*sin(2*x)*cos(u)").unwrap();
    let exact = expr("0.2*sin(u)*cos(x) + 0.1*u*x");
    let surface = SurfaceSpec::graph(metric.clone(), exact.clone(), ChartBox::new(vec![-1.0, -1.0], vec![2.0, 2.0])).unwrap();
    let mut errors = Vec::new();
    for n in [17, 33, 65] {
        let mut cfg = SolveConfig::new(
            metric.clone(),
            unit_square(),
            [n, n],
            Boundary::Dirichlet(exact.clone()),
            InitialGuess::Expr(expr("0.2*sin(u)*cos(x) + 0.1*u*x + 0.05*sin(3.14159265358979*u)*sin(3.14159265358979*x)")),
        );
        let layout = cfg.layout().unwrap();
        cfg.target_field = Some(
            (0..layout.len())
                .map(|k| {
                    let (i, j) = layout.ij(k);
                    surface.point_geometry(&layout.coords(i, j)).unwrap().mean_curvature
                })
                .collect(),
        );
        let result = newton_solve(&cfg).unwrap();
        assert!(result.converged(), "N = {n}: {:?}", result.history);
        errors.push(sup_diff(&result.values, &sample(&exact, &layout)));
    }
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.7, "errors {errors:?}");
    }
}

#[test]
fn continuation_tracks_static_family() {
    let metric = |eps: f64| MetricSpec::parse(1, &format!("2 + {eps}*sin(x)")).unwrap();
    let schedule: Vec<ContinuationStep> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&eps| ContinuationStep { metric: metric(eps), target: 0.0 })
        .collect();

    let flat = SolveConfig::new(metric(0.0), unit_square(), [11, 11], Boundary::Dirichlet(expr("0")), InitialGuess::Expr(expr("0")));
    let outcome = continuation(&flat, &schedule);
    assert!(outcome.failure.is_none());
    assert_eq!(outcome.results.len(), 3);
    // constant graphs are maximal whenever H_u = 0
    for r in &outcome.results {
        assert!(r.values.iter().all(|v| v.abs() <= 1e-12));
    }

    let tilted = SolveConfig::new(metric(0.0), unit_square(), [11, 11], Boundary::Dirichlet(expr("0.2*u*x")), InitialGuess::Expr(expr("0.2*u*x")));
    let outcome = continuation(&tilted, &schedule);
    assert!(outcome.failure.is_none());
    let jump01 = sup_diff(&outcome.results[0].values, &outcome.results[1].values);
    let jump12 = sup_diff(&outcome.results[1].values, &outcome.results[2].values);
    assert!(jump01 < 0.05 && jump12 < 0.05, "{jump01} {jump12}");
}

#[test]
fn continuation_reports_partial_results() {
    let good = MetricSpec::parse(1, "2").unwrap();
    let bad = MetricSpec::parse(1, "-1").unwrap();
    let cfg = SolveConfig::new(good.clone(), unit_square(), [9, 9], Boundary::Dirichlet(expr("0")), InitialGuess::Expr(expr("0")));
    let outcome = continuation(
        &cfg,
        &[
            ContinuationStep { metric: good, target: 0.0 },
            ContinuationStep { metric: bad, target: 0.0 },
        ],
    );
    assert_eq!(outcome.results.len(), 1);
    match outcome.failure {
        Some(Error::Continuation { index, source }) => {
            assert_eq!(index, 1);
            assert!(matches!(*source, Error::LeftSpacelikeCone { .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn periodic_output_is_deterministic() {
    let (metric, domain) = torus("2 + sin(x)");
    let cfg = SolveConfig::new(metric, domain, [12, 12], Boundary::Periodic, InitialGuess::Expr(expr("0.2*sin(u) + 0.3")));
    let a = newton_solve(&cfg).unwrap();
    let b = newton_solve(&cfg).unwrap();
    assert_eq!(a.values, b.values);
    // the pinned node keeps its initial value
    assert_eq!(a.values[0], 0.3);
}

#[test]
fn dirichlet_solution_identities_converge_at_fixed_interior_points() {
    let data = expr("0.3*u - 0.4*x + 0.1*sin(3*u)*cos(2*x)");
    let mut lap = Vec::new();
    let mut gauss = Vec::new();
    for n in [33, 65] {
        let cfg = SolveConfig::new(
            MetricSpec::parse(1, "1").unwrap(),
            unit_square(),
            [n, n],
            Boundary::Dirichlet(data.clone()),
            InitialGuess::Expr(data.clone()),
        );
        let result = newton_solve(&cfg).unwrap();
        assert!(result.converged());
        let surface = result.surface();
        let h = result.layout.spacing[0];
        // a single point: the 2h inset leaves only the centre of a 5x5 box
        let grid = GridSpec {
            domain: ChartBox::new(vec![0.5 - 2.0 * h, 0.5 - 2.0 * h], vec![0.5 + 2.0 * h, 0.5 + 2.0 * h]),
            nodes: vec![5, 5],
            h,
            refine: false,
        };
        lap.push(verify_laplacian_eta(&surface, &grid).unwrap().max_residual);
        gauss.push(verify_gauss_equation(&surface, &grid).unwrap().max_residual);
    }
    for r in [&lap, &gauss] {
        let order = (r[0] / r[1]).log2();
        assert!((1.8..=2.2).contains(&order), "{r:?}");
    }
}
