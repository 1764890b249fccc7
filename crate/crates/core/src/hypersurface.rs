//! Spacelike hypersurfaces of a Brinkmann spacetime.
//!
//! A surface is a level set `F(u, v, x) = c`; graphs `v = f(u, x)` are the
//! special case `F = v − f`, `c = 0`. Every surface is analysed through its
//! graph chart over `(u, x_1..x_m)` with the coordinate tangent basis
//!
//! `w_i = ∂_i − (F_i / F_v) ∂_v`.
//!
//! The unit normal is `N = ±∇̄F / |∇̄F|` oriented so that `η = ⟨N, ∂_v⟩ > 0`,
//! the second fundamental form is `B(w_i, w_j) = −Hess̄F(w_i, w_j)/|∇̄F|`
//! (for the oriented `F`), and the shape operator is `A = g⁻¹B`.
//!
//! **Sign convention:** the mean curvature is `𝓗 = −(1/n) trace A`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{
    chart_to_ambient, x_index, AmbientBilinear, AmbientPoint, AmbientVector, ChartBox, LocalMetric,
    MetricSpec, U, V,
};

/// Ambient index of chart coordinate `i` (`0 → u`, `k → x_k`).
pub const fn ambient_index(i: usize) -> usize {
    if i == 0 {
        U
    } else {
        x_index(i - 1)
    }
}

/// Exact first and second partials of the level-set function at a point of
/// the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceJet {
    pub point: AmbientPoint,
    pub df: Vec<f64>,
    pub ddf: AmbientBilinear,
}

impl SurfaceJet {
    /// Jet of `F = v − f` from the chart derivatives of a graph function:
    /// `grad[i] = ∂_i f` and `hess[i][j] = ∂_i∂_j f` in chart indices.
    pub fn from_graph(point: AmbientPoint, grad: &[f64], hess: &[Vec<f64>]) -> Self {
        let n = grad.len();
        let dim = n + 1;
        let mut df = vec![0.0; dim];
        df[V] = 1.0;
        for i in 0..n {
            df[ambient_index(i)] = -grad[i];
        }
        let mut ddf = AmbientBilinear::zeros(dim);
        for i in 0..n {
            for j in i..n {
                ddf.set(ambient_index(i), ambient_index(j), -hess[i][j]);
            }
        }
        Self { point, df, ddf }
    }
}

/// Anything that yields a surface jet at chart points: symbolic surfaces
/// and grid functions.
pub trait GraphChart: Sync {
    fn metric(&self) -> &MetricSpec;

    fn domain(&self) -> &ChartBox;

    fn jet(&self, q: &[f64]) -> Result<SurfaceJet>;

    /// Hypersurface dimension `n = m + 1`.
    fn chart_dim(&self) -> usize {
        self.metric().m() + 1
    }

    /// Period of each chart coordinate, inherited from the metric.
    fn chart_periods(&self) -> Vec<Option<f64>> {
        (0..self.chart_dim())
            .map(|i| self.metric().periods()[ambient_index(i)])
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Graph(Expr),
    LevelSet,
}

/// A hypersurface given symbolically, with its chart domain.
#[derive(Debug, Clone)]
pub struct SurfaceSpec {
    metric: MetricSpec,
    shape: Shape,
    level_fn: Expr,
    level: f64,
    domain: ChartBox,
    df: Vec<Expr>,
    ddf: Vec<Vec<Expr>>,
}

impl SurfaceSpec {
    /// The graph `v = f(u, x)`.
    pub fn graph(metric: MetricSpec, f: Expr, domain: ChartBox) -> Result<Self> {
        if f.depends_on("v") {
            return Err(Error::InvalidSurface("graph function must not depend on v".into()));
        }
        let level_fn = Expr::var("v") - f.clone();
        Self::build(metric, Shape::Graph(f), level_fn, 0.0, domain)
    }

    /// The level set `F(u, v, x) = level`.
    pub fn level_set(metric: MetricSpec, f: Expr, level: f64, domain: ChartBox) -> Result<Self> {
        Self::build(metric, Shape::LevelSet, f, level, domain)
    }

    pub fn parse_graph(metric: MetricSpec, f: &str, domain: ChartBox) -> Result<Self> {
        let names = metric.names().to_vec();
        let chart: Vec<&str> = names.iter().map(String::as_str).filter(|n| *n != "v").collect();
        let f = crate::expr::parse(f, &chart)?;
        Self::graph(metric, f, domain)
    }

    pub fn parse_level_set(metric: MetricSpec, f: &str, level: f64, domain: ChartBox) -> Result<Self> {
        let names = metric.names().to_vec();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let f = crate::expr::parse(f, &refs)?;
        Self::level_set(metric, f, level, domain)
    }

    fn build(metric: MetricSpec, shape: Shape, level_fn: Expr, level: f64, domain: ChartBox) -> Result<Self> {
        if let Some(bad) = level_fn
            .variables()
            .into_iter()
            .find(|v| !metric.names().contains(v))
        {
            return Err(Error::InvalidSurface(format!("undeclared variable `{bad}`")));
        }
        if domain.dim() != metric.m() + 1 {
            return Err(Error::InvalidSurface(format!(
                "chart domain has dimension {}, expected {}",
                domain.dim(),
                metric.m() + 1
            )));
        }
        let names = metric.names().to_vec();
        let df: Vec<Expr> = names.iter().map(|n| level_fn.diff(n)).collect();
        let ddf = df
            .iter()
            .map(|d| names.iter().map(|n| d.diff(n)).collect())
            .collect();
        Ok(Self {
            metric,
            shape,
            level_fn,
            level,
            domain,
            df,
            ddf,
        })
    }

    pub fn level_fn(&self) -> &Expr {
        &self.level_fn
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn graph_fn(&self) -> Option<&Expr> {
        match &self.shape {
            Shape::Graph(f) => Some(f),
            Shape::LevelSet => None,
        }
    }

    /// Solves `F(u, v, x) = c` for `v` at a chart point.
    pub fn solve_v(&self, q: &[f64]) -> Result<f64> {
        if let Shape::Graph(f) = &self.shape {
            let p = self.metric.point(&chart_to_ambient(q, 0.0));
            return Ok(f.eval(&self.metric.env(&p))?);
        }
        let residual = |v: f64| -> Result<(f64, f64)> {
            let p = self.metric.point(&chart_to_ambient(q, v));
            let env = self.metric.env(&p);
            Ok((self.level_fn.eval(&env)? - self.level, self.df[V].eval(&env)?))
        };
        let fail = || Error::LevelSetSolve {
            point: q.to_vec(),
            level: self.level,
        };

        let mut v = 0.0;
        for _ in 0..60 {
            let Ok((r, dr)) = residual(v) else { break };
            if r.abs() <= 1e-14 * (1.0 + self.level.abs()) {
                return Ok(v);
            }
            if dr == 0.0 {
                break;
            }
            let step = r / dr;
            v -= step;
            if step.abs() <= 1e-15 * (1.0 + v.abs()) {
                return Ok(v);
            }
        }

        // Newton failed: bracket and bisect.
        let sign_at = |v: f64| residual(v).map(|(r, _)| r).ok();
        let r0 = sign_at(0.0).ok_or_else(fail)?;
        let mut width = 1.0;
        let bracket = loop {
            if width > 1e8 {
                return Err(fail());
            }
            if let Some(r) = sign_at(width) {
                if r.signum() != r0.signum() {
                    break (0.0, width);
                }
            }
            if let Some(r) = sign_at(-width) {
                if r.signum() != r0.signum() {
                    break (-width, 0.0);
                }
            }
            width *= 2.0;
        };
        let (mut lo, mut hi) = bracket;
        let r_lo = sign_at(lo).ok_or_else(fail)?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = sign_at(mid).ok_or_else(fail)?;
            if r == 0.0 {
                return Ok(mid);
            }
            if r.signum() == r_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `Q = ⟨∇̄F, ∇̄F⟩`; the surface is spacelike at `q` iff the returned
    /// margin `−Q` is positive.
    pub fn spacelike_margin(&self, q: &[f64]) -> Result<f64> {
        let jet = self.jet(q)?;
        let local = self.metric.local(&jet.point)?;
        Ok(-spacelike_form(&local, &jet.df))
    }

    pub fn point_geometry(&self, q: &[f64]) -> Result<PointGeometry> {
        point_geometry(self, q)
    }
}

impl GraphChart for SurfaceSpec {
    fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    fn domain(&self) -> &ChartBox {
        &self.domain
    }

    fn jet(&self, q: &[f64]) -> Result<SurfaceJet> {
        let v = self.solve_v(q)?;
        let point = self.metric.point(&chart_to_ambient(q, v));
        let env = self.metric.env(&point);
        let df = self
            .df
            .iter()
            .map(|e| e.eval(&env))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let dim = df.len();
        let mut ddf = AmbientBilinear::zeros(dim);
        for a in 0..dim {
            for b in a..dim {
                ddf.set(a, b, self.ddf[a][b].eval(&env)?);
            }
        }
        Ok(SurfaceJet { point, df, ddf })
    }
}

/// Spacelikeness margin `−⟨∇̄F, ∇̄F⟩` of the level set of `f` through an
/// arbitrary ambient point.
pub fn ambient_margin(metric: &MetricSpec, f: &Expr, p: &AmbientPoint) -> Result<f64> {
    let df = metric.partials(f, p)?;
    Ok(-spacelike_form(&metric.local(p)?, &df))
}

/// `⟨∇̄F, ∇̄F⟩ = 2F_uF_v − H F_v² + Σ F_{x_i}²`.
pub fn spacelike_form(local: &LocalMetric, df: &[f64]) -> f64 {
    let mut q = 2.0 * df[U] * df[V] - local.h * df[V] * df[V];
    for d in &df[2..] {
        q += d * d;
    }
    q
}

/// All extrinsic data of a spacelike hypersurface at one chart point.
#[derive(Debug, Clone, Serialize)]
pub struct PointGeometry {
    pub chart_point: Vec<f64>,
    pub point: AmbientPoint,
    /// `−⟨∇̄F, ∇̄F⟩ > 0`.
    pub margin: f64,
    /// Future unit timelike normal, `⟨N, N⟩ = −1`, `⟨N, ∂_v⟩ > 0`.
    pub normal: AmbientVector,
    pub eta: f64,
    /// `ξᵀ = ξ + ηN`.
    pub xi_t: AmbientVector,
    /// `ξᵀ` in the chart basis `w_i`.
    pub xi_t_chart: Vec<f64>,
    /// Chart tangent basis `w_i` as ambient vectors.
    #[serde(skip)]
    pub tangent_basis: Vec<AmbientVector>,
    #[serde(skip)]
    pub induced_metric: DMatrix<f64>,
    /// `B_ij = ⟨A w_i, w_j⟩`.
    #[serde(skip)]
    pub second_form: DMatrix<f64>,
    /// `A = g⁻¹ B`.
    #[serde(skip)]
    pub shape: DMatrix<f64>,
    pub trace_a: f64,
    /// `𝓗 = −(1/n) trace A`.
    pub mean_curvature: f64,
    pub trace_a2: f64,
    /// `Ric̄(N, N)`.
    pub ricci_nn: f64,
    /// Gaussian curvature from the Gauss equation, `n = 2` only:
    /// `K = Ric̄(N, N) − det A`, which is `Ric̄(N, N) + ½ trace A²` on
    /// maximal points.
    pub gauss_k: Option<f64>,
}

impl PointGeometry {
    /// `A ξᵀ` in the chart basis.
    pub fn a_xi_t(&self) -> DVector<f64> {
        &self.shape * DVector::from_column_slice(&self.xi_t_chart)
    }

    /// `‖gA − (gA)ᵀ‖_max`: zero for a self-adjoint shape operator.
    pub fn self_adjointness_residual(&self) -> f64 {
        let ga = &self.induced_metric * &self.shape;
        (&ga - ga.transpose()).amax()
    }
}

/// Extrinsic geometry at a chart point of any [`GraphChart`].
pub fn point_geometry<C: GraphChart + ?Sized>(chart: &C, q: &[f64]) -> Result<PointGeometry> {
    let jet = chart.jet(q)?;
    geometry_from_jet(chart.metric(), q, &jet)
}

pub fn geometry_from_jet(metric: &MetricSpec, q: &[f64], jet: &SurfaceJet) -> Result<PointGeometry> {
    let local = metric.local(&jet.point)?;
    let df = &jet.df;
    let dim = local.dim;
    let n = dim - 1;

    let form = spacelike_form(&local, df);
    if !(form < 0.0) {
        return Err(Error::NotSpacelike {
            point: q.to_vec(),
            q: form,
        });
    }
    let grad_norm = (-form).sqrt();
    // Orient F so that F_v > 0; then η = F_v / |∇̄F| > 0.
    let orient = df[V].signum();
    let normal = local.raise(df).scaled(orient / grad_norm);
    let eta = orient * df[V] / grad_norm;
    assert!(eta >= 1e-300, "η must stay positive on a spacelike surface");

    let xi_t = AmbientVector::xi(dim).add(&normal.scaled(eta));
    let tangent_basis: Vec<AmbientVector> = (0..n)
        .map(|i| {
            let a = ambient_index(i);
            let mut w = AmbientVector::basis(dim, a);
            w.0[V] = -df[a] / df[V];
            w
        })
        .collect();
    let xi_t_chart = (0..n).map(|i| xi_t.0[ambient_index(i)]).collect();

    let induced_metric = DMatrix::from_fn(n, n, |i, j| local.inner(&tangent_basis[i], &tangent_basis[j]));
    let hess = local.hessian_from_partials(df, &jet.ddf);
    let scale = -orient / grad_norm;
    let second_form = DMatrix::from_fn(n, n, |i, j| {
        scale * hess.apply(&tangent_basis[i], &tangent_basis[j])
    });
    let g_inv = induced_metric
        .clone()
        .try_inverse()
        .expect("induced metric of a spacelike surface is invertible");
    let shape = &g_inv * &second_form;
    let trace_a = shape.trace();
    let trace_a2 = (&shape * &shape).trace();
    let ricci_nn = local.ricci_uu() * normal.0[U] * normal.0[U];
    let gauss_k = (n == 2).then(|| ricci_nn - shape.determinant());

    Ok(PointGeometry {
        chart_point: q.to_vec(),
        point: jet.point.clone(),
        margin: -form,
        normal,
        eta,
        xi_t,
        xi_t_chart,
        tangent_basis,
        induced_metric,
        second_form,
        shape,
        trace_a,
        mean_curvature: -trace_a / n as f64,
        trace_a2,
        ricci_nn,
        gauss_k,
    })
}

/// Induced metric at a chart point (needs only first derivatives).
pub fn induced_metric<C: GraphChart + ?Sized>(chart: &C, q: &[f64]) -> Result<DMatrix<f64>> {
    let jet = chart.jet(q)?;
    let local = chart.metric().local(&jet.point)?;
    let n = local.dim - 1;
    let df = &jet.df;
    let basis: Vec<AmbientVector> = (0..n)
        .map(|i| {
            let a = ambient_index(i);
            let mut w = AmbientVector::basis(local.dim, a);
            w.0[V] = -df[a] / df[V];
            w
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| local.inner(&basis[i], &basis[j])))
}

/// Checks that `q` sits at least `reach` inside every non-periodic chart
/// boundary.
pub fn check_interior<C: GraphChart + ?Sized>(chart: &C, q: &[f64], reach: f64) -> Result<()> {
    let domain = chart.domain();
    let periods = chart.chart_periods();
    let slack = 1e-9 * reach.max(1e-300);
    for k in 0..q.len() {
        if periods[k].is_some() {
            continue;
        }
        if q[k] < domain.lo[k] + reach - slack || q[k] > domain.hi[k] - reach + slack {
            return Err(Error::BoundaryProximity {
                point: q.to_vec(),
                margin: reach,
            });
        }
    }
    Ok(())
}

/// Scalar fields are evaluated on small integer stencils around a base
/// point; offsets are in units of the step `h`.
struct Stencil<'a, F> {
    base: &'a [f64],
    h: f64,
    field: F,
    cache: Vec<(Vec<i32>, f64)>,
}

impl<'a, F: FnMut(&[f64]) -> Result<f64>> Stencil<'a, F> {
    fn new(base: &'a [f64], h: f64, field: F) -> Self {
        Self {
            base,
            h,
            field,
            cache: Vec::new(),
        }
    }

    fn at(&mut self, offset: &[i32]) -> Result<f64> {
        if let Some((_, v)) = self.cache.iter().find(|(o, _)| o == offset) {
            return Ok(*v);
        }
        let q: Vec<f64> = self
            .base
            .iter()
            .zip(offset)
            .map(|(b, &o)| b + o as f64 * self.h)
            .collect();
        let v = (self.field)(&q)?;
        self.cache.push((offset.to_vec(), v));
        Ok(v)
    }

    /// Central difference of the field along `axis` at integer offset `at`.
    fn d(&mut self, at: &[i32], axis: usize) -> Result<f64> {
        let mut plus = at.to_vec();
        let mut minus = at.to_vec();
        plus[axis] += 1;
        minus[axis] -= 1;
        Ok((self.at(&plus)? - self.at(&minus)?) / (2.0 * self.h))
    }
}

fn unit(n: usize, axis: usize, s: i32) -> Vec<i32> {
    let mut o = vec![0; n];
    o[axis] = s;
    o
}

/// Chart gradient `g^{ij} ∂_j φ` by central differences at step `h`.
pub fn intrinsic_gradient<C, F>(chart: &C, phi: F, q: &[f64], h: f64) -> Result<DVector<f64>>
where
    C: GraphChart + ?Sized,
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = chart.chart_dim();
    check_interior(chart, q, 2.0 * h)?;
    let mut stencil = Stencil::new(q, h, phi);
    let zero = vec![0; n];
    let dphi = DVector::from_iterator(n, (0..n).map(|j| stencil.d(&zero, j)).collect::<Result<Vec<_>>>()?);
    let g = induced_metric(chart, q)?;
    let g_inv = g.try_inverse().expect("induced metric is invertible");
    Ok(g_inv * dphi)
}

/// `|∇φ|² = g^{ij} ∂_iφ ∂_jφ` by central differences.
pub fn intrinsic_gradient_norm_sq<C, F>(chart: &C, phi: F, q: &[f64], h: f64) -> Result<f64>
where
    C: GraphChart + ?Sized,
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = chart.chart_dim();
    check_interior(chart, q, 2.0 * h)?;
    let mut stencil = Stencil::new(q, h, phi);
    let zero = vec![0; n];
    let dphi = DVector::from_iterator(n, (0..n).map(|j| stencil.d(&zero, j)).collect::<Result<Vec<_>>>()?);
    let g_inv = induced_metric(chart, q)?.try_inverse().expect("induced metric is invertible");
    Ok(dphi.dot(&(g_inv * &dphi)))
}

/// Laplace–Beltrami operator in divergence form,
/// `Δφ = (1/√g) ∂_i(√g g^{ij} ∂_j φ)`, with central differences at step `h`
/// (the field is sampled up to `2h` away from `q`).
pub fn intrinsic_laplacian<C, F>(chart: &C, phi: F, q: &[f64], h: f64) -> Result<f64>
where
    C: GraphChart + ?Sized,
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = chart.chart_dim();
    check_interior(chart, q, 2.0 * h)?;
    let mut stencil = Stencil::new(q, h, phi);
    let at = |offset: &[i32]| -> Vec<f64> {
        q.iter().zip(offset).map(|(b, &o)| b + o as f64 * h).collect()
    };
    let mut divergence = 0.0;
    for i in 0..n {
        let mut flux = [0.0; 2];
        for (slot, s) in [1, -1].into_iter().enumerate() {
            let offset = unit(n, i, s);
            let g = induced_metric(chart, &at(&offset))?;
            let sqrt_det = g.determinant().sqrt();
            let g_inv = g.try_inverse().expect("induced metric is invertible");
            let mut f = 0.0;
            for j in 0..n {
                f += g_inv[(i, j)] * stencil.d(&offset, j)?;
            }
            flux[slot] = sqrt_det * f;
        }
        divergence += (flux[0] - flux[1]) / (2.0 * h);
    }
    let sqrt_det = induced_metric(chart, q)?.determinant().sqrt();
    Ok(divergence / sqrt_det)
}

/// Gaussian curvature of a 2-dimensional metric `(E, F, G)(q)` by the
/// Brioschi formula with central differences at step `h`.
pub fn brioschi<M>(mut metric: M, q: &[f64], h: f64) -> Result<f64>
where
    M: FnMut(&[f64]) -> Result<[f64; 3]>,
{
    let mut sample = |du: f64, dx: f64| metric(&[q[0] + du * h, q[1] + dx * h]);
    let c = sample(0.0, 0.0)?;
    let pu = sample(1.0, 0.0)?;
    let mu = sample(-1.0, 0.0)?;
    let px = sample(0.0, 1.0)?;
    let mx = sample(0.0, -1.0)?;
    let pp = sample(1.0, 1.0)?;
    let pm = sample(1.0, -1.0)?;
    let mp = sample(-1.0, 1.0)?;
    let mm = sample(-1.0, -1.0)?;

    let d1 = |a: &[f64; 3], b: &[f64; 3], k: usize| (a[k] - b[k]) / (2.0 * h);
    let d2 = |a: &[f64; 3], b: &[f64; 3], k: usize| (a[k] - 2.0 * c[k] + b[k]) / (h * h);
    let [e, f, g] = c;
    let (e_u, f_u, g_u) = (d1(&pu, &mu, 0), d1(&pu, &mu, 1), d1(&pu, &mu, 2));
    let (e_x, f_x, g_x) = (d1(&px, &mx, 0), d1(&px, &mx, 1), d1(&px, &mx, 2));
    let e_xx = d2(&px, &mx, 0);
    let g_uu = d2(&pu, &mu, 2);
    let f_ux = (pp[1] - pm[1] - mp[1] + mm[1]) / (4.0 * h * h);

    let m1 = nalgebra::Matrix3::new(
        -0.5 * e_xx + f_ux - 0.5 * g_uu,
        0.5 * e_u,
        f_u - 0.5 * e_x,
        f_x - 0.5 * g_u,
        e,
        f,
        0.5 * g_x,
        f,
        g,
    );
    let m2 = nalgebra::Matrix3::new(0.0, 0.5 * e_x, 0.5 * g_u, 0.5 * e_x, e, f, 0.5 * g_u, f, g);
    let det = e * g - f * f;
    Ok((m1.determinant() - m2.determinant()) / (det * det))
}

/// Gaussian curvature of the induced metric of a 2-dimensional hypersurface
/// by the Brioschi formula.
pub fn gauss_intrinsic<C: GraphChart + ?Sized>(chart: &C, q: &[f64], h: f64) -> Result<f64> {
    let n = chart.chart_dim();
    if n != 2 {
        return Err(Error::DimensionMismatch(n));
    }
    check_interior(chart, q, 2.0 * h)?;
    brioschi(
        |p| {
            let g = induced_metric(chart, p)?;
            Ok([g[(0, 0)], g[(0, 1)], g[(1, 1)]])
        },
        q,
        h,
    )
}
