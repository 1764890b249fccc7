//! The ambient Brinkmann spacetime
//!
//! `g = H(u, x) du² + 2 du dv + Σ dx_i²`
//!
//! in coordinates ordered `(u, v, x_1..x_m)`. The potential `H` never depends
//! on `v`, which makes `ξ = ∂_v` a parallel null vector field. All metric,
//! Christoffel and Ricci components come from closed forms evaluated on
//! exact symbolic derivatives of `H`.
//!
//! Curvature convention:
//! `R^ρ_{σμν} = ∂_μ Γ^ρ_{νσ} − ∂_ν Γ^ρ_{μσ} + Γ^ρ_{μλ} Γ^λ_{νσ} − Γ^ρ_{νλ} Γ^λ_{μσ}`
//! and `Ric_{σν} = R^ρ_{σρν}`. With it the only non-zero Ricci component is
//! `Ric_uu = −½ Σ_i ∂²H/∂x_i²`, so the timelike convergence condition holds
//! exactly where the transverse Laplacian of `H` is non-positive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, NamedValues};

pub const U: usize = 0;
pub const V: usize = 1;

/// Ambient index of the transverse coordinate `x_{i+1}`.
pub const fn x_index(i: usize) -> usize {
    2 + i
}

/// Ambient coordinate names for transverse dimension `m`: `u, v, x` when
/// `m = 1`, otherwise `u, v, x1, .., xm`.
pub fn coordinate_names(m: usize) -> Vec<String> {
    let mut names = vec!["u".to_string(), "v".to_string()];
    if m == 1 {
        names.push("x".into());
    } else {
        names.extend((1..=m).map(|i| format!("x{i}")));
    }
    names
}

/// A Brinkmann metric with optional periodic identifications.
#[derive(Debug, Clone)]
pub struct MetricSpec {
    m: usize,
    h: Expr,
    names: Vec<String>,
    /// Per ambient coordinate; `v` is never periodic.
    periods: Vec<Option<f64>>,
    dh: Vec<Expr>,
    dh_xx: Vec<Expr>,
}

impl MetricSpec {
    pub fn new(m: usize, h: Expr) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidMetric("transverse dimension must be >= 1".into()));
        }
        let names = coordinate_names(m);
        if h.depends_on("v") {
            return Err(Error::InvalidMetric("H must not depend on v".into()));
        }
        if let Some(bad) = h.variables().into_iter().find(|v| !names.contains(v)) {
            return Err(Error::InvalidMetric(format!("H uses undeclared variable `{bad}`")));
        }
        let dh = names.iter().map(|n| h.diff(n)).collect::<Vec<_>>();
        let dh_xx = (0..m)
            .map(|i| dh[x_index(i)].diff(&names[x_index(i)]))
            .collect();
        Ok(Self {
            m,
            h,
            periods: vec![None; m + 2],
            names,
            dh,
            dh_xx,
        })
    }

    /// Parses `H` from text over the coordinate names of dimension `m`.
    pub fn parse(m: usize, h: &str) -> Result<Self> {
        let names = coordinate_names(m);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Self::new(m, parse(h, &refs)?)
    }

    /// Makes the named coordinate periodic (`u` or a transverse coordinate).
    pub fn with_period(mut self, coord: &str, period: f64) -> Result<Self> {
        let Some(idx) = self.names.iter().position(|n| n == coord) else {
            return Err(Error::InvalidMetric(format!("unknown coordinate `{coord}`")));
        };
        if idx == V {
            return Err(Error::InvalidMetric("v cannot be periodic".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidMetric(format!("period for `{coord}` must be > 0")));
        }
        self.periods[idx] = Some(period);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Spacetime dimension `m + 2`.
    pub fn dim(&self) -> usize {
        self.m + 2
    }

    pub fn potential(&self) -> &Expr {
        &self.h
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.periods
    }

    /// Builds a point, reducing periodic coordinates into `[0, period)`.
    pub fn point(&self, coords: &[f64]) -> AmbientPoint {
        assert_eq!(coords.len(), self.dim(), "point has wrong dimension");
        let coords = coords
            .iter()
            .zip(&self.periods)
            .map(|(&c, p)| match p {
                Some(period) => c.rem_euclid(*period),
                None => c,
            })
            .collect();
        AmbientPoint { coords }
    }

    pub fn env<'a>(&'a self, p: &'a AmbientPoint) -> NamedValues<'a> {
        NamedValues {
            names: &self.names,
            values: &p.coords,
        }
    }

    /// Evaluates `H`, its first partials and its pure transverse second
    /// partials at `p`.
    pub fn local(&self, p: &AmbientPoint) -> Result<LocalMetric> {
        let env = self.env(p);
        let h = self.h.eval(&env)?;
        let dh = self
            .dh
            .iter()
            .map(|e| e.eval(&env))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let transverse_laplacian = self
            .dh_xx
            .iter()
            .map(|e| e.eval(&env))
            .sum::<std::result::Result<f64, _>>()?;
        Ok(LocalMetric {
            dim: self.dim(),
            h,
            dh,
            transverse_laplacian,
        })
    }

    pub fn metric_at(&self, p: &AmbientPoint) -> Result<AmbientBilinear> {
        Ok(self.local(p)?.metric())
    }

    pub fn inverse_metric_at(&self, p: &AmbientPoint) -> Result<AmbientBilinear> {
        Ok(self.local(p)?.inverse_metric())
    }

    pub fn christoffels_at(&self, p: &AmbientPoint) -> Result<Christoffels> {
        Ok(self.local(p)?.christoffels())
    }

    pub fn ricci_at(&self, p: &AmbientPoint) -> Result<AmbientBilinear> {
        Ok(self.local(p)?.ricci())
    }

    pub fn inner(&self, p: &AmbientPoint, a: &AmbientVector, b: &AmbientVector) -> Result<f64> {
        Ok(self.local(p)?.inner(a, b))
    }

    pub fn timelike_norm(&self, p: &AmbientPoint, a: &AmbientVector) -> Result<f64> {
        self.local(p)?.timelike_norm(a)
    }

    /// Exact partial derivatives `∂_μ F` at `p`.
    pub fn partials(&self, f: &Expr, p: &AmbientPoint) -> Result<Vec<f64>> {
        let env = self.env(p);
        self.names
            .iter()
            .map(|n| f.diff(n).eval(&env).map_err(Error::from))
            .collect()
    }

    /// Exact second partials `∂_μ ∂_ν F` at `p`.
    pub fn second_partials(&self, f: &Expr, p: &AmbientPoint) -> Result<AmbientBilinear> {
        let env = self.env(p);
        let mut out = AmbientBilinear::zeros(self.dim());
        for a in 0..self.dim() {
            let fa = f.diff(&self.names[a]);
            for b in a..self.dim() {
                out.set(a, b, fa.diff(&self.names[b]).eval(&env)?);
            }
        }
        Ok(out)
    }

    /// `∇̄F = F_v ∂_u + (F_u − H F_v) ∂_v + Σ F_{x_i} ∂_{x_i}`.
    pub fn ambient_gradient(&self, f: &Expr, p: &AmbientPoint) -> Result<AmbientVector> {
        let df = self.partials(f, p)?;
        Ok(self.local(p)?.raise(&df))
    }

    /// Coordinate Hessian `∂_μ∂_ν F − Γ^σ_{μν} ∂_σ F`.
    pub fn ambient_hessian(&self, f: &Expr, p: &AmbientPoint) -> Result<AmbientBilinear> {
        let df = self.partials(f, p)?;
        let ddf = self.second_partials(f, p)?;
        Ok(self.local(p)?.hessian_from_partials(&df, &ddf))
    }

    /// Samples `Ric_uu` on a grid over the chart box `(u, x_1..x_m)` with
    /// `samples` nodes per axis, and cross-checks `Ric(Z, Z) = Ric_uu (Z^u)²`
    /// on random timelike vectors.
    pub fn tcc_report(&self, domain: &ChartBox, samples: usize) -> Result<TccReport> {
        self.tcc_report_grid(domain, &vec![samples; domain.dim()])
    }

    /// As [`MetricSpec::tcc_report`] with a node count per axis.
    pub fn tcc_report_grid(&self, domain: &ChartBox, counts: &[usize]) -> Result<TccReport> {
        assert!(counts.iter().all(|&n| n >= 1), "tcc_report needs at least one sample per axis");
        assert_eq!(domain.dim(), self.m + 1, "domain must cover (u, x_1..x_m)");
        assert_eq!(counts.len(), domain.dim(), "one node count per chart axis");
        let nodes = domain.nodes(counts);
        let mut min_value = f64::INFINITY;
        let mut argmin = Vec::new();
        let mut points = Vec::with_capacity(nodes.len());
        for q in &nodes {
            let p = self.point(&chart_to_ambient(q, 0.0));
            let s = self.local(&p)?.ricci_uu();
            if s < min_value {
                min_value = s;
                argmin = q.clone();
            }
            points.push(p);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0x7cc);
        let stride = (points.len() / 20).max(1);
        let mut cross_check_max_error = 0.0f64;
        let mut cross_checks = 0usize;
        for p in points.iter().step_by(stride).take(20) {
            let local = self.local(p)?;
            let ric = local.ricci();
            let s = local.ricci_uu();
            for _ in 0..50 {
                let z = random_timelike(&local, &mut rng);
                let direct = ric.apply(&z, &z);
                let predicted = s * z.0[U] * z.0[U];
                cross_check_max_error = cross_check_max_error.max((direct - predicted).abs());
                cross_checks += 1;
            }
        }

        Ok(TccReport {
            samples: nodes.len(),
            min_ricci_uu: min_value,
            argmin,
            satisfied_on_samples: min_value >= TCC_THRESHOLD,
            cross_checks,
            cross_check_max_error,
        })
    }
}

/// Values at or above this count as satisfying the timelike convergence
/// condition; the flat case sits exactly on the boundary.
pub const TCC_THRESHOLD: f64 = -1e-12;

fn random_timelike(local: &LocalMetric, rng: &mut impl Rng) -> AmbientVector {
    loop {
        let z = AmbientVector((0..local.dim).map(|_| rng.gen_range(-2.0..2.0)).collect());
        if local.inner(&z, &z) < -1e-3 {
            return z;
        }
    }
}

/// Maps chart coordinates `(u, x_1..x_m)` plus a value of `v` to ambient
/// coordinates `(u, v, x_1..x_m)`.
pub fn chart_to_ambient(q: &[f64], v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(q.len() + 1);
    out.push(q[0]);
    out.push(v);
    out.extend_from_slice(&q[1..]);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct TccReport {
    pub samples: usize,
    /// Minimum of `Ric_uu = −½ Σ ∂²H/∂x_i²` over the sample grid.
    pub min_ricci_uu: f64,
    pub argmin: Vec<f64>,
    pub satisfied_on_samples: bool,
    pub cross_checks: usize,
    pub cross_check_max_error: f64,
}

/// Axis-aligned box in chart coordinates `(u, x_1..x_m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Tensor grid of `counts[k]` evenly spaced nodes per axis, endpoints
    /// included, in row-major order (last axis fastest).
    pub fn nodes(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                if n == 1 {
                    vec![0.5 * (self.lo[k] + self.hi[k])]
                } else {
                    (0..n)
                        .map(|i| self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (n - 1) as f64)
                        .collect()
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
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbientPoint {
    pub coords: Vec<f64>,
}

/// Components in the coordinate frame `(∂_u, ∂_v, ∂_{x_i})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbientVector(pub Vec<f64>);

impl AmbientVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[k] = 1.0;
        v
    }

    /// The parallel null field `ξ = ∂_v`.
    pub fn xi(dim: usize) -> Self {
        Self::basis(dim, V)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Symmetric bilinear form; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbientBilinear {
    dim: usize,
    upper: Vec<f64>,
}

impl AmbientBilinear {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                out.set(i, j, f(i, j));
            }
        }
        out
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.dim - i * (i + 1) / 2 + j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.slot(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.slot(i, j);
        self.upper[k] = value;
    }

    /// `B(a, b) = a^μ B_{μν} b^ν`.
    pub fn apply(&self, a: &AmbientVector, b: &AmbientVector) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim {
            if a.0[i] == 0.0 {
                continue;
            }
            for j in 0..self.dim {
                sum += a.0[i] * self.get(i, j) * b.0[j];
            }
        }
        sum
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `Γ^σ_{μν}`, symmetric in the lower pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffels {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffels {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, sigma: usize, mu: usize, nu: usize) -> f64 {
        self.data[(sigma * self.dim + mu) * self.dim + nu]
    }

    /// Sets both `Γ^σ_{μν}` and `Γ^σ_{νμ}`.
    pub fn set(&mut self, sigma: usize, mu: usize, nu: usize, value: f64) {
        let d = self.dim;
        self.data[(sigma * d + mu) * d + nu] = value;
        self.data[(sigma * d + nu) * d + mu] = value;
    }
}

/// `H` and its derivatives at one point; all closed-form tensors of the
/// metric are cheap functions of these numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMetric {
    pub dim: usize,
    pub h: f64,
    /// `∂_μ H` in ambient index order (the `v` entry is zero).
    pub dh: Vec<f64>,
    /// `Σ_i ∂²H/∂x_i²`.
    pub transverse_laplacian: f64,
}

impl LocalMetric {
    pub fn metric(&self) -> AmbientBilinear {
        let mut g = AmbientBilinear::zeros(self.dim);
        g.set(U, U, self.h);
        g.set(U, V, 1.0);
        for k in 2..self.dim {
            g.set(k, k, 1.0);
        }
        g
    }

    pub fn inverse_metric(&self) -> AmbientBilinear {
        let mut g = AmbientBilinear::zeros(self.dim);
        g.set(U, V, 1.0);
        g.set(V, V, -self.h);
        for k in 2..self.dim {
            g.set(k, k, 1.0);
        }
        g
    }

    pub fn inner(&self, a: &AmbientVector, b: &AmbientVector) -> f64 {
        let (a, b) = (&a.0, &b.0);
        let mut s = self.h * a[U] * b[U] + a[U] * b[V] + a[V] * b[U];
        for k in 2..self.dim {
            s += a[k] * b[k];
        }
        s
    }

    /// `|V| = √(−⟨V, V⟩)` for timelike `V`.
    pub fn timelike_norm(&self, a: &AmbientVector) -> Result<f64> {
        let norm_sq = self.inner(a, a);
        if norm_sq < 0.0 {
            Ok((-norm_sq).sqrt())
        } else {
            Err(Error::NotTimelike { norm_sq })
        }
    }

    /// Raises a covector: `V^μ = g^{μν} ω_ν`.
    pub fn raise(&self, omega: &[f64]) -> AmbientVector {
        let mut out = omega.to_vec();
        out[U] = omega[V];
        out[V] = omega[U] - self.h * omega[V];
        AmbientVector(out)
    }

    pub fn christoffel(&self, sigma: usize, mu: usize, nu: usize) -> f64 {
        let (mu, nu) = if mu <= nu { (mu, nu) } else { (nu, mu) };
        match (sigma, mu, nu) {
            (V, U, U) => 0.5 * self.dh[U],
            (V, U, k) if k >= 2 => 0.5 * self.dh[k],
            (s, U, U) if s >= 2 => -0.5 * self.dh[s],
            _ => 0.0,
        }
    }

    pub fn christoffels(&self) -> Christoffels {
        let mut gamma = Christoffels::zeros(self.dim);
        gamma.set(V, U, U, 0.5 * self.dh[U]);
        for k in 2..self.dim {
            gamma.set(V, U, k, 0.5 * self.dh[k]);
            gamma.set(k, U, U, -0.5 * self.dh[k]);
        }
        gamma
    }

    /// The single Ricci component `Ric_uu = −½ Σ ∂²H/∂x_i²`.
    pub fn ricci_uu(&self) -> f64 {
        -0.5 * self.transverse_laplacian
    }

    pub fn ricci(&self) -> AmbientBilinear {
        let mut r = AmbientBilinear::zeros(self.dim);
        r.set(U, U, self.ricci_uu());
        r
    }

    /// Covariant Hessian from exact partials of `F`.
    pub fn hessian_from_partials(&self, df: &[f64], ddf: &AmbientBilinear) -> AmbientBilinear {
        AmbientBilinear::from_fn(self.dim, |mu, nu| {
            let mut value = ddf.get(mu, nu);
            for (sigma, d) in df.iter().enumerate() {
                value -= self.christoffel(sigma, mu, nu) * d;
            }
            value
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(h: &str) -> MetricSpec {
        MetricSpec::parse(1, h).unwrap()
    }

    #[test]
    fn flat_metric_is_minkowski_in_null_coordinates() {
        let s = spec("0");
        let p = s.point(&[0.3, -1.0, 2.0]);
        let g = s.metric_at(&p).unwrap().to_matrix();
        assert_eq!(g.determinant(), -1.0);
        assert_eq!(s.christoffels_at(&p).unwrap(), Christoffels::zeros(3));
    }

    #[test]
    fn metric_and_inverse_at_quadratic_potential() {
        let s = spec("x^2");
        let p = s.point(&[0.0, 0.0, 2.0]);
        assert_eq!(s.metric_at(&p).unwrap().get(U, U), 4.0);
        assert_eq!(s.inverse_metric_at(&p).unwrap().get(V, V), -4.0);
        let prod = s.metric_at(&p).unwrap().to_matrix() * s.inverse_metric_at(&p).unwrap().to_matrix();
        assert_eq!(prod, nalgebra::DMatrix::identity(3, 3));
    }

    #[test]
    fn rejects_v_dependence_and_unknown_variables() {
        assert!(matches!(spec_err("v*x"), Error::InvalidMetric(_)));
        assert!(matches!(
            MetricSpec::parse(1, "y").unwrap_err(),
            Error::Expr(crate::expr::ExprError::UnknownIdentifier { .. })
        ));
        fn spec_err(h: &str) -> Error {
            MetricSpec::parse(1, h).unwrap_err()
        }
    }

    #[test]
    fn xi_is_null_and_parallel() {
        let s = spec("sin(u)*cos(x) + x^3");
        let p = s.point(&[0.4, 1.1, -0.7]);
        let xi = AmbientVector::xi(3);
        assert_eq!(s.inner(&p, &xi, &xi).unwrap(), 0.0);
        let u = AmbientVector::basis(3, U);
        assert_eq!(s.inner(&p, &u, &xi).unwrap(), 1.0);
        let gamma = s.christoffels_at(&p).unwrap();
        for sigma in 0..3 {
            for mu in 0..3 {
                assert_eq!(gamma.get(sigma, mu, V), 0.0);
                assert_eq!(gamma.get(sigma, V, mu), 0.0);
            }
        }
    }

    #[test]
    fn christoffels_closed_form() {
        let s = spec("u^2*x");
        let p = s.point(&[2.0, 0.0, 3.0]);
        let gamma = s.christoffels_at(&p).unwrap();
        // H_u = 2ux = 12, H_x = u^2 = 4
        assert_eq!(gamma.get(V, U, U), 6.0);
        assert_eq!(gamma.get(2, U, U), -2.0);
        assert_eq!(gamma.get(V, U, 2), 2.0);
        assert_eq!(gamma.get(V, 2, U), 2.0);
    }

    #[test]
    fn ricci_of_cubic_potential() {
        let s = spec("x^3");
        let p = s.point(&[0.0, 0.0, 2.0]);
        let ric = s.ricci_at(&p).unwrap();
        assert_eq!(ric.get(U, U), -6.0);
        for i in 0..3 {
            for j in 0..3 {
                if (i, j) != (U, U) {
                    assert_eq!(ric.get(i, j), 0.0);
                }
            }
        }
        let affine = spec("3 + 2*x - u");
        assert_eq!(affine.ricci_at(&p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn general_m_ricci_sums_transverse_directions() {
        let s = MetricSpec::parse(2, "x1^2 - 3*x2^2 + u*x1*x2").unwrap();
        let p = s.point(&[0.5, 0.0, 1.0, 2.0]);
        assert_eq!(s.ricci_at(&p).unwrap().get(U, U), -0.5 * (2.0 - 6.0));
    }

    #[test]
    fn tcc_classification() {
        let domain = ChartBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let good = spec("-x^2").tcc_report(&domain, 5).unwrap();
        assert!(good.satisfied_on_samples);
        assert_eq!(good.min_ricci_uu, 1.0);
        let bad = spec("x^2").tcc_report(&domain, 5).unwrap();
        assert!(!bad.satisfied_on_samples);
        assert_eq!(bad.min_ricci_uu, -1.0);
        let flat = spec("1").tcc_report(&domain, 3).unwrap();
        assert!(flat.satisfied_on_samples);
        assert_eq!(flat.min_ricci_uu, -0.0);
    }

    #[test]
    fn tcc_cross_check_on_random_timelike_vectors() {
        let domain = ChartBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]);
        let report = spec("sin(u)*x^2 + exp(-x^2)").tcc_report(&domain, 10).unwrap();
        assert_eq!(report.cross_checks, 1000);
        assert!(report.cross_check_max_error <= 1e-10);
    }

    #[test]
    fn gradient_of_lambda_v() {
        let s = spec("2 + sin(x)");
        let lambda = 1.5;
        let f = crate::expr::parse("1.5*v", &["u", "v", "x"]).unwrap();
        let p = s.point(&[0.2, 0.3, 0.9]);
        let h = 2.0 + 0.9f64.sin();
        let grad = s.ambient_gradient(&f, &p).unwrap();
        assert_eq!(grad, AmbientVector(vec![lambda, -h * lambda, 0.0]));
        let norm_sq = s.inner(&p, &grad, &grad).unwrap();
        assert!((norm_sq + lambda * lambda * h).abs() < 1e-14);
        assert!((s.timelike_norm(&p, &grad).unwrap() - lambda * h.sqrt()).abs() < 1e-14);

        let fx = crate::expr::parse("x", &["u", "v", "x"]).unwrap();
        let gx = s.ambient_gradient(&fx, &p).unwrap();
        assert_eq!(gx, AmbientVector::basis(3, 2));
        assert!(matches!(
            s.timelike_norm(&p, &gx),
            Err(Error::NotTimelike { norm_sq }) if norm_sq == 1.0
        ));
    }

    #[test]
    fn hessian_of_lambda_v() {
        let s = spec("2 + sin(x)");
        let f = crate::expr::parse("0.5*v", &["u", "v", "x"]).unwrap();
        let p = s.point(&[0.2, 0.3, 0.9]);
        let hess = s.ambient_hessian(&f, &p).unwrap();
        assert_eq!(hess.get(U, 2), -0.5 * 0.5 * 0.9f64.cos());
        assert_eq!(hess.get(U, U), 0.0);
        assert_eq!(hess.get(2, 2), 0.0);
        let flat = spec("4").ambient_hessian(&crate::expr::parse("u - 2*v + 3*x", &["u", "v", "x"]).unwrap(), &p);
        assert_eq!(flat.unwrap().max_abs(), 0.0);
    }

    #[test]
    fn periodic_coordinates_are_reduced() {
        let s = spec("sin(x)").with_period("x", 2.0).unwrap();
        let p = s.point(&[7.0, -3.0, -0.5]);
        assert_eq!(p.coords, vec![7.0, -3.0, 1.5]);
        assert!(spec("1").with_period("v", 1.0).is_err());
        assert!(spec("1").with_period("x", 0.0).is_err());
    }
}
