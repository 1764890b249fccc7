//! Finite-difference oracles for the closed-form curvature formulas.

use ppwave::geometry::{AmbientBilinear, AmbientPoint, Christoffels, MetricSpec};
use ppwave::Result;

fn shifted(metric: &MetricSpec, p: &AmbientPoint, k: usize, delta: f64) -> AmbientPoint {
    let mut c = p.coords.clone();
    c[k] += delta;
    metric.point(&c)
}

/// `Γ^σ_{μν} = ½ g^{σλ}(∂_μ g_{νλ} + ∂_ν g_{μλ} − ∂_λ g_{μν})` with the
/// metric differentiated by central differences of step `h`.
pub fn levi_civita(metric: &MetricSpec, p: &AmbientPoint, h: f64) -> Result<Christoffels> {
    let d = metric.dim();
    let ginv = metric.inverse_metric_at(p)?;
    let dg = (0..d)
        .map(|k| {
            let plus = metric.metric_at(&shifted(metric, p, k, h))?;
            let minus = metric.metric_at(&shifted(metric, p, k, -h))?;
            Ok(AmbientBilinear::from_fn(d, |i, j| (plus.get(i, j) - minus.get(i, j)) / (2.0 * h)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut gamma = Christoffels::zeros(d);
    for s in 0..d {
        for mu in 0..d {
            for nu in 0..d {
                let acc: f64 = (0..d)
                    .map(|l| 0.5 * ginv.get(s, l) * (dg[mu].get(nu, l) + dg[nu].get(mu, l) - dg[l].get(mu, nu)))
                    .sum();
                gamma.set(s, mu, nu, acc);
            }
        }
    }
    Ok(gamma)
}

/// `Ric_{σν} = R^ρ_{σρν}` from the closed-form Christoffels, their
/// derivatives taken by central differences of step `h`.
pub fn ricci_by_contraction(metric: &MetricSpec, p: &AmbientPoint, h: f64) -> Result<AmbientBilinear> {
    let d = metric.dim();
    let gamma = metric.christoffels_at(p)?;
    let dgamma = (0..d)
        .map(|k| {
            let plus = metric.christoffels_at(&shifted(metric, p, k, h))?;
            let minus = metric.christoffels_at(&shifted(metric, p, k, -h))?;
            let mut out = Christoffels::zeros(d);
            for s in 0..d {
                for mu in 0..d {
                    for nu in 0..d {
                        out.set(s, mu, nu, (plus.get(s, mu, nu) - minus.get(s, mu, nu)) / (2.0 * h));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let riemann = |rho: usize, sigma: usize, mu: usize, nu: usize| {
        let mut r = dgamma[mu].get(rho, nu, sigma) - dgamma[nu].get(rho, mu, sigma);
        for l in 0..d {
            r += gamma.get(rho, mu, l) * gamma.get(l, nu, sigma) - gamma.get(rho, nu, l) * gamma.get(l, mu, sigma);
        }
        r
    };
    Ok(AmbientBilinear::from_fn(d, |sigma, nu| (0..d).map(|rho| riemann(rho, sigma, rho, nu)).sum()))
}
