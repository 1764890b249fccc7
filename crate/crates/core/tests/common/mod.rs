//! Test-only oracles, independent of the closed forms under test.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ppwave::geometry::{AmbientPoint, MetricSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Metric matrix built directly from the line element, `H` evaluated by
/// plain expression evaluation.
pub fn metric_matrix(spec: &MetricSpec, coords: &[f64]) -> DMatrix<f64> {
    let p = AmbientPoint { coords: coords.to_vec() };
    let h = spec.potential().eval(&spec.env(&p)).unwrap();
    let d = spec.dim();
    let mut g = DMatrix::zeros(d, d);
    g[(0, 0)] = h;
    g[(0, 1)] = 1.0;
    g[(1, 0)] = 1.0;
    for k in 2..d {
        g[(k, k)] = 1.0;
    }
    g
}

fn shifted(coords: &[f64], k: usize, delta: f64) -> Vec<f64> {
    let mut c = coords.to_vec();
    c[k] += delta;
    c
}

/// `∂_k g_{ij}` by central differences.
pub fn metric_derivative(spec: &MetricSpec, coords: &[f64], h: f64) -> Vec<DMatrix<f64>> {
    (0..spec.dim())
        .map(|k| {
            (metric_matrix(spec, &shifted(coords, k, h)) - metric_matrix(spec, &shifted(coords, k, -h)))
                / (2.0 * h)
        })
        .collect()
}

/// `Γ^σ_{μν} = ½ g^{σλ}(∂_μ g_{νλ} + ∂_ν g_{μλ} − ∂_λ g_{μν})` with
/// finite-difference metric derivatives and a numerically inverted metric.
/// Indexed `[σ][μ][ν]`.
pub fn levi_civita(spec: &MetricSpec, coords: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    let d = spec.dim();
    let ginv = metric_matrix(spec, coords).try_inverse().unwrap();
    let dg = metric_derivative(spec, coords, h);
    let mut gamma = vec![vec![vec![0.0; d]; d]; d];
    for s in 0..d {
        for mu in 0..d {
            for nu in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += 0.5 * ginv[(s, l)] * (dg[mu][(nu, l)] + dg[nu][(mu, l)] - dg[l][(mu, nu)]);
                }
                gamma[s][mu][nu] = acc;
            }
        }
    }
    gamma
}

fn closed_form_gamma(spec: &MetricSpec, coords: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let d = spec.dim();
    let g = spec.christoffels_at(&AmbientPoint { coords: coords.to_vec() }).unwrap();
    (0..d)
        .map(|s| (0..d).map(|mu| (0..d).map(|nu| g.get(s, mu, nu)).collect()).collect())
        .collect()
}

/// `Ric_{σν} = R^ρ_{σρν}` with
/// `R^ρ_{σμν} = ∂_μΓ^ρ_{νσ} − ∂_νΓ^ρ_{μσ} + Γ^ρ_{μλ}Γ^λ_{νσ} − Γ^ρ_{νλ}Γ^λ_{μσ}`,
/// derivatives of the Christoffels by central differences.
pub fn ricci_by_contraction(spec: &MetricSpec, coords: &[f64], h: f64) -> DMatrix<f64> {
    let d = spec.dim();
    let gamma = closed_form_gamma(spec, coords);
    let dgamma: Vec<Vec<Vec<Vec<f64>>>> = (0..d)
        .map(|k| {
            let p = closed_form_gamma(spec, &shifted(coords, k, h));
            let m = closed_form_gamma(spec, &shifted(coords, k, -h));
            (0..d)
                .map(|s| {
                    (0..d)
                        .map(|mu| (0..d).map(|nu| (p[s][mu][nu] - m[s][mu][nu]) / (2.0 * h)).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let riemann = |rho: usize, sigma: usize, mu: usize, nu: usize| {
        let mut r = dgamma[mu][rho][nu][sigma] - dgamma[nu][rho][mu][sigma];
        for l in 0..d {
            r += gamma[rho][mu][l] * gamma[l][nu][sigma] - gamma[rho][nu][l] * gamma[l][mu][sigma];
        }
        r
    };
    DMatrix::from_fn(d, d, |sigma, nu| (0..d).map(|rho| riemann(rho, sigma, rho, nu)).sum())
}

pub fn random_point(rng: &mut impl Rng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-half_width..half_width)).collect()
}
