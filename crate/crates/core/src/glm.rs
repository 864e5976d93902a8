//! Initial estimators: logistic MLE and Poisson pseudo-MLE on the dyad panel.
//!
//! Both maximize the averaged log-likelihood by Newton–Raphson with
//! step-halving. Accumulation runs over dyads in a fixed order, so a fit is
//! a deterministic function of its inputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sup_norm, sym_rcond};
use crate::model::{logistic, BipartiteNetwork, Theta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Sup-norm tolerance on the gradient of the averaged log-likelihood.
    pub tol: f64,
    pub max_halvings: usize,
    /// Ridge added to the information matrix only when it is singular.
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
            max_halvings: 30,
            ridge: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub family: Family,
    pub theta: Theta,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Negative Hessian of the averaged log-likelihood at `theta`.
    pub neg_hessian: DMatrix<f64>,
    pub loglik: f64,
}

/// Row-major design `R = (1, Z)` of a network.
pub fn regressors(net: &BipartiteNetwork) -> Vec<f64> {
    let d_z = net.d_z();
    let mut x = Vec::with_capacity(net.n_dyads() * (d_z + 1));
    for z in net.z_features().chunks_exact(d_z) {
        x.push(1.0);
        x.extend_from_slice(z);
    }
    x
}

fn outcomes(net: &BipartiteNetwork) -> Vec<f64> {
    net.adjacency().iter().map(|&y| y as f64).collect()
}

pub fn fit_logistic(net: &BipartiteNetwork) -> Result<FitResult> {
    fit_network(net, Family::Logistic, &FitOptions::default())
}

pub fn fit_poisson(net: &BipartiteNetwork) -> Result<FitResult> {
    fit_network(net, Family::Poisson, &FitOptions::default())
}

pub fn fit_network(net: &BipartiteNetwork, family: Family, opts: &FitOptions) -> Result<FitResult> {
    fit_design(&outcomes(net), &regressors(net), net.d_r(), family, opts)
}

fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

/// Averaged log-likelihood at `coef`.
pub fn loglik(y: &[f64], x: &[f64], p: usize, family: Family, coef: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (yi, row) in y.iter().zip(x.chunks_exact(p)) {
        let s = dot(row, coef);
        ll += match family {
            Family::Logistic => yi * s - softplus(s),
            Family::Poisson => yi * s - s.exp(),
        };
    }
    ll / y.len() as f64
}

/// Averaged log-likelihood, its gradient and negative Hessian.
pub fn derivatives(
    y: &[f64],
    x: &[f64],
    p: usize,
    family: Family,
    coef: &[f64],
) -> (f64, Vec<f64>, DMatrix<f64>) {
    let mut ll = 0.0;
    let mut g = vec![0.0; p];
    let mut h = vec![0.0; p * p];
    for (yi, row) in y.iter().zip(x.chunks_exact(p)) {
        let s = dot(row, coef);
        let (l, mu, w) = match family {
            Family::Logistic => {
                let m = logistic(s);
                (yi * s - softplus(s), m, m * (1.0 - m))
            }
            Family::Poisson => {
                let m = s.exp();
                (yi * s - m, m, m)
            }
        };
        ll += l;
        let r = yi - mu;
        for a in 0..p {
            g[a] += r * row[a];
            let wa = w * row[a];
            for b in 0..=a {
                h[a * p + b] += wa * row[b];
            }
        }
    }
    let nobs = y.len() as f64;
    let mut hm = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..=a {
            hm[(a, b)] = h[a * p + b] / nobs;
            hm[(b, a)] = hm[(a, b)];
        }
    }
    g.iter_mut().for_each(|v| *v /= nobs);
    (ll / nobs, g, hm)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fit a GLM on a row-major design whose first column is the intercept.
pub fn fit_design(
    y: &[f64],
    x: &[f64],
    p: usize,
    family: Family,
    opts: &FitOptions,
) -> Result<FitResult> {
    let nobs = y.len();
    if nobs == 0 || x.len() != nobs * p || p == 0 {
        return Err(Error::Config("design and outcome dimensions disagree".into()));
    }
    let ybar = y.iter().sum::<f64>() / nobs as f64;
    match family {
        Family::Logistic if ybar <= 0.0 || ybar >= 1.0 => {
            return Err(Error::NonConvergence(format!(
                "outcome is constant (mean {ybar}); the logistic MLE does not exist (separation)"
            )))
        }
        Family::Poisson if ybar <= 0.0 => {
            return Err(Error::NonConvergence(
                "all outcomes are zero; the Poisson MLE diverges".into(),
            ))
        }
        _ => {}
    }

    let mut gram = DMatrix::zeros(p, p);
    for row in x.chunks_exact(p) {
        for a in 0..p {
            for b in 0..p {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    if sym_rcond(&gram) <= 1e-12 {
        return Err(Error::Singular(
            "regressor matrix does not have full column rank".into(),
        ));
    }
    let gram_scale = gram.amax() / nobs as f64;

    let mut coef = vec![0.0; p];
    coef[0] = match family {
        Family::Logistic => (ybar / (1.0 - ybar)).ln(),
        Family::Poisson => ybar.ln(),
    };

    let mut iterations = 0;
    loop {
        let (ll, g, neg_h) = derivatives(y, x, p, family, &coef);
        let grad_norm = sup_norm(&g);
        if grad_norm <= opts.tol {
            if neg_h.amax() < 1e-8 * gram_scale {
                return Err(Error::NonConvergence(
                    "information matrix vanished; data are (quasi-)separated".into(),
                ));
            }
            return Ok(FitResult {
                family,
                theta: Theta::from_slice(&coef)?,
                converged: true,
                iterations,
                grad_norm,
                neg_hessian: neg_h,
                loglik: ll,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence(format!(
                "gradient sup-norm {grad_norm:e} after {iterations} Newton steps"
            )));
        }
        iterations += 1;

        let gv = DVector::from_column_slice(&g);
        let step = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&gv),
            None => {
                log::warn!("singular information matrix; adding ridge {:e}", opts.ridge);
                let ridged = &neg_h + DMatrix::identity(p, p) * opts.ridge;
                ridged
                    .cholesky()
                    .ok_or_else(|| Error::Singular("information matrix is singular".into()))?
                    .solve(&gv)
            }
        };

        let slack = 1e-13 * (1.0 + ll.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = coef.iter().zip(step.iter()).map(|(c, s)| c + t * s).collect();
            let ll_c = loglik(y, x, p, family, &cand);
            if ll_c.is_finite() && ll_c >= ll - slack {
                coef = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence(format!(
                "no ascent after {} step halvings (gradient {grad_norm:e})",
                opts.max_halvings
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttributeNames, NetworkParts};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(seed: u64, n: usize, alpha: f64, beta: f64) -> BipartiteNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let adjacency = z
            .iter()
            .map(|&zv| (rng.random::<f64>() < logistic(alpha + beta * zv)) as u8)
            .collect();
        BipartiteNetwork::from_parts(NetworkParts {
            n_agents: n,
            n_projects: n,
            adjacency,
            d_z: 1,
            z_features: z,
            names: AttributeNames::default(),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn constant_outcome_is_separation() {
        let mut net = synthetic(1, 5, 0.0, 1.0);
        let parts = NetworkParts {
            n_agents: 5,
            n_projects: 5,
            adjacency: vec![0; 25],
            d_z: 1,
            z_features: net.z_features().to_vec(),
            ..Default::default()
        };
        net = BipartiteNetwork::from_parts(parts).unwrap();
        let e = fit_logistic(&net).unwrap_err();
        assert!(matches!(e, Error::NonConvergence(_)));
        assert!(e.to_string().contains("separation"));
        assert!(matches!(fit_poisson(&net), Err(Error::NonConvergence(_))));
    }

    #[test]
    fn perfect_separation_detected() {
        let z: Vec<f64> = (0..16).map(|t| t as f64 - 7.5).collect();
        let adjacency = z.iter().map(|&v| (v > 0.0) as u8).collect();
        let net = BipartiteNetwork::from_parts(NetworkParts {
            n_agents: 4,
            n_projects: 4,
            adjacency,
            d_z: 1,
            z_features: z,
            ..Default::default()
        })
        .unwrap();
        assert!(matches!(fit_logistic(&net), Err(Error::NonConvergence(_))));
    }

    #[test]
    fn rank_deficiency_is_singular() {
        let net = BipartiteNetwork::from_parts(NetworkParts {
            n_agents: 3,
            n_projects: 3,
            adjacency: vec![0, 1, 0, 0, 0, 1, 1, 0, 0],
            d_z: 1,
            z_features: vec![2.0; 9],
            ..Default::default()
        })
        .unwrap();
        assert!(matches!(fit_logistic(&net), Err(Error::Singular(_))));
    }

    #[test]
    fn single_dyad_intercept_poisson() {
        let f = fit_design(&[1.0], &[1.0], 1, Family::Poisson, &FitOptions::default()).unwrap();
        assert_eq!(f.theta.alpha_n, 0.0);
    }

    #[test]
    fn converges_with_small_gradient_and_pd_hessian() {
        let net = synthetic(7, 60, -2.0, 0.8);
        for fam in [Family::Logistic, Family::Poisson] {
            let f = fit_network(&net, fam, &FitOptions::default()).unwrap();
            assert!(f.converged && f.grad_norm <= 1e-10);
            assert!(f.neg_hessian.clone().cholesky().is_some());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = synthetic(11, 40, -1.5, 0.5);
        let y = outcomes(&net);
        let x = regressors(&net);
        for fam in [Family::Logistic, Family::Poisson] {
            let coef = [-1.2, 0.3];
            let (_, g, _) = derivatives(&y, &x, 2, fam, &coef);
            for k in 0..2 {
                let mut c = coef;
                let fd = crate::model::five_point(
                    |v| {
                        c[k] = v;
                        loglik(&y, &x, 2, fam, &c)
                    },
                    coef[k],
                );
                assert!((g[k] - fd).abs() <= 1e-6 * g[k].abs().max(1e-6), "{fam:?} {k}");
            }
        }
    }

    #[test]
    fn scaling_features_rescales_slope() {
        let net = synthetic(3, 50, -2.5, 1.1);
        let a = fit_logistic(&net).unwrap();
        let c = 2.5;
        let b = fit_logistic(&net.with_scaled_features(c).unwrap()).unwrap();
        assert!((b.theta.beta[0] * c - a.theta.beta[0]).abs() < 1e-8);
        assert!((b.theta.alpha_n - a.theta.alpha_n).abs() < 1e-8);
        for (za, zb) in net.z_features().iter().zip(net.with_scaled_features(c).unwrap().z_features()) {
            let pa = logistic(a.theta.index(&[*za]));
            let pb = logistic(b.theta.index(&[*zb]));
            assert!((pa - pb).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic() {
        let net = synthetic(5, 30, -1.0, 0.4);
        assert_eq!(fit_logistic(&net).unwrap(), fit_logistic(&net).unwrap());
    }
}
