//! Minimax-MSE sensitivity, worst-case bias, the one-step estimator and the
//! bias-aware confidence interval.
//!
//! Quantities on the `√n` scale (worst-case bias `B`, variance `V`, MSE) are
//! converted to the parameter scale only when an estimate is reported:
//! `se = √(V/n)` and the interval half-width is `CV_α(B/√V)·√V/√n`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::glm::{fit_network, Family, FitOptions, FitResult};
use crate::linalg::{spd_solve, sup_norm, sym_rcond};
use crate::model::{BipartiteNetwork, Link, TargetFunctional, TargetKind, Theta};
use crate::moments::MomentComponents;
use crate::sieve::{regressor_basis, SieveBasis, SieveSpec};

/// How the critical value treats the bias-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    /// `1−α` quantile of `|N(t, 1)|`.
    #[default]
    Folded,
    /// `1−α` quantile of `N(t, 1)`, i.e. `t + z_{1−α}`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateOptions {
    pub alpha: f64,
    /// Link in the one-step moment `Σ (Y − link(R'θ̂)) H`.
    pub moment_link: Link,
    pub cv_mode: CvMode,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            moment_link: Link::Exp,
            cv_mode: CvMode::Folded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustEstimate {
    pub psi_hat: f64,
    pub psi_plugin: f64,
    pub adjustment: f64,
    pub kappa: Vec<f64>,
    /// `√(V̂/n)`.
    pub se: f64,
    /// `V̂ = Σ̂_γ + 2Σ̂_{H,γ}'κ + κ'Σ̂_Hκ` on the `√n` scale.
    pub v_hat: f64,
    /// `B̂(κ)/√n`.
    pub worst_bias: f64,
    /// `√MSE_H(κ)` on the `√n` scale.
    pub wc_rmse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub alpha: f64,
    pub sigma_bar_sq: f64,
    /// Gradient sup-norm of the initial fit.
    pub init_grad_norm: f64,
}

impl RobustEstimate {
    pub fn ci_length(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }
    pub fn covers(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

/// Minimizer of the worst-case MSE subject to `Ĝ'κ = Γ̂`.
pub fn kappa_star(c: &MomentComponents) -> Result<DVector<f64>> {
    let k = c.k_n();
    let a = spd_solve(&c.phi1, &DMatrix::from_column_slice(k, 1, c.phi2.as_slice()))?;
    let b = spd_solve(&c.phi1, &c.g_hat)?;
    let gtb = c.g_hat.transpose() * &b;
    if !(sym_rcond(&gtb) > 1e-14) {
        return Err(Error::Identification(
            "G' Phi1^-1 G is singular; the sieve may have fewer functions than regressors or be collinear".into(),
        ));
    }
    let rhs = c.g_hat.transpose() * &a + &c.gamma_hat;
    let lambda = gtb
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Identification("G' Phi1^-1 G is singular".into()))?;
    let kappa = DVector::from_column_slice((&b * lambda - a).as_slice());
    let resid = c.g_hat.transpose() * &kappa - &c.gamma_hat;
    let tol = 1e-8 * sup_norm(c.gamma_hat.as_slice()).max(1.0);
    if !(resid.amax() <= tol) {
        return Err(Error::Numeric(format!(
            "regularity residual {:e} exceeds {tol:e}",
            resid.amax()
        )));
    }
    Ok(kappa)
}

/// `κ'B̂_Hκ − 2B̂_{H,γ}'κ + B̂_γ` before scaling by `σ̄²`.
fn bias_quadratic(kappa: &DVector<f64>, c: &MomentComponents) -> f64 {
    (kappa.transpose() * &c.b_h * kappa)[(0, 0)] - 2.0 * c.b_h_gamma.dot(kappa) + c.b_gamma
}

/// `B(κ) = √(max(0, σ̄²(κ'B̂_Hκ − 2B̂_{H,γ}'κ + B̂_γ)))`.
pub fn worst_case_bias(kappa: &DVector<f64>, c: &MomentComponents) -> f64 {
    let q = c.sigma_bar_sq * bias_quadratic(kappa, c);
    if q < 0.0 {
        log::debug!("worst-case bias quadratic {q:e} clamped at zero");
    }
    q.max(0.0).sqrt()
}

/// `Σ̂_γ + 2Σ̂_{H,γ}'κ + κ'Σ̂_Hκ`.
pub fn variance(kappa: &DVector<f64>, c: &MomentComponents) -> f64 {
    c.sigma_gamma + 2.0 * c.sigma_h_gamma.dot(kappa) + (kappa.transpose() * &c.sigma_h * kappa)[(0, 0)]
}

/// Worst-case MSE `B(κ)² + V(κ)`.
pub fn mse_h(kappa: &DVector<f64>, c: &MomentComponents) -> f64 {
    worst_case_bias(kappa, c).powi(2) + variance(kappa, c)
}

fn std_normal() -> Normal {
    Normal::standard()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `1−α` quantile of `|N(t, 1)|`, by bisection on `[0, t + 10]`.
pub fn cv_alpha(t: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !t.is_finite() {
        return Err(Error::Numeric(format!("critical value argument {t} is not finite")));
    }
    let t = t.abs();
    let nd = std_normal();
    let f = |c: f64| nd.cdf(c - t) - nd.cdf(-c - t) - (1.0 - alpha);
    let (mut lo, mut hi) = (0.0, t + 10.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `t + z_{1−α}`.
pub fn cv_alpha_literal(t: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(t + std_normal().inverse_cdf(1.0 - alpha))
}

pub fn critical_value(t: f64, alpha: f64, mode: CvMode) -> Result<f64> {
    match mode {
        CvMode::Folded => cv_alpha(t, alpha),
        CvMode::Literal => cv_alpha_literal(t, alpha),
    }
}

/// Interval `ψ ± CV_α(B/√V)·√V/√n` given `√n`-scale bias and variance.
pub fn bias_aware_ci(
    psi: f64,
    bias: f64,
    v_hat: f64,
    n: usize,
    alpha: f64,
    mode: CvMode,
) -> Result<(f64, f64)> {
    if !(v_hat > 0.0) || !v_hat.is_finite() {
        return Err(Error::Numeric(format!("estimated variance {v_hat:e} is not positive")));
    }
    let sv = v_hat.sqrt();
    let half = critical_value(bias / sv, alpha, mode)? * sv / (n as f64).sqrt();
    Ok((psi - half, psi + half))
}

pub(crate) fn sample_mean_gamma(net: &BipartiteNetwork, theta: &Theta, target: &TargetFunctional) -> f64 {
    let mut s = 0.0;
    for i in 0..net.n_agents() {
        for j in 0..net.n_projects() {
            s += target.eval(&net.dyad(i, j), 0.0, theta);
        }
    }
    s / net.n_dyads() as f64
}

/// `n/(NM) Σ (Y − link(R'θ̂)) H`.
pub fn scaled_moment(
    net: &BipartiteNetwork,
    theta: &Theta,
    sieve: &SieveBasis,
    link: Link,
) -> DVector<f64> {
    let k = sieve.dim();
    let mut m = vec![0.0; k];
    for i in 0..net.n_agents() {
        for j in 0..net.n_projects() {
            let t = i * net.n_projects() + j;
            let r = net.y(i, j) as f64 - link.apply(theta.index(net.z(i, j)));
            for (a, h) in sieve.row(t).iter().enumerate() {
                m[a] += r * h;
            }
        }
    }
    DVector::from_vec(m) * (net.n() as f64 / net.n_dyads() as f64)
}

pub(crate) fn assemble(
    psi_plugin: f64,
    adjustment: f64,
    kappa: &DVector<f64>,
    c: &MomentComponents,
    opts: &EstimateOptions,
) -> Result<RobustEstimate> {
    let b = worst_case_bias(kappa, c);
    let v = variance(kappa, c);
    let psi_hat = psi_plugin + adjustment;
    let (ci_lo, ci_hi) = bias_aware_ci(psi_hat, b, v, c.n, opts.alpha, opts.cv_mode)?;
    let rn = (c.n as f64).sqrt();
    Ok(RobustEstimate {
        psi_hat,
        psi_plugin,
        adjustment,
        kappa: kappa.as_slice().to_vec(),
        se: (v / c.n as f64).sqrt(),
        v_hat: v,
        worst_bias: b / rn,
        wc_rmse: (b * b + v).sqrt(),
        ci_lo,
        ci_hi,
        alpha: opts.alpha,
        sigma_bar_sq: c.sigma_bar_sq,
        init_grad_norm: f64::NAN,
    })
}

/// One-step estimate with the optimal sensitivity.
pub fn one_step(
    net: &BipartiteNetwork,
    theta: &Theta,
    sieve: &SieveBasis,
    target: &TargetFunctional,
    c: &MomentComponents,
    opts: &EstimateOptions,
) -> Result<RobustEstimate> {
    let kappa = kappa_star(c)?;
    one_step_with_kappa(net, theta, sieve, target, c, &kappa, opts)
}

/// One-step estimate with a caller-supplied sensitivity.
pub fn one_step_with_kappa(
    net: &BipartiteNetwork,
    theta: &Theta,
    sieve: &SieveBasis,
    target: &TargetFunctional,
    c: &MomentComponents,
    kappa: &DVector<f64>,
    opts: &EstimateOptions,
) -> Result<RobustEstimate> {
    check_alpha(opts.alpha)?;
    let plug = sample_mean_gamma(net, theta, target);
    let adj = kappa.dot(&scaled_moment(net, theta, sieve, opts.moment_link));
    assemble(plug, adj, kappa, c, opts)
}

/// `κ_F = (n·I(θ̂))^{-1} Γ̂`: the sensitivity implied by a GLM plug-in, where
/// `I` is the negative Hessian of the averaged log-likelihood.
pub fn plugin_kappa(fit: &FitResult, c: &MomentComponents) -> Result<DVector<f64>> {
    let info = &fit.neg_hessian * c.n as f64;
    let k = spd_solve(&info, &DMatrix::from_column_slice(c.d_r(), 1, c.gamma_hat.as_slice()))?;
    Ok(DVector::from_column_slice(k.as_slice()))
}

/// Plug-in estimate `mean γ(D, 0, θ̂)` with its worst-case MSE computed on
/// the regressor moments (`F = R`).
pub fn plugin_estimate(
    net: &BipartiteNetwork,
    fit: &FitResult,
    target: &TargetFunctional,
    sigma_bar_sq: f64,
    opts: &EstimateOptions,
) -> Result<RobustEstimate> {
    check_alpha(opts.alpha)?;
    let f = regressor_basis(net);
    let c = MomentComponents::estimate(net, &fit.theta, &f, target, sigma_bar_sq)?;
    let kappa = plugin_kappa(fit, &c)?;
    let plug = sample_mean_gamma(net, &fit.theta, target);
    let mut est = assemble(plug, 0.0, &kappa, &c, opts)?;
    est.init_grad_norm = fit.grad_norm;
    Ok(est)
}

/// The four estimators compared in the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    RobustLogisticInit,
    RobustPoissonInit,
    PluginLogistic,
    PluginPoisson,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::RobustLogisticInit,
        Estimator::RobustPoissonInit,
        Estimator::PluginLogistic,
        Estimator::PluginPoisson,
    ];

    pub fn family(self) -> Family {
        match self {
            Estimator::RobustLogisticInit | Estimator::PluginLogistic => Family::Logistic,
            Estimator::RobustPoissonInit | Estimator::PluginPoisson => Family::Poisson,
        }
    }

    pub fn is_robust(self) -> bool {
        matches!(self, Estimator::RobustLogisticInit | Estimator::RobustPoissonInit)
    }

    /// Short label used in file names and reports.
    pub fn short_name(self) -> &'static str {
        match self {
            Estimator::RobustLogisticInit => "robust",
            Estimator::RobustPoissonInit => "robust_poisson",
            Estimator::PluginLogistic => "plugin_logit",
            Estimator::PluginPoisson => "plugin_poisson",
        }
    }
}

/// Fit the initial estimator and produce the requested estimate.
pub fn estimate(
    net: &BipartiteNetwork,
    estimator: Estimator,
    kind: TargetKind,
    sieve: &SieveSpec,
    sigma_bar_sq: f64,
    opts: &EstimateOptions,
) -> Result<RobustEstimate> {
    let fit = fit_network(net, estimator.family(), &FitOptions::default())?;
    estimate_from_fit(net, &fit, estimator, kind, sieve, sigma_bar_sq, opts)
}

pub fn estimate_from_fit(
    net: &BipartiteNetwork,
    fit: &FitResult,
    estimator: Estimator,
    kind: TargetKind,
    sieve: &SieveSpec,
    sigma_bar_sq: f64,
    opts: &EstimateOptions,
) -> Result<RobustEstimate> {
    let target = TargetFunctional::for_network(kind, net)?;
    if estimator.is_robust() {
        let h = sieve.build(net)?;
        let c = MomentComponents::estimate(net, &fit.theta, &h, &target, sigma_bar_sq)?;
        let mut est = one_step(net, &fit.theta, &h, &target, &c, opts)?;
        est.init_grad_norm = fit.grad_norm;
        Ok(est)
    } else {
        plugin_estimate(net, fit, &target, sigma_bar_sq, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Synthetic components with Φ₁ = Σ_H + σ̄²B_H PD.
    fn random_components(seed: u64, k: usize, d: usize, sbar: f64) -> MomentComponents {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rnd = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let a = rnd(k, k);
        let sigma_h = &a * a.transpose() + DMatrix::identity(k, k) * 0.1;
        let b = rnd(k, k);
        let b_h = &b * b.transpose();
        let g_hat = rnd(k, d);
        let gamma_hat = DVector::from_column_slice(rnd(d, 1).as_slice());
        let sigma_h_gamma = DVector::from_column_slice(rnd(k, 1).as_slice());
        let b_h_gamma = DVector::from_column_slice(rnd(k, 1).as_slice());
        let mut c = MomentComponents {
            g_hat,
            gamma_hat,
            b_h,
            b_h_gamma,
            b_gamma: 3.0,
            sigma_h,
            sigma_h_gamma,
            sigma_gamma: 5.0,
            phi_n: 0.5,
            sigma_bar_sq: 0.0,
            phi1: DMatrix::zeros(0, 0),
            phi2: DVector::zeros(0),
            phi1_floored: false,
            n: 200,
        };
        c.set_sigma_bar_sq(sbar).unwrap();
        c
    }

    /// Null-space basis of G' via the SVD of G.
    fn null_space(g: &DMatrix<f64>) -> DMatrix<f64> {
        let (k, d) = g.shape();
        let full = {
            let mut m = DMatrix::zeros(k, k);
            m.view_mut((0, 0), (k, d)).copy_from(g);
            m
        };
        let svd = full.svd(true, false);
        let u = svd.u.unwrap();
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        DMatrix::from_columns(&idx[d..].iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>())
    }

    #[test]
    fn square_g_collapses_to_inverse_transpose() {
        let c = random_components(1, 2, 2, 0.7);
        let k = kappa_star(&c).unwrap();
        let direct = c.g_hat.transpose().lu().solve(&c.gamma_hat).unwrap();
        assert!((k - direct).amax() < 1e-10);
    }

    #[test]
    fn gls_form_when_phi2_vanishes() {
        let mut c = random_components(2, 5, 2, 0.0);
        c.sigma_h_gamma.fill(0.0);
        c.set_sigma_bar_sq(0.0).unwrap();
        let k = kappa_star(&c).unwrap();
        let pinv_g = c.phi1.clone().cholesky().unwrap().solve(&c.g_hat);
        let m = c.g_hat.transpose() * &pinv_g;
        let want = pinv_g * m.lu().solve(&c.gamma_hat).unwrap();
        assert!((k - want).amax() < 1e-10);
    }

    #[test]
    fn minimax_against_feasible_perturbations() {
        for seed in 0..5 {
            let c = random_components(10 + seed, 6, 2, 1.3);
            let k = kappa_star(&c).unwrap();
            assert!((c.g_hat.transpose() * &k - &c.gamma_hat).amax() <= 1e-8);
            let best = mse_h(&k, &c);
            let ns = null_space(&c.g_hat);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let w = DVector::from_fn(ns.ncols(), |_, _| rng.random_range(-1.0..1.0));
                let kp = &k + &ns * w;
                assert!(best <= mse_h(&kp, &c) + 1e-12 * best.abs().max(1.0));
            }
        }
    }

    #[test]
    fn collinear_sieve_is_identification_error() {
        let mut c = random_components(3, 3, 2, 0.5);
        c.g_hat.fill(0.0);
        assert!(matches!(kappa_star(&c), Err(Error::Identification(_))));
    }

    #[test]
    fn bias_formulas() {
        let mut c = random_components(4, 4, 2, 0.0);
        let k = DVector::from_vec(vec![0.3, -0.2, 0.5, 1.0]);
        assert_eq!(worst_case_bias(&k, &c), 0.0);
        c.b_h_gamma.fill(0.0);
        c.b_gamma = 0.0;
        c.set_sigma_bar_sq(2.0).unwrap();
        let want = (2.0f64).sqrt() * (k.transpose() * &c.b_h * &k)[(0, 0)].sqrt();
        assert_abs_diff_eq!(worst_case_bias(&k, &c), want, epsilon = 1e-12);
        let c = random_components(5, 4, 2, 1.5);
        let zero = DVector::zeros(4);
        assert_abs_diff_eq!(mse_h(&zero, &c), 1.5 * 3.0 + 5.0, epsilon = 1e-12);
    }

    #[test]
    fn bias_matches_naive_loops() {
        let c = random_components(6, 4, 3, 0.8);
        let k = DVector::from_vec(vec![0.1, 0.7, -0.4, 0.2]);
        let mut q = c.b_gamma;
        for a in 0..4 {
            q -= 2.0 * c.b_h_gamma[a] * k[a];
            for b in 0..4 {
                q += k[a] * c.b_h[(a, b)] * k[b];
            }
        }
        assert_abs_diff_eq!(worst_case_bias(&k, &c), (0.8 * q).max(0.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn critical_values() {
        assert_abs_diff_eq!(cv_alpha(0.0, 0.05).unwrap(), 1.959964, epsilon = 1e-6);
        let c1 = cv_alpha(1.0, 0.05).unwrap();
        assert!((c1 - 2.65).abs() < 0.01);
        assert!((cv_alpha(6.0, 0.05).unwrap() - 7.644854).abs() < 1e-3);
        assert_eq!(cv_alpha(-1.0, 0.05).unwrap(), c1);
        assert!(cv_alpha(1.0, 0.0).is_err());
        assert!(cv_alpha(1.0, 1.0).is_err());
        assert_abs_diff_eq!(cv_alpha_literal(1.0, 0.05).unwrap(), 2.644854, epsilon = 1e-6);
    }

    #[test]
    fn zero_bias_ci_is_classical() {
        let (lo, hi) = bias_aware_ci(1.0, 0.0, 4.0, 100, 0.05, CvMode::Folded).unwrap();
        assert_abs_diff_eq!(hi - 1.0, 1.959964 * 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(1.0 - lo, hi - 1.0, epsilon = 1e-14);
        assert!(bias_aware_ci(1.0, 0.0, 0.0, 100, 0.05, CvMode::Folded).is_err());
    }

    #[test]
    fn monotone_in_sigma_bar() {
        let mut prev = 0.0;
        for s in [1.0, 2.0, 4.0] {
            let c = random_components(7, 5, 2, s);
            let k = kappa_star(&c).unwrap();
            let (lo, hi) = bias_aware_ci(
                0.0,
                worst_case_bias(&k, &c),
                variance(&k, &c),
                c.n,
                0.05,
                CvMode::Folded,
            )
            .unwrap();
            assert!(hi - lo >= prev - 1e-12);
            prev = hi - lo;
        }
    }

    #[test]
    fn estimator_names() {
        let e: Estimator = serde_json::from_str("\"plugin_poisson\"").unwrap();
        assert_eq!(e, Estimator::PluginPoisson);
        assert_eq!(Estimator::RobustLogisticInit.short_name(), "robust");
        assert_eq!(
            serde_json::to_string(&Estimator::RobustPoissonInit).unwrap(),
            "\"robust_poisson_init\""
        );
    }
}
