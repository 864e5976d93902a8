//! Sample analogues of the bias and variance components evaluated at the
//! initial estimate.
//!
//! Variance components are built on the joint score `c_ij = (s_Y,ij H_ij, s_γ,ij)`.
//! Pairwise sums over dyads sharing an agent (or a project) use the identity
//! `Σ_{j≠k} a_j a_k' = (Σ_j a_j)(Σ_j a_j)' − Σ_j a_j a_j'`, which keeps the cost
//! linear in the number of dyads.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{floor_eigenvalues, symmetrize};
use crate::model::{BipartiteNetwork, TargetFunctional, Theta};
use crate::sieve::SieveBasis;

/// Relative eigenvalue floor applied to `Φ̂₁` before inversion.
pub const PHI1_FLOOR: f64 = 1e-8;

/// Dyad-level scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub n_agents: usize,
    pub n_projects: usize,
    /// `n (Y_ij − exp(R_ij'θ̂))`.
    pub s_y: Vec<f64>,
    /// `γ(D_ij, 0, θ̂)` centered at its sample mean.
    pub s_gamma: Vec<f64>,
}

pub fn compute_scores(
    net: &BipartiteNetwork,
    theta: &Theta,
    target: &TargetFunctional,
) -> Scores {
    let n = net.n() as f64;
    let mut s_y = Vec::with_capacity(net.n_dyads());
    let mut gam = Vec::with_capacity(net.n_dyads());
    for i in 0..net.n_agents() {
        for j in 0..net.n_projects() {
            let d = net.dyad(i, j);
            s_y.push(n * (net.y(i, j) as f64 - theta.index(d.z).exp()));
            gam.push(target.eval(&d, 0.0, theta));
        }
    }
    let mean = gam.iter().sum::<f64>() / gam.len() as f64;
    gam.iter_mut().for_each(|g| *g -= mean);
    Scores {
        n_agents: net.n_agents(),
        n_projects: net.n_projects(),
        s_y,
        s_gamma: gam,
    }
}

/// `Ĝ`, `Γ̂`, `B̂_H`, `B̂_{H,γ}`, `B̂_γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTerms {
    pub g_hat: DMatrix<f64>,
    pub gamma_hat: DVector<f64>,
    pub b_h: DMatrix<f64>,
    pub b_h_gamma: DVector<f64>,
    pub b_gamma: f64,
}

pub fn estimate_bias_terms(
    net: &BipartiteNetwork,
    theta: &Theta,
    sieve: &SieveBasis,
    target: &TargetFunctional,
) -> Result<BiasTerms> {
    let k = sieve.dim();
    let d = net.d_r();
    if sieve.n_dyads() != net.n_dyads() {
        return Err(Error::Config("sieve and network sizes differ".into()));
    }
    let n = net.n() as f64;
    let mut g = vec![0.0; k * d];
    let mut gam = vec![0.0; d];
    let mut bh = vec![0.0; k * k];
    let mut bhg = vec![0.0; k];
    let mut bg = 0.0;
    let mut dth = vec![0.0; d];
    let mut r = vec![0.0; d];
    r[0] = 1.0;
    for i in 0..net.n_agents() {
        for j in 0..net.n_projects() {
            let dy = net.dyad(i, j);
            let e = theta.index(dy.z).exp();
            if !(e <= 1e300) {
                return Err(Error::Numeric(format!(
                    "exp(R'theta) overflows at dyad ({i}, {j})"
                )));
            }
            let h = sieve.row(i * net.n_projects() + j);
            let w = n * e;
            r[1..].copy_from_slice(dy.z);
            target.d_theta_into(&dy, theta, &mut dth);
            let dv = target.d_v(&dy, theta);
            for a in 0..k {
                let wh = w * h[a];
                for b in 0..d {
                    g[a * d + b] += wh * r[b];
                }
                for b in 0..=a {
                    bh[a * k + b] += wh * w * h[b];
                }
                bhg[a] += wh * dv;
            }
            for b in 0..d {
                gam[b] += dth[b];
            }
            bg += dv * dv;
        }
    }
    let nd = net.n_dyads() as f64;
    let mut b_h = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..=a {
            b_h[(a, b)] = bh[a * k + b] / nd;
            b_h[(b, a)] = b_h[(a, b)];
        }
    }
    Ok(BiasTerms {
        g_hat: DMatrix::from_row_slice(k, d, &g) / nd,
        gamma_hat: DVector::from_vec(gam) / nd,
        b_h,
        b_h_gamma: DVector::from_vec(bhg) / nd,
        b_gamma: bg / nd,
    })
}

/// `Σ̂ₙ` split into its blocks, plus the three pieces of its decomposition
/// over the joint score (last row/column is the `γ` score).
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEstimate {
    pub sigma_h: DMatrix<f64>,
    pub sigma_h_gamma: DVector<f64>,
    pub sigma_gamma: f64,
    pub sigma_a: DMatrix<f64>,
    pub sigma_p: DMatrix<f64>,
    pub sigma_2: DMatrix<f64>,
}

pub fn estimate_sigma(scores: &Scores, sieve: &SieveBasis, phi_n: f64) -> Result<SigmaEstimate> {
    if !(phi_n > 0.0 && phi_n < 1.0) {
        return Err(Error::Config(format!("phi_n must lie in (0, 1), got {phi_n}")));
    }
    let (nn, mm) = (scores.n_agents, scores.n_projects);
    let k = sieve.dim();
    let q = k + 1;
    if sieve.n_dyads() != nn * mm || scores.s_y.len() != nn * mm {
        return Err(Error::Config("scores and sieve sizes differ".into()));
    }
    let mut diag = vec![0.0; q * q];
    let mut rows = vec![0.0; q * q];
    let mut cols = vec![0.0; mm * q];
    let mut c = vec![0.0; q];
    let mut rsum = vec![0.0; q];
    for i in 0..nn {
        rsum.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..mm {
            let t = i * mm + j;
            let h = sieve.row(t);
            for a in 0..k {
                c[a] = scores.s_y[t] * h[a];
            }
            c[k] = scores.s_gamma[t];
            for a in 0..q {
                rsum[a] += c[a];
                cols[j * q + a] += c[a];
                for b in 0..=a {
                    diag[a * q + b] += c[a] * c[b];
                }
            }
        }
        for a in 0..q {
            for b in 0..=a {
                rows[a * q + b] += rsum[a] * rsum[b];
            }
        }
    }
    let mut colouter = vec![0.0; q * q];
    for cj in cols.chunks_exact(q) {
        for a in 0..q {
            for b in 0..=a {
                colouter[a * q + b] += cj[a] * cj[b];
            }
        }
    }
    let (nf, mf) = (nn as f64, mm as f64);
    let n = nf + mf;
    let lower = |buf: &[f64], scale: f64| {
        let mut m = DMatrix::zeros(q, q);
        for a in 0..q {
            for b in 0..=a {
                m[(a, b)] = buf[a * q + b] * scale;
                m[(b, a)] = m[(a, b)];
            }
        }
        m
    };
    let d = lower(&diag, 1.0);
    let sigma_a = (lower(&rows, 1.0) - &d) / (nf * mf * (mf - 1.0));
    let sigma_p = (lower(&colouter, 1.0) - &d) / (mf * nf * (nf - 1.0));
    let mut sigma_2 = DMatrix::zeros(q, q);
    for a in 0..k {
        for b in 0..k {
            sigma_2[(a, b)] =
                (d[(a, b)] / (nf * mf) - sigma_a[(a, b)] - sigma_p[(a, b)]) / n;
        }
    }
    let mut total = &sigma_a / (1.0 - phi_n) + &sigma_p / phi_n
        + &sigma_2 / (phi_n * (1.0 - phi_n));
    symmetrize(&mut total);
    Ok(SigmaEstimate {
        sigma_h: total.view((0, 0), (k, k)).into_owned(),
        sigma_h_gamma: total.view((0, k), (k, 1)).column(0).into_owned(),
        sigma_gamma: total[(k, k)],
        sigma_a,
        sigma_p,
        sigma_2,
    })
}

/// Every estimated component needed by the robust estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentComponents {
    pub g_hat: DMatrix<f64>,
    pub gamma_hat: DVector<f64>,
    pub b_h: DMatrix<f64>,
    pub b_h_gamma: DVector<f64>,
    pub b_gamma: f64,
    pub sigma_h: DMatrix<f64>,
    pub sigma_h_gamma: DVector<f64>,
    pub sigma_gamma: f64,
    pub phi_n: f64,
    pub sigma_bar_sq: f64,
    /// `Σ̂_H + σ̄² B̂_H`, eigenvalue-floored if necessary.
    pub phi1: DMatrix<f64>,
    /// `Σ̂_{H,γ} − σ̄² B̂_{H,γ}`.
    pub phi2: DVector<f64>,
    pub phi1_floored: bool,
    /// Total node count `n`.
    pub n: usize,
}

impl MomentComponents {
    pub fn estimate(
        net: &BipartiteNetwork,
        theta: &Theta,
        sieve: &SieveBasis,
        target: &TargetFunctional,
        sigma_bar_sq: f64,
    ) -> Result<Self> {
        let bias = estimate_bias_terms(net, theta, sieve, target)?;
        let scores = compute_scores(net, theta, target);
        let sigma = estimate_sigma(&scores, sieve, net.phi())?;
        Self::assemble(bias, sigma, net.phi(), net.n(), sigma_bar_sq)
    }

    pub fn assemble(
        bias: BiasTerms,
        sigma: SigmaEstimate,
        phi_n: f64,
        n: usize,
        sigma_bar_sq: f64,
    ) -> Result<Self> {
        let mut out = Self {
            g_hat: bias.g_hat,
            gamma_hat: bias.gamma_hat,
            b_h: bias.b_h,
            b_h_gamma: bias.b_h_gamma,
            b_gamma: bias.b_gamma,
            sigma_h: sigma.sigma_h,
            sigma_h_gamma: sigma.sigma_h_gamma,
            sigma_gamma: sigma.sigma_gamma,
            phi_n,
            sigma_bar_sq: 0.0,
            phi1: DMatrix::zeros(0, 0),
            phi2: DVector::zeros(0),
            phi1_floored: false,
            n,
        };
        out.set_sigma_bar_sq(sigma_bar_sq)?;
        Ok(out)
    }

    /// Recompute `Φ̂₁`, `Φ̂₂` for a different neighborhood size.
    pub fn set_sigma_bar_sq(&mut self, sigma_bar_sq: f64) -> Result<()> {
        if !(sigma_bar_sq >= 0.0) || !sigma_bar_sq.is_finite() {
            return Err(Error::Config(format!(
                "sigma_bar_sq must be finite and nonnegative, got {sigma_bar_sq}"
            )));
        }
        let mut phi1 = &self.sigma_h + &self.b_h * sigma_bar_sq;
        symmetrize(&mut phi1);
        let (phi1, floored) = floor_eigenvalues(&phi1, PHI1_FLOOR)?;
        if floored {
            log::warn!("Phi1 is not positive definite; eigenvalues floored at {PHI1_FLOOR:e} x max");
        }
        self.phi1 = phi1;
        self.phi1_floored = floored;
        self.phi2 = &self.sigma_h_gamma - &self.b_h_gamma * sigma_bar_sq;
        self.sigma_bar_sq = sigma_bar_sq;
        Ok(())
    }

    pub fn k_n(&self) -> usize {
        self.g_hat.nrows()
    }
    pub fn d_r(&self) -> usize {
        self.g_hat.ncols()
    }
}
