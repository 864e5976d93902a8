//! Simulated bipartite networks under three local-misspecification designs,
//! plus brute-force oracles for the true parameter and for `σ̄²`.
//!
//! Each network draws, in order: `log X_i`, `log W_j`, `log A_i`, `log B_j`,
//! the shocks `U_ij`, and finally the design noise. The noise is skipped
//! entirely when `σ² = 0`, so the three designs coincide there for a given
//! seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AttributeNames, BipartiteNetwork, Dyad, NetworkParts, TargetFunctional, TargetKind, Theta,
};

/// Mean and standard deviation of `log X_i` and `log W_j`.
pub const LOG_ATTR_MEAN: f64 = -0.25;
pub const LOG_ATTR_SD: f64 = 0.5;
/// Mean and standard deviation of `log A_i` and `log B_j`.
pub const LOG_EFFECT_MEAN: f64 = -1.0 / 12.0;
pub fn log_effect_sd() -> f64 {
    1.0 / 6f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    LatentHomophily,
    FunctionalForm,
    Semiparametric,
}

impl Design {
    pub const ALL: [Design; 3] = [
        Design::LatentHomophily,
        Design::FunctionalForm,
        Design::Semiparametric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Design::LatentHomophily => "latent_homophily",
            Design::FunctionalForm => "functional_form",
            Design::Semiparametric => "semiparametric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDesign {
    pub design: Design,
    pub sigma_sq: f64,
    /// `log α₀`.
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default = "default_beta0")]
    pub beta0: f64,
    pub n_agents: usize,
    pub n_projects: usize,
    #[serde(default)]
    pub seed: u64,
}

pub fn default_alpha0() -> f64 {
    2.56f64.ln()
}
pub fn default_beta0() -> f64 {
    4f64.ln()
}

impl SimulationDesign {
    pub fn new(design: Design, sigma_sq: f64, n_agents: usize, n_projects: usize, seed: u64) -> Self {
        Self {
            design,
            sigma_sq,
            alpha0: default_alpha0(),
            beta0: default_beta0(),
            n_agents,
            n_projects,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_sq >= 0.0) || !self.sigma_sq.is_finite() {
            return Err(Error::Config(format!(
                "sigma_sq must be finite and nonnegative, got {}",
                self.sigma_sq
            )));
        }
        if self.n_agents < 2 || self.n_projects < 2 {
            return Err(Error::Config("need N, M >= 2".into()));
        }
        if !self.alpha0.is_finite() || !self.beta0.is_finite() {
            return Err(Error::Config("alpha0 and beta0 must be finite".into()));
        }
        self.n_agents
            .checked_mul(self.n_projects)
            .ok_or_else(|| Error::Size(format!("{}x{} dyads overflow", self.n_agents, self.n_projects)))?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n_agents + self.n_projects
    }

    /// True index parameter `(log α₀ − log n, β₀)`.
    pub fn theta0(&self) -> Theta {
        Theta {
            alpha_n: self.alpha0 - (self.n() as f64).ln(),
            beta: vec![self.beta0],
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derived seed for replication `rep` of cell `cell`.
pub fn mix_seed(master: u64, cell: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ rep)
}

/// Node attributes and dyad features shared by the generator and the oracles.
struct Covariates {
    x: Vec<f64>,
    w: Vec<f64>,
    ln_x: Vec<f64>,
    ln_w: Vec<f64>,
    z: Vec<f64>,
    z_bar: f64,
}

fn draw_covariates(nn: usize, mm: usize, rng: &mut ChaCha8Rng) -> Covariates {
    let d = Normal::new(LOG_ATTR_MEAN, LOG_ATTR_SD).expect("valid normal");
    let x: Vec<f64> = (0..nn).map(|_| d.sample(rng).exp()).collect();
    let w: Vec<f64> = (0..mm).map(|_| d.sample(rng).exp()).collect();
    let ln_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ln_w: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    let mut z = Vec::with_capacity(nn * mm);
    for a in &ln_x {
        for b in &ln_w {
            z.push(a + b);
        }
    }
    let z_bar = z.iter().sum::<f64>() / z.len() as f64;
    Covariates {
        x,
        w,
        ln_x,
        ln_w,
        z,
        z_bar,
    }
}

/// Misspecification draws `v_ij`; empty when `σ = 0`.
fn draw_noise(design: Design, sigma: f64, cov: &Covariates, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if sigma <= 0.0 {
        return Vec::new();
    }
    let scale = 1.0 + sigma;
    match design {
        Design::LatentHomophily => {
            let node = |ln: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
                ln.iter()
                    .map(|l| {
                        let e: f64 = StandardNormal.sample(rng);
                        0.75 * l + 0.25 * (1.0 + sigma * e)
                    })
                    .collect()
            };
            let vi = node(&cov.ln_x, rng);
            let vj = node(&cov.ln_w, rng);
            let mut v = Vec::with_capacity(cov.z.len());
            for a in &vi {
                for b in &vj {
                    v.push(scale * cov.z_bar * a * b);
                }
            }
            v
        }
        Design::FunctionalForm => cov
            .z
            .iter()
            .map(|z| scale * cov.z_bar * (z * z + z * z * z))
            .collect(),
        Design::Semiparametric => cov
            .z
            .iter()
            .map(|z| {
                let e: f64 = StandardNormal.sample(rng);
                scale * (z + sigma * e)
            })
            .collect(),
    }
}

/// `E(v | X, W)` for every dyad of a covariate draw.
fn conditional_mean_noise(design: Design, sigma: f64, cov: &Covariates) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![0.0; cov.z.len()];
    }
    let scale = 1.0 + sigma;
    match design {
        Design::LatentHomophily => {
            let mut out = Vec::with_capacity(cov.z.len());
            for a in &cov.ln_x {
                for b in &cov.ln_w {
                    out.push(scale * cov.z_bar * (0.75 * a + 0.25) * (0.75 * b + 0.25));
                }
            }
            out
        }
        Design::FunctionalForm => cov
            .z
            .iter()
            .map(|z| scale * cov.z_bar * (z * z + z * z * z))
            .collect(),
        Design::Semiparametric => cov.z.iter().map(|z| scale * z).collect(),
    }
}

/// Draw one network from the design.
pub fn simulate_network(d: &SimulationDesign) -> Result<BipartiteNetwork> {
    d.validate()?;
    let (nn, mm) = (d.n_agents, d.n_projects);
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let cov = draw_covariates(nn, mm, &mut rng);
    let eff = Normal::new(LOG_EFFECT_MEAN, log_effect_sd()).expect("valid normal");
    let la: Vec<f64> = (0..nn).map(|_| eff.sample(&mut rng)).collect();
    let lb: Vec<f64> = (0..mm).map(|_| eff.sample(&mut rng)).collect();
    let u: Vec<f64> = (0..nn * mm).map(|_| Exp1.sample(&mut rng)).collect();
    let v = draw_noise(d.design, d.sigma_sq.sqrt(), &cov, &mut rng);

    let n = d.n() as f64;
    let base = d.alpha0 - n.ln();
    let rn = n.sqrt();
    let mut adjacency = Vec::with_capacity(nn * mm);
    for (i, &a) in la.iter().enumerate() {
        for (j, &b) in lb.iter().enumerate() {
            let t = i * mm + j;
            let mut index = base + cov.z[t] * d.beta0 + a + b;
            if !v.is_empty() {
                index += v[t] / rn;
            }
            adjacency.push((index + u[t] >= 0.0) as u8);
        }
    }
    BipartiteNetwork::from_parts(NetworkParts {
        n_agents: nn,
        n_projects: mm,
        adjacency,
        d_x: 1,
        x_attrs: cov.x,
        d_w: 1,
        w_attrs: cov.w,
        d_z: 1,
        z_features: cov.z,
        names: AttributeNames {
            x: vec!["x".into()],
            w: vec!["w".into()],
            z: vec!["log_xw".into()],
        },
    })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub se: f64,
    /// Number of whole-sample blocks averaged.
    pub blocks: usize,
}

const ORACLE_STREAM: u64 = 0x6f72_6163_6c65;
const SIGMA_STREAM: u64 = 0x7369_676d_6162;

fn block_count(d: &SimulationDesign, draws: u64) -> usize {
    let per = (d.n_agents * d.n_projects) as u64;
    (draws.div_ceil(per)).max(2) as usize
}

/// True `Ψ₀ = E ∫ γ(D, n^{-1/2} v, θ₀) π(v) dv`, simulated in whole-sample
/// blocks of `N × M` dyads (the design noise depends on sample averages).
pub fn true_psi_oracle(d: &SimulationDesign, kind: TargetKind, draws: u64) -> Result<OracleValue> {
    d.validate()?;
    if draws < 100_000 {
        return Err(Error::Config(format!("oracle needs at least 1e5 draws, got {draws}")));
    }
    let theta0 = d.theta0();
    let target = crate::model::builtin_target(kind, 1, d.n_agents, d.n_projects)?;
    if let TargetKind::Coordinate { index } = kind {
        let v = theta0.to_vec()[index];
        return Ok(OracleValue { value: v, se: 0.0, blocks: 0 });
    }
    let blocks = block_count(d, draws);
    let means: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| oracle_block(d, &target, &theta0, mix_seed(d.seed ^ ORACLE_STREAM, 0, b as u64)))
        .collect();
    Ok(summarize(&means))
}

fn oracle_block(d: &SimulationDesign, target: &TargetFunctional, theta0: &Theta, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cov = draw_covariates(d.n_agents, d.n_projects, &mut rng);
    let v = draw_noise(d.design, d.sigma_sq.sqrt(), &cov, &mut rng);
    let rn = (d.n() as f64).sqrt();
    let mut s = 0.0;
    for i in 0..d.n_agents {
        for j in 0..d.n_projects {
            let t = i * d.n_projects + j;
            let dy = Dyad {
                x: &cov.x[i..i + 1],
                w: &cov.w[j..j + 1],
                z: &cov.z[t..t + 1],
            };
            let u = if v.is_empty() { 0.0 } else { v[t] / rn };
            s += target.eval(&dy, u, theta0);
        }
    }
    s / cov.z.len() as f64
}

fn summarize(means: &[f64]) -> OracleValue {
    let b = means.len() as f64;
    let value = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (b - 1.0);
    OracleValue {
        value,
        se: (var / b).sqrt(),
        blocks: means.len(),
    }
}

/// Result of the `σ̄²` oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaBarOracle {
    /// `max` over the grid of `Var(E(v | X, W))`.
    pub value: f64,
    pub argmax_sigma_sq: f64,
    /// `(σ², Var(E(v | X, W)))` for every grid point.
    pub by_sigma_sq: Vec<(f64, f64)>,
}

/// `max_{σ² ∈ grid} Var(E(v | X, W))` for the design's sample size,
/// estimated from at least `draws` dyads.
pub fn sigma_bar_sq_oracle(
    design: Design,
    n_agents: usize,
    n_projects: usize,
    grid: &[f64],
    draws: u64,
    seed: u64,
) -> Result<SigmaBarOracle> {
    if grid.is_empty() || grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::Config("sigma_sq grid must be nonempty and nonnegative".into()));
    }
    let proto = SimulationDesign::new(design, 0.0, n_agents, n_projects, seed);
    proto.validate()?;
    let blocks = block_count(&proto, draws);
    let mut by = Vec::with_capacity(grid.len());
    for &s2 in grid {
        let sums: Vec<(f64, f64, f64)> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ SIGMA_STREAM, 0, b as u64));
                let cov = draw_covariates(n_agents, n_projects, &mut rng);
                let eta = conditional_mean_noise(design, s2.sqrt(), &cov);
                let s: f64 = eta.iter().sum();
                let ss: f64 = eta.iter().map(|e| e * e).sum();
                (s, ss, eta.len() as f64)
            })
            .collect();
        let (s, ss, cnt) = sums
            .iter()
            .fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        let mean = s / cnt;
        by.push((s2, (ss / cnt - mean * mean).max(0.0)));
    }
    let (argmax_sigma_sq, value) = by
        .iter()
        .copied()
        .fold((grid[0], f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(SigmaBarOracle {
        value,
        argmax_sigma_sq,
        by_sigma_sq: by,
    })
}
