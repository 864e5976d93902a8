//! Shared domain types: the observed network, the index parameter, the
//! misspecification neighborhood, and the catalog of target functionals.
//!
//! Dyads are stored row-major: dyad `(i, j)` lives at flat position
//! `i * n_projects + j`, and its feature vector occupies
//! `z_features[(i * n_projects + j) * d_z ..][..d_z]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optional column labels carried alongside a network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeNames {
    pub x: Vec<String>,
    pub w: Vec<String>,
    pub z: Vec<String>,
}

/// Raw ingredients for [`BipartiteNetwork::from_parts`].
#[derive(Debug, Clone, Default)]
pub struct NetworkParts {
    pub n_agents: usize,
    pub n_projects: usize,
    /// Row-major N×M matrix of 0/1 link indicators.
    pub adjacency: Vec<u8>,
    pub d_x: usize,
    /// Row-major N×d_x agent attributes.
    pub x_attrs: Vec<f64>,
    pub d_w: usize,
    /// Row-major M×d_w project attributes.
    pub w_attrs: Vec<f64>,
    pub d_z: usize,
    /// Dyad features, `d_z` consecutive values per dyad in row-major dyad order.
    pub z_features: Vec<f64>,
    pub names: AttributeNames,
}

/// An observed agent-by-project network with node attributes and dyad features.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteNetwork {
    n_agents: usize,
    n_projects: usize,
    adjacency: Vec<u8>,
    d_x: usize,
    x_attrs: Vec<f64>,
    d_w: usize,
    w_attrs: Vec<f64>,
    d_z: usize,
    z_features: Vec<f64>,
    names: AttributeNames,
}

fn expect_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Config(format!(
            "{what} has {got} entries, expected {want}"
        )));
    }
    Ok(())
}

impl BipartiteNetwork {
    pub fn from_parts(p: NetworkParts) -> Result<Self> {
        if p.n_agents < 2 || p.n_projects < 2 {
            return Err(Error::Config(format!(
                "need at least 2 agents and 2 projects, got {}x{}",
                p.n_agents, p.n_projects
            )));
        }
        let dyads = p
            .n_agents
            .checked_mul(p.n_projects)
            .ok_or_else(|| Error::Size(format!("{}x{} dyads overflow", p.n_agents, p.n_projects)))?;
        let z_len = dyads
            .checked_mul(p.d_z)
            .ok_or_else(|| Error::Size("dyad feature array overflows".into()))?;
        if p.d_z == 0 {
            return Err(Error::Config("at least one dyad feature is required".into()));
        }
        expect_len("adjacency", p.adjacency.len(), dyads)?;
        expect_len("x_attrs", p.x_attrs.len(), p.n_agents * p.d_x)?;
        expect_len("w_attrs", p.w_attrs.len(), p.n_projects * p.d_w)?;
        expect_len("z_features", p.z_features.len(), z_len)?;
        if let Some(pos) = p.adjacency.iter().position(|&y| y > 1) {
            return Err(Error::Config(format!(
                "adjacency entry at dyad ({}, {}) is {}, expected 0 or 1",
                pos / p.n_projects,
                pos % p.n_projects,
                p.adjacency[pos]
            )));
        }
        if let Some(pos) = p.z_features.iter().position(|z| !z.is_finite()) {
            let dyad = pos / p.d_z;
            return Err(Error::Config(format!(
                "non-finite dyad feature {} at dyad ({}, {})",
                pos % p.d_z,
                dyad / p.n_projects,
                dyad % p.n_projects
            )));
        }
        if p.x_attrs.iter().chain(&p.w_attrs).any(|v| !v.is_finite()) {
            return Err(Error::Config("node attributes must be finite".into()));
        }
        for (what, labels, want) in [
            ("x", &p.names.x, p.d_x),
            ("w", &p.names.w, p.d_w),
            ("z", &p.names.z, p.d_z),
        ] {
            if !labels.is_empty() && labels.len() != want {
                return Err(Error::Config(format!(
                    "{} {what} labels given for {want} columns",
                    labels.len()
                )));
            }
        }
        Ok(Self {
            n_agents: p.n_agents,
            n_projects: p.n_projects,
            adjacency: p.adjacency,
            d_x: p.d_x,
            x_attrs: p.x_attrs,
            d_w: p.d_w,
            w_attrs: p.w_attrs,
            d_z: p.d_z,
            z_features: p.z_features,
            names: p.names,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }
    pub fn n_projects(&self) -> usize {
        self.n_projects
    }
    /// Total node count `n = N + M`.
    pub fn n(&self) -> usize {
        self.n_agents + self.n_projects
    }
    /// Project share `φ = M / n`.
    pub fn phi(&self) -> f64 {
        self.n_projects as f64 / self.n() as f64
    }
    pub fn n_dyads(&self) -> usize {
        self.n_agents * self.n_projects
    }
    pub fn d_x(&self) -> usize {
        self.d_x
    }
    pub fn d_w(&self) -> usize {
        self.d_w
    }
    pub fn d_z(&self) -> usize {
        self.d_z
    }
    /// Length of the regressor vector `R = (1, Z)`.
    pub fn d_r(&self) -> usize {
        self.d_z + 1
    }
    pub fn names(&self) -> &AttributeNames {
        &self.names
    }

    pub fn y(&self, i: usize, j: usize) -> u8 {
        self.adjacency[i * self.n_projects + j]
    }
    /// Flat row-major adjacency.
    pub fn adjacency(&self) -> &[u8] {
        &self.adjacency
    }
    pub fn z(&self, i: usize, j: usize) -> &[f64] {
        let k = (i * self.n_projects + j) * self.d_z;
        &self.z_features[k..k + self.d_z]
    }
    /// Flat dyad features (`d_z` values per dyad).
    pub fn z_features(&self) -> &[f64] {
        &self.z_features
    }
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x_attrs[i * self.d_x..(i + 1) * self.d_x]
    }
    pub fn w(&self, j: usize) -> &[f64] {
        &self.w_attrs[j * self.d_w..(j + 1) * self.d_w]
    }
    pub fn x_attrs(&self) -> &[f64] {
        &self.x_attrs
    }
    pub fn w_attrs(&self) -> &[f64] {
        &self.w_attrs
    }

    pub fn dyad(&self, i: usize, j: usize) -> Dyad<'_> {
        Dyad {
            x: self.x(i),
            w: self.w(j),
            z: self.z(i, j),
        }
    }

    /// Fraction of dyads that are linked.
    pub fn mean_degree(&self) -> f64 {
        let links: u64 = self.adjacency.iter().map(|&y| y as u64).sum();
        links as f64 / self.n_dyads() as f64
    }

    /// Copy of the network with every dyad feature multiplied by `c`.
    pub fn with_scaled_features(&self, c: f64) -> Result<Self> {
        let mut out = self.clone();
        out.z_features.iter_mut().for_each(|z| *z *= c);
        if out.z_features.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numeric("scaled features overflow".into()));
        }
        Ok(out)
    }
}

/// Attributes of a single dyad handed to a target functional.
#[derive(Debug, Clone, Copy)]
pub struct Dyad<'a> {
    pub x: &'a [f64],
    pub w: &'a [f64],
    pub z: &'a [f64],
}

/// Index parameter `(α_n, β)`. `α_n` is on the sparse `log(α₀/n)` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub alpha_n: f64,
    pub beta: Vec<f64>,
}

impl Theta {
    pub fn new(alpha_n: f64, beta: Vec<f64>) -> Result<Self> {
        if !alpha_n.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("theta has non-finite entries".into()));
        }
        Ok(Self { alpha_n, beta })
    }

    /// Build from a stacked `(α_n, β)` slice.
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v.split_first() {
            Some((&a, b)) => Self::new(a, b.to_vec()),
            None => Err(Error::Config("empty parameter vector".into())),
        }
    }

    /// Stacked `(α_n, β)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.alpha_n);
        v.extend_from_slice(&self.beta);
        v
    }

    pub fn dim(&self) -> usize {
        self.beta.len() + 1
    }

    /// Linear index `R'θ = α_n + Z'β`.
    pub fn index(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.beta.len());
        self.alpha_n + z.iter().zip(&self.beta).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Upper bound `σ̄²` on the second moment of the misspecification direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisspecNeighborhood {
    sigma_bar_sq: f64,
}

impl MisspecNeighborhood {
    pub fn new(sigma_bar_sq: f64) -> Result<Self> {
        if !(sigma_bar_sq >= 0.0) || !sigma_bar_sq.is_finite() {
            return Err(Error::Config(format!(
                "sigma_bar_sq must be a finite nonnegative number, got {sigma_bar_sq}"
            )));
        }
        Ok(Self { sigma_bar_sq })
    }
    pub fn sigma_bar_sq(&self) -> f64 {
        self.sigma_bar_sq
    }
}

/// Link used by degree functionals and by the one-step moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// `exp(s)`, the sparse (Poisson-limit) form.
    #[default]
    Exp,
    /// `Λ(s) = 1 / (1 + e^{-s})`.
    Logistic,
}

impl Link {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Link::Exp => s.exp(),
            Link::Logistic => logistic(s),
        }
    }
    /// First derivative.
    pub fn d1(self, s: f64) -> f64 {
        match self {
            Link::Exp => s.exp(),
            Link::Logistic => {
                let l = logistic(s);
                l * (1.0 - l)
            }
        }
    }
}

/// Numerically stable logistic CDF.
pub fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Built-in parameters of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetKind {
    /// A coordinate of `θ = (α_n, β)`; index 0 is the intercept.
    Coordinate { index: usize },
    /// Expected number of projects per agent.
    AvgOutDegree {
        #[serde(default)]
        link: Link,
    },
    /// Expected number of agents per project.
    AvgInDegree {
        #[serde(default)]
        link: Link,
    },
    /// Average derivative of the link probability with respect to `Z^(c)`
    /// (`component` is 1-based into `β`). `scaled` multiplies by `n`.
    AvgMarginalEffect {
        component: usize,
        #[serde(default = "yes")]
        scaled: bool,
    },
    /// Average derivative of the link probability with respect to `β^(c)`.
    AvgPartialEffect {
        component: usize,
        #[serde(default = "yes")]
        scaled: bool,
    },
}

fn yes() -> bool {
    true
}

impl TargetKind {
    pub fn label(&self) -> String {
        match self {
            TargetKind::Coordinate { index } => format!("theta[{index}]"),
            TargetKind::AvgOutDegree { .. } => "avg_out_degree".into(),
            TargetKind::AvgInDegree { .. } => "avg_in_degree".into(),
            TargetKind::AvgMarginalEffect { component, .. } => format!("ame[{component}]"),
            TargetKind::AvgPartialEffect { component, .. } => format!("ape[{component}]"),
        }
    }

    /// Whether γ depends on the data (false only for coordinates).
    pub fn depends_on_data(&self) -> bool {
        !matches!(self, TargetKind::Coordinate { .. })
    }
}

type CustomFn = dyn Fn(&Dyad<'_>, f64, &Theta) -> f64 + Send + Sync;

#[derive(Clone)]
enum Form {
    Builtin(TargetKind),
    Custom { label: String, f: Arc<CustomFn> },
}

/// `γ_n(D, u, θ)` together with its derivatives at `u = 0`.
///
/// The second argument is the already-scaled perturbation `u = n^{-1/2} v`
/// of the link index, so `d_v` is the derivative with respect to `u`.
#[derive(Clone)]
pub struct TargetFunctional {
    form: Form,
    d_z: usize,
    n_agents: usize,
    n_projects: usize,
}

impl fmt::Debug for TargetFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunctional")
            .field("label", &self.label())
            .field("d_z", &self.d_z)
            .field("n_agents", &self.n_agents)
            .field("n_projects", &self.n_projects)
            .finish()
    }
}

/// Construct a catalogued functional for networks with `d_z` features and
/// `N`, `M` nodes on each side.
pub fn builtin_target(
    kind: TargetKind,
    d_z: usize,
    n_agents: usize,
    n_projects: usize,
) -> Result<TargetFunctional> {
    let bad = |msg: String| Err(Error::Config(msg));
    match kind {
        TargetKind::Coordinate { index } if index > d_z => {
            return bad(format!("coordinate {index} out of range for d_z = {d_z}"))
        }
        TargetKind::AvgMarginalEffect { component, .. }
        | TargetKind::AvgPartialEffect { component, .. }
            if component == 0 || component > d_z =>
        {
            return bad(format!(
                "effect component must lie in 1..={d_z}, got {component}"
            ))
        }
        _ => {}
    }
    Ok(TargetFunctional {
        form: Form::Builtin(kind),
        d_z,
        n_agents,
        n_projects,
    })
}

impl TargetFunctional {
    pub fn for_network(kind: TargetKind, net: &BipartiteNetwork) -> Result<Self> {
        builtin_target(kind, net.d_z(), net.n_agents(), net.n_projects())
    }

    /// A user-supplied functional; derivatives come from finite differences.
    pub fn custom<F>(label: &str, d_z: usize, n_agents: usize, n_projects: usize, f: F) -> Self
    where
        F: Fn(&Dyad<'_>, f64, &Theta) -> f64 + Send + Sync + 'static,
    {
        Self {
            form: Form::Custom {
                label: label.to_string(),
                f: Arc::new(f),
            },
            d_z,
            n_agents,
            n_projects,
        }
    }

    pub fn kind(&self) -> Option<TargetKind> {
        match &self.form {
            Form::Builtin(k) => Some(*k),
            Form::Custom { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.form {
            Form::Builtin(k) => k.label(),
            Form::Custom { label, .. } => label.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.n_agents + self.n_projects
    }

    /// Whether `γ` varies with the dyad (false for coordinates).
    pub fn depends_on_data(&self) -> bool {
        self.kind().map_or(true, |k| k.depends_on_data())
    }

    pub fn eval(&self, d: &Dyad<'_>, u: f64, theta: &Theta) -> f64 {
        let n = self.n() as f64;
        match &self.form {
            Form::Custom { f, .. } => f(d, u, theta),
            Form::Builtin(kind) => match *kind {
                TargetKind::Coordinate { index } => coordinate(theta, index),
                TargetKind::AvgOutDegree { link } => {
                    self.n_projects as f64 * link.apply(theta.index(d.z) + u)
                }
                TargetKind::AvgInDegree { link } => {
                    self.n_agents as f64 * link.apply(theta.index(d.z) + u)
                }
                TargetKind::AvgMarginalEffect { component, scaled } => {
                    let s = theta.index(d.z) + u;
                    scale(scaled, n) * theta.beta[component - 1] * logistic_d1(s)
                }
                TargetKind::AvgPartialEffect { component, scaled } => {
                    let s = theta.index(d.z) + u;
                    scale(scaled, n) * d.z[component - 1] * logistic_d1(s)
                }
            },
        }
    }

    /// `∂γ/∂θ` at `u = 0`, written into `out` (length `d_z + 1`).
    pub fn d_theta_into(&self, d: &Dyad<'_>, theta: &Theta, out: &mut [f64]) {
        debug_assert_eq!(out.len(), theta.dim());
        let n = self.n() as f64;
        let fill_r = |out: &mut [f64], w: f64| {
            out[0] = w;
            for (o, z) in out[1..].iter_mut().zip(d.z) {
                *o = w * z;
            }
        };
        match &self.form {
            Form::Custom { f, .. } => {
                let base = theta.to_vec();
                let mut t = base.clone();
                for k in 0..out.len() {
                    out[k] = five_point(
                        |x| {
                            t[k] = x;
                            let th = Theta {
                                alpha_n: t[0],
                                beta: t[1..].to_vec(),
                            };
                            f(d, 0.0, &th)
                        },
                        base[k],
                    );
                    t[k] = base[k];
                }
            }
            Form::Builtin(kind) => match *kind {
                TargetKind::Coordinate { index } => {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    out[index] = 1.0;
                }
                TargetKind::AvgOutDegree { link } => {
                    fill_r(out, self.n_projects as f64 * link.d1(theta.index(d.z)))
                }
                TargetKind::AvgInDegree { link } => {
                    fill_r(out, self.n_agents as f64 * link.d1(theta.index(d.z)))
                }
                TargetKind::AvgMarginalEffect { component, scaled } => {
                    let s = theta.index(d.z);
                    let c = scale(scaled, n);
                    fill_r(out, c * theta.beta[component - 1] * logistic_d2(s));
                    out[component] += c * logistic_d1(s);
                }
                TargetKind::AvgPartialEffect { component, scaled } => {
                    let s = theta.index(d.z);
                    fill_r(
                        out,
                        scale(scaled, n) * d.z[component - 1] * logistic_d2(s),
                    );
                }
            },
        }
    }

    pub fn d_theta(&self, d: &Dyad<'_>, theta: &Theta) -> Vec<f64> {
        let mut out = vec![0.0; theta.dim()];
        self.d_theta_into(d, theta, &mut out);
        out
    }

    /// `Δ_v = ∂γ/∂u` at `u = 0`.
    pub fn d_v(&self, d: &Dyad<'_>, theta: &Theta) -> f64 {
        let n = self.n() as f64;
        match &self.form {
            Form::Custom { f, .. } => five_point(|u| f(d, u, theta), 0.0),
            Form::Builtin(kind) => match *kind {
                TargetKind::Coordinate { .. } => 0.0,
                TargetKind::AvgOutDegree { link } => {
                    self.n_projects as f64 * link.d1(theta.index(d.z))
                }
                TargetKind::AvgInDegree { link } => {
                    self.n_agents as f64 * link.d1(theta.index(d.z))
                }
                TargetKind::AvgMarginalEffect { component, scaled } => {
                    scale(scaled, n) * theta.beta[component - 1] * logistic_d2(theta.index(d.z))
                }
                TargetKind::AvgPartialEffect { component, scaled } => {
                    scale(scaled, n) * d.z[component - 1] * logistic_d2(theta.index(d.z))
                }
            },
        }
    }
}

fn coordinate(theta: &Theta, index: usize) -> f64 {
    if index == 0 {
        theta.alpha_n
    } else {
        theta.beta[index - 1]
    }
}

fn scale(scaled: bool, n: f64) -> f64 {
    if scaled {
        n
    } else {
        1.0
    }
}

fn logistic_d1(s: f64) -> f64 {
    let l = logistic(s);
    l * (1.0 - l)
}

fn logistic_d2(s: f64) -> f64 {
    let l = logistic(s);
    l * (1.0 - l) * (1.0 - 2.0 * l)
}

/// Five-point central difference of `f` at `x`.
pub(crate) fn five_point(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3 * x.abs().max(1.0);
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}
