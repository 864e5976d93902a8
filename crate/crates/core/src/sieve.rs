//! Sieve instruments `H_ij` built from dyad features or node attributes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BipartiteNetwork;

/// Hermite polynomial normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HermiteConvention {
    /// `He_{k+1} = z He_k − k He_{k−1}`.
    #[default]
    Probabilists,
    /// `H_{k+1} = 2z H_k − 2k H_{k−1}`.
    Physicists,
}

/// Declarative choice of sieve family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SieveSpec {
    /// Hermite polynomials of a single dyad feature, orders `0..k_n`.
    HermiteScalar {
        k_n: usize,
        #[serde(default)]
        convention: HermiteConvention,
        #[serde(default)]
        standardize: bool,
    },
    /// `(1, Z)` followed by Hermite orders `2..k_n` of every feature.
    HermiteAdditive {
        k_n: usize,
        #[serde(default)]
        convention: HermiteConvention,
        #[serde(default)]
        standardize: bool,
    },
    /// Tensor product of per-node power expansions of `X_i` and `W_j`.
    TensorPoly {
        deg_x: usize,
        deg_w: usize,
        #[serde(default = "default_cap")]
        cap: usize,
    },
    /// The regressors themselves, `H = R = (1, Z)`.
    Regressors,
}

fn default_cap() -> usize {
    64
}

impl SieveSpec {
    pub fn hermite(k_n: usize) -> Self {
        SieveSpec::HermiteScalar {
            k_n,
            convention: HermiteConvention::Probabilists,
            standardize: false,
        }
    }

    /// Build the instruments and check the identification requirement
    /// `dim ≥ d_z + 1`.
    pub fn build(&self, net: &BipartiteNetwork) -> Result<SieveBasis> {
        let basis = match *self {
            SieveSpec::HermiteScalar {
                k_n,
                convention,
                standardize,
            } => {
                let z = maybe_standardize(net.z_features(), net.d_z(), standardize);
                hermite_basis_with(&z, net.d_z(), k_n, convention)?
            }
            SieveSpec::HermiteAdditive {
                k_n,
                convention,
                standardize,
            } => {
                let z = maybe_standardize(net.z_features(), net.d_z(), standardize);
                hermite_additive_basis(&z, net.d_z(), k_n, convention)?
            }
            SieveSpec::TensorPoly { deg_x, deg_w, cap } => {
                tensor_poly_basis(net, (deg_x, deg_w), cap)?
            }
            SieveSpec::Regressors => regressor_basis(net),
        };
        if basis.dim < net.d_r() {
            return Err(Error::Config(format!(
                "sieve dimension {} is below the number of regressors {}",
                basis.dim,
                net.d_r()
            )));
        }
        Ok(basis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SieveFamily {
    HermiteScalar,
    HermiteAdditive,
    TensorPoly,
    Regressors,
}

/// Instrument values, `dim` per dyad in row-major dyad order.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveBasis {
    dim: usize,
    family: SieveFamily,
    values: Vec<f64>,
}

impl SieveBasis {
    fn new(dim: usize, family: SieveFamily, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("sieve basis has non-finite entries".into()));
        }
        Ok(Self {
            dim,
            family,
            values,
        })
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn family(&self) -> SieveFamily {
        self.family
    }
    pub fn n_dyads(&self) -> usize {
        self.values.len() / self.dim
    }
    /// Instruments of the dyad at flat position `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Write the first `out.len()` Hermite polynomials at `z` into `out`.
pub fn hermite_polys(z: f64, convention: HermiteConvention, out: &mut [f64]) {
    let (a, b) = match convention {
        HermiteConvention::Probabilists => (1.0, 1.0),
        HermiteConvention::Physicists => (2.0, 2.0),
    };
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = a * z;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = a * z * out[k] - b * k as f64 * out[k - 1];
    }
}

/// Probabilists' Hermite basis `(He_0(Z), …, He_{k_n−1}(Z))` of a scalar feature.
pub fn hermite_basis(z: &[f64], d_z: usize, k_n: usize) -> Result<SieveBasis> {
    hermite_basis_with(z, d_z, k_n, HermiteConvention::Probabilists)
}

pub fn hermite_basis_with(
    z: &[f64],
    d_z: usize,
    k_n: usize,
    convention: HermiteConvention,
) -> Result<SieveBasis> {
    if k_n < 2 {
        return Err(Error::Config(format!("k_n must be at least 2, got {k_n}")));
    }
    if d_z != 1 {
        return Err(Error::Config(format!(
            "hermite_scalar needs exactly one dyad feature (got {d_z}); use hermite_additive or tensor_poly"
        )));
    }
    let mut values = vec![0.0; z.len() * k_n];
    for (zv, out) in z.iter().zip(values.chunks_exact_mut(k_n)) {
        hermite_polys(*zv, convention, out);
    }
    SieveBasis::new(k_n, SieveFamily::HermiteScalar, values)
}

/// `(1, Z_1..Z_d, He_2(Z_1)..He_{k_n−1}(Z_1), …)`; dimension `1 + d_z (k_n − 1)`.
pub fn hermite_additive_basis(
    z: &[f64],
    d_z: usize,
    k_n: usize,
    convention: HermiteConvention,
) -> Result<SieveBasis> {
    if k_n < 2 {
        return Err(Error::Config(format!("k_n must be at least 2, got {k_n}")));
    }
    let dim = 1 + d_z * (k_n - 1);
    let n_dyads = z.len() / d_z;
    let mut values = Vec::with_capacity(n_dyads * dim);
    let mut poly = vec![0.0; k_n];
    for zr in z.chunks_exact(d_z) {
        values.push(1.0);
        values.extend_from_slice(zr);
        for &zv in zr {
            hermite_polys(zv, convention, &mut poly);
            values.extend_from_slice(&poly[2..]);
        }
    }
    SieveBasis::new(dim, SieveFamily::HermiteAdditive, values)
}

/// Tensor product of `(1, x, x², …)` expansions of each node's attributes.
///
/// With scalar attributes and degrees `(1, 1)` the dyad row is `(1, x, w, xw)`.
pub fn tensor_poly_basis(
    net: &BipartiteNetwork,
    degrees: (usize, usize),
    cap: usize,
) -> Result<SieveBasis> {
    let px_dim = 1 + net.d_x() * degrees.0;
    let pw_dim = 1 + net.d_w() * degrees.1;
    let dim = px_dim * pw_dim;
    if dim > cap {
        return Err(Error::Config(format!(
            "tensor basis dimension {dim} exceeds cap {cap}"
        )));
    }
    let expand = |attrs: &[f64], deg: usize| {
        let mut p = Vec::with_capacity(1 + attrs.len() * deg);
        p.push(1.0);
        for &a in attrs {
            let mut pow = 1.0;
            for _ in 0..deg {
                pow *= a;
                p.push(pow);
            }
        }
        p
    };
    let px: Vec<Vec<f64>> = (0..net.n_agents()).map(|i| expand(net.x(i), degrees.0)).collect();
    let pw: Vec<Vec<f64>> = (0..net.n_projects()).map(|j| expand(net.w(j), degrees.1)).collect();
    let mut values = Vec::with_capacity(net.n_dyads() * dim);
    for x in &px {
        for w in &pw {
            for &b in w {
                for &a in x {
                    values.push(a * b);
                }
            }
        }
    }
    SieveBasis::new(dim, SieveFamily::TensorPoly, values)
}

/// `H = R = (1, Z)`.
pub fn regressor_basis(net: &BipartiteNetwork) -> SieveBasis {
    let d_z = net.d_z();
    let mut values = Vec::with_capacity(net.n_dyads() * (d_z + 1));
    for zr in net.z_features().chunks_exact(d_z) {
        values.push(1.0);
        values.extend_from_slice(zr);
    }
    SieveBasis {
        dim: d_z + 1,
        family: SieveFamily::Regressors,
        values,
    }
}

fn maybe_standardize(z: &[f64], d_z: usize, on: bool) -> Vec<f64> {
    if !on {
        return z.to_vec();
    }
    let n = (z.len() / d_z) as f64;
    let mut out = z.to_vec();
    for c in 0..d_z {
        let mean = z.iter().skip(c).step_by(d_z).sum::<f64>() / n;
        let var = z.iter().skip(c).step_by(d_z).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in out.iter_mut().skip(c).step_by(d_z) {
            *v = (*v - mean) / sd;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttributeNames, NetworkParts};
    use proptest::prelude::*;

    fn net(z: Vec<f64>, d_z: usize, x: Vec<f64>, w: Vec<f64>) -> BipartiteNetwork {
        let n_agents = x.len();
        let n_projects = w.len();
        BipartiteNetwork::from_parts(NetworkParts {
            n_agents,
            n_projects,
            adjacency: vec![0; n_agents * n_projects],
            d_x: 1,
            x_attrs: x,
            d_w: 1,
            w_attrs: w,
            d_z,
            z_features: z,
            names: AttributeNames::default(),
        })
        .unwrap()
    }

    #[test]
    fn hermite_examples() {
        let b = hermite_basis(&[0.0], 1, 3).unwrap();
        assert_eq!(b.row(0), &[1.0, 0.0, -1.0]);
        let b = hermite_basis(&[2.0], 1, 4).unwrap();
        assert_eq!(b.row(0), &[1.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    fn hermite_errors() {
        assert!(matches!(hermite_basis(&[0.0], 1, 1), Err(Error::Config(_))));
        let e = hermite_basis(&[0.0, 1.0], 2, 3).unwrap_err();
        assert!(e.to_string().contains("tensor_poly"));
    }

    #[test]
    fn k2_equals_regressors() {
        let n = net(vec![0.3, -1.2, 2.0, 0.1], 1, vec![1.0, 2.0], vec![1.0, 3.0]);
        let h = SieveSpec::hermite(2).build(&n).unwrap();
        assert_eq!(h.values(), regressor_basis(&n).values());
    }

    #[test]
    fn physicists_convention() {
        let mut out = [0.0; 4];
        hermite_polys(1.5, HermiteConvention::Physicists, &mut out);
        assert_eq!(out, [1.0, 3.0, 4.0 * 2.25 - 2.0, 8.0 * 3.375 - 12.0 * 1.5]);
    }

    #[test]
    fn additive_layout() {
        let b = hermite_additive_basis(&[2.0, 0.0], 2, 3, HermiteConvention::Probabilists)
            .unwrap();
        assert_eq!(b.dim(), 5);
        assert_eq!(b.row(0), &[1.0, 2.0, 0.0, 3.0, -1.0]);
    }

    #[test]
    fn tensor_examples() {
        let n = net(vec![0.0; 4], 1, vec![2.0, 0.0], vec![3.0, 0.0]);
        let b = tensor_poly_basis(&n, (1, 1), 64).unwrap();
        assert_eq!(b.row(0), &[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(b.row(3), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(tensor_poly_basis(&n, (2, 1), 64).unwrap().dim(), 6);
        assert!(tensor_poly_basis(&n, (2, 1), 5).is_err());
    }

    #[test]
    fn dimension_below_regressors_rejected() {
        let n = net(vec![0.0; 8], 2, vec![1.0, 2.0], vec![1.0, 3.0]);
        let spec = SieveSpec::HermiteAdditive {
            k_n: 2,
            convention: HermiteConvention::Probabilists,
            standardize: false,
        };
        assert_eq!(spec.build(&n).unwrap().dim(), 3);
        let t = SieveSpec::TensorPoly { deg_x: 0, deg_w: 0, cap: 64 };
        assert!(t.build(&n).is_err());
    }

    #[test]
    fn standardize_centers_feature() {
        let n = net(vec![1.0, 2.0, 3.0, 4.0], 1, vec![1.0, 2.0], vec![1.0, 3.0]);
        let spec = SieveSpec::HermiteScalar {
            k_n: 2,
            convention: HermiteConvention::Probabilists,
            standardize: true,
        };
        let b = spec.build(&n).unwrap();
        let mean: f64 = (0..4).map(|t| b.row(t)[1]).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn spec_json() {
        let s: SieveSpec = serde_json::from_str(r#"{"family":"hermite_scalar","k_n":3}"#).unwrap();
        assert_eq!(s, SieveSpec::hermite(3));
        assert!(serde_json::from_str::<SieveSpec>(r#"{"family":"hermite_scalar","k":3}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn recurrence_and_constant_column(z in -4.0f64..4.0, k in 2usize..9) {
            let b = hermite_basis(&[z], 1, k).unwrap();
            let h = b.row(0);
            prop_assert_eq!(h[0], 1.0);
            for j in 1..k - 1 {
                prop_assert_eq!(h[j + 1], z * h[j] - j as f64 * h[j - 1]);
            }
        }
    }
}
