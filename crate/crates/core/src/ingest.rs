//! CSV ingestion of observed bipartite networks, declarative dyad features,
//! and the per-`σ̄²` estimation report.
//!
//! Expected files (UTF-8, header row required):
//! - `nodes_a.csv`: `id, attr...` for agents;
//! - `nodes_b.csv`: `id, attr...` for projects;
//! - `edges.csv`: `a_id, b_id`, one row per link.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{fit_network, Family, FitOptions, FitResult};
use crate::model::{AttributeNames, BipartiteNetwork, NetworkParts, TargetFunctional, TargetKind};
use crate::moments::MomentComponents;
use crate::robust::{assemble, one_step, plugin_kappa, sample_mean_gamma, EstimateOptions, RobustEstimate};
use crate::sieve::{regressor_basis, SieveSpec};

/// How one dyad feature is built from agent (`a`) and project (`b`) fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureKind {
    /// 1 if the `;`-separated token sets of the two fields intersect.
    Match { field_a: String, field_b: String },
    Product { field_a: String, field_b: String },
    /// `ln a + ln b`; both fields must be positive.
    LogProduct { field_a: String, field_b: String },
    AbsDiff { field_a: String, field_b: String },
    RawA { field: String },
    RawB { field: String },
    /// Product of previously declared features, by name.
    Interaction { features: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub standardize: bool,
}

/// A node table as read from disk.
#[derive(Debug, Clone)]
struct NodeTable {
    file: String,
    header: Vec<String>,
    ids: Vec<String>,
    /// Attribute cells (without the id column), with their source line.
    rows: Vec<(u64, Vec<String>)>,
    index: HashMap<String, usize>,
}

impl NodeTable {
    fn column(&self, field: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == field)
            .ok_or_else(|| Error::Config(format!("{}: unknown field '{field}'", self.file)))
    }

    fn numeric(&self, row: usize, col: usize) -> Result<f64> {
        let (line, cells) = &self.rows[row];
        cells[col].parse::<f64>().map_err(|_| Error::Parse {
            file: self.file.clone(),
            line: *line,
            message: format!("field '{}' value '{}' is not a number", self.header[col], cells[col]),
        })
    }

    fn numeric_column(&self, field: &str) -> Result<Vec<f64>> {
        let c = self.column(field)?;
        (0..self.ids.len()).map(|r| self.numeric(r, c)).collect()
    }

    /// Columns that parse as finite numbers in every row.
    fn numeric_attrs(&self) -> (Vec<String>, Vec<f64>) {
        let cols: Vec<usize> = (0..self.header.len())
            .filter(|&c| {
                self.rows
                    .iter()
                    .all(|(_, r)| r[c].parse::<f64>().is_ok_and(|v| v.is_finite()))
            })
            .collect();
        let names = cols.iter().map(|&c| self.header[c].clone()).collect();
        let mut vals = Vec::with_capacity(self.rows.len() * cols.len());
        for (_, r) in &self.rows {
            for &c in &cols {
                vals.push(r[c].parse::<f64>().expect("checked"));
            }
        }
        (names, vals)
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(f))
}

fn csv_parse_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            file: display(path),
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            file: display(path),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn read_nodes(path: &Path) -> Result<NodeTable> {
    let mut rdr = open_csv(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_parse_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header[0].is_empty() {
        return Err(Error::Parse {
            file: display(path),
            line: 1,
            message: "missing header row with an id column".into(),
        });
    }
    let mut t = NodeTable {
        file: display(path),
        header: header[1..].to_vec(),
        ids: Vec::new(),
        rows: Vec::new(),
        index: HashMap::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_parse_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[0].to_string();
        if t.index.insert(id.clone(), t.ids.len()).is_some() {
            return Err(Error::Parse {
                file: display(path),
                line,
                message: format!("duplicate node id '{id}'"),
            });
        }
        t.ids.push(id);
        t.rows.push((line, rec.iter().skip(1).map(str::to_string).collect()));
    }
    Ok(t)
}

fn read_edges(path: &Path, a: &NodeTable, b: &NodeTable) -> Result<Vec<u8>> {
    let mut rdr = open_csv(path)?;
    let width = rdr.headers().map_err(|e| csv_parse_error(path, e))?.len();
    if width != 2 {
        return Err(Error::Parse {
            file: display(path),
            line: 1,
            message: format!("edges need exactly two columns (a_id, b_id), found {width}"),
        });
    }
    let m = b.ids.len();
    let mut y = vec![0u8; a.ids.len() * m];
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_parse_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse {
            file: display(path),
            line,
            message,
        };
        let i = *a
            .index
            .get(&rec[0])
            .ok_or_else(|| err(format!("unknown agent id '{}'", &rec[0])))?;
        let j = *b
            .index
            .get(&rec[1])
            .ok_or_else(|| err(format!("unknown project id '{}'", &rec[1])))?;
        if !seen.insert((i, j)) {
            return Err(err(format!("duplicate edge ({}, {})", &rec[0], &rec[1])));
        }
        y[i * m + j] = 1;
    }
    Ok(y)
}

fn tokens(s: &str) -> HashSet<&str> {
    s.split(';').map(str::trim).filter(|t| !t.is_empty()).collect()
}

/// Values of one feature for every dyad, row-major.
fn build_feature(
    spec: &FeatureSpec,
    a: &NodeTable,
    b: &NodeTable,
    built: &[(String, Vec<f64>)],
) -> Result<Vec<f64>> {
    let (n, m) = (a.ids.len(), b.ids.len());
    let pairwise = |fa: &[f64], fb: &[f64], f: &dyn Fn(f64, f64) -> f64| {
        let mut out = Vec::with_capacity(n * m);
        for x in fa {
            for w in fb {
                out.push(f(*x, *w));
            }
        }
        out
    };
    let positive = |t: &NodeTable, field: &str| -> Result<Vec<f64>> {
        let v = t.numeric_column(field)?;
        if let Some(r) = v.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::Parse {
                file: t.file.clone(),
                line: t.rows[r].0,
                message: format!("log_product needs positive '{field}', got {}", v[r]),
            });
        }
        Ok(v)
    };
    Ok(match &spec.kind {
        FeatureKind::Match { field_a, field_b } => {
            let ca = a.column(field_a)?;
            let cb = b.column(field_b)?;
            let ta: Vec<HashSet<&str>> = a.rows.iter().map(|(_, r)| tokens(&r[ca])).collect();
            let tb: Vec<HashSet<&str>> = b.rows.iter().map(|(_, r)| tokens(&r[cb])).collect();
            let mut out = Vec::with_capacity(n * m);
            for x in &ta {
                for w in &tb {
                    out.push(if x.is_disjoint(w) { 0.0 } else { 1.0 });
                }
            }
            out
        }
        FeatureKind::Product { field_a, field_b } => pairwise(
            &a.numeric_column(field_a)?,
            &b.numeric_column(field_b)?,
            &|x, w| x * w,
        ),
        FeatureKind::LogProduct { field_a, field_b } => {
            let la: Vec<f64> = positive(a, field_a)?.iter().map(|v| v.ln()).collect();
            let lb: Vec<f64> = positive(b, field_b)?.iter().map(|v| v.ln()).collect();
            pairwise(&la, &lb, &|x, w| x + w)
        }
        FeatureKind::AbsDiff { field_a, field_b } => pairwise(
            &a.numeric_column(field_a)?,
            &b.numeric_column(field_b)?,
            &|x, w| (x - w).abs(),
        ),
        FeatureKind::RawA { field } => pairwise(&a.numeric_column(field)?, &vec![0.0; m], &|x, _| x),
        FeatureKind::RawB { field } => pairwise(&vec![0.0; n], &b.numeric_column(field)?, &|_, w| w),
        FeatureKind::Interaction { features } => {
            if features.is_empty() {
                return Err(Error::Config(format!("interaction '{}' lists no features", spec.name)));
            }
            let mut out = vec![1.0; n * m];
            for f in features {
                let src = built
                    .iter()
                    .find(|(name, _)| name == f)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "interaction '{}' refers to '{f}', which is not declared before it",
                            spec.name
                        ))
                    })?;
                out.iter_mut().zip(&src.1).for_each(|(o, v)| *o *= v);
            }
            out
        }
    })
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

/// Read the three CSV files and build dyad features in declaration order.
pub fn load_network(
    nodes_a: &Path,
    nodes_b: &Path,
    edges: &Path,
    features: &[FeatureSpec],
) -> Result<BipartiteNetwork> {
    if features.is_empty() {
        return Err(Error::Config("at least one feature must be declared".into()));
    }
    let a = read_nodes(nodes_a)?;
    let b = read_nodes(nodes_b)?;
    let y = read_edges(edges, &a, &b)?;
    let mut names = HashSet::new();
    let mut built: Vec<(String, Vec<f64>)> = Vec::with_capacity(features.len());
    for f in features {
        if !names.insert(f.name.clone()) {
            return Err(Error::Config(format!("feature name '{}' declared twice", f.name)));
        }
        let v = build_feature(f, &a, &b, &built)?;
        built.push((f.name.clone(), v));
    }
    for (f, (_, v)) in features.iter().zip(built.iter_mut()) {
        if f.standardize {
            standardize(v);
        }
    }
    let (n, m, d_z) = (a.ids.len(), b.ids.len(), features.len());
    let mut z = Vec::with_capacity(n * m * d_z);
    for t in 0..n * m {
        for (_, v) in &built {
            z.push(v[t]);
        }
    }
    let (xn, xv) = a.numeric_attrs();
    let (wn, wv) = b.numeric_attrs();
    BipartiteNetwork::from_parts(NetworkParts {
        n_agents: n,
        n_projects: m,
        adjacency: y,
        d_x: xn.len(),
        x_attrs: xv,
        d_w: wn.len(),
        w_attrs: wv,
        d_z,
        z_features: z,
        names: AttributeNames {
            x: xn,
            w: wn,
            z: features.iter().map(|f| f.name.clone()).collect(),
        },
    })
}

/// Paths written by [`dump_network`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFiles {
    pub nodes_a: PathBuf,
    pub nodes_b: PathBuf,
    pub edges: PathBuf,
}

fn labels(given: &[String], prefix: &str, d: usize) -> Vec<String> {
    if given.len() == d {
        given.to_vec()
    } else {
        (0..d).map(|k| format!("{prefix}{k}")).collect()
    }
}

/// Write node attributes and edges in the ingest schema. Agent ids are
/// `a{i}`, project ids `b{j}`; floats use shortest round-trip formatting.
pub fn dump_network(net: &BipartiteNetwork, dir: &Path) -> Result<NetworkFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = NetworkFiles {
        nodes_a: dir.join("nodes_a.csv"),
        nodes_b: dir.join("nodes_b.csv"),
        edges: dir.join("edges.csv"),
    };
    let write = |path: &Path, header: Vec<String>, rows: &mut dyn Iterator<Item = Vec<String>>| -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_parse_error(path, e))?;
        w.write_record(&header).map_err(|e| csv_parse_error(path, e))?;
        for r in rows {
            w.write_record(&r).map_err(|e| csv_parse_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    };
    let mut ha = vec!["id".to_string()];
    ha.extend(labels(&net.names().x, "x", net.d_x()));
    write(
        &files.nodes_a,
        ha,
        &mut (0..net.n_agents()).map(|i| {
            std::iter::once(format!("a{i}"))
                .chain(net.x(i).iter().map(|v| v.to_string()))
                .collect()
        }),
    )?;
    let mut hb = vec!["id".to_string()];
    hb.extend(labels(&net.names().w, "w", net.d_w()));
    write(
        &files.nodes_b,
        hb,
        &mut (0..net.n_projects()).map(|j| {
            std::iter::once(format!("b{j}"))
                .chain(net.w(j).iter().map(|v| v.to_string()))
                .collect()
        }),
    )?;
    let m = net.n_projects();
    write(
        &files.edges,
        vec!["a_id".into(), "b_id".into()],
        &mut net
            .adjacency()
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == 1)
            .map(|(t, _)| vec![format!("a{}", t / m), format!("b{}", t % m)]),
    )?;
    Ok(files)
}

/// Feature declaration that rebuilds a simulated network's `Z = ln X + ln W`.
pub fn simulated_features() -> Vec<FeatureSpec> {
    vec![FeatureSpec {
        name: "log_xw".into(),
        kind: FeatureKind::LogProduct {
            field_a: "x".into(),
            field_b: "w".into(),
        },
        standardize: false,
    }]
}

/// One line of the estimation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimator: String,
    pub parameter: String,
    pub coeff: f64,
    pub se: f64,
    /// Worst-case rMSE on the `√n` scale.
    pub max_rmse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub length: f64,
    /// One-step adjustment `κ̂'(scaled moment)`; zero for plug-ins.
    pub adjm: f64,
}

/// Report for one value of `σ̄²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub sigma_bar_sq: f64,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    pub sieve: SieveSpec,
    pub sigma_bar_sq: Vec<f64>,
    /// Defaults to every coordinate of `θ` plus the average out-degree.
    #[serde(default)]
    pub targets: Option<Vec<TargetKind>>,
    /// Initial estimator for the robust rows.
    #[serde(default = "default_init")]
    pub init: Family,
    #[serde(default)]
    pub estimate: EstimateOptions,
}

fn default_init() -> Family {
    Family::Logistic
}

fn parameter_label(kind: TargetKind, net: &BipartiteNetwork) -> String {
    match kind {
        TargetKind::Coordinate { index: 0 } => "constant".into(),
        TargetKind::Coordinate { index } => net
            .names()
            .z
            .get(index - 1)
            .cloned()
            .unwrap_or_else(|| format!("z{index}")),
        other => other.label(),
    }
}

fn row(estimator: &str, parameter: &str, e: &RobustEstimate) -> ReportRow {
    ReportRow {
        estimator: estimator.into(),
        parameter: parameter.into(),
        coeff: e.psi_hat,
        se: e.se,
        max_rmse: e.wc_rmse,
        ci_lo: e.ci_lo,
        ci_hi: e.ci_hi,
        length: e.ci_length(),
        adjm: e.adjustment,
    }
}

/// Robust and plug-in estimates for every target at every `σ̄²`.
pub fn fit_report(net: &BipartiteNetwork, opts: &ReportOptions) -> Result<Vec<ReportTable>> {
    if opts.sigma_bar_sq.is_empty() {
        return Err(Error::Config("sigma_bar_sq grid is empty".into()));
    }
    let targets = opts.targets.clone().unwrap_or_else(|| {
        let mut t: Vec<TargetKind> = (1..=net.d_z())
            .map(|index| TargetKind::Coordinate { index })
            .collect();
        t.push(TargetKind::Coordinate { index: 0 });
        t.push(TargetKind::AvgOutDegree { link: Default::default() });
        t
    });
    let fo = FitOptions::default();
    let logit = fit_network(net, Family::Logistic, &fo)?;
    let pois = fit_network(net, Family::Poisson, &fo)?;
    let init = match opts.init {
        Family::Logistic => &logit,
        Family::Poisson => &pois,
    };
    let h = opts.sieve.build(net)?;
    let f = regressor_basis(net);
    let eo = &opts.estimate;

    struct Prepared {
        label: String,
        target: TargetFunctional,
        robust: MomentComponents,
        plugins: Vec<(&'static str, MomentComponents)>,
    }
    let plugin_fits: [(&'static str, &FitResult); 2] = [("plugin_logit", &logit), ("plugin_poisson", &pois)];
    let mut prepared = Vec::with_capacity(targets.len());
    for &kind in &targets {
        let target = TargetFunctional::for_network(kind, net)?;
        let robust = MomentComponents::estimate(net, &init.theta, &h, &target, 0.0)?;
        let plugins = plugin_fits
            .iter()
            .map(|(name, fit)| Ok((*name, MomentComponents::estimate(net, &fit.theta, &f, &target, 0.0)?)))
            .collect::<Result<Vec<_>>>()?;
        prepared.push(Prepared {
            label: parameter_label(kind, net),
            target,
            robust,
            plugins,
        });
    }

    let mut tables = Vec::with_capacity(opts.sigma_bar_sq.len());
    for &s in &opts.sigma_bar_sq {
        let mut rows = Vec::new();
        for p in prepared.iter_mut() {
            p.robust.set_sigma_bar_sq(s)?;
            let e = one_step(net, &init.theta, &h, &p.target, &p.robust, eo)?;
            rows.push(row("robust", &p.label, &e));
            for ((name, c), (_, fit)) in p.plugins.iter_mut().zip(plugin_fits.iter()) {
                c.set_sigma_bar_sq(s)?;
                let kappa = plugin_kappa(fit, c)?;
                let psi = sample_mean_gamma(net, &fit.theta, &p.target);
                let e = assemble(psi, 0.0, &kappa, c, eo)?;
                rows.push(row(name, &p.label, &e));
            }
        }
        tables.push(ReportTable { sigma_bar_sq: s, rows });
    }
    Ok(tables)
}

pub const REPORT_HEADER: [&str; 9] = [
    "estimator", "parameter", "coeff", "se", "max_rmse", "ci_lo", "ci_hi", "length", "adjm",
];

/// One CSV per `σ̄²`: `{prefix}_sbar{σ̄²}.csv`, preceded by a `#` line
/// recording the sieve and feature standardization.
pub fn write_report(
    tables: &[ReportTable],
    dir: &Path,
    prefix: &str,
    opts: &ReportOptions,
    standardized: &[String],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for t in tables {
        let path = dir.join(format!("{prefix}_sbar{}.csv", t.sigma_bar_sq));
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(REPORT_HEADER).map_err(|e| csv_parse_error(&path, e))?;
            for r in &t.rows {
                let rec = [
                    r.estimator.clone(),
                    r.parameter.clone(),
                    crate::mc::fmt6(r.coeff),
                    crate::mc::fmt6(r.se),
                    crate::mc::fmt6(r.max_rmse),
                    crate::mc::fmt6(r.ci_lo),
                    crate::mc::fmt6(r.ci_hi),
                    crate::mc::fmt6(r.length),
                    crate::mc::fmt6(r.adjm),
                ];
                w.write_record(&rec).map_err(|e| csv_parse_error(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        let head = format!(
            "# sigma_bar_sq={}; sieve={}; init={:?}; standardized=[{}]\n",
            t.sigma_bar_sq,
            serde_json::to_string(&opts.sieve).unwrap_or_default(),
            opts.init,
            standardized.join(";")
        );
        let mut text = head.into_bytes();
        text.extend(buf);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn match_feature() -> Vec<FeatureSpec> {
        vec![FeatureSpec {
            name: "same_field".into(),
            kind: FeatureKind::Match {
                field_a: "field".into(),
                field_b: "topic".into(),
            },
            standardize: false,
        }]
    }

    #[test]
    fn tiny_fixture() {
        let d = tempfile::tempdir().unwrap();
        let a = write(d.path(), "a.csv", "id,field,cites\nx,econ;stat,3\ny,bio,5\n");
        let b = write(d.path(), "b.csv", "id,topic\np,stat\nq,chem\n");
        let e = write(d.path(), "e.csv", "a_id,b_id\ny,q\n");
        let net = load_network(&a, &b, &e, &match_feature()).unwrap();
        assert_eq!(net.adjacency(), &[0, 0, 0, 1]);
        assert_eq!(net.z_features(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(net.names().x, vec!["cites".to_string()]);
        assert_eq!(net.x(1), &[5.0]);
        assert_eq!(net.d_w(), 0);
    }

    #[test]
    fn errors_carry_lines() {
        let d = tempfile::tempdir().unwrap();
        let a = write(d.path(), "a.csv", "id,field\nx,econ\ny,bio\n");
        let b = write(d.path(), "b.csv", "id,topic\np,stat\nq,chem\n");
        let dup = write(d.path(), "e.csv", "a_id,b_id\nx,p\ny,q\nx,p\n");
        let err = load_network(&a, &b, &dup, &match_feature()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("duplicate edge"));
        let unknown = write(d.path(), "u.csv", "a_id,b_id\nz,p\n");
        let err = load_network(&a, &b, &unknown, &match_feature()).unwrap_err();
        assert!(err.to_string().contains("unknown agent id 'z'"));
        let ragged = write(d.path(), "r.csv", "id,field\nx,econ,extra\n");
        let err = load_network(&ragged, &b, &unknown, &match_feature()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let missing = d.path().join("nope.csv");
        assert!(matches!(
            load_network(&missing, &b, &dup, &match_feature()),
            Err(Error::Io { .. })
        ));
        let bad_field = vec![FeatureSpec {
            name: "p".into(),
            kind: FeatureKind::Product {
                field_a: "nope".into(),
                field_b: "topic".into(),
            },
            standardize: false,
        }];
        let ok_edges = write(d.path(), "ok.csv", "a_id,b_id\nx,p\n");
        assert!(matches!(load_network(&a, &b, &ok_edges, &bad_field), Err(Error::Config(_))));
    }

    #[test]
    fn numeric_features_in_declared_order() {
        let d = tempfile::tempdir().unwrap();
        let a = write(d.path(), "a.csv", "id,c\nx,2\ny,4\n");
        let b = write(d.path(), "b.csv", "id,c\np,1\nq,3\n");
        let e = write(d.path(), "e.csv", "a_id,b_id\nx,q\n");
        let specs = vec![
            FeatureSpec { name: "prod".into(), kind: FeatureKind::Product { field_a: "c".into(), field_b: "c".into() }, standardize: false },
            FeatureSpec { name: "diff".into(), kind: FeatureKind::AbsDiff { field_a: "c".into(), field_b: "c".into() }, standardize: false },
            FeatureSpec { name: "ra".into(), kind: FeatureKind::RawA { field: "c".into() }, standardize: false },
            FeatureSpec { name: "rb".into(), kind: FeatureKind::RawB { field: "c".into() }, standardize: false },
            FeatureSpec { name: "ix".into(), kind: FeatureKind::Interaction { features: vec!["ra".into(), "rb".into()] }, standardize: false },
            FeatureSpec { name: "lp".into(), kind: FeatureKind::LogProduct { field_a: "c".into(), field_b: "c".into() }, standardize: true },
        ];
        let net = load_network(&a, &b, &e, &specs).unwrap();
        assert_eq!(net.names().z, vec!["prod", "diff", "ra", "rb", "ix", "lp"]);
        assert_eq!(&net.z(0, 1)[..5], &[6.0, 1.0, 2.0, 3.0, 6.0]);
        assert_eq!(&net.z(1, 0)[..5], &[4.0, 3.0, 4.0, 1.0, 4.0]);
        let lp: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| net.z(i, j)[5]).sum();
        assert!(lp.abs() < 1e-12);
        let late = vec![FeatureSpec { name: "ix".into(), kind: FeatureKind::Interaction { features: vec!["later".into()] }, standardize: false }];
        assert!(load_network(&a, &b, &e, &late).is_err());
    }

    #[test]
    fn feature_spec_json() {
        let f: FeatureSpec = serde_json::from_str(
            r#"{"name":"jel","kind":{"type":"match","field_a":"jel","field_b":"jel"}}"#,
        )
        .unwrap();
        assert!(!f.standardize);
        assert!(serde_json::from_str::<FeatureSpec>(r#"{"name":"x","kind":{"type":"raw_a","field":"c","extra":1}}"#).is_err());
    }
}
