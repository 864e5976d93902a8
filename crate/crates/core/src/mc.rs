//! Monte Carlo harness: replicate simulate → fit → estimate over a grid of
//! designs, aggregate table metrics, and write them out.
//!
//! Replication `r` of cell `c` uses seed `mix_seed(master_seed, c, r)`;
//! per-replication records are collected in index order before any
//! reduction, so summaries do not depend on the thread count.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Link, TargetKind};
use crate::robust::{estimate, CvMode, EstimateOptions, Estimator, RobustEstimate};
use crate::sieve::SieveSpec;
use crate::simulate::{
    default_alpha0, default_beta0, mix_seed, sigma_bar_sq_oracle, simulate_network,
    true_psi_oracle, Design, SimulationDesign,
};

/// How `σ̄²` is chosen for a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaBarRule {
    Fixed(f64),
    Named(SigmaBarKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaBarKeyword {
    /// `max_{σ² ∈ grid} Var(E(v | X, W))` for the cell's design and size.
    DesignMax,
}

impl Default for SigmaBarRule {
    fn default() -> Self {
        SigmaBarRule::Named(SigmaBarKeyword::DesignMax)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub designs: Vec<Design>,
    pub sigma_sq: Vec<f64>,
    /// `(N, M)` pairs.
    pub sizes: Vec<[usize; 2]>,
    pub estimators: Vec<Estimator>,
    pub target: TargetKind,
    pub sieve: SieveSpec,
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; `None` uses rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub sigma_bar_sq: SigmaBarRule,
    #[serde(default = "default_grid")]
    pub sigma_bar_grid: Vec<f64>,
    /// Dyad draws for the `σ̄²` and true-value oracles.
    #[serde(default = "default_oracle_draws")]
    pub oracle_draws: u64,
    #[serde(default)]
    pub moment_link: Link,
    #[serde(default)]
    pub cv_mode: CvMode,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default = "default_beta0")]
    pub beta0: f64,
}

fn default_name() -> String {
    "mc".into()
}
fn default_alpha() -> f64 {
    0.05
}
fn default_grid() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 3.0, 4.0]
}
fn default_oracle_draws() -> u64 {
    1_000_000
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.designs.is_empty() || self.sizes.is_empty() || self.sigma_sq.is_empty() {
            return bad("designs, sizes and sigma_sq must be nonempty");
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.sigma_sq.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("sigma_sq values must be finite and nonnegative");
        }
        if let SigmaBarRule::Fixed(s) = self.sigma_bar_sq {
            if !(s >= 0.0) || !s.is_finite() {
                return bad("sigma_bar_sq must be finite and nonnegative");
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        if self.oracle_draws < 100_000 {
            return bad("oracle_draws must be at least 1e5");
        }
        for s in &self.sizes {
            SimulationDesign::new(Design::LatentHomophily, 0.0, s[0], s[1], 0).validate()?;
        }
        if let TargetKind::Coordinate { index } = self.target {
            if index > 1 {
                return bad("simulated networks have one dyad feature; coordinate index must be 0 or 1");
            }
        }
        Ok(())
    }

    fn options(&self) -> EstimateOptions {
        EstimateOptions {
            alpha: self.alpha,
            moment_link: self.moment_link,
            cv_mode: self.cv_mode,
        }
    }

    fn cells(&self) -> Vec<(Design, [usize; 2], f64)> {
        let mut out = Vec::new();
        for &d in &self.designs {
            for &s in &self.sizes {
                for &s2 in &self.sigma_sq {
                    out.push((d, s, s2));
                }
            }
        }
        out
    }
}

/// Non-finite floats are stored as JSON `null`.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Aggregated metrics for one (cell, estimator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub design: Design,
    pub n_agents: usize,
    pub n_projects: usize,
    #[serde(with = "nullable")]
    pub sigma_sq: f64,
    pub estimator: Estimator,
    #[serde(with = "nullable")]
    pub sigma_bar_sq: f64,
    #[serde(with = "nullable")]
    pub true_value: f64,
    #[serde(with = "nullable")]
    pub true_se: f64,
    pub replications: usize,
    pub n_failures: usize,
    #[serde(with = "nullable")]
    pub mean_coeff: f64,
    /// `√n (mean ψ̂ − Ψ₀)`.
    #[serde(with = "nullable")]
    pub rootn_bias: f64,
    #[serde(with = "nullable")]
    pub mean_se: f64,
    #[serde(with = "nullable")]
    pub sd_coeff: f64,
    #[serde(with = "nullable")]
    pub se_over_sd: f64,
    #[serde(with = "nullable")]
    pub mean_wc_rmse: f64,
    #[serde(with = "nullable")]
    pub ci_lo_mean: f64,
    #[serde(with = "nullable")]
    pub ci_hi_mean: f64,
    #[serde(with = "nullable")]
    pub mean_length: f64,
    #[serde(with = "nullable")]
    pub coverage: f64,
    #[serde(with = "nullable")]
    pub mean_degree: f64,
    /// Largest initial-fit gradient sup-norm over successful replications.
    #[serde(with = "nullable")]
    pub max_grad_norm: f64,
}

impl CellSummary {
    pub fn n(&self) -> usize {
        self.n_agents + self.n_projects
    }
    pub fn failed(&self) -> bool {
        self.n_failures == self.replications
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub config: McConfig,
    pub cells: Vec<CellSummary>,
}

impl McSummary {
    pub fn any_cell_failed(&self) -> bool {
        self.cells.iter().any(|c| c.failed())
    }

    pub fn for_estimator(&self, e: Estimator) -> impl Iterator<Item = &CellSummary> {
        self.cells.iter().filter(move |c| c.estimator == e)
    }
}

struct Replication {
    degree: f64,
    results: Vec<Option<RobustEstimate>>,
}

/// Run every cell of the configuration.
pub fn run_mc(config: &McConfig) -> Result<McSummary> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_cells(config))
}

fn run_cells(config: &McConfig) -> Result<McSummary> {
    let opts = config.options();
    let mut sbar_cache: HashMap<(Design, [usize; 2]), f64> = HashMap::new();
    let mut cells = Vec::new();
    for (cell_id, (design, size, s2)) in config.cells().into_iter().enumerate() {
        let cell_id = cell_id as u64;
        let sbar = match config.sigma_bar_sq {
            SigmaBarRule::Fixed(v) => v,
            SigmaBarRule::Named(SigmaBarKeyword::DesignMax) => match sbar_cache.get(&(design, size)) {
                Some(&v) => v,
                None => {
                    let o = sigma_bar_sq_oracle(
                        design,
                        size[0],
                        size[1],
                        &config.sigma_bar_grid,
                        config.oracle_draws,
                        mix_seed(config.master_seed, u64::MAX, 0),
                    )?;
                    sbar_cache.insert((design, size), o.value);
                    o.value
                }
            },
        };
        let base = SimulationDesign {
            design,
            sigma_sq: s2,
            alpha0: config.alpha0,
            beta0: config.beta0,
            n_agents: size[0],
            n_projects: size[1],
            seed: 0,
        };
        let truth = true_psi_oracle(
            &base.with_seed(mix_seed(config.master_seed, cell_id, u64::MAX)),
            config.target,
            config.oracle_draws,
        )?;
        log::info!(
            "cell {cell_id}: {} N={} M={} sigma^2={s2} sigma_bar^2={sbar:.6} true={:.6}",
            design.name(),
            size[0],
            size[1],
            truth.value
        );
        let reps: Vec<Replication> = (0..config.replications as u64)
            .into_par_iter()
            .map(|r| {
                let d = base.with_seed(mix_seed(config.master_seed, cell_id, r));
                match simulate_network(&d) {
                    Ok(net) => Replication {
                        degree: net.mean_degree(),
                        results: config
                            .estimators
                            .iter()
                            .map(|&e| {
                                estimate(&net, e, config.target, &config.sieve, sbar, &opts)
                                    .map_err(|err| log::debug!("cell {cell_id} rep {r} {e:?}: {err}"))
                                    .ok()
                            })
                            .collect(),
                    },
                    Err(err) => {
                        log::debug!("cell {cell_id} rep {r}: simulation failed: {err}");
                        Replication {
                            degree: f64::NAN,
                            results: vec![None; config.estimators.len()],
                        }
                    }
                }
            })
            .collect();
        for (k, &est) in config.estimators.iter().enumerate() {
            let cs = aggregate(&reps, k, est, design, size, s2, sbar, truth.value, truth.se);
            if cs.n_failures > 0 {
                log::warn!(
                    "cell {cell_id} {est:?}: {} of {} replications failed and were dropped",
                    cs.n_failures,
                    cs.replications
                );
            }
            cells.push(cs);
        }
    }
    Ok(McSummary {
        config: config.clone(),
        cells,
    })
}

#[allow(clippy::too_many_arguments)]
fn aggregate(
    reps: &[Replication],
    k: usize,
    estimator: Estimator,
    design: Design,
    size: [usize; 2],
    sigma_sq: f64,
    sigma_bar_sq: f64,
    truth: f64,
    truth_se: f64,
) -> CellSummary {
    let ok: Vec<&RobustEstimate> = reps.iter().filter_map(|r| r.results[k].as_ref()).collect();
    let m = ok.len() as f64;
    let mean = |f: &dyn Fn(&RobustEstimate) -> f64| -> f64 {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|e| f(e)).sum::<f64>() / m
        }
    };
    let mean_coeff = mean(&|e| e.psi_hat);
    let sd = if ok.len() < 2 {
        f64::NAN
    } else {
        (ok.iter().map(|e| (e.psi_hat - mean_coeff).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    };
    let mean_se = mean(&|e| e.se);
    let degrees: Vec<f64> = reps.iter().map(|r| r.degree).filter(|d| d.is_finite()).collect();
    let n = (size[0] + size[1]) as f64;
    CellSummary {
        design,
        n_agents: size[0],
        n_projects: size[1],
        sigma_sq,
        estimator,
        sigma_bar_sq,
        true_value: truth,
        true_se: truth_se,
        replications: reps.len(),
        n_failures: reps.len() - ok.len(),
        mean_coeff,
        rootn_bias: n.sqrt() * (mean_coeff - truth),
        mean_se,
        sd_coeff: sd,
        se_over_sd: mean_se / sd,
        mean_wc_rmse: mean(&|e| e.wc_rmse),
        ci_lo_mean: mean(&|e| e.ci_lo),
        ci_hi_mean: mean(&|e| e.ci_hi),
        mean_length: mean(&|e| e.ci_length()),
        coverage: mean(&|e| e.covers(truth) as u8 as f64),
        mean_degree: if degrees.is_empty() {
            f64::NAN
        } else {
            degrees.iter().sum::<f64>() / degrees.len() as f64
        },
        max_grad_norm: ok.iter().map(|e| e.init_grad_norm).fold(f64::NAN, f64::max),
    }
}

/// Six-decimal fixed notation, `NA` for non-finite values.
pub fn fmt6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "NA".into()
    }
}

pub const TABLE_HEADER: [&str; 15] = [
    "design",
    "n",
    "sigma_sq",
    "true",
    "coeff",
    "rootn_bias",
    "se",
    "se_sd",
    "rmse",
    "ci_lo",
    "ci_hi",
    "length",
    "cp95",
    "degree",
    "failures",
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Numeric(format!("CSV write to {}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One table per estimator (`{name}_{estimator}.csv`) in cell order, plus
/// `{name}_ratios.csv` with plug-in/robust worst-case rMSE ratios.
pub fn emit_tables(summary: &McSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &summary.config.name;
    let mut written = Vec::new();
    for &est in &summary.config.estimators {
        let rows: Vec<Vec<String>> = summary
            .for_estimator(est)
            .map(|c| {
                vec![
                    c.design.name().to_string(),
                    c.n().to_string(),
                    fmt6(c.sigma_sq),
                    fmt6(c.true_value),
                    fmt6(c.mean_coeff),
                    fmt6(c.rootn_bias),
                    fmt6(c.mean_se),
                    fmt6(c.se_over_sd),
                    fmt6(c.mean_wc_rmse),
                    fmt6(c.ci_lo_mean),
                    fmt6(c.ci_hi_mean),
                    fmt6(c.mean_length),
                    fmt6(c.coverage),
                    fmt6(c.mean_degree),
                    c.n_failures.to_string(),
                ]
            })
            .collect();
        let path = dir.join(format!("{name}_{}.csv", est.short_name()));
        write_rows(&path, &TABLE_HEADER, &rows)?;
        written.push(path);
    }
    let robust: Vec<&CellSummary> = summary.for_estimator(Estimator::RobustLogisticInit).collect();
    let plugins: Vec<Estimator> = summary
        .config
        .estimators
        .iter()
        .copied()
        .filter(|e| !e.is_robust())
        .collect();
    if !robust.is_empty() && !plugins.is_empty() {
        let mut rows = Vec::new();
        for r in &robust {
            for &p in &plugins {
                if let Some(c) = summary.for_estimator(p).find(|c| {
                    c.design == r.design && c.n_agents == r.n_agents && c.n_projects == r.n_projects && c.sigma_sq == r.sigma_sq
                }) {
                    rows.push(vec![
                        r.design.name().to_string(),
                        r.n().to_string(),
                        fmt6(r.sigma_sq),
                        p.short_name().to_string(),
                        fmt6(c.mean_wc_rmse / r.mean_wc_rmse),
                    ]);
                }
            }
        }
        let path = dir.join(format!("{name}_ratios.csv"));
        write_rows(&path, &["design", "n", "sigma_sq", "comparator", "ratio"], &rows)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_summary_json(summary: &McSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Numeric(format!("cannot serialize summary: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_summary_json(path: &Path) -> Result<McSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Plain-text tables: one block per (estimator, design, n), one row per σ².
pub fn render_report(summary: &McSummary) -> String {
    let mut out = String::new();
    let target = summary.config.target.label();
    for &est in &summary.config.estimators {
        let _ = writeln!(out, "== {} / {} ==", est.short_name(), target);
        let _ = writeln!(
            out,
            "{:>8} {:>10} {:>10} {:>10} {:>9} {:>8} {:>9} {:>22} {:>9} {:>7} {:>9}",
            "sigma^2", "true", "coeff", "rn-bias", "s.e.", "se/sd", "rMSE", "[conf. int.]", "length", "95%CP", "degree"
        );
        let mut last_block = None;
        for c in summary.for_estimator(est) {
            let block = (c.design, c.n_agents, c.n_projects);
            if last_block != Some(block) {
                let _ = writeln!(out, "-- {} n={} (N={}, M={}) --", c.design.name(), c.n(), c.n_agents, c.n_projects);
                last_block = Some(block);
            }
            let _ = writeln!(
                out,
                "{:>8} {:>10} {:>10} {:>10} {:>9} {:>8} {:>9} {:>22} {:>9} {:>7} {:>9}",
                fmt6(c.sigma_sq),
                fmt6(c.true_value),
                fmt6(c.mean_coeff),
                fmt6(c.rootn_bias),
                fmt6(c.mean_se),
                fmt6(c.se_over_sd),
                fmt6(c.mean_wc_rmse),
                format!("[{}, {}]", fmt6(c.ci_lo_mean), fmt6(c.ci_hi_mean)),
                fmt6(c.mean_length),
                fmt6(c.coverage),
                fmt6(c.mean_degree),
            );
        }
        let _ = writeln!(out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> McConfig {
        McConfig {
            name: "t".into(),
            designs: vec![Design::LatentHomophily],
            sigma_sq: vec![0.0, 4.0],
            sizes: vec![[30, 30]],
            estimators: vec![Estimator::RobustLogisticInit, Estimator::PluginLogistic],
            target: TargetKind::Coordinate { index: 1 },
            sieve: SieveSpec::hermite(2),
            replications: 6,
            alpha: 0.05,
            master_seed: 11,
            threads: Some(2),
            sigma_bar_sq: SigmaBarRule::Fixed(0.05),
            sigma_bar_grid: default_grid(),
            oracle_draws: 100_000,
            moment_link: Link::Exp,
            cv_mode: CvMode::Folded,
            alpha0: default_alpha0(),
            beta0: default_beta0(),
        }
    }

    #[test]
    fn config_json_defaults_and_rejection() {
        let text = r#"{"designs":["latent_homophily"],"sigma_sq":[0],"sizes":[[100,100]],
            "estimators":["robust_logistic_init"],"target":{"kind":"coordinate","index":1},
            "sieve":{"family":"hermite_scalar","k_n":2},"replications":10}"#;
        let c: McConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.sigma_bar_sq, SigmaBarRule::Named(SigmaBarKeyword::DesignMax));
        assert_eq!(c.alpha, 0.05);
        c.validate().unwrap();
        let with_fixed = text.replace("\"replications\":10", "\"replications\":10,\"sigma_bar_sq\":2.5");
        let c: McConfig = serde_json::from_str(&with_fixed).unwrap();
        assert_eq!(c.sigma_bar_sq, SigmaBarRule::Fixed(2.5));
        let unknown = text.replace("\"replications\":10", "\"replications\":10,\"bogus\":1");
        assert!(serde_json::from_str::<McConfig>(&unknown).is_err());
        let mut c = c;
        c.replications = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut a = small_config();
        a.threads = Some(1);
        let mut b = small_config();
        b.threads = Some(4);
        let sa = run_mc(&a).unwrap();
        let sb = run_mc(&b).unwrap();
        assert_eq!(sa.cells, sb.cells);
        assert_eq!(sa.cells.len(), 4);
        assert!(sa.cells.iter().all(|c| (0.0..=1.0).contains(&c.coverage)));
    }

    #[test]
    fn single_replication_reports_na_sd() {
        let mut c = small_config();
        c.replications = 1;
        c.sigma_sq = vec![0.0];
        c.estimators = vec![Estimator::RobustLogisticInit];
        let s = run_mc(&c).unwrap();
        let cell = &s.cells[0];
        let net = simulate_network(&SimulationDesign::new(
            Design::LatentHomophily,
            0.0,
            30,
            30,
            mix_seed(11, 0, 0),
        ))
        .unwrap();
        let e = estimate(&net, Estimator::RobustLogisticInit, c.target, &c.sieve, 0.05, &c.options()).unwrap();
        assert_eq!(cell.mean_coeff, e.psi_hat);
        assert_eq!(cell.mean_se, e.se);
        assert_eq!(cell.mean_wc_rmse, e.wc_rmse);
        assert!(cell.sd_coeff.is_nan());
        assert_eq!(fmt6(cell.se_over_sd), "NA");
    }

    #[test]
    fn tables_round_trip_and_layout() {
        let s = run_mc(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_tables(&s, dir.path()).unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["t_robust.csv", "t_plugin_logit.csv", "t_ratios.csv"]);
        let mut r = csv::Reader::from_path(&files[0]).unwrap();
        assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), TABLE_HEADER);
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        let robust: Vec<&CellSummary> = s.for_estimator(Estimator::RobustLogisticInit).collect();
        for (row, c) in rows.iter().zip(robust) {
            assert_eq!(&row[4], fmt6(c.mean_coeff));
            assert_eq!(&row[12], fmt6(c.coverage));
            let frac = row[4].split('.').nth(1).unwrap();
            assert_eq!(frac.len(), 6);
        }
    }

    #[test]
    fn empty_summary_gives_header_only() {
        let s = McSummary {
            config: small_config(),
            cells: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let files = emit_tables(&s, dir.path()).unwrap();
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("design,n,sigma_sq,true,coeff"));
    }

    #[test]
    fn summary_json_round_trip_and_report() {
        let s = run_mc(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        write_summary_json(&s, &p).unwrap();
        let back = read_summary_json(&p).unwrap();
        assert_eq!(back.cells.len(), s.cells.len());
        let rep = render_report(&back);
        assert!(rep.contains("== robust / theta[1] =="));
        assert!(rep.contains("latent_homophily n=60"));
    }
}
