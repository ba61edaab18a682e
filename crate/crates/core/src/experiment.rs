//! Monte-Carlo experiment harness.
//!
//! A sweep runs every (grid point, trial) pair on one freshly generated
//! instance shared by all requested methods, and emits one
//! [`ExperimentRecord`] per method in (grid point, trial, method) order. The
//! instance seed is `base_seed ^ hash(grid index, grid value, trial)`, so any
//! single trial can be regenerated from its record.

use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::hlloyd::hlloyd;
use crate::kmeans::KMeansConfig;
use crate::labels::ClusterAssignment;
use crate::metrics::{cer, mcr};
use crate::model::{generate_stochastic_tbm, generate_subgaussian_tbm, BlockModel, GeneratorOptions};
use crate::pipeline::{hhc, hsc, Method};
use crate::rng::hash_tags;
use crate::spectral::SpectralConfig;
use crate::tensor::Tensor3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Subgaussian,
    Stochastic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    /// Separation exponent of the Gaussian model.
    #[serde(rename = "delta")]
    Delta,
    /// Signal scale of the Bernoulli model.
    #[serde(rename = "a")]
    A,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Delta => "delta",
            SweepParam::A => "a",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

fn default_trials() -> usize {
    100
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_hlloyd_rounds() -> usize {
    10
}

/// JSON-facing experiment description. The k-means seed inside `kmeans` is
/// replaced by each trial's seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n: usize,
    pub k: usize,
    pub sweep: Sweep,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_hlloyd_rounds")]
    pub hlloyd_rounds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub kmeans: KMeansConfig,
    #[serde(default)]
    pub generator: GeneratorOptions,
    /// Record wall-clock runtimes. Off by default so output is reproducible
    /// byte for byte; `runtime_ms` is then written as 0.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return arg_err("trials must be at least 1");
        }
        if self.sweep.values.is_empty() {
            return arg_err("sweep grid is empty");
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return arg_err("sweep values must be finite");
        }
        if self.methods.is_empty() {
            return arg_err("no methods requested");
        }
        if self.k == 0 || self.n < self.k {
            return arg_err(format!("need n >= k >= 1, got n={}, k={}", self.n, self.k));
        }
        if self.hlloyd_rounds == 0 && self.methods.iter().any(|m| m.refines()) {
            return arg_err("hlloyd_rounds must be at least 1");
        }
        let expected = match self.model {
            ModelKind::Subgaussian => SweepParam::Delta,
            ModelKind::Stochastic => SweepParam::A,
        };
        if self.sweep.param != expected {
            return arg_err(format!(
                "model {:?} sweeps `{}`, not `{}`",
                self.model,
                expected.name(),
                self.sweep.param.name()
            ));
        }
        if self.kmeans.restarts == 0 {
            return arg_err("kmeans.restarts must be at least 1");
        }
        self.spectral.validate()
    }

    /// Seed of the instance at grid point `grid` and trial `trial`.
    pub fn trial_seed(&self, grid: usize, trial: usize) -> u64 {
        let value = self.sweep.values[grid];
        self.base_seed ^ hash_tags(&[grid as u64, value.to_bits(), trial as u64])
    }

    pub fn generate(&self, value: f64, seed: u64) -> Result<(Tensor3, BlockModel)> {
        match self.model {
            ModelKind::Subgaussian => generate_subgaussian_tbm(self.n, self.k, value, seed, self.generator),
            ModelKind::Stochastic => generate_stochastic_tbm(self.n, self.k, value, seed, self.generator),
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub param: SweepParam,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub mcr1: f64,
    pub mcr2: f64,
    pub mcr3: f64,
    pub cer1: f64,
    pub cer2: f64,
    pub cer3: f64,
    pub exact: bool,
    pub runtime_ms: u64,
}

pub const CSV_HEADER: &str =
    "method,n1,n2,n3,k1,k2,k3,param,value,trial,seed,mcr1,mcr2,mcr3,cer1,cer2,cer3,exact,runtime_ms";

impl ExperimentRecord {
    pub fn mcr(&self) -> [f64; 3] {
        [self.mcr1, self.mcr2, self.mcr3]
    }

    pub fn cer(&self) -> [f64; 3] {
        [self.cer1, self.cer2, self.cer3]
    }

    /// Mean CER over the three modes.
    pub fn mean_cer(&self) -> f64 {
        (self.cer1 + self.cer2 + self.cer3) / 3.0
    }
}

/// Per-mode MCR and CER of an estimate against the truth.
pub fn score(truth: &[ClusterAssignment; 3], est: &[ClusterAssignment; 3]) -> Result<([f64; 3], [f64; 3])> {
    let mut m = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        m[i] = mcr(&truth[i], &est[i])?;
        c[i] = cer(&truth[i], &est[i])?;
    }
    Ok((m, c))
}

fn clock(timing: bool) -> Option<Instant> {
    timing.then(Instant::now)
}

fn elapsed_ms(start: Option<Instant>) -> u64 {
    start.map_or(0, |s| s.elapsed().as_millis() as u64)
}

/// Runs every requested method on the instance of one (grid point, trial).
pub fn run_trial(cfg: &ExperimentConfig, grid: usize, trial: usize) -> Result<Vec<ExperimentRecord>> {
    let value = cfg.sweep.values[grid];
    let seed = cfg.trial_seed(grid, trial);
    let (y, truth) = cfg.generate(value, seed)?;
    let k = [cfg.k; 3];
    let kcfg = cfg.kmeans.with_seed(seed);

    let need_hhc = cfg.methods.iter().any(|m| m.uses_hhc());
    let need_hsc = cfg.methods.iter().any(|m| !m.uses_hhc());
    let start = clock(cfg.timing);
    let hhc_labels = if need_hhc {
        Some(hhc(&y, k, &cfg.spectral, &kcfg)?.assignments)
    } else {
        None
    };
    let hhc_ms = elapsed_ms(start);
    let start = clock(cfg.timing);
    let hsc_labels = if need_hsc {
        Some(hsc(&y, k, &kcfg)?.assignments)
    } else {
        None
    };
    let hsc_ms = elapsed_ms(start);

    let dims = y.dims();
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let (base, base_ms) = if method.uses_hhc() {
            (hhc_labels.as_ref().expect("computed"), hhc_ms)
        } else {
            (hsc_labels.as_ref().expect("computed"), hsc_ms)
        };
        let start = clock(cfg.timing);
        let labels = if method.refines() {
            hlloyd(&y, base, cfg.hlloyd_rounds)?.assignments
        } else {
            base.clone()
        };
        let runtime_ms = base_ms + elapsed_ms(start);
        let (m, c) = score(&truth.assignments, &labels)?;
        out.push(ExperimentRecord {
            method,
            n1: dims[0],
            n2: dims[1],
            n3: dims[2],
            k1: k[0],
            k2: k[1],
            k3: k[2],
            param: cfg.sweep.param,
            value,
            trial,
            seed,
            mcr1: m[0],
            mcr2: m[1],
            mcr3: m[2],
            cer1: c[0],
            cer2: c[1],
            cer3: c[2],
            exact: m.iter().all(|&x| x == 0.0),
            runtime_ms,
        });
    }
    Ok(out)
}

/// Runs the full sweep on up to `jobs` threads (0 means all cores). Output
/// order does not depend on `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize)> = (0..cfg.sweep.values.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let per_task = run_tasks(cfg, &tasks, jobs)?;
    Ok(per_task.into_iter().flatten().collect())
}

#[cfg(feature = "parallel")]
fn run_tasks(cfg: &ExperimentConfig, tasks: &[(usize, usize)], jobs: usize) -> Result<Vec<Vec<ExperimentRecord>>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| tasks.par_iter().map(|&(g, t)| run_trial(cfg, g, t)).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_tasks(cfg: &ExperimentConfig, tasks: &[(usize, usize)], _jobs: usize) -> Result<Vec<Vec<ExperimentRecord>>> {
    tasks.iter().map(|&(g, t)| run_trial(cfg, g, t)).collect()
}

pub fn write_records<W: Write>(records: &[ExperimentRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if records.is_empty() {
        wtr.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    for r in records {
        wtr.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Io {
        path: "<csv output>".into(),
        source: e,
    })
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse("unexpected CSV header".into()));
    }
    rdr.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

/// Aggregate over the trials of one (method, grid point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub param: SweepParam,
    pub value: f64,
    pub trials: usize,
    /// Mean over trials of the mode-averaged CER.
    pub cer_mean: f64,
    /// Sample standard deviation (divisor `trials - 1`; 0 for one trial).
    pub cer_std: f64,
    /// Fraction of trials with MCR 0 on all three modes.
    pub recovery_rate: f64,
}

/// Groups records by (method, grid value) in order of first appearance.
pub fn summarize(records: &[ExperimentRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return arg_err("nothing to summarize");
    }
    let mut keys: Vec<(Method, SweepParam, u64)> = Vec::new();
    let mut groups: Vec<Vec<&ExperimentRecord>> = Vec::new();
    for r in records {
        let key = (r.method, r.param, r.value.to_bits());
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(r),
            None => {
                keys.push(key);
                groups.push(vec![r]);
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let n = g.len();
            let cers: Vec<f64> = g.iter().map(|r| r.mean_cer()).collect();
            let mean = cers.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (cers.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                method: g[0].method,
                param: g[0].param,
                value: g[0].value,
                trials: n,
                cer_mean: mean,
                cer_std: std,
                recovery_rate: g.iter().filter(|r| r.exact).count() as f64 / n as f64,
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Io {
        path: "<csv output>".into(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: Method, value: f64, cer: f64, exact: bool) -> ExperimentRecord {
        ExperimentRecord {
            method,
            n1: 4,
            n2: 4,
            n3: 4,
            k1: 2,
            k2: 2,
            k3: 2,
            param: SweepParam::Delta,
            value,
            trial: 0,
            seed: 1,
            mcr1: 0.0,
            mcr2: 0.0,
            mcr3: 0.0,
            cer1: cer,
            cer2: cer,
            cer3: cer,
            exact,
            runtime_ms: 0,
        }
    }

    #[test]
    fn summary_of_exact_records() {
        let rows = summarize(&[record(Method::Hhc, 0.5, 0.0, true), record(Method::Hhc, 0.5, 0.0, true)]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].cer_mean, 0.0);
        assert_eq!(rows[0].recovery_rate, 1.0);
    }

    #[test]
    fn summary_sample_std() {
        let rows = summarize(&[record(Method::Hsc, 0.5, 0.0, true), record(Method::Hsc, 0.5, 1.0, false)]).unwrap();
        assert_eq!(rows[0].cer_mean, 0.5);
        assert!((rows[0].cer_std - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rows[0].recovery_rate, 0.5);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summary_groups_in_first_seen_order() {
        let rows = summarize(&[
            record(Method::Hsc, 0.5, 0.0, true),
            record(Method::Hhc, 0.5, 0.0, true),
            record(Method::Hsc, 0.9, 0.0, true),
            record(Method::Hsc, 0.5, 0.0, true),
        ])
        .unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.method, r.value, r.trials)).collect();
        assert_eq!(keys, vec![(Method::Hsc, 0.5, 2), (Method::Hhc, 0.5, 1), (Method::Hsc, 0.9, 1)]);
    }

    #[test]
    fn config_rejects_unknown_keys_and_mismatched_param() {
        let ok = r#"{"model":"subgaussian","n":8,"k":2,"sweep":{"param":"delta","values":[0.5]}}"#;
        let cfg = ExperimentConfig::from_json(ok).unwrap();
        assert_eq!(cfg.trials, 100);
        assert_eq!(cfg.methods, Method::ALL.to_vec());
        assert_eq!(cfg.hlloyd_rounds, 10);
        let extra = r#"{"model":"subgaussian","n":8,"k":2,"sweep":{"param":"delta","values":[0.5]},"bogus":1}"#;
        assert!(ExperimentConfig::from_json(extra).is_err());
        let wrong = r#"{"model":"stochastic","n":8,"k":2,"sweep":{"param":"delta","values":[0.5]}}"#;
        assert!(ExperimentConfig::from_json(wrong).is_err());
        let empty = r#"{"model":"subgaussian","n":8,"k":2,"sweep":{"param":"delta","values":[]}}"#;
        assert!(ExperimentConfig::from_json(empty).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let mut r = record(Method::HscHlloyd, 0.1 + 0.2, 1.0 / 3.0, false);
        r.seed = u64::MAX;
        let mut buf = Vec::new();
        write_records(&[r.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_records(&buf[..]).unwrap(), vec![r]);
    }
}
