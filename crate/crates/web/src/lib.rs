//! Browser demo: simulate a block model, cluster it with both pipelines and
//! inspect the deflation spectrum, all client-side.
//!
//! Each exported function returns a JSON string; the plain functions behind
//! them are ordinary Rust and are tested natively.

use heteroclust::experiment::{run_experiment, summarize, ExperimentConfig, ModelKind, Sweep, SweepParam, SummaryRow};
use heteroclust::linalg::{abs_spectrum, gram, p_offdiag, sym_eig_top};
use heteroclust::metrics::{cer, mcr};
use heteroclust::model::{generate_stochastic_tbm, generate_subgaussian_tbm, BlockModel};
use heteroclust::spectral::{select_threshold, thresholded_deflated_hetero_pca};
use heteroclust::{
    hhc, hlloyd, hsc, matricize, ClusterAssignment, ClusterResult, GeneratorOptions, KMeansConfig, Matrix, Method,
    SpectralConfig, Tensor3,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_N: usize = 120;
const HLLOYD_ROUNDS: usize = 10;

#[derive(Serialize)]
pub struct MethodScore {
    pub method: Method,
    pub mcr: [f64; 3],
    pub cer: [f64; 3],
    pub exact: bool,
}

/// 2-D principal coordinates of the mode-1 projected rows.
#[derive(Serialize)]
pub struct Scatter {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub labels: Vec<usize>,
}

#[derive(Serialize)]
pub struct ClusterDemo {
    pub dims: [usize; 3],
    pub tau: f64,
    pub truth: Vec<usize>,
    pub scores: Vec<MethodScore>,
    pub hhc_scatter: Scatter,
    pub hsc_scatter: Scatter,
}

#[derive(Serialize)]
pub struct DeflationDemo {
    pub mode: usize,
    /// Leading absolute eigenvalues of the diagonal-deleted Gram matrix.
    pub spectrum: Vec<f64>,
    pub tau: f64,
    pub thresholds_seen: Vec<f64>,
    pub ranks: Vec<usize>,
    pub degenerate: bool,
}

fn model_kind(model: &str) -> Result<ModelKind, String> {
    match model {
        "subgaussian" => Ok(ModelKind::Subgaussian),
        "stochastic" => Ok(ModelKind::Stochastic),
        other => Err(format!("unknown model `{other}`")),
    }
}

fn instance(model: &str, n: usize, k: usize, param: f64, seed: u64) -> Result<(Tensor3, BlockModel), String> {
    if n > MAX_N {
        return Err(format!("n is capped at {MAX_N} in the browser"));
    }
    if k < 2 {
        return Err("k must be at least 2".into());
    }
    let opts = GeneratorOptions::default();
    let out = match model_kind(model)? {
        ModelKind::Subgaussian => generate_subgaussian_tbm(n, k, param, seed, opts),
        ModelKind::Stochastic => generate_stochastic_tbm(n, k, param, seed, opts),
    };
    out.map_err(|e| e.to_string())
}

fn scatter(points: &Matrix, labels: &ClusterAssignment) -> Result<Scatter, String> {
    let eig = sym_eig_top(&gram(points), 2.min(points.rows())).map_err(|e| e.to_string())?;
    let coord = |c: usize| -> Vec<f64> {
        if c >= eig.rank() {
            return vec![0.0; points.rows()];
        }
        let s = eig.values[c].max(0.0).sqrt();
        (0..points.rows()).map(|i| eig.vectors.get(i, c) * s).collect()
    };
    Ok(Scatter {
        x: coord(0),
        y: coord(1),
        labels: labels.labels().to_vec(),
    })
}

fn score(method: Method, truth: &[ClusterAssignment; 3], est: &[ClusterAssignment; 3]) -> Result<MethodScore, String> {
    let mut m = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        m[i] = mcr(&truth[i], &est[i]).map_err(|e| e.to_string())?;
        c[i] = cer(&truth[i], &est[i]).map_err(|e| e.to_string())?;
    }
    Ok(MethodScore {
        method,
        mcr: m,
        cer: c,
        exact: m.iter().all(|&x| x == 0.0),
    })
}

pub fn cluster_demo(model: &str, n: usize, k: usize, param: f64, seed: u64) -> Result<ClusterDemo, String> {
    let (y, bm) = instance(model, n, k, param, seed)?;
    let ks = [k; 3];
    let kcfg = KMeansConfig::default().with_seed(seed);
    let a: ClusterResult = hhc(&y, ks, &SpectralConfig::default(), &kcfg).map_err(|e| e.to_string())?;
    let b: ClusterResult = hsc(&y, ks, &kcfg).map_err(|e| e.to_string())?;
    let refine = |init: &[ClusterAssignment; 3]| {
        hlloyd(&y, init, HLLOYD_ROUNDS)
            .map(|r| r.assignments)
            .map_err(|e| e.to_string())
    };
    let scores = vec![
        score(Method::Hhc, &bm.assignments, &a.assignments)?,
        score(Method::Hsc, &bm.assignments, &b.assignments)?,
        score(Method::HhcHlloyd, &bm.assignments, &refine(&a.assignments)?)?,
        score(Method::HscHlloyd, &bm.assignments, &refine(&b.assignments)?)?,
    ];
    Ok(ClusterDemo {
        dims: y.dims(),
        tau: a.tau,
        truth: bm.assignments[0].labels().to_vec(),
        scores,
        hhc_scatter: scatter(&a.projected[0], &a.assignments[0])?,
        hsc_scatter: scatter(&b.projected[0], &b.assignments[0])?,
    })
}

pub fn deflation_demo(model: &str, n: usize, k: usize, param: f64, seed: u64, mode: usize) -> Result<DeflationDemo, String> {
    if mode > 2 {
        return Err("mode must be 0, 1 or 2".into());
    }
    let (y, _) = instance(model, n, k, param, seed)?;
    let cfg = SpectralConfig::default();
    let tau = select_threshold(&y, [k; 3], &cfg).map_err(|e| e.to_string())?;
    let unfolded = matricize(&y, mode).map_err(|e| e.to_string())?;
    let g0 = p_offdiag(&gram(&unfolded)).map_err(|e| e.to_string())?;
    let mut spectrum = abs_spectrum(&g0).map_err(|e| e.to_string())?;
    spectrum.truncate(3 * k + 3);
    let est = thresholded_deflated_hetero_pca(&unfolded, k, tau, &cfg).map_err(|e| e.to_string())?;
    Ok(DeflationDemo {
        mode,
        spectrum,
        tau,
        thresholds_seen: est.trace.thresholds_seen,
        ranks: est.trace.ranks,
        degenerate: est.trace.degenerate,
    })
}

pub fn sweep_demo(model: &str, n: usize, k: usize, values: &[f64], trials: usize, seed: u64) -> Result<Vec<SummaryRow>, String> {
    if n > MAX_N {
        return Err(format!("n is capped at {MAX_N} in the browser"));
    }
    let kind = model_kind(model)?;
    let cfg = ExperimentConfig {
        model: kind,
        n,
        k,
        sweep: Sweep {
            param: match kind {
                ModelKind::Subgaussian => SweepParam::Delta,
                ModelKind::Stochastic => SweepParam::A,
            },
            values: values.to_vec(),
        },
        trials,
        methods: Method::ALL.to_vec(),
        hlloyd_rounds: HLLOYD_ROUNDS,
        base_seed: seed,
        spectral: SpectralConfig::default(),
        kmeans: KMeansConfig::default(),
        generator: GeneratorOptions::default(),
        timing: false,
    };
    let records = run_experiment(&cfg, 1).map_err(|e| e.to_string())?;
    summarize(&records).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// Simulates one instance and scores all four methods. `param` is delta for
/// the subgaussian model and a for the stochastic one.
#[wasm_bindgen]
pub fn simulate_and_cluster(model: &str, n: usize, k: usize, param: f64, seed: u32) -> Result<String, JsValue> {
    to_json(cluster_demo(model, n, k, param, seed as u64))
}

#[wasm_bindgen]
pub fn deflation_spectrum(model: &str, n: usize, k: usize, param: f64, seed: u32, mode: usize) -> Result<String, JsValue> {
    to_json(deflation_demo(model, n, k, param, seed as u64, mode))
}

/// `values` is a comma-separated grid.
#[wasm_bindgen]
pub fn sweep(model: &str, n: usize, k: usize, values: &str, trials: usize, seed: u32) -> Result<String, JsValue> {
    let grid: Result<Vec<f64>, String> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect();
    to_json(grid.and_then(|g| sweep_demo(model, n, k, &g, trials, seed as u64)))
}
