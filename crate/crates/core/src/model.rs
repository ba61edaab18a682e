//! Tensor block models: ground truth, signal assembly and the two synthetic
//! generators (heteroskedastic Gaussian and Bernoulli).

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::labels::ClusterAssignment;
use crate::matrix::Matrix;
use crate::metrics::separation_delta;
use crate::rng::{derive_seed, SeededRng};
use crate::tensor::{mode_product, Tensor3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    HeteroskedasticGaussian,
    Bernoulli,
    None,
}

/// Noise description. For the Gaussian kind, entry `(i, j, l)` has standard
/// deviation `alpha[i] * beta[j] * gamma[l]` with `mode_scales = [alpha, beta, gamma]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub mode_scales: Option<[Vec<f64>; 3]>,
}

impl NoiseSpec {
    pub fn heteroskedastic(scales: [Vec<f64>; 3]) -> Self {
        Self {
            kind: NoiseKind::HeteroskedasticGaussian,
            mode_scales: Some(scales),
        }
    }

    pub fn bernoulli() -> Self {
        Self {
            kind: NoiseKind::Bernoulli,
            mode_scales: None,
        }
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            mode_scales: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockModel {
    /// `k1 x k2 x k3` core tensor.
    pub core: Tensor3,
    pub assignments: [ClusterAssignment; 3],
    pub noise: NoiseSpec,
}

impl BlockModel {
    pub fn new(core: Tensor3, assignments: [ClusterAssignment; 3], noise: NoiseSpec) -> Result<Self> {
        let ks = [assignments[0].k(), assignments[1].k(), assignments[2].k()];
        if core.dims() != ks {
            return arg_err(format!("core dims {:?} do not match cluster counts {ks:?}", core.dims()));
        }
        let dims = [assignments[0].len(), assignments[1].len(), assignments[2].len()];
        match noise.kind {
            NoiseKind::Bernoulli => {
                if core.as_slice().iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return arg_err("Bernoulli core entries must lie in [0, 1]");
                }
            }
            NoiseKind::HeteroskedasticGaussian => match &noise.mode_scales {
                Some(scales) => {
                    for m in 0..3 {
                        if scales[m].len() != dims[m] || scales[m].iter().any(|&s| !(s >= 0.0)) {
                            return arg_err(format!("mode-{m} noise scales must be {} nonnegative values", dims[m]));
                        }
                    }
                }
                None => return arg_err("heteroskedastic noise needs mode scales"),
            },
            NoiseKind::None => {}
        }
        Ok(Self {
            core,
            assignments,
            noise,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.assignments[0].len(),
            self.assignments[1].len(),
            self.assignments[2].len(),
        ]
    }

    pub fn ks(&self) -> [usize; 3] {
        self.core.dims()
    }
}

/// `n x k` 0/1 matrix with a single one per row, in the column of the label.
pub fn membership_matrix(z: &ClusterAssignment) -> Matrix {
    Matrix::from_fn(z.len(), z.k(), |j, l| if z.get(j) == l { 1.0 } else { 0.0 })
}

/// Noiseless signal: entry `(i, j, l)` is `core[z1_i, z2_j, z3_l]`.
pub fn assemble_signal(bm: &BlockModel) -> Tensor3 {
    let [z1, z2, z3] = &bm.assignments;
    Tensor3::from_fn(bm.dims(), |i, j, l| bm.core.get(z1.get(i), z2.get(j), z3.get(l)))
}

/// Same signal built as `core ×1 M1 ×2 M2 ×3 M3`.
pub fn assemble_signal_multilinear(bm: &BlockModel) -> Result<Tensor3> {
    let mut t = bm.core.clone();
    for (mode, z) in bm.assignments.iter().enumerate() {
        t = mode_product(&t, &membership_matrix(z), mode)?;
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorOptions {
    /// Use cluster sizes that differ by at most one instead of i.i.d. labels.
    pub exact_balance: bool,
}

// Sub-stream tags.
const STREAM_CORE: u64 = 1;
const STREAM_LABELS: u64 = 2;
const STREAM_SCALES: u64 = 3;
const STREAM_NOISE: u64 = 4;

fn draw_assignment(rng: &mut SeededRng, n: usize, k: usize, opts: GeneratorOptions) -> ClusterAssignment {
    if opts.exact_balance {
        let mut labels: Vec<usize> = (0..n).map(|j| j % k).collect();
        rng.shuffle(&mut labels);
        return ClusterAssignment::new(labels, k).expect("labels in range");
    }
    loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let z = ClusterAssignment::new(labels, k).expect("labels in range");
        if z.sizes().iter().all(|&s| s > 0) {
            return z;
        }
    }
}

fn draw_assignments(seed: u64, n: usize, k: usize, opts: GeneratorOptions) -> [ClusterAssignment; 3] {
    let mut rng = SeededRng::new(derive_seed(seed, &[STREAM_LABELS]));
    [
        draw_assignment(&mut rng, n, k, opts),
        draw_assignment(&mut rng, n, k, opts),
        draw_assignment(&mut rng, n, k, opts),
    ]
}

fn check_sizes(n: usize, k: usize) -> Result<()> {
    if k == 0 || n < k {
        return arg_err(format!("need n >= k >= 1, got n={n}, k={k}"));
    }
    Ok(())
}

/// Target minimum separation `40 n^{-delta}`.
pub fn subgaussian_separation(n: usize, delta: f64) -> f64 {
    40.0 * (n as f64).powf(-delta)
}

/// Gaussian core rescaled so its minimum separation equals `40 n^{-delta}`.
pub fn subgaussian_core(n: usize, k: usize, delta: f64, seed: u64) -> Tensor3 {
    let target = subgaussian_separation(n, delta);
    for attempt in 0u64.. {
        let mut rng = SeededRng::new(derive_seed(seed, &[STREAM_CORE, attempt]));
        let raw = Tensor3::from_fn([k, k, k], |_, _, _| rng.normal());
        let sep = separation_delta(&raw).min;
        if sep.is_infinite() {
            // k = 1: nothing to separate
            return raw;
        }
        if sep > 0.0 {
            return raw.scale(target / sep);
        }
        log::warn!("core draw {attempt} has zero separation, redrawing");
    }
    unreachable!()
}

/// Gaussian block model with `n1 = n2 = n3 = n` and `k1 = k2 = k3 = k`.
///
/// Core entries are standard normal, rescaled to separation `40 n^{-delta}`;
/// labels are i.i.d. uniform (redrawn until no cluster is empty); per-mode
/// scales are uniform on `[0, 2]`; noise entry `(i, j, l)` is
/// `N(0, (alpha_i beta_j gamma_l)^2)`.
pub fn generate_subgaussian_tbm(
    n: usize,
    k: usize,
    delta: f64,
    seed: u64,
    opts: GeneratorOptions,
) -> Result<(Tensor3, BlockModel)> {
    check_sizes(n, k)?;
    if !delta.is_finite() {
        return arg_err("delta must be finite");
    }
    let core = subgaussian_core(n, k, delta, seed);
    let assignments = draw_assignments(seed, n, k, opts);
    let mut rng = SeededRng::new(derive_seed(seed, &[STREAM_SCALES]));
    let scales: [Vec<f64>; 3] = std::array::from_fn(|_| (0..n).map(|_| rng.uniform_in(0.0, 2.0)).collect());
    let bm = BlockModel::new(core, assignments, NoiseSpec::heteroskedastic(scales))?;
    let signal = assemble_signal(&bm);
    let [alpha, beta, gamma] = bm.noise.mode_scales.as_ref().expect("set above");
    let mut rng = SeededRng::new(derive_seed(seed, &[STREAM_NOISE]));
    let y = Tensor3::from_fn(signal.dims(), |i, j, l| {
        signal.get(i, j, l) + alpha[i] * beta[j] * gamma[l] * rng.normal()
    });
    Ok((y, bm))
}

/// Diagonal-dominant probability core: diagonal cell `(i, i, i)` (0-based) is
/// `10 a n^{-3/2} (1 - i / (2 (k - 1)))`, every other cell `0.1 a n^{-3/2}`.
pub fn stochastic_core(n: usize, k: usize, a: f64) -> Result<Tensor3> {
    if !(a > 0.0 && a.is_finite()) {
        return arg_err(format!("a must be positive, got {a}"));
    }
    let base = a * (n as f64).powf(-1.5);
    let core = Tensor3::from_fn([k, k, k], |i, j, l| {
        if i == j && j == l {
            let taper = if k > 1 {
                1.0 - i as f64 / (2.0 * (k - 1) as f64)
            } else {
                1.0
            };
            10.0 * base * taper
        } else {
            0.1 * base
        }
    });
    if let Some(p) = core.as_slice().iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
        return arg_err(format!("core probability {p} outside [0, 1]; reduce a"));
    }
    Ok(core)
}

/// Bernoulli block model: `Y_{ijl} ~ Bernoulli(core[z1_i, z2_j, z3_l])`.
pub fn generate_stochastic_tbm(
    n: usize,
    k: usize,
    a: f64,
    seed: u64,
    opts: GeneratorOptions,
) -> Result<(Tensor3, BlockModel)> {
    check_sizes(n, k)?;
    let core = stochastic_core(n, k, a)?;
    let assignments = draw_assignments(seed, n, k, opts);
    let bm = BlockModel::new(core, assignments, NoiseSpec::bernoulli())?;
    let probs = assemble_signal(&bm);
    let mut rng = SeededRng::new(derive_seed(seed, &[STREAM_NOISE]));
    let y = Tensor3::from_fn(probs.dims(), |i, j, l| {
        if rng.uniform() < probs.get(i, j, l) {
            1.0
        } else {
            0.0
        }
    });
    Ok((y, bm))
}
