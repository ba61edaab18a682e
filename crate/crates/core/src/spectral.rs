//! Subspace estimation for heteroskedastic data.
//!
//! The main entry point is [`thresholded_deflated_hetero_pca`]: start from the
//! diagonal-deleted Gram matrix of the data, then repeatedly pick a
//! well-conditioned block of leading eigenvalues ([`rank_selection`]) and
//! re-impute the diagonal with [`hetero_pca`], stopping once the next
//! eigenvalue of the working Gram estimate drops below a threshold `tau`.
//! [`vanilla_svd_subspace`] is the plain left-singular-subspace baseline.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::linalg::{abs_spectrum, gram, p_offdiag, singular_values, sym_eig_top, sym_eig_top_full, sym_eig_top_warm};
use crate::matrix::Matrix;
use crate::tensor::{matricize, Tensor3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    /// `tau_const * sqrt(n1 n2 n3) * omega_hat^2`
    #[default]
    Empirical,
    /// The empirical rule times `ln(max n_i)^2`.
    Theoretical,
    /// Use `tau_fixed` verbatim.
    Fixed,
}

impl std::str::FromStr for TauMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "empirical" => Ok(TauMode::Empirical),
            "theoretical" => Ok(TauMode::Theoretical),
            "fixed" => Ok(TauMode::Fixed),
            other => Err(format!("unknown tau mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub tau_mode: TauMode,
    pub tau_const: f64,
    pub tau_fixed: f64,
    /// HeteroPCA iterations per deflation round.
    pub iters_per_round: usize,
    /// Round cap; `None` means the requested rank.
    pub max_rounds: Option<usize>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            tau_mode: TauMode::Empirical,
            tau_const: 1.1,
            tau_fixed: 0.0,
            iters_per_round: 10,
            max_rounds: None,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_const > 0.0 && self.tau_const.is_finite()) {
            return arg_err(format!("tau_const must be positive, got {}", self.tau_const));
        }
        if self.iters_per_round < 1 {
            return arg_err("iters_per_round must be at least 1");
        }
        if self.tau_mode == TauMode::Fixed && !(self.tau_fixed >= 0.0 && self.tau_fixed.is_finite()) {
            return arg_err(format!("tau_fixed must be nonnegative, got {}", self.tau_fixed));
        }
        if self.max_rounds == Some(0) {
            return arg_err("max_rounds must be at least 1");
        }
        Ok(())
    }
}

/// Record of the deflation rounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DeflationTrace {
    /// Rank selected in each round, strictly increasing.
    pub ranks: Vec<usize>,
    /// `sigma_{r_j + 1}(G_j)` at every evaluation of the loop guard.
    pub thresholds_seen: Vec<f64>,
    /// HeteroPCA iteration count per round.
    pub iters: Vec<usize>,
    /// The guard failed before any round ran; the basis is the leading
    /// eigenvector of the diagonal-deleted Gram matrix.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct SubspaceEstimate {
    /// `n x rank` with orthonormal columns.
    pub basis: Matrix,
    pub rank: usize,
    pub trace: DeflationTrace,
}

/// One HeteroPCA call: for `t = 0..=t_max`, take the rank-`r` leading
/// eigendecomposition of `G^t` and replace the diagonal of `G^t` with the
/// diagonal of the low-rank reconstruction.
///
/// Returns the last imputed matrix `G^{t_max + 1}` and the basis `U^{t_max}`.
/// Off-diagonal entries of the input are never touched.
pub fn hetero_pca(g_in: &Matrix, r: usize, t_max: usize) -> Result<(Matrix, Matrix)> {
    let n = g_in.rows();
    if !g_in.is_square() {
        return arg_err(format!("HeteroPCA needs a square matrix, got {}x{}", n, g_in.cols()));
    }
    if r == 0 || r > n {
        return arg_err(format!("HeteroPCA rank {r} outside 1..={n}"));
    }
    let mut g = g_in.clone();
    let mut basis = None;
    let mut rotation: Option<Matrix> = None;
    for _t in 0..=t_max {
        // Successive iterates differ only on the diagonal, so the previous
        // eigenbasis is a good starting point for the next solve.
        let (eig, full) = match &rotation {
            None => sym_eig_top_full(&g, r)?,
            Some(start) => sym_eig_top_warm(&g, r, start)?,
        };
        for (i, d) in eig.reconstruct_diagonal().into_iter().enumerate() {
            g.set(i, i, d);
        }
        basis = Some(eig.vectors);
        rotation = Some(full);
    }
    Ok((g, basis.expect("loop runs at least once")))
}

/// Rank selection on a precomputed spectrum `sigma` (descending, entries past
/// the end read as zero). Ranks are 1-based as in the selection rule: the
/// candidate set holds every `r'` in `(r_prev, r]` with
/// `sigma[r_prev+1] / sigma[r'] <= 4` and `sigma[r'] - sigma[r'+1] >= sigma[r'] / r`.
/// Returns the largest candidate, or `r` when there is none.
pub fn rank_selection_from_spectrum(sigma: &[f64], r: usize, r_prev: usize) -> usize {
    let at = |idx: usize| -> f64 {
        // 1-based
        sigma.get(idx - 1).copied().unwrap_or(0.0)
    };
    let head = at(r_prev + 1);
    let rf = r as f64;
    (r_prev + 1..=r)
        .rev()
        .find(|&rp| {
            let s = at(rp);
            s > 0.0 && head / s <= 4.0 && s - at(rp + 1) >= s / rf
        })
        .unwrap_or(r)
}

/// Selects the next deflation rank from the `|eigenvalue|` spectrum of `g`.
pub fn rank_selection(g: &Matrix, r: usize, r_prev: usize) -> Result<usize> {
    if r_prev >= r || r > g.rows() {
        return arg_err(format!(
            "rank selection needs r_prev < r <= n, got r_prev={r_prev}, r={r}, n={}",
            g.rows()
        ));
    }
    Ok(rank_selection_from_spectrum(&abs_spectrum(g)?, r, r_prev))
}

/// Deflated HeteroPCA with an eigenvalue threshold.
///
/// Rounds continue while fewer than `r` directions have been selected and
/// `sigma_{r_j+1}(G_j) > tau`.
pub fn thresholded_deflated_hetero_pca(
    y: &Matrix,
    r: usize,
    tau: f64,
    cfg: &SpectralConfig,
) -> Result<SubspaceEstimate> {
    cfg.validate()?;
    if !(tau >= 0.0) {
        return arg_err(format!("threshold must be nonnegative, got {tau}"));
    }
    if r == 0 || r > y.rows() {
        return arg_err(format!("rank {r} outside 1..={}", y.rows()));
    }
    let g0 = p_offdiag(&gram(y))?;
    let max_rounds = cfg.max_rounds.unwrap_or(r);
    let mut trace = DeflationTrace::default();
    let mut g = g0.clone();
    let mut basis: Option<Matrix> = None;
    let mut r_prev = 0;
    while r_prev < r {
        let spectrum = abs_spectrum(&g)?;
        let next = spectrum.get(r_prev).copied().unwrap_or(0.0);
        trace.thresholds_seen.push(next);
        if !(next > tau) || trace.ranks.len() >= max_rounds {
            break;
        }
        let r_j = rank_selection_from_spectrum(&spectrum, r, r_prev);
        let (g_next, u) = hetero_pca(&g, r_j, cfg.iters_per_round)?;
        g = g_next;
        basis = Some(u);
        trace.ranks.push(r_j);
        trace.iters.push(cfg.iters_per_round);
        r_prev = r_j;
    }
    let basis = match basis {
        Some(u) => u,
        None => {
            log::debug!("deflation loop never ran (sigma_1 <= tau = {tau}); using leading eigenvector");
            trace.degenerate = true;
            sym_eig_top(&g0, 1)?.vectors
        }
    };
    Ok(SubspaceEstimate {
        rank: basis.cols(),
        basis,
        trace,
    })
}

/// Top-`r` left singular subspace of `y`.
pub fn vanilla_svd_subspace(y: &Matrix, r: usize) -> Result<SubspaceEstimate> {
    if r == 0 || r > y.rows() {
        return arg_err(format!("rank {r} outside 1..={}", y.rows()));
    }
    let eig = sym_eig_top(&gram(y), r)?;
    Ok(SubspaceEstimate {
        basis: eig.vectors,
        rank: r,
        trace: DeflationTrace::default(),
    })
}

/// Mode of smallest dimension, lowest index on ties.
pub fn smallest_mode(dims: [usize; 3]) -> usize {
    (0..3).min_by_key(|&m| (dims[m], m)).expect("three modes")
}

/// Noise-level estimate `sigma_{k_m + 1}(M_m(Y)) / sqrt(N / n_m)` on the
/// smallest mode `m`.
pub fn estimate_noise_scale(y: &Tensor3, k: [usize; 3]) -> Result<f64> {
    let dims = y.dims();
    let m = smallest_mode(dims);
    if k[m] + 1 > dims[m] {
        return arg_err(format!(
            "noise estimate needs k+1 <= n on mode {m}: k={}, n={}",
            k[m], dims[m]
        ));
    }
    let unfolded = matricize(y, m)?;
    let sv = singular_values(&unfolded)?;
    let other = (y.len() / dims[m]) as f64;
    Ok(sv.get(k[m]).copied().unwrap_or(0.0) / other.sqrt())
}

/// Data-driven deflation threshold.
pub fn select_threshold(y: &Tensor3, k: [usize; 3], cfg: &SpectralConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.tau_mode == TauMode::Fixed {
        return Ok(cfg.tau_fixed);
    }
    let omega = estimate_noise_scale(y, k)?;
    Ok(threshold_from_noise(y.dims(), omega, cfg))
}

/// Threshold for a given noise estimate `omega`; see [`TauMode`].
pub fn threshold_from_noise(dims: [usize; 3], omega: f64, cfg: &SpectralConfig) -> f64 {
    let total = (dims[0] * dims[1] * dims[2]) as f64;
    let base = cfg.tau_const * total.sqrt() * omega * omega;
    match cfg.tau_mode {
        TauMode::Empirical => base,
        TauMode::Theoretical => {
            let log_n = (*dims.iter().max().expect("three dims") as f64).ln();
            base * log_n * log_n
        }
        TauMode::Fixed => cfg.tau_fixed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_error, subspace_distance};

    #[test]
    fn hetero_pca_all_ones_is_fixed_point() {
        let g = Matrix::from_fn(4, 4, |_, _| 1.0);
        for t_max in [0, 1, 5] {
            let (g_out, u) = hetero_pca(&g, 1, t_max).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((g_out.get(i, j) - 1.0).abs() < 1e-12);
                }
                assert!((u.get(i, 0) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hetero_pca_recovers_rank_one_diagonal() {
        let x = [1.0, 2.0, 3.0, 1.5, 0.5, 2.5, 1.0, 2.0];
        let g = Matrix::from_fn(8, 8, |i, j| if i == j { 0.0 } else { x[i] * x[j] });
        let (g_out, _) = hetero_pca(&g, 1, 200).unwrap();
        for i in 0..8 {
            assert!((g_out.get(i, i) - x[i] * x[i]).abs() < 1e-6, "{g_out:?}");
            for j in 0..8 {
                if i != j {
                    assert_eq!(g_out.get(i, j).to_bits(), g.get(i, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn hetero_pca_zero_iterations_imputes_once() {
        let g = Matrix::from_rows(&[[5.0, 2.0, 1.0], [2.0, 0.0, 3.0], [1.0, 3.0, -1.0]]);
        let (g_out, u) = hetero_pca(&g, 1, 0).unwrap();
        let eig = sym_eig_top(&g, 1).unwrap();
        assert_eq!(u, eig.vectors);
        let d = eig.reconstruct_diagonal();
        for i in 0..3 {
            assert_eq!(g_out.get(i, i), d[i]);
        }
    }

    #[test]
    fn hetero_pca_rank_checks() {
        let g = Matrix::identity(3);
        assert!(hetero_pca(&g, 0, 1).is_err());
        assert!(hetero_pca(&g, 4, 1).is_err());
    }

    #[test]
    fn rank_selection_examples() {
        assert_eq!(rank_selection_from_spectrum(&[10.0, 9.0, 1.0, 0.5], 4, 0), 2);
        assert_eq!(rank_selection_from_spectrum(&[4.0, 3.0, 2.0, 1.0], 4, 0), 4);
        assert_eq!(rank_selection_from_spectrum(&[1.0, 0.0, 0.0, 0.0], 2, 0), 1);
        let g = Matrix::from_fn(4, 4, |i, j| if i == j { [10.0, -9.0, 1.0, 0.5][i] } else { 0.0 });
        assert_eq!(rank_selection(&g, 4, 0).unwrap(), 2);
        assert!(rank_selection(&g, 2, 2).is_err());
    }

    #[test]
    fn deflation_zero_input_is_degenerate() {
        let y = Matrix::zeros(4, 6);
        let est = thresholded_deflated_hetero_pca(&y, 2, 0.5, &SpectralConfig::default()).unwrap();
        assert!(est.trace.degenerate);
        assert_eq!(est.rank, 1);
        assert!(est.trace.ranks.is_empty());
        assert!(orthonormality_error(&est.basis) < 1e-12);
    }

    #[test]
    fn deflation_rank_one_signal() {
        let v: Vec<f64> = (0..8).map(|j| ((j as f64) * 0.7).sin() + 0.3).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let y = Matrix::from_fn(4, 8, |_, j| v[j] / norm);
        let est = thresholded_deflated_hetero_pca(&y, 2, 0.1, &SpectralConfig::default()).unwrap();
        assert_eq!(est.rank, 1);
        let ones = Matrix::from_fn(4, 1, |_, _| 0.5);
        assert!(subspace_distance(&est.basis, &ones).unwrap() < 1e-6);
    }

    #[test]
    fn deflation_rejects_bad_arguments() {
        let y = Matrix::identity(3);
        let cfg = SpectralConfig::default();
        assert!(thresholded_deflated_hetero_pca(&y, 0, 1.0, &cfg).is_err());
        assert!(thresholded_deflated_hetero_pca(&y, 4, 1.0, &cfg).is_err());
        assert!(thresholded_deflated_hetero_pca(&y, 1, -1.0, &cfg).is_err());
        let bad = SpectralConfig {
            iters_per_round: 0,
            ..SpectralConfig::default()
        };
        assert!(thresholded_deflated_hetero_pca(&y, 1, 1.0, &bad).is_err());
    }

    #[test]
    fn vanilla_rank_one() {
        let y = Matrix::from_fn(5, 3, |_, j| [1.0, -2.0, 0.5][j]);
        let est = vanilla_svd_subspace(&y, 1).unwrap();
        for i in 0..5 {
            assert!((est.basis.get(i, 0).abs() - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        }
        assert_eq!(est.rank, 1);
        assert!(vanilla_svd_subspace(&y, 6).is_err());
    }

    #[test]
    fn vanilla_identity_gives_coordinate_projector() {
        let est = vanilla_svd_subspace(&Matrix::identity(4), 2).unwrap();
        let p = est.basis.matmul(&est.basis.transpose()).unwrap();
        let pp = p.matmul(&p).unwrap();
        assert!(pp.sub(&p).unwrap().max_abs() < 1e-12);
        assert!(orthonormality_error(&est.basis) < 1e-12);
    }

    #[test]
    fn noise_scale_examples() {
        let zero = Tensor3::zeros([3, 4, 5]);
        assert_eq!(estimate_noise_scale(&zero, [2, 2, 2]).unwrap(), 0.0);

        // M_1(Y) = [diag(5,4,3,2) | 0], n2 n3 = 100
        let mut m = Matrix::zeros(4, 100);
        for (i, s) in [5.0, 4.0, 3.0, 2.0].into_iter().enumerate() {
            m.set(i, i, s);
        }
        let y = crate::tensor::dematricize(&m, 0, [4, 10, 10]).unwrap();
        let w = estimate_noise_scale(&y, [2, 2, 2]).unwrap();
        assert!((w - 0.3).abs() < 1e-12, "{w}");
        let w2 = estimate_noise_scale(&y.scale(-3.0), [2, 2, 2]).unwrap();
        assert!((w2 - 0.9).abs() < 1e-12);
        assert!(estimate_noise_scale(&y, [4, 2, 2]).is_err());
    }

    #[test]
    fn smallest_mode_tie_break() {
        assert_eq!(smallest_mode([5, 3, 3]), 1);
        assert_eq!(smallest_mode([4, 4, 4]), 0);
        assert_eq!(smallest_mode([9, 8, 2]), 2);
    }

    #[test]
    fn threshold_modes() {
        let y = Tensor3::zeros([4, 4, 4]);
        let cfg = SpectralConfig::default();
        assert_eq!(select_threshold(&y, [2, 2, 2], &cfg).unwrap(), 0.0);
        let fixed = SpectralConfig {
            tau_mode: TauMode::Fixed,
            tau_fixed: 7.5,
            ..cfg.clone()
        };
        assert_eq!(select_threshold(&y, [2, 2, 2], &fixed).unwrap(), 7.5);
    }

    #[test]
    fn threshold_formula_values() {
        let cfg = SpectralConfig::default();
        let tau = threshold_from_noise([100, 100, 100], 1.0, &cfg);
        assert!((tau - 1100.0).abs() < 1e-9);
        let theo = SpectralConfig {
            tau_mode: TauMode::Theoretical,
            ..cfg.clone()
        };
        let ratio = threshold_from_noise([100, 100, 100], 1.0, &theo) / tau;
        assert!((ratio - 100f64.ln().powi(2)).abs() < 1e-9);
        assert_eq!(threshold_from_noise([100, 100, 100], 0.0, &cfg), 0.0);
        assert_eq!(threshold_from_noise([100, 100, 100], 0.0, &theo), 0.0);
    }
}
