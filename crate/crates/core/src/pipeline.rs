//! Two-stage tensor clustering: per-mode subspace estimation, projection,
//! then k-means on the rows of each projected unfolding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::hlloyd::hlloyd;
use crate::kmeans::{approx_kmeans, KMeansConfig};
use crate::labels::ClusterAssignment;
use crate::linalg::project;
use crate::matrix::Matrix;
use crate::rng::derive_seed;
use crate::spectral::{
    select_threshold, thresholded_deflated_hetero_pca, vanilla_svd_subspace, DeflationTrace,
    SpectralConfig, SubspaceEstimate,
};
use crate::tensor::{matricize, mode_product, Tensor3};

#[derive(Clone, Debug)]
pub struct ClusterResult {
    pub assignments: [ClusterAssignment; 3],
    /// Per-mode `k_i x d_i` centroids in the projected coordinates.
    pub centroids: [Matrix; 3],
    pub subspaces: [SubspaceEstimate; 3],
    /// The projected unfoldings whose rows were clustered.
    pub projected: [Matrix; 3],
    /// Deflation threshold used (zero for the vanilla estimator).
    pub tau: f64,
}

fn check_ks(dims: [usize; 3], k: [usize; 3]) -> Result<()> {
    for m in 0..3 {
        if k[m] == 0 || k[m] > dims[m] {
            return arg_err(format!("k{} = {} must lie in 1..={}", m + 1, k[m], dims[m]));
        }
    }
    Ok(())
}

fn constant_basis(n: usize) -> SubspaceEstimate {
    let v = 1.0 / (n as f64).sqrt();
    SubspaceEstimate {
        basis: Matrix::from_fn(n, 1, |_, _| v),
        rank: 1,
        trace: DeflationTrace::default(),
    }
}

/// `U_i U_iᵀ M_i(Y) (U_{i+2} ⊗ U_{i+1})`, computed by contracting the other
/// two modes first.
pub fn projected_unfolding(y: &Tensor3, bases: [&Matrix; 3], mode: usize) -> Result<Matrix> {
    let a = (mode + 1) % 3;
    let b = (mode + 2) % 3;
    let t = mode_product(y, &bases[a].transpose(), a)?;
    let t = mode_product(&t, &bases[b].transpose(), b)?;
    project(bases[mode], &matricize(&t, mode)?)
}

fn cluster_with<F>(y: &Tensor3, k: [usize; 3], kcfg: &KMeansConfig, tau: f64, estimate: F) -> Result<ClusterResult>
where
    F: Fn(usize, &Matrix) -> Result<SubspaceEstimate>,
{
    let subspaces: [SubspaceEstimate; 3] = {
        let mut out = Vec::with_capacity(3);
        for mode in 0..3 {
            out.push(estimate(mode, &matricize(y, mode)?)?);
        }
        out.try_into().expect("three modes")
    };
    let bases = [&subspaces[0].basis, &subspaces[1].basis, &subspaces[2].basis];
    let mut assignments = Vec::with_capacity(3);
    let mut centroids = Vec::with_capacity(3);
    let mut projected = Vec::with_capacity(3);
    for mode in 0..3 {
        let b_hat = projected_unfolding(y, bases, mode)?;
        let fit = approx_kmeans(&b_hat, k[mode], &kcfg.with_seed(derive_seed(kcfg.seed, &[mode as u64])))?;
        assignments.push(fit.assignment);
        centroids.push(fit.centroids);
        projected.push(b_hat);
    }
    Ok(ClusterResult {
        assignments: assignments.try_into().expect("three modes"),
        centroids: centroids.try_into().expect("three modes"),
        subspaces,
        projected: projected.try_into().expect("three modes"),
        tau,
    })
}

/// High-order heteroskedastic clustering: thresholded deflated HeteroPCA on
/// every unfolding (constant basis for single-cluster modes), then k-means.
pub fn hhc(y: &Tensor3, k: [usize; 3], scfg: &SpectralConfig, kcfg: &KMeansConfig) -> Result<ClusterResult> {
    let dims = y.dims();
    check_ks(dims, k)?;
    let tau = if k.iter().any(|&ki| ki >= 2) {
        select_threshold(y, k, scfg)?
    } else {
        0.0
    };
    cluster_with(y, k, kcfg, tau, |mode, unfolded| {
        if k[mode] == 1 {
            Ok(constant_basis(dims[mode]))
        } else {
            thresholded_deflated_hetero_pca(unfolded, k[mode], tau, scfg)
        }
    })
}

/// High-order spectral clustering baseline: vanilla top-`k_i` left singular
/// subspaces, then k-means.
pub fn hsc(y: &Tensor3, k: [usize; 3], kcfg: &KMeansConfig) -> Result<ClusterResult> {
    check_ks(y.dims(), k)?;
    cluster_with(y, k, kcfg, 0.0, |mode, unfolded| vanilla_svd_subspace(unfolded, k[mode]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "hhc")]
    Hhc,
    #[serde(rename = "hsc")]
    Hsc,
    #[serde(rename = "hhc-hlloyd")]
    HhcHlloyd,
    #[serde(rename = "hsc-hlloyd")]
    HscHlloyd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hhc, Method::Hsc, Method::HhcHlloyd, Method::HscHlloyd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hhc => "hhc",
            Method::Hsc => "hsc",
            Method::HhcHlloyd => "hhc-hlloyd",
            Method::HscHlloyd => "hsc-hlloyd",
        }
    }

    pub fn refines(self) -> bool {
        matches!(self, Method::HhcHlloyd | Method::HscHlloyd)
    }

    pub fn uses_hhc(self) -> bool {
        matches!(self, Method::Hhc | Method::HhcHlloyd)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected hhc, hsc, hhc-hlloyd or hsc-hlloyd)"))
    }
}

/// Runs one method end to end and returns its per-mode labels.
pub fn run_method(
    method: Method,
    y: &Tensor3,
    k: [usize; 3],
    scfg: &SpectralConfig,
    kcfg: &KMeansConfig,
    hlloyd_rounds: usize,
) -> Result<[ClusterAssignment; 3]> {
    let init = if method.uses_hhc() {
        hhc(y, k, scfg, kcfg)?
    } else {
        hsc(y, k, kcfg)?
    };
    if method.refines() {
        Ok(hlloyd(y, &init.assignments, hlloyd_rounds)?.assignments)
    } else {
        Ok(init.assignments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::nearest_centroid;

    #[test]
    fn single_cluster_modes_are_trivial() {
        let y = Tensor3::from_fn([4, 5, 3], |i, j, l| (i + 2 * j + 3 * l) as f64 * 0.1);
        let cfg = SpectralConfig::default();
        for res in [hhc(&y, [1, 1, 1], &cfg, &KMeansConfig::default()).unwrap(), hsc(&y, [1, 1, 1], &KMeansConfig::default()).unwrap()] {
            for z in &res.assignments {
                assert!(z.labels().iter().all(|&l| l == 0));
            }
        }
    }

    #[test]
    fn rejects_too_many_clusters() {
        let y = Tensor3::zeros([3, 3, 3]);
        assert!(hhc(&y, [4, 2, 2], &SpectralConfig::default(), &KMeansConfig::default()).is_err());
        assert!(hsc(&y, [0, 2, 2], &KMeansConfig::default()).is_err());
    }

    #[test]
    fn labels_match_nearest_centroids() {
        let y = Tensor3::from_fn([6, 5, 4], |i, j, l| ((i * 7 + j * 3 + l * 5) % 11) as f64);
        let res = hhc(&y, [2, 2, 2], &SpectralConfig::default(), &KMeansConfig::default()).unwrap();
        for mode in 0..3 {
            let b = &res.projected[mode];
            for row in 0..b.rows() {
                let (c, _) = nearest_centroid(b.row(row), &res.centroids[mode]);
                assert_eq!(c, res.assignments[mode].get(row));
            }
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lloyd".parse::<Method>().is_err());
    }
}
