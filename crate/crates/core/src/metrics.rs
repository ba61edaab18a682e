//! Clustering evaluation: misclassification rate, adjusted Rand index,
//! separation of a core tensor, SNR and cluster balance.

use crate::error::{arg_err, Result};
use crate::labels::ClusterAssignment;
use crate::model::{NoiseKind, NoiseSpec};
use crate::tensor::{matricize, Tensor3};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials). Returns `assign[row] = column`.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; column 0 is a sentinel
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

fn confusion(z: &ClusterAssignment, zhat: &ClusterAssignment, k: usize) -> Vec<Vec<i64>> {
    let mut c = vec![vec![0i64; k]; k];
    for (&a, &b) in z.labels().iter().zip(zhat.labels()) {
        c[a][b] += 1;
    }
    c
}

/// Misclassification rate: the smallest fraction of mismatched labels over
/// all relabelings of `z`.
pub fn mcr(z: &ClusterAssignment, zhat: &ClusterAssignment) -> Result<f64> {
    if z.len() != zhat.len() || z.k() != zhat.k() {
        return arg_err(format!(
            "MCR needs matching shapes: (n={}, k={}) vs (n={}, k={})",
            z.len(),
            z.k(),
            zhat.len(),
            zhat.k()
        ));
    }
    if z.is_empty() {
        return Ok(0.0);
    }
    let c = confusion(z, zhat, z.k());
    let cost: Vec<Vec<i64>> = c.iter().map(|row| row.iter().map(|&x| -x).collect()).collect();
    let assign = hungarian(&cost);
    let agree: i64 = assign.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
    Ok(1.0 - agree as f64 / z.len() as f64)
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x.saturating_sub(1) as f64) / 2.0
}

/// Pair-counting adjusted Rand index. Two partitions that are both a single
/// block (or both all singletons) score 1.
pub fn adjusted_rand_index(z: &ClusterAssignment, zhat: &ClusterAssignment) -> Result<f64> {
    if z.len() != zhat.len() {
        return arg_err(format!("ARI needs equal lengths: {} vs {}", z.len(), zhat.len()));
    }
    let n = z.len() as u64;
    let mut table = vec![vec![0u64; zhat.k()]; z.k()];
    for (&a, &b) in z.labels().iter().zip(zhat.labels()) {
        table[a][b] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
    let rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..zhat.k())
        .map(|j| choose2(table.iter().map(|r| r[j]).sum()))
        .sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max_index = 0.5 * (rows + cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Clustering error rate, `1 - ARI`.
pub fn cer(z: &ClusterAssignment, zhat: &ClusterAssignment) -> Result<f64> {
    Ok(1.0 - adjusted_rand_index(z, zhat)?)
}

/// Minimum pairwise row distances of the three unfoldings of a core tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Separation {
    /// Per mode; `f64::INFINITY` for a mode with a single cluster.
    pub per_mode: [f64; 3],
    /// Minimum over modes with at least two clusters (infinite if none).
    pub min: f64,
}

pub fn separation_delta(core: &Tensor3) -> Separation {
    let mut per_mode = [f64::INFINITY; 3];
    for (mode, slot) in per_mode.iter_mut().enumerate() {
        let m = matricize(core, mode).expect("valid mode");
        for a in 0..m.rows() {
            for b in (a + 1)..m.rows() {
                let d2: f64 = m
                    .row(a)
                    .iter()
                    .zip(m.row(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                *slot = slot.min(d2.sqrt());
            }
        }
    }
    let min = per_mode.iter().copied().fold(f64::INFINITY, f64::min);
    Separation { per_mode, min }
}

/// Largest noise standard deviation implied by a noise specification.
pub fn omega_max(core: &Tensor3, noise: &NoiseSpec) -> f64 {
    match noise.kind {
        NoiseKind::HeteroskedasticGaussian => noise
            .mode_scales
            .as_ref()
            .map(|scales| {
                scales
                    .iter()
                    .map(|s| s.iter().copied().fold(0.0_f64, f64::max))
                    .product()
            })
            .unwrap_or(0.0),
        NoiseKind::Bernoulli => core
            .as_slice()
            .iter()
            .map(|&p| p * (1.0 - p))
            .fold(0.0_f64, f64::max)
            .sqrt(),
        NoiseKind::None => 0.0,
    }
}

/// `Delta_min / omega_max`.
pub fn snr(core: &Tensor3, noise: &NoiseSpec) -> Result<f64> {
    let omega = omega_max(core, noise);
    if !(omega > 0.0) {
        return arg_err("SNR undefined for zero noise level");
    }
    Ok(separation_delta(core).min / omega)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Balance {
    /// `k * min_cluster_size / n`.
    pub beta: f64,
    /// Number of clusters with no members; `beta` is 0 when positive.
    pub empty_clusters: usize,
}

pub fn balance_beta(z: &ClusterAssignment) -> Balance {
    let sizes = z.sizes();
    let empty = sizes.iter().filter(|&&s| s == 0).count();
    if empty > 0 || z.is_empty() {
        log::warn!("balance of an assignment with {empty} empty cluster(s)");
        return Balance {
            beta: 0.0,
            empty_clusters: empty,
        };
    }
    let min = *sizes.iter().min().expect("k >= 1");
    Balance {
        beta: (z.k() * min) as f64 / z.len() as f64,
        empty_clusters: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ca(labels: &[usize], k: usize) -> ClusterAssignment {
        ClusterAssignment::new(labels.iter().map(|l| l - 1).collect(), k).unwrap()
    }

    #[test]
    fn mcr_examples() {
        let z = ca(&[1, 1, 2, 2], 2);
        assert_eq!(mcr(&z, &ca(&[2, 2, 1, 1], 2)).unwrap(), 0.0);
        assert_eq!(mcr(&z, &ca(&[1, 2, 1, 2], 2)).unwrap(), 0.5);
        assert_eq!(mcr(&z, &z).unwrap(), 0.0);
        assert!(mcr(&z, &ca(&[1, 2, 1], 2)).is_err());
        assert!(mcr(&z, &ca(&[1, 2, 1, 3], 3)).is_err());
    }

    #[test]
    fn ari_examples() {
        let z = ca(&[1, 1, 2, 2], 2);
        assert_eq!(adjusted_rand_index(&z, &z).unwrap(), 1.0);
        assert_eq!(cer(&z, &z).unwrap(), 0.0);
        let w = ca(&[1, 2, 1, 2], 2);
        assert!((adjusted_rand_index(&z, &w).unwrap() + 0.5).abs() < 1e-15);
        assert!((cer(&z, &w).unwrap() - 1.5).abs() < 1e-15);
        assert!(cer(&z, &ca(&[1], 1)).is_err());
    }

    #[test]
    fn ari_degenerate_partitions() {
        let one = ca(&[1, 1, 1], 1);
        assert_eq!(adjusted_rand_index(&one, &one).unwrap(), 1.0);
        let singles = ca(&[1, 2, 3], 3);
        assert_eq!(adjusted_rand_index(&singles, &singles).unwrap(), 1.0);
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = hungarian(&cost);
        let total: i64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn separation_examples() {
        let core = Tensor3::from_vec([2, 1, 2], vec![1.0, 2.0, 1.0, 2.0]).unwrap();
        assert_eq!(separation_delta(&core).per_mode[0], 0.0);
        let core = Tensor3::from_vec([2, 1, 1], vec![3.0, -1.5]).unwrap();
        let s = separation_delta(&core);
        assert_eq!(s.per_mode[0], 4.5);
        assert!(s.per_mode[1].is_infinite() && s.per_mode[2].is_infinite());
        assert_eq!(s.min, 4.5);
        let trivial = Tensor3::from_vec([1, 1, 1], vec![2.0]).unwrap();
        assert!(separation_delta(&trivial).min.is_infinite());
    }

    #[test]
    fn snr_examples() {
        let core = Tensor3::from_vec([2, 1, 1], vec![3.0, -1.0]).unwrap();
        let ones = NoiseSpec::heteroskedastic([vec![1.0; 4], vec![1.0; 3], vec![1.0; 5]]);
        assert_eq!(snr(&core, &ones).unwrap(), 4.0);
        let twos = NoiseSpec::heteroskedastic([vec![2.0; 4], vec![1.0; 3], vec![1.0; 5]]);
        assert_eq!(snr(&core, &twos).unwrap(), 2.0);
        assert!(snr(&core, &NoiseSpec::none()).is_err());

        let p = Tensor3::from_vec([2, 1, 1], vec![0.1, 0.3]).unwrap();
        let w = omega_max(&p, &NoiseSpec::bernoulli());
        assert!((w * w - 0.21).abs() < 1e-15);
    }

    #[test]
    fn balance_examples() {
        assert_eq!(balance_beta(&ca(&[1, 2, 1, 2], 2)).beta, 1.0);
        assert_eq!(balance_beta(&ca(&[1, 2, 2, 2], 2)).beta, 0.5);
        assert_eq!(balance_beta(&ca(&[1, 2, 3], 3)).beta, 1.0);
        let b = balance_beta(&ca(&[1, 1, 1], 2));
        assert_eq!(b.beta, 0.0);
        assert_eq!(b.empty_clusters, 1);
    }
}
