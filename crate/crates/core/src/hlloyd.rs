//! High-order Lloyd refinement: alternate block means of the observed tensor
//! with nearest-block-row label updates on all three modes.

use crate::error::{arg_err, Result};
use crate::labels::ClusterAssignment;
use crate::tensor::Tensor3;

#[derive(Clone, Debug)]
pub struct HLloydResult {
    /// Labels after the last round.
    pub assignments: [ClusterAssignment; 3],
    /// Block means computed in the last round (from the labels going into it).
    pub core: Tensor3,
}

/// Runs `rounds` refinement rounds starting from `init`.
///
/// A core cell whose block is empty keeps its previous value (the global mean
/// of `y` in the first round). Partial-average cells that are empty are left
/// out of the distance computation.
pub fn hlloyd(y: &Tensor3, init: &[ClusterAssignment; 3], rounds: usize) -> Result<HLloydResult> {
    let dims = y.dims();
    for m in 0..3 {
        if init[m].len() != dims[m] {
            return arg_err(format!(
                "mode-{m} labels have length {}, tensor has {}",
                init[m].len(),
                dims[m]
            ));
        }
    }
    if rounds == 0 {
        return arg_err("HLloyd needs at least one round");
    }
    let ks = [init[0].k(), init[1].k(), init[2].k()];
    let mut z: [Vec<usize>; 3] = std::array::from_fn(|m| init[m].labels().to_vec());
    let mut core = Tensor3::filled(ks, y.mean());
    for _round in 0..rounds {
        let step = Round::accumulate(y, &z, ks);
        let mut empty_cells = 0usize;
        for i1 in 0..ks[0] {
            for i2 in 0..ks[1] {
                for i3 in 0..ks[2] {
                    let cnt = step.counts[0][i1] * step.counts[1][i2] * step.counts[2][i3];
                    if cnt > 0 {
                        let cell = (i1 * ks[1] + i2) * ks[2] + i3;
                        core.set(i1, i2, i3, step.core_ref[cell] + step.core_sum[cell] / cnt as f64);
                    } else {
                        empty_cells += 1;
                    }
                }
            }
        }
        if empty_cells > 0 {
            log::debug!("HLloyd: {empty_cells} empty core block(s) kept their previous mean");
        }
        z = std::array::from_fn(|m| step.relabel(m, &core, dims, ks));
    }
    let assignments = std::array::from_fn(|m| {
        ClusterAssignment::new(std::mem::take(&mut z[m]), ks[m]).expect("labels in range")
    });
    Ok(HLloydResult { assignments, core })
}

/// Block sums for one round. Every cell accumulates deviations from one of
/// its own entries (`*_ref`), so a constant block averages to its value
/// exactly.
struct Round {
    counts: [Vec<usize>; 3],
    core_ref: Vec<f64>,
    core_sum: Vec<f64>,
    /// Mode-`m` partial sums, laid out as `[j][c_a][c_b]` with `a = m+1`,
    /// `b = m+2` (mod 3).
    partial_ref: [Vec<f64>; 3],
    partial: [Vec<f64>; 3],
}

impl Round {
    fn accumulate(y: &Tensor3, z: &[Vec<usize>; 3], ks: [usize; 3]) -> Self {
        let dims = y.dims();
        let counts: [Vec<usize>; 3] = std::array::from_fn(|m| {
            let mut c = vec![0; ks[m]];
            for &l in &z[m] {
                c[l] += 1;
            }
            c
        });
        // First member of every cluster, if any.
        let first: [Vec<Option<usize>>; 3] = std::array::from_fn(|m| {
            let mut f = vec![None; ks[m]];
            for (j, &l) in z[m].iter().enumerate() {
                f[l].get_or_insert(j);
            }
            f
        });
        let at = |idx: [Option<usize>; 3]| -> f64 {
            match idx {
                [Some(i), Some(j), Some(l)] => y.get(i, j, l),
                _ => 0.0,
            }
        };
        let mut core_ref = vec![0.0; ks[0] * ks[1] * ks[2]];
        for c1 in 0..ks[0] {
            for c2 in 0..ks[1] {
                for c3 in 0..ks[2] {
                    core_ref[(c1 * ks[1] + c2) * ks[2] + c3] = at([first[0][c1], first[1][c2], first[2][c3]]);
                }
            }
        }
        let partial_ref: [Vec<f64>; 3] = std::array::from_fn(|m| {
            let (a, b) = ((m + 1) % 3, (m + 2) % 3);
            let mut r = Vec::with_capacity(dims[m] * ks[a] * ks[b]);
            for j in 0..dims[m] {
                for ca in 0..ks[a] {
                    for cb in 0..ks[b] {
                        let mut idx = [None; 3];
                        idx[m] = Some(j);
                        idx[a] = first[a][ca];
                        idx[b] = first[b][cb];
                        r.push(at(idx));
                    }
                }
            }
            r
        });
        let mut core_sum = vec![0.0; ks[0] * ks[1] * ks[2]];
        let mut partial: [Vec<f64>; 3] = std::array::from_fn(|m| {
            vec![0.0; dims[m] * ks[(m + 1) % 3] * ks[(m + 2) % 3]]
        });
        let data = y.as_slice();
        for j1 in 0..dims[0] {
            let c1 = z[0][j1];
            for j2 in 0..dims[1] {
                let c2 = z[1][j2];
                let base = (j1 * dims[1] + j2) * dims[2];
                for j3 in 0..dims[2] {
                    let c3 = z[2][j3];
                    let v = data[base + j3];
                    let cell = (c1 * ks[1] + c2) * ks[2] + c3;
                    core_sum[cell] += v - core_ref[cell];
                    let p0 = (j1 * ks[1] + c2) * ks[2] + c3;
                    partial[0][p0] += v - partial_ref[0][p0];
                    let p1 = (j2 * ks[2] + c3) * ks[0] + c1;
                    partial[1][p1] += v - partial_ref[1][p1];
                    let p2 = (j3 * ks[0] + c1) * ks[1] + c2;
                    partial[2][p2] += v - partial_ref[2][p2];
                }
            }
        }
        Self {
            counts,
            core_ref,
            core_sum,
            partial_ref,
            partial,
        }
    }

    fn relabel(&self, m: usize, core: &Tensor3, dims: [usize; 3], ks: [usize; 3]) -> Vec<usize> {
        let a = (m + 1) % 3;
        let b = (m + 2) % 3;
        let width = ks[a] * ks[b];
        (0..dims[m])
            .map(|j| {
                let row = &self.partial[m][j * width..(j + 1) * width];
                let row_ref = &self.partial_ref[m][j * width..(j + 1) * width];
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for l in 0..ks[m] {
                    let mut d = 0.0;
                    for ca in 0..ks[a] {
                        for cb in 0..ks[b] {
                            let cnt = self.counts[a][ca] * self.counts[b][cb];
                            if cnt == 0 {
                                continue;
                            }
                            let cell = ca * ks[b] + cb;
                            let mean = row_ref[cell] + row[cell] / cnt as f64;
                            let mut idx = [0usize; 3];
                            idx[m] = l;
                            idx[a] = ca;
                            idx[b] = cb;
                            let diff = mean - core.get(idx[0], idx[1], idx[2]);
                            d += diff * diff;
                        }
                    }
                    if d < best_d {
                        best_d = d;
                        best = l;
                    }
                }
                best
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_signal, BlockModel, NoiseSpec};

    fn ca(labels: &[usize], k: usize) -> ClusterAssignment {
        ClusterAssignment::new(labels.to_vec(), k).unwrap()
    }

    fn noiseless() -> (Tensor3, BlockModel) {
        let core = Tensor3::from_fn([2, 3, 2], |i, j, l| (i * 6 + j * 2 + l) as f64 - 4.0);
        let bm = BlockModel::new(
            core,
            [ca(&[0, 1, 1, 0, 1], 2), ca(&[2, 0, 1, 1, 2, 0], 3), ca(&[1, 0, 0, 1], 2)],
            NoiseSpec::none(),
        )
        .unwrap();
        (assemble_signal(&bm), bm)
    }

    #[test]
    fn truth_is_fixed_point_on_noiseless_data() {
        let (y, bm) = noiseless();
        let out = hlloyd(&y, &bm.assignments, 3).unwrap();
        assert_eq!(out.assignments, bm.assignments);
        assert_eq!(out.core, bm.core);
    }

    #[test]
    fn one_flipped_label_is_repaired() {
        let (y, bm) = noiseless();
        let mut init = bm.assignments.clone();
        init[0] = ca(&[1, 1, 1, 0, 1], 2);
        let out = hlloyd(&y, &init, 2).unwrap();
        assert_eq!(out.assignments, bm.assignments);
    }

    #[test]
    fn empty_cluster_keeps_previous_mean() {
        let y = Tensor3::from_fn([3, 2, 2], |i, _, _| i as f64);
        // cluster 1 of mode 1 is empty
        let init = [ca(&[0, 0, 0], 2), ca(&[0, 1], 2), ca(&[0, 1], 2)];
        let out = hlloyd(&y, &init, 1).unwrap();
        assert_eq!(out.core.get(1, 0, 0), y.mean());
        assert_eq!(out.core.get(0, 0, 0), 1.0);
    }

    #[test]
    fn argument_checks() {
        let (y, bm) = noiseless();
        assert!(hlloyd(&y, &bm.assignments, 0).is_err());
        let mut bad = bm.assignments.clone();
        bad[2] = ca(&[0, 1], 2);
        assert!(hlloyd(&y, &bad, 1).is_err());
    }
}
