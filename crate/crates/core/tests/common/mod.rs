//! Independent reference implementations used by the integration tests.
//! Each one is deliberately naive: enumeration, exact integer arithmetic or
//! bisection, so agreement with the library is meaningful.
#![allow(dead_code)]

use heteroclust::rng::SeededRng;
use heteroclust::{ClusterAssignment, Matrix};

pub fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn random_symmetric(rng: &mut SeededRng, n: usize) -> Matrix {
    let a = random_matrix(rng, n, n);
    Matrix::from_fn(n, n, |i, j| a.get(i.min(j), i.max(j)))
}

/// Matrix with orthonormal columns spanning a random `r`-dimensional subspace
/// (modified Gram-Schmidt on Gaussian columns).
pub fn random_orthonormal(rng: &mut SeededRng, n: usize, r: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(r);
    while cols.len() < r {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        for _ in 0..2 {
            for c in &cols {
                let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= d * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Matrix::from_fn(n, r, |i, j| cols[j][i])
}

/// Calls `f` on every permutation of `0..k`.
pub fn for_each_permutation(k: usize, mut f: impl FnMut(&[usize])) {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, f: &mut dyn FnMut(&[usize])) {
        if prefix.len() == used.len() {
            f(prefix);
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                prefix.push(c);
                rec(prefix, used, f);
                prefix.pop();
                used[c] = false;
            }
        }
    }
    rec(&mut Vec::new(), &mut vec![false; k], &mut f);
}

/// Misclassification rate by trying every relabeling.
pub fn mcr_by_enumeration(z: &ClusterAssignment, zhat: &ClusterAssignment) -> f64 {
    let n = z.len();
    if n == 0 {
        return 0.0;
    }
    let mut best = usize::MAX;
    for_each_permutation(z.k(), |perm| {
        let wrong = z
            .labels()
            .iter()
            .zip(zhat.labels())
            .filter(|(&a, &b)| a != perm[b])
            .count();
        best = best.min(wrong);
    });
    best as f64 / n as f64
}

/// Candidate set of the rank-selection rule, written out literally with
/// 1-based ranks. `sigma` beyond its length reads as zero.
pub fn rank_selection_by_enumeration(sigma: &[f64], r: usize, r_prev: usize) -> usize {
    let s = |i: usize| if i >= 1 && i <= sigma.len() { sigma[i - 1] } else { 0.0 };
    let mut candidates = Vec::new();
    for rp in (r_prev + 1)..=r {
        let top = s(r_prev + 1);
        let here = s(rp);
        let well_conditioned = here > 0.0 && top / here <= 4.0;
        let gapped = here - s(rp + 1) >= here / r as f64;
        if well_conditioned && gapped {
            candidates.push(rp);
        }
    }
    candidates.into_iter().max().unwrap_or(r)
}

/// Within-cluster sum of squares of a labeling.
pub fn kmeans_objective(points: &Matrix, labels: &[usize], k: usize) -> f64 {
    let d = points.cols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            points
                .row(i)
                .iter()
                .zip(&sums[c])
                .map(|(x, s)| {
                    let m = s / counts[c] as f64;
                    (x - m) * (x - m)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Optimal k-means objective by enumerating all `k^n` labelings.
pub fn kmeans_optimum(points: &Matrix, k: usize) -> f64 {
    let n = points.rows();
    let total = k.pow(n as u32);
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        best = best.min(kmeans_objective(points, &labels, k));
    }
    best
}

/// Characteristic polynomial `det(xI - A)` of an integer matrix, exactly,
/// by Faddeev-LeVerrier. `coeffs[i]` multiplies `x^i`.
pub fn char_poly(a: &[Vec<i64>]) -> Vec<i128> {
    let n = a.len();
    let a: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut coeffs = vec![0i128; n + 1];
    coeffs[n] = 1;
    let mut m = vec![vec![0i128; n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * m[l][j]).sum::<i128>();
            }
            next[i][i] += coeffs[n - k + 1];
        }
        m = next;
        let mut trace = 0i128;
        for i in 0..n {
            trace += (0..n).map(|l| a[i][l] * m[l][i]).sum::<i128>();
        }
        assert_eq!(trace % k as i128, 0);
        coeffs[n - k] = -trace / k as i128;
    }
    coeffs
}

fn eval(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn derivative(poly: &[f64]) -> Vec<f64> {
    poly.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect()
}

/// Real roots of a real-rooted polynomial, ascending. Critical points come
/// from the derivative (also real-rooted), and each monotone piece between
/// them is bisected. Returns `None` if a sign change is missing, which
/// signals a repeated root.
pub fn real_roots(poly: &[f64], bound: f64) -> Option<Vec<f64>> {
    let deg = poly.len() - 1;
    if deg == 0 {
        return Some(Vec::new());
    }
    if deg == 1 {
        return Some(vec![-poly[0] / poly[1]]);
    }
    let crit = real_roots(&derivative(poly), bound)?;
    let mut knots = vec![-bound];
    knots.extend(crit);
    knots.push(bound);
    let mut roots = Vec::with_capacity(deg);
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (eval(poly, lo), eval(poly, hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = eval(poly, mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    (roots.len() == deg).then_some(roots)
}
