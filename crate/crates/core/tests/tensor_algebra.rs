mod common;

use heteroclust::rng::SeededRng;
use heteroclust::tensor::{read_tensor, write_tensor};
use heteroclust::{dematricize, kron, matricize, mode_product, Matrix, Tensor3};
use proptest::prelude::*;

fn tensor_strategy() -> impl Strategy<Value = Tensor3> {
    (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(a, b, c)| {
        prop::collection::vec(-1e6f64..1e6, a * b * c)
            .prop_map(move |data| Tensor3::from_vec([a, b, c], data).unwrap())
    })
}

fn matrix_strategy(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
    })
}

proptest! {
    #[test]
    fn unfold_fold_is_bit_exact(t in tensor_strategy()) {
        for mode in 0..3 {
            let m = matricize(&t, mode).unwrap();
            prop_assert_eq!(m.rows(), t.dims()[mode]);
            prop_assert_eq!(m.cols(), t.len() / t.dims()[mode]);
            let back = dematricize(&m, mode, t.dims()).unwrap();
            let same = back.as_slice().iter().zip(t.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }

    #[test]
    fn unfolding_preserves_norm(t in tensor_strategy()) {
        for mode in 0..3 {
            let m = matricize(&t, mode).unwrap();
            let (a, b) = (m.frobenius_norm(), t.frobenius_norm());
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn kron_mixed_product(a in matrix_strategy(1..4, 1..4), b in matrix_strategy(1..4, 1..4), seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let c = common::random_matrix(&mut rng, a.cols(), 3);
        let d = common::random_matrix(&mut rng, b.cols(), 2);
        let lhs = kron(&a, &b).matmul(&kron(&c, &d)).unwrap();
        let rhs = kron(&a.matmul(&c).unwrap(), &b.matmul(&d).unwrap());
        let err = lhs.sub(&rhs).unwrap().max_abs();
        prop_assert!(err <= 1e-9 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn products_along_different_modes_commute(t in tensor_strategy(), seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let dims = t.dims();
        let v0 = common::random_matrix(&mut rng, 3, dims[0]);
        let v2 = common::random_matrix(&mut rng, 2, dims[2]);
        let a = mode_product(&mode_product(&t, &v0, 0).unwrap(), &v2, 2).unwrap();
        let b = mode_product(&mode_product(&t, &v2, 2).unwrap(), &v0, 0).unwrap();
        prop_assert_eq!(a.dims(), [3, dims[1], 2]);
        let scale = 1.0 + a.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn text_format_round_trips(t in tensor_strategy()) {
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        let back = read_tensor(&buf[..]).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn multilinear_identity_on_random_instances() {
    let mut rng = SeededRng::new(0x5eed);
    for _ in 0..100 {
        let k: [usize; 3] = std::array::from_fn(|_| 1 + rng.below(4));
        let n: [usize; 3] = std::array::from_fn(|_| 1 + rng.below(6));
        let core = Tensor3::from_fn(k, |_, _, _| rng.normal());
        let v: Vec<Matrix> = (0..3).map(|m| common::random_matrix(&mut rng, n[m], k[m])).collect();
        let mut x = core.clone();
        for m in 0..3 {
            x = mode_product(&x, &v[m], m).unwrap();
        }
        for i in 0..3 {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let lhs = matricize(&x, i).unwrap();
            let rhs = v[i]
                .matmul(&matricize(&core, i).unwrap())
                .unwrap()
                .matmul(&kron(&v[b], &v[a]).transpose())
                .unwrap();
            assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
        }
    }
}

#[test]
fn mode_product_with_identity_is_exact() {
    let mut rng = SeededRng::new(3);
    let t = Tensor3::from_fn([3, 4, 5], |_, _, _| rng.normal());
    for mode in 0..3 {
        let out = mode_product(&t, &Matrix::identity(t.dims()[mode]), mode).unwrap();
        assert_eq!(out, t);
    }
}
