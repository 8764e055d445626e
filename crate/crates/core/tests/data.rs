use markov_sparsify::data::{
    estimate_global_smoothness, estimate_smoothness, loss_and_gradient, parse_libsvm_str,
    serialize_libsvm, shifted_shards, Dataset, ShardedProblem,
};
use markov_sparsify::objective::Objective;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn dense_top_eigenvalue(rows: &[Vec<f64>], scale: f64) -> f64 {
    let d = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let gram = x.transpose() * &x * scale;
    SymmetricEigen::new(gram).eigenvalues.max()
}

fn dataset_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..6, 3usize..12).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n),
            prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1.0 } else { -1.0 }), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_central_differences(
        (rows, labels) in dataset_strategy(),
        seed in prop::collection::vec(-2.0f64..2.0, 6),
        dir in prop::collection::vec(-1.0f64..1.0, 6),
        lambda in 0.0f64..0.5,
    ) {
        let d = rows[0].len();
        let data = Dataset::from_dense(&rows, labels).unwrap();
        let w = &seed[..d];
        let v = &dir[..d];
        let (_, g) = loss_and_gradient(w, &data, lambda);
        let h = 1e-5;
        let plus: Vec<f64> = w.iter().zip(v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = w.iter().zip(v).map(|(a, b)| a - h * b).collect();
        let fd = (loss_and_gradient(&plus, &data, lambda).0 - loss_and_gradient(&minus, &data, lambda).0) / (2.0 * h);
        let gv: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum();
        prop_assert!((fd - gv).abs() <= 1e-6 * fd.abs().max(gv.abs()).max(1e-3), "{fd} vs {gv}");
    }

    #[test]
    fn local_smoothness_matches_dense_eigenvalue((rows, labels) in dataset_strategy(), lambda in 0.0f64..0.5) {
        let n = rows.len();
        let data = Dataset::from_dense(&rows, labels).unwrap();
        let oracle = dense_top_eigenvalue(&rows, 1.0 / (4.0 * n as f64)) + 2.0 * lambda;
        let est = estimate_smoothness(&data, lambda).unwrap();
        prop_assert!((est - oracle).abs() <= 1e-6 * oracle, "{est} vs {oracle}");
    }

    #[test]
    fn loss_is_finite_for_extreme_margins(scale in 1.0f64..1e6, y in prop::bool::ANY) {
        let label = if y { 1.0 } else { -1.0 };
        let data = Dataset::from_dense(&[vec![1.0, -1.0]], vec![label]).unwrap();
        let (f, g) = loss_and_gradient(&[scale, -scale], &data, 0.0);
        prop_assert!(f.is_finite() && f >= 0.0);
        prop_assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn libsvm_text_round_trips((rows, labels) in dataset_strategy()) {
        let data = Dataset::from_dense(&rows, labels).unwrap();
        let back = parse_libsvm_str(&serialize_libsvm(&data), Some(data.dim())).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn partition_keeps_every_row(rows in 10usize..60, n in 1usize..6, seed in any::<u64>()) {
        let dense: Vec<Vec<f64>> = (0..rows).map(|i| vec![i as f64, 1.0]).collect();
        let labels = (0..rows).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let data = Dataset::from_dense(&dense, labels).unwrap();
        let p = ShardedProblem::partitioned(&data, n, 0.1, seed).unwrap();
        prop_assert_eq!(p.total_rows(), rows);
        let sizes: Vec<usize> = p.shards().iter().map(Dataset::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut ids: Vec<i64> = p
            .shards()
            .iter()
            .flat_map(|s| (0..s.len()).map(move |i| s.dense_row(i)[0] as i64))
            .collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..rows as i64).collect::<Vec<_>>());
    }
}

#[test]
fn global_smoothness_matches_dense_average() {
    let p = shifted_shards(3, 20, 5, 1.5, 0.05, 11).unwrap();
    let d = p.dim();
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for s in p.shards() {
        let rows: Vec<Vec<f64>> = (0..s.len()).map(|i| s.dense_row(i)).collect();
        let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        acc += x.transpose() * &x / (4.0 * s.len() as f64 * p.shards().len() as f64);
    }
    let oracle = SymmetricEigen::new(acc).eigenvalues.max() + 0.1;
    let est = estimate_global_smoothness(&p).unwrap();
    assert!((est - oracle).abs() <= 1e-6 * oracle);
}

#[test]
fn loads_mushrooms_file() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mushrooms");
    let data = markov_sparsify::data::load_libsvm(std::path::Path::new(path), None).unwrap();
    assert_eq!(data.len(), 8124);
    assert_eq!(data.nnz(), 8124 * 22);
    let positive = data.labels().iter().filter(|&&y| y > 0.0).count();
    assert!(positive == 3916 || positive == 4208);
}
