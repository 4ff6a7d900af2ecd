use proptest::prelude::*;

use latentcl::featurestore::{
    concat_ensemble, decode_lcf, encode_lcf, split_dataset, SplitFractions,
};
use latentcl::numeric::{covariance, pearson_r, top_k_eigs};
use latentcl::similarity::subspace_overlap;
use latentcl::{DatasetMeta, DenseMatrix, EncodedDataset, Matrix64};

fn meta(d: usize) -> DatasetMeta {
    DatasetMeta {
        encoder_name: "enc".into(),
        latent_dim: d,
        encode_flops_per_sample: 1234,
        source_dataset: "src".into(),
    }
}

/// Dataset with `n_classes` classes, each present at least `min_per_class` times.
fn dataset(
    d: usize,
    n_classes: usize,
    extra: usize,
    min_per_class: usize,
) -> impl Strategy<Value = EncodedDataset> {
    let n = n_classes * min_per_class + extra;
    (
        prop::collection::vec(-100.0f32..100.0, n * d),
        prop::collection::vec(0..n_classes as u32, extra),
    )
        .prop_map(move |(data, tail)| {
            let mut labels: Vec<u32> = (0..n_classes * min_per_class)
                .map(|i| (i % n_classes) as u32)
                .collect();
            labels.extend(tail);
            let names = (0..n_classes).map(|c| format!("class {c}")).collect();
            EncodedDataset::new(
                DenseMatrix::new(n, d, data).unwrap(),
                labels,
                names,
                meta(d),
            )
            .unwrap()
        })
}

fn symmetric(n: usize) -> impl Strategy<Value = Matrix64> {
    prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
        let mut m = Matrix64::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = v[i * n + j];
                m[(j, i)] = v[i * n + j];
            }
        }
        m
    })
}

/// Cyclic Jacobi rotations; returns eigenvalues in descending order.
fn jacobi_eigenvalues(m: &Matrix64) -> Vec<f64> {
    let n = m.rows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    vals
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lcf_round_trip(ds in (1usize..6, 1usize..5, 0usize..10).prop_flat_map(|(d, c, e)| dataset(d, c, e, 1))) {
        let bytes = encode_lcf(&ds).unwrap();
        prop_assert_eq!(decode_lcf(&bytes).unwrap(), ds);
    }

    #[test]
    fn eigen_matches_jacobi(m in (1usize..=8).prop_flat_map(symmetric)) {
        let n = m.rows();
        let eig = top_k_eigs(&m, n).unwrap();
        let oracle = jacobi_eigenvalues(&m);
        for (a, b) in eig.values.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{:?} vs {:?}", eig.values, oracle);
        }
        for j in 0..n {
            let v = eig.vector(j);
            let av: Vec<f64> = (0..n).map(|i| (0..n).map(|k| m[(i, k)] * v[k]).sum()).collect();
            for i in 0..n {
                prop_assert!((av[i] - eig.values[j] * v[i]).abs() < 1e-8 * (1.0 + eig.values[j].abs()));
            }
        }
    }

    #[test]
    fn covariance_is_psd(data in prop::collection::vec(-50.0f32..50.0, 5 * 30)) {
        let x = DenseMatrix::new(30, 5, data).unwrap();
        let cov = covariance(&x).unwrap();
        let vals = jacobi_eigenvalues(&cov);
        let scale = vals[0].abs().max(1.0);
        prop_assert!(vals.iter().all(|&v| v >= -1e-9 * scale), "{:?}", vals);
    }

    #[test]
    fn pearson_affine_invariance(
        xs in prop::collection::vec(-100.0f64..100.0, 3..40),
        noise in prop::collection::vec(-100.0f64..100.0, 40),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
        flip in any::<bool>(),
    ) {
        let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, n)| x + n).collect();
        prop_assume!(pearson_r(&xs, &ys).is_ok());
        let r = pearson_r(&xs, &ys).unwrap();
        let sign = if flip { -1.0 } else { 1.0 };
        let xt: Vec<f64> = xs.iter().map(|x| sign * a * x + b).collect();
        let rt = pearson_r(&xt, &ys).unwrap();
        prop_assert!((rt - sign * r).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&r));
    }

    #[test]
    fn overlap_symmetry_range_and_rotation(
        a in prop::collection::vec(-5.0f32..5.0, 40 * 6),
        b in prop::collection::vec(-5.0f32..5.0, 30 * 6),
        angle in 0.0f64..std::f64::consts::TAU,
        k in 1usize..=6,
    ) {
        let ta = DenseMatrix::new(40, 6, a).unwrap();
        let tb = DenseMatrix::new(30, 6, b).unwrap();
        let ab = subspace_overlap(&ta, &tb, k).unwrap();
        let ba = subspace_overlap(&tb, &ta, k).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((subspace_overlap(&ta, &ta, k).unwrap() - 1.0).abs() < 1e-6);

        // rotation in the (0, 1) plane; only checked with k = d, where the
        // subspace is independent of near-degenerate eigenvalues
        let (c, s) = (angle.cos(), angle.sin());
        let rot = |m: &DenseMatrix| {
            let mut data = m.data().to_vec();
            for row in data.chunks_mut(6) {
                let (x, y) = (f64::from(row[0]), f64::from(row[1]));
                row[0] = (c * x - s * y) as f32;
                row[1] = (s * x + c * y) as f32;
            }
            DenseMatrix::new(m.rows(), 6, data).unwrap()
        };
        let rotated = subspace_overlap(&rot(&ta), &rot(&tb), 6).unwrap();
        prop_assert!((rotated - subspace_overlap(&ta, &tb, 6).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn concat_is_associative(
        (x, y, z) in (1usize..10).prop_flat_map(|n| (
            prop::collection::vec(-1.0f32..1.0, n * 2),
            prop::collection::vec(-1.0f32..1.0, n * 3),
            prop::collection::vec(-1.0f32..1.0, n),
        )),
    ) {
        let n = z.len();
        let labels: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        let names = vec!["a".to_string(), "b".to_string()];
        let mk = |data: Vec<f32>, d: usize| {
            EncodedDataset::new_partial(DenseMatrix::new(n, d, data).unwrap(), labels.clone(), names.clone(), meta(d)).unwrap()
        };
        let (a, b, c) = (mk(x, 2), mk(y, 3), mk(z, 1));
        let left = concat_ensemble(&[concat_ensemble(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let right = concat_ensemble(&[a.clone(), concat_ensemble(&[b, c]).unwrap()]).unwrap();
        prop_assert_eq!(left.features(), right.features());
        prop_assert_eq!(left.labels(), right.labels());
        prop_assert_eq!(left.dim(), 6);
    }

    #[test]
    fn split_partitions_rows(ds in dataset(2, 4, 30, 5), seed in any::<u64>()) {
        let (split, _) = split_dataset(&ds, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), seed).unwrap();
        let mut rows: Vec<(Vec<u32>, u32)> = Vec::new();
        for part in [&split.train, &split.val, &split.test] {
            for i in 0..part.len() {
                rows.push((part.row(i).iter().map(|v| v.to_bits()).collect(), part.labels()[i]));
            }
        }
        let mut original: Vec<(Vec<u32>, u32)> = (0..ds.len())
            .map(|i| (ds.row(i).iter().map(|v| v.to_bits()).collect(), ds.labels()[i]))
            .collect();
        rows.sort();
        original.sort();
        prop_assert_eq!(rows, original);
    }
}
