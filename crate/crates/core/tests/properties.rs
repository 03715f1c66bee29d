use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rmen_cca::data_io::{parse_dsv, split_indices, ModelBody, ModelFile};
use rmen_cca::pipeline::Variant;
use rmen_cca::metrics::{is_non_increasing, pcc, principal_angles};
use rmen_cca::regularizers::{build_s_inverse, hq_diagonal, l21_norm, nuclear_norm};
use rmen_cca::solver::normalize;
use rmen_cca::{CanonicalPair, Hyperparams, ViewMatrix};

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DMatrix<f64>> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centering_is_idempotent(m in matrix(1..=6, 2..=20)) {
        let once = ViewMatrix::new(m.clone()).unwrap().center().unwrap();
        let twice = once.center().unwrap();
        prop_assert!(once.is_centered());
        prop_assert!((once.data() - twice.data()).amax() <= 1e-12 * (1.0 + m.amax()));
        prop_assert!((once.uncentered() - &m).amax() <= 1e-12 * (1.0 + m.amax()));
    }

    #[test]
    fn pcc_ignores_positive_affine_maps(
        a in matrix(8..=30, 1..=3),
        noise in prop::collection::vec(-1.0f64..1.0, 90),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let b = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + noise[(i * 3 + j) % noise.len()]);
        let base = pcc(&a, &b).unwrap();
        let moved = pcc(&a.map(|v| scale * v + shift), &b).unwrap();
        for (x, y) in base.per_dimension.iter().zip(&moved.per_dimension) {
            prop_assert!((x - y).abs() <= 1e-9);
            prop_assert!(x.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn hq_weights_shrink_as_rows_grow(m in matrix(1..=8, 1..=4), zeta in 1e-8f64..1.0) {
        let hq = hq_diagonal(&m, zeta).unwrap();
        let norms: Vec<f64> = m.row_iter().map(|r| r.norm_squared()).collect();
        for i in 0..norms.len() {
            for j in 0..norms.len() {
                if norms[i] < norms[j] {
                    prop_assert!(hq.weights[i] >= hq.weights[j]);
                }
            }
            prop_assert!(hq.weights[i] <= 0.5 / zeta.sqrt() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn norms_are_absolutely_homogeneous(m in matrix(1..=10, 1..=4), c in -5.0f64..5.0) {
        let scaled = &m * c;
        prop_assert!((l21_norm(&scaled) - c.abs() * l21_norm(&m)).abs() <= 1e-9 * (1.0 + l21_norm(&m)));
        prop_assert!((nuclear_norm(&scaled) - c.abs() * nuclear_norm(&m)).abs() <= 1e-9 * (1.0 + nuclear_norm(&m)));
        prop_assert!(nuclear_norm(&m) <= l21_norm(&m) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn s_inverse_is_symmetric_positive(a in matrix(2..=12, 1..=2), zeta in 1e-3f64..1.0) {
        let b = a.map(|v| v.sin());
        let op = build_s_inverse(&a, &b, zeta).unwrap();
        let dense = op.apply(&DMatrix::identity(a.nrows(), a.nrows())).unwrap();
        prop_assert!((&dense - dense.transpose()).amax() <= 1e-10 * dense.amax());
        let eig = dense.symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l > 0.0 && l <= 1.0 / zeta.sqrt() * (1.0 + 1e-9)));
    }

    #[test]
    fn principal_angles_are_symmetric(a in matrix(6..=6, 2..=2), b in matrix(6..=6, 2..=2)) {
        prop_assume!(a.clone().svd(false, false).singular_values.min() > 1e-3);
        prop_assume!(b.clone().svd(false, false).singular_values.min() > 1e-3);
        let ab = principal_angles(&a, &b).unwrap();
        let ba = principal_angles(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((x - y).abs() <= 1e-8);
            prop_assert!(*x >= 0.0 && *x <= std::f64::consts::FRAC_PI_2 + 1e-12);
        }
        let self_angles = principal_angles(&a, &(&a * 3.0)).unwrap();
        prop_assert!(self_angles.iter().all(|t| *t <= 1e-7));
    }

    #[test]
    fn normalize_whitens(m in matrix(3..=6, 1..=2), seed in 0u64..1000) {
        let d = m.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = DMatrix::from_fn(d, 40, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = &data * data.transpose() / 40.0;
        prop_assume!(m.clone().svd(false, false).singular_values.min() > 1e-2);
        let u = normalize(&m, &cov, 1e-8).unwrap();
        let gram = u.transpose() * &cov * &u;
        let eye = DMatrix::<f64>::identity(m.ncols(), m.ncols());
        let cond = { let e = cov.symmetric_eigen().eigenvalues; e.max() / e.min().max(1e-300) };
        prop_assume!(cond < 1e6);
        prop_assert!((gram - eye).norm() <= 1e-8 * m.ncols() as f64);
    }

    #[test]
    fn split_partitions_the_samples(n in 2usize..500, fraction in 0.01f64..0.99, seed in any::<u64>()) {
        let (train, valid) = split_indices(n, fraction, seed).unwrap();
        prop_assert!(!train.is_empty() && !valid.is_empty());
        let mut all: Vec<usize> = train.iter().chain(&valid).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(train.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(split_indices(n, fraction, seed).unwrap(), (train, valid));
    }

    #[test]
    fn dsv_round_trips_through_text(m in matrix(1..=5, 1..=5)) {
        let text: String = (0..m.ncols())
            .map(|j| (0..m.nrows()).map(|i| format!("{:?}", m[(i, j)])).collect::<Vec<_>>().join(",") + "\n")
            .collect();
        let view = parse_dsv(text.as_bytes(), b',').unwrap();
        prop_assert_eq!(view.data(), &m);
    }

    #[test]
    fn model_bytes_round_trip(u in matrix(1..=5, 1..=3), seed in any::<u64>()) {
        let v = u.map(|x| x * 0.5 + 1.0);
        let model = ModelFile {
            variant: Variant::Rmen,
            hyperparams: Hyperparams { seed, ..Hyperparams::with_k(u.ncols()) },
            means_x: u.column(0).into_owned(),
            means_y: v.column(0).into_owned(),
            body: ModelBody::Linear { pair: CanonicalPair::new(u.clone(), v).unwrap() },
        };
        let bytes = model.to_bytes();
        prop_assert_eq!(ModelFile::from_bytes(&bytes).unwrap(), model);
        prop_assert!(ModelFile::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn monotone_check_accepts_sorted_traces(mut v in prop::collection::vec(-1e3f64..1e3, 0..50)) {
        v.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(is_non_increasing(&v, 0.0));
    }
}
