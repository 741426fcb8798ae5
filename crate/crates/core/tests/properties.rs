use std::sync::Arc;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use taei::bench::{bin_center, bin_index, cover, nearest_reference, pareto_front, BinMaps, SphereSpec};
use taei::eval::roc_auc;
use taei::interp::{poly_star, ros, smote, squared_euclidean, NeighborIndex};
use taei::nn::{gaussian_kl, mse_loss, softmax_ce_loss, AdamConfig, AdamState, GradientSet};
use taei::oversampler::{oversample, Amount, Method, OversamplerSpec};
use taei::tabular::{apportion, stratified_split, ColumnSpec, MixedDataset, PreprocessState, TabularSchema};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn sized_matrix(max_rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows).prop_flat_map(move |r| matrix(r, cols))
}

// integer grid points so that exact distance ties actually happen
fn grid_matrix(max_rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows).prop_flat_map(move |r| {
        prop::collection::vec(-3i32..=3, r * cols)
            .prop_map(move |v| Array2::from_shape_vec((r, cols), v.into_iter().map(f64::from).collect()).unwrap())
    })
}

fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60)
        .prop_flat_map(|n| (prop::collection::vec(-50i32..50, n), prop::collection::vec(any::<bool>(), n)))
        .prop_map(|(s, mut l)| {
            l[0] = true;
            l[1] = false;
            (s.into_iter().map(f64::from).collect(), l)
        })
}

fn mixed_dataset(n: usize, seed: u64) -> MixedDataset {
    let schema = TabularSchema::new(
        vec![
            ColumnSpec::continuous("a"),
            ColumnSpec::categorical("c", ["x", "y", "z"]),
            ColumnSpec::continuous("b"),
            ColumnSpec::categorical("y", ["neg", "pos"]),
        ],
        "y",
        "pos",
    )
    .unwrap();
    let mut r = taei::rng::seeded(seed);
    use rand::Rng;
    let cont = Array2::from_shape_fn((n, 2), |_| r.random_range(-5.0..5.0));
    let cat = Array2::from_shape_fn((n, 1), |_| r.random_range(0..3usize));
    let labels = (0..n).map(|i| i % 4 == 0).collect();
    MixedDataset::new(Arc::new(schema), cont, cat, labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn roc_auc_ignores_strictly_monotone_transforms((s, l) in scores_and_labels(), a in 0.1f64..5.0, b in -10.0f64..10.0) {
        let base = roc_auc(&s, &l).unwrap();
        let affine: Vec<f64> = s.iter().map(|v| a * v + b).collect();
        let cubed: Vec<f64> = s.iter().map(|v| v * v * v).collect();
        let squashed: Vec<f64> = s.iter().map(|v| (v / 10.0).tanh()).collect();
        prop_assert_eq!(roc_auc(&affine, &l).unwrap(), base);
        prop_assert_eq!(roc_auc(&cubed, &l).unwrap(), base);
        prop_assert_eq!(roc_auc(&squashed, &l).unwrap(), base);
    }

    #[test]
    fn roc_auc_of_negated_scores_is_the_complement(n in 2usize..60, seed in any::<u64>(), labels in prop::collection::vec(any::<bool>(), 60)) {
        use rand::seq::SliceRandom;
        let mut s: Vec<f64> = (0..n).map(|i| i as f64).collect();
        s.shuffle(&mut taei::rng::seeded(seed));
        let mut l = labels[..n].to_vec();
        l[0] = true;
        l[1] = false;
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert_eq!(roc_auc(&s, &l).unwrap() + roc_auc(&neg, &l).unwrap(), 1.0);
    }

    #[test]
    fn roc_auc_stays_in_the_unit_interval((s, l) in scores_and_labels()) {
        let auc = roc_auc(&s, &l).unwrap();
        prop_assert!((0.0..=1.0).contains(&auc));
    }

    #[test]
    fn pareto_front_is_non_dominated_and_covers_the_rest(pts in prop::collection::vec((0i32..8, 0i32..8), 0..40)) {
        let points: Vec<(f64, f64)> = pts.iter().map(|&(a, b)| (f64::from(a), f64::from(b))).collect();
        let front = pareto_front(&points);
        let dominates = |p: (f64, f64), q: (f64, f64)| p.0 <= q.0 && p.1 <= q.1 && (p.0 < q.0 || p.1 < q.1);
        for &i in &front {
            for &j in &front {
                prop_assert!(!dominates(points[i], points[j]));
            }
        }
        for j in 0..points.len() {
            if !front.contains(&j) {
                prop_assert!(front.iter().any(|&i| dominates(points[i], points[j])));
            }
        }
    }

    #[test]
    fn kd_tree_matches_brute_force(points in grid_matrix(60, 3), queries in grid_matrix(10, 3), k in 1usize..6) {
        let k = k.min(points.nrows());
        let tree = NeighborIndex::kd_tree(points.clone());
        let brute = NeighborIndex::brute_force(points.clone());
        for q in queries.rows() {
            let q = q.to_vec();
            prop_assert_eq!(tree.k_nearest(&q, &[], k).unwrap(), brute.k_nearest(&q, &[], k).unwrap());
            prop_assert_eq!(tree.nearest(&q).unwrap(), brute.nearest(&q).unwrap());
        }
    }

    #[test]
    fn nearest_reference_prefers_the_first_minimum(syn in grid_matrix(20, 2), min in grid_matrix(15, 2), maj in grid_matrix(15, 2)) {
        let got = nearest_reference(syn.view(), min.view(), maj.view()).unwrap();
        let all: Vec<Vec<f64>> = min.rows().into_iter().chain(maj.rows()).map(|r| r.to_vec()).collect();
        for (s, &g) in syn.rows().into_iter().zip(&got) {
            let s = s.to_vec();
            let d: Vec<f64> = all.iter().map(|r| squared_euclidean(&s, r)).collect();
            let best = d.iter().copied().fold(f64::INFINITY, f64::min);
            let first = d.iter().position(|&v| v == best).unwrap();
            prop_assert_eq!(d[g], best);
            // a tie between a minority and a majority point goes to the minority
            prop_assert_eq!(g < min.nrows(), first < min.nrows());
        }
    }

    #[test]
    fn cover_never_grows_when_synthetics_are_added(syn in sized_matrix(20, 3), extra in sized_matrix(10, 3), reference in sized_matrix(30, 3)) {
        let before = cover(syn.view(), reference.view()).unwrap();
        let more = ndarray::concatenate![ndarray::Axis(0), syn, extra];
        let after = cover(more.view(), reference.view()).unwrap();
        prop_assert!(after <= before);
        prop_assert!(before >= 0.0);
    }

    #[test]
    fn bin_permutations_are_bijections(dims in 1usize..8, bins in 2usize..12, seed in any::<u64>()) {
        let coords: Vec<usize> = (0..dims.div_ceil(2)).collect();
        let maps = BinMaps::random(dims, &coords, bins, seed).unwrap();
        prop_assert_eq!(maps.coordinates(), coords);
        for f in &maps.features {
            let mut sorted = f.permutation.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..bins).collect::<Vec<_>>());
            for (bin, &code) in f.permutation.iter().enumerate() {
                prop_assert_eq!(f.inverse[code], bin);
            }
        }
    }

    #[test]
    fn bin_centers_lie_within_half_a_bin(v in -1.0f64..=1.0, bins in 2usize..20) {
        let k = bin_index(v, bins);
        prop_assert!(k < bins);
        prop_assert!((bin_center(k, bins) - v).abs() <= 1.0 / bins as f64 + 1e-12);
    }

    #[test]
    fn sphere_rows_have_unit_norm(dims in 3usize..9, frac in 0.05f64..0.5, seed in any::<u64>()) {
        let spec = SphereSpec::new(dims, 200, frac, seed).unwrap();
        let rot = &spec.rotation;
        let eye = rot.t().dot(rot);
        for ((i, j), v) in eye.indexed_iter() {
            let expected = if i == j { 1.0 } else { 0.0 };
            prop_assert!((v - expected).abs() < 1e-9);
        }
        let data = spec.sample();
        prop_assert_eq!(data.minority_count(), spec.n_minority());
        for row in data.continuous().rows() {
            prop_assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn smote_rows_lie_on_their_segments(points in sized_matrix(25, 3), n_syn in 0usize..80, k in 1usize..7, seed in any::<u64>()) {
        prop_assume!(points.nrows() >= 2);
        let batch = smote(points.view(), n_syn, k, seed).unwrap();
        prop_assert_eq!(batch.len(), n_syn);
        for (s, p) in batch.continuous.rows().into_iter().zip(&batch.provenance) {
            prop_assert!((0.0..=1.0).contains(&p.t));
            let a = points.row(p.base);
            let b = points.row(p.neighbor.unwrap());
            for j in 0..3 {
                prop_assert!((a[j] + p.t * (b[j] - a[j]) - s[j]).abs() < 1e-9);
            }
        }
        prop_assert_eq!(smote(points.view(), n_syn, k, seed).unwrap(), batch);
    }

    #[test]
    fn poly_rows_lie_between_row_and_centroid(points in sized_matrix(25, 3), n_syn in 0usize..80, seed in any::<u64>()) {
        let batch = poly_star(points.view(), n_syn, seed).unwrap();
        prop_assert_eq!(batch.len(), n_syn);
        let c = points.mean_axis(ndarray::Axis(0)).unwrap();
        for (s, p) in batch.continuous.rows().into_iter().zip(&batch.provenance) {
            prop_assert!((0.0..=1.0).contains(&p.t));
            let a = points.row(p.base);
            for j in 0..3 {
                prop_assert!((a[j] + p.t * (c[j] - a[j]) - s[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn smote_bases_follow_ros_draws(points in sized_matrix(20, 2), n_syn in 1usize..50, seed in any::<u64>()) {
        prop_assume!(points.nrows() >= 2);
        let codes = Array2::<usize>::zeros((points.nrows(), 0));
        let copies = ros(points.view(), codes.view(), n_syn, seed).unwrap();
        let interp = smote(points.view(), n_syn, 3, seed).unwrap();
        let bases = |b: &taei::interp::SyntheticBatch| b.provenance.iter().map(|p| p.base).collect::<Vec<_>>();
        prop_assert_eq!(bases(&copies), bases(&interp));
    }

    #[test]
    fn apportion_is_exact(n in 0usize..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let total = 1.0 + a + b;
        let ratios = [1.0 / total, a / total, b / total];
        let counts = apportion(n, &ratios);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        for (c, r) in counts.iter().zip(ratios) {
            prop_assert!((*c as f64 - n as f64 * r).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn stratified_folds_are_disjoint_and_exhaustive(n in 12usize..200, seed in any::<u64>()) {
        let data = mixed_dataset(n, seed);
        let split = stratified_split(&data, [0.6, 0.2, 0.2], seed).unwrap();
        let mut all: Vec<usize> = split.indices.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let folds = [&split.train, &split.val, &split.test];
        for (label, count) in [(true, data.minority_count()), (false, data.majority_count())] {
            let expected = apportion(count, &[0.6, 0.2, 0.2]);
            let got: Vec<usize> = folds.iter().map(|f| f.indices_with_label(label).len()).collect();
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn standardization_round_trips(n in 2usize..80, seed in any::<u64>()) {
        let data = mixed_dataset(n, seed);
        let state = PreprocessState::fit(&data).unwrap();
        let back = state.inverse_transform(&state.transform(&data).unwrap()).unwrap();
        for (x, y) in back.continuous().iter().zip(data.continuous().iter()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert_eq!(back.categorical(), data.categorical());
    }

    #[test]
    fn losses_are_nonnegative_and_softmax_rows_sum_to_zero(logits in matrix(6, 4), target in matrix(6, 4), labels in prop::collection::vec(0usize..4, 6)) {
        let (mse, _) = mse_loss(logits.view(), target.view()).unwrap();
        prop_assert!(mse >= 0.0);
        let (ce, grad) = softmax_ce_loss(logits.view(), &labels).unwrap();
        prop_assert!(ce >= 0.0);
        for row in grad.rows() {
            prop_assert!(row.sum().abs() < 1e-12);
        }
        let (kl, _, _) = gaussian_kl(logits.view(), target.view()).unwrap();
        prop_assert!(kl >= 0.0);
        let zeros = Array2::zeros((6, 4));
        let (kl0, _, _) = gaussian_kl(zeros.view(), zeros.view()).unwrap();
        prop_assert_eq!(kl0, 0.0);
    }

    #[test]
    fn adam_with_zero_gradient_keeps_parameters(w in prop::collection::vec(-5.0f64..5.0, 1..30), steps in 1usize..5) {
        let mut p = Array1::from(w.clone());
        let grads = GradientSet::new(vec![vec![0.0; w.len()]]);
        let mut state = AdamState::new();
        for _ in 0..steps {
            state.step(&AdamConfig::default(), vec![p.as_slice_mut().unwrap()], &grads).unwrap();
        }
        prop_assert_eq!(p.to_vec(), w);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feature_space_oversampling_keeps_originals_and_codes(
        n in 12usize..60,
        seed in any::<u64>(),
        method in prop::sample::select(vec![Method::Ros, Method::Smote, Method::SmoteNc, Method::Poly]),
        n_syn in 0usize..40,
    ) {
        let data = mixed_dataset(n, seed);
        let before = data.clone();
        let spec = OversamplerSpec::new(method, Amount::NSyn(n_syn)).with_seed(seed);
        let aug = oversample(&data, &data, &spec).unwrap();
        prop_assert_eq!(aug.n_syn(), n_syn);
        prop_assert_eq!(aug.original.continuous(), before.continuous());
        prop_assert_eq!(aug.original.categorical(), before.categorical());
        prop_assert_eq!(aug.original.labels(), before.labels());
        prop_assert!(aug.synthetic.labels().iter().all(|&l| l));
        prop_assert!(aug.synthetic.categorical().iter().all(|&c| c < 3));
        prop_assert!(aug.synthetic.continuous().iter().all(|v| v.is_finite()));
        let combined = aug.combined().unwrap();
        prop_assert_eq!(combined.minority_count(), data.minority_count() + n_syn);
        let again = oversample(&data, &data, &spec).unwrap();
        prop_assert_eq!(again.synthetic.continuous(), aug.synthetic.continuous());
        prop_assert_eq!(again.synthetic.categorical(), aug.synthetic.categorical());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn latent_oversampling_is_deterministic_and_valid(
        seed in any::<u64>(),
        method in prop::sample::select(vec![Method::SmoteAe, Method::SmoteVae, Method::PolyRae]),
    ) {
        let data = mixed_dataset(48, seed);
        let mut spec = OversamplerSpec::new(method, Amount::NSyn(20)).with_seed(seed);
        spec.train.max_epochs = 5;
        let aug = oversample(&data, &data, &spec).unwrap();
        prop_assert_eq!(aug.n_syn(), 20);
        prop_assert!(aug.synthetic.categorical().iter().all(|&c| c < 3));
        prop_assert!(aug.synthetic.continuous().iter().all(|v| v.is_finite()));
        let again = oversample(&data, &data, &spec).unwrap();
        prop_assert_eq!(again.synthetic.continuous(), aug.synthetic.continuous());
        prop_assert_eq!(again.synthetic.categorical(), aug.synthetic.categorical());
    }
}
