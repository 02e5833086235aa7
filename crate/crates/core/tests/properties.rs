//! Property tests: randomized checks of the structural invariants that the
//! unit tests pin down only at hand-picked points.

use proptest::prelude::*;

use longtail::labels::TargetTable;
use longtail::losses::{batch_loss, ce_loss, focal_loss, mse_loss, softmax, Loss};
use longtail::metrics::{report, ConfusionMatrix};
use longtail::network::MlpModel;
use longtail::{
    load_csv, long_tailed_counts, poly_lr, save_csv, step_counts, subsample, ImbalanceKind,
    ImbalanceSpec, LabeledDataset,
};

// ---------------------------------------------------------------------------
// Target tables
// ---------------------------------------------------------------------------

/// Independent oracle: hot values via a stable descending sort, which breaks
/// count ties by the original (ascending) class index on its own.
fn oracle_hot_values(counts: &[usize], alpha: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&c| std::cmp::Reverse(counts[c]));
    let mut hot = vec![0.0; counts.len()];
    for (position, &class) in order.iter().enumerate() {
        hot[class] = (position + 1) as f64 * alpha;
    }
    hot
}

fn class_counts_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=1000, 2..=8)
}

proptest! {
    #[test]
    fn outlying_matches_stable_sort_oracle(
        counts in class_counts_strategy(),
        alpha in 0.1f64..8.0,
    ) {
        let table = TargetTable::outlying(&counts, alpha).unwrap();
        let oracle = oracle_hot_values(&counts, alpha);
        for (class, expected) in oracle.iter().enumerate() {
            prop_assert_eq!(table.hot_value(class).unwrap(), *expected);
        }
    }

    #[test]
    fn outlying_rarer_class_sits_farther_out(
        counts in class_counts_strategy(),
        alpha in 0.1f64..8.0,
    ) {
        let table = TargetTable::outlying(&counts, alpha).unwrap();
        let k = counts.len();
        for a in 0..k {
            for b in 0..k {
                if counts[a] > counts[b] {
                    prop_assert!(
                        table.hot_value(a).unwrap() < table.hot_value(b).unwrap(),
                        "class {} (n={}) should sit closer than class {} (n={})",
                        a, counts[a], b, counts[b]
                    );
                }
            }
        }
        // The hot values are exactly the multiset {alpha, 2 alpha, ..., K alpha}.
        let mut hot: Vec<f64> = (0..k).map(|c| table.hot_value(c).unwrap()).collect();
        hot.sort_by(f64::total_cmp);
        for (i, value) in hot.iter().enumerate() {
            prop_assert_eq!(*value, (i + 1) as f64 * alpha);
        }
    }

    #[test]
    fn outlying_scales_exactly_with_alpha(
        counts in class_counts_strategy(),
        alpha in 0.1f64..8.0,
    ) {
        // Off-diagonal entries are zero and hot values are integer multiples
        // of alpha, so scaling the unit table is exact, not approximate.
        let unit = TargetTable::outlying(&counts, 1.0).unwrap();
        let scaled = TargetTable::outlying(&counts, alpha).unwrap();
        for class in 0..counts.len() {
            let u = unit.row(class).unwrap();
            let s = scaled.row(class).unwrap();
            for (su, uu) in s.iter().zip(u.iter()) {
                prop_assert_eq!(*su, alpha * *uu);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Count generators
// ---------------------------------------------------------------------------

fn imbalance_args() -> impl Strategy<Value = (usize, f64, usize)> {
    (2usize..=12, 1.0f64..=200.0, 0usize..=9000).prop_map(|(k, ratio, extra)| {
        let n_max = ratio.ceil() as usize + extra;
        (k, ratio, n_max)
    })
}

proptest! {
    #[test]
    fn long_tailed_counts_shape_holds((k, ratio, n_max) in imbalance_args()) {
        let spec = ImbalanceSpec { kind: ImbalanceKind::LongTailed, ratio, n_max };
        let counts = long_tailed_counts(k, &spec).unwrap();
        prop_assert_eq!(counts.len(), k);
        prop_assert_eq!(counts[0], n_max);
        for pair in counts.windows(2) {
            prop_assert!(pair[0] >= pair[1], "counts must be non-increasing: {:?}", counts);
        }
        let min = *counts.last().unwrap();
        prop_assert!(min >= 1);
        let realized = n_max as f64 / min as f64;
        prop_assert!(realized >= ratio * (1.0 - 1e-9), "realized {} < ratio {}", realized, ratio);
        prop_assert!(
            realized < ratio * (1.0 + 1.0 / min as f64),
            "realized {} too far above ratio {} (min {})",
            realized, ratio, min
        );
    }

    #[test]
    fn step_counts_has_two_levels((k, ratio, n_max) in imbalance_args()) {
        let spec = ImbalanceSpec { kind: ImbalanceKind::Step, ratio, n_max };
        let counts = step_counts(k, &spec).unwrap();
        let frequent = k.div_ceil(2);
        prop_assert_eq!(counts.len(), k);
        for (i, &c) in counts.iter().enumerate() {
            if i < frequent {
                prop_assert_eq!(c, n_max);
            } else {
                prop_assert_eq!(c, counts[k - 1]);
                prop_assert!(c >= 1);
            }
        }
        let realized = n_max as f64 / counts[k - 1] as f64;
        prop_assert!(realized >= ratio * (1.0 - 1e-9));
        prop_assert!(realized < ratio * (1.0 + 1.0 / counts[k - 1] as f64));
    }
}

// ---------------------------------------------------------------------------
// Subsampling
// ---------------------------------------------------------------------------

fn grouped_dataset() -> impl Strategy<Value = (LabeledDataset, Vec<usize>)> {
    (2usize..=4)
        .prop_flat_map(|k| {
            (
                Just(k),
                prop::collection::vec(1usize..=15, k),
                any::<u64>(),
            )
        })
        .prop_flat_map(|(k, avail, noise_seed)| {
            let requested = avail
                .iter()
                .map(|&a| 0..=a)
                .collect::<Vec<_>>();
            (Just((k, avail, noise_seed)), requested)
        })
        .prop_map(|((k, avail, noise_seed), requested)| {
            // Deterministic pseudo-random features so rows are distinguishable.
            let mut state = noise_seed;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let mut ds = LabeledDataset::new(2, k);
            for (class, &n) in avail.iter().enumerate() {
                for _ in 0..n {
                    ds.push(&[next(), next()], class).unwrap();
                }
            }
            (ds, requested)
        })
}

proptest! {
    #[test]
    fn subsample_hits_requested_counts_and_is_a_subset(
        (dataset, requested) in grouped_dataset(),
        seed in any::<u64>(),
    ) {
        let picked = subsample(&dataset, &requested, seed).unwrap();
        prop_assert_eq!(picked.class_counts(), requested.clone());
        prop_assert_eq!(picked.num_classes(), dataset.num_classes());
        // Every picked row exists in the source at least as often.
        let row_key = |ds: &LabeledDataset, i: usize| {
            let bits: Vec<u64> = ds.feature(i).iter().map(|v| v.to_bits()).collect();
            (bits, ds.label(i))
        };
        let mut source = std::collections::HashMap::new();
        for i in 0..dataset.len() {
            *source.entry(row_key(&dataset, i)).or_insert(0usize) += 1;
        }
        for i in 0..picked.len() {
            let key = row_key(&picked, i);
            let slot = source.get_mut(&key);
            prop_assert!(slot.is_some(), "picked row {} not in source", i);
            let slot = slot.unwrap();
            prop_assert!(*slot > 0, "picked row {} used more often than available", i);
            *slot -= 1;
        }
        // Same seed, same choice.
        let again = subsample(&dataset, &requested, seed).unwrap();
        prop_assert_eq!(picked, again);
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

fn confusion_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (2usize..=6)
        .prop_flat_map(|k| (Just(k), prop::collection::vec(0usize..=20, k * k)))
        .prop_filter("empty matrix", |(_, cells)| cells.iter().sum::<usize>() > 0)
}

proptest! {
    #[test]
    fn metrics_match_brute_force_counts((k, cells) in confusion_strategy()) {
        let mut cm = ConfusionMatrix::new(k);
        for (idx, &n) in cells.iter().enumerate() {
            for _ in 0..n {
                cm.add(idx / k, idx % k).unwrap();
            }
        }
        let out = report(&cm).unwrap();

        let total: usize = cells.iter().sum();
        let trace: usize = (0..k).map(|c| cells[c * k + c]).sum();
        prop_assert!((out.accuracy - trace as f64 / total as f64).abs() < 1e-15);

        let mut f_sum = 0.0;
        let mut iou_sum = 0.0;
        let mut recall_weighted = 0.0;
        for c in 0..k {
            let tp = cells[c * k + c];
            let row: usize = (0..k).map(|p| cells[c * k + p]).sum();
            let col: usize = (0..k).map(|t| cells[t * k + c]).sum();
            let fp = col - tp;
            let fn_ = row - tp;
            let zero_safe = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
            let precision = zero_safe(tp as f64, (tp + fp) as f64);
            let recall = zero_safe(tp as f64, (tp + fn_) as f64);
            let f1 = zero_safe(2.0 * precision * recall, precision + recall);
            let iou = zero_safe(tp as f64, (tp + fp + fn_) as f64);

            let got = &out.per_class[c];
            prop_assert!((got.precision - precision).abs() < 1e-12);
            prop_assert!((got.recall - recall).abs() < 1e-12);
            prop_assert!((got.f1 - f1).abs() < 1e-12);
            prop_assert!((got.iou - iou).abs() < 1e-12);
            prop_assert!(got.iou <= got.f1 + 1e-15, "IoU must not exceed F1");

            f_sum += f1;
            iou_sum += iou;
            recall_weighted += recall * row as f64 / total as f64;
        }
        prop_assert!((out.macro_f - f_sum / k as f64).abs() < 1e-12);
        prop_assert!((out.mean_iou - iou_sum / k as f64).abs() < 1e-12);
        // Accuracy decomposes as prevalence-weighted recall.
        prop_assert!((out.accuracy - recall_weighted).abs() < 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

fn logits_and_class() -> impl Strategy<Value = (Vec<f64>, usize)> {
    prop::collection::vec(-30.0f64..30.0, 2..=8)
        .prop_flat_map(|logits| {
            let len = logits.len();
            (Just(logits), 0..len)
        })
}

proptest! {
    #[test]
    fn softmax_is_a_shift_invariant_distribution(
        (logits, _) in logits_and_class(),
        shift in -50.0f64..50.0,
    ) {
        let y = softmax(&logits).unwrap();
        let sum: f64 = y.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(y.iter().all(|&p| p > 0.0));

        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let ys = softmax(&shifted).unwrap();
        for (a, b) in y.iter().zip(ys.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ce_is_nonnegative_with_zero_sum_gradient((logits, class) in logits_and_class()) {
        let out = ce_loss(&logits, class, None).unwrap();
        prop_assert!(out.value >= 0.0);
        let grad_sum: f64 = out.grad.iter().sum();
        prop_assert!(grad_sum.abs() < 1e-12, "CE gradient must sum to zero, got {}", grad_sum);
    }

    #[test]
    fn focal_at_gamma_zero_is_exactly_ce((logits, class) in logits_and_class()) {
        let ce = ce_loss(&logits, class, None).unwrap();
        let focal = focal_loss(&logits, class, 0.0, None).unwrap();
        prop_assert_eq!(ce.value, focal.value);
        for (a, b) in ce.grad.iter().zip(focal.grad.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn focal_never_exceeds_ce(
        (logits, class) in logits_and_class(),
        gamma in 0.0f64..5.0,
    ) {
        let ce = ce_loss(&logits, class, None).unwrap();
        let focal = focal_loss(&logits, class, gamma, None).unwrap();
        prop_assert!(focal.value <= ce.value + 1e-15);
        prop_assert!(focal.value >= 0.0);
    }

    #[test]
    fn mse_gradient_is_residual((logits, class) in logits_and_class()) {
        let k = logits.len();
        let table = TargetTable::one_hot(k).unwrap();
        let target = table.row(class).unwrap();
        let out = mse_loss(&logits, target).unwrap();
        let mut value = 0.0;
        for (i, (&a, &t)) in logits.iter().zip(target.iter()).enumerate() {
            prop_assert_eq!(out.grad[i], a - t);
            value += 0.5 * (a - t) * (a - t);
        }
        prop_assert!((out.value - value).abs() <= 1e-12 * value.max(1.0));
        // Loss vanishes exactly at the target.
        let exact = mse_loss(target, target).unwrap();
        prop_assert_eq!(exact.value, 0.0);
        prop_assert!(exact.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn batch_loss_mean_matches_per_sample_values(
        batches in prop::collection::vec(logits_and_class(), 1..=6),
    ) {
        let k = batches[0].0.len();
        let uniform: Vec<(Vec<f64>, usize)> = batches
            .into_iter()
            .map(|(mut logits, class)| {
                logits.resize(k, 0.0);
                (logits, class.min(k - 1))
            })
            .collect();
        let logits: Vec<Vec<f64>> = uniform.iter().map(|(l, _)| l.clone()).collect();
        let classes: Vec<usize> = uniform.iter().map(|(_, c)| *c).collect();
        let loss = Loss::CrossEntropy { weights: None };
        let batch = batch_loss(&loss, &logits, &classes).unwrap();
        prop_assert_eq!(batch.per_sample.len(), logits.len());
        let mean: f64 = batch.per_sample.iter().map(|s| s.value).sum::<f64>()
            / batch.per_sample.len() as f64;
        prop_assert!((batch.mean_value - mean).abs() < 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn poly_lr_stays_inside_the_base_interval(
        lr_base in 0.0f64..10.0,
        epoch_max in 1usize..=500,
    ) {
        let mut previous = f64::INFINITY;
        for epoch in 0..=epoch_max {
            let lr = poly_lr(lr_base, epoch, epoch_max).unwrap();
            prop_assert!(lr >= 0.0);
            prop_assert!(lr <= lr_base);
            prop_assert!(lr <= previous);
            previous = lr;
        }
        prop_assert_eq!(poly_lr(lr_base, 0, epoch_max).unwrap(), lr_base);
        prop_assert_eq!(poly_lr(lr_base, epoch_max, epoch_max).unwrap(), 0.0);
    }
}

// ---------------------------------------------------------------------------
// Persistence round trips
// ---------------------------------------------------------------------------

fn dataset_strategy() -> impl Strategy<Value = LabeledDataset> {
    (1usize..=4, 2usize..=4)
        .prop_flat_map(|(dim, k)| {
            (1usize..=30).prop_flat_map(move |rows| {
                (
                    Just((dim, k)),
                    prop::collection::vec(-1e300f64..1e300, rows * dim),
                    prop::collection::vec(0..k, rows),
                )
            })
        })
        .prop_map(|((dim, k), features, labels)| {
            LabeledDataset::from_parts(dim, k, features, labels).unwrap()
        })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(dataset in dataset_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round_trip.csv");
        save_csv(&dataset, &path).unwrap();
        let loaded = load_csv(&path).unwrap();
        // Label inference can only shrink the class count when the largest
        // class is absent; widen it back before the exact comparison.
        let widened = loaded.with_num_classes(dataset.num_classes()).unwrap();
        prop_assert_eq!(widened, dataset);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(
        sizes in prop::collection::vec(1usize..=6, 2..=4),
        seed in any::<u64>(),
    ) {
        let model = MlpModel::init(&sizes, seed).unwrap();
        let text = model.checkpoint_string().unwrap();
        let parsed = MlpModel::from_checkpoint_str(&text).unwrap();
        prop_assert_eq!(parsed, model);
    }
}
