use mase::autodiff::{ParamStore, RngState, Tape, Tensor};
use mase::data::{weighted_sampler, LogitRecord, LogitSet};
use mase::ensemble::{fuse, MaseHead, StackedLogits};
use mase::eval::{auc, confusion, wilcoxon_with, PValueMethod};
use mase::layers::{ForwardCtx, LayerNormLayer};
use mase::loss::{compute_class_weights, focal_loss, one_hot, FocalConfig};
use proptest::prelude::*;

fn tensor(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::new(vec![rows, cols], data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_distributions_and_shift_invariant(
        data in prop::collection::vec(-50.0f64..50.0, 12),
        shift in -100.0f64..100.0,
    ) {
        let mut tape = Tape::new();
        let x = tape.leaf(tensor(3, 4, data.clone()));
        let xs = tape.leaf(tensor(3, 4, data.iter().map(|v| v + shift).collect()));
        let (p, q) = (tape.softmax(x), tape.softmax(xs));
        let (p, q) = (tape.value(p).clone(), tape.value(q).clone());
        for i in 0..3 {
            prop_assert!(p.row(i).iter().all(|v| *v >= 0.0));
            prop_assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        for (a, b) in p.data().iter().zip(q.data()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_of_a_sum_is_the_sum_of_gradients(
        w in prop::collection::vec(-2.0f64..2.0, 6),
        x in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let mut store = ParamStore::new();
        let id = store.add("w", tensor(2, 3, w));
        let xt = tensor(3, 2, x);
        let losses = |tape: &mut Tape<'_>| {
            let wv = tape.param(id);
            let xv = tape.constant(xt.clone());
            let y = tape.matmul(wv, xv).unwrap();
            let a = tape.exp(y);
            let b = tape.relu(y);
            (tape.sum(a), tape.sum(b))
        };
        let grad = |pick: u8| {
            let mut tape = Tape::with_params(&store);
            let (a, b) = losses(&mut tape);
            let loss = match pick {
                0 => a,
                1 => b,
                _ => tape.add(a, b).unwrap(),
            };
            tape.backward(loss).unwrap().param(id).unwrap().to_vec()
        };
        let (ga, gb, gs) = (grad(0), grad(1), grad(2));
        for i in 0..6 {
            prop_assert!((ga[i] + gb[i] - gs[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn layernorm_rows_have_zero_mean_unit_variance(data in prop::collection::vec(-20.0f64..20.0, 16)) {
        let mut store = ParamStore::new();
        let norm = LayerNormLayer::new(&mut store, "n", 8);
        let mut tape = Tape::with_params(&store);
        let x = tape.constant(tensor(2, 8, data.clone()));
        let y = norm.forward(&mut tape, x).unwrap();
        let y = tape.value(y);
        for i in 0..2 {
            let src = &data[i * 8..(i + 1) * 8];
            let src_mean = src.iter().sum::<f64>() / 8.0;
            let src_var = src.iter().map(|v| (v - src_mean).powi(2)).sum::<f64>() / 8.0;
            // eps = 1e-5 shifts the variance by about eps / var
            if src_var < 10.0 {
                continue;
            }
            let row = y.row(i);
            let mean = row.iter().sum::<f64>() / 8.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            prop_assert!(mean.abs() <= 1e-9);
            prop_assert!((var - 1.0).abs() <= 1e-6, "{var}");
        }
    }

    #[test]
    fn focal_loss_is_nonnegative(
        logits in prop::collection::vec(-20.0f64..20.0, 8),
        labels in prop::collection::vec(0usize..2, 4),
        gamma in 0.0f64..5.0,
    ) {
        let cfg = FocalConfig::new(gamma, vec![0.3258, 1.6742]).unwrap();
        let mut tape = Tape::new();
        let z = tape.leaf(tensor(4, 2, logits));
        let loss = focal_loss(&mut tape, z, &one_hot(&labels, 2).unwrap(), &cfg).unwrap();
        prop_assert!(tape.value(loss).item() >= 0.0);
    }

    #[test]
    fn class_weights_sum_to_class_count_and_balance_counts(counts in prop::collection::vec(1u64..100_000, 2..6)) {
        let w = compute_class_weights(&counts).unwrap();
        let c = counts.len() as f64;
        prop_assert!((w.weights.iter().sum::<f64>() - c).abs() <= 1e-9);
        let product = w.weights[0] * counts[0] as f64;
        for (wi, &n) in w.weights.iter().zip(&counts) {
            prop_assert!((wi * n as f64 - product).abs() <= 1e-9 * product.max(1.0));
        }
    }

    #[test]
    fn auc_survives_monotone_transforms_and_flips_under_negation(
        scores in prop::collection::vec(-5.0f64..5.0, 4..60),
        seed in any::<u64>(),
    ) {
        let mut rng = RngState::new(seed);
        let mut labels: Vec<usize> = scores.iter().map(|_| rng.below(2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let base = auc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (s / 3.0).tanh() * 7.0 + 1.0).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
        prop_assert_eq!(auc(&squashed, &labels).unwrap(), base);
        prop_assert_eq!(auc(&cubed, &labels).unwrap(), base);
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc(&negated, &labels).unwrap() - (1.0 - base)).abs() <= 1e-12);
    }

    #[test]
    fn accuracy_is_one_minus_error_rate(
        pred in prop::collection::vec(0usize..2, 1..200),
        seed in any::<u64>(),
    ) {
        let mut rng = RngState::new(seed);
        let truth: Vec<usize> = pred.iter().map(|_| rng.below(2)).collect();
        let cm = confusion(&pred, &truth).unwrap();
        prop_assert_eq!(cm.total(), pred.len() as u64);
        prop_assert!((cm.accuracy() - (1.0 - (cm.fp + cm.fn_) as f64 / cm.total() as f64)).abs() <= 1e-15);
    }

    #[test]
    fn normal_approximation_tracks_exact_at_twenty_five(seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let diffs: Vec<f64> = (0..25).map(|_| rng.normal(0.3, 1.0)).filter(|d| *d != 0.0).collect();
        prop_assume!(diffs.len() == 25);
        let exact = wilcoxon_with(&diffs, 0.05, PValueMethod::Exact).unwrap();
        let normal = wilcoxon_with(&diffs, 0.05, PValueMethod::Normal).unwrap();
        prop_assert!((exact.p_value - normal.p_value).abs() <= 0.01, "{} vs {}", exact.p_value, normal.p_value);
    }

    #[test]
    fn wilcoxon_is_antisymmetric(diffs in prop::collection::vec(-1.0f64..1.0, 2..20)) {
        prop_assume!(diffs.iter().any(|d| d.abs() > 1e-9));
        let flipped: Vec<f64> = diffs.iter().map(|d| -d).collect();
        let (a, b) = (
            wilcoxon_with(&diffs, 0.05, PValueMethod::Auto).unwrap(),
            wilcoxon_with(&flipped, 0.05, PValueMethod::Auto).unwrap(),
        );
        prop_assert_eq!(a.w_plus, b.w_minus);
        prop_assert_eq!(a.p_value, b.p_value);
        prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }

    #[test]
    fn sampler_draw_shares_match_closed_form(n0 in 1usize..50, n1 in 1usize..50, seed in any::<u64>()) {
        let labels: Vec<usize> = std::iter::repeat_n(0, n0).chain(std::iter::repeat_n(1, n1)).collect();
        let w = compute_class_weights(&[n0 as u64, n1 as u64]).unwrap();
        let draws = weighted_sampler(&labels, &w, 100_000, &mut RngState::new(seed)).unwrap();
        let share = draws.iter().filter(|&&i| labels[i] == 1).count() as f64 / 1e5;
        let expected = n1 as f64 * w.weights[1] / (n0 as f64 * w.weights[0] + n1 as f64 * w.weights[1]);
        prop_assert!((share - expected).abs() <= 0.02);
    }
}

/// Reorders the head's model-indexed parameters so that model slot `i`
/// of the result is slot `perm[i]` of `head`.
fn permute_head(head: &MaseHead, perm: &[usize]) -> MaseHead {
    let (m, c) = (head.num_models(), head.classes);
    let mut out = head.clone();
    out.models = perm.iter().map(|&p| head.models[p].clone()).collect();
    for layer in [&head.model_attention.hidden, &head.class_attention.hidden] {
        let w = head.store.get(layer.weight);
        let hidden = w.shape()[0];
        let dst = out.store.get_mut(layer.weight).data_mut();
        for h in 0..hidden {
            for (i, &p) in perm.iter().enumerate() {
                for k in 0..c {
                    dst[h * m * c + i * c + k] = w.data()[h * m * c + p * c + k];
                }
            }
        }
    }
    let out_layer = &head.model_attention.out;
    let w = head.store.get(out_layer.weight).clone();
    let b = head.store.get(out_layer.bias).clone();
    let width = w.shape()[1];
    for (i, &p) in perm.iter().enumerate() {
        out.store.get_mut(out_layer.weight).data_mut()[i * width..(i + 1) * width]
            .copy_from_slice(&w.data()[p * width..(p + 1) * width]);
        out.store.get_mut(out_layer.bias).data_mut()[i] = b.data()[p];
    }
    out
}

#[test]
fn fusion_is_equivariant_to_model_order() {
    let mut rng = RngState::new(21);
    let names: Vec<String> = ["dense", "eff", "vit", "extra"].map(String::from).to_vec();
    let head = MaseHead::new(names.clone(), 2, &mut rng).unwrap();
    let batch = 64;
    let data: Vec<f64> = (0..batch * 8).map(|_| rng.normal(0.0, 3.0)).collect();
    let stacked = StackedLogits::new(names.clone(), Tensor::new(vec![batch, 4, 2], data).unwrap()).unwrap();
    let reference = fuse(&stacked, &head, &mut ForwardCtx::eval()).unwrap();
    for perm in [[1, 0, 2, 3], [3, 2, 1, 0], [2, 3, 0, 1]] {
        let permuted_head = permute_head(&head, &perm);
        let per_model: Vec<Tensor> = perm.iter().map(|&p| stacked.model_logits(p)).collect();
        let permuted = StackedLogits::from_model_logits(permuted_head.models.clone(), &per_model).unwrap();
        let out = fuse(&permuted, &permuted_head, &mut ForwardCtx::eval()).unwrap();
        let gap = out.data().iter().zip(reference.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-12, "permutation {perm:?}: gap {gap:e}");
    }
}

#[test]
fn attention_rows_are_distributions_in_train_mode() {
    let mut rng = RngState::new(22);
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let head = MaseHead::new(names.clone(), 2, &mut rng).unwrap();
    let data: Vec<f64> = (0..500 * 6).map(|_| rng.normal(0.0, 5.0)).collect();
    let stacked = StackedLogits::new(names, Tensor::new(vec![500, 3, 2], data).unwrap()).unwrap();
    let trace = head.trace(&stacked, &mut ForwardCtx::train(7)).unwrap();
    for w in [&trace.model_weights, &trace.class_weights] {
        for i in 0..w.rows() {
            assert!(w.row(i).iter().all(|v| *v >= 0.0));
            assert!((w.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn logit_sets_keep_model_order_through_stacking() {
    let records = (0..5)
        .map(|i| LogitRecord {
            id: format!("s{i}"),
            label: (i % 2) as u8,
            logits: [("b", vec![i as f64, 0.0]), ("a", vec![0.0, i as f64])]
                .into_iter()
                .map(|(n, v)| (n.to_string(), v))
                .collect(),
        })
        .collect();
    let set = LogitSet::from_records(records).unwrap();
    let stacked = StackedLogits::from_logit_set(&set).unwrap();
    assert_eq!(stacked.models, ["b", "a"]);
    assert_eq!(stacked.logits(3, 0), &[3.0, 0.0]);
    assert_eq!(stacked.logits(3, 1), &[0.0, 3.0]);
}
