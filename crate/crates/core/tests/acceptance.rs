//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so every line is printed and a failure does not hide the rest.

use std::path::Path;
use std::time::Instant;

use mase::autodiff::{ParamStore, RngState, Tape, Tensor, Var};
use mase::cli::commands::{evaluate_base, evaluate_head};
use mase::cli::{gradcheck_suite, run_study, Checkpoint, RunConfig, ENSEMBLE_NAME, GRADCHECK_TOLERANCE};
use mase::data::{complementary_logits, read_dataset, read_logits, weighted_sampler, ComplementaryConfig, Patch, TtaConfig, TtaTransform};
use mase::ensemble::{class_attention, default_head_config, fuse, model_attention, tta_logits, train_ensemble, MaseHead, StackedLogits};
use mase::eval::{auc, bonferroni, metrics_from_logits, wilcoxon_with, PValueMethod};
use mase::layers::{predict_logits, BaseModel, ForwardCtx, LinearLayer, Model, TrunkPreset};
use mase::loss::{compute_class_weights, focal_loss, focal_term, one_hot, FocalConfig};
use mase::optim::{accumulate_and_step, AdamWConfig, AdamWState, CosineRestartSchedule};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn class_weights() -> Check {
    let w = compute_class_weights(&[4342, 845]).map_err(|e| e.to_string())?;
    let shown: Vec<String> = w.weights.iter().map(|x| format!("{x:.4}")).collect();
    ensure(shown == ["0.3258", "1.6742"], format!("weights {shown:?}"))
}

/// Mean `−ln softmax(z)_y`, computed without the tape.
fn cross_entropy(logits: &[[f64; 2]], labels: &[usize]) -> f64 {
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(z, &y)| {
            let m = z[0].max(z[1]);
            let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
            lse - z[y]
        })
        .sum();
    total / labels.len() as f64
}

fn focal_reduction() -> Check {
    let mut rng = RngState::new(11);
    let plain = FocalConfig::new(0.0, vec![1.0, 1.0]).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let b = 1 + rng.below(32);
        let z: Vec<[f64; 2]> = (0..b).map(|_| [rng.normal(0.0, 3.0), rng.normal(0.0, 3.0)]).collect();
        let y: Vec<usize> = (0..b).map(|_| rng.below(2)).collect();
        let mut tape = Tape::new();
        let zv = tape.leaf(Tensor::new(vec![b, 2], z.iter().flatten().copied().collect()).unwrap());
        let loss = focal_loss(&mut tape, zv, &one_hot(&y, 2).unwrap(), &plain).map_err(|e| e.to_string())?;
        worst = worst.max((tape.value(loss).item() - cross_entropy(&z, &y)).abs());
    }
    let dominated = (1..1000).all(|k| {
        let p = k as f64 / 1000.0;
        focal_term(p, 1.0, 2.0) <= focal_term(p, 1.0, 0.0)
    });
    ensure(
        worst < 1e-12 && dominated,
        format!("max |focal(γ=0) − CE| = {worst:.2e} over 1000 batches; focal(γ=2) ≤ focal(γ=0) on (0,1): {dominated}"),
    )
}

fn gradient_suite() -> Check {
    let entries = gradcheck_suite(0).map_err(|e| e.to_string())?;
    let worst = entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max);
    let failed: Vec<&str> = entries.iter().filter(|e| !e.passed).map(|e| e.component.as_str()).collect();
    ensure(
        failed.is_empty() && worst < GRADCHECK_TOLERANCE,
        format!("{} components, max rel error {worst:.2e}, failed {failed:?}", entries.len()),
    )
}

fn attention_normalization() -> Check {
    let mut rng = RngState::new(12);
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let mut worst: f64 = 0.0;
    let mut negative = 0usize;
    for _ in 0..10 {
        let mut head = MaseHead::new(names.clone(), 2, &mut rng).map_err(|e| e.to_string())?;
        for t in head.params_mut().tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.normal(0.0, 2.0));
        }
        let scale = rng.uniform_range(0.1, 20.0);
        let data = (0..1000 * 6).map(|_| rng.normal(0.0, scale)).collect();
        let stacked = StackedLogits::new(names.clone(), Tensor::new(vec![1000, 3, 2], data).unwrap()).unwrap();
        for w in [
            model_attention(&stacked, &head, &mut ForwardCtx::eval()).map_err(|e| e.to_string())?,
            class_attention(&stacked, &head, &mut ForwardCtx::eval()).map_err(|e| e.to_string())?,
        ] {
            for i in 0..w.rows() {
                let row = w.row(i);
                negative += row.iter().filter(|v| **v < 0.0).count();
                worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    ensure(
        negative == 0 && worst <= 1e-9,
        format!("10^4 inputs: {negative} negative weights, max |row sum − 1| = {worst:.2e}"),
    )
}

/// `logits = x·Wᵀ + b` with hand-set weights on 2×2 patches.
struct HandLinear {
    store: ParamStore,
    layer: LinearLayer,
}

impl Model for HandLinear {
    fn params(&self) -> &ParamStore {
        &self.store
    }
    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
    fn input_width(&self) -> usize {
        4
    }
    fn classes(&self) -> usize {
        2
    }
    fn forward(&self, tape: &mut Tape<'_>, x: Var, _: &mut ForwardCtx) -> mase::Result<Var> {
        self.layer.forward(tape, x)
    }
}

fn tta_identity() -> Check {
    let mut rng = RngState::new(13);
    let model = BaseModel::new(TrunkPreset::DenseToy, 6, 6, 2, &mut rng);
    let patches: Vec<Patch> = (0..50)
        .map(|_| Patch::new(6, 6, (0..36).map(|_| rng.uniform()).collect()).unwrap())
        .collect();
    let flat = Tensor::new(vec![50, 36], patches.iter().flat_map(|p| p.pixels.clone()).collect()).unwrap();
    let plain = predict_logits(&model, &flat).map_err(|e| e.to_string())?;
    let tta = tta_logits(&model, &patches, &TtaConfig::identity_only()).map_err(|e| e.to_string())?;
    let identity_gap = plain.data().iter().zip(tta.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut store = ParamStore::new();
    let layer = LinearLayer::new(&mut store, "l", 4, 2, &mut rng);
    *store.get_mut(layer.weight) = Tensor::new(vec![2, 4], vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0]).unwrap();
    *store.get_mut(layer.bias) = Tensor::vector(vec![0.5, -0.5]);
    let hand = HandLinear { store, layer };
    let p = Patch::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let two = TtaConfig {
        transforms: vec![TtaTransform::HFlip, TtaTransform::VFlip],
    };
    let got = tta_logits(&hand, &[p], &two).map_err(|e| e.to_string())?;
    // original [[.1,.2],[.3,.4]], hflip [[.2,.1],[.4,.3]], vflip [[.3,.4],[.1,.2]]
    let f = |v: [f64; 4]| [v[0] + 2.0 * v[1] + 0.5, v[2] - v[3] - 0.5];
    let views = [f([0.1, 0.2, 0.3, 0.4]), f([0.2, 0.1, 0.4, 0.3]), f([0.3, 0.4, 0.1, 0.2])];
    let hand_gap = (0..2)
        .map(|k| (got.data()[k] - (views[0][k] + views[1][k] + views[2][k]) / 3.0).abs())
        .fold(0.0, f64::max);
    ensure(
        identity_gap <= 1e-12 && hand_gap <= 1e-12,
        format!("identity-only gap {identity_gap:.2e}; two-transform hand case gap {hand_gap:.2e}"),
    )
}

fn gradient_accumulation() -> Check {
    let mut rng = RngState::new(14);
    let model = BaseModel::new(TrunkPreset::EffToy, 4, 4, 2, &mut rng);
    let x = Tensor::new(vec![8, 16], (0..128).map(|_| rng.uniform()).collect()).unwrap();
    let y = one_hot(&[0, 1, 1, 0, 0, 1, 0, 1], 2).unwrap();
    let half = |t: &Tensor, k: usize| {
        let w = t.last_dim();
        Tensor::new(vec![4, w], t.data()[k * 4 * w..(k + 1) * 4 * w].to_vec()).unwrap()
    };
    let focal = FocalConfig::default();
    let step = |batches: &[(Tensor, Tensor)]| -> mase::Result<BaseModel> {
        let mut m = model.clone();
        let mut opt = AdamWState::new(m.params(), AdamWConfig::default());
        accumulate_and_step(&mut m, &mut opt, batches, &focal, 5e-4, 99)?;
        Ok(m)
    };
    let full = step(&[(x.clone(), y.clone())]).map_err(|e| e.to_string())?;
    let split = step(&[(half(&x, 0), half(&y, 0)), (half(&x, 1), half(&y, 1))]).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for ((_, before), ((_, a), (_, b))) in model.params().iter().zip(full.params().iter().zip(split.params().iter())) {
        for ((p0, pa), pb) in before.data().iter().zip(a.data()).zip(b.data()) {
            worst = worst.max(((pa - p0) - (pb - p0)).abs());
        }
    }
    ensure(worst <= 1e-12, format!("max parameter-delta gap {worst:.2e} (dropout active, fixed masks)"))
}

fn scheduler() -> Check {
    let s = CosineRestartSchedule::default();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let restarts = s.restart_epochs(150);
    let ok = close(s.lr(0), 5e-4)
        && close(s.lr(5), 2.505e-4)
        && restarts == [10, 30, 70, 150]
        && restarts.iter().all(|&e| close(s.lr(e), 5e-4))
        && s.min_lr == 1e-6
        && (0..400).all(|e| s.lr(e) >= 1e-6);
    ensure(
        ok,
        format!("lr(0)={:e} lr(5)={:e} restarts {restarts:?} floor {:e}", s.lr(0), s.lr(5), s.min_lr),
    )
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
fn pairwise_auc(scores: &[f64], labels: &[usize]) -> f64 {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] == 0 {
                pairs += 1;
                twice_wins += if si > sj { 2 } else { u64::from(si == sj) };
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

fn auc_oracle() -> Check {
    let mut rng = RngState::new(15);
    let mut mismatches = 0;
    for k in 0..1000 {
        let n = 2 + rng.below(199);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.below(2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let coarse = k % 2 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.below(8) as f64 / 8.0 } else { rng.uniform() })
            .collect();
        let fast = auc(&scores, &labels).map_err(|e| e.to_string())?;
        if fast != pairwise_auc(&scores, &labels) {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, format!("{mismatches} mismatches on 1000 instances, half with heavy ties"))
}

/// Two-sided p by listing every sign assignment of the observed |d| ranks.
fn enumerated_p(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let twice_rank: Vec<u64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as u64;
            let equal = abs.iter().filter(|b| *b == a).count() as u64;
            2 * below + equal + 1
        })
        .collect();
    let total: u64 = twice_rank.iter().sum();
    let w_plus: u64 = diffs.iter().zip(&twice_rank).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let observed = w_plus.min(total - w_plus);
    let hits = (0u32..1 << n)
        .filter(|mask| {
            let s: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| twice_rank[i]).sum();
            s.min(total - s) <= observed
        })
        .count();
    hits as f64 / f64::from(1u32 << n)
}

fn wilcoxon() -> Check {
    let mut rng = RngState::new(16);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=12 {
        for _ in 0..40 {
            let diffs: Vec<f64> = (0..n)
                .map(|_| {
                    let m = (1 + rng.below(5)) as f64 * 0.01;
                    if rng.bernoulli(0.5) {
                        m
                    } else {
                        -m
                    }
                })
                .collect();
            let r = wilcoxon_with(&diffs, 0.05, PValueMethod::Exact).map_err(|e| e.to_string())?;
            worst = worst.max((r.p_value - enumerated_p(&diffs)).abs());
            cases += 1;
        }
    }
    let five = wilcoxon_with(&[0.01, 0.02, 0.03, 0.04, 0.05], 0.05, PValueMethod::Exact).map_err(|e| e.to_string())?;
    let bonf = bonferroni(&[0.01, 0.02, 0.03], 0.05).map_err(|e| e.to_string())?;
    let ok = worst <= 1e-12 && (five.p_value - 0.0625).abs() <= 1e-12 && format!("{:.4}", bonf.threshold) == "0.0167";
    ensure(
        ok,
        format!(
            "{cases} tied cases n ≤ 12, max |exact − enumerated| {worst:.2e}; n=5 all positive p={}; k=3 threshold {:.4}",
            five.p_value, bonf.threshold
        ),
    )
}

fn sampler() -> Check {
    let labels: Vec<usize> = std::iter::repeat_n(0, 4342).chain(std::iter::repeat_n(1, 845)).collect();
    let w = compute_class_weights(&[4342, 845]).map_err(|e| e.to_string())?;
    let draws = weighted_sampler(&labels, &w, 100_000, &mut RngState::new(17)).map_err(|e| e.to_string())?;
    let share = draws.iter().filter(|&&i| labels[i] == 1).count() as f64 / 1e5;
    ensure((0.48..=0.52).contains(&share), format!("malignant share {share:.4} over 10^5 draws"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn end_to_end() -> Vec<(&'static str, Check)> {
    let mut cfg = RunConfig::desk_scale();
    cfg.study.seeds = 20;
    let shape = format!("splits {:?}/{:?}/{:?}", cfg.data.train, cfg.data.val, cfg.data.test);
    let outcome = match run_study(&cfg, None) {
        Ok(o) => o,
        Err(e) => {
            let msg = format!("study failed: {e}");
            return vec![("end-to-end (a)", Err(msg.clone())), ("end-to-end (c)", Err(msg))];
        }
    };

    let first = &outcome.records[..10];
    let ens = median(first.iter().map(|r| r.accuracy[ENSEMBLE_NAME]).collect());
    let best = median(
        first
            .iter()
            .map(|r| r.accuracy.iter().filter(|(m, _)| *m != ENSEMBLE_NAME).map(|(_, a)| *a).fold(0.0, f64::max))
            .collect(),
    );
    let a = ensure(
        ens >= best,
        format!("{shape}; median over 10 seeds: ensemble {:.4}, best single base {:.4}", ens, best),
    );

    let weakest = outcome
        .summary
        .models
        .iter()
        .filter(|m| m.model != ENSEMBLE_NAME)
        .min_by(|x, y| x.accuracy_mean.total_cmp(&y.accuracy_mean))
        .map(|m| m.model.clone())
        .unwrap_or_default();
    let p = outcome
        .summary
        .significance
        .as_ref()
        .and_then(|s| s.comparisons.iter().find(|c| c.baseline == weakest))
        .and_then(|c| c.test.as_ref())
        .map_or(1.0, |t| t.p_value);
    let c = ensure(p < 0.0167, format!("20 paired runs, ensemble vs weakest base {weakest}: p = {p:.2e}"));
    vec![("end-to-end (a) median ensemble ≥ median best base", a), ("end-to-end (c) Wilcoxon vs weakest base", c)]
}

fn complementary() -> Check {
    let [train, val, test] = complementary_logits(&ComplementaryConfig::default()).map_err(|e| e.to_string())?;
    let mut cfg = default_head_config();
    cfg.max_epochs = 60;
    cfg.seed = 3;
    let (head, _) = train_ensemble(&train, &val, &cfg, 4).map_err(|e| e.to_string())?;
    let stacked = StackedLogits::from_logit_set(&test).map_err(|e| e.to_string())?;
    let y = test.labels();
    let fused = fuse(&stacked, &head, &mut ForwardCtx::eval()).map_err(|e| e.to_string())?;
    let ens = metrics_from_logits(&fused, &y).map_err(|e| e.to_string())?.accuracy;
    let bases: Vec<f64> = (0..stacked.num_models())
        .map(|m| metrics_from_logits(&stacked.model_logits(m), &y).map(|r| r.accuracy))
        .collect::<mase::Result<_>>()
        .map_err(|e| e.to_string())?;
    let margin = bases.iter().map(|b| ens - b).fold(f64::INFINITY, f64::min);
    ensure(
        margin >= 0.02,
        format!("ensemble {ens:.4}, bases {bases:.4?}, smallest margin {:.1} points", 100.0 * margin),
    )
}

fn cli(args: &[&str]) -> i32 {
    mase::cli::run(std::iter::once("mase").chain(args.iter().copied()))
}

/// Every command in a fixed order, writing into `dir`.
fn pipeline(dir: &Path) -> Result<(), String> {
    let d = |p: &str| dir.join(p).to_string_lossy().into_owned();
    std::fs::write(
        dir.join("cfg.toml"),
        "[data]\ntrain = [120, 40]\nval = [40, 16]\ntest = [40, 16]\nheight = 6\nwidth = 6\nseparation = 2.0\n\
         [base]\nmax_epochs = 3\n[head]\nmax_epochs = 3\n[study]\nseeds = 2\ntrunks = [\"densetoy\", \"vittoy\"]\n",
    )
    .map_err(|e| e.to_string())?;
    let cfg = d("cfg.toml");
    let steps: Vec<Vec<String>> = vec![
        vec!["gen-data".into(), "--config".into(), cfg.clone(), "--seed".into(), "5".into(), "--out".into(), d("data")],
        vec!["train-base".into(), "--config".into(), cfg.clone(), "--trunk".into(), "densetoy".into(), "--data".into(), d("data"), "--out".into(), d("models"), "--seed".into(), "5".into()],
        vec!["train-base".into(), "--config".into(), cfg.clone(), "--trunk".into(), "vittoy".into(), "--data".into(), d("data"), "--out".into(), d("models"), "--seed".into(), "5".into()],
        vec!["export-logits".into(), "--checkpoint".into(), d("models/densetoy.json"), "--checkpoint".into(), d("models/vittoy.json"), "--data".into(), d("data/train.jsonl"), "--out".into(), d("train.logits.jsonl"), "--tta".into()],
        vec!["export-logits".into(), "--checkpoint".into(), d("models/densetoy.json"), "--checkpoint".into(), d("models/vittoy.json"), "--data".into(), d("data/val.jsonl"), "--out".into(), d("val.logits.jsonl"), "--tta".into()],
        vec!["export-logits".into(), "--checkpoint".into(), d("models/densetoy.json"), "--checkpoint".into(), d("models/vittoy.json"), "--data".into(), d("data/test.jsonl"), "--out".into(), d("test.logits.jsonl"), "--tta".into()],
        vec!["train-ensemble".into(), "--config".into(), cfg.clone(), "--train-logits".into(), d("train.logits.jsonl"), "--val-logits".into(), d("val.logits.jsonl"), "--out".into(), d("head"), "--seed".into(), "5".into()],
        vec!["evaluate".into(), "--checkpoint".into(), d("head/head.json"), "--logits".into(), d("test.logits.jsonl"), "--out".into(), d("eval.json"), "--roc-out".into(), d("roc.csv")],
        vec!["study".into(), "--config".into(), cfg.clone(), "--seed".into(), "5".into(), "--out".into(), d("study")],
        vec!["significance".into(), "--results".into(), d("study/results.jsonl"), "--out".into(), d("sig.json")],
        vec!["gradcheck".into(), "--seed".into(), "5".into(), "--out".into(), d("gradcheck.json")],
    ];
    for s in &steps {
        let args: Vec<&str> = s.iter().map(String::as_str).collect();
        let code = cli(&args);
        if code != 0 {
            return Err(format!("`{}` exited {code}", s[0]));
        }
    }
    Ok(())
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (fa, fb) = (files(a.path()), files(b.path()));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    if fa.len() != fb.len() || !differing.is_empty() {
        return Err(format!("{} vs {} files, differing {differing:?}", fa.len(), fb.len()));
    }

    let dir = a.path();
    let test_logits = read_logits(dir.join("test.logits.jsonl")).map_err(|e| e.to_string())?;
    let test = read_dataset(dir.join("data/test.jsonl")).map_err(|e| e.to_string())?;
    let head = Checkpoint::load(dir.join("head/head.json")).map_err(|e| e.to_string())?;
    let head_again = Checkpoint::from_json(&head.to_json()).map_err(|e| e.to_string())?;
    let base = Checkpoint::load(dir.join("models/densetoy.json")).map_err(|e| e.to_string())?;
    let base_again = Checkpoint::from_json(&base.to_json()).map_err(|e| e.to_string())?;
    let same_head = evaluate_head(&head, &test_logits).map_err(|e| e.to_string())?
        == evaluate_head(&head_again, &test_logits).map_err(|e| e.to_string())?;
    let tta = TtaConfig::default();
    let same_base = evaluate_base(base.as_base().unwrap(), &test, Some(&tta)).map_err(|e| e.to_string())?
        == evaluate_base(base_again.as_base().unwrap(), &test, Some(&tta)).map_err(|e| e.to_string())?;
    ensure(
        same_head && same_base && head == head_again && base == base_again,
        format!("{} output files identical across two runs of all 8 commands; checkpoint round trip preserves metrics", fa.len()),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("class weights", class_weights),
        ("focal loss reduction", focal_reduction),
        ("gradient suite", gradient_suite),
        ("attention normalization", attention_normalization),
        ("TTA identity and hand case", tta_identity),
        ("gradient accumulation", gradient_accumulation),
        ("scheduler", scheduler),
        ("AUC oracle", auc_oracle),
        ("Wilcoxon exact and Bonferroni", wilcoxon),
        ("sampler share", sampler),
        ("end-to-end (b) complementary errors", complementary),
        ("determinism and checkpoint round trip", determinism),
    ];
    let mut failures = 0;
    let mut report = |name: &str, result: Check, secs: f64| {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    };
    for (name, check) in criteria {
        let t = Instant::now();
        let result = check();
        report(name, result, t.elapsed().as_secs_f64());
    }
    let t = Instant::now();
    let study = end_to_end();
    let secs = t.elapsed().as_secs_f64();
    for (name, result) in study {
        report(name, result, secs);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
