//! Acceptance gate: runs each acceptance criterion in turn and prints one
//! PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treeattn::attention::{attend, AttentionParams};
use treeattn::classifier::{classify, featurize_pair, MlpParams};
use treeattn::embedding_io::EmbeddingMatrix;
use treeattn::model::{Example, Model, ModelConfig, TaskKind};
use treeattn::parser::{
    compose, gumbel_noise, induce_tree, leaf_transform, select_with_noise, CompositionParams, GumbelConfig, LeafKind,
    LeafParams, NodeState, QueryVector, SelectMode, Selector,
};
use treeattn::synthetic::{subset_task, SubsetTaskConfig};
use treeattn::tensor::{check_store_gradients, Binder, ParamId, ParamStore, Tape, Tensor, Var};
use treeattn::trainer::{evaluate, mean_loss, train, RunOptions, TrainConfig};
use treeattn::tree::BinaryTree;
use treeattn::tree_metrics::{macro_avg_depth, score_corpus, unlabeled_f1, ScoreOptions};

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("gradient fidelity", gradient_fidelity),
        ("straight-through contract", straight_through_contract),
        ("tree validity", tree_validity),
        ("attention normalization", attention_normalization),
        ("toy-task learning", toy_task_learning),
        ("tree-metrics oracle", tree_metrics_oracle),
        ("branching-baseline sanity", branching_baselines),
        ("determinism", determinism),
        ("loss baseline", loss_baseline),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} ({name}): PASS [{detail}; {secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{detail}; {secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: treeattn::Error) -> String {
    e.to_string()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Values in ±[0.1, 1], away from the kinks of abs and ReLU.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

// 1 ------------------------------------------------------------------------

type OpCase = (&'static str, Box<dyn Fn(&mut Tape, &[Var]) -> treeattn::Result<Var>>);

fn tape_op_cases() -> Vec<OpCase> {
    vec![
        ("matvec", Box::new(|t: &mut Tape, v: &[Var]| t.matvec(v[2], v[0]))),
        ("matmul", Box::new(|t: &mut Tape, v: &[Var]| t.matmul(v[2], v[3]))),
        ("add", Box::new(|t: &mut Tape, v: &[Var]| t.add(v[0], v[1]))),
        ("sub", Box::new(|t: &mut Tape, v: &[Var]| t.sub(v[0], v[1]))),
        ("mul", Box::new(|t: &mut Tape, v: &[Var]| t.mul(v[0], v[1]))),
        ("abs", Box::new(|t: &mut Tape, v: &[Var]| t.abs(v[0]))),
        ("sigmoid", Box::new(|t: &mut Tape, v: &[Var]| t.sigmoid(v[0]))),
        ("tanh", Box::new(|t: &mut Tape, v: &[Var]| t.tanh(v[0]))),
        ("relu", Box::new(|t: &mut Tape, v: &[Var]| t.relu(v[0]))),
        ("exp", Box::new(|t: &mut Tape, v: &[Var]| t.exp(v[0]))),
        ("log", Box::new(|t: &mut Tape, v: &[Var]| t.log(v[4]))),
        ("scale", Box::new(|t: &mut Tape, v: &[Var]| t.scale(v[0], -1.7))),
        ("softmax", Box::new(|t: &mut Tape, v: &[Var]| t.softmax(v[0]))),
        ("log_softmax", Box::new(|t: &mut Tape, v: &[Var]| t.log_softmax(v[0]))),
        ("concat", Box::new(|t: &mut Tape, v: &[Var]| t.concat(&[v[0], v[1], v[0]]))),
        ("weighted_sum", Box::new(|t: &mut Tape, v: &[Var]| {
            let w = t.slice(v[1], 0, 3)?;
            t.weighted_sum(&[v[0], v[1], v[4]], w)
        })),
        ("dot", Box::new(|t: &mut Tape, v: &[Var]| t.dot(v[0], v[1]))),
        ("sum", Box::new(|t: &mut Tape, v: &[Var]| t.sum(v[0]))),
        ("mean", Box::new(|t: &mut Tape, v: &[Var]| t.mean(v[1]))),
        ("cross_entropy", Box::new(|t: &mut Tape, v: &[Var]| t.cross_entropy(v[0], 3))),
        ("slice", Box::new(|t: &mut Tape, v: &[Var]| t.slice(v[0], 1, 3))),
        ("row", Box::new(|t: &mut Tape, v: &[Var]| t.row(v[2], 2))),
    ]
}

fn per_op_max_error() -> Result<(f64, &'static str), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = vec![
        store.add("a", Tensor::vector(away_from_zero(&mut rng, 5)).unwrap()),
        store.add("b", Tensor::vector(away_from_zero(&mut rng, 5)).unwrap()),
        store.add("m", Tensor::matrix(4, 5, random_vec(&mut rng, 20, -1.0, 1.0)).unwrap()),
        store.add("n", Tensor::matrix(5, 3, random_vec(&mut rng, 15, -1.0, 1.0)).unwrap()),
        store.add("p", Tensor::vector(random_vec(&mut rng, 5, 0.5, 2.0)).unwrap()),
    ];
    let mut worst = (0.0, "none");
    for (name, op) in tape_op_cases() {
        let readout = random_vec(&mut rng, 64, -1.0, 1.0);
        let report = check_store_gradients(
            &store,
            |tape, binder| {
                let vars: Vec<Var> = ids.iter().map(|&id| binder.var(tape, id)).collect();
                let out = op(tape, &vars)?;
                let n = tape.value(out).len();
                let flat = if tape.shape(out).len() == 2 {
                    let rows: Vec<Var> = (0..tape.shape(out)[0])
                        .map(|r| tape.row(out, r))
                        .collect::<treeattn::Result<_>>()?;
                    tape.concat(&rows)?
                } else {
                    out
                };
                let w = tape.constant_vec(readout[..n].to_vec())?;
                tape.dot(flat, w)
            },
            1e-6,
        )
        .map_err(err)?;
        if report.max_relative_error > worst.0 {
            worst = (report.max_relative_error, name);
        }
    }

    // cells built from several ops
    let hidden = 4;
    let mut cell_store = ParamStore::new();
    let leaf = LeafParams::new(&mut cell_store, &mut rng, LeafKind::Rnn, 3, hidden);
    let comp = CompositionParams::new(&mut cell_store, &mut rng, hidden);
    let attn = AttentionParams::new(&mut cell_store, &mut rng, hidden, 3);
    let mlp = MlpParams::new(&mut cell_store, &mut rng, 4 * hidden, 6, 3);
    let words: Vec<ParamId> = (0..3)
        .map(|i| cell_store.add(format!("x{i}"), Tensor::vector(random_vec(&mut rng, 3, -1.0, 1.0)).unwrap()))
        .collect();
    let report = check_store_gradients(
        &cell_store,
        |tape, binder| {
            let xs: Vec<Var> = words.iter().map(|&id| binder.var(tape, id)).collect();
            let leaves = leaf_transform(tape, binder, &xs, &leaf, hidden)?;
            let parent = compose(tape, binder, leaves[0], leaves[1], &comp)?;
            let top = compose(tape, binder, parent, leaves[2], &comp)?;
            let hs = [leaves[0].h, leaves[1].h, leaves[2].h, parent.h, top.h];
            let pooled = attend(tape, binder, &hs, &attn)?;
            let f = featurize_pair(tape, pooled.sentence, top.c)?;
            let logits = classify(tape, binder, f, &mlp, None)?;
            tape.cross_entropy(logits, 1)
        },
        1e-6,
    )
    .map_err(err)?;
    if report.max_relative_error > worst.0 {
        worst = (report.max_relative_error, "leaf/compose/attend/classify");
    }
    Ok(worst)
}

fn gradient_fidelity() -> Result<String, String> {
    let started = Instant::now();
    let (op_err, op_name) = per_op_max_error()?;
    ensure(op_err < 1e-6, || format!("per-op max relative error {op_err:.2e} ({op_name}) >= 1e-6"))?;

    let config = ModelConfig {
        task: TaskKind::Pair,
        word_dim: 5,
        hidden: 8,
        attn_dim: 6,
        clf_dim: 12,
        num_classes: 3,
        leaf: LeafKind::Rnn,
        finetune_embeddings: true,
    };
    let emb = EmbeddingMatrix::random(10, 5, 1.0, 3).map_err(err)?;
    let model = Model::new(config, &emb, 17).map_err(err)?;
    let example = Example {
        sentences: vec![vec![2, 5, 7], vec![3, 7, 9, 4]],
        label: 2,
    };
    let report = model
        .gradient_check(&example, GumbelConfig::default(), 0.87, 23, 1e-6)
        .map_err(err)?;
    let elapsed = started.elapsed();
    ensure(report.max_relative_error < 1e-4, || {
        format!("full-model max relative error {:.2e}, worst {:?}", report.max_relative_error, report.worst)
    })?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "full model {:.2e} over {} coordinates, per-op {:.2e}",
        report.max_relative_error, report.coordinates, op_err
    ))
}

// 2 ------------------------------------------------------------------------

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `c · softmax((log_softmax(l) + g) / τ)`, evaluated directly.
fn relaxed_objective(logits: &[f64], noise: &[f64], tau: f64, c: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    let z: Vec<f64> = logits.iter().zip(noise).map(|(l, g)| (l - lse + g) / tau).collect();
    softmax(&z).iter().zip(c).map(|(y, c)| y * c).sum()
}

fn straight_through_contract() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for instance in 0..100 {
        let m = rng.gen_range(2..=8);
        let logits = random_vec(&mut rng, m, -3.0, 3.0);
        let noise = gumbel_noise(m, &mut rng);
        let tau = rng.gen_range(0.3..2.0);
        let c = random_vec(&mut rng, m, -1.0, 1.0);
        let config = GumbelConfig {
            temperature: tau,
            ..GumbelConfig::default()
        };

        let mut tape = Tape::new();
        let l = tape.param(&Tensor::vector(logits.clone()).unwrap());
        let base = tape.log_softmax(l).map_err(err)?;
        let sel = select_with_noise(&mut tape, base, &config, &noise, None).map_err(err)?;
        let weights = sel.weights.ok_or("train mode must return weights")?;
        let forward = tape.value(weights).to_vec();
        let ones = forward.iter().filter(|&&w| w == 1.0).count();
        let zeros = forward.iter().filter(|&&w| w == 0.0).count();
        ensure(ones == 1 && zeros == m - 1 && forward[sel.index] == 1.0, || {
            format!("instance {instance}: forward {forward:?} is not one-hot")
        })?;
        let perturbed: Vec<f64> = {
            let ls = relaxed_objective_base(&logits);
            ls.iter().zip(&noise).map(|(a, b)| a + b).collect()
        };
        let argmax = (0..m).fold(0, |b, i| if perturbed[i] > perturbed[b] { i } else { b });
        ensure(sel.index == argmax, || format!("instance {instance}: chose {} not {argmax}", sel.index))?;

        let cv = tape.constant_vec(c.clone()).map_err(err)?;
        let y = tape.dot(weights, cv).map_err(err)?;
        let grads = tape.backward(y).map_err(err)?;
        let analytic = grads.get(l).ok_or("no gradient reached the logits")?.to_vec();
        for k in 0..m {
            let h = 1e-6;
            let mut plus = logits.clone();
            plus[k] += h;
            let mut minus = logits.clone();
            minus[k] -= h;
            let numeric =
                (relaxed_objective(&plus, &noise, tau, &c) - relaxed_objective(&minus, &noise, tau, &c)) / (2.0 * h);
            let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    ensure(worst < 1e-6, || format!("max relative gradient error {worst:.2e}"))?;
    Ok(format!("100 instances one-hot, max relative gradient error {worst:.2e}"))
}

fn relaxed_objective_base(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

// 3 ------------------------------------------------------------------------

/// Spans of every internal node, built by direct simulation of the merges.
fn simulated_spans(n: usize, merges: &[usize]) -> Vec<(usize, usize)> {
    let mut current: Vec<(usize, usize)> = (0..n).map(|i| (i, i + 1)).collect();
    let mut out = Vec::new();
    for &p in merges {
        let span = (current[p].0, current[p + 1].1);
        current.splice(p..p + 2, [span]);
        out.push(span);
    }
    out
}

fn laminar(spans: &[(usize, usize)]) -> bool {
    spans.iter().all(|a| {
        spans
            .iter()
            .all(|b| a.1 <= b.0 || b.1 <= a.0 || (a.0 <= b.0 && b.1 <= a.1) || (b.0 <= a.0 && a.1 <= b.1))
    })
}

fn tree_validity() -> Result<String, String> {
    let hidden = 6;
    let mut init = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let leaf = LeafParams::new(&mut store, &mut init, LeafKind::Affine, 4, hidden);
    let comp = CompositionParams::new(&mut store, &mut init, hidden);
    let query = QueryVector::new(&mut store, &mut init, hidden);
    let mut checked = 0;
    for seed in 0..100u64 {
        for n in 1..=12usize {
            for mode in [SelectMode::Train, SelectMode::Infer] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 100 + n as u64);
                let mut tape = Tape::new();
                let mut binder = Binder::new(&store);
                let words: Vec<Var> = (0..n)
                    .map(|_| tape.constant_vec(random_vec(&mut rng, 4, -1.0, 1.0)).unwrap())
                    .collect();
                let leaves: Vec<NodeState> = leaf_transform(&mut tape, &mut binder, &words, &leaf, hidden).map_err(err)?;
                let mut selector = match mode {
                    SelectMode::Train => Selector::sampling(GumbelConfig::default(), &mut rng),
                    SelectMode::Infer => Selector::inference(),
                };
                let induced =
                    induce_tree(&mut tape, &mut binder, &leaves, &comp, &query, &mut selector).map_err(err)?;
                let tree = induced.tree;
                let ctx = || format!("seed {seed}, n {n}, {mode:?}");
                ensure(tree.leaf_count() == n && tree.merges().len() == n - 1, || format!("{}: wrong size", ctx()))?;
                ensure(tree.merges().iter().enumerate().all(|(t, &p)| p < n - 1 - t), || {
                    format!("{}: merge position out of range {:?}", ctx(), tree.merges())
                })?;
                ensure(induced.nodes.len() == 2 * n - 1, || format!("{}: {} node states", ctx(), induced.nodes.len()))?;
                let spans = simulated_spans(n, tree.merges());
                let distinct: BTreeSet<_> = spans.iter().collect();
                ensure(distinct.len() == n - 1 && laminar(&spans), || format!("{}: spans {spans:?}", ctx()))?;
                if n > 1 {
                    ensure(spans.last() == Some(&(0, n)), || format!("{}: root span {:?}", ctx(), spans.last()))?;
                }
                ensure(BinaryTree::new(n, tree.merges().to_vec()).is_ok(), || format!("{}: invariants", ctx()))?;

                let tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
                let labeled = tree.clone().with_tokens(tokens).map_err(err)?;
                let text = labeled.to_bracketed();
                let (back, binarized) = BinaryTree::parse_bracketed(&text).map_err(|e| format!("{}: {e}", ctx()))?;
                ensure(binarized == 0 && back == labeled.canonical() && back.same_structure(&labeled), || {
                    format!("{}: {text} did not round-trip", ctx())
                })?;
                ensure(back.to_bracketed() == text, || format!("{}: re-export differs", ctx()))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} induced trees valid and round-tripped"))
}

// 4 ------------------------------------------------------------------------

fn attention_normalization() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    let mut singles = 0;
    for instance in 0..1000 {
        let hidden = rng.gen_range(1..=12);
        let attn_dim = rng.gen_range(1..=10);
        let n = if instance % 10 == 0 { 1 } else { rng.gen_range(2..=23) };
        let scale = [0.1, 1.0, 10.0, 100.0][instance % 4];
        let mut store = ParamStore::new();
        let params = AttentionParams::new(&mut store, &mut rng, hidden, attn_dim);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        let hs: Vec<Var> = (0..n)
            .map(|_| tape.constant_vec(random_vec(&mut rng, hidden, -scale, scale)).unwrap())
            .collect();
        let out = attend(&mut tape, &mut binder, &hs, &params).map_err(err)?;
        let total: f64 = tape.value(out.weights).iter().sum();
        worst = worst.max((total - 1.0).abs());
        ensure((total - 1.0).abs() <= 1e-12, || format!("instance {instance}: weights sum to {total}"))?;
        if n == 1 {
            singles += 1;
            ensure(tape.value(out.sentence) == tape.value(hs[0]), || {
                format!("instance {instance}: single-node output differs from h_1")
            })?;
        }
    }
    Ok(format!("max |Σa - 1| = {worst:.1e}; {singles} single-node cases exact"))
}

// 5 ------------------------------------------------------------------------

fn toy_task_learning() -> Result<String, String> {
    let started = Instant::now();
    let task = subset_task(&SubsetTaskConfig {
        examples: 500,
        vocab_size: 50,
        min_len: 3,
        max_len: 8,
        seed: 7,
    })
    .map_err(err)?;
    let examples: Vec<Example> = task.examples().into_iter().map(Example::from).collect();
    let (train_set, validation) = examples.split_at(400);
    let held_out: Vec<Example> = subset_task(&SubsetTaskConfig {
        seed: 1007,
        ..Default::default()
    })
    .map_err(err)?
    .examples()
    .into_iter()
    .map(Example::from)
    .collect();

    let word_dim = 100;
    let model_config = ModelConfig {
        task: TaskKind::Pair,
        word_dim,
        hidden: 64,
        attn_dim: 128,
        clf_dim: 1024,
        num_classes: 2,
        leaf: LeafKind::Affine,
        finetune_embeddings: false,
    };
    let mut config = TrainConfig::new(model_config.clone(), 7);
    config.batch_size = 32;
    config.dropout = 0.13;
    config.max_epochs = 50;
    config.patience = 5;
    let embeddings = task.embeddings(word_dim, 7).map_err(err)?;
    let model = Model::new(model_config, &embeddings, config.seed).map_err(err)?;
    let mut log = Vec::new();
    let outcome = train(
        model,
        &task.vocab,
        &task.labels,
        train_set,
        validation,
        &config,
        &RunOptions::default(),
        &mut log,
    )
    .map_err(err)?;
    let best = outcome.best.model().map_err(err)?;
    let train_acc = evaluate(&best, train_set, 1).map_err(err)?.accuracy;
    let held_acc = evaluate(&best, &held_out, 1).map_err(err)?.accuracy;
    let elapsed = started.elapsed();
    let detail = format!(
        "train {:.3}, held-out {:.3}, best epoch {} of {} run, {:.0}s",
        train_acc,
        held_acc,
        outcome.best.epoch,
        outcome.epochs.len(),
        elapsed.as_secs_f64()
    );
    ensure(train_acc >= 0.95 && held_acc >= 0.85, || detail.clone())?;
    ensure(outcome.epochs.len() <= 50 && elapsed < Duration::from_secs(600), || detail.clone())?;
    Ok(detail)
}

// 6 ------------------------------------------------------------------------

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> BinaryTree {
    let merges = (0..n.saturating_sub(1)).map(|t| rng.gen_range(0..n - 1 - t)).collect();
    BinaryTree::new(n, merges).unwrap()
}

/// F1 over naively enumerated span lists.
fn oracle_f1(n: usize, a: &[usize], b: &[usize]) -> f64 {
    if n <= 2 {
        return 100.0;
    }
    let sa = simulated_spans(n, a);
    let sb = simulated_spans(n, b);
    let mut hits = 0;
    for x in &sa {
        for y in &sb {
            if x == y {
                hits += 1;
            }
        }
    }
    let p = hits as f64 / sa.len() as f64;
    let r = hits as f64 / sb.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        200.0 * p * r / (p + r)
    }
}

fn tree_metrics_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for i in 0..10_000 {
        let n = rng.gen_range(1..=8);
        let a = random_tree(&mut rng, n);
        let b = random_tree(&mut rng, n);
        let got = unlabeled_f1(&a, &b, false).map_err(err)?;
        let want = oracle_f1(n, a.merges(), b.merges());
        ensure(got == want, || format!("pair {i}: {a} vs {b}: {got} != {want}"))?;
    }
    for n in 2..=12usize {
        let closed = ((n - 1) + (1..n).sum::<usize>()) as f64 / n as f64;
        for tree in [BinaryTree::left_branching(n), BinaryTree::right_branching(n)] {
            let depth = macro_avg_depth(&[tree.map_err(err)?]).map_err(err)?;
            ensure(depth == closed, || format!("n {n}: depth {depth} != {closed}"))?;
        }
    }
    Ok("10000 random pairs exact; depth closed form exact for n in 2..=12".into())
}

// 7 ------------------------------------------------------------------------

fn branching_baselines() -> Result<String, String> {
    let lengths = [1, 2, 3, 7, 12, 5];
    let pred: Vec<BinaryTree> = lengths.iter().map(|&n| BinaryTree::right_branching(n).unwrap()).collect();
    let report = score_corpus(&pred, None, ScoreOptions::default()).map_err(err)?;
    ensure(report.corpus.f1_right == 100.0 && report.corpus.f1_left < 100.0, || {
        format!("library: right {} left {}", report.corpus.f1_right, report.corpus.f1_left)
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = dir.path().join("right.txt");
    let text: String = pred.iter().map(|t| format!("{t}\n")).collect();
    std::fs::write(&file, text).map_err(|e| e.to_string())?;
    let report_path = dir.path().join("report.txt");
    let status = Command::new(env!("CARGO_BIN_EXE_treeattn"))
        .args(["treescore", "--baselines-only", "--pred"])
        .arg(&file)
        .arg("--output")
        .arg(&report_path)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("treescore exited with {status}"))?;
    let table = std::fs::read_to_string(&report_path).map_err(|e| e.to_string())?;
    let row: Vec<&str> = table.lines().nth(1).ok_or("empty report")?.split_whitespace().collect();
    let left: f64 = row[1].parse().map_err(|_| format!("bad row {row:?}"))?;
    let right: f64 = row[2].parse().map_err(|_| format!("bad row {row:?}"))?;
    ensure(right == 100.0 && left < 100.0, || format!("cli: right {right} left {left}"))?;
    Ok(format!("right column 100.00, left column {left:.2}"))
}

// 8 ------------------------------------------------------------------------

fn write_toy_corpus(dir: &Path) -> Result<(), String> {
    let task = subset_task(&SubsetTaskConfig {
        examples: 120,
        ..Default::default()
    })
    .map_err(err)?;
    let (train_part, valid_part) = task.pairs.split_at(90);
    std::fs::write(dir.join("train.jsonl"), task.to_jsonl(train_part)).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("valid.jsonl"), task.to_jsonl(valid_part)).map_err(|e| e.to_string())?;
    Ok(())
}

fn train_and_eval(data: &Path, out: &Path) -> Result<(Vec<u8>, Vec<u8>, Vec<u8>), String> {
    let bin = env!("CARGO_BIN_EXE_treeattn");
    let status = Command::new(bin)
        .args(["train", "--task", "pair", "--labels", "not_subset,subset", "--word-dim", "16"])
        .args(["--dim", "16", "--attn-dim", "8", "--clf-dim", "32", "--epochs", "3", "--seed", "7"])
        .arg("--train")
        .arg(data.join("train.jsonl"))
        .arg("--valid")
        .arg(data.join("valid.jsonl"))
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("train exited with {status}"))?;
    let eval_path = out.join("eval.txt");
    let status = Command::new(bin)
        .arg("eval")
        .arg("--checkpoint")
        .arg(out.join("model.ckpt"))
        .arg("--data")
        .arg(data.join("valid.jsonl"))
        .arg("--output")
        .arg(&eval_path)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("eval exited with {status}"))?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    Ok((read(&out.join("metrics.jsonl"))?, read(&out.join("model.ckpt"))?, read(&eval_path)?))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_toy_corpus(dir.path())?;
    let a = train_and_eval(dir.path(), &dir.path().join("run_a"))?;
    let b = train_and_eval(dir.path(), &dir.path().join("run_b"))?;
    ensure(a.0 == b.0, || "metrics logs differ".into())?;
    ensure(a.1 == b.1, || "checkpoints differ".into())?;
    ensure(a.2 == b.2, || "evaluation reports differ".into())?;
    Ok(format!(
        "metrics log ({} bytes), checkpoint ({} bytes) and eval report identical",
        a.0.len(),
        a.1.len()
    ))
}

// 9 ------------------------------------------------------------------------

fn loss_baseline() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let vocab_size = 60;
    let emb = EmbeddingMatrix::random(vocab_size, 100, 1.0, 9).map_err(err)?;
    let config = ModelConfig {
        task: TaskKind::Pair,
        word_dim: 100,
        hidden: 100,
        attn_dim: 128,
        clf_dim: 1024,
        num_classes: 3,
        leaf: LeafKind::Rnn,
        finetune_embeddings: false,
    };
    let model = Model::new(config, &emb, 9).map_err(err)?;
    let examples: Vec<Example> = (0..100)
        .map(|_| {
            let sentence = |rng: &mut ChaCha8Rng| {
                let n = rng.gen_range(3..=12);
                (0..n).map(|_| rng.gen_range(2..vocab_size)).collect::<Vec<_>>()
            };
            Example {
                sentences: vec![sentence(&mut rng), sentence(&mut rng)],
                label: rng.gen_range(0..3),
            }
        })
        .collect();
    let loss = mean_loss(&model, &examples).map_err(err)?;
    let target = 3f64.ln();
    ensure((loss - target).abs() < 0.1, || format!("initial loss {loss:.4}, ln 3 = {target:.4}"))?;
    Ok(format!("initial loss {loss:.4} vs ln 3 = {target:.4}"))
}
