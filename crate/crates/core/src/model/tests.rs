use super::*;
use crate::hypergraph::{
    build_literal_hypergraph, build_variable_hypergraph, normalized_operator, NormalizedOperator,
};
use crate::objective::ClauseTable;
use crate::wcnf::{assign_random_weights, generate_random_3sat, WcnfInstance};
use rand::SeedableRng;

fn weighted(n: usize, m: usize, seed: u64) -> WcnfInstance {
    assign_random_weights(&generate_random_3sat(n, m, seed).unwrap(), seed, 1, 10).unwrap()
}

fn figure_instance() -> WcnfInstance {
    WcnfInstance::from_clauses(
        4,
        [
            (vec![-1, 2, -3], 1),
            (vec![1, 2], 2),
            (vec![-2, 3, 4], 3),
            (vec![-1, 3, -4], 4),
        ],
    )
    .unwrap()
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Dense softmax rows, written independently of the tape.
fn dense_softmax(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for r in 0..m.rows() {
        let max = m.row(r).iter().cloned().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = m.row(r).iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (c, e) in exps.iter().enumerate() {
            out[(r, c)] = e / total;
        }
    }
    out
}

#[test]
fn config_dimensions() {
    let c = ModelConfig::for_vars(100, 0);
    assert_eq!((c.d0, c.d1, c.ffn_hidden), (10, 5, 5));
    let c = ModelConfig::for_vars(250, 0);
    assert_eq!((c.d0, c.d1, c.ffn_hidden), (16, 8, 8));
    let c = ModelConfig::for_vars(1, 0);
    assert_eq!((c.d0, c.d1), (1, 1));
    // √2.25 = 1.5 rounds half up
    assert_eq!(round_half_up(1.5), 2);
    let mut bad = ModelConfig::for_vars(4, 0);
    bad.conv_layers = 1;
    assert!(bad.validate().is_err());
}

#[test]
fn init_is_deterministic_and_layer_norm_starts_at_identity() {
    let c = ModelConfig::for_vars(30, 9);
    let a = init_params(&c).unwrap();
    let b = init_params(&c).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, init_params(&ModelConfig { seed: 10, ..c }).unwrap());
    for block in &a.blocks {
        assert!(block.ln1_gain.data().iter().all(|&g| g == 1.0));
        assert!(block.ln2_gain.data().iter().all(|&g| g == 1.0));
        assert!(block.ln1_bias.data().iter().all(|&g| g == 0.0));
    }
    assert_eq!(a.names().len(), a.tensors().len());
}

#[test]
fn init_weight_spread_matches_uniform_moments() {
    let mut c = ModelConfig::for_vars(16, 4);
    c.d1 = 32;
    let p = init_params(&c).unwrap();
    let w = &p.blocks[0].query_pos;
    assert_eq!(w.len(), 1024);
    let mean = w.sum() / w.len() as f64;
    let std = (w.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
    let expected = 1.0 / (3.0 * 32.0f64).sqrt();
    assert!(
        (std / expected - 1.0).abs() < 0.1,
        "std {std} vs {expected}"
    );
}

#[test]
fn conv_layer_cases() {
    let inst = WcnfInstance::from_clauses(1, [(vec![1, -1], 4)]).unwrap();
    let hg = build_literal_hypergraph(&inst);
    let s = Arc::new(normalized_operator(&hg).matrix().clone());

    let mut tape = Tape::new();
    let zero = tape.leaf(DenseMatrix::zeros(2, 3));
    let r = tape.leaf(random_matrix(3, 2, 1));
    let out = conv_layer(&mut tape, &s, zero, r, Activation::Identity).unwrap();
    assert!(tape.value(out).data().iter().all(|&v| v == 0.0));

    let empty = Arc::new(NormalizedOperator::zero(2).matrix().clone());
    let l = tape.leaf(random_matrix(2, 3, 2));
    let out = conv_layer(&mut tape, &empty, l, r, Activation::Relu).unwrap();
    assert!(tape.value(out).data().iter().all(|&v| v == 0.0));

    // Dense re-evaluation: one edge {x1, ¬x1}, weight 4 → S = [[0, 1/4], [1/4, 0]].
    let lv = DenseMatrix::from_rows(&[vec![0.3], vec![-0.8]]);
    let rv = DenseMatrix::from_rows(&[vec![1.7]]);
    let l = tape.leaf(lv.clone());
    let r = tape.leaf(rv.clone());
    let out = conv_layer(&mut tape, &s, l, r, Activation::Identity).unwrap();
    let expected = [0.25 * -0.8 * 1.7, 0.25 * 0.3 * 1.7];
    for (o, e) in tape.value(out).data().iter().zip(expected) {
        assert!((o - e).abs() < 1e-12);
    }
    let out = conv_layer(&mut tape, &s, l, r, Activation::Relu).unwrap();
    assert_eq!(tape.value(out).data()[0], 0.0);
}

fn block_for(d: usize, seed: u64) -> BlockParameters {
    let mut c = ModelConfig::for_vars(4, seed);
    c.d1 = d;
    c.ffn_hidden = d;
    init_params(&c).unwrap().blocks.remove(0)
}

fn record_block(tape: &mut Tape, b: &BlockParameters) -> BlockVars {
    let [query_pos, key_pos, value_pos, query_neg, key_neg, value_neg, ffn_in, ffn_out, ln1_gain, ln1_bias, ln2_gain, ln2_bias] =
        b.tensors().map(|t| tape.leaf(t.clone()));
    BlockVars {
        query_pos,
        key_pos,
        value_pos,
        query_neg,
        key_neg,
        value_neg,
        ffn_in,
        ffn_out,
        ln1_gain,
        ln1_bias,
        ln2_gain,
        ln2_bias,
    }
}

#[test]
fn cross_attention_single_key() {
    let b = block_for(3, 1);
    let mut tape = Tape::new();
    let vars = record_block(&mut tape, &b);
    let lp = tape.leaf(random_matrix(1, 3, 5));
    let ln_value = random_matrix(1, 3, 6);
    let ln = tape.leaf(ln_value.clone());
    let state = DropoutState::inference();
    let (op, _) = cross_attention(
        &mut tape,
        lp,
        ln,
        &vars,
        0.1,
        DropoutSite::AttentionProbs,
        &state,
        0,
    )
    .unwrap();
    let v_neg = ln_value.matmul(&b.value_neg).unwrap();
    assert_eq!(tape.value(op), &v_neg);
}

#[test]
fn cross_attention_identity_projections_are_convex_combinations() {
    let mut b = block_for(2, 2);
    for t in [
        &mut b.query_pos,
        &mut b.key_pos,
        &mut b.value_pos,
        &mut b.query_neg,
        &mut b.key_neg,
        &mut b.value_neg,
    ] {
        *t = DenseMatrix::identity(2);
    }
    let mut tape = Tape::new();
    let vars = record_block(&mut tape, &b);
    let x = random_matrix(4, 2, 3);
    let lp = tape.leaf(x.clone());
    let ln = tape.leaf(x.clone());
    let (op, on) = cross_attention(
        &mut tape,
        lp,
        ln,
        &vars,
        0.0,
        DropoutSite::AttentionProbs,
        &DropoutState::inference(),
        0,
    )
    .unwrap();
    // symmetric scores → identical outputs for both banks
    assert_eq!(tape.value(op), tape.value(on));
    for r in 0..4 {
        for c in 0..2 {
            let col = x.column(c);
            let lo = col.iter().cloned().fold(f64::MAX, f64::min);
            let hi = col.iter().cloned().fold(f64::MIN, f64::max);
            let v = tape.value(op)[(r, c)];
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}

#[test]
fn cross_attention_matches_dense_evaluation() {
    let b = block_for(2, 7);
    let xp = random_matrix(3, 2, 8);
    let xn = random_matrix(3, 2, 9);
    let mut tape = Tape::new();
    let vars = record_block(&mut tape, &b);
    let lp = tape.leaf(xp.clone());
    let ln = tape.leaf(xn.clone());
    let (op, on) = cross_attention(
        &mut tape,
        lp,
        ln,
        &vars,
        0.1,
        DropoutSite::AttentionProbs,
        &DropoutState::inference(),
        0,
    )
    .unwrap();

    let scale = 1.0 / 2f64.sqrt();
    let qp = xp.matmul(&b.query_pos).unwrap();
    let kp = xp.matmul(&b.key_pos).unwrap();
    let vp = xp.matmul(&b.value_pos).unwrap();
    let qn = xn.matmul(&b.query_neg).unwrap();
    let kn = xn.matmul(&b.key_neg).unwrap();
    let vn = xn.matmul(&b.value_neg).unwrap();
    let pos = dense_softmax(&qp.matmul(&kn.transpose()).unwrap().scaled(scale))
        .matmul(&vn)
        .unwrap();
    let neg = dense_softmax(&qn.matmul(&kp.transpose()).unwrap().scaled(scale))
        .matmul(&vp)
        .unwrap();
    for (a, e) in tape.value(op).data().iter().zip(pos.data()) {
        assert!((a - e).abs() < 1e-12);
    }
    for (a, e) in tape.value(on).data().iter().zip(neg.data()) {
        assert!((a - e).abs() < 1e-12);
    }
    let wrong = tape.leaf(DenseMatrix::zeros(2, 2));
    assert!(cross_attention(
        &mut tape,
        lp,
        wrong,
        &vars,
        0.0,
        DropoutSite::AttentionProbs,
        &DropoutState::inference(),
        0
    )
    .is_err());
}

#[test]
fn transformer_block_zero_case() {
    let mut b = block_for(3, 4);
    for t in b.tensors_mut().into_iter().take(8) {
        *t = DenseMatrix::zeros(t.rows(), t.cols());
    }
    let config = ModelConfig {
        d1: 3,
        ffn_hidden: 3,
        ..ModelConfig::for_vars(2, 0)
    };
    let mut tape = Tape::new();
    let vars = record_block(&mut tape, &b);
    let x = tape.leaf(DenseMatrix::zeros(4, 3));
    let out =
        transformer_block(&mut tape, x, &vars, &config, &DropoutState::inference(), 0).unwrap();
    assert!(tape.value(out).data().iter().all(|&v| v == 0.0));
}

#[test]
fn transformer_block_is_permutation_equivariant() {
    let n = 4;
    let b = block_for(3, 11);
    let config = ModelConfig {
        d1: 3,
        ffn_hidden: 3,
        ..ModelConfig::for_vars(n, 0)
    };
    let x = random_matrix(2 * n, 3, 12);
    let perm = [2usize, 0, 3, 1];
    // variable i of the permuted problem is variable perm[i] of the original
    let px = DenseMatrix::from_fn(2 * n, 3, |r, c| {
        let (bank, i) = (r / n, r % n);
        x[(bank * n + perm[i], c)]
    });
    let run = |input: &DenseMatrix| {
        let mut tape = Tape::new();
        let vars = record_block(&mut tape, &b);
        let v = tape.leaf(input.clone());
        let out =
            transformer_block(&mut tape, v, &vars, &config, &DropoutState::inference(), 0).unwrap();
        tape.value(out).clone()
    };
    let out = run(&x);
    let pout = run(&px);
    for r in 0..2 * n {
        let (bank, i) = (r / n, r % n);
        for c in 0..3 {
            assert!((pout[(r, c)] - out[(bank * n + perm[i], c)]).abs() < 1e-12);
        }
    }
}

#[test]
fn figure_instance_shapes() {
    let inst = figure_instance();
    let hg = build_literal_hypergraph(&inst);
    let config = ModelConfig::for_vars(4, 3);
    let params = init_params(&config).unwrap();
    let out = forward(&hg, &params, &config, &DropoutState::inference()).unwrap();
    assert_eq!(out.y.len(), 4);
    let (p, n) = out.penultimate.unwrap();
    assert_eq!(p.shape(), (4, config.d1));
    assert_eq!(n.shape(), (4, config.d1));
    assert_eq!(out.logits.shape(), (8, 1));
    assert!(out.y.iter().all(|&y| y > 0.0 && y < 1.0));
}

#[test]
fn zero_logits_give_one_half() {
    let inst = figure_instance();
    let config = ModelConfig::for_vars(4, 3);
    let mut params = init_params(&config).unwrap();
    let last = params.conv.last_mut().unwrap();
    *last = DenseMatrix::zeros(last.rows(), last.cols());
    let out = forward(
        &build_literal_hypergraph(&inst),
        &params,
        &config,
        &DropoutState::inference(),
    )
    .unwrap();
    assert!(out.y.iter().all(|&y| y == 0.5));

    let vconfig = ModelConfig {
        mode: HypergraphMode::Variable,
        ..config
    };
    let mut vparams = init_params(&vconfig).unwrap();
    assert!(vparams.blocks.is_empty());
    let last = vparams.conv.last_mut().unwrap();
    *last = DenseMatrix::zeros(last.rows(), last.cols());
    let y = forward_variable_mode(&build_variable_hypergraph(&inst), &vparams, &vconfig).unwrap();
    assert_eq!(y, vec![0.5; 4]);
}

#[test]
fn variable_mode_is_monotone_in_logits() {
    let inst = weighted(6, 20, 2);
    let hg = build_variable_hypergraph(&inst);
    let config = ModelConfig {
        mode: HypergraphMode::Variable,
        ..ModelConfig::for_vars(6, 1)
    };
    let params = init_params(&config).unwrap();
    let net = Network::new(&hg, config).unwrap();
    let base = net.forward(&params, &DropoutState::inference()).unwrap();
    assert_eq!(base.y.len(), 6);
    let mut bigger = params.clone();
    // scaling the final weight by 2 doubles every logit
    bigger.conv[1] = bigger.conv[1].scaled(2.0);
    let out = net.forward(&bigger, &DropoutState::inference()).unwrap();
    for i in 0..6 {
        let l = base.logits[(i, 0)];
        if l > 1e-9 {
            assert!(out.y[i] > base.y[i]);
        } else if l < -1e-9 {
            assert!(out.y[i] < base.y[i]);
        }
    }
}

#[test]
fn mode_mismatch_is_rejected() {
    let inst = figure_instance();
    let config = ModelConfig::for_vars(4, 0);
    let params = init_params(&config).unwrap();
    let vhg = build_variable_hypergraph(&inst);
    assert!(matches!(
        Network::new(&vhg, config),
        Err(Error::ModeMismatch { .. })
    ));
    assert!(forward(&vhg, &params, &config, &DropoutState::inference()).is_err());
    assert!(forward_variable_mode(&build_literal_hypergraph(&inst), &params, &config).is_err());
}

#[test]
fn disjoint_union_gives_block_identical_outputs() {
    let inst = weighted(5, 18, 21);
    let n = 5;
    let config = ModelConfig::for_vars(n, 4);
    let params = init_params(&config).unwrap();

    let shifted = inst.clauses().iter().map(|c| {
        let lits: Vec<i32> = c
            .literals()
            .iter()
            .map(|&l| if l > 0 { l + n as i32 } else { l - n as i32 })
            .collect();
        (lits, c.weight())
    });
    let union = WcnfInstance::from_clauses(
        2 * n,
        inst.clauses()
            .iter()
            .map(|c| (c.literals().to_vec(), c.weight()))
            .chain(shifted),
    )
    .unwrap();
    let union_config = ModelConfig {
        num_vars: 2 * n,
        ..config
    };
    let mut union_params = init_params(&union_config).unwrap();
    let e = &params.embedding;
    union_params.embedding = DenseMatrix::from_fn(4 * n, config.d0, |r, c| {
        let (bank, i) = (r / (2 * n), r % (2 * n));
        e[(bank * n + i % n, c)]
    });
    union_params.conv = params.conv.clone();
    union_params.blocks = params.blocks.clone();

    let single = forward(
        &build_literal_hypergraph(&inst),
        &params,
        &config,
        &DropoutState::inference(),
    )
    .unwrap();
    let double = forward(
        &build_literal_hypergraph(&union),
        &union_params,
        &union_config,
        &DropoutState::inference(),
    )
    .unwrap();
    for i in 0..n {
        assert!((double.y[i] - double.y[n + i]).abs() < 1e-12);
        assert!((double.y[i] - single.y[i]).abs() < 1e-12);
    }
}

#[test]
fn clause_permutation_leaves_output_unchanged() {
    let inst = weighted(8, 30, 5);
    let mut clauses = inst.clauses().to_vec();
    clauses.reverse();
    let permuted = WcnfInstance::new(8, clauses).unwrap();
    let config = ModelConfig::for_vars(8, 2);
    let params = init_params(&config).unwrap();
    let a = forward(
        &build_literal_hypergraph(&inst),
        &params,
        &config,
        &DropoutState::inference(),
    )
    .unwrap();
    let b = forward(
        &build_literal_hypergraph(&permuted),
        &params,
        &config,
        &DropoutState::inference(),
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn variable_relabeling_permutes_outputs() {
    let n = 6;
    let inst = weighted(n, 22, 8);
    let perm = [3usize, 5, 0, 1, 4, 2]; // new var i is old var perm[i]
    let mut inverse = [0usize; 6];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    let relabeled = WcnfInstance::from_clauses(
        n,
        inst.clauses().iter().map(|c| {
            let lits: Vec<i32> = c
                .literals()
                .iter()
                .map(|&l| {
                    let v = inverse[l.unsigned_abs() as usize - 1] as i32 + 1;
                    if l > 0 {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            (lits, c.weight())
        }),
    )
    .unwrap();
    let config = ModelConfig::for_vars(n, 6);
    let params = init_params(&config).unwrap();
    let mut moved = params.clone();
    moved.embedding = DenseMatrix::from_fn(2 * n, config.d0, |r, c| {
        let (bank, i) = (r / n, r % n);
        params.embedding[(bank * n + perm[i], c)]
    });
    let a = forward(
        &build_literal_hypergraph(&inst),
        &params,
        &config,
        &DropoutState::inference(),
    )
    .unwrap();
    let b = forward(
        &build_literal_hypergraph(&relabeled),
        &moved,
        &config,
        &DropoutState::inference(),
    )
    .unwrap();
    for i in 0..n {
        assert!((b.y[i] - a.y[perm[i]]).abs() < 1e-12);
    }
}

#[test]
fn no_transformer_is_plain_two_layer_pipeline() {
    let inst = weighted(7, 25, 13);
    let hg = build_literal_hypergraph(&inst);
    let config = ModelConfig {
        use_transformer: false,
        ..ModelConfig::for_vars(7, 3)
    };
    let params = init_params(&config).unwrap();
    assert!(params.blocks.is_empty());
    let out = forward(&hg, &params, &config, &DropoutState::training(1, 1)).unwrap();

    let s = normalized_operator(&hg).matrix().to_dense();
    let h = s
        .matmul(&params.embedding)
        .unwrap()
        .matmul(&params.conv[0])
        .unwrap()
        .map(|v| v.max(0.0));
    let logits = s.matmul(&h).unwrap().matmul(&params.conv[1]).unwrap();
    for i in 0..7 {
        let expected = 1.0 / (1.0 + (logits[(i + 7, 0)] - logits[(i, 0)]).exp());
        assert!((out.y[i] - expected).abs() < 1e-12);
    }
    let (p, _) = out.penultimate.unwrap();
    assert_eq!(p, h.slice_rows(0, 7));
}

#[test]
fn dropout_masks_depend_on_epoch_only_through_seeded_streams() {
    let inst = weighted(6, 20, 3);
    let hg = build_literal_hypergraph(&inst);
    // d1 = 1 at n = 6 would make LayerNorm constant; widen so dropout is observable
    let config = ModelConfig {
        attention_dropout: 0.5,
        d1: 3,
        ffn_hidden: 3,
        ..ModelConfig::for_vars(6, 3)
    };
    let params = init_params(&config).unwrap();
    let net = Network::new(&hg, config).unwrap();
    let a = net.forward(&params, &DropoutState::training(9, 1)).unwrap();
    let b = net.forward(&params, &DropoutState::training(9, 1)).unwrap();
    let c = net.forward(&params, &DropoutState::training(9, 2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.y, c.y);

    let out_site = Network::new(
        &hg,
        ModelConfig {
            dropout_site: DropoutSite::AttentionOutput,
            ..config
        },
    )
    .unwrap();
    let d = out_site
        .forward(&params, &DropoutState::training(9, 1))
        .unwrap();
    assert_ne!(a.y, d.y);
}

#[test]
fn unit_width_layer_norm_is_constant() {
    // for n < 9 the default hidden width is 1, where LayerNorm returns its bias
    let inst = weighted(6, 20, 3);
    let config = ModelConfig::for_vars(6, 3);
    assert_eq!(config.d1, 1);
    let out = forward(
        &build_literal_hypergraph(&inst),
        &init_params(&config).unwrap(),
        &config,
        &DropoutState::inference(),
    )
    .unwrap();
    assert!(out.y.iter().all(|&y| y == 0.5));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let config = ModelConfig::for_vars(9, 17);
    let params = init_params(&config).unwrap();
    let text = params.to_checkpoint();
    assert!(text.starts_with("hypersat-params v1\ntensors 15\nembedding 18 3\n"));
    assert_eq!(
        ModelParameters::from_checkpoint(&text, &config).unwrap(),
        params
    );
    assert!(ModelParameters::from_checkpoint(
        &text,
        &ModelConfig {
            use_transformer: false,
            ..config
        }
    )
    .is_err());
    assert!(ModelParameters::from_checkpoint("nope", &config).is_err());
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    for (n, seed, width) in [
        (4usize, 1u64, None),
        (6, 2, None),
        (8, 3, None),
        (5, 4, Some(3)),
        (8, 5, Some(2)),
    ] {
        let inst = weighted(n, 4 * n, seed);
        let mut config = ModelConfig::for_vars(n, seed);
        if let Some(d) = width {
            config.d1 = d;
            config.ffn_hidden = d;
        }
        let report = check_gradients(&inst, &config, 2e-3, 1e-5).unwrap();
        assert!(report.max_error < 1e-4, "n={n}: {report:?}");
        assert_eq!(
            report.coordinates,
            init_params(&config).unwrap().num_scalars()
        );
    }
    let inst = weighted(6, 20, 9);
    let config = ModelConfig {
        mode: HypergraphMode::Variable,
        ..ModelConfig::for_vars(6, 9)
    };
    assert!(
        check_gradients(&inst, &config, 2e-3, 1e-5)
            .unwrap()
            .max_error
            < 1e-4
    );
}

#[test]
fn loss_and_gradients_agree_with_objective() {
    let inst = weighted(7, 25, 4);
    let hg = build_literal_hypergraph(&inst);
    let config = ModelConfig::for_vars(7, 4);
    let net = Network::new(&hg, config).unwrap();
    let params = init_params(&config).unwrap();
    let table = Arc::new(ClauseTable::new(&inst));
    let (loss, grads) = loss_and_gradients(&net, &table, &params, 2e-3).unwrap();
    let out = net.forward(&params, &DropoutState::inference()).unwrap();
    let (p, n) = out.penultimate.unwrap();
    let expected = crate::objective::task_loss(&out.y, &inst).unwrap()
        + 2e-3 * crate::objective::shared_loss(&p, &n).unwrap();
    assert!((loss - expected).abs() < 1e-12);
    assert_eq!(grads.len(), params.tensors().len());
}
