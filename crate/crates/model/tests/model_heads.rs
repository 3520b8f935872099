//! End-to-end model tests: encoder stack shape and determinism, completion
//! head, pointer mixture, losses, greedy decoding, and checkpoint round
//! trips, including full-chain gradient checks.

use std::collections::BTreeSet;

use ndarray::array;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pathcoder_model::checkpoint::{snapshot, Checkpoint};
use pathcoder_model::decoder::pointer_mix;
use pathcoder_model::encoder::{specials, used_path_ids, EncoderInput, Model, ModelConfig, Task};
use pathcoder_model::error::ModelError;
use pathcoder_model::meta::Scheme;
use pathcoder_model::params::{Bindings, GradStore, ParamId};
use pathcoder_model::tape::Tape;

const VOCAB: usize = 12;
const NODE_VOCAB: usize = 6;
const LANGS: usize = 2;

fn tiny_config(task: Task) -> ModelConfig {
    ModelConfig {
        task,
        variant: "path".into(),
        scheme: Scheme::None,
        d: 4,
        heads: 2,
        layers: 1,
        decoder_layers: 1,
        ffn_dim: 8,
        dropout: 0.0,
        word_emb_dim: 4,
        node_emb_dim: 2,
        path_hidden: 2,
        d_t: 3,
        d_p: 4,
        max_seq: 16,
        max_path_len: 8,
        pointer: task == Task::Summarization,
    }
}

fn table() -> Vec<Vec<u32>> {
    vec![vec![], vec![1, 2], vec![2, 3, 4], vec![5, 1]]
}

/// 4-token sample; token 2 (index) holds <MASK> for completion tests.
fn sample() -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let tokens = vec![6, 7, specials::MASK, 8];
    let n = tokens.len();
    let mut rel = vec![0u32; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rel[i * n + j] = 1 + ((i + 2 * j) % 3) as u32;
            }
        }
    }
    let abs = vec![1, 2, 3, 2];
    (tokens, rel, abs)
}

fn forward_loss(model: &Model, task: Task) -> (f64, GradStore) {
    let (tokens, rel, abs) = sample();
    let input = EncoderInput { language: 0, tokens: &tokens, rel_ids: &rel, abs_ids: &abs };
    let table = table();
    let mut tape = Tape::new();
    let mut bind = Bindings::new();
    let used = used_path_ids(&input);
    let langs = BTreeSet::from([0]);
    let ctx = model.prepare(&mut tape, &mut bind, &table, &used, &langs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let loss = match task {
        Task::Completion => model
            .completion_loss(&mut tape, &mut bind, &input, &ctx, 2, 7, false, &mut rng)
            .unwrap(),
        Task::Summarization => model
            .summarization_loss(&mut tape, &mut bind, &input, &ctx, &[6, 9], false, &mut rng)
            .unwrap(),
    };
    let grads = tape.backward(loss);
    let mut gs = GradStore::zeros_like(&model.store);
    bind.collect(&grads, &mut gs);
    (tape.scalar_value(loss), gs)
}

/// Central finite differences over every model parameter.
fn fd_check_model(model: &mut Model, task: Task, eps: f64) -> f64 {
    let (_, analytic) = forward_loss(model, task);
    let mut worst: f64 = 0.0;
    for i in 0..model.store.len() {
        let count = model.store.get(ParamId(i)).value.len();
        for idx in 0..count {
            let orig = model.store.get(ParamId(i)).value.as_slice().unwrap()[idx];
            model.store.get_mut(ParamId(i)).value.as_slice_mut().unwrap()[idx] = orig + eps;
            let fp = forward_loss(model, task).0;
            model.store.get_mut(ParamId(i)).value.as_slice_mut().unwrap()[idx] = orig - eps;
            let fm = forward_loss(model, task).0;
            model.store.get_mut(ParamId(i)).value.as_slice_mut().unwrap()[idx] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let ana = analytic.get(ParamId(i)).as_slice().unwrap()[idx];
            if ana.abs() < 1e-10 && numeric.abs() < 1e-10 {
                continue;
            }
            // The denominator floor keeps finite-difference roundoff on
            // near-zero gradients from dominating the check.
            worst = worst.max((ana - numeric).abs() / (ana.abs() + numeric.abs()).max(1e-6));
        }
    }
    worst
}

fn encode_value(model: &Model) -> ndarray::ArrayD<f64> {
    let (tokens, rel, abs) = sample();
    let input = EncoderInput { language: 0, tokens: &tokens, rel_ids: &rel, abs_ids: &abs };
    let table = table();
    let mut tape = Tape::new();
    let mut bind = Bindings::new();
    let used = used_path_ids(&input);
    let langs = BTreeSet::from([0]);
    let ctx = model.prepare(&mut tape, &mut bind, &table, &used, &langs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = model.encode(&mut tape, &mut bind, &input, &ctx, false, &mut rng).unwrap();
    tape.value(out).clone()
}

#[test]
fn encoder_output_shape_and_determinism() {
    let model = Model::init(tiny_config(Task::Completion), VOCAB, NODE_VOCAB, LANGS, 5).unwrap();
    let a = encode_value(&model);
    let b = encode_value(&model);
    assert_eq!(a.shape(), &[4, 4]);
    assert_eq!(a, b);
}

#[test]
fn zero_layers_pass_projected_embeddings_through() {
    let mut config = tiny_config(Task::Completion);
    config.layers = 0;
    let model = Model::init(config, VOCAB, NODE_VOCAB, LANGS, 6).unwrap();
    let enc = encode_value(&model);
    let (tokens, _, _) = sample();
    let mut tape = Tape::new();
    let mut bind = Bindings::new();
    let projected = model.embed_tokens(&mut tape, &mut bind, &tokens).unwrap();
    assert_eq!(&enc, tape.value(projected));
}

#[test]
fn completion_logits_shape_and_mask_check() {
    let model = Model::init(tiny_config(Task::Completion), VOCAB, NODE_VOCAB, LANGS, 7).unwrap();
    let (tokens, rel, abs) = sample();
    let input = EncoderInput { language: 0, tokens: &tokens, rel_ids: &rel, abs_ids: &abs };
    let table = table();
    let mut tape = Tape::new();
    let mut bind = Bindings::new();
    let used = used_path_ids(&input);
    let ctx = model.prepare(&mut tape, &mut bind, &table, &used, &BTreeSet::from([0])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logits = model
        .completion_logits(&mut tape, &mut bind, &input, &ctx, 2, false, &mut rng)
        .unwrap();
    assert_eq!(tape.value(logits).shape(), &[1, VOCAB]);
    // Position 0 holds an ordinary token, not <MASK>.
    assert!(matches!(
        model.completion_logits(&mut tape, &mut bind, &input, &ctx, 0, false, &mut rng),
        Err(ModelError::BadMaskPosition(0))
    ));
}

#[test]
fn zero_output_head_gives_flat_logits() {
    let mut model =
        Model::init(tiny_config(Task::Completion), VOCAB, NODE_VOCAB, LANGS, 8).unwrap();
    for name in ["head.out_w", "head.out_b"] {
        let id = model.store.id_of(name).unwrap();
        model.store.get_mut(id).value.fill(0.0);
    }
    let (tokens, rel, abs) = sample();
    let input = EncoderInput { language: 0, tokens: &tokens, rel_ids: &rel, abs_ids: &abs };
    let table = table();
    let mut tape = Tape::new();
    let mut bind = Bindings::new();
    let used = used_path_ids(&input);
    let ctx = model.prepare(&mut tape, &mut bind, &table, &used, &BTreeSet::from([0])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logits = model
        .completion_logits(&mut tape, &mut bind, &input, &ctx, 2, false, &mut rng)
        .unwrap();
    let v = tape.value(logits);
    assert!(v.iter().all(|&x| x == 0.0), "uniform softmax needs equal logits");
}

#[test]
fn pointer_mix_goldens() {
    // g = 1 keeps vocab_dist; g = 0 with one-hot copy on id 7 is one-hot;
    // the hand case: g = 0.5, vocab [0.6, 0.4], copy all on a position of
    // id 1 -> [0.3, 0.7].
    let mut tape = Tape::new();
    let vocab = tape.leaf2(array![[0.6, 0.4]]);
    let copy = tape.leaf2(array![[1.0]]);
    let g1 = tape.leaf1(array![1.0]);
    let out = pointer_mix(&mut tape, vocab, copy, &[1], 2, g1);
    assert_eq!(tape.value(out), tape.value(vocab));

    let g0 = tape.leaf1(array![0.0]);
    let vocab8 = tape.leaf2(array![[0.125; 8]]);
    let copy_hot = tape.leaf2(array![[0.0, 1.0, 0.0]]);
    let out = pointer_mix(&mut tape, vocab8, copy_hot, &[3, 7, 5], 8, g0);
    let v = tape.value(out);
    assert_eq!(v[[0, 7]], 1.0);
    assert_eq!(v.iter().sum::<f64>(), 1.0);

    let gh = tape.leaf1(array![0.5]);
    let out = pointer_mix(&mut tape, vocab, copy, &[1], 2, gh);
    let v = tape.value(out);
    assert!((v[[0, 0]] - 0.3).abs() < 1e-12);
    assert!((v[[0, 1]] - 0.7).abs() < 1e-12);
}

#[test]
fn pointer_mix_outputs_are_distributions() {
    // Random-ish distributions for several gate values: rows stay
    // non-negative and sum to 1 within 1e-8.
    let mut tape = Tape::new();
    let vocab = tape.leaf2(array![[0.2, 0.3, 0.5], [0.1, 0.1, 0.8]]);
    let copy = tape.leaf2(array![[0.25, 0.75], [0.9, 0.1]]);
    for g in [0.0, 0.17, 0.5, 0.93, 1.0] {
        let gate = tape.leaf1(array![g, 1.0 - g]);
        let out = pointer_mix(&mut tape, vocab, copy, &[2, 0], 3, gate);
        let v = tape.value(out);
        for row in v.outer_iter() {
            assert!(row.iter().all(|&x| x >= 0.0));
            assert!((row.sum() - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn loss_goldens() {
    // One-hot correct predictions -> 0; uniform logits -> ln V; the
    // two-step hand case -> mean(-ln 0.5, -ln 0.75).
    let mut tape = Tape::new();
    let onehot = tape.leaf2(array![[1.0, 0.0], [0.0, 1.0]]);
    let l = tape.nll_from_probs(onehot, vec![Some(0), Some(1)]);
    assert!(tape.scalar_value(l).abs() < 1e-12);

    let uniform = tape.leaf2(array![[0.0, 0.0, 0.0, 0.0, 0.0]]);
    let l = tape.softmax_cross_entropy(uniform, vec![Some(3)]);
    assert!((tape.scalar_value(l) - 5f64.ln()).abs() < 1e-12);

    let probs = tape.leaf2(array![[0.5, 0.5], [0.25, 0.75]]);
    let l = tape.nll_from_probs(probs, vec![Some(0), Some(1)]);
    let expected = (-(0.5f64.ln()) - 0.75f64.ln()) / 2.0;
    assert!((tape.scalar_value(l) - expected).abs() < 1e-12);
}

#[test]
fn gradient_check_completion_loss_full_chain() {
    // Scheme alpha so the generator chain is exercised inside the model.
    let mut config = tiny_config(Task::Completion);
    config.scheme = Scheme::Alpha;
    let mut model = Model::init(config, VOCAB, NODE_VOCAB, LANGS, 9).unwrap();
    let worst = fd_check_model(&mut model, Task::Completion, 1e-5);
    assert!(worst < 1e-4, "completion chain: worst relative error {worst}");
}

#[test]
fn gradient_check_summarization_loss_full_chain() {
    let mut model =
        Model::init(tiny_config(Task::Summarization), VOCAB, NODE_VOCAB, LANGS, 10).unwrap();
    let worst = fd_check_model(&mut model, Task::Summarization, 1e-5);
    assert!(worst < 1e-4, "summarization chain: worst relative error {worst}");
}

#[test]
fn greedy_decode_is_bounded_and_deterministic() {
    let model =
        Model::init(tiny_config(Task::Summarization), VOCAB, NODE_VOCAB, LANGS, 11).unwrap();
    let (tokens, rel, abs) = sample();
    let input = EncoderInput { language: 1, tokens: &tokens, rel_ids: &rel, abs_ids: &abs };
    let table = table();
    let a = model.greedy_decode(&input, &table, 5).unwrap();
    let b = model.greedy_decode(&input, &table, 5).unwrap();
    assert!(a.len() <= 5);
    assert_eq!(a, b);
    assert!(!a.contains(&specials::EOS));
}

#[test]
fn checkpoint_round_trip_preserves_outputs() {
    let model = Model::init(tiny_config(Task::Completion), VOCAB, NODE_VOCAB, LANGS, 12).unwrap();
    let before = encode_value(&model);
    let ckpt = snapshot(&model, None, serde_json::json!({"epochs": 1}), 3, "vh", "nh");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    ckpt.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.epoch, 3);
    let restored = loaded.restore("vh", "nh").unwrap();
    let after = encode_value(&restored);
    assert_eq!(before, after);
    assert!(matches!(loaded.restore("other", "nh"), Err(ModelError::VocabMismatch)));
}

#[test]
fn dropout_perturbs_training_forward_only() {
    let mut config = tiny_config(Task::Completion);
    config.dropout = 0.5;
    let model = Model::init(config, VOCAB, NODE_VOCAB, LANGS, 13).unwrap();
    let (tokens, rel, abs) = sample();
    let input = EncoderInput { language: 0, tokens: &tokens, rel_ids: &rel, abs_ids: &abs };
    let table = table();
    let run = |train: bool, seed: u64| {
        let mut tape = Tape::new();
        let mut bind = Bindings::new();
        let used = used_path_ids(&input);
        let ctx = model.prepare(&mut tape, &mut bind, &table, &used, &BTreeSet::from([0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = model.encode(&mut tape, &mut bind, &input, &ctx, train, &mut rng).unwrap();
        tape.value(out).clone()
    };
    // Inference ignores dropout entirely; training with different seeds
    // produces different masks.
    assert_eq!(run(false, 1), run(false, 2));
    assert_ne!(run(true, 1), run(true, 2));
}
