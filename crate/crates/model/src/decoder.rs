//! Transformer decoder with an optional copy mechanism for name prediction.

use rand_chacha::ChaCha8Rng;

use crate::encoder::{sinusoidal_positions, specials, EncoderInput, ForwardContext, Model, ModelConfig};
use crate::error::{ModelError, Result};
use crate::params::{Bindings, ParamId, ParamStore};
use crate::tape::{Tape, VarId};

pub struct DecoderLayer {
    ln1_g: ParamId,
    ln1_b: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
    ln3_g: ParamId,
    ln3_b: ParamId,
    self_q: ParamId,
    self_k: ParamId,
    self_v: ParamId,
    self_out_w: ParamId,
    self_out_b: ParamId,
    cross_q: ParamId,
    cross_k: ParamId,
    cross_v: ParamId,
    cross_out_w: ParamId,
    cross_out_b: ParamId,
    ffn_w1: ParamId,
    ffn_b1: ParamId,
    ffn_w2: ParamId,
    ffn_b2: ParamId,
}

impl DecoderLayer {
    fn init(prefix: &str, d: usize, ffn: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let ones = |name: String, store: &mut ParamStore| {
            store.add(&name, ndarray::ArrayD::ones(ndarray::IxDyn(&[d])))
        };
        DecoderLayer {
            ln1_g: ones(format!("{prefix}.ln1_g"), store),
            ln1_b: store.add_zeros(&format!("{prefix}.ln1_b"), &[d]),
            ln2_g: ones(format!("{prefix}.ln2_g"), store),
            ln2_b: store.add_zeros(&format!("{prefix}.ln2_b"), &[d]),
            ln3_g: ones(format!("{prefix}.ln3_g"), store),
            ln3_b: store.add_zeros(&format!("{prefix}.ln3_b"), &[d]),
            self_q: store.add_glorot(&format!("{prefix}.self_q"), d, d, rng),
            self_k: store.add_glorot(&format!("{prefix}.self_k"), d, d, rng),
            self_v: store.add_glorot(&format!("{prefix}.self_v"), d, d, rng),
            self_out_w: store.add_glorot(&format!("{prefix}.self_out_w"), d, d, rng),
            self_out_b: store.add_zeros(&format!("{prefix}.self_out_b"), &[d]),
            cross_q: store.add_glorot(&format!("{prefix}.cross_q"), d, d, rng),
            cross_k: store.add_glorot(&format!("{prefix}.cross_k"), d, d, rng),
            cross_v: store.add_glorot(&format!("{prefix}.cross_v"), d, d, rng),
            cross_out_w: store.add_glorot(&format!("{prefix}.cross_out_w"), d, d, rng),
            cross_out_b: store.add_zeros(&format!("{prefix}.cross_out_b"), &[d]),
            ffn_w1: store.add_glorot(&format!("{prefix}.ffn_w1"), d, ffn, rng),
            ffn_b1: store.add_zeros(&format!("{prefix}.ffn_b1"), &[ffn]),
            ffn_w2: store.add_glorot(&format!("{prefix}.ffn_w2"), ffn, d, rng),
            ffn_b2: store.add_zeros(&format!("{prefix}.ffn_b2"), &[d]),
        }
    }
}

pub struct DecoderParams {
    pub layers: Vec<DecoderLayer>,
    final_ln_g: ParamId,
    final_ln_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    gate_w: Option<ParamId>,
    gate_b: Option<ParamId>,
}

impl DecoderParams {
    pub fn init(
        prefix: &str,
        config: &ModelConfig,
        vocab_size: usize,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(config.decoder_layers);
        for i in 0..config.decoder_layers {
            layers.push(DecoderLayer::init(
                &format!("{prefix}.layer{i}"),
                config.d,
                config.ffn_dim,
                store,
                rng,
            ));
        }
        let (gate_w, gate_b) = if config.pointer {
            (
                Some(store.add_glorot(&format!("{prefix}.gate_w"), config.d, 1, rng)),
                Some(store.add_zeros(&format!("{prefix}.gate_b"), &[1])),
            )
        } else {
            (None, None)
        };
        DecoderParams {
            layers,
            final_ln_g: store.add(&format!("{prefix}.final_ln_g"), ndarray::ArrayD::ones(ndarray::IxDyn(&[config.d]))),
            final_ln_b: store.add_zeros(&format!("{prefix}.final_ln_b"), &[config.d]),
            out_w: store.add_glorot(&format!("{prefix}.out_w"), config.d, vocab_size, rng),
            out_b: store.add_zeros(&format!("{prefix}.out_b"), &[vocab_size]),
            gate_w,
            gate_b,
        }
    }
}

pub struct DecoderOutput {
    /// (t, V) next-token distributions (probabilities, not logits).
    pub probs: VarId,
    /// (t, V) vocabulary-only distribution, before any copy mixing.
    pub vocab_dist: VarId,
    /// (t, n) head-averaged final-layer cross attention, when the copy
    /// mechanism is active.
    pub copy_attn: Option<VarId>,
    /// (t,) copy gate, when active.
    pub gate: Option<VarId>,
    pub hidden: VarId,
}

/// Multi-head attention from `q_src` (t, d) over `kv_src` (n, d).
/// Returns the concatenated head outputs and the head-averaged attention.
#[allow(clippy::too_many_arguments)]
fn multihead(
    tape: &mut Tape,
    q_src: VarId,
    kv_src: VarId,
    wq: VarId,
    wk: VarId,
    wv: VarId,
    allowed: &[bool],
    heads: usize,
    d: usize,
) -> (VarId, VarId) {
    let dh = d / heads;
    let q = tape.matmul(q_src, wq);
    let k = tape.matmul(kv_src, wk);
    let v = tape.matmul(kv_src, wv);
    let mut outs = Vec::with_capacity(heads);
    let mut attn_sum = None;
    for h in 0..heads {
        let (s, e) = (h * dh, (h + 1) * dh);
        let qh = tape.slice_cols(q, s, e);
        let kh = tape.slice_cols(k, s, e);
        let vh = tape.slice_cols(v, s, e);
        let kt = tape.transpose(kh);
        let scores = tape.matmul(qh, kt);
        let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
        let attn = tape.masked_softmax(scores, allowed.to_vec());
        attn_sum = Some(match attn_sum {
            None => attn,
            Some(acc) => tape.add(acc, attn),
        });
        outs.push(tape.matmul(attn, vh));
    }
    let mut it = outs.into_iter();
    let first = it.next().expect("at least one head");
    let z = it.fold(first, |acc, h| tape.concat_cols(acc, h));
    let avg = tape.scale(attn_sum.expect("at least one head"), 1.0 / heads as f64);
    (z, avg)
}

/// Mix the vocabulary distribution with a scattered copy distribution:
/// out = g * vocab + (1 - g) * scatter(copy_attn over src ids).
pub fn pointer_mix(
    tape: &mut Tape,
    vocab_dist: VarId,
    copy_attn: VarId,
    src_ids: &[u32],
    vocab_size: usize,
    gate: VarId,
) -> VarId {
    let ids: Vec<usize> = src_ids.iter().map(|&t| t as usize).collect();
    let copy_vocab = tape.scatter_cols(copy_attn, ids, vocab_size);
    let from_vocab = tape.scale_rows(vocab_dist, gate);
    let neg = tape.neg(gate);
    let one_minus = tape.add_scalar(neg, 1.0);
    let from_copy = tape.scale_rows(copy_vocab, one_minus);
    tape.add(from_vocab, from_copy)
}

impl Model {
    /// One decoder forward pass: `tgt_in` is the shifted target prefix
    /// (starting with BOS); row i of the output predicts `tgt_in[i + 1]`.
    pub fn decode_step(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        memory: VarId,
        src_tokens: &[u32],
        tgt_in: &[u32],
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<DecoderOutput> {
        let dec = self.decoder()?;
        let t = tgt_in.len();
        let n = src_tokens.len();
        let d = self.config.d;
        let heads = self.config.heads;
        if t == 0 {
            return Err(ModelError::DimensionMismatch("empty decoder input".into()));
        }

        let emb = bind.bind(tape, &self.store, self.word_emb);
        let rows = tape.gather_rows(emb, tgt_in.iter().map(|&x| x as usize).collect());
        let (pw, pb) = self.emb_proj(tape, bind);
        let y = tape.matmul(rows, pw);
        let y = tape.add_bias(y, pb);
        let pe = tape.leaf2(sinusoidal_positions(t, d));
        let mut y = tape.add(y, pe);

        let mut causal = vec![false; t * t];
        for i in 0..t {
            for j in 0..=i {
                causal[i * t + j] = true;
            }
        }
        let cross_allowed = vec![true; t * n];

        let mut last_cross = None;
        for layer in &dec.layers {
            let g1 = bind.bind(tape, &self.store, layer.ln1_g);
            let b1 = bind.bind(tape, &self.store, layer.ln1_b);
            let normed = tape.layer_norm(y, g1, b1);
            let wq = bind.bind(tape, &self.store, layer.self_q);
            let wk = bind.bind(tape, &self.store, layer.self_k);
            let wv = bind.bind(tape, &self.store, layer.self_v);
            let (z, _) = multihead(tape, normed, normed, wq, wk, wv, &causal, heads, d);
            let ow = bind.bind(tape, &self.store, layer.self_out_w);
            let ob = bind.bind(tape, &self.store, layer.self_out_b);
            let z = tape.matmul(z, ow);
            let z = tape.add_bias(z, ob);
            let z = self.apply_dropout(tape, z, train, rng);
            y = tape.add(y, z);

            let g2 = bind.bind(tape, &self.store, layer.ln2_g);
            let b2 = bind.bind(tape, &self.store, layer.ln2_b);
            let normed = tape.layer_norm(y, g2, b2);
            let wq = bind.bind(tape, &self.store, layer.cross_q);
            let wk = bind.bind(tape, &self.store, layer.cross_k);
            let wv = bind.bind(tape, &self.store, layer.cross_v);
            let (z, attn) = multihead(tape, normed, memory, wq, wk, wv, &cross_allowed, heads, d);
            last_cross = Some(attn);
            let ow = bind.bind(tape, &self.store, layer.cross_out_w);
            let ob = bind.bind(tape, &self.store, layer.cross_out_b);
            let z = tape.matmul(z, ow);
            let z = tape.add_bias(z, ob);
            let z = self.apply_dropout(tape, z, train, rng);
            y = tape.add(y, z);

            let g3 = bind.bind(tape, &self.store, layer.ln3_g);
            let b3 = bind.bind(tape, &self.store, layer.ln3_b);
            let normed = tape.layer_norm(y, g3, b3);
            let w1 = bind.bind(tape, &self.store, layer.ffn_w1);
            let bb1 = bind.bind(tape, &self.store, layer.ffn_b1);
            let w2 = bind.bind(tape, &self.store, layer.ffn_w2);
            let bb2 = bind.bind(tape, &self.store, layer.ffn_b2);
            let f = tape.matmul(normed, w1);
            let f = tape.add_bias(f, bb1);
            let f = tape.relu(f);
            let f = tape.matmul(f, w2);
            let f = tape.add_bias(f, bb2);
            let f = self.apply_dropout(tape, f, train, rng);
            y = tape.add(y, f);
        }

        let g = bind.bind(tape, &self.store, dec.final_ln_g);
        let b = bind.bind(tape, &self.store, dec.final_ln_b);
        let hidden = tape.layer_norm(y, g, b);

        let ow = bind.bind(tape, &self.store, dec.out_w);
        let ob = bind.bind(tape, &self.store, dec.out_b);
        let logits = tape.matmul(hidden, ow);
        let logits = tape.add_bias(logits, ob);
        let vocab_dist = tape.masked_softmax(logits, vec![true; t * self.vocab_size]);

        if let (Some(gw), Some(gb)) = (dec.gate_w, dec.gate_b) {
            let cross = last_cross.ok_or_else(|| {
                ModelError::ConfigError("pointer decoder needs at least one layer".into())
            })?;
            let gw = bind.bind(tape, &self.store, gw);
            let gb = bind.bind(tape, &self.store, gb);
            let gpre = tape.matmul(hidden, gw);
            let gpre = tape.add_bias(gpre, gb);
            let gcol = tape.sigmoid(gpre);
            let gate = tape.reshape(gcol, &[t]);
            let probs = pointer_mix(tape, vocab_dist, cross, src_tokens, self.vocab_size, gate);
            Ok(DecoderOutput { probs, vocab_dist, copy_attn: Some(cross), gate: Some(gate), hidden })
        } else {
            Ok(DecoderOutput { probs: vocab_dist, vocab_dist, copy_attn: None, gate: None, hidden })
        }
    }

    /// Greedy decoding of a name for one sample. Returns predicted subtoken
    /// ids, without BOS/EOS.
    pub fn greedy_decode(
        &self,
        input: &EncoderInput,
        table: &[Vec<u32>],
        max_len: usize,
    ) -> Result<Vec<u32>> {
        let mut tape = Tape::new();
        let mut bind = Bindings::new();
        let used = crate::encoder::used_path_ids(input);
        let langs = std::collections::BTreeSet::from([input.language]);
        let ctx = self.prepare(&mut tape, &mut bind, table, &used, &langs)?;
        let mut rng = rand::SeedableRng::seed_from_u64(0);
        let memory = self.encode(&mut tape, &mut bind, input, &ctx, false, &mut rng)?;
        self.greedy_decode_with(&mut tape, &mut bind, memory, input.tokens, max_len)
    }

    /// Greedy decoding against an already-encoded memory.
    pub fn greedy_decode_with(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        memory: VarId,
        src_tokens: &[u32],
        max_len: usize,
    ) -> Result<Vec<u32>> {
        let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(0);
        let mut prefix = vec![specials::BOS];
        let mut out = Vec::new();
        for _ in 0..max_len {
            let step = self.decode_step(tape, bind, memory, src_tokens, &prefix, false, &mut rng)?;
            let probs = tape.value(step.probs);
            let last = probs.index_axis(ndarray::Axis(0), prefix.len() - 1);
            let mut best = 0usize;
            let mut best_p = f64::NEG_INFINITY;
            for (i, &p) in last.iter().enumerate() {
                if p > best_p {
                    best_p = p;
                    best = i;
                }
            }
            if best as u32 == specials::EOS {
                break;
            }
            out.push(best as u32);
            prefix.push(best as u32);
        }
        Ok(out)
    }

    /// Summarization training loss for one sample: mean negative
    /// log-likelihood of the gold subtokens plus EOS.
    #[allow(clippy::too_many_arguments)]
    pub fn summarization_loss(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        input: &EncoderInput,
        ctx: &ForwardContext,
        target: &[u32],
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<VarId> {
        let memory = self.encode(tape, bind, input, ctx, train, rng)?;
        let mut tgt_in = vec![specials::BOS];
        tgt_in.extend_from_slice(target);
        let step = self.decode_step(tape, bind, memory, input.tokens, &tgt_in, train, rng)?;
        let mut gold: Vec<Option<usize>> = target.iter().map(|&t| Some(t as usize)).collect();
        gold.push(Some(specials::EOS as usize));
        Ok(tape.nll_from_probs(step.probs, gold))
    }

    /// Completion training loss for one sample.
    #[allow(clippy::too_many_arguments)]
    pub fn completion_loss(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        input: &EncoderInput,
        ctx: &ForwardContext,
        mask_position: usize,
        answer: u32,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<VarId> {
        let logits =
            self.completion_logits(tape, bind, input, ctx, mask_position, train, rng)?;
        Ok(tape.softmax_cross_entropy(logits, vec![Some(answer as usize)]))
    }
}
