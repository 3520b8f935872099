//! Model assembly: embeddings, the encoder stack, and task heads.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    attend_meta, AttentionInput, AttentionWeightSet, PositionTables, Slot, VariantRegistry,
};
use crate::decoder::DecoderParams;
use crate::error::{ModelError, Result};
use crate::meta::{MetaLearner, Scheme};
use crate::params::{Bindings, ParamId, ParamStore};
use crate::path_encoder::PathEncoder;
use crate::tape::{Tape, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Summarization,
    Completion,
}

fn default_max_seq() -> usize {
    512
}

fn default_max_path_len() -> usize {
    32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: Task,
    /// Attention variant name, resolved through the registry.
    pub variant: String,
    #[serde(default)]
    pub scheme: Scheme,
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    #[serde(default)]
    pub decoder_layers: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    pub word_emb_dim: usize,
    pub node_emb_dim: usize,
    pub path_hidden: usize,
    #[serde(default)]
    pub d_t: usize,
    #[serde(default)]
    pub d_p: usize,
    #[serde(default = "default_max_seq")]
    pub max_seq: usize,
    #[serde(default = "default_max_path_len")]
    pub max_path_len: usize,
    #[serde(default)]
    pub pointer: bool,
}

impl ModelConfig {
    /// Small configuration suitable for CPU experiments.
    pub fn desk(task: Task) -> Self {
        ModelConfig {
            task,
            variant: "path".into(),
            scheme: Scheme::None,
            d: 64,
            heads: 2,
            layers: 2,
            decoder_layers: 2,
            ffn_dim: 128,
            dropout: 0.0,
            word_emb_dim: 64,
            node_emb_dim: 32,
            path_hidden: 32,
            d_t: 64,
            d_p: 128,
            max_seq: 512,
            max_path_len: 32,
            pointer: task == Task::Summarization,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d % self.heads != 0 {
            return Err(ModelError::ConfigError(format!(
                "head count {} must be nonzero and divide d = {}",
                self.heads, self.d
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::ConfigError("dropout must be in [0, 1)".into()));
        }
        if self.scheme != Scheme::None && self.variant != "path" {
            return Err(ModelError::ConfigError(
                "weight generation schemes require the path attention variant".into(),
            ));
        }
        if self.scheme != Scheme::None && (self.d_t == 0 || self.d_p == 0) {
            return Err(ModelError::ConfigError("d_t and d_p must be set for schemes".into()));
        }
        if self.task == Task::Summarization && self.decoder_layers == 0 {
            return Err(ModelError::ConfigError("summarization requires decoder layers".into()));
        }
        if self.max_seq > 512 {
            return Err(ModelError::ConfigError("token sequences are capped at 512".into()));
        }
        Ok(())
    }
}

/// Special token ids, fixed by the dataset vocabulary layout.
pub mod specials {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;
    pub const MASK: u32 = 2;
    pub const BOS: u32 = 3;
    pub const EOS: u32 = 4;
    pub const NAME: u32 = 5;
    pub const COUNT: u32 = 6;
}

pub struct EncoderLayer {
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
    pub attn: [ParamId; 7],
    pub attn_out_w: ParamId,
    pub attn_out_b: ParamId,
    pub ffn_w1: ParamId,
    pub ffn_b1: ParamId,
    pub ffn_w2: ParamId,
    pub ffn_b2: ParamId,
}

impl EncoderLayer {
    fn init(prefix: &str, d: usize, ffn: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let ones = |name: String, store: &mut ParamStore| {
            store.add(&name, ndarray::ArrayD::ones(ndarray::IxDyn(&[d])))
        };
        let attn = Slot::ALL
            .iter()
            .map(|s| store.add_glorot(&format!("{prefix}.attn.{}", s.key()), d, d, rng))
            .collect::<Vec<_>>();
        EncoderLayer {
            ln1_g: ones(format!("{prefix}.ln1_g"), store),
            ln1_b: store.add_zeros(&format!("{prefix}.ln1_b"), &[d]),
            ln2_g: ones(format!("{prefix}.ln2_g"), store),
            ln2_b: store.add_zeros(&format!("{prefix}.ln2_b"), &[d]),
            attn: attn.try_into().unwrap(),
            attn_out_w: store.add_glorot(&format!("{prefix}.attn_out_w"), d, d, rng),
            attn_out_b: store.add_zeros(&format!("{prefix}.attn_out_b"), &[d]),
            ffn_w1: store.add_glorot(&format!("{prefix}.ffn_w1"), d, ffn, rng),
            ffn_b1: store.add_zeros(&format!("{prefix}.ffn_b1"), &[ffn]),
            ffn_w2: store.add_glorot(&format!("{prefix}.ffn_w2"), ffn, d, rng),
            ffn_b2: store.add_zeros(&format!("{prefix}.ffn_b2"), &[d]),
        }
    }

    pub fn static_set(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
    ) -> AttentionWeightSet {
        let mats: Vec<VarId> = self.attn.iter().map(|&p| bind.bind(tape, store, p)).collect();
        AttentionWeightSet::from_static(mats.try_into().unwrap())
    }
}

pub enum Head {
    Completion { out_w: ParamId, out_b: ParamId },
    Summarization(DecoderParams),
}

pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub registry: VariantRegistry,
    pub vocab_size: usize,
    pub node_vocab: usize,
    pub n_languages: usize,
    pub word_emb: ParamId,
    emb_proj_w: ParamId,
    emb_proj_b: ParamId,
    pub path_encoder: Option<PathEncoder>,
    pub positions: Option<PositionTables>,
    pub layers: Vec<EncoderLayer>,
    final_ln_g: ParamId,
    final_ln_b: ParamId,
    pub meta: Option<MetaLearner>,
    pub head: Head,
}

/// Per-tape reusable state: encoded paths and per-language weight sets.
pub struct ForwardContext {
    pub paths: Option<PathContext>,
    pub static_sets: Vec<AttentionWeightSet>,
    pub generated_by_lang: BTreeMap<usize, Vec<AttentionWeightSet>>,
}

pub struct PathContext {
    pub encoded: VarId,
    index: BTreeMap<u32, usize>,
}

impl PathContext {
    pub fn row_of(&self, id: u32) -> Result<usize> {
        self.index.get(&id).copied().ok_or_else(|| {
            ModelError::DimensionMismatch(format!("path id {id} missing from encoded context"))
        })
    }
}

/// One sample's encoder-side input.
pub struct EncoderInput<'a> {
    pub language: usize,
    pub tokens: &'a [u32],
    /// Row-major (n*n) table ids for relative paths; empty for non-path variants.
    pub rel_ids: &'a [u32],
    /// Per-position table ids for root paths; empty for non-path variants.
    pub abs_ids: &'a [u32],
}

impl Model {
    pub fn init(
        config: ModelConfig,
        vocab_size: usize,
        node_vocab: usize,
        n_languages: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let word_emb = store.add_uniform("embed.word", &[vocab_size, config.word_emb_dim], 0.1, &mut rng);
        store.freeze_row(word_emb, specials::PAD as usize);
        let emb_proj_w = store.add_glorot("embed.proj_w", config.word_emb_dim, config.d, &mut rng);
        let emb_proj_b = store.add_zeros("embed.proj_b", &[config.d]);

        let needs_paths = config.variant == "path";
        let mut path_encoder = None;
        if needs_paths {
            let mut pe = PathEncoder::init(
                "path_enc",
                node_vocab,
                config.node_emb_dim,
                config.path_hidden,
                config.d,
                &mut store,
                &mut rng,
            );
            pe.max_len = config.max_path_len;
            path_encoder = Some(pe);
        }
        let positions = if config.variant == "abs_pos" || config.variant == "rel_pos" {
            Some(PositionTables::init("pos", config.max_seq, config.d, &mut store, &mut rng))
        } else {
            None
        };

        let mut layers = Vec::with_capacity(config.layers);
        for i in 0..config.layers {
            layers.push(EncoderLayer::init(
                &format!("enc.layer{i}"),
                config.d,
                config.ffn_dim,
                &mut store,
                &mut rng,
            ));
        }
        let final_ln_g = store.add("enc.final_ln_g", ndarray::ArrayD::ones(ndarray::IxDyn(&[config.d])));
        let final_ln_b = store.add_zeros("enc.final_ln_b", &[config.d]);

        let meta = if config.scheme != Scheme::None {
            Some(MetaLearner::init(
                config.scheme,
                config.layers,
                n_languages,
                config.d_t,
                config.d_p,
                config.d,
                &mut store,
                &mut rng,
            ))
        } else {
            None
        };

        let head = match config.task {
            Task::Completion => Head::Completion {
                out_w: store.add_glorot("head.out_w", config.d, vocab_size, &mut rng),
                out_b: store.add_zeros("head.out_b", &[vocab_size]),
            },
            Task::Summarization => Head::Summarization(DecoderParams::init(
                "dec",
                &config,
                vocab_size,
                &mut store,
                &mut rng,
            )),
        };

        Ok(Model {
            config,
            store,
            registry: VariantRegistry::builtin(),
            vocab_size,
            node_vocab,
            n_languages,
            word_emb,
            emb_proj_w,
            emb_proj_b,
            path_encoder,
            positions,
            layers,
            final_ln_g,
            final_ln_b,
            meta,
            head,
        })
    }

    /// Rebuild a model around a loaded parameter store. Parameter names must
    /// match the freshly initialized layout exactly.
    pub fn with_store(
        config: ModelConfig,
        vocab_size: usize,
        node_vocab: usize,
        n_languages: usize,
        store: ParamStore,
    ) -> Result<Self> {
        let mut model = Model::init(config, vocab_size, node_vocab, n_languages, 0)?;
        if model.store.len() != store.len() {
            return Err(ModelError::ConfigError(format!(
                "checkpoint has {} parameters, model expects {}",
                store.len(),
                model.store.len()
            )));
        }
        for (id, p) in model.store.iter() {
            let loaded = store.get(id);
            if loaded.name != p.name || loaded.value.shape() != p.value.shape() {
                return Err(ModelError::ConfigError(format!(
                    "checkpoint parameter {} does not match model layout",
                    loaded.name
                )));
            }
        }
        model.store = store;
        Ok(model)
    }

    /// Encode the paths used by a batch once so every sample can share them.
    pub fn prepare_paths(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        table: &[Vec<u32>],
        used: &BTreeSet<u32>,
    ) -> Result<PathContext> {
        let encoder = self.path_encoder.as_ref().ok_or_else(|| {
            ModelError::ConfigError("model variant does not use path encodings".into())
        })?;
        let mut ids: Vec<u32> = used.iter().copied().collect();
        if !ids.contains(&0) {
            ids.insert(0, 0);
        }
        let mut paths = Vec::with_capacity(ids.len());
        for &id in &ids {
            let entry = table.get(id as usize).ok_or_else(|| {
                ModelError::DimensionMismatch(format!("path id {id} out of table range"))
            })?;
            paths.push(entry.clone());
        }
        let encoded = encoder.encode_batch(tape, bind, &self.store, &paths)?;
        let index = ids.iter().enumerate().map(|(row, &id)| (id, row)).collect();
        Ok(PathContext { encoded, index })
    }

    /// Bind static weight sets and generate per-language sets for one tape.
    pub fn prepare(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        table: &[Vec<u32>],
        used_paths: &BTreeSet<u32>,
        languages: &BTreeSet<usize>,
    ) -> Result<ForwardContext> {
        let paths = if self.path_encoder.is_some() {
            Some(self.prepare_paths(tape, bind, table, used_paths)?)
        } else {
            None
        };
        let static_sets: Vec<AttentionWeightSet> =
            self.layers.iter().map(|l| l.static_set(tape, bind, &self.store)).collect();
        let mut generated_by_lang = BTreeMap::new();
        if let Some(meta) = &self.meta {
            for &lang in languages {
                let projected = meta.project_language(tape, bind, &self.store, lang)?;
                let sets = (0..self.layers.len())
                    .map(|layer| {
                        meta.weight_set_for(
                            tape,
                            bind,
                            &self.store,
                            layer,
                            projected,
                            &static_sets[layer],
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                generated_by_lang.insert(lang, sets);
            }
        }
        Ok(ForwardContext { paths, static_sets, generated_by_lang })
    }

    pub(crate) fn emb_proj(&self, tape: &mut Tape, bind: &mut Bindings) -> (VarId, VarId) {
        (bind.bind(tape, &self.store, self.emb_proj_w), bind.bind(tape, &self.store, self.emb_proj_b))
    }

    pub(crate) fn apply_dropout(
        &self,
        tape: &mut Tape,
        x: VarId,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> VarId {
        let p = self.config.dropout;
        if !train || p == 0.0 {
            return x;
        }
        let shape = tape.value(x).raw_dim();
        let keep = 1.0 - p;
        let mask = ndarray::ArrayD::from_shape_fn(shape, |_| {
            if rng.gen_range(0.0..1.0) < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let m = tape.leaf(mask);
        tape.mul(x, m)
    }

    /// Project token embeddings to the model dimension, adding sinusoidal
    /// positions only in vanilla mode (paths or learned tables carry
    /// position everywhere else).
    pub fn embed_tokens(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        tokens: &[u32],
    ) -> Result<VarId> {
        if tokens.len() > self.config.max_seq {
            return Err(ModelError::ConfigError(format!(
                "sequence length {} exceeds cap {}",
                tokens.len(),
                self.config.max_seq
            )));
        }
        for &t in tokens {
            if t as usize >= self.vocab_size {
                return Err(ModelError::DimensionMismatch(format!("token id {t} out of vocab")));
            }
        }
        let emb = bind.bind(tape, &self.store, self.word_emb);
        let rows = tape.gather_rows(emb, tokens.iter().map(|&t| t as usize).collect());
        let w = bind.bind(tape, &self.store, self.emb_proj_w);
        let b = bind.bind(tape, &self.store, self.emb_proj_b);
        let x = tape.matmul(rows, w);
        let mut x = tape.add_bias(x, b);
        if self.config.variant == "vanilla" {
            let pe = tape.leaf2(sinusoidal_positions(tokens.len(), self.config.d));
            x = tape.add(x, pe);
        }
        Ok(x)
    }

    /// Full encoder stack over one sample.
    pub fn encode(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        input: &EncoderInput,
        ctx: &ForwardContext,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<VarId> {
        let n = input.tokens.len();
        if input.language >= self.n_languages {
            return Err(ModelError::UnknownLanguage(input.language));
        }
        let mut x = self.embed_tokens(tape, bind, input.tokens)?;
        // Zero layers: the projected embeddings pass through untouched.
        if self.layers.is_empty() {
            return Ok(x);
        }
        let needs_paths = self.path_encoder.is_some();
        let (rel, abs) = if needs_paths {
            let paths = ctx.paths.as_ref().ok_or_else(|| {
                ModelError::ConfigError("forward context is missing path encodings".into())
            })?;
            if input.rel_ids.len() != n * n || input.abs_ids.len() != n {
                return Err(ModelError::DimensionMismatch(
                    "path id matrices do not match sequence length".into(),
                ));
            }
            let rel_rows = input
                .rel_ids
                .iter()
                .map(|&id| paths.row_of(id))
                .collect::<Result<Vec<_>>>()?;
            let abs_rows = input
                .abs_ids
                .iter()
                .map(|&id| paths.row_of(id))
                .collect::<Result<Vec<_>>>()?;
            let rel = tape.gather_rows(paths.encoded, rel_rows);
            let abs = tape.gather_rows(paths.encoded, abs_rows);
            (Some(rel), Some(abs))
        } else {
            (None, None)
        };

        let pos_vars = match &self.positions {
            Some(tables) => Some(tables.bind(tape, bind, &self.store, n)?),
            None => None,
        };
        let variant = self.registry.get(&self.config.variant)?;

        for (layer_idx, layer) in self.layers.iter().enumerate() {
            let g1 = bind.bind(tape, &self.store, layer.ln1_g);
            let b1 = bind.bind(tape, &self.store, layer.ln1_b);
            let normed = tape.layer_norm(x, g1, b1);
            let attn_input = AttentionInput {
                x: normed,
                n,
                pad_mask: vec![true; n],
                attn_mask: None,
                rel,
                abs,
            };
            let z = match (&self.meta, self.config.scheme) {
                (Some(_), scheme) if scheme != Scheme::None => {
                    let generated = ctx
                        .generated_by_lang
                        .get(&input.language)
                        .ok_or(ModelError::UnknownLanguage(input.language))?;
                    attend_meta(
                        tape,
                        &attn_input,
                        &ctx.static_sets[layer_idx],
                        &generated[layer_idx],
                        self.config.scheme,
                        self.config.heads,
                    )?
                }
                _ => variant.attend(
                    tape,
                    &attn_input,
                    &ctx.static_sets[layer_idx],
                    pos_vars.as_ref(),
                    self.config.heads,
                )?,
            };
            let ow = bind.bind(tape, &self.store, layer.attn_out_w);
            let ob = bind.bind(tape, &self.store, layer.attn_out_b);
            let z = tape.matmul(z, ow);
            let z = tape.add_bias(z, ob);
            let z = self.apply_dropout(tape, z, train, rng);
            x = tape.add(x, z);

            let g2 = bind.bind(tape, &self.store, layer.ln2_g);
            let b2 = bind.bind(tape, &self.store, layer.ln2_b);
            let normed = tape.layer_norm(x, g2, b2);
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
            x = tape.add(x, f);
        }

        let g = bind.bind(tape, &self.store, self.final_ln_g);
        let b = bind.bind(tape, &self.store, self.final_ln_b);
        Ok(tape.layer_norm(x, g, b))
    }

    /// Logits over the subtoken vocabulary from the encoder vector at the
    /// masked position.
    pub fn completion_logits(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        input: &EncoderInput,
        ctx: &ForwardContext,
        mask_position: usize,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<VarId> {
        let Head::Completion { out_w, out_b } = &self.head else {
            return Err(ModelError::ConfigError("model has no completion head".into()));
        };
        if input.tokens.get(mask_position) != Some(&specials::MASK) {
            return Err(ModelError::BadMaskPosition(mask_position));
        }
        let enc = self.encode(tape, bind, input, ctx, train, rng)?;
        let row = tape.gather_rows(enc, vec![mask_position]);
        let w = bind.bind(tape, &self.store, *out_w);
        let b = bind.bind(tape, &self.store, *out_b);
        let logits = tape.matmul(row, w);
        Ok(tape.add_bias(logits, b))
    }

    pub fn decoder(&self) -> Result<&DecoderParams> {
        match &self.head {
            Head::Summarization(dec) => Ok(dec),
            _ => Err(ModelError::ConfigError("model has no decoder head".into())),
        }
    }

    /// Mean-pooled final encoder vector for one sample, for embedding export.
    pub fn pooled_embedding(
        &self,
        input: &EncoderInput,
        table: &[Vec<u32>],
    ) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let mut bind = Bindings::new();
        let used = used_path_ids(input);
        let langs = BTreeSet::from([input.language]);
        let ctx = self.prepare(&mut tape, &mut bind, table, &used, &langs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = self.encode(&mut tape, &mut bind, input, &ctx, false, &mut rng)?;
        let v = tape.value(enc);
        let n = input.tokens.len() as f64;
        let d = self.config.d;
        let mut pooled = vec![0.0; d];
        for row in v.outer_iter() {
            for (i, &x) in row.iter().enumerate() {
                pooled[i] += x / n;
            }
        }
        Ok(pooled)
    }
}

/// The set of path-table ids one sample references.
pub fn used_path_ids(input: &EncoderInput) -> BTreeSet<u32> {
    input.rel_ids.iter().chain(input.abs_ids.iter()).copied().collect()
}

pub fn sinusoidal_positions(n: usize, d: usize) -> Array2<f64> {
    let mut pe = Array2::zeros((n, d));
    for pos in 0..n {
        for i in 0..d / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / d as f64);
            pe[[pos, 2 * i]] = (pos as f64 * freq).sin();
            pe[[pos, 2 * i + 1]] = (pos as f64 * freq).cos();
        }
    }
    pe
}
