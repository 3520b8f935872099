//! Multi-head self-attention variants.
//!
//! Every variant implements [`AttentionVariant`] and is registered by name
//! in a [`VariantRegistry`]; the active variant is selected at runtime from
//! the model configuration. The path-biased variant consumes per-pair and
//! per-position AST path encodings in place of position embeddings.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::meta::Scheme;
use crate::params::{Bindings, ParamId, ParamStore};
use crate::tape::{Tape, VarId};

/// The seven projection slots of one attention layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Q,
    K,
    V,
    RelK,
    RelV,
    AbsQ,
    AbsK,
}

impl Slot {
    pub const ALL: &'static [Slot] =
        &[Slot::Q, Slot::K, Slot::V, Slot::RelK, Slot::RelV, Slot::AbsQ, Slot::AbsK];

    pub fn index(self) -> usize {
        match self {
            Slot::Q => 0,
            Slot::K => 1,
            Slot::V => 2,
            Slot::RelK => 3,
            Slot::RelV => 4,
            Slot::AbsQ => 5,
            Slot::AbsK => 6,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Slot::Q => "q",
            Slot::K => "k",
            Slot::V => "v",
            Slot::RelK => "rel_k",
            Slot::RelV => "rel_v",
            Slot::AbsQ => "abs_q",
            Slot::AbsK => "abs_k",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightTag {
    Static,
    Generated,
}

/// The seven d x d projections in force for one layer, each on the tape.
#[derive(Clone)]
pub struct AttentionWeightSet {
    mats: [VarId; 7],
    tags: [WeightTag; 7],
}

impl AttentionWeightSet {
    pub fn from_static(mats: [VarId; 7]) -> Self {
        AttentionWeightSet { mats, tags: [WeightTag::Static; 7] }
    }

    pub fn get(&self, slot: Slot) -> VarId {
        self.mats[slot.index()]
    }

    pub fn tag(&self, slot: Slot) -> WeightTag {
        self.tags[slot.index()]
    }

    pub fn set(&mut self, slot: Slot, var: VarId, tag: WeightTag) {
        self.mats[slot.index()] = var;
        self.tags[slot.index()] = tag;
    }
}

/// Learned absolute-position vectors with their projections, and clipped
/// relative-offset embeddings.
pub struct PositionTables {
    pub abs_emb: ParamId,
    pub u_q: ParamId,
    pub u_k: ParamId,
    pub rel_k: ParamId,
    pub rel_v: ParamId,
    pub max_pos: usize,
    pub clip: usize,
}

pub const REL_OFFSET_CLIP: usize = 32;

impl PositionTables {
    pub fn init(
        prefix: &str,
        max_pos: usize,
        d: usize,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let clip = REL_OFFSET_CLIP;
        PositionTables {
            abs_emb: store.add_uniform(&format!("{prefix}.abs_emb"), &[max_pos, d], 0.1, rng),
            u_q: store.add_glorot(&format!("{prefix}.u_q"), d, d, rng),
            u_k: store.add_glorot(&format!("{prefix}.u_k"), d, d, rng),
            rel_k: store.add_uniform(&format!("{prefix}.rel_k"), &[2 * clip + 1, d], 0.1, rng),
            rel_v: store.add_uniform(&format!("{prefix}.rel_v"), &[2 * clip + 1, d], 0.1, rng),
            max_pos,
            clip,
        }
    }

    /// Materialize position vectors for a length-n sequence on the tape.
    pub fn bind(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
        n: usize,
    ) -> Result<PositionVars> {
        if n > self.max_pos {
            return Err(ModelError::DimensionMismatch(format!(
                "sequence length {n} exceeds position table size {}",
                self.max_pos
            )));
        }
        let abs_table = bind.bind(tape, store, self.abs_emb);
        let p = tape.gather_rows(abs_table, (0..n).collect());
        let clip = self.clip as i64;
        let mut ids = Vec::with_capacity(n * n);
        for i in 0..n as i64 {
            for j in 0..n as i64 {
                ids.push(((j - i).clamp(-clip, clip) + clip) as usize);
            }
        }
        let rel_k_table = bind.bind(tape, store, self.rel_k);
        let rel_v_table = bind.bind(tape, store, self.rel_v);
        let rel_k = tape.gather_rows(rel_k_table, ids.clone());
        let rel_v = tape.gather_rows(rel_v_table, ids);
        let u_q = bind.bind(tape, store, self.u_q);
        let u_k = bind.bind(tape, store, self.u_k);
        Ok(PositionVars { p, u_q, u_k, rel_k, rel_v })
    }
}

pub struct PositionVars {
    pub p: VarId,
    pub u_q: VarId,
    pub u_k: VarId,
    /// (n*n, d) relative-offset key embeddings, row-major by (i, j).
    pub rel_k: VarId,
    pub rel_v: VarId,
}

/// Input to one self-attention call.
pub struct AttentionInput {
    pub x: VarId,
    pub n: usize,
    /// True for valid (attendable) positions.
    pub pad_mask: Vec<bool>,
    /// Optional extra row-major (n*n) mask, e.g. causal; true = allowed.
    pub attn_mask: Option<Vec<bool>>,
    /// (n*n, d) relative path encodings; row i*n+j is r_ij. R[i][i] is zero.
    pub rel: Option<VarId>,
    /// (n, d) absolute path encodings.
    pub abs: Option<VarId>,
}

impl AttentionInput {
    pub fn new(x: VarId, n: usize) -> Self {
        AttentionInput { x, n, pad_mask: vec![true; n], attn_mask: None, rel: None, abs: None }
    }

    fn allowed(&self) -> Result<Vec<bool>> {
        let n = self.n;
        let mut allowed = vec![false; n * n];
        for i in 0..n {
            let mut any = false;
            for j in 0..n {
                let ok = self.pad_mask[j]
                    && self.attn_mask.as_ref().map_or(true, |m| m[i * n + j]);
                allowed[i * n + j] = ok;
                any |= ok;
            }
            if !any {
                return Err(ModelError::AllMasked(i));
            }
        }
        Ok(allowed)
    }
}

fn dims(tape: &Tape, x: VarId, heads: usize) -> Result<(usize, usize)> {
    let shape = tape.value(x).shape().to_vec();
    let d = shape[1];
    if d % heads != 0 {
        return Err(ModelError::DimensionMismatch(format!(
            "head count {heads} does not divide model dimension {d}"
        )));
    }
    Ok((d, d / heads))
}

fn concat_heads(tape: &mut Tape, heads: Vec<VarId>) -> VarId {
    let mut it = heads.into_iter();
    let first = it.next().expect("at least one head");
    it.fold(first, |acc, h| tape.concat_cols(acc, h))
}

/// One interchangeable attention algorithm.
pub trait AttentionVariant {
    fn name(&self) -> &'static str;

    /// Whether this variant consumes AST path encodings.
    fn needs_paths(&self) -> bool {
        false
    }

    /// Whether this variant consumes learned position tables.
    fn needs_positions(&self) -> bool {
        false
    }

    fn attend(
        &self,
        tape: &mut Tape,
        input: &AttentionInput,
        weights: &AttentionWeightSet,
        positions: Option<&PositionVars>,
        heads: usize,
    ) -> Result<VarId>;
}

/// Content-only scaled dot-product attention.
pub struct Vanilla;

impl AttentionVariant for Vanilla {
    fn name(&self) -> &'static str {
        "vanilla"
    }

    fn attend(
        &self,
        tape: &mut Tape,
        input: &AttentionInput,
        weights: &AttentionWeightSet,
        _positions: Option<&PositionVars>,
        heads: usize,
    ) -> Result<VarId> {
        let (_, dh) = dims(tape, input.x, heads)?;
        let allowed = input.allowed()?;
        let q = tape.matmul(input.x, weights.get(Slot::Q));
        let k = tape.matmul(input.x, weights.get(Slot::K));
        let v = tape.matmul(input.x, weights.get(Slot::V));
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (s, e) = (h * dh, (h + 1) * dh);
            let qh = tape.slice_cols(q, s, e);
            let kh = tape.slice_cols(k, s, e);
            let vh = tape.slice_cols(v, s, e);
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt);
            let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
            let attn = tape.masked_softmax(scores, allowed.clone());
            outs.push(tape.matmul(attn, vh));
        }
        Ok(concat_heads(tape, outs))
    }
}

/// Content attention plus a learned projected absolute-position score term.
pub struct AbsolutePosition;

impl AttentionVariant for AbsolutePosition {
    fn name(&self) -> &'static str {
        "abs_pos"
    }

    fn needs_positions(&self) -> bool {
        true
    }

    fn attend(
        &self,
        tape: &mut Tape,
        input: &AttentionInput,
        weights: &AttentionWeightSet,
        positions: Option<&PositionVars>,
        heads: usize,
    ) -> Result<VarId> {
        let pos = positions.ok_or_else(|| {
            ModelError::ConfigError("abs_pos attention requires position tables".into())
        })?;
        let (_, dh) = dims(tape, input.x, heads)?;
        let allowed = input.allowed()?;
        let q = tape.matmul(input.x, weights.get(Slot::Q));
        let k = tape.matmul(input.x, weights.get(Slot::K));
        let v = tape.matmul(input.x, weights.get(Slot::V));
        let pq = tape.matmul(pos.p, pos.u_q);
        let pk = tape.matmul(pos.p, pos.u_k);
        let scale = 1.0 / (2.0 * dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (s, e) = (h * dh, (h + 1) * dh);
            let qh = tape.slice_cols(q, s, e);
            let kh = tape.slice_cols(k, s, e);
            let vh = tape.slice_cols(v, s, e);
            let pqh = tape.slice_cols(pq, s, e);
            let pkh = tape.slice_cols(pk, s, e);
            let kt = tape.transpose(kh);
            let content = tape.matmul(qh, kt);
            let pkt = tape.transpose(pkh);
            let positional = tape.matmul(pqh, pkt);
            let scores = tape.add(content, positional);
            let scores = tape.scale(scores, scale);
            let attn = tape.masked_softmax(scores, allowed.clone());
            outs.push(tape.matmul(attn, vh));
        }
        Ok(concat_heads(tape, outs))
    }
}

/// Attention with clipped relative-offset embeddings on keys and values.
pub struct RelativePosition;

impl AttentionVariant for RelativePosition {
    fn name(&self) -> &'static str {
        "rel_pos"
    }

    fn needs_positions(&self) -> bool {
        true
    }

    fn attend(
        &self,
        tape: &mut Tape,
        input: &AttentionInput,
        weights: &AttentionWeightSet,
        positions: Option<&PositionVars>,
        heads: usize,
    ) -> Result<VarId> {
        let pos = positions.ok_or_else(|| {
            ModelError::ConfigError("rel_pos attention requires position tables".into())
        })?;
        let (_, dh) = dims(tape, input.x, heads)?;
        let allowed = input.allowed()?;
        let q = tape.matmul(input.x, weights.get(Slot::Q));
        let k = tape.matmul(input.x, weights.get(Slot::K));
        let v = tape.matmul(input.x, weights.get(Slot::V));
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (s, e) = (h * dh, (h + 1) * dh);
            let qh = tape.slice_cols(q, s, e);
            let kh = tape.slice_cols(k, s, e);
            let vh = tape.slice_cols(v, s, e);
            let rkh = tape.slice_cols(pos.rel_k, s, e);
            let rvh = tape.slice_cols(pos.rel_v, s, e);
            let kt = tape.transpose(kh);
            let content = tape.matmul(qh, kt);
            let relational = tape.pair_dot(qh, rkh);
            let scores = tape.add(content, relational);
            let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
            let attn = tape.masked_softmax(scores, allowed.clone());
            let zc = tape.matmul(attn, vh);
            let zr = tape.pair_mix(attn, rvh);
            outs.push(tape.add(zc, zr));
        }
        Ok(concat_heads(tape, outs))
    }
}

/// Attention biased by encoded relative and absolute AST paths.
pub struct PathBiased;

impl AttentionVariant for PathBiased {
    fn name(&self) -> &'static str {
        "path"
    }

    fn needs_paths(&self) -> bool {
        true
    }

    fn attend(
        &self,
        tape: &mut Tape,
        input: &AttentionInput,
        weights: &AttentionWeightSet,
        _positions: Option<&PositionVars>,
        heads: usize,
    ) -> Result<VarId> {
        let rel = input.rel.ok_or_else(|| {
            ModelError::DimensionMismatch("path attention requires relative path encodings".into())
        })?;
        let abs = input.abs.ok_or_else(|| {
            ModelError::DimensionMismatch("path attention requires absolute path encodings".into())
        })?;
        let (d, dh) = dims(tape, input.x, heads)?;
        let n = input.n;
        if tape.value(rel).shape() != [n * n, d] {
            return Err(ModelError::DimensionMismatch(format!(
                "relative path encodings must be ({}, {d})",
                n * n
            )));
        }
        if tape.value(abs).shape() != [n, d] {
            return Err(ModelError::DimensionMismatch(format!(
                "absolute path encodings must be ({n}, {d})"
            )));
        }
        let allowed = input.allowed()?;
        let q = tape.matmul(input.x, weights.get(Slot::Q));
        let k = tape.matmul(input.x, weights.get(Slot::K));
        let v = tape.matmul(input.x, weights.get(Slot::V));
        let rk = tape.matmul(rel, weights.get(Slot::RelK));
        let rv = tape.matmul(rel, weights.get(Slot::RelV));
        let aq = tape.matmul(abs, weights.get(Slot::AbsQ));
        let ak = tape.matmul(abs, weights.get(Slot::AbsK));
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (s, e) = (h * dh, (h + 1) * dh);
            let qh = tape.slice_cols(q, s, e);
            let kh = tape.slice_cols(k, s, e);
            let vh = tape.slice_cols(v, s, e);
            let rkh = tape.slice_cols(rk, s, e);
            let rvh = tape.slice_cols(rv, s, e);
            let aqh = tape.slice_cols(aq, s, e);
            let akh = tape.slice_cols(ak, s, e);
            let kt = tape.transpose(kh);
            let content = tape.matmul(qh, kt);
            let relational = tape.pair_dot(qh, rkh);
            let akt = tape.transpose(akh);
            let absolute = tape.matmul(aqh, akt);
            let sum = tape.add(content, relational);
            let sum = tape.add(sum, absolute);
            let scores = tape.scale(sum, scale);
            let attn = tape.masked_softmax(scores, allowed.clone());
            let zc = tape.matmul(attn, vh);
            let zr = tape.pair_mix(attn, rvh);
            outs.push(tape.add(zc, zr));
        }
        Ok(concat_heads(tape, outs))
    }
}

/// Path-biased attention under a generated weight set. `generated` must come
/// from `MetaLearner::weight_set_for` with the same scheme: its tags must
/// mark exactly the scheme's slot set as generated.
pub fn attend_meta(
    tape: &mut Tape,
    input: &AttentionInput,
    static_set: &AttentionWeightSet,
    generated: &AttentionWeightSet,
    scheme: Scheme,
    heads: usize,
) -> Result<VarId> {
    let mut merged = static_set.clone();
    for slot in Slot::ALL {
        let expect = if scheme.generates(*slot) { WeightTag::Generated } else { WeightTag::Static };
        if generated.tag(*slot) != expect {
            return Err(ModelError::SchemeMismatch(scheme.name().to_string()));
        }
        if scheme.generates(*slot) {
            merged.set(*slot, generated.get(*slot), WeightTag::Generated);
        }
    }
    PathBiased.attend(tape, input, &merged, None, heads)
}

/// Name-indexed registry of attention variants.
pub struct VariantRegistry {
    variants: BTreeMap<&'static str, Box<dyn AttentionVariant + Send + Sync>>,
}

impl VariantRegistry {
    /// Registry holding all built-in variants.
    pub fn builtin() -> Self {
        let mut registry = VariantRegistry { variants: BTreeMap::new() };
        registry.register(Box::new(Vanilla));
        registry.register(Box::new(AbsolutePosition));
        registry.register(Box::new(RelativePosition));
        registry.register(Box::new(PathBiased));
        registry
    }

    pub fn register(&mut self, variant: Box<dyn AttentionVariant + Send + Sync>) {
        self.variants.insert(variant.name(), variant);
    }

    pub fn get(&self, name: &str) -> Result<&(dyn AttentionVariant + Send + Sync)> {
        self.variants
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| ModelError::ConfigError(format!("unknown attention variant {name:?}")))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.variants.keys().copied().collect()
    }
}
