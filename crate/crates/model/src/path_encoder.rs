//! Fixed-size encoding of AST node-type paths.
//!
//! Each path is embedded per node type and run through a one-layer
//! bidirectional gated recurrent encoder; the two final hidden states are
//! concatenated and projected to the model dimension. The empty path
//! (table id 0, also the self path) encodes to the zero vector.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::params::{Bindings, ParamId, ParamStore};
use crate::tape::{Tape, VarId};

pub const DEFAULT_MAX_PATH_LEN: usize = 32;

struct GruCell {
    w_z: ParamId,
    u_z: ParamId,
    b_z: ParamId,
    w_r: ParamId,
    u_r: ParamId,
    b_r: ParamId,
    w_h: ParamId,
    u_h: ParamId,
    b_h: ParamId,
}

impl GruCell {
    fn init(prefix: &str, input: usize, hidden: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let mat = |name: &str, r: usize, c: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng| {
            store.add_glorot(&format!("{prefix}.{name}"), r, c, rng)
        };
        GruCell {
            w_z: mat("w_z", input, hidden, store, rng),
            u_z: mat("u_z", hidden, hidden, store, rng),
            b_z: store.add_zeros(&format!("{prefix}.b_z"), &[hidden]),
            w_r: mat("w_r", input, hidden, store, rng),
            u_r: mat("u_r", hidden, hidden, store, rng),
            b_r: store.add_zeros(&format!("{prefix}.b_r"), &[hidden]),
            w_h: mat("w_h", input, hidden, store, rng),
            u_h: mat("u_h", hidden, hidden, store, rng),
            b_h: store.add_zeros(&format!("{prefix}.b_h"), &[hidden]),
        }
    }

    /// One step: h' = (1 - z) .* n + z .* h with n the candidate state.
    fn step(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
        x: VarId,
        h: VarId,
    ) -> VarId {
        let wz = bind.bind(tape, store, self.w_z);
        let uz = bind.bind(tape, store, self.u_z);
        let bz = bind.bind(tape, store, self.b_z);
        let wr = bind.bind(tape, store, self.w_r);
        let ur = bind.bind(tape, store, self.u_r);
        let br = bind.bind(tape, store, self.b_r);
        let wh = bind.bind(tape, store, self.w_h);
        let uh = bind.bind(tape, store, self.u_h);
        let bh = bind.bind(tape, store, self.b_h);

        let xz = tape.matmul(x, wz);
        let hz = tape.matmul(h, uz);
        let zpre = tape.add(xz, hz);
        let zpre = tape.add_bias(zpre, bz);
        let z = tape.sigmoid(zpre);

        let xr = tape.matmul(x, wr);
        let hr = tape.matmul(h, ur);
        let rpre = tape.add(xr, hr);
        let rpre = tape.add_bias(rpre, br);
        let r = tape.sigmoid(rpre);

        let rh = tape.mul(r, h);
        let xn = tape.matmul(x, wh);
        let hn = tape.matmul(rh, uh);
        let npre = tape.add(xn, hn);
        let npre = tape.add_bias(npre, bh);
        let n = tape.tanh(npre);

        let zn = tape.neg(z);
        let one_minus_z = tape.add_scalar(zn, 1.0);
        let a = tape.mul(one_minus_z, n);
        let b = tape.mul(z, h);
        tape.add(a, b)
    }
}

pub struct PathEncoder {
    pub node_emb: ParamId,
    fwd: GruCell,
    bwd: GruCell,
    out_w: ParamId,
    out_b: ParamId,
    pub node_vocab: usize,
    pub d_node: usize,
    pub hidden: usize,
    pub d_model: usize,
    pub max_len: usize,
}

impl PathEncoder {
    pub fn init(
        prefix: &str,
        node_vocab: usize,
        d_node: usize,
        hidden: usize,
        d_model: usize,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let node_emb = store.add_uniform(&format!("{prefix}.node_emb"), &[node_vocab, d_node], 0.1, rng);
        // id 0 is the padding node type; its row stays zero.
        store.freeze_row(node_emb, 0);
        let fwd = GruCell::init(&format!("{prefix}.fwd"), d_node, hidden, store, rng);
        let bwd = GruCell::init(&format!("{prefix}.bwd"), d_node, hidden, store, rng);
        let out_w = store.add_glorot(&format!("{prefix}.out_w"), 2 * hidden, d_model, rng);
        let out_b = store.add_zeros(&format!("{prefix}.out_b"), &[d_model]);
        PathEncoder {
            node_emb,
            fwd,
            bwd,
            out_w,
            out_b,
            node_vocab,
            d_node,
            hidden,
            d_model,
            max_len: DEFAULT_MAX_PATH_LEN,
        }
    }

    /// Encode a batch of paths into a (batch, d_model) matrix. Empty paths
    /// encode to exactly zero. Paths are right-padded internally; padding
    /// never affects the result.
    pub fn encode_batch(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
        paths: &[Vec<u32>],
    ) -> Result<VarId> {
        let b = paths.len();
        assert!(b > 0, "encode_batch needs at least one path");
        let mut max_len = 0;
        for p in paths {
            if p.len() > self.max_len {
                return Err(ModelError::PathTooLong(p.len(), self.max_len));
            }
            for &id in p {
                if id as usize >= self.node_vocab {
                    return Err(ModelError::UnknownNodeType(id as usize, self.node_vocab));
                }
                if id == 0 {
                    return Err(ModelError::UnknownNodeType(0, self.node_vocab));
                }
            }
            max_len = max_len.max(p.len());
        }

        let nonempty: Vec<f64> = paths.iter().map(|p| if p.is_empty() { 0.0 } else { 1.0 }).collect();
        if max_len == 0 {
            return Ok(tape.leaf2(Array2::zeros((b, self.d_model))));
        }

        let emb = bind.bind(tape, store, self.node_emb);

        let run = |tape: &mut Tape, bind: &mut Bindings, cell: &GruCell, reverse: bool| {
            let mut h = tape.leaf2(Array2::zeros((b, self.hidden)));
            let steps: Vec<usize> = if reverse {
                (0..max_len).rev().collect()
            } else {
                (0..max_len).collect()
            };
            for t in steps {
                let ids: Vec<usize> =
                    paths.iter().map(|p| p.get(t).map(|&x| x as usize).unwrap_or(0)).collect();
                let active: Vec<f64> =
                    paths.iter().map(|p| if t < p.len() { 1.0 } else { 0.0 }).collect();
                let x = tape.gather_rows(emb, ids);
                let h_new = cell.step(tape, bind, store, x, h);
                if active.iter().all(|&a| a == 1.0) {
                    h = h_new;
                } else {
                    let m = tape.leaf1(ndarray::Array1::from(active.clone()));
                    let inv: Vec<f64> = active.iter().map(|a| 1.0 - a).collect();
                    let mi = tape.leaf1(ndarray::Array1::from(inv));
                    let kept = tape.scale_rows(h, mi);
                    let upd = tape.scale_rows(h_new, m);
                    h = tape.add(kept, upd);
                }
            }
            h
        };

        let hf = run(tape, bind, &self.fwd, false);
        let hb = run(tape, bind, &self.bwd, true);
        let cat = tape.concat_cols(hf, hb);
        let w = bind.bind(tape, store, self.out_w);
        let bias = bind.bind(tape, store, self.out_b);
        let proj = tape.matmul(cat, w);
        let proj = tape.add_bias(proj, bias);
        // Zero out rows for empty paths so the self path stays exactly zero.
        if nonempty.iter().any(|&m| m == 0.0) {
            let m = tape.leaf1(ndarray::Array1::from(nonempty));
            Ok(tape.scale_rows(proj, m))
        } else {
            Ok(proj)
        }
    }

    /// Encode one path to a d_model vector.
    pub fn encode_path(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
        path: &[u32],
    ) -> Result<VarId> {
        self.encode_batch(tape, bind, store, &[path.to_vec()])
    }
}
