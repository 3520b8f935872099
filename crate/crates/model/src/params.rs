//! Named parameter storage, gradient accumulation, and the Adam optimizer.

use ndarray::ArrayD;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::tape::{Tape, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: ArrayD<f64>,
    /// Rows never touched by the optimizer (padding embedding rows).
    pub frozen_rows: Vec<usize>,
}

#[derive(Clone, Serialize, Deserialize, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: ArrayD<f64>) -> ParamId {
        assert!(!self.by_name.contains_key(name), "duplicate parameter {name}");
        let id = self.params.len();
        self.by_name.insert(name.to_string(), id);
        self.params.push(Param { name: name.to_string(), value, frozen_rows: vec![] });
        ParamId(id)
    }

    /// Uniform init in [-scale, scale], the usual small-embedding scheme.
    pub fn add_uniform(
        &mut self,
        name: &str,
        shape: &[usize],
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        self.add(name, ArrayD::from_shape_vec(ndarray::IxDyn(shape), data).unwrap())
    }

    /// Glorot-style init for projection matrices.
    pub fn add_glorot(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let scale = (6.0 / (rows + cols) as f64).sqrt();
        self.add_uniform(name, &[rows, cols], scale, rng)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.add(name, ArrayD::zeros(ndarray::IxDyn(shape)))
    }

    pub fn freeze_row(&mut self, id: ParamId, row: usize) {
        let p = &mut self.params[id.0];
        assert!(p.value.ndim() == 2);
        for v in p.value.index_axis_mut(ndarray::Axis(0), row).iter_mut() {
            *v = 0.0;
        }
        p.frozen_rows.push(row);
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Per-step bindings between tape leaves and stored parameters. One binding
/// is created per `bind` call; gradients from all bindings accumulate.
#[derive(Default)]
pub struct Bindings {
    pairs: Vec<(ParamId, VarId)>,
    cache: BTreeMap<usize, VarId>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Put a parameter on the tape, reusing the leaf if already bound.
    pub fn bind(&mut self, tape: &mut Tape, store: &ParamStore, id: ParamId) -> VarId {
        if let Some(&v) = self.cache.get(&id.0) {
            return v;
        }
        let v = tape.leaf(store.get(id).value.clone());
        self.pairs.push((id, v));
        self.cache.insert(id.0, v);
        v
    }

    /// Pull gradients for all bound parameters out of a finished backward
    /// pass, accumulating into `grads` (keyed by ParamId index).
    pub fn collect(&self, tape_grads: &[ArrayD<f64>], grads: &mut GradStore) {
        for &(pid, vid) in &self.pairs {
            grads.accumulate(pid, &tape_grads[vid.0]);
        }
    }
}

/// Accumulated gradients, index-aligned with a ParamStore.
pub struct GradStore {
    grads: Vec<ArrayD<f64>>,
}

impl GradStore {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradStore {
            grads: store.params.iter().map(|p| ArrayD::zeros(p.value.raw_dim())).collect(),
        }
    }

    pub fn accumulate(&mut self, id: ParamId, g: &ArrayD<f64>) {
        self.grads[id.0] += g;
    }

    pub fn get(&self, id: ParamId) -> &ArrayD<f64> {
        &self.grads[id.0]
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.grads {
            *g *= c;
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .map(|g| g.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescale all gradients so the global norm is at most `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: store.params.iter().map(|p| ArrayD::zeros(p.value.raw_dim())).collect(),
            v: store.params.iter().map(|p| ArrayD::zeros(p.value.raw_dim())).collect(),
        }
    }

    pub fn apply(&mut self, store: &mut ParamStore, grads: &GradStore) {
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        for (i, p) in store.params.iter_mut().enumerate() {
            let g = &grads.grads[i];
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(m.view_mut()).and(g.view()).for_each(|m, &g| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            });
            ndarray::Zip::from(v.view_mut()).and(g.view()).for_each(|v, &g| {
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            });
            let lr = self.lr;
            let eps = self.eps;
            ndarray::Zip::from(p.value.view_mut())
                .and(m.view())
                .and(v.view())
                .for_each(|w, &m, &v| {
                    *w -= lr * (m / b1t) / ((v / b2t).sqrt() + eps);
                });
            for &row in &p.frozen_rows {
                for w in p.value.index_axis_mut(ndarray::Axis(0), row).iter_mut() {
                    *w = 0.0;
                }
            }
        }
    }
}

/// Central finite-difference comparison against analytic gradients.
///
/// `loss` must evaluate the model at the current parameter values. Entries
/// with both analytic and numeric magnitude below `abs_floor` are skipped.
/// Returns the worst relative error seen.
pub fn finite_difference_check(
    store: &mut ParamStore,
    analytic: &GradStore,
    mut loss: impl FnMut(&ParamStore) -> f64,
    eps: f64,
) -> f64 {
    let abs_floor = 1e-10;
    let mut worst: f64 = 0.0;
    for i in 0..store.params.len() {
        let n = store.params[i].value.len();
        for idx in 0..n {
            let orig = store.params[i].value.as_slice().unwrap()[idx];
            store.params[i].value.as_slice_mut().unwrap()[idx] = orig + eps;
            let fp = loss(store);
            store.params[i].value.as_slice_mut().unwrap()[idx] = orig - eps;
            let fm = loss(store);
            store.params[i].value.as_slice_mut().unwrap()[idx] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let ana = analytic.grads[i].as_slice().unwrap()[idx];
            if ana.abs() < abs_floor && numeric.abs() < abs_floor {
                continue;
            }
            let rel = (ana - numeric).abs() / (ana.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}
