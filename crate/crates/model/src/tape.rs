//! Reverse-mode automatic differentiation over dynamically-shaped f64 arrays.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] walks the recorded nodes in reverse and accumulates
//! gradients for every node, including leaves bound to parameters.

use ndarray::{ArrayD, Axis, IxDyn};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub usize);

/// Sink used by backward closures to push gradient contributions to parents.
/// The first argument is the parent slot index (position in the node's
/// parent list), not a VarId.
type GradSink<'a> = dyn FnMut(usize, ArrayD<f64>) + 'a;

struct BackwardCtx<'a> {
    grad: &'a ArrayD<f64>,
    value: &'a ArrayD<f64>,
    parents: Vec<&'a ArrayD<f64>>,
}

type BackwardFn = Box<dyn Fn(&BackwardCtx, &mut GradSink)>;

struct Node {
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
}

pub struct Tape {
    values: Vec<ArrayD<f64>>,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn scalar(v: f64) -> ArrayD<f64> {
    ArrayD::from_elem(IxDyn(&[]), v)
}

impl Tape {
    pub fn new() -> Self {
        Tape { values: Vec::new(), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: VarId) -> &ArrayD<f64> {
        &self.values[id.0]
    }

    pub fn scalar_value(&self, id: VarId) -> f64 {
        let v = &self.values[id.0];
        debug_assert_eq!(v.len(), 1);
        *v.iter().next().unwrap()
    }

    fn push(&mut self, value: ArrayD<f64>, parents: Vec<usize>, backward: Option<BackwardFn>) -> VarId {
        self.values.push(value);
        self.nodes.push(Node { parents, backward });
        VarId(self.nodes.len() - 1)
    }

    /// Leaf node. Gradients are still tracked so leaves can back parameters.
    pub fn leaf(&mut self, value: ArrayD<f64>) -> VarId {
        self.push(value, vec![], None)
    }

    /// Leaf node from a 2-D array.
    pub fn leaf2(&mut self, value: ndarray::Array2<f64>) -> VarId {
        self.leaf(value.into_dyn())
    }

    pub fn leaf1(&mut self, value: ndarray::Array1<f64>) -> VarId {
        self.leaf(value.into_dyn())
    }

    // ---- elementwise ----

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.values[a.0].shape(), self.values[b.0].shape(), "add shape mismatch");
        let v = &self.values[a.0] + &self.values[b.0];
        self.push(v, vec![a.0, b.0], Some(Box::new(|ctx, sink| {
            sink(0, ctx.grad.clone());
            sink(1, ctx.grad.clone());
        })))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.values[a.0].shape(), self.values[b.0].shape(), "sub shape mismatch");
        let v = &self.values[a.0] - &self.values[b.0];
        self.push(v, vec![a.0, b.0], Some(Box::new(|ctx, sink| {
            sink(0, ctx.grad.clone());
            sink(1, ctx.grad.mapv(|g| -g));
        })))
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.values[a.0].shape(), self.values[b.0].shape(), "mul shape mismatch");
        let v = &self.values[a.0] * &self.values[b.0];
        self.push(v, vec![a.0, b.0], Some(Box::new(|ctx, sink| {
            sink(0, ctx.grad * ctx.parents[1]);
            sink(1, ctx.grad * ctx.parents[0]);
        })))
    }

    pub fn neg(&mut self, a: VarId) -> VarId {
        let v = -&self.values[a.0];
        self.push(v, vec![a.0], Some(Box::new(|ctx, sink| sink(0, ctx.grad.mapv(|g| -g)))))
    }

    pub fn scale(&mut self, a: VarId, c: f64) -> VarId {
        let v = &self.values[a.0] * c;
        self.push(v, vec![a.0], Some(Box::new(move |ctx, sink| sink(0, ctx.grad * c))))
    }

    pub fn add_scalar(&mut self, a: VarId, c: f64) -> VarId {
        let v = &self.values[a.0] + c;
        self.push(v, vec![a.0], Some(Box::new(|ctx, sink| sink(0, ctx.grad.clone()))))
    }

    pub fn sigmoid(&mut self, a: VarId) -> VarId {
        let v = self.values[a.0].mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, vec![a.0], Some(Box::new(|ctx, sink| {
            sink(0, ctx.grad * &ctx.value.mapv(|y| y * (1.0 - y)));
        })))
    }

    pub fn tanh(&mut self, a: VarId) -> VarId {
        let v = self.values[a.0].mapv(f64::tanh);
        self.push(v, vec![a.0], Some(Box::new(|ctx, sink| {
            sink(0, ctx.grad * &ctx.value.mapv(|y| 1.0 - y * y));
        })))
    }

    pub fn relu(&mut self, a: VarId) -> VarId {
        let v = self.values[a.0].mapv(|x| x.max(0.0));
        self.push(v, vec![a.0], Some(Box::new(|ctx, sink| {
            sink(0, ctx.grad * &ctx.parents[0].mapv(|x| if x > 0.0 { 1.0 } else { 0.0 }));
        })))
    }

    // ---- shape ----

    pub fn reshape(&mut self, a: VarId, shape: &[usize]) -> VarId {
        let v = self.values[a.0]
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape size mismatch");
        self.push(v, vec![a.0], Some(Box::new(|ctx, sink| {
            let back = ctx
                .grad
                .clone()
                .into_shape_with_order(ctx.parents[0].raw_dim())
                .expect("reshape backward");
            sink(0, back);
        })))
    }

    pub fn transpose(&mut self, a: VarId) -> VarId {
        let v = self.as2(a).t().to_owned().into_dyn();
        self.push(v, vec![a.0], Some(Box::new(|ctx, sink| {
            let g = to2(ctx.grad);
            sink(0, g.t().to_owned().into_dyn());
        })))
    }

    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> VarId {
        let av = self.as2(a);
        let bv = self.as2(b);
        let p = av.ncols();
        let v = ndarray::concatenate(Axis(1), &[av.view(), bv.view()]).unwrap().into_dyn();
        self.push(v, vec![a.0, b.0], Some(Box::new(move |ctx, sink| {
            let g = to2(ctx.grad);
            sink(0, g.slice(ndarray::s![.., ..p]).to_owned().into_dyn());
            sink(1, g.slice(ndarray::s![.., p..]).to_owned().into_dyn());
        })))
    }

    pub fn slice_cols(&mut self, a: VarId, start: usize, end: usize) -> VarId {
        let av = self.as2(a);
        let cols = av.ncols();
        let v = av.slice(ndarray::s![.., start..end]).to_owned().into_dyn();
        self.push(v, vec![a.0], Some(Box::new(move |ctx, sink| {
            let g = to2(ctx.grad);
            let mut back = ndarray::Array2::<f64>::zeros((g.nrows(), cols));
            back.slice_mut(ndarray::s![.., start..end]).assign(&g);
            sink(0, back.into_dyn());
        })))
    }

    // ---- linear algebra ----

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let av = self.as2(a);
        let bv = self.as2(b);
        assert_eq!(av.ncols(), bv.nrows(), "matmul dim mismatch");
        let v = av.dot(&bv).into_dyn();
        self.push(v, vec![a.0, b.0], Some(Box::new(|ctx, sink| {
            let g = to2(ctx.grad);
            let av = to2(ctx.parents[0]);
            let bv = to2(ctx.parents[1]);
            sink(0, g.dot(&bv.t()).into_dyn());
            sink(1, av.t().dot(&g).into_dyn());
        })))
    }

    /// Broadcast-add a length-m bias vector to every row of an (n, m) matrix.
    pub fn add_bias(&mut self, a: VarId, bias: VarId) -> VarId {
        let av = self.as2(a);
        let bv = self.values[bias.0].clone().into_shape_with_order(IxDyn(&[av.ncols()])).unwrap();
        let v = (&av + &bv.view().into_shape_with_order((1, av.ncols())).unwrap()).into_dyn();
        self.push(v, vec![a.0, bias.0], Some(Box::new(|ctx, sink| {
            let g = to2(ctx.grad);
            sink(0, g.clone().into_dyn());
            let mut bg = g.sum_axis(Axis(0)).into_dyn();
            if ctx.parents[1].ndim() != 1 {
                bg = bg.into_shape_with_order(ctx.parents[1].raw_dim()).unwrap();
            }
            sink(1, bg);
        })))
    }

    /// Scale row i of an (n, m) matrix by s[i]; s is a length-n vector.
    pub fn scale_rows(&mut self, a: VarId, s: VarId) -> VarId {
        let av = self.as2(a);
        let sv = self.values[s.0].clone().into_shape_with_order(IxDyn(&[av.nrows()])).unwrap();
        let sv2 = sv.view().into_shape_with_order((av.nrows(), 1)).unwrap().to_owned();
        let v = (&av * &sv2).into_dyn();
        self.push(v, vec![a.0, s.0], Some(Box::new(|ctx, sink| {
            let g = to2(ctx.grad);
            let av = to2(ctx.parents[0]);
            let n = av.nrows();
            let sv = ctx.parents[1].clone().into_shape_with_order(IxDyn(&[n])).unwrap();
            let sv2 = sv.view().into_shape_with_order((n, 1)).unwrap().to_owned();
            sink(0, (&g * &sv2).into_dyn());
            let mut sg = (&g * &av).sum_axis(Axis(1)).into_dyn();
            if ctx.parents[1].ndim() != 1 {
                sg = sg.into_shape_with_order(ctx.parents[1].raw_dim()).unwrap();
            }
            sink(1, sg);
        })))
    }

    // ---- gathers ----

    /// Select rows of a 2-D array by index, with scatter-add backward.
    pub fn gather_rows(&mut self, table: VarId, ids: Vec<usize>) -> VarId {
        let tv = self.as2(table);
        let cols = tv.ncols();
        let mut v = ndarray::Array2::<f64>::zeros((ids.len(), cols));
        for (r, &i) in ids.iter().enumerate() {
            v.row_mut(r).assign(&tv.row(i));
        }
        self.push(v.into_dyn(), vec![table.0], Some(Box::new(move |ctx, sink| {
            let g = to2(ctx.grad);
            let tshape = ctx.parents[0].shape();
            let mut back = ndarray::Array2::<f64>::zeros((tshape[0], tshape[1]));
            for (r, &i) in ids.iter().enumerate() {
                let mut row = back.row_mut(i);
                row += &g.row(r);
            }
            sink(0, back.into_dyn());
        })))
    }

    /// Sum columns of an (n, m) matrix into vocabulary bins: out[r, ids[c]] += a[r, c].
    pub fn scatter_cols(&mut self, a: VarId, ids: Vec<usize>, bins: usize) -> VarId {
        let av = self.as2(a);
        assert_eq!(av.ncols(), ids.len());
        let mut v = ndarray::Array2::<f64>::zeros((av.nrows(), bins));
        for (c, &t) in ids.iter().enumerate() {
            for r in 0..av.nrows() {
                v[[r, t]] += av[[r, c]];
            }
        }
        self.push(v.into_dyn(), vec![a.0], Some(Box::new(move |ctx, sink| {
            let g = to2(ctx.grad);
            let a = to2(ctx.parents[0]);
            let mut back = ndarray::Array2::<f64>::zeros((a.nrows(), a.ncols()));
            for (c, &t) in ids.iter().enumerate() {
                for r in 0..a.nrows() {
                    back[[r, c]] = g[[r, t]];
                }
            }
            sink(0, back.into_dyn());
        })))
    }

    // ---- pairwise path contractions ----

    /// scores[i, j] = q[i] . r[i*n + j] for q: (n, d), r: (n*n, d).
    pub fn pair_dot(&mut self, q: VarId, r: VarId) -> VarId {
        let qv = self.as2(q);
        let rv = self.as2(r);
        let n = qv.nrows();
        assert_eq!(rv.nrows(), n * n, "pair_dot expects n*n rows");
        let mut v = ndarray::Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                v[[i, j]] = qv.row(i).dot(&rv.row(i * n + j));
            }
        }
        self.push(v.into_dyn(), vec![q.0, r.0], Some(Box::new(move |ctx, sink| {
            let g = to2(ctx.grad);
            let qv = to2(ctx.parents[0]);
            let rv = to2(ctx.parents[1]);
            let mut qg = ndarray::Array2::<f64>::zeros(qv.raw_dim());
            let mut rg = ndarray::Array2::<f64>::zeros(rv.raw_dim());
            for i in 0..n {
                for j in 0..n {
                    let gij = g[[i, j]];
                    if gij != 0.0 {
                        let mut qrow = qg.row_mut(i);
                        qrow.scaled_add(gij, &rv.row(i * n + j));
                        let mut rrow = rg.row_mut(i * n + j);
                        rrow.scaled_add(gij, &qv.row(i));
                    }
                }
            }
            sink(0, qg.into_dyn());
            sink(1, rg.into_dyn());
        })))
    }

    /// out[i] = sum_j attn[i, j] * r[i*n + j] for attn: (n, n), r: (n*n, d).
    pub fn pair_mix(&mut self, attn: VarId, r: VarId) -> VarId {
        let av = self.as2(attn);
        let rv = self.as2(r);
        let n = av.nrows();
        assert_eq!(av.ncols(), n);
        assert_eq!(rv.nrows(), n * n, "pair_mix expects n*n rows");
        let d = rv.ncols();
        let mut v = ndarray::Array2::<f64>::zeros((n, d));
        for i in 0..n {
            for j in 0..n {
                let w = av[[i, j]];
                if w != 0.0 {
                    let mut row = v.row_mut(i);
                    row.scaled_add(w, &rv.row(i * n + j));
                }
            }
        }
        self.push(v.into_dyn(), vec![attn.0, r.0], Some(Box::new(move |ctx, sink| {
            let g = to2(ctx.grad);
            let av = to2(ctx.parents[0]);
            let rv = to2(ctx.parents[1]);
            let mut ag = ndarray::Array2::<f64>::zeros(av.raw_dim());
            let mut rg = ndarray::Array2::<f64>::zeros(rv.raw_dim());
            for i in 0..n {
                for j in 0..n {
                    ag[[i, j]] = g.row(i).dot(&rv.row(i * n + j));
                    let mut rrow = rg.row_mut(i * n + j);
                    rrow.scaled_add(av[[i, j]], &g.row(i));
                }
            }
            sink(0, ag.into_dyn());
            sink(1, rg.into_dyn());
        })))
    }

    // ---- softmax and normalization ----

    /// Row-wise softmax over allowed columns. Disallowed entries produce
    /// exactly zero and receive zero gradient. `allowed` is row-major (n, m).
    pub fn masked_softmax(&mut self, a: VarId, allowed: Vec<bool>) -> VarId {
        let av = self.as2(a);
        let (n, m) = (av.nrows(), av.ncols());
        assert_eq!(allowed.len(), n * m);
        let mut v = ndarray::Array2::<f64>::zeros((n, m));
        for i in 0..n {
            let mut max = f64::NEG_INFINITY;
            for j in 0..m {
                if allowed[i * m + j] {
                    max = max.max(av[[i, j]]);
                }
            }
            assert!(max.is_finite(), "softmax row {i} has no allowed columns");
            let mut z = 0.0;
            for j in 0..m {
                if allowed[i * m + j] {
                    let e = (av[[i, j]] - max).exp();
                    v[[i, j]] = e;
                    z += e;
                }
            }
            for j in 0..m {
                v[[i, j]] /= z;
            }
        }
        self.push(v.into_dyn(), vec![a.0], Some(Box::new(move |ctx, sink| {
            let g = to2(ctx.grad);
            let y = to2(ctx.value);
            let mut back = ndarray::Array2::<f64>::zeros(y.raw_dim());
            for i in 0..y.nrows() {
                let dot: f64 = (0..y.ncols()).map(|j| g[[i, j]] * y[[i, j]]).sum();
                for j in 0..y.ncols() {
                    back[[i, j]] = y[[i, j]] * (g[[i, j]] - dot);
                }
            }
            sink(0, back.into_dyn());
        })))
    }

    /// Per-row layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, a: VarId, gain: VarId, bias: VarId) -> VarId {
        const EPS: f64 = 1e-6;
        let av = self.as2(a);
        let d = av.ncols();
        let gv = self.values[gain.0].clone().into_shape_with_order(IxDyn(&[d])).unwrap();
        let bv = self.values[bias.0].clone().into_shape_with_order(IxDyn(&[d])).unwrap();
        let mut v = ndarray::Array2::<f64>::zeros(av.raw_dim());
        for i in 0..av.nrows() {
            let row = av.row(i);
            let mean = row.mean().unwrap();
            let var = row.mapv(|x| (x - mean) * (x - mean)).mean().unwrap();
            let inv = 1.0 / (var + EPS).sqrt();
            for j in 0..d {
                v[[i, j]] = (row[j] - mean) * inv * gv[j] + bv[j];
            }
        }
        self.push(v.into_dyn(), vec![a.0, gain.0, bias.0], Some(Box::new(move |ctx, sink| {
            let g = to2(ctx.grad);
            let av = to2(ctx.parents[0]);
            let d = av.ncols() as f64;
            let gv = ctx.parents[1].clone().into_shape_with_order(IxDyn(&[av.ncols()])).unwrap();
            let mut xg = ndarray::Array2::<f64>::zeros(av.raw_dim());
            let mut gaing = ArrayD::<f64>::zeros(IxDyn(&[av.ncols()]));
            let mut biasg = ArrayD::<f64>::zeros(IxDyn(&[av.ncols()]));
            for i in 0..av.nrows() {
                let row = av.row(i);
                let mean = row.mean().unwrap();
                let var = row.mapv(|x| (x - mean) * (x - mean)).mean().unwrap();
                let inv = 1.0 / (var + EPS).sqrt();
                let xhat: Vec<f64> = row.iter().map(|&x| (x - mean) * inv).collect();
                let dxhat: Vec<f64> = (0..av.ncols()).map(|j| g[[i, j]] * gv[j]).collect();
                let mean_dxhat: f64 = dxhat.iter().sum::<f64>() / d;
                let mean_dxhat_xhat: f64 =
                    dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / d;
                for j in 0..av.ncols() {
                    xg[[i, j]] = inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                    gaing[j] += g[[i, j]] * xhat[j];
                    biasg[j] += g[[i, j]];
                }
            }
            sink(0, xg.into_dyn());
            let reshape_like = |arr: ArrayD<f64>, like: &ArrayD<f64>| {
                arr.into_shape_with_order(like.raw_dim()).unwrap()
            };
            sink(1, reshape_like(gaing, ctx.parents[1]));
            sink(2, reshape_like(biasg, ctx.parents[2]));
        })))
    }

    // ---- reductions and losses ----

    pub fn sum(&mut self, a: VarId) -> VarId {
        let v = scalar(self.values[a.0].sum());
        self.push(v, vec![a.0], Some(Box::new(|ctx, sink| {
            let g = ctx.grad.iter().next().copied().unwrap();
            sink(0, ArrayD::from_elem(ctx.parents[0].raw_dim(), g));
        })))
    }

    pub fn mean(&mut self, a: VarId) -> VarId {
        let n = self.values[a.0].len() as f64;
        let v = scalar(self.values[a.0].sum() / n);
        self.push(v, vec![a.0], Some(Box::new(move |ctx, sink| {
            let g = ctx.grad.iter().next().copied().unwrap() / n;
            sink(0, ArrayD::from_elem(ctx.parents[0].raw_dim(), g));
        })))
    }

    /// Mean softmax cross-entropy of (n, V) logits against class targets.
    /// Rows with target None (padding) are excluded from the mean.
    pub fn softmax_cross_entropy(&mut self, logits: VarId, targets: Vec<Option<usize>>) -> VarId {
        let lv = self.as2(logits);
        assert_eq!(lv.nrows(), targets.len());
        let count = targets.iter().flatten().count().max(1) as f64;
        let mut loss = 0.0;
        for (i, t) in targets.iter().enumerate() {
            if let Some(t) = t {
                let row = lv.row(i);
                let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = max + row.mapv(|x| (x - max).exp()).sum().ln();
                loss += lse - row[*t];
            }
        }
        let v = scalar(loss / count);
        self.push(v, vec![logits.0], Some(Box::new(move |ctx, sink| {
            let g = ctx.grad.iter().next().copied().unwrap();
            let lv = to2(ctx.parents[0]);
            let mut back = ndarray::Array2::<f64>::zeros(lv.raw_dim());
            for (i, t) in targets.iter().enumerate() {
                if let Some(t) = t {
                    let row = lv.row(i);
                    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    let exps = row.mapv(|x| (x - max).exp());
                    let z = exps.sum();
                    for j in 0..lv.ncols() {
                        back[[i, j]] = g / count * (exps[j] / z - if j == *t { 1.0 } else { 0.0 });
                    }
                }
            }
            sink(0, back.into_dyn());
        })))
    }

    /// Mean negative log-likelihood of (n, V) probability rows against class
    /// targets, with the log clamped at 1e-12.
    pub fn nll_from_probs(&mut self, probs: VarId, targets: Vec<Option<usize>>) -> VarId {
        const CLAMP: f64 = 1e-12;
        let pv = self.as2(probs);
        assert_eq!(pv.nrows(), targets.len());
        let count = targets.iter().flatten().count().max(1) as f64;
        let mut loss = 0.0;
        for (i, t) in targets.iter().enumerate() {
            if let Some(t) = t {
                loss -= pv[[i, *t]].max(CLAMP).ln();
            }
        }
        let v = scalar(loss / count);
        self.push(v, vec![probs.0], Some(Box::new(move |ctx, sink| {
            let g = ctx.grad.iter().next().copied().unwrap();
            let pv = to2(ctx.parents[0]);
            let mut back = ndarray::Array2::<f64>::zeros(pv.raw_dim());
            for (i, t) in targets.iter().enumerate() {
                if let Some(t) = t {
                    let p = pv[[i, *t]];
                    if p > CLAMP {
                        back[[i, *t]] = -g / (count * p);
                    }
                }
            }
            sink(0, back.into_dyn());
        })))
    }

    // ---- backward ----

    /// Backpropagate from a scalar root. Returns one gradient per node.
    pub fn backward(&self, root: VarId) -> Vec<ArrayD<f64>> {
        assert_eq!(self.values[root.0].len(), 1, "backward root must be scalar");
        let mut grads: Vec<ArrayD<f64>> = self
            .values
            .iter()
            .map(|v| ArrayD::zeros(v.raw_dim()))
            .collect();
        grads[root.0] = ArrayD::from_elem(self.values[root.0].raw_dim(), 1.0);
        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            let Some(back) = &node.backward else { continue };
            let out_grad = grads[id].clone();
            if out_grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            let ctx = BackwardCtx {
                grad: &out_grad,
                value: &self.values[id],
                parents: node.parents.iter().map(|&p| &self.values[p]).collect(),
            };
            let parents = node.parents.clone();
            let mut sink = |slot: usize, g: ArrayD<f64>| {
                grads[parents[slot]] += &g;
            };
            back(&ctx, &mut sink);
        }
        grads
    }

    fn as2(&self, a: VarId) -> ndarray::Array2<f64> {
        to2(&self.values[a.0])
    }
}

fn to2(a: &ArrayD<f64>) -> ndarray::Array2<f64> {
    a.clone()
        .into_dimensionality::<ndarray::Ix2>()
        .expect("expected 2-D value")
}
