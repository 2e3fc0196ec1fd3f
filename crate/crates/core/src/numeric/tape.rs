//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! Every op appends one node holding its forward value. [`Tape::backward`]
//! walks the nodes in exact reverse order of recording and hands back a
//! [`Gradients`] table; parameter gradients are then accumulated into the
//! owning [`ParamStore`].
//!
//! ```
//! use fh_tabnet::numeric::{Matrix, ParamStore, Tape};
//!
//! let mut store = ParamStore::new();
//! let w = store.add(Matrix::row_vector(&[3.0]));
//! let mut tape = Tape::new();
//! let wv = tape.param(&store, w);
//! let sq = tape.mul(wv, wv).unwrap();
//! let loss = tape.sum(sq);
//! tape.backward_into(loss, &mut store).unwrap();
//! assert_eq!(store.get(w).grad.data(), &[6.0]);
//! ```

use std::sync::atomic::{AtomicU64, Ordering};

use super::kernels::{sigmoid, softmax_row, sparsemax_row};
use super::matrix::Matrix;
use super::param::{ParamId, ParamStore};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// A node handle. Only valid on the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    idx: usize,
    tape: u64,
}

/// Per-chunk batch statistics observed by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    AddRow(usize, usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    ConstSub(usize),
    Relu(usize),
    Glu(usize),
    Sparsemax(usize),
    BatchNorm {
        x: usize,
        scale: usize,
        shift: usize,
        /// Row ranges of the virtual batches.
        chunks: Vec<(usize, usize)>,
        xhat: Matrix,
        /// 1/sqrt(var+eps), one row per chunk.
        inv_std: Vec<Vec<f64>>,
    },
    BatchNormEval {
        x: usize,
        scale: usize,
        shift: usize,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    SliceCols(usize, usize),
    CrossEntropy {
        logits: usize,
        labels: Vec<usize>,
        weights: Vec<f64>,
        probs: Matrix,
    },
    MaskEntropy {
        m: usize,
        eps: f64,
    },
    Sum(usize),
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation for one backward pass.
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar loss with respect to every recorded node.
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Matrix>>,
    params: Vec<(usize, ParamId)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.idx).and_then(Option::as_ref)
    }

    /// Adds parameter gradients into `store`.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(idx, id) in &self.params {
            if let Some(g) = &self.grads[idx] {
                store.get_mut(id).grad.add_assign(g);
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        assert_eq!(v.tape, self.id, "variable used on a foreign tape");
        &self.nodes[v.idx].value
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            idx: self.nodes.len() - 1,
            tape: self.id,
        }
    }

    fn idx(&self, v: Var) -> usize {
        assert_eq!(v.tape, self.id, "variable used on a foreign tape");
        v.idx
    }

    fn ng(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    /// A constant input; no gradient is propagated to it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A constant input whose gradient is still reported by [`Gradients::get`].
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let out = self.nodes[ia].value.matmul(&self.nodes[ib].value)?;
        let ng = self.ng(ia) || self.ng(ib);
        Ok(self.push(out, Op::MatMul(ia, ib), ng))
    }

    /// `x + b` with the 1×O row `b` broadcast over every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (ix, ib) = (self.idx(x), self.idx(b));
        let (xv, bv) = (&self.nodes[ix].value, &self.nodes[ib].value);
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::dim(format!(
                "bias {}x{} does not broadcast over {}x{}",
                bv.rows(),
                bv.cols(),
                xv.rows(),
                xv.cols()
            )));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let ng = self.ng(ix) || self.ng(ib);
        Ok(self.push(out, Op::AddRow(ix, ib), ng))
    }

    /// `x·w + b`, with `b` a 1×O row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let out = self.nodes[ia]
            .value
            .zip_map(&self.nodes[ib].value, |x, y| x + y)?;
        let ng = self.ng(ia) || self.ng(ib);
        Ok(self.push(out, Op::Add(ia, ib), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let out = self.nodes[ia]
            .value
            .zip_map(&self.nodes[ib].value, |x, y| x * y)?;
        let ng = self.ng(ia) || self.ng(ib);
        Ok(self.push(out, Op::Mul(ia, ib), ng))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let ix = self.idx(x);
        let out = self.nodes[ix].value.map(|v| v * c);
        let ng = self.ng(ix);
        self.push(out, Op::Scale(ix, c), ng)
    }

    /// `c − x`, elementwise.
    pub fn const_sub(&mut self, c: f64, x: Var) -> Var {
        let ix = self.idx(x);
        let out = self.nodes[ix].value.map(|v| c - v);
        let ng = self.ng(ix);
        self.push(out, Op::ConstSub(ix), ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let out = self.nodes[ix].value.map(|v| v.max(0.0));
        let ng = self.ng(ix);
        self.push(out, Op::Relu(ix), ng)
    }

    /// Gated linear unit: first half of the columns times sigmoid of the second half.
    pub fn glu(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x);
        let xv = &self.nodes[ix].value;
        if xv.cols() % 2 != 0 {
            return Err(Error::dim(format!(
                "glu needs an even column count, got {}",
                xv.cols()
            )));
        }
        let h = xv.cols() / 2;
        let mut out = Matrix::zeros(xv.rows(), h);
        for r in 0..xv.rows() {
            let row = xv.row(r);
            for (j, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = row[j] * sigmoid(row[h + j]);
            }
        }
        let ng = self.ng(ix);
        Ok(self.push(out, Op::Glu(ix), ng))
    }

    /// Row-wise sparsemax.
    pub fn sparsemax(&mut self, z: Var) -> Var {
        let iz = self.idx(z);
        let zv = &self.nodes[iz].value;
        let mut out = Matrix::zeros(zv.rows(), zv.cols());
        for r in 0..zv.rows() {
            sparsemax_row(zv.row(r), out.row_mut(r));
        }
        let ng = self.ng(iz);
        self.push(out, Op::Sparsemax(iz), ng)
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let ix = self.idx(x);
        let xv = &self.nodes[ix].value;
        if start + len > xv.cols() {
            return Err(Error::dim(format!(
                "column slice {start}..{} out of {} columns",
                start + len,
                xv.cols()
            )));
        }
        let out = xv.slice_cols(start, len);
        let ng = self.ng(ix);
        Ok(self.push(out, Op::SliceCols(ix, start), ng))
    }

    /// Training-mode batch norm over virtual batches of at most
    /// `virtual_batch` rows, normalizing with the population variance.
    pub fn batch_norm_train(
        &mut self,
        x: Var,
        scale: Var,
        shift: Var,
        virtual_batch: usize,
        eps: f64,
    ) -> Result<(Var, Vec<ChunkStats>)> {
        let (ix, is, ib) = (self.idx(x), self.idx(scale), self.idx(shift));
        let xv = &self.nodes[ix].value;
        let (b, d) = xv.shape();
        if b < 2 {
            return Err(Error::BatchSize(b));
        }
        check_bn_affine(&self.nodes[is].value, &self.nodes[ib].value, d)?;
        let chunks = ghost_chunks(b, virtual_batch);
        let mut xhat = Matrix::zeros(b, d);
        let mut inv_std = Vec::with_capacity(chunks.len());
        let mut stats = Vec::with_capacity(chunks.len());
        for &(lo, hi) in &chunks {
            let n = (hi - lo) as f64;
            let mut mean = vec![0.0; d];
            for r in lo..hi {
                for (m, v) in mean.iter_mut().zip(xv.row(r)) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; d];
            for r in lo..hi {
                for ((s, v), m) in var.iter_mut().zip(xv.row(r)).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s /= n);
            let istd: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
            for r in lo..hi {
                let src = xv.row(r);
                let dst = xhat.row_mut(r);
                for j in 0..d {
                    dst[j] = (src[j] - mean[j]) * istd[j];
                }
            }
            inv_std.push(istd);
            stats.push(ChunkStats { mean, var });
        }
        let out = scale_shift(&xhat, &self.nodes[is].value, &self.nodes[ib].value);
        let ng = self.ng(ix) || self.ng(is) || self.ng(ib);
        let v = self.push(
            out,
            Op::BatchNorm {
                x: ix,
                scale: is,
                shift: ib,
                chunks,
                xhat,
                inv_std,
            },
            ng,
        );
        Ok((v, stats))
    }

    /// Inference-mode batch norm using fixed running statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        scale: Var,
        shift: Var,
        running_mean: &[f64],
        running_var: &[f64],
        eps: f64,
    ) -> Result<Var> {
        let (ix, is, ib) = (self.idx(x), self.idx(scale), self.idx(shift));
        let xv = &self.nodes[ix].value;
        let d = xv.cols();
        check_bn_affine(&self.nodes[is].value, &self.nodes[ib].value, d)?;
        if running_mean.len() != d || running_var.len() != d {
            return Err(Error::dim("running statistics width mismatch"));
        }
        let inv_std: Vec<f64> = running_var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = Matrix::zeros(xv.rows(), d);
        for r in 0..xv.rows() {
            let src = xv.row(r);
            let dst = xhat.row_mut(r);
            for j in 0..d {
                dst[j] = (src[j] - running_mean[j]) * inv_std[j];
            }
        }
        let out = scale_shift(&xhat, &self.nodes[is].value, &self.nodes[ib].value);
        let ng = self.ng(ix) || self.ng(is) || self.ng(ib);
        Ok(self.push(
            out,
            Op::BatchNormEval {
                x: ix,
                scale: is,
                shift: ib,
                xhat,
                inv_std,
            },
            ng,
        ))
    }

    /// Mean softmax cross-entropy. With `class_weights`, each row is weighted by
    /// the weight of its label and the mean is taken over the total weight.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        class_weights: Option<&[f64]>,
    ) -> Result<Var> {
        let il = self.idx(logits);
        let lv = &self.nodes[il].value;
        let (b, c) = lv.shape();
        if labels.len() != b {
            return Err(Error::dim(format!("{} labels for {b} rows", labels.len())));
        }
        if let Some(w) = class_weights {
            if w.len() != c {
                return Err(Error::dim(format!("{} class weights for {c} classes", w.len())));
            }
        }
        let mut probs = Matrix::zeros(b, c);
        let mut weights = Vec::with_capacity(b);
        let mut loss = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            if y >= c {
                return Err(Error::Label {
                    label: y,
                    classes: c,
                });
            }
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            softmax_row(row, probs.row_mut(r));
            let w = class_weights.map_or(1.0, |w| w[y]);
            loss += w * (lse - row[y]);
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let out = Matrix::scalar(loss / total);
        let ng = self.ng(il);
        Ok(self.push(
            out,
            Op::CrossEntropy {
                logits: il,
                labels: labels.to_vec(),
                weights,
                probs,
            },
            ng,
        ))
    }

    /// Mean over rows of the entropy `−Σⱼ mⱼ·ln(mⱼ + eps)`.
    pub fn mask_entropy(&mut self, m: Var, eps: f64) -> Var {
        let im = self.idx(m);
        let mv = &self.nodes[im].value;
        let total: f64 = mv.data().iter().map(|&p| -p * (p + eps).ln()).sum();
        let out = Matrix::scalar(total / mv.rows().max(1) as f64);
        let ng = self.ng(im);
        self.push(out, Op::MaskEntropy { m: im, eps }, ng)
    }

    /// Sum of all entries as a 1×1 value.
    pub fn sum(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let out = Matrix::scalar(self.nodes[ix].value.sum());
        let ng = self.ng(ix);
        self.push(out, Op::Sum(ix), ng)
    }

    /// Reverse pass from a 1×1 `loss`. A tape supports exactly one backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Tape("backward on an empty tape".into()));
        }
        if loss.tape != self.id {
            return Err(Error::Tape("loss was recorded on a different tape".into()));
        }
        if self.consumed {
            return Err(Error::Tape("tape already replayed backward".into()));
        }
        if self.nodes[loss.idx].value.shape() != (1, 1) {
            return Err(Error::Tape("loss must be a 1x1 value".into()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.idx] = Some(Matrix::scalar(1.0));
        let mut params = Vec::new();
        for i in (0..=loss.idx).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.backprop_node(i, &g, &mut grads);
            if let Op::Param(id) = self.nodes[i].op {
                params.push((i, id));
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
            params,
        })
    }

    /// [`Tape::backward`] followed by accumulation into `store`.
    pub fn backward_into(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.backward(loss)?;
        grads.accumulate_into(store);
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let nodes = &self.nodes;
        let val = |j: usize| &nodes[j].value;
        let mut acc = |j: usize, m: Matrix| {
            if !nodes[j].needs_grad {
                return;
            }
            match &mut grads[j] {
                Some(existing) => existing.add_assign(&m),
                slot @ None => *slot = Some(m),
            }
        };
        match &nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            &Op::MatMul(a, b) => {
                if nodes[a].needs_grad {
                    acc(a, g.matmul_t(val(b)).expect("shape checked in forward"));
                }
                if nodes[b].needs_grad {
                    acc(b, val(a).t_matmul(g).expect("shape checked in forward"));
                }
            }
            &Op::AddRow(x, b) => {
                acc(x, g.clone());
                acc(b, g.col_sums());
            }
            &Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            &Op::Mul(a, b) => {
                if nodes[a].needs_grad {
                    acc(a, g.zip_map(val(b), |x, y| x * y).unwrap());
                }
                if nodes[b].needs_grad {
                    acc(b, g.zip_map(val(a), |x, y| x * y).unwrap());
                }
            }
            &Op::Scale(x, c) => acc(x, g.map(|v| v * c)),
            &Op::ConstSub(x) => acc(x, g.map(|v| -v)),
            &Op::Relu(x) => acc(
                x,
                g.zip_map(&nodes[i].value, |gv, o| if o > 0.0 { gv } else { 0.0 })
                    .unwrap(),
            ),
            &Op::Glu(x) => {
                let xv = val(x);
                let h = g.cols();
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for r in 0..xv.rows() {
                    let (row, grow) = (xv.row(r), g.row(r));
                    let drow = dx.row_mut(r);
                    for j in 0..h {
                        let s = sigmoid(row[h + j]);
                        drow[j] = grow[j] * s;
                        drow[h + j] = grow[j] * row[j] * s * (1.0 - s);
                    }
                }
                acc(x, dx);
            }
            &Op::Sparsemax(z) => {
                let p = &nodes[i].value;
                let mut dz = Matrix::zeros(p.rows(), p.cols());
                for r in 0..p.rows() {
                    let (prow, grow) = (p.row(r), g.row(r));
                    let mut support = 0usize;
                    let mut gsum = 0.0;
                    for (pv, gv) in prow.iter().zip(grow) {
                        if *pv > 0.0 {
                            support += 1;
                            gsum += gv;
                        }
                    }
                    let gmean = gsum / support.max(1) as f64;
                    for ((d, pv), gv) in dz.row_mut(r).iter_mut().zip(prow).zip(grow) {
                        if *pv > 0.0 {
                            *d = gv - gmean;
                        }
                    }
                }
                acc(z, dz);
            }
            Op::BatchNorm {
                x,
                scale,
                shift,
                chunks,
                xhat,
                inv_std,
            } => {
                let d = g.cols();
                let gamma = val(*scale).data();
                let (dscale, dshift) = bn_affine_grads(g, xhat);
                if nodes[*x].needs_grad {
                    let mut dx = Matrix::zeros(g.rows(), d);
                    for (&(lo, hi), istd) in chunks.iter().zip(inv_std) {
                        let n = (hi - lo) as f64;
                        let mut sum_dxhat = vec![0.0; d];
                        let mut sum_dxhat_xhat = vec![0.0; d];
                        for r in lo..hi {
                            for j in 0..d {
                                let dxh = g.get(r, j) * gamma[j];
                                sum_dxhat[j] += dxh;
                                sum_dxhat_xhat[j] += dxh * xhat.get(r, j);
                            }
                        }
                        for r in lo..hi {
                            let drow = dx.row_mut(r);
                            for j in 0..d {
                                let dxh = g.get(r, j) * gamma[j];
                                drow[j] = istd[j] / n
                                    * (n * dxh - sum_dxhat[j] - xhat.get(r, j) * sum_dxhat_xhat[j]);
                            }
                        }
                    }
                    acc(*x, dx);
                }
                acc(*scale, dscale);
                acc(*shift, dshift);
            }
            Op::BatchNormEval {
                x,
                scale,
                shift,
                xhat,
                inv_std,
            } => {
                let gamma = val(*scale).data();
                let (dscale, dshift) = bn_affine_grads(g, xhat);
                if nodes[*x].needs_grad {
                    let mut dx = g.clone();
                    for r in 0..dx.rows() {
                        for (j, v) in dx.row_mut(r).iter_mut().enumerate() {
                            *v *= gamma[j] * inv_std[j];
                        }
                    }
                    acc(*x, dx);
                }
                acc(*scale, dscale);
                acc(*shift, dshift);
            }
            &Op::SliceCols(x, start) => {
                let xv = val(x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for r in 0..g.rows() {
                    dx.row_mut(r)[start..start + g.cols()].copy_from_slice(g.row(r));
                }
                acc(x, dx);
            }
            Op::CrossEntropy {
                logits,
                labels,
                weights,
                probs,
            } => {
                let gs = g.item();
                let mut dl = probs.clone();
                for (r, (&y, &w)) in labels.iter().zip(weights).enumerate() {
                    let row = dl.row_mut(r);
                    row[y] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= w * gs);
                }
                acc(*logits, dl);
            }
            &Op::MaskEntropy { m, eps } => {
                let mv = val(m);
                let coef = -g.item() / mv.rows().max(1) as f64;
                acc(m, mv.map(|p| coef * ((p + eps).ln() + p / (p + eps))));
            }
            &Op::Sum(x) => {
                let xv = val(x);
                acc(x, Matrix::filled(xv.rows(), xv.cols(), g.item()));
            }
        }
    }
}

fn check_bn_affine(scale: &Matrix, shift: &Matrix, d: usize) -> Result<()> {
    if scale.shape() != (1, d) || shift.shape() != (1, d) {
        return Err(Error::dim(format!(
            "batch-norm scale/shift must be 1x{d}, got {:?} and {:?}",
            scale.shape(),
            shift.shape()
        )));
    }
    Ok(())
}

fn scale_shift(xhat: &Matrix, scale: &Matrix, shift: &Matrix) -> Matrix {
    let mut out = xhat.clone();
    for r in 0..out.rows() {
        for ((o, s), b) in out.row_mut(r).iter_mut().zip(scale.data()).zip(shift.data()) {
            *o = *o * s + b;
        }
    }
    out
}

fn bn_affine_grads(g: &Matrix, xhat: &Matrix) -> (Matrix, Matrix) {
    let d = g.cols();
    let mut dscale = Matrix::zeros(1, d);
    let mut dshift = Matrix::zeros(1, d);
    for r in 0..g.rows() {
        for j in 0..d {
            dscale.data_mut()[j] += g.get(r, j) * xhat.get(r, j);
            dshift.data_mut()[j] += g.get(r, j);
        }
    }
    (dscale, dshift)
}

/// Splits `rows` into `ceil(rows / virtual_batch)` contiguous chunks whose
/// sizes differ by at most one. A virtual batch larger than `rows` yields one chunk.
pub fn ghost_chunks(rows: usize, virtual_batch: usize) -> Vec<(usize, usize)> {
    let vb = virtual_batch.clamp(1, rows.max(1));
    let n = rows.div_ceil(vb).max(1);
    let base = rows / n;
    let extra = rows % n;
    let mut out = Vec::with_capacity(n);
    let mut lo = 0;
    for c in 0..n {
        let len = base + usize::from(c < extra);
        out.push((lo, lo + len));
        lo += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghost_chunks_partition_rows() {
        assert_eq!(ghost_chunks(10, 128), vec![(0, 10)]);
        assert_eq!(ghost_chunks(257, 128), vec![(0, 86), (86, 172), (172, 257)]);
        assert_eq!(ghost_chunks(256, 128), vec![(0, 128), (128, 256)]);
    }

    #[test]
    fn backward_errors() {
        let mut tape = Tape::new();
        let mut other = Tape::new();
        let v = other.constant(Matrix::scalar(1.0));
        assert!(matches!(tape.backward(v), Err(Error::Tape(_))));
        let x = tape.input(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(x), Err(Error::Tape(_))));
        let s = tape.sum(x);
        assert!(tape.backward(s).is_ok());
        assert!(matches!(tape.backward(s), Err(Error::Tape(_))));
    }

    #[test]
    fn glu_and_bn_shape_errors() {
        let mut tape = Tape::new();
        let x = tape.input(Matrix::zeros(2, 3));
        assert!(matches!(tape.glu(x), Err(Error::Dimension(_))));
        let one = tape.input(Matrix::zeros(1, 3));
        let s = tape.input(Matrix::filled(1, 3, 1.0));
        let b = tape.input(Matrix::zeros(1, 3));
        assert!(matches!(
            tape.batch_norm_train(one, s, b, 128, 1e-9),
            Err(Error::BatchSize(1))
        ));
    }
}
