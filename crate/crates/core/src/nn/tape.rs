//! A small reverse-mode tape over dense matrices.
//!
//! Nodes are appended in evaluation order; [`Tape::backward`] walks them in
//! reverse and accumulates adjoints. Graph propagation is a single fused node
//! whose backward pass reuses the per-word products cached on the way forward.

use alloc::vec;
use alloc::vec::Vec;

use crate::conv::{apply_g, apply_gt, word_values};
use crate::graph::OperatorSet;
use crate::linalg::Matrix;
use crate::words::{SosFilter, Word};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

struct Propagation<'g> {
    ops: &'g OperatorSet,
    filter: SosFilter,
    sos: bool,
    /// `P_u X` per filter word.
    g_values: Vec<Matrix>,
    /// `P_uᵀ (g X)` per filter word, only for the SOS form.
    gt_values: Vec<Matrix>,
}

/// `Y = Σ_t c_t S_t` with `c_t = Σ w_left · w_right` (or `w_left` for linear
/// contributions).
struct Decoupled {
    terms: Vec<Matrix>,
    contributions: Vec<(usize, usize, Option<usize>)>,
}

enum Op<'g> {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Dropout(Var, Vec<f64>),
    Propagate(Var, Var, Propagation<'g>),
    Decoupled(Var, Decoupled),
    SoftmaxXent {
        logits: Var,
        rows: Vec<usize>,
        labels: Vec<usize>,
        probs: Matrix,
    },
}

struct Node<'g> {
    value: Matrix,
    op: Op<'g>,
}

#[derive(Default)]
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Op<'g>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, index: usize, value: Matrix) -> Var {
        self.push(value, Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// Adds a `1 × k` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let b = self.value(bias);
        if b.rows() != 1 || b.cols() != self.value(a).cols() {
            return Err(Error::DimensionMismatch("bias row".into()));
        }
        let mut v = self.value(a).clone();
        let b = b.row(0).to_vec();
        for i in 0..v.rows() {
            for (x, bj) in v.row_mut(i).iter_mut().zip(&b) {
                *x += bj;
            }
        }
        Ok(self.push(v, Op::AddRow(a, bias)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        v.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    /// Elementwise multiply by a fixed mask (inverted dropout).
    pub fn dropout(&mut self, a: Var, mask: Vec<f64>) -> Var {
        let mut v = self.value(a).clone();
        for (x, m) in v.as_mut_slice().iter_mut().zip(&mask) {
            *x *= m;
        }
        self.push(v, Op::Dropout(a, mask))
    }

    /// `gᵀg X` (or `g X` when `sos` is false) with `g`'s weights taken from the
    /// `1 × C` node `weights`.
    pub fn propagate(&mut self, x: Var, weights: Var, ops: &'g OperatorSet, words: &[Word], order: usize, sos: bool) -> Result<Var> {
        let filter = SosFilter::new(ops.len(), order, words.to_vec(), self.value(weights).as_slice().to_vec())?;
        let input = self.value(x);
        let (g_values, _) = word_values(&filter, ops, input, false)?;
        let mut u = Matrix::zeros(input.rows(), input.cols());
        for (w, v) in filter.weights().iter().zip(&g_values) {
            u.axpy(*w, v);
        }
        let (y, gt_values) = if sos {
            let (gt_values, _) = word_values(&filter, ops, &u, true)?;
            let mut y = Matrix::zeros(u.rows(), u.cols());
            for (w, v) in filter.weights().iter().zip(&gt_values) {
                y.axpy(*w, v);
            }
            (y, gt_values)
        } else {
            (u, Vec::new())
        };
        if !y.is_finite() {
            return Err(Error::NonFinite("propagation"));
        }
        let prop = Propagation {
            ops,
            filter,
            sos,
            g_values,
            gt_values,
        };
        Ok(self.push(y, Op::Propagate(x, weights, prop)))
    }

    /// Weighted sum of precomputed row blocks; see [`crate::nn::DecoupledPlan`].
    pub fn decoupled(&mut self, weights: Var, terms: Vec<Matrix>, contributions: Vec<(usize, usize, Option<usize>)>) -> Result<Var> {
        let (rows, cols) = terms.first().map_or((0, 0), Matrix::shape);
        let w = self.value(weights).as_slice();
        let mut coef = vec![0.0; terms.len()];
        for &(t, l, r) in &contributions {
            coef[t] += w[l] * r.map_or(1.0, |r| w[r]);
        }
        let mut y = Matrix::zeros(rows, cols);
        for (c, s) in coef.iter().zip(&terms) {
            if *c != 0.0 {
                y.axpy(*c, s);
            }
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("decoupled propagation"));
        }
        Ok(self.push(y, Op::Decoupled(weights, Decoupled { terms, contributions })))
    }

    /// Mean softmax cross-entropy over `rows` of `logits`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, rows: Vec<usize>, labels: Vec<usize>) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::Empty("loss mask"));
        }
        let z = self.value(logits);
        if let Some(&l) = labels.iter().find(|&&l| l >= z.cols()) {
            return Err(Error::InvalidValue(alloc::format!("label {l} >= {} classes", z.cols())));
        }
        let mut probs = Matrix::zeros(rows.len(), z.cols());
        let mut loss = 0.0;
        for (k, (&r, &label)) in rows.iter().zip(&labels).enumerate() {
            let row = z.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (p, &v) in probs.row_mut(k).iter_mut().zip(row) {
                *p = libm::exp(v - max);
                sum += *p;
            }
            probs.row_mut(k).iter_mut().for_each(|p| *p /= sum);
            loss += max + libm::log(sum) - row[label];
        }
        loss /= rows.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        Ok(self.push(
            Matrix::from_vec(1, 1, vec![loss]).expect("1x1"),
            Op::SoftmaxXent {
                logits,
                rows,
                labels,
                probs,
            },
        ))
    }

    /// Gradients of the scalar `output` with respect to every `Param` node,
    /// indexed by parameter index (`None` if the parameter did not contribute).
    pub fn backward(&self, output: Var, num_params: usize) -> Result<Vec<Option<Matrix>>> {
        let mut adj: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[output.0] = Some(Matrix::from_vec(1, 1, vec![1.0]).expect("1x1"));
        let mut params: Vec<Option<Matrix>> = (0..num_params).map(|_| None).collect();

        for i in (0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(p) => accumulate(&mut params[*p], g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b))?;
                    let gb = self.value(*a).t_matmul(&g)?;
                    accumulate(&mut adj[a.0], ga);
                    accumulate(&mut adj[b.0], gb);
                }
                Op::AddRow(a, bias) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut adj[bias.0], gb);
                    accumulate(&mut adj[a.0], g);
                }
                Op::Relu(a) => {
                    let mut ga = g;
                    for (x, &y) in ga.as_mut_slice().iter_mut().zip(self.nodes[i].value.as_slice()) {
                        if y <= 0.0 {
                            *x = 0.0;
                        }
                    }
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Dropout(a, mask) => {
                    let mut ga = g;
                    for (x, m) in ga.as_mut_slice().iter_mut().zip(mask) {
                        *x *= m;
                    }
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Propagate(x, weights, prop) => {
                    let f = &prop.filter;
                    let mut gw = Matrix::zeros(1, f.len());
                    let gx = if prop.sos {
                        // Y = gᵀU, U = gX: dU = gG, dX = gᵀ dU.
                        for (o, v) in gw.row_mut(0).iter_mut().zip(&prop.gt_values) {
                            *o += g.dot(v);
                        }
                        let du = apply_g(f, prop.ops, &g)?;
                        for (o, v) in gw.row_mut(0).iter_mut().zip(&prop.g_values) {
                            *o += du.dot(v);
                        }
                        apply_gt(f, prop.ops, &du)?
                    } else {
                        for (o, v) in gw.row_mut(0).iter_mut().zip(&prop.g_values) {
                            *o += g.dot(v);
                        }
                        apply_gt(f, prop.ops, &g)?
                    };
                    accumulate(&mut adj[weights.0], gw);
                    accumulate(&mut adj[x.0], gx);
                }
                Op::Decoupled(weights, d) => {
                    let w = self.value(*weights).as_slice();
                    let inner: Vec<f64> = d.terms.iter().map(|s| g.dot(s)).collect();
                    let mut gw = Matrix::zeros(1, w.len());
                    let row = gw.row_mut(0);
                    for &(t, l, r) in &d.contributions {
                        match r {
                            Some(r) => {
                                row[l] += inner[t] * w[r];
                                row[r] += inner[t] * w[l];
                            }
                            None => row[l] += inner[t],
                        }
                    }
                    accumulate(&mut adj[weights.0], gw);
                }
                Op::SoftmaxXent {
                    logits,
                    rows,
                    labels,
                    probs,
                } => {
                    let z = self.value(*logits);
                    let scale = g[(0, 0)] / rows.len() as f64;
                    let mut gz = Matrix::zeros(z.rows(), z.cols());
                    for (k, (&r, &label)) in rows.iter().zip(labels).enumerate() {
                        let out = gz.row_mut(r);
                        for (o, p) in out.iter_mut().zip(probs.row(k)) {
                            *o += scale * p;
                        }
                        out[label] -= scale;
                    }
                    accumulate(&mut adj[logits.0], gz);
                }
            }
        }
        Ok(params)
    }
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => acc.axpy(1.0, &g),
        None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_bias_relu_gradients() {
        // loss = CE(relu(x W + b)) on one row; check against hand derivation.
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::from_rows(&[&[1.0, 2.0]]).unwrap());
        let w = tape.param(0, Matrix::from_rows(&[&[1.0, -1.0], &[0.5, 0.0]]).unwrap());
        let b = tape.param(1, Matrix::from_rows(&[&[0.0, 0.5]]).unwrap());
        let h = tape.matmul(x, w).unwrap();
        let h = tape.add_row(h, b).unwrap();
        let z = tape.relu(h);
        // z = relu([2, -0.5]) = [2, 0]
        assert_eq!(tape.value(z).row(0), &[2.0, 0.0]);
        let loss = tape.softmax_cross_entropy(z, vec![0], vec![1]).unwrap();
        let grads = tape.backward(loss, 2).unwrap();
        let p0 = libm::exp(2.0) / (libm::exp(2.0) + 1.0);
        // dL/dz = [p0, p1 - 1]; relu kills the second column.
        let gw = grads[0].as_ref().unwrap();
        assert!((gw[(0, 0)] - p0).abs() < 1e-15);
        assert!((gw[(1, 0)] - 2.0 * p0).abs() < 1e-15);
        assert_eq!(gw[(0, 1)], 0.0);
        let gb = grads[1].as_ref().unwrap();
        assert!((gb[(0, 0)] - p0).abs() < 1e-15);
    }

    #[test]
    fn empty_loss_mask_is_rejected() {
        let mut tape = Tape::new();
        let z = tape.leaf(Matrix::zeros(2, 2));
        assert_eq!(tape.softmax_cross_entropy(z, vec![], vec![]).unwrap_err(), Error::Empty("loss mask"));
    }
}
