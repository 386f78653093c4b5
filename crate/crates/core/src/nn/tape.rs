//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records the forward computation as a list of primitive
//! ops; [`Tape::backward`] replays it in reverse accumulating
//! vector-Jacobian products. Every layer in this crate builds its
//! forward pass through the tape, so analytic gradients exist for any
//! parameter without per-layer derivations.

use super::matrix::Matrix;
use super::{Activation, NnError};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    /// Broadcast-add a 1xC row vector to every row of an NxC matrix.
    AddRowVec(usize, usize),
    Transpose(usize),
    Activate(usize, Activation),
    /// Elementwise `mul * x + c`; only `mul` matters for the backward pass.
    AffineScalar(usize, f64),
    /// `E[i][j] = col[i] + row[j]` from an Nx1 column and a 1xM row.
    OuterSum(usize, usize),
    /// Column mean: NxC -> 1xC.
    MeanRows(usize),
    /// Sum of all entries -> 1x1.
    SumAll(usize),
    /// Row-wise softmax restricted to positions where mask != 0.
    MaskedRowSoftmax(usize, Matrix),
    /// Cross-entropy of a 1xC logits row against a target class,
    /// scaled by `weight` -> 1x1.
    SoftmaxCrossEntropy {
        logits: usize,
        target: usize,
        weight: f64,
    },
    /// Mean elementwise binary cross-entropy with logits against a
    /// 0/1 target matrix, positives weighted by `pos_weight` -> 1x1.
    WeightedBceLogits {
        logits: usize,
        target: Matrix,
        pos_weight: f64,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Recorded forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Inserts an input (constant or trainable parameter).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::MatMul(a.0, b.0)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let value = self.nodes[a.0].value.add(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let value = self.nodes[a.0].value.sub(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Sub(a.0, b.0)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let value = self.nodes[a.0].value.hadamard(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Hadamard(a.0, b.0)))
    }

    pub fn add_row_vec(&mut self, a: Var, row: Var) -> Result<Var, NnError> {
        let m = &self.nodes[a.0].value;
        let r = &self.nodes[row.0].value;
        if r.rows() != 1 || r.cols() != m.cols() {
            return Err(NnError::Shape(format!(
                "add_row_vec {}x{} + {}x{}",
                m.rows(),
                m.cols(),
                r.rows(),
                r.cols()
            )));
        }
        let value = Matrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) + r.get(0, j));
        Ok(self.push(value, Op::AddRowVec(a.0, row.0)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.transpose();
        self.push(value, Op::Transpose(a.0))
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Var {
        let value = self.nodes[a.0].value.map(|x| act.apply(x));
        self.push(value, Op::Activate(a.0, act))
    }

    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Var {
        let value = self.nodes[a.0].value.map(|x| mul * x + add);
        self.push(value, Op::AffineScalar(a.0, mul))
    }

    pub fn outer_sum(&mut self, col: Var, row: Var) -> Result<Var, NnError> {
        let c = &self.nodes[col.0].value;
        let r = &self.nodes[row.0].value;
        if c.cols() != 1 || r.rows() != 1 {
            return Err(NnError::Shape(format!(
                "outer_sum needs Nx1 and 1xM, got {}x{} and {}x{}",
                c.rows(),
                c.cols(),
                r.rows(),
                r.cols()
            )));
        }
        let value = Matrix::from_fn(c.rows(), r.cols(), |i, j| c.get(i, 0) + r.get(0, j));
        Ok(self.push(value, Op::OuterSum(col.0, row.0)))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let m = &self.nodes[a.0].value;
        let n = m.rows() as f64;
        let value = Matrix::from_fn(1, m.cols(), |_, j| {
            (0..m.rows()).map(|i| m.get(i, j)).sum::<f64>() / n
        });
        self.push(value, Op::MeanRows(a.0))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.data().iter().sum();
        let value = Matrix::from_vec(1, 1, vec![s]).unwrap();
        self.push(value, Op::SumAll(a.0))
    }

    /// Softmax over each row, restricted to positions with nonzero
    /// mask; masked-out outputs are 0. Every row must have at least one
    /// allowed position.
    pub fn masked_row_softmax(&mut self, a: Var, mask: &Matrix) -> Result<Var, NnError> {
        let m = &self.nodes[a.0].value;
        if !m.same_shape(mask) {
            return Err(NnError::Shape(format!(
                "masked_row_softmax value {}x{} vs mask {}x{}",
                m.rows(),
                m.cols(),
                mask.rows(),
                mask.cols()
            )));
        }
        let mut value = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            let mut maxv = f64::NEG_INFINITY;
            for j in 0..m.cols() {
                if mask.get(i, j) != 0.0 {
                    maxv = maxv.max(m.get(i, j));
                }
            }
            if maxv == f64::NEG_INFINITY {
                return Err(NnError::Shape(format!("softmax row {i} has empty mask")));
            }
            let mut denom = 0.0;
            for j in 0..m.cols() {
                if mask.get(i, j) != 0.0 {
                    denom += (m.get(i, j) - maxv).exp();
                }
            }
            for j in 0..m.cols() {
                if mask.get(i, j) != 0.0 {
                    value.set(i, j, (m.get(i, j) - maxv).exp() / denom);
                }
            }
        }
        Ok(self.push(value, Op::MaskedRowSoftmax(a.0, mask.clone())))
    }

    /// Weighted cross-entropy loss of a single logits row vs a class id.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        target: usize,
        weight: f64,
    ) -> Result<Var, NnError> {
        let m = &self.nodes[logits.0].value;
        if m.rows() != 1 || target >= m.cols() {
            return Err(NnError::Shape(format!(
                "softmax_cross_entropy on {}x{}, target {target}",
                m.rows(),
                m.cols()
            )));
        }
        let p = log_softmax_row(m.row(0));
        let loss = -weight * p[target];
        let value = Matrix::from_vec(1, 1, vec![loss]).unwrap();
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits: logits.0,
                target,
                weight,
            },
        ))
    }

    /// Mean elementwise BCE-with-logits against a 0/1 target matrix,
    /// entries with target 1 weighted by `pos_weight`.
    pub fn weighted_bce_logits(
        &mut self,
        logits: Var,
        target: &Matrix,
        pos_weight: f64,
    ) -> Result<Var, NnError> {
        let m = &self.nodes[logits.0].value;
        if !m.same_shape(target) {
            return Err(NnError::Shape(format!(
                "weighted_bce_logits {}x{} vs target {}x{}",
                m.rows(),
                m.cols(),
                target.rows(),
                target.cols()
            )));
        }
        let mut total = 0.0;
        for (x, y) in m.data().iter().zip(target.data().iter()) {
            let w = if *y > 0.5 { pos_weight } else { 1.0 };
            // stable: max(x,0) - x*y + ln(1 + exp(-|x|))
            total += w * (x.max(0.0) - x * y + (-x.abs()).exp().ln_1p());
        }
        let loss = total / (m.rows() * m.cols()) as f64;
        let value = Matrix::from_vec(1, 1, vec![loss]).unwrap();
        Ok(self.push(
            value,
            Op::WeightedBceLogits {
                logits: logits.0,
                target: target.clone(),
                pos_weight,
            },
        ))
    }

    /// Reverse pass from a scalar loss node. Returns per-node gradients;
    /// index with the `Var`s returned during the forward pass.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        if self.nodes.is_empty() {
            return Err(NnError::State("backward called before any forward op".into()));
        }
        let lv = &self.nodes[loss.0].value;
        if lv.shape() != (1, 1) {
            return Err(NnError::Shape(format!(
                "backward requires a 1x1 loss, got {}x{}",
                lv.rows(),
                lv.cols()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]).unwrap());

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].clone() else { continue };
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.nodes[*b].value.transpose())?;
                    let db = self.nodes[*a].value.transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g)?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g.scale(-1.0))?;
                }
                Op::Hadamard(a, b) => {
                    let da = g.hadamard(&self.nodes[*b].value)?;
                    let db = g.hadamard(&self.nodes[*a].value)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::AddRowVec(a, row) => {
                    let drow = Matrix::from_fn(1, g.cols(), |_, j| {
                        (0..g.rows()).map(|i| g.get(i, j)).sum()
                    });
                    accumulate(&mut grads, *a, g)?;
                    accumulate(&mut grads, *row, drow)?;
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, g.transpose())?;
                }
                Op::Activate(a, act) => {
                    let x = &self.nodes[*a].value;
                    let y = &self.nodes[id].value;
                    let da = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                        g.get(i, j) * act.derivative(x.get(i, j), y.get(i, j))
                    });
                    accumulate(&mut grads, *a, da)?;
                }
                Op::AffineScalar(a, mul) => {
                    accumulate(&mut grads, *a, g.scale(*mul))?;
                }
                Op::OuterSum(col, row) => {
                    let dcol = Matrix::from_fn(g.rows(), 1, |i, _| {
                        (0..g.cols()).map(|j| g.get(i, j)).sum()
                    });
                    let drow = Matrix::from_fn(1, g.cols(), |_, j| {
                        (0..g.rows()).map(|i| g.get(i, j)).sum()
                    });
                    accumulate(&mut grads, *col, dcol)?;
                    accumulate(&mut grads, *row, drow)?;
                }
                Op::MeanRows(a) => {
                    let n = self.nodes[*a].value.rows();
                    let scale = 1.0 / n as f64;
                    let da = Matrix::from_fn(n, g.cols(), |_, j| g.get(0, j) * scale);
                    accumulate(&mut grads, *a, da)?;
                }
                Op::SumAll(a) => {
                    let s = g.get(0, 0);
                    let v = &self.nodes[*a].value;
                    let da = Matrix::from_fn(v.rows(), v.cols(), |_, _| s);
                    accumulate(&mut grads, *a, da)?;
                }
                Op::MaskedRowSoftmax(a, _mask) => {
                    let y = &self.nodes[id].value;
                    let mut da = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let dot: f64 = (0..y.cols()).map(|j| g.get(i, j) * y.get(i, j)).sum();
                        for j in 0..y.cols() {
                            da.set(i, j, y.get(i, j) * (g.get(i, j) - dot));
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    target,
                    weight,
                } => {
                    let x = &self.nodes[*logits].value;
                    let lp = log_softmax_row(x.row(0));
                    let s = g.get(0, 0) * weight;
                    let da = Matrix::from_fn(1, x.cols(), |_, j| {
                        let p = lp[j].exp();
                        s * (p - if j == *target { 1.0 } else { 0.0 })
                    });
                    accumulate(&mut grads, *logits, da)?;
                }
                Op::WeightedBceLogits {
                    logits,
                    target,
                    pos_weight,
                } => {
                    let x = &self.nodes[*logits].value;
                    let scale = g.get(0, 0) / (x.rows() * x.cols()) as f64;
                    let da = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                        let y = target.get(i, j);
                        let w = if y > 0.5 { *pos_weight } else { 1.0 };
                        let sig = sigmoid(x.get(i, j));
                        scale * w * (sig - y)
                    });
                    accumulate(&mut grads, *logits, da)?;
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Gradient table produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`; zero matrix if the loss does
    /// not depend on it.
    pub fn get(&self, tape: &Tape, v: Var) -> Matrix {
        match &self.grads[v.0] {
            Some(m) => m.clone(),
            None => {
                let val = tape.value(v);
                Matrix::zeros(val.rows(), val.cols())
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: usize, g: Matrix) -> Result<(), NnError> {
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let maxv = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let logsum = row.iter().map(|x| (x - maxv).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - maxv - logsum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        // f(w) = w^2 at w = 3 -> df/dw = 6
        let mut tape = Tape::new();
        let w = tape.leaf(Matrix::from_vec(1, 1, vec![3.0]).unwrap());
        let sq = tape.hadamard(w, w).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        assert!((grads.get(&tape, w).get(0, 0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn matmul_gradient_matches_finite_difference() {
        let mut base = vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.2];
        let build = |vals: &[f64]| {
            let mut tape = Tape::new();
            let a = tape.leaf(Matrix::from_vec(2, 3, vals.to_vec()).unwrap());
            let b = tape.leaf(
                Matrix::from_vec(3, 2, vec![1.0, 2.0, -1.0, 0.5, 0.3, -0.7]).unwrap(),
            );
            let c = tape.matmul(a, b).unwrap();
            let act = tape.activate(c, Activation::Tanh);
            let loss = tape.sum_all(act);
            (tape, a, loss)
        };
        let (tape, a, loss) = build(&base);
        let grads = tape.backward(loss).unwrap();
        let analytic = grads.get(&tape, a);
        let h = 1e-6;
        for idx in 0..base.len() {
            let orig = base[idx];
            base[idx] = orig + h;
            let (tp, _, lp) = build(&base);
            let fp = tp.value(lp).get(0, 0);
            base[idx] = orig - h;
            let (tm, _, lm) = build(&base);
            let fm = tm.value(lm).get(0, 0);
            base[idx] = orig;
            let num = (fp - fm) / (2.0 * h);
            let ana = analytic.data()[idx];
            assert!((num - ana).abs() < 1e-6, "idx {idx}: {num} vs {ana}");
        }
    }

    #[test]
    fn cross_entropy_zero_gradient_at_target_certainty() {
        // logits strongly favoring the target -> near-zero gradient
        let mut tape = Tape::new();
        let z = tape.leaf(Matrix::from_vec(1, 2, vec![50.0, -50.0]).unwrap());
        let loss = tape.softmax_cross_entropy(z, 0, 1.0).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(&tape, z);
        assert!(g.get(0, 0).abs() < 1e-12);
        assert!(g.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut tape = Tape::new();
        let a = tape.leaf(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(a), Err(NnError::Shape(_))));
    }
}
