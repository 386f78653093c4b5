//! Graph and dense layers built on the autodiff tape.
//!
//! All forwards are tape expressions, so one `backward` call yields
//! gradients for every parameter. Convenience wrappers that evaluate a
//! layer outside a training loop run on a throwaway tape.

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use super::NnError;
use rand::Rng;

/// Negative slope of LeakyReLU (used by the attention scorer).
pub const LEAKY_RELU_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    LeakyRelu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    LEAKY_RELU_SLOPE * x
                }
            }
        }
    }

    /// Derivative given the input `x` and the already-computed output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
        }
    }
}

/// Glorot uniform initialization in +-sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

/// Symmetric GCN propagation matrix: with self-loops added, scale rows
/// and columns by the inverse square root of the (self-loop-inclusive)
/// degree.
pub fn normalize_adjacency(a: &Matrix) -> Result<Matrix, NnError> {
    if a.rows() != a.cols() {
        return Err(NnError::Shape(format!(
            "adjacency must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.data().iter().any(|&v| v < 0.0) {
        return Err(NnError::InvalidArgument(
            "adjacency entries must be non-negative".into(),
        ));
    }
    let n = a.rows();
    let with_loops = Matrix::from_fn(n, n, |i, j| a.get(i, j) + if i == j { 1.0 } else { 0.0 });
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = (0..n).map(|j| with_loops.get(i, j)).sum();
            1.0 / d.sqrt()
        })
        .collect();
    Ok(Matrix::from_fn(n, n, |i, j| {
        inv_sqrt_deg[i] * with_loops.get(i, j) * inv_sqrt_deg[j]
    }))
}

/// Adjacency mask with self-loops (for attention neighborhoods).
pub fn adjacency_with_self_loops(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        if i == j || a.get(i, j) != 0.0 {
            1.0
        } else {
            0.0
        }
    })
}

/// Numerically stable softmax of a slice.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let maxv = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - maxv).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / denom).collect()
}

/// Graph-convolution parameters: one trainable projection.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub theta: Matrix,
}

/// Attention layer parameters: projection plus the two halves of the
/// attention scoring vector (self part and neighbor part).
#[derive(Debug, Clone, PartialEq)]
pub struct GatParams {
    pub theta: Matrix,
    pub attn_self: Matrix,
    pub attn_neigh: Matrix,
}

/// Gated (GRU) message-passing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GgnnParams {
    pub w: Matrix,
    pub u: Matrix,
    pub wz: Matrix,
    pub uz: Matrix,
    pub wr: Matrix,
    pub ur: Matrix,
    pub bias: Matrix,
}

/// Fully connected layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FcParams {
    pub weight: Matrix,
    pub bias: Matrix,
}

/// Any layer's parameters, for checkpointing and optimizer plumbing.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Gcn(GcnParams),
    Gat(GatParams),
    Ggnn(GgnnParams),
    Fc(FcParams),
}

impl LayerParams {
    /// Named views of every trainable matrix in this layer.
    pub fn matrices(&self) -> Vec<(&'static str, &Matrix)> {
        match self {
            LayerParams::Gcn(p) => vec![("theta", &p.theta)],
            LayerParams::Gat(p) => vec![
                ("theta", &p.theta),
                ("attn_self", &p.attn_self),
                ("attn_neigh", &p.attn_neigh),
            ],
            LayerParams::Ggnn(p) => vec![
                ("w", &p.w),
                ("u", &p.u),
                ("wz", &p.wz),
                ("uz", &p.uz),
                ("wr", &p.wr),
                ("ur", &p.ur),
                ("bias", &p.bias),
            ],
            LayerParams::Fc(p) => vec![("weight", &p.weight), ("bias", &p.bias)],
        }
    }

    pub fn matrices_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        match self {
            LayerParams::Gcn(p) => vec![("theta", &mut p.theta)],
            LayerParams::Gat(p) => vec![
                ("theta", &mut p.theta),
                ("attn_self", &mut p.attn_self),
                ("attn_neigh", &mut p.attn_neigh),
            ],
            LayerParams::Ggnn(p) => vec![
                ("w", &mut p.w),
                ("u", &mut p.u),
                ("wz", &mut p.wz),
                ("uz", &mut p.uz),
                ("wr", &mut p.wr),
                ("ur", &mut p.ur),
                ("bias", &mut p.bias),
            ],
            LayerParams::Fc(p) => vec![("weight", &mut p.weight), ("bias", &mut p.bias)],
        }
    }
}

/// One GCN layer on the tape: `act(a_norm . h . theta)`.
pub fn gcn_forward_t(
    tape: &mut Tape,
    h: Var,
    a_norm: Var,
    theta: Var,
    act: Activation,
) -> Result<Var, NnError> {
    let agg = tape.matmul(a_norm, h)?;
    let proj = tape.matmul(agg, theta)?;
    Ok(tape.activate(proj, act))
}

/// One attention layer on the tape. `mask` is the neighborhood
/// indicator including self-loops; attention logits come from a
/// single-layer scorer with LeakyReLU, normalized by a masked softmax.
pub fn gat_forward_t(
    tape: &mut Tape,
    h: Var,
    mask: &Matrix,
    params_theta: Var,
    params_attn_self: Var,
    params_attn_neigh: Var,
    act: Activation,
) -> Result<Var, NnError> {
    let n = tape.value(h).rows();
    if mask.rows() != n || mask.cols() != n {
        return Err(NnError::Shape(format!(
            "mask {}x{} vs {n} nodes",
            mask.rows(),
            mask.cols()
        )));
    }
    for i in 0..n {
        if mask.get(i, i) == 0.0 {
            return Err(NnError::InvalidArgument(format!(
                "attention neighborhood of node {i} must include itself"
            )));
        }
    }
    let g = tape.matmul(h, params_theta)?;
    let s_self = tape.matmul(g, params_attn_self)?; // n x 1
    let s_neigh = tape.matmul(g, params_attn_neigh)?; // n x 1
    let s_neigh_row = tape.transpose(s_neigh); // 1 x n
    let logits = tape.outer_sum(s_self, s_neigh_row)?; // e_ij = a_s.g_i + a_n.g_j
    let scored = tape.activate(logits, Activation::LeakyRelu);
    let alpha = tape.masked_row_softmax(scored, mask)?;
    let out = tape.matmul(alpha, g)?;
    Ok(tape.activate(out, act))
}

/// Gated message passing on the tape: `steps` GRU updates where each
/// node aggregates neighbor states through `adj` (no self-loops) plus a
/// bias, then gates the blend of old state and candidate state.
pub fn ggnn_forward_t(
    tape: &mut Tape,
    h0: Var,
    adj: Var,
    p: &GgnnVars,
    steps: usize,
) -> Result<Var, NnError> {
    if steps == 0 {
        return Err(NnError::InvalidArgument("steps must be >= 1".into()));
    }
    let mut h = h0;
    for _ in 0..steps {
        let agg = tape.matmul(adj, h)?;
        let a = tape.add_row_vec(agg, p.bias)?;
        let az = tape.matmul(a, p.wz)?;
        let hz = tape.matmul(h, p.uz)?;
        let z_pre = tape.add(az, hz)?;
        let z = tape.activate(z_pre, Activation::Sigmoid);
        let ar = tape.matmul(a, p.wr)?;
        let hr = tape.matmul(h, p.ur)?;
        let r_pre = tape.add(ar, hr)?;
        let r = tape.activate(r_pre, Activation::Sigmoid);
        let aw = tape.matmul(a, p.w)?;
        let rh = tape.hadamard(r, h)?;
        let rhu = tape.matmul(rh, p.u)?;
        let cand_pre = tape.add(aw, rhu)?;
        let cand = tape.activate(cand_pre, Activation::Tanh);
        let one_minus_z = tape.affine(z, -1.0, 1.0);
        let keep = tape.hadamard(one_minus_z, h)?;
        let take = tape.hadamard(z, cand)?;
        h = tape.add(keep, take)?;
    }
    Ok(h)
}

/// Tape handles for GGNN parameters.
pub struct GgnnVars {
    pub w: Var,
    pub u: Var,
    pub wz: Var,
    pub uz: Var,
    pub wr: Var,
    pub ur: Var,
    pub bias: Var,
}

impl GgnnVars {
    pub fn insert(tape: &mut Tape, p: &GgnnParams) -> GgnnVars {
        GgnnVars {
            w: tape.leaf(p.w.clone()),
            u: tape.leaf(p.u.clone()),
            wz: tape.leaf(p.wz.clone()),
            uz: tape.leaf(p.uz.clone()),
            wr: tape.leaf(p.wr.clone()),
            ur: tape.leaf(p.ur.clone()),
            bias: tape.leaf(p.bias.clone()),
        }
    }

    pub fn all(&self) -> [Var; 7] {
        [
            self.w, self.u, self.wz, self.uz, self.wr, self.ur, self.bias,
        ]
    }
}

/// Fully connected layer on the tape: `act(x . w + b)`.
pub fn fc_forward_t(
    tape: &mut Tape,
    x: Var,
    weight: Var,
    bias: Var,
    act: Activation,
) -> Result<Var, NnError> {
    let xw = tape.matmul(x, weight)?;
    let pre = tape.add_row_vec(xw, bias)?;
    Ok(tape.activate(pre, act))
}

// ---- plain (inference) wrappers -------------------------------------

/// `act(a_norm . h . theta)` without building a persistent tape.
pub fn gcn_forward(
    h: &Matrix,
    a_norm: &Matrix,
    theta: &Matrix,
    act: Activation,
) -> Result<Matrix, NnError> {
    let mut tape = Tape::new();
    let hv = tape.leaf(h.clone());
    let av = tape.leaf(a_norm.clone());
    let tv = tape.leaf(theta.clone());
    let out = gcn_forward_t(&mut tape, hv, av, tv, act)?;
    Ok(tape.value(out).clone())
}

/// Attention layer over the raw adjacency (self-loops added here).
pub fn gat_forward(
    h: &Matrix,
    adjacency: &Matrix,
    params: &GatParams,
    act: Activation,
) -> Result<Matrix, NnError> {
    let mask = adjacency_with_self_loops(adjacency);
    let mut tape = Tape::new();
    let hv = tape.leaf(h.clone());
    let th = tape.leaf(params.theta.clone());
    let a_s = tape.leaf(params.attn_self.clone());
    let a_n = tape.leaf(params.attn_neigh.clone());
    let out = gat_forward_t(&mut tape, hv, &mask, th, a_s, a_n, act)?;
    Ok(tape.value(out).clone())
}

/// Gated message passing over `steps` GRU updates.
pub fn ggnn_forward(
    h0: &Matrix,
    adj: &Matrix,
    params: &GgnnParams,
    steps: usize,
) -> Result<Matrix, NnError> {
    let mut tape = Tape::new();
    let hv = tape.leaf(h0.clone());
    let av = tape.leaf(adj.clone());
    let vars = GgnnVars::insert(&mut tape, params);
    let out = ggnn_forward_t(&mut tape, hv, av, &vars, steps)?;
    Ok(tape.value(out).clone())
}

/// `act(x . w + b)` as plain matrices.
pub fn fc_forward(
    x: &Matrix,
    weight: &Matrix,
    bias: &Matrix,
    act: Activation,
) -> Result<Matrix, NnError> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let wv = tape.leaf(weight.clone());
    let bv = tape.leaf(bias.clone());
    let out = fc_forward_t(&mut tape, xv, wv, bv, act)?;
    Ok(tape.value(out).clone())
}
