//! Reverse-mode automatic differentiation over matrix/vector/scalar nodes.
//!
//! The training loss is a long chain of small dense operations (observer
//! steps, recurrent steps, norms), so the tape works at tensor granularity:
//! each node stores a whole `DMatrix`, `DVector`, or `f64` plus the
//! operation that produced it.  A backward sweep in reverse insertion order
//! accumulates adjoints; leaves flagged as parameters collect gradients,
//! constant leaves are skipped.
//!
//! The op set is exactly what the observer-predictor loss needs, including a
//! spectral-norm node whose gradient uses the singular-vector identity
//! `d sigma / d M = u v^T` (valid wherever the top singular value is simple,
//! which holds almost surely for trained weights).

use nalgebra::{DMatrix, DVector};

use crate::nn::spectral::{spectral_norm_full, DEFAULT_ITERS, DEFAULT_TOL};

/// Handle to a node on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(u32);

impl NodeId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

/// Runtime value held by a node.
#[derive(Debug, Clone)]
enum Payload {
    Scalar(f64),
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone)]
enum Op {
    /// Parameter or constant input; distinguished by the node's grad flag.
    Leaf,
    /// `M v`
    MatVec { m: NodeId, v: NodeId },
    /// `A B`
    MatMul { a: NodeId, b: NodeId },
    /// `A - B`
    MatSub { a: NodeId, b: NodeId },
    /// `a + b` (vectors)
    AddV { a: NodeId, b: NodeId },
    /// `a - b` (vectors)
    SubV { a: NodeId, b: NodeId },
    /// Elementwise product
    Hadamard { a: NodeId, b: NodeId },
    /// `1 - x` elementwise
    OneMinusV { x: NodeId },
    /// Elementwise `max(0, x)`
    ReluV { x: NodeId },
    /// Elementwise logistic sigmoid
    SigmoidV { x: NodeId },
    /// Elementwise tanh
    TanhV { x: NodeId },
    /// Vertical concatenation `[a; b]`
    ConcatV { a: NodeId, b: NodeId, split: usize },
    /// `||x||^2`
    SqNormV { x: NodeId },
    /// `a + b` (scalars)
    AddS { a: NodeId, b: NodeId },
    /// `a * b` (scalars)
    MulS { a: NodeId, b: NodeId },
    /// `c * x` (scalar by constant)
    ScaleS { x: NodeId, c: f64 },
    /// `x + c` (scalar plus constant)
    AddConstS { x: NodeId },
    /// `max(0, x)` (scalar hinge); subgradient 0 at the kink
    HingeS { x: NodeId },
    /// Largest singular value of a matrix node, with the singular vectors
    /// captured at forward time for the rank-one gradient.
    SpectralNormS {
        m: NodeId,
        left: DVector<f64>,
        right: DVector<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Payload,
    op: Op,
    needs_grad: bool,
}

/// Append-only computation record supporting one backward sweep.
#[derive(Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`GradTape::backward`], indexed by [`NodeId`].
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Payload>>,
}

impl Gradients {
    /// Gradient of the seed with respect to a matrix node (zero matrix if the
    /// node never influenced the seed).
    pub fn matrix(&self, id: NodeId, rows: usize, cols: usize) -> DMatrix<f64> {
        match &self.adjoints[id.index()] {
            Some(Payload::Matrix(m)) => m.clone(),
            None => DMatrix::zeros(rows, cols),
            _ => panic!("node {id:?} is not a matrix"),
        }
    }

    /// Gradient with respect to a vector node.
    pub fn vector(&self, id: NodeId, len: usize) -> DVector<f64> {
        match &self.adjoints[id.index()] {
            Some(Payload::Vector(v)) => v.clone(),
            None => DVector::zeros(len),
            _ => panic!("node {id:?} is not a vector"),
        }
    }

    /// Gradient with respect to a scalar node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        match &self.adjoints[id.index()] {
            Some(Payload::Scalar(s)) => *s,
            None => 0.0,
            _ => panic!("node {id:?} is not a scalar"),
        }
    }
}

impl GradTape {
    /// Empty tape.
    pub fn new() -> Self {
        Self::default()
    }

    /// Nodes recorded so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True if nothing has been recorded.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Payload, op: Op, needs_grad: bool) -> NodeId {
        let id = self.nodes.len();
        assert!(id < u32::MAX as usize, "tape overflow");
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(id as u32)
    }

    fn grad(&self, id: NodeId) -> bool {
        self.nodes[id.index()].needs_grad
    }

    // ---- leaves -----------------------------------------------------------

    /// Records a matrix parameter (collects gradient).
    pub fn param_matrix(&mut self, m: DMatrix<f64>) -> NodeId {
        self.push(Payload::Matrix(m), Op::Leaf, true)
    }

    /// Records a matrix constant (no gradient).
    pub fn const_matrix(&mut self, m: DMatrix<f64>) -> NodeId {
        self.push(Payload::Matrix(m), Op::Leaf, false)
    }

    /// Records a vector parameter.
    pub fn param_vector(&mut self, v: DVector<f64>) -> NodeId {
        self.push(Payload::Vector(v), Op::Leaf, true)
    }

    /// Records a vector constant.
    pub fn const_vector(&mut self, v: DVector<f64>) -> NodeId {
        self.push(Payload::Vector(v), Op::Leaf, false)
    }

    /// Records a scalar constant.
    pub fn const_scalar(&mut self, s: f64) -> NodeId {
        self.push(Payload::Scalar(s), Op::Leaf, false)
    }

    // ---- value access -----------------------------------------------------

    /// Value of a scalar node.
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        match &self.nodes[id.index()].value {
            Payload::Scalar(s) => *s,
            _ => panic!("node {id:?} is not a scalar"),
        }
    }

    /// Value of a vector node.
    pub fn vector_value(&self, id: NodeId) -> &DVector<f64> {
        match &self.nodes[id.index()].value {
            Payload::Vector(v) => v,
            _ => panic!("node {id:?} is not a vector"),
        }
    }

    /// Value of a matrix node.
    pub fn matrix_value(&self, id: NodeId) -> &DMatrix<f64> {
        match &self.nodes[id.index()].value {
            Payload::Matrix(m) => m,
            _ => panic!("node {id:?} is not a matrix"),
        }
    }

    // ---- matrix ops -------------------------------------------------------

    /// `M v`.
    pub fn mat_vec(&mut self, m: NodeId, v: NodeId) -> NodeId {
        let out = self.matrix_value(m) * self.vector_value(v);
        let needs = self.grad(m) || self.grad(v);
        self.push(Payload::Vector(out), Op::MatVec { m, v }, needs)
    }

    /// `A B`.
    pub fn mat_mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.matrix_value(a) * self.matrix_value(b);
        let needs = self.grad(a) || self.grad(b);
        self.push(Payload::Matrix(out), Op::MatMul { a, b }, needs)
    }

    /// `A - B`.
    pub fn mat_sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.matrix_value(a) - self.matrix_value(b);
        let needs = self.grad(a) || self.grad(b);
        self.push(Payload::Matrix(out), Op::MatSub { a, b }, needs)
    }

    // ---- vector ops -------------------------------------------------------

    /// `a + b`.
    pub fn add_v(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.vector_value(a) + self.vector_value(b);
        let needs = self.grad(a) || self.grad(b);
        self.push(Payload::Vector(out), Op::AddV { a, b }, needs)
    }

    /// `a - b`.
    pub fn sub_v(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.vector_value(a) - self.vector_value(b);
        let needs = self.grad(a) || self.grad(b);
        self.push(Payload::Vector(out), Op::SubV { a, b }, needs)
    }

    /// Elementwise `a .* b`.
    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.vector_value(a).component_mul(self.vector_value(b));
        let needs = self.grad(a) || self.grad(b);
        self.push(Payload::Vector(out), Op::Hadamard { a, b }, needs)
    }

    /// Elementwise `1 - x`.
    pub fn one_minus_v(&mut self, x: NodeId) -> NodeId {
        let out = self.vector_value(x).map(|v| 1.0 - v);
        let needs = self.grad(x);
        self.push(Payload::Vector(out), Op::OneMinusV { x }, needs)
    }

    /// Elementwise ReLU.
    pub fn relu_v(&mut self, x: NodeId) -> NodeId {
        let out = self.vector_value(x).map(|v| v.max(0.0));
        let needs = self.grad(x);
        self.push(Payload::Vector(out), Op::ReluV { x }, needs)
    }

    /// Elementwise sigmoid.
    pub fn sigmoid_v(&mut self, x: NodeId) -> NodeId {
        let out = self.vector_value(x).map(crate::nn::sigmoid);
        let needs = self.grad(x);
        self.push(Payload::Vector(out), Op::SigmoidV { x }, needs)
    }

    /// Elementwise tanh.
    pub fn tanh_v(&mut self, x: NodeId) -> NodeId {
        let out = self.vector_value(x).map(f64::tanh);
        let needs = self.grad(x);
        self.push(Payload::Vector(out), Op::TanhV { x }, needs)
    }

    /// Stacks `[a; b]`.
    pub fn concat_v(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.vector_value(a);
        let vb = self.vector_value(b);
        let split = va.len();
        let mut out = DVector::zeros(split + vb.len());
        out.rows_mut(0, split).copy_from(va);
        out.rows_mut(split, vb.len()).copy_from(vb);
        let needs = self.grad(a) || self.grad(b);
        self.push(Payload::Vector(out), Op::ConcatV { a, b, split }, needs)
    }

    /// `||x||^2` as a scalar node.
    pub fn sq_norm(&mut self, x: NodeId) -> NodeId {
        let out = self.vector_value(x).norm_squared();
        let needs = self.grad(x);
        self.push(Payload::Scalar(out), Op::SqNormV { x }, needs)
    }

    // ---- scalar ops -------------------------------------------------------

    /// `a + b`.
    pub fn add_s(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.scalar_value(a) + self.scalar_value(b);
        let needs = self.grad(a) || self.grad(b);
        self.push(Payload::Scalar(out), Op::AddS { a, b }, needs)
    }

    /// `a * b`.
    pub fn mul_s(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.scalar_value(a) * self.scalar_value(b);
        let needs = self.grad(a) || self.grad(b);
        self.push(Payload::Scalar(out), Op::MulS { a, b }, needs)
    }

    /// `c * x` for a literal `c`.
    pub fn scale_s(&mut self, x: NodeId, c: f64) -> NodeId {
        let out = c * self.scalar_value(x);
        let needs = self.grad(x);
        self.push(Payload::Scalar(out), Op::ScaleS { x, c }, needs)
    }

    /// `x + c` for a literal `c`.
    pub fn add_const_s(&mut self, x: NodeId, c: f64) -> NodeId {
        let out = self.scalar_value(x) + c;
        let needs = self.grad(x);
        self.push(Payload::Scalar(out), Op::AddConstS { x }, needs)
    }

    /// `max(0, x)`.
    pub fn hinge_s(&mut self, x: NodeId) -> NodeId {
        let out = self.scalar_value(x).max(0.0);
        let needs = self.grad(x);
        self.push(Payload::Scalar(out), Op::HingeS { x }, needs)
    }

    /// Largest singular value of matrix node `m`.
    ///
    /// `warm_start` seeds the power iteration with a previous right singular
    /// vector; retrieve the new one through [`GradTape::spectral_vectors`] to
    /// maintain a cache across training steps.
    pub fn spectral_norm_s(&mut self, m: NodeId, warm_start: Option<&DVector<f64>>) -> NodeId {
        let full = spectral_norm_full(self.matrix_value(m), DEFAULT_ITERS, DEFAULT_TOL, warm_start);
        let needs = self.grad(m);
        self.push(
            Payload::Scalar(full.sigma),
            Op::SpectralNormS {
                m,
                left: full.left,
                right: full.right,
            },
            needs,
        )
    }

    /// Singular vectors captured by a [`GradTape::spectral_norm_s`] node.
    pub fn spectral_vectors(&self, id: NodeId) -> (&DVector<f64>, &DVector<f64>) {
        match &self.nodes[id.index()].op {
            Op::SpectralNormS { left, right, .. } => (left, right),
            _ => panic!("node {id:?} is not a spectral-norm node"),
        }
    }

    // ---- backward ---------------------------------------------------------

    /// Reverse sweep from a scalar seed node; returns adjoints for every
    /// gradient-requiring node reachable from the seed.
    pub fn backward(&self, seed: NodeId) -> Gradients {
        assert!(
            matches!(self.nodes[seed.index()].value, Payload::Scalar(_)),
            "backward seed must be a scalar node"
        );
        let mut adj: Vec<Option<Payload>> = vec![None; self.nodes.len()];
        adj[seed.index()] = Some(Payload::Scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            // Leaf adjoints are the result of the sweep; they stay in place
            // for collection.  Interior adjoints are consumed as we pass.
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(out_adj) = adj[i].take() else {
                continue;
            };
            match (&node.op, &out_adj) {
                (Op::Leaf, _) => {}
                (Op::MatVec { m, v }, Payload::Vector(g)) => {
                    if self.grad(*m) {
                        let delta = g * self.vector_value(*v).transpose();
                        self.accumulate_matrix(&mut adj, *m, &delta);
                    }
                    if self.grad(*v) {
                        let delta = self.matrix_value(*m).tr_mul(g);
                        self.accumulate_vector(&mut adj, *v, &delta);
                    }
                }
                (Op::MatMul { a, b }, Payload::Matrix(g)) => {
                    if self.grad(*a) {
                        let delta = g * self.matrix_value(*b).transpose();
                        self.accumulate_matrix(&mut adj, *a, &delta);
                    }
                    if self.grad(*b) {
                        let delta = self.matrix_value(*a).tr_mul(g);
                        self.accumulate_matrix(&mut adj, *b, &delta);
                    }
                }
                (Op::MatSub { a, b }, Payload::Matrix(g)) => {
                    if self.grad(*a) {
                        self.accumulate_matrix(&mut adj, *a, g);
                    }
                    if self.grad(*b) {
                        self.accumulate_matrix(&mut adj, *b, &(-g));
                    }
                }
                (Op::AddV { a, b }, Payload::Vector(g)) => {
                    if self.grad(*a) {
                        self.accumulate_vector(&mut adj, *a, g);
                    }
                    if self.grad(*b) {
                        self.accumulate_vector(&mut adj, *b, g);
                    }
                }
                (Op::SubV { a, b }, Payload::Vector(g)) => {
                    if self.grad(*a) {
                        self.accumulate_vector(&mut adj, *a, g);
                    }
                    if self.grad(*b) {
                        self.accumulate_vector(&mut adj, *b, &(-g));
                    }
                }
                (Op::Hadamard { a, b }, Payload::Vector(g)) => {
                    if self.grad(*a) {
                        let delta = g.component_mul(self.vector_value(*b));
                        self.accumulate_vector(&mut adj, *a, &delta);
                    }
                    if self.grad(*b) {
                        let delta = g.component_mul(self.vector_value(*a));
                        self.accumulate_vector(&mut adj, *b, &delta);
                    }
                }
                (Op::OneMinusV { x }, Payload::Vector(g)) => {
                    self.accumulate_vector(&mut adj, *x, &(-g));
                }
                (Op::ReluV { x }, Payload::Vector(g)) => {
                    let input = self.vector_value(*x);
                    let delta = DVector::from_fn(g.len(), |r, _| {
                        if input[r] > 0.0 {
                            g[r]
                        } else {
                            0.0
                        }
                    });
                    self.accumulate_vector(&mut adj, *x, &delta);
                }
                (Op::SigmoidV { x }, Payload::Vector(g)) => {
                    let out = match &node.value {
                        Payload::Vector(v) => v,
                        _ => unreachable!(),
                    };
                    let delta = DVector::from_fn(g.len(), |r, _| g[r] * out[r] * (1.0 - out[r]));
                    self.accumulate_vector(&mut adj, *x, &delta);
                }
                (Op::TanhV { x }, Payload::Vector(g)) => {
                    let out = match &node.value {
                        Payload::Vector(v) => v,
                        _ => unreachable!(),
                    };
                    let delta = DVector::from_fn(g.len(), |r, _| g[r] * (1.0 - out[r] * out[r]));
                    self.accumulate_vector(&mut adj, *x, &delta);
                }
                (Op::ConcatV { a, b, split }, Payload::Vector(g)) => {
                    if self.grad(*a) {
                        let delta = g.rows(0, *split).into_owned();
                        self.accumulate_vector(&mut adj, *a, &delta);
                    }
                    if self.grad(*b) {
                        let delta = g.rows(*split, g.len() - split).into_owned();
                        self.accumulate_vector(&mut adj, *b, &delta);
                    }
                }
                (Op::SqNormV { x }, Payload::Scalar(g)) => {
                    let delta = self.vector_value(*x) * (2.0 * g);
                    self.accumulate_vector(&mut adj, *x, &delta);
                }
                (Op::AddS { a, b }, Payload::Scalar(g)) => {
                    if self.grad(*a) {
                        self.accumulate_scalar(&mut adj, *a, *g);
                    }
                    if self.grad(*b) {
                        self.accumulate_scalar(&mut adj, *b, *g);
                    }
                }
                (Op::MulS { a, b }, Payload::Scalar(g)) => {
                    if self.grad(*a) {
                        self.accumulate_scalar(&mut adj, *a, g * self.scalar_value(*b));
                    }
                    if self.grad(*b) {
                        self.accumulate_scalar(&mut adj, *b, g * self.scalar_value(*a));
                    }
                }
                (Op::ScaleS { x, c }, Payload::Scalar(g)) => {
                    self.accumulate_scalar(&mut adj, *x, g * c);
                }
                (Op::AddConstS { x }, Payload::Scalar(g)) => {
                    self.accumulate_scalar(&mut adj, *x, *g);
                }
                (Op::HingeS { x }, Payload::Scalar(g)) => {
                    if self.scalar_value(*x) > 0.0 {
                        self.accumulate_scalar(&mut adj, *x, *g);
                    }
                }
                (Op::SpectralNormS { m, left, right }, Payload::Scalar(g)) => {
                    let delta = left * right.transpose() * *g;
                    self.accumulate_matrix(&mut adj, *m, &delta);
                }
                (op, _) => panic!("adjoint payload mismatch for {op:?}"),
            }
        }
        Gradients { adjoints: adj }
    }

    fn accumulate_matrix(&self, adj: &mut [Option<Payload>], id: NodeId, delta: &DMatrix<f64>) {
        match &mut adj[id.index()] {
            Some(Payload::Matrix(m)) => *m += delta,
            slot @ None => *slot = Some(Payload::Matrix(delta.clone())),
            _ => panic!("adjoint type mismatch at {id:?}"),
        }
    }

    fn accumulate_vector(&self, adj: &mut [Option<Payload>], id: NodeId, delta: &DVector<f64>) {
        match &mut adj[id.index()] {
            Some(Payload::Vector(v)) => *v += delta,
            slot @ None => *slot = Some(Payload::Vector(delta.clone())),
            _ => panic!("adjoint type mismatch at {id:?}"),
        }
    }

    fn accumulate_scalar(&self, adj: &mut [Option<Payload>], id: NodeId, delta: f64) {
        match &mut adj[id.index()] {
            Some(Payload::Scalar(s)) => *s += delta,
            slot @ None => *slot = Some(Payload::Scalar(delta)),
            _ => panic!("adjoint type mismatch at {id:?}"),
        }
    }
}
