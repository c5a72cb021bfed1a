//! Reverse-mode automatic differentiation over dense matrices.
//!
//! Values are organized as a [`Graph`] of eagerly evaluated nodes. The
//! backward pass is symbolic: adjoints are appended to the graph as ordinary
//! nodes, so the result of [`Graph::input_gradient_node`] can be fed through
//! further operations and differentiated again. That second-order path is what
//! lets a gradient penalty (a function of input gradients) be minimized with
//! respect to network parameters.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    /// Fixed value; no gradient flows into it.
    Constant,
    /// Trainable leaf.
    Parameter,
    /// Non-trainable leaf that gradients may be taken with respect to.
    Input,
    MatMul,
    Transpose,
    Add,
    Sub,
    /// Row-broadcast add of a 1×d bias to an n×d matrix.
    AddBias,
    Hadamard,
    Relu,
    Sigmoid,
    Log,
    Square,
    Recip,
    ScalarMul(f64),
    ScalarAdd,
    /// Row-wise L2 norm, n×d → n×1.
    RowNorm,
    /// Column sums, n×d → 1×d.
    SumRows,
    /// Column means, n×d → 1×d.
    MeanRows,
    /// Row sums, n×d → n×1.
    SumCols,
    /// Tile a 1×d row n times.
    RepeatRows,
    /// Multiply row i of the second operand by entry i of an n×1 column.
    ScaleRows,
    ConcatCols,
    SliceCols(usize, usize),
}

struct Node<T> {
    op: Op,
    parents: Vec<usize>,
    value: Mat<T>,
    name: Option<String>,
}

/// Map from trainable parameter to ∂loss/∂parameter, one entry per parameter.
pub struct GradientSet<T> {
    grads: BTreeMap<usize, Mat<T>>,
}

impl<T: Real> GradientSet<T> {
    /// Gradient for a parameter node registered in the graph.
    pub fn get(&self, param: NodeId) -> &Mat<T> {
        self.grads.get(&param.0).expect("parameter not registered in this graph")
    }

    /// Parameter ids and gradients in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Mat<T>)> {
        self.grads.iter().map(|(&id, m)| (NodeId(id), m))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Computation graph with eager forward evaluation.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    parameters: Vec<usize>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), parameters: Vec::new() }
    }

    fn push(&mut self, op: Op, parents: Vec<usize>, value: Mat<T>) -> NodeId {
        debug_assert!(parents.iter().all(|&p| p < self.nodes.len()));
        self.nodes.push(Node { op, parents, value, name: None });
        NodeId(self.nodes.len() - 1)
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &Mat<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    /// Ids of all trainable parameters in registration order.
    pub fn parameters(&self) -> Vec<NodeId> {
        self.parameters.iter().map(|&i| NodeId(i)).collect()
    }

    /// Name given to a parameter at registration.
    pub fn name(&self, id: NodeId) -> Option<&str> {
        self.nodes[id.0].name.as_deref()
    }

    pub fn constant(&mut self, value: Mat<T>) -> NodeId {
        self.push(Op::Constant, vec![], value)
    }

    pub fn scalar_constant(&mut self, value: T) -> NodeId {
        self.constant(Mat::from_vec(1, 1, vec![value]))
    }

    /// Register a trainable leaf.
    pub fn parameter(&mut self, name: &str, value: Mat<T>) -> NodeId {
        let id = self.push(Op::Parameter, vec![], value);
        self.nodes[id.0].name = Some(name.to_string());
        self.parameters.push(id.0);
        id
    }

    /// Register a non-trainable leaf that input gradients can target.
    pub fn input(&mut self, value: Mat<T>) -> NodeId {
        self.push(Op::Input, vec![], value)
    }

    fn shape_err(&self, op: &'static str, ids: &[NodeId], extra: &str) -> Error {
        let shapes: Vec<String> =
            ids.iter().map(|&i| format!("{}x{}", self.shape(i).0, self.shape(i).1)).collect();
        Error::Shape { op, detail: format!("operands [{}] {extra}", shapes.join(", ")) }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a).1 != self.shape(b).0 {
            return Err(self.shape_err("matmul", &[a, b], "inner dimensions differ"));
        }
        let v = self.value(a).matmul(self.value(b));
        Ok(self.push(Op::MatMul, vec![a.0, b.0], v))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose, vec![a.0], v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err("add", &[a, b], "shapes differ"));
        }
        let v = self.value(a).add(self.value(b));
        Ok(self.push(Op::Add, vec![a.0, b.0], v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err("sub", &[a, b], "shapes differ"));
        }
        let v = self.value(a).sub(self.value(b));
        Ok(self.push(Op::Sub, vec![a.0, b.0], v))
    }

    /// Add a 1×d bias row to every row of an n×d matrix.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (_, d) = self.shape(a);
        if self.shape(bias) != (1, d) {
            return Err(self.shape_err("add_bias", &[a, bias], "bias must be 1×(operand cols)"));
        }
        let mut v = self.value(a).clone();
        let b = self.value(bias).row(0).to_vec();
        for i in 0..v.rows() {
            for (x, &bj) in v.row_mut(i).iter_mut().zip(&b) {
                *x = *x + bj;
            }
        }
        Ok(self.push(Op::AddBias, vec![a.0, bias.0], v))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err("hadamard", &[a, b], "shapes differ"));
        }
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(Op::Hadamard, vec![a.0, b.0], v))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        self.push(Op::Relu, vec![a.0], v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| {
            // Split by sign to avoid overflow in exp.
            if x >= T::zero() {
                T::one() / (T::one() + (-x).exp())
            } else {
                let e = x.exp();
                e / (T::one() + e)
            }
        });
        self.push(Op::Sigmoid, vec![a.0], v)
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.ln());
        self.push(Op::Log, vec![a.0], v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square, vec![a.0], v)
    }

    pub fn recip(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| T::one() / x);
        self.push(Op::Recip, vec![a.0], v)
    }

    pub fn scalar_mul(&mut self, a: NodeId, c: f64) -> NodeId {
        let cv = T::of(c);
        let v = self.value(a).map(|x| x * cv);
        self.push(Op::ScalarMul(c), vec![a.0], v)
    }

    pub fn scalar_add(&mut self, a: NodeId, c: f64) -> NodeId {
        let cv = T::of(c);
        let v = self.value(a).map(|x| x + cv);
        self.push(Op::ScalarAdd, vec![a.0], v)
    }

    /// Row-wise Euclidean norm: n×d → n×1.
    pub fn row_norm(&mut self, a: NodeId) -> NodeId {
        let m = self.value(a);
        let mut v = Mat::zeros(m.rows(), 1);
        for i in 0..m.rows() {
            v[(i, 0)] = m.row(i).iter().map(|&x| x * x).sum::<T>().sqrt();
        }
        self.push(Op::RowNorm, vec![a.0], v)
    }

    /// Sum across the batch: n×d → 1×d.
    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let m = self.value(a);
        let mut v = Mat::zeros(1, m.cols());
        for i in 0..m.rows() {
            for (o, &x) in v.row_mut(0).iter_mut().zip(m.row(i)) {
                *o = *o + x;
            }
        }
        self.push(Op::SumRows, vec![a.0], v)
    }

    /// Mean across the batch: n×d → 1×d.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let m = self.value(a);
        let inv = T::one() / T::of(m.rows() as f64);
        let mut v = Mat::zeros(1, m.cols());
        for i in 0..m.rows() {
            for (o, &x) in v.row_mut(0).iter_mut().zip(m.row(i)) {
                *o = *o + x;
            }
        }
        for o in v.row_mut(0) {
            *o = *o * inv;
        }
        self.push(Op::MeanRows, vec![a.0], v)
    }

    /// Per-row sums: n×d → n×1.
    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let m = self.value(a);
        let mut v = Mat::zeros(m.rows(), 1);
        for i in 0..m.rows() {
            v[(i, 0)] = m.row(i).iter().copied().sum::<T>();
        }
        self.push(Op::SumCols, vec![a.0], v)
    }

    /// Tile a 1×d row into n identical rows.
    pub fn repeat_rows(&mut self, a: NodeId, n: usize) -> Result<NodeId> {
        if self.shape(a).0 != 1 {
            return Err(self.shape_err("repeat_rows", &[a], "operand must have one row"));
        }
        let row = self.value(a).row(0).to_vec();
        let mut v = Mat::zeros(n, row.len());
        for i in 0..n {
            v.row_mut(i).copy_from_slice(&row);
        }
        Ok(self.push(Op::RepeatRows, vec![a.0], v))
    }

    /// Multiply row i of `a` (n×d) by entry i of column `s` (n×1).
    pub fn scale_rows(&mut self, s: NodeId, a: NodeId) -> Result<NodeId> {
        let (n, d) = self.shape(a);
        if self.shape(s) != (n, 1) {
            return Err(self.shape_err("scale_rows", &[s, a], "scale must be n×1"));
        }
        let mut v = Mat::zeros(n, d);
        for i in 0..n {
            let si = self.value(s)[(i, 0)];
            for (o, &x) in v.row_mut(i).iter_mut().zip(self.value(a).row(i)) {
                *o = si * x;
            }
        }
        Ok(self.push(Op::ScaleRows, vec![s.0, a.0], v))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (na, ca) = self.shape(a);
        let (nb, cb) = self.shape(b);
        if na != nb {
            return Err(self.shape_err("concat_cols", &[a, b], "row counts differ"));
        }
        let mut v = Mat::zeros(na, ca + cb);
        for i in 0..na {
            v.row_mut(i)[..ca].copy_from_slice(self.value(a).row(i));
            v.row_mut(i)[ca..].copy_from_slice(self.value(b).row(i));
        }
        Ok(self.push(Op::ConcatCols, vec![a.0, b.0], v))
    }

    /// Columns `start..end` of a node.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let (n, d) = self.shape(a);
        if start >= end || end > d {
            return Err(self.shape_err(
                "slice_cols",
                &[a],
                &format!("range {start}..{end} invalid for {d} columns"),
            ));
        }
        let mut v = Mat::zeros(n, end - start);
        for i in 0..n {
            v.row_mut(i).copy_from_slice(&self.value(a).row(i)[start..end]);
        }
        Ok(self.push(Op::SliceCols(start, end), vec![a.0], v))
    }

    /// Add `delta`'s contribution into the running adjoint of `target`.
    fn accumulate(&mut self, adj: &mut [Option<usize>], target: usize, delta: NodeId) {
        match adj[target] {
            None => adj[target] = Some(delta.0),
            Some(prev) => {
                let sum = self
                    .add(NodeId(prev), delta)
                    .expect("adjoint shapes match by construction");
                adj[target] = Some(sum.0);
            }
        }
    }

    /// Build adjoint nodes for everything `root` depends on.
    ///
    /// Returns, for each node index, the index of its adjoint node (None where
    /// no gradient flows). `root` must be 1×1.
    fn build_adjoints(&mut self, root: NodeId, op: &'static str) -> Result<Vec<Option<usize>>> {
        if self.shape(root) != (1, 1) {
            return Err(self.shape_err(op, &[root], "differentiation root must be 1×1"));
        }
        let mut adj: Vec<Option<usize>> = vec![None; self.nodes.len()];
        let seed = self.constant(Mat::from_vec(1, 1, vec![T::one()]));
        adj.push(None); // slot for the seed node itself
        adj[root.0] = Some(seed.0);

        // Children always follow parents, so a descending scan visits every
        // node only after all of its consumers.
        for idx in (0..=root.0).rev() {
            let g = match adj[idx] {
                Some(g) => NodeId(g),
                None => continue,
            };
            let op = self.nodes[idx].op.clone();
            let parents = self.nodes[idx].parents.clone();
            match op {
                Op::Constant | Op::Parameter | Op::Input => {}
                Op::MatMul => {
                    let (a, b) = (parents[0], parents[1]);
                    let bt = self.transpose(NodeId(b));
                    let da = self.matmul(g, bt)?;
                    self.accumulate(&mut adj, a, da);
                    let at = self.transpose(NodeId(a));
                    let db = self.matmul(at, g)?;
                    self.accumulate(&mut adj, b, db);
                }
                Op::Transpose => {
                    let da = self.transpose(g);
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::Add => {
                    self.accumulate(&mut adj, parents[0], g);
                    self.accumulate(&mut adj, parents[1], g);
                }
                Op::Sub => {
                    self.accumulate(&mut adj, parents[0], g);
                    let neg = self.scalar_mul(g, -1.0);
                    self.accumulate(&mut adj, parents[1], neg);
                }
                Op::AddBias => {
                    self.accumulate(&mut adj, parents[0], g);
                    let db = self.sum_rows(g);
                    self.accumulate(&mut adj, parents[1], db);
                }
                Op::Hadamard => {
                    let (a, b) = (parents[0], parents[1]);
                    let da = self.hadamard(g, NodeId(b))?;
                    self.accumulate(&mut adj, a, da);
                    let db = self.hadamard(g, NodeId(a))?;
                    self.accumulate(&mut adj, b, db);
                }
                Op::Relu => {
                    // The activation pattern is held fixed, so the mask enters
                    // as a constant and higher-order terms vanish at the kink.
                    let mask = self.nodes[parents[0]]
                        .value
                        .map(|x| if x > T::zero() { T::one() } else { T::zero() });
                    let mask = self.constant(mask);
                    let da = self.hadamard(g, mask)?;
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::Sigmoid => {
                    // dσ = σ(1-σ), expressed through the output node so the
                    // derivative itself stays differentiable.
                    let s = NodeId(idx);
                    let s2 = self.square(s);
                    let ds = self.sub(s, s2)?;
                    let da = self.hadamard(g, ds)?;
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::Log => {
                    let r = self.recip(NodeId(parents[0]));
                    let da = self.hadamard(g, r)?;
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::Square => {
                    let gx = self.hadamard(g, NodeId(parents[0]))?;
                    let da = self.scalar_mul(gx, 2.0);
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::Recip => {
                    // d(1/x) = -1/x² = -(out)².
                    let r2 = self.square(NodeId(idx));
                    let gr = self.hadamard(g, r2)?;
                    let da = self.scalar_mul(gr, -1.0);
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::ScalarMul(c) => {
                    let da = self.scalar_mul(g, c);
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::ScalarAdd => {
                    self.accumulate(&mut adj, parents[0], g);
                }
                Op::RowNorm => {
                    // d‖x‖/dx = x/‖x‖ per row.
                    let r = self.recip(NodeId(idx));
                    let gr = self.hadamard(g, r)?;
                    let da = self.scale_rows(gr, NodeId(parents[0]))?;
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::SumRows => {
                    let n = self.nodes[parents[0]].value.rows();
                    let da = self.repeat_rows(g, n)?;
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::MeanRows => {
                    let n = self.nodes[parents[0]].value.rows();
                    let rep = self.repeat_rows(g, n)?;
                    let da = self.scalar_mul(rep, 1.0 / n as f64);
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::SumCols => {
                    let (n, d) = self.nodes[parents[0]].value.shape();
                    let ones = self.constant(Mat::from_vec(n, d, vec![T::one(); n * d]));
                    let da = self.scale_rows(g, ones)?;
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::RepeatRows => {
                    let da = self.sum_rows(g);
                    self.accumulate(&mut adj, parents[0], da);
                }
                Op::ScaleRows => {
                    let (s, a) = (parents[0], parents[1]);
                    let ga = self.hadamard(g, NodeId(a))?;
                    let ds = self.sum_cols(ga);
                    self.accumulate(&mut adj, s, ds);
                    let da = self.scale_rows(NodeId(s), g)?;
                    self.accumulate(&mut adj, a, da);
                }
                Op::ConcatCols => {
                    let (a, b) = (parents[0], parents[1]);
                    let ca = self.nodes[a].value.cols();
                    let cb = self.nodes[b].value.cols();
                    let da = self.slice_cols(g, 0, ca)?;
                    self.accumulate(&mut adj, a, da);
                    let db = self.slice_cols(g, ca, ca + cb)?;
                    self.accumulate(&mut adj, b, db);
                }
                Op::SliceCols(start, end) => {
                    let (n, d) = self.nodes[parents[0]].value.shape();
                    let mut da = if start > 0 {
                        let left = self.constant(Mat::zeros(n, start));
                        self.concat_cols(left, g)?
                    } else {
                        g
                    };
                    if end < d {
                        let right = self.constant(Mat::zeros(n, d - end));
                        da = self.concat_cols(da, right)?;
                    }
                    self.accumulate(&mut adj, parents[0], da);
                }
            }
        }
        Ok(adj)
    }

    /// Reverse-mode gradients of a scalar node with respect to every trainable
    /// parameter. Parameters the scalar does not depend on get zero gradients.
    pub fn backward(&mut self, root: NodeId) -> Result<GradientSet<T>> {
        let adj = self.build_adjoints(root, "backward")?;
        let mut grads = BTreeMap::new();
        for &p in self.parameters.clone().iter() {
            let g = match adj[p] {
                Some(a) => self.nodes[a].value.clone(),
                None => {
                    let (r, c) = self.nodes[p].value.shape();
                    Mat::zeros(r, c)
                }
            };
            grads.insert(p, g);
        }
        Ok(GradientSet { grads })
    }

    /// Gradient of a scalar node with respect to an input node, returned as a
    /// graph node of the input's shape so that later operations on it remain
    /// differentiable.
    pub fn input_gradient_node(&mut self, root: NodeId, input: NodeId) -> Result<NodeId> {
        let adj = self.build_adjoints(root, "input_gradient_node")?;
        match adj[input.0] {
            Some(a) => Ok(NodeId(a)),
            None => Err(Error::Domain {
                op: "input_gradient_node",
                detail: "scalar does not depend on the requested input".into(),
            }),
        }
    }
}
