use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::embed::{mlp_forward, MlpKind, MlpPart, ParamSlot, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    /// Trainable parameter tensor.
    Leaf(ParamSlot),
    Constant,
    /// Cosine of two equal-length vectors; 0 if either has zero norm.
    CosineSim,
    /// `(1 + x) / 2`.
    ScaleToUnitInterval,
    /// Inputs `[x, w1, b1, w2, b2]`, see [`crate::embed::MlpParams`].
    MlpForward,
    Min,
    Product,
    Max,
    NegLog,
    OneMinus,
    /// Clamp a scalar to `[lo, hi]`; zero gradient outside the range.
    Clamp { lo: f64, hi: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum TapeError {
    #[error("{op:?} expects {expected} input(s), got {got}")]
    Arity { op: Op, expected: &'static str, got: usize },
    #[error("input node {0} does not exist")]
    UnknownNode(usize),
    #[error("{op:?}: input shapes do not match")]
    Shape { op: Op },
    #[error("leaves and constants are created with Tape::leaf and Tape::constant")]
    NotRecordable,
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Vec<f64>,
    /// MLP hidden pre-activations, empty for other ops.
    aux: Vec<f64>,
}

/// Append-only record of a scalar computation for reverse accumulation.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaves: HashMap<ParamSlot, NodeId>,
}

/// Gradient per trainable slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    map: BTreeMap<ParamSlot, Vec<f64>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, slot: ParamSlot) -> Option<&[f64]> {
        self.map.get(&slot).map(Vec::as_slice)
    }

    pub fn insert(&mut self, slot: ParamSlot, grad: Vec<f64>) {
        self.map.insert(slot, grad);
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamSlot, &[f64])> {
        self.map.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Adds `other` into `self` slot by slot.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (slot, g) in &other.map {
            match self.map.get_mut(slot) {
                Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
                None => {
                    self.map.insert(*slot, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.map.values_mut().flatten().for_each(|g| *g *= factor);
    }
}

fn check_arity(op: Op, n: usize) -> Result<(), TapeError> {
    let (ok, expected) = match op {
        Op::CosineSim => (n == 2, "2"),
        Op::MlpForward => (n == 5, "5"),
        Op::ScaleToUnitInterval | Op::NegLog | Op::OneMinus | Op::Clamp { .. } => (n == 1, "1"),
        Op::Min | Op::Product | Op::Max => (n >= 1, "at least 1"),
        Op::Leaf(_) | Op::Constant => return Err(TapeError::NotRecordable),
    };
    if ok {
        Ok(())
    } else {
        Err(TapeError::Arity { op, expected, got: n })
    }
}

/// Index of the extreme input; ties go to the lowest node index.
fn arg_extreme(values: &[f64], inputs: &[NodeId], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if better(values[i], values[best]) || (values[i] == values[best] && inputs[i] < inputs[best]) {
            best = i;
        }
    }
    best
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Vec<f64>, aux: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, inputs, value, aux });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Constant, Vec::new(), value, Vec::new())
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.constant(vec![value])
    }

    /// Leaf for `slot` holding `value`. A slot gets at most one leaf per
    /// tape; later calls return the existing node.
    pub fn leaf_with(&mut self, slot: ParamSlot, value: Vec<f64>) -> NodeId {
        if let Some(&id) = self.leaves.get(&slot) {
            return id;
        }
        let id = self.push(Op::Leaf(slot), Vec::new(), value, Vec::new());
        self.leaves.insert(slot, id);
        id
    }

    /// Leaf for `slot` with its current value in `params`.
    pub fn leaf(&mut self, slot: ParamSlot, params: &ParameterSet) -> NodeId {
        if let Some(&id) = self.leaves.get(&slot) {
            return id;
        }
        let value = params.slot(slot).expect("slot exists in parameter set").to_vec();
        self.leaf_with(slot, value)
    }

    /// Records `mlp_forward` of `x` through the parameters of `kind`.
    pub fn mlp(&mut self, x: NodeId, kind: MlpKind, params: &ParameterSet) -> NodeId {
        let parts = MlpPart::ALL.map(|p| self.leaf(ParamSlot::Mlp(kind, p), params));
        self.record(Op::MlpForward, &[x, parts[0], parts[1], parts[2], parts[3]])
            .expect("parameter shapes are consistent")
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    pub fn op(&self, id: NodeId) -> Op {
        self.nodes[id.0].op
    }

    /// Slots that have a leaf on this tape.
    pub fn leaf_slots(&self) -> impl Iterator<Item = ParamSlot> + '_ {
        self.nodes.iter().filter_map(|n| match n.op {
            Op::Leaf(s) => Some(s),
            _ => None,
        })
    }

    /// Appends `op` applied to `inputs` and computes its value.
    pub fn record(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId, TapeError> {
        check_arity(op, inputs.len())?;
        if let Some(bad) = inputs.iter().find(|i| i.0 >= self.nodes.len()) {
            return Err(TapeError::UnknownNode(bad.0));
        }
        let vals: Vec<&[f64]> = inputs.iter().map(|i| self.nodes[i.0].value.as_slice()).collect();
        let scalar_inputs = || vals.iter().all(|v| v.len() == 1);
        let mut aux = Vec::new();
        let value = match op {
            Op::CosineSim => {
                if vals[0].len() != vals[1].len() {
                    return Err(TapeError::Shape { op });
                }
                vec![crate::embed::cosine(vals[0], vals[1]).unwrap_or(0.0)]
            }
            Op::MlpForward => {
                let (d, h) = (vals[0].len(), vals[2].len());
                if vals[1].len() != d * h || vals[3].len() != h * d || vals[4].len() != d {
                    return Err(TapeError::Shape { op });
                }
                let (pre, out) = mlp_forward(vals[0], vals[1], vals[2], vals[3], vals[4]);
                aux = pre;
                out
            }
            _ if !scalar_inputs() => return Err(TapeError::Shape { op }),
            Op::ScaleToUnitInterval => vec![0.5 * (1.0 + vals[0][0])],
            Op::NegLog => vec![-vals[0][0].ln()],
            Op::OneMinus => vec![1.0 - vals[0][0]],
            Op::Clamp { lo, hi } => vec![vals[0][0].clamp(lo, hi)],
            Op::Product => vec![vals.iter().fold(1.0, |acc, v| acc * v[0])],
            Op::Min | Op::Max => {
                let xs: Vec<f64> = vals.iter().map(|v| v[0]).collect();
                let k = if op == Op::Min {
                    arg_extreme(&xs, inputs, |a, b| a < b)
                } else {
                    arg_extreme(&xs, inputs, |a, b| a > b)
                };
                vec![xs[k]]
            }
            Op::Leaf(_) | Op::Constant => unreachable!("rejected by check_arity"),
        };
        Ok(self.push(op, inputs.to_vec(), value, aux))
    }

    /// Reverse accumulation from the scalar `root`. Every leaf on the tape
    /// gets an entry; leaves the root does not depend on get zeros.
    pub fn backward(&self, root: NodeId) -> Gradients {
        let mut adj: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        adj[root.0][0] = 1.0;
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf(_) | Op::Constant) {
                continue;
            }
            let g = std::mem::take(&mut adj[idx]);
            if g.iter().all(|&x| x == 0.0) {
                adj[idx] = g;
                continue;
            }
            self.propagate(node, &g, &mut adj);
            adj[idx] = g;
        }
        let mut out = Gradients::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf(slot) = node.op {
                out.insert(slot, adj[idx].clone());
            }
        }
        out
    }

    fn propagate(&self, node: &Node, g: &[f64], adj: &mut [Vec<f64>]) {
        let inp = &node.inputs;
        let val = |i: usize| self.nodes[inp[i].0].value.as_slice();
        match node.op {
            Op::CosineSim => {
                let (a, b) = (val(0), val(1));
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    return;
                }
                let c = node.value[0];
                let (ga, gb): (Vec<f64>, Vec<f64>) = a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        (g[0] * (y / (na * nb) - c * x / (na * na)), g[0] * (x / (na * nb) - c * y / (nb * nb)))
                    })
                    .unzip();
                add_into(&mut adj[inp[0].0], &ga);
                add_into(&mut adj[inp[1].0], &gb);
            }
            Op::ScaleToUnitInterval => adj[inp[0].0][0] += 0.5 * g[0],
            Op::NegLog => adj[inp[0].0][0] += -g[0] / val(0)[0],
            Op::OneMinus => adj[inp[0].0][0] -= g[0],
            Op::Clamp { lo, hi } => {
                let x = val(0)[0];
                if (lo..=hi).contains(&x) {
                    adj[inp[0].0][0] += g[0];
                }
            }
            Op::Product => {
                let xs: Vec<f64> = (0..inp.len()).map(|i| val(i)[0]).collect();
                let n = xs.len();
                let mut prefix = vec![1.0; n + 1];
                for i in 0..n {
                    prefix[i + 1] = prefix[i] * xs[i];
                }
                let mut suffix = 1.0;
                for i in (0..n).rev() {
                    adj[inp[i].0][0] += g[0] * prefix[i] * suffix;
                    suffix *= xs[i];
                }
            }
            Op::Min | Op::Max => {
                let xs: Vec<f64> = (0..inp.len()).map(|i| val(i)[0]).collect();
                let k = if node.op == Op::Min {
                    arg_extreme(&xs, inp, |a, b| a < b)
                } else {
                    arg_extreme(&xs, inp, |a, b| a > b)
                };
                adj[inp[k].0][0] += g[0];
            }
            Op::MlpForward => self.mlp_backward(node, g, adj),
            Op::Leaf(_) | Op::Constant => {}
        }
    }

    fn mlp_backward(&self, node: &Node, g: &[f64], adj: &mut [Vec<f64>]) {
        let inp = &node.inputs;
        let x = &self.nodes[inp[0].0].value;
        let w1 = &self.nodes[inp[1].0].value;
        let w2 = &self.nodes[inp[3].0].value;
        let pre = &node.aux;
        let (d, h) = (x.len(), pre.len());

        let mut g_pre = vec![0.0; h];
        let mut g_w2 = vec![0.0; h * d];
        for j in 0..h {
            let a = pre[j].max(0.0);
            let row = &w2[j * d..(j + 1) * d];
            let mut ga = 0.0;
            for k in 0..d {
                g_w2[j * d + k] = a * g[k];
                ga += row[k] * g[k];
            }
            if pre[j] > 0.0 {
                g_pre[j] = ga;
            }
        }
        let mut g_w1 = vec![0.0; d * h];
        let mut g_x = vec![0.0; d];
        for i in 0..d {
            for j in 0..h {
                g_w1[i * h + j] = x[i] * g_pre[j];
                g_x[i] += w1[i * h + j] * g_pre[j];
            }
        }
        add_into(&mut adj[inp[0].0], &g_x);
        add_into(&mut adj[inp[1].0], &g_w1);
        add_into(&mut adj[inp[2].0], &g_pre);
        add_into(&mut adj[inp[3].0], &g_w2);
        add_into(&mut adj[inp[4].0], g);
    }
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
}
