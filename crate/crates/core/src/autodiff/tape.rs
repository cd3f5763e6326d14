use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    /// `w * x (+ b)`
    Affine { w: Var, x: Var, b: Option<Var> },
    Tanh(Var),
    Sigmoid(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    SumSquares(Var),
    MeanSquares(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Affine { .. } => "affine",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::SumSquares(_) => "sum_squares",
            Op::MeanSquares(_) => "mean_squares",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
}

/// Wengert list for one evaluation.
///
/// Values are computed as nodes are pushed. Parameters are read from the
/// borrowed store and registered at most once per tape.
#[derive(Debug, Clone)]
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-v))
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::new(), param_nodes: vec![None; params.len()] }
    }

    /// Builds a tape by running `graph` on it, returning the output node.
    pub fn record<F>(params: &'p ParamStore, graph: F) -> Result<(Var, Self)>
    where
        F: FnOnce(&mut Tape<'p>) -> Result<Var>,
    {
        let mut tape = Tape::new(params);
        let out = graph(&mut tape)?;
        Ok((out, tape))
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { op, rows, cols, value });
        Var(self.nodes.len() - 1)
    }

    fn label(&self, op: &str) -> String {
        format!("node #{} ({op})", self.nodes.len())
    }

    fn shape_err(&self, op: &str, detail: String) -> Error {
        Error::Shape { node: self.label(op), detail }
    }

    /// Constant column vector.
    pub fn input(&mut self, values: &[f64]) -> Var {
        self.push(Op::Input, values.len(), 1, values.to_vec())
    }

    /// Constant column vector, taking ownership.
    pub fn input_vec(&mut self, values: Vec<f64>) -> Var {
        let n = values.len();
        self.push(Op::Input, n, 1, values)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, values: Vec<f64>) -> Result<Var> {
        if values.len() != rows * cols {
            return Err(self.shape_err("input", format!("{} values for {rows}x{cols}", values.len())));
        }
        Ok(self.push(Op::Input, rows, cols, values))
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.push(Op::Input, 1, 1, vec![v])
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let (rows, cols) = self.params.shape(id);
        let v = self.push(Op::Param(id), rows, cols, self.params.value(id).to_vec());
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn affine(&mut self, w: Var, x: Var, b: Option<Var>) -> Result<Var> {
        let (r, c) = self.shape(w);
        let (xr, xc) = self.shape(x);
        if xr != c || xc != 1 {
            return Err(self.shape_err("affine", format!("weight is {r}x{c} but input is {xr}x{xc}")));
        }
        if let Some(b) = b {
            let (br, bc) = self.shape(b);
            if br != r || bc != 1 {
                return Err(self.shape_err("affine", format!("weight is {r}x{c} but bias is {br}x{bc}")));
            }
        }
        let wv = &self.nodes[w.0].value;
        let xv = &self.nodes[x.0].value;
        let mut out = match b {
            Some(b) => self.nodes[b.0].value.clone(),
            None => vec![0.0; r],
        };
        for (i, o) in out.iter_mut().enumerate() {
            let row = &wv[i * c..(i + 1) * c];
            let mut acc = 0.0;
            for (wij, xj) in row.iter().zip(xv) {
                acc += wij * xj;
            }
            *o += acc;
        }
        Ok(self.push(Op::Affine { w, x, b }, r, 1, out))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self.nodes[a.0].value.iter().map(|&v| libm::tanh(v)).collect();
        self.push(Op::Tanh(a), r, c, out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self.nodes[a.0].value.iter().map(|&v| sigmoid(v)).collect();
        self.push(Op::Sigmoid(a), r, c, out)
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<(usize, usize)> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(self.shape_err(op, format!("operands are {}x{} and {}x{}", sa.0, sa.1, sb.0, sb.1)));
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("add", a, b)?;
        let out = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| x + y).collect();
        Ok(self.push(Op::Add(a, b), r, c, out))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("mul", a, b)?;
        let out = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| x * y).collect();
        Ok(self.push(Op::Mul(a, b), r, c, out))
    }

    /// Stacks column vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(self.shape_err("concat", "no operands".into()));
        }
        let mut out = Vec::new();
        for &p in parts {
            let (_, c) = self.shape(p);
            if c != 1 {
                return Err(self.shape_err("concat", format!("operand #{} has {c} columns", p.0)));
            }
            out.extend_from_slice(&self.nodes[p.0].value);
        }
        let n = out.len();
        Ok(self.push(Op::Concat(parts.to_vec()), n, 1, out))
    }

    /// Entries `start..start + len` of a column vector.
    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(src);
        if c != 1 || len == 0 || start + len > r {
            return Err(self.shape_err("slice", format!("range {start}..{} of a {r}x{c} operand", start + len)));
        }
        let out = self.nodes[src.0].value[start..start + len].to_vec();
        Ok(self.push(Op::Slice { src, start }, len, 1, out))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().map(|v| v * v).sum();
        self.push(Op::SumSquares(a), 1, 1, vec![s])
    }

    pub fn mean_squares(&mut self, a: Var) -> Var {
        let v = &self.nodes[a.0].value;
        let s: f64 = v.iter().map(|v| v * v).sum();
        let n = v.len() as f64;
        self.push(Op::MeanSquares(a), 1, 1, vec![s / n])
    }

    /// First node holding a NaN or infinity, as `(index, op name)`.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| n.value.iter().any(|v| !v.is_finite()))
            .map(|(i, n)| (i, n.op.name()))
    }

    pub fn backward(&self, out: Var) -> Result<Gradients> {
        self.backward_with_seed(out, 1.0)
    }

    /// Propagates `seed` from the scalar node `out` back to every parameter.
    pub fn backward_with_seed(&self, out: Var, seed: f64) -> Result<Gradients> {
        let node = &self.nodes[out.0];
        if node.rows != 1 || node.cols != 1 {
            return Err(Error::NotScalar { node: out.0, rows: node.rows, cols: node.cols });
        }
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); out.0 + 1];
        adj[out.0] = vec![seed];
        let mut grads = Gradients::zeros(self.params);

        for i in (0..=out.0).rev() {
            if adj[i].is_empty() {
                continue;
            }
            let g = core::mem::take(&mut adj[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    for (d, s) in grads.get_mut(*id).iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Op::Affine { w, x, b } => {
                    let c = self.nodes[w.0].cols;
                    let wv = &self.nodes[w.0].value;
                    let xv = &self.nodes[x.0].value;
                    let dw = acc_slot(&mut adj, *w, wv.len());
                    for (r, gr) in g.iter().enumerate() {
                        for (j, xj) in xv.iter().enumerate() {
                            dw[r * c + j] += gr * xj;
                        }
                    }
                    let dx = acc_slot(&mut adj, *x, c);
                    for (r, gr) in g.iter().enumerate() {
                        for (j, d) in dx.iter_mut().enumerate() {
                            *d += wv[r * c + j] * gr;
                        }
                    }
                    if let Some(b) = b {
                        add_into(acc_slot(&mut adj, *b, g.len()), &g);
                    }
                }
                Op::Tanh(a) => {
                    let da = acc_slot(&mut adj, *a, g.len());
                    for ((d, gi), y) in da.iter_mut().zip(&g).zip(&node.value) {
                        *d += gi * (1.0 - y * y);
                    }
                }
                Op::Sigmoid(a) => {
                    let da = acc_slot(&mut adj, *a, g.len());
                    for ((d, gi), y) in da.iter_mut().zip(&g).zip(&node.value) {
                        *d += gi * (y * (1.0 - y));
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc_slot(&mut adj, *a, g.len()), &g);
                    add_into(acc_slot(&mut adj, *b, g.len()), &g);
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let da = acc_slot(&mut adj, *a, g.len());
                    for ((d, gi), bi) in da.iter_mut().zip(&g).zip(bv) {
                        *d += gi * bi;
                    }
                    let db = acc_slot(&mut adj, *b, g.len());
                    for ((d, gi), ai) in db.iter_mut().zip(&g).zip(av) {
                        *d += gi * ai;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].rows;
                        add_into(acc_slot(&mut adj, *p, n), &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Slice { src, start } => {
                    let n = self.nodes[src.0].rows;
                    let ds = acc_slot(&mut adj, *src, n);
                    add_into(&mut ds[*start..*start + g.len()], &g);
                }
                Op::SumSquares(a) => {
                    let av = &self.nodes[a.0].value;
                    let da = acc_slot(&mut adj, *a, av.len());
                    for (d, x) in da.iter_mut().zip(av) {
                        *d += 2.0 * x * g[0];
                    }
                }
                Op::MeanSquares(a) => {
                    let av = &self.nodes[a.0].value;
                    let n = av.len() as f64;
                    let da = acc_slot(&mut adj, *a, av.len());
                    for (d, x) in da.iter_mut().zip(av) {
                        *d += 2.0 * x * g[0] / n;
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn acc_slot(adj: &mut [Vec<f64>], v: Var, len: usize) -> &mut Vec<f64> {
    let slot = &mut adj[v.0];
    if slot.is_empty() {
        slot.resize(len, 0.0);
    }
    slot
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
