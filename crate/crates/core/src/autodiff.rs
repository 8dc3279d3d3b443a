//! Reverse-mode automatic differentiation on an append-only tape.
//!
//! Every node holds a dense `f64` matrix; scalars are `1 x 1` matrices. The
//! tape is array-valued so that the network's matrix products are single
//! records instead of millions of scalar ones, but each record is still an
//! elementary operation with a closed-form pullback.
//!
//! Operations never fail eagerly. A domain violation (division by zero, a
//! non-finite value) is recorded on the tape, the offending node gets a NaN
//! value, and the first such error is returned by [`Tape::backward`] and
//! [`Tape::check`]. This keeps arithmetic operators usable on [`Var`].
//!
//! Shape mismatches are programmer errors and panic.

use std::cell::{Ref, RefCell};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Range, Sub};
use std::rc::Rc;

use ndarray::{s, Array2, Axis};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("domain error at node {node}: {reason}")]
    Domain { node: usize, reason: String },
    #[error("node {node} is not on this tape ({len} nodes recorded)")]
    NotOnTape { node: usize, len: usize },
    #[error("backward needs a scalar output, node {node} has shape {rows}x{cols}")]
    NotScalar { node: usize, rows: usize, cols: usize },
    #[error("invalid finite-difference step {0}")]
    BadStep(f64),
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    /// `x (n x c) + row (1 x c)`, broadcast over rows.
    AddRow(usize, usize),
    MatMul(usize, usize),
    AddScalar(usize, f64),
    MulScalar(usize, f64),
    /// Elementwise product with a constant of the same shape.
    MulConst(usize, Rc<Array2<f64>>),
    Neg(usize),
    Tanh(usize),
    Exp(usize),
    Abs(usize),
    MaxConst(usize, f64),
    Square(usize),
    Hypot(usize, usize),
    Sum(usize),
    Mean(usize),
    Reshape(usize),
    Slice(usize, Range<usize>, Range<usize>),
}

impl Op {
    fn parents(&self) -> [Option<usize>; 2] {
        use Op::*;
        match *self {
            Leaf => [None, None],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | AddRow(a, b) | MatMul(a, b)
            | Hypot(a, b) => [Some(a), Some(b)],
            AddScalar(a, _) | MulScalar(a, _) | MulConst(a, _) | Neg(a) | Tanh(a) | Exp(a)
            | Abs(a) | MaxConst(a, _) | Square(a) | Sum(a) | Mean(a) | Reshape(a)
            | Slice(a, _, _) => [Some(a), None],
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Array2<f64>,
}

/// Append-only record of operations. Parents always precede children.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    error: RefCell<Option<AutodiffError>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("len", &self.len())
            .field("error", &*self.error.borrow())
            .finish()
    }
}

/// A handle to one node of a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var").field("index", &self.index).finish()
    }
}

/// Result of a backward pass: one adjoint per node, `None` where the output
/// does not depend on the node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Adjoint of `var`, zeros when the output does not depend on it.
    pub fn wrt(&self, var: Var<'_>) -> Array2<f64> {
        self.node(var.index)
    }

    pub fn node(&self, index: usize) -> Array2<f64> {
        match &self.grads[index] {
            Some(g) => g.clone(),
            None => Array2::zeros(self.shapes[index]),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

fn forward_value(op: &Op, nodes: &[Node]) -> Array2<f64> {
    let v = |i: usize| &nodes[i].value;
    match op {
        Op::Leaf => unreachable!("leaves carry their own value"),
        Op::Add(a, b) => broadcast(v(*a), v(*b), |x, y| x + y),
        Op::Sub(a, b) => broadcast(v(*a), v(*b), |x, y| x - y),
        Op::Mul(a, b) => broadcast(v(*a), v(*b), |x, y| x * y),
        Op::Div(a, b) => broadcast(v(*a), v(*b), |x, y| x / y),
        Op::AddRow(a, r) => v(*a) + v(*r),
        Op::MatMul(a, b) => v(*a).dot(v(*b)),
        Op::AddScalar(a, c) => v(*a).mapv(|x| x + c),
        Op::MulScalar(a, c) => v(*a).mapv(|x| x * c),
        Op::MulConst(a, c) => v(*a) * c.as_ref(),
        Op::Neg(a) => v(*a).mapv(|x| -x),
        Op::Tanh(a) => v(*a).mapv(f64::tanh),
        Op::Exp(a) => v(*a).mapv(f64::exp),
        Op::Abs(a) => v(*a).mapv(f64::abs),
        Op::MaxConst(a, c) => v(*a).mapv(|x| if x > *c { x } else { *c }),
        Op::Square(a) => v(*a).mapv(|x| x * x),
        Op::Hypot(a, b) => {
            let mut out = v(*a).clone();
            out.zip_mut_with(v(*b), |x, &y| *x = x.hypot(y));
            out
        }
        Op::Sum(a) => Array2::from_elem((1, 1), v(*a).sum()),
        Op::Mean(a) => {
            let x = v(*a);
            Array2::from_elem((1, 1), x.sum() / x.len() as f64)
        }
        Op::Reshape(a) => unreachable!("reshape target shape is stored on the node: {a}"),
        Op::Slice(a, rows, cols) => v(*a)
            .slice(s![rows.clone(), cols.clone()])
            .to_owned(),
    }
}

/// Elementwise binary op; either side may be a `1 x 1` scalar.
fn broadcast(a: &Array2<f64>, b: &Array2<f64>, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
    if a.dim() == b.dim() {
        let mut out = a.clone();
        out.zip_mut_with(b, |x, &y| *x = f(*x, y));
        out
    } else if b.dim() == (1, 1) {
        let y = b[[0, 0]];
        a.mapv(|x| f(x, y))
    } else if a.dim() == (1, 1) {
        let x = a[[0, 0]];
        b.mapv(|y| f(x, y))
    } else {
        panic!("shape mismatch: {:?} vs {:?}", a.dim(), b.dim());
    }
}

/// Sum `g` down to `shape` (undoes scalar broadcasting).
fn reduce_to(g: Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    if g.dim() == shape {
        g
    } else {
        debug_assert_eq!(shape, (1, 1));
        Array2::from_elem((1, 1), g.sum())
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First domain error recorded on this tape, if any.
    pub fn check(&self) -> Result<(), AutodiffError> {
        match &*self.error.borrow() {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    fn fail(&self, node: usize, reason: impl Into<String>) {
        let mut err = self.error.borrow_mut();
        if err.is_none() {
            *err = Some(AutodiffError::Domain {
                node,
                reason: reason.into(),
            });
        }
    }

    fn push(&self, op: Op, value: Array2<f64>) -> Var<'_> {
        let index = self.len();
        if value.iter().any(|x| !x.is_finite()) {
            self.fail(index, format!("non-finite value produced by {}", op_name(&op)));
        }
        self.nodes.borrow_mut().push(Node { op, value });
        Var { tape: self, index }
    }

    fn record(&self, op: Op) -> Var<'_> {
        let value = forward_value(&op, &self.nodes.borrow());
        self.push(op, value)
    }

    /// A leaf holding `value`.
    pub fn leaf(&self, value: Array2<f64>) -> Var<'_> {
        let value = value.as_standard_layout().into_owned();
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    /// A `1 x n` leaf.
    pub fn row(&self, values: &[f64]) -> Var<'_> {
        self.leaf(Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape"))
    }

    fn value_ref(&self, index: usize) -> Ref<'_, Array2<f64>> {
        Ref::map(self.nodes.borrow(), |n| &n[index].value)
    }

    fn shape(&self, index: usize) -> (usize, usize) {
        self.nodes.borrow()[index].value.dim()
    }

    /// Parent indices of node `index`, for inspection.
    pub fn parents(&self, index: usize) -> Vec<usize> {
        self.nodes.borrow()[index]
            .op
            .parents()
            .iter()
            .flatten()
            .copied()
            .collect()
    }

    /// Recompute every non-leaf value from the leaves.
    pub fn replay(&self) -> Vec<Array2<f64>> {
        let nodes = self.nodes.borrow();
        let mut replayed: Vec<Node> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let value = match &node.op {
                Op::Leaf => node.value.clone(),
                Op::Reshape(a) => replayed[*a]
                    .value
                    .clone()
                    .into_shape_with_order(node.value.dim())
                    .expect("reshape"),
                op => forward_value(op, &replayed),
            };
            replayed.push(Node {
                op: node.op.clone(),
                value,
            });
        }
        replayed.into_iter().map(|n| n.value).collect()
    }

    /// Adjoints of `output` with respect to every node. The subgradient of
    /// `max(x, c)` and `|x|` at the kink is zero.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients, AutodiffError> {
        let nodes = self.nodes.borrow();
        if output.index >= nodes.len() || !std::ptr::eq(output.tape, self) {
            return Err(AutodiffError::NotOnTape {
                node: output.index,
                len: nodes.len(),
            });
        }
        self.check()?;
        let (rows, cols) = nodes[output.index].value.dim();
        if (rows, cols) != (1, 1) {
            return Err(AutodiffError::NotScalar {
                node: output.index,
                rows,
                cols,
            });
        }

        let mut grads: Vec<Option<Array2<f64>>> = vec![None; output.index + 1];
        grads[output.index] = Some(Array2::ones((1, 1)));

        for i in (0..=output.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            let val = |j: usize| &nodes[j].value;
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads[*a], reduce_to(g.clone(), val(*a).dim()));
                    accumulate(&mut grads[*b], reduce_to(g.clone(), val(*b).dim()));
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[*a], reduce_to(g.clone(), val(*a).dim()));
                    accumulate(&mut grads[*b], reduce_to(-&g, val(*b).dim()));
                }
                Op::Mul(a, b) => {
                    let ga = broadcast(&g, val(*b), |g, y| g * y);
                    let gb = broadcast(&g, val(*a), |g, x| g * x);
                    accumulate(&mut grads[*a], reduce_to(ga, val(*a).dim()));
                    accumulate(&mut grads[*b], reduce_to(gb, val(*b).dim()));
                }
                Op::Div(a, b) => {
                    let ga = broadcast(&g, val(*b), |g, y| g / y);
                    // d(a/b)/db = -(a/b)/b
                    let gb = broadcast(&(&g * &node.value), val(*b), |go, y| -go / y);
                    accumulate(&mut grads[*a], reduce_to(ga, val(*a).dim()));
                    accumulate(&mut grads[*b], reduce_to(gb, val(*b).dim()));
                }
                Op::AddRow(a, r) => {
                    accumulate(&mut grads[*r], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads[*a], g.clone());
                }
                Op::MatMul(a, b) => {
                    accumulate(&mut grads[*a], g.dot(&val(*b).t()));
                    accumulate(&mut grads[*b], val(*a).t().dot(&g));
                }
                Op::AddScalar(a, _) => accumulate(&mut grads[*a], g.clone()),
                Op::MulScalar(a, c) => accumulate(&mut grads[*a], &g * *c),
                Op::MulConst(a, c) => accumulate(&mut grads[*a], &g * c.as_ref()),
                Op::Neg(a) => accumulate(&mut grads[*a], -&g),
                Op::Tanh(a) => {
                    let mut ga = g.clone();
                    ga.zip_mut_with(&node.value, |g, &y| *g *= 1.0 - y * y);
                    accumulate(&mut grads[*a], ga);
                }
                Op::Exp(a) => accumulate(&mut grads[*a], &g * &node.value),
                Op::Abs(a) => {
                    let mut ga = g.clone();
                    ga.zip_mut_with(val(*a), |g, &x| *g *= sign_or_zero(x));
                    accumulate(&mut grads[*a], ga);
                }
                Op::MaxConst(a, c) => {
                    let mut ga = g.clone();
                    ga.zip_mut_with(val(*a), |g, &x| {
                        if x <= *c {
                            *g = 0.0
                        }
                    });
                    accumulate(&mut grads[*a], ga);
                }
                Op::Square(a) => {
                    let mut ga = g.clone();
                    ga.zip_mut_with(val(*a), |g, &x| *g *= 2.0 * x);
                    accumulate(&mut grads[*a], ga);
                }
                Op::Hypot(a, b) => {
                    let mut ga = g.clone();
                    let mut gb = g.clone();
                    ndarray::Zip::from(&mut ga)
                        .and(&mut gb)
                        .and(&node.value)
                        .and(val(*a))
                        .and(val(*b))
                        .for_each(|ga, gb, &h, &x, &y| {
                            if h > 0.0 {
                                *ga *= x / h;
                                *gb *= y / h;
                            } else {
                                *ga = 0.0;
                                *gb = 0.0;
                            }
                        });
                    accumulate(&mut grads[*a], ga);
                    accumulate(&mut grads[*b], gb);
                }
                Op::Sum(a) => {
                    accumulate(&mut grads[*a], Array2::from_elem(val(*a).dim(), g[[0, 0]]));
                }
                Op::Mean(a) => {
                    let n = val(*a).len() as f64;
                    accumulate(&mut grads[*a], Array2::from_elem(val(*a).dim(), g[[0, 0]] / n));
                }
                Op::Reshape(a) => {
                    let ga = g.clone().into_shape_with_order(val(*a).dim()).expect("reshape");
                    accumulate(&mut grads[*a], ga);
                }
                Op::Slice(a, rows, cols) => {
                    let mut ga = Array2::zeros(val(*a).dim());
                    ga.slice_mut(s![rows.clone(), cols.clone()]).assign(&g);
                    accumulate(&mut grads[*a], ga);
                }
            }
            grads[i] = Some(g);
        }

        grads.resize(nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: nodes.iter().map(|n| n.value.dim()).collect(),
        })
    }
}

fn sign_or_zero(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Div(..) => "div",
        Op::AddRow(..) => "add_row",
        Op::MatMul(..) => "matmul",
        Op::AddScalar(..) => "add_scalar",
        Op::MulScalar(..) => "mul_scalar",
        Op::MulConst(..) => "mul_const",
        Op::Neg(..) => "neg",
        Op::Tanh(..) => "tanh",
        Op::Exp(..) => "exp",
        Op::Abs(..) => "abs",
        Op::MaxConst(..) => "max_const",
        Op::Square(..) => "square",
        Op::Hypot(..) => "hypot",
        Op::Sum(..) => "sum",
        Op::Mean(..) => "mean",
        Op::Reshape(..) => "reshape",
        Op::Slice(..) => "slice",
    }
}
impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.shape(self.index)
    }

    pub fn value(&self) -> Array2<f64> {
        self.tape.value_ref(self.index).clone()
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self) -> f64 {
        let v = self.tape.value_ref(self.index);
        assert_eq!(v.dim(), (1, 1), "scalar() on a {:?} node", v.dim());
        v[[0, 0]]
    }

    fn unary(self, op: Op) -> Var<'t> {
        self.tape.record(op)
    }

    fn same_tape(self, other: Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands live on different tapes"
        );
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Op::Tanh(self.index))
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Op::Exp(self.index))
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(Op::Abs(self.index))
    }

    pub fn square(self) -> Var<'t> {
        self.unary(Op::Square(self.index))
    }

    /// Elementwise `max(x, c)`.
    pub fn max_const(self, c: f64) -> Var<'t> {
        self.unary(Op::MaxConst(self.index, c))
    }

    /// `max(x, 0)`.
    pub fn relu(self) -> Var<'t> {
        self.max_const(0.0)
    }

    pub fn sum(self) -> Var<'t> {
        self.unary(Op::Sum(self.index))
    }

    pub fn mean(self) -> Var<'t> {
        self.unary(Op::Mean(self.index))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.unary(Op::MulScalar(self.index, c))
    }

    pub fn shift(self, c: f64) -> Var<'t> {
        self.unary(Op::AddScalar(self.index, c))
    }

    /// Elementwise product with a constant matrix of the same shape.
    pub fn mul_const(self, c: Array2<f64>) -> Var<'t> {
        assert_eq!(self.shape(), c.dim(), "mul_const shape mismatch");
        self.unary(Op::MulConst(self.index, Rc::new(c)))
    }

    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        let (a, b) = (self.shape(), rhs.shape());
        assert_eq!(a.1, b.0, "matmul shape mismatch: {a:?} x {b:?}");
        self.tape.record(Op::MatMul(self.index, rhs.index))
    }

    /// Add a `1 x c` row to every row.
    pub fn add_row(self, row: Var<'t>) -> Var<'t> {
        self.same_tape(row);
        assert_eq!(row.shape(), (1, self.shape().1), "add_row shape mismatch");
        self.tape.record(Op::AddRow(self.index, row.index))
    }

    /// Elementwise `sqrt(a^2 + b^2)`; its subgradient at the origin is zero.
    pub fn hypot(self, other: Var<'t>) -> Var<'t> {
        self.same_tape(other);
        assert_eq!(self.shape(), other.shape(), "hypot shape mismatch");
        self.tape.record(Op::Hypot(self.index, other.index))
    }

    pub fn slice(self, rows: Range<usize>, cols: Range<usize>) -> Var<'t> {
        let (r, c) = self.shape();
        assert!(rows.end <= r && cols.end <= c, "slice out of bounds");
        self.unary(Op::Slice(self.index, rows, cols))
    }

    pub fn column(self, col: usize) -> Var<'t> {
        let rows = self.shape().0;
        self.slice(0..rows, col..col + 1)
    }

    /// Row-major reshape.
    pub fn reshape(self, rows: usize, cols: usize) -> Var<'t> {
        let value = self
            .value()
            .into_shape_with_order((rows, cols))
            .expect("reshape: element count mismatch");
        self.tape.push(Op::Reshape(self.index), value)
    }

    fn binary(self, rhs: Var<'t>, op: fn(usize, usize) -> Op) -> Var<'t> {
        self.same_tape(rhs);
        let (a, b) = (self.shape(), rhs.shape());
        assert!(
            a == b || a == (1, 1) || b == (1, 1),
            "elementwise shape mismatch: {a:?} vs {b:?}"
        );
        self.tape.record(op(self.index, rhs.index))
    }

    fn checked_div(self, rhs: Var<'t>) -> Var<'t> {
        if self.tape.value_ref(rhs.index).iter().any(|&y| y == 0.0) {
            self.tape.fail(self.tape.len(), "division by zero");
        }
        self.binary(rhs, Op::Div)
    }
}

macro_rules! impl_binary {
    ($trait:ident, $method:ident, $var_op:expr, $scalar:expr) => {
        impl<'t> $trait<Var<'t>> for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                $var_op(self, rhs)
            }
        }
        impl<'t> $trait<f64> for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: f64) -> Var<'t> {
                $scalar(self, rhs)
            }
        }
    };
}

impl_binary!(Add, add, |a: Var<'t>, b| a.binary(b, Op::Add), |a: Var<'t>, c| a
    .shift(c));
impl_binary!(Sub, sub, |a: Var<'t>, b| a.binary(b, Op::Sub), |a: Var<'t>, c: f64| a
    .shift(-c));
impl_binary!(Mul, mul, |a: Var<'t>, b| a.binary(b, Op::Mul), |a: Var<'t>, c| a
    .scale(c));
impl_binary!(
    Div,
    div,
    |a: Var<'t>, b| a.checked_div(b),
    |a: Var<'t>, c: f64| {
        let b = a.tape.scalar(c);
        a.checked_div(b)
    }
);

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs.scale(self)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(Op::Neg(self.index))
    }
}

/// Compare reverse-mode gradients of `f` at `x` against central differences
/// with step `step`.
///
/// `f` receives the parameters as one `1 x n` leaf and must return a scalar.
/// Returns the maximum over components of
/// `|analytic - central| / (|analytic| + |central| + 1e-12)`.
pub fn grad_check<F>(f: F, x: &[f64], step: f64) -> Result<f64, AutodiffError>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Var<'t>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(AutodiffError::BadStep(step));
    }
    let tape = Tape::new();
    let input = tape.row(x);
    let out = f(&tape, input);
    let analytic = tape.backward(out)?.wrt(input);

    let eval = |probe: &[f64]| -> Result<f64, AutodiffError> {
        let tape = Tape::new();
        let out = f(&tape, tape.row(probe));
        tape.check()?;
        Ok(out.scalar())
    };

    let mut worst = 0.0_f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = eval(&probe)?;
        probe[i] = x[i] - step;
        let minus = eval(&probe)?;
        probe[i] = x[i];
        let central = (plus - minus) / (2.0 * step);
        let a = analytic[[0, i]];
        let err = (a - central).abs() / (a.abs() + central.abs() + 1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}
