//! Reverse-mode tape over dense 2-D arrays.
//!
//! Every value on the tape is a row-major `rows x cols` matrix; vectors are
//! `1 x n` (or `n x 1`) and scalars `1 x 1`. Nodes are appended in evaluation
//! order, so the node list is already a topological order and backward is a
//! single reverse sweep.
//!
//! Elementwise binary ops broadcast a dimension of size 1 against the other
//! operand, in either direction.

use ndarray::{s, Array2, Axis, Zip};

use super::error::DiffError;
use super::param::{Gradients, ParamId, ParamStore};
use crate::scalar::{self, Real};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, T),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Recip(Var),
    Clamp(Var, T, T),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    LogSumExpRows(Var),
    Transpose(Var),
    SliceCols(Var, usize),
    ConcatCols(Var, Var),
    WeightedSqDist(Var, Var, Var),
    PairwiseSqDist(Var),
    MaskDiag(Var),
}

#[derive(Debug)]
struct Node<T: Real> {
    op: Op<T>,
    // `None` for parameter leaves, which read through to the store.
    value: Option<Array2<T>>,
    requires_grad: bool,
}

/// Records operations against a borrowed [`ParamStore`].
///
/// Gradients are returned from [`Tape::backward`] rather than written in
/// place; add them to the store with [`ParamStore::accumulate`].
pub struct Tape<'s, T: Real> {
    store: &'s ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<Var>>,
}

fn shape_err(op: &'static str, detail: String) -> DiffError {
    DiffError::Shape { op, detail }
}

fn broadcast_shape(
    op: &'static str,
    a: (usize, usize),
    b: (usize, usize),
) -> Result<(usize, usize), DiffError> {
    let dim = |x: usize, y: usize| -> Option<usize> {
        if x == y || y == 1 {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else {
            None
        }
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(shape_err(
            op,
            format!("cannot broadcast {}x{} with {}x{}", a.0, a.1, b.0, b.1),
        )),
    }
}

/// Sums `g` down to `shape` along broadcast axes.
fn reduce_to<T: Real>(g: Array2<T>, shape: (usize, usize)) -> Array2<T> {
    let mut g = g;
    if shape.0 == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

fn zip_broadcast<T: Real>(
    a: &Array2<T>,
    b: &Array2<T>,
    shape: (usize, usize),
    f: impl Fn(T, T) -> T,
) -> Array2<T> {
    let av = a.broadcast(shape).expect("checked broadcast");
    let bv = b.broadcast(shape).expect("checked broadcast");
    let mut out = Array2::zeros(shape);
    Zip::from(&mut out)
        .and(&av)
        .and(&bv)
        .for_each(|o, &x, &y| *o = f(x, y));
    out
}

impl<'s, T: Real> Tape<'s, T> {
    pub fn new(store: &'s ParamStore<T>) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParamStore<T> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Array2<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Forward value of `v`. Panics if `v` is not from this tape.
    pub fn value(&self, v: Var) -> &Array2<T> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.store.value(*id),
            (_, Some(val)) => val,
            _ => unreachable!("non-param node without value"),
        }
    }

    pub fn try_value(&self, v: Var) -> Result<&Array2<T>, DiffError> {
        if v.0 < self.nodes.len() {
            Ok(self.value(v))
        } else {
            Err(DiffError::NoForwardValue(v.0))
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[[0, 0]]
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(Op::Constant, value, false)
    }

    pub fn scalar_constant(&mut self, v: T) -> Var {
        self.constant(Array2::from_elem((1, 1), v))
    }

    /// Leaf for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.nrows() {
            return Err(shape_err(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    av.nrows(),
                    av.ncols(),
                    bv.nrows(),
                    bv.ncols()
                ),
            ));
        }
        let out = av.dot(bv);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), out, rg))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var, DiffError> {
        let shape = broadcast_shape(name, self.shape(a), self.shape(b))?;
        let out = zip_broadcast(self.value(a), self.value(b), shape, f);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(op, out, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.binary("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.binary("div", a, b, Op::Div(a, b), |x, y| x / y)
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let out = self.value(a).mapv(f);
        let rg = self.rg(a);
        self.push(op, out, rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a), |x| -x)
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        self.unary(a, Op::Scale(a, k), |x| x * k)
    }

    pub fn add_scalar(&mut self, a: Var, k: T) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + k)
    }

    /// `max(x, 0)`; the derivative at 0 is taken as 0.
    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(
            a,
            Op::Relu(a),
            |x| if x > T::zero() { x } else { T::zero() },
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), scalar::sigmoid)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), scalar::softplus)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), T::exp)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), T::ln)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(a, Op::Recip(a), T::recip)
    }

    /// Clamps into `[lo, hi]`; gradient passes only where the input was inside.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.max(lo).min(hi))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let rg = self.rg(a);
        self.push(Op::Sum(a), Array2::from_elem((1, 1), s), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.sum() / scalar::lit::<T>(v.len() as f64);
        let rg = self.rg(a);
        self.push(Op::Mean(a), Array2::from_elem((1, 1), m), rg)
    }

    /// Row sums: `r x c -> r x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let out = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let rg = self.rg(a);
        self.push(Op::SumCols(a), out, rg)
    }

    /// Row-wise log-sum-exp: `r x c -> r x 1`.
    pub fn log_sum_exp_rows(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let out = Array2::from_shape_fn((v.nrows(), 1), |(i, _)| {
            scalar::log_sum_exp(v.row(i).iter().copied())
        });
        let rg = self.rg(a);
        self.push(Op::LogSumExpRows(a), out, rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).t().to_owned();
        let rg = self.rg(a);
        self.push(Op::Transpose(a), out, rg)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, DiffError> {
        let v = self.value(a);
        if start + len > v.ncols() {
            return Err(shape_err(
                "slice_cols",
                format!("columns {}..{} of {}", start, start + len, v.ncols()),
            ));
        }
        let out = v.slice(s![.., start..start + len]).to_owned();
        let rg = self.rg(a);
        Ok(self.push(Op::SliceCols(a, start), out, rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.nrows() != bv.nrows() {
            return Err(shape_err(
                "concat_cols",
                format!("row counts {} and {}", av.nrows(), bv.nrows()),
            ));
        }
        let out = ndarray::concatenate(Axis(1), &[av.view(), bv.view()]).expect("rows checked");
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::ConcatCols(a, b), out, rg))
    }

    /// `out[b, k] = sum_j (x[b, j] - centers[k, j])^2 * weights[k, j]`.
    pub fn weighted_sq_dist(
        &mut self,
        x: Var,
        centers: Var,
        weights: Var,
    ) -> Result<Var, DiffError> {
        let (xv, cv, wv) = (self.value(x), self.value(centers), self.value(weights));
        if xv.ncols() != cv.ncols() || cv.dim() != wv.dim() {
            return Err(shape_err(
                "weighted_sq_dist",
                format!(
                    "points {:?}, centers {:?}, weights {:?}",
                    xv.dim(),
                    cv.dim(),
                    wv.dim()
                ),
            ));
        }
        let out = Array2::from_shape_fn((xv.nrows(), cv.nrows()), |(b, k)| {
            let mut acc = T::zero();
            for j in 0..xv.ncols() {
                let d = xv[[b, j]] - cv[[k, j]];
                acc += d * d * wv[[k, j]];
            }
            acc
        });
        let rg = self.rg(x) || self.rg(centers) || self.rg(weights);
        Ok(self.push(Op::WeightedSqDist(x, centers, weights), out, rg))
    }

    /// Squared Euclidean distances between all rows, via the expanded form
    /// `|a|^2 + |b|^2 - 2 a.b` clamped at zero.
    pub fn pairwise_sq_dist(&mut self, a: Var) -> Var {
        let out = expanded_sq_dists(self.value(a));
        let rg = self.rg(a);
        self.push(Op::PairwiseSqDist(a), out, rg)
    }

    /// Zeroes the diagonal of a square matrix.
    pub fn mask_diag(&mut self, a: Var) -> Result<Var, DiffError> {
        let v = self.value(a);
        if v.nrows() != v.ncols() {
            return Err(shape_err(
                "mask_diag",
                format!("{:?} is not square", v.dim()),
            ));
        }
        let mut out = v.clone();
        out.diag_mut().fill(T::zero());
        let rg = self.rg(a);
        Ok(self.push(Op::MaskDiag(a), out, rg))
    }

    /// Reverse sweep from the scalar `out`.
    pub fn backward(&self, out: Var) -> Result<Gradients<T>, DiffError> {
        if out.0 >= self.nodes.len() {
            return Err(DiffError::NoForwardValue(out.0));
        }
        let (r, c) = self.shape(out);
        if (r, c) != (1, 1) {
            return Err(DiffError::NotScalar(r, c));
        }
        let mut result = Gradients::new(self.store.len());
        let mut grads: Vec<Option<Array2<T>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(Array2::ones((1, 1)));

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let mut send = |v: Var, contrib: Array2<T>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &contrib,
                    slot => *slot = Some(contrib),
                }
            };
            match node.op {
                Op::Constant => {}
                Op::Param(id) => result.add(id, g),
                Op::MatMul(a, b) => {
                    if self.rg(a) {
                        send(a, g.dot(&self.value(b).t()));
                    }
                    if self.rg(b) {
                        send(b, self.value(a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    send(b, reduce_to(g.clone(), self.shape(b)));
                    send(a, reduce_to(g, self.shape(a)));
                }
                Op::Sub(a, b) => {
                    send(b, reduce_to(g.mapv(|x| -x), self.shape(b)));
                    send(a, reduce_to(g, self.shape(a)));
                }
                Op::Mul(a, b) => {
                    let shape = g.dim();
                    let (av, bv) = (self.value(a), self.value(b));
                    if self.rg(a) {
                        send(
                            a,
                            reduce_to(zip_broadcast(&g, bv, shape, |g, y| g * y), av.dim()),
                        );
                    }
                    if self.rg(b) {
                        send(
                            b,
                            reduce_to(zip_broadcast(&g, av, shape, |g, x| g * x), bv.dim()),
                        );
                    }
                }
                Op::Div(a, b) => {
                    let shape = g.dim();
                    let (av, bv) = (self.value(a), self.value(b));
                    if self.rg(a) {
                        send(
                            a,
                            reduce_to(zip_broadcast(&g, bv, shape, |g, y| g / y), av.dim()),
                        );
                    }
                    if self.rg(b) {
                        // d(a/b)/db = -a/b^2 = -out/b
                        let out_v = node.value.as_ref().expect("div output");
                        let gy = zip_broadcast(&(&g * out_v), bv, shape, |go, y| -go / y);
                        send(b, reduce_to(gy, bv.dim()));
                    }
                }
                Op::Neg(a) => send(a, g.mapv(|x| -x)),
                Op::Scale(a, k) => send(a, g.mapv(|x| x * k)),
                Op::AddScalar(a) => send(a, g),
                Op::Relu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(a)).for_each(|g, &x| {
                        if x <= T::zero() {
                            *g = T::zero()
                        }
                    });
                    send(a, ga);
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().expect("sigmoid output");
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(y)
                        .for_each(|g, &y| *g *= y * (T::one() - y));
                    send(a, ga);
                }
                Op::Softplus(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(self.value(a))
                        .for_each(|g, &x| *g *= scalar::sigmoid(x));
                    send(a, ga);
                }
                Op::Exp(a) => {
                    let y = node.value.as_ref().expect("exp output");
                    send(a, g * y);
                }
                Op::Log(a) => send(a, g / self.value(a)),
                Op::Square(a) => {
                    let two = scalar::lit::<T>(2.0);
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(self.value(a))
                        .for_each(|g, &x| *g *= two * x);
                    send(a, ga);
                }
                Op::Recip(a) => {
                    let y = node.value.as_ref().expect("recip output");
                    let mut ga = g;
                    Zip::from(&mut ga).and(y).for_each(|g, &y| *g = -*g * y * y);
                    send(a, ga);
                }
                Op::Clamp(a, lo, hi) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(a)).for_each(|g, &x| {
                        if x < lo || x > hi {
                            *g = T::zero()
                        }
                    });
                    send(a, ga);
                }
                Op::Sum(a) => send(a, Array2::from_elem(self.shape(a), g[[0, 0]])),
                Op::Mean(a) => {
                    let shape = self.shape(a);
                    let n = scalar::lit::<T>((shape.0 * shape.1) as f64);
                    send(a, Array2::from_elem(shape, g[[0, 0]] / n));
                }
                Op::SumCols(a) => {
                    let shape = self.shape(a);
                    send(a, g.broadcast(shape).expect("r x 1").to_owned());
                }
                Op::LogSumExpRows(a) => {
                    let x = self.value(a);
                    let lse = node.value.as_ref().expect("lse output");
                    let mut ga = x.clone();
                    for ((i, _), v) in ga.indexed_iter_mut() {
                        *v = g[[i, 0]] * (*v - lse[[i, 0]]).exp();
                    }
                    send(a, ga);
                }
                Op::Transpose(a) => send(a, g.t().to_owned()),
                Op::SliceCols(a, start) => {
                    let mut ga = Array2::zeros(self.shape(a));
                    let len = g.ncols();
                    ga.slice_mut(s![.., start..start + len]).assign(&g);
                    send(a, ga);
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.shape(a).1;
                    if self.rg(b) {
                        send(b, g.slice(s![.., ca..]).to_owned());
                    }
                    if self.rg(a) {
                        send(a, g.slice(s![.., ..ca]).to_owned());
                    }
                }
                Op::WeightedSqDist(x, centers, weights) => {
                    let (xv, cv, wv) = (self.value(x), self.value(centers), self.value(weights));
                    let two = scalar::lit::<T>(2.0);
                    let mut gx = Array2::zeros(xv.dim());
                    let mut gc = Array2::zeros(cv.dim());
                    let mut gw = Array2::zeros(wv.dim());
                    for b in 0..xv.nrows() {
                        for k in 0..cv.nrows() {
                            let gbk = g[[b, k]];
                            for j in 0..xv.ncols() {
                                let d = xv[[b, j]] - cv[[k, j]];
                                let t = gbk * two * d * wv[[k, j]];
                                gx[[b, j]] += t;
                                gc[[k, j]] -= t;
                                gw[[k, j]] += gbk * d * d;
                            }
                        }
                    }
                    send(weights, gw);
                    send(centers, gc);
                    send(x, gx);
                }
                Op::PairwiseSqDist(a) => {
                    let av = self.value(a);
                    let out_v = node.value.as_ref().expect("pairwise output");
                    let mut sym = &g + &g.t();
                    // Entries clamped at zero carry no gradient.
                    Zip::from(&mut sym).and(out_v).for_each(|s, &d| {
                        if d <= T::zero() {
                            *s = T::zero()
                        }
                    });
                    let two = scalar::lit::<T>(2.0);
                    let row_sums = sym.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ga = (&(av * &row_sums) - &sym.dot(av)) * two;
                    send(a, ga);
                }
                Op::MaskDiag(a) => {
                    let mut ga = g;
                    ga.diag_mut().fill(T::zero());
                    send(a, ga);
                }
            }
        }
        Ok(result)
    }
}

/// `|a_i|^2 + |a_j|^2 - 2 a_i.a_j`, clamped at zero, exact zero diagonal.
pub fn expanded_sq_dists<T: Real>(a: &Array2<T>) -> Array2<T> {
    let gram = a.dot(&a.t());
    let n = a.nrows();
    let two = scalar::lit::<T>(2.0);
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            T::zero()
        } else {
            (gram[[i, i]] + gram[[j, j]] - two * gram[[i, j]]).max(T::zero())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn square_forward_and_backward() {
        let mut store = ParamStore::new();
        let x = store.add("x", array![[3.0f64]]);
        let tape_grad = {
            let mut t = Tape::new(&store);
            let xv = t.param(x);
            let y = t.mul(xv, xv).unwrap();
            assert_eq!(t.scalar(y), 9.0);
            t.backward(y).unwrap()
        };
        assert_eq!(tape_grad.get(x).unwrap()[[0, 0]], 6.0);
    }

    #[test]
    fn softplus_value_and_slope_at_zero() {
        let mut store = ParamStore::new();
        let x = store.add("t", array![[0.0f64]]);
        let mut t = Tape::new(&store);
        let xv = t.param(x);
        let y = t.softplus(xv);
        assert!((t.scalar(y) - std::f64::consts::LN_2).abs() < 1e-15);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap()[[0, 0]], 0.5);
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        let mut store = ParamStore::new();
        let x = store.add("x", array![[0.0f64, 1.0, -1.0]]);
        let mut t = Tape::new(&store);
        let xv = t.param(x);
        let r = t.relu(xv);
        let s = t.sum(r);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &array![[0.0, 1.0, 0.0]]);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f = (x*y) + (x*y)*x  with x=2, y=5  => df/dx = y + 2xy = 25, df/dy = x + x^2 = 6
        let mut store = ParamStore::new();
        let x = store.add("x", array![[2.0f64]]);
        let y = store.add("y", array![[5.0f64]]);
        let mut t = Tape::new(&store);
        let (xv, yv) = (t.param(x), t.param(y));
        let xy = t.mul(xv, yv).unwrap();
        let xyx = t.mul(xy, xv).unwrap();
        let f = t.add(xy, xyx).unwrap();
        let g = t.backward(f).unwrap();
        assert_eq!(g.get(x).unwrap()[[0, 0]], 25.0);
        assert_eq!(g.get(y).unwrap()[[0, 0]], 6.0);
    }

    #[test]
    fn shape_mismatch_names_the_op() {
        let store = ParamStore::<f64>::new();
        let mut t = Tape::new(&store);
        let a = t.constant(Array2::zeros((2, 3)));
        let b = t.constant(Array2::zeros((2, 3)));
        match t.matmul(a, b) {
            Err(DiffError::Shape { op, .. }) => assert_eq!(op, "matmul"),
            other => panic!("expected shape error, got {other:?}"),
        }
        let c = t.constant(Array2::zeros((3, 2)));
        assert!(matches!(
            t.add(a, c),
            Err(DiffError::Shape { op: "add", .. })
        ));
    }

    #[test]
    fn backward_without_forward_is_rejected() {
        let store = ParamStore::<f64>::new();
        let mut other = Tape::new(&store);
        let v = other.scalar_constant(1.0);
        let empty = Tape::new(&store);
        assert_eq!(empty.backward(v), Err(DiffError::NoForwardValue(0)));
    }

    #[test]
    fn backward_requires_scalar() {
        let store = ParamStore::<f64>::new();
        let mut t = Tape::new(&store);
        let v = t.constant(Array2::zeros((2, 2)));
        assert_eq!(t.backward(v), Err(DiffError::NotScalar(2, 2)));
    }

    #[test]
    fn broadcasting_reduces_gradient() {
        let mut store = ParamStore::new();
        let b = store.add("b", array![[1.0f64, 2.0]]);
        let mut t = Tape::new(&store);
        let x = t.constant(array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        let bv = t.param(b);
        let y = t.mul(x, bv).unwrap();
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(b).unwrap(), &array![[6.0, 6.0]]);
    }

    #[test]
    fn expanded_distances_are_nonnegative_with_zero_diagonal() {
        let a = array![[1.0f64, 2.0], [1.0, 2.0], [4.0, 6.0]];
        let d = expanded_sq_dists(&a);
        assert_eq!(d[[0, 1]], 0.0);
        assert_eq!(d[[0, 2]], 25.0);
        assert_eq!(d[[2, 2]], 0.0);
    }
}
