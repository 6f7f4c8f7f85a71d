//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! Operations append nodes to a [`Tape`]; node ids are handed out in
//! topological order, so the backward sweep is a single reverse pass.

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    BroadcastRows(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    Min(Var, Var),
    Clamp(Var, T, T),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    needs_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    adjoints: Vec<Option<Matrix<T>>>,
    shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss w.r.t. `v`; zeros if `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Matrix<T> {
        match &self.adjoints[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, v: Var) -> Matrix<T> {
        match self.adjoints[v.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

fn shape_check(context: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            context,
            expected: a.0 * a.1,
            got: b.0 * b.1,
        });
    }
    Ok(())
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Trainable input.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (n, c) = self.shape(a);
        shape_check("add_row bias", (1, c), self.shape(row))?;
        let r = self.value(row).as_slice().to_vec();
        let mut value = self.value(a).clone();
        for i in 0..n {
            for (x, &b) in value.as_mut_slice()[i * c..(i + 1) * c].iter_mut().zip(&r) {
                *x = *x + b;
            }
        }
        let ng = self.needs(a) || self.needs(row);
        Ok(self.push(value, Op::AddRow(a, row), ng))
    }

    /// Repeats a `1 x c` row `n` times.
    pub fn broadcast_rows(&mut self, row: Var, n: usize) -> Result<Var> {
        let (r, c) = self.shape(row);
        if r != 1 {
            return Err(Error::DimensionMismatch {
                context: "broadcast_rows expects a row vector",
                expected: 1,
                got: r,
            });
        }
        let src = self.value(row).as_slice().to_vec();
        let mut data = Vec::with_capacity(n * c);
        for _ in 0..n {
            data.extend_from_slice(&src);
        }
        let value = Matrix::from_vec(n, c, data)?;
        let ng = self.needs(row);
        Ok(self.push(value, Op::BroadcastRows(row), ng))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var> {
        shape_check("elementwise operands", self.shape(a), self.shape(b))?;
        let value = self.value(a).zip_map(self.value(b), f);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, op, ng))
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.value(a).map(f);
        let ng = self.needs(a);
        self.push(value, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Min(a, b), |x, y| if y < x { y } else { x })
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), |x| x.tanh())
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(T::zero()))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), |x| x.exp())
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Op::Ln(a), |x| x.ln())
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// Elementwise clamp; the gradient is zero outside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.max(lo).min(hi))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let ng = self.needs(a);
        self.push(value, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let value = Matrix::scalar(m.sum() / T::from_usize_lossy(m.len().max(1)));
        let ng = self.needs(a);
        self.push(value, Op::Mean(a), ng)
    }

    /// Row sums: `n x c -> n x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let data = (0..m.rows()).map(|i| m.row(i).iter().copied().sum()).collect();
        let value = Matrix::from_vec(m.rows(), 1, data).expect("row sums");
        let ng = self.needs(a);
        self.push(value, Op::SumCols(a), ng)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, ca) = self.shape(a);
        let (nb, cb) = self.shape(b);
        if n != nb {
            return Err(Error::DimensionMismatch {
                context: "concat_cols rows",
                expected: n,
                got: nb,
            });
        }
        let (va, vb) = (self.value(a), self.value(b));
        let mut data = Vec::with_capacity(n * (ca + cb));
        for i in 0..n {
            data.extend_from_slice(va.row(i));
            data.extend_from_slice(vb.row(i));
        }
        let value = Matrix::from_vec(n, ca + cb, data)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::ConcatCols(a, b), ng))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (n, c) = self.shape(a);
        if start + len > c {
            return Err(Error::DimensionMismatch {
                context: "slice_cols range",
                expected: c,
                got: start + len,
            });
        }
        let va = self.value(a);
        let mut data = Vec::with_capacity(n * len);
        for i in 0..n {
            data.extend_from_slice(&va.row(i)[start..start + len]);
        }
        let value = Matrix::from_vec(n, len, data)?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::SliceCols(a, start), ng))
    }

    /// Propagates adjoints from a `1 x 1` loss back to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let (rows, cols) = self.shape(loss);
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        let n = self.nodes.len();
        let mut adj: Vec<Option<Matrix<T>>> = vec![None; n];
        adj[loss.0] = Some(Matrix::scalar(T::one()));

        for id in (0..=loss.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            if node.needs_grad {
                self.propagate(node, &g, &mut adj)?;
            }
            adj[id] = Some(g);
        }
        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, node: &Node<T>, g: &Matrix<T>, adj: &mut [Option<Matrix<T>>]) -> Result<()> {
        let mut acc = |v: Var, d: Matrix<T>| {
            if !self.needs(v) {
                return;
            }
            match &mut adj[v.0] {
                Some(existing) => existing.add_assign(&d),
                slot => *slot = Some(d),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let y = &node.value;
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(a) {
                    acc(a, g.matmul_t(val(b))?);
                }
                if self.needs(b) {
                    acc(b, val(a).tmatmul(g)?);
                }
            }
            Op::AddRow(a, row) => {
                acc(a, g.clone());
                acc(row, column_sums(g));
            }
            Op::BroadcastRows(row) => acc(row, column_sums(g)),
            Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(a, g.clone());
                acc(b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(a, g.zip_map(val(b), |gi, bi| gi * bi));
                acc(b, g.zip_map(val(a), |gi, ai| gi * ai));
            }
            Op::Scale(a, c) => acc(a, g.map(|x| x * c)),
            Op::AddScalar(a) => acc(a, g.clone()),
            Op::Tanh(a) => acc(a, g.zip_map(y, |gi, yi| gi * (T::one() - yi * yi))),
            Op::Relu(a) => acc(
                a,
                g.zip_map(val(a), |gi, xi| if xi > T::zero() { gi } else { T::zero() }),
            ),
            Op::Exp(a) => acc(a, g.zip_map(y, |gi, yi| gi * yi)),
            Op::Ln(a) => acc(a, g.zip_map(val(a), |gi, xi| gi / xi)),
            Op::Square(a) => acc(a, g.zip_map(val(a), |gi, xi| gi * (xi + xi))),
            Op::Min(a, b) => {
                let (va, vb) = (val(a), val(b));
                let pick_a = va.zip_map(vb, |x, z| if z < x { T::zero() } else { T::one() });
                acc(a, g.zip_map(&pick_a, |gi, m| gi * m));
                acc(b, g.zip_map(&pick_a, |gi, m| gi * (T::one() - m)));
            }
            Op::Clamp(a, lo, hi) => acc(
                a,
                g.zip_map(val(a), |gi, xi| {
                    if xi >= lo && xi <= hi {
                        gi
                    } else {
                        T::zero()
                    }
                }),
            ),
            Op::Sum(a) => {
                let (r, c) = val(a).shape();
                acc(a, Matrix::filled(r, c, g.get(0, 0)));
            }
            Op::Mean(a) => {
                let (r, c) = val(a).shape();
                let scale = g.get(0, 0) / T::from_usize_lossy((r * c).max(1));
                acc(a, Matrix::filled(r, c, scale));
            }
            Op::SumCols(a) => {
                let (r, c) = val(a).shape();
                let mut d = Matrix::zeros(r, c);
                for i in 0..r {
                    let gi = g.get(i, 0);
                    for j in 0..c {
                        d.set(i, j, gi);
                    }
                }
                acc(a, d);
            }
            Op::ConcatCols(a, b) => {
                let (n, ca) = val(a).shape();
                let cb = val(b).cols();
                let mut da = Vec::with_capacity(n * ca);
                let mut db = Vec::with_capacity(n * cb);
                for i in 0..n {
                    let row = g.row(i);
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                acc(a, Matrix::from_vec(n, ca, da)?);
                acc(b, Matrix::from_vec(n, cb, db)?);
            }
            Op::SliceCols(a, start) => {
                let (n, c) = val(a).shape();
                let len = g.cols();
                let mut d = Matrix::zeros(n, c);
                for i in 0..n {
                    for j in 0..len {
                        d.set(i, start + j, g.get(i, j));
                    }
                }
                acc(a, d);
            }
        }
        Ok(())
    }
}

fn column_sums<T: Scalar>(g: &Matrix<T>) -> Matrix<T> {
    let mut out = vec![T::zero(); g.cols()];
    for i in 0..g.rows() {
        for (o, &x) in out.iter_mut().zip(g.row(i)) {
            *o = *o + x;
        }
    }
    Matrix::row_vector(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_derivative() {
        let mut t = Tape::<f64>::new();
        let w = t.param(Matrix::scalar(0.7));
        let x = t.constant(Matrix::scalar(3.0));
        let loss = t.mul(w, x).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(w).as_slice(), &[3.0]);
        assert_eq!(g.get(x).as_slice(), &[0.0]);
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        let mut t = Tape::<f64>::new();
        let w = t.param(Matrix::row_vector(vec![1.0, 2.0]));
        let c = t.constant(Matrix::scalar(5.0));
        let loss = t.scale(c, 2.0);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(w).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::<f64>::new();
        let w = t.param(Matrix::row_vector(vec![1.0, 2.0]));
        assert!(matches!(
            t.backward(w),
            Err(Error::NonScalarLoss { rows: 1, cols: 2 })
        ));
    }

    /// Central differences over every input entry of a composite expression
    /// that touches each op.
    #[test]
    fn every_op_matches_finite_differences() {
        let a0 = Matrix::from_vec(3, 2, vec![0.3, -0.8, 1.2, 0.4, -0.5, 0.9]).unwrap();
        let w0 = Matrix::from_vec(2, 3, vec![0.5, -0.2, 0.1, 0.7, 0.3, -0.6]).unwrap();
        let b0 = Matrix::row_vector(vec![0.05, -0.1, 0.2]);

        let build = |a: &Matrix<f64>, w: &Matrix<f64>, b: &Matrix<f64>| {
            let mut t = Tape::new();
            let (va, vw, vb) = (t.param(a.clone()), t.param(w.clone()), t.param(b.clone()));
            let h = t.matmul(va, vw).unwrap();
            let h = t.add_row(h, vb).unwrap();
            let th = t.tanh(h);
            let r = t.relu(h);
            let e = t.exp(th);
            let sq = t.square(r);
            let s = t.add(e, sq).unwrap();
            let m = t.min(th, r).unwrap();
            let d = t.sub(s, m).unwrap();
            let cl = t.clamp(d, 0.9, 2.0);
            let p = t.mul(cl, d).unwrap();
            let lg = t.add_scalar(p, 3.0);
            let lg = t.ln(lg);
            let bc = t.broadcast_rows(vb, 3).unwrap();
            let cat = t.concat_cols(lg, bc).unwrap();
            let sl = t.slice_cols(cat, 1, 4).unwrap();
            let rs = t.sum_cols(sl);
            let rs = t.scale(rs, 0.7);
            let mn = t.mean(rs);
            let tot = t.sum(sl);
            let loss = t.add(mn, tot).unwrap();
            (t, loss, [va, vw, vb])
        };

        let (t, loss, vars) = build(&a0, &w0, &b0);
        let g = t.backward(loss).unwrap();
        let inputs = [a0.clone(), w0.clone(), b0.clone()];
        let h = 1e-6;
        for (k, v) in vars.iter().enumerate() {
            let grad = g.get(*v);
            for idx in 0..inputs[k].len() {
                let eval = |delta: f64| {
                    let mut ins = inputs.clone();
                    ins[k].as_mut_slice()[idx] += delta;
                    let (t, l, _) = build(&ins[0], &ins[1], &ins[2]);
                    t.value(l).get(0, 0)
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grad.as_slice()[idx];
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "input {k} entry {idx}: fd {fd} vs {an}"
                );
            }
        }
    }
}
