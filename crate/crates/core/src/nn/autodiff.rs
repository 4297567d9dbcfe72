//! Scalar reverse-mode tape for loss expressions.
//!
//! Network outputs enter the tape as leaves; the tape returns the loss
//! gradient with respect to every leaf, which the layer-level backward pass
//! of [`crate::nn::Mlp`] then pushes into the parameters.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Exp(usize),
    Log(usize),
    Tanh(usize),
    Sigmoid(usize),
    Softplus(usize),
    Min(usize, usize),
    Max(usize, usize),
    Clip(usize, f64, f64),
    Scale(usize, f64),
    Square(usize),
    Sum(Vec<usize>),
    LogSumExp(Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    value: f64,
    op: Op,
}

/// Append-only expression graph.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: f64, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input or constant; its gradient is reported by [`Tape::backward`].
    pub fn var(&mut self, value: f64) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn vars(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    fn val(&self, i: usize) -> f64 {
        self.nodes[i].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a.0) + self.val(b.0), Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a.0) - self.val(b.0), Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a.0) * self.val(b.0), Op::Mul(a.0, b.0))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a.0) / self.val(b.0), Op::Div(a.0, b.0))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.push(-self.val(a.0), Op::Neg(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.push(self.val(a.0).exp(), Op::Exp(a.0))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.push(self.val(a.0).ln(), Op::Log(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.push(self.val(a.0).tanh(), Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.push(sigmoid(self.val(a.0)), Op::Sigmoid(a.0))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.push(softplus(self.val(a.0)), Op::Softplus(a.0))
    }

    /// Ties send the gradient to the first argument.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a.0).min(self.val(b.0)), Op::Min(a.0, b.0))
    }

    pub fn max(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a.0).max(self.val(b.0)), Op::Max(a.0, b.0))
    }

    /// Clamp to `[lo, hi]`; gradient 1 inside the closed interval, 0 outside.
    pub fn clip(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.push(self.val(a.0).clamp(lo, hi), Op::Clip(a.0, lo, hi))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.push(c * self.val(a.0), Op::Scale(a.0, c))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let k = self.var(c);
        self.add(a, k)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let x = self.val(a.0);
        self.push(x * x, Op::Square(a.0))
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|x| self.val(x.0)).sum();
        self.push(v, Op::Sum(xs.iter().map(|x| x.0).collect()))
    }

    pub fn mean(&mut self, xs: &[Var]) -> Var {
        let s = self.sum(xs);
        self.scale(s, 1.0 / xs.len().max(1) as f64)
    }

    pub fn logsumexp(&mut self, xs: &[Var]) -> Var {
        let vals: Vec<f64> = xs.iter().map(|x| self.val(x.0)).collect();
        self.push(logsumexp(&vals), Op::LogSumExp(xs.iter().map(|x| x.0).collect()))
    }

    /// Gradient of `out` with respect to every node, indexed by [`Var`].
    pub fn backward(&self, out: Var) -> Gradients {
        let mut g = vec![0.0; self.nodes.len()];
        g[out.0] = 1.0;
        for i in (0..=out.0).rev() {
            let gi = g[i];
            if gi == 0.0 {
                continue;
            }
            let v = self.nodes[i].value;
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    g[*a] += gi;
                    g[*b] += gi;
                }
                Op::Sub(a, b) => {
                    g[*a] += gi;
                    g[*b] -= gi;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.val(*a), self.val(*b));
                    g[*a] += gi * vb;
                    g[*b] += gi * va;
                }
                Op::Div(a, b) => {
                    let vb = self.val(*b);
                    g[*a] += gi / vb;
                    g[*b] -= gi * v / vb;
                }
                Op::Neg(a) => g[*a] -= gi,
                Op::Exp(a) => g[*a] += gi * v,
                Op::Log(a) => g[*a] += gi / self.val(*a),
                Op::Tanh(a) => g[*a] += gi * (1.0 - v * v),
                Op::Sigmoid(a) => g[*a] += gi * v * (1.0 - v),
                Op::Softplus(a) => g[*a] += gi * sigmoid(self.val(*a)),
                Op::Min(a, b) => {
                    if self.val(*a) <= self.val(*b) {
                        g[*a] += gi;
                    } else {
                        g[*b] += gi;
                    }
                }
                Op::Max(a, b) => {
                    if self.val(*a) >= self.val(*b) {
                        g[*a] += gi;
                    } else {
                        g[*b] += gi;
                    }
                }
                Op::Clip(a, lo, hi) => {
                    let x = self.val(*a);
                    if x >= *lo && x <= *hi {
                        g[*a] += gi;
                    }
                }
                Op::Scale(a, c) => g[*a] += gi * c,
                Op::Square(a) => g[*a] += gi * 2.0 * self.val(*a),
                Op::Sum(xs) => {
                    for x in xs {
                        g[*x] += gi;
                    }
                }
                Op::LogSumExp(xs) => {
                    if v.is_finite() {
                        for x in xs {
                            g[*x] += gi * (self.val(*x) - v).exp();
                        }
                    }
                }
            }
        }
        Gradients(g)
    }
}

#[derive(Debug, Clone)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.0[v.0]
    }

    pub fn wrt_all(&self, vs: &[Var]) -> Vec<f64> {
        vs.iter().map(|v| self.0[v.0]).collect()
    }
}
