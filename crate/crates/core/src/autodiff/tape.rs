use super::tensor::{gemm_nn, gemm_nt, gemm_tn};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Pow(Var, f64),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Sum(Var),
    MixModels(Var, Var),
    ConcatCols(Var, Var),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a computation graph during a forward pass.
pub struct Tape<'s> {
    store: Option<&'s ParamStore>,
    param_vars: Vec<Option<Var>>,
    nodes: Vec<Node>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Tape::new()
    }
}

impl<'s> Tape<'s> {
    pub fn new() -> Self {
        Tape {
            store: None,
            param_vars: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn with_params(store: &'s ParamStore) -> Self {
        Tape {
            store: Some(store),
            param_vars: vec![None; store.len()],
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// A tracked input: gradients flow into it.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An untracked input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// The tracked leaf for a stored parameter, created on first use.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let store = self.store.expect("tape has no parameter store");
        let v = self.leaf(store.get(id).clone());
        self.param_vars[id.0] = Some(v);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::dim(op, sa, sb));
        }
        Ok(())
    }

    fn matrix_dims(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        match *self.shape(v) {
            [r, c] => Ok((r, c)),
            ref s => Err(Error::dim(op, s, &[0, 0])),
        }
    }

    /// `a[P×Q] · b[Q×R]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (p, q) = self.matrix_dims("matmul", a)?;
        let (q2, r) = self.matrix_dims("matmul", b)?;
        if q != q2 {
            return Err(Error::dim("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; p * r];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, p, q, r);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![p, r], out)?, Op::MatMul(a, b), rg))
    }

    /// `a[P×Q] · b[R×Q]ᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (p, q) = self.matrix_dims("matmul_t", a)?;
        let (r, q2) = self.matrix_dims("matmul_t", b)?;
        if q != q2 {
            return Err(Error::dim("matmul_t", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; p * r];
        gemm_nt(self.value(a).data(), self.value(b).data(), &mut out, p, q, r);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![p, r], out)?, Op::MatMulT(a, b), rg))
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(name, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(self.shape(a).to_vec(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
            .expect("shape preserved")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    /// Adds the vector `bias[K]` to every row of `x[...×K]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let k = self.value(x).last_dim();
        if self.shape(bias) != [k] {
            return Err(Error::dim("add_bias", self.shape(x), self.shape(bias)));
        }
        let b = self.value(bias).data().to_vec();
        let xt = self.value(x);
        let data = xt
            .data()
            .chunks(k)
            .flat_map(|row| row.iter().zip(&b).map(|(v, bv)| v + bv))
            .collect();
        let t = Tensor::new(xt.shape().to_vec(), data)?;
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(t, Op::AddBias(x, bias), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.affine(x, s, 0.0)
    }

    /// `s·x + c` elementwise.
    pub fn affine(&mut self, x: Var, s: f64, c: f64) -> Var {
        let t = self.map(x, |v| s * v + c);
        let rg = self.rg(x);
        self.push(t, Op::Affine(x, s), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.map(x, |v| v.max(0.0));
        let rg = self.rg(x);
        self.push(t, Op::Relu(x), rg)
    }

    /// Smallest `|x|` fed to any recorded relu, or infinity if there is none.
    /// Finite differences are only meaningful when this exceeds the step.
    pub fn relu_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(self.nodes[x.0].value.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let t = self.map(x, f64::exp);
        let rg = self.rg(x);
        self.push(t, Op::Exp(x), rg)
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).data().iter().find(|&&v| v.is_nan() || v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                reason: format!("non-positive input {bad}"),
            });
        }
        let t = self.map(x, f64::ln);
        let rg = self.rg(x);
        Ok(self.push(t, Op::Log(x), rg))
    }

    /// `x^e` for `x ≥ 0`.
    pub fn pow(&mut self, x: Var, e: f64) -> Result<Var> {
        if let Some(bad) = self.value(x).data().iter().find(|&&v| v.is_nan() || v < 0.0) {
            return Err(Error::Domain {
                op: "pow",
                reason: format!("negative base {bad}"),
            });
        }
        let t = self.map(x, |v| v.powf(e));
        let rg = self.rg(x);
        Ok(self.push(t, Op::Pow(x, e), rg))
    }

    /// Softmax over the last axis, with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let mut data = t.data().to_vec();
        for row in data.chunks_mut(t.last_dim()) {
            softmax_in_place(row);
        }
        let t = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        let rg = self.rg(x);
        self.push(t, Op::Softmax(x), rg)
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let mut data = t.data().to_vec();
        for row in data.chunks_mut(t.last_dim()) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let t = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        let rg = self.rg(x);
        self.push(t, Op::LogSoftmax(x), rg)
    }

    /// Per-row `(x − mean)/sqrt(var + eps)·gamma + beta` with population variance.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let k = self.value(x).last_dim();
        if self.shape(gamma) != [k] || self.shape(beta) != [k] {
            return Err(Error::dim("layer_norm", self.shape(x), self.shape(gamma)));
        }
        let g = self.value(gamma).data().to_vec();
        let b = self.value(beta).data().to_vec();
        let xt = self.value(x);
        let rows = xt.rows();
        let mut xhat = Vec::with_capacity(xt.len());
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(xt.len());
        for row in xt.data().chunks(k) {
            let mean = row.iter().sum::<f64>() / k as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (j, v) in row.iter().enumerate() {
                let h = (v - mean) * is;
                xhat.push(h);
                out.push(h * g[j] + b[j]);
            }
        }
        let t = Tensor::new(xt.shape().to_vec(), out)?;
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            t,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// `out[b, c] = Σ_m w[b, m] · s[b, m, c]` for `w[B×M]`, `s[B×M×C]`.
    pub fn mix_models(&mut self, w: Var, s: Var) -> Result<Var> {
        let (bw, m) = self.matrix_dims("mix_models", w)?;
        let (b, m2, c) = match *self.shape(s) {
            [b, m, c] => (b, m, c),
            ref sh => return Err(Error::dim("mix_models", self.shape(w), sh)),
        };
        if b != bw || m != m2 {
            return Err(Error::dim("mix_models", self.shape(w), self.shape(s)));
        }
        let wd = self.value(w).data();
        let sd = self.value(s).data();
        let mut out = vec![0.0; b * c];
        for bi in 0..b {
            for mi in 0..m {
                let wv = wd[bi * m + mi];
                let srow = &sd[(bi * m + mi) * c..(bi * m + mi + 1) * c];
                for (o, sv) in out[bi * c..(bi + 1) * c].iter_mut().zip(srow) {
                    *o += wv * sv;
                }
            }
        }
        let rg = self.rg(w) || self.rg(s);
        Ok(self.push(Tensor::new(vec![b, c], out)?, Op::MixModels(w, s), rg))
    }

    /// Row-wise concatenation of `a[B×K1]` and `b[B×K2]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ka) = self.matrix_dims("concat_cols", a)?;
        let (rb, kb) = self.matrix_dims("concat_cols", b)?;
        if ra != rb {
            return Err(Error::dim("concat_cols", self.shape(a), self.shape(b)));
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(ra * (ka + kb));
        for i in 0..ra {
            out.extend_from_slice(&ad[i * ka..(i + 1) * ka]);
            out.extend_from_slice(&bd[i * kb..(i + 1) * kb]);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![ra, ka + kb], out)?, Op::ConcatCols(a, b), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    /// Reverse pass from the one-element node `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::dim("backward", self.shape(loss), &[1]));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }

        let params = self
            .param_vars
            .iter()
            .map(|v| v.and_then(|v| grads[v.0].clone()))
            .collect();
        Ok(Gradients { grads, params })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.rg(v) {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(slot);
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = node.value.data();
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (p, q) = dims2(&self.nodes[a.0].value);
                let r = self.nodes[b.0].value.last_dim();
                let (ad, bd) = (self.value(a).data(), self.value(b).data());
                self.accumulate(grads, a, |ga| gemm_nt(g, bd, ga, p, r, q));
                self.accumulate(grads, b, |gb| gemm_tn(ad, g, gb, p, q, r));
            }
            Op::MatMulT(a, b) => {
                let (p, q) = dims2(&self.nodes[a.0].value);
                let r = self.nodes[b.0].value.rows();
                let (ad, bd) = (self.value(a).data(), self.value(b).data());
                self.accumulate(grads, a, |ga| gemm_nn(g, bd, ga, p, r, q));
                self.accumulate(grads, b, |gb| gemm_tn(g, ad, gb, p, r, q));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, a, |ga| axpy(ga, g, 1.0));
                self.accumulate(grads, b, |gb| axpy(gb, g, 1.0));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, |ga| axpy(ga, g, 1.0));
                self.accumulate(grads, b, |gb| axpy(gb, g, -1.0));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(a).data(), self.value(b).data());
                self.accumulate(grads, a, |ga| {
                    ga.iter_mut().zip(g).zip(bd).for_each(|((x, gv), bv)| *x += gv * bv)
                });
                self.accumulate(grads, b, |gb| {
                    gb.iter_mut().zip(g).zip(ad).for_each(|((x, gv), av)| *x += gv * av)
                });
            }
            Op::AddBias(x, bias) => {
                let k = node.value.last_dim();
                self.accumulate(grads, x, |gx| axpy(gx, g, 1.0));
                self.accumulate(grads, bias, |gb| {
                    for row in g.chunks(k) {
                        axpy(gb, row, 1.0);
                    }
                });
            }
            Op::Affine(x, s) => self.accumulate(grads, x, |gx| axpy(gx, g, s)),
            Op::Relu(x) => {
                let xd = self.value(x).data();
                self.accumulate(grads, x, |gx| {
                    for ((o, gv), xv) in gx.iter_mut().zip(g).zip(xd) {
                        if *xv > 0.0 {
                            *o += gv;
                        }
                    }
                });
            }
            Op::Exp(x) => self.accumulate(grads, x, |gx| {
                gx.iter_mut().zip(g).zip(out).for_each(|((o, gv), y)| *o += gv * y)
            }),
            Op::Log(x) => {
                let xd = self.value(x).data();
                self.accumulate(grads, x, |gx| {
                    gx.iter_mut().zip(g).zip(xd).for_each(|((o, gv), xv)| *o += gv / xv)
                });
            }
            Op::Pow(x, e) => {
                let xd = self.value(x).data();
                self.accumulate(grads, x, |gx| {
                    if e == 0.0 {
                        return;
                    }
                    for ((o, gv), xv) in gx.iter_mut().zip(g).zip(xd) {
                        *o += gv * e * xv.powf(e - 1.0);
                    }
                });
            }
            Op::Softmax(x) => {
                let k = node.value.last_dim();
                self.accumulate(grads, x, |gx| {
                    for ((gr, yr), or) in g.chunks(k).zip(out.chunks(k)).zip(gx.chunks_mut(k)) {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for ((o, gv), y) in or.iter_mut().zip(gr).zip(yr) {
                            *o += y * (gv - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(x) => {
                let k = node.value.last_dim();
                self.accumulate(grads, x, |gx| {
                    for ((gr, lr), or) in g.chunks(k).zip(out.chunks(k)).zip(gx.chunks_mut(k)) {
                        let gsum: f64 = gr.iter().sum();
                        for ((o, gv), l) in or.iter_mut().zip(gr).zip(lr) {
                            *o += gv - l.exp() * gsum;
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                ref xhat,
                ref inv_std,
            } => {
                let k = node.value.last_dim();
                let gd = self.value(gamma).data();
                self.accumulate(grads, gamma, |gg| {
                    for (gr, hr) in g.chunks(k).zip(xhat.chunks(k)) {
                        gg.iter_mut().zip(gr).zip(hr).for_each(|((o, gv), h)| *o += gv * h);
                    }
                });
                self.accumulate(grads, beta, |gb| {
                    for gr in g.chunks(k) {
                        axpy(gb, gr, 1.0);
                    }
                });
                self.accumulate(grads, x, |gx| {
                    let kf = k as f64;
                    for (((gr, hr), or), is) in g
                        .chunks(k)
                        .zip(xhat.chunks(k))
                        .zip(gx.chunks_mut(k))
                        .zip(inv_std)
                    {
                        // dxhat = g·gamma; dx = is/k · (k·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for j in 0..k {
                            let d = gr[j] * gd[j];
                            s1 += d;
                            s2 += d * hr[j];
                        }
                        for j in 0..k {
                            let d = gr[j] * gd[j];
                            or[j] += is / kf * (kf * d - s1 - hr[j] * s2);
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let gv = g[0];
                self.accumulate(grads, x, |gx| gx.iter_mut().for_each(|o| *o += gv));
            }
            Op::MixModels(w, s) => {
                let (b, m, c) = match *self.shape(s) {
                    [b, m, c] => (b, m, c),
                    _ => unreachable!("checked in forward"),
                };
                let (wd, sd) = (self.value(w).data(), self.value(s).data());
                self.accumulate(grads, w, |gw| {
                    for bi in 0..b {
                        let gr = &g[bi * c..(bi + 1) * c];
                        for mi in 0..m {
                            let sr = &sd[(bi * m + mi) * c..(bi * m + mi + 1) * c];
                            gw[bi * m + mi] += gr.iter().zip(sr).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                self.accumulate(grads, s, |gs| {
                    for bi in 0..b {
                        let gr = &g[bi * c..(bi + 1) * c];
                        for mi in 0..m {
                            let wv = wd[bi * m + mi];
                            axpy(&mut gs[(bi * m + mi) * c..(bi * m + mi + 1) * c], gr, wv);
                        }
                    }
                });
            }
            Op::ConcatCols(a, b) => {
                let ka = self.value(a).last_dim();
                let kb = self.value(b).last_dim();
                self.accumulate(grads, a, |ga| {
                    for (o, gr) in ga.chunks_mut(ka).zip(g.chunks(ka + kb)) {
                        axpy(o, &gr[..ka], 1.0);
                    }
                });
                self.accumulate(grads, b, |gb| {
                    for (o, gr) in gb.chunks_mut(kb).zip(g.chunks(ka + kb)) {
                        axpy(o, &gr[ka..], 1.0);
                    }
                });
            }
            Op::Reshape(x) => self.accumulate(grads, x, |gx| axpy(gx, g, 1.0)),
        }
    }
}

fn dims2(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.last_dim())
}

fn axpy(y: &mut [f64], x: &[f64], a: f64) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if it was reached.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient for a stored parameter; `None` if the parameter was unused.
    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params.get(id.0).and_then(|g| g.as_deref())
    }

    /// Per-parameter gradients in store order, zero-filled for unused parameters.
    pub fn dense_params(&self, store: &ParamStore) -> Vec<Vec<f64>> {
        store
            .ids()
            .map(|id| {
                self.param(id)
                    .map_or_else(|| vec![0.0; store.get(id).len()], <[f64]>::to_vec)
            })
            .collect()
    }
}
