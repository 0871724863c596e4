use std::rc::Rc;
use std::sync::Arc;

use super::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// A fixed real-linear map with its adjoint, e.g. an OFDM synthesis.
pub trait LinearOp: Send + Sync {
    fn in_len(&self) -> usize;
    fn out_len(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn adjoint(&self, y: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

/// Marks an output element of a gather as constant zero.
pub const ZERO: usize = usize::MAX;

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Act(Var, Activation),
    Clamp(Var, Rc<[f64]>),
    Dense { x: Var, w: Var, b: Var },
    Conv2d { x: Var, w: Var, b: Var },
    Gather { x: Var, index: Rc<[usize]> },
    Concat(Vec<Var>),
    Mse(Var, Var),
    PowerNormalize { x: Var, group: usize },
    Linear { x: Var, op: Arc<dyn LinearOp> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Records a forward computation for reverse-mode differentiation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient for `v` (zeros when the loss does not depend on it).
    pub fn get(&self, v: Var) -> Vec<f64> {
        self.grads[v.0].clone().unwrap_or_else(|| vec![0.0; self.lens[v.0]])
    }
}

fn acc(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    fn data(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value.data
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "elementwise shape mismatch");
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor { shape, data }, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = Tensor {
            shape: self.shape(a).to_vec(),
            data: self.data(a).iter().map(|x| c * x).collect(),
        };
        self.push(t, Op::Scale(a, c))
    }

    pub fn activation(&mut self, a: Var, act: Activation) -> Var {
        let f = match act {
            Activation::Relu => |x: f64| x.max(0.0),
            Activation::Tanh => f64::tanh,
        };
        let t = Tensor {
            shape: self.shape(a).to_vec(),
            data: self.data(a).iter().map(|&x| f(x)).collect(),
        };
        self.push(t, Op::Act(a, act))
    }

    /// Symmetric clamp `|x_i| ≤ limit[i mod len]`, e.g. `[a, a]` for both
    /// axes of interleaved complex values.
    pub fn clamp(&mut self, a: Var, limit: Rc<[f64]>) -> Var {
        assert!(!limit.is_empty() && self.value(a).len() % limit.len() == 0, "clamp limit period");
        let data = self
            .data(a)
            .iter()
            .zip(limit.iter().cycle())
            .map(|(x, l)| x.clamp(-l, *l))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor { shape, data }, Op::Clamp(a, limit))
    }

    /// `x: [n, in]`, `w: [out, in]`, `b: [out]` → `[n, out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (n, din) = (self.shape(x)[0], self.shape(x)[1]);
        let dout = self.shape(w)[0];
        assert_eq!(self.shape(w), [dout, din], "dense weight shape");
        assert_eq!(self.shape(b), [dout], "dense bias shape");
        let (xd, wd, bd) = (self.data(x), self.data(w), self.data(b));
        let mut out = vec![0.0; n * dout];
        for i in 0..n {
            let xi = &xd[i * din..(i + 1) * din];
            for o in 0..dout {
                let wo = &wd[o * din..(o + 1) * din];
                out[i * dout + o] = bd[o] + xi.iter().zip(wo).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        self.push(Tensor { shape: vec![n, dout], data: out }, Op::Dense { x, w, b })
    }

    /// Same-size 2D convolution with zero padding.
    /// `x: [cin, h, w]`, `w: [cout, cin, kh, kw]` (odd kernel), `b: [cout]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (cin, h, wd) = dims3(self.shape(x));
        let ws = self.shape(w).to_vec();
        assert_eq!(ws.len(), 4, "conv weight must be 4-D");
        let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
        assert_eq!(ws[1], cin, "conv input channels");
        assert!(kh % 2 == 1 && kw % 2 == 1, "conv kernel must be odd");
        assert_eq!(self.shape(b), [cout], "conv bias shape");
        let (xd, wv, bd) = (self.data(x), self.data(w), self.data(b));
        let mut out = vec![0.0; cout * h * wd];
        for co in 0..cout {
            out[co * h * wd..(co + 1) * h * wd].fill(bd[co]);
        }
        conv_loops(cin, h, wd, cout, kh, kw, |co, ci, ky, kx, oy, iy, ox0, ix0, len| {
            let k = wv[((co * cin + ci) * kh + ky) * kw + kx];
            let o = &mut out[(co * h + oy) * wd + ox0..][..len];
            let i = &xd[(ci * h + iy) * wd + ix0..][..len];
            for (a, b) in o.iter_mut().zip(i) {
                *a += k * b;
            }
        });
        self.push(
            Tensor { shape: vec![cout, h, wd], data: out },
            Op::Conv2d { x, w, b },
        )
    }

    /// `out[i] = x[index[i]]`, or 0 where `index[i] == ZERO`.
    pub fn gather(&mut self, x: Var, index: Rc<[usize]>, shape: &[usize]) -> Var {
        assert_eq!(index.len(), shape.iter().product::<usize>(), "gather shape");
        let xd = self.data(x);
        let data = index.iter().map(|&i| if i == ZERO { 0.0 } else { xd[i] }).collect();
        self.push(Tensor { shape: shape.to_vec(), data }, Op::Gather { x, index })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let n = self.value(x).len();
        let index: Rc<[usize]> = (0..n).collect();
        self.gather(x, index, shape)
    }

    /// Flat concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let data: Vec<f64> = parts.iter().flat_map(|&p| self.data(p).iter().copied()).collect();
        self.push(Tensor::vector(data), Op::Concat(parts.to_vec()))
    }

    /// Mean squared difference, a scalar.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).len(), self.value(b).len(), "mse length mismatch");
        let n = self.value(a).len().max(1) as f64;
        let s: f64 = self.data(a).iter().zip(self.data(b)).map(|(x, y)| (x - y).powi(2)).sum();
        self.push(Tensor::scalar(s / n), Op::Mse(a, b))
    }

    /// Rescales each consecutive group of `group` reals (K complex symbols as
    /// 2K reals) to total energy `group / 2`, i.e. unit average symbol power.
    pub fn power_normalize(&mut self, x: Var, group: usize) -> Var {
        assert!(group > 0 && self.value(x).len() % group == 0, "power normalize grouping");
        let c = (group as f64 / 2.0).sqrt();
        let data = self
            .data(x)
            .chunks(group)
            .flat_map(|g| {
                let r = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                g.iter().map(move |v| c * v / r)
            })
            .collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor { shape, data }, Op::PowerNormalize { x, group })
    }

    pub fn linear(&mut self, x: Var, op: Arc<dyn LinearOp>) -> Var {
        assert_eq!(self.value(x).len(), op.in_len(), "linear op input length");
        let data = op.apply(self.data(x));
        assert_eq!(data.len(), op.out_len());
        self.push(Tensor::vector(data), Op::Linear { x, op })
    }

    /// Reverse pass from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss");
        let lens: Vec<usize> = self.nodes.iter().map(|n| n.value.len()).collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(gy) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    add_into(acc(&mut grads[a.0], lens[a.0]), &gy, 1.0);
                    add_into(acc(&mut grads[b.0], lens[b.0]), &gy, 1.0);
                }
                Op::Sub(a, b) => {
                    add_into(acc(&mut grads[a.0], lens[a.0]), &gy, 1.0);
                    add_into(acc(&mut grads[b.0], lens[b.0]), &gy, -1.0);
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    let ga = acc(&mut grads[a.0], lens[a.0]);
                    for ((g, &y), &v) in ga.iter_mut().zip(&gy).zip(bd) {
                        *g += y * v;
                    }
                    let gb = acc(&mut grads[b.0], lens[b.0]);
                    for ((g, &y), &v) in gb.iter_mut().zip(&gy).zip(ad) {
                        *g += y * v;
                    }
                }
                Op::Scale(a, c) => add_into(acc(&mut grads[a.0], lens[a.0]), &gy, *c),
                Op::Clamp(a, limit) => {
                    let xa = self.data(*a);
                    let ga = acc(&mut grads[a.0], lens[a.0]);
                    for ((g, (x, l)), gyi) in ga.iter_mut().zip(xa.iter().zip(limit.iter().cycle())).zip(&gy) {
                        if x.abs() < *l {
                            *g += gyi;
                        }
                    }
                }
                Op::Act(a, act) => {
                    let out = &node.value.data;
                    let xa = self.data(*a);
                    let ga = acc(&mut grads[a.0], lens[a.0]);
                    for i in 0..gy.len() {
                        ga[i] += gy[i]
                            * match act {
                                Activation::Relu => (xa[i] > 0.0) as u8 as f64,
                                Activation::Tanh => 1.0 - out[i] * out[i],
                            };
                    }
                }
                Op::Dense { x, w, b } => {
                    let (n, din) = (self.shape(*x)[0], self.shape(*x)[1]);
                    let dout = self.shape(*w)[0];
                    let (xd, wd) = (self.data(*x), self.data(*w));
                    {
                        let gx = acc(&mut grads[x.0], lens[x.0]);
                        for i in 0..n {
                            for o in 0..dout {
                                let g = gy[i * dout + o];
                                if g != 0.0 {
                                    add_into(&mut gx[i * din..(i + 1) * din], &wd[o * din..(o + 1) * din], g);
                                }
                            }
                        }
                    }
                    {
                        let gw = acc(&mut grads[w.0], lens[w.0]);
                        for i in 0..n {
                            for o in 0..dout {
                                let g = gy[i * dout + o];
                                if g != 0.0 {
                                    add_into(&mut gw[o * din..(o + 1) * din], &xd[i * din..(i + 1) * din], g);
                                }
                            }
                        }
                    }
                    let gb = acc(&mut grads[b.0], lens[b.0]);
                    for i in 0..n {
                        add_into(gb, &gy[i * dout..(i + 1) * dout], 1.0);
                    }
                }
                Op::Conv2d { x, w, b } => {
                    let (cin, h, wd) = dims3(self.shape(*x));
                    let ws = self.shape(*w);
                    let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
                    let (xd, wv) = (self.data(*x), self.data(*w));
                    {
                        let gx = acc(&mut grads[x.0], lens[x.0]);
                        conv_loops(cin, h, wd, cout, kh, kw, |co, ci, ky, kx, oy, iy, ox0, ix0, len| {
                            let k = wv[((co * cin + ci) * kh + ky) * kw + kx];
                            let g = &gy[(co * h + oy) * wd + ox0..][..len];
                            let t = &mut gx[(ci * h + iy) * wd + ix0..][..len];
                            for (a, b) in t.iter_mut().zip(g) {
                                *a += k * b;
                            }
                        });
                    }
                    {
                        let gw = acc(&mut grads[w.0], lens[w.0]);
                        conv_loops(cin, h, wd, cout, kh, kw, |co, ci, ky, kx, oy, iy, ox0, ix0, len| {
                            let g = &gy[(co * h + oy) * wd + ox0..][..len];
                            let i = &xd[(ci * h + iy) * wd + ix0..][..len];
                            gw[((co * cin + ci) * kh + ky) * kw + kx] +=
                                g.iter().zip(i).map(|(a, b)| a * b).sum::<f64>();
                        });
                    }
                    let gb = acc(&mut grads[b.0], lens[b.0]);
                    for co in 0..cout {
                        gb[co] += gy[co * h * wd..(co + 1) * h * wd].iter().sum::<f64>();
                    }
                }
                Op::Gather { x, index } => {
                    let gx = acc(&mut grads[x.0], lens[x.0]);
                    for (&i, &g) in index.iter().zip(&gy) {
                        if i != ZERO {
                            gx[i] += g;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = lens[p.0];
                        add_into(acc(&mut grads[p.0], n), &gy[off..off + n], 1.0);
                        off += n;
                    }
                }
                Op::Mse(a, b) => {
                    let n = lens[a.0].max(1) as f64;
                    let diff: Vec<f64> = self
                        .data(*a)
                        .iter()
                        .zip(self.data(*b))
                        .map(|(x, y)| 2.0 * (x - y) / n * gy[0])
                        .collect();
                    add_into(acc(&mut grads[a.0], lens[a.0]), &diff, 1.0);
                    add_into(acc(&mut grads[b.0], lens[b.0]), &diff, -1.0);
                }
                Op::PowerNormalize { x, group } => {
                    let c = (*group as f64 / 2.0).sqrt();
                    let xd = self.data(*x);
                    let gx = acc(&mut grads[x.0], lens[x.0]);
                    for (start, (xg, gg)) in xd.chunks(*group).zip(gy.chunks(*group)).enumerate() {
                        let r2 = xg.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
                        let r = r2.sqrt();
                        let dot: f64 = xg.iter().zip(gg).map(|(a, b)| a * b).sum();
                        let base = start * group;
                        for j in 0..*group {
                            gx[base + j] += c / r * (gg[j] - xg[j] * dot / r2);
                        }
                    }
                }
                Op::Linear { x, op } => {
                    let back = op.adjoint(&gy);
                    add_into(acc(&mut grads[x.0], lens[x.0]), &back, 1.0);
                }
            }
            grads[id] = Some(gy);
        }
        Gradients { grads, lens }
    }
}

fn add_into(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

fn dims3(s: &[usize]) -> (usize, usize, usize) {
    assert_eq!(s.len(), 3, "expected [channels, height, width], got {s:?}");
    (s[0], s[1], s[2])
}

/// Visits every (output row, input row) pair of a same-padded convolution
/// with the contiguous column span where the kernel tap lands in bounds.
#[allow(clippy::too_many_arguments)]
fn conv_loops(
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    mut f: impl FnMut(usize, usize, usize, usize, usize, usize, usize, usize, usize),
) {
    let (ph, pw) = (kh / 2, kw / 2);
    for co in 0..cout {
        for ci in 0..cin {
            for ky in 0..kh {
                for kx in 0..kw {
                    // Output column ox reads input column ox + kx - pw.
                    let ox0 = pw.saturating_sub(kx);
                    let ox1 = (w + pw).saturating_sub(kx).min(w);
                    if ox0 >= ox1 {
                        continue;
                    }
                    let ix0 = ox0 + kx - pw;
                    for oy in 0..h {
                        let iy = oy + ky;
                        if iy < ph || iy - ph >= h {
                            continue;
                        }
                        f(co, ci, ky, kx, oy, iy - ph, ox0, ix0, ox1 - ox0);
                    }
                }
            }
        }
    }
}
