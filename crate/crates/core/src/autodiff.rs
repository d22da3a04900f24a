//! Minimal reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation of one forward pass. [`Tape::backward`]
//! seeds the gradient of any recorded node and walks the tape in reverse.
//! Images are laid out `[channels, height, width]`, weights `[out, in, k, k]`.

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn chw(&self) -> (usize, usize, usize) {
        assert_eq!(self.shape.len(), 3, "expected a [C, H, W] tensor, got {:?}", self.shape);
        (self.shape[0], self.shape[1], self.shape[2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Var, scale: f64 },
    LeakyRelu { x: Var, slope: f64 },
    Conv2d { x: Var, w: Var, b: Var, scale: f64 },
    Noise { x: Var, weight: Var, noise: Vec<f64> },
    AdaIn { x: Var, style: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Upsample { x: Var, factor: usize },
    AvgPool { x: Var, factor: usize },
    Lerp { a: Var, b: Var, alpha: f64 },
    Reshape { x: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Epsilon inside the instance-norm square root.
pub const NORM_EPS: f64 = 1e-8;

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// `y = scale · W x + b` with `W: [out, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var, scale: f64) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (out, inp) = (wv.shape[0], wv.shape[1]);
        assert_eq!(xv.len(), inp);
        assert_eq!(bv.len(), out);
        let data = (0..out)
            .map(|o| {
                let row = &wv.data[o * inp..(o + 1) * inp];
                scale * row.iter().zip(&xv.data).map(|(a, b)| a * b).sum::<f64>() + bv.data[o]
            })
            .collect();
        self.push(Tensor::vector(data), Op::Linear { x, w, b, scale })
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let xv = self.value(x);
        let data = xv.data.iter().map(|&v| if v >= 0.0 { v } else { slope * v }).collect();
        let value = Tensor::new(xv.shape.clone(), data);
        self.push(value, Op::LeakyRelu { x, slope })
    }

    /// Same-padded 2-D convolution with an odd square kernel.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, scale: f64) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (cin, h, wd) = xv.chw();
        let (cout, k) = (wv.shape[0], wv.shape[2]);
        assert_eq!(wv.shape[1], cin);
        assert_eq!(bv.len(), cout);
        let pad = k / 2;
        let mut out = vec![0.0; cout * h * wd];
        for o in 0..cout {
            let dst = &mut out[o * h * wd..(o + 1) * h * wd];
            for c in 0..cin {
                let src = &xv.data[c * h * wd..(c + 1) * h * wd];
                for di in 0..k {
                    for dj in 0..k {
                        let wgt = scale * wv.data[((o * cin + c) * k + di) * k + dj];
                        conv_tap(dst, src, h, wd, di as isize - pad as isize, dj as isize - pad as isize, wgt);
                    }
                }
            }
            let bias = bv.data[o];
            dst.iter_mut().for_each(|v| *v += bias);
        }
        self.push(Tensor::new(vec![cout, h, wd], out), Op::Conv2d { x, w, b, scale })
    }

    /// Adds `weight[c] · noise[i, j]` to every channel.
    pub fn add_noise(&mut self, x: Var, weight: Var, noise: Vec<f64>) -> Var {
        let (xv, wv) = (self.value(x), self.value(weight));
        let (c, h, wd) = xv.chw();
        assert_eq!(noise.len(), h * wd);
        assert_eq!(wv.len(), c);
        let mut data = xv.data.clone();
        for ch in 0..c {
            let s = wv.data[ch];
            for (d, n) in data[ch * h * wd..(ch + 1) * h * wd].iter_mut().zip(&noise) {
                *d += s * n;
            }
        }
        let value = Tensor::new(xv.shape.clone(), data);
        self.push(value, Op::Noise { x, weight, noise })
    }

    /// Adaptive instance normalization. `style` holds `C` scales followed by `C` biases.
    pub fn adain(&mut self, x: Var, style: Var) -> Var {
        let (xv, sv) = (self.value(x), self.value(style));
        let (c, h, wd) = xv.chw();
        assert_eq!(sv.len(), 2 * c);
        let hw = (h * wd) as f64;
        let mut xhat = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; c];
        let mut out = vec![0.0; xv.len()];
        for ch in 0..c {
            let r = ch * h * wd..(ch + 1) * h * wd;
            let src = &xv.data[r.clone()];
            let mean = src.iter().sum::<f64>() / hw;
            let var = src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / hw;
            let is = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[ch] = is;
            let (scale, bias) = (sv.data[ch], sv.data[c + ch]);
            for ((xh, o), v) in xhat[r.clone()].iter_mut().zip(&mut out[r]).zip(src) {
                *xh = (v - mean) * is;
                *o = scale * *xh + bias;
            }
        }
        let value = Tensor::new(xv.shape.clone(), out);
        self.push(value, Op::AdaIn { x, style, xhat, inv_std })
    }

    /// Nearest-neighbour upsampling by `factor` along both spatial axes.
    pub fn upsample(&mut self, x: Var, factor: usize) -> Var {
        let xv = self.value(x);
        let (c, h, wd) = xv.chw();
        let (oh, ow) = (h * factor, wd * factor);
        let mut out = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    out[(ch * oh + i) * ow + j] = xv.data[(ch * h + i / factor) * wd + j / factor];
                }
            }
        }
        self.push(Tensor::new(vec![c, oh, ow], out), Op::Upsample { x, factor })
    }

    /// Mean over non-overlapping `factor × factor` blocks.
    pub fn avg_pool(&mut self, x: Var, factor: usize) -> Var {
        let xv = self.value(x);
        let (c, h, wd) = xv.chw();
        let (oh, ow) = (h / factor, wd / factor);
        let inv = 1.0 / (factor * factor) as f64;
        let mut out = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for i in 0..h {
                for j in 0..wd {
                    out[(ch * oh + i / factor) * ow + j / factor] += xv.data[(ch * h + i) * wd + j] * inv;
                }
            }
        }
        self.push(Tensor::new(vec![c, oh, ow], out), Op::AvgPool { x, factor })
    }

    /// `(1 − alpha) a + alpha b`.
    pub fn lerp(&mut self, a: Var, b: Var, alpha: f64) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape, bv.shape);
        let beta = 1.0 - alpha;
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| beta * x + alpha * y).collect();
        let value = Tensor::new(av.shape.clone(), data);
        self.push(value, Op::Lerp { a, b, alpha })
    }

    /// Sign of every leaky-rectifier input, in recording order. Two passes
    /// with equal patterns lie on the same smooth piece of the network.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if let Op::LeakyRelu { x, .. } = node.op {
                out.extend(self.value(x).data.iter().map(|&v| v >= 0.0));
            }
        }
        out
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Var {
        let value = Tensor::new(shape, self.value(x).data.clone());
        self.push(value, Op::Reshape { x })
    }

    /// Reverse sweep from `output` seeded with `seed` (same length as the output).
    pub fn backward(&self, output: Var, seed: &[f64]) -> Gradients {
        assert_eq!(seed.len(), self.value(output).len(), "seed length");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed.to_vec());
        for idx in (0..=output.0).rev() {
            let Some(gy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Linear { x, w, b, scale } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let inp = wv.shape[1];
                    let mut gx = vec![0.0; inp];
                    let mut gw = vec![0.0; wv.len()];
                    for (o, &g) in gy.iter().enumerate() {
                        let gs = g * scale;
                        let row = &wv.data[o * inp..(o + 1) * inp];
                        for i in 0..inp {
                            gx[i] += gs * row[i];
                            gw[o * inp + i] += gs * xv.data[i];
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                    accumulate(&mut grads, *b, gy.clone());
                }
                Op::LeakyRelu { x, slope } => {
                    let xv = self.value(*x);
                    let gx = gy
                        .iter()
                        .zip(&xv.data)
                        .map(|(g, &v)| if v >= 0.0 { *g } else { slope * g })
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::Conv2d { x, w, b, scale } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (cin, h, wd) = xv.chw();
                    let (cout, k) = (wv.shape[0], wv.shape[2]);
                    let pad = k as isize / 2;
                    let mut gx = vec![0.0; xv.len()];
                    let mut gw = vec![0.0; wv.len()];
                    let mut gb = vec![0.0; cout];
                    for o in 0..cout {
                        let go = &gy[o * h * wd..(o + 1) * h * wd];
                        gb[o] = go.iter().sum();
                        for c in 0..cin {
                            let src = &xv.data[c * h * wd..(c + 1) * h * wd];
                            let gsrc = &mut gx[c * h * wd..(c + 1) * h * wd];
                            for di in 0..k {
                                for dj in 0..k {
                                    let widx = ((o * cin + c) * k + di) * k + dj;
                                    let (oi, oj) = (di as isize - pad, dj as isize - pad);
                                    // input tap x[i+oi, j+oj] feeds output y[i, j]
                                    gw[widx] += scale * conv_dot(go, src, h, wd, oi, oj);
                                    conv_tap_transpose(gsrc, go, h, wd, oi, oj, scale * wv.data[widx]);
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Noise { x, weight, noise } => {
                    let c = self.value(*weight).len();
                    let hw = noise.len();
                    let gw = (0..c)
                        .map(|ch| gy[ch * hw..(ch + 1) * hw].iter().zip(noise).map(|(g, n)| g * n).sum())
                        .collect();
                    accumulate(&mut grads, *weight, gw);
                    accumulate(&mut grads, *x, gy.clone());
                }
                Op::AdaIn { x, style, xhat, inv_std } => {
                    let sv = self.value(*style);
                    let c = inv_std.len();
                    let hw = gy.len() / c;
                    let mut gx = vec![0.0; gy.len()];
                    let mut gs = vec![0.0; 2 * c];
                    for ch in 0..c {
                        let r = ch * hw..(ch + 1) * hw;
                        let (g, xh) = (&gy[r.clone()], &xhat[r.clone()]);
                        gs[ch] = g.iter().zip(xh).map(|(a, b)| a * b).sum();
                        gs[c + ch] = g.iter().sum();
                        let scale = sv.data[ch];
                        let mean_g = scale * gs[c + ch] / hw as f64;
                        let mean_gx = scale * gs[ch] / hw as f64;
                        for ((dst, &gi), &xi) in gx[r].iter_mut().zip(g).zip(xh) {
                            *dst = inv_std[ch] * (scale * gi - mean_g - xi * mean_gx);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *style, gs);
                }
                Op::Upsample { x, factor } => {
                    let xv = self.value(*x);
                    let (c, h, wd) = xv.chw();
                    let (oh, ow) = (h * factor, wd * factor);
                    let mut gx = vec![0.0; xv.len()];
                    for ch in 0..c {
                        for i in 0..oh {
                            for j in 0..ow {
                                gx[(ch * h + i / factor) * wd + j / factor] += gy[(ch * oh + i) * ow + j];
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::AvgPool { x, factor } => {
                    let xv = self.value(*x);
                    let (c, h, wd) = xv.chw();
                    let (oh, ow) = (h / factor, wd / factor);
                    let inv = 1.0 / (factor * factor) as f64;
                    let mut gx = vec![0.0; xv.len()];
                    for ch in 0..c {
                        for i in 0..h {
                            for j in 0..wd {
                                gx[(ch * h + i) * wd + j] = gy[(ch * oh + i / factor) * ow + j / factor] * inv;
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Lerp { a, b, alpha } => {
                    let beta = 1.0 - alpha;
                    accumulate(&mut grads, *a, gy.iter().map(|g| beta * g).collect());
                    accumulate(&mut grads, *b, gy.iter().map(|g| alpha * g).collect());
                }
                Op::Reshape { x } => accumulate(&mut grads, *x, gy.clone()),
            }
            grads[idx] = Some(gy);
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

/// Valid output rows/cols for a tap at offset `off` on an axis of length `n`.
fn tap_range(n: usize, off: isize) -> std::ops::Range<usize> {
    let lo = (-off).max(0) as usize;
    let hi = (n as isize - off).min(n as isize).max(0) as usize;
    lo..hi.max(lo)
}

/// `dst[i, j] += wgt · src[i + oi, j + oj]` over in-bounds positions.
fn conv_tap(dst: &mut [f64], src: &[f64], h: usize, w: usize, oi: isize, oj: isize, wgt: f64) {
    let cols = tap_range(w, oj);
    for i in tap_range(h, oi) {
        let si = (i as isize + oi) as usize;
        let d = &mut dst[i * w + cols.start..i * w + cols.end];
        let s0 = (cols.start as isize + oj) as usize;
        let s = &src[si * w + s0..si * w + s0 + d.len()];
        for (a, b) in d.iter_mut().zip(s) {
            *a += wgt * b;
        }
    }
}

/// `gsrc[i + oi, j + oj] += wgt · go[i, j]`.
fn conv_tap_transpose(gsrc: &mut [f64], go: &[f64], h: usize, w: usize, oi: isize, oj: isize, wgt: f64) {
    let cols = tap_range(w, oj);
    for i in tap_range(h, oi) {
        let si = (i as isize + oi) as usize;
        let s0 = (cols.start as isize + oj) as usize;
        let g = &go[i * w + cols.start..i * w + cols.end];
        let d = &mut gsrc[si * w + s0..si * w + s0 + g.len()];
        for (a, b) in d.iter_mut().zip(g) {
            *a += wgt * b;
        }
    }
}

/// `Σ go[i, j] · src[i + oi, j + oj]`.
fn conv_dot(go: &[f64], src: &[f64], h: usize, w: usize, oi: isize, oj: isize) -> f64 {
    let cols = tap_range(w, oj);
    let mut acc = 0.0;
    for i in tap_range(h, oi) {
        let si = (i as isize + oi) as usize;
        let s0 = (cols.start as isize + oj) as usize;
        let g = &go[i * w + cols.start..i * w + cols.end];
        let s = &src[si * w + s0..si * w + s0 + g.len()];
        acc += g.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
    }
    acc
}

/// Per-node gradients from one reverse sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `v`, or zeros of length `len` if nothing flowed into it.
    pub fn or_zeros(&self, v: Var, len: usize) -> Vec<f64> {
        self.get(v).map_or_else(|| vec![0.0; len], <[f64]>::to_vec)
    }
}

/// Named tensor shapes packed into one flat parameter vector.
#[derive(Clone, Debug, Default)]
pub struct ParamLayout {
    slots: Vec<Slot>,
    total: usize,
}

#[derive(Clone, Debug)]
pub struct Slot {
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl ParamLayout {
    /// Reserves a slot and returns its index.
    pub fn add(&mut self, shape: Vec<usize>) -> usize {
        let slot = Slot { offset: self.total, shape };
        self.total += slot.len();
        self.slots.push(slot);
        self.slots.len() - 1
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn slot(&self, index: usize) -> &Slot {
        &self.slots[index]
    }

    /// Records every slot of `params` as a leaf, in slot order.
    pub fn leaves(&self, tape: &mut Tape, params: &[f64]) -> Vec<Var> {
        assert_eq!(params.len(), self.total);
        self.slots
            .iter()
            .map(|s| tape.leaf(Tensor::new(s.shape.clone(), params[s.range()].to_vec())))
            .collect()
    }

    /// Flattens leaf gradients back into the parameter layout.
    pub fn gather(&self, grads: &Gradients, leaves: &[Var]) -> Vec<f64> {
        let mut out = vec![0.0; self.total];
        for (slot, &v) in self.slots.iter().zip(leaves) {
            if let Some(g) = grads.get(v) {
                out[slot.range()].copy_from_slice(g);
            }
        }
        out
    }
}
