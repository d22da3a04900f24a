//! Desk-scale convolutional baseline with progressive growth.
//!
//! Input is the real part of the state at side `4^depth`. Each block above
//! depth 1 runs conv, leaky, conv, leaky and a ×4 average pool. The final block
//! runs conv, leaky, then two linear layers down to one score. A 1×1
//! `from_map` projection feeds whichever block is newest; during fade-in the
//! pooled input through the previous `from_map` is blended in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamLayout, Tape, Tensor, Var};
use crate::densmat::FeatureMap;
use crate::error::{Error, Result};
use crate::generator::{LEAKY_SLOPE, MAX_BLOCKS};

const KERNEL: usize = 3;
const POOL: usize = 4;
const FINAL_SIDE: usize = 4;
/// Step for the finite-difference Hessian-vector product in the penalty gradient.
const PENALTY_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub channels: usize,
    pub max_depth: usize,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            max_depth: MAX_BLOCKS,
        }
    }
}

#[derive(Clone, Debug)]
struct Slots {
    /// `from_map[d − 1]` feeds depth `d`.
    from_map: Vec<(usize, usize)>,
    /// `blocks[d − 2]` is the shrinking block entered at depth `d ≥ 2`.
    blocks: Vec<[(usize, usize); 2]>,
    final_conv: (usize, usize),
    hidden: (usize, usize),
    out: (usize, usize),
}

fn build_layout(cfg: &ClassicalConfig) -> (ParamLayout, Slots) {
    let mut l = ParamLayout::default();
    let c = cfg.channels;
    let from_map = (0..cfg.max_depth).map(|_| (l.add(vec![c, 1, 1, 1]), l.add(vec![c]))).collect();
    let conv = |l: &mut ParamLayout| (l.add(vec![c, c, KERNEL, KERNEL]), l.add(vec![c]));
    let blocks = (1..cfg.max_depth).map(|_| [conv(&mut l), conv(&mut l)]).collect();
    let final_conv = conv(&mut l);
    let hidden = (l.add(vec![c, c * FINAL_SIDE * FINAL_SIDE]), l.add(vec![c]));
    let out = (l.add(vec![1, c]), l.add(vec![1]));
    (
        l,
        Slots {
            from_map,
            blocks,
            final_conv,
            hidden,
            out,
        },
    )
}

/// Parameter count of the baseline grown to `max_depth` blocks.
pub fn classical_param_count(cfg: &ClassicalConfig) -> usize {
    build_layout(cfg).0.total()
}

#[derive(Clone, Debug)]
pub struct ClassicalDiscriminator {
    config: ClassicalConfig,
    layout: ParamLayout,
    slots: Slots,
    params: Vec<f64>,
}

struct Pass {
    tape: Tape,
    leaves: Vec<Var>,
    input: Var,
    score: Var,
}

impl ClassicalDiscriminator {
    /// Unit-normal weights, zero biases.
    pub fn new(config: ClassicalConfig, seed: u64) -> Result<Self> {
        let (layout, slots) = build_layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.total()];
        let mut weights: Vec<usize> = slots.from_map.iter().map(|s| s.0).collect();
        weights.extend(slots.blocks.iter().flat_map(|b| [b[0].0, b[1].0]));
        weights.extend([slots.final_conv.0, slots.hidden.0, slots.out.0]);
        for w in weights {
            for p in &mut params[layout.slot(w).range()] {
                *p = rng.sample(StandardNormal);
            }
        }
        Self::from_params(config, params)
    }

    pub fn from_params(config: ClassicalConfig, params: Vec<f64>) -> Result<Self> {
        if config.channels == 0 || !(1..=MAX_BLOCKS).contains(&config.max_depth) {
            return Err(Error::Config(format!("invalid classical discriminator config {config:?}")));
        }
        let (layout, slots) = build_layout(&config);
        if params.len() != layout.total() {
            return Err(Error::LengthMismatch {
                expected: layout.total(),
                found: params.len(),
            });
        }
        Ok(Self {
            config,
            layout,
            slots,
            params,
        })
    }

    pub fn config(&self) -> &ClassicalConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.total()
    }

    fn check(&self, map: &FeatureMap, depth: usize, alpha: f64) -> Result<()> {
        if !(1..=self.config.max_depth).contains(&depth) {
            return Err(Error::BadDepth {
                depth,
                max: self.config.max_depth,
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::BadAlpha(alpha));
        }
        let side = FINAL_SIDE.pow(depth as u32);
        if map.side() != side {
            return Err(Error::DimMismatch {
                expected: side,
                found: map.side(),
            });
        }
        if map.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("discriminator input"));
        }
        Ok(())
    }

    fn record(&self, map: &FeatureMap, depth: usize, alpha: f64) -> Result<Pass> {
        self.check(map, depth, alpha)?;
        let c = self.config.channels;
        let conv_scale = 1.0 / ((c * KERNEL * KERNEL) as f64).sqrt();
        let mut tape = Tape::new();
        let leaves = self.layout.leaves(&mut tape, &self.params);
        let side = map.side();
        let input = tape.leaf(Tensor::new(vec![1, side, side], map.data().to_vec()));
        let from_map = |tape: &mut Tape, x: Var, d: usize| {
            let (w, b) = self.slots.from_map[d - 1];
            let y = tape.conv2d(x, leaves[w], leaves[b], 1.0);
            tape.leaky_relu(y, LEAKY_SLOPE)
        };
        let mut x = from_map(&mut tape, input, depth);
        for d in (2..=depth).rev() {
            for &(w, b) in &self.slots.blocks[d - 2] {
                let y = tape.conv2d(x, leaves[w], leaves[b], conv_scale);
                x = tape.leaky_relu(y, LEAKY_SLOPE);
            }
            x = tape.avg_pool(x, POOL);
            if d == depth && alpha < 1.0 {
                let pooled = tape.avg_pool(input, POOL);
                let skip = from_map(&mut tape, pooled, d - 1);
                x = tape.lerp(skip, x, alpha);
            }
        }
        let (w, b) = self.slots.final_conv;
        let y = tape.conv2d(x, leaves[w], leaves[b], conv_scale);
        let y = tape.leaky_relu(y, LEAKY_SLOPE);
        let flat = tape.reshape(y, vec![c * FINAL_SIDE * FINAL_SIDE]);
        let (w, b) = self.slots.hidden;
        let h = tape.linear(flat, leaves[w], leaves[b], 1.0 / ((c * FINAL_SIDE * FINAL_SIDE) as f64).sqrt());
        let h = tape.leaky_relu(h, LEAKY_SLOPE);
        let (w, b) = self.slots.out;
        let score = tape.linear(h, leaves[w], leaves[b], 1.0 / (c as f64).sqrt());
        if !tape.value(score).data()[0].is_finite() {
            return Err(Error::NonFinite("discriminator score"));
        }
        Ok(Pass {
            tape,
            leaves,
            input,
            score,
        })
    }

    pub fn score(&self, map: &FeatureMap, depth: usize, alpha: f64) -> Result<f64> {
        let pass = self.record(map, depth, alpha)?;
        Ok(pass.tape.value(pass.score).data()[0])
    }

    /// Score, parameter gradient and input-map gradient.
    pub fn score_with_grad(&self, map: &FeatureMap, depth: usize, alpha: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let pass = self.record(map, depth, alpha)?;
        let grads = pass.tape.backward(pass.score, &[1.0]);
        let params = self.layout.gather(&grads, &pass.leaves);
        let input = grads.or_zeros(pass.input, map.data().len());
        if params.iter().chain(&input).any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("discriminator gradient"));
        }
        Ok((pass.tape.value(pass.score).data()[0], params, input))
    }

    /// Squared input-gradient norm `‖∇ₓD‖²` and the parameter gradient of
    /// `(γ/2)‖∇ₓD‖²`. The second derivative is a central difference of
    /// parameter gradients along the input gradient direction.
    pub fn penalty_grad(&self, map: &FeatureMap, depth: usize, alpha: f64, gamma: f64) -> Result<(f64, Vec<f64>)> {
        let (_, _, gx) = self.score_with_grad(map, depth, alpha)?;
        let sqnorm: f64 = gx.iter().map(|g| g * g).sum();
        let norm = sqnorm.sqrt();
        if norm == 0.0 || gamma == 0.0 {
            return Ok((sqnorm, vec![0.0; self.param_count()]));
        }
        let shifted = |sign: f64| -> Result<Vec<f64>> {
            let data = map
                .data()
                .iter()
                .zip(&gx)
                .map(|(x, g)| x + sign * PENALTY_STEP * g / norm)
                .collect();
            Ok(self.score_with_grad(&FeatureMap::new(map.side(), data)?, depth, alpha)?.1)
        };
        let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
        let k = gamma * norm / (2.0 * PENALTY_STEP);
        Ok((sqnorm, plus.iter().zip(&minus).map(|(p, m)| k * (p - m)).collect()))
    }
}
