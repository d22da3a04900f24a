//! Style-based progressive generator.
//!
//! A mapping network turns a latent `z` into a style `w`. Synthesis block `k`
//! produces `C` channels at side `4^k`; a 1×1 projection turns the active
//! block into the output map. Weights are stored as unit-variance draws and
//! scaled by `1/sqrt(fan_in)` at run time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamLayout, Tape, Tensor, Var};
use crate::densmat::FeatureMap;
use crate::error::{Error, Result};

pub const MAPPING_LAYERS: usize = 8;
pub const MAX_BLOCKS: usize = 5;
pub const LEAKY_SLOPE: f64 = 0.2;
const UPSAMPLE: usize = 4;
const CONST_SIDE: usize = 4;
const KERNEL: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub latent_dim: usize,
    pub style_dim: usize,
    pub channels: usize,
    /// Number of synthesis blocks, 1..=5.
    pub max_depth: usize,
    pub noise: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            style_dim: 64,
            channels: 8,
            max_depth: MAX_BLOCKS,
            noise: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.style_dim == 0 || self.channels == 0 {
            return Err(Error::Config("generator dimensions must be positive".into()));
        }
        if !(1..=MAX_BLOCKS).contains(&self.max_depth) {
            return Err(Error::BadDepth {
                depth: self.max_depth,
                max: MAX_BLOCKS,
            });
        }
        Ok(())
    }
}

/// Per-pixel noise used by the synthesis blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Noise {
    Off,
    /// Independent standard-normal maps derived from the seed, one per
    /// (block, convolution) so shallower passes reuse the same draws.
    Seeded(u64),
}

impl Noise {
    fn map(self, block: usize, conv: usize, side: usize) -> Option<Vec<f64>> {
        let Noise::Seeded(seed) = self else { return None };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((block * 2 + conv) as u64);
        Some((0..side * side).map(|_| rng.sample(StandardNormal)).collect())
    }
}

#[derive(Clone, Debug)]
struct BlockSlots {
    conv: [(usize, usize); 2],
    noise: [usize; 2],
    style: [(usize, usize); 2],
    to_map: (usize, usize),
}

#[derive(Clone, Debug)]
struct Slots {
    mapping: Vec<(usize, usize)>,
    constant: usize,
    blocks: Vec<BlockSlots>,
}

fn build_layout(cfg: &GeneratorConfig) -> (ParamLayout, Slots) {
    let mut l = ParamLayout::default();
    let c = cfg.channels;
    let mapping = (0..MAPPING_LAYERS)
        .map(|i| {
            let inp = if i == 0 { cfg.latent_dim } else { cfg.style_dim };
            (l.add(vec![cfg.style_dim, inp]), l.add(vec![cfg.style_dim]))
        })
        .collect();
    let constant = l.add(vec![c, CONST_SIDE, CONST_SIDE]);
    let blocks = (0..cfg.max_depth)
        .map(|_| {
            let mut conv = [(0, 0); 2];
            let mut noise = [0; 2];
            let mut style = [(0, 0); 2];
            for k in 0..2 {
                conv[k] = (l.add(vec![c, c, KERNEL, KERNEL]), l.add(vec![c]));
                noise[k] = l.add(vec![c]);
                style[k] = (l.add(vec![2 * c, cfg.style_dim]), l.add(vec![2 * c]));
            }
            let to_map = (l.add(vec![1, c, 1, 1]), l.add(vec![1]));
            BlockSlots { conv, noise, style, to_map }
        })
        .collect();
    (l, Slots { mapping, constant, blocks })
}

#[derive(Clone, Debug)]
pub struct Generator {
    config: GeneratorConfig,
    layout: ParamLayout,
    slots: Slots,
    params: Vec<f64>,
}

impl Generator {
    /// Fresh generator: unit-normal weights and constant, zero biases and
    /// noise strengths, style affines biased to unit scale.
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, slots) = build_layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.total()];
        let mut normal = |idx: usize, params: &mut [f64]| {
            for p in &mut params[layout.slot(idx).range()] {
                *p = rng.sample(StandardNormal);
            }
        };
        for &(w, _) in &slots.mapping {
            normal(w, &mut params);
        }
        normal(slots.constant, &mut params);
        for b in &slots.blocks {
            for k in 0..2 {
                normal(b.conv[k].0, &mut params);
                normal(b.style[k].0, &mut params);
                let bias = layout.slot(b.style[k].1).range();
                params[bias.start..bias.start + config.channels].fill(1.0);
            }
            normal(b.to_map.0, &mut params);
        }
        Ok(Self {
            config,
            layout,
            slots,
            params,
        })
    }

    pub fn from_params(config: GeneratorConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
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

    pub fn config(&self) -> &GeneratorConfig {
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

    fn check_depth(&self, depth: usize, alpha: f64) -> Result<()> {
        if !(1..=self.config.max_depth).contains(&depth) {
            return Err(Error::BadDepth {
                depth,
                max: self.config.max_depth,
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::BadAlpha(alpha));
        }
        Ok(())
    }

    fn check_input(v: &[f64], len: usize, what: &'static str) -> Result<()> {
        if v.len() != len {
            return Err(Error::LengthMismatch { expected: len, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    fn mapping_on_tape(&self, tape: &mut Tape, leaves: &[Var], z: Var) -> Var {
        let mut x = z;
        for (i, &(w, b)) in self.slots.mapping.iter().enumerate() {
            let fan_in = if i == 0 { self.config.latent_dim } else { self.config.style_dim };
            let y = tape.linear(x, leaves[w], leaves[b], 1.0 / (fan_in as f64).sqrt());
            x = tape.leaky_relu(y, LEAKY_SLOPE);
        }
        x
    }

    pub fn map_latent(&self, z: &[f64]) -> Result<Vec<f64>> {
        Self::check_input(z, self.config.latent_dim, "latent")?;
        let mut tape = Tape::new();
        let leaves = self.layout.leaves(&mut tape, &self.params);
        let zv = tape.leaf(Tensor::vector(z.to_vec()));
        let w = self.mapping_on_tape(&mut tape, &leaves, zv);
        Ok(tape.value(w).data().to_vec())
    }

    /// Records blocks `1..=depth` driven by `styles[b]` for block `b`.
    fn synthesis_on_tape(
        &self,
        tape: &mut Tape,
        leaves: &[Var],
        styles: &[Var],
        depth: usize,
        alpha: f64,
        noise: Noise,
    ) -> Var {
        let c = self.config.channels;
        let style_scale = 1.0 / (self.config.style_dim as f64).sqrt();
        let conv_scale = 1.0 / ((c * KERNEL * KERNEL) as f64).sqrt();
        let proj_scale = 1.0 / (c as f64).sqrt();
        let mut feats: Vec<Var> = Vec::with_capacity(depth);
        for (b, slots) in self.slots.blocks.iter().take(depth).enumerate() {
            let side = CONST_SIDE * UPSAMPLE.pow(b as u32);
            let mut x = match feats.last() {
                None => leaves[self.slots.constant],
                Some(&prev) => tape.upsample(prev, UPSAMPLE),
            };
            for k in 0..2 {
                let (w, bias) = slots.conv[k];
                x = tape.conv2d(x, leaves[w], leaves[bias], conv_scale);
                if self.config.noise {
                    if let Some(n) = noise.map(b, k, side) {
                        x = tape.add_noise(x, leaves[slots.noise[k]], n);
                    }
                }
                x = tape.leaky_relu(x, LEAKY_SLOPE);
                let (sw, sb) = slots.style[k];
                let s = tape.linear(styles[b], leaves[sw], leaves[sb], style_scale);
                x = tape.adain(x, s);
            }
            feats.push(x);
        }
        let project = |tape: &mut Tape, b: usize| {
            let (w, bias) = self.slots.blocks[b].to_map;
            tape.conv2d(feats[b], leaves[w], leaves[bias], proj_scale)
        };
        let out = project(tape, depth - 1);
        if depth == 1 || alpha == 1.0 {
            return out;
        }
        let prev = project(tape, depth - 2);
        let prev = tape.upsample(prev, UPSAMPLE);
        tape.lerp(prev, out, alpha)
    }

    fn record(
        &self,
        inputs: &[Vec<f64>],
        through_mapping: bool,
        routing: &[usize],
        depth: usize,
        alpha: f64,
        noise: Noise,
    ) -> Result<GeneratorPass> {
        self.check_depth(depth, alpha)?;
        let len = if through_mapping { self.config.latent_dim } else { self.config.style_dim };
        for v in inputs {
            Self::check_input(v, len, if through_mapping { "latent" } else { "style" })?;
        }
        let mut tape = Tape::new();
        let leaves = self.layout.leaves(&mut tape, &self.params);
        let input_vars: Vec<Var> = inputs.iter().map(|v| tape.leaf(Tensor::vector(v.clone()))).collect();
        let styles: Vec<Var> = if through_mapping {
            input_vars.iter().map(|&z| self.mapping_on_tape(&mut tape, &leaves, z)).collect()
        } else {
            input_vars.clone()
        };
        let per_block: Vec<Var> = routing.iter().map(|&r| styles[r]).collect();
        let output = self.synthesis_on_tape(&mut tape, &leaves, &per_block, depth, alpha, noise);
        let side = tape.value(output).shape()[1];
        let map = FeatureMap::new(side, tape.value(output).data().to_vec())?;
        if map.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generator output"));
        }
        Ok(GeneratorPass {
            tape,
            leaves,
            input_vars,
            output,
            map,
        })
    }

    /// Output map of side `4^depth` for a single style vector.
    pub fn synthesize(&self, w: &[f64], depth: usize, alpha: f64, noise: Noise) -> Result<FeatureMap> {
        Ok(self.record(&[w.to_vec()], false, &vec![0; depth], depth, alpha, noise)?.map)
    }

    /// Output map with an explicit style per block (`styles[b]` drives block `b + 1`).
    pub fn synthesize_styles(&self, styles: &[Vec<f64>], alpha: f64, noise: Noise) -> Result<FeatureMap> {
        let depth = styles.len();
        let routing: Vec<usize> = (0..depth).collect();
        Ok(self.record(styles, false, &routing, depth, alpha, noise)?.map)
    }

    /// Blocks before `crossover` use `map_latent(z1)`, the rest `map_latent(z2)`.
    pub fn style_mix(&self, z1: &[f64], z2: &[f64], crossover: usize, depth: usize, noise: Noise) -> Result<FeatureMap> {
        if !(1..=depth).contains(&crossover) {
            return Err(Error::BadDepth { depth: crossover, max: depth });
        }
        let routing: Vec<usize> = (1..=depth).map(|b| usize::from(b >= crossover)).collect();
        Ok(self.record(&[z1.to_vec(), z2.to_vec()], true, &routing, depth, 1.0, noise)?.map)
    }

    /// Differentiable pass from a latent.
    pub fn forward(&self, z: &[f64], depth: usize, alpha: f64, noise: Noise) -> Result<GeneratorPass> {
        self.record(&[z.to_vec()], true, &vec![0; depth], depth, alpha, noise)
    }

    /// Differentiable pass from a style vector, bypassing the mapping network.
    pub fn forward_style(&self, w: &[f64], depth: usize, alpha: f64, noise: Noise) -> Result<GeneratorPass> {
        self.record(&[w.to_vec()], false, &vec![0; depth], depth, alpha, noise)
    }

    /// Parameter and input gradients for a loss whose gradient with respect
    /// to the output map (row-major) is `grad_map`.
    pub fn backward(&self, pass: &GeneratorPass, grad_map: &[f64]) -> Result<GeneratorGrads> {
        if grad_map.len() != pass.map.data().len() {
            return Err(Error::LengthMismatch {
                expected: pass.map.data().len(),
                found: grad_map.len(),
            });
        }
        if grad_map.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("generator output gradient"));
        }
        let grads = pass.tape.backward(pass.output, grad_map);
        let params = self.layout.gather(&grads, &pass.leaves);
        if params.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("generator gradient"));
        }
        let inputs = pass
            .input_vars
            .iter()
            .map(|&v| grads.or_zeros(v, pass.tape.value(v).len()))
            .collect();
        Ok(GeneratorGrads { params, inputs })
    }
}

/// One recorded forward pass.
#[derive(Debug)]
pub struct GeneratorPass {
    tape: Tape,
    leaves: Vec<Var>,
    input_vars: Vec<Var>,
    output: Var,
    map: FeatureMap,
}

impl GeneratorPass {
    pub fn output(&self) -> &FeatureMap {
        &self.map
    }

    /// See [`Tape::activation_pattern`].
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.tape.activation_pattern()
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorGrads {
    /// Same layout as [`Generator::params`].
    pub params: Vec<f64>,
    /// One gradient per network input (latent or style).
    pub inputs: Vec<Vec<f64>>,
}

/// Nearest-neighbour ×4 upsampling of a map.
pub fn upsample_map(m: &FeatureMap) -> FeatureMap {
    let side = m.side() * UPSAMPLE;
    FeatureMap::from_fn(side, |i, j| m.get(i / UPSAMPLE, j / UPSAMPLE))
}
