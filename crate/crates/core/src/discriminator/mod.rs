//! Quantum progressive discriminator and its classical baseline.
//!
//! Depth `d` scores states on `2d` qubits. Depth 1 is the 2-qubit head
//! alone; each deeper stage prepends a block that maps `2d` qubits to `2d − 2`
//! via conv, pool, blur, conv, pool and a partial trace of the two
//! highest-index qubits. The head applies conv, pool and dense layers, traces
//! out qubit 1 and returns `⟨Z⟩`.
//!
//! During fade-in the newest block's output is blended with the plain partial
//! trace of the input: `ρ_eff = (1 − α) Tr_high(ρ) + α B(ρ)`.

mod classical;

pub use classical::{classical_param_count, ClassicalConfig, ClassicalDiscriminator};

use std::f64::consts::FRAC_PI_4;
use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::densmat::{
    apply_circuit, evolve, trace_out_high, CMatrix, DensityMatrix, Gate, ParamCircuit, TraceLayout, MAX_QUBITS,
};
use crate::error::{Error, Result};
use crate::qlayers::{blur_backward, blur_forward, blur_layer, circuit_backward, BlurKernel, BlurTrace, LayerSpec};

/// Layers and parameter offsets of one block.
#[derive(Clone, Debug)]
struct Block {
    n_qubits: usize,
    layers: Vec<(LayerSpec, usize)>,
    /// Conv/pool gates before the blur (or all head gates), absolute parameter indices.
    head: Vec<Gate>,
    /// Parameter range of the blur kernel; `None` for the 2-qubit head.
    blur: Option<Range<usize>>,
    tail: Vec<Gate>,
}

impl Block {
    fn new(n_qubits: usize, offset: usize) -> Self {
        let specs = if n_qubits == 2 {
            vec![LayerSpec::conv(2), LayerSpec::pool(2), LayerSpec::dense(2)]
        } else {
            vec![
                LayerSpec::conv(n_qubits),
                LayerSpec::pool(n_qubits),
                LayerSpec::blur(n_qubits),
                LayerSpec::conv(n_qubits),
                LayerSpec::pool(n_qubits),
            ]
        };
        let mut layers = Vec::with_capacity(specs.len());
        let mut at = offset;
        for spec in specs {
            let n = spec.param_count;
            layers.push((spec, at));
            at += n;
        }
        let shifted = |(spec, off): &(LayerSpec, usize)| -> Vec<Gate> {
            spec.gates().into_iter().map(|g| g.offset_param(*off)).collect()
        };
        if n_qubits == 2 {
            return Self {
                n_qubits,
                head: layers.iter().flat_map(shifted).collect(),
                blur: None,
                tail: Vec::new(),
                layers,
            };
        }
        let blur_at = layers[2].1;
        Self {
            n_qubits,
            head: layers[..2].iter().flat_map(shifted).collect(),
            blur: Some(blur_at..blur_at + layers[2].0.param_count),
            tail: layers[3..].iter().flat_map(shifted).collect(),
            layers,
        }
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|(s, _)| s.param_count).sum()
    }
}

/// Trainable parameter count of a discriminator grown to `max_qubits`.
pub fn quantum_param_count(max_qubits: usize) -> usize {
    let mut offset = 0;
    (1..=max_qubits / 2)
        .map(|d| {
            let b = Block::new(2 * d, offset);
            offset += b.param_count();
            b.param_count()
        })
        .sum()
}

#[derive(Clone, Debug)]
struct BlockRecord {
    after_head: CMatrix,
    blur: BlurTrace,
    after_tail: CMatrix,
}

/// Score with gradients for the parameters and, optionally, the input state.
#[derive(Clone, Debug)]
pub struct ScoreGrad {
    pub score: f64,
    pub params: Vec<f64>,
    /// `Ḡ` with `dscore = Re Tr(Ḡ† dρ)`.
    pub input: Option<CMatrix>,
}

#[derive(Clone, Debug)]
pub struct QuantumDiscriminator {
    max_qubits: usize,
    /// `blocks[0]` is the 2-qubit head; `blocks[d − 1]` enters at `2d` qubits.
    blocks: Vec<Block>,
    params: Vec<f64>,
}

impl QuantumDiscriminator {
    /// Parameters drawn uniformly from `[−π/4, π/4]`.
    pub fn new(max_qubits: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = quantum_param_count(Self::check_width(max_qubits)?);
        let params = (0..n).map(|_| rng.random_range(-FRAC_PI_4..=FRAC_PI_4)).collect();
        Self::from_params(max_qubits, params)
    }

    pub fn from_params(max_qubits: usize, params: Vec<f64>) -> Result<Self> {
        Self::check_width(max_qubits)?;
        let mut blocks = Vec::new();
        let mut offset = 0;
        for d in 1..=max_qubits / 2 {
            let b = Block::new(2 * d, offset);
            offset += b.param_count();
            blocks.push(b);
        }
        if params.len() != offset {
            return Err(Error::LengthMismatch {
                expected: offset,
                found: params.len(),
            });
        }
        Ok(Self {
            max_qubits,
            blocks,
            params,
        })
    }

    fn check_width(max_qubits: usize) -> Result<usize> {
        if max_qubits < 2 || max_qubits % 2 != 0 || max_qubits > MAX_QUBITS {
            return Err(Error::BadDimension(format!(
                "discriminator width {max_qubits} must be even and in 2..={MAX_QUBITS}"
            )));
        }
        Ok(max_qubits)
    }

    pub fn max_qubits(&self) -> usize {
        self.max_qubits
    }

    pub fn max_depth(&self) -> usize {
        self.max_qubits / 2
    }

    /// Number of qubits a depth-`depth` discriminator consumes.
    pub fn entry_qubits(depth: usize) -> usize {
        2 * depth
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameters used at depth `depth` (blocks beyond it are idle).
    pub fn active_param_count(&self, depth: usize) -> usize {
        self.blocks[..depth.min(self.blocks.len())].iter().map(Block::param_count).sum()
    }

    fn check_call(&self, rho: &DensityMatrix, depth: usize, alpha: f64) -> Result<()> {
        if !(1..=self.max_depth()).contains(&depth) {
            return Err(Error::BadDepth {
                depth,
                max: self.max_depth(),
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::BadAlpha(alpha));
        }
        let want = 1usize << Self::entry_qubits(depth);
        if rho.dim() != want {
            return Err(Error::DimMismatch {
                expected: want,
                found: rho.dim(),
            });
        }
        Ok(())
    }

    fn block_forward(&self, block: &Block, rho: &CMatrix) -> Result<(CMatrix, BlockRecord)> {
        let mut m = rho.clone();
        evolve(&mut m, &block.head, &self.params);
        let range = block.blur.clone().expect("shrinking block has a blur layer");
        let (mut m2, blur) = blur_forward(&m, &self.params[range])?;
        evolve(&mut m2, &block.tail, &self.params);
        let out = TraceLayout::new(block.n_qubits, &[block.n_qubits - 2, block.n_qubits - 1])?.trace(&m2);
        Ok((
            out,
            BlockRecord {
                after_head: m,
                blur,
                after_tail: m2,
            },
        ))
    }

    fn block_backward(&self, block: &Block, rec: &BlockRecord, grad_out: &CMatrix, grads: &mut [f64]) -> Result<CMatrix> {
        let layout = TraceLayout::new(block.n_qubits, &[block.n_qubits - 2, block.n_qubits - 1])?;
        let g = layout.adjoint(grad_out);
        let g = circuit_backward(&rec.after_tail, &g, &block.tail, &self.params, grads);
        let range = block.blur.clone().expect("shrinking block has a blur layer");
        let g = blur_backward(&rec.blur, &g, &self.params[range.clone()], &mut grads[range]);
        Ok(circuit_backward(&rec.after_head, &g, &block.head, &self.params, grads))
    }

    fn head_forward(&self, rho: &CMatrix) -> Result<(f64, CMatrix)> {
        let mut m = rho.clone();
        evolve(&mut m, &self.blocks[0].head, &self.params);
        let score = m[(0, 0)].re + m[(2, 2)].re - m[(1, 1)].re - m[(3, 3)].re;
        Ok((score, m))
    }

    fn head_backward(&self, after: &CMatrix, grads: &mut [f64]) -> Result<CMatrix> {
        let mut z = CMatrix::zeros(2);
        z[(0, 0)] = Complex64::new(1.0, 0.0);
        z[(1, 1)] = Complex64::new(-1.0, 0.0);
        let g = TraceLayout::new(2, &[1])?.adjoint(&z);
        Ok(circuit_backward(after, &g, &self.blocks[0].head, &self.params, grads))
    }

    /// Score in `[−1, 1]` of a `2·depth`-qubit state.
    pub fn discriminate(&self, rho: &DensityMatrix, depth: usize, alpha: f64) -> Result<f64> {
        Ok(self.evaluate(rho, depth, alpha, false, false)?.score)
    }

    /// Score together with reverse-mode gradients.
    pub fn discriminate_with_grad(&self, rho: &DensityMatrix, depth: usize, alpha: f64, input_grad: bool) -> Result<ScoreGrad> {
        self.evaluate(rho, depth, alpha, true, input_grad)
    }

    fn evaluate(&self, rho: &DensityMatrix, depth: usize, alpha: f64, grads: bool, input_grad: bool) -> Result<ScoreGrad> {
        self.check_call(rho, depth, alpha)?;
        let mut records = Vec::with_capacity(depth);
        let mut state = rho.matrix().clone();
        let mut skip: Option<CMatrix> = None;
        for (stage, d) in (2..=depth).rev().enumerate() {
            let (out, rec) = self.block_forward(&self.blocks[d - 1], &state)?;
            records.push(rec);
            state = if stage == 0 && alpha < 1.0 {
                let traced = trace_out_high(rho, 2)?.into_matrix();
                let mixed = traced.lerp(&out, alpha);
                skip = Some(traced);
                mixed
            } else {
                out
            };
        }
        let (score, head_state) = self.head_forward(&state)?;
        if !score.is_finite() {
            return Err(Error::NonFinite("discriminator score"));
        }
        if !grads {
            return Ok(ScoreGrad {
                score,
                params: Vec::new(),
                input: None,
            });
        }
        let mut pg = vec![0.0; self.params.len()];
        let mut g = self.head_backward(&head_state, &mut pg)?;
        for stage in (0..records.len()).rev() {
            let d = depth - stage;
            let newest = stage == 0;
            let blended = newest && skip.is_some();
            let g_block = if blended { g.scale(alpha) } else { g.clone() };
            let g_in = self.block_backward(&self.blocks[d - 1], &records[stage], &g_block, &mut pg)?;
            g = if blended {
                let layout = TraceLayout::new(2 * depth, &[2 * depth - 2, 2 * depth - 1])?;
                let mut via_skip = layout.adjoint(&g.scale(1.0 - alpha));
                via_skip.add_assign_scaled(&g_in, 1.0);
                via_skip
            } else {
                g_in
            };
        }
        if pg.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("discriminator gradient"));
        }
        Ok(ScoreGrad {
            score,
            params: pg,
            input: input_grad.then_some(g),
        })
    }

    /// States after every layer, fade blend and partial trace, computed with the
    /// literal layer implementations. The last entry is the 1-qubit state whose
    /// `⟨Z⟩` is the score.
    pub fn layer_states(&self, rho: &DensityMatrix, depth: usize, alpha: f64) -> Result<Vec<DensityMatrix>> {
        self.check_call(rho, depth, alpha)?;
        let mut states = Vec::new();
        let mut state = rho.clone();
        for d in (1..=depth).rev() {
            let block = &self.blocks[d - 1];
            let block_in = state.clone();
            for (spec, off) in &block.layers {
                let slice = &self.params[*off..*off + spec.param_count];
                state = match spec.kind {
                    crate::qlayers::LayerKind::QuBlur => blur_layer(&state, &BlurKernel::from_slice(slice)?)?,
                    _ => apply_circuit(&state, &ParamCircuit::new(spec.n_qubits, spec.gates(), slice.to_vec())?)?,
                };
                states.push(state.clone());
            }
            if d == 1 {
                state = trace_out_high(&state, 1)?;
                states.push(state.clone());
                break;
            }
            state = trace_out_high(&state, 2)?;
            states.push(state.clone());
            if d == depth && alpha < 1.0 {
                state = DensityMatrix::mix(&trace_out_high(&block_in, 2)?, &state, alpha)?;
                states.push(state.clone());
            }
        }
        Ok(states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densmat::{encode_vector, expect_z, INVARIANT_TOL};

    fn random_state(n: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = encode_vector(&v).unwrap();
        let w: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
        DensityMatrix::mix(&a, &encode_vector(&w).unwrap(), 0.3).unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(quantum_param_count(2), 16);
        assert_eq!(quantum_param_count(4), 16 + 65);
        assert_eq!(quantum_param_count(10), 516);
        let d = QuantumDiscriminator::new(6, 1).unwrap();
        assert_eq!(d.param_count(), 16 + 65 + 105);
        assert_eq!(d.active_param_count(1), 16);
        assert!(d.params().iter().all(|p| p.abs() <= FRAC_PI_4));
    }

    #[test]
    fn blur_contributes_five() {
        for n in [4, 6, 8, 10] {
            let b = Block::new(n, 0);
            let without: usize = b.layers.iter().filter(|(s, _)| s.kind != crate::qlayers::LayerKind::QuBlur).map(|(s, _)| s.param_count).sum();
            assert_eq!(b.param_count() - without, 5);
        }
    }

    #[test]
    fn zero_head_on_ground_state() {
        let d = QuantumDiscriminator::from_params(2, vec![0.0; 16]).unwrap();
        // zero rotations leave CNOT(0→1), CNOT(1→0), CNOT(0→1): |00⟩ stays |00⟩
        assert_eq!(d.discriminate(&DensityMatrix::basis(2, 0), 1, 1.0).unwrap(), 1.0);
        // |01⟩ (qubit 0 set) → swap → qubit 1 set → ⟨Z₀⟩ = 1
        assert_eq!(d.discriminate(&DensityMatrix::basis(2, 1), 1, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_calls() {
        let d = QuantumDiscriminator::new(6, 2).unwrap();
        let rho = random_state(4, 1);
        assert!(matches!(d.discriminate(&rho, 3, 1.0), Err(Error::DimMismatch { .. })));
        assert!(matches!(d.discriminate(&rho, 4, 1.0), Err(Error::BadDepth { .. })));
        assert!(matches!(d.discriminate(&rho, 2, -0.1), Err(Error::BadAlpha(_))));
        assert!(QuantumDiscriminator::new(5, 0).is_err());
        assert!(QuantumDiscriminator::from_params(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn literal_path_matches_fast_path() {
        let d = QuantumDiscriminator::new(6, 3).unwrap();
        for (depth, alpha) in [(1, 1.0), (2, 1.0), (2, 0.4), (3, 0.0), (3, 0.7), (3, 1.0)] {
            let rho = random_state(2 * depth, depth as u64 * 10);
            let states = d.layer_states(&rho, depth, alpha).unwrap();
            for s in &states {
                s.validate(INVARIANT_TOL).unwrap();
            }
            let literal = expect_z(states.last().unwrap()).unwrap();
            let fast = d.discriminate(&rho, depth, alpha).unwrap();
            assert!((literal - fast).abs() < 1e-12, "depth {depth} α {alpha}: {literal} vs {fast}");
        }
    }

    #[test]
    fn fade_endpoint_matches_previous_stage() {
        let d = QuantumDiscriminator::new(6, 4).unwrap();
        let rho = random_state(6, 5);
        let at0 = d.discriminate(&rho, 3, 0.0).unwrap();
        let prev = d.discriminate(&trace_out_high(&rho, 2).unwrap(), 2, 1.0).unwrap();
        assert!((at0 - prev).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_differences() {
        let d = QuantumDiscriminator::new(6, 6).unwrap();
        let rho = random_state(6, 7);
        let alpha = 0.35;
        let sg = d.discriminate_with_grad(&rho, 3, alpha, true).unwrap();
        let h = 1e-5;
        for k in (0..d.param_count()).step_by(5) {
            let mut p = d.clone();
            p.params[k] += h;
            let mut m = d.clone();
            m.params[k] -= h;
            let fd = (p.discriminate(&rho, 3, alpha).unwrap() - m.discriminate(&rho, 3, alpha).unwrap()) / (2.0 * h);
            assert!((fd - sg.params[k]).abs() < 1e-7, "param {k}: {fd} vs {}", sg.params[k]);
        }
        // input gradient along a Hermitian direction that keeps the trace
        let dir = random_state(6, 8);
        let mut delta = dir.matrix().clone();
        delta.add_assign_scaled(rho.matrix(), -1.0);
        let g = sg.input.unwrap();
        let analytic: f64 = g.data().iter().zip(delta.data()).map(|(a, b)| (a.conj() * b).re).sum();
        let shifted = |t: f64| {
            let mut m = rho.matrix().clone();
            m.add_assign_scaled(&delta, t);
            d.discriminate(&DensityMatrix::from_matrix_unchecked(m), 3, alpha).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        assert!((fd - analytic).abs() < 1e-7, "{fd} vs {analytic}");
    }
}
