//! Parameterized quantum layers and the gradient contract for their parameters.
//!
//! Unit topologies (qubit pair `(a, b)`):
//! - QuConv: `RX RY RZ` on `a`, `RX RY RZ` on `b`, then `CNOT(a→b)`. 6 parameters.
//! - QuPool: `RX RY` on `a`, `RX RY` on `b`, then `CNOT(b→a)`; `b` is later discarded. 4 parameters.
//! - QuDense: `RX RY RZ` on every qubit, then a CNOT chain `i→i+1`. 3 parameters per qubit.
//! - Blur kernel: `RX RY` on qubit 0, `RX RY` on qubit 1, `CNOT(0→1)`, `RZ` on qubit 1. 5 parameters.
//!
//! Conv and pool layers tile their unit over the brickwork pairs
//! `(0,1),(2,3),…` followed by `(1,2),(3,4),…`.
//!
//! Gradients are computed in reverse mode. A gradient with respect to a state
//! `ρ` is the matrix `Ḡ` with `dL = Re Tr(Ḡ† dρ)`, i.e. `Ḡᵢⱼ = ∂L/∂Re ρᵢⱼ + i ∂L/∂Im ρᵢⱼ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densmat::{
    apply_circuit, encode_feature_map, evolve, evolve_inverse, normalize_real, real_outer,
    rotation_derivative, CMatrix, DensityMatrix, FeatureMap, Gate, GateKind, ParamCircuit,
};
use crate::error::{Error, Result};

pub const CONV_UNIT_PARAMS: usize = 6;
pub const POOL_UNIT_PARAMS: usize = 4;
pub const BLUR_PARAMS: usize = 5;
const TILE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    QuConv,
    QuPool,
    QuDense,
    QuBlur,
}

/// Shape of one quantum layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub n_qubits: usize,
    pub param_count: usize,
    pub pairing: Vec<(usize, usize)>,
}

/// `(0,1),(2,3),…` then `(1,2),(3,4),…`.
pub fn brickwork_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    let first = (0..n_qubits.saturating_sub(1)).step_by(2).map(|a| (a, a + 1));
    let second = (1..n_qubits.saturating_sub(1)).step_by(2).map(|a| (a, a + 1));
    first.chain(second).collect()
}

impl LayerSpec {
    pub fn conv(n_qubits: usize) -> Self {
        let pairing = brickwork_pairs(n_qubits);
        Self {
            kind: LayerKind::QuConv,
            n_qubits,
            param_count: pairing.len() * CONV_UNIT_PARAMS,
            pairing,
        }
    }

    pub fn pool(n_qubits: usize) -> Self {
        let pairing = brickwork_pairs(n_qubits);
        Self {
            kind: LayerKind::QuPool,
            n_qubits,
            param_count: pairing.len() * POOL_UNIT_PARAMS,
            pairing,
        }
    }

    pub fn dense(n_qubits: usize) -> Self {
        Self {
            kind: LayerKind::QuDense,
            n_qubits,
            param_count: 3 * n_qubits,
            pairing: Vec::new(),
        }
    }

    /// A blur layer's parameters are its shared 2-qubit kernel, whatever the width.
    pub fn blur(n_qubits: usize) -> Self {
        Self {
            kind: LayerKind::QuBlur,
            n_qubits,
            param_count: BLUR_PARAMS,
            pairing: Vec::new(),
        }
    }

    /// Gate list with parameter indices relative to this layer's parameter slice.
    /// Blur layers are not a single circuit on `n_qubits`; this returns the kernel.
    pub fn gates(&self) -> Vec<Gate> {
        match self.kind {
            LayerKind::QuConv => self
                .pairing
                .iter()
                .enumerate()
                .flat_map(|(u, &pair)| quconv_unit(pair, u * CONV_UNIT_PARAMS))
                .collect(),
            LayerKind::QuPool => self
                .pairing
                .iter()
                .enumerate()
                .flat_map(|(u, &pair)| qupool_unit(pair, u * POOL_UNIT_PARAMS))
                .collect(),
            LayerKind::QuDense => qudense_gates(self.n_qubits),
            LayerKind::QuBlur => blur_kernel_gates(),
        }
    }
}

/// QuConv unit on `(a, b)` reading parameters `first..first + 6`.
pub fn quconv_unit((a, b): (usize, usize), first: usize) -> Vec<Gate> {
    assert_ne!(a, b, "QuConv pair must be two distinct qubits");
    vec![
        Gate::rx(a, first),
        Gate::ry(a, first + 1),
        Gate::rz(a, first + 2),
        Gate::rx(b, first + 3),
        Gate::ry(b, first + 4),
        Gate::rz(b, first + 5),
        Gate::cnot(a, b),
    ]
}

/// QuPool unit on `(a, b)` reading parameters `first..first + 4`.
pub fn qupool_unit((a, b): (usize, usize), first: usize) -> Vec<Gate> {
    assert_ne!(a, b, "QuPool pair must be two distinct qubits");
    vec![
        Gate::rx(a, first),
        Gate::ry(a, first + 1),
        Gate::rx(b, first + 2),
        Gate::ry(b, first + 3),
        Gate::cnot(b, a),
    ]
}

pub fn qudense_gates(n_qubits: usize) -> Vec<Gate> {
    let mut gates = Vec::with_capacity(4 * n_qubits);
    for q in 0..n_qubits {
        gates.push(Gate::rx(q, 3 * q));
        gates.push(Gate::ry(q, 3 * q + 1));
        gates.push(Gate::rz(q, 3 * q + 2));
    }
    for q in 0..n_qubits.saturating_sub(1) {
        gates.push(Gate::cnot(q, q + 1));
    }
    gates
}

/// Applies a dense layer to a state of matching width.
pub fn qudense_layer(rho: &DensityMatrix, params: &[f64]) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    let circuit = ParamCircuit::new(n, qudense_gates(n), params.to_vec())?;
    apply_circuit(rho, &circuit)
}

fn blur_kernel_gates() -> Vec<Gate> {
    vec![
        Gate::rx(0, 0),
        Gate::ry(0, 1),
        Gate::rx(1, 2),
        Gate::ry(1, 3),
        Gate::cnot(0, 1),
        Gate::rz(1, 4),
    ]
}

/// Shared 2-qubit, 5-parameter kernel of the blur layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BlurKernel {
    circuit: ParamCircuit,
}

impl BlurKernel {
    pub fn new(params: [f64; BLUR_PARAMS]) -> Self {
        Self {
            circuit: ParamCircuit::new(2, blur_kernel_gates(), params.to_vec()).expect("static topology"),
        }
    }

    pub fn from_slice(params: &[f64]) -> Result<Self> {
        let arr: [f64; BLUR_PARAMS] = params.try_into().map_err(|_| Error::LengthMismatch {
            expected: BLUR_PARAMS,
            found: params.len(),
        })?;
        Ok(Self::new(arr))
    }

    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    pub fn param_count(&self) -> usize {
        self.circuit.params().len()
    }
}

fn check_blur_width(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::BadDimension(format!("blur layer needs an even width >= 4, got {n}")));
    }
    Ok(())
}

/// Encodes a tile, falling back to `I/4` when its clamped diagonal vanishes.
fn encode_tile(tile: &FeatureMap) -> Result<DensityMatrix> {
    match encode_feature_map(tile) {
        Ok(rho) => Ok(rho),
        Err(Error::ZeroVector) => Ok(DensityMatrix::maximally_mixed(2)),
        Err(e) => Err(e),
    }
}

/// Quantum-inspired blur convolution.
///
/// 1. Partition `Re ρ` into 4×4 tiles and encode each tile as a 2-qubit state.
/// 2. Evolve every tile state with the shared kernel.
/// 3. Write the evolved tiles back into a `2^n × 2^n` map and encode that map.
pub fn blur_layer(rho: &DensityMatrix, kernel: &BlurKernel) -> Result<DensityMatrix> {
    check_blur_width(rho.n_qubits())?;
    let map = FeatureMap::real_part(rho.matrix());
    let side = map.side();
    let tiles = side / TILE;
    let mut out = FeatureMap::zeros(side);
    for tr in 0..tiles {
        for tc in 0..tiles {
            let tile = FeatureMap::from_fn(TILE, |i, j| map.get(tr * TILE + i, tc * TILE + j));
            let evolved = apply_circuit(&encode_tile(&tile)?, kernel.circuit())?;
            for i in 0..TILE {
                for j in 0..TILE {
                    out.set(tr * TILE + i, tc * TILE + j, evolved.entry(i, j).re);
                }
            }
        }
    }
    match encode_feature_map(&out) {
        Err(Error::ZeroVector) => Ok(DensityMatrix::maximally_mixed(rho.n_qubits())),
        other => other,
    }
}

/// Reverse pass through an ordered gate list.
///
/// Starts from the post-circuit state and the gradient with respect to it,
/// accumulates parameter gradients into `param_grads` and returns the gradient
/// with respect to the circuit input. The input state is recovered by
/// uncomputing each gate, so no intermediate states are stored.
pub(crate) fn circuit_backward(
    state_out: &CMatrix,
    grad_out: &CMatrix,
    gates: &[Gate],
    params: &[f64],
    param_grads: &mut [f64],
) -> CMatrix {
    let mut rho = state_out.clone();
    let mut grad = grad_out.clone();
    for gate in gates.iter().rev() {
        if let Some(p) = gate.param_index {
            param_grads[p] += rotation_derivative(&grad, &rho, gate.kind, gate.target);
        }
        let single = std::slice::from_ref(gate);
        evolve_inverse(&mut rho, single, params);
        evolve_inverse(&mut grad, single, params);
    }
    grad
}

/// Backward through `ρ = u uᵀ`, `u = a/‖a‖`: gradient with respect to `a`.
pub(crate) fn amplitude_encode_backward(grad: &CMatrix, u: &[f64], norm: f64) -> Vec<f64> {
    let n = u.len();
    let mut gu = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += (grad[(i, j)].re + grad[(j, i)].re) * u[j];
        }
        gu[i] = acc;
    }
    let dot: f64 = gu.iter().zip(u).map(|(g, x)| g * x).sum();
    gu.iter().zip(u).map(|(g, x)| (g - x * dot) / norm).collect()
}

/// Backward through `a = sqrt(max(d, 0))`. The derivative at `a = 0` is taken as 0.
pub(crate) fn sqrt_clamp_backward(grad_a: &[f64], amps: &[f64]) -> Vec<f64> {
    grad_a
        .iter()
        .zip(amps)
        .map(|(g, &a)| if a > 0.0 { g / (2.0 * a) } else { 0.0 })
        .collect()
}

/// Forward record of an amplitude encoding of a clamped diagonal.
#[derive(Clone, Debug)]
pub(crate) struct DiagEncoding {
    pub amps: Vec<f64>,
    pub unit: Vec<f64>,
    pub norm: f64,
}

impl DiagEncoding {
    /// `None` when the clamped diagonal is identically zero.
    pub fn new(diag: &[f64]) -> Result<Option<Self>> {
        if diag.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("diagonal"));
        }
        let amps: Vec<f64> = diag.iter().map(|x| x.max(0.0).sqrt()).collect();
        match normalize_real(&amps) {
            Ok((unit, norm)) => Ok(Some(Self { amps, unit, norm })),
            Err(Error::ZeroVector) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn state(&self) -> CMatrix {
        real_outer(&self.unit)
    }

    /// Gradient with respect to the raw diagonal entries.
    pub fn backward(&self, grad: &CMatrix) -> Vec<f64> {
        let ga = amplitude_encode_backward(grad, &self.unit, self.norm);
        sqrt_clamp_backward(&ga, &self.amps)
    }
}

/// Forward record of a blur layer. Only the diagonal tiles reach the output:
/// the final encoding reads the diagonal of the reassembled map, which is made
/// of the diagonals of the evolved diagonal tiles.
#[derive(Clone, Debug)]
pub(crate) struct BlurTrace {
    tiles: Vec<Option<DiagEncoding>>,
    evolved: Vec<CMatrix>,
    output: Option<DiagEncoding>,
}

pub(crate) fn blur_forward(rho: &CMatrix, params: &[f64]) -> Result<(CMatrix, BlurTrace)> {
    let side = rho.dim();
    let n = side.trailing_zeros() as usize;
    check_blur_width(n)?;
    let gates = blur_kernel_gates();
    let tiles = side / TILE;
    let mut tile_enc = Vec::with_capacity(tiles);
    let mut evolved = Vec::with_capacity(tiles);
    let mut q = Vec::with_capacity(side);
    for t in 0..tiles {
        let diag: Vec<f64> = (0..TILE).map(|i| rho[(t * TILE + i, t * TILE + i)].re).collect();
        let enc = DiagEncoding::new(&diag)?;
        let mut state = match &enc {
            Some(e) => e.state(),
            None => DensityMatrix::maximally_mixed(2).into_matrix(),
        };
        evolve(&mut state, &gates, params);
        q.extend((0..TILE).map(|i| state[(i, i)].re));
        tile_enc.push(enc);
        evolved.push(state);
    }
    let output = DiagEncoding::new(&q)?;
    let out = match &output {
        Some(e) => e.state(),
        None => DensityMatrix::maximally_mixed(n).into_matrix(),
    };
    Ok((
        out,
        BlurTrace {
            tiles: tile_enc,
            evolved,
            output,
        },
    ))
}

/// Returns the input gradient (diagonal only) and accumulates kernel gradients.
pub(crate) fn blur_backward(trace: &BlurTrace, grad_out: &CMatrix, params: &[f64], param_grads: &mut [f64]) -> CMatrix {
    let side = grad_out.dim();
    let mut grad_in = CMatrix::zeros(side);
    let Some(output) = &trace.output else {
        return grad_in;
    };
    let gq = output.backward(grad_out);
    let gates = blur_kernel_gates();
    for (t, (enc, evolved)) in trace.tiles.iter().zip(&trace.evolved).enumerate() {
        let Some(enc) = enc else { continue };
        let mut g_tau = CMatrix::zeros(TILE);
        for i in 0..TILE {
            g_tau[(i, i)] = Complex64::new(gq[t * TILE + i], 0.0);
        }
        let g_sigma = circuit_backward(evolved, &g_tau, &gates, params, param_grads);
        let gp = enc.backward(&g_sigma);
        for i in 0..TILE {
            grad_in[(t * TILE + i, t * TILE + i)] = Complex64::new(gp[i], 0.0);
        }
    }
    grad_in
}

/// A scalar objective of real parameters with a reverse-mode gradient.
pub trait QuantumObjective {
    fn value(&self, params: &[f64]) -> f64;
    fn value_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>);
}

/// `Re Tr(O · UρU†)` for a fixed input state, gate list and Hermitian observable.
/// Affine in the evolved state, so the parameter-shift rule applies.
#[derive(Clone, Debug)]
pub struct CircuitObjective {
    input: DensityMatrix,
    gates: Vec<Gate>,
    observable: CMatrix,
}

impl CircuitObjective {
    pub fn new(input: DensityMatrix, gates: Vec<Gate>, observable: CMatrix) -> Result<Self> {
        if observable.dim() != input.dim() {
            return Err(Error::DimMismatch {
                expected: input.dim(),
                found: observable.dim(),
            });
        }
        let n = input.n_qubits();
        let n_params = gates.iter().filter_map(|g| g.param_index).max().map_or(0, |p| p + 1);
        for g in &gates {
            g.validate(n, n_params)?;
        }
        Ok(Self {
            input,
            gates,
            observable,
        })
    }

    /// Pauli-Z on `qubit`, identity elsewhere.
    pub fn z_observable(n_qubits: usize, qubit: usize) -> CMatrix {
        CMatrix::from_fn(1 << n_qubits, |i, j| {
            if i != j {
                Complex64::new(0.0, 0.0)
            } else if i >> qubit & 1 == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(-1.0, 0.0)
            }
        })
    }

    fn evolved(&self, params: &[f64]) -> CMatrix {
        let mut m = self.input.matrix().clone();
        evolve(&mut m, &self.gates, params);
        m
    }
}

impl QuantumObjective for CircuitObjective {
    fn value(&self, params: &[f64]) -> f64 {
        self.observable.trace_product_re(&self.evolved(params))
    }

    fn value_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let out = self.evolved(params);
        let value = self.observable.trace_product_re(&out);
        let mut grads = vec![0.0; params.len()];
        // dL = Re Tr(O dρ) means Ḡ = O† = O
        circuit_backward(&out, &self.observable, &self.gates, params, &mut grads);
        (value, grads)
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Reverse-mode gradient of `objective` at `params`.
pub fn quantum_grads(objective: &impl QuantumObjective, params: &[f64]) -> Result<Vec<f64>> {
    let (value, grads) = objective.value_and_grad(params);
    check_finite(&[value], "loss")?;
    check_finite(&grads, "gradient")?;
    Ok(grads)
}

/// Parameter-shift gradient `[f(θ + π/2) − f(θ − π/2)] / 2`; exact for
/// objectives affine in a state evolved by `exp(−iθP/2)` rotations.
pub fn parameter_shift_grads(f: impl Fn(&[f64]) -> f64, params: &[f64]) -> Result<Vec<f64>> {
    let shift = std::f64::consts::FRAC_PI_2;
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        work[k] = params[k] + shift;
        let plus = f(&work);
        work[k] = params[k] - shift;
        let minus = f(&work);
        work[k] = params[k];
        grads.push((plus - minus) / 2.0);
    }
    check_finite(&grads, "parameter-shift gradient")?;
    Ok(grads)
}

/// Central finite differences with step `h`.
pub fn finite_difference_grads(f: impl Fn(&[f64]) -> f64, params: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        work[k] = params[k] + h;
        let plus = f(&work);
        work[k] = params[k] - h;
        let minus = f(&work);
        work[k] = params[k];
        grads.push((plus - minus) / (2.0 * h));
    }
    check_finite(&grads, "finite-difference gradient")?;
    Ok(grads)
}

/// Rotation parameter count of a gate list.
pub fn rotation_count(gates: &[Gate]) -> usize {
    gates.iter().filter(|g| g.kind != GateKind::Cnot).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densmat::{encode_vector, partial_trace, INVARIANT_TOL};
    use std::f64::consts::PI;

    fn circuit(n: usize, gates: Vec<Gate>, params: &[f64]) -> ParamCircuit {
        ParamCircuit::new(n, gates, params.to_vec()).unwrap()
    }

    #[test]
    fn unit_parameter_counts() {
        assert_eq!(rotation_count(&quconv_unit((0, 1), 0)), 6);
        assert_eq!(rotation_count(&qupool_unit((0, 1), 0)), 4);
        assert_eq!(rotation_count(&qudense_gates(2)), 6);
        assert_eq!(rotation_count(&blur_kernel_gates()), 5);
        assert_eq!(BlurKernel::new([0.0; 5]).param_count(), 5);
        for n in [2, 4, 6, 8, 10] {
            for spec in [LayerSpec::conv(n), LayerSpec::pool(n), LayerSpec::dense(n)] {
                assert_eq!(rotation_count(&spec.gates()), spec.param_count, "{spec:?}");
            }
        }
    }

    #[test]
    fn brickwork_tiling() {
        assert_eq!(brickwork_pairs(2), vec![(0, 1)]);
        assert_eq!(brickwork_pairs(4), vec![(0, 1), (2, 3), (1, 2)]);
        assert_eq!(brickwork_pairs(5), vec![(0, 1), (2, 3), (1, 2), (3, 4)]);
    }

    #[test]
    fn zero_conv_unit_is_cnot() {
        let c = circuit(2, quconv_unit((0, 1), 0), &[0.0; 6]);
        let cnot = circuit(2, vec![Gate::cnot(0, 1)], &[]);
        assert!(c.unitary().max_abs_diff(&cnot.unitary()) < 1e-15);
        let p = circuit(2, qupool_unit((0, 1), 0), &[0.0; 4]);
        let rev = circuit(2, vec![Gate::cnot(1, 0)], &[]);
        assert!(p.unitary().max_abs_diff(&rev.unitary()) < 1e-15);
    }

    #[test]
    fn pool_with_idle_sacrificial_qubit_keeps_target() {
        // b = qubit 1 in |0>, zero rotations: CNOT(1→0) does nothing
        let a = encode_vector(&[0.6, 0.8]).unwrap();
        let rho = DensityMatrix::basis(1, 0).tensor(&a);
        let c = circuit(2, qupool_unit((0, 1), 0), &[0.0; 4]);
        let out = partial_trace(&apply_circuit(&rho, &c).unwrap(), &[1]).unwrap();
        assert!(out.matrix().max_abs_diff(a.matrix()) < 1e-15);
    }

    #[test]
    fn dense_zero_params_is_single_cnot() {
        let rho = encode_vector(&[0.1, 0.7, 0.2, 0.4]).unwrap();
        let out = qudense_layer(&rho, &[0.0; 6]).unwrap();
        let expected = apply_circuit(&rho, &circuit(2, vec![Gate::cnot(0, 1)], &[])).unwrap();
        assert_eq!(out, expected);
        assert!(qudense_layer(&rho, &[0.0; 5]).is_err());
    }

    #[test]
    fn blur_rejects_bad_widths() {
        let k = BlurKernel::new([0.0; 5]);
        assert!(blur_layer(&DensityMatrix::maximally_mixed(2), &k).is_err());
        assert!(blur_layer(&DensityMatrix::maximally_mixed(5), &k).is_err());
    }

    #[test]
    fn blur_zero_kernel_preserves_invariants() {
        let v: Vec<f64> = (0..16).map(|i| (i % 3) as f64).collect();
        let rho = encode_vector(&v).unwrap();
        let out = blur_layer(&rho, &BlurKernel::new([0.0; 5])).unwrap();
        out.validate(INVARIANT_TOL).unwrap();
        assert_eq!(out.n_qubits(), 4);
    }

    #[test]
    fn blur_fast_path_matches_literal_layer() {
        let v: Vec<f64> = (0..64).map(|i| ((i * 13) % 7) as f64 - 1.0).collect();
        let rho = encode_vector(&v).unwrap();
        let params = [0.3, -0.7, 1.1, 0.2, -1.4];
        let literal = blur_layer(&rho, &BlurKernel::new(params)).unwrap();
        let (fast, _) = blur_forward(rho.matrix(), &params).unwrap();
        assert!(literal.matrix().max_abs_diff(&fast) < 1e-14);
    }

    #[test]
    fn rx_gradient_closed_form() {
        let obj = CircuitObjective::new(
            DensityMatrix::basis(1, 0),
            vec![Gate::rx(0, 0)],
            CircuitObjective::z_observable(1, 0),
        )
        .unwrap();
        for theta in [-2.0, -0.3, 0.0, 0.9, PI / 2.0, 2.5] {
            assert!((obj.value(&[theta]) - theta.cos()).abs() < 1e-14);
            let g = quantum_grads(&obj, &[theta]).unwrap();
            assert!((g[0] + theta.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn independent_parameter_has_zero_gradient() {
        // RZ on a diagonal state never changes the Z readout
        let obj = CircuitObjective::new(
            encode_vector(&[1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![Gate::rz(1, 0), Gate::ry(0, 1)],
            CircuitObjective::z_observable(2, 0),
        )
        .unwrap();
        let g = quantum_grads(&obj, &[0.7, 0.4]).unwrap();
        assert_eq!(g[0], 0.0);
        assert!(g[1].abs() > 0.1);
    }

    #[test]
    fn oracles_reject_non_finite() {
        assert!(parameter_shift_grads(|_| f64::NAN, &[0.0]).is_err());
        assert!(finite_difference_grads(|p| 1.0 / p[0].abs().min(0.0), &[0.0], 1e-5).is_err());
    }
}
