use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::matrix::CMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cnot,
}

/// A single gate. Rotations read their angle from a parameter store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub param_index: Option<usize>,
}

impl Gate {
    pub fn rx(target: usize, param: usize) -> Self {
        Self::rotation(GateKind::Rx, target, param)
    }

    pub fn ry(target: usize, param: usize) -> Self {
        Self::rotation(GateKind::Ry, target, param)
    }

    pub fn rz(target: usize, param: usize) -> Self {
        Self::rotation(GateKind::Rz, target, param)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            target,
            control: Some(control),
            param_index: None,
        }
    }

    fn rotation(kind: GateKind, target: usize, param: usize) -> Self {
        Self {
            kind,
            target,
            control: None,
            param_index: Some(param),
        }
    }

    /// Same gate with its parameter index shifted by `offset`.
    pub fn offset_param(mut self, offset: usize) -> Self {
        if let Some(p) = self.param_index.as_mut() {
            *p += offset;
        }
        self
    }

    pub fn validate(&self, n_qubits: usize, n_params: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::BadGate(format!("target {} >= {n_qubits}", self.target)));
        }
        match self.kind {
            GateKind::Cnot => {
                let control = self
                    .control
                    .ok_or_else(|| Error::BadGate("CNOT without control".into()))?;
                if control >= n_qubits || control == self.target {
                    return Err(Error::BadGate(format!("bad CNOT control {control}")));
                }
                if self.param_index.is_some() {
                    return Err(Error::BadGate("CNOT carries no parameter".into()));
                }
            }
            _ => {
                if self.control.is_some() {
                    return Err(Error::BadGate("rotation with control".into()));
                }
                match self.param_index {
                    Some(p) if p < n_params => {}
                    Some(p) => return Err(Error::BadGate(format!("param index {p} >= {n_params}"))),
                    None => return Err(Error::BadGate("rotation without parameter".into())),
                }
            }
        }
        Ok(())
    }

    /// The 2×2 matrix of a rotation gate at angle `theta`.
    pub fn rotation_matrix(kind: GateKind, theta: f64) -> [[Complex64; 2]; 2] {
        let (s, c) = (theta / 2.0).sin_cos();
        let z = Complex64::new(0.0, 0.0);
        match kind {
            GateKind::Rx => [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ],
            GateKind::Ry => [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            GateKind::Rz => [[Complex64::new(c, -s), z], [z, Complex64::new(c, s)]],
            GateKind::Cnot => panic!("CNOT is not a rotation"),
        }
    }
}

/// Ordered gate list with its parameter store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    params: Vec<f64>,
}

impl ParamCircuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>, params: Vec<f64>) -> Result<Self> {
        for g in &gates {
            g.validate(n_qubits, params.len())?;
        }
        Ok(Self {
            n_qubits,
            gates,
            params,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::LengthMismatch {
                expected: self.params.len(),
                found: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    /// Composed unitary `U = U_m ⋯ U_1`.
    pub fn unitary(&self) -> CMatrix {
        let dim = 1 << self.n_qubits;
        let mut u = CMatrix::identity(dim);
        for g in &self.gates {
            u = gate_unitary(g, &self.params, self.n_qubits).matmul(&u);
        }
        u
    }
}

/// Full `2^n × 2^n` unitary of one gate; qubit 0 is the least significant index bit.
pub fn gate_unitary(gate: &Gate, params: &[f64], n_qubits: usize) -> CMatrix {
    let dim = 1usize << n_qubits;
    let tbit = 1usize << gate.target;
    match gate.kind {
        GateKind::Cnot => {
            let cbit = 1usize << gate.control.expect("CNOT control");
            CMatrix::from_fn(dim, |i, j| {
                let image = if j & cbit != 0 { j ^ tbit } else { j };
                if i == image {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        }
        kind => {
            let theta = params[gate.param_index.expect("rotation parameter")];
            let r = Gate::rotation_matrix(kind, theta);
            CMatrix::from_fn(dim, |i, j| {
                if (i & !tbit) != (j & !tbit) {
                    return Complex64::new(0.0, 0.0);
                }
                r[usize::from(i & tbit != 0)][usize::from(j & tbit != 0)]
            })
        }
    }
}

/// In-place `m ← U m U†` for one gate at angle `theta` (ignored for CNOT).
pub(crate) fn conjugate_gate(m: &mut CMatrix, gate: &Gate, theta: f64) {
    let dim = m.dim();
    let tbit = 1usize << gate.target;
    match gate.kind {
        GateKind::Cnot => {
            let cbit = 1usize << gate.control.expect("CNOT control");
            let perm = |i: usize| if i & cbit != 0 { i ^ tbit } else { i };
            let data = m.data_mut();
            // rows
            for i in 0..dim {
                let p = perm(i);
                if p > i {
                    for j in 0..dim {
                        data.swap(i * dim + j, p * dim + j);
                    }
                }
            }
            // columns
            for j in 0..dim {
                let p = perm(j);
                if p > j {
                    for i in 0..dim {
                        data.swap(i * dim + j, i * dim + p);
                    }
                }
            }
        }
        kind => {
            let r = Gate::rotation_matrix(kind, theta);
            let data = m.data_mut();
            // left multiply by U
            for i0 in (0..dim).filter(|i| i & tbit == 0) {
                let i1 = i0 | tbit;
                for j in 0..dim {
                    let a = data[i0 * dim + j];
                    let b = data[i1 * dim + j];
                    data[i0 * dim + j] = r[0][0] * a + r[0][1] * b;
                    data[i1 * dim + j] = r[1][0] * a + r[1][1] * b;
                }
            }
            // right multiply by U†
            let rc = [
                [r[0][0].conj(), r[0][1].conj()],
                [r[1][0].conj(), r[1][1].conj()],
            ];
            for i in 0..dim {
                let row = &mut data[i * dim..(i + 1) * dim];
                for j0 in (0..dim).filter(|j| j & tbit == 0) {
                    let j1 = j0 | tbit;
                    let a = row[j0];
                    let b = row[j1];
                    row[j0] = a * rc[0][0] + b * rc[0][1];
                    row[j1] = a * rc[1][0] + b * rc[1][1];
                }
            }
        }
    }
}

pub(crate) fn gate_angle(gate: &Gate, params: &[f64]) -> f64 {
    gate.param_index.map_or(0.0, |p| params[p])
}

/// In-place evolution `m ← U m U†` through an ordered gate list.
pub(crate) fn evolve(m: &mut CMatrix, gates: &[Gate], params: &[f64]) {
    for g in gates {
        conjugate_gate(m, g, gate_angle(g, params));
    }
}

/// In-place `m ← U† m U`, undoing [`evolve`].
pub(crate) fn evolve_inverse(m: &mut CMatrix, gates: &[Gate], params: &[f64]) {
    for g in gates.iter().rev() {
        conjugate_gate(m, g, -gate_angle(g, params));
    }
}

/// `Re Tr(G† · (-i/2)[P, ρ])`: derivative of `Re Tr(G† ρ(θ))` through a rotation
/// about Pauli `P` on `target`, evaluated at the post-gate state `ρ`.
pub(crate) fn rotation_derivative(grad: &CMatrix, rho: &CMatrix, kind: GateKind, target: usize) -> f64 {
    let dim = rho.dim();
    let tbit = 1usize << target;
    let g = grad.data();
    let r = rho.data();
    let i_unit = Complex64::new(0.0, 1.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        let ib = i & tbit != 0;
        for j in 0..dim {
            let jb = j & tbit != 0;
            let comm = match kind {
                GateKind::Rx => r[(i ^ tbit) * dim + j] - r[i * dim + (j ^ tbit)],
                GateKind::Ry => {
                    let left = if ib { i_unit } else { -i_unit } * r[(i ^ tbit) * dim + j];
                    let right = r[i * dim + (j ^ tbit)] * if jb { -i_unit } else { i_unit };
                    left - right
                }
                GateKind::Rz => {
                    let zi = if ib { -1.0 } else { 1.0 };
                    let zj = if jb { -1.0 } else { 1.0 };
                    r[i * dim + j] * (zi - zj)
                }
                GateKind::Cnot => unreachable!(),
            };
            acc += g[i * dim + j].conj() * comm;
        }
    }
    (acc * Complex64::new(0.0, -0.5)).re
}
