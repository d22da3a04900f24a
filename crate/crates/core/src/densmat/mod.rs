//! Dense density-matrix simulation.
//!
//! Every state lives in a `2^n × 2^n` complex matrix with little-endian qubit
//! ordering: qubit 0 is the least significant bit of a basis index. States are
//! capped at [`MAX_QUBITS`] qubits.

mod gate;
mod io;
mod matrix;

use num_complex::Complex64;

pub use gate::{gate_unitary, Gate, GateKind, ParamCircuit};
pub(crate) use gate::{evolve, evolve_inverse, rotation_derivative};
pub use matrix::CMatrix;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 10;

/// Tolerance used when checking density-matrix invariants.
pub const INVARIANT_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive semidefinite matrix on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: CMatrix,
}

impl DensityMatrix {
    /// Checked constructor; rejects matrices that violate an invariant at [`INVARIANT_TOL`].
    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        let n_qubits = qubits_for_len(mat.dim())?;
        let rho = Self { n_qubits, mat };
        rho.validate(INVARIANT_TOL)?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        let n_qubits = mat.dim().trailing_zeros() as usize;
        debug_assert_eq!(1usize << n_qubits, mat.dim());
        Self { n_qubits, mat }
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("amplitudes"));
        }
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let u: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let dim = u.len();
        Ok(Self {
            n_qubits,
            mat: CMatrix::from_fn(dim, |i, j| u[i] * u[j].conj()),
        })
    }

    /// Computational basis state `|index⟩⟨index|`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut mat = CMatrix::zeros(dim);
        mat[(index, index)] = Complex64::new(1.0, 0.0);
        Self { n_qubits, mat }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            n_qubits,
            mat: CMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// `ρ_a ⊗ ρ_b`, with `self` on the high-order qubits.
    pub fn tensor(&self, low: &DensityMatrix) -> DensityMatrix {
        Self {
            n_qubits: self.n_qubits + low.n_qubits,
            mat: self.mat.kron(&low.mat),
        }
    }

    /// Convex combination `(1 - alpha) ρ_a + alpha ρ_b`.
    pub fn mix(a: &DensityMatrix, b: &DensityMatrix, alpha: f64) -> Result<DensityMatrix> {
        if a.n_qubits != b.n_qubits {
            return Err(Error::DimMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::BadAlpha(alpha));
        }
        Ok(Self {
            n_qubits: a.n_qubits,
            mat: a.mat.lerp(&b.mat, alpha),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    /// Real diagonal (populations).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.mat.trace_product_re(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.mat.hermitian_eigen().0[0]
    }

    /// Checks Hermiticity, unit trace and positive semidefiniteness at `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if !self.mat.is_finite() {
            return Err(Error::NonFinite("density matrix"));
        }
        let herm = self.mat.hermiticity_error();
        if herm > tol {
            return Err(Error::InvalidState(format!("not Hermitian (error {herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// Square real matrix, row-major; generated feature maps and tile maps.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    side: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::LengthMismatch {
                expected: side * side,
                found: data.len(),
            });
        }
        Ok(Self { side, data })
    }

    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                data.push(f(i, j));
            }
        }
        Self { side, data }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.side + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.side + j] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.side).map(|i| self.get(i, i)).collect()
    }

    /// Real part of a complex matrix.
    pub fn real_part(m: &CMatrix) -> Self {
        Self {
            side: m.dim(),
            data: m.data().iter().map(|z| z.re).collect(),
        }
    }
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() || len > (1 << MAX_QUBITS) {
        return Err(Error::BadLength(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Normalizes a real vector to unit L2 norm.
pub(crate) fn normalize_real(v: &[f64]) -> Result<(Vec<f64>, f64)> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("input vector"));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((v.iter().map(|x| x / norm).collect(), norm))
}

/// Outer product `u uᵀ` of a real unit vector.
pub(crate) fn real_outer(u: &[f64]) -> CMatrix {
    CMatrix::from_fn(u.len(), |i, j| Complex64::new(u[i] * u[j], 0.0))
}

/// Amplitude encoding: `u u†` with `u = v / ‖v‖₂`.
pub fn encode_vector(v: &[f64]) -> Result<DensityMatrix> {
    qubits_for_len(v.len())?;
    let (u, _) = normalize_real(v)?;
    Ok(DensityMatrix::from_matrix_unchecked(real_outer(&u)))
}

/// Amplitudes `sqrt(max(diag, 0))` read off a feature map.
pub fn feature_map_amplitudes(m: &FeatureMap) -> Result<Vec<f64>> {
    let d = m.diagonal();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("feature map diagonal"));
    }
    Ok(d.into_iter().map(|x| x.max(0.0).sqrt()).collect())
}

/// Encodes a generated feature map: clamp the diagonal at 0, take the
/// elementwise square root and amplitude-encode the result.
pub fn encode_feature_map(m: &FeatureMap) -> Result<DensityMatrix> {
    qubits_for_len(m.side())?;
    encode_vector(&feature_map_amplitudes(m)?)
}

/// `Tr_high(|u⟩⟨u|)` for `u = v/‖v‖`, keeping the `keep_qubits` low-order qubits.
/// Equivalent to encoding `v` and tracing out the high qubits, without
/// materialising the full matrix.
pub fn encode_vector_reduced(v: &[f64], keep_qubits: usize) -> Result<DensityMatrix> {
    let n = qubits_for_len(v.len())?;
    if keep_qubits == 0 || keep_qubits > n {
        return Err(Error::BadQubitSet {
            remove: (keep_qubits..n).collect(),
            n_qubits: n,
        });
    }
    let (u, _) = normalize_real(v)?;
    let low = 1usize << keep_qubits;
    let blocks = v.len() / low;
    let mut out = vec![0.0f64; low * low];
    for h in 0..blocks {
        let slice = &u[h * low..(h + 1) * low];
        for (i, &a) in slice.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &mut out[i * low..(i + 1) * low];
            for (dst, &b) in row.iter_mut().zip(slice) {
                *dst += a * b;
            }
        }
    }
    let mat = CMatrix::from_row_major(low, out.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
        .expect("square");
    Ok(DensityMatrix::from_matrix_unchecked(mat))
}

/// `U ρ U†` for the circuit's composed unitary.
pub fn apply_circuit(rho: &DensityMatrix, circuit: &ParamCircuit) -> Result<DensityMatrix> {
    if rho.n_qubits != circuit.n_qubits() {
        return Err(Error::DimMismatch {
            expected: 1 << circuit.n_qubits(),
            found: rho.dim(),
        });
    }
    let mut m = rho.mat.clone();
    evolve(&mut m, circuit.gates(), circuit.params());
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Index tables mapping (kept, removed) sub-indices to full basis indices.
pub(crate) struct TraceLayout {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
}

impl TraceLayout {
    pub fn new(n_qubits: usize, remove: &[usize]) -> Result<Self> {
        let mut sorted = remove.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let bad = sorted.is_empty()
            || sorted.len() != remove.len()
            || sorted.len() >= n_qubits
            || sorted.iter().any(|&q| q >= n_qubits);
        if bad {
            return Err(Error::BadQubitSet {
                remove: remove.to_vec(),
                n_qubits,
            });
        }
        let kept_q: Vec<usize> = (0..n_qubits).filter(|q| !sorted.contains(q)).collect();
        let scatter = |qubits: &[usize]| -> Vec<usize> {
            (0..1usize << qubits.len())
                .map(|sub| {
                    qubits
                        .iter()
                        .enumerate()
                        .filter(|(bit, _)| sub >> bit & 1 == 1)
                        .map(|(_, &q)| 1usize << q)
                        .sum()
                })
                .collect()
        };
        Ok(Self {
            kept: scatter(&kept_q),
            removed: scatter(&sorted),
        })
    }

    pub fn trace(&self, m: &CMatrix) -> CMatrix {
        let k = self.kept.len();
        CMatrix::from_fn(k, |i, j| {
            let (fi, fj) = (self.kept[i], self.kept[j]);
            self.removed.iter().map(|&r| m[(fi | r, fj | r)]).sum()
        })
    }

    /// Adjoint of [`Self::trace`]: `I_removed ⊗ g` in the full index space.
    pub fn adjoint(&self, g: &CMatrix) -> CMatrix {
        let full = self.kept.len() * self.removed.len();
        let mut out = CMatrix::zeros(full);
        for i in 0..self.kept.len() {
            for j in 0..self.kept.len() {
                let v = g[(i, j)];
                for &r in &self.removed {
                    out[(self.kept[i] | r, self.kept[j] | r)] = v;
                }
            }
        }
        out
    }
}

/// Reduced state after discarding the `remove` qubits.
pub fn partial_trace(rho: &DensityMatrix, remove: &[usize]) -> Result<DensityMatrix> {
    let layout = TraceLayout::new(rho.n_qubits, remove)?;
    Ok(DensityMatrix::from_matrix_unchecked(layout.trace(&rho.mat)))
}

/// Traces out the `count` highest-index qubits.
pub fn trace_out_high(rho: &DensityMatrix, count: usize) -> Result<DensityMatrix> {
    let n = rho.n_qubits;
    let remove: Vec<usize> = (n.saturating_sub(count)..n).collect();
    partial_trace(rho, &remove)
}

fn check_same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Superfidelity `Tr(ρ₁ρ₂) + sqrt((1 − Tr ρ₁²)(1 − Tr ρ₂²))`, clamped to `[0, 1]`.
pub fn superfidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    let overlap = a.mat.trace_product_re(&b.mat);
    let mixed_a = (1.0 - a.purity()).max(0.0);
    let mixed_b = (1.0 - b.purity()).max(0.0);
    Ok((overlap + (mixed_a * mixed_b).sqrt()).clamp(0.0, 1.0))
}

/// Uhlmann fidelity `Tr sqrt(sqrt(ρ₁) ρ₂ sqrt(ρ₁))`, clamped to `[0, 1]`.
///
/// Eigenvalues below `dim · ε`, the rounding floor of a unit-trace matrix,
/// count as zero; their square roots would otherwise add `O(sqrt ε)` noise
/// for rank-deficient states.
pub fn uhlmann_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    let floor = a.dim() as f64 * f64::EPSILON;
    let root = move |x: f64| if x > floor { x.sqrt() } else { 0.0 };
    let root_a = a.mat.hermitian_map(root);
    let inner = root_a.matmul(&b.mat).matmul(&root_a);
    let (values, _) = inner.hermitian_eigen();
    let f: f64 = values.into_iter().map(root).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// `Tr(ρ Z)` for a single qubit.
pub fn expect_z(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 2 {
        return Err(Error::DimMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    Ok(rho.mat[(0, 0)].re - rho.mat[(1, 1)].re)
}
