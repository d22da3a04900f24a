//! Brute-force oracles written against plain nested vectors, sharing no code
//! with the library's linear algebra.

#![allow(dead_code)]

use num_complex::Complex64;
use qprogan::densmat::{CMatrix, DensityMatrix, Gate, GateKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Dense = Vec<Vec<Complex64>>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_dense(m: &CMatrix) -> Dense {
    let n = m.dim();
    (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_dense(d: &Dense) -> CMatrix {
    CMatrix::from_fn(d.len(), |i, j| d[i][j])
}

pub fn identity(n: usize) -> Dense {
    (0..n).map(|i| (0..n).map(|j| if i == j { ONE } else { ZERO }).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = vec![vec![ZERO; n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn dagger(a: &Dense) -> Dense {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i].conj()).collect()).collect()
}

/// `a ⊗ b` with `a` on the high bits.
pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (na, nb) = (a.len(), b.len());
    let mut out = vec![vec![ZERO; na * nb]; na * nb];
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[i * nb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn max_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace(a: &Dense) -> Complex64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// Textbook single-qubit rotation `exp(−iθP/2)`.
pub fn rotation(kind: GateKind, theta: f64) -> Dense {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let r = |x: f64| Complex64::new(x, 0.0);
    let i = |x: f64| Complex64::new(0.0, x);
    match kind {
        GateKind::Rx => vec![vec![r(c), i(-s)], vec![i(-s), r(c)]],
        GateKind::Ry => vec![vec![r(c), r(-s)], vec![r(s), r(c)]],
        GateKind::Rz => vec![vec![Complex64::from_polar(1.0, -theta / 2.0), ZERO], vec![ZERO, Complex64::from_polar(1.0, theta / 2.0)]],
        GateKind::Cnot => unreachable!("not a rotation"),
    }
}

/// Full-register unitary of one gate: a Kronecker chain of identities and
/// the rotation for rotations, an explicit basis permutation for CNOT.
pub fn gate_matrix(g: &Gate, params: &[f64], n: usize) -> Dense {
    if g.kind == GateKind::Cnot {
        let c = g.control.unwrap();
        let dim = 1 << n;
        let mut out = vec![vec![ZERO; dim]; dim];
        for col in 0..dim {
            let row = if col >> c & 1 == 1 { col ^ (1 << g.target) } else { col };
            out[row][col] = ONE;
        }
        return out;
    }
    let single = rotation(g.kind, params[g.param_index.unwrap()]);
    let mut out = vec![vec![ONE]];
    for q in (0..n).rev() {
        out = kron(&out, &if q == g.target { single.clone() } else { identity(2) });
    }
    out
}

/// `U ρ U†` with `U` the ordered product of dense gate matrices.
pub fn circuit_oracle(rho: &Dense, gates: &[Gate], params: &[f64], n: usize) -> Dense {
    let mut u = identity(1 << n);
    for g in gates {
        u = matmul(&gate_matrix(g, params, n), &u);
    }
    matmul(&matmul(&u, rho), &dagger(&u))
}

/// `Tr_B(ρ)[i, j] = Σ_k ρ[i k, j k]` with the removed qubits' bits spliced in.
pub fn partial_trace_oracle(rho: &Dense, n: usize, remove: &[usize]) -> Dense {
    let kept: Vec<usize> = (0..n).filter(|q| !remove.contains(q)).collect();
    let assemble = |kept_bits: usize, removed_bits: usize| -> usize {
        let mut idx = 0;
        for (b, &q) in kept.iter().enumerate() {
            idx |= (kept_bits >> b & 1) << q;
        }
        for (b, &q) in remove.iter().enumerate() {
            idx |= (removed_bits >> b & 1) << q;
        }
        idx
    };
    let dk = 1 << kept.len();
    let mut out = vec![vec![ZERO; dk]; dk];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            for k in 0..1 << remove.len() {
                *cell += rho[assemble(i, k)][assemble(j, k)];
            }
        }
    }
    out
}

/// Eigenvalues and eigenvectors (columns) of a real symmetric matrix by cyclic Jacobi sweeps.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// `f(H)` for Hermitian `H` through its real embedding `[[A, −B], [B, A]]`,
/// on which matrix functions act blockwise.
pub fn hermitian_fn(h: &Dense, f: impl Fn(f64) -> f64) -> Dense {
    let n = h.len();
    let mut emb = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = h[i][j];
            emb[i][j] = z.re;
            emb[i + n][j + n] = z.re;
            emb[i][j + n] = -z.im;
            emb[i + n][j] = z.im;
        }
    }
    let (vals, vecs) = jacobi_eigen(emb);
    let mut out = vec![vec![ZERO; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &lam) in vals.iter().enumerate() {
                let fl = f(lam);
                re += vecs[i][k] * fl * vecs[j][k];
                im += vecs[i + n][k] * fl * vecs[j][k];
            }
            out[i][j] = Complex64::new(re, im);
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix, each listed once.
pub fn hermitian_eigenvalues(h: &Dense) -> Vec<f64> {
    let n = h.len();
    let mut emb = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            emb[i][j] = h[i][j].re;
            emb[i + n][j + n] = h[i][j].re;
            emb[i][j + n] = -h[i][j].im;
            emb[i + n][j] = h[i][j].im;
        }
    }
    // the embedding doubles every eigenvalue
    let mut vals = jacobi_eigen(emb).0;
    vals.sort_by(f64::total_cmp);
    vals.into_iter().step_by(2).collect()
}

pub fn superfidelity_oracle(a: &Dense, b: &Dense) -> f64 {
    let overlap = trace(&matmul(a, b)).re;
    let pa = trace(&matmul(a, a)).re;
    let pb = trace(&matmul(b, b)).re;
    (overlap + ((1.0 - pa) * (1.0 - pb)).max(0.0).sqrt()).clamp(0.0, 1.0)
}

pub fn uhlmann_oracle(a: &Dense, b: &Dense) -> f64 {
    let s = hermitian_fn(a, |x| x.max(0.0).sqrt());
    let inner = matmul(&matmul(&s, b), &s);
    hermitian_eigenvalues(&inner).iter().map(|l| l.max(0.0).sqrt()).sum::<f64>().clamp(0.0, 1.0)
}

/// Random density matrix `AA† / Tr(AA†)` of the given rank with Gaussian `A`.
pub fn random_density(rng: &mut ChaCha8Rng, n_qubits: usize, rank: usize) -> DensityMatrix {
    let dim = 1 << n_qubits;
    let a: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| (0..rank).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
        .collect();
    let mut m = CMatrix::from_fn(dim, |i, j| (0..rank).map(|k| a[i][k] * a[j][k].conj()).sum());
    let tr = m.trace().re;
    m = m.scale(1.0 / tr);
    // exact Hermitian symmetry
    let m = CMatrix::from_fn(dim, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    DensityMatrix::from_matrix(m).expect("valid random state")
}

/// Random state with rank drawn uniformly from 1..=dim.
pub fn random_state(rng: &mut ChaCha8Rng, n_qubits: usize) -> DensityMatrix {
    let rank = rng.random_range(1..=1usize << n_qubits);
    random_density(rng, n_qubits, rank)
}

/// Random gate list on `n` qubits with `n_params` rotation parameters in use.
pub fn random_gates(rng: &mut ChaCha8Rng, n: usize, len: usize) -> (Vec<Gate>, usize) {
    let mut gates = Vec::with_capacity(len);
    let mut n_params = 0;
    for _ in 0..len {
        let kind = if n > 1 { rng.random_range(0..4) } else { rng.random_range(0..3) };
        let target = rng.random_range(0..n);
        gates.push(match kind {
            0 => Gate::rx(target, n_params),
            1 => Gate::ry(target, n_params),
            2 => Gate::rz(target, n_params),
            _ => {
                let mut control = rng.random_range(0..n - 1);
                if control >= target {
                    control += 1;
                }
                Gate::cnot(control, target)
            }
        });
        if kind < 3 {
            n_params += 1;
        }
    }
    (gates, n_params)
}

pub fn random_angles(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

/// Worst violation of the three density-matrix invariants, by the oracle's eigensolver.
pub fn invariant_violation(rho: &DensityMatrix) -> f64 {
    let d = to_dense(rho.matrix());
    let herm = max_diff(&d, &dagger(&d));
    let tr = (trace(&d) - ONE).norm();
    let neg = hermitian_eigenvalues(&d).into_iter().fold(0.0f64, |acc, l| acc.max(-l));
    herm.max(tr).max(neg)
}
