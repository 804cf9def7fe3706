//! Two-qubit targets, processes, average gate fidelity and local equivalence.
//!
//! Processes are stored as 16×16 kernels in the two-qubit Pauli basis
//! `P_j = σ_{j1} ⊗ σ_{j2}`, `j = 4·j1 + j2`, `σ ∈ {I, X, Y, Z}`, with entries
//! `K_ij = ¼ tr(P_i ℰ(P_j))`.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, c, C64, I, ONE, ZERO};
use crate::ops::pauli;
use crate::optimize::{nelder_mead, SimplexOptions};

pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TwoQubitGate {
    matrix: Array2<C64>,
}

impl TwoQubitGate {
    pub fn new(matrix: Array2<C64>) -> Result<Self> {
        if matrix.dim() != (4, 4) {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: matrix.nrows(),
            });
        }
        let d = linalg::unitarity_defect(&matrix);
        if d > UNITARY_TOL {
            return Err(Error::NotUnitary(d));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dot(&self, other: &TwoQubitGate) -> TwoQubitGate {
        TwoQubitGate {
            matrix: self.matrix.dot(&other.matrix),
        }
    }
}

/// Transverse-exchange evolution at `Jt/ħ = phi`: identity on |00⟩, |11⟩ and
/// `[[cos φ, i sin φ], [i sin φ, cos φ]]` on {|01⟩, |10⟩}.
pub fn exchange_gate(phi: f64) -> TwoQubitGate {
    let (s, co) = phi.sin_cos();
    let mut m = linalg::identity(4);
    m[[1, 1]] = c(co);
    m[[2, 2]] = c(co);
    m[[1, 2]] = I * s;
    m[[2, 1]] = I * s;
    TwoQubitGate { matrix: m }
}

pub fn iswap() -> TwoQubitGate {
    exchange_gate(PI / 2.0)
}

pub fn sqrt_iswap() -> TwoQubitGate {
    exchange_gate(PI / 4.0)
}

/// `σ_{j1} ⊗ σ_{j2}` for Pauli-basis index `j = 4·j1 + j2`.
pub fn pauli2(j: usize) -> Array2<C64> {
    let b = pauli::basis();
    linalg::kron(&b[j / 4], &b[j % 4])
}

fn pauli2_all() -> Vec<Array2<C64>> {
    (0..16).map(pauli2).collect()
}

#[derive(Debug, Clone)]
pub struct TwoQubitProcess {
    pub kernel: Array2<C64>,
    /// Population lost from the retained computational subspace.
    pub completeness_defect: f64,
}

impl TwoQubitProcess {
    /// Kernel of a linear map given by its action on 4×4 operators.
    pub fn from_map(map: impl Fn(&Array2<C64>) -> Array2<C64>) -> Self {
        let ps = pauli2_all();
        let mut k = Array2::zeros((16, 16));
        for j in 0..16 {
            let out = map(&ps[j]);
            for i in 0..16 {
                k[[i, j]] = linalg::trace(&ps[i].dot(&out)) * 0.25;
            }
        }
        Self {
            kernel: k,
            completeness_defect: 0.0,
        }
    }

    /// From the images of matrix units, `images[a][b] = ℰ(|a⟩⟨b|)`.
    pub fn from_matrix_units(images: &[[Array2<C64>; 4]; 4], completeness_defect: f64) -> Self {
        let mut p = Self::from_map(|x| {
            let mut out = Array2::zeros((4, 4));
            for a in 0..4 {
                for b in 0..4 {
                    if x[[a, b]] != ZERO {
                        out.scaled_add(x[[a, b]], &images[a][b]);
                    }
                }
            }
            out
        });
        p.completeness_defect = completeness_defect;
        p
    }

    pub fn identity() -> Self {
        Self {
            kernel: linalg::identity(16),
            completeness_defect: 0.0,
        }
    }

    pub fn conjugation(u: &TwoQubitGate) -> Self {
        let ud = linalg::dagger(&u.matrix.view());
        Self::from_map(|x| u.matrix.dot(x).dot(&ud))
    }

    /// `X ↦ tr(X)·I/4`.
    pub fn depolarizing() -> Self {
        let mut k = Array2::zeros((16, 16));
        k[[0, 0]] = ONE;
        Self {
            kernel: k,
            completeness_defect: 0.0,
        }
    }

    pub fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        let ps = pauli2_all();
        let coeffs: Vec<C64> = ps.iter().map(|p| linalg::trace(&p.dot(x)) * 0.25).collect();
        let mut out = Array2::zeros((4, 4));
        for i in 0..16 {
            let mut ci = ZERO;
            for j in 0..16 {
                ci += self.kernel[[i, j]] * coeffs[j];
            }
            out.scaled_add(ci, &ps[i]);
        }
        out
    }

    /// Process followed by conjugation with `u`.
    pub fn then(&self, u: &TwoQubitGate) -> Self {
        let r = unitary_ptm(u).mapv(c);
        Self {
            kernel: r.dot(&self.kernel),
            completeness_defect: self.completeness_defect,
        }
    }

    /// Max deviation from `ℰ(X†) = ℰ(X)†`, i.e. imaginary part of the kernel.
    pub fn hermiticity_defect(&self) -> f64 {
        self.kernel.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Choi matrix `Σ |a⟩⟨b| ⊗ ℰ(|a⟩⟨b|)`.
    pub fn choi(&self) -> Array2<C64> {
        let mut j = Array2::zeros((16, 16));
        for a in 0..4 {
            for b in 0..4 {
                let mut e = Array2::zeros((4, 4));
                e[[a, b]] = ONE;
                let img = self.apply(&e);
                for x in 0..4 {
                    for y in 0..4 {
                        j[[4 * a + x, 4 * b + y]] = img[[x, y]];
                    }
                }
            }
        }
        j
    }

    /// Unitary closest to the dominant Kraus operator of the process.
    pub fn dominant_unitary(&self) -> Result<TwoQubitGate> {
        let choi = self.choi();
        let (_, v) = linalg::eigh(&choi)?;
        let top = v.column(15);
        // vec(K) ordering matches Choi row index 4a + x: K[x, a] = top[4a + x]
        let mut k = Array2::zeros((4, 4));
        for a in 0..4 {
            for x in 0..4 {
                k[[x, a]] = top[4 * a + x];
            }
        }
        let u = linalg::polar_unitary(&k)?;
        TwoQubitGate::new(u)
    }
}

/// Real Pauli transfer matrix `R_ij = ¼ tr(P_i U P_j U†)`.
pub fn unitary_ptm(u: &TwoQubitGate) -> Array2<f64> {
    let ps = pauli2_all();
    let ud = linalg::dagger(&u.matrix.view());
    let mut r = Array2::zeros((16, 16));
    for j in 0..16 {
        let img = u.matrix.dot(&ps[j]).dot(&ud);
        for i in 0..16 {
            r[[i, j]] = 0.25 * linalg::trace(&ps[i].dot(&img)).re;
        }
    }
    r
}

/// `F̄ = 1/5 + 1/80 Σ_{j,k} tr(U σ_j σ_k U† ℰ(σ_j σ_k))`, evaluated term by term.
pub fn average_gate_fidelity(process: &TwoQubitProcess, target: &TwoQubitGate) -> Result<f64> {
    if process.kernel.dim() != (16, 16) {
        return Err(Error::DimensionMismatch {
            expected: 16,
            got: process.kernel.nrows(),
        });
    }
    let ps = pauli2_all();
    let u = &target.matrix;
    let ud = linalg::dagger(&u.view());
    let mut sum = ZERO;
    for (j, p) in ps.iter().enumerate() {
        // ℰ(P_j) = Σ_i K_ij P_i
        let mut img = Array2::zeros((4, 4));
        for (i, q) in ps.iter().enumerate() {
            img.scaled_add(process.kernel[[i, j]], q);
        }
        sum += linalg::trace(&u.dot(p).dot(&ud).dot(&img));
    }
    if sum.im.abs() > 1e-10 * sum.norm().max(1.0) {
        log::warn!("average gate fidelity has imaginary residue {:.3e}", sum.im);
    }
    Ok(0.2 + sum.re / 80.0)
}

/// Same value as [`average_gate_fidelity`] from transfer matrices:
/// `1/5 + (1/20) Σ_ij R^U_ij K_ij`.
fn fidelity_from_ptm(kernel_re: &Array2<f64>, target_ptm: &Array2<f64>) -> f64 {
    let s: f64 = kernel_re.iter().zip(target_ptm.iter()).map(|(a, b)| a * b).sum();
    0.2 + s / 20.0
}

/// Rotation (SO(3)) of Bloch vectors induced by `Rz(a)·Ry(b)·Rz(g)`.
fn euler_rotation(a: f64, b: f64, g: f64) -> [[f64; 3]; 3] {
    let rz = |t: f64| {
        let (s, co) = t.sin_cos();
        [[co, -s, 0.0], [s, co, 0.0], [0.0, 0.0, 1.0]]
    };
    let ry = |t: f64| {
        let (s, co) = t.sin_cos();
        [[co, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, co]]
    };
    mul3(&mul3(&rz(a), &ry(b)), &rz(g))
}

fn mul3(x: &[[f64; 3]; 3], y: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

fn single_ptm(angles: &[f64]) -> [[f64; 4]; 4] {
    let r = euler_rotation(angles[0], angles[1], angles[2]);
    let mut m = [[0.0; 4]; 4];
    m[0][0] = 1.0;
    for i in 0..3 {
        for j in 0..3 {
            m[i + 1][j + 1] = r[i][j];
        }
    }
    m
}

fn local_ptm(a1: &[f64], a2: &[f64]) -> Array2<f64> {
    let (p, q) = (single_ptm(a1), single_ptm(a2));
    Array2::from_shape_fn((16, 16), |(i, j)| p[i / 4][j / 4] * q[i % 4][j % 4])
}

/// Single-qubit unitary `Rz(a)·Ry(b)·Rz(g)`.
pub fn euler_unitary(a: f64, b: f64, g: f64) -> Array2<C64> {
    let rz = |t: f64| ndarray::array![[(-I * t / 2.0).exp(), ZERO], [ZERO, (I * t / 2.0).exp()]];
    let (s, co) = (b / 2.0).sin_cos();
    let ry = ndarray::array![[c(co), c(-s)], [c(s), c(co)]];
    rz(a).dot(&ry).dot(&rz(g))
}

/// `(A1⊗A2)·target·(B1⊗B2)` for 12 Euler angles ordered A1, A2, B1, B2.
pub fn dressed_target(target: &TwoQubitGate, params: &[f64]) -> TwoQubitGate {
    let u = |k: usize| euler_unitary(params[3 * k], params[3 * k + 1], params[3 * k + 2]);
    let a = linalg::kron(&u(0), &u(1));
    let b = linalg::kron(&u(2), &u(3));
    TwoQubitGate {
        matrix: a.dot(&target.matrix).dot(&b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalFreedom {
    /// Local unitaries before and after the target (12 angles).
    PrePost,
    /// Local unitaries after the target only (6 angles).
    PostOnly,
}

#[derive(Debug, Clone)]
pub struct LocalOptOptions {
    pub starts: usize,
    pub seed: u64,
    pub freedom: LocalFreedom,
    pub simplex: SimplexOptions,
}

impl Default for LocalOptOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0x5eed_1a7e,
            freedom: LocalFreedom::PrePost,
            simplex: SimplexOptions {
                step: 0.4,
                f_tol: 1e-9,
                max_evals: 8000,
                restarts: 2,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct FidelityReport {
    pub raw_fidelity: f64,
    pub local_opt_fidelity: f64,
    /// A1, A2, B1, B2 Euler angles (B's are zero for post-only optimization).
    pub local_params: [f64; 12],
    /// Invariants of the process's dominant unitary.
    pub makhlin: [f64; 3],
    pub leakage: f64,
}

/// Objective evaluator caching the process kernel and target transfer matrix.
struct LocalObjective {
    kernel_t: Array2<f64>,
    target_ptm: Array2<f64>,
    freedom: LocalFreedom,
}

impl LocalObjective {
    fn new(process: &TwoQubitProcess, target: &TwoQubitGate, freedom: LocalFreedom) -> Self {
        Self {
            kernel_t: process.kernel.mapv(|z| z.re).reversed_axes().as_standard_layout().to_owned(),
            target_ptm: unitary_ptm(target),
            freedom,
        }
    }

    /// F̄ for the dressed target; `tr((R_A R_T R_B)^T K)`.
    fn fidelity(&self, x: &[f64]) -> f64 {
        let ra = local_ptm(&x[0..3], &x[3..6]);
        let rv = match self.freedom {
            LocalFreedom::PrePost => {
                let rb = local_ptm(&x[6..9], &x[9..12]);
                ra.dot(&self.target_ptm).dot(&rb)
            }
            LocalFreedom::PostOnly => ra.dot(&self.target_ptm),
        };
        // Σ_ij rv_ij K_ij with K stored transposed
        let k = self.kernel_t.t();
        fidelity_from_ptm(&k.to_owned(), &rv)
    }

    fn dim(&self) -> usize {
        match self.freedom {
            LocalFreedom::PrePost => 12,
            LocalFreedom::PostOnly => 6,
        }
    }
}

/// Result of one local optimization.
#[derive(Debug, Clone)]
pub struct LocalOptimum {
    pub fidelity: f64,
    pub params: Vec<f64>,
}

fn start_points(opts: &LocalOptOptions, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v = vec![vec![0.0; dim]];
    for _ in 1..opts.starts.max(1) {
        v.push((0..dim).map(|_| rng.random_range(-PI..PI)).collect());
    }
    v
}

/// Maximum of F̄ over local dressings, starting from the given points.
pub fn maximize_local_fidelity(
    process: &TwoQubitProcess,
    target: &TwoQubitGate,
    opts: &LocalOptOptions,
    warm_start: Option<&[f64]>,
) -> LocalOptimum {
    let obj = LocalObjective::new(process, target, opts.freedom);
    let dim = obj.dim();
    let mut starts = Vec::new();
    if let Some(w) = warm_start {
        starts.push(w[..dim].to_vec());
    }
    if opts.starts > 0 {
        starts.extend(start_points(opts, dim));
    }
    let mut best: Option<LocalOptimum> = None;
    for s in starts {
        let mut f = |x: &[f64]| -obj.fidelity(x);
        let m = nelder_mead(&mut f, &s, &opts.simplex);
        let cand = LocalOptimum {
            fidelity: -m.f,
            params: m.x,
        };
        // ties keep the earlier start
        if best.as_ref().map_or(true, |b| cand.fidelity > b.fidelity) {
            best = Some(cand);
        }
    }
    let mut best = best.expect("at least one start");
    best.params.resize(12, 0.0);
    best
}

pub fn optimize_local_ops(process: &TwoQubitProcess, target: &TwoQubitGate) -> Result<FidelityReport> {
    optimize_local_ops_with(process, target, &LocalOptOptions::default(), None)
}

pub fn optimize_local_ops_with(
    process: &TwoQubitProcess,
    target: &TwoQubitGate,
    opts: &LocalOptOptions,
    warm_start: Option<&[f64]>,
) -> Result<FidelityReport> {
    let raw = average_gate_fidelity(process, target)?;
    let best = maximize_local_fidelity(process, target, opts, warm_start);
    let (fid, params) = if best.fidelity >= raw {
        (best.fidelity, best.params)
    } else {
        (raw, vec![0.0; 12])
    };
    let makhlin = match process.dominant_unitary() {
        Ok(u) => makhlin_invariants(&u)?,
        Err(_) => [f64::NAN; 3],
    };
    let mut local_params = [0.0; 12];
    local_params.copy_from_slice(&params[..12]);
    Ok(FidelityReport {
        raw_fidelity: raw,
        local_opt_fidelity: fid,
        local_params,
        makhlin,
        leakage: process.completeness_defect,
    })
}

fn magic_basis() -> Array2<C64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    ndarray::array![
        [c(r), ZERO, ZERO, I * r],
        [ZERO, I * r, c(r), ZERO],
        [ZERO, I * r, c(-r), ZERO],
        [c(r), ZERO, ZERO, -I * r]
    ]
}

/// Local invariants `(Re G1, Im G1, G2)` computed in the magic basis.
pub fn makhlin_invariants(u: &TwoQubitGate) -> Result<[f64; 3]> {
    let d = linalg::unitarity_defect(&u.matrix);
    if d > 1e-8 {
        return Err(Error::NotUnitary(d));
    }
    let q = magic_basis();
    let mb = linalg::dagger(&q.view()).dot(&u.matrix).dot(&q);
    let m = mb.t().dot(&mb);
    let tr = linalg::trace(&m);
    let tr2 = linalg::trace(&m.dot(&m));
    let det = linalg::det(&u.matrix);
    let g1 = tr * tr / (det * 16.0);
    let g2 = (tr * tr - tr2) / (det * 4.0);
    Ok([g1.re, g1.im, g2.re])
}

/// Random single-qubit unitary from uniformly drawn Euler angles.
pub fn random_local<R: Rng>(rng: &mut R) -> Array2<C64> {
    let u = euler_unitary(
        rng.random_range(-PI..PI),
        rng.random_range(0.0..PI),
        rng.random_range(-PI..PI),
    );
    let phase = (I * rng.random_range(-PI..PI)).exp();
    u.mapv(|z| z * phase)
}

pub fn vec_c(v: &[f64]) -> Array1<C64> {
    Array1::from(v.iter().map(|&x| c(x)).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn rz(t: f64) -> Array2<C64> {
        euler_unitary(t, 0.0, 0.0)
    }

    #[test]
    fn iswap_action_and_powers() {
        let u = iswap();
        let ket01 = vec_c(&[0.0, 1.0, 0.0, 0.0]);
        let out = u.matrix().dot(&ket01);
        assert!((out[2] - I).norm() < 1e-15);
        let s = sqrt_iswap();
        assert!(max_abs_diff(s.dot(&s).matrix(), u.matrix()) < 1e-12);
        let u4 = u.dot(&u).dot(&u).dot(&u);
        assert!(max_abs_diff(u4.matrix(), &linalg::identity(4)) < 1e-12);
    }

    #[test]
    fn fidelity_of_identity_and_conjugations() {
        let id = TwoQubitGate::new(linalg::identity(4)).unwrap();
        let f = average_gate_fidelity(&TwoQubitProcess::identity(), &id).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let u = TwoQubitGate::new(
                linalg::kron(&random_local(&mut rng), &random_local(&mut rng)).dot(iswap().matrix()),
            )
            .unwrap();
            let f = average_gate_fidelity(&TwoQubitProcess::conjugation(&u), &u).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_of_depolarizing_is_quarter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let u = TwoQubitGate::new(
                linalg::kron(&random_local(&mut rng), &random_local(&mut rng)).dot(sqrt_iswap().matrix()),
            )
            .unwrap();
            let f = average_gate_fidelity(&TwoQubitProcess::depolarizing(), &u).unwrap();
            assert!((f - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn ptm_shortcut_matches_literal_sum() {
        let proc = TwoQubitProcess::conjugation(&exchange_gate(0.37));
        let target = sqrt_iswap();
        let obj = LocalObjective::new(&proc, &target, LocalFreedom::PrePost);
        let x = [0.1, -0.4, 0.9, 1.3, 0.2, -2.0, 0.5, 0.6, -0.7, 0.05, 2.2, -1.1];
        let direct = average_gate_fidelity(&proc, &dressed_target(&target, &x)).unwrap();
        assert!((obj.fidelity(&x) - direct).abs() < 1e-12);
    }

    #[test]
    fn process_from_matrix_units_matches_conjugation() {
        let u = exchange_gate(0.81);
        let ud = linalg::dagger(&u.matrix().view());
        let images: [[Array2<C64>; 4]; 4] = std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let mut e = Array2::zeros((4, 4));
                e[[a, b]] = ONE;
                u.matrix().dot(&e).dot(&ud)
            })
        });
        let p = TwoQubitProcess::from_matrix_units(&images, 0.0);
        let q = TwoQubitProcess::conjugation(&u);
        assert!(max_abs_diff(&p.kernel, &q.kernel) < 1e-14);
        assert!(p.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn local_frame_recovered() {
        let lz = linalg::kron(&rz(0.7), &rz(-1.9));
        let u = TwoQubitGate::new(lz.dot(iswap().matrix())).unwrap();
        let rep = optimize_local_ops(&TwoQubitProcess::conjugation(&u), &iswap()).unwrap();
        assert!(rep.local_opt_fidelity > 1.0 - 1e-6, "{}", rep.local_opt_fidelity);
        assert!(rep.local_opt_fidelity >= rep.raw_fidelity - 1e-9);
    }

    #[test]
    fn iswap_not_locally_equivalent_to_sqrt_iswap() {
        let rep = optimize_local_ops(&TwoQubitProcess::conjugation(&iswap()), &sqrt_iswap()).unwrap();
        assert!(rep.local_opt_fidelity < 0.99, "{}", rep.local_opt_fidelity);
        let a = makhlin_invariants(&iswap()).unwrap();
        let b = makhlin_invariants(&sqrt_iswap()).unwrap();
        assert!((a[0] - b[0]).abs() > 0.1);
    }

    #[test]
    fn post_only_never_beats_pre_post() {
        let proc = TwoQubitProcess::conjugation(&exchange_gate(0.6));
        let full = maximize_local_fidelity(&proc, &sqrt_iswap(), &LocalOptOptions::default(), None);
        let post = maximize_local_fidelity(
            &proc,
            &sqrt_iswap(),
            &LocalOptOptions {
                freedom: LocalFreedom::PostOnly,
                ..Default::default()
            },
            None,
        );
        assert!(post.fidelity <= full.fidelity + 1e-9);
    }

    #[test]
    fn more_restarts_never_lower_value() {
        let proc = TwoQubitProcess::conjugation(&exchange_gate(1.1));
        let few = maximize_local_fidelity(
            &proc,
            &sqrt_iswap(),
            &LocalOptOptions {
                starts: 2,
                ..Default::default()
            },
            None,
        );
        let many = maximize_local_fidelity(&proc, &sqrt_iswap(), &LocalOptOptions::default(), None);
        assert!(many.fidelity >= few.fidelity);
    }

    #[test]
    fn makhlin_identity_class() {
        let id = makhlin_invariants(&TwoQubitGate::new(linalg::identity(4)).unwrap()).unwrap();
        let zz = makhlin_invariants(&TwoQubitGate::new(linalg::kron(&rz(0.3), &rz(1.2))).unwrap()).unwrap();
        for k in 0..3 {
            assert!((id[k] - zz[k]).abs() < 1e-12);
        }
        assert!((id[0] - 1.0).abs() < 1e-12 && (id[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn makhlin_rejects_non_unitary() {
        let bad = TwoQubitGate {
            matrix: linalg::identity(4).mapv(|z| z * 1.1),
        };
        assert!(makhlin_invariants(&bad).is_err());
    }

    #[test]
    fn dominant_unitary_of_conjugation() {
        let u = exchange_gate(0.4);
        let w = TwoQubitProcess::conjugation(&u).dominant_unitary().unwrap();
        let overlap = linalg::trace(&linalg::dagger(&w.matrix().view()).dot(u.matrix())).norm() / 4.0;
        assert!((overlap - 1.0).abs() < 1e-10);
    }
}
