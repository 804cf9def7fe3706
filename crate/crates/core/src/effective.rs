//! Schrieffer-Wolff reduction, dressed spin splittings and effective couplings.
//!
//! Primed quantities (ω'_r, ω'_z, g'_x, g'_z) are defined operationally: the
//! single-DQD problem is block diagonalized to second order with the excited
//! orbital block eliminated, and the resulting spin⊗photon operator is read
//! off in a spin frame that diagonalizes its zero-photon block.

use ndarray::{Array1, Array2};

use crate::dynamics;
use crate::error::{Error, Result};
use crate::linalg::{self, c, C64, ZERO};
use crate::model::{
    self, system_space, DqdParams, OrbitalBasis, QubitKind, SystemParams, DOWN, ORBITAL_GROUND, UP,
};
use crate::ops::{HilbertSpace, Operator};

/// Cross-block degeneracy guard, GHz.
pub const GAP_TOL: f64 = 1e-3;
/// Minimum weight of a matched eigenstate on its bare manifold.
pub const OVERLAP_MIN: f64 = 0.5;
/// Off-block elements below this (GHz) do not count as coupling two levels.
const COUPLING_FLOOR: f64 = 1e-9;
/// Low eigenstates with less weight than this on the relevant low states are
/// spectators; a near degeneracy of a spectator is excluded from the generator.
const SPECTATOR_WEIGHT: f64 = 1e-4;
/// Photon cutoff used for the single-DQD dressing problem.
const DRESSING_PHOTONS: usize = 4;

#[derive(Debug, Clone)]
pub struct SwResult {
    /// Effective Hamiltonian on the low block, in the coordinates of `low_basis`.
    pub h_effective: Array2<C64>,
    /// Orthonormal columns spanning the low block in the full space.
    pub low_basis: Array2<C64>,
    /// Largest generator element `|S_mn|`.
    pub generator_norm: f64,
    /// Smallest unperturbed gap between coupled low and high levels, GHz.
    pub block_gap: f64,
}

/// Orthonormal bases of the range and kernel of an orthogonal projector.
/// A diagonal 0/1 projector yields unit vectors in index order.
fn projector_bases(p: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let n = p.nrows();
    let is_diag = p
        .indexed_iter()
        .all(|((i, j), z)| if i == j { (z.re.round() - z.re).abs() < 1e-12 && z.im.abs() < 1e-12 } else { z.norm() < 1e-14 });
    let (low, high): (Vec<Array1<C64>>, Vec<Array1<C64>>) = if is_diag {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for i in 0..n {
            let mut e = Array1::zeros(n);
            e[i] = c(1.0);
            if p[[i, i]].re > 0.5 {
                lo.push(e);
            } else {
                hi.push(e);
            }
        }
        (lo, hi)
    } else {
        let (w, v) = linalg::eigh(p)?;
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for (k, &lam) in w.iter().enumerate() {
            if (lam - 1.0).abs() < 1e-8 {
                lo.push(v.column(k).to_owned());
            } else if lam.abs() < 1e-8 {
                hi.push(v.column(k).to_owned());
            } else {
                return Err(Error::InvalidParameter(format!(
                    "low projector has eigenvalue {lam}, not 0 or 1"
                )));
            }
        }
        (lo, hi)
    };
    if low.is_empty() {
        return Err(Error::InvalidParameter("low projector is zero".into()));
    }
    let stack = |cols: &[Array1<C64>]| {
        let mut m = Array2::zeros((n, cols.len()));
        for (k, col) in cols.iter().enumerate() {
            m.column_mut(k).assign(col);
        }
        m
    };
    Ok((stack(&low), stack(&high)))
}

/// Second-order block diagonalization with `H0` the block-diagonal part of
/// `H` relative to the projector and `V` the off-block remainder.
pub fn sw_block_diagonalize(h: &Operator, low_projector: &Operator) -> Result<SwResult> {
    h.check_hermitian()?;
    if low_projector.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: low_projector.dim(),
        });
    }
    let zero = Array2::zeros(h.matrix.raw_dim());
    sw_core(&h.matrix, &zero, &low_projector.matrix, None)
}

/// As [`sw_block_diagonalize`], with the degeneracy guard applied only to low
/// eigenstates that overlap the `relevant` low-basis columns. Near-degenerate
/// pairs involving other low states are left out of the generator.
pub fn sw_block_diagonalize_relevant(h: &Operator, low_projector: &Operator, relevant: &[usize]) -> Result<SwResult> {
    h.check_hermitian()?;
    if low_projector.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: low_projector.dim(),
        });
    }
    let zero = Array2::zeros(h.matrix.raw_dim());
    sw_core(&h.matrix, &zero, &low_projector.matrix, Some(relevant))
}

/// Second-order block diagonalization for an explicit split `H = H0 + V`.
/// Off-block parts of `h0` are moved into the perturbation; the block-diagonal
/// part of `v` is kept at first order, so the result is
/// `P(H0 + V_d + ½[S, V_od])P`.
pub fn sw_block_diagonalize_split(h0: &Array2<C64>, v: &Array2<C64>, low_projector: &Array2<C64>) -> Result<SwResult> {
    for m in [h0, v] {
        let d = linalg::hermiticity_defect(m);
        if d > crate::ops::HERMITIAN_TOL {
            return Err(Error::NotHermitian(d));
        }
    }
    sw_core(h0, v, low_projector, None)
}

fn sw_core(h0: &Array2<C64>, v: &Array2<C64>, projector: &Array2<C64>, relevant: Option<&[usize]>) -> Result<SwResult> {
    let (bl, bh) = projector_bases(projector)?;
    let (nl, nh) = (bl.ncols(), bh.ncols());
    let bld = linalg::dagger(&bl.view());
    let bhd = linalg::dagger(&bh.view());

    let h0_ll = bld.dot(h0).dot(&bl);
    let h0_hh = bhd.dot(h0).dot(&bh);
    let v_ll = bld.dot(v).dot(&bl);
    // Off-block coupling collects both the off-block part of h0 and of v.
    let v_lh = bld.dot(&(h0 + v)).dot(&bh);

    let (el, ul) = linalg::eigh(&h0_ll)?;
    let (eh, uh) = if nh > 0 {
        linalg::eigh(&h0_hh)?
    } else {
        (Array1::zeros(0), Array2::zeros((0, 0)))
    };
    let w = linalg::dagger(&ul.view()).dot(&v_lh).dot(&uh);
    let spectator: Vec<bool> = match relevant {
        Some(rel) => (0..nl)
            .map(|l| rel.iter().map(|&r| ul[[r, l]].norm_sqr()).sum::<f64>() < SPECTATOR_WEIGHT)
            .collect(),
        None => vec![false; nl],
    };

    let mut gap_coupled = f64::INFINITY;
    let mut gap_all = f64::INFINITY;
    let mut gen_norm: f64 = 0.0;
    let mut s_lh = Array2::<C64>::zeros((nl, nh));
    for l in 0..nl {
        for hh in 0..nh {
            let gap = el[l] - eh[hh];
            gap_all = gap_all.min(gap.abs());
            if w[[l, hh]].norm() > COUPLING_FLOOR {
                if gap.abs() < GAP_TOL && spectator[l] {
                    log::debug!("spectator near degeneracy {:.3e} GHz left out of the generator", gap.abs());
                    continue;
                }
                gap_coupled = gap_coupled.min(gap.abs());
                if gap.abs() < GAP_TOL {
                    return Err(Error::Degenerate {
                        gap: gap.abs(),
                        tol: GAP_TOL,
                    });
                }
                let sv = w[[l, hh]] / gap;
                gen_norm = gen_norm.max(sv.norm());
                s_lh[[l, hh]] = sv;
            }
        }
    }
    // ½[S, V]_{ll'} = ½ Σ_h W_lh W*_l'h (1/(E_l − E_h) + 1/(E_l' − E_h))
    let mut corr = Array2::<C64>::zeros((nl, nl));
    for l in 0..nl {
        for lp in 0..nl {
            let mut acc = ZERO;
            for hh in 0..nh {
                let a = s_lh[[l, hh]] * w[[lp, hh]].conj();
                let b = w[[l, hh]] * s_lh[[lp, hh]].conj();
                acc += a + b;
            }
            corr[[l, lp]] = acc * 0.5;
        }
    }
    let mut heff_eig = Array2::from_diag(&el.mapv(c));
    heff_eig += &corr;
    let uld = linalg::dagger(&ul.view());
    let mut heff = ul.dot(&heff_eig).dot(&uld);
    heff += &v_ll;
    // symmetrize against rounding
    let hd = linalg::dagger(&heff.view());
    heff = (&heff + &hd).mapv(|z| z * 0.5);
    Ok(SwResult {
        h_effective: heff,
        low_basis: bl,
        generator_norm: gen_norm,
        block_gap: if gap_coupled.is_finite() { gap_coupled } else { gap_all },
    })
}

/// Dressed counterparts of the bare computational states, found by exact
/// diagonalization.
///
/// Bare states `|{q}, env ground⟩` are grouped by excitation number (count of
/// qubit digits equal to 0); each group of size m is matched to the m
/// eigenstates with the largest weight on it and represented by the
/// direct-rotation effective Hamiltonian `U diag(E) U†`, `U = polar(B†W)`.
/// For a single-state group this is the matched eigenvalue itself.
#[derive(Debug, Clone)]
pub struct DressedLevels {
    pub n_qubits: usize,
    /// Full-space indices of the bare computational states, qubit-digit order.
    pub bare_indices: Vec<usize>,
    /// Effective Hamiltonian on the computational labels, block diagonal in
    /// excitation number, GHz.
    pub h_eff: Array2<C64>,
    /// Columns: dressed partner of each bare state (`W U†`).
    pub dressed_basis: Array2<C64>,
    /// Smallest weight of a matched eigenstate on its bare group.
    pub min_weight: f64,
}

impl DressedLevels {
    /// Dressed splitting of qubit `i`, averaged over the other qubits' states.
    pub fn splitting(&self, i: usize) -> f64 {
        let n = self.n_qubits;
        let bit = 1usize << (n - 1 - i);
        let mut acc = 0.0;
        let mut count = 0;
        for k in 0..(1usize << n) {
            if k & bit == 0 {
                // digit 0 (up) minus digit 1 (down)
                acc += self.h_eff[[k, k]].re - self.h_eff[[k | bit, k | bit]].re;
                count += 1;
            }
        }
        acc / count as f64
    }

    pub fn splittings(&self) -> Vec<f64> {
        (0..self.n_qubits).map(|i| self.splitting(i)).collect()
    }

    /// Exchange `J` read from the flip-flop element, `H_eff(01, 10) = −J`.
    pub fn exchange(&self) -> f64 {
        if self.n_qubits != 2 {
            return 0.0;
        }
        -self.h_eff[[1, 2]].re
    }
}

fn excitation(k: usize, n: usize) -> usize {
    (0..n).filter(|b| k & (1 << b) == 0).count()
}

/// Full-space index of computational state `k` (bit `n-1-i` = digit of qubit i).
pub fn computational_index(space: &HilbertSpace, n_dqd: usize, kind: QubitKind, k: usize) -> usize {
    let bits: Vec<usize> = (0..n_dqd).map(|i| (k >> (n_dqd - 1 - i)) & 1).collect();
    let mut digits = Vec::with_capacity(space.factors().len());
    match kind {
        QubitKind::Spin => {
            digits.extend(&bits);
            digits.extend(std::iter::repeat(ORBITAL_GROUND).take(n_dqd));
        }
        QubitKind::Charge => digits.extend(&bits),
    }
    digits.push(0);
    space.index_of(&digits)
}

/// Dressed levels of an eigenbasis-form Hamiltonian matrix.
pub fn dressed_levels_of(h: &Array2<C64>, space: &HilbertSpace, n_dqd: usize, kind: QubitKind) -> Result<DressedLevels> {
    let (w, v) = linalg::eigh_auto(h)?;
    dressed_levels_from_eig(&w, &v, space, n_dqd, kind)
}

/// As [`dressed_levels_of`] from a precomputed eigendecomposition.
pub fn dressed_levels_from_eig(
    w: &Array1<f64>,
    v: &Array2<C64>,
    space: &HilbertSpace,
    n_dqd: usize,
    kind: QubitKind,
) -> Result<DressedLevels> {
    let nq = 1usize << n_dqd;
    let bare: Vec<usize> = (0..nq).map(|k| computational_index(space, n_dqd, kind, k)).collect();

    let mut taken = vec![false; w.len()];
    let mut h_eff = Array2::zeros((nq, nq));
    let mut dressed = Array2::zeros((v.nrows(), nq));
    let mut min_weight = f64::INFINITY;
    for exc in 0..=n_dqd {
        let group: Vec<usize> = (0..nq).filter(|&k| excitation(k, n_dqd) == exc).collect();
        let m = group.len();
        let mut weights: Vec<(usize, f64)> = (0..w.len())
            .map(|e| (e, group.iter().map(|&k| v[[bare[k], e]].norm_sqr()).sum()))
            .collect();
        weights.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let picks: Vec<(usize, f64)> = weights[..m].to_vec();
        for &(e, wt) in &picks {
            if taken[e] {
                return Err(Error::Matching(format!(
                    "eigenstate {e} is the best match for two bare manifolds"
                )));
            }
            if wt < OVERLAP_MIN {
                return Err(Error::Matching(format!(
                    "best overlap {wt:.3} with a bare low-energy manifold is below {OVERLAP_MIN}"
                )));
            }
            taken[e] = true;
            min_weight = min_weight.min(wt);
        }
        let mut picks_sorted = picks.clone();
        picks_sorted.sort_by_key(|p| p.0);
        // M = B†W on the group
        let mut mm = Array2::zeros((m, m));
        for (a, &k) in group.iter().enumerate() {
            for (b, &(e, _)) in picks_sorted.iter().enumerate() {
                mm[[a, b]] = v[[bare[k], e]];
            }
        }
        let u = linalg::polar_unitary(&mm)?;
        let ud = linalg::dagger(&u.view());
        let e_diag = Array2::from_diag(&Array1::from(picks_sorted.iter().map(|&(e, _)| c(w[e])).collect::<Vec<_>>()));
        let hb = u.dot(&e_diag).dot(&ud);
        for (a, &k) in group.iter().enumerate() {
            for (b, &kp) in group.iter().enumerate() {
                h_eff[[k, kp]] = hb[[a, b]];
            }
        }
        // dressed partners W U†
        let mut wsel = Array2::zeros((v.nrows(), m));
        for (b, &(e, _)) in picks_sorted.iter().enumerate() {
            wsel.column_mut(b).assign(&v.column(e));
        }
        let part = wsel.dot(&ud);
        for (a, &k) in group.iter().enumerate() {
            dressed.column_mut(k).assign(&part.column(a));
        }
    }
    Ok(DressedLevels {
        n_qubits: n_dqd,
        bare_indices: bare,
        h_eff,
        dressed_basis: dressed,
        min_weight,
    })
}

pub fn dressed_levels(params: &SystemParams, kind: QubitKind) -> Result<DressedLevels> {
    let h = model::build_hamiltonian_for(params, OrbitalBasis::Eigen, kind)?;
    dressed_levels_of(&h.matrix, &h.space, params.n_dqd(), kind)
}

/// Dressed spin splittings ω''_z i, GHz.
pub fn dressed_splittings_numeric(params: &SystemParams) -> Result<Vec<f64>> {
    Ok(dressed_levels(params, QubitKind::Spin)?.splittings())
}

/// Second-order dressing of one DQD's spin and the resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDressing {
    pub omega_z_prime: f64,
    pub g_x_prime: f64,
    pub g_z_prime: f64,
    /// Resonator frequency shift caused by this DQD alone, GHz.
    pub omega_r_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DressedParams {
    pub omega_r_prime: f64,
    pub dqds: Vec<SpinDressing>,
}

/// Primed quantities for DQD `dqd_index` coupled alone to the resonator.
pub fn intermediate_dressing(params: &SystemParams, dqd_index: usize) -> Result<DressedParams> {
    let d = *params.dqds.get(dqd_index).ok_or_else(|| {
        Error::InvalidParameter(format!("no DQD with index {dqd_index}"))
    })?;
    let sd = single_dressing(params.omega_r, &d, params.n_photon_max.min(DRESSING_PHOTONS))?;
    Ok(DressedParams {
        omega_r_prime: params.omega_r + sd.omega_r_shift,
        dqds: vec![sd],
    })
}

/// Primed quantities for every DQD; resonator shifts from the DQDs add.
pub fn system_dressing(params: &SystemParams) -> Result<DressedParams> {
    let n_ph = params.n_photon_max.min(DRESSING_PHOTONS);
    let dqds = params
        .dqds
        .iter()
        .map(|d| single_dressing(params.omega_r, d, n_ph))
        .collect::<Result<Vec<_>>>()?;
    let shift: f64 = dqds.iter().map(|s| s.omega_r_shift).sum();
    Ok(DressedParams {
        omega_r_prime: params.omega_r + shift,
        dqds,
    })
}

fn single_dressing(omega_r: f64, d: &DqdParams, n_ph: usize) -> Result<SpinDressing> {
    if n_ph < 2 {
        return Err(Error::InvalidParameter(
            "dressing needs at least two photons in the truncation".into(),
        ));
    }
    let sp = SystemParams {
        omega_r,
        dqds: vec![*d],
        n_photon_max: n_ph,
    };
    let h = model::build_hamiltonian(&sp, OrbitalBasis::Eigen)?;
    let space = h.space.clone();
    let mut p = Operator::zeros(space.clone());
    for s in 0..2 {
        for n in 0..=n_ph {
            let i = space.index_of(&[s, ORBITAL_GROUND, n]);
            p.matrix[[i, i]] = c(1.0);
        }
    }
    // low_basis is unit vectors in index order: (s, n) with n fastest
    let idx = |s: usize, n: usize| s * (n_ph + 1) + n;
    let relevant = [idx(UP, 0), idx(UP, 1), idx(DOWN, 0), idx(DOWN, 1)];
    let sw = sw_block_diagonalize_relevant(&h, &p, &relevant)?;
    let hp = &sw.h_effective;

    // spin frame diagonalizing the zero-photon block, chosen closest to identity
    let block0 = ndarray::array![
        [hp[[idx(UP, 0), idx(UP, 0)]], hp[[idx(UP, 0), idx(DOWN, 0)]]],
        [hp[[idx(DOWN, 0), idx(UP, 0)]], hp[[idx(DOWN, 0), idx(DOWN, 0)]]]
    ];
    let (e0, v0) = linalg::eigh(&block0)?;
    // eigh is ascending: column 1 is the up-like (higher) state for ω_z > 0
    let w = if d.omega_z >= 0.0 {
        ndarray::array![[v0[[0, 1]], v0[[0, 0]]], [v0[[1, 1]], v0[[1, 0]]]]
    } else {
        v0.clone()
    };
    let u = linalg::polar_unitary(&w)?;
    let frame = linalg::kron(&u, &linalg::identity(n_ph + 1));
    let hr = linalg::dagger(&frame.view()).dot(hp).dot(&frame);

    let omega_z_prime = if d.omega_z >= 0.0 { e0[1] - e0[0] } else { e0[0] - e0[1] };
    let omega_r_prime = 0.5
        * ((hr[[idx(UP, 1), idx(UP, 1)]] - hr[[idx(UP, 0), idx(UP, 0)]]).re
            + (hr[[idx(DOWN, 1), idx(DOWN, 1)]] - hr[[idx(DOWN, 0), idx(DOWN, 0)]]).re);
    let g_x_prime = 0.5 * (hr[[idx(UP, 0), idx(DOWN, 1)]].re + hr[[idx(DOWN, 0), idx(UP, 1)]].re);
    let g_z_prime = 0.5 * (hr[[idx(UP, 0), idx(UP, 1)]].re - hr[[idx(DOWN, 0), idx(DOWN, 1)]].re);
    Ok(SpinDressing {
        omega_z_prime,
        g_x_prime,
        g_z_prime,
        omega_r_shift: omega_r_prime - omega_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTwoSpin {
    pub omega_z1_dd: f64,
    pub omega_z2_dd: f64,
    pub j_coupling: f64,
    pub delta: f64,
}

fn pole_check(omega_r: f64, omega_z: f64) -> Result<()> {
    let gap = (omega_r - omega_z).abs();
    if gap < GAP_TOL {
        return Err(Error::ResonancePole(gap));
    }
    Ok(())
}

/// Transverse exchange from primed quantities, GHz.
pub fn j_from_dressing(dr: &DressedParams) -> Result<f64> {
    if dr.dqds.len() != 2 {
        return Err(Error::InvalidParameter("exchange needs exactly two DQDs".into()));
    }
    let wr = dr.omega_r_prime;
    let (a, b) = (&dr.dqds[0], &dr.dqds[1]);
    pole_check(wr, a.omega_z_prime)?;
    pole_check(wr, b.omega_z_prime)?;
    Ok(wr * a.g_x_prime * b.g_x_prime
        * (1.0 / (wr * wr - a.omega_z_prime.powi(2)) + 1.0 / (wr * wr - b.omega_z_prime.powi(2))))
}

/// Transverse exchange with ω''_z from exact diagonalization.
pub fn analytic_effective(params: &SystemParams) -> Result<EffectiveTwoSpin> {
    if params.n_dqd() != 2 {
        return Err(Error::InvalidParameter("analytic_effective needs exactly two DQDs".into()));
    }
    let dr = system_dressing(params)?;
    let j = j_from_dressing(&dr)?;
    let w = dressed_splittings_numeric(params)?;
    Ok(EffectiveTwoSpin {
        omega_z1_dd: w[0],
        omega_z2_dd: w[1],
        j_coupling: j,
        delta: w[1] - w[0],
    })
}

/// ω''_z of DQD `i` from the primed quantities: the photon-mediated
/// self-energy `−2 g'_x² ω'_z / (ω'_r² − ω'_z²)` added to ω'_z.
pub fn analytic_dressed_splitting(dr: &DressedParams, i: usize) -> Result<f64> {
    let s = dr
        .dqds
        .get(i)
        .ok_or_else(|| Error::InvalidParameter(format!("no DQD with index {i}")))?;
    let wr = dr.omega_r_prime;
    pole_check(wr, s.omega_z_prime)?;
    let wz = s.omega_z_prime;
    Ok(wz - 2.0 * s.g_x_prime.powi(2) * wz / (wr * wr - wz * wz))
}

/// Multi-spin effective Hamiltonian
/// `Σ ½ω''_i σ_z i − Σ_{i≠j} ω'_r (g'_xj/(ω'_r²−ω'_zj²) σ_x j + g'_zj/ω'_r² σ_z j)(g'_xi σ_x i + g'_zi σ_z i)`.
pub fn effective_spin_hamiltonian(omega_dd: &[f64], dr: &DressedParams) -> Result<Array2<C64>> {
    let n = omega_dd.len();
    if dr.dqds.len() != n || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dr.dqds.len(),
        });
    }
    let space = HilbertSpace::new((0..n).map(|i| (model::spin_label(i), 2)))?;
    let op = |m: Array2<C64>, i: usize| crate::ops::embed(&m, &space, &model::spin_label(i)).map(|o| o.matrix);
    let wr = dr.omega_r_prime;
    let mut h = Array2::zeros((space.dim(), space.dim()));
    for i in 0..n {
        h.scaled_add(c(0.5 * omega_dd[i]), &op(crate::ops::pauli::z(), i)?);
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (si, sj) = (&dr.dqds[i], &dr.dqds[j]);
            pole_check(wr, sj.omega_z_prime)?;
            let left = op(crate::ops::pauli::x(), j)?.mapv(|z| z * (sj.g_x_prime / (wr * wr - sj.omega_z_prime.powi(2))))
                + op(crate::ops::pauli::z(), j)?.mapv(|z| z * (sj.g_z_prime / (wr * wr)));
            let right = op(crate::ops::pauli::x(), i)?.mapv(|z| z * si.g_x_prime)
                + op(crate::ops::pauli::z(), i)?.mapv(|z| z * si.g_z_prime);
            h.scaled_add(c(-wr), &left.dot(&right));
        }
    }
    Ok(h)
}

/// Result of the oscillation analysis behind [`j_numeric`].
#[derive(Debug, Clone)]
pub struct JFit {
    /// |J|/h, GHz.
    pub j: f64,
    /// Time of the first transition maximum, ns.
    pub t_peak: f64,
    /// Height of the first maximum.
    pub p_peak: f64,
    /// First-lobe height relative to the global maximum; values well below 1 indicate beating.
    pub first_lobe_ratio: f64,
}

/// Grid step for the transition-probability scan, ns.
pub const J_SCAN_STEP: f64 = 0.25;

/// |J|/h from the first maximum of `P(↑↓ → ↓↑)` under the full Hamiltonian.
pub fn j_numeric(params: &SystemParams, t_max: f64) -> Result<f64> {
    Ok(j_numeric_fit(params, t_max)?.j)
}

pub fn j_numeric_fit(params: &SystemParams, t_max: f64) -> Result<JFit> {
    if params.n_dqd() != 2 {
        return Err(Error::InvalidParameter("j_numeric needs exactly two DQDs".into()));
    }
    let n = (t_max / J_SCAN_STEP).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * J_SCAN_STEP).collect();
    let p = dynamics::transition_probability(params, &[UP, DOWN], &[DOWN, UP], &grid)?;
    fit_first_peak(&grid, &p)
}

/// Locate the first lobe of a `sin²`-like series. The peak time is the
/// midpoint of the half-height crossings around the first sample reaching
/// 90% of the global maximum, which is insensitive to small fast ripples.
pub fn fit_first_peak(t: &[f64], p: &[f64]) -> Result<JFit> {
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    if pmax < 1e-4 {
        return Ok(JFit {
            j: 0.0,
            t_peak: f64::INFINITY,
            p_peak: pmax,
            first_lobe_ratio: 1.0,
        });
    }
    let half = 0.5 * pmax;
    let i90 = p.iter().position(|&x| x >= 0.9 * pmax).expect("maximum exists");
    let mut up = None;
    for k in (1..=i90).rev() {
        if p[k - 1] < half && p[k] >= half {
            up = Some(k);
            break;
        }
    }
    let mut down = None;
    for k in i90..p.len() - 1 {
        if p[k] >= half && p[k + 1] < half {
            down = Some(k);
            break;
        }
    }
    let (Some(ku), Some(kd)) = (up, down) else {
        return Err(Error::Fit(
            "no complete transition lobe inside the time window".into(),
        ));
    };
    let cross = |k: usize| t[k] + (half - p[k]) / (p[k + 1] - p[k]) * (t[k + 1] - t[k]);
    let t_up = cross(ku - 1);
    let t_down = cross(kd);
    let t_peak = 0.5 * (t_up + t_down);
    let lobe_max = p[ku..=kd].iter().cloned().fold(0.0, f64::max);
    let ratio = lobe_max / pmax;
    if ratio < 0.95 {
        log::warn!("transition probability beats (first lobe at {:.1}% of maximum)", 100.0 * ratio);
    }
    Ok(JFit {
        j: 1.0 / (4.0 * t_peak),
        t_peak,
        p_peak: lobe_max,
        first_lobe_ratio: ratio,
    })
}

/// Tolerance on the spin-spin detuning at a resonance, GHz.
pub const RESONANCE_TOL: f64 = 1e-6;

/// Detuning ε of DQD `free` that makes the dressed splittings equal, searched
/// by bisection inside `bracket` (GHz).
pub fn resonance_search(params: &SystemParams, free: usize, bracket: (f64, f64)) -> Result<f64> {
    if params.n_dqd() != 2 || free > 1 {
        return Err(Error::InvalidParameter(
            "resonance search needs two DQDs and free index 0 or 1".into(),
        ));
    }
    let delta_at = |eps: f64| -> Result<f64> {
        let mut p = params.clone();
        p.dqds[free].epsilon = eps;
        let w = dressed_splittings_numeric(&p)?;
        Ok(w[1] - w[0])
    };
    let here = params.dqds[free].epsilon;
    if delta_at(here)?.abs() < RESONANCE_TOL {
        return Ok(here);
    }
    let (mut lo, mut hi) = bracket;
    let mut flo = delta_at(lo)?;
    let fhi = delta_at(hi)?;
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!(
            "detuning does not change sign for ε ∈ [{lo}, {hi}] GHz (Δ = {flo:.3e}, {fhi:.3e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = delta_at(mid)?;
        if fm.abs() < RESONANCE_TOL || (hi - lo).abs() < 1e-13 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Shared Zeeman frequency ω making `ω'_r − ω'_z = ratio·|g'_x|` for
/// symmetric DQDs; bisection to 1e-5 GHz.
pub fn calibrate_dispersive_omega(params: &SystemParams, ratio: f64) -> Result<f64> {
    calibrate_dispersive_omega_in(params, ratio, (0.5 * params.omega_r, params.omega_r))
}

pub fn calibrate_dispersive_omega_in(params: &SystemParams, ratio: f64, bracket: (f64, f64)) -> Result<f64> {
    let resid = |w: f64| -> Result<f64> {
        let mut p = params.clone();
        for d in p.dqds.iter_mut() {
            d.omega_z = w;
        }
        let dr = system_dressing(&p)?;
        let s = &dr.dqds[0];
        Ok(dr.omega_r_prime - s.omega_z_prime - ratio * s.g_x_prime.abs())
    };
    crate::optimize::bisect(resid, bracket.0, bracket.1, 1e-5)
}

/// Bare low-energy manifold indices `|{s}, −…−, n⟩` for `n ≤ n_max`, helper for tests.
pub fn low_projector(space: &HilbertSpace, n_dqd: usize, n_max: usize) -> Operator {
    let mut p = Operator::zeros(space.clone());
    for k in 0..(1usize << n_dqd) {
        for n in 0..=n_max {
            let mut digits: Vec<usize> = (0..n_dqd).map(|i| (k >> (n_dqd - 1 - i)) & 1).collect();
            digits.extend(std::iter::repeat(ORBITAL_GROUND).take(n_dqd));
            digits.push(n);
            let i = space.index_of(&digits);
            p.matrix[[i, i]] = c(1.0);
        }
    }
    p
}

/// Sub-block of `m` on the given rows/cols.
pub fn sub_block(m: &Array2<C64>, idx: &[usize]) -> Array2<C64> {
    Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| m[[idx[a], idx[b]]])
}

/// Space of the spin-mode problem for `params`.
pub fn spin_space(params: &SystemParams) -> HilbertSpace {
    system_space(params.n_dqd(), params.n_photon_max, QubitKind::Spin)
}
