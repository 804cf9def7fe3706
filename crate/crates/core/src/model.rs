//! Physical parameters, the N-DQD + resonator Hamiltonian and detuning pulses.
//!
//! Units: every Hamiltonian entry is an energy over Planck's constant in GHz,
//! times are in ns, so a phase accumulated over `t` is `2π·(E/h)·t`.
//!
//! Orbital factor conventions. In the left/right basis index 0 is `|L⟩` and
//! index 1 is `|R⟩`, with `τ_z = |L⟩⟨L| − |R⟩⟨R|`. In the eigenbasis index 0
//! is `|+⟩ = cos(θ/2)|L⟩ + sin(θ/2)|R⟩` and index 1 is
//! `|−⟩ = cos(θ/2)|R⟩ − sin(θ/2)|L⟩`, the orbital ground state.
//! Spin index 0 is `|↑⟩` (`σ_z = +1`).

use ndarray::Array2;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, c, C64};
use crate::ops::{bosonic_ops, embed, pauli, HilbertSpace, Operator};

/// Bohr magneton, J/T (CODATA 2018).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Planck constant, J·s (exact SI).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Spin-up / orbital `|+⟩` digit.
pub const UP: usize = 0;
/// Spin-down / orbital `|−⟩` digit.
pub const DOWN: usize = 1;
/// Orbital ground-state digit in the eigenbasis.
pub const ORBITAL_GROUND: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqdParams {
    /// Detuning ε/h, GHz.
    pub epsilon: f64,
    /// Tunnel coupling Ω/h, GHz.
    pub omega_tunnel: f64,
    /// Zeeman frequency ω_z/2π, GHz.
    pub omega_z: f64,
    /// Transverse spin-orbit coupling g_x/h, GHz.
    pub g_x: f64,
    /// Longitudinal spin-orbit coupling g_z/h, GHz.
    pub g_z: f64,
    /// Photon-orbit coupling g_AC/h, GHz.
    pub g_ac: f64,
}

impl DqdParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.epsilon,
            self.omega_tunnel,
            self.omega_z,
            self.g_x,
            self.g_z,
            self.g_ac,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("DQD parameters must be finite".into()));
        }
        if self.omega_tunnel <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tunnel coupling must be positive, got {} GHz",
                self.omega_tunnel
            )));
        }
        if self.omega_z < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Zeeman frequency must be non-negative, got {} GHz",
                self.omega_z
            )));
        }
        if self.g_ac < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "photon-orbit coupling must be non-negative, got {} GHz",
                self.g_ac
            )));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.omega_tunnel.atan2(self.epsilon)
    }

    pub fn omega_a(&self) -> f64 {
        orbital_splitting(self.epsilon, self.omega_tunnel)
    }

    /// Same DQD with the detuning set from a mixing angle.
    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.epsilon = epsilon_for_theta(theta, self.omega_tunnel)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Resonator frequency ω_r/2π, GHz.
    pub omega_r: f64,
    pub dqds: Vec<DqdParams>,
    /// Highest retained photon number.
    pub n_photon_max: usize,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.dqds.is_empty() {
            return Err(Error::InvalidParameter("at least one DQD is required".into()));
        }
        if !self.omega_r.is_finite() || self.omega_r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "resonator frequency must be finite and non-negative, got {}",
                self.omega_r
            )));
        }
        for d in &self.dqds {
            d.validate()?;
        }
        Ok(())
    }

    pub fn n_dqd(&self) -> usize {
        self.dqds.len()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.dqds.iter().map(|d| d.theta()).collect()
    }

    pub fn with_epsilons(&self, eps: &[f64]) -> Self {
        let mut p = self.clone();
        for (d, &e) in p.dqds.iter_mut().zip(eps) {
            d.epsilon = e;
        }
        p
    }
}

/// Which degrees of freedom carry the qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitKind {
    /// Electron spins; orbitals and photon form the environment.
    Spin,
    /// Orbital (charge) states; spin factors are dropped entirely.
    Charge,
}

impl QubitKind {
    pub fn name(&self) -> &'static str {
        match self {
            QubitKind::Spin => "spin",
            QubitKind::Charge => "charge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitalBasis {
    LeftRight,
    Eigen,
}

pub fn spin_label(i: usize) -> String {
    format!("spin{}", i + 1)
}

pub fn orbital_label(i: usize) -> String {
    format!("orb{}", i + 1)
}

pub const PHOTON: &str = "photon";

/// Spins (ascending), orbitals (ascending), photon.
pub fn system_space(n_dqd: usize, n_photon_max: usize, kind: QubitKind) -> HilbertSpace {
    let mut f: Vec<(String, usize)> = Vec::new();
    if kind == QubitKind::Spin {
        f.extend((0..n_dqd).map(|i| (spin_label(i), 2)));
    }
    f.extend((0..n_dqd).map(|i| (orbital_label(i), 2)));
    f.push((PHOTON.to_string(), n_photon_max + 1));
    HilbertSpace::new(f).expect("labels are unique and dims positive")
}

/// Labels of the qubit factors for a given kind.
pub fn qubit_labels(n_dqd: usize, kind: QubitKind) -> Vec<String> {
    match kind {
        QubitKind::Spin => (0..n_dqd).map(spin_label).collect(),
        QubitKind::Charge => (0..n_dqd).map(orbital_label).collect(),
    }
}

/// θ = atan2(Ω, ε) ∈ (0, π) for Ω > 0.
pub fn mixing_angle(epsilon: f64, omega_tunnel: f64) -> Result<f64> {
    if epsilon == 0.0 && omega_tunnel == 0.0 {
        return Err(Error::InvalidParameter(
            "mixing angle undefined for ε = Ω = 0".into(),
        ));
    }
    Ok(omega_tunnel.atan2(epsilon))
}

/// √(ε² + Ω²), GHz.
pub fn orbital_splitting(epsilon: f64, omega_tunnel: f64) -> f64 {
    epsilon.hypot(omega_tunnel)
}

pub fn epsilon_for_theta(theta: f64, omega_tunnel: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::InvalidParameter(format!(
            "mixing angle {theta} outside (0, π)"
        )));
    }
    if omega_tunnel <= 0.0 {
        return Err(Error::InvalidParameter("tunnel coupling must be positive".into()));
    }
    if (theta - PI / 2.0).abs() < 1e-15 {
        return Ok(0.0);
    }
    Ok(omega_tunnel / theta.tan())
}

/// Flat-ended smooth step: 0 for x ≤ 0, 1 for x ≥ 1.
pub fn transition_function(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}) = 1 / (1 + e^{1/x - 1/(1-x)})
    let arg = 1.0 / x - 1.0 / (1.0 - x);
    1.0 / (1.0 + arg.exp())
}

/// Orbital change of basis with columns `|+⟩`, `|−⟩` in (L, R) coordinates.
pub fn orbital_rotation(theta: f64) -> Array2<C64> {
    let (s, co) = (theta / 2.0).sin_cos();
    ndarray::array![[c(co), c(-s)], [c(s), c(co)]]
}

/// Product of per-DQD orbital rotations, identity on spins and photon.
pub fn frame_rotation(space: &HilbertSpace, thetas: &[f64]) -> Result<Operator> {
    let mut r = Operator::identity(space.clone());
    for (i, &th) in thetas.iter().enumerate() {
        let e = embed(&orbital_rotation(th), space, &orbital_label(i))?;
        r.matrix = r.matrix.dot(&e.matrix);
    }
    Ok(r)
}

/// Hamiltonian split as `H(ε) = fixed + Σ_i ε_i · detuning[i]`, expressed in a
/// fixed orbital frame (left/right, or the eigenbasis at reference angles).
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    pub space: HilbertSpace,
    pub fixed: Array2<C64>,
    pub detuning: Vec<Array2<C64>>,
    /// Mixing angles of the frame, `None` for the left/right basis.
    pub frame_thetas: Option<Vec<f64>>,
}

impl HamiltonianTerms {
    pub fn at(&self, epsilons: &[f64]) -> Array2<C64> {
        let mut h = self.fixed.clone();
        for (d, &e) in self.detuning.iter().zip(epsilons) {
            h.scaled_add(c(e), d);
        }
        h
    }

    pub fn operator_at(&self, epsilons: &[f64]) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.at(epsilons),
        }
    }
}

/// Left/right-basis terms, optionally rotated into the eigenbasis of the
/// orbital Hamiltonians at `frame_thetas`.
pub fn hamiltonian_terms(
    params: &SystemParams,
    kind: QubitKind,
    frame_thetas: Option<&[f64]>,
) -> Result<HamiltonianTerms> {
    params.validate()?;
    let n = params.n_dqd();
    if kind == QubitKind::Charge && params.dqds.iter().any(|d| d.g_x != 0.0 || d.g_z != 0.0) {
        return Err(Error::InvalidParameter(
            "charge-qubit mode requires g_x = g_z = 0 (spins must decouple)".into(),
        ));
    }
    let space = system_space(n, params.n_photon_max, kind);
    let (a, ad) = bosonic_ops(params.n_photon_max);
    let num = embed(&ad.dot(&a), &space, PHOTON)?.matrix;
    let quad = embed(&(&a + &ad), &space, PHOTON)?.matrix;
    let id = linalg::identity(space.dim());

    let mut fixed = num.mapv(|z| z * params.omega_r);
    let mut detuning = Vec::with_capacity(n);
    for (i, d) in params.dqds.iter().enumerate() {
        let orb = orbital_label(i);
        let tz = embed(&pauli::z(), &space, &orb)?.matrix;
        let tx = embed(&pauli::x(), &space, &orb)?.matrix;
        fixed.scaled_add(c(0.5 * d.omega_tunnel), &tx);
        if kind == QubitKind::Spin {
            let spin = spin_label(i);
            let sz = embed(&pauli::z(), &space, &spin)?.matrix;
            let sx = embed(&pauli::x(), &space, &spin)?.matrix;
            fixed.scaled_add(c(0.5 * d.omega_z), &sz);
            let so = sx.mapv(|z| z * d.g_x) + sz.mapv(|z| z * d.g_z);
            fixed += &so.dot(&tz);
        }
        fixed += &quad.dot(&(&id - &tz)).mapv(|z| z * d.g_ac);
        detuning.push(tz.mapv(|z| z * 0.5));
    }

    let mut terms = HamiltonianTerms {
        space,
        fixed,
        detuning,
        frame_thetas: None,
    };
    if let Some(th) = frame_thetas {
        if th.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: th.len(),
            });
        }
        let r = frame_rotation(&terms.space, th)?.matrix;
        let rd = linalg::dagger(&r.view());
        terms.fixed = rd.dot(&terms.fixed).dot(&r);
        for d in terms.detuning.iter_mut() {
            *d = rd.dot(&*d).dot(&r);
        }
        terms.frame_thetas = Some(th.to_vec());
    }
    Ok(terms)
}

/// Full Hamiltonian (value of H/h in GHz) with spin factors.
pub fn build_hamiltonian(params: &SystemParams, basis: OrbitalBasis) -> Result<Operator> {
    build_hamiltonian_for(params, basis, QubitKind::Spin)
}

/// Full Hamiltonian for either qubit kind. The eigenbasis form is assembled
/// term by term from the transformed orbital operators.
pub fn build_hamiltonian_for(
    params: &SystemParams,
    basis: OrbitalBasis,
    kind: QubitKind,
) -> Result<Operator> {
    match basis {
        OrbitalBasis::LeftRight => {
            let terms = hamiltonian_terms(params, kind, None)?;
            let eps: Vec<f64> = params.dqds.iter().map(|d| d.epsilon).collect();
            Ok(terms.operator_at(&eps))
        }
        OrbitalBasis::Eigen => eigen_hamiltonian(params, kind),
    }
}

fn eigen_hamiltonian(params: &SystemParams, kind: QubitKind) -> Result<Operator> {
    params.validate()?;
    if kind == QubitKind::Charge && params.dqds.iter().any(|d| d.g_x != 0.0 || d.g_z != 0.0) {
        return Err(Error::InvalidParameter(
            "charge-qubit mode requires g_x = g_z = 0 (spins must decouple)".into(),
        ));
    }
    let space = system_space(params.n_dqd(), params.n_photon_max, kind);
    let (a, ad) = bosonic_ops(params.n_photon_max);
    let num = embed(&ad.dot(&a), &space, PHOTON)?.matrix;
    let quad = embed(&(&a + &ad), &space, PHOTON)?.matrix;
    let id = linalg::identity(space.dim());

    let mut h = num.mapv(|z| z * params.omega_r);
    for (i, d) in params.dqds.iter().enumerate() {
        let theta = mixing_angle(d.epsilon, d.omega_tunnel)?;
        let (st, ct) = theta.sin_cos();
        let orb = orbital_label(i);
        let tz = embed(&pauli::z(), &space, &orb)?.matrix;
        let tx = embed(&pauli::x(), &space, &orb)?.matrix;
        // τ_z(LR) expressed in the eigenbasis.
        let tz_lr = tz.mapv(|z| z * ct) - tx.mapv(|z| z * st);
        h.scaled_add(c(0.5 * d.omega_a()), &tz);
        if kind == QubitKind::Spin {
            let spin = spin_label(i);
            let sz = embed(&pauli::z(), &space, &spin)?.matrix;
            let sx = embed(&pauli::x(), &space, &spin)?.matrix;
            h.scaled_add(c(0.5 * d.omega_z), &sz);
            let so = sx.mapv(|z| z * d.g_x) + sz.mapv(|z| z * d.g_z);
            h += &so.dot(&tz_lr);
        }
        h += &quad.dot(&(&id - &tz_lr)).mapv(|z| z * d.g_ac);
    }
    Operator::new(space, h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticInputs {
    pub g_star: f64,
    /// Tesla.
    pub delta_b_x: f64,
    /// Tesla.
    pub delta_b_z: f64,
}

/// `(g_x, g_z)` in GHz from `¼ g* μ_B ΔB`.
pub fn so_coupling_from_field(inputs: &MagneticInputs) -> (f64, f64) {
    let k = inputs.g_star * BOHR_MAGNETON / (4.0 * PLANCK) * 1e-9;
    (k * inputs.delta_b_x, k * inputs.delta_b_z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentShape {
    Hold,
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// ns
    pub start: f64,
    /// ns
    pub duration: f64,
    /// GHz
    pub eps_start: f64,
    /// GHz
    pub eps_end: f64,
    pub shape: SegmentShape,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    fn value(&self, t: f64) -> f64 {
        match self.shape {
            SegmentShape::Hold => self.eps_start,
            SegmentShape::Smooth => {
                let x = (t - self.start) / self.duration;
                self.eps_start + (self.eps_end - self.eps_start) * transition_function(x)
            }
        }
    }

    fn is_constant(&self) -> bool {
        self.shape == SegmentShape::Hold || self.eps_start == self.eps_end
    }
}

/// One programming step for [`PulseSchedule::from_steps`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseStep {
    Hold { duration: f64 },
    Smooth { duration: f64, to: f64 },
}

/// Piecewise-smooth detuning waveforms, one channel per DQD.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    channels: Vec<Vec<Segment>>,
    span: f64,
}

const SPAN_TOL: f64 = 1e-9;

impl PulseSchedule {
    pub fn new(channels: Vec<Vec<Segment>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Schedule("no channels".into()));
        }
        let mut span = None;
        for (k, ch) in channels.iter().enumerate() {
            if ch.is_empty() {
                return Err(Error::Schedule(format!("channel {} has no segments", k + 1)));
            }
            let mut t = 0.0;
            for s in ch {
                if !(s.duration > 0.0) || !s.eps_start.is_finite() || !s.eps_end.is_finite() {
                    return Err(Error::Schedule(format!(
                        "channel {}: segment at {} ns has invalid duration or endpoints",
                        k + 1,
                        s.start
                    )));
                }
                if (s.start - t).abs() > SPAN_TOL {
                    return Err(Error::Schedule(format!(
                        "channel {}: gap or overlap at {} ns (segment starts at {} ns)",
                        k + 1,
                        t,
                        s.start
                    )));
                }
                if s.shape == SegmentShape::Hold && s.eps_start != s.eps_end {
                    return Err(Error::Schedule(format!(
                        "channel {}: hold segment at {} ns changes value",
                        k + 1,
                        s.start
                    )));
                }
                t = s.end();
            }
            match span {
                None => span = Some(t),
                Some(sp) if (sp - t).abs() > SPAN_TOL => {
                    return Err(Error::Schedule(format!(
                        "channel spans differ: {sp} ns vs {t} ns"
                    )))
                }
                _ => {}
            }
            for w in ch.windows(2) {
                if (w[0].eps_end - w[1].eps_start).abs() > 1e-12 {
                    return Err(Error::Schedule(format!(
                        "channel {}: discontinuity at {} ns",
                        k + 1,
                        w[1].start
                    )));
                }
            }
        }
        Ok(Self {
            channels,
            span: span.unwrap(),
        })
    }

    /// Builds contiguous channels from starting detunings and step lists.
    pub fn from_steps(starts: &[f64], programs: &[Vec<PulseStep>]) -> Result<Self> {
        if starts.len() != programs.len() {
            return Err(Error::Schedule("one starting detuning per channel required".into()));
        }
        let channels = starts
            .iter()
            .zip(programs)
            .map(|(&e0, prog)| {
                let mut t = 0.0;
                let mut e = e0;
                prog.iter()
                    .map(|st| {
                        let seg = match *st {
                            PulseStep::Hold { duration } => Segment {
                                start: t,
                                duration,
                                eps_start: e,
                                eps_end: e,
                                shape: SegmentShape::Hold,
                            },
                            PulseStep::Smooth { duration, to } => Segment {
                                start: t,
                                duration,
                                eps_start: e,
                                eps_end: to,
                                shape: SegmentShape::Smooth,
                            },
                        };
                        t = seg.end();
                        e = seg.eps_end;
                        seg
                    })
                    .collect()
            })
            .collect();
        Self::new(channels)
    }

    /// Constant detunings over `[0, span]`.
    pub fn constant(epsilons: &[f64], span: f64) -> Result<Self> {
        let progs = vec![vec![PulseStep::Hold { duration: span }]; epsilons.len()];
        Self::from_steps(epsilons, &progs)
    }

    pub fn channels(&self) -> &[Vec<Segment>] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= -SPAN_TOL && t <= self.span + SPAN_TOL) {
            return Err(Error::OutOfSpan { t, span: self.span });
        }
        let t = t.clamp(0.0, self.span);
        Ok(self
            .channels
            .iter()
            .map(|ch| {
                let seg = ch
                    .iter()
                    .find(|s| t < s.end())
                    .unwrap_or_else(|| ch.last().unwrap());
                seg.value(t)
            })
            .collect())
    }

    /// Sorted segment boundaries of all channels, including 0 and the span.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .channels
            .iter()
            .flat_map(|ch| ch.iter().map(|s| s.start))
            .collect();
        b.push(self.span);
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup_by(|x, y| (*x - *y).abs() < SPAN_TOL);
        b
    }

    /// True when every channel is constant on `(t0, t1)`.
    pub fn is_constant_on(&self, t0: f64, t1: f64) -> bool {
        let mid = 0.5 * (t0 + t1);
        self.channels.iter().all(|ch| {
            ch.iter()
                .find(|s| mid < s.end())
                .map(|s| s.is_constant())
                .unwrap_or(true)
        })
    }
}
