//! Time evolution under constant and pulsed Hamiltonians, reduced two-qubit
//! processes and leakage.
//!
//! Pulsed evolution is carried out in one fixed orbital frame: the eigenbasis
//! of each DQD at the mixing angle of the schedule's starting detuning. The
//! Hamiltonian is affine in the detunings there, `H(ε) = F + Σ ε_i D_i`, so no
//! frame-rotation term appears. Results are mapped to the instantaneous
//! eigenbasis only when states are read out.

use ndarray::{Array1, Array2};
use std::f64::consts::PI;

use crate::effective::{computational_index, dressed_levels_of};
use crate::error::{Error, Result};
use crate::gates::{TwoQubitGate, TwoQubitProcess};
use crate::linalg::{self, c, C64, I};
use crate::model::{self, hamiltonian_terms, qubit_labels, HamiltonianTerms, OrbitalBasis, PulseSchedule, QubitKind, SystemParams};
use crate::ops::{embed, pauli, HilbertSpace, Operator, TraceMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    /// `exp(−i2π H(t + dt/2) dt)`, second order.
    Midpoint,
    /// Two exponentials at the Gauss points, fourth order.
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    /// Step size on smooth segments, ns.
    pub dt: f64,
    pub method: StepMethod,
    /// Halve `dt` until the end states change by less than `tolerance`.
    pub convergence_check: bool,
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            method: StepMethod::Magnus4,
            convergence_check: true,
            tolerance: 1e-5,
            max_halvings: 6,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {} ns", self.dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    /// Step size of the returned run, ns.
    pub dt: f64,
    /// Largest end-state change between the last two step sizes.
    pub change: f64,
    pub halvings: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Evolved columns at each sample time, in the fixed frame.
    pub states: Vec<Array2<C64>>,
    pub space: HilbertSpace,
    pub kind: QubitKind,
    pub frame_thetas: Vec<f64>,
    pub schedule: PulseSchedule,
    pub convergence: Option<ConvergenceReport>,
}

impl Trajectory {
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&x| (x - t).abs() < 1e-9)
            .ok_or(Error::NotOnGrid(t))
    }

    /// Columns at `t` expressed in the orbital eigenbasis at the detunings of `t`.
    pub fn instantaneous_states(&self, t: f64, params: &SystemParams) -> Result<Array2<C64>> {
        let k = self.index_of(t)?;
        let eps = self.schedule.evaluate(t)?;
        let inst = params.with_epsilons(&eps).thetas();
        Ok(frame_change(&self.space, &self.frame_thetas, &inst)?.dot(&self.states[k]))
    }
}

/// Map from fixed-frame coordinates (angles `from`) to eigenframe coordinates
/// at angles `to`: `R(to)† R(from)`.
fn frame_change(space: &HilbertSpace, from: &[f64], to: &[f64]) -> Result<Array2<C64>> {
    if from.iter().zip(to).all(|(a, b)| a == b) {
        return Ok(linalg::identity(space.dim()));
    }
    let rf = model::frame_rotation(space, from)?.matrix;
    let rt = model::frame_rotation(space, to)?.matrix;
    Ok(linalg::dagger(&rt.view()).dot(&rf))
}

/// Exponentials of a Hermitian matrix from one eigendecomposition.
#[derive(Debug, Clone)]
pub struct ConstantEvolution {
    pub values: Array1<f64>,
    pub vectors: Array2<C64>,
}

impl ConstantEvolution {
    pub fn new(h: &Array2<C64>) -> Result<Self> {
        let (values, vectors) = linalg::eigh_auto(h)?;
        Ok(Self { values, vectors })
    }

    /// Eigen-coordinates `V†ψ` of the given columns.
    pub fn coordinates(&self, cols: &Array2<C64>) -> Array2<C64> {
        linalg::dagger(&self.vectors.view()).dot(cols)
    }

    /// `exp(−i2πHt)` applied to columns given by their eigen-coordinates.
    pub fn evolve_coordinates(&self, coords: &Array2<C64>, t: f64) -> Array2<C64> {
        let mut x = coords.clone();
        for (mut row, &e) in x.rows_mut().into_iter().zip(self.values.iter()) {
            let ph = (-I * (2.0 * PI * e * t)).exp();
            row.mapv_inplace(|z| z * ph);
        }
        self.vectors.dot(&x)
    }

    pub fn evolve(&self, cols: &Array2<C64>, t: f64) -> Array2<C64> {
        self.evolve_coordinates(&self.coordinates(cols), t)
    }

    /// Spread of the spectrum about its centre, GHz.
    pub fn half_width(&self) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        0.5 * (self.values[n - 1] - self.values[0])
    }
}

/// Stepper over an affine-in-ε Hamiltonian.
struct Engine<'a> {
    terms: &'a HamiltonianTerms,
    schedule: &'a PulseSchedule,
    method: StepMethod,
    widest: f64,
}

impl<'a> Engine<'a> {
    fn h_at(&self, t: f64) -> Result<Array2<C64>> {
        Ok(self.terms.at(&self.schedule.evaluate(t)?))
    }

    fn step(&mut self, state: &Array2<C64>, t: f64, h: f64) -> Result<Array2<C64>> {
        match self.method {
            StepMethod::Midpoint => {
                let ev = ConstantEvolution::new(&self.h_at(t + 0.5 * h)?)?;
                self.widest = self.widest.max(ev.half_width());
                Ok(ev.evolve(state, h))
            }
            StepMethod::Magnus4 => {
                let r3 = 3f64.sqrt();
                let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
                let (a1, a2) = (0.25 + r3 / 6.0, 0.25 - r3 / 6.0);
                let h1 = self.h_at(t + c1 * h)?;
                let h2 = self.h_at(t + c2 * h)?;
                let first = &h1.mapv(|z| z * a1) + &h2.mapv(|z| z * a2);
                let second = &h1.mapv(|z| z * a2) + &h2.mapv(|z| z * a1);
                // each exponent carries half the step: a1 + a2 = 1/2
                let e1 = ConstantEvolution::new(&first)?;
                let mid = e1.evolve(state, h);
                let e2 = ConstantEvolution::new(&second)?;
                self.widest = self.widest.max(e1.half_width().max(e2.half_width()) * 2.0);
                Ok(e2.evolve(&mid, h))
            }
        }
    }
}

/// Evolve `init` from `t_start` through the sorted `samples` (all ≥ t_start).
fn evolve_samples(
    terms: &HamiltonianTerms,
    schedule: &PulseSchedule,
    init: &Array2<C64>,
    t_start: f64,
    samples: &[f64],
    dt: f64,
    method: StepMethod,
) -> Result<(Vec<Array2<C64>>, f64)> {
    let mut cuts: Vec<f64> = schedule
        .breakpoints()
        .into_iter()
        .filter(|&b| b > t_start + 1e-12)
        .chain(samples.iter().cloned().filter(|&s| s > t_start + 1e-12))
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let last = samples.last().cloned().unwrap_or(t_start);
    cuts.retain(|&x| x <= last + 1e-9);

    let mut engine = Engine {
        terms,
        schedule,
        method,
        widest: 0.0,
    };
    let mut out = Vec::with_capacity(samples.len());
    let mut si = 0;
    while si < samples.len() && samples[si] <= t_start + 1e-9 {
        out.push(init.clone());
        si += 1;
    }
    let mut state = init.clone();
    let mut cache: Option<(Vec<f64>, ConstantEvolution)> = None;
    let mut t = t_start;
    for &b in &cuts {
        if schedule.is_constant_on(t, b) {
            let eps = schedule.evaluate(0.5 * (t + b))?;
            let reuse = matches!(&cache, Some((e, _)) if *e == eps);
            if !reuse {
                let ev = ConstantEvolution::new(&terms.at(&eps))?;
                cache = Some((eps, ev));
            }
            state = cache.as_ref().unwrap().1.evolve(&state, b - t);
        } else {
            let n = ((b - t) / dt - 1e-9).ceil().max(1.0) as usize;
            let h = (b - t) / n as f64;
            for k in 0..n {
                state = engine.step(&state, t + k as f64 * h, h)?;
            }
        }
        t = b;
        while si < samples.len() && (samples[si] - t).abs() < 1e-9 {
            out.push(state.clone());
            si += 1;
        }
    }
    if out.len() != samples.len() {
        return Err(Error::OutOfSpan {
            t: samples[out.len()],
            span: schedule.span(),
        });
    }
    Ok((out, engine.widest * dt))
}

fn check_samples(samples: &[f64], span: f64) -> Result<()> {
    for w in samples.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidParameter("sample times must be ascending".into()));
        }
    }
    if let Some(&t) = samples.iter().find(|&&t| t < 0.0 || t > span + 1e-9) {
        return Err(Error::OutOfSpan { t, span });
    }
    Ok(())
}

/// Evolve the given initial columns through a schedule.
pub fn propagate_columns(
    params: &SystemParams,
    kind: QubitKind,
    schedule: &PulseSchedule,
    config: &PropagatorConfig,
    init: impl Fn(&HilbertSpace) -> Array2<C64>,
    samples: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    if schedule.n_channels() != params.n_dqd() {
        return Err(Error::Schedule(format!(
            "{} channels for {} DQDs",
            schedule.n_channels(),
            params.n_dqd()
        )));
    }
    check_samples(samples, schedule.span())?;
    let eps0 = schedule.evaluate(0.0)?;
    let frame = params.with_epsilons(&eps0).thetas();
    let terms = hamiltonian_terms(params, kind, Some(&frame))?;
    let d = linalg::hermiticity_defect(&terms.at(&eps0));
    if d > crate::ops::HERMITIAN_TOL {
        return Err(Error::NotHermitian(d));
    }
    let init = init(&terms.space);

    let has_smooth = schedule
        .breakpoints()
        .windows(2)
        .any(|w| !schedule.is_constant_on(w[0], w[1]));
    let mut dt = config.dt;
    let (mut states, mut cycles) = evolve_samples(&terms, schedule, &init, 0.0, samples, dt, config.method)?;
    let mut report = None;
    if config.convergence_check && has_smooth && !samples.is_empty() {
        let mut halvings = 0;
        let mut change = f64::INFINITY;
        while halvings < config.max_halvings {
            let (finer, cyc) = evolve_samples(&terms, schedule, &init, 0.0, samples, dt / 2.0, config.method)?;
            change = max_column_change(states.last().unwrap(), finer.last().unwrap());
            dt /= 2.0;
            halvings += 1;
            states = finer;
            cycles = cyc;
            if change < config.tolerance {
                break;
            }
        }
        let converged = change < config.tolerance;
        if !converged {
            log::warn!("propagation not converged: end-state change {change:.2e} at dt = {dt} ns");
        }
        report = Some(ConvergenceReport {
            dt,
            change,
            halvings,
            converged,
        });
    }
    if cycles > 0.5 {
        log::debug!("largest phase per step is {cycles:.2} cycles at dt = {dt} ns");
    }
    Ok(Trajectory {
        times: samples.to_vec(),
        states,
        space: terms.space.clone(),
        kind,
        frame_thetas: frame,
        schedule: schedule.clone(),
        convergence: report,
    })
}

fn max_column_change(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (0..a.ncols())
        .map(|k| {
            a.column(k)
                .iter()
                .zip(b.column(k).iter())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Bare computational columns `|q1 q2 …⟩ ⊗ |env ground⟩` in the fixed frame.
pub fn computational_columns(space: &HilbertSpace, n_dqd: usize, kind: QubitKind) -> Array2<C64> {
    let nq = 1usize << n_dqd;
    let mut m = Array2::zeros((space.dim(), nq));
    for k in 0..nq {
        m[[computational_index(space, n_dqd, kind, k), k]] = c(1.0);
    }
    m
}

/// Evolution of the computational states through a schedule.
pub fn propagate_gate(
    params: &SystemParams,
    kind: QubitKind,
    schedule: &PulseSchedule,
    config: &PropagatorConfig,
    samples: &[f64],
) -> Result<Trajectory> {
    let n = params.n_dqd();
    propagate_columns(params, kind, schedule, config, |sp| computational_columns(sp, n, kind), samples)
}

/// Full propagator `U(t)` (all columns) of the spin-mode Hamiltonian.
pub fn propagate_unitary(
    params: &SystemParams,
    schedule: &PulseSchedule,
    config: &PropagatorConfig,
    samples: &[f64],
) -> Result<Trajectory> {
    propagate_columns(params, QubitKind::Spin, schedule, config, |sp| linalg::identity(sp.dim()), samples)
}

/// Evolve arbitrary columns between two times of a schedule.
pub fn evolve_between(
    params: &SystemParams,
    kind: QubitKind,
    schedule: &PulseSchedule,
    frame_thetas: &[f64],
    init: &Array2<C64>,
    t0: f64,
    t1: f64,
    dt: f64,
    method: StepMethod,
) -> Result<Array2<C64>> {
    let terms = hamiltonian_terms(params, kind, Some(frame_thetas))?;
    let (mut out, _) = evolve_samples(&terms, schedule, init, t0, &[t1], dt, method)?;
    Ok(out.pop().unwrap())
}

/// `R(t)·U` with `R(t) = exp(+i2πt Σ_i ½ f_i Z_i)` on the qubit factors.
pub fn rotating_frame(u: &Operator, frame_freqs: &[f64], t: f64, kind: QubitKind) -> Result<Operator> {
    let labels = qubit_labels(frame_freqs.len(), kind);
    let mut r = Operator::identity(u.space.clone());
    for (f, lab) in frame_freqs.iter().zip(&labels) {
        let phase = 2.0 * PI * t * 0.5 * f;
        let rz = ndarray::array![[(I * phase).exp(), c(0.0)], [c(0.0), (-I * phase).exp()]];
        r.matrix = r.matrix.dot(&embed(&rz, &u.space, lab)?.matrix);
    }
    Ok(Operator {
        space: u.space.clone(),
        matrix: r.matrix.dot(&u.matrix),
    })
}

/// Two-qubit rotating-frame unitary `exp(+i2πt Σ ½ f_i Z_i)`.
pub fn frame_unitary(frame_freqs: &[f64], t: f64) -> TwoQubitGate {
    let z = |f: f64| {
        let ph = 2.0 * PI * t * 0.5 * f;
        ndarray::array![[(I * ph).exp(), c(0.0)], [c(0.0), (-I * ph).exp()]]
    };
    TwoQubitGate::new(linalg::kron(&z(frame_freqs[0]), &z(frame_freqs[1]))).expect("diagonal phases are unitary")
}

/// Process on the qubits obtained by tracing out everything else.
pub fn process_from_states(states: &Array2<C64>, space: &HilbertSpace, kind: QubitKind) -> Result<TwoQubitProcess> {
    let labels = qubit_labels(2, kind);
    let keep: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let map = TraceMap::new(space, &keep)?;
    let cols: Vec<Array1<C64>> = (0..4).map(|k| states.column(k).to_owned()).collect();
    let images: [[Array2<C64>; 4]; 4] =
        std::array::from_fn(|a| std::array::from_fn(|b| map.reduced_outer(&cols[a], &cols[b])));
    Ok(TwoQubitProcess::from_matrix_units(&images, 0.0))
}

/// Reduced two-qubit process at a sample time, with the dressed leakage as
/// completeness defect.
pub fn reduced_spin_process(traj: &Trajectory, t: f64, params: &SystemParams) -> Result<TwoQubitProcess> {
    if params.n_dqd() != 2 {
        return Err(Error::InvalidParameter("two-qubit process needs two DQDs".into()));
    }
    let states = traj.instantaneous_states(t, params)?;
    let mut p = process_from_states(&states, &traj.space, traj.kind)?;
    p.completeness_defect = leakage_of_states(&states, &traj.space, &params.with_epsilons(&traj.schedule.evaluate(t)?), traj.kind)?;
    Ok(p)
}

/// Population outside the dressed computational subspace, worst case over
/// the computational inputs.
pub fn leakage(traj: &Trajectory, t: f64, params: &SystemParams) -> Result<f64> {
    let states = traj.instantaneous_states(t, params)?;
    leakage_of_states(&states, &traj.space, &params.with_epsilons(&traj.schedule.evaluate(t)?), traj.kind)
}

/// `states` must be in the eigenframe of `inst_params`.
pub fn leakage_of_states(states: &Array2<C64>, space: &HilbertSpace, inst_params: &SystemParams, kind: QubitKind) -> Result<f64> {
    let h = model::build_hamiltonian_for(inst_params, OrbitalBasis::Eigen, kind)?;
    let lv = dressed_levels_of(&h.matrix, space, inst_params.n_dqd(), kind)?;
    let proj = linalg::dagger(&lv.dressed_basis.view()).dot(states);
    let worst = (0..states.ncols())
        .map(|k| proj.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok((1.0 - worst).max(0.0))
}

/// `P(t) = |⟨to, −…−, 0| U(t) |from, −…−, 0⟩|²` under the constant spin-mode Hamiltonian.
pub fn transition_probability(params: &SystemParams, from: &[usize], to: &[usize], t_grid: &[f64]) -> Result<Vec<f64>> {
    let n = params.n_dqd();
    if from.len() != n || to.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: from.len().max(to.len()),
        });
    }
    let h = model::build_hamiltonian(params, OrbitalBasis::Eigen)?;
    let ev = ConstantEvolution::new(&h.matrix)?;
    let idx = |digits: &[usize]| {
        let mut d = digits.to_vec();
        d.extend(std::iter::repeat(model::ORBITAL_GROUND).take(n));
        d.push(0);
        h.space.index_of(&d)
    };
    let (i0, i1) = (idx(from), idx(to));
    // amplitude = Σ_k V[i1,k] e^{−i2πE_k t} conj(V[i0,k])
    let w: Vec<C64> = (0..ev.values.len())
        .map(|k| ev.vectors[[i1, k]] * ev.vectors[[i0, k]].conj())
        .collect();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let amp: C64 = w
                .iter()
                .zip(ev.values.iter())
                .map(|(x, &e)| x * (-I * (2.0 * PI * e * t)).exp())
                .sum();
            amp.norm_sqr()
        })
        .collect())
}

/// Pauli `Z` on a qubit factor, helper for frame bookkeeping in tests.
pub fn qubit_z(space: &HilbertSpace, label: &str) -> Result<Operator> {
    embed(&pauli::z(), space, label)
}
