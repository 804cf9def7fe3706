//! Quasistatic charge noise: per-run Gaussian offsets of ε and Ω, and Monte
//! Carlo estimates of the best achievable gate infidelity.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::dynamics::{computational_columns, process_from_states};
use crate::effective::dressed_levels_from_eig;
use crate::error::{Error, Result};
use crate::gates::{
    average_gate_fidelity, dressed_target, makhlin_invariants, maximize_local_fidelity, LocalOptOptions, TwoQubitGate,
};
use crate::linalg::{self, C64, I};
use crate::model::{self, OrbitalBasis, QubitKind, SystemParams};
use crate::ops::HilbertSpace;
use crate::optimize::parabolic_vertex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of every δε_i and δΩ_i, GHz.
    pub sigma_eps: f64,
    pub n_samples: usize,
    pub master_seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_eps >= 0.0) || !self.sigma_eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise standard deviation must be finite and non-negative, got {} GHz",
                self.sigma_eps
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("at least one noise sample is required".into()));
        }
        Ok(())
    }
}

/// Offsets for one DQD, GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offsets {
    pub d_epsilon: f64,
    pub d_omega: f64,
}

/// Offsets of sample `index`. The generator is keyed by the master seed and
/// the sample index (as stream), so draws do not depend on evaluation order.
/// Per DQD the order is δε then δΩ.
pub fn sample_quasistatic(model: &NoiseModel, n_dqd: usize, index: u64) -> Vec<Offsets> {
    if model.sigma_eps == 0.0 {
        return vec![
            Offsets {
                d_epsilon: 0.0,
                d_omega: 0.0,
            };
            n_dqd
        ];
    }
    let mut rng = ChaCha20Rng::seed_from_u64(model.master_seed);
    rng.set_stream(index);
    let normal = Normal::new(0.0, model.sigma_eps).expect("validated standard deviation");
    (0..n_dqd)
        .map(|_| {
            let d_epsilon = normal.sample(&mut rng);
            let d_omega = normal.sample(&mut rng);
            Offsets { d_epsilon, d_omega }
        })
        .collect()
}

pub fn perturbed(params: &SystemParams, offsets: &[Offsets]) -> Result<SystemParams> {
    let mut p = params.clone();
    for (d, o) in p.dqds.iter_mut().zip(offsets) {
        d.epsilon += o.d_epsilon;
        d.omega_tunnel += o.d_omega;
    }
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct GateSearchOptions {
    /// Time grid spacing, ns.
    pub grid_step: f64,
    /// Number of invariant-distance minima examined with the full fidelity.
    pub candidates: usize,
    /// Spacing of the final scan around the best grid point, ns; 0 disables it.
    pub fine_step: f64,
    pub local: LocalOptOptions,
}

impl Default for GateSearchOptions {
    fn default() -> Self {
        Self {
            grid_step: 1.0,
            candidates: 3,
            fine_step: 0.01,
            local: LocalOptOptions {
                starts: 3,
                ..LocalOptOptions::default()
            },
        }
    }
}

/// Best gate found for one parameter set.
#[derive(Debug, Clone)]
pub struct GateOutcome {
    pub min_infidelity: f64,
    /// ns
    pub gate_time: f64,
    pub leakage: f64,
    pub local_params: Vec<f64>,
}

/// Evolution at constant parameters from one eigendecomposition, with the
/// dressed computational basis for leakage.
struct ConstantGate {
    energies: Array1<f64>,
    vectors: Array2<C64>,
    /// `V†B`: eigen-coordinates of the bare computational states.
    init: Array2<C64>,
    /// `D†V`: dressed computational basis in eigen-coordinates.
    readout: Array2<C64>,
    space: HilbertSpace,
    kind: QubitKind,
}

impl ConstantGate {
    fn new(params: &SystemParams, kind: QubitKind) -> Result<Self> {
        let h = model::build_hamiltonian_for(params, OrbitalBasis::Eigen, kind)?;
        let (energies, vectors) = linalg::eigh_auto(&h.matrix)?;
        let levels = dressed_levels_from_eig(&energies, &vectors, &h.space, params.n_dqd(), kind)?;
        let vd = linalg::dagger(&vectors.view());
        let init = vd.dot(&computational_columns(&h.space, params.n_dqd(), kind));
        let readout = linalg::dagger(&levels.dressed_basis.view()).dot(&vectors);
        Ok(Self {
            energies,
            vectors,
            init,
            readout,
            space: h.space,
            kind,
        })
    }

    fn phased(&self, t: f64) -> Array2<C64> {
        let mut x = self.init.clone();
        for (mut row, &e) in x.rows_mut().into_iter().zip(self.energies.iter()) {
            let ph = (-I * (2.0 * PI * e * t)).exp();
            row.mapv_inplace(|z| z * ph);
        }
        x
    }

    fn states(&self, t: f64) -> Array2<C64> {
        self.vectors.dot(&self.phased(t))
    }

    /// Computational-block amplitudes `D† U(t) B`.
    fn block(&self, t: f64) -> Array2<C64> {
        self.readout.dot(&self.phased(t))
    }

    fn leakage(&self, t: f64) -> f64 {
        let m = self.block(t);
        let worst = (0..m.ncols())
            .map(|k| m.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        (1.0 - worst).max(0.0)
    }
}

fn invariant_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Minimum over `[0, t_max]` of the locally optimized infidelity to `target`
/// at constant parameters.
///
/// The grid is scanned with the distance between the local invariants of
/// the coherent computational block and those of the target; the smallest
/// few local minima are then evaluated with the full process fidelity at
/// three grid points and refined at the parabola vertex.
pub fn best_gate(
    params: &SystemParams,
    kind: QubitKind,
    target: &TwoQubitGate,
    t_max: f64,
    opts: &GateSearchOptions,
    warm_start: Option<&[f64]>,
) -> Result<GateOutcome> {
    if params.n_dqd() != 2 {
        return Err(Error::InvalidParameter("gate search needs two DQDs".into()));
    }
    if !(t_max > 0.0) || !(opts.grid_step > 0.0) {
        return Err(Error::InvalidParameter("time window and grid step must be positive".into()));
    }
    let gate = ConstantGate::new(params, kind)?;
    let goal = makhlin_invariants(target)?;
    let n = (t_max / opts.grid_step).floor() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * opts.grid_step).collect();
    let dist: Vec<f64> = times
        .iter()
        .map(|&t| {
            linalg::polar_unitary(&gate.block(t))
                .ok()
                .and_then(|u| TwoQubitGate::new(u).ok())
                .and_then(|u| makhlin_invariants(&u).ok())
                .map(|m| invariant_distance(&m, &goal))
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let mut minima: Vec<usize> = (0..times.len())
        .filter(|&k| {
            let left = k == 0 || dist[k] <= dist[k - 1];
            let right = k + 1 == times.len() || dist[k] <= dist[k + 1];
            left && right && dist[k].is_finite()
        })
        .collect();
    minima.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(a.cmp(&b)));
    minima.truncate(opts.candidates.max(1));
    if minima.is_empty() {
        return Err(Error::Fit("no usable point on the gate time grid".into()));
    }

    let mut warm: Option<Vec<f64>> = warm_start.map(|w| w.to_vec());
    let infidelity_at = |t: f64, warm: &mut Option<Vec<f64>>| -> Result<f64> {
        let proc = process_from_states(&gate.states(t), &gate.space, gate.kind)?;
        let best = maximize_local_fidelity(&proc, target, &opts.local, warm.as_deref());
        *warm = Some(best.params);
        Ok(1.0 - best.fidelity)
    };

    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &k in &minima {
        let t0 = times[k];
        let tm = (t0 - opts.grid_step).max(0.0);
        let tp = (t0 + opts.grid_step).min(t_max);
        let mut local = Vec::with_capacity(4);
        for t in [tm, t0, tp] {
            local.push((t, infidelity_at(t, &mut warm)?, warm.clone().unwrap()));
        }
        if tm < t0 && tp > t0 {
            let off = parabolic_vertex(local[0].1, local[1].1, local[2].1);
            if off != 0.0 {
                let ts = t0 + off * opts.grid_step;
                local.push((ts, infidelity_at(ts, &mut warm)?, warm.clone().unwrap()));
            }
        }
        for (t, f, p) in local {
            if best.as_ref().map_or(true, |b| f < b.1) {
                best = Some((t, f, p));
            }
        }
    }
    let (mut t, mut f, mut p) = best.expect("at least one candidate evaluated");

    // sub-ns ripple: rescan with the local frame held fixed, then reoptimize
    if opts.fine_step > 0.0 {
        let dressed = dressed_target(target, &p);
        let lo = (t - opts.grid_step).max(0.0);
        let hi = (t + opts.grid_step).min(t_max);
        let steps = ((hi - lo) / opts.fine_step).round() as usize;
        let mut t_fine = t;
        let mut f_fine = f64::INFINITY;
        for k in 0..=steps {
            let tk = lo + k as f64 * (hi - lo) / steps.max(1) as f64;
            let proc = process_from_states(&gate.states(tk), &gate.space, gate.kind)?;
            let fk = 1.0 - average_gate_fidelity(&proc, &dressed)?;
            if fk < f_fine {
                f_fine = fk;
                t_fine = tk;
            }
        }
        let mut w = Some(p.clone());
        let f_opt = infidelity_at(t_fine, &mut w)?;
        if f_opt < f {
            t = t_fine;
            f = f_opt;
            p = w.unwrap();
        }
    }
    Ok(GateOutcome {
        min_infidelity: f,
        gate_time: t,
        leakage: gate.leakage(t),
        local_params: p,
    })
}

/// Result of one noise sample; failed samples carry the error text and NaNs.
#[derive(Debug, Clone, PartialEq)]
pub struct McSample {
    pub index: u64,
    pub min_infidelity: f64,
    /// ns
    pub gate_time: f64,
    pub leakage: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub per_sample: Vec<McSample>,
    /// Mean over samples without errors.
    pub mean_infidelity: f64,
    pub std_error: f64,
    pub mean_gate_time: f64,
    pub mean_leakage: f64,
    pub n_failed: usize,
}

impl McResult {
    fn aggregate(per_sample: Vec<McSample>) -> Self {
        let ok: Vec<&McSample> = per_sample.iter().filter(|s| s.error.is_none()).collect();
        let n = ok.len() as f64;
        let mean = |f: &dyn Fn(&McSample) -> f64| -> f64 {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|s| f(s)).sum::<f64>() / n
            }
        };
        let mean_inf = mean(&|s| s.min_infidelity);
        let std_error = if ok.len() > 1 {
            let var = ok.iter().map(|s| (s.min_infidelity - mean_inf).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean_gate_time: mean(&|s| s.gate_time),
            mean_leakage: mean(&|s| s.leakage),
            mean_infidelity: mean_inf,
            std_error,
            n_failed: per_sample.len() - ok.len(),
            per_sample,
        }
    }
}

/// Monte Carlo over quasistatic offsets at constant parameters, with the
/// default gate search.
pub fn run_noisy_gate(
    params: &SystemParams,
    noise: &NoiseModel,
    target: &TwoQubitGate,
    kind: QubitKind,
    t_max: f64,
) -> Result<McResult> {
    run_noisy_gate_with(params, noise, target, kind, t_max, &GateSearchOptions::default())
}

/// Samples run on the current rayon pool; results are collected in index
/// order, so the outcome does not depend on the thread count.
pub fn run_noisy_gate_with(
    params: &SystemParams,
    noise: &NoiseModel,
    target: &TwoQubitGate,
    kind: QubitKind,
    t_max: f64,
    opts: &GateSearchOptions,
) -> Result<McResult> {
    noise.validate()?;
    params.validate()?;
    let nominal = best_gate(params, kind, target, t_max, opts, None)?;
    let warm = nominal.local_params.clone();
    let samples: Vec<McSample> = (0..noise.n_samples as u64)
        .into_par_iter()
        .map(|index| {
            let offsets = sample_quasistatic(noise, params.n_dqd(), index);
            let out = perturbed(params, &offsets)
                .and_then(|p| best_gate(&p, kind, target, t_max, opts, Some(&warm)));
            match out {
                Ok(g) => McSample {
                    index,
                    min_infidelity: g.min_infidelity,
                    gate_time: g.gate_time,
                    leakage: g.leakage,
                    error: None,
                },
                Err(e) => {
                    log::warn!("noise sample {index} failed: {e}");
                    McSample {
                        index,
                        min_infidelity: f64::NAN,
                        gate_time: f64::NAN,
                        leakage: f64::NAN,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    Ok(McResult::aggregate(samples))
}
