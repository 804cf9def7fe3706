use rayon::prelude::*;

use super::config::{
    CouplingConfig, ExperimentConfig, NoiseSweepConfig, PulseGateConfig, SplittingsConfig,
};
use super::table::{Cell, Column, ResultTable};
use crate::dynamics::{frame_unitary, propagate_gate, reduced_spin_process};
use crate::effective::{
    analytic_dressed_splitting, calibrate_dispersive_omega, dressed_levels, dressed_splittings_numeric, j_from_dressing,
    j_numeric, system_dressing,
};
use crate::error::{Error, Result};
use crate::gates::{
    average_gate_fidelity, optimize_local_ops_with, sqrt_iswap, LocalFreedom, LocalOptOptions,
};
use crate::model::{PulseSchedule, PulseStep, QubitKind};
use crate::noise::{run_noisy_gate, NoiseModel};

/// Flag text for rows near the spin-photon resonance.
pub const RESONANT_FLAG: &str = "resonant: approximations break down";

/// Longest transition-probability window used for J extraction, ns.
pub const J_WINDOW_CAP: f64 = 1e5;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn header(cfg: &ExperimentConfig, columns: Vec<Column>) -> ResultTable {
    let mut t = ResultTable::new(columns);
    t.meta("format", "cavitybus-csv/1");
    t.meta("generator", format!("cavitybus {}", env!("CARGO_PKG_VERSION")));
    t.meta("experiment", cfg.experiment().name());
    for (k, v) in cfg.flatten() {
        if k != "experiment" {
            t.meta(format!("config.{k}"), v);
        }
    }
    t
}

/// Runs the experiment a configuration describes.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    match cfg {
        ExperimentConfig::Splittings(c) => run_splittings(c),
        ExperimentConfig::CouplingSweep(c) => run_coupling_sweep(c),
        ExperimentConfig::PulseGate(c) => run_pulse_gate(c),
        ExperimentConfig::NoiseSweep(c) => run_noise_sweep(c),
    }
}

/// Configuration echoed in a table's metadata.
pub fn config_from_metadata(table: &ResultTable) -> Result<ExperimentConfig> {
    let mut pairs: Vec<(String, String)> = table
        .metadata
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| (k.to_string(), v.clone())))
        .collect();
    let exp = table
        .meta_value("experiment")
        .ok_or_else(|| Error::Config("table metadata lacks an experiment entry".into()))?;
    pairs.push(("experiment".into(), format!("\"{exp}\"")));
    ExperimentConfig::from_flat(&pairs)
}

/// Re-runs the experiment recorded in a table's metadata.
pub fn rerun_from_metadata(table: &ResultTable) -> Result<ResultTable> {
    run(&config_from_metadata(table)?)
}

fn flag_of<T, E: ToString>(r: &std::result::Result<T, E>) -> String {
    match r {
        Ok(_) => String::new(),
        Err(e) => e.to_string(),
    }
}

fn join_flags(flags: &[String]) -> String {
    flags.iter().filter(|s| !s.is_empty()).cloned().collect::<Vec<_>>().join("; ")
}

/// Numeric and analytic dressed splitting of spin 1 over ε_1 for each Ω_1.
pub fn run_splittings(cfg: &SplittingsConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let wrapped = ExperimentConfig::Splittings(cfg.clone());
    let mut table = header(
        &wrapped,
        vec![
            Column::new("omega_tunnel1", "GHz"),
            Column::new("epsilon1", "GHz"),
            Column::new("theta1", "rad"),
            Column::new("omega_z1_numeric", "GHz"),
            Column::new("omega_z1_analytic", "GHz"),
            Column::new("abs_difference", "GHz"),
            Column::new("flag", ""),
        ],
    );
    table.meta(
        "note.sweep",
        "tunnel-coupling list and detuning range are illustrative defaults unless set in the config",
    );
    let s = &cfg.sweep;
    let points: Vec<(f64, f64)> = s
        .omega_tunnel1_list_ghz
        .iter()
        .flat_map(|&w| linspace(s.epsilon1_min_ghz, s.epsilon1_max_ghz, s.points).into_iter().map(move |e| (w, e)))
        .collect();
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|&(w, e)| {
            let (num, ana, theta) = match cfg.base_params(w, e) {
                Ok(p) => (
                    dressed_splittings_numeric(&p).map(|v| v[0]).map_err(|e| e.to_string()),
                    system_dressing(&p)
                        .and_then(|d| analytic_dressed_splitting(&d, 0))
                        .map_err(|e| e.to_string()),
                    p.dqds[0].theta(),
                ),
                Err(err) => (Err(err.to_string()), Err(String::new()), f64::NAN),
            };
            let flag = join_flags(&[flag_of(&num), flag_of(&ana)]);
            let n = num.unwrap_or(f64::NAN);
            let a = ana.unwrap_or(f64::NAN);
            vec![w.into(), e.into(), theta.into(), n.into(), a.into(), (n - a).abs().into(), flag.into()]
        })
        .collect();
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

/// J from the analytic reduction and from the simulated flip-flop
/// oscillation over the shared Zeeman frequency.
pub fn run_coupling_sweep(cfg: &CouplingConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let wrapped = ExperimentConfig::CouplingSweep(cfg.clone());
    let mut table = header(
        &wrapped,
        vec![
            Column::new("omega", "GHz"),
            Column::new("j_analytic", "GHz"),
            Column::new("j_numeric", "GHz"),
            Column::new("j_dressed", "GHz"),
            Column::new("rel_difference", ""),
            Column::new("dispersive_gap", "GHz"),
            Column::new("flag", ""),
        ],
    );
    table.meta("note.j_numeric", "|J| from the first maximum of the flip-flop transition probability");
    table.meta("note.j_dressed", "flip-flop element of the exactly block-diagonalized Hamiltonian");
    let s = &cfg.sweep;
    let omegas = linspace(s.omega_min_ghz, s.omega_max_ghz, s.points);
    let rows: Vec<Vec<Cell>> = omegas
        .par_iter()
        .map(|&w| {
            let mut flags = Vec::new();
            let p = match cfg.params_at(w) {
                Ok(p) => p,
                Err(e) => {
                    let nan = Cell::Num(f64::NAN);
                    return vec![w.into(), nan.clone(), nan.clone(), nan.clone(), nan.clone(), nan, e.to_string().into()];
                }
            };
            let dr = system_dressing(&p);
            let (gap, resonant) = match &dr {
                Ok(dr) => {
                    let gap = dr
                        .dqds
                        .iter()
                        .map(|d| dr.omega_r_prime - d.omega_z_prime)
                        .fold(f64::INFINITY, f64::min);
                    let gx = dr.dqds.iter().map(|d| d.g_x_prime.abs()).fold(0.0, f64::max);
                    (gap, gap.abs() < s.guard_ratio * gx)
                }
                Err(_) => (f64::NAN, false),
            };
            if resonant {
                flags.push(RESONANT_FLAG.to_string());
            }
            let ja = dr.and_then(|d| j_from_dressing(&d));
            flags.push(flag_of(&ja));
            let jd = dressed_levels(&p, QubitKind::Spin).map(|l| l.exchange());
            flags.push(flag_of(&jd));
            let ja = ja.unwrap_or(f64::NAN);
            let jd = jd.unwrap_or(f64::NAN);
            let j_est = if jd.is_finite() && jd != 0.0 { jd.abs() } else { ja.abs() };
            let window = if j_est > 0.0 && j_est.is_finite() {
                (s.window_factor / j_est).min(J_WINDOW_CAP)
            } else {
                J_WINDOW_CAP
            };
            let jn = j_numeric(&p, window);
            flags.push(flag_of(&jn));
            let jn = jn.unwrap_or(f64::NAN);
            let rel = if jn != 0.0 { (ja.abs() - jn).abs() / jn } else { f64::NAN };
            vec![w.into(), ja.into(), jn.into(), jd.into(), rel.into(), gap.into(), join_flags(&flags).into()]
        })
        .collect();
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

/// Detuning schedule of the pulsed gate: hold, ramp to resonance, hold,
/// ramp back, optional detuned tail.
pub fn pulse_schedule(cfg: &PulseGateConfig) -> Result<PulseSchedule> {
    let s = &cfg.schedule;
    let e0 = cfg.epsilons_at(&s.start_theta_rad)?;
    let e1 = cfg.epsilons_at(&s.resonant_theta_rad)?;
    let progs: Vec<Vec<PulseStep>> = (0..2)
        .map(|i| {
            let mut v = vec![
                PulseStep::Hold { duration: s.hold_ns },
                PulseStep::Smooth {
                    duration: s.ramp_ns,
                    to: e1[i],
                },
                PulseStep::Hold {
                    duration: s.resonant_hold_ns,
                },
                PulseStep::Smooth {
                    duration: s.ramp_back_ns,
                    to: e0[i],
                },
            ];
            if s.tail_ns > 0.0 {
                v.push(PulseStep::Hold { duration: s.tail_ns });
            }
            v
        })
        .collect();
    PulseSchedule::from_steps(&e0, &progs)
}

fn sample_times(step: f64, span: f64, extra: &[f64]) -> Vec<f64> {
    let n = (span / step + 1e-9).floor() as usize;
    let mut t: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    t.extend_from_slice(extra);
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    t
}

/// Pulsed √iSWAP: detunings, fidelities and leakage over time.
pub fn run_pulse_gate(cfg: &PulseGateConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let wrapped = ExperimentConfig::PulseGate(cfg.clone());
    let mut table = header(
        &wrapped,
        vec![
            Column::new("t", "ns"),
            Column::new("epsilon1", "GHz"),
            Column::new("epsilon2", "GHz"),
            Column::new("fidelity_local", ""),
            Column::new("fidelity_post_only", ""),
            Column::new("fidelity_rotating_frame", ""),
            Column::new("leakage", ""),
            Column::new("row", ""),
        ],
    );
    let s = &cfg.schedule;
    let schedule = pulse_schedule(cfg)?;
    let base = cfg.params_at(&s.start_theta_rad)?;
    let resonant = cfg.params_at(&s.resonant_theta_rad)?;
    let pulse_end = s.pulse_end();
    let times = sample_times(s.sample_step_ns, schedule.span(), &[pulse_end, schedule.span()]);
    let prop = cfg.propagator.to_config()?;
    let traj = propagate_gate(&base, QubitKind::Spin, &schedule, &prop, &times)?;
    let frame = dressed_levels(&base, QubitKind::Spin)?.splittings();
    let res_levels = dressed_levels(&resonant, QubitKind::Spin)?;
    let res_w = res_levels.splittings();
    table.meta("result.frame_frequencies_ghz", format!("[{}, {}]", res_fmt(frame[0]), res_fmt(frame[1])));
    table.meta("result.resonant_detuning_ghz", res_fmt(res_w[1] - res_w[0]));
    table.meta("result.resonant_exchange_ghz", res_fmt(res_levels.exchange()));
    if let Some(c) = traj.convergence {
        table.meta("result.dt_ns", res_fmt(c.dt));
        table.meta("result.convergence_change", res_fmt(c.change));
        table.meta("result.converged", c.converged.to_string());
    }
    let target = sqrt_iswap();
    let full = LocalOptOptions {
        starts: cfg.fidelity.local_starts,
        ..LocalOptOptions::default()
    };
    let post = LocalOptOptions {
        freedom: LocalFreedom::PostOnly,
        ..full.clone()
    };
    let report_post = cfg.fidelity.report_post_only;
    let rows: Vec<Result<[f64; 7]>> = times
        .par_iter()
        .map(|&t| {
            let eps = schedule.evaluate(t)?;
            let proc = reduced_spin_process(&traj, t, &base)?;
            let f_local = optimize_local_ops_with(&proc, &target, &full, None)?.local_opt_fidelity;
            let f_post = if report_post {
                optimize_local_ops_with(&proc, &target, &post, None)?.local_opt_fidelity
            } else {
                f64::NAN
            };
            let f_raw = average_gate_fidelity(&proc.then(&frame_unitary(&frame, t)), &target)?;
            Ok([t, eps[0], eps[1], f_local, f_post, f_raw, proc.completeness_defect])
        })
        .collect();
    let rows: Vec<[f64; 7]> = rows.into_iter().collect::<Result<_>>()?;
    for r in &rows {
        table.push(r.iter().map(|&x| Cell::Num(x)).chain(std::iter::once("trace".into())).collect());
    }
    let end = rows
        .iter()
        .find(|r| (r[0] - pulse_end).abs() < 1e-9)
        .copied()
        .expect("pulse end is sampled");
    let max_leak_after = rows
        .iter()
        .filter(|r| r[0] >= pulse_end - 1e-9)
        .map(|r| r[6])
        .fold(0.0, f64::max);
    let mut summary: Vec<Cell> = end[..6].iter().map(|&x| Cell::Num(x)).collect();
    summary.push(max_leak_after.into());
    summary.push("summary".into());
    table.push(summary);
    table.meta("result.final_fidelity_local", res_fmt(end[3]));
    table.meta("result.max_leakage_after_pulse", res_fmt(max_leak_after));
    Ok(table)
}

fn res_fmt(x: f64) -> String {
    super::table::format_number(x)
}

/// Noisy √iSWAP infidelity over tunnel coupling, noise strength and qubit
/// kind. Noiseless cells use a single sample.
pub fn run_noise_sweep(cfg: &NoiseSweepConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let wrapped = ExperimentConfig::NoiseSweep(cfg.clone());
    let mut table = header(
        &wrapped,
        vec![
            Column::new("omega_tunnel", "GHz"),
            Column::new("sigma_eps", "GHz"),
            Column::new("qubit_kind", ""),
            Column::new("omega_z", "GHz"),
            Column::new("j_nominal", "GHz"),
            Column::new("t_estimate", "ns"),
            Column::new("mean_infidelity", ""),
            Column::new("std_error", ""),
            Column::new("mean_gate_time", "ns"),
            Column::new("mean_leakage", ""),
            Column::new("n_samples", ""),
            Column::new("n_failed", ""),
            Column::new("flag", ""),
        ],
    );
    table.meta("note.samples", "cells with zero noise use one sample");
    let n = &cfg.noise;
    let kinds = n.kinds()?;
    let target = sqrt_iswap();
    for &omega in &cfg.sweep.omega_tunnel_list_ghz {
        for &kind in &kinds {
            let setup = (|| -> Result<_> {
                let (p, wz) = match kind {
                    QubitKind::Spin => {
                        let probe = cfg.params_at(omega, 0.0)?;
                        let w = calibrate_dispersive_omega(&probe, n.dispersive_ratio)?;
                        (cfg.params_at(omega, w)?, w)
                    }
                    QubitKind::Charge => {
                        let mut p = cfg.params_at(omega, 0.0)?;
                        for d in p.dqds.iter_mut() {
                            d.g_x = 0.0;
                            d.g_z = 0.0;
                        }
                        (p, f64::NAN)
                    }
                };
                let j = dressed_levels(&p, kind)?.exchange();
                if !(j.abs() > 0.0) {
                    return Err(Error::Fit(format!("no exchange coupling at Ω = {omega} GHz")));
                }
                Ok((p, wz, j))
            })();
            for &sigma in &n.sigma_list_ghz {
                let samples = if sigma == 0.0 { 1 } else { n.samples };
                let mut row: Vec<Cell> = vec![omega.into(), sigma.into(), kind.name().into()];
                let out = setup.as_ref().map_err(|e| e.to_string()).and_then(|(p, wz, j)| {
                    let t_est = 1.0 / (8.0 * j.abs());
                    let model = NoiseModel {
                        sigma_eps: sigma,
                        n_samples: samples,
                        master_seed: n.seed,
                    };
                    log::info!("noise cell Ω={omega} GHz σ={sigma} GHz {}: {samples} samples", kind.name());
                    run_noisy_gate(p, &model, &target, kind, n.window_factor * t_est)
                        .map(|r| (r, *wz, *j, t_est))
                        .map_err(|e| e.to_string())
                });
                match out {
                    Ok((r, wz, j, t_est)) => {
                        let flag = if r.n_failed > 0 {
                            format!("{} samples failed", r.n_failed)
                        } else {
                            String::new()
                        };
                        row.extend([
                            wz.into(),
                            j.into(),
                            t_est.into(),
                            r.mean_infidelity.into(),
                            r.std_error.into(),
                            r.mean_gate_time.into(),
                            r.mean_leakage.into(),
                            (samples as f64).into(),
                            (r.n_failed as f64).into(),
                            flag.into(),
                        ]);
                    }
                    Err(e) => {
                        row.extend(std::iter::repeat(Cell::Num(f64::NAN)).take(7));
                        row.push((samples as f64).into());
                        row.push(Cell::Num(f64::NAN));
                        row.push(e.into());
                    }
                }
                table.push(row);
            }
        }
    }
    Ok(table)
}
