//! Experiment configuration files.
//!
//! A config is TOML with dotted section keys (`dqd1.omega_tunnel_ghz = 7.3`).
//! Every experiment has a complete default configuration; a user file is
//! merged over it key by key and the result must deserialize into the
//! experiment's schema, so misspelled keys are rejected. The resolved
//! configuration serializes back to a file that reproduces it exactly.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use toml::{Table, Value};

use crate::dynamics::{PropagatorConfig, StepMethod};
use crate::error::{Error, Result};
use crate::model::{epsilon_for_theta, DqdParams, QubitKind, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Splittings,
    CouplingSweep,
    PulseGate,
    NoiseSweep,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Splittings => "splittings",
            Experiment::CouplingSweep => "coupling_sweep",
            Experiment::PulseGate => "pulse_gate",
            Experiment::NoiseSweep => "noise_sweep",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "splittings" => Experiment::Splittings,
            "coupling_sweep" => Experiment::CouplingSweep,
            "pulse_gate" => Experiment::PulseGate,
            "noise_sweep" => Experiment::NoiseSweep,
            _ => {
                return Err(Error::Config(format!(
                    "unknown experiment `{s}` (expected splittings, coupling_sweep, pulse_gate or noise_sweep)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega_r_ghz: f64,
    pub n_photon_max: usize,
}

/// One DQD. Quantities an experiment sweeps or derives are left unset; the
/// detuning may be given either directly or as a mixing angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqdSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_tunnel_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_z_ghz: Option<f64>,
    pub g_x_ghz: f64,
    pub g_z_ghz: f64,
    pub g_ac_ghz: f64,
}

impl DqdSection {
    fn new(theta: Option<f64>, omega_tunnel: Option<f64>, omega_z: Option<f64>, g_x: f64, g_ac: f64) -> Self {
        Self {
            epsilon_ghz: None,
            theta_rad: theta,
            omega_tunnel_ghz: omega_tunnel,
            omega_z_ghz: omega_z,
            g_x_ghz: g_x,
            g_z_ghz: 0.0,
            g_ac_ghz: g_ac,
        }
    }

    /// DQD parameters with swept quantities filled in by the caller.
    pub fn params(&self, omega_tunnel: Option<f64>, omega_z: Option<f64>) -> Result<DqdParams> {
        let omega_tunnel = omega_tunnel
            .or(self.omega_tunnel_ghz)
            .ok_or_else(|| Error::Config("tunnel coupling is not set".into()))?;
        let omega_z = omega_z
            .or(self.omega_z_ghz)
            .ok_or_else(|| Error::Config("Zeeman frequency is not set".into()))?;
        let d = DqdParams {
            epsilon: 0.0,
            omega_tunnel,
            omega_z,
            g_x: self.g_x_ghz,
            g_z: self.g_z_ghz,
            g_ac: self.g_ac_ghz,
        };
        let d = match (self.epsilon_ghz, self.theta_rad) {
            (Some(e), None) => DqdParams { epsilon: e, ..d },
            (None, Some(th)) => d.with_theta(th)?,
            _ => return Err(Error::Config("exactly one of epsilon_ghz and theta_rad must be set".into())),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingsSweep {
    pub epsilon1_min_ghz: f64,
    pub epsilon1_max_ghz: f64,
    pub points: usize,
    pub omega_tunnel1_list_ghz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSweep {
    /// Shared Zeeman frequency range, GHz.
    pub omega_min_ghz: f64,
    pub omega_max_ghz: f64,
    pub points: usize,
    /// Rows with `|ω'_r − ω'_z| < guard_ratio·|g'_x|` are flagged as resonant.
    pub guard_ratio: f64,
    /// Transition-probability window in units of `1/|J|`.
    pub window_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub start_theta_rad: Vec<f64>,
    pub resonant_theta_rad: Vec<f64>,
    pub hold_ns: f64,
    pub ramp_ns: f64,
    pub resonant_hold_ns: f64,
    pub ramp_back_ns: f64,
    /// Detuned hold appended after the return ramp.
    pub tail_ns: f64,
    pub sample_step_ns: f64,
}

impl ScheduleSection {
    pub fn pulse_end(&self) -> f64 {
        self.hold_ns + self.ramp_ns + self.resonant_hold_ns + self.ramp_back_ns
    }

    pub fn span(&self) -> f64 {
        self.pulse_end() + self.tail_ns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    pub dt_ps: f64,
    /// `magnus4` or `midpoint`.
    pub method: String,
    pub convergence_check: bool,
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl PropagatorSection {
    pub fn to_config(&self) -> Result<PropagatorConfig> {
        let method = match self.method.as_str() {
            "magnus4" => StepMethod::Magnus4,
            "midpoint" => StepMethod::Midpoint,
            m => {
                return Err(Error::Config(format!(
                    "propagator.method must be `magnus4` or `midpoint`, got `{m}`"
                )))
            }
        };
        let c = PropagatorConfig {
            dt: self.dt_ps * 1e-3,
            method,
            convergence_check: self.convergence_check,
            tolerance: self.tolerance,
            max_halvings: self.max_halvings,
        };
        c.validate().map_err(|e| Error::Config(format!("propagator: {e}")))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelitySection {
    /// Random restarts of the local-operation search.
    pub local_starts: usize,
    /// Also report the fidelity with local corrections after the gate only.
    pub report_post_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweepAxis {
    pub omega_tunnel_list_ghz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_list_ghz: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// `spin` and/or `charge`.
    pub qubit_kinds: Vec<String>,
    /// Spin variant: ω is chosen so that `ω'_r − ω'_z = ratio·|g'_x|`.
    pub dispersive_ratio: f64,
    /// Gate-time window in units of the noiseless estimate `1/(8|J|)`.
    pub window_factor: f64,
}

impl NoiseSection {
    pub fn kinds(&self) -> Result<Vec<QubitKind>> {
        self.qubit_kinds
            .iter()
            .map(|k| match k.as_str() {
                "spin" => Ok(QubitKind::Spin),
                "charge" => Ok(QubitKind::Charge),
                _ => Err(Error::Config(format!("noise.qubit_kinds: unknown kind `{k}` (use spin or charge)"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingsConfig {
    pub system: SystemSection,
    pub dqd1: DqdSection,
    pub dqd2: DqdSection,
    pub sweep: SplittingsSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub system: SystemSection,
    pub dqd1: DqdSection,
    pub dqd2: DqdSection,
    pub sweep: CouplingSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseGateConfig {
    pub system: SystemSection,
    pub dqd1: DqdSection,
    pub dqd2: DqdSection,
    pub schedule: ScheduleSection,
    pub propagator: PropagatorSection,
    pub fidelity: FidelitySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweepConfig {
    pub system: SystemSection,
    pub dqd1: DqdSection,
    pub dqd2: DqdSection,
    pub sweep: NoiseSweepAxis,
    pub noise: NoiseSection,
}

impl Default for SplittingsConfig {
    fn default() -> Self {
        Self {
            system: SystemSection {
                omega_r_ghz: 6.0,
                n_photon_max: 9,
            },
            dqd1: DqdSection::new(None, None, Some(5.85), 0.2, 0.04),
            dqd2: DqdSection::new(Some(FRAC_PI_2), Some(7.5), Some(5.85), 0.2, 0.04),
            sweep: SplittingsSweep {
                epsilon1_min_ghz: -5.0,
                epsilon1_max_ghz: 5.0,
                points: 61,
                omega_tunnel1_list_ghz: vec![7.5, 9.0, 12.0],
            },
        }
    }
}

impl Default for CouplingConfig {
    fn default() -> Self {
        let d = DqdSection::new(Some(FRAC_PI_2), Some(7.5), None, 0.2, 0.04);
        Self {
            system: SystemSection {
                omega_r_ghz: 6.0,
                n_photon_max: 9,
            },
            dqd1: d.clone(),
            dqd2: d,
            sweep: CouplingSweep {
                omega_min_ghz: 5.70,
                omega_max_ghz: 6.00,
                points: 61,
                guard_ratio: 10.0,
                window_factor: 1.0,
            },
        }
    }
}

impl Default for PulseGateConfig {
    fn default() -> Self {
        Self {
            system: SystemSection {
                omega_r_ghz: 6.0,
                n_photon_max: 9,
            },
            dqd1: DqdSection::new(None, Some(7.3), Some(5.86), 0.2, 0.045),
            dqd2: DqdSection::new(None, Some(7.5), Some(5.86), 0.23, 0.04),
            schedule: ScheduleSection {
                start_theta_rad: vec![1.1, 1.2],
                resonant_theta_rad: vec![FRAC_PI_2, 1.3983],
                hold_ns: 100.0,
                ramp_ns: 50.0,
                resonant_hold_ns: 400.0,
                ramp_back_ns: 50.0,
                tail_ns: 100.0,
                sample_step_ns: 2.0,
            },
            propagator: PropagatorSection {
                dt_ps: 50.0,
                method: "magnus4".into(),
                convergence_check: true,
                tolerance: 1e-5,
                max_halvings: 6,
            },
            fidelity: FidelitySection {
                local_starts: 8,
                report_post_only: true,
            },
        }
    }
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        let d = DqdSection::new(Some(FRAC_PI_2), None, None, 0.2, 0.04);
        Self {
            system: SystemSection {
                omega_r_ghz: 6.0,
                n_photon_max: 9,
            },
            dqd1: d.clone(),
            dqd2: d,
            sweep: NoiseSweepAxis {
                omega_tunnel_list_ghz: vec![8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0],
            },
            noise: NoiseSection {
                sigma_list_ghz: vec![0.0, 0.0026, 0.035],
                samples: 100,
                seed: 1,
                qubit_kinds: vec!["spin".into(), "charge".into()],
                dispersive_ratio: 30.0,
                window_factor: 2.0,
            },
        }
    }
}

/// A resolved configuration for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Splittings(SplittingsConfig),
    CouplingSweep(CouplingConfig),
    PulseGate(PulseGateConfig),
    NoiseSweep(NoiseSweepConfig),
}

/// Command-line overrides applied after the file is read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub dt_ps: Option<f64>,
}

fn merge(base: &mut Table, user: Table, path: &str) {
    for (k, v) in user {
        let key = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(u)) => {
                // a user-chosen detuning form replaces the default one
                if u.contains_key("epsilon_ghz") {
                    b.remove("theta_rad");
                }
                if u.contains_key("theta_rad") {
                    b.remove("epsilon_ghz");
                }
                merge(b, u, &key);
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn resolve<T: Serialize + DeserializeOwned + Default>(user: Table) -> Result<T> {
    let mut base = Table::try_from(T::default()).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut base, user, "");
    T::deserialize(base).map_err(|e| Error::Config(e.to_string()))
}

fn reject_set(section: &str, fields: &[(&str, bool)], why: &str) -> Result<()> {
    for (name, set) in fields {
        if *set {
            return Err(Error::Config(format!("{section}.{name} cannot be set: {why}")));
        }
    }
    Ok(())
}

fn require_detuning(section: &str, d: &DqdSection) -> Result<()> {
    match (d.epsilon_ghz, d.theta_rad) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "{section}: set either epsilon_ghz or theta_rad, not both"
        ))),
        (None, None) => Err(Error::Config(format!("{section}: epsilon_ghz or theta_rad is required"))),
        _ => Ok(()),
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Config(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Config(format!("{name} must be finite, got {x}")));
    }
    Ok(())
}

fn check_system(s: &SystemSection) -> Result<()> {
    check_positive("system.omega_r_ghz", s.omega_r_ghz)?;
    if s.n_photon_max == 0 || s.n_photon_max > 40 {
        return Err(Error::Config(format!(
            "system.n_photon_max must lie in 1..=40, got {}",
            s.n_photon_max
        )));
    }
    Ok(())
}

fn check_couplings(section: &str, d: &DqdSection) -> Result<()> {
    check_finite(&format!("{section}.g_x_ghz"), d.g_x_ghz)?;
    check_finite(&format!("{section}.g_z_ghz"), d.g_z_ghz)?;
    if !(d.g_ac_ghz >= 0.0) || !d.g_ac_ghz.is_finite() {
        return Err(Error::Config(format!("{section}.g_ac_ghz must be non-negative, got {}", d.g_ac_ghz)));
    }
    if let Some(e) = d.epsilon_ghz {
        check_finite(&format!("{section}.epsilon_ghz"), e)?;
    }
    if let Some(th) = d.theta_rad {
        if !(th > 0.0 && th < std::f64::consts::PI) {
            return Err(Error::Config(format!("{section}.theta_rad must lie in (0, π), got {th}")));
        }
    }
    if let Some(w) = d.omega_tunnel_ghz {
        check_positive(&format!("{section}.omega_tunnel_ghz"), w)?;
    }
    if let Some(w) = d.omega_z_ghz {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Config(format!("{section}.omega_z_ghz must be non-negative, got {w}")));
        }
    }
    Ok(())
}

fn check_points(name: &str, n: usize) -> Result<()> {
    if n == 0 || n > 100_000 {
        return Err(Error::Config(format!("{name} must lie in 1..=100000, got {n}")));
    }
    Ok(())
}

fn check_range(name: &str, lo: f64, hi: f64, points: usize) -> Result<()> {
    check_finite(&format!("{name} lower end"), lo)?;
    check_finite(&format!("{name} upper end"), hi)?;
    if points > 1 && !(hi > lo) {
        return Err(Error::Config(format!("{name}: upper end {hi} must exceed lower end {lo}")));
    }
    Ok(())
}

impl SplittingsConfig {
    pub fn validate(&self) -> Result<()> {
        check_system(&self.system)?;
        check_couplings("dqd1", &self.dqd1)?;
        check_couplings("dqd2", &self.dqd2)?;
        reject_set(
            "dqd1",
            &[
                ("epsilon_ghz", self.dqd1.epsilon_ghz.is_some()),
                ("theta_rad", self.dqd1.theta_rad.is_some()),
                ("omega_tunnel_ghz", self.dqd1.omega_tunnel_ghz.is_some()),
            ],
            "it is swept (use the sweep section)",
        )?;
        require_detuning("dqd2", &self.dqd2)?;
        let s = &self.sweep;
        check_points("sweep.points", s.points)?;
        check_range("sweep.epsilon1", s.epsilon1_min_ghz, s.epsilon1_max_ghz, s.points)?;
        if s.omega_tunnel1_list_ghz.is_empty() {
            return Err(Error::Config("sweep.omega_tunnel1_list_ghz must not be empty".into()));
        }
        for &w in &s.omega_tunnel1_list_ghz {
            check_positive("sweep.omega_tunnel1_list_ghz entry", w)?;
        }
        self.base_params(s.omega_tunnel1_list_ghz[0], 0.0)?;
        Ok(())
    }

    pub fn base_params(&self, omega_tunnel1: f64, epsilon1: f64) -> Result<SystemParams> {
        let mut d1 = self.dqd1.clone();
        d1.epsilon_ghz = Some(epsilon1);
        let p = SystemParams {
            omega_r: self.system.omega_r_ghz,
            dqds: vec![d1.params(Some(omega_tunnel1), None)?, self.dqd2.params(None, None)?],
            n_photon_max: self.system.n_photon_max,
        };
        p.validate()?;
        Ok(p)
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        check_system(&self.system)?;
        for (name, d) in [("dqd1", &self.dqd1), ("dqd2", &self.dqd2)] {
            check_couplings(name, d)?;
            reject_set(
                name,
                &[("omega_z_ghz", d.omega_z_ghz.is_some())],
                "the shared Zeeman frequency is swept (use the sweep section)",
            )?;
            require_detuning(name, d)?;
        }
        let s = &self.sweep;
        check_points("sweep.points", s.points)?;
        check_range("sweep.omega", s.omega_min_ghz, s.omega_max_ghz, s.points)?;
        check_positive("sweep.omega_min_ghz", s.omega_min_ghz)?;
        check_positive("sweep.guard_ratio", s.guard_ratio)?;
        check_positive("sweep.window_factor", s.window_factor)?;
        self.params_at(s.omega_min_ghz)?;
        Ok(())
    }

    pub fn params_at(&self, omega: f64) -> Result<SystemParams> {
        let p = SystemParams {
            omega_r: self.system.omega_r_ghz,
            dqds: vec![self.dqd1.params(None, Some(omega))?, self.dqd2.params(None, Some(omega))?],
            n_photon_max: self.system.n_photon_max,
        };
        p.validate()?;
        Ok(p)
    }
}

impl PulseGateConfig {
    pub fn validate(&self) -> Result<()> {
        check_system(&self.system)?;
        for (name, d) in [("dqd1", &self.dqd1), ("dqd2", &self.dqd2)] {
            check_couplings(name, d)?;
            reject_set(
                name,
                &[
                    ("epsilon_ghz", d.epsilon_ghz.is_some()),
                    ("theta_rad", d.theta_rad.is_some()),
                ],
                "detunings are set by the schedule section",
            )?;
            if d.omega_tunnel_ghz.is_none() || d.omega_z_ghz.is_none() {
                return Err(Error::Config(format!("{name}: omega_tunnel_ghz and omega_z_ghz are required")));
            }
        }
        let s = &self.schedule;
        for (name, v) in [("start_theta_rad", &s.start_theta_rad), ("resonant_theta_rad", &s.resonant_theta_rad)] {
            if v.len() != 2 {
                return Err(Error::Config(format!("schedule.{name} needs two angles, got {}", v.len())));
            }
            for &th in v {
                if !(th > 0.0 && th < std::f64::consts::PI) {
                    return Err(Error::Config(format!("schedule.{name} entries must lie in (0, π), got {th}")));
                }
            }
        }
        check_positive("schedule.hold_ns", s.hold_ns)?;
        check_positive("schedule.ramp_ns", s.ramp_ns)?;
        check_positive("schedule.resonant_hold_ns", s.resonant_hold_ns)?;
        check_positive("schedule.ramp_back_ns", s.ramp_back_ns)?;
        if !(s.tail_ns >= 0.0) || !s.tail_ns.is_finite() {
            return Err(Error::Config(format!("schedule.tail_ns must be non-negative, got {}", s.tail_ns)));
        }
        check_positive("schedule.sample_step_ns", s.sample_step_ns)?;
        check_positive("propagator.dt_ps", self.propagator.dt_ps)?;
        check_positive("propagator.tolerance", self.propagator.tolerance)?;
        self.propagator.to_config()?;
        if self.fidelity.local_starts == 0 {
            return Err(Error::Config("fidelity.local_starts must be at least 1".into()));
        }
        self.params_at(&s.start_theta_rad)?;
        self.params_at(&s.resonant_theta_rad)?;
        Ok(())
    }

    /// System parameters with the detunings set from mixing angles.
    pub fn params_at(&self, thetas: &[f64]) -> Result<SystemParams> {
        let mut dqds = Vec::new();
        for (d, &th) in [&self.dqd1, &self.dqd2].into_iter().zip(thetas) {
            let mut d = d.clone();
            d.theta_rad = Some(th);
            dqds.push(d.params(None, None)?);
        }
        let p = SystemParams {
            omega_r: self.system.omega_r_ghz,
            dqds,
            n_photon_max: self.system.n_photon_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn epsilons_at(&self, thetas: &[f64]) -> Result<Vec<f64>> {
        [&self.dqd1, &self.dqd2]
            .into_iter()
            .zip(thetas)
            .map(|(d, &th)| epsilon_for_theta(th, d.omega_tunnel_ghz.unwrap_or(f64::NAN)))
            .collect()
    }
}

impl NoiseSweepConfig {
    pub fn validate(&self) -> Result<()> {
        check_system(&self.system)?;
        for (name, d) in [("dqd1", &self.dqd1), ("dqd2", &self.dqd2)] {
            check_couplings(name, d)?;
            reject_set(
                name,
                &[
                    ("omega_tunnel_ghz", d.omega_tunnel_ghz.is_some()),
                    ("omega_z_ghz", d.omega_z_ghz.is_some()),
                ],
                "tunnel couplings are swept and Zeeman frequencies calibrated",
            )?;
            require_detuning(name, d)?;
        }
        if self.sweep.omega_tunnel_list_ghz.is_empty() {
            return Err(Error::Config("sweep.omega_tunnel_list_ghz must not be empty".into()));
        }
        for &w in &self.sweep.omega_tunnel_list_ghz {
            check_positive("sweep.omega_tunnel_list_ghz entry", w)?;
        }
        let n = &self.noise;
        if n.sigma_list_ghz.is_empty() {
            return Err(Error::Config("noise.sigma_list_ghz must not be empty".into()));
        }
        for &s in &n.sigma_list_ghz {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Config(format!("noise.sigma_list_ghz entries must be non-negative, got {s}")));
            }
        }
        if n.samples == 0 {
            return Err(Error::Config("noise.samples must be at least 1".into()));
        }
        if n.kinds()?.is_empty() {
            return Err(Error::Config("noise.qubit_kinds must not be empty".into()));
        }
        check_positive("noise.dispersive_ratio", n.dispersive_ratio)?;
        check_positive("noise.window_factor", n.window_factor)?;
        self.params_at(self.sweep.omega_tunnel_list_ghz[0], 0.0)?;
        Ok(())
    }

    /// Symmetric pair at tunnel coupling `omega_tunnel` and Zeeman frequency `omega_z`.
    pub fn params_at(&self, omega_tunnel: f64, omega_z: f64) -> Result<SystemParams> {
        let p = SystemParams {
            omega_r: self.system.omega_r_ghz,
            dqds: vec![
                self.dqd1.params(Some(omega_tunnel), Some(omega_z))?,
                self.dqd2.params(Some(omega_tunnel), Some(omega_z))?,
            ],
            n_photon_max: self.system.n_photon_max,
        };
        p.validate()?;
        Ok(p)
    }
}

impl ExperimentConfig {
    pub fn default_for(experiment: Experiment) -> Self {
        match experiment {
            Experiment::Splittings => ExperimentConfig::Splittings(Default::default()),
            Experiment::CouplingSweep => ExperimentConfig::CouplingSweep(Default::default()),
            Experiment::PulseGate => ExperimentConfig::PulseGate(Default::default()),
            Experiment::NoiseSweep => ExperimentConfig::NoiseSweep(Default::default()),
        }
    }

    /// Parses a config file. The optional top-level `experiment` key must
    /// agree with `expected` when both are given.
    pub fn from_toml_str(text: &str, expected: Option<Experiment>) -> Result<Self> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let named = match table.remove("experiment") {
            Some(Value::String(s)) => Some(Experiment::from_name(&s)?),
            Some(other) => {
                return Err(Error::Config(format!("`experiment` must be a string, got {other}")));
            }
            None => None,
        };
        let experiment = match (named, expected) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "config is for experiment `{}` but `{}` was requested",
                    a.name(),
                    b.name()
                )))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(Error::Config("config does not name an experiment".into())),
        };
        let cfg = match experiment {
            Experiment::Splittings => ExperimentConfig::Splittings(resolve(table)?),
            Experiment::CouplingSweep => ExperimentConfig::CouplingSweep(resolve(table)?),
            Experiment::PulseGate => ExperimentConfig::PulseGate(resolve(table)?),
            Experiment::NoiseSweep => ExperimentConfig::NoiseSweep(resolve(table)?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn experiment(&self) -> Experiment {
        match self {
            ExperimentConfig::Splittings(_) => Experiment::Splittings,
            ExperimentConfig::CouplingSweep(_) => Experiment::CouplingSweep,
            ExperimentConfig::PulseGate(_) => Experiment::PulseGate,
            ExperimentConfig::NoiseSweep(_) => Experiment::NoiseSweep,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Splittings(c) => c.validate(),
            ExperimentConfig::CouplingSweep(c) => c.validate(),
            ExperimentConfig::PulseGate(c) => c.validate(),
            ExperimentConfig::NoiseSweep(c) => c.validate(),
        }
    }

    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<()> {
        let name = self.experiment().name();
        match self {
            ExperimentConfig::NoiseSweep(c) => {
                if let Some(s) = o.seed {
                    c.noise.seed = s;
                }
                if let Some(n) = o.samples {
                    c.noise.samples = n;
                }
            }
            _ if o.seed.is_some() || o.samples.is_some() => {
                return Err(Error::Config(format!("--seed and --samples do not apply to the {name} experiment")));
            }
            _ => {}
        }
        match self {
            ExperimentConfig::PulseGate(c) => {
                if let Some(dt) = o.dt_ps {
                    c.propagator.dt_ps = dt;
                }
            }
            _ if o.dt_ps.is_some() => {
                return Err(Error::Config(format!("--dt-ps does not apply to the {name} experiment")));
            }
            _ => {}
        }
        self.validate()
    }

    /// The resolved configuration as a table, `experiment` key included.
    pub fn to_table(&self) -> Table {
        let t = match self {
            ExperimentConfig::Splittings(c) => Table::try_from(c),
            ExperimentConfig::CouplingSweep(c) => Table::try_from(c),
            ExperimentConfig::PulseGate(c) => Table::try_from(c),
            ExperimentConfig::NoiseSweep(c) => Table::try_from(c),
        };
        let mut t = t.expect("config structs serialize to tables");
        t.insert("experiment".into(), Value::String(self.experiment().name().into()));
        t
    }

    /// `(dotted key, TOML literal)` pairs covering every resolved input.
    pub fn flatten(&self) -> Vec<(String, String)> {
        fn walk(prefix: &str, t: &Table, out: &mut Vec<(String, String)>) {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match v {
                    Value::Table(sub) => walk(&key, sub, out),
                    _ => out.push((key, v.to_string())),
                }
            }
        }
        let mut out = Vec::new();
        walk("", &self.to_table(), &mut out);
        out
    }

    /// Rebuilds a configuration from [`flatten`](Self::flatten) output.
    pub fn from_flat(pairs: &[(String, String)]) -> Result<Self> {
        let text: String = pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        Self::from_toml_str(&text, None)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_table()).expect("config tables serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for e in [
            Experiment::Splittings,
            Experiment::CouplingSweep,
            Experiment::PulseGate,
            Experiment::NoiseSweep,
        ] {
            let c = ExperimentConfig::default_for(e);
            c.validate().unwrap();
            assert_eq!(ExperimentConfig::from_flat(&c.flatten()).unwrap(), c);
            assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string(), Some(e)).unwrap(), c);
        }
    }

    #[test]
    fn dotted_keys_override_defaults() {
        let c = ExperimentConfig::from_toml_str(
            "dqd1.omega_tunnel_ghz = 7.4\nsystem.n_photon_max = 5\n",
            Some(Experiment::PulseGate),
        )
        .unwrap();
        let ExperimentConfig::PulseGate(p) = c else { panic!() };
        assert_eq!(p.dqd1.omega_tunnel_ghz, Some(7.4));
        assert_eq!(p.dqd1.g_ac_ghz, 0.045);
        assert_eq!(p.system.n_photon_max, 5);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in ["dqd1.omega_tunel_ghz = 7.4", "bogus = 1", "sweep.points = 3\nsweep.extra = 1"] {
            let e = ExperimentConfig::from_toml_str(text, Some(Experiment::Splittings)).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{text}: {e}");
        }
    }

    #[test]
    fn swept_quantities_cannot_be_fixed() {
        let e = ExperimentConfig::from_toml_str("dqd1.omega_z_ghz = 5.8", Some(Experiment::CouplingSweep)).unwrap_err();
        assert!(e.to_string().contains("swept"), "{e}");
    }

    #[test]
    fn epsilon_replaces_default_theta() {
        let c = ExperimentConfig::from_toml_str("dqd2.epsilon_ghz = 1.5", Some(Experiment::Splittings)).unwrap();
        let ExperimentConfig::Splittings(s) = c else { panic!() };
        assert_eq!(s.dqd2.epsilon_ghz, Some(1.5));
        assert_eq!(s.dqd2.theta_rad, None);
        let both = "dqd2.epsilon_ghz = 1.5\ndqd2.theta_rad = 1.0";
        assert!(ExperimentConfig::from_toml_str(both, Some(Experiment::Splittings)).is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for (text, e) in [
            ("system.omega_r_ghz = -1.0", Experiment::Splittings),
            ("sweep.points = 0", Experiment::Splittings),
            ("sweep.omega_min_ghz = 6.1", Experiment::CouplingSweep),
            ("dqd1.g_ac_ghz = -0.1", Experiment::NoiseSweep),
            ("noise.qubit_kinds = [\"photon\"]", Experiment::NoiseSweep),
            ("propagator.method = \"euler\"", Experiment::PulseGate),
            ("schedule.ramp_ns = 0.0", Experiment::PulseGate),
            ("schedule.start_theta_rad = [1.1]", Experiment::PulseGate),
        ] {
            assert!(ExperimentConfig::from_toml_str(text, Some(e)).is_err(), "{text}");
        }
    }

    #[test]
    fn experiment_key_must_match() {
        let text = "experiment = \"pulse_gate\"";
        assert!(ExperimentConfig::from_toml_str(text, Some(Experiment::NoiseSweep)).is_err());
        assert!(ExperimentConfig::from_toml_str(text, None).is_ok());
        assert!(ExperimentConfig::from_toml_str("", None).is_err());
    }

    #[test]
    fn overrides_apply_only_where_meaningful() {
        let mut c = ExperimentConfig::default_for(Experiment::NoiseSweep);
        c.apply_overrides(&Overrides {
            seed: Some(7),
            samples: Some(3),
            dt_ps: None,
        })
        .unwrap();
        let ExperimentConfig::NoiseSweep(n) = &c else { panic!() };
        assert_eq!((n.noise.seed, n.noise.samples), (7, 3));
        let mut g = ExperimentConfig::default_for(Experiment::PulseGate);
        assert!(g
            .apply_overrides(&Overrides {
                seed: Some(1),
                ..Default::default()
            })
            .is_err());
        g.apply_overrides(&Overrides {
            dt_ps: Some(25.0),
            ..Default::default()
        })
        .unwrap();
    }

    #[test]
    fn pulse_gate_defaults_match_schedule() {
        let ExperimentConfig::PulseGate(p) = ExperimentConfig::default_for(Experiment::PulseGate) else { panic!() };
        assert_eq!(p.schedule.pulse_end(), 600.0);
        let eps = p.epsilons_at(&p.schedule.resonant_theta_rad).unwrap();
        assert!(eps[0].abs() < 1e-12);
        assert!(eps[1] > 0.0);
    }
}
