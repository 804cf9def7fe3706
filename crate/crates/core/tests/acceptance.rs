//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails. Criterion numbers given as
//! arguments restrict the run, e.g. `cargo test --test acceptance -- 4 6`.

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::time::Instant;

use cavitybus_core::dynamics::{propagate_unitary, transition_probability, PropagatorConfig};
use cavitybus_core::effective::{
    calibrate_dispersive_omega, dressed_levels, dressed_splittings_numeric, j_from_dressing, j_numeric_fit,
    sw_block_diagonalize_split, system_dressing,
};
use cavitybus_core::experiments::config::{CouplingConfig, NoiseSweepConfig, PulseGateConfig, SplittingsConfig};
use cavitybus_core::experiments::{run_coupling_sweep, run_noise_sweep, run_pulse_gate, run_splittings, ResultTable};
use cavitybus_core::gates::{
    average_gate_fidelity, makhlin_invariants, random_local, sqrt_iswap, TwoQubitGate, TwoQubitProcess,
};
use cavitybus_core::linalg::{self, c, C64, I};
use cavitybus_core::model::{
    build_hamiltonian, DqdParams, OrbitalBasis, PulseSchedule, PulseStep, QubitKind, SystemParams, DOWN, UP,
};
use cavitybus_core::noise::{run_noisy_gate, NoiseModel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn num(t: &ResultTable, row: usize, col: &str) -> f64 {
    t.rows[row][t.column_index(col).unwrap()].num().unwrap()
}

fn text(t: &ResultTable, row: usize, col: &str) -> String {
    t.rows[row][t.column_index(col).unwrap()].text().unwrap_or("").to_string()
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn pulsed_gate() -> Outcome {
    let cfg = PulseGateConfig::default();
    let t = run_pulse_gate(&cfg).unwrap();
    let summary = (0..t.rows.len()).find(|&r| text(&t, r, "row") == "summary").unwrap();
    let f = num(&t, summary, "fidelity_local");
    let end = cfg.schedule.pulse_end();
    let trace: Vec<usize> = (0..t.rows.len())
        .filter(|&r| text(&t, r, "row") == "trace" && num(&t, r, "t") > end)
        .collect();
    let leak = trace.iter().map(|&r| num(&t, r, "leakage")).fold(0.0, f64::max);
    let tail = trace.iter().map(|&r| num(&t, r, "fidelity_local"));
    let (lo, hi) = tail.fold((1.0f64, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    outcome(
        (0.975..=0.995).contains(&f) && leak < 0.03,
        format!(
            "F({end} ns) = {f:.5} (need [0.975, 0.995]); max leakage after {end} ns = {leak:.5} (need < 0.03); \
             tail F range [{lo:.4}, {hi:.4}]; dt = {} ns",
            t.meta_value("result.dt_ns").unwrap_or("?")
        ),
    )
}

fn noise_table() -> ResultTable {
    let mut cfg = NoiseSweepConfig::default();
    cfg.noise.sigma_list_ghz = vec![0.0, 0.0026, 0.035];
    if let Ok(s) = std::env::var("ACCEPTANCE_SAMPLES") {
        cfg.noise.samples = s.parse().expect("ACCEPTANCE_SAMPLES must be an integer");
    }
    run_noise_sweep(&cfg).unwrap()
}

fn noise_rows(t: &ResultTable, sigma: f64, kind: &str) -> Vec<usize> {
    (0..t.rows.len())
        .filter(|&r| num(t, r, "sigma_eps") == sigma && text(t, r, "qubit_kind") == kind)
        .collect()
}

fn gate_times(t: &ResultTable) -> Outcome {
    let targets = [("spin", 8.0, 830.0), ("spin", 20.0, 4300.0), ("charge", 8.0, 180.0), ("charge", 20.0, 2400.0)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, omega, want) in targets {
        let r = noise_rows(t, 0.0, kind).into_iter().find(|&r| num(t, r, "omega_tunnel") == omega).unwrap();
        let got = num(t, r, "mean_gate_time");
        let ok = within(got, want, 0.10);
        pass &= ok;
        parts.push(format!("{kind} Ω={omega}: {got:.1} ns vs {want} ns ({:+.1}%)", 100.0 * (got / want - 1.0)));
    }
    outcome(pass, format!("σ = 0; {}", parts.join("; ")))
}

fn ordering(t: &ResultTable) -> Outcome {
    let mut pass = true;
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    let mut n = 0;
    for sigma in [0.0026, 0.035] {
        let spin = noise_rows(t, sigma, "spin");
        let charge = noise_rows(t, sigma, "charge");
        for (&s, &ch) in spin.iter().zip(&charge) {
            assert_eq!(num(t, s, "omega_tunnel"), num(t, ch, "omega_tunnel"));
            let gap = num(t, ch, "mean_infidelity") - num(t, s, "mean_infidelity");
            let se = num(t, s, "std_error").hypot(num(t, ch, "std_error"));
            let z = gap / se;
            pass &= z > 2.0;
            n += 1;
            if z < worst {
                worst = z;
                worst_at = format!(
                    "Ω={} σ={sigma}: spin {:.3e} vs charge {:.3e}",
                    num(t, s, "omega_tunnel"),
                    num(t, s, "mean_infidelity"),
                    num(t, ch, "mean_infidelity")
                );
            }
        }
    }
    outcome(
        pass,
        format!("{n} cells; smallest separation {worst:.1} standard errors (need > 2) at {worst_at}"),
    )
}

fn coupling_structure() -> Outcome {
    let mut cfg = CouplingConfig::default();
    cfg.sweep.omega_min_ghz = 5.70;
    cfg.sweep.omega_max_ghz = 5.95;
    cfg.sweep.points = 51;
    let t = run_coupling_sweep(&cfg).unwrap();
    let rel: Vec<f64> = (0..t.rows.len()).map(|r| num(&t, r, "rel_difference")).collect();
    let (imax, worst) = rel.iter().enumerate().fold((0, 0.0), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
    let within10 = rel.iter().filter(|&&x| x <= 0.10).count();
    let agree = rel.iter().all(|&x| x <= 0.10);
    let first_ok = (0..t.rows.len()).find(|&r| rel[r..].iter().all(|&x| x <= 0.10));

    let r585 = (0..t.rows.len()).find(|&r| (num(&t, r, "omega") - 5.85).abs() < 1e-9).unwrap();
    let (ja0, jn0) = (num(&t, r585, "j_analytic").abs(), num(&t, r585, "j_numeric"));
    let near = [6.00, 6.01, 6.015];
    let mut grow = Vec::new();
    let mut diverges = false;
    for w in near {
        let p = cfg.params_at(w).unwrap();
        let ja = system_dressing(&p).and_then(|d| j_from_dressing(&d)).map(f64::abs);
        let jd = dressed_levels(&p, QubitKind::Spin).map(|l| l.exchange().abs()).unwrap_or(f64::NAN);
        let jn = j_numeric_fit(&p, (1.0 / jd).min(1e5)).map(|f| f.j).unwrap_or(f64::NAN);
        let ja = ja.unwrap_or(f64::NAN);
        diverges |= jn > 5.0 * jn0 && ja > 5.0 * ja0;
        grow.push(format!("{w}: J_num/J_num(5.85) = {:.1}, J_an/J_an(5.85) = {:.1}", jn / jn0, ja / ja0));
    }
    outcome(
        agree && diverges,
        format!(
            "agreement within 10%: {within10}/{} points, worst {:.1}% at ω = {:.3} GHz, holds from ω = {} GHz; \
             divergence {}: {}",
            rel.len(),
            100.0 * worst,
            num(&t, imax, "omega"),
            first_ok.map(|r| format!("{:.3}", num(&t, r, "omega"))).unwrap_or("-".into()),
            if diverges { "seen" } else { "not seen" },
            grow.join("; ")
        ),
    )
}

fn splitting_structure() -> Outcome {
    let mut cfg = SplittingsConfig::default();
    cfg.sweep.omega_tunnel1_list_ghz = vec![7.5, 12.0];
    let t = run_splittings(&cfg).unwrap();
    let rows = |omega: f64| -> Vec<usize> { (0..t.rows.len()).filter(|&r| num(&t, r, "omega_tunnel1") == omega).collect() };
    let (a, b) = (rows(7.5), rows(12.0));
    let mut ordered = 0;
    let mut violations = Vec::new();
    for (&ra, &rb) in a.iter().zip(&b) {
        let (ea, eb) = (num(&t, ra, "abs_difference"), num(&t, rb, "abs_difference"));
        if eb < ea {
            ordered += 1;
        } else {
            violations.push(format!("{:.3}", num(&t, ra, "epsilon1")));
        }
    }
    let peak = a.iter().cloned().fold(a[0], |m, r| {
        if num(&t, r, "abs_difference") > num(&t, m, "abs_difference") { r } else { m }
    });
    let theta = num(&t, peak, "theta1");
    let peak_ok = (theta - FRAC_PI_2).abs() <= 0.1 * FRAC_PI_2;
    outcome(
        violations.is_empty() && peak_ok,
        format!(
            "ε1 ∈ [{}, {}] GHz: error(12) < error(7.5) at {ordered}/{} points{}; \
             7.5 GHz error peaks at θ1 = {theta:.4} ({:.3e} GHz; need |θ1 − π/2| ≤ {:.4})",
            cfg.sweep.epsilon1_min_ghz,
            cfg.sweep.epsilon1_max_ghz,
            a.len(),
            if violations.is_empty() { String::new() } else { format!(" (violated at ε1 = {})", violations.join(", ")) },
            num(&t, peak, "abs_difference"),
            0.1 * FRAC_PI_2
        ),
    )
}

fn symmetric(omega_tunnel: f64, omega_z: f64) -> SystemParams {
    let d = DqdParams {
        epsilon: 0.0,
        omega_tunnel,
        omega_z,
        g_x: 0.2,
        g_z: 0.0,
        g_ac: 0.04,
    };
    SystemParams {
        omega_r: 6.0,
        dqds: vec![d, d],
        n_photon_max: 9,
    }
}

fn effective_oracle() -> Outcome {
    let base = symmetric(7.5, 5.85);
    let omega = calibrate_dispersive_omega(&base, 30.0).unwrap();
    let p = symmetric(7.5, omega);
    let ja = j_from_dressing(&system_dressing(&p).unwrap()).unwrap().abs();
    let jn = j_numeric_fit(&p, 2.0 / ja).unwrap().j;
    let rel = (jn - ja).abs() / ja;
    let swap_ok = rel <= 0.10;

    // Detune the second spin so that |Δ| ≈ 25|J|.
    let mut q = p.clone();
    let mut shift = 25.0 * ja;
    let mut delta = 0.0;
    for _ in 0..6 {
        q.dqds[1].omega_z = omega - shift;
        let w = dressed_splittings_numeric(&q).unwrap();
        delta = w[1] - w[0];
        shift *= 25.0 * ja / delta.abs();
    }
    let jq = j_from_dressing(&system_dressing(&q).unwrap()).unwrap().abs();
    let period = 1.0 / delta.abs();
    let grid: Vec<f64> = (0..=4000).map(|k| k as f64 * 10.0 * period / 4000.0).collect();
    let pt = transition_probability(&q, &[UP, DOWN], &[DOWN, UP], &grid).unwrap();
    let pmax = pt.iter().cloned().fold(0.0, f64::max);
    let x = (jq / delta).powi(2);
    let bound_ok = pmax < 1.5 * x;
    outcome(
        swap_ok && bound_ok,
        format!(
            "resonance at ω = {omega:.5} GHz (ω'_r − ω'_z = 30|g'_x|): J_num = {jn:.4e}, J_an = {ja:.4e} GHz, \
             difference {:.1}% (need ≤ 10%); detuned |Δ|/|J| = {:.1}: P_max = {pmax:.3e} = {:.2}·(J/Δ)² \
             (need < 1.5·(J/Δ)²; two-level value 4J²/(4J²+Δ²) = {:.3e})",
            100.0 * rel,
            delta.abs() / jq,
            pmax / x,
            4.0 * jq * jq / (4.0 * jq * jq + delta * delta)
        ),
    )
}

fn random_hermitian(n: usize, rng: &mut impl Rng) -> Array2<C64> {
    let a = Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let ad = linalg::dagger(&a.view());
    (&a + &ad).mapv(|z| z * 0.5)
}

fn random_unitary4(rng: &mut impl Rng) -> TwoQubitGate {
    let h = random_hermitian(4, rng);
    TwoQubitGate::new(linalg::hermitian_function(&h, |x| (I * 3.0 * x).exp()).unwrap()).unwrap()
}

fn random_system(rng: &mut impl Rng) -> SystemParams {
    let dqds = (0..2)
        .map(|_| DqdParams {
            epsilon: rng.random_range(-15.0..15.0),
            omega_tunnel: rng.random_range(5.0..15.0),
            omega_z: rng.random_range(4.0..7.0),
            g_x: rng.random_range(-0.3..0.3),
            g_z: rng.random_range(-0.1..0.1),
            g_ac: rng.random_range(0.0..0.08),
        })
        .collect();
    SystemParams {
        omega_r: rng.random_range(4.0..8.0),
        dqds,
        n_photon_max: rng.random_range(1..5),
    }
}

fn sw_exponent(rng: &mut impl Rng) -> (Vec<f64>, f64) {
    let (n, n_low) = (10, 4);
    let mut h0 = Array2::zeros((n, n));
    let mut p = Array2::zeros((n, n));
    for k in 0..n {
        h0[[k, k]] = c(if k < n_low { rng.random_range(0.0..1.0) } else { rng.random_range(8.0..12.0) });
        if k < n_low {
            p[[k, k]] = c(1.0);
        }
    }
    let v = random_hermitian(n, rng);
    let lambdas = [0.005, 0.0025, 0.00125, 0.000625];
    let errs: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let vl = v.mapv(|z| z * l);
            let sw = sw_block_diagonalize_split(&h0, &vl, &p).unwrap();
            let (approx, _) = linalg::eigh(&sw.h_effective).unwrap();
            let (exact, _) = linalg::eigh(&(&h0 + &vl)).unwrap();
            (0..n_low).map(|k| (approx[k] - exact[k]).abs()).fold(0.0, f64::max)
        })
        .collect();
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let ratios = errs.windows(2).map(|w| w[0] / w[1]).collect();
    (ratios, slope)
}

fn properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = PropagatorConfig {
        convergence_check: false,
        ..Default::default()
    };
    let mut unitarity = 0.0f64;
    let mut spectrum = 0.0f64;
    for _ in 0..8 {
        let p = random_system(&mut rng);
        let lr = linalg::eigh(&build_hamiltonian(&p, OrbitalBasis::LeftRight).unwrap().matrix).unwrap().0;
        let eb = linalg::eigh(&build_hamiltonian(&p, OrbitalBasis::Eigen).unwrap().matrix).unwrap().0;
        spectrum = lr.iter().zip(eb.iter()).map(|(a, b)| (a - b).abs()).fold(spectrum, f64::max);
        let e0 = [p.dqds[0].epsilon, p.dqds[1].epsilon];
        let progs: Vec<Vec<PulseStep>> = (0..2)
            .map(|_| {
                vec![
                    PulseStep::Hold { duration: 0.5 },
                    PulseStep::Smooth { duration: 2.0, to: rng.random_range(-6.0..6.0) },
                    PulseStep::Hold { duration: 1.0 },
                ]
            })
            .collect();
        let sched = PulseSchedule::from_steps(&e0, &progs).unwrap();
        let traj = propagate_unitary(&p, &sched, &cfg, &[sched.span()]).unwrap();
        unitarity = unitarity.max(linalg::unitarity_defect(&traj.states[0]));
    }

    let (ratios, slope) = sw_exponent(&mut rng);

    let mut depol = 0.0f64;
    let mut makhlin = 0.0f64;
    let mut gates = vec![sqrt_iswap()];
    for _ in 0..3 {
        gates.push(random_unitary4(&mut rng));
    }
    for g in &gates {
        let f = average_gate_fidelity(&TwoQubitProcess::depolarizing(), g).unwrap();
        depol = depol.max((f - 0.25).abs());
        let base = makhlin_invariants(g).unwrap();
        for _ in 0..100 {
            let a = linalg::kron(&random_local(&mut rng), &random_local(&mut rng));
            let b = linalg::kron(&random_local(&mut rng), &random_local(&mut rng));
            let inv = makhlin_invariants(&TwoQubitGate::new(a.dot(g.matrix()).dot(&b)).unwrap()).unwrap();
            makhlin = (0..3).map(|k| (inv[k] - base[k]).abs()).fold(makhlin, f64::max);
        }
    }

    let mut p = symmetric(12.0, 0.0);
    p.n_photon_max = 2;
    for d in p.dqds.iter_mut() {
        d.g_x = 0.0;
    }
    let noise = NoiseModel {
        sigma_eps: 0.02,
        n_samples: 6,
        master_seed: 11,
    };
    let mc = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_noisy_gate(&p, &noise, &sqrt_iswap(), QubitKind::Charge, 1200.0).unwrap())
    };
    let (one, many) = (mc(1), mc(4));
    let identical = one.per_sample.len() == many.per_sample.len()
        && one.per_sample.iter().zip(&many.per_sample).all(|(a, b)| {
            a.min_infidelity.to_bits() == b.min_infidelity.to_bits()
                && a.gate_time.to_bits() == b.gate_time.to_bits()
                && a.leakage.to_bits() == b.leakage.to_bits()
        });

    let sw_ok = (slope - 3.0).abs() < 0.3 && ratios.iter().all(|r| (5.5..11.5).contains(r));
    let pass = unitarity < 1e-8 && spectrum < 1e-10 && sw_ok && depol < 1e-10 && makhlin < 1e-8 && identical;
    outcome(
        pass,
        format!(
            "unitarity defect {unitarity:.1e} (< 1e-8); spectrum difference {spectrum:.1e} (< 1e-10); \
             SW halving ratios [{}], exponent {slope:.3} (3 ± 0.3); |F̄(depolarizing) − 1/4| {depol:.1e} (< 1e-10); \
             Makhlin drift {makhlin:.1e} (< 1e-8); Monte Carlo 1 vs 4 threads {}",
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", "),
            if identical { "bit-identical" } else { "DIFFERENT" }
        ),
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    // other harness flags are ignored; a name filter that does not match skips the run
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-') && a.parse::<u32>().is_err()).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |k: u32| selected.is_empty() || selected.contains(&k);
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |k: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if wanted(k) {
            let start = Instant::now();
            let o = f();
            let secs = start.elapsed().as_secs_f64();
            println!("criterion {k} ({name}): {} [{secs:.0} s] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            results.push((k, name, o, secs));
        }
    };
    timed(1, "pulsed gate fidelity and leakage", &mut pulsed_gate);
    if wanted(2) || wanted(3) {
        let start = Instant::now();
        let table = noise_table();
        println!("(noise sweep: {:.0} s)", start.elapsed().as_secs_f64());
        timed(2, "noiseless gate times", &mut || gate_times(&table));
        timed(3, "spin beats charge under noise", &mut || ordering(&table));
    }
    timed(4, "exchange versus Zeeman frequency", &mut coupling_structure);
    timed(5, "splitting error versus detuning", &mut splitting_structure);
    timed(6, "flip-flop oscillations versus effective model", &mut effective_oracle);
    timed(7, "numerical properties", &mut properties);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
