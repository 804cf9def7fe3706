//! Small derivative-free optimizers and scalar root finding.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Initial simplex edge length.
    pub step: f64,
    /// Stop when the spread of objective values over the simplex is below this.
    pub f_tol: f64,
    pub max_evals: usize,
    /// Number of re-inflations of the simplex around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            step: 0.3,
            f_tol: 1e-10,
            max_evals: 6000,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

/// Nelder-Mead minimization with dimension-adaptive coefficients.
pub fn nelder_mead(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &SimplexOptions) -> Minimum {
    let mut best = run_simplex(f, x0, opts.step, opts);
    let mut evals = best.evals;
    for _ in 0..opts.restarts {
        if evals >= opts.max_evals {
            break;
        }
        let again = run_simplex(f, &best.x, opts.step * 0.1, opts);
        evals += again.evals;
        let improved = again.f < best.f - opts.f_tol;
        if again.f < best.f {
            best = again;
        }
        if !improved {
            break;
        }
    }
    best.evals = evals;
    best
}

fn run_simplex(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], step: f64, opts: &SimplexOptions) -> Minimum {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;

    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
        let (ib, iw, isw) = (order[0], order[n], order[n - 1]);
        if (vals[iw] - vals[ib]).abs() <= opts.f_tol || evals >= opts.max_evals {
            return Minimum {
                x: pts[ib].clone(),
                f: vals[ib],
                evals,
            };
        }
        let mut centroid = vec![0.0; n];
        for &k in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&pts[k]) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[iw])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[ib] {
            let xe = along(alpha * beta);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[iw] = xe;
                vals[iw] = fe;
            } else {
                pts[iw] = xr;
                vals[iw] = fr;
            }
        } else if fr < vals[isw] {
            pts[iw] = xr;
            vals[iw] = fr;
        } else {
            let (xc, fc) = if fr < vals[iw] {
                let xc = along(alpha * gamma);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-gamma);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < fr.min(vals[iw]) {
                pts[iw] = xc;
                vals[iw] = fc;
            } else {
                let xb = pts[ib].clone();
                for &k in &order[1..] {
                    for (p, b) in pts[k].iter_mut().zip(&xb) {
                        *p = b + delta * (*p - b);
                    }
                    vals[k] = f(&pts[k]);
                    evals += 1;
                }
            }
        }
    }
}

/// Bisection on a bracketing interval; `tol` is the bracket width at exit.
pub fn bisect(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!(
            "f({lo}) = {flo:.3e} and f({hi}) = {fhi:.3e} share a sign"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
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

/// Vertex abscissa of the parabola through three equally spaced samples,
/// offset from the middle sample in units of the spacing; clamped to [-1, 1].
pub fn parabolic_vertex(ym: f64, y0: f64, yp: f64) -> f64 {
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (ym - yp) / denom).clamp(-1.0, 1.0)
}
