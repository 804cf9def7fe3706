//! Dense complex linear algebra helpers.
//!
//! Hermitian eigendecomposition is delegated to LAPACK's divide-and-conquer
//! driver `zheevd`; everything else is plain `ndarray`.

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use num_complex::Complex64;
use std::os::raw::c_char;

use crate::error::{Error, Result};

extern crate openblas_src;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, ONE)
}

pub fn dagger(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    ndarray::linalg::kron(a, b)
}

pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Max-norm of `H - H†` relative to max-norm of `H` (absolute if `H = 0`).
pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    let scale = max_abs(a);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Max-norm of `U†U - I`.
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    let g = dagger(&u.view()).dot(u);
    max_abs_diff(&g, &identity(u.ncols()))
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and
/// orthonormal eigenvectors stored as columns. Only the lower triangle is read.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    // Column-major copy.
    let mut buf: Vec<C64> = a.t().iter().cloned().collect();
    let mut w = vec![0.0f64; n];
    let jobz = b'V' as c_char;
    let uplo = b'L' as c_char;
    let nn = n as i32;
    let mut info = 0i32;

    let mut work_q = ZERO;
    let mut rwork_q = 0.0f64;
    let mut iwork_q = 0i32;
    let query = -1i32;
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            buf.as_mut_ptr() as *mut _,
            &nn,
            w.as_mut_ptr(),
            &mut work_q as *mut C64 as *mut _,
            &query,
            &mut rwork_q,
            &query,
            &mut iwork_q,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd",
            info,
        });
    }
    let lwork = (work_q.re as i32).max(1);
    let lrwork = (rwork_q as i32).max(1);
    let liwork = iwork_q.max(1);
    let mut work = vec![ZERO; lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            buf.as_mut_ptr() as *mut _,
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd",
            info,
        });
    }
    let v = Array2::from_shape_vec((n, n).f(), buf).expect("buffer has n*n entries");
    Ok((Array1::from(w), v.as_standard_layout().to_owned()))
}

/// Eigendecomposition of a real symmetric matrix via `dsyevr`.
///
/// `dsyevd` from the system LAPACK returned non-orthogonal vectors for
/// n ≳ 60 in testing, hence the MRRR driver.
pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let mut buf: Vec<f64> = a.t().iter().cloned().collect();
    let mut w = vec![0.0f64; n];
    let mut z = vec![0.0f64; n * n];
    let mut isuppz = vec![0i32; 2 * n];
    let jobz = b'V' as c_char;
    let range = b'A' as c_char;
    let uplo = b'L' as c_char;
    let nn = n as i32;
    let (vl, vu, il, iu, abstol) = (0.0f64, 0.0f64, 0i32, 0i32, 0.0f64);
    let mut m = 0i32;
    let mut info = 0i32;
    let mut call = |work: &mut [f64], lwork: i32, iwork: &mut [i32], liwork: i32, info: &mut i32| unsafe {
        lapack_sys::dsyevr_(
            &jobz,
            &range,
            &uplo,
            &nn,
            buf.as_mut_ptr(),
            &nn,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &nn,
            isuppz.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            info,
        )
    };
    let mut work_q = [0.0f64];
    let mut iwork_q = [0i32];
    call(&mut work_q, -1, &mut iwork_q, -1, &mut info);
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dsyevr",
            info,
        });
    }
    let lwork = (work_q[0] as i32).max(26 * nn);
    let liwork = iwork_q[0].max(10 * nn);
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    call(&mut work, lwork, &mut iwork, liwork, &mut info);
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dsyevr",
            info,
        });
    }
    let v = Array2::from_shape_vec((n, n).f(), z).expect("buffer has n*n entries");
    Ok((Array1::from(w), v.as_standard_layout().to_owned()))
}

/// Real part of a matrix whose imaginary part is exactly zero.
pub fn as_real(a: &Array2<C64>) -> Option<Array2<f64>> {
    if a.iter().all(|z| z.im == 0.0) {
        Some(a.mapv(|z| z.re))
    } else {
        None
    }
}

/// [`eigh`], through the real solver when `a` has no imaginary part.
pub fn eigh_auto(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    match as_real(a) {
        Some(ar) => {
            let (w, v) = eigh_real(&ar)?;
            Ok((w, v.mapv(c)))
        }
        None => eigh(a),
    }
}

/// `V diag(f(λ)) V†` for a Hermitian `a`.
pub fn hermitian_function(a: &Array2<C64>, f: impl Fn(f64) -> C64) -> Result<Array2<C64>> {
    let (w, v) = eigh(a)?;
    let mut scaled = v.clone();
    for (mut col, &lam) in scaled.columns_mut().into_iter().zip(w.iter()) {
        let fl = f(lam);
        col.mapv_inplace(|z| z * fl);
    }
    Ok(scaled.dot(&dagger(&v.view())))
}

/// Unitary factor of the polar decomposition `M = W·(M†M)^{1/2}`.
pub fn polar_unitary(m: &Array2<C64>) -> Result<Array2<C64>> {
    let gram = dagger(&m.view()).dot(m);
    let inv_sqrt = hermitian_function(&gram, |x| {
        if x > 1e-300 {
            c(1.0 / x.sqrt())
        } else {
            ZERO
        }
    })?;
    Ok(m.dot(&inv_sqrt))
}

/// Determinant of a small complex matrix by partial-pivot LU.
pub fn det(a: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut d = ONE;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[[i, k]].norm().partial_cmp(&m[[j, k]].norm()).unwrap())
            .unwrap();
        if m[[p, k]].norm() == 0.0 {
            return ZERO;
        }
        if p != k {
            for j in 0..n {
                m.swap([p, j], [k, j]);
            }
            d = -d;
        }
        let pivot = m[[k, k]];
        d *= pivot;
        for i in (k + 1)..n {
            let f = m[[i, k]] / pivot;
            for j in k..n {
                let sub = f * m[[k, j]];
                m[[i, j]] -= sub;
            }
        }
    }
    d
}
