//! H-infinity norm computation via the Hamiltonian bisection method.
//!
//! For a stable system G, `||G||_inf < gamma` iff the Hamiltonian matrix
//! built from (A, B, C, D) and gamma has no eigenvalues on the imaginary
//! axis. Bisecting gamma between a grid-based lower bound and a doubled
//! upper bound pins the norm to a relative tolerance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::freq::{freq_response, log_grid};
use crate::lti::ss::StateSpace;

/// Largest singular value of a real matrix (0 for empty matrices).
fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values[0]
}

/// Largest singular value of a complex matrix via the real embedding
/// [re -im; im re], whose singular values are those of the complex matrix
/// duplicated.
fn sigma_max_c(m: &DMatrix<num_complex::Complex64>) -> f64 {
    let (p, q) = (m.nrows(), m.ncols());
    if p == 0 || q == 0 {
        return 0.0;
    }
    let mut real = DMatrix::zeros(2 * p, 2 * q);
    for i in 0..p {
        for j in 0..q {
            let v = m[(i, j)];
            real[(i, j)] = v.re;
            real[(i, j + q)] = -v.im;
            real[(i + p, j)] = v.im;
            real[(i + p, j + q)] = v.re;
        }
    }
    sigma_max(&real)
}

/// True if the Hamiltonian for level `gamma` has an eigenvalue on the
/// imaginary axis, i.e. `||G||_inf >= gamma`.
fn has_imaginary_eigenvalue(sys: &StateSpace, gamma: f64) -> Result<bool> {
    let n = sys.n_states();
    let m = sys.b.ncols();
    let r = DMatrix::identity(m, m) * (gamma * gamma) - sys.d.transpose() * &sys.d;
    let r_inv = r.clone().lu().try_inverse().ok_or_else(|| {
        Error::InvalidParameter("gamma too close to sigma_max(D)".into())
    })?;

    let a_term = &sys.a + &sys.b * &r_inv * sys.d.transpose() * &sys.c;
    let p = sys.c.nrows();
    let s_term = DMatrix::identity(p, p) + &sys.d * &r_inv * sys.d.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_term);
    h.view_mut((0, n), (n, n))
        .copy_from(&(&sys.b * &r_inv * sys.b.transpose()));
    h.view_mut((n, 0), (n, n))
        .copy_from(&(-(sys.c.transpose() * &s_term * &sys.c)));
    h.view_mut((n, n), (n, n)).copy_from(&(-a_term.transpose()));

    let eigs = h.complex_eigenvalues();
    Ok(eigs
        .iter()
        .any(|ev| ev.re.abs() < 1e-8 * (1.0 + ev.norm())))
}

/// H-infinity norm of a stable continuous-time system, to relative
/// tolerance `rel_tol` (clamped below at 1e-12).
///
/// Errors with [`Error::UnstableSystem`] if any pole has a nonnegative
/// real part; the norm is undefined in that case.
pub fn hinf_norm(sys: &StateSpace, rel_tol: f64) -> Result<f64> {
    let rel_tol = rel_tol.max(1e-12);
    let poles = sys.poles();
    if let Some(worst) = poles
        .iter()
        .map(|p| p.re)
        .fold(None, |acc: Option<f64>, re| {
            Some(acc.map_or(re, |a: f64| a.max(re)))
        })
    {
        if worst >= 0.0 {
            return Err(Error::UnstableSystem { max_re: worst });
        }
    }
    if sys.n_states() == 0 {
        return Ok(sigma_max(&sys.d));
    }

    // Lower bound: feedthrough, DC, and the peak over a log frequency grid
    // spanning well past the pole magnitudes.
    let mut lo = sigma_max(&sys.d);
    if let Ok(dc) = sys.dc_gain() {
        lo = lo.max(sigma_max(&dc));
    }
    let p_min = poles.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    let p_max = poles.iter().map(|p| p.norm()).fold(0.0_f64, f64::max);
    let w_lo = (p_min / 100.0).clamp(1e-6, 1e8);
    let w_hi = (p_max * 100.0).clamp(w_lo * 10.0, 1e8);
    let grid = log_grid(w_lo, w_hi, 200);
    let fr = freq_response(sys, &grid)?;
    for v in &fr.values {
        lo = lo.max(sigma_max_c(v));
    }

    // Upper bound: grow until the Hamiltonian test clears.
    let mut hi = (lo * 10.0).max(1e-6);
    for _ in 0..60 {
        if !has_imaginary_eigenvalue(sys, hi)? {
            break;
        }
        hi *= 2.0;
    }

    let mut lo = lo.max(1e-12);
    while (hi - lo) > rel_tol * lo {
        let mid = 0.5 * (lo + hi);
        if has_imaginary_eigenvalue(sys, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
