//! Frequency-domain evaluation of state-space systems.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::ss::StateSpace;

/// Frequency response samples of a (possibly MIMO) system.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    /// Evaluation frequencies in rad/s, ascending.
    pub omega: Vec<f64>,
    /// One p x m complex gain matrix per frequency.
    pub values: Vec<DMatrix<Complex64>>,
}

impl FrequencyResponse {
    /// Magnitude of a single entry across all frequencies.
    pub fn magnitude(&self, out: usize, inp: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[(out, inp)].norm()).collect()
    }

    /// Phase (radians, unwrapped per-sample via `atan2`) of a single entry.
    pub fn phase(&self, out: usize, inp: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[(out, inp)].arg()).collect()
    }
}

/// Evaluate `C (jwI - A)^-1 B + D` over a frequency grid.
///
/// Returns an error if some grid point sits numerically on a pole of the
/// system (the resolvent solve fails).
pub fn freq_response(sys: &StateSpace, omega: &[f64]) -> Result<FrequencyResponse> {
    let n = sys.n_states();
    let bc = sys.b.map(|v| Complex64::new(v, 0.0));
    let cc = sys.c.map(|v| Complex64::new(v, 0.0));
    let dc = sys.d.map(|v| Complex64::new(v, 0.0));

    let mut values = Vec::with_capacity(omega.len());
    for &w in omega {
        if n == 0 {
            values.push(dc.clone());
            continue;
        }
        let mut jw_a = sys.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..n {
            jw_a[(i, i)] += Complex64::new(0.0, w);
        }
        let x = jw_a
            .lu()
            .solve(&bc)
            .ok_or(Error::EvaluationAtPole { omega: w })?;
        values.push(&cc * x + &dc);
    }
    Ok(FrequencyResponse {
        omega: omega.to_vec(),
        values,
    })
}

/// Logarithmically spaced grid of `n` points between `w_lo` and `w_hi` rad/s.
pub fn log_grid(w_lo: f64, w_hi: f64, n: usize) -> Vec<f64> {
    assert!(w_lo > 0.0 && w_hi > w_lo && n >= 2);
    let l0 = w_lo.ln();
    let l1 = w_hi.ln();
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
