//! Rational transfer functions in the Laplace variable `s`.
//!
//! Coefficients are stored in descending powers of `s`, matching the usual
//! textbook notation: `num = [b0, b1, ..., bm]` stands for
//! `b0*s^m + b1*s^(m-1) + ... + bm`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Continuous-time SISO transfer function `num(s)/den(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    /// Numerator coefficients, descending powers of s.
    pub num: Vec<f64>,
    /// Denominator coefficients, descending powers of s.
    pub den: Vec<f64>,
}

impl TransferFunction {
    /// Build a transfer function, trimming leading zero coefficients.
    ///
    /// The denominator must contain at least one nonzero coefficient.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let num = trim_leading_zeros(num);
        let den = trim_leading_zeros(den);
        if den.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidTransferFunction(
                "denominator polynomial is zero".into(),
            ));
        }
        Ok(Self { num, den })
    }

    /// Static gain `k` (no dynamics).
    pub fn static_gain(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    /// Pure integrator `1/s`.
    pub fn integrator() -> Self {
        Self {
            num: vec![1.0],
            den: vec![1.0, 0.0],
        }
    }

    pub fn num_degree(&self) -> usize {
        self.num.len().saturating_sub(1)
    }

    pub fn den_degree(&self) -> usize {
        self.den.len().saturating_sub(1)
    }

    /// Proper means deg(num) <= deg(den); required for a state-space realization.
    pub fn is_proper(&self) -> bool {
        // An identically-zero numerator is proper regardless of length.
        if self.num.iter().all(|&c| c == 0.0) {
            return true;
        }
        self.num_degree() <= self.den_degree()
    }

    /// Evaluate at a complex point `s` by Horner's rule on both polynomials.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        polyval(&self.num, s) / polyval(&self.den, s)
    }

    /// Evaluate the frequency response at `omega` rad/s, i.e. at `s = j*omega`.
    pub fn eval_jw(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, omega))
    }

    /// DC gain `num(0)/den(0)`.
    pub fn dc_gain(&self) -> f64 {
        let n = *self.num.last().unwrap_or(&0.0);
        let d = *self.den.last().unwrap_or(&0.0);
        n / d
    }

    /// Series product `other(s) * self(s)` at the polynomial level.
    pub fn series(&self, other: &TransferFunction) -> TransferFunction {
        TransferFunction {
            num: polymul(&self.num, &other.num),
            den: polymul(&self.den, &other.den),
        }
    }

    /// Sum `self(s) + other(s)` over the common denominator.
    pub fn parallel(&self, other: &TransferFunction) -> TransferFunction {
        let num = polyadd(
            &polymul(&self.num, &other.den),
            &polymul(&other.num, &self.den),
        );
        TransferFunction {
            num,
            den: polymul(&self.den, &other.den),
        }
    }
}

fn trim_leading_zeros(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.len() > 1 && coeffs[0] == 0.0 {
        coeffs.remove(0);
    }
    if coeffs.is_empty() {
        coeffs.push(0.0);
    }
    coeffs
}

/// Horner evaluation of a real polynomial (descending powers) at a complex point.
pub fn polyval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Polynomial product (convolution of coefficient sequences).
pub fn polymul(p: &[f64], q: &[f64]) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Polynomial sum with right-aligned coefficients.
pub fn polyadd(p: &[f64], q: &[f64]) -> Vec<f64> {
    let n = p.len().max(q.len());
    let mut out = vec![0.0; n];
    for (i, &a) in p.iter().enumerate() {
        out[n - p.len() + i] += a;
    }
    for (i, &b) in q.iter().enumerate() {
        out[n - q.len() + i] += b;
    }
    out
}
