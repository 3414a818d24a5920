//! Sine-sweep identification: excitation, nonparametric frequency-response
//! estimation, and parametric model fits with time-domain fit metrics.
//!
//! The sweep is logarithmic (constant cycles per decade), the FRF comes
//! from Hann-windowed cross-spectral averaging evaluated directly on an
//! arbitrary frequency grid, and the rational fits use the classic
//! iteratively reweighted linear least squares where each pass reweights
//! by the previous denominator.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::{freq_response, tf_to_ss, FrequencyResponse, StateSpace, TransferFunction};

/// Excitation description. Amplitude and offset share the signal's units.
#[derive(Debug, Clone, Copy)]
pub struct SweepSpec {
    pub f_start: f64,
    pub f_end: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub duration: f64,
    pub sample_rate: f64,
}

/// Uniformly sampled input/output record.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != u.len() || t.len() != y.len() {
            return Err(Error::DimensionMismatch(
                "time series columns must have equal length".into(),
            ));
        }
        if t.len() < 2 {
            return Err(Error::InvalidParameter(
                "time series needs at least two samples".into(),
            ));
        }
        let dt = t[1] - t[0];
        for i in 1..t.len() {
            if ((t[i] - t[i - 1]) - dt).abs() > 1e-9 * dt.max(1e-12) {
                return Err(Error::InvalidParameter(
                    "time series grid must be uniform".into(),
                ));
            }
        }
        Ok(Self { t, u, y })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn with_output(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.t.len() {
            return Err(Error::DimensionMismatch(
                "output length must match the time grid".into(),
            ));
        }
        self.y = y;
        Ok(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,y\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{}\n", self.t[i], self.u[i], self.y[i]));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut t = Vec::new();
        let mut u = Vec::new();
        let mut y = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                continue; // header
            }
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Config("missing CSV column".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("bad CSV number: {e}")))
            };
            t.push(parse(cols.next())?);
            u.push(parse(cols.next())?);
            y.push(parse(cols.next())?);
        }
        TimeSeries::new(t, u, y)
    }
}

/// Fitted model plus its quality metrics. `params` holds named scalar
/// parameters of the fitted structure.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: TransferFunction,
    pub params: BTreeMap<String, f64>,
    pub fit_percent: f64,
    pub mse: f64,
}

/// Phase of the logarithmic sweep at time `t`, radians. Exposed so scenario
/// code can evaluate the excitation analytically instead of resampling a
/// pregenerated record.
pub fn sweep_phase(spec: &SweepSpec, t: f64) -> f64 {
    let k = (spec.f_end / spec.f_start).powf(1.0 / spec.duration);
    2.0 * PI * spec.f_start * (k.powf(t) - 1.0) / k.ln()
}

/// Generate the excitation record; the output column starts zeroed.
pub fn gen_sweep(spec: &SweepSpec) -> Result<TimeSeries> {
    if !(spec.f_start > 0.0 && spec.f_end > spec.f_start) {
        return Err(Error::InvalidParameter(
            "sweep needs 0 < f_start < f_end".into(),
        ));
    }
    if spec.f_end >= spec.sample_rate / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "sweep end {} Hz violates the Nyquist limit of {} Hz",
            spec.f_end,
            spec.sample_rate / 2.0
        )));
    }
    if spec.duration <= 0.0 || spec.amplitude < 0.0 {
        return Err(Error::InvalidParameter(
            "sweep duration must be positive and amplitude nonnegative".into(),
        ));
    }
    let dt = 1.0 / spec.sample_rate;
    let n = (spec.duration * spec.sample_rate).round() as usize;
    let mut t = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for i in 0..n {
        let ti = i as f64 * dt;
        t.push(ti);
        u.push(spec.offset + spec.amplitude * sweep_phase(spec, ti).sin());
    }
    let y = vec![0.0; n];
    TimeSeries::new(t, u, y)
}

/// Drive a continuous system with the record's input column and return the
/// record with the simulated output filled in (zero initial state).
pub fn simulate_response(sys: &StateSpace, input: &TimeSeries) -> Result<TimeSeries> {
    let d = crate::lti::discretize(sys, input.dt())?;
    let mut x = DVector::zeros(sys.n_states());
    let mut y = Vec::with_capacity(input.len());
    let mut u = DVector::zeros(1);
    for &ui in &input.u {
        u[0] = ui;
        let (xn, yo) = d.step(&x, &u);
        y.push(yo[0]);
        x = xn;
    }
    input.clone().with_output(y)
}

/// Segment-averaging settings for [`estimate_frf`].
#[derive(Debug, Clone, Copy)]
pub struct FrfConfig {
    pub segments: usize,
}

impl Default for FrfConfig {
    fn default() -> Self {
        FrfConfig { segments: 8 }
    }
}

/// Cross-spectral frequency-response estimate `S_uy/S_uu` on an arbitrary
/// grid, with Hann-windowed 50%-overlap segments and mean removal.
pub fn estimate_frf(
    data: &TimeSeries,
    grid_hz: &[f64],
    cfg: &FrfConfig,
) -> Result<FrequencyResponse> {
    if grid_hz.is_empty() {
        return Err(Error::InvalidParameter("empty frequency grid".into()));
    }
    let n = data.len();
    let segments = cfg.segments.max(1);
    let seg_len = 2 * n / (segments + 1);
    if seg_len < 16 {
        return Err(Error::IdentificationFailed(
            "record too short for segment averaging".into(),
        ));
    }
    let hop = seg_len / 2;
    let dt = data.dt();

    let u_mean = data.u.iter().sum::<f64>() / n as f64;
    let y_mean = data.y.iter().sum::<f64>() / n as f64;
    let u: Vec<f64> = data.u.iter().map(|v| v - u_mean).collect();
    let y: Vec<f64> = data.y.iter().map(|v| v - y_mean).collect();

    let window: Vec<f64> = (0..seg_len)
        .map(|j| 0.5 * (1.0 - (2.0 * PI * j as f64 / (seg_len - 1) as f64).cos()))
        .collect();

    let mut s_uu = vec![0.0f64; grid_hz.len()];
    let mut s_uy = vec![Complex64::new(0.0, 0.0); grid_hz.len()];
    for s in 0..segments {
        let start = s * hop;
        if start + seg_len > n {
            break;
        }
        for (gi, &f) in grid_hz.iter().enumerate() {
            let w = 2.0 * PI * f;
            let mut uf = Complex64::new(0.0, 0.0);
            let mut yf = Complex64::new(0.0, 0.0);
            let rot = Complex64::new(0.0, -w * dt).exp();
            let mut phase = Complex64::new(1.0, 0.0);
            for j in 0..seg_len {
                let wj = window[j];
                uf += phase * (wj * u[start + j]);
                yf += phase * (wj * y[start + j]);
                phase *= rot;
            }
            s_uu[gi] += uf.norm_sqr();
            s_uy[gi] += uf.conj() * yf;
        }
    }

    let max_power = s_uu.iter().copied().fold(0.0f64, f64::max);
    let mut values = Vec::with_capacity(grid_hz.len());
    for (gi, &f) in grid_hz.iter().enumerate() {
        if s_uu[gi] <= 1e-9 * max_power {
            return Err(Error::IdentificationFailed(format!(
                "insufficient excitation at {f} Hz; grid point outside the swept band?"
            )));
        }
        values.push(DMatrix::from_element(1, 1, s_uy[gi] / s_uu[gi]));
    }
    Ok(FrequencyResponse {
        omega: grid_hz.iter().map(|f| 2.0 * PI * f).collect(),
        values,
    })
}

fn frf_points(frf: &FrequencyResponse) -> Vec<(f64, Complex64)> {
    frf.omega
        .iter()
        .zip(&frf.values)
        .map(|(&w, v)| (w, v[(0, 0)]))
        .collect()
}

/// Weighted linear least squares over stacked real/imaginary rows.
fn complex_ls(rows: &[(Vec<Complex64>, Complex64, f64)], unknowns: usize) -> Result<Vec<f64>> {
    let m = rows.len() * 2;
    let mut a = DMatrix::zeros(m, unknowns);
    let mut b = DVector::zeros(m);
    for (k, (coeffs, rhs, weight)) in rows.iter().enumerate() {
        for (j, c) in coeffs.iter().enumerate() {
            a[(2 * k, j)] = weight * c.re;
            a[(2 * k + 1, j)] = weight * c.im;
        }
        b[2 * k] = weight * rhs.re;
        b[2 * k + 1] = weight * rhs.im;
    }
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-12)
        .map(|v| v.iter().copied().collect())
        .map_err(|e| Error::IdentificationFailed(format!("least squares failed: {e}")))
}

fn time_domain_fit(model: &TransferFunction, data: &TimeSeries) -> Result<(f64, f64)> {
    // Records rarely start at rest, so compare against the forced response
    // plus a least-squares initial-state correction — the same convention
    // identification toolboxes use for model/data comparison.
    let sys = tf_to_ss(model)?;
    let d = crate::lti::discretize(&sys, data.dt())?;
    let nx = sys.n_states();
    let n = data.len();

    let mut x = DVector::zeros(nx);
    let mut u = DVector::zeros(1);
    let mut y_forced = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    // row_k = C·A_d^k gives the zero-input contribution of the initial state.
    let mut row = d.c.row(0).clone_owned();
    for &ui in &data.u {
        u[0] = ui;
        let (xn, yo) = d.step(&x, &u);
        y_forced.push(yo[0]);
        x = xn;
        rows.push(row.clone());
        row = &row * &d.a;
    }

    let mut gram = DMatrix::<f64>::zeros(nx, nx);
    let mut rhs = DVector::<f64>::zeros(nx);
    for i in 0..n {
        let e = data.y[i] - y_forced[i];
        gram += rows[i].transpose() * &rows[i];
        rhs += rows[i].transpose() * e;
    }
    for j in 0..nx {
        gram[(j, j)] += 1e-12 * (1.0 + gram[(j, j)].abs());
    }
    let x0 = gram
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| DVector::zeros(nx));

    let nf = n as f64;
    let y_mean = data.y.iter().sum::<f64>() / nf;
    let mut err = 0.0;
    let mut dev = 0.0;
    for i in 0..n {
        let e = data.y[i] - y_forced[i] - (&rows[i] * &x0)[0];
        err += e * e;
        let dvn = data.y[i] - y_mean;
        dev += dvn * dvn;
    }
    let fit = 100.0 * (1.0 - (err / dev.max(1e-300)).sqrt());
    Ok((fit, err / nf))
}

fn frequency_domain_fit(model: &TransferFunction, pts: &[(f64, Complex64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mean = pts.iter().map(|(_, h)| h).sum::<Complex64>() / n;
    let mut err = 0.0;
    let mut dev = 0.0;
    for &(w, h) in pts {
        err += (model.eval_jw(w) - h).norm_sqr();
        dev += (h - mean).norm_sqr();
    }
    (100.0 * (1.0 - (err / dev.max(1e-300)).sqrt()), err / n)
}

/// Fit `K·ω²/(s² + 2ζω s + ω²)` to a frequency response.
///
/// With the constraint flag the damping ratio is pinned to exactly one and
/// only the cutoff is searched. `validation` switches the fit metrics to
/// the time domain (simulating the model against the record's output).
pub fn fit_second_order(
    frf: &FrequencyResponse,
    constrain_zeta_to_one: bool,
    validation: Option<&TimeSeries>,
) -> Result<FitResult> {
    let pts = frf_points(frf);
    if pts.len() < 8 {
        return Err(Error::IdentificationFailed(
            "need at least 8 frequency points".into(),
        ));
    }

    let (k, zeta, omega) = if constrain_zeta_to_one {
        fit_critical(&pts)?
    } else {
        fit_sk_second_order(&pts)?
    };
    if k <= 0.0 || zeta <= 0.0 || omega <= 0.0 {
        return Err(Error::IdentificationFailed(format!(
            "negative-parameter solution (K={k:.3}, zeta={zeta:.3}, omega={omega:.3})"
        )));
    }

    let model = TransferFunction::new(
        vec![k * omega * omega],
        vec![1.0, 2.0 * zeta * omega, omega * omega],
    )?;
    let (fit_percent, mse) = match validation {
        Some(ts) => time_domain_fit(&model, ts)?,
        None => frequency_domain_fit(&model, &pts),
    };
    let mut params = BTreeMap::new();
    params.insert("K".into(), k);
    params.insert("zeta".into(), if constrain_zeta_to_one { 1.0 } else { zeta });
    params.insert("omega_c".into(), omega);
    params.insert("f_c_hz".into(), omega / (2.0 * PI));
    Ok(FitResult {
        model,
        params,
        fit_percent,
        mse,
    })
}

fn fit_sk_second_order(pts: &[(f64, Complex64)]) -> Result<(f64, f64, f64)> {
    // Unknowns (b0, a1, a2) of b0/(s² + a1 s + a2), reweighted by the
    // previous denominator each pass.
    let mut den = vec![1.0, 0.0, 0.0];
    let mut theta = [0.0f64; 3];
    for iter in 0..50 {
        let rows: Vec<(Vec<Complex64>, Complex64, f64)> = pts
            .iter()
            .map(|&(w, h)| {
                let s = Complex64::new(0.0, w);
                let dmag = crate::lti::tf::polyval(&den, s).norm().max(1e-12);
                let weight = 1.0 / dmag;
                (vec![Complex64::new(1.0, 0.0), -s * h, -h], s * s * h, weight)
            })
            .collect();
        let sol = complex_ls(&rows, 3)?;
        let new = [sol[0], sol[1], sol[2]];
        let delta = theta
            .iter()
            .zip(&new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        theta = new;
        den = vec![1.0, theta[1], theta[2]];
        if iter > 0 && delta < 1e-10 * (1.0 + theta.iter().fold(0.0f64, |a, &b| a.max(b.abs()))) {
            break;
        }
    }
    let (b0, a1, a2) = (theta[0], theta[1], theta[2]);
    if a2 <= 0.0 {
        return Err(Error::IdentificationFailed(
            "denominator constant came out nonpositive".into(),
        ));
    }
    let omega = a2.sqrt();
    Ok((b0 / a2, a1 / (2.0 * omega), omega))
}

fn fit_critical(pts: &[(f64, Complex64)]) -> Result<(f64, f64, f64)> {
    // One nonlinear parameter (ω) with closed-form gain: coarse log grid,
    // then golden-section refinement.
    let gain_and_cost = |omega: f64| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        let shapes: Vec<Complex64> = pts
            .iter()
            .map(|&(w, _)| {
                let s = Complex64::new(0.0, w);
                let d = s + Complex64::new(omega, 0.0);
                Complex64::new(omega * omega, 0.0) / (d * d)
            })
            .collect();
        for (&(_, h), g) in pts.iter().zip(&shapes) {
            num += (g.conj() * h).re;
            den += g.norm_sqr();
        }
        let k = (num / den.max(1e-300)).max(1e-12);
        let cost = pts
            .iter()
            .zip(&shapes)
            .map(|(&(_, h), g)| (g * k - h).norm_sqr())
            .sum::<f64>();
        (k, cost)
    };

    let w_lo = pts.first().unwrap().0 / 4.0;
    let w_hi = pts.last().unwrap().0 * 4.0;
    let mut best = (f64::INFINITY, w_lo);
    for i in 0..240 {
        let w = w_lo * (w_hi / w_lo).powf(i as f64 / 239.0);
        let (_, cost) = gain_and_cost(w);
        if cost < best.0 {
            best = (cost, w);
        }
    }
    let mut a = best.1 / 1.3;
    let mut b = best.1 * 1.3;
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if gain_and_cost(c).1 < gain_and_cost(d).1 {
            b = d;
        } else {
            a = c;
        }
    }
    let omega = 0.5 * (a + b);
    let (k, _) = gain_and_cost(omega);
    Ok((k, 1.0, omega))
}

/// Fit a stable strictly-proper rational model of the requested order to a
/// force-tracking record, estimating the FRF over `band_hz` first. The fit
/// metrics are computed in the time domain against the record itself.
pub fn fit_reduced_order(data: &TimeSeries, order: usize, band_hz: (f64, f64)) -> Result<FitResult> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidParameter(
            "reduced-order fit supports orders 1 to 3".into(),
        ));
    }
    let grid: Vec<f64> = crate::lti::log_grid(band_hz.0, band_hz.1, 60);
    let frf = estimate_frf(data, &grid, &FrfConfig::default())?;
    let pts = frf_points(&frf);

    // Work on the demeaned record for the time-domain metrics so the
    // operating-point offset does not dominate the residual.
    let n = data.len() as f64;
    let u_mean = data.u.iter().sum::<f64>() / n;
    let y_mean = data.y.iter().sum::<f64>() / n;
    let centered = TimeSeries::new(
        data.t.clone(),
        data.u.iter().map(|v| v - u_mean).collect(),
        data.y.iter().map(|v| v - y_mean).collect(),
    )?;

    let mut den = vec![0.0; order + 1];
    den[0] = 1.0;
    let mut num = vec![0.0; order];
    for pass in 0..30 {
        let rows: Vec<(Vec<Complex64>, Complex64, f64)> = pts
            .iter()
            .map(|&(w, h)| {
                let s = Complex64::new(0.0, w);
                let weight = 1.0 / crate::lti::tf::polyval(&den, s).norm().max(1e-12);
                let mut coeffs = Vec::with_capacity(2 * order);
                // numerator coefficients b_0..b_{order-1} (descending powers)
                for i in 0..order {
                    coeffs.push(s.powu((order - 1 - i) as u32));
                }
                // denominator coefficients a_1..a_order
                for m in 1..=order {
                    coeffs.push(-s.powu((order - m) as u32) * h);
                }
                (coeffs, s.powu(order as u32) * h, weight)
            })
            .collect();
        let sol = complex_ls(&rows, 2 * order)?;
        let new_num: Vec<f64> = sol[..order].to_vec();
        let mut new_den = vec![1.0];
        new_den.extend_from_slice(&sol[order..]);
        let delta: f64 = den
            .iter()
            .zip(&new_den)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        num = new_num;
        den = new_den;
        if pass > 0 && delta < 1e-10 {
            break;
        }
    }

    let mut model = TransferFunction::new(num, den)?;
    let poles = tf_to_ss(&model)?.poles();
    if poles.iter().any(|p| p.re >= 0.0) {
        // Reflect unstable poles and refit only the numerator.
        let mirrored: Vec<Complex64> = poles
            .iter()
            .map(|p| {
                if p.re >= 0.0 {
                    Complex64::new(-p.re.max(1e-6), p.im)
                } else {
                    *p
                }
            })
            .collect();
        let stable_den = poly_from_roots(&mirrored);
        let rows: Vec<(Vec<Complex64>, Complex64, f64)> = pts
            .iter()
            .map(|&(w, h)| {
                let s = Complex64::new(0.0, w);
                let d = crate::lti::tf::polyval(&stable_den, s);
                let coeffs = (0..order).map(|i| s.powu((order - 1 - i) as u32)).collect();
                (coeffs, h * d, 1.0 / d.norm().max(1e-12))
            })
            .collect();
        let nb = complex_ls(&rows, order)?;
        model = TransferFunction::new(nb, stable_den)?;
    }

    let (fit_percent, mse) = time_domain_fit(&model, &centered)?;
    let mut params = BTreeMap::new();
    params.insert("order".into(), order as f64);
    params.insert("dc_gain".into(), model.dc_gain());
    Ok(FitResult {
        model,
        params,
        fit_percent,
        mse,
    })
}

/// Real polynomial (descending powers, monic) from a conjugate-closed
/// root set.
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs.iter().map(|c| c.re).collect()
}

fn cutoff_from_magnitude(dc: f64, mag: impl Fn(f64) -> f64) -> Result<f64> {
    if !(dc.is_finite() && dc > 0.0) {
        return Err(Error::InvalidParameter(
            "cutoff needs a finite positive DC gain".into(),
        ));
    }
    let target = dc / 2.0_f64.sqrt();
    let limit: f64 = 1e4;
    let n = 600;
    let w_min: f64 = 1e-4;
    let mut prev_w = 0.0;
    let mut prev_mag = dc;
    for i in 0..n {
        let w = w_min * (limit / w_min).powf(i as f64 / (n - 1) as f64);
        let m = mag(w);
        if prev_mag >= target && m < target {
            // Bisect inside the bracket; the lower edge may be ω = 0.
            let (mut lo, mut hi) = (prev_w, w);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mag(mid) >= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi) / (2.0 * PI));
        }
        prev_w = w;
        prev_mag = m;
    }
    Err(Error::NoCutoff { limit })
}

/// Smallest frequency (Hz) where the magnitude falls to 1/√2 of DC.
pub fn cutoff_minus3db(model: &TransferFunction) -> Result<f64> {
    let dc = model.dc_gain().abs();
    cutoff_from_magnitude(dc, |w| model.eval_jw(w).norm())
}

/// Cutoff of one state-space channel, for closed-loop models that never
/// existed as a transfer function.
pub fn cutoff_minus3db_ss(sys: &StateSpace, out: usize, inp: usize) -> Result<f64> {
    let dc = sys
        .dc_gain()
        .map_err(|_| Error::InvalidParameter("cutoff needs a finite DC gain".into()))?[(out, inp)]
        .abs();
    cutoff_from_magnitude(dc, |w| {
        freq_response(sys, &[w])
            .map(|fr| fr.values[0][(out, inp)].norm())
            .unwrap_or(f64::INFINITY)
    })
}
