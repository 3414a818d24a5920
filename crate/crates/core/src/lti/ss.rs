//! State-space realizations and interconnection algebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::tf::TransferFunction;

/// Continuous-time LTI system `x' = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Discrete-time LTI system `x[k+1] = Ax[k] + Bu[k]`, `y[k] = Cx[k] + Du[k]`
/// with sample time `ts` seconds.
#[derive(Debug, Clone)]
pub struct DiscreteStateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub ts: f64,
}

/// Interconnection mode for [`connect`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectMode {
    /// Signal flows through `a` first, then `b`: result = b ∘ a.
    Series,
    /// Outputs added: result = a + b.
    Parallel,
    /// `a` in the forward path, `b` in the (negative) feedback path.
    FeedbackNegative,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch("A must be square".into()));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch("B rows must match A".into()));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch("C cols must match A".into()));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch("D must be p x m".into()));
        }
        Ok(Self { a, b, c, d })
    }

    /// Static gain system (no states).
    pub fn from_gain(k: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, k),
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Eigenvalues of A.
    pub fn poles(&self) -> Vec<Complex64> {
        if self.n_states() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    /// True if every eigenvalue of A has strictly negative real part.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.re < 0.0)
    }

    /// DC gain matrix `D - C A^-1 B`. Requires A nonsingular.
    pub fn dc_gain(&self) -> Result<DMatrix<f64>> {
        if self.n_states() == 0 {
            return Ok(self.d.clone());
        }
        let lu = self.a.clone().lu();
        let x = lu
            .solve(&self.b)
            .ok_or_else(|| Error::DimensionMismatch("A is singular in dc_gain".into()))?;
        Ok(&self.d - &self.c * x)
    }

    /// Keep a subset of outputs (rows of C and D), in the given order.
    pub fn select_outputs(&self, rows: &[usize]) -> StateSpace {
        let c = DMatrix::from_fn(rows.len(), self.n_states(), |i, j| self.c[(rows[i], j)]);
        let d = DMatrix::from_fn(rows.len(), self.n_inputs(), |i, j| self.d[(rows[i], j)]);
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c,
            d,
        }
    }

    /// Keep a subset of inputs (columns of B and D), in the given order.
    pub fn select_inputs(&self, cols: &[usize]) -> StateSpace {
        let b = DMatrix::from_fn(self.n_states(), cols.len(), |i, j| self.b[(i, cols[j])]);
        let d = DMatrix::from_fn(self.n_outputs(), cols.len(), |i, j| self.d[(i, cols[j])]);
        StateSpace {
            a: self.a.clone(),
            b,
            c: self.c.clone(),
            d,
        }
    }
}

impl DiscreteStateSpace {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// One simulation step: returns (x_next, y).
    pub fn step(
        &self,
        x: &nalgebra::DVector<f64>,
        u: &nalgebra::DVector<f64>,
    ) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
        let x_next = &self.a * x + &self.b * u;
        let y = &self.c * x + &self.d * u;
        (x_next, y)
    }

    /// Frequency response at `omega` rad/s via `z = exp(j*omega*ts)`.
    pub fn eval_jw(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let z = Complex64::new(0.0, omega * self.ts).exp();
        let n = self.n_states();
        if n == 0 {
            return Ok(self.d.map(|v| Complex64::new(v, 0.0)));
        }
        let mut zi_a = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..n {
            zi_a[(i, i)] += z;
        }
        let bc = self.b.map(|v| Complex64::new(v, 0.0));
        let x = zi_a
            .lu()
            .solve(&bc)
            .ok_or(Error::EvaluationAtPole { omega })?;
        let cc = self.c.map(|v| Complex64::new(v, 0.0));
        let dc = self.d.map(|v| Complex64::new(v, 0.0));
        Ok(&cc * x + dc)
    }
}

/// Controllable-canonical realization of a proper transfer function.
///
/// The resulting system reproduces the transfer function exactly; static
/// gains come out with zero states.
pub fn tf_to_ss(tf: &TransferFunction) -> Result<StateSpace> {
    if !tf.is_proper() {
        return Err(Error::ImproperTransferFunction {
            num_deg: tf.num_degree(),
            den_deg: tf.den_degree(),
        });
    }
    let lead = tf.den[0];
    if lead == 0.0 {
        return Err(Error::InvalidTransferFunction(
            "leading denominator coefficient is zero".into(),
        ));
    }
    let den: Vec<f64> = tf.den.iter().map(|&c| c / lead).collect();
    let num: Vec<f64> = tf.num.iter().map(|&c| c / lead).collect();
    let n = den.len() - 1;

    // Pad numerator to the denominator length.
    let mut b = vec![0.0; den.len()];
    let offset = den.len() - num.len();
    b[offset..].copy_from_slice(&num);

    let d0 = b[0];
    if n == 0 {
        return Ok(StateSpace::from_gain(d0));
    }

    // Strictly-proper remainder after pulling out the feedthrough.
    let rem: Vec<f64> = (1..=n).map(|i| b[i] - d0 * den[i]).collect();

    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        a[(0, j)] = -den[j + 1];
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut bm = DMatrix::zeros(n, 1);
    bm[(0, 0)] = 1.0;
    let c = DMatrix::from_fn(1, n, |_, j| rem[j]);
    let d = DMatrix::from_element(1, 1, d0);
    StateSpace::new(a, bm, c, d)
}

/// Interconnect two systems. `Series` feeds the output of `a` into `b`.
pub fn connect(a: &StateSpace, b: &StateSpace, mode: ConnectMode) -> Result<StateSpace> {
    match mode {
        ConnectMode::Series => series(a, b),
        ConnectMode::Parallel => parallel(a, b),
        ConnectMode::FeedbackNegative => feedback_negative(a, b),
    }
}

fn stack_states(a: &StateSpace, b: &StateSpace) -> (usize, usize) {
    (a.n_states(), b.n_states())
}

fn series(a: &StateSpace, b: &StateSpace) -> Result<StateSpace> {
    if a.n_outputs() != b.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "series: a has {} outputs but b has {} inputs",
            a.n_outputs(),
            b.n_inputs()
        )));
    }
    let (na, nb) = stack_states(a, b);
    let n = na + nb;
    let mut am = DMatrix::zeros(n, n);
    am.view_mut((0, 0), (na, na)).copy_from(&a.a);
    am.view_mut((na, 0), (nb, na)).copy_from(&(&b.b * &a.c));
    am.view_mut((na, na), (nb, nb)).copy_from(&b.a);

    let mut bm = DMatrix::zeros(n, a.n_inputs());
    bm.view_mut((0, 0), (na, a.n_inputs())).copy_from(&a.b);
    bm.view_mut((na, 0), (nb, a.n_inputs()))
        .copy_from(&(&b.b * &a.d));

    let mut cm = DMatrix::zeros(b.n_outputs(), n);
    cm.view_mut((0, 0), (b.n_outputs(), na))
        .copy_from(&(&b.d * &a.c));
    cm.view_mut((0, na), (b.n_outputs(), nb)).copy_from(&b.c);

    let dm = &b.d * &a.d;
    StateSpace::new(am, bm, cm, dm)
}

fn parallel(a: &StateSpace, b: &StateSpace) -> Result<StateSpace> {
    if a.n_inputs() != b.n_inputs() || a.n_outputs() != b.n_outputs() {
        return Err(Error::DimensionMismatch(
            "parallel: input/output dimensions must match".into(),
        ));
    }
    let (na, nb) = stack_states(a, b);
    let n = na + nb;
    let mut am = DMatrix::zeros(n, n);
    am.view_mut((0, 0), (na, na)).copy_from(&a.a);
    am.view_mut((na, na), (nb, nb)).copy_from(&b.a);

    let mut bm = DMatrix::zeros(n, a.n_inputs());
    bm.view_mut((0, 0), (na, a.n_inputs())).copy_from(&a.b);
    bm.view_mut((na, 0), (nb, b.n_inputs())).copy_from(&b.b);

    let mut cm = DMatrix::zeros(a.n_outputs(), n);
    cm.view_mut((0, 0), (a.n_outputs(), na)).copy_from(&a.c);
    cm.view_mut((0, na), (b.n_outputs(), nb)).copy_from(&b.c);

    StateSpace::new(am, bm, cm, &a.d + &b.d)
}

/// Closed loop of forward path `a` and feedback path `b` with negative
/// feedback: `u_a = r - b(y_a)`, output `y_a`.
fn feedback_negative(a: &StateSpace, b: &StateSpace) -> Result<StateSpace> {
    if a.n_outputs() != b.n_inputs() || b.n_outputs() != a.n_inputs() {
        return Err(Error::DimensionMismatch(
            "feedback: a outputs must feed b inputs and vice versa".into(),
        ));
    }
    let p = a.n_outputs();
    // E = (I + D_a D_b)^-1 ; singular E means an ill-posed algebraic loop.
    let m = DMatrix::identity(p, p) + &a.d * &b.d;
    let e = m.lu().try_inverse().ok_or(Error::AlgebraicLoop)?;

    let (na, nb) = stack_states(a, b);
    let n = na + nb;
    let r_dim = a.n_inputs();

    let e_ca = &e * &a.c; // p x na
    let e_da_cb = &e * &a.d * &b.c; // p x nb
    let e_da = &e * &a.d; // p x r

    // u_a = r - C_b x_b - D_b y_a
    let ua_xa = -(&b.d * &e_ca); // r x na
    let ua_xb = &b.d * &e_da_cb - &b.c; // r x nb
    let ua_r = DMatrix::identity(r_dim, r_dim) - &b.d * &e_da; // r x r

    let mut am = DMatrix::zeros(n, n);
    am.view_mut((0, 0), (na, na))
        .copy_from(&(&a.a + &a.b * &ua_xa));
    am.view_mut((0, na), (na, nb)).copy_from(&(&a.b * &ua_xb));
    am.view_mut((na, 0), (nb, na)).copy_from(&(&b.b * &e_ca));
    am.view_mut((na, na), (nb, nb))
        .copy_from(&(&b.a - &b.b * &e_da_cb));

    let mut bm = DMatrix::zeros(n, r_dim);
    bm.view_mut((0, 0), (na, r_dim)).copy_from(&(&a.b * &ua_r));
    bm.view_mut((na, 0), (nb, r_dim))
        .copy_from(&(&b.b * &e_da));

    let mut cm = DMatrix::zeros(p, n);
    cm.view_mut((0, 0), (p, na)).copy_from(&e_ca);
    cm.view_mut((0, na), (p, nb)).copy_from(&(-&e_da_cb));

    StateSpace::new(am, bm, cm, e_da)
}

/// Tustin (bilinear) discretization with sample time `ts`.
pub fn discretize(sys: &StateSpace, ts: f64) -> Result<DiscreteStateSpace> {
    if ts <= 0.0 {
        return Err(Error::InvalidParameter("sample time must be positive".into()));
    }
    let n = sys.n_states();
    if n == 0 {
        return Ok(DiscreteStateSpace {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, sys.n_inputs()),
            c: DMatrix::zeros(sys.n_outputs(), 0),
            d: sys.d.clone(),
            ts,
        });
    }
    let half = ts / 2.0;
    let m = DMatrix::identity(n, n) - &sys.a * half;
    let lu = m.lu();
    let m_inv = lu.try_inverse().ok_or(Error::SingularDiscretization)?;
    let ad = &m_inv * (DMatrix::identity(n, n) + &sys.a * half);
    let bd = &m_inv * &sys.b * ts;
    let cd = &sys.c * &m_inv;
    let dd = &sys.d + &sys.c * &m_inv * &sys.b * half;
    Ok(DiscreteStateSpace {
        a: ad,
        b: bd,
        c: cd,
        d: dd,
        ts,
    })
}
