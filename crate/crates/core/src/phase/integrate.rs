//! Autonomous ODE integrators: adaptive Dormand-Prince 8(5,3) and fixed-step
//! implicit midpoint.

#![allow(clippy::excessive_precision)]

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError<E> {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("maximum step count {0} exceeded")]
    MaxSteps(usize),
    #[error("implicit midpoint iteration did not converge at t = {t}")]
    NoConvergence { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Field(E),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// Absolute and relative local tolerance.
    pub tol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { tol: 1e-10, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

impl StepOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// One accepted step.
#[derive(Debug, Clone)]
pub struct Step {
    pub t0: f64,
    pub y0: Vec<f64>,
    pub t1: f64,
    pub y1: Vec<f64>,
}

/// Adaptive DOP853 stepper over `y' = f(y)`, forward in time.
pub struct Dop853<F> {
    rhs: F,
    opts: StepOptions,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    steps: usize,
    last_rejected: bool,
}

impl<F, E> Dop853<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    pub fn new(rhs: F, y0: &[f64], opts: StepOptions) -> Result<Self, IntegrateError<E>> {
        let k1 = rhs(y0).map_err(IntegrateError::Field)?;
        let mut s = Self {
            rhs,
            opts,
            t: 0.0,
            y: y0.to_vec(),
            k1,
            h: 0.0,
            steps: 0,
            last_rejected: false,
        };
        s.h = s.initial_step()?;
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Derivative at the current state.
    pub fn dydt(&self) -> &[f64] {
        &self.k1
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn set_h_max(&mut self, h_max: f64) {
        self.opts.h_max = h_max;
    }

    fn scale(&self, y0: f64, y1: f64) -> f64 {
        self.opts.tol + self.opts.tol * y0.abs().max(y1.abs())
    }

    fn initial_step(&self) -> Result<f64, IntegrateError<E>> {
        let n = self.y.len().max(1) as f64;
        let sk: Vec<f64> = self.y.iter().map(|&y| self.scale(y, y)).collect();
        let dnf = (self.k1.iter().zip(&sk).map(|(f, s)| (f / s).powi(2)).sum::<f64>() / n).sqrt();
        let dny = (self.y.iter().zip(&sk).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n).sqrt();
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
        h = h.min(self.opts.h_max);
        // explicit Euler probe for the second derivative
        let y1: Vec<f64> = self.y.iter().zip(&self.k1).map(|(y, f)| y + h * f).collect();
        let f1 = (self.rhs)(&y1).map_err(IntegrateError::Field)?;
        let der2 = (f1.iter().zip(&self.k1).zip(&sk).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n)
            .sqrt()
            / h;
        let der12 = der2.max(dnf);
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        Ok((100.0 * h).min(h1).min(self.opts.h_max))
    }

    /// Attempt steps until one is accepted; `limit` caps the step length.
    pub fn step(&mut self, limit: f64) -> Result<Step, IntegrateError<E>> {
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(IntegrateError::MaxSteps(self.opts.max_steps));
            }
            let h = self.h.min(self.opts.h_max).min(limit);
            if h < 1e-14 * (1.0 + self.t.abs()) && h < limit {
                return Err(IntegrateError::StepUnderflow { t: self.t });
            }
            self.steps += 1;
            let (y_new, err, k13) = self.attempt(h)?;
            if !y_new.iter().all(|v| v.is_finite()) {
                return Err(IntegrateError::NonFinite { t: self.t });
            }
            // step-size control
            let fac11 = err.powf(1.0 / 8.0);
            // growth at most 6x, shrink at most 3x per step
            let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 1.0 / 0.333);
            let mut h_new = h / fac;
            if err <= 1.0 {
                if self.last_rejected {
                    h_new = h_new.min(h);
                    self.last_rejected = false;
                }
                let step = Step { t0: self.t, y0: std::mem::take(&mut self.y), t1: self.t + h, y1: y_new.clone() };
                self.t += h;
                self.y = y_new;
                self.k1 = k13;
                // a step clipped by `limit` says nothing about the natural size
                self.h = if h < self.h && h == limit { self.h } else { h_new };
                return Ok(step);
            }
            self.last_rejected = true;
            self.h = h / (1.0 / 0.333f64).min(fac11 / 0.9);
        }
    }

    /// Integrate to `t_end >= t` exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<(), IntegrateError<E>> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            if remaining <= 1e-15 * (1.0 + t_end.abs()) {
                break;
            }
            let step = self.step(remaining)?;
            if (t_end - step.t1).abs() <= 1e-15 * (1.0 + t_end.abs()) {
                self.t = t_end;
            }
        }
        Ok(())
    }

    fn attempt(&self, h: f64) -> Result<(Vec<f64>, f64, Vec<f64>), IntegrateError<E>> {
        let y = &self.y;
        let n = y.len();
        let f = |y: &[f64]| (self.rhs)(y).map_err(IntegrateError::Field);
        let comb = |terms: &[(f64, &Vec<f64>)]| -> Vec<f64> {
            (0..n).map(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>()).collect()
        };
        let k1 = &self.k1;
        let k2 = f(&comb(&[(A21, k1)]))?;
        let k3 = f(&comb(&[(A31, k1), (A32, &k2)]))?;
        let k4 = f(&comb(&[(A41, k1), (A43, &k3)]))?;
        let k5 = f(&comb(&[(A51, k1), (A53, &k3), (A54, &k4)]))?;
        let k6 = f(&comb(&[(A61, k1), (A64, &k4), (A65, &k5)]))?;
        let k7 = f(&comb(&[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)]))?;
        let k8 = f(&comb(&[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]))?;
        let k9 = f(&comb(&[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)]))?;
        let k10 = f(&comb(&[
            (A101, k1),
            (A104, &k4),
            (A105, &k5),
            (A106, &k6),
            (A107, &k7),
            (A108, &k8),
            (A109, &k9),
        ]))?;
        let k11 = f(&comb(&[
            (A111, k1),
            (A114, &k4),
            (A115, &k5),
            (A116, &k6),
            (A117, &k7),
            (A118, &k8),
            (A119, &k9),
            (A1110, &k10),
        ]))?;
        let k12 = f(&comb(&[
            (A121, k1),
            (A124, &k4),
            (A125, &k5),
            (A126, &k6),
            (A127, &k7),
            (A128, &k8),
            (A129, &k9),
            (A1210, &k10),
            (A1211, &k11),
        ]))?;
        let y_new = comb(&[
            (B1, k1),
            (B6, &k6),
            (B7, &k7),
            (B8, &k8),
            (B9, &k9),
            (B10, &k10),
            (B11, &k11),
            (B12, &k12),
        ]);
        let k13 = f(&y_new)?;

        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..n {
            let sk = self.scale(y[i], y_new[i]);
            let e2 = B1 * k1[i] + B6 * k6[i] + B7 * k7[i] + B8 * k8[i] + B9 * k9[i] + B10 * k10[i] + B11 * k11[i]
                + B12 * k12[i]
                - BHH1 * k1[i]
                - BHH2 * k9[i]
                - BHH3 * k12[i];
            err2 += (e2 / sk).powi(2);
            let e5 = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k11[i]
                + ER12 * k12[i];
            err += (e5 / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * n.max(1) as f64)).sqrt();
        Ok((y_new, err, k13))
    }
}

/// Integrate `y' = f(y)` from `y0` over a duration `t >= 0`.
pub fn integrate<F, E>(rhs: F, y0: &[f64], t: f64, opts: StepOptions) -> Result<Vec<f64>, IntegrateError<E>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    if t == 0.0 {
        return Ok(y0.to_vec());
    }
    let mut stepper = Dop853::new(rhs, y0, opts)?;
    stepper.advance_to(t)?;
    Ok(stepper.y.clone())
}

/// Fixed-step implicit midpoint rule, solved by fixed-point iteration.
///
/// Symplectic for Hamiltonian fields and exact on quadratic invariants.
pub fn implicit_midpoint<F, E>(rhs: F, y0: &[f64], h: f64, steps: usize) -> Result<Vec<f64>, IntegrateError<E>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    let mut y = y0.to_vec();
    let n = y.len();
    for s in 0..steps {
        let f0 = rhs(&y).map_err(IntegrateError::Field)?;
        let mut next: Vec<f64> = (0..n).map(|i| y[i] + h * f0[i]).collect();
        let mut converged = false;
        for _ in 0..100 {
            let mid: Vec<f64> = (0..n).map(|i| 0.5 * (y[i] + next[i])).collect();
            let fm = rhs(&mid).map_err(IntegrateError::Field)?;
            let candidate: Vec<f64> = (0..n).map(|i| y[i] + h * fm[i]).collect();
            let delta = candidate.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            next = candidate;
            if delta <= 1e-15 * (1.0 + next.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(IntegrateError::NoConvergence { t: s as f64 * h });
        }
        y = next;
    }
    Ok(y)
}

// Dormand-Prince 8(5,3) tableau.
const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;
