//! Poincare sections: crossing detection and refinement, first-return map,
//! globality checks and the mapping-torus chart.
//!
//! A section is the level set `theta = level` of a circle-valued function.
//! Along an orbit the angle is tracked as a continuous lift (step lengths are
//! capped so the angle moves less than a quarter turn per step), and only
//! crossings where the lift increases in the section's orientation count.

use std::f64::consts::{FRAC_PI_4, TAU};
#[cfg(test)]
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::forms::{ChartMap, KForm};
use crate::linalg;
use crate::par::Execution;
use crate::phase::{self, wrap_symmetric, Dop853, HamiltonianSystem, PhaseError, StepOptions};

/// Crossings with `|d theta/dt|` below this are grazing, not transverse.
pub const TANGENCY_MARGIN: f64 = 1e-8;
/// A point is on the section when `|theta - level|` (mod 2 pi) is below this.
pub const ON_SECTION_TOL: f64 = 1e-8;
/// Newton refinement target for `|theta(Phi^t(p)) - level|`.
pub const CROSSING_RESIDUAL: f64 = 1e-12;
pub const DEFAULT_T_MAX: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SectionError {
    #[error("point is not on the section (offset {offset:e})")]
    NotOnSection { offset: f64 },
    #[error("grazing crossing at t = {time}: d theta/dt = {rate:e}")]
    Tangency { time: f64, rate: f64 },
    #[error("found {found} of {wanted} crossings before t_max = {t_max}")]
    NoCrossing { t_max: f64, found: usize, wanted: usize },
    #[error("section has no coordinate chart")]
    NoChart,
    #[error("finite-difference step {step:e} is below the noise floor {floor:e}")]
    StepTooSmall { step: f64, floor: f64 },
    #[error("mapping torus gluing residual {residual:e} exceeds {bound:e}")]
    Gluing { residual: f64, bound: f64 },
    #[error("invalid section: {0}")]
    Invalid(String),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

impl From<phase::IntegrateError<PhaseError>> for SectionError {
    fn from(e: phase::IntegrateError<PhaseError>) -> Self {
        SectionError::Phase(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// Count crossings with `d theta/dt > 0`.
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

type PointMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Coordinates on the section: `lift` maps section coordinates to an
/// ambient point on the section (and energy level), `project` inverts it.
#[derive(Clone)]
pub struct SectionChart {
    pub periods: Vec<Option<f64>>,
    lift: PointMap,
    project: PointMap,
}

impl SectionChart {
    pub fn new<L, P>(periods: Vec<Option<f64>>, lift: L, project: P) -> Self
    where
        L: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        P: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { periods, lift: Arc::new(lift), project: Arc::new(project) }
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        (self.lift)(u)
    }

    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        (self.project)(p)
    }

    /// The lift as a parametrized patch in an ambient chart of dimension
    /// `ambient_dim`, with a central-difference Jacobian.
    pub fn patch(&self, ambient_dim: usize) -> ChartMap {
        let k = self.dim();
        let (lift, jac_lift) = (self.lift.clone(), self.lift.clone());
        ChartMap::new(k, ambient_dim, move |u: &[f64]| lift(u), move |u: &[f64]| {
            let h = 1e-6;
            let mut jac = vec![0.0; ambient_dim * k];
            for c in 0..k {
                let (mut a, mut b) = (u.to_vec(), u.to_vec());
                a[c] += h;
                b[c] -= h;
                let (pa, pb) = (jac_lift(&a), jac_lift(&b));
                for r in 0..ambient_dim {
                    jac[r * k + c] = (pa[r] - pb[r]) / (2.0 * h);
                }
            }
            jac
        })
    }

    /// `b - a` in section coordinates, periodic components wrapped.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.periods)
            .map(|((x, y), p)| match p {
                Some(p) => wrap_symmetric(y - x, *p),
                None => y - x,
            })
            .collect()
    }
}

impl fmt::Debug for SectionChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SectionChart(dim = {})", self.dim())
    }
}

/// Level set `theta = level` of a circle-valued function.
#[derive(Debug, Clone)]
pub struct SectionSpec {
    /// Real-valued lift of the angle; values are read modulo `2 pi`.
    pub theta: KForm,
    pub level: f64,
    pub orientation: Orientation,
    pub chart: Option<SectionChart>,
}

impl SectionSpec {
    pub fn new(theta: KForm, level: f64) -> Result<Self, SectionError> {
        if theta.degree() != 0 {
            return Err(SectionError::Invalid("section function must be a 0-form".into()));
        }
        Ok(Self { theta, level, orientation: Orientation::Positive, chart: None })
    }

    /// Section `2 pi x_k / period = level` for a coordinate `x_k`.
    pub fn coordinate(dim: usize, k: usize, period: f64, level: f64) -> Result<Self, SectionError> {
        if k >= dim {
            return Err(SectionError::Invalid(format!("coordinate {k} out of range")));
        }
        let scale = TAU / period;
        let mut grad = vec![0.0; dim];
        grad[k] = scale;
        Self::new(KForm::scalar(dim, move |p| scale * p[k], move |_| grad.clone()), level)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn with_chart(mut self, chart: SectionChart) -> Self {
        self.chart = Some(chart);
        self
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    /// `theta(p) - level` wrapped into `[-pi, pi)`.
    pub fn offset(&self, p: &[f64]) -> f64 {
        wrap_symmetric(self.theta.value(p) - self.level, TAU)
    }

    /// `d theta (v)`.
    pub fn rate(&self, p: &[f64], v: &[f64]) -> f64 {
        self.theta.gradient(p).iter().zip(v).map(|(g, x)| g * x).sum()
    }

    /// Directional derivative of theta along `X_H` at `p`.
    pub fn flow_rate(&self, sys: &HamiltonianSystem, p: &[f64]) -> Result<f64, SectionError> {
        Ok(self.rate(p, &sys.vector_field(p)?))
    }

    /// Same section on a product chart whose trailing coordinates are pinned
    /// to `fixed` (theta ignores them).
    pub fn extend_trailing(&self, fixed: Vec<f64>) -> SectionSpec {
        let n = self.dim();
        let extra = fixed.len();
        let theta_v = self.theta.clone();
        let theta_g = self.theta.clone();
        let theta = KForm::scalar(
            n + extra,
            move |p| theta_v.value(&p[..n]),
            move |p| {
                let mut g = theta_g.gradient(&p[..n]);
                g.resize(n + extra, 0.0);
                g
            },
        );
        let chart = self.chart.clone().map(|c| {
            let (lift, project) = (c.lift.clone(), c.project.clone());
            let fixed = fixed.clone();
            SectionChart::new(
                c.periods.clone(),
                move |u| {
                    let mut p = lift(u);
                    p.extend(&fixed);
                    p
                },
                move |p| project(&p[..n]),
            )
        });
        SectionSpec { theta, level: self.level, orientation: self.orientation, chart }
    }
}

/// A refined section crossing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    /// Signed flow time from the scan start.
    pub time: f64,
    pub point: Vec<f64>,
    /// `d theta/dt` along the forward flow at the crossing.
    pub rate: f64,
}

#[derive(Debug, Clone)]
struct Scan {
    crossings: Vec<Crossing>,
    min_margin: f64,
    opposite: usize,
}

/// Continuous angle lift along an orbit, oriented so wanted crossings increase it.
struct Lift<'a> {
    sec: &'a SectionSpec,
    sign: f64,
}

impl Lift<'_> {
    fn advance(&self, u_prev: f64, y_prev: &[f64], y: &[f64]) -> f64 {
        u_prev + self.sign * wrap_symmetric(self.sec.theta.value(y) - self.sec.theta.value(y_prev), TAU)
    }
}

/// Lifted section point, its first return, and the flow sampled along `t_grid`.
type TorusRow = (Vec<f64>, ReturnRecord, Vec<Vec<f64>>);

#[allow(clippy::too_many_arguments)]
fn scan(
    sys: &HamiltonianSystem,
    sec: &SectionSpec,
    start: &[f64],
    backward: bool,
    t_max: f64,
    tol: f64,
    count: usize,
    skip_start: bool,
) -> Result<Scan, SectionError> {
    if !(tol > 0.0) || !(t_max > 0.0) {
        return Err(SectionError::Invalid("t_max and tol must be positive".into()));
    }
    let lift = Lift { sec, sign: sec.orientation.sign() };
    let dir = if backward { -1.0 } else { 1.0 };
    // forward scans look for the orientation-weighted lift rising through
    // multiples of 2 pi; backward scans for it falling through them
    let bucket = |u: f64| if backward { (u / TAU).ceil() } else { (u / TAU).floor() };

    let mut u = lift.sign * sec.offset(start);
    if skip_start && u.abs() < ON_SECTION_TOL {
        u = 0.0;
    }
    let mut m = bucket(u);
    let rhs = sys.rhs(backward);
    let mut stepper = Dop853::new(&rhs, start, StepOptions::with_tol(tol))?;
    let mut out = Scan { crossings: Vec::new(), min_margin: f64::INFINITY, opposite: 0 };

    while out.crossings.len() < count {
        let t = stepper.t();
        if t >= t_max {
            return Err(SectionError::NoCrossing { t_max, found: out.crossings.len(), wanted: count });
        }
        let rate = sec.rate(stepper.y(), stepper.dydt()).abs();
        out.min_margin = out.min_margin.min(rate);
        let mut limit = t_max - t;
        if rate > 0.0 {
            limit = limit.min(FRAC_PI_4 / rate);
        }
        let step = stepper.step(limit)?;
        let u_next = lift.advance(u, &step.y0, &step.y1);
        let m_next = bucket(u_next);
        let wanted = if backward { m_next < m } else { m_next > m };
        if wanted {
            let mut level = m;
            while out.crossings.len() < count && level != m_next {
                level += dir;
                let (s, y) = refine(sec, &rhs, &lift, &step.y0, u, step.t1 - step.t0, TAU * level, tol)?;
                let rate = sec.flow_rate(sys, &y)?;
                let time = dir * (step.t0 + s);
                if rate.abs() < TANGENCY_MARGIN {
                    return Err(SectionError::Tangency { time, rate });
                }
                out.min_margin = out.min_margin.min(rate.abs());
                out.crossings.push(Crossing { time, point: sys.manifold.reduced(&y), rate });
            }
        } else if m_next != m {
            out.opposite += (m_next - m).abs() as usize;
        }
        u = u_next;
        m = m_next;
    }
    Ok(out)
}

/// Newton on `g(s) = u(Phi^s(y_a)) - target` safeguarded by the bracket `[0, h]`.
#[allow(clippy::too_many_arguments)]
fn refine<F>(
    sec: &SectionSpec,
    rhs: &F,
    lift: &Lift<'_>,
    y_a: &[f64],
    u_a: f64,
    h: f64,
    target: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>), SectionError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, PhaseError>,
{
    let eval = |s: f64| -> Result<(f64, f64, Vec<f64>), SectionError> {
        let y = phase::integrate::integrate(rhs, y_a, s, StepOptions::with_tol(tol))?;
        let g = lift.advance(u_a, y_a, &y) - target;
        let dg = lift.sign * sec.rate(&y, &rhs(&y)?);
        Ok((g, dg, y))
    };
    let mut g_lo = u_a - target;
    let (mut lo, mut hi) = (0.0, h);
    let (g_hi, _, _) = eval(h)?;
    let mut s = if g_hi != g_lo { (-g_lo * h / (g_hi - g_lo)).clamp(0.0, h) } else { 0.5 * h };
    let mut last = None;
    for _ in 0..100 {
        let (g, dg, y) = eval(s)?;
        if g.abs() < CROSSING_RESIDUAL || hi - lo < 1e-15 * (1.0 + h) {
            return Ok((s, y));
        }
        if g.signum() == g_lo.signum() {
            lo = s;
            g_lo = g;
        } else {
            hi = s;
        }
        let newton = s - g / dg;
        s = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        last = Some(y);
    }
    Ok((s, last.unwrap_or_else(|| y_a.to_vec())))
}

/// First return of a section point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnRecord {
    pub start: Vec<f64>,
    pub return_time: f64,
    pub image: Vec<f64>,
    /// Minimum `|d theta/dt|` seen along the orbit segment.
    pub transversality_margin: f64,
    /// Crossings of either orientation, including the returned one.
    pub crossings_seen: usize,
    pub energy_error: f64,
}

/// First positively oriented return of `p` to the section.
pub fn first_return(
    sys: &HamiltonianSystem,
    sec: &SectionSpec,
    p: &[f64],
    t_max: f64,
    tol: f64,
) -> Result<ReturnRecord, SectionError> {
    let offset = sec.offset(p);
    if offset.abs() > ON_SECTION_TOL {
        return Err(SectionError::NotOnSection { offset });
    }
    let rate = sec.flow_rate(sys, p)?;
    if rate.abs() < TANGENCY_MARGIN {
        return Err(SectionError::Tangency { time: 0.0, rate });
    }
    let s = scan(sys, sec, p, false, t_max, tol, 1, true)?;
    let c = &s.crossings[0];
    Ok(ReturnRecord {
        start: sys.manifold.reduced(p),
        return_time: c.time,
        image: c.point.clone(),
        transversality_margin: s.min_margin.min(rate.abs()),
        crossings_seen: s.opposite + 1,
        energy_error: (sys.energy(&c.point) - sys.energy(p)).abs(),
    })
}

/// The first `count` wanted crossings along a single orbit from a section point.
pub fn crossing_sequence(
    sys: &HamiltonianSystem,
    sec: &SectionSpec,
    p: &[f64],
    count: usize,
    t_max: f64,
    tol: f64,
) -> Result<Vec<Crossing>, SectionError> {
    Ok(scan(sys, sec, p, false, t_max, tol, count, true)?.crossings)
}

/// First wanted crossing from an arbitrary point, forward or backward in time.
pub fn next_crossing(
    sys: &HamiltonianSystem,
    sec: &SectionSpec,
    p: &[f64],
    backward: bool,
    t_max: f64,
    tol: f64,
) -> Result<Crossing, SectionError> {
    let on = sec.offset(p).abs() < ON_SECTION_TOL;
    Ok(scan(sys, sec, p, backward, t_max, tol, 1, on)?.crossings.remove(0))
}

/// Matrix of the restricted form `i* w` on the section chart frame at `u`.
pub fn section_form_matrix(sys: &HamiltonianSystem, chart: &SectionChart, u: &[f64]) -> Vec<f64> {
    let k = chart.dim();
    let h = 1e-6;
    let p = chart.lift(u);
    let frame: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut a = u.to_vec();
            let mut b = u.to_vec();
            a[i] += h;
            b[i] -= h;
            let (pa, pb) = (chart.lift(&a), chart.lift(&b));
            sys.manifold.displacement(&pb, &pa).iter().map(|d| d / (2.0 * h)).collect()
        })
        .collect();
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            m[i * k + j] = sys.omega.evaluate_at(&p, &[&frame[i], &frame[j]]).unwrap_or(f64::NAN);
        }
    }
    m
}

/// Central-difference Jacobian of the return map in section coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnJacobian {
    pub dim: usize,
    /// Row-major `dim x dim`.
    pub matrix: Vec<f64>,
    pub determinant: f64,
    /// `max |D^T J(phi(p)) D - J(p)|` for the restricted form matrix `J`.
    pub symplectic_defect: f64,
    pub image: Vec<f64>,
}

pub fn return_map_jacobian(
    sys: &HamiltonianSystem,
    sec: &SectionSpec,
    p: &[f64],
    fd_step: f64,
    t_max: f64,
    tol: f64,
) -> Result<ReturnJacobian, SectionError> {
    let chart = sec.chart.as_ref().ok_or(SectionError::NoChart)?;
    let floor = 100.0 * tol;
    if fd_step < floor {
        return Err(SectionError::StepTooSmall { step: fd_step, floor });
    }
    let k = chart.dim();
    let u0 = chart.project(p);
    let image_at = |u: &[f64]| -> Result<Vec<f64>, SectionError> {
        Ok(chart.project(&first_return(sys, sec, &chart.lift(u), t_max, tol)?.image))
    };
    let base = first_return(sys, sec, &chart.lift(&u0), t_max, tol)?;
    let mut matrix = vec![0.0; k * k];
    for i in 0..k {
        let mut up = u0.clone();
        let mut dn = u0.clone();
        up[i] += fd_step;
        dn[i] -= fd_step;
        let d = chart.displacement(&image_at(&dn)?, &image_at(&up)?);
        for r in 0..k {
            matrix[r * k + i] = d[r] / (2.0 * fd_step);
        }
    }
    let determinant = linalg::det(&matrix, k);
    let j0 = section_form_matrix(sys, chart, &u0);
    let j1 = section_form_matrix(sys, chart, &chart.project(&base.image));
    let pulled = linalg::mat_mul(&linalg::mat_mul(&linalg::transpose(&matrix, k, k), &j1, k, k, k), &matrix, k, k, k);
    let symplectic_defect = linalg::max_abs(&pulled.iter().zip(&j0).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(ReturnJacobian { dim: k, matrix, determinant, symplectic_defect, image: base.image })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalFailure {
    pub index: usize,
    pub reason: String,
}

/// Outcome of [`verify_global`]; certified only over the sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalReport {
    pub samples: usize,
    pub passed: usize,
    pub failures: Vec<GlobalFailure>,
    pub min_margin: f64,
    pub min_return_time: f64,
    pub max_return_time: f64,
    pub max_energy_error: f64,
    pub warning: Option<String>,
}

impl GlobalReport {
    pub fn is_global(&self) -> bool {
        self.failures.is_empty()
    }
}

struct SampleOutcome {
    margin: f64,
    return_time: f64,
    energy_error: f64,
}

/// Check that every sample orbit meets the section in forward and backward time.
pub fn verify_global(
    sys: &HamiltonianSystem,
    sec: &SectionSpec,
    samples: &[Vec<f64>],
    t_max: f64,
    tol: f64,
    exec: Execution,
) -> GlobalReport {
    let outcomes = exec.map_range(samples.len(), |i| -> Result<SampleOutcome, String> {
        let p = &samples[i];
        let fwd = next_crossing(sys, sec, p, false, t_max, tol).map_err(|e| format!("forward: {e}"))?;
        let bwd = next_crossing(sys, sec, p, true, t_max, tol).map_err(|e| format!("backward: {e}"))?;
        let ret = first_return(sys, sec, &fwd.point, t_max, tol).map_err(|e| format!("return: {e}"))?;
        let h0 = sys.energy(p);
        let energy_error = [&fwd.point, &bwd.point, &ret.image]
            .iter()
            .map(|q| (sys.energy(q) - h0).abs())
            .fold(0.0, f64::max);
        Ok(SampleOutcome {
            margin: ret.transversality_margin.min(fwd.rate.abs()).min(bwd.rate.abs()),
            return_time: ret.return_time,
            energy_error,
        })
    });
    let mut report = GlobalReport {
        samples: samples.len(),
        passed: 0,
        failures: Vec::new(),
        min_margin: f64::INFINITY,
        min_return_time: f64::INFINITY,
        max_return_time: 0.0,
        max_energy_error: 0.0,
        warning: None,
    };
    for (index, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                report.passed += 1;
                report.min_margin = report.min_margin.min(o.margin);
                report.min_return_time = report.min_return_time.min(o.return_time);
                report.max_return_time = report.max_return_time.max(o.return_time);
                report.max_energy_error = report.max_energy_error.max(o.energy_error);
            }
            Err(reason) => report.failures.push(GlobalFailure { index, reason }),
        }
    }
    if samples.is_empty() {
        report.warning = Some("empty sample set: globality holds vacuously".into());
        report.min_margin = 0.0;
        report.min_return_time = 0.0;
    }
    report
}

/// Tabulated suspension chart `Psi(p, t) = Phi^{t T(p)}(p)` over a fiber grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingTorusChart {
    /// Fiber grid points (ambient coordinates).
    pub fiber: Vec<Vec<f64>>,
    pub return_times: Vec<f64>,
    /// Holonomy images `phi(p)` in ambient coordinates.
    pub holonomy: Vec<Vec<f64>>,
    /// Holonomy images in section coordinates.
    pub holonomy_coords: Vec<Vec<f64>>,
    pub t_grid: Vec<f64>,
    /// `table[i][j] = Psi(fiber[i], t_grid[j])`.
    pub table: Vec<Vec<Vec<f64>>>,
    /// `max |Psi(p, 1) - phi(p)|`, i.e. the gluing `(1, p) ~ (0, phi(p))`.
    pub gluing_residual: f64,
    /// `max |H(Psi(p, t)) - H(p)|` over the table.
    pub energy_residual: f64,
}

/// `Psi(p, t)` for a section point `p` with return time `return_time`.
pub fn psi(sys: &HamiltonianSystem, p: &[f64], t: f64, return_time: f64, tol: f64) -> Result<Vec<f64>, SectionError> {
    if t == 0.0 {
        return Ok(sys.manifold.reduced(p));
    }
    Ok(phase::flow(sys, p, t * return_time, tol)?.point)
}

pub fn mapping_torus_chart(
    sys: &HamiltonianSystem,
    sec: &SectionSpec,
    grid: &[Vec<f64>],
    t_samples: usize,
    t_max: f64,
    tol: f64,
    exec: Execution,
) -> Result<MappingTorusChart, SectionError> {
    let chart = sec.chart.as_ref().ok_or(SectionError::NoChart)?;
    let t_samples = t_samples.max(2);
    let t_grid: Vec<f64> = (0..t_samples).map(|j| j as f64 / (t_samples - 1) as f64).collect();
    let rows = exec.map(grid, |u| -> Result<TorusRow, SectionError> {
        let p = chart.lift(u);
        let rec = first_return(sys, sec, &p, t_max, tol)?;
        let column: Result<Vec<Vec<f64>>, SectionError> =
            t_grid.iter().map(|&t| psi(sys, &p, t, rec.return_time, tol)).collect();
        Ok((p, rec, column?))
    });
    let mut out = MappingTorusChart {
        fiber: Vec::new(),
        return_times: Vec::new(),
        holonomy: Vec::new(),
        holonomy_coords: Vec::new(),
        t_grid,
        table: Vec::new(),
        gluing_residual: 0.0,
        energy_residual: 0.0,
    };
    for row in rows {
        let (p, rec, column) = row?;
        let last = column.last().cloned().unwrap_or_default();
        out.gluing_residual = out.gluing_residual.max(sys.manifold.distance(&last, &rec.image));
        let h0 = sys.energy(&p);
        for q in &column {
            out.energy_residual = out.energy_residual.max((sys.energy(q) - h0).abs());
        }
        out.holonomy_coords.push(chart.project(&rec.image));
        out.holonomy.push(rec.image);
        out.return_times.push(rec.return_time);
        out.fiber.push(p);
        out.table.push(column);
    }
    let bound = (10.0 * tol).max(1e-12);
    if out.gluing_residual > bound {
        return Err(SectionError::Gluing { residual: out.gluing_residual, bound });
    }
    Ok(out)
}

/// One row of a crossings point cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingRow {
    pub orbit_id: usize,
    pub t: f64,
    pub coords: Vec<f64>,
    pub margin: f64,
}

/// Write `orbit_id,t,coord_0..coord_k,margin` rows with a header.
pub fn write_crossings_csv<W: Write>(writer: W, rows: &[CrossingRow]) -> csv::Result<()> {
    let width = rows.iter().map(|r| r.coords.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["orbit_id".to_string(), "t".to_string()];
    header.extend((0..width).map(|i| format!("coord_{i}")));
    header.push("margin".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.orbit_id.to_string(), format!("{:.17e}", r.t)];
        rec.extend(r.coords.iter().map(|c| format!("{c:.17e}")));
        rec.resize(width + 2, String::new());
        rec.push(format!("{:.17e}", r.margin));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
