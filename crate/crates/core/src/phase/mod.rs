//! Chart manifolds, Hamiltonian systems and their flows.
//!
//! Sign convention: the Hamiltonian vector field solves `i_{X_H} w = dH`
//! pointwise. With `w = dq ^ dp` this gives `q' = dH/dp`, `p' = -dH/dq`.
//! Texts using `i_{X_H} w = -dH` get the time-reversed field.

pub mod integrate;
mod volume;

use serde::Serialize;
use thiserror::Error;

use crate::forms::{ChartMap, FormError, KForm, DEFAULT_FD_STEP};
use crate::linalg;
use crate::par::Execution;

pub use integrate::{Dop853, IntegrateError, Step, StepOptions};
pub use volume::{convex_hull_area, volume_transport, VolumeReport};

/// Reciprocal condition estimate below which `w` counts as degenerate.
pub const MIN_RCOND: f64 = 1e-10;
/// Residual bound for `|i_X w - dH|_inf` relative to `max(1, |dH|_inf)`.
pub const SOLVE_RESIDUAL: f64 = 1e-10;
/// Sampled closedness bound for `w` and `d(lambda) - w`.
pub const CLOSED_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("symplectic form is degenerate at {point:?} (rcond = {rcond:e})")]
    Degenerate { point: Vec<f64>, rcond: f64 },
    #[error("Hamiltonian vector field solve residual {residual:e} too large")]
    Residual { residual: f64 },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error(transparent)]
    Form(#[from] FormError),
}

impl From<IntegrateError<PhaseError>> for PhaseError {
    fn from(e: IntegrateError<PhaseError>) -> Self {
        match e {
            IntegrateError::Field(inner) => inner,
            other => PhaseError::Integration(other.to_string()),
        }
    }
}

/// Flat coordinate model with optional periodic identifications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartManifold {
    dim: usize,
    periodic: Vec<bool>,
    periods: Vec<f64>,
}

impl ChartManifold {
    pub fn new(periodic: Vec<bool>, periods: Vec<f64>) -> Result<Self, PhaseError> {
        if periodic.is_empty() {
            return Err(PhaseError::InvalidChart("dimension must be at least 1".into()));
        }
        if periodic.len() != periods.len() {
            return Err(PhaseError::InvalidChart("periodic mask and periods differ in length".into()));
        }
        if let Some(p) = periods.iter().zip(&periodic).find(|(p, &per)| per && !(**p > 0.0 && p.is_finite())) {
            return Err(PhaseError::InvalidChart(format!("period {} is not positive", p.0)));
        }
        Ok(Self { dim: periodic.len(), periodic, periods })
    }

    /// `R^dim`.
    pub fn euclidean(dim: usize) -> Self {
        Self { dim, periodic: vec![false; dim], periods: vec![std::f64::consts::TAU; dim] }
    }

    /// `T^dim` with period `2 pi` in every coordinate.
    pub fn torus(dim: usize) -> Self {
        Self::torus_with_period(dim, std::f64::consts::TAU)
    }

    pub fn torus_with_period(dim: usize, period: f64) -> Self {
        Self { dim, periodic: vec![true; dim], periods: vec![period; dim] }
    }

    /// Product chart `self x other`.
    pub fn product(&self, other: &ChartManifold) -> Self {
        let mut periodic = self.periodic.clone();
        periodic.extend(&other.periodic);
        let mut periods = self.periods.clone();
        periods.extend(&other.periods);
        Self { dim: self.dim + other.dim, periodic, periods }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_periodic(&self, i: usize) -> bool {
        self.periodic[i]
    }

    pub fn period(&self, i: usize) -> Option<f64> {
        self.periodic[i].then(|| self.periods[i])
    }

    pub fn periods(&self) -> Vec<Option<f64>> {
        (0..self.dim).map(|i| self.period(i)).collect()
    }

    pub fn is_torus(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    /// Reduce periodic coordinates into `[0, period)`.
    pub fn reduce(&self, x: &mut [f64]) {
        for ((xi, &periodic), &period) in x.iter_mut().zip(&self.periodic).zip(&self.periods) {
            if periodic {
                *xi = xi.rem_euclid(period);
                if *xi >= period {
                    *xi = 0.0;
                }
            }
        }
    }

    pub fn reduced(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.reduce(&mut y);
        y
    }

    /// `b - a` with periodic components wrapped into `[-P/2, P/2)`.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let d = b[i] - a[i];
                if self.periodic[i] {
                    wrap_symmetric(d, self.periods[i])
                } else {
                    d
                }
            })
            .collect()
    }

    /// Sup-norm distance respecting periodic identifications.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        linalg::max_abs(&self.displacement(a, b))
    }
}

/// Wrap `d` into `[-P/2, P/2)`.
pub fn wrap_symmetric(d: f64, period: f64) -> f64 {
    (d + 0.5 * period).rem_euclid(period) - 0.5 * period
}

/// Declared topological metadata of a catalog ambient manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Topology {
    pub compact: bool,
    pub simply_connected: bool,
    /// Chart models a cotangent bundle with its canonical form.
    pub cotangent: bool,
}

/// Chart manifold with symplectic form and Hamiltonian.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    pub name: String,
    pub manifold: ChartManifold,
    pub omega: KForm,
    pub hamiltonian: KForm,
    pub primitive: Option<KForm>,
    pub topology: Topology,
}

/// Sampled structural checks of a [`HamiltonianSystem`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemCheck {
    pub samples: usize,
    pub max_closedness: f64,
    pub min_rcond: f64,
    pub max_primitive_residual: Option<f64>,
    pub pass: bool,
}

impl HamiltonianSystem {
    pub fn new(
        name: impl Into<String>,
        manifold: ChartManifold,
        omega: KForm,
        hamiltonian: KForm,
    ) -> Result<Self, PhaseError> {
        let dim = manifold.dim();
        if !dim.is_multiple_of(2) {
            return Err(PhaseError::InvalidSystem(format!("odd dimension {dim}")));
        }
        if omega.degree() != 2 || omega.dim() != dim {
            return Err(PhaseError::InvalidSystem("omega must be a 2-form on the chart".into()));
        }
        if hamiltonian.degree() != 0 || hamiltonian.dim() != dim {
            return Err(PhaseError::InvalidSystem("Hamiltonian must be a 0-form on the chart".into()));
        }
        Ok(Self {
            name: name.into(),
            manifold,
            omega,
            hamiltonian,
            primitive: None,
            topology: Topology::default(),
        })
    }

    pub fn with_primitive(mut self, lambda: KForm) -> Result<Self, PhaseError> {
        if lambda.degree() != 1 || lambda.dim() != self.dim() {
            return Err(PhaseError::InvalidSystem("primitive must be a 1-form on the chart".into()));
        }
        self.primitive = Some(lambda);
        Ok(self)
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn energy(&self, p: &[f64]) -> f64 {
        self.hamiltonian.value(p)
    }

    pub fn energy_gradient(&self, p: &[f64]) -> Vec<f64> {
        self.hamiltonian.gradient(p)
    }

    /// Solve `i_X w = alpha` at `p` for `X`, where `alpha` is a covector.
    pub fn solve_dual(&self, p: &[f64], alpha: &[f64]) -> Result<Vec<f64>, PhaseError> {
        let n = self.dim();
        // (i_X w)_j = sum_i X_i W_ij, i.e. W^T X = alpha
        let wt = linalg::transpose(&self.omega.matrix(p), n, n);
        let solve = linalg::solve(&wt, n, alpha)
            .ok_or_else(|| PhaseError::Degenerate { point: p.to_vec(), rcond: 0.0 })?;
        if solve.rcond < MIN_RCOND {
            return Err(PhaseError::Degenerate { point: p.to_vec(), rcond: solve.rcond });
        }
        let back = linalg::mat_vec(&wt, n, n, &solve.x);
        let residual = linalg::max_abs(&back.iter().zip(alpha).map(|(a, b)| a - b).collect::<Vec<_>>());
        if residual > SOLVE_RESIDUAL * linalg::max_abs(alpha).max(1.0) {
            return Err(PhaseError::Residual { residual });
        }
        Ok(solve.x)
    }

    /// Components of `X_H` at `p`.
    pub fn vector_field(&self, p: &[f64]) -> Result<Vec<f64>, PhaseError> {
        self.solve_dual(p, &self.energy_gradient(p))
    }

    pub fn hamiltonian_vector_field(&self, p: &[f64]) -> Result<crate::forms::TangentVector, PhaseError> {
        Ok(crate::forms::TangentVector::new(p.to_vec(), self.vector_field(p)?))
    }

    /// `|i_X w - dH|_inf` at `p` for the computed field.
    pub fn solve_residual(&self, p: &[f64]) -> Result<f64, PhaseError> {
        let n = self.dim();
        let x = self.vector_field(p)?;
        let w = self.omega.matrix(p);
        let grad = self.energy_gradient(p);
        let r: Vec<f64> = (0..n).map(|j| (0..n).map(|i| x[i] * w[i * n + j]).sum::<f64>() - grad[j]).collect();
        Ok(linalg::max_abs(&r))
    }

    /// Reciprocal condition estimate of the `w` coefficient matrix at `p`.
    pub fn rcond(&self, p: &[f64]) -> f64 {
        let n = self.dim();
        linalg::solve(&self.omega.matrix(p), n, &vec![0.0; n]).map_or(0.0, |s| s.rcond)
    }

    /// Closedness, nondegeneracy and primitive consistency at the given points.
    pub fn validate(&self, samples: &[Vec<f64>]) -> Result<SystemCheck, PhaseError> {
        // on a surface every 2-form is closed
        let dw = if self.dim() > 2 { Some(self.omega.exterior_derivative(DEFAULT_FD_STEP)?) } else { None };
        let residual = match &self.primitive {
            Some(l) => Some(l.exterior_derivative(DEFAULT_FD_STEP)?.sub(&self.omega)?),
            None => None,
        };
        let mut max_closedness = 0.0f64;
        let mut min_rcond = f64::INFINITY;
        let mut max_res: Option<f64> = residual.as_ref().map(|_| 0.0);
        for p in samples {
            if let Some(dw) = &dw {
                max_closedness = max_closedness.max(linalg::max_abs(&dw.coefficients(p)));
            }
            min_rcond = min_rcond.min(self.rcond(p));
            if let (Some(r), Some(m)) = (&residual, max_res.as_mut()) {
                *m = m.max(linalg::max_abs(&r.coefficients(p)));
            }
        }
        let pass = max_closedness < CLOSED_TOL
            && min_rcond >= MIN_RCOND
            && max_res.is_none_or(|r| r < CLOSED_TOL);
        Ok(SystemCheck { samples: samples.len(), max_closedness, min_rcond, max_primitive_residual: max_res, pass })
    }

    /// Vector field closure for the integrators, optionally time-reversed.
    pub fn rhs(&self, backward: bool) -> impl Fn(&[f64]) -> Result<Vec<f64>, PhaseError> + '_ {
        move |y| {
            let v = self.vector_field(y)?;
            Ok(if backward { v.into_iter().map(|x| -x).collect() } else { v })
        }
    }
}

/// Output of [`flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub point: Vec<f64>,
    /// `|H(result) - H(p0)|`.
    pub energy_error: f64,
}

/// Time-`t` flow of `X_H` (negative `t` flows backward), periodic coordinates reduced.
pub fn flow(sys: &HamiltonianSystem, p0: &[f64], t: f64, tol: f64) -> Result<FlowResult, PhaseError> {
    let y = flow_unreduced(sys, p0, t, tol)?;
    let energy_error = (sys.energy(&y) - sys.energy(p0)).abs();
    Ok(FlowResult { point: sys.manifold.reduced(&y), energy_error })
}

/// Like [`flow`] but leaves periodic coordinates unreduced.
pub fn flow_unreduced(sys: &HamiltonianSystem, p0: &[f64], t: f64, tol: f64) -> Result<Vec<f64>, PhaseError> {
    if !(tol > 0.0) {
        return Err(PhaseError::Integration(format!("tolerance must be positive, got {tol}")));
    }
    if t == 0.0 {
        return Ok(p0.to_vec());
    }
    let y = integrate::integrate(sys.rhs(t < 0.0), p0, t.abs(), StepOptions::with_tol(tol))?;
    Ok(y)
}

/// Fixed-step implicit midpoint flow for long-time runs.
pub fn flow_midpoint(sys: &HamiltonianSystem, p0: &[f64], h: f64, steps: usize) -> Result<Vec<f64>, PhaseError> {
    let y = integrate::implicit_midpoint(sys.rhs(false), p0, h, steps)?;
    Ok(sys.manifold.reduced(&y))
}

/// Maximum of `|H(Phi^t(p0)) - H(p0)|` over `samples` equally spaced times in `(0, t_max]`.
pub fn energy_drift(
    sys: &HamiltonianSystem,
    p0: &[f64],
    t_max: f64,
    samples: usize,
    tol: f64,
) -> Result<f64, PhaseError> {
    if !(t_max > 0.0) {
        return Err(PhaseError::Integration(format!("t_max must be positive, got {t_max}")));
    }
    let h0 = sys.energy(p0);
    let mut stepper = Dop853::new(sys.rhs(false), p0, StepOptions::with_tol(tol))?;
    let samples = samples.max(1);
    let mut drift = 0.0f64;
    for k in 1..=samples {
        stepper.advance_to(t_max * k as f64 / samples as f64)?;
        drift = drift.max((sys.energy(stepper.y()) - h0).abs());
    }
    Ok(drift)
}

/// Central-difference divergence of `X_H` at `p`.
pub fn divergence(sys: &HamiltonianSystem, p: &[f64], h: f64) -> Result<f64, PhaseError> {
    let mut div = 0.0;
    for i in 0..sys.dim() {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[i] += h;
        minus[i] -= h;
        div += (sys.vector_field(&plus)?[i] - sys.vector_field(&minus)?[i]) / (2.0 * h);
    }
    Ok(div)
}

/// `max |flow(flow(p, s), t) - flow(p, s + t)|` over a batch of start points.
pub fn composition_residual(
    sys: &HamiltonianSystem,
    points: &[Vec<f64>],
    s: f64,
    t: f64,
    tol: f64,
    exec: Execution,
) -> Result<f64, PhaseError> {
    let residuals = exec.map(points, |p| -> Result<f64, PhaseError> {
        let a = flow_unreduced(sys, &flow_unreduced(sys, p, s, tol)?, t, tol)?;
        let b = flow_unreduced(sys, p, s + t, tol)?;
        Ok(sys.manifold.distance(&a, &b))
    });
    residuals.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
}

/// Regular level set `Z = H^{-1}(c)` with a chart for it.
///
/// `embedding` maps Z-chart coordinates into the ambient chart and
/// `projection` retracts a collar of Z back onto the Z chart; their
/// composition is the identity on the Z chart.
#[derive(Debug, Clone)]
pub struct EnergySurface {
    pub level: f64,
    pub manifold: ChartManifold,
    pub embedding: ChartMap,
    pub projection: ChartMap,
}

impl EnergySurface {
    pub fn new(level: f64, manifold: ChartManifold, embedding: ChartMap, projection: ChartMap) -> Result<Self, PhaseError> {
        let d = manifold.dim();
        if embedding.source_dim != d || projection.target_dim != d || embedding.target_dim != projection.source_dim {
            return Err(PhaseError::InvalidChart("embedding/projection dimensions inconsistent".into()));
        }
        if embedding.target_dim != d + 1 {
            return Err(PhaseError::InvalidChart("energy surface must be a hypersurface".into()));
        }
        Ok(Self { level, manifold, embedding, projection })
    }

    /// Coordinate hyperplane `{x_k = value}` of an ambient chart.
    pub fn coordinate_slice(ambient: &ChartManifold, k: usize, value: f64, level: f64) -> Result<Self, PhaseError> {
        let n = ambient.dim();
        if k >= n {
            return Err(PhaseError::InvalidChart(format!("slice coordinate {k} out of range")));
        }
        let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        let mut periodic = Vec::new();
        let mut periods = Vec::new();
        for &i in &keep {
            periodic.push(ambient.is_periodic(i));
            periods.push(ambient.period(i).unwrap_or(std::f64::consts::TAU));
        }
        let manifold = ChartManifold::new(periodic, periods)?;
        let mut emb = vec![0.0; n * (n - 1)];
        let mut offset = vec![0.0; n];
        offset[k] = value;
        for (c, &i) in keep.iter().enumerate() {
            emb[i * (n - 1) + c] = 1.0;
        }
        let embedding = ChartMap::affine(n - 1, n, emb, offset);
        let projection = ChartMap::projection(n, &keep);
        Self::new(level, manifold, embedding, projection)
    }

    pub fn embed(&self, z: &[f64]) -> Vec<f64> {
        self.embedding.apply(z)
    }

    /// Minimum `|dH|_inf` and maximum `|H - c|` over Z-chart samples.
    pub fn regularity(&self, sys: &HamiltonianSystem, samples: &[Vec<f64>]) -> (f64, f64) {
        samples.iter().fold((f64::INFINITY, 0.0f64), |(g, e), z| {
            let p = self.embed(z);
            (g.min(linalg::max_abs(&sys.energy_gradient(&p))), e.max((sys.energy(&p) - self.level).abs()))
        })
    }
}
