//! Rational approximation of a closed 1-form on a flat torus, turning its
//! kernel foliation into a fibration with compact leaves.
//!
//! Periods are normalized by `1/(2 pi)`: a closed form with normalized period
//! vector `v` has cohomology class `sum v_i [f_i^* d theta]`, where
//! `f_i = 2 pi x_i / P_i` is the i-th circle coordinate. Rational periods
//! `n_i / d` make `alpha'` a rational sum of such pullbacks.

use std::f64::consts::TAU;

use serde::Serialize;
use thiserror::Error;

use crate::cosym::chart_samples;
use crate::forms::{KForm, DEFAULT_FD_STEP};
use crate::linalg;
use crate::par::Execution;
use crate::phase::{ChartManifold, EnergySurface, HamiltonianSystem, PhaseError, CLOSED_TOL};
use crate::quad;
use crate::section::{SectionChart, SectionSpec};

/// Absolute error target for the period line integrals.
pub const PERIOD_QUAD_TOL: f64 = 1e-10;
pub const DEFAULT_D_CAP: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TischlerError {
    #[error("form is not closed (sampled |d alpha| = {residual:e})")]
    NotClosed { residual: f64 },
    #[error("periods need a torus chart (all coordinates periodic)")]
    NotTorus,
    #[error("expected a 1-form on a {expected}-dimensional chart")]
    Shape { expected: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("no denominator up to {d_cap} reaches eps = {eps:e} (best error {best:e})")]
    CapExhausted { d_cap: u64, eps: f64, best: f64 },
    #[error("all integer data vanish; no fibration")]
    AllZero,
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Normalized periods `(1/2 pi) * loop integral of alpha` per coordinate loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodVector {
    pub values: Vec<f64>,
    /// Description of the loop for each entry.
    pub cycles: Vec<String>,
    /// Quadrature error estimates (normalized units).
    pub errors: Vec<f64>,
}

pub fn periods(alpha: &KForm, manifold: &ChartManifold, base: Option<&[f64]>) -> Result<PeriodVector, TischlerError> {
    let n = manifold.dim();
    if alpha.degree() != 1 || alpha.dim() != n {
        return Err(TischlerError::Shape { expected: n });
    }
    if !manifold.is_torus() {
        return Err(TischlerError::NotTorus);
    }
    let d = alpha.exterior_derivative(DEFAULT_FD_STEP).map_err(PhaseError::from)?;
    let residual = chart_samples(manifold, 32, 0)
        .iter()
        .map(|p| linalg::max_abs(&d.coefficients(p)))
        .fold(0.0, f64::max);
    if residual >= CLOSED_TOL {
        return Err(TischlerError::NotClosed { residual });
    }
    let base = base.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut out = PeriodVector { values: Vec::new(), cycles: Vec::new(), errors: Vec::new() };
    for k in 0..n {
        let period = manifold.period(k).ok_or(TischlerError::NotTorus)?;
        let r = quad::integrate(
            |s| {
                let mut p = base.clone();
                p[k] += s;
                alpha.coefficients(&p)[k]
            },
            0.0,
            period,
            PERIOD_QUAD_TOL * TAU,
        );
        out.values.push(r.value / TAU);
        out.errors.push(r.error / TAU);
        out.cycles.push(format!("x{k} in [0, {period})"));
    }
    Ok(out)
}

/// Common-denominator approximation `v_i ~ n_i / d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalApproximation {
    pub d: u64,
    pub n: Vec<i64>,
    /// `max_i |v_i - n_i/d|`.
    pub error: f64,
}

fn approx_at(values: &[f64], d: u64) -> (Vec<i64>, f64) {
    let df = d as f64;
    let n: Vec<i64> = values.iter().map(|v| (v * df).round() as i64).collect();
    let err = values.iter().zip(&n).map(|(v, &k)| (v - k as f64 / df).abs()).fold(0.0, f64::max);
    (n, err)
}

/// Smallest `d <= d_cap` with `max_i |v_i - round(d v_i)/d| <= eps`.
pub fn rationalize(pv: &PeriodVector, eps: f64, d_cap: u64, exec: Execution) -> Result<RationalApproximation, TischlerError> {
    if !(eps > 0.0) {
        return Err(TischlerError::InvalidEpsilon(eps));
    }
    let found = exec.find_first(1..=d_cap.max(1), |d| approx_at(&pv.values, d).1 <= eps);
    match found {
        Some(d) => {
            let (n, error) = approx_at(&pv.values, d);
            Ok(RationalApproximation { d, n, error })
        }
        None => {
            let best = (1..=d_cap.max(1)).map(|d| approx_at(&pv.values, d).1).fold(f64::INFINITY, f64::min);
            Err(TischlerError::CapExhausted { d_cap, eps, best })
        }
    }
}

/// `alpha'` together with its distance to `alpha`.
#[derive(Debug, Clone)]
pub struct Approximation {
    pub form: KForm,
    /// Sup over the chart of the coefficient-vector infinity norm of `alpha - alpha'`.
    pub sup_distance: f64,
}

/// Shift the harmonic part of `alpha` to the rational periods, keeping the
/// exact part.
pub fn build_approximation(
    alpha: &KForm,
    manifold: &ChartManifold,
    pv: &PeriodVector,
    ra: &RationalApproximation,
) -> Result<Approximation, TischlerError> {
    let n = manifold.dim();
    if pv.values.len() != n || ra.n.len() != n {
        return Err(TischlerError::Shape { expected: n });
    }
    let shift: Vec<f64> = (0..n)
        .map(|i| {
            let period = manifold.period(i).unwrap_or(TAU);
            (ra.n[i] as f64 / ra.d as f64 - pv.values[i]) * TAU / period
        })
        .collect();
    let sup_distance = linalg::max_abs(&shift);
    let correction = KForm::constant(n, 1, shift).map_err(PhaseError::from)?;
    let form = alpha.add(&correction).map_err(PhaseError::from)?;
    Ok(Approximation { form, sup_distance })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransversalityReport {
    pub samples: usize,
    /// `min |alpha(X_H)|` for the original form.
    pub original_margin: f64,
    /// `min |alpha'(X_H)|`.
    pub approx_margin: f64,
    pub margin_loss: f64,
    pub pass: bool,
}

/// Compare `|alpha(X_H)|` and `|alpha'(X_H)|` on `Z`. `alpha` and `alpha'`
/// live on the chart of `Z`; `X_H` is pushed there by the surface projection.
pub fn check_transversality_preserved(
    sys: &HamiltonianSystem,
    surface: &EnergySurface,
    alpha: &KForm,
    alpha_prime: &KForm,
    samples: &[Vec<f64>],
) -> Result<TransversalityReport, TischlerError> {
    let mut report = TransversalityReport {
        samples: samples.len(),
        original_margin: f64::INFINITY,
        approx_margin: f64::INFINITY,
        margin_loss: 0.0,
        pass: false,
    };
    for z in samples {
        let p = surface.embed(z);
        let x = surface.projection.push_forward(&p, &sys.vector_field(&p)?);
        let a: f64 = alpha.coefficients(z).iter().zip(&x).map(|(c, v)| c * v).sum();
        let b: f64 = alpha_prime.coefficients(z).iter().zip(&x).map(|(c, v)| c * v).sum();
        report.original_margin = report.original_margin.min(a.abs());
        report.approx_margin = report.approx_margin.min(b.abs());
    }
    report.margin_loss = report.original_margin - report.approx_margin;
    report.pass = !samples.is_empty() && report.approx_margin > crate::section::TANGENCY_MARGIN;
    Ok(report)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Leaf `F = 0` of the circle map `F = sum m_i 2 pi x_i / P_i` with
/// `m = n / gcd(n)`, so the level set is connected. When some `|m_j| = 1` the
/// leaf is charted by the other coordinates.
pub fn extract_leaf(ra: &RationalApproximation, manifold: &ChartManifold) -> Result<SectionSpec, TischlerError> {
    let dim = manifold.dim();
    if ra.n.len() != dim {
        return Err(TischlerError::Shape { expected: dim });
    }
    if !manifold.is_torus() {
        return Err(TischlerError::NotTorus);
    }
    let g = ra.n.iter().fold(0u64, |acc, &k| gcd(acc, k.unsigned_abs()));
    if g == 0 {
        return Err(TischlerError::AllZero);
    }
    let periods: Vec<f64> = (0..dim).map(|i| manifold.period(i).unwrap_or(TAU)).collect();
    let coeffs: Vec<f64> = (0..dim).map(|i| (ra.n[i] / g as i64) as f64 * TAU / periods[i]).collect();
    let (cv, cg) = (coeffs.clone(), coeffs.clone());
    let theta = KForm::scalar(dim, move |p| cv.iter().zip(p).map(|(c, x)| c * x).sum(), move |_| cg.clone());
    let mut section = SectionSpec::new(theta, 0.0).map_err(|e| PhaseError::InvalidChart(e.to_string()))?;
    if let Some(j) = (0..dim).find(|&i| (ra.n[i] / g as i64).abs() == 1) {
        let rest: Vec<usize> = (0..dim).filter(|&i| i != j).collect();
        let chart_periods = rest.iter().map(|&i| Some(periods[i])).collect();
        let (lift_rest, proj_rest, c, pj) = (rest.clone(), rest, coeffs, periods[j]);
        section = section.with_chart(SectionChart::new(
            chart_periods,
            move |u| {
                let mut p = vec![0.0; dim];
                let mut s = 0.0;
                for (k, &i) in lift_rest.iter().enumerate() {
                    p[i] = u[k];
                    s += c[i] * u[k];
                }
                p[j] = (-s / c[j]).rem_euclid(pj);
                p
            },
            move |p| proj_rest.iter().map(|&i| p[i]).collect(),
        ));
    }
    Ok(section)
}
