//! Cosymplectic structures `(alpha, beta)` and their correspondence with
//! symplectic vector fields transverse to an energy surface.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::forms::{ChartMap, FormError, KForm, VectorField, DEFAULT_FD_STEP};
use crate::linalg;
use crate::phase::{ChartManifold, EnergySurface, HamiltonianSystem, PhaseError, Topology, CLOSED_TOL};
use crate::quad;

/// `alpha ^ beta^{n-1}` on the coordinate frame must exceed this.
pub const VOLUME_MARGIN: f64 = 1e-8;
/// Minimum `|dH(X)|` for a field to count as transverse.
pub const TRANSVERSE_MARGIN: f64 = 1e-8;
/// Periods of a closed 1-form below this count as zero.
pub const PERIOD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CosymError {
    #[error("cosymplectic manifolds are odd-dimensional, got dimension {0}")]
    EvenDimension(usize),
    #[error("product construction needs dimension at least 3, got {0}")]
    TooSmall(usize),
    #[error("no sample points given")]
    EmptySamples,
    #[error("structure failed verification: {0}")]
    Verification(String),
    #[error("field is tangent to the surface at sample {index} (|dH(X)| = {value:e})")]
    Tangency { index: usize, value: f64 },
    #[error("field is not symplectic: |d(i_X w)| = {residual:e}")]
    NotSymplectic { residual: f64 },
    #[error("one-form vanishes at sample {index}; not a cosymplectic one-form")]
    DegenerateAlpha { index: usize },
    #[error("submanifold patch must be even-dimensional, got {0}")]
    OddPatch(usize),
    #[error("i_X w has period {period:e} around coordinate loop {coordinate}; no global primitive")]
    PathDependent { coordinate: usize, period: f64 },
    #[error("primitive gradient residual {residual:e} exceeds tolerance")]
    Gradient { residual: f64 },
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Closed `alpha` (degree 1) and `beta` (degree 2) on an odd-dimensional chart.
#[derive(Debug, Clone)]
pub struct CosymplecticStructure {
    pub name: String,
    pub manifold: ChartManifold,
    pub alpha: KForm,
    pub beta: KForm,
}

impl CosymplecticStructure {
    pub fn new(name: impl Into<String>, manifold: ChartManifold, alpha: KForm, beta: KForm) -> Result<Self, CosymError> {
        let d = manifold.dim();
        if d.is_multiple_of(2) {
            return Err(CosymError::EvenDimension(d));
        }
        if alpha.degree() != 1 || beta.degree() != 2 && d >= 2 || alpha.dim() != d || beta.dim() != d {
            return Err(CosymError::Verification("alpha must be a 1-form and beta a 2-form on the chart".into()));
        }
        Ok(Self { name: name.into(), manifold, alpha, beta })
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    /// `n` with `dim = 2n - 1`.
    pub fn n(&self) -> usize {
        self.dim().div_ceil(2)
    }

    /// The top form `alpha ^ beta^{n-1}`.
    pub fn volume_form(&self) -> Result<KForm, CosymError> {
        Ok(self.alpha.wedge(&self.beta.power(self.n() - 1)?)?)
    }
}

/// Sampled verification of a cosymplectic structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CosymReport {
    pub samples: usize,
    pub max_d_alpha: f64,
    pub max_d_beta: f64,
    /// Minimum `|alpha ^ beta^{n-1}|` on the coordinate frame.
    pub volume_margin: f64,
    pub worst_sample: usize,
    pub pass: bool,
}

pub fn verify_cosymplectic(cs: &CosymplecticStructure, samples: &[Vec<f64>]) -> Result<CosymReport, CosymError> {
    if cs.dim().is_multiple_of(2) {
        return Err(CosymError::EvenDimension(cs.dim()));
    }
    if samples.is_empty() {
        return Err(CosymError::EmptySamples);
    }
    let d_alpha = cs.alpha.exterior_derivative(DEFAULT_FD_STEP)?;
    // beta is top degree on a 1-manifold; nothing to check there
    let d_beta = if cs.dim() > 2 { Some(cs.beta.exterior_derivative(DEFAULT_FD_STEP)?) } else { None };
    let vol = cs.volume_form()?;
    let mut report = CosymReport {
        samples: samples.len(),
        max_d_alpha: 0.0,
        max_d_beta: 0.0,
        volume_margin: f64::INFINITY,
        worst_sample: 0,
        pass: false,
    };
    for (i, p) in samples.iter().enumerate() {
        report.max_d_alpha = report.max_d_alpha.max(linalg::max_abs(&d_alpha.coefficients(p)));
        if let Some(db) = &d_beta {
            report.max_d_beta = report.max_d_beta.max(linalg::max_abs(&db.coefficients(p)));
        }
        let v = vol.coefficients(p)[0].abs();
        if v < report.volume_margin {
            report.volume_margin = v;
            report.worst_sample = i;
        }
    }
    report.pass = report.max_d_alpha < CLOSED_TOL && report.max_d_beta < CLOSED_TOL && report.volume_margin > VOLUME_MARGIN;
    Ok(report)
}

/// Deterministic sample points on a chart: periodic coordinates over one
/// period, the others over `[-1, 1]`.
pub fn chart_samples(manifold: &ChartManifold, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..manifold.dim())
                .map(|i| match manifold.period(i) {
                    Some(p) => rng.random_range(0.0..p),
                    None => rng.random_range(-1.0..1.0),
                })
                .collect()
        })
        .collect()
}

/// `alpha = i*(i_X w)`, `beta = i* w` on the chart of `Z`.
pub fn field_to_cosym(
    sys: &HamiltonianSystem,
    z: &EnergySurface,
    field: &VectorField,
    samples: &[Vec<f64>],
) -> Result<CosymplecticStructure, CosymError> {
    if samples.is_empty() {
        return Err(CosymError::EmptySamples);
    }
    let contracted = sys.omega.interior(field)?;
    let d_contracted = contracted.exterior_derivative(DEFAULT_FD_STEP)?;
    let mut residual = 0.0f64;
    for (index, zp) in samples.iter().enumerate() {
        let p = z.embed(zp);
        let value = dot(&sys.energy_gradient(&p), &field(&p));
        if value.abs() < TRANSVERSE_MARGIN {
            return Err(CosymError::Tangency { index, value });
        }
        residual = residual.max(linalg::max_abs(&d_contracted.coefficients(&p)));
    }
    if residual >= CLOSED_TOL {
        return Err(CosymError::NotSymplectic { residual });
    }
    let alpha = contracted.pullback(&z.embedding)?;
    let beta = sys.omega.pullback(&z.embedding)?;
    let cs = CosymplecticStructure::new(format!("{} level {}", sys.name, z.level), z.manifold.clone(), alpha, beta)?;
    let report = verify_cosymplectic(&cs, samples)?;
    if !report.pass {
        return Err(CosymError::Verification(format!(
            "induced pair has volume margin {:e}",
            report.volume_margin
        )));
    }
    Ok(cs)
}

/// Field solving `i_X w = pi* alpha`, with `alpha` extended constantly off `Z`
/// along the projection. Points where the solve fails map to NaN.
pub fn transverse_field(sys: &HamiltonianSystem, z: &EnergySurface, cs: &CosymplecticStructure) -> Result<VectorField, CosymError> {
    let extended = cs.alpha.pullback(&z.projection)?;
    let sys = sys.clone();
    Ok(Arc::new(move |p: &[f64]| {
        sys.solve_dual(p, &extended.coefficients(p)).unwrap_or_else(|_| vec![f64::NAN; p.len()])
    }))
}

/// Outcome of [`cosym_to_field`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransverseFieldReport {
    pub points: Vec<Vec<f64>>,
    pub fields: Vec<Vec<f64>>,
    /// Maximum sampled `|d(i_X w)|`.
    pub symplectic_residual: f64,
    /// Minimum `|dH(X)|` over the samples.
    pub min_transversality: f64,
    pub pass: bool,
}

/// Solve `i_X w = alpha` at the embedded Z samples.
pub fn cosym_to_field(
    sys: &HamiltonianSystem,
    z: &EnergySurface,
    cs: &CosymplecticStructure,
    samples: &[Vec<f64>],
) -> Result<TransverseFieldReport, CosymError> {
    if samples.is_empty() {
        return Err(CosymError::EmptySamples);
    }
    let extended = cs.alpha.pullback(&z.projection)?;
    let mut report = TransverseFieldReport {
        points: Vec::new(),
        fields: Vec::new(),
        symplectic_residual: 0.0,
        min_transversality: f64::INFINITY,
        pass: false,
    };
    for (index, zp) in samples.iter().enumerate() {
        let p = z.embed(zp);
        let a = extended.coefficients(&p);
        if linalg::max_abs(&a) < 1e-12 {
            return Err(CosymError::DegenerateAlpha { index });
        }
        let x = sys.solve_dual(&p, &a)?;
        report.min_transversality = report.min_transversality.min(dot(&sys.energy_gradient(&p), &x).abs());
        report.points.push(p);
        report.fields.push(x);
    }
    let field = transverse_field(sys, z, cs)?;
    let d_contracted = sys.omega.interior(&field)?.exterior_derivative(DEFAULT_FD_STEP)?;
    for p in &report.points {
        report.symplectic_residual = report.symplectic_residual.max(linalg::max_abs(&d_contracted.coefficients(p)));
    }
    report.pass = report.symplectic_residual < CLOSED_TOL && report.min_transversality > TRANSVERSE_MARGIN;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmanifoldReport {
    pub samples: usize,
    /// Minimum `|det|` of the matrix of `i* w` on the parametrization frame.
    pub min_abs_det: f64,
    pub worst_sample: usize,
    pub margin: f64,
    pub pass: bool,
}

/// Nondegeneracy of `w` restricted to a parametrized patch.
pub fn symplectic_submanifold_test(
    sys: &HamiltonianSystem,
    patch: &ChartMap,
    samples: &[Vec<f64>],
    margin: f64,
) -> Result<SubmanifoldReport, CosymError> {
    let k = patch.source_dim;
    if !k.is_multiple_of(2) {
        return Err(CosymError::OddPatch(k));
    }
    if patch.target_dim != sys.dim() {
        return Err(FormError::DimensionMismatch { expected: sys.dim(), got: patch.target_dim }.into());
    }
    if samples.is_empty() {
        return Err(CosymError::EmptySamples);
    }
    let mut report = SubmanifoldReport { samples: samples.len(), min_abs_det: f64::INFINITY, worst_sample: 0, margin, pass: false };
    if k == 0 {
        // points: the empty determinant is 1
        report.min_abs_det = 1.0;
        report.pass = 1.0 > margin;
        return Ok(report);
    }
    let restricted = sys.omega.pullback(patch)?;
    for (i, u) in samples.iter().enumerate() {
        let d = linalg::det(&restricted.matrix(u), k).abs();
        if d < report.min_abs_det {
            report.min_abs_det = d;
            report.worst_sample = i;
        }
    }
    report.pass = report.min_abs_det > margin;
    Ok(report)
}

/// `M = N x S^1` with `w = pi* beta + pi* alpha ^ d theta` and `H = sin theta`.
pub fn build_product_system(cs: &CosymplecticStructure) -> Result<HamiltonianSystem, CosymError> {
    let n = cs.dim();
    if n < 3 {
        return Err(CosymError::TooSmall(n));
    }
    let report = verify_cosymplectic(cs, &chart_samples(&cs.manifold, 64, 0))?;
    if !report.pass {
        return Err(CosymError::Verification(format!(
            "seed {} has volume margin {:e}, closedness ({:e}, {:e})",
            cs.name, report.volume_margin, report.max_d_alpha, report.max_d_beta
        )));
    }
    let manifold = cs.manifold.product(&ChartManifold::torus(1));
    let omega = collar_omega(cs)?;
    let hamiltonian = KForm::scalar(
        n + 1,
        move |p| p[n].sin(),
        move |p| {
            let mut g = vec![0.0; n + 1];
            g[n] = p[n].cos();
            g
        },
    );
    let topology = Topology { compact: cs.manifold.is_torus(), simply_connected: false, cotangent: false };
    Ok(HamiltonianSystem::new(format!("{} x S1", cs.name), manifold, omega, hamiltonian)?.with_topology(topology))
}

/// `beta + alpha ^ dt` on `N x (extra coordinate)`.
fn collar_omega(cs: &CosymplecticStructure) -> Result<KForm, CosymError> {
    let n = cs.dim();
    let proj = ChartMap::projection(n + 1, &(0..n).collect::<Vec<_>>());
    let dt = KForm::coordinate(n + 1, &[n], 1.0)?;
    Ok(cs.beta.pullback(&proj)?.add(&cs.alpha.pullback(&proj)?.wedge(&dt)?)?)
}

/// Collar form `beta + alpha ^ dt` on `Z x (-eps, eps)`.
#[derive(Debug, Clone)]
pub struct CollarForm {
    pub form: KForm,
    pub epsilon: f64,
}

pub fn build_collar_form(cs: &CosymplecticStructure, epsilon: Option<f64>) -> Result<CollarForm, CosymError> {
    let report = verify_cosymplectic(cs, &chart_samples(&cs.manifold, 64, 0))?;
    if !report.pass {
        return Err(CosymError::Verification(format!("volume margin {:e}", report.volume_margin)));
    }
    let min_period = cs.manifold.periods().into_iter().flatten().fold(f64::INFINITY, f64::min);
    let epsilon = epsilon.unwrap_or(if min_period.is_finite() { 0.1 * min_period } else { 0.1 * TAU });
    Ok(CollarForm { form: collar_omega(cs)?, epsilon })
}

/// Primitive `H_X` of `i_X w` built by quadrature along straight paths.
#[derive(Debug, Clone)]
pub struct Extension {
    pub hamiltonian: KForm,
    /// `(1/1) * loop integral` of `i_X w` around each periodic coordinate.
    pub periods: Vec<(usize, f64)>,
    pub max_gradient_residual: f64,
    /// Disagreement between the straight path and an axis-by-axis path.
    pub max_path_discrepancy: f64,
}

/// Integral of the 1-form `form` along the straight segment `a -> a + d`.
fn segment_integral(form: &KForm, a: &[f64], d: &[f64]) -> f64 {
    quad::integrate(
        |s| {
            let p: Vec<f64> = a.iter().zip(d).map(|(x, v)| x + s * v).collect();
            dot(&form.coefficients(&p), d)
        },
        0.0,
        1.0,
        1e-13,
    )
    .value
}

/// Extend a symplectic field to a Hamiltonian: `dH_X = i_X w`.
///
/// On flat charts `T^k x R^m` the coordinate loops generate the first
/// homology, so vanishing loop periods certify exactness; a nonzero period
/// is refused.
pub fn extend_to_hamiltonian_field(
    sys: &HamiltonianSystem,
    field: &VectorField,
    base: &[f64],
    samples: &[Vec<f64>],
) -> Result<Extension, CosymError> {
    let dim = sys.dim();
    let form = sys.omega.interior(field)?;
    let mut periods = Vec::new();
    for k in 0..dim {
        if let Some(p) = sys.manifold.period(k) {
            let mut d = vec![0.0; dim];
            d[k] = p;
            let period = segment_integral(&form, base, &d);
            if period.abs() > PERIOD_TOL {
                return Err(CosymError::PathDependent { coordinate: k, period });
            }
            periods.push((k, period));
        }
    }
    let manifold = sys.manifold.clone();
    let (value_form, base_v) = (form.clone(), base.to_vec());
    let grad_form = form.clone();
    let hamiltonian = KForm::scalar(
        dim,
        move |p| segment_integral(&value_form, &base_v, &manifold.displacement(&base_v, p)),
        move |p| grad_form.coefficients(p),
    );
    let mut max_gradient_residual = 0.0f64;
    let mut max_path_discrepancy = 0.0f64;
    let h = 1e-5;
    for p in samples {
        let coeffs = form.coefficients(p);
        for i in 0..dim {
            let (mut a, mut b) = (p.clone(), p.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (hamiltonian.value(&a) - hamiltonian.value(&b)) / (2.0 * h);
            max_gradient_residual = max_gradient_residual.max((fd - coeffs[i]).abs());
        }
        // axis-by-axis path to the same endpoint
        let d = sys.manifold.displacement(base, p);
        let mut corner = base.to_vec();
        let mut legs = 0.0;
        for i in 0..dim {
            let mut step = vec![0.0; dim];
            step[i] = d[i];
            legs += segment_integral(&form, &corner, &step);
            corner[i] += d[i];
        }
        max_path_discrepancy = max_path_discrepancy.max((legs - hamiltonian.value(p)).abs());
    }
    if max_path_discrepancy > 1e-6 {
        return Err(CosymError::PathDependent { coordinate: dim, period: max_path_discrepancy });
    }
    if max_gradient_residual > 1e-6 {
        return Err(CosymError::Gradient { residual: max_gradient_residual });
    }
    Ok(Extension { hamiltonian, periods, max_gradient_residual, max_path_discrepancy })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
