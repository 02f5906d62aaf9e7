//! Non-existence verdicts for global transverse sections: the Stokes test on
//! exact symplectic manifolds, the Betti-number condition, and the flag
//! check for compact simply connected ambients.

use std::f64::consts::{PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::cosym::chart_samples;
use crate::forms::{ChartMap, FormError, KForm, DEFAULT_FD_STEP};
use crate::linalg;
use crate::par::Execution;
use crate::phase::{HamiltonianSystem, Topology, CLOSED_TOL};

/// Default nodes per parameter direction.
pub const DEFAULT_RESOLUTION: usize = 256;
/// `|integral|` below this counts as zero.
pub const STOKES_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObstructError {
    #[error("system carries no primitive 1-form")]
    MissingPrimitive,
    #[error("primitive does not satisfy d lambda = w (residual {residual:e})")]
    DataError { residual: f64 },
    #[error("surface {0} is not closed")]
    OpenSurface(String),
    #[error("surface must be 2-dimensional and map into the chart")]
    SurfaceShape,
    #[error("malformed Betti profile: {0}")]
    MalformedProfile(String),
    #[error("verdict needs a connected level set")]
    Disconnected,
    #[error(transparent)]
    Form(#[from] FormError),
}

/// Closed surface given by a parametrization over `[0, a) x [0, b)`.
#[derive(Debug, Clone)]
pub struct MeshedSurface {
    pub name: String,
    pub extent: [f64; 2],
    pub map: ChartMap,
    pub resolution: usize,
    /// Declared: the parametrization closes up without boundary.
    pub closed: bool,
}

impl MeshedSurface {
    pub fn new(name: impl Into<String>, extent: [f64; 2], map: ChartMap, closed: bool) -> Result<Self, ObstructError> {
        if map.source_dim != 2 {
            return Err(ObstructError::SurfaceShape);
        }
        Ok(Self { name: name.into(), extent, map, resolution: DEFAULT_RESOLUTION, closed })
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution.max(1);
        self
    }

    /// Torus of revolution in the `(q1, p1, q2)` slice at `p2 = height`:
    /// tube radius `r` around a circle of radius `big_r` in the `(q1, p1)` plane.
    pub fn revolution_torus(big_r: f64, r: f64, height: f64) -> Self {
        let map = ChartMap::new(
            2,
            4,
            move |u: &[f64]| {
                let rho = big_r + r * u[1].cos();
                vec![rho * u[0].cos(), rho * u[0].sin(), r * u[1].sin(), height]
            },
            move |u: &[f64]| {
                let rho = big_r + r * u[1].cos();
                let (s0, c0, s1, c1) = (u[0].sin(), u[0].cos(), u[1].sin(), u[1].cos());
                vec![-rho * s0, -r * s1 * c0, rho * c0, -r * s1 * s0, 0.0, r * c1, 0.0, 0.0]
            },
        );
        Self { name: "revolution torus".into(), extent: [TAU, TAU], map, resolution: DEFAULT_RESOLUTION, closed: true }
    }

    /// Product of circles of radii `r1` in `(q1, p1)` and `r2` in `(q2, p2)`.
    pub fn clifford_torus(r1: f64, r2: f64) -> Self {
        let map = ChartMap::new(
            2,
            4,
            move |u: &[f64]| vec![r1 * u[0].cos(), r1 * u[0].sin(), r2 * u[1].cos(), r2 * u[1].sin()],
            move |u: &[f64]| {
                vec![-r1 * u[0].sin(), 0.0, r1 * u[0].cos(), 0.0, 0.0, -r2 * u[1].sin(), 0.0, r2 * u[1].cos()]
            },
        );
        Self { name: "clifford torus".into(), extent: [TAU, TAU], map, resolution: DEFAULT_RESOLUTION, closed: true }
    }

    /// Round sphere of radius `r` in the `(q1, p1, q2)` slice at `p2 = 0`,
    /// polar angle over `[0, cap]` (`cap = pi` gives the closed sphere).
    pub fn sphere_cap(r: f64, cap: f64) -> Self {
        let map = ChartMap::new(
            2,
            4,
            move |u: &[f64]| vec![r * u[0].sin() * u[1].cos(), r * u[0].sin() * u[1].sin(), r * u[0].cos(), 0.0],
            move |u: &[f64]| {
                let (s0, c0, s1, c1) = (u[0].sin(), u[0].cos(), u[1].sin(), u[1].cos());
                vec![r * c0 * c1, -r * s0 * s1, r * c0 * s1, r * s0 * c1, -r * s0, 0.0, 0.0, 0.0]
            },
        );
        let closed = (cap - PI).abs() < 1e-15;
        Self { name: "sphere".into(), extent: [cap, TAU], map, resolution: DEFAULT_RESOLUTION, closed }
    }

    /// Coordinate 2-torus in a chart of dimension `dim`, spanned by
    /// coordinates `i` and `j` over `[0, P_i) x [0, P_j)`, other coordinates at `base`.
    pub fn coordinate_torus(dim: usize, i: usize, j: usize, periods: [f64; 2], base: Vec<f64>) -> Self {
        let mut m = vec![0.0; dim * 2];
        m[i * 2] = 1.0;
        m[j * 2 + 1] = 1.0;
        let mut offset = base;
        offset[i] = 0.0;
        offset[j] = 0.0;
        let map = ChartMap::affine(2, dim, m, offset);
        Self { name: format!("coordinate torus ({i}, {j})"), extent: periods, map, resolution: DEFAULT_RESOLUTION, closed: true }
    }
}

/// `integral of i* w` over the surface by the tensor-product midpoint rule.
pub fn surface_integral(omega: &KForm, surf: &MeshedSurface, exec: Execution) -> Result<f64, ObstructError> {
    if surf.map.target_dim != omega.dim() || omega.degree() != 2 {
        return Err(ObstructError::SurfaceShape);
    }
    let pulled = omega.pullback(&surf.map)?;
    let n = surf.resolution;
    let (hu, hv) = (surf.extent[0] / n as f64, surf.extent[1] / n as f64);
    let rows = exec.map_range(n, |i| {
        let u = (i as f64 + 0.5) * hu;
        (0..n).map(|j| pulled.coefficients(&[u, (j as f64 + 0.5) * hv])[0]).sum::<f64>()
    });
    Ok(rows.iter().sum::<f64>() * hu * hv)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesReport {
    pub surface: String,
    pub nodes: usize,
    pub integral: f64,
    pub vanishes: bool,
}

/// On an exact manifold the symplectic area of any closed surface vanishes,
/// which rules out closed symplectic surfaces.
pub fn stokes_exactness_check(sys: &HamiltonianSystem, surf: &MeshedSurface, exec: Execution) -> Result<StokesReport, ObstructError> {
    let lambda = sys.primitive.as_ref().ok_or(ObstructError::MissingPrimitive)?;
    if !surf.closed {
        return Err(ObstructError::OpenSurface(surf.name.clone()));
    }
    check_primitive(sys, lambda)?;
    let integral = surface_integral(&sys.omega, surf, exec)?;
    Ok(StokesReport {
        surface: surf.name.clone(),
        nodes: surf.resolution * surf.resolution,
        integral,
        vanishes: integral.abs() < STOKES_TOL,
    })
}

fn check_primitive(sys: &HamiltonianSystem, lambda: &KForm) -> Result<(), ObstructError> {
    let diff = lambda.exterior_derivative(DEFAULT_FD_STEP)?.sub(&sys.omega)?;
    let residual = chart_samples(&sys.manifold, 64, 0)
        .iter()
        .map(|p| linalg::max_abs(&diff.coefficients(p)))
        .fold(0.0, f64::max);
    if residual >= CLOSED_TOL {
        return Err(ObstructError::DataError { residual });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    /// No global transverse section can exist.
    Negative,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub statement: String,
    /// Result the verdict rests on.
    pub basis: String,
}

/// Verdict from the presence of a verified primitive `d lambda = w`.
pub fn exactness_verdict(sys: &HamiltonianSystem) -> Result<Verdict, ObstructError> {
    let Some(lambda) = &sys.primitive else {
        return Ok(Verdict {
            kind: VerdictKind::Inconclusive,
            statement: format!("{}: no primitive supplied; exactness obstruction does not apply", sys.name),
            basis: "none".into(),
        });
    };
    check_primitive(sys, lambda)?;
    let (statement, basis) = if sys.topology.cotangent {
        (
            format!("{}: no energy level of any Hamiltonian admits a global transverse Poincare section", sys.name),
            "canonical cotangent bundles carry no closed symplectic submanifolds".to_string(),
        )
    } else {
        (
            format!("{}: no compact energy level admits a global transverse Poincare section", sys.name),
            "exact symplectic manifolds carry no closed symplectic submanifolds".to_string(),
        )
    };
    Ok(Verdict { kind: VerdictKind::Negative, statement, basis })
}

/// Betti numbers `b_0..b_{2n-1}` of a closed orientable odd-dimensional manifold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BettiProfile {
    pub name: String,
    pub betti: Vec<u32>,
}

impl BettiProfile {
    pub fn new(name: impl Into<String>, betti: Vec<u32>) -> Self {
        Self { name: name.into(), betti }
    }

    /// Entry from the catalog table.
    pub fn catalog(name: &str) -> Option<Self> {
        crate::catalog::betti_numbers(name).map(|b| Self::new(name, b))
    }

    fn validate(&self) -> Result<(), ObstructError> {
        let b = &self.betti;
        if b.is_empty() || !b.len().is_multiple_of(2) {
            return Err(ObstructError::MalformedProfile(format!(
                "{} needs b_0..b_(2n-1) of an odd-dimensional manifold, got {} entries",
                self.name,
                b.len()
            )));
        }
        if b[0] < 1 {
            return Err(ObstructError::MalformedProfile(format!("{}: b_0 must be at least 1", self.name)));
        }
        let top = b.len() - 1;
        if let Some(i) = (0..b.len()).find(|&i| b[i] != b[top - i]) {
            return Err(ObstructError::MalformedProfile(format!("{}: b_{i} != b_{} (Poincare duality)", self.name, top - i)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BettiVerdict {
    pub name: String,
    pub pass: bool,
    /// First degree with `b_i = 0`.
    pub vanishing_degree: Option<usize>,
}

/// A cosymplectic level set has every `b_i >= 1`. Passing is necessary, not
/// sufficient.
pub fn betti_necessary_condition(bp: &BettiProfile) -> Result<BettiVerdict, ObstructError> {
    bp.validate()?;
    let vanishing_degree = bp.betti.iter().position(|&b| b == 0);
    Ok(BettiVerdict { name: bp.name.clone(), pass: vanishing_degree.is_none(), vanishing_degree })
}

/// Negative verdict for every connected level set of a compact simply
/// connected ambient; otherwise inconclusive. Disconnected levels are refused.
pub fn simply_connected_verdict(topology: Topology, level_connected: bool) -> Result<Verdict, ObstructError> {
    if !level_connected {
        return Err(ObstructError::Disconnected);
    }
    Ok(if topology.compact && topology.simply_connected {
        Verdict {
            kind: VerdictKind::Negative,
            statement: "no connected energy level admits a global transverse Poincare section".into(),
            basis: "a section would split the compact simply connected ambient into two pieces exchanged by a volume-preserving flow".into(),
        }
    } else {
        Verdict {
            kind: VerdictKind::Inconclusive,
            statement: "ambient is not both compact and simply connected".into(),
            basis: "none".into(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn exact_ambient_surfaces_have_zero_area() {
        let sys = catalog::cotangent_r4();
        for surf in [
            MeshedSurface::revolution_torus(2.0, 0.5, 0.3),
            MeshedSurface::clifford_torus(1.0, 0.7),
            MeshedSurface::sphere_cap(1.0, PI),
        ] {
            let r = stokes_exactness_check(&sys, &surf, Execution::default()).unwrap();
            assert!(r.vanishes, "{}: {}", r.surface, r.integral);
            assert_eq!(r.nodes, 256 * 256);
        }
    }

    #[test]
    fn t4_coordinate_torus_area() {
        let sys = catalog::standard_t4();
        let surf = MeshedSurface::coordinate_torus(4, 0, 1, [TAU, TAU], vec![0.0, 0.0, 1.0, 0.5]);
        let v = surface_integral(&sys.omega, &surf, Execution::default()).unwrap();
        assert!((v - TAU * TAU).abs() < 1e-8, "{v}");
        assert_eq!(stokes_exactness_check(&sys, &surf, Execution::default()).unwrap_err(), ObstructError::MissingPrimitive);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        // hemisphere projects onto the unit disc in (q1, p1): |integral| = pi
        let sys = catalog::linear_oscillator(1.0, 1.0);
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let s = MeshedSurface::sphere_cap(1.0, PI / 2.0).with_resolution(n);
                (surface_integral(&sys.omega, &s, Execution::Sequential).unwrap().abs() - PI).abs()
            })
            .collect();
        assert!(errs[0] / errs[1] >= 4.0 && errs[1] / errs[2] >= 4.0, "{errs:?}");
    }

    #[test]
    fn open_surface_refused() {
        let sys = catalog::cotangent_r4();
        let cap = MeshedSurface::sphere_cap(1.0, 1.0);
        assert!(matches!(stokes_exactness_check(&sys, &cap, Execution::default()), Err(ObstructError::OpenSurface(_))));
    }

    #[test]
    fn exactness_verdicts() {
        let v = exactness_verdict(&catalog::cotangent_r4()).unwrap();
        assert_eq!(v.kind, VerdictKind::Negative);
        assert_eq!(exactness_verdict(&catalog::standard_t4()).unwrap().kind, VerdictKind::Inconclusive);
        let bad = catalog::cotangent_r4()
            .with_primitive(KForm::constant(4, 1, vec![0.0, 1.0, 0.0, 0.0]).unwrap())
            .unwrap();
        assert!(matches!(exactness_verdict(&bad), Err(ObstructError::DataError { .. })));
    }

    #[test]
    fn betti_examples() {
        let s3 = betti_necessary_condition(&BettiProfile::catalog("S3").unwrap()).unwrap();
        assert!(!s3.pass);
        assert_eq!(s3.vanishing_degree, Some(1));
        for name in ["T3", "S2xS1", "T5"] {
            assert!(betti_necessary_condition(&BettiProfile::catalog(name).unwrap()).unwrap().pass);
        }
        assert!(betti_necessary_condition(&BettiProfile::new("bad", vec![1, 0, 1])).is_err());
        assert!(betti_necessary_condition(&BettiProfile::new("bad", vec![0, 1, 1, 0])).is_err());
        assert!(betti_necessary_condition(&BettiProfile::new("bad", vec![1, 2, 1, 1])).is_err());
    }

    #[test]
    fn flag_verdicts() {
        let s2s2 = catalog::ambient_topology("S2xS2").unwrap();
        assert_eq!(simply_connected_verdict(s2s2, true).unwrap().kind, VerdictKind::Negative);
        let t4 = catalog::ambient_topology("T4").unwrap();
        assert_eq!(simply_connected_verdict(t4, true).unwrap().kind, VerdictKind::Inconclusive);
        let r4 = catalog::ambient_topology("R4").unwrap();
        assert_eq!(simply_connected_verdict(r4, true).unwrap().kind, VerdictKind::Inconclusive);
        assert_eq!(simply_connected_verdict(s2s2, false).unwrap_err(), ObstructError::Disconnected);
    }
}
