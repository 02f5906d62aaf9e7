//! Ready-made systems, cosymplectic seeds, sections and topology tables.

use std::f64::consts::{SQRT_2, TAU};

use crate::cosym::{build_product_system, CosymplecticStructure};
use crate::forms::KForm;
use crate::phase::{ChartManifold, EnergySurface, HamiltonianSystem, Topology};
use crate::section::{SectionChart, SectionSpec};

/// `w = dq ^ dp`, `H = (q^2 + p^2)/2` on `R^2`.
pub fn harmonic_oscillator() -> HamiltonianSystem {
    let omega = KForm::coordinate(2, &[0, 1], 1.0).expect("valid indices");
    let h = KForm::scalar(2, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]), |p| vec![p[0], p[1]]);
    let lambda = KForm::new(2, 1, |p| vec![0.0, p[0]]).expect("1-form").with_derivative(|_| vec![1.0]);
    HamiltonianSystem::new("oscillator", ChartManifold::euclidean(2), omega, h)
        .and_then(|s| s.with_primitive(lambda))
        .expect("catalog system")
        .with_topology(Topology { compact: false, simply_connected: true, cotangent: false })
}

/// `H = 1` on `R^2`; its field vanishes.
pub fn constant_hamiltonian() -> HamiltonianSystem {
    let omega = KForm::coordinate(2, &[0, 1], 1.0).expect("valid indices");
    let h = KForm::scalar(2, |_| 1.0, |_| vec![0.0, 0.0]);
    HamiltonianSystem::new("constant", ChartManifold::euclidean(2), omega, h)
        .expect("catalog system")
        .with_topology(Topology { compact: false, simply_connected: true, cotangent: false })
}

/// Two uncoupled oscillators in coordinates `(q1, p1, q2, p2)`,
/// `w = dq1 ^ dp1 + dq2 ^ dp2`, `H = sum w_i (q_i^2 + p_i^2)/2`.
pub fn linear_oscillator(w1: f64, w2: f64) -> HamiltonianSystem {
    let omega = KForm::coordinate(4, &[0, 1], 1.0)
        .and_then(|a| a.add(&KForm::coordinate(4, &[2, 3], 1.0)?))
        .expect("valid indices");
    let h = KForm::scalar(
        4,
        move |p| 0.5 * (w1 * (p[0] * p[0] + p[1] * p[1]) + w2 * (p[2] * p[2] + p[3] * p[3])),
        move |p| vec![w1 * p[0], w1 * p[1], w2 * p[2], w2 * p[3]],
    );
    // lambda = q1 dp1 + q2 dp2
    let lambda = KForm::new(4, 1, |p| vec![0.0, p[0], 0.0, p[2]])
        .expect("1-form")
        .with_derivative(|_| vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    HamiltonianSystem::new(format!("linear oscillator ({w1}, {w2})"), ChartManifold::euclidean(4), omega, h)
        .and_then(|s| s.with_primitive(lambda))
        .expect("catalog system")
        .with_topology(Topology { compact: false, simply_connected: true, cotangent: false })
}

/// Section `atan2(-p2, q2) = 0` of [`linear_oscillator`] on the level `H = energy`,
/// charted by `(q1, p1)`.
pub fn linear_oscillator_section(w1: f64, w2: f64, energy: f64) -> SectionSpec {
    let theta = KForm::scalar(
        4,
        |p| (-p[3]).atan2(p[2]),
        |p| {
            let r2 = p[2] * p[2] + p[3] * p[3];
            vec![0.0, 0.0, p[3] / r2, -p[2] / r2]
        },
    );
    let chart = SectionChart::new(
        vec![None, None],
        move |u| {
            let rest = energy - 0.5 * w1 * (u[0] * u[0] + u[1] * u[1]);
            vec![u[0], u[1], (2.0 * rest.max(0.0) / w2).sqrt(), 0.0]
        },
        |p| vec![p[0], p[1]],
    );
    SectionSpec::new(theta, 0.0).expect("0-form").with_chart(chart)
}

/// Cotangent bundle `T*R^2` in coordinates `(q1, p1, q2, p2)` with the
/// canonical `w = d lambda = dp1 ^ dq1 + dp2 ^ dq2`, `lambda = p1 dq1 + p2 dq2`,
/// and `H = (|q|^2 + |p|^2)/2`.
pub fn cotangent_r4() -> HamiltonianSystem {
    let omega = KForm::coordinate(4, &[1, 0], 1.0)
        .and_then(|a| a.add(&KForm::coordinate(4, &[3, 2], 1.0)?))
        .expect("valid indices");
    let h = KForm::scalar(4, |p| 0.5 * p.iter().map(|x| x * x).sum::<f64>(), |p| p.to_vec());
    let lambda = KForm::new(4, 1, |p| vec![p[1], 0.0, p[3], 0.0])
        .expect("1-form")
        .with_derivative(|_| vec![-1.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
    HamiltonianSystem::new("cotangent R4", ChartManifold::euclidean(4), omega, h)
        .and_then(|s| s.with_primitive(lambda))
        .expect("catalog system")
        .with_topology(Topology { compact: false, simply_connected: true, cotangent: true })
}

/// Pendulum on `T*S^1`: `q` periodic, `w = dq ^ dp = d(-p dq)`, `H = p^2/2 - cos q`.
pub fn pendulum() -> HamiltonianSystem {
    let omega = KForm::coordinate(2, &[0, 1], 1.0).expect("valid indices");
    let h = KForm::scalar(2, |p| 0.5 * p[1] * p[1] - p[0].cos(), |p| vec![p[0].sin(), p[1]]);
    let lambda = KForm::new(2, 1, |p| vec![-p[1], 0.0]).expect("1-form").with_derivative(|_| vec![1.0]);
    let manifold = ChartManifold::new(vec![true, false], vec![TAU, TAU]).expect("valid chart");
    HamiltonianSystem::new("pendulum", manifold, omega, h)
        .and_then(|s| s.with_primitive(lambda))
        .expect("catalog system")
        .with_topology(Topology { compact: false, simply_connected: false, cotangent: true })
}

/// `T^3`, `alpha = dz`, `beta = dx ^ dy`.
pub fn t3_seed() -> CosymplecticStructure {
    let m = ChartManifold::torus(3);
    CosymplecticStructure::new(
        "T3",
        m,
        KForm::coordinate(3, &[2], 1.0).expect("valid"),
        KForm::coordinate(3, &[0, 1], 1.0).expect("valid"),
    )
    .expect("catalog seed")
}

/// `T^5` with coordinates `(x1, y1, x2, y2, z)`, `alpha = dz`,
/// `beta = dx1 ^ dy1 + dx2 ^ dy2`.
pub fn t5_seed() -> CosymplecticStructure {
    let beta = KForm::coordinate(5, &[0, 1], 1.0)
        .and_then(|a| a.add(&KForm::coordinate(5, &[2, 3], 1.0)?))
        .expect("valid");
    CosymplecticStructure::new("T5", ChartManifold::torus(5), KForm::coordinate(5, &[4], 1.0).expect("valid"), beta)
        .expect("catalog seed")
}

/// Suspension of the rotation `y -> y + rho` on a unit-period `T^3`:
/// `alpha = dz`, `beta = dx ^ dy - rho dx ^ dz`, Reeb field `d_z + rho d_y`.
pub fn suspension_seed(rho: f64) -> CosymplecticStructure {
    let beta = KForm::constant(3, 2, vec![1.0, -rho, 0.0]).expect("valid");
    CosymplecticStructure::new(
        format!("suspension({rho})"),
        ChartManifold::torus_with_period(3, 1.0),
        KForm::coordinate(3, &[2], 1.0).expect("valid"),
        beta,
    )
    .expect("catalog seed")
}

/// `T^3` with `alpha = dx + sqrt(2) dy`, `beta = dy ^ dz`; the
/// kernel foliation of alpha has dense leaves.
pub fn irrational_seed() -> CosymplecticStructure {
    CosymplecticStructure::new(
        "irrational",
        ChartManifold::torus(3),
        KForm::constant(3, 1, vec![1.0, SQRT_2, 0.0]).expect("valid"),
        KForm::coordinate(3, &[1, 2], 1.0).expect("valid"),
    )
    .expect("catalog seed")
}

pub const SEED_NAMES: [&str; 4] = ["T3", "T5", "suspension", "irrational"];

/// Seed by name; `suspension` uses `rho = 1/3`.
pub fn seed(name: &str) -> Option<CosymplecticStructure> {
    match name {
        "T3" => Some(t3_seed()),
        "T5" => Some(t5_seed()),
        "suspension" => Some(suspension_seed(1.0 / 3.0)),
        "irrational" => Some(irrational_seed()),
        _ => None,
    }
}

/// `T^4 = T^3 x S^1` with `w = dx ^ dy + dz ^ d theta`, `H = sin theta`.
pub fn standard_t4() -> HamiltonianSystem {
    build_product_system(&t3_seed()).expect("catalog seed verifies")
}

/// Product system with its `theta = 0` energy surface and a leaf section.
#[derive(Debug, Clone)]
pub struct ProductExample {
    pub seed: CosymplecticStructure,
    pub system: HamiltonianSystem,
    /// The component `theta = 0` of `H^{-1}(0)`, charted by `N`.
    pub surface: EnergySurface,
    /// Coordinate of `N` along which the flow on the leaf moves fastest.
    pub section_coordinate: usize,
    /// Leaf `x_k = 0` inside `Z`, charted by the remaining `N` coordinates.
    pub section: SectionSpec,
}

impl ProductExample {
    /// Points of `Z` (ambient coordinates).
    pub fn surface_samples(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        crate::cosym::chart_samples(&self.seed.manifold, count, seed)
            .into_iter()
            .map(|z| self.surface.embed(&z))
            .collect()
    }

    /// Points of the leaf in section coordinates.
    pub fn section_samples(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let chart = self.section.chart.as_ref().expect("product sections carry a chart");
        let m = ChartManifold::new(
            chart.periods.iter().map(Option::is_some).collect(),
            chart.periods.iter().map(|p| p.unwrap_or(TAU)).collect(),
        )
        .expect("valid chart");
        crate::cosym::chart_samples(&m, count, seed)
    }
}

pub fn product_example(seed: CosymplecticStructure) -> Result<ProductExample, crate::cosym::CosymError> {
    let system = build_product_system(&seed)?;
    let n = seed.dim();
    let surface = EnergySurface::coordinate_slice(&system.manifold, n, 0.0, 0.0)?;
    let mut probe = vec![0.0; n + 1];
    for (i, x) in probe.iter_mut().take(n).enumerate() {
        *x = 0.1 * (i + 1) as f64;
    }
    let x = system.vector_field(&probe)?;
    let k = (0..n).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap_or(0);
    let period = seed.manifold.period(k).unwrap_or(TAU);
    let mut section = SectionSpec::coordinate(n + 1, k, period, 0.0).map_err(|e| {
        crate::cosym::CosymError::Verification(e.to_string())
    })?;
    let rest: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let periods = rest.iter().map(|&i| seed.manifold.period(i)).collect();
    let (lift_idx, proj_idx) = (rest.clone(), rest);
    let chart = SectionChart::new(
        periods,
        move |u| {
            let mut p = vec![0.0; n + 1];
            for (c, &i) in lift_idx.iter().enumerate() {
                p[i] = u[c];
            }
            p
        },
        move |p| proj_idx.iter().map(|&i| p[i]).collect(),
    );
    section = section.with_chart(chart);
    Ok(ProductExample { seed, system, surface, section_coordinate: k, section })
}

/// Named systems for conservation checks, each with a start point.
pub fn conservation_suite() -> Vec<(HamiltonianSystem, Vec<f64>)> {
    let mut out = vec![
        (harmonic_oscillator(), vec![1.0, 0.5]),
        (constant_hamiltonian(), vec![0.5, 0.5]),
        (linear_oscillator(1.0, SQRT_2), vec![0.6, 0.2, 0.8, -0.1]),
        (cotangent_r4(), vec![0.3, -0.4, 0.5, 0.9]),
        (pendulum(), vec![0.4, 1.1]),
    ];
    for name in SEED_NAMES {
        let cs = seed(name).expect("known seed");
        let n = cs.dim();
        let sys = build_product_system(&cs).expect("catalog seed verifies");
        let mut p: Vec<f64> = (0..n).map(|i| 0.1 + 0.07 * i as f64).collect();
        p.push(0.3);
        out.push((sys, p));
    }
    out
}

/// Declared topology of an ambient symplectic manifold.
pub fn ambient_topology(name: &str) -> Option<Topology> {
    match name {
        "S2xS2" => Some(Topology { compact: true, simply_connected: true, cotangent: false }),
        "CP2" => Some(Topology { compact: true, simply_connected: true, cotangent: false }),
        "T4" => Some(Topology { compact: true, simply_connected: false, cotangent: false }),
        "R4" => Some(Topology { compact: false, simply_connected: true, cotangent: true }),
        _ => None,
    }
}

/// Betti numbers `b_0..b_d` of closed orientable catalog manifolds.
pub fn betti_numbers(name: &str) -> Option<Vec<u32>> {
    let v = match name {
        "S1" => vec![1, 1],
        "S3" => vec![1, 0, 0, 1],
        "S5" => vec![1, 0, 0, 0, 0, 1],
        "T3" => vec![1, 3, 3, 1],
        "T5" => vec![1, 5, 10, 10, 5, 1],
        "S2xS1" => vec![1, 1, 1, 1],
        "S2xT3" => vec![1, 3, 4, 4, 3, 1],
        "T2xS3" => vec![1, 2, 1, 1, 2, 1],
        _ => return None,
    };
    Some(v)
}
