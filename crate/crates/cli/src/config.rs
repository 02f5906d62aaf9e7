//! JSON run configuration.

use std::f64::consts::{SQRT_2, TAU};
use std::path::Path;
use std::sync::Arc;

use cosymlab::catalog;
use cosymlab::cosym::CosymplecticStructure;
use cosymlab::forms::KForm;
use cosymlab::phase::ChartManifold;
use cosymlab::section::{SectionChart, SectionSpec};
use cosymlab::HamiltonianSystem;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Expr};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Expr(#[from] expr::ParseError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Every field has a default, so `{}` is a valid config for each command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Cosymplectic seed for `demo-product`, `verify-cosym` and `tischler`.
    pub seed_name: String,
    /// Replaces the seed's `alpha` by a constant 1-form (`tischler`).
    pub alpha: Option<Vec<f64>>,
    /// Hamiltonian system for `return-map` and `obstruct`.
    pub system: SystemSelector,
    /// Section for `return-map`; defaults to the catalog section when the
    /// system has one.
    pub section: Option<SectionConfig>,
    pub energy: f64,
    /// Surface samples for global-section and structural checks.
    pub samples: usize,
    /// Section points for return-map Jacobians.
    pub section_samples: usize,
    /// Orbits written to the crossings point cloud.
    pub orbits: usize,
    /// Crossings recorded per orbit.
    pub iterates: usize,
    /// Box `[-r, r]` of chart coordinates for `return-map` start points.
    pub start_radius: f64,
    pub tol: f64,
    pub t_max: f64,
    pub fd_step: f64,
    pub torus_samples: usize,
    pub eps: f64,
    pub d_cap: u64,
    /// Betti profile: catalog name or explicit numbers.
    pub profile: Option<ProfileSelector>,
    /// Ambient manifold for the simply connected verdict.
    pub ambient: Option<String>,
    pub level_connected: bool,
    pub resolution: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed_name: "T3".into(),
            alpha: None,
            system: SystemSelector::Catalog("linear_oscillator".into()),
            section: None,
            energy: 1.0,
            samples: 1000,
            section_samples: 100,
            orbits: 8,
            iterates: 100,
            start_radius: 0.8,
            tol: 1e-10,
            t_max: cosymlab::section::DEFAULT_T_MAX,
            fd_step: 1e-5,
            torus_samples: 5,
            eps: 1e-2,
            d_cap: cosymlab::tischler::DEFAULT_D_CAP,
            profile: None,
            ambient: None,
            level_connected: true,
            resolution: cosymlab::obstruct::DEFAULT_RESOLUTION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSelector {
    Catalog(String),
    Inline(InlineSystem),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSelector {
    Catalog(String),
    Numbers(Vec<u32>),
}

/// Constant symplectic form with a Hamiltonian expression.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub name: Option<String>,
    pub dim: usize,
    /// Coordinate names used by the expression; default `x0, x1, ...`.
    pub coords: Option<Vec<String>>,
    /// Periodic coordinates (period `2 pi`).
    #[serde(default)]
    pub periodic: Vec<usize>,
    /// `omega = sum c dx_i ^ dx_j` as `[i, j, c]` triples.
    pub omega: Vec<(usize, usize, f64)>,
    pub hamiltonian: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SectionConfig {
    /// `atan2(-x_b, x_a) = 0`, charted by the remaining coordinates with `x_a`
    /// solved from the energy (`x_a > 0`, `x_b = 0`).
    Angle { a: usize, b: usize },
    /// `x_index = value` modulo `period`, charted by the remaining coordinates
    /// with `x_solve` solved from the energy.
    Coordinate { index: usize, value: f64, period: Option<f64>, solve: usize },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [("tol", self.tol), ("t_max", self.t_max), ("fd_step", self.fd_step), ("eps", self.eps), ("start_radius", self.start_radius)] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("samples", self.samples),
            ("section_samples", self.section_samples),
            ("orbits", self.orbits),
            ("iterates", self.iterates),
            ("torus_samples", self.torus_samples),
            ("resolution", self.resolution),
        ] {
            if v == 0 {
                return invalid(format!("{name} must be at least 1"));
            }
        }
        if self.d_cap == 0 {
            return invalid("d_cap must be at least 1");
        }
        Ok(())
    }

    /// The configured seed, with `alpha` replaced when requested.
    pub fn cosym_seed(&self) -> Result<CosymplecticStructure, ConfigError> {
        let Some(cs) = catalog::seed(&self.seed_name) else {
            return invalid(format!("unknown seed '{}' (expected one of {:?})", self.seed_name, catalog::SEED_NAMES));
        };
        let Some(alpha) = &self.alpha else { return Ok(cs) };
        if alpha.len() != cs.dim() {
            return invalid(format!("alpha needs {} coefficients", cs.dim()));
        }
        let form = KForm::constant(cs.dim(), 1, alpha.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        CosymplecticStructure::new(format!("{} (custom alpha)", cs.name), cs.manifold, form, cs.beta)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn hamiltonian_system(&self) -> Result<HamiltonianSystem, ConfigError> {
        match &self.system {
            SystemSelector::Catalog(name) => catalog_system(name),
            SystemSelector::Inline(spec) => inline_system(spec),
        }
    }

    /// Section for `return-map`.
    pub fn return_section(&self, sys: &HamiltonianSystem) -> Result<SectionSpec, ConfigError> {
        match (&self.section, &self.system) {
            (Some(sc), _) => build_section(sc, sys, self.energy),
            (None, SystemSelector::Catalog(name)) if name == "linear_oscillator" => {
                let [w1, w2] = linear_frequencies();
                Ok(catalog::linear_oscillator_section(w1, w2, self.energy))
            }
            (None, _) => invalid("return-map needs a section for this system"),
        }
    }
}

fn linear_frequencies() -> [f64; 2] {
    [1.0, SQRT_2]
}

fn catalog_system(name: &str) -> Result<HamiltonianSystem, ConfigError> {
    Ok(match name {
        "oscillator" => catalog::harmonic_oscillator(),
        "constant" => catalog::constant_hamiltonian(),
        "linear_oscillator" => {
            let [w1, w2] = linear_frequencies();
            catalog::linear_oscillator(w1, w2)
        }
        "cotangent_r4" => catalog::cotangent_r4(),
        "pendulum" => catalog::pendulum(),
        "standard_t4" => catalog::standard_t4(),
        _ => return invalid(format!("unknown system '{name}'")),
    })
}

fn inline_system(spec: &InlineSystem) -> Result<HamiltonianSystem, ConfigError> {
    let dim = spec.dim;
    let names = match &spec.coords {
        Some(c) if c.len() == dim => c.clone(),
        Some(c) => return invalid(format!("{} coordinate names for dimension {dim}", c.len())),
        None => (0..dim).map(|i| format!("x{i}")).collect(),
    };
    if let Some(&i) = spec.periodic.iter().find(|&&i| i >= dim) {
        return invalid(format!("periodic coordinate {i} out of range"));
    }
    let manifold = ChartManifold::new((0..dim).map(|i| spec.periodic.contains(&i)).collect(), vec![TAU; dim])
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut omega = KForm::zero(dim, 2).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    for &(i, j, c) in &spec.omega {
        if i >= dim || j >= dim || i == j {
            return invalid(format!("bad omega entry [{i}, {j}]"));
        }
        let term = KForm::coordinate(dim, &[i, j], c).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        omega = omega.add(&term).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    let h: Arc<Expr> = Arc::new(expr::parse(&spec.hamiltonian, &names)?);
    let grad: Arc<Vec<Expr>> = Arc::new((0..dim).map(|i| h.diff(i)).collect());
    let hamiltonian = KForm::scalar(dim, move |p| h.eval(p), move |p| grad.iter().map(|g| g.eval(p)).collect());
    let name = spec.name.clone().unwrap_or_else(|| format!("inline H = {}", spec.hamiltonian));
    HamiltonianSystem::new(name, manifold, omega, hamiltonian).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// Newton solve of `H(p) = energy` in coordinate `j`, from a positive guess.
fn solve_energy(sys: &HamiltonianSystem, mut p: Vec<f64>, j: usize, energy: f64) -> Vec<f64> {
    p[j] = 1.0;
    for _ in 0..60 {
        let f = sys.energy(&p) - energy;
        if f.abs() < 1e-14 {
            return p;
        }
        let g = sys.energy_gradient(&p)[j];
        if g.abs() < 1e-300 {
            break;
        }
        p[j] -= f / g;
    }
    if (sys.energy(&p) - energy).abs() < 1e-12 {
        p
    } else {
        vec![f64::NAN; p.len()]
    }
}

fn build_section(sc: &SectionConfig, sys: &HamiltonianSystem, energy: f64) -> Result<SectionSpec, ConfigError> {
    let dim = sys.dim();
    let (theta, level, solve, fixed) = match *sc {
        SectionConfig::Angle { a, b } => {
            if a >= dim || b >= dim || a == b {
                return invalid("angle section indices out of range");
            }
            let theta = KForm::scalar(
                dim,
                move |p| (-p[b]).atan2(p[a]),
                move |p| {
                    let r2 = p[a] * p[a] + p[b] * p[b];
                    let mut g = vec![0.0; dim];
                    g[a] = p[b] / r2;
                    g[b] = -p[a] / r2;
                    g
                },
            );
            (theta, 0.0, a, b)
        }
        SectionConfig::Coordinate { index, value, period, solve } => {
            if index >= dim || solve >= dim || index == solve {
                return invalid("coordinate section indices out of range");
            }
            let period = period.or(sys.manifold.period(index)).unwrap_or(TAU);
            let spec = SectionSpec::coordinate(dim, index, period, TAU * value / period)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            (spec.theta, spec.level, solve, index)
        }
    };
    let section_value = match *sc {
        SectionConfig::Angle { .. } => 0.0,
        SectionConfig::Coordinate { value, .. } => value,
    };
    let rest: Vec<usize> = (0..dim).filter(|&i| i != solve && i != fixed).collect();
    let periods = rest.iter().map(|&i| sys.manifold.period(i)).collect();
    let (lift_rest, proj_rest, s) = (rest.clone(), rest, sys.clone());
    let chart = SectionChart::new(
        periods,
        move |u| {
            let mut p = vec![0.0; dim];
            p[fixed] = section_value;
            for (c, &i) in lift_rest.iter().enumerate() {
                p[i] = u[c];
            }
            solve_energy(&s, p, solve, energy)
        },
        move |p| proj_rest.iter().map(|&i| p[i]).collect(),
    );
    Ok(SectionSpec::new(theta, level).map_err(|e| ConfigError::Invalid(e.to_string()))?.with_chart(chart))
}
