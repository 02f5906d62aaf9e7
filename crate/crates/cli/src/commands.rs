//! The five subcommands. Each returns a report; files go to `out`.

use std::fs;
use std::path::Path;

use cosymlab::catalog::{self, product_example, ProductExample};
use cosymlab::cosym::{
    build_collar_form, build_product_system, chart_samples, cosym_to_field, field_to_cosym, symplectic_submanifold_test,
    transverse_field, verify_cosymplectic,
};
use cosymlab::linalg::max_abs;
use cosymlab::obstruct::{
    betti_necessary_condition, exactness_verdict, simply_connected_verdict, stokes_exactness_check, surface_integral,
    BettiProfile, MeshedSurface, ObstructError,
};
use cosymlab::section::{
    crossing_sequence, first_return, mapping_torus_chart, return_map_jacobian, verify_global, write_crossings_csv,
    CrossingRow, SectionSpec,
};
use cosymlab::tischler::{build_approximation, check_transversality_preserved, extract_leaf, periods, rationalize};
use cosymlab::{EnergySurface, Execution, HamiltonianSystem};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, ProfileSelector, RunConfig};
use crate::report::RunReport;
use crate::svg;

/// `|det D phi - 1|` bound for return maps.
pub const DET_TOL: f64 = 1e-6;
/// Bound on `|D^T J D - J|` with finite-difference Jacobians.
pub const SYMPLECTIC_DEFECT_TOL: f64 = 1e-5;
pub const SUBMANIFOLD_MARGIN: f64 = 0.5;
pub const RETURN_TIME_SPREAD: f64 = 1e-6;
pub const ROUND_TRIP_TOL: f64 = 1e-8;
pub const PERIOD_REPRODUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {msg}")]
    Output { path: String, msg: String },
}

fn config_err(e: impl std::fmt::Display) -> CommandError {
    CommandError::Config(ConfigError::Invalid(e.to_string()))
}

fn write_file(out: &Path, name: &str, contents: &[u8], report: &mut RunReport) -> Result<(), CommandError> {
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| CommandError::Output { path: path.display().to_string(), msg: e.to_string() })?;
    report.artifacts.push(name.into());
    Ok(())
}

fn write_crossings(out: &Path, rows: &[CrossingRow], report: &mut RunReport) -> Result<(), CommandError> {
    let mut buf = Vec::new();
    write_crossings_csv(&mut buf, rows).map_err(|e| CommandError::Output { path: "crossings.csv".into(), msg: e.to_string() })?;
    write_file(out, "crossings.csv", &buf, report)
}

fn write_plot(out: &Path, title: &str, rows: &[CrossingRow], report: &mut RunReport) -> Result<(), CommandError> {
    let pts: Vec<_> = rows
        .iter()
        .filter(|r| r.coords.len() >= 2)
        .map(|r| (r.orbit_id, r.coords[0], r.coords[1]))
        .collect();
    write_file(out, "plot.svg", svg::scatter(title, "coord_0", "coord_1", &pts).as_bytes(), report)
}

/// Crossing rows for `starts`; the first error is reported instead.
fn crossing_rows(
    sys: &HamiltonianSystem,
    sec: &SectionSpec,
    starts: &[Vec<f64>],
    cfg: &RunConfig,
    exec: Execution,
) -> Result<Vec<CrossingRow>, String> {
    let chart = sec.chart.as_ref().ok_or("section has no chart")?;
    let per_orbit = exec.map(starts, |p| crossing_sequence(sys, sec, p, cfg.iterates, cfg.t_max, cfg.tol));
    let mut rows = Vec::new();
    for (id, seq) in per_orbit.into_iter().enumerate() {
        let seq = seq.map_err(|e| format!("orbit {id}: {e}"))?;
        rows.extend(seq.into_iter().map(|c| CrossingRow {
            orbit_id: id,
            t: c.time,
            coords: chart.project(&c.point),
            margin: c.rate.abs(),
        }));
    }
    Ok(rows)
}

struct ReturnStats {
    max_det_error: f64,
    max_defect: f64,
    max_displacement: f64,
}

/// Jacobians and holonomy displacement at section points `us`.
fn return_stats(sys: &HamiltonianSystem, sec: &SectionSpec, us: &[Vec<f64>], cfg: &RunConfig, exec: Execution) -> Result<ReturnStats, String> {
    let chart = sec.chart.as_ref().ok_or("section has no chart")?;
    let results = exec.map(us, |u| -> Result<(f64, f64, f64), String> {
        let p = chart.lift(u);
        let jac = return_map_jacobian(sys, sec, &p, cfg.fd_step, cfg.t_max, cfg.tol).map_err(|e| e.to_string())?;
        let disp = max_abs(&chart.displacement(u, &chart.project(&jac.image)));
        Ok(((jac.determinant - 1.0).abs(), jac.symplectic_defect, disp))
    });
    let mut s = ReturnStats { max_det_error: 0.0, max_defect: 0.0, max_displacement: 0.0 };
    for (i, r) in results.into_iter().enumerate() {
        let (d, j, m) = r.map_err(|e| format!("section point {i}: {e}"))?;
        s.max_det_error = s.max_det_error.max(d);
        s.max_defect = s.max_defect.max(j);
        s.max_displacement = s.max_displacement.max(m);
    }
    Ok(s)
}

fn record_return_stats(report: &mut RunReport, stats: Result<ReturnStats, String>) {
    match stats {
        Ok(s) => {
            report.check("return_map_area_preserving", s.max_det_error < DET_TOL, Some(s.max_det_error), Some(DET_TOL), None);
            report.check(
                "return_map_symplectic",
                s.max_defect < SYMPLECTIC_DEFECT_TOL,
                Some(s.max_defect),
                Some(SYMPLECTIC_DEFECT_TOL),
                None,
            );
            report.metric("holonomy_max_displacement", s.max_displacement);
        }
        Err(e) => {
            report.fail("return_map_area_preserving", e.clone());
            report.fail("return_map_symplectic", e);
        }
    }
}

fn section_submanifold(report: &mut RunReport, sys: &HamiltonianSystem, sec: &SectionSpec, us: &[Vec<f64>]) {
    let Some(chart) = &sec.chart else {
        report.fail("section_symplectic", "section has no chart");
        return;
    };
    match symplectic_submanifold_test(sys, &chart.patch(sys.dim()), us, SUBMANIFOLD_MARGIN) {
        Ok(r) => report.check("section_symplectic", r.pass, Some(r.min_abs_det), Some(SUBMANIFOLD_MARGIN), None),
        Err(e) => report.fail("section_symplectic", e.to_string()),
    }
}

fn global_section(report: &mut RunReport, name: &str, sys: &HamiltonianSystem, sec: &SectionSpec, samples: &[Vec<f64>], cfg: &RunConfig) {
    let g = verify_global(sys, sec, samples, cfg.t_max, cfg.tol, Execution::default());
    let detail = g.failures.first().map(|f| format!("{} failures, first at sample {}: {}", g.failures.len(), f.index, f.reason));
    report.check(name, g.is_global(), Some(g.passed as f64), Some(g.samples as f64), detail);
    report.metric(&format!("{name}_min_margin"), g.min_margin);
    report.metric(&format!("{name}_min_return_time"), g.min_return_time);
    report.metric(&format!("{name}_max_return_time"), g.max_return_time);
    report.metric(&format!("{name}_max_energy_error"), g.max_energy_error);
    if let Some(w) = &g.warning {
        report.metric(&format!("{name}_warning"), w);
    }
}

pub fn demo_product(cfg: &RunConfig, out: &Path) -> Result<RunReport, CommandError> {
    let seed = cfg.cosym_seed()?;
    let ex: ProductExample = product_example(seed).map_err(config_err)?;
    let sys = &ex.system;
    let exec = Execution::default();
    let mut report = RunReport::new("demo-product", cfg);
    report.metric("seed", &ex.seed.name);
    report.metric("dimension", sys.dim());
    report.metric("section_coordinate", ex.section_coordinate);

    report.stage("structure", |r| {
        match sys.validate(&chart_samples(&sys.manifold, cfg.samples, cfg.seed)) {
            Ok(c) => {
                r.check("system_structure", c.pass, Some(c.max_closedness), Some(cosymlab::phase::CLOSED_TOL), None);
                r.metric("min_rcond", c.min_rcond);
            }
            Err(e) => r.fail("system_structure", e.to_string()),
        }
        match verify_cosymplectic(&ex.seed, &chart_samples(&ex.seed.manifold, cfg.samples, cfg.seed)) {
            Ok(c) => r.check("seed_cosymplectic", c.pass, Some(c.volume_margin), Some(cosymlab::cosym::VOLUME_MARGIN), None),
            Err(e) => r.fail("seed_cosymplectic", e.to_string()),
        }
    });

    let surface = ex.surface_samples(cfg.samples, cfg.seed);
    report.stage("global_section", |r| {
        global_section(r, "global_section", sys, &ex.section, &surface, cfg);
        let lo = r.metrics["global_section_min_return_time"].as_f64().unwrap_or(f64::NAN);
        let hi = r.metrics["global_section_max_return_time"].as_f64().unwrap_or(f64::NAN);
        r.check("return_time_constant", hi - lo < RETURN_TIME_SPREAD, Some(hi - lo), Some(RETURN_TIME_SPREAD), None);
    });

    let us = ex.section_samples(cfg.section_samples, cfg.seed);
    report.stage("return_maps", |r| record_return_stats(r, return_stats(sys, &ex.section, &us, cfg, exec)));
    report.stage("submanifold", |r| section_submanifold(r, sys, &ex.section, &us));

    report.stage("mapping_torus", |r| {
        let grid = &us[..us.len().min(16)];
        match mapping_torus_chart(sys, &ex.section, grid, cfg.torus_samples, cfg.t_max, cfg.tol, exec) {
            Ok(m) => {
                let bound = (10.0 * cfg.tol).max(1e-12);
                r.check("mapping_torus_gluing", true, Some(m.gluing_residual), Some(bound), None);
                r.metric("mapping_torus_energy_residual", m.energy_residual);
            }
            Err(e) => r.fail("mapping_torus_gluing", e.to_string()),
        }
    });

    let rows = report.stage("crossings", |r| {
        let starts = &surface[..surface.len().min(cfg.orbits)];
        match crossing_rows(sys, &ex.section, starts, cfg, exec) {
            Ok(rows) => {
                r.check("crossings", true, Some(rows.len() as f64), None, None);
                rows
            }
            Err(e) => {
                r.fail("crossings", e);
                Vec::new()
            }
        }
    });
    write_crossings(out, &rows, &mut report)?;
    write_plot(out, &format!("return map iterates, {} product", ex.seed.name), &rows, &mut report)?;
    Ok(report)
}

pub fn verify_cosym(cfg: &RunConfig, _out: &Path) -> Result<RunReport, CommandError> {
    let cs = cfg.cosym_seed()?;
    let mut report = RunReport::new("verify-cosym", cfg);
    report.metric("seed", &cs.name);
    let samples = chart_samples(&cs.manifold, cfg.samples, cfg.seed);
    report.stage("cosymplectic", |r| match verify_cosymplectic(&cs, &samples) {
        Ok(c) => {
            r.check("cosymplectic", c.pass, Some(c.volume_margin), Some(cosymlab::cosym::VOLUME_MARGIN), None);
            r.metric("max_d_alpha", c.max_d_alpha);
            r.metric("max_d_beta", c.max_d_beta);
        }
        Err(e) => r.fail("cosymplectic", e.to_string()),
    });

    let n = cs.dim();
    let sys = build_product_system(&cs).map_err(config_err)?;
    let z = EnergySurface::coordinate_slice(&sys.manifold, n, 0.0, 0.0).map_err(config_err)?;
    report.stage("round_trip", |r| {
        match cosym_to_field(&sys, &z, &cs, &samples) {
            Ok(t) => {
                r.check("transverse_field", t.pass, Some(t.min_transversality), Some(cosymlab::cosym::TRANSVERSE_MARGIN), None);
                r.metric("field_symplectic_residual", t.symplectic_residual);
                // the field dual to alpha on the product is -d/d theta
                let dev = t
                    .fields
                    .iter()
                    .map(|x| x.iter().enumerate().map(|(i, v)| (v - if i == n { -1.0 } else { 0.0 }).abs()).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                r.check("field_is_minus_d_theta", dev < ROUND_TRIP_TOL, Some(dev), Some(ROUND_TRIP_TOL), None);
            }
            Err(e) => {
                r.fail("transverse_field", e.to_string());
                r.fail("field_is_minus_d_theta", "no field");
            }
        }
        let back = transverse_field(&sys, &z, &cs).and_then(|x| field_to_cosym(&sys, &z, &x, &samples));
        match back {
            Ok(cs2) => {
                let diff = samples
                    .iter()
                    .map(|p| {
                        let a = cs.alpha.coefficients(p).iter().zip(cs2.alpha.coefficients(p)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                        let b = cs.beta.coefficients(p).iter().zip(cs2.beta.coefficients(p)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                        a.max(b)
                    })
                    .fold(0.0, f64::max);
                r.check("round_trip", diff < ROUND_TRIP_TOL, Some(diff), Some(ROUND_TRIP_TOL), None);
            }
            Err(e) => r.fail("round_trip", e.to_string()),
        }
    });

    report.stage("collar", |r| match build_collar_form(&cs, None) {
        Ok(collar) => {
            // at t = 0 on coordinate frames of Z the collar form is beta, bit for bit
            let mut diff = 0.0f64;
            for z in samples.iter().take(32) {
                let mut p = z.clone();
                p.push(0.0);
                for i in 0..n {
                    for j in i + 1..n {
                        let (mut ei, mut ej) = (vec![0.0; n + 1], vec![0.0; n + 1]);
                        ei[i] = 1.0;
                        ej[j] = 1.0;
                        let (mut fi, mut fj) = (vec![0.0; n], vec![0.0; n]);
                        fi[i] = 1.0;
                        fj[j] = 1.0;
                        let full = collar.form.evaluate_at(&p, &[&ei, &ej]).unwrap_or(f64::NAN);
                        let beta = cs.beta.evaluate_at(z, &[&fi, &fj]).unwrap_or(f64::NAN);
                        diff = diff.max((full - beta).abs());
                    }
                }
            }
            r.check("collar_restricts_to_beta", diff == 0.0, Some(diff), Some(0.0), None);
            r.metric("collar_epsilon", collar.epsilon);
        }
        Err(e) => r.fail("collar_restricts_to_beta", e.to_string()),
    });
    Ok(report)
}

pub fn tischler(cfg: &RunConfig, _out: &Path) -> Result<RunReport, CommandError> {
    let cs = cfg.cosym_seed()?;
    let exec = Execution::default();
    let mut report = RunReport::new("tischler", cfg);
    report.metric("seed", &cs.name);
    let pv = match periods(&cs.alpha, &cs.manifold, None) {
        Ok(pv) => pv,
        Err(e) => {
            report.fail("periods", e.to_string());
            return Ok(report);
        }
    };
    report.check("periods", true, None, None, None);
    report.metric("periods", &pv.values);
    let ra = match report.stage("rationalize", |_| rationalize(&pv, cfg.eps, cfg.d_cap, exec)) {
        Ok(ra) => ra,
        Err(e) => {
            report.fail("rationalize", e.to_string());
            return Ok(report);
        }
    };
    report.check("rationalize", ra.error <= cfg.eps, Some(ra.error), Some(cfg.eps), None);
    report.metric("d", ra.d);
    report.metric("n", &ra.n);
    report.metric("error", ra.error);

    let approx = build_approximation(&cs.alpha, &cs.manifold, &pv, &ra).map_err(config_err)?;
    report.metric("sup_distance", approx.sup_distance);
    match periods(&approx.form, &cs.manifold, None) {
        Ok(new) => {
            let dev = new.values.iter().zip(&ra.n).map(|(v, k)| (v - *k as f64 / ra.d as f64).abs()).fold(0.0, f64::max);
            report.check("periods_reproduced", dev < PERIOD_REPRODUCTION_TOL, Some(dev), Some(PERIOD_REPRODUCTION_TOL), None);
        }
        Err(e) => report.fail("periods_reproduced", e.to_string()),
    }

    let ex = product_example(cs.clone()).map_err(config_err)?;
    let zs = chart_samples(&cs.manifold, cfg.samples, cfg.seed);
    report.stage("transversality", |r| {
        match check_transversality_preserved(&ex.system, &ex.surface, &cs.alpha, &approx.form, &zs) {
            Ok(t) => {
                r.check("transversality_preserved", t.pass, Some(t.approx_margin), Some(cosymlab::section::TANGENCY_MARGIN), None);
                r.metric("original_margin", t.original_margin);
                r.metric("margin_loss", t.margin_loss);
            }
            Err(e) => r.fail("transversality_preserved", e.to_string()),
        }
    });
    match extract_leaf(&ra, &cs.manifold) {
        Ok(leaf) => {
            let leaf = leaf.extend_trailing(vec![0.0]);
            let surface = ex.surface_samples(cfg.samples, cfg.seed);
            report.stage("leaf", |r| global_section(r, "leaf_global_section", &ex.system, &leaf, &surface, cfg));
        }
        Err(e) => report.fail("leaf_global_section", e.to_string()),
    }
    Ok(report)
}

fn closed_surfaces(sys: &HamiltonianSystem, resolution: usize) -> Vec<MeshedSurface> {
    let m = &sys.manifold;
    let mut out = Vec::new();
    if sys.dim() == 4 && (0..4).all(|i| !m.is_periodic(i)) {
        out.push(MeshedSurface::clifford_torus(1.0, 0.5));
        out.push(MeshedSurface::revolution_torus(2.0, 0.5, 0.3));
        out.push(MeshedSurface::sphere_cap(1.0, std::f64::consts::PI));
    }
    for i in 0..sys.dim() {
        for j in i + 1..sys.dim() {
            if let (Some(pi), Some(pj)) = (m.period(i), m.period(j)) {
                out.push(MeshedSurface::coordinate_torus(sys.dim(), i, j, [pi, pj], vec![0.0; sys.dim()]));
            }
        }
    }
    out.into_iter().map(|s| s.with_resolution(resolution)).collect()
}

pub fn obstruct(cfg: &RunConfig, _out: &Path) -> Result<RunReport, CommandError> {
    let sys = cfg.hamiltonian_system()?;
    let exec = Execution::default();
    let mut report = RunReport::new("obstruct", cfg);
    report.metric("system", &sys.name);

    if let Some(sel) = &cfg.profile {
        let profile = match sel {
            ProfileSelector::Catalog(name) => {
                BettiProfile::catalog(name).ok_or_else(|| config_err(format!("unknown Betti profile '{name}'")))?
            }
            ProfileSelector::Numbers(b) => BettiProfile::new("custom", b.clone()),
        };
        let v = betti_necessary_condition(&profile).map_err(config_err)?;
        let detail = v.vanishing_degree.map(|i| format!("b_{i} = 0"));
        report.check("betti_necessary", v.pass, None, None, detail);
        report.metric("betti", &profile.betti);
        report.metric("betti_vanishing_degree", v.vanishing_degree);
    }

    if let Some(name) = &cfg.ambient {
        let topo = catalog::ambient_topology(name).ok_or_else(|| config_err(format!("unknown ambient '{name}'")))?;
        match simply_connected_verdict(topo, cfg.level_connected) {
            Ok(v) => report.metric("topology_verdict", &v),
            Err(ObstructError::Disconnected) => return Err(config_err(ObstructError::Disconnected)),
            Err(e) => report.fail("topology_verdict", e.to_string()),
        }
    }

    let surfaces = closed_surfaces(&sys, cfg.resolution);
    report.stage("exactness", |r| {
        match exactness_verdict(&sys) {
            Ok(v) => r.metric("exactness_verdict", &v),
            Err(e) => r.fail("exactness_verdict", e.to_string()),
        }
        let mut integrals = Vec::new();
        for s in &surfaces {
            if sys.primitive.is_some() {
                match stokes_exactness_check(&sys, s, exec) {
                    Ok(st) => {
                        r.check(&format!("stokes {}", st.surface), st.vanishes, Some(st.integral), Some(cosymlab::obstruct::STOKES_TOL), None);
                        integrals.push((st.surface, st.integral));
                    }
                    Err(e) => r.fail(&format!("stokes {}", s.name), e.to_string()),
                }
            } else if let Ok(v) = surface_integral(&sys.omega, s, exec) {
                integrals.push((s.name.clone(), v));
            }
        }
        r.metric("surface_integrals", &integrals);
    });
    Ok(report)
}

/// Start points on the section: chart coordinates drawn from the configured
/// box, keeping those whose lift is defined.
fn section_starts(sec: &SectionSpec, cfg: &RunConfig, count: usize, stream: u64) -> Vec<Vec<f64>> {
    let chart = sec.chart.as_ref().expect("return sections carry a chart");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream));
    let mut out = Vec::new();
    let r = cfg.start_radius;
    for _ in 0..count * 1000 {
        if out.len() == count {
            break;
        }
        let u: Vec<f64> = chart
            .periods
            .iter()
            .map(|p| match p {
                Some(p) => rng.random_range(0.0..*p),
                None => rng.random_range(-r..r),
            })
            .collect();
        if chart.lift(&u).iter().all(|x| x.is_finite()) {
            out.push(u);
        }
    }
    out
}

pub fn return_map(cfg: &RunConfig, out: &Path) -> Result<RunReport, CommandError> {
    let sys = cfg.hamiltonian_system()?;
    let sec = cfg.return_section(&sys)?;
    if sec.dim() != sys.dim() {
        return Err(config_err("section dimension does not match the system"));
    }
    let exec = Execution::default();
    let mut report = RunReport::new("return-map", cfg);
    report.metric("system", &sys.name);
    let chart = sec.chart.clone().expect("return sections carry a chart");

    let starts = section_starts(&sec, cfg, cfg.orbits, 0);
    if starts.len() < cfg.orbits {
        return Err(config_err("too few start points lift onto the energy level; shrink start_radius"));
    }
    let starts_ambient: Vec<Vec<f64>> = starts.iter().map(|u| chart.lift(u)).collect();
    let rows = report.stage("crossings", |r| match crossing_rows(&sys, &sec, &starts_ambient, cfg, exec) {
        Ok(rows) => {
            let energy_error = rows
                .iter()
                .map(|row| (sys.energy(&chart.lift(&row.coords)) - cfg.energy).abs())
                .fold(0.0, f64::max);
            r.check("crossings", true, Some(rows.len() as f64), None, None);
            r.metric("min_crossing_margin", rows.iter().map(|x| x.margin).fold(f64::INFINITY, f64::min));
            r.metric("max_energy_error", energy_error);
            rows
        }
        Err(e) => {
            r.fail("crossings", e);
            Vec::new()
        }
    });
    report.stage("first_return", |r| {
        let recs = exec.map(&starts_ambient, |p| first_return(&sys, &sec, p, cfg.t_max, cfg.tol));
        match recs.into_iter().collect::<Result<Vec<_>, _>>() {
            Ok(recs) => {
                let e = recs.iter().map(|x| x.energy_error).fold(0.0, f64::max);
                r.check("energy_pinned", e < ROUND_TRIP_TOL, Some(e), Some(ROUND_TRIP_TOL), None);
                r.metric("max_return_time", recs.iter().map(|x| x.return_time).fold(0.0, f64::max));
            }
            Err(e) => r.fail("energy_pinned", e.to_string()),
        }
    });
    let us = section_starts(&sec, cfg, cfg.section_samples, 1);
    report.stage("jacobians", |r| record_return_stats(r, return_stats(&sys, &sec, &us, cfg, exec)));
    report.stage("submanifold", |r| section_submanifold(r, &sys, &sec, &us));
    write_crossings(out, &rows, &mut report)?;
    write_plot(out, &format!("return map, {}", sys.name), &rows, &mut report)?;
    Ok(report)
}
