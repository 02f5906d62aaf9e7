//! Monte-Carlo phase-volume transport estimates.

use serde::Serialize;

use super::{flow_unreduced, HamiltonianSystem, PhaseError};
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeReport {
    pub samples: usize,
    pub original_volume: f64,
    pub image_volume: f64,
    pub relative_error: f64,
}

/// Stratified grid of `per_axis^d` cell centres in the box `[lo, hi]`.
fn grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|k| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    lo[k] + (hi[k] - lo[k]) * (i as f64 + 0.5) / per_axis as f64
                })
                .collect()
        })
        .collect()
}

/// Volume of the time-`t` image of the box `[lo, hi]`.
///
/// The box is sampled on a stratified grid and flowed forward to find a
/// bounding box of the image. That bounding box is then sampled on a grid of
/// the same size, each sample flowed back by `-t`, and the image volume is the
/// hit fraction inside the original box times the bounding-box volume.
pub fn volume_transport(
    sys: &HamiltonianSystem,
    lo: &[f64],
    hi: &[f64],
    t: f64,
    per_axis: usize,
    tol: f64,
    exec: Execution,
) -> Result<VolumeReport, PhaseError> {
    let d = sys.dim();
    if lo.len() != d || hi.len() != d || lo.iter().zip(hi).any(|(a, b)| a >= b) {
        return Err(PhaseError::InvalidChart("volume box must be non-empty and match the chart".into()));
    }
    let forward: Result<Vec<Vec<f64>>, PhaseError> =
        exec.map(&grid(lo, hi, per_axis), |p| flow_unreduced(sys, p, t, tol)).into_iter().collect();
    let forward = forward?;
    let mut img_lo = vec![f64::INFINITY; d];
    let mut img_hi = vec![f64::NEG_INFINITY; d];
    for p in &forward {
        for k in 0..d {
            img_lo[k] = img_lo[k].min(p[k]);
            img_hi[k] = img_hi[k].max(p[k]);
        }
    }
    // pad by one box cell so the image boundary is inside
    for k in 0..d {
        let pad = 0.05 * (img_hi[k] - img_lo[k]) + (hi[k] - lo[k]) / per_axis as f64;
        img_lo[k] -= pad;
        img_hi[k] += pad;
    }
    let probes = grid(&img_lo, &img_hi, per_axis);
    let hits: Result<Vec<bool>, PhaseError> = exec
        .map(&probes, |q| {
            let back = flow_unreduced(sys, q, -t, tol)?;
            Ok(back.iter().enumerate().all(|(k, x)| *x >= lo[k] && *x <= hi[k]))
        })
        .into_iter()
        .collect();
    let hits = hits?.into_iter().filter(|&h| h).count();
    let bbox: f64 = (0..d).map(|k| img_hi[k] - img_lo[k]).product();
    let original: f64 = (0..d).map(|k| hi[k] - lo[k]).product();
    let image = bbox * hits as f64 / probes.len() as f64;
    Ok(VolumeReport {
        samples: probes.len(),
        original_volume: original,
        image_volume: image,
        relative_error: (image - original).abs() / original,
    })
}

/// Area of the convex hull of planar points (monotone chain).
pub fn convex_hull_area(points: &[[f64; 2]]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    let n = hull.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        .abs()
}
