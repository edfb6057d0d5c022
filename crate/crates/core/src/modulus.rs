//! Moduli of convexity `omega` and `rho` with their mutual bounds and
//! power-type fits. The sphere is also described locally as a graph.
//!
//! Both moduli reduce to one-parameter families of pairs: for `x` on the
//! sphere and a separation `c`, the point `y` at distance `c` along each arc
//! from `x` toward `-x` is unique because the distance grows monotonically on
//! that half arc. The sweep runs over atlas points, then the best few
//! candidates are refined continuously in the boundary angle.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryAtlas, PlanarNorm, Smoothness};
use crate::{golden_section_max, linear_fit, perp, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulusKind {
    Omega,
    Rho,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusOptions {
    /// atlas points visited by the sweep
    pub sweep_samples: usize,
    /// bins of the `rho` envelope on `(0, 2]`
    pub n_bins: usize,
    /// coarse minima refined by golden section
    pub refine: usize,
}

impl Default for ModulusOptions {
    fn default() -> Self {
        ModulusOptions {
            sweep_samples: 1024,
            n_bins: 256,
            refine: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusCurve {
    pub kind: ModulusKind,
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
}

impl ModulusCurve {
    /// `delta,value` rows with 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["delta", "value"]).map_err(csv_err)?;
        for (d, v) in self.deltas.iter().zip(&self.values) {
            w.write_record([format!("{d:.11e}"), format!("{v:.11e}")])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTypeFit {
    pub p_hat: f64,
    #[serde(rename = "K_hat")]
    pub k_hat: f64,
    pub r_squared: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

/// Point of the sphere at gauge distance `c` from `x = r(theta)` along the
/// half arc turning in direction `dir` (`+1` counterclockwise).
fn partner(norm: &PlanarNorm, theta: f64, x: Vec2, c: f64, dir: f64) -> Vec2 {
    if c >= 2.0 {
        return -x;
    }
    let g = |t: f64| norm.gauge(norm.radial_point(theta + dir * t) - x) - c;
    // Illinois regula falsi on a monotone bracket
    let (mut a, mut b) = (0.0, PI);
    let (mut fa, mut fb) = (-c, 2.0 - c);
    let mut side = 0i8;
    for _ in 0..200 {
        let t = (a * fb - b * fa) / (fb - fa);
        let t = if t > a && t < b { t } else { 0.5 * (a + b) };
        let ft = g(t);
        if ft == 0.0 {
            return norm.radial_point(theta + dir * t);
        }
        if ft < 0.0 {
            a = t;
            fa = ft;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = t;
            fb = ft;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a <= 1e-15 * b.max(1e-3) {
            break;
        }
    }
    norm.radial_point(theta + dir * 0.5 * (a + b))
}

/// Minimizes `f` over the sweep angles, then refines the best candidates.
fn sweep_min(angles: &[f64], refine: usize, f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let coarse: Vec<f64> = angles.par_iter().map(|t| f(*t)).collect();
    let mut order: Vec<usize> = (0..coarse.len()).collect();
    order.sort_by(|a, b| coarse[*a].total_cmp(&coarse[*b]));
    let n = angles.len();
    let step = 2.0 * PI / n as f64;
    let refined = order
        .iter()
        .take(refine)
        .map(|&i| {
            let t = angles[i];
            -golden_section_max(|s| -f(s), t - 1.5 * step, t + 1.5 * step, 1e-13).1
        })
        .fold(f64::INFINITY, f64::min);
    refined.min(coarse[order[0]])
}

fn sweep_angles(norm: &PlanarNorm, opts: &ModulusOptions) -> Result<Vec<f64>> {
    let atlas = BoundaryAtlas::new(norm, opts.sweep_samples)?;
    Ok(atlas.angles().to_vec())
}

fn omega_with(norm: &PlanarNorm, angles: &[f64], refine: usize, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let value = |t: f64| {
        let x = norm.radial_point(t);
        let y = partner(norm, t, x, delta, 1.0);
        1.0 - norm.gauge((x + y) * 0.5)
    };
    sweep_min(angles, refine, value).clamp(0.0, 1.0)
}

/// `inf { 1 - ||(x+y)/2|| : ||x|| = ||y|| = 1, ||x - y|| >= delta }`.
pub fn omega(norm: &PlanarNorm, delta: f64) -> Result<f64> {
    omega_with_options(norm, delta, &ModulusOptions::default())
}

pub fn omega_with_options(norm: &PlanarNorm, delta: f64, opts: &ModulusOptions) -> Result<f64> {
    let angles = sweep_angles(norm, opts)?;
    Ok(omega_with(norm, &angles, opts.refine, delta))
}

pub fn omega_curve(norm: &PlanarNorm, deltas: &[f64], opts: &ModulusOptions) -> Result<ModulusCurve> {
    let angles = sweep_angles(norm, opts)?;
    let values = deltas
        .iter()
        .map(|d| omega_with(norm, &angles, opts.refine, *d))
        .collect();
    Ok(ModulusCurve {
        kind: ModulusKind::Omega,
        deltas: deltas.to_vec(),
        values,
    })
}

/// Dual-normalized outward normals at `r(theta)`; both one-sided normals at
/// corners.
fn supporting_functionals(norm: &PlanarNorm, theta: f64, x: Vec2) -> Vec<Vec2> {
    let unit = |n: Vec2| n / norm.dual_norm(n);
    if norm.smoothness() == Smoothness::Corner {
        let eps = 1e-9;
        vec![
            unit(norm.unit_normal(norm.radial_point(theta - eps))),
            unit(norm.unit_normal(x)),
            unit(norm.unit_normal(norm.radial_point(theta + eps))),
        ]
    } else {
        vec![unit(norm.unit_normal(x))]
    }
}

/// `inf u.(x - y)` over `||y - x|| = c`, `u` a dual-normalized normal at `x`.
fn rho_raw(norm: &PlanarNorm, angles: &[f64], refine: usize, c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let value = |t: f64| {
        let x = norm.radial_point(t);
        let us = supporting_functionals(norm, t, x);
        [1.0, -1.0]
            .iter()
            .map(|dir| {
                let y = partner(norm, t, x, c, *dir);
                us.iter().map(|u| u.dot(&(x - y))).fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    };
    sweep_min(angles, refine, value).max(0.0)
}

/// Pairwise infimum of `rho` sampled on a fixed bin grid; the monotone
/// envelope of a query is taken against the bins above it.
pub struct RhoProfile {
    norm: PlanarNorm,
    angles: Vec<f64>,
    refine: usize,
    bins: Vec<f64>,
    /// `tail_min[k] = min_{j >= k} f(bins[j])`
    tail_min: Vec<f64>,
}

impl RhoProfile {
    pub fn new(norm: &PlanarNorm, opts: &ModulusOptions) -> Result<Self> {
        if opts.n_bins == 0 {
            return Err(Error::InvalidArgument("n_bins must be positive".into()));
        }
        let angles = sweep_angles(norm, opts)?;
        let width = 2.0 / opts.n_bins as f64;
        let bins: Vec<f64> = (1..=opts.n_bins).map(|k| k as f64 * width).collect();
        // the bin grid only bounds the envelope from above; refinement is spent
        // on the queried separations
        let coarse: Vec<f64> = angles.iter().step_by(4).cloned().collect();
        let raw: Vec<f64> = bins.iter().map(|c| rho_raw(norm, &coarse, 0, *c)).collect();
        let mut tail_min = raw.clone();
        for k in (0..tail_min.len().saturating_sub(1)).rev() {
            tail_min[k] = tail_min[k].min(tail_min[k + 1]);
        }
        Ok(RhoProfile {
            norm: norm.clone(),
            angles,
            refine: opts.refine,
            bins,
            tail_min,
        })
    }

    pub fn value(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let here = rho_raw(&self.norm, &self.angles, self.refine, delta);
        let k = self.bins.partition_point(|&b| b <= delta);
        match self.tail_min.get(k) {
            Some(m) => here.min(*m),
            None => here,
        }
    }

    pub fn curve(&self, deltas: &[f64]) -> ModulusCurve {
        let mut values: Vec<f64> = deltas.iter().map(|d| self.value(*d)).collect();
        // envelope across the queried points too (deltas need not be sorted)
        let mut order: Vec<usize> = (0..deltas.len()).collect();
        order.sort_by(|a, b| deltas[*a].total_cmp(&deltas[*b]));
        let mut running = f64::INFINITY;
        for &i in order.iter().rev() {
            running = running.min(values[i]);
            values[i] = running;
        }
        ModulusCurve {
            kind: ModulusKind::Rho,
            deltas: deltas.to_vec(),
            values,
        }
    }
}

/// Greatest nondecreasing `rho` with `u.(x - y) >= ||u||_* rho(||y - x||)`.
pub fn rho(norm: &PlanarNorm, delta: f64) -> Result<f64> {
    Ok(RhoProfile::new(norm, &ModulusOptions::default())?.value(delta))
}

pub fn rho_curve(norm: &PlanarNorm, deltas: &[f64], opts: &ModulusOptions) -> Result<ModulusCurve> {
    Ok(RhoProfile::new(norm, opts)?.curve(deltas))
}

pub const SANDWICH_SLACK: f64 = 1e-3;
pub const NORDLANDER_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichRow {
    pub delta: f64,
    pub omega: f64,
    pub rho_half: f64,
    pub rho: f64,
    /// `omega(d) - rho(d/2)`
    pub lower_margin: f64,
    /// `rho(d)/2 - omega(d)`
    pub upper_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub slack: f64,
    pub rows: Vec<SandwichRow>,
    pub passed: bool,
}

/// `rho(d/2) <= omega(d) <= rho(d)/2` on every `d`, up to `SANDWICH_SLACK`.
pub fn sandwich_check(norm: &PlanarNorm, deltas: &[f64], opts: &ModulusOptions) -> Result<SandwichReport> {
    let profile = RhoProfile::new(norm, opts)?;
    let angles = sweep_angles(norm, opts)?;
    let rows: Vec<SandwichRow> = deltas
        .iter()
        .map(|&d| {
            let omega = omega_with(norm, &angles, opts.refine, d);
            let rho_half = profile.value(d / 2.0);
            let rho = profile.value(d);
            SandwichRow {
                delta: d,
                omega,
                rho_half,
                rho,
                lower_margin: omega - rho_half,
                upper_margin: rho / 2.0 - omega,
            }
        })
        .collect();
    let passed = rows
        .iter()
        .all(|r| r.lower_margin >= -SANDWICH_SLACK && r.upper_margin >= -SANDWICH_SLACK);
    Ok(SandwichReport {
        slack: SANDWICH_SLACK,
        rows,
        passed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NordlanderRow {
    pub delta: f64,
    pub omega: f64,
    pub omega_euclidean: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NordlanderReport {
    pub slack: f64,
    pub rows: Vec<NordlanderRow>,
    pub passed: bool,
}

/// `omega_B <= omega_2`, both computed by the same pipeline.
pub fn nordlander_check(norm: &PlanarNorm, deltas: &[f64], opts: &ModulusOptions) -> Result<NordlanderReport> {
    let own = omega_curve(norm, deltas, opts)?;
    let reference = omega_curve(&PlanarNorm::euclidean(), deltas, opts)?;
    let rows: Vec<NordlanderRow> = deltas
        .iter()
        .enumerate()
        .map(|(i, &d)| NordlanderRow {
            delta: d,
            omega: own.values[i],
            omega_euclidean: reference.values[i],
            margin: reference.values[i] - own.values[i],
        })
        .collect();
    let passed = rows.iter().all(|r| r.margin >= -NORDLANDER_SLACK);
    Ok(NordlanderReport {
        slack: NORDLANDER_SLACK,
        rows,
        passed,
    })
}

pub const MIN_FIT_POINTS: usize = 8;
pub const FIT_FLOOR: f64 = 1e-12;

/// Least squares on `(log delta, log value)` over samples in the range with
/// values above `FIT_FLOOR`.
pub fn fit_power_type(curve: &ModulusCurve, delta_range: (f64, f64)) -> Result<PowerTypeFit> {
    let (lo, hi) = delta_range;
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .deltas
        .iter()
        .zip(&curve.values)
        .filter(|(d, v)| **d >= lo && **d <= hi && **v > FIT_FLOOR)
        .map(|(d, v)| (d.ln(), v.ln()))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateModulus { positive: xs.len() });
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(PowerTypeFit {
        p_hat: slope,
        k_hat: intercept.exp(),
        r_squared: r2,
        delta_min: xs.iter().cloned().fold(f64::INFINITY, f64::min).exp(),
        delta_max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp(),
    })
}

/// `n` log-spaced separations on `[lo, hi]`.
pub fn log_deltas(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// The sphere near `x` written as `x + a tau + b nu` with `nu` the inner
/// normal.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalGraph {
    pub base: [f64; 2],
    pub tangent: [f64; 2],
    pub inner_normal: [f64; 2],
    pub samples: Vec<(f64, f64)>,
}

pub const GRAPH_SAMPLES: usize = 401;

/// Samples the boundary for boundary angles within `window` of `x`.
pub fn local_graph(norm: &PlanarNorm, x: Vec2, window: f64) -> Result<LocalGraph> {
    if !norm.is_smooth_strictly_convex() {
        return Err(Error::NotSmooth("local graphs need a single normal".into()));
    }
    if window > PI / 2.0 {
        return Err(Error::WindowTooLarge { window });
    }
    if window <= 0.0 {
        return Err(Error::InvalidArgument(format!("window must be positive, got {window}")));
    }
    let x = norm.radial_project(x)?;
    let theta = x.y.atan2(x.x);
    let n = norm.unit_normal(x);
    let (tau, nu) = (perp(n), -n);
    let half = (GRAPH_SAMPLES / 2) as f64;
    let samples = (0..GRAPH_SAMPLES)
        .map(|k| {
            let t = theta + window * (k as f64 - half) / half;
            let d = norm.radial_point(t) - x;
            (d.dot(&tau), d.dot(&nu))
        })
        .collect();
    Ok(LocalGraph {
        base: [x.x, x.y],
        tangent: [tau.x, tau.y],
        inner_normal: [nu.x, nu.y],
        samples,
    })
}

/// `b >= C |a|^p` on every sample.
pub fn graph_power_check(g: &LocalGraph, p: f64, c: f64) -> bool {
    g.samples.iter().all(|(a, b)| *b >= c * a.abs().powf(p) - 1e-14)
}

/// Curvature of the circle through the atlas point nearest `x` and its two
/// neighbours.
pub fn curvature(atlas: &BoundaryAtlas, x: Vec2) -> Result<f64> {
    if atlas.norm().smoothness() == Smoothness::Corner {
        return Err(Error::NotSmooth(
            "curvature of a boundary with corners is a measure".into(),
        ));
    }
    let i = atlas.segment_at_angle(x.y.atan2(x.x));
    let pts = atlas.points();
    let j = if (pts[(i + 1) % pts.len()] - x).norm() < (pts[i] - x).norm() {
        (i + 1) % pts.len()
    } else {
        i
    };
    Ok(circumcurvature(atlas, j))
}

fn circumcurvature(atlas: &BoundaryAtlas, i: usize) -> f64 {
    let pts = atlas.points();
    let n = pts.len();
    let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
    let area2 = crate::cross(b - a, c - a).abs();
    2.0 * area2 / ((b - a).norm() * (c - b).norm() * (c - a).norm())
}

pub const ELLIPTIC_THRESHOLD: f64 = 1e-3;

/// Minimum discrete curvature over a default atlas.
pub fn min_curvature(norm: &PlanarNorm) -> Result<f64> {
    let atlas = BoundaryAtlas::new(norm, crate::geometry::DEFAULT_SAMPLES)?;
    if norm.smoothness() == Smoothness::Corner {
        return Err(Error::NotSmooth(
            "curvature of a boundary with corners is a measure".into(),
        ));
    }
    Ok((0..atlas.len())
        .map(|i| circumcurvature(&atlas, i))
        .fold(f64::INFINITY, f64::min))
}

pub fn elliptic_check(norm: &PlanarNorm) -> Result<bool> {
    Ok(min_curvature(norm)? > ELLIPTIC_THRESHOLD)
}
