//! Averaging formula on the rotated sphere:
//! `x = 1/2 sum_i 1{x.s_i > 0} n_i dl_i` over the segments of a polyline of
//! `dB^perp`, with `n_i dl_i = R^{-1}(P_{i+1} - P_i)`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryAtlas, NormSpec, PlanarNorm};
use crate::{cross, perp, perp_inv, Vec2};

/// Quadrature of `dH^1` on a closed counterclockwise polyline.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    vertices: Vec<Vec2>,
    /// polar angle of each vertex, increasing from `angles[0]`
    angles: Vec<f64>,
    midpoints: Vec<Vec2>,
    weights: Vec<f64>,
    normals: Vec<Vec2>,
    is_perp: bool,
    quad_tol: f64,
    /// gauge of the curve's body, when it is a norm ball
    atlas: Option<BoundaryAtlas>,
}

pub fn default_quad_tol(n_samples: usize) -> f64 {
    (10.0 / n_samples as f64).max(1e-6)
}

impl QuadratureRule {
    /// Rule on `dB^perp` from an atlas of `dB`.
    pub fn from_atlas(atlas: &BoundaryAtlas) -> Self {
        let rotated = if atlas.is_perp() { atlas.clone() } else { atlas.atlas_perp() };
        let mut rule = Self::from_polyline(rotated.points().to_vec(), true);
        rule.atlas = Some(rotated);
        rule
    }

    pub fn new(norm: &PlanarNorm, n_samples: usize) -> Result<Self> {
        Ok(Self::from_atlas(&BoundaryAtlas::new(norm, n_samples)?))
    }

    /// Rule on an arbitrary closed polyline, star-shaped around the origin
    /// and listed counterclockwise.
    pub fn from_polyline(vertices: Vec<Vec2>, is_perp: bool) -> Self {
        let n = vertices.len();
        let a0 = vertices[0].y.atan2(vertices[0].x);
        let angles = vertices
            .iter()
            .map(|v| a0 + (v.y.atan2(v.x) - a0).rem_euclid(TAU))
            .collect();
        let mut midpoints = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let d = b - a;
            let len = d.norm();
            midpoints.push((a + b) * 0.5);
            weights.push(len);
            normals.push(perp_inv(d) / len);
        }
        QuadratureRule {
            vertices,
            angles,
            midpoints,
            weights,
            normals,
            is_perp,
            quad_tol: default_quad_tol(n),
            atlas: None,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_perp(&self) -> bool {
        self.is_perp
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    pub fn midpoints(&self) -> &[Vec2] {
        &self.midpoints
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_i n_i dl_i`; zero on a closed curve.
    pub fn normal_integral(&self) -> Vec2 {
        self.normals
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| n * *w)
            .sum()
    }

    /// `1/2 sum_i 1{x.s > 0} n_i dl_i`, splitting the two sign-change
    /// segments at their zero crossings.
    pub fn reconstruct_point(&self, x: Vec2) -> Vec2 {
        let n = self.len();
        let mut acc = Vec2::zeros();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let (fa, fb) = (x.dot(&a), x.dot(&b));
            if fa > 0.0 && fb > 0.0 {
                acc += perp_inv(b - a);
            } else if (fa > 0.0) != (fb > 0.0) {
                let z = a + (b - a) * (fa / (fa - fb));
                acc += if fa > 0.0 { perp_inv(z - a) } else { perp_inv(b - z) };
            }
        }
        acc * 0.5
    }

    /// Position of a point on the polyline as (segment, chord point) along
    /// the ray through it.
    fn locate(&self, u: Vec2) -> (usize, Vec2) {
        let n = self.len();
        let a0 = self.angles[0];
        let t = a0 + (u.y.atan2(u.x) - a0).rem_euclid(TAU);
        let k = self.angles.partition_point(|&a| a <= t);
        let i = (k + n - 1) % n;
        let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
        // intersection of the ray through u with the chord [a, b]
        let d = b - a;
        let denom = cross(u, d);
        let z = if denom.abs() < 1e-300 { a } else { u * (cross(a, d) / denom) };
        (i, z)
    }

    /// Quadrature of `1/2 n dH^1` over the counterclockwise arc `]u, v]`.
    pub fn arc_measure(&self, u: Vec2, v: Vec2) -> Result<Vec2> {
        if let Some(atlas) = &self.atlas {
            for p in [u, v] {
                let defect = (atlas.gauge(p) - 1.0).abs();
                if defect > atlas.tol() {
                    return Err(Error::NotOnBoundary {
                        x: p.x,
                        y: p.y,
                        defect,
                    });
                }
            }
        }
        let n = self.len();
        let (i, zu) = self.locate(u);
        let (j, zv) = self.locate(v);
        let next = |k: usize| self.vertices[(k + 1) % n];
        let forward = {
            let a0 = self.angles[0];
            let tu = a0 + (u.y.atan2(u.x) - a0).rem_euclid(TAU);
            let tv = a0 + (v.y.atan2(v.x) - a0).rem_euclid(TAU);
            tv >= tu
        };
        if i == j && forward {
            return Ok(perp_inv(zv - zu) * 0.5);
        }
        let mut acc = perp_inv(next(i) - zu);
        let mut k = (i + 1) % n;
        while k != j {
            acc += self.normals[k] * self.weights[k];
            k = (k + 1) % n;
        }
        acc += perp_inv(zv - self.vertices[j]);
        Ok(acc * 0.5)
    }

    /// Measure of the whole curve.
    pub fn total_measure(&self) -> Vec2 {
        self.normal_integral() * 0.5
    }

    /// `1/2 sum_i chi(x, i) n_i dl_i` at every point.
    pub fn reconstruct_field<C>(&self, points: &[Vec2], chi: C) -> Vec<Vec2>
    where
        C: Fn(Vec2, usize) -> bool + Sync,
    {
        points
            .par_iter()
            .map(|x| {
                let mut acc = Vec2::zeros();
                for i in 0..self.len() {
                    if chi(*x, i) {
                        acc += self.normals[i] * self.weights[i];
                    }
                }
                acc * 0.5
            })
            .collect()
    }
}

/// `F = 1/2 R^{-1}`, the primitive of the measure along the curve.
pub fn arc_primitive(u: Vec2, v: Vec2) -> Vec2 {
    perp_inv(v - u) * 0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointResidual {
    pub x: [f64; 2],
    pub reconstructed: [f64; 2],
    pub error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub n_samples: usize,
    pub quad_tol: f64,
    pub max_error: f64,
    pub mean_error: f64,
    pub points: Vec<PointResidual>,
}

/// Reconstruction of `n_points` random boundary points of `norm`.
pub fn reconstruction_report(
    norm: &PlanarNorm,
    n_samples: usize,
    n_points: usize,
    seed: u64,
) -> Result<ReconstructionReport> {
    let rule = QuadratureRule::new(norm, n_samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec2> = (0..n_points)
        .map(|_| norm.radial_point(rng.random_range(0.0..TAU)))
        .collect();
    let points: Vec<PointResidual> = xs
        .par_iter()
        .map(|x| {
            let r = rule.reconstruct_point(*x);
            PointResidual {
                x: [x.x, x.y],
                reconstructed: [r.x, r.y],
                error: (r - x).norm(),
            }
        })
        .collect();
    let max_error = points.iter().map(|p| p.error).fold(0.0, f64::max);
    let mean_error = points.iter().map(|p| p.error).sum::<f64>() / points.len().max(1) as f64;
    Ok(ReconstructionReport {
        n_samples,
        quad_tol: rule.quad_tol(),
        max_error,
        mean_error,
        points,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArcReport {
    pub n_arcs: usize,
    pub quad_tol: f64,
    /// `max |mu(]u,v]) - 1/2 R^{-1}(v - u)|`
    pub max_primitive_error: f64,
    /// `max |mu(-A) + mu(A)|`
    pub max_antisymmetry_error: f64,
    pub passed: bool,
}

/// Random arcs of `dB^perp` checked against the primitive and against
/// their antipodal arcs.
pub fn arc_report(norm: &PlanarNorm, n_samples: usize, n_arcs: usize, seed: u64) -> Result<ArcReport> {
    let rule = QuadratureRule::new(norm, n_samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arcs: Vec<(Vec2, Vec2)> = (0..n_arcs)
        .map(|_| {
            let a = rng.random_range(0.0..TAU);
            let b = rng.random_range(0.0..TAU);
            (perp(norm.radial_point(a)), perp(norm.radial_point(b)))
        })
        .collect();
    let mut prim = 0.0f64;
    let mut anti = 0.0f64;
    for (u, v) in arcs {
        let m = rule.arc_measure(u, v)?;
        prim = prim.max((m - arc_primitive(u, v)).norm());
        let mm = rule.arc_measure(-u, -v)?;
        anti = anti.max((m + mm).norm());
    }
    let tol = rule.quad_tol();
    Ok(ArcReport {
        n_arcs,
        quad_tol: tol,
        max_primitive_error: prim,
        max_antisymmetry_error: anti,
        passed: prim <= tol && anti <= tol,
    })
}

/// Largest reconstruction residual over `n_points` boundary points of the
/// translated body `B + offset`; large when the body is not symmetric.
pub fn nonsymmetric_residual(
    norm: &PlanarNorm,
    offset: Vec2,
    n_samples: usize,
    n_points: usize,
) -> Result<f64> {
    let atlas = BoundaryAtlas::new(norm, n_samples)?;
    let shifted: Vec<Vec2> = atlas.points().iter().map(|p| perp(p + offset)).collect();
    let rule = QuadratureRule::from_polyline(shifted, true);
    Ok((0..n_points)
        .map(|k| {
            let x = norm.radial_point(TAU * k as f64 / n_points as f64) + offset;
            (rule.reconstruct_point(x) - x).norm()
        })
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AveragingReport {
    pub norm: NormSpec,
    pub reconstruction: ReconstructionReport,
    pub arcs: ArcReport,
    pub total_measure: [f64; 2],
    pub passed: bool,
}

pub fn verify_averaging(norm: &PlanarNorm, n_samples: usize, n_points: usize, seed: u64) -> Result<AveragingReport> {
    let reconstruction = reconstruction_report(norm, n_samples, n_points, seed)?;
    let arcs = arc_report(norm, n_samples, n_points, seed)?;
    let total = QuadratureRule::new(norm, n_samples)?.total_measure();
    let passed = reconstruction.max_error <= reconstruction.quad_tol
        && arcs.passed
        && total.norm() <= reconstruction.quad_tol;
    Ok(AveragingReport {
        norm: norm.spec().clone(),
        reconstruction,
        arcs,
        total_measure: [total.x, total.y],
        passed,
    })
}
