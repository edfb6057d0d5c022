//! Oriented polyline discretization of the unit sphere of a norm.
//!
//! Points are placed radially, `r(theta) = e(theta) / ||e(theta)||`, on a
//! uniform angle grid; known corner points are inserted exactly. Normals are
//! evaluated pointwise from the gauge gradient (corner convention: angular
//! midpoint of the adjacent normals) and tangents are the normals turned by
//! `+pi/2`, so the polyline is counterclockwise with outward normals.
//!
//! An atlas may be rotated by quarter turns (`atlas_perp`); an odd number of
//! turns describes the rotated body `B^perp`. Pointwise queries map back to
//! the base norm.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;

use super::norm::PlanarNorm;
use crate::error::{Error, Result};
use crate::{cross, perp, Vec2};

/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 64;
pub const DEFAULT_SAMPLES: usize = 4096;
pub const DEFAULT_ATLAS_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BoundaryAtlas {
    norm: PlanarNorm,
    quarter_turns: u8,
    /// polar angle of each point, increasing, spanning less than one turn
    angles: Vec<f64>,
    points: Vec<Vec2>,
    tangents: Vec<Vec2>,
    normals: Vec<Vec2>,
    /// `cum_arclength[i]` is the polyline length from point 0 to point i;
    /// the last entry (index `len`) is the perimeter.
    cum_arclength: Vec<f64>,
    tol: f64,
}

fn rotate(x: Vec2, quarter_turns: u8) -> Vec2 {
    match quarter_turns % 4 {
        0 => x,
        1 => perp(x),
        2 => -x,
        _ => -perp(x),
    }
}

impl BoundaryAtlas {
    pub fn new(norm: &PlanarNorm, n_samples: usize) -> Result<Self> {
        Self::with_tol(norm, n_samples, DEFAULT_ATLAS_TOL)
    }

    pub fn with_tol(norm: &PlanarNorm, n_samples: usize, tol: f64) -> Result<Self> {
        if n_samples < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                min: MIN_SAMPLES,
                got: n_samples,
            });
        }
        let step = TAU / n_samples as f64;
        let mut nodes: Vec<(f64, Option<Vec2>)> =
            (0..n_samples).map(|i| (i as f64 * step, None)).collect();
        for c in norm.corner_points() {
            let t = c.y.atan2(c.x).rem_euclid(TAU);
            nodes.push((t, Some(c)));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        // a corner replaces any grid angle that collides with it
        let mut merged: Vec<(f64, Option<Vec2>)> = Vec::with_capacity(nodes.len());
        for node in nodes {
            match merged.last_mut() {
                Some(last) if (node.0 - last.0).abs() < 1e-12 => {
                    if node.1.is_some() {
                        *last = node;
                    }
                }
                _ => merged.push(node),
            }
        }
        if let (Some(first), Some(last)) = (merged.first(), merged.last()) {
            if first.0 + TAU - last.0 < 1e-12 {
                let tail = merged.pop().expect("nonempty");
                if tail.1.is_some() {
                    merged[0] = (tail.0 - TAU, tail.1);
                }
            }
        }
        let angles: Vec<f64> = merged.iter().map(|m| m.0).collect();
        let points: Vec<Vec2> = merged
            .par_iter()
            .map(|(t, c)| c.unwrap_or_else(|| norm.radial_point(*t)))
            .collect();
        let normals: Vec<Vec2> = points.par_iter().map(|p| norm.unit_normal(*p)).collect();
        let tangents = normals.iter().map(|n| perp(*n)).collect();
        let cum_arclength = cumulative_length(&points);
        Ok(BoundaryAtlas {
            norm: norm.clone(),
            quarter_turns: 0,
            angles,
            points,
            tangents,
            normals,
            cum_arclength,
            tol,
        })
    }

    pub fn norm(&self) -> &PlanarNorm {
        &self.norm
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn tangents(&self) -> &[Vec2] {
        &self.tangents
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn cum_arclength(&self) -> &[f64] {
        &self.cum_arclength
    }

    pub fn perimeter(&self) -> f64 {
        *self.cum_arclength.last().expect("atlas has points")
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_perp(&self) -> bool {
        self.quarter_turns % 2 == 1
    }

    pub fn quarter_turns(&self) -> u8 {
        self.quarter_turns
    }

    /// Gauge of the (possibly rotated) body described by this atlas.
    pub fn gauge(&self, x: Vec2) -> f64 {
        self.norm.gauge(rotate(x, 4 - self.quarter_turns % 4))
    }

    /// Signed area of the polyline (positive for counterclockwise).
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| cross(self.points[i], self.points[(i + 1) % n]))
            .sum::<f64>()
            / 2.0
    }

    /// Index of the segment `[i, i+1]` whose polar angles bracket `theta`.
    pub fn segment_at_angle(&self, theta: f64) -> usize {
        let a0 = self.angles[0];
        let t = a0 + (theta - a0).rem_euclid(TAU);
        let k = self.angles.partition_point(|&a| a <= t);
        (k + self.len() - 1) % self.len()
    }

    /// Rotates the atlas by `+pi/2`: an atlas of `B^perp` from one of `B`.
    pub fn atlas_perp(&self) -> BoundaryAtlas {
        let turns = (self.quarter_turns + 1) % 4;
        BoundaryAtlas {
            norm: self.norm.clone(),
            quarter_turns: turns,
            angles: self.angles.iter().map(|a| a + FRAC_PI_2).collect(),
            points: self.points.iter().map(|p| perp(*p)).collect(),
            tangents: self.tangents.iter().map(|p| perp(*p)).collect(),
            normals: self.normals.iter().map(|p| perp(*p)).collect(),
            cum_arclength: self.cum_arclength.clone(),
            tol: self.tol,
        }
    }

    fn check_on_boundary(&self, x: Vec2) -> Result<()> {
        let defect = (self.gauge(x) - 1.0).abs();
        if defect > self.tol {
            return Err(Error::NotOnBoundary {
                x: x.x,
                y: x.y,
                defect,
            });
        }
        Ok(())
    }

    /// Outward unit normal at a boundary point.
    pub fn normal_at(&self, x: Vec2) -> Result<Vec2> {
        self.check_on_boundary(x)?;
        let back = rotate(x, 4 - self.quarter_turns % 4);
        Ok(rotate(self.norm.unit_normal(back), self.quarter_turns))
    }

    /// The boundary point whose outward normal is the unit vector `u`.
    ///
    /// Brackets `u` between consecutive atlas normals (normals turn
    /// monotonically along a strictly convex C1 boundary), then bisects on the
    /// boundary angle inside the bracket.
    pub fn inverse_normal(&self, u: Vec2) -> Result<Vec2> {
        if !self.norm.is_smooth_strictly_convex() {
            return Err(Error::NotSmooth(
                "the inverse normal map is set valued for this norm".into(),
            ));
        }
        let n = self.len();
        let target = u.y.atan2(u.x);
        // unwrapped normal angles, increasing along the atlas
        let psi0 = self.normals[0].y.atan2(self.normals[0].x);
        let target = psi0 + (target - psi0).rem_euclid(TAU);
        let psi = |i: usize| {
            let m = &self.normals[i];
            psi0 + (m.y.atan2(m.x) - psi0).rem_euclid(TAU)
        };
        // first index with psi >= target (psi(0) = psi0 <= target)
        let (mut lo, mut hi) = (0usize, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if psi(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_lo = self.angles[lo];
        let t_hi = if hi == n { self.angles[0] + TAU } else { self.angles[hi] };
        let base_turn = self.quarter_turns as f64 * FRAC_PI_2;
        let ub = rotate(u, 4 - self.quarter_turns % 4);
        let offset = |t: f64| {
            let m = self.norm.unit_normal(self.norm.radial_point(t - base_turn));
            cross(ub, m).atan2(ub.dot(&m))
        };
        let (mut a, mut b) = (t_lo, t_hi);
        for _ in 0..200 {
            if b - a <= 1e-15 {
                break;
            }
            let mid = 0.5 * (a + b);
            if offset(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let t = 0.5 * (a + b);
        Ok(rotate(self.norm.radial_point(t - base_turn), self.quarter_turns))
    }
}

fn cumulative_length(points: &[Vec2]) -> Vec<f64> {
    let n = points.len();
    let mut cum = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for i in 0..n {
        acc += (points[(i + 1) % n] - points[i]).norm();
        cum.push(acc);
    }
    cum
}

/// Convex cone `{l1 u + l2 v : l1, l2 >= 0}` of two non-collinear generators.
#[derive(Clone, Copy, Debug)]
pub struct Cone {
    u: Vec2,
    v: Vec2,
}

impl Cone {
    pub fn new(u: Vec2, v: Vec2) -> Result<Self> {
        if u == Vec2::zeros() || v == Vec2::zeros() {
            return Err(Error::InvalidArgument("cone generators must be nonzero".into()));
        }
        if cross(u, v).abs() <= 1e-14 * u.norm() * v.norm() {
            return Err(Error::InvalidArgument("cone generators are collinear".into()));
        }
        Ok(Cone { u, v })
    }

    /// Membership with coefficients allowed down to `-1e-12`.
    pub fn contains(&self, w: Vec2) -> bool {
        let det = cross(self.u, self.v);
        let l1 = cross(w, self.v) / det;
        let l2 = cross(self.u, w) / det;
        l1 >= -1e-12 && l2 >= -1e-12
    }
}
