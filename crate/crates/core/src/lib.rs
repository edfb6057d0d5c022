//! Convexity geometry of planar norms and numerical checks for curl-free,
//! unit-norm vector fields satisfying a kinetic (transport) constraint.
//!
//! Layout
//! - [`geometry`]: norms, gauges, duals, boundary atlases, normal maps, cones.
//! - [`modulus`]: the two moduli of convexity with power-type fits and
//!   curvature checks.
//! - [`vortex`] and [`holder`]: vortex fields and Hölder exponent estimation.
//! - [`averaging`]: the averaging formula over the rotated sphere.
//! - [`grid`]: sampled fields and their file format.
//! - [`kinetic`]: weak-form residuals of the kinetic and curl-free constraints.
//! - [`analysis`]: traces on sampled fields and singularity detection.
//! - [`cli`]: the command-line front end.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod averaging;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod holder;
pub mod kinetic;
pub mod modulus;
pub mod vortex;

pub use error::{Error, Result};
pub use geometry::{BoundaryAtlas, Cone, NormSpec, PlanarNorm, Smoothness};

/// Plane vectors.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Rotation by `+pi/2`.
#[inline]
pub fn perp(x: Vec2) -> Vec2 {
    Vec2::new(-x.y, x.x)
}

/// Rotation by `-pi/2`.
#[inline]
pub fn perp_inv(x: Vec2) -> Vec2 {
    Vec2::new(x.y, -x.x)
}

#[inline]
pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub(crate) fn to_arr(x: Vec2) -> [f64; 2] {
    [x.x, x.y]
}

/// Maximizes a unimodal `f` on `[a, b]`; returns `(argmax, max)`.
pub(crate) fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut iters = 0;
    while hi - lo > tol && iters < 200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
        iters += 1;
    }
    let (fa, fb) = (f(a), f(b));
    let (xm, fm) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if fa > fm && fa >= fb {
        (a, fa)
    } else if fb > fm {
        (b, fb)
    } else {
        (xm, fm)
    }
}

/// Ordinary least squares `y = slope * x + intercept`; returns
/// `(slope, intercept, r_squared)`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_max() {
        let (x, fx) = golden_section_max(|t| -(t - 0.3).powi(2), -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(fx.abs() < 1e-12);
    }

    #[test]
    fn golden_handles_endpoint_max() {
        let (x, _) = golden_section_max(|t| t, 0.0, 1.0, 1e-12);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, c, r2) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12 && r2 > 0.999_999);
    }

    #[test]
    fn rotations_are_inverse() {
        let x = Vec2::new(0.3, -1.7);
        assert_eq!(perp_inv(perp(x)), x);
        assert_eq!(perp(perp(x)), -x);
    }
}
