//! Evaluable planar norms built from a [`NormSpec`].

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::spec::NormSpec;
use crate::error::{Error, Result};
use crate::{golden_section_max, Vec2};

/// Samples used for tables that back numeric support evaluation and the
/// euclidean equivalence constants.
const TABLE_SAMPLES: usize = 4096;

/// Relative tolerance under which two active pieces of a max-type norm are
/// considered tied (the point sits at a corner).
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    C1,
    #[serde(rename = "corner")]
    Corner,
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::C1 => f.write_str("C1"),
            Smoothness::Corner => f.write_str("corner"),
        }
    }
}

/// A symmetric norm on the plane. Cheap to clone.
#[derive(Clone)]
pub struct PlanarNorm(Arc<Inner>);

struct Inner {
    spec: NormSpec,
    kind: Kind,
    smoothness: Smoothness,
    strictly_convex: bool,
    c_low: f64,
    c_high: f64,
}

enum Kind {
    Euclidean,
    Lp(f64),
    Polygon(Polygon),
    Sum(Vec<PlanarNorm>, SupportTable),
    Dual(PlanarNorm),
    Scaled(f64, PlanarNorm),
}

impl fmt::Debug for PlanarNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarNorm")
            .field("spec", &self.0.spec)
            .field("smoothness", &self.0.smoothness)
            .field("strictly_convex", &self.0.strictly_convex)
            .finish()
    }
}

impl PlanarNorm {
    pub fn new(spec: &NormSpec) -> Result<Self> {
        spec.validate()?;
        let (kind, smoothness, strictly_convex) = match spec {
            NormSpec::Euclidean => (Kind::Euclidean, Smoothness::C1, true),
            NormSpec::Lp { p } => {
                let smooth = *p > 1.0 && p.is_finite();
                let flag = if smooth { Smoothness::C1 } else { Smoothness::Corner };
                (Kind::Lp(*p), flag, smooth)
            }
            NormSpec::Polygon { vertices } => {
                (Kind::Polygon(Polygon::new(vertices)?), Smoothness::Corner, false)
            }
            NormSpec::Sum { terms } => {
                let terms = terms.iter().map(PlanarNorm::new).collect::<Result<Vec<_>>>()?;
                let smooth = terms.iter().all(|t| t.smoothness() == Smoothness::C1);
                let strict = terms.iter().any(PlanarNorm::is_strictly_convex);
                let table = SupportTable::build(|x| terms.iter().map(|t| t.gauge(x)).sum());
                let flag = if smooth { Smoothness::C1 } else { Smoothness::Corner };
                (Kind::Sum(terms, table), flag, strict)
            }
            NormSpec::Dual { of } => {
                let inner = PlanarNorm::new(of)?;
                // duality swaps smoothness and strict convexity
                let flag = if inner.is_strictly_convex() {
                    Smoothness::C1
                } else {
                    Smoothness::Corner
                };
                let strict = inner.smoothness() == Smoothness::C1;
                (Kind::Dual(inner), flag, strict)
            }
            NormSpec::Scaled { factor, of } => {
                let inner = PlanarNorm::new(of)?;
                let (flag, strict) = (inner.smoothness(), inner.is_strictly_convex());
                (Kind::Scaled(*factor, inner), flag, strict)
            }
        };
        let mut inner = Inner {
            spec: spec.clone(),
            kind,
            smoothness,
            strictly_convex,
            c_low: 0.0,
            c_high: 0.0,
        };
        let (lo, hi) = equivalence_constants(|x| inner.gauge(x));
        inner.c_low = lo;
        inner.c_high = hi;
        Ok(PlanarNorm(Arc::new(inner)))
    }

    pub fn euclidean() -> Self {
        Self::new(&NormSpec::Euclidean).expect("euclidean norm is valid")
    }

    pub fn lp(p: f64) -> Result<Self> {
        Self::new(&NormSpec::lp(p))
    }

    pub fn spec(&self) -> &NormSpec {
        &self.0.spec
    }

    pub fn smoothness(&self) -> Smoothness {
        self.0.smoothness
    }

    pub fn is_strictly_convex(&self) -> bool {
        self.0.strictly_convex
    }

    /// True when the normal map is single valued and invertible on the sphere.
    pub fn is_smooth_strictly_convex(&self) -> bool {
        self.0.smoothness == Smoothness::C1 && self.0.strictly_convex
    }

    /// `(c_low, c_high)` with `c_low |x| <= ||x|| <= c_high |x|`.
    pub fn equivalence(&self) -> (f64, f64) {
        (self.0.c_low, self.0.c_high)
    }

    /// Minkowski functional of the unit ball.
    pub fn gauge(&self, x: Vec2) -> f64 {
        self.0.gauge(x)
    }

    /// Support function of the unit ball, `sup_{||y|| <= 1} x.y`.
    pub fn dual_norm(&self, x: Vec2) -> f64 {
        self.0.dual_norm(x)
    }

    /// A subgradient of the gauge at `x != 0`; at corners the one pointing
    /// along the angular midpoint of the adjacent normals.
    pub fn gradient(&self, x: Vec2) -> Vec2 {
        self.0.gradient(x)
    }

    /// A maximizer of `x.y` over the unit ball (the gradient of the dual norm).
    pub fn dual_argmax(&self, x: Vec2) -> Vec2 {
        self.0.dual_argmax(x)
    }

    /// Outward unit euclidean normal of the unit sphere at the ray through `x`.
    pub fn unit_normal(&self, x: Vec2) -> Vec2 {
        let g = self.gradient(x);
        g / g.norm()
    }

    /// Corner points of the unit sphere that an atlas should contain exactly.
    pub fn corner_points(&self) -> Vec<Vec2> {
        match &self.0.kind {
            Kind::Polygon(poly) => poly.vertices.clone(),
            Kind::Lp(p) if *p == 1.0 => vec![
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(-1.0, 0.0),
                Vec2::new(0.0, -1.0),
            ],
            Kind::Lp(p) if p.is_infinite() => vec![
                Vec2::new(1.0, 1.0),
                Vec2::new(-1.0, 1.0),
                Vec2::new(-1.0, -1.0),
                Vec2::new(1.0, -1.0),
            ],
            Kind::Scaled(f, of) => of.corner_points().into_iter().map(|v| v / *f).collect(),
            _ => Vec::new(),
        }
    }

    /// Point of the unit sphere in direction `theta`.
    pub fn radial_point(&self, theta: f64) -> Vec2 {
        let d = Vec2::new(theta.cos(), theta.sin());
        d / self.gauge(d)
    }

    /// `x / ||x||`.
    pub fn radial_project(&self, x: Vec2) -> Result<Vec2> {
        if x == Vec2::zeros() {
            return Err(Error::SingularPoint);
        }
        Ok(x / self.gauge(x))
    }

    /// `||x|| * p_B(-x)`; equals `-x` for symmetric norms.
    pub fn radial_symmetry(&self, x: Vec2) -> Result<Vec2> {
        let back = self.radial_project(-x)?;
        Ok(back * self.gauge(x))
    }
}

impl Inner {
    fn gauge(&self, x: Vec2) -> f64 {
        match &self.kind {
            Kind::Euclidean => x.norm(),
            Kind::Lp(p) => lp_norm(*p, x),
            Kind::Polygon(poly) => poly.gauge(x),
            Kind::Sum(terms, _) => terms.iter().map(|t| t.gauge(x)).sum(),
            Kind::Dual(of) => of.dual_norm(x),
            Kind::Scaled(f, of) => f * of.gauge(x),
        }
    }

    fn dual_norm(&self, x: Vec2) -> f64 {
        match &self.kind {
            Kind::Euclidean => x.norm(),
            Kind::Lp(p) => lp_norm(conjugate(*p), x),
            Kind::Polygon(poly) => poly.support(x),
            Kind::Sum(terms, table) => {
                table.support(x, |y| terms.iter().map(|t| t.gauge(y)).sum()).0
            }
            Kind::Dual(of) => of.gauge(x),
            Kind::Scaled(f, of) => of.dual_norm(x) / f,
        }
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        match &self.kind {
            Kind::Euclidean => x / x.norm(),
            Kind::Lp(p) => lp_gradient(*p, x),
            Kind::Polygon(poly) => poly.gradient(x),
            Kind::Sum(terms, _) => terms.iter().map(|t| t.gradient(x)).sum(),
            Kind::Dual(of) => of.dual_argmax(x),
            Kind::Scaled(f, of) => of.gradient(x) * *f,
        }
    }

    fn dual_argmax(&self, x: Vec2) -> Vec2 {
        match &self.kind {
            Kind::Euclidean => x / x.norm(),
            Kind::Lp(p) => lp_gradient(conjugate(*p), x),
            Kind::Polygon(poly) => poly.argmax(x),
            Kind::Sum(terms, table) => {
                table.support(x, |y| terms.iter().map(|t| t.gauge(y)).sum()).1
            }
            Kind::Dual(of) => of.gradient(x),
            Kind::Scaled(f, of) => of.dual_argmax(x) / *f,
        }
    }
}

/// Hölder conjugate exponent, with `1 <-> inf`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn lp_norm(p: f64, x: Vec2) -> f64 {
    let (a, b) = (x.x.abs(), x.y.abs());
    if p == 1.0 {
        a + b
    } else if p.is_infinite() {
        a.max(b)
    } else if p == 2.0 {
        a.hypot(b)
    } else {
        let m = a.max(b);
        if m == 0.0 {
            return 0.0;
        }
        m * ((a / m).powf(p) + (b / m).powf(p)).powf(1.0 / p)
    }
}

fn lp_gradient(p: f64, x: Vec2) -> Vec2 {
    let sign = |t: f64| if t > 0.0 { 1.0 } else if t < 0.0 { -1.0 } else { 0.0 };
    if p == 1.0 {
        Vec2::new(sign(x.x), sign(x.y))
    } else if p.is_infinite() {
        let (a, b) = (x.x.abs(), x.y.abs());
        let m = a.max(b);
        if (a - b).abs() <= TIE_TOL * m {
            Vec2::new(sign(x.x), sign(x.y)) * 0.5
        } else if a > b {
            Vec2::new(sign(x.x), 0.0)
        } else {
            Vec2::new(0.0, sign(x.y))
        }
    } else {
        let n = lp_norm(p, x);
        let c = |t: f64| sign(t) * (t.abs() / n).powf(p - 1.0);
        Vec2::new(c(x.x), c(x.y))
    }
}

fn equivalence_constants(gauge: impl Fn(Vec2) -> f64) -> (f64, f64) {
    let at = |t: f64| gauge(Vec2::new(t.cos(), t.sin()));
    let step = TAU / TABLE_SAMPLES as f64;
    let (mut i_lo, mut i_hi) = (0, 0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..TABLE_SAMPLES {
        let g = at(i as f64 * step);
        if g < lo {
            lo = g;
            i_lo = i;
        }
        if g > hi {
            hi = g;
            i_hi = i;
        }
    }
    let t_lo = i_lo as f64 * step;
    let t_hi = i_hi as f64 * step;
    let (_, lo_ref) = golden_section_max(|t| -at(t), t_lo - step, t_lo + step, 1e-13);
    let (_, hi_ref) = golden_section_max(at, t_hi - step, t_hi + step, 1e-13);
    (lo.min(-lo_ref), hi.max(hi_ref))
}

/// Centrally symmetric convex polygon, vertices sorted counterclockwise.
struct Polygon {
    vertices: Vec<Vec2>,
    /// `a_i` with `a_i . v_i = a_i . v_{i+1} = 1` for edge `i`.
    facets: Vec<Vec2>,
}

impl Polygon {
    fn new(raw: &[[f64; 2]]) -> Result<Self> {
        let mut vertices: Vec<Vec2> = raw.iter().map(|v| Vec2::new(v[0], v[1])).collect();
        if vertices.iter().any(|v| v.norm() == 0.0) {
            return Err(Error::InvalidSpec("polygon vertex at the origin".into()));
        }
        vertices.sort_by(|a, b| a.y.atan2(a.x).total_cmp(&b.y.atan2(b.x)));
        let n = vertices.len();
        let scale = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let tol = 1e-9 * scale;
        for v in &vertices {
            if !vertices.iter().any(|w| (w + v).norm() <= tol) {
                return Err(Error::InvalidSpec(format!(
                    "polygon is not centrally symmetric: no vertex opposite ({}, {})",
                    v.x, v.y
                )));
            }
        }
        let mut facets = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            let turn = cross(b - a, c - b);
            if turn <= 1e-12 * scale * scale {
                return Err(Error::InvalidSpec(format!(
                    "polygon is not strictly convex at vertex ({}, {})",
                    b.x, b.y
                )));
            }
            let det = cross(a, b);
            if det <= 1e-12 * scale * scale {
                return Err(Error::InvalidSpec(
                    "origin is not strictly inside the polygon".into(),
                ));
            }
            // solve a.f = 1, b.f = 1
            facets.push(Vec2::new(b.y - a.y, a.x - b.x) / det);
        }
        Ok(Polygon { vertices, facets })
    }

    fn gauge(&self, x: Vec2) -> f64 {
        self.facets.iter().map(|f| f.dot(&x)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn support(&self, x: Vec2) -> f64 {
        self.vertices.iter().map(|v| v.dot(&x)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        let (best, second) = top_two(self.facets.iter().map(|f| f.dot(&x)));
        let value = self.facets[best].dot(&x);
        let scale = TIE_TOL * x.norm() * self.facets[best].norm();
        let n = self.facets.len();
        let adjacent = second == (best + 1) % n || best == (second + 1) % n;
        if adjacent && value - self.facets[second].dot(&x) <= scale {
            let d = self.facets[best].normalize() + self.facets[second].normalize();
            d * (value / d.dot(&x))
        } else {
            self.facets[best]
        }
    }

    fn argmax(&self, x: Vec2) -> Vec2 {
        let (best, second) = top_two(self.vertices.iter().map(|v| v.dot(&x)));
        let value = self.vertices[best].dot(&x);
        let scale = TIE_TOL * x.norm() * self.vertices[best].norm();
        if value - self.vertices[second].dot(&x) <= scale {
            (self.vertices[best] + self.vertices[second]) * 0.5
        } else {
            self.vertices[best]
        }
    }
}

fn top_two(values: impl Iterator<Item = f64>) -> (usize, usize) {
    let (mut i1, mut v1, mut i2, mut v2) = (0, f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > v1 {
            i2 = i1;
            v2 = v1;
            i1 = i;
            v1 = v;
        } else if v > v2 {
            i2 = i;
            v2 = v;
        }
    }
    (i1, i2)
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Sampled unit sphere of a norm without a closed-form dual; answers support
/// queries by a coarse lookup on edge directions followed by golden-section
/// refinement of `x . r(theta)` on the winning arc.
struct SupportTable {
    thetas: Vec<f64>,
    points: Vec<Vec2>,
    /// direction angle of edge `i -> i+1`, unwrapped to be increasing
    edge_angles: Vec<f64>,
}

impl SupportTable {
    fn build(gauge: impl Fn(Vec2) -> f64) -> Self {
        let n = TABLE_SAMPLES;
        let thetas: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        let points: Vec<Vec2> = thetas
            .iter()
            .map(|t| {
                let d = Vec2::new(t.cos(), t.sin());
                d / gauge(d)
            })
            .collect();
        let mut edge_angles = Vec::with_capacity(n);
        for i in 0..n {
            let e = points[(i + 1) % n] - points[i];
            let mut a = e.y.atan2(e.x);
            if let Some(&prev) = edge_angles.last() {
                while a < prev - 1e-12 {
                    a += TAU;
                }
            }
            edge_angles.push(a);
        }
        SupportTable {
            thetas,
            points,
            edge_angles,
        }
    }

    fn support(&self, x: Vec2, gauge: impl Fn(Vec2) -> f64) -> (f64, Vec2) {
        if x == Vec2::zeros() {
            return (0.0, Vec2::zeros());
        }
        let n = self.points.len();
        let a0 = self.edge_angles[0];
        let mut target = x.y.atan2(x.x) + PI / 2.0;
        while target < a0 {
            target += TAU;
        }
        while target >= a0 + TAU {
            target -= TAU;
        }
        let k = self.edge_angles.partition_point(|&a| a < target) % n;
        let mut best = k;
        let mut best_val = f64::NEG_INFINITY;
        for off in -3i64..=3 {
            let j = (k as i64 + off).rem_euclid(n as i64) as usize;
            let v = x.dot(&self.points[j]);
            if v > best_val {
                best_val = v;
                best = j;
            }
        }
        let step = TAU / n as f64;
        let t = self.thetas[best];
        let radial = |t: f64| {
            let d = Vec2::new(t.cos(), t.sin());
            d / gauge(d)
        };
        let (t_star, v_star) = golden_section_max(|t| x.dot(&radial(t)), t - step, t + step, 1e-14);
        if v_star >= best_val {
            (v_star, radial(t_star))
        } else {
            (best_val, self.points[best])
        }
    }
}
