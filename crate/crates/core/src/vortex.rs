//! Vortex fields `x -> alpha V_B(x - p)` with `V_B = grad ||.||_*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryAtlas, PlanarNorm, DEFAULT_SAMPLES};
use crate::Vec2;

#[derive(Clone, Debug)]
pub struct VortexField {
    norm: PlanarNorm,
    atlas: BoundaryAtlas,
    center: Vec2,
    sign: f64,
}

/// Serializable description of a vortex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    pub center: [f64; 2],
    pub sign: i8,
}

impl VortexField {
    /// `sign` must be `+1` or `-1`.
    pub fn new(norm: &PlanarNorm, center: Vec2, sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidArgument(format!("vortex sign must be +1 or -1, got {sign}")));
        }
        Ok(VortexField {
            norm: norm.clone(),
            atlas: BoundaryAtlas::new(norm, DEFAULT_SAMPLES)?,
            center,
            sign: sign as f64,
        })
    }

    pub fn norm(&self) -> &PlanarNorm {
        &self.norm
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn sign(&self) -> i8 {
        self.sign as i8
    }

    /// `alpha n_B^{-1}((x - p)/|x - p|)`.
    ///
    /// Norms with corners or flat pieces fall back to the dual argmax, which
    /// is the vortex away from a null set of directions.
    pub fn eval(&self, x: Vec2) -> Result<Vec2> {
        let d = x - self.center;
        let r = d.norm();
        if r == 0.0 {
            return Err(Error::SingularPoint);
        }
        if self.norm.is_smooth_strictly_convex() {
            Ok(self.atlas.inverse_normal(d / r)? * self.sign)
        } else {
            Ok(self.norm.dual_argmax(d) * self.sign)
        }
    }
}

/// Centered differences of the dual norm with step `h |x|`.
pub fn dual_gradient(norm: &PlanarNorm, x: Vec2, h: f64) -> Result<Vec2> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    let step = h * r;
    let ex = Vec2::new(step, 0.0);
    let ey = Vec2::new(0.0, step);
    Ok(Vec2::new(
        (norm.dual_norm(x + ex) - norm.dual_norm(x - ex)) / (2.0 * step),
        (norm.dual_norm(x + ey) - norm.dual_norm(x - ey)) / (2.0 * step),
    ))
}
