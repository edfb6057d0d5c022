//! Hölder exponent of a vector map from sampled increments.
//!
//! Separations are binned log-uniformly in the dual norm and each bin keeps
//! its largest increment, measured in the primal norm. A global random pass is
//! followed by a zoom pass that, bin by bin from coarse to fine, samples pairs
//! around the worst pair of the previous scale, so isolated cusps are tracked
//! down to the smallest separations. The exponent is the log-log slope of the
//! per-bin maxima over the finer half of the bins.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PlanarNorm;
use crate::{linear_fit, Vec2};

pub const MAX_EXPONENT: f64 = 1.5;
pub const MIN_PAIRS: usize = 32;
/// increments at or below this are roundoff
pub const INCREMENT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum SampleRegion {
    Annulus { center: [f64; 2], r_in: f64, r_out: f64 },
    Box { min: [f64; 2], max: [f64; 2] },
}

impl SampleRegion {
    pub fn annulus(center: Vec2, r_in: f64, r_out: f64) -> Self {
        SampleRegion::Annulus {
            center: [center.x, center.y],
            r_in,
            r_out,
        }
    }

    fn contains(&self, x: Vec2) -> bool {
        match *self {
            SampleRegion::Annulus { center, r_in, r_out } => {
                let r = (x - Vec2::from(center)).norm();
                r >= r_in && r <= r_out
            }
            SampleRegion::Box { min, max } => {
                x.x >= min[0] && x.x <= max[0] && x.y >= min[1] && x.y <= max[1]
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec2 {
        match *self {
            SampleRegion::Annulus { center, r_in, r_out } => {
                // uniform in area
                let r = (rng.random_range(r_in * r_in..=r_out * r_out)).sqrt();
                let t = rng.random_range(0.0..TAU);
                Vec2::from(center) + Vec2::new(t.cos(), t.sin()) * r
            }
            SampleRegion::Box { min, max } => Vec2::new(
                rng.random_range(min[0]..=max[0]),
                rng.random_range(min[1]..=max[1]),
            ),
        }
    }

    /// `(r_in, r_out)` for annuli; `(0, half diagonal)` for boxes.
    fn radii(&self) -> (f64, f64) {
        match *self {
            SampleRegion::Annulus { r_in, r_out, .. } => (r_in, r_out),
            SampleRegion::Box { min, max } => {
                (0.0, 0.5 * Vec2::new(max[0] - min[0], max[1] - min[1]).norm())
            }
        }
    }

    fn default_s_max(&self) -> f64 {
        match *self {
            SampleRegion::Annulus { r_in, .. } => r_in,
            SampleRegion::Box { min, max } => 0.25 * (max[0] - min[0]).min(max[1] - min[1]),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderOptions {
    pub n_pairs: usize,
    pub s_min: f64,
    /// defaults to `r_in` on annuli and a quarter of the short side on boxes
    pub s_max: Option<f64>,
    pub n_bins: usize,
    pub seed: u64,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions {
            n_pairs: 12000,
            s_min: 1e-4,
            s_max: None,
            n_bins: 24,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub constant: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub r_squared: f64,
    pub seed: u64,
    /// Lipschitz or better at the sampled scales
    pub saturated: bool,
    pub usable_pairs: usize,
}

#[derive(Clone, Copy)]
struct Pair {
    mid: Vec2,
    sep: f64,
    inc: f64,
}

pub fn holder_estimate<F>(
    f: F,
    norm: &PlanarNorm,
    region: SampleRegion,
    opts: &HolderOptions,
) -> Result<HolderEstimate>
where
    F: Fn(Vec2) -> Option<Vec2> + Sync,
{
    let s_max = opts.s_max.unwrap_or_else(|| region.default_s_max());
    if !(opts.s_min > 0.0 && s_max > opts.s_min) {
        return Err(Error::InvalidArgument(format!(
            "separation range [{}, {s_max}] is empty",
            opts.s_min
        )));
    }
    if let SampleRegion::Annulus { r_in, r_out, .. } = region {
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(Error::InvalidArgument(format!(
                "annulus needs 0 < r_in < r_out, got ({r_in}, {r_out})"
            )));
        }
    }
    let n_bins = opts.n_bins.max(4);
    let (ln_lo, ln_hi) = (opts.s_min.ln(), s_max.ln());
    let bin_of = |s: f64| {
        let k = ((s.ln() - ln_lo) / (ln_hi - ln_lo) * n_bins as f64).floor();
        (k >= 0.0 && k < n_bins as f64).then_some(k as usize)
    };
    let bin_range = |k: usize| {
        let w = (ln_hi - ln_lo) / n_bins as f64;
        ((ln_lo + w * k as f64).exp(), (ln_lo + w * (k + 1) as f64).exp())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let evaluate = |cands: Vec<(Vec2, Vec2)>| -> Vec<Pair> {
        cands
            .into_par_iter()
            .filter_map(|(u, v)| {
                let (fu, fv) = (f(u)?, f(v)?);
                Some(Pair {
                    mid: (u + v) * 0.5,
                    sep: norm.dual_norm(v - u),
                    inc: norm.gauge(fv - fu),
                })
            })
            .collect()
    };
    let draw = |rng: &mut ChaCha8Rng, mid: Option<(Vec2, f64)>, lo: f64, hi: f64| {
        let s = (rng.random_range(lo.ln()..=hi.ln())).exp();
        let t = rng.random_range(0.0..TAU);
        let d = Vec2::new(t.cos(), t.sin()) * (0.5 * s);
        let m = match mid {
            Some((c, radius)) => {
                let a = rng.random_range(0.0..TAU);
                let r = radius * rng.random::<f64>().sqrt();
                c + Vec2::new(a.cos(), a.sin()) * r
            }
            None => region.sample(rng),
        };
        (m - d, m + d)
    };

    let mut best: Vec<Option<Pair>> = vec![None; n_bins];
    let mut usable = 0usize;
    let mut absorb = |pairs: Vec<Pair>, best: &mut Vec<Option<Pair>>| {
        for p in pairs {
            let Some(k) = bin_of(p.sep) else { continue };
            usable += 1;
            if best[k].is_none_or(|b| p.inc > b.inc) {
                best[k] = Some(p);
            }
        }
    };

    let global = opts.n_pairs / 2;
    let cands: Vec<(Vec2, Vec2)> = (0..global)
        .map(|_| draw(&mut rng, None, opts.s_min, s_max))
        .filter(|(u, v)| region.contains(*u) && region.contains(*v))
        .collect();
    absorb(evaluate(cands), &mut best);

    let per_bin = (opts.n_pairs - global) / n_bins;
    let mut hot: Option<Vec2> = None;
    for k in (0..n_bins).rev() {
        let (lo, hi) = bin_range(k);
        if let Some(p) = best.get(k + 1).copied().flatten() {
            if p.inc > INCREMENT_FLOOR {
                hot = Some(p.mid);
            }
        }
        let Some(h) = hot else {
            continue;
        };
        let cands: Vec<(Vec2, Vec2)> = (0..per_bin)
            .map(|_| draw(&mut rng, Some((h, 2.0 * hi)), lo, hi))
            .filter(|(u, v)| region.contains(*u) && region.contains(*v))
            .collect();
        absorb(evaluate(cands), &mut best);
    }

    if usable < MIN_PAIRS {
        return Err(Error::TooFewPairs {
            got: usable,
            min: MIN_PAIRS,
        });
    }
    let (r_in, r_out) = region.radii();
    let fine: Vec<Pair> = best[..n_bins / 2].iter().flatten().copied().collect();
    let positive: Vec<&Pair> = fine.iter().filter(|p| p.inc > INCREMENT_FLOOR).collect();
    if positive.len() < 3 {
        // no measurable increments at the fine scales
        return Ok(HolderEstimate {
            exponent: MAX_EXPONENT,
            constant: 0.0,
            r_in,
            r_out,
            r_squared: 1.0,
            seed: opts.seed,
            saturated: true,
            usable_pairs: usable,
        });
    }
    let xs: Vec<f64> = positive.iter().map(|p| p.sep.ln()).collect();
    let ys: Vec<f64> = positive.iter().map(|p| p.inc.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    let exponent = slope.min(MAX_EXPONENT);
    Ok(HolderEstimate {
        exponent,
        constant: intercept.exp(),
        r_in,
        r_out,
        r_squared: r2,
        seed: opts.seed,
        saturated: exponent > 1.0,
        usable_pairs: usable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NormSpec;
    use crate::vortex::VortexField;

    fn vortex_exponent(spec: NormSpec, seed: u64) -> HolderEstimate {
        let norm = PlanarNorm::new(&spec).unwrap();
        let vf = VortexField::new(&norm, Vec2::zeros(), 1).unwrap();
        let opts = HolderOptions {
            seed,
            ..HolderOptions::default()
        };
        holder_estimate(
            |x| vf.eval(x).ok(),
            &norm,
            SampleRegion::annulus(Vec2::zeros(), 0.5, 1.0),
            &opts,
        )
        .unwrap()
    }

    #[test]
    fn euclidean_vortex_is_lipschitz() {
        let est = vortex_exponent(NormSpec::Euclidean, 0);
        assert!((est.exponent - 1.0).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn lp4_vortex_exponent_third() {
        let est = vortex_exponent(NormSpec::lp(4.0), 0);
        assert!((est.exponent - 1.0 / 3.0).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn constant_map_saturates() {
        let norm = PlanarNorm::euclidean();
        let est = holder_estimate(
            |_| Some(Vec2::new(1.0, 0.0)),
            &norm,
            SampleRegion::annulus(Vec2::zeros(), 0.5, 1.0),
            &HolderOptions::default(),
        )
        .unwrap();
        assert!(est.saturated);
        assert_eq!(est.exponent, MAX_EXPONENT);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = vortex_exponent(NormSpec::lp(3.0), 5);
        let b = vortex_exponent(NormSpec::lp(3.0), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_pairs() {
        let norm = PlanarNorm::euclidean();
        let err = holder_estimate(
            |_| None,
            &norm,
            SampleRegion::annulus(Vec2::zeros(), 0.5, 1.0),
            &HolderOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooFewPairs { .. }));
    }

    #[test]
    fn region_json_round_trips() {
        let r = SampleRegion::annulus(Vec2::new(0.1, 0.0), 0.5, 1.0);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<SampleRegion>(&text).unwrap(), r);
    }
}
