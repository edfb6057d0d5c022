//! Trace-based checks on sampled fields, with detection and classification
//! of vortex singularities.
//!
//! Every unmasked cell counts as a Lebesgue point. Deviation metrics skip a
//! disc of radius `4 h` around the estimated center.

use std::path::Path;

use nalgebra::{Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryAtlas, PlanarNorm, DEFAULT_SAMPLES};
use crate::grid::FieldGrid;
use crate::holder::{holder_estimate, HolderEstimate, HolderOptions, SampleRegion};
use crate::kinetic::characteristic_direction;
use crate::modulus::{csv_err, PowerTypeFit};
use crate::vortex::VortexField;
use crate::{perp, perp_inv, to_arr, Vec2};

pub const MIN_LINES: usize = 8;
pub const DEFAULT_CLASS_TOL: f64 = 0.05;
pub const DEFAULT_EXPONENT_TOL: f64 = 0.05;
/// in units of `h`
pub const EXCLUSION_CELLS: f64 = 4.0;
pub const MAX_CONDITION: f64 = 1e8;

fn require_smooth_strict(norm: &PlanarNorm) -> Result<()> {
    if !norm.is_smooth_strictly_convex() {
        return Err(Error::NotSmooth(
            "field analysis needs a C1 strictly convex norm".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceResult {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// half-width of the rectangle used for `values`
    pub r: f64,
    /// half-width of the comparison estimate
    pub r_compare: Option<f64>,
    pub x2: Vec<f64>,
    /// `None` where the fiber meets a masked cell
    pub values: Vec<Option<[f64; 2]>>,
    /// mean gauge distance between the two finest estimates
    pub convergence_gap: Option<f64>,
    /// `max |j_B(m~) - 1|` over defined samples
    pub max_norm_defect: f64,
}

impl TraceResult {
    pub fn point(&self, k: usize) -> Vec2 {
        let (a, b) = (Vec2::from(self.a), Vec2::from(self.b));
        a + (b - a) * self.x2[k]
    }

    /// `x2,mx,my`; gaps are omitted.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["x2", "mx", "my"]).map_err(csv_err)?;
        for (x2, v) in self.x2.iter().zip(&self.values) {
            if let Some([mx, my]) = v {
                w.write_record([format!("{x2:.11e}"), format!("{mx:.11e}"), format!("{my:.11e}")])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn fiber_average(grid: &FieldGrid, q: Vec2, nu: Vec2, r: f64) -> Option<Vec2> {
    let k = 2 * (2.0 * r / grid.h()).ceil().max(1.0) as usize;
    let dt = 2.0 * r / k as f64;
    let mut acc = Vec2::zeros();
    for i in 0..k {
        let t = -r + (i as f64 + 0.5) * dt;
        acc += grid.bilinear(q + nu * t)?;
    }
    Some(acc / k as f64)
}

/// Averages of `m` over transverse fibers of half-width `r` along `[a, b]`.
///
/// The estimate reported is the one for the smallest `r`; the second
/// smallest, when given, feeds `convergence_gap`. Fails when the widest
/// rectangle leaves the hull of the cell centers or when every fiber meets
/// the mask.
pub fn trace_along_segment(grid: &FieldGrid, a: Vec2, b: Vec2, r_list: &[f64]) -> Result<TraceResult> {
    let mut radii: Vec<f64> = r_list.to_vec();
    radii.sort_by(f64::total_cmp);
    if radii.is_empty() || !(radii[0] > 0.0) || radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidArgument("trace radii must be positive and finite".into()));
    }
    let len = (b - a).norm();
    if !(len > 0.0) {
        return Err(Error::InvalidArgument("trace segment is degenerate".into()));
    }
    let v = (b - a) / len;
    let nu = perp(v);
    let r_max = radii[radii.len() - 1];
    let h = grid.h();
    let (lo, hi) = grid.extent();
    let (lo, hi) = (lo + Vec2::new(0.5, 0.5) * h, hi - Vec2::new(0.5, 0.5) * h);
    for c in [a + nu * r_max, a - nu * r_max, b + nu * r_max, b - nu * r_max] {
        if c.x < lo.x || c.y < lo.y || c.x > hi.x || c.y > hi.y {
            return Err(Error::OutsideDomain(format!(
                "rectangle of half-width {r_max} around the segment leaves the grid"
            )));
        }
    }
    let n = ((len / h).ceil() as usize + 1).max(2);
    let x2: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let estimate = |r: f64| -> Vec<Option<Vec2>> {
        x2.par_iter()
            .map(|t| fiber_average(grid, a + (b - a) * *t, nu, r))
            .collect()
    };
    let fine = estimate(radii[0]);
    if fine.iter().all(Option::is_none) {
        return Err(Error::OutsideDomain("every trace fiber meets the mask".into()));
    }
    let norm = grid.norm();
    let (gap, r_compare) = match radii.get(1) {
        Some(&r1) => {
            let coarse = estimate(r1);
            let d: Vec<f64> = fine
                .iter()
                .zip(&coarse)
                .filter_map(|(f, c)| Some(norm.gauge((*f)? - (*c)?)))
                .collect();
            let gap = (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64);
            (gap, Some(r1))
        }
        None => (None, None),
    };
    let max_norm_defect = fine
        .iter()
        .flatten()
        .map(|m| (norm.gauge(*m) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(TraceResult {
        a: to_arr(a),
        b: to_arr(b),
        r: radii[0],
        r_compare,
        x2,
        values: fine.into_iter().map(|m| m.map(to_arr)).collect(),
        convergence_gap: gap,
        max_norm_defect,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineInvarianceReport {
    pub center: [f64; 2],
    pub q: [f64; 2],
    pub direction: [f64; 2],
    pub r: f64,
    pub exclusion_radius: f64,
    pub n_samples: usize,
    /// mean of `min ||m~ -+ q||` over samples outside the exclusion disc
    pub l1_deviation: f64,
    /// smallest distance from an included sample to the center
    pub r_min: f64,
    /// `3 h / r_min`
    pub l1_bound: f64,
    /// `max deviation(x) |x - p| / h`; diagnostic only, it exceeds 3 on
    /// lines close to a direction where the vortex is merely Hölder
    pub max_scaled_deviation: f64,
    pub passed: bool,
}

/// Trace along the longest chord through `center` directed by `n_B(q)`,
/// compared with `{q, -q}`.
pub fn line_invariance(grid: &FieldGrid, center: Vec2, q: Vec2, r: f64) -> Result<LineInvarianceReport> {
    let norm = grid.norm();
    let q = norm.radial_project(q)?;
    let d = characteristic_direction(norm, q)?;
    let h = grid.h();
    let (lo, hi) = grid.extent();
    let margin = r + 0.5 * h + 1e-9;
    let (lo, hi) = (lo + Vec2::new(margin, margin), hi - Vec2::new(margin, margin));
    // |d_k t| stays inside the shrunk box; the fiber spans at most r in each axis
    let mut t_max = f64::INFINITY;
    for k in 0..2 {
        if d[k].abs() > 1e-14 {
            let room = (hi[k] - center[k]).min(center[k] - lo[k]);
            t_max = t_max.min(room / d[k].abs());
        }
    }
    if !(t_max > 0.0) {
        return Err(Error::OutsideDomain("center is too close to the grid edge".into()));
    }
    let trace = trace_along_segment(grid, center - d * t_max, center + d * t_max, &[r])?;
    let excl = EXCLUSION_CELLS * h;
    let mut devs = Vec::new();
    let mut r_min = f64::INFINITY;
    let mut max_scaled = 0.0f64;
    for (k, m) in trace.values.iter().enumerate() {
        let x = trace.point(k);
        let dist = (x - center).norm();
        let Some(m) = m else { continue };
        if dist < excl {
            continue;
        }
        let m = Vec2::from(*m);
        let dev = norm.gauge(m - q).min(norm.gauge(m + q));
        devs.push(dev);
        r_min = r_min.min(dist);
        max_scaled = max_scaled.max(dev * dist / h);
    }
    if devs.is_empty() {
        return Err(Error::OutsideDomain("no trace samples outside the exclusion disc".into()));
    }
    let l1 = devs.iter().sum::<f64>() / devs.len() as f64;
    let bound = 3.0 * h / r_min;
    Ok(LineInvarianceReport {
        center: to_arr(center),
        q: to_arr(q),
        direction: to_arr(d),
        r,
        exclusion_radius: excl,
        n_samples: devs.len(),
        l1_deviation: l1,
        r_min,
        l1_bound: bound,
        max_scaled_deviation: max_scaled,
        passed: l1 <= bound,
    })
}

fn unmasked_cells(grid: &FieldGrid) -> Vec<(usize, usize)> {
    (0..grid.ny())
        .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
        .filter(|&(i, j)| grid.is_inside(i, j))
        .collect()
}

/// Median over cells of the largest forward-difference quotient.
fn lipschitz_estimate(grid: &FieldGrid) -> f64 {
    let norm = grid.norm();
    let h = grid.h();
    let mut q: Vec<f64> = (0..grid.ny())
        .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
        .filter_map(|(i, j)| {
            let m = grid.get(i, j)?;
            let dx = (i + 1 < grid.nx()).then(|| grid.get(i + 1, j)).flatten();
            let dy = (j + 1 < grid.ny()).then(|| grid.get(i, j + 1)).flatten();
            [dx, dy]
                .into_iter()
                .flatten()
                .map(|o| norm.gauge(o - m) / h)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        })
        .collect();
    if q.is_empty() {
        return 0.0;
    }
    q.sort_by(f64::total_cmp);
    q[q.len() / 2]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignPropagationReport {
    pub n_pairs: usize,
    pub seed: u64,
    pub lipschitz_estimate: f64,
    /// `3 h L`
    pub tol: f64,
    pub violations: usize,
    pub worst_violation: f64,
}

/// Counts pairs `(y, z)` with `m(y).s > tol` and `m(z).s < -tol`, where `s`
/// ranges over the two points of the rotated sphere whose transport
/// direction is parallel to `z - y`.
pub fn sign_propagation_check(grid: &FieldGrid, n_pairs: usize, seed: u64) -> Result<SignPropagationReport> {
    require_smooth_strict(grid.norm())?;
    let atlas = BoundaryAtlas::new(grid.norm(), DEFAULT_SAMPLES)?;
    let cells = unmasked_cells(grid);
    if cells.len() < 2 {
        return Err(Error::InvalidGrid("fewer than two unmasked cells".into()));
    }
    let lip = lipschitz_estimate(grid);
    let tol = 3.0 * grid.h() * lip;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<((usize, usize), (usize, usize))> = (0..n_pairs)
        .map(|_| {
            let y = cells[rng.random_range(0..cells.len())];
            let mut z = cells[rng.random_range(0..cells.len())];
            while z == y {
                z = cells[rng.random_range(0..cells.len())];
            }
            (y, z)
        })
        .collect();
    let excess: Vec<f64> = pairs
        .par_iter()
        .map(|&((yi, yj), (zi, zj))| {
            let (my, mz) = (grid.get(yi, yj).unwrap(), grid.get(zi, zj).unwrap());
            let d = grid.center(zi, zj) - grid.center(yi, yj);
            let s = perp_inv(atlas.inverse_normal(d / d.norm())?);
            let (a, b) = (my.dot(&s), mz.dot(&s));
            // the pair of signs must not be strictly opposite; -s gives the mirror case
            Ok(if a * b < 0.0 { a.abs().min(b.abs()) - tol } else { f64::NEG_INFINITY })
        })
        .collect::<Result<_>>()?;
    let violations = excess.iter().filter(|e| **e > 0.0).count();
    let worst = excess.iter().copied().fold(0.0, f64::max);
    Ok(SignPropagationReport {
        n_pairs,
        seed,
        lipschitz_estimate: lip,
        tol,
        violations,
        worst_violation: worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Vortex,
    Regular,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectOptions {
    pub n_lines: usize,
    pub class_tol: f64,
    pub seed: u64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            n_lines: 128,
            class_tol: DEFAULT_CLASS_TOL,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingularityReport {
    pub center_estimate: [f64; 2],
    /// RMS euclidean distance from the center estimate to the lines
    pub line_fit_residual: f64,
    pub sign: i8,
    pub classification: Classification,
    /// `None` when the line system is degenerate
    pub l1_deviation_from_vortex: Option<f64>,
    pub condition_number: f64,
    pub n_lines: usize,
    pub class_tol: f64,
    pub exclusion_radius: f64,
    pub max_condition: f64,
    pub h: f64,
    pub seed: u64,
}

impl SingularityReport {
    pub fn center(&self) -> Vec2 {
        Vec2::from(self.center_estimate)
    }
}

/// Signed distance from `x` to the complement of the cell-center hull;
/// negative outside.
fn depth_in_grid(grid: &FieldGrid, x: Vec2) -> f64 {
    let (lo, hi) = grid.extent();
    let half = 0.5 * grid.h();
    (x.x - lo.x - half)
        .min(hi.x - half - x.x)
        .min(x.y - lo.y - half)
        .min(hi.y - half - x.y)
}

/// Least-squares intersection of the characteristics through `n_lines`
/// random cells, then comparison with the vortex centered there.
///
/// Lines through `x` are directed by the outward normal at `m(x)`. A
/// condition number above `MAX_CONDITION` means the lines are parallel and
/// the field is classified regular. An estimate within `4 h` of the grid
/// edge is inconclusive; one farther outside is regular.
pub fn detect_singularity(grid: &FieldGrid, opts: &DetectOptions) -> Result<SingularityReport> {
    require_smooth_strict(grid.norm())?;
    if opts.n_lines < MIN_LINES {
        return Err(Error::TooFewLines {
            got: opts.n_lines,
            min: MIN_LINES,
        });
    }
    let norm = grid.norm();
    let cells = unmasked_cells(grid);
    if cells.is_empty() {
        return Err(Error::InvalidGrid("every cell is masked".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let picked: Vec<(usize, usize)> = (0..opts.n_lines)
        .map(|_| cells[rng.random_range(0..cells.len())])
        .collect();
    let lines: Vec<(Vec2, Vec2)> = picked
        .iter()
        .map(|&(i, j)| Ok((grid.center(i, j), characteristic_direction(norm, grid.get(i, j).unwrap())?)))
        .collect::<Result<_>>()?;
    let mut a = Matrix2::zeros();
    let mut rhs = Vec2::zeros();
    for (x, d) in &lines {
        let p = Matrix2::identity() - d * d.transpose();
        a += p;
        rhs += p * x;
    }
    let eig = SymmetricEigen::new(a).eigenvalues;
    let (lmin, lmax) = (eig.min(), eig.max());
    let condition = if lmin > lmax * f64::EPSILON { lmax / lmin } else { f64::INFINITY };
    let h = grid.h();
    let excl = EXCLUSION_CELLS * h;
    let mut report = SingularityReport {
        center_estimate: [f64::NAN, f64::NAN],
        line_fit_residual: f64::INFINITY,
        sign: 1,
        classification: Classification::Regular,
        l1_deviation_from_vortex: None,
        condition_number: condition,
        n_lines: opts.n_lines,
        class_tol: opts.class_tol,
        exclusion_radius: excl,
        max_condition: MAX_CONDITION,
        h,
        seed: opts.seed,
    };
    if !(condition <= MAX_CONDITION) {
        // serde_json cannot encode non-finite numbers
        report.condition_number = f64::MAX;
        report.center_estimate = [0.0, 0.0];
        report.line_fit_residual = 0.0;
        return Ok(report);
    }
    let p = a.try_inverse().ok_or(Error::SingularPoint)? * rhs;
    let residual = (lines
        .iter()
        .map(|(x, d)| {
            let e = p - x;
            (e - d * d.dot(&e)).norm_squared()
        })
        .sum::<f64>()
        / lines.len() as f64)
        .sqrt();
    report.center_estimate = to_arr(p);
    report.line_fit_residual = residual;

    let vf = VortexField::new(norm, p, 1)?;
    let votes: i64 = picked
        .iter()
        .filter_map(|&(i, j)| {
            let x = grid.center(i, j);
            let w = vf.eval(x).ok()?;
            let s = grid.get(i, j)?.dot(&w);
            Some(if s >= 0.0 { 1 } else { -1 })
        })
        .sum();
    let sign: i8 = if votes >= 0 { 1 } else { -1 };
    report.sign = sign;
    let devs: Vec<f64> = cells
        .par_iter()
        .filter_map(|&(i, j)| {
            let x = grid.center(i, j);
            if (x - p).norm() < excl {
                return None;
            }
            let w = vf.eval(x).ok()? * sign as f64;
            Some(norm.gauge(grid.get(i, j)? - w))
        })
        .collect();
    let l1 = if devs.is_empty() {
        None
    } else {
        Some(devs.iter().sum::<f64>() / devs.len() as f64)
    };
    report.l1_deviation_from_vortex = l1;
    let depth = depth_in_grid(grid, p);
    report.classification = if depth < -excl || residual > opts.class_tol {
        Classification::Regular
    } else if depth < excl {
        Classification::Inconclusive
    } else if l1.is_some_and(|v| v <= opts.class_tol) {
        Classification::Vortex
    } else {
        Classification::Inconclusive
    };
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyOptions {
    pub detect: DetectOptions,
    pub holder: HolderOptions,
    /// smallest separation as a multiple of `h`
    pub s_min_cells: f64,
    pub exponent_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            detect: DetectOptions::default(),
            holder: HolderOptions::default(),
            s_min_cells: 4.0,
            exponent_tol: DEFAULT_EXPONENT_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub singularity: SingularityReport,
    pub region: SampleRegion,
    pub holder: HolderEstimate,
    pub p_hat: f64,
    /// `min(1, 1 / (p_hat - 1))`
    pub predicted_exponent: f64,
    pub exponent_tol: f64,
    pub verdict: Verdict,
}

/// Predicted Hölder exponent of vortices for a norm of power type `p_hat`.
pub fn predicted_exponent(p_hat: f64) -> f64 {
    if p_hat <= 2.0 {
        1.0
    } else {
        1.0 / (p_hat - 1.0)
    }
}

/// Detection followed by a Hölder estimate of the bilinear interpolant: on
/// an annulus around the center for vortices, on the whole grid otherwise.
///
/// Vortices must match the predicted exponent; regular fields must be at
/// least that regular.
pub fn classify_field(grid: &FieldGrid, fit: &PowerTypeFit, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    let det = detect_singularity(grid, &opts.detect)?;
    let h = grid.h();
    let (lo, hi) = grid.extent();
    let half = Vec2::new(0.5, 0.5) * h;
    let region = match det.classification {
        Classification::Vortex => {
            let r_out = 0.9 * depth_in_grid(grid, det.center()) - h;
            SampleRegion::annulus(det.center(), 0.5 * r_out, r_out)
        }
        _ => SampleRegion::Box {
            min: to_arr(lo + half),
            max: to_arr(hi - half),
        },
    };
    let holder_opts = HolderOptions {
        s_min: opts.s_min_cells * h,
        ..opts.holder.clone()
    };
    let holder = holder_estimate(|x| grid.bilinear(x), grid.norm(), region, &holder_opts)?;
    let predicted = predicted_exponent(fit.p_hat);
    let tol = opts.exponent_tol;
    let verdict = match det.classification {
        Classification::Vortex if (holder.exponent - predicted).abs() <= tol => Verdict::Consistent,
        Classification::Regular if holder.exponent >= predicted - tol => Verdict::Consistent,
        Classification::Inconclusive => Verdict::Inconclusive,
        _ => Verdict::Inconsistent,
    };
    Ok(ClassificationReport {
        singularity: det,
        region,
        holder,
        p_hat: fit.p_hat,
        predicted_exponent: predicted,
        exponent_tol: tol,
        verdict,
    })
}
