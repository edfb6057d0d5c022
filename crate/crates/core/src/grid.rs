//! Unit-norm vector fields sampled at cell centers of a rectangular grid.
//!
//! Cell `(i, j)` has center `origin + ((i + 1/2) h, (j + 1/2) h)` and is
//! stored at `j * nx + i`. Cells outside the domain are masked.
//!
//! On disk a field is a CSV with header `x,y,mx,my` (masked cells omitted)
//! plus a sidecar JSON `{"origin":[..],"h":..,"nx":..,"ny":..}` next to it
//! with the same stem. The sidecar may also carry the norm.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormSpec, PlanarNorm};
use crate::modulus::csv_err;
use crate::vortex::VortexField;
use crate::Vec2;

pub const DEFAULT_FIELD_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct FieldGrid {
    origin: Vec2,
    h: f64,
    nx: usize,
    ny: usize,
    values: Vec<Vec2>,
    mask: Vec<bool>,
    norm: PlanarNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridGeometry {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormSpec>,
}

impl FieldGrid {
    /// `mask[k]` is true for cells inside the domain; masked values are
    /// ignored.
    pub fn new(
        norm: &PlanarNorm,
        origin: Vec2,
        h: f64,
        nx: usize,
        ny: usize,
        values: Vec<Vec2>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let grid = FieldGrid {
            origin,
            h,
            nx,
            ny,
            values,
            mask,
            norm: norm.clone(),
        };
        grid.validate(DEFAULT_FIELD_TOL)?;
        Ok(grid)
    }

    /// Samples `f` at cell centers; `None` masks the cell.
    pub fn from_fn<F>(norm: &PlanarNorm, origin: Vec2, h: f64, nx: usize, ny: usize, f: F) -> Result<Self>
    where
        F: Fn(Vec2) -> Option<Vec2> + Sync,
    {
        use rayon::prelude::*;
        check_shape(h, nx, ny)?;
        let cells: Vec<Option<Vec2>> = (0..nx * ny)
            .into_par_iter()
            .map(|k| f(origin + Vec2::new((k % nx) as f64 + 0.5, (k / nx) as f64 + 0.5) * h))
            .collect();
        let mask = cells.iter().map(Option::is_some).collect();
        let values = cells.into_iter().map(|c| c.unwrap_or_else(Vec2::zeros)).collect();
        Self::new(norm, origin, h, nx, ny, values, mask)
    }

    /// `alpha V_B(x - p)` on `[lo, hi]^2` with `n x n` cells; cells within `h`
    /// of the center are masked.
    pub fn vortex(vf: &VortexField, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let h = (hi - lo) / n as f64;
        let p = vf.center();
        Self::from_fn(vf.norm(), Vec2::new(lo, lo), h, n, n, |x| {
            if (x - p).norm() < h {
                None
            } else {
                vf.eval(x).ok()
            }
        })
    }

    /// The constant field `q` (scaled onto the unit sphere) on `[lo, hi]^2`.
    pub fn constant(norm: &PlanarNorm, q: Vec2, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let q = norm.radial_project(q)?;
        let h = (hi - lo) / n as f64;
        Self::from_fn(norm, Vec2::new(lo, lo), h, n, n, |_| Some(q))
    }

    pub fn validate(&self, field_tol: f64) -> Result<()> {
        check_shape(self.h, self.nx, self.ny)?;
        if self.values.len() != self.nx * self.ny || self.mask.len() != self.nx * self.ny {
            return Err(Error::InvalidGrid(format!(
                "expected {} cells, got {} values and {} mask entries",
                self.nx * self.ny,
                self.values.len(),
                self.mask.len()
            )));
        }
        for k in 0..self.values.len() {
            if !self.mask[k] {
                continue;
            }
            let defect = (self.norm.gauge(self.values[k]) - 1.0).abs();
            if !(defect <= field_tol) {
                return Err(Error::InvalidGrid(format!(
                    "cell ({}, {}) has norm off by {defect:.3e}",
                    k % self.nx,
                    k / self.nx
                )));
            }
        }
        if !self.has_unmasked_block() {
            return Err(Error::InvalidGrid("no 3x3 block of unmasked cells".into()));
        }
        Ok(())
    }

    fn has_unmasked_block(&self) -> bool {
        (1..self.ny.saturating_sub(1)).any(|j| {
            (1..self.nx.saturating_sub(1)).any(|i| {
                (j - 1..=j + 1).all(|b| (i - 1..=i + 1).all(|a| self.mask[b * self.nx + a]))
            })
        })
    }

    pub fn norm(&self) -> &PlanarNorm {
        &self.norm
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// `(min corner, max corner)` of the gridded rectangle.
    pub fn extent(&self) -> (Vec2, Vec2) {
        (
            self.origin,
            self.origin + Vec2::new(self.nx as f64, self.ny as f64) * self.h,
        )
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64 + 0.5, j as f64 + 0.5) * self.h
    }

    pub fn is_inside(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.nx + i]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<Vec2> {
        let k = j * self.nx + i;
        self.mask[k].then(|| self.values[k])
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    /// Cell whose center is nearest to `x`, if it lies on the grid.
    pub fn cell_of(&self, x: Vec2) -> Option<(usize, usize)> {
        let p = (x - self.origin) / self.h;
        let (i, j) = (p.x.floor(), p.y.floor());
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    /// Bilinear interpolation between the four surrounding cell centers;
    /// `None` outside the hull of the centers or next to a masked cell.
    pub fn bilinear(&self, x: Vec2) -> Option<Vec2> {
        let p = (x - self.origin) / self.h - Vec2::new(0.5, 0.5);
        let (fi, fj) = (p.x.floor(), p.y.floor());
        if fi < 0.0 || fj < 0.0 || fi + 1.0 > (self.nx - 1) as f64 || fj + 1.0 > (self.ny - 1) as f64 {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        let (tx, ty) = (p.x - fi, p.y - fj);
        let a = self.get(i, j)?;
        let b = self.get(i + 1, j)?;
        let c = self.get(i, j + 1)?;
        let d = self.get(i + 1, j + 1)?;
        Some(a * ((1.0 - tx) * (1.0 - ty)) + b * (tx * (1.0 - ty)) + c * ((1.0 - tx) * ty) + d * (tx * ty))
    }

    /// Distance from `x` to the nearest masked cell center (infinite when
    /// nothing is masked).
    pub fn distance_to_mask(&self, x: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !self.mask[j * self.nx + i] {
                    best = best.min((self.center(i, j) - x).norm());
                }
            }
        }
        best
    }

    /// The field `-m`.
    pub fn negated(&self) -> FieldGrid {
        let mut g = self.clone();
        g.values.iter_mut().for_each(|v| *v = -*v);
        g
    }

    /// The same samples with the grid moved by `t`.
    pub fn translated(&self, t: Vec2) -> FieldGrid {
        let mut g = self.clone();
        g.origin += t;
        g
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            origin: [self.origin.x, self.origin.y],
            h: self.h,
            nx: self.nx,
            ny: self.ny,
            norm: Some(self.norm.spec().clone()),
        }
    }

    /// Writes the CSV and its sidecar; returns the sidecar path.
    pub fn write(&self, csv_path: &Path) -> Result<PathBuf> {
        let mut w = csv::Writer::from_path(csv_path).map_err(csv_err)?;
        w.write_record(["x", "y", "mx", "my"]).map_err(csv_err)?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if let Some(m) = self.get(i, j) {
                    let c = self.center(i, j);
                    w.write_record([
                        format!("{:e}", c.x),
                        format!("{:e}", c.y),
                        format!("{:e}", m.x),
                        format!("{:e}", m.y),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        let sidecar = sidecar_path(csv_path);
        fs::write(&sidecar, serde_json::to_string_pretty(&self.geometry())?)?;
        Ok(sidecar)
    }

    /// Reads a CSV and its sidecar. The norm comes from `norm`, or else from
    /// the sidecar.
    pub fn read(csv_path: &Path, norm: Option<&PlanarNorm>, field_tol: f64) -> Result<Self> {
        let sidecar = sidecar_path(csv_path);
        let text = fs::read_to_string(&sidecar).map_err(|e| {
            Error::InvalidGrid(format!("cannot read sidecar {}: {e}", sidecar.display()))
        })?;
        let geo: GridGeometry = serde_json::from_str(&text)?;
        let norm = match (norm, &geo.norm) {
            (Some(n), _) => n.clone(),
            (None, Some(spec)) => PlanarNorm::new(spec)?,
            (None, None) => {
                return Err(Error::InvalidGrid("no norm given and none in the sidecar".into()))
            }
        };
        check_shape(geo.h, geo.nx, geo.ny)?;
        let origin = Vec2::from(geo.origin);
        let mut values = vec![Vec2::zeros(); geo.nx * geo.ny];
        let mut mask = vec![false; geo.nx * geo.ny];
        let mut reader = csv::Reader::from_path(csv_path).map_err(csv_err)?;
        let headers = reader.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "y", "mx", "my"] {
            return Err(Error::InvalidGrid(format!(
                "expected header x,y,mx,my, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        for (r, rec) in reader.records().enumerate() {
            // header is line 1
            let line = r + 2;
            let rec = rec.map_err(csv_err)?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidGrid(format!("line {line}: {e}")))?;
            if nums.len() != 4 {
                return Err(Error::InvalidGrid(format!("line {line}: expected 4 columns")));
            }
            let p = (Vec2::new(nums[0], nums[1]) - origin) / geo.h - Vec2::new(0.5, 0.5);
            let (i, j) = (p.x.round(), p.y.round());
            if (p.x - i).abs() > 1e-6 || (p.y - j).abs() > 1e-6 || i < 0.0 || j < 0.0
                || i >= geo.nx as f64 || j >= geo.ny as f64
            {
                return Err(Error::InvalidGrid(format!(
                    "line {line}: ({}, {}) is not a cell center",
                    nums[0], nums[1]
                )));
            }
            let m = Vec2::new(nums[2], nums[3]);
            let defect = (norm.gauge(m) - 1.0).abs();
            if !(defect <= field_tol) {
                return Err(Error::InvalidGrid(format!(
                    "line {line}: field value ({}, {}) has norm off by {defect:.3e}",
                    m.x, m.y
                )));
            }
            let k = j as usize * geo.nx + i as usize;
            values[k] = m;
            mask[k] = true;
        }
        let grid = FieldGrid {
            origin,
            h: geo.h,
            nx: geo.nx,
            ny: geo.ny,
            values,
            mask,
            norm,
        };
        grid.validate(field_tol)?;
        Ok(grid)
    }
}

fn check_shape(h: f64, nx: usize, ny: usize) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
    }
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidGrid(format!("grid {nx}x{ny} is smaller than 3x3")));
    }
    Ok(())
}

/// `field.csv -> field.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}
