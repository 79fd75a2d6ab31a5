//! Uniform time grids and sampled paths.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return domain(format!("grid step must be positive, got {dt}"));
        }
        if n < 2 {
            return domain(format!("grid needs at least two points, got {n}"));
        }
        if !t0.is_finite() {
            return domain("grid start must be finite");
        }
        Ok(Self { t0, dt, n })
    }

    /// `n` points spanning `[a, b]` inclusive.
    pub fn spanning(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) {
            return domain(format!("empty span [{a}, {b}]"));
        }
        if n < 2 {
            return domain("grid needs at least two points");
        }
        Self::new(a, (b - a) / (n - 1) as f64, n)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn span(&self) -> f64 {
        (self.n - 1) as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.time(k))
    }

    /// Index of the grid point closest to `t`, if within half a step of the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if k < 0.0 || k > (self.n - 1) as f64 || (x - k).abs() > 1e-6 {
            return None;
        }
        Some(k as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    MovingAverage,
    Harmonizable,
    RiemannLiouville,
    FbmExact,
}

impl Representation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Representation::MovingAverage => "moving-average",
            Representation::Harmonizable => "harmonizable",
            Representation::RiemannLiouville => "riemann-liouville",
            Representation::FbmExact => "fbm-exact",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "moving-average" => Representation::MovingAverage,
            "harmonizable" => Representation::Harmonizable,
            "riemann-liouville" => Representation::RiemannLiouville,
            "fbm-exact" => Representation::FbmExact,
            other => return domain(format!("unknown representation '{other}'")),
        })
    }
}

/// Provenance of a synthesized path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub representation: Representation,
    pub seed: u64,
    pub t_past: Option<f64>,
    pub omega_max: Option<f64>,
    pub n_freq: Option<usize>,
    pub q: Option<usize>,
    /// Values are `B(t) - B(t0)` rather than `B(t)`.
    pub relative: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PathMeta {
    pub fn new(representation: Representation, seed: u64) -> Self {
        Self {
            representation,
            seed,
            t_past: None,
            omega_max: None,
            n_freq: None,
            q: None,
            relative: false,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub meta: PathMeta,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, meta: PathMeta) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::ShapeMismatch(format!(
                "path has {} values for a grid of {} points",
                values.len(),
                grid.n
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite path value at index {k}"));
        }
        Ok(Self { grid, values, meta })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Converts to increments from the first grid point.
    pub fn into_relative(mut self) -> Self {
        let v0 = self.values[0];
        self.values.iter_mut().for_each(|v| *v -= v0);
        self.meta.relative = true;
        self
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Writes `t,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "value"])?;
        for (t, v) in self.grid.times().zip(&self.values) {
            wr.write_record([t.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and the `<stem>.json` metadata sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        let sidecar = serde_json::json!({
            "grid": self.grid,
            "meta": self.meta,
        });
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 1).is_err());
        let g = TimeGrid::spanning(0.0, 1.0, 11).unwrap();
        assert!((g.end() - 1.0).abs() < 1e-15);
        assert_eq!(g.index_of(0.3), Some(3));
        assert_eq!(g.index_of(0.35), None);
    }

    #[test]
    fn path_rejects_non_finite() {
        let g = TimeGrid::spanning(0.0, 1.0, 3).unwrap();
        let meta = PathMeta::new(Representation::FbmExact, 1);
        assert!(SamplePath::new(g, vec![0.0, f64::NAN, 1.0], meta.clone()).is_err());
        assert!(SamplePath::new(g, vec![0.0, 1.0], meta).is_err());
    }

    #[test]
    fn csv_layout() {
        let g = TimeGrid::spanning(0.0, 1.0, 3).unwrap();
        let p = SamplePath::new(g, vec![0.0, 0.25, -1.0], PathMeta::new(Representation::FbmExact, 7)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,value\n0,0\n0.5,0.25\n1,-1\n");
    }
}
