//! Sampled spectrum curves and their CSV serialization.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// q -> T(q), the scaling exponents of the direct measure.
    BigT,
    /// q -> calT(q), the scaling exponents governing the inverse measure.
    CalT,
    /// Empirical L^q slope estimates.
    TauEstimate,
    /// Legendre transform of another curve.
    Legendre,
    /// Coarse empirical spectra and other diagnostic curves.
    Coarse,
}

impl CurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveKind::BigT => "T",
            CurveKind::CalT => "calT",
            CurveKind::TauEstimate => "tau_estimate",
            CurveKind::Legendre => "legendre",
            CurveKind::Coarse => "coarse",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CurveMeta {
    pub depth: usize,
    pub model_hash: String,
}

/// A sampled function on a strictly increasing grid. `edge[i]` marks values
/// attained at a grid boundary of an underlying minimization (the true value
/// may lie outside the sampled range).
#[derive(Debug, Clone)]
pub struct SpectrumCurve {
    pub kind: CurveKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub edge: Vec<bool>,
    pub meta: CurveMeta,
}

impl SpectrumCurve {
    pub fn new(kind: CurveKind, grid: Vec<f64>, values: Vec<f64>, meta: CurveMeta) -> Self {
        let edge = vec![false; grid.len()];
        SpectrumCurve { kind, grid, values, edge, meta }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Linear interpolation on the grid (clamped at the ends).
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return self.values[0];
        }
        if x >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let idx = self.grid.partition_point(|&g| g < x).max(1);
        let (x0, x1) = (self.grid[idx - 1], self.grid[idx]);
        let (y0, y1) = (self.values[idx - 1], self.values[idx]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Secant slopes at the first and last grid cells: the usable estimates
    /// of the asymptotic slopes.
    pub fn edge_slopes(&self) -> (f64, f64) {
        let n = self.grid.len();
        let left = (self.values[1] - self.values[0]) / (self.grid[1] - self.grid[0]);
        let right = (self.values[n - 1] - self.values[n - 2]) / (self.grid[n - 1] - self.grid[n - 2]);
        (left, right)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# {},{},{}", self.kind.as_str(), self.meta.depth, self.meta.model_hash)?;
        writeln!(out, "x,value,edge_flag")?;
        for i in 0..self.grid.len() {
            let v = self.values[i];
            let rendered = if v.is_finite() { format!("{}", v) } else { "-inf".to_string() };
            writeln!(out, "{},{},{}", self.grid[i], rendered, if self.edge[i] { 1 } else { 0 })?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Builds an inclusive uniform grid; the final point is clamped onto `hi`
/// to avoid accumulation drift.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && hi > lo);
    let count = ((hi - lo) / step).round() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|i| lo + step * i as f64).collect();
    if let Some(last) = grid.last_mut() {
        *last = hi;
    }
    grid
}
