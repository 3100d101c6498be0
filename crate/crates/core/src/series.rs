//! Observable time series and their CSV form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a series came from and how much of the density matrix it used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub source: String,
    pub w: Option<f64>,
    pub n_w: Option<usize>,
    pub n_sim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stat_err: Option<Vec<f64>>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, meta: SeriesMeta) -> Self {
        debug_assert_eq!(times.len(), values.len());
        TimeSeries { times, values, stat_err: None, meta }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `t,value,stat_err` rows with round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value,stat_err")?;
        for (i, (t, v)) in self.times.iter().zip(&self.values).enumerate() {
            match &self.stat_err {
                Some(err) => writeln!(out, "{t},{v},{}", err[i])?,
                None => writeln!(out, "{t},{v},")?,
            }
        }
        Ok(())
    }

    /// Mean of the values with `lo <= t <= hi` (trapezoidal).
    pub fn window_mean(&self, lo: f64, hi: f64) -> Result<f64> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.times[i] >= lo && self.times[i] <= hi).collect();
        if idx.len() < 2 {
            return Err(Error::Contract(format!("fewer than two grid points in [{lo}, {hi}]")));
        }
        let t: Vec<f64> = idx.iter().map(|&i| self.times[i]).collect();
        let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
        Ok(trapezoid(&t, &v) / (t[t.len() - 1] - t[0]))
    }
}

/// Uniform grid of `points` samples over `[0, t_max]`.
pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Uniform grid of `points` samples over `[t0, t1]`.
pub fn grid_between(t0: f64, t1: f64, points: usize) -> Vec<f64> {
    uniform_grid(t1 - t0, points).into_iter().map(|t| t0 + t).collect()
}

/// Trapezoidal integral of `v` over the grid `t`.
pub fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(tw, vw)| 0.5 * (tw[1] - tw[0]) * (vw[0] + vw[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut s = TimeSeries::new(vec![0.0, 0.5], vec![1.0, -0.25], SeriesMeta::default());
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,value,stat_err\n0,1,\n0.5,-0.25,\n");
        s.stat_err = Some(vec![0.1, 0.2]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("0.5,-0.25,0.2\n"));
    }

    #[test]
    fn grids_and_quadrature() {
        let t = uniform_grid(2.0, 5);
        assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x).collect();
        assert!((trapezoid(&t, &v) - 6.0).abs() < 1e-14);
        let s = TimeSeries::new(t, v, SeriesMeta::default());
        assert!((s.window_mean(0.0, 2.0).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(grid_between(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
    }
}
