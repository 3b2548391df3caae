//! Per-bin training metrics and their CSV form.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

pub const HEADER: &str = "time_step,grad_step,beta,c_max,eta,far_fraction,avg_dkl,mean_return,return_p20,return_p80,sigma_r,wall_seconds";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub time_step: u64,
    pub grad_step: u64,
    pub beta: f64,
    pub c_max: f64,
    pub eta: f64,
    pub far_fraction: f64,
    pub avg_dkl: f64,
    /// Mean raw return of the episodes completed in the bin; NaN when none completed.
    pub mean_return: f64,
    pub return_p20: f64,
    pub return_p80: f64,
    pub sigma_r: f64,
    pub wall_seconds: f64,
}

impl MetricsRow {
    /// Comma-separated values in header order. Reals use the shortest representation that
    /// parses back to the same value.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.time_step,
            self.grad_step,
            self.beta,
            self.c_max,
            self.eta,
            self.far_fraction,
            self.avg_dkl,
            self.mean_return,
            self.return_p20,
            self.return_p80,
            self.sigma_r,
            self.wall_seconds
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 12 {
            return None;
        }
        let r = |i: usize| f[i].parse::<f64>().ok();
        Some(Self {
            time_step: f[0].parse().ok()?,
            grad_step: f[1].parse().ok()?,
            beta: r(2)?,
            c_max: r(3)?,
            eta: r(4)?,
            far_fraction: r(5)?,
            avg_dkl: r(6)?,
            mean_return: r(7)?,
            return_p20: r(8)?,
            return_p80: r(9)?,
            sigma_r: r(10)?,
            wall_seconds: r(11)?,
        })
    }
}

/// Linearly interpolated percentile (`q` in [0, 1]) of unsorted data; NaN when empty.
pub fn percentile(data: &[f64], q: f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// `(mean, p20, p80)` of a bin's returns.
pub fn summarize(returns: &[f64]) -> (f64, f64, f64) {
    if returns.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    (mean, percentile(returns, 0.2), percentile(returns, 0.8))
}

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{HEADER}")?;
        Ok(Self { out })
    }

    /// Continue an existing file, writing the header only if it is empty or missing.
    pub fn append(path: &Path) -> Result<Self> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut out = BufWriter::new(file);
        if fresh {
            writeln!(out, "{HEADER}")?;
        }
        Ok(Self { out })
    }

    /// Write one row and flush, so partial runs leave a readable file.
    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        self.out.flush()?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().skip(1).filter_map(MetricsRow::parse).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let d = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(percentile(&d, 0.2), 1.8);
        assert_eq!(percentile(&d, 0.8), 4.2);
        assert_eq!(percentile(&d, 0.5), 3.0);
        assert_eq!(percentile(&[7.0], 0.2), 7.0);
        assert!(percentile(&[], 0.5).is_nan());
        let (m, lo, hi) = summarize(&[-2.0, -4.0]);
        assert_eq!((m, lo, hi), (-3.0, -3.6, -2.4));
    }

    #[test]
    fn row_round_trip() {
        let row = MetricsRow {
            time_step: 1000,
            grad_step: 10,
            beta: 0.1 + 0.2,
            c_max: 4.999,
            eta: 1e-4,
            far_fraction: 0.0,
            avg_dkl: 1.0 / 3.0,
            mean_return: f64::NAN,
            return_p20: -1e300,
            return_p80: 2.5,
            sigma_r: 0.7,
            wall_seconds: 0.0,
        };
        let back = MetricsRow::parse(&row.to_csv()).unwrap();
        assert_eq!(back.to_csv(), row.to_csv());
        assert_eq!(back.beta, row.beta);
        assert_eq!(HEADER.split(',').count(), 12);
    }
}
