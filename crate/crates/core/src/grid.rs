use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform sampling of [t0, t1] with n points (µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t0 >= t1 {
            return Err(Error::InvalidGrid(format!("need t0 < t1, got [{t0}, {t1}]")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 samples, got {n}")));
        }
        Ok(Self { t0, t1, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.t1 - self.t0) / (self.n - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.t1
        } else {
            self.t0 + k as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.time(k)).collect()
    }

    /// Trapezoid weight of sample k.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.n {
            0.5 * self.spacing()
        } else {
            self.spacing()
        }
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.n);
        f.iter().enumerate().map(|(k, v)| v * self.weight(k)).sum()
    }

    /// Keeps every `factor`-th sample. Requires (n − 1) divisible by `factor`.
    pub fn decimated(&self, factor: usize) -> Result<Self> {
        if factor == 0 || (self.n - 1) % factor != 0 {
            return Err(Error::InvalidGrid(format!(
                "cannot decimate {} samples by {factor}",
                self.n
            )));
        }
        Self::new(self.t0, self.t1, (self.n - 1) / factor + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let g = TimeGrid::new(0.0, 2.0, 11).unwrap();
        let f: Vec<f64> = g.times().iter().map(|t| 3.0 * t + 1.0).collect();
        assert!((g.integrate(&f) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn decimation_keeps_endpoints() {
        let g = TimeGrid::new(0.0, 1.0, 4097).unwrap().decimated(8).unwrap();
        assert_eq!(g.n, 513);
        assert_eq!(g.time(512), 1.0);
        assert!(TimeGrid::new(0.0, 1.0, 100).unwrap().decimated(8).is_err());
    }
}
