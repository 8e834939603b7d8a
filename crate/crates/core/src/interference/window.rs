use serde::{Deserialize, Serialize};

use super::CoincidenceMap;
use crate::grid::TimeGrid;
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedResult {
    /// Coincidence window T (µs); events with |t₁ − t₂| ≤ T are accepted.
    pub window: f64,
    /// Accepted fraction of all heralds.
    pub efficiency: f64,
    /// p-weighted mean fidelity over the accepted region.
    pub fidelity: Option<f64>,
    pub visibility: Option<f64>,
    /// Absolute heralding probability inside the window.
    pub herald_probability: f64,
    /// Bell phase χ maximizing the window-averaged overlap.
    pub bell_phase: Option<f64>,
}

/// ∫ over u in [u0, u1] of clamp(d − u, 0, d − c).
fn clamp_integral(u0: f64, u1: f64, c: f64, d: f64) -> f64 {
    let anti = |u: f64| {
        if u <= c {
            (d - c) * u
        } else if u < d {
            (d - c) * c + (u - c) * (d - c) - 0.5 * (u - c) * (u - c)
        } else {
            (d - c) * c + 0.5 * (d - c) * (d - c)
        }
    };
    anti(u1) - anti(u0)
}

/// Area of {y − x > T} inside [a, b] × [c, d].
fn area_above(a: f64, b: f64, c: f64, d: f64, t: f64) -> f64 {
    if c - b >= t {
        return (b - a) * (d - c);
    }
    if d - a <= t {
        return 0.0;
    }
    clamp_integral(a + t, b + t, c, d).max(0.0)
}

/// Area of [a, b] × [c, d] inside the band |x − y| ≤ T.
pub fn band_area(a: f64, b: f64, c: f64, d: f64, t: f64) -> f64 {
    let rect = (b - a) * (d - c);
    if t == 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return rect;
    }
    (rect - area_above(a, b, c, d, t) - area_above(c, d, a, b, t)).clamp(0.0, rect)
}

fn cell_bounds(g: &TimeGrid, k: usize) -> (f64, f64) {
    let h = 0.5 * g.spacing();
    let t = g.time(k);
    ((t - h).max(g.t0), (t + h).min(g.t1))
}

#[derive(Default, Clone, Copy)]
struct Sums {
    p: f64,
    overlap: f64,
    coherence: (f64, f64),
    quantum: f64,
    distinguishable: f64,
}

fn sums(map: &CoincidenceMap, t: f64, exec: Execution) -> Sums {
    let n = map.n();
    let g = &map.grid;
    let rows: Vec<usize> = (0..n).collect();
    let partial = par::map(exec, &rows, |&i| {
        let (a, b) = cell_bounds(g, i);
        let mut s = Sums::default();
        for j in 0..n {
            let (c, d) = cell_bounds(g, j);
            let w = band_area(a, b, c, d, t);
            if w == 0.0 {
                continue;
            }
            let k = i * n + j;
            s.p += w * map.p[k];
            s.overlap += w * map.overlap[k];
            s.coherence.0 += w * map.coherence[k].re;
            s.coherence.1 += w * map.coherence[k].im;
            if let Some(h) = &map.hom {
                s.quantum += w * h.quantum[k];
                s.distinguishable += w * h.distinguishable[k];
            }
        }
        s
    });
    partial.into_iter().fold(Sums::default(), |mut acc, s| {
        acc.p += s.p;
        acc.overlap += s.overlap;
        acc.coherence.0 += s.coherence.0;
        acc.coherence.1 += s.coherence.1;
        acc.quantum += s.quantum;
        acc.distinguishable += s.distinguishable;
        acc
    })
}

/// Efficiency, fidelity and visibility restricted to |t₁ − t₂| ≤ T for each T.
///
/// Each grid cell (the trapezoid cell around a sample) is weighted by its exact
/// overlap area with the band, so T = 0 accepts nothing and results grow
/// continuously with T.
pub fn window_aggregate(map: &CoincidenceMap, windows: &[f64]) -> Result<Vec<WindowedResult>> {
    window_aggregate_with(map, windows, Execution::Parallel)
}

pub fn window_aggregate_with(
    map: &CoincidenceMap,
    windows: &[f64],
    exec: Execution,
) -> Result<Vec<WindowedResult>> {
    if let Some(&t) = windows.iter().find(|t| t.is_nan() || **t < 0.0) {
        return Err(Error::InvalidWindow(t));
    }
    let total = sums(map, f64::INFINITY, exec).p;
    windows
        .iter()
        .map(|&t| {
            let s = sums(map, t, exec);
            let fidelity = (s.p > 0.0).then(|| (s.overlap / s.p).clamp(0.0, 1.0));
            let visibility =
                (s.distinguishable > 0.0).then(|| (1.0 - s.quantum / s.distinguishable).clamp(0.0, 1.0));
            let bell_phase = (s.p > 0.0).then(|| -f64::atan2(s.coherence.1, s.coherence.0));
            Ok(WindowedResult {
                window: t,
                efficiency: if total > 0.0 { (s.p / total).min(1.0) } else { 0.0 },
                fidelity,
                visibility,
                herald_probability: s.p,
                bell_phase,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_band(a: f64, b: f64, c: f64, d: f64, t: f64) -> f64 {
        let m = 400;
        let (dx, dy) = ((b - a) / m as f64, (d - c) / m as f64);
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let x = a + (i as f64 + 0.5) * dx;
                let y = c + (j as f64 + 0.5) * dy;
                if (x - y).abs() <= t {
                    s += dx * dy;
                }
            }
        }
        s
    }

    #[test]
    fn band_area_matches_midpoint_count() {
        let cases = [
            (0.0, 1.0, 0.0, 1.0, 0.3),
            (0.0, 1.0, 0.5, 2.0, 0.2),
            (0.0, 0.5, 1.0, 1.5, 0.7),
            (2.0, 3.0, 0.0, 0.5, 1.8),
            (0.0, 1.0, 0.0, 1.0, 5.0),
        ];
        for (a, b, c, d, t) in cases {
            let exact = band_area(a, b, c, d, t);
            let brute = brute_band(a, b, c, d, t);
            assert!(
                (exact - brute).abs() < 5e-3,
                "{a} {b} {c} {d} {t}: {exact} vs {brute}"
            );
        }
    }

    #[test]
    fn band_area_limits() {
        assert_eq!(band_area(0.0, 1.0, 0.0, 1.0, 0.0), 0.0);
        assert_eq!(band_area(0.0, 1.0, 0.0, 1.0, f64::INFINITY), 1.0);
        // square on the diagonal: 1 − (1 − T)²
        let t = 0.25;
        assert!((band_area(0.0, 1.0, 0.0, 1.0, t) - (1.0 - (1.0 - t) * (1.0 - t))).abs() < 1e-15);
    }
}
