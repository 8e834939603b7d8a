use serde::{Deserialize, Serialize};

use super::{default_window, emission_grid, interfere, simulate_node, InterferenceSpec, Preset};
use crate::cart::NodeConfig;
use crate::emission::EmissionRecord;
use crate::interference::{window_aggregate_with, WindowedResult};
use crate::par;
use crate::{Error, Result};

/// Evenly spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        let axis = Self { min, max, points };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 || !self.min.is_finite() || !self.max.is_finite() || self.max < self.min {
            return Err(Error::InvalidConfig(format!("invalid sweep axis {self:?}")));
        }
        if self.points == 1 && self.max != self.min {
            return Err(Error::InvalidConfig(
                "a single-point axis needs min == max".into(),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.max
                } else {
                    self.min + step * k as f64
                }
            })
            .collect()
    }
}

/// Birefringence sweep over both nodes; δ values are in units of κ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: NodeConfig,
    pub delta_a: Axis,
    pub delta_b: Axis,
    /// Coincidence window in µs; 5/κ when absent.
    pub window: Option<f64>,
    pub interference: InterferenceSpec,
}

impl SweepSpec {
    /// Square sweep over [0, 2κ]² at the given resolution.
    pub fn square(base: NodeConfig, resolution: usize, interference: InterferenceSpec) -> Result<Self> {
        let axis = Axis::new(0.0, 2.0, resolution)?;
        Ok(Self {
            base,
            delta_a: axis,
            delta_b: axis,
            window: None,
            interference,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub row: usize,
    pub col: usize,
    /// δ_A/κ
    pub delta_a: f64,
    /// δ_B/κ
    pub delta_b: f64,
    pub result: Option<WindowedResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub window: f64,
    /// Row-major over (δ_A, δ_B).
    pub cells: Vec<HeatmapCell>,
    pub rows: usize,
    pub cols: usize,
}

impl Heatmap {
    pub fn get(&self, row: usize, col: usize) -> &HeatmapCell {
        &self.cells[row * self.cols + col]
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

/// Windowed statistics for every (δ_A, δ_B) pair. Each distinct δ is simulated once;
/// failures are reported per cell and do not stop the sweep.
pub fn run_birefringence_heatmap(spec: &SweepSpec) -> Result<Heatmap> {
    spec.delta_a.validate()?;
    spec.delta_b.validate()?;
    spec.base.validate()?;
    let it = &spec.interference;
    let kappa = spec.base.kappa;
    let window = spec.window.unwrap_or_else(|| default_window(kappa));
    if !(window >= 0.0) {
        return Err(Error::InvalidWindow(window));
    }
    let da = spec.delta_a.values();
    let db = spec.delta_b.values();

    let mut unique: Vec<f64> = da.iter().chain(&db).copied().collect();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    let configs: Vec<NodeConfig> = unique.iter().map(|d| spec.base.with_delta(d * kappa)).collect();
    let grid = emission_grid(&configs, it)?;
    let records: Vec<std::result::Result<EmissionRecord, String>> = par::map(it.execution, &configs, |c| {
        simulate_node(c, &grid, it).map_err(|e| e.to_string())
    });
    let cells = assemble(&da, &db, &unique, &records, window, it);
    Ok(Heatmap {
        window,
        cells,
        rows: da.len(),
        cols: db.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    /// Windows in µs; a default ladder is used when empty.
    pub windows: Vec<f64>,
    pub interference: InterferenceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCurves {
    pub preset: String,
    pub curve: Vec<WindowedResult>,
    /// T → ∞.
    pub asymptotic: WindowedResult,
    /// Smallest positive window, one map-grid spacing.
    pub initial: WindowedResult,
    pub emitted: f64,
    pub pure_weight: f64,
}

fn assemble(
    da: &[f64],
    db: &[f64],
    unique: &[f64],
    records: &[std::result::Result<EmissionRecord, String>],
    window: f64,
    it: &InterferenceSpec,
) -> Vec<HeatmapCell> {
    let lookup = |d: f64| &records[unique.binary_search_by(|u| u.total_cmp(&d)).expect("cached")];
    let coords: Vec<(usize, usize)> = (0..da.len())
        .flat_map(|i| (0..db.len()).map(move |j| (i, j)))
        .collect();
    par::map(it.execution, &coords, |&(row, col)| {
        let (a, b) = (da[row], db[col]);
        let outcome = match (lookup(a), lookup(b)) {
            (Ok(ra), Ok(rb)) => interfere(ra, rb, it)
                .and_then(|m| window_aggregate_with(&m, &[window], it.execution))
                .map(|w| w[0])
                .map_err(|e| e.to_string()),
            (Err(e), _) | (_, Err(e)) => Err(format!("emission failed: {e}")),
        };
        if let Err(e) = &outcome {
            log::warn!("cell ({row}, {col}) δ = ({a}, {b})κ: {e}");
        }
        HeatmapCell {
            row,
            col,
            delta_a: a,
            delta_b: b,
            result: outcome.as_ref().ok().copied(),
            error: outcome.err(),
        }
    })
}

/// Efficiency, visibility and fidelity versus window for two identical nodes.
pub fn run_window_curves(preset: &Preset, spec: &CurveSpec) -> Result<WindowCurves> {
    let it = &spec.interference;
    let grid = emission_grid(&[preset.node], it)?;
    let rec = simulate_node(&preset.node, &grid, it)?;
    let map = interfere(&rec, &rec, it)?;
    let h = map.grid.spacing();
    let windows: Vec<f64> = if spec.windows.is_empty() {
        let span = map.grid.t1 - map.grid.t0;
        (0..=40).map(|k| span * k as f64 / 40.0).collect()
    } else {
        spec.windows.clone()
    };
    let mut all = windows.clone();
    all.push(h);
    all.push(f64::INFINITY);
    let mut res = window_aggregate_with(&map, &all, it.execution)?;
    let asymptotic = res.pop().expect("requested");
    let initial = res.pop().expect("requested");
    Ok(WindowCurves {
        preset: preset.name.clone(),
        curve: res,
        asymptotic,
        initial,
        emitted: rec.emitted,
        pure_weight: rec.pure_weight,
    })
}
