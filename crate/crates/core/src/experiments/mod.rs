//! Parameter presets, drive balancing and the sweep drivers built on top of the
//! emission and interference stages.

mod balance;
mod presets;
mod sweep;

use serde::{Deserialize, Serialize};

pub use balance::{balance_drives, envelope_overlap, BalanceOptions, BalanceResult, FixedDrive};
pub use presets::{load_preset, Preset, PRESET_NAMES};
pub use sweep::{
    run_birefringence_heatmap, run_window_curves, Axis, CurveSpec, Heatmap, HeatmapCell, SweepSpec,
    WindowCurves,
};

use crate::cart::{Encoding, NodeConfig};
use crate::emission::{auto_grid, simulate_emission, EmissionOptions, EmissionRecord};
use crate::grid::TimeGrid;
use crate::interference::{
    coincidence_map_frequency_with, coincidence_map_polarization_with, window_aggregate_with, CoincidenceMap,
    DetectionScheme, InterferenceOptions, WindowedResult,
};
use crate::par::{self, Execution};
use crate::quantum::ode::OdeOptions;
use crate::{angular, Error, Result};

/// Sampling used by the simulation drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Samples of the emission grid; (emission_points − 1) must be a multiple of
    /// (map_points − 1).
    pub emission_points: usize,
    /// Samples per axis of the coincidence map.
    pub map_points: usize,
    /// The emission grid is extended until the pure branch retains less than this.
    pub residual: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            emission_points: 4097,
            map_points: 1025,
            residual: 1e-5,
        }
    }
}

impl GridSpec {
    pub fn decimation(&self) -> Result<usize> {
        let (e, m) = (self.emission_points, self.map_points);
        if m < 2 || e < m || (e - 1) % (m - 1) != 0 {
            return Err(Error::InvalidGrid(format!(
                "emission_points − 1 = {} is not a multiple of map_points − 1 = {}",
                e.saturating_sub(1),
                m.saturating_sub(1)
            )));
        }
        if !(self.residual > 0.0 && self.residual < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "residual must be in (0, 1), got {}",
                self.residual
            )));
        }
        Ok((e - 1) / (m - 1))
    }
}

/// How two node emissions are interfered and summarized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSpec {
    pub encoding: Encoding,
    pub scheme: DetectionScheme,
    pub reexcitation: bool,
    pub grid: GridSpec,
    pub ode: OdeOptions,
    pub execution: Execution,
}

impl Default for InterferenceSpec {
    fn default() -> Self {
        Self {
            encoding: Encoding::Frequency,
            scheme: DetectionScheme::Dichroic,
            reexcitation: false,
            grid: GridSpec::default(),
            ode: OdeOptions::default(),
            execution: Execution::Parallel,
        }
    }
}

impl InterferenceSpec {
    fn emission_options(&self) -> EmissionOptions {
        EmissionOptions {
            ode: self.ode,
            reexcitation: self.reexcitation,
            ..Default::default()
        }
    }

    fn prepare(&self, cfg: &NodeConfig) -> NodeConfig {
        NodeConfig {
            encoding: self.encoding,
            ..*cfg
        }
    }
}

/// Default coincidence window 5/κ in µs.
pub fn default_window(kappa: f64) -> f64 {
    5.0 / angular(kappa)
}

/// One emission grid long enough for every configuration.
pub fn emission_grid(cfgs: &[NodeConfig], spec: &InterferenceSpec) -> Result<TimeGrid> {
    spec.grid.decimation()?;
    let grids = par::map(spec.execution, cfgs, |c| {
        auto_grid(
            &spec.prepare(c),
            spec.grid.emission_points,
            spec.grid.residual,
            &spec.ode,
        )
    });
    let mut t1 = 0.0f64;
    for g in grids {
        t1 = t1.max(g?.t1);
    }
    TimeGrid::new(0.0, t1, spec.grid.emission_points)
}

/// Simulates a node on the emission grid and decimates it to the map grid.
pub fn simulate_node(cfg: &NodeConfig, grid: &TimeGrid, spec: &InterferenceSpec) -> Result<EmissionRecord> {
    let factor = spec.grid.decimation()?;
    let rec = simulate_emission(&spec.prepare(cfg), grid, &spec.emission_options())?;
    rec.decimated(factor)
}

pub fn interfere(a: &EmissionRecord, b: &EmissionRecord, spec: &InterferenceSpec) -> Result<CoincidenceMap> {
    let opts = InterferenceOptions {
        include_reexcitation: spec.reexcitation,
        visibility: true,
        execution: spec.execution,
    };
    match spec.encoding {
        Encoding::Frequency => coincidence_map_frequency_with(a, b, spec.scheme, &opts),
        Encoding::Polarization => coincidence_map_polarization_with(a, b, &opts),
    }
}

/// Emission, interference and window statistics for one pair of nodes.
#[derive(Debug, Clone)]
pub struct PairRun {
    pub a: EmissionRecord,
    pub b: EmissionRecord,
    pub map: CoincidenceMap,
    pub windows: Vec<WindowedResult>,
}

pub fn run_pair(a: &NodeConfig, b: &NodeConfig, windows: &[f64], spec: &InterferenceSpec) -> Result<PairRun> {
    let grid = emission_grid(&[*a, *b], spec)?;
    let (ra, rb) = if a == b {
        let r = simulate_node(a, &grid, spec)?;
        (r.clone(), r)
    } else {
        let (ra, rb) = par::join(
            spec.execution,
            || simulate_node(a, &grid, spec),
            || simulate_node(b, &grid, spec),
        );
        (ra?, rb?)
    };
    let map = interfere(&ra, &rb, spec)?;
    let windows = window_aggregate_with(&map, windows, spec.execution)?;
    Ok(PairRun {
        a: ra,
        b: rb,
        map,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> InterferenceSpec {
        InterferenceSpec {
            grid: GridSpec {
                emission_points: 1025,
                map_points: 257,
                residual: 1e-5,
            },
            ..Default::default()
        }
    }

    #[test]
    fn decimation_requires_divisibility() {
        let mut g = GridSpec::default();
        assert_eq!(g.decimation().unwrap(), 4);
        g.map_points = 1000;
        assert!(g.decimation().is_err());
        g.map_points = g.emission_points;
        assert_eq!(g.decimation().unwrap(), 1);
    }

    #[test]
    fn identical_generic_nodes() {
        let cfg = load_preset("generic").unwrap().node;
        let run = run_pair(&cfg, &cfg, &[0.01, 0.05, f64::INFINITY], &small()).unwrap();
        for w in &run.windows {
            assert!((w.fidelity.unwrap() - 1.0).abs() < 1e-9);
        }
        assert!((run.windows[2].efficiency - 1.0).abs() < 1e-12);
        assert!(run.a.residual_active < 1e-4);
    }
}
