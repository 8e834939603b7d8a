//! Run configuration: TOML file plus command-line overrides.

use std::path::Path;

use cart_sim::cart::{derive_geometry, BirefringenceSpec, CavityGeometry, DriveConfig, Encoding, NodeConfig};
use cart_sim::experiments::{load_preset, Axis, GridSpec, InterferenceSpec};
use cart_sim::interference::DetectionScheme;
use cart_sim::quantum::ode::OdeOptions;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DeltaUnits {
    /// 2π·MHz, like every other frequency.
    #[default]
    Mhz,
    /// Multiples of the node's κ.
    Kappa,
}

/// One node. Keys follow the usual parameter-table column names; ASCII spellings
/// are accepted as well.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSection {
    #[serde(alias = "g_1")]
    pub g1: Option<f64>,
    #[serde(alias = "g_2")]
    pub g2: Option<f64>,
    #[serde(alias = "κ")]
    pub kappa: Option<f64>,
    #[serde(alias = "Ω_1", alias = "Ω1", alias = "Omega_1")]
    pub omega1: Option<f64>,
    #[serde(alias = "Ω_2", alias = "Ω2", alias = "Omega_2")]
    pub omega2: Option<f64>,
    #[serde(alias = "Δ_1", alias = "Δ1", alias = "Delta_1")]
    pub delta1: Option<f64>,
    #[serde(alias = "Δ_2", alias = "Δ2", alias = "Delta_2")]
    pub delta2: Option<f64>,
    /// Sets both detunings.
    #[serde(rename = "Δ_1,Δ_2", alias = "Δ1,Δ2", alias = "delta12")]
    pub delta_both: Option<f64>,
    #[serde(alias = "θ")]
    pub theta: Option<f64>,
    #[serde(alias = "γ_ie")]
    pub gamma_ie: Option<f64>,
    #[serde(alias = "γ_xe")]
    pub gamma_xe: Option<f64>,
    /// Birefringence magnitude, in `delta_units`.
    #[serde(alias = "δ")]
    pub delta: Option<f64>,
    pub axis: Option<[f64; 3]>,
    /// Cavity length in mm.
    #[serde(alias = "length_mm")]
    pub l: Option<f64>,
    #[serde(rename = "R_c", alias = "roc_mm", alias = "mirror_roc_mm")]
    pub r_c: Option<f64>,
    #[serde(rename = "F", alias = "𝓕", alias = "finesse")]
    pub finesse: Option<f64>,
    /// Recorded only; the dynamics never use it.
    #[serde(rename = "FSR", alias = "fsr")]
    pub fsr: Option<f64>,
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub resolution: Option<usize>,
    /// δ range in units of κ.
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Coincidence window in µs.
    pub window: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub units: Option<String>,
    pub delta_units: Option<DeltaUnits>,
    pub encoding: Option<Encoding>,
    pub scheme: Option<u8>,
    pub reexcitation: Option<bool>,
    /// Coincidence windows in µs.
    pub windows: Option<Vec<f64>>,
    pub node_a: Option<NodeSection>,
    pub node_b: Option<NodeSection>,
    pub grid: Option<GridSpec>,
    pub ode: Option<OdeOptions>,
    pub sweep: Option<SweepSection>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub delta: Option<f64>,
    pub delta_a: Option<f64>,
    pub delta_b: Option<f64>,
    pub delta_units: Option<DeltaUnits>,
    pub encoding: Option<Encoding>,
    pub scheme: Option<u8>,
    pub reexcitation: bool,
    pub emission_points: Option<usize>,
    pub map_points: Option<usize>,
    pub rtol: Option<f64>,
    pub windows: Option<Vec<f64>>,
    pub resolution: Option<usize>,
    pub window: Option<f64>,
}

/// Everything a run depends on, written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub preset: Option<String>,
    pub node_a: NodeConfig,
    pub node_b: NodeConfig,
    pub interference: InterferenceSpec,
    pub windows: Option<Vec<f64>>,
    pub sweep: Option<ResolvedSweep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSweep {
    pub delta_a: Axis,
    pub delta_b: Axis,
    pub window: Option<f64>,
}

fn node_from_section(s: &NodeSection, units: DeltaUnits, label: &str) -> Result<NodeConfig, CliError> {
    let missing = |name: &str| CliError::Config(format!("[{label}] is missing `{name}`"));
    let kappa = match (s.kappa, s.l, s.r_c, s.finesse) {
        (Some(k), ..) => k,
        (None, Some(l), Some(r), Some(f)) => {
            derive_geometry(&CavityGeometry {
                length_mm: l,
                mirror_roc_mm: r,
                finesse: f,
                wavelength_nm: s.wavelength_nm.unwrap_or(866.0),
            })?
            .kappa
        }
        _ => return Err(missing("kappa")),
    };
    if let (Some(fsr), Some(l)) = (s.fsr, s.l) {
        let c_over_2l = 299_792_458.0 / (2.0 * l * 1e-3) * 1e-6;
        if ((fsr - c_over_2l) / c_over_2l).abs() > 0.01 {
            log::warn!("[{label}] FSR {fsr} differs from c/2l = {c_over_2l:.1} by more than 1%");
        }
    }
    if s.delta_both.is_some() && (s.delta1.is_some() || s.delta2.is_some()) {
        return Err(CliError::Config(format!("[{label}] sets the detunings twice")));
    }
    let delta1 = s.delta1.or(s.delta_both).ok_or_else(|| missing("delta1"))?;
    let delta2 = s.delta2.or(s.delta_both).ok_or_else(|| missing("delta2"))?;
    let delta = s.delta.unwrap_or(0.0);
    let mut cfg = NodeConfig {
        g1: s.g1.ok_or_else(|| missing("g1"))?,
        g2: s.g2.ok_or_else(|| missing("g2"))?,
        kappa,
        gamma_ie: s.gamma_ie.unwrap_or(0.0),
        gamma_xe: s.gamma_xe.unwrap_or(0.0),
        drive: DriveConfig {
            omega1: s.omega1.ok_or_else(|| missing("omega1"))?,
            omega2: s.omega2.ok_or_else(|| missing("omega2"))?,
            delta1,
            delta2,
            theta: s.theta.unwrap_or(0.0),
        },
        birefringence: BirefringenceSpec::along_x(0.0),
        encoding: Encoding::Frequency,
    };
    if let Some(axis) = s.axis {
        cfg.birefringence.axis = axis;
    }
    cfg.birefringence.delta = scale_delta(delta, units, kappa);
    Ok(cfg)
}

fn scale_delta(x: f64, units: DeltaUnits, kappa: f64) -> f64 {
    match units {
        DeltaUnits::Mhz => x,
        DeltaUnits::Kappa => x * kappa,
    }
}

pub fn resolve(
    file: Option<FileConfig>,
    o: &Overrides,
    with_sweep: bool,
) -> Result<ResolvedConfig, CliError> {
    let file = file.unwrap_or_default();
    if let Some(u) = &file.units {
        let norm: String = u
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_lowercase();
        if !matches!(
            norm.as_str(),
            "2pi*mhz" | "2pi·mhz" | "2π·mhz" | "2π*mhz" | "2pi-mhz"
        ) {
            return Err(CliError::Config(format!(
                "unsupported units `{u}`; frequencies are in 2π·MHz"
            )));
        }
    }
    let units = o.delta_units.or(file.delta_units).unwrap_or_default();
    let preset_name = o.preset.clone().or(file.preset.clone());
    let explicit = file.node_a.is_some() || file.node_b.is_some();
    if preset_name.is_some() && explicit {
        return Err(CliError::Config(
            "give either a preset or [node_a]/[node_b], not both".into(),
        ));
    }
    let (preset, mut a, mut b) = if explicit {
        let sa = file
            .node_a
            .as_ref()
            .ok_or_else(|| CliError::Config("[node_b] given without [node_a]".into()))?;
        let a = node_from_section(sa, units, "node_a")?;
        let b = match &file.node_b {
            Some(sb) => node_from_section(sb, units, "node_b")?,
            None => a,
        };
        (None, a, b)
    } else {
        let name = preset_name.unwrap_or_else(|| "generic".into());
        let p = load_preset(&name)?;
        (Some(p.name), p.node, p.node)
    };

    let both = o.delta;
    for (node, specific) in [(&mut a, o.delta_a), (&mut b, o.delta_b)] {
        if let Some(x) = specific.or(both) {
            node.birefringence.delta = scale_delta(x, units, node.kappa);
        }
    }
    let encoding = o.encoding.or(file.encoding).unwrap_or_default();
    a.encoding = encoding;
    b.encoding = encoding;
    a.validate()?;
    b.validate()?;

    let scheme =
        DetectionScheme::try_from(o.scheme.or(file.scheme).unwrap_or(3)).map_err(CliError::Config)?;
    let mut grid = file.grid.unwrap_or_default();
    if let Some(n) = o.emission_points {
        grid.emission_points = n;
    }
    if let Some(n) = o.map_points {
        grid.map_points = n;
    }
    grid.decimation()?;
    let mut ode = file.ode.unwrap_or_default();
    if let Some(r) = o.rtol {
        ode.rtol = r;
    }
    if !(ode.rtol > 0.0 && ode.atol > 0.0) {
        return Err(CliError::Config("ODE tolerances must be positive".into()));
    }
    let interference = InterferenceSpec {
        encoding,
        scheme,
        reexcitation: o.reexcitation || file.reexcitation.unwrap_or(false),
        grid,
        ode,
        execution: Default::default(),
    };
    let windows = o.windows.clone().or(file.windows.clone());
    if let Some(ws) = &windows {
        if let Some(t) = ws.iter().find(|t| !(**t >= 0.0)) {
            return Err(CliError::Config(format!(
                "coincidence windows must be >= 0, got {t}"
            )));
        }
    }
    let sweep = if with_sweep {
        let s = file.sweep.clone().unwrap_or_default();
        let axis = Axis::new(
            s.min.unwrap_or(0.0),
            s.max.unwrap_or(2.0),
            o.resolution.or(s.resolution).unwrap_or(21),
        )?;
        let window = o.window.or(s.window);
        if let Some(t) = window {
            if !(t >= 0.0) {
                return Err(CliError::Config(format!("sweep window must be >= 0, got {t}")));
            }
        }
        Some(ResolvedSweep {
            delta_a: axis,
            delta_b: axis,
            window,
        })
    } else {
        None
    };
    Ok(ResolvedConfig {
        preset,
        node_a: a,
        node_b: b,
        interference,
        windows,
        sweep,
    })
}
