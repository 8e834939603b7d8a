use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cart::{
    derive_geometry, BirefringenceSpec, CavityGeometry, DerivedGeometry, DriveConfig, Encoding, NodeConfig,
};
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 3] = ["ca40", "ra225", "generic"];

/// A named node configuration, optionally with the cavity it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub node: NodeConfig,
    pub geometry: Option<CavityGeometry>,
    /// Quoted free spectral range (2π·MHz), kept as given rather than recomputed.
    pub fsr: Option<f64>,
    pub notes: BTreeMap<String, String>,
}

impl Preset {
    pub fn derived(&self) -> Option<Result<DerivedGeometry>> {
        self.geometry.as_ref().map(derive_geometry)
    }
}

fn notes(items: &[(&str, &str)]) -> BTreeMap<String, String> {
    items
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn node(
    g: (f64, f64),
    kappa: f64,
    omega: (f64, f64),
    gamma_ie: f64,
    gamma_xe: f64,
    delta: f64,
) -> NodeConfig {
    NodeConfig {
        g1: g.0,
        g2: g.1,
        kappa,
        gamma_ie,
        gamma_xe,
        drive: DriveConfig {
            omega1: omega.0,
            omega2: omega.1,
            delta1: 400.0,
            delta2: 400.0,
            theta: 0.0,
        },
        birefringence: BirefringenceSpec::along_x(delta),
        encoding: Encoding::Frequency,
    }
}

pub fn load_preset(name: &str) -> Result<Preset> {
    let preset = match name.to_ascii_lowercase().as_str() {
        "ca40" => Preset {
            name: "ca40".into(),
            node: node((9.36, 8.89), 6.0, (38.0, 40.0), 10.78 / 3.0, 7.92, 3.0),
            geometry: Some(CavityGeometry {
                length_mm: 0.493,
                mirror_roc_mm: 0.493,
                finesse: 5e4,
                wavelength_nm: 866.0,
            }),
            fsr: Some(304e3),
            notes: notes(&[
                (
                    "g",
                    "14.8·√10/5 and 15.4·√3/3 for the 866 nm and 854 nm transitions; overall sign dropped",
                ),
                ("kappa", "rounded; fsr/finesse gives 6.08"),
                ("gamma_ie", "10.78 × 1/3"),
                ("birefringence", "0.5 κ, eigenmodes (H ± V)/√2"),
            ]),
        },
        "ra225" => Preset {
            name: "ra225".into(),
            node: node((1.01, 1.01), 0.28, (40.0, 40.0), 1.69 / 3.0, 9.00, 0.14),
            geometry: Some(CavityGeometry {
                length_mm: 10.8,
                mirror_roc_mm: 10.8,
                finesse: 5e4,
                wavelength_nm: 468.0,
            }),
            fsr: Some(13.84e3),
            notes: notes(&[
                ("g", "1.75/√3"),
                (
                    "fsr",
                    "quoted as 13.84e3, half the 27.68 GHz qubit splitting; c/2l gives 13.88e3",
                ),
                ("gamma_ie", "1.69 × 1/3"),
                ("birefringence", "0.5 κ, eigenmodes (H ± V)/√2"),
            ]),
        },
        "generic" => Preset {
            name: "generic".into(),
            node: node((10.0, 10.0), 5.0, (40.0, 40.0), 0.0, 0.0, 0.0),
            geometry: None,
            fsr: None,
            notes: notes(&[(
                "all",
                "reconstructed parameters for birefringence studies; no spontaneous decay",
            )]),
        },
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(preset)
}
