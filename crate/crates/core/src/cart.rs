//! Six-level cavity-assisted Raman transition model of one node.
//!
//! Basis order: |i⟩, |e⟩, |↑,rH⟩, |↑,rV⟩, |↓,bH⟩, |↓,bV⟩. Photon labels r/b are the
//! red and blue cavity modes; H/V the cavity polarization basis.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::angular;
use crate::quantum::{CollapseOperator, ComplexMatrix, TimeDependentOperator, TimeFactor};
use crate::{Error, Result};

pub const DIM: usize = 6;
pub const I: usize = 0;
pub const E: usize = 1;
pub const UP_RH: usize = 2;
pub const UP_RV: usize = 3;
pub const DN_BH: usize = 4;
pub const DN_BV: usize = 5;

/// Photon channels in the order they are stored in a wavepacket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    RH,
    RV,
    BH,
    BV,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::RH, Channel::RV, Channel::BH, Channel::BV];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn basis_state(self) -> usize {
        UP_RH + self.index()
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::RH => "rH",
            Channel::RV => "rV",
            Channel::BH => "bH",
            Channel::BV => "bV",
        }
    }

    /// The atomic state left behind: ↑ for the red branch, ↓ for the blue one.
    pub fn is_up(self) -> bool {
        matches!(self, Channel::RH | Channel::RV)
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Channel::RV | Channel::BV)
    }
}

/// How the two atomic branches are imprinted on the photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// ↑ emits into the red mode, ↓ into the blue mode, both H-polarized.
    #[default]
    Frequency,
    /// Single frequency; ↑ emits H and ↓ emits V. The blue block then stands for the
    /// ↓ branch, with its V component as the principal channel.
    Polarization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirefringenceSpec {
    /// Half the eigenmode splitting (2π·MHz).
    pub delta: f64,
    /// Unit Stokes vector of the eigenmode axis.
    pub axis: [f64; 3],
}

impl BirefringenceSpec {
    pub fn along_x(delta: f64) -> Self {
        Self {
            delta,
            axis: [1.0, 0.0, 0.0],
        }
    }

    pub fn components(&self) -> [f64; 3] {
        self.axis.map(|a| a * self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm - 1.0).abs().le(&1e-12) {
            return Err(Error::InvalidConfig(format!(
                "birefringence axis must be a unit vector, |axis| = {norm}"
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "birefringence delta must be >= 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Relative phase of the two drive components (rad).
    #[serde(default)]
    pub theta: f64,
}

impl DriveConfig {
    pub fn stark_shift(&self) -> f64 {
        let term = |o: f64, d: f64| if o == 0.0 { 0.0 } else { o * o / (4.0 * d) };
        term(self.omega1, self.delta1) + term(self.omega2, self.delta2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub g1: f64,
    pub g2: f64,
    pub kappa: f64,
    pub gamma_ie: f64,
    pub gamma_xe: f64,
    pub drive: DriveConfig,
    pub birefringence: BirefringenceSpec,
    #[serde(default)]
    pub encoding: Encoding,
}

impl NodeConfig {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("g1", self.g1),
            ("g2", self.g2),
            ("kappa", self.kappa),
            ("gamma_ie", self.gamma_ie),
            ("gamma_xe", self.gamma_xe),
            ("omega1", self.drive.omega1),
            ("omega2", self.drive.omega2),
            ("delta1", self.drive.delta1),
            ("delta2", self.drive.delta2),
            ("theta", self.drive.theta),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} is not finite")));
            }
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("gamma_ie", self.gamma_ie),
            ("gamma_xe", self.gamma_xe),
            ("omega1", self.drive.omega1),
            ("omega2", self.drive.omega2),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (o, d, name) in [
            (self.drive.omega1, self.drive.delta1, "delta1"),
            (self.drive.omega2, self.drive.delta2, "delta2"),
        ] {
            if o != 0.0 && d == 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} = 0 with a nonzero drive makes the Stark shift diverge"
                )));
            }
        }
        self.birefringence.validate()
    }

    /// The basis state that g2 couples |e⟩ to.
    pub fn blue_principal(&self) -> usize {
        match self.encoding {
            Encoding::Frequency => DN_BH,
            Encoding::Polarization => DN_BV,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.birefringence.delta = delta;
        self
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Time-independent part of the Hermitian Hamiltonian without the drive (rad/µs).
fn static_hermitian(cfg: &NodeConfig) -> ComplexMatrix {
    let w = angular;
    let mut h = ComplexMatrix::zeros(DIM);
    let [dx, dy, dz] = cfg.birefringence.components();
    let offset = cfg.drive.delta2 - cfg.drive.delta1;
    h[(I, I)] = c(w(cfg.drive.stark_shift()), 0.0);
    h[(E, E)] = c(-w(cfg.drive.delta1), 0.0);
    h[(E, UP_RH)] = c(w(cfg.g1), 0.0);
    h[(UP_RH, E)] = c(w(cfg.g1), 0.0);
    let b = cfg.blue_principal();
    h[(E, b)] = c(w(cfg.g2), 0.0);
    h[(b, E)] = c(w(cfg.g2), 0.0);
    for (base, shift) in [(UP_RH, 0.0), (DN_BH, offset)] {
        h[(base, base)] = c(w(dz + shift), 0.0);
        h[(base + 1, base + 1)] = c(w(-dz + shift), 0.0);
        h[(base, base + 1)] = c(w(dx), -w(dy));
        h[(base + 1, base)] = c(w(dx), w(dy));
    }
    h
}

fn with_drive(cfg: &NodeConfig, mut h0: ComplexMatrix) -> TimeDependentOperator {
    let w = angular;
    let d = cfg.drive;
    h0[(I, E)] += c(0.5 * w(d.omega1), 0.0);
    h0[(E, I)] += c(0.5 * w(d.omega1), 0.0);
    let mut up = ComplexMatrix::zeros(DIM);
    up[(I, E)] = c(0.5 * w(d.omega2), 0.0);
    let mut down = ComplexMatrix::zeros(DIM);
    down[(E, I)] = c(0.5 * w(d.omega2), 0.0);
    let omega = w(d.delta2 - d.delta1);
    TimeDependentOperator::constant(h0)
        .with_term(
            TimeFactor::Oscillating {
                omega,
                phase: d.theta,
            },
            up,
        )
        .and_then(|op| {
            op.with_term(
                TimeFactor::Oscillating {
                    omega: -omega,
                    phase: -d.theta,
                },
                down,
            )
        })
        .expect("dimensions are fixed")
}

/// Non-Hermitian pure-branch Hamiltonian H_eff(t) in rad/µs.
pub fn build_effective_hamiltonian(cfg: &NodeConfig) -> Result<TimeDependentOperator> {
    cfg.validate()?;
    let mut h = static_hermitian(cfg);
    h[(E, E)] += c(0.0, -angular(cfg.gamma_xe + cfg.gamma_ie));
    for k in UP_RH..DIM {
        h[(k, k)] += c(0.0, -angular(cfg.kappa));
    }
    Ok(with_drive(cfg, h))
}

/// Hermitian Hamiltonian plus collapse operators of the full master equation.
pub fn build_lindblad_generator(cfg: &NodeConfig) -> Result<(TimeDependentOperator, Vec<CollapseOperator>)> {
    cfg.validate()?;
    let h = with_drive(cfg, static_hermitian(cfg));
    let mut ops = Vec::new();
    if cfg.gamma_ie > 0.0 {
        let mut l = ComplexMatrix::zeros(DIM);
        l[(I, E)] = c((2.0 * angular(cfg.gamma_ie)).sqrt(), 0.0);
        ops.push(CollapseOperator::jump(l, "ie"));
    }
    if cfg.gamma_xe > 0.0 {
        // Stands in for |sink⟩⟨e|; only L†L matters for a loss channel.
        let mut l = ComplexMatrix::zeros(DIM);
        l[(E, E)] = c((2.0 * angular(cfg.gamma_xe)).sqrt(), 0.0);
        ops.push(CollapseOperator::loss(l, "xe"));
    }
    if cfg.kappa > 0.0 {
        for (ch, label) in Channel::ALL.iter().zip(["rH", "rV", "bH", "bV"]) {
            let k = ch.basis_state();
            let mut l = ComplexMatrix::zeros(DIM);
            l[(k, k)] = c((2.0 * angular(cfg.kappa)).sqrt(), 0.0);
            ops.push(CollapseOperator::loss(l, label));
        }
    }
    Ok((h, ops))
}

/// Symmetric Fabry–Pérot cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub length_mm: f64,
    pub mirror_roc_mm: f64,
    pub finesse: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedGeometry {
    /// c/2l in 2π·MHz.
    pub fsr: f64,
    /// fsr/𝓕 in 2π·MHz.
    pub kappa: f64,
    pub waist_um: f64,
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn derive_geometry(geom: &CavityGeometry) -> Result<DerivedGeometry> {
    let l = geom.length_mm * 1e-3;
    let r = geom.mirror_roc_mm * 1e-3;
    let lam = geom.wavelength_nm * 1e-9;
    if !(l > 0.0 && r > 0.0 && lam > 0.0) {
        return Err(Error::InvalidConfig("cavity dimensions must be positive".into()));
    }
    if l > 2.0 * r {
        return Err(Error::InvalidConfig(format!(
            "unstable cavity: l = {} mm > 2 R_c = {} mm",
            geom.length_mm,
            2.0 * geom.mirror_roc_mm
        )));
    }
    if !(geom.finesse > 0.0) {
        return Err(Error::InvalidConfig("finesse must be positive".into()));
    }
    let fsr = SPEED_OF_LIGHT / (2.0 * l) * 1e-6;
    let w0_sq = lam * l / std::f64::consts::TAU * (2.0 * r / l - 1.0).sqrt();
    Ok(DerivedGeometry {
        fsr,
        kappa: fsr / geom.finesse,
        waist_um: w0_sq.sqrt() * 1e6,
    })
}
