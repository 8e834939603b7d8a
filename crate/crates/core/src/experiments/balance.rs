use serde::{Deserialize, Serialize};

use crate::cart::{Channel, NodeConfig};
use crate::emission::{auto_grid, simulate_emission, EmissionOptions, EmissionRecord};
use crate::quantum::ode::OdeOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedDrive {
    Omega1,
    Omega2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceOptions {
    /// The Rabi frequency held constant; the other one is optimized.
    pub fix: FixedDrive,
    /// Search interval for the free Rabi frequency; defaults to [x/2, 2x] around
    /// its starting value (or the fixed one when it starts at zero).
    pub bounds: Option<(f64, f64)>,
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub points: usize,
    pub ode: OdeOptions,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        Self {
            fix: FixedDrive::Omega2,
            bounds: None,
            rel_tol: 1e-4,
            max_iterations: 200,
            points: 1025,
            ode: OdeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceResult {
    pub config: NodeConfig,
    pub overlap: f64,
    /// Blue over red emitted probability.
    pub norm_ratio: f64,
    pub iterations: usize,
}

fn envelope(rec: &EmissionRecord, h: Channel, v: Channel) -> Vec<f64> {
    rec.channel(h)
        .iter()
        .zip(rec.channel(v))
        .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt())
        .collect()
}

/// 2∫e_r e_b dt / (N_r + N_b) for the polarization-summed red and blue envelopes.
/// Equals 1 only when both branches have the same shape and weight.
pub fn envelope_overlap(rec: &EmissionRecord) -> f64 {
    let g = rec.grid();
    let er = envelope(rec, Channel::RH, Channel::RV);
    let eb = envelope(rec, Channel::BH, Channel::BV);
    let cross: Vec<f64> = er.iter().zip(&eb).map(|(a, b)| a * b).collect();
    let nr = g.integrate(&er.iter().map(|x| x * x).collect::<Vec<_>>());
    let nb = g.integrate(&eb.iter().map(|x| x * x).collect::<Vec<_>>());
    if nr + nb == 0.0 {
        return 0.0;
    }
    2.0 * g.integrate(&cross) / (nr + nb)
}

fn with_free(cfg: &NodeConfig, fix: FixedDrive, x: f64) -> NodeConfig {
    let mut c = *cfg;
    match fix {
        FixedDrive::Omega2 => c.drive.omega1 = x,
        FixedDrive::Omega1 => c.drive.omega2 = x,
    }
    c
}

/// Tunes the free Rabi frequency so the red and blue wavepackets match.
pub fn balance_drives(cfg: &NodeConfig, opts: &BalanceOptions) -> Result<BalanceResult> {
    cfg.validate()?;
    let (start, fixed) = match opts.fix {
        FixedDrive::Omega2 => (cfg.drive.omega1, cfg.drive.omega2),
        FixedDrive::Omega1 => (cfg.drive.omega2, cfg.drive.omega1),
    };
    let centre = if start > 0.0 { start } else { fixed };
    let (lo, hi) = opts.bounds.unwrap_or((0.5 * centre, 2.0 * centre));
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "balance bounds ({lo}, {hi}) are invalid"
        )));
    }
    let emit_opts = EmissionOptions {
        ode: opts.ode,
        reexcitation: false,
        ..Default::default()
    };
    // Emission time scales with the drive, so every candidate gets its own grid.
    let emit = |x: f64| -> Result<EmissionRecord> {
        let c = with_free(cfg, opts.fix, x);
        let grid = auto_grid(&c, opts.points, 1e-6, &opts.ode)?;
        simulate_emission(&c, &grid, &emit_opts)
    };
    let objective = |x: f64| emit(x).map(|r| envelope_overlap(&r));

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c)?, objective(d)?);
    let mut iterations = 0;
    while (b - a) > opts.rel_tol * 0.5 * (a + b) {
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence { iterations });
        }
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let config = with_free(cfg, opts.fix, x);
    let rec = emit(x)?;
    let red = rec.wavepacket.norm(Channel::RH) + rec.wavepacket.norm(Channel::RV);
    let blue = rec.wavepacket.norm(Channel::BH) + rec.wavepacket.norm(Channel::BV);
    Ok(BalanceResult {
        config,
        overlap: envelope_overlap(&rec),
        norm_ratio: if red > 0.0 { blue / red } else { f64::INFINITY },
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::load_preset;

    /// Two-colour Raman configuration where each drive only addresses its own
    /// cavity mode resonantly (opposite one-photon detunings).
    fn separated(g1: f64, g2: f64, omega1: f64, omega2: f64) -> NodeConfig {
        let mut cfg = load_preset("generic").unwrap().node;
        cfg.g1 = g1;
        cfg.g2 = g2;
        cfg.drive.omega1 = omega1;
        cfg.drive.omega2 = omega2;
        // Smaller detuning than the presets keeps the integration cheap.
        cfg.drive.delta1 = 150.0;
        cfg.drive.delta2 = -150.0;
        cfg
    }

    fn fast() -> BalanceOptions {
        BalanceOptions {
            ode: OdeOptions::with_tolerance(1e-7, 1e-10),
            points: 513,
            rel_tol: 1e-3,
            ..Default::default()
        }
    }

    #[test]
    fn symmetric_couplings_balance_at_equal_drives() {
        let cfg = separated(10.0, 10.0, 25.0, 40.0);
        let r = balance_drives(&cfg, &fast()).unwrap();
        assert!(
            (r.config.drive.omega1 / 40.0 - 1.0).abs() < 0.01,
            "{}",
            r.config.drive.omega1
        );
        assert!(r.overlap > 0.99);
        assert!((r.norm_ratio - 1.0).abs() < 0.02);
    }

    #[test]
    fn unequal_couplings_follow_raman_rates() {
        let ca = load_preset("ca40").unwrap().node;
        let mut cfg = separated(ca.g1, ca.g2, 30.0, 40.0);
        cfg.kappa = ca.kappa;
        let r = balance_drives(&cfg, &fast()).unwrap();
        let expected = 40.0 * ca.g2 / ca.g1;
        assert!(
            (r.config.drive.omega1 / expected - 1.0).abs() < 0.05,
            "{} vs {expected}",
            r.config.drive.omega1
        );
        assert!((r.config.drive.omega1 / 38.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn scaling_both_drives_keeps_the_ratio() {
        let cfg = separated(10.0, 8.0, 30.0, 30.0);
        let r1 = balance_drives(&cfg, &fast()).unwrap();
        let cfg2 = separated(10.0, 8.0, 60.0, 60.0);
        let r2 = balance_drives(&cfg2, &fast()).unwrap();
        let q1 = r1.config.drive.omega1 / 30.0;
        let q2 = r2.config.drive.omega1 / 60.0;
        assert!((q1 / q2 - 1.0).abs() < 0.02, "{q1} vs {q2}");
    }

    #[test]
    fn overlap_is_one_for_matched_envelopes() {
        let cfg = separated(10.0, 10.0, 40.0, 40.0);
        let grid = auto_grid(&cfg, 513, 1e-6, &OdeOptions::default()).unwrap();
        let rec = simulate_emission(&cfg, &grid, &EmissionOptions::default()).unwrap();
        let o = envelope_overlap(&rec);
        assert!(o <= 1.0 + 1e-12 && o > 0.98, "{o}");
    }

    #[test]
    fn bad_bounds_and_iteration_cap() {
        let cfg = separated(10.0, 10.0, 40.0, 40.0);
        let mut o = fast();
        o.bounds = Some((5.0, 1.0));
        assert!(matches!(balance_drives(&cfg, &o), Err(Error::InvalidConfig(_))));
        o.bounds = None;
        o.max_iterations = 3;
        assert!(matches!(
            balance_drives(&cfg, &o),
            Err(Error::NoConvergence { .. })
        ));
    }
}
