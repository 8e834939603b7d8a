//! Photonic output of a single node.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::angular;
use crate::cart::{self, Channel, NodeConfig, DIM, E, I};
use crate::grid::TimeGrid;
use crate::par::{self, Execution};
use crate::quantum::ode::{integrate, OdeOptions, OdeSystem};
use crate::quantum::{
    generator_matrix, matrix_exponential, propagate_constant, CollapseOperator, LindbladSystem, Periodicity,
    SchrodingerSystem, StateVector, TimeDependentOperator,
};
use crate::{Error, Result};

/// Leaked-photon amplitudes φ_c(t) in µs^{-1/2}, channels in [`Channel::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wavepacket {
    pub grid: TimeGrid,
    pub channels: [Vec<C64>; 4],
}

impl Wavepacket {
    pub fn channel(&self, c: Channel) -> &[C64] {
        &self.channels[c.index()]
    }

    /// Trapezoid estimate of ∫|φ_c|² dt.
    pub fn norm(&self, c: Channel) -> f64 {
        let p: Vec<f64> = self.channel(c).iter().map(|z| z.norm_sqr()).collect();
        self.grid.integrate(&p)
    }

    pub fn total_norm(&self) -> f64 {
        Channel::ALL.iter().map(|&c| self.norm(c)).sum()
    }

    pub fn decimated(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.decimated(factor)?;
        let channels = self
            .channels
            .clone()
            .map(|v| v.into_iter().step_by(factor).collect());
        Ok(Self { grid, channels })
    }
}

/// How the smooth part of the re-excitation distribution P(s) is formed from ρ_ee(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReexcitationWeighting {
    /// Recycling rate 2γ_ie·ρ_ee(s).
    #[default]
    Rate,
    /// ρ_ee(s) taken directly as the density.
    Population,
}

/// How the emission dynamics are advanced between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepping {
    /// Exact matrix-exponential steps when the Hamiltonian is time independent,
    /// the adaptive integrator otherwise.
    #[default]
    Auto,
    /// Always the adaptive integrator.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionOptions {
    pub ode: OdeOptions,
    /// Run the full master equation for the re-excitation density.
    pub reexcitation: bool,
    pub weighting: ReexcitationWeighting,
    pub stepping: Stepping,
}

impl Default for EmissionOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            reexcitation: true,
            weighting: ReexcitationWeighting::Rate,
            stepping: Stepping::Auto,
        }
    }
}

/// Probability flow of the master-equation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladSummary {
    pub emitted: f64,
    pub xe_loss: f64,
    /// Expected number of e → i recycling events.
    pub recycling_events: f64,
    pub remaining: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub wavepacket: Wavepacket,
    /// Smooth part of the normalized P(s), µs^{-1}.
    pub reexcitation_density: Vec<f64>,
    /// Weight of the s = 0 delta term of the normalized P(s).
    pub pure_weight: f64,
    /// Pure-branch bookkeeping; these four sum to one.
    pub emitted: f64,
    pub xe_loss: f64,
    pub recycled: f64,
    pub unreleased: f64,
    /// Population left in |i⟩ and |e⟩ at the end of the grid.
    pub residual_active: f64,
    pub lindblad: Option<LindbladSummary>,
}

impl EmissionRecord {
    pub fn grid(&self) -> &TimeGrid {
        &self.wavepacket.grid
    }

    pub fn channel(&self, c: Channel) -> &[C64] {
        self.wavepacket.channel(c)
    }

    pub fn has_reexcitation(&self) -> bool {
        self.reexcitation_density.iter().any(|&r| r > 0.0)
    }

    /// Total weight of the normalized P(s).
    pub fn total_weight(&self) -> f64 {
        self.pure_weight + self.grid().integrate(&self.reexcitation_density)
    }

    pub fn check_normalized(&self) -> Result<()> {
        let w = self.total_weight();
        if (w - 1.0).abs() > 1e-6 || self.reexcitation_density.iter().any(|r| *r < 0.0) {
            return Err(Error::Unnormalized(format!("P(s) has total weight {w}")));
        }
        Ok(())
    }

    /// P(s) quadrature weights q_s so that ∫P(s) f(s) ds ≈ Σ_s q_s f(s_s).
    pub fn mixture_weights(&self) -> Vec<f64> {
        let g = self.grid();
        let mut q: Vec<f64> = self
            .reexcitation_density
            .iter()
            .enumerate()
            .map(|(k, r)| r * g.weight(k))
            .collect();
        q[0] += self.pure_weight;
        q
    }

    /// Keeps every `factor`-th sample and renormalizes P(s) on the coarser grid.
    pub fn decimated(&self, factor: usize) -> Result<Self> {
        let wavepacket = self.wavepacket.decimated(factor)?;
        let mut density: Vec<f64> = self
            .reexcitation_density
            .iter()
            .step_by(factor)
            .copied()
            .collect();
        let smooth = wavepacket.grid.integrate(&density);
        if smooth > 0.0 {
            let s = (1.0 - self.pure_weight) / smooth;
            density.iter_mut().for_each(|r| *r *= s);
        }
        Ok(Self {
            wavepacket,
            reexcitation_density: density,
            ..self.clone()
        })
    }
}

/// Pure branch with three accumulators: emitted, xe-lost and ie-recycled probability.
struct PureBranch<'a> {
    inner: SchrodingerSystem<'a>,
    two_kappa: f64,
    two_gxe: f64,
    two_gie: f64,
}

impl OdeSystem for PureBranch<'_> {
    fn dim(&self) -> usize {
        DIM + 3
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.inner.rhs(t, &y[..DIM], &mut dy[..DIM]);
        let photons: f64 = y[cart::UP_RH..DIM].iter().map(|z| z.norm_sqr()).sum();
        let pe = y[E].norm_sqr();
        dy[DIM] = C64::new(self.two_kappa * photons, 0.0);
        dy[DIM + 1] = C64::new(self.two_gxe * pe, 0.0);
        dy[DIM + 2] = C64::new(self.two_gie * pe, 0.0);
    }
}

/// Emission of a node prepared in |i⟩.
pub fn simulate_emission(
    cfg: &NodeConfig,
    grid: &TimeGrid,
    opts: &EmissionOptions,
) -> Result<EmissionRecord> {
    simulate_emission_from(cfg, &StateVector::basis(DIM, I), grid, opts)
}

/// Emission from an arbitrary initial pure state. The re-excitation density is only
/// meaningful for |i⟩, but the bookkeeping holds for any start.
pub fn simulate_emission_from(
    cfg: &NodeConfig,
    psi0: &StateVector,
    grid: &TimeGrid,
    opts: &EmissionOptions,
) -> Result<EmissionRecord> {
    if grid.t0 != 0.0 {
        return Err(Error::InvalidGrid("emission grids start at t = 0".into()));
    }
    if psi0.dim() != DIM {
        return Err(Error::DimensionMismatch {
            expected: DIM,
            got: psi0.dim(),
        });
    }
    let times = grid.times();
    let h_eff = cart::build_effective_hamiltonian(cfg)?;

    let exact = uses_exact_steps(&h_eff, opts.stepping, &opts.ode);
    let pure = || {
        if exact {
            exact_pure_branch(cfg, &h_eff, psi0, grid)
        } else {
            run_pure_branch(cfg, &h_eff, psi0, &times, &opts.ode)
        }
    };
    let mixed = || -> Result<Option<(Vec<f64>, LindbladSummary)>> {
        if !opts.reexcitation || cfg.gamma_ie == 0.0 {
            return Ok(None);
        }
        let run = if exact {
            exact_master_equation(cfg, psi0, grid)
        } else {
            run_master_equation(cfg, psi0, &times, &opts.ode)
        };
        run.map(Some)
    };
    let (pure, mixed) = par::join(Execution::Parallel, pure, mixed);
    let (channels, acc, last) = pure?;
    let mixed = mixed?;

    let scale = (2.0 * angular(cfg.kappa)).sqrt();
    let channels = channels.map(|v| v.into_iter().map(|z| z * scale).collect());
    let unreleased: f64 = last.iter().map(|z| z.norm_sqr()).sum();
    let residual_active = last[I].norm_sqr() + last[E].norm_sqr();
    if residual_active > 1e-4 {
        log::warn!(
            "grid ends at t = {} µs with residual population {residual_active:.3e} in |i>,|e>",
            grid.t1
        );
    }

    let (density, pure_weight, lindblad) = match mixed {
        None => (vec![0.0; grid.n], 1.0, None),
        Some((pop_e, summary)) => {
            let raw: Vec<f64> = match opts.weighting {
                ReexcitationWeighting::Rate => {
                    let r = 2.0 * angular(cfg.gamma_ie);
                    pop_e.iter().map(|p| r * p.max(0.0)).collect()
                }
                ReexcitationWeighting::Population => pop_e.iter().map(|p| p.max(0.0)).collect(),
            };
            let total = 1.0 + grid.integrate(&raw);
            (
                raw.iter().map(|r| r / total).collect(),
                1.0 / total,
                Some(summary),
            )
        }
    };

    Ok(EmissionRecord {
        wavepacket: Wavepacket {
            grid: *grid,
            channels,
        },
        reexcitation_density: density,
        pure_weight,
        emitted: acc[0],
        xe_loss: acc[1],
        recycled: acc[2],
        unreleased,
        residual_active,
        lindblad,
    })
}

type PureOutput = ([Vec<C64>; 4], [f64; 3], Vec<C64>);

fn run_pure_branch(
    cfg: &NodeConfig,
    h_eff: &TimeDependentOperator,
    psi0: &StateVector,
    times: &[f64],
    ode: &OdeOptions,
) -> Result<PureOutput> {
    let sys = PureBranch {
        inner: SchrodingerSystem::new(h_eff),
        two_kappa: 2.0 * angular(cfg.kappa),
        two_gxe: 2.0 * angular(cfg.gamma_xe),
        two_gie: 2.0 * angular(cfg.gamma_ie),
    };
    let mut y0 = psi0.0.clone();
    y0.extend([C64::new(0.0, 0.0); 3]);
    let sol = integrate(&sys, &y0, times, ode)?;
    let mut channels: [Vec<C64>; 4] = Default::default();
    for (k, ch) in Channel::ALL.iter().enumerate() {
        channels[k] = sol.samples.iter().map(|s| s[ch.basis_state()]).collect();
    }
    let last = sol.samples.last().expect("grid has samples");
    let acc = [last[DIM].re, last[DIM + 1].re, last[DIM + 2].re];
    Ok((channels, acc, last[..DIM].to_vec()))
}

fn uses_exact_steps(h_eff: &TimeDependentOperator, stepping: Stepping, ode: &OdeOptions) -> bool {
    stepping == Stepping::Auto && ode.fixed_step.is_none() && h_eff.periodicity() == Periodicity::Constant
}

fn density_vector(psi: &StateVector, extra: usize) -> Vec<C64> {
    let mut y: Vec<C64> = Vec::with_capacity(DIM * DIM + extra);
    for a in &psi.0 {
        for b in &psi.0 {
            y.push(a * b.conj());
        }
    }
    y.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(extra));
    y
}

/// Summed accumulator values at the last sample, keyed by collapse label.
fn collapse_totals(ops: &[CollapseOperator], last: &[C64]) -> (f64, f64, f64) {
    let (mut emitted, mut xe, mut ie) = (0.0, 0.0, 0.0);
    for (k, op) in ops.iter().enumerate() {
        let v = last[DIM * DIM + k].re;
        match op.label {
            "ie" => ie += v,
            "xe" => xe += v,
            _ => emitted += v,
        }
    }
    (emitted, xe, ie)
}

/// Pure branch for a time-independent H_eff. The amplitudes come from e^{−iH_eff h};
/// the emitted, lost and recycled probabilities from the same dynamics written for
/// ψψ† with every collapse channel counted but none fed back.
fn exact_pure_branch(
    cfg: &NodeConfig,
    h_eff: &TimeDependentOperator,
    psi0: &StateVector,
    grid: &TimeGrid,
) -> Result<PureOutput> {
    let steps = grid.n - 1;
    let h = grid.spacing();
    let gen = h_eff.at(0.0).scale(C64::new(0.0, -1.0));
    let psi = propagate_constant(&gen, &psi0.0, h, steps)?;

    let (herm, ops) = cart::build_lindblad_generator(cfg)?;
    let ops: Vec<CollapseOperator> = ops
        .into_iter()
        .map(|o| CollapseOperator::loss(o.op, o.label))
        .collect();
    let sys = LindbladSystem::new(&herm, &ops)?;
    let rho = propagate_constant(
        &generator_matrix(&sys, 0.0),
        &density_vector(psi0, ops.len()),
        h * steps as f64,
        1,
    )?;
    let (emitted, xe, ie) = collapse_totals(&ops, &rho[1]);

    let mut channels: [Vec<C64>; 4] = Default::default();
    for (k, ch) in Channel::ALL.iter().enumerate() {
        channels[k] = psi.iter().map(|s| s[ch.basis_state()]).collect();
    }
    let last = psi.last().expect("grid has samples").clone();
    Ok((channels, [emitted, xe, ie], last))
}

fn exact_master_equation(
    cfg: &NodeConfig,
    psi0: &StateVector,
    grid: &TimeGrid,
) -> Result<(Vec<f64>, LindbladSummary)> {
    let (h, ops) = cart::build_lindblad_generator(cfg)?;
    let sys = LindbladSystem::new(&h, &ops)?;
    let samples = propagate_constant(
        &generator_matrix(&sys, 0.0),
        &density_vector(psi0, ops.len()),
        grid.spacing(),
        grid.n - 1,
    )?;
    summarize_master(&ops, &samples)
}

fn summarize_master(ops: &[CollapseOperator], samples: &[Vec<C64>]) -> Result<(Vec<f64>, LindbladSummary)> {
    let pop_e: Vec<f64> = samples.iter().map(|s| s[E * DIM + E].re).collect();
    let last = samples.last().expect("grid has samples");
    let (emitted, xe_loss, recycling_events) = collapse_totals(ops, last);
    Ok((
        pop_e,
        LindbladSummary {
            emitted,
            xe_loss,
            recycling_events,
            remaining: (0..DIM).map(|k| last[k * DIM + k].re).sum(),
        },
    ))
}

fn run_master_equation(
    cfg: &NodeConfig,
    psi0: &StateVector,
    times: &[f64],
    ode: &OdeOptions,
) -> Result<(Vec<f64>, LindbladSummary)> {
    let (h, ops) = cart::build_lindblad_generator(cfg)?;
    let sys = LindbladSystem::new(&h, &ops)?;
    let sol = integrate(&sys, &density_vector(psi0, ops.len()), times, ode)?;
    summarize_master(&ops, &sol.samples)
}

/// Picks an emission grid on [0, t1] long enough for the pure branch to have left
/// |i⟩, |e⟩ and the cavity (remaining norm below `residual`). Falls back to
/// [0, 10/κ] when nothing is emitted at all.
pub fn auto_grid(cfg: &NodeConfig, n: usize, residual: f64, ode: &OdeOptions) -> Result<TimeGrid> {
    let h_eff = cart::build_effective_hamiltonian(cfg)?;
    let kappa = angular(cfg.kappa).max(1e-3);
    let fallback = TimeGrid::new(0.0, 10.0 / kappa, n);
    let sys = SchrodingerSystem::new(&h_eff);
    let exact = uses_exact_steps(&h_eff, Stepping::Auto, ode);
    let mut psi = StateVector::basis(DIM, I).0;
    let mut t = 0.0;
    let mut step = 10.0 / kappa;
    let cap = 500.0;
    while t < cap {
        let next = t + step;
        psi = if exact {
            matrix_exponential(&h_eff.at(0.0).scale(C64::new(0.0, -step)))?.mul_vec(&psi)
        } else {
            integrate(&sys, &psi, &[t, next], ode)?.samples[1].clone()
        };
        t = next;
        let remaining: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if remaining < residual {
            return TimeGrid::new(0.0, t, n);
        }
        if remaining > 0.999 {
            return fallback;
        }
        step *= 1.25;
    }
    log::warn!("emission not complete after {cap} µs");
    TimeGrid::new(0.0, t, n)
}

/// ∫P(s) φ_c(t_i − s) φ_{c'}*(t_j − s) ds by direct summation.
pub fn mixed_channel_correlator(rec: &EmissionRecord, c: Channel, c2: Channel, i: usize, j: usize) -> C64 {
    let a = rec.channel(c);
    let b = rec.channel(c2);
    let q = rec.mixture_weights();
    let mut s = C64::new(0.0, 0.0);
    for (k, w) in q.iter().enumerate().take(i.min(j) + 1) {
        s += a[i - k] * b[j - k].conj() * *w;
    }
    s
}

/// Full table M(i, j) = ∫P(s) φ_c(t_i − s) φ_{c'}*(t_j − s) ds, row-major n × n.
///
/// For each offset d = j − i the sum over s is a 1-D convolution of the mixture
/// weights with φ_c(k) φ_{c'}*(k + d), done by FFT.
pub fn correlator_table(rec: &EmissionRecord, c: Channel, c2: Channel, exec: Execution) -> Vec<C64> {
    let n = rec.grid().n;
    let conv = Convolver::new(&rec.mixture_weights());
    let a = rec.channel(c);
    let b = rec.channel(c2);
    let offsets: Vec<isize> = (-(n as isize - 1)..n as isize).collect();
    let diagonals = par::map(exec, &offsets, |&d| {
        let (i0, j0) = if d >= 0 {
            (0, d as usize)
        } else {
            ((-d) as usize, 0)
        };
        let len = n - d.unsigned_abs();
        let seq: Vec<C64> = (0..len).map(|k| a[i0 + k] * b[j0 + k].conj()).collect();
        conv.apply(&seq)
    });
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for (d, diag) in offsets.iter().zip(diagonals) {
        let (i0, j0) = if *d >= 0 {
            (0, *d as usize)
        } else {
            ((-*d) as usize, 0)
        };
        for (k, v) in diag.into_iter().enumerate() {
            out[(i0 + k) * n + j0 + k] = v;
        }
    }
    out
}

/// Equal-time values M(i, i) for the channel pair (c, c').
pub fn correlator_equal_time(rec: &EmissionRecord, c: Channel, c2: Channel) -> Vec<C64> {
    let q = rec.mixture_weights();
    let p: Vec<C64> = rec
        .channel(c)
        .iter()
        .zip(rec.channel(c2))
        .map(|(a, b)| a * b.conj())
        .collect();
    Convolver::new(&q).apply(&p)
}

/// Diagonal M(i, i) for c = c', real and non-negative.
pub fn correlator_diagonal(rec: &EmissionRecord, c: Channel) -> Vec<f64> {
    correlator_equal_time(rec, c, c)
        .into_iter()
        .map(|z| z.re.max(0.0))
        .collect()
}

/// Causal linear convolution with fixed real weights: out[i] = Σ_{s ≤ i} q_s x_{i−s}.
struct Convolver {
    len: usize,
    q_hat: Vec<C64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    direct: Option<Vec<f64>>,
}

impl Convolver {
    fn new(q: &[f64]) -> Self {
        let len = (2 * q.len()).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        // A pure delta needs no transform and stays exact.
        let direct = if q[1..].iter().all(|&w| w == 0.0) {
            Some(q.to_vec())
        } else {
            None
        };
        let mut q_hat: Vec<C64> = q.iter().map(|&w| C64::new(w, 0.0)).collect();
        q_hat.resize(len, C64::new(0.0, 0.0));
        fwd.process(&mut q_hat);
        Self {
            len,
            q_hat,
            fwd,
            inv,
            direct,
        }
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        if let Some(q) = &self.direct {
            return x.iter().map(|z| z * q[0]).collect();
        }
        let mut buf = x.to_vec();
        buf.resize(self.len, C64::new(0.0, 0.0));
        self.fwd.process(&mut buf);
        for (b, q) in buf.iter_mut().zip(&self.q_hat) {
            *b *= q;
        }
        self.inv.process(&mut buf);
        let s = 1.0 / self.len as f64;
        buf.truncate(x.len());
        buf.iter_mut().for_each(|z| *z *= s);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cart::{BirefringenceSpec, DriveConfig, Encoding};

    fn generic() -> NodeConfig {
        NodeConfig {
            g1: 10.0,
            g2: 10.0,
            kappa: 5.0,
            gamma_ie: 0.0,
            gamma_xe: 0.0,
            drive: DriveConfig {
                omega1: 40.0,
                omega2: 40.0,
                delta1: 400.0,
                delta2: 400.0,
                theta: 0.0,
            },
            birefringence: BirefringenceSpec::along_x(0.0),
            encoding: Encoding::Frequency,
        }
    }

    fn lossy() -> NodeConfig {
        NodeConfig {
            gamma_ie: 3.0,
            gamma_xe: 6.0,
            birefringence: BirefringenceSpec::along_x(2.0),
            ..generic()
        }
    }

    #[test]
    fn no_recycling_gives_pure_delta() {
        let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
        let rec = simulate_emission(&generic(), &grid, &EmissionOptions::default()).unwrap();
        assert_eq!(rec.pure_weight, 1.0);
        assert!(rec.reexcitation_density.iter().all(|&r| r == 0.0));
        assert!(rec.emitted > 0.5);
    }

    #[test]
    fn drives_off_is_dark() {
        let mut cfg = lossy();
        cfg.drive.omega1 = 0.0;
        cfg.drive.omega2 = 0.0;
        let grid = TimeGrid::new(0.0, 1.0, 101).unwrap();
        let rec = simulate_emission(&cfg, &grid, &EmissionOptions::default()).unwrap();
        for c in Channel::ALL {
            assert!(rec.channel(c).iter().all(|z| z.norm() == 0.0));
        }
        assert!((rec.unreleased - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bare_cavity_decay() {
        let mut cfg = generic();
        cfg.g1 = 0.0;
        cfg.g2 = 0.0;
        cfg.drive.omega1 = 0.0;
        cfg.drive.omega2 = 0.0;
        let grid = TimeGrid::new(0.0, 1.5, 3001).unwrap();
        let psi0 = StateVector::basis(DIM, cart::UP_RH);
        let rec = simulate_emission_from(&cfg, &psi0, &grid, &EmissionOptions::default()).unwrap();
        let k = angular(cfg.kappa);
        for (t, z) in grid.times().iter().zip(rec.channel(Channel::RH)) {
            assert!((z - C64::new((2.0 * k).sqrt() * (-k * t).exp(), 0.0)).norm() < 1e-8);
        }
        assert!((rec.emitted - 1.0).abs() < 1e-9);
        assert!((rec.wavepacket.norm(Channel::RH) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn bookkeeping_closes() {
        let grid = TimeGrid::new(0.0, 3.0, 1001).unwrap();
        let rec = simulate_emission(&lossy(), &grid, &EmissionOptions::default()).unwrap();
        let sum = rec.emitted + rec.xe_loss + rec.recycled + rec.unreleased;
        assert!((sum - 1.0).abs() < 1e-7, "{sum}");
        assert!((rec.total_weight() - 1.0).abs() < 1e-12);
        assert!((rec.wavepacket.total_norm() - rec.emitted).abs() < 1e-3);
        let l = rec.lindblad.unwrap();
        assert!((l.emitted + l.xe_loss + l.remaining - 1.0).abs() < 1e-7);
        // recycled pure-branch probability is the first-event share of all recycling
        assert!(l.recycling_events >= rec.recycled);
    }

    #[test]
    fn exact_and_adaptive_stepping_agree() {
        let mut cfg = lossy();
        cfg.drive.delta1 = 100.0;
        cfg.drive.delta2 = 100.0;
        let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
        let exact = simulate_emission(&cfg, &grid, &EmissionOptions::default()).unwrap();
        let adaptive = simulate_emission(
            &cfg,
            &grid,
            &EmissionOptions {
                stepping: Stepping::Adaptive,
                ..Default::default()
            },
        )
        .unwrap();
        for c in Channel::ALL {
            for (x, y) in exact.channel(c).iter().zip(adaptive.channel(c)) {
                assert!((x - y).norm() < 1e-7, "{c:?}");
            }
        }
        for (x, y) in exact
            .reexcitation_density
            .iter()
            .zip(&adaptive.reexcitation_density)
        {
            assert!((x - y).abs() < 1e-7);
        }
        for (x, y) in [
            (exact.emitted, adaptive.emitted),
            (exact.xe_loss, adaptive.xe_loss),
            (exact.recycled, adaptive.recycled),
            (exact.unreleased, adaptive.unreleased),
            (exact.pure_weight, adaptive.pure_weight),
        ] {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        let (a, b) = (exact.lindblad.unwrap(), adaptive.lindblad.unwrap());
        assert!((a.recycling_events - b.recycling_events).abs() < 1e-8);
        assert!((a.remaining - b.remaining).abs() < 1e-8);
    }

    #[test]
    fn zero_birefringence_leaves_v_channels_dark() {
        let grid = TimeGrid::new(0.0, 2.0, 201).unwrap();
        let rec = simulate_emission(&generic(), &grid, &EmissionOptions::default()).unwrap();
        assert!(rec.wavepacket.norm(Channel::RV) < 1e-10);
        assert!(rec.wavepacket.norm(Channel::BV) < 1e-10);
    }

    #[test]
    fn population_weighting_changes_only_density() {
        let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
        let mut opts = EmissionOptions::default();
        let rate = simulate_emission(&lossy(), &grid, &opts).unwrap();
        opts.weighting = ReexcitationWeighting::Population;
        let pop = simulate_emission(&lossy(), &grid, &opts).unwrap();
        assert_eq!(rate.wavepacket, pop.wavepacket);
        assert!(pop.pure_weight > rate.pure_weight);
        assert!((pop.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlator_pure_limit() {
        let grid = TimeGrid::new(0.0, 2.0, 65).unwrap();
        let rec = simulate_emission(&generic().with_delta(3.0), &grid, &EmissionOptions::default()).unwrap();
        let table = correlator_table(&rec, Channel::RH, Channel::RV, Execution::Sequential);
        let a = rec.channel(Channel::RH);
        let b = rec.channel(Channel::RV);
        for i in 0..65 {
            for j in 0..65 {
                assert!((table[i * 65 + j] - a[i] * b[j].conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn correlator_fft_matches_direct_sum() {
        let grid = TimeGrid::new(0.0, 2.0, 97).unwrap();
        let rec = simulate_emission(&lossy(), &grid, &EmissionOptions::default()).unwrap();
        assert!(rec.has_reexcitation());
        for (c, c2) in [(Channel::RH, Channel::BH), (Channel::RV, Channel::RH)] {
            let table = correlator_table(&rec, c, c2, Execution::Parallel);
            let scale = table.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for i in (0..97).step_by(7) {
                for j in (0..97).step_by(5) {
                    let direct = mixed_channel_correlator(&rec, c, c2, i, j);
                    assert!((table[i * 97 + j] - direct).norm() < 1e-12 * scale);
                }
            }
        }
        let diag = correlator_diagonal(&rec, Channel::BH);
        for i in 0..97 {
            let direct = mixed_channel_correlator(&rec, Channel::BH, Channel::BH, i, i);
            assert!(direct.im.abs() < 1e-15 && direct.re >= 0.0);
            assert!((diag[i] - direct.re).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_mixture_against_brute_force() {
        let grid = TimeGrid::new(0.0, 2.0, 81).unwrap();
        let mut rec =
            simulate_emission(&generic().with_delta(2.0), &grid, &EmissionOptions::default()).unwrap();
        let tau = 9;
        rec.pure_weight = 0.5;
        rec.reexcitation_density = vec![0.0; 81];
        rec.reexcitation_density[tau] = 0.5 / grid.weight(tau);
        rec.check_normalized().unwrap();
        let a = rec.channel(Channel::RH).to_vec();
        let b = rec.channel(Channel::BV).to_vec();
        let table = correlator_table(&rec, Channel::RH, Channel::BV, Execution::Sequential);
        for i in 0..81 {
            for j in 0..81 {
                let mut expected = a[i] * b[j].conj() * 0.5;
                if i >= tau && j >= tau {
                    expected += a[i - tau] * b[j - tau].conj() * 0.5;
                }
                assert!((table[i * 81 + j] - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn decimation_preserves_normalization() {
        let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
        let rec = simulate_emission(&lossy(), &grid, &EmissionOptions::default()).unwrap();
        let coarse = rec.decimated(4).unwrap();
        assert_eq!(coarse.grid().n, 101);
        assert!((coarse.total_weight() - 1.0).abs() < 1e-12);
        assert_eq!(coarse.channel(Channel::RH)[25], rec.channel(Channel::RH)[100]);
    }

    #[test]
    fn auto_grid_captures_emission() {
        let grid = auto_grid(&generic(), 101, 1e-4, &OdeOptions::default()).unwrap();
        let rec = simulate_emission(&generic(), &grid, &EmissionOptions::default()).unwrap();
        assert!(rec.unreleased < 1e-4);
        assert!(rec.residual_active < 1e-4);
    }
}
