//! Two-photon interference, heralded Bell states and coincidence-window statistics.

pub mod beam_splitter;
mod herald;
mod window;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use beam_splitter::{beam_splitter_transform, coincidence_probability, Node, Port};
pub use window::{band_area, window_aggregate, window_aggregate_with, WindowedResult};

use crate::cart::{Channel, Encoding};
use crate::emission::EmissionRecord;
use crate::grid::TimeGrid;
use crate::par::{self, Execution};
use crate::{Error, Result};
use herald::{evaluate_mixed, evaluate_pure, hypotheses, needs, CellState, Click, NodeCorrelator, Term};

/// Detector arrangement behind the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DetectionScheme {
    /// One detector per port, no frequency resolution; only c–d coincidences herald.
    Direct = 1,
    /// Frequency- and polarization-selective filters pass only the H component.
    FilterCavity = 2,
    /// Dichroic separation of red and blue, polarization-insensitive.
    Dichroic = 3,
}

impl TryFrom<u8> for DetectionScheme {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Self::Direct),
            2 => Ok(Self::FilterCavity),
            3 => Ok(Self::Dichroic),
            _ => Err(format!("detection scheme must be 1, 2 or 3, got {v}")),
        }
    }
}

impl From<DetectionScheme> for u8 {
    fn from(s: DetectionScheme) -> u8 {
        s as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceOptions {
    pub include_reexcitation: bool,
    /// Also accumulate the HOM coincidence maps used for the visibility.
    pub visibility: bool,
    pub execution: Execution,
}

impl Default for InterferenceOptions {
    fn default() -> Self {
        Self {
            include_reexcitation: false,
            visibility: true,
            execution: Execution::Parallel,
        }
    }
}

/// Same-frequency (or same-polarization) coincidences across the two ports.
#[derive(Debug, Clone, PartialEq)]
pub struct HomMaps {
    pub quantum: Vec<f64>,
    pub distinguishable: Vec<f64>,
}

/// p(t₁, t₂) and F(t₁, t₂) on a square grid, row index t₁, column index t₂.
///
/// For frequency encoding with schemes 2 and 3 the axes are (t_r, t_b); for scheme 1
/// they are the click times at ports c and d; for polarization encoding (t_H, t_V).
/// p is the total heralding probability density summed over all equivalent click
/// patterns, so ∫∫p is the absolute success probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMap {
    pub grid: TimeGrid,
    pub encoding: Encoding,
    pub scheme: DetectionScheme,
    pub p: Vec<f64>,
    /// p · F, kept separately so windowed averages need no masking.
    pub overlap: Vec<f64>,
    /// NaN where p < 1e−15 · max p.
    pub fidelity: Vec<f64>,
    /// ⟨↑↓|ρ|↓↑⟩ (unnormalized); the optimal Bell phase is −arg of it.
    pub coherence: Vec<C64>,
    pub hom: Option<HomMaps>,
}

impl CoincidenceMap {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn grid_r(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn grid_b(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn fidelity_at(&self, i: usize, j: usize) -> Option<f64> {
        let f = self.fidelity[i * self.n() + j];
        (!f.is_nan()).then_some(f)
    }

    /// Phase χ of the optimal Bell state (|↑↓⟩ + e^{iχ}|↓↑⟩)/√2 in cell (i, j).
    pub fn bell_phase_at(&self, i: usize, j: usize) -> f64 {
        -self.coherence[i * self.n() + j].arg()
    }

    pub fn total_probability(&self) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.p[i * n + j] * self.grid.weight(i) * self.grid.weight(j);
            }
        }
        s
    }
}

fn check_pair(a: &EmissionRecord, b: &EmissionRecord) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    a.check_normalized()?;
    b.check_normalized()
}

fn red() -> Vec<u8> {
    vec![Channel::RH.index() as u8, Channel::RV.index() as u8]
}

fn blue() -> Vec<u8> {
    vec![Channel::BH.index() as u8, Channel::BV.index() as u8]
}

fn frequency_hypotheses(scheme: DetectionScheme) -> Vec<Vec<Term>> {
    let enc = Encoding::Frequency;
    match scheme {
        DetectionScheme::Dichroic => hypotheses(
            enc,
            &Click {
                port: Port::C,
                modes: red(),
            },
            &Click {
                port: Port::C,
                modes: blue(),
            },
            1.0,
        ),
        DetectionScheme::FilterCavity => hypotheses(
            enc,
            &Click {
                port: Port::C,
                modes: vec![Channel::RH.index() as u8],
            },
            &Click {
                port: Port::C,
                modes: vec![Channel::BH.index() as u8],
            },
            1.0,
        ),
        DetectionScheme::Direct => {
            let all: Vec<u8> = (0..4).collect();
            hypotheses(
                enc,
                &Click {
                    port: Port::C,
                    modes: all.clone(),
                },
                &Click {
                    port: Port::D,
                    modes: all,
                },
                0.5,
            )
        }
    }
}

fn polarization_hypotheses() -> Vec<Vec<Term>> {
    hypotheses(
        Encoding::Polarization,
        &Click {
            port: Port::C,
            modes: vec![0],
        },
        &Click {
            port: Port::C,
            modes: vec![1],
        },
        1.0,
    )
}

fn hom_hypotheses(enc: Encoding) -> Vec<Vec<Term>> {
    let groups: Vec<Vec<u8>> = match enc {
        Encoding::Frequency => vec![red(), blue()],
        Encoding::Polarization => vec![vec![0], vec![1]],
    };
    groups
        .into_iter()
        .flat_map(|modes| {
            hypotheses(
                enc,
                &Click {
                    port: Port::C,
                    modes: modes.clone(),
                },
                &Click { port: Port::D, modes },
                0.5,
            )
        })
        .collect()
}

struct Cell {
    herald: CellState,
    hom: CellState,
}

fn build_map(
    a: &EmissionRecord,
    b: &EmissionRecord,
    encoding: Encoding,
    scheme: DetectionScheme,
    hyps: Vec<Vec<Term>>,
    opts: &InterferenceOptions,
) -> Result<CoincidenceMap> {
    check_pair(a, b)?;
    let exec = opts.execution;
    let n = a.grid().n;
    let hom_hyps = if opts.visibility {
        hom_hypotheses(encoding)
    } else {
        Vec::new()
    };
    let mixed = opts.include_reexcitation && (a.has_reexcitation() || b.has_reexcitation());

    let mut all = hyps.clone();
    all.extend(hom_hyps.iter().cloned());
    let (need_a, need_b) = needs(&all);
    let (ca, cb) = par::join(
        exec,
        || NodeCorrelator::new(a, mixed, &need_a, exec),
        || NodeCorrelator::new(b, mixed, &need_b, exec),
    );

    let eval = |h: &[Vec<Term>], i, j| {
        if mixed {
            evaluate_mixed(&ca, &cb, h, i, j)
        } else {
            evaluate_pure(a, b, h, i, j)
        }
    };
    let mut cells: Vec<Cell> = (0..n * n)
        .map(|_| Cell {
            herald: CellState::default(),
            hom: CellState::default(),
        })
        .collect();
    par::for_each_chunk(exec, &mut cells, n, |i, row| {
        for (j, cell) in row.iter_mut().enumerate() {
            cell.herald = eval(&hyps, i, j);
            if !hom_hyps.is_empty() {
                cell.hom = eval(&hom_hyps, i, j);
            }
        }
    });

    let p: Vec<f64> = cells.iter().map(|c| c.herald.trace().max(0.0)).collect();
    let pmax = p.iter().copied().fold(0.0, f64::max);
    let mut overlap = Vec::with_capacity(n * n);
    let mut fidelity = Vec::with_capacity(n * n);
    let mut coherence = Vec::with_capacity(n * n);
    for (c, &pc) in cells.iter().zip(&p) {
        let num = (0.5 * (c.herald.diag[herald::UD] + c.herald.diag[herald::DU]) + c.herald.cross.norm())
            .clamp(0.0, pc);
        overlap.push(num);
        coherence.push(c.herald.cross);
        fidelity.push(if pc > 1e-15 * pmax && pc > 0.0 {
            (num / pc).clamp(0.0, 1.0)
        } else {
            f64::NAN
        });
    }
    if p.iter().chain(&overlap).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coincidence map".into()));
    }
    let hom = opts.visibility.then(|| HomMaps {
        quantum: cells.iter().map(|c| c.hom.trace().max(0.0)).collect(),
        distinguishable: cells.iter().map(|c| c.hom.distinguishable.max(0.0)).collect(),
    });
    Ok(CoincidenceMap {
        grid: *a.grid(),
        encoding,
        scheme,
        p,
        overlap,
        fidelity,
        coherence,
        hom,
    })
}

/// Frequency-encoding heralding map for the given detection scheme.
pub fn coincidence_map_frequency(
    a: &EmissionRecord,
    b: &EmissionRecord,
    scheme: DetectionScheme,
    include_reexcitation: bool,
) -> Result<CoincidenceMap> {
    coincidence_map_frequency_with(
        a,
        b,
        scheme,
        &InterferenceOptions {
            include_reexcitation,
            ..Default::default()
        },
    )
}

pub fn coincidence_map_frequency_with(
    a: &EmissionRecord,
    b: &EmissionRecord,
    scheme: DetectionScheme,
    opts: &InterferenceOptions,
) -> Result<CoincidenceMap> {
    build_map(
        a,
        b,
        Encoding::Frequency,
        scheme,
        frequency_hypotheses(scheme),
        opts,
    )
}

/// Polarization-encoding heralding map: one H and one V click at the same port.
/// Records must come from polarization-encoding configurations.
pub fn coincidence_map_polarization(
    a: &EmissionRecord,
    b: &EmissionRecord,
    include_reexcitation: bool,
) -> Result<CoincidenceMap> {
    coincidence_map_polarization_with(
        a,
        b,
        &InterferenceOptions {
            include_reexcitation,
            ..Default::default()
        },
    )
}

pub fn coincidence_map_polarization_with(
    a: &EmissionRecord,
    b: &EmissionRecord,
    opts: &InterferenceOptions,
) -> Result<CoincidenceMap> {
    build_map(
        a,
        b,
        Encoding::Polarization,
        DetectionScheme::Dichroic,
        polarization_hypotheses(),
        opts,
    )
}

/// V = 1 − C_quantum / C_distinguishable over the whole grid.
pub fn hom_visibility(
    a: &EmissionRecord,
    b: &EmissionRecord,
    encoding: Encoding,
    include_reexcitation: bool,
) -> Result<f64> {
    check_pair(a, b)?;
    let opts = InterferenceOptions {
        include_reexcitation,
        visibility: true,
        execution: Execution::Parallel,
    };
    let map = build_map(a, b, encoding, DetectionScheme::Dichroic, Vec::new(), &opts)?;
    let hom = map.hom.as_ref().expect("visibility requested");
    let g = &map.grid;
    let n = g.n;
    let (mut q, mut d) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = g.weight(i) * g.weight(j);
            q += w * hom.quantum[i * n + j];
            d += w * hom.distinguishable[i * n + j];
        }
    }
    if d <= 0.0 {
        return Err(Error::ZeroCoincidence);
    }
    Ok((1.0 - q / d).clamp(0.0, 1.0))
}
