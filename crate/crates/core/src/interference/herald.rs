//! Heralded two-atom state after the beam splitter.
//!
//! A detection pattern is two clicks (port, set of resolved mode labels) at times
//! t₁ and t₂. Mode labels that the detectors cannot distinguish but that are
//! orthogonal (e.g. H and V behind a polarization-blind dichroic) are summed
//! incoherently as separate hypotheses; node channels sharing a mode label add
//! coherently. Each hypothesis is a list of amplitude terms
//! coef · φ_A(c_A, t_A) · φ_B(c_B, t_B) attached to one atomic component.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64 as C64;

use super::beam_splitter::{sign, Node, Port};
use crate::cart::{Channel, Encoding};
use crate::emission::{correlator_equal_time, correlator_table, EmissionRecord};
use crate::par::{self, Execution};

pub const UU: usize = 0;
pub const UD: usize = 1;
pub const DU: usize = 2;
pub const DD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slot {
    First,
    Second,
}

#[derive(Debug, Clone, Copy)]
pub struct Term {
    pub coef: f64,
    pub a: Channel,
    pub a_slot: Slot,
    pub b: Channel,
    pub b_slot: Slot,
    pub comp: usize,
    /// 0 when node A supplied the first click, 1 otherwise.
    pub group: u8,
}

#[derive(Debug, Clone)]
pub struct Click {
    pub port: Port,
    pub modes: Vec<u8>,
}

pub fn mode_of(ch: Channel, enc: Encoding) -> u8 {
    match enc {
        Encoding::Frequency => ch.index() as u8,
        Encoding::Polarization => ch.is_vertical() as u8,
    }
}

pub fn channels_with(mode: u8, enc: Encoding) -> Vec<Channel> {
    Channel::ALL
        .into_iter()
        .filter(|&c| mode_of(c, enc) == mode)
        .collect()
}

fn component(a: Channel, b: Channel) -> usize {
    match (a.is_up(), b.is_up()) {
        (true, true) => UU,
        (true, false) => UD,
        (false, true) => DU,
        (false, false) => DD,
    }
}

/// Expands a two-click pattern into hypotheses. `factor` scales every amplitude.
pub fn hypotheses(enc: Encoding, first: &Click, second: &Click, factor: f64) -> Vec<Vec<Term>> {
    let mut out = Vec::new();
    for &m1 in &first.modes {
        for &m2 in &second.modes {
            let mut terms = Vec::new();
            for (group, (ma, pa, sa), (mb, pb, sb)) in [
                (
                    0u8,
                    (m1, first.port, Slot::First),
                    (m2, second.port, Slot::Second),
                ),
                (
                    1u8,
                    (m2, second.port, Slot::Second),
                    (m1, first.port, Slot::First),
                ),
            ] {
                let coef = factor * sign(Node::A, pa) * sign(Node::B, pb);
                for a in channels_with(ma, enc) {
                    for b in channels_with(mb, enc) {
                        terms.push(Term {
                            coef,
                            a,
                            a_slot: sa,
                            b,
                            b_slot: sb,
                            comp: component(a, b),
                            group,
                        });
                    }
                }
            }
            out.push(terms);
        }
    }
    out
}

/// Per-node source of φ_c(t_x) φ_{c'}*(t_y), pure or re-excitation averaged.
pub struct NodeCorrelator<'a> {
    rec: &'a EmissionRecord,
    n: usize,
    mixed: bool,
    equal: BTreeMap<(Channel, Channel), Vec<C64>>,
    full: BTreeMap<(Channel, Channel), Vec<C64>>,
}

impl<'a> NodeCorrelator<'a> {
    /// `needs` lists (c, slot, c', slot') combinations that will be requested.
    pub fn new(
        rec: &'a EmissionRecord,
        mixed: bool,
        needs: &BTreeSet<(Channel, Slot, Channel, Slot)>,
        exec: Execution,
    ) -> Self {
        let n = rec.grid().n;
        let mut equal_keys = BTreeSet::new();
        let mut full_keys = BTreeSet::new();
        if mixed {
            for &(c, s, c2, s2) in needs {
                let key = if c <= c2 { (c, c2) } else { (c2, c) };
                if s == s2 {
                    equal_keys.insert(key);
                } else {
                    full_keys.insert(key);
                }
            }
        }
        let equal_keys: Vec<_> = equal_keys.into_iter().collect();
        let full_keys: Vec<_> = full_keys.into_iter().collect();
        let equal = equal_keys
            .iter()
            .copied()
            .zip(par::map(exec, &equal_keys, |&(c, c2)| {
                correlator_equal_time(rec, c, c2)
            }))
            .collect();
        let full = full_keys
            .iter()
            .map(|&(c, c2)| ((c, c2), correlator_table(rec, c, c2, exec)))
            .collect();
        Self {
            rec,
            n,
            mixed,
            equal,
            full,
        }
    }

    #[inline]
    pub fn get(&self, c: Channel, x: usize, sx: Slot, c2: Channel, y: usize, sy: Slot) -> C64 {
        if !self.mixed {
            return self.rec.channel(c)[x] * self.rec.channel(c2)[y].conj();
        }
        if sx == sy {
            if c <= c2 {
                self.equal[&(c, c2)][x]
            } else {
                self.equal[&(c2, c)][x].conj()
            }
        } else if c <= c2 {
            self.full[&(c, c2)][x * self.n + y]
        } else {
            self.full[&(c2, c)][y * self.n + x].conj()
        }
    }
}

/// Everything needed from one (t₁, t₂) cell.
#[derive(Debug, Clone, Copy, Default)]
pub struct CellState {
    pub diag: [f64; 4],
    /// ⟨↑↓|ρ|↓↑⟩
    pub cross: C64,
    /// Trace with interference between the two assignments removed.
    pub distinguishable: f64,
}

impl CellState {
    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }
}

fn slot_index(s: Slot, i: usize, j: usize) -> usize {
    match s {
        Slot::First => i,
        Slot::Second => j,
    }
}

pub fn evaluate_pure(
    rec_a: &EmissionRecord,
    rec_b: &EmissionRecord,
    hyps: &[Vec<Term>],
    i: usize,
    j: usize,
) -> CellState {
    let mut st = CellState::default();
    for terms in hyps {
        let mut amp = [C64::new(0.0, 0.0); 4];
        let mut by_group = [[C64::new(0.0, 0.0); 4]; 2];
        for t in terms {
            let v = rec_a.channel(t.a)[slot_index(t.a_slot, i, j)]
                * rec_b.channel(t.b)[slot_index(t.b_slot, i, j)]
                * t.coef;
            amp[t.comp] += v;
            by_group[t.group as usize][t.comp] += v;
        }
        for k in 0..4 {
            st.diag[k] += amp[k].norm_sqr();
            st.distinguishable += by_group[0][k].norm_sqr() + by_group[1][k].norm_sqr();
        }
        st.cross += amp[UD] * amp[DU].conj();
    }
    st
}

pub fn evaluate_mixed(
    ma: &NodeCorrelator,
    mb: &NodeCorrelator,
    hyps: &[Vec<Term>],
    i: usize,
    j: usize,
) -> CellState {
    let mut st = CellState::default();
    for terms in hyps {
        for t in terms {
            let ta = slot_index(t.a_slot, i, j);
            let tb = slot_index(t.b_slot, i, j);
            for u in terms {
                let wanted = (t.comp == u.comp) || (t.comp == UD && u.comp == DU);
                if !wanted {
                    continue;
                }
                let ua = slot_index(u.a_slot, i, j);
                let ub = slot_index(u.b_slot, i, j);
                let v = ma.get(t.a, ta, t.a_slot, u.a, ua, u.a_slot)
                    * mb.get(t.b, tb, t.b_slot, u.b, ub, u.b_slot)
                    * (t.coef * u.coef);
                if t.comp == u.comp {
                    st.diag[t.comp] += v.re;
                    if t.group == u.group {
                        st.distinguishable += v.re;
                    }
                } else {
                    st.cross += v;
                }
            }
        }
    }
    st
}

/// All correlator lookups a set of hypotheses will make, per node.
pub fn needs(
    hyps: &[Vec<Term>],
) -> (
    BTreeSet<(Channel, Slot, Channel, Slot)>,
    BTreeSet<(Channel, Slot, Channel, Slot)>,
) {
    let mut a = BTreeSet::new();
    let mut b = BTreeSet::new();
    for terms in hyps {
        for t in terms {
            for u in terms {
                if t.comp == u.comp || (t.comp == UD && u.comp == DU) {
                    a.insert((t.a, t.a_slot, u.a, u.a_slot));
                    b.insert((t.b, t.b_slot, u.b, u.b_slot));
                }
            }
        }
    }
    (a, b)
}
