use num_complex::Complex64 as C64;

use crate::quantum::ComplexMatrix;

/// Output port of the 50:50 beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    C,
    D,
}

/// Input of the beam splitter: node A feeds port a, node B feeds port b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    A,
    B,
}

/// Amplitude sign for a photon from `node` leaving through `port`
/// (a → (c − d)/√2, b → (c + d)/√2); the 1/√2 is applied by the caller.
pub fn sign(node: Node, port: Port) -> f64 {
    match (node, port) {
        (Node::A, Port::D) => -1.0,
        _ => 1.0,
    }
}

/// Single-photon transfer matrix, columns are the inputs (a, b), rows the outputs (c, d).
pub fn matrix() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(2, |out, inp| {
        let node = if inp == 0 { Node::A } else { Node::B };
        let port = if out == 0 { Port::C } else { Port::D };
        C64::new(s * sign(node, port), 0.0)
    })
}

/// Maps single-photon mode amplitudes at a and b (same mode labelling) to c and d.
pub fn beam_splitter_transform(a: &[C64], b: &[C64]) -> (Vec<C64>, Vec<C64>) {
    assert_eq!(a.len(), b.len());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = a.iter().zip(b).map(|(x, y)| (x + y) * s).collect();
    let d = a.iter().zip(b).map(|(x, y)| (y - x) * s).collect();
    (c, d)
}

/// Probability of one photon in c and one in d when photon A (mode amplitudes
/// `alpha`) enters a and photon B (`beta`) enters b.
pub fn coincidence_probability(alpha: &[C64], beta: &[C64]) -> f64 {
    assert_eq!(alpha.len(), beta.len());
    let mut p = 0.0;
    for k in 0..alpha.len() {
        for l in 0..alpha.len() {
            p += (alpha[k] * beta[l] - alpha[l] * beta[k]).norm_sqr();
        }
    }
    0.25 * p
}
