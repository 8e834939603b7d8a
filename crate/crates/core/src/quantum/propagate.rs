use num_complex::Complex64 as C64;

use super::ode::{integrate, OdeOptions, OdeSystem};
use super::{matrix_exponential, ComplexMatrix, DensityMatrix, StateVector, TimeDependentOperator};
use crate::{Error, Result};

/// ψ' = −i H(t) ψ
pub struct SchrodingerSystem<'a> {
    h: &'a TimeDependentOperator,
}

impl<'a> SchrodingerSystem<'a> {
    pub fn new(h: &'a TimeDependentOperator) -> Self {
        Self { h }
    }
}

impl OdeSystem for SchrodingerSystem<'_> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.h.dim();
        dy.fill(C64::new(0.0, 0.0));
        for (f, m) in self.h.terms() {
            let s = f.at(t) * C64::new(0.0, -1.0);
            let a = m.as_slice();
            for i in 0..n {
                let row = &a[i * n..(i + 1) * n];
                let v: C64 = row.iter().zip(y).map(|(x, z)| x * z).sum();
                dy[i] += s * v;
            }
        }
    }
}

pub fn propagate_schrodinger(
    h_eff: &TimeDependentOperator,
    psi0: &StateVector,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<StateVector>> {
    if psi0.dim() != h_eff.dim() {
        return Err(Error::DimensionMismatch {
            expected: h_eff.dim(),
            got: psi0.dim(),
        });
    }
    let sol = integrate(&SchrodingerSystem::new(h_eff), &psi0.0, times, opts)?;
    Ok(sol.samples.into_iter().map(StateVector).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseKind {
    /// Full Lindblad term, L ρ L† is kept.
    Jump,
    /// Only the anticommutator part: the population leaves the simulated space.
    Loss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOperator {
    pub op: ComplexMatrix,
    pub kind: CollapseKind,
    pub label: &'static str,
}

impl CollapseOperator {
    pub fn jump(op: ComplexMatrix, label: &'static str) -> Self {
        Self {
            op,
            kind: CollapseKind::Jump,
            label,
        }
    }

    pub fn loss(op: ComplexMatrix, label: &'static str) -> Self {
        Self {
            op,
            kind: CollapseKind::Loss,
            label,
        }
    }
}

/// Master equation with Hermitian `h` and collapse operators. The state is ρ
/// (row-major) followed by one accumulator per collapse operator holding
/// ∫ tr(L ρ L†) dt, the expected number of events in that channel.
pub struct LindbladSystem<'a> {
    h_eff: TimeDependentOperator,
    jumps: Vec<&'a ComplexMatrix>,
    rates: Vec<ComplexMatrix>,
}

impl<'a> LindbladSystem<'a> {
    pub fn new(h: &TimeDependentOperator, collapse: &'a [CollapseOperator]) -> Result<Self> {
        let n = h.dim();
        let mut anti = ComplexMatrix::zeros(n);
        let mut rates = Vec::with_capacity(collapse.len());
        let mut jumps = Vec::new();
        for c in collapse {
            if c.op.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.op.dim(),
                });
            }
            let ll = c.op.adjoint().matmul(&c.op);
            anti = &anti + &ll;
            rates.push(ll);
            if c.kind == CollapseKind::Jump {
                jumps.push(&c.op);
            }
        }
        let h_eff = h.plus_constant(&anti.scale(C64::new(0.0, -0.5)));
        Ok(Self { h_eff, jumps, rates })
    }

    pub fn state_dim(&self) -> usize {
        self.h_eff.dim()
    }
}

impl OdeSystem for LindbladSystem<'_> {
    fn dim(&self) -> usize {
        let n = self.h_eff.dim();
        n * n + self.rates.len()
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.h_eff.dim();
        let rho = &y[..n * n];
        let h = self.h_eff.at(t);
        let h = h.as_slice();
        let (drho, dacc) = dy.split_at_mut(n * n);
        // −i(H ρ − ρ H†)
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    s += h[i * n + k] * rho[k * n + j] - rho[i * n + k] * h[j * n + k].conj();
                }
                drho[i * n + j] = C64::new(s.im, -s.re);
            }
        }
        let mut tmp = vec![C64::new(0.0, 0.0); n * n];
        for l in &self.jumps {
            let l = l.as_slice();
            // tmp = L ρ
            for i in 0..n {
                for j in 0..n {
                    tmp[i * n + j] = (0..n).map(|k| l[i * n + k] * rho[k * n + j]).sum();
                }
            }
            // += tmp L†
            for i in 0..n {
                for j in 0..n {
                    let s: C64 = (0..n).map(|k| tmp[i * n + k] * l[j * n + k].conj()).sum();
                    drho[i * n + j] += s;
                }
            }
        }
        for (d, ll) in dacc.iter_mut().zip(&self.rates) {
            let ll = ll.as_slice();
            let mut s = C64::new(0.0, 0.0);
            for i in 0..n {
                for k in 0..n {
                    s += ll[i * n + k] * rho[k * n + i];
                }
            }
            *d = C64::new(s.re, 0.0);
        }
    }
}

#[derive(Debug, Clone)]
pub struct LindbladTrajectory {
    pub states: Vec<DensityMatrix>,
    /// `events[k][c]`: expected number of events of collapse operator `c` up to sample `k`.
    pub events: Vec<Vec<f64>>,
}

pub fn propagate_lindblad(
    h: &TimeDependentOperator,
    collapse: &[CollapseOperator],
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<LindbladTrajectory> {
    let n = h.dim();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rho0.dim(),
        });
    }
    let sys = LindbladSystem::new(h, collapse)?;
    let mut y0 = rho0.0.as_slice().to_vec();
    y0.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(collapse.len()));
    let sol = integrate(&sys, &y0, times, opts)?;
    let mut states = Vec::with_capacity(sol.samples.len());
    let mut events = Vec::with_capacity(sol.samples.len());
    for s in sol.samples {
        states.push(DensityMatrix(ComplexMatrix::from_slice(n, &s[..n * n])?));
        events.push(s[n * n..].iter().map(|z| z.re).collect());
    }
    Ok(LindbladTrajectory { states, events })
}

/// Matrix of a complex-linear system at time `t`, assembled column by column from
/// its right-hand side.
pub fn generator_matrix<S: OdeSystem>(sys: &S, t: f64) -> ComplexMatrix {
    let n = sys.dim();
    let mut m = ComplexMatrix::zeros(n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    let mut col = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        sys.rhs(t, &e, &mut col);
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v;
        }
        e[j] = C64::new(0.0, 0.0);
    }
    m
}

/// Samples y(k·h), k = 0..n, of y' = M y by repeated application of e^{Mh}.
pub fn propagate_constant(m: &ComplexMatrix, y0: &[C64], h: f64, n: usize) -> Result<Vec<Vec<C64>>> {
    if y0.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: y0.len(),
        });
    }
    let step = matrix_exponential(&m.scale(C64::new(h, 0.0)))?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(y0.to_vec());
    for k in 0..n {
        let next = step.mul_vec(&out[k]);
        if next.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite(format!("constant propagation at step {k}")));
        }
        out.push(next);
    }
    Ok(out)
}
