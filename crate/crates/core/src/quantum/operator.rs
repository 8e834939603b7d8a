use num_complex::Complex64 as C64;

use super::ComplexMatrix;
use crate::{Error, Result};

/// Scalar time dependence of one operator term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    Constant,
    /// e^{i(ωt + φ)} with ω in rad/µs.
    Oscillating {
        omega: f64,
        phase: f64,
    },
}

impl TimeFactor {
    pub fn at(&self, t: f64) -> C64 {
        match *self {
            TimeFactor::Constant => C64::new(1.0, 0.0),
            TimeFactor::Oscillating { omega, phase } => C64::from_polar(1.0, omega * t + phase),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Periodicity {
    Constant,
    Periodic(f64),
    Aperiodic,
}

/// Operator of the form Σ_k f_k(t)·M_k.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentOperator {
    dim: usize,
    terms: Vec<(TimeFactor, ComplexMatrix)>,
}

impl TimeDependentOperator {
    pub fn constant(m: ComplexMatrix) -> Self {
        Self {
            dim: m.dim(),
            terms: vec![(TimeFactor::Constant, m)],
        }
    }

    pub fn with_term(mut self, factor: TimeFactor, m: ComplexMatrix) -> Result<Self> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: m.dim(),
            });
        }
        if let TimeFactor::Oscillating { omega: 0.0, phase } = factor {
            let m = m.scale(C64::from_polar(1.0, phase));
            self.terms[0].1 = &self.terms[0].1 + &m;
        } else {
            self.terms.push((factor, m));
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(TimeFactor, ComplexMatrix)] {
        &self.terms
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim);
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut ComplexMatrix) {
        let dst = out.as_mut_slice();
        dst.fill(C64::new(0.0, 0.0));
        for (f, m) in &self.terms {
            let s = f.at(t);
            for (d, v) in dst.iter_mut().zip(m.as_slice()) {
                *d += s * v;
            }
        }
    }

    /// Adds a constant matrix to the time-independent part.
    pub fn plus_constant(&self, m: &ComplexMatrix) -> Self {
        let mut out = self.clone();
        out.terms[0].1 = &out.terms[0].1 + m;
        out
    }

    pub fn periodicity(&self) -> Periodicity {
        let mut omega: Option<f64> = None;
        for (f, m) in &self.terms {
            if let TimeFactor::Oscillating { omega: w, .. } = f {
                if m.as_slice().iter().all(|z| z.norm() == 0.0) {
                    continue;
                }
                match omega {
                    None => omega = Some(w.abs()),
                    Some(o) if (o - w.abs()).abs() <= 1e-12 * o => {}
                    Some(_) => return Periodicity::Aperiodic,
                }
            }
        }
        match omega {
            None => Periodicity::Constant,
            Some(w) => Periodicity::Periodic(std::f64::consts::TAU / w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillating_term_evaluates_phase() {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        let op = TimeDependentOperator::constant(ComplexMatrix::identity(2))
            .with_term(
                TimeFactor::Oscillating {
                    omega: 2.0,
                    phase: 0.5,
                },
                m,
            )
            .unwrap();
        let h = op.at(0.25);
        assert!((h[(0, 1)] - C64::from_polar(1.0, 1.0)).norm() < 1e-15);
        assert_eq!(h[(0, 0)], C64::new(1.0, 0.0));
        match op.periodicity() {
            Periodicity::Periodic(p) => assert!((p - std::f64::consts::PI).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_frequency_folds_into_constant() {
        let op = TimeDependentOperator::constant(ComplexMatrix::zeros(2))
            .with_term(
                TimeFactor::Oscillating {
                    omega: 0.0,
                    phase: 0.0,
                },
                ComplexMatrix::identity(2),
            )
            .unwrap();
        assert_eq!(op.periodicity(), Periodicity::Constant);
        assert_eq!(op.at(3.0), ComplexMatrix::identity(2));
    }
}
