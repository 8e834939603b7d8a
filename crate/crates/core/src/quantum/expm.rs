use num_complex::Complex64 as C64;

use super::ComplexMatrix;
use crate::{Error, Result};

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// e^A by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exponential(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix_exponential input".into()));
    }
    let n = a.dim();
    let norm = a.norm_one();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(C64::new(0.5f64.powi(s), 0.0));
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let id = ComplexMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let lin = |c6: usize, c4: usize, c2: usize, c0: Option<usize>| {
        let mut m = &(&a6.scale(b(c6)) + &a4.scale(b(c4))) + &a2.scale(b(c2));
        if let Some(c0) = c0 {
            m = &m + &id.scale(b(c0));
        }
        m
    };
    let u_inner = &a6.matmul(&lin(13, 11, 9, None)) + &lin(7, 5, 3, Some(1));
    let u = a.matmul(&u_inner);
    let v = &a6.matmul(&lin(12, 10, 8, None)) + &lin(6, 4, 2, Some(0));

    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    if !r.is_finite() {
        return Err(Error::NonFinite("matrix_exponential result".into()));
    }
    Ok(r)
}

/// Solves A X = B by LU decomposition with partial pivoting.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.dim(),
        });
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| lu[(i, k)].norm().total_cmp(&lu[(j, k)].norm()))
            .unwrap_or(k);
        if lu[(p, k)].norm() == 0.0 {
            return Err(Error::NonFinite("singular matrix in solve".into()));
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
                let t = x[(k, j)];
                x[(k, j)] = x[(p, j)];
                x[(p, j)] = t;
            }
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..n {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
    }
    for k in (0..n).rev() {
        let pivot = lu[(k, k)];
        for j in 0..n {
            let mut s = x[(k, j)];
            for m in k + 1..n {
                s -= lu[(k, m)] * x[(m, j)];
            }
            x[(k, j)] = s / pivot;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    // Plain power series, no scaling. Only trustworthy for modest norms.
    fn taylor(a: &ComplexMatrix) -> ComplexMatrix {
        let n = a.dim();
        let mut sum = ComplexMatrix::identity(n);
        let mut term = ComplexMatrix::identity(n);
        for k in 1..80 {
            term = term.matmul(a).scale(c(1.0 / k as f64, 0.0));
            sum = &sum + &term;
        }
        sum
    }

    #[test]
    fn zero_gives_identity() {
        let e = matrix_exponential(&ComplexMatrix::zeros(4)).unwrap();
        assert!(e.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn pauli_x_rotation() {
        for &theta in &[0.3, 1.0, 2.5, 17.0] {
            let a = ComplexMatrix::from_rows(&[vec![c(0., 0.), c(0., theta)], vec![c(0., theta), c(0., 0.)]])
                .unwrap();
            let e = matrix_exponential(&a).unwrap();
            let (s, co) = theta.sin_cos();
            let expected =
                ComplexMatrix::from_rows(&[vec![c(co, 0.), c(0., s)], vec![c(0., s), c(co, 0.)]]).unwrap();
            assert!(e.max_abs_diff(&expected) < 1e-12, "theta={theta}");
        }
    }

    #[test]
    fn diagonal_and_nilpotent_by_hand() {
        let a = ComplexMatrix::from_rows(&[vec![c(1., 2.), c(3., 0.)], vec![c(0., 0.), c(1., 2.)]]).unwrap();
        // e^{λ}(I + N) with λ = 1+2i, N = [[0,3],[0,0]]
        let l = c(1., 2.).exp();
        let expected = ComplexMatrix::from_rows(&[vec![l, l * 3.0], vec![c(0., 0.), l]]).unwrap();
        assert!(matrix_exponential(&a).unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn random_6x6_against_taylor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = ComplexMatrix::from_fn(6, |_, _| c(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)));
            let e = matrix_exponential(&a).unwrap();
            let t = taylor(&a);
            assert!(e.max_abs_diff(&t) < 1e-10);
        }
    }

    #[test]
    fn exp_of_sum_of_commuting_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ComplexMatrix::from_fn(5, |_, _| c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)));
        let e = matrix_exponential(&a).unwrap();
        let half = matrix_exponential(&a.scale(c(0.5, 0.0))).unwrap();
        let sq = half.matmul(&half);
        let scale = e.norm_one();
        assert!(e.max_abs_diff(&sq) < 1e-12 * scale);
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = ComplexMatrix::zeros(2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matrix_exponential(&a).is_err());
    }

    #[test]
    fn solve_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = ComplexMatrix::from_fn(6, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let x = ComplexMatrix::from_fn(6, |i, j| c(i as f64, j as f64));
        let b = a.matmul(&x);
        assert!(solve(&a, &b).unwrap().max_abs_diff(&x) < 1e-10);
    }
}
