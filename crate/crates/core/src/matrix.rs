//! Linear-algebra energy terms with closed-form gradients.
//!
//! Every term is a squared Frobenius norm of a residual matrix. Gradients are
//! returned per operand, in operand order.

use nalgebra::DMatrix;
use thiserror::Error;

pub type Mat = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    Dim((usize, usize), (usize, usize)),
    #[error("matrix is not square: {0:?}")]
    NotSquare((usize, usize)),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTerm {
    pub value: f64,
    /// Gradient with respect to each operand.
    pub grads: Vec<Mat>,
}

/// Squared Frobenius norm, accumulated row by row.
pub fn frob_sq(m: &Mat) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let x = m[(i, j)];
            acc += x * x;
        }
    }
    acc
}

fn square(a: &Mat) -> Result<usize, MatrixError> {
    if a.nrows() != a.ncols() {
        return Err(MatrixError::NotSquare(a.shape()));
    }
    Ok(a.nrows())
}

fn same(a: &Mat, b: &Mat) -> Result<(), MatrixError> {
    if a.shape() != b.shape() {
        return Err(MatrixError::Dim(a.shape(), b.shape()));
    }
    Ok(())
}

/// ‖A − B‖²
pub fn e_eq(a: &Mat, b: &Mat) -> Result<MatrixTerm, MatrixError> {
    same(a, b)?;
    let r = a - b;
    Ok(MatrixTerm {
        value: frob_sq(&r),
        grads: vec![&r * 2.0, &r * -2.0],
    })
}

/// ‖A − Aᵀ‖²
pub fn e_sym(a: &Mat) -> Result<MatrixTerm, MatrixError> {
    square(a)?;
    let r = a - a.transpose();
    let g = &r * 2.0 - r.transpose() * 2.0;
    Ok(MatrixTerm {
        value: frob_sq(&r),
        grads: vec![g],
    })
}

/// ‖AB − C‖²
pub fn e_mult(a: &Mat, b: &Mat, c: &Mat) -> Result<MatrixTerm, MatrixError> {
    square(a)?;
    same(a, b)?;
    same(a, c)?;
    let r = a * b - c;
    Ok(MatrixTerm {
        value: frob_sq(&r),
        grads: vec![&r * b.transpose() * 2.0, a.transpose() * &r * 2.0, &r * -2.0],
    })
}

/// ‖AᵀA − I‖²
pub fn e_orth(a: &Mat) -> Result<MatrixTerm, MatrixError> {
    let d = square(a)?;
    let r = a.transpose() * a - Mat::identity(d, d);
    Ok(MatrixTerm {
        value: frob_sq(&r),
        grads: vec![a * &r * 4.0],
    })
}

/// ‖A·A_inv − I‖². A singular `a` just leaves the energy positive.
pub fn e_inv(a: &Mat, a_inv: &Mat) -> Result<MatrixTerm, MatrixError> {
    let d = square(a)?;
    let mut t = e_mult(a, a_inv, &Mat::identity(d, d))?;
    t.grads.truncate(2);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m2(rows: [[f64; 2]; 2]) -> Mat {
        Mat::from_fn(2, 2, |i, j| rows[i][j])
    }

    fn eye(d: usize, s: f64) -> Mat {
        Mat::identity(d, d) * s
    }

    fn random(rng: &mut ChaCha8Rng, d: usize) -> Mat {
        Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Central differences of `f` over every entry of operand `k`.
    fn fd_check(ops: &[Mat], f: &dyn Fn(&[Mat]) -> MatrixTerm) {
        let h = 1e-4;
        let analytic = f(ops);
        for (k, op) in ops.iter().enumerate() {
            for idx in 0..op.len() {
                let mut plus = ops.to_vec();
                plus[k][idx] += h;
                let mut minus = ops.to_vec();
                minus[k][idx] -= h;
                let numeric = (f(&plus).value - f(&minus).value) / (2.0 * h);
                let a = analytic.grads[k][idx];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
                assert!(err < 1e-5, "operand {k} entry {idx}: {a} vs {numeric}");
            }
        }
    }

    #[test]
    fn eq_examples() {
        let a = m2([[1.0, 2.0], [3.0, 4.0]]);
        let t = e_eq(&a, &a).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(t.grads.iter().all(|g| frob_sq(g) == 0.0));
        let b = m2([[1.0, 2.0], [3.0, 5.0]]);
        let oracle: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        assert_eq!(e_eq(&a, &b).unwrap().value, oracle);
        assert_eq!(oracle, 1.0);
    }

    #[test]
    fn sym_examples() {
        let s = m2([[1.0, 7.0], [7.0, 2.0]]);
        assert_eq!(e_sym(&s).unwrap().value, 0.0);
        assert!(e_sym(&m2([[0.0, 1.0], [0.0, 0.0]])).unwrap().value > 0.0);
    }

    #[test]
    fn mult_examples() {
        assert_eq!(e_mult(&eye(3, 1.0), &eye(3, 1.0), &eye(3, 1.0)).unwrap().value, 0.0);
        let v = e_mult(&eye(2, 2.0), &eye(2, 3.0), &eye(2, 5.0)).unwrap().value;
        assert_eq!(v, frob_sq(&(eye(2, 6.0) - eye(2, 5.0))));
        assert_eq!(v, 2.0);
    }

    #[test]
    fn orth_examples() {
        assert_eq!(e_orth(&m2([[0.0, -1.0], [1.0, 0.0]])).unwrap().value, 0.0);
        assert_eq!(e_orth(&eye(2, 2.0)).unwrap().value, frob_sq(&eye(2, 3.0)));
        assert_eq!(e_orth(&eye(2, 2.0)).unwrap().value, 18.0);
    }

    #[test]
    fn inv_examples() {
        assert_eq!(e_inv(&eye(2, 1.0), &eye(2, 1.0)).unwrap().value, 0.0);
        assert_eq!(e_inv(&eye(2, 2.0), &eye(2, 0.5)).unwrap().value, 0.0);
        assert_eq!(e_inv(&eye(2, 1.0), &eye(2, 2.0)).unwrap().value, 2.0);
        let singular = Mat::zeros(2, 2);
        assert_eq!(e_inv(&singular, &eye(2, 1.0)).unwrap().value, 2.0);
    }

    #[test]
    fn general_linear_elements_representable() {
        assert!(e_orth(&eye(4, 2.0)).unwrap().value > 0.0);
        assert_eq!(e_inv(&eye(4, 2.0), &eye(4, 0.5)).unwrap().value, 0.0);
    }

    #[test]
    fn dimension_errors() {
        assert!(e_eq(&eye(2, 1.0), &eye(3, 1.0)).is_err());
        assert!(e_orth(&Mat::zeros(2, 3)).is_err());
        assert!(e_mult(&eye(2, 1.0), &eye(2, 1.0), &eye(3, 1.0)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ops: Vec<Mat> = (0..3).map(|_| random(&mut rng, 4)).collect();
            fd_check(&ops[..2], &|o| e_eq(&o[0], &o[1]).unwrap());
            fd_check(&ops[..1], &|o| e_sym(&o[0]).unwrap());
            fd_check(&ops, &|o| e_mult(&o[0], &o[1], &o[2]).unwrap());
            fd_check(&ops[..1], &|o| e_orth(&o[0]).unwrap());
            fd_check(&ops[..2], &|o| e_inv(&o[0], &o[1]).unwrap());
        }
    }

    #[test]
    fn nonnegative_and_faithful() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = random(&mut rng, 4);
            let b = random(&mut rng, 4);
            for v in [
                e_eq(&a, &b).unwrap().value,
                e_sym(&a).unwrap().value,
                e_orth(&a).unwrap().value,
                e_mult(&a, &b, &a).unwrap().value,
                e_inv(&a, &b).unwrap().value,
            ] {
                assert!(v > 1e-12);
            }
            let sym = &a + a.transpose();
            assert!(e_sym(&sym).unwrap().value < 1e-12);
            let q = a.clone().qr().q();
            assert!(e_orth(&q).unwrap().value < 1e-12);
            let ab = &a * &b;
            assert!(e_mult(&a, &b, &ab).unwrap().value < 1e-12);
        }
    }
}
