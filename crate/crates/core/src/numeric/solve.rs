use super::matrix::Matrix64;
use crate::error::{Error, Result};

const JITTER_SCALE: f64 = 1e-10;
const JITTER_GROWTH: f64 = 10.0;
const JITTER_RETRIES: usize = 3;

/// Lower-triangular Cholesky factor, or `None` if a pivot is not positive.
pub fn cholesky(s: &Matrix64) -> Option<Matrix64> {
    let n = s.rows();
    let max_diag = (0..n).map(|i| s[(i, i)].abs()).fold(0.0, f64::max);
    let floor = max_diag * f64::EPSILON * n as f64;
    let mut l = Matrix64::zeros(n, n);
    for j in 0..n {
        let mut pivot = s[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot.is_nan() || pivot <= floor {
            return None;
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Some(l)
}

fn cholesky_substitute(l: &Matrix64, b: &Matrix64) -> Matrix64 {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut acc = x[(i, c)];
            for k in 0..i {
                acc -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = acc / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = x[(i, c)];
            for k in (i + 1)..n {
                acc -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = acc / l[(i, i)];
        }
    }
    x
}

/// Solves `S X = B` for symmetric positive (semi-)definite `S`.
///
/// A plain Cholesky factorization is tried first. On failure the diagonal is
/// loaded with `1e-10 * trace / n`, growing tenfold for up to three retries.
pub fn spd_solve(s: &Matrix64, b: &Matrix64) -> Result<Matrix64> {
    let n = s.rows();
    if s.cols() != n || b.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "cannot solve {}x{} system against {}x{} right-hand side",
            s.rows(),
            s.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if n == 0 {
        return Ok(b.clone());
    }
    if !s.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("linear system".into()));
    }
    if let Some(l) = cholesky(s) {
        return Ok(cholesky_substitute(&l, b));
    }
    let mut jitter = JITTER_SCALE * s.trace() / n as f64;
    if jitter.is_nan() || jitter <= 0.0 {
        return Err(Error::SingularMatrix);
    }
    for _ in 0..JITTER_RETRIES {
        let mut loaded = s.clone();
        loaded.add_diagonal(jitter);
        if let Some(l) = cholesky(&loaded) {
            log::debug!("spd_solve: factorized with diagonal jitter {jitter:e}");
            return Ok(cholesky_substitute(&l, b));
        }
        jitter *= JITTER_GROWTH;
    }
    Err(Error::SingularMatrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix64 {
        Matrix64::from_columns(&[v]).unwrap()
    }

    #[test]
    fn identity_and_diagonal() {
        let b = col(&[1.0, -2.0, 3.0]);
        assert_eq!(spd_solve(&Matrix64::identity(3), &b).unwrap(), b);
        let x = spd_solve(&Matrix64::from_diag(&[2.0, 4.0]), &col(&[2.0, 4.0])).unwrap();
        assert!(x.data().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rank_deficient_outer_product_uses_jitter() {
        let u = [1.0, 2.0, -1.0];
        let mut s = Matrix64::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                s[(i, j)] = u[i] * u[j];
            }
        }
        assert!(cholesky(&s).is_none());
        let b = col(&u);
        let x = spd_solve(&s, &b).unwrap();
        let r = s.matmul(&x).unwrap();
        let resid: f64 = (0..3)
            .map(|i| (r[(i, 0)] - u[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm_b: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(resid <= 1e-4 * norm_b, "residual {resid}");
    }

    #[test]
    fn zero_matrix_is_singular() {
        let r = spd_solve(&Matrix64::zeros(2, 2), &col(&[1.0, 1.0]));
        assert!(matches!(r, Err(Error::SingularMatrix)));
    }

    #[test]
    fn indefinite_is_singular() {
        let s = Matrix64::from_diag(&[1.0, -1.0]);
        assert!(matches!(
            spd_solve(&s, &col(&[1.0, 1.0])),
            Err(Error::SingularMatrix)
        ));
    }
}
