use super::matrix::{DenseMatrix, Matrix64};
use super::solve::spd_solve;
use crate::error::{Error, Result};

/// Population covariance (denominator `n`) of the rows of `x`.
pub fn covariance(x: &DenseMatrix) -> Result<Matrix64> {
    if x.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let mut s = centered_scatter(x);
    s.scale(1.0 / x.rows() as f64);
    Ok(s)
}

/// `Xcᵀ Xc` where `Xc` is `x` with its column means removed.
pub fn centered_scatter(x: &DenseMatrix) -> Matrix64 {
    let q = x.cols();
    let means = x.column_means();
    let mut s = Matrix64::zeros(q, q);
    let mut centered = vec![0.0f64; q];
    for row in x.row_iter() {
        for ((c, &v), m) in centered.iter_mut().zip(row).zip(&means) {
            *c = f64::from(v) - m;
        }
        for i in 0..q {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let dst = &mut s.row_mut(i)[i..];
            for (d, &cj) in dst.iter_mut().zip(&centered[i..]) {
                *d += ci * cj;
            }
        }
    }
    for i in 0..q {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }
    s
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// The mean of a constant sequence can carry rounding error, so constancy is
// tested directly rather than through a zero sum of squares.
fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "sequences of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::ShapeMismatch(format!(
            "need at least 3 observations, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if is_constant(x) || is_constant(y) || sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Coefficient of determination of an ordinary least squares fit of
/// `target` on `predictors` (one column per predictor) plus an intercept.
pub fn ols_r2(predictors: &Matrix64, target: &[f64]) -> Result<f64> {
    let (n, p) = (predictors.rows(), predictors.cols());
    if n != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{n} predictor rows but {} targets",
            target.len()
        )));
    }
    if n < p + 2 {
        return Err(Error::ShapeMismatch(format!(
            "{n} observations cannot fit {p} predictors plus intercept"
        )));
    }
    let ty = mean(target);
    let yc: Vec<f64> = target.iter().map(|v| v - ty).collect();
    let sst: f64 = yc.iter().map(|v| v * v).sum();
    if is_constant(target) || sst == 0.0 {
        return Err(Error::ZeroVariance);
    }

    // The intercept is absorbed by centering both sides.
    let means: Vec<f64> = (0..p).map(|j| mean(&predictors.column(j))).collect();
    let mut xc = predictors.clone();
    for i in 0..n {
        for (v, m) in xc.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    let xt = xc.transpose();
    let gram = xt.matmul(&xc)?;
    let rhs = xt.matmul(&Matrix64::from_columns(&[&yc])?)?;
    let beta = match spd_solve(&gram, &rhs) {
        Ok(b) => b,
        // Every predictor constant: the best fit is the intercept alone.
        Err(Error::SingularMatrix) if gram.trace() == 0.0 => Matrix64::zeros(p, 1),
        Err(e) => return Err(e),
    };
    let fitted = xc.matmul(&beta)?;
    let ssr: f64 = (0..n).map(|i| (yc[i] - fitted[(i, 0)]).powi(2)).sum();
    Ok(1.0 - ssr / sst)
}
