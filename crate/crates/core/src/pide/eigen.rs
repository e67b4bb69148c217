//! Principal eigenpair of a real nonsymmetric matrix.
//!
//! When every off-diagonal entry is nonnegative, `M + cI` is a nonnegative
//! matrix and plain power iteration converges to the Perron pair; this is
//! tried first under an iteration budget. Otherwise, or when the budget runs
//! out (fine meshes have tiny spectral gaps relative to `c`), the eigenvalues
//! come from a dense real Schur decomposition and the eigenvector from
//! shifted inverse iteration.

use nalgebra::{DMatrix, DVector};

use super::assemble::offdiagonals_nonnegative;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Relative tolerance on the eigenvalue (successive Rayleigh quotients)
    /// and on the residual.
    pub tol: f64,
    /// Components more negative than `-positivity_tol * max|v|` make an
    /// eigenvector sign-indefinite.
    pub positivity_tol: f64,
    /// Power-iteration budget for the fast path; zero disables it.
    pub power_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            positivity_tol: 1e-8,
            power_iterations: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    PowerIteration,
    Dense,
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    /// Sign-normalised so that the largest component equals one.
    pub vector: Vec<f64>,
    /// `‖Mv - λv‖∞ / ‖v‖∞`.
    pub residual: f64,
    pub iterations: usize,
    pub method: EigenMethod,
}

/// Largest absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Residual level below which an eigenpair counts as converged: `tol`
/// relative to the eigenvalue, floored at a small multiple of the rounding
/// noise of one matrix-vector product.
pub fn residual_bound(value: f64, scale: f64, tol: f64) -> f64 {
    (tol * value.abs().max(1.0)).max(64.0 * f64::EPSILON * scale.max(1.0))
}

pub fn residual(m: &DMatrix<f64>, value: f64, v: &[f64]) -> f64 {
    let x = DVector::from_column_slice(v);
    let r = m * &x - &x * value;
    let vmax = x.amax();
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        r.amax() / vmax
    }
}

/// Eigenvalue of largest real part and its sign-definite eigenvector.
pub fn dominant_eigenpair(m: &DMatrix<f64>, opts: &EigenOptions) -> Result<Eigenpair> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidInput("matrix must be square and nonempty".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix has non-finite entries".into()));
    }
    if opts.power_iterations > 0 && offdiagonals_nonnegative(m) {
        if let Some(pair) = power_iteration(m, opts) {
            return finish(m, pair, opts);
        }
    }
    let pair = dense(m)?;
    finish(m, pair, opts)
}

fn finish(m: &DMatrix<f64>, mut pair: Eigenpair, opts: &EigenOptions) -> Result<Eigenpair> {
    let (imax, _) = pair.vector.iter().enumerate().fold(
        (0, 0.0_f64),
        |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
    );
    let pivot = pair.vector[imax];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Eigen("eigenvector vanished".into()));
    }
    pair.vector.iter_mut().for_each(|v| *v /= pivot);
    if pair.vector.iter().any(|&v| v < -opts.positivity_tol) {
        return Err(Error::NotSignDefinite { eigenvalue: pair.value });
    }
    pair.residual = residual(m, pair.value, &pair.vector);
    Ok(pair)
}

struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter_map(|j| {
                        let v = m[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }
}

fn power_iteration(m: &DMatrix<f64>, opts: &EigenOptions) -> Option<Eigenpair> {
    let n = m.nrows();
    let sparse = SparseRows::from_dense(m);
    let scale = inf_norm(m);
    let shift = 1.0 + scale;
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut previous = f64::NAN;
    for it in 1..=opts.power_iterations {
        sparse.apply(&v, &mut w);
        let rq: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let vmax = v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let res = v.iter().zip(&w).map(|(a, b)| (b - rq * a).abs()).fold(0.0, f64::max) / vmax;
        let bound = residual_bound(rq, scale, opts.tol);
        if (rq - previous).abs() <= opts.tol * rq.abs().max(1.0) && res <= bound {
            // the error shrinks geometrically; as many further steps again
            // square it, down to rounding level
            let extra = it.min(opts.power_iterations - it);
            let (value, vector, total) = polish(&sparse, v, rq, shift, extra, it);
            let residual = residual(m, value, &vector);
            return Some(Eigenpair {
                value,
                vector,
                residual,
                iterations: total,
                method: EigenMethod::PowerIteration,
            });
        }
        previous = rq;
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b + shift * *a;
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        v.iter_mut().for_each(|a| *a /= norm);
    }
    None
}

fn polish(
    sparse: &SparseRows,
    mut v: Vec<f64>,
    mut rq: f64,
    shift: f64,
    extra: usize,
    done: usize,
) -> (f64, Vec<f64>, usize) {
    let mut w = vec![0.0; v.len()];
    sparse.apply(&v, &mut w);
    let mut total = done;
    for _ in 0..extra {
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b + shift * *a;
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            break;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        sparse.apply(&v, &mut w);
        rq = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        total += 1;
    }
    (rq, v, total)
}

fn dense(m: &DMatrix<f64>) -> Result<Eigenpair> {
    let n = m.nrows();
    let scale = inf_norm(m).max(f64::MIN_POSITIVE);
    let eigenvalues = m.complex_eigenvalues();
    let top = eigenvalues
        .iter()
        .copied()
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .ok_or_else(|| Error::Eigen("no eigenvalues".into()))?;
    if !top.re.is_finite() {
        return Err(Error::Eigen("eigenvalue computation did not converge".into()));
    }
    if top.im.abs() > 1e-8 * scale {
        return Err(Error::Eigen(format!(
            "eigenvalue of largest real part is complex ({} + {}i)",
            top.re, top.im
        )));
    }
    let lambda = top.re;
    if n == 1 {
        return Ok(Eigenpair {
            value: lambda,
            vector: vec![1.0],
            residual: 0.0,
            iterations: 0,
            method: EigenMethod::Dense,
        });
    }

    // shifted inverse iteration; the shift sits just above λ so the
    // factorisation stays regular
    let mut delta = 1e-9 * scale;
    let mut shifted = m.clone();
    let lu = loop {
        for i in 0..n {
            shifted[(i, i)] = m[(i, i)] - (lambda + delta);
        }
        let lu = shifted.clone().lu();
        if lu.is_invertible() {
            break lu;
        }
        delta *= 10.0;
        if delta > 1e-3 * scale {
            return Err(Error::Eigen(
                "inverse iteration could not factor the shifted matrix".into(),
            ));
        }
    };
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut iterations = 0;
    for _ in 0..50 {
        iterations += 1;
        let mut next = lu
            .solve(&v)
            .ok_or_else(|| Error::Eigen("inverse iteration solve failed".into()))?;
        let norm = next.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Eigen("inverse iteration diverged".into()));
        }
        next /= norm;
        // fix the sign before comparing iterates
        let imax = next.iamax();
        if next[imax] < 0.0 {
            next = -next;
        }
        let change = (&next - &v).amax();
        v = next;
        if change <= 1e-14 {
            break;
        }
    }
    let vec = v.as_slice().to_vec();
    let rq = v.dot(&(m * &v)) / v.dot(&v);
    let (value, res) = {
        let r_schur = residual(m, lambda, &vec);
        let r_rq = residual(m, rq, &vec);
        if r_rq < r_schur {
            (rq, r_rq)
        } else {
            (lambda, r_schur)
        }
    };
    Ok(Eigenpair {
        value,
        vector: vec,
        residual: res,
        iterations,
        method: EigenMethod::Dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let m = DMatrix::from_element(1, 1, -3.5);
        let p = dominant_eigenpair(&m, &EigenOptions::default()).unwrap();
        assert_eq!(p.value, -3.5);
        assert_eq!(p.vector, vec![1.0]);
    }

    #[test]
    fn dense_path_handles_negative_offdiagonals() {
        // upper-triangular with a negative entry: eigenvalues 2 and -1
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 0.0, -1.0]);
        let p = dominant_eigenpair(&m, &EigenOptions::default()).unwrap();
        assert!((p.value - 2.0).abs() < 1e-12);
        assert_eq!(p.method, EigenMethod::Dense);
        assert!((p.vector[0] - 1.0).abs() < 1e-12 && p.vector[1].abs() < 1e-12);
    }

    #[test]
    fn power_path_on_generator() {
        let m = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.5, -1.0, 0.5, 0.0, 2.0, -2.0]);
        let p = dominant_eigenpair(&m, &EigenOptions::default()).unwrap();
        assert_eq!(p.method, EigenMethod::PowerIteration);
        assert!(p.value.abs() < 1e-10);
        assert!(p.vector.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn sign_indefinite_dominant_vector_is_rejected() {
        // dominant eigenvector (1, -1)
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        match dominant_eigenpair(&m, &EigenOptions::default()) {
            Err(Error::NotSignDefinite { eigenvalue }) => assert!((eigenvalue - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn budget_exhaustion_falls_back_to_dense() {
        // tilted generator, so the uniform start vector is not already exact
        let m = DMatrix::from_row_slice(3, 3, &[-0.7, 1.0, 0.0, 0.5, -1.0, 0.5, 0.0, 2.0, -2.0]);
        let opts = EigenOptions {
            power_iterations: 2,
            ..EigenOptions::default()
        };
        let p = dominant_eigenpair(&m, &opts).unwrap();
        assert_eq!(p.method, EigenMethod::Dense);
        let fast = dominant_eigenpair(&m, &EigenOptions::default()).unwrap();
        assert_eq!(fast.method, EigenMethod::PowerIteration);
        assert!((p.value - fast.value).abs() < 1e-10);
    }
}
