//! Dense symmetric eigensolvers.
//!
//! Two routes are kept deliberately independent: a cyclic Jacobi solver that
//! is unconditionally convergent on symmetric matrices and serves as the
//! oracle, and a power-iteration routine (with rank-one deflation on top)
//! whose stop rule is the vector-difference test `||v(t+1) - v(t)|| < eps`.
//! Tests cross-check one against the other.

use super::{SpectralBasis, SpectralError};
use crate::graph::SymMatrix;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Maximum Jacobi sweeps before declaring the input pathological.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Default tolerance for the power-iteration stop rule.
pub const DEFAULT_POWER_EPS: f64 = 1e-10;

/// Default iteration cap for power iteration.
pub const DEFAULT_POWER_MAX_ITERS: usize = 10_000;

/// Full eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with orthonormal eigenvectors as
/// the columns of `U`. The basis is made deterministic by a sign convention:
/// the largest-magnitude entry of each eigenvector is positive, ties broken
/// by the lowest index.
pub fn eigendecompose(m: &SymMatrix) -> Result<SpectralBasis, SpectralError> {
    let n = m.n();
    let frob = m.frobenius_norm();
    let mut a: Vec<f64> = m.as_array().iter().copied().collect(); // row-major
    // Eigenvectors accumulate as ROWS of ut (i.e. U^T) so rotation updates
    // stay contiguous; transposed once at the end.
    let mut ut = vec![0.0; n * n];
    for i in 0..n {
        ut[i * n + i] = 1.0;
    }

    if n > 1 {
        let off_tol = 1e-13 * frob.max(f64::MIN_POSITIVE);
        let mut converged = false;
        for _ in 0..MAX_JACOBI_SWEEPS {
            let mut off_norm_sq = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    off_norm_sq += apq * apq;
                }
            }
            if (2.0 * off_norm_sq).sqrt() <= off_tol {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    // Rotation angle that annihilates a[p][q].
                    let theta = 0.5 * (a[q * n + q] - a[p * n + p]) / apq;
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    // A <- J A J^T, exploiting symmetry: rewrite rows p and q
                    // contiguously, then mirror them into columns p and q.
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    a[p * n + p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                    a[q * n + q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    for k in 0..n {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = a[p * n + k];
                        let akq = a[q * n + k];
                        let new_p = c * akp - s * akq;
                        let new_q = s * akp + c * akq;
                        a[p * n + k] = new_p;
                        a[q * n + k] = new_q;
                        a[k * n + p] = new_p;
                        a[k * n + q] = new_q;
                    }
                    // Same rotation on the eigenvector rows of U^T.
                    let (head, tail) = ut.split_at_mut(q * n);
                    let row_p = &mut head[p * n..p * n + n];
                    let row_q = &mut tail[..n];
                    for k in 0..n {
                        let up = row_p[k];
                        let uq = row_q[k];
                        row_p[k] = c * up - s * uq;
                        row_q[k] = s * up + c * uq;
                    }
                }
            }
        }
        if !converged {
            // One more look: accept if the final sweep got us there.
            let mut off_norm_sq = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    off_norm_sq += apq * apq;
                }
            }
            if (2.0 * off_norm_sq).sqrt() > off_tol {
                return Err(SpectralError::JacobiNoConvergence { sweeps: MAX_JACOBI_SWEEPS });
            }
        }
    }

    let eigenvalues_unsorted: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eigenvalues_unsorted[i].partial_cmp(&eigenvalues_unsorted[j]).expect("finite eigenvalues")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigenvalues_unsorted[i]).collect();

    let mut sorted_u = Array2::<f64>::zeros((n, n));
    for (new_col, &old) in order.iter().enumerate() {
        for row in 0..n {
            sorted_u[[row, new_col]] = ut[old * n + row];
        }
    }
    fix_signs(&mut sorted_u);

    let group_tol = 1e-8 * frob;
    Ok(SpectralBasis::from_parts(eigenvalues, sorted_u, group_tol))
}

/// Flip eigenvector signs so the largest-magnitude entry (lowest index on
/// ties) of each column is positive.
fn fix_signs(u: &mut Array2<f64>) {
    let (n, cols) = u.dim();
    for col in 0..cols {
        let mut best = 0;
        for row in 1..n {
            if u[[row, col]].abs() > u[[best, col]].abs() {
                best = row;
            }
        }
        if u[[best, col]] < 0.0 {
            for row in 0..n {
                u[[row, col]] = -u[[row, col]];
            }
        }
    }
}

/// Result of a power-iteration run.
#[derive(Debug, Clone)]
pub struct PowerIterationResult {
    pub eigenvalue: f64,
    pub eigenvector: Array1<f64>,
    pub iterations: usize,
}

/// Dominant eigenpair by power iteration.
///
/// Each step computes `w = A v`, the Rayleigh estimate
/// `lambda = (w . v) / ||v||`, and the normalized update `v <- w / ||w||`;
/// iteration stops once `||v(t+1) - v(t)|| < eps`.
///
/// Note the stop rule tracks the vector itself, not its span: when the
/// dominant eigenvalue is negative the iterates flip sign each step and the
/// rule never fires, which surfaces as [`SpectralError::PowerMaxIterations`].
pub fn power_iteration(
    m: &SymMatrix,
    v0: &Array1<f64>,
    eps: f64,
) -> Result<PowerIterationResult, SpectralError> {
    power_iteration_with(m, v0, eps, DEFAULT_POWER_MAX_ITERS, None)
}

pub(crate) fn power_iteration_with(
    m: &SymMatrix,
    v0: &Array1<f64>,
    eps: f64,
    max_iters: usize,
    mut residual_trace: Option<&mut Vec<f64>>,
) -> Result<PowerIterationResult, SpectralError> {
    let n = m.n();
    if v0.len() != n {
        return Err(SpectralError::DimensionMismatch { expected: n, got: v0.len() });
    }
    if eps <= 0.0 {
        return Err(SpectralError::InvalidTolerance(eps));
    }
    let norm0 = norm(v0);
    if (norm0 - 1.0).abs() > 1e-9 {
        return Err(SpectralError::NotUnitNorm(norm0));
    }

    let a = m.as_array();
    let mut v = v0.clone();
    for t in 1..=max_iters {
        let w = a.dot(&v);
        let w_norm = norm(&w);
        if w_norm < 1e-300 {
            return Err(SpectralError::PowerZeroVector);
        }
        let eigenvalue = w.dot(&v) / norm(&v);
        let v_next = &w / w_norm;
        if let Some(trace) = residual_trace.as_deref_mut() {
            let av = a.dot(&v_next);
            let rayleigh = v_next.dot(&av);
            trace.push(norm(&(&av - &(&v_next * rayleigh))));
        }
        let step: f64 = norm(&(&v_next - &v));
        v = v_next;
        if step < eps {
            return Ok(PowerIterationResult { eigenvalue, eigenvector: v, iterations: t });
        }
    }
    Err(SpectralError::PowerMaxIterations(max_iters))
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Recover `k` eigenpairs by repeated power iteration with rank-one
/// deflation.
///
/// Power iteration is run on the shifted matrix `B = A + sigma I` (with
/// `sigma` slightly above the Frobenius norm) so every eigenvalue of `B` is
/// positive; the vector-difference stop rule would otherwise never fire when
/// the dominant eigenvalue of the working matrix is negative. After each
/// accepted pair the matrix is deflated, `B <- B - mu v v^T`, and the
/// reported eigenvalue is un-shifted. Pairs come back sorted ascending.
pub fn deflated_spectrum(
    m: &SymMatrix,
    k: usize,
    eps: f64,
) -> Result<Vec<(f64, Array1<f64>)>, SpectralError> {
    let n = m.n();
    if k > n {
        return Err(SpectralError::DimensionMismatch { expected: n, got: k });
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    let sigma = 1.05 * m.frobenius_norm() + 1e-9;
    let mut b = m.as_array().clone();
    for i in 0..n {
        b[[i, i]] += sigma;
    }

    // Fixed internal seed: the routine itself takes no randomness, so start
    // vectors must still be deterministic.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
    let mut pairs: Vec<(f64, Array1<f64>)> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v0 = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        // Bias away from directions already found.
        for (_, found) in &pairs {
            let proj = v0.dot(found);
            v0 = &v0 - &(found * proj);
        }
        let v0_norm = norm(&v0);
        if v0_norm < 1e-12 {
            return Err(SpectralError::PowerZeroVector);
        }
        v0 /= v0_norm;

        let working = SymMatrix::new_unchecked(b.clone());
        let result = power_iteration(&working, &v0, eps)?;

        // Re-orthogonalize against accepted pairs to stop drift compounding.
        let mut v = result.eigenvector;
        for (_, found) in &pairs {
            let proj = v.dot(found);
            v = &v - &(found * proj);
        }
        let v_norm = norm(&v);
        if v_norm < 1e-12 {
            return Err(SpectralError::PowerZeroVector);
        }
        v /= v_norm;

        for i in 0..n {
            for j in 0..n {
                b[[i, j]] -= result.eigenvalue * v[i] * v[j];
            }
        }
        pairs.push((result.eigenvalue - sigma, v));
    }
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite eigenvalues"));
    Ok(pairs)
}
