use nalgebra::DMatrix;

use super::SpectralError;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix.
///
/// Each sweep visits every off-diagonal pair `(p, q)` once and applies the plane
/// rotation that zeroes `a[p][q]`. Converges quadratically once the
/// off-diagonal mass is small; sweeps stop when it falls below
/// `eps² · ‖A‖_F²`.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen, SpectralError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(SpectralError::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    for p in 0..n {
        for q in (p + 1)..n {
            let (x, y) = (a[(p, q)], a[(q, p)]);
            if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                return Err(SpectralError::NotSymmetric { row: p, col: q });
            }
        }
    }

    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let frob2: f64 = a.iter().map(|x| x * x).sum();
    let threshold = (f64::EPSILON * f64::EPSILON) * frob2;

    let off2 = |a: &DMatrix<f64>| {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[(p, q)] * a[(p, q)];
            }
        }
        s
    };

    let mut converged = off2(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(SpectralError::NotConverged {
                sweeps,
                off_diagonal: off2(&a).sqrt(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
        converged = off2(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// `A ← Jᵀ A J`, `V ← V J` for the rotation in the (p, q) plane.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
