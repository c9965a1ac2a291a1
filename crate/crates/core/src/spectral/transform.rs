//! Average / difference coordinates for `[θ; ω]`.
//!
//! The difference components are coordinates in the Helmert basis, a fixed
//! orthonormal basis of the complement of the constant vector:
//! `h_j = (1, …, 1, -j, 0, …, 0) / √(j (j + 1))` with `j` leading ones.

use nalgebra::DMatrix;

use super::SpectralError;

#[derive(Debug, Clone, PartialEq)]
pub struct AvgDiffState {
    pub theta_avg: f64,
    pub omega_avg: f64,
    pub delta_theta: Vec<f64>,
    pub delta_omega: Vec<f64>,
}

/// Rows are the `n - 1` Helmert vectors.
pub fn helmert_basis(n: usize) -> DMatrix<f64> {
    let rows = n.saturating_sub(1);
    DMatrix::from_fn(rows, n, |r, c| {
        let j = r + 1;
        let scale = 1.0 / ((j * (j + 1)) as f64).sqrt();
        if c < j {
            scale
        } else if c == j {
            -(j as f64) * scale
        } else {
            0.0
        }
    })
}

fn project(basis: &DMatrix<f64>, x: &[f64]) -> (f64, Vec<f64>) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let diff = basis
        .row_iter()
        .map(|row| row.iter().zip(x).map(|(h, v)| h * v).sum())
        .collect();
    (mean, diff)
}

fn lift(basis: &DMatrix<f64>, mean: f64, diff: &[f64]) -> Vec<f64> {
    let n = basis.ncols();
    (0..n)
        .map(|k| mean + diff.iter().enumerate().map(|(j, c)| c * basis[(j, k)]).sum::<f64>())
        .collect()
}

/// Splits a `2n` vector `[θ; ω]` into averages and Helmert differences.
pub fn average_difference_transform(state: &[f64]) -> Result<AvgDiffState, SpectralError> {
    if state.len() % 2 != 0 || state.is_empty() {
        return Err(SpectralError::DimensionMismatch {
            what: "[theta; omega] state",
            expected: 2 * (state.len() / 2).max(1),
            got: state.len(),
        });
    }
    let n = state.len() / 2;
    let h = helmert_basis(n);
    let (theta_avg, delta_theta) = project(&h, &state[..n]);
    let (omega_avg, delta_omega) = project(&h, &state[n..]);
    Ok(AvgDiffState {
        theta_avg,
        omega_avg,
        delta_theta,
        delta_omega,
    })
}

/// Inverse of [`average_difference_transform`].
pub fn inverse_average_difference(z: &AvgDiffState) -> Result<Vec<f64>, SpectralError> {
    if z.delta_theta.len() != z.delta_omega.len() {
        return Err(SpectralError::DimensionMismatch {
            what: "delta_omega",
            expected: z.delta_theta.len(),
            got: z.delta_omega.len(),
        });
    }
    let n = z.delta_theta.len() + 1;
    let h = helmert_basis(n);
    let mut out = lift(&h, z.theta_avg, &z.delta_theta);
    out.extend(lift(&h, z.omega_avg, &z.delta_omega));
    Ok(out)
}

/// `T` with `z = T x`, ordered `[θ_avg, ω_avg, Δθ, Δω]`.
pub fn transform_matrix(n: usize) -> DMatrix<f64> {
    let h = helmert_basis(n);
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        t[(0, k)] = 1.0 / n as f64;
        t[(1, n + k)] = 1.0 / n as f64;
    }
    for j in 0..n - 1 {
        for k in 0..n {
            t[(2 + j, k)] = h[(j, k)];
            t[(1 + n + j, n + k)] = h[(j, k)];
        }
    }
    t
}

/// `T⁻¹`, built directly from the orthonormality of the Helmert rows.
pub fn inverse_transform_matrix(n: usize) -> DMatrix<f64> {
    let h = helmert_basis(n);
    let mut ti = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        ti[(k, 0)] = 1.0;
        ti[(n + k, 1)] = 1.0;
        for j in 0..n - 1 {
            ti[(k, 2 + j)] = h[(j, k)];
            ti[(n + k, 1 + n + j)] = h[(j, k)];
        }
    }
    ti
}
