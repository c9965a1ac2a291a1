//! Small-signal analysis of identically tuned converter networks.
//!
//! Linearized around the flat operating point, the angle/frequency dynamics of
//! `n` nodes with common inertia `m` and damping `d` are
//!
//! ```text
//! d/dt [θ; ω] = [[0, I], [-L_B/m, -(d/m) I]] [θ; ω]
//! ```
//!
//! Because `L_B` is symmetric, each of its eigenvalues `λ` contributes the two
//! roots of `m η² + d η + λ = 0` to the spectrum of the block matrix. This
//! module diagonalizes `L_B` with cyclic Jacobi and applies that closed form,
//! then checks every mode independently for singularity of `𝓛 - ηI`.

mod jacobi;
mod transform;

use std::fmt;

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::controllers::{ControllerConfig, EquivalentParams};
use crate::network::SusceptanceLaplacian;

pub use jacobi::{symmetric_eigen, SymmetricEigen};
pub use transform::{
    average_difference_transform, helmert_basis, inverse_average_difference,
    inverse_transform_matrix, transform_matrix, AvgDiffState,
};

pub type Complex64 = Complex<f64>;

/// Laplacian eigenvalues below this fraction of the largest are treated as zero.
pub const ZERO_LAMBDA_RTOL: f64 = 1e-10;
/// Relative discriminant tolerance under which a mode pair counts as repeated.
pub const DEFECTIVE_RTOL: f64 = 1e-12;
/// Relative discriminant band reported as the critically damped boundary.
pub const CRITICAL_BAND_RTOL: f64 = 1e-4;
/// Relative tolerance for the identical-tuning check.
pub const TUNING_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({row},{col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_diagonal:e})")]
    NotConverged { sweeps: usize, off_diagonal: f64 },
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{name} = {value} must be > 0")]
    NonPositive { name: &'static str, value: f64 },
    #[error(
        "network analysis assumes all converters are tuned identically: node {node} has {field} = {got}, node 0 has {expected}"
    )]
    HeterogeneousTuning {
        node: usize,
        field: &'static str,
        expected: f64,
        got: f64,
    },
    #[error("no controllers to analyze")]
    NoNodes,
    #[error("mode #{index} (eta = {eta}) fails verification: residual {residual:e} > tol {tol:e}")]
    ModeResidual {
        index: usize,
        eta: Complex64,
        residual: f64,
        tol: f64,
    },
}

fn check_positive(name: &'static str, value: f64) -> Result<(), SpectralError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SpectralError::NonPositive { name, value })
    }
}

/// Common equivalent parameters of identically tuned controllers.
pub fn common_tuning(controllers: &[ControllerConfig]) -> Result<EquivalentParams, SpectralError> {
    let first = controllers.first().ok_or(SpectralError::NoNodes)?.equivalent();
    for (node, c) in controllers.iter().enumerate().skip(1) {
        let eq = c.equivalent();
        let fields = [
            ("m", first.m, eq.m),
            ("d", first.d, eq.d),
            ("tau_f", first.tau_f, eq.tau_f),
            ("r_q", first.r_q, eq.r_q),
            ("vm_star", first.vm_star, eq.vm_star),
        ];
        for (field, expected, got) in fields {
            if (expected - got).abs() > TUNING_RTOL * expected.abs().max(got.abs()).max(1e-300) {
                return Err(SpectralError::HeterogeneousTuning {
                    node,
                    field,
                    expected,
                    got,
                });
            }
        }
    }
    Ok(first)
}

/// The `2n × 2n` linearized angle/frequency system matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LargerLaplacian {
    pub matrix: DMatrix<f64>,
    pub m: f64,
    pub d: f64,
}

impl LargerLaplacian {
    pub fn n(&self) -> usize {
        self.matrix.nrows() / 2
    }
}

pub fn assemble_larger_laplacian(
    lap: &SusceptanceLaplacian,
    m: f64,
    d: f64,
) -> Result<LargerLaplacian, SpectralError> {
    check_positive("m", m)?;
    check_positive("d", d)?;
    let n = lap.dim();
    let lb = lap.matrix();
    let mut matrix = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        matrix[(i, n + i)] = 1.0;
        matrix[(n + i, n + i)] = -d / m;
        for j in 0..n {
            matrix[(n + i, j)] = -lb[(i, j)] / m;
        }
    }
    Ok(LargerLaplacian { matrix, m, d })
}

/// Eigenvalues of `L_B`, ascending.
pub fn laplacian_spectrum(lap: &SusceptanceLaplacian) -> Result<Vec<f64>, SpectralError> {
    Ok(symmetric_eigen(lap.matrix())?.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    ZeroMode,
    RealStable,
    ComplexStable,
}

impl ModeClass {
    pub fn name(self) -> &'static str {
        match self {
            ModeClass::ZeroMode => "zero-mode",
            ModeClass::RealStable => "real-stable",
            ModeClass::ComplexStable => "complex-stable",
        }
    }
}

impl fmt::Display for ModeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One eigenvalue of the larger Laplacian and the Laplacian eigenvalue it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub eta: Complex64,
    pub lambda: f64,
    pub lambda_index: usize,
    pub class: ModeClass,
    /// The pair is a repeated (defective) root, `d² = 4 λ m`.
    pub repeated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
    pub lambdas: Vec<f64>,
    pub m: f64,
    pub d: f64,
    /// Nonzero mode with the largest real part (slowest decay).
    pub eta2: Complex64,
}

impl ModeSet {
    pub fn zero_modes(&self) -> impl Iterator<Item = &Mode> {
        self.modes.iter().filter(|m| m.class == ModeClass::ZeroMode)
    }

    pub fn has_complex(&self) -> bool {
        self.modes.iter().any(|m| m.class == ModeClass::ComplexStable)
    }

    pub fn has_repeated(&self) -> bool {
        self.modes.iter().any(|m| m.repeated)
    }
}

/// Modes from the quadratic `m η² + d η + λ = 0`, two per Laplacian eigenvalue.
pub fn closed_form_modes(lambdas: &[f64], m: f64, d: f64) -> Result<ModeSet, SpectralError> {
    check_positive("m", m)?;
    check_positive("d", d)?;
    let lambda_max = lambdas.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let snapped: Vec<f64> = lambdas
        .iter()
        .map(|&l| if l.abs() < ZERO_LAMBDA_RTOL * lambda_max { 0.0 } else { l })
        .collect();

    let rate = d / m;
    let mut modes = Vec::with_capacity(2 * snapped.len());
    for (idx, &lambda) in snapped.iter().enumerate() {
        let mode = |eta: Complex64, class, repeated| Mode {
            eta,
            lambda,
            lambda_index: idx,
            class,
            repeated,
        };
        if lambda == 0.0 {
            modes.push(mode(Complex64::new(0.0, 0.0), ModeClass::ZeroMode, false));
            modes.push(mode(Complex64::new(-rate, 0.0), ModeClass::RealStable, false));
            continue;
        }
        let disc = rate * rate - 4.0 * lambda / m;
        if disc.abs() <= DEFECTIVE_RTOL * rate * rate {
            let eta = Complex64::new(-rate / 2.0, 0.0);
            modes.push(mode(eta, ModeClass::RealStable, true));
            modes.push(mode(eta, ModeClass::RealStable, true));
        } else if disc > 0.0 {
            // larger-magnitude root first, then Vieta for the other to avoid cancellation
            let fast = -0.5 * (rate + disc.sqrt());
            let slow = (lambda / m) / fast;
            modes.push(mode(Complex64::new(slow, 0.0), ModeClass::RealStable, false));
            modes.push(mode(Complex64::new(fast, 0.0), ModeClass::RealStable, false));
        } else {
            let im = 0.5 * (-disc).sqrt();
            modes.push(mode(Complex64::new(-rate / 2.0, im), ModeClass::ComplexStable, false));
            modes.push(mode(Complex64::new(-rate / 2.0, -im), ModeClass::ComplexStable, false));
        }
    }

    let eta2 = modes
        .iter()
        .filter(|md| md.class != ModeClass::ZeroMode)
        .map(|md| md.eta)
        .max_by(|a, b| a.re.total_cmp(&b.re).then(b.im.abs().total_cmp(&a.im.abs())))
        .unwrap_or(Complex64::new(-rate, 0.0));

    Ok(ModeSet {
        modes,
        lambdas: snapped,
        m,
        d,
        eta2,
    })
}

/// Laplacian spectrum followed by [`closed_form_modes`].
pub fn network_modes(lap: &SusceptanceLaplacian, m: f64, d: f64) -> Result<ModeSet, SpectralError> {
    closed_form_modes(&laplacian_spectrum(lap)?, m, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeResidual {
    pub eta: Complex64,
    pub lambda: f64,
    /// Smallest pivot of complete-pivoting elimination on `𝓛 - ηI`, over `‖𝓛‖_F`.
    pub pivot_residual: f64,
    /// `|m η² + d η + λ|`.
    pub quadratic_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCheck {
    pub residuals: Vec<ModeResidual>,
    pub tol: f64,
}

impl ModeCheck {
    pub fn max_pivot_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.pivot_residual).fold(0.0, f64::max)
    }

    pub fn max_quadratic_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.quadratic_residual).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|r| r.pivot_residual < self.tol)
    }

    /// First mode whose pivot residual is not below `tol`.
    pub fn ensure(&self) -> Result<(), SpectralError> {
        match self.residuals.iter().enumerate().find(|(_, r)| !(r.pivot_residual < self.tol)) {
            None => Ok(()),
            Some((index, r)) => Err(SpectralError::ModeResidual {
                index,
                eta: r.eta,
                residual: r.pivot_residual,
                tol: self.tol,
            }),
        }
    }
}

/// Independent check that every mode is an eigenvalue of `𝓛`.
pub fn verify_modes(larger: &LargerLaplacian, modes: &ModeSet, tol: f64) -> Result<ModeCheck, SpectralError> {
    let dim = larger.matrix.nrows();
    if modes.modes.len() != dim {
        return Err(SpectralError::DimensionMismatch {
            what: "mode count",
            expected: dim,
            got: modes.modes.len(),
        });
    }
    let scale = larger.matrix.norm().max(f64::MIN_POSITIVE);
    let residuals = modes
        .modes
        .iter()
        .map(|md| {
            let shifted = DMatrix::from_fn(dim, dim, |r, c| {
                let v = Complex64::new(larger.matrix[(r, c)], 0.0);
                if r == c {
                    v - md.eta
                } else {
                    v
                }
            });
            ModeResidual {
                eta: md.eta,
                lambda: md.lambda,
                pivot_residual: smallest_pivot(shifted) / scale,
                quadratic_residual: (md.eta * md.eta * larger.m + md.eta * larger.d + md.lambda).norm(),
            }
        })
        .collect();
    Ok(ModeCheck { residuals, tol })
}

/// Magnitude of the last pivot of Gaussian elimination with complete pivoting.
fn smallest_pivot(mut a: DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut smallest = f64::INFINITY;
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for r in k..n {
            for c in k..n {
                let v = a[(r, c)].norm();
                if v > best {
                    (pr, pc, best) = (r, c, v);
                }
            }
        }
        smallest = smallest.min(best);
        if best == 0.0 {
            break;
        }
        a.swap_rows(k, pr);
        a.swap_columns(k, pc);
        let pivot = a[(k, k)];
        for r in (k + 1)..n {
            let factor = a[(r, k)] / pivot;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in k..n {
                let sub = factor * a[(k, c)];
                a[(r, c)] -= sub;
            }
        }
    }
    smallest
}

/// `T 𝓛 T⁻¹` in `[θ_avg, ω_avg, Δθ, Δω]` coordinates.
pub fn conjugated_dynamics(larger: &LargerLaplacian) -> DMatrix<f64> {
    let n = larger.n();
    transform_matrix(n) * &larger.matrix * inverse_transform_matrix(n)
}

/// Steady state reached after a constant injection `p_d` (power *into* each node).
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSteadyState {
    /// Common frequency deviation of every node.
    pub omega: f64,
    /// Angles relative to their mean.
    pub theta_offsets: Vec<f64>,
    /// Ramp rate of the average angle; equals `omega`.
    pub theta_avg_slope: f64,
}

pub fn predict_disturbance_steady_state(
    lap: &SusceptanceLaplacian,
    d: f64,
    p_d: &[f64],
) -> Result<DisturbanceSteadyState, SpectralError> {
    check_positive("d", d)?;
    let n = lap.dim();
    if p_d.len() != n {
        return Err(SpectralError::DimensionMismatch {
            what: "disturbance vector",
            expected: n,
            got: p_d.len(),
        });
    }
    let omega = p_d.iter().sum::<f64>() / n as f64 / d;
    let rhs: Vec<f64> = p_d.iter().map(|p| p - d * omega).collect();

    // pseudo-inverse solve on the complement of the constant vector
    let eig = symmetric_eigen(lap.matrix())?;
    let lambda_max = eig.values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut theta = vec![0.0; n];
    for (i, &lambda) in eig.values.iter().enumerate() {
        if lambda.abs() < ZERO_LAMBDA_RTOL * lambda_max || lambda == 0.0 {
            continue;
        }
        let v = eig.vectors.column(i);
        let coeff = v.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / lambda;
        for k in 0..n {
            theta[k] += coeff * v[k];
        }
    }
    let mean = theta.iter().sum::<f64>() / n as f64;
    theta.iter_mut().for_each(|t| *t -= mean);
    Ok(DisturbanceSteadyState {
        omega,
        theta_offsets: theta,
        theta_avg_slope: omega,
    })
}

/// Eigenvalues `-(1 + R_q λ)/τ_f` of the linearized voltage dynamics, ascending in λ.
pub fn voltage_mode_spectrum(
    lap: &SusceptanceLaplacian,
    r_q: f64,
    tau_f: f64,
) -> Result<Vec<f64>, SpectralError> {
    check_positive("tau_f", tau_f)?;
    if !(r_q >= 0.0) {
        return Err(SpectralError::NonPositive {
            name: "r_q",
            value: r_q,
        });
    }
    let lambdas = laplacian_spectrum(lap)?;
    let lambda_max = lambdas.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    Ok(lambdas
        .iter()
        .map(|&l| {
            let l = if l.abs() < ZERO_LAMBDA_RTOL * lambda_max { 0.0 } else { l };
            -(1.0 + r_q * l) / tau_f
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingRegime {
    Oscillatory,
    Critical,
    Overdamped,
}

impl DampingRegime {
    /// Classifies `d² - 4 λ m` with a relative boundary band.
    pub fn classify(lambda: f64, m: f64, d: f64, rtol: f64) -> Self {
        let threshold = 4.0 * lambda * m;
        let disc = d * d - threshold;
        if disc.abs() <= rtol * threshold.max(d * d) {
            DampingRegime::Critical
        } else if disc < 0.0 {
            DampingRegime::Oscillatory
        } else {
            DampingRegime::Overdamped
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DampingRegime::Oscillatory => "oscillatory",
            DampingRegime::Critical => "critical",
            DampingRegime::Overdamped => "overdamped",
        }
    }
}

impl fmt::Display for DampingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningReport {
    pub m: f64,
    pub d: f64,
    pub lambda_max: f64,
    /// Algebraic connectivity (second-smallest Laplacian eigenvalue), 0 for n = 1.
    pub lambda2: f64,
    pub eta2: Complex64,
    pub damping: DampingRegime,
    /// `d` that makes the stiffest mode critically damped, `2 √(λ_max m)`.
    pub d_crit: f64,
    /// Initial ROCOF per unit power step, `1/m`.
    pub rocof_per_unit_step: f64,
}

impl TuningReport {
    pub fn oscillatory(&self) -> bool {
        self.damping == DampingRegime::Oscillatory
    }
}

pub fn tuning_report(lap: &SusceptanceLaplacian, m: f64, d: f64) -> Result<TuningReport, SpectralError> {
    let modes = network_modes(lap, m, d)?;
    Ok(tuning_from_modes(&modes))
}

pub fn tuning_from_modes(modes: &ModeSet) -> TuningReport {
    let (m, d) = (modes.m, modes.d);
    let lambda_max = modes.lambdas.iter().copied().fold(0.0, f64::max);
    let lambda2 = modes.lambdas.get(1).copied().unwrap_or(0.0);
    TuningReport {
        m,
        d,
        lambda_max,
        lambda2,
        eta2: modes.eta2,
        damping: DampingRegime::classify(lambda_max, m, d, CRITICAL_BAND_RTOL),
        d_crit: 2.0 * (lambda_max * m).sqrt(),
        rocof_per_unit_step: 1.0 / m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_laplacian, Line, NetworkGraph, DEFAULT_OMEGA0};
    use approx::assert_abs_diff_eq;

    fn lap(g: &NetworkGraph) -> SusceptanceLaplacian {
        build_laplacian(g).unwrap()
    }

    fn single_node() -> SusceptanceLaplacian {
        lap(&NetworkGraph::new(1, vec![], DEFAULT_OMEGA0).unwrap())
    }

    fn pair(b: f64) -> SusceptanceLaplacian {
        lap(&NetworkGraph::new(2, vec![Line::lossless(0, 1, b)], DEFAULT_OMEGA0).unwrap())
    }

    #[test]
    fn larger_laplacian_single_node() {
        let l = assemble_larger_laplacian(&single_node(), 2.0, 20.0).unwrap();
        assert_eq!(l.matrix, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -10.0]));
    }

    #[test]
    fn larger_laplacian_pair() {
        let l = assemble_larger_laplacian(&pair(1.0), 1.0, 3.0).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            -1.0, 1.0, -3.0, 0.0,
            1.0, -1.0, 0.0, -3.0,
        ]);
        assert_eq!(l.matrix, expected);
        assert!(assemble_larger_laplacian(&pair(1.0), 0.0, 3.0).is_err());
    }

    #[test]
    fn spectra_of_small_graphs() {
        let s = laplacian_spectrum(&pair(1.0)).unwrap();
        assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 2.0, epsilon = 1e-12);
        let s = laplacian_spectrum(&lap(&NetworkGraph::complete(3, 2.0).unwrap())).unwrap();
        for (x, y) in s.iter().zip([0.0, 6.0, 6.0]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
        for n in [4, 5] {
            let s = laplacian_spectrum(&lap(&NetworkGraph::complete(n, 1.0).unwrap())).unwrap();
            assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-10);
            for x in &s[1..] {
                assert_abs_diff_eq!(*x, n as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_lambda_gives_zero_and_damping_rate() {
        let ms = closed_form_modes(&[0.0], 2.0, 20.0).unwrap();
        assert_eq!(ms.modes[0].eta, Complex64::new(0.0, 0.0));
        assert_eq!(ms.modes[0].class, ModeClass::ZeroMode);
        assert_eq!(ms.modes[1].eta, Complex64::new(-10.0, 0.0));
        assert_eq!(ms.eta2, Complex64::new(-10.0, 0.0));
    }

    #[test]
    fn closed_form_examples() {
        let ms = closed_form_modes(&[2.0], 1.0, 3.0).unwrap();
        let mut re: Vec<f64> = ms.modes.iter().map(|m| m.eta.re).collect();
        re.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(re[0], -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(re[1], -1.0, epsilon = 1e-15);

        let ms = closed_form_modes(&[2.0], 1.0, 1.0).unwrap();
        assert!(ms.has_complex());
        assert_abs_diff_eq!(ms.modes[0].eta.re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ms.modes[0].eta.im.abs(), 1.322_875_655_5, epsilon = 1e-9);
    }

    #[test]
    fn repeated_roots_are_flagged() {
        let ms = closed_form_modes(&[0.0, 2.0], 0.5, 2.0).unwrap();
        assert!(ms.has_repeated());
        assert_eq!(ms.modes[2].eta, ms.modes[3].eta);
        assert_eq!(ms.modes[2].eta.re, -2.0);
    }

    #[test]
    fn tiny_lambda_is_snapped() {
        let ms = closed_form_modes(&[1e-14, 2.0], 1.0, 1.0).unwrap();
        assert_eq!(ms.zero_modes().count(), 1);
        assert_eq!(ms.modes[0].eta.im, 0.0);
    }

    #[test]
    fn four_by_four_determinant_vanishes_at_minus_one() {
        let l = assemble_larger_laplacian(&pair(1.0), 1.0, 3.0).unwrap();
        let det = (&l.matrix + DMatrix::<f64>::identity(4, 4)).determinant();
        assert_abs_diff_eq!(det, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn verify_accepts_true_modes_and_rejects_shifted_ones() {
        let l = assemble_larger_laplacian(&pair(1.0), 1.0, 3.0).unwrap();
        let ms = network_modes(&pair(1.0), 1.0, 3.0).unwrap();
        let check = verify_modes(&l, &ms, 1e-9).unwrap();
        assert!(check.passed(), "{check:?}");
        check.ensure().unwrap();

        let mut wrong = ms.clone();
        let idx = wrong.modes.iter().position(|m| (m.eta.re + 1.0).abs() < 1e-12).unwrap();
        wrong.modes[idx].eta = Complex64::new(-1.0 + 1e-3, 0.0);
        let check = verify_modes(&l, &wrong, 1e-9).unwrap();
        assert!(!check.passed());
        assert!(matches!(check.ensure(), Err(SpectralError::ModeResidual { index, .. }) if index == idx));
    }

    #[test]
    fn zero_mode_eigenvector_is_constant_shift() {
        let g = NetworkGraph::ring(5, 1.5).unwrap();
        let l = assemble_larger_laplacian(&lap(&g), 1.0, 2.0).unwrap();
        let x = nalgebra::DVector::from_iterator(10, (0..10).map(|i| if i < 5 { 1.0 } else { 0.0 }));
        assert!((&l.matrix * x).norm() < 1e-15);
    }

    #[test]
    fn average_coordinates_decouple() {
        let g = NetworkGraph::new(
            4,
            vec![
                Line::lossless(0, 1, 1.0),
                Line::lossless(1, 2, 2.5),
                Line::lossless(2, 3, 0.7),
                Line::lossless(0, 2, 1.2),
            ],
            DEFAULT_OMEGA0,
        )
        .unwrap();
        let l = assemble_larger_laplacian(&lap(&g), 1.5, 2.0).unwrap();
        let c = conjugated_dynamics(&l);
        let dim = c.nrows();
        // dθ_avg/dt = ω_avg
        assert_abs_diff_eq!(c[(0, 1)], 1.0, epsilon = 1e-14);
        for j in (0..dim).filter(|&j| j != 1) {
            assert_abs_diff_eq!(c[(0, j)], 0.0, epsilon = 1e-14);
        }
        // dω_avg/dt = -(d/m) ω_avg
        assert_abs_diff_eq!(c[(1, 1)], -2.0 / 1.5, epsilon = 1e-14);
        for j in (0..dim).filter(|&j| j != 1) {
            assert_abs_diff_eq!(c[(1, j)], 0.0, epsilon = 1e-14);
        }
        // difference rows ignore the averages
        for i in 2..dim {
            assert_abs_diff_eq!(c[(i, 0)], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(c[(i, 1)], 0.0, epsilon = 1e-14);
        }
        // the difference block is Hurwitz
        let sub = c.view((2, 2), (dim - 2, dim - 2)).into_owned();
        for ev in sub.complex_eigenvalues().iter() {
            assert!(ev.re < 0.0);
        }
    }

    #[test]
    fn disturbance_steady_state_examples() {
        let ss = predict_disturbance_steady_state(&pair(1.0), 20.0, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(ss.omega, 0.025, epsilon = 1e-15);
        assert_abs_diff_eq!(ss.theta_offsets[0] - ss.theta_offsets[1], 0.5, epsilon = 1e-12);

        let zero = predict_disturbance_steady_state(&pair(1.0), 20.0, &[0.0, 0.0]).unwrap();
        assert_eq!(zero.omega, 0.0);
        assert!(zero.theta_offsets.iter().all(|t| t.abs() < 1e-15));

        let g = NetworkGraph::ring(4, 1.0).unwrap();
        let ss = predict_disturbance_steady_state(&lap(&g), 5.0, &[1.0, -1.0, 0.5, -0.5]).unwrap();
        assert_abs_diff_eq!(ss.omega, 0.0, epsilon = 1e-16);
        assert!(ss.theta_offsets.iter().any(|t| t.abs() > 0.1));
        // L θ reproduces the balanced injection
        let lt = lap(&g).apply(&ss.theta_offsets).unwrap();
        for (a, b) in lt.iter().zip([1.0, -1.0, 0.5, -0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn voltage_modes() {
        let v = voltage_mode_spectrum(&pair(1.0), 0.0, 0.1).unwrap();
        assert!(v.iter().all(|x| (x + 10.0).abs() < 1e-12));
        let v = voltage_mode_spectrum(&pair(1.0), 0.2, 0.1).unwrap();
        assert_abs_diff_eq!(v[0], -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], -14.0, epsilon = 1e-12);
        assert!(v.iter().all(|x| *x <= -10.0 + 1e-12));
    }

    #[test]
    fn tuning_examples() {
        let r = tuning_report(&pair(1.0), 1.0, 3.0).unwrap();
        assert!(!r.oscillatory());
        assert_eq!(r.damping, DampingRegime::Overdamped);
        let r = tuning_report(&pair(1.0), 1.0, 1.0).unwrap();
        assert!(r.oscillatory());
        assert_abs_diff_eq!(r.d_crit, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.rocof_per_unit_step, 1.0);
        let r = tuning_report(&pair(1.0), 1.0, 2.8284).unwrap();
        assert_eq!(r.damping, DampingRegime::Critical);
    }

    #[test]
    fn connectivity_eventually_makes_modes_oscillatory() {
        let flags: Vec<bool> = (2..9)
            .map(|n| tuning_report(&lap(&NetworkGraph::complete(n, 1.0).unwrap()), 1.0, 4.5).unwrap().oscillatory())
            .collect();
        assert!(!flags[0]);
        assert!(*flags.last().unwrap());
        // monotone: once oscillatory, stays oscillatory
        assert!(flags.windows(2).all(|w| !w[0] || w[1]));
    }

    #[test]
    fn heterogeneous_tuning_is_rejected() {
        use crate::controllers::{ControllerForm, NativeParams, VsmParams};
        let c = |m: f64| ControllerConfig::new(NativeParams::Vsm(VsmParams::new(m, 20.0)), ControllerForm::Reduced);
        assert!(common_tuning(&[c(2.0), c(2.0)]).is_ok());
        let err = common_tuning(&[c(2.0), c(3.0)]).unwrap_err();
        assert!(err.to_string().contains("tuned identically"));
    }
}
