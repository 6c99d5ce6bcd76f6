//! Lyapunov spectrum by re-orthonormalising a tangent frame every step.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::map::{jacobian3, step3, MapParams, State};
use crate::orbit::DEFAULT_DIVERGENCE_THRESHOLD;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpectrum {
    /// Descending.
    pub exponents: [f64; 3],
    pub n_iter: usize,
    pub ic: State,
    /// Orbit state after transient and averaging window.
    pub final_state: State,
    /// Orbit mean of `log|det J|`; equals the exponent sum up to rounding.
    pub mean_log_det: f64,
}

impl LyapunovSpectrum {
    pub fn max(&self) -> f64 {
        self.exponents[0]
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

pub const DEFAULT_TRANSIENT: usize = 10_000;
pub const DEFAULT_ITERATIONS: usize = 100_000;

/// Spectrum starting from the identity frame.
pub fn lyapunov_spectrum(p: &MapParams, ic: State, n_transient: usize, n_iter: usize) -> Result<LyapunovSpectrum> {
    lyapunov_spectrum_with_frame(p, ic, n_transient, n_iter, Matrix3::identity())
}

/// Spectrum starting from an arbitrary (full-rank) initial frame.
pub fn lyapunov_spectrum_with_frame(
    p: &MapParams,
    ic: State,
    n_transient: usize,
    n_iter: usize,
    frame: Matrix3<f64>,
) -> Result<LyapunovSpectrum> {
    if n_iter == 0 {
        return Err(Error::InvalidArgument("n_iter must be positive".into()));
    }
    let mut s = ic;
    for step in 1..=n_transient {
        s = step3(p, s);
        if diverged(s) {
            return Err(Error::Diverged { step });
        }
    }
    let (mut q, _) = gram_schmidt(&frame).ok_or(Error::DegenerateFrame { step: 0 })?;
    let mut sums = [0.0f64; 3];
    let mut log_det = 0.0;
    for i in 0..n_iter {
        let j = jacobian3(p, s);
        log_det += j.determinant().abs().ln();
        let (qn, r) = gram_schmidt(&(j * q)).ok_or(Error::DegenerateFrame { step: n_transient + i + 1 })?;
        for (acc, rii) in sums.iter_mut().zip(r) {
            *acc += rii.ln();
        }
        q = qn;
        s = step3(p, s);
        if diverged(s) {
            return Err(Error::Diverged { step: n_transient + i + 1 });
        }
    }
    let n = n_iter as f64;
    let mut exponents = sums.map(|v| v / n);
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum { exponents, n_iter, ic, final_state: s, mean_log_det: log_det / n })
}

fn diverged(s: State) -> bool {
    !s.is_finite() || s.x.abs() > DEFAULT_DIVERGENCE_THRESHOLD
}

/// Modified Gram-Schmidt on the columns of `m`: returns `Q` and the
/// magnitudes `|R_ii|`, or `None` when a column collapses.
fn gram_schmidt(m: &Matrix3<f64>) -> Option<(Matrix3<f64>, [f64; 3])> {
    let mut cols: [Vector3<f64>; 3] = [m.column(0).into(), m.column(1).into(), m.column(2).into()];
    let mut diag = [0.0; 3];
    for i in 0..3 {
        for j in 0..i {
            let proj = cols[j].dot(&cols[i]);
            cols[i] -= cols[j] * proj;
        }
        let norm = cols[i].norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return None;
        }
        cols[i] /= norm;
        diag[i] = norm;
    }
    Some((Matrix3::from_columns(&cols), diag))
}
