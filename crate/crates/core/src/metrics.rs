//! Gate fidelity, leakage and phase diagnostics.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::SubspaceProjector;
use crate::{CMatrix, Complex64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityResult {
    pub fidelity: f64,
    pub leakage: f64,
    pub trace_m: Complex64,
    pub dimension: usize,
}

impl FidelityResult {
    /// Global phase of the actual gate relative to the ideal one, `arg Tr M`.
    pub fn global_phase(&self) -> f64 {
        self.trace_m.arg()
    }
}

/// `F = [Tr(M M^dag) + |Tr M|^2] / (n (n + 1))` with `M = U_ideal^dag P U P`,
/// leakage `1 - Tr(M M^dag) / n`.
pub fn gate_fidelity(
    u_actual: &CMatrix,
    u_ideal: &CMatrix,
    projector: &SubspaceProjector,
) -> Result<FidelityResult> {
    let n = projector.rank();
    if u_ideal.nrows() != n || u_ideal.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u_ideal.nrows() });
    }
    let projected = projector.restrict(u_actual)?;
    Ok(fidelity_projected(&projected, u_ideal))
}

/// Same as [`gate_fidelity`] for an already projected `n x n` block.
pub fn fidelity_projected(projected: &CMatrix, u_ideal: &CMatrix) -> FidelityResult {
    let n = projected.nrows();
    let m = u_ideal.ad_mul(projected);
    let tr_mm = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let trace_m = m.trace();
    let nf = n as f64;
    FidelityResult {
        fidelity: (tr_mm + trace_m.norm_sqr()) / (nf * (nf + 1.0)),
        leakage: 1.0 - tr_mm / nf,
        trace_m,
        dimension: n,
    }
}

/// Principal argument in (-pi, pi] of `u[index, index]`.
pub fn accumulated_phase(u_actual: &CMatrix, index: usize) -> Result<f64> {
    if index >= u_actual.nrows() {
        return Err(Error::InvalidArgument(format!("index {index} out of range")));
    }
    let z = u_actual[(index, index)];
    if z.norm() <= 1e-9 {
        return Err(Error::LeftSubspace { index, magnitude: z.norm() });
    }
    Ok(principal(z.arg()))
}

fn principal(phi: f64) -> f64 {
    if phi <= -PI {
        phi + 2.0 * PI
    } else {
        phi
    }
}

/// Continuity-tracked unwrapping of a phase series.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let prev = phases[i - 1];
            let d = p - prev;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
    }
    out
}

/// `a - b` wrapped into (-pi, pi].
pub fn phase_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}
