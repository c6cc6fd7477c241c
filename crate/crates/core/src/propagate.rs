//! Unitary evolution by Hermitian eigendecomposition and Lindblad evolution
//! by an adaptive Dormand-Prince 5(4) integrator.

use std::sync::Arc;

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::walkgraph::{hermiticity_error, HamiltonianMatrix};
use crate::{CMatrix, CVector, Complex64};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<FockBasis>,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(basis: Arc<FockBasis>, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: amplitudes.len() });
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis_state(basis: Arc<FockBasis>, index: usize) -> Result<Self> {
        if index >= basis.len() {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut amplitudes = CVector::zeros(basis.len());
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    /// Computational state `|bits>_L`.
    pub fn computational(basis: Arc<FockBasis>, bits: &[u8]) -> Result<Self> {
        let index = crate::fock::computational_index(bits, &basis)?;
        Self::basis_state(basis, index)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<psi|A|psi>`.
    pub fn expectation(&self, a: &CMatrix) -> Complex64 {
        self.amplitudes.dotc(&(a * &self.amplitudes))
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    basis: Arc<FockBasis>,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(basis: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: matrix.nrows() });
        }
        Ok(Self { basis, matrix })
    }

    pub fn pure(state: &StateVector) -> Self {
        let a = state.amplitudes();
        Self { basis: Arc::clone(state.basis()), matrix: a * a.adjoint() }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.matrix.nrows()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Jump operator stored as (row, col, value) triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub label: String,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl JumpOperator {
    pub fn to_dense(&self, dim: usize) -> CMatrix {
        let mut m = CMatrix::zeros(dim, dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LindbladOperatorSet {
    dim: usize,
    operators: Vec<JumpOperator>,
}

impl LindbladOperatorSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, operators: Vec::new() }
    }

    pub fn push(&mut self, op: JumpOperator) -> Result<()> {
        if let Some(&(r, c, _)) = op.entries.iter().find(|&&(r, c, _)| r >= self.dim || c >= self.dim) {
            return Err(Error::DimensionMismatch { expected: self.dim, found: r.max(c) + 1 });
        }
        self.operators.push(op);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[JumpOperator] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dense(&self) -> Vec<CMatrix> {
        self.operators.iter().map(|op| op.to_dense(self.dim)).collect()
    }
}

/// Cached eigendecomposition `H = V diag(lambda) V^dag`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct PropagatorCache {
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl PropagatorCache {
    pub fn new(h: &HamiltonianMatrix) -> Result<Self> {
        Self::from_matrix(h.matrix())
    }

    pub fn from_matrix(h: &CMatrix) -> Result<Self> {
        let scale = h.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        let err = hermiticity_error(h);
        if err > 1e-12 * scale {
            return Err(Error::NotHermitian(err));
        }
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..h.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { eigenvalues, eigenvectors })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn propagator(&self, t: f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (c, &lam) in self.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lam * t);
            for z in scaled.column_mut(c).iter_mut() {
                *z *= phase;
            }
        }
        scaled * v.adjoint()
    }

    pub fn evolve(&self, psi: &CVector, t: f64) -> CVector {
        let mut coeff = self.eigenvectors.ad_mul(psi);
        for (c, &lam) in self.eigenvalues.iter().enumerate() {
            coeff[c] *= Complex64::from_polar(1.0, -lam * t);
        }
        &self.eigenvectors * coeff
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time must be finite and non-negative, got {t}")))
    }
}

pub fn evolve_unitary(h: &HamiltonianMatrix, psi0: &StateVector, t: f64) -> Result<StateVector> {
    check_time(t)?;
    if psi0.amplitudes().len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi0.amplitudes().len() });
    }
    let cache = PropagatorCache::new(h)?;
    StateVector::new(Arc::clone(h.basis()), cache.evolve(psi0.amplitudes(), t))
}

/// `exp(-i H t)`.
pub fn propagator(h: &HamiltonianMatrix, t: f64) -> Result<CMatrix> {
    check_time(t)?;
    Ok(PropagatorCache::new(h)?.propagator(t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of uniform output intervals; `samples + 1` states are returned.
    pub samples: usize,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, samples: 200 }
    }
}

pub fn evolve_lindblad(
    h: &HamiltonianMatrix,
    ops: &LindbladOperatorSet,
    rho0: &DensityMatrix,
    t_final: f64,
    dt_hint: f64,
) -> Result<Vec<(f64, DensityMatrix)>> {
    evolve_lindblad_with(h, ops, rho0, t_final, dt_hint, LindbladOptions::default())
}

pub fn evolve_lindblad_with(
    h: &HamiltonianMatrix,
    ops: &LindbladOperatorSet,
    rho0: &DensityMatrix,
    t_final: f64,
    dt_hint: f64,
    opts: LindbladOptions,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final must be positive, got {t_final}")));
    }
    if opts.samples == 0 {
        return Err(Error::InvalidArgument("need at least one output interval".into()));
    }
    let dim = h.dim();
    if rho0.matrix().nrows() != dim || (!ops.is_empty() && ops.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: rho0.matrix().nrows() });
    }
    let err = hermiticity_error(h.matrix());
    if err > 1e-12 * h.matrix().iter().map(|z| z.norm()).fold(1.0, f64::max) {
        return Err(Error::NotHermitian(err));
    }
    let rhs = LindbladRhs::new(h.matrix(), ops);
    let basis = Arc::clone(rho0.basis());

    let mut out = Vec::with_capacity(opts.samples + 1);
    out.push((0.0, rho0.clone()));
    let mut rho = rho0.matrix().clone();
    let mut t = 0.0;
    let mut step = if dt_hint > 0.0 { dt_hint } else { t_final / (10.0 * opts.samples as f64) };
    let min_step = 1e-14 * t_final;

    for k in 1..=opts.samples {
        let t_next = if k == opts.samples { t_final } else { t_final * k as f64 / opts.samples as f64 };
        while t < t_next {
            let remaining = t_next - t;
            let clipped = step >= remaining;
            let dt = step.min(remaining);
            let (candidate, err_norm) = rhs.dopri_step(&rho, dt, opts.rtol, opts.atol);
            if err_norm <= 1.0 {
                rho = candidate;
                symmetrize(&mut rho);
                t = if clipped { t_next } else { t + dt };
            }
            let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            let proposed = dt * factor;
            // Do not let a short clipped step shrink the working step size.
            step = if clipped && err_norm <= 1.0 { step.max(proposed) } else { proposed };
            if step < min_step {
                return Err(Error::StepUnderflow { time: t });
            }
        }
        out.push((t_next, DensityMatrix { basis: Arc::clone(&basis), matrix: rho.clone() }));
    }
    Ok(out)
}

fn symmetrize(rho: &mut CMatrix) {
    let n = rho.nrows();
    for i in 0..n {
        rho[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (rho[(i, j)] + rho[(j, i)].conj()) * 0.5;
            rho[(i, j)] = avg;
            rho[(j, i)] = avg.conj();
        }
    }
}

struct LindbladRhs<'a> {
    h_eff: CMatrix,
    h_eff_adj: CMatrix,
    ops: &'a LindbladOperatorSet,
}

// Dormand-Prince 5(4) tableau; the generator is time independent so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl<'a> LindbladRhs<'a> {
    fn new(h: &CMatrix, ops: &'a LindbladOperatorSet) -> Self {
        let mut h_eff = h.clone();
        // H_eff = H - i/2 sum L^dag L
        for op in ops.operators() {
            for &(r1, c1, v1) in &op.entries {
                for &(r2, c2, v2) in &op.entries {
                    if r1 == r2 {
                        h_eff[(c1, c2)] -= 0.5 * I * v1.conj() * v2;
                    }
                }
            }
        }
        let h_eff_adj = h_eff.adjoint();
        Self { h_eff, h_eff_adj, ops }
    }

    fn eval(&self, rho: &CMatrix) -> CMatrix {
        let mut out = (&self.h_eff * rho - rho * &self.h_eff_adj) * (-I);
        for op in self.ops.operators() {
            for &(r1, c1, v1) in &op.entries {
                for &(r2, c2, v2) in &op.entries {
                    out[(r1, r2)] += v1 * v2.conj() * rho[(c1, c2)];
                }
            }
        }
        out
    }

    fn dopri_step(&self, y: &CMatrix, dt: f64, rtol: f64, atol: f64) -> (CMatrix, f64) {
        let mut k: Vec<CMatrix> = Vec::with_capacity(7);
        k.push(self.eval(y));
        for row in &A[1..7] {
            let mut stage = y.clone();
            for (kj, &a) in k.iter().zip(row) {
                if a != 0.0 {
                    stage += kj * Complex64::new(dt * a, 0.0);
                }
            }
            k.push(self.eval(&stage));
        }
        let mut y5 = y.clone();
        let mut diff = CMatrix::zeros(y.nrows(), y.ncols());
        for s in 0..7 {
            if B5[s] != 0.0 {
                y5 += &k[s] * Complex64::new(dt * B5[s], 0.0);
            }
            let e = B5[s] - B4[s];
            if e != 0.0 {
                diff += &k[s] * Complex64::new(dt * e, 0.0);
            }
        }
        let mut acc = 0.0;
        for ((d, a), b) in diff.iter().zip(y.iter()).zip(y5.iter()) {
            let sc = atol + rtol * a.norm().max(b.norm());
            acc += (d.norm() / sc).powi(2);
        }
        (y5, (acc / diff.len() as f64).sqrt())
    }
}
