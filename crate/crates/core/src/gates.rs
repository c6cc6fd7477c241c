//! Gate schedules and their parameter restrictions.
//!
//! Qubit `q` of a gate acts on column `q`. Single-qubit gates use one
//! column, CPhase and iSWAP two, CCPhase three; [`GateSchedule::embed`]
//! places them on a larger array.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{bits_label, enumerate_basis, word_to_bits, FockBasis, SiteIndex};
use crate::metrics::{accumulated_phase, fidelity_projected};
use crate::propagate::PropagatorCache;
use crate::walkgraph::{build_hamiltonian, WalkGraph};
use crate::{CMatrix, CVector, Complex64};

fn site(column: usize, row: usize) -> SiteIndex {
    SiteIndex::new(column, row)
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GateParams {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub mu: f64,
    pub m: i64,
    pub k: i64,
    #[serde(rename = "n")]
    pub n_int: i64,
    /// Second ZZ strength (CCPhase only).
    #[serde(rename = "V2", default, skip_serializing_if = "is_zero")]
    pub v2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleStep {
    pub graph: WalkGraph,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSchedule {
    label: String,
    n_logical: usize,
    steps: Vec<ScheduleStep>,
    params: Option<GateParams>,
}

impl GateSchedule {
    pub fn new(label: impl Into<String>, n_logical: usize, steps: Vec<ScheduleStep>) -> Result<Self> {
        if n_logical == 0 {
            return Err(Error::InvalidArgument("schedule needs at least one logical qubit".into()));
        }
        for s in &steps {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::InvalidArgument(format!("step duration must be positive, got {}", s.duration)));
            }
            if s.graph.n_logical() != n_logical {
                return Err(Error::BasisMismatch { graph: s.graph.n_logical(), basis: n_logical });
            }
            s.graph.validate()?;
        }
        Ok(Self { label: label.into(), n_logical, steps, params: None })
    }

    /// Idle schedule with no steps.
    pub fn identity(n_logical: usize) -> Self {
        Self { label: "id".into(), n_logical, steps: Vec::new(), params: None }
    }

    pub fn with_params(mut self, params: GateParams) -> Self {
        self.params = Some(params);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_logical(&self) -> usize {
        self.n_logical
    }

    pub fn steps(&self) -> &[ScheduleStep] {
        &self.steps
    }

    pub fn params(&self) -> Option<&GateParams> {
        self.params.as_ref()
    }

    pub fn duration(&self) -> f64 {
        self.steps.iter().map(|s| s.duration).sum()
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &GateSchedule) -> Result<GateSchedule> {
        if self.n_logical != other.n_logical {
            return Err(Error::BasisMismatch { graph: other.n_logical, basis: self.n_logical });
        }
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        Ok(GateSchedule {
            label: format!("{};{}", self.label, other.label),
            n_logical: self.n_logical,
            steps,
            params: None,
        })
    }

    /// The same schedule acting on `columns` of an `n_total`-column array.
    pub fn embed(&self, n_total: usize, columns: &[usize]) -> Result<GateSchedule> {
        let steps = self
            .steps
            .iter()
            .map(|s| Ok(ScheduleStep { graph: s.graph.embed(n_total, columns)?, duration: s.duration }))
            .collect::<Result<Vec<_>>>()?;
        Ok(GateSchedule { label: self.label.clone(), n_logical: n_total, steps, params: self.params })
    }

    fn caches(&self, basis: &Arc<FockBasis>) -> Result<Vec<PropagatorCache>> {
        self.steps
            .iter()
            .map(|s| PropagatorCache::new(&build_hamiltonian(&s.graph, basis)?))
            .collect()
    }

    /// Full-space unitary `U_last ... U_first`.
    pub fn propagator(&self, basis: &Arc<FockBasis>) -> Result<CMatrix> {
        if basis.n_logical() != self.n_logical {
            return Err(Error::BasisMismatch { graph: self.n_logical, basis: basis.n_logical() });
        }
        let mut u = CMatrix::identity(basis.len(), basis.len());
        for (cache, step) in self.caches(basis)?.iter().zip(&self.steps) {
            u = cache.propagator(step.duration) * u;
        }
        Ok(u)
    }

    /// State at `samples + 1` uniformly spaced times over the schedule.
    pub fn sample_evolution(
        &self,
        basis: &Arc<FockBasis>,
        psi0: &CVector,
        samples: usize,
    ) -> Result<Vec<(f64, CVector)>> {
        if psi0.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: psi0.len() });
        }
        let caches = self.caches(basis)?;
        let total = self.duration();
        let samples = samples.max(1);
        let mut out = Vec::with_capacity(samples + 1);
        let mut psi_start = psi0.clone();
        let mut step_start = 0.0;
        let mut step = 0;
        for i in 0..=samples {
            let t = if i == samples { total } else { total * i as f64 / samples as f64 };
            while step < self.steps.len() && t > step_start + self.steps[step].duration {
                psi_start = caches[step].evolve(&psi_start, self.steps[step].duration);
                step_start += self.steps[step].duration;
                step += 1;
            }
            let psi = if step < self.steps.len() {
                caches[step].evolve(&psi_start, (t - step_start).max(0.0))
            } else {
                psi_start.clone()
            };
            out.push((t, psi));
        }
        Ok(out)
    }

    /// Report against `ideal` in the default basis (occupations capped at 2).
    pub fn report(&self, ideal: &CMatrix) -> Result<GateReport> {
        let basis = Arc::new(enumerate_basis(self.n_logical, 2)?);
        self.report_in(&basis, ideal)
    }

    pub fn report_in(&self, basis: &Arc<FockBasis>, ideal: &CMatrix) -> Result<GateReport> {
        let u = self.propagator(basis)?;
        GateReport::from_unitary(self, basis, &u, ideal)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<GateParams>,
    pub duration: f64,
    pub fidelity: f64,
    pub leakage: f64,
    /// Bitstring to principal phase of the diagonal element; states whose
    /// diagonal element vanishes are omitted.
    pub phases: BTreeMap<String, f64>,
    #[serde(skip)]
    pub projected: CMatrix,
    #[serde(skip)]
    pub global_phase: f64,
}

impl GateReport {
    pub fn from_unitary(
        schedule: &GateSchedule,
        basis: &FockBasis,
        u: &CMatrix,
        ideal: &CMatrix,
    ) -> Result<Self> {
        let proj = basis.computational_projector();
        if ideal.nrows() != proj.rank() {
            return Err(Error::DimensionMismatch { expected: proj.rank(), found: ideal.nrows() });
        }
        let projected = proj.restrict(u)?;
        let fid = fidelity_projected(&projected, ideal);
        let mut phases = BTreeMap::new();
        for word in 0..proj.rank() {
            if let Ok(p) = accumulated_phase(&projected, word) {
                phases.insert(bits_label(&word_to_bits(word, basis.n_logical())), p);
            }
        }
        Ok(GateReport {
            label: schedule.label.clone(),
            params: schedule.params,
            duration: schedule.duration(),
            fidelity: fid.fidelity,
            leakage: fid.leakage,
            phases,
            projected,
            global_phase: fid.global_phase(),
        })
    }

    pub fn phase(&self, bits: &str) -> Option<f64> {
        self.phases.get(bits).copied()
    }
}

/// Ideal logical unitaries; qubit 0 is the most significant bit.
pub mod ideal {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    /// `exp(-i theta sigma_x)`.
    pub fn rx(theta: f64) -> CMatrix {
        let (s, co) = theta.sin_cos();
        CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
    }

    /// `diag(1, e^{i theta})`.
    pub fn phase(theta: f64) -> CMatrix {
        diagonal_phases(&[0.0, theta])
    }

    pub fn hadamard() -> CMatrix {
        let h = 1.0 / SQRT_2;
        CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
    }

    pub fn diagonal_phases(phases: &[f64]) -> CMatrix {
        let d: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        CMatrix::from_diagonal(&DVector::from_vec(d))
    }

    /// `diag(1, 1, 1, e^{i phi})`.
    pub fn cphase(phi: f64) -> CMatrix {
        diagonal_phases(&[0.0, 0.0, 0.0, phi])
    }

    pub fn cz() -> CMatrix {
        cphase(PI)
    }

    pub fn iswap() -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 2)] = c(0.0, 1.0);
        m[(2, 1)] = c(0.0, 1.0);
        m[(3, 3)] = c(1.0, 0.0);
        m
    }

    /// Phase `phi` on `|111>` only.
    pub fn ccphase(phi: f64) -> CMatrix {
        let mut p = [0.0; 8];
        p[7] = phi;
        diagonal_phases(&p)
    }

    /// Kronecker product, `a` on the more significant qubits.
    pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.kronecker(b)
    }

    pub fn identity(n_qubits: usize) -> CMatrix {
        let d = 1 << n_qubits;
        CMatrix::identity(d, d)
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")))
    }
}

fn angle_in_range(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 2.0 * PI + 1e-12 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("theta must lie in (0, 2pi], got {theta}")))
    }
}

/// X rotation `exp(-i theta sigma_x)`, up to a global phase.
///
/// theta = pi uses the dedicated X construction (duration pi/(2 J_X), exact
/// sigma_x); other angles run for (2 pi - theta)/J_X, with theta = 2 pi taking
/// a full period. Both sites carry energy +J_X n.
pub fn x_gate(theta: f64, j_x: f64) -> Result<GateSchedule> {
    positive("J_X", j_x)?;
    angle_in_range(theta)?;
    let (duration, label) = if (theta - PI).abs() < 1e-12 {
        (PI / (2.0 * j_x), "x".to_string())
    } else if (theta - 2.0 * PI).abs() < 1e-12 {
        (2.0 * PI / j_x, format!("rx({theta})"))
    } else {
        ((2.0 * PI - theta) / j_x, format!("rx({theta})"))
    };
    let graph = WalkGraph::new(1)
        .couple(site(0, 0), site(0, 1), j_x)
        .detune(site(0, 0), -j_x)
        .detune(site(0, 1), -j_x);
    let params = GateParams { j: j_x, mu: j_x, ..Default::default() };
    Ok(GateSchedule::new(label, 1, vec![ScheduleStep { graph, duration }])?.with_params(params))
}

/// Phase gate `diag(1, e^{i theta})`: chemical potential mu_Z on the row-1 site.
pub fn z_gate(theta: f64, mu_z: f64) -> Result<GateSchedule> {
    positive("mu_Z", mu_z)?;
    angle_in_range(theta)?;
    let graph = WalkGraph::new(1).detune(site(0, 1), mu_z);
    let label = if (theta - PI).abs() < 1e-12 { "z".to_string() } else { format!("p({theta})") };
    let params = GateParams { mu: mu_z, ..Default::default() };
    Ok(GateSchedule::new(label, 1, vec![ScheduleStep { graph, duration: theta / mu_z }])?.with_params(params))
}

fn hadamard_schedule(j_h: f64, compensation: f64) -> Result<GateSchedule> {
    positive("J_H", j_h)?;
    let graph = WalkGraph::new(1)
        .couple(site(0, 0), site(0, 1), j_h)
        .detune(site(0, 1), -2.0 * j_h)
        .detune(site(0, 0), -compensation * j_h)
        .detune(site(0, 1), -compensation * j_h);
    let duration = PI / (2.0 * SQRT_2 * j_h);
    let params = GateParams { j: j_h, mu: 2.0 * j_h, ..Default::default() };
    Ok(GateSchedule::new("h", 1, vec![ScheduleStep { graph, duration }])?.with_params(params))
}

/// Hadamard: energy 2 J_H on the row-1 site plus (sqrt2 - 1) J_H on both
/// sites, duration pi/(2 sqrt2 J_H).
pub fn hadamard_gate(j_h: f64) -> Result<GateSchedule> {
    hadamard_schedule(j_h, SQRT_2 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HadamardCompensation {
    /// Energy shift on both sites (in units of J_H) that removes the global phase.
    pub measured_ratio: f64,
    /// `measured_ratio - (sqrt2 - 1)`.
    pub residual: f64,
}

/// Measures the global phase of the uncompensated Hadamard and the
/// smallest non-negative common energy shift that cancels it.
pub fn hadamard_compensation(j_h: f64) -> Result<HadamardCompensation> {
    let bare = hadamard_schedule(j_h, 0.0)?;
    let basis = Arc::new(enumerate_basis(1, 2)?);
    let projected = basis.computational_projector().restrict(&bare.propagator(&basis)?)?;
    let phi = ideal::hadamard().ad_mul(&projected).trace().arg();
    let t = bare.duration();
    let ratio = phi.rem_euclid(2.0 * PI) / (t * j_h);
    Ok(HadamardCompensation { measured_ratio: ratio, residual: ratio - (SQRT_2 - 1.0) })
}

/// Sign of the CPhase restriction `(U - V)/J = +- sqrt(m^2 - 16)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branch {
    /// U < V (negative anharmonicity).
    #[default]
    Minus,
    Plus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }
}

fn sqrt_m2_minus_16(m: i64) -> Result<f64> {
    if m < 4 {
        return Err(Error::InvalidArgument(format!("restriction requires m >= 4 (got m = {m})")));
    }
    Ok(((m * m - 16) as f64).sqrt())
}

/// Closed-form phase on `|11>` after `T_CP = 2 pi / J`:
/// `-pi (2V/J + sigma sqrt(m^2-16) - m)` with `U = V + sigma sqrt(m^2-16) J`.
pub fn cphase_phase(m: i64, v_over_j: f64, branch: Branch) -> Result<f64> {
    let s = sqrt_m2_minus_16(m)?;
    Ok(-PI * (2.0 * v_over_j + branch.sign() * s - m as f64))
}

/// CPhase parameters with J = 1 on the minus branch.
pub fn cphase_params(m: i64, target_phase: f64) -> Result<GateParams> {
    cphase_params_with(m, target_phase, 1.0, Branch::Minus)
}

/// Chooses V from the phase condition modulo 2 pi with the smallest |V|
/// (ties round away from zero), then U from the restriction.
pub fn cphase_params_with(m: i64, target_phase: f64, j: f64, branch: Branch) -> Result<GateParams> {
    positive("J", j)?;
    let s = sqrt_m2_minus_16(m)?;
    let x0 = -branch.sign() * s + m as f64 - target_phase / PI;
    let p = (-x0 / 2.0).round();
    let v = 0.5 * (x0 + 2.0 * p) * j;
    let u = v + branch.sign() * s * j;
    Ok(GateParams { j, v, u, mu: 0.0, m, k: 0, n_int: p as i64, v2: 0.0 })
}

/// `| |U - V|/|J| - sqrt(m^2 - 16) |`.
pub fn check_cphase_restriction(params: &GateParams) -> Result<f64> {
    let s = sqrt_m2_minus_16(params.m)?;
    if params.j == 0.0 {
        return Err(Error::InvalidArgument("J must be nonzero".into()));
    }
    Ok(((params.u - params.v).abs() / params.j.abs() - s).abs())
}

pub fn cphase_duration(j: f64) -> f64 {
    2.0 * PI / j.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Connection {
    /// Coupling and ZZ on the row-1 pair.
    Transverse,
    /// Single channel (0,0)-(1,1), wrapped in X gates on qubit 0.
    Longitudinal { j_x: f64 },
}

fn cphase_graph(params: &GateParams, a: SiteIndex, b: SiteIndex) -> WalkGraph {
    WalkGraph::new(2).couple(a, b, params.j).zz(a, b, params.v).with_onsite(params.u)
}

pub fn cphase_gate(params: &GateParams, connection: Connection) -> Result<GateSchedule> {
    let residual = check_cphase_restriction(params)?;
    if residual > 1e-9 {
        return Err(Error::Constraint { what: "CPhase restriction (U - V)/J = -sqrt(m^2 - 16)".into(), residual });
    }
    let t_cp = cphase_duration(params.j);
    match connection {
        Connection::Transverse => {
            let graph = cphase_graph(params, site(0, 1), site(1, 1));
            Ok(GateSchedule::new("cphase", 2, vec![ScheduleStep { graph, duration: t_cp }])?.with_params(*params))
        }
        Connection::Longitudinal { j_x } => {
            let x = x_gate(PI, j_x)?.embed(2, &[0])?;
            let cp = GateSchedule::new(
                "cphase",
                2,
                vec![ScheduleStep { graph: cphase_graph(params, site(0, 0), site(1, 1)), duration: t_cp }],
            )?;
            let mut s = x.then(&cp)?.then(&x)?;
            s.label = "cphase_long".into();
            Ok(s.with_params(*params))
        }
    }
}

/// Closed-form eigen system of a 3x3 interaction block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpectrum {
    pub block_indices: Vec<usize>,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

/// Eigen system of `[[V, -sqrt2 J, -sqrt2 J], [-sqrt2 J, U, 0], [-sqrt2 J, 0, U]]`
/// in the ordered block `{|01;01>, |02;00>, |00;02>}`. Eigenvalues ascending:
/// `(U+V-X)/2`, `U` (dark state), `(U+V+X)/2` with `X = sqrt(16 J^2 + (U-V)^2)`.
pub fn block_spectrum_h4(j: f64, u: f64, v: f64) -> Result<BlockSpectrum> {
    if j == 0.0 {
        return Err(Error::InvalidArgument("J must be nonzero".into()));
    }
    let basis = enumerate_basis(2, 2)?;
    let block_indices = ["01;01", "02;00", "00;02"]
        .iter()
        .map(|l| basis.index_of_label(l))
        .collect::<Result<Vec<_>>>()?;
    let x = (16.0 * j * j + (u - v).powi(2)).sqrt();
    let lam2 = 0.5 * (u + v - x);
    let lam3 = 0.5 * (u + v + x);
    let bright = |lam: f64| {
        let a = (u - lam) / (SQRT_2 * j);
        let norm = (a * a + 2.0).sqrt();
        [a / norm, 1.0 / norm, 1.0 / norm]
    };
    let dark = [0.0, -1.0 / SQRT_2, 1.0 / SQRT_2];
    let cols = [bright(lam2), dark, bright(lam3)];
    let eigenvectors = CMatrix::from_fn(3, 3, |r, c| Complex64::new(cols[c][r], 0.0));
    Ok(BlockSpectrum { block_indices, eigenvalues: DVector::from_vec(vec![lam2, u, lam3]), eigenvectors })
}

/// iSWAP duration `(2k + 1) pi / (2 J)`.
pub fn iswap_duration(k: i64, j: f64) -> f64 {
    (2 * k + 1) as f64 * PI / (2.0 * j.abs())
}

/// Common energy shift on all four sites turning `i * iSWAP` into iSWAP.
pub fn iswap_compensation(k: i64, j: f64) -> f64 {
    PI / (4.0 * iswap_duration(k, j))
}

/// iSWAP parameters from the closed-form restrictions with J = 1.
pub fn iswap_params(m: i64, n_int: i64, k: i64) -> Result<GateParams> {
    iswap_params_with(m, n_int, k, 1.0)
}

/// `(U - V)/J = -4 s`, `V/J = 2 s + (2m - 1 - 4n)/(2k + 1)` with
/// `s = sqrt(m^2/(2k+1)^2 - 1)`. The result is verified by propagation.
pub fn iswap_params_with(m: i64, n_int: i64, k: i64, j: f64) -> Result<GateParams> {
    positive("J", j)?;
    if k < 0 {
        return Err(Error::InvalidArgument(format!("k must be non-negative, got {k}")));
    }
    let q = (2 * k + 1) as f64;
    let arg = (m as f64 / q).powi(2) - 1.0;
    if arg < 0.0 {
        return Err(Error::ImaginaryRoot(format!(
            "iSWAP return restriction: m^2/(2k+1)^2 - 1 = {arg:.4} < 0 for m = {m}, k = {k}"
        )));
    }
    let s = arg.sqrt();
    let v = (2.0 * s + (2 * m - 1 - 4 * n_int) as f64 / q) * j;
    let u = v - 4.0 * s * j;
    let params = GateParams { j, v, u, mu: iswap_compensation(k, j), m, k, n_int, v2: 0.0 };
    let report = iswap_gate(&params)?.report(&ideal::iswap())?;
    if 1.0 - report.fidelity > 1e-6 {
        return Err(Error::Constraint { what: "iSWAP verification".into(), residual: 1.0 - report.fidelity });
    }
    Ok(params)
}

/// Closed form first; on failure a root solve seeded at `seed = (V/J, U/J)`.
pub fn iswap_params_or_numeric(m: i64, n_int: i64, k: i64, j: f64, seed: (f64, f64)) -> Result<GateParams> {
    match iswap_params_with(m, n_int, k, j) {
        Ok(p) => Ok(p),
        Err(Error::ImaginaryRoot(_)) | Err(Error::Constraint { .. }) => solve_iswap_numeric(seed.0, seed.1, k, j),
        Err(e) => Err(e),
    }
}

fn numeric_h4_eigenvalues(j: f64, u: f64, v: f64) -> Result<[f64; 3]> {
    let s2j = Complex64::new(-SQRT_2 * j, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let h = CMatrix::from_row_slice(
        3,
        3,
        &[Complex64::new(v, 0.0), s2j, s2j, s2j, Complex64::new(u, 0.0), z, s2j, z, Complex64::new(u, 0.0)],
    );
    let cache = PropagatorCache::from_matrix(&h)?;
    let e = cache.eigenvalues();
    // The dark eigenvalue is exactly U; the bright pair brackets it.
    let mut bright: Vec<f64> = e.iter().copied().collect();
    let dark_pos = bright
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - u).abs().total_cmp(&(b.1 - u).abs()))
        .map(|(i, _)| i)
        .unwrap_or(1);
    bright.remove(dark_pos);
    Ok([bright[0], u, bright[1]])
}

/// Two-dimensional Newton solve on the return and phase conditions of the
/// `|00>`/`|11>` blocks at `T_S = (2k+1) pi/(2J)`, over `(V/J, U/J)`. The
/// integer labels are those nearest to the seed.
pub fn solve_iswap_numeric(seed_v: f64, seed_u: f64, k: i64, j: f64) -> Result<GateParams> {
    positive("J", j)?;
    let t = iswap_duration(k, j);
    let raw = |v: f64, u: f64| -> Result<(f64, f64)> {
        let e = numeric_h4_eigenvalues(j, u * j, v * j)?;
        let ret = (e[2] - e[0]) * t / (2.0 * PI);
        let phase = (-e[0] * t - PI / 2.0) / (2.0 * PI);
        Ok((ret, phase))
    };
    let (r0, p0) = raw(seed_v, seed_u)?;
    let (m_star, n_star) = (r0.round(), p0.round());
    let residual = |v: f64, u: f64| -> Result<(f64, f64)> {
        let (r, p) = raw(v, u)?;
        Ok((r - m_star, p - n_star))
    };
    let (mut v, mut u) = (seed_v, seed_u);
    for _ in 0..100 {
        let (f1, f2) = residual(v, u)?;
        if f1.abs().max(f2.abs()) < 1e-13 {
            break;
        }
        let h = 1e-7;
        let (a1, a2) = residual(v + h, u)?;
        let (b1, b2) = residual(v, u + h)?;
        let (j11, j21) = ((a1 - f1) / h, (a2 - f2) / h);
        let (j12, j22) = ((b1 - f1) / h, (b2 - f2) / h);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-14 {
            return Err(Error::NoConvergence("singular Jacobian in iSWAP solve".into()));
        }
        let dv = (j22 * f1 - j12 * f2) / det;
        let du = (-j21 * f1 + j11 * f2) / det;
        v -= dv;
        u -= du;
    }
    let (f1, f2) = residual(v, u)?;
    if f1.abs().max(f2.abs()) > 1e-9 {
        return Err(Error::NoConvergence(format!("iSWAP residuals ({f1:e}, {f2:e})")));
    }
    Ok(GateParams {
        j,
        v: v * j,
        u: u * j,
        mu: iswap_compensation(k, j),
        m: m_star as i64,
        k,
        n_int: n_star as i64,
        v2: 0.0,
    })
}

/// Couplings and ZZ on both row pairs, energy `mu` on all four sites.
pub fn iswap_gate(params: &GateParams) -> Result<GateSchedule> {
    positive("J", params.j.abs())?;
    if params.k < 0 {
        return Err(Error::InvalidArgument(format!("k must be non-negative, got {}", params.k)));
    }
    let mut graph = WalkGraph::new(2).with_onsite(params.u);
    for row in 0..2 {
        graph = graph
            .couple(site(0, row), site(1, row), params.j)
            .zz(site(0, row), site(1, row), params.v)
            .detune(site(0, row), -params.mu)
            .detune(site(1, row), -params.mu);
    }
    let duration = iswap_duration(params.k, params.j);
    Ok(GateSchedule::new("iswap", 2, vec![ScheduleStep { graph, duration }])?.with_params(*params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcphaseParams {
    pub step1: GateParams,
    pub step2: GateParams,
}

impl CcphaseParams {
    /// V2 = 0: no conditional phase beyond the pairwise CPhase.
    pub fn is_degenerate(&self) -> bool {
        self.step1.v2 == 0.0
    }
}

/// CCPhase steps with J = 1: `V2/J = sqrt(k^2 - 4)` (sign flipped in the
/// second step), `V1/J = (sqrt(m^2-16) + m + p)/2` with the integer `p`
/// giving the smallest |V1| (zero phase on `|110>`), `U = V1 - sqrt(m^2-16) J`.
pub fn ccphase_params(m: i64, k: i64) -> Result<CcphaseParams> {
    ccphase_params_with(m, k, 1.0)
}

pub fn ccphase_params_with(m: i64, k: i64, j: f64) -> Result<CcphaseParams> {
    positive("J", j)?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("CCPhase requires k >= 2 (got k = {k})")));
    }
    let s = sqrt_m2_minus_16(m)?;
    let v2 = ((k * k - 4) as f64).sqrt() * j;
    let base = s + m as f64;
    let p = (-base).round();
    let v1 = 0.5 * (base + p) * j;
    let u = v1 - s * j;
    let step1 = GateParams { j, v: v1, u, mu: 0.0, m, k, n_int: p as i64, v2 };
    let step2 = GateParams { v2: -v2, ..step1 };
    Ok(CcphaseParams { step1, step2 })
}

fn ccphase_graph(p: &GateParams) -> WalkGraph {
    WalkGraph::new(3)
        .couple(site(0, 1), site(1, 1), p.j)
        .zz(site(0, 1), site(1, 1), p.v)
        .zz(site(1, 1), site(2, 1), p.v2)
        .with_onsite(p.u)
}

/// One CCPhase step on three qubits, duration `2 pi / J`.
pub fn ccphase_step(p: &GateParams) -> Result<GateSchedule> {
    let graph = ccphase_graph(p);
    GateSchedule::new("ccphase_step", 3, vec![ScheduleStep { graph, duration: cphase_duration(p.j) }])
}

pub fn ccphase_gate(step1: &GateParams, step2: &GateParams) -> Result<GateSchedule> {
    if step1.j != step2.j || step1.u != step2.u {
        return Err(Error::InvalidArgument("CCPhase steps must share J and U".into()));
    }
    let steps = vec![
        ScheduleStep { graph: ccphase_graph(step1), duration: cphase_duration(step1.j) },
        ScheduleStep { graph: ccphase_graph(step2), duration: cphase_duration(step2.j) },
    ];
    Ok(GateSchedule::new("ccphase", 3, steps)?.with_params(*step1))
}

#[derive(Debug, Clone, Serialize)]
pub struct CcphaseScanPoint {
    pub m: i64,
    pub params: GateParams,
    /// Fidelity to `diag(1, ..., 1, e^{i phi_111})`.
    pub fidelity: f64,
    pub leakage: f64,
    pub phase_111: f64,
    pub phases: BTreeMap<String, f64>,
}

/// Full three-qubit propagation of every `m` in the range.
pub fn ccphase_scan(m_values: &[i64], k: i64, j: f64) -> Result<Vec<CcphaseScanPoint>> {
    let basis = Arc::new(enumerate_basis(3, 2)?);
    m_values
        .par_iter()
        .map(|&m| {
            let p = ccphase_params_with(m, k, j)?;
            let gate = ccphase_gate(&p.step1, &p.step2)?;
            let u = gate.propagator(&basis)?;
            let projected = basis.computational_projector().restrict(&u)?;
            let phase_111 = accumulated_phase(&projected, 7)?;
            let report = GateReport::from_unitary(&gate, &basis, &u, &ideal::ccphase(phase_111))?;
            Ok(CcphaseScanPoint {
                m,
                params: p.step1,
                fidelity: report.fidelity,
                leakage: report.leakage,
                phase_111,
                phases: report.phases,
            })
        })
        .collect()
}

/// Scan point with the largest |phase on `|111>`| among those with
/// fidelity at least `min_fidelity`.
pub fn extremal_ccphase(points: &[CcphaseScanPoint], min_fidelity: f64) -> Option<&CcphaseScanPoint> {
    points
        .iter()
        .filter(|p| p.fidelity >= min_fidelity)
        .max_by(|a, b| a.phase_111.abs().total_cmp(&b.phase_111.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::phase_difference;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() < tol)
    }

    fn projected(s: &GateSchedule) -> CMatrix {
        let basis = Arc::new(enumerate_basis(s.n_logical(), 2).unwrap());
        basis.computational_projector().restrict(&s.propagator(&basis).unwrap()).unwrap()
    }

    // exp(-i H t) for a 2x2 Hermitian H via the Pauli decomposition.
    fn expm2(h: [[f64; 2]; 2], t: f64) -> CMatrix {
        let a0 = 0.5 * (h[0][0] + h[1][1]);
        let az = 0.5 * (h[0][0] - h[1][1]);
        let ax = h[0][1];
        let w = (ax * ax + az * az).sqrt();
        let (s, c) = (w * t).sin_cos();
        let g = Complex64::from_polar(1.0, -a0 * t);
        let f = if w == 0.0 { 0.0 } else { s / w };
        let i = Complex64::new(0.0, 1.0);
        CMatrix::from_row_slice(
            2,
            2,
            &[(c - i * f * az) * g, -i * f * ax * g, -i * f * ax * g, (c + i * f * az) * g],
        )
    }

    #[test]
    fn x_gate_is_sigma_x() {
        let s = x_gate(PI, 1.0).unwrap();
        assert!((s.duration() - PI / 2.0).abs() < 1e-15);
        assert!(close(&projected(&s), &ideal::pauli_x(), 1e-9));
        assert!(x_gate(PI, 0.0).is_err());
    }

    #[test]
    fn rx_matches_two_by_two_oracle() {
        let theta = PI / 2.0;
        let s = x_gate(theta, 1.0).unwrap();
        let oracle = expm2([[1.0, -1.0], [-1.0, 1.0]], (2.0 * PI - theta) / 1.0);
        assert!(close(&projected(&s), &oracle, 1e-12));
        let r = s.report(&ideal::rx(theta)).unwrap();
        assert!(1.0 - r.fidelity < 1e-12);
        let full = x_gate(2.0 * PI, 1.0).unwrap().report(&ideal::identity(1)).unwrap();
        assert!(1.0 - full.fidelity < 1e-12);
    }

    #[test]
    fn z_gate_phases() {
        assert!(close(&projected(&z_gate(PI, 1.0).unwrap()), &ideal::phase(PI), 1e-9));
        let s = z_gate(PI / 3.0, 2.0).unwrap();
        assert!((s.duration() - PI / 6.0).abs() < 1e-15);
        let r = s.report(&ideal::phase(PI / 3.0)).unwrap();
        assert!((r.phase("1").unwrap() - PI / 3.0).abs() < 1e-9);
        assert!(close(&projected(&z_gate(2.0 * PI, 1.0).unwrap()), &ideal::identity(1), 1e-9));
        assert!(z_gate(PI, -1.0).is_err());
    }

    #[test]
    fn hadamard_exact_including_global_phase() {
        let s = hadamard_gate(1.0).unwrap();
        assert!((s.duration() - 1.1107207345395915).abs() < 1e-12);
        let p = projected(&s);
        assert!(close(&p, &ideal::hadamard(), 1e-8));
        assert!((p[(0, 0)].norm() - 1.0 / SQRT_2).abs() < 1e-12);
        // det H = -1, so the determinant phase is pi.
        assert!((p.determinant() + Complex64::new(1.0, 0.0)).norm() < 1e-8);
        let twice = s.then(&s).unwrap();
        assert!(close(&projected(&twice), &ideal::identity(1), 1e-8));
        let comp = hadamard_compensation(1.0).unwrap();
        assert!(comp.residual.abs() < 1e-12, "{comp:?}");
    }

    #[test]
    fn cz_parameters() {
        let p = cphase_params(8, -PI).unwrap();
        let s3 = 3f64.sqrt();
        assert!((p.v - (-3.5 + 2.0 * s3)).abs() < 1e-12);
        assert!((p.u + 3.5 + 2.0 * s3).abs() < 1e-12);
        assert!(check_cphase_restriction(&p).unwrap() < 1e-12);
        assert!(cphase_params(3, -PI).is_err());
        let p4 = cphase_params(4, 0.3).unwrap();
        assert_eq!(p4.u, p4.v);
    }

    #[test]
    fn cz_gate_report() {
        let p = cphase_params(8, -PI).unwrap();
        let r = cphase_gate(&p, Connection::Transverse).unwrap().report(&ideal::cz()).unwrap();
        assert!(1.0 - r.fidelity < 1e-8);
        assert!(r.leakage.abs() < 1e-8);
        assert!(phase_difference(r.phase("11").unwrap(), -PI).abs() < 1e-6);
        for b in ["00", "01", "10"] {
            assert!(r.phase(b).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn m5_tie_is_simulated() {
        let p = cphase_params(5, -PI).unwrap();
        assert_eq!(p.v, -0.5);
        let r = cphase_gate(&p, Connection::Transverse).unwrap().report(&ideal::cz()).unwrap();
        assert!(phase_difference(r.phase("11").unwrap(), -PI).abs() < 1e-8);
    }

    #[test]
    fn plus_branch() {
        let p = cphase_params_with(6, -PI / 2.0, 1.0, Branch::Plus).unwrap();
        assert!(p.u > p.v);
        let r = cphase_gate(&p, Connection::Transverse).unwrap().report(&ideal::cphase(-PI / 2.0)).unwrap();
        assert!(1.0 - r.fidelity < 1e-8);
    }

    #[test]
    fn restriction_violations_are_rejected() {
        let mut p = cphase_params(8, -PI).unwrap();
        p.u += 1e-3;
        match cphase_gate(&p, Connection::Transverse) {
            Err(Error::Constraint { residual, .. }) => assert!((residual - 1e-3).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_control_without_interaction() {
        let p = GateParams { j: 1.0, m: 4, ..Default::default() };
        let r = cphase_gate(&p, Connection::Transverse).unwrap().report(&ideal::cz()).unwrap();
        assert!(r.fidelity < 0.5);
    }

    #[test]
    fn longitudinal_cphase() {
        let p = cphase_params(8, -PI).unwrap();
        let s = cphase_gate(&p, Connection::Longitudinal { j_x: 1.0 }).unwrap();
        assert!((s.duration() - PI * 3.0).abs() < 1e-12);
        assert_eq!(s.steps().len(), 3);
        assert!(close(&projected(&s), &ideal::cz(), 1e-7));
    }

    #[test]
    fn h4_closed_form() {
        let p = cphase_params(8, -PI).unwrap();
        let b = block_spectrum_h4(p.j, p.u, p.v).unwrap();
        let t = cphase_duration(p.j);
        assert!(((b.eigenvalues[2] - b.eigenvalues[0]) * t - 16.0 * PI).abs() < 1e-12);
        let tiny = block_spectrum_h4(1e-9, -3.0, 0.2).unwrap();
        assert!((tiny.eigenvalues[0] + 3.0).abs() < 1e-8);
        assert!((tiny.eigenvalues[2] - 0.2).abs() < 1e-8);
        let b = block_spectrum_h4(1.0, -3.0, 0.2).unwrap();
        let v = &b.eigenvectors;
        assert!(close(&v.ad_mul(v), &CMatrix::identity(3, 3), 1e-12));
        assert!(v[(0, 1)].norm() == 0.0);
        assert!(block_spectrum_h4(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn iswap_closed_form_and_numeric_agree() {
        let closed = iswap_params(7, 5, 2).unwrap();
        let numeric = solve_iswap_numeric(0.1, -3.4, 2, 1.0).unwrap();
        assert_eq!((numeric.m, numeric.n_int), (7, 5));
        assert!((closed.v - numeric.v).abs() < 1e-9);
        assert!((closed.u - numeric.u).abs() < 1e-9);
        assert!((closed.mu - 0.1).abs() < 1e-15);
        assert!(matches!(iswap_params(4, 3, 2), Err(Error::ImaginaryRoot(_))));
        let fallback = iswap_params_or_numeric(4, 3, 2, 1.0, (0.1, -3.4)).unwrap();
        assert!((fallback.v - closed.v).abs() < 1e-9);
    }

    #[test]
    fn iswap_gate_matrix() {
        let p = iswap_params(7, 5, 2).unwrap();
        let s = iswap_gate(&p).unwrap();
        assert!((s.duration() - 2.5 * PI).abs() < 1e-12);
        let pm = projected(&s);
        assert!(close(&pm, &ideal::iswap(), 1e-6));
        let norm: f64 = pm.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 4.0).abs() < 1e-6);
    }

    #[test]
    fn ccphase_parameters() {
        let p = ccphase_params(14, 4).unwrap();
        assert!((p.step1.v2 - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(p.step2.v2, -p.step1.v2);
        assert!((p.step1.v - 0.2082).abs() < 1e-3);
        assert!(!p.is_degenerate());
        assert!(ccphase_params(14, 2).unwrap().is_degenerate());
        assert!(ccphase_params(14, 1).is_err());
        assert!(ccphase_params(3, 4).is_err());
    }

    #[test]
    fn ccphase_cancels_101_phase() {
        let basis = Arc::new(enumerate_basis(3, 2).unwrap());
        let i101 = crate::fock::computational_index(&[1, 0, 1], &basis).unwrap();
        for k in 3..=5 {
            let p = ccphase_params(14, k).unwrap();
            let u1 = ccphase_step(&p.step1).unwrap().propagator(&basis).unwrap();
            let u2 = ccphase_step(&p.step2).unwrap().propagator(&basis).unwrap();
            let sum = accumulated_phase(&u1, i101).unwrap() + accumulated_phase(&u2, i101).unwrap();
            assert!(phase_difference(sum, 0.0).abs() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn ccphase_without_v2_is_pairwise() {
        let mut p = ccphase_params(14, 4).unwrap();
        p.step1.v2 = 0.0;
        p.step2.v2 = 0.0;
        let gate = ccphase_gate(&p.step1, &p.step2).unwrap();
        let pair = cphase_gate(
            &GateParams { j: 1.0, v: p.step1.v, u: p.step1.u, m: 14, ..Default::default() },
            Connection::Transverse,
        )
        .unwrap();
        let pair_p = projected(&pair.then(&pair).unwrap());
        let r = gate.report(&ideal::identity(3)).unwrap();
        // Qubit 2 is a spectator: every phase equals that of the first two bits.
        for (bits, phi) in &r.phases {
            let word = usize::from_str_radix(&bits[..2], 2).unwrap();
            let expect = pair_p[(word, word)].arg();
            assert!(phase_difference(*phi, expect).abs() < 1e-8, "{bits}");
        }
    }

    #[test]
    fn ccphase_paper_point() {
        let scan = ccphase_scan(&[14], 4, 1.0).unwrap();
        assert!(scan[0].fidelity >= 0.99);
        assert!((scan[0].phase_111 / PI + 0.0864).abs() < 1e-3);
    }

    #[test]
    fn evolution_samples_end_at_propagator() {
        let p = cphase_params(8, -PI).unwrap();
        let s = cphase_gate(&p, Connection::Longitudinal { j_x: 1.0 }).unwrap();
        let basis = Arc::new(enumerate_basis(2, 2).unwrap());
        let psi0 = crate::propagate::StateVector::computational(Arc::clone(&basis), &[1, 1]).unwrap();
        let samples = s.sample_evolution(&basis, psi0.amplitudes(), 37).unwrap();
        assert_eq!(samples.len(), 38);
        let u = s.propagator(&basis).unwrap();
        let last = &samples.last().unwrap().1;
        assert!((last - &u * psi0.amplitudes()).norm() < 1e-10);
    }
}
