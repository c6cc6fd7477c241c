//! Noise studies: Lindblad population dynamics, (J, V) miscalibration
//! sweeps and the detuned-CZ perturbation analysis.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{computational_index, FockBasis, FockState};
use crate::gates::{block_spectrum_h4, cphase_duration, cphase_params, cphase_phase, ideal, Branch, GateParams, GateSchedule};
use crate::metrics::fidelity_projected;
use crate::propagate::{evolve_lindblad_with, DensityMatrix, JumpOperator, LindbladOperatorSet, LindbladOptions, StateVector};
use crate::walkgraph::{build_hamiltonian, WalkGraph};
use crate::{CMatrix, Complex64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DephasingScope {
    /// One projector per logical basis state.
    #[default]
    LogicalStates,
    /// One projector per Fock state of the n-walker sector.
    AllFockStates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub relaxation: f64,
    #[serde(default)]
    pub dephasing_scope: DephasingScope,
}

impl NoiseSpec {
    pub fn new(gamma: f64, relaxation: f64, dephasing_scope: DephasingScope) -> Result<Self> {
        for (name, r) in [("gamma", gamma), ("Gamma", relaxation)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative, got {r}")));
            }
        }
        Ok(Self { gamma, relaxation, dephasing_scope })
    }

    /// gamma = Gamma = J/5000.
    pub fn reference(j: f64, dephasing_scope: DephasingScope) -> Self {
        Self { gamma: j / 5000.0, relaxation: j / 5000.0, dephasing_scope }
    }
}

/// T1 in microseconds for relaxation rate `Gamma = ratio * J` at coupling `J / 2pi = j_mhz` MHz.
pub fn t1_microseconds(ratio: f64, j_mhz: f64) -> f64 {
    1.0 / (ratio * 2.0 * PI * j_mhz)
}

/// Dephasing projectors `sqrt(gamma) |k><k|` and one ladder operator
/// `sqrt(Gamma) (|0><1| + |1><2|)` per site with unit weights.
pub fn lindblad_operators(spec: &NoiseSpec, basis: &FockBasis) -> Result<LindbladOperatorSet> {
    let mut set = LindbladOperatorSet::new(basis.len());
    if spec.gamma > 0.0 {
        let amp = Complex64::new(spec.gamma.sqrt(), 0.0);
        let scope: Vec<usize> = match spec.dephasing_scope {
            DephasingScope::LogicalStates => basis.computational_indices().to_vec(),
            DephasingScope::AllFockStates => (0..basis.len())
                .filter(|&i| basis.state(i).total() == basis.n_logical())
                .collect(),
        };
        for k in scope {
            set.push(JumpOperator { label: format!("dephase {}", basis.state(k)), entries: vec![(k, k, amp)] })?;
        }
    }
    if spec.relaxation > 0.0 {
        let amp = Complex64::new(spec.relaxation.sqrt(), 0.0);
        for site in 0..basis.n_sites() {
            let mut entries = Vec::new();
            for (col, state) in basis.states().iter().enumerate() {
                if state.occupation(site) == 0 {
                    continue;
                }
                let mut occ = state.occupations().to_vec();
                occ[site] -= 1;
                let row = basis.index_of(&FockState::new(occ)).ok_or_else(|| {
                    Error::InvalidArgument("relaxation needs a basis that includes the lower sectors".into())
                })?;
                entries.push((row, col, amp));
            }
            set.push(JumpOperator { label: format!("relax site {site}"), entries })?;
        }
    }
    Ok(set)
}

/// Population time series of a noisy repeated gate.
#[derive(Debug, Clone)]
pub struct NoiseStudy {
    pub basis: Arc<FockBasis>,
    pub period: f64,
    pub repetitions: usize,
    pub times: Vec<f64>,
    /// `populations[t][state]`.
    pub populations: Vec<Vec<f64>>,
    pub max_trace_drift: f64,
    pub final_state: DensityMatrix,
}

impl NoiseStudy {
    pub fn labels(&self) -> Vec<String> {
        self.basis.labels()
    }

    pub fn series(&self, label: &str) -> Result<Vec<f64>> {
        let i = self.basis.index_of_label(label)?;
        Ok(self.populations.iter().map(|p| p[i]).collect())
    }

    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_population(&self, label: &str) -> Result<f64> {
        Ok(self.final_populations()[self.basis.index_of_label(label)?])
    }

    /// Trapezoidal time average of the summed populations over repetition `rep`.
    pub fn period_average(&self, labels: &[&str], rep: usize) -> Result<f64> {
        if rep >= self.repetitions {
            return Err(Error::InvalidArgument(format!("repetition {rep} out of range")));
        }
        let idx = labels.iter().map(|l| self.basis.index_of_label(l)).collect::<Result<Vec<_>>>()?;
        let (t0, t1) = (rep as f64 * self.period, (rep + 1) as f64 * self.period);
        let tol = 1e-9 * self.period;
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.populations)
            .filter(|(t, _)| **t >= t0 - tol && **t <= t1 + tol)
            .map(|(t, p)| (*t, idx.iter().map(|&i| p[i]).sum()))
            .collect();
        let area: f64 = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
        Ok(area / (t1 - t0))
    }

    /// Largest final populations other than `exclude`, descending.
    pub fn top_contributors(&self, count: usize, exclude: &[usize]) -> Vec<(String, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .final_populations()
            .iter()
            .copied()
            .enumerate()
            .filter(|(i, _)| !exclude.contains(i))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.into_iter().take(count).map(|(i, p)| (self.basis.state(i).label(), p)).collect()
    }

    /// Final population in each walker-number sector, highest first.
    pub fn sector_populations(&self) -> Vec<(usize, f64)> {
        let n = self.basis.n_logical();
        (self.basis.min_total()..=n)
            .rev()
            .map(|tot| {
                let p = self
                    .final_populations()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| self.basis.state(*i).total() == tot)
                    .map(|(_, p)| p)
                    .sum();
                (tot, p)
            })
            .collect()
    }
}

pub fn run_noise_study(
    gate: &GateSchedule,
    spec: &NoiseSpec,
    initial_bits: &[u8],
    repetitions: usize,
) -> Result<NoiseStudy> {
    run_noise_study_with(gate, spec, initial_bits, repetitions, 200)
}

/// Evolves the repeated schedule from `|bits>_L` on the sectors `0..=n`.
/// Each repetition is sampled at `samples_per_rep` uniform intervals
/// (shared among steps in proportion to their duration).
pub fn run_noise_study_with(
    gate: &GateSchedule,
    spec: &NoiseSpec,
    initial_bits: &[u8],
    repetitions: usize,
    samples_per_rep: usize,
) -> Result<NoiseStudy> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    if gate.steps().is_empty() {
        return Err(Error::InvalidArgument("schedule has no steps".into()));
    }
    let basis = Arc::new(FockBasis::with_lower_sectors(gate.n_logical())?);
    let ops = lindblad_operators(spec, &basis)?;
    let hams = gate
        .steps()
        .iter()
        .map(|s| build_hamiltonian(&s.graph, &basis))
        .collect::<Result<Vec<_>>>()?;
    let period = gate.duration();
    let psi0 = StateVector::computational(Arc::clone(&basis), initial_bits)?;
    let mut rho = DensityMatrix::pure(&psi0);

    let mut times = vec![0.0];
    let mut populations = vec![rho.populations()];
    let mut max_trace_drift = 0.0f64;
    let mut t_offset = 0.0;
    for rep in 0..repetitions {
        for (h, step) in hams.iter().zip(gate.steps()) {
            let samples = ((samples_per_rep as f64 * step.duration / period).round() as usize).max(1);
            let opts = LindbladOptions { samples, ..LindbladOptions::default() };
            let out = evolve_lindblad_with(h, &ops, &rho, step.duration, step.duration / samples as f64, opts)?;
            for (t, r) in out.iter().skip(1) {
                times.push(t_offset + t);
                populations.push(r.populations());
                max_trace_drift = max_trace_drift.max((r.trace() - 1.0).abs());
            }
            t_offset += step.duration;
            rho = out.into_iter().last().map(|(_, r)| r).expect("non-empty output");
        }
        // Pin sample times at period boundaries exactly.
        if let Some(t) = times.last_mut() {
            *t = (rep + 1) as f64 * period;
        }
    }
    Ok(NoiseStudy { basis, period, repetitions, times, populations, max_trace_drift, final_state: rho })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub dj: Vec<f64>,
    pub dv: Vec<f64>,
    /// `fidelity[i][j]` at `(dj[i], dv[j])`.
    pub fidelity: Vec<Vec<f64>>,
    pub leakage: Vec<Vec<f64>>,
}

fn deviated_cphase(base: &GateParams, dj: f64, dv: f64) -> Result<crate::metrics::FidelityResult> {
    let basis = Arc::new(crate::fock::enumerate_basis(2, 2)?);
    deviated_cphase_in(&basis, base, dj, dv)
}

fn deviated_cphase_in(
    basis: &Arc<FockBasis>,
    base: &GateParams,
    dj: f64,
    dv: f64,
) -> Result<crate::metrics::FidelityResult> {
    let phi = cphase_phase(base.m, base.v / base.j, if base.u <= base.v { Branch::Minus } else { Branch::Plus })?;
    let graph = WalkGraph::new(2)
        .couple(crate::fock::SiteIndex::new(0, 1), crate::fock::SiteIndex::new(1, 1), base.j + dj)
        .zz(crate::fock::SiteIndex::new(0, 1), crate::fock::SiteIndex::new(1, 1), base.v + dv)
        .with_onsite(base.u);
    let h = build_hamiltonian(&graph, basis)?;
    let u = crate::propagate::propagator(&h, cphase_duration(base.j))?;
    let projected = basis.computational_projector().restrict(&u)?;
    Ok(fidelity_projected(&projected, &ideal::cphase(phi)))
}

/// Fidelity and leakage of the CPhase gate with `J + dj`, `V + dv` at the
/// nominal duration and U.
pub fn sweep_deviations(base: &GateParams, dj_grid: &[f64], dv_grid: &[f64]) -> Result<SweepResult> {
    if dj_grid.is_empty() || dv_grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be non-empty".into()));
    }
    let basis = Arc::new(crate::fock::enumerate_basis(2, 2)?);
    let rows = dj_grid
        .par_iter()
        .map(|&dj| {
            dv_grid
                .iter()
                .map(|&dv| deviated_cphase_in(&basis, base, dj, dv).map(|r| (r.fidelity, r.leakage)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        dj: dj_grid.to_vec(),
        dv: dv_grid.to_vec(),
        fidelity: rows.iter().map(|r| r.iter().map(|x| x.0).collect()).collect(),
        leakage: rows.iter().map(|r| r.iter().map(|x| x.1).collect()).collect(),
    })
}

/// Central second differences of `1 - F` along dJ and dV at the origin.
pub fn deviation_curvature(base: &GateParams, h: f64) -> Result<(f64, f64)> {
    let inf = |dj: f64, dv: f64| deviated_cphase(base, dj, dv).map(|r| 1.0 - r.fidelity);
    let f0 = inf(0.0, 0.0)?;
    let d2j = (inf(h, 0.0)? - 2.0 * f0 + inf(-h, 0.0)?) / (h * h);
    let d2v = (inf(0.0, h)? - 2.0 * f0 + inf(0.0, -h)?) / (h * h);
    Ok((d2j, d2v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningSpec {
    pub delta: f64,
    pub delta_ratio: f64,
}

impl DetuningSpec {
    pub fn from_ratio(delta_ratio: f64, j: f64) -> Self {
        Self { delta: delta_ratio * j, delta_ratio }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetuningRow {
    pub delta: f64,
    pub f_exact: f64,
    pub f_perturb: f64,
    pub l_exact: f64,
    pub l_perturb: f64,
    /// Closed forms `1 + cos(4 sqrt3 pi) d^2/10 - 2 pi^2 d^2/5` and `-cos(4 sqrt3 pi) d^2/16`.
    pub f_closed_form: f64,
    pub l_closed_form: f64,
}

/// 21 log-spaced ratios in [1e-4, 1e-1] plus 0.0025.
pub fn default_detuning_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..21).map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / 20.0)).collect();
    g.push(0.0025);
    g.sort_by(f64::total_cmp);
    g
}

fn cz_params() -> GateParams {
    cphase_params(8, -PI).expect("m = 8 is valid")
}

/// Diagonal `(c1, c2, c3, c4)` of the projected CZ propagator with energy
/// `delta * J` on site (1,1), J = 1.
pub fn detuned_coefficients(delta: f64) -> Result<[Complex64; 4]> {
    let p = cz_params();
    let basis = Arc::new(crate::fock::enumerate_basis(2, 2)?);
    let graph = WalkGraph::new(2)
        .couple(crate::fock::SiteIndex::new(0, 1), crate::fock::SiteIndex::new(1, 1), p.j)
        .zz(crate::fock::SiteIndex::new(0, 1), crate::fock::SiteIndex::new(1, 1), p.v)
        .detune(crate::fock::SiteIndex::new(1, 1), -delta * p.j)
        .with_onsite(p.u);
    let u = crate::propagate::propagator(&build_hamiltonian(&graph, &basis)?, cphase_duration(p.j))?;
    let m = basis.computational_projector().restrict(&u)?;
    Ok([m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(3, 3)]])
}

fn exact_row(delta: f64) -> Result<(f64, f64)> {
    let p = cz_params();
    let basis = Arc::new(crate::fock::enumerate_basis(2, 2)?);
    let graph = WalkGraph::new(2)
        .couple(crate::fock::SiteIndex::new(0, 1), crate::fock::SiteIndex::new(1, 1), p.j)
        .zz(crate::fock::SiteIndex::new(0, 1), crate::fock::SiteIndex::new(1, 1), p.v)
        .detune(crate::fock::SiteIndex::new(1, 1), -delta * p.j)
        .with_onsite(p.u);
    let u = crate::propagate::propagator(&build_hamiltonian(&graph, &basis)?, cphase_duration(p.j))?;
    let r = fidelity_projected(&basis.computational_projector().restrict(&u)?, &ideal::cz());
    debug_assert_eq!(computational_index(&[1, 1], &basis)?, basis.computational_indices()[3]);
    Ok((r.fidelity, r.leakage))
}

/// Second-order Rayleigh-Schroedinger amplitude of `|11>` after `T_CP` for
/// the block `J (H0 + delta D)`, `D = diag(1, 0, 2)`.
pub fn perturbative_c4(delta: f64) -> Result<Complex64> {
    let p = cz_params();
    let spec = block_spectrum_h4(1.0, p.u / p.j, p.v / p.j)?;
    let phi = spec.eigenvectors.map(|z| z.re);
    let e0 = &spec.eigenvalues;
    let d = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 0.0, 2.0));
    let phi3 = nalgebra::Matrix3::from_fn(|r, c| phi[(r, c)]);
    let w = phi3.transpose() * d * phi3 * delta;
    let psi0 = phi3.transpose() * nalgebra::Vector3::new(1.0, 0.0, 0.0);
    let t = cphase_duration(1.0);
    let mut c4 = Complex64::new(0.0, 0.0);
    for n in 0..3 {
        let mut energy = e0[n] + w[(n, n)];
        let mut vec = nalgebra::Vector3::zeros();
        vec[n] = 1.0;
        for k in (0..3).filter(|&k| k != n) {
            let gap = e0[n] - e0[k];
            energy += w[(k, n)].powi(2) / gap;
            vec[k] += w[(k, n)] / gap;
            let mut second = -w[(n, n)] * w[(k, n)] / (gap * gap);
            for l in (0..3).filter(|&l| l != n) {
                second += w[(k, l)] * w[(l, n)] / (gap * (e0[n] - e0[l]));
            }
            vec[k] += second;
            vec[n] -= 0.5 * w[(k, n)].powi(2) / (gap * gap);
        }
        let beta = vec.dot(&psi0);
        c4 += Complex64::from_polar(beta * beta, -energy * t);
    }
    Ok(c4)
}

/// Exact and second-order fidelity/leakage of the detuned CZ, J = 1.
pub fn detuning_analysis(delta_ratios: &[f64]) -> Result<Vec<DetuningRow>> {
    let cos_term = (4.0 * 3f64.sqrt() * PI).cos();
    delta_ratios
        .par_iter()
        .map(|&delta| {
            let (f_exact, l_exact) = exact_row(delta)?;
            let c23 = Complex64::from_polar(1.0, -PI * delta);
            let c4 = perturbative_c4(delta)?;
            let one = Complex64::new(1.0, 0.0);
            let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![one, c23, c23, c4]));
            let pert = fidelity_projected(&m, &ideal::cz());
            let d2 = delta * delta;
            Ok(DetuningRow {
                delta,
                f_exact,
                f_perturb: pert.fidelity,
                l_exact,
                l_perturb: pert.leakage,
                f_closed_form: 1.0 + cos_term * d2 / 10.0 - 2.0 * PI * PI * d2 / 5.0,
                l_closed_form: -cos_term * d2 / 16.0,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{cphase_gate, Connection};

    #[test]
    fn operator_counts() {
        let basis = FockBasis::with_lower_sectors(2).unwrap();
        let none = lindblad_operators(&NoiseSpec::new(0.0, 0.0, DephasingScope::LogicalStates).unwrap(), &basis).unwrap();
        assert!(none.is_empty());
        let relax = lindblad_operators(&NoiseSpec::new(0.0, 1e-3, DephasingScope::LogicalStates).unwrap(), &basis).unwrap();
        assert_eq!(relax.len(), 4);
        let vacuum = basis.index_of_label("00;00").unwrap();
        for op in relax.operators() {
            assert!(op.entries.iter().all(|&(_, c, _)| c != vacuum));
            assert!(op.entries.iter().all(|&(_, _, v)| (v.re - 1e-3f64.sqrt()).abs() < 1e-15));
        }
        let all = lindblad_operators(&NoiseSpec::new(1e-3, 0.0, DephasingScope::AllFockStates).unwrap(), &basis).unwrap();
        assert_eq!(all.len(), 10);
        let logical = lindblad_operators(&NoiseSpec::new(1e-3, 0.0, DephasingScope::LogicalStates).unwrap(), &basis).unwrap();
        assert_eq!(logical.len(), 4);
        assert!(NoiseSpec::new(-1.0, 0.0, DephasingScope::LogicalStates).is_err());
        let fixed = crate::fock::enumerate_basis(2, 2).unwrap();
        assert!(lindblad_operators(&NoiseSpec::new(0.0, 1e-3, DephasingScope::LogicalStates).unwrap(), &fixed).is_err());
    }

    #[test]
    fn reference_relaxation_time() {
        // Angular J: T1 = 5000 / (2 pi 50 MHz). Dropping the 2 pi would give 100 us.
        assert!((t1_microseconds(1.0 / 5000.0, 50.0) - 15.915).abs() < 1e-3);
        assert!((t1_microseconds(1.0 / 5000.0, 50.0) * 2.0 * PI - 100.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_study_returns_every_period() {
        let gate = cphase_gate(&cz_params(), Connection::Transverse).unwrap();
        let spec = NoiseSpec::new(0.0, 0.0, DephasingScope::LogicalStates).unwrap();
        let study = run_noise_study_with(&gate, &spec, &[1, 1], 3, 60).unwrap();
        let series = study.series("01;01").unwrap();
        for rep in 1..=3 {
            let i = study.times.iter().position(|t| (t - rep as f64 * study.period).abs() < 1e-12).unwrap();
            assert!((series[i] - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn sweep_peaks_at_nominal_point() {
        let grid = [-0.02, 0.0, 0.02];
        let r = sweep_deviations(&cz_params(), &grid, &grid).unwrap();
        assert!(1.0 - r.fidelity[1][1] < 1e-8);
        for row in &r.fidelity {
            for &f in row {
                assert!(f <= r.fidelity[1][1] + 1e-12);
            }
        }
        let (d2j, d2v) = deviation_curvature(&cz_params(), 1e-3).unwrap();
        assert!(d2j.abs() > d2v.abs());
        let one_percent = sweep_deviations(&cz_params(), &[0.01], &[0.0]).unwrap();
        assert!(1.0 - one_percent.fidelity[0][0] < 1e-2);
    }

    #[test]
    fn detuned_single_walker_blocks() {
        for &d in &[1e-3, 0.01, 0.05, 0.1, -0.07] {
            let c = detuned_coefficients(d).unwrap();
            let approx = Complex64::from_polar(1.0, -PI * d);
            assert!((c[1] - approx).norm() <= 2.0 * d * d, "delta={d}");
            assert!((c[2] - approx).norm() <= 2.0 * d * d, "delta={d}");
        }
    }

    #[test]
    fn zero_detuning_is_perfect() {
        let r = detuning_analysis(&[0.0]).unwrap()[0];
        assert!((r.f_exact - 1.0).abs() < 1e-12);
        assert!(r.l_exact.abs() < 1e-12);
        assert!((r.f_perturb - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_is_third_order() {
        let deltas = [2e-3, 4e-3, 8e-3, 1.6e-2, 3.2e-2];
        let rows = detuning_analysis(&deltas).unwrap();
        let res: Vec<f64> = rows.iter().map(|r| (r.f_exact - r.f_perturb).abs()).collect();
        assert!(loglog_slope(&deltas, &res) > 2.8, "{res:?}");
    }

    #[test]
    fn default_grid_contains_reference_point() {
        let g = default_detuning_grid();
        assert_eq!(g.len(), 22);
        assert!(g.contains(&0.0025));
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[21] - 0.1).abs() < 1e-15);
    }
}
