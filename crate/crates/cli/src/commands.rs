use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use dualrail_core::circuitparams::{effective_params, exact_effective_v, exact_zz, CircuitParams};
use dualrail_core::circuits::{compose, ghz_circuit, ghz_fidelity, logical_output, reduced_purity, CircuitFile};
use dualrail_core::fock::{bits_label, computational_index, parse_bits, word_to_bits};
use dualrail_core::gates::{cphase_params, ideal, iswap_gate, solve_iswap_numeric};
use dualrail_core::metrics::accumulated_phase;
use dualrail_core::noisesim::{
    default_detuning_grid, deviation_curvature, detuning_analysis, loglog_slope, run_noise_study_with, sweep_deviations,
    DephasingScope, NoiseSpec, NoiseStudy,
};
use dualrail_core::{build_hamiltonian, enumerate_basis, CMatrix, FockBasis, GateReport, GateSchedule, WalkGraph};
use serde_json::json;

use crate::output::RunDir;

/// Gate parameters shared by `gate` and `noise`. Only the ones a gate
/// understands may be given.
#[derive(Args, Debug, Clone)]
pub struct GateFlags {
    /// Gate name: h, x, rx, z, p, cz, cphase, cz_long, iswap, ccphase.
    pub name: String,
    #[arg(long)]
    pub m: Option<i64>,
    #[arg(long)]
    pub k: Option<i64>,
    /// Integer n of the iSWAP phase condition.
    #[arg(long)]
    pub nint: Option<i64>,
    /// CPhase target phase in radians.
    #[arg(long, allow_hyphen_values = true)]
    pub target_phase: Option<f64>,
    /// Coupling strength J.
    #[arg(long)]
    pub j: Option<f64>,
    /// X-gate coupling of the longitudinal CPhase.
    #[arg(long)]
    pub jx: Option<f64>,
    /// Rotation angle for rx and p.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Chemical potential for z and p.
    #[arg(long)]
    pub mu: Option<f64>,
    /// iSWAP only: solve (V, U) numerically from the seed (0.1, -3.4) J.
    #[arg(long)]
    pub solve: bool,
}

impl GateFlags {
    fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        let ints = [("m", self.m), ("k", self.k), ("n", self.nint)];
        for (key, v) in ints {
            if let Some(v) = v {
                p.insert(key.to_string(), v as f64);
            }
        }
        let floats = [("phi", self.target_phase), ("J", self.j), ("Jx", self.jx), ("theta", self.theta), ("mu", self.mu)];
        for (key, v) in floats {
            if let Some(v) = v {
                p.insert(key.to_string(), v);
            }
        }
        p
    }

    fn schedule(&self) -> Result<GateSchedule> {
        if self.solve {
            ensure!(self.name == "iswap", "--solve applies to iswap only");
            let p = solve_iswap_numeric(0.1, -3.4, self.k.unwrap_or(2), self.j.unwrap_or(1.0))?;
            return Ok(iswap_gate(&p)?);
        }
        Ok(dualrail_core::circuits::gate_from_name(&self.name, &self.params())?)
    }

    /// Target unitary; the CCPhase target uses the simulated |111> phase.
    fn ideal(&self, projected: &CMatrix) -> Result<CMatrix> {
        let phi = self.target_phase.unwrap_or(-PI);
        Ok(match self.name.as_str() {
            "h" => ideal::hadamard(),
            "x" => ideal::pauli_x(),
            "rx" => ideal::rx(self.theta.unwrap_or(PI)),
            "z" => ideal::phase(PI),
            "p" => ideal::phase(self.theta.unwrap_or(PI)),
            "cz" | "cphase" | "cz_long" => ideal::cphase(phi),
            "iswap" => ideal::iswap(),
            "ccphase" => ideal::ccphase(accumulated_phase(projected, 7)?),
            other => bail!("unknown gate '{other}'"),
        })
    }
}

#[derive(Args, Debug)]
pub struct GateArgs {
    #[command(flatten)]
    pub gate: GateFlags,
    /// Initial logical state for the evolution data (default all ones).
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum Scope {
    Logical,
    All,
}

impl From<Scope> for DephasingScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Logical => DephasingScope::LogicalStates,
            Scope::All => DephasingScope::AllFockStates,
        }
    }
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub gate: GateFlags,
    /// Dephasing rate (default J/5000 with J = 1).
    #[arg(long, default_value_t = 2e-4)]
    pub gamma: f64,
    /// Relaxation rate (default J/5000 with J = 1).
    #[arg(long = "Gamma", default_value_t = 2e-4)]
    pub relaxation: f64,
    #[arg(long, default_value_t = 15)]
    pub reps: usize,
    /// Initial logical state (default all zeros).
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long, value_enum, default_value_t = Scope::Logical)]
    pub scope: Scope,
    /// Samples per repetition.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct GhzArgs {
    /// Evolve under dephasing and relaxation.
    #[arg(long)]
    pub noise: bool,
    #[arg(long, default_value_t = 2e-4)]
    pub gamma: f64,
    #[arg(long = "Gamma", default_value_t = 2e-4)]
    pub relaxation: f64,
    #[arg(long, value_enum, default_value_t = Scope::Logical)]
    pub scope: Scope,
}

fn bits_or(init: &Option<String>, n: usize, default: u8) -> Result<Vec<u8>> {
    let bits = match init {
        Some(s) => parse_bits(s)?,
        None => vec![default; n],
    };
    ensure!(bits.len() == n, "--init needs {n} bits, got {}", bits.len());
    Ok(bits)
}

fn header(first: &str, labels: impl IntoIterator<Item = String>) -> Vec<String> {
    std::iter::once(first.to_string()).chain(labels).collect()
}

pub fn dim(out: &Path, n: usize, cap: Option<usize>) -> Result<()> {
    let cap = cap.unwrap_or(n);
    let full = enumerate_basis(n, cap)?.len();
    let computational = 1usize << n;
    let capped = enumerate_basis(n, 2)?.len();
    let lindblad = FockBasis::with_lower_sectors(n)?.len();
    println!("full={full} computational={computational}");
    let mut run = RunDir::create(out, "dim")?;
    run.param("n", n)?;
    run.param("cap", cap)?;
    run.json(
        "report.json",
        &json!({"n": n, "cap": cap, "full": full, "computational": computational,
                "cap2": capped, "lindblad_sectors": lindblad}),
    )?;
    run.finish()?;
    Ok(())
}

pub fn gate(out: &Path, args: &GateArgs) -> Result<()> {
    let schedule = args.gate.schedule()?;
    let n = schedule.n_logical();
    let basis = Arc::new(enumerate_basis(n, 2)?);
    let u = schedule.propagator(&basis)?;
    let projected = basis.computational_projector().restrict(&u)?;
    let report = GateReport::from_unitary(&schedule, &basis, &u, &args.gate.ideal(&projected)?)?;
    let bits = bits_or(&args.init, n, 1)?;
    let start = computational_index(&bits, &basis)?;
    let psi0 = dualrail_core::StateVector::basis_state(Arc::clone(&basis), start)?;
    let evolution = schedule.sample_evolution(&basis, psi0.amplitudes(), args.samples)?;

    println!("{}: F={:.12} L={:.3e} T={:.6}", report.label, report.fidelity, report.leakage, report.duration);
    for (k, p) in &report.phases {
        println!("  phase({k}) = {:.9} pi", p / PI);
    }
    let mut run = RunDir::create(out, "gate")?;
    run.param("gate", &args.gate.name)?;
    run.param("params", args.gate.params())?;
    run.param("solve", args.gate.solve)?;
    run.param("init", bits_label(&bits))?;
    run.param("samples", args.samples)?;
    run.json("report.json", &report)?;
    run.csv(
        "evolution.csv",
        &header("t", basis.labels()),
        evolution.iter().map(|(t, psi)| std::iter::once(*t).chain(psi.iter().map(|z| z.norm_sqr())).collect()),
    )?;
    let phases: Vec<(String, Vec<f64>)> = report.phases.iter().map(|(k, v)| (k.clone(), vec![*v])).collect();
    run.labeled_csv("phases.csv", &["state".into(), "phase".into()], phases)?;
    run.finish()?;
    Ok(())
}

fn parse_range(s: &str, flag: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(',').with_context(|| format!("{flag} must be LO,HI"))?;
    let lo: f64 = a.trim().parse().with_context(|| format!("{flag}: bad number '{a}'"))?;
    let hi: f64 = b.trim().parse().with_context(|| format!("{flag}: bad number '{b}'"))?;
    ensure!(lo.is_finite() && hi.is_finite() && lo <= hi, "{flag} needs LO <= HI, got {s}");
    Ok((lo, hi))
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

pub fn sweep(out: &Path, family: &str, dj: &str, dv: &str, points: usize, m: i64) -> Result<()> {
    ensure!(family == "cz", "sweep supports only the cz family, got '{family}'");
    ensure!(points >= 1, "--points must be at least 1");
    let (dj_lo, dj_hi) = parse_range(dj, "--dj-range")?;
    let (dv_lo, dv_hi) = parse_range(dv, "--dv-range")?;
    let base = cphase_params(m, -PI)?;
    let dj_grid: Vec<f64> = linspace(dj_lo, dj_hi, points).iter().map(|x| x * base.j).collect();
    let dv_grid: Vec<f64> = linspace(dv_lo, dv_hi, points).iter().map(|x| x * base.v.abs()).collect();
    let result = sweep_deviations(&base, &dj_grid, &dv_grid)?;
    let (d2j, d2v) = deviation_curvature(&base, 1e-3)?;
    println!("curvature of 1-F at the nominal point: dJ {d2j:.4e}, dV {d2v:.4e}");

    let mut run = RunDir::create(out, "sweep")?;
    run.param("family", family)?;
    run.param("dj_range", (dj_lo, dj_hi))?;
    run.param("dv_range", (dv_lo, dv_hi))?;
    run.param("points", points)?;
    run.param("m", m)?;
    let long = |mat: &Vec<Vec<f64>>| {
        let mut rows = Vec::new();
        for (i, &a) in result.dj.iter().enumerate() {
            for (j, &b) in result.dv.iter().enumerate() {
                rows.push(vec![a / base.j, b / base.v.abs(), mat[i][j]]);
            }
        }
        rows
    };
    let h = |v: &str| vec!["dj_over_j".to_string(), "dv_over_abs_v".to_string(), v.to_string()];
    run.csv("fidelity.csv", &h("fidelity"), long(&result.fidelity))?;
    run.csv("leakage.csv", &h("leakage"), long(&result.leakage))?;
    run.json("report.json", &json!({"params": base, "curvature_dj": d2j, "curvature_dv": d2v}))?;
    run.finish()?;
    Ok(())
}

pub fn detuning(out: &Path, min: Option<f64>, max: Option<f64>, points: Option<usize>) -> Result<()> {
    let grid = match (min, max, points) {
        (None, None, None) => default_detuning_grid(),
        (Some(lo), Some(hi), Some(p)) => {
            ensure!(lo > 0.0 && hi > lo, "--min and --max need 0 < min < max");
            ensure!(p >= 2, "--points must be at least 2");
            let (a, b) = (lo.log10(), hi.log10());
            (0..p).map(|i| 10f64.powf(a + (b - a) * i as f64 / (p - 1) as f64)).collect()
        }
        _ => bail!("--min, --max and --points must be given together"),
    };
    let rows = detuning_analysis(&grid)?;
    let fit: Vec<_> = rows.iter().filter(|r| (1e-3..=5e-2).contains(&r.delta)).collect();
    let slope = (fit.len() >= 2).then(|| {
        let d: Vec<f64> = fit.iter().map(|r| r.delta).collect();
        let inf: Vec<f64> = fit.iter().map(|r| 1.0 - r.f_exact).collect();
        loglog_slope(&d, &inf)
    });
    for r in rows.iter().filter(|r| r.delta == 0.0025) {
        println!("delta=0.0025 infidelity={:.4e} leakage={:.4e}", 1.0 - r.f_exact, r.l_exact);
    }
    if let Some(s) = slope {
        println!("log-log slope of 1-F over [1e-3, 5e-2]: {s:.4}");
    }
    let mut run = RunDir::create(out, "detuning")?;
    run.param("grid", &grid)?;
    let cols = ["delta", "f_exact", "f_perturb", "l_exact", "l_perturb", "f_closed_form", "l_closed_form"];
    run.csv(
        "detuning.csv",
        &cols.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        rows.iter().map(|r| vec![r.delta, r.f_exact, r.f_perturb, r.l_exact, r.l_perturb, r.f_closed_form, r.l_closed_form]),
    )?;
    run.json("report.json", &json!({"rows": rows, "loglog_slope": slope}))?;
    run.finish()?;
    Ok(())
}

fn study_report(study: &NoiseStudy) -> serde_json::Value {
    let finals: BTreeMap<String, f64> = study.labels().into_iter().zip(study.final_populations().iter().copied()).collect();
    let sectors: Vec<_> = study.sector_populations().into_iter().map(|(n, p)| json!({"walkers": n, "population": p})).collect();
    let top: Vec<_> = study.top_contributors(6, &[]).into_iter().map(|(l, p)| json!({"state": l, "population": p})).collect();
    json!({
        "period": study.period,
        "repetitions": study.repetitions,
        "final_populations": finals,
        "largest_final_populations": top,
        "sector_populations": sectors,
        "max_trace_drift": study.max_trace_drift,
    })
}

pub fn noise(out: &Path, args: &NoiseArgs) -> Result<()> {
    let schedule = args.gate.schedule()?;
    let spec = NoiseSpec::new(args.gamma, args.relaxation, args.scope.into())?;
    let bits = bits_or(&args.init, schedule.n_logical(), 0)?;
    ensure!(args.reps >= 1, "--reps must be at least 1");
    ensure!(args.samples >= 1, "--samples must be at least 1");
    let study = run_noise_study_with(&schedule, &spec, &bits, args.reps, args.samples)?;
    println!("largest final populations from |{}>_L:", bits_label(&bits));
    for (l, p) in study.top_contributors(5, &[]) {
        println!("  {l}  {p:.5}");
    }
    let mut run = RunDir::create(out, "noise")?;
    run.param("gate", &args.gate.name)?;
    run.param("params", args.gate.params())?;
    run.param("spec", spec)?;
    run.param("reps", args.reps)?;
    run.param("init", bits_label(&bits))?;
    run.param("samples", args.samples)?;
    run.csv(
        "populations.csv",
        &header("t", study.labels()),
        study.times.iter().zip(&study.populations).map(|(t, p)| std::iter::once(*t).chain(p.iter().copied()).collect()),
    )?;
    run.json("report.json", &study_report(&study))?;
    run.finish()?;
    Ok(())
}

pub fn effective(out: &Path, file: &Path, levels: usize) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let cp: CircuitParams = serde_json::from_str(&text).with_context(|| format!("invalid circuit parameters in {}", file.display()))?;
    let warnings = cp.validate()?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let eff = effective_params(&cp)?;
    let zz = exact_zz(&cp, levels)?;
    let v_exact = exact_effective_v(&cp, levels)?;
    let rel = (eff.v - v_exact).abs() / v_exact.abs();
    println!("g~ = {:.6e}  V = {:.6e}  exact V = {v_exact:.6e}  relative difference {rel:.3}", eff.g_tilde, eff.v);
    let mut run = RunDir::create(out, "effective-params")?;
    run.param("file", file.display().to_string())?;
    run.param("levels", levels)?;
    run.json(
        "report.json",
        &json!({"input": cp, "effective": eff, "warnings": warnings, "exact_zz": zz,
                "exact_v": v_exact, "relative_difference": rel, "sign_agrees": eff.v.signum() == v_exact.signum()}),
    )?;
    run.finish()?;
    Ok(())
}

fn amplitude_rows(psi: &dualrail_core::CVector, n: usize) -> Vec<(String, Vec<f64>)> {
    psi.iter()
        .enumerate()
        .map(|(w, z)| (bits_label(&word_to_bits(w, n)), vec![z.re, z.im, z.norm_sqr()]))
        .collect()
}

pub fn ghz(out: &Path, args: &GhzArgs) -> Result<()> {
    let circuit = ghz_circuit()?;
    let basis = Arc::new(enumerate_basis(3, 2)?);
    let psi = logical_output(&compose(&circuit, &basis)?, &basis)?;
    let fid = ghz_fidelity(&psi);
    let purities: Vec<f64> = (0..3).map(|q| reduced_purity(&psi, q)).collect::<dualrail_core::Result<_>>()?;
    println!("GHZ fidelity {fid:.12}, leakage {:.3e}", 1.0 - psi.norm_squared());
    let mut run = RunDir::create(out, "ghz")?;
    run.param("noise", args.noise)?;
    let head = ["state", "re", "im", "population"].map(String::from);
    run.labeled_csv("amplitudes.csv", &head, amplitude_rows(&psi, 3))?;
    let mut report = json!({
        "steps": circuit.steps().len(),
        "step_durations": circuit.step_durations(),
        "fidelity": fid,
        "leakage": 1.0 - psi.norm_squared(),
        "reduced_purity": purities,
    });
    if args.noise {
        let spec = NoiseSpec::new(args.gamma, args.relaxation, args.scope.into())?;
        run.param("spec", spec)?;
        let study = run_noise_study_with(&circuit.to_schedule()?, &spec, &[0, 0, 0], 1, 400)?;
        let b = &study.basis;
        let rho = study.final_state.matrix();
        let (i0, i7) = (computational_index(&[0, 0, 0], b)?, computational_index(&[1, 1, 1], b)?);
        let noisy = 0.5 * (rho[(i0, i0)].re + rho[(i7, i7)].re) + rho[(i0, i7)].re;
        println!("with noise: GHZ fidelity {noisy:.6}");
        report["noisy_fidelity"] = json!(noisy);
        report["noisy"] = study_report(&study);
        run.csv(
            "populations.csv",
            &header("t", study.labels()),
            study.times.iter().zip(&study.populations).map(|(t, p)| std::iter::once(*t).chain(p.iter().copied()).collect()),
        )?;
    }
    run.json("report.json", &report)?;
    run.finish()?;
    Ok(())
}

pub fn hamiltonian(out: &Path, file: &Path, cap: usize) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let graph = WalkGraph::from_json(&text)?;
    let basis = Arc::new(enumerate_basis(graph.n_logical(), cap)?);
    let h = build_hamiltonian(&graph, &basis)?;
    let m = h.matrix();
    let entries: Vec<Vec<f64>> = (0..h.dim())
        .flat_map(|r| (0..h.dim()).map(move |c| (r, c)))
        .filter(|&(r, c)| m[(r, c)].norm() != 0.0)
        .map(|(r, c)| vec![r as f64, c as f64, m[(r, c)].re, m[(r, c)].im])
        .collect();
    println!("dimension {}, {} nonzero entries", h.dim(), entries.len());
    let mut run = RunDir::create(out, "hamiltonian")?;
    run.param("file", file.display().to_string())?;
    run.param("cap", cap)?;
    let labels: Vec<(String, Vec<f64>)> = basis.labels().into_iter().enumerate().map(|(i, l)| (l, vec![i as f64])).collect();
    run.labeled_csv("basis.csv", &["state".into(), "index".into()], labels)?;
    run.csv("hamiltonian.csv", &["row", "col", "re", "im"].map(String::from), entries.clone())?;
    run.json(
        "report.json",
        &json!({"n": graph.n_logical(), "dimension": h.dim(), "nonzero": entries.len(), "hermiticity_error": h.hermiticity_error()}),
    )?;
    run.finish()?;
    Ok(())
}

pub fn circuit(out: &Path, file: &Path) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let desc = CircuitFile::from_json(&text)?;
    let circuit = desc.build()?;
    let basis = Arc::new(enumerate_basis(circuit.n_logical(), 2)?);
    let psi = logical_output(&compose(&circuit, &basis)?, &basis)?;
    let leakage = 1.0 - psi.norm_squared();
    println!("{} steps, duration {:.6}, leakage from |0...0>_L {leakage:.3e}", circuit.steps().len(), circuit.step_durations().iter().sum::<f64>());
    let mut run = RunDir::create(out, "circuit")?;
    run.param("circuit", &desc)?;
    let head = ["state", "re", "im", "population"].map(String::from);
    run.labeled_csv("amplitudes.csv", &head, amplitude_rows(&psi, circuit.n_logical()))?;
    run.json("report.json", &json!({"steps": circuit.steps().len(), "step_durations": circuit.step_durations(), "leakage": leakage}))?;
    run.finish()?;
    Ok(())
}
