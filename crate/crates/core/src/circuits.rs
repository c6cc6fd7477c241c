//! Logical circuits: parallel gate layers flattened into one piecewise
//! constant schedule on the full array.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{computational_index, FockBasis};
use crate::gates::{
    ccphase_gate, ccphase_params_with, cphase_gate, cphase_params_with, hadamard_gate, iswap_gate, iswap_params_with,
    x_gate, z_gate, Branch, Connection, GateSchedule, ScheduleStep,
};
use crate::walkgraph::WalkGraph;
use crate::{CMatrix, CVector, Complex64};

#[derive(Debug, Clone)]
pub struct PlacedGate {
    pub schedule: GateSchedule,
    /// Array columns hosting the gate's logical qubits, in order.
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LogicalCircuit {
    n_logical: usize,
    steps: Vec<Vec<PlacedGate>>,
}

impl LogicalCircuit {
    pub fn new(n_logical: usize) -> Self {
        Self { n_logical, steps: Vec::new() }
    }

    pub fn n_logical(&self) -> usize {
        self.n_logical
    }

    pub fn steps(&self) -> &[Vec<PlacedGate>] {
        &self.steps
    }

    /// Appends one layer of simultaneous gates on disjoint columns.
    pub fn push_step(&mut self, gates: Vec<PlacedGate>) -> Result<()> {
        let mut used = vec![false; self.n_logical];
        for g in &gates {
            if g.targets.len() != g.schedule.n_logical() {
                return Err(Error::InvalidArgument(format!(
                    "gate '{}' acts on {} qubits but {} targets were given",
                    g.schedule.label(),
                    g.schedule.n_logical(),
                    g.targets.len()
                )));
            }
            for &c in &g.targets {
                if c >= self.n_logical {
                    return Err(Error::InvalidArgument(format!("target column {c} outside {} qubits", self.n_logical)));
                }
                if used[c] {
                    return Err(Error::InvalidArgument(format!("column {c} targeted twice in one step")));
                }
                used[c] = true;
            }
        }
        self.steps.push(gates);
        Ok(())
    }

    pub fn with_step(mut self, gates: Vec<PlacedGate>) -> Result<Self> {
        self.push_step(gates)?;
        Ok(self)
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &LogicalCircuit) -> Result<LogicalCircuit> {
        if self.n_logical != other.n_logical {
            return Err(Error::BasisMismatch { graph: other.n_logical, basis: self.n_logical });
        }
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        Ok(Self { n_logical: self.n_logical, steps })
    }

    /// Duration of each layer (its longest gate).
    pub fn step_durations(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.iter().map(|g| g.schedule.duration()).fold(0.0, f64::max))
            .collect()
    }

    /// One schedule on all columns. Within a layer the time axis is cut at
    /// every gate's step boundary; finished gates and untouched columns idle
    /// with no edges.
    pub fn to_schedule(&self) -> Result<GateSchedule> {
        let mut out = Vec::new();
        for layer in &self.steps {
            let embedded = layer
                .iter()
                .map(|g| g.schedule.embed(self.n_logical, &g.targets))
                .collect::<Result<Vec<_>>>()?;
            let mut cuts: Vec<f64> = embedded
                .iter()
                .flat_map(|s| {
                    s.steps().iter().scan(0.0, |t, st| {
                        *t += st.duration;
                        Some(*t)
                    })
                })
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
            let mut start = 0.0;
            for &end in &cuts {
                let mid = 0.5 * (start + end);
                let mut graph = WalkGraph::new(self.n_logical);
                for s in &embedded {
                    if let Some(st) = active_step(s, mid) {
                        graph = graph.merge(&st.graph)?;
                    }
                }
                out.push(ScheduleStep { graph, duration: end - start });
                start = end;
            }
        }
        GateSchedule::new("circuit", self.n_logical, out)
    }
}

fn active_step(s: &GateSchedule, t: f64) -> Option<&ScheduleStep> {
    let mut end = 0.0;
    for st in s.steps() {
        end += st.duration;
        if t < end {
            return Some(st);
        }
    }
    None
}

/// Full-space unitary of the circuit.
pub fn compose(circuit: &LogicalCircuit, basis: &Arc<FockBasis>) -> Result<CMatrix> {
    if basis.n_logical() != circuit.n_logical() {
        return Err(Error::BasisMismatch { graph: circuit.n_logical(), basis: basis.n_logical() });
    }
    circuit.to_schedule()?.propagator(basis)
}

fn place(schedule: GateSchedule, targets: &[usize]) -> PlacedGate {
    PlacedGate { schedule, targets: targets.to_vec() }
}

/// GHZ preparation on three qubits in five layers:
/// H(Q2) H(Q1) | CZ(Q1,Q2) | H(Q1) H(Q3) | CZ(Q2,Q3) | H(Q3).
/// Q2 is the control of both CNOTs; the Hadamards on Q1 and Q3 that close
/// one CNOT or open the next share a layer.
pub fn ghz_circuit() -> Result<LogicalCircuit> {
    let h = hadamard_gate(1.0)?;
    let cz = cphase_gate(&cphase_params_with(8, -PI, 1.0, Branch::Minus)?, Connection::Transverse)?;
    LogicalCircuit::new(3)
        .with_step(vec![place(h.clone(), &[1]), place(h.clone(), &[0])])?
        .with_step(vec![place(cz.clone(), &[0, 1])])?
        .with_step(vec![place(h.clone(), &[0]), place(h.clone(), &[2])])?
        .with_step(vec![place(cz, &[1, 2])])?
        .with_step(vec![place(h, &[2])])
}

/// Logical amplitudes (length `2^n`, bitstring order) of `U |0...0>_L`.
pub fn logical_output(u: &CMatrix, basis: &FockBasis) -> Result<CVector> {
    let n = basis.n_logical();
    let start = computational_index(&vec![0; n], basis)?;
    let idx = basis.computational_indices();
    Ok(CVector::from_iterator(idx.len(), idx.iter().map(|&i| u[(i, start)])))
}

/// `|<GHZ|psi>|^2` for logical amplitudes `psi`.
pub fn ghz_fidelity(psi: &CVector) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (psi[0] * s + psi[psi.len() - 1] * s).norm_sqr()
}

/// `Tr rho_q^2` of one qubit of a (normalized) logical state, qubit 0 most significant.
pub fn reduced_purity(psi: &CVector, qubit: usize) -> Result<f64> {
    let dim = psi.len();
    let n = dim.trailing_zeros() as usize;
    if !dim.is_power_of_two() || qubit >= n {
        return Err(Error::InvalidArgument(format!("qubit {qubit} out of range for {dim} amplitudes")));
    }
    let bit = 1 << (n - 1 - qubit);
    let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..dim {
        for j in 0..dim {
            if i & !bit == j & !bit {
                let (a, b) = (usize::from(i & bit != 0), usize::from(j & bit != 0));
                rho[a][b] += psi[i] * psi[j].conj();
            }
        }
    }
    let norm = rho[0][0].re + rho[1][1].re;
    Ok(rho.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / (norm * norm))
}

/// JSON description: `{"n": 3, "steps": [[{"gate": "h", "targets": [1], "params": {}}]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitFile {
    pub n: usize,
    pub steps: Vec<Vec<GateSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub gate: String,
    pub targets: Vec<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl CircuitFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build(&self) -> Result<LogicalCircuit> {
        let mut c = LogicalCircuit::new(self.n);
        for layer in &self.steps {
            let gates = layer
                .iter()
                .map(|g| Ok(PlacedGate { schedule: gate_from_name(&g.gate, &g.params)?, targets: g.targets.clone() }))
                .collect::<Result<Vec<_>>>()?;
            c.push_step(gates)?;
        }
        Ok(c)
    }
}

fn int_param(params: &BTreeMap<String, f64>, key: &str, default: i64) -> Result<i64> {
    match params.get(key) {
        None => Ok(default),
        Some(&x) if x.fract() == 0.0 && x.is_finite() => Ok(x as i64),
        Some(&x) => Err(Error::InvalidArgument(format!("parameter '{key}' must be an integer, got {x}"))),
    }
}

/// Builds a named gate. Recognized names and parameters (defaults in brackets):
/// `h` (J [1]), `x` (J [1]), `rx` (theta [pi], J [1]), `z` (mu [1]),
/// `p` (theta [pi], mu [1]), `cz` / `cphase` (m [8], phi [-pi], J [1]),
/// `cz_long` (as `cz` plus Jx [1]), `iswap` (m [7], n [5], k [2], J [1]),
/// `ccphase` (m [14], k [4], J [1]).
pub fn gate_from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<GateSchedule> {
    let known: &[&str] = match name {
        "h" | "x" => &["J"],
        "rx" => &["theta", "J"],
        "z" => &["mu"],
        "p" => &["theta", "mu"],
        "cz" | "cphase" => &["m", "phi", "J"],
        "cz_long" => &["m", "phi", "J", "Jx"],
        "iswap" => &["m", "n", "k", "J"],
        "ccphase" => &["m", "k", "J"],
        other => return Err(Error::InvalidArgument(format!("unknown gate '{other}'"))),
    };
    if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(format!("gate '{name}' has no parameter '{k}'")));
    }
    let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    let j = get("J", 1.0);
    match name {
        "h" => hadamard_gate(j),
        "x" => x_gate(PI, j),
        "rx" => x_gate(get("theta", PI), j),
        "z" => z_gate(PI, get("mu", 1.0)),
        "p" => z_gate(get("theta", PI), get("mu", 1.0)),
        "cz" | "cphase" | "cz_long" => {
            let p = cphase_params_with(int_param(params, "m", 8)?, get("phi", -PI), j, Branch::Minus)?;
            let conn = if name == "cz_long" { Connection::Longitudinal { j_x: get("Jx", 1.0) } } else { Connection::Transverse };
            cphase_gate(&p, conn)
        }
        "iswap" => {
            let p = iswap_params_with(int_param(params, "m", 7)?, int_param(params, "n", 5)?, int_param(params, "k", 2)?, j)?;
            iswap_gate(&p)
        }
        "ccphase" => {
            let p = ccphase_params_with(int_param(params, "m", 14)?, int_param(params, "k", 4)?, j)?;
            ccphase_gate(&p.step1, &p.step2)
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_basis;
    use crate::gates::ideal;

    fn basis(n: usize) -> Arc<FockBasis> {
        Arc::new(enumerate_basis(n, 2).unwrap())
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() < tol)
    }

    #[test]
    fn empty_circuit_is_identity() {
        let b = basis(2);
        let u = compose(&LogicalCircuit::new(2), &b).unwrap();
        assert_eq!(u, CMatrix::identity(b.len(), b.len()));
    }

    #[test]
    fn single_hadamard_matches_gate() {
        let b = basis(1);
        let c = LogicalCircuit::new(1).with_step(vec![place(hadamard_gate(1.0).unwrap(), &[0])]).unwrap();
        let direct = hadamard_gate(1.0).unwrap().propagator(&b).unwrap();
        assert!(close(&compose(&c, &b).unwrap(), &direct, 1e-13));
    }

    #[test]
    fn parallel_gates_of_unequal_length() {
        // Z with a slow mu runs longer than the Hadamard; result is H x Z.
        let b = basis(2);
        let c = LogicalCircuit::new(2)
            .with_step(vec![place(hadamard_gate(1.0).unwrap(), &[0]), place(z_gate(PI, 0.5).unwrap(), &[1])])
            .unwrap();
        let p = b.computational_projector().restrict(&compose(&c, &b).unwrap()).unwrap();
        let want = ideal::kron(&ideal::hadamard(), &ideal::phase(PI));
        assert!(close(&p, &want, 1e-10));
        assert_eq!(c.to_schedule().unwrap().steps().len(), 2);
    }

    #[test]
    fn overlapping_targets_rejected() {
        let h = hadamard_gate(1.0).unwrap();
        let mut c = LogicalCircuit::new(2);
        assert!(c.push_step(vec![place(h.clone(), &[0]), place(h.clone(), &[0])]).is_err());
        assert!(c.push_step(vec![place(h.clone(), &[2])]).is_err());
        assert!(c.push_step(vec![place(h, &[0, 1])]).is_err());
    }

    #[test]
    fn ghz_state() {
        let c = ghz_circuit().unwrap();
        assert_eq!(c.steps().len(), 5);
        let b = basis(3);
        let u = compose(&c, &b).unwrap();
        let psi = logical_output(&u, &b).unwrap();
        assert!((psi[0].norm_sqr() - 0.5).abs() < 1e-6);
        assert!((psi[7].norm_sqr() - 0.5).abs() < 1e-6);
        assert!(1.0 - psi.norm_squared() < 1e-6);
        assert!(1.0 - ghz_fidelity(&psi) < 1e-6);
        for q in 0..3 {
            assert!((reduced_purity(&psi, q).unwrap() - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn file_round_trip_and_names() {
        let text = r#"{"n": 2, "steps": [[{"gate": "h", "targets": [0]}], [{"gate": "cz", "targets": [0, 1], "params": {"m": 8}}]]}"#;
        let f = CircuitFile::from_json(text).unwrap();
        assert_eq!(CircuitFile::from_json(&f.to_json().unwrap()).unwrap(), f);
        assert_eq!(f.build().unwrap().steps().len(), 2);
        let none = BTreeMap::new();
        for g in ["h", "x", "rx", "z", "p", "cz", "cphase", "cz_long", "iswap", "ccphase"] {
            gate_from_name(g, &none).unwrap();
        }
        assert!(gate_from_name("toffoli", &none).is_err());
        let bad = BTreeMap::from([("m".to_string(), 8.5)]);
        assert!(gate_from_name("cz", &bad).is_err());
        let unknown = BTreeMap::from([("q".to_string(), 1.0)]);
        assert!(gate_from_name("h", &unknown).is_err());
    }

    #[test]
    fn reduced_purity_of_product_state() {
        let mut psi = CVector::zeros(4);
        psi[1] = Complex64::new(1.0, 0.0);
        assert!((reduced_purity(&psi, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(reduced_purity(&psi, 2).is_err());
    }
}
