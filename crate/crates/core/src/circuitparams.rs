//! Transmon/coupler circuit parameters mapped to effective walk parameters,
//! with a brute-force three-mode diagonalization as the reference.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two qubit modes coupled through a tunable coupler. Any consistent
/// energy unit works; the results carry the same unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub omega_1: f64,
    pub omega_2: f64,
    pub omega_c: f64,
    pub beta_1: f64,
    pub beta_2: f64,
    pub beta_c: f64,
    pub g_1c: f64,
    pub g_2c: f64,
    pub g_12: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub omega_tilde_1: f64,
    pub omega_tilde_2: f64,
    pub g_tilde: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

/// Ratio above which the dispersive expansion is flagged.
pub const DISPERSIVE_WARN: f64 = 0.3;

impl CircuitParams {
    /// In GHz: qubits at 5, coupler at 6, anharmonicities -0.25/-0.1,
    /// qubit-coupler 0.1 and direct 0.006.
    pub fn representative() -> Self {
        Self {
            omega_1: 5.0,
            omega_2: 5.0,
            omega_c: 6.0,
            beta_1: -0.25,
            beta_2: -0.25,
            beta_c: -0.1,
            g_1c: 0.1,
            g_2c: 0.1,
            g_12: 0.006,
        }
    }

    pub fn delta_1(&self) -> f64 {
        self.omega_1 - self.omega_c
    }

    pub fn delta_2(&self) -> f64 {
        self.omega_2 - self.omega_c
    }

    /// `1/Delta = (1/Delta_1 + 1/Delta_2) / 2`.
    pub fn inverse_delta(&self) -> f64 {
        0.5 * (1.0 / self.delta_1() + 1.0 / self.delta_2())
    }

    /// Direct coupling that cancels the effective exchange.
    pub fn off_point_g12(&self) -> f64 {
        -self.g_1c * self.g_2c * self.inverse_delta()
    }

    /// Checks the dispersive regime. Returns warnings for ratios above
    /// [`DISPERSIVE_WARN`].
    pub fn validate(&self) -> Result<Vec<String>> {
        let fields = [
            self.omega_1, self.omega_2, self.omega_c, self.beta_1, self.beta_2, self.beta_c, self.g_1c, self.g_2c,
            self.g_12,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("circuit parameters must be finite".into()));
        }
        let mut warnings = Vec::new();
        for (i, d, g) in [(1, self.delta_1(), self.g_1c), (2, self.delta_2(), self.g_2c)] {
            if d >= 0.0 {
                return Err(Error::InvalidArgument(format!("Delta_{i} = omega_{i} - omega_c must be negative, got {d}")));
            }
            let ratio = g.abs() / d.abs();
            if ratio >= 1.0 {
                return Err(Error::InvalidArgument(format!("g_{i}c/|Delta_{i}| = {ratio} is not dispersive")));
            }
            if ratio >= DISPERSIVE_WARN {
                warnings.push(format!("g_{i}c/|Delta_{i}| = {ratio:.3} is weakly dispersive"));
            }
        }
        Ok(warnings)
    }
}

/// Lamb-shifted frequencies, effective exchange and the perturbative ZZ
/// strength. The ZZ expression only uses qubit 1's detuning and anharmonicity.
pub fn effective_params(cp: &CircuitParams) -> Result<EffectiveParams> {
    cp.validate()?;
    let (d1, d2) = (cp.delta_1(), cp.delta_2());
    let (g1, g2, g12) = (cp.g_1c, cp.g_2c, cp.g_12);
    let anharm_pole = d1 + cp.beta_1;
    if anharm_pole == 0.0 {
        return Err(Error::Resonance("Delta_1 + beta_1 = 0 (qubit two-photon state resonant with coupler)".into()));
    }
    let coupler_pole = 2.0 * d1 - cp.beta_c;
    if coupler_pole == 0.0 {
        return Err(Error::Resonance("2 Delta_1 - beta_c = 0 (doubly excited coupler resonance)".into()));
    }
    let v = 4.0 * g1 * g2 * g12 * (1.0 / (d1 * d1) - 1.0 / (d1 * anharm_pole))
        + 4.0 * g1 * g1 * g2 * g2 * (2.0 / (d1 * d1 * coupler_pole) - 1.0 / (d1 * d1 * anharm_pole));
    Ok(EffectiveParams {
        omega_tilde_1: cp.omega_1 + g1 * g1 / d1,
        omega_tilde_2: cp.omega_2 + g2 * g2 / d2,
        g_tilde: g1 * g2 * cp.inverse_delta() + g12,
        v,
    })
}

fn annihilation(levels: usize) -> DMatrix<f64> {
    DMatrix::from_fn(levels, levels, |r, c| if c == r + 1 { (c as f64).sqrt() } else { 0.0 })
}

fn kron_all(factors: &[&DMatrix<f64>]) -> DMatrix<f64> {
    factors[1..].iter().fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// Mode operators `b_i` on the product space, mode 0 most significant.
fn mode_operators(modes: usize, levels: usize) -> Vec<DMatrix<f64>> {
    let a = annihilation(levels);
    let id = DMatrix::identity(levels, levels);
    (0..modes)
        .map(|i| {
            let f: Vec<&DMatrix<f64>> = (0..modes).map(|k| if k == i { &a } else { &id }).collect();
            kron_all(&f)
        })
        .collect()
}

fn oscillators(omegas: &[f64], betas: &[f64], b: &[DMatrix<f64>]) -> DMatrix<f64> {
    let dim = b[0].nrows();
    let mut h = DMatrix::zeros(dim, dim);
    for ((w, beta), bi) in omegas.iter().zip(betas).zip(b) {
        let n = bi.transpose() * bi;
        h += &n * *w + (&n * &n - &n) * (0.5 * beta);
    }
    h
}

fn flat(occ: &[usize], levels: usize) -> usize {
    occ.iter().fold(0, |acc, &o| acc * levels + o)
}

struct Dressed {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Dressed {
    fn new(h: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = eig.eigenvectors.select_columns(&order);
        Self { energies, vectors }
    }

    fn weight(&self, bare: &[usize], col: usize) -> f64 {
        bare.iter().map(|&r| self.vectors[(r, col)].powi(2)).sum()
    }

    /// Eigenstates with the largest weight on `bare`, ties to the lower index.
    fn label(&self, bare: &[usize], count: usize, name: &str) -> Result<Vec<usize>> {
        let mut cols: Vec<(usize, f64)> = (0..self.energies.len()).map(|c| (c, self.weight(bare, c))).collect();
        cols.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let picked = &cols[..count];
        if let Some(&(_, w)) = picked.iter().find(|(_, w)| *w < 0.5) {
            return Err(Error::AmbiguousLabel { state: name.to_string(), overlap: w });
        }
        Ok(picked.iter().map(|p| p.0).collect())
    }
}

/// `E_11 + E_00 - E_10 - E_01` from dressed states of a two-qubit block.
/// The single-excitation pair is taken jointly (sum of the two states with
/// most weight on `|10>, |01>`), which stays well defined on resonance.
fn dressed_zz(d: &Dressed, levels: usize, modes: usize) -> Result<f64> {
    let pad = |q: [usize; 2]| {
        let mut occ = vec![0; modes];
        occ[..2].copy_from_slice(&q);
        flat(&occ, levels)
    };
    let e00 = d.label(&[pad([0, 0])], 1, "|00>")?[0];
    let e11 = d.label(&[pad([1, 1])], 1, "|11>")?[0];
    let pair = d.label(&[pad([1, 0]), pad([0, 1])], 2, "|10>,|01>")?;
    Ok(d.energies[e11] + d.energies[e00] - d.energies[pair[0]] - d.energies[pair[1]])
}

/// Three-mode Hamiltonian with couplings `g (b_i^dag b_j + b_i b_j^dag - b_i^dag b_j^dag - b_i b_j)`.
pub fn circuit_hamiltonian(cp: &CircuitParams, levels: usize) -> Result<DMatrix<f64>> {
    if levels < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 levels per mode, got {levels}")));
    }
    let b = mode_operators(3, levels);
    let mut h = oscillators(&[cp.omega_1, cp.omega_2, cp.omega_c], &[cp.beta_1, cp.beta_2, cp.beta_c], &b);
    for (i, j, g) in [(0, 2, cp.g_1c), (1, 2, cp.g_2c), (0, 1, cp.g_12)] {
        let (bi, bj) = (&b[i], &b[j]);
        let exchange = bi.transpose() * bj + bi * bj.transpose();
        let pair = bi.transpose() * bj.transpose() + bi * bj;
        h += (exchange - pair) * g;
    }
    Ok(h)
}

/// Raw dressed-state ZZ of the full circuit truncated at `levels` per mode.
pub fn exact_zz(cp: &CircuitParams, levels: usize) -> Result<f64> {
    let d = Dressed::new(circuit_hamiltonian(cp, levels)?);
    dressed_zz(&d, levels, 3)
}

/// ZZ of the two-mode effective model with exchange `g~` and no explicit V.
pub fn exchange_zz(eff: &EffectiveParams, beta_1: f64, beta_2: f64, levels: usize) -> Result<f64> {
    let b = mode_operators(2, levels);
    let mut h = oscillators(&[eff.omega_tilde_1, eff.omega_tilde_2], &[beta_1, beta_2], &b);
    h += (b[0].transpose() * &b[1] + b[1].transpose() * &b[0]) * eff.g_tilde;
    dressed_zz(&Dressed::new(h), levels, 2)
}

/// The part of the exact ZZ not produced by the exchange `g~` alone, the
/// quantity the perturbative V approximates.
pub fn exact_effective_v(cp: &CircuitParams, levels: usize) -> Result<f64> {
    let eff = effective_params(cp)?;
    Ok(exact_zz(cp, levels)? - exchange_zz(&eff, cp.beta_1, cp.beta_2, levels)?)
}

/// Splitting of the dressed single-excitation qubit doublet.
pub fn single_excitation_splitting(cp: &CircuitParams, levels: usize) -> Result<f64> {
    let d = Dressed::new(circuit_hamiltonian(cp, levels)?);
    let bare = [flat(&[1, 0, 0], levels), flat(&[0, 1, 0], levels)];
    let pair = d.label(&bare, 2, "|10>,|01>")?;
    Ok((d.energies[pair[0]] - d.energies[pair[1]]).abs())
}
