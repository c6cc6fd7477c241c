//! Colored walk graphs and their extended Bose-Hubbard Hamiltonians.
//!
//! H = -sum J (c_a^dag c_b + h.c.) + sum U_s/2 n_s (n_s - 1) - sum mu_s n_s + sum V n_a n_b

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, SiteIndex};
use crate::{CMatrix, Complex64};

impl From<SiteIndex> for usize {
    fn from(s: SiteIndex) -> usize {
        s.flat()
    }
}

/// One colored element of a walk graph. Sites are flat indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeKind {
    Coupling { a: usize, b: usize, j: f64 },
    DetuningLoop { site: usize, mu: f64 },
    ZZEdge { a: usize, b: usize, v: f64 },
    OnSite { u: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WalkGraph {
    n_logical: usize,
    couplings: Vec<(usize, usize, f64)>,
    detunings: Vec<(usize, f64)>,
    zz: Vec<(usize, usize, f64)>,
    onsite_u: f64,
    onsite_override: Vec<(usize, f64)>,
}

impl WalkGraph {
    /// Default configuration: no edges, U = 0.
    pub fn new(n_logical: usize) -> Self {
        Self { n_logical, ..Default::default() }
    }

    pub fn with_onsite(mut self, u: f64) -> Self {
        self.onsite_u = u;
        self
    }

    /// Per-site on-site interaction, replacing the global value on that site.
    pub fn with_site_onsite(mut self, site: impl Into<usize>, u: f64) -> Self {
        self.onsite_override.push((site.into(), u));
        self
    }

    pub fn couple(mut self, a: impl Into<usize>, b: impl Into<usize>, j: f64) -> Self {
        self.couplings.push((a.into(), b.into(), j));
        self
    }

    /// Chemical potential `mu` on a site; enters the Hamiltonian as `-mu n`.
    pub fn detune(mut self, site: impl Into<usize>, mu: f64) -> Self {
        self.detunings.push((site.into(), mu));
        self
    }

    pub fn zz(mut self, a: impl Into<usize>, b: impl Into<usize>, v: f64) -> Self {
        self.zz.push((a.into(), b.into(), v));
        self
    }

    pub fn n_logical(&self) -> usize {
        self.n_logical
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_logical
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    pub fn detunings(&self) -> &[(usize, f64)] {
        &self.detunings
    }

    pub fn zz_edges(&self) -> &[(usize, usize, f64)] {
        &self.zz
    }

    pub fn onsite_u(&self) -> f64 {
        self.onsite_u
    }

    pub fn onsite_overrides(&self) -> &[(usize, f64)] {
        &self.onsite_override
    }

    /// On-site interaction acting on `site`.
    pub fn u_at(&self, site: usize) -> f64 {
        self.onsite_override
            .iter()
            .rev()
            .find(|(s, _)| *s == site)
            .map_or(self.onsite_u, |&(_, u)| u)
    }

    pub fn edges(&self) -> Vec<EdgeKind> {
        let mut out: Vec<EdgeKind> =
            self.couplings.iter().map(|&(a, b, j)| EdgeKind::Coupling { a, b, j }).collect();
        out.extend(self.detunings.iter().map(|&(site, mu)| EdgeKind::DetuningLoop { site, mu }));
        out.extend(self.zz.iter().map(|&(a, b, v)| EdgeKind::ZZEdge { a, b, v }));
        out.push(EdgeKind::OnSite { u: self.onsite_u });
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_logical == 0 {
            return Err(Error::InvalidArgument("graph needs at least one logical qubit".into()));
        }
        let n_sites = self.n_sites();
        let check = |site: usize| {
            if site >= n_sites {
                Err(Error::InvalidSite { site, n_sites })
            } else {
                Ok(())
            }
        };
        let mut pairs = BTreeSet::new();
        for &(a, b, _) in &self.couplings {
            check(a)?;
            check(b)?;
            if a == b {
                return Err(Error::InvalidArgument(format!("coupling loop on site {a}")));
            }
            if !pairs.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidArgument(format!("duplicate coupling {a}-{b}")));
            }
        }
        for &(a, b, _) in &self.zz {
            check(a)?;
            check(b)?;
            if a == b {
                return Err(Error::InvalidArgument(format!("ZZ loop on site {a}")));
            }
        }
        for &(s, _) in self.detunings.iter().chain(&self.onsite_override) {
            check(s)?;
        }
        Ok(())
    }

    /// Places this graph on `columns` of an `n_total`-column array. The
    /// global U becomes per-site values on the mapped sites.
    pub fn embed(&self, n_total: usize, columns: &[usize]) -> Result<WalkGraph> {
        if columns.len() != self.n_logical {
            return Err(Error::DimensionMismatch { expected: self.n_logical, found: columns.len() });
        }
        if let Some(&c) = columns.iter().find(|&&c| c >= n_total) {
            return Err(Error::InvalidSite { site: 2 * c, n_sites: 2 * n_total });
        }
        let map = |s: usize| 2 * columns[s / 2] + s % 2;
        let mut g = WalkGraph::new(n_total);
        g.couplings = self.couplings.iter().map(|&(a, b, j)| (map(a), map(b), j)).collect();
        g.detunings = self.detunings.iter().map(|&(s, mu)| (map(s), mu)).collect();
        g.zz = self.zz.iter().map(|&(a, b, v)| (map(a), map(b), v)).collect();
        g.onsite_override = (0..self.n_sites()).map(|s| (map(s), self.u_at(s))).collect();
        Ok(g)
    }

    /// Union of two graphs on the same array.
    pub fn merge(&self, other: &WalkGraph) -> Result<WalkGraph> {
        if self.n_logical != other.n_logical {
            return Err(Error::BasisMismatch { graph: other.n_logical, basis: self.n_logical });
        }
        let (a, b) = (self.onsite_u, other.onsite_u);
        let onsite_u = if a == b || b == 0.0 {
            a
        } else if a == 0.0 {
            b
        } else {
            return Err(Error::InvalidArgument(format!("conflicting global on-site U ({a} vs {b})")));
        };
        let mut g = self.clone();
        g.onsite_u = onsite_u;
        g.couplings.extend_from_slice(&other.couplings);
        g.detunings.extend_from_slice(&other.detunings);
        g.zz.extend_from_slice(&other.zz);
        g.onsite_override.extend_from_slice(&other.onsite_override);
        g.validate()?;
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<WalkGraph> {
        let file: GraphFile = serde_json::from_str(text)?;
        let g = WalkGraph {
            n_logical: file.n,
            couplings: file.couplings,
            detunings: file.detunings,
            zz: file.zz,
            onsite_u: file.u,
            onsite_override: file.u_sites,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = GraphFile {
            n: self.n_logical,
            couplings: self.couplings.clone(),
            detunings: self.detunings.clone(),
            zz: self.zz.clone(),
            u: self.onsite_u,
            u_sites: self.onsite_override.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    #[serde(default)]
    couplings: Vec<(usize, usize, f64)>,
    #[serde(default)]
    detunings: Vec<(usize, f64)>,
    #[serde(default)]
    zz: Vec<(usize, usize, f64)>,
    #[serde(rename = "U", default)]
    u: f64,
    #[serde(rename = "U_sites", default, skip_serializing_if = "Vec::is_empty")]
    u_sites: Vec<(usize, f64)>,
}

/// Dense Hamiltonian over a Fock basis.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    basis: Arc<FockBasis>,
    matrix: CMatrix,
}

impl HamiltonianMatrix {
    /// Wraps an arbitrary square matrix; Hermiticity is checked when it is
    /// diagonalized.
    pub fn from_matrix(basis: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: matrix.nrows() });
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// max |H - H^dag|.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }
}

pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn build_hamiltonian(graph: &WalkGraph, basis: &Arc<FockBasis>) -> Result<HamiltonianMatrix> {
    if graph.n_logical() != basis.n_logical() {
        return Err(Error::BasisMismatch { graph: graph.n_logical(), basis: basis.n_logical() });
    }
    graph.validate()?;
    let dim = basis.len();
    let mut h = CMatrix::zeros(dim, dim);
    let u: Vec<f64> = (0..basis.n_sites()).map(|s| graph.u_at(s)).collect();

    for (col, state) in basis.states().iter().enumerate() {
        let occ = state.occupations();
        let mut diag = 0.0;
        for (s, &o) in occ.iter().enumerate() {
            let o = o as f64;
            diag += 0.5 * u[s] * o * (o - 1.0);
        }
        for &(s, mu) in graph.detunings() {
            diag -= mu * occ[s] as f64;
        }
        for &(a, b, v) in graph.zz_edges() {
            diag += v * (occ[a] as f64) * (occ[b] as f64);
        }
        h[(col, col)] += Complex64::new(diag, 0.0);

        for &(a, b, j) in graph.couplings() {
            for (to, from) in [(a, b), (b, a)] {
                if occ[from] == 0 {
                    continue;
                }
                let mut target = occ.to_vec();
                target[from] -= 1;
                target[to] += 1;
                let target = crate::fock::FockState::new(target);
                // Moves beyond the occupation cap leave the truncated space.
                if let Some(row) = basis.index_of(&target) {
                    let amp = ((occ[to] as f64 + 1.0) * occ[from] as f64).sqrt();
                    h[(row, col)] += Complex64::new(-j * amp, 0.0);
                }
            }
        }
    }
    Ok(HamiltonianMatrix { basis: Arc::clone(basis), matrix: h })
}

/// Connected components of the nonzero off-diagonal pattern containing the
/// seeds, in order of first appearance.
pub fn connected_blocks(h: &HamiltonianMatrix, seeds: &[usize]) -> Result<Vec<Vec<usize>>> {
    let m = h.matrix();
    let n = m.nrows();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &seed in seeds {
        if seed >= n {
            return Err(Error::InvalidArgument(format!("seed {seed} out of range for dim {n}")));
        }
        if owner[seed].is_some() {
            continue;
        }
        let id = blocks.len();
        let mut block = Vec::new();
        let mut queue = VecDeque::from([seed]);
        owner[seed] = Some(id);
        while let Some(i) = queue.pop_front() {
            block.push(i);
            for j in 0..n {
                if owner[j].is_none() && (m[(i, j)] != Complex64::new(0.0, 0.0) || m[(j, i)] != Complex64::new(0.0, 0.0)) {
                    owner[j] = Some(id);
                    queue.push_back(j);
                }
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_basis;

    fn site(c: usize, r: usize) -> SiteIndex {
        SiteIndex::new(c, r)
    }

    fn cphase_graph(j: f64, u: f64, v: f64) -> WalkGraph {
        WalkGraph::new(2)
            .couple(site(0, 1), site(1, 1), j)
            .zz(site(0, 1), site(1, 1), v)
            .with_onsite(u)
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_hop() {
        let basis = Arc::new(enumerate_basis(1, 1).unwrap());
        let h = build_hamiltonian(&WalkGraph::new(1).couple(0usize, 1usize, 0.7), &basis).unwrap();
        assert_eq!(h.matrix()[(0, 0)], c(0.0));
        assert_eq!(h.matrix()[(0, 1)], c(-0.7));
        assert_eq!(h.matrix()[(1, 0)], c(-0.7));
    }

    #[test]
    fn cphase_block() {
        let basis = Arc::new(enumerate_basis(2, 2).unwrap());
        let (j, u, v) = (1.3, -6.0, 0.4);
        let h = build_hamiltonian(&cphase_graph(j, u, v), &basis).unwrap();
        let idx: Vec<usize> =
            ["01;01", "02;00", "00;02"].iter().map(|l| basis.index_of_label(l).unwrap()).collect();
        let s2 = 2f64.sqrt();
        let expect = [[v, -s2 * j, -s2 * j], [-s2 * j, u, 0.0], [-s2 * j, 0.0, u]];
        for a in 0..3 {
            for b in 0..3 {
                assert!((h.matrix()[(idx[a], idx[b])] - c(expect[a][b])).norm() < 1e-15);
            }
        }
        assert_eq!(h.hermiticity_error(), 0.0);
    }

    #[test]
    fn blocks_of_cphase() {
        let basis = Arc::new(enumerate_basis(2, 2).unwrap());
        let h = build_hamiltonian(&cphase_graph(1.0, -7.0, 0.1), &basis).unwrap();
        let s00 = basis.index_of_label("10;10").unwrap();
        let s01 = basis.index_of_label("10;01").unwrap();
        let s11 = basis.index_of_label("11;00").unwrap();
        let blocks = connected_blocks(&h, &[s00, s01]).unwrap();
        assert_eq!(blocks[0], vec![s00]);
        let mut expect = vec![s01, s11];
        expect.sort_unstable();
        assert_eq!(blocks[1], expect);
        let zero = HamiltonianMatrix::from_matrix(Arc::clone(&basis), CMatrix::zeros(10, 10)).unwrap();
        assert_eq!(connected_blocks(&zero, &[3, 3]).unwrap(), vec![vec![3]]);
    }

    #[test]
    fn zero_graph_is_zero() {
        let basis = Arc::new(enumerate_basis(2, 2).unwrap());
        let g = cphase_graph(0.0, 0.0, 0.0).detune(0usize, 0.0);
        assert!(build_hamiltonian(&g, &basis).unwrap().matrix().iter().all(|z| *z == c(0.0)));
    }

    #[test]
    fn bosonic_enhancement() {
        let basis = Arc::new(enumerate_basis(2, 2).unwrap());
        let h = build_hamiltonian(&cphase_graph(1.0, 0.0, 0.0), &basis).unwrap();
        let a = basis.index_of_label("01;01").unwrap();
        let b = basis.index_of_label("02;00").unwrap();
        let d = basis.index_of_label("10;01").unwrap();
        let e = basis.index_of_label("11;00").unwrap();
        assert_eq!(h.matrix()[(a, b)], c(-2f64.sqrt()));
        assert_eq!(h.matrix()[(d, e)], c(-1.0));
    }

    #[test]
    fn rejects_invalid_graphs() {
        let basis = Arc::new(enumerate_basis(2, 2).unwrap());
        let g = WalkGraph::new(2).couple(0usize, 4usize, 1.0);
        assert!(matches!(build_hamiltonian(&g, &basis), Err(Error::InvalidSite { .. })));
        let g = WalkGraph::new(2).couple(0usize, 1usize, 1.0).couple(1usize, 0usize, 1.0);
        assert!(build_hamiltonian(&g, &basis).is_err());
        let g = WalkGraph::new(1);
        assert!(matches!(build_hamiltonian(&g, &basis), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn json_round_trip() {
        let g = cphase_graph(1.0, -6.9, -0.03).detune(2usize, 0.5);
        let back = WalkGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);
        let parsed = WalkGraph::from_json(
            r#"{"n":2,"couplings":[[1,3,1.0]],"detunings":[[0,0.5]],"zz":[[1,3,0.1]],"U":-7}"#,
        )
        .unwrap();
        assert_eq!(parsed.couplings(), &[(1, 3, 1.0)]);
        assert_eq!(parsed.onsite_u(), -7.0);
    }

    #[test]
    fn embedding_maps_columns() {
        let g = cphase_graph(1.0, -7.0, 0.2).detune(0usize, 0.3);
        let e = g.embed(3, &[2, 0]).unwrap();
        assert_eq!(e.couplings(), &[(5, 1, 1.0)]);
        assert_eq!(e.detunings(), &[(4, 0.3)]);
        assert_eq!(e.u_at(5), -7.0);
        assert_eq!(e.u_at(3), 0.0);
    }
}
