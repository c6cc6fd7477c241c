//! Fock space of bosonic walkers on a 2 x n site array.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMatrix, Complex64};

/// Site `(column, row)`; flat index `2 * column + row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteIndex {
    pub column: usize,
    pub row: usize,
}

impl SiteIndex {
    pub fn new(column: usize, row: usize) -> Self {
        debug_assert!(row < 2);
        Self { column, row }
    }

    pub fn flat(self) -> usize {
        2 * self.column + self.row
    }

    pub fn from_flat(flat: usize) -> Self {
        Self { column: flat / 2, row: flat % 2 }
    }
}

/// Occupation vector over the `2n` sites. Equality and hashing use the
/// occupations only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FockState {
    occupations: Vec<u8>,
    total: usize,
}

impl FockState {
    pub fn new(occupations: Vec<u8>) -> Self {
        let total = occupations.iter().map(|&o| o as usize).sum();
        Self { occupations, total }
    }

    pub fn occupations(&self) -> &[u8] {
        &self.occupations
    }

    pub fn occupation(&self, site: usize) -> u8 {
        self.occupations[site]
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn n_columns(&self) -> usize {
        self.occupations.len() / 2
    }

    /// One excitation in every column.
    pub fn is_computational(&self) -> bool {
        self.occupations.chunks(2).all(|c| c[0] + c[1] == 1)
    }

    /// Logical bits of a computational state (row of the excitation per column).
    pub fn bits(&self) -> Option<Vec<u8>> {
        if !self.is_computational() {
            return None;
        }
        Some(self.occupations.chunks(2).map(|c| c[1]).collect())
    }

    /// Ket label such as `10;01`.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

/// Computational state for the given logical bits.
pub fn computational_state(bits: &[u8]) -> FockState {
    let mut occ = vec![0u8; 2 * bits.len()];
    for (col, &b) in bits.iter().enumerate() {
        occ[2 * col + b as usize] = 1;
    }
    FockState::new(occ)
}

impl PartialEq for FockState {
    fn eq(&self, other: &Self) -> bool {
        self.occupations == other.occupations
    }
}

impl Eq for FockState {}

impl Hash for FockState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.occupations.hash(state);
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, col) in self.occupations.chunks(2).enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}{}", col[0], col[1])?;
        }
        Ok(())
    }
}

impl FromStr for FockState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut occ = Vec::new();
        for col in s.split(';') {
            let digits: Vec<u8> = col
                .chars()
                .map(|c| c.to_digit(10).map(|d| d as u8))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::InvalidArgument(format!("bad ket label '{s}'")))?;
            if digits.len() != 2 {
                return Err(Error::InvalidArgument(format!("bad ket label '{s}'")));
            }
            occ.extend(digits);
        }
        Ok(FockState::new(occ))
    }
}

/// Ordered Fock basis over `2 * n_logical` sites.
#[derive(Debug, Clone)]
pub struct FockBasis {
    n_logical: usize,
    max_per_site: usize,
    min_total: usize,
    states: Vec<FockState>,
    index_of: HashMap<FockState, usize>,
    computational_indices: Vec<usize>,
}

/// All states of the `n_logical`-walker sector with at most `max_per_site`
/// bosons per site, lexicographically descending.
pub fn enumerate_basis(n_logical: usize, max_per_site: usize) -> Result<FockBasis> {
    FockBasis::with_sectors(n_logical, n_logical, max_per_site)
}

impl FockBasis {
    /// Union of the sectors with total in `min_total..=n_logical`, highest
    /// sector first. The `n_logical` sector keeps the same indices as in
    /// [`enumerate_basis`].
    pub fn with_sectors(n_logical: usize, min_total: usize, max_per_site: usize) -> Result<Self> {
        if n_logical == 0 {
            return Err(Error::InvalidArgument("n_logical must be at least 1".into()));
        }
        if max_per_site == 0 {
            return Err(Error::InvalidArgument("max_per_site must be at least 1".into()));
        }
        if min_total > n_logical {
            return Err(Error::InvalidArgument(format!(
                "min_total {min_total} exceeds n_logical {n_logical}"
            )));
        }
        let n_sites = 2 * n_logical;
        let mut states = Vec::new();
        for total in (min_total..=n_logical).rev() {
            let mut occ = vec![0u8; n_sites];
            fill(&mut occ, 0, total, max_per_site, &mut states);
        }
        let index_of: HashMap<FockState, usize> =
            states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();

        let mut computational_indices = Vec::with_capacity(1 << n_logical);
        for word in 0..(1usize << n_logical) {
            let bits = word_to_bits(word, n_logical);
            let idx = index_of[&computational_state(&bits)];
            computational_indices.push(idx);
        }
        Ok(Self {
            n_logical,
            max_per_site,
            min_total,
            states,
            index_of,
            computational_indices,
        })
    }

    /// Sectors `0..=n` with occupations capped at 2, used for relaxation studies.
    pub fn with_lower_sectors(n_logical: usize) -> Result<Self> {
        Self::with_sectors(n_logical, 0, 2)
    }

    pub fn n_logical(&self) -> usize {
        self.n_logical
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_logical
    }

    pub fn max_per_site(&self) -> usize {
        self.max_per_site
    }

    pub fn min_total(&self) -> usize {
        self.min_total
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &FockState {
        &self.states[index]
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index_of.get(state).copied()
    }

    /// Index of a ket label such as `10;01`.
    pub fn index_of_label(&self, label: &str) -> Result<usize> {
        let s: FockState = label.parse()?;
        self.index_of(&s)
            .ok_or_else(|| Error::InvalidArgument(format!("state {label} not in basis")))
    }

    /// Computational indices ordered by logical bitstring, qubit 0 most significant.
    pub fn computational_indices(&self) -> &[usize] {
        &self.computational_indices
    }

    pub fn computational_projector(&self) -> SubspaceProjector {
        SubspaceProjector::new(self.len(), self.computational_indices.clone())
    }

    pub fn labels(&self) -> Vec<String> {
        self.states.iter().map(FockState::label).collect()
    }
}

fn fill(occ: &mut [u8], site: usize, remaining: usize, cap: usize, out: &mut Vec<FockState>) {
    if site == occ.len() - 1 {
        if remaining <= cap {
            occ[site] = remaining as u8;
            out.push(FockState::new(occ.to_vec()));
            occ[site] = 0;
        }
        return;
    }
    for o in (0..=remaining.min(cap)).rev() {
        occ[site] = o as u8;
        fill(occ, site + 1, remaining - o, cap, out);
    }
    occ[site] = 0;
}

/// Bits of `word` over `n` qubits, qubit 0 most significant.
pub fn word_to_bits(word: usize, n: usize) -> Vec<u8> {
    (0..n).map(|q| ((word >> (n - 1 - q)) & 1) as u8).collect()
}

/// Bitstring label such as `011`.
pub fn bits_label(bits: &[u8]) -> String {
    bits.iter().map(|b| char::from(b'0' + b)).collect()
}

/// Parses `011` or `0,1,1` into bits.
pub fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .filter(|c| !matches!(c, ',' | ' ' | ';'))
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::InvalidArgument(format!("bad bitstring '{s}'"))),
        })
        .collect()
}

/// Flat basis index of the computational state `bits`.
pub fn computational_index(bits: &[u8], basis: &FockBasis) -> Result<usize> {
    if bits.len() != basis.n_logical() {
        return Err(Error::DimensionMismatch { expected: basis.n_logical(), found: bits.len() });
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
    }
    let word = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    Ok(basis.computational_indices()[word])
}

pub fn is_computational(state: &FockState) -> bool {
    state.is_computational()
}

/// Coordinate projector onto a subset of basis indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceProjector {
    dim: usize,
    selected: Vec<usize>,
}

impl SubspaceProjector {
    pub fn new(dim: usize, selected: Vec<usize>) -> Self {
        Self { dim, selected }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn rank(&self) -> usize {
        self.selected.len()
    }

    /// Full `dim x dim` projector matrix.
    pub fn matrix(&self) -> CMatrix {
        let mut p = CMatrix::zeros(self.dim, self.dim);
        for &i in &self.selected {
            p[(i, i)] = Complex64::new(1.0, 0.0);
        }
        p
    }

    /// `P A P` written as a `rank x rank` matrix in the selected coordinates.
    pub fn restrict(&self, a: &CMatrix) -> Result<CMatrix> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: a.nrows() });
        }
        let r = self.rank();
        Ok(CMatrix::from_fn(r, r, |i, j| a[(self.selected[i], self.selected[j])]))
    }
}
