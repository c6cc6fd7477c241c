//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use dualrail_core::{CMatrix, Complex64, FockBasis, WalkGraph};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Matrix elements `<r|H|c>` computed term by term as products of
/// single-site matrix elements of `b`, `b^dag` and `n`.
pub fn operator_oracle(graph: &WalkGraph, basis: &FockBasis) -> CMatrix {
    let sites = basis.n_sites();
    // <x|b^dag|y>, <x|b|y> on one site.
    let create = |x: u8, y: u8| if x == y + 1 { (x as f64).sqrt() } else { 0.0 };
    let destroy = |x: u8, y: u8| if y == x + 1 { (y as f64).sqrt() } else { 0.0 };
    let same = |r: &[u8], c: &[u8], skip: &[usize]| (0..sites).all(|s| skip.contains(&s) || r[s] == c[s]);
    CMatrix::from_fn(basis.len(), basis.len(), |ri, ci| {
        let r = basis.state(ri).occupations();
        let col = basis.state(ci).occupations();
        let mut e = 0.0;
        for &(i, j, jj) in graph.couplings() {
            if same(r, col, &[i, j]) {
                e -= jj * (create(r[i], col[i]) * destroy(r[j], col[j]) + create(r[j], col[j]) * destroy(r[i], col[i]));
            }
        }
        if ri == ci {
            for &(s, mu) in graph.detunings() {
                e -= mu * r[s] as f64;
            }
            for &(i, j, v) in graph.zz_edges() {
                e += v * r[i] as f64 * r[j] as f64;
            }
            for (s, &occ) in r.iter().enumerate().take(sites) {
                let n = occ as f64;
                e += 0.5 * graph.u_at(s) * n * (n - 1.0);
            }
        }
        c(e)
    })
}

/// Kronecker-product construction on the full truncated space, read out on
/// the basis states. Only practical for two qubits.
pub fn kron_oracle(graph: &WalkGraph, basis: &FockBasis) -> CMatrix {
    let levels = basis.max_per_site() + 1;
    let sites = basis.n_sites();
    let a = DMatrix::<Complex64>::from_fn(levels, levels, |r, col| if col == r + 1 { c((col as f64).sqrt()) } else { c(0.0) });
    let id = DMatrix::<Complex64>::identity(levels, levels);
    let op = |site: usize, m: &DMatrix<Complex64>| {
        (0..sites).fold(DMatrix::<Complex64>::identity(1, 1), |acc, s| acc.kronecker(if s == site { m } else { &id }))
    };
    let ann: Vec<_> = (0..sites).map(|s| op(s, &a)).collect();
    let num: Vec<_> = ann.iter().map(|b| b.adjoint() * b).collect();
    let full = levels.pow(sites as u32);
    let mut h = DMatrix::<Complex64>::zeros(full, full);
    for &(i, j, jj) in graph.couplings() {
        h -= (ann[i].adjoint() * &ann[j] + ann[j].adjoint() * &ann[i]) * c(jj);
    }
    for &(s, mu) in graph.detunings() {
        h -= &num[s] * c(mu);
    }
    for &(i, j, v) in graph.zz_edges() {
        h += &num[i] * &num[j] * c(v);
    }
    let idf = DMatrix::<Complex64>::identity(full, full);
    for (s, ns) in num.iter().enumerate() {
        h += ns * (ns - &idf) * c(0.5 * graph.u_at(s));
    }
    let flat = |k: usize| basis.state(k).occupations().iter().fold(0usize, |acc, &o| acc * levels + o as usize);
    CMatrix::from_fn(basis.len(), basis.len(), |r, col| h[(flat(r), flat(col))])
}

pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> WalkGraph {
    let sites = 2 * n;
    let mut g = WalkGraph::new(n).with_onsite(rng.gen_range(-8.0..8.0));
    let mut pairs: Vec<(usize, usize)> = (0..sites).flat_map(|a| (a + 1..sites).map(move |b| (a, b))).collect();
    pairs.shuffle(rng);
    let n_couple = rng.gen_range(0..=pairs.len().min(4));
    for &(a, b) in &pairs[..n_couple] {
        g = g.couple(a, b, rng.gen_range(-2.0..2.0));
    }
    let n_zz = rng.gen_range(0..=pairs.len().min(3));
    for &(a, b) in pairs.iter().rev().take(n_zz) {
        g = g.zz(a, b, rng.gen_range(-3.0..3.0));
    }
    for _ in 0..rng.gen_range(0..=3) {
        g = g.detune(rng.gen_range(0..sites), rng.gen_range(-2.0..2.0));
    }
    if rng.gen_bool(0.3) {
        g = g.with_site_onsite(rng.gen_range(0..sites), rng.gen_range(-5.0..5.0));
    }
    g
}

pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    let m = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()) * c(0.5)
}

/// `exp(-i H t)` by scaling and squaring a truncated Taylor series.
pub fn taylor_expm(h: &CMatrix, t: f64) -> CMatrix {
    let a = h * Complex64::new(0.0, -t);
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = a / c(2f64.powi(squarings as i32));
    let dim = h.nrows();
    let mut term = CMatrix::identity(dim, dim);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / c(k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
