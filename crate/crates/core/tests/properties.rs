mod common;

use std::sync::Arc;

use dualrail_core::circuits::{compose, gate_from_name, LogicalCircuit, PlacedGate};
use dualrail_core::fock::FockBasis;
use dualrail_core::propagate::{evolve_lindblad, propagator, PropagatorCache};
use dualrail_core::{build_hamiltonian, enumerate_basis, CMatrix, DensityMatrix, LindbladOperatorSet, StateVector, WalkGraph};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(seed: u64, n: usize) -> WalkGraph {
    common::random_graph(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn identity_error(u: &CMatrix) -> f64 {
    common::max_abs_diff(&u.ad_mul(u), &CMatrix::identity(u.nrows(), u.nrows()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_matches_operator_oracle(seed in any::<u64>(), n in 1usize..=3) {
        let b = enumerate_basis(n, 2).unwrap();
        let g = graph(seed, n);
        let h = build_hamiltonian(&g, &Arc::new(b.clone())).unwrap();
        prop_assert!(common::max_abs_diff(h.matrix(), &common::operator_oracle(&g, &b)) < 1e-12);
        prop_assert!(h.hermiticity_error() < 1e-12);
    }

    #[test]
    fn kron_and_elementwise_oracles_agree(seed in any::<u64>()) {
        let b = enumerate_basis(2, 2).unwrap();
        let g = graph(seed, 2);
        prop_assert!(common::max_abs_diff(&common::kron_oracle(&g, &b), &common::operator_oracle(&g, &b)) < 1e-12);
    }

    #[test]
    fn propagators_are_unitary_and_compose(seed in any::<u64>(), t1 in 0.0f64..4.0, t2 in 0.0f64..4.0) {
        let b = Arc::new(enumerate_basis(2, 2).unwrap());
        let h = build_hamiltonian(&graph(seed, 2), &b).unwrap();
        let (u1, u2) = (propagator(&h, t1).unwrap(), propagator(&h, t2).unwrap());
        prop_assert!(identity_error(&u1) < 1e-10);
        prop_assert!(common::max_abs_diff(&propagator(&h, t1 + t2).unwrap(), &(u2 * u1)) < 1e-9);
    }

    #[test]
    fn eigen_propagator_matches_series(seed in any::<u64>(), dim in 1usize..12, t in 0.0f64..3.0) {
        let h = common::random_hermitian(&mut ChaCha8Rng::seed_from_u64(seed), dim);
        let cache = PropagatorCache::from_matrix(&h).unwrap();
        prop_assert!(common::max_abs_diff(&cache.propagator(t), &common::taylor_expm(&h, t)) < 1e-9);
    }

    #[test]
    fn walker_number_is_conserved(seed in any::<u64>()) {
        let b = Arc::new(FockBasis::with_lower_sectors(2).unwrap());
        let h = build_hamiltonian(&graph(seed, 2), &b).unwrap();
        for r in 0..b.len() {
            for c in 0..b.len() {
                if b.state(r).total() != b.state(c).total() {
                    prop_assert_eq!(h.matrix()[(r, c)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn graph_json_round_trip(seed in any::<u64>(), n in 1usize..=3) {
        let g = graph(seed, n);
        let back = WalkGraph::from_json(&g.to_json().unwrap()).unwrap();
        let b = Arc::new(enumerate_basis(n, 2).unwrap());
        let (h1, h2) = (build_hamiltonian(&g, &b).unwrap(), build_hamiltonian(&back, &b).unwrap());
        prop_assert!(common::max_abs_diff(h1.matrix(), h2.matrix()) == 0.0);
    }

    #[test]
    fn basis_index_round_trip(n in 1usize..=4, cap in 1usize..=3) {
        let b = enumerate_basis(n, cap).unwrap();
        for i in 0..b.len() {
            prop_assert_eq!(b.index_of(b.state(i)), Some(i));
            prop_assert_eq!(b.state(i).total(), n);
        }
    }

    #[test]
    fn closed_lindblad_matches_unitary(seed in any::<u64>(), t in 0.1f64..3.0) {
        let b = Arc::new(FockBasis::with_lower_sectors(2).unwrap());
        let h = build_hamiltonian(&graph(seed, 2), &b).unwrap();
        let psi = StateVector::computational(Arc::clone(&b), &[0, 1]).unwrap();
        let rho = DensityMatrix::pure(&psi);
        let out = evolve_lindblad(&h, &LindbladOperatorSet::new(b.len()), &rho, t, t / 20.0).unwrap();
        let (_, last) = out.last().unwrap();
        let u = propagator(&h, t).unwrap();
        let want = &u * rho.matrix() * u.adjoint();
        prop_assert!(common::max_abs_diff(last.matrix(), &want) < 1e-7);
    }

    #[test]
    fn composition_is_associative(a in 0usize..4, bidx in 0usize..4, c in 0usize..4) {
        let names = ["h", "x", "z", "cz"];
        let layer = |i: usize| {
            let s = gate_from_name(names[i], &Default::default()).unwrap();
            let targets = if s.n_logical() == 2 { vec![0, 1] } else { vec![1] };
            vec![PlacedGate { schedule: s, targets }]
        };
        let basis = Arc::new(enumerate_basis(2, 2).unwrap());
        let first = LogicalCircuit::new(2).with_step(layer(a)).unwrap().with_step(layer(bidx)).unwrap();
        let second = LogicalCircuit::new(2).with_step(layer(c)).unwrap();
        let whole = compose(&first.then(&second).unwrap(), &basis).unwrap();
        let split = compose(&second, &basis).unwrap() * compose(&first, &basis).unwrap();
        prop_assert!(common::max_abs_diff(&whole, &split) < 1e-10);
        prop_assert!(identity_error(&whole) < 1e-10);
    }
}
