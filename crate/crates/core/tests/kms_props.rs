use std::collections::BTreeSet;

use artin_kms::kms::{
    check_subinvariance, check_subinvariance_general, critical_beta, mobius_invert, s_beta_solve, t_beta, wold,
    JoinTable, TraceType,
};
use artin_kms::setalgebra::{atom_weights, complement_in, cone, measure, Cell, CellSet};
use artin_kms::transfer::{from_kgraph, from_local_maps, KGraphModel, LocalMapModel};
use artin_kms::{SimpleGraph, Tolerances, TraceVec, TransferSystem, WeightMap};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Vertices with an edge act by polynomials in one shared matrix; isolated
/// vertices act independently.
fn random_system(seed: u64, max_generators: usize) -> TransferSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=max_generators);
    let d = rng.gen_range(1..=3);
    let mut edges = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            if rng.gen_bool(0.5) {
                edges.push((a, b));
            }
        }
    }
    let matrix = |rng: &mut ChaCha8Rng| DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..1.0));
    let base = matrix(&mut rng);
    let operators = (0..k)
        .map(|g| {
            if edges.iter().any(|&(a, b)| a == g || b == g) {
                DMatrix::identity(d, d) * rng.gen_range(0.0..1.0) + &base * rng.gen_range(0.1..1.0)
            } else {
                matrix(&mut rng)
            }
        })
        .collect();
    let weights = WeightMap::new((0..k).map(|_| rng.gen_range(1.2..4.0)).collect()).unwrap();
    TransferSystem::new(SimpleGraph::from_index_edges(k, &edges).unwrap(), d, operators, weights, None).unwrap()
}

fn random_trace(seed: u64, d: usize) -> TraceVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    TraceVec::new((0..d).map(|_| rng.gen_range(0.1..1.0)).collect()).unwrap()
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// A trace that is subinvariant at β: the Gibbs trace of a random `τ₀`, taken
/// well above the critical value.
fn gibbs_trace(sys: &TransferSystem, seed: u64) -> (f64, TraceVec) {
    let beta = critical_beta(sys, &tol()).unwrap().beta_c.unwrap_or(0.0) + 1.5;
    let tau0 = random_trace(seed, sys.dim());
    (beta, s_beta_solve(sys, beta, &tau0, &tol()).unwrap().trace)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn apply_fp_depends_only_on_the_element(seed in any::<u64>(), word in proptest::collection::vec(0usize..3, 0..6)) {
        let sys = random_system(seed, 3);
        let word: Vec<usize> = word.into_iter().filter(|&g| g < sys.generators()).collect();
        let p = sys.monoid().normalize(&word).unwrap();
        let tau = random_trace(seed, sys.dim());
        // F_p = F_{w_1} ⋯ F_{w_n} for any representative word
        let mut direct = DMatrix::identity(sys.dim(), sys.dim());
        for &g in &word {
            direct *= sys.operator(g);
        }
        let expected = direct * tau.vector();
        let got = sys.apply_fp(&p, &tau).unwrap();
        prop_assert!((got.vector() - expected).amax() <= 1e-12 * (1.0 + got.mass()));
    }

    #[test]
    fn kgraph_operators_are_vertex_matrices(a in proptest::collection::vec(0u64..3, 4), n in 0usize..5) {
        let m = vec![vec![a[0], a[1]], vec![a[2], a[3]]];
        let model = KGraphModel { vertices: 2, matrices: vec![m.clone()] };
        let sys = from_kgraph(&model, WeightMap::uniform(1, 2.0).unwrap()).unwrap();
        let p = sys.monoid().normalize(&vec![0; n]).unwrap();
        let power = model.matrix(0).pow(n as u32);
        prop_assert_eq!(sys.operator_for(&p).unwrap(), power);
    }

    #[test]
    fn local_map_mass_counts_preimages(h in proptest::collection::vec(0usize..4, 4), values in proptest::collection::vec(0.0f64..1.0, 4)) {
        let hit: BTreeSet<usize> = h.iter().copied().collect();
        prop_assume!(hit.len() == 4);
        let model = LocalMapModel { states: 4, maps: vec![h.clone()] };
        let sys = from_local_maps(&model, WeightMap::uniform(1, 2.0).unwrap()).unwrap();
        let tau = TraceVec::new(values.clone()).unwrap();
        let image = sys.apply_fp(&sys.monoid().generator(0), &tau).unwrap();
        for w in 0..4 {
            prop_assert_eq!(image.entries()[w], values[h[w]]);
        }
    }

    #[test]
    fn measure_is_additive(seed in any::<u64>(), word in proptest::collection::vec(0usize..3, 0..4)) {
        let sys = random_system(seed, 3);
        let m = sys.monoid();
        let word: Vec<usize> = word.into_iter().filter(|&g| g < sys.generators()).collect();
        let p = m.normalize(&word).unwrap();
        let (beta, tau) = gibbs_trace(&sys, seed);
        let whole = measure(&sys, &CellSet::whole(), &tau, beta).unwrap();
        prop_assert!((&whole - tau.vector()).amax() <= 1e-12);
        let inside = cone(&p);
        let outside = complement_in(m, &CellSet::whole(), &inside).unwrap();
        let parts = measure(&sys, &inside, &tau, beta).unwrap() + measure(&sys, &outside, &tau, beta).unwrap();
        prop_assert!((parts - whole).amax() <= 1e-9 * (1.0 + tau.mass()));
    }

    #[test]
    fn subinvariant_traces_give_nonnegative_cells(seed in any::<u64>(), word in proptest::collection::vec(0usize..3, 0..4), carve in 0u8..8) {
        let sys = random_system(seed, 3);
        let word: Vec<usize> = word.into_iter().filter(|&g| g < sys.generators()).collect();
        let p = sys.monoid().normalize(&word).unwrap();
        let carve: BTreeSet<usize> = (0..sys.generators()).filter(|g| carve >> g & 1 == 1).collect();
        let tau = random_trace(seed, sys.dim());
        let beta = 2.0;
        let report = check_subinvariance(&sys, &tau, beta, &tol()).unwrap();
        prop_assume!(report.pass);
        let cell = CellSet::from_disjoint(vec![Cell::new(p, carve)]);
        let value = measure(&sys, &cell, &tau, beta).unwrap();
        prop_assert!(value.min() >= -tol().positivity * tau.mass());
    }

    #[test]
    fn gibbs_solution_inverts_t_beta(seed in any::<u64>()) {
        let sys = random_system(seed, 3);
        let beta = critical_beta(&sys, &tol()).unwrap().beta_c.unwrap_or(0.0) + 0.5;
        let tau0 = random_trace(seed, sys.dim());
        let solved = s_beta_solve(&sys, beta, &tau0, &tol()).unwrap();
        let back = t_beta(&sys, beta) * solved.trace.vector();
        prop_assert!((back - tau0.vector()).amax() <= 1e-9);
        prop_assert!(solved.gap <= solved.series.tail_bound + 1e-8 * solved.trace.mass().max(1.0));
    }

    #[test]
    fn clique_and_general_checkers_agree(seed in any::<u64>(), beta in 0.2f64..3.0) {
        let sys = random_system(seed, 3);
        let tau = random_trace(seed, sys.dim());
        let clique = check_subinvariance(&sys, &tau, beta, &tol()).unwrap();
        let general = check_subinvariance_general(&sys, &tau, beta, 2, 3, &tol()).unwrap();
        prop_assert_eq!(clique.pass, general.pass);
    }

    #[test]
    fn above_critical_traces_are_finite_type(seed in any::<u64>()) {
        let sys = random_system(seed, 3);
        let (beta, tau) = gibbs_trace(&sys, seed);
        let split = wold(&sys, &tau, beta, &tol()).unwrap();
        prop_assert_eq!(split.trace_type, TraceType::Finite);
        prop_assert!(split.tau_inf.entries().iter().all(|x| x.abs() <= 1e-9));
    }

    #[test]
    fn atoms_account_for_the_finite_part(seed in any::<u64>()) {
        let sys = random_system(seed, 2);
        let beta = critical_beta(&sys, &tol()).unwrap().beta_c.unwrap_or(0.0) + 3.0;
        let tau = s_beta_solve(&sys, beta, &random_trace(seed, sys.dim()), &tol()).unwrap().trace;
        let atoms = atom_weights(&sys, &tau, beta, 8, &tol()).unwrap();
        let finite = wold(&sys, &tau, beta, &tol()).unwrap().tau_f.mass();
        let eps = 1e-9 * finite.max(1.0);
        prop_assert!(atoms.total <= finite + eps);
        prop_assert!(finite - atoms.total <= 2.0 * atoms.tail_bound.unwrap_or(f64::INFINITY) + eps);
    }

    #[test]
    fn mobius_inversion_round_trips(sets in proptest::collection::btree_set(0u64..16, 1..10), values in proptest::collection::vec(-1.0f64..1.0, 16)) {
        let sets: Vec<u64> = sets.into_iter().collect();
        let table = JoinTable::from_sets(&sets);
        prop_assume!(table.is_ok());
        let table = table.unwrap();
        let f: Vec<f64> = values[..table.len()].to_vec();
        let result = mobius_invert(&table, &f).unwrap();
        prop_assert!(result.roundtrip_error <= 1e-12);
        // independent check of f(p) = Σ_{q ≥ p} f̂(q)
        for (p, &a) in sets.iter().enumerate() {
            let total: f64 = sets.iter().enumerate().filter(|(_, &b)| a & b == a).map(|(q, _)| result.f_hat[q]).sum();
            prop_assert!((total - f[p]).abs() <= 1e-12);
        }
    }
}
