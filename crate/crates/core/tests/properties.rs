//! Randomized invariants across enumeration, kinetics and fitting.

use std::sync::OnceLock;

use num::ToPrimitive;
use proptest::prelude::*;

use crn_core::analysis::DbClass;
use crn_core::data::{time_grid, ObservationSet};
use crn_core::enumeration::{
    binom, count_mechanisms, enumerate_mechanisms, enumerate_mechanisms_range, unrank_subset,
    EnumerationFilter, SubsetIter,
};
use crn_core::fitting::{db_violations, equilibrium_basis, fit, FitProblem, StartSpec};
use crn_core::kinetics::{sample_with_noise, KineticSystem, NoiseSpec};
use crn_core::mechanism::{Mechanism, RateAssignment};
use crn_core::ode::OdeOptions;

fn mechanism_at(m: usize, r: usize, rank: u128) -> Mechanism {
    enumerate_mechanisms_range(m, r, EnumerationFilter::default(), rank, 1)
        .unwrap()
        .next()
        .unwrap()
}

fn arb_mechanism() -> impl Strategy<Value = Mechanism> {
    prop::sample::select(vec![(2usize, 1usize), (2, 2), (3, 1), (3, 2), (3, 3)]).prop_flat_map(
        |(m, r)| {
            let total = count_mechanisms(m as u64, r as u64, false)
                .to_u128()
                .unwrap();
            (0..total).prop_map(move |rank| mechanism_at(m, r, rank))
        },
    )
}

/// CDB mechanisms with two or three species, materialized once.
fn cdb_pool() -> &'static [Mechanism] {
    static POOL: OnceLock<Vec<Mechanism>> = OnceLock::new();
    POOL.get_or_init(|| {
        let filter = EnumerationFilter {
            db_class: Some(DbClass::Cdb),
            ..Default::default()
        };
        let mut pool = Vec::new();
        for (m, r) in [(2usize, 2usize), (3, 2)] {
            pool.extend(enumerate_mechanisms(m, r, filter).unwrap());
        }
        pool
    })
}

fn exact_set(mech: &Mechanism, rates: &RateAssignment, c0: &[f64], t_end: f64) -> ObservationSet {
    let sys = KineticSystem::new(mech, rates).unwrap();
    let grid = time_grid(t_end, t_end / 10.0).unwrap();
    let traj = sys
        .integrate(c0, t_end, &grid, &OdeOptions::default())
        .unwrap();
    ObservationSet {
        times: traj.times.clone(),
        species: traj.names.clone(),
        values: traj
            .states
            .iter()
            .map(|row| row.iter().copied().map(Some).collect())
            .collect(),
        init: None,
        time_label: None,
        value_label: None,
    }
}

proptest! {
    #[test]
    fn serialize_parse_roundtrip(mech in arb_mechanism()) {
        let text = mech.serialize();
        let parsed = Mechanism::parse(&text).unwrap();
        prop_assert_eq!(parsed.r(), mech.r());
        prop_assert_eq!(parsed.canonical_id(), mech.canonical_id());
        prop_assert_eq!(parsed.serialize(), text);
    }

    #[test]
    fn canonical_id_ignores_step_order(mech in arb_mechanism(), shuffled in Just(()).prop_perturb(|_, mut rng| rng.random::<u64>())) {
        let mut steps: Vec<&str> = Vec::new();
        let text = mech.serialize();
        steps.extend(text.split("; "));
        // deterministic pseudo-shuffle driven by the perturbation seed
        let n = steps.len();
        let mut state = shuffled;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            steps.swap(i, j);
        }
        let permuted = steps.join("; ");
        let reparsed = Mechanism::parse_with_species(&permuted, mech.species_names()).unwrap();
        prop_assert_eq!(reparsed.canonical_id(), mech.canonical_id());
    }

    #[test]
    fn db_parametrization_residuals(
        idx in 0usize..100_000,
        ln_kp in prop::collection::vec(-2.0f64..2.0, 4),
        nu in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let pool = cdb_pool();
        let mech = &pool[idx % pool.len()];
        let basis = equilibrium_basis(mech);
        let r = mech.r();
        let k_plus: Vec<f64> = ln_kp[..r].iter().map(|v| v.exp()).collect();
        let k_minus: Vec<f64> = (0..r)
            .map(|j| {
                let ln_keq: f64 = basis
                    .iter()
                    .zip(&nu)
                    .map(|(b, n)| b[j] as f64 * n)
                    .sum();
                (ln_kp[j] - ln_keq).exp()
            })
            .collect();
        let rates = RateAssignment::new(mech, k_plus, k_minus).unwrap();
        for (condition, violation) in db_violations(mech, &rates).unwrap() {
            prop_assert!(
                violation < 1e-12,
                "violation {:.3e} on {}",
                violation,
                condition.render()
            );
        }
    }

    #[test]
    fn linear_step_matches_closed_form(
        k in 0.01f64..2.0,
        x0 in 0.1f64..5.0,
        t_end in 0.5f64..10.0,
    ) {
        let mech = Mechanism::parse("X -> Y").unwrap();
        let rates = RateAssignment::new(&mech, vec![k], vec![0.0]).unwrap();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let grid = time_grid(t_end, t_end / 7.0).unwrap();
        let traj = sys
            .integrate(&[x0, 0.0], t_end, &grid, &OdeOptions::default())
            .unwrap();
        for (t, row) in traj.times.iter().zip(&traj.states) {
            let expect = x0 * (-k * t).exp();
            prop_assert!(
                (row[0] - expect).abs() <= 1e-6 * x0,
                "x({}) = {} vs {}",
                t,
                row[0],
                expect
            );
            prop_assert!((row[0] + row[1] - x0).abs() <= 1e-9 * x0);
        }
    }

    #[test]
    fn noisy_sampling_is_seeded_and_nonnegative(
        sigma in 0.001f64..0.2,
        seed in any::<u64>(),
    ) {
        let mech = Mechanism::parse("X <=> Y").unwrap();
        let rates = RateAssignment::new(&mech, vec![0.7], vec![0.3]).unwrap();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let grid = time_grid(4.0, 0.5).unwrap();
        let traj = sys
            .integrate(&[1.5, 0.5], 4.0, &grid, &OdeOptions::default())
            .unwrap();
        let noise = NoiseSpec::new(sigma, seed).unwrap();
        let a = sample_with_noise(&traj, &noise);
        let b = sample_with_noise(&traj, &noise);
        prop_assert_eq!(&a.values, &b.values, "same seed must reproduce the draw");
        for row in &a.values {
            for v in row.iter().flatten() {
                prop_assert!(*v >= 0.0, "negative sample {}", v);
            }
        }
    }

    #[test]
    fn subset_unranking_is_consistent(
        n in 1usize..28,
        r in 1usize..6,
        rank_seed in any::<u64>(),
    ) {
        prop_assume!(r <= n);
        let total = binom(n as u64, r as u64).to_u128().unwrap();
        let rank = rank_seed as u128 % total;
        let subset = unrank_subset(n, r, rank).unwrap();
        prop_assert_eq!(subset.len(), r);
        prop_assert!(subset.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(*subset.last().unwrap() < n);

        let direct: Vec<Vec<usize>> = SubsetIter::from_rank(n, r, rank).take(3).collect();
        let skipped: Vec<Vec<usize>> = SubsetIter::new(n, r).skip(rank as usize).take(3).collect();
        prop_assert_eq!(direct, skipped);
        prop_assert!(unrank_subset(n, r, total).is_none());
    }

    #[test]
    fn integration_conserves_total_mass(
        flat in prop::collection::vec(0.05f64..2.0, 4),
    ) {
        let mech = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let rates = RateAssignment::from_flat(&mech, &flat).unwrap();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let grid = time_grid(8.0, 0.8).unwrap();
        let traj = sys
            .integrate(&[2.0, 3.0], 8.0, &grid, &OdeOptions::default())
            .unwrap();
        for row in &traj.states {
            prop_assert!((row.iter().sum::<f64>() - 5.0).abs() < 1e-6);
        }
    }
}

proptest! {
    // two full fits per case
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fit_is_time_rescaling_equivariant(
        k in 0.2f64..1.0,
        scale in 1.5f64..4.0,
    ) {
        let mech = Mechanism::parse("X -> Y").unwrap();
        let truth = RateAssignment::new(&mech, vec![k], vec![0.0]).unwrap();
        let data = exact_set(&mech, &truth, &[2.0, 0.0], 5.0);

        let problem = FitProblem::new(mech.clone(), data.clone());
        let base = fit(&problem, &StartSpec::default()).unwrap();
        prop_assert!(base.converged);
        prop_assert!((base.estimates[0] - k).abs() < 1e-6 * k);

        let mut slowed = data;
        for t in &mut slowed.times {
            *t *= scale;
        }
        let problem = FitProblem::new(mech, slowed);
        let result = fit(&problem, &StartSpec::default()).unwrap();
        prop_assert!(result.converged);
        let expect = k / scale;
        prop_assert!(
            (result.estimates[0] - expect).abs() < 1e-6 * expect,
            "estimate {} vs {}",
            result.estimates[0],
            expect
        );
    }
}
