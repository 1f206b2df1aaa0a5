//! Cross-module properties of the full pipeline.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mvred::linalg::{random_matrix, random_vector};
use mvred::oracle::{wrap_matrix, wrap_vector};
use mvred::reduction::padded_dimension;
use mvred::{
    FailureMode, NoisySolver, PrimeField, QueryLedger, Reduction, ReductionConfig, RunContext,
    SolverProfile, Source,
};

fn field(p: u64) -> PrimeField {
    PrimeField::new(p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // With a perfect solver every stage succeeds first time, so the counts
    // are closed forms: 4 ALG calls per block, 2 matrix reads per entry (one
    // per alg4 branch) and k reads of each entry of v.
    #[test]
    fn perfect_solver_query_counts(p in prop::sample::select(vec![2u64, 3, 5, 7]), k in 1usize..4, d in 1usize..4, seed: u64) {
        let f = field(p);
        let n = k * d;
        let cfg = ReductionConfig { alpha: 1.0, k: Some(k), ..ReductionConfig::default() };
        let solver = NoisySolver::new(SolverProfile::Uniform { alpha: 1.0 });
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(n, n, f, &mut rng).unwrap();
        let v = random_vector(n, f, &mut rng).unwrap();
        let ledger = QueryLedger::new();
        let mut ctx = RunContext::new(ledger.clone());
        let out = red.alg_prime(&wrap_matrix(m.clone(), &ledger), &wrap_vector(v.clone(), &ledger), &mut ctx, &mut rng).unwrap();
        prop_assert_eq!(out, Some(m.matvec(&v).unwrap()));
        let snap = ledger.snapshot();
        prop_assert_eq!(snap.solver, 4 * (k * k) as u64);
        prop_assert_eq!(snap.matrix, 2 * (n * n) as u64);
        prop_assert_eq!(snap.vector, (k * n) as u64);
        prop_assert_eq!(ctx.stats.blocks.len(), k * k);
        // Per block: four n-row checks after ALG calls, two d-row checks in alg3.
        let per_block = 4 * cfg.verifier.paper_cost(n) + 2 * cfg.verifier.paper_cost(d);
        prop_assert_eq!(snap.verifier_charged, (k * k) as u64 * per_block);
    }

    // Padding never changes the answer and never charges padded cells.
    #[test]
    fn padded_instances(n in 1usize..7, k in 1usize..4, seed: u64) {
        let f = field(5);
        let cfg = ReductionConfig { alpha: 1.0, k: Some(k), ..ReductionConfig::default() };
        let solver = NoisySolver::new(SolverProfile::Uniform { alpha: 1.0 });
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(n, n, f, &mut rng).unwrap();
        let v = random_vector(n, f, &mut rng).unwrap();
        let ledger = QueryLedger::new();
        let mut ctx = RunContext::new(ledger.clone());
        let out = red.alg_prime(&wrap_matrix(m.clone(), &ledger), &wrap_vector(v.clone(), &ledger), &mut ctx, &mut rng).unwrap();
        prop_assert_eq!(out, Some(m.matvec(&v).unwrap()));
        let np = padded_dimension(n, k);
        prop_assert!(np >= n && np % k == 0 && np - n < k);
        prop_assert_eq!(ledger.count(Source::Matrix), 2 * (n * n) as u64);
        prop_assert_eq!(ledger.count(Source::Vector), (k * n) as u64);
    }

    // Whatever the solver does, a returned vector is the true product when
    // verification is exact.
    #[test]
    fn exact_verification_never_returns_wrong(alpha in 0.05f64..1.0, seed: u64, perturb: bool) {
        let f = field(3);
        let mut cfg = ReductionConfig { alpha, k: Some(2), c1: 4.0, c2: 4.0, ..ReductionConfig::default() };
        cfg.verifier.mode = mvred::VerifierMode::Exact;
        let mode = if perturb { FailureMode::PerturbOne } else { FailureMode::UniformWrong };
        let solver = NoisySolver::new(SolverProfile::Uniform { alpha }).with_failure_mode(mode);
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(4, 4, f, &mut rng).unwrap();
        let v = random_vector(4, f, &mut rng).unwrap();
        let ledger = QueryLedger::new();
        let mut ctx = RunContext::new(ledger.clone());
        if let Some(w) = red.alg_prime(&wrap_matrix(m.clone(), &ledger), &wrap_vector(v.clone(), &ledger), &mut ctx, &mut rng).unwrap() {
            prop_assert_eq!(w, m.matvec(&v).unwrap());
        }
        prop_assert_eq!(ledger.count(Source::Solver), ctx.stats.alg1_iters);
    }
}

#[test]
fn planted_inputs_defeat_the_bare_solver_but_not_the_reduction() {
    let f = field(5);
    let profile = SolverProfile::PlantedAdversarial {
        seed: 3,
        bad_fraction: 0.5,
        alpha: 0.25,
    };
    let solver = NoisySolver::new(profile.clone());
    let cfg = ReductionConfig {
        alpha: 0.25,
        k: Some(2),
        ..ReductionConfig::default()
    };
    let red = Reduction::new(&solver, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut found = 0;
    while found < 20 {
        let m = random_matrix(6, 6, f, &mut rng).unwrap();
        let v = random_vector(6, f, &mut rng).unwrap();
        if !profile.is_planted_bad(&m, &v) {
            continue;
        }
        found += 1;
        let ledger = QueryLedger::new();
        let (um, uv) = (
            wrap_matrix(m.clone(), &ledger),
            wrap_vector(v.clone(), &ledger),
        );
        for _ in 0..20 {
            assert_ne!(
                solver.invoke(&um, &uv, &ledger, &mut rng).unwrap(),
                m.matvec(&v).unwrap()
            );
        }
        let mut ctx = RunContext::new(ledger.clone());
        assert_eq!(
            red.alg_prime(&um, &uv, &mut ctx, &mut rng).unwrap(),
            Some(m.matvec(&v).unwrap())
        );
    }
}
