//! Stand-alone checks of the sampler property and of the verifier contract.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::linalg::{random_matrix, random_vector, FpVector};
use crate::oracle::{wrap_matrix, wrap_vector, QueryLedger, Source};
use crate::sampler::{
    check_sampler, lemma_condition, lemma_min_density, DenseSet, QueryGraph, SamplerCheck,
};
use crate::solver::FailureMode;
use crate::stats::three_sigma_bound;
use crate::verify::{verify_product, CostAccounting, VerifierConfig, VerifierMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub base_size: u64,
    pub k: usize,
    pub c: f64,
    pub delta: f64,
    /// Fixed set density; `None` draws each set's density uniformly from
    /// `[lemma_min_density, 1]`.
    pub density: Option<f64>,
    pub sets: usize,
    pub left_samples: u64,
    pub per_left: u64,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            base_size: 2,
            k: 8,
            c: 0.95,
            delta: 0.99,
            density: None,
            sets: 20,
            left_samples: 2000,
            per_left: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerSetResult {
    pub set_seed: u64,
    pub declared_density: f64,
    pub check: SamplerCheck,
    /// `violation_fraction ≤ δ + 3σ`, σ the binomial sd at `δ`.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerReport {
    pub params: SamplerParams,
    pub min_density: f64,
    pub sets: Vec<SamplerSetResult>,
    pub passing: usize,
}

/// Checks the sampler property of the direct-product query graph on a batch
/// of pseudorandom dense sets, each satisfying the lemma's density condition.
pub fn sampler_campaign(params: &SamplerParams) -> Result<SamplerReport> {
    let graph = QueryGraph::new(params.k, params.base_size)?;
    if params.sets == 0 {
        return Err(Error::InvalidParameter("sets must be at least 1".into()));
    }
    let min_density = lemma_min_density(params.k, params.c, params.delta);
    if min_density > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "no density satisfies the lemma at k = {}, c = {}, delta = {}: need ε ≥ {min_density:.4}",
            params.k, params.c, params.delta
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut sets = Vec::with_capacity(params.sets);
    for _ in 0..params.sets {
        let eps = match params.density {
            Some(d) => d,
            None => rng.gen_range(min_density..=1.0),
        };
        if !lemma_condition(params.k, params.c, params.delta, eps) {
            return Err(Error::InvalidParameter(format!(
                "density {eps} violates the lemma condition (minimum {min_density:.4})"
            )));
        }
        let set_seed = rng.gen();
        let set = DenseSet::random(set_seed, eps);
        let check = check_sampler(
            &graph,
            &set,
            params.c,
            params.delta,
            params.left_samples,
            params.per_left,
            &mut rng,
        )?;
        let passed =
            check.violation_fraction <= three_sigma_bound(params.delta, params.left_samples);
        sets.push(SamplerSetResult {
            set_seed,
            declared_density: eps,
            check,
            passed,
        });
    }
    let passing = sets.iter().filter(|s| s.passed).count();
    Ok(SamplerReport {
        params: *params,
        min_density,
        sets,
        passing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub modulus: u64,
    pub rows: usize,
    pub cols: usize,
    pub epsilon: f64,
    pub mode: VerifierMode,
    pub accounting: CostAccounting,
    pub failure_mode: FailureMode,
    pub trials: u64,
    pub seed: u64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            modulus: 5,
            rows: 4,
            cols: 4,
            epsilon: 0.1,
            mode: VerifierMode::Probabilistic,
            accounting: CostAccounting::PaperModel,
            failure_mode: FailureMode::UniformWrong,
            trials: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub params: VerifyParams,
    pub rounds: usize,
    pub completeness_failures: u64,
    pub false_accepts: u64,
    pub false_accept_rate: f64,
    /// `ε + 3σ` at the trial count.
    pub false_accept_bound: f64,
    /// Charged cost of every call, if it was the same for all calls.
    pub charged_per_call: Option<u64>,
    /// `⌈r^{3/2}·⌈log₂(1/ε)⌉⌉` under the paper model.
    pub expected_per_call: u64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.completeness_failures == 0
            && self.false_accept_rate <= self.false_accept_bound
            && self.charged_per_call == Some(self.expected_per_call)
    }
}

fn wrong_claim<R: Rng + ?Sized>(
    truth: &FpVector,
    mode: FailureMode,
    rng: &mut R,
) -> Result<FpVector> {
    let field = truth.field();
    let (r, p) = (truth.len(), field.modulus());
    match mode {
        FailureMode::UniformWrong => loop {
            let w = random_vector(r, field, rng)?;
            if &w != truth {
                return Ok(w);
            }
        },
        FailureMode::PerturbOne => {
            let mut raw = truth.raw().to_vec();
            let i = rng.gen_range(0..r);
            raw[i] = ((raw[i] as u64 + rng.gen_range(1..p as u64)) % p as u64) as u32;
            Ok(FpVector::from_raw(field, raw))
        }
    }
}

/// Runs `trials` correct claims and `trials` wrong claims through the
/// verifier and reports completeness, soundness and charged cost.
pub fn verify_bench(params: &VerifyParams) -> Result<VerifyReport> {
    let field = PrimeField::new(params.modulus)?;
    if params.rows == 0 || params.cols == 0 || params.trials == 0 {
        return Err(Error::InvalidParameter(
            "rows, cols and trials must be positive".into(),
        ));
    }
    let cfg = VerifierConfig {
        epsilon: params.epsilon,
        mode: params.mode,
        accounting: params.accounting,
    };
    cfg.validate()?;
    let expected_per_call = match params.accounting {
        CostAccounting::PaperModel => cfg.paper_cost(params.rows),
        CostAccounting::Actual => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (mut completeness_failures, mut false_accepts) = (0, 0);
    let mut cost: Option<Option<u64>> = None;
    let mut record = |c: u64| {
        cost = Some(match cost {
            None => Some(c),
            Some(Some(prev)) if prev == c => Some(c),
            _ => None,
        })
    };
    for _ in 0..params.trials {
        let m = random_matrix(params.rows, params.cols, field, &mut rng)?;
        let v = random_vector(params.cols, field, &mut rng)?;
        let truth = m.matvec(&v)?;
        let wrong = wrong_claim(&truth, params.failure_mode, &mut rng)?;
        for (w, correct) in [(truth, true), (wrong, false)] {
            let ledger = QueryLedger::new();
            let um = wrap_matrix(m.clone(), &ledger);
            let uv = wrap_vector(v.clone(), &ledger);
            let accepted = verify_product(&um, &uv, &w, &cfg, &ledger, &mut rng)?.accepted();
            match (correct, accepted) {
                (true, false) => completeness_failures += 1,
                (false, true) => false_accepts += 1,
                _ => {}
            }
            if params.accounting == CostAccounting::PaperModel {
                record(ledger.count(Source::VerifierCharged));
            } else {
                record(0);
            }
        }
    }
    let eps = match params.mode {
        VerifierMode::Exact => 0.0,
        VerifierMode::Probabilistic => params.epsilon,
    };
    Ok(VerifyReport {
        params: *params,
        rounds: match params.mode {
            VerifierMode::Exact => 0,
            VerifierMode::Probabilistic => cfg.rounds(field.modulus()),
        },
        completeness_failures,
        false_accepts,
        false_accept_rate: false_accepts as f64 / params.trials as f64,
        false_accept_bound: three_sigma_bound(eps, params.trials),
        charged_per_call: cost.flatten(),
        expected_per_call,
    })
}
