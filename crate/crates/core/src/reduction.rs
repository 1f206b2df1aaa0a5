//! The worst-case algorithm built from an average-case solver.
//!
//! Stages, innermost first:
//!
//! * [`Reduction::alg1`]: `d x n` matrix, good `v`. Hides `M` as a random row
//!   block of an `n x n` matrix, calls the solver, keeps the verified block.
//! * [`Reduction::alg2`]: splits `M = R₁ + R₂` with `R₁` uniform so that both
//!   halves look random, then sums the two `alg1` answers.
//! * [`Reduction::alg3`]: `d x d` matrix, random-looking `v`. Hides `v` as a
//!   random block of a length-`n` vector and `M` as the matching column block
//!   of a `d x n` matrix that is zero elsewhere.
//! * [`Reduction::alg4`]: splits `v = r₁ + r₂` and sums two `alg3` answers.
//! * [`Reduction::alg_prime`]: cuts an `n x n` instance into `k²` blocks,
//!   solves each block product with a boosted `alg4`, and reassembles `Mv`.
//!
//! Every returned vector has passed a verifier, so failures surface as
//! `Ok(None)` rather than as wrong answers.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::linalg::{random_matrix, random_vector, FpMatrix, FpVector};
use crate::oracle::{
    concat_rows, concat_vectors, embed_block_matrix, extract_block, extract_subvector,
    pad_matrix_oracle, pad_vector_oracle, sum_vector_oracles, wrap_matrix, wrap_vector,
    MatrixOracle, QueryLedger, Source, VectorOracle,
};
use crate::sampler::{direct_product_reduce, Slot};
use crate::solver::{enumeration_sizes, NoisySolver, SolverProfile, SuccessEstimate};
use crate::stats::Proportion;
use crate::verify::{verified_call, verify_product, VerifierConfig};

/// Per-round success assumed for a boosted `alg4` call.
pub const ALG4_SUCCESS: f64 = 0.96;

/// Constant in the block-count condition `4·exp(-k / 3200) ≤ α`.
pub const PAPER_K_CONSTANT: f64 = 3200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMode {
    /// Smallest `k` with `4·exp(-k/3200) ≤ α`.
    Paper,
    /// `⌈c₀ · ln(4/α)⌉`.
    #[default]
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    /// Assumed average success of the solver.
    pub alpha: f64,
    /// Target failure probability of the whole pipeline.
    pub delta: f64,
    /// Block count; `None` picks it from `k_mode`.
    pub k: Option<usize>,
    pub k_mode: KMode,
    pub c0: f64,
    /// `alg1` runs at most `⌈c₁/α⌉` iterations.
    pub c1: f64,
    /// `alg3` runs at most `⌈c₂/α⌉` iterations.
    pub c2: f64,
    /// Boost rounds per block; `None` derives them from `k` and `delta`.
    pub boost_rounds: Option<usize>,
    pub verifier: VerifierConfig,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            delta: 0.01,
            k: None,
            k_mode: KMode::Desk,
            c0: 8.0,
            c1: 32.0,
            c2: 32.0,
            boost_rounds: None,
            verifier: VerifierConfig::default(),
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} is not in (0, 1]",
                self.alpha
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {} is not in (0, 1)",
                self.delta
            )));
        }
        for (name, c) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {c} must be positive"
                )));
            }
        }
        if self.k == Some(0) {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        if self.boost_rounds == Some(0) {
            return Err(Error::InvalidParameter(
                "boost_rounds must be positive".into(),
            ));
        }
        self.verifier.validate()
    }

    pub fn alg1_budget(&self) -> u64 {
        (self.c1 / self.alpha).ceil() as u64
    }

    pub fn alg3_budget(&self) -> u64 {
        (self.c2 / self.alpha).ceil() as u64
    }

    /// Block count and padded dimension for an `n x n` instance.
    pub fn resolve_k(&self, n: usize) -> Result<KChoice> {
        match self.k {
            Some(k) => Ok(KChoice {
                k,
                padded_n: padded_dimension(n, k),
            }),
            None => choose_k(self.alpha, n, self.k_mode, self.c0),
        }
    }

    pub fn resolve_boost_rounds(&self, k: usize) -> usize {
        self.boost_rounds
            .unwrap_or_else(|| boost_rounds_for(k, self.delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KChoice {
    pub k: usize,
    /// Smallest multiple of `k` that is at least `n`.
    pub padded_n: usize,
}

pub fn padded_dimension(n: usize, k: usize) -> usize {
    n.div_ceil(k).max(1) * k
}

/// Block count for assumed success `alpha`.
pub fn choose_k(alpha: f64, n: usize, mode: KMode, c0: f64) -> Result<KChoice> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} is not in (0, 1]"
        )));
    }
    let k = match mode {
        KMode::Paper => {
            let cond = |k: f64| 4.0 * (-k / PAPER_K_CONSTANT).exp() <= alpha;
            let mut k = (PAPER_K_CONSTANT * (4.0 / alpha).ln()).ceil().max(1.0);
            while !cond(k) {
                k += 1.0;
            }
            while k > 1.0 && cond(k - 1.0) {
                k -= 1.0;
            }
            k as usize
        }
        KMode::Desk => {
            if !(c0 > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "c0 = {c0} must be positive"
                )));
            }
            ((c0 * (4.0 / alpha).ln()).ceil() as usize).max(1)
        }
    };
    Ok(KChoice {
        k,
        padded_n: padded_dimension(n, k),
    })
}

/// Boost rounds taking a [`ALG4_SUCCESS`] stage to per-block success
/// `1 - δ/k²`: `⌈ln(k²/δ) / ln(1/0.04)⌉`.
pub fn boost_rounds_for(k: usize, delta: f64) -> usize {
    let k = k as f64;
    let t = ((k * k / delta).ln() / (1.0 / (1.0 - ALG4_SUCCESS)).ln()).ceil();
    (t as usize).max(1)
}

/// Work done for one block product in `alg_prime`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub row: usize,
    pub col: usize,
    pub rounds: u64,
    pub solver_queries: u64,
    pub solved: bool,
}

/// Iteration counters per stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub alg1_calls: u64,
    pub alg1_iters: u64,
    pub alg2_calls: u64,
    pub alg3_calls: u64,
    pub alg3_iters: u64,
    pub alg4_calls: u64,
    pub boost_rounds: u64,
    pub verifier_calls: u64,
    pub blocks: Vec<BlockRecord>,
}

/// Mutable state of one trial: its ledger and counters.
#[derive(Debug)]
pub struct RunContext {
    pub ledger: Arc<QueryLedger>,
    pub stats: StageStats,
}

impl RunContext {
    pub fn new(ledger: Arc<QueryLedger>) -> Self {
        Self {
            ledger,
            stats: StageStats::default(),
        }
    }
}

impl Default for RunContext {
    fn default() -> Self {
        Self::new(QueryLedger::new())
    }
}

/// The reduction pipeline around one solver.
#[derive(Debug, Clone, Copy)]
pub struct Reduction<'a> {
    pub solver: &'a NoisySolver,
    pub config: &'a ReductionConfig,
}

impl<'a> Reduction<'a> {
    pub fn new(solver: &'a NoisySolver, config: &'a ReductionConfig) -> Result<Self> {
        config.validate()?;
        solver.profile.validate()?;
        Ok(Self { solver, config })
    }

    fn verifier(&self) -> &VerifierConfig {
        &self.config.verifier
    }

    /// `M` is `d x n` with `d | n`; `v` has length `n` and is assumed good.
    pub fn alg1<R: Rng + ?Sized>(
        &self,
        um: &MatrixOracle,
        uv: &VectorOracle,
        ctx: &mut RunContext,
        rng: &mut R,
    ) -> Result<Option<FpVector>> {
        let (d, n) = (um.rows(), um.cols());
        if uv.len() != n || d == 0 || n % d != 0 {
            return Err(Error::DimensionMismatch(format!(
                "alg1 needs a d x n matrix with d | n and a length-n vector, got {d}x{n} and {}",
                uv.len()
            )));
        }
        let k = n / d;
        let field = um.field();
        ctx.stats.alg1_calls += 1;
        for _ in 0..self.config.alg1_budget() {
            ctx.stats.alg1_iters += 1;
            let (parts, slot) = direct_product_reduce(um.clone(), k, Slot::Auto, rng, |r| {
                Ok(MatrixOracle::local(random_matrix(d, n, field, r)?))
            })?;
            let stacked = concat_rows(parts)?;
            ctx.stats.verifier_calls += 1;
            if let Some(w) =
                verified_call(self.solver, &stacked, uv, self.verifier(), &ctx.ledger, rng)?
            {
                let block = extract_subvector(&VectorOracle::local(w), slot * d, d)?;
                return Ok(Some(block.materialize()));
            }
        }
        Ok(None)
    }

    /// `M` is `d x n`; computes `R₁v + R₂v` for `R₁` uniform, `R₂ = M - R₁`.
    pub fn alg2<R: Rng + ?Sized>(
        &self,
        um: &MatrixOracle,
        uv: &VectorOracle,
        ctx: &mut RunContext,
        rng: &mut R,
    ) -> Result<Option<FpVector>> {
        ctx.stats.alg2_calls += 1;
        let r1 = random_matrix(um.rows(), um.cols(), um.field(), rng)?;
        let m = um.read_all();
        let r2 = m.sub(&r1)?;
        assert_eq!(r1.add(&r2)?, m, "R1 + R2 must reconstruct M");
        let Some(a) = self.alg1(&MatrixOracle::local(r1), uv, ctx, rng)? else {
            return Ok(None);
        };
        let Some(b) = self.alg1(&MatrixOracle::local(r2), uv, ctx, rng)? else {
            return Ok(None);
        };
        let sum = sum_vector_oracles(vec![VectorOracle::local(a), VectorOracle::local(b)])?;
        Ok(Some(sum.materialize()))
    }

    /// `M` is `d x d`, `v` has length `d`; works inside dimension `n = k·d`.
    pub fn alg3<R: Rng + ?Sized>(
        &self,
        um: &MatrixOracle,
        uv: &VectorOracle,
        k: usize,
        ctx: &mut RunContext,
        rng: &mut R,
    ) -> Result<Option<FpVector>> {
        let d = um.rows();
        if um.cols() != d || uv.len() != d || k == 0 {
            return Err(Error::DimensionMismatch(format!(
                "alg3 needs a d x d matrix and a length-d vector, got {}x{} and {}",
                um.rows(),
                um.cols(),
                uv.len()
            )));
        }
        let field = um.field();
        ctx.stats.alg3_calls += 1;
        for _ in 0..self.config.alg3_budget() {
            ctx.stats.alg3_iters += 1;
            let (parts, slot) = direct_product_reduce(uv.clone(), k, Slot::Auto, rng, |r| {
                Ok(VectorOracle::local(random_vector(d, field, r)?))
            })?;
            let v_bar = concat_vectors(parts)?;
            let m_embedded = embed_block_matrix(um, slot, k)?;
            let Some(w) = self.alg2(&m_embedded, &v_bar, ctx, rng)? else {
                continue;
            };
            ctx.stats.verifier_calls += 1;
            if verify_product(&m_embedded, &v_bar, &w, self.verifier(), &ctx.ledger, rng)?
                .accepted()
            {
                return Ok(Some(w));
            }
        }
        Ok(None)
    }

    /// `M` is `d x d`; computes `Mr₁ + Mr₂` for `r₁` uniform, `r₂ = v - r₁`.
    pub fn alg4<R: Rng + ?Sized>(
        &self,
        um: &MatrixOracle,
        uv: &VectorOracle,
        k: usize,
        ctx: &mut RunContext,
        rng: &mut R,
    ) -> Result<Option<FpVector>> {
        ctx.stats.alg4_calls += 1;
        let r1 = random_vector(uv.len().max(1), uv.field(), rng)?;
        let v = uv.read_all();
        let r2 = v.sub(&r1)?;
        assert_eq!(r1.add(&r2)?, v, "r1 + r2 must reconstruct v");
        let Some(a) = self.alg3(um, &VectorOracle::local(r1), k, ctx, rng)? else {
            return Ok(None);
        };
        let Some(b) = self.alg3(um, &VectorOracle::local(r2), k, ctx, rng)? else {
            return Ok(None);
        };
        let sum = sum_vector_oracles(vec![VectorOracle::local(a), VectorOracle::local(b)])?;
        Ok(Some(sum.materialize()))
    }

    /// Retries `alg4` until the first success, at most `rounds` times.
    /// Returns the answer (if any) and the number of rounds used.
    pub fn boost<R: Rng + ?Sized>(
        &self,
        um: &MatrixOracle,
        uv: &VectorOracle,
        k: usize,
        rounds: usize,
        ctx: &mut RunContext,
        rng: &mut R,
    ) -> Result<(Option<FpVector>, u64)> {
        if rounds == 0 {
            return Err(Error::InvalidParameter(
                "boost needs at least one round".into(),
            ));
        }
        boost_with(rounds, ctx, |ctx| self.alg4(um, uv, k, ctx, rng))
    }

    /// The worst-case algorithm on an `n x n` instance.
    pub fn alg_prime<R: Rng + ?Sized>(
        &self,
        um: &MatrixOracle,
        uv: &VectorOracle,
        ctx: &mut RunContext,
        rng: &mut R,
    ) -> Result<Option<FpVector>> {
        let n = um.rows();
        if um.cols() != n || uv.len() != n || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "alg_prime needs a square matrix and matching vector, got {}x{} and {}",
                um.rows(),
                um.cols(),
                uv.len()
            )));
        }
        let KChoice { k, padded_n } = self.config.resolve_k(n)?;
        let rounds = self.config.resolve_boost_rounds(k);
        let um = pad_matrix_oracle(um, padded_n)?;
        let uv = pad_vector_oracle(uv, padded_n)?;
        let d = padded_n / k;

        let mut block_rows = Vec::with_capacity(k);
        for i in 0..k {
            let mut products = Vec::with_capacity(k);
            for j in 0..k {
                let block = extract_block(&um, i, j, d)?;
                let part = extract_subvector(&uv, j * d, d)?;
                let before = ctx.ledger.count(Source::Solver);
                let (out, used) = self.boost(&block, &part, k, rounds, ctx, rng)?;
                ctx.stats.blocks.push(BlockRecord {
                    row: i,
                    col: j,
                    rounds: used,
                    solver_queries: ctx.ledger.count(Source::Solver) - before,
                    solved: out.is_some(),
                });
                let Some(out) = out else {
                    return Ok(None);
                };
                products.push(VectorOracle::local(out));
            }
            block_rows.push(sum_vector_oracles(products)?);
        }
        let full = concat_vectors(block_rows)?.materialize();
        Ok(Some(full.slice(0, n)?))
    }
}

/// Verifier-gated retry: runs `op` until it returns an answer or `rounds`
/// attempts are spent.
pub fn boost_with<F>(
    rounds: usize,
    ctx: &mut RunContext,
    mut op: F,
) -> Result<(Option<FpVector>, u64)>
where
    F: FnMut(&mut RunContext) -> Result<Option<FpVector>>,
{
    for used in 1..=rounds as u64 {
        ctx.stats.boost_rounds += 1;
        if let Some(out) = op(ctx)? {
            return Ok((Some(out), used));
        }
    }
    Ok((None, rounds as u64))
}

/// Monte Carlo goodness check of a vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessEstimate {
    pub success: SuccessEstimate,
    /// `α/2`.
    pub threshold: f64,
    pub good: bool,
}

/// Estimates `Pr_M[solver(M, v) = Mv]` over uniform `M` and compares it with
/// `α/2`.
pub fn is_good<R: Rng + ?Sized>(
    v: &FpVector,
    solver: &NoisySolver,
    alpha: f64,
    trials: u64,
    rng: &mut R,
) -> Result<GoodnessEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = v.len();
    let ledger = QueryLedger::new();
    let uv = wrap_vector(v.clone(), &ledger);
    let mut ok = 0;
    for _ in 0..trials {
        let m = random_matrix(n, n, v.field(), rng)?;
        let truth = m.matvec(v)?;
        if solver.invoke(&wrap_matrix(m, &ledger), &uv, &ledger, rng)? == truth {
            ok += 1;
        }
    }
    let success: SuccessEstimate = Proportion::new(ok, trials).into();
    let threshold = alpha / 2.0;
    Ok(GoodnessEstimate {
        success,
        threshold,
        good: success.estimate >= threshold,
    })
}

/// `Pr_M[success on (M, v)]` from the profile, by enumerating every `M`.
pub fn exact_vector_success(profile: &SolverProfile, v: &FpVector) -> Result<f64> {
    let (n, field) = (v.len(), v.field());
    let (mats, _) = enumeration_sizes(n, field)?;
    let total: f64 = (0..mats)
        .map(|mi| profile.success_probability(&FpMatrix::from_index(field, n, n, mi), v))
        .sum();
    Ok(total / mats as f64)
}

/// Exact fraction of good vectors: those with `Pr_M[success] ≥ α/2`.
pub fn good_fraction_exhaustive(
    profile: &SolverProfile,
    alpha: f64,
    n: usize,
    field: PrimeField,
) -> Result<f64> {
    let (_, vecs) = enumeration_sizes(n, field)?;
    let mut good = 0u64;
    for vi in 0..vecs {
        let v = FpVector::from_index(field, n, vi);
        if exact_vector_success(profile, &v)? >= alpha / 2.0 {
            good += 1;
        }
    }
    Ok(good as f64 / vecs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{FailureMode, Predicate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn perfect() -> NoisySolver {
        NoisySolver::new(SolverProfile::Uniform { alpha: 1.0 })
    }

    fn broken() -> NoisySolver {
        NoisySolver::new(SolverProfile::Uniform { alpha: 0.0 })
    }

    #[test]
    fn choose_k_examples() {
        assert_eq!(choose_k(0.5, 10, KMode::Paper, 8.0).unwrap().k, 6655);
        assert_eq!(choose_k(0.25, 10, KMode::Desk, 8.0).unwrap().k, 23);
        let one = choose_k(1.0, 8, KMode::Desk, 8.0).unwrap();
        assert_eq!((one.k, one.padded_n), (12, 12));
        assert_eq!(choose_k(0.25, 30, KMode::Desk, 8.0).unwrap().padded_n, 46);
        assert!(choose_k(0.0, 8, KMode::Desk, 8.0).is_err());
        assert!(choose_k(-1.0, 8, KMode::Paper, 8.0).is_err());
        let paper = choose_k(0.5, 1, KMode::Paper, 0.0).unwrap().k as f64;
        assert!(4.0 * (-paper / 3200.0).exp() <= 0.5);
        assert!(4.0 * (-(paper - 1.0) / 3200.0).exp() > 0.5);
    }

    #[test]
    fn boost_round_formula() {
        assert_eq!(boost_rounds_for(4, 0.01), 3);
        assert_eq!(boost_rounds_for(2, 0.01), 2);
        assert_eq!(boost_rounds_for(1, 0.01), 2);
    }

    #[test]
    fn boost_stops_at_first_success_or_budget() {
        let f5 = f(5);
        let mut ctx = RunContext::default();
        let (out, used) = boost_with(3, &mut ctx, |_| Ok(Some(FpVector::zeros(f5, 1)))).unwrap();
        assert!(out.is_some());
        assert_eq!(used, 1);
        let (out, used) = boost_with(3, &mut ctx, |_| Ok(None)).unwrap();
        assert!(out.is_none());
        assert_eq!(used, 3);
        assert_eq!(ctx.stats.boost_rounds, 4);
    }

    #[test]
    fn alg1_perfect_solver_returns_block_product() {
        let f5 = f(5);
        let cfg = ReductionConfig::default();
        let solver = perfect();
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (d, k) = (rng.gen_range(1..3), rng.gen_range(1..4));
            let n = d * k;
            let m = random_matrix(d, n, f5, &mut rng).unwrap();
            let v = random_vector(n, f5, &mut rng).unwrap();
            let mut ctx = RunContext::default();
            let out = red
                .alg1(
                    &wrap_matrix(m.clone(), &ctx.ledger.clone()),
                    &VectorOracle::local(v.clone()),
                    &mut ctx,
                    &mut rng,
                )
                .unwrap();
            assert_eq!(out, Some(m.matvec(&v).unwrap()));
            assert_eq!(ctx.stats.alg1_iters, 1);
            let snap = ctx.ledger.snapshot();
            assert_eq!(snap.solver, 1);
            assert_eq!(snap.verifier_charged, cfg.verifier.paper_cost(n));
        }
    }

    #[test]
    fn alg1_broken_solver_exhausts_budget() {
        let f5 = f(5);
        let cfg = ReductionConfig {
            alpha: 0.5,
            ..ReductionConfig::default()
        };
        let solver = broken();
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ctx = RunContext::default();
        let m = MatrixOracle::local(random_matrix(2, 4, f5, &mut rng).unwrap());
        let v = VectorOracle::local(random_vector(4, f5, &mut rng).unwrap());
        assert_eq!(red.alg1(&m, &v, &mut ctx, &mut rng).unwrap(), None);
        assert_eq!(ctx.stats.alg1_iters, 64);
        let snap = ctx.ledger.snapshot();
        assert_eq!(snap.solver, 64);
        assert_eq!(snap.verifier_charged, 64 * cfg.verifier.paper_cost(4));
        assert!(red
            .alg1(
                &m,
                &VectorOracle::local(FpVector::zeros(f5, 3)),
                &mut ctx,
                &mut rng
            )
            .is_err());
    }

    #[test]
    fn alg2_exhaustive_f2() {
        // p = 2, n = 2, k = 2: every 1x2 matrix M and every v.
        let f2 = f(2);
        let cfg = ReductionConfig::default();
        let solver = perfect();
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mi in 0..4 {
            let m = FpMatrix::from_index(f2, 1, 2, mi);
            for vi in 0..4 {
                let v = FpVector::from_index(f2, 2, vi);
                let mut ctx = RunContext::default();
                let um = wrap_matrix(m.clone(), &ctx.ledger);
                let out = red
                    .alg2(&um, &VectorOracle::local(v.clone()), &mut ctx, &mut rng)
                    .unwrap();
                assert_eq!(out, Some(m.matvec(&v).unwrap()));
                assert_eq!(ctx.ledger.count(Source::Matrix), 2);
            }
        }
    }

    #[test]
    fn alg2_fails_when_a_branch_fails() {
        let f5 = f(5);
        let cfg = ReductionConfig {
            alpha: 1.0,
            ..ReductionConfig::default()
        };
        let solver = broken();
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ctx = RunContext::default();
        let um = MatrixOracle::local(random_matrix(1, 2, f5, &mut rng).unwrap());
        let uv = VectorOracle::local(random_vector(2, f5, &mut rng).unwrap());
        assert_eq!(red.alg2(&um, &uv, &mut ctx, &mut rng).unwrap(), None);
        assert_eq!(ctx.stats.alg1_calls, 1);
        assert_eq!(ctx.stats.alg1_iters, 32);
    }

    #[test]
    fn alg3_exhaustive_f2_d1_k2() {
        let f2 = f(2);
        let cfg = ReductionConfig::default();
        let solver = perfect();
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mv in 0..2 {
            for vv in 0..2 {
                let m = FpMatrix::new(f2, 1, 1, &[mv]).unwrap();
                let v = FpVector::new(f2, &[vv]);
                let mut ctx = RunContext::default();
                let out = red
                    .alg3(
                        &MatrixOracle::local(m.clone()),
                        &VectorOracle::local(v.clone()),
                        2,
                        &mut ctx,
                        &mut rng,
                    )
                    .unwrap();
                assert_eq!(out, Some(m.matvec(&v).unwrap()));
            }
        }
    }

    #[test]
    fn embedded_products_equal_block_products() {
        let f5 = f(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let (d, k) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let m = random_matrix(d, d, f5, &mut rng).unwrap();
            let v = random_vector(d, f5, &mut rng).unwrap();
            let (parts, slot) = direct_product_reduce(
                VectorOracle::local(v.clone()),
                k,
                Slot::Auto,
                &mut rng,
                |r| Ok(VectorOracle::local(random_vector(d, f5, r)?)),
            )
            .unwrap();
            let v_bar = concat_vectors(parts).unwrap().materialize();
            let m_prime = embed_block_matrix(&MatrixOracle::local(m.clone()), slot, k)
                .unwrap()
                .materialize();
            assert_eq!(m_prime.matvec(&v_bar).unwrap(), m.matvec(&v).unwrap());
        }
    }

    #[test]
    fn alg3_zero_matrix_gives_zero() {
        let f5 = f(5);
        let cfg = ReductionConfig::default();
        let solver = NoisySolver::new(SolverProfile::Uniform { alpha: 0.5 });
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut ctx = RunContext::default();
            let v = random_vector(2, f5, &mut rng).unwrap();
            let out = red
                .alg3(
                    &MatrixOracle::local(FpMatrix::zeros(f5, 2, 2)),
                    &VectorOracle::local(v),
                    3,
                    &mut ctx,
                    &mut rng,
                )
                .unwrap();
            if let Some(w) = out {
                assert_eq!(w, FpVector::zeros(f5, 2));
            }
        }
    }

    #[test]
    fn alg4_perfect_solver_random_instances() {
        let f5 = f(5);
        let cfg = ReductionConfig::default();
        let solver = perfect();
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let (d, k) = (rng.gen_range(1..3), rng.gen_range(1..3));
            let m = random_matrix(d, d, f5, &mut rng).unwrap();
            let v = random_vector(d, f5, &mut rng).unwrap();
            let mut ctx = RunContext::default();
            let uv = wrap_vector(v.clone(), &ctx.ledger);
            let out = red
                .alg4(&MatrixOracle::local(m.clone()), &uv, k, &mut ctx, &mut rng)
                .unwrap();
            assert_eq!(out, Some(m.matvec(&v).unwrap()));
            assert_eq!(ctx.ledger.count(Source::Vector), d as u64);
        }
    }

    #[test]
    fn alg4_failure_keeps_ledger_consistent() {
        let f5 = f(5);
        let cfg = ReductionConfig {
            alpha: 1.0,
            c1: 2.0,
            c2: 2.0,
            ..ReductionConfig::default()
        };
        let solver = broken();
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ctx = RunContext::default();
        let um = MatrixOracle::local(random_matrix(1, 1, f5, &mut rng).unwrap());
        let uv = VectorOracle::local(random_vector(1, f5, &mut rng).unwrap());
        assert_eq!(red.alg4(&um, &uv, 2, &mut ctx, &mut rng).unwrap(), None);
        // One alg3 call, 2 iterations, each one alg2 whose first alg1 spends 2 iterations.
        assert_eq!(ctx.stats.alg3_iters, 2);
        assert_eq!(ctx.stats.alg1_iters, 4);
        assert_eq!(ctx.ledger.count(Source::Solver), ctx.stats.alg1_iters);
        assert_eq!(ctx.stats.verifier_calls, 4);
        assert_eq!(
            ctx.ledger.count(Source::VerifierCharged),
            4 * cfg.verifier.paper_cost(2)
        );
    }

    #[test]
    fn alg_prime_perfect_solver() {
        let f5 = f(5);
        let cfg = ReductionConfig {
            k: Some(2),
            ..ReductionConfig::default()
        };
        let solver = perfect();
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for t in 0..200 {
            let n = 1 + t % 8;
            let m = random_matrix(n, n, f5, &mut rng).unwrap();
            let v = random_vector(n, f5, &mut rng).unwrap();
            let mut ctx = RunContext::default();
            let um = wrap_matrix(m.clone(), &ctx.ledger);
            let uv = wrap_vector(v.clone(), &ctx.ledger);
            let out = red.alg_prime(&um, &uv, &mut ctx, &mut rng).unwrap();
            assert_eq!(out, Some(m.matvec(&v).unwrap()), "n={n}");
            assert_eq!(ctx.stats.blocks.len(), 4);
            let per_block: u64 = ctx.stats.blocks.iter().map(|b| b.solver_queries).sum();
            assert_eq!(per_block, ctx.ledger.count(Source::Solver));
            // Perfect solver: 4 alg1 calls of one iteration per block.
            assert_eq!(ctx.ledger.count(Source::Solver), 16);
        }
    }

    #[test]
    fn alg_prime_identity_returns_v() {
        let f5 = f(5);
        let cfg = ReductionConfig {
            alpha: 0.5,
            k: Some(2),
            ..ReductionConfig::default()
        };
        let solver = NoisySolver::new(SolverProfile::Uniform { alpha: 0.5 })
            .with_failure_mode(FailureMode::PerturbOne);
        let red = Reduction::new(&solver, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let v = random_vector(4, f5, &mut rng).unwrap();
            let mut ctx = RunContext::default();
            let out = red
                .alg_prime(
                    &MatrixOracle::local(FpMatrix::identity(f5, 4)),
                    &VectorOracle::local(v.clone()),
                    &mut ctx,
                    &mut rng,
                )
                .unwrap();
            if let Some(w) = out {
                assert_eq!(w, v);
            }
        }
    }

    #[test]
    fn good_vector_examples() {
        let f2 = f(2);
        let uniform = SolverProfile::Uniform { alpha: 0.3 };
        assert_eq!(good_fraction_exhaustive(&uniform, 0.3, 2, f2).unwrap(), 1.0);
        let alpha = 0.5;
        let split = SolverProfile::GoodBadPartition {
            predicate: Predicate::FirstEntryZero,
            alpha_good: alpha / 4.0,
            alpha_bad: 7.0 * alpha / 4.0,
        };
        assert_eq!(good_fraction_exhaustive(&split, alpha, 2, f2).unwrap(), 0.5);
        assert!(good_fraction_exhaustive(&uniform, 0.3, 5, f2).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let solver = NoisySolver::new(uniform);
        let v = random_vector(3, f2, &mut rng).unwrap();
        assert!(is_good(&v, &solver, 0.3, 500, &mut rng).unwrap().good);
        let dead = NoisySolver::new(SolverProfile::GoodBadPartition {
            predicate: Predicate::FirstEntryZero,
            alpha_good: 0.0,
            alpha_bad: 0.8,
        });
        let planted = FpVector::new(f2, &[0, 1, 1]);
        let est = is_good(&planted, &dead, 0.4, 500, &mut rng).unwrap();
        assert!(!est.good);
        assert_eq!(est.success.estimate, 0.0);
        assert!(is_good(&planted, &dead, 0.4, 0, &mut rng).is_err());
    }

    #[test]
    fn goodness_estimate_matches_enumeration() {
        // p = 2, n = 3: exact Pr_M by enumerating all 2^9 matrices.
        let f2 = f(2);
        let profile = SolverProfile::GoodBadPartition {
            predicate: Predicate::PairHash {
                seed: 4,
                fraction: 0.3,
            },
            alpha_good: 0.9,
            alpha_bad: 0.05,
        };
        let solver = NoisySolver::new(profile.clone());
        let alpha = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for vi in 0..8 {
            let v = FpVector::from_index(f2, 3, vi);
            let exact = exact_vector_success(&profile, &v).unwrap();
            let est = is_good(&v, &solver, alpha, 20_000, &mut rng).unwrap();
            let sd = (exact * (1.0 - exact) / 20_000.0).sqrt();
            assert!(
                (est.success.estimate - exact).abs() < 4.0 * sd + 1e-9,
                "v={vi}"
            );
            if (exact - alpha / 2.0).abs() > 4.0 * sd {
                assert_eq!(est.good, exact >= alpha / 2.0);
            }
        }
    }

    #[test]
    fn config_validation() {
        let ok = ReductionConfig::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.alg1_budget(), 128);
        for bad in [
            ReductionConfig {
                alpha: 0.0,
                ..ok.clone()
            },
            ReductionConfig {
                delta: 1.0,
                ..ok.clone()
            },
            ReductionConfig {
                k: Some(0),
                ..ok.clone()
            },
            ReductionConfig {
                c1: 0.0,
                ..ok.clone()
            },
            ReductionConfig {
                boost_rounds: Some(0),
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
