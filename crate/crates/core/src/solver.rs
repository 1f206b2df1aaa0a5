//! The average-case solver: a black box that, given oracles for `(M, v)`,
//! returns `Mv` with a probability that depends on the input.
//!
//! Per-input success is a deterministic function of `(M, v)` and the
//! profile; only the success/failure coin and the failure output are drawn
//! fresh on each call.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::hash::Fingerprint;
use crate::linalg::{random_matrix, random_vector, FpMatrix, FpVector};
use crate::oracle::{
    wrap_matrix, wrap_vector, Access, MatrixOracle, QueryLedger, Source, VectorOracle,
};
use crate::stats::Proportion;

/// Which inputs fall in the high-success class of a [`SolverProfile::GoodBadPartition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// `v[0] == 0`; holds on exactly a `1/p` fraction of inputs.
    FirstEntryZero,
    /// Keyed hash of `v` falls below `fraction`.
    VectorHash { seed: u64, fraction: f64 },
    /// Keyed hash of `(M, v)` falls below `fraction`.
    PairHash { seed: u64, fraction: f64 },
}

impl Predicate {
    pub fn holds(&self, m: &FpMatrix, v: &FpVector) -> bool {
        match self {
            Predicate::FirstEntryZero => v.raw().first() == Some(&0),
            Predicate::VectorHash { seed, fraction } => {
                let mut fp = Fingerprint::new(*seed);
                fp.push_vector(v);
                fp.unit() < *fraction
            }
            Predicate::PairHash { seed, fraction } => {
                let mut fp = Fingerprint::new(*seed);
                fp.push_matrix(m);
                fp.push_vector(v);
                fp.unit() < *fraction
            }
        }
    }

    /// Probability that the predicate holds on a uniform input, in expectation
    /// over the hash key.
    pub fn declared_fraction(&self, field: PrimeField) -> f64 {
        match self {
            Predicate::FirstEntryZero => 1.0 / field.order() as f64,
            Predicate::VectorHash { fraction, .. } | Predicate::PairHash { fraction, .. } => {
                *fraction
            }
        }
    }
}

/// Per-input success law of the simulated solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverProfile {
    /// Success probability `alpha` on every input.
    Uniform { alpha: f64 },
    /// `alpha_good` where the predicate holds, `alpha_bad` elsewhere.
    GoodBadPartition {
        predicate: Predicate,
        alpha_good: f64,
        alpha_bad: f64,
    },
    /// Probability 0 on a keyed pseudorandom `bad_fraction` of inputs and
    /// `alpha / (1 - bad_fraction)` elsewhere, so the average is `alpha`.
    PlantedAdversarial {
        seed: u64,
        bad_fraction: f64,
        alpha: f64,
    },
}

fn check_probability(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {x} is not in [0, 1]"
        )))
    }
}

impl SolverProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            SolverProfile::Uniform { alpha } => check_probability("alpha", *alpha),
            SolverProfile::GoodBadPartition {
                predicate,
                alpha_good,
                alpha_bad,
            } => {
                check_probability("alpha_good", *alpha_good)?;
                check_probability("alpha_bad", *alpha_bad)?;
                match predicate {
                    Predicate::FirstEntryZero => Ok(()),
                    Predicate::VectorHash { fraction, .. }
                    | Predicate::PairHash { fraction, .. } => {
                        check_probability("predicate fraction", *fraction)
                    }
                }
            }
            SolverProfile::PlantedAdversarial {
                bad_fraction,
                alpha,
                ..
            } => {
                check_probability("alpha", *alpha)?;
                if !(0.0..1.0).contains(bad_fraction) {
                    return Err(Error::InvalidParameter(format!(
                        "bad_fraction = {bad_fraction} is not in [0, 1)"
                    )));
                }
                if *alpha > 1.0 - bad_fraction + 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "alpha = {alpha} needs success {} > 1 outside the bad set",
                        alpha / (1.0 - bad_fraction)
                    )));
                }
                Ok(())
            }
        }
    }

    /// Whether `(M, v)` lies in the planted bad set.
    pub fn in_bad_set(&self, m: &FpMatrix, v: &FpVector) -> bool {
        match self {
            SolverProfile::PlantedAdversarial {
                seed, bad_fraction, ..
            } => {
                let mut fp = Fingerprint::new(*seed);
                fp.push_matrix(m);
                fp.push_vector(v);
                fp.unit() < *bad_fraction
            }
            _ => false,
        }
    }

    /// Exact success probability of one call on `(M, v)`.
    pub fn success_probability(&self, m: &FpMatrix, v: &FpVector) -> f64 {
        match self {
            SolverProfile::Uniform { alpha } => *alpha,
            SolverProfile::GoodBadPartition {
                predicate,
                alpha_good,
                alpha_bad,
            } => {
                if predicate.holds(m, v) {
                    *alpha_good
                } else {
                    *alpha_bad
                }
            }
            SolverProfile::PlantedAdversarial {
                bad_fraction,
                alpha,
                ..
            } => {
                if self.in_bad_set(m, v) {
                    0.0
                } else {
                    (alpha / (1.0 - bad_fraction)).min(1.0)
                }
            }
        }
    }

    /// Whether `(M, v)` is a worst-case input for this profile: in the
    /// planted bad set, or in the lower-success class of a partition.
    pub fn is_planted_bad(&self, m: &FpMatrix, v: &FpVector) -> bool {
        match self {
            SolverProfile::Uniform { .. } => false,
            SolverProfile::PlantedAdversarial { .. } => self.in_bad_set(m, v),
            SolverProfile::GoodBadPartition {
                alpha_good,
                alpha_bad,
                ..
            } => {
                let s = self.success_probability(m, v);
                alpha_good != alpha_bad && s == alpha_good.min(*alpha_bad)
            }
        }
    }

    /// Average success under uniform inputs, as declared by the profile's
    /// parameters (exact for `Uniform` and `PlantedAdversarial`, in
    /// expectation over hash keys for hashed predicates).
    pub fn declared_average(&self, field: PrimeField) -> f64 {
        match self {
            SolverProfile::Uniform { alpha } => *alpha,
            SolverProfile::PlantedAdversarial { alpha, .. } => *alpha,
            SolverProfile::GoodBadPartition {
                predicate,
                alpha_good,
                alpha_bad,
            } => {
                let q = predicate.declared_fraction(field);
                q * alpha_good + (1.0 - q) * alpha_bad
            }
        }
    }

    /// Average success over every `n x n` matrix and length-`n` vector, by
    /// enumeration. Refuses instances with more than 2^24 inputs.
    pub fn exact_average(&self, n: usize, field: PrimeField) -> Result<f64> {
        let (mats, vecs) = enumeration_sizes(n, field)?;
        let mut total = 0.0;
        for vi in 0..vecs {
            let v = FpVector::from_index(field, n, vi);
            for mi in 0..mats {
                let m = FpMatrix::from_index(field, n, n, mi);
                total += self.success_probability(&m, &v);
            }
        }
        Ok(total / (mats * vecs) as f64)
    }

    /// A copy of the profile rescaled to average `alpha`. Only defined for
    /// `Uniform` and `PlantedAdversarial`.
    pub fn with_average(&self, alpha: f64) -> Result<Self> {
        let out = match self {
            SolverProfile::Uniform { .. } => SolverProfile::Uniform { alpha },
            SolverProfile::PlantedAdversarial {
                seed, bad_fraction, ..
            } => SolverProfile::PlantedAdversarial {
                seed: *seed,
                bad_fraction: *bad_fraction,
                alpha,
            },
            SolverProfile::GoodBadPartition { .. } => {
                return Err(Error::InvalidParameter(
                    "a good/bad partition profile cannot be rescaled to a target average".into(),
                ))
            }
        };
        out.validate()?;
        Ok(out)
    }
}

/// Number of `n x n` matrices and length-`n` vectors, guarded at 2^24 pairs.
pub(crate) fn enumeration_sizes(n: usize, field: PrimeField) -> Result<(u64, u64)> {
    let bits = ((n * n + n) as f64) * (field.order() as f64).log2();
    if bits > 24.0 + 1e-9 {
        return Err(Error::InstanceTooLarge(format!(
            "|F|^(n^2+n) = {}^{} exceeds 2^24",
            field.order(),
            n * n + n
        )));
    }
    let p = field.order();
    Ok((p.pow((n * n) as u32), p.pow(n as u32)))
}

/// What the solver returns when it fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    /// A uniformly random vector other than the true product.
    #[default]
    UniformWrong,
    /// The true product with one random coordinate shifted by a nonzero amount.
    PerturbOne,
}

/// The simulated average-case algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisySolver {
    pub profile: SolverProfile,
    /// Matrix queries charged per call; `None` means `n^2`.
    pub matrix_queries: Option<usize>,
    pub failure_mode: FailureMode,
}

impl NoisySolver {
    pub fn new(profile: SolverProfile) -> Self {
        Self {
            profile,
            matrix_queries: None,
            failure_mode: FailureMode::default(),
        }
    }

    pub fn with_failure_mode(mut self, mode: FailureMode) -> Self {
        self.failure_mode = mode;
        self
    }

    pub fn with_matrix_queries(mut self, q: usize) -> Self {
        self.matrix_queries = Some(q);
        self
    }

    /// One call on oracles for a square `M` and matching `v`.
    ///
    /// Charges one [`Source::Solver`] query, `Q` matrix queries (row-major,
    /// wrapping) and one query per vector entry; the charges land on whichever
    /// leaves the oracles route to.
    pub fn invoke<R: Rng + ?Sized>(
        &self,
        um: &MatrixOracle,
        uv: &VectorOracle,
        ledger: &QueryLedger,
        rng: &mut R,
    ) -> Result<FpVector> {
        let n = um.rows();
        if um.cols() != n || uv.len() != n || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "solver needs a square matrix and matching vector, got {}x{} and {}",
                um.rows(),
                um.cols(),
                uv.len()
            )));
        }
        if um.field() != uv.field() {
            return Err(Error::FieldMismatch {
                left: um.field().modulus(),
                right: uv.field().modulus(),
            });
        }
        ledger.charge(Source::Solver, 1);
        let q = self.matrix_queries.unwrap_or(n * n);
        for t in 0..q {
            let cell = t % (n * n);
            um.read(cell / n, cell % n, Access::Charged);
        }
        for j in 0..n {
            uv.read(j, Access::Charged);
        }

        let m = um.materialize();
        let v = uv.materialize();
        let truth = m.matvec(&v)?;
        let s = self.profile.success_probability(&m, &v);
        if rng.gen::<f64>() < s {
            return Ok(truth);
        }
        Ok(self.wrong_answer(&truth, rng))
    }

    fn wrong_answer<R: Rng + ?Sized>(&self, truth: &FpVector, rng: &mut R) -> FpVector {
        let field = truth.field();
        match self.failure_mode {
            FailureMode::UniformWrong => loop {
                let w = random_vector(truth.len(), field, rng).expect("nonempty");
                if &w != truth {
                    return w;
                }
            },
            FailureMode::PerturbOne => {
                let i = rng.gen_range(0..truth.len());
                let mut raw = truth.raw().to_vec();
                raw[i] = field.add_raw(raw[i], field.sample_nonzero(rng).value());
                FpVector::from_raw(field, raw)
            }
        }
    }
}

/// Monte Carlo estimate of a success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub counts: Proportion,
    pub estimate: f64,
    pub std_err: f64,
}

impl From<Proportion> for SuccessEstimate {
    fn from(counts: Proportion) -> Self {
        Self {
            counts,
            estimate: counts.rate(),
            std_err: counts.std_err(),
        }
    }
}

/// Fraction of successful calls on i.i.d. uniform `(M, v)`.
pub fn estimate_average_success<R: Rng + ?Sized>(
    solver: &NoisySolver,
    n: usize,
    field: PrimeField,
    trials: u64,
    rng: &mut R,
) -> Result<SuccessEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let ledger = QueryLedger::new();
    let mut ok = 0;
    for _ in 0..trials {
        let m = random_matrix(n, n, field, rng)?;
        let v = random_vector(n, field, rng)?;
        let truth = m.matvec(&v)?;
        let out = solver.invoke(
            &wrap_matrix(m, &ledger),
            &wrap_vector(v, &ledger),
            &ledger,
            rng,
        )?;
        if out == truth {
            ok += 1;
        }
    }
    Ok(Proportion::new(ok, trials).into())
}
