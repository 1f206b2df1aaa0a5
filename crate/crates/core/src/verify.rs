//! Matrix-vector product verification with a one-sided error flag.
//!
//! The probabilistic mode is a random-challenge check: each round draws
//! `x ∈ F_p^r` and compares `xᵀw` with `(xᵀM)v`. A correct `w` always passes;
//! a wrong `w` passes one round with probability exactly `1/p`, so
//! `⌈ln(1/ε)/ln p⌉` rounds bring the false-accept probability below `ε`.
//!
//! Under [`CostAccounting::PaperModel`] the verifier reads the oracles free
//! of charge and instead charges `⌈r^{3/2}·⌈log₂(1/ε)⌉⌉` to
//! [`Source::VerifierCharged`]. Under [`CostAccounting::Actual`] every read
//! is a charged oracle query and no model cost is added.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::FpVector;
use crate::oracle::{Access, MatrixOracle, QueryLedger, Source, VectorOracle};
use crate::solver::NoisySolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierMode {
    /// Recompute `Mv` and compare.
    Exact,
    #[default]
    Probabilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostAccounting {
    #[default]
    PaperModel,
    Actual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    pub epsilon: f64,
    pub mode: VerifierMode,
    pub accounting: CostAccounting,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            mode: VerifierMode::Probabilistic,
            accounting: CostAccounting::PaperModel,
        }
    }
}

impl VerifierConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = Self {
            epsilon,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} is not in (0, 1)",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Challenge rounds needed over F_p: `⌈ln(1/ε) / ln p⌉`, at least one.
    pub fn rounds(&self, modulus: u32) -> usize {
        let t = ((1.0 / self.epsilon).ln() / (modulus as f64).ln()).ceil();
        (t as usize).max(1)
    }

    /// Charged cost for an `r`-row product: `⌈r^{3/2} · ⌈log₂(1/ε)⌉⌉`.
    pub fn paper_cost(&self, rows: usize) -> u64 {
        let log_term = (1.0 / self.epsilon).log2().ceil();
        let r = rows as f64;
        (r * r.sqrt() * log_term).ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn accepted(self) -> bool {
        self == Verdict::Accept
    }
}

/// Checks whether `w = Mv` for an `r x c` matrix oracle and length-`c` vector.
pub fn verify_product<R: Rng + ?Sized>(
    um: &MatrixOracle,
    uv: &VectorOracle,
    w: &FpVector,
    cfg: &VerifierConfig,
    ledger: &QueryLedger,
    rng: &mut R,
) -> Result<Verdict> {
    cfg.validate()?;
    let (r, c) = (um.rows(), um.cols());
    if w.len() != r || uv.len() != c {
        return Err(Error::DimensionMismatch(format!(
            "verifying a length-{} claim for a {r}x{c} matrix and length-{} vector",
            w.len(),
            uv.len()
        )));
    }
    let field = um.field();
    if uv.field() != field || w.field() != field {
        return Err(Error::FieldMismatch {
            left: field.modulus(),
            right: if uv.field() != field {
                uv.field()
            } else {
                w.field()
            }
            .modulus(),
        });
    }
    let access = match cfg.accounting {
        CostAccounting::PaperModel => {
            ledger.charge(Source::VerifierCharged, cfg.paper_cost(r));
            Access::Free
        }
        CostAccounting::Actual => Access::Charged,
    };
    let read_v = || -> Vec<u32> { (0..c).map(|j| uv.read(j, access)).collect() };

    match cfg.mode {
        VerifierMode::Exact => {
            let v = read_v();
            for i in 0..r {
                let row = (0..c).map(|j| um.read(i, j, access));
                if field.dot_raw(row, v.iter().copied()) != w.raw()[i] {
                    return Ok(Verdict::Reject);
                }
            }
            Ok(Verdict::Accept)
        }
        VerifierMode::Probabilistic => {
            // Free reads are identical every round, so read once.
            let cached = (access == Access::Free).then(|| (um.materialize(), read_v()));
            for _ in 0..cfg.rounds(field.modulus()) {
                let x: Vec<u32> = (0..r).map(|_| rng.gen_range(0..field.modulus())).collect();
                let lhs = field.dot_raw(x.iter().copied(), w.raw().iter().copied());
                let fresh;
                let (xm, v): (Vec<u32>, &[u32]) = match &cached {
                    Some((m, v)) => (
                        (0..c)
                            .map(|j| {
                                field.dot_raw(x.iter().copied(), (0..r).map(|i| m.raw_at(i, j)))
                            })
                            .collect(),
                        v,
                    ),
                    None => {
                        let mut acc = vec![0u32; c];
                        for (i, &xi) in x.iter().enumerate() {
                            for (j, a) in acc.iter_mut().enumerate() {
                                let e = um.read(i, j, access);
                                *a = field.add_raw(*a, field.mul_raw(xi, e));
                            }
                        }
                        fresh = read_v();
                        (acc, &fresh)
                    }
                };
                let rhs = field.dot_raw(xm.into_iter(), v.iter().copied());
                if lhs != rhs {
                    return Ok(Verdict::Reject);
                }
            }
            Ok(Verdict::Accept)
        }
    }
}

/// One solver call followed by one verification. Returns the solver output
/// only when the verifier accepts it.
pub fn verified_call<R: Rng + ?Sized>(
    solver: &NoisySolver,
    um: &MatrixOracle,
    uv: &VectorOracle,
    cfg: &VerifierConfig,
    ledger: &QueryLedger,
    rng: &mut R,
) -> Result<Option<FpVector>> {
    let w = solver.invoke(um, uv, ledger, rng)?;
    match verify_product(um, uv, &w, cfg, ledger, rng)? {
        Verdict::Accept => Ok(Some(w)),
        Verdict::Reject => Ok(None),
    }
}
