//! Monte Carlo campaigns over the full pipeline.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, InputMode};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::linalg::{random_matrix, random_vector, FpMatrix, FpVector};
use crate::oracle::{wrap_matrix, wrap_vector, QueryLedger};
use crate::reduction::{KChoice, Reduction, RunContext};
use crate::solver::{enumeration_sizes, NoisySolver};
use crate::stats::{fit_line, LineFit, Proportion, Z95};
use crate::verify::{verified_call, VerifierMode};

pub const CSV_HEADER: &str =
    "trial,success,alg_queries,um_queries,uv_queries,verifier_charged,stage1_iters,stage3_iters,boost_rounds_total,wall_ms";

/// Gives up on planted-bad input selection after this many draws.
const REJECTION_LIMIT: u64 = 1 << 20;

/// Per-trial generator: stream `trial` of the master seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Generator for the baseline call of a trial, disjoint from [`trial_rng`].
pub fn baseline_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    trial_rng(seed, trial | (1 << 63))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    /// Returned the true product.
    pub success: bool,
    /// Returned anything at all.
    pub returned: bool,
    pub alg_queries: u64,
    pub um_queries: u64,
    pub uv_queries: u64,
    pub verifier_charged: u64,
    pub stage1_iters: u64,
    pub stage3_iters: u64,
    pub boost_rounds_total: u64,
    pub verifier_calls: u64,
    pub wall_ms: u64,
    pub baseline_success: Option<bool>,
}

impl TrialRow {
    pub fn wrong_return(&self) -> bool {
        self.returned && !self.success
    }

    fn csv_line(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.success as u8,
            self.alg_queries,
            self.um_queries,
            self.uv_queries,
            self.verifier_charged,
            self.stage1_iters,
            self.stage3_iters,
            self.boost_rounds_total,
            self.wall_ms
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SourceStats {
    pub mean: f64,
    pub max: u64,
}

impl SourceStats {
    fn of(values: impl Iterator<Item = u64>) -> Self {
        let (mut sum, mut max, mut count) = (0u128, 0, 0u64);
        for x in values {
            sum += x as u128;
            max = max.max(x);
            count += 1;
        }
        Self {
            mean: if count == 0 {
                0.0
            } else {
                sum as f64 / count as f64
            },
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub artifact_version: String,
    pub trials: u64,
    pub k: usize,
    pub padded_n: usize,
    pub boost_rounds: usize,
    pub successes: u64,
    pub success_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_alg_queries: f64,
    pub alg_queries: SourceStats,
    pub um_queries: SourceStats,
    pub uv_queries: SourceStats,
    pub verifier_charged: SourceStats,
    pub returned: u64,
    pub wrong_returns: u64,
    pub wrong_return_rate: f64,
    /// Mean over trials of `min(1, verifier calls · ε)`: the union bound on
    /// a trial returning a wrong vector. Zero in exact mode.
    pub epsilon_budget: f64,
    /// `epsilon_budget + 3σ` at the campaign's trial count.
    pub wrong_return_bound: f64,
    pub baseline_success_rate: Option<f64>,
    pub config: ExperimentConfig,
}

impl CampaignSummary {
    pub fn sound(&self) -> bool {
        self.wrong_return_rate <= self.wrong_return_bound
    }

    /// Threshold violations, empty when every configured check holds.
    pub fn failures(&self) -> Vec<String> {
        let t = &self.config.thresholds;
        let mut out = Vec::new();
        if let Some(min) = t.min_success_rate {
            if self.success_rate < min {
                out.push(format!("success rate {:.4} < {min}", self.success_rate));
            }
        }
        if let Some(max) = t.max_baseline_rate {
            match self.baseline_success_rate {
                Some(b) if b <= max => {}
                Some(b) => out.push(format!("baseline success rate {b:.4} > {max}")),
                None => out.push("max_baseline_rate set but baseline was not run".into()),
            }
        }
        if t.soundness && !self.sound() {
            out.push(format!(
                "wrong-return rate {:.6} > bound {:.6}",
                self.wrong_return_rate, self.wrong_return_bound
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub summary: CampaignSummary,
    /// Sorted by trial index.
    pub rows: Vec<TrialRow>,
}

impl CampaignReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            row.csv_line(&mut out);
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.summary).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `trials.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trials.csv"), self.to_csv())?;
        std::fs::write(dir.join("summary.json"), self.summary_json()?)?;
        Ok(())
    }
}

fn draw_input<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    field: PrimeField,
    trial: u64,
    rng: &mut R,
) -> Result<(FpMatrix, FpVector)> {
    let n = cfg.n;
    match cfg.input {
        InputMode::Random => Ok((
            random_matrix(n, n, field, rng)?,
            random_vector(n, field, rng)?,
        )),
        InputMode::PlantedBad => {
            for _ in 0..REJECTION_LIMIT {
                let m = random_matrix(n, n, field, rng)?;
                let v = random_vector(n, field, rng)?;
                if cfg.profile.is_planted_bad(&m, &v) {
                    return Ok((m, v));
                }
            }
            Err(Error::Config(format!(
                "no planted-bad input found in {REJECTION_LIMIT} draws"
            )))
        }
        InputMode::ExhaustiveTiny => {
            let (mats, vecs) = enumeration_sizes(n, field)?;
            let index = trial % (mats * vecs);
            Ok((
                FpMatrix::from_index(field, n, n, index / vecs),
                FpVector::from_index(field, n, index % vecs),
            ))
        }
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    field: PrimeField,
    solver: &NoisySolver,
    trial: u64,
) -> Result<TrialRow> {
    let mut rng = trial_rng(cfg.seed, trial);
    let (m, v) = draw_input(cfg, field, trial, &mut rng)?;
    let truth = m.matvec(&v)?;

    let ledger = QueryLedger::new();
    let um = wrap_matrix(m.clone(), &ledger);
    let uv = wrap_vector(v.clone(), &ledger);
    let mut ctx = RunContext::new(ledger);
    let start = cfg.record_wall_clock.then(Instant::now);
    let out = Reduction::new(solver, &cfg.reduction)?.alg_prime(&um, &uv, &mut ctx, &mut rng)?;
    let wall_ms = start.map_or(0, |s| s.elapsed().as_millis() as u64);

    let baseline_success = if cfg.baseline {
        let mut brng = baseline_rng(cfg.seed, trial);
        let ledger = QueryLedger::new();
        let w = verified_call(
            solver,
            &wrap_matrix(m, &ledger),
            &wrap_vector(v, &ledger),
            &cfg.reduction.verifier,
            &ledger,
            &mut brng,
        )?;
        Some(w.as_ref() == Some(&truth))
    } else {
        None
    };

    let snap = ctx.ledger.snapshot();
    Ok(TrialRow {
        trial,
        success: out.as_ref() == Some(&truth),
        returned: out.is_some(),
        alg_queries: snap.solver,
        um_queries: snap.matrix,
        uv_queries: snap.vector,
        verifier_charged: snap.verifier_charged,
        stage1_iters: ctx.stats.alg1_iters,
        stage3_iters: ctx.stats.alg3_iters,
        boost_rounds_total: ctx.stats.boost_rounds,
        verifier_calls: ctx.stats.verifier_calls,
        wall_ms,
        baseline_success,
    })
}

fn summarize(cfg: &ExperimentConfig, choice: KChoice, rows: &[TrialRow]) -> CampaignSummary {
    let trials = rows.len() as u64;
    let successes = rows.iter().filter(|r| r.success).count() as u64;
    let counts = Proportion::new(successes, trials);
    let (ci_low, ci_high) = counts.wilson(Z95);
    let returned = rows.iter().filter(|r| r.returned).count() as u64;
    let wrong_returns = rows.iter().filter(|r| r.wrong_return()).count() as u64;
    let eps = match cfg.reduction.verifier.mode {
        VerifierMode::Exact => 0.0,
        VerifierMode::Probabilistic => cfg.reduction.verifier.epsilon,
    };
    let epsilon_budget = rows
        .iter()
        .map(|r| (r.verifier_calls as f64 * eps).min(1.0))
        .sum::<f64>()
        / trials as f64;
    let sigma = (epsilon_budget * (1.0 - epsilon_budget) / trials as f64).sqrt();
    let baseline: Vec<bool> = rows.iter().filter_map(|r| r.baseline_success).collect();
    let alg_queries = SourceStats::of(rows.iter().map(|r| r.alg_queries));
    CampaignSummary {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        trials,
        k: choice.k,
        padded_n: choice.padded_n,
        boost_rounds: cfg.reduction.resolve_boost_rounds(choice.k),
        successes,
        success_rate: counts.rate(),
        ci_low,
        ci_high,
        mean_alg_queries: alg_queries.mean,
        alg_queries,
        um_queries: SourceStats::of(rows.iter().map(|r| r.um_queries)),
        uv_queries: SourceStats::of(rows.iter().map(|r| r.uv_queries)),
        verifier_charged: SourceStats::of(rows.iter().map(|r| r.verifier_charged)),
        returned,
        wrong_returns,
        wrong_return_rate: wrong_returns as f64 / trials as f64,
        epsilon_budget,
        wrong_return_bound: epsilon_budget + 3.0 * sigma,
        baseline_success_rate: (!baseline.is_empty())
            .then(|| baseline.iter().filter(|&&b| b).count() as f64 / baseline.len() as f64),
        config: cfg.clone(),
    }
}

/// Runs `cfg.trials` independent trials on up to `cfg.workers` threads.
/// Rows come back sorted by trial index whatever the worker count, and each
/// trial's randomness depends only on the master seed and its index.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let field = cfg.field()?;
    let choice = cfg.reduction.resolve_k(cfg.n)?;
    let mut solver = NoisySolver::new(cfg.profile.clone()).with_failure_mode(cfg.failure_mode);
    if let Some(q) = cfg.solver_queries {
        solver = solver.with_matrix_queries(q);
    }
    let rows: Vec<TrialRow> = if cfg.workers == 1 {
        (0..cfg.trials)
            .map(|t| run_trial(cfg, field, &solver, t))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
        pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, field, &solver, t))
                .collect::<Result<_>>()
        })?
    };
    let summary = summarize(cfg, choice, &rows);
    let report = CampaignReport { summary, rows };
    if let Some(dir) = &cfg.out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub k: usize,
    pub padded_n: usize,
    pub trials: u64,
    pub success_rate: f64,
    pub mean_alg_queries: f64,
    pub std_err_alg_queries: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of `ln(mean ALG queries)` against `ln α`.
    pub slope: f64,
    pub slope_std_err: f64,
    pub intercept: f64,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "alpha,k,padded_n,trials,success_rate,mean_alg_queries,std_err_alg_queries\n",
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.alpha,
                p.k,
                p.padded_n,
                p.trials,
                p.success_rate,
                p.mean_alg_queries,
                p.std_err_alg_queries
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), self.to_csv())?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("sweep.json"), json)?;
        Ok(())
    }
}

/// Log-log fit of mean ALG queries against `α`. The base profile is rescaled
/// to each average; the block count is re-derived per `α` unless fixed.
pub fn scaling_sweep(base: &ExperimentConfig, alphas: &[f64]) -> Result<SweepTable> {
    if alphas.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a sweep needs at least 3 alphas to fit a slope, got {}",
            alphas.len()
        )));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {a} is not in (0, 1]"
        )));
    }
    // Reject a degenerate fit before spending any trials on it.
    let xs: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
    if xs.iter().all(|x| *x == xs[0]) {
        return Err(Error::InvalidParameter(
            "all alphas are equal; the fit is degenerate".into(),
        ));
    }
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut cfg = base.clone();
        cfg.profile = base.profile.with_average(alpha)?;
        cfg.reduction.alpha = alpha;
        cfg.out_dir = None;
        let report = run_campaign(&cfg)?;
        let q: Vec<f64> = report.rows.iter().map(|r| r.alg_queries as f64).collect();
        let mean = report.summary.mean_alg_queries;
        let var = if q.len() > 1 {
            q.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (q.len() - 1) as f64
        } else {
            0.0
        };
        points.push(SweepPoint {
            alpha,
            k: report.summary.k,
            padded_n: report.summary.padded_n,
            trials: report.summary.trials,
            success_rate: report.summary.success_rate,
            mean_alg_queries: mean,
            std_err_alg_queries: (var / q.len() as f64).sqrt(),
        });
    }
    if let Some(p) = points.iter().find(|p| p.mean_alg_queries <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "no ALG queries recorded at alpha = {}",
            p.alpha
        )));
    }
    let ys: Vec<f64> = points.iter().map(|p| p.mean_alg_queries.ln()).collect();
    let LineFit {
        slope,
        intercept,
        slope_std_err,
    } = fit_line(&xs, &ys)?;
    let table = SweepTable {
        points,
        slope,
        slope_std_err,
        intercept,
    };
    if let Some(dir) = &base.out_dir {
        table.write(dir)?;
    }
    Ok(table)
}
