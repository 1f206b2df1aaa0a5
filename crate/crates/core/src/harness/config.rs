//! Flat `key = value` experiment configuration.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored.
//! Keys are case-sensitive. `modulus`, `n` and `profile` are required.
//!
//! ```text
//! modulus = 5
//! n = 8
//! profile = planted       # uniform | good_bad | planted
//! alpha = 0.25
//! bad_fraction = 0.5
//! k = 2
//! trials = 500
//! input = planted_bad     # random | planted_bad | exhaustive_tiny
//! baseline = true
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::reduction::{KMode, ReductionConfig};
use crate::solver::{FailureMode, Predicate, SolverProfile};
use crate::verify::{CostAccounting, VerifierConfig, VerifierMode};

/// How each trial's worst-case input is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Uniform `(M, v)`.
    #[default]
    Random,
    /// Uniform over the inputs the profile marks as bad.
    PlantedBad,
    /// Trial `t` gets `(M, v)` number `t mod p^(n²+n)` in lexicographic order.
    ExhaustiveTiny,
}

/// Optional pass/fail thresholds checked by `--assert`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Thresholds {
    pub min_success_rate: Option<f64>,
    pub max_baseline_rate: Option<f64>,
    /// Wrong returns must stay within the verifier's error budget.
    pub soundness: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub modulus: u64,
    pub n: usize,
    pub profile: SolverProfile,
    pub failure_mode: FailureMode,
    /// Charged matrix reads per solver call; `None` reads all `n²` entries.
    pub solver_queries: Option<usize>,
    pub reduction: ReductionConfig,
    pub trials: u64,
    pub input: InputMode,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
    /// Also run one bare verified solver call per trial.
    pub baseline: bool,
    /// Fill the `wall_ms` column. Off by default so reports stay reproducible.
    pub record_wall_clock: bool,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the three required keys.
    pub fn new(modulus: u64, n: usize, profile: SolverProfile) -> Self {
        let alpha = match &profile {
            SolverProfile::Uniform { alpha } | SolverProfile::PlantedAdversarial { alpha, .. } => {
                *alpha
            }
            SolverProfile::GoodBadPartition { .. } => ReductionConfig::default().alpha,
        };
        Self {
            modulus,
            n,
            profile,
            failure_mode: FailureMode::default(),
            solver_queries: None,
            reduction: ReductionConfig {
                alpha,
                ..ReductionConfig::default()
            },
            trials: 100,
            input: InputMode::Random,
            seed: 0,
            workers: 1,
            out_dir: None,
            baseline: false,
            record_wall_clock: false,
            thresholds: Thresholds {
                soundness: true,
                ..Thresholds::default()
            },
        }
    }

    pub fn field(&self) -> Result<PrimeField> {
        PrimeField::new(self.modulus)
    }

    pub fn validate(&self) -> Result<()> {
        let field = self.field()?;
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.profile.validate()?;
        self.reduction.validate()?;
        if self.input == InputMode::PlantedBad
            && matches!(self.profile, SolverProfile::Uniform { .. })
        {
            return Err(Error::Config(
                "input = planted_bad needs a profile with a bad region".into(),
            ));
        }
        if self.input == InputMode::ExhaustiveTiny {
            crate::solver::enumeration_sizes(self.n, field)?;
        }
        Ok(())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            if map
                .insert(key.to_string(), (no + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    no + 1
                )));
            }
        }
        Ok(Self { map })
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, value)) => value
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse `{key} = {value}`"))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn take_choice<T>(&mut self, key: &str, choices: &[(&str, T)]) -> Result<Option<T>>
    where
        T: Clone,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, value)) => choices
                .iter()
                .find(|(name, _)| *name == value)
                .map(|(_, v)| Some(v.clone()))
                .ok_or_else(|| {
                    let names: Vec<_> = choices.iter().map(|(n, _)| *n).collect();
                    Error::Config(format!(
                        "line {line}: `{key}` must be one of {}, got `{value}`",
                        names.join(", ")
                    ))
                }),
        }
    }
}

fn parse_predicate(e: &mut Entries) -> Result<Predicate> {
    let kind = e
        .take_choice(
            "predicate",
            &[("first_zero", 0), ("vector_hash", 1), ("pair_hash", 2)],
        )?
        .unwrap_or(0);
    let seed = e.take("predicate_seed")?.unwrap_or(0);
    let fraction = e.take("predicate_fraction")?.unwrap_or(0.5);
    Ok(match kind {
        0 => Predicate::FirstEntryZero,
        1 => Predicate::VectorHash { seed, fraction },
        _ => Predicate::PairHash { seed, fraction },
    })
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let modulus: u64 = e.require("modulus")?;
        let n: usize = e.require("n")?;
        let kind = e
            .take_choice(
                "profile",
                &[("uniform", 0), ("good_bad", 1), ("planted", 2)],
            )?
            .ok_or_else(|| Error::Config("missing required key `profile`".into()))?;
        let alpha: Option<f64> = e.take("alpha")?;
        let need_alpha =
            |a: Option<f64>| a.ok_or_else(|| Error::Config("missing required key `alpha`".into()));
        let profile = match kind {
            0 => SolverProfile::Uniform {
                alpha: need_alpha(alpha)?,
            },
            1 => SolverProfile::GoodBadPartition {
                predicate: parse_predicate(&mut e)?,
                alpha_good: e.require("alpha_good")?,
                alpha_bad: e.require("alpha_bad")?,
            },
            _ => SolverProfile::PlantedAdversarial {
                seed: e.take("profile_seed")?.unwrap_or(0),
                bad_fraction: e.take("bad_fraction")?.unwrap_or(0.5),
                alpha: need_alpha(alpha)?,
            },
        };

        let mut cfg = ExperimentConfig::new(modulus, n, profile);
        let field = cfg.field()?;
        cfg.reduction.alpha = match e.take("reduction_alpha")? {
            Some(a) => a,
            None => alpha.unwrap_or_else(|| cfg.profile.declared_average(field)),
        };
        if let Some(m) = e.take_choice(
            "failure_mode",
            &[
                ("uniform_wrong", FailureMode::UniformWrong),
                ("perturb_one", FailureMode::PerturbOne),
            ],
        )? {
            cfg.failure_mode = m;
        }
        cfg.solver_queries = e.take("solver_queries")?;

        let r = &mut cfg.reduction;
        if let Some(d) = e.take("delta")? {
            r.delta = d;
        }
        match e.take_raw("k") {
            None => {}
            Some((_, v)) if v == "auto" => r.k = None,
            Some((line, v)) => {
                r.k =
                    Some(v.parse().map_err(|_| {
                        Error::Config(format!("line {line}: cannot parse `k = {v}`"))
                    })?)
            }
        }
        if let Some(m) =
            e.take_choice("k_mode", &[("desk", KMode::Desk), ("paper", KMode::Paper)])?
        {
            r.k_mode = m;
        }
        for (key, slot) in [("c0", &mut r.c0), ("c1", &mut r.c1), ("c2", &mut r.c2)] {
            if let Some(c) = e.take(key)? {
                *slot = c;
            }
        }
        r.boost_rounds = e.take("boost_rounds")?;
        let mut verifier = VerifierConfig::default();
        if let Some(eps) = e.take("epsilon")? {
            verifier.epsilon = eps;
        }
        if let Some(m) = e.take_choice(
            "verifier_mode",
            &[
                ("probabilistic", VerifierMode::Probabilistic),
                ("exact", VerifierMode::Exact),
            ],
        )? {
            verifier.mode = m;
        }
        if let Some(a) = e.take_choice(
            "accounting",
            &[
                ("paper", CostAccounting::PaperModel),
                ("actual", CostAccounting::Actual),
            ],
        )? {
            verifier.accounting = a;
        }
        r.verifier = verifier;

        if let Some(t) = e.take("trials")? {
            cfg.trials = t;
        }
        if let Some(m) = e.take_choice(
            "input",
            &[
                ("random", InputMode::Random),
                ("planted_bad", InputMode::PlantedBad),
                ("exhaustive_tiny", InputMode::ExhaustiveTiny),
            ],
        )? {
            cfg.input = m;
        }
        if let Some(s) = e.take("seed")? {
            cfg.seed = s;
        }
        if let Some(w) = e.take("workers")? {
            cfg.workers = w;
        }
        cfg.out_dir = e.take::<String>("out")?.map(PathBuf::from);
        if let Some(b) = e.take("baseline")? {
            cfg.baseline = b;
        }
        if let Some(b) = e.take("wall_clock")? {
            cfg.record_wall_clock = b;
        }
        cfg.thresholds.min_success_rate = e.take("min_success_rate")?;
        cfg.thresholds.max_baseline_rate = e.take("max_baseline_rate")?;
        if let Some(b) = e.take("assert_soundness")? {
            cfg.thresholds.soundness = b;
        }

        if let Some((key, (line, _))) = e.map.into_iter().next() {
            return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
