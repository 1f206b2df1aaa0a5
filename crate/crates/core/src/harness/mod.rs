//! Experiment runner: configuration, seeded campaigns, sweeps and reports.

mod bench;
mod campaign;
mod config;

pub use bench::{
    sampler_campaign, verify_bench, SamplerParams, SamplerReport, SamplerSetResult, VerifyParams,
    VerifyReport,
};
pub use campaign::{
    baseline_rng, run_campaign, scaling_sweep, trial_rng, CampaignReport, CampaignSummary,
    SourceStats, SweepPoint, SweepTable, TrialRow, CSV_HEADER,
};
pub use config::{ExperimentConfig, InputMode, Thresholds};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverProfile;

    fn perfect(n: usize, k: usize, trials: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(5, n, SolverProfile::Uniform { alpha: 1.0 });
        cfg.reduction.k = Some(k);
        cfg.trials = trials;
        cfg
    }

    #[test]
    fn perfect_solver_always_succeeds() {
        let report = run_campaign(&perfect(8, 2, 100)).unwrap();
        assert_eq!(report.rows.len(), 100);
        assert_eq!(report.summary.success_rate, 1.0);
        assert_eq!(report.summary.wrong_returns, 0);
        for (i, row) in report.rows.iter().enumerate() {
            assert_eq!(row.trial, i as u64);
            // Four blocks, each one alg4 = two alg3 = four alg1 calls.
            assert_eq!(row.alg_queries, 16);
            assert_eq!(row.boost_rounds_total, 4);
            // Every block row reads all of v once.
            assert_eq!(row.uv_queries, 16);
            assert_eq!(row.wall_ms, 0);
        }
    }

    #[test]
    fn csv_is_reproducible_and_worker_independent() {
        let mut cfg = perfect(4, 2, 20);
        cfg.profile = SolverProfile::Uniform { alpha: 0.5 };
        cfg.reduction.alpha = 0.5;
        let a = run_campaign(&cfg).unwrap().to_csv();
        let b = run_campaign(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        assert_eq!(a.lines().count(), 21);
        cfg.workers = 4;
        assert_eq!(run_campaign(&cfg).unwrap().to_csv(), a);
        cfg.seed = 1;
        assert_ne!(run_campaign(&cfg).unwrap().to_csv(), a);
    }

    #[test]
    fn reports_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = perfect(3, 1, 5);
        cfg.out_dir = Some(dir.path().to_path_buf());
        let report = run_campaign(&cfg).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
        assert_eq!(csv, report.to_csv());
        let json: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("summary.json")).unwrap(),
        )
        .unwrap();
        for key in ["success_rate", "ci_low", "ci_high", "mean_alg_queries"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn exhaustive_inputs_cycle() {
        let mut cfg = ExperimentConfig::new(2, 1, SolverProfile::Uniform { alpha: 1.0 });
        cfg.reduction.k = Some(1);
        cfg.input = InputMode::ExhaustiveTiny;
        cfg.trials = 8;
        let report = run_campaign(&cfg).unwrap();
        assert_eq!(report.summary.successes, 8);
    }

    #[test]
    fn thresholds_report_failures() {
        let mut cfg = perfect(2, 1, 5);
        cfg.profile = SolverProfile::Uniform { alpha: 0.0 };
        cfg.reduction.alpha = 1.0;
        cfg.reduction.c1 = 1.0;
        cfg.reduction.c2 = 1.0;
        cfg.thresholds.min_success_rate = Some(0.5);
        cfg.thresholds.max_baseline_rate = Some(0.1);
        let report = run_campaign(&cfg).unwrap();
        assert_eq!(report.summary.success_rate, 0.0);
        let failures = report.summary.failures();
        assert_eq!(failures.len(), 2, "{failures:?}");
        cfg.baseline = true;
        cfg.thresholds.min_success_rate = None;
        assert!(run_campaign(&cfg).unwrap().summary.failures().is_empty());
    }

    #[test]
    fn sweep_guards() {
        let cfg = perfect(2, 1, 2);
        assert!(scaling_sweep(&cfg, &[0.5]).is_err());
        assert!(scaling_sweep(&cfg, &[0.5, 0.25]).is_err());
        assert!(scaling_sweep(&cfg, &[1.0, 1.0, 1.0]).is_err());
        assert!(scaling_sweep(&cfg, &[1.0, 0.5, 0.0]).is_err());
    }

    #[test]
    fn small_sweep_fits() {
        let mut cfg = perfect(2, 2, 6);
        cfg.reduction.boost_rounds = Some(50);
        let table = scaling_sweep(&cfg, &[1.0, 0.5, 0.25]).unwrap();
        assert_eq!(table.points.len(), 3);
        assert!(table.slope < 0.0, "{table:?}");
        assert!(table.to_csv().lines().count() == 4);
    }
}
