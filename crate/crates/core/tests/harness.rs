use fpl::bounds::VerdictStatus;
use fpl::harness::{read_trace, run_experiment, sweep, trace_to_string, RunConfig, RunOutput, Summary};

fn config(text: &str) -> RunConfig {
    RunConfig::from_kv_str(text).unwrap()
}

#[test]
fn single_expert_expected_loss_is_its_loss() {
    for env in ["bernoulli", "greedy_adversary"] {
        let c = config(&format!(
            "experts.n = 1\nhorizon = 300\nenvironment.kind = \"{env}\"\n"
        ));
        let record = run_experiment(&c).unwrap();
        assert_eq!(record.expected_loss().unwrap(), record.expert_losses[0]);
        assert_eq!(record.actual_loss(), record.expert_losses[0]);
    }
}

#[test]
fn follow_the_leader_is_always_wrong_on_alternating_losses() {
    let c = config("algorithm = \"fl\"\nenvironment.kind = \"fl_killer\"\nhorizon = 1000\n");
    let record = run_experiment(&c).unwrap();
    assert!(record.actual_loss() >= 999.0 - 1.0);
    assert!((record.min_loss() - 500.0).abs() <= 1.0);
    assert!(record.steps.iter().all(|r| r.eps_t.is_infinite()));
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let text = "experts.n = 5\nhorizon = 400\nmeasurement.kind = \"mc\"\nmeasurement.samples = 2000\nperturbation.seed = 11\n";
    let a = trace_to_string(&run_experiment(&config(text)).unwrap().steps).unwrap();
    let b = trace_to_string(&run_experiment(&config(text)).unwrap().steps).unwrap();
    assert_eq!(a, b);
    let other = trace_to_string(&run_experiment(&config(text).with_seed(12)).unwrap().steps).unwrap();
    assert_ne!(a, other);
}

#[test]
fn aggregates_equal_sums_of_rows() {
    let c = config("algorithm = \"ifpl_paired\"\nexperts.n = 4\nhorizon = 250\n");
    let out = RunOutput::new(&c, run_experiment(&c).unwrap()).unwrap();
    let rows = &out.record.steps;
    let ell: f64 = rows.iter().map(|r| r.ell_t.unwrap()).sum();
    let r: f64 = rows.iter().map(|r| r.r_t.unwrap()).sum();
    assert!((out.summary.expected_loss.unwrap() - ell).abs() <= 1e-9);
    assert!((out.summary.infeasible_loss.unwrap() - r).abs() <= 1e-9);
    assert_eq!(rows.last().unwrap().smin_t, out.summary.min_loss);
    let gap = out.summary.expected_loss.unwrap() - out.summary.infeasible_loss.unwrap();
    assert!(gap <= out.summary.rate_weighted_expected_loss.unwrap() + 1e-9);
}

#[test]
fn persisted_trace_reproduces_the_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        "algorithm = \"ifpl_paired\"\nexperts.n = 3\nhorizon = 200\n",
        "schedule.kind = \"self_confident\"\nexperts.n = 4\nhorizon = 300\n",
        "algorithm = \"hierarchy\"\nexperts.class = \"inverse_square\"\nexperts.n = 12\nhorizon = 300\n",
        "measurement.kind = \"mc\"\nmeasurement.samples = 5000\nexperts.n = 3\nhorizon = 100\nschedule.kind = \"sqrt_k_over_2t\"\n",
    ] {
        let c = config(text);
        let out = RunOutput::new(&c, run_experiment(&c).unwrap()).unwrap();
        out.write_to(dir.path()).unwrap();
        let summary = Summary::from_json(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary, out.summary);
        let steps = read_trace(std::fs::File::open(dir.path().join("trace.csv")).unwrap()).unwrap();
        assert_eq!(steps, out.record.steps);
        assert_eq!(summary.reverify(steps).unwrap(), out.summary.verdicts);
        assert!(summary.all_hold, "{text}: {:?}", summary.verdicts);
        assert!(summary
            .verdicts
            .iter()
            .any(|v| v.status == VerdictStatus::Holds));
    }
}

#[test]
fn single_seed_sweep_matches_a_run() {
    let c = config("experts.n = 3\nhorizon = 200\n");
    let report = sweep(&c, &[5]).unwrap();
    let out = RunOutput::new(&c.clone().with_seed(5), run_experiment(&c.clone().with_seed(5)).unwrap()).unwrap();
    assert_eq!(report.runs.len(), 1);
    assert_eq!(report.runs[0].actual_loss, out.summary.actual_loss);
    assert_eq!(report.runs[0].expected_loss, out.summary.expected_loss);
    assert_eq!(report.mean_actual_loss, out.summary.actual_loss);
}

#[test]
fn realized_loss_is_unbiased_over_seeds() {
    let c = config("experts.n = 4\nhorizon = 200\nperturbation.mode = \"initial_only\"\n");
    let seeds: Vec<u64> = (0..400).collect();
    let report = sweep(&c, &seeds).unwrap();
    let ell = report.runs[0].expected_loss.unwrap();
    assert!(report.runs.iter().all(|r| r.expected_loss == Some(ell)));
    assert!((report.mean_actual_loss - ell).abs() <= 3.0 * report.se_actual_loss);
}

#[test]
fn sweep_reports_failing_seeds_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.txt");
    std::fs::write(&path, "0 1\n1 0\n0 1\n").unwrap();
    let c = config(&format!(
        "environment.kind = \"playback\"\nenvironment.path = \"{}\"\nhorizon = 3\n",
        path.display()
    ));
    std::fs::write(&path, "0 1\n").unwrap();
    let report = sweep(&c, &[1, 2]).unwrap();
    assert_eq!(report.failures.len(), 2);
    assert!(!report.all_hold);
}

#[test]
fn greedy_adversary_drives_every_algorithm_it_supports() {
    for algorithm in ["fpl", "ifpl_paired", "fl", "fl_penalized", "deterministic_master"] {
        let c = config(&format!(
            "algorithm = \"{algorithm}\"\nexperts.n = 3\nhorizon = 100\nenvironment.kind = \"greedy_adversary\"\n"
        ));
        let out = RunOutput::new(&c, run_experiment(&c).unwrap()).unwrap();
        assert!(out.summary.all_hold, "{algorithm}: {:?}", out.summary.verdicts);
    }
    assert!(RunConfig::from_kv_str("algorithm = \"hierarchy\"\nenvironment.kind = \"greedy_adversary\"").is_err());
}
