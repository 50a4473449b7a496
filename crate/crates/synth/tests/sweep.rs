use rsstitch_synth::{run_sweep, BenchSolver, SweepSpec};

fn spec(extra: &str) -> SweepSpec {
    let configs = if extra.contains("configs") { "" } else { "configs = 20\n" };
    SweepSpec::from_toml(&format!(
        "{configs}seed = 3\nk_random = [-1.0, 1.0]\nsolvers = [\"gs-disc\", \"rs-constacc\"]\n{extra}"
    ))
    .unwrap()
}

#[test]
fn global_shutter_column_is_exact_for_discrete_fits() {
    let s = spec("param = \"gamma\"\nvalues = [0.0]");
    let t = run_sweep(&s).unwrap();
    let r = t.get(BenchSolver::GsDisc, 0.0, 0.0).unwrap();
    assert_eq!(r.failures, 0);
    assert!(r.mean_err_px <= 1e-6, "{}", r.mean_err_px);
}

#[test]
fn first_order_data_is_fit_exactly_by_the_acceleration_model() {
    let s = spec("param = \"gamma\"\nvalues = [1.0]\ngenerator = \"differential\"");
    let t = run_sweep(&s).unwrap();
    let rs = t.get(BenchSolver::RsConstAcc, 0.0, 1.0).unwrap().mean_err_px;
    let gs = t.get(BenchSolver::GsDisc, 0.0, 1.0).unwrap().mean_err_px;
    assert!(rs <= 1e-3, "rs {rs}");
    assert!(gs >= 10.0 * rs, "gs {gs} rs {rs}");
}

#[test]
fn discrete_error_grows_with_readout_time() {
    let s = spec("param = \"gamma\"\nvalues = [0.0, 0.25, 0.5, 0.75, 1.0]");
    let t = run_sweep(&s).unwrap();
    let e: Vec<f64> = t.series(BenchSolver::GsDisc, 0.0).iter().map(|r| r.mean_err_px).collect();
    assert!(e.windows(2).all(|w| w[1] >= w[0]), "{e:?}");
}

#[test]
fn csv_is_reproducible() {
    let s = spec("param = \"k\"\nvalues = [-0.5, 0.5]\nconfigs = 4\nsigma_g = [0.0, 1.0]\n[ransac]\ntrials = 100");
    let a = run_sweep(&s).unwrap().to_csv();
    let b = run_sweep(&s).unwrap().to_csv();
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "sweep_param,sweep_value,solver,sigma_g,mean_err_px,std_err_px,n_configs,failures,fit");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1].ends_with(",lsq"));
    assert!(lines.last().unwrap().ends_with(",ransac"));
}

#[test]
fn other_seed_changes_the_table() {
    let a = run_sweep(&spec("param = \"gamma\"\nvalues = [1.0]\nconfigs = 3")).unwrap();
    let mut s = spec("param = \"gamma\"\nvalues = [1.0]\nconfigs = 3");
    s.seed = 4;
    let b = run_sweep(&s).unwrap();
    assert_ne!(a.to_csv(), b.to_csv());
}
