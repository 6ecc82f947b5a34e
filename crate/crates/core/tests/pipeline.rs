use adabound_core::config::Config;
use adabound_core::geometry::{box_diameter_inf, FeasibleBox};
use adabound_core::harness::{
    checkpoint_from_str, checkpoint_to_string, run_experiment, sweep, theorem4_bound, trace_to_string, RunConfig,
    SweepPoint, Theorem4Inputs,
};
use adabound_core::optimizers::{init_state, step, Method};
use adabound_core::problems::{make_smooth_problem, SmoothKind};
use adabound_core::verify::theorem4_optimizer;

#[test]
fn bound_holds_for_a_concrete_linear_run() {
    let feasible = FeasibleBox::uniform(3, -1.0, 1.0).unwrap();
    let problem = make_smooth_problem(SmoothKind::LinearRandom, 3, 0, feasible.clone(), 11).unwrap();
    let opt = theorem4_optimizer();
    let horizon = 2_000;
    let g2 = (1..=horizon)
        .map(|t| {
            problem
                .linear_coefficients(t)
                .unwrap()
                .iter()
                .map(|a| a * a)
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    let out = run_experiment(&RunConfig::new(problem, opt.clone(), horizon).with_record_every(horizon)).unwrap();
    let (l_inf, r_inf) = opt.bound.bounds(1).unwrap();
    let bound = theorem4_bound(&Theorem4Inputs {
        d_inf: box_diameter_inf(&feasible),
        dim: 3,
        beta1: 0.9,
        lambda: 0.9,
        l_inf,
        r_inf,
        g2,
        horizon,
        inv_rate_sum: out.state.base_rates().unwrap().iter().map(|r| 1.0 / r).sum(),
    })
    .unwrap();
    let regret = out.last().regret.unwrap();
    assert!(bound.is_finite());
    assert!(regret <= bound, "{regret} > {bound}");
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let mut cfg = Config::default();
    cfg.apply_text("problem.kind = logistic\nproblem.dim = 3\noptimizer.method = amsbound\nrun.steps = 80\n")
        .unwrap();
    let run = cfg.run_config().unwrap();
    let full = run_experiment(&run).unwrap();

    let feasible = run.problem.feasible_box();
    let mut state = init_state(&run.optimizer, run.x1.clone(), feasible).unwrap();
    for t in 1..=40 {
        let g = run.problem.gradient(t, state.x()).unwrap();
        step(&mut state, &run.optimizer, &g, feasible).unwrap();
    }
    let mut resumed = checkpoint_from_str(&run.optimizer, &checkpoint_to_string(&state)).unwrap();
    for t in 41..=80 {
        let g = run.problem.gradient(t, resumed.x()).unwrap();
        step(&mut resumed, &run.optimizer, &g, feasible).unwrap();
    }
    assert_eq!(resumed.x(), full.final_x());
    assert_eq!(resumed.v_hat(), full.state.v_hat());
}

#[test]
fn coarse_step_size_grid_for_sgd() {
    let mut cfg = Config::default();
    cfg.apply_text("optimizer.method = sgd\nrun.steps = 200\ngrid.optimizer.alpha = 100, 10, 1, 0.1, 0.01\n")
        .unwrap();
    let points: Vec<SweepPoint> = cfg
        .grid_points()
        .unwrap()
        .into_iter()
        .map(|(label, point)| SweepPoint {
            label,
            config: point.run_config(),
            trace_path: None,
        })
        .collect();
    let rows = sweep(&points, 3).unwrap();
    assert_eq!(rows.len(), 5);
    for (row, point) in rows.iter().zip(&points) {
        let direct = run_experiment(point.config.as_ref().unwrap()).unwrap();
        assert_eq!(row.final_loss, Some(direct.last().loss));
        assert_eq!(row.final_avg_regret, direct.last().avg_regret);
    }
    // Smaller steps land closer to the moving quadratic's mean than alpha = 100.
    assert!(rows[3].final_avg_regret.unwrap() < rows[0].final_avg_regret.unwrap());
}

#[test]
fn parallel_runs_match_sequential_bytes() {
    let configs: Vec<RunConfig> = Method::ALL
        .iter()
        .map(|m| {
            let mut cfg = Config::default();
            cfg.apply_text("problem.kind = quadratic\nproblem.dim = 4\nproblem.box = -3,3\nrun.steps = 300\n")
                .unwrap();
            cfg.set("optimizer.method", m.as_str()).unwrap();
            cfg.run_config().unwrap()
        })
        .collect();
    let sequential: Vec<String> = configs
        .iter()
        .map(|c| trace_to_string(&run_experiment(c).unwrap().records))
        .collect();
    let parallel: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || trace_to_string(&run_experiment(c).unwrap().records)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(sequential, parallel);
}
