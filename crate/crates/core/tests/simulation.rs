use storesize::model::SystemModel;
use storesize::simulator::{
    compare_exact_vs_sim, simulate, simulate_outage_curve, SimConfig, SimMetric, SimSettings,
};
use storesize::spectral::solve_spectrum;

fn settings(seed: u64) -> SimSettings {
    SimSettings {
        horizon: 2e4,
        warmup: 200.0,
        replications: 16,
        seed,
    }
}

#[test]
fn backlog_curve_agrees_with_exact_solution() {
    for &(n, chi, c) in &[(1, 0.5, 0.8), (5, 0.5, 2.5), (20, 0.5, 8.3)] {
        let m = SystemModel::from_parts(n, chi, c).unwrap();
        let sol = solve_spectrum(&m).unwrap();
        let bs = [0.0, 0.5, 1.0, 2.0];
        let cfg = SimConfig::new(m, 0.0, settings(7), SimMetric::BacklogExceedance);
        let est = simulate_outage_curve(&cfg, &bs).unwrap();
        for (b, e) in bs.iter().zip(&est) {
            let z = e.z_score(sol.outage_probability(*b));
            assert!(
                z.abs() < 4.0,
                "N={n} b={b}: sim {} exact {} z={z}",
                e.mean,
                sol.outage_probability(*b)
            );
        }
    }
}

#[test]
fn comparison_flags_nothing_for_correct_solver() {
    let cases = vec![
        (
            SystemModel::from_parts(10, 0.5, 4.4).unwrap(),
            vec![0.0, 1.0, 3.0],
        ),
        (
            SystemModel::from_parts(3, 1.0, 1.8).unwrap(),
            vec![0.25, 2.0],
        ),
    ];
    let rows = compare_exact_vs_sim(&cases, settings(11));
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert!(r.error.is_none());
        assert!(r.z_score.unwrap().abs() < 4.0, "{r:?}");
    }
}

#[test]
fn loss_fraction_is_bounded_by_backlog_exceedance() {
    // A finite store of size b loses energy only while the unbounded backlog
    // would exceed b, so the loss rate is small whenever the outage is.
    let m = SystemModel::from_parts(10, 0.5, 4.4).unwrap();
    let loss = simulate(&SimConfig::new(
        m,
        2.0,
        settings(3),
        SimMetric::LossFraction,
    ))
    .unwrap();
    let exceed = solve_spectrum(&m).unwrap().outage_probability(2.0);
    assert!(
        loss.mean >= 0.0 && loss.mean < exceed,
        "{} vs {exceed}",
        loss.mean
    );
}

#[test]
fn seeds_change_estimates_but_not_reproducibility() {
    let m = SystemModel::from_parts(5, 0.5, 2.5).unwrap();
    let run = |seed| {
        simulate(&SimConfig::new(
            m,
            1.0,
            settings(seed),
            SimMetric::BacklogExceedance,
        ))
        .unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).mean, run(6).mean);
}
