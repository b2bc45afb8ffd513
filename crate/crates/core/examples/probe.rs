use std::time::Instant;

use amuse::{
    build_secants, empirical_generalization, empirical_ric, gaussian_baseline,
    generate_translated_squares, mse_sweep, pca_baseline, prefix_embedding, solve, step_size,
    GameConfig, RecoveryConfig, SecantBudget, TraceMode,
};

fn main() {
    let data = generate_translated_squares(16, 4).unwrap();
    let secants = build_secants(&data, SecantBudget::AtMost(2000), 1e-12, 7).unwrap();
    let m = secants.len();

    let solve_at = |rank: usize| {
        let mut cfg = GameConfig::new(rank);
        cfg.seed = 7;
        cfg.eta_override = Some(30.0 * step_size(m, rank));
        solve(&secants, &cfg).unwrap()
    };

    // criterion 7 shape: ranks 10/30/60, trace-matched baselines
    for rank in [10, 30, 60] {
        let start = Instant::now();
        let out = solve_at(rank);
        let delta = empirical_ric(&secants, &out.embedding).unwrap().delta_hat;
        let trace = out.embedding.trace();
        let pca = pca_baseline(&data, &secants, rank, TraceMode::Fixed(trace)).unwrap();
        let gauss = gaussian_baseline(&secants, rank, TraceMode::Fixed(trace), 7).unwrap();
        println!(
            "fig1 rank={rank}: {:.1}s amuse={delta:.4} pca={:.4} gauss={:.4}",
            start.elapsed().as_secs_f64(),
            empirical_ric(&secants, &pca).unwrap().delta_hat,
            empirical_ric(&secants, &gauss).unwrap().delta_hat,
        );
    }

    // criterion 10: fresh and prefix monotonicity, criterion 8 input
    let out10 = solve_at(10);
    let out100 = solve_at(100);
    let d10 = empirical_ric(&secants, &out10.embedding).unwrap().delta_hat;
    let d100 = empirical_ric(&secants, &out100.embedding).unwrap().delta_hat;
    let p10 = prefix_embedding(&out100.embedding, &secants, 10).unwrap();
    let p100 = prefix_embedding(&out100.embedding, &secants, 100).unwrap();
    let dp10 = empirical_ric(&secants, &p10).unwrap().delta_hat;
    let dp100 = empirical_ric(&secants, &p100).unwrap().delta_hat;
    println!("fresh: d10={d10:.4} d100={d100:.4} | prefix: d10={dp10:.4} d100={dp100:.4}");

    // criterion 8: generalization at eps=0.05, 500 trials, seed 11
    let gen = empirical_generalization(&data, &secants, &out100.embedding, 0.05, 500, 11).unwrap();
    println!(
        "gen: delta_hat={:.4} alpha={:.4} up_bound={:.4} low_bound={:.4} up={:.4} low={:.4} pass={}",
        gen.delta_hat,
        gen.alpha_bar,
        gen.upper_bound,
        gen.lower_bound,
        gen.max_distortion_upper,
        gen.max_distortion_lower,
        gen.pass
    );

    // small-rank eta sensitivity
    for scale in [10.0, 20.0, 30.0, 50.0, 100.0] {
        for rank in [10, 30] {
            let mut gc = GameConfig::new(rank);
            gc.seed = 7;
            gc.eta_override = Some(scale * step_size(m, rank));
            let out = solve(&secants, &gc).unwrap();
            let delta = empirical_ric(&secants, &out.embedding).unwrap().delta_hat;
            let trace = out.embedding.trace();
            let pca = pca_baseline(&data, &secants, rank, TraceMode::Fixed(trace)).unwrap();
            let pd = empirical_ric(&secants, &pca).unwrap().delta_hat;
            let gd = empirical_ric(
                &secants,
                &gaussian_baseline(&secants, rank, TraceMode::Fixed(trace), 7).unwrap(),
            )
            .unwrap()
            .delta_hat;
            println!("eta_scale={scale} rank={rank}: amuse={delta:.4} pca={pd:.4} gauss={gd:.4}");
        }
    }

    // lambda scale sweep under real noise
    for rank in [40, 60] {
        let mut gc = GameConfig::new(rank);
        gc.seed = 7;
        gc.eta_override = Some(30.0 * step_size(m, rank));
        let out = solve(&secants, &gc).unwrap();
        let gauss = gaussian_baseline(
            &secants,
            out.embedding.slots(),
            TraceMode::Fixed(out.embedding.trace()),
            7,
        )
        .unwrap();
        for lam in [0.001, 0.003, 0.01, 0.03] {
            let mut cfg = RecoveryConfig::new(7);
            cfg.snr_grid_db = vec![5.0, 10.0, 20.0, 30.0, 40.0];
            cfg.subset_size = 12;
            cfg.lambda_rule = amuse::LambdaRule::ScaledSupNorm(lam);
            cfg.max_iter = 4000;
            let report = mse_sweep(
                &data,
                &[
                    ("adaptive".into(), &out.embedding),
                    ("random".into(), &gauss),
                ],
                &cfg,
            )
            .unwrap();
            let fmt = |label: &str| -> String {
                report
                    .rows
                    .iter()
                    .filter(|r| r.label == label)
                    .map(|r| format!("{:.2e}", r.mean_mse))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            println!(
                "rank={rank} lam={lam}: adaptive [{}] random [{}]",
                fmt("adaptive"),
                fmt("random")
            );
        }
    }
}
