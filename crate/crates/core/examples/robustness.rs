//! Graph-augmented vs. baseline robustness curves on synthetic data.
//!
//! Usage: `cargo run --release --example robustness [n_seeds]`

use std::time::Instant;

use leadaug::harness::RobustnessExperiment;

fn main() {
    let n_seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let experiment = RobustnessExperiment::desk_scale();
    let start = Instant::now();
    let mut wins = 0;
    for seed in 0..n_seeds {
        let cmp = experiment.run(seed).expect("experiment failed");
        let best = cmp.search.best_cell();
        println!(
            "seed {seed}: best cell {} (mean {:.4}); graph policy {:?}, gamma {}",
            best.cell.index, best.mean, cmp.graph_policy.graph, cmp.graph_policy.gamma
        );
        for (b, g) in cmp.baseline_curve.iter().zip(&cmp.graph_curve) {
            println!("  eps {:.3}  baseline {:.4}  graph {:.4}", b.epsilon, b.macro_f1, g.macro_f1);
        }
        wins += cmp.graph_dominates() as u32;
    }
    println!("graph dominates in {wins}/{n_seeds} seeds, {:.1}s", start.elapsed().as_secs_f64());
}
