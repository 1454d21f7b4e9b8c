use rand::Rng as _;

use micrograph::seed;
use micrograph::synth::{self, motif_purity, purity, SynthSpec};
use micrograph::trainer::{TrainConfig, TrainState};

/// Two-sided 1% critical value of Student's t with 4 degrees of freedom.
const T4_P01: f64 = 4.604;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Untrained purity over five seeds against the purity of uniformly random
/// slot assignments of the same labelled subgraphs (Welch statistic,
/// conservative 4 degrees of freedom).
#[test]
fn untrained_purity_matches_random_slots() {
    let data = synth::generate(&SynthSpec::default()).unwrap();
    let mut untrained = Vec::new();
    let mut null = Vec::new();
    for s in 0..5 {
        let cfg = TrainConfig {
            seed: s,
            ..TrainConfig::default()
        };
        let state = TrainState::init(3, &cfg).unwrap();
        let report = motif_purity(&data.graphs, &data.truth, &state, &cfg, 8).unwrap();
        untrained.push(report.purity);

        let labels: Vec<usize> = (0..8)
            .flat_map(|t| std::iter::repeat_n(t, report.table.iter().map(|row| row[t]).sum()))
            .collect();
        let mut rng = seed::rng(s, &[0x4E]);
        for _ in 0..40 {
            let mut table = vec![vec![0usize; 8]; cfg.num_motifs];
            for &t in &labels {
                table[rng.random_range(0..cfg.num_motifs)][t] += 1;
            }
            null.push(purity(&table).unwrap());
        }
    }
    let (mu, var) = mean_var(&untrained);
    let (mu0, var0) = mean_var(&null);
    let t = (mu - mu0) / (var / untrained.len() as f64 + var0 / null.len() as f64).sqrt();
    assert!(
        t.abs() < T4_P01,
        "untrained {untrained:.3?} (mean {mu:.3}) vs random slots {mu0:.3}: t = {t:.2}"
    );
}
