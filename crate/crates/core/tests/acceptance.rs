//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line before it
//! asserts, so `cargo test --test acceptance -- --nocapture` reads as a
//! report.

use std::fs;

use ipsl_core::config::{ExperimentConfig, Mode};
use ipsl_core::emergence::{assign_tiers, degree_distribution, fit_power_law, grow_network};
use ipsl_core::engine::{select_projects, selection_probabilities, Simulation};
use ipsl_core::evolution::{evolve, GaConfig};
use ipsl_core::metrics::{gini, spearman};
use ipsl_core::rng::{substream, Stream};
use ipsl_core::runner::{ablate, execute};
use ipsl_core::{Opportunity, Project, SimConfig, Tier};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: &str, pass: bool, detail: String) {
    println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn paired_seeds() -> Vec<u64> {
    let mut cfg = ExperimentConfig::with_mode(Mode::Ablate);
    cfg.replications = 30;
    cfg.replication_seeds()
}

#[test]
fn learning_beats_frozen_control() {
    let pairs = ablate(&SimConfig::default(), &paired_seeds(), 0).unwrap();
    let wins = pairs.iter().filter(|p| p.success_rate_learning > p.success_rate_control).count();
    let uplift = pairs.iter().map(|p| p.success_rate_learning - p.success_rate_control).sum::<f64>()
        / pairs.len() as f64;
    let pass = wins * 10 >= pairs.len() * 8 && uplift > 0.0;
    report(
        "learning-uplift",
        pass,
        format!("learning wins {wins}/{} pairs (need >= 80%), mean uplift {uplift:.6} (need > 0)", pairs.len()),
    );
    assert!(pass);
}

#[test]
fn accuracy_tracks_input_influence() {
    let pairs = ablate(&SimConfig::default(), &paired_seeds(), 0).unwrap();
    let positive = pairs.iter().filter(|p| p.terminal_spearman.is_some_and(|r| r > 0.0)).count();
    let pass = positive * 10 >= pairs.len() * 8;
    report(
        "accuracy-influence",
        pass,
        format!("Spearman(accuracy, sum w_ih) > 0 in {positive}/{} seeds (need >= 80%)", pairs.len()),
    );
    assert!(pass);
}

#[test]
fn frozen_learning_leaves_state_untouched() {
    let config = SimConfig { seed: 17, ..SimConfig::default() }.without_learning();
    let mut sim = Simulation::new(config).unwrap();
    let before = sim.organization().clone();
    let records = sim.run_to_end().unwrap();
    let after = sim.organization();
    let bits = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let statuses = |o: &ipsl_core::Organization| o.agents.iter().map(|a| a.status).collect::<Vec<_>>();
    let same = records.len() == 500
        && bits(&statuses(&before)) == bits(&statuses(after))
        && bits(&before.graph.w_ih) == bits(&after.graph.w_ih)
        && bits(&before.graph.w_ho) == bits(&after.graph.w_ho)
        && bits(&before.graph.rep_hid) == bits(&after.graph.rep_hid);
    report("frozen-state", same, format!("{} ticks with eta = 0, state bit-identical: {same}", records.len()));
    assert!(same);
}

#[test]
fn selection_is_shift_invariant_and_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..12);
        let statuses: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let shift = rng.random_range(-50.0..50.0);
        let tau = rng.random_range(0.1..3.0);
        let shifted: Vec<f64> = statuses.iter().map(|s| s + shift).collect();
        let p = selection_probabilities(&statuses, tau);
        let q = selection_probabilities(&shifted, tau);
        for (a, b) in p.iter().zip(&q) {
            worst = worst.max((a - b).abs());
        }
    }

    let trials = 100_000;
    let mut draws = substream(11, Stream::Selection);
    let project = |id: u64, champion: usize| Project {
        champion: Some(champion),
        ..Project::new(Opportunity { id, latent_quality: 0.5, origin: 0 }, 0.5)
    };
    let mut first = 0usize;
    for _ in 0..trials {
        let funded = select_projects(1, vec![project(0, 0), project(1, 1)], &[2.0, 1.0], 1, 1.0, &mut draws).unwrap();
        if funded[0].opportunity.id == 0 {
            first += 1;
        }
    }
    let share = first as f64 / trials as f64;
    let pass = worst <= 1e-12 && (share - 0.7311).abs() <= 0.01;
    report(
        "softmax-selection",
        pass,
        format!("max shift drift {worst:e} (<= 1e-12), P(status 2 over 1, tau 1) = {share:.4} (0.7311 +/- 0.01)"),
    );
    assert!(pass);
}

#[test]
fn grown_networks_are_scale_free() {
    let (n, m) = (10_000, 2);
    let mut gammas = Vec::new();
    let mut structural = true;
    for seed in 0..20u64 {
        let g = grow_network(n, m, &mut substream(seed, Stream::Environment)).unwrap();
        let expected_edges = m * (m + 1) / 2 + (n - m - 1) * m;
        structural &= g.is_connected() && g.edges().len() == expected_edges;
        gammas.push(fit_power_law(&degree_distribution(&g), 2).unwrap());
    }
    let mean = gammas.iter().sum::<f64>() / gammas.len() as f64;
    let pass = structural && (2.5..=3.5).contains(&mean);
    report(
        "scale-free-growth",
        pass,
        format!("mean gamma {mean:.4} over 20 seeds (need [2.5, 3.5]), connected with exact edge counts: {structural}"),
    );
    assert!(pass);
}

#[test]
fn tiers_partition_by_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for trial in 0..100 {
        let n: usize = rng.random_range(20..600);
        let m: usize = rng.random_range(1..4);
        let out_pct: usize = rng.random_range(5..30);
        let in_pct: usize = rng.random_range(20..60);
        let g = grow_network(n, m, &mut rng).unwrap();
        let t = assign_tiers(&g, out_pct as f64 / 100.0, in_pct as f64 / 100.0).unwrap();
        let n_out = (out_pct * n).div_ceil(100);
        let n_in = (in_pct * n).div_ceil(100);
        let (outs, ins, hid) = (t.nodes_in(Tier::Output), t.nodes_in(Tier::Input), t.nodes_in(Tier::Hidden));
        let deg = g.degrees();
        let max_in = ins.iter().map(|&v| deg[v]).max().unwrap();
        let min_out = outs.iter().map(|&v| deg[v]).min().unwrap();
        let ok = outs.len() == n_out
            && ins.len() == n_in
            && hid.len() == n - n_out - n_in
            && t.tiers.len() == n
            && max_in <= min_out;
        if !ok {
            failures.push(trial);
        }
    }
    let pass = failures.is_empty();
    report("tier-partition", pass, format!("100 graphs, failing trials: {failures:?}"));
    assert!(pass);
}

#[test]
fn evolution_improves_held_out_score() {
    let ga = GaConfig::default();
    let mut improved = 0;
    let mut monotone = true;
    for seed in 0..20u64 {
        let result = evolve(&ga, &SimConfig { seed, ..SimConfig::default() }, 0).unwrap();
        let heldout: Vec<f64> = result.generations.iter().map(|g| g.heldout_best).collect();
        if heldout.last().unwrap() > &heldout[0] {
            improved += 1;
        }
        monotone &= heldout.windows(2).all(|w| w[1] >= w[0]);
    }
    let pass = improved * 10 >= 20 * 8 && monotone;
    report(
        "evolution-heldout",
        pass,
        format!("final held-out best above generation 0 in {improved}/20 seeds (need >= 80%), non-decreasing in all: {monotone}"),
    );
    assert!(pass);
}

#[test]
fn metric_reference_values() {
    let rho = spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap();
    let g = gini(&[0.0, 0.0, 0.0, 1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let c = rng.random_range(0.01..1000.0);
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        worst = worst.max((gini(&xs).unwrap() - gini(&scaled).unwrap()).abs());
    }
    let pass = rho == 0.5 && g == 0.75 && worst <= 1e-12;
    report(
        "metric-references",
        pass,
        format!("spearman {rho}, gini {g}, max scale drift {worst:e} (<= 1e-12)"),
    );
    assert!(pass);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let mut mismatched = Vec::new();
    for mode in [Mode::Run, Mode::Emerge, Mode::Evolve, Mode::Ablate] {
        let mut cfg = ExperimentConfig::with_mode(mode);
        cfg.master_seed = 3;
        cfg.replications = if mode == Mode::Ablate { 30 } else { 2 };
        if mode == Mode::Evolve {
            cfg.ga.generations = 4;
        }
        let mut contents = Vec::new();
        for threads in [1, 8] {
            let dir = tempfile::tempdir().unwrap();
            cfg.threads = threads;
            cfg.output_dir = dir.path().to_path_buf();
            let mut files: Vec<(String, Vec<u8>)> = execute(&cfg)
                .unwrap()
                .into_iter()
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
                .collect();
            files.sort();
            contents.push(files);
        }
        if contents[0] != contents[1] || contents[0].is_empty() {
            mismatched.push(format!("{mode:?}"));
        }
    }
    let pass = mismatched.is_empty();
    report("thread-determinism", pass, format!("modes differing between 1 and 8 threads: {mismatched:?}"));
    assert!(pass);
}
