//! Batch execution of experiment configurations.
//!
//! Every mode computes its outputs in memory first, with replications fanned
//! out over a worker pool and collected in seed order, then writes them. A
//! failed write removes whatever this run already wrote.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Mode};
use crate::csv::{opt_real, real, CsvDoc};
use crate::emergence::{assign_tiers, degree_distribution, fit_power_law, grow_network, to_influence_graph};
use crate::engine::{final_window_success_rate, Simulation, TickRecord};
use crate::error::{IpslError, Result};
use crate::evolution::evolve;
use crate::par;
use crate::rng::{substream, Stream};
use crate::types::SimConfig;

/// Fraction of final ticks used for success-rate comparisons.
pub const FINAL_WINDOW: f64 = 0.2;

pub const TICKS_HEADER: [&str; 9] = [
    "tick",
    "generated",
    "championed",
    "funded",
    "successes",
    "mean_status_in",
    "mean_status_hid",
    "mean_status_out",
    "spearman_acc_weight",
];
pub const SUMMARY_HEADER: [&str; 9] = [
    "seed",
    "ticks",
    "generated",
    "championed",
    "funded",
    "successes",
    "success_rate",
    "final_success_rate",
    "final_spearman_acc_weight",
];
pub const POWERLAW_HEADER: [&str; 4] = ["seed", "n", "m", "gamma"];
pub const GENERATIONS_HEADER: [&str; 5] =
    ["generation", "best_fitness", "mean_fitness", "best_gini", "heldout_best"];
pub const ABLATION_HEADER: [&str; 4] =
    ["seed", "learning_rate", "success_rate_learning", "success_rate_control"];

/// Render per-tick records as `ticks_<seed>.csv` content.
pub fn ticks_csv(records: &[TickRecord]) -> String {
    let mut doc = CsvDoc::new(&TICKS_HEADER);
    for r in records {
        doc.row(&[
            r.tick.to_string(),
            r.generated.to_string(),
            r.championed.to_string(),
            r.funded.to_string(),
            r.successes.to_string(),
            real(r.mean_status[0]),
            real(r.mean_status[1]),
            real(r.mean_status[2]),
            opt_real(r.spearman_acc_weight),
        ]);
    }
    doc.into_string()
}

/// One matched pair of runs: learning as configured against learning off.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationPair {
    pub seed: u64,
    pub learning_rate: f64,
    pub success_rate_learning: f64,
    pub success_rate_control: f64,
    /// Terminal Spearman(accuracy, Σ_h w_ih) of the learning run.
    pub terminal_spearman: Option<f64>,
}

/// Run learning and no-learning simulations on the same seeds.
pub fn ablate(sim: &SimConfig, seeds: &[u64], threads: usize) -> Result<Vec<AblationPair>> {
    par::try_ordered_map(seeds.to_vec(), threads, |seed| {
        let learning = SimConfig { seed, ..*sim };
        let control = learning.without_learning();
        let mut run = Simulation::new(learning)?;
        let learned = run.run_to_end()?;
        let baseline = Simulation::new(control)?.run_to_end()?;
        Ok(AblationPair {
            seed,
            learning_rate: sim.eta_status,
            success_rate_learning: final_window_success_rate(&learned, FINAL_WINDOW),
            success_rate_control: final_window_success_rate(&baseline, FINAL_WINDOW),
            terminal_spearman: learned.last().and_then(|r| r.spearman_acc_weight),
        })
    })
}

/// Files produced by one execution, in write order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }
}

/// Compute every output file of `config` without touching the filesystem.
pub fn render(config: &ExperimentConfig) -> Result<Outputs> {
    config.validate()?;
    let seeds = config.replication_seeds();
    let threads = config.threads;
    let mut out = Outputs::default();
    match config.mode {
        Mode::Run => {
            let runs = par::try_ordered_map(seeds, threads, |seed| {
                let records = Simulation::new(SimConfig { seed, ..config.sim })?.run_to_end()?;
                Ok::<_, IpslError>((seed, records))
            })?;
            let mut summary = CsvDoc::new(&SUMMARY_HEADER);
            for (seed, records) in &runs {
                out.add(format!("ticks_{seed}.csv"), ticks_csv(records));
                let sum = |f: fn(&TickRecord) -> usize| records.iter().map(f).sum::<usize>();
                let funded = sum(|r| r.funded);
                let successes = sum(|r| r.successes);
                let rate = if funded == 0 { 0.0 } else { successes as f64 / funded as f64 };
                summary.row(&[
                    seed.to_string(),
                    records.len().to_string(),
                    sum(|r| r.generated).to_string(),
                    sum(|r| r.championed).to_string(),
                    funded.to_string(),
                    successes.to_string(),
                    real(rate),
                    real(final_window_success_rate(records, FINAL_WINDOW)),
                    opt_real(records.last().and_then(|r| r.spearman_acc_weight)),
                ]);
            }
            out.add("summary.csv", summary.into_string());
        }
        Mode::Emerge => {
            let em = config.emergence;
            let grown = par::try_ordered_map(seeds, threads, |seed| {
                let g = grow_network(em.n, em.m, &mut substream(seed, Stream::Environment))?;
                let gamma = fit_power_law(&degree_distribution(&g), em.k_min).ok();
                let tiers = assign_tiers(&g, em.f_out, em.f_in)?;
                // the bridged graph must be runnable
                to_influence_graph(&g, &tiers)?;
                Ok::<_, IpslError>((seed, g.to_edge_list(), tiers.to_csv(), gamma))
            })?;
            let mut powerlaw = CsvDoc::new(&POWERLAW_HEADER);
            for (seed, edges, tiers, gamma) in grown {
                out.add(format!("edges_{seed}.txt"), edges);
                out.add(format!("tiers_{seed}.csv"), tiers);
                powerlaw.row(&[seed.to_string(), em.n.to_string(), em.m.to_string(), opt_real(gamma)]);
            }
            out.add("powerlaw.csv", powerlaw.into_string());
        }
        Mode::Evolve => {
            let single = seeds.len() == 1;
            for seed in seeds {
                let result = evolve(&config.ga, &SimConfig { seed, ..config.sim }, threads)?;
                let mut doc = CsvDoc::new(&GENERATIONS_HEADER);
                for g in &result.generations {
                    doc.row(&[
                        g.generation.to_string(),
                        real(g.best_fitness),
                        real(g.mean_fitness),
                        real(g.best_gini),
                        real(g.heldout_best),
                    ]);
                }
                let suffix = if single { String::new() } else { format!("_{seed}") };
                out.add(format!("generations{suffix}.csv"), doc.into_string());
                out.add(format!("best_genome{suffix}.csv"), result.best_genome.to_csv());
            }
        }
        Mode::Ablate => {
            let pairs = ablate(&config.sim, &seeds, threads)?;
            let mut doc = CsvDoc::new(&ABLATION_HEADER);
            for p in pairs {
                doc.row(&[
                    p.seed.to_string(),
                    real(p.learning_rate),
                    real(p.success_rate_learning),
                    real(p.success_rate_control),
                ]);
            }
            out.add("ablation.csv", doc.into_string());
        }
    }
    Ok(out)
}

/// Write `outputs` into `dir`. On failure every file written by this call is
/// removed before the error is returned.
pub fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| IpslError::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::with_capacity(outputs.files.len());
    for (name, contents) in &outputs.files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            // a failed write may leave a truncated file behind
            let _ = fs::remove_file(&path);
            return Err(IpslError::io(path, e));
        }
        written.push(path);
    }
    Ok(written)
}

/// Run an experiment end to end and return the paths written.
pub fn execute(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let outputs = render(config)?;
    write_outputs(&config.output_dir, &outputs)
}
