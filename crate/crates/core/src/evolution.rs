//! Genetic algorithm over influence structures.
//!
//! A genome is the flattened pair of weight matrices. Fitness is what the
//! output tier earns: the payoff of funded projects per tick, averaged over
//! evaluation episodes. Reputations are not inherited; they are relearned
//! within each lifetime.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::engine::{payoff, Simulation};
use crate::error::{IpslError, Result};
use crate::metrics;
use crate::par;
use crate::rng::{substream, Stream};
use crate::types::{new_organization_with_graph, InfluenceGraph, LayerSizes, Organization, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    pub sizes: LayerSizes,
    /// `w_ih` row-major followed by `w_ho` row-major.
    pub genes: Vec<f64>,
}

impl Genome {
    pub fn expected_len(sizes: LayerSizes) -> usize {
        sizes.n_in * sizes.n_hid + sizes.n_hid * sizes.n_out
    }

    pub fn new(sizes: LayerSizes, genes: Vec<f64>) -> Result<Self> {
        if genes.len() != Self::expected_len(sizes) {
            return Err(IpslError::Codec(format!(
                "genome has {} genes, layer sizes {}/{}/{} need {}",
                genes.len(),
                sizes.n_in,
                sizes.n_hid,
                sizes.n_out,
                Self::expected_len(sizes)
            )));
        }
        if let Some(g) = genes.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(IpslError::Codec(format!("gene {g} outside [0, 1]")));
        }
        Ok(Genome { sizes, genes })
    }

    pub fn random<R: Rng + ?Sized>(sizes: LayerSizes, rng: &mut R) -> Self {
        let genes = (0..Self::expected_len(sizes)).map(|_| rng.random::<f64>()).collect();
        Genome { sizes, genes }
    }

    /// CSV dump: a `# n_in=..,n_hid=..,n_out=..` size line, then
    /// `layer,from,to,weight` rows (`ih` then `ho`).
    pub fn to_csv(&self) -> String {
        let s = self.sizes;
        let mut out = format!("# n_in={},n_hid={},n_out={}\nlayer,from,to,weight\n", s.n_in, s.n_hid, s.n_out);
        let (ih, ho) = self.genes.split_at(s.n_in * s.n_hid);
        for (k, w) in ih.iter().enumerate() {
            out.push_str(&format!("ih,{},{},{}\n", k / s.n_hid, k % s.n_hid, crate::csv::real(*w)));
        }
        for (k, w) in ho.iter().enumerate() {
            out.push_str(&format!("ho,{},{},{}\n", k / s.n_out, k % s.n_out, crate::csv::real(*w)));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let sizes = parse_size_line(header)
            .ok_or_else(|| IpslError::Parse { line: 1, message: "expected `# n_in=..,n_hid=..,n_out=..`".into() })?;
        if lines.next().map(str::trim) != Some("layer,from,to,weight") {
            return Err(IpslError::Parse { line: 2, message: "expected `layer,from,to,weight` header".into() });
        }
        let mut genes = vec![f64::NAN; Self::expected_len(sizes)];
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 3;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || IpslError::Parse { line: line_no, message: format!("malformed row `{line}`") };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(bad());
            }
            let from: usize = cols[1].parse().map_err(|_| bad())?;
            let to: usize = cols[2].parse().map_err(|_| bad())?;
            let w: f64 = cols[3].parse().map_err(|_| bad())?;
            let slot = match cols[0] {
                "ih" if from < sizes.n_in && to < sizes.n_hid => from * sizes.n_hid + to,
                "ho" if from < sizes.n_hid && to < sizes.n_out => {
                    sizes.n_in * sizes.n_hid + from * sizes.n_out + to
                }
                _ => return Err(bad()),
            };
            genes[slot] = w;
        }
        if genes.iter().any(|g| g.is_nan()) {
            return Err(IpslError::Codec("genome CSV is missing weights".into()));
        }
        Genome::new(sizes, genes)
    }
}

fn parse_size_line(line: &str) -> Option<LayerSizes> {
    let body = line.trim().strip_prefix('#')?.trim();
    let mut vals = [None; 3];
    for part in body.split(',') {
        let (k, v) = part.split_once('=')?;
        let v: usize = v.trim().parse().ok()?;
        match k.trim() {
            "n_in" => vals[0] = Some(v),
            "n_hid" => vals[1] = Some(v),
            "n_out" => vals[2] = Some(v),
            _ => return None,
        }
    }
    Some(LayerSizes::new(vals[0]?, vals[1]?, vals[2]?))
}

pub fn encode(graph: &InfluenceGraph) -> Genome {
    let mut genes = Vec::with_capacity(graph.w_ih.len() + graph.w_ho.len());
    genes.extend_from_slice(&graph.w_ih);
    genes.extend_from_slice(&graph.w_ho);
    Genome { sizes: graph.sizes, genes }
}

/// Rebuild the influence graph; reputations start at 1.
pub fn decode(genome: &Genome) -> Result<InfluenceGraph> {
    let g = Genome::new(genome.sizes, genome.genes.clone())?;
    let split = g.sizes.n_in * g.sizes.n_hid;
    let graph = InfluenceGraph {
        sizes: g.sizes,
        w_ih: g.genes[..split].to_vec(),
        w_ho: g.genes[split..].to_vec(),
        rep_hid: vec![1.0; g.sizes.n_hid],
    };
    graph.validate().map_err(|e| IpslError::Codec(e.to_string()))?;
    Ok(graph)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub mutation_scale: f64,
    pub elitism: usize,
    /// Evaluation episodes per genome per generation.
    pub episodes: usize,
    /// Keep within-lifetime status learning active during evaluation.
    pub lifetime_learning: bool,
    /// Share of each funded project's payoff credited to its origin,
    /// champion and selector.
    pub benefit_split: [f64; 3],
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 24,
            generations: 40,
            tournament: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.05,
            mutation_scale: 0.15,
            elitism: 2,
            episodes: 4,
            lifetime_learning: true,
            benefit_split: [1.0 / 3.0; 3],
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(IpslError::config("population", "must be at least 2"));
        }
        if self.generations == 0 {
            return Err(IpslError::config("generations", "must be at least 1"));
        }
        if self.tournament == 0 || self.tournament > self.population {
            return Err(IpslError::config("tournament", "must lie in [1, population]"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(IpslError::config("crossover_rate", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(IpslError::config("mutation_rate", "must lie in [0, 1]"));
        }
        if !(self.mutation_scale >= 0.0) || !self.mutation_scale.is_finite() {
            return Err(IpslError::config("mutation_scale", "must be finite and >= 0"));
        }
        if self.elitism > self.population {
            return Err(IpslError::config("elitism", "must not exceed population"));
        }
        if self.episodes == 0 {
            return Err(IpslError::config("episodes", "must be at least 1"));
        }
        if self.benefit_split.iter().any(|s| !(*s >= 0.0)) {
            return Err(IpslError::config("benefit_split", "shares must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    /// Mean per-tick payoff of funded projects, averaged over episodes.
    pub fitness: f64,
    /// Accrued payoff per agent (global ids), averaged over episodes and
    /// clamped at 0.
    pub benefit_by_agent: Vec<f64>,
    /// Gini of `benefit_by_agent`; 0 when undefined.
    pub gini: f64,
    /// False when total benefit was 0 and the Gini is undefined.
    pub gini_defined: bool,
}

/// The organization a genome grows into: its decoded graph plus input
/// accuracies fixed by `config.seed`, so every episode faces the same
/// members.
pub fn organization_for(genome: &Genome, config: &SimConfig) -> Result<Organization> {
    let graph = decode(genome)?;
    new_organization_with_graph(config, graph, &mut substream(config.seed, Stream::Perception))
}

/// Run one episode per seed and score the output tier's funding decisions.
pub fn evaluate_fitness(
    genome: &Genome,
    config: &SimConfig,
    ga: &GaConfig,
    episode_seeds: &[u64],
) -> Result<FitnessReport> {
    if episode_seeds.len() != ga.episodes {
        return Err(IpslError::Contract(format!(
            "{} episode seeds for {} episodes",
            episode_seeds.len(),
            ga.episodes
        )));
    }
    let org = organization_for(genome, config)?;
    let run_config = if ga.lifetime_learning { *config } else { config.without_learning() };
    let sizes = config.sizes;
    let horizon = config.env.horizon as f64;
    let mut fitness_sum = 0.0;
    let mut benefit = vec![0.0; sizes.total()];
    for &seed in episode_seeds {
        let mut sim = Simulation::with_organization(run_config, org.clone(), seed)?;
        let mut total = 0.0;
        for _ in 0..config.env.horizon {
            let tick = sim.step()?;
            for p in &tick.funded {
                let value = payoff(p.outcome, config.env.tension);
                total += value;
                let champion = p.champion.expect("funded projects are championed");
                let selector = p.selector.expect("funded projects have a selector");
                benefit[p.opportunity.origin] += value * ga.benefit_split[0];
                benefit[sizes.hidden_id(champion)] += value * ga.benefit_split[1];
                benefit[sizes.output_id(selector)] += value * ga.benefit_split[2];
            }
        }
        fitness_sum += total / horizon;
    }
    let episodes = episode_seeds.len() as f64;
    let benefit_by_agent: Vec<f64> = benefit.into_iter().map(|b| (b / episodes).max(0.0)).collect();
    let (gini, gini_defined) = match metrics::gini(&benefit_by_agent) {
        Ok(g) => (g, true),
        Err(_) => (0.0, false),
    };
    Ok(FitnessReport { fitness: fitness_sum / episodes, benefit_by_agent, gini, gini_defined })
}

/// Fitness floor used for genomes that do not decode to a valid
/// organization: every funded project failing every tick.
fn worst_case_report(config: &SimConfig) -> FitnessReport {
    FitnessReport {
        fitness: -(config.budget as f64) * (1.0 + config.env.tension),
        benefit_by_agent: vec![0.0; config.sizes.total()],
        gini: 0.0,
        gini_defined: false,
    }
}

fn evaluate_or_floor(genome: &Genome, config: &SimConfig, ga: &GaConfig, seeds: &[u64]) -> Result<FitnessReport> {
    match evaluate_fitness(genome, config, ga, seeds) {
        Err(IpslError::Codec(_)) => Ok(worst_case_report(config)),
        other => other,
    }
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Pick `t` distinct individuals uniformly and return the fittest
/// (lowest index on ties).
pub fn tournament_select<R: Rng + ?Sized>(fitnesses: &[f64], t: usize, rng: &mut R) -> Result<usize> {
    if t == 0 || t > fitnesses.len() {
        return Err(IpslError::config("tournament", "must lie in [1, population]"));
    }
    let mut best: Option<usize> = None;
    for i in index::sample(rng, fitnesses.len(), t) {
        best = match best {
            Some(b) if fitnesses[b] > fitnesses[i] || (fitnesses[b] == fitnesses[i] && b < i) => Some(b),
            _ => Some(i),
        };
    }
    Ok(best.expect("t >= 1"))
}

/// Uniform crossover applied with probability `pc`; otherwise the children
/// are copies of the parents.
pub fn crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, pc: f64, rng: &mut R) -> Result<(Genome, Genome)> {
    if a.genes.len() != b.genes.len() || a.sizes != b.sizes {
        return Err(IpslError::Codec(format!(
            "cannot cross genomes of lengths {} and {}",
            a.genes.len(),
            b.genes.len()
        )));
    }
    let (mut c1, mut c2) = (a.clone(), b.clone());
    if rng.random::<f64>() < pc {
        for (x, y) in c1.genes.iter_mut().zip(c2.genes.iter_mut()) {
            if rng.random::<bool>() {
                std::mem::swap(x, y);
            }
        }
    }
    Ok((c1, c2))
}

/// Perturb each gene with probability `pm` by `N(0, sigma)`, clamped to
/// [0, 1].
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, pm: f64, sigma: f64, rng: &mut R) -> Genome {
    let mut out = genome.clone();
    for g in &mut out.genes {
        if rng.random::<f64>() < pm {
            let z: f64 = StandardNormal.sample(rng);
            *g = (*g + sigma * z).clamp(0.0, 1.0);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Gini of the generation's best genome.
    pub best_gini: f64,
    /// Held-out score of the best genome validated so far.
    pub heldout_best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub generations: Vec<GenerationRecord>,
    /// The genome behind the final `heldout_best`.
    pub best_genome: Genome,
    pub final_population: Vec<Genome>,
}

/// Evolve a population of influence structures.
///
/// Accuracies and all GA randomness derive from `config.seed`. Within a
/// generation every genome faces the same episode seeds. After each
/// generation the best genome is scored on a fixed held-out seed set and
/// kept if it beats the best validated so far.
pub fn evolve(ga: &GaConfig, config: &SimConfig, threads: usize) -> Result<EvolutionResult> {
    evolve_observed(ga, config, threads, |_, _| {})
}

/// [`evolve`] with a hook that sees every generation's population before it
/// is evaluated.
pub fn evolve_observed<F>(ga: &GaConfig, config: &SimConfig, threads: usize, mut observe: F) -> Result<EvolutionResult>
where
    F: FnMut(usize, &[Genome]),
{
    ga.validate()?;
    config.validate()?;
    let mut rng = substream(config.seed, Stream::Evolution);
    let heldout_seeds: Vec<u64> = (0..ga.episodes).map(|_| rng.random()).collect();
    let mut population: Vec<Genome> = (0..ga.population).map(|_| Genome::random(config.sizes, &mut rng)).collect();

    let mut records = Vec::with_capacity(ga.generations);
    let mut champion: Option<(Genome, f64)> = None;
    for generation in 0..ga.generations {
        observe(generation, &population);
        let seeds: Vec<u64> = (0..ga.episodes).map(|_| rng.random()).collect();
        let reports = par::try_ordered_map(population.iter().collect(), threads, |g| {
            evaluate_or_floor(g, config, ga, &seeds)
        })?;
        let fitness: Vec<f64> = reports.iter().map(|r| r.fitness).collect();
        let best = argmax(&fitness);
        let validated = evaluate_or_floor(&population[best], config, ga, &heldout_seeds)?.fitness;
        match &champion {
            Some((_, score)) if *score >= validated => {}
            _ => champion = Some((population[best].clone(), validated)),
        }
        records.push(GenerationRecord {
            generation,
            best_fitness: fitness[best],
            mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
            best_gini: reports[best].gini,
            heldout_best: champion.as_ref().map(|c| c.1).expect("set above"),
        });

        if generation + 1 < ga.generations {
            population = next_generation(&population, &fitness, ga, &mut rng)?;
        }
    }
    let (best_genome, _) = champion.expect("at least one generation");
    Ok(EvolutionResult { generations: records, best_genome, final_population: population })
}

fn next_generation<R: Rng + ?Sized>(
    population: &[Genome],
    fitness: &[f64],
    ga: &GaConfig,
    rng: &mut R,
) -> Result<Vec<Genome>> {
    let mut ranked: Vec<usize> = (0..population.len()).collect();
    // stable: equal fitness keeps the lower index first
    ranked.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    let mut next: Vec<Genome> = ranked[..ga.elitism].iter().map(|&i| population[i].clone()).collect();
    while next.len() < ga.population {
        let a = tournament_select(fitness, ga.tournament, rng)?;
        let b = tournament_select(fitness, ga.tournament, rng)?;
        let (c1, c2) = crossover(&population[a], &population[b], ga.crossover_rate, rng)?;
        next.push(mutate(&c1, ga.mutation_rate, ga.mutation_scale, rng));
        if next.len() < ga.population {
            next.push(mutate(&c2, ga.mutation_rate, ga.mutation_scale, rng));
        }
    }
    Ok(next)
}
