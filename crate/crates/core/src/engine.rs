//! The three-tier funding loop.
//!
//! Each tick: the environment offers opportunities to input agents, who sense
//! them with agent-specific noise and put forward the ones that look good
//! enough; proposals are routed to hidden-layer champions through
//! relationship weights and reputations; output agents fund a limited number
//! of them looking only at champion status; outcomes are realized and the
//! advocacy chain of every funded project is rewarded or penalized.

use rand::Rng;
use rand_distr::{Beta, Distribution, Poisson, StandardNormal};

use crate::error::{IpslError, Result};
use crate::metrics;
use crate::rng::EngineStreams;
use crate::types::{
    new_organization, Agent, EnvParams, InfluenceGraph, Opportunity, Organization, Outcome,
    Project, SimConfig, Tier,
};

/// Per-tick metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    pub generated: usize,
    pub championed: usize,
    pub funded: usize,
    pub successes: usize,
    /// Mean status of the input, hidden and output tiers.
    pub mean_status: [f64; 3],
    /// Spearman correlation between input accuracy and Σ_h w_ih; `None` when
    /// undefined (e.g. all edge totals tied).
    pub spearman_acc_weight: Option<f64>,
}

/// Learning-rule parameters for [`backpropagate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams {
    pub eta_status: f64,
    pub eta_rep: f64,
    pub normalize: bool,
    pub status_floor: f64,
}

impl From<&SimConfig> for LearningParams {
    fn from(c: &SimConfig) -> Self {
        LearningParams {
            eta_status: c.eta_status,
            eta_rep: c.eta_rep,
            normalize: c.normalize,
            status_floor: c.status_floor,
        }
    }
}

/// Draw this tick's opportunities. `next_id` carries the id counter across
/// ticks so ids increase monotonically over a run.
pub fn generate_opportunities<R: Rng + ?Sized>(
    env: &EnvParams,
    n_in: usize,
    next_id: &mut u64,
    rng: &mut R,
) -> Result<Vec<Opportunity>> {
    env.validate()?;
    if n_in == 0 {
        return Err(IpslError::config("n_in", "must be at least 1"));
    }
    if env.arrival_rate == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(env.arrival_rate)
        .map_err(|e| IpslError::config("arrival_rate", e.to_string()))?
        .sample(rng) as usize;
    let quality = Beta::new(env.quality_alpha, env.quality_beta)
        .map_err(|e| IpslError::config("quality_alpha", e.to_string()))?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let latent_quality = quality.sample(rng).clamp(0.0, 1.0);
        let origin = rng.random_range(0..n_in);
        out.push(Opportunity { id: *next_id, latent_quality, origin });
        *next_id += 1;
    }
    Ok(out)
}

/// Noisy sensing of an opportunity by the input agent that found it.
///
/// One standard normal is always consumed so the perception stream stays
/// aligned regardless of accuracy.
pub fn perceive<R: Rng + ?Sized>(
    agent: &Agent,
    opp: &Opportunity,
    sigma_max: f64,
    rng: &mut R,
) -> Result<f64> {
    if agent.tier != Tier::Input || agent.id != opp.origin {
        return Err(IpslError::Contract(format!(
            "opportunity {} originates at input agent {}, not {:?} agent {}",
            opp.id, opp.origin, agent.tier, agent.id
        )));
    }
    let z: f64 = StandardNormal.sample(rng);
    let sd = sigma_max * (1.0 - agent.accuracy);
    Ok((opp.latent_quality + sd * z).clamp(0.0, 1.0))
}

/// Sample an index with probability proportional to `weights`. Returns
/// `None` when no weight is positive; in that case nothing is drawn.
pub(crate) fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (idx, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last_positive = Some(idx);
            if target < acc {
                return Some(idx);
            }
        }
    }
    last_positive
}

/// Assign a hidden champion to each proposal with probability proportional
/// to `w_ih[origin][h] · rep_hid[h]`. Proposals whose origin has no positive
/// gate are dropped. Output keeps input order.
pub fn route_proposals<R: Rng + ?Sized>(
    graph: &InfluenceGraph,
    projects: Vec<Project>,
    rng: &mut R,
) -> Result<Vec<Project>> {
    let n_hid = graph.sizes.n_hid;
    let mut gates = vec![0.0; n_hid];
    let mut routed = Vec::with_capacity(projects.len());
    for mut p in projects {
        if p.champion.is_some() {
            return Err(IpslError::Contract(format!(
                "project {} is already championed",
                p.opportunity.id
            )));
        }
        let origin = p.opportunity.origin;
        if origin >= graph.sizes.n_in {
            return Err(IpslError::Contract(format!("origin {origin} is not an input agent")));
        }
        for (h, g) in gates.iter_mut().enumerate() {
            *g = graph.ih(origin, h) * graph.rep_hid[h];
        }
        if let Some(h) = sample_weighted(&gates, rng) {
            p.champion = Some(h);
            routed.push(p);
        }
    }
    Ok(routed)
}

/// Per-draw funding probabilities: softmax of `statuses / tau`.
///
/// Computed with the maximum subtracted, so the result is invariant to a
/// common shift of all statuses.
pub fn selection_probabilities(statuses: &[f64], tau: f64) -> Vec<f64> {
    let max = statuses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = statuses.iter().map(|s| ((s - max) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Fund up to `budget` projects, drawing without replacement with
/// probability proportional to `exp(status(champion) / tau)`.
///
/// Only champion status enters the draw. Funded projects come back in draw
/// order with selectors assigned round-robin over the `n_out` output agents.
/// If supply does not exceed the budget everything is funded without
/// consuming randomness.
pub fn select_projects<R: Rng + ?Sized>(
    n_out: usize,
    mut championed: Vec<Project>,
    hidden_status: &[f64],
    budget: usize,
    tau: f64,
    rng: &mut R,
) -> Result<Vec<Project>> {
    if budget == 0 {
        return Err(IpslError::config("budget", "must be at least 1"));
    }
    if !(tau > 0.0) {
        return Err(IpslError::config("tau", "must be > 0"));
    }
    if n_out == 0 {
        return Err(IpslError::config("n_out", "must be at least 1"));
    }
    let champion_status = |p: &Project| -> Result<f64> {
        let h = p.champion.ok_or_else(|| {
            IpslError::Contract(format!("project {} has no champion", p.opportunity.id))
        })?;
        hidden_status
            .get(h)
            .copied()
            .ok_or_else(|| IpslError::Contract(format!("champion {h} out of range")))
    };

    let mut funded = Vec::with_capacity(budget.min(championed.len()));
    if championed.len() <= budget {
        for p in &championed {
            champion_status(p)?;
        }
        funded = championed;
    } else {
        let mut statuses = championed.iter().map(champion_status).collect::<Result<Vec<_>>>()?;
        for _ in 0..budget {
            let probs = selection_probabilities(&statuses, tau);
            let pick = sample_weighted(&probs, rng).expect("softmax has positive mass");
            statuses.remove(pick);
            funded.push(championed.remove(pick));
        }
    }
    for (draw, p) in funded.iter_mut().enumerate() {
        p.funded = true;
        p.selector = Some(draw % n_out);
    }
    Ok(funded)
}

/// Resolve a funded project: success with probability equal to its latent
/// quality.
pub fn realize_outcome<R: Rng + ?Sized>(project: &mut Project, rng: &mut R) -> Result<Outcome> {
    if !project.funded {
        return Err(IpslError::Contract(format!(
            "project {} realized without funding",
            project.opportunity.id
        )));
    }
    let u: f64 = rng.random();
    project.outcome = if u < project.opportunity.latent_quality {
        Outcome::Success
    } else {
        Outcome::Failure
    };
    Ok(project.outcome)
}

/// Payoff of a resolved project: ±(1 + tension).
pub fn payoff(outcome: Outcome, tension: f64) -> f64 {
    match outcome {
        Outcome::Success => 1.0 + tension,
        Outcome::Failure => -(1.0 + tension),
        Outcome::Unresolved => 0.0,
    }
}

/// Rescale `xs` so it sums to `target` while keeping every entry at or above
/// `floor`. Entries pushed under the floor are pinned there and the
/// remaining mass is spread proportionally over the rest.
pub(crate) fn renormalize_with_floor(xs: &mut [f64], target: f64, floor: f64) {
    let sum: f64 = xs.iter().sum();
    if sum == target && xs.iter().all(|x| *x >= floor) {
        return;
    }
    let mut pinned = vec![false; xs.len()];
    loop {
        let pinned_mass = floor * pinned.iter().filter(|p| **p).count() as f64;
        let free_sum: f64 = xs.iter().zip(&pinned).filter(|(_, p)| !**p).map(|(x, _)| x).sum();
        if free_sum <= 0.0 {
            break;
        }
        let scale = (target - pinned_mass) / free_sum;
        let mut newly_pinned = false;
        for (x, p) in xs.iter_mut().zip(pinned.iter_mut()) {
            if *p {
                *x = floor;
                continue;
            }
            *x *= scale;
            if *x < floor {
                *x = floor;
                *p = true;
                newly_pinned = true;
            }
        }
        if !newly_pinned {
            break;
        }
    }
}

/// Reward or penalize the advocacy chain of a resolved project.
///
/// With `r = ±1`: champion and selector statuses scale by `1 + eta_status·r`,
/// the champion's reputation by `1 + eta_rep·r`, and the origin→champion
/// relationship weight by `1 + eta_rep·r` (clamped to [0, 1]). Statuses are
/// floored, then optionally renormalized per tier.
pub fn backpropagate(org: &mut Organization, project: &Project, params: &LearningParams) -> Result<()> {
    let r = match project.outcome {
        Outcome::Success => 1.0,
        Outcome::Failure => -1.0,
        Outcome::Unresolved => {
            return Err(IpslError::Contract(format!(
                "project {} has no resolved outcome",
                project.opportunity.id
            )))
        }
    };
    let (champion, selector) = match (project.champion, project.selector) {
        (Some(c), Some(s)) => (c, s),
        _ => {
            return Err(IpslError::Contract(format!(
                "project {} lacks a champion or selector",
                project.opportunity.id
            )))
        }
    };
    let sizes = org.sizes();
    let origin = project.opportunity.origin;

    let status_factor = 1.0 + params.eta_status * r;
    let rep_factor = 1.0 + params.eta_rep * r;

    let champion_agent = &mut org.agents[sizes.hidden_id(champion)];
    champion_agent.status = (champion_agent.status * status_factor).max(params.status_floor);
    let selector_agent = &mut org.agents[sizes.output_id(selector)];
    selector_agent.status = (selector_agent.status * status_factor).max(params.status_floor);

    org.graph.rep_hid[champion] = (org.graph.rep_hid[champion] * rep_factor).max(0.0);
    let w = org.graph.ih_mut(origin, champion);
    *w = (*w * rep_factor).clamp(0.0, 1.0);

    if params.normalize {
        let bounds = [
            (0, sizes.n_in),
            (sizes.n_in, sizes.n_in + sizes.n_hid),
            (sizes.n_in + sizes.n_hid, sizes.total()),
        ];
        for (lo, hi) in bounds {
            let mut layer: Vec<f64> = org.agents[lo..hi].iter().map(|a| a.status).collect();
            renormalize_with_floor(&mut layer, (hi - lo) as f64, params.status_floor);
            for (a, s) in org.agents[lo..hi].iter_mut().zip(layer) {
                a.status = s;
            }
        }
    }
    Ok(())
}

/// Everything one tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub record: TickRecord,
    /// Funded projects in draw order, outcomes resolved.
    pub funded: Vec<Project>,
}

/// A single organization running against its environment.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    org: Organization,
    streams: EngineStreams,
    next_opportunity_id: u64,
    tick: usize,
}

impl Simulation {
    /// Fresh organization; accuracies and all engine randomness come from
    /// `config.seed`.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mut streams = EngineStreams::new(config.seed);
        let org = new_organization(&config, &mut streams.perception)?;
        Ok(Simulation { config, org, streams, next_opportunity_id: 0, tick: 0 })
    }

    /// Run a prepared organization against the environment realized by
    /// `episode_seed`.
    pub fn with_organization(config: SimConfig, org: Organization, episode_seed: u64) -> Result<Self> {
        config.validate()?;
        if org.sizes() != config.sizes {
            return Err(IpslError::Structural(
                "organization layer sizes differ from the configuration".into(),
            ));
        }
        org.validate(config.status_floor)?;
        Ok(Simulation {
            config,
            org,
            streams: EngineStreams::new(episode_seed),
            next_opportunity_id: 0,
            tick: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn organization(&self) -> &Organization {
        &self.org
    }

    pub fn into_organization(self) -> Organization {
        self.org
    }

    pub fn ticks_done(&self) -> usize {
        self.tick
    }

    /// One tick: generate, perceive, route, select, realize, backpropagate.
    pub fn step(&mut self) -> Result<TickOutcome> {
        let cfg = &self.config;
        let sizes = cfg.sizes;
        let s = &mut self.streams;

        let opportunities = generate_opportunities(
            &cfg.env,
            sizes.n_in,
            &mut self.next_opportunity_id,
            &mut s.environment,
        )?;
        let generated = opportunities.len();

        let mut proposals = Vec::with_capacity(generated);
        for opp in opportunities {
            let perceived = perceive(&self.org.agents[opp.origin], &opp, cfg.sigma_max, &mut s.perception)?;
            if perceived >= cfg.proposal_threshold {
                proposals.push(Project::new(opp, perceived));
            }
        }

        let championed = route_proposals(&self.org.graph, proposals, &mut s.routing)?;
        let championed_count = championed.len();

        let hidden_status = self.org.hidden_statuses();
        let mut funded = select_projects(
            sizes.n_out,
            championed,
            &hidden_status,
            cfg.budget,
            cfg.temperature,
            &mut s.selection,
        )?;

        let mut successes = 0;
        for p in &mut funded {
            if realize_outcome(p, &mut s.outcomes)? == Outcome::Success {
                successes += 1;
            }
        }

        let params = LearningParams::from(cfg);
        for p in &funded {
            p.validate()?;
            backpropagate(&mut self.org, p, &params)?;
        }
        self.org.validate(cfg.status_floor)?;

        let record = TickRecord {
            tick: self.tick,
            generated,
            championed: championed_count,
            funded: funded.len(),
            successes,
            mean_status: self.org.mean_status(),
            spearman_acc_weight: metrics::spearman(
                &self.org.input_accuracies(),
                &self.org.graph.input_edge_totals(),
            )
            .ok(),
        };
        self.tick += 1;
        Ok(TickOutcome { record, funded })
    }

    /// Run the remaining ticks up to the configured horizon.
    pub fn run_to_end(&mut self) -> Result<Vec<TickRecord>> {
        let remaining = self.config.env.horizon.saturating_sub(self.tick);
        (0..remaining).map(|_| self.step().map(|t| t.record)).collect()
    }
}

/// Execute a full run of `config.env.horizon` ticks.
pub fn run(config: SimConfig) -> Result<Vec<TickRecord>> {
    Simulation::new(config)?.run_to_end()
}

/// Success rate of funded projects over the final `fraction` of ticks
/// (at least one tick). Zero when nothing was funded in that window.
pub fn final_window_success_rate(records: &[TickRecord], fraction: f64) -> f64 {
    let window = ((records.len() as f64 * fraction).ceil() as usize).clamp(1, records.len().max(1));
    let tail = &records[records.len().saturating_sub(window)..];
    let funded: usize = tail.iter().map(|r| r.funded).sum();
    let successes: usize = tail.iter().map(|r| r.successes).sum();
    if funded == 0 {
        0.0
    } else {
        successes as f64 / funded as f64
    }
}
