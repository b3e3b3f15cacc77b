//! Domain vocabulary: agents, tiers, the layered influence graph, projects
//! and the simulation configuration.

use std::fmt;

use rand::Rng;

use crate::error::{IpslError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Input,
    Hidden,
    Output,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Input => "input",
            Tier::Hidden => "hidden",
            Tier::Output => "output",
        }
    }

    pub fn parse(s: &str) -> Option<Tier> {
        match s {
            "input" => Some(Tier::Input),
            "hidden" => Some(Tier::Hidden),
            "output" => Some(Tier::Output),
            _ => None,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    pub tier: Tier,
    /// Perception fidelity in [0, 1]. Only input agents sense opportunities.
    pub accuracy: f64,
    /// Relative standing; the only signal output agents fund on.
    pub status: f64,
}

/// Layer sizes of a three-tier organization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerSizes {
    pub n_in: usize,
    pub n_hid: usize,
    pub n_out: usize,
}

impl LayerSizes {
    pub fn new(n_in: usize, n_hid: usize, n_out: usize) -> Self {
        LayerSizes { n_in, n_hid, n_out }
    }

    pub fn total(&self) -> usize {
        self.n_in + self.n_hid + self.n_out
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 {
            return Err(IpslError::config("n_in", "must be at least 1"));
        }
        if self.n_hid == 0 {
            return Err(IpslError::config("n_hid", "must be at least 1"));
        }
        if self.n_out == 0 {
            return Err(IpslError::config("n_out", "must be at least 1"));
        }
        Ok(())
    }

    /// Global agent id of hidden agent `h`.
    pub fn hidden_id(&self, h: usize) -> usize {
        self.n_in + h
    }

    /// Global agent id of output agent `o`.
    pub fn output_id(&self, o: usize) -> usize {
        self.n_in + self.n_hid + o
    }

    pub fn tier_of(&self, id: usize) -> Option<Tier> {
        if id < self.n_in {
            Some(Tier::Input)
        } else if id < self.n_in + self.n_hid {
            Some(Tier::Hidden)
        } else if id < self.total() {
            Some(Tier::Output)
        } else {
            None
        }
    }
}

/// The organization's "synaptic weights": relationship weights from input to
/// hidden agents, advocacy channels from hidden to output agents, and hidden
/// agent reputations. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGraph {
    pub sizes: LayerSizes,
    /// `n_in × n_hid`, entry `i * n_hid + h`.
    pub w_ih: Vec<f64>,
    /// `n_hid × n_out`, entry `h * n_out + o`.
    pub w_ho: Vec<f64>,
    pub rep_hid: Vec<f64>,
}

impl InfluenceGraph {
    /// Fully connected graph with every weight and reputation at `value`.
    pub fn uniform(sizes: LayerSizes, value: f64) -> Self {
        InfluenceGraph {
            sizes,
            w_ih: vec![value; sizes.n_in * sizes.n_hid],
            w_ho: vec![value; sizes.n_hid * sizes.n_out],
            rep_hid: vec![value; sizes.n_hid],
        }
    }

    pub fn ih(&self, i: usize, h: usize) -> f64 {
        self.w_ih[i * self.sizes.n_hid + h]
    }

    pub fn ih_mut(&mut self, i: usize, h: usize) -> &mut f64 {
        &mut self.w_ih[i * self.sizes.n_hid + h]
    }

    pub fn ho(&self, h: usize, o: usize) -> f64 {
        self.w_ho[h * self.sizes.n_out + o]
    }

    pub fn ih_row(&self, i: usize) -> &[f64] {
        let n = self.sizes.n_hid;
        &self.w_ih[i * n..(i + 1) * n]
    }

    /// Σ_h w_ih for each input agent.
    pub fn input_edge_totals(&self) -> Vec<f64> {
        (0..self.sizes.n_in)
            .map(|i| self.ih_row(i).iter().sum())
            .collect()
    }

    /// Check weight ranges, reputation signs, matrix shapes and input reach.
    pub fn validate(&self) -> Result<()> {
        let s = self.sizes;
        s.validate()?;
        if self.w_ih.len() != s.n_in * s.n_hid
            || self.w_ho.len() != s.n_hid * s.n_out
            || self.rep_hid.len() != s.n_hid
        {
            return Err(IpslError::Structural(
                "weight matrix shapes do not match layer sizes".into(),
            ));
        }
        if let Some(w) = self.w_ih.iter().chain(&self.w_ho).find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(IpslError::Structural(format!("weight {w} outside [0, 1]")));
        }
        if let Some(r) = self.rep_hid.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(IpslError::Structural(format!("negative or non-finite reputation {r}")));
        }
        for i in 0..s.n_in {
            if !self.ih_row(i).iter().any(|w| *w > 0.0) {
                return Err(IpslError::Structural(format!(
                    "input agent {i} has no positive edge to the hidden layer"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opportunity {
    pub id: u64,
    /// True success probability. Never visible to output agents.
    pub latent_quality: f64,
    /// Index of the input agent that senses it.
    pub origin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub opportunity: Opportunity,
    pub perceived_quality: f64,
    /// Hidden-layer index of the advocating agent, once routed.
    pub champion: Option<usize>,
    /// Output-layer index of the funding agent; present iff funded.
    pub selector: Option<usize>,
    pub funded: bool,
    pub outcome: Outcome,
}

impl Project {
    pub fn new(opportunity: Opportunity, perceived_quality: f64) -> Self {
        Project {
            opportunity,
            perceived_quality,
            champion: None,
            selector: None,
            funded: false,
            outcome: Outcome::Unresolved,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outcome != Outcome::Unresolved && !self.funded {
            return Err(IpslError::Contract(format!(
                "project {} resolved without funding",
                self.opportunity.id
            )));
        }
        if self.selector.is_some() != self.funded {
            return Err(IpslError::Contract(format!(
                "project {} selector/funded mismatch",
                self.opportunity.id
            )));
        }
        Ok(())
    }
}

/// Environmental landscape parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvParams {
    /// Expected opportunities per tick.
    pub arrival_rate: f64,
    pub quality_alpha: f64,
    pub quality_beta: f64,
    /// Widens payoff stakes: a funded project pays ±(1 + tension).
    pub tension: f64,
    /// Ticks per run.
    pub horizon: usize,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            arrival_rate: 6.0,
            quality_alpha: 2.0,
            quality_beta: 2.0,
            tension: 0.0,
            horizon: 500,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return Err(IpslError::config("arrival_rate", "must be finite and >= 0"));
        }
        if !(self.quality_alpha > 0.0) || !self.quality_alpha.is_finite() {
            return Err(IpslError::config("quality_alpha", "must be finite and > 0"));
        }
        if !(self.quality_beta > 0.0) || !self.quality_beta.is_finite() {
            return Err(IpslError::config("quality_beta", "must be finite and > 0"));
        }
        if !(self.tension >= 0.0) || !self.tension.is_finite() {
            return Err(IpslError::config("tension", "must be finite and >= 0"));
        }
        if self.horizon == 0 {
            return Err(IpslError::config("horizon", "must be at least 1"));
        }
        Ok(())
    }
}

/// Every tunable constant of one engine run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub sizes: LayerSizes,
    /// Funded projects per tick.
    pub budget: usize,
    /// Selection softness; small values approach argmax on status.
    pub temperature: f64,
    pub eta_status: f64,
    pub eta_rep: f64,
    /// Rescale each layer's statuses to sum to the layer size after updates.
    pub normalize: bool,
    /// Lower bound applied to every status after an update.
    pub status_floor: f64,
    /// Perception noise scale: an agent with accuracy `a` sees
    /// `q + N(0, sigma_max·(1 - a))`.
    pub sigma_max: f64,
    /// Input agents only put forward opportunities they perceive at or above
    /// this quality. 0 forwards everything.
    pub proposal_threshold: f64,
    pub env: EnvParams,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sizes: LayerSizes::new(6, 8, 2),
            budget: 2,
            temperature: 0.5,
            eta_status: 0.2,
            eta_rep: 0.2,
            normalize: true,
            status_floor: 1e-6,
            sigma_max: 0.5,
            proposal_threshold: 0.6,
            env: EnvParams::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.sizes.validate()?;
        if self.budget == 0 {
            return Err(IpslError::config("budget", "must be at least 1"));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(IpslError::config("tau", "must be finite and > 0"));
        }
        if !(self.eta_status >= 0.0) || !self.eta_status.is_finite() {
            return Err(IpslError::config("eta_status", "must be finite and >= 0"));
        }
        if !(self.eta_rep >= 0.0) || !self.eta_rep.is_finite() {
            return Err(IpslError::config("eta_rep", "must be finite and >= 0"));
        }
        if !(self.status_floor > 0.0 && self.status_floor < 1.0) {
            return Err(IpslError::config("status_floor", "must lie in (0, 1)"));
        }
        if !(self.sigma_max >= 0.0) || !self.sigma_max.is_finite() {
            return Err(IpslError::config("sigma_max", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.proposal_threshold) {
            return Err(IpslError::config("proposal_threshold", "must lie in [0, 1]"));
        }
        self.env.validate()
    }

    /// Same configuration with learning switched off.
    pub fn without_learning(mut self) -> Self {
        self.eta_status = 0.0;
        self.eta_rep = 0.0;
        self
    }
}

/// Agents plus their influence graph: the full mutable state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Organization {
    pub agents: Vec<Agent>,
    pub graph: InfluenceGraph,
}

impl Organization {
    pub fn sizes(&self) -> LayerSizes {
        self.graph.sizes
    }

    pub fn input_accuracies(&self) -> Vec<f64> {
        self.agents[..self.sizes().n_in].iter().map(|a| a.accuracy).collect()
    }

    pub fn hidden_statuses(&self) -> Vec<f64> {
        let s = self.sizes();
        self.agents[s.n_in..s.n_in + s.n_hid].iter().map(|a| a.status).collect()
    }

    /// Mean status of each tier, in (input, hidden, output) order.
    pub fn mean_status(&self) -> [f64; 3] {
        let s = self.sizes();
        let mean = |r: std::ops::Range<usize>| {
            let len = r.len() as f64;
            self.agents[r].iter().map(|a| a.status).sum::<f64>() / len
        };
        [
            mean(0..s.n_in),
            mean(s.n_in..s.n_in + s.n_hid),
            mean(s.n_in + s.n_hid..s.total()),
        ]
    }

    /// Validation walk over every type invariant.
    pub fn validate(&self, status_floor: f64) -> Result<()> {
        self.graph.validate()?;
        let s = self.sizes();
        if self.agents.len() != s.total() {
            return Err(IpslError::Structural(format!(
                "{} agents for {} slots",
                self.agents.len(),
                s.total()
            )));
        }
        for (idx, a) in self.agents.iter().enumerate() {
            if a.id != idx || Some(a.tier) != s.tier_of(idx) {
                return Err(IpslError::Structural(format!("agent {idx} has inconsistent id/tier")));
            }
            if !(0.0..=1.0).contains(&a.accuracy) {
                return Err(IpslError::Structural(format!("agent {idx} accuracy {}", a.accuracy)));
            }
            if !(a.status >= status_floor) || !a.status.is_finite() {
                return Err(IpslError::Structural(format!("agent {idx} status {}", a.status)));
            }
        }
        Ok(())
    }
}

/// Build the initial organization: statuses, reputations and weights all 1,
/// input accuracies uniform on [0, 1] from `perception`.
pub fn new_organization<R: Rng + ?Sized>(config: &SimConfig, perception: &mut R) -> Result<Organization> {
    config.validate()?;
    let graph = InfluenceGraph::uniform(config.sizes, 1.0);
    new_organization_with_graph(config, graph, perception)
}

/// As [`new_organization`] but with an externally supplied graph (for
/// example one bridged from a grown network, or decoded from a genome).
pub fn new_organization_with_graph<R: Rng + ?Sized>(
    config: &SimConfig,
    graph: InfluenceGraph,
    perception: &mut R,
) -> Result<Organization> {
    config.validate()?;
    if graph.sizes != config.sizes {
        return Err(IpslError::Structural(
            "graph layer sizes differ from the configuration".into(),
        ));
    }
    graph.validate()?;
    let s = config.sizes;
    let agents = (0..s.total())
        .map(|id| {
            let tier = s.tier_of(id).expect("id within total");
            let accuracy = if tier == Tier::Input { perception.random::<f64>() } else { 1.0 };
            Agent { id, tier, accuracy, status: 1.0 }
        })
        .collect();
    Ok(Organization { agents, graph })
}
