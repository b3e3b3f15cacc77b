//! Emergence of a three-tier structure from a growing social network.
//!
//! Networks grow by preferential attachment; the most connected nodes become
//! the output tier, the most peripheral the input tier and everything in
//! between the hidden tier. The result is bridged into an
//! [`InfluenceGraph`] the engine can run.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;

use crate::error::{IpslError, Result};
use crate::types::{InfluenceGraph, LayerSizes, Tier};

/// Simple undirected graph: no self-loops, no multi-edges. Edges are stored
/// as `(low, high)` pairs in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        UndirectedGraph { n, edges: Vec::new() }
    }

    /// Build from an edge list, rejecting self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = UndirectedGraph::new(n);
        let mut seen = HashSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(IpslError::Structural(format!("edge ({u}, {v}) outside {n} nodes")));
            }
            if u == v {
                return Err(IpslError::Structural(format!("self-loop on node {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(IpslError::Structural(format!("duplicate edge ({u}, {v})")));
            }
            g.edges.push(e);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        reached == self.n
    }

    /// Plain-text edge list: `# nodes=<n>` then one `u v` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# nodes={}\n", self.n);
        for (u, v) in &self.edges {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let n = match lines.next() {
            Some((_, header)) => header
                .trim()
                .strip_prefix("# nodes=")
                .and_then(|v| v.trim().parse::<usize>().ok())
                .ok_or_else(|| IpslError::Parse {
                    line: 1,
                    message: "expected `# nodes=<n>` header".into(),
                })?,
            None => {
                return Err(IpslError::Parse { line: 1, message: "empty edge list".into() });
            }
        };
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |p: Option<&str>| p.and_then(|v| v.parse::<usize>().ok());
            match (parse(parts.next()), parse(parts.next()), parts.next()) {
                (Some(u), Some(v), None) => edges.push((u, v)),
                _ => {
                    return Err(IpslError::Parse {
                        line: idx + 1,
                        message: format!("expected `u v`, got `{line}`"),
                    })
                }
            }
        }
        UndirectedGraph::from_edges(n, edges)
    }
}

/// Barabási–Albert growth: a clique on `m + 1` nodes, then each new node
/// attaches `m` edges to distinct existing nodes chosen proportionally to
/// their current degree.
pub fn grow_network<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<UndirectedGraph> {
    if m == 0 {
        return Err(IpslError::config("m", "must be at least 1"));
    }
    if n <= m {
        return Err(IpslError::config("n", format!("must exceed m ({m})")));
    }
    let mut g = UndirectedGraph::new(n);
    g.edges.reserve(m * (m + 1) / 2 + (n - m - 1) * m);
    // every edge endpoint once: sampling uniformly from it is degree-proportional
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (m * (m + 1) / 2 + (n - m - 1) * m));
    for u in 0..=m {
        for v in u + 1..=m {
            g.edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    for new in m + 1..n {
        chosen.clear();
        while chosen.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            g.edges.push((t, new));
            endpoints.extend([t, new]);
        }
    }
    Ok(g)
}

/// Degree → number of nodes with that degree.
pub fn degree_distribution(g: &UndirectedGraph) -> BTreeMap<usize, usize> {
    let mut dist = BTreeMap::new();
    for d in g.degrees() {
        *dist.entry(d).or_insert(0) += 1;
    }
    dist
}

/// Power-law exponent from the degree CCDF.
///
/// Fits `ln P(K >= k)` against `ln k` by ordinary least squares over the
/// distinct degrees `k >= k_min` and returns the density exponent
/// `1 + |slope|`. Zero degrees never enter the fit.
pub fn fit_power_law(dist: &BTreeMap<usize, usize>, k_min: usize) -> Result<f64> {
    let total: usize = dist.values().sum();
    if total == 0 {
        return Err(IpslError::Estimation("empty degree distribution".into()));
    }
    let k_min = k_min.max(1);
    let mut points = Vec::new();
    // walk from the largest degree down, accumulating the tail count
    let mut tail = 0usize;
    for (&k, &count) in dist.iter().rev() {
        tail += count;
        if k >= k_min && count > 0 {
            points.push(((k as f64).ln(), (tail as f64 / total as f64).ln()));
        }
    }
    if points.len() < 3 {
        return Err(IpslError::Estimation(format!(
            "need at least 3 distinct degrees >= {k_min}, found {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(1.0 + (sxy / sxx).abs())
}

/// Tier of every node plus the fractions used to assign them.
#[derive(Debug, Clone, PartialEq)]
pub struct TierAssignment {
    pub tiers: Vec<Tier>,
    pub f_out: f64,
    pub f_in: f64,
}

impl TierAssignment {
    pub fn nodes_in(&self, tier: Tier) -> Vec<usize> {
        self.tiers.iter().enumerate().filter(|(_, t)| **t == tier).map(|(i, _)| i).collect()
    }

    /// `node_id,tier` CSV with header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_id,tier\n");
        for (i, t) in self.tiers.iter().enumerate() {
            s.push_str(&format!("{i},{t}\n"));
        }
        s
    }

    /// Parse a `node_id,tier` CSV. Fractions are not stored in the file and
    /// are recovered from the tier counts.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("node_id,tier") {
            return Err(IpslError::Parse { line: 1, message: "expected `node_id,tier` header".into() });
        }
        let mut tiers = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || IpslError::Parse { line: line_no, message: format!("malformed row `{line}`") };
            let (id, tier) = line.split_once(',').ok_or_else(bad)?;
            let id: usize = id.trim().parse().map_err(|_| bad())?;
            let tier = Tier::parse(tier.trim()).ok_or_else(bad)?;
            if id != tiers.len() {
                return Err(IpslError::Parse {
                    line: line_no,
                    message: format!("node ids must be consecutive from 0 (got {id})"),
                });
            }
            tiers.push(tier);
        }
        let n = tiers.len().max(1) as f64;
        let count = |t| tiers.iter().filter(|x| **x == t).count() as f64;
        Ok(TierAssignment { f_out: count(Tier::Output) / n, f_in: count(Tier::Input) / n, tiers })
    }
}

/// `⌈f·n⌉`, forgiving binary round-off just above an integer.
fn tier_size(f: f64, n: usize) -> usize {
    (f * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Rank nodes by degree (descending, ties by ascending id); the top
/// `⌈f_out·n⌉` become Output, the bottom `⌈f_in·n⌉` Input, the rest Hidden.
pub fn assign_tiers(g: &UndirectedGraph, f_out: f64, f_in: f64) -> Result<TierAssignment> {
    if !(f_out > 0.0 && f_out < 1.0) {
        return Err(IpslError::config("f_out", "must lie in (0, 1)"));
    }
    if !(f_in > 0.0 && f_in < 1.0) {
        return Err(IpslError::config("f_in", "must lie in (0, 1)"));
    }
    if f_out + f_in >= 1.0 {
        return Err(IpslError::config("f_in", "f_out + f_in must be below 1"));
    }
    let n = g.node_count();
    let (n_out, n_in) = (tier_size(f_out, n), tier_size(f_in, n));
    if n_out + n_in >= n {
        return Err(IpslError::config(
            "f_in",
            format!("{n_out} output + {n_in} input nodes leave no hidden layer among {n}"),
        ));
    }
    let degrees = g.degrees();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| degrees[b].cmp(&degrees[a]).then(a.cmp(&b)));
    let mut tiers = vec![Tier::Hidden; n];
    for &v in &order[..n_out] {
        tiers[v] = Tier::Output;
    }
    for &v in &order[n - n_in..] {
        tiers[v] = Tier::Input;
    }
    Ok(TierAssignment { tiers, f_out, f_in })
}

/// An influence graph bridged from a grown network, with the node id behind
/// each layer slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgedGraph {
    pub graph: InfluenceGraph,
    pub input_nodes: Vec<usize>,
    pub hidden_nodes: Vec<usize>,
    pub output_nodes: Vec<usize>,
    /// Number of rows that needed the reachability repair.
    pub repaired_rows: usize,
}

/// Keep input→hidden and hidden→output edges as unit weights, drop the rest,
/// then repair unreachable rows by linking them to the best-connected node
/// of the next tier. Layer slots follow ascending node id.
pub fn to_influence_graph(g: &UndirectedGraph, tiers: &TierAssignment) -> Result<BridgedGraph> {
    if tiers.tiers.len() != g.node_count() {
        return Err(IpslError::Structural(format!(
            "tier assignment covers {} nodes, graph has {}",
            tiers.tiers.len(),
            g.node_count()
        )));
    }
    let input_nodes = tiers.nodes_in(Tier::Input);
    let hidden_nodes = tiers.nodes_in(Tier::Hidden);
    let output_nodes = tiers.nodes_in(Tier::Output);
    for (name, nodes) in [("input", &input_nodes), ("hidden", &hidden_nodes), ("output", &output_nodes)] {
        if nodes.is_empty() {
            return Err(IpslError::Structural(format!("{name} tier is empty")));
        }
    }
    let mut slot = vec![0usize; g.node_count()];
    for nodes in [&input_nodes, &hidden_nodes, &output_nodes] {
        for (i, &v) in nodes.iter().enumerate() {
            slot[v] = i;
        }
    }
    let sizes = LayerSizes::new(input_nodes.len(), hidden_nodes.len(), output_nodes.len());
    let mut graph = InfluenceGraph::uniform(sizes, 0.0);
    graph.rep_hid.fill(1.0);

    for &(u, v) in g.edges() {
        let (tu, tv) = (tiers.tiers[u], tiers.tiers[v]);
        match (tu, tv) {
            (Tier::Input, Tier::Hidden) => *graph.ih_mut(slot[u], slot[v]) = 1.0,
            (Tier::Hidden, Tier::Input) => *graph.ih_mut(slot[v], slot[u]) = 1.0,
            (Tier::Hidden, Tier::Output) => graph.w_ho[slot[u] * sizes.n_out + slot[v]] = 1.0,
            (Tier::Output, Tier::Hidden) => graph.w_ho[slot[v] * sizes.n_out + slot[u]] = 1.0,
            _ => {}
        }
    }

    let degrees = g.degrees();
    let best = |nodes: &[usize]| {
        // highest degree, lowest id on ties
        (0..nodes.len())
            .max_by(|&a, &b| degrees[nodes[a]].cmp(&degrees[nodes[b]]).then(nodes[b].cmp(&nodes[a])))
            .expect("tier is non-empty")
    };
    let top_hidden = best(&hidden_nodes);
    let top_output = best(&output_nodes);
    let mut repaired_rows = 0;
    for i in 0..sizes.n_in {
        if graph.ih_row(i).iter().all(|w| *w == 0.0) {
            *graph.ih_mut(i, top_hidden) = 1.0;
            repaired_rows += 1;
        }
    }
    for h in 0..sizes.n_hid {
        let row = &mut graph.w_ho[h * sizes.n_out..(h + 1) * sizes.n_out];
        if row.iter().all(|w| *w == 0.0) {
            row[top_output] = 1.0;
            repaired_rows += 1;
        }
    }
    graph.validate()?;
    Ok(BridgedGraph { graph, input_nodes, hidden_nodes, output_nodes, repaired_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn star(n: usize) -> UndirectedGraph {
        UndirectedGraph::from_edges(n, (1..n).map(|v| (0, v))).unwrap()
    }

    fn cycle(n: usize) -> UndirectedGraph {
        UndirectedGraph::from_edges(n, (0..n).map(|v| (v, (v + 1) % n))).unwrap()
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(UndirectedGraph::from_edges(3, [(0, 0)]).is_err());
        assert!(UndirectedGraph::from_edges(3, [(0, 1), (1, 0)]).is_err());
        assert!(UndirectedGraph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn three_node_growth_is_symmetric() {
        let mut to_zero = 0;
        let trials = 20_000;
        for seed in 0..trials {
            let g = grow_network(3, 1, &mut substream(seed, Stream::Environment)).unwrap();
            assert_eq!(g.edges().len(), 2);
            match g.edges()[1] {
                (0, 2) => to_zero += 1,
                (1, 2) => {}
                e => panic!("unexpected edge {e:?}"),
            }
        }
        let frac = to_zero as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.015, "{frac}");
    }

    #[test]
    fn edge_count_and_connectivity() {
        // clique of 3 (3 edges) plus 7 arrivals with 2 edges each
        let g = grow_network(10, 2, &mut substream(1, Stream::Environment)).unwrap();
        assert_eq!(g.edges().len(), 3 + 7 * 2);
        assert!(g.is_connected());
        assert_eq!(g.degrees().iter().sum::<usize>(), 2 * 17);
    }

    #[test]
    fn growth_needs_n_above_m() {
        let mut rng = substream(1, Stream::Environment);
        assert!(matches!(grow_network(2, 2, &mut rng), Err(IpslError::Config { .. })));
        assert!(matches!(grow_network(5, 0, &mut rng), Err(IpslError::Config { .. })));
    }

    #[test]
    fn degree_distribution_examples() {
        let tri = UndirectedGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(degree_distribution(&tri), BTreeMap::from([(2, 3)]));
        assert_eq!(degree_distribution(&star(5)), BTreeMap::from([(1, 4), (4, 1)]));
        assert_eq!(degree_distribution(&UndirectedGraph::new(3)), BTreeMap::from([(0, 3)]));
    }

    #[test]
    fn fit_needs_three_distinct_degrees() {
        let dist = BTreeMap::from([(1, 10), (2, 5)]);
        assert!(matches!(fit_power_law(&dist, 1), Err(IpslError::Estimation(_))));
        let dist = BTreeMap::from([(1, 10), (2, 5), (3, 1)]);
        assert!(fit_power_law(&dist, 1).is_ok());
        assert!(fit_power_law(&dist, 2).is_err());
    }

    #[test]
    fn star_tiers_follow_tie_break() {
        let t = assign_tiers(&star(5), 0.2, 0.4).unwrap();
        assert_eq!(
            t.tiers,
            [Tier::Output, Tier::Hidden, Tier::Hidden, Tier::Input, Tier::Input]
        );
    }

    #[test]
    fn cycle_tie_break_by_id() {
        let t = assign_tiers(&cycle(10), 0.1, 0.3).unwrap();
        assert_eq!(t.nodes_in(Tier::Output), [0]);
        assert_eq!(t.nodes_in(Tier::Input), [7, 8, 9]);
    }

    #[test]
    fn fraction_preconditions() {
        assert!(assign_tiers(&star(5), 0.5, 0.5).is_err());
        assert!(assign_tiers(&star(5), 0.0, 0.5).is_err());
        // ⌈0.45·5⌉ + ⌈0.45·5⌉ = 6 > 5
        assert!(assign_tiers(&star(5), 0.45, 0.45).is_err());
    }

    #[test]
    fn path_maps_directly() {
        let g = UndirectedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let tiers = TierAssignment {
            tiers: vec![Tier::Input, Tier::Hidden, Tier::Output],
            f_out: 1.0 / 3.0,
            f_in: 1.0 / 3.0,
        };
        let b = to_influence_graph(&g, &tiers).unwrap();
        assert_eq!(b.graph.w_ih, vec![1.0]);
        assert_eq!(b.graph.w_ho, vec![1.0]);
        assert_eq!(b.repaired_rows, 0);
    }

    #[test]
    fn input_with_only_peer_edge_is_repaired() {
        // 0,1 input (edge between them), 2,3 hidden, 4 output; hidden 3 has
        // the higher degree so it receives the repair.
        let g = UndirectedGraph::from_edges(5, [(0, 1), (1, 3), (2, 4), (3, 4), (2, 3)]).unwrap();
        let tiers = TierAssignment {
            tiers: vec![Tier::Input, Tier::Input, Tier::Hidden, Tier::Hidden, Tier::Output],
            f_out: 0.2,
            f_in: 0.4,
        };
        let b = to_influence_graph(&g, &tiers).unwrap();
        assert_eq!(b.graph.ih_row(0), &[0.0, 1.0]);
        assert_eq!(b.graph.ih_row(0).iter().sum::<f64>(), 1.0);
        assert_eq!(b.repaired_rows, 1);
    }

    #[test]
    fn empty_tier_is_structural_error() {
        let g = UndirectedGraph::from_edges(2, [(0, 1)]).unwrap();
        let tiers = TierAssignment { tiers: vec![Tier::Input, Tier::Output], f_out: 0.5, f_in: 0.5 };
        assert!(matches!(to_influence_graph(&g, &tiers), Err(IpslError::Structural(_))));
    }

    #[test]
    fn edge_list_and_tier_csv_parse_back() {
        let g = grow_network(30, 2, &mut substream(5, Stream::Environment)).unwrap();
        assert_eq!(UndirectedGraph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        let t = assign_tiers(&g, 0.1, 0.5).unwrap();
        assert_eq!(TierAssignment::parse_csv(&t.to_csv()).unwrap().tiers, t.tiers);
        assert!(UndirectedGraph::parse_edge_list("0 1\n").is_err());
        assert!(matches!(
            UndirectedGraph::parse_edge_list("# nodes=3\n0 1\n1 x\n"),
            Err(IpslError::Parse { line: 3, .. })
        ));
    }
}
