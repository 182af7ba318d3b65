//! Multi-hop acyclic network with OR-forwarding relays and erasure links.
//!
//! Topology files are line-oriented: one directed link `src dst` per line,
//! node names `e<m>` (encoder), `r<id>` (relay) and `p<j>` (sink port), all
//! zero-based. Blank lines and `#` comments are ignored. Failure files list
//! failed links the same way, or hold a single `p_fail=<x> seed=<y>` line.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use petgraph::algo::{dinics, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use rand::Rng;

use crate::codec::Codeword;
use crate::error::{param, Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Encoder(usize),
    Relay(usize),
    Port(usize),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Encoder(m) => write!(f, "e{m}"),
            NodeId::Relay(r) => write!(f, "r{r}"),
            NodeId::Port(p) => write!(f, "p{p}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Topology(format!("bad node name {s:?} (expected e<m>, r<id> or p<j>)"));
        let (kind, num) = s.split_at_checked(1).ok_or_else(bad)?;
        let id: usize = num.parse().map_err(|_| bad())?;
        match kind {
            "e" => Ok(NodeId::Encoder(id)),
            "r" => Ok(NodeId::Relay(id)),
            "p" => Ok(NodeId::Port(id)),
            _ => Err(bad()),
        }
    }
}

fn parse_edge_line(line: &str) -> Result<Option<(NodeId, NodeId)>> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) => Ok(Some((a.parse()?, b.parse()?))),
        _ => Err(Error::Topology(format!("expected \"src dst\", got {line:?}"))),
    }
}

/// A validated acyclic topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    links: Vec<(usize, usize)>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    order: Vec<usize>,
    encoders: usize,
    ports: usize,
}

impl NetworkTopology {
    pub fn from_edges(edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut nodes: BTreeSet<NodeId> = BTreeSet::new();
        for &(a, b) in edges {
            nodes.insert(a);
            nodes.insert(b);
        }
        let nodes: Vec<NodeId> = nodes.into_iter().collect();
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        let encoders = nodes.iter().filter(|v| matches!(v, NodeId::Encoder(_))).count();
        let ports = nodes.iter().filter(|v| matches!(v, NodeId::Port(_))).count();
        if encoders == 0 || ports == 0 {
            return Err(Error::Topology("need at least one encoder and one sink port".into()));
        }
        for m in 0..encoders {
            if !index.contains_key(&NodeId::Encoder(m)) {
                return Err(Error::Topology(format!("encoder ids must be 0..{encoders}; e{m} missing")));
            }
        }
        for p in 0..ports {
            if !index.contains_key(&NodeId::Port(p)) {
                return Err(Error::Topology(format!("port ids must be 0..{ports}; p{p} missing")));
            }
        }

        let mut seen = BTreeSet::new();
        let mut links = Vec::with_capacity(edges.len());
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut graph = DiGraph::<(), ()>::with_capacity(nodes.len(), edges.len());
        for _ in &nodes {
            graph.add_node(());
        }
        for &(a, b) in edges {
            if !seen.insert((a, b)) {
                return Err(Error::Topology(format!("duplicate link {a} {b}")));
            }
            if matches!(b, NodeId::Encoder(_)) {
                return Err(Error::Topology(format!("link {a} {b} enters an encoder")));
            }
            if matches!(a, NodeId::Port(_)) {
                return Err(Error::Topology(format!("link {a} {b} leaves a sink port")));
            }
            let (ia, ib) = (index[&a], index[&b]);
            incoming[ib].push(links.len());
            outgoing[ia].push(links.len());
            links.push((ia, ib));
            graph.add_edge(NodeIndex::new(ia), NodeIndex::new(ib), ());
        }
        for (i, v) in nodes.iter().enumerate() {
            match v {
                NodeId::Relay(_) if incoming[i].is_empty() || outgoing[i].is_empty() => {
                    return Err(Error::Topology(format!("relay {v} is dangling")));
                }
                _ => {}
            }
        }
        let order = toposort(&graph, None)
            .map_err(|c| Error::Topology(format!("cycle through {}", nodes[c.node_id().index()])))?
            .into_iter()
            .map(|ix| ix.index())
            .collect();
        Ok(Self { nodes, index, links, incoming, outgoing, order, encoders, ports })
    }

    /// Each encoder wired straight to its own port: `Z_m = X_m`.
    pub fn single_hop(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|m| (NodeId::Encoder(m), NodeId::Port(m))).collect();
        Self::from_edges(&edges)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for line in text.lines() {
            if let Some(e) = parse_edge_line(line)? {
                edges.push(e);
            }
        }
        Self::from_edges(&edges)
    }

    pub fn to_text(&self) -> String {
        self.links().map(|(a, b)| format!("{a} {b}\n")).collect()
    }

    pub fn encoders(&self) -> usize {
        self.encoders
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.links.iter().map(|&(a, b)| (self.nodes[a], self.nodes[b]))
    }

    pub fn link_index(&self, src: NodeId, dst: NodeId) -> Option<usize> {
        let (a, b) = (*self.index.get(&src)?, *self.index.get(&dst)?);
        self.outgoing[a].iter().copied().find(|&e| self.links[e].1 == b)
    }

    /// All links alive.
    pub fn all_alive(&self) -> LinkState {
        LinkState { alive: vec![true; self.links.len()] }
    }

    fn port_index(&self, p: usize) -> usize {
        self.index[&NodeId::Port(p)]
    }

    fn encoder_index(&self, m: usize) -> usize {
        self.index[&NodeId::Encoder(m)]
    }

    /// Nodes with an all-alive path to some port.
    fn can_reach_port(&self, state: &LinkState) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        for p in 0..self.ports {
            let ix = self.port_index(p);
            mark[ix] = true;
            queue.push_back(ix);
        }
        while let Some(v) = queue.pop_front() {
            for &e in &self.incoming[v] {
                let u = self.links[e].0;
                if state.alive[e] && !mark[u] {
                    mark[u] = true;
                    queue.push_back(u);
                }
            }
        }
        mark
    }
}

/// Alive/failed flag per link, in topology link order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkState {
    alive: Vec<bool>,
}

impl LinkState {
    pub fn new(alive: Vec<bool>) -> Self {
        Self { alive }
    }

    pub fn is_alive(&self, link: usize) -> bool {
        self.alive[link]
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    pub fn fail(&mut self, link: usize) {
        self.alive[link] = false;
    }

    pub fn failed_count(&self) -> usize {
        self.alive.iter().filter(|a| !**a).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkFailureProcess {
    None,
    Explicit(Vec<(NodeId, NodeId)>),
    Iid { p_fail: f64, seed: u64 },
}

impl LinkFailureProcess {
    pub fn parse(text: &str) -> Result<Self> {
        let body: Vec<&str> =
            text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty()).collect();
        if let [only] = body.as_slice() {
            if only.contains('=') {
                return Self::parse_iid(only);
            }
        }
        let mut failed = Vec::new();
        for line in body {
            if let Some(e) = parse_edge_line(line)? {
                failed.push(e);
            }
        }
        Ok(if failed.is_empty() { LinkFailureProcess::None } else { LinkFailureProcess::Explicit(failed) })
    }

    fn parse_iid(line: &str) -> Result<Self> {
        let mut p_fail = None;
        let mut seed = None;
        for tok in line.split_whitespace() {
            let (key, value) =
                tok.split_once('=').ok_or_else(|| Error::Format(format!("expected key=value, got {tok:?}")))?;
            let bad = || Error::Format(format!("bad value in {tok:?}"));
            match key {
                "p_fail" => p_fail = Some(value.parse::<f64>().map_err(|_| bad())?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
                _ => return Err(Error::Format(format!("unknown failure key {key:?}"))),
            }
        }
        let p_fail = p_fail.ok_or_else(|| Error::Format("missing p_fail".into()))?;
        let process = LinkFailureProcess::Iid { p_fail, seed: seed.unwrap_or(0) };
        process.validate()?;
        Ok(process)
    }

    pub fn validate(&self) -> Result<()> {
        if let LinkFailureProcess::Iid { p_fail, .. } = *self {
            if !(0.0..1.0).contains(&p_fail) {
                return param(format!("p_fail must lie in [0, 1), got {p_fail}"));
            }
        }
        Ok(())
    }

    /// Draws a concrete link state.
    pub fn realize(&self, topology: &NetworkTopology) -> Result<LinkState> {
        self.validate()?;
        let mut state = topology.all_alive();
        match self {
            LinkFailureProcess::None => {}
            LinkFailureProcess::Explicit(failed) => {
                for &(a, b) in failed {
                    let e = topology
                        .link_index(a, b)
                        .ok_or_else(|| Error::Topology(format!("failed link {a} {b} is not in the topology")))?;
                    state.fail(e);
                }
            }
            LinkFailureProcess::Iid { p_fail, seed } => {
                let mut rng = seed::rng(*seed);
                for e in 0..topology.link_count() {
                    if rng.random::<f64>() < *p_fail {
                        state.fail(e);
                    }
                }
            }
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOutput {
    /// `Z_0, ..., Z_{p-1}` in port order.
    pub outputs: Vec<Codeword>,
    pub reachable: Vec<bool>,
}

/// One synchronous session: every node ORs what arrives on its alive
/// incoming links and sends the result on all outgoing links; a failed link
/// delivers the all-zero word.
pub fn simulate_network(topology: &NetworkTopology, state: &LinkState, inputs: &[Codeword]) -> Result<NetworkOutput> {
    if state.alive.len() != topology.links.len() {
        return Err(Error::Topology("link state does not match topology".into()));
    }
    if inputs.len() != topology.encoders {
        return Err(Error::Topology(format!("{} encoder inputs for {} encoders", inputs.len(), topology.encoders)));
    }
    let b = inputs[0].len();
    if inputs.iter().any(|x| x.len() != b) {
        return Err(Error::Topology("encoder inputs differ in length".into()));
    }

    let mut word = vec![Codeword::zeros(b); topology.nodes.len()];
    for &v in &topology.order {
        if let NodeId::Encoder(m) = topology.nodes[v] {
            word[v] = inputs[m].clone();
            continue;
        }
        let mut acc = Codeword::zeros(b);
        for &e in &topology.incoming[v] {
            if state.alive[e] {
                let src = topology.links[e].0;
                acc.or_words(word[src].words());
            }
        }
        word[v] = acc;
    }

    let outputs = (0..topology.ports).map(|p| word[topology.port_index(p)].clone()).collect();
    let mark = topology.can_reach_port(state);
    let reachable = (0..topology.encoders).map(|m| mark[topology.encoder_index(m)]).collect();
    Ok(NetworkOutput { outputs, reachable })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityReport {
    pub reachable: Vec<bool>,
    /// Unit-capacity min cut from each encoder to the set of sink ports.
    pub encoder_min_cut: Vec<u32>,
    /// Min cut from the whole encoder set to the set of sink ports.
    pub min_cut: u32,
}

/// Reachability and min-cut sizes over the alive subgraph.
pub fn connectivity_report(topology: &NetworkTopology, state: &LinkState) -> Result<ConnectivityReport> {
    if state.alive.len() != topology.links.len() {
        return Err(Error::Topology("link state does not match topology".into()));
    }
    let mark = topology.can_reach_port(state);
    let reachable: Vec<bool> = (0..topology.encoders).map(|m| mark[topology.encoder_index(m)]).collect();

    let big = topology.links.len() as u32 + 1;
    let mut g = DiGraph::<(), u32>::new();
    for _ in &topology.nodes {
        g.add_node(());
    }
    for (e, &(a, b)) in topology.links.iter().enumerate() {
        if state.alive[e] {
            g.add_edge(NodeIndex::new(a), NodeIndex::new(b), 1);
        }
    }
    let sink = g.add_node(());
    for p in 0..topology.ports {
        g.add_edge(NodeIndex::new(topology.port_index(p)), sink, big);
    }

    let encoder_min_cut =
        (0..topology.encoders).map(|m| dinics(&g, NodeIndex::new(topology.encoder_index(m)), sink).0).collect();
    let source = g.add_node(());
    for m in 0..topology.encoders {
        g.add_edge(source, NodeIndex::new(topology.encoder_index(m)), big);
    }
    let min_cut = dinics(&g, source, sink).0;
    Ok(ConnectivityReport { reachable, encoder_min_cut, min_cut })
}
