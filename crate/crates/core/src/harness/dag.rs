use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{param, Result};
use crate::network::{NetworkTopology, NodeId};
use crate::seed;

/// Random layered DAG with `n` encoders, `relays` relays and `ports` sink
/// ports. Nodes are ordered encoders, relays, ports and links only point
/// forward. Every encoder and relay gets at least one outgoing link and every
/// relay and port at least one incoming link, so with no failures every
/// encoder reaches some port. Other forward pairs are linked with
/// probability `extra`.
pub fn random_topology(n: usize, relays: usize, ports: usize, extra: f64, seed: u64) -> Result<NetworkTopology> {
    if n == 0 || ports == 0 {
        return param("need at least one encoder and one port");
    }
    if !(0.0..=1.0).contains(&extra) {
        return param(format!("extra link probability must lie in [0, 1], got {extra}"));
    }
    let nodes: Vec<NodeId> =
        (0..n).map(NodeId::Encoder).chain((0..relays).map(NodeId::Relay)).chain((0..ports).map(NodeId::Port)).collect();
    let first_port = n + relays;
    let mut rng = seed::rng(seed);
    let mut edges = BTreeSet::new();

    for v in 0..first_port {
        // outgoing: relays strictly after v (or any relay for encoders), then ports
        let lo = if v < n { n } else { v + 1 };
        let to = rng.random_range(lo..nodes.len());
        edges.insert((v, to));
    }
    for v in n..nodes.len() {
        let hi = if v < first_port { v } else { first_port };
        let from = rng.random_range(0..hi);
        edges.insert((from, v));
    }
    for u in 0..first_port {
        let lo = if u < n { n } else { u + 1 };
        for v in lo..nodes.len() {
            if rng.random::<f64>() < extra {
                edges.insert((u, v));
            }
        }
    }
    let list: Vec<(NodeId, NodeId)> = edges.into_iter().map(|(a, b)| (nodes[a], nodes[b])).collect();
    NetworkTopology::from_edges(&list)
}
