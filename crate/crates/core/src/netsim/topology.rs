//! Network graph: seven PMU substations, two core subnets, one control
//! center hosting the concentrator and the application server.

use serde::{Deserialize, Serialize};

use super::NetsimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Pmu { pmu: usize },
    SubstationRouter { pmu: usize },
    CoreRouter,
    ControlCenterRouter,
    Switch,
    Pdc,
    Wamc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
}

/// One directed link; the output port at `from` applies the queueing
/// discipline, then serialization at `bandwidth_bps` and propagation over
/// `length_km`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub name: String,
    pub from: NodeId,
    pub to: NodeId,
    pub bandwidth_bps: f64,
    pub length_km: f64,
    /// WAN links carry shared traffic and background sources attach here.
    pub is_wan: bool,
}

/// Construction parameters with the hypothetical geography defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub pmu_count: usize,
    /// Substation-to-core path distance per PMU, km.
    pub distances_km: Vec<f64>,
    pub core_trunk_km: f64,
    pub lan_pmu_km: f64,
    pub lan_cc_km: f64,
    pub lan_bandwidth_bps: f64,
    pub wan_bandwidth_bps: f64,
    pub propagation_km_per_s: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            pmu_count: 7,
            distances_km: vec![50.0, 80.0, 150.0, 220.0, 380.0, 600.0, 500.0],
            core_trunk_km: 10.0,
            lan_pmu_km: 1.0,
            lan_cc_km: 0.5,
            lan_bandwidth_bps: 100e6,
            wan_bandwidth_bps: 10e6,
            propagation_km_per_s: 2e5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub propagation_km_per_s: f64,
    pub pmu_nodes: Vec<NodeId>,
    pub pdc: NodeId,
    pub wamc: NodeId,
    /// next_hop[node][dest] = outgoing link, if reachable.
    next_hop: Vec<Vec<Option<LinkId>>>,
}

impl Topology {
    pub fn build(params: &TopologyParams) -> Result<Topology, NetsimError> {
        if params.pmu_count == 0 {
            return Err(NetsimError::BadTopology("need at least one PMU".into()));
        }
        if params.distances_km.len() != params.pmu_count {
            return Err(NetsimError::BadTopology(format!(
                "{} distances for {} PMUs",
                params.distances_km.len(),
                params.pmu_count
            )));
        }
        if params.lan_bandwidth_bps <= 0.0 || params.wan_bandwidth_bps <= 0.0 {
            return Err(NetsimError::BadTopology("link bandwidth must be > 0".into()));
        }

        let mut nodes = Vec::new();
        let add_node = |name: String, kind: NodeKind, nodes: &mut Vec<Node>| {
            let id = NodeId(nodes.len());
            nodes.push(Node { id, name, kind });
            id
        };
        let pmu_nodes: Vec<NodeId> = (0..params.pmu_count)
            .map(|i| add_node(format!("pmu{}", i + 1), NodeKind::Pmu { pmu: i }, &mut nodes))
            .collect();
        let sub_nodes: Vec<NodeId> = (0..params.pmu_count)
            .map(|i| {
                add_node(
                    format!("sub{}", i + 1),
                    NodeKind::SubstationRouter { pmu: i },
                    &mut nodes,
                )
            })
            .collect();
        let core1 = add_node("core1".into(), NodeKind::CoreRouter, &mut nodes);
        let core2 = add_node("core2".into(), NodeKind::CoreRouter, &mut nodes);
        let ccr = add_node("ccr".into(), NodeKind::ControlCenterRouter, &mut nodes);
        let switch = add_node("switch".into(), NodeKind::Switch, &mut nodes);
        let pdc = add_node("pdc".into(), NodeKind::Pdc, &mut nodes);
        let wamc = add_node("wamc".into(), NodeKind::Wamc, &mut nodes);

        let mut links = Vec::new();
        let add_link = |name: String,
                            from: NodeId,
                            to: NodeId,
                            bw: f64,
                            km: f64,
                            is_wan: bool,
                            links: &mut Vec<Link>| {
            let id = LinkId(links.len());
            links.push(Link {
                id,
                name,
                from,
                to,
                bandwidth_bps: bw,
                length_km: km,
                is_wan,
            });
            id
        };
        // the two core subnets split the substations between them
        let core_split = params.pmu_count.div_ceil(2);
        for i in 0..params.pmu_count {
            add_link(
                format!("lan_cc{}", i + 1),
                pmu_nodes[i],
                sub_nodes[i],
                params.lan_bandwidth_bps,
                params.lan_pmu_km,
                false,
                &mut links,
            );
            let core = if i < core_split { core1 } else { core2 };
            add_link(
                format!("wan_sub{}", i + 1),
                sub_nodes[i],
                core,
                params.wan_bandwidth_bps,
                params.distances_km[i],
                true,
                &mut links,
            );
        }
        add_link(
            "wan_core1".into(),
            core1,
            ccr,
            params.wan_bandwidth_bps,
            params.core_trunk_km,
            true,
            &mut links,
        );
        add_link(
            "wan_core2".into(),
            core2,
            ccr,
            params.wan_bandwidth_bps,
            params.core_trunk_km,
            true,
            &mut links,
        );
        add_link(
            "lan_ccr_switch".into(),
            ccr,
            switch,
            params.lan_bandwidth_bps,
            params.lan_cc_km,
            false,
            &mut links,
        );
        add_link(
            "lan_switch_pdc".into(),
            switch,
            pdc,
            params.lan_bandwidth_bps,
            params.lan_cc_km,
            false,
            &mut links,
        );
        add_link(
            "lan_pdc_switch".into(),
            pdc,
            switch,
            params.lan_bandwidth_bps,
            params.lan_cc_km,
            false,
            &mut links,
        );
        add_link(
            "lan_switch_wamc".into(),
            switch,
            wamc,
            params.lan_bandwidth_bps,
            params.lan_cc_km,
            false,
            &mut links,
        );

        let mut topology = Topology {
            nodes,
            links,
            propagation_km_per_s: params.propagation_km_per_s,
            pmu_nodes,
            pdc,
            wamc,
            next_hop: Vec::new(),
        };
        topology.compute_routes()?;
        Ok(topology)
    }

    /// Assemble a topology from explicit nodes and links, for nonstandard
    /// layouts (tests, custom scenario files).
    pub fn custom(
        nodes: Vec<Node>,
        links: Vec<Link>,
        propagation_km_per_s: f64,
        pmu_nodes: Vec<NodeId>,
        pdc: NodeId,
        wamc: NodeId,
    ) -> Result<Topology, NetsimError> {
        let mut topology = Topology {
            nodes,
            links,
            propagation_km_per_s,
            pmu_nodes,
            pdc,
            wamc,
            next_hop: Vec::new(),
        };
        topology.compute_routes()?;
        Ok(topology)
    }

    /// Hop-count shortest paths per destination (BFS, deterministic tie
    /// break on link id).
    fn compute_routes(&mut self) -> Result<(), NetsimError> {
        let n = self.nodes.len();
        self.next_hop = vec![vec![None; n]; n];
        for dest in 0..n {
            // BFS backwards over incoming links
            let mut dist = vec![usize::MAX; n];
            dist[dest] = 0;
            let mut frontier = std::collections::VecDeque::new();
            frontier.push_back(dest);
            while let Some(at) = frontier.pop_front() {
                for link in &self.links {
                    if link.to.0 == at && dist[link.from.0] == usize::MAX {
                        dist[link.from.0] = dist[at] + 1;
                        self.next_hop[link.from.0][dest] = Some(link.id);
                        frontier.push_back(link.from.0);
                    }
                }
            }
        }
        // every PMU must reach the concentrator
        for &pmu in &self.pmu_nodes {
            if self.next_hop[pmu.0][self.pdc.0].is_none() {
                return Err(NetsimError::BadTopology(format!(
                    "{} has no path to the PDC",
                    self.nodes[pmu.0].name
                )));
            }
        }
        Ok(())
    }

    pub fn route(&self, from: NodeId, dest: NodeId) -> Option<LinkId> {
        self.next_hop[from.0][dest.0]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    /// Propagation delay across a link, seconds.
    pub fn propagation_s(&self, id: LinkId) -> f64 {
        self.links[id.0].length_km / self.propagation_km_per_s
    }

    /// Serialization delay of `bytes` on a link, seconds.
    pub fn serialization_s(&self, id: LinkId, bytes: usize) -> f64 {
        bytes as f64 * 8.0 / self.links[id.0].bandwidth_bps
    }

    /// Total path length PMU -> PDC, km.
    pub fn pmu_path_km(&self, pmu: usize) -> f64 {
        let mut at = self.pmu_nodes[pmu];
        let mut km = 0.0;
        while at != self.pdc {
            let link = self.route(at, self.pdc).expect("routed");
            km += self.link(link).length_km;
            at = self.link(link).to;
        }
        km
    }

    pub fn wan_links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| l.is_wan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_topology_routes_all_pmus() {
        let topo = Topology::build(&TopologyParams::default()).unwrap();
        assert_eq!(topo.pmu_nodes.len(), 7);
        for pmu in 0..7 {
            // path: pmu -> sub -> core -> ccr -> switch -> pdc
            let mut hops = 0;
            let mut at = topo.pmu_nodes[pmu];
            while at != topo.pdc {
                let link = topo.route(at, topo.pdc).unwrap();
                at = topo.link(link).to;
                hops += 1;
            }
            assert_eq!(hops, 5, "pmu{} hop count", pmu + 1);
        }
        // release path pdc -> switch -> wamc
        let l1 = topo.route(topo.pdc, topo.wamc).unwrap();
        assert_eq!(topo.link(l1).to, topo.route(topo.pdc, topo.wamc).map(|l| topo.link(l).to).unwrap());
        let mid = topo.link(l1).to;
        assert!(topo.route(mid, topo.wamc).is_some());
    }

    #[test]
    fn path_lengths_follow_distances() {
        let topo = Topology::build(&TopologyParams::default()).unwrap();
        let expected = [50.0, 80.0, 150.0, 220.0, 380.0, 600.0, 500.0];
        for (pmu, d) in expected.iter().enumerate() {
            let km = topo.pmu_path_km(pmu);
            assert!((km - (d + 12.0)).abs() < 1e-9, "pmu{}: {km}", pmu + 1);
        }
    }

    #[test]
    fn wan_link_count() {
        let topo = Topology::build(&TopologyParams::default()).unwrap();
        assert_eq!(topo.wan_links().count(), 9); // 7 substations + 2 trunks
    }

    #[test]
    fn bad_params_rejected() {
        let mut p = TopologyParams::default();
        p.distances_km.pop();
        assert!(Topology::build(&p).is_err());
        let p = TopologyParams {
            wan_bandwidth_bps: 0.0,
            ..TopologyParams::default()
        };
        assert!(Topology::build(&p).is_err());
    }
}
