//! The continuum tree: computing units, links, and OFDMA resource pools.
//!
//! Units form a strict hierarchy. Every SNE attaches to one LC (round-robin
//! by index), every LC reports to the single HC, the HC reaches the edge
//! server over the parent link, and the edge server reaches the cloud over
//! a wired backhaul. Offloading always moves a task up this tree, so routes
//! are walks along parent pointers.
//!
//! Radio links draw per-slot resources from one of two disjoint pools:
//! every link inside the subnetwork (SNE-LC and LC-HC) shares the intra
//! pool, and the HC-edge link owns the parent pool. A pool holds
//! `floor(pool bandwidth / resource bandwidth)` resources; a resource is
//! usable by at most one transmission per slot, which is what makes the
//! pools the system's communication bottleneck. The edge-cloud backhaul is
//! a contention-free fixed-rate wire and needs no pool.

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::{Error, Result};

/// Index into [`Topology::units`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitId(pub usize);

impl std::fmt::Display for UnitId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "u{}", self.0)
    }
}

/// Index into [`Topology::links`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Sne,
    Lc,
    Hc,
    Edge,
    Cloud,
}

impl UnitKind {
    pub fn name(self) -> &'static str {
        match self {
            UnitKind::Sne => "sne",
            UnitKind::Lc => "lc",
            UnitKind::Hc => "hc",
            UnitKind::Edge => "edge",
            UnitKind::Cloud => "cloud",
        }
    }
}

/// One node of the tree. SNEs sense and transmit but never process, so
/// their clock rate and cycle budget are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputingUnit {
    pub id: UnitId,
    pub kind: UnitKind,
    /// Clock rate in cycles per second.
    pub power_hz: f64,
    /// Cycles this unit accepts within one capacity window.
    pub cycle_budget: f64,
}

impl ComputingUnit {
    pub fn can_process(&self) -> bool {
        self.power_hz > 0.0
    }
}

/// Which resource pool a radio link draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pool {
    Intra,
    Parent,
}

impl Pool {
    pub const ALL: [Pool; 2] = [Pool::Intra, Pool::Parent];

    pub fn index(self) -> usize {
        match self {
            Pool::Intra => 0,
            Pool::Parent => 1,
        }
    }
}

/// One orthogonal frequency resource of a pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommResource {
    pub index: usize,
    pub bandwidth_hz: f64,
}

/// A pool of identical orthogonal resources shared by the links that
/// reference it. Each resource carries one transmission per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourcePool {
    pub pool: Pool,
    pub size: usize,
    pub resource_bandwidth_hz: f64,
}

impl ResourcePool {
    pub fn resource(&self, index: usize) -> Option<CommResource> {
        (index < self.size).then_some(CommResource {
            index,
            bandwidth_hz: self.resource_bandwidth_hz,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = CommResource> + '_ {
        (0..self.size).map(|index| CommResource {
            index,
            bandwidth_hz: self.resource_bandwidth_hz,
        })
    }
}

/// Physical medium of a link: pooled OFDMA radio or a fixed-rate wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkMedium {
    Pooled { pool: Pool, mean_sinr_db: f64 },
    Wire { rate_bps: f64 },
}

/// An undirected hop between a unit and its parent. Uplink and downlink
/// traverse the same link; direction never changes its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub child: UnitId,
    pub parent: UnitId,
    pub medium: LinkMedium,
}

/// Unit counts and pool sizes, kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub sne: usize,
    pub lc: usize,
    pub hc: usize,
    pub edge: usize,
    pub cloud: usize,
    /// LCs plus HCs: all controllers inside the subnetwork.
    pub controllers: usize,
    pub intra_resources: usize,
    pub parent_resources: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub units: Vec<ComputingUnit>,
    pub links: Vec<Link>,
    pub pools: [ResourcePool; 2],
    pub counts: Counts,
    /// Per unit: the link to its parent, None at the root.
    parent_link: Vec<Option<LinkId>>,
}

impl Topology {
    /// Build the tree described by a validated config. Unit ids are assigned
    /// in SNE, LC, HC, edge, cloud order; SNE `i` attaches to LC
    /// `i mod lc_count`.
    pub fn build(cfg: &ScenarioConfig) -> Result<Topology> {
        cfg.validate()?;
        let t = &cfg.topology;
        let window = cfg.capacity_window_s();

        let mut units = Vec::with_capacity(t.sne_count + t.lc_count + 3);
        let push = |kind: UnitKind, power_hz: f64, units: &mut Vec<ComputingUnit>| {
            let id = UnitId(units.len());
            units.push(ComputingUnit { id, kind, power_hz, cycle_budget: power_hz * window });
            id
        };
        let snes: Vec<UnitId> =
            (0..t.sne_count).map(|_| push(UnitKind::Sne, 0.0, &mut units)).collect();
        let lcs: Vec<UnitId> =
            (0..t.lc_count).map(|_| push(UnitKind::Lc, t.lc_power_hz, &mut units)).collect();
        let hc = push(UnitKind::Hc, t.hc_power_hz, &mut units);
        let edge = push(UnitKind::Edge, t.edge_power_hz, &mut units);
        let cloud = push(UnitKind::Cloud, t.cloud_power_hz, &mut units);

        let mut links = Vec::with_capacity(t.sne_count + t.lc_count + 2);
        let mut parent_link = vec![None; units.len()];
        let connect = |child: UnitId, parent: UnitId, medium: LinkMedium,
                           links: &mut Vec<Link>, parent_link: &mut Vec<Option<LinkId>>| {
            let id = LinkId(links.len());
            links.push(Link { id, child, parent, medium });
            parent_link[child.0] = Some(id);
        };
        for (i, &sne) in snes.iter().enumerate() {
            let lc = lcs[i % t.lc_count];
            let medium = LinkMedium::Pooled { pool: Pool::Intra, mean_sinr_db: t.intra_sinr_db };
            connect(sne, lc, medium, &mut links, &mut parent_link);
        }
        for &lc in &lcs {
            let medium = LinkMedium::Pooled { pool: Pool::Parent, mean_sinr_db: t.parent_sinr_db };
            connect(lc, hc, medium, &mut links, &mut parent_link);
        }
        connect(
            hc,
            edge,
            LinkMedium::Pooled { pool: Pool::Parent, mean_sinr_db: t.parent_sinr_db },
            &mut links,
            &mut parent_link,
        );
        connect(edge, cloud, LinkMedium::Wire { rate_bps: t.backhaul_rate_bps }, &mut links, &mut parent_link);

        let pool_size = |bandwidth: f64| (bandwidth / t.resource_bandwidth_hz).floor() as usize;
        let pools = [
            ResourcePool {
                pool: Pool::Intra,
                size: pool_size(t.intra_pool_bandwidth_hz),
                resource_bandwidth_hz: t.resource_bandwidth_hz,
            },
            ResourcePool {
                pool: Pool::Parent,
                size: pool_size(t.parent_pool_bandwidth_hz),
                resource_bandwidth_hz: t.resource_bandwidth_hz,
            },
        ];
        let counts = Counts {
            sne: t.sne_count,
            lc: t.lc_count,
            hc: t.hc_count,
            edge: t.edge_count,
            cloud: t.cloud_count,
            controllers: t.lc_count + t.hc_count,
            intra_resources: pools[0].size,
            parent_resources: pools[1].size,
        };
        Ok(Topology { units, links, pools, counts, parent_link })
    }

    pub fn unit(&self, id: UnitId) -> &ComputingUnit {
        &self.units[id.0]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn pool(&self, pool: Pool) -> &ResourcePool {
        &self.pools[pool.index()]
    }

    pub fn parent_of(&self, id: UnitId) -> Option<UnitId> {
        self.parent_link[id.0].map(|l| self.links[l.0].parent)
    }

    pub fn units_of_kind(&self, kind: UnitKind) -> impl Iterator<Item = &ComputingUnit> {
        self.units.iter().filter(move |u| u.kind == kind)
    }

    /// Sum of all cycle budgets; the denominator of compute utilization.
    pub fn total_cycle_budget(&self) -> f64 {
        self.units.iter().map(|u| u.cycle_budget).sum()
    }

    /// Links to traverse from `from` to `to`, in traversal order. One of the
    /// two units must be an ancestor of the other; `from == to` yields an
    /// empty route.
    pub fn route(&self, from: UnitId, to: UnitId) -> Result<Vec<LinkId>> {
        if let Some(up) = self.chain_up(from, to) {
            return Ok(up);
        }
        if let Some(mut down) = self.chain_up(to, from) {
            down.reverse();
            return Ok(down);
        }
        Err(Error::Topology(format!("no hierarchical path between {from} and {to}")))
    }

    fn chain_up(&self, from: UnitId, to: UnitId) -> Option<Vec<LinkId>> {
        let mut path = Vec::new();
        let mut cursor = from;
        while cursor != to {
            let link = self.parent_link[cursor.0]?;
            path.push(link);
            cursor = self.links[link.0].parent;
        }
        Some(path)
    }

    /// Units that may process a task originating at `origin`: the origin
    /// itself when it has a clock, then every ancestor, nearest first.
    pub fn allowed_targets(&self, origin: UnitId) -> Vec<UnitId> {
        let mut targets = Vec::new();
        if self.unit(origin).can_process() {
            targets.push(origin);
        }
        let mut cursor = origin;
        while let Some(parent) = self.parent_of(cursor) {
            if self.unit(parent).can_process() {
                targets.push(parent);
            }
            cursor = parent;
        }
        targets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use proptest::prelude::*;

    fn default_topo() -> Topology {
        Topology::build(&ScenarioConfig::default()).unwrap()
    }

    #[test]
    fn default_shape() {
        let topo = default_topo();
        assert_eq!(topo.units.len(), 35 + 4 + 1 + 1 + 1);
        assert_eq!(topo.links.len(), 35 + 4 + 2);
        assert_eq!(topo.counts.controllers, 5);
        assert_eq!(topo.counts.intra_resources, 277);
        assert_eq!(topo.counts.parent_resources, 138);
        assert_eq!(topo.pool(Pool::Intra).size, 277);
        assert_eq!(topo.pool(Pool::Parent).size, 138);
    }

    #[test]
    fn round_robin_attachment_balances_lcs() {
        let topo = default_topo();
        let mut load = vec![0usize; topo.units.len()];
        for sne in topo.units_of_kind(UnitKind::Sne) {
            load[topo.parent_of(sne.id).unwrap().0] += 1;
        }
        let lc_loads: Vec<usize> =
            topo.units_of_kind(UnitKind::Lc).map(|lc| load[lc.id.0]).collect();
        assert_eq!(lc_loads, vec![9, 9, 9, 8]);
    }

    #[test]
    fn cycle_budget_is_power_times_window() {
        let topo = default_topo();
        let lc = topo.units_of_kind(UnitKind::Lc).next().unwrap();
        assert_eq!(lc.cycle_budget, 2.5e9 * 0.1);
        let sne = topo.units_of_kind(UnitKind::Sne).next().unwrap();
        assert_eq!(sne.cycle_budget, 0.0);
        assert!(!sne.can_process());
    }

    #[test]
    fn no_snes_is_valid() {
        let mut cfg = ScenarioConfig::default();
        cfg.topology.sne_count = 0;
        let topo = Topology::build(&cfg).unwrap();
        assert_eq!(topo.units_of_kind(UnitKind::Sne).count(), 0);
        assert_eq!(topo.links.len(), 4 + 2);
    }

    #[test]
    fn build_rejects_invalid_config() {
        let mut cfg = ScenarioConfig::default();
        cfg.topology.hc_count = 2;
        assert!(Topology::build(&cfg).is_err());
    }

    #[test]
    fn routes_follow_the_hierarchy() {
        let topo = default_topo();
        let sne = topo.units_of_kind(UnitKind::Sne).next().unwrap().id;
        let cloud = topo.units_of_kind(UnitKind::Cloud).next().unwrap().id;
        let hc = topo.units_of_kind(UnitKind::Hc).next().unwrap().id;
        let edge = topo.units_of_kind(UnitKind::Edge).next().unwrap().id;

        let up = topo.route(sne, cloud).unwrap();
        assert_eq!(up.len(), 4);
        assert_eq!(topo.link(up[0]).child, sne);
        assert_eq!(topo.link(up[3]).parent, cloud);

        assert!(topo.route(hc, hc).unwrap().is_empty());
        assert_eq!(topo.route(hc, edge).unwrap().len(), 1);

        let down = topo.route(cloud, sne).unwrap();
        let mut reversed = up.clone();
        reversed.reverse();
        assert_eq!(down, reversed);
    }

    #[test]
    fn route_fails_across_branches() {
        let topo = default_topo();
        let mut snes = topo.units_of_kind(UnitKind::Sne);
        let a = snes.next().unwrap().id;
        let b = snes.next().unwrap().id;
        assert!(topo.route(a, b).is_err());
    }

    #[test]
    fn allowed_targets_climb_the_tree() {
        let topo = default_topo();
        let sne = topo.units_of_kind(UnitKind::Sne).next().unwrap().id;
        let own_lc = topo.parent_of(sne).unwrap();
        let targets = topo.allowed_targets(sne);
        assert_eq!(targets.len(), 4);
        assert_eq!(targets[0], own_lc);
        let kinds: Vec<UnitKind> = targets.iter().map(|&u| topo.unit(u).kind).collect();
        assert_eq!(kinds, vec![UnitKind::Lc, UnitKind::Hc, UnitKind::Edge, UnitKind::Cloud]);

        let lc_targets = topo.allowed_targets(own_lc);
        assert_eq!(lc_targets.len(), 4);
        assert_eq!(lc_targets[0], own_lc);

        let hc = topo.units_of_kind(UnitKind::Hc).next().unwrap().id;
        assert_eq!(topo.allowed_targets(hc).len(), 3);
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = ScenarioConfig::default();
        assert_eq!(Topology::build(&cfg).unwrap(), Topology::build(&cfg).unwrap());
    }

    #[test]
    fn pool_resources_enumerate() {
        let topo = default_topo();
        let pool = topo.pool(Pool::Parent);
        assert_eq!(pool.iter().count(), 138);
        let r = pool.resource(0).unwrap();
        assert_eq!(r.bandwidth_hz, 360e3);
        assert!(pool.resource(138).is_none());
    }

    proptest! {
        // Any allowed target is reachable and the route chains hop to hop
        // from the origin to the target.
        #[test]
        fn routes_to_allowed_targets_chain(sne_count in 0usize..12, lc_count in 1usize..5, pick in 0usize..64) {
            let mut cfg = ScenarioConfig::default();
            cfg.topology.sne_count = sne_count;
            cfg.topology.lc_count = lc_count;
            let topo = Topology::build(&cfg).unwrap();
            let origin = topo.units[pick % topo.units.len()].id;
            for target in topo.allowed_targets(origin) {
                let route = topo.route(origin, target).unwrap();
                let mut at = origin;
                for id in &route {
                    let link = topo.link(*id);
                    prop_assert_eq!(link.child, at);
                    at = link.parent;
                }
                prop_assert_eq!(at, target);
            }
        }
    }
}
