//! Instance generators and independent oracles shared by the integration
//! tests. Nothing here calls the crate's validation or search code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use edgearm::model::{
    AllocationLedger, ApplicationSpec, InfrastructureSnapshot, LinkState, NodeId, NodeState, Placement, ServiceId,
    ServiceRequirement,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub spec: ApplicationSpec,
    pub snapshot: InfrastructureSnapshot,
    pub external: AllocationLedger,
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_nodes: usize,
    pub max_services: usize,
    /// Free hardware per node is drawn from `0..=node_hw`.
    pub node_hw: u64,
    pub service_hw: u64,
}

const SOFTWARE: [&str; 3] = ["go", "js", "py"];
const IOT: [&str; 2] = ["cam", "gps"];

pub fn node_name(i: usize) -> String {
    format!("n{i:02}")
}

pub fn random_snapshot<R: Rng>(rng: &mut R, n: usize, node_hw: u64) -> InfrastructureSnapshot {
    let nodes: Vec<NodeState> = (0..n)
        .map(|i| {
            let mut node = NodeState::new(node_name(i), rng.random_range(0..=node_hw));
            node.software = SOFTWARE.iter().filter(|_| rng.random_bool(0.6)).map(|s| s.to_string()).collect();
            node.iot = IOT.iter().filter(|_| rng.random_bool(0.3)).map(|s| s.to_string()).collect();
            node.alive = rng.random_bool(0.9);
            node
        })
        .collect();
    let mut links = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(0.85) {
                // Integer-valued metrics keep every bandwidth sum exact.
                let mut l = LinkState::new(
                    node_name(a),
                    node_name(b),
                    rng.random_range(1..=100) as f64,
                    rng.random_range(5..=60) as f64,
                );
                l.alive = rng.random_bool(0.9);
                links.push(l);
            }
        }
    }
    InfrastructureSnapshot::new(0, nodes, links).unwrap()
}

pub fn random_spec<R: Rng>(rng: &mut R, app: &str, m: usize, service_hw: u64) -> ApplicationSpec {
    let ids: Vec<String> = (0..m).map(|i| format!("s{i}")).collect();
    let link_p = (1.5 / m as f64).min(0.8);
    let services = ids.iter().map(|id| {
        let mut req = ServiceRequirement::unconstrained(id.as_str()).with_hardware(rng.random_range(0..=service_hw));
        req.software = SOFTWARE.iter().filter(|_| rng.random_bool(0.2)).map(|s| s.to_string()).collect();
        req.iot = IOT.iter().filter(|_| rng.random_bool(0.08)).map(|s| s.to_string()).collect();
        for other in &ids {
            if other != id && rng.random_bool(link_p) {
                req = req.with_link(
                    other.as_str(),
                    rng.random_range(20..=150) as f64,
                    rng.random_range(1..=30) as f64,
                );
            }
        }
        req
    });
    ApplicationSpec::new(app, services.collect::<Vec<_>>()).unwrap()
}

pub fn random_external<R: Rng>(rng: &mut R, snapshot: &InfrastructureSnapshot) -> AllocationLedger {
    let mut ledger = AllocationLedger::new();
    if rng.random_bool(0.5) {
        return ledger;
    }
    for (id, node) in snapshot.nodes() {
        if rng.random_bool(0.3) && node.free_hw > 1 {
            ledger.hw_used.insert(id.clone(), rng.random_range(1..=node.free_hw / 2));
        }
    }
    for (key, link) in snapshot.links() {
        if rng.random_bool(0.2) {
            ledger.bw_used.insert(key.clone(), (rng.random_range(0..=(link.bandwidth_mbps as u64) / 2)) as f64);
        }
    }
    ledger
}

pub fn random_instance(seed: u64, shape: Shape) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(1..=shape.max_nodes);
    let m = r.random_range(1..=shape.max_services);
    let snapshot = random_snapshot(&mut r, n, shape.node_hw);
    let spec = random_spec(&mut r, "app", m, shape.service_hw);
    let external = random_external(&mut r, &snapshot);
    Instance { spec, snapshot, external }
}

/// Random, possibly invalid and partial, assignment over the snapshot's nodes.
pub fn random_placement<R: Rng>(rng: &mut R, spec: &ApplicationSpec, snapshot: &InfrastructureSnapshot) -> Placement {
    let nodes: Vec<&NodeId> = snapshot.nodes().keys().collect();
    let mut p = Placement::new(spec.app_id.clone());
    for s in spec.services.keys() {
        if rng.random_bool(0.9) {
            p.assignment.insert(s.clone(), (*nodes.choose(rng).unwrap()).clone());
        }
    }
    p
}

/// Services involved in at least one violated constraint, computed from
/// first principles: an unassigned or misplaced service, every service of an
/// overloaded node, both endpoints of a broken or overloaded link.
pub fn violated_services(
    spec: &ApplicationSpec,
    placement: &Placement,
    snap: &InfrastructureSnapshot,
    external: &AllocationLedger,
) -> BTreeSet<ServiceId> {
    let mut bad = BTreeSet::new();
    let mut load: BTreeMap<NodeId, u64> = BTreeMap::new();
    for (s, req) in &spec.services {
        let Some(n) = placement.assignment.get(s) else {
            bad.insert(s.clone());
            continue;
        };
        let Some(node) = snap.nodes().get(n).filter(|node| node.alive) else {
            bad.insert(s.clone());
            continue;
        };
        if !req.software.iter().all(|x| node.software.contains(x)) || !req.iot.iter().all(|x| node.iot.contains(x)) {
            bad.insert(s.clone());
        }
        *load.entry(n.clone()).or_default() += req.hardware;
    }
    for (n, used) in &load {
        let extra = external.hw_used.get(n).copied().unwrap_or(0);
        if used + extra > snap.nodes()[n].free_hw {
            bad.extend(
                placement
                    .assignment
                    .iter()
                    .filter(|(s, m)| *m == n && spec.services.contains_key(*s))
                    .map(|(s, _)| s.clone()),
            );
        }
    }
    let mut flows: BTreeMap<(NodeId, NodeId), (f64, Vec<(ServiceId, ServiceId)>)> = BTreeMap::new();
    for (s, req) in &spec.services {
        for (t, link) in &req.links {
            let (Some(a), Some(b)) = (placement.assignment.get(s), placement.assignment.get(t)) else {
                continue;
            };
            if a == b {
                continue;
            }
            match snap.links().get(&(a.clone(), b.clone())) {
                Some(l) if l.alive => {
                    if l.latency_ms > link.max_latency_ms {
                        bad.insert(s.clone());
                        bad.insert(t.clone());
                    }
                    let f = flows.entry((a.clone(), b.clone())).or_insert((0.0, Vec::new()));
                    f.0 += link.min_bandwidth_mbps;
                    f.1.push((s.clone(), t.clone()));
                }
                _ => {
                    bad.insert(s.clone());
                    bad.insert(t.clone());
                }
            }
        }
    }
    for (key, (demand, pairs)) in flows {
        let extra = external.bw_used.get(&key).copied().unwrap_or(0.0);
        if demand + extra > snap.links()[&key].bandwidth_mbps {
            for (s, t) in pairs {
                bad.insert(s);
                bad.insert(t);
            }
        }
    }
    bad
}

pub fn is_valid(spec: &ApplicationSpec, p: &Placement, snap: &InfrastructureSnapshot, external: &AllocationLedger) -> bool {
    violated_services(spec, p, snap, external).is_empty()
}

/// Whether any of the |nodes|^|services| assignments is valid. Prefixes that
/// already break a constraint among their own services are skipped, which is
/// exact because every constraint only tightens as services are added.
pub fn brute_force_feasible(inst: &Instance) -> bool {
    let services: Vec<ServiceId> = inst.spec.services.keys().cloned().collect();
    let nodes: Vec<NodeId> = inst.snapshot.nodes().keys().cloned().collect();
    let mut p = Placement::new(inst.spec.app_id.clone());
    fn rec(inst: &Instance, services: &[ServiceId], nodes: &[NodeId], i: usize, p: &mut Placement) -> bool {
        if i == services.len() {
            return is_valid(&inst.spec, p, &inst.snapshot, &inst.external);
        }
        let prefix: BTreeSet<ServiceId> = services[..=i].iter().cloned().collect();
        let partial = inst.spec.restricted_to(&prefix);
        for n in nodes {
            p.assignment.insert(services[i].clone(), n.clone());
            if is_valid(&partial, p, &inst.snapshot, &inst.external) && rec(inst, services, nodes, i + 1, p) {
                return true;
            }
        }
        p.assignment.remove(&services[i]);
        false
    }
    rec(inst, &services, &nodes, 0, &mut p)
}

/// Direct re-application of a plan to a placement map.
pub fn apply_plan(
    old: &BTreeMap<ServiceId, NodeId>,
    plan: &edgearm::reconciler::ActionPlan,
) -> BTreeMap<ServiceId, NodeId> {
    let mut out = old.clone();
    for s in &plan.remove {
        out.remove(s);
    }
    for m in &plan.migrate {
        out.insert(m.service.clone(), m.to.clone());
    }
    for (s, n) in &plan.deploy {
        out.insert(s.clone(), n.clone());
    }
    out
}
