//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use edgearm::dynamics::{
    build_testbed, demo_topology, perturb, run_scenario, substream, CommitModel, PerturbationModel, ScenarioConfig,
    SimulatedWorld,
};
use edgearm::fixtures::{stackdemo_spec, two_node_testbed, STACKDEMO_COMPOSE, STACKDEMO_REQUIREMENTS};
use edgearm::model::{
    parse_report, ApplicationSpec, InfrastructureSnapshot, LinkState, NodeId, NodeState, Placement, ServiceId,
    WatcherPeriods,
};
use edgearm::overlay::{
    default_k, estimate_qos, restructure_traced, GroundTruth, Measurement, OverlayMonitor, OverlayState,
};
use edgearm::reasoner::{continuous_step, validate};
use edgearm::reconciler::{
    diff, render_commands, ActionPlan, Backend, ClusterState, CommandScriptBackend, Migration, Reconciler,
    SimulatedBackend, Strategy,
};
use edgearm::watcher::{CommandQueue, FileReport, FsRepository, Watcher};
use rand::Rng;

use common::{apply_plan, brute_force_feasible, is_valid, random_instance, random_placement, rng, violated_services, Shape};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("placement soundness", placement_soundness),
        ("oracle completeness", oracle_completeness),
        ("continuous-reasoning stability", stability),
        ("migration direction", migration_direction),
        ("decision latency at 60 nodes / 400 services", decision_latency),
        ("QoS composition exactness", qos_composition),
        ("k-medoids restructuring", kmedoids),
        ("diff/apply algebra and command rendering", diff_apply_algebra),
        ("sensitivity gating", sensitivity_gating),
        ("quiescence and trigger completeness", quiescence_and_trigger),
        ("scenario determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {:<44} {} ({}; {:.1}s)",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

fn placement_soundness() -> Verdict {
    let shape = Shape {
        max_nodes: 20,
        max_services: 16,
        node_hw: 24,
        service_hw: 8,
    };
    let started = Instant::now();
    let (mut returned, mut failures) = (0, 0);
    for seed in 0..1000 {
        let inst = random_instance(seed, shape);
        let mut r = rng(seed ^ 0x5eed);
        let previous = random_placement(&mut r, &inst.spec, &inst.snapshot);
        for prev in [None, Some(&previous)] {
            if let Ok(out) = continuous_step(&inst.spec, prev, &inst.snapshot, &inst.external) {
                returned += 1;
                let ok = validate(&inst.spec, &out.placement, &inst.snapshot, &inst.external).is_empty()
                    && is_valid(&inst.spec, &out.placement, &inst.snapshot, &inst.external);
                failures += usize::from(!ok);
            }
        }
    }
    let elapsed = started.elapsed();
    verdict(
        failures == 0 && elapsed < Duration::from_secs(60),
        format!("1000 instances, {returned} placements returned, {failures} invalid, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn oracle_completeness() -> Verdict {
    let shape = Shape {
        max_nodes: 10,
        max_services: 8,
        node_hw: 14,
        service_hw: 8,
    };
    let (mut feasible, mut disagreements) = (0, 0);
    for seed in 0..300 {
        let inst = random_instance(10_000 + seed, shape);
        let truth = brute_force_feasible(&inst);
        feasible += usize::from(truth);
        let previous = random_placement(&mut rng(seed), &inst.spec, &inst.snapshot);
        for prev in [None, Some(&previous)] {
            let placed = continuous_step(&inst.spec, prev, &inst.snapshot, &inst.external).is_ok();
            disagreements += usize::from(placed != truth);
        }
    }
    verdict(
        disagreements == 0,
        format!("300 instances ({feasible} feasible), {disagreements} disagreements"),
    )
}

/// Random small change of the world: node capacity and liveness, link
/// metrics and liveness.
fn jiggle<R: Rng>(r: &mut R, snap: &InfrastructureSnapshot) -> InfrastructureSnapshot {
    let nodes = snap.nodes().values().map(|n| {
        let mut n = n.clone();
        if r.random_bool(0.2) {
            n.free_hw = r.random_range(0..=24);
        }
        if r.random_bool(0.05) {
            n.alive = !n.alive;
        }
        n
    }).collect::<Vec<_>>();
    let links = snap.links().values().map(|l| {
        let mut l = l.clone();
        if r.random_bool(0.1) {
            l.latency_ms = r.random_range(1..=100) as f64;
            l.bandwidth_mbps = r.random_range(5..=60) as f64;
        }
        if r.random_bool(0.03) {
            l.alive = !l.alive;
        }
        l
    }).collect::<Vec<_>>();
    InfrastructureSnapshot::new(snap.timestamp() + 1, nodes, links).unwrap()
}

/// Drops or re-adds services now and then.
fn mutate_spec<R: Rng>(r: &mut R, full: &ApplicationSpec, current: &ApplicationSpec) -> ApplicationSpec {
    if !r.random_bool(0.2) {
        return current.clone();
    }
    let keep: BTreeSet<ServiceId> = full.services.keys().filter(|_| r.random_bool(0.85)).cloned().collect();
    if keep.is_empty() {
        current.clone()
    } else {
        full.restricted_to(&keep)
    }
}

fn stability() -> Verdict {
    let shape = Shape {
        max_nodes: 12,
        max_services: 10,
        node_hw: 24,
        service_hw: 6,
    };
    let (mut steps, mut checked, mut violations, mut fallbacks, mut seed) = (0, 0, 0, 0, 0u64);
    while steps < 500 {
        seed += 1;
        let mut inst = random_instance(20_000 + seed, shape);
        let full = inst.spec.clone();
        let Ok(first) = continuous_step(&inst.spec, None, &inst.snapshot, &inst.external) else { continue };
        let mut placement = first.placement;
        let mut r = rng(seed);
        for _ in 0..20 {
            if steps == 500 {
                break;
            }
            steps += 1;
            inst.snapshot = jiggle(&mut r, &inst.snapshot);
            inst.spec = mutate_spec(&mut r, &full, &inst.spec);
            let Ok(out) = continuous_step(&inst.spec, Some(&placement), &inst.snapshot, &inst.external) else {
                continue;
            };
            if out.fallback_used {
                fallbacks += 1;
            } else {
                let retained: BTreeSet<ServiceId> = placement
                    .assignment
                    .keys()
                    .filter(|s| inst.spec.services.contains_key(*s))
                    .cloned()
                    .collect();
                let mut kept = Placement::new(placement.app_id.clone());
                for s in &retained {
                    kept.assignment.insert(s.clone(), placement.assignment[s].clone());
                }
                let bad = violated_services(&inst.spec.restricted_to(&retained), &kept, &inst.snapshot, &inst.external);
                for s in retained.difference(&bad) {
                    checked += 1;
                    if out.placement.assignment.get(s) != placement.assignment.get(s) {
                        violations += 1;
                    }
                }
            }
            placement = out.placement;
        }
    }
    verdict(
        violations == 0,
        format!("{steps} steps, {checked} untouched services checked, {fallbacks} fallbacks, {violations} moved"),
    )
}

fn migration_direction() -> Verdict {
    let (mut seeds_ok, mut cr_mig, mut ex_mig, mut cr_exp, mut ex_exp) = (0, 0.0, 0.0, 0.0, 0.0);
    for seed in 0..20 {
        let run = |strategy| {
            run_scenario(&ScenarioConfig {
                nodes: 10,
                apps: 5,
                duration_ticks: 100,
                seed,
                strategy,
                ..Default::default()
            })
            .unwrap()
            .summary()
        };
        let cr = run(Strategy::Continuous);
        let ex = run(Strategy::ExhaustiveRestart);
        seeds_ok += usize::from(ex.mean_migrations_per_tick >= cr.mean_migrations_per_tick);
        cr_mig += cr.mean_migrations_per_tick / 20.0;
        ex_mig += ex.mean_migrations_per_tick / 20.0;
        cr_exp += cr.mean_explored_per_tick / 20.0;
        ex_exp += ex.mean_explored_per_tick / 20.0;
    }
    verdict(
        seeds_ok >= 16 && ex_mig >= cr_mig && cr_exp <= ex_exp,
        format!(
            "ex >= cr in {seeds_ok}/20 seeds; migrations/tick cr {cr_mig:.2} ex {ex_mig:.2} (+{:.0}%); explored/tick cr {cr_exp:.0} ex {ex_exp:.0}",
            (ex_mig / cr_mig - 1.0) * 100.0
        ),
    )
}

fn decision_latency() -> Verdict {
    let model = CommitModel::default();
    let mut commits = substream(1, "commits");
    let specs: BTreeMap<String, ApplicationSpec> = (0..50)
        .map(|i| {
            let id = format!("app{i:02}");
            let spec = model.initial(&demo_topology(&id), &mut commits);
            (id, spec)
        })
        .collect();
    let mut world = SimulatedWorld::new(build_testbed(60, 3).unwrap(), PerturbationModel::default(), true, 1, 0.1, 10);
    let first = parse_report(world.advance().unwrap().as_bytes()).unwrap();
    let apps: BTreeSet<String> = specs.keys().cloned().collect();
    let mut reconciler = Reconciler::new(SimulatedBackend::new());

    let mut passes = Vec::new();
    let started = Instant::now();
    let initial = reconciler.reconcile_tick(&apps, &specs, &first, Strategy::Continuous);
    passes.push(started.elapsed());
    let placed = initial.iter().filter(|o| o.reasoning.is_some()).count();
    let second = loop {
        if let Some(r) = world.advance() {
            break parse_report(r.as_bytes()).unwrap();
        }
    };
    let started = Instant::now();
    let next = reconciler.reconcile_tick(&apps, &specs, &second, Strategy::Continuous);
    passes.push(started.elapsed());
    let services: usize = specs.values().map(|s| s.services.len()).sum();
    let worst = passes.iter().max().copied().unwrap_or_default();
    verdict(
        worst < Duration::from_secs(5) && services == 400,
        format!(
            "{services} services; initial pass {:.3}s ({placed}/50 placed), perturbed pass {:.3}s ({} migrations)",
            passes[0].as_secs_f64(),
            passes[1].as_secs_f64(),
            next.iter().map(|o| o.plan.migrate.len()).sum::<usize>()
        ),
    )
}

fn qos_composition() -> Verdict {
    let mut overlay = OverlayState::new();
    overlay.leaders = BTreeSet::from(["l1".into(), "l2".into()]);
    overlay.follower_of.insert("f1".into(), "l1".into());
    overlay.follower_of.insert("f2".into(), "l2".into());
    let mut r = rng(6);
    let mut deviations = 0;
    let pair = |a: &str, b: &str| (NodeId::from(a), NodeId::from(b));
    for i in 0..10_000 {
        let m = |r: &mut rand_chacha::ChaCha8Rng| Measurement {
            latency_ms: r.random_range(0.0..500.0),
            bandwidth_mbps: r.random_range(0.0..1000.0),
        };
        let (a, b, c) = (m(&mut r), m(&mut r), m(&mut r));
        let segments = BTreeMap::from([(pair("f1", "l1"), a), (pair("l1", "l2"), b), (pair("l2", "f2"), c)]);
        // Alternate between a follower and a leader as the source endpoint.
        let (src, lat, bw) = if i % 2 == 0 {
            ("f1", a.latency_ms + b.latency_ms + c.latency_ms, a.bandwidth_mbps.min(b.bandwidth_mbps).min(c.bandwidth_mbps))
        } else {
            ("l1", b.latency_ms + c.latency_ms, b.bandwidth_mbps.min(c.bandwidth_mbps))
        };
        let est = estimate_qos(&src.into(), &"f2".into(), &overlay, &segments).unwrap();
        if est.latency_ms.to_bits() != lat.to_bits() || est.bandwidth_mbps.to_bits() != bw.to_bits() {
            deviations += 1;
        }
    }
    verdict(deviations == 0, format!("10000 compositions, {deviations} deviations"))
}

fn mesh(n: usize, lat: impl Fn(usize, usize) -> f64) -> GroundTruth {
    let name = |i: usize| format!("m{i:02}");
    let nodes = (0..n).map(|i| NodeState::new(name(i), 1));
    let mut links = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                links.push(LinkState::new(name(a), name(b), lat(a, b), 10.0));
            }
        }
    }
    GroundTruth::new(0, nodes, links).unwrap()
}

fn groups_of(o: &OverlayState) -> BTreeSet<BTreeSet<NodeId>> {
    o.groups()
        .into_iter()
        .map(|(l, fs)| fs.into_iter().chain([l]).collect())
        .collect()
}

/// Best partition over every choice of k medoids, each node joining its
/// nearest medoid on the symmetrised latency.
fn brute_force_groups(gt: &GroundTruth, k: usize) -> BTreeSet<BTreeSet<NodeId>> {
    let ids: Vec<NodeId> = gt.nodes().keys().cloned().collect();
    let d = |a: &NodeId, b: &NodeId| {
        if a == b {
            0.0
        } else {
            (gt.link(a, b).unwrap().latency_ms + gt.link(b, a).unwrap().latency_ms) / 2.0
        }
    };
    let n = ids.len();
    let mut best: Option<(f64, BTreeSet<BTreeSet<NodeId>>)> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let medoids: Vec<&NodeId> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &ids[i]).collect();
        let mut groups: BTreeMap<&NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        let mut cost = 0.0;
        for x in &ids {
            let m = medoids
                .iter()
                .min_by(|a, b| d(x, a).total_cmp(&d(x, b)))
                .unwrap();
            cost += d(x, m);
            groups.entry(m).or_default().insert(x.clone());
        }
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, groups.into_values().collect()));
        }
    }
    best.unwrap().1
}

fn kmedoids() -> Verdict {
    let mut r = rng(7);
    let (mut non_monotone, mut over_cap) = (0, 0);
    for _ in 0..100 {
        let n = r.random_range(2..=30);
        let lat: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r.random_range(1.0..200.0)).collect()).collect();
        let gt = mesh(n, |a, b| lat[a][b]);
        let k = r.random_range(1..=default_k(n).max(1) + 1).min(n);
        let (_, trace) = restructure_traced(&OverlayState::new(), &gt, k).unwrap();
        non_monotone += usize::from(trace.costs.windows(2).any(|w| w[1] > w[0]));
        over_cap += usize::from(trace.iterations > n * n);
    }
    let block = mesh(4, |a, b| if a / 2 == b / 2 { 5.0 } else { 100.0 });
    let (o, _) = restructure_traced(&OverlayState::new(), &block, 2).unwrap();
    let optimum = groups_of(&o) == brute_force_groups(&block, 2);
    verdict(
        non_monotone == 0 && over_cap == 0 && optimum,
        format!("100 matrices: {non_monotone} non-monotone, {over_cap} over n^2 iterations; block example optimal: {optimum}"),
    )
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn lines(v: &[String]) -> String {
    v.iter().map(|l| format!("{l}\n")).collect()
}

fn golden_commands() -> Vec<&'static str> {
    let mut mismatches = Vec::new();
    let mut deploy = ActionPlan::empty("stackdemo");
    deploy.deploy.push(("web".into(), "vm1".into()));
    let mut migrate = ActionPlan::empty("stackdemo");
    migrate.migrate.push(Migration {
        service: "redis".into(),
        from: "vm1".into(),
        to: "vm2".into(),
    });
    let remove = ActionPlan::stack_removal("stackdemo", None);
    let old = Placement::new("app").with("a", "n1").with("b", "n2").with("c", "n3");
    let new = Placement::new("app").with("a", "n1").with("b", "n4").with("d", "n2");
    for (file, plan) in [
        ("deploy_web.txt", deploy),
        ("migrate_redis.txt", migrate),
        ("remove_stack.txt", remove),
        ("diff_example.txt", diff(Some(&old), &new)),
    ] {
        if lines(&render_commands(&plan)) != golden(file) {
            mismatches.push(file);
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("commands.sh");
    let mut rec = Reconciler::new(CommandScriptBackend::new(&script));
    rec.reason(&stackdemo_spec(), &two_node_testbed(), Strategy::Continuous);
    rec.set_tick(1);
    rec.remove_app("stackdemo", &two_node_testbed());
    if std::fs::read_to_string(&script).unwrap() != golden("stackdemo_script.sh") {
        mismatches.push("stackdemo_script.sh");
    }
    mismatches
}

fn diff_apply_algebra() -> Verdict {
    let mut r = rng(8);
    let (mut wrong_target, mut not_partition, mut backend_wrong) = (0, 0, 0);
    let services: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
    let nodes: Vec<String> = (0..5).map(|i| format!("n{i}")).collect();
    let random = |r: &mut rand_chacha::ChaCha8Rng| {
        let mut p = Placement::new("app");
        for s in &services {
            if r.random_bool(0.6) {
                p.assignment.insert(s.as_str().into(), nodes[r.random_range(0..nodes.len())].as_str().into());
            }
        }
        p
    };
    for _ in 0..1000 {
        let old = r.random_bool(0.9).then(|| random(&mut r));
        let new = random(&mut r);
        let plan = diff(old.as_ref(), &new);
        let before = old.as_ref().map(|p| p.assignment.clone()).unwrap_or_default();
        wrong_target += usize::from(apply_plan(&before, &plan) != new.assignment);

        let mut seen: BTreeMap<&ServiceId, usize> = BTreeMap::new();
        for s in plan.deploy.iter().map(|(s, _)| s).chain(plan.migrate.iter().map(|m| &m.service)).chain(&plan.remove) {
            *seen.entry(s).or_default() += 1;
        }
        let unchanged: Vec<&ServiceId> = before
            .iter()
            .filter(|(s, n)| new.assignment.get(*s) == Some(*n))
            .map(|(s, _)| s)
            .collect();
        for s in &unchanged {
            *seen.entry(s).or_default() += 1;
        }
        let universe: BTreeSet<&ServiceId> = before.keys().chain(new.assignment.keys()).collect();
        not_partition += usize::from(seen.values().any(|&c| c != 1) || seen.keys().copied().collect::<BTreeSet<_>>() != universe);

        // Rendered lines replayed twice on a cluster that runs `old`.
        let mut state = ClusterState::default();
        let services = state.apps.entry("app".into()).or_default();
        for (s, n) in &before {
            services.insert(s.clone(), BTreeSet::from([n.clone()]));
        }
        let mut once = SimulatedBackend::from_state(state);
        for l in render_commands(&plan) {
            once.execute_line(&l).unwrap();
        }
        let after_once = once.current_placement("app").unwrap_or_default();
        for l in render_commands(&plan) {
            once.execute_line(&l).unwrap();
        }
        let after_twice = once.current_placement("app").unwrap_or_default();
        backend_wrong += usize::from(after_once.assignment != new.assignment || after_twice != after_once);
    }
    let mismatches = golden_commands();
    verdict(
        wrong_target + not_partition + backend_wrong == 0 && mismatches.is_empty(),
        format!(
            "1000 pairs: {wrong_target} wrong targets, {not_partition} non-partitions, {backend_wrong} replay mismatches; golden mismatches: {mismatches:?}"
        ),
    )
}

/// Reference model of one gated metric: window statistics since the last
/// publication, compared relatively against the published ones.
#[derive(Default)]
struct GateModel {
    window: Vec<f64>,
    mean: Option<f64>,
    var: f64,
}

impl GateModel {
    fn push(&mut self, x: f64, s: f64) {
        self.window.push(x);
        let n = self.window.len() as f64;
        let mean = self.window.iter().sum::<f64>() / n;
        let var = self.window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let rel = |c: f64, l: f64| (c - l).abs() / l.abs().max(1e-9);
        if self.mean.is_none_or(|m| rel(mean, m) > s || rel(var, self.var) > s) {
            self.mean = Some(mean);
            self.var = var;
            self.window.clear();
        }
    }
}

fn sensitivity_gating() -> Verdict {
    let trace: &[(f64, f64, bool)] = &[
        (1000.0, 1000.0, true),
        (1050.0, 1000.0, true), // a +5%
        (1050.0, 1000.0, true),
        (1050.0, 1150.0, true), // b +15%
        (1050.0, 1150.0, false),
        (1050.0, 1150.0, true),
        (1050.0, 1150.0, true),
        (1100.0, 1150.0, true),
        (1100.0, 1150.0, true),
        (1300.0, 1150.0, true),
        (1300.0, 1150.0, true),
        (1300.0, 1150.0, true),
    ];
    let mut monitor = OverlayMonitor::new(0.1, 1000);
    let (mut model_a, mut model_b) = (GateModel::default(), GateModel::default());
    let mut last_body: Option<(u64, u64, bool)> = None;
    let mut mismatches = Vec::new();
    let mut observed = Vec::new();
    for (t, &(a, b, b_alive)) in trace.iter().enumerate() {
        let mut nb = NodeState::new("b", b as u64);
        nb.alive = b_alive;
        let gt = GroundTruth::new(
            t as u64,
            [NodeState::new("a", a as u64), nb],
            [LinkState::new("a", "b", 10.0, 50.0), LinkState::new("b", "a", 10.0, 50.0)],
        )
        .unwrap();
        let before = monitor.latest_report().map(str::to_owned);
        let published = monitor.tick(&gt).is_some();
        if !published && monitor.latest_report().map(str::to_owned) != before {
            mismatches.push(format!("t{t}: bytes changed without a publish"));
        }
        model_a.push(a, 0.1);
        if b_alive {
            model_b.push(b, 0.1);
        }
        let body = (model_a.mean.unwrap().round() as u64, model_b.mean.unwrap().round() as u64, b_alive);
        let expected = last_body != Some(body);
        last_body = Some(body);
        if expected != published {
            mismatches.push(format!("t{t}: expected publish={expected}"));
        }
        observed.push(if published { 'P' } else { '.' });
    }
    let observed: String = observed.into_iter().collect();
    // Headline facts: 5% is silent, 15% publishes, both liveness flips publish.
    let b = observed.as_bytes();
    let headline = b[0] == b'P' && b[1] == b'.' && b[2] == b'.' && b[3] == b'P' && b[4] == b'P' && b[5] == b'P';
    verdict(
        mismatches.is_empty() && headline,
        format!("trace {observed}; mismatches {mismatches:?}"),
    )
}

fn quiescence_and_trigger() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = FsRepository::new();
    for app in ["alpha", "beta", "gamma"] {
        let root = dir.path().join(app);
        std::fs::create_dir(&root).unwrap();
        std::fs::write(root.join("docker-compose.yml"), STACKDEMO_COMPOSE).unwrap();
        std::fs::write(root.join("requirements.yml"), STACKDEMO_REQUIREMENTS).unwrap();
        repo.insert(app, root);
    }
    let report_path = dir.path().join("report.json");
    let mut world = SimulatedWorld::new(build_testbed(6, 2).unwrap(), PerturbationModel::default(), false, 0, 0.1, 10);
    let periods = WatcherPeriods::default();
    let mut watcher = Watcher::new(
        Box::new(SimulatedBackend::new()),
        Box::new(repo),
        Box::new(FileReport::new(&report_path)),
        CommandQueue::new(),
        periods,
    );
    let mut now = 0.0;
    let tick = |watcher: &mut Watcher, world: &mut SimulatedWorld, now: f64| {
        if let Some(r) = world.advance() {
            std::fs::write(&report_path, r).unwrap();
        }
        watcher.step(now)
    };
    tick(&mut watcher, &mut world, now);
    let initial = watcher.reasoning_steps();
    for _ in 0..50 {
        now += 1.0;
        tick(&mut watcher, &mut world, now);
    }
    let quiet = watcher.reasoning_steps() - initial;

    let req = dir.path().join("beta/requirements.yml");
    let mut bytes = std::fs::read(&req).unwrap();
    let at = bytes.windows(11).position(|w| w == b"hardware: 6").unwrap() + 10;
    bytes[at] = b'5';
    std::fs::write(&req, bytes).unwrap();

    let before = watcher.reasoning_steps();
    let mut reasoned = Vec::new();
    let until = now + periods.files;
    while now < until {
        now += 1.0;
        reasoned.extend(tick(&mut watcher, &mut world, now).outcomes.into_iter().map(|o| o.app_id));
    }
    let triggered = watcher.reasoning_steps() - before;
    verdict(
        initial == 3 && quiet == 0 && triggered == 1 && reasoned == ["beta"],
        format!(
            "initial deployment {initial} steps, then {quiet} over 50 frozen ticks; byte flip gave {triggered} step(s) for {reasoned:?} within one files period"
        ),
    )
}

fn determinism() -> Verdict {
    let mut differing = Vec::new();
    for (seed, strategy, nodes, apps) in [
        (0, Strategy::Continuous, 10, 5),
        (0, Strategy::ExhaustiveRestart, 10, 5),
        (42, Strategy::Continuous, 15, 10),
        (7, Strategy::ExhaustiveRestart, 6, 3),
    ] {
        let config = ScenarioConfig {
            nodes,
            apps,
            duration_ticks: 60,
            seed,
            strategy,
            ..Default::default()
        };
        let a = run_scenario(&config).unwrap();
        let b = run_scenario(&config).unwrap();
        if a.to_jsonl() != b.to_jsonl() || a.summary_csv() != b.summary_csv() {
            differing.push(format!("seed {seed} {strategy:?}"));
        }
    }
    // Strategy runs with one seed must see the same world and commits.
    let world = |seed| {
        let mut rng = substream(seed, "world");
        perturb(&build_testbed(10, 3).unwrap(), &PerturbationModel::default(), &mut rng)
    };
    let same_world = world(3) == world(3);
    verdict(
        differing.is_empty() && same_world,
        format!("4 configurations run twice, differing logs: {differing:?}"),
    )
}
