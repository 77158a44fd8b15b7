//! One line per acceptance criterion: PASS or FAIL, measured time, limit.

use std::collections::BTreeSet;
use std::io::Cursor;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dalia_cli::session::Session;
use dalia_core::{
    canonical_order, check_feasibility, execute, load_snapshot, plan, replay_check, resolve_goal,
    save_snapshot, synthesize_graph, Capability, DirectorySnapshot, ExecutionContext,
    ExecutionTrace, FactToken, Goal, StepStatus, TaskGraph,
};
use dalia_testkit::mock::{Fault, MockInvoker};
use dalia_testkit::{gen, oracle, scenario};
use dalia_wire::codec::{decode, encode, Framing, Message, Request, Response};
use dalia_wire::error::METHOD_NOT_FOUND;
use dalia_wire::{
    fixtures, serve_tcp, CallCounts, CapabilityServer, ClientError, CountingClient,
    DirectoryService, ErrorObject, LocalClient, MethodClass, ServerConfig, Transport,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict, u64);

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

// 1. Scenario reproduction through the `plan` command.

fn scenario_reproduction() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_dalia");
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("../wire/fixtures");
    let fx = fx.display();
    let cfg = json!({
        "servers": [
            format!("stdio:{bin} server serve --config {fx}/food.json"),
            format!("stdio:{bin} server serve --config {fx}/map.json"),
        ],
        "directory": format!("stdio:{bin} directory serve --snapshot {fx}/directory.json"),
    });
    let path = dir.path().join("orchestrator.json");
    std::fs::write(&path, cfg.to_string()).map_err(|e| e.to_string())?;
    let out = Command::new(bin)
        .args([
            "plan",
            "--config",
            path.to_str().unwrap(),
            "--intent",
            "book_restaurant",
        ])
        .args([
            "--inputs",
            "location=city centre",
            "date=tomorrow",
            "party_size=4",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })?;
    let g = TaskGraph::from_json(&out.stdout).map_err(|e| e.to_string())?;
    ensure(g.nodes.len() == 2, || format!("{} nodes", g.nodes.len()))?;
    ensure(g.edges.len() == 1, || format!("{} edges", g.edges.len()))?;
    let order: Vec<&str> = canonical_order(&g)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|i| g.node(*i).unwrap().capability_id.as_str())
        .collect();
    ensure(order == ["restaurant.search", "restaurant.reserve"], || {
        format!("order {order:?}")
    })?;
    let e = &g.edges[0];
    let from = g.node(e.from_node).unwrap().capability_id.as_str();
    let to = g.node(e.to_node).unwrap().capability_id.as_str();
    ensure(
        e.slot.as_str() == "restaurant_list"
            && from == "restaurant.search"
            && to == "restaurant.reserve",
        || format!("edge {from} -> {to} [{}]", e.slot),
    )?;
    ensure(
        g.nodes
            .iter()
            .all(|n| n.agent_id.as_deref() == Some("RestaurantAgent")),
        || "node not assigned RestaurantAgent".into(),
    )?;
    Ok("2 nodes, search -> reserve via restaurant_list, both RestaurantAgent".into())
}

// 2. Determinism of planning and execution.

fn local_session() -> Session {
    let food = Arc::new(
        CapabilityServer::new(fixtures::food_config())
            .unwrap()
            .into_router(),
    );
    let map = Arc::new(
        CapabilityServer::new(fixtures::map_config())
            .unwrap()
            .into_router(),
    );
    let dir = Arc::new(DirectoryService::new(fixtures::scenario_directory()).into_router());
    Session::from_transports(
        vec![
            Box::new(LocalClient::new("food", food)),
            Box::new(LocalClient::new("map", map)),
        ],
        Box::new(LocalClient::new("directory", dir)),
    )
}

fn determinism() -> Verdict {
    let goal = scenario::goal();
    let mut graphs = BTreeSet::new();
    for _ in 0..100 {
        let ctx = local_session()
            .discover(goal.bound_slots())
            .map_err(|e| e.to_string())?;
        let g = plan(&goal, &ctx).map_err(|e| e.to_string())?;
        graphs.insert(g.canonical_json());
    }
    ensure(graphs.len() == 1, || {
        format!("{} distinct graph serializations", graphs.len())
    })?;

    let ctx = scenario::context();
    let g = plan(&goal, &ctx).map_err(|e| e.to_string())?;
    let mut traces: Vec<ExecutionTrace> = Vec::new();
    for _ in 0..100 {
        let mut invoker = MockInvoker::new(ctx.capabilities().map(|p| &p.capability));
        traces.push(execute(&g, &goal, &ctx, &mut invoker).map_err(|e| e.to_string())?);
    }
    let distinct = traces.iter().filter(|t| **t != traces[0]).count();
    ensure(distinct == 0, || {
        format!("{distinct} traces differ from the first")
    })?;
    let bytes: BTreeSet<Vec<u8>> = traces.iter().map(|t| t.canonical_json()).collect();
    ensure(bytes.len() == 1, || "trace serializations differ".into())?;
    Ok("100 plans byte-identical, 100 traces field-identical".into())
}

// 3. Groundedness of every emitted plan.

fn grounded(g: &TaskGraph, goal: &Goal, ctx: &ExecutionContext) -> Result<(), String> {
    for n in &g.nodes {
        let cap = ctx
            .capability(&n.capability_id)
            .ok_or_else(|| format!("{} not in context", n.capability_id))?;
        let agent = n.agent_id.as_ref().ok_or("unassigned node")?;
        if !oracle::resolve(ctx.directory(), &n.capability_id).contains(agent) {
            return Err(format!("{agent} cannot execute {}", n.capability_id));
        }
        for input in &cap.inputs {
            let fed = g.incoming(n.node_id).any(|e| {
                &e.slot == input
                    && g.node(e.from_node)
                        .and_then(|p| ctx.capability(&p.capability_id))
                        .is_some_and(|p| p.outputs.contains(input))
            });
            if !fed && !goal.bindings.contains_key(input) {
                return Err(format!(
                    "input {input} of {} is not covered",
                    n.capability_id
                ));
            }
        }
    }
    Ok(())
}

fn groundedness() -> Verdict {
    let (mut contexts, mut plans) = (0, 0);
    for seed in 0..2000u64 {
        let inst = gen::instance(&mut gen::rng(seed), 6);
        let Ok(ctx) = inst.context() else { continue };
        contexts += 1;
        if let Ok(g) = plan(&inst.goal, &ctx) {
            plans += 1;
            grounded(&g, &inst.goal, &ctx).map_err(|e| format!("seed {seed}: {e}"))?;
        }
    }
    ensure(contexts >= 1000, || {
        format!("only {contexts} valid contexts")
    })?;
    Ok(format!("{contexts} contexts, {plans} plans, 0 violations"))
}

// 4. Equivalence with brute-force enumeration.

fn oracle_equivalence() -> Verdict {
    let (mut graphs, mut verdicts) = (0, 0);
    for seed in 0..3000u64 {
        let inst = gen::instance(&mut gen::rng(seed), 6);
        let Ok(ctx) = inst.context() else { continue };
        let catalog = inst.catalog();
        let bound = inst.goal.bound_slots();
        for task in inst.tasks().iter().filter(|t| t.capabilities.len() <= 5) {
            let fast = check_feasibility(task, &catalog, &bound);
            let slow = oracle::feasibility(task, &catalog, &bound);
            let same = fast.feasible == slow.feasible
                && fast.missing_capabilities == slow.missing_capabilities
                && fast.uncovered_outputs == slow.uncovered_outputs
                && fast.unreachable_inputs == slow.unreachable_inputs;
            ensure(same, || {
                format!("seed {seed}: feasibility of {} differs", task.task_id)
            })?;
            verdicts += 1;
        }
        let Ok(task) = resolve_goal(&inst.goal, &ctx) else {
            continue;
        };
        if task.capabilities.len() > 5 {
            continue;
        }
        let enumerated = oracle::valid_graphs(task, &catalog, &inst.goal);
        match (synthesize_graph(task, &inst.goal, &ctx), enumerated.first()) {
            (Ok(g), Some(min)) if g == min.graph => {}
            (Err(_), None) => {}
            (got, want) => {
                return Err(format!(
                    "seed {seed}: planner {:?} vs oracle {:?}",
                    got.map(|g| g.fingerprint()),
                    want.map(|d| &d.key)
                ))
            }
        }
        graphs += 1;
    }
    Ok(format!(
        "{graphs} graph instances, {verdicts} feasibility verdicts, 0 mismatches"
    ))
}

// 5. No discovery traffic once the context is sealed.

fn closed_world() -> Verdict {
    let food = serve_tcp(
        CapabilityServer::new(fixtures::food_config())
            .unwrap()
            .into_router(),
        "127.0.0.1:0",
    )
    .map_err(|e| e.to_string())?;
    let map = serve_tcp(
        CapabilityServer::new(fixtures::map_config())
            .unwrap()
            .into_router(),
        "127.0.0.1:0",
    )
    .map_err(|e| e.to_string())?;
    let dir = serve_tcp(
        DirectoryService::new(fixtures::scenario_directory()).into_router(),
        "127.0.0.1:0",
    )
    .map_err(|e| e.to_string())?;
    let counts = CallCounts::default();
    let counted = |addr: std::net::SocketAddr| -> Box<dyn Transport> {
        let inner = dalia_wire::connect(&format!("tcp://{addr}")).unwrap();
        Box::new(CountingClient::new(inner, counts.clone()))
    };
    let mut session = Session::from_transports(
        vec![counted(food.local_addr()), counted(map.local_addr())],
        counted(dir.local_addr()),
    );
    let goal = scenario::goal();
    let ctx = session
        .discover(goal.bound_slots())
        .map_err(|e| e.to_string())?;
    let during_discovery = counts.get(MethodClass::Discovery);
    counts.reset();
    let (_, trace) = session
        .plan_and_run(&goal, &ctx)
        .map_err(|e| e.to_string())?;
    let trace = trace.map_err(|e| e.to_string())?;
    let (d, x, w) = (
        counts.get(MethodClass::Discovery),
        counts.get(MethodClass::Execution),
        counts.get(MethodClass::Write),
    );
    ensure(during_discovery > 0, || "discovery made no calls".into())?;
    ensure(d == 0 && w == 0, || {
        format!("{d} discovery and {w} write calls after sealing")
    })?;
    ensure(x == trace.steps.len() && x == 2, || {
        format!("{x} execution calls")
    })?;
    Ok(format!(
        "{during_discovery} discovery calls before sealing, 0 after; {x} invocations"
    ))
}

// 6. Fault handling yields the abort-prefix shape, identically.

fn abort_prefix(statuses: &[StepStatus]) -> bool {
    let ok = statuses
        .iter()
        .take_while(|s| **s == StepStatus::Succeeded)
        .count();
    statuses.get(ok) == Some(&StepStatus::Failed)
        && statuses[ok + 1..].iter().all(|s| *s == StepStatus::Skipped)
}

fn gated_context() -> (ExecutionContext, Goal, Goal) {
    let gate = FactToken::new("payment_authorized").unwrap();
    let mut reserve: Capability = scenario::reserve();
    reserve.preconditions.push(gate.clone());
    let declared = vec![(
        scenario::FOOD_SERVER.parse().unwrap(),
        vec![scenario::search(), reserve],
        vec![scenario::booking()],
    )];
    let ctx = ExecutionContext::seal(
        declared,
        scenario::directory(),
        scenario::goal().bound_slots(),
    )
    .unwrap();
    let mut planned = scenario::goal();
    planned.initial_facts.insert(gate);
    (ctx, planned, scenario::goal())
}

fn failure_handling() -> Verdict {
    let search = "restaurant.search".parse().unwrap();
    let mut report = Vec::new();
    let cases: Vec<(&str, Option<Fault>, [StepStatus; 2])> = vec![
        (
            "fail on call 1",
            Some(Fault::FailOnCall(1)),
            [StepStatus::Failed, StepStatus::Skipped],
        ),
        (
            "fail on call 2",
            Some(Fault::FailOnCall(2)),
            [StepStatus::Succeeded, StepStatus::Failed],
        ),
        (
            "missing output",
            Some(Fault::DropOutput(search)),
            [StepStatus::Failed, StepStatus::Skipped],
        ),
        (
            "unsatisfiable precondition",
            None,
            [StepStatus::Succeeded, StepStatus::Failed],
        ),
    ];
    for (name, fault, expected) in cases {
        let (ctx, plan_goal, run_goal) = match fault {
            Some(_) => (scenario::context(), scenario::goal(), scenario::goal()),
            None => gated_context(),
        };
        let g = plan(&plan_goal, &ctx).map_err(|e| format!("{name}: {e}"))?;
        let mut seen = BTreeSet::new();
        for _ in 0..20 {
            let mut invoker = MockInvoker::new(ctx.capabilities().map(|p| &p.capability));
            if let Some(f) = fault.clone() {
                invoker = invoker.with_fault(f);
            }
            let t =
                execute(&g, &run_goal, &ctx, &mut invoker).map_err(|e| format!("{name}: {e}"))?;
            let statuses: Vec<StepStatus> = t.steps.iter().map(|s| s.status).collect();
            ensure(abort_prefix(&statuses) && statuses == expected, || {
                format!("{name}: shape {statuses:?}")
            })?;
            ensure(replay_check(&t, &g).is_ok(), || {
                format!("{name}: replay check failed")
            })?;
            seen.insert(t.canonical_json());
        }
        ensure(seen.len() == 1, || {
            format!("{name}: {} distinct traces", seen.len())
        })?;
        report.push(name);
    }
    Ok(format!(
        "{} x 20 runs identical ({})",
        report.len(),
        report.join(", ")
    ))
}

// 7. Directory and federation properties.

const BODY_FIELDS: [&str; 4] = ["inputs", "outputs", "preconditions", "postconditions"];

fn body_keys(v: &Value, found: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                if BODY_FIELDS.contains(&k.as_str()) {
                    found.push(k.clone());
                }
                body_keys(v, found);
            }
        }
        Value::Array(a) => a.iter().for_each(|v| body_keys(v, found)),
        _ => {}
    }
}

fn resolution_table(snap: &DirectorySnapshot) -> Vec<Vec<String>> {
    gen::capability_ids()
        .iter()
        .map(|c| snap.resolve_capability(c))
        .collect()
}

fn directory_properties() -> Verdict {
    let mut snaps = vec![scenario::directory()];
    snaps.extend((0..1000u64).map(|seed| gen::snapshot(&mut gen::rng(seed), "s")));
    for (i, snap) in snaps.iter().enumerate() {
        let bytes = save_snapshot(snap);
        let value: Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
        let mut found = Vec::new();
        body_keys(&value, &mut found);
        ensure(found.is_empty(), || {
            format!("snapshot {i} persists {found:?}")
        })?;
        let back = load_snapshot(&bytes).map_err(|e| e.to_string())?;
        ensure(&back == snap, || {
            format!("snapshot {i} does not round-trip")
        })?;

        for cap in gen::capability_ids() {
            let resolved = snap.resolve_capability(&cap);
            ensure(resolved == oracle::resolve(snap, &cap), || {
                format!("snapshot {i}: resolve({cap})")
            })?;
            for agent in snap.agents.keys() {
                let exec = snap
                    .executable_capabilities(agent)
                    .map_err(|e| e.to_string())?;
                ensure(exec.contains(&cap) == resolved.contains(agent), || {
                    format!("snapshot {i}: {agent}/{cap} views disagree")
                })?;
            }
        }

        let twice = DirectorySnapshot::merge(&[snap.clone(), snap.clone()]);
        ensure(resolution_table(&twice) == resolution_table(snap), || {
            format!("snapshot {i}: merge with itself changes resolution")
        })?;
    }
    for seed in 0..1000u64 {
        let a = gen::snapshot(&mut gen::rng(seed), "a");
        let b = gen::snapshot(&mut gen::rng(seed + 100_000), "b");
        let merged = DirectorySnapshot::merge(&[a.clone(), b.clone()]);
        let ids: BTreeSet<&String> = a.agents.keys().chain(b.agents.keys()).collect();
        ensure(merged.agents.len() == ids.len(), || {
            format!("merge {seed}: agent count")
        })?;
        for (id, rec) in &merged.agents {
            let first = a.agents.get(id).or_else(|| b.agents.get(id));
            ensure(first == Some(rec), || {
                format!("merge {seed}: {id} not taken from the first snapshot")
            })?;
        }
    }
    Ok("1001 snapshots: no bodies persisted, views consistent, merge precedence and idempotence hold".into())
}

// 8. Protocol conformance.

fn random_string(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &[
        'a', 'Z', '0', ' ', '"', '\\', '\n', '\t', '/', 'é', '中', '🙂', '\u{1}',
    ];
    (0..rng.gen_range(0..10))
        .map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())])
        .collect()
}

fn random_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    match rng.gen_range(0..if depth == 0 { 5 } else { 7 }) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::from(rng.gen::<i64>()),
        3 => Value::from(rng.gen::<f64>() * 10f64.powi(rng.gen_range(-30..30))),
        4 => Value::String(random_string(rng)),
        5 => Value::Array(
            (0..rng.gen_range(0..4))
                .map(|_| random_value(rng, depth - 1))
                .collect(),
        ),
        _ => Value::Object(
            (0..rng.gen_range(0..4))
                .map(|_| (random_string(rng), random_value(rng, depth - 1)))
                .collect::<Map<_, _>>(),
        ),
    }
}

fn random_message(rng: &mut ChaCha8Rng) -> Message {
    let id = rng.gen::<i64>();
    match rng.gen_range(0..3) {
        0 => Message::Request(Request::new(id, random_string(rng), random_value(rng, 3))),
        1 => Message::Response(Response::ok(id, random_value(rng, 3))),
        _ => {
            let id = if rng.gen_bool(0.1) { None } else { Some(id) };
            Message::Response(Response::err(
                id,
                ErrorObject::new(rng.gen(), random_string(rng)),
            ))
        }
    }
}

fn invalid_configs() -> Vec<(&'static str, String)> {
    let base: Value = serde_json::from_str(fixtures::FOOD_CONFIG).unwrap();
    let edit = |f: &dyn Fn(&mut Value)| {
        let mut v = base.clone();
        f(&mut v);
        v.to_string()
    };
    vec![
        ("not json", "{".to_string()),
        ("unknown field", edit(&|v| v["port"] = json!(8080))),
        (
            "bad server id",
            edit(&|v| v["server_id"] = json!("Food Server")),
        ),
        (
            "duplicate capability",
            edit(&|v| {
                let c = v["capabilities"][0].clone();
                v["capabilities"].as_array_mut().unwrap().push(c);
            }),
        ),
        (
            "empty outputs",
            edit(&|v| v["capabilities"][0]["outputs"] = json!([])),
        ),
        (
            "dangling task reference",
            edit(&|v| v["tasks"][0]["capabilities"] = json!(["restaurant.cancel"])),
        ),
        (
            "unknown handler directive",
            edit(&|v| v["handlers"]["restaurant.search"] = json!({"sleep": 5})),
        ),
        (
            "handler for undeclared capability",
            edit(&|v| v["handlers"]["restaurant.cancel"] = json!({"fail_on": [1]})),
        ),
    ]
}

fn protocol_conformance() -> Verdict {
    let mut rng = gen::rng(8);
    for i in 0..10_000 {
        let m = random_message(&mut rng);
        let body = encode(&m);
        ensure(decode(&body).as_ref() == Ok(&m), || {
            format!("message {i} does not round-trip")
        })?;
        for framing in [Framing::Lines, Framing::LengthPrefixed] {
            let mut buf = Vec::new();
            framing.write(&mut buf, &body).map_err(|e| e.to_string())?;
            let read = framing
                .read(&mut Cursor::new(buf))
                .map_err(|e| e.to_string())?;
            ensure(read.as_deref() == Some(&body[..]), || {
                format!("message {i}: {framing:?} framing")
            })?;
        }
    }

    let router = CapabilityServer::new(fixtures::food_config())
        .unwrap()
        .into_router();
    let reply = router.handle(br#"{"jsonrpc":"2.0","id":7,"method":"dalia/teleport","params":{}}"#);
    let code = match decode(&reply) {
        Ok(Message::Response(Response {
            id: Some(7),
            outcome: Err(e),
        })) => e.code,
        other => return Err(format!("unexpected reply {other:?}")),
    };
    ensure(code == METHOD_NOT_FOUND, || {
        format!("unknown method gave {code}")
    })?;
    let tcp = serve_tcp(router, "127.0.0.1:0").map_err(|e| e.to_string())?;
    let mut client = dalia_wire::client::TcpClient::new(tcp.local_addr().to_string());
    match client.call("atdp/teleport", json!({})) {
        Err(ClientError::Remote(e)) if e.code == METHOD_NOT_FOUND => {}
        other => return Err(format!("unknown method over TCP gave {other:?}")),
    }

    let configs = invalid_configs();
    for (name, text) in &configs {
        let started = ServerConfig::from_json(text).and_then(CapabilityServer::new);
        ensure(started.is_err(), || {
            format!("config with {name} was accepted")
        })?;
    }
    Ok(format!(
        "10000 messages round-trip in both framings; unknown method -> {METHOD_NOT_FOUND}; {} invalid configs rejected",
        configs.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("scenario reproduction", scenario_reproduction, 1),
        ("determinism", determinism, 30),
        ("groundedness fuzzing", groundedness, 60),
        ("oracle equivalence", oracle_equivalence, 120),
        ("closed-world execution", closed_world, 5),
        ("deterministic failure handling", failure_handling, 10),
        ("directory/federation properties", directory_properties, 30),
        ("protocol conformance", protocol_conformance, 30),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        let took = start.elapsed();
        let in_time = took < Duration::from_secs(limit);
        let (status, detail) = match (&verdict, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("over time limit; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "[{status}] {}. {name}: {detail} ({:.3} s, limit {limit} s)",
            i + 1,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
