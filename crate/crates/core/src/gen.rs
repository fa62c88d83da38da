//! Seeded random generators for the cross-checking suites: small scenarios
//! with callbacks for monitor-versus-oracle comparison, and synthetic
//! depth-2 traces for acceptor-versus-oracle comparison.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decider::MEvent;
use crate::interp::{Access, Event, EventKind, ExecSpan, Rw, Store, TopCall, Trace};
use crate::lang::{parse_contract, CodeContext, ObjectId, ObjectName};

pub struct GeneratedScenario {
    pub ctx: CodeContext,
    pub store: Store,
    pub call: TopCall,
    /// The object whose projections the suites check.
    pub checked: ObjectId,
}

fn field_of(rng: &mut ChaCha8Rng, use_map: bool) -> String {
    if use_map {
        let k = rng.gen_range(0..2);
        format!("m[{k}]")
    } else {
        format!("f{}", rng.gen_range(0..3))
    }
}

fn gen_actions(rng: &mut ChaCha8Rng, use_map: bool, sites: usize, depth: usize) -> Vec<String> {
    let n = rng.gen_range(2..=5);
    let mut acts = Vec::new();
    let mut sites_left = sites;
    for i in 0..n {
        let roll = rng.gen_range(0..10);
        match roll {
            0..=2 => acts.push(format!("v := {};", field_of(rng, use_map))),
            3..=5 => {
                let c = rng.gen_range(0..3);
                acts.push(format!("t := {c}; {} := t;", field_of(rng, use_map)));
            }
            6..=7 => {
                acts.push(format!(
                    "v := {}; t := v + 1; {} := t;",
                    field_of(rng, use_map),
                    field_of(rng, use_map)
                ));
            }
            _ => {
                if depth > 0 && rng.gen_bool(0.5) {
                    let inner = gen_actions(rng, use_map, 0, depth - 1).join(" ");
                    acts.push(format!("v := {}; if v > 0 {{ {inner} }}", field_of(rng, use_map)));
                } else {
                    acts.push("skip;".to_string());
                }
            }
        }
        // Sprinkle call sites at random positions.
        if sites_left > 0 && (rng.gen_bool(0.4) || i == n - 1) {
            acts.push("if arg > 0 { z := call relay(arg - 1); }".to_string());
            sites_left -= 1;
        }
    }
    while sites_left > 0 {
        acts.push("if arg > 0 { z := call relay(arg - 1); }".to_string());
        sites_left -= 1;
    }
    acts
}

/// A random scenario over at most three objects, at most two call sites in
/// the checked object, and at most three locations.
pub fn random_scenario(seed: u64) -> GeneratedScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let use_map = rng.gen_bool(0.25);
    let fields = if use_map {
        "field m map; field f0;"
    } else {
        "field f0; field f1; field f2;"
    };
    let sites = rng.gen_range(0..=2);
    let body = gen_actions(&mut rng, use_map, sites, 1).join("\n    ");
    let o_src = format!(
        "contract o {{ {fields} enter {{ var v, t, z;\n    {body}\n    return; }} }}"
    );

    // Keep the checked object at four invocations or fewer: two call sites
    // combine only with the single-callback relay.
    let relay_kind = if sites >= 2 { 0 } else { rng.gen_range(0..3) };
    let relay_src = match relay_kind {
        0 => "contract relay { enter { var z; if arg > 0 { z := call o(arg - 1); } ret := 1; return; } }".to_string(),
        1 => "contract relay { enter { var z; if arg > 0 { z := call o(arg - 1); z := call o(arg - 1); } ret := 0; return; } }".to_string(),
        _ => "contract relay { enter { var z; if arg > 0 { z := call hop(arg); } ret := 2; return; } }".to_string(),
    };
    let mut contracts = vec![
        parse_contract(&o_src).expect("generated object parses"),
        parse_contract(&relay_src).expect("generated relay parses"),
    ];
    if relay_src.contains("hop") {
        contracts.push(
            parse_contract(
                "contract hop { enter { var z; if arg > 0 { z := call o(arg - 1); } ret := 3; return; } }",
            )
            .unwrap(),
        );
    }
    let ctx = CodeContext::from_contracts(contracts);

    let mut store = Store::new();
    if use_map {
        for k in 0..2 {
            store.write(ObjectId(0), &"m".into(), Some(k), rng.gen_range(0..3));
        }
        store.write(ObjectId(0), &"f0".into(), None, rng.gen_range(0..3));
    } else {
        for f in ["f0", "f1", "f2"] {
            store.write(ObjectId(0), &f.into(), None, rng.gen_range(0..3));
        }
    }

    let call = TopCall {
        target: ObjectId(0),
        selector: 0,
        arg: rng.gen_range(0..=3),
    };
    GeneratedScenario {
        ctx,
        store,
        call,
        checked: ObjectId(0),
    }
}

/// A synthetic depth-2 trace of a host object whose callbacks arrive through
/// an environment wrapper: enter host, interleave access runs with
/// wrapped callbacks, return. Locations are keys 0..3 of one map field.
pub fn random_depth2_trace(seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let host = ObjectId(0);
    let env = ObjectId(1);
    let mut events: Vec<Event> = Vec::new();
    let push = |events: &mut Vec<Event>, object, kind, text: &str, access, depth| {
        events.push(Event {
            index: (events.len() + 1) as u32,
            object,
            kind,
            text: text.to_string(),
            access,
            depth_after: depth,
            value: Some(0),
            selector: if kind == EventKind::Enter { Some(0) } else { None },
        });
    };
    let accesses = |events: &mut Vec<Event>, rng: &mut ChaCha8Rng, depth: u32| {
        for _ in 0..rng.gen_range(0..=3) {
            let key = rng.gen_range(0..3i64);
            if rng.gen_bool(0.5) {
                push(
                    events,
                    host,
                    EventKind::Read,
                    &format!("v := cell[{key}];"),
                    Some(Access {
                        field: "cell".into(),
                        key: Some(key),
                        rw: Rw::Read,
                    }),
                    depth,
                );
            } else {
                push(
                    events,
                    host,
                    EventKind::Write,
                    &format!("cell[{key}] := v;"),
                    Some(Access {
                        field: "cell".into(),
                        key: Some(key),
                        rw: Rw::Write,
                    }),
                    depth,
                );
            }
        }
    };

    push(&mut events, host, EventKind::Enter, "enter", None, 1);
    accesses(&mut events, &mut rng, 1);
    for _ in 0..rng.gen_range(0..=3) {
        push(&mut events, env, EventKind::Enter, "enter", None, 2);
        push(&mut events, host, EventKind::Enter, "enter", None, 3);
        accesses(&mut events, &mut rng, 3);
        push(&mut events, host, EventKind::Return, "return", None, 2);
        push(&mut events, env, EventKind::Return, "return", None, 1);
        accesses(&mut events, &mut rng, 1);
    }
    push(&mut events, host, EventKind::Return, "return", None, 0);

    let spans = vec![ExecSpan {
        start: 0,
        end: events.len(),
        aborted: false,
    }];
    Trace {
        events,
        initial_store: Store::new(),
        final_store: Store::new(),
        spans,
        names: vec![ObjectName("host".into()), ObjectName("env".into())],
    }
}

/// Converts a trace into the acceptor's event alphabet for an object: its
/// enters and returns plus its accesses, with locations indexed by map key.
pub fn trace_to_m_events(trace: &Trace, o: ObjectId) -> Vec<MEvent> {
    let mut out = Vec::new();
    for ev in &trace.events {
        if ev.object != o {
            continue;
        }
        match ev.kind {
            EventKind::Enter => out.push(MEvent::Enter),
            EventKind::Return => out.push(MEvent::Return),
            EventKind::Read => {
                if let Some(a) = &ev.access {
                    out.push(MEvent::Read(a.key.unwrap_or(0) as usize));
                }
            }
            EventKind::Write => {
                if let Some(a) = &ev.access {
                    out.push(MEvent::Write(a.key.unwrap_or(0) as usize));
                }
            }
            _ => {}
        }
    }
    out
}
