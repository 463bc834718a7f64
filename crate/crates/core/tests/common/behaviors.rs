use manipbench_core::engine::{
    BehaviorDef, BehaviorLibrary, ComputeRegistry, StateDef, StateKind, Transition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Compute registry whose `script` function returns its configured outcome.
pub fn script_registry() -> ComputeRegistry {
    let mut r = ComputeRegistry::with_builtins();
    r.register("script", |ctx| {
        ctx.config()
            .get("outcome")
            .and_then(|v| v.as_str())
            .map(str::to_owned)
            .ok_or_else(|| "script state without an outcome".to_owned())
    });
    r
}

const LABELS: [&str; 4] = ["succeeded", "failed", "retry", "skip"];

fn random_flat(rng: &mut ChaCha8Rng, name: &str, refs: &[BehaviorDef]) -> BehaviorDef {
    let n = rng.random_range(1..=5);
    let terminals: Vec<String> = ["done", "fail", "other"][..rng.random_range(1..=3)]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut def = BehaviorDef::new(name, "s0").terminals(terminals.clone());
    for i in 0..n {
        let sname = format!("s{i}");
        let use_ref = !refs.is_empty() && rng.random_bool(0.4);
        let state = if use_ref {
            let inner = &refs[rng.random_range(0..refs.len())];
            StateDef::new(&sname, StateKind::BehaviorRef, &inner.name)
                .outcomes(inner.terminal_outcomes.clone())
        } else {
            let k = rng.random_range(1..=LABELS.len());
            let outcomes: Vec<&str> = LABELS[..k].to_vec();
            let pick = outcomes[rng.random_range(0..k)];
            StateDef::new(&sname, StateKind::Compute, "script")
                .outcomes(outcomes)
                .with_config("outcome", json!(pick))
        };
        // forward edges only: later states or terminals; s(i+1) keeps the chain reachable
        for (j, o) in state.outcomes.iter().enumerate() {
            let target = if j == 0 && i + 1 < n {
                format!("s{}", i + 1)
            } else if i + 1 < n && rng.random_bool(0.5) {
                format!("s{}", rng.random_range(i + 1..n))
            } else {
                terminals[rng.random_range(0..terminals.len())].clone()
            };
            def.transitions.push(Transition {
                state: sname.clone(),
                outcome: o.clone(),
                target,
            });
        }
        def.states.push(state);
    }
    def
}

/// A random acyclic behavior tree up to three levels deep, with its root.
pub fn random_acyclic(seed: u64) -> (BehaviorLibrary, BehaviorDef) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves: Vec<BehaviorDef> = (0..2)
        .map(|i| random_flat(&mut rng, &format!("leaf{i}"), &[]))
        .collect();
    let mids: Vec<BehaviorDef> = (0..2)
        .map(|i| random_flat(&mut rng, &format!("mid{i}"), &leaves))
        .collect();
    let root = random_flat(&mut rng, "root", &mids);
    let mut lib = BehaviorLibrary::new();
    for d in leaves.into_iter().chain(mids) {
        lib.register(d).unwrap();
    }
    (lib, root)
}

/// Manually inlines every `behavior_ref`, naming inner states `outer/inner`.
pub fn flatten(lib: &BehaviorLibrary, def: &BehaviorDef) -> BehaviorDef {
    let mut out = BehaviorDef::new(format!("{}_flat", def.name), def.initial.clone())
        .terminals(def.terminal_outcomes.clone());
    out.parameters = def.parameters.clone();
    // where entering a state really lands
    let entry = |name: &str| -> String {
        match def.find_state(name) {
            Some(s) if s.kind == StateKind::BehaviorRef => {
                let inner = flatten(lib, lib.get(&s.binding).unwrap());
                format!("{name}/{}", inner.initial)
            }
            _ => name.to_owned(),
        }
    };
    out.initial = entry(&def.initial);
    for s in &def.states {
        if s.kind != StateKind::BehaviorRef {
            out.states.push(s.clone());
            for t in def.transitions.iter().filter(|t| t.state == s.name) {
                out.transitions.push(Transition {
                    state: s.name.clone(),
                    outcome: t.outcome.clone(),
                    target: entry(&t.target),
                });
            }
            continue;
        }
        let inner = flatten(lib, lib.get(&s.binding).unwrap());
        for is in &inner.states {
            let mut c = is.clone();
            c.name = format!("{}/{}", s.name, is.name);
            out.states.push(c);
        }
        for t in &inner.transitions {
            let target = if inner.find_state(&t.target).is_some() {
                format!("{}/{}", s.name, t.target)
            } else {
                let outer = def.target(&s.name, &t.target).unwrap();
                entry(outer)
            };
            out.transitions.push(Transition {
                state: format!("{}/{}", s.name, t.state),
                outcome: t.outcome.clone(),
                target,
            });
        }
    }
    // inlining can strand states behind refs that were never entered
    let reachable = reachable_states(&out);
    out.states.retain(|s| reachable.contains(&s.name));
    out.transitions.retain(|t| reachable.contains(&t.state));
    out
}

fn reachable_states(def: &BehaviorDef) -> std::collections::BTreeSet<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![def.initial.clone()];
    while let Some(s) = stack.pop() {
        if def.find_state(&s).is_none() || !seen.insert(s.clone()) {
            continue;
        }
        stack.extend(
            def.transitions
                .iter()
                .filter(|t| t.state == s)
                .map(|t| t.target.clone()),
        );
    }
    seen
}
