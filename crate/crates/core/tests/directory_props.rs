use dalia_core::{load_snapshot, save_snapshot, DirectorySnapshot};
use dalia_testkit::{gen, oracle, scenario};
use proptest::prelude::*;

fn resolution_table(snap: &DirectorySnapshot) -> Vec<Vec<String>> {
    gen::capability_ids()
        .iter()
        .map(|c| snap.resolve_capability(c))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn resolve_matches_brute_force(seed in any::<u64>()) {
        let snap = gen::snapshot(&mut gen::rng(seed), "s");
        for cap in gen::capability_ids() {
            prop_assert_eq!(snap.resolve_capability(&cap), oracle::resolve(&snap, &cap));
        }
    }

    #[test]
    fn resolve_and_executable_agree(seed in any::<u64>()) {
        let snap = gen::snapshot(&mut gen::rng(seed), "s");
        for cap in gen::capability_ids() {
            let resolved = snap.resolve_capability(&cap);
            for agent in snap.agents.keys() {
                let exec = snap.executable_capabilities(agent).unwrap();
                prop_assert_eq!(exec.contains(&cap), resolved.contains(agent));
                prop_assert!(exec.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn persistence_round_trips(seed in any::<u64>()) {
        let snap = gen::snapshot(&mut gen::rng(seed), "s");
        let bytes = save_snapshot(&snap);
        let back = load_snapshot(&bytes).unwrap();
        prop_assert_eq!(&back, &snap);
        prop_assert_eq!(save_snapshot(&back), bytes);
    }

    #[test]
    fn merge_with_self_resolves_the_same(seed in any::<u64>()) {
        let snap = gen::snapshot(&mut gen::rng(seed), "s");
        let merged = DirectorySnapshot::merge(&[snap.clone(), snap.clone()]);
        prop_assert!(merged.same_entries(&snap));
        prop_assert_eq!(resolution_table(&merged), resolution_table(&snap));
    }

    #[test]
    fn merge_keeps_first_record(a in any::<u64>(), b in any::<u64>()) {
        let s1 = gen::snapshot(&mut gen::rng(a), "s1");
        let s2 = gen::snapshot(&mut gen::rng(b), "s2");
        let merged = DirectorySnapshot::merge(&[s1.clone(), s2.clone()]);
        for (id, rec) in &merged.agents {
            let expected = s1.agents.get(id).or_else(|| s2.agents.get(id)).unwrap();
            prop_assert_eq!(rec, expected);
        }
        prop_assert_eq!(merged.agents.len(), s1.agents.keys().chain(s2.agents.keys()).collect::<std::collections::BTreeSet<_>>().len());
    }

    #[test]
    fn disjoint_merge_unions_resolutions(a in any::<u64>(), b in any::<u64>()) {
        let s1 = gen::snapshot(&mut gen::rng(a), "s1");
        let mut s2 = gen::snapshot(&mut gen::rng(b), "s2");
        for id in s1.agents.keys() {
            s2 = s2.remove_agent(id);
        }
        let merged = DirectorySnapshot::merge(&[s1.clone(), s2.clone()]);
        for cap in gen::capability_ids() {
            let mut expected = oracle::resolve(&s1, &cap);
            expected.extend(oracle::resolve(&s2, &cap));
            expected.sort();
            expected.dedup();
            // Server bindings are unioned, so an agent may gain reach through
            // the other snapshot's bindings; never lose it.
            let got = merged.resolve_capability(&cap);
            for agent in &expected {
                prop_assert!(got.contains(agent));
            }
            prop_assert_eq!(got, oracle::resolve(&merged, &cap));
        }
    }
}

#[test]
fn persisted_form_holds_no_capability_bodies() {
    let text = String::from_utf8(save_snapshot(&scenario::directory())).unwrap();
    for field in [
        "\"inputs\"",
        "\"outputs\"",
        "\"preconditions\"",
        "\"postconditions\"",
        "\"role\":\"information_retrieval\"",
    ] {
        assert!(!text.contains(field), "{field} leaked into {text}");
    }
    assert!(text.contains("restaurant.search"));
}

#[test]
fn register_remove_register_equals_register() {
    let once = scenario::directory();
    let again = once
        .remove_agent(scenario::AGENT)
        .register_agent(scenario::agent())
        .unwrap();
    assert_eq!(save_snapshot(&once), save_snapshot(&again));
}
