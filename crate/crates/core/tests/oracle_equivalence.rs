mod common;

use common::{check_oracle, committed_scenarios, op_count, random_scenario};
use webprov::oracle_attribution;
use webprov::session::execute;
use webprov::{Scenario, Tracking};

#[test]
fn committed_scenarios_match_oracle() {
    for (name, s) in committed_scenarios() {
        let n = check_oracle(0, &s).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(n > 0, "{name}");
    }
}

#[test]
fn random_corpus_matches_oracle() {
    let mut nodes = 0;
    let mut aborted = 0;
    for seed in 0..300 {
        let s = random_scenario(seed);
        assert!(op_count(&s) <= common::MAX_OPS);
        match check_oracle(seed, &s) {
            Ok(0) => aborted += 1,
            Ok(n) => nodes += n,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(nodes > 3000, "corpus too small: {nodes} nodes");
    assert!(aborted < 60, "{aborted} of 300 scenarios aborted");
}

#[test]
fn generator_is_deterministic() {
    assert_eq!(random_scenario(7), random_scenario(7));
    assert_ne!(random_scenario(7), random_scenario(8));
}

#[test]
fn generator_exercises_every_feature() {
    let corpus: Vec<String> = (0..300).map(|seed| random_scenario(seed).to_json()).collect();
    for needle in [
        "create_element",
        "append_child",
        "insert_before",
        "set_attribute",
        "set_text",
        "\"remove\"",
        "set_inner_html",
        "document_write",
        "add_event_listener",
        "set_timeout",
        "set_interval",
        "load_script",
        "send_message",
        "register_on_message",
        "programmatic_inject",
        "fire_event",
        "advance_clock",
        "background_scripts",
        "document_start",
        "data-script",
        "\"origin\"",
    ] {
        assert!(corpus.iter().any(|s| s.contains(needle)), "{needle} never generated");
    }
}

fn scenario(json: &str) -> Scenario {
    Scenario::from_json(json, "test").unwrap()
}

#[test]
fn nesting_limit_is_shared() {
    let s = scenario(
        r#"{"page_url":"https://a.example/","publisher_html":"<html><body><script src=\"https://b.example/r.js\"></script></body></html>",
            "resources":{"https://b.example/r.js":"r"},
            "scripts":{"r":{"ops":[{"op":"create_element","tag":"i","var":"x"},
                                   {"op":"append_child","parent":"body","child":"x"},
                                   {"op":"load_script","url":"https://b.example/r.js"}]}}}"#,
    );
    let (tree, _, log) = execute(&s, Tracking::On).unwrap();
    assert_eq!(tree.document_order().iter().filter(|id| tree.get(**id).unwrap().tag() == Some("i")).count(), 32);
    assert_eq!(log.script_errors.len(), 1);
    assert_eq!(oracle_attribution(&s).unwrap().script_errors, 1);
    check_oracle(0, &s).unwrap();
}

#[test]
fn abort_agrees() {
    let s = scenario(
        r#"{"page_url":"https://a.example/","publisher_html":"<html><body><p>x</p><script data-script=\"s\"></script></body></html>",
            "scripts":{"s":{"ops":[{"op":"create_element","tag":"i","var":"x"},
                                   {"op":"append_child","parent":"body","child":"x"},
                                   {"op":"append_child","parent":"p","child":"x"}]}}}"#,
    );
    assert!(execute(&s, Tracking::On).is_err());
    assert_eq!(check_oracle(0, &s), Ok(0));
}

#[test]
fn cross_extension_callbacks_keep_registering_label() {
    // ext-a registers a click handler on a node; the page fires it.
    let s = scenario(
        r#"{"page_url":"https://a.example/","publisher_html":"<html><body><button>b</button></body></html>",
            "scripts":{"reg":{"ops":[{"op":"add_event_listener","target":"button","event":"click","callback":"cb"}]},
                       "cb":{"ops":[{"op":"create_element","tag":"i","var":"x"},{"op":"append_child","parent":"body","child":"x"}]}},
            "extensions":[{"id":"ext-a","content_scripts":[{"matches":["<all_urls>"],"js":["reg"]}]}],
            "timeline":[{"op":"onload"},{"op":"fire_event","target":"button","event":"click"}]}"#,
    );
    let (tree, _, _) = execute(&s, Tracking::On).unwrap();
    let i = tree.query("i", 0).unwrap();
    assert_eq!(tree.get(i).unwrap().provenance().to_string(), "{l1}");
    check_oracle(0, &s).unwrap();
}
