//! A content script asks its background page for an ad and renders the
//! reply. Handlers keep the label set they were registered under.

use std::path::Path;

use webprov::session::execute;
use webprov::{find_suspicious_roots, load_scenario, Tracking};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/ad_div.scenario");
    let scenario = load_scenario(&path).unwrap();
    let (tree, registry, log) = execute(&scenario, Tracking::On).unwrap();

    for label in registry.labels() {
        println!("{label} = {}", label.principal());
    }
    println!("{} script errors", log.script_errors.len());
    for root in find_suspicious_roots(&tree) {
        println!("\n{} ({:?}) {}", tree.path(root.node).unwrap(), root.kind(), root.chain);
        println!("{}", tree.serialize_node(root.node));
    }
}
