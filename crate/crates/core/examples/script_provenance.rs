//! Nested script loads: a publisher script pulls in a third-party widget,
//! which pulls in a library, and an extension touches the library's output.

use std::path::Path;

use webprov::session::execute;
use webprov::{load_scenario, Tracking};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/fig2.scenario");
    let scenario = load_scenario(&path).unwrap();
    let (tree, registry, _) = execute(&scenario, Tracking::On).unwrap();

    for label in registry.labels() {
        println!("{label} = {}", label.principal());
    }
    println!();
    for id in tree.document_order() {
        let node = tree.get(id).unwrap();
        if node.is_element() {
            println!("{:<40} {}", tree.path(id).unwrap(), node.provenance());
        }
    }
}
