//! Cross-checks the engine against the naive interpreter, which tracks the
//! set of principals each node saw without any label machinery.

use std::collections::BTreeSet;
use std::path::Path;

use webprov::session::execute;
use webprov::{load_scenario, oracle_attribution, Tracking};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["fig2", "ad_iframe", "ad_div", "ad_img"] {
        let scenario = load_scenario(dir.join(format!("{name}.scenario"))).unwrap();
        let (tree, _, _) = execute(&scenario, Tracking::On).unwrap();
        let oracle = oracle_attribution(&scenario).unwrap();
        assert_eq!(oracle.tree.serialize(), tree.serialize());

        let mut agree = 0;
        for (id, expected) in &oracle.nodes {
            let Some(node) = tree.get(*id) else { continue };
            let actual: BTreeSet<_> = node.provenance().principals().cloned().collect();
            assert_eq!(actual, expected.principals, "{name}: {}", tree.path(*id).unwrap_or_default());
            agree += 1;
        }
        println!("{name:<10} {agree} nodes agree, publisher {}", oracle.publisher);
    }
}
