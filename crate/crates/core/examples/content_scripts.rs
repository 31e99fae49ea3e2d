//! Match patterns and the three injection phases.

use webprov::extension::match_content_scripts;
use webprov::session::execute;
use webprov::{MatchPattern, RunAt, Scenario, Tracking};

const SCENARIO: &str = r#"{
  "page_url": "https://shop.example/cart?id=3",
  "publisher_html": "<html><head></head><body><div id=\"cart\"></div><script data-script=\"page\"></script></body></html>",
  "scripts": {
    "page":  { "ops": [ { "op": "set_text", "target": "div", "value": "2 items" } ] },
    "early": { "ops": [ { "op": "create_element", "tag": "meta", "var": "m" },
                        { "op": "append_child", "parent": "head", "child": "m" } ] },
    "late":  { "ops": [ { "op": "set_attribute", "target": "div", "name": "data-seen", "value": "1" } ] },
    "idle":  { "ops": [ { "op": "create_element", "tag": "aside", "var": "a" },
                        { "op": "append_child", "parent": "body", "child": "a" } ] },
    "never": { "ops": [ { "op": "remove", "target": "div" } ] }
  },
  "extensions": [ { "id": "ext-helper", "content_scripts": [
    { "matches": ["*://*.example/*"], "js": ["early"], "run_at": "document_start" },
    { "matches": ["https://shop.example/cart*"], "js": ["late"], "run_at": "document_end" },
    { "matches": ["<all_urls>"], "js": ["idle"] },
    { "matches": ["https://other.example/*"], "js": ["never"] } ] } ]
}"#;

fn main() {
    for pattern in ["*://*.example/*", "https://shop.example/cart*", "http://shop.example/*", "<all_urls>"] {
        let p = MatchPattern::parse(pattern).unwrap();
        println!("{pattern:<28} matches page: {}", p.matches(&"https://shop.example/cart?id=3".parse().unwrap()));
    }

    let scenario = Scenario::from_json(SCENARIO, "inline").unwrap();
    let ext = &scenario.extensions[0];
    for phase in [RunAt::DocumentStart, RunAt::DocumentEnd, RunAt::DocumentIdle] {
        println!("{phase:?}: {:?}", match_content_scripts(ext, &scenario.page_url, phase).unwrap());
    }

    let (tree, _, _) = execute(&scenario, Tracking::On).unwrap();
    println!("\n{}", tree.serialize());
    for tag in ["meta", "div", "aside"] {
        let id = tree.query(tag, 0).unwrap();
        println!("{tag:<6} {}", tree.get(id).unwrap().provenance());
    }
}
