//! Lenient parsing and the canonical serializer.

use webprov::{parse_document, LabelSet};

fn main() {
    let sloppy = r#"<!DOCTYPE html><title>Shop</title>
<ul><li>one<li>two</ul><p>Price &lt; 10 &amp; <b>bold<p>next</p>
<img src=a.png><br/><script src="https://cdn.example/x.js"></script>"#;

    let (tree, scripts) = parse_document(sloppy, &LabelSet::empty()).unwrap();
    let html = tree.serialize();
    println!("{html}");
    println!("{} nodes, {} script elements", tree.node_count(), scripts.len());

    let (again, _) = parse_document(&html, &LabelSet::empty()).unwrap();
    assert_eq!(again.serialize(), html);
    println!("re-parsing the output reproduces it exactly");

    for id in tree.document_order().into_iter().filter(|id| tree.get(*id).unwrap().is_element()).take(6) {
        println!("{}", tree.path(id).unwrap());
    }
}
