//! Interning principals and combining label sets.

use webprov::{LabelSet, Principal, PrincipalRegistry};

fn main() {
    let mut registry = PrincipalRegistry::new();
    let publisher = registry.intern(&Principal::from_url("https://news.example/today").unwrap());
    let cdn = registry.intern(&Principal::from_url("https://cdn1.example/widget.js").unwrap());
    let ext = registry.intern(&Principal::extension("ext-abc").unwrap());
    let again = registry.intern(&Principal::from_url("https://news.example/other").unwrap());
    assert_eq!(again.index(), publisher.index());

    for label in [&publisher, &cdn, &ext] {
        println!("{label} = {}", label.principal());
    }

    let page = LabelSet::singleton(publisher);
    let widget = page.extend(&cdn);
    println!("page script:      {page}");
    println!("loaded by page:   {widget}");
    println!("extend is no-op:  {}", widget.extend(&cdn));

    let content = LabelSet::singleton(ext);
    let touched = widget.merge(&content);
    println!("widget node modified by content script: {touched}");
    println!("extension labels: {:?}", touched.contains_extension().iter().map(|l| l.to_string()).collect::<Vec<_>>());
}
