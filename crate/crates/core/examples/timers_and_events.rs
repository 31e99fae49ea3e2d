//! Stepping the engine by hand: an event listener registered by the page and
//! a timeout registered by a content script each run under their own label
//! set, whenever they fire.

use std::path::Path;

use webprov::extension::RunAt;
use webprov::script::Engine;
use webprov::load_scenario;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/ad_img.scenario");
    let scenario = load_scenario(&path).unwrap();
    let mut engine = Engine::new(&scenario, true).unwrap();
    engine.run_static_scripts().unwrap();
    engine.inject_phase(RunAt::DocumentIdle).unwrap();

    for entry in engine.callbacks().iter() {
        println!("registered {:<10} {:?} under {}", entry.script, entry.kind, entry.registered);
    }

    let button = engine.tree().query("button", 0).unwrap();
    engine.fire_event(button, "click").unwrap();
    println!("\nafter click at t={}: {} timers pending", engine.clock().now(), engine.clock().pending());
    for t in [250, 500, 1000] {
        engine.advance_clock(t).unwrap();
        println!("t={t:<5} pending={}", engine.clock().pending());
    }

    let tree = engine.tree();
    for i in 0.. {
        let Some(img) = tree.query("img", i) else { break };
        let node = tree.get(img).unwrap();
        println!("{:<45} {}", node.attribute("src").unwrap_or(""), node.provenance());
    }
}
