//! Full pipeline on an ad-injecting extension: roots, highlighted page and
//! the JSON report, in both chain modes.

use std::path::Path;

use webprov::{load_scenario, run_session, ChainMode, IndicatorConfig, Tracking};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/ad_iframe.scenario");
    let scenario = load_scenario(&path).unwrap();

    let full = run_session(&scenario, &IndicatorConfig::with_color("orange"), ChainMode::FullChain, Tracking::On).unwrap();
    println!("{}\n", full.annotated_html);

    let result = run_session(&scenario, &IndicatorConfig::default(), ChainMode::ExtensionOnly, Tracking::On).unwrap();
    println!("{}\n", result.annotated_html);
    print!("{}", result.report.to_json());

    let st = &result.stats;
    println!("\n{} nodes, {} dom ops, {} labels, {:.3} ms", st.nodes, st.mutations, st.labels_interned, st.elapsed.as_secs_f64() * 1e3);
}
