//! Times a synthetic page with tracking on and off. Run with `--release`.

use webprov::bench::{measure_startup, run_benchmark, BenchConfig};

fn main() {
    let elements = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let cfg = BenchConfig { elements, reps: 5, ..BenchConfig::default() };
    let b = run_benchmark(&cfg).unwrap();
    println!("{} dom ops over {} nodes, {} reps", b.dom_ops, b.nodes, cfg.reps);
    println!("on  {:>9.3} ms", b.mean_on().as_secs_f64() * 1e3);
    println!("off {:>9.3} ms", b.mean_off().as_secs_f64() * 1e3);
    println!("overhead {:.1}%", b.overhead() * 100.0);

    let st = measure_startup(200).unwrap();
    println!(
        "startup {:.1} us on, {:.1} us off, noise {:.1} us, within noise: {}",
        st.mean_on.as_secs_f64() * 1e6,
        st.mean_off.as_secs_f64() * 1e6,
        st.noise.as_secs_f64() * 1e6,
        st.within_noise()
    );
}
