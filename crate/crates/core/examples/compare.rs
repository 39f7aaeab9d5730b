//! Runs the comparison protocol on a synthetic panel and prints the table.
//!
//! `cargo run --release -p stirpat-core --example compare -- [interaction|loglinear] [seed]`

use stirpat_core::protocol::{run_protocol, CellOutcome, ProtocolConfig};
use stirpat_core::synth::{synth_panel, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kind = args.get(1).map_or("interaction", String::as_str);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(42);
    let cfg = match kind {
        "loglinear" => SynthConfig::log_linear(42),
        _ => SynthConfig::default(),
    };
    let ds = synth_panel(&cfg);
    let out = run_protocol(&ds, &ProtocolConfig::new(2017, seed)).expect("protocol");
    for c in &out.report.cells {
        match &c.outcome {
            CellOutcome::Ok { mse, bias, .. } => {
                println!("{:<7} {:<17} {:<13} mse {:>10.3e} bias {:>10.3e}", c.method, c.variant, c.task, mse, bias)
            }
            CellOutcome::Failed { error } => println!("{:<7} {:<17} {:<13} FAILED {error}", c.method, c.variant, c.task),
        }
    }
}
