//! Stand-in Lean REPL speaking the community REPL's JSON protocol.
//!
//! `--no-tactic-mode` hides proof-state ids, like REPL builds that cannot
//! resume from a `sorry`.

use lemmaforge::sim::{serve, Simulator};

fn main() -> std::io::Result<()> {
    let sim = if std::env::args().any(|a| a == "--no-tactic-mode") {
        Simulator::without_tactic_mode()
    } else {
        Simulator::new()
    };
    serve(sim, std::io::stdin().lock(), std::io::stdout().lock())
}
