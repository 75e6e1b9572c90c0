//! Acceptance battery. Runs without the libtest harness so every criterion
//! line is printed on each `cargo test`.

use levelprox::selftest::{run_criterion, CRITERIA};
use levelprox::Oracle;

fn main() {
    let oracle = Oracle::default();
    let mut failed = Vec::new();
    for id in 1..=CRITERIA.len() {
        let r = run_criterion(id, &oracle);
        println!(
            "criterion {:>2} {:<26} {}  {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        if !r.passed {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
