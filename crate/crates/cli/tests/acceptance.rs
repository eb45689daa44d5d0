//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail.
//!
//! Runs without the libtest harness so passing lines are not swallowed by
//! output capture. Criterion numbers given as arguments select a subset,
//! e.g. `cargo test -p strip-lab --test acceptance -- 3 8`. Criterion 8 is
//! the slowest (two runs of 10^6 paths, about two minutes).

use std::process::ExitCode;

use strip_lab::acceptance::{run, TITLES};

fn main() -> ExitCode {
    // Libtest flags such as --nocapture may be passed through; ignore them.
    let mut ids: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|id| (1..=TITLES.len() as u32).contains(id))
        .collect();
    if ids.is_empty() {
        ids = (1..=TITLES.len() as u32).collect();
    }
    println!("running {} acceptance criteria", ids.len());
    let mut failed = Vec::new();
    for id in ids.iter().copied() {
        let c = run(id);
        println!("{}", c.line());
        if !c.passed {
            failed.push(id);
        }
    }
    println!(
        "\nacceptance result: {} passed; {} failed {:?}",
        ids.len() - failed.len(),
        failed.len(),
        failed
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
