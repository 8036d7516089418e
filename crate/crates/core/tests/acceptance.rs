//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p pdhs-core --test acceptance -- 3 5` runs a subset.

use std::process::ExitCode;
use std::time::Instant;

use pdhs_core::experiment::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let chosen: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids: Vec<u8> =
        CRITERIA.iter().map(|(id, _)| *id).filter(|id| chosen.is_empty() || chosen.contains(id)).collect();
    let mut failed = 0;
    for id in ids {
        let start = Instant::now();
        match run_criterion(id) {
            Ok(report) => {
                println!("{report}  ({:.1} s)", start.elapsed().as_secs_f64());
                if !report.passed {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("C{id:<2} FAIL  error: {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {failed} failing");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
