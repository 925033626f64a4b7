//! Runs every acceptance criterion at its stated tolerance and budget and
//! prints one pass/fail line per criterion. Runs without the libtest harness
//! so the lines are never captured.

use billiard_lab::suites::{run_all, SUITES};

fn main() {
    let outcomes = run_all();
    assert_eq!(outcomes.len(), SUITES.len());
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("acceptance: {}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
