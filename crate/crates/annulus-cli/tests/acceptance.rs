//! Acceptance criteria 1–9: one PASS/FAIL line per criterion (and per
//! expansion variant where two are checked), with pinned tolerances.

use annulus::validation::{run_suite, SuiteConfig};

#[test]
fn acceptance() {
    let cfg = SuiteConfig::standard().expect("Gram data");
    let outcomes = run_suite(&cfg);
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| format!("{} {}", o.id, o.variant)).collect();
    println!("{} of {} lines passed", outcomes.len() - failed.len(), outcomes.len());
    for id in 1..=9 {
        assert!(outcomes.iter().any(|o| o.id == id), "criterion {id} missing");
    }
    assert!(failed.is_empty(), "failing criteria: {}", failed.join(", "));
}
