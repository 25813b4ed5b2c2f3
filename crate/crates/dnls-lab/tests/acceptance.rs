//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs the reduced (fast) sample budgets by default so the workspace test
//! run stays interactive; set ACCEPTANCE_FULL=1 for the full budgets.

use dnls_lab::acceptance::run_all;

#[test]
fn acceptance_criteria() {
    let fast = std::env::var("ACCEPTANCE_FULL").is_err();
    let results = run_all(fast);
    let mut all = true;
    println!(
        "acceptance suite ({} budgets)",
        if fast { "fast" } else { "full" }
    );
    for r in &results {
        println!(
            "criterion {:>2} [{}] {} ({:.1} s)",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds
        );
        for line in r.details.lines() {
            println!("    {line}");
        }
        all &= r.passed;
    }
    assert!(all, "some acceptance criteria failed");
}
