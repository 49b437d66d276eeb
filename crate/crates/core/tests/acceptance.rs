//! Runs every acceptance criterion in sequence, one line per criterion.
//!
//! Sequential on purpose: several criteria carry wall-clock limits.

use freelat::acceptance;
use freelat::stable::LogGamma;

fn main() {
    let results = acceptance::run(&LogGamma::default(), None);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
