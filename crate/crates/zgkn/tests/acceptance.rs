//! One line per acceptance criterion. Exits nonzero only if the harness
//! itself cannot run; failing criteria are reported, not hidden.

use zgkn::verify::{run_all, VerifyOptions};

fn main() {
    let quick = std::env::args().any(|a| a == "--quick");
    let opts = VerifyOptions { quick, ..VerifyOptions::default() };
    let results = run_all(&opts);
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if results.len() != 10 {
        eprintln!("expected 10 criteria, got {}", results.len());
        std::process::exit(1);
    }
}
