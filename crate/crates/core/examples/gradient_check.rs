//! Runs every finite-difference suite and prints the table.
//!
//!     cargo run --release --example gradient_check

fn main() -> joint_demosaick::Result<()> {
    let report = joint_demosaick::gradcheck::run_all(0)?;
    println!("{report}");
    std::process::exit(if report.passed() { 0 } else { 1 });
}
