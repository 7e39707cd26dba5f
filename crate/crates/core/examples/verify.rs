//! Runs the verification suites named on the command line (all by
//! default) and prints one line per property.

use support_lab::runner::Suite;

fn main() -> support_lab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let suites: Vec<Suite> = if args.is_empty() { Suite::ALL.to_vec() } else { args.iter().map(|a| a.parse()).collect::<Result<_, _>>()? };
    for s in suites {
        let r = s.run(0)?;
        for c in &r.checks {
            println!("{} {}: {} = {:.4e}", if c.passed { "PASS" } else { "FAIL" }, r.suite, c.name, c.value);
        }
    }
    Ok(())
}
