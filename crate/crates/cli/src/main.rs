use std::process::ExitCode;

use clap::Parser;
use oblique_cli::{run, Args, RunConfig};

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = RunConfig::try_from(args).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(o) => {
            print!("{}", o.text);
            for c in &o.checks {
                println!("{} {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            println!("artifacts in {}", o.out.display());
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(2)
        }
    }
}
