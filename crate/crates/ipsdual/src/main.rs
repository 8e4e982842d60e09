use std::process::ExitCode;

use ipsdual::report::Status;
use ipsdual::{cli, commands, CliError};

fn main() -> ExitCode {
    let matches = cli::command().get_matches();
    let command = matches.subcommand_name().unwrap_or("").to_string();
    let fail = |e: CliError| {
        eprintln!("{}", e.record(&command));
        ExitCode::from(2)
    };
    let spec = match cli::resolve(&matches) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let report = match commands::run(&spec) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let path = cli::output_path(&report.spec);
    let (table, verdicts) = match report.write(&path) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    for v in &report.verdicts {
        println!("{}", v.line(&command));
    }
    println!("wrote {} and {}", table.display(), verdicts.display());
    if report.passed() {
        return ExitCode::SUCCESS;
    }
    let failed: Vec<&str> =
        report.verdicts.iter().filter(|v| v.status == Status::Fail).map(|v| v.comparison.as_str()).collect();
    eprintln!("{}", serde_json::json!({ "error": "tolerance", "command": command, "failed": failed }));
    ExitCode::from(1)
}
