use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    match cdiwm::cli::run(std::env::args_os()) {
        Ok(outcome) => {
            let mut err = std::io::stderr().lock();
            for w in &outcome.warnings {
                let _ = writeln!(err, "{}", serde_json::json!({ "warning": w }));
            }
            let mut out = std::io::stdout().lock();
            // a closed pipe (e.g. `| head`) is not a failure
            let _ = out.write_all(outcome.stdout.as_bytes()).and_then(|_| out.flush());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
