use std::process::ExitCode;

use risemf_cli::{execute, parse_args, CliError};

fn main() -> ExitCode {
    let result = parse_args(std::env::args_os()).and_then(|spec| {
        let files = execute(&spec, &mut std::io::stderr())?;
        for f in files {
            println!("{}", f.display());
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { 1 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
