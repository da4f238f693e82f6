use std::io::{self, Write};
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use qmce_cli::args::{Cli, Command};
use qmce_cli::{run, CliError};

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Dos(_) => "dos",
        Command::Thermo(_) => "thermo",
        Command::Canonical(_) => "canonical",
        Command::McVerify(_) => "mc-verify",
        Command::Grand(_) => "grand",
        Command::Equilibrate(_) => "equilibrate",
        Command::Ising(_) => "ising",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    match run(&cli, &mut out, &mut err) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Usage(_) = e {
                let mut root = Cli::command();
                root.build();
                if let Some(sub) = root.find_subcommand_mut(subcommand_name(&cli.command)) {
                    let _ = writeln!(err, "\n{}", sub.render_usage());
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
