mod args;
mod commands;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::{run, CliError, Output};

fn write_out(cli: &Cli, out: &Output) -> Result<(), CliError> {
    let opts = cli.command.opts();
    if let Some(dir) = &opts.out {
        let io = |e: std::io::Error| CliError::Usage(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let ext = match opts.format {
            args::Format::Json => "json",
            args::Format::Csv => "csv",
        };
        fs::write(dir.join(format!("{}.{ext}", cli.command.name())), &out.body).map_err(io)?;
        for (name, content) in &out.files {
            fs::write(dir.join(name), content).map_err(io)?;
        }
    }
    std::io::stdout()
        .write_all(out.body.as_bytes())
        .map_err(|e| CliError::Usage(format!("stdout: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli.command).and_then(|out| write_out(&cli, &out).map(|()| out.code));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("reskit {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
