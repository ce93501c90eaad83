//! `cori`: segment, romanize, augment, build datasets, and run toy experiments.
//!
//! Every run prints one JSON line to stdout with the command, its fully
//! resolved configuration and the result. Logs go to stderr as JSON lines.

mod args;
mod commands;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::{Cli, Command, ConfigError};
use commands::SchemaError;

const EXIT_FAILURE: u8 = 1;
const EXIT_MISSING_FILE: u8 = 3;
const EXIT_SCHEMA: u8 = 4;

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, rec| {
            let line = json!({
                "level": rec.level().as_str(),
                "target": rec.target(),
                "message": rec.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .init();
}

fn is_schema(e: &(dyn std::error::Error + 'static)) -> bool {
    use cori_core::augment::AugmentError;
    use cori_core::corpus::CorpusError;
    use cori_core::metrics::MetricError;
    use cori_core::pipeline::{BuildError, MtError};
    use cori_core::romanize::tables::TableError;
    use cori_core::segment::SegmentError;

    e.is::<SchemaError>()
        || e.is::<ConfigError>()
        || e.downcast_ref::<CorpusError>().is_some_and(|e| !matches!(e, CorpusError::Io { .. }))
        || e.downcast_ref::<BuildError>().is_some_and(|e| matches!(e, BuildError::Raw { .. }))
        || e.downcast_ref::<MetricError>().is_some_and(|e| !matches!(e, MetricError::Io { .. }))
        || e.downcast_ref::<SegmentError>().is_some_and(|e| !matches!(e, SegmentError::Io { .. }))
        || e.downcast_ref::<AugmentError>().is_some_and(|e| matches!(e, AugmentError::Malformed { .. }))
        || e.downcast_ref::<TableError>().is_some_and(|e| !matches!(e, TableError::Io { .. }))
        || e.downcast_ref::<MtError>().is_some_and(|e| matches!(e, MtError::Fixture { .. }))
}

fn categorize(err: &anyhow::Error) -> (u8, &'static str) {
    for e in err.chain() {
        if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::NotFound) {
            return (EXIT_MISSING_FILE, "missing-file");
        }
        if is_schema(e) {
            return (EXIT_SCHEMA, "schema");
        }
    }
    (EXIT_FAILURE, "error")
}

fn run(cmd: &Command) -> anyhow::Result<serde_json::Value> {
    match cmd {
        Command::Segment(a) => commands::segment(a),
        Command::Romanize(a) => commands::romanize(a),
        Command::Augment(a) => commands::augment(a),
        Command::Build(a) => commands::build(a),
        Command::TrainToy(a) => commands::train_toy_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::Cka(a) => commands::cka_cmd(a),
    }
}

fn fail(command: &str, err: &anyhow::Error) -> ExitCode {
    let (code, category) = categorize(err);
    let line = json!({
        "command": command,
        "status": "error",
        "category": category,
        "message": format!("{err:#}"),
    });
    println!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    init_logging();
    let argv = match args::expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail("cori", &e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let name = cli.command.name();
    match run(&cli.command) {
        Ok(result) => {
            let line = json!({
                "command": name,
                "status": "ok",
                "config": cli.command,
                "result": result,
            });
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(name, &e),
    }
}
