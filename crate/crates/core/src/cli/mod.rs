//! Command-line front end.
//!
//! Configuration is resolved as defaults, then the config file (`--config`,
//! else `$CDIWM_CONFIG`), then per-key flags such as `--osa.resolution_nm`.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

pub use commands::{Anchor, SweepSpec, SweepVar};
pub use config::{RunConfig, CONFIG_ENV, KEYS};
pub use output::{Format, OutputTable};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Compute(crate::Error),
    #[error("{0}")]
    Io(String),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidParameter { .. } | crate::Error::SpanMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Compute(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Compute(crate::Error::NoEstimate(_)) => 4,
            CliError::Compute(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Compute(crate::Error::NoEstimate(_)) => "estimation",
            CliError::Compute(_) => "numerical",
        }
    }

    /// One-line JSON diagnostic.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

/// What a successful invocation produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Text for stdout (empty when everything went to files).
    pub stdout: String,
    pub warnings: Vec<String>,
}

pub fn command() -> Command {
    let mut cmd = Command::new("cdiwm")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Spectra, shift rates, resolution limits and spectrometer Monte Carlo for CDIWM and SWM")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .value_parser(value_parser!(PathBuf))
                .global(true)
                .help(format!("config file (default: ${CONFIG_ENV})")),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("PATH")
                .value_parser(value_parser!(PathBuf))
                .global(true)
                .help("output file; a directory for `figures`"),
        )
        .arg(
            Arg::new("format")
                .long("format")
                .value_parser(["csv", "json"])
                .default_value("csv")
                .global(true),
        );
    for (key, help) in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .global(true)
                .help_heading("Config overrides")
                .help(*help),
        );
    }
    cmd.subcommand(Command::new("spectrum").about("postselected spectrum, raw and as seen by the spectrometer"))
        .subcommand(Command::new("timedomain").about("postselected pulse envelope via FFT"))
        .subcommand(
            Command::new("sweep")
                .about("shift, peaks, rate, probability and resolution limits over tau or epsilon")
                .arg(
                    Arg::new("var")
                        .long("var")
                        .value_parser(["tau", "epsilon"])
                        .default_value("tau"),
                )
                .arg(
                    Arg::new("from")
                        .long("from")
                        .value_parser(value_parser!(f64))
                        .allow_negative_numbers(true)
                        .help("start (as for tau, rad for epsilon)"),
                )
                .arg(
                    Arg::new("to")
                        .long("to")
                        .value_parser(value_parser!(f64))
                        .allow_negative_numbers(true)
                        .help("end (as for tau, rad for epsilon)"),
                )
                .arg(
                    Arg::new("n")
                        .long("n")
                        .value_parser(value_parser!(usize))
                        .default_value("101"),
                )
                .arg(
                    Arg::new("at")
                        .long("at")
                        .value_parser(["working", "zero", "fixed"])
                        .default_value("working")
                        .help("delay for epsilon sweeps: epsilon/omega0, 0, or tau_as"),
                ),
        )
        .subcommand(
            Command::new("resolve").about("detection thresholds and Monte-Carlo detection curves for both schemes"),
        )
        .subcommand(
            Command::new("figures")
                .about("figure-data presets")
                .arg(Arg::new("name").required(true).value_parser(commands::FIGURES)),
        )
}

fn resolve_config(m: &ArgMatches) -> Result<RunConfig, CliError> {
    let path = match m.get_one::<PathBuf>("config") {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from),
    };
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep_spec(m: &ArgMatches) -> SweepSpec {
    let var = match m.get_one::<String>("var").map(String::as_str) {
        Some("epsilon") => SweepVar::Epsilon,
        _ => SweepVar::Tau,
    };
    let (from, to) = match var {
        SweepVar::Tau => (commands::FIG_TAU_WINDOW.0, commands::FIG_TAU_WINDOW.1),
        SweepVar::Epsilon => (commands::FIG_EPSILON_WINDOW.0, commands::FIG_EPSILON_WINDOW.1),
    };
    let at = match m.get_one::<String>("at").map(String::as_str) {
        Some("zero") => Anchor::Zero,
        Some("fixed") => Anchor::Fixed,
        _ => Anchor::Working,
    };
    SweepSpec {
        var,
        from: m.get_one::<f64>("from").copied().unwrap_or(from),
        to: m.get_one::<f64>("to").copied().unwrap_or(to),
        n: *m.get_one::<usize>("n").expect("defaulted"),
        at,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> Result<Outcome, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => Ok(Outcome {
                    stdout: e.render().to_string(),
                    warnings: Vec::new(),
                }),
                _ => Err(CliError::Config(e.render().to_string().trim_end().to_string())),
            };
        }
    };
    let (name, sub) = m.subcommand().expect("subcommand required");
    let cfg = resolve_config(sub)?;
    let format = match sub.get_one::<String>("format").map(String::as_str) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    };
    let out = sub.get_one::<PathBuf>("out").map(PathBuf::as_path);

    let tables = match name {
        "spectrum" => vec![commands::spectrum(&cfg)?],
        "timedomain" => vec![commands::timedomain(&cfg)?],
        "sweep" => vec![commands::sweep(&cfg, &sweep_spec(sub))?],
        "resolve" => vec![commands::resolve(&cfg)?],
        "figures" => commands::figure(sub.get_one::<String>("name").expect("required"), &cfg)?,
        other => return Err(CliError::Config(format!("unknown subcommand `{other}`"))),
    };
    let warnings = tables
        .iter()
        .flat_map(|t| match t.metadata.get("warnings") {
            Some(serde_json::Value::Array(w)) => w.iter().filter_map(|v| v.as_str().map(String::from)).collect(),
            _ => Vec::new(),
        })
        .collect();
    let stdout = if name == "figures" {
        output::emit_tables(&tables, format, out)?
    } else {
        output::emit_table(&tables[0], format, out)?
    };
    Ok(Outcome { stdout, warnings })
}
