use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use uiprune::pipeline::{known_keys, run_all, PipelineConfig, Step};
use uiprune::synthetic::{generate, write_corpus, SyntheticSpec};
use uiprune::{Error, Result};

const BOOL_KEYS: &[&str] = &["no_header_timestamp"];

fn config_args() -> Vec<Arg> {
    let mut args = vec![Arg::new("config")
        .long("config")
        .value_name("PATH")
        .global(true)
        .help("key = value configuration file")];
    for key in known_keys() {
        let id: &'static str = key;
        let long = key.replace('_', "-");
        let arg = Arg::new(id).long(long).global(true).help_heading("Configuration");
        args.push(if BOOL_KEYS.contains(&key) {
            arg.action(ArgAction::SetTrue)
        } else {
            arg.value_name(key.to_ascii_uppercase())
        });
    }
    args
}

fn cli() -> Command {
    let mut cmd = Command::new("uiprune")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Recommends UI elements for deletion from app-store reviews and release history")
        .subcommand_required(true)
        .args(config_args());
    for step in Step::ALL {
        cmd = cmd.subcommand(Command::new(step.name()).about(step.about()));
    }
    cmd.subcommand(Command::new("all").about("Run every step in order")).subcommand(
        Command::new("synth")
            .about("Write a planted-signal synthetic corpus with a matching config")
            .arg(Arg::new("dir").required(true).value_parser(clap::value_parser!(PathBuf)))
            .arg(Arg::new("apps-count").long("apps-count").default_value("20").value_parser(clap::value_parser!(usize)))
            .arg(Arg::new("releases-count").long("releases-count").default_value("4").value_parser(clap::value_parser!(usize))),
    )
}

fn flags(m: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for key in known_keys() {
        if BOOL_KEYS.contains(&key) {
            if m.get_flag(key) {
                out.insert(key.to_string(), "true".to_string());
            }
        } else if let Some(v) = m.get_one::<String>(key) {
            out.insert(key.to_string(), v.clone());
        }
    }
    out
}

fn run(m: &ArgMatches) -> Result<()> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    if name == "synth" {
        let dir: &PathBuf = sub.get_one("dir").unwrap();
        let seed = match m.get_one::<String>("seed") {
            Some(s) => s.parse().map_err(|_| Error::Config(format!("seed: cannot parse {s:?}")))?,
            None => 0,
        };
        let spec = SyntheticSpec {
            apps: *sub.get_one("apps-count").unwrap(),
            releases: *sub.get_one("releases-count").unwrap(),
            seed,
            ..SyntheticSpec::default()
        };
        let config = write_corpus(&generate(&spec)?, dir)?;
        println!("{}", config.display());
        return Ok(());
    }
    let config_file = m.get_one::<String>("config").map(PathBuf::from);
    let cfg = PipelineConfig::load(config_file.as_deref(), &flags(m))?;
    match name {
        "all" => run_all(&cfg),
        _ => Step::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .expect("subcommands mirror steps")
            .run(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
