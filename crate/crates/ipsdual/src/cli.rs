//! Subcommand table, clap front end and resolution of defaults, run file and
//! command-line flags into a [`RunSpec`].

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Arg, ArgMatches, Command};

use crate::config::{ConfigFile, RunSpec};
use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "IPSDUAL_OUT_DIR";

/// One recognised key with its default value.
#[derive(Debug, Clone, Copy)]
pub struct Opt {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn opt(key: &'static str, default: &'static str, help: &'static str) -> Opt {
    Opt { key, default, help }
}

const COMMON: &[Opt] = &[
    opt("seed", "1", "base seed of every random stream"),
    opt("threads", "0", "worker threads (0 = all cores)"),
    opt("out", "", "report path (default: $IPSDUAL_OUT_DIR/<command>.csv)"),
];

const RATES: &[Opt] = &[
    opt("model", "dcp", "dcp or gdcp"),
    opt("alpha", "1", "left insertion rate"),
    opt("beta", "1", "right removal rate"),
    opt("gamma", "1", "left removal rate"),
    opt("delta", "1", "right insertion rate"),
    opt("lambda", "1", "infection rate per occupied neighbour"),
    opt("diffusion", "1", "stirring rate"),
    opt("mu1", "auto", "gdcp death rate per empty neighbour (auto = lambda + mu2)"),
    opt("mu2", "0", "gdcp death rate per occupied neighbour"),
];

const SIR: &[Opt] = &[
    opt("beta", "1", "infection rate across an I-S bond"),
    opt("gamma", "1", "recovery rate"),
];

pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub uses_rates: bool,
    pub uses_sir: bool,
    pub opts: &'static [Opt],
}

pub const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "duality-check",
        about: "Generator-level duality residual over random parameter draws",
        uses_rates: false,
        uses_sir: false,
        opts: &[
            opt("model", "dcp", "dcp, gdcp or sir"),
            opt("n", "3", "lattice size, or largest cluster length for sir"),
            opt("draws", "50", "random parameter points"),
            opt("cap", "8", "sink-count cap of the dual space"),
            opt("tol", "1e-12", "residual tolerance"),
        ],
    },
    Subcommand {
        name: "stationary",
        about: "Exact stationary law, with closed forms for N <= 2",
        uses_rates: true,
        uses_sir: false,
        opts: &[opt("n", "2", "lattice size"), opt("tol", "1e-12", "closed-form tolerance")],
    },
    Subcommand {
        name: "absorption",
        about: "Law of the sink counts of the absorbing dual",
        uses_rates: true,
        uses_sir: false,
        opts: &[
            opt("n", "2", "lattice size"),
            opt("init", "1", "initial dual configuration: occupied sites, 0/1 string, empty or full"),
            opt("k-max", "6", "largest sink count tabulated"),
            opt("tol", "1e-10", "closed-form tolerance"),
        ],
    },
    Subcommand {
        name: "correlate",
        about: "Correlation functions by direct solve, duality series and simulation",
        uses_rates: true,
        uses_sir: false,
        opts: &[
            opt("n", "3", "lattice size"),
            opt("sites", "1,2", "site tuple"),
            opt("series-tol", "1e-10", "tail tolerance of the duality series"),
            opt("max-cap", "32", "largest sink cap reached by doubling"),
            opt("tol", "1e-8", "direct vs duality tolerance"),
            opt("replicas", "2000", "simulation replicas (0 disables)"),
            opt("t-burn", "auto", "burn-in time (auto = 10 / spectral gap)"),
        ],
    },
    Subcommand {
        name: "gdcp-profile",
        about: "Closed-form one-point profile of the annihilating-dual GDCP",
        uses_rates: true,
        uses_sir: false,
        opts: &[
            opt("n", "6", "lattice size"),
            opt("tol", "1e-10", "closed form vs absorption tolerance"),
            opt("replicas", "0", "simulation replicas (0 disables)"),
            opt("t-burn", "auto", "burn-in time (auto = 10 / spectral gap)"),
            opt("avg-window", "auto", "time-average window (auto = burn-in)"),
        ],
    },
    Subcommand {
        name: "gdcp-evolve",
        about: "One-point evolution: ODE solution vs exact transient",
        uses_rates: true,
        uses_sir: false,
        opts: &[
            opt("n", "4", "lattice size"),
            opt("times", "0.1,1,5", "output times"),
            opt("init", "full", "initial configuration or `stationary`"),
            opt("tol", "1e-8", "ODE vs transient tolerance"),
            opt("stationary-tol", "1e-12", "drift tolerance from stationary data"),
            opt("replicas", "0", "simulation replicas (0 disables)"),
        ],
    },
    Subcommand {
        name: "fast-stirring",
        about: "Birth-death chain of the fast-stirring limit vs exact solves",
        uses_rates: true,
        uses_sir: false,
        opts: &[
            opt("n", "2", "lattice size"),
            opt("convention", "both", "paper, corrected or both"),
            opt("big-d", "1e8", "stirring rate of the exact comparison solve"),
            opt("tol", "1e-12", "corrected chain vs limit tolerance"),
            opt("big-d-tol", "1e-6", "exact solve vs limit tolerance"),
        ],
    },
    Subcommand {
        name: "sir-cluster",
        about: "SIR cluster functions by series, dual walk and simulation",
        uses_rates: false,
        uses_sir: true,
        opts: &[
            opt("fixture", "single-s", "single-s, rsi or custom"),
            opt("window", "IIISIII", "window states for custom runs"),
            opt("lo", "-3", "leftmost window site"),
            opt("outside", "R", "state outside the window"),
            opt("kind", "g", "g, j or h"),
            opt("r", "0", "cluster start"),
            opt("n", "1", "cluster length"),
            opt("t", "1", "time"),
            opt("series-tol", "1e-12", "series and quadrature tolerance"),
            opt("replicas", "10000", "simulation replicas (0 disables)"),
        ],
    },
    Subcommand {
        name: "simulate",
        about: "Replica estimates from Gillespie trajectories",
        uses_rates: true,
        uses_sir: false,
        opts: &[
            opt("model", "dcp", "dcp, gdcp, dcp-dual, gdcp-dual or sir"),
            opt("n", "4", "lattice size"),
            opt("init", "full", "initial configuration (SIR: window states)"),
            opt("lo", "0", "SIR leftmost window site"),
            opt("outside", "R", "SIR state outside the window"),
            opt("t-end", "1", "final time"),
            opt("replicas", "1000", "replicas"),
            opt("max-steps", "10000000", "event budget of dual runs"),
            opt("trajectory", "false", "write replica 0's trajectory"),
        ],
    },
];

fn subcommand(name: &str) -> Option<&'static Subcommand> {
    SUBCOMMANDS.iter().find(|s| s.name == name)
}

/// Defaults of `name`; subcommand entries override shared ones.
pub fn defaults(name: &str) -> Option<BTreeMap<String, String>> {
    let sc = subcommand(name)?;
    let mut m = BTreeMap::new();
    let mut put = |opts: &[Opt]| {
        for o in opts {
            m.insert(o.key.to_string(), o.default.to_string());
        }
    };
    put(COMMON);
    if sc.uses_rates {
        put(RATES);
    }
    if sc.uses_sir {
        put(SIR);
    }
    put(sc.opts);
    Some(m)
}

pub fn command() -> Command {
    let mut cmd = Command::new("ipsdual")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Exact, series and Monte-Carlo routes for open contact processes and lattice SIR")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sc in SUBCOMMANDS {
        let mut sub = Command::new(sc.name).about(sc.about).arg(
            Arg::new("config").long("config").value_name("FILE").help("run file or earlier report to take values from"),
        );
        let keys = defaults(sc.name).expect("known subcommand");
        let help_of = |k: &str| {
            sc.opts
                .iter()
                .chain(if sc.uses_sir { SIR } else { &[] })
                .chain(if sc.uses_rates { RATES } else { &[] })
                .chain(COMMON)
                .find(|o| o.key == k)
                .map(|o| o.help)
                .unwrap_or("")
        };
        for (k, d) in &keys {
            sub = sub.arg(
                Arg::new(k.clone())
                    .long(k.clone())
                    .value_name("VALUE")
                    .allow_negative_numbers(true)
                    .help(format!("{} [default: {d}]", help_of(k))),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Defaults, then the run file, then explicit flags.
pub fn resolve(matches: &ArgMatches) -> Result<RunSpec, CliError> {
    let (name, sub) = matches.subcommand().ok_or_else(|| CliError::Spec("no subcommand".into()))?;
    let mut values = defaults(name).ok_or_else(|| CliError::Spec(format!("unknown subcommand {name}")))?;
    if let Some(path) = sub.get_one::<String>("config") {
        let text = std::fs::read_to_string(path)?;
        for (k, v) in ConfigFile::parse(&text)?.for_command(name) {
            if !values.contains_key(&k) {
                return Err(CliError::Spec(format!("`{k}` is not a key of {name}")));
            }
            values.insert(k, v);
        }
    }
    let keys: Vec<String> = values.keys().cloned().collect();
    for k in keys {
        if let Some(v) = sub.get_one::<String>(&k) {
            values.insert(k, v.clone());
        }
    }
    Ok(RunSpec::new(name, values))
}

/// Report path: `out` when set, else `<command>.csv` in the output directory.
pub fn output_path(spec: &RunSpec) -> PathBuf {
    match spec.values.get("out").filter(|s| !s.is_empty()) {
        Some(p) => PathBuf::from(p),
        None => {
            let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            dir.join(format!("{}.csv", spec.command))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_defaults() {
        let m = command().try_get_matches_from(["ipsdual", "duality-check", "--model", "gdcp", "--n", "4"]).unwrap();
        let spec = resolve(&m).unwrap();
        assert_eq!(spec.command, "duality-check");
        assert_eq!(spec.str("model").unwrap(), "gdcp");
        assert_eq!(spec.get::<usize>("n").unwrap(), 4);
        assert_eq!(spec.get::<u64>("draws").unwrap(), 50);
    }

    #[test]
    fn every_subcommand_parses() {
        for sc in SUBCOMMANDS {
            let m = command().try_get_matches_from(["ipsdual", sc.name]).unwrap();
            assert_eq!(resolve(&m).unwrap().command, sc.name);
        }
    }

    #[test]
    fn negative_values_accepted() {
        let m = command().try_get_matches_from(["ipsdual", "sir-cluster", "--lo", "-5"]).unwrap();
        assert_eq!(resolve(&m).unwrap().get::<i64>("lo").unwrap(), -5);
    }
}
