//! Command-line front-end; all logic lives in the library.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use exmodem::modem::Scheme;
use exmodem::Constellation;
use exmodem_cli::config::parse_grid;
use exmodem_cli::{
    cmd_baseline_ber, cmd_cluster_demod, cmd_eval_scheme, cmd_sweep, cmd_train, CliError,
    ExperimentConfig, Mode,
};

#[derive(Parser)]
#[command(name = "exmodem", version, about = "Modulation-learning experiment harness")]
struct Cli {
    /// Flat `key = value` config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Eb/N0 grid in dB, comma-separated (overrides the config).
    #[arg(long, global = true)]
    ebn0: Option<String>,

    /// Symbols per evaluation point (overrides the config).
    #[arg(long, global = true)]
    symbols: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte-Carlo BER curve of a standard scheme, coherent demodulation.
    BaselineBer {
        /// qpsk, 8psk or 16qam.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Blind clustering demodulation vs. the coherent baseline.
    ClusterDemod {
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Train transmitters; `mode` in the config picks single or echo.
    Train {
        /// single or echo (overrides the config).
        #[arg(long)]
        mode: Option<String>,
    },
    /// Evaluate a constellation dump over the Eb/N0 grid.
    EvalScheme {
        /// Constellation dump file (`word,i,q` rows).
        #[arg(long)]
        dump: PathBuf,
    },
    /// Train+eval ensembles across values of one config key.
    Sweep {
        /// Config key to vary.
        #[arg(long)]
        param: String,
        /// Comma-separated values for the key.
        #[arg(long)]
        values: String,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_text(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(grid) = &cli.ebn0 {
        cfg.ebn0_grid = parse_grid(grid)?;
    }
    if let Some(symbols) = cli.symbols {
        cfg.eval_symbols = symbols;
    }
    Ok(cfg)
}

fn write_csv(dir: &std::path::Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    fs::create_dir_all(&cli.out)?;
    match &cli.cmd {
        Cmd::BaselineBer { scheme } => {
            let scheme = match scheme {
                Some(s) => Scheme::parse(s)?,
                None => cfg.scheme,
            };
            // 10^6 symbols per point unless asked otherwise; the config's
            // eval_symbols default targets learned-scheme evaluation.
            let symbols = cli.symbols.unwrap_or(1_000_000);
            let curve = cmd_baseline_ber(scheme, &cfg.ebn0_grid, symbols, cfg.seeds, cfg.seed)?;
            write_csv(&cli.out, &format!("baseline-{}.csv", scheme.name()), &curve.to_csv_string())
        }
        Cmd::ClusterDemod { scheme } => {
            if let Some(s) = scheme {
                cfg.scheme = Scheme::parse(s)?;
            }
            let out = cmd_cluster_demod(&cfg, &cfg.ebn0_grid)?;
            write_csv(&cli.out, "cluster-ber.csv", &out.learned.to_csv_string())?;
            write_csv(&cli.out, "cluster-baseline.csv", &out.baseline.to_csv_string())?;
            write_csv(&cli.out, "clusters.csv", &out.clusters_csv())
        }
        Cmd::Train { mode } => {
            if let Some(m) = mode {
                cfg.mode = Mode::parse(m)?;
            }
            let run = cmd_train(&cfg, &cli.out)?;
            println!("run directory: {}", run.dir.display());
            Ok(())
        }
        Cmd::EvalScheme { dump } => {
            let c = Constellation::from_dump_str(&fs::read_to_string(dump)?)?;
            let curve = cmd_eval_scheme(
                &c,
                &cfg.ebn0_grid,
                cfg.eval_symbols,
                cfg.recon_preamble,
                cfg.seed,
            )?;
            write_csv(&cli.out, "eval.csv", &curve.to_csv_string())
        }
        Cmd::Sweep { param, values } => {
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            if values.is_empty() {
                return Err(CliError::Usage("sweep needs at least one value".into()));
            }
            let out = cmd_sweep(param, &values, &cfg)?;
            write_csv(&cli.out, "sweep.csv", &out.sweep_csv())?;
            write_csv(&cli.out, "failures.csv", &out.failures_csv())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
