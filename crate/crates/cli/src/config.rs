//! Flat `key = value` experiment configuration with documented defaults.

use exmodem::modem::Scheme;
use exmodem::{Error, Result, TrainConfig, TxConfig};

/// Which training loop a `train` run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Single,
    Echo,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Mode::Single),
            "echo" => Ok(Mode::Echo),
            other => Err(Error::invalid(format!(
                "mode must be 'single' or 'echo', got '{other}'"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Echo => "echo",
        }
    }
}

/// Every tunable of the harness, with defaults matching the reference setup.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Training loop: `echo` (two agents) or `single` (fixed receiver).
    pub mode: Mode,
    /// Standard scheme used for baselines and as the single-mode receiver.
    pub scheme: Scheme,
    pub preamble_length: usize,
    pub bits_per_symbol: usize,
    pub n0: f64,
    pub iterations: usize,
    pub seed: u64,
    pub step_size: f64,
    pub lambda_p: f64,
    pub initial_log_sigma: f64,
    pub restrict_energy: bool,
    pub hidden_units: usize,
    /// Neighbor count of the kNN receivers in echo training.
    pub knn_k: usize,
    /// Preamble length for the clustering demodulator.
    pub cluster_preamble_length: usize,
    /// Payload symbols demodulated per (noise point, seed).
    pub payload_length: usize,
    /// Largest cluster count the jump selector considers.
    pub max_clusters: usize,
    pub kmeans_iters: usize,
    /// Payload symbols per BER evaluation point.
    pub eval_symbols: usize,
    /// Pilot symbols used to reconstruct a scheme at the receiver; 0 means
    /// the receiver knows the constellation exactly.
    pub recon_preamble: usize,
    /// Number of seeds in ensembles (seeds are `seed..seed + seeds`).
    pub seeds: usize,
    /// Eb/N0 evaluation grid in dB.
    pub ebn0_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Echo,
            scheme: Scheme::Qam16,
            preamble_length: 512,
            bits_per_symbol: 4,
            n0: 0.01,
            iterations: 2000,
            seed: 0,
            step_size: 0.00245,
            lambda_p: 0.09,
            initial_log_sigma: -1.0,
            restrict_energy: false,
            hidden_units: 40,
            knn_k: 3,
            cluster_preamble_length: 1000,
            payload_length: 10_000,
            max_clusters: 20,
            kmeans_iters: 50,
            eval_symbols: 10_000_000,
            recon_preamble: 10_000,
            seeds: 10,
            ebn0_grid: (0..=16).map(f64::from).collect(),
        }
    }
}

/// Every key accepted in config files, for unknown-key suggestions.
pub const CONFIG_KEYS: &[&str] = &[
    "mode",
    "scheme",
    "preamble_length",
    "bits_per_symbol",
    "n0",
    "iterations",
    "seed",
    "step_size",
    "lambda_p",
    "initial_log_sigma",
    "restrict_energy",
    "hidden_units",
    "knn_k",
    "cluster_preamble_length",
    "payload_length",
    "max_clusters",
    "kmeans_iters",
    "eval_symbols",
    "recon_preamble",
    "seeds",
    "ebn0_grid",
];

fn edit_distance(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

/// The known key closest to `key` in edit distance.
pub fn nearest_key(key: &str) -> &'static str {
    CONFIG_KEYS
        .iter()
        .min_by_key(|k| edit_distance(key, k))
        .unwrap()
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("key '{key}': cannot parse value '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::invalid(format!(
            "key '{key}': expected 'true' or 'false', got '{value}'"
        ))),
    }
}

/// Parses a comma-separated list of dB values.
pub fn parse_grid(value: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = value
        .split(',')
        .map(|v| parse_num("ebn0_grid", v.trim()))
        .collect::<Result<_>>()?;
    if grid.is_empty() {
        return Err(Error::invalid("ebn0_grid must not be empty"));
    }
    Ok(grid)
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment. Unknown keys report the nearest
    /// valid key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => self.mode = Mode::parse(value)?,
            "scheme" => self.scheme = Scheme::parse(value)?,
            "preamble_length" => self.preamble_length = parse_num(key, value)?,
            "bits_per_symbol" => self.bits_per_symbol = parse_num(key, value)?,
            "n0" => self.n0 = parse_num(key, value)?,
            "iterations" => self.iterations = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "step_size" => self.step_size = parse_num(key, value)?,
            "lambda_p" => self.lambda_p = parse_num(key, value)?,
            "initial_log_sigma" => self.initial_log_sigma = parse_num(key, value)?,
            "restrict_energy" => self.restrict_energy = parse_bool(key, value)?,
            "hidden_units" => self.hidden_units = parse_num(key, value)?,
            "knn_k" => self.knn_k = parse_num(key, value)?,
            "cluster_preamble_length" => self.cluster_preamble_length = parse_num(key, value)?,
            "payload_length" => self.payload_length = parse_num(key, value)?,
            "max_clusters" => self.max_clusters = parse_num(key, value)?,
            "kmeans_iters" => self.kmeans_iters = parse_num(key, value)?,
            "eval_symbols" => self.eval_symbols = parse_num(key, value)?,
            "recon_preamble" => self.recon_preamble = parse_num(key, value)?,
            "seeds" => self.seeds = parse_num(key, value)?,
            "ebn0_grid" => self.ebn0_grid = parse_grid(value)?,
            _ => {
                return Err(Error::invalid(format!(
                    "unknown config key '{key}' (nearest valid key: '{}')",
                    nearest_key(key)
                )))
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` file with `#` comments on top of defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: idx + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    /// Full listing of every key with its effective value; parsing this text
    /// back reproduces the config exactly.
    pub fn resolved_text(&self) -> String {
        let grid = self
            .ebn0_grid
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "mode = {}\nscheme = {}\npreamble_length = {}\nbits_per_symbol = {}\n\
             n0 = {}\niterations = {}\nseed = {}\nstep_size = {}\nlambda_p = {}\n\
             initial_log_sigma = {}\nrestrict_energy = {}\nhidden_units = {}\n\
             knn_k = {}\ncluster_preamble_length = {}\npayload_length = {}\n\
             max_clusters = {}\nkmeans_iters = {}\neval_symbols = {}\n\
             recon_preamble = {}\nseeds = {}\nebn0_grid = {}\n",
            self.mode.name(),
            self.scheme.name(),
            self.preamble_length,
            self.bits_per_symbol,
            self.n0,
            self.iterations,
            self.seed,
            self.step_size,
            self.lambda_p,
            self.initial_log_sigma,
            self.restrict_energy,
            self.hidden_units,
            self.knn_k,
            self.cluster_preamble_length,
            self.payload_length,
            self.max_clusters,
            self.kmeans_iters,
            self.eval_symbols,
            self.recon_preamble,
            self.seeds,
            grid,
        )
    }

    /// The trainer view of this config.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            preamble_length: self.preamble_length,
            bits_per_symbol: self.bits_per_symbol,
            n0: self.n0,
            iterations: self.iterations,
            seed: self.seed,
            rx_k: self.knn_k,
            tx: TxConfig {
                step_size: self.step_size,
                lambda_p: self.lambda_p,
                initial_log_sigma: self.initial_log_sigma,
                restrict_energy: self.restrict_energy,
                hidden_units: self.hidden_units,
            },
        }
    }
}
