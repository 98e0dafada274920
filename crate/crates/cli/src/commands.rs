//! The five experiment commands as library functions; the binary only does
//! argument plumbing and file IO around these.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use sha2::{Digest, Sha256};

use exmodem::bits::BitWord;
use exmodem::channel::awgn_apply_with;
use exmodem::cluster::{jump_select_k, kmeans_lloyd, label_clusters};
use exmodem::modem::Scheme;
use exmodem::trainer::{train_echo, train_single_agent, METRICS_CSV_HEADER};
use exmodem::{derive_rng, Constellation, Error, IQSymbol, LabeledDemod, RunMetrics};

use crate::config::{ExperimentConfig, Mode};
use crate::curve::BerCurve;
use crate::CliError;

const BASELINE_LABEL: u64 = 0x6261_7365;
const CLUSTER_LABEL: u64 = 0x636c_7573;
const EVAL_LABEL: u64 = 0x6576_616c;

const CHUNK: usize = 4096;

/// Streams `symbols` random words through AWGN and an arbitrary demodulator;
/// returns (bit errors, bits).
fn mc_ber(
    c: &Constellation,
    n0: f64,
    symbols: usize,
    rng: &mut impl Rng,
    demod: impl Fn(&IQSymbol) -> BitWord,
) -> exmodem::Result<(u64, u64)> {
    let n = c.bits_per_symbol();
    let order = c.order();
    let mut errors = 0u64;
    let mut bits = 0u64;
    let mut remaining = symbols;
    while remaining > 0 {
        let take = remaining.min(CHUNK);
        let words: Vec<BitWord> = (0..take)
            .map(|_| BitWord::new(rng.random_range(0..order), n))
            .collect();
        let tx = c.modulate(&words)?;
        let rx = awgn_apply_with(&tx, n0, rng);
        for (w, y) in words.iter().zip(&rx) {
            errors += u64::from(w.hamming(&demod(y))?);
        }
        bits += (take * n) as u64;
        remaining -= take;
    }
    Ok((errors, bits))
}

/// Monte-Carlo BER curve of a standard scheme under coherent demodulation.
pub fn cmd_baseline_ber(
    scheme: Scheme,
    ebn0_grid: &[f64],
    symbols: usize,
    seeds: usize,
    base_seed: u64,
) -> exmodem::Result<BerCurve> {
    if symbols < 10_000 {
        return Err(Error::invalid("need at least 10000 symbols per point"));
    }
    if seeds == 0 {
        return Err(Error::invalid("need at least one seed"));
    }
    let c = Constellation::standard(scheme);
    let mut curve = BerCurve::default();
    for (i, &ebn0_db) in ebn0_grid.iter().enumerate() {
        let n0 = c.n0_for_ebn0_db(ebn0_db);
        let mut bers = Vec::with_capacity(seeds);
        let mut total_errors = 0u64;
        for s in 0..seeds {
            let mut rng = derive_rng(base_seed + s as u64, &[BASELINE_LABEL, i as u64]);
            let (errors, bits) = mc_ber(&c, n0, symbols, &mut rng, |y| c.demod_coherent(y))?;
            total_errors += errors;
            bers.push(errors as f64 / bits as f64);
        }
        curve.push_samples(ebn0_db, &bers, total_errors);
    }
    Ok(curve)
}

/// One (noise point, seed) outcome of the clustering demodulator.
#[derive(Clone, Copy, Debug)]
pub struct ClusterRow {
    pub ebn0_db: f64,
    pub seed: u64,
    pub k_selected: usize,
    pub ber: f64,
    pub baseline_ber: f64,
}

/// Aggregated clustering-demodulator results plus the coherent baseline on
/// the identical received symbols.
#[derive(Clone, Debug, Default)]
pub struct ClusterDemodOutput {
    pub learned: BerCurve,
    pub baseline: BerCurve,
    pub rows: Vec<ClusterRow>,
}

pub const CLUSTERS_CSV_HEADER: &str = "ebn0_db,seed,k_selected,ber,baseline_ber";

impl ClusterDemodOutput {
    pub fn clusters_csv(&self) -> String {
        let mut out = String::from(CLUSTERS_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.ebn0_db, r.seed, r.k_selected, r.ber, r.baseline_ber
            );
        }
        out
    }
}

/// Blind demodulation: fits a clustering to a noisy preamble, labels it, and
/// demodulates fresh payload symbols by nearest labeled mean.
pub fn cmd_cluster_demod(
    cfg: &ExperimentConfig,
    ebn0_grid: &[f64],
) -> exmodem::Result<ClusterDemodOutput> {
    if cfg.cluster_preamble_length < 20 {
        return Err(Error::invalid("cluster preamble must have at least 20 symbols"));
    }
    let c = Constellation::standard(cfg.scheme);
    let n = c.bits_per_symbol();
    let order = c.order();
    let mut out = ClusterDemodOutput::default();
    for (i, &ebn0_db) in ebn0_grid.iter().enumerate() {
        let n0 = c.n0_for_ebn0_db(ebn0_db);
        let (mut bers, mut base_bers) = (Vec::new(), Vec::new());
        let (mut errs_total, mut base_errs_total) = (0u64, 0u64);
        for s in 0..cfg.seeds {
            let seed = cfg.seed + s as u64;
            let mut rng = derive_rng(seed, &[CLUSTER_LABEL, i as u64]);
            let pre_words: Vec<BitWord> = (0..cfg.cluster_preamble_length)
                .map(|_| BitWord::new(rng.random_range(0..order), n))
                .collect();
            let y_pre = awgn_apply_with(&c.modulate(&pre_words)?, n0, &mut rng);
            let (k, _) = jump_select_k(&y_pre, cfg.max_clusters, cfg.kmeans_iters)?;
            let clustering = kmeans_lloyd(&y_pre, k, cfg.kmeans_iters)?;
            let demod = label_clusters(&clustering, &pre_words)?;

            // The learned and coherent receivers see the same payload.
            let (mut errs, mut base_errs, mut bits) = (0u64, 0u64, 0u64);
            let mut remaining = cfg.payload_length;
            while remaining > 0 {
                let take = remaining.min(CHUNK);
                let words: Vec<BitWord> = (0..take)
                    .map(|_| BitWord::new(rng.random_range(0..order), n))
                    .collect();
                let rx = awgn_apply_with(&c.modulate(&words)?, n0, &mut rng);
                for (w, y) in words.iter().zip(&rx) {
                    errs += u64::from(w.hamming(&demod.demod(y))?);
                    base_errs += u64::from(w.hamming(&c.demod_coherent(y))?);
                }
                bits += (take * n) as u64;
                remaining -= take;
            }
            let (ber, base_ber) = (errs as f64 / bits as f64, base_errs as f64 / bits as f64);
            out.rows.push(ClusterRow {
                ebn0_db,
                seed,
                k_selected: k,
                ber,
                baseline_ber: base_ber,
            });
            bers.push(ber);
            base_bers.push(base_ber);
            errs_total += errs;
            base_errs_total += base_errs;
        }
        out.learned.push_samples(ebn0_db, &bers, errs_total);
        out.baseline.push_samples(ebn0_db, &base_bers, base_errs_total);
    }
    Ok(out)
}

/// Everything a `train` invocation produced, already persisted under `dir`.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub dir: PathBuf,
    /// One entry in single mode, two (agent 1 then agent 2) in echo mode.
    pub metrics: Vec<RunMetrics>,
}

/// Run directory name: truncated hash of the resolved config, plus the seed.
pub fn run_dir_name(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.resolved_text().as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("{hex}-s{}", cfg.seed)
}

fn combined_metrics_csv(metrics: &[RunMetrics]) -> String {
    let mut records: Vec<_> = metrics.iter().flat_map(|m| m.records.iter()).collect();
    records.sort_by_key(|r| r.iteration);
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iteration, r.agent, r.ber, r.mean_symbol_energy, r.sigma[0], r.sigma[1]
        );
    }
    out
}

/// Trains per the config and writes the run directory: resolved config,
/// metrics CSV, a constellation dump and a policy checkpoint per agent.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainRun, CliError> {
    let dir = out.join(run_dir_name(cfg));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), cfg.resolved_text())?;

    let tc = cfg.train_config();
    let (metrics, dumps, policies) = match cfg.mode {
        Mode::Single => {
            let rx = Constellation::standard(cfg.scheme);
            let (m, policy) = train_single_agent(&rx, &tc)?;
            let dump = m.final_constellation.to_dump_string();
            (vec![m], vec![dump], vec![policy.to_text()])
        }
        Mode::Echo => {
            let outcome = train_echo(&tc)?;
            let dumps = outcome
                .metrics
                .iter()
                .map(|m| m.final_constellation.to_dump_string())
                .collect();
            let policies = outcome.agents.iter().map(|a| a.tx.to_text()).collect();
            (outcome.metrics.into(), dumps, policies)
        }
    };
    fs::write(dir.join("metrics.csv"), combined_metrics_csv(&metrics))?;
    for (i, (dump, policy)) in dumps.iter().zip(&policies).enumerate() {
        fs::write(dir.join(format!("constellation-agent{}.txt", i + 1)), dump)?;
        fs::write(dir.join(format!("policy-agent{}.txt", i + 1)), policy)?;
    }
    Ok(TrainRun { dir, metrics })
}

/// Evaluates an arbitrary constellation over the Eb/N0 grid. The receiver
/// reconstructs the constellation by averaging `recon_preamble` noisy pilot
/// symbols per grid point (0 = the receiver knows the points exactly), then
/// payload symbols are demodulated by nearest reconstructed point. Eb derives
/// from the constellation's mean symbol energy.
pub fn cmd_eval_scheme(
    c: &Constellation,
    ebn0_grid: &[f64],
    eval_symbols: usize,
    recon_preamble: usize,
    seed: u64,
) -> exmodem::Result<BerCurve> {
    let order = c.order();
    if recon_preamble > 0 && recon_preamble < order {
        return Err(Error::invalid(format!(
            "recon_preamble must cover all {order} words (or be 0 for exact knowledge)"
        )));
    }
    let words: Vec<BitWord> = c.words().collect();
    let mut curve = BerCurve::default();
    for (i, &ebn0_db) in ebn0_grid.iter().enumerate() {
        let n0 = c.n0_for_ebn0_db(ebn0_db);
        let mut rng = derive_rng(seed, &[EVAL_LABEL, i as u64]);
        let means = if recon_preamble == 0 {
            c.points().to_vec()
        } else {
            // Balanced pilots: word j % order at position j, averaged per word.
            let pilot_words: Vec<BitWord> =
                (0..recon_preamble).map(|j| words[j % order]).collect();
            let noisy = awgn_apply_with(&c.modulate(&pilot_words)?, n0, &mut rng);
            let mut sums = vec![IQSymbol::new(0.0, 0.0); order];
            let mut counts = vec![0usize; order];
            for (w, y) in pilot_words.iter().zip(&noisy) {
                sums[w.index()] = IQSymbol::new(sums[w.index()].i + y.i, sums[w.index()].q + y.q);
                counts[w.index()] += 1;
            }
            sums.iter()
                .zip(&counts)
                .map(|(s, &cnt)| IQSymbol::new(s.i / cnt as f64, s.q / cnt as f64))
                .collect()
        };
        let demod = LabeledDemod {
            means,
            labels: words.clone(),
        };
        let (errors, bits) = mc_ber(c, n0, eval_symbols, &mut rng, |y| demod.demod(y))?;
        curve.push_samples(ebn0_db, &[errors as f64 / bits as f64], errors);
    }
    Ok(curve)
}

/// One aggregated sweep cell.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: String,
    pub ebn0_db: f64,
    pub ber_mean: f64,
    pub ber_std: Option<f64>,
    pub n: usize,
}

/// A run that errored out; the sweep records it and moves on.
#[derive(Clone, Debug)]
pub struct SweepFailure {
    pub value: String,
    pub seed: u64,
    pub status: String,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

pub const SWEEP_CSV_HEADER: &str = "parameter,value,ebn0_db,ber_mean,ber_std,n";
pub const FAILURES_CSV_HEADER: &str = "parameter,value,seed,status";

impl SweepOutput {
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let std = r.ber_std.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.parameter, r.value, r.ebn0_db, r.ber_mean, std, r.n
            );
        }
        out
    }

    pub fn failures_csv(&self) -> String {
        let mut out = String::from(FAILURES_CSV_HEADER);
        out.push('\n');
        for f in &self.failures {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.parameter,
                f.value,
                f.seed,
                f.status.replace([',', '\n'], ";")
            );
        }
        out
    }
}

/// Trains per the config in memory and evaluates the first agent's final
/// constellation over the grid.
fn train_and_eval(cfg: &ExperimentConfig) -> exmodem::Result<BerCurve> {
    let tc = cfg.train_config();
    let final_c = match cfg.mode {
        Mode::Single => {
            let rx = Constellation::standard(cfg.scheme);
            train_single_agent(&rx, &tc)?.0.final_constellation
        }
        Mode::Echo => {
            let [m1, _] = train_echo(&tc)?.metrics;
            m1.final_constellation
        }
    };
    cmd_eval_scheme(
        &final_c,
        &cfg.ebn0_grid,
        cfg.eval_symbols,
        cfg.recon_preamble,
        cfg.seed,
    )
}

/// Full train+eval ensemble per parameter value; means and standard
/// deviations over the seeds. Failed runs are recorded, never fatal.
pub fn cmd_sweep(
    parameter: &str,
    values: &[String],
    base: &ExperimentConfig,
) -> Result<SweepOutput, CliError> {
    let mut out = SweepOutput {
        parameter: parameter.to_string(),
        ..SweepOutput::default()
    };
    for value in values {
        let mut cfg = base.clone();
        cfg.set(parameter, value)?;
        let mut per_point: Vec<Vec<f64>> = vec![Vec::new(); cfg.ebn0_grid.len()];
        for s in 0..base.seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = base.seed + s as u64;
            match train_and_eval(&run_cfg) {
                Ok(curve) => {
                    for (bers, p) in per_point.iter_mut().zip(&curve.points) {
                        bers.push(p.ber);
                    }
                }
                Err(e) => out.failures.push(SweepFailure {
                    value: value.clone(),
                    seed: run_cfg.seed,
                    status: e.to_string(),
                }),
            }
        }
        for (bers, &ebn0_db) in per_point.iter().zip(&cfg.ebn0_grid) {
            if bers.is_empty() {
                continue;
            }
            let mut agg = BerCurve::default();
            agg.push_samples(ebn0_db, bers, 1);
            let p = agg.points[0];
            out.rows.push(SweepRow {
                value: value.clone(),
                ebn0_db,
                ber_mean: p.ber,
                ber_std: p.ber_std,
                n: p.n,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use exmodem::theoretical_ber;

    #[test]
    fn baseline_matches_theory_at_low_snr() {
        let curve =
            cmd_baseline_ber(Scheme::Qpsk, &[0.0, 4.0], 20_000, 4, 0).unwrap();
        for p in &curve.points {
            let theory = theoretical_ber(Scheme::Qpsk, p.ebn0_db);
            let rel = (p.ber - theory).abs() / theory;
            assert!(rel < 0.15, "{} dB: {} vs {theory}", p.ebn0_db, p.ber);
            assert_eq!(p.n, 4);
            assert!(p.ber_std.is_some());
        }
    }

    #[test]
    fn baseline_rejects_tiny_sample_counts() {
        assert!(cmd_baseline_ber(Scheme::Qpsk, &[0.0], 100, 1, 0).is_err());
    }

    #[test]
    fn cluster_demod_is_near_perfect_at_high_snr() {
        let mut cfg = ExperimentConfig::default();
        cfg.cluster_preamble_length = 400;
        cfg.payload_length = 2_000;
        cfg.seeds = 2;
        let out = cmd_cluster_demod(&cfg, &[16.0]).unwrap();
        assert_eq!(out.rows.len(), 2);
        for row in &out.rows {
            assert_eq!(row.k_selected, 16, "seed {}", row.seed);
            assert!(row.ber < 1e-2, "seed {}: {}", row.seed, row.ber);
        }
        let csv = out.clusters_csv();
        assert!(csv.starts_with(CLUSTERS_CSV_HEADER));
    }

    #[test]
    fn eval_with_exact_knowledge_matches_coherent_theory() {
        let c = Constellation::standard(Scheme::Qam16);
        let curve = cmd_eval_scheme(&c, &[4.0], 50_000, 0, 1).unwrap();
        let theory = theoretical_ber(Scheme::Qam16, 4.0);
        let rel = (curve.points[0].ber - theory).abs() / theory;
        assert!(rel < 0.1, "{} vs {theory}", curve.points[0].ber);
    }

    #[test]
    fn eval_reconstruction_approaches_exact_with_long_pilots() {
        let c = Constellation::standard(Scheme::Qam16);
        let exact = cmd_eval_scheme(&c, &[8.0], 50_000, 0, 2).unwrap();
        let recon = cmd_eval_scheme(&c, &[8.0], 50_000, 16_000, 2).unwrap();
        let (a, b) = (exact.points[0].ber, recon.points[0].ber);
        assert!((a - b).abs() / a < 0.2, "{a} vs {b}");
    }

    #[test]
    fn eval_requires_pilots_to_cover_the_words() {
        let c = Constellation::standard(Scheme::Qam16);
        assert!(cmd_eval_scheme(&c, &[8.0], 10_000, 5, 0).is_err());
    }
}
