//! Training orchestration: the single-agent loop against a fixed receiver and
//! the decentralized two-agent echo protocol, with per-iteration metrics.

use rand::{Rng, RngCore};

use crate::bits::BitWord;
use crate::channel::awgn_apply_with;
use crate::error::{Error, Result};
use crate::knn::{knn_demod, knn_demod_loo, KnnReference};
use crate::modem::{Constellation, IQSymbol};
use crate::num::Real;
use crate::policy::{symbol_loss, PolicyState, TxConfig};
use crate::rng::derive_rng;

/// Default neighbor count of the kNN receivers.
pub const DEFAULT_RX_K: usize = 3;

const PREAMBLE_LABEL: u64 = 0x7072_6561;
const AGENT_INIT_LABEL: u64 = 0x6167_656e;
const SINGLE_LABEL: u64 = 0x7369_6e67;
const ECHO_LABEL: u64 = 0x6563_686f;

/// Full configuration of one training run.
#[derive(Clone, Copy, Debug)]
pub struct TrainConfig<R> {
    pub preamble_length: usize,
    pub bits_per_symbol: usize,
    pub n0: R,
    pub iterations: usize,
    pub seed: u64,
    pub rx_k: usize,
    pub tx: TxConfig<R>,
}

impl<R: Real> Default for TrainConfig<R> {
    fn default() -> Self {
        TrainConfig {
            preamble_length: 512,
            bits_per_symbol: 4,
            n0: R::from_f64_lossy(0.01),
            iterations: 2000,
            seed: 0,
            rx_k: DEFAULT_RX_K,
            tx: TxConfig::default(),
        }
    }
}

impl<R: Real> TrainConfig<R> {
    fn validate(&self) -> Result<()> {
        if self.preamble_length == 0 {
            return Err(Error::invalid("preamble_length must be at least 1"));
        }
        if self.bits_per_symbol == 0 || self.bits_per_symbol > 8 {
            return Err(Error::invalid(format!(
                "bits_per_symbol must be in 1..=8, got {}",
                self.bits_per_symbol
            )));
        }
        if self.n0 < R::zero() || !self.n0.is_finite() {
            return Err(Error::invalid("n0 must be finite and non-negative"));
        }
        if self.rx_k == 0 {
            return Err(Error::invalid("rx_k must be at least 1"));
        }
        Ok(())
    }
}

/// One trainable endpoint: a stochastic transmitter plus a kNN receiver and
/// the shared preamble.
#[derive(Clone, Debug)]
pub struct Agent<R> {
    pub id: u8,
    pub tx: PolicyState<R>,
    pub tx_cfg: TxConfig<R>,
    pub rx_k: usize,
    pub preamble: Vec<BitWord>,
}

impl<R: Real> Agent<R> {
    pub fn with_state(
        id: u8,
        tx: PolicyState<R>,
        tx_cfg: TxConfig<R>,
        preamble: Vec<BitWord>,
    ) -> Self {
        Agent {
            id,
            tx,
            tx_cfg,
            rx_k: DEFAULT_RX_K,
            preamble,
        }
    }

    /// Amplitude scale applied to every transmitted symbol this agent emits.
    fn tx_scale(&self) -> R {
        if self.tx_cfg.restrict_energy {
            self.tx.energy_scale()
        } else {
            R::one()
        }
    }
}

/// Mean constellation an agent's transmitter currently realizes, with the
/// energy restriction applied when enabled.
pub fn extract_scheme<R: Real>(agent: &Agent<R>) -> Constellation<R> {
    agent.tx.extract_means(&agent.tx_cfg)
}

/// One metrics row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord<R> {
    pub iteration: usize,
    pub agent: u8,
    pub ber: R,
    pub mean_symbol_energy: R,
    pub sigma: [R; 2],
}

/// Everything recorded over one run for one agent.
#[derive(Clone, Debug)]
pub struct RunMetrics<R> {
    pub agent: u8,
    pub records: Vec<IterationRecord<R>>,
    pub final_constellation: Constellation<R>,
}

pub const METRICS_CSV_HEADER: &str = "iteration,agent,ber,mean_symbol_energy,sigma_re,sigma_im";

impl<R: Real> RunMetrics<R> {
    pub fn csv_rows(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration,
                r.agent,
                r.ber.to_f64_lossy(),
                r.mean_symbol_energy.to_f64_lossy(),
                r.sigma[0].to_f64_lossy(),
                r.sigma[1].to_f64_lossy()
            );
        }
        out
    }

    pub fn to_csv_string(&self) -> String {
        format!("{METRICS_CSV_HEADER}\n{}", self.csv_rows())
    }
}

/// Draws M words of i.i.d. fair bits; the same (M, n, seed) always yields
/// the same preamble, which is how both agents share it.
pub fn generate_preamble(m: usize, n: usize, seed: u64) -> Vec<BitWord> {
    let mut rng = derive_rng(seed, &[PREAMBLE_LABEL]);
    (0..m)
        .map(|_| BitWord::new(rng.random_range(0..(1usize << n)), n))
        .collect()
}

fn measure_ber<R: Real>(words: &[BitWord], guesses: &[BitWord]) -> Result<R> {
    let mut errors = 0u64;
    let mut bits = 0u64;
    for (w, g) in words.iter().zip(guesses) {
        errors += w.hamming(g)? as u64;
        bits += w.len() as u64;
    }
    Ok(R::from_f64_lossy(errors as f64 / bits as f64))
}

fn mean_energy<R: Real>(symbols: &[IQSymbol<R>]) -> R {
    let sum: R = symbols.iter().map(|s| s.energy()).sum();
    sum / R::from_f64_lossy(symbols.len() as f64)
}

/// Trains a transmitter against a fixed coherent receiver, starting from the
/// given policy state. Returns the metrics and the final policy.
pub fn train_single_agent_with<R: Real>(
    mut tx: PolicyState<R>,
    fixed_rx: &Constellation<R>,
    cfg: &TrainConfig<R>,
) -> Result<(RunMetrics<R>, PolicyState<R>)> {
    cfg.validate()?;
    if fixed_rx.bits_per_symbol() != cfg.bits_per_symbol {
        return Err(Error::WordLengthMismatch {
            left: fixed_rx.bits_per_symbol(),
            right: cfg.bits_per_symbol,
        });
    }
    let preamble = generate_preamble(cfg.preamble_length, cfg.bits_per_symbol, cfg.seed);
    let mut records = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let mut rng = derive_rng(cfg.seed, &[SINGLE_LABEL, it as u64]);
        let scale = if cfg.tx.restrict_energy {
            tx.energy_scale()
        } else {
            R::one()
        };
        let raw: Vec<IQSymbol<R>> = preamble
            .iter()
            .map(|&w| tx.sample_symbol(w, &mut rng))
            .collect::<Result<_>>()?;
        let transmitted: Vec<IQSymbol<R>> = raw.iter().map(|s| s.scale(scale)).collect();
        let received = awgn_apply_with(&transmitted, cfg.n0, &mut rng);
        let guesses: Vec<BitWord> = received.iter().map(|s| fixed_rx.demod_coherent(s)).collect();

        let sigma = tx.sigma();
        records.push(IterationRecord {
            iteration: it,
            agent: 1,
            ber: measure_ber(&preamble, &guesses)?,
            mean_symbol_energy: mean_energy(&transmitted),
            sigma,
        });

        let batch: Vec<(BitWord, IQSymbol<R>, R)> = preamble
            .iter()
            .zip(&raw)
            .zip(&transmitted)
            .zip(&guesses)
            .map(|(((&w, &r), t), &g)| Ok((w, r, symbol_loss(w, g, *t, cfg.tx.lambda_p)?)))
            .collect::<Result<_>>()?;
        tx.policy_gradient_step(&batch, &cfg.tx)?;
    }
    let metrics = RunMetrics {
        agent: 1,
        records,
        final_constellation: tx.extract_means(&cfg.tx),
    };
    Ok((metrics, tx))
}

/// Trains a freshly initialized transmitter against a fixed receiver.
pub fn train_single_agent<R: Real>(
    fixed_rx: &Constellation<R>,
    cfg: &TrainConfig<R>,
) -> Result<(RunMetrics<R>, PolicyState<R>)> {
    cfg.validate()?;
    let mut seeder = derive_rng(cfg.seed, &[AGENT_INIT_LABEL]);
    let tx = PolicyState::init(cfg.bits_per_symbol, &cfg.tx, seeder.next_u64());
    train_single_agent_with(tx, fixed_rx, cfg)
}

/// All intermediates of one echo round, from the transmitter's perspective.
#[derive(Clone, Debug)]
pub struct EchoRound<R> {
    /// Raw Gaussian draws of the transmitting agent, before any energy scale.
    pub raw: Vec<IQSymbol<R>>,
    /// Symbols actually placed on the channel by the transmitter.
    pub transmitted: Vec<IQSymbol<R>>,
    /// The echoing agent's guess of the preamble.
    pub b_hat: Vec<BitWord>,
    /// The transmitter's decoding of the echoed guess.
    pub b_hat_hat: Vec<BitWord>,
    /// Per-symbol losses for the transmitter.
    pub losses: Vec<R>,
    /// Fraction of echoed bits that differ from the preamble.
    pub ber: R,
}

/// Runs one round of the echo protocol with `a1` transmitting and `a2`
/// echoing. Neither agent is modified; the caller applies the policy update.
///
/// The round draws from `rng` in a fixed order: M sample pairs for step (1),
/// M noise pairs, 2M sample pairs for step (3) (modulated preamble first,
/// then the modulated guess), 2M noise pairs.
pub fn echo_round<R: Real>(
    a1: &Agent<R>,
    a2: &Agent<R>,
    n0: R,
    rng: &mut impl Rng,
) -> Result<EchoRound<R>> {
    let b = &a1.preamble;
    if *b != a2.preamble {
        return Err(Error::invalid("agents do not share the preamble"));
    }
    let m = b.len();

    // (1) a1 modulates the preamble; the channel applies.
    let scale1 = a1.tx_scale();
    let raw: Vec<IQSymbol<R>> = b
        .iter()
        .map(|&w| a1.tx.sample_symbol(w, rng))
        .collect::<Result<_>>()?;
    let transmitted: Vec<IQSymbol<R>> = raw.iter().map(|s| s.scale(scale1)).collect();
    let y1 = awgn_apply_with(&transmitted, n0, rng);

    // (2) a2 guesses the preamble by leave-one-out kNN on what it received.
    let b_hat = knn_demod_loo(&y1, b, a2.rx_k)?;

    // (3) a2 modulates the known preamble and its guess, 2M symbols total.
    let scale2 = a2.tx_scale();
    let echo_raw: Vec<IQSymbol<R>> = b
        .iter()
        .chain(&b_hat)
        .map(|&w| a2.tx.sample_symbol(w, rng))
        .collect::<Result<_>>()?;
    let echo_tx: Vec<IQSymbol<R>> = echo_raw.iter().map(|s| s.scale(scale2)).collect();
    let y2 = awgn_apply_with(&echo_tx, n0, rng);

    // (4) a1 uses the first half, labeled with the known preamble, as the kNN
    // reference for decoding the second half.
    let reference = KnnReference::new(&y2[..m], b, a1.rx_k)?;
    let b_hat_hat: Vec<BitWord> = y2[m..].iter().map(|s| knn_demod(s, &reference)).collect();

    // (5) Per-symbol loss: echoed bit errors plus the energy penalty on a1's
    // own transmitted symbols.
    let losses: Vec<R> = b
        .iter()
        .zip(&b_hat_hat)
        .zip(&transmitted)
        .map(|((&w, &g), t)| symbol_loss(w, g, *t, a1.tx_cfg.lambda_p))
        .collect::<Result<_>>()?;
    let ber = measure_ber(b, &b_hat_hat)?;

    Ok(EchoRound {
        raw,
        transmitted,
        b_hat,
        b_hat_hat,
        losses,
        ber,
    })
}

/// Both agents' metrics and final states after a full echo run.
#[derive(Clone, Debug)]
pub struct EchoOutcome<R> {
    pub metrics: [RunMetrics<R>; 2],
    pub agents: [Agent<R>; 2],
}

/// Runs the full decentralized protocol: the agents alternate the transmitter
/// role every iteration, and only the transmitter updates its policy.
pub fn train_echo<R: Real>(cfg: &TrainConfig<R>) -> Result<EchoOutcome<R>> {
    cfg.validate()?;
    let preamble = generate_preamble(cfg.preamble_length, cfg.bits_per_symbol, cfg.seed);
    let mut seeder = derive_rng(cfg.seed, &[AGENT_INIT_LABEL]);
    let mut agents = [1u8, 2u8].map(|id| {
        let mut a = Agent::with_state(
            id,
            PolicyState::init(cfg.bits_per_symbol, &cfg.tx, seeder.next_u64()),
            cfg.tx,
            preamble.clone(),
        );
        a.rx_k = cfg.rx_k;
        a
    });
    let mut records: [Vec<IterationRecord<R>>; 2] = [Vec::new(), Vec::new()];

    for it in 0..cfg.iterations {
        let (t, r) = if it % 2 == 0 { (0, 1) } else { (1, 0) };
        let mut rng = derive_rng(cfg.seed, &[ECHO_LABEL, it as u64]);
        let round = echo_round(&agents[t], &agents[r], cfg.n0, &mut rng)?;

        records[t].push(IterationRecord {
            iteration: it,
            agent: agents[t].id,
            ber: round.ber,
            mean_symbol_energy: mean_energy(&round.transmitted),
            sigma: agents[t].tx.sigma(),
        });

        let batch: Vec<(BitWord, IQSymbol<R>, R)> = preamble
            .iter()
            .zip(&round.raw)
            .zip(&round.losses)
            .map(|((&w, &s), &l)| (w, s, l))
            .collect();
        agents[t].tx.policy_gradient_step(&batch, &cfg.tx)?;
    }

    let [r1, r2] = records;
    let metrics = [
        RunMetrics {
            agent: 1,
            records: r1,
            final_constellation: extract_scheme(&agents[0]),
        },
        RunMetrics {
            agent: 2,
            records: r2,
            final_constellation: extract_scheme(&agents[1]),
        },
    ];
    Ok(EchoOutcome { metrics, agents })
}

/// Counts the distinguishable clusters among constellation points: points
/// within `merge_radius` of each other merge transitively.
pub fn distinct_clusters<R: Real>(points: &[IQSymbol<R>], merge_radius: R) -> usize {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let r2 = merge_radius * merge_radius;
    for i in 0..n {
        for j in i + 1..n {
            if points[i].dist_sq(&points[j]) <= r2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..n)
        .map(|i| find(&mut parent, i))
        .collect::<std::collections::HashSet<_>>()
        .len()
}
