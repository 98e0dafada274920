//! The stochastic neural transmitter: a one-hidden-layer ReLU network
//! producing a complex mean, two trainable log standard deviations, Gaussian
//! sampling, score-function gradients and Adam updates.

use rand::Rng;

use crate::bits::BitWord;
use crate::channel::standard_gaussian_pair;
use crate::error::{Error, Result};
use crate::modem::{Constellation, IQSymbol};
use crate::num::Real;
use crate::rng::derive_rng;

/// Adam constants. The moment decay rates and epsilon are fixed; the step
/// size comes from [`TxConfig`].
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Floor on the standard deviation so log densities stay finite.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// Transmitter hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct TxConfig<R> {
    pub step_size: R,
    pub lambda_p: R,
    pub initial_log_sigma: R,
    pub restrict_energy: bool,
    pub hidden_units: usize,
}

impl<R: Real> Default for TxConfig<R> {
    fn default() -> Self {
        TxConfig {
            step_size: R::from_f64_lossy(0.00245),
            lambda_p: R::from_f64_lossy(0.09),
            initial_log_sigma: -R::one(),
            restrict_energy: false,
            hidden_units: 40,
        }
    }
}

/// All trainable state of one transmitter: MLP weights, log standard
/// deviations and the Adam moment accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyState<R> {
    bits_per_symbol: usize,
    hidden: usize,
    /// Flat parameter vector: `[w1 (hidden x n), b1 (hidden), w2 (2 x hidden),
    /// log_sigma (2)]`.
    params: Vec<R>,
    adam_m: Vec<R>,
    adam_v: Vec<R>,
    step_count: u64,
}

struct Layout {
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    log_sigma: std::ops::Range<usize>,
}

impl<R: Real> PolicyState<R> {
    fn layout(&self) -> Layout {
        let n = self.bits_per_symbol;
        let h = self.hidden;
        let w1 = 0..h * n;
        let b1 = w1.end..w1.end + h;
        let w2 = b1.end..b1.end + 2 * h;
        let log_sigma = w2.end..w2.end + 2;
        Layout {
            w1,
            b1,
            w2,
            log_sigma,
        }
    }

    /// Random initialization: hidden weights and biases from N(0, 0.2^2),
    /// output weights fan-in scaled, no output bias, both log standard
    /// deviations at the configured initial value.
    pub fn init(bits_per_symbol: usize, cfg: &TxConfig<R>, seed: u64) -> Self {
        let h = cfg.hidden_units;
        let n = bits_per_symbol;
        let count = h * n + h + 2 * h + 2;
        let mut state = PolicyState {
            bits_per_symbol: n,
            hidden: h,
            params: vec![R::zero(); count],
            adam_m: vec![R::zero(); count],
            adam_v: vec![R::zero(); count],
            step_count: 0,
        };
        let layout = state.layout();
        let mut rng = derive_rng(seed, &[0x706f6c69]);
        let hidden_sd = R::from_f64_lossy(0.2);
        // Fan-in scaling keeps the initial mean outputs near the origin
        // regardless of the hidden width, so every word starts inside the
        // central decision region and splits outward as training demands.
        let out_sd = R::from_f64_lossy(0.1 / (h as f64).sqrt());
        for idx in layout.w1.clone().chain(layout.b1.clone()) {
            let (z, _) = standard_gaussian_pair::<R>(&mut rng);
            state.params[idx] = hidden_sd * z;
        }
        for idx in layout.w2.clone() {
            let (z, _) = standard_gaussian_pair::<R>(&mut rng);
            state.params[idx] = out_sd * z;
        }
        for idx in layout.log_sigma.clone() {
            state.params[idx] = cfg.initial_log_sigma;
        }
        state
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn log_sigma(&self) -> [R; 2] {
        let l = self.layout();
        [self.params[l.log_sigma.start], self.params[l.log_sigma.start + 1]]
    }

    /// Standard deviations with the floor applied.
    pub fn sigma(&self) -> [R; 2] {
        let floor = R::from_f64_lossy(SIGMA_FLOOR);
        let ls = self.log_sigma();
        [ls[0].exp().max(floor), ls[1].exp().max(floor)]
    }

    fn check_word(&self, word: BitWord) -> Result<()> {
        if word.len() != self.bits_per_symbol {
            return Err(Error::WordLengthMismatch {
                left: word.len(),
                right: self.bits_per_symbol,
            });
        }
        Ok(())
    }

    /// Forward pass returning the hidden activations along with the mean.
    fn forward(&self, word: BitWord) -> ([R; 2], Vec<R>) {
        let l = self.layout();
        let input: Vec<R> = word.bipolar().collect();
        let n = self.bits_per_symbol;
        let mut hidden = Vec::with_capacity(self.hidden);
        for hidx in 0..self.hidden {
            let mut pre = self.params[l.b1.start + hidx];
            for (j, x) in input.iter().enumerate() {
                pre += self.params[l.w1.start + hidx * n + j] * *x;
            }
            hidden.push(pre.max(R::zero()));
        }
        let mut mu = [R::zero(); 2];
        for c in 0..2 {
            let mut acc = R::zero();
            for (hidx, h) in hidden.iter().enumerate() {
                acc += self.params[l.w2.start + c * self.hidden + hidx] * *h;
            }
            mu[c] = acc;
        }
        (mu, hidden)
    }

    /// The deterministic complex mean for a word: `w2 relu(w1 x + b1)`.
    pub fn forward_mean(&self, word: BitWord) -> Result<[R; 2]> {
        self.check_word(word)?;
        Ok(self.forward(word).0)
    }

    /// Draws a symbol from the Gaussian policy for the given word.
    pub fn sample_symbol(&self, word: BitWord, rng: &mut impl Rng) -> Result<IQSymbol<R>> {
        let mu = self.forward_mean(word)?;
        let sigma = self.sigma();
        let (zi, zq) = standard_gaussian_pair::<R>(rng);
        Ok(IQSymbol::new(mu[0] + sigma[0] * zi, mu[1] + sigma[1] * zq))
    }

    /// Analytic gradient of the Gaussian log density of `sampled` with
    /// respect to every parameter, chained through the network.
    pub fn log_prob_grad(&self, word: BitWord, sampled: IQSymbol<R>) -> Result<Vec<R>> {
        self.check_word(word)?;
        if !sampled.i.is_finite() || !sampled.q.is_finite() {
            return Err(Error::invalid("sampled symbol must be finite"));
        }
        let l = self.layout();
        let n = self.bits_per_symbol;
        let (mu, hidden) = self.forward(word);
        let sigma = self.sigma();
        let x = [sampled.i, sampled.q];
        let mut grad = vec![R::zero(); self.params.len()];

        // d log p / d mu_c = (x_c - mu_c) / sigma_c^2
        let mut dmu = [R::zero(); 2];
        for c in 0..2 {
            let diff = x[c] - mu[c];
            dmu[c] = diff / (sigma[c] * sigma[c]);
            // d log p / d log sigma_c = (x_c - mu_c)^2 / sigma_c^2 - 1
            grad[l.log_sigma.start + c] = diff * diff / (sigma[c] * sigma[c]) - R::one();
        }

        let input: Vec<R> = word.bipolar().collect();
        for hidx in 0..self.hidden {
            let mut dh = R::zero();
            for c in 0..2 {
                let w = self.params[l.w2.start + c * self.hidden + hidx];
                grad[l.w2.start + c * self.hidden + hidx] = dmu[c] * hidden[hidx];
                dh += dmu[c] * w;
            }
            // ReLU gate: zero gradient where the unit is inactive.
            if hidden[hidx] > R::zero() {
                grad[l.b1.start + hidx] = dh;
                for (j, xin) in input.iter().enumerate() {
                    grad[l.w1.start + hidx * n + j] = dh * *xin;
                }
            }
        }
        Ok(grad)
    }

    /// Evaluates the Gaussian log density of a symbol under the current
    /// policy. Used by the finite-difference checks.
    pub fn log_prob(&self, word: BitWord, sampled: IQSymbol<R>) -> Result<R> {
        self.check_word(word)?;
        let mu = self.forward(word).0;
        let sigma = self.sigma();
        let x = [sampled.i, sampled.q];
        let two = R::from_f64_lossy(2.0);
        let tau = R::from_f64_lossy(std::f64::consts::TAU);
        let mut lp = R::zero();
        for c in 0..2 {
            let diff = x[c] - mu[c];
            lp -= diff * diff / (two * sigma[c] * sigma[c]);
            lp -= (tau.sqrt() * sigma[c]).ln();
        }
        Ok(lp)
    }

    /// One Adam update on the mean score-function gradient of the batch.
    ///
    /// The descent direction is the batch mean of `L_i * grad log p_i`
    /// (ascent on the negative loss). The batch is one full preamble
    /// transmission; each sampled symbol is the raw Gaussian draw before any
    /// energy restriction scaling.
    pub fn policy_gradient_step(
        &mut self,
        batch: &[(BitWord, IQSymbol<R>, R)],
        cfg: &TxConfig<R>,
    ) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("policy gradient batch must be non-empty"));
        }
        let mut grad = vec![R::zero(); self.params.len()];
        for (word, sampled, loss) in batch {
            let g = self.log_prob_grad(*word, *sampled)?;
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += *loss * *gi;
            }
        }
        let scale = R::from_f64_lossy(batch.len() as f64).recip();
        for g in grad.iter_mut() {
            *g *= scale;
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { block: "policy" });
        }

        self.step_count += 1;
        let beta1 = R::from_f64_lossy(ADAM_BETA1);
        let beta2 = R::from_f64_lossy(ADAM_BETA2);
        let eps = R::from_f64_lossy(ADAM_EPSILON);
        let t = R::from_f64_lossy(self.step_count as f64);
        let bc1 = R::one() - beta1.powf(t);
        let bc2 = R::one() - beta2.powf(t);
        for idx in 0..self.params.len() {
            let g = grad[idx];
            self.adam_m[idx] = beta1 * self.adam_m[idx] + (R::one() - beta1) * g;
            self.adam_v[idx] = beta2 * self.adam_v[idx] + (R::one() - beta2) * g * g;
            let m_hat = self.adam_m[idx] / bc1;
            let v_hat = self.adam_v[idx] / bc2;
            self.params[idx] -= cfg.step_size * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    /// Means for all `2^n` words, without any energy restriction.
    pub fn raw_means(&self) -> Constellation<R> {
        let points = BitWord::all(self.bits_per_symbol)
            .map(|w| {
                let mu = self.forward(w).0;
                IQSymbol::new(mu[0], mu[1])
            })
            .collect();
        Constellation::from_points(self.bits_per_symbol, points).unwrap()
    }

    /// Amplitude scale that enforces the hard energy constraint: when the
    /// largest mean symbol energy exceeds one, every transmitted amplitude is
    /// divided by its square root.
    pub fn energy_scale(&self) -> R {
        let means = self.raw_means();
        let e_max = means
            .points()
            .iter()
            .map(|p| p.energy())
            .fold(R::zero(), |a, b| a.max(b));
        if e_max > R::one() {
            e_max.sqrt().recip()
        } else {
            R::one()
        }
    }

    /// Mean constellation under the hard energy constraint: identical to the
    /// raw means when they fit in the unit disc, otherwise scaled so the
    /// maximum mean energy is exactly one.
    pub fn restricted_means(&self) -> Constellation<R> {
        let means = self.raw_means();
        let scale = self.energy_scale();
        if scale == R::one() {
            return means;
        }
        let points = means.points().iter().map(|p| p.scale(scale)).collect();
        Constellation::from_points(self.bits_per_symbol, points).unwrap()
    }

    /// The constellation the transmitter presents externally: restricted or
    /// raw means depending on the configuration, sampling noise ignored.
    pub fn extract_means(&self, cfg: &TxConfig<R>) -> Constellation<R> {
        if cfg.restrict_energy {
            self.restricted_means()
        } else {
            self.raw_means()
        }
    }

    /// Serializes as a versioned flat text format: one line per parameter
    /// block with its name, length and values.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let l = self.layout();
        let mut out = String::new();
        let _ = writeln!(out, "policy-v1");
        let _ = writeln!(out, "bits_per_symbol {}", self.bits_per_symbol);
        let _ = writeln!(out, "hidden {}", self.hidden);
        let _ = writeln!(out, "step_count {}", self.step_count);
        let mut block = |name: &str, range: std::ops::Range<usize>, values: &[R]| {
            let _ = write!(out, "{name} {}", range.len());
            for idx in range {
                let _ = write!(out, " {:.17e}", values[idx].to_f64_lossy());
            }
            let _ = writeln!(out);
        };
        for (name, range) in [
            ("w1", l.w1.clone()),
            ("b1", l.b1.clone()),
            ("w2", l.w2.clone()),
            ("log_sigma", l.log_sigma.clone()),
        ] {
            block(name, range, &self.params);
        }
        let all = 0..self.params.len();
        block("adam_m", all.clone(), &self.adam_m);
        block("adam_v", all, &self.adam_v);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse {
            line: line + 1,
            message,
        };
        let (lineno, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty checkpoint".into()))?;
        if header.trim() != "policy-v1" {
            return Err(parse_err(lineno, format!("unknown format '{header}'")));
        }
        let mut scalar = |expect: &str| -> Result<u64> {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| parse_err(usize::MAX, format!("missing field {expect}")))?;
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or("");
            if key != expect {
                return Err(parse_err(lineno, format!("expected '{expect}', got '{key}'")));
            }
            parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(lineno, format!("bad value for {expect}")))
        };
        let n = scalar("bits_per_symbol")? as usize;
        let h = scalar("hidden")? as usize;
        let step_count = scalar("step_count")?;
        let count = h * n + h + 2 * h + 2;
        let mut state = PolicyState {
            bits_per_symbol: n,
            hidden: h,
            params: vec![R::zero(); count],
            adam_m: vec![R::zero(); count],
            adam_v: vec![R::zero(); count],
            step_count,
        };
        let l = state.layout();
        let blocks: [(&str, std::ops::Range<usize>, usize); 6] = [
            ("w1", l.w1.clone(), 0),
            ("b1", l.b1.clone(), 0),
            ("w2", l.w2.clone(), 0),
            ("log_sigma", l.log_sigma.clone(), 0),
            ("adam_m", 0..count, 1),
            ("adam_v", 0..count, 2),
        ];
        for (name, range, target) in blocks {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| parse_err(usize::MAX, format!("missing block {name}")))?;
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or("");
            if key != name {
                return Err(parse_err(lineno, format!("expected block '{name}', got '{key}'")));
            }
            let len: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(lineno, format!("bad length for {name}")))?;
            if len != range.len() {
                return Err(parse_err(
                    lineno,
                    format!("block {name}: expected {} values, got {len}", range.len()),
                ));
            }
            let dest = match target {
                0 => &mut state.params,
                1 => &mut state.adam_m,
                _ => &mut state.adam_v,
            };
            for idx in range {
                let v: f64 = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err(lineno, format!("truncated block {name}")))?;
                dest[idx] = R::from_f64_lossy(v);
            }
        }
        Ok(state)
    }

    /// Overwrites the network so that the mean for every word equals the given
    /// constellation point exactly. Used to pre-set transmitters in tests.
    ///
    /// Uses `2^n` hidden units as indicator functions of each word, so it
    /// ignores the configured hidden width.
    pub fn preset_to(constellation: &Constellation<R>, log_sigma: R) -> Self {
        let n = constellation.bits_per_symbol();
        let h = constellation.order();
        let count = h * n + h + 2 * h + 2;
        let mut params = vec![R::zero(); count];
        let w1 = 0..h * n;
        let b1 = w1.end..w1.end + h;
        let w2 = b1.end..b1.end + 2 * h;
        // Hidden unit u activates only for word u: pre = sum_j w x_j + b with
        // w_j = bipolar bit of u and b = 1 - n, giving pre = 1 for the
        // matching word and <= -1 otherwise.
        for (u, word) in BitWord::all(n).enumerate() {
            for (j, x) in word.bipolar::<R>().enumerate() {
                params[w1.start + u * n + j] = x;
            }
            params[b1.start + u] = R::one() - R::from_f64_lossy(n as f64);
            let p = constellation.point(word).unwrap();
            params[w2.start + u] = p.i;
            params[w2.start + h + u] = p.q;
        }
        params[w2.end] = log_sigma;
        params[w2.end + 1] = log_sigma;
        PolicyState {
            bits_per_symbol: n,
            hidden: h,
            params,
            adam_m: vec![R::zero(); count],
            adam_v: vec![R::zero(); count],
            step_count: 0,
        }
    }
}

/// Per-symbol training loss: bit errors of the echo plus the energy penalty
/// on the transmitted symbol.
pub fn symbol_loss<R: Real>(
    word: BitWord,
    echoed_word: BitWord,
    tx_symbol: IQSymbol<R>,
    lambda_p: R,
) -> Result<R> {
    let errors = word.hamming(&echoed_word)?;
    Ok(R::from_f64_lossy(errors as f64) + lambda_p * tx_symbol.energy())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::Scheme;

    type P = PolicyState<f64>;

    fn small_cfg() -> TxConfig<f64> {
        TxConfig {
            hidden_units: 8,
            ..TxConfig::default()
        }
    }

    fn word(s: &str) -> BitWord {
        BitWord::parse(s).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_mean() {
        let mut state = P::init(4, &small_cfg(), 1);
        let w2_end = state.layout().w2.end;
        for p in state.params.iter_mut().take(w2_end) {
            *p = 0.0;
        }
        assert_eq!(state.forward_mean(word("1010")).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn single_hidden_unit_hand_computation() {
        let cfg = TxConfig {
            hidden_units: 1,
            ..TxConfig::default()
        };
        let mut state = P::init(2, &cfg, 1);
        // w1 = [0.5, -0.25], b1 = 0.1, w2 = [[2.0], [-1.0]]
        state.params[0] = 0.5;
        state.params[1] = -0.25;
        state.params[2] = 0.1;
        state.params[3] = 2.0;
        state.params[4] = -1.0;
        // word 01 -> bipolar [-1, 1]; pre = -0.5 - 0.25 + 0.1 = -0.65 -> relu 0
        let mu = state.forward_mean(word("01")).unwrap();
        assert_eq!(mu, [0.0, 0.0]);
        // word 10 -> bipolar [1, -1]; pre = 0.5 + 0.25 + 0.1 = 0.85
        let mu = state.forward_mean(word("10")).unwrap();
        assert!((mu[0] - 1.7).abs() < 1e-12 && (mu[1] + 0.85).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_mean_is_zero_except_log_sigma() {
        let state = P::init(3, &small_cfg(), 5);
        let w = word("101");
        let mu = state.forward_mean(w).unwrap();
        let grad = state
            .log_prob_grad(w, IQSymbol::new(mu[0], mu[1]))
            .unwrap();
        let l = state.layout();
        for idx in 0..l.w2.end {
            assert!(grad[idx].abs() < 1e-12);
        }
        assert!((grad[l.log_sigma.start] + 1.0).abs() < 1e-12);
        assert!((grad[l.log_sigma.start + 1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_sigma_gradient_formula() {
        // sigma = 1, x - mu = (1, 0): d/dlog sigma = (0, -1).
        let mut state = P::init(2, &small_cfg(), 6);
        let l = state.layout();
        state.params[l.log_sigma.start] = 0.0;
        state.params[l.log_sigma.start + 1] = 0.0;
        let w = word("11");
        let mu = state.forward_mean(w).unwrap();
        let grad = state
            .log_prob_grad(w, IQSymbol::new(mu[0] + 1.0, mu[1]))
            .unwrap();
        assert!((grad[l.log_sigma.start]).abs() < 1e-12);
        assert!((grad[l.log_sigma.start + 1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::derive_rng(31, &[0]);
        for trial in 0..100 {
            let n = rng.random_range(1..=4);
            let cfg = TxConfig {
                hidden_units: 6,
                initial_log_sigma: rng.random_range(-1.5..0.5),
                ..TxConfig::default()
            };
            let state = P::init(n, &cfg, trial);
            let w = BitWord::new(rng.random_range(0..(1usize << n)), n);
            let mu = state.forward_mean(w).unwrap();
            let sampled = IQSymbol::new(
                mu[0] + rng.random_range(-1.0..1.0),
                mu[1] + rng.random_range(-1.0..1.0),
            );
            let grad = state.log_prob_grad(w, sampled).unwrap();
            let h = 1e-5;
            for idx in 0..state.params.len() {
                let mut plus = state.clone();
                plus.params[idx] += h;
                let mut minus = state.clone();
                minus.params[idx] -= h;
                let fd = (plus.log_prob(w, sampled).unwrap()
                    - minus.log_prob(w, sampled).unwrap())
                    / (2.0 * h);
                let scale = grad[idx].abs().max(fd.abs()).max(1.0);
                assert!(
                    (grad[idx] - fd).abs() / scale < 1e-4,
                    "trial {trial} param {idx}: {} vs {fd}",
                    grad[idx]
                );
            }
        }
    }

    #[test]
    fn sampling_statistics_and_determinism() {
        let state = P::init(4, &small_cfg(), 9);
        let w = word("0110");
        let mu = state.forward_mean(w).unwrap();
        let sigma = state.sigma();

        let mut rng = derive_rng(1, &[1]);
        let n = 100_000;
        let mut sum = [0.0f64; 2];
        for _ in 0..n {
            let s = state.sample_symbol(w, &mut rng).unwrap();
            sum[0] += s.i;
            sum[1] += s.q;
        }
        for c in 0..2 {
            let mean = sum[c] / n as f64;
            let se = sigma[c] / (n as f64).sqrt();
            assert!((mean - mu[c]).abs() < 4.0 * se, "component {c}");
        }

        let mut r1 = derive_rng(2, &[7]);
        let mut r2 = derive_rng(2, &[7]);
        assert_eq!(
            state.sample_symbol(w, &mut r1).unwrap(),
            state.sample_symbol(w, &mut r2).unwrap()
        );
    }

    #[test]
    fn sigma_floor_pins_output_to_mean() {
        let cfg = TxConfig {
            initial_log_sigma: -60.0,
            hidden_units: 8,
            ..TxConfig::default()
        };
        let state = P::init(4, &cfg, 3);
        let w = word("1001");
        let mu = state.forward_mean(w).unwrap();
        let mut rng = derive_rng(3, &[0]);
        let s = state.sample_symbol(w, &mut rng).unwrap();
        assert!((s.i - mu[0]).abs() < 1e-6 && (s.q - mu[1]).abs() < 1e-6);
    }

    #[test]
    fn symbol_loss_examples() {
        let w = word("0101");
        assert!(
            (symbol_loss(w, w, IQSymbol::new(0.6, 0.8), 0.1).unwrap() - 0.1f64).abs() < 1e-12
        );
        let echoed = word("0110");
        assert_eq!(symbol_loss(w, echoed, IQSymbol::new(1.0, 1.0), 0.0).unwrap(), 2.0);
        assert!(symbol_loss(w, word("01"), IQSymbol::new(0.0, 0.0), 0.0).is_err());

        use rand::Rng;
        let mut rng = crate::rng::derive_rng(13, &[3]);
        for _ in 0..50 {
            let a = BitWord::new(rng.random_range(0..16), 4);
            let b = BitWord::new(rng.random_range(0..16), 4);
            let s = IQSymbol::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let lp = rng.random_range(0.0..0.2);
            let expected = a.hamming(&b).unwrap() as f64 + lp * (s.i * s.i + s.q * s.q);
            assert!((symbol_loss(a, b, s, lp).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_losses_leave_parameters_unchanged() {
        let cfg = small_cfg();
        let mut state = P::init(4, &cfg, 4);
        let before = state.params.clone();
        let mut rng = derive_rng(4, &[0]);
        let batch: Vec<(BitWord, IQSymbol<f64>, f64)> = (0..16)
            .map(|v| {
                let w = BitWord::new(v % 16, 4);
                (w, state.sample_symbol(w, &mut rng).unwrap(), 0.0)
            })
            .collect();
        state.policy_gradient_step(&batch, &cfg).unwrap();
        assert_eq!(state.params, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn hand_checked_single_step() {
        // One word, one sample, loss 1: the update must equal Adam applied to
        // g = L * grad log p computed by hand through the score formula.
        let cfg = TxConfig {
            hidden_units: 1,
            step_size: 0.1,
            ..TxConfig::default()
        };
        let mut state = P::init(1, &cfg, 2);
        let l = state.layout();
        state.params[l.w1.start] = 1.0;
        state.params[l.b1.start] = 0.5;
        state.params[l.w2.start] = 1.0;
        state.params[l.w2.start + 1] = -1.0;
        state.params[l.log_sigma.start] = 0.0;
        state.params[l.log_sigma.start + 1] = 0.0;
        let w = word("1"); // bipolar +1 -> hidden = 1.5, mu = (1.5, -1.5)
        let sampled = IQSymbol::new(2.0, -1.5); // diff = (0.5, 0)
        let expected_g = [
            0.5 * 1.0, // w1: dmu_i * w2_i * x = 0.5 * 1 * 1
            0.5 * 1.0, // b1
            0.5 * 1.5, // w2 re: dmu_i * h
            0.0 * 1.5, // w2 im
            0.25 - 1.0, // log sigma re: diff^2/sigma^2 - 1
            -1.0,      // log sigma im
        ];
        let grad = state.log_prob_grad(w, sampled).unwrap();
        for (g, e) in grad.iter().zip(&expected_g) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
        let before = state.params.clone();
        state
            .policy_gradient_step(&[(w, sampled, 1.0)], &cfg)
            .unwrap();
        // First Adam step moves every parameter by step_size * sign(g).
        for (idx, e) in expected_g.iter().enumerate() {
            let delta = state.params[idx] - before[idx];
            if *e == 0.0 {
                assert_eq!(delta, 0.0);
            } else {
                let expected = -0.1 * e.signum();
                assert!((delta - expected).abs() < 1e-6, "param {idx}");
            }
        }
    }

    #[test]
    fn score_estimator_zero_mean_under_constant_loss() {
        let cfg = small_cfg();
        let state = P::init(2, &cfg, 8);
        let w = word("01");
        let mut rng = derive_rng(8, &[1]);
        let n_batches = 10_000;
        let mut mean = vec![0.0f64; state.params.len()];
        let mut m2 = vec![0.0f64; state.params.len()];
        for _ in 0..n_batches {
            let s = state.sample_symbol(w, &mut rng).unwrap();
            let g = state.log_prob_grad(w, s).unwrap();
            for (idx, gi) in g.iter().enumerate() {
                mean[idx] += gi;
                m2[idx] += gi * gi;
            }
        }
        for idx in 0..mean.len() {
            let m = mean[idx] / n_batches as f64;
            let var = (m2[idx] / n_batches as f64 - m * m).max(0.0);
            let se = (var / n_batches as f64).sqrt();
            assert!(m.abs() <= 4.0 * se + 1e-12, "param {idx}: {m} vs se {se}");
        }
    }

    #[test]
    fn bandit_converges_to_target() {
        // Single-word policy trained on distance-to-target loss.
        let cfg = TxConfig {
            hidden_units: 4,
            step_size: 0.01,
            initial_log_sigma: -1.0,
            ..TxConfig::default()
        };
        let mut state = P::init(1, &cfg, 7);
        let w = word("0");
        let target = IQSymbol::new(0.7, -0.3);
        let mut rng = derive_rng(7, &[2]);
        for _ in 0..500 {
            let batch: Vec<_> = (0..32)
                .map(|_| {
                    let s = state.sample_symbol(w, &mut rng).unwrap();
                    (w, s, s.dist_sq(&target))
                })
                .collect();
            state.policy_gradient_step(&batch, &cfg).unwrap();
        }
        let mu = state.forward_mean(w).unwrap();
        let sigma = state.sigma();
        let dist = ((mu[0] - target.i).powi(2) + (mu[1] - target.q).powi(2)).sqrt();
        assert!(
            dist < sigma[0].max(sigma[1]).max(0.15),
            "mu = {mu:?}, sigma = {sigma:?}"
        );
    }

    #[test]
    fn restricted_means_properties() {
        // Means inside the unit disc: identity.
        let c = Constellation::<f64>::standard(Scheme::Qam16);
        let state = P::preset_to(&c, -2.0);
        assert_eq!(state.restricted_means(), state.raw_means());

        // One mean at (2, 0): scaled to (1, 0).
        let mut points = vec![IQSymbol::new(0.0, 0.0); 4];
        points[3] = IQSymbol::new(2.0, 0.0);
        let c = Constellation::from_points(2, points).unwrap();
        let state = P::preset_to(&c, -2.0);
        let restricted = state.restricted_means();
        assert!((restricted.point(word("11")).unwrap().i - 1.0).abs() < 1e-9);
        assert!(restricted.point(word("00")).unwrap().energy() < 1e-18);

        // Any scaled state has max mean energy exactly 1 and never gains
        // energy; scaling is idempotent on the resulting constellation.
        for seed in 0..20 {
            let cfg = TxConfig {
                hidden_units: 10,
                ..TxConfig::default()
            };
            let mut state = P::init(3, &cfg, seed);
            let l = state.layout();
            // Inflate output weights so E_max > 1.
            for idx in l.w2.clone() {
                state.params[idx] *= 150.0;
            }
            let raw = state.raw_means();
            let restricted = state.restricted_means();
            let e_max = restricted
                .points()
                .iter()
                .map(|p| p.energy())
                .fold(0.0f64, f64::max);
            let raw_max = raw.points().iter().map(|p| p.energy()).fold(0.0f64, f64::max);
            if raw_max > 1.0 {
                assert!((e_max - 1.0).abs() < 1e-9, "seed {seed}: {e_max}");
            }
            for (r, p) in restricted.points().iter().zip(raw.points()) {
                assert!(r.energy() <= p.energy() + 1e-12);
            }
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = small_cfg();
        assert_eq!(P::init(4, &cfg, 11), P::init(4, &cfg, 11));
        assert_ne!(P::init(4, &cfg, 11).params, P::init(4, &cfg, 12).params);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let cfg = small_cfg();
        let mut state = P::init(4, &cfg, 13);
        let mut rng = derive_rng(13, &[1]);
        let batch: Vec<_> = (0..8)
            .map(|v| {
                let w = BitWord::new(v, 4);
                (w, state.sample_symbol(w, &mut rng).unwrap(), 1.5)
            })
            .collect();
        state.policy_gradient_step(&batch, &cfg).unwrap();
        let text = state.to_text();
        let parsed = P::from_text(&text).unwrap();
        assert_eq!(parsed, state);
        assert!(P::from_text("policy-v2\n").is_err());
    }

    #[test]
    fn preset_reproduces_constellation() {
        for scheme in [Scheme::Qpsk, Scheme::Psk8, Scheme::Qam16] {
            let c = Constellation::<f64>::standard(scheme);
            let state = P::preset_to(&c, -3.0);
            for w in c.words() {
                let mu = state.forward_mean(w).unwrap();
                let p = c.point(w).unwrap();
                assert!((mu[0] - p.i).abs() < 1e-12 && (mu[1] - p.q).abs() < 1e-12);
            }
        }
    }
}
