//! Stochastic AWGN channel, FIR multipath and the standalone LMS equalizer.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::modem::IQSymbol;
use crate::num::Real;
use crate::rng::derive_rng;

/// Additive white Gaussian noise channel: total complex noise variance `n0`,
/// i.e. `n0/2` per component.
#[derive(Clone, Copy, Debug)]
pub struct ChannelSpec<R> {
    pub n0: R,
    pub seed: u64,
}

impl<R: Real> ChannelSpec<R> {
    pub fn new(n0: R, seed: u64) -> Self {
        ChannelSpec { n0, seed }
    }
}

/// Draws one standard Gaussian pair in double precision.
///
/// Sampling always happens in `f64` so that every scalar type sees the same
/// stream; the result is narrowed afterwards.
pub fn standard_gaussian_pair<R: Real>(rng: &mut impl Rng) -> (R, R) {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (R::from_f64_lossy(a), R::from_f64_lossy(b))
}

/// Adds complex Gaussian noise with per-component variance `n0/2`, drawing
/// from the provided stream.
pub fn awgn_apply_with<R: Real>(
    symbols: &[IQSymbol<R>],
    n0: R,
    rng: &mut impl Rng,
) -> Vec<IQSymbol<R>> {
    let sigma = (n0 / R::from_f64_lossy(2.0)).sqrt();
    symbols
        .iter()
        .map(|s| {
            let (zi, zq) = standard_gaussian_pair::<R>(rng);
            IQSymbol::new(s.i + sigma * zi, s.q + sigma * zq)
        })
        .collect()
}

/// Adds noise using a stream derived from the spec's seed. Identical
/// `(symbols, seed)` pairs yield bit-identical outputs.
pub fn awgn_apply<R: Real>(symbols: &[IQSymbol<R>], spec: &ChannelSpec<R>) -> Vec<IQSymbol<R>> {
    let mut rng = derive_rng(spec.seed, &[]);
    awgn_apply_with(symbols, spec.n0, &mut rng)
}

/// Finite impulse response of a multipath channel.
#[derive(Clone, Debug)]
pub struct MultipathSpec<R> {
    pub taps: Vec<Complex<R>>,
}

impl<R: Real> MultipathSpec<R> {
    pub fn new(taps: Vec<Complex<R>>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("multipath spec needs at least one tap"));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::invalid("multipath taps must be finite"));
        }
        Ok(MultipathSpec { taps })
    }
}

/// Causal convolution with the channel impulse response, truncated to the
/// input length (zero prehistory).
pub fn fir_apply<R: Real>(symbols: &[IQSymbol<R>], mp: &MultipathSpec<R>) -> Vec<IQSymbol<R>> {
    let x: Vec<Complex<R>> = symbols.iter().map(|&s| s.into()).collect();
    (0..x.len())
        .map(|m| {
            let mut acc = Complex::new(R::zero(), R::zero());
            for (k, h) in mp.taps.iter().enumerate() {
                if k <= m {
                    acc = acc + *h * x[m - k];
                }
            }
            acc.into()
        })
        .collect()
}

/// Adaptive FIR equalizer state after LMS training.
#[derive(Clone, Debug)]
pub struct EqualizerState<R> {
    pub weights: Vec<Complex<R>>,
    pub learning_rate: R,
}

const LMS_DIVERGENCE_LIMIT: f64 = 1e6;

/// One pass of per-sample stochastic gradient updates over the training
/// sequence.
///
/// For each sample the filter output is `x'[m] = sum_k w_k xhat[m-k]`, the
/// error `e[m] = x'[m] - x[m]` and the update `w_k <- w_k - alpha e conj(xhat[m-k])`.
/// Weights start at zero. Stable for `alpha` well below
/// `2 / (num_taps * mean input power)`; unit-power inputs with a handful of
/// taps are safe up to roughly `alpha = 0.1`.
///
/// Returns the final weights and the `|e[m]|^2` trace, or a divergence error
/// with the offending step index if any `|e|` exceeds `1e6`.
pub fn lms_train<R: Real>(
    corrupted: &[IQSymbol<R>],
    reference: &[IQSymbol<R>],
    num_taps: usize,
    alpha: R,
) -> Result<(EqualizerState<R>, Vec<R>)> {
    if corrupted.len() != reference.len() {
        return Err(Error::invalid(format!(
            "corrupted and reference lengths differ: {} vs {}",
            corrupted.len(),
            reference.len()
        )));
    }
    if num_taps == 0 {
        return Err(Error::invalid("equalizer needs at least one tap"));
    }
    if alpha < R::zero() {
        return Err(Error::invalid("learning rate must be non-negative"));
    }
    let xhat: Vec<Complex<R>> = corrupted.iter().map(|&s| s.into()).collect();
    let x: Vec<Complex<R>> = reference.iter().map(|&s| s.into()).collect();
    let mut w = vec![Complex::new(R::zero(), R::zero()); num_taps];
    let mut trace = Vec::with_capacity(x.len());
    for m in 0..x.len() {
        let mut y = Complex::new(R::zero(), R::zero());
        for k in 0..num_taps.min(m + 1) {
            y = y + w[k] * xhat[m - k];
        }
        let e = y - x[m];
        let e_sq = e.norm_sqr();
        trace.push(e_sq);
        if e_sq.to_f64_lossy() > LMS_DIVERGENCE_LIMIT * LMS_DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                step: m,
                magnitude: e_sq.to_f64_lossy().sqrt(),
            });
        }
        for k in 0..num_taps.min(m + 1) {
            w[k] = w[k] - Complex::new(alpha, R::zero()) * e * xhat[m - k].conj();
        }
    }
    Ok((
        EqualizerState {
            weights: w,
            learning_rate: alpha,
        },
        trace,
    ))
}
