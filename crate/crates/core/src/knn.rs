//! Preamble-referenced k-nearest-neighbor demodulation.

use crate::bits::BitWord;
use crate::error::{Error, Result};
use crate::modem::IQSymbol;
use crate::num::Real;

/// Noisy reference symbols with their known words, plus the neighbor count.
#[derive(Clone, Copy, Debug)]
pub struct KnnReference<'a, R> {
    symbols: &'a [IQSymbol<R>],
    words: &'a [BitWord],
    k: usize,
}

impl<'a, R: Real> KnnReference<'a, R> {
    pub fn new(symbols: &'a [IQSymbol<R>], words: &'a [BitWord], k: usize) -> Result<Self> {
        if symbols.len() != words.len() {
            return Err(Error::invalid(format!(
                "reference lengths differ: {} symbols vs {} words",
                symbols.len(),
                words.len()
            )));
        }
        if k == 0 || k % 2 == 0 {
            return Err(Error::invalid(format!("k must be odd, got {k}")));
        }
        if k > symbols.len() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds reference size {}",
                symbols.len()
            )));
        }
        Ok(KnnReference { symbols, words, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Keeps the k smallest (distance, index) pairs seen so far. Distance ties
/// break towards the lower reference index.
struct KBest<R> {
    entries: Vec<(R, usize)>,
    k: usize,
}

impl<R: Real> KBest<R> {
    fn new(k: usize) -> Self {
        KBest {
            entries: Vec::with_capacity(k + 1),
            k,
        }
    }

    fn push(&mut self, dist: R, idx: usize) {
        let pos = self
            .entries
            .partition_point(|&(d, i)| (d, i) < (dist, idx));
        if pos < self.k {
            self.entries.insert(pos, (dist, idx));
            self.entries.truncate(self.k);
        }
    }
}

fn vote<R: Real>(neighbors: &[(R, usize)], words: &[BitWord]) -> BitWord {
    let n = words[neighbors[0].1].len();
    let mut ones = vec![0usize; n];
    for &(_, idx) in neighbors {
        for (pos, bit) in words[idx].bits().enumerate() {
            ones[pos] += bit as usize;
        }
    }
    let bits: Vec<u8> = ones
        .iter()
        .map(|&c| if 2 * c > neighbors.len() { 1 } else { 0 })
        .collect();
    BitWord::from_bits(&bits)
}

/// Demodulates one symbol: find the k nearest reference symbols and decide
/// each bit position by majority vote among their words.
pub fn knn_demod<R: Real>(s: &IQSymbol<R>, reference: &KnnReference<'_, R>) -> BitWord {
    let mut best = KBest::new(reference.k);
    for (idx, r) in reference.symbols.iter().enumerate() {
        best.push(s.dist_sq(r), idx);
    }
    vote(&best.entries, reference.words)
}

/// Leave-one-out demodulation of a noisy preamble against itself: position i
/// is decided by its k nearest neighbors among all positions except i.
pub fn knn_demod_loo<R: Real>(
    noisy_preamble: &[IQSymbol<R>],
    preamble_words: &[BitWord],
    k: usize,
) -> Result<Vec<BitWord>> {
    if noisy_preamble.len() != preamble_words.len() {
        return Err(Error::invalid(format!(
            "preamble lengths differ: {} symbols vs {} words",
            noisy_preamble.len(),
            preamble_words.len()
        )));
    }
    if k >= noisy_preamble.len() {
        return Err(Error::invalid(format!(
            "k = {k} must be smaller than the preamble length {}",
            noisy_preamble.len()
        )));
    }
    if k == 0 || k % 2 == 0 {
        return Err(Error::invalid(format!("k must be odd, got {k}")));
    }
    Ok((0..noisy_preamble.len())
        .map(|i| {
            let mut best = KBest::new(k);
            for (idx, r) in noisy_preamble.iter().enumerate() {
                if idx != i {
                    best.push(noisy_preamble[i].dist_sq(r), idx);
                }
            }
            vote(&best.entries, preamble_words)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{awgn_apply_with, standard_gaussian_pair};
    use crate::modem::{Constellation, IQSymbol, Scheme};
    use rand::Rng;

    type S = IQSymbol<f64>;

    #[test]
    fn exact_hit_with_k1() {
        let symbols = vec![S::new(0.0, 0.0), S::new(1.0, 0.0), S::new(0.0, 1.0)];
        let words: Vec<BitWord> = ["00", "01", "10"]
            .iter()
            .map(|s| BitWord::parse(s).unwrap())
            .collect();
        let r = KnnReference::new(&symbols, &words, 1).unwrap();
        assert_eq!(knn_demod(&symbols[1], &r), words[1]);
    }

    #[test]
    fn per_bit_majority_vote() {
        let symbols = vec![S::new(0.0, 0.0), S::new(0.1, 0.0), S::new(0.0, 0.1)];
        let words: Vec<BitWord> = ["0000", "0001", "0011"]
            .iter()
            .map(|s| BitWord::parse(s).unwrap())
            .collect();
        let r = KnnReference::new(&symbols, &words, 3).unwrap();
        assert_eq!(
            knn_demod(&S::new(0.02, 0.02), &r),
            BitWord::parse("0001").unwrap()
        );
    }

    #[test]
    fn rejects_bad_references() {
        let symbols = vec![S::new(0.0, 0.0)];
        let words = vec![BitWord::parse("0").unwrap()];
        assert!(KnnReference::new(&symbols, &words, 2).is_err());
        assert!(KnnReference::new(&symbols, &words, 3).is_err());
        assert!(KnnReference::new(&symbols, &words[..0], 1).is_err());
    }

    #[test]
    fn k1_equals_nearest_neighbor_classification() {
        let mut rng = crate::rng::derive_rng(19, &[0]);
        for _ in 0..1000 {
            let m = rng.random_range(5..40);
            let symbols: Vec<S> = (0..m)
                .map(|_| {
                    let (a, b) = standard_gaussian_pair::<f64>(&mut rng);
                    S::new(a, b)
                })
                .collect();
            let words: Vec<BitWord> = (0..m)
                .map(|_| BitWord::new(rng.random_range(0..16), 4))
                .collect();
            let (a, b) = standard_gaussian_pair::<f64>(&mut rng);
            let query = S::new(a, b);
            let r = KnnReference::new(&symbols, &words, 1).unwrap();
            let nearest = (0..m)
                .min_by(|&a, &b| {
                    query.dist_sq(&symbols[a])
                        .partial_cmp(&query.dist_sq(&symbols[b]))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(knn_demod(&query, &r), words[nearest]);
        }
    }

    #[test]
    fn k3_matches_brute_force_sort_and_vote() {
        let mut rng = crate::rng::derive_rng(20, &[0]);
        for _ in 0..300 {
            let m = rng.random_range(7..30);
            let symbols: Vec<S> = (0..m)
                .map(|_| {
                    let (a, b) = standard_gaussian_pair::<f64>(&mut rng);
                    S::new(a, b)
                })
                .collect();
            let words: Vec<BitWord> = (0..m)
                .map(|_| BitWord::new(rng.random_range(0..8), 3))
                .collect();
            let (a, b) = standard_gaussian_pair::<f64>(&mut rng);
            let query = S::new(a, b);
            let r = KnnReference::new(&symbols, &words, 3).unwrap();

            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                query.dist_sq(&symbols[a])
                    .partial_cmp(&query.dist_sq(&symbols[b]))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut bits = Vec::new();
            for pos in 0..3 {
                let ones: usize = order[..3]
                    .iter()
                    .map(|&i| words[i].bit(pos) as usize)
                    .sum();
                bits.push(if ones >= 2 { 1 } else { 0 });
            }
            assert_eq!(knn_demod(&query, &r), BitWord::from_bits(&bits));
        }
    }

    #[test]
    fn loo_noiseless_recovers_preamble() {
        let c = Constellation::<f64>::standard(Scheme::Qam16);
        let words: Vec<BitWord> = c.words().cycle().take(64).collect();
        let symbols = c.modulate(&words).unwrap();
        let guesses = knn_demod_loo(&symbols, &words, 3).unwrap();
        assert_eq!(guesses, words);
    }

    #[test]
    fn loo_pure_noise_is_chance_level() {
        let c = Constellation::<f64>::standard(Scheme::Qam16);
        let mut rng = crate::rng::derive_rng(23, &[0]);
        let words: Vec<BitWord> = (0..512)
            .map(|_| BitWord::new(rng.random_range(0..16), 4))
            .collect();
        // Symbols carry no information about the words at all.
        let symbols: Vec<S> = (0..512)
            .map(|_| {
                let (a, b) = standard_gaussian_pair::<f64>(&mut rng);
                S::new(a, b)
            })
            .collect();
        let guesses = knn_demod_loo(&symbols, &words, 3).unwrap();
        let errors: u32 = words
            .iter()
            .zip(&guesses)
            .map(|(w, g)| w.hamming(g).unwrap())
            .sum();
        let ber = errors as f64 / (512.0 * 4.0);
        assert!((ber - 0.5).abs() < 0.05, "ber = {ber}");
        let _ = c;
    }

    #[test]
    fn loo_close_to_coherent_at_low_noise() {
        let c = Constellation::<f64>::standard(Scheme::Qam16);
        let mut rng = crate::rng::derive_rng(29, &[0]);
        let words: Vec<BitWord> = (0..512)
            .map(|_| BitWord::new(rng.random_range(0..16), 4))
            .collect();
        let clean = c.modulate(&words).unwrap();
        let noisy = awgn_apply_with(&clean, 0.01, &mut rng);
        let knn_errors: u32 = knn_demod_loo(&noisy, &words, 3)
            .unwrap()
            .iter()
            .zip(&words)
            .map(|(g, w)| g.hamming(w).unwrap())
            .sum();
        let coh_errors: u32 = noisy
            .iter()
            .zip(&words)
            .map(|(s, w)| c.demod_coherent(s).hamming(w).unwrap())
            .sum();
        // At n0 = 0.01 both should be error-free or nearly so.
        assert!(knn_errors <= (2 * coh_errors).max(4), "{knn_errors} vs {coh_errors}");
    }
}
