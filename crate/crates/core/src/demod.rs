//! MAP symbol decisions under the non-uniform prior, and single-symbol
//! length correction guided by the padding terminator.
//!
//! When the depadded message length disagrees with the length both ends
//! agreed on, at least one symbol was demodulated to a point with a
//! different codeword length. Symbols are revisited from least to most
//! reliable; for each, the points on its own ring and the adjacent rings
//! are tried in order of posterior probability and the first swap that
//! restores the expected length is accepted.

use crate::channel::ComplexSample;
use crate::constellation::Constellation;
use crate::error::{domain, Result};
use crate::shaping::{depadded_len, symbols_to_bits, Bits, ShapingCode};

/// Per-sample MAP decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodResult {
    pub symbols: Vec<usize>,
    /// Posterior probability of the chosen symbol, one per sample.
    pub posteriors: Vec<f64>,
}

impl DemodResult {
    /// Concatenated codewords with the padding removed. Fails when no `1`
    /// is present.
    pub fn message_bits(&self, code: &ShapingCode) -> Result<Bits> {
        crate::shaping::depad(&symbols_to_bits(&self.symbols, code)?)
    }
}

/// Log-domain MAP scorer with cached log priors.
#[derive(Debug, Clone)]
pub struct MapDemodulator {
    points: Vec<ComplexSample>,
    log_prior: Vec<f64>,
    inv_n0: f64,
}

impl MapDemodulator {
    pub fn new(cons: &Constellation, n0: f64) -> Result<Self> {
        if !(n0 > 0.0) {
            return domain(format!("n0 must be positive, got {n0}"));
        }
        Ok(Self {
            points: cons.values(),
            log_prior: cons.probabilities().iter().map(|p| p.ln()).collect(),
            inv_n0: 1.0 / n0,
        })
    }

    /// `ln p(x) - |y - x|^2 / n0` for point `i`.
    #[inline]
    pub fn score(&self, y: ComplexSample, i: usize) -> f64 {
        self.log_prior[i] - (y - self.points[i]).norm_sqr() * self.inv_n0
    }

    /// Best point, its posterior and the runner-up point.
    pub fn decide(&self, y: ComplexSample) -> (usize, f64, usize) {
        let mut best = (0, f64::NEG_INFINITY);
        let mut second = (0, f64::NEG_INFINITY);
        let mut scores = Vec::with_capacity(self.points.len());
        for i in 0..self.points.len() {
            let s = self.score(y, i);
            scores.push(s);
            if s > best.1 {
                second = best;
                best = (i, s);
            } else if s > second.1 {
                second = (i, s);
            }
        }
        let denom: f64 = scores.iter().map(|s| (s - best.1).exp()).sum();
        (best.0, 1.0 / denom, second.0)
    }

    /// Full posterior vector for one sample; sums to one.
    pub fn posteriors(&self, y: ComplexSample) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.points.len()).map(|i| self.score(y, i)).collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    }

    pub fn demodulate(&self, samples: &[ComplexSample]) -> DemodResult {
        let (symbols, posteriors) = samples
            .iter()
            .map(|&y| {
                let (s, p, _) = self.decide(y);
                (s, p)
            })
            .unzip();
        DemodResult {
            symbols,
            posteriors,
        }
    }

    /// Points of `candidates` ordered by decreasing posterior for `y`,
    /// ties to the lower index.
    pub fn rank(&self, y: ComplexSample, candidates: &[usize]) -> Vec<usize> {
        let mut scored: Vec<(usize, f64)> =
            candidates.iter().map(|&c| (c, self.score(y, c))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.into_iter().map(|(c, _)| c).collect()
    }
}

/// MAP decision per sample: argmax of `p(x) exp(-|y - x|^2 / n0)`.
pub fn map_demod(samples: &[ComplexSample], cons: &Constellation, n0: f64) -> Result<DemodResult> {
    Ok(MapDemodulator::new(cons, n0)?.demodulate(samples))
}

/// Full posterior vector of one sample.
pub fn posterior_vector(y: ComplexSample, cons: &Constellation, n0: f64) -> Result<Vec<f64>> {
    Ok(MapDemodulator::new(cons, n0)?.posteriors(y))
}

/// Points on the symbol's ring and on the rings immediately inside and
/// outside it, excluding the symbol itself, in index order.
pub fn candidate_set(symbol: usize, cons: &Constellation) -> Vec<usize> {
    let ring = cons.points()[symbol].ring;
    let lo = ring.saturating_sub(1);
    let hi = ring + 1;
    cons.points()
        .iter()
        .enumerate()
        .filter(|(i, p)| *i != symbol && p.ring >= lo && p.ring <= hi)
        .map(|(i, _)| i)
        .collect()
}

/// If the last symbol's codeword carries no `1`, the frame cannot have
/// been padded that way; swap in the runner-up point for the last sample.
pub fn last_symbol_fallback(
    demod: &DemodResult,
    cons: &Constellation,
    code: &ShapingCode,
    samples: &[ComplexSample],
    n0: f64,
) -> Result<DemodResult> {
    let scorer = MapDemodulator::new(cons, n0)?;
    Ok(fallback_with(&scorer, demod, code, samples).0)
}

pub(crate) fn fallback_with(
    scorer: &MapDemodulator,
    demod: &DemodResult,
    code: &ShapingCode,
    samples: &[ComplexSample],
) -> (DemodResult, bool) {
    let mut out = demod.clone();
    let (Some(&last), Some(&y)) = (demod.symbols.last(), samples.last()) else {
        return (out, false);
    };
    if code.codeword(last).iter().any(|&b| b) {
        return (out, false);
    }
    let post = scorer.posteriors(y);
    let (_, _, second) = scorer.decide(y);
    let n = out.symbols.len();
    out.symbols[n - 1] = second;
    out.posteriors[n - 1] = post[second];
    (out, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionOutcome {
    /// Depadded length already matched.
    Unchanged,
    /// One symbol was swapped.
    Corrected {
        position: usize,
        from: usize,
        to: usize,
    },
    /// No single swap restored the length; bits returned as demodulated.
    Exhausted,
    /// No terminating `1` anywhere in the frame.
    Erasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub bits: Bits,
    pub symbols: Vec<usize>,
    pub outcome: CorrectionOutcome,
}

/// Single-symbol length correction toward a message of `n` bits.
pub fn length_correct(
    samples: &[ComplexSample],
    demod: &DemodResult,
    n: usize,
    cons: &Constellation,
    code: &ShapingCode,
    n0: f64,
) -> Result<Correction> {
    if samples.len() != demod.symbols.len() {
        return domain("sample count differs from demodulated symbol count");
    }
    let scorer = MapDemodulator::new(cons, n0)?;
    let candidates: Vec<Vec<usize>> = (0..cons.len()).map(|s| candidate_set(s, cons)).collect();
    length_correct_with(&scorer, &candidates, samples, demod, n, code)
}

pub(crate) fn length_correct_with(
    scorer: &MapDemodulator,
    candidates: &[Vec<usize>],
    samples: &[ComplexSample],
    demod: &DemodResult,
    n: usize,
    code: &ShapingCode,
) -> Result<Correction> {
    let symbols = &demod.symbols;
    let bits = symbols_to_bits(symbols, code)?;
    let Some(end) = depadded_len(&bits) else {
        return Ok(Correction {
            bits: Bits::new(),
            symbols: symbols.clone(),
            outcome: CorrectionOutcome::Erasure,
        });
    };
    if end == n {
        return Ok(Correction {
            bits: bits[..end].to_vec(),
            symbols: symbols.clone(),
            outcome: CorrectionOutcome::Unchanged,
        });
    }

    let mut starts = Vec::with_capacity(symbols.len());
    let mut acc = 0;
    for &s in symbols {
        starts.push(acc);
        acc += code.codeword(s).len();
    }
    // Symbol holding the terminating 1.
    let term = starts.partition_point(|&st| st <= end) - 1;

    let mut order: Vec<usize> = (0..symbols.len()).collect();
    order.sort_by(|&a, &b| {
        demod.posteriors[a]
            .total_cmp(&demod.posteriors[b])
            .then(a.cmp(&b))
    });

    for pos in order {
        let old = symbols[pos];
        let old_len = code.codeword(old).len() as isize;
        for cand in scorer.rank(samples[pos], &candidates[old]) {
            let delta = code.codeword(cand).len() as isize - old_len;
            let new_end = if pos < term {
                Some((end as isize + delta) as usize)
            } else {
                terminator_after_swap(symbols, &starts, code, pos, cand, delta)
            };
            if new_end == Some(n) {
                let mut swapped = symbols.clone();
                swapped[pos] = cand;
                let mut new_bits = symbols_to_bits(&swapped, code)?;
                new_bits.truncate(n);
                return Ok(Correction {
                    bits: new_bits,
                    symbols: swapped,
                    outcome: CorrectionOutcome::Corrected {
                        position: pos,
                        from: old,
                        to: cand,
                    },
                });
            }
        }
    }
    Ok(Correction {
        bits: bits[..end].to_vec(),
        symbols: symbols.clone(),
        outcome: CorrectionOutcome::Exhausted,
    })
}

fn terminator_after_swap(
    symbols: &[usize],
    starts: &[usize],
    code: &ShapingCode,
    pos: usize,
    cand: usize,
    delta: isize,
) -> Option<usize> {
    for s in (0..symbols.len()).rev() {
        let cw = code.codeword(if s == pos { cand } else { symbols[s] });
        if let Some(k) = cw.iter().rposition(|&b| b) {
            let start = starts[s] as isize + if s > pos { delta } else { 0 };
            return Some((start + k as isize) as usize);
        }
    }
    None
}

/// Everything the receiver produced for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    /// Raw MAP decisions, before any fallback or correction.
    pub demod: DemodResult,
    pub fallback_applied: bool,
    pub correction: Correction,
}

/// Reusable receiver for one constellation, code and noise level.
#[derive(Debug, Clone)]
pub struct Receiver {
    scorer: MapDemodulator,
    candidates: Vec<Vec<usize>>,
}

impl Receiver {
    pub fn new(cons: &Constellation, n0: f64) -> Result<Self> {
        Ok(Self {
            scorer: MapDemodulator::new(cons, n0)?,
            candidates: (0..cons.len()).map(|s| candidate_set(s, cons)).collect(),
        })
    }

    pub fn scorer(&self) -> &MapDemodulator {
        &self.scorer
    }

    /// MAP demodulation, last-symbol fallback and, when `correct` is set,
    /// length correction toward `n` message bits.
    pub fn receive(
        &self,
        samples: &[ComplexSample],
        code: &ShapingCode,
        n: usize,
        correct: bool,
    ) -> Result<Reception> {
        let demod = self.scorer.demodulate(samples);
        self.receive_decided(samples, demod, code, n, correct)
    }

    pub fn receive_decided(
        &self,
        samples: &[ComplexSample],
        demod: DemodResult,
        code: &ShapingCode,
        n: usize,
        correct: bool,
    ) -> Result<Reception> {
        let (fixed, fallback_applied) = fallback_with(&self.scorer, &demod, code, samples);
        let correction = if correct {
            length_correct_with(&self.scorer, &self.candidates, samples, &fixed, n, code)?
        } else {
            let bits = symbols_to_bits(&fixed.symbols, code)?;
            match depadded_len(&bits) {
                Some(end) => Correction {
                    bits: bits[..end].to_vec(),
                    symbols: fixed.symbols.clone(),
                    outcome: if end == n {
                        CorrectionOutcome::Unchanged
                    } else {
                        CorrectionOutcome::Exhausted
                    },
                },
                None => Correction {
                    bits: Bits::new(),
                    symbols: fixed.symbols.clone(),
                    outcome: CorrectionOutcome::Erasure,
                },
            }
        };
        Ok(Reception {
            demod,
            fallback_applied,
            correction,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::ConstellationPoint;
    use crate::fixtures;
    use crate::shaping::{format_bits, parse_bits};

    fn two_point(p0: f64) -> Constellation {
        Constellation::from_points(
            vec![
                ConstellationPoint {
                    value: ComplexSample::new(-1.0, 0.0),
                    probability: p0,
                    ring: 0,
                },
                ConstellationPoint {
                    value: ComplexSample::new(0.0, 2.0),
                    probability: 1.0 - p0,
                    ring: 1,
                },
            ],
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn exact_point_is_chosen() {
        let cons = fixtures::psk(8);
        let samples = cons.values();
        let d = map_demod(&samples, &cons, 0.1).unwrap();
        assert_eq!(d.symbols, (0..8).collect::<Vec<_>>());
        assert!(d.posteriors.iter().all(|p| *p > 0.0 && *p <= 1.0));
    }

    #[test]
    fn prior_breaks_equidistant_tie() {
        // y equidistant from both points.
        let cons = two_point(0.9);
        let a = cons.points()[0].value;
        let b = cons.points()[1].value;
        let mid = (a + b) / 2.0;
        let d = map_demod(&[mid], &cons, 0.5).unwrap();
        assert_eq!(d.symbols, vec![0]);
        assert!((d.posteriors[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn posterior_vector_sums_to_one() {
        let cons = fixtures::worked_example_constellation();
        for &(re, im) in &[(0.3, 0.1), (2.2, -1.9), (4.9, 0.0), (-0.7, 3.3)] {
            let v = posterior_vector(ComplexSample::new(re, im), &cons, 0.4).unwrap();
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn worked_example_candidates() {
        let cons = fixtures::worked_example_constellation();
        assert_eq!(candidate_set(9, &cons), vec![5, 6, 7, 8, 10, 11, 12, 13]);
        // Origin: only the first ring.
        assert_eq!(candidate_set(0, &cons), vec![1, 2, 3, 4]);
        // Innermost positive ring: own ring, the next ring and the origin.
        assert_eq!(candidate_set(1, &cons), vec![0, 2, 3, 4, 5, 6, 7, 8]);
        let psk = fixtures::psk(4);
        assert_eq!(candidate_set(2, &psk), vec![0, 1, 3]);
    }

    fn worked_example_samples(cons: &Constellation) -> Vec<ComplexSample> {
        // First sample is pulled from point 9 toward point 7.
        let p9 = cons.points()[9].value;
        let p7 = cons.points()[7].value;
        let y0 = p9 + (p7 - p9) / (p7 - p9).norm() * 0.2;
        vec![y0, cons.points()[4].value, cons.points()[15].value]
    }

    #[test]
    fn worked_example_correction() {
        let cons = fixtures::worked_example_constellation();
        let code = fixtures::worked_example_code();
        let samples = worked_example_samples(&cons);
        let n0 = 0.1;
        let d = map_demod(&samples, &cons, n0).unwrap();
        assert_eq!(d.symbols, vec![9, 4, 15]);
        assert_eq!(format_bits(&d.message_bits(&code).unwrap()), "10010111");
        let c = length_correct(&samples, &d, 7, &cons, &code, n0).unwrap();
        assert_eq!(format_bits(&c.bits), "1110111");
        assert_eq!(
            c.outcome,
            CorrectionOutcome::Corrected {
                position: 0,
                from: 9,
                to: 7
            }
        );
    }

    #[test]
    fn correct_length_is_untouched() {
        let cons = fixtures::worked_example_constellation();
        let code = fixtures::worked_example_code();
        let samples = worked_example_samples(&cons);
        let d = DemodResult {
            symbols: vec![7, 4, 15],
            posteriors: vec![0.01, 0.02, 0.03],
        };
        let c = length_correct(&samples, &d, 7, &cons, &code, 0.5).unwrap();
        assert_eq!(c.outcome, CorrectionOutcome::Unchanged);
        assert_eq!(c.bits, parse_bits("1110111").unwrap());
    }

    #[test]
    fn fallback_swaps_all_zero_final_symbol() {
        let cons = fixtures::worked_example_constellation();
        let code = fixtures::worked_example_code();
        // Symbol 0 has codeword 0000. Put the last sample between point 0
        // (origin) and point 1 (codeword 0001) with 0 slightly favoured.
        let y_last = cons.points()[1].value * 0.3;
        let samples = vec![cons.points()[7].value, y_last];
        let d = map_demod(&samples, &cons, 0.5).unwrap();
        assert_eq!(d.symbols, vec![7, 0]);
        assert!(d.message_bits(&code).is_ok()); // the 1s of symbol 7 still terminate
        let f = last_symbol_fallback(&d, &cons, &code, &samples, 0.5).unwrap();
        assert_eq!(f.symbols, vec![7, 1]);
        assert_eq!(format_bits(&f.message_bits(&code).unwrap()), "111000");
        let post = posterior_vector(y_last, &cons, 0.5).unwrap();
        assert!((f.posteriors[1] - post[1]).abs() < 1e-15);
    }

    #[test]
    fn fallback_is_noop_when_last_has_a_one() {
        let cons = fixtures::worked_example_constellation();
        let code = fixtures::worked_example_code();
        let samples = worked_example_samples(&cons);
        let d = map_demod(&samples, &cons, 0.5).unwrap();
        assert_eq!(
            last_symbol_fallback(&d, &cons, &code, &samples, 0.5).unwrap(),
            d
        );
    }

    #[test]
    fn fallback_on_two_points_picks_the_other() {
        let cons = two_point(0.5);
        let code = ShapingCode::from_codewords(vec![vec![false], vec![true]], None).unwrap();
        let samples = vec![ComplexSample::new(-0.9, 0.1)];
        let d = map_demod(&samples, &cons, 0.2).unwrap();
        assert_eq!(d.symbols, vec![0]);
        let f = last_symbol_fallback(&d, &cons, &code, &samples, 0.2).unwrap();
        assert_eq!(f.symbols, vec![1]);
    }

    #[test]
    fn erasure_when_no_terminator() {
        let cons = fixtures::worked_example_constellation();
        let code = fixtures::worked_example_code();
        let samples = vec![cons.points()[0].value; 2];
        let d = DemodResult {
            symbols: vec![0, 0],
            posteriors: vec![1.0, 1.0],
        };
        let c = length_correct(&samples, &d, 4, &cons, &code, 0.5).unwrap();
        assert_eq!(c.outcome, CorrectionOutcome::Erasure);
        assert!(c.bits.is_empty());
    }

    #[test]
    fn swap_of_terminating_symbol_is_recomputed() {
        // Message "0" + pad: symbols whose terminator sits in the last
        // symbol; swapping that symbol must rescan for the last 1.
        let cons = fixtures::worked_example_constellation();
        let code = fixtures::worked_example_code();
        let frame = crate::shaping::modulate(&parse_bits("0101").unwrap(), &code);
        let samples: Vec<ComplexSample> = frame
            .symbols
            .iter()
            .map(|&s| cons.points()[s].value)
            .collect();
        let d = map_demod(&samples, &cons, 0.01).unwrap();
        let c = length_correct(&samples, &d, 4, &cons, &code, 0.01).unwrap();
        assert_eq!(c.outcome, CorrectionOutcome::Unchanged);
        // Ask for a different length: any accepted swap must really have it.
        for n in 0..12 {
            let c = length_correct(&samples, &d, n, &cons, &code, 0.01).unwrap();
            if let CorrectionOutcome::Corrected { .. } = c.outcome {
                let rebuilt =
                    crate::shaping::depad(&symbols_to_bits(&c.symbols, &code).unwrap()).unwrap();
                assert_eq!(rebuilt.len(), n);
                assert_eq!(rebuilt, c.bits);
            }
        }
    }
}
