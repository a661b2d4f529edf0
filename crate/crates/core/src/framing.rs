//! Message-length planning from the i.i.d. indel model, together with the
//! rate and Eb/N0 bookkeeping that goes with a chosen frame size.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::ComplexSample;
use crate::constellation::Constellation;
use crate::demod::MapDemodulator;
use crate::error::{domain, Result};
use crate::shaping::ShapingCode;

/// Largest frame length `select_ns` will return.
pub const MAX_NS: usize = 1_000_000;

/// Default grid searched by `tune_a`.
pub const DEFAULT_A_GRID: [f64; 6] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5];

/// Convert decibels to a power ratio.
pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn ratio_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Monte Carlo estimate of the per-symbol indel probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndelEstimate {
    /// Point estimate, or the 95% upper bound `3 / trials` when no event
    /// was seen.
    pub p: f64,
    pub std_err: f64,
    pub events: u64,
    pub trials: u64,
    pub censored: bool,
}

/// Probability that the MAP decision for a single transmitted symbol has a
/// codeword of different length than the symbol sent. Symbols are drawn from
/// the constellation's own probabilities and `Es` is its average energy.
pub fn estimate_p_indel<R: Rng + ?Sized>(
    cons: &Constellation,
    code: &ShapingCode,
    es_n0: f64,
    trials: u64,
    rng: &mut R,
) -> Result<IndelEstimate> {
    if trials < 10_000 {
        return domain(format!("at least 10^4 trials are needed, got {trials}"));
    }
    if !(es_n0 > 0.0) {
        return domain(format!("Es/N0 must be positive, got {es_n0}"));
    }
    if code.len() != cons.len() {
        return domain("code and constellation sizes differ");
    }
    let n0 = cons.average_energy() / es_n0;
    let scorer = MapDemodulator::new(cons, n0)?;
    let sampler = WeightedIndex::new(cons.probabilities())
        .map_err(|e| crate::Error::Domain(e.to_string()))?;
    let lengths = code.lengths();
    let values = cons.values();
    let sd = (n0 / 2.0).sqrt();
    let mut events = 0u64;
    for _ in 0..trials {
        let s = sampler.sample(rng);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let y = values[s] + ComplexSample::new(re * sd, im * sd);
        let (d, _, _) = scorer.decide(y);
        if lengths[d] != lengths[s] {
            events += 1;
        }
    }
    Ok(indel_estimate(events, trials))
}

pub(crate) fn indel_estimate(events: u64, trials: u64) -> IndelEstimate {
    let t = trials as f64;
    if events == 0 {
        return IndelEstimate {
            p: 3.0 / t,
            std_err: 0.0,
            events,
            trials,
            censored: true,
        };
    }
    let p = events as f64 / t;
    IndelEstimate {
        p,
        std_err: (p * (1.0 - p) / t).sqrt(),
        events,
        trials,
        censored: false,
    }
}

/// Probability of two or more indels among `n` independent symbols.
pub fn prob_two_or_more(n: usize, p: f64) -> f64 {
    if n < 2 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let ln_q = (-p).ln_1p();
    if nf * p < 1.0 {
        // Direct binomial tail; the complement form cancels badly here.
        let ratio = p / (1.0 - p);
        let mut term = nf * (nf - 1.0) / 2.0 * p * p * ((nf - 2.0) * ln_q).exp();
        let mut sum = 0.0;
        let mut k = 2.0;
        while term > sum * 1e-17 && k <= nf {
            sum += term;
            term *= (nf - k) / (k + 1.0) * ratio;
            k += 1.0;
        }
        sum
    } else {
        let tail = -(nf * ln_q).exp_m1() - nf * p * ((nf - 1.0) * ln_q).exp();
        tail.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NsSelection {
    pub n_s: usize,
    /// Set when only a single symbol satisfies the bound.
    pub floored: bool,
}

/// Largest `N <= MAX_NS` with `P(>= 2 indels in N) <= a * p`.
pub fn select_ns(p_indel: f64, a_param: f64) -> Result<NsSelection> {
    if !(p_indel > 0.0 && p_indel < 1.0) {
        return domain(format!(
            "indel probability must lie in (0, 1), got {p_indel}"
        ));
    }
    if !(a_param > 0.0) || !a_param.is_finite() {
        return domain(format!("a must be positive, got {a_param}"));
    }
    let bound = a_param * p_indel;
    let ok = |n: usize| prob_two_or_more(n, p_indel) <= bound;
    // ok(1) always holds; the tail is increasing in N.
    let (mut lo, mut hi) = (1usize, MAX_NS);
    if ok(hi) {
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(NsSelection {
        n_s: lo,
        floored: lo == 1,
    })
}

/// Eb/N0 of a framed transmission: one padding symbol of overhead per
/// `n_s` symbols, information per symbol equal to the entropy. Pass
/// `f64::INFINITY` for an unframed stream.
pub fn eb_n0(es_n0: f64, n_s: f64, cons: &Constellation) -> Result<f64> {
    if !(n_s >= 1.0) {
        return domain(format!("symbol count must be at least 1, got {n_s}"));
    }
    let h = cons.entropy_bits();
    if !(h > 0.0) {
        return domain("constellation has zero entropy");
    }
    Ok(es_n0 * (1.0 + 1.0 / n_s) / h)
}

/// Inverse of `eb_n0` for a given frame length.
pub fn es_n0_for(eb_n0: f64, n_s: f64, cons: &Constellation) -> Result<f64> {
    let unit = self::eb_n0(1.0, n_s, cons)?;
    Ok(eb_n0 / unit)
}

/// Information rate after padding: `N_b / (N_b + E[pad bits])`.
pub fn frame_rate(n_bits: usize, code: &ShapingCode) -> Result<f64> {
    if n_bits == 0 {
        return domain("message must carry at least one bit");
    }
    let n = n_bits as f64;
    Ok(n / (n + code.expected_pad_bits()))
}

/// Mean codeword length under the constellation's probabilities.
pub fn mean_bits_per_symbol(cons: &Constellation, code: &ShapingCode) -> f64 {
    cons.points()
        .iter()
        .zip(code.codewords())
        .map(|(p, c)| p.probability * c.len() as f64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePlan {
    pub es_n0: f64,
    pub eb_n0: f64,
    pub p_indel: f64,
    pub p_indel_censored: bool,
    pub a_param: f64,
    pub n_symbols: usize,
    pub n_bits: usize,
    pub rate: f64,
    pub floored: bool,
}

impl FramePlan {
    pub fn es_n0_db(&self) -> f64 {
        ratio_to_db(self.es_n0)
    }

    pub fn eb_n0_db(&self) -> f64 {
        ratio_to_db(self.eb_n0)
    }
}

/// Plan for a known frame length.
pub fn plan_with_ns(
    cons: &Constellation,
    code: &ShapingCode,
    es_n0: f64,
    n_s: usize,
    a_param: f64,
    indel: Option<IndelEstimate>,
) -> Result<FramePlan> {
    if n_s == 0 {
        return domain("frame must hold at least one symbol");
    }
    let n_bits = ((n_s as f64 * mean_bits_per_symbol(cons, code)).round() as usize).max(1);
    Ok(FramePlan {
        es_n0,
        eb_n0: eb_n0(es_n0, n_s as f64, cons)?,
        p_indel: indel.map_or(f64::NAN, |e| e.p),
        p_indel_censored: indel.is_some_and(|e| e.censored),
        a_param,
        n_symbols: n_s,
        n_bits,
        rate: frame_rate(n_bits, code)?,
        floored: false,
    })
}

/// Plan at a given Es/N0 from an indel estimate and `a`.
pub fn plan_frame(
    cons: &Constellation,
    code: &ShapingCode,
    es_n0: f64,
    a_param: f64,
    indel: IndelEstimate,
) -> Result<FramePlan> {
    let sel = select_ns(indel.p.min(0.5), a_param)?;
    let mut plan = plan_with_ns(cons, code, es_n0, sel.n_s, a_param, Some(indel))?;
    plan.floored = sel.floored;
    Ok(plan)
}

/// Plan at a target Eb/N0. Es/N0 depends on the frame length through the
/// padding overhead, so the two are iterated to a fixed point; the indel
/// probability is re-estimated with a fresh draw from `rng` each round.
pub fn plan_for_eb_n0<R: Rng + ?Sized>(
    cons: &Constellation,
    code: &ShapingCode,
    eb_n0_target: f64,
    a_param: f64,
    trials: u64,
    rng: &mut R,
) -> Result<FramePlan> {
    let mut n_s = f64::INFINITY;
    let mut last = None;
    for _ in 0..8 {
        let es = es_n0_for(eb_n0_target, n_s, cons)?;
        let indel = estimate_p_indel(cons, code, es, trials, rng)?;
        let plan = plan_frame(cons, code, es, a_param, indel)?;
        if plan.n_symbols as f64 == n_s {
            return Ok(plan);
        }
        n_s = plan.n_symbols as f64;
        last = Some(plan);
    }
    // Not settled: fix the last frame length and recompute Es/N0 so the
    // reported Eb/N0 is the requested one.
    let plan = last.expect("loop ran at least once");
    let es = es_n0_for(eb_n0_target, plan.n_symbols as f64, cons)?;
    let mut fixed = plan_with_ns(cons, code, es, plan.n_symbols, a_param, None)?;
    fixed.p_indel = plan.p_indel;
    fixed.p_indel_censored = plan.p_indel_censored;
    fixed.floored = plan.floored;
    Ok(fixed)
}
