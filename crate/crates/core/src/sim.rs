//! Monte Carlo link simulation for the shaped scheme and the QAM baseline.
//!
//! Frames are independent: frame `f` at SNR point `k` draws everything from
//! a ChaCha8 stream keyed by `(seed, k)` with stream number `f`. Frames are
//! run in fixed-size batches and the stop rule is checked between batches,
//! so the output depends on the seed only, not on the worker count or the
//! order in which a pool schedules work.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{add_noise_n0, ComplexSample};
use crate::constellation::Constellation;
use crate::demod::{CorrectionOutcome, Receiver};
use crate::error::{domain, Error, Result};
use crate::framing::{
    db_to_ratio, es_n0_for, estimate_p_indel, plan_for_eb_n0, plan_frame, plan_with_ns,
    ratio_to_db, FramePlan, DEFAULT_A_GRID,
};
use crate::qam::{push_label, qam_eb_n0, QamGrid, QAM_BITS};
use crate::shaping::{assign_gray, build_code, modulate, Bits, ShapingCode};

/// Frames per batch for the shaped scheme.
pub const OM_BATCH: u64 = 256;
/// Frames per batch for QAM.
pub const QAM_BATCH: u64 = 16;
/// Symbols per QAM frame.
pub const QAM_FRAME_SYMBOLS: usize = 1000;
/// Mixed into the seed for tuning runs so the reported run is independent.
const TUNE_SALT: u64 = 0x7475_6e65_5f61_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    OmGrand,
    OmNoCorrect,
    Qam128,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::OmGrand => "om-grand",
            Scheme::OmNoCorrect => "om-nocorrect",
            Scheme::Qam128 => "qam128",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "om-grand" => Ok(Scheme::OmGrand),
            "om-nocorrect" => Ok(Scheme::OmNoCorrect),
            "qam128" => Ok(Scheme::Qam128),
            _ => domain(format!("unknown scheme {s:?}")),
        }
    }
}

/// Which ratio the SNR list gives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrAxis {
    EsN0,
    EbN0,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Stop once this many bit errors have been counted...
    pub min_bit_errors: u64,
    /// ...but never before this many bits.
    pub min_bits: u64,
    /// Hard cap on simulated bits.
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_bit_errors: 100,
            min_bits: 0,
            max_bits: 100_000_000,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_bit_errors == 0 || self.max_bits == 0 {
            return domain("stop rule bounds must be positive");
        }
        Ok(())
    }

    fn done(&self, bits: u64, errors: u64) -> bool {
        bits >= self.max_bits || (errors >= self.min_bit_errors && bits >= self.min_bits)
    }
}

/// How the shaped scheme picks its frame length at each SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameSizing {
    /// Indel model with parameter `a`, indel probability from `trials`
    /// one-shot transmissions.
    Model { a: f64, trials: u64 },
    /// Fixed number of symbols per frame.
    Fixed(usize),
    /// `a` chosen per point from the default grid by [`tune_a`]; the
    /// reported record is a fresh run at the chosen `a`.
    Tuned { trials: u64 },
}

impl Default for FrameSizing {
    fn default() -> Self {
        FrameSizing::Model {
            a: 0.05,
            trials: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scheme: Scheme,
    /// Required for the shaped schemes.
    pub constellation: Option<PathBuf>,
    pub axis: SnrAxis,
    pub snr_db: Vec<f64>,
    pub stop: StopRule,
    pub seed: u64,
    pub workers: usize,
    pub sizing: FrameSizing,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.stop.validate()?;
        if self.snr_db.is_empty() {
            return domain("SNR list is empty");
        }
        if self.snr_db.iter().any(|v| !v.is_finite()) {
            return domain("SNR values must be finite");
        }
        if self.workers == 0 {
            return domain("worker count must be positive");
        }
        if self.scheme != Scheme::Qam128 && self.constellation.is_none() {
            return domain("the shaped schemes need a constellation file");
        }
        match self.sizing {
            FrameSizing::Model { a, trials } if !(a > 0.0) || trials < 10_000 => {
                domain("frame sizing needs a > 0 and at least 10^4 trials")
            }
            FrameSizing::Tuned { trials } if trials < 10_000 => {
                domain("tuning needs at least 10^4 trials")
            }
            FrameSizing::Fixed(0) => domain("fixed frame length must be positive"),
            _ => Ok(()),
        }
    }
}

/// Counts for one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameCounts {
    pub symbols: u64,
    pub bits: u64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub indel: bool,
    pub correction_attempted: bool,
    pub correction_succeeded: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimRecord {
    pub es_n0_db: f64,
    pub eb_n0_db: f64,
    pub frames: u64,
    pub symbols: u64,
    pub bits: u64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub indel_events: u64,
    pub corrections_attempted: u64,
    pub corrections_succeeded: u64,
    pub ser: f64,
    pub ber: f64,
}

impl SimRecord {
    fn add(&mut self, c: &FrameCounts) {
        self.frames += 1;
        self.symbols += c.symbols;
        self.bits += c.bits;
        self.symbol_errors += c.symbol_errors;
        self.bit_errors += c.bit_errors;
        self.indel_events += c.indel as u64;
        self.corrections_attempted += c.correction_attempted as u64;
        self.corrections_succeeded += c.correction_succeeded as u64;
    }

    fn finish(&mut self) {
        self.ser = if self.symbols == 0 {
            0.0
        } else {
            self.symbol_errors as f64 / self.symbols as f64
        };
        self.ber = if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        };
    }

    /// Binomial standard error of `ber`.
    pub fn ber_std_err(&self) -> f64 {
        if self.bits == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.bits as f64).sqrt()
    }
}

pub const CSV_HEADER: &str = "es_n0_db,eb_n0_db,frames,symbols,bits,symbol_errors,bit_errors,indel_events,corrections_attempted,corrections_succeeded,ser,ber";

pub fn write_csv<W: Write>(mut w: W, records: &[SimRecord]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.es_n0_db,
            r.eb_n0_db,
            r.frames,
            r.symbols,
            r.bits,
            r.symbol_errors,
            r.bit_errors,
            r.indel_events,
            r.corrections_attempted,
            r.corrections_succeeded,
            r.ser,
            r.ber
        )?;
    }
    Ok(())
}

/// Bit errors between sent and recovered messages: mismatches over the
/// common prefix plus the length difference.
pub fn count_bit_errors(sent: &[bool], got: &[bool]) -> u64 {
    let common = sent.len().min(got.len());
    let mism = sent[..common]
        .iter()
        .zip(&got[..common])
        .filter(|(a, b)| a != b)
        .count();
    (mism + sent.len().abs_diff(got.len())) as u64
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for frame `frame` of SNR point `point`.
pub fn frame_rng(seed: u64, point: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(point)));
    rng.set_stream(frame);
    rng
}

/// Generator for per-point planning work, disjoint from every frame stream.
pub fn planning_rng(seed: u64, point: u64) -> ChaCha8Rng {
    frame_rng(seed, point, u64::MAX)
}

/// Constellation with the probabilities the code actually produces from
/// uniform bits, paired with the code. Without a code one is built from
/// the constellation's probabilities.
pub fn operating_link(
    cons: &Constellation,
    code: Option<ShapingCode>,
) -> Result<(Constellation, ShapingCode)> {
    let code = match code {
        Some(c) => c,
        None => assign_gray(&build_code(&cons.probabilities())?, cons)?,
    };
    if code.len() != cons.len() {
        return domain("code and constellation sizes differ");
    }
    let ops = cons.with_probabilities(&code.dyadic_probabilities())?;
    Ok((ops, code))
}

/// Reusable per-SNR state for the shaped scheme.
#[derive(Debug, Clone)]
pub struct OmFrameRunner<'a> {
    cons: &'a Constellation,
    code: &'a ShapingCode,
    receiver: Receiver,
    n0: f64,
    n_bits: usize,
    correct: bool,
}

impl<'a> OmFrameRunner<'a> {
    pub fn new(
        cons: &'a Constellation,
        code: &'a ShapingCode,
        n0: f64,
        n_bits: usize,
        correct: bool,
    ) -> Result<Self> {
        if code.len() != cons.len() {
            return domain("code and constellation sizes differ");
        }
        Ok(Self {
            cons,
            code,
            receiver: Receiver::new(cons, n0)?,
            n0,
            n_bits,
            correct,
        })
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<FrameCounts> {
        let message: Bits = (0..self.n_bits).map(|_| rng.random::<bool>()).collect();
        let frame = modulate(&message, self.code);
        let points = self.cons.points();
        let samples: Vec<ComplexSample> = frame
            .symbols
            .iter()
            .map(|&s| add_noise_n0(points[s].value, self.n0, rng))
            .collect();
        self.receive(&message, &frame.symbols, &samples)
    }

    /// Scores a frame whose samples are given.
    pub fn receive(
        &self,
        message: &[bool],
        sent: &[usize],
        samples: &[ComplexSample],
    ) -> Result<FrameCounts> {
        let rx = self
            .receiver
            .receive(samples, self.code, self.n_bits, self.correct)?;
        let symbol_errors = rx
            .demod
            .symbols
            .iter()
            .zip(sent)
            .filter(|(a, b)| a != b)
            .count() as u64;
        let outcome = rx.correction.outcome;
        let bit_errors = if outcome == CorrectionOutcome::Erasure {
            message.len() as u64
        } else {
            count_bit_errors(message, &rx.correction.bits)
        };
        let indel = outcome != CorrectionOutcome::Unchanged;
        Ok(FrameCounts {
            symbols: sent.len() as u64,
            bits: message.len() as u64,
            symbol_errors,
            bit_errors,
            indel,
            correction_attempted: indel && self.correct,
            correction_succeeded: matches!(outcome, CorrectionOutcome::Corrected { .. })
                && rx.correction.bits == message,
        })
    }
}

/// One shaped frame: uniform message of `plan.n_bits` bits, padded,
/// modulated, sent through the channel, demodulated and corrected.
pub fn run_frame<R: Rng + ?Sized>(
    plan: &FramePlan,
    cons: &Constellation,
    code: &ShapingCode,
    n0: f64,
    correct: bool,
    rng: &mut R,
) -> Result<FrameCounts> {
    OmFrameRunner::new(cons, code, n0, plan.n_bits, correct)?.run(rng)
}

fn run_batches<F>(stop: &StopRule, batch: u64, mut record: SimRecord, frame: F) -> Result<SimRecord>
where
    F: Fn(u64) -> Result<FrameCounts> + Sync,
{
    let mut next = 0u64;
    while !stop.done(record.bits, record.bit_errors) {
        let counts = (next..next + batch)
            .into_par_iter()
            .map(&frame)
            .collect::<Result<Vec<_>>>()?;
        for c in &counts {
            record.add(c);
        }
        next += batch;
    }
    record.finish();
    Ok(record)
}

/// Simulates the shaped scheme at one planned point.
pub fn run_om_point(
    cons: &Constellation,
    code: &ShapingCode,
    plan: &FramePlan,
    correct: bool,
    stop: &StopRule,
    seed: u64,
    point: u64,
) -> Result<SimRecord> {
    stop.validate()?;
    let n0 = cons.average_energy() / plan.es_n0;
    let runner = OmFrameRunner::new(cons, code, n0, plan.n_bits, correct)?;
    let record = SimRecord {
        es_n0_db: plan.es_n0_db(),
        eb_n0_db: plan.eb_n0_db(),
        ..Default::default()
    };
    run_batches(stop, OM_BATCH, record, |f| {
        runner.run(&mut frame_rng(seed, point, f))
    })
}

/// Simulates uncoded QAM at one Es/N0.
pub fn run_qam_point(
    grid: &QamGrid,
    es_n0: f64,
    stop: &StopRule,
    seed: u64,
    point: u64,
) -> Result<SimRecord> {
    stop.validate()?;
    if !(es_n0 > 0.0) {
        return domain("Es/N0 must be positive");
    }
    let n0 = grid.es() / es_n0;
    let record = SimRecord {
        es_n0_db: ratio_to_db(es_n0),
        eb_n0_db: ratio_to_db(qam_eb_n0(es_n0)),
        ..Default::default()
    };
    run_batches(stop, QAM_BATCH, record, |f| {
        let mut rng = frame_rng(seed, point, f);
        let mut c = FrameCounts {
            symbols: QAM_FRAME_SYMBOLS as u64,
            bits: (QAM_FRAME_SYMBOLS * QAM_BITS) as u64,
            ..Default::default()
        };
        let mut sent = Bits::with_capacity(QAM_BITS);
        let mut got = Bits::with_capacity(QAM_BITS);
        for _ in 0..QAM_FRAME_SYMBOLS {
            let label: u8 = rng.random_range(0..128);
            let y = add_noise_n0(grid.point_for_label(label), n0, &mut rng);
            let decided = grid.labels()[grid.nearest(y)];
            if decided != label {
                c.symbol_errors += 1;
                sent.clear();
                got.clear();
                push_label(&mut sent, label);
                push_label(&mut got, decided);
                c.bit_errors += count_bit_errors(&sent, &got);
            }
        }
        Ok(c)
    })
}

/// Records plus `key=value` metadata describing how they were produced.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<SimRecord>,
    pub plans: Vec<Option<FramePlan>>,
    pub metadata: Vec<(String, String)>,
}

impl SweepOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_csv(w, &self.records)
    }

    pub fn write_metadata<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(w, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Plans the shaped scheme at one SNR value.
pub fn plan_point(
    cons: &Constellation,
    code: &ShapingCode,
    axis: SnrAxis,
    snr_db: f64,
    sizing: FrameSizing,
    rng: &mut ChaCha8Rng,
) -> Result<FramePlan> {
    let snr = db_to_ratio(snr_db);
    match (axis, sizing) {
        (SnrAxis::EsN0, FrameSizing::Fixed(n_s)) => {
            plan_with_ns(cons, code, snr, n_s, f64::NAN, None)
        }
        (SnrAxis::EbN0, FrameSizing::Fixed(n_s)) => plan_with_ns(
            cons,
            code,
            es_n0_for(snr, n_s as f64, cons)?,
            n_s,
            f64::NAN,
            None,
        ),
        (SnrAxis::EsN0, FrameSizing::Model { a, trials }) => {
            let indel = estimate_p_indel(cons, code, snr, trials, rng)?;
            plan_frame(cons, code, snr, a, indel)
        }
        (SnrAxis::EbN0, FrameSizing::Model { a, trials }) => {
            plan_for_eb_n0(cons, code, snr, a, trials, rng)
        }
        (_, FrameSizing::Tuned { .. }) => domain("tuned sizing is resolved by tune_a"),
    }
}

/// One candidate evaluated by [`tune_a`].
#[derive(Debug, Clone)]
pub struct TuneCandidate {
    pub a: f64,
    pub plan: FramePlan,
    pub record: SimRecord,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best: f64,
    pub candidates: Vec<TuneCandidate>,
}

impl TuneResult {
    pub fn best_candidate(&self) -> &TuneCandidate {
        self.candidates
            .iter()
            .find(|c| c.a == self.best)
            .expect("best is one of the candidates")
    }
}

/// Picks the `a` in `a_grid` with the lowest simulated BER at one SNR
/// point; ties go to the smaller `a`. Every candidate is planned from the
/// same planning stream and simulated on the same frame streams.
#[allow(clippy::too_many_arguments)]
pub fn tune_a(
    cons: &Constellation,
    code: &ShapingCode,
    axis: SnrAxis,
    snr_db: f64,
    a_grid: &[f64],
    trials: u64,
    stop: &StopRule,
    seed: u64,
    point: u64,
) -> Result<TuneResult> {
    if a_grid.is_empty() {
        return domain("a grid is empty");
    }
    let mut candidates = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let sizing = FrameSizing::Model { a, trials };
        let plan = plan_point(
            cons,
            code,
            axis,
            snr_db,
            sizing,
            &mut planning_rng(seed, point),
        )?;
        let record = run_om_point(cons, code, &plan, true, stop, seed, point)?;
        candidates.push(TuneCandidate { a, plan, record });
    }
    let best = candidates
        .iter()
        .min_by(|x, y| {
            x.record
                .ber
                .total_cmp(&y.record.ber)
                .then(x.a.total_cmp(&y.a))
        })
        .map(|c| c.a)
        .expect("non-empty");
    Ok(TuneResult { best, candidates })
}

/// Runs a full sweep in a pool of `config.workers` threads.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Domain(e.to_string()))?;
    let mut meta = vec![
        ("scheme".to_string(), config.scheme.to_string()),
        ("seed".to_string(), config.seed.to_string()),
        ("workers".to_string(), config.workers.to_string()),
        (
            "stop_min_bit_errors".to_string(),
            config.stop.min_bit_errors.to_string(),
        ),
        (
            "stop_min_bits".to_string(),
            config.stop.min_bits.to_string(),
        ),
        (
            "stop_max_bits".to_string(),
            config.stop.max_bits.to_string(),
        ),
        (
            "snr_axis".to_string(),
            match config.axis {
                SnrAxis::EsN0 => "es_n0_db",
                SnrAxis::EbN0 => "eb_n0_db",
            }
            .to_string(),
        ),
    ];
    pool.install(|| match config.scheme {
        Scheme::Qam128 => {
            let grid = QamGrid::cross128(1.0)?;
            meta.push(("qam_frame_symbols".into(), QAM_FRAME_SYMBOLS.to_string()));
            let mut records = Vec::new();
            for (k, &db) in config.snr_db.iter().enumerate() {
                let es = match config.axis {
                    SnrAxis::EsN0 => db_to_ratio(db),
                    SnrAxis::EbN0 => db_to_ratio(db) * QAM_BITS as f64,
                };
                records.push(run_qam_point(
                    &grid,
                    es,
                    &config.stop,
                    config.seed,
                    k as u64,
                )?);
            }
            let plans = vec![None; records.len()];
            Ok(SweepOutput {
                records,
                plans,
                metadata: meta,
            })
        }
        Scheme::OmGrand | Scheme::OmNoCorrect => {
            let path = config.constellation.as_ref().expect("validated");
            let (cons, code) = crate::io::read_constellation_path(path)?;
            let (ops, code) = operating_link(&cons, code)?;
            meta.push(("constellation".into(), path.display().to_string()));
            meta.push((
                "design_converged".into(),
                cons.design_converged
                    .map_or("unknown".into(), |c| c.to_string()),
            ));
            match config.sizing {
                FrameSizing::Model { a, trials } => {
                    meta.push(("sizing".into(), "model".into()));
                    meta.push(("a".into(), a.to_string()));
                    meta.push(("p_indel_trials".into(), trials.to_string()));
                }
                FrameSizing::Fixed(n) => {
                    meta.push(("sizing".into(), "fixed".into()));
                    meta.push(("n_symbols".into(), n.to_string()));
                }
                FrameSizing::Tuned { trials } => {
                    meta.push(("sizing".into(), "tuned".into()));
                    meta.push(("a_grid".into(), format!("{DEFAULT_A_GRID:?}")));
                    meta.push(("p_indel_trials".into(), trials.to_string()));
                }
            }
            let correct = config.scheme == Scheme::OmGrand;
            let mut records = Vec::new();
            let mut plans = Vec::new();
            for (k, &db) in config.snr_db.iter().enumerate() {
                let sizing = match config.sizing {
                    FrameSizing::Tuned { trials } => {
                        let tuned = tune_a(
                            &ops,
                            &code,
                            config.axis,
                            db,
                            &DEFAULT_A_GRID,
                            trials,
                            &config.stop,
                            config.seed ^ TUNE_SALT,
                            k as u64,
                        )?;
                        meta.push((format!("point{k}.a"), tuned.best.to_string()));
                        FrameSizing::Model {
                            a: tuned.best,
                            trials,
                        }
                    }
                    other => other,
                };
                let plan = plan_point(
                    &ops,
                    &code,
                    config.axis,
                    db,
                    sizing,
                    &mut planning_rng(config.seed, k as u64),
                )?;
                meta.push((format!("point{k}.n_symbols"), plan.n_symbols.to_string()));
                meta.push((format!("point{k}.n_bits"), plan.n_bits.to_string()));
                meta.push((format!("point{k}.p_indel"), plan.p_indel.to_string()));
                meta.push((
                    format!("point{k}.p_indel_censored"),
                    plan.p_indel_censored.to_string(),
                ));
                meta.push((format!("point{k}.rate"), plan.rate.to_string()));
                records.push(run_om_point(
                    &ops,
                    &code,
                    &plan,
                    correct,
                    &config.stop,
                    config.seed,
                    k as u64,
                )?);
                plans.push(Some(plan));
            }
            Ok(SweepOutput {
                records,
                plans,
                metadata: meta,
            })
        }
    })
}
