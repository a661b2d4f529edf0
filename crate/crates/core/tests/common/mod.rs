//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerics: densities, quadrature, capacity and
//! estimators are recomputed from first principles.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::OnceLock;

use omgrand_core::sim::operating_link;
use omgrand_core::{
    build_constellation, design_dacp_with, AmplitudeGrid, ChannelParams, Constellation, DacpDesign,
    DesignObjective, ShapingCode,
};
use rand::Rng;

/// ln I0(z) from the integral form I0(z) = (1/pi) ∫_0^pi e^{z cos t} dt,
/// written as z + ln((1/pi) ∫ e^{z (cos t - 1)} dt) so it never overflows.
pub fn log_i0_integral(z: f64) -> f64 {
    let n = 20_000;
    let h = PI / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let t = k as f64 * h;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += w * (z * (t.cos() - 1.0)).exp();
    }
    z + (acc * h / PI).ln()
}

/// Rician amplitude density with total complex noise variance n0.
pub fn rice_pdf(r: f64, a: f64, n0: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let z = 2.0 * a * r / n0;
    let log = (2.0 * r / n0).ln() - (r * r + a * a) / n0 + log_i0_fast(z);
    log.exp()
}

/// Cheaper ln I0 for the oracle densities: Simpson on 400 panels of the
/// same integral, plenty for the smooth integrand.
fn log_i0_fast(z: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let t = k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (z * (t.cos() - 1.0)).exp();
    }
    z + (acc * h / 3.0 / PI).ln()
}

/// Discretized amplitude channel: output bins of width `h` on [0, rmax].
pub struct DiscreteChannel {
    pub amps: Vec<f64>,
    /// Row-stochastic transition matrix.
    pub w: Vec<Vec<f64>>,
    /// Per-input bonus added to the information (phase term), nats.
    pub bonus: Vec<f64>,
}

impl DiscreteChannel {
    pub fn amplitude(amps: &[f64], n0: f64) -> Self {
        let sd = (n0 / 2.0).sqrt();
        let rmax = amps.iter().cloned().fold(0.0, f64::max) + 12.0 * sd;
        let h = sd / 40.0;
        let bins = (rmax / h).ceil() as usize;
        let w = amps
            .iter()
            .map(|&a| {
                let mut row: Vec<f64> = (0..bins)
                    .map(|j| rice_pdf((j as f64 + 0.5) * h, a, n0) * h)
                    .collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                row
            })
            .collect();
        Self {
            amps: amps.to_vec(),
            w,
            bonus: vec![0.0; amps.len()],
        }
    }

    /// Same channel, scored by the complex-plane information: each input
    /// also carries h(Y | a) - h(N) from its uniform phase.
    pub fn complex(amps: &[f64], n0: f64) -> Self {
        let mut ch = Self::amplitude(amps, n0);
        ch.bonus = amps.iter().map(|&a| phase_entropy_gain(a, n0)).collect();
        ch
    }

    fn divergences(&self, p: &[f64]) -> Vec<f64> {
        let m = self.w[0].len();
        let q: Vec<f64> = (0..m)
            .map(|j| self.w.iter().zip(p).map(|(row, pi)| pi * row[j]).sum())
            .collect();
        self.w
            .iter()
            .zip(&self.bonus)
            .map(|(row, b)| {
                b + row
                    .iter()
                    .zip(&q)
                    .filter(|(wij, _)| **wij > 0.0)
                    .map(|(wij, qj)| wij * (wij / qj).ln())
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn information(&self, p: &[f64]) -> f64 {
        self.divergences(p)
            .iter()
            .zip(p)
            .map(|(d, pi)| d * pi)
            .sum()
    }
}

/// h(Y | A = a) - h(N) for Y = a e^{j theta} + N, theta uniform, computed
/// by midpoint sums in the radial variable.
pub fn phase_entropy_gain(a: f64, n0: f64) -> f64 {
    let sd = (n0 / 2.0).sqrt();
    let rmax = a + 12.0 * sd;
    let h = sd / 200.0;
    let n = (rmax / h).ceil() as usize;
    let mut hy = 0.0;
    for j in 0..n {
        let r = (j as f64 + 0.5) * h;
        let f = rice_pdf(r, a, n0);
        if f > 0.0 {
            // Planar density f / (2 pi r); entropy integrand over the plane.
            hy -= f * (f / (2.0 * PI * r)).ln() * h;
        }
    }
    (hy - (PI * std::f64::consts::E * n0).ln()).max(0.0)
}

/// Blahut–Arimoto with an average-power constraint, by bisection on the
/// Lagrange multiplier. Returns (capacity in nats, input distribution).
pub fn blahut_arimoto(ch: &DiscreteChannel, avg_power: f64) -> (f64, Vec<f64>) {
    let cost: Vec<f64> = ch.amps.iter().map(|a| a * a).collect();
    let run = |lambda: f64| -> Vec<f64> {
        let n = ch.amps.len();
        let mut p = vec![1.0 / n as f64; n];
        for _ in 0..20_000 {
            let d = ch.divergences(&p);
            let e: Vec<f64> = d.iter().zip(&cost).map(|(di, c)| di - lambda * c).collect();
            let mx = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut next: Vec<f64> = p
                .iter()
                .zip(&e)
                .map(|(pi, ei)| pi * (ei - mx).exp())
                .collect();
            let s: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= s);
            let avg: f64 = e.iter().zip(&p).map(|(ei, pi)| ei * pi).sum();
            p = next;
            // Standard BA bound: max_i e_i - sum_i p_i e_i bounds the gap.
            if mx - avg < 1e-9 {
                break;
            }
        }
        p
    };
    let power = |p: &[f64]| p.iter().zip(&cost).map(|(pi, c)| pi * c).sum::<f64>();
    let p0 = run(0.0);
    if power(&p0) <= avg_power {
        return (ch.information(&p0), p0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while power(&run(hi)) > avg_power {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if power(&run(mid)) > avg_power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = run(hi);
    (ch.information(&p), p)
}

/// Maximizes sum p_i psi_i over {p >= 0, sum p = 1, sum p a_i^2 <= s2} by
/// listing the vertices of that polytope: feasible point masses and the
/// two-point mixtures that meet the power constraint with equality.
pub fn vertex_max(psi: &[f64], amps: &[f64], s2: f64) -> (f64, Vec<f64>) {
    let n = amps.len();
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let mut consider = |p: Vec<f64>| {
        let v: f64 = p.iter().zip(psi).map(|(a, b)| a * b).sum();
        if v > best.0 {
            best = (v, p);
        }
    };
    for i in 0..n {
        if amps[i] * amps[i] <= s2 + 1e-12 {
            let mut p = vec![0.0; n];
            p[i] = 1.0;
            consider(p);
        }
    }
    for i in 0..n {
        for j in 0..n {
            let (ei, ej) = (amps[i] * amps[i], amps[j] * amps[j]);
            if ei < s2 && ej > s2 {
                let t = (ej - s2) / (ej - ei);
                let mut p = vec![0.0; n];
                p[i] = t;
                p[j] = 1.0 - t;
                consider(p);
            }
        }
    }
    best
}

/// max over the 3-simplex grid (step `h`) of min_k cut_k(p), subject to
/// the power constraint.
pub fn simplex_grid_max_min(cuts: &[Vec<f64>], amps: &[f64; 3], s2: f64, h: f64) -> f64 {
    let steps = (1.0 / h).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let p = [i as f64 * h, j as f64 * h, (steps - i - j) as f64 * h];
            let pw: f64 = p.iter().zip(amps).map(|(pi, a)| pi * a * a).sum();
            if pw > s2 + 1e-12 {
                continue;
            }
            let v = cuts
                .iter()
                .map(|c| c.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            best = best.max(v);
        }
    }
    best
}

/// Largest N in 1..=cap with P(>= 2 of N) <= a p, by direct scan with the
/// recurrence P(0) = q^N, P(1) = N p q^{N-1}; `None` when N = 1 already
/// fails.
pub fn scan_ns(p: f64, a: f64, cap: usize) -> Option<usize> {
    let q = 1.0 - p;
    let mut best = None;
    let mut qn = 1.0; // q^{N-1}
    for n in 1..=cap {
        let qn_prev = qn;
        qn *= q;
        let tail = 1.0 - qn - n as f64 * p * qn_prev;
        if tail <= a * p {
            best = Some(n);
        } else if best.is_some() {
            break;
        }
    }
    best
}

/// Duplicate indel-probability estimator: draws a symbol by inverse CDF,
/// adds noise by Box–Muller and picks the MAP point exhaustively.
pub fn indel_oracle<R: Rng>(
    cons: &Constellation,
    code: &ShapingCode,
    es_n0: f64,
    trials: u64,
    rng: &mut R,
) -> f64 {
    let pts: Vec<(f64, f64)> = cons
        .points()
        .iter()
        .map(|p| (p.value.re, p.value.im))
        .collect();
    let probs: Vec<f64> = cons.points().iter().map(|p| p.probability).collect();
    let es: f64 = pts
        .iter()
        .zip(&probs)
        .map(|((x, y), p)| p * (x * x + y * y))
        .sum();
    let n0 = es / es_n0;
    let sd = (n0 / 2.0).sqrt();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let lens: Vec<usize> = (0..pts.len()).map(|i| code.codeword(i).len()).collect();
    let mut events = 0u64;
    for _ in 0..trials {
        let u: f64 = rng.random::<f64>() * acc;
        let s = cdf.partition_point(|c| *c < u).min(pts.len() - 1);
        let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
        let rad = (-2.0 * u1.ln()).sqrt() * sd;
        let y = (
            pts[s].0 + rad * (2.0 * PI * u2).cos(),
            pts[s].1 + rad * (2.0 * PI * u2).sin(),
        );
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, ((x, yy), p)) in pts.iter().zip(&probs).enumerate() {
            let d2 = (y.0 - x).powi(2) + (y.1 - yy).powi(2);
            let score = p.ln() - d2 / n0;
            if score > best.0 {
                best = (score, k);
            }
        }
        if lens[best.1] != lens[s] {
            events += 1;
        }
    }
    events as f64 / trials as f64
}

/// Standard normal upper tail via the complementary error function from
/// statrs.
pub fn q_tail(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Eb/N0 (dB) where a log-BER curve crosses `target`, by linear
/// interpolation of log10(BER) between the bracketing points.
pub fn crossing_db(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    points.windows(2).find_map(|w| {
        let (x0, b0) = w[0];
        let (x1, b1) = w[1];
        if b0 <= 0.0 || b1 <= 0.0 {
            return None;
        }
        let (l0, l1) = (b0.log10(), b1.log10());
        if (l0 - lt) * (l1 - lt) <= 0.0 && l0 != l1 {
            Some(x0 + (lt - l0) * (x1 - x0) / (l1 - l0))
        } else {
            None
        }
    })
}

pub const REF_STEP: f64 = 0.6;
pub const REF_LEVELS: usize = 11;
pub const REF_N0: f64 = 0.01;
pub const REF_POWER: f64 = 4.0;

pub fn reference_grid() -> AmplitudeGrid {
    AmplitudeGrid::uniform(REF_STEP, REF_LEVELS).unwrap()
}

pub fn reference_params() -> ChannelParams {
    ChannelParams::new(REF_N0, REF_STEP * (REF_LEVELS - 1) as f64, REF_POWER).unwrap()
}

pub fn reference_design(objective: DesignObjective) -> &'static DacpDesign {
    static AMP: OnceLock<DacpDesign> = OnceLock::new();
    static CPX: OnceLock<DacpDesign> = OnceLock::new();
    let cell = match objective {
        DesignObjective::Amplitude => &AMP,
        DesignObjective::Complex => &CPX,
    };
    cell.get_or_init(|| {
        design_dacp_with(&reference_grid(), &reference_params(), 1e-4, 200, objective).unwrap()
    })
}

/// 128-point constellation of the reference setting, its code, and the
/// constellation re-weighted to the probabilities the code produces.
pub struct ReferenceLink {
    pub design: Constellation,
    pub operating: Constellation,
    pub code: ShapingCode,
}

pub fn reference_link(objective: DesignObjective) -> &'static ReferenceLink {
    static AMP: OnceLock<ReferenceLink> = OnceLock::new();
    static CPX: OnceLock<ReferenceLink> = OnceLock::new();
    let cell = match objective {
        DesignObjective::Amplitude => &AMP,
        DesignObjective::Complex => &CPX,
    };
    cell.get_or_init(|| {
        let d = reference_design(objective);
        let design = build_constellation(&d.distribution, 128).unwrap();
        let (operating, code) = operating_link(&design, None).unwrap();
        ReferenceLink {
            design,
            operating,
            code,
        }
    })
}
