//! Cutting-plane design of the input amplitude distribution.
//!
//! The amplitude channel maps a ring amplitude `a` to the received amplitude
//! `r` through the Rician law. For a reference output density `q`, the
//! sensitivity `psi(a) = D(f(.|a) || q)` is linear in the input distribution
//! and upper-bounds mutual information, so each iterate contributes one
//! linear cut. The relaxed problem `max c  s.t.  sum_a p(a) psi_i(a) >= c`
//! is solved by the dense simplex in [`simplex`].

pub mod simplex;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::channel::{rician_log_density, ChannelParams};
use crate::error::{domain, Error, Result};
use simplex::{Constraint, LinearProgram, Relation};

/// Log-densities below this are treated as exact zeros (`0 ln 0 = 0`).
const LOG_DENSITY_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

const MAX_PIVOTS: usize = 200_000;

/// Fixed, strictly increasing set of ring amplitudes. The largest one is
/// the peak amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeGrid {
    amplitudes: Vec<f64>,
}

impl AmplitudeGrid {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return domain("amplitude grid is empty");
        }
        if amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return domain("amplitudes must be finite and non-negative");
        }
        if amplitudes.windows(2).any(|w| w[1] <= w[0]) {
            return domain("amplitudes must be strictly increasing");
        }
        if *amplitudes.last().unwrap() <= 0.0 {
            return domain("peak amplitude must be positive");
        }
        Ok(Self { amplitudes })
    }

    /// `{0, step, 2 step, ..., (count - 1) step}`.
    pub fn uniform(step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || count < 2 {
            return domain("uniform grid needs step > 0 and at least two levels");
        }
        Self::new((0..count).map(|k| step * k as f64).collect())
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn peak(&self) -> f64 {
        *self.amplitudes.last().unwrap()
    }
}

/// Probability mass over the rings of an [`AmplitudeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DacpDistribution {
    grid: AmplitudeGrid,
    probs: Vec<f64>,
}

impl DacpDistribution {
    pub fn new(grid: AmplitudeGrid, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != grid.len() {
            return domain(format!(
                "{} probabilities for {} amplitudes",
                probs.len(),
                grid.len()
            ));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return domain("probabilities must be finite and non-negative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("probabilities sum to {total}"));
        }
        Ok(Self { grid, probs })
    }

    /// Clamps negative round-off and renormalizes before validating.
    pub fn from_unnormalized(grid: AmplitudeGrid, probs: Vec<f64>) -> Result<Self> {
        let clean: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
        let total: f64 = clean.iter().sum();
        if !(total > 0.0) {
            return domain("probabilities have no positive mass");
        }
        Self::new(grid, clean.iter().map(|p| p / total).collect())
    }

    pub fn point_mass(grid: AmplitudeGrid, index: usize) -> Result<Self> {
        let mut probs = vec![0.0; grid.len()];
        *probs
            .get_mut(index)
            .ok_or_else(|| Error::Domain(format!("index {index} outside grid")))? = 1.0;
        Self::new(grid, probs)
    }

    /// Uniform over the amplitudes with `a^2 <= avg_power`.
    pub fn uniform_feasible(grid: AmplitudeGrid, avg_power: f64) -> Result<Self> {
        let feasible: Vec<bool> = grid
            .amplitudes()
            .iter()
            .map(|a| a * a <= avg_power)
            .collect();
        let count = feasible.iter().filter(|f| **f).count();
        if count == 0 {
            return domain("no amplitude satisfies the power constraint");
        }
        let probs = feasible
            .iter()
            .map(|&f| if f { 1.0 / count as f64 } else { 0.0 })
            .collect();
        Self::new(grid, probs)
    }

    pub fn grid(&self) -> &AmplitudeGrid {
        &self.grid
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `sum p(a) a^2`.
    pub fn power(&self) -> f64 {
        self.grid
            .amplitudes()
            .iter()
            .zip(&self.probs)
            .map(|(a, p)| p * a * a)
            .sum()
    }

    /// Drops zero-probability levels.
    pub fn support(&self) -> Result<Self> {
        let (amps, probs): (Vec<f64>, Vec<f64>) = self
            .grid
            .amplitudes()
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(a, p)| (*a, *p))
            .unzip();
        Self::new(AmplitudeGrid::new(amps)?, probs)
    }
}

/// Trapezoidal quadrature nodes on `[0, hi]`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn trapezoid(hi: f64, max_step: f64) -> Result<Self> {
        if !(hi > 0.0 && max_step > 0.0) {
            return domain("quadrature needs a positive range and step");
        }
        let n = (hi / max_step).ceil().max(1.0) as usize;
        let h = hi / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let mut weights = vec![h; n + 1];
        weights[0] = 0.5 * h;
        weights[n] = 0.5 * h;
        Ok(Self { nodes, weights })
    }

    /// Covers `[0, M + 8 sigma]` with step `min(sigma / 10, M / 1000)`.
    pub fn for_channel(peak: f64, n0: f64) -> Result<Self> {
        let sigma = (n0 / 2.0).sqrt();
        Self::trapezoid(peak + 8.0 * sigma, (sigma / 10.0).min(peak / 1000.0))
    }

    /// Refines the node spacing by an integer factor over the same range.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let hi = *self.nodes.last().unwrap();
        let step = hi / (self.nodes.len() - 1) as f64 / factor as f64;
        Self::trapezoid(hi, step * (1.0 + 1e-12))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Output amplitude density on the quadrature nodes, stored as logs.
#[derive(Debug, Clone)]
pub struct OutputDensity {
    log_q: Vec<f64>,
}

impl OutputDensity {
    pub fn from_log(log_q: Vec<f64>) -> Self {
        Self { log_q }
    }

    pub fn from_density(q: &[f64]) -> Self {
        Self {
            log_q: q.iter().map(|v| v.ln()).collect(),
        }
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_q
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_q.iter().map(|v| v.exp()).collect()
    }
}

/// One linear cut: the sensitivity at every grid amplitude (nats).
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub psi: Vec<f64>,
}

impl Cut {
    pub fn value(&self, probs: &[f64]) -> f64 {
        self.psi.iter().zip(probs).map(|(s, p)| s * p).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub upper_bound: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignTrace {
    pub entries: Vec<TraceEntry>,
}

impl DesignTrace {
    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }
}

/// Result of [`design_dacp`].
#[derive(Debug, Clone)]
pub struct DacpDesign {
    pub distribution: DacpDistribution,
    pub params: ChannelParams,
    pub trace: DesignTrace,
    pub converged: bool,
    /// Mutual information of `distribution`, nats.
    pub mutual_information: f64,
    /// Best upper bound on capacity seen, nats.
    pub upper_bound: f64,
    pub objective: DesignObjective,
}

/// The Rician amplitude channel restricted to a grid, with its law
/// precomputed on a quadrature.
#[derive(Debug, Clone)]
pub struct AmplitudeChannel {
    grid: AmplitudeGrid,
    n0: f64,
    quad: Quadrature,
    log_law: Vec<Vec<f64>>,
    objective: DesignObjective,
    /// Added to every cut entry; zero for the amplitude objective.
    phase_info: Vec<f64>,
}

/// Which mutual information the design maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DesignObjective {
    /// `I(A_X; A_Y)` of the amplitude channel alone.
    #[default]
    Amplitude,
    /// `I(X; Y)` of the complex channel with uniform phase on each ring.
    /// This is the amplitude information plus `I(theta; Y | A_X = a)`, a
    /// term that depends on `a` only and so enters every cut unchanged.
    Complex,
}

impl AmplitudeChannel {
    pub fn new(grid: AmplitudeGrid, n0: f64, quad: Quadrature) -> Result<Self> {
        let log_law = grid
            .amplitudes()
            .par_iter()
            .map(|&a| log_law_on(a, n0, &quad))
            .collect::<Result<Vec<_>>>()?;
        let phase_info = vec![0.0; grid.len()];
        Ok(Self {
            grid,
            n0,
            quad,
            log_law,
            objective: DesignObjective::Amplitude,
            phase_info,
        })
    }

    pub fn with_objective(mut self, objective: DesignObjective) -> Self {
        self.phase_info = match objective {
            DesignObjective::Amplitude => vec![0.0; self.grid.len()],
            DesignObjective::Complex => self
                .log_law
                .iter()
                .map(|l| phase_information(l, self.n0, &self.quad))
                .collect(),
        };
        self.objective = objective;
        self
    }

    pub fn objective(&self) -> DesignObjective {
        self.objective
    }

    /// `I(theta; Y | A_X = a)` per grid amplitude, nats. All zero under the
    /// amplitude objective.
    pub fn phase_information(&self) -> &[f64] {
        &self.phase_info
    }

    /// Uses the default quadrature for the grid's peak.
    pub fn with_default_quadrature(grid: AmplitudeGrid, n0: f64) -> Result<Self> {
        let quad = Quadrature::for_channel(grid.peak(), n0)?;
        Self::new(grid, n0, quad)
    }

    pub fn grid(&self) -> &AmplitudeGrid {
        &self.grid
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    fn check(&self, p: &DacpDistribution) -> Result<()> {
        if p.grid() != &self.grid {
            return domain("distribution grid differs from the channel grid");
        }
        Ok(())
    }

    pub fn output_density(&self, p: &DacpDistribution) -> Result<OutputDensity> {
        self.check(p)?;
        Ok(mixture(&self.log_law, p.probs(), self.quad.nodes().len()))
    }

    /// Sensitivity of the `index`-th grid amplitude against `q`.
    pub fn sensitivity(&self, index: usize, q: &OutputDensity) -> Result<f64> {
        kl_to(
            &self.log_law[index],
            q,
            &self.quad,
            self.grid.amplitudes()[index],
        )
    }

    pub fn cut(&self, q: &OutputDensity) -> Result<Cut> {
        let psi = (0..self.grid.len())
            .into_par_iter()
            .map(|i| Ok(self.sensitivity(i, q)? + self.phase_info[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Cut { psi })
    }

    /// Mutual information (nats) together with the cut generated at `p`.
    pub fn information_and_cut(&self, p: &DacpDistribution) -> Result<(f64, Cut)> {
        let q = self.output_density(p)?;
        let cut = self.cut(&q)?;
        Ok((cut.value(p.probs()), cut))
    }

    pub fn mutual_information(&self, p: &DacpDistribution) -> Result<f64> {
        Ok(self.information_and_cut(p)?.0)
    }
}

fn log_law_on(a: f64, n0: f64, quad: &Quadrature) -> Result<Vec<f64>> {
    quad.nodes()
        .iter()
        .map(|&r| rician_log_density(r, a, n0))
        .collect()
}

/// `h(Y | A_X = a) - h(N)` for uniform phase: the output entropy in the
/// plane is `h(R) + E[ln(2 pi R)]`, and `h(N) = ln(pi e n0)`.
fn phase_information(log_f: &[f64], n0: f64, quad: &Quadrature) -> f64 {
    let mut acc = 0.0;
    for ((lf, r), w) in log_f.iter().zip(quad.nodes()).zip(quad.weights()) {
        if *lf < LOG_DENSITY_FLOOR || *r == 0.0 {
            continue;
        }
        acc += w * lf.exp() * ((2.0 * PI * r).ln() - lf);
    }
    (acc - (PI * std::f64::consts::E * n0).ln()).max(0.0)
}

fn mixture(log_law: &[Vec<f64>], probs: &[f64], len: usize) -> OutputDensity {
    let active: Vec<(f64, &Vec<f64>)> = probs
        .iter()
        .zip(log_law)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, l)| (p.ln(), l))
        .collect();
    let log_q = (0..len)
        .map(|j| {
            let m = active
                .iter()
                .map(|(lp, l)| lp + l[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + active
                .iter()
                .map(|(lp, l)| (lp + l[j] - m).exp())
                .sum::<f64>()
                .ln()
        })
        .collect();
    OutputDensity { log_q }
}

fn kl_to(log_f: &[f64], q: &OutputDensity, quad: &Quadrature, amplitude: f64) -> Result<f64> {
    if q.log_q.len() != log_f.len() {
        return domain("output density and quadrature have different lengths");
    }
    let mut acc = 0.0;
    for ((lf, lq), w) in log_f.iter().zip(&q.log_q).zip(quad.weights()) {
        if *lf < LOG_DENSITY_FLOOR {
            continue;
        }
        if !lq.is_finite() {
            return Err(Error::NumericalSupport { amplitude });
        }
        acc += w * lf.exp() * (lf - lq);
    }
    Ok(acc)
}

/// Mixture output density `q(r) = sum_a p(a) f(r | a)` on the nodes of `quad`.
pub fn output_density(p: &DacpDistribution, n0: f64, quad: &Quadrature) -> Result<OutputDensity> {
    if quad.nodes().is_empty() {
        return domain("empty quadrature grid");
    }
    let log_law = p
        .grid()
        .amplitudes()
        .iter()
        .map(|&a| log_law_on(a, n0, quad))
        .collect::<Result<Vec<_>>>()?;
    Ok(mixture(&log_law, p.probs(), quad.nodes().len()))
}

/// `psi(a) = D(f(.|a) || q)` for an arbitrary amplitude.
pub fn sensitivity(a: f64, n0: f64, q: &OutputDensity, quad: &Quadrature) -> Result<f64> {
    kl_to(&log_law_on(a, n0, quad)?, q, quad, a)
}

/// Solves `max c` over the cuts, the probability simplex and the average
/// power constraint. Returns the maximizing distribution and `c`, where `c`
/// is recomputed as the smallest cut value at the returned distribution.
pub fn lp_max_min(
    cuts: &[Cut],
    grid: &AmplitudeGrid,
    avg_power: f64,
) -> Result<(DacpDistribution, f64)> {
    if cuts.is_empty() {
        return domain("at least one cut is required");
    }
    let n = grid.len();
    if cuts.iter().any(|c| c.psi.len() != n) {
        return domain("cut length differs from grid size");
    }
    // Variables: p_0..p_{n-1}, c+, c-.
    let mut objective = vec![0.0; n + 2];
    objective[n] = 1.0;
    objective[n + 1] = -1.0;
    let mut constraints = Vec::with_capacity(cuts.len() + 2);
    for cut in cuts {
        let mut coeffs: Vec<f64> = cut.psi.iter().map(|s| -s).collect();
        coeffs.push(1.0);
        coeffs.push(-1.0);
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs: 0.0,
        });
    }
    let mut sum = vec![1.0; n];
    sum.extend([0.0, 0.0]);
    constraints.push(Constraint {
        coeffs: sum,
        relation: Relation::Eq,
        rhs: 1.0,
    });
    let mut power: Vec<f64> = grid.amplitudes().iter().map(|a| a * a).collect();
    power.extend([0.0, 0.0]);
    constraints.push(Constraint {
        coeffs: power,
        relation: Relation::Le,
        rhs: avg_power,
    });

    let sol = simplex::solve(
        &LinearProgram {
            objective,
            constraints,
        },
        MAX_PIVOTS,
    )?;
    let p = DacpDistribution::from_unnormalized(grid.clone(), sol.x[..n].to_vec())?;
    let c = cuts
        .iter()
        .map(|cut| cut.value(p.probs()))
        .fold(f64::INFINITY, f64::min);
    Ok((p, c))
}

/// Runs the cutting-plane iteration until the gap between the LP upper
/// bound and the mutual information of the LP solution drops below `tol`
/// nats, or `max_iter` LP solves have been made.
pub fn design_dacp(
    grid: &AmplitudeGrid,
    params: &ChannelParams,
    tol: f64,
    max_iter: usize,
) -> Result<DacpDesign> {
    design_dacp_with(grid, params, tol, max_iter, DesignObjective::Amplitude)
}

/// As [`design_dacp`] with a choice of objective.
pub fn design_dacp_with(
    grid: &AmplitudeGrid,
    params: &ChannelParams,
    tol: f64,
    max_iter: usize,
    objective: DesignObjective,
) -> Result<DacpDesign> {
    params.validate()?;
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    if (grid.peak() - params.peak_m).abs() > 1e-12 * params.peak_m.max(1.0) {
        return domain(format!(
            "grid peak {} differs from the peak constraint {}",
            grid.peak(),
            params.peak_m
        ));
    }
    let channel = AmplitudeChannel::with_default_quadrature(grid.clone(), params.n0)?
        .with_objective(objective);
    design_on_channel(&channel, params, tol, max_iter)
}

/// As [`design_dacp`], on a caller-supplied channel discretization.
pub fn design_on_channel(
    channel: &AmplitudeChannel,
    params: &ChannelParams,
    tol: f64,
    max_iter: usize,
) -> Result<DacpDesign> {
    let grid = channel.grid();
    let p0 = DacpDistribution::uniform_feasible(grid.clone(), params.avg_power)?;
    let (i0, cut0) = channel.information_and_cut(&p0)?;
    let mut cuts = vec![cut0];
    let mut trace = DesignTrace::default();
    let mut best = (p0, i0);
    let mut upper = f64::INFINITY;

    for iteration in 1..=max_iter.max(1) {
        let (p, c) = lp_max_min(&cuts, grid, params.avg_power)?;
        let (info, cut) = channel.information_and_cut(&p)?;
        upper = upper.min(c);
        trace.entries.push(TraceEntry {
            iteration,
            upper_bound: c,
            lower_bound: info,
        });
        let gap = c - info;
        if info > best.1 {
            best = (p.clone(), info);
        }
        if gap < tol {
            return Ok(DacpDesign {
                distribution: p,
                params: *params,
                trace,
                converged: true,
                mutual_information: info,
                upper_bound: upper,
                objective: channel.objective(),
            });
        }
        cuts.push(cut);
    }
    Ok(DacpDesign {
        distribution: best.0,
        params: *params,
        trace,
        converged: false,
        mutual_information: best.1,
        upper_bound: upper,
        objective: channel.objective(),
    })
}
