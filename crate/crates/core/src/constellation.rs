//! Quantization of a ring distribution into a finite constellation.

use std::f64::consts::PI;

use crate::channel::ComplexSample;
use crate::dacp::DacpDistribution;
use crate::error::{domain, Error, Result};

/// Candidate phase offsets tried per ring.
pub const ROTATION_STEPS: usize = 360;

/// Offsets whose minimum distance is within this of the best are ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub amplitude: f64,
    pub count: usize,
    /// Radians in `[0, 2 pi / count)`.
    pub phase_offset: f64,
}

impl Ring {
    pub fn point(&self, j: usize) -> ComplexSample {
        self.point_with_offset(j, self.phase_offset)
    }

    fn point_with_offset(&self, j: usize, offset: f64) -> ComplexSample {
        let theta = offset + 2.0 * PI * j as f64 / self.count as f64;
        ComplexSample::from_polar(self.amplitude, theta)
    }

    pub fn points(&self) -> impl Iterator<Item = ComplexSample> + '_ {
        (0..self.count).map(|j| self.point(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationPoint {
    pub value: ComplexSample,
    pub probability: f64,
    pub ring: usize,
}

/// `K` complex points with probabilities, grouped into concentric rings
/// sorted by amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<ConstellationPoint>,
    rings: Vec<Ring>,
    peak_m: f64,
    /// Noise level the constellation was designed for, when known.
    pub design_n0: Option<f64>,
    /// Average power constraint used in the design, when known.
    pub design_avg_power: Option<f64>,
    /// Whether the amplitude design behind it converged, when known.
    pub design_converged: Option<bool>,
}

impl Constellation {
    /// Builds a constellation from explicit points. Ring indices must be
    /// contiguous from 0 and ordered by amplitude.
    pub fn from_points(points: Vec<ConstellationPoint>, peak_m: f64) -> Result<Self> {
        if points.is_empty() {
            return domain("constellation has no points");
        }
        let total: f64 = points.iter().map(|p| p.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("point probabilities sum to {total}"));
        }
        if points
            .iter()
            .any(|p| !(p.probability > 0.0) || !p.value.re.is_finite() || !p.value.im.is_finite())
        {
            return domain("point probabilities must be positive and coordinates finite");
        }
        if points.iter().any(|p| p.value.norm() > peak_m + 1e-12) {
            return domain("a point exceeds the peak amplitude");
        }
        let n_rings = points.iter().map(|p| p.ring).max().unwrap() + 1;
        let mut rings = Vec::with_capacity(n_rings);
        for r in 0..n_rings {
            let members: Vec<&ConstellationPoint> = points.iter().filter(|p| p.ring == r).collect();
            let Some(first) = members.first() else {
                return domain(format!("ring {r} has no points"));
            };
            let count = members.len();
            let amplitude = first.value.norm();
            let sector = 2.0 * PI / count as f64;
            let phase_offset = if amplitude == 0.0 {
                0.0
            } else {
                first.value.arg().rem_euclid(2.0 * PI) % sector
            };
            rings.push(Ring {
                amplitude,
                count,
                phase_offset,
            });
        }
        if rings.windows(2).any(|w| w[1].amplitude <= w[0].amplitude) {
            return domain("rings must be indexed in increasing amplitude");
        }
        Ok(Self {
            points,
            rings,
            peak_m,
            design_n0: None,
            design_avg_power: None,
            design_converged: None,
        })
    }

    pub fn points(&self) -> &[ConstellationPoint] {
        &self.points
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.peak_m
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.probability).collect()
    }

    pub fn values(&self) -> Vec<ComplexSample> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// `E_s = sum p_i |x_i|^2`.
    pub fn average_energy(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.probability * p.value.norm_sqr())
            .sum()
    }

    /// Entropy of the point distribution in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.points
            .iter()
            .map(|p| -p.probability * p.probability.log2())
            .sum()
    }

    /// Same geometry with replaced point probabilities.
    pub fn with_probabilities(&self, probs: &[f64]) -> Result<Self> {
        if probs.len() != self.len() {
            return domain("probability vector length differs from constellation size");
        }
        let points = self
            .points
            .iter()
            .zip(probs)
            .map(|(p, &probability)| ConstellationPoint { probability, ..*p })
            .collect();
        let mut out = Self::from_points(points, self.peak_m)?;
        out.design_n0 = self.design_n0;
        out.design_avg_power = self.design_avg_power;
        out.design_converged = self.design_converged;
        Ok(out)
    }

    /// Angle of point `i` in `[0, 2 pi)`.
    pub fn angle(&self, i: usize) -> f64 {
        self.points[i].value.arg().rem_euclid(2.0 * PI)
    }
}

/// Points per amplitude level from the cube-root rule, topped up to exactly
/// `k` by largest remaining share.
pub fn allocate_points(dacp: &DacpDistribution, k: usize) -> Result<Vec<usize>> {
    let amps = dacp.grid().amplitudes();
    let probs = dacp.probs();
    let positive: Vec<usize> = (0..amps.len()).filter(|&i| probs[i] > 0.0).collect();
    if k < positive.len() {
        return Err(Error::Allocation {
            rings: positive.len(),
            k,
        });
    }
    let weights: Vec<f64> = amps
        .iter()
        .zip(probs)
        .map(|(a, p)| (a * a * p).cbrt())
        .collect();
    let total: f64 = weights.iter().sum();
    let origin = positive.iter().copied().find(|&i| amps[i] == 0.0);
    if total <= 0.0 {
        // Only the origin carries mass.
        if k != 1 {
            return Err(Error::Allocation { rings: 1, k });
        }
        let mut counts = vec![0; amps.len()];
        counts[origin.unwrap()] = 1;
        return Ok(counts);
    }

    let share: Vec<f64> = weights.iter().map(|w| w / total * k as f64).collect();
    let mut counts: Vec<usize> = share.iter().map(|s| s.floor() as usize).collect();
    for &i in &positive {
        if counts[i] == 0 {
            counts[i] = 1;
        }
    }
    if let Some(o) = origin {
        counts[o] = 1;
    }
    let adjustable: Vec<usize> = positive
        .iter()
        .copied()
        .filter(|&i| Some(i) != origin)
        .collect();

    let mut assigned: usize = counts.iter().sum();
    while assigned < k {
        let i = *adjustable
            .iter()
            .max_by(|&&x, &&y| {
                let dx = share[x] - counts[x] as f64;
                let dy = share[y] - counts[y] as f64;
                dx.total_cmp(&dy).then(y.cmp(&x))
            })
            .ok_or(Error::Allocation {
                rings: positive.len(),
                k,
            })?;
        counts[i] += 1;
        assigned += 1;
    }
    while assigned > k {
        let i = *adjustable
            .iter()
            .filter(|&&i| counts[i] > 1)
            .min_by(|&&x, &&y| {
                let dx = share[x] - counts[x] as f64;
                let dy = share[y] - counts[y] as f64;
                dx.total_cmp(&dy).then(y.cmp(&x))
            })
            .ok_or(Error::Allocation {
                rings: positive.len(),
                k,
            })?;
        counts[i] -= 1;
        assigned -= 1;
    }
    Ok(counts)
}

fn min_distance(a: &Ring, a_offset: f64, b: &Ring, b_offset: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..a.count {
        let x = a.point_with_offset(i, a_offset);
        for j in 0..b.count {
            let d = (x - b.point_with_offset(j, b_offset)).norm_sqr();
            if d < best {
                best = d;
            }
        }
    }
    best.sqrt()
}

/// Candidate offsets searched for a ring with `count` points.
pub fn offset_candidates(count: usize, steps: usize) -> impl Iterator<Item = f64> {
    let sector = 2.0 * PI / count as f64;
    (0..steps).map(move |s| sector * s as f64 / steps as f64)
}

/// Greedy ring rotation: each ring, moving outward, takes the offset that
/// maximizes its minimum distance to the previous ring.
pub fn rotate_rings(rings: &[Ring]) -> Vec<f64> {
    rotate_rings_with(rings, ROTATION_STEPS)
}

pub fn rotate_rings_with(rings: &[Ring], steps: usize) -> Vec<f64> {
    let mut offsets = vec![0.0; rings.len()];
    let first_positive = rings.iter().position(|r| r.amplitude > 0.0);
    let Some(start) = first_positive else {
        return offsets;
    };
    for i in start + 1..rings.len() {
        let prev = &rings[i - 1];
        let mut best = (f64::NEG_INFINITY, 0.0);
        for phi in offset_candidates(rings[i].count, steps) {
            let d = min_distance(&rings[i], phi, prev, offsets[i - 1]);
            if d > best.0 + TIE_EPS {
                best = (d, phi);
            }
        }
        offsets[i] = best.1;
    }
    offsets
}

/// Allocation, rotation and per-point probabilities in one step.
pub fn build_constellation(dacp: &DacpDistribution, k: usize) -> Result<Constellation> {
    let counts = allocate_points(dacp, k)?;
    let amps = dacp.grid().amplitudes();
    let probs = dacp.probs();
    let mut rings = Vec::new();
    let mut ring_probs = Vec::new();
    for i in 0..amps.len() {
        if counts[i] > 0 {
            rings.push(Ring {
                amplitude: amps[i],
                count: counts[i],
                phase_offset: 0.0,
            });
            ring_probs.push(probs[i]);
        }
    }
    let offsets = rotate_rings(&rings);
    for (ring, off) in rings.iter_mut().zip(offsets) {
        ring.phase_offset = off;
    }
    let mut points = Vec::with_capacity(k);
    for (r, (ring, p)) in rings.iter().zip(&ring_probs).enumerate() {
        for value in ring.points() {
            points.push(ConstellationPoint {
                value,
                probability: p / ring.count as f64,
                ring: r,
            });
        }
    }
    let mut cons = Constellation::from_points(points, dacp.grid().peak())?;
    // from_points re-derives offsets from coordinates; keep the exact ones.
    cons.rings = rings;
    Ok(cons)
}
