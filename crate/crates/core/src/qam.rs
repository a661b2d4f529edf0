//! Uncoded 128-point cross QAM used as the reference modem.
//!
//! Points sit on odd integer coordinates of a 12x12 square with the four
//! 2x2 corner blocks removed, scaled to the requested symbol energy. A
//! cross cannot carry a perfect Gray labeling. The table extends a 16x8
//! product Gray code over the rectangle |x| <= 11, |y| <= 7 and fills the
//! two arms so that no neighbor pair differs in more than two bits; 16 of
//! the 232 horizontal and vertical pairs differ in exactly two.

use crate::channel::ComplexSample;
use crate::error::{domain, Result};
use crate::shaping::Bits;

pub const QAM_BITS: usize = 7;
pub const QAM_POINTS: usize = 128;

/// Label of each cross point, points listed row by row from the bottom
/// (y = -11) and left to right within a row.
const CROSS_LABELS: [u8; QAM_POINTS] = [
    2, 10, 11, 3, 67, 75, 74, 66, 0, 8, 9, 1, 65, 73, 72, 64, 24, 16, 48, 56, 40, 32, 96, 104, 120,
    112, 80, 88, 25, 17, 49, 57, 41, 33, 97, 105, 121, 113, 81, 89, 27, 19, 51, 59, 43, 35, 99,
    107, 123, 115, 83, 91, 26, 18, 50, 58, 42, 34, 98, 106, 122, 114, 82, 90, 30, 22, 54, 62, 46,
    38, 102, 110, 126, 118, 86, 94, 31, 23, 55, 63, 47, 39, 103, 111, 127, 119, 87, 95, 29, 21, 53,
    61, 45, 37, 101, 109, 125, 117, 85, 93, 28, 20, 52, 60, 44, 36, 100, 108, 124, 116, 84, 92, 4,
    12, 13, 5, 69, 77, 76, 68, 6, 14, 15, 7, 71, 79, 78, 70,
];

/// Odd grid coordinates of the cross, in label-table order.
fn cross_coordinates() -> Vec<(i32, i32)> {
    let mut v = Vec::with_capacity(QAM_POINTS);
    for y in (-11..=11).step_by(2) {
        for x in (-11..=11).step_by(2) {
            if !(i32::abs(x) >= 9 && i32::abs(y) >= 9) {
                v.push((x, y));
            }
        }
    }
    v
}

#[derive(Debug, Clone)]
pub struct QamGrid {
    points: Vec<ComplexSample>,
    labels: Vec<u8>,
    by_label: Vec<usize>,
    /// Grid coordinate of each point before scaling.
    coords: Vec<(i32, i32)>,
    /// Point index by (x, y) grid cell, `usize::MAX` for the corners.
    cell: [[usize; 12]; 12],
    scale: f64,
    es: f64,
}

impl QamGrid {
    /// The 128-cross with average energy `es` over equiprobable points.
    pub fn cross128(es: f64) -> Result<Self> {
        if !(es > 0.0) || !es.is_finite() {
            return domain(format!("symbol energy must be positive, got {es}"));
        }
        let coords = cross_coordinates();
        let raw: f64 = coords
            .iter()
            .map(|&(x, y)| (x * x + y * y) as f64)
            .sum::<f64>()
            / QAM_POINTS as f64;
        let scale = (es / raw).sqrt();
        let points = coords
            .iter()
            .map(|&(x, y)| ComplexSample::new(x as f64 * scale, y as f64 * scale))
            .collect();
        let labels = CROSS_LABELS.to_vec();
        let mut by_label = vec![usize::MAX; QAM_POINTS];
        for (i, &l) in labels.iter().enumerate() {
            by_label[l as usize] = i;
        }
        let mut cell = [[usize::MAX; 12]; 12];
        for (i, &(x, y)) in coords.iter().enumerate() {
            cell[((y + 11) / 2) as usize][((x + 11) / 2) as usize] = i;
        }
        Ok(Self {
            points,
            labels,
            by_label,
            coords,
            cell,
            scale,
            es,
        })
    }

    pub fn points(&self) -> &[ComplexSample] {
        &self.points
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn es(&self) -> f64 {
        self.es
    }

    /// Distance between horizontally or vertically adjacent points.
    pub fn min_distance(&self) -> f64 {
        2.0 * self.scale
    }

    pub fn point_for_label(&self, label: u8) -> ComplexSample {
        self.points[self.by_label[label as usize & 0x7f]]
    }

    /// Pairs of horizontally or vertically adjacent point indices.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for (i, &(x, y)) in self.coords.iter().enumerate() {
            for (dx, dy) in [(2, 0), (0, 2)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx <= 11 && ny <= 11 {
                    let j = self.cell[((ny + 11) / 2) as usize][((nx + 11) / 2) as usize];
                    if j != usize::MAX {
                        v.push((i, j));
                    }
                }
            }
        }
        v
    }

    /// Index of the nearest point.
    pub fn nearest(&self, y: ComplexSample) -> usize {
        let q = |v: f64| -> usize {
            (((v / self.scale + 11.0) / 2.0).round()).clamp(0.0, 11.0) as usize
        };
        let (cx, cy) = (q(y.re), q(y.im));
        let i = self.cell[cy][cx];
        if i != usize::MAX {
            return i;
        }
        // Missing corner cell: the nearest point is on the cross boundary.
        self.points
            .iter()
            .enumerate()
            .min_by(|a, b| (y - a.1).norm_sqr().total_cmp(&(y - b.1).norm_sqr()))
            .map(|(i, _)| i)
            .expect("grid is non-empty")
    }
}

/// Seven bits per symbol, most significant first.
pub fn qam_modulate(bits: &[bool], grid: &QamGrid) -> Result<Vec<ComplexSample>> {
    if !bits.len().is_multiple_of(QAM_BITS) {
        return domain(format!(
            "{} bits is not a multiple of {QAM_BITS}",
            bits.len()
        ));
    }
    Ok(bits
        .chunks(QAM_BITS)
        .map(|c| grid.point_for_label(c.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8)))
        .collect())
}

/// Minimum-distance detection.
pub fn qam_demodulate(samples: &[ComplexSample], grid: &QamGrid, n0: f64) -> Result<Bits> {
    if !(n0 > 0.0) {
        return domain(format!("n0 must be positive, got {n0}"));
    }
    let mut out = Vec::with_capacity(samples.len() * QAM_BITS);
    for &y in samples {
        push_label(&mut out, grid.labels[grid.nearest(y)]);
    }
    Ok(out)
}

pub(crate) fn push_label(out: &mut Bits, label: u8) {
    for k in (0..QAM_BITS).rev() {
        out.push(label >> k & 1 == 1);
    }
}

fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, 1.2e-7
/// relative accuracy).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Nearest-neighbor union bound on the symbol error rate.
pub fn union_bound_ser(grid: &QamGrid, n0: f64) -> f64 {
    let pairs = grid.neighbor_pairs();
    let q = q_function(grid.min_distance() / (2.0 * n0).sqrt());
    2.0 * pairs.len() as f64 / QAM_POINTS as f64 * q
}

/// Nearest-neighbor union bound on the bit error rate: each adjacent pair
/// contributes its Hamming distance in both directions.
pub fn union_bound_ber(grid: &QamGrid, n0: f64) -> f64 {
    let q = q_function(grid.min_distance() / (2.0 * n0).sqrt());
    let bits: u32 = grid
        .neighbor_pairs()
        .iter()
        .map(|&(i, j)| (grid.labels[i] ^ grid.labels[j]).count_ones())
        .sum();
    2.0 * bits as f64 / (QAM_POINTS * QAM_BITS) as f64 * q
}

/// Eb/N0 of uncoded 128-QAM: seven bits per symbol.
pub fn qam_eb_n0(es_n0: f64) -> f64 {
    es_n0 / QAM_BITS as f64
}
