//! Small hand-built constellations and codes used by tests, benches and
//! the worked-example reproduction.

use std::f64::consts::PI;

use crate::channel::ComplexSample;
use crate::constellation::{Constellation, ConstellationPoint};
use crate::shaping::{parse_bits, ShapingCode};

/// Codebook of the 20-symbol illustration: symbol 7 is `111`, 4 is `011`,
/// 9 is `1001` and 15 is `110000`; the remaining leaves complete the tree.
pub const WORKED_EXAMPLE_CODEWORDS: [&str; 20] = [
    "0000", "0001", "0010", "0011", "011", "0100", "0101", "111", "10000", "1001", "10001",
    "10100", "10101", "10110", "10111", "110000", "110001", "11001", "11010", "11011",
];

/// Ring membership of the 20 symbols: origin, then rings of 4, 4, 2, 3
/// and 6 points.
pub const WORKED_EXAMPLE_RINGS: [usize; 20] =
    [0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 4, 4, 4, 5, 5, 5, 5, 5, 5];

pub fn worked_example_code() -> ShapingCode {
    let words = WORKED_EXAMPLE_CODEWORDS
        .iter()
        .map(|w| parse_bits(w).expect("fixture bits"))
        .collect();
    ShapingCode::from_codewords(words, None).expect("fixture code is complete")
}

/// Rings at amplitudes 0..=5 with point probabilities `2^-len` of the
/// fixture code.
pub fn worked_example_constellation() -> Constellation {
    let code = worked_example_code();
    let probs = code.dyadic_probabilities();
    let mut points = Vec::with_capacity(20);
    for ring in 0..6 {
        let members: Vec<usize> = (0..20)
            .filter(|&s| WORKED_EXAMPLE_RINGS[s] == ring)
            .collect();
        let count = members.len();
        for (j, &s) in members.iter().enumerate() {
            let theta = 2.0 * PI * j as f64 / count as f64;
            points.push(ConstellationPoint {
                value: ComplexSample::from_polar(ring as f64, theta),
                probability: probs[s],
                ring,
            });
        }
    }
    Constellation::from_points(points, 5.0).expect("fixture constellation is valid")
}

/// Equiprobable unit-amplitude PSK.
pub fn psk(k: usize) -> Constellation {
    let points = (0..k)
        .map(|j| ConstellationPoint {
            value: ComplexSample::from_polar(1.0, 2.0 * PI * j as f64 / k as f64),
            probability: 1.0 / k as f64,
            ring: 0,
        })
        .collect();
    Constellation::from_points(points, 1.0).expect("psk is valid")
}
