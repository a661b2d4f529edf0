mod common;

use common::*;
use omgrand_core::framing::db_to_ratio;
use omgrand_core::qam::{QAM_BITS, QAM_POINTS};
use omgrand_core::{qam_demodulate, qam_modulate, ComplexSample, QamGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_bits<R: Rng>(n: usize, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.random()).collect()
}

fn awgn<R: Rng>(xs: &[ComplexSample], n0: f64, rng: &mut R) -> Vec<ComplexSample> {
    let sd = (n0 / 2.0).sqrt();
    xs.iter()
        .map(|x| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            x + ComplexSample::new(sd * re, sd * im)
        })
        .collect()
}

/// Cross coordinates built from scratch: odd integers in a 12x12 square
/// without the 2x2 corner blocks.
fn cross() -> Vec<(f64, f64)> {
    let mut v = Vec::new();
    for x in (-11..=11).step_by(2) {
        for y in (-11..=11).step_by(2) {
            if i32::abs(x) < 9 || i32::abs(y) < 9 {
                v.push((x as f64, y as f64));
            }
        }
    }
    v
}

/// Nearest-neighbour union bound on SER at `es_n0`.
fn union_ser(es_n0: f64) -> f64 {
    let pts = cross();
    let energy: f64 = pts.iter().map(|(x, y)| x * x + y * y).sum::<f64>() / pts.len() as f64;
    let mut neighbours = 0;
    for &(x, y) in &pts {
        for &(u, v) in &pts {
            if ((x - u).abs() == 2.0 && y == v) || ((y - v).abs() == 2.0 && x == u) {
                neighbours += 1;
            }
        }
    }
    // Unit-energy spacing 2/sqrt(E), noise variance per dimension N0/2.
    let d = 2.0 / energy.sqrt();
    let n0 = 1.0 / es_n0;
    neighbours as f64 / pts.len() as f64 * q_tail(d / (2.0 * n0).sqrt())
}

#[test]
fn layout_is_the_standard_cross() {
    let g = QamGrid::cross128(1.0).unwrap();
    let mut ours: Vec<(i64, i64)> = g
        .points()
        .iter()
        .map(|p| {
            (
                (p.re / g.min_distance() * 2.0).round() as i64,
                (p.im / g.min_distance() * 2.0).round() as i64,
            )
        })
        .collect();
    let mut want: Vec<(i64, i64)> = cross().iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    ours.sort_unstable();
    want.sort_unstable();
    assert_eq!(ours, want);
    let mut labels = g.labels().to_vec();
    labels.sort_unstable();
    assert_eq!(labels, (0..128u8).collect::<Vec<_>>());
}

#[test]
fn random_symbol_energy() {
    let g = QamGrid::cross128(3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bits = random_bits(QAM_BITS * 1_000_000, &mut rng);
    let xs = qam_modulate(&bits, &g).unwrap();
    let e = xs.iter().map(|x| x.norm_sqr()).sum::<f64>() / xs.len() as f64;
    assert!((e / 3.0 - 1.0).abs() < 0.005, "{e}");
}

#[test]
fn noiseless_roundtrip() {
    let g = QamGrid::cross128(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let bits = random_bits(QAM_BITS * 15_000, &mut rng);
    let xs = qam_modulate(&bits, &g).unwrap();
    assert_eq!(qam_demodulate(&xs, &g, 1e-6).unwrap(), bits);
}

#[test]
fn symbol_errors_follow_the_union_bound() {
    let g = QamGrid::cross128(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let symbols = 400_000;
    let mut curve = Vec::new();
    let grid: Vec<f64> = (0..9).map(|k| 25.0 + 0.5 * k as f64).collect();
    for &db in &grid {
        let n0 = 1.0 / db_to_ratio(db);
        let bits = random_bits(QAM_BITS * symbols, &mut rng);
        let rx = qam_demodulate(
            &awgn(&qam_modulate(&bits, &g).unwrap(), n0, &mut rng),
            &g,
            n0,
        )
        .unwrap();
        let errors = bits
            .chunks(QAM_BITS)
            .zip(rx.chunks(QAM_BITS))
            .filter(|(a, b)| a != b)
            .count();
        curve.push((db, errors as f64 / symbols as f64));
    }
    let measured = crossing_db(&curve, 1e-3).expect("SER curve brackets 1e-3");
    let bound: Vec<(f64, f64)> = grid
        .iter()
        .map(|&db| (db, union_ser(db_to_ratio(db))))
        .collect();
    let predicted = crossing_db(&bound, 1e-3).unwrap();
    assert!(
        (measured - predicted).abs() <= 0.2,
        "{measured} vs {predicted}"
    );
    assert_eq!(QAM_POINTS, g.points().len());
}

#[test]
fn bit_errors_fall_with_snr() {
    let g = QamGrid::cross128(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let symbols = 200_000;
    let n_bits = (symbols * QAM_BITS) as f64;
    let mut prev: Option<(f64, f64)> = None;
    for eb_db in [12.0, 13.0, 14.0, 15.0, 16.0, 17.0] {
        let n0 = 1.0 / (db_to_ratio(eb_db) * QAM_BITS as f64);
        let bits = random_bits(QAM_BITS * symbols, &mut rng);
        let rx = qam_demodulate(
            &awgn(&qam_modulate(&bits, &g).unwrap(), n0, &mut rng),
            &g,
            n0,
        )
        .unwrap();
        let ber = bits.iter().zip(&rx).filter(|(a, b)| a != b).count() as f64 / n_bits;
        let se = (ber * (1.0 - ber) / n_bits).sqrt();
        if let Some((p, pse)) = prev {
            assert!(
                ber <= p + 2.0 * (se * se + pse * pse).sqrt(),
                "{eb_db} dB: {ber} after {p}"
            );
        }
        prev = Some((ber, se));
    }
}
