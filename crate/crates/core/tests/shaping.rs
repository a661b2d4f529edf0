use std::f64::consts::PI;

use omgrand_core::fixtures::{worked_example_code, worked_example_constellation};
use omgrand_core::shaping::{depadded_len, format_bits};
use omgrand_core::{
    assign_gray, build_code, depad, modulate, symbols_to_bits, ComplexSample, Constellation,
    ConstellationPoint, ShapingCode,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Optimal expected length: the sum of all merged weights.
fn huffman_cost(probs: &[f64]) -> f64 {
    let mut w = probs.to_vec();
    let mut cost = 0.0;
    while w.len() > 1 {
        w.sort_by(|a, b| b.total_cmp(a));
        let x = w.pop().unwrap();
        let y = w.pop().unwrap();
        cost += x + y;
        w.push(x + y);
    }
    cost
}

fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().map(|p| p * p.log2()).sum::<f64>()
}

fn is_prefix_free(code: &ShapingCode) -> bool {
    let words = code.codewords();
    for (i, a) in words.iter().enumerate() {
        for (j, b) in words.iter().enumerate() {
            if i != j && b.len() >= a.len() && b[..a.len()] == a[..] {
                return false;
            }
        }
    }
    true
}

fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Sum of Hamming distances between consecutive symbols of each length
/// class, walking rings outward and angles counter-clockwise.
fn chain_cost(code: &ShapingCode, cons: &Constellation) -> usize {
    let mut total = 0;
    for len in 1..=code.max_length() {
        let mut syms: Vec<usize> = (0..code.len())
            .filter(|&s| code.codeword(s).len() == len)
            .collect();
        syms.sort_by(|&a, &b| {
            let (pa, pb) = (&cons.points()[a], &cons.points()[b]);
            pa.ring
                .cmp(&pb.ring)
                .then(cons.angle(a).total_cmp(&cons.angle(b)))
                .then(a.cmp(&b))
        });
        total += syms
            .windows(2)
            .map(|w| hamming(code.codeword(w[0]), code.codeword(w[1])))
            .sum::<usize>();
    }
    total
}

/// Each length class's codewords in lexicographic order, handed out along
/// the traversal order.
fn sorted_identity(code: &ShapingCode, cons: &Constellation) -> ShapingCode {
    let mut out = code.codewords().to_vec();
    for len in 1..=code.max_length() {
        let mut syms: Vec<usize> = (0..code.len())
            .filter(|&s| code.codeword(s).len() == len)
            .collect();
        syms.sort_by(|&a, &b| {
            let (pa, pb) = (&cons.points()[a], &cons.points()[b]);
            pa.ring
                .cmp(&pb.ring)
                .then(cons.angle(a).total_cmp(&cons.angle(b)))
                .then(a.cmp(&b))
        });
        let mut pool: Vec<Vec<bool>> = syms.iter().map(|&s| code.codeword(s).to_vec()).collect();
        pool.sort();
        for (s, w) in syms.into_iter().zip(pool) {
            out[s] = w;
        }
    }
    ShapingCode::from_codewords(out, Some(&cons.probabilities())).unwrap()
}

fn random_constellation(rng: &mut ChaCha8Rng) -> Constellation {
    let weights: Vec<f64> = (0..16)
        .map(|_| rng.random_range(0.05..1.0f64).powi(3))
        .collect();
    let total: f64 = weights.iter().sum();
    let points = (0..16)
        .map(|i| {
            let ring = i / 4;
            ConstellationPoint {
                value: ComplexSample::from_polar(
                    ring as f64 + 1.0,
                    rng.random_range(0.0..2.0 * PI),
                ),
                probability: weights[i] / total,
                ring,
            }
        })
        .collect();
    Constellation::from_points(points, 4.0).unwrap()
}

#[test]
fn worked_example_frame() {
    let code = worked_example_code();
    let frame = modulate(
        &omgrand_core::shaping::parse_bits("1110111").unwrap(),
        &code,
    );
    assert_eq!(frame.symbols, vec![7, 4, 15]);
    assert_eq!(format_bits(&frame.padded_bits), "111011110000");
    assert_eq!(frame.pad_len(), 5);
    assert_eq!(depad(&frame.padded_bits).unwrap(), frame.message_bits);
    let gray = assign_gray(&code, &worked_example_constellation()).unwrap();
    assert_eq!(gray.lengths(), code.lengths());
}

#[test]
fn greedy_chain_beats_sorted_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let cons = random_constellation(&mut rng);
        let code = build_code(&cons.probabilities()).unwrap();
        let gray = assign_gray(&code, &cons).unwrap();
        assert_eq!(gray.lengths(), code.lengths());
        assert!(is_prefix_free(&gray));
        assert!(chain_cost(&gray, &cons) <= chain_cost(&sorted_identity(&code, &cons), &cons));
    }
}

#[test]
fn four_point_ring_gets_a_gray_cycle() {
    let cons = omgrand_core::fixtures::psk(4);
    let gray = assign_gray(&build_code(&cons.probabilities()).unwrap(), &cons).unwrap();
    for i in 0..3 {
        assert_eq!(hamming(gray.codeword(i), gray.codeword(i + 1)), 1);
    }
}

#[test]
fn random_messages_roundtrip() {
    let code = worked_example_code();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100_000 {
        let n = rng.random_range(0..64);
        let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let frame = modulate(&bits, &code);
        let back = symbols_to_bits(&frame.symbols, &code).unwrap();
        assert_eq!(back, frame.padded_bits);
        assert_eq!(depad(&back).unwrap(), bits);
    }
}

fn probs_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, 2..64).prop_map(|w| {
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn huffman_codes_are_complete_and_optimal(probs in probs_strategy()) {
        let code = build_code(&probs).unwrap();
        prop_assert!(is_prefix_free(&code));
        prop_assert!((code.kraft_sum() - 1.0).abs() < 1e-12);
        let h = entropy(&probs);
        let l = code.mean_length();
        prop_assert!(h <= l + 1e-12 && l < h + 1.0);
        prop_assert!((l - huffman_cost(&probs)).abs() < 1e-9);
        // Under its own dyadic probabilities the code is exactly entropy-tight.
        let dy = code.dyadic_probabilities();
        prop_assert!((code.dyadic_mean_length() - entropy(&dy)).abs() < 1e-9);
    }

    #[test]
    fn padding_is_one_then_zeros(probs in probs_strategy(), seed in any::<u64>(), n in 0usize..200) {
        let code = build_code(&probs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let frame = modulate(&bits, &code);
        let pad = &frame.padded_bits[n..];
        prop_assert_eq!(pad.iter().filter(|&&b| b).count(), 1);
        prop_assert!(pad[0]);
        prop_assert!(frame.pad_len() >= 1 && frame.pad_len() <= code.max_length());
        prop_assert_eq!(depadded_len(&frame.padded_bits), Some(n));
        prop_assert!(code.codeword(*frame.symbols.last().unwrap()).iter().any(|&b| b));
        prop_assert_eq!(symbols_to_bits(&frame.symbols, &code).unwrap(), frame.padded_bits.clone());
    }
}
