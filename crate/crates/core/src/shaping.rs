//! Huffman shaping: uniform message bits select root-to-leaf paths of a
//! Huffman tree built on the target symbol probabilities. A frame is closed
//! by walking the `1` branch once and then `0` branches until a leaf, so the
//! last `1` of the transmitted bits marks the end of the message.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::constellation::Constellation;
use crate::error::{domain, Error, Result};

/// Bits are stored in tree-walk order, first consumed bit first.
pub type Bits = Vec<bool>;

/// Parses an ASCII `0`/`1` string.
pub fn parse_bits(s: &str) -> Result<Bits> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => domain(format!("invalid bit character {other:?}")),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Leaf(usize),
    Internal { zero: usize, one: usize },
}

/// Prefix-free symbol/codeword mapping backed by a full binary tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingCode {
    codewords: Vec<Bits>,
    nodes: Vec<Node>,
    mean_length: f64,
}

const ROOT: usize = 0;

impl ShapingCode {
    /// Builds the tree for an explicit codebook. The codebook must be
    /// prefix-free and complete (Kraft sum exactly one). `mean_length` is
    /// taken under `probs`, or under the dyadic law `2^-len` if `None`.
    pub fn from_codewords(codewords: Vec<Bits>, probs: Option<&[f64]>) -> Result<Self> {
        if codewords.len() < 2 {
            return domain("a shaping code needs at least two symbols");
        }
        if let Some(p) = probs {
            if p.len() != codewords.len() {
                return domain("probability vector length differs from codebook size");
            }
        }
        let mut nodes = vec![Node::Internal {
            zero: usize::MAX,
            one: usize::MAX,
        }];
        for (symbol, cw) in codewords.iter().enumerate() {
            if cw.is_empty() {
                return domain(format!("symbol {symbol} has an empty codeword"));
            }
            let mut cur = ROOT;
            for (depth, &bit) in cw.iter().enumerate() {
                let last = depth + 1 == cw.len();
                let Node::Internal { zero, one } = nodes[cur] else {
                    return domain(format!(
                        "codeword of symbol {symbol} extends another codeword"
                    ));
                };
                let child = if bit { one } else { zero };
                let next = if child == usize::MAX {
                    let id = nodes.len();
                    nodes.push(if last {
                        Node::Leaf(symbol)
                    } else {
                        Node::Internal {
                            zero: usize::MAX,
                            one: usize::MAX,
                        }
                    });
                    if let Node::Internal { zero, one } = &mut nodes[cur] {
                        if bit {
                            *one = id;
                        } else {
                            *zero = id;
                        }
                    }
                    id
                } else {
                    if last {
                        return domain(format!(
                            "codeword of symbol {symbol} is a prefix of another"
                        ));
                    }
                    child
                };
                cur = next;
            }
        }
        if nodes.iter().any(|n| matches!(n, Node::Internal { zero, one } if *zero == usize::MAX || *one == usize::MAX)) {
            return domain("codebook is not complete (some internal node has one child)");
        }
        let mean_length = match probs {
            Some(p) => p
                .iter()
                .zip(&codewords)
                .map(|(p, c)| p * c.len() as f64)
                .sum(),
            None => codewords
                .iter()
                .map(|c| c.len() as f64 * 0.5_f64.powi(c.len() as i32))
                .sum(),
        };
        Ok(Self {
            codewords,
            nodes,
            mean_length,
        })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codeword(&self, symbol: usize) -> &[bool] {
        &self.codewords[symbol]
    }

    pub fn codewords(&self) -> &[Bits] {
        &self.codewords
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.codewords.iter().map(Vec::len).collect()
    }

    pub fn max_length(&self) -> usize {
        self.codewords.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Expected codeword length under the probabilities the code was built
    /// for, bits per symbol.
    pub fn mean_length(&self) -> f64 {
        self.mean_length
    }

    pub fn kraft_sum(&self) -> f64 {
        self.codewords
            .iter()
            .map(|c| 0.5_f64.powi(c.len() as i32))
            .sum()
    }

    /// Symbol probabilities produced when the input bits are uniform:
    /// `2^-len` per symbol.
    pub fn dyadic_probabilities(&self) -> Vec<f64> {
        self.codewords
            .iter()
            .map(|c| 0.5_f64.powi(c.len() as i32))
            .collect()
    }

    /// Mean codeword length when symbols occur with their dyadic
    /// probabilities.
    pub fn dyadic_mean_length(&self) -> f64 {
        self.codewords
            .iter()
            .map(|c| c.len() as f64 * 0.5_f64.powi(c.len() as i32))
            .sum()
    }

    /// Number of bits appended when padding starts from internal node `v`.
    fn pad_from(&self, v: usize) -> usize {
        let Node::Internal { one, .. } = self.nodes[v] else {
            unreachable!("padding starts at internal nodes only");
        };
        let mut bits = 1;
        let mut cur = one;
        while let Node::Internal { zero, .. } = self.nodes[cur] {
            bits += 1;
            cur = zero;
        }
        bits
    }

    /// Expected number of padding bits for a long uniform message: the walk
    /// position is stationary over internal nodes with weight
    /// `2^-depth`.
    pub fn expected_pad_bits(&self) -> f64 {
        let mut weighted = 0.0;
        let mut total = 0.0;
        let mut stack = vec![(ROOT, 0_i32)];
        while let Some((v, depth)) = stack.pop() {
            if let Node::Internal { zero, one } = self.nodes[v] {
                let w = 0.5_f64.powi(depth);
                total += w;
                weighted += w * self.pad_from(v) as f64;
                stack.push((zero, depth + 1));
                stack.push((one, depth + 1));
            }
        }
        weighted / total
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapItem {
    prob: f64,
    min_symbol: usize,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // Reversed so the max-heap pops the smallest (prob, min_symbol).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .prob
            .total_cmp(&self.prob)
            .then(other.min_symbol.cmp(&self.min_symbol))
    }
}

/// Huffman code for `probs`. Merges pick the two smallest probabilities,
/// ties going to the subtree holding the lowest symbol index; the first
/// picked subtree takes the `0` branch.
pub fn build_code(probs: &[f64]) -> Result<ShapingCode> {
    if probs.len() < 2 {
        return domain("a shaping code needs at least two symbols");
    }
    if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return domain("symbol probabilities must be positive");
    }
    // children[i] = (zero, one) for merged nodes; leaves are 0..n.
    let n = probs.len();
    let mut children: Vec<(usize, usize)> = Vec::with_capacity(n - 1);
    let mut heap: BinaryHeap<HeapItem> = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| HeapItem {
            prob: p,
            min_symbol: i,
            node: i,
        })
        .collect();
    while heap.len() > 1 {
        let a = heap.pop().unwrap();
        let b = heap.pop().unwrap();
        children.push((a.node, b.node));
        heap.push(HeapItem {
            prob: a.prob + b.prob,
            min_symbol: a.min_symbol.min(b.min_symbol),
            node: n + children.len() - 1,
        });
    }
    let root = heap.pop().unwrap().node;
    let mut codewords = vec![Bits::new(); n];
    let mut stack = vec![(root, Bits::new())];
    while let Some((node, prefix)) = stack.pop() {
        if node < n {
            codewords[node] = prefix;
        } else {
            let (zero, one) = children[node - n];
            let mut z = prefix.clone();
            z.push(false);
            let mut o = prefix;
            o.push(true);
            stack.push((zero, z));
            stack.push((one, o));
        }
    }
    ShapingCode::from_codewords(codewords, Some(probs))
}

fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Reassigns codewords within each length class so that neighbouring
/// symbols (in ring, then angle order) get codewords close in Hamming
/// distance. Lengths per symbol are unchanged.
pub fn assign_gray(code: &ShapingCode, cons: &Constellation) -> Result<ShapingCode> {
    if code.len() != cons.len() {
        return Err(Error::Assignment(format!(
            "{} codewords for {} points",
            code.len(),
            cons.len()
        )));
    }
    let mut have = code.lengths();
    let mut want = build_code(&cons.probabilities())?.lengths();
    have.sort_unstable();
    want.sort_unstable();
    if have != want {
        return Err(Error::Assignment(
            "length multiset differs from the Huffman code of the constellation".into(),
        ));
    }

    let mut out = code.codewords.clone();
    for len in 1..=code.max_length() {
        let mut symbols: Vec<usize> = (0..code.len())
            .filter(|&s| code.codewords[s].len() == len)
            .collect();
        if symbols.is_empty() {
            continue;
        }
        symbols.sort_by(|&a, &b| {
            let pa = &cons.points()[a];
            let pb = &cons.points()[b];
            pa.ring
                .cmp(&pb.ring)
                .then(cons.angle(a).total_cmp(&cons.angle(b)))
                .then(a.cmp(&b))
        });
        let mut pool: Vec<Bits> = symbols.iter().map(|&s| code.codewords[s].clone()).collect();
        pool.sort();
        let mut prev: Option<Bits> = None;
        for &s in &symbols {
            let pick = match &prev {
                None => 0,
                Some(p) => (0..pool.len())
                    .min_by_key(|&i| (hamming(p, &pool[i]), i))
                    .unwrap(),
            };
            let cw = pool.remove(pick);
            out[s] = cw.clone();
            prev = Some(cw);
        }
    }
    ShapingCode::from_codewords(out, Some(&cons.probabilities()))
}

/// Message bits, the padded bit string and the symbols that carry it.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedFrame {
    pub message_bits: Bits,
    pub padded_bits: Bits,
    pub symbols: Vec<usize>,
}

impl PaddedFrame {
    pub fn pad_len(&self) -> usize {
        self.padded_bits.len() - self.message_bits.len()
    }
}

/// Maps message bits to symbols by walking the tree, then closes the frame
/// with a `1` followed by as many `0`s as needed to reach a leaf. When the
/// message ends exactly on a symbol boundary the padding is a whole symbol
/// starting from the root.
pub fn modulate(bits: &[bool], code: &ShapingCode) -> PaddedFrame {
    let mut symbols = Vec::with_capacity(bits.len() / 2 + 1);
    let mut cur = ROOT;
    for &bit in bits {
        cur = step(code, cur, bit, &mut symbols);
    }
    let mut padded = bits.to_vec();
    padded.push(true);
    cur = step(code, cur, true, &mut symbols);
    while cur != ROOT {
        padded.push(false);
        cur = step(code, cur, false, &mut symbols);
    }
    PaddedFrame {
        message_bits: bits.to_vec(),
        padded_bits: padded,
        symbols,
    }
}

fn step(code: &ShapingCode, cur: usize, bit: bool, symbols: &mut Vec<usize>) -> usize {
    let Node::Internal { zero, one } = code.nodes[cur] else {
        unreachable!("walk never rests on a leaf");
    };
    let next = if bit { one } else { zero };
    match code.nodes[next] {
        Node::Leaf(s) => {
            symbols.push(s);
            ROOT
        }
        Node::Internal { .. } => next,
    }
}

/// Position of the terminating `1`, i.e. the length of the message it
/// closes.
pub fn depadded_len(bits: &[bool]) -> Option<usize> {
    bits.iter().rposition(|&b| b)
}

/// Strips the trailing `0`s and the single `1` before them.
pub fn depad(bits: &[bool]) -> Result<Bits> {
    let end = depadded_len(bits).ok_or(Error::NoTerminator)?;
    Ok(bits[..end].to_vec())
}

/// Concatenates the codewords of `symbols`.
pub fn symbols_to_bits(symbols: &[usize], code: &ShapingCode) -> Result<Bits> {
    let mut out = Bits::new();
    for &s in symbols {
        let cw = code
            .codewords
            .get(s)
            .ok_or_else(|| Error::Domain(format!("unknown symbol index {s}")))?;
        out.extend_from_slice(cw);
    }
    Ok(out)
}
