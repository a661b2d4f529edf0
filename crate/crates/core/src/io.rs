//! Plain-text formats for DACP designs and constellations.
//!
//! Both start with `key=value` header lines followed by whitespace
//! separated rows. Unknown header keys are ignored on read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::channel::ComplexSample;
use crate::constellation::{Constellation, ConstellationPoint};
use crate::dacp::{AmplitudeGrid, DacpDesign, DacpDistribution, DesignObjective};
use crate::error::{Error, Result};
use crate::shaping::{format_bits, parse_bits, ShapingCode};

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

fn num(line: usize, field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .or_else(|_| parse_err(line, format!("bad {what}: {field:?}")))
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.15e}"))
}

struct Parsed {
    header: BTreeMap<String, (usize, String)>,
    rows: Vec<(usize, Vec<String>)>,
}

impl Parsed {
    fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = t.split_once('=') {
                if !rows.is_empty() {
                    return parse_err(lineno, "header line after data rows");
                }
                header.insert(k.trim().to_string(), (lineno, v.trim().to_string()));
            } else {
                rows.push((lineno, t.split_whitespace().map(str::to_string).collect()));
            }
        }
        Ok(Self { header, rows })
    }

    fn required(&self, key: &str) -> Result<f64> {
        match self.header.get(key) {
            Some((line, v)) => num(*line, v, key),
            None => parse_err(0, format!("missing header `{key}=`")),
        }
    }

    fn optional(&self, key: &str) -> Result<Option<f64>> {
        match self.header.get(key) {
            Some((_, v)) if v.is_empty() || v == "none" => Ok(None),
            Some((line, v)) => num(*line, v, key).map(Some),
            None => Ok(None),
        }
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        match self.header.get(key) {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                other => parse_err(*line, format!("bad {key}: {other:?}")),
            },
        }
    }
}

pub fn objective_name(o: DesignObjective) -> &'static str {
    match o {
        DesignObjective::Amplitude => "amplitude",
        DesignObjective::Complex => "complex",
    }
}

pub fn parse_objective(s: &str) -> Option<DesignObjective> {
    match s {
        "amplitude" => Some(DesignObjective::Amplitude),
        "complex" => Some(DesignObjective::Complex),
        _ => None,
    }
}

/// Contents of a DACP file.
#[derive(Debug, Clone)]
pub struct DacpFile {
    pub distribution: DacpDistribution,
    pub n0: f64,
    pub avg_power: f64,
    pub peak: f64,
    pub converged: Option<bool>,
    /// Capacity bounds in nats, when recorded.
    pub upper_bound: Option<f64>,
    pub lower_bound: Option<f64>,
    pub objective: Option<DesignObjective>,
}

pub fn format_dacp(design: &DacpDesign) -> String {
    let mut s = String::new();
    let p = &design.params;
    writeln!(s, "n0={:.15e}", p.n0).unwrap();
    writeln!(s, "avg_power={:.15e}", p.avg_power).unwrap();
    writeln!(s, "peak={:.15e}", p.peak_m).unwrap();
    writeln!(s, "objective={}", objective_name(design.objective)).unwrap();
    writeln!(s, "converged={}", design.converged).unwrap();
    writeln!(s, "upper_bound={:.15e}", design.upper_bound).unwrap();
    writeln!(s, "lower_bound={:.15e}", design.mutual_information).unwrap();
    let dist = &design.distribution;
    for (a, pr) in dist.grid().amplitudes().iter().zip(dist.probs()) {
        writeln!(s, "{a:.15e} {pr:.15e}").unwrap();
    }
    s
}

pub fn read_dacp<R: BufRead>(reader: R) -> Result<DacpFile> {
    let parsed = Parsed::read(reader)?;
    let mut amps = Vec::with_capacity(parsed.rows.len());
    let mut probs = Vec::with_capacity(parsed.rows.len());
    for (line, fields) in &parsed.rows {
        if fields.len() != 2 {
            return parse_err(
                *line,
                format!("expected `a probability`, got {} fields", fields.len()),
            );
        }
        amps.push(num(*line, &fields[0], "amplitude")?);
        probs.push(num(*line, &fields[1], "probability")?);
    }
    let grid = AmplitudeGrid::new(amps)?;
    Ok(DacpFile {
        distribution: DacpDistribution::from_unnormalized(grid, probs)?,
        n0: parsed.required("n0")?,
        avg_power: parsed.required("avg_power")?,
        peak: parsed.required("peak")?,
        converged: parsed.flag("converged")?,
        upper_bound: parsed.optional("upper_bound")?,
        lower_bound: parsed.optional("lower_bound")?,
        objective: match parsed.header.get("objective") {
            None => None,
            Some((line, v)) => Some(parse_objective(v).ok_or_else(|| Error::Parse {
                line: *line,
                msg: format!("unknown objective {v:?}"),
            })?),
        },
    })
}

/// Writes the constellation, with the codeword column when a code is given.
pub fn format_constellation(cons: &Constellation, code: Option<&ShapingCode>) -> Result<String> {
    if let Some(c) = code {
        if c.len() != cons.len() {
            return Err(Error::Domain("code and constellation sizes differ".into()));
        }
    }
    let mut s = String::new();
    writeln!(s, "k={}", cons.len()).unwrap();
    writeln!(s, "n0={}", opt_f64(cons.design_n0)).unwrap();
    writeln!(s, "avg_power={}", opt_f64(cons.design_avg_power)).unwrap();
    writeln!(s, "peak={:.15e}", cons.peak()).unwrap();
    if let Some(c) = cons.design_converged {
        writeln!(s, "converged={c}").unwrap();
    }
    for (i, p) in cons.points().iter().enumerate() {
        write!(
            s,
            "{i} {:.15e} {:.15e} {:.15e} {}",
            p.value.re, p.value.im, p.probability, p.ring
        )
        .unwrap();
        if let Some(c) = code {
            write!(s, " {}", format_bits(c.codeword(i))).unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

/// Reads a constellation and, when every row carries one, its codewords.
pub fn read_constellation<R: BufRead>(reader: R) -> Result<(Constellation, Option<ShapingCode>)> {
    let parsed = Parsed::read(reader)?;
    let k = parsed.required("k")?;
    let peak = parsed.required("peak")?;
    let mut points = Vec::with_capacity(parsed.rows.len());
    let mut codewords = Vec::new();
    for (expect, (line, f)) in parsed.rows.iter().enumerate() {
        if f.len() != 5 && f.len() != 6 {
            return parse_err(*line, format!("expected 5 or 6 fields, got {}", f.len()));
        }
        let index: usize = f[0].parse().or_else(|_| parse_err(*line, "bad index"))?;
        if index != expect {
            return parse_err(*line, format!("index {index} out of order"));
        }
        points.push(ConstellationPoint {
            value: ComplexSample::new(num(*line, &f[1], "re")?, num(*line, &f[2], "im")?),
            probability: num(*line, &f[3], "probability")?,
            ring: f[4]
                .parse()
                .or_else(|_| parse_err(*line, "bad ring index"))?,
        });
        if let Some(cw) = f.get(5) {
            codewords.push(parse_bits(cw).or_else(|_| parse_err(*line, "bad codeword"))?);
        }
    }
    if points.len() as f64 != k {
        return parse_err(
            0,
            format!("header says k={k} but {} points follow", points.len()),
        );
    }
    let mut cons = Constellation::from_points(points, peak)?;
    cons.design_n0 = parsed.optional("n0")?;
    cons.design_avg_power = parsed.optional("avg_power")?;
    cons.design_converged = parsed.flag("converged")?;
    let code = match codewords.len() {
        0 => None,
        n if n == cons.len() => Some(ShapingCode::from_codewords(
            codewords,
            Some(&cons.probabilities()),
        )?),
        _ => return parse_err(0, "codeword column is only partly filled"),
    };
    Ok((cons, code))
}

pub fn read_dacp_path(path: &std::path::Path) -> Result<DacpFile> {
    read_dacp(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn read_constellation_path(
    path: &std::path::Path,
) -> Result<(Constellation, Option<ShapingCode>)> {
    read_constellation(std::io::BufReader::new(std::fs::File::open(path)?))
}
