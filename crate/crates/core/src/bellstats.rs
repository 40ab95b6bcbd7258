//! Observable-level analyzers: CHSH combinations, no-signalling deltas and
//! the counterfactual-spreadsheet bound.

use std::io::{Read, Write};

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::lhv::Coupling;
use crate::probcore::{rational, CondFamily, Outcome, Rational, Setting, Sign};

/// One realized counterfactual quadruple (x1, x2, y1, y2): Alice's response
/// to each of her settings and Bob's response to each of his.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quadruple {
    pub x: [Sign; 2],
    pub y: [Sign; 2],
}

impl Quadruple {
    pub fn new(x1: Sign, x2: Sign, y1: Sign, y2: Sign) -> Self {
        Quadruple { x: [x1, x2], y: [y1, y2] }
    }

    pub fn from_values(v: [i64; 4]) -> Result<Self> {
        Ok(Quadruple::new(
            Sign::from_value(v[0])?,
            Sign::from_value(v[1])?,
            Sign::from_value(v[2])?,
            Sign::from_value(v[3])?,
        ))
    }

    pub fn values(&self) -> [i8; 4] {
        [self.x[0].value(), self.x[1].value(), self.y[0].value(), self.y[1].value()]
    }

    pub fn x(&self, a: Setting) -> Sign {
        self.x[a.index()]
    }

    pub fn y(&self, b: Setting) -> Sign {
        self.y[b.index()]
    }

    /// Bit index in 0..16, x1 most significant, −1 ↦ 0 and +1 ↦ 1.
    pub fn index(&self) -> usize {
        self.values()
            .iter()
            .fold(0, |acc, &v| (acc << 1) | usize::from(v > 0))
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < 16);
        let bit = |k: usize| if (i >> (3 - k)) & 1 == 1 { Sign::Plus } else { Sign::Minus };
        Quadruple::new(bit(0), bit(1), bit(2), bit(3))
    }

    /// All 16 quadruples, ordered by [`Quadruple::index`].
    pub fn all() -> impl Iterator<Item = Quadruple> {
        (0..16).map(Quadruple::from_index)
    }

    /// Σ σ_ab x_a y_b with the single minus sign at `minus_at`.
    /// Always ±2.
    pub fn signed_combination(&self, minus_at: (Setting, Setting)) -> i8 {
        Setting::pairs()
            .map(|(a, b)| {
                let term = (self.x(a) * self.y(b)).value();
                if (a, b) == minus_at {
                    -term
                } else {
                    term
                }
            })
            .sum()
    }
}

/// CHSH statistics for one set of four correlations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChshReport {
    /// E_ab indexed `[a][b]`.
    pub correlations: [[Rational; 2]; 2],
    /// S with the minus sign at each setting pair, in lexicographic order
    /// (1,1), (1,2), (2,1), (2,2).
    pub s_values: [Rational; 4],
    pub s_max: Rational,
}

impl ChshReport {
    pub fn from_correlations(correlations: [[Rational; 2]; 2]) -> Self {
        let total: Rational = correlations.iter().flatten().sum();
        let s_values: [Rational; 4] = std::array::from_fn(|k| {
            let e = &correlations[k / 2][k % 2];
            &total - e - e
        });
        let s_max = s_values
            .iter()
            .map(|s| s.abs())
            .max()
            .expect("four values");
        ChshReport { correlations, s_values, s_max }
    }

    pub fn correlation(&self, a: Setting, b: Setting) -> &Rational {
        &self.correlations[a.index()][b.index()]
    }

    pub fn s_value(&self, minus_at: (Setting, Setting)) -> &Rational {
        &self.s_values[minus_at.0.index() * 2 + minus_at.1.index()]
    }

    /// True when some sign pattern exceeds the local bound of 2.
    pub fn violates_local_bound(&self) -> bool {
        self.s_max > rational(2, 1)
    }
}

/// Exact CHSH statistics of a binary conditional family.
pub fn chsh(cond: &CondFamily) -> Result<ChshReport> {
    cond.require_binary()?;
    Ok(ChshReport::from_correlations(cond.correlations()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoSignallingReport {
    /// |P(X=x | a, b=1) − P(X=x | a, b=2)| indexed `[a][x]`, x = −1, +1.
    pub delta_a: [[Rational; 2]; 2],
    /// |P(Y=y | a=1, b) − P(Y=y | a=2, b)| indexed `[b][y]`.
    pub delta_b: [[Rational; 2]; 2],
    pub max_delta: Rational,
}

impl NoSignallingReport {
    pub fn alice(&self, a: Setting, x: Sign) -> &Rational {
        &self.delta_a[a.index()][sign_slot(x)]
    }

    pub fn bob(&self, b: Setting, y: Sign) -> &Rational {
        &self.delta_b[b.index()][sign_slot(y)]
    }
}

fn sign_slot(s: Sign) -> usize {
    match s {
        Sign::Minus => 0,
        Sign::Plus => 1,
    }
}

pub fn no_signalling(cond: &CondFamily) -> Result<NoSignallingReport> {
    cond.require_binary()?;
    let [s1, s2] = Setting::ALL;
    let idx = |s: Sign| s.outcome().index();
    let delta_a = std::array::from_fn(|i| {
        let a = Setting::ALL[i];
        let (m1, m2) = (cond.get(a, s1).marginal_x(), cond.get(a, s2).marginal_x());
        Sign::ALL.map(|x| (m1[idx(x)].value() - m2[idx(x)].value()).abs())
    });
    let delta_b = std::array::from_fn(|j| {
        let b = Setting::ALL[j];
        let (m1, m2) = (cond.get(s1, b).marginal_y(), cond.get(s2, b).marginal_y());
        Sign::ALL.map(|y| (m1[idx(y)].value() - m2[idx(y)].value()).abs())
    });
    let max_delta = [&delta_a, &delta_b]
        .into_iter()
        .flatten()
        .flatten()
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero);
    Ok(NoSignallingReport { delta_a, delta_b, max_delta })
}

/// An N×4 table of realized counterfactual quadruples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spreadsheet {
    rows: Vec<Quadruple>,
}

const SHEET_HEADER: [&str; 4] = ["x1", "x2", "y1", "y2"];

impl Spreadsheet {
    pub fn new(rows: Vec<Quadruple>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySheet);
        }
        Ok(Spreadsheet { rows })
    }

    pub fn rows(&self) -> &[Quadruple] {
        &self.rows
    }

    /// Reads CSV with header `x1,x2,y1,y2` and ±1 entries.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?;
        if header.iter().ne(SHEET_HEADER) {
            return Err(Error::Parse(format!(
                "spreadsheet header must be x1,x2,y1,y2, got {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let mut v = [0i64; 4];
            for (slot, field) in v.iter_mut().zip(rec.iter()) {
                let o: Outcome = field.parse()?;
                *slot = o.value().into();
            }
            rows.push(Quadruple::from_values(v)?);
        }
        Spreadsheet::new(rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(SHEET_HEADER).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.values().map(|v| v.to_string())).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Empirical CHSH of a spreadsheet; correlations are exact row means.
pub fn spreadsheet_chsh(sheet: &Spreadsheet) -> Result<ChshReport> {
    if sheet.rows.is_empty() {
        return Err(Error::EmptySheet);
    }
    let mut sums = [[0i64; 2]; 2];
    for row in &sheet.rows {
        for (a, b) in Setting::pairs() {
            sums[a.index()][b.index()] += i64::from((row.x(a) * row.y(b)).value());
        }
    }
    let n = sheet.rows.len() as i64;
    Ok(ChshReport::from_correlations(
        sums.map(|row| row.map(|s| rational(s, n))),
    ))
}

/// CHSH of the pairwise margins (X_a, Y_b) of a coupling.
pub fn chsh_of_coupling(coupling: &Coupling) -> ChshReport {
    let mut corr: [[Rational; 2]; 2] = Default::default();
    for (q, p) in coupling.support() {
        for (a, b) in Setting::pairs() {
            let xy = Rational::from_integer((q.x(a) * q.y(b)).value().into());
            corr[a.index()][b.index()] += p.value() * xy;
        }
    }
    ChshReport::from_correlations(corr)
}
