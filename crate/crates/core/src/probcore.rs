//! Exact finite probability over the observables of a two-party, two-setting
//! Bell experiment.
//!
//! Every mass is an [`ExactProb`], a non-negative arbitrary-precision
//! rational. Distributions are validated on construction and never
//! renormalized silently: a table that does not sum to exactly one is an
//! error carrying the exact deficit.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Signed exact rational, used for correlations and CHSH values.
pub type Rational = BigRational;

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"num/den"` or a bare integer. A leading minus is accepted here;
/// probabilities reject it in [`ExactProb::from_str`].
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = num.strip_prefix('+').unwrap_or(num);
    let num: BigInt = num.parse().map_err(|_| bad())?;
    if den.starts_with(['-', '+']) {
        return Err(bad());
    }
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

/// Always renders as `num/den`, reduced.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// A probability mass: a reduced, non-negative rational.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactProb(Rational);

impl ExactProb {
    pub fn new(value: Rational) -> Result<Self> {
        if value.is_negative() {
            return Err(Error::NegativeMass {
                at: "value".into(),
                value,
            });
        }
        Ok(ExactProb(value))
    }

    /// Panics on a zero denominator; intended for literals.
    pub fn ratio(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        ExactProb(Rational::new(num.into(), den.into()))
    }

    pub fn zero() -> Self {
        ExactProb(Rational::zero())
    }

    pub fn one() -> Self {
        ExactProb(Rational::one())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `self / total`. Panics if `total` is zero.
    pub fn div(&self, total: &ExactProb) -> ExactProb {
        assert!(!total.is_zero(), "division by zero mass");
        ExactProb(&self.0 / &total.0)
    }

    /// `1 - self`, which must itself be a probability.
    pub fn complement(&self) -> Result<ExactProb> {
        ExactProb::new(Rational::one() - &self.0)
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl FromStr for ExactProb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim_start().starts_with('-') {
            return Err(Error::Parse(format!(
                "probabilities may not carry a minus sign: {s:?}"
            )));
        }
        ExactProb::new(parse_rational(s)?)
    }
}

impl Add for ExactProb {
    type Output = ExactProb;
    fn add(self, rhs: ExactProb) -> ExactProb {
        ExactProb(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a ExactProb> for &'a ExactProb {
    type Output = ExactProb;
    fn add(self, rhs: &ExactProb) -> ExactProb {
        ExactProb(&self.0 + &rhs.0)
    }
}

impl Mul for ExactProb {
    type Output = ExactProb;
    fn mul(self, rhs: ExactProb) -> ExactProb {
        ExactProb(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a ExactProb> for &'a ExactProb {
    type Output = ExactProb;
    fn mul(self, rhs: &ExactProb) -> ExactProb {
        ExactProb(&self.0 * &rhs.0)
    }
}

impl Sum for ExactProb {
    fn sum<I: Iterator<Item = ExactProb>>(iter: I) -> ExactProb {
        iter.fold(ExactProb::zero(), |acc, p| acc + p)
    }
}

impl<'a> Sum<&'a ExactProb> for ExactProb {
    fn sum<I: Iterator<Item = &'a ExactProb>>(iter: I) -> ExactProb {
        iter.fold(ExactProb::zero(), |acc, p| &acc + p)
    }
}

/// Measurement setting, 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Setting {
    One,
    Two,
}

impl Setting {
    pub const ALL: [Setting; 2] = [Setting::One, Setting::Two];

    pub fn index(self) -> usize {
        match self {
            Setting::One => 0,
            Setting::Two => 1,
        }
    }

    pub fn value(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_value(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Setting::One),
            2 => Ok(Setting::Two),
            _ => Err(Error::Parse(format!("setting must be 1 or 2, got {v}"))),
        }
    }

    /// The four setting pairs in lexicographic order.
    pub fn pairs() -> impl Iterator<Item = (Setting, Setting)> {
        Setting::ALL
            .into_iter()
            .flat_map(|a| Setting::ALL.into_iter().map(move |b| (a, b)))
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let v: i64 = s
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("invalid setting {s:?}")))?;
        Setting::from_value(v)
    }
}

/// A measurement result. `Zero` means no detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Minus,
    Zero,
    Plus,
}

impl Outcome {
    /// Canonical order −1, 0, +1.
    pub const ALL: [Outcome; 3] = [Outcome::Minus, Outcome::Zero, Outcome::Plus];

    pub fn index(self) -> usize {
        match self {
            Outcome::Minus => 0,
            Outcome::Zero => 1,
            Outcome::Plus => 2,
        }
    }

    pub fn value(self) -> i8 {
        self.index() as i8 - 1
    }

    pub fn from_value(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Outcome::Minus),
            0 => Ok(Outcome::Zero),
            1 => Ok(Outcome::Plus),
            _ => Err(Error::Parse(format!("outcome must be -1, 0 or +1, got {v}"))),
        }
    }

    pub fn negate(self) -> Outcome {
        match self {
            Outcome::Minus => Outcome::Plus,
            Outcome::Zero => Outcome::Zero,
            Outcome::Plus => Outcome::Minus,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Minus => "-1",
            Outcome::Zero => "0",
            Outcome::Plus => "+1",
        })
    }
}

impl FromStr for Outcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t.strip_prefix('+').unwrap_or(t);
        let v: i64 = t
            .parse()
            .map_err(|_| Error::Parse(format!("invalid outcome {s:?}")))?;
        Outcome::from_value(v)
    }
}

/// A ±1 outcome, as produced by a detector that always fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub const ALL: [Sign; 2] = [Sign::Minus, Sign::Plus];

    pub fn value(self) -> i8 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }

    pub fn from_value(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Sign::Minus),
            1 => Ok(Sign::Plus),
            _ => Err(Error::AlphabetViolation(format!(
                "expected -1 or +1, got {v}"
            ))),
        }
    }

    pub fn outcome(self) -> Outcome {
        match self {
            Sign::Minus => Outcome::Minus,
            Sign::Plus => Outcome::Plus,
        }
    }

    pub fn from_outcome(o: Outcome) -> Option<Sign> {
        match o {
            Outcome::Minus => Some(Sign::Minus),
            Outcome::Zero => None,
            Outcome::Plus => Some(Sign::Plus),
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.outcome().fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Alphabet {
    /// {−1, +1}
    Binary,
    /// {−1, 0, +1}
    Ternary,
}

impl Alphabet {
    pub fn outcomes(self) -> &'static [Outcome] {
        match self {
            Alphabet::Binary => &[Outcome::Minus, Outcome::Plus],
            Alphabet::Ternary => &Outcome::ALL,
        }
    }

    pub fn admits(self, o: Outcome) -> bool {
        self == Alphabet::Ternary || o != Outcome::Zero
    }

    pub fn name(self) -> &'static str {
        match self {
            Alphabet::Binary => "binary",
            Alphabet::Ternary => "ternary",
        }
    }

    fn require(self, o: Outcome) -> Result<()> {
        if self.admits(o) {
            Ok(())
        } else {
            Err(Error::AlphabetViolation(format!(
                "outcome {o} not in {} alphabet",
                self.name()
            )))
        }
    }
}

impl FromStr for Alphabet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Alphabet::Binary),
            "ternary" => Ok(Alphabet::Ternary),
            _ => Err(Error::Parse(format!("unknown alphabet {s:?}"))),
        }
    }
}

fn check_normalized(what: impl Into<String>, total: &ExactProb) -> Result<()> {
    if total.value().is_one() {
        Ok(())
    } else {
        Err(Error::NotNormalized {
            what: what.into(),
            deficit: Rational::one() - total.value(),
        })
    }
}

fn checked_mass(at: impl FnOnce() -> String, value: Rational) -> Result<ExactProb> {
    if value.is_negative() {
        Err(Error::NegativeMass { at: at(), value })
    } else {
        Ok(ExactProb(value))
    }
}

type Grid3 = [[ExactProb; 3]; 3];

fn zero_grid() -> Grid3 {
    std::array::from_fn(|_| std::array::from_fn(|_| ExactProb::zero()))
}

/// A pmf over outcome pairs (x, y).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PairPmf {
    alphabet: Alphabet,
    p: Grid3,
}

impl PairPmf {
    /// Builds and validates a pmf from sparse entries; absent cells are zero.
    pub fn from_entries(
        alphabet: Alphabet,
        entries: impl IntoIterator<Item = (Outcome, Outcome, Rational)>,
    ) -> Result<Self> {
        let pmf = Self::collect(alphabet, entries, "")?;
        check_normalized("pair pmf", &pmf.total())?;
        Ok(pmf)
    }

    fn collect(
        alphabet: Alphabet,
        entries: impl IntoIterator<Item = (Outcome, Outcome, Rational)>,
        context: &str,
    ) -> Result<Self> {
        let mut p = zero_grid();
        let mut seen = [[false; 3]; 3];
        for (x, y, value) in entries {
            alphabet.require(x)?;
            alphabet.require(y)?;
            let cell = &mut seen[x.index()][y.index()];
            if *cell {
                return Err(Error::DuplicateEntry(format!("{context}{x},{y}")));
            }
            *cell = true;
            p[x.index()][y.index()] = checked_mass(|| format!("{context}{x},{y}"), value)?;
        }
        Ok(PairPmf { alphabet, p })
    }

    pub fn point(alphabet: Alphabet, x: Outcome, y: Outcome) -> Result<Self> {
        Self::from_entries(alphabet, [(x, y, Rational::one())])
    }

    /// Uniform over the alphabet squared.
    pub fn uniform(alphabet: Alphabet) -> Self {
        let outs = alphabet.outcomes();
        let n = (outs.len() * outs.len()) as u64;
        let mut p = zero_grid();
        for x in outs {
            for y in outs {
                p[x.index()][y.index()] = ExactProb::ratio(1, n);
            }
        }
        PairPmf { alphabet, p }
    }

    /// Product of two marginals, each indexed by [`Outcome::index`].
    pub fn product(alphabet: Alphabet, fx: &[ExactProb; 3], gy: &[ExactProb; 3]) -> Result<Self> {
        let mut entries = Vec::new();
        for &x in alphabet.outcomes() {
            for &y in alphabet.outcomes() {
                entries.push((x, y, (&fx[x.index()] * &gy[y.index()]).into_inner()));
            }
        }
        Self::from_entries(alphabet, entries)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn get(&self, x: Outcome, y: Outcome) -> &ExactProb {
        &self.p[x.index()][y.index()]
    }

    /// Cells admitted by the alphabet, in canonical order.
    pub fn cells(&self) -> impl Iterator<Item = (Outcome, Outcome, &ExactProb)> + '_ {
        let outs = self.alphabet.outcomes();
        outs.iter().flat_map(move |&x| {
            outs.iter()
                .map(move |&y| (x, y, &self.p[x.index()][y.index()]))
        })
    }

    pub fn total(&self) -> ExactProb {
        self.p.iter().flatten().sum()
    }

    /// Σ x·y·p(x, y).
    pub fn expectation_xy(&self) -> Rational {
        let mut e = Rational::zero();
        for (x, y, p) in self.cells() {
            let xy = i64::from(x.value() * y.value());
            if xy != 0 && !p.is_zero() {
                e += p.value() * Rational::from_integer(xy.into());
            }
        }
        e
    }

    pub fn marginal_x(&self) -> [ExactProb; 3] {
        std::array::from_fn(|i| self.p[i].iter().sum())
    }

    pub fn marginal_y(&self) -> [ExactProb; 3] {
        std::array::from_fn(|j| self.p.iter().map(|row| &row[j]).sum())
    }

    /// `alpha·self + (1−alpha)·other`.
    pub fn mix(&self, alpha: &ExactProb, other: &PairPmf) -> Result<PairPmf> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetViolation("mixing different alphabets".into()));
        }
        let beta = alpha.complement()?;
        let p = std::array::from_fn(|i| {
            std::array::from_fn(|j| &(alpha * &self.p[i][j]) + &(&beta * &other.p[i][j]))
        });
        Ok(PairPmf { alphabet: self.alphabet, p })
    }

    /// Law of (f(x), g(y)).
    pub fn relabel(&self, f: impl Fn(Outcome) -> Outcome, g: impl Fn(Outcome) -> Outcome) -> PairPmf {
        let mut p = zero_grid();
        for (x, y, m) in self.cells() {
            let cell = &mut p[f(x).index()][g(y).index()];
            *cell = &*cell + m;
        }
        PairPmf { alphabet: self.alphabet, p }
    }

    /// Panics unless the entries sum to exactly one.
    pub(crate) fn from_grid(alphabet: Alphabet, p: Grid3) -> PairPmf {
        let pmf = PairPmf { alphabet, p };
        debug_assert!(pmf.total().value().is_one());
        pmf
    }
}

/// Σ x·y·p(x, y) for a validated pair pmf.
pub fn expectation_xy(pmf: &PairPmf) -> Rational {
    pmf.expectation_xy()
}

/// Law of the settings (A, B).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SettingsDist {
    p: [[ExactProb; 2]; 2],
}

impl SettingsDist {
    pub fn from_entries(
        entries: impl IntoIterator<Item = (Setting, Setting, Rational)>,
    ) -> Result<Self> {
        let mut p: [[ExactProb; 2]; 2] = Default::default();
        let mut seen = [[false; 2]; 2];
        for (a, b, value) in entries {
            if std::mem::replace(&mut seen[a.index()][b.index()], true) {
                return Err(Error::DuplicateEntry(format!("{a},{b}")));
            }
            p[a.index()][b.index()] = checked_mass(|| format!("{a},{b}"), value)?;
        }
        let dist = SettingsDist { p };
        check_normalized("settings distribution", &dist.total())?;
        Ok(dist)
    }

    pub fn uniform() -> Self {
        SettingsDist {
            p: std::array::from_fn(|_| std::array::from_fn(|_| ExactProb::ratio(1, 4))),
        }
    }

    pub fn point(a: Setting, b: Setting) -> Self {
        let mut p: [[ExactProb; 2]; 2] = Default::default();
        p[a.index()][b.index()] = ExactProb::one();
        SettingsDist { p }
    }

    /// Independent settings with marginals `fa` and `gb` (indexed by setting).
    pub fn product(fa: &[ExactProb; 2], gb: &[ExactProb; 2]) -> Result<Self> {
        Self::from_entries(
            Setting::pairs().map(|(a, b)| (a, b, (&fa[a.index()] * &gb[b.index()]).into_inner())),
        )
    }

    pub fn get(&self, a: Setting, b: Setting) -> &ExactProb {
        &self.p[a.index()][b.index()]
    }

    pub fn total(&self) -> ExactProb {
        self.p.iter().flatten().sum()
    }

    pub fn has_full_support(&self) -> bool {
        self.p.iter().flatten().all(|m| !m.is_zero())
    }

    pub fn marginal_a(&self) -> [ExactProb; 2] {
        std::array::from_fn(|i| self.p[i].iter().sum())
    }

    pub fn marginal_b(&self) -> [ExactProb; 2] {
        std::array::from_fn(|j| self.p.iter().map(|row| &row[j]).sum())
    }

    /// Total-variation distance between this law and the product of its
    /// two marginals. Zero iff A and B are independent.
    pub fn dependence(&self) -> Rational {
        let (fa, gb) = (self.marginal_a(), self.marginal_b());
        let mut acc = Rational::zero();
        for (a, b) in Setting::pairs() {
            let prod = &fa[a.index()] * &gb[b.index()];
            acc += (self.get(a, b).value() - prod.value()).abs();
        }
        acc / rational(2, 1)
    }
}

/// The four conditional outcome laws q_ab(x, y), one per setting pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CondFamily {
    alphabet: Alphabet,
    q: [[PairPmf; 2]; 2],
}

impl CondFamily {
    pub fn new(alphabet: Alphabet, q: [[PairPmf; 2]; 2]) -> Result<Self> {
        if q.iter().flatten().any(|pmf| pmf.alphabet != alphabet) {
            return Err(Error::AlphabetViolation(
                "conditional pmf alphabet differs from family alphabet".into(),
            ));
        }
        Ok(CondFamily { alphabet, q })
    }

    /// Builds from sparse (a, b, x, y, mass) entries; each of the four
    /// conditionals must sum to exactly one.
    pub fn from_entries(
        alphabet: Alphabet,
        entries: impl IntoIterator<Item = (Setting, Setting, Outcome, Outcome, Rational)>,
    ) -> Result<Self> {
        let mut groups: [[Vec<(Outcome, Outcome, Rational)>; 2]; 2] = Default::default();
        for (a, b, x, y, v) in entries {
            groups[a.index()][b.index()].push((x, y, v));
        }
        let mut q: [[Option<PairPmf>; 2]; 2] = Default::default();
        for (a, b) in Setting::pairs() {
            let items = std::mem::take(&mut groups[a.index()][b.index()]);
            let pmf = PairPmf::collect(alphabet, items, &format!("{a},{b},"))?;
            check_normalized(format!("conditional q_{a}{b}"), &pmf.total())?;
            q[a.index()][b.index()] = Some(pmf);
        }
        Ok(CondFamily {
            alphabet,
            q: q.map(|row| row.map(|p| p.expect("filled above"))),
        })
    }

    pub fn from_fn(alphabet: Alphabet, mut f: impl FnMut(Setting, Setting) -> PairPmf) -> Result<Self> {
        let q = std::array::from_fn(|i| std::array::from_fn(|j| f(Setting::ALL[i], Setting::ALL[j])));
        Self::new(alphabet, q)
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        CondFamily {
            alphabet,
            q: std::array::from_fn(|_| std::array::from_fn(|_| PairPmf::uniform(alphabet))),
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn get(&self, a: Setting, b: Setting) -> &PairPmf {
        &self.q[a.index()][b.index()]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Setting, Setting, &PairPmf)> + '_ {
        Setting::pairs().map(move |(a, b)| (a, b, self.get(a, b)))
    }

    /// E(XY | A=a, B=b) for each pair, indexed `[a][b]`.
    pub fn correlations(&self) -> [[Rational; 2]; 2] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.q[i][j].expectation_xy()))
    }

    /// Restricts a ternary family that never produces 0 to the binary
    /// alphabet.
    pub fn to_binary(&self) -> Result<CondFamily> {
        if self.alphabet == Alphabet::Binary {
            return Ok(self.clone());
        }
        for (a, b, pmf) in self.pairs() {
            if pmf.cells().any(|(x, y, m)| (x == Outcome::Zero || y == Outcome::Zero) && !m.is_zero()) {
                return Err(Error::AlphabetViolation(format!(
                    "q_{a}{b} puts mass on a zero outcome"
                )));
            }
        }
        Ok(CondFamily {
            alphabet: Alphabet::Binary,
            q: self.q.clone().map(|row| {
                row.map(|pmf| PairPmf {
                    alphabet: Alphabet::Binary,
                    p: pmf.p,
                })
            }),
        })
    }

    pub fn require_binary(&self) -> Result<()> {
        match self.alphabet {
            Alphabet::Binary => Ok(()),
            Alphabet::Ternary => Err(Error::AlphabetViolation(
                "operation needs a binary family; post-select ternary data first".into(),
            )),
        }
    }
}

type Cells = [[Grid3; 2]; 2];

/// The observable law of (A, B, X, Y).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointDist {
    alphabet: Alphabet,
    p: Cells,
}

impl JointDist {
    pub fn from_entries(
        alphabet: Alphabet,
        entries: impl IntoIterator<Item = (Setting, Setting, Outcome, Outcome, Rational)>,
    ) -> Result<Self> {
        let mut p: Cells = std::array::from_fn(|_| std::array::from_fn(|_| zero_grid()));
        let mut seen = [[[[false; 3]; 3]; 2]; 2];
        for (a, b, x, y, value) in entries {
            alphabet.require(x)?;
            alphabet.require(y)?;
            let at = || format!("{a},{b},{x},{y}");
            if std::mem::replace(&mut seen[a.index()][b.index()][x.index()][y.index()], true) {
                return Err(Error::DuplicateEntry(at()));
            }
            p[a.index()][b.index()][x.index()][y.index()] = checked_mass(at, value)?;
        }
        let joint = JointDist { alphabet, p };
        check_normalized("joint distribution", &joint.total())?;
        Ok(joint)
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        compose(&SettingsDist::uniform(), &CondFamily::uniform(alphabet))
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn get(&self, a: Setting, b: Setting, x: Outcome, y: Outcome) -> &ExactProb {
        &self.p[a.index()][b.index()][x.index()][y.index()]
    }

    /// All admissible cells in canonical order: lexicographic in
    /// (a, b, x, y) with outcomes ordered −1, 0, +1.
    pub fn cells(&self) -> impl Iterator<Item = (Setting, Setting, Outcome, Outcome, &ExactProb)> + '_ {
        let outs = self.alphabet.outcomes();
        Setting::pairs().flat_map(move |(a, b)| {
            outs.iter().flat_map(move |&x| {
                outs.iter()
                    .map(move |&y| (a, b, x, y, self.get(a, b, x, y)))
            })
        })
    }

    pub fn total(&self) -> ExactProb {
        self.p.iter().flatten().flatten().flatten().sum()
    }

    pub fn settings_marginal(&self) -> SettingsDist {
        SettingsDist {
            p: std::array::from_fn(|i| {
                std::array::from_fn(|j| self.p[i][j].iter().flatten().sum())
            }),
        }
    }

    /// Unnormalized slice at setting pair (a, b).
    pub(crate) fn slice(&self, a: Setting, b: Setting) -> &Grid3 {
        &self.p[a.index()][b.index()]
    }

    pub(crate) fn from_cells_unchecked(alphabet: Alphabet, p: Cells) -> JointDist {
        let joint = JointDist { alphabet, p };
        debug_assert!(joint.total().value().is_one());
        joint
    }
}

/// pmf(a, b, x, y) = settings(a, b) · q_ab(x, y).
pub fn compose(settings: &SettingsDist, cond: &CondFamily) -> JointDist {
    let p = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let w = &settings.p[i][j];
            let q = &cond.q[i][j].p;
            std::array::from_fn(|x| std::array::from_fn(|y| w * &q[x][y]))
        })
    });
    JointDist::from_cells_unchecked(cond.alphabet, p)
}

/// How [`factor_with`] treats a setting pair of zero probability.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ZeroMassPolicy {
    #[default]
    Error,
    /// Substitute the uniform conditional for that pair.
    UniformFallback,
}

/// Splits a joint law into the settings law and the four conditionals.
pub fn factor(joint: &JointDist) -> Result<(SettingsDist, CondFamily)> {
    factor_with(joint, ZeroMassPolicy::Error)
}

pub fn factor_with(joint: &JointDist, policy: ZeroMassPolicy) -> Result<(SettingsDist, CondFamily)> {
    let settings = joint.settings_marginal();
    let mut q: [[Option<PairPmf>; 2]; 2] = Default::default();
    for (a, b) in Setting::pairs() {
        let w = settings.get(a, b);
        let pmf = if w.is_zero() {
            match policy {
                ZeroMassPolicy::Error => return Err(Error::ZeroSettingMass { a, b }),
                ZeroMassPolicy::UniformFallback => PairPmf::uniform(joint.alphabet),
            }
        } else {
            let slice = joint.slice(a, b);
            PairPmf::from_grid(
                joint.alphabet,
                std::array::from_fn(|x| std::array::from_fn(|y| slice[x][y].div(w))),
            )
        };
        q[a.index()][b.index()] = Some(pmf);
    }
    let cond = CondFamily {
        alphabet: joint.alphabet,
        q: q.map(|row| row.map(|p| p.expect("filled above"))),
    };
    Ok((settings, cond))
}

/// Record of an exact renormalization applied to float input.
#[derive(Clone, Debug, PartialEq)]
pub struct Renormalization {
    /// Exact sum of the binary values before rescaling.
    pub original_sum: Rational,
}

/// Slack on |sum − 1| accepted from float input before rescaling.
pub fn float_slack() -> Rational {
    rational(1, 1_000_000_000)
}

/// Converts one normalization group of floats to exact rationals (the
/// exact binary value of each), then applies [`renormalize_within_slack`].
pub fn ingest_floats(
    what: &str,
    values: &[f64],
) -> Result<(Vec<Rational>, Option<Renormalization>)> {
    let mut exact = Vec::with_capacity(values.len());
    for &v in values {
        let r = Rational::from_float(v)
            .ok_or_else(|| Error::Parse(format!("non-finite value {v} in {what}")))?;
        exact.push(r);
    }
    let (vals, meta) = renormalize_within_slack(what, exact)?;
    if meta.is_none() && !vals.iter().sum::<Rational>().is_one() {
        let deficit = Rational::one() - vals.iter().sum::<Rational>();
        return Err(Error::NotNormalized { what: what.into(), deficit });
    }
    Ok((vals, meta))
}

/// Rescales a group exactly when its sum is within [`float_slack`] of one
/// (but not one). Groups further off are returned unchanged so validation
/// reports the deficit; negative entries are rejected.
pub fn renormalize_within_slack(
    what: &str,
    values: Vec<Rational>,
) -> Result<(Vec<Rational>, Option<Renormalization>)> {
    if let Some(v) = values.iter().find(|v| v.is_negative()) {
        return Err(Error::NegativeMass { at: what.into(), value: v.clone() });
    }
    let sum: Rational = values.iter().sum();
    if sum.is_one() || sum.is_zero() || (Rational::one() - &sum).abs() > float_slack() {
        return Ok((values, None));
    }
    let scaled = values.into_iter().map(|r| r / &sum).collect();
    Ok((scaled, Some(Renormalization { original_sum: sum })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Outcome::{Minus as M, Plus as P};
    use Setting::{One as S1, Two as S2};

    fn r(n: i64, d: i64) -> Rational {
        rational(n, d)
    }

    #[test]
    fn uniform_table_validates() {
        let entries = Setting::pairs().flat_map(|(a, b)| {
            [M, P].into_iter().flat_map(move |x| [M, P].into_iter().map(move |y| (a, b, x, y, r(1, 16))))
        });
        let joint = JointDist::from_entries(Alphabet::Binary, entries).unwrap();
        assert_eq!(joint, JointDist::uniform(Alphabet::Binary));
    }

    #[test]
    fn short_table_reports_deficit() {
        let entries = Setting::pairs()
            .flat_map(|(a, b)| {
                [M, P].into_iter().flat_map(move |x| [M, P].into_iter().map(move |y| (a, b, x, y, r(1, 16))))
            })
            .skip(1);
        let err = JointDist::from_entries(Alphabet::Binary, entries).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { ref deficit, .. } if *deficit == r(1, 16)), "{err}");
    }

    #[test]
    fn negative_entry_rejected() {
        let err = PairPmf::from_entries(
            Alphabet::Binary,
            [(P, P, r(5, 4)), (M, M, r(-1, 4))],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NegativeMass { .. }));
    }

    #[test]
    fn zero_outcome_in_binary_rejected() {
        let err = PairPmf::from_entries(Alphabet::Binary, [(Outcome::Zero, P, r(1, 1))]).unwrap_err();
        assert!(matches!(err, Error::AlphabetViolation(_)));
        let err = Sign::from_value(0).unwrap_err();
        assert!(matches!(err, Error::AlphabetViolation(_)));
    }

    #[test]
    fn duplicate_entry_rejected() {
        let err = PairPmf::from_entries(Alphabet::Binary, [(P, P, r(1, 2)), (P, P, r(1, 2))]).unwrap_err();
        assert!(matches!(err, Error::DuplicateEntry(_)));
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(PairPmf::point(Alphabet::Binary, P, P).unwrap().expectation_xy(), r(1, 1));
        assert_eq!(PairPmf::uniform(Alphabet::Binary).expectation_xy(), r(0, 1));
        let pmf = PairPmf::from_entries(
            Alphabet::Binary,
            [(P, P, r(3, 8)), (M, M, r(3, 8)), (P, M, r(1, 8)), (M, P, r(1, 8))],
        )
        .unwrap();
        // 3/8 + 3/8 − 1/8 − 1/8
        assert_eq!(expectation_xy(&pmf), r(1, 2));
        let ternary = PairPmf::from_entries(
            Alphabet::Ternary,
            [(P, P, r(1, 2)), (Outcome::Zero, M, r(1, 2))],
        )
        .unwrap();
        assert_eq!(ternary.expectation_xy(), r(1, 2));
    }

    #[test]
    fn compose_point_settings() {
        let joint = compose(&SettingsDist::point(S1, S1), &CondFamily::uniform(Alphabet::Binary));
        for (a, b, _, _, m) in joint.cells() {
            assert_eq!(m.is_zero(), (a, b) != (S1, S1));
        }
    }

    #[test]
    fn factor_uniform() {
        let (s, q) = factor(&JointDist::uniform(Alphabet::Binary)).unwrap();
        assert_eq!(s, SettingsDist::uniform());
        assert_eq!(q, CondFamily::uniform(Alphabet::Binary));
    }

    #[test]
    fn factor_zero_mass_pair() {
        let settings = SettingsDist::from_entries([(S1, S1, r(1, 2)), (S1, S2, r(1, 4)), (S2, S1, r(1, 4))]).unwrap();
        let joint = compose(&settings, &CondFamily::uniform(Alphabet::Binary));
        assert_eq!(factor(&joint).unwrap_err(), Error::ZeroSettingMass { a: S2, b: S2 });
        let (s, q) = factor_with(&joint, ZeroMassPolicy::UniformFallback).unwrap();
        assert_eq!(s, settings);
        assert_eq!(q.get(S2, S2), &PairPmf::uniform(Alphabet::Binary));
    }

    #[test]
    fn rational_text_format() {
        assert_eq!(format_rational(&r(2, 4)), "1/2");
        assert_eq!(format_rational(&r(1, 1)), "1/1");
        assert_eq!(parse_rational("-3/6").unwrap(), r(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), r(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1/-2").is_err());
        assert!("-1/2".parse::<ExactProb>().is_err());
        assert_eq!("2/8".parse::<ExactProb>().unwrap(), ExactProb::ratio(1, 4));
    }

    #[test]
    fn float_ingest_exact_and_renormalized() {
        let (vals, meta) = ingest_floats("t", &[0.5, 0.25, 0.25]).unwrap();
        assert!(meta.is_none());
        assert_eq!(vals, vec![r(1, 2), r(1, 4), r(1, 4)]);

        let (vals, meta) = ingest_floats("t", &[0.1, 0.2, 0.7]).unwrap();
        let meta = meta.expect("0.1 + 0.2 + 0.7 is not exactly one in binary");
        assert_ne!(meta.original_sum, r(1, 1));
        assert_eq!(vals.iter().sum::<Rational>(), r(1, 1));

        assert!(matches!(
            ingest_floats("t", &[0.5, 0.4]).unwrap_err(),
            Error::NotNormalized { .. }
        ));
        assert!(matches!(
            ingest_floats("t", &[1.5, -0.5]).unwrap_err(),
            Error::NegativeMass { .. }
        ));
    }

    #[test]
    fn settings_dependence() {
        assert_eq!(SettingsDist::uniform().dependence(), r(0, 1));
        assert_eq!(SettingsDist::point(S1, S2).dependence(), r(0, 1));
        let corr = SettingsDist::from_entries([(S1, S1, r(1, 2)), (S2, S2, r(1, 2))]).unwrap();
        // product is uniform 1/4: TV = ½(2·¼ + 2·¼)
        assert_eq!(corr.dependence(), r(1, 2));
    }
}
