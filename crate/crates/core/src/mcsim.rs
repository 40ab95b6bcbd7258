//! Seeded Monte Carlo of i.i.d. Bell trials.
//!
//! Trial `i` of a run with seed `s` is drawn from the `i`-th output of a
//! SplitMix64 stream keyed by `s`, so any index range can be generated
//! independently and the result is the same as sequential generation.
//! Draws use inverse-CDF over the joint cells in canonical order:
//! lexicographic in (a, b, x, y) with outcomes ordered −1, 0, +1.

use std::io::{Read, Write};

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::bellstats::ChshReport;
use crate::error::{Error, Result};
use crate::probcore::{rational, CondFamily, ExactProb, JointDist, Outcome, Rational, Setting};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based SplitMix64: `word(i)` is the `i`-th output of the
/// sequential generator seeded with `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    pub fn word(&self, index: u64) -> u64 {
        mix64(self.seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&self, index: u64) -> f64 {
        (self.word(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// An independent stream derived from this one.
    pub fn split(&self, stream: u64) -> CounterRng {
        CounterRng::new(mix64(self.seed ^ mix64(stream.wrapping_add(GAMMA))))
    }
}

/// One observed trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrialRecord {
    pub index: u64,
    pub a: Setting,
    pub b: Setting,
    pub x: Outcome,
    pub y: Outcome,
}

/// Inverse-CDF sampler over the cells of a joint law.
#[derive(Clone, Debug)]
pub struct Sampler {
    cells: Vec<(Setting, Setting, Outcome, Outcome)>,
    cdf: Vec<f64>,
    last_positive: usize,
}

impl Sampler {
    pub fn new(joint: &JointDist) -> Self {
        let mut cells = Vec::new();
        let mut cdf = Vec::new();
        let mut acc = ExactProb::zero();
        let mut last_positive = 0;
        for (i, (a, b, x, y, p)) in joint.cells().enumerate() {
            acc = &acc + p;
            if !p.is_zero() {
                last_positive = i;
            }
            cells.push((a, b, x, y));
            cdf.push(acc.to_f64());
        }
        Sampler { cells, cdf, last_positive }
    }

    pub fn draw(&self, rng: &CounterRng, index: u64) -> TrialRecord {
        let u = rng.uniform(index);
        let i = self.cdf.partition_point(|&c| c <= u).min(self.last_positive);
        let (a, b, x, y) = self.cells[i];
        TrialRecord { index, a, b, x, y }
    }
}

/// `n` i.i.d. draws from `joint`, reproducible from `(joint, n, seed)`.
pub fn sample_trials(joint: &JointDist, n: u64, seed: u64) -> Result<Vec<TrialRecord>> {
    if n == 0 {
        return Err(Error::ZeroTrials);
    }
    let sampler = Sampler::new(joint);
    let rng = CounterRng::new(seed);
    Ok((0..n).into_par_iter().map(|i| sampler.draw(&rng, i)).collect())
}

/// Keeps the trials in which both particles were detected.
pub fn postselect_trials(trials: &[TrialRecord]) -> Vec<TrialRecord> {
    trials
        .iter()
        .filter(|t| t.x != Outcome::Zero && t.y != Outcome::Zero)
        .copied()
        .collect()
}

/// Per-setting-pair counts and sums of x·y. Merging is associative and
/// commutative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    counts: [[u64; 2]; 2],
    sums: [[i64; 2]; 2],
}

impl Tally {
    pub fn add(&mut self, t: &TrialRecord) {
        let (i, j) = (t.a.index(), t.b.index());
        self.counts[i][j] += 1;
        self.sums[i][j] += i64::from(t.x.value() * t.y.value());
    }

    pub fn merge(mut self, other: &Tally) -> Tally {
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            self.counts[i][j] += other.counts[i][j];
            self.sums[i][j] += other.sums[i][j];
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

impl<'a> FromIterator<&'a TrialRecord> for Tally {
    fn from_iter<I: IntoIterator<Item = &'a TrialRecord>>(iter: I) -> Self {
        let mut t = Tally::default();
        iter.into_iter().for_each(|r| t.add(r));
        t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairEstimate {
    pub count: u64,
    pub sum_xy: i64,
    /// Exact empirical mean of x·y.
    pub mean: Rational,
    /// sqrt((1 − Ê²) / n).
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub seed: Option<u64>,
    pub trials: u64,
    /// Indexed `[a][b]`; `None` for a pair with no trials.
    pub pairs: [[Option<PairEstimate>; 2]; 2],
    /// Present only when every setting pair was observed.
    pub chsh: Option<ChshReport>,
    pub partial: bool,
}

impl EstimateReport {
    pub fn pair(&self, a: Setting, b: Setting) -> Option<&PairEstimate> {
        self.pairs[a.index()][b.index()].as_ref()
    }

    pub fn missing_pairs(&self) -> Vec<(Setting, Setting)> {
        Setting::pairs().filter(|&(a, b)| self.pair(a, b).is_none()).collect()
    }

    pub fn from_tally(tally: &Tally) -> Result<EstimateReport> {
        if tally.total() == 0 {
            return Err(Error::EmptyTrials);
        }
        let pairs = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let (n, s) = (tally.counts[i][j], tally.sums[i][j]);
                (n > 0).then(|| {
                    let mean = rational(s, n as i64);
                    let e = mean.to_f64().unwrap_or(0.0);
                    PairEstimate {
                        count: n,
                        sum_xy: s,
                        std_error: ((1.0 - e * e).max(0.0) / n as f64).sqrt(),
                        mean,
                    }
                })
            })
        });
        let mut report = EstimateReport {
            seed: None,
            trials: tally.total(),
            pairs,
            chsh: None,
            partial: false,
        };
        if report.missing_pairs().is_empty() {
            let corr = std::array::from_fn(|i| {
                std::array::from_fn(|j| report.pairs[i][j].as_ref().expect("observed").mean.clone())
            });
            report.chsh = Some(ChshReport::from_correlations(corr));
        } else {
            report.partial = true;
        }
        Ok(report)
    }
}

/// Empirical correlations with standard errors. A setting pair with no
/// trials marks the report partial rather than failing.
pub fn estimate(trials: &[TrialRecord]) -> Result<EstimateReport> {
    let tally = trials
        .par_chunks(1 << 14)
        .map(|chunk| chunk.iter().collect::<Tally>())
        .reduce(Tally::default, |a, b| a.merge(&b));
    EstimateReport::from_tally(&tally)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZScore {
    Finite(f64),
    /// Zero standard error with an estimate that differs from the target.
    Infinite,
}

impl ZScore {
    pub fn abs(self) -> f64 {
        match self {
            ZScore::Finite(z) => z.abs(),
            ZScore::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZTable {
    /// Indexed `[a][b]`.
    pub z: [[ZScore; 2]; 2],
    pub max_abs: f64,
}

/// z = (Ê − E) / SE for each setting pair against the exact family.
pub fn compare(report: &EstimateReport, exact: &CondFamily) -> Result<ZTable> {
    let missing = report.missing_pairs();
    if !missing.is_empty() {
        let names: Vec<String> = missing.iter().map(|(a, b)| format!("({a},{b})")).collect();
        return Err(Error::MismatchedPairs(format!(
            "estimate lacks {}",
            names.join(", ")
        )));
    }
    let mut z = [[ZScore::Finite(0.0); 2]; 2];
    for (a, b, pmf) in exact.pairs() {
        let est = report.pair(a, b).expect("checked above");
        let target = pmf.expectation_xy();
        let diff = &est.mean - &target;
        z[a.index()][b.index()] = if est.std_error > 0.0 {
            ZScore::Finite(diff.to_f64().unwrap_or(f64::NAN) / est.std_error)
        } else if diff.is_zero() {
            ZScore::Finite(0.0)
        } else {
            ZScore::Infinite
        };
    }
    let max_abs = z.iter().flatten().map(|s| s.abs()).fold(0.0, f64::max);
    Ok(ZTable { z, max_abs })
}

const TRIAL_HEADER: [&str; 5] = ["index", "a", "b", "x", "y"];

/// Writes `index,a,b,x,y` CSV. Outcomes render as -1, 0, 1.
pub fn write_trials<W: Write>(writer: W, trials: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(TRIAL_HEADER).map_err(err)?;
    for t in trials {
        w.write_record([
            t.index.to_string(),
            t.a.to_string(),
            t.b.to_string(),
            t.x.value().to_string(),
            t.y.value().to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_trials<R: Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    if rdr.headers().map_err(err)?.iter().ne(TRIAL_HEADER) {
        return Err(Error::Parse("trial log header must be index,a,b,x,y".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        let field = |k: usize| rec.get(k).ok_or_else(|| Error::Parse("short trial row".into()));
        let index: u64 = field(0)?
            .parse()
            .map_err(|_| Error::Parse(format!("bad trial index {:?}", &rec[0])))?;
        out.push(TrialRecord {
            index,
            a: field(1)?.parse()?,
            b: field(2)?.parse()?,
            x: field(3)?.parse()?,
            y: field(4)?.parse()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::probcore::{compose, Alphabet, SettingsDist};
    use Setting::{One as S1, Two as S2};

    #[test]
    fn splitmix_reference_values() {
        // published outputs of SplitMix64 seeded with 0
        let rng = CounterRng::new(0);
        assert_eq!(rng.word(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.word(1), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.word(2), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn point_mass_joint_repeats() {
        let joint = compose(
            &SettingsDist::point(S2, S1),
            &CondFamily::from_fn(Alphabet::Binary, |_, _| {
                crate::probcore::PairPmf::point(Alphabet::Binary, Outcome::Minus, Outcome::Plus).unwrap()
            })
            .unwrap(),
        );
        let trials = sample_trials(&joint, 500, 9).unwrap();
        assert!(trials.iter().all(|t| (t.a, t.b, t.x, t.y) == (S2, S1, Outcome::Minus, Outcome::Plus)));
        assert!(trials.iter().enumerate().all(|(i, t)| t.index == i as u64));
    }

    #[test]
    fn same_seed_same_trials() {
        let joint = JointDist::uniform(Alphabet::Ternary);
        assert_eq!(sample_trials(&joint, 2000, 42).unwrap(), sample_trials(&joint, 2000, 42).unwrap());
        assert_ne!(sample_trials(&joint, 2000, 42).unwrap(), sample_trials(&joint, 2000, 43).unwrap());
    }

    #[test]
    fn partitioned_generation_matches_sequential() {
        let joint = JointDist::uniform(Alphabet::Binary);
        let sampler = Sampler::new(&joint);
        let rng = CounterRng::new(7);
        let whole = sample_trials(&joint, 1000, 7).unwrap();
        let back: Vec<_> = (500..1000).map(|i| sampler.draw(&rng, i)).collect();
        assert_eq!(&whole[500..], back.as_slice());
    }

    #[test]
    fn zero_trials_rejected() {
        assert_eq!(sample_trials(&JointDist::uniform(Alphabet::Binary), 0, 1).unwrap_err(), Error::ZeroTrials);
        assert_eq!(estimate(&[]).unwrap_err(), Error::EmptyTrials);
    }

    #[test]
    fn uniform_cell_counts_within_five_sigma() {
        let n = 100_000u64;
        let trials = sample_trials(&JointDist::uniform(Alphabet::Binary), n, 2024).unwrap();
        let mut counts = std::collections::HashMap::new();
        for t in &trials {
            *counts.entry((t.a, t.b, t.x, t.y)).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 16);
        let p = 1.0 / 16.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts.values() {
            assert!((*c as f64 - n as f64 * p).abs() <= 5.0 * sd, "count {c}");
        }
    }

    #[test]
    fn single_pair_trials_are_partial() {
        let t = TrialRecord { index: 0, a: S1, b: S1, x: Outcome::Plus, y: Outcome::Plus };
        let rep = estimate(&[t, TrialRecord { index: 1, ..t }]).unwrap();
        assert_eq!(rep.pair(S1, S1).unwrap().mean, rational(1, 1));
        assert_eq!(rep.pair(S1, S1).unwrap().std_error, 0.0);
        assert!(rep.partial);
        assert!(rep.chsh.is_none());
        assert_eq!(rep.missing_pairs().len(), 3);
        assert!(matches!(
            compare(&rep, &families::pr_box()).unwrap_err(),
            Error::MismatchedPairs(_)
        ));
    }

    #[test]
    fn concatenated_runs_add() {
        let joint = compose(&SettingsDist::uniform(), &families::with_correlations(
            [[rational(1, 2), rational(1, 3)], [rational(0, 1), rational(-1, 2)]],
        ));
        let r1 = sample_trials(&joint, 3000, 1).unwrap();
        let r2 = sample_trials(&joint, 5000, 2).unwrap();
        let (e1, e2) = (estimate(&r1).unwrap(), estimate(&r2).unwrap());
        let both = estimate(&[r1, r2].concat()).unwrap();
        assert_eq!(both.trials, 8000);
        for (a, b) in Setting::pairs() {
            let (p1, p2, p) = (e1.pair(a, b).unwrap(), e2.pair(a, b).unwrap(), both.pair(a, b).unwrap());
            assert_eq!(p.count, p1.count + p2.count);
            let weighted = (&p1.mean * rational(p1.count as i64, 1) + &p2.mean * rational(p2.count as i64, 1))
                / rational(p.count as i64, 1);
            assert_eq!(p.mean, weighted);
        }
    }

    #[test]
    fn point_model_z_is_zero() {
        let joint = compose(&SettingsDist::uniform(), &families::pr_box());
        let rep = estimate(&sample_trials(&joint, 10_000, 5).unwrap()).unwrap();
        let table = compare(&rep, &families::pr_box()).unwrap();
        assert_eq!(table.max_abs, 0.0);
        assert_eq!(rep.chsh.unwrap().s_max, rational(4, 1));
    }

    #[test]
    fn infinite_z_flagged() {
        let joint = compose(&SettingsDist::uniform(), &families::pr_box());
        let rep = estimate(&sample_trials(&joint, 1000, 5).unwrap()).unwrap();
        let table = compare(&rep, &CondFamily::uniform(Alphabet::Binary)).unwrap();
        assert_eq!(table.z[0][0], ZScore::Infinite);
        assert!(table.max_abs.is_infinite());
    }

    #[test]
    fn trial_csv_roundtrip() {
        let trials = sample_trials(&JointDist::uniform(Alphabet::Ternary), 50, 3).unwrap();
        let mut buf = Vec::new();
        write_trials(&mut buf, &trials).unwrap();
        assert!(buf.starts_with(b"index,a,b,x,y\n"));
        assert_eq!(read_trials(buf.as_slice()).unwrap(), trials);
    }
}
