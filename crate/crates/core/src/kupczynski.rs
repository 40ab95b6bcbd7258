//! Setting-dependent hidden-variable models of a Bell experiment.
//!
//! Two model shapes are supported:
//!
//! * [`Model3Spec`]: a source pair (λ1, λ2) with law `p_source`, and for each
//!   setting pair (a, b) an arbitrary, possibly non-factoring law `p_ab` of
//!   the instrument variables (λ_a, λ_b). Outcomes are X_a(λ1, λ_a) and
//!   Y_b(λ2, λ_b) in {−1, +1}, and
//!   E(X_ab Y_ab) = Σ X_a(λ1, λ_a)·Y_b(λ2, λ_b)·p_source(λ1, λ2)·p_ab(λ_a, λ_b).
//! * [`Model1Spec`]: the same source, factored instrument laws p_a·p_b, and
//!   outcomes in {−1, 0, +1} where 0 is a non-detection.
//!
//! Instrument hidden values carry a (party, setting) tag, so the four
//! instrument spaces are pairwise disjoint and every value determines who
//! used it and with which setting.
//!
//! [`universal_construct`] builds, for any four target laws q_ab, a
//! [`Model3Spec`] reproducing them exactly. Signalling and CHSH values
//! up to 4 are reachable, so the model shape constrains nothing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lhv::{HiddenState, LhvModel};
use crate::probcore::{
    factor, rational, Alphabet, CondFamily, ExactProb, JointDist, Outcome, PairPmf, Rational,
    Setting, SettingsDist, Sign,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Alice,
    Bob,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "Alice",
            Party::Bob => "Bob",
        })
    }
}

impl FromStr for Party {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Alice" | "alice" => Ok(Party::Alice),
            "Bob" | "bob" => Ok(Party::Bob),
            _ => Err(Error::Parse(format!("unknown party {s:?}"))),
        }
    }
}

/// An instrument hidden value: an opaque token tagged with the party and
/// setting it belongs to. Values with different tags are distinct.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelledHiddenValue {
    pub value: String,
    pub party: Party,
    pub setting: Setting,
}

impl LabelledHiddenValue {
    pub fn new(value: impl Into<String>, party: Party, setting: Setting) -> Self {
        LabelledHiddenValue { value: value.into(), party, setting }
    }
}

impl fmt::Display for LabelledHiddenValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.value, self.party, self.setting)
    }
}

/// One point (λ1, λ2) of the source space.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourcePoint {
    pub l1: String,
    pub l2: String,
}

impl fmt::Display for SourcePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.l1, self.l2)
    }
}

/// The source law p(λ1, λ2). No factorization is assumed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpace {
    points: Vec<(SourcePoint, ExactProb)>,
}

impl SourceSpace {
    pub fn new(points: Vec<(SourcePoint, ExactProb)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (pt, _) in &points {
            if !seen.insert(pt) {
                return Err(Error::DuplicateEntry(format!("source point {pt}")));
            }
        }
        let total: ExactProb = points.iter().map(|(_, p)| p).sum();
        if !total.value().is_one() {
            return Err(Error::NotNormalized {
                what: "source law".into(),
                deficit: Rational::one() - total.value(),
            });
        }
        Ok(SourceSpace { points })
    }

    /// The one-point space used when the source variables play no role.
    pub fn trivial() -> Self {
        SourceSpace {
            points: vec![(SourcePoint { l1: "*".into(), l2: "*".into() }, ExactProb::one())],
        }
    }

    pub fn points(&self) -> &[(SourcePoint, ExactProb)] {
        &self.points
    }

    fn support(&self) -> impl Iterator<Item = &(SourcePoint, ExactProb)> {
        self.points.iter().filter(|(_, p)| !p.is_zero())
    }
}

/// Instrument spaces Λ_1, Λ_2 for one party, indexed by setting.
fn check_spaces(party: Party, spaces: &[Vec<LabelledHiddenValue>; 2]) -> Result<()> {
    for s in Setting::ALL {
        let mut seen = HashSet::new();
        for v in &spaces[s.index()] {
            if v.party != party || v.setting != s {
                return Err(Error::InvalidHiddenSpace(format!(
                    "{v} listed in the space of ({party}, {s})"
                )));
            }
            if !seen.insert(v) {
                return Err(Error::DuplicateEntry(format!("hidden value {v}")));
            }
        }
    }
    Ok(())
}

type XResponses = [HashMap<(String, LabelledHiddenValue), Sign>; 2];

fn response_table<T: Copy>(
    party: Party,
    entries: [Vec<(String, LabelledHiddenValue, T)>; 2],
) -> Result<[HashMap<(String, LabelledHiddenValue), T>; 2]> {
    let mut out: [HashMap<_, _>; 2] = Default::default();
    for (slot, items) in out.iter_mut().zip(entries) {
        for (l, v, o) in items {
            if v.party != party {
                return Err(Error::InvalidHiddenSpace(format!(
                    "{party}'s response defined on {v}"
                )));
            }
            let key = (l, v);
            if slot.contains_key(&key) {
                return Err(Error::DuplicateEntry(format!("response at ({}, {})", key.0, key.1)));
            }
            slot.insert(key, o);
        }
    }
    Ok(out)
}

/// Entries of one instrument law p_ab.
pub type InstrumentEntries = Vec<(LabelledHiddenValue, LabelledHiddenValue, Rational)>;
/// Response entries `(λ_source, λ_instrument, outcome)` for each setting.
pub type ResponseEntries<T> = [Vec<(String, LabelledHiddenValue, T)>; 2];

/// Setting-dependent instrument laws that need not factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model3Spec {
    source: SourceSpace,
    alice: [Vec<LabelledHiddenValue>; 2],
    bob: [Vec<LabelledHiddenValue>; 2],
    /// p_ab over the full product of all Alice values × all Bob values,
    /// row-major, indexed `[a][b]`.
    p_ab: [[Vec<ExactProb>; 2]; 2],
    x: XResponses,
    y: XResponses,
}

impl Model3Spec {
    pub fn new(
        source: SourceSpace,
        alice: [Vec<LabelledHiddenValue>; 2],
        bob: [Vec<LabelledHiddenValue>; 2],
        p_ab: [[InstrumentEntries; 2]; 2],
        x: ResponseEntries<Sign>,
        y: ResponseEntries<Sign>,
    ) -> Result<Self> {
        check_spaces(Party::Alice, &alice)?;
        check_spaces(Party::Bob, &bob)?;
        let a_index: HashMap<&LabelledHiddenValue, usize> =
            alice.iter().flatten().enumerate().map(|(i, v)| (v, i)).collect();
        let b_index: HashMap<&LabelledHiddenValue, usize> =
            bob.iter().flatten().enumerate().map(|(j, v)| (v, j)).collect();
        let (na, nb) = (a_index.len(), b_index.len());

        let mut dense: [[Vec<ExactProb>; 2]; 2] = Default::default();
        for (a, b) in Setting::pairs() {
            let mut grid = vec![ExactProb::zero(); na * nb];
            let mut seen = vec![false; na * nb];
            for (la, lb, m) in &p_ab[a.index()][b.index()] {
                let i = *a_index
                    .get(la)
                    .ok_or_else(|| Error::InvalidHiddenSpace(format!("p_{a}{b} uses unknown value {la}")))?;
                let j = *b_index
                    .get(lb)
                    .ok_or_else(|| Error::InvalidHiddenSpace(format!("p_{a}{b} uses unknown value {lb}")))?;
                if std::mem::replace(&mut seen[i * nb + j], true) {
                    return Err(Error::DuplicateEntry(format!("p_{a}{b}({la}, {lb})")));
                }
                if m.is_negative() {
                    return Err(Error::NegativeMass {
                        at: format!("p_{a}{b}({la}, {lb})"),
                        value: m.clone(),
                    });
                }
                grid[i * nb + j] = ExactProb::new(m.clone())?;
            }
            let total: ExactProb = grid.iter().sum();
            if !total.value().is_one() {
                return Err(Error::NotNormalized {
                    what: format!("instrument law p_{a}{b}"),
                    deficit: Rational::one() - total.value(),
                });
            }
            dense[a.index()][b.index()] = grid;
        }

        Ok(Model3Spec {
            source,
            alice,
            bob,
            p_ab: dense,
            x: response_table(Party::Alice, x)?,
            y: response_table(Party::Bob, y)?,
        })
    }

    pub fn source(&self) -> &SourceSpace {
        &self.source
    }

    pub fn alice_space(&self, a: Setting) -> &[LabelledHiddenValue] {
        &self.alice[a.index()]
    }

    pub fn bob_space(&self, b: Setting) -> &[LabelledHiddenValue] {
        &self.bob[b.index()]
    }

    fn alice_all(&self) -> impl Iterator<Item = &LabelledHiddenValue> {
        self.alice.iter().flatten()
    }

    fn bob_all(&self) -> impl Iterator<Item = &LabelledHiddenValue> {
        self.bob.iter().flatten()
    }

    /// Positive-mass points of p_ab over the full instrument product.
    pub fn instrument_support(
        &self,
        a: Setting,
        b: Setting,
    ) -> impl Iterator<Item = (&LabelledHiddenValue, &LabelledHiddenValue, &ExactProb)> {
        let nb = self.bob_all().count();
        let grid = &self.p_ab[a.index()][b.index()];
        self.alice_all().enumerate().flat_map(move |(i, la)| {
            self.bob_all()
                .enumerate()
                .map(move |(j, lb)| (la, lb, &grid[i * nb + j]))
                .filter(|(_, _, p)| !p.is_zero())
        })
    }

    pub fn p_ab(&self, a: Setting, b: Setting, la: &LabelledHiddenValue, lb: &LabelledHiddenValue) -> ExactProb {
        let i = self.alice_all().position(|v| v == la);
        let j = self.bob_all().position(|v| v == lb);
        match (i, j) {
            (Some(i), Some(j)) => {
                let nb = self.bob_all().count();
                self.p_ab[a.index()][b.index()][i * nb + j].clone()
            }
            _ => ExactProb::zero(),
        }
    }

    pub fn response_x(&self, a: Setting, l1: &str, la: &LabelledHiddenValue) -> Result<Sign> {
        self.x[a.index()]
            .get(&(l1.to_owned(), la.clone()))
            .copied()
            .ok_or_else(|| Error::ResponseUndefined(format!("X_{a}({l1}, {la})")))
    }

    pub fn response_y(&self, b: Setting, l2: &str, lb: &LabelledHiddenValue) -> Result<Sign> {
        self.y[b.index()]
            .get(&(l2.to_owned(), lb.clone()))
            .copied()
            .ok_or_else(|| Error::ResponseUndefined(format!("Y_{b}({l2}, {lb})")))
    }

    /// All response entries for X_a, sorted.
    pub fn responses_x(&self, a: Setting) -> Vec<(&str, &LabelledHiddenValue, Sign)> {
        sorted_responses(&self.x[a.index()])
    }

    pub fn responses_y(&self, b: Setting) -> Vec<(&str, &LabelledHiddenValue, Sign)> {
        sorted_responses(&self.y[b.index()])
    }

    /// True when the four instrument spaces are pairwise disjoint.
    pub fn instrument_spaces_disjoint(&self) -> bool {
        let all: Vec<_> = self.alice_all().chain(self.bob_all()).collect();
        all.iter().collect::<HashSet<_>>().len() == all.len()
    }

    /// Mass p_ab places on points whose setting tags differ from (a, b).
    pub fn off_block_mass(&self, a: Setting, b: Setting) -> ExactProb {
        self.instrument_support(a, b)
            .filter(|(la, lb, _)| la.setting != a || lb.setting != b)
            .map(|(_, _, p)| p)
            .sum()
    }
}

fn sorted_responses<T: Copy>(table: &HashMap<(String, LabelledHiddenValue), T>) -> Vec<(&str, &LabelledHiddenValue, T)> {
    let mut v: Vec<_> = table.iter().map(|((l, h), o)| (l.as_str(), h, *o)).collect();
    v.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    v
}

/// The four laws of (X_ab, Y_ab):
/// q_ab(x, y) = Σ p_source(λ1, λ2)·p_ab(λ_a, λ_b)·[X_a(λ1, λ_a) = x]·[Y_b(λ2, λ_b) = y],
/// summed over the full product of the source and instrument supports.
pub fn evaluate_model3(spec: &Model3Spec) -> Result<CondFamily> {
    let mut q: [[Option<PairPmf>; 2]; 2] = Default::default();
    for (a, b) in Setting::pairs() {
        let mut grid: [[ExactProb; 3]; 3] = Default::default();
        for (src, ps) in spec.source.support() {
            for (la, lb, pi) in spec.instrument_support(a, b) {
                let x = spec.response_x(a, &src.l1, la)?.outcome().index();
                let y = spec.response_y(b, &src.l2, lb)?.outcome().index();
                let cell = &mut grid[x][y];
                *cell = &*cell + &(ps * pi);
            }
        }
        q[a.index()][b.index()] = Some(PairPmf::from_grid(Alphabet::Binary, grid));
    }
    CondFamily::new(Alphabet::Binary, q.map(|row| row.map(|p| p.expect("filled"))))
}

/// E(X_ab Y_ab) as the literal weighted sum of products of responses.
pub fn model3_correlation(spec: &Model3Spec, a: Setting, b: Setting) -> Result<Rational> {
    let mut e = Rational::zero();
    for (src, ps) in spec.source.support() {
        for (la, lb, pi) in spec.instrument_support(a, b) {
            let xy = spec.response_x(a, &src.l1, la)?.value() * spec.response_y(b, &src.l2, lb)?.value();
            e += Rational::from_integer(xy.into()) * ps.value() * pi.value();
        }
    }
    Ok(e)
}

fn outcome_token(s: Sign) -> &'static str {
    match s {
        Sign::Minus => "-1",
        Sign::Plus => "+1",
    }
}

/// Builds a [`Model3Spec`] that reproduces `target` exactly.
///
/// Λ_a = {−1, +1} × {(Alice, a)} and Λ_b = {−1, +1} × {(Bob, b)};
/// p_ab((x, Alice, a), (y, Bob, b)) = q_ab(x, y) and zero on every other
/// point; X_a and Y_b read off the outcome coordinate. The source is the
/// one-point space.
pub fn universal_construct(target: &CondFamily) -> Result<Model3Spec> {
    target.require_binary()?;
    let value = |s: Sign, party, setting| LabelledHiddenValue::new(outcome_token(s), party, setting);
    let alice = Setting::ALL.map(|a| Sign::ALL.iter().map(|&s| value(s, Party::Alice, a)).collect());
    let bob = Setting::ALL.map(|b| Sign::ALL.iter().map(|&s| value(s, Party::Bob, b)).collect());

    let p_ab = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let (a, b) = (Setting::ALL[i], Setting::ALL[j]);
            let q = target.get(a, b);
            Sign::ALL
                .iter()
                .flat_map(|&x| {
                    Sign::ALL.iter().map(move |&y| {
                        (
                            value(x, Party::Alice, a),
                            value(y, Party::Bob, b),
                            q.get(x.outcome(), y.outcome()).value().clone(),
                        )
                    })
                })
                .collect()
        })
    });

    let source = SourceSpace::trivial();
    let l = source.points[0].0.clone();
    let x = Setting::ALL.map(|a| Sign::ALL.iter().map(|&s| (l.l1.clone(), value(s, Party::Alice, a), s)).collect());
    let y = Setting::ALL.map(|b| Sign::ALL.iter().map(|&s| (l.l2.clone(), value(s, Party::Bob, b), s)).collect());

    Model3Spec::new(source, alice, bob, p_ab, x, y)
}

/// Factored instrument laws and outcomes in {−1, 0, +1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model1Spec {
    source: SourceSpace,
    p_a: [Vec<(LabelledHiddenValue, ExactProb)>; 2],
    p_b: [Vec<(LabelledHiddenValue, ExactProb)>; 2],
    x: [HashMap<(String, LabelledHiddenValue), Outcome>; 2],
    y: [HashMap<(String, LabelledHiddenValue), Outcome>; 2],
}

fn check_instrument_law(party: Party, laws: &[Vec<(LabelledHiddenValue, ExactProb)>; 2]) -> Result<()> {
    let spaces = laws.clone().map(|l| l.into_iter().map(|(v, _)| v).collect());
    check_spaces(party, &spaces)?;
    for s in Setting::ALL {
        let total: ExactProb = laws[s.index()].iter().map(|(_, p)| p).sum();
        if !total.value().is_one() {
            return Err(Error::NotNormalized {
                what: format!("instrument law of ({party}, {s})"),
                deficit: Rational::one() - total.value(),
            });
        }
    }
    Ok(())
}

impl Model1Spec {
    pub fn new(
        source: SourceSpace,
        p_a: [Vec<(LabelledHiddenValue, ExactProb)>; 2],
        p_b: [Vec<(LabelledHiddenValue, ExactProb)>; 2],
        x: ResponseEntries<Outcome>,
        y: ResponseEntries<Outcome>,
    ) -> Result<Self> {
        check_instrument_law(Party::Alice, &p_a)?;
        check_instrument_law(Party::Bob, &p_b)?;
        Ok(Model1Spec {
            source,
            p_a,
            p_b,
            x: response_table(Party::Alice, x)?,
            y: response_table(Party::Bob, y)?,
        })
    }

    pub fn source(&self) -> &SourceSpace {
        &self.source
    }

    pub fn p_a(&self, a: Setting) -> &[(LabelledHiddenValue, ExactProb)] {
        &self.p_a[a.index()]
    }

    pub fn p_b(&self, b: Setting) -> &[(LabelledHiddenValue, ExactProb)] {
        &self.p_b[b.index()]
    }

    pub fn response_x(&self, a: Setting, l1: &str, la: &LabelledHiddenValue) -> Result<Outcome> {
        self.x[a.index()]
            .get(&(l1.to_owned(), la.clone()))
            .copied()
            .ok_or_else(|| Error::ResponseUndefined(format!("X_{a}({l1}, {la})")))
    }

    pub fn response_y(&self, b: Setting, l2: &str, lb: &LabelledHiddenValue) -> Result<Outcome> {
        self.y[b.index()]
            .get(&(l2.to_owned(), lb.clone()))
            .copied()
            .ok_or_else(|| Error::ResponseUndefined(format!("Y_{b}({l2}, {lb})")))
    }

    pub fn responses_x(&self, a: Setting) -> Vec<(&str, &LabelledHiddenValue, Outcome)> {
        sorted_responses(&self.x[a.index()])
    }

    pub fn responses_y(&self, b: Setting) -> Vec<(&str, &LabelledHiddenValue, Outcome)> {
        sorted_responses(&self.y[b.index()])
    }

    /// Calls `f(source point, (a, b), x, y, p_source·p_a·p_b)` for every
    /// positive-mass combination.
    fn for_each_term(
        &self,
        a: Setting,
        b: Setting,
        mut f: impl FnMut(&SourcePoint, Outcome, Outcome, ExactProb),
    ) -> Result<()> {
        for (src, ps) in self.source.support() {
            for (la, pa) in self.p_a[a.index()].iter().filter(|(_, p)| !p.is_zero()) {
                let x = self.response_x(a, &src.l1, la)?;
                let w = ps * pa;
                for (lb, pb) in self.p_b[b.index()].iter().filter(|(_, p)| !p.is_zero()) {
                    let y = self.response_y(b, &src.l2, lb)?;
                    f(src, x, y, &w * pb);
                }
            }
        }
        Ok(())
    }

    /// Rewrites the model as a local hidden-variable model whose hidden
    /// state is (λ1, λ2, λ_a for both a, λ_b for both b). Fails if any
    /// reachable response is a non-detection.
    pub fn to_lhv_model(&self) -> Result<LhvModel> {
        let mut states = Vec::new();
        let sign = |o: Outcome, what: &dyn Fn() -> String| {
            Sign::from_outcome(o).ok_or_else(|| {
                Error::AlphabetViolation(format!("{} outputs 0; no local model over {{-1,+1}}", what()))
            })
        };
        let [s1, s2] = Setting::ALL;
        let nz = |v: &[(LabelledHiddenValue, ExactProb)]| -> Vec<(LabelledHiddenValue, ExactProb)> {
            v.iter().filter(|(_, p)| !p.is_zero()).cloned().collect()
        };
        let (a1, a2, b1, b2) = (nz(&self.p_a[0]), nz(&self.p_a[1]), nz(&self.p_b[0]), nz(&self.p_b[1]));
        for (src, ps) in self.source.support() {
            for (la1, pa1) in &a1 {
                let x1 = sign(self.response_x(s1, &src.l1, la1)?, &|| format!("X_1({}, {la1})", src.l1))?;
                for (la2, pa2) in &a2 {
                    let x2 = sign(self.response_x(s2, &src.l1, la2)?, &|| format!("X_2({}, {la2})", src.l1))?;
                    for (lb1, pb1) in &b1 {
                        let y1 = sign(self.response_y(s1, &src.l2, lb1)?, &|| format!("Y_1({}, {lb1})", src.l2))?;
                        for (lb2, pb2) in &b2 {
                            let y2 = sign(self.response_y(s2, &src.l2, lb2)?, &|| format!("Y_2({}, {lb2})", src.l2))?;
                            states.push(HiddenState {
                                id: format!("{src}|{la1}|{la2}|{lb1}|{lb2}"),
                                p: &(&(ps * pa1) * &(pa2 * pb1)) * pb2,
                                response: crate::bellstats::Quadruple::new(x1, x2, y1, y2),
                            });
                        }
                    }
                }
            }
        }
        LhvModel::new(states)
    }
}

/// Joint law of (A, B, X, Y): settings drawn from `settings`, the source
/// from p_source and the instrument values independently from p_a and p_b.
pub fn evaluate_model1(spec: &Model1Spec, settings: &SettingsDist) -> Result<JointDist> {
    let mut entries: BTreeMap<(Setting, Setting, Outcome, Outcome), ExactProb> = BTreeMap::new();
    for (a, b) in Setting::pairs() {
        let w = settings.get(a, b);
        if w.is_zero() {
            continue;
        }
        spec.for_each_term(a, b, |_, x, y, p| {
            let cell = entries.entry((a, b, x, y)).or_default();
            *cell = &*cell + &(w * &p);
        })?;
    }
    JointDist::from_entries(
        Alphabet::Ternary,
        entries.into_iter().map(|((a, b, x, y), p)| (a, b, x, y, p.into_inner())),
    )
}

/// What survives conditioning on both particles being detected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostSelectionReport {
    /// Law of (X, Y) given (A, B) and XY ≠ 0.
    pub conditional_family: CondFamily,
    /// Law of (A, B) given XY ≠ 0.
    pub postselected_settings: SettingsDist,
    /// P(XY ≠ 0).
    pub detection_rate: ExactProb,
    /// Total variation between the post-selected law of (A, B) and the
    /// product of its marginals.
    pub settings_dependence_delta: Rational,
    /// Total variation between the post-selected law of (A, B, X, Y) and
    /// the product of its (A, B) and (X, Y) marginals.
    pub outcome_settings_dependence: Rational,
}

/// Conditions a joint law on x ≠ 0 and y ≠ 0.
pub fn postselect(joint: &JointDist) -> Result<PostSelectionReport> {
    let detected = |x: Outcome, y: Outcome| x != Outcome::Zero && y != Outcome::Zero;
    let rate: ExactProb = joint
        .cells()
        .filter(|(_, _, x, y, _)| detected(*x, *y))
        .map(|(.., p)| p)
        .sum();
    if rate.is_zero() {
        return Err(Error::ZeroDetection);
    }
    let post = JointDist::from_entries(
        Alphabet::Binary,
        joint
            .cells()
            .filter(|(_, _, x, y, _)| detected(*x, *y))
            .map(|(a, b, x, y, p)| (a, b, x, y, p.div(&rate).into_inner())),
    )?;
    let (settings, cond) = factor(&post)?;

    let mut xy: [[ExactProb; 3]; 3] = Default::default();
    for (_, _, x, y, p) in post.cells() {
        let cell = &mut xy[x.index()][y.index()];
        *cell = &*cell + p;
    }
    let mut tv = Rational::zero();
    for (a, b, x, y, p) in post.cells() {
        let prod = settings.get(a, b) * &xy[x.index()][y.index()];
        tv += (p.value() - prod.value()).abs();
    }

    Ok(PostSelectionReport {
        settings_dependence_delta: settings.dependence(),
        outcome_settings_dependence: tv / rational(2, 1),
        conditional_family: cond,
        postselected_settings: settings,
        detection_rate: rate,
    })
}

/// Prior and post-detection laws of the source hidden value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenPosterior {
    pub points: Vec<SourcePoint>,
    pub prior: Vec<ExactProb>,
    pub posterior: Vec<ExactProb>,
    /// Total variation between prior and posterior.
    pub total_variation: Rational,
    /// P(XY ≠ 0).
    pub detection_rate: ExactProb,
    /// Total variation between the post-selected law of (source, A, B)
    /// and the product of its marginals. Zero before selection.
    pub hidden_settings_dependence: Rational,
}

/// Posterior of the source value given XY ≠ 0 under `settings`.
pub fn posterior_given_detection(spec: &Model1Spec, settings: &SettingsDist) -> Result<HiddenPosterior> {
    let points: Vec<SourcePoint> = spec.source.points.iter().map(|(s, _)| s.clone()).collect();
    let prior: Vec<ExactProb> = spec.source.points.iter().map(|(_, p)| p.clone()).collect();
    let index: HashMap<&SourcePoint, usize> = points.iter().enumerate().map(|(i, s)| (s, i)).collect();

    // detected mass of (source, a, b)
    let mut joint = vec![[[ExactProb::zero(), ExactProb::zero()], [ExactProb::zero(), ExactProb::zero()]]; points.len()];
    for (a, b) in Setting::pairs() {
        let w = settings.get(a, b);
        if w.is_zero() {
            continue;
        }
        spec.for_each_term(a, b, |src, x, y, p| {
            if x != Outcome::Zero && y != Outcome::Zero {
                let cell = &mut joint[index[src]][a.index()][b.index()];
                *cell = &*cell + &(w * &p);
            }
        })?;
    }
    let rate: ExactProb = joint.iter().flatten().flatten().sum();
    if rate.is_zero() {
        return Err(Error::ZeroDetection);
    }
    let joint: Vec<[[ExactProb; 2]; 2]> = joint
        .into_iter()
        .map(|m| m.map(|row| row.map(|p| p.div(&rate))))
        .collect();
    let posterior: Vec<ExactProb> = joint.iter().map(|m| m.iter().flatten().sum()).collect();
    let settings_post: [[ExactProb; 2]; 2] = std::array::from_fn(|i| {
        std::array::from_fn(|j| joint.iter().map(|m| &m[i][j]).sum())
    });

    let half = rational(1, 2);
    let total_variation = prior
        .iter()
        .zip(&posterior)
        .map(|(p, q)| (p.value() - q.value()).abs())
        .sum::<Rational>()
        * &half;
    let mut dep = Rational::zero();
    for (k, m) in joint.iter().enumerate() {
        for (a, b) in Setting::pairs() {
            let prod = &posterior[k] * &settings_post[a.index()][b.index()];
            dep += (m[a.index()][b.index()].value() - prod.value()).abs();
        }
    }

    Ok(HiddenPosterior {
        points,
        prior,
        posterior,
        total_variation,
        detection_rate: rate,
        hidden_settings_dependence: dep * half,
    })
}

/// t(a*, b*): +1 except t(2, 2) = −1.
fn demo_twist(a: Setting, b: Setting) -> Sign {
    if (a, b) == (Setting::Two, Setting::Two) {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

/// Synthetic detection-loophole model with the source law of (a*, b*)
/// given by `targets`; the sign s is a fair coin independent of it.
///
/// The source value (a*, b*, s) is shared by both wings. Alice outputs s
/// when her setting is a*, else 0; Bob outputs s·t(a*, b*) when his
/// setting is b*, else 0, with t = +1 except t(2, 2) = −1. Only trials
/// with A = a* and B = b* survive post-selection, so every surviving
/// pair shows perfect correlation, or anticorrelation at (2, 2).
pub fn loophole_model(targets: &SettingsDist) -> Result<Model1Spec> {
    let mut points = Vec::new();
    let mut x: ResponseEntries<Outcome> = Default::default();
    let mut y: ResponseEntries<Outcome> = Default::default();
    let detector = |party, s| LabelledHiddenValue::new("detector", party, s);
    for (ta, tb) in Setting::pairs() {
        for s in Sign::ALL {
            let token = format!("a*={ta},b*={tb},s={}", outcome_token(s));
            points.push((
                SourcePoint { l1: token.clone(), l2: token.clone() },
                targets.get(ta, tb) * &ExactProb::ratio(1, 2),
            ));
            for a in Setting::ALL {
                let out = if a == ta { s.outcome() } else { Outcome::Zero };
                x[a.index()].push((token.clone(), detector(Party::Alice, a), out));
            }
            for b in Setting::ALL {
                let out = if b == tb { (s * demo_twist(ta, tb)).outcome() } else { Outcome::Zero };
                y[b.index()].push((token.clone(), detector(Party::Bob, b), out));
            }
        }
    }
    let law = |party| Setting::ALL.map(|s| vec![(detector(party, s), ExactProb::one())]);
    Model1Spec::new(SourceSpace::new(points)?, law(Party::Alice), law(Party::Bob), x, y)
}

/// [`loophole_model`] with (a*, b*) uniform. Not Pearle's model; a small
/// discrete stand-in exhibiting the same post-selection effect.
pub fn loophole_demo() -> Model1Spec {
    loophole_model(&SettingsDist::uniform()).expect("uniform targets are valid")
}
