//! JSON documents and report rendering.
//!
//! Every document is an object with `"schema_version": 1` and a `"kind"`:
//! `joint`, `cond`, `settings`, `lhv`, `model3` or `model1`. Probabilities
//! are `"num/den"` strings. With [`IngestMode::Float`] they may also be JSON
//! numbers; each normalization group is then converted exactly and, if its
//! sum is within 1e−9 of one, rescaled exactly, and the rescaling is
//! recorded in [`Loaded::renormalized`].
//!
//! ```json
//! {"schema_version": 1, "kind": "joint", "alphabet": "binary",
//!  "pmf": {"1,1,+1,+1": "1/8", "1,1,-1,-1": "1/8", ...}}
//! {"schema_version": 1, "kind": "cond", "alphabet": "binary",
//!  "q": {"1,1": {"+1,+1": "1/2", "-1,-1": "1/2"}, ...}}
//! {"schema_version": 1, "kind": "settings", "pmf": {"1,1": "1/4", ...}}
//! {"schema_version": 1, "kind": "lhv",
//!  "lambdas": [{"id": "l0", "p": "1/2", "x1": 1, "x2": -1, "y1": 1, "y2": 1}, ...]}
//! ```
//!
//! Model documents name instrument hidden values by token. A token in
//! `instrument_spaces.alice."a"` denotes the value (token, Alice, a). In
//! `p_ab."a,b"` and in responses, `la`/`lb` default to the setting of the
//! key; `la_setting`/`lb_setting` select another one.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::bellstats::{ChshReport, NoSignallingReport};
use crate::error::{Error, Result};
use crate::kupczynski::{
    HiddenPosterior, InstrumentEntries, LabelledHiddenValue, Model1Spec, Model3Spec, Party,
    PostSelectionReport, ResponseEntries, SourcePoint, SourceSpace,
};
use crate::lhv::{HiddenState, LhvModel};
use crate::mcsim::{EstimateReport, ZScore, ZTable};
use crate::probcore::{
    format_rational, parse_rational, renormalize_within_slack, Alphabet, CondFamily, ExactProb,
    JointDist, Outcome, Rational, Renormalization, Setting, SettingsDist, Sign,
};
use crate::bellstats::Quadruple;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IngestMode {
    #[default]
    Exact,
    Float,
}

/// A parsed value plus the exact renormalizations applied to float input.
#[derive(Clone, Debug, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub renormalized: Vec<(String, Renormalization)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Joint(JointDist),
    Cond(CondFamily),
    Settings(SettingsDist),
    Lhv(LhvModel),
    Model3(Model3Spec),
    Model1(Model1Spec),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Joint(_) => "joint",
            Document::Cond(_) => "cond",
            Document::Settings(_) => "settings",
            Document::Lhv(_) => "lhv",
            Document::Model3(_) => "model3",
            Document::Model1(_) => "model1",
        }
    }
}

#[derive(Deserialize, Clone, Debug)]
#[serde(untagged)]
enum Prob {
    Text(String),
    Number(f64),
}

/// Resolves probabilities one normalization group at a time.
struct Ingest {
    mode: IngestMode,
    renormalized: Vec<(String, Renormalization)>,
}

impl Ingest {
    fn group(&mut self, what: &str, values: Vec<Prob>) -> Result<Vec<Rational>> {
        let mut exact = Vec::with_capacity(values.len());
        for v in values {
            exact.push(match v {
                Prob::Text(s) => {
                    if s.trim_start().starts_with('-') {
                        return Err(Error::NegativeMass { at: what.into(), value: parse_rational(&s)? });
                    }
                    parse_rational(&s)?
                }
                Prob::Number(f) => match self.mode {
                    IngestMode::Exact => {
                        return Err(Error::Parse(format!(
                            "{what}: probabilities must be \"num/den\" strings (got {f}); use float ingestion for numbers"
                        )))
                    }
                    IngestMode::Float => Rational::from_float(f)
                        .ok_or_else(|| Error::Parse(format!("{what}: non-finite value")))?,
                },
            });
        }
        if self.mode == IngestMode::Exact {
            return Ok(exact);
        }
        let (vals, meta) = renormalize_within_slack(what, exact)?;
        if let Some(m) = meta {
            self.renormalized.push((what.to_owned(), m));
        }
        Ok(vals)
    }
}

fn de<T: for<'a> Deserialize<'a>>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses any document kind.
pub fn parse_document(text: &str, mode: IngestMode) -> Result<Loaded<Document>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("document must be a JSON object".into()))?;
    match obj.get("schema_version").and_then(Value::as_u64) {
        Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(Error::Parse(format!("unsupported schema_version {v}"))),
        None => return Err(Error::Parse("missing schema_version".into())),
    }
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse("missing kind".into()))?
        .to_owned();
    let mut ing = Ingest { mode, renormalized: Vec::new() };
    let doc = match kind.as_str() {
        "joint" => Document::Joint(joint_from(de(value)?, &mut ing)?),
        "cond" => Document::Cond(cond_from(de(value)?, &mut ing)?),
        "settings" => Document::Settings(settings_from(de(value)?, &mut ing)?),
        "lhv" => Document::Lhv(lhv_from(de(value)?, &mut ing)?),
        "model3" => Document::Model3(model3_from(de(value)?, &mut ing)?),
        "model1" => Document::Model1(model1_from(de(value)?, &mut ing)?),
        other => return Err(Error::Parse(format!("unknown kind {other:?}"))),
    };
    Ok(Loaded { value: doc, renormalized: ing.renormalized })
}

fn split_key<const N: usize>(key: &str) -> Result<[&str; N]> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    parts
        .try_into()
        .map_err(|_| Error::Parse(format!("key {key:?} must have {N} comma-separated fields")))
}

fn setting_pair(key: &str) -> Result<(Setting, Setting)> {
    let [a, b] = split_key::<2>(key)?;
    Ok((a.parse()?, b.parse()?))
}

fn outcome_pair(key: &str) -> Result<(Outcome, Outcome)> {
    let [x, y] = split_key::<2>(key)?;
    Ok((x.parse()?, y.parse()?))
}

fn setting_key(key: &str) -> Result<Setting> {
    key.parse()
}

#[derive(Deserialize)]
struct RawJoint {
    alphabet: String,
    pmf: BTreeMap<String, Prob>,
}

fn joint_from(raw: RawJoint, ing: &mut Ingest) -> Result<JointDist> {
    let alphabet: Alphabet = raw.alphabet.parse()?;
    let mut keys = Vec::new();
    for k in raw.pmf.keys() {
        let [a, b, x, y] = split_key::<4>(k)?;
        keys.push((a.parse()?, b.parse()?, x.parse()?, y.parse()?));
    }
    let vals = ing.group("joint pmf", raw.pmf.into_values().collect())?;
    JointDist::from_entries(alphabet, keys.into_iter().zip(vals).map(|((a, b, x, y), v)| (a, b, x, y, v)))
}

#[derive(Deserialize)]
struct RawCond {
    alphabet: String,
    q: BTreeMap<String, BTreeMap<String, Prob>>,
}

fn cond_from(raw: RawCond, ing: &mut Ingest) -> Result<CondFamily> {
    let alphabet: Alphabet = raw.alphabet.parse()?;
    let mut entries = Vec::new();
    for (pk, inner) in raw.q {
        let (a, b) = setting_pair(&pk)?;
        let mut cells = Vec::new();
        for k in inner.keys() {
            cells.push(outcome_pair(k)?);
        }
        let vals = ing.group(&format!("q_{a}{b}"), inner.into_values().collect())?;
        entries.extend(cells.into_iter().zip(vals).map(|((x, y), v)| (a, b, x, y, v)));
    }
    CondFamily::from_entries(alphabet, entries)
}

#[derive(Deserialize)]
struct RawSettings {
    pmf: BTreeMap<String, Prob>,
}

fn settings_from(raw: RawSettings, ing: &mut Ingest) -> Result<SettingsDist> {
    let keys = raw.pmf.keys().map(|k| setting_pair(k)).collect::<Result<Vec<_>>>()?;
    let vals = ing.group("settings pmf", raw.pmf.into_values().collect())?;
    SettingsDist::from_entries(keys.into_iter().zip(vals).map(|((a, b), v)| (a, b, v)))
}

#[derive(Deserialize)]
struct RawLambda {
    id: String,
    p: Prob,
    x1: i64,
    x2: i64,
    y1: i64,
    y2: i64,
}

#[derive(Deserialize)]
struct RawLhv {
    lambdas: Vec<RawLambda>,
}

fn lhv_from(raw: RawLhv, ing: &mut Ingest) -> Result<LhvModel> {
    let ps = ing.group("hidden-state law", raw.lambdas.iter().map(|l| l.p.clone()).collect())?;
    let states = raw
        .lambdas
        .into_iter()
        .zip(ps)
        .map(|(l, p)| {
            Ok(HiddenState {
                response: Quadruple::from_values([l.x1, l.x2, l.y1, l.y2])?,
                p: ExactProb::new(p)?,
                id: l.id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LhvModel::new(states)
}

#[derive(Deserialize)]
struct RawSourcePoint {
    l1: String,
    l2: String,
    p: Prob,
}

#[derive(Deserialize)]
struct RawSource {
    points: Vec<RawSourcePoint>,
}

fn source_from(raw: RawSource, ing: &mut Ingest) -> Result<SourceSpace> {
    let ps = ing.group("source law", raw.points.iter().map(|p| p.p.clone()).collect())?;
    SourceSpace::new(
        raw.points
            .into_iter()
            .zip(ps)
            .map(|(pt, p)| Ok((SourcePoint { l1: pt.l1, l2: pt.l2 }, ExactProb::new(p)?)))
            .collect::<Result<_>>()?,
    )
}

#[derive(Deserialize)]
struct RawSpaces {
    #[serde(default)]
    alice: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    bob: BTreeMap<String, Vec<String>>,
}

fn spaces_from(party: Party, raw: BTreeMap<String, Vec<String>>) -> Result<[Vec<LabelledHiddenValue>; 2]> {
    let mut out: [Vec<LabelledHiddenValue>; 2] = Default::default();
    for (k, tokens) in raw {
        let s = setting_key(&k)?;
        out[s.index()] = tokens.into_iter().map(|t| LabelledHiddenValue::new(t, party, s)).collect();
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RawInstrumentMass {
    la: String,
    lb: String,
    #[serde(default)]
    la_setting: Option<i64>,
    #[serde(default)]
    lb_setting: Option<i64>,
    p: Prob,
}

#[derive(Deserialize)]
struct RawXResponse {
    l1: String,
    la: String,
    #[serde(default)]
    la_setting: Option<i64>,
    out: i64,
}

#[derive(Deserialize)]
struct RawYResponse {
    l2: String,
    lb: String,
    #[serde(default)]
    lb_setting: Option<i64>,
    out: i64,
}

#[derive(Deserialize)]
struct RawResponses {
    #[serde(default)]
    x: BTreeMap<String, Vec<RawXResponse>>,
    #[serde(default)]
    y: BTreeMap<String, Vec<RawYResponse>>,
}

fn tagged(token: String, party: Party, default: Setting, over: Option<i64>) -> Result<LabelledHiddenValue> {
    let s = over.map(Setting::from_value).transpose()?.unwrap_or(default);
    Ok(LabelledHiddenValue::new(token, party, s))
}

fn responses_from<T>(
    raw: RawResponses,
    out: impl Fn(i64) -> Result<T>,
) -> Result<(ResponseEntries<T>, ResponseEntries<T>)> {
    let mut x: ResponseEntries<T> = Default::default();
    let mut y: ResponseEntries<T> = Default::default();
    for (k, items) in raw.x {
        let a = setting_key(&k)?;
        for r in items {
            x[a.index()].push((r.l1, tagged(r.la, Party::Alice, a, r.la_setting)?, out(r.out)?));
        }
    }
    for (k, items) in raw.y {
        let b = setting_key(&k)?;
        for r in items {
            y[b.index()].push((r.l2, tagged(r.lb, Party::Bob, b, r.lb_setting)?, out(r.out)?));
        }
    }
    Ok((x, y))
}

#[derive(Deserialize)]
struct RawModel3 {
    source: RawSource,
    instrument_spaces: RawSpaces,
    p_ab: BTreeMap<String, Vec<RawInstrumentMass>>,
    responses: RawResponses,
}

fn model3_from(raw: RawModel3, ing: &mut Ingest) -> Result<Model3Spec> {
    let source = source_from(raw.source, ing)?;
    let alice = spaces_from(Party::Alice, raw.instrument_spaces.alice)?;
    let bob = spaces_from(Party::Bob, raw.instrument_spaces.bob)?;
    let mut p_ab: [[InstrumentEntries; 2]; 2] = Default::default();
    for (k, items) in raw.p_ab {
        let (a, b) = setting_pair(&k)?;
        let ps = ing.group(&format!("p_{a}{b}"), items.iter().map(|m| m.p.clone()).collect())?;
        for (m, p) in items.into_iter().zip(ps) {
            p_ab[a.index()][b.index()].push((
                tagged(m.la, Party::Alice, a, m.la_setting)?,
                tagged(m.lb, Party::Bob, b, m.lb_setting)?,
                p,
            ));
        }
    }
    let (x, y) = responses_from(raw.responses, Sign::from_value)?;
    Model3Spec::new(source, alice, bob, p_ab, x, y)
}

#[derive(Deserialize)]
struct RawInstrumentLaw {
    value: String,
    p: Prob,
}

#[derive(Deserialize)]
struct RawModel1 {
    source: RawSource,
    p_a: BTreeMap<String, Vec<RawInstrumentLaw>>,
    p_b: BTreeMap<String, Vec<RawInstrumentLaw>>,
    responses: RawResponses,
}

type InstrumentLaw = [Vec<(LabelledHiddenValue, ExactProb)>; 2];

fn instrument_law_from(
    party: Party,
    raw: BTreeMap<String, Vec<RawInstrumentLaw>>,
    ing: &mut Ingest,
) -> Result<InstrumentLaw> {
    let mut out: InstrumentLaw = Default::default();
    for (k, items) in raw {
        let s = setting_key(&k)?;
        let ps = ing.group(&format!("instrument law ({party}, {s})"), items.iter().map(|m| m.p.clone()).collect())?;
        for (m, p) in items.into_iter().zip(ps) {
            out[s.index()].push((LabelledHiddenValue::new(m.value, party, s), ExactProb::new(p)?));
        }
    }
    Ok(out)
}

fn model1_from(raw: RawModel1, ing: &mut Ingest) -> Result<Model1Spec> {
    let source = source_from(raw.source, ing)?;
    let p_a = instrument_law_from(Party::Alice, raw.p_a, ing)?;
    let p_b = instrument_law_from(Party::Bob, raw.p_b, ing)?;
    let (x, y) = responses_from(raw.responses, Outcome::from_value)?;
    Model1Spec::new(source, p_a, p_b, x, y)
}

fn pair_key(a: Setting, b: Setting) -> String {
    format!("{a},{b}")
}

fn outcome_key(x: Outcome, y: Outcome) -> String {
    format!("{x},{y}")
}

fn header(kind: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("kind".into(), json!(kind));
    m
}

/// `{"exact": "num/den", "float": f}`.
pub fn rational_json(r: &Rational) -> Value {
    json!({ "exact": format_rational(r), "float": r.to_f64() })
}

pub fn joint_to_json(joint: &JointDist) -> Value {
    let mut m = header("joint");
    m.insert("alphabet".into(), json!(joint.alphabet().name()));
    let pmf: Map<String, Value> = joint
        .cells()
        .filter(|(.., p)| !p.is_zero())
        .map(|(a, b, x, y, p)| (format!("{a},{b},{x},{y}"), json!(p.to_string())))
        .collect();
    m.insert("pmf".into(), Value::Object(pmf));
    Value::Object(m)
}

pub fn cond_to_json(cond: &CondFamily) -> Value {
    let mut m = header("cond");
    m.insert("alphabet".into(), json!(cond.alphabet().name()));
    let q: Map<String, Value> = cond
        .pairs()
        .map(|(a, b, pmf)| {
            let inner: Map<String, Value> = pmf
                .cells()
                .filter(|(.., p)| !p.is_zero())
                .map(|(x, y, p)| (outcome_key(x, y), json!(p.to_string())))
                .collect();
            (pair_key(a, b), Value::Object(inner))
        })
        .collect();
    m.insert("q".into(), Value::Object(q));
    Value::Object(m)
}

pub fn settings_to_json(s: &SettingsDist) -> Value {
    let mut m = header("settings");
    let pmf: Map<String, Value> = Setting::pairs()
        .map(|(a, b)| (pair_key(a, b), json!(s.get(a, b).to_string())))
        .collect();
    m.insert("pmf".into(), Value::Object(pmf));
    Value::Object(m)
}

pub fn lhv_to_json(model: &LhvModel) -> Value {
    let mut m = header("lhv");
    let lambdas: Vec<Value> = model
        .states()
        .iter()
        .map(|s| {
            let [x1, x2, y1, y2] = s.response.values();
            json!({ "id": s.id, "p": s.p.to_string(), "x1": x1, "x2": x2, "y1": y1, "y2": y2 })
        })
        .collect();
    m.insert("lambdas".into(), json!(lambdas));
    Value::Object(m)
}

fn source_json(src: &SourceSpace) -> Value {
    let points: Vec<Value> = src
        .points()
        .iter()
        .map(|(pt, p)| json!({ "l1": pt.l1, "l2": pt.l2, "p": p.to_string() }))
        .collect();
    json!({ "points": points })
}

fn labelled(field: &str, v: &LabelledHiddenValue, default: Setting) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(field.into(), json!(v.value));
    if v.setting != default {
        m.insert(format!("{field}_setting"), json!(v.setting.value()));
    }
    m
}

fn responses_json<T: Copy>(
    x: impl Fn(Setting) -> Vec<(String, LabelledHiddenValue, T)>,
    y: impl Fn(Setting) -> Vec<(String, LabelledHiddenValue, T)>,
    val: impl Fn(T) -> i8,
) -> Value {
    let side = |f: &dyn Fn(Setting) -> Vec<(String, LabelledHiddenValue, T)>, src: &str, field: &str| {
        let m: Map<String, Value> = Setting::ALL
            .iter()
            .map(|&s| {
                let items: Vec<Value> = f(s)
                    .into_iter()
                    .map(|(l, v, o)| {
                        let mut e = labelled(field, &v, s);
                        e.insert(src.into(), json!(l));
                        e.insert("out".into(), json!(val(o)));
                        Value::Object(e)
                    })
                    .collect();
                (s.to_string(), json!(items))
            })
            .collect();
        Value::Object(m)
    };
    json!({ "x": side(&x, "l1", "la"), "y": side(&y, "l2", "lb") })
}

pub fn model3_to_json(spec: &Model3Spec) -> Value {
    let mut m = header("model3");
    m.insert("source".into(), source_json(spec.source()));
    let tokens = |space: &[LabelledHiddenValue]| -> Value { json!(space.iter().map(|v| v.value.clone()).collect::<Vec<_>>()) };
    let alice: Map<String, Value> = Setting::ALL.iter().map(|&s| (s.to_string(), tokens(spec.alice_space(s)))).collect();
    let bob: Map<String, Value> = Setting::ALL.iter().map(|&s| (s.to_string(), tokens(spec.bob_space(s)))).collect();
    m.insert("instrument_spaces".into(), json!({ "alice": alice, "bob": bob }));
    let p_ab: Map<String, Value> = Setting::pairs()
        .map(|(a, b)| {
            let items: Vec<Value> = spec
                .instrument_support(a, b)
                .map(|(la, lb, p)| {
                    let mut e = labelled("la", la, a);
                    e.extend(labelled("lb", lb, b));
                    e.insert("p".into(), json!(p.to_string()));
                    Value::Object(e)
                })
                .collect();
            (pair_key(a, b), json!(items))
        })
        .collect();
    m.insert("p_ab".into(), Value::Object(p_ab));
    let own = |v: Vec<(&str, &LabelledHiddenValue, Sign)>| {
        v.into_iter().map(|(l, h, o)| (l.to_owned(), h.clone(), o)).collect::<Vec<_>>()
    };
    m.insert(
        "responses".into(),
        responses_json(|a| own(spec.responses_x(a)), |b| own(spec.responses_y(b)), Sign::value),
    );
    Value::Object(m)
}

pub fn model1_to_json(spec: &Model1Spec) -> Value {
    let mut m = header("model1");
    m.insert("source".into(), source_json(spec.source()));
    fn law<'a>(f: &dyn Fn(Setting) -> &'a [(LabelledHiddenValue, ExactProb)]) -> Value {
        let m: Map<String, Value> = Setting::ALL
            .iter()
            .map(|&s| {
                let items: Vec<Value> = f(s).iter().map(|(v, p)| json!({ "value": v.value, "p": p.to_string() })).collect();
                (s.to_string(), json!(items))
            })
            .collect();
        Value::Object(m)
    }
    m.insert("p_a".into(), law(&|a| spec.p_a(a)));
    m.insert("p_b".into(), law(&|b| spec.p_b(b)));
    let own = |v: Vec<(&str, &LabelledHiddenValue, Outcome)>| {
        v.into_iter().map(|(l, h, o)| (l.to_owned(), h.clone(), o)).collect::<Vec<_>>()
    };
    m.insert(
        "responses".into(),
        responses_json(|a| own(spec.responses_x(a)), |b| own(spec.responses_y(b)), Outcome::value),
    );
    Value::Object(m)
}

pub fn document_to_json(doc: &Document) -> Value {
    match doc {
        Document::Joint(j) => joint_to_json(j),
        Document::Cond(c) => cond_to_json(c),
        Document::Settings(s) => settings_to_json(s),
        Document::Lhv(l) => lhv_to_json(l),
        Document::Model3(m) => model3_to_json(m),
        Document::Model1(m) => model1_to_json(m),
    }
}

fn by_pair(f: impl Fn(Setting, Setting) -> Value) -> Value {
    Value::Object(Setting::pairs().map(|(a, b)| (pair_key(a, b), f(a, b))).collect())
}

/// Body of a CHSH report (no header).
pub fn chsh_json(rep: &ChshReport) -> Value {
    json!({
        "correlations": by_pair(|a, b| rational_json(rep.correlation(a, b))),
        "s_values_by_minus_position": by_pair(|a, b| rational_json(rep.s_value((a, b)))),
        "s_max": rational_json(&rep.s_max),
        "violates_local_bound": rep.violates_local_bound(),
    })
}

pub fn no_signalling_json(rep: &NoSignallingReport) -> Value {
    let side = |f: &dyn Fn(Setting, Sign) -> Value| -> Value {
        Value::Object(
            Setting::ALL
                .iter()
                .flat_map(|&s| Sign::ALL.iter().map(move |&o| (s, o)))
                .map(|(s, o)| (format!("{s},{o}"), f(s, o)))
                .collect(),
        )
    };
    json!({
        "delta_a": side(&|a, x| rational_json(rep.alice(a, x))),
        "delta_b": side(&|b, y| rational_json(rep.bob(b, y))),
        "max_delta": rational_json(&rep.max_delta),
    })
}

pub fn postselection_json(rep: &PostSelectionReport) -> Value {
    json!({
        "detection_rate": rational_json(rep.detection_rate.value()),
        "conditional_family": cond_to_json(&rep.conditional_family),
        "postselected_settings": settings_to_json(&rep.postselected_settings),
        "settings_dependence_delta": rational_json(&rep.settings_dependence_delta),
        "outcome_settings_dependence": rational_json(&rep.outcome_settings_dependence),
    })
}

pub fn posterior_json(post: &HiddenPosterior) -> Value {
    let mut m = header("posterior");
    let points: Vec<Value> = post
        .points
        .iter()
        .zip(post.prior.iter().zip(&post.posterior))
        .map(|(pt, (pr, po))| json!({ "l1": pt.l1, "l2": pt.l2, "prior": pr.to_string(), "posterior": po.to_string() }))
        .collect();
    m.insert("points".into(), json!(points));
    m.insert("detection_rate".into(), rational_json(post.detection_rate.value()));
    m.insert("total_variation".into(), rational_json(&post.total_variation));
    m.insert("hidden_settings_dependence".into(), rational_json(&post.hidden_settings_dependence));
    Value::Object(m)
}

pub fn estimate_json(rep: &EstimateReport) -> Value {
    let mut m = header("estimate");
    m.insert("seed".into(), json!(rep.seed));
    m.insert("trials".into(), json!(rep.trials));
    m.insert("partial".into(), json!(rep.partial));
    m.insert(
        "pairs".into(),
        by_pair(|a, b| match rep.pair(a, b) {
            Some(p) => json!({
                "count": p.count,
                "sum_xy": p.sum_xy,
                "mean": rational_json(&p.mean),
                "std_error": p.std_error,
            }),
            None => Value::Null,
        }),
    );
    m.insert("chsh".into(), rep.chsh.as_ref().map_or(Value::Null, chsh_json));
    Value::Object(m)
}

pub fn ztable_json(z: &ZTable) -> Value {
    let cell = |s: ZScore| match s {
        ZScore::Finite(v) => json!(v),
        ZScore::Infinite => json!("infinite"),
    };
    json!({
        "z": by_pair(|a, b| cell(z.z[a.index()][b.index()])),
        "max_abs_z": if z.max_abs.is_finite() { json!(z.max_abs) } else { json!("infinite") },
    })
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}
