use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bellkit_core::io::{
    chsh_json, estimate_json, model1_to_json, model3_to_json,
    no_signalling_json, parse_document, posterior_json, postselection_json, rational_json,
    to_pretty, ztable_json, Document, IngestMode, Loaded,
};
use bellkit_core::kupczynski::{
    evaluate_model1, evaluate_model3, loophole_demo, posterior_given_detection, postselect,
    universal_construct,
};
use bellkit_core::lhv::{certify_family, enumerate_deterministic};
use bellkit_core::mcsim::{compare, estimate, postselect_trials, sample_trials, write_trials};
use bellkit_core::{
    chsh, chsh_of_coupling, compose, factor, no_signalling, predict, Alphabet, CondFamily, Coupling,
    Error, JointDist, Setting, SettingsDist,
};
use serde_json::{json, Map, Value};

use crate::{
    AnalyzeArgs, ConstructArgs, EnumerateArgs, Failure, Format, InputArgs, OutputArgs,
    PosteriorArgs, SimulateArgs,
};

type CmdResult = Result<u8, Failure>;

fn mode(float: bool) -> IngestMode {
    if float {
        IngestMode::Float
    } else {
        IngestMode::Exact
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(1, format!("cannot read {}: {e}", path.display())))
}

fn load(input: &InputArgs) -> Result<Loaded<Document>, Failure> {
    Ok(parse_document(&read(&input.input)?, mode(input.float_ingest))?)
}

fn load_settings(path: Option<&PathBuf>, float: bool) -> Result<(SettingsDist, Vec<Value>), Failure> {
    let Some(path) = path else {
        return Ok((SettingsDist::uniform(), Vec::new()));
    };
    let loaded = parse_document(&read(path)?, mode(float))?;
    match loaded.value {
        Document::Settings(s) => Ok((s, provenance(&loaded.renormalized))),
        other => Err(Failure::new(2, format!("--settings expects a settings document, got {}", other.kind()))),
    }
}

fn provenance(renorm: &[(String, bellkit_core::probcore::Renormalization)]) -> Vec<Value> {
    renorm
        .iter()
        .map(|(what, r)| json!({ "group": what, "original_sum": rational_json(&r.original_sum) }))
        .collect()
}

fn write_out(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::new(2, format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(2, format!("cannot write output: {e}"))),
    }
}

fn report(kind: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(bellkit_core::io::SCHEMA_VERSION));
    m.insert("kind".into(), json!(kind));
    m
}

fn no_settings(settings: Option<&PathBuf>, kind: &str) -> Result<(), Failure> {
    match settings {
        Some(_) => Err(Failure::new(2, format!("--settings does not apply to {kind} input"))),
        None => Ok(()),
    }
}

/// Binary conditional family of a binary joint law; ternary laws must go
/// through post-selection.
fn binary_conditional(joint: &JointDist) -> Result<CondFamily, Failure> {
    if joint.alphabet() == Alphabet::Ternary {
        return Err(Failure::new(
            2,
            "ternary joint law: analyze post-selects model1 inputs, or convert the law to binary",
        ));
    }
    Ok(factor(joint)?.1)
}

pub fn analyze(args: AnalyzeArgs) -> CmdResult {
    let loaded = load(&args.input)?;
    let (settings, settings_prov) = load_settings(args.settings.as_ref(), args.input.float_ingest)?;
    let mut out = report("analysis");
    out.insert("input_kind".into(), json!(loaded.value.kind()));
    let cond = match &loaded.value {
        Document::Cond(c) => {
            no_settings(args.settings.as_ref(), "cond")?;
            if c.alphabet() == Alphabet::Ternary {
                c.to_binary()?
            } else {
                c.clone()
            }
        }
        Document::Joint(j) => {
            no_settings(args.settings.as_ref(), "joint")?;
            binary_conditional(j)?
        }
        Document::Model3(spec) => {
            let q = evaluate_model3(spec)?;
            let mut blocks = Map::new();
            for (a, b) in Setting::pairs() {
                blocks.insert(format!("{a},{b}"), rational_json(spec.off_block_mass(a, b).value()));
            }
            out.insert("instrument_spaces_disjoint".into(), json!(spec.instrument_spaces_disjoint()));
            out.insert("off_block_mass".into(), Value::Object(blocks));
            q
        }
        Document::Lhv(model) => {
            let (_, q) = factor(&predict(model, &settings))?;
            let cert = bellkit_core::verify_chsh_bound(model)?;
            out.insert("coupling_chsh".into(), chsh_json(&cert.report));
            q
        }
        Document::Model1(spec) => {
            let rep = postselect(&evaluate_model1(spec, &settings)?)?;
            out.insert("postselection".into(), postselection_json(&rep));
            rep.conditional_family
        }
        Document::Settings(_) => return Err(Failure::new(2, "settings documents carry no outcomes to analyze")),
    };
    let ch = chsh(&cond)?;
    out.insert("chsh".into(), chsh_json(&ch));
    out.insert("no_signalling".into(), no_signalling_json(&no_signalling(&cond)?));
    let local = certify_family(&cond)?;
    out.insert("local_coupling_exists".into(), json!(local.is_some()));
    let mut prov = provenance(&loaded.renormalized);
    prov.extend(settings_prov);
    out.insert("renormalized".into(), json!(prov));
    write_out(args.output.output.as_deref(), &to_pretty(&Value::Object(out)))?;
    Ok(if ch.violates_local_bound() { 3 } else { 0 })
}

pub fn construct(args: ConstructArgs) -> CmdResult {
    let loaded = load(&args.input)?;
    let Document::Cond(target) = &loaded.value else {
        return Err(Failure::new(2, format!("construct expects a cond document, got {}", loaded.value.kind())));
    };
    let spec = universal_construct(target)?;
    let text = to_pretty(&model3_to_json(&spec));
    fs::write(&args.output, &text)
        .map_err(|e| Failure::new(2, format!("cannot write {}: {e}", args.output.display())))?;

    // Re-read the file just written and evaluate that.
    let reread = match parse_document(&read(&args.output)?, IngestMode::Exact)?.value {
        Document::Model3(s) => s,
        _ => return Err(Failure::new(4, "written spec did not parse back as model3")),
    };
    let achieved = evaluate_model3(&reread)?;
    let mut lines = vec![
        format!("target: {}", args.input.input.display()),
        format!("model: {}", args.output.display()),
        "source: one-point".into(),
    ];
    let mut mismatches = 0;
    for (a, b, want) in target.pairs() {
        for (x, y, p) in want.cells().filter(|(x, y, _)| target.alphabet().admits(*x) && target.alphabet().admits(*y)) {
            let got = achieved.get(a, b).get(x, y);
            if got != p {
                mismatches += 1;
            }
            lines.push(format!("q_{a}{b}({x},{y}): target {p} model {got}"));
        }
    }
    lines.push(if mismatches == 0 { "match: exact".into() } else { format!("match: FAILED ({mismatches} cells)") });
    let mut transcript = lines.join("\n");
    transcript.push('\n');
    write_out(args.transcript.as_deref(), &transcript)?;
    if mismatches > 0 {
        return Err(Failure::new(4, "constructed model does not reproduce the target"));
    }
    Ok(0)
}

pub fn simulate(args: SimulateArgs) -> CmdResult {
    if args.trials == 0 {
        return Err(Error::ZeroTrials.into());
    }
    let loaded = load(&args.input)?;
    let (settings, settings_prov) = load_settings(args.settings.as_ref(), args.input.float_ingest)?;
    let joint = match &loaded.value {
        Document::Joint(j) => {
            no_settings(args.settings.as_ref(), "joint")?;
            j.clone()
        }
        Document::Cond(c) => compose(&settings, c),
        Document::Model3(spec) => compose(&settings, &evaluate_model3(spec)?),
        Document::Model1(spec) => evaluate_model1(spec, &settings)?,
        Document::Lhv(model) => predict(model, &settings),
        Document::Settings(_) => return Err(Failure::new(2, "settings documents carry no outcomes to simulate")),
    };
    let exact = if args.postselect {
        postselect(&joint)?.conditional_family
    } else if joint.alphabet() == Alphabet::Binary {
        factor(&joint)?.1
    } else {
        return Err(Failure::new(2, "ternary laws need --postselect"));
    };

    let mut trials = sample_trials(&joint, args.trials, args.seed)?;
    if args.postselect {
        trials = postselect_trials(&trials);
        if trials.is_empty() {
            return Err(Error::ZeroDetection.into());
        }
    }
    let mut log = Vec::new();
    write_trials(&mut log, &trials)?;
    if let Some(path) = &args.trial_log {
        fs::write(path, &log).map_err(|e| Failure::new(2, format!("cannot write {}: {e}", path.display())))?;
    }
    if args.format == Format::Csv {
        let text = String::from_utf8(log).expect("csv is utf-8");
        write_out(args.output.output.as_deref(), &text)?;
        return Ok(0);
    }

    let mut est = estimate(&trials)?;
    est.seed = Some(args.seed);
    let mut out = match estimate_json(&est) {
        Value::Object(m) => m,
        _ => unreachable!("estimate report is an object"),
    };
    out.insert("sampled_trials".into(), json!(args.trials));
    out.insert("postselected".into(), json!(args.postselect));
    out.insert("exact".into(), chsh_json(&chsh(&exact)?));
    if !est.partial {
        out.insert("comparison".into(), ztable_json(&compare(&est, &exact)?));
    }
    let mut prov = provenance(&loaded.renormalized);
    prov.extend(settings_prov);
    out.insert("renormalized".into(), json!(prov));
    write_out(args.output.output.as_deref(), &to_pretty(&Value::Object(out)))?;
    Ok(0)
}

pub fn enumerate_lhv(args: EnumerateArgs) -> CmdResult {
    let rows: Vec<_> = enumerate_deterministic()
        .into_iter()
        .map(|q| (q, chsh_of_coupling(&Coupling::point(q))))
        .collect();
    let max = rows.iter().map(|(_, r)| r.s_max.clone()).max().expect("16 strategies");
    let sign = |v: i8| if v > 0 { "+1".to_string() } else { "-1".to_string() };
    let text = match args.format {
        Format::Csv => {
            let mut s = String::from("x1,x2,y1,y2,S_minus_11,S_minus_12,S_minus_21,S_minus_22,s_max\n");
            for (q, r) in &rows {
                let v = q.values();
                let cols: Vec<String> = v
                    .iter()
                    .map(|&x| sign(x))
                    .chain(r.s_values.iter().map(|s| s.to_integer().to_string()))
                    .chain([r.s_max.to_integer().to_string()])
                    .collect();
                s.push_str(&cols.join(","));
                s.push('\n');
            }
            s.push_str(&format!("max |S| = {}\n", max));
            s
        }
        Format::Json => {
            let mut out = report("lhv_enumeration");
            let items: Vec<Value> = rows
                .iter()
                .map(|(q, r)| {
                    let [x1, x2, y1, y2] = q.values();
                    json!({ "x1": x1, "x2": x2, "y1": y1, "y2": y2, "chsh": chsh_json(r) })
                })
                .collect();
            out.insert("strategies".into(), json!(items));
            out.insert("max_abs_s".into(), rational_json(&max));
            to_pretty(&Value::Object(out))
        }
    };
    write_out(args.output.output.as_deref(), &text)?;
    Ok(0)
}

pub fn demo(args: OutputArgs) -> CmdResult {
    write_out(args.output.as_deref(), &to_pretty(&model1_to_json(&loophole_demo())))?;
    Ok(0)
}

pub fn posterior(args: PosteriorArgs) -> CmdResult {
    let loaded = load(&args.input)?;
    let Document::Model1(spec) = &loaded.value else {
        return Err(Failure::new(2, format!("posterior expects a model1 document, got {}", loaded.value.kind())));
    };
    let (settings, _) = load_settings(args.settings.as_ref(), args.input.float_ingest)?;
    let post = posterior_given_detection(spec, &settings)?;
    write_out(args.output.output.as_deref(), &to_pretty(&posterior_json(&post)))?;
    Ok(0)
}

