//! Acceptance gate: one test per criterion, each printing a single
//! `criterion N (...): pass|fail` line. Tolerances are pinned as constants.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use reldiag::ast::{alpha_equiv, atoms, erased_atoms, maximal_scope, normalize, Query};
use reldiag::diagram::{expand_fuse_boxes, validate, Diagram};
use reldiag::eval::{equiv_on, eval, parse_database, EquivOutcome, ResultSet};
use reldiag::fragment::{classify, remove_disjunction, remove_forall_implies, Fragment};
use reldiag::gen::{gen_instances_for, random_query, GenConfig};
use reldiag::metrics::{family, legacy_union_form, size_metrics};
use reldiag::parser::parse_query;
use reldiag::render::{render, xml_well_formed, RenderOptions};
use reldiag::safety::check_safety;
use reldiag::translate::{
    desugar_builtins, diagram_to_trc, to_builtin_form, trc_to_diagram, trc_to_representation_b,
};

const T_EVAL: Duration = Duration::from_secs(1);
const T_ATOMS: Duration = Duration::from_secs(10);
const T_SEMANTICS: Duration = Duration::from_secs(60);
const T_SUCCINCTNESS: Duration = Duration::from_secs(5);
const RANDOM_ATOM_QUERIES: usize = 500;
const RANDOM_ROUND_TRIP_QUERIES: usize = 200;
const INSTANCES_PER_FIXTURE: usize = 20;
const SEED: u64 = 0;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

struct Fixture {
    name: String,
    query: Query,
    fragment: Fragment,
    safety: Vec<u8>, // empty = safe
}

fn load_fixtures() -> Vec<Fixture> {
    let dir = fixtures_dir();
    let mut names: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "trc"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|path| {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            let text = fs::read_to_string(&path).unwrap();
            let query = parse_query(&text).unwrap_or_else(|e| panic!("{name}: {e:?}")).query;
            let expect = fs::read_to_string(path.with_extension("expect")).unwrap();
            let mut fragment = None;
            let mut safety = None;
            for line in expect.lines() {
                if let Some(v) = line.strip_prefix("fragment: ") {
                    fragment = Some(match v.trim() {
                        "full" => Fragment::Full,
                        "encv" => Fragment::Encv,
                        "enc" => Fragment::Enc,
                        other => panic!("{name}: unknown fragment `{other}`"),
                    });
                }
                if let Some(v) = line.strip_prefix("safety: ") {
                    let mut parts = v.split_whitespace();
                    safety = Some(match parts.next() {
                        Some("safe") => vec![],
                        Some("unsafe") => parts.map(|c| c.parse().unwrap()).collect(),
                        other => panic!("{name}: bad safety `{other:?}`"),
                    });
                }
            }
            Fixture {
                name,
                query,
                fragment: fragment.expect("fragment line"),
                safety: safety.expect("safety line"),
            }
        })
        .collect()
}

/// Print the per-criterion verdict line and fail the test on error.
fn verdict(n: usize, what: &str, result: Result<(), String>) {
    match result {
        Ok(()) => println!("criterion {n} ({what}): pass"),
        Err(msg) => {
            println!("criterion {n} ({what}): fail — {msg}");
            panic!("criterion {n} failed: {msg}");
        }
    }
}

fn timed(budget: Duration, start: Instant, what: &str) -> Result<(), String> {
    let spent = start.elapsed();
    if spent <= budget {
        Ok(())
    } else {
        Err(format!("{what} took {spent:?}, budget {budget:?}"))
    }
}

#[test]
fn criterion_1_example_evaluation() {
    let run = || -> Result<(), String> {
        let start = Instant::now();
        let dir = fixtures_dir();
        let db_text = fs::read_to_string(dir.join("example.db")).map_err(|e| e.to_string())?;
        let (db, dom) = parse_database(&db_text).map_err(|e| e.to_string())?;
        for (name, want) in [
            ("lt_plain", false),
            ("lt_builtin_inner", false),
            ("lt_builtin_outer", true),
        ] {
            let text =
                fs::read_to_string(dir.join(format!("{name}.trc"))).map_err(|e| e.to_string())?;
            let q = parse_query(&text).map_err(|e| format!("{name}: {e:?}"))?.query;
            let got = eval(&q, &db, &dom).map_err(|e| format!("{name}: {e}"))?;
            if got != ResultSet::Bool(want) {
                return Err(format!("{name}: expected {want}, got {got}"));
            }
        }
        timed(T_EVAL, start, "evaluation")
    };
    verdict(1, "negation-placement evaluation on the worked instance", run());
}

#[test]
fn criterion_2_atom_preservation() {
    let run = || -> Result<(), String> {
        let start = Instant::now();
        let fixtures = load_fixtures();
        if fixtures.len() < 12 {
            return Err(format!("only {} fixtures", fixtures.len()));
        }
        let check = |name: &str, q: &Query| -> Result<(), String> {
            let before = atoms(q);
            let q1 = remove_forall_implies(q);
            if atoms(&q1) != before {
                return Err(format!("{name}: universal-rewrite changed the atom bag"));
            }
            let q2 = remove_disjunction(&q1).map_err(|e| format!("{name}: {e}"))?;
            if atoms(&q2) != before {
                return Err(format!("{name}: disjunction-rewrite changed the atom bag"));
            }
            Ok(())
        };
        for f in &fixtures {
            check(&f.name, &f.query)?;
        }
        for seed in 0..RANDOM_ATOM_QUERIES as u64 {
            check(&format!("random {seed}"), &random_query(seed, GenConfig::default()))?;
        }
        timed(T_ATOMS, start, "atom preservation")
    };
    verdict(2, "fragment rewrites preserve the atom bag", run());
}

#[test]
fn criterion_3_semantic_preservation() {
    let run = || -> Result<(), String> {
        let start = Instant::now();
        for f in &load_fixtures() {
            let q = &f.query;
            let mut variants: Vec<(String, Query)> = vec![
                ("normalize".into(), q.normalize().map_err(|e| e.to_string())?),
                ("maximal_scope".into(), q.map_body(|b| maximal_scope(normalize(b.clone())))),
            ];
            let q1 = remove_forall_implies(q);
            variants.push(("remove_forall_implies".into(), q1.clone()));
            let q2 = remove_disjunction(&q1).map_err(|e| e.to_string())?;
            variants.push(("remove_disjunction".into(), q2.clone()));
            let qb = to_builtin_form(&q2).map_err(|e| e.to_string())?;
            variants.push(("to_builtin_form".into(), qb.clone()));
            let d = trc_to_diagram(&qb).map_err(|e| e.to_string())?;
            variants
                .push(("diagram round trip".into(), diagram_to_trc(&d).map_err(|e| e.to_string())?));
            let db = trc_to_representation_b(&q1).map_err(|e| e.to_string())?;
            variants.push((
                "shortcut round trip".into(),
                diagram_to_trc(&db).map_err(|e| e.to_string())?,
            ));
            let expanded = expand_fuse_boxes(&db).map_err(|e| e.to_string())?;
            variants.push((
                "fuse expansion".into(),
                diagram_to_trc(&expanded).map_err(|e| e.to_string())?,
            ));
            let instances = gen_instances_for(&[q], INSTANCES_PER_FIXTURE, SEED);
            for (what, v) in &variants {
                match equiv_on(q, v, &instances).map_err(|e| format!("{}: {what}: {e}", f.name))? {
                    EquivOutcome::Equivalent => {}
                    EquivOutcome::Counterexample { instance, left, right } => {
                        return Err(format!(
                            "{}: {what} differs on instance {instance}: {left} vs {right}",
                            f.name
                        ));
                    }
                }
            }
        }
        timed(T_SEMANTICS, start, "semantic preservation")
    };
    verdict(3, "all transforms are evaluation-equivalent on seeded instances", run());
}

#[test]
fn criterion_4_round_trip() {
    let run = || -> Result<(), String> {
        let round_trip = |name: &str, q: &Query| -> Result<(), String> {
            let qb = to_builtin_form(q).map_err(|e| format!("{name}: {e}"))?;
            let d = trc_to_diagram(&qb).map_err(|e| format!("{name}: {e}"))?;
            let back = diagram_to_trc(&d).map_err(|e| format!("{name}: {e}"))?;
            if !alpha_equiv(&back, &qb) {
                return Err(format!("{name}: read-back is not alpha-equivalent"));
            }
            Ok(())
        };
        for f in load_fixtures().iter().filter(|f| f.fragment == Fragment::Enc) {
            round_trip(&f.name, &f.query)?;
        }
        for seed in 0..RANDOM_ROUND_TRIP_QUERIES as u64 {
            let cfg = GenConfig { fragment: Fragment::Enc, ..GenConfig::default() };
            round_trip(&format!("random {seed}"), &random_query(seed, cfg))?;
        }
        Ok(())
    };
    verdict(4, "diagram round trip is alpha-equivalent on the conjunctive fragment", run());
}

#[test]
fn criterion_5_safety_verdicts() {
    let run = || -> Result<(), String> {
        // the pinned ledger; every other fixture is checked against its sidecar
        let ledger: BTreeMap<&str, Vec<u8>> = BTreeMap::from([
            ("nested_disjunction_bindings", vec![]),
            ("union_two_tables", vec![]),
            ("union_two_tables_demorgan", vec![2]),
            ("open_range_output", vec![1]),
            ("negated_join_on_output", vec![4]),
            ("negated_join_on_table", vec![]),
            ("selection_outside_binding", vec![4]),
            ("selection_inside_binding", vec![]),
            ("selection_union_binding", vec![]),
            ("nested_disjunction_bindings_encv", vec![]),
        ]);
        let fixtures = load_fixtures();
        for (name, want) in &ledger {
            if !fixtures.iter().any(|f| f.name == *name) {
                return Err(format!("ledger fixture `{name}` is missing"));
            }
            let f = fixtures.iter().find(|f| f.name == *name).unwrap();
            if &f.safety != want {
                return Err(format!("{name}: sidecar disagrees with the pinned ledger"));
            }
        }
        for f in &fixtures {
            let got = check_safety(&f.query).conditions();
            if got != f.safety {
                return Err(format!("{}: expected conditions {:?}, got {:?}", f.name, f.safety, got));
            }
            if classify(&f.query) != f.fragment {
                return Err(format!("{}: fragment classification mismatch", f.name));
            }
        }
        Ok(())
    };
    verdict(5, "safety verdicts and condition numbers match the fixture ledger", run());
}

#[test]
fn criterion_6_safety_preservation() {
    let run = || -> Result<(), String> {
        for f in load_fixtures().iter().filter(|f| f.safety.is_empty()) {
            let q1 = remove_forall_implies(&f.query);
            let r = check_safety(&q1);
            if !r.is_safe() {
                return Err(format!("{}: universal rewrite broke safety: {r}", f.name));
            }
            let d = trc_to_representation_b(&q1).map_err(|e| format!("{}: {e}", f.name))?;
            let back = diagram_to_trc(&d).map_err(|e| format!("{}: {e}", f.name))?;
            let r = check_safety(&back);
            if !r.is_safe() {
                return Err(format!("{}: diagram round trip broke safety: {r}", f.name));
            }
        }
        // required negative test: removing the disjunction from the union
        // query makes the De-Morgan form unsafe
        let union = load_fixtures().into_iter().find(|f| f.name == "union_two_tables").unwrap();
        let rewritten = remove_disjunction(&union.query).map_err(|e| e.to_string())?;
        let r = check_safety(&rewritten);
        if r.is_safe() {
            return Err("disjunction removal kept the union query safe".into());
        }
        if r.conditions() != vec![2] {
            return Err(format!("expected condition 2, got {:?}", r.conditions()));
        }
        Ok(())
    };
    verdict(6, "safe verdicts survive rewrites; disjunction removal flips the union query", run());
}

#[test]
fn criterion_7_succinctness() {
    let run = || -> Result<(), String> {
        let start = Instant::now();
        let mut prev_ratio = 0.0f64;
        for k in 1..=8usize {
            let q = family(k);
            let d = trc_to_representation_b(&q).map_err(|e| e.to_string())?;
            let m = size_metrics(&d);
            if (m.boxes, m.edges) != (5 * k + 1, 2 * k) {
                return Err(format!(
                    "k={k}: expected ({} boxes, {} edges), got ({}, {})",
                    5 * k + 1,
                    2 * k,
                    m.boxes,
                    m.edges
                ));
            }
            let union = legacy_union_form(&q).map_err(|e| e.to_string())?;
            let mut legacy = 0usize;
            for cell in &union.cells {
                let cd = trc_to_representation_b(cell).map_err(|e| e.to_string())?;
                legacy += size_metrics(&cd).boxes;
            }
            let want = (k + 1) * (1 << k);
            if legacy != want {
                return Err(format!("k={k}: expected {want} legacy boxes, got {legacy}"));
            }
            if k == 8 && (m.boxes, legacy) != (41, 2304) {
                return Err(format!("k=8: expected 41 vs 2304, got {} vs {legacy}", m.boxes));
            }
            let ratio = legacy as f64 / m.boxes as f64;
            if ratio <= prev_ratio {
                return Err(format!("k={k}: ratio {ratio} not strictly increasing"));
            }
            prev_ratio = ratio;
        }
        timed(T_SUCCINCTNESS, start, "succinctness")
    };
    verdict(7, "fuse boxes are exponentially more succinct than union cells", run());
}

#[test]
fn criterion_8_textbook_trio() {
    let run = || -> Result<(), String> {
        let fixtures = load_fixtures();
        for name in ["sailors_red_or_green", "projects_smith", "parts_heavy_or_s2"] {
            let f = fixtures
                .iter()
                .find(|f| f.name == name)
                .ok_or_else(|| format!("fixture `{name}` is missing"))?;
            let d = trc_to_representation_b(&f.query).map_err(|e| format!("{name}: {e}"))?;
            let report = validate(&d);
            if !report.is_valid() {
                return Err(format!("{name}: invalid diagram: {report}"));
            }
            let back = diagram_to_trc(&d).map_err(|e| format!("{name}: {e}"))?;
            if erased_atoms(&desugar_builtins(&f.query)) != erased_atoms(&desugar_builtins(&back))
            {
                return Err(format!("{name}: atoms not preserved through the diagram"));
            }
        }
        Ok(())
    };
    verdict(8, "textbook disjunction queries translate with atoms preserved", run());
}

#[test]
fn criterion_9_renderer() {
    let run = || -> Result<(), String> {
        let opts =
            RenderOptions { peirce_shading: true, dotted_connectors: true };
        let parity_ok = |d: &Diagram| -> Result<(), String> {
            let expanded = expand_fuse_boxes(d).map_err(|e| e.to_string())?;
            for id in d.box_ids() {
                let before = d
                    .box_partition(&id)
                    .and_then(|p| d.negation_depth(&p))
                    .ok_or_else(|| format!("no depth for `{id}`"))?;
                let after = expanded
                    .box_partition(&id)
                    .and_then(|p| expanded.negation_depth(&p))
                    .ok_or_else(|| format!("no depth for `{id}` after expansion"))?;
                if before % 2 != after % 2 {
                    return Err(format!("box `{id}` changed shading parity under expansion"));
                }
            }
            Ok(())
        };
        for f in &load_fixtures() {
            let q1 = remove_forall_implies(&f.query);
            let d = trc_to_representation_b(&q1).map_err(|e| format!("{}: {e}", f.name))?;
            let svg = render(&d, opts).map_err(|e| format!("{}: {e}", f.name))?;
            xml_well_formed(&svg).map_err(|e| format!("{}: {e}", f.name))?;
            if render(&d, opts).map_err(|e| e.to_string())? != svg {
                return Err(format!("{}: output is not byte-stable", f.name));
            }
            parity_ok(&d).map_err(|e| format!("{}: {e}", f.name))?;
            let expanded = expand_fuse_boxes(&d).map_err(|e| format!("{}: {e}", f.name))?;
            let svg2 = render(&expanded, opts).map_err(|e| format!("{}: {e}", f.name))?;
            xml_well_formed(&svg2).map_err(|e| format!("{}: {e}", f.name))?;
        }
        Ok(())
    };
    verdict(9, "fixture SVGs are well-formed, byte-stable, and parity-invariant", run());
}
