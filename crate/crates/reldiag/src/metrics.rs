//! Diagram size metrics, the parameterized query family whose disjunction
//! form is exponentially more succinct than the legacy union-of-cells form,
//! and a batch benchmark harness over query fixtures.

use std::collections::BTreeSet;

use crate::ast::{erased_atoms, AttrRef, Binding, Constant, CmpOp, Formula, Query};
use crate::diagram::{validate, Diagram, PartitionKind};
use crate::eval::{equiv_on, eval, Database, Domain, EquivOutcome, EvalError, ResultSet};
use crate::fragment::{classify, remove_forall_implies, Fragment, FragmentError};
use crate::gen::gen_instances_for;
use crate::safety::check_safety;
use crate::translate::{desugar_builtins, diagram_to_trc, trc_to_representation_b};

/// Visual size of a diagram.
///
/// Counting convention (pinned by the succinctness family below): a table
/// box and each of its displayed attribute boxes count 1; the output box
/// counts 1 plus its attributes; each fuse partition counts 1; an unfused
/// unary condition counts 1 box and 1 edge, a fused one counts 0 boxes and
/// 0 edges (it is absorbed into the attribute box); a binary built-in drawn
/// as a labeled arrow counts 0 boxes and 1 edge, an undrawn (canonical) one
/// counts 3 boxes (name plus two anchors) and 2 edges.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SizeMetrics {
    pub boxes: usize,
    pub edges: usize,
}

pub fn size_metrics(d: &Diagram) -> SizeMetrics {
    let fused: BTreeSet<&String> = d.hints.fused_selections.iter().collect();
    let arrows: BTreeSet<&String> = d.hints.arrow_joins.iter().collect();
    let mut boxes = 0;
    for t in &d.tables {
        boxes += 1 + t.attrs.len();
    }
    if let Some(o) = &d.output {
        boxes += 1 + o.attrs.len();
    }
    boxes += d.partitions.iter().filter(|p| p.kind == PartitionKind::Fuse).count();
    let mut edges = d.edges.len();
    for b in &d.builtins {
        if b.is_unary() {
            if fused.contains(&b.id) {
                edges -= 1;
            } else {
                boxes += 1;
            }
        } else if arrows.contains(&b.id) {
            edges -= 1; // two anchor edges drawn as one labeled arrow
        } else {
            boxes += 3;
        }
    }
    SizeMetrics { boxes, edges }
}

/// The Boolean query `∃r∈R[(r.A1=c11 ∨ r.A1=c12) ∧ … ∧ (r.Ak=ck1 ∨ r.Ak=ck2)]`
/// with distinct integer constants `cij = 10i + j`.
pub fn family(k: usize) -> Query {
    assert!(k >= 1, "family is defined for k >= 1");
    let conjuncts: Vec<Formula> = (1..=k)
        .map(|i| {
            Formula::Or(
                (1..=2)
                    .map(|j| Formula::Sel {
                        left: AttrRef::new("r", format!("A{i}")),
                        op: CmpOp::Eq,
                        constant: Constant::Int((10 * i + j) as i64),
                    })
                    .collect(),
            )
        })
        .collect();
    Query::Boolean(Formula::exists(
        vec![Binding::new("r", "R")],
        Some(Formula::and(conjuncts)),
    ))
}

/// A union of disjunction-free queries sharing one header.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UnionForm {
    pub cells: Vec<Query>,
}

/// Distribute disjunctions to the root and split into one ENC query per
/// disjunct. Only distributable disjunctions are supported: an `or` in the
/// scope of a negation cannot be pulled out and is an error.
pub fn legacy_union_form(q: &Query) -> Result<UnionForm, FragmentError> {
    fn has_or(f: &Formula) -> bool {
        match f {
            Formula::Or(_) => true,
            Formula::Not(g) => has_or(g),
            Formula::And(cs) => cs.iter().any(has_or),
            Formula::Implies(a, b) => has_or(a) || has_or(b),
            Formula::Exists(_, body) | Formula::Forall(_, body) => {
                body.as_deref().is_some_and(has_or)
            }
            _ => false,
        }
    }
    fn cells(f: &Formula) -> Result<Vec<Formula>, FragmentError> {
        match f {
            Formula::Or(cs) => {
                let mut out = Vec::new();
                for c in cs {
                    out.extend(cells(c)?);
                }
                Ok(out)
            }
            Formula::And(cs) => {
                let mut out = vec![Vec::new()];
                for c in cs {
                    let choices = cells(c)?;
                    out = out
                        .into_iter()
                        .flat_map(|prefix: Vec<Formula>| {
                            choices.iter().map(move |ch| {
                                let mut v = prefix.clone();
                                v.push(ch.clone());
                                v
                            })
                        })
                        .collect();
                }
                Ok(out.into_iter().map(Formula::and).collect())
            }
            Formula::Exists(bs, body) => match body {
                Some(body) => Ok(cells(body)?
                    .into_iter()
                    .map(|c| Formula::exists(bs.clone(), Some(c)))
                    .collect()),
                None => Ok(vec![f.clone()]),
            },
            Formula::Not(g) => {
                if has_or(g) {
                    Err(FragmentError::Other(
                        "disjunction under negation cannot be distributed into union \
                         cells"
                            .to_string(),
                    ))
                } else {
                    Ok(vec![f.clone()])
                }
            }
            Formula::Join { .. } | Formula::Sel { .. } => Ok(vec![f.clone()]),
            Formula::Forall(..) | Formula::Implies(..) => {
                Err(FragmentError::UniversalPresent)
            }
        }
    }
    let q = q.normalize().map_err(|e| FragmentError::Other(e.to_string()))?;
    let cs = cells(q.body())?;
    let cells = cs
        .into_iter()
        .map(|c| {
            q.map_body(|_| c)
                .normalize()
                .map_err(|e| FragmentError::Other(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(UnionForm { cells })
}

/// Evaluate a union form: disjunction of Boolean results, or the set union
/// of the cells' result tuples.
pub fn eval_union(
    u: &UnionForm,
    db: &Database,
    dom: &Domain,
) -> Result<ResultSet, EvalError> {
    let mut any = false;
    let mut tuples: BTreeSet<Vec<Constant>> = BTreeSet::new();
    let mut non_boolean = false;
    for cell in &u.cells {
        match eval(cell, db, dom)? {
            ResultSet::Bool(b) => any = any || b,
            ResultSet::Tuples(ts) => {
                non_boolean = true;
                tuples.extend(ts);
            }
        }
    }
    Ok(if non_boolean { ResultSet::Tuples(tuples) } else { ResultSet::Bool(any) })
}

/// One benchmark line per query.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BenchRow {
    pub name: String,
    pub fragment: Fragment,
    pub safety: String,
    pub translated: bool,
    pub atoms_preserved: bool,
    pub round_trip_equiv: bool,
    pub boxes: usize,
    pub edges: usize,
    pub legacy_boxes: Option<usize>,
    pub error: Option<String>,
}

/// Translate every query to its diagram form, read it back, and record
/// safety, atom preservation, semantic round-trip equivalence (on seeded
/// random instances), and size against the legacy union form. Failures are
/// recorded per row; the harness never aborts.
pub fn run_benchmark(queries: &[(String, Query)], seed: u64) -> Vec<BenchRow> {
    queries
        .iter()
        .map(|(name, q)| {
            let fragment = classify(q);
            let report = check_safety(q);
            let safety = if report.is_safe() {
                "safe".to_string()
            } else {
                let conds: Vec<String> =
                    report.conditions().iter().map(|c| c.to_string()).collect();
                format!("unsafe({})", conds.join(","))
            };
            let mut row = BenchRow {
                name: name.clone(),
                fragment,
                safety,
                translated: false,
                atoms_preserved: false,
                round_trip_equiv: false,
                boxes: 0,
                edges: 0,
                legacy_boxes: None,
                error: None,
            };
            // universal quantification is rewritten away before diagramming
            let q2 = if fragment == Fragment::Full { remove_forall_implies(q) } else { q.clone() };
            let d = match trc_to_representation_b(&q2) {
                Ok(d) => d,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            };
            let validity = validate(&d);
            if !validity.is_valid() {
                row.error = Some(validity.to_string());
                return row;
            }
            row.translated = true;
            let m = size_metrics(&d);
            row.boxes = m.boxes;
            row.edges = m.edges;
            match diagram_to_trc(&d) {
                Ok(back) => {
                    row.atoms_preserved = erased_atoms(&desugar_builtins(&q2))
                        == erased_atoms(&desugar_builtins(&back));
                    let instances = gen_instances_for(&[q, &back], 10, seed);
                    row.round_trip_equiv = matches!(
                        equiv_on(q, &back, &instances),
                        Ok(EquivOutcome::Equivalent)
                    );
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row.legacy_boxes = legacy_union_form(&q2).ok().and_then(|u| {
                u.cells
                    .iter()
                    .map(|c| trc_to_representation_b(c).map(|d| size_metrics(&d).boxes))
                    .sum::<Result<usize, _>>()
                    .ok()
            });
            row
        })
        .collect()
}

/// Tab-separated coverage table with a header line.
pub fn render_report(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "name\tfragment\tsafety\ttranslated\tatoms_preserved\tround_trip_equiv\
         \tboxes\tedges\tlegacy_boxes\terror\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.name,
            r.fragment,
            r.safety,
            r.translated,
            r.atoms_preserved,
            r.round_trip_equiv,
            r.boxes,
            r.edges,
            r.legacy_boxes.map_or_else(|| "-".to_string(), |b| b.to_string()),
            r.error.as_deref().unwrap_or("-"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::trc_to_diagram;

    fn parse(s: &str) -> Query {
        crate::parser::parse_query(s).unwrap().query
    }

    #[test]
    fn family_shape() {
        let q = family(2).normalize().unwrap();
        fn count(f: &Formula, ors: &mut usize, ands: &mut usize) {
            match f {
                Formula::Or(cs) => {
                    *ors += 1;
                    cs.iter().for_each(|c| count(c, ors, ands));
                }
                Formula::And(cs) => {
                    *ands += 1;
                    cs.iter().for_each(|c| count(c, ors, ands));
                }
                Formula::Not(g) => count(g, ors, ands),
                Formula::Exists(_, Some(b)) => count(b, ors, ands),
                _ => {}
            }
        }
        let (mut ors, mut ands) = (0, 0);
        count(q.body(), &mut ors, &mut ands);
        assert_eq!((ors, ands), (2, 1));
        assert_eq!(classify(&q), Fragment::Encv);
    }

    #[test]
    fn family_metrics_match_the_closed_form() {
        for k in 1..=4 {
            let d = trc_to_representation_b(&family(k)).unwrap();
            assert!(validate(&d).is_valid(), "k={k}: {}", validate(&d));
            let m = size_metrics(&d);
            assert_eq!((m.boxes, m.edges), (5 * k + 1, 2 * k), "k={k}");
        }
    }

    #[test]
    fn smallest_diagram_is_one_box() {
        let d = trc_to_diagram(&parse("exists a in A []")).unwrap();
        assert_eq!(size_metrics(&d), SizeMetrics { boxes: 1, edges: 0 });
    }

    #[test]
    fn legacy_form_of_the_family_has_exponentially_many_cells() {
        let u = legacy_union_form(&family(3)).unwrap();
        assert_eq!(u.cells.len(), 8);
        let mut total = 0;
        for cell in &u.cells {
            assert_eq!(classify(cell), Fragment::Enc);
            let d = trc_to_representation_b(cell).unwrap();
            let m = size_metrics(&d);
            assert_eq!((m.boxes, m.edges), (4, 0)); // k+1 boxes, all fused
            total += m.boxes;
        }
        assert_eq!(total, (3 + 1) * 8);
    }

    #[test]
    fn union_form_is_eval_equivalent() {
        for q in [
            family(2),
            parse("{ q(A) | exists r in R [q.A = r.A] or exists s in S [q.A = s.A] }"),
        ] {
            let u = legacy_union_form(&q).unwrap();
            for (db, dom) in gen_instances_for(&[&q], 15, 11) {
                assert_eq!(
                    eval_union(&u, &db, &dom).unwrap(),
                    eval(&q, &db, &dom).unwrap()
                );
            }
        }
    }

    #[test]
    fn union_query_has_two_cells_with_repeated_output() {
        let q = parse("{ q(A) | exists r in R [q.A = r.A] or exists s in S [q.A = s.A] }");
        let u = legacy_union_form(&q).unwrap();
        assert_eq!(u.cells.len(), 2);
        for cell in &u.cells {
            assert_eq!(cell.header_arity(), 1);
        }
    }

    #[test]
    fn disjunction_free_query_is_a_single_cell() {
        let q = parse("exists r in R [r.A = 1]");
        let u = legacy_union_form(&q).unwrap();
        assert_eq!(u.cells.len(), 1);
        assert_eq!(&u.cells[0], &q.normalize().unwrap());
    }

    #[test]
    fn negated_disjunction_is_not_distributable() {
        let q = parse("exists r in R [not(r.A = 1 or r.A = 2)]");
        assert!(matches!(legacy_union_form(&q), Err(FragmentError::Other(_))));
    }

    #[test]
    fn succinctness_ratio_grows() {
        let mut last = 0.0;
        for k in 1..=5 {
            let rep = size_metrics(&trc_to_representation_b(&family(k)).unwrap()).boxes;
            let legacy: usize = legacy_union_form(&family(k))
                .unwrap()
                .cells
                .iter()
                .map(|c| size_metrics(&trc_to_representation_b(c).unwrap()).boxes)
                .sum();
            assert_eq!(legacy, (k + 1) * (1 << k));
            let ratio = legacy as f64 / rep as f64;
            assert!(ratio > last, "k={k}: {ratio} <= {last}");
            last = ratio;
        }
    }

    #[test]
    fn benchmark_rows_cover_translation_and_equivalence() {
        let queries = vec![
            ("family2".to_string(), family(2)),
            (
                "division".to_string(),
                parse(
                    "{ q(A) | exists r in R [q.A = r.A and forall s in S [s.A > 0 -> \
                     exists r2 in R [r2.B = s.B and r2.A = r.A]]] }",
                ),
            ),
        ];
        let rows = run_benchmark(&queries, 3);
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.translated, "{}: {:?}", r.name, r.error);
            assert!(r.round_trip_equiv, "{}", r.name);
            assert!(r.atoms_preserved || r.fragment == Fragment::Full, "{}", r.name);
        }
        let report = render_report(&rows);
        assert!(report.starts_with("name\t"));
        assert_eq!(report.lines().count(), 3);
    }

    #[test]
    fn empty_benchmark_is_a_header_only_report() {
        assert_eq!(render_report(&run_benchmark(&[], 0)).lines().count(), 1);
    }
}
