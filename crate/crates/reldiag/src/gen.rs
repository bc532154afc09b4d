//! Deterministic random generation of evaluation instances and of small
//! well-formed queries, for property tests and the benchmark harness.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;
use rand::{Rng, SeedableRng};

use crate::ast::{AttrRef, Binding, Constant, ConstKind, CmpOp, Formula, Query};
use crate::eval::{kind_map, parse_builtin, query_constants, Database, Domain, Relation};
use crate::fragment::Fragment;

/// Referenced database relations and the attributes each must provide,
/// gathered from binding atoms and predicate references (built-in relation
/// names are interpreted, not stored, so they are skipped).
fn required_schemas(queries: &[&Query]) -> BTreeMap<String, BTreeSet<String>> {
    let mut schemas: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for q in queries {
        let body = q.body();
        let rel_of: BTreeMap<String, String> = crate::ast::binding_index(body)
            .into_iter()
            .map(|(v, (rel, _))| (v, rel))
            .collect();
        for rel in rel_of.values() {
            if parse_builtin(rel).is_none() {
                schemas.entry(rel.clone()).or_default();
            }
        }
        crate::ast::visit_predicates(body, &mut |p| {
            let mut touch = |r: &AttrRef| {
                if let Some(rel) = rel_of.get(&r.var) {
                    if parse_builtin(rel).is_none() {
                        schemas.entry(rel.clone()).or_default().insert(r.attr.clone());
                    }
                }
            };
            match p {
                Formula::Join { left, right, .. } => {
                    touch(left);
                    touch(right);
                }
                Formula::Sel { left, .. } => touch(left),
                _ => {}
            }
        });
    }
    schemas
}

/// Random small instances for a set of queries sharing one universe:
/// a domain of at most `max(4, #constants)` constants covering every query
/// constant, and at most 3 tuples per referenced relation. Deterministic
/// for a fixed seed.
pub fn gen_instances_for(
    queries: &[&Query],
    count: usize,
    seed: u64,
) -> Vec<(Database, Domain)> {
    let schemas = required_schemas(queries);

    let mut constants: BTreeSet<Constant> = BTreeSet::new();
    for q in queries {
        constants.extend(query_constants(q));
    }
    let mut pad = 0i64;
    while constants.len() < 4 {
        if constants.insert(Constant::Int(pad)) {
            continue;
        }
        pad += 1;
    }
    let dom = Domain(constants);
    let ints = dom.of_kind(Some(ConstKind::Int));
    let strs = dom.of_kind(Some(ConstKind::Str));

    // attribute kinds, merged across queries (first query wins on conflict)
    let mut attr_kind: BTreeMap<(String, String), ConstKind> = BTreeMap::new();
    for q in queries {
        if let Ok(mut km) = kind_map(q) {
            for (rel, attrs) in &schemas {
                for attr in attrs {
                    if let Some(k) = km.relation_attr(rel, attr) {
                        attr_kind.entry((rel.clone(), attr.clone())).or_insert(k);
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut db = Database::default();
        for (rel, attrs) in &schemas {
            let schema: Vec<String> = attrs.iter().cloned().collect();
            let ntuples = rng.gen_range(0..=3);
            let mut tuples = BTreeSet::new();
            for _ in 0..ntuples {
                let mut tuple = Vec::with_capacity(schema.len());
                for attr in &schema {
                    let pool = match attr_kind.get(&(rel.clone(), attr.clone())) {
                        Some(ConstKind::Str) if !strs.is_empty() => &strs,
                        _ => &ints,
                    };
                    tuple.push(pool[rng.gen_range(0..pool.len())].clone());
                }
                tuples.insert(tuple);
            }
            db.relations.insert(rel.clone(), Relation { schema, tuples });
        }
        out.push((db, dom.clone()));
    }
    out
}

/// Instances for a single query; see [`gen_instances_for`].
pub fn gen_instances(q: &Query, count: usize, seed: u64) -> Vec<(Database, Domain)> {
    gen_instances_for(&[q], count, seed)
}

// ---------------------------------------------------------------------------
// Random query generation

/// Configuration for [`random_query`].
#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub fragment: Fragment,
    pub allow_non_boolean: bool,
    pub max_depth: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { fragment: Fragment::Full, allow_non_boolean: true, max_depth: 4 }
    }
}

const TABLES: &[(&str, &[&str])] = &[("R", &["A", "B"]), ("S", &["B", "C"]), ("T", &["A"])];

struct QueryGen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    next_var: usize,
}

impl QueryGen {
    fn fresh_binding(&mut self) -> Binding {
        let (rel, _) = TABLES[self.rng.gen_range(0..TABLES.len())];
        self.next_var += 1;
        Binding::new(format!("v{}", self.next_var), rel)
    }

    fn attr_of(&mut self, var: &str, scope: &[(String, Vec<String>)]) -> AttrRef {
        let attrs = &scope.iter().find(|(v, _)| v == var).unwrap().1;
        AttrRef::new(var, attrs[self.rng.gen_range(0..attrs.len())].clone())
    }

    fn predicate(&mut self, scope: &[(String, Vec<String>)]) -> Formula {
        let ops = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
        let op = ops[self.rng.gen_range(0..ops.len())];
        let v1 = scope[self.rng.gen_range(0..scope.len())].0.clone();
        let left = self.attr_of(&v1, scope);
        if scope.len() >= 2 && self.rng.gen_bool(0.5) {
            let v2 = scope[self.rng.gen_range(0..scope.len())].0.clone();
            let right = self.attr_of(&v2, scope);
            Formula::Join { left, op, right }
        } else {
            Formula::Sel { left, op, constant: Constant::Int(self.rng.gen_range(1..=3)) }
        }
    }

    fn formula(&mut self, depth: usize, scope: &mut Vec<(String, Vec<String>)>) -> Formula {
        let has_scope = !scope.is_empty();
        if depth >= self.cfg.max_depth && has_scope {
            return self.predicate(scope);
        }
        // choice weights shift toward leaves as depth grows
        let leaf_bias = depth * 2;
        let choice = self.rng.gen_range(0..(10 + leaf_bias));
        match choice {
            0 | 1 => {
                // quantifier introducing 1-2 variables
                let existential =
                    self.cfg.fragment != Fragment::Full || self.rng.gen_bool(0.7);
                let n = 1 + usize::from(self.rng.gen_bool(0.3));
                let bindings: Vec<Binding> = (0..n).map(|_| self.fresh_binding()).collect();
                let base = scope.len();
                for b in &bindings {
                    let attrs = TABLES
                        .iter()
                        .find(|(r, _)| *r == b.relation)
                        .unwrap()
                        .1
                        .iter()
                        .map(|s| s.to_string())
                        .collect();
                    scope.push((b.var.clone(), attrs));
                }
                let body = self.formula(depth + 1, scope);
                scope.truncate(base);
                if existential {
                    Formula::exists(bindings, Some(body))
                } else {
                    Formula::forall(bindings, Some(body))
                }
            }
            2 | 3 if has_scope => {
                let n = 2 + usize::from(self.rng.gen_bool(0.3));
                Formula::And((0..n).map(|_| self.formula(depth + 1, scope)).collect())
            }
            4 if has_scope && self.cfg.fragment != Fragment::Enc => {
                let n = 2 + usize::from(self.rng.gen_bool(0.3));
                Formula::Or((0..n).map(|_| self.formula(depth + 1, scope)).collect())
            }
            5 if has_scope => Formula::not(self.formula(depth + 1, scope)),
            6 if has_scope && self.cfg.fragment == Fragment::Full => Formula::implies(
                self.formula(depth + 1, scope),
                self.formula(depth + 1, scope),
            ),
            _ if has_scope => self.predicate(scope),
            _ => self.formula(depth, scope), // no variables in scope yet: retry
        }
    }
}

/// Deterministic random well-formed query. The result is normalized; the
/// same seed always yields the same query.
pub fn random_query(seed: u64, cfg: GenConfig) -> Query {
    let mut g = QueryGen { rng: ChaCha8Rng::seed_from_u64(seed), cfg, next_var: 0 };
    let non_boolean = cfg.allow_non_boolean && g.rng.gen_bool(0.5);
    let q = if non_boolean {
        let header: Vec<String> = if g.rng.gen_bool(0.5) {
            vec!["A".to_string()]
        } else {
            vec!["A".to_string(), "B".to_string()]
        };
        // anchor every header attribute with an equality binding in the
        // outermost conjunction, then add random structure around it
        let binding = g.fresh_binding();
        let bvar = binding.var.clone();
        let battrs: Vec<String> = TABLES
            .iter()
            .find(|(r, _)| *r == binding.relation)
            .unwrap()
            .1
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut scope =
            vec![("q".to_string(), header.clone()), (bvar.clone(), battrs.clone())];
        let mut conjuncts: Vec<Formula> = header
            .iter()
            .map(|h| Formula::Join {
                left: AttrRef::new("q", h.clone()),
                op: CmpOp::Eq,
                right: AttrRef::new(
                    bvar.clone(),
                    battrs[g.rng.gen_range(0..battrs.len())].clone(),
                ),
            })
            .collect();
        conjuncts.push(g.formula(1, &mut scope));
        Query::NonBoolean {
            out_var: "q".to_string(),
            header,
            body: Formula::exists(vec![binding], Some(Formula::and(conjuncts))),
        }
    } else {
        let mut scope = Vec::new();
        Query::Boolean(g.formula(0, &mut scope))
    };
    q.normalize().expect("generated query is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::check_well_formed;
    use crate::parser::parse_query;

    #[test]
    fn instances_are_deterministic() {
        let q = parse_query("exists r in R [r.A = 1 or r.A = 2]").unwrap().query;
        let a = gen_instances(&q, 5, 42);
        let b = gen_instances(&q, 5, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        let c = gen_instances(&q, 5, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn instances_cover_query_constants_and_cap_sizes() {
        let q = parse_query("exists r in R [r.A = 7 and r.B < 9]").unwrap().query;
        for (db, dom) in gen_instances(&q, 10, 0) {
            assert!(dom.0.contains(&Constant::Int(7)));
            assert!(dom.0.contains(&Constant::Int(9)));
            assert!(dom.0.len() <= 4);
            for rel in db.relations.values() {
                assert!(rel.tuples.len() <= 3);
            }
        }
    }

    #[test]
    fn instances_respect_string_kinds() {
        let q = parse_query("exists b in Boats [b.Color = \"red\"]").unwrap().query;
        for (db, dom) in gen_instances(&q, 10, 1) {
            let boats = &db.relations["Boats"];
            for t in &boats.tuples {
                assert!(matches!(t[0], Constant::Str(_)), "expected string, got {t:?}");
            }
            // evaluating must never hit a cross-kind comparison
            crate::eval::eval(&q, &db, &dom).unwrap();
        }
    }

    #[test]
    fn random_queries_are_well_formed_and_evaluable() {
        for seed in 0..60 {
            let q = random_query(seed, GenConfig::default());
            check_well_formed(&q).unwrap();
            for (db, dom) in gen_instances(&q, 3, seed) {
                crate::eval::eval(&q, &db, &dom).unwrap();
            }
        }
    }

    #[test]
    fn random_queries_respect_fragment() {
        for seed in 0..40 {
            let q = random_query(
                seed,
                GenConfig { fragment: Fragment::Enc, ..GenConfig::default() },
            );
            assert_eq!(crate::fragment::classify(&q), Fragment::Enc);
            let q = random_query(
                seed,
                GenConfig { fragment: Fragment::Encv, ..GenConfig::default() },
            );
            assert_ne!(crate::fragment::classify(&q), Fragment::Full);
        }
    }

    #[test]
    fn random_queries_are_deterministic() {
        assert_eq!(
            random_query(7, GenConfig::default()),
            random_query(7, GenConfig::default())
        );
    }
}
