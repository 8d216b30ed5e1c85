use cordscope::ner::{EntityLink, HealthRelation};
use cordscope::query::{
    self as q, parse_query, projection_names, Expr, FromClause, Ident, Join, Literal, Path, Projection, Query, SelectItem, Step,
};
use cordscope::store::Store;
use cordscope::{AnalyzedPaper, EntityCategory, HealthEntity};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value as J};

const MEDICATIONS: &str =
    "-- unique medication names\nSELECT DISTINCT e.text\nFROM papers p\nJOIN e IN p.entities\nWHERE e.category='MedicationName'\n";
const DOSAGE: &str = "-- dosage of specific drug with paper titles\nSELECT p.title, r.source.text\nFROM papers p JOIN r IN p.relations\nWHERE r.relationType='DosageOfMedication'\nAND r.target.text LIKE 'hydro%'\n";
const UMLS_IDS: &str = "--- get entities with UMLS IDs\nSELECT e.category, e.text,\n  ARRAY (SELECT VALUE l.id\n    FROM l IN e.links\n    WHERE l.dataSource='UMLS')[0] AS umls_id\nFROM papers p JOIN e IN p.entities\n";
const MEDS_FRAME: &str = "SELECT e.text, e.isNegated, p.title, p.publish_time,\n       ARRAY (SELECT VALUE l.id FROM l\n              IN e.links\n              WHERE l.dataSource='UMLS')[0] AS umls_id\nFROM papers p\nJOIN e IN p.entities\nWHERE e.category = 'MedicationName'\n";

/// Reference evaluator: materialises every binding over plain JSON, then
/// filters and projects. `None` is an undefined value.
mod oracle {
    use super::*;

    type Env = Vec<(String, J)>;

    pub fn json_eq(a: &J, b: &J) -> bool {
        match (a, b) {
            (J::Number(x), J::Number(y)) => x.as_f64() == y.as_f64(),
            (J::Array(x), J::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(a, b)| json_eq(a, b)),
            (J::Object(x), J::Object(y)) => x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| json_eq(v, w))),
            _ => a == b,
        }
    }

    fn like(pattern: &str, s: &str) -> bool {
        let mut re = String::from("(?s)^");
        for c in pattern.chars() {
            match c {
                '%' => re.push_str(".*"),
                '_' => re.push('.'),
                c => re.push_str(&regex::escape(&c.to_string())),
            }
        }
        re.push('$');
        regex::Regex::new(&re).unwrap().is_match(s)
    }

    fn walk(mut v: Option<J>, steps: &[Step]) -> Option<J> {
        for s in steps {
            v = match (v, s) {
                (Some(J::Object(m)), Step::Field(f)) => m.get(f).cloned(),
                (Some(J::Array(a)), Step::Index(i)) => a.get(*i).cloned(),
                _ => None,
            };
        }
        v
    }

    fn lookup(env: &Env, p: &Path) -> Option<J> {
        let base = env.iter().rev().find(|(n, _)| *n == p.head.name).map(|(_, v)| v.clone());
        walk(base, &p.steps)
    }

    fn eval(e: &Expr, env: &Env) -> Option<J> {
        match e {
            Expr::Path(p) => lookup(env, p),
            Expr::Literal(Literal::Null) => Some(J::Null),
            Expr::Literal(Literal::Bool(b)) => Some(J::Bool(*b)),
            Expr::Literal(Literal::Number(n)) => Some(json!(*n)),
            Expr::Literal(Literal::String(s)) => Some(J::String(s.clone())),
            Expr::Eq(a, b) => Some(J::Bool(match (eval(a, env), eval(b, env)) {
                (Some(x), Some(y)) => json_eq(&x, &y),
                _ => false,
            })),
            Expr::Like(a, pat) => Some(J::Bool(matches!(eval(a, env), Some(J::String(s)) if like(pat, &s)))),
            Expr::And(a, b) => match (eval(a, env), eval(b, env)) {
                (Some(J::Bool(false)), _) | (_, Some(J::Bool(false))) => Some(J::Bool(false)),
                (Some(J::Bool(true)), Some(J::Bool(true))) => Some(J::Bool(true)),
                _ => None,
            },
            Expr::Array(q) => Some(J::Array(run(q, vec![env.clone()]))),
            Expr::Access(base, steps) => walk(eval(base, env), steps),
        }
    }

    fn names(items: &[SelectItem]) -> Vec<String> {
        let mut n = 0;
        items
            .iter()
            .map(|item| {
                let implied = match &item.expr {
                    Expr::Path(p) if p.steps.is_empty() => Some(p.head.name.clone()),
                    Expr::Path(Path { steps, .. }) | Expr::Access(_, steps) => match steps.last() {
                        Some(Step::Field(f)) => Some(f.clone()),
                        _ => None,
                    },
                    _ => None,
                };
                item.alias.as_ref().map(|a| a.name.clone()).or(implied).unwrap_or_else(|| {
                    n += 1;
                    format!("${n}")
                })
            })
            .collect()
    }

    fn bind(envs: Vec<Env>, alias: &str, path: &Path) -> Vec<Env> {
        let mut out = Vec::new();
        for env in envs {
            if let Some(J::Array(items)) = lookup(&env, path) {
                for it in items {
                    let mut e = env.clone();
                    e.push((alias.to_string(), it));
                    out.push(e);
                }
            }
        }
        out
    }

    fn run(q: &Query, seeds: Vec<Env>) -> Vec<J> {
        let mut envs = seeds;
        if let FromClause::In { alias, path } = &q.from {
            envs = bind(envs, &alias.name, path);
        }
        for j in &q.joins {
            envs = bind(envs, &j.alias.name, &j.path);
        }
        let mut rows: Vec<J> = Vec::new();
        for env in envs {
            if let Some(p) = &q.predicate {
                if eval(p, &env) != Some(J::Bool(true)) {
                    continue;
                }
            }
            let row = match &q.projection {
                Projection::Value(e) => match eval(e, &env) {
                    Some(v) => v,
                    None => continue,
                },
                Projection::Items(items) => {
                    let mut m = serde_json::Map::new();
                    for (item, name) in items.iter().zip(names(items)) {
                        if let Some(v) = eval(&item.expr, &env) {
                            m.insert(name, v);
                        }
                    }
                    J::Object(m)
                }
            };
            if q.distinct && rows.iter().any(|r| json_eq(r, &row)) {
                continue;
            }
            rows.push(row);
        }
        rows
    }

    pub fn evaluate(q: &Query, docs: &[J]) -> Vec<J> {
        let alias = q.from.alias().name.clone();
        run(q, docs.iter().map(|d| vec![(alias.clone(), d.clone())]).collect())
    }
}

fn engine(query: &Query, docs: &[q::Value]) -> Vec<J> {
    q::evaluate(query, docs).iter().map(|v| v.to_json().expect("rows are never undefined")).collect()
}

fn assert_same(got: &[J], want: &[J], context: &str) {
    assert_eq!(got.len(), want.len(), "{context}: row count");
    for (g, w) in got.iter().zip(want) {
        assert!(oracle::json_eq(g, w), "{context}\n got {g}\nwant {w}");
    }
}

// ---- the 20-paper fixture ----

fn ent(text: &str, category: EntityCategory, links: &[(&str, &str)], negated: bool) -> HealthEntity {
    HealthEntity {
        offset: 0,
        length: text.chars().count(),
        text: text.into(),
        category,
        confidence: 0.9,
        is_negated: negated,
        links: links.iter().map(|(s, id)| EntityLink::new(*s, *id)).collect(),
    }
}

fn twenty_papers() -> Vec<AnalyzedPaper> {
    use EntityCategory::*;
    let drugs: [(&str, &[(&str, &str)]); 6] = [
        ("hydroxychloroquine", &[("UMLS", "C0020336")]),
        ("HCQ", &[("UMLS", "C0020336")]),
        ("Hydroxychloroquine", &[("MSH", "D006886"), ("UMLS", "C0020336")]),
        ("chloroquine", &[("UMLS", "C0008269")]),
        ("remdesivir", &[]),
        ("hydroxy-chloroquine", &[("UMLS", "C0020336")]),
    ];
    let doses = ["400 mg", "200 mg twice daily", "600 mg", "5 mg/kg"];
    (0..20)
        .map(|i| {
            let date = (i % 4 != 3).then(|| format!("2020-{:02}-15", i % 12 + 1).parse().unwrap());
            let mut p = AnalyzedPaper::new(format!("f{i:02}"), format!("Fixture paper {i}"), date);
            let mut add = |e: HealthEntity| {
                p.entities.push(e);
                p.entities.len() - 1
            };
            let (name, links) = drugs[i % drugs.len()];
            let drug = add(ent(name, MedicationName, links, i % 5 == 0));
            if i % 3 == 0 {
                let dose = add(ent(doses[i % doses.len()], Dosage, &[], false));
                p.relations.push(HealthRelation {
                    relation_type: "DosageOfMedication".into(),
                    bidirectional: false,
                    source: dose,
                    target: drug,
                });
            }
            if i % 4 == 1 {
                let short = add(ent("HCQ", MedicationName, &[("UMLS", "C0020336")], false));
                p.relations.push(HealthRelation { relation_type: "Abbreviation".into(), bidirectional: true, source: drug, target: short });
            }
            if i % 2 == 0 {
                add(ent("COVID-19", Diagnosis, &[("ICD10CM", "U07.1"), ("UMLS", "C5203670")], false));
            }
            if i % 7 == 2 {
                let fever = add(ent("fever", SymptomOrSign, &[], true));
                p.relations.push(HealthRelation {
                    relation_type: "TimeOfCondition".into(),
                    bidirectional: false,
                    source: fever,
                    target: drug,
                });
            }
            if i % 6 == 5 {
                let dose = add(ent("10 mg", Dosage, &[], false));
                p.relations.push(HealthRelation {
                    relation_type: "DosageOfMedication".into(),
                    bidirectional: false,
                    source: dose,
                    target: 0,
                });
            }
            p
        })
        .collect()
}

// ---- random stores and queries ----

const TEXTS: &[&str] = &["HCQ", "hydroxychloroquine", "fever", "400 mg", "COVID-19", "Hydro", "h_q%"];
const CATEGORIES: &[&str] = &["MedicationName", "Diagnosis", "SymptomOrSign", "Dosage"];
const RELATIONS: &[&str] = &["DosageOfMedication", "Abbreviation"];

fn random_entity(rng: &mut StdRng) -> J {
    let mut e = json!({
        "offset": rng.gen_range(0..4),
        "text": TEXTS.choose(rng).unwrap(),
        "category": CATEGORIES.choose(rng).unwrap(),
        "isNegated": rng.gen_bool(0.3),
    });
    match rng.gen_range(0..5) {
        0 => {}
        1 => e["links"] = json!([]),
        2 => {
            let id = ["C1", "C2"].choose(rng).unwrap();
            e["links"] = json!([{"dataSource": "UMLS", "id": id}]);
        }
        3 => e["links"] = json!([{"dataSource": "ICD10CM", "id": "U07.1"}, {"dataSource": "UMLS", "id": "C1"}]),
        _ => e["links"] = json!({"dataSource": "UMLS", "id": "C3"}),
    }
    if rng.gen_bool(0.1) {
        e["text"] = json!(null);
    }
    e
}

fn random_doc(rng: &mut StdRng, i: usize) -> J {
    let entities: Vec<J> = (0..rng.gen_range(0..=8)).map(|_| random_entity(rng)).collect();
    let relations: Vec<J> = if entities.len() >= 2 {
        (0..rng.gen_range(0..3))
            .map(|_| {
                json!({
                    "relationType": RELATIONS.choose(rng).unwrap(),
                    "source": entities.choose(rng).unwrap(),
                    "target": entities.choose(rng).unwrap(),
                })
            })
            .collect()
    } else {
        vec![]
    };
    let mut d = json!({"id": format!("d{i}"), "entities": entities, "relations": relations});
    if rng.gen_bool(0.8) {
        let title = ["T1", "T2", "T3"].choose(rng).unwrap();
        d["title"] = json!(title);
    }
    if rng.gen_bool(0.2) {
        d["year"] = json!(rng.gen_range(2019..2022));
    }
    d
}

fn random_path(rng: &mut StdRng, alias: &str, kind: &str) -> Expr {
    let fields: &[&[&str]] = match kind {
        "paper" => &[&["title"], &["id"], &["year"], &["missing"], &["entities", "0", "text"], &["relations", "1", "target", "text"]],
        "entity" => &[&["text"], &["category"], &["offset"], &["isNegated"], &["links", "0", "id"], &["links", "dataSource"], &["nope"]],
        "relation" => &[&["relationType"], &["source", "text"], &["target", "text"], &["target", "category"], &["source"]],
        _ => &[&["id"], &["dataSource"]],
    };
    let steps = fields
        .choose(rng)
        .unwrap()
        .iter()
        .map(|f| f.parse::<usize>().map(Step::Index).unwrap_or_else(|_| Step::Field(f.to_string())))
        .collect();
    Expr::Path(Path { head: Ident::new(alias), steps })
}

fn random_literal(rng: &mut StdRng) -> Expr {
    match rng.gen_range(0..6) {
        0 => Expr::Literal(Literal::Number(rng.gen_range(0..4) as f64)),
        1 => Expr::Literal(Literal::Bool(rng.gen())),
        2 => Expr::Literal(Literal::Null),
        3 => Expr::string(CATEGORIES.choose(rng).unwrap()),
        4 => Expr::string(RELATIONS.choose(rng).unwrap()),
        _ => Expr::string(TEXTS.choose(rng).unwrap()),
    }
}

type Scope = Vec<(String, &'static str)>;

fn random_atom(rng: &mut StdRng, scope: &Scope) -> Expr {
    let (alias, kind) = scope.choose(rng).unwrap();
    let lhs = random_path(rng, alias, kind);
    match rng.gen_range(0..4) {
        0 => Expr::like(lhs, ["hydro%", "%C%", "H_Q", "%", "_", "%mg"].choose(rng).unwrap()),
        1 => {
            let (a2, k2) = scope.choose(rng).unwrap();
            Expr::eq(lhs, random_path(rng, a2, k2))
        }
        _ => Expr::eq(lhs, random_literal(rng)),
    }
}

fn random_predicate(rng: &mut StdRng, scope: &Scope) -> Expr {
    let mut e = random_atom(rng, scope);
    for _ in 0..rng.gen_range(0..3) {
        e = Expr::and(e, random_atom(rng, scope));
    }
    e
}

fn random_links_subquery(rng: &mut StdRng, entity_alias: &str) -> Expr {
    let sub = Query {
        distinct: rng.gen_bool(0.3),
        projection: Projection::Value(Expr::path("l", &[["id", "dataSource"].choose(rng).unwrap()])),
        from: FromClause::In { alias: Ident::new("l"), path: Path::new(entity_alias, &["links"]) },
        joins: vec![],
        predicate: rng
            .gen_bool(0.6)
            .then(|| Expr::eq(Expr::path("l", &["dataSource"]), Expr::string(["UMLS", "ICD10CM"].choose(rng).unwrap()))),
    };
    let arr = Expr::Array(Box::new(sub));
    if rng.gen_bool(0.6) {
        Expr::Access(Box::new(arr), vec![Step::Index(rng.gen_range(0..2))])
    } else {
        arr
    }
}

fn random_query(rng: &mut StdRng) -> Query {
    let mut scope: Scope = vec![("p".into(), "paper")];
    let mut joins = Vec::new();
    let mut join = |alias: &str, head: &str, field: &str, kind: &'static str, scope: &mut Scope| {
        joins.push(Join { alias: Ident::new(alias), path: Path::new(head, &[field]) });
        scope.push((alias.into(), kind));
    };
    match rng.gen_range(0..5) {
        0 => {}
        1 => join("e", "p", "entities", "entity", &mut scope),
        2 => join("r", "p", "relations", "relation", &mut scope),
        3 => {
            join("e", "p", "entities", "entity", &mut scope);
            join("l", "e", "links", "link", &mut scope);
        }
        _ => {
            join("e", "p", "entities", "entity", &mut scope);
            join("r", "p", "relations", "relation", &mut scope);
        }
    }
    let has_entity = scope.iter().any(|(a, _)| a == "e");
    let has_link = scope.iter().any(|(a, _)| a == "l");
    let projection = if rng.gen_bool(0.3) {
        let (a, k) = scope.choose(rng).unwrap();
        Projection::Value(random_path(rng, a, k))
    } else {
        let mut items = Vec::new();
        for i in 0..rng.gen_range(1..=3) {
            let expr = if has_entity && !has_link && rng.gen_bool(0.25) {
                random_links_subquery(rng, "e")
            } else if rng.gen_bool(0.1) {
                random_literal(rng)
            } else {
                let (a, k) = scope.choose(rng).unwrap();
                random_path(rng, a, k)
            };
            items.push(SelectItem { expr, alias: Some(Ident::new(format!("c{i}"))) });
        }
        let mut bare = items.clone();
        for item in &mut bare {
            item.alias = None;
        }
        let names = projection_names(&bare);
        let unique = names.iter().enumerate().all(|(i, n)| !names[..i].contains(n));
        Projection::Items(if unique && rng.gen_bool(0.5) { bare } else { items })
    };
    Query {
        distinct: rng.gen_bool(0.4),
        projection,
        from: FromClause::Collection { name: Ident::new("papers"), alias: Ident::new("p") },
        joins,
        predicate: rng.gen_bool(0.6).then(|| random_predicate(rng, &scope)),
    }
}

pub fn dialect() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open_writer(dir.path()).unwrap();
    for p in twenty_papers() {
        store.upsert(&p).unwrap();
    }
    store.flush().unwrap();
    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.len(), 20);
    let docs = q::documents(&store).unwrap();
    let docs_json: Vec<J> = store.load_all().unwrap().iter().map(AnalyzedPaper::to_json_value).collect();

    for (name, sql, min_rows) in [("medications", MEDICATIONS, 5), ("dosage", DOSAGE, 3), ("umls", UMLS_IDS, 30), ("frame", MEDS_FRAME, 20)]
    {
        let query = parse_query(sql).unwrap_or_else(|e| panic!("{name}: {}", e.render(sql)));
        let got = engine(&query, &docs);
        assert_same(&got, &oracle::evaluate(&query, &docs_json), name);
        assert!(got.len() >= min_rows, "{name}: only {} rows", got.len());
        let via_store: Vec<J> = q::run(sql, &store).unwrap().iter().filter_map(q::Value::to_json).collect();
        assert_eq!(via_store, got, "{name}: store path");
    }

    let mut rng = StdRng::seed_from_u64(0xacce_97a1);
    let mut nonempty = 0;
    for case in 0..1000 {
        let docs_json: Vec<J> = (0..rng.gen_range(0..=20)).map(|i| random_doc(&mut rng, i)).collect();
        let docs: Vec<q::Value> = docs_json.iter().map(q::Value::from).collect();
        let query = random_query(&mut rng);
        let printed = query.to_string();
        let reparsed = parse_query(&printed).unwrap_or_else(|e| panic!("case {case}: {printed}\n{e}"));
        assert_eq!(reparsed, query, "case {case}: printing round trip of {printed}");
        let got = engine(&reparsed, &docs);
        assert_same(&got, &oracle::evaluate(&query, &docs_json), &format!("case {case}: {printed}"));
        nonempty += usize::from(!got.is_empty());
    }
    assert!(nonempty > 300, "generator too sparse: {nonempty} non-empty cases");
}
