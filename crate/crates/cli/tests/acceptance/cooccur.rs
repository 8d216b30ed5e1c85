use std::collections::BTreeSet;

use cordscope::analytics::{
    chord_export, cooccurrence, extract_mentions, rollup, sankey_export, top_terms, CooccurrenceMatrix, CountMode, RollupOptions, TermSpec,
};
use cordscope::ner::EntityLink;
use cordscope::{AnalyzedPaper, EntityCategory, HealthEntity};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn entity(text: &str, category: EntityCategory, umls: Option<&str>, negated: bool) -> HealthEntity {
    HealthEntity {
        offset: 0,
        length: text.chars().count(),
        text: text.into(),
        category,
        confidence: 1.0,
        is_negated: negated,
        links: umls.map(EntityLink::umls).into_iter().collect(),
    }
}

fn paper(id: &str, entities: Vec<HealthEntity>) -> AnalyzedPaper {
    let mut p = AnalyzedPaper::new(id, format!("Paper {id}"), None);
    let mut offset = 0;
    for mut e in entities {
        e.offset = offset;
        offset += e.length + 1;
        p.entities.push(e);
    }
    p
}

pub fn negativity() {
    // (surfaces, umls id, mentions, negated, expected negativity)
    let terms: [(&[&str], &str, usize, usize, f64); 3] = [
        (&["hydroxychloroquine", "HCQ"], "C0020336", 4846, 191, 0.039414),
        (&["chloroquine", "CQ"], "C0008269", 1870, 38, 0.020321),
        (&["remdesivir"], "C4726677", 1201, 84, 0.069942),
    ];
    let mut rng = StdRng::seed_from_u64(191);
    let mut pool: Vec<HealthEntity> = Vec::new();
    for (surfaces, id, count, negated, _) in terms {
        for i in 0..count {
            let surface = surfaces[i % surfaces.len()];
            pool.push(entity(surface, EntityCategory::MedicationName, Some(id), i < negated));
        }
    }
    // unrelated noise that must not leak into the three groups
    for i in 0..500 {
        pool.push(entity("fever", EntityCategory::SymptomOrSign, None, i % 3 == 0));
    }
    pool.shuffle(&mut rng);
    let mut papers = Vec::new();
    while !pool.is_empty() {
        let take = rng.gen_range(1..=12).min(pool.len());
        let chunk: Vec<HealthEntity> = pool.drain(..take).collect();
        papers.push(paper(&format!("n{}", papers.len()), chunk));
    }

    let stats = rollup(&extract_mentions(&papers, Some(&EntityCategory::MedicationName)), RollupOptions::default());
    assert_eq!(stats.len(), 3);
    for (_, id, count, negated, expected) in terms {
        let s = stats.iter().find(|s| s.key == id).unwrap_or_else(|| panic!("no group for {id}"));
        assert_eq!((s.mention_count, s.negated_count), (count as u64, negated as u64), "{id}");
        assert!((s.negativity - expected).abs() <= 1e-6, "{id}: {} vs {expected}", s.negativity);
    }
}

/// Per paper, the set of matching terms on each axis; counts every pair.
fn brute_force(papers: &[AnalyzedPaper], rows: &[TermSpec], cols: &[TermSpec], mode: CountMode) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0; cols.len()]; rows.len()];
    for p in papers {
        let hits = |t: &TermSpec| p.entities.iter().filter(|e| t.matches(e)).count() as u64;
        for (i, r) in rows.iter().enumerate() {
            for (j, c) in cols.iter().enumerate() {
                let (a, b) = (hits(r), hits(c));
                out[i][j] += match mode {
                    CountMode::Binary => u64::from(a > 0 && b > 0),
                    CountMode::Multiplicity => a * b,
                };
            }
        }
    }
    out
}

fn check_bounds(m: &CooccurrenceMatrix, mode: CountMode) {
    let (row_sums, col_sums) = (m.row_sums(), m.col_sums());
    for (i, row) in m.counts.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert!(v <= row_sums[i] && v <= col_sums[j], "cell ({i},{j}) = {v} exceeds a sum");
            if mode == CountMode::Binary {
                assert!(v <= m.row_papers[i] && v <= m.col_papers[j], "cell ({i},{j}) = {v} exceeds a paper marginal");
            }
        }
    }
}

const POOL: &[(&str, EntityCategory, Option<&str>)] = &[
    ("hydroxychloroquine", EntityCategory::MedicationName, Some("C0020336")),
    ("HCQ", EntityCategory::MedicationName, Some("C0020336")),
    ("Hydroxychloroquine", EntityCategory::MedicationName, None),
    ("azithromycin", EntityCategory::MedicationName, Some("C0052796")),
    ("Azithromycin", EntityCategory::MedicationName, None),
    ("remdesivir", EntityCategory::MedicationName, Some("C4726677")),
    ("heparin", EntityCategory::MedicationName, None),
    ("fever", EntityCategory::SymptomOrSign, None),
    ("cough", EntityCategory::SymptomOrSign, None),
    ("Cough", EntityCategory::SymptomOrSign, None),
    ("COVID-19", EntityCategory::Diagnosis, Some("C5203670")),
    ("pneumonia", EntityCategory::Diagnosis, None),
];

fn random_corpus(rng: &mut StdRng) -> Vec<AnalyzedPaper> {
    (0..rng.gen_range(0..30))
        .map(|i| {
            let ents = (0..rng.gen_range(0..10))
                .map(|_| {
                    let (t, c, u) = POOL.choose(rng).unwrap();
                    entity(t, c.clone(), *u, rng.gen_bool(0.2))
                })
                .collect();
            paper(&format!("r{i}"), ents)
        })
        .collect()
}

fn hand_fixture() -> Vec<AnalyzedPaper> {
    use EntityCategory::*;
    vec![
        paper(
            "1",
            vec![
                entity("HCQ", MedicationName, Some("C0020336"), false),
                entity("HCQ", MedicationName, Some("C0020336"), false),
                entity("azithromycin", MedicationName, Some("C0052796"), false),
            ],
        ),
        paper(
            "2",
            vec![
                entity("hydroxychloroquine", MedicationName, None, false),
                entity("azithromycin", MedicationName, Some("C0052796"), false),
                entity("COVID-19", Diagnosis, Some("C5203670"), false),
            ],
        ),
        paper(
            "3",
            vec![
                entity("hydroxychloroquine", MedicationName, Some("C0020336"), false),
                entity("Azithromycin", MedicationName, None, true),
                entity("COVID-19", Diagnosis, Some("C5203670"), false),
            ],
        ),
    ]
}

pub fn properties() {
    // hand-computed: hydroxychloroquine and azithromycin are in all three
    // papers (by id or by surface), COVID-19 in the last two
    let terms = [
        TermSpec::new("C0020336", "hydroxychloroquine", &["hydroxychloroquine", "HCQ"]),
        TermSpec::new("C0052796", "azithromycin", &["azithromycin"]),
        TermSpec::new("C5203670", "COVID-19", &["COVID-19"]),
    ];
    let m = cooccurrence(&hand_fixture(), &terms, &terms, CountMode::Binary);
    assert_eq!(m.counts, vec![vec![3, 3, 2], vec![3, 3, 2], vec![2, 2, 2]]);
    assert_eq!(m.row_papers, vec![3, 3, 2]);
    assert_eq!(chord_export(&m).unwrap().matrix, vec![vec![0, 3, 2], vec![3, 0, 2], vec![2, 2, 0]]);
    let mult = cooccurrence(&hand_fixture(), &terms, &terms, CountMode::Multiplicity);
    assert_eq!(mult.counts, vec![vec![6, 4, 2], vec![4, 3, 2], vec![2, 2, 2]]);

    let mut rng = StdRng::seed_from_u64(0xc0_0c);
    let categories = [EntityCategory::MedicationName, EntityCategory::SymptomOrSign, EntityCategory::Diagnosis];
    for case in 0..300 {
        let papers = random_corpus(&mut rng);
        let drop_unlinked = rng.gen_bool(0.3);
        let opts = RollupOptions { drop_unlinked };
        let a = categories.choose(&mut rng).unwrap();
        let b = categories.choose(&mut rng).unwrap();
        let top = rng.gen_range(1..8);
        let same = top_terms(&papers, a, top, opts);
        let rows = &same;
        let cols = top_terms(&papers, b, top, opts);
        for mode in [CountMode::Binary, CountMode::Multiplicity] {
            let sq = cooccurrence(&papers, &same, &same, mode);
            assert_eq!(sq.counts, brute_force(&papers, &same, &same, mode), "case {case}");
            for i in 0..same.len() {
                for j in 0..same.len() {
                    assert_eq!(sq.counts[i][j], sq.counts[j][i], "case {case}: asymmetric at ({i},{j})");
                }
            }
            let chord = chord_export(&sq).unwrap();
            assert!((0..same.len()).all(|i| chord.matrix[i][i] == 0), "case {case}: chord diagonal");
            check_bounds(&sq, mode);

            let rect = cooccurrence(&papers, rows, &cols, mode);
            assert_eq!(rect.counts, brute_force(&papers, rows, &cols, mode), "case {case}");
            check_bounds(&rect, mode);
            let sankey = sankey_export(&rect, top);
            for link in &sankey.links {
                let (s, t) = (&sankey.nodes[link.source], &sankey.nodes[link.target]);
                assert!(link.value <= s.total && link.value <= t.total, "case {case}: sankey link exceeds node total");
            }
        }
        // the matrix only sees the chosen terms' keys
        let keys: BTreeSet<&str> = same.iter().map(|t| t.key.as_str()).collect();
        assert_eq!(keys.len(), same.len(), "case {case}: duplicate term keys");
    }
}
