//! Acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use standoff::concepts::{tag_sentence, Lexicon};
use standoff::doc::Segments;
use standoff::graph::{find_subgraph_occurrences, mine_frequent_subgraphs, LabeledGraph};
use standoff::inline::{convert, render_offsets, OffsetConvention};
use standoff::sections::{detect_sections, match_templates, Guideline, SECTION};
use standoff::{
    AllenRelation, Annotation, DocError, DocId, Document, Interval, IntervalTree, NewAnnotation, Store,
};

fn iv(s: usize, e: usize) -> Interval {
    Interval::new(s, e).unwrap()
}

/// Linear-scan oracle: entries satisfying `rel`, sorted canonically with
/// payload as tie-break.
fn scan<P: Ord + Copy>(entries: &[(Interval, P)], rel: AllenRelation, b: &Interval) -> Vec<(Interval, P)> {
    let mut out: Vec<(Interval, P)> = entries.iter().copied().filter(|(i, _)| rel.holds(i, b)).collect();
    out.sort();
    out
}

fn random_interval(rng: &mut StdRng, span: usize, max_len: usize) -> Interval {
    let s = rng.gen_range(0..span);
    let e = (s + rng.gen_range(0..=max_len)).min(span);
    iv(s, e)
}

// 1
fn phi_sentence() -> String {
    let inline = r#"The patient underwent an ECHO and endoscopy at <PHI TYPE="Hospital">Beth Israel Deaconess Medical Center</PHI> on <PHI TYPE="Date">April 28</PHI>."#;
    let c = convert(inline).unwrap();
    let rows: Vec<(usize, usize, String, String)> = render_offsets(&c.annotations, OffsetConvention::Inclusive1)
        .into_iter()
        .map(|r| (r.start, r.end, r.type_name, r.attributes))
        .collect();
    assert_eq!(
        rows,
        vec![
            (48, 83, "PHI".to_string(), "Type=Hospital".to_string()),
            (88, 95, "PHI".to_string(), "Type=Date".to_string()),
        ]
    );
    let hospital = c.annotations.iter().find(|a| a.value == "Hospital").unwrap();
    assert_eq!(hospital.span, iv(47, 83));
    let chars: Vec<char> = c.text.chars().collect();
    assert_eq!(chars[47..83].iter().collect::<String>(), "Beth Israel Deaconess Medical Center");
    "rows (48,83,PHI,Type=Hospital) and (88,95,PHI,Type=Date); hospital at (47,83)".into()
}

// 2
fn allen_oracle() -> String {
    let mut rng = StdRng::seed_from_u64(2);
    let mut compared = 0usize;
    for _ in 0..50 {
        let len = rng.gen_range(200..2000);
        let mut doc = Document::new(DocId(1), "d", "x".repeat(len));
        for _ in 0..200 {
            let span = random_interval(&mut rng, len, 60);
            doc.add_annotation(NewAnnotation::new("t", span)).unwrap();
        }
        let entries: Vec<(Interval, i64)> = doc.annotations().iter().map(|a| (a.span, a.id.0)).collect();
        for _ in 0..50 {
            let b = random_interval(&mut rng, len, 200);
            for rel in AllenRelation::ALL {
                let got: Vec<(Interval, i64)> = doc
                    .annotations_satisfying(rel, b, None)
                    .into_iter()
                    .map(|a| (a.span, a.id.0))
                    .collect();
                assert_eq!(got, scan(&entries, rel, &b), "{rel} against {b}");
                compared += 1;
            }
        }
    }
    format!("{compared} relation queries identical to linear scan")
}

// 3
fn null_interval() -> String {
    let i = iv(3, 3);
    let j = iv(3, 5);
    let rels = i.relate(&j);
    assert!(rels.contains(AllenRelation::Meets) && rels.contains(AllenRelation::Starts), "{rels:?}");
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..1000 {
        let x = rng.gen_range(0..1000);
        let j = iv(x, x + rng.gen_range(1..50));
        let r = iv(x, x).relate(&j);
        assert!(r.contains(AllenRelation::Meets) && r.contains(AllenRelation::Starts));
    }
    "relate((3,3),(3,5)) contains MEETS and STARTS".into()
}

// 4
fn tree_audit() -> String {
    let mut rng = StdRng::seed_from_u64(4);
    let mut tree: IntervalTree<u32> = IntervalTree::new();
    let mut live: Vec<(Interval, u32)> = Vec::new();
    let (mut inserts, mut removes) = (0, 0);
    for n in 0..10_000u32 {
        if live.is_empty() || rng.gen_bool(0.6) {
            let key = random_interval(&mut rng, 5_000, 100);
            tree.insert(key, n).unwrap();
            live.push((key, n));
            inserts += 1;
        } else {
            let (key, p) = live.swap_remove(rng.gen_range(0..live.len()));
            assert_eq!(tree.remove(&key, &p).unwrap(), p);
            removes += 1;
        }
        if n % 500 == 0 {
            tree.audit().unwrap();
        }
    }
    tree.audit().unwrap();
    let rebuilt: IntervalTree<u32> = live.iter().copied().collect();
    rebuilt.audit().unwrap();
    let content: Vec<(Interval, u32)> = tree.iter().map(|(k, p)| (k, *p)).collect();
    let expected: Vec<(Interval, u32)> = rebuilt.iter().map(|(k, p)| (k, *p)).collect();
    live.sort();
    assert_eq!(content, expected);
    assert_eq!(content, live);
    format!("{inserts} inserts, {removes} removes, {} survivors audited", live.len())
}

// 5
fn pruning() -> String {
    const SPAN: usize = 1_000_000;
    let mut rng = StdRng::seed_from_u64(5);
    let entries: Vec<(Interval, u32)> = (0..100_000u32).map(|n| (random_interval(&mut rng, SPAN, 200), n)).collect();
    let tree: IntervalTree<u32> = entries.iter().copied().collect();
    let nodes = tree.node_count();
    let mut report = Vec::new();
    for (rel, b) in [
        (AllenRelation::Before, iv(500, 600)),
        (AllenRelation::After, iv(SPAN - 600, SPAN - 500)),
    ] {
        let got: Vec<(Interval, u32)> = tree.query(rel, &b).into_iter().map(|(k, p)| (k, *p)).collect();
        assert_eq!(got, scan(&entries, rel, &b));
        let visited = tree.visited_nodes(rel, &b);
        let share = visited as f64 / nodes as f64;
        assert!(share < 0.10, "{rel} visited {visited} of {nodes} nodes");
        report.push(format!("{rel} visited {visited}/{nodes} ({:.3}%)", share * 100.0));
    }
    report.join(", ")
}

// 6
fn fold(s: &str) -> String {
    s.to_lowercase()
}

/// Brute force: every contiguous run without punctuation, then containment
/// and function-word filters.
fn tagger_oracle(
    tokens: &[&str],
    entries: &HashMap<Vec<String>, Vec<String>>,
    function_words: &BTreeSet<String>,
) -> Vec<((usize, usize), Vec<String>)> {
    let n = tokens.len();
    let mut hits = Vec::new();
    for s in 0..n {
        for e in s + 1..=n {
            if tokens[s..e].iter().any(|t| !t.chars().any(char::is_alphanumeric)) {
                continue;
            }
            let key: Vec<String> = tokens[s..e].iter().map(|t| fold(t)).collect();
            if let Some(cuis) = entries.get(&key) {
                hits.push(((s, e), cuis.clone()));
            }
        }
    }
    let contained = |a: (usize, usize), b: (usize, usize)| b.0 <= a.0 && a.1 <= b.1 && (b.1 - b.0) > (a.1 - a.0);
    let mut kept: Vec<((usize, usize), Vec<String>)> = hits
        .iter()
        .filter(|(r, _)| !hits.iter().any(|(o, _)| contained(*r, *o)))
        .filter(|(r, _)| !(r.1 - r.0 == 1 && function_words.contains(&fold(tokens[r.0]))))
        .cloned()
        .collect();
    kept.sort();
    kept
}

fn token_refs<'a>(tokens: &[&'a str]) -> Vec<(Interval, &'a str)> {
    let mut pos = 0;
    tokens
        .iter()
        .map(|t| {
            let span = iv(pos, pos + t.chars().count());
            pos = span.end + 1;
            (span, *t)
        })
        .collect()
}

fn tagger() -> String {
    // worked examples
    let heart = ["congenital", "defect", "of", "the", "heart"];
    let mut lex = Lexicon::new();
    for (t, c) in [("congenital defect", "C0"), ("heart", "C1"), ("congenital", "C2")] {
        lex.add_term(t, c, None);
    }
    let got: Vec<_> = tag_sentence(&token_refs(&heart), &lex).into_iter().map(|m| (m.tokens, m.cuis)).collect();
    assert_eq!(got, vec![((0, 2), vec!["C0".to_string()]), ((4, 5), vec!["C1".to_string()])]);
    lex.add_term("defect of the heart", "C3", None);
    let got: Vec<_> = tag_sentence(&token_refs(&heart), &lex).into_iter().map(|m| (m.tokens, m.cuis)).collect();
    assert_eq!(got, vec![((0, 2), vec!["C0".to_string()]), ((1, 5), vec!["C3".to_string()])]);

    let vocab = ["heart", "Defect", "of", "the", "mass", "left", "lung", ",", "."];
    let mut rng = StdRng::seed_from_u64(6);
    let mut total = 0;
    for case in 0..100 {
        let mut lex = Lexicon::new();
        let mut entries: HashMap<Vec<String>, Vec<String>> = HashMap::new();
        for k in 0..rng.gen_range(1..12) {
            let len = rng.gen_range(1..4);
            let words: Vec<&str> = (0..len).map(|_| vocab[rng.gen_range(0..7)]).collect();
            let cui = format!("C{}", k % 5);
            lex.add_term(&words.join(" "), &cui, None);
            let list = entries.entry(words.iter().map(|w| fold(w)).collect()).or_default();
            if !list.contains(&cui) {
                list.push(cui);
            }
        }
        let mut function_words = BTreeSet::new();
        for w in ["of", "the"] {
            if rng.gen_bool(0.5) {
                lex.add_function_word(w);
                function_words.insert(w.to_string());
            }
        }
        let n = rng.gen_range(0..=12);
        let tokens: Vec<&str> = (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
        let got: Vec<_> = tag_sentence(&token_refs(&tokens), &lex)
            .into_iter()
            .map(|m| (m.tokens, m.cuis))
            .collect();
        let want = tagger_oracle(&tokens, &entries, &function_words);
        assert_eq!(got, want, "case {case}: {tokens:?}");
        total += got.len();
    }
    format!("worked examples exact; 100 random cases match brute force ({total} matches)")
}

// 7
fn persistence() -> String {
    let mut rng = StdRng::seed_from_u64(7);
    let mut store = Store::open_in_memory().unwrap();
    store.init_schema().unwrap();
    let text: String = (0..5000).map(|i| if i % 7 == 6 { ' ' } else { 'a' }).collect();
    let mut doc = store.create_document("big", &text).unwrap();
    let types = ["token", "sentence", "CUI", "section"];
    for n in 0..1000 {
        let mut a = NewAnnotation::new(types[n % 4], random_interval(&mut rng, 5000, 80))
            .with_value(format!("v{}", rng.gen_range(0..50)))
            .with_provenance("acceptance");
        if n % 3 == 0 {
            a = a.with_attr("score", rng.gen_range(0..100).to_string()).with_attr("note", "tab\there");
        }
        doc.add_annotation(a).unwrap();
    }
    let counts = store.marshal_document(&mut doc).unwrap();
    assert_eq!(counts.annotations, 1000);
    let back = store.unmarshal_document(doc.id()).unwrap();
    let before: Vec<&Annotation> = doc.annotations().iter().collect();
    let after: Vec<&Annotation> = back.annotations().iter().collect();
    assert_eq!(before, after);
    assert_eq!((back.name(), back.content()), (doc.name(), doc.content()));
    for _ in 0..20 {
        let b = random_interval(&mut rng, 5000, 300);
        for rel in AllenRelation::ALL {
            let x: Vec<_> = doc.annotations_satisfying(rel, b, None).into_iter().map(|a| a.id).collect();
            let y: Vec<_> = back.annotations_satisfying(rel, b, None).into_iter().map(|a| a.id).collect();
            assert_eq!(x, y, "{rel} against {b}");
        }
    }

    // count row writes with temporary triggers
    store
        .connection()
        .execute_batch(
            "CREATE TEMP TABLE row_writes (n INTEGER);
             CREATE TEMP TRIGGER count_updates AFTER UPDATE ON main.annotations BEGIN INSERT INTO row_writes VALUES (1); END;
             CREATE TEMP TRIGGER count_inserts AFTER INSERT ON main.annotations BEGIN INSERT INTO row_writes VALUES (1); END;
             CREATE TEMP TRIGGER count_deletes AFTER DELETE ON main.annotations BEGIN INSERT INTO row_writes VALUES (1); END;",
        )
        .unwrap();
    let row_writes = |s: &Store| -> usize {
        s.connection()
            .query_row("SELECT count(*) FROM row_writes", [], |r| r.get::<_, i64>(0))
            .unwrap() as usize
    };
    let mut back = back;
    let ids: Vec<_> = back.annotations().iter().map(|a| a.id).collect();
    let k = 37;
    let mut picked = BTreeSet::new();
    while picked.len() < k {
        picked.insert(ids[rng.gen_range(0..ids.len())]);
    }
    for (n, id) in picked.iter().enumerate() {
        if n % 2 == 0 {
            back.set_value(*id, "changed").unwrap();
        } else {
            back.set_attribute(*id, "flag", "1").unwrap();
        }
    }
    let written = store.checkpoint(&mut back).unwrap();
    assert_eq!(written, k);
    assert_eq!(row_writes(&store), k);
    assert_eq!(store.checkpoint(&mut back).unwrap(), 0);
    assert_eq!(row_writes(&store), k);
    format!("1000 annotations field-identical; checkpoint of {k} edits wrote {k} rows")
}

// 8
fn sections() -> String {
    let spans = |doc: &Document, ids: &[standoff::AnnotationId]| -> Vec<(String, usize, usize, usize)> {
        ids.iter()
            .map(|id| {
                let a = doc.annotation(*id).unwrap();
                let he: usize = a.attributes["heading_end"].parse().unwrap();
                (a.value.clone(), a.span.start, a.span.end, he)
            })
            .collect()
    };
    let owned = |v: &[(&str, usize, usize, usize)]| -> Vec<(String, usize, usize, usize)> {
        v.iter().map(|(n, s, e, h)| (n.to_string(), *s, *e, *h)).collect()
    };

    // flat
    let g = Guideline::parse(
        r#"<guideline name="flat">
             <section name="history"><pattern regex="^HISTORY:"/></section>
             <section name="exam"><pattern regex="^EXAM:"/></section>
             <section name="plan"><pattern regex="^PLAN:"/></section>
           </guideline>"#,
    )
    .unwrap();
    let text = "HISTORY: cough for two weeks.\nEXAM: lungs clear.\nPLAN: chest film.\n";
    assert_eq!(text.len(), 67);
    let mut doc = Document::new(DocId(1), "flat", text);
    let ids = detect_sections(&mut doc, &g);
    assert_eq!(
        spans(&doc, &ids),
        owned(&[("history", 0, 30, 8), ("exam", 30, 49, 35), ("plan", 49, 67, 54)])
    );

    // nested
    let g = Guideline::parse(
        r#"<guideline name="nested">
             <section name="results"><pattern regex="^RESULTS:"/>
               <section name="labs"><pattern regex="^Labs:"/></section>
               <section name="imaging"><pattern regex="^Imaging:"/></section>
             </section>
             <section name="plan"><pattern regex="^PLAN:"/></section>
           </guideline>"#,
    )
    .unwrap();
    let text = "RESULTS:\nLabs: WBC 7.\nImaging: clear.\nPLAN: home.\n";
    assert_eq!(text.len(), 50);
    let mut doc = Document::new(DocId(2), "nested", text);
    let ids = detect_sections(&mut doc, &g);
    assert_eq!(
        spans(&doc, &ids),
        owned(&[("results", 0, 38, 8), ("labs", 9, 22, 14), ("imaging", 22, 38, 30), ("plan", 38, 50, 43)])
    );
    let mut nested_checks = 0;
    for a in doc.annotations().iter().filter(|a| a.type_name == SECTION) {
        if let Some(p) = a.attributes.get("parent") {
            let parent = doc.annotation(standoff::AnnotationId(p.parse().unwrap())).unwrap();
            let rels = a.span.relate(&parent.span);
            assert!(
                [AllenRelation::During, AllenRelation::Starts, AllenRelation::Finishes]
                    .iter()
                    .any(|r| rels.contains(*r)),
                "{} vs parent {}",
                a.span,
                parent.span
            );
            nested_checks += 1;
        }
    }
    assert_eq!(nested_checks, 2);
    let labs = doc.annotation(ids[1]).unwrap();
    assert!(labs.span.relate(&doc.annotation(ids[0]).unwrap().span).contains(AllenRelation::During));

    // template-bearing
    let g = Guideline::parse(
        r#"<guideline name="cbc">
             <section name="cbc"><pattern regex="^CBC:"/></section>
             <template name="differential">
               <pattern regex="Differential:\s*(?&lt;polys&gt;\d+)\s*% polys,\s*(?&lt;bands&gt;\d+)\s*% bands,\s*(?&lt;lymphs&gt;\d+)\s*% lymphs"/>
             </template>
           </guideline>"#,
    )
    .unwrap();
    let text = "CBC: normal.\nDifferential: 70 % polys, 5 % bands, 20 % lymphs\nDifferential: 55 % polys, 10 % bands, 30 % lymphs\n";
    assert_eq!(text.len(), 112);
    let mut doc = Document::new(DocId(3), "cbc", text);
    let ids = detect_sections(&mut doc, &g);
    assert_eq!(spans(&doc, &ids), owned(&[("cbc", 0, 112, 4)]));
    let templates = match_templates(&mut doc, &g);
    let got: Vec<(usize, usize, Vec<(String, String)>)> = templates
        .iter()
        .map(|id| {
            let a = doc.annotation(*id).unwrap();
            assert_eq!(a.value, "differential");
            let attrs = ["polys", "bands", "lymphs"]
                .iter()
                .map(|k| (k.to_string(), a.attributes.get(*k).cloned().unwrap_or_default()))
                .collect();
            (a.span.start, a.span.end, attrs)
        })
        .collect();
    let pairs = |p: &str, b: &str, l: &str| {
        vec![
            ("polys".to_string(), p.to_string()),
            ("bands".to_string(), b.to_string()),
            ("lymphs".to_string(), l.to_string()),
        ]
    };
    assert_eq!(got, vec![(13, 61, pairs("70", "5", "20")), (62, 111, pairs("55", "10", "30"))]);
    "flat, nested and template notes match hand-computed offsets".into()
}

// 9
type Form = (Vec<String>, Vec<(usize, usize, String)>);

/// Brute-force canonical form: least relabelling over all permutations.
fn form(labels: &[String], edges: &[(usize, usize, String)]) -> Form {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }
    perms(labels.len())
        .into_iter()
        .map(|p| {
            let mut l = vec![String::new(); labels.len()];
            for (i, x) in labels.iter().enumerate() {
                l[p[i]] = x.clone();
            }
            let mut e: Vec<_> = edges.iter().map(|(s, d, x)| (p[*s], p[*d], x.clone())).collect();
            e.sort();
            (l, e)
        })
        .min()
        .unwrap()
}

fn connected(n: usize, edges: &[(usize, usize, String)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for (s, d, _) in edges {
            for (a, b) in [(*s, *d), (*d, *s)] {
                if a == x && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Every connected non-induced subgraph of `g` with at most `max_nodes` nodes.
fn all_forms(g: &LabeledGraph, max_nodes: usize) -> BTreeSet<Form> {
    let n = g.node_count();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let nodes: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if nodes.len() > max_nodes {
            continue;
        }
        let local = |x: usize| nodes.iter().position(|&y| y == x).unwrap();
        let labels: Vec<String> = nodes.iter().map(|&i| g.label(i).to_string()).collect();
        if nodes.len() == 1 {
            out.insert(form(&labels, &[]));
            continue;
        }
        let inner: Vec<(usize, usize, String)> = g
            .edges()
            .iter()
            .filter(|e| mask & (1 << e.src) != 0 && mask & (1 << e.dst) != 0)
            .map(|e| (local(e.src), local(e.dst), e.label.clone()))
            .collect();
        for sub in 1u32..(1 << inner.len()) {
            let chosen: Vec<_> = (0..inner.len()).filter(|i| sub & (1 << i) != 0).map(|i| inner[i].clone()).collect();
            if connected(nodes.len(), &chosen) {
                out.insert(form(&labels, &chosen));
            }
        }
    }
    out
}

fn random_graph(rng: &mut StdRng, id: i64) -> LabeledGraph {
    let mut g = LabeledGraph::new(format!("g{id}"), "test", true);
    g.id = id;
    let n = rng.gen_range(1..=6);
    for _ in 0..n {
        g.add_node(["A", "B", "C"][rng.gen_range(0..3)]);
    }
    if n > 1 {
        for _ in 0..rng.gen_range(0..=8) {
            let s = rng.gen_range(0..n);
            let d = rng.gen_range(0..n);
            if s != d {
                g.add_edge(s, d, ["x", "y"][rng.gen_range(0..2)]).unwrap();
            }
        }
    }
    g
}

fn mining() -> String {
    let mut rng = StdRng::seed_from_u64(9);
    let graphs: Vec<LabeledGraph> = (0..20).map(|i| random_graph(&mut rng, i + 1)).collect();
    let mut summary = Vec::new();
    for max_nodes in 1..=3 {
        let per_graph: Vec<BTreeSet<Form>> = graphs.iter().map(|g| all_forms(g, max_nodes)).collect();
        let mut support: BTreeMap<Form, usize> = BTreeMap::new();
        for forms in &per_graph {
            for f in forms {
                *support.entry(f.clone()).or_default() += 1;
            }
        }
        for min_support in 1..=2 {
            let mined = mine_frequent_subgraphs(&graphs, min_support, max_nodes);
            let got: BTreeMap<Form, usize> = mined
                .iter()
                .map(|p| {
                    let edges: Vec<_> = p.pattern.edges().iter().map(|e| (e.src, e.dst, e.label.clone())).collect();
                    (form(p.pattern.labels(), &edges), p.support)
                })
                .collect();
            assert_eq!(got.len(), mined.len(), "isomorphic duplicates mined");
            let want: BTreeMap<Form, usize> =
                support.iter().filter(|(_, s)| **s >= min_support).map(|(f, s)| (f.clone(), *s)).collect();
            assert_eq!(got, want, "min_support {min_support}, max_nodes {max_nodes}");

            for p in &mined {
                for q in &mined {
                    if p.pattern.node_count() <= q.pattern.node_count()
                        && !find_subgraph_occurrences(&q.pattern, &p.pattern).is_empty()
                    {
                        assert!(p.support >= q.support, "anti-monotonicity broken");
                        let pg: BTreeSet<i64> = p.graph_ids.iter().copied().collect();
                        assert!(q.graph_ids.iter().all(|g| pg.contains(g)));
                    }
                }
            }
            summary.push(format!("({min_support},{max_nodes}):{}", mined.len()));
        }
    }
    format!("pattern counts (min_support,max_nodes) {}", summary.join(" "))
}

// 10
fn segments() -> String {
    let mut rng = StdRng::seed_from_u64(10);
    let mut errors = [0usize; 3];
    let mut valid = 0;
    for case in 0..500 {
        let mut doc = Document::new(DocId(1), "s", "w".repeat(300));
        let s0 = rng.gen_range(0..100);
        let s1 = s0 + rng.gen_range(2..150);
        let sentence = doc.add_annotation(NewAnnotation::new("sentence", iv(s0, s1))).unwrap();
        let mut pts: Vec<usize> = (0..4).map(|_| rng.gen_range(s0..=s1)).collect();
        pts.sort();
        let (a, b) = (iv(pts[0], pts[1]), iv(pts[2], pts[3]));
        let kind = case % 5;
        let (c1, c2) = match kind {
            0 | 1 => (a, b),
            // reversed order
            2 => (b, a),
            // overlapping
            3 => {
                let x = rng.gen_range(s0..s1 - 1);
                let y = rng.gen_range(x + 1..s1);
                (iv(x, y), iv(rng.gen_range(x..y), s1))
            }
            // reaching past the sentence
            _ => (a, iv(pts[2], s1 + rng.gen_range(1..20))),
        };
        let c1 = doc.add_annotation(NewAnnotation::new("CUI", c1)).unwrap();
        let c2 = doc.add_annotation(NewAnnotation::new("CUI", c2)).unwrap();
        let (c1, c2, sentence) =
            (doc.annotation(c1).unwrap(), doc.annotation(c2).unwrap(), doc.annotation(sentence).unwrap());
        let result = doc.segment_context(c1, c2, sentence);
        let ordered_ok = c1.span.end <= c2.span.start;
        let inside = sentence.span.covers(&c1.span) && sentence.span.covers(&c2.span);
        match result {
            Ok(Segments {
                preceding,
                concept1,
                between,
                concept2,
                succeeding,
            }) => {
                assert!(inside && ordered_ok, "case {case} accepted {} {}", c1.span, c2.span);
                let parts = [preceding, concept1, between, concept2, succeeding];
                assert_eq!(parts[0].start, sentence.span.start);
                assert_eq!(parts[4].end, sentence.span.end);
                for w in parts.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
                assert_eq!(parts.iter().map(Interval::len).sum::<usize>(), sentence.span.len());
                assert_eq!((concept1, concept2), (c1.span, c2.span));
                valid += 1;
            }
            Err(DocError::OutOfBounds { .. }) => {
                assert!(!inside);
                errors[0] += 1;
            }
            Err(DocError::Order(..)) => {
                assert!(inside && c2.span.end <= c1.span.start && !ordered_ok);
                errors[1] += 1;
            }
            Err(DocError::Overlap(..)) => {
                assert!(inside && !ordered_ok && c2.span.end > c1.span.start);
                errors[2] += 1;
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }
    assert!(errors.iter().all(|&n| n > 0), "{errors:?}");
    format!(
        "{valid} partitions exact; errors: {} bounds, {} order, {} overlap",
        errors[0], errors[1], errors[2]
    )
}

type Check = fn() -> String;

fn main() {
    let criteria: [(&str, Check, Option<Duration>); 10] = [
        ("Inline conversion worked example", phi_sentence, Some(Duration::from_secs(1))),
        ("Allen-relation oracle equivalence", allen_oracle, Some(Duration::from_secs(30))),
        ("Null-interval degeneracy", null_interval, None),
        ("Tree structural audit", tree_audit, Some(Duration::from_secs(10))),
        ("Pruning effectiveness", pruning, Some(Duration::from_secs(10))),
        ("Greedy tagger oracle", tagger, None),
        ("Persistence round trip", persistence, None),
        ("Section detection", sections, None),
        ("Subgraph mining oracle", mining, Some(Duration::from_secs(60))),
        ("Segment partition", segments, None),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check, limit)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let elapsed = started.elapsed();
        let verdict = match (outcome, limit) {
            (Ok(detail), Some(l)) if elapsed >= *l => Err(format!("took {elapsed:.2?}, limit {l:?} ({detail})")),
            (Ok(detail), _) => Ok(detail),
            (Err(payload), _) => Err(payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())
                .replace('\n', " ")),
        };
        match verdict {
            Ok(detail) => println!("PASS  {:>2}. {name} [{elapsed:.2?}]: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}. {name} [{elapsed:.2?}]: {why}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
