//! The `run` command: fixed-order stages over stored documents, with a
//! checkpoint and a stage marker after each stage.

use std::collections::BTreeSet;
use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use clap::ValueEnum;
use standoff::concepts::{self, Lexicon, CUI};
use standoff::doc::{SentenceSplitter, SENTENCE, TOKEN};
use standoff::graph::{build_dependency_graph, DEPENDENCY};
use standoff::sections::{self, Guideline, SECTION};
use standoff::{DocId, Document, Store, StoreError};

use crate::config::Config;
use crate::failure::{Failure, STORE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum Stage {
    Sections,
    Sentences,
    Tokenize,
    Concepts,
    Graphs,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Sections => "sections",
            Stage::Sentences => "sentences",
            Stage::Tokenize => "tokenize",
            Stage::Concepts => "concepts",
            Stage::Graphs => "graphs",
        }
    }

    /// Document metadata key set to `done` once the stage is checkpointed.
    pub fn marker(self) -> String {
        format!("stage.{}", self.name())
    }

    /// Annotation type the stage produces, when it produces annotations.
    fn output_type(self) -> Option<&'static str> {
        match self {
            Stage::Sections => Some(SECTION),
            Stage::Sentences => Some(SENTENCE),
            Stage::Tokenize => Some(TOKEN),
            Stage::Concepts => Some(CUI),
            Stage::Graphs => None,
        }
    }

    fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Concepts => &[Stage::Tokenize, Stage::Sentences],
            Stage::Graphs => &[Stage::Concepts],
            _ => &[],
        }
    }
}

/// Shared read-only inputs of the stages.
pub struct Resources {
    pub guideline: Option<Guideline>,
    pub lexicon: Option<Lexicon>,
    pub splitter: SentenceSplitter,
}

impl Resources {
    /// Loads what `stages` need from the config.
    pub fn load(config: &Config, stages: &[Stage]) -> Result<Self, Failure> {
        let guideline = if stages.contains(&Stage::Sections) {
            let path = config
                .guideline
                .as_ref()
                .ok_or_else(|| Failure::prerequisite("stage sections needs `guideline` in the config"))?;
            let xml = fs::read_to_string(path)
                .map_err(|e| Failure::prerequisite(format!("cannot read guideline {}: {e}", path.display())))?;
            Some(Guideline::parse(&xml)?)
        } else {
            None
        };
        let lexicon = if stages.contains(&Stage::Concepts) {
            let paths = config
                .lexicon_paths()
                .ok_or_else(|| Failure::prerequisite("stage concepts needs `lexicon.terms` in the config"))?;
            let mut lexicon =
                Lexicon::load(&paths).map_err(|e| Failure::prerequisite(format!("lexicon: {e}")))?;
            lexicon.max_phrase_tokens = config.max_phrase_tokens;
            Some(lexicon)
        } else {
            None
        };
        let splitter = match &config.abbreviations {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::prerequisite(format!("cannot read abbreviations {}: {e}", path.display())))?;
                SentenceSplitter::from_list(&text)
            }
            None => SentenceSplitter::default(),
        };
        Ok(Self {
            guideline,
            lexicon,
            splitter,
        })
    }
}

/// Sorts and deduplicates requested stages into pipeline order.
pub fn ordered(stages: &[Stage]) -> Vec<Stage> {
    let set: BTreeSet<Stage> = stages.iter().copied().collect();
    set.into_iter().collect()
}

/// Missing prerequisites of `stages` for one document, as messages.
pub fn prerequisite_gaps(store: &Store, id: DocId, name: &str, stages: &[Stage]) -> Result<Vec<String>, StoreError> {
    let meta = store.document_metadata(id)?;
    let satisfied = |s: Stage| -> Result<bool, StoreError> {
        if stages.contains(&s) || meta.get(&s.marker()).is_some_and(|v| v == "done") {
            return Ok(true);
        }
        // annotations imported from elsewhere count as well
        match s.output_type() {
            Some(t) => Ok(store.count_annotations(id, t)? > 0),
            None => Ok(false),
        }
    };
    let mut gaps = Vec::new();
    for &stage in stages {
        for &req in stage.requires() {
            if !satisfied(req)? {
                gaps.push(format!(
                    "{name}: stage {} needs {} (run it first or add it to --stages)",
                    stage.name(),
                    req.name()
                ));
            }
        }
        if stage == Stage::Graphs && store.count_annotations(id, DEPENDENCY)? == 0 {
            gaps.push(format!("{name}: stage graphs needs imported `{DEPENDENCY}` annotations"));
        }
    }
    Ok(gaps)
}

fn run_stage(store: &mut Store, doc: &mut Document, stage: Stage, res: &Resources) -> Result<String, String> {
    let doc_err = |e: standoff::DocError| e.to_string();
    match stage {
        Stage::Sections => {
            let g = res.guideline.as_ref().expect("loaded for sections");
            let sections = sections::detect_sections(doc, g).len();
            let templates = sections::match_templates(doc, g).len();
            Ok(format!("{sections} sections, {templates} templates"))
        }
        Stage::Sentences => {
            let new = doc.split_sentences(&res.splitter);
            let n = new.len();
            for a in new {
                doc.add_annotation(a).map_err(doc_err)?;
            }
            Ok(format!("{n} sentences"))
        }
        Stage::Tokenize => {
            let new = doc.tokenize();
            let n = new.len();
            for a in new {
                doc.add_annotation(a).map_err(doc_err)?;
            }
            Ok(format!("{n} tokens"))
        }
        Stage::Concepts => {
            let lex = res.lexicon.as_ref().expect("loaded for concepts");
            let sentences: Vec<_> = doc.annotations().ids_of_type(SENTENCE).collect();
            let mut cuis = 0;
            for s in sentences {
                cuis += concepts::annotate_concepts(doc, s, lex).len();
            }
            let tuis = concepts::annotate_tuis(doc, lex).len();
            let pos = concepts::annotate_sp_pos(doc, lex).len();
            Ok(format!("{cuis} concepts, {tuis} semantic types, {pos} POS tags"))
        }
        Stage::Graphs => {
            let mut stored = 0;
            let sentences: Vec<_> = doc.annotations().iter().filter(|a| a.type_name == SENTENCE).collect();
            for s in sentences {
                let deps = doc.annotations_within(s.span, DEPENDENCY);
                let cuis = doc.annotations_within(s.span, CUI);
                let mut built = build_dependency_graph(doc, s, &deps, &cuis);
                if built.graph.edges().is_empty() {
                    continue;
                }
                store.persist_graph(&mut built.graph).map_err(|e| e.to_string())?;
                stored += 1;
            }
            Ok(format!("{stored} graphs"))
        }
    }
}

/// Runs `stages` (already ordered) on one stored document. Returns one
/// report line per stage.
pub fn process_document(store: &mut Store, id: DocId, stages: &[Stage], res: &Resources) -> Result<Vec<String>, String> {
    let mut doc = store.unmarshal_document(id).map_err(|e| e.to_string())?;
    let mut lines = Vec::with_capacity(stages.len());
    for &stage in stages {
        let marker = stage.marker();
        if doc.metadata.get(&marker).is_some_and(|v| v == "done") {
            lines.push(format!("{}\t{}\tskipped (already done)", doc.name(), stage.name()));
            continue;
        }
        let summary = run_stage(store, &mut doc, stage, res).map_err(|e| format!("stage {}: {e}", stage.name()))?;
        let written = store
            .checkpoint_with_metadata(&mut doc, &[(&marker, "done")])
            .map_err(|e| format!("stage {}: {e}", stage.name()))?;
        lines.push(format!(
            "{}\t{}\t{summary}, {written} annotations written",
            doc.name(),
            stage.name()
        ));
    }
    Ok(lines)
}

pub type DocOutcome = Result<Vec<String>, String>;

/// Processes `docs` with up to `jobs` workers, each on its own store
/// connection. Outcomes come back in input order.
pub fn run_pool(
    config: &Config,
    store: &mut Store,
    docs: &[DocId],
    stages: &[Stage],
    res: &Resources,
) -> Result<Vec<DocOutcome>, Failure> {
    // an in-memory store cannot be shared between connections
    let jobs = if config.is_in_memory() { 1 } else { config.jobs.min(docs.len()).max(1) };
    if jobs == 1 {
        return Ok(docs.iter().map(|&id| process_document(store, id, stages, res)).collect());
    }
    let next = AtomicUsize::new(0);
    let mut outcomes: Vec<Option<DocOutcome>> = (0..docs.len()).map(|_| None).collect();
    let mut connect_error = None;
    thread::scope(|scope| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                scope.spawn(|| -> Result<Vec<(usize, DocOutcome)>, StoreError> {
                    let mut store = Store::connect(&config.store)?;
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(&id) = docs.get(i) else { break };
                        done.push((i, process_document(&mut store, id, stages, res)));
                    }
                    Ok(done)
                })
            })
            .collect();
        for w in workers {
            match w.join().expect("pipeline worker panicked") {
                Ok(done) => {
                    for (i, outcome) in done {
                        outcomes[i] = Some(outcome);
                    }
                }
                Err(e) => connect_error = Some(e),
            }
        }
    });
    if let Some(e) = connect_error {
        if outcomes.iter().any(Option::is_none) {
            return Err(Failure::new(STORE, format!("store error: {e}")));
        }
    }
    Ok(outcomes.into_iter().map(|o| o.expect("every document claimed")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use standoff::NewAnnotation;

    #[test]
    fn stages_sort_into_pipeline_order() {
        let got = ordered(&[Stage::Concepts, Stage::Tokenize, Stage::Sections, Stage::Tokenize]);
        assert_eq!(got, [Stage::Sections, Stage::Tokenize, Stage::Concepts]);
        let all: Vec<Stage> = Stage::value_variants().iter().rev().copied().collect();
        assert_eq!(ordered(&all), Stage::value_variants());
    }

    #[test]
    fn gaps_name_the_missing_stage() {
        let mut store = Store::open_in_memory().unwrap();
        store.init_schema().unwrap();
        let mut doc = store.create_document("n1", "Cells express CD30.").unwrap();
        store.checkpoint(&mut doc).unwrap();
        let gaps = prerequisite_gaps(&store, doc.id(), "n1", &[Stage::Concepts]).unwrap();
        assert_eq!(gaps.len(), 2);
        assert!(gaps[0].contains("needs tokenize"), "{gaps:?}");
        assert!(prerequisite_gaps(&store, doc.id(), "n1", &[Stage::Tokenize, Stage::Sentences, Stage::Concepts])
            .unwrap()
            .is_empty());

        // imported tokens satisfy the tokenize requirement
        for a in doc.tokenize() {
            doc.add_annotation(a).unwrap();
        }
        doc.add_annotation(NewAnnotation::new(SENTENCE, doc.full_span())).unwrap();
        store.checkpoint(&mut doc).unwrap();
        assert!(prerequisite_gaps(&store, doc.id(), "n1", &[Stage::Concepts]).unwrap().is_empty());
        let gaps = prerequisite_gaps(&store, doc.id(), "n1", &[Stage::Graphs]).unwrap();
        assert_eq!(gaps.len(), 2, "{gaps:?}");
    }

    #[test]
    fn completed_stages_are_skipped() {
        let mut store = Store::open_in_memory().unwrap();
        store.init_schema().unwrap();
        let mut doc = store.create_document("n1", "One. Two words.").unwrap();
        let id = doc.id();
        store.checkpoint(&mut doc).unwrap();
        let res = Resources {
            guideline: None,
            lexicon: None,
            splitter: SentenceSplitter::default(),
        };
        let stages = [Stage::Sentences, Stage::Tokenize];
        let first = process_document(&mut store, id, &stages, &res).unwrap();
        assert!(first[1].ends_with("5 tokens, 5 annotations written"), "{first:?}");
        let again = process_document(&mut store, id, &stages, &res).unwrap();
        assert!(again.iter().all(|l| l.ends_with("skipped (already done)")));
        assert_eq!(store.count_annotations(id, TOKEN).unwrap(), 5);
    }
}
