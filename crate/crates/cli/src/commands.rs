//! Command implementations. Each returns the exit code on success.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use standoff::doc::{parse_annotation_lines, ExternalAnnotation};
use standoff::graph::{mine_frequent_subgraphs, parse_graphs, write_graphs, LabeledGraph};
use standoff::inline::{self, format_table, render_offsets, Converted, RecordOptions};
use standoff::store::{schema, InstanceKind};
use standoff::{AllenRelation, AnnotationId, Attributes, DocId, Document, Store, StoreError};

use crate::config::Config;
use crate::failure::{CmdResult, Failure, PARTIAL, SUCCESS, UNKNOWN_RELATION};
use crate::pipeline::{self, Resources, Stage};

fn open(config: &Config) -> Result<Store, Failure> {
    Ok(Store::connect(&config.store)?)
}

fn exit_for(failures: usize) -> u8 {
    if failures == 0 {
        SUCCESS
    } else {
        PARTIAL
    }
}

/// Tabs and newlines in printed fields are shown escaped.
fn field(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n").replace('\r', "\\r")
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::prerequisite(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn doc_by_name(store: &Store, name: &str) -> Result<Document, Failure> {
    match store.unmarshal_by_name(name) {
        Err(StoreError::NotFound(what)) => Err(Failure::prerequisite(format!("{what} is not in the store"))),
        other => Ok(other?),
    }
}

fn corpus_or_create(store: &mut Store, name: &str) -> Result<i64, StoreError> {
    match store.corpus_id(name)? {
        Some(id) => Ok(id),
        None => store.create_corpus(name, "", &Attributes::new()),
    }
}

fn existing_corpus(store: &Store, name: &str) -> Result<i64, Failure> {
    store
        .corpus_id(name)?
        .ok_or_else(|| Failure::prerequisite(format!("corpus {name:?} is not in the store")))
}

pub fn init(config: &Config) -> CmdResult {
    let mut store = open(config)?;
    let created = store.init_schema()?;
    println!("{} tables created", created.len());
    Ok(SUCCESS)
}

pub fn schema() -> CmdResult {
    print!("{}", schema::ddl());
    Ok(SUCCESS)
}

enum Imported {
    Created(DocId),
    Unchanged(DocId),
}

/// Stores a text file as a document named after its file stem. A stored
/// document with that name and the same content is left alone.
fn import_text(store: &mut Store, path: &Path) -> Result<(String, Imported), String> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| format!("{}: no file name", path.display()))?;
    let content = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    import_content(store, &name, &content, &path.display().to_string()).map(|i| (name, i))
}

fn import_content(store: &mut Store, name: &str, content: &str, source: &str) -> Result<Imported, String> {
    if let Some(id) = store.document_id(name).map_err(|e| e.to_string())? {
        let stored = store.unmarshal_document(id).map_err(|e| e.to_string())?;
        return if stored.content() == content {
            Ok(Imported::Unchanged(id))
        } else {
            Err(format!("document {name:?} already exists with different content"))
        };
    }
    let mut doc = store.create_document(name, content).map_err(|e| e.to_string())?;
    store
        .checkpoint_with_metadata(&mut doc, &[("source", source)])
        .map_err(|e| e.to_string())?;
    Ok(Imported::Created(doc.id()))
}

/// Adds external annotation records to their stored documents. Each
/// document takes all of its records or none.
fn import_records(store: &mut Store, records: Vec<ExternalAnnotation>) -> usize {
    let mut by_doc: BTreeMap<String, Vec<ExternalAnnotation>> = BTreeMap::new();
    for r in records {
        by_doc.entry(r.doc_name.clone()).or_default().push(r);
    }
    let mut failures = 0;
    for (name, records) in by_doc {
        let outcome = store
            .unmarshal_by_name(&name)
            .map_err(|e| e.to_string())
            .and_then(|mut doc| {
                let n = doc.import_records(records).map_err(|e| e.to_string())?;
                store.checkpoint(&mut doc).map_err(|e| e.to_string())?;
                Ok(n)
            });
        match outcome {
            Ok(n) => println!("{name}\t{n} annotations imported"),
            Err(e) => {
                eprintln!("{name}: {e}");
                failures += 1;
            }
        }
    }
    failures
}

pub fn import(config: &Config, corpus: Option<&str>, files: &[PathBuf], annotation_files: &[PathBuf]) -> CmdResult {
    if files.is_empty() && annotation_files.is_empty() {
        return Err(Failure::usage("nothing to import: give text files and/or --annotations"));
    }
    let mut store = open(config)?;
    let corpus_id = corpus.map(|c| corpus_or_create(&mut store, c)).transpose()?;
    let mut failures = 0;
    for path in files {
        match import_text(&mut store, path) {
            Ok((name, imported)) => {
                let (id, what) = match imported {
                    Imported::Created(id) => (id, "created"),
                    Imported::Unchanged(id) => (id, "unchanged"),
                };
                if let Some(c) = corpus_id {
                    store.add_to_corpus(c, id)?;
                }
                println!("{name}\t{id}\t{what}");
            }
            Err(e) => {
                eprintln!("{e}");
                failures += 1;
            }
        }
    }
    for path in annotation_files {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failures += 1;
                continue;
            }
        };
        match parse_annotation_lines(&text) {
            Ok(records) => failures += import_records(&mut store, records),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failures += 1;
            }
        }
    }
    Ok(exit_for(failures))
}

/// Resolves `run` targets to stored documents, importing text files that
/// are not stored yet. Unresolvable targets are reported and counted.
fn resolve_targets(store: &mut Store, corpus: Option<&str>, targets: &[String]) -> Result<(Vec<(DocId, String)>, usize), Failure> {
    if let Some(c) = corpus {
        let id = existing_corpus(store, c)?;
        let mut docs = Vec::new();
        for doc in store.corpus_documents(id)? {
            let name = store.unmarshal_document(doc)?.name().to_string();
            docs.push((doc, name));
        }
        return Ok((docs, 0));
    }
    if targets.is_empty() {
        let docs = store.documents()?.into_iter().map(|d| (d.id, d.name)).collect();
        return Ok((docs, 0));
    }
    let mut docs = Vec::new();
    let mut failures = 0;
    for t in targets {
        if let Some(id) = store.document_id(t)? {
            docs.push((id, t.clone()));
            continue;
        }
        let path = Path::new(t);
        if !path.is_file() {
            eprintln!("{t}: no such stored document or file");
            failures += 1;
            continue;
        }
        match import_text(store, path) {
            Ok((name, Imported::Created(id) | Imported::Unchanged(id))) => docs.push((id, name)),
            Err(e) => {
                eprintln!("{e}");
                failures += 1;
            }
        }
    }
    docs.dedup_by_key(|(id, _)| *id);
    Ok((docs, failures))
}

pub fn run(config: &Config, stages: &[Stage], corpus: Option<&str>, targets: &[String]) -> CmdResult {
    let stages = pipeline::ordered(stages);
    let mut store = open(config)?;
    let (docs, mut failures) = resolve_targets(&mut store, corpus, targets)?;

    let mut gaps = Vec::new();
    for (id, name) in &docs {
        gaps.extend(pipeline::prerequisite_gaps(&store, *id, name, &stages)?);
    }
    if !gaps.is_empty() {
        return Err(Failure::prerequisite(format!("missing prerequisites:\n  {}", gaps.join("\n  "))));
    }
    let resources = Resources::load(config, &stages)?;

    let ids: Vec<DocId> = docs.iter().map(|(id, _)| *id).collect();
    let outcomes = pipeline::run_pool(config, &mut store, &ids, &stages, &resources)?;
    for ((_, name), outcome) in docs.iter().zip(outcomes) {
        match outcome {
            Ok(lines) => lines.iter().for_each(|l| println!("{l}")),
            Err(e) => {
                eprintln!("{name}: {e}");
                failures += 1;
            }
        }
    }
    Ok(exit_for(failures))
}

pub fn query(config: &Config, doc: &str, rel: &str, start: usize, end: usize, type_name: Option<&str>) -> CmdResult {
    let rel: AllenRelation = rel.parse().map_err(|e| Failure::new(UNKNOWN_RELATION, format!("{e}")))?;
    let span = config
        .convention
        .from_display(start, end)
        .map_err(|e| Failure::usage(format!("{e} (offsets read as {})", config.convention)))?;
    let store = open(config)?;
    let doc = doc_by_name(&store, doc)?;
    let mut out = io::stdout().lock();
    for a in doc.annotations_satisfying(rel, span, type_name) {
        let (s, e) = config.convention.to_display(a.span);
        writeln!(out, "{s}\t{e}\t{}\t{}", field(&a.type_name), field(&a.value)).map_err(broken_pipe)?;
    }
    Ok(SUCCESS)
}

fn broken_pipe(e: io::Error) -> Failure {
    Failure::usage(format!("cannot write output: {e}"))
}

pub fn segments(config: &Config, doc: &str, sentence: i64, c1: i64, c2: i64) -> CmdResult {
    let store = open(config)?;
    let doc = doc_by_name(&store, doc)?;
    let get = |id: i64| {
        doc.annotation(AnnotationId(id))
            .ok_or_else(|| Failure::usage(format!("annotation {id} is not in document {}", doc.name())))
    };
    let segs = doc
        .segment_context(get(c1)?, get(c2)?, get(sentence)?)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let names = ["preceding", "concept1", "between", "concept2", "succeeding"];
    for (name, span) in names.iter().zip(segs.as_array()) {
        let (s, e) = config.convention.to_display(span);
        println!("{name}\t{s}\t{e}\t{}", field(doc.text(span)));
    }
    Ok(SUCCESS)
}

pub struct ConvertOptions {
    pub input: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub records: Option<RecordOptions>,
    pub import: bool,
    pub corpus: Option<String>,
}

/// The converted text as a scratch document, for the export format.
fn converted_document(name: &str, converted: &Converted) -> Result<Document, Failure> {
    let mut doc = Document::new(DocId(0), name, converted.text.clone());
    for a in &converted.annotations {
        doc.add_annotation(a.clone()).map_err(|e| Failure::usage(e.to_string()))?;
    }
    Ok(doc)
}

pub fn convert(config: &Config, opts: &ConvertOptions) -> CmdResult {
    let raw = read_input(&opts.input)?;
    let stem = opts
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "converted".into());
    let units: Vec<(String, Converted)> = match &opts.records {
        None => vec![(stem, inline::convert(&raw)?)],
        Some(ro) => inline::split_records(&raw, ro)?
            .into_iter()
            .map(|r| Ok((format!("{stem}-{}", r.id), r.convert()?)))
            .collect::<Result<_, Failure>>()?,
    };
    let out_dir = match &opts.out_dir {
        Some(d) => d.clone(),
        None => opts.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !out_dir.as_os_str().is_empty() {
        fs::create_dir_all(&out_dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", out_dir.display())))?;
    }
    let mut store = if opts.import { Some(open(config)?) } else { None };
    let corpus_id = match (&mut store, &opts.corpus) {
        (Some(s), Some(c)) => Some(corpus_or_create(s, c)?),
        _ => None,
    };
    let mut failures = 0;
    for (name, converted) in &units {
        let doc = converted_document(name, converted)?;
        let txt = out_dir.join(format!("{name}.txt"));
        let ann = out_dir.join(format!("{name}.ann"));
        write_output(&txt, &converted.text)?;
        write_output(&ann, &doc.export_annotations())?;
        if opts.records.is_some() {
            println!("# {name}");
        }
        print!("{}", format_table(&render_offsets(&converted.annotations, config.convention)));
        if let Some(store) = &mut store {
            match import_converted(store, name, &txt, converted) {
                Ok(id) => {
                    if let Some(c) = corpus_id {
                        store.add_to_corpus(c, id)?;
                    }
                }
                Err(e) => {
                    eprintln!("{name}: {e}");
                    failures += 1;
                }
            }
        }
    }
    Ok(exit_for(failures))
}

/// Stores a converted document with its annotations. Re-importing an
/// identical conversion changes nothing.
fn import_converted(store: &mut Store, name: &str, txt: &Path, converted: &Converted) -> Result<DocId, String> {
    match import_content(store, name, &converted.text, &txt.display().to_string())? {
        Imported::Unchanged(id) => Ok(id),
        Imported::Created(id) => {
            let mut doc = store.unmarshal_document(id).map_err(|e| e.to_string())?;
            for a in &converted.annotations {
                doc.add_annotation(a.clone()).map_err(|e| e.to_string())?;
            }
            store.checkpoint(&mut doc).map_err(|e| e.to_string())?;
            Ok(id)
        }
    }
}

pub fn graph_mine(config: &Config, file: Option<&Path>, graph_type: &str, out: Option<&Path>) -> CmdResult {
    let (graphs, mut store) = match file {
        Some(path) => {
            let text = read_input(path)?;
            let graphs = parse_graphs(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            (graphs, None)
        }
        None => {
            let store = open(config)?;
            let graphs = store
                .graph_ids(graph_type)?
                .into_iter()
                .map(|id| store.load_graph(id))
                .collect::<Result<Vec<LabeledGraph>, _>>()?;
            (graphs, Some(store))
        }
    };
    if graphs.is_empty() {
        return Err(Failure::prerequisite(match file {
            Some(p) => format!("{} holds no graphs", p.display()),
            None => format!("no stored graphs of type {graph_type:?}; run the graphs stage first"),
        }));
    }
    let patterns = mine_frequent_subgraphs(&graphs, config.min_support, config.max_nodes);
    if let Some(store) = &mut store {
        store.persist_mining_results(&patterns, &graphs)?;
    }
    println!("# {} patterns from {} graphs", patterns.len(), graphs.len());
    println!("support\tnodes\tedges\tcode");
    for p in &patterns {
        println!(
            "{}\t{}\t{}\t{}",
            p.support,
            p.pattern.node_count(),
            p.pattern.edges().len(),
            p.code.to_json()
        );
    }
    if let Some(path) = out {
        let named: Vec<LabeledGraph> = patterns
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut g = p.pattern.clone();
                g.id = i as i64 + 1;
                g.name = format!("pattern-{}", i + 1);
                g
            })
            .collect();
        write_output(path, &write_graphs(&named))?;
    }
    Ok(SUCCESS)
}

pub fn export(config: &Config, names: &[String], out: Option<&Path>) -> CmdResult {
    let store = open(config)?;
    let names: Vec<String> = if names.is_empty() {
        store.documents()?.into_iter().map(|d| d.name).collect()
    } else {
        names.to_vec()
    };
    let mut text = String::new();
    for (i, name) in names.iter().enumerate() {
        let exported = doc_by_name(&store, name)?.export_annotations();
        // one header line for the whole file
        let body = if i == 0 { exported.as_str() } else { exported.split_once('\n').map_or("", |(_, b)| b) };
        text.push_str(body);
    }
    match out {
        Some(path) => write_output(path, &text)?,
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(broken_pipe)?,
    }
    Ok(SUCCESS)
}

pub fn instance_create(config: &Config, corpus: &str, kind: &str, content: &[String]) -> CmdResult {
    let kind: InstanceKind = kind.parse().map_err(|e: StoreError| Failure::usage(e.to_string()))?;
    let mut store = open(config)?;
    let corpus_id = existing_corpus(&store, corpus)?;
    let mut ids = Vec::with_capacity(content.len());
    for c in content {
        let id = match c.parse::<i64>() {
            Ok(id) => id,
            Err(_) if kind != InstanceKind::AnnotationPair => store
                .document_id(c)?
                .ok_or_else(|| Failure::prerequisite(format!("document {c:?} is not in the store")))?
                .0,
            Err(_) => return Err(Failure::usage(format!("annotation id {c:?} is not a number"))),
        };
        ids.push(id);
    }
    let id = store.create_instance(corpus_id, kind, &ids)?;
    println!("{id}");
    Ok(SUCCESS)
}

pub fn instance_set(config: &Config, corpus: &str, name: &str, purpose: &str, instances: &[i64]) -> CmdResult {
    let mut store = open(config)?;
    let corpus_id = existing_corpus(&store, corpus)?;
    let id = store.create_instance_set(corpus_id, name, purpose, instances)?;
    println!("{id}");
    Ok(SUCCESS)
}

pub fn instance_label(config: &Config, instance: i64, task: &str, label: &str) -> CmdResult {
    let mut store = open(config)?;
    store.set_groundtruth(instance, task, label)?;
    Ok(SUCCESS)
}

pub fn instance_show(config: &Config, instance: i64, task: Option<&str>) -> CmdResult {
    let store = open(config)?;
    let (kind, content) = store.instance_content(instance)?;
    let ids: Vec<String> = content.iter().map(i64::to_string).collect();
    println!("{instance}\t{kind}\t{}", ids.join(","));
    if let Some(task) = task {
        match store.groundtruth(instance, task)? {
            Some(label) => println!("{task}\t{}", field(&label)),
            None => println!("{task}\t(unlabeled)"),
        }
    }
    Ok(SUCCESS)
}

pub fn instance_sets(config: &Config, corpus: &str, purpose: &str) -> CmdResult {
    let store = open(config)?;
    let corpus_id = existing_corpus(&store, corpus)?;
    for (id, name) in store.instance_sets(corpus_id, purpose)? {
        let members: Vec<String> = store.instance_set_members(id)?.iter().map(i64::to_string).collect();
        println!("{id}\t{}\t{}", field(&name), members.join(","));
    }
    Ok(SUCCESS)
}
