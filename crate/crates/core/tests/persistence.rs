//! Store behaviour across connections and under failed writes.

use standoff::{AllenRelation, Interval, NewAnnotation, Store, StoreError};

fn iv(s: usize, e: usize) -> Interval {
    Interval::new(s, e).unwrap()
}

fn stored_values(store: &Store) -> Vec<String> {
    let mut stmt = store.connection().prepare("SELECT value FROM annotations ORDER BY id").unwrap();
    let rows = stmt.query_map([], |r| r.get::<_, String>(0)).unwrap();
    rows.map(Result::unwrap).collect()
}

#[test]
fn failed_checkpoint_writes_nothing() {
    let mut store = Store::open_in_memory().unwrap();
    store.init_schema().unwrap();
    let mut doc = store.create_document("note", "chest pain and fever").unwrap();
    doc.add_annotation(NewAnnotation::new("token", iv(0, 5)).with_value("chest")).unwrap();
    store.marshal_document(&mut doc).unwrap();

    // abort the transaction part way through the batch
    store
        .connection()
        .execute_batch(
            "CREATE TEMP TRIGGER crash BEFORE INSERT ON main.annotations
             WHEN NEW.value = 'boom' BEGIN SELECT RAISE(ABORT, 'simulated crash'); END;",
        )
        .unwrap();
    doc.add_annotation(NewAnnotation::new("token", iv(6, 10)).with_value("pain")).unwrap();
    doc.add_annotation(NewAnnotation::new("token", iv(11, 14)).with_value("boom")).unwrap();
    doc.add_annotation(NewAnnotation::new("token", iv(15, 20)).with_value("fever")).unwrap();
    assert!(store.checkpoint(&mut doc).is_err());
    assert_eq!(stored_values(&store), ["chest"]);

    // the dirty set survives, so a retry writes all three
    store.connection().execute_batch("DROP TRIGGER temp.crash").unwrap();
    assert_eq!(store.checkpoint(&mut doc).unwrap(), 3);
    assert_eq!(stored_values(&store), ["chest", "pain", "boom", "fever"]);
}

#[test]
fn failed_metadata_checkpoint_leaves_marker_unset() {
    let mut store = Store::open_in_memory().unwrap();
    store.init_schema().unwrap();
    let mut doc = store.create_document("note", "abc").unwrap();
    store.marshal_document(&mut doc).unwrap();
    store
        .connection()
        .execute_batch(
            "CREATE TEMP TRIGGER crash BEFORE UPDATE ON main.documents
             BEGIN SELECT RAISE(ABORT, 'simulated crash'); END;",
        )
        .unwrap();
    doc.add_annotation(NewAnnotation::new("token", iv(0, 3))).unwrap();
    assert!(store.checkpoint_with_metadata(&mut doc, &[("stage.tokenize", "done")]).is_err());
    assert!(stored_values(&store).is_empty());
    assert!(!store.document_metadata(doc.id()).unwrap().contains_key("stage.tokenize"));
    assert!(!doc.metadata.contains_key("stage.tokenize"));
}

#[test]
fn file_store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("notes.db");
    let id = {
        let mut store = Store::open(&path).unwrap();
        store.init_schema().unwrap();
        let mut doc = store.create_document("a", "left lung mass").unwrap();
        doc.add_annotation(NewAnnotation::new("token", iv(0, 4)).with_attr("pos", "JJ")).unwrap();
        doc.add_annotation(NewAnnotation::new("token", iv(5, 9)).with_attr("pos", "NN")).unwrap();
        doc.add_annotation(NewAnnotation::new("token", iv(10, 14)).with_attr("pos", "NN")).unwrap();
        store.marshal_document(&mut doc).unwrap();
        doc.id()
    };
    let store = Store::connect(&format!("sqlite:{}", path.display())).unwrap();
    let doc = store.unmarshal_document(id).unwrap();
    let before: Vec<_> = doc
        .annotations_satisfying(AllenRelation::Before, iv(10, 14), Some("token"))
        .into_iter()
        .map(|a| a.attributes["pos"].clone())
        .collect();
    assert_eq!(before, ["JJ", "NN"]);
    assert_eq!(store.unmarshal_by_name("a").unwrap().content(), "left lung mass");
}

#[test]
fn unknown_document_is_not_found() {
    let mut store = Store::open_in_memory().unwrap();
    store.init_schema().unwrap();
    assert!(matches!(store.unmarshal_by_name("missing"), Err(StoreError::NotFound(_))));
}

#[test]
fn stale_copy_conflicts_after_concurrent_update() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("notes.db");
    let mut first = Store::open(&path).unwrap();
    first.init_schema().unwrap();
    let mut doc = first.create_document("a", "abc def").unwrap();
    let ann = doc.add_annotation(NewAnnotation::new("token", iv(0, 3)).with_value("x")).unwrap();
    first.marshal_document(&mut doc).unwrap();

    let mut second = Store::open(&path).unwrap();
    let mut other = second.unmarshal_document(doc.id()).unwrap();
    other.set_value(ann, "y").unwrap();
    assert_eq!(second.checkpoint(&mut other).unwrap(), 1);

    doc.set_value(ann, "z").unwrap();
    assert!(matches!(first.checkpoint(&mut doc), Err(StoreError::Conflict { .. })));
}
