//! Table definitions for the common data model.

pub(crate) struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub ddl: &'static str,
}

pub(crate) const TABLES: &[Table] = &[
    Table {
        name: "corpora",
        columns: &["id", "name", "description", "data"],
        ddl: "CREATE TABLE corpora (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT '',
    data TEXT NOT NULL DEFAULT '{}'
)",
    },
    Table {
        name: "documents",
        columns: &["id", "name", "source", "size", "data", "content"],
        ddl: "CREATE TABLE documents (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    source TEXT NOT NULL DEFAULT '',
    size INTEGER NOT NULL,
    data TEXT NOT NULL DEFAULT '{}',
    content TEXT NOT NULL
)",
    },
    Table {
        name: "corpora_documents",
        columns: &["corpus_id", "document_id"],
        ddl: "CREATE TABLE corpora_documents (
    corpus_id INTEGER NOT NULL REFERENCES corpora(id),
    document_id INTEGER NOT NULL REFERENCES documents(id),
    PRIMARY KEY (corpus_id, document_id)
)",
    },
    Table {
        name: "annotation_types",
        columns: &["id", "name", "description"],
        ddl: "CREATE TABLE annotation_types (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT ''
)",
    },
    Table {
        name: "annotations",
        columns: &["id", "document_id", "start", "end", "type_id", "value", "data"],
        ddl: "CREATE TABLE annotations (
    id INTEGER PRIMARY KEY,
    document_id INTEGER NOT NULL REFERENCES documents(id),
    \"start\" INTEGER NOT NULL,
    \"end\" INTEGER NOT NULL,
    type_id INTEGER NOT NULL REFERENCES annotation_types(id),
    value TEXT NOT NULL DEFAULT '',
    data TEXT NOT NULL DEFAULT '{}'
)",
    },
    Table {
        name: "instances",
        columns: &["id", "corpus_id", "kind", "data"],
        ddl: "CREATE TABLE instances (
    id INTEGER PRIMARY KEY,
    corpus_id INTEGER NOT NULL REFERENCES corpora(id),
    kind TEXT NOT NULL CHECK (kind IN ('document', 'annotation_pair', 'document_set')),
    data TEXT NOT NULL DEFAULT '{}'
)",
    },
    Table {
        name: "instances_content",
        columns: &["instance_id", "content_kind", "content_id"],
        ddl: "CREATE TABLE instances_content (
    instance_id INTEGER NOT NULL REFERENCES instances(id),
    content_kind TEXT NOT NULL CHECK (content_kind IN ('document', 'annotation')),
    content_id INTEGER NOT NULL,
    PRIMARY KEY (instance_id, content_kind, content_id)
)",
    },
    Table {
        name: "instance_sets",
        columns: &["id", "corpus_id", "name", "purpose", "data"],
        ddl: "CREATE TABLE instance_sets (
    id INTEGER PRIMARY KEY,
    corpus_id INTEGER NOT NULL REFERENCES corpora(id),
    name TEXT NOT NULL,
    purpose TEXT NOT NULL,
    data TEXT NOT NULL DEFAULT '{}'
)",
    },
    Table {
        name: "instance_set_members",
        columns: &["instance_set_id", "instance_id"],
        ddl: "CREATE TABLE instance_set_members (
    instance_set_id INTEGER NOT NULL REFERENCES instance_sets(id),
    instance_id INTEGER NOT NULL REFERENCES instances(id),
    PRIMARY KEY (instance_set_id, instance_id)
)",
    },
    Table {
        name: "groundtruth",
        columns: &["instance_id", "task", "label", "data"],
        ddl: "CREATE TABLE groundtruth (
    instance_id INTEGER NOT NULL REFERENCES instances(id),
    task TEXT NOT NULL,
    label TEXT NOT NULL,
    data TEXT NOT NULL DEFAULT '{}',
    PRIMARY KEY (instance_id, task)
)",
    },
    Table {
        name: "graphs",
        columns: &["id", "name", "type", "data"],
        ddl: "CREATE TABLE graphs (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    type TEXT NOT NULL,
    data TEXT NOT NULL DEFAULT '{}'
)",
    },
    Table {
        name: "linkage_graph",
        columns: &["graph_id", "node1", "node2", "edge_label", "node1_label", "node2_label"],
        ddl: "CREATE TABLE linkage_graph (
    graph_id INTEGER NOT NULL REFERENCES graphs(id),
    node1 INTEGER NOT NULL,
    node2 INTEGER NOT NULL,
    edge_label TEXT NOT NULL,
    node1_label TEXT NOT NULL,
    node2_label TEXT NOT NULL
)",
    },
    Table {
        name: "sig_subgraph",
        columns: &["id", "subgraph_graph_id", "support", "data"],
        ddl: "CREATE TABLE sig_subgraph (
    id INTEGER PRIMARY KEY,
    subgraph_graph_id INTEGER NOT NULL REFERENCES graphs(id),
    support INTEGER NOT NULL,
    data TEXT NOT NULL DEFAULT '{}'
)",
    },
    Table {
        name: "lg_sigsub",
        columns: &["graph_id", "sig_subgraph_id", "node_mapping"],
        ddl: "CREATE TABLE lg_sigsub (
    graph_id INTEGER NOT NULL REFERENCES graphs(id),
    sig_subgraph_id INTEGER NOT NULL REFERENCES sig_subgraph(id),
    node_mapping TEXT NOT NULL
)",
    },
];

pub(crate) const INDEXES: &[&str] = &[
    "CREATE UNIQUE INDEX IF NOT EXISTS ux_corpora_name ON corpora(name)",
    "CREATE UNIQUE INDEX IF NOT EXISTS ux_documents_name ON documents(name)",
    "CREATE UNIQUE INDEX IF NOT EXISTS ux_annotation_types_name ON annotation_types(name)",
    "CREATE INDEX IF NOT EXISTS ix_corpora_documents_document ON corpora_documents(document_id)",
    "CREATE INDEX IF NOT EXISTS ix_annotations_document ON annotations(document_id)",
    "CREATE INDEX IF NOT EXISTS ix_annotations_type_value ON annotations(type_id, value)",
    "CREATE INDEX IF NOT EXISTS ix_annotations_span ON annotations(document_id, \"start\", \"end\")",
    "CREATE INDEX IF NOT EXISTS ix_instance_sets_corpus ON instance_sets(corpus_id)",
    "CREATE INDEX IF NOT EXISTS ix_linkage_graph_graph ON linkage_graph(graph_id)",
    "CREATE INDEX IF NOT EXISTS ix_lg_sigsub_graph ON lg_sigsub(graph_id)",
    "CREATE INDEX IF NOT EXISTS ix_lg_sigsub_sig ON lg_sigsub(sig_subgraph_id)",
];

/// The full DDL as a script.
pub fn ddl() -> String {
    let mut out = String::new();
    for t in TABLES {
        out.push_str(t.ddl);
        out.push_str(";\n");
    }
    for ix in INDEXES {
        out.push_str(ix);
        out.push_str(";\n");
    }
    out
}

pub fn table_names() -> impl Iterator<Item = &'static str> {
    TABLES.iter().map(|t| t.name)
}
