//! Tab-separated external annotation format:
//!
//! ```text
//! doc_name<TAB>start<TAB>end<TAB>type<TAB>value<TAB>key=value;key=value
//! ```
//!
//! Offsets are 0-based half-open characters. Backslash escapes `\\`, `\t`,
//! `\n` and `\r` may appear in any field; the attribute field also escapes
//! `\;` and `\=`. Lines starting with `#` and blank lines are skipped.
//! Provenance travels as the reserved attribute `@provenance`.

use std::fmt;

use thiserror::Error;

use crate::attrs::Attributes;
use crate::interval::Interval;

use super::{Annotation, NewAnnotation};

pub const EXPORT_HEADER: &str = "#doc_name\tstart\tend\ttype\tvalue\tattributes";

const PROVENANCE_KEY: &str = "@provenance";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("import rejected; invalid lines: {}", lines.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ImportError {
    pub lines: Vec<LineError>,
}

impl ImportError {
    pub fn line_numbers(&self) -> Vec<usize> {
        self.lines.iter().map(|l| l.line).collect()
    }
}

/// One parsed line of an external annotation file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalAnnotation {
    /// 1-based line number in the source text.
    pub line: usize,
    pub doc_name: String,
    pub span: Interval,
    pub type_name: String,
    pub value: String,
    pub attributes: Attributes,
    pub provenance: String,
}

impl ExternalAnnotation {
    pub fn into_new(self) -> NewAnnotation {
        NewAnnotation {
            span: self.span,
            type_name: self.type_name,
            value: self.value,
            attributes: self.attributes,
            provenance: self.provenance,
        }
    }
}

pub(crate) fn escape(field: &str, attr: bool) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            ';' if attr => out.push_str("\\;"),
            '=' if attr => out.push_str("\\="),
            _ => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape(field: &str) -> Result<String, String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(';') => out.push(';'),
            Some('=') => out.push('='),
            other => return Err(format!("bad escape sequence \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

/// Splits on `sep` where it is not escaped.
fn split_unescaped(text: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == sep {
            parts.push(&text[start..i]);
            start = i + c.len_utf8();
        }
    }
    parts.push(&text[start..]);
    parts
}

fn format_attributes(attrs: &Attributes, provenance: &str) -> String {
    let mut pairs: Vec<String> = attrs
        .iter()
        .map(|(k, v)| format!("{}={}", escape(k, true), escape(v, true)))
        .collect();
    if !provenance.is_empty() {
        pairs.insert(0, format!("{PROVENANCE_KEY}={}", escape(provenance, true)));
    }
    pairs.join(";")
}

fn parse_attributes(field: &str) -> Result<(Attributes, String), String> {
    let mut attrs = Attributes::new();
    let mut provenance = String::new();
    if field.is_empty() {
        return Ok((attrs, provenance));
    }
    for pair in split_unescaped(field, ';') {
        let kv = split_unescaped(pair, '=');
        if kv.len() != 2 {
            return Err(format!("attribute {pair:?} is not key=value"));
        }
        let key = unescape(kv[0])?;
        let value = unescape(kv[1])?;
        if key.is_empty() {
            return Err("empty attribute key".into());
        }
        if key == PROVENANCE_KEY {
            provenance = value;
        } else {
            attrs.insert(key, value);
        }
    }
    Ok((attrs, provenance))
}

fn parse_line(number: usize, line: &str) -> Result<ExternalAnnotation, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 tab-separated fields, found {}", fields.len()));
    }
    let offset = |f: &str, what: &str| {
        f.trim()
            .parse::<usize>()
            .map_err(|_| format!("{what} {f:?} is not a non-negative integer"))
    };
    let start = offset(fields[1], "start")?;
    let end = offset(fields[2], "end")?;
    let span = Interval::new(start, end).map_err(|e| e.to_string())?;
    let type_name = unescape(fields[3])?;
    if type_name.is_empty() {
        return Err("empty annotation type".into());
    }
    let (attributes, provenance) = parse_attributes(fields[5])?;
    Ok(ExternalAnnotation {
        line: number,
        doc_name: unescape(fields[0])?,
        span,
        type_name,
        value: unescape(fields[4])?,
        attributes,
        provenance,
    })
}

/// Parses a whole file. Fails, listing every bad line, if any line is bad.
pub fn parse_annotation_lines(text: &str) -> Result<Vec<ExternalAnnotation>, ImportError> {
    let mut records = Vec::new();
    let mut bad = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_line(i + 1, line) {
            Ok(r) => records.push(r),
            Err(message) => bad.push(LineError { line: i + 1, message }),
        }
    }
    if bad.is_empty() {
        Ok(records)
    } else {
        Err(ImportError { lines: bad })
    }
}

/// Header line followed by one line per annotation.
pub fn export_annotations<'a>(doc_name: &str, anns: impl IntoIterator<Item = &'a Annotation>) -> String {
    let mut out = String::from(EXPORT_HEADER);
    out.push('\n');
    for a in anns {
        out.push_str(&format_line(doc_name, a.span, &a.type_name, &a.value, &a.attributes, &a.provenance));
        out.push('\n');
    }
    out
}

pub(crate) fn format_line(
    doc_name: &str,
    span: Interval,
    type_name: &str,
    value: &str,
    attributes: &Attributes,
    provenance: &str,
) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        escape(doc_name, false),
        span.start,
        span.end,
        escape(type_name, false),
        escape(value, false),
        format_attributes(attributes, provenance)
    )
}
