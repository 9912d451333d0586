//! Inline XML markup to stand-off annotations.
//!
//! Tags are stripped from the text and each element becomes an annotation
//! over the characters it enclosed. Whitespace is kept verbatim and entity
//! references are decoded first, so offsets index the decoded text.

use std::fmt;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::attrs::Attributes;
use crate::doc::NewAnnotation;
use crate::interval::{Interval, IntervalError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConvertError {
    #[error("malformed XML at byte {offset}: {message}")]
    Malformed { offset: u64, message: String },
    #[error("tags overlap at byte {offset}: </{close}> while <{open}> is still open")]
    Overlap { offset: u64, open: String, close: String },
}

impl ConvertError {
    pub fn offset(&self) -> u64 {
        match self {
            ConvertError::Malformed { offset, .. } | ConvertError::Overlap { offset, .. } => *offset,
        }
    }
}

/// Plain text plus one annotation per stripped element, in the order the
/// elements closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Converted {
    pub text: String,
    pub annotations: Vec<NewAnnotation>,
}

fn reader_for(text: &str) -> Reader<&[u8]> {
    let mut reader = Reader::from_str(text);
    let config = reader.config_mut();
    config.trim_text(false);
    // nesting is checked here so overlaps get their own error
    config.check_end_names = false;
    reader
}

fn read<'a>(reader: &mut Reader<&'a [u8]>) -> Result<Event<'a>, ConvertError> {
    reader.read_event().map_err(|e| ConvertError::Malformed {
        offset: reader.error_position(),
        message: e.to_string(),
    })
}

fn element_attrs(e: &BytesStart<'_>, offset: u64) -> Result<Attributes, ConvertError> {
    let mut out = Attributes::new();
    for a in e.attributes() {
        let malformed = |m: String| ConvertError::Malformed { offset, message: m };
        let a = a.map_err(|err| malformed(err.to_string()))?;
        let value = a.unescape_value().map_err(|err| malformed(err.to_string()))?;
        out.insert(String::from_utf8_lossy(a.key.as_ref()).into_owned(), value.into_owned());
    }
    Ok(out)
}

fn element_name(e: &[u8]) -> String {
    String::from_utf8_lossy(e).into_owned()
}

fn finish(name: String, attributes: Attributes, start: usize, end: usize) -> NewAnnotation {
    let value = attributes.get("TYPE").cloned().unwrap_or_else(|| name.clone());
    let mut ann = NewAnnotation::new(name, Interval { start, end })
        .with_value(value)
        .with_provenance("inline");
    ann.attributes = attributes;
    ann
}

/// Strips the markup from an XML fragment.
pub fn convert(inline: &str) -> Result<Converted, ConvertError> {
    let mut reader = reader_for(inline);
    let mut text = String::with_capacity(inline.len());
    let mut pos = 0usize;
    let mut open: Vec<(String, Attributes, usize)> = Vec::new();
    let mut annotations = Vec::new();
    loop {
        let before = reader.buffer_position();
        match read(&mut reader)? {
            Event::Start(e) => {
                let attrs = element_attrs(&e, before)?;
                open.push((element_name(e.name().as_ref()), attrs, pos));
            }
            Event::Empty(e) => {
                let attrs = element_attrs(&e, before)?;
                annotations.push(finish(element_name(e.name().as_ref()), attrs, pos, pos));
            }
            Event::End(e) => {
                let name = element_name(e.name().as_ref());
                match open.last() {
                    Some((top, _, _)) if *top == name => {
                        let (name, attrs, start) = open.pop().expect("just matched");
                        annotations.push(finish(name, attrs, start, pos));
                    }
                    Some((top, _, _)) if open.iter().any(|(n, _, _)| *n == name) => {
                        return Err(ConvertError::Overlap {
                            offset: before,
                            open: top.clone(),
                            close: name,
                        })
                    }
                    _ => {
                        return Err(ConvertError::Malformed {
                            offset: before,
                            message: format!("</{name}> closes nothing"),
                        })
                    }
                }
            }
            Event::Text(t) => {
                let decoded = t.unescape().map_err(|e| ConvertError::Malformed {
                    offset: before,
                    message: e.to_string(),
                })?;
                pos += decoded.chars().count();
                text.push_str(&decoded);
            }
            Event::CData(t) => {
                let raw = String::from_utf8_lossy(&t);
                pos += raw.chars().count();
                text.push_str(&raw);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some((name, _, _)) = open.last() {
        return Err(ConvertError::Malformed {
            offset: inline.len() as u64,
            message: format!("<{name}> is never closed"),
        });
    }
    Ok(Converted { text, annotations })
}

/// One record of a corpus file, with the raw inline markup of its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InlineRecord {
    /// The record's `ID`/`id` attribute, or its 1-based ordinal.
    pub id: String,
    pub raw: String,
}

impl InlineRecord {
    pub fn convert(&self) -> Result<Converted, ConvertError> {
        convert(&self.raw)
    }
}

#[derive(Debug, Clone)]
pub struct RecordOptions {
    pub record_element: String,
    pub text_element: String,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            record_element: "RECORD".into(),
            text_element: "TEXT".into(),
        }
    }
}

fn record_id(e: &BytesStart<'_>, offset: u64, ordinal: usize) -> Result<String, ConvertError> {
    let attrs = element_attrs(e, offset)?;
    Ok(attrs
        .get("ID")
        .or_else(|| attrs.get("id"))
        .cloned()
        .unwrap_or_else(|| ordinal.to_string()))
}

/// Splits a corpus into records. The raw inline text of a record is its
/// text elements concatenated in document order, or its whole content if
/// it has none.
pub fn split_records(corpus: &str, options: &RecordOptions) -> Result<Vec<InlineRecord>, ConvertError> {
    let mut reader = Reader::from_str(corpus);
    reader.config_mut().trim_text(false);
    let mut records = Vec::new();
    // (id, record content start, text pieces)
    let mut current: Option<(String, usize, Vec<String>)> = None;
    let mut text_start: Option<(usize, usize)> = None;
    let mut depth = 0usize;
    loop {
        let before = reader.buffer_position() as usize;
        let event = read(&mut reader)?;
        let after = reader.buffer_position() as usize;
        match event {
            Event::Start(e) => {
                depth += 1;
                let name = e.name();
                if current.is_none() && name.as_ref() == options.record_element.as_bytes() {
                    let id = record_id(&e, before as u64, records.len() + 1)?;
                    current = Some((id, after, Vec::new()));
                } else if current.is_some() && text_start.is_none() && name.as_ref() == options.text_element.as_bytes() {
                    text_start = Some((after, depth));
                }
            }
            Event::Empty(e) => {
                if current.is_none() && e.name().as_ref() == options.record_element.as_bytes() {
                    let id = record_id(&e, before as u64, records.len() + 1)?;
                    records.push(InlineRecord { id, raw: String::new() });
                }
            }
            Event::End(e) => {
                if let Some((start, d)) = text_start {
                    if d == depth && e.name().as_ref() == options.text_element.as_bytes() {
                        if let Some((_, _, pieces)) = current.as_mut() {
                            pieces.push(corpus[start..before].to_string());
                        }
                        text_start = None;
                    }
                }
                if e.name().as_ref() == options.record_element.as_bytes() && text_start.is_none() {
                    if let Some((id, start, pieces)) = current.take() {
                        let raw = if pieces.is_empty() {
                            corpus[start..before].to_string()
                        } else {
                            pieces.concat()
                        };
                        records.push(InlineRecord { id, raw });
                    }
                }
                depth = depth.saturating_sub(1);
            }
            Event::Eof if depth > 0 => {
                return Err(ConvertError::Malformed {
                    offset: corpus.len() as u64,
                    message: "unexpected end of input inside an element".into(),
                })
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetConvention {
    /// 0-based start, exclusive end.
    #[default]
    HalfOpen0,
    /// 1-based start, inclusive end.
    Inclusive1,
}

impl OffsetConvention {
    pub fn to_display(self, span: Interval) -> (usize, usize) {
        match self {
            OffsetConvention::HalfOpen0 => (span.start, span.end),
            OffsetConvention::Inclusive1 => (span.start + 1, span.end),
        }
    }

    pub fn from_display(self, start: usize, end: usize) -> Result<Interval, IntervalError> {
        match self {
            OffsetConvention::HalfOpen0 => Interval::new(start, end),
            OffsetConvention::Inclusive1 if start == 0 => Err(IntervalError::Inverted { start, end }),
            OffsetConvention::Inclusive1 => Interval::new(start - 1, end),
        }
    }
}

impl fmt::Display for OffsetConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OffsetConvention::HalfOpen0 => "half-open-0",
            OffsetConvention::Inclusive1 => "inclusive-1",
        })
    }
}

impl FromStr for OffsetConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('_', "-").to_ascii_lowercase().as_str() {
            "half-open-0" => Ok(OffsetConvention::HalfOpen0),
            "inclusive-1" => Ok(OffsetConvention::Inclusive1),
            _ => Err(format!("unknown offset convention {s:?} (expected half-open-0 or inclusive-1)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetRow {
    pub start: usize,
    pub end: usize,
    pub type_name: String,
    pub attributes: String,
    pub null: bool,
}

fn title_case(key: &str) -> String {
    let mut chars = key.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
        None => String::new(),
    }
}

/// Table rows in canonical span order. Attribute keys are shown title-cased
/// (`TYPE` as `Type`); null spans carry a trailing `null` flag.
pub fn render_offsets(annotations: &[NewAnnotation], convention: OffsetConvention) -> Vec<OffsetRow> {
    let mut sorted: Vec<&NewAnnotation> = annotations.iter().collect();
    sorted.sort_by(|a, b| {
        a.span
            .cmp(&b.span)
            .then_with(|| a.type_name.cmp(&b.type_name))
            .then_with(|| a.value.cmp(&b.value))
    });
    sorted
        .into_iter()
        .map(|a| {
            let (start, end) = convention.to_display(a.span);
            let mut parts: Vec<String> = a
                .attributes
                .iter()
                .map(|(k, v)| format!("{}={v}", title_case(k)))
                .collect();
            if a.span.is_null() {
                parts.push("null".into());
            }
            OffsetRow {
                start,
                end,
                type_name: a.type_name.clone(),
                attributes: parts.join(";"),
                null: a.span.is_null(),
            }
        })
        .collect()
}

pub const TABLE_HEADER: &str = "Start\tEnd\tAnnotation Type\tAnnotation Attribute";

pub fn format_table(rows: &[OffsetRow]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.start, r.end, r.type_name, r.attributes));
    }
    out
}
