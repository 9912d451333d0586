//! Section and template detection driven by an XML guideline.
//!
//! A guideline looks like this:
//!
//! ```xml
//! <guideline name="discharge">
//!   <section name="results">
//!     <pattern regex="^RESULTS:"/>
//!     <section name="labs">
//!       <pattern regex="^\s*Labs:"/>
//!     </section>
//!   </section>
//!   <template name="differential">
//!     <pattern regex="Differential:\s*(?&lt;polys&gt;\d+)\s*% polys"/>
//!     <attribute name="polys" group="polys"/>
//!   </template>
//! </guideline>
//! ```
//!
//! Patterns may also be given as element text. Properties tune the regex
//! (`case_insensitive`, `multiline`, `dotall`) or name the section from a
//! capture group (`name_from_group`).

use std::collections::{BTreeMap, HashSet};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use regex::{Captures, Regex, RegexBuilder};
use thiserror::Error;

use crate::doc::{AnnotationId, Document, NewAnnotation};
use crate::interval::Interval;

pub const SECTION: &str = "section";
pub const TEMPLATE: &str = "template";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuidelineError {
    #[error("malformed XML at byte {position}: {message}")]
    Malformed { position: u64, message: String },
    #[error("{path}: unknown element <{element}>")]
    UnknownElement { path: String, element: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: pattern does not compile: {message}")]
    Regex { path: String, message: String },
    #[error("{path}: capture group {group:?} is not defined by the pattern")]
    MissingGroup { path: String, group: String },
}

/// Maps a capture group to an annotation attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extractor {
    pub attribute: String,
    pub group: String,
}

#[derive(Debug, Clone)]
pub struct SectionSpec {
    pub name: String,
    pub patterns: Vec<Regex>,
    pub properties: BTreeMap<String, String>,
    pub extractors: Vec<Extractor>,
    pub children: Vec<SectionSpec>,
}

impl SectionSpec {
    fn name_group(&self) -> Option<&str> {
        self.properties.get("name_from_group").map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct TemplateSpec {
    pub name: String,
    pub pattern: Regex,
    pub extractors: Vec<Extractor>,
}

#[derive(Debug, Clone)]
pub struct Guideline {
    pub name: String,
    pub sections: Vec<SectionSpec>,
    pub templates: Vec<TemplateSpec>,
}

// Raw element tree built from the XML before validation.
#[derive(Debug, Default)]
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    text: String,
    children: Vec<Element>,
}

impl Element {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn label(&self) -> String {
        match self.attr("name") {
            Some(n) => format!("{}[{n}]", self.name),
            None => self.name.clone(),
        }
    }
}

fn start_element(e: &BytesStart<'_>, reader: &Reader<&[u8]>) -> Result<Element, GuidelineError> {
    let malformed = |message: String| GuidelineError::Malformed {
        position: reader.buffer_position(),
        message,
    };
    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| malformed(err.to_string()))?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a.unescape_value().map_err(|err| malformed(err.to_string()))?;
        attrs.push((key, value.into_owned()));
    }
    Ok(Element {
        name,
        attrs,
        ..Element::default()
    })
}

fn parse_tree(xml: &str) -> Result<Element, GuidelineError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(false);
    let mut stack: Vec<Element> = Vec::new();
    let mut root = None;
    loop {
        let event = reader.read_event().map_err(|e| GuidelineError::Malformed {
            position: reader.error_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) => stack.push(start_element(&e, &reader)?),
            Event::Empty(e) => {
                let el = start_element(&e, &reader)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => {
                        return Err(GuidelineError::Malformed {
                            position: reader.buffer_position(),
                            message: "more than one root element".into(),
                        })
                    }
                }
            }
            Event::End(_) => {
                let el = stack.pop().expect("reader checks end names");
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => {
                        return Err(GuidelineError::Malformed {
                            position: reader.buffer_position(),
                            message: "more than one root element".into(),
                        })
                    }
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| GuidelineError::Malformed {
                    position: reader.buffer_position(),
                    message: e.to_string(),
                })?;
                if let Some(el) = stack.last_mut() {
                    el.text.push_str(&text);
                } else if !text.trim().is_empty() {
                    return Err(GuidelineError::Malformed {
                        position: reader.buffer_position(),
                        message: "text outside the root element".into(),
                    });
                }
            }
            Event::CData(t) => {
                if let Some(el) = stack.last_mut() {
                    el.text.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(GuidelineError::Malformed {
            position: xml.len() as u64,
            message: format!("unclosed element <{}>", open.name),
        });
    }
    root.ok_or(GuidelineError::Malformed {
        position: 0,
        message: "no root element".into(),
    })
}

const PROPERTIES: &[&str] = &["case_insensitive", "multiline", "dotall", "name_from_group"];

fn flag(props: &BTreeMap<String, String>, key: &str, default: bool, path: &str) -> Result<bool, GuidelineError> {
    match props.get(key).map(|v| v.to_ascii_lowercase()) {
        None => Ok(default),
        Some(v) => match v.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(GuidelineError::Invalid {
                path: path.to_string(),
                message: format!("property {key} expects a boolean, got {v:?}"),
            }),
        },
    }
}

fn compile(source: &str, props: &BTreeMap<String, String>, path: &str) -> Result<Regex, GuidelineError> {
    RegexBuilder::new(source)
        .case_insensitive(flag(props, "case_insensitive", false, path)?)
        .multi_line(flag(props, "multiline", true, path)?)
        .dot_matches_new_line(flag(props, "dotall", false, path)?)
        .build()
        .map_err(|e| GuidelineError::Regex {
            path: path.to_string(),
            message: e.to_string(),
        })
}

fn required<'a>(el: &'a Element, key: &str, path: &str) -> Result<&'a str, GuidelineError> {
    el.attr(key).ok_or_else(|| GuidelineError::Invalid {
        path: path.to_string(),
        message: format!("missing attribute {key:?}"),
    })
}

fn has_group(re: &Regex, group: &str) -> bool {
    re.capture_names().flatten().any(|n| n == group)
}

/// Pattern sources, properties and extractors shared by sections and templates.
struct Parts<'a> {
    patterns: Vec<(String, String)>,
    properties: BTreeMap<String, String>,
    extractors: Vec<Extractor>,
    sections: Vec<&'a Element>,
}

fn collect_parts<'a>(el: &'a Element, path: &str, allow_sections: bool) -> Result<Parts<'a>, GuidelineError> {
    let mut parts = Parts {
        patterns: Vec::new(),
        properties: BTreeMap::new(),
        extractors: Vec::new(),
        sections: Vec::new(),
    };
    if !el.text.trim().is_empty() {
        return Err(GuidelineError::Invalid {
            path: path.to_string(),
            message: format!("unexpected text {:?}", el.text.trim()),
        });
    }
    for (i, child) in el.children.iter().enumerate() {
        match child.name.as_str() {
            "pattern" => {
                let child_path = format!("{path}/pattern[{}]", parts.patterns.len() + 1);
                let source = match child.attr("regex") {
                    Some(r) => r.to_string(),
                    None if !child.text.trim().is_empty() => child.text.trim().to_string(),
                    None => {
                        return Err(GuidelineError::Invalid {
                            path: child_path,
                            message: "pattern has no regex".into(),
                        })
                    }
                };
                parts.patterns.push((source, child_path));
            }
            "property" => {
                let child_path = format!("{path}/{}", child.label());
                let key = required(child, "name", &child_path)?;
                if !PROPERTIES.contains(&key) {
                    return Err(GuidelineError::Invalid {
                        path: child_path,
                        message: format!("unknown property {key:?}"),
                    });
                }
                let value = required(child, "value", &child_path)?;
                parts.properties.insert(key.to_string(), value.to_string());
            }
            "attribute" => {
                let child_path = format!("{path}/{}", child.label());
                let attribute = required(child, "name", &child_path)?.to_string();
                let group = child.attr("group").unwrap_or(&attribute).to_string();
                parts.extractors.push(Extractor { attribute, group });
            }
            "section" if allow_sections => parts.sections.push(child),
            other => {
                return Err(GuidelineError::UnknownElement {
                    path: format!("{path}/{}", el.children[i].label()),
                    element: other.to_string(),
                })
            }
        }
    }
    Ok(parts)
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>, path: &str, kind: &str) -> Result<(), GuidelineError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(GuidelineError::Invalid {
                path: path.to_string(),
                message: format!("duplicate {kind} name {n:?}"),
            });
        }
    }
    Ok(())
}

fn build_section(el: &Element, parent_path: &str) -> Result<SectionSpec, GuidelineError> {
    let path = format!("{parent_path}/{}", el.label());
    let name = required(el, "name", &path)?.to_string();
    let parts = collect_parts(el, &path, true)?;
    if parts.patterns.is_empty() {
        return Err(GuidelineError::Invalid {
            path,
            message: "section needs at least one pattern".into(),
        });
    }
    let mut patterns = Vec::with_capacity(parts.patterns.len());
    for (source, pattern_path) in &parts.patterns {
        let re = compile(source, &parts.properties, pattern_path)?;
        let groups = parts
            .properties
            .get("name_from_group")
            .into_iter()
            .chain(parts.extractors.iter().map(|x| &x.group));
        for g in groups {
            if !has_group(&re, g) {
                return Err(GuidelineError::MissingGroup {
                    path: pattern_path.clone(),
                    group: g.clone(),
                });
            }
        }
        patterns.push(re);
    }
    check_unique(
        parts.sections.iter().filter_map(|s| s.attr("name")),
        &path,
        "section",
    )?;
    let children = parts
        .sections
        .iter()
        .map(|c| build_section(c, &path))
        .collect::<Result<_, _>>()?;
    Ok(SectionSpec {
        name,
        patterns,
        properties: parts.properties,
        extractors: parts.extractors,
        children,
    })
}

fn build_template(el: &Element, parent_path: &str) -> Result<TemplateSpec, GuidelineError> {
    let path = format!("{parent_path}/{}", el.label());
    let name = required(el, "name", &path)?.to_string();
    let parts = collect_parts(el, &path, false)?;
    if parts.properties.contains_key("name_from_group") {
        return Err(GuidelineError::Invalid {
            path,
            message: "name_from_group applies to sections only".into(),
        });
    }
    let [(source, _)] = parts.patterns.as_slice() else {
        return Err(GuidelineError::Invalid {
            path,
            message: format!("template needs exactly one pattern, found {}", parts.patterns.len()),
        });
    };
    let pattern = compile(source, &parts.properties, &path)?;
    for x in &parts.extractors {
        if !has_group(&pattern, &x.group) {
            return Err(GuidelineError::MissingGroup {
                path,
                group: x.group.clone(),
            });
        }
    }
    Ok(TemplateSpec {
        name,
        pattern,
        extractors: parts.extractors,
    })
}

impl Guideline {
    /// Parses and validates a guideline document.
    pub fn parse(xml: &str) -> Result<Self, GuidelineError> {
        let root = parse_tree(xml)?;
        if root.name != "guideline" {
            return Err(GuidelineError::UnknownElement {
                path: root.label(),
                element: root.name.clone(),
            });
        }
        let path = root.label();
        let name = root.attr("name").unwrap_or_default().to_string();
        if !root.text.trim().is_empty() {
            return Err(GuidelineError::Invalid {
                path,
                message: format!("unexpected text {:?}", root.text.trim()),
            });
        }
        let mut sections = Vec::new();
        let mut templates = Vec::new();
        for child in &root.children {
            match child.name.as_str() {
                "section" => sections.push(build_section(child, &path)?),
                "template" => templates.push(build_template(child, &path)?),
                other => {
                    return Err(GuidelineError::UnknownElement {
                        path: format!("{path}/{}", child.label()),
                        element: other.to_string(),
                    })
                }
            }
        }
        check_unique(sections.iter().map(|s: &SectionSpec| s.name.as_str()), &path, "section")?;
        check_unique(templates.iter().map(|t: &TemplateSpec| t.name.as_str()), &path, "template")?;
        Ok(Guideline {
            name,
            sections,
            templates,
        })
    }

    fn provenance(&self) -> String {
        format!("guideline:{}", self.name)
    }
}

struct Heading<'h> {
    start: usize,
    end: usize,
    spec: usize,
    caps: Captures<'h>,
}

/// All non-empty matches of `re` in `hay` starting at or after `from`.
fn matches_from<'h>(re: &Regex, hay: &'h str, from: usize) -> Vec<Captures<'h>> {
    let mut out = Vec::new();
    let mut pos = from;
    while pos <= hay.len() {
        let Some(caps) = re.captures_at(hay, pos) else { break };
        let m = caps.get(0).expect("group 0 always participates");
        pos = if m.end() > m.start() {
            m.end()
        } else {
            hay[m.start()..].chars().next().map_or(hay.len() + 1, |c| m.start() + c.len_utf8())
        };
        if m.end() > m.start() {
            out.push(caps);
        }
    }
    out
}

fn extract(caps: &Captures<'_>, extractors: &[Extractor], target: &mut NewAnnotation) {
    for x in extractors {
        if let Some(m) = caps.name(&x.group) {
            target.attributes.insert(x.attribute.clone(), m.as_str().to_string());
        }
    }
}

struct Scope {
    /// Byte range searched for headings.
    from: usize,
    end: usize,
    depth: usize,
    parent: Option<AnnotationId>,
}

fn detect_scope(
    doc: &mut Document,
    specs: &[SectionSpec],
    scope: Scope,
    provenance: &str,
    out: &mut Vec<AnnotationId>,
) {
    if specs.is_empty() || scope.from >= scope.end {
        return;
    }
    let content = doc.content().to_string();
    let hay = &content[..scope.end];
    let mut candidates: Vec<Heading<'_>> = Vec::new();
    for (spec_idx, spec) in specs.iter().enumerate() {
        for re in &spec.patterns {
            for caps in matches_from(re, hay, scope.from) {
                let m = caps.get(0).expect("group 0 always participates");
                candidates.push(Heading {
                    start: m.start(),
                    end: m.end(),
                    spec: spec_idx,
                    caps,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        (a.start, a.spec)
            .cmp(&(b.start, b.spec))
            .then((b.end - b.start).cmp(&(a.end - a.start)))
    });
    let mut chosen: Vec<Heading<'_>> = Vec::new();
    for c in candidates {
        if chosen.last().is_none_or(|last| c.start >= last.end) {
            chosen.push(c);
        }
    }
    let bounds: Vec<usize> = chosen.iter().skip(1).map(|h| h.start).chain([scope.end]).collect();
    for (heading, body_end) in chosen.iter().zip(bounds) {
        let spec = &specs[heading.spec];
        let span = Interval {
            start: doc.char_offset(heading.start),
            end: doc.char_offset(body_end),
        };
        let value = spec
            .name_group()
            .and_then(|g| heading.caps.name(g))
            .map_or_else(|| spec.name.clone(), |m| m.as_str().to_string());
        let mut new = NewAnnotation::new(SECTION, span)
            .with_value(value)
            .with_attr("spec", spec.name.clone())
            .with_attr("heading_start", span.start.to_string())
            .with_attr("heading_end", doc.char_offset(heading.end).to_string())
            .with_attr("depth", scope.depth.to_string())
            .with_provenance(provenance);
        if let Some(p) = scope.parent {
            new = new.with_attr("parent", p.0.to_string());
        }
        extract(&heading.caps, &spec.extractors, &mut new);
        let id = doc
            .add_annotation(new)
            .expect("section spans come from the document itself");
        out.push(id);
        detect_scope(
            doc,
            &spec.children,
            Scope {
                from: heading.end,
                end: body_end,
                depth: scope.depth + 1,
                parent: Some(id),
            },
            provenance,
            out,
        );
    }
}

/// Finds sections and, recursively, their subsections, adding one
/// `section` annotation per hit. Returns the new ids in document order,
/// parents before their children.
pub fn detect_sections(doc: &mut Document, guideline: &Guideline) -> Vec<AnnotationId> {
    let mut out = Vec::new();
    let end = doc.content().len();
    detect_scope(
        doc,
        &guideline.sections,
        Scope {
            from: 0,
            end,
            depth: 0,
            parent: None,
        },
        &guideline.provenance(),
        &mut out,
    );
    out
}

/// Adds one `template` annotation per match of each template pattern.
/// Templates do not consume text, so overlapping matches are all kept.
/// Without extractors every named group becomes an attribute.
pub fn match_templates(doc: &mut Document, guideline: &Guideline) -> Vec<AnnotationId> {
    let content = doc.content().to_string();
    let provenance = guideline.provenance();
    let mut found = Vec::new();
    for t in &guideline.templates {
        for caps in matches_from(&t.pattern, &content, 0) {
            let m = caps.get(0).expect("group 0 always participates");
            let span = Interval {
                start: doc.char_offset(m.start()),
                end: doc.char_offset(m.end()),
            };
            let mut new = NewAnnotation::new(TEMPLATE, span)
                .with_value(t.name.clone())
                .with_provenance(provenance.clone());
            if t.extractors.is_empty() {
                for name in t.pattern.capture_names().flatten() {
                    if let Some(g) = caps.name(name) {
                        new.attributes.insert(name.to_string(), g.as_str().to_string());
                    }
                }
            } else {
                extract(&caps, &t.extractors, &mut new);
            }
            found.push(new);
        }
    }
    found
        .into_iter()
        .map(|new| doc.add_annotation(new).expect("template spans come from the document itself"))
        .collect()
}
