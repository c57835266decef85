//! CLML to [`ActModel`].
//!
//! [`contents`] reads the legal hierarchy (Part, Chapter, Pblock, P1group)
//! from an Act's full-data XML. [`single_section`] reads one section's
//! textual hierarchy by nesting depth: P2 become subsections, P3 paragraphs,
//! P4 subparagraphs and every `Text` element a [`Line`]. The grammar is
//! tolerant; anything unexpected is tallied rather than rejected.

use std::collections::{BTreeMap, HashMap};

use roxmltree::{Document, Node, ParsingOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, ActId, CachedResource, FetchPolicy, Fetcher, IngestError};
use crate::model::{
    label_cmp, marker_rank, roman_rank, ActModel, Chapter, CrossHeading, Line, Paragraph, Part,
    PartChild, Section, SectionRef, SubParagraph, SubSection,
};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("not CLML: {0}")]
    NotClml(String),
    #[error("no Part or P1group found in {0}")]
    EmptyContents(String),
    #[error("unrecognized structure: {0}")]
    UnrecognizedStructure(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub unknown_tags: BTreeMap<String, usize>,
    pub sections_parsed: usize,
    /// (section label, reason), sorted by label.
    pub sections_failed: Vec<(String, String)>,
    /// Non-fatal oddities: out-of-order markers, duplicate labels.
    pub warnings: Vec<String>,
}

impl ParseDiagnostics {
    pub fn attempted(&self) -> usize {
        self.sections_parsed + self.sections_failed.len()
    }

    fn tally(&mut self, tag: &str) {
        *self.unknown_tags.entry(tag.to_string()).or_default() += 1;
    }

    /// Order-independent merge.
    pub fn merge(&mut self, other: ParseDiagnostics) {
        for (tag, n) in other.unknown_tags {
            *self.unknown_tags.entry(tag).or_default() += n;
        }
        self.sections_parsed += other.sections_parsed;
        self.sections_failed.extend(other.sections_failed);
        self.sections_failed
            .sort_by(|a, b| label_cmp(&a.0, &b.0).then_with(|| a.1.cmp(&b.1)));
        self.warnings.extend(other.warnings);
        self.warnings.sort();
    }
}

pub fn xml_options() -> ParsingOptions {
    ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    }
}

fn parse_document(res: &CachedResource) -> Result<Document<'_>, ParseError> {
    let text = res
        .text()
        .map_err(|e| ParseError::NotClml(format!("{}: {e}", res.uri)))?;
    let doc = Document::parse_with_options(text, xml_options())
        .map_err(|e| ParseError::NotClml(format!("{}: {e}", res.uri)))?;
    if doc.root_element().tag_name().name() != "Legislation" {
        return Err(ParseError::NotClml(format!(
            "{}: root element is <{}>",
            res.uri,
            doc.root_element().tag_name().name()
        )));
    }
    Ok(doc)
}

fn is(node: &Node, name: &str) -> bool {
    node.is_element() && node.tag_name().name() == name
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| is(c, name))
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(Node::is_element)
}

/// Collapses whitespace runs (including non-breaking spaces) and trims.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn node_text(node: Node) -> String {
    let raw: String = node
        .descendants()
        .filter(Node::is_text)
        .filter_map(|t| t.text())
        .collect();
    normalize_whitespace(&raw)
}

/// The Act body, skipping Schedules and metadata.
fn body_of<'a, 'i>(doc: &'a Document<'i>) -> Option<Node<'a, 'i>> {
    doc.root_element().descendants().find(|n| is(n, "Body"))
}

fn act_title(doc: &Document) -> String {
    let root = doc.root_element();
    let prelims = root
        .descendants()
        .find(|n| is(n, "PrimaryPrelims"))
        .and_then(|p| child(p, "Title"))
        .map(node_text);
    prelims
        .or_else(|| {
            root.descendants()
                .find(|n| n.is_element() && n.tag_name().name() == "title")
                .map(node_text)
        })
        .unwrap_or_default()
}

fn strip_prefix_word(number: &str, word: &str) -> String {
    let n = number.trim();
    n.strip_prefix(word)
        .map(|rest| rest.trim().to_string())
        .unwrap_or_else(|| n.to_string())
}

fn document_url(node: Node) -> Option<String> {
    node.attribute("DocumentURI")
        .map(str::to_string)
        .or_else(|| {
            child(node, "DocumentURL")
                .or_else(|| child(node, "DocumentURI"))
                .map(node_text)
        })
}

fn pnumber(node: Node) -> String {
    child(node, "Pnumber")
        .or_else(|| child(node, "PNumber"))
        .map(node_text)
        .unwrap_or_default()
}

fn section_refs_of(group: Node, diag: &mut ParseDiagnostics) -> Vec<SectionRef> {
    let title = child(group, "Title").map(node_text).unwrap_or_default();
    let p1s: Vec<Node> = if is(&group, "P1") {
        vec![group]
    } else {
        elements(group).filter(|c| is(c, "P1")).collect()
    };
    if p1s.is_empty() {
        diag.warnings.push(format!("P1group `{title}` has no P1"));
    }
    p1s.into_iter()
        .filter_map(|p1| {
            let number = pnumber(p1);
            if number.is_empty() {
                diag.warnings
                    .push(format!("section `{title}` has no number"));
                return None;
            }
            Some(SectionRef {
                document_url: document_url(p1)
                    .or_else(|| document_url(group))
                    .unwrap_or_default(),
                number,
                title: title.clone(),
            })
        })
        .collect()
}

/// Cross-headings for a run of sibling elements. Sections that are not
/// wrapped in a Pblock land in an untitled cross-heading.
fn crossheadings_from<'a, 'i: 'a>(
    nodes: impl IntoIterator<Item = Node<'a, 'i>>,
    diag: &mut ParseDiagnostics,
) -> Vec<CrossHeading> {
    let mut out: Vec<CrossHeading> = Vec::new();
    let mut loose: Option<CrossHeading> = None;
    for el in nodes {
        match el.tag_name().name() {
            "Pblock" | "PsubBlock" => {
                out.extend(loose.take());
                out.extend(crossheadings_of_block(el, diag));
            }
            "P1group" | "P1" => loose
                .get_or_insert_with(|| CrossHeading {
                    title: String::new(),
                    section_refs: Vec::new(),
                })
                .section_refs
                .extend(section_refs_of(el, diag)),
            "Number" | "Title" => {}
            other => diag.tally(other),
        }
    }
    out.extend(loose);
    out
}

fn chapter_of(node: Node, diag: &mut ParseDiagnostics) -> Chapter {
    Chapter {
        label: child(node, "Number")
            .map(|n| strip_prefix_word(&node_text(n), "Chapter"))
            .unwrap_or_default(),
        title: child(node, "Title").map(node_text).unwrap_or_default(),
        crossheadings: crossheadings_from(elements(node), diag),
    }
}

/// Chapters and cross-headings interleaved in document order.
fn part_children<'a, 'i: 'a>(
    nodes: impl IntoIterator<Item = Node<'a, 'i>>,
    diag: &mut ParseDiagnostics,
) -> Vec<PartChild> {
    let mut children = Vec::new();
    let mut run = Vec::new();
    for el in nodes {
        match el.tag_name().name() {
            "Chapter" => {
                children.extend(
                    crossheadings_from(run.drain(..), diag)
                        .into_iter()
                        .map(PartChild::CrossHeading),
                );
                children.push(PartChild::Chapter(chapter_of(el, diag)));
            }
            "Number" | "Title" => {}
            _ => run.push(el),
        }
    }
    children.extend(
        crossheadings_from(run, diag)
            .into_iter()
            .map(PartChild::CrossHeading),
    );
    children
}

fn part_of(node: Node, diag: &mut ParseDiagnostics) -> Part {
    Part {
        label: child(node, "Number")
            .map(|n| strip_prefix_word(&node_text(n), "Part"))
            .unwrap_or_default(),
        title: child(node, "Title").map(node_text).unwrap_or_default(),
        children: part_children(elements(node), diag),
    }
}

/// One Pblock, plus any PsubBlocks nested inside it, as a flat run of
/// cross-headings.
fn crossheadings_of_block(block: Node, diag: &mut ParseDiagnostics) -> Vec<CrossHeading> {
    let title = child(block, "Title").map(node_text).unwrap_or_default();
    let mut head = CrossHeading {
        title,
        section_refs: Vec::new(),
    };
    let mut nested = Vec::new();
    for inner in elements(block) {
        match inner.tag_name().name() {
            "P1group" | "P1" => head.section_refs.extend(section_refs_of(inner, diag)),
            "PsubBlock" | "Pblock" => nested.extend(crossheadings_of_block(inner, diag)),
            "Title" | "Number" => {}
            other => diag.tally(other),
        }
    }
    let mut out = Vec::new();
    if !head.section_refs.is_empty() || nested.is_empty() {
        out.push(head);
    }
    out.extend(nested);
    out
}

/// Legal hierarchy of an Act from its full-data XML. Sections are left
/// unparsed; only their [`SectionRef`] stubs are filled in.
pub fn contents(
    full_data_xml: &CachedResource,
) -> Result<(ActModel, ParseDiagnostics), ParseError> {
    let doc = parse_document(full_data_xml)?;
    let mut diag = ParseDiagnostics::default();
    let body = body_of(&doc).ok_or_else(|| ParseError::EmptyContents(full_data_xml.uri.clone()))?;
    let id = act_id_from_doc(&doc).unwrap_or_else(ActId::housing_act_2004);
    let mut model = ActModel::new(id, act_title(&doc));

    let mut loose: Vec<Node> = Vec::new();
    let mut parts = Vec::new();
    for el in elements(body) {
        match el.tag_name().name() {
            "Part" => {
                if !loose.is_empty() {
                    parts.push(implicit_part(&mut loose, &mut diag));
                }
                parts.push(part_of(el, &mut diag));
            }
            "Pblock" | "PsubBlock" | "P1group" | "P1" | "Chapter" => loose.push(el),
            other => diag.tally(other),
        }
    }
    if !loose.is_empty() {
        parts.push(implicit_part(&mut loose, &mut diag));
    }
    model.parts = parts;

    let section_count = model.section_refs().count();
    if model.parts.iter().all(|p| p.label.is_empty()) && section_count == 0 {
        return Err(ParseError::EmptyContents(full_data_xml.uri.clone()));
    }
    let mut seen = HashMap::new();
    for r in model.section_refs() {
        if seen.insert(r.number.clone(), ()).is_some() {
            diag.warnings
                .push(format!("duplicate section label {}", r.number));
        }
    }
    Ok((model, diag))
}

fn implicit_part(loose: &mut Vec<Node>, diag: &mut ParseDiagnostics) -> Part {
    Part {
        label: String::new(),
        title: String::new(),
        children: part_children(loose.drain(..), diag),
    }
}

fn act_id_from_doc(doc: &Document) -> Option<ActId> {
    let uri = doc.root_element().attribute("DocumentURI")?;
    let path = uri.split("legislation.gov.uk/").nth(1)?;
    let mut segs = path.split('/');
    let class = segs.next()?;
    let year = segs.next()?.parse().ok()?;
    let number = segs.next()?.parse().ok()?;
    ActId::new(class, year, number).ok()
}

// ---------------------------------------------------------------------------
// Textual hierarchy

enum Item<'a, 'i> {
    Line { text: String, amendment: bool },
    Block { depth: u8, node: Node<'a, 'i> },
}

fn p_depth(name: &str) -> Option<u8> {
    let rest = name.strip_prefix('P')?;
    if rest.len() == 1 {
        rest.parse().ok().filter(|d| (1..=7).contains(d))
    } else {
        None
    }
}

fn is_para_wrapper(name: &str) -> bool {
    name.strip_prefix('P')
        .and_then(|r| r.strip_suffix("para"))
        .is_some_and(|d| d.len() == 1 && d.chars().all(|c| c.is_ascii_digit()))
}

const FLATTENED: &[&str] = &[
    "UnorderedList",
    "OrderedList",
    "ListItem",
    "Para",
    "Tabular",
    "table",
    "tbody",
    "thead",
    "tr",
    "td",
    "th",
    "Figure",
    "Formula",
    "BlockExtract",
    "BlockText",
    "Span",
];
const IGNORED: &[&str] = &[
    "Pnumber",
    "PNumber",
    "Title",
    "CommentaryRef",
    "FootnoteRef",
    "MarginNoteRef",
];

fn collect_items<'a, 'i>(
    container: Node<'a, 'i>,
    diag: &mut ParseDiagnostics,
    out: &mut Vec<Item<'a, 'i>>,
) {
    for el in elements(container) {
        let name = el.tag_name().name();
        if name == "Text" {
            push_line(out, node_text(el), false);
        } else if let Some(depth) = p_depth(name) {
            out.push(Item::Block { depth, node: el });
        } else if is_para_wrapper(name) || name == "P2group" || name == "P3group" {
            collect_items(el, diag, out);
        } else if name == "BlockAmendment" {
            flatten_text(el, true, out);
        } else if IGNORED.contains(&name) {
        } else {
            if !FLATTENED.contains(&name) {
                diag.tally(name);
            }
            flatten_text(el, false, out);
        }
    }
}

fn flatten_text(node: Node, amendment: bool, out: &mut Vec<Item>) {
    for t in node.descendants().filter(|n| is(n, "Text")) {
        push_line(out, node_text(t), amendment);
    }
}

fn push_line(out: &mut Vec<Item>, text: String, amendment: bool) {
    if !text.is_empty() {
        out.push(Item::Line { text, amendment });
    }
}

fn marker_of(node: Node) -> String {
    let n = pnumber(node);
    if n.is_empty() || n.starts_with('(') {
        n
    } else {
        format!("({n})")
    }
}

fn line(text: String, amendment: bool) -> Line {
    Line {
        text,
        ordinal: 0,
        amendment,
    }
}

/// Lines of a block and everything nested beneath it, in order.
fn all_lines(node: Node, diag: &mut ParseDiagnostics) -> Vec<Line> {
    let mut items = Vec::new();
    collect_items(node, diag, &mut items);
    let mut out = Vec::new();
    for item in items {
        match item {
            Item::Line { text, amendment } => out.push(line(text, amendment)),
            Item::Block { node, .. } => out.extend(all_lines(node, diag)),
        }
    }
    out
}

fn build_paragraph(
    node: Node,
    depth: u8,
    diag: &mut ParseDiagnostics,
) -> Result<Paragraph, String> {
    let mut items = Vec::new();
    collect_items(node, diag, &mut items);
    let last_block = items.iter().rposition(|i| matches!(i, Item::Block { .. }));
    let mut para = Paragraph {
        marker: marker_of(node),
        lines: Vec::new(),
        subparagraphs: Vec::new(),
        trailing: Vec::new(),
    };
    for (idx, item) in items.into_iter().enumerate() {
        match item {
            Item::Line { text, amendment } => {
                let l = line(text, amendment);
                match (para.subparagraphs.last_mut(), last_block) {
                    (None, _) => para.lines.push(l),
                    (Some(_), Some(last)) if idx > last => para.trailing.push(l),
                    (Some(sp), _) => sp.lines.push(l),
                }
            }
            Item::Block {
                depth: d,
                node: sub,
            } => {
                if d <= depth {
                    return Err(format!("P{d} nested inside P{depth} {}", para.marker));
                }
                para.subparagraphs.push(SubParagraph {
                    marker: marker_of(sub),
                    lines: all_lines(sub, diag),
                });
            }
        }
    }
    Ok(para)
}

fn build_subsection(
    marker: String,
    items: Vec<Item>,
    depth: u8,
    diag: &mut ParseDiagnostics,
) -> Result<SubSection, String> {
    let first_block = items.iter().position(|i| matches!(i, Item::Block { .. }));
    let last_block = items.iter().rposition(|i| matches!(i, Item::Block { .. }));
    let mut sub = SubSection {
        marker,
        intro: None,
        paragraphs: Vec::new(),
        lines: Vec::new(),
    };
    let mut lead: Vec<Line> = Vec::new();
    for (idx, item) in items.into_iter().enumerate() {
        match item {
            Item::Line { text, amendment } => {
                let l = line(text, amendment);
                match (first_block, last_block) {
                    (Some(first), _) if idx < first => lead.push(l),
                    (Some(_), Some(last)) if idx > last => sub.lines.push(l),
                    (Some(_), _) => sub
                        .paragraphs
                        .last_mut()
                        .expect("line between blocks follows a paragraph")
                        .trailing
                        .push(l),
                    (None, _) => sub.lines.push(l),
                }
            }
            Item::Block { depth: d, node } => {
                if d <= depth {
                    return Err(format!("P{d} nested inside P{depth} {}", sub.marker));
                }
                if sub.paragraphs.is_empty() && !lead.is_empty() {
                    let mut lead_iter = std::mem::take(&mut lead).into_iter();
                    sub.intro = lead_iter.next();
                    let rest: Vec<Line> = lead_iter.collect();
                    if !rest.is_empty() {
                        sub.paragraphs.push(Paragraph {
                            marker: String::new(),
                            lines: rest,
                            subparagraphs: Vec::new(),
                            trailing: Vec::new(),
                        });
                    }
                }
                sub.paragraphs.push(build_paragraph(node, d, diag)?);
            }
        }
    }
    Ok(sub)
}

/// Textual hierarchy of one `P1` element.
fn parse_p1(p1: Node, heading: &str, diag: &mut ParseDiagnostics) -> Result<Section, String> {
    let number = pnumber(p1);
    if number.is_empty() {
        return Err("section has no Pnumber".into());
    }
    let mut items = Vec::new();
    collect_items(p1, diag, &mut items);

    let mut section = Section {
        number: number.clone(),
        heading: heading.to_string(),
        subsections: Vec::new(),
        is_contentless: false,
    };
    let mut pending: Vec<Item> = Vec::new();
    for item in items {
        match item {
            Item::Block { depth: 2, node } => {
                if !pending.is_empty() {
                    let unnumbered =
                        build_subsection(String::new(), std::mem::take(&mut pending), 1, diag)?;
                    section.subsections.push(unnumbered);
                }
                let mut sub_items = Vec::new();
                collect_items(node, diag, &mut sub_items);
                section
                    .subsections
                    .push(build_subsection(marker_of(node), sub_items, 2, diag)?);
            }
            Item::Block { depth, node } if depth > 2 => {
                if section.subsections.is_empty() {
                    pending.push(Item::Block { depth, node });
                } else {
                    return Err(format!("P{depth} after subsections in section {number}"));
                }
            }
            Item::Block { depth, .. } => {
                return Err(format!("P{depth} nested inside section {number}"));
            }
            Item::Line { text, amendment } => match section.subsections.last_mut() {
                Some(last) if pending.is_empty() => last.lines.push(line(text, amendment)),
                _ => pending.push(Item::Line { text, amendment }),
            },
        }
    }
    if !pending.is_empty() {
        section
            .subsections
            .push(build_subsection(String::new(), pending, 1, diag)?);
    }

    let has_content = section
        .walk_lines()
        .any(|(_, l)| l.text.chars().any(char::is_alphanumeric));
    if !has_content {
        section.subsections.clear();
        section.is_contentless = true;
    }
    renumber(&mut section);
    check_markers(&section, diag);
    Ok(section)
}

fn number_lines<'a>(lines: impl Iterator<Item = &'a mut Line>) {
    for (i, l) in lines.enumerate() {
        l.ordinal = i;
    }
}

fn renumber(section: &mut Section) {
    for sub in &mut section.subsections {
        number_lines(sub.intro.iter_mut().chain(sub.lines.iter_mut()));
        for p in &mut sub.paragraphs {
            number_lines(p.lines.iter_mut().chain(p.trailing.iter_mut()));
            for sp in &mut p.subparagraphs {
                number_lines(sp.lines.iter_mut());
            }
        }
    }
}

fn check_markers(section: &Section, diag: &mut ParseDiagnostics) {
    let increasing = |keys: Vec<Option<(u8, u64)>>| keys.windows(2).all(|w| w[0] < w[1]);
    let subs: Vec<&str> = section
        .subsections
        .iter()
        .map(|s| s.marker.as_str())
        .collect();
    if !subs.windows(2).all(|w| label_cmp(w[0], w[1]).is_lt()) {
        diag.warnings.push(format!(
            "section {}: subsection markers out of order {:?}",
            section.number, subs
        ));
    }
    for sub in &section.subsections {
        let paras: Vec<_> = sub
            .paragraphs
            .iter()
            .filter(|p| !p.marker.is_empty())
            .map(|p| marker_rank(&p.marker))
            .collect();
        if !increasing(paras) {
            diag.warnings.push(format!(
                "section {}{}: paragraph markers out of order",
                section.number, sub.marker
            ));
        }
        for p in &sub.paragraphs {
            let subs: Vec<_> = p
                .subparagraphs
                .iter()
                .map(|sp| {
                    roman_rank(&sp.marker)
                        .map(|r| (1, r))
                        .or_else(|| marker_rank(&sp.marker))
                })
                .collect();
            if !increasing(subs) {
                diag.warnings.push(format!(
                    "section {}{}{}: subparagraph markers out of order",
                    section.number, sub.marker, p.marker
                ));
            }
        }
    }
}

fn p1_nodes<'a, 'i>(doc: &'a Document<'i>) -> Vec<Node<'a, 'i>> {
    match body_of(doc) {
        Some(body) => body
            .descendants()
            .filter(|n| is(n, "P1") && !inside_amendment(*n))
            .collect(),
        None => Vec::new(),
    }
}

fn inside_amendment(node: Node) -> bool {
    node.ancestors()
        .skip(1)
        .any(|a| is(&a, "BlockAmendment") || is(&a, "P1"))
}

fn heading_of(p1: Node) -> String {
    p1.parent()
        .filter(|p| is(p, "P1group"))
        .and_then(|g| child(g, "Title"))
        .map(node_text)
        .unwrap_or_default()
}

/// Textual hierarchy of the first section in a per-section XML file.
pub fn single_section(
    section_xml: &CachedResource,
) -> Result<(Section, ParseDiagnostics), ParseError> {
    let doc = parse_document(section_xml)?;
    let mut diag = ParseDiagnostics::default();
    let p1 = p1_nodes(&doc).into_iter().next().ok_or_else(|| {
        ParseError::UnrecognizedStructure(format!("{}: no P1 element", section_xml.uri))
    })?;
    let section =
        parse_p1(p1, &heading_of(p1), &mut diag).map_err(ParseError::UnrecognizedStructure)?;
    diag.sections_parsed = 1;
    Ok((section, diag))
}

/// One piece of a section as the source XML presents it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OriginalPiece {
    Marker(String),
    Text { text: String, amendment: bool },
}

/// Heading and document-order markers and text of a section, read straight
/// from the XML. With `label` the matching P1 is used, otherwise the first.
pub fn original_section(
    res: &CachedResource,
    label: Option<&str>,
) -> Result<Option<(String, Vec<OriginalPiece>)>, ParseError> {
    let doc = parse_document(res)?;
    let Some(p1) = p1_nodes(&doc)
        .into_iter()
        .find(|p| label.is_none_or(|l| pnumber(*p) == l))
    else {
        return Ok(None);
    };
    let mut pieces = Vec::new();
    for node in p1.descendants().skip(1) {
        let name = node.tag_name().name();
        let amended = node.ancestors().any(|a| is(&a, "BlockAmendment"));
        if p_depth(name).is_some() && !amended {
            let marker = marker_of(node);
            if !marker.is_empty() {
                pieces.push(OriginalPiece::Marker(marker));
            }
        } else if name == "Text" {
            let text = node_text(node);
            if !text.is_empty() {
                pieces.push(OriginalPiece::Text {
                    text,
                    amendment: amended,
                });
            }
        }
    }
    Ok(Some((heading_of(p1), pieces)))
}

/// Parsed sections, or the reason parsing failed, keyed by label.
pub type SectionResults = BTreeMap<String, Result<Section, String>>;

/// Parses every section found in a full-data file, keyed by label.
pub fn sections_from_full_data(
    full_data_xml: &CachedResource,
) -> Result<(SectionResults, ParseDiagnostics), ParseError> {
    let doc = parse_document(full_data_xml)?;
    let mut diag = ParseDiagnostics::default();
    let mut out = BTreeMap::new();
    for p1 in p1_nodes(&doc) {
        let label = pnumber(p1);
        let parsed = parse_p1(p1, &heading_of(p1), &mut diag);
        out.entry(label).or_insert(parsed);
    }
    Ok((out, diag))
}

/// Builds a complete model from a parsed skeleton plus section sources.
/// Per-section files are preferred; `fallback` supplies sections parsed out
/// of the full-data file when a per-section file is unavailable.
fn fill_sections(
    model: &mut ActModel,
    diag: &mut ParseDiagnostics,
    mut per_section: impl FnMut(&SectionRef) -> Option<Result<(Section, ParseDiagnostics), ParseError>>,
    fallback: &BTreeMap<String, Result<Section, String>>,
) {
    let refs: Vec<SectionRef> = model.section_refs().cloned().collect();
    let mut failed = Vec::new();
    for r in refs {
        if model.sections_by_number.contains_key(&r.number) {
            failed.push((r.number.clone(), "duplicate section label".to_string()));
            continue;
        }
        let outcome = match per_section(&r) {
            Some(Ok((section, d))) => {
                let mut d = d;
                d.sections_parsed = 0;
                diag.merge(d);
                Ok(section)
            }
            Some(Err(e)) => Err(e.to_string()),
            None => match fallback.get(&r.number) {
                Some(res) => res.clone(),
                None => Err("section not found in full-data XML".to_string()),
            },
        };
        match outcome {
            Ok(mut section) if section.number == r.number => {
                if section.heading.is_empty() {
                    section.heading = r.title.clone();
                }
                model.sections_by_number.insert(r.number.clone(), section);
            }
            Ok(section) => failed.push((
                r.number.clone(),
                format!("file holds section {}", section.number),
            )),
            Err(reason) => failed.push((r.number.clone(), reason)),
        }
    }
    diag.sections_parsed = model.sections_by_number.len();
    diag.merge(ParseDiagnostics {
        sections_failed: failed,
        ..Default::default()
    });
}

/// Parses an Act from already-loaded full-data XML only.
pub fn parse_full_data(
    full_data_xml: &CachedResource,
) -> Result<(ActModel, ParseDiagnostics), ParseError> {
    let (mut model, mut diag) = contents(full_data_xml)?;
    let (sections, section_diag) = sections_from_full_data(full_data_xml)?;
    diag.merge(section_diag);
    fill_sections(&mut model, &mut diag, |_| None, &sections);
    Ok((model, diag))
}

/// Full pipeline input stage: contents, then every section. Section-level
/// failures are recorded; only a failure on the full-data file aborts.
pub fn parse_act(
    act: &ActId,
    policy: FetchPolicy,
    fetcher: &mut Fetcher,
) -> Result<(ActModel, ParseDiagnostics), ParseError> {
    let full = fetcher.fetch(&ingest::act_data_url(act), policy)?;
    let (mut model, mut diag) = contents(&full)?;
    model.id = act.clone();
    let (fallback, section_diag) = sections_from_full_data(&full)?;
    diag.merge(section_diag);
    fill_sections(
        &mut model,
        &mut diag,
        |r| {
            let url = ingest::section_data_url(act, &r.number);
            // Per-section files are only used when already cached or when the
            // policy allows fetching them.
            let policy = if fetcher.cache().contains(&url) {
                FetchPolicy::FixtureOnly
            } else {
                policy
            };
            if policy == FetchPolicy::FixtureOnly && !fetcher.cache().contains(&url) {
                return None;
            }
            match fetcher.fetch(&url, policy) {
                Ok(res) => Some(single_section(&res)),
                Err(e) => {
                    log::warn!("section {}: {e}; using full-data XML", r.number);
                    None
                }
            }
        },
        &fallback,
    );
    Ok((model, diag))
}
