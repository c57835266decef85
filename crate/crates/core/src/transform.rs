//! Serialized outputs: weighted citation graphs, the nested table of
//! contents and one hyperlinked HTML fragment per section.
//!
//! Everything here is a pure function of the model and the extracted
//! records, and every emitted file is byte-stable for a given input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ActId, LEGISLATION_BASE};
use crate::model::{ActModel, CrossHeading, Line, Part, PartChild, Section};
use crate::refs::{self, known_act_path, ExtractOptions, RefKind, ReferenceRecord};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("graph document {path} is invalid: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    Inbound,
    Outbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub label: String,
    pub group: String,
    #[serde(rename = "nodeSize")]
    pub node_size: usize,
    pub url: String,
    /// Palette slot of an external Act node, by first appearance.
    #[serde(
        rename = "colorIndex",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub color_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphLink {
    pub source: String,
    pub target: String,
    pub thick: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub mode: GraphMode,
    pub nodes: Vec<GraphNode>,
    pub links: Vec<GraphLink>,
}

pub const EXTERNAL_GROUP: &str = "external";

pub fn section_node_id(label: &str) -> String {
    format!("s{label}")
}

pub fn act_node_id(title: &str) -> String {
    format!("a:{title}")
}

/// Legislation page of an external Act, or a title search when the Act is
/// not in the lookup table.
pub fn external_act_url(title: &str) -> String {
    match known_act_path(title) {
        Some(path) => format!("{LEGISLATION_BASE}/{path}"),
        None => {
            let query: String = url::form_urlencoded::byte_serialize(title.as_bytes()).collect();
            format!("{LEGISLATION_BASE}/primary?title={query}")
        }
    }
}

fn part_group(part: &Part) -> String {
    if part.label.is_empty() {
        "body".to_string()
    } else {
        part.label.clone()
    }
}

fn sort_graph(graph: &mut GraphDocument) {
    graph.nodes.sort_by(|a, b| a.id.cmp(&b.id));
    graph.links.sort();
}

/// Section nodes that can carry edges: every parsed section with content.
fn section_nodes(model: &ActModel) -> Vec<GraphNode> {
    model
        .sections_in_order()
        .filter(|(_, s)| !s.is_contentless)
        .map(|(part, s)| GraphNode {
            id: section_node_id(&s.number),
            label: s.number.clone(),
            group: part_group(part),
            node_size: 0,
            url: model.id.section_page_url(&s.number),
            color_index: None,
        })
        .collect()
}

fn apply_node_sizes(graph: &mut GraphDocument) {
    let mut incoming: BTreeMap<&str, usize> = BTreeMap::new();
    for link in &graph.links {
        *incoming.entry(link.target.as_str()).or_default() += link.thick;
    }
    for node in &mut graph.nodes {
        node.node_size = incoming.get(node.id.as_str()).copied().unwrap_or(0);
    }
}

/// Section-to-section graph. Links to sections that are not nodes
/// (unparsed, content-less or nonexistent) are dropped with a warning.
pub fn build_inbound_graph(model: &ActModel, records: &[ReferenceRecord]) -> GraphDocument {
    let nodes = section_nodes(model);
    let ids: BTreeSet<&str> = nodes.iter().map(|n| n.id.as_str()).collect();
    let mut merged: BTreeMap<(String, String), usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == RefKind::Inbound) {
        let source = section_node_id(&r.from_section);
        let target = section_node_id(&r.target);
        if !ids.contains(source.as_str()) || !ids.contains(target.as_str()) {
            log::warn!("dropping inbound link {source} -> {target}: endpoint is not a graph node");
            continue;
        }
        *merged.entry((source, target)).or_default() += r.count;
    }
    let mut graph = GraphDocument {
        mode: GraphMode::Inbound,
        nodes,
        links: merged
            .into_iter()
            .map(|((source, target), thick)| GraphLink {
                source,
                target,
                thick,
            })
            .collect(),
    };
    apply_node_sizes(&mut graph);
    sort_graph(&mut graph);
    graph
}

/// External Act titles in order of first mention, walking the Act in
/// table-of-contents order.
pub fn external_acts_in_order(model: &ActModel) -> Vec<String> {
    let mut seen = Vec::new();
    for (_, section) in model.sections_in_order() {
        for (_, line) in section.walk_lines() {
            for title in refs::acts_in_single_line(line) {
                if title.name != model.title && !seen.contains(&title.name) {
                    seen.push(title.name);
                }
            }
        }
    }
    seen
}

/// The inbound graph plus one node per external Act and one link per
/// (section, Act) pair.
pub fn build_outbound_graph(model: &ActModel, records: &[ReferenceRecord]) -> GraphDocument {
    let inbound = build_inbound_graph(model, records);
    let section_ids: BTreeSet<&str> = inbound.nodes.iter().map(|n| n.id.as_str()).collect();
    let mut act_links: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut acts: BTreeSet<String> = BTreeSet::new();
    for r in records.iter().filter(|r| r.kind == RefKind::Outbound) {
        let source = section_node_id(&r.from_section);
        if !section_ids.contains(source.as_str()) {
            log::warn!("dropping outbound link from {source}: not a graph node");
            continue;
        }
        acts.insert(r.target.clone());
        *act_links
            .entry((source, act_node_id(&r.target)))
            .or_default() += r.count;
    }
    let palette: BTreeMap<String, usize> = external_acts_in_order(model)
        .into_iter()
        .filter(|t| acts.contains(t))
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let mut graph = inbound;
    graph.mode = GraphMode::Outbound;
    let section_sizes: BTreeMap<String, usize> = graph
        .nodes
        .iter()
        .map(|n| (n.id.clone(), n.node_size))
        .collect();
    for title in &acts {
        graph.nodes.push(GraphNode {
            id: act_node_id(title),
            label: title.clone(),
            group: EXTERNAL_GROUP.to_string(),
            node_size: 0,
            url: external_act_url(title),
            color_index: palette.get(title).copied().or(Some(palette.len())),
        });
    }
    graph.links.extend(
        act_links
            .into_iter()
            .map(|((source, target), thick)| GraphLink {
                source,
                target,
                thick,
            }),
    );
    apply_node_sizes(&mut graph);
    // Section nodes keep their inbound-only size so that inbound ⊆ outbound.
    for node in &mut graph.nodes {
        if let Some(size) = section_sizes.get(&node.id) {
            node.node_size = *size;
        }
    }
    sort_graph(&mut graph);
    graph
}

/// Writes a graph document as UTF-8 JSON with sorted arrays.
pub fn emit(graph: &GraphDocument, path: &Path) -> Result<(), TransformError> {
    let mut sorted = graph.clone();
    sort_graph(&mut sorted);
    let mut body = serde_json::to_string_pretty(&sorted).expect("graph serializes");
    body.push('\n');
    write_file(path, body.as_bytes())
}

pub fn load_graph(path: &Path) -> Result<GraphDocument, TransformError> {
    let bytes = fs::read(path).map_err(|source| TransformError::Io {
        path: path.into(),
        source,
    })?;
    let graph: GraphDocument =
        serde_json::from_slice(&bytes).map_err(|e| TransformError::Invalid {
            path: path.into(),
            reason: e.to_string(),
        })?;
    validate_graph(&graph).map_err(|reason| TransformError::Invalid {
        path: path.into(),
        reason,
    })?;
    Ok(graph)
}

/// Node ids unique, link endpoints present, thick positive.
pub fn validate_graph(graph: &GraphDocument) -> Result<(), String> {
    let mut ids = BTreeSet::new();
    for n in &graph.nodes {
        if !ids.insert(n.id.as_str()) {
            return Err(format!("duplicate node id {}", n.id));
        }
    }
    for l in &graph.links {
        if !ids.contains(l.source.as_str()) || !ids.contains(l.target.as_str()) {
            return Err(format!(
                "link {} -> {} has a missing endpoint",
                l.source, l.target
            ));
        }
        if l.thick == 0 {
            return Err(format!(
                "link {} -> {} has zero thickness",
                l.source, l.target
            ));
        }
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), TransformError> {
    let io_err = |source| TransformError::Io {
        path: path.into(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    fs::write(path, bytes).map_err(io_err)
}

// ---------------------------------------------------------------------------
// HTML

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Nested ordered list Part → Chapter → cross-heading → section. Sections
/// that are graph nodes link to their anchor; the rest are plain text.
pub fn div_nav(model: &ActModel) -> String {
    let mut html = String::from("<ol class=\"toc\">");
    for part in &model.parts {
        html.push_str("<li class=\"toc-part\">");
        if !part.label.is_empty() {
            let _ = write!(
                html,
                "<span class=\"toc-label\">Part {}</span> <span class=\"toc-title\">{}</span>",
                escape_html(&part.label),
                escape_html(&part.title)
            );
        }
        html.push_str("<ol>");
        for child in &part.children {
            match child {
                PartChild::Chapter(ch) => {
                    let _ = write!(
                        html,
                        "<li class=\"toc-chapter\"><span class=\"toc-label\">Chapter {}</span> <span class=\"toc-title\">{}</span><ol>",
                        escape_html(&ch.label),
                        escape_html(&ch.title)
                    );
                    for xh in &ch.crossheadings {
                        toc_crossheading(&mut html, model, xh);
                    }
                    html.push_str("</ol></li>");
                }
                PartChild::CrossHeading(xh) => toc_crossheading(&mut html, model, xh),
            }
        }
        html.push_str("</ol></li>");
    }
    html.push_str("</ol>\n");
    html
}

fn toc_crossheading(html: &mut String, model: &ActModel, xh: &CrossHeading) {
    html.push_str("<li class=\"toc-crossheading\">");
    if !xh.title.is_empty() {
        let _ = write!(
            html,
            "<em class=\"toc-title\">{}</em>",
            escape_html(&xh.title)
        );
    }
    html.push_str("<ol>");
    for r in &xh.section_refs {
        let text = format!("{} {}", escape_html(&r.number), escape_html(&r.title));
        match model.sections_by_number.get(&r.number) {
            Some(s) if !s.is_contentless => {
                let id = section_node_id(&r.number);
                let _ = write!(
                    html,
                    "<li class=\"toc-section\"><a href=\"#{id}\" data-section=\"{id}\">{text}</a></li>"
                );
            }
            _ => {
                let _ = write!(
                    html,
                    "<li class=\"toc-section contentless\"><span>{text}</span></li>"
                );
            }
        }
    }
    html.push_str("</ol></li>");
}

/// What a fragment needs to know about the rest of the Act to link.
#[derive(Debug, Clone)]
pub struct LinkContext {
    pub act: ActId,
    pub host_title: String,
    /// Section labels that are graph nodes.
    pub linkable: BTreeSet<String>,
    pub options: ExtractOptions,
}

impl LinkContext {
    pub fn new(model: &ActModel) -> Self {
        LinkContext {
            act: model.id.clone(),
            host_title: model.title.clone(),
            linkable: model
                .sections_by_number
                .values()
                .filter(|s| !s.is_contentless)
                .map(|s| s.number.clone())
                .collect(),
            options: ExtractOptions::default(),
        }
    }
}

fn render_line(line: &Line, ctx: &LinkContext) -> String {
    let text = &line.text;
    let refs = refs::scan_line(text, ctx.options);
    let mut spans: Vec<(usize, usize, String)> = Vec::new();
    for m in &refs.inbound {
        let Some(span) = m.span.clone() else { continue };
        let raw = escape_html(&text[span.clone()]);
        let anchor = if ctx.linkable.contains(&m.label) {
            let id = section_node_id(&m.label);
            format!("<a class=\"ref inbound\" href=\"#{id}\" data-section=\"{id}\">{raw}</a>")
        } else {
            format!(
                "<a class=\"ref inbound dangling\" href=\"{}\">{raw}</a>",
                escape_html(&ctx.act.section_page_url(&m.label))
            )
        };
        spans.push((span.start, span.end, anchor));
    }
    for act in &refs.outbound {
        let title = &act.title.name;
        if *title == ctx.host_title {
            continue;
        }
        let base = external_act_url(title);
        for cited in &act.cited_sections {
            let Some(span) = cited.span.clone() else {
                continue;
            };
            let href = match known_act_path(title) {
                Some(_) => format!("{base}/section/{}", cited.label),
                None => base.clone(),
            };
            spans.push((
                span.start,
                span.end,
                format!(
                    "<a class=\"ref outbound-section\" href=\"{}\" data-act=\"{}\" data-section=\"{}\">{}</a>",
                    escape_html(&href),
                    escape_html(title),
                    escape_html(&cited.label),
                    escape_html(&text[span])
                ),
            ));
        }
        spans.push((
            act.span.start,
            act.span.end,
            format!(
                "<a class=\"ref outbound\" href=\"{}\" data-act=\"{}\">{}</a>",
                escape_html(&base),
                escape_html(title),
                escape_html(&text[act.span.clone()])
            ),
        ));
    }
    spans.sort_by_key(|s| s.0);
    let mut out = String::new();
    let mut pos = 0;
    for (start, end, html) in spans {
        if start < pos {
            continue;
        }
        out.push_str(&escape_html(&text[pos..start]));
        out.push_str(&html);
        pos = end;
    }
    out.push_str(&escape_html(&text[pos..]));
    let class = if line.amendment {
        "line amendment"
    } else {
        "line"
    };
    format!("<p class=\"{class}\">{out}</p>")
}

fn marker_span(marker: &str) -> String {
    if marker.is_empty() {
        String::new()
    } else {
        format!("<span class=\"marker\">{}</span>", escape_html(marker))
    }
}

/// One section as an HTML fragment with hyperlinked references.
pub fn html_single_section(section: &Section, ctx: &LinkContext) -> String {
    let mut html = String::new();
    let _ = write!(
        html,
        "<article class=\"section\" data-section=\"{}\"><h2 class=\"section-heading\"><span class=\"section-number\">{}</span> {}</h2>",
        escape_html(&section_node_id(&section.number)),
        escape_html(&section.number),
        escape_html(&section.heading)
    );
    if section.is_contentless || section.subsections.is_empty() {
        html.push_str("<p class=\"no-content\">No content</p></article>\n");
        return html;
    }
    for sub in &section.subsections {
        let _ = write!(
            html,
            "<div class=\"subsection\">{}",
            marker_span(&sub.marker)
        );
        if let Some(intro) = &sub.intro {
            html.push_str(&render_line(intro, ctx));
        }
        if !sub.paragraphs.is_empty() {
            html.push_str("<ol class=\"paragraphs\">");
            for p in &sub.paragraphs {
                let _ = write!(html, "<li class=\"paragraph\">{}", marker_span(&p.marker));
                for l in &p.lines {
                    html.push_str(&render_line(l, ctx));
                }
                if !p.subparagraphs.is_empty() {
                    html.push_str("<ol class=\"subparagraphs\">");
                    for sp in &p.subparagraphs {
                        let _ = write!(
                            html,
                            "<li class=\"subparagraph\">{}",
                            marker_span(&sp.marker)
                        );
                        for l in &sp.lines {
                            html.push_str(&render_line(l, ctx));
                        }
                        html.push_str("</li>");
                    }
                    html.push_str("</ol>");
                }
                for l in &p.trailing {
                    html.push_str(&render_line(l, ctx));
                }
                html.push_str("</li>");
            }
            html.push_str("</ol>");
        }
        for l in &sub.lines {
            html.push_str(&render_line(l, ctx));
        }
        html.push_str("</div>");
    }
    html.push_str("</article>\n");
    html
}

// ---------------------------------------------------------------------------
// Artifact directory

/// Counts and dropped edges recorded next to the emitted graphs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionLog {
    pub act: String,
    pub title: String,
    pub sections_total: usize,
    pub sections_contentless: usize,
    pub inbound_nodes: usize,
    /// Distinct (source, target) pairs.
    pub inbound_links: usize,
    /// Raw mention total behind the inbound links.
    pub inbound_mentions: usize,
    pub outbound_nodes: usize,
    pub outbound_links: usize,
    pub external_acts: usize,
    pub self_references: Vec<String>,
    /// `from -> target (count)` for inbound mentions that did not become
    /// links.
    pub dropped_links: Vec<String>,
}

pub fn emission_log(
    model: &ActModel,
    records: &[ReferenceRecord],
    inbound: &GraphDocument,
    outbound: &GraphDocument,
) -> EmissionLog {
    let node_ids: BTreeSet<&str> = inbound.nodes.iter().map(|n| n.id.as_str()).collect();
    EmissionLog {
        act: model.id.path(),
        title: model.title.clone(),
        sections_total: model.sections_by_number.len(),
        sections_contentless: model
            .sections_by_number
            .values()
            .filter(|s| s.is_contentless)
            .count(),
        inbound_nodes: inbound.nodes.len(),
        inbound_links: inbound.links.len(),
        inbound_mentions: inbound.links.iter().map(|l| l.thick).sum(),
        outbound_nodes: outbound.nodes.len(),
        outbound_links: outbound.links.len(),
        external_acts: outbound
            .nodes
            .iter()
            .filter(|n| n.group == EXTERNAL_GROUP)
            .count(),
        self_references: records
            .iter()
            .filter(|r| r.self_reference)
            .map(|r| format!("{} ({})", r.from_section, r.count))
            .collect(),
        dropped_links: records
            .iter()
            .filter(|r| r.kind == RefKind::Inbound)
            .filter(|r| {
                !node_ids.contains(section_node_id(&r.from_section).as_str())
                    || !node_ids.contains(section_node_id(&r.target).as_str())
            })
            .map(|r| format!("{} -> {} ({})", r.from_section, r.target, r.count))
            .collect(),
    }
}

pub const INBOUND_FILE: &str = "inbound.json";
pub const OUTBOUND_FILE: &str = "outbound.json";
pub const TOC_FILE: &str = "toc.html";
pub const SECTIONS_DIR: &str = "sections";
pub const LOG_FILE: &str = "emission-log.json";

#[derive(Debug, Clone)]
pub struct Artifacts {
    pub inbound: GraphDocument,
    pub outbound: GraphDocument,
    pub log: EmissionLog,
    pub fragments_written: usize,
}

/// Writes every artifact for one Act into `out_dir`.
pub fn emit_site(
    model: &ActModel,
    records: &[ReferenceRecord],
    options: ExtractOptions,
    out_dir: &Path,
) -> Result<Artifacts, TransformError> {
    let inbound = build_inbound_graph(model, records);
    let outbound = build_outbound_graph(model, records);
    emit(&inbound, &out_dir.join(INBOUND_FILE))?;
    emit(&outbound, &out_dir.join(OUTBOUND_FILE))?;
    write_file(&out_dir.join(TOC_FILE), div_nav(model).as_bytes())?;
    let mut ctx = LinkContext::new(model);
    ctx.options = options;
    let sections_dir = out_dir.join(SECTIONS_DIR);
    for section in model.sections_by_number.values() {
        let path = sections_dir.join(format!("{}.html", section_node_id(&section.number)));
        write_file(&path, html_single_section(section, &ctx).as_bytes())?;
    }
    let log = emission_log(model, records, &inbound, &outbound);
    let mut body = serde_json::to_string_pretty(&log).expect("log serializes");
    body.push('\n');
    write_file(&out_dir.join(LOG_FILE), body.as_bytes())?;
    Ok(Artifacts {
        inbound,
        outbound,
        log,
        fragments_written: model.sections_by_number.len(),
    })
}
