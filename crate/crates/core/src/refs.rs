//! Cross-reference extraction.
//!
//! Line-level scanners are pure functions of the line text. Section-level
//! results are plain aggregations of the line-level ones, and
//! [`extract_all`] aggregates those across an Act.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{label_cmp, ActModel, Line, Section};

/// `section 12`, `sections 28 and 40`, `sections 81 to 85`,
/// `section 138(2B)`, `sections 155A, 155B or 156(1)(a)`.
static SECTION_GROUP: LazyLock<Regex> = LazyLock::new(|| {
    let item = r"\d+[A-Z]{0,3}(?:\([0-9A-Za-z]{1,6}\))*";
    Regex::new(&format!(
        r"\b[Ss]ections?\s+{item}(?:(?:\s*,\s*|\s*,?\s+(?:and|or)\s+|\s+to\s+){item})*"
    ))
    .unwrap()
});

static ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?P<label>\d+[A-Z]{0,3})(?P<qual>(?:\([0-9A-Za-z]{1,6}\))*)").unwrap()
});

static RANGE_JOIN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s+to\s+$").unwrap());

/// `of the Housing Act 1985`, `of that Act`, `of the 1985 Act` directly after
/// a section group: the group cites another Act.
static EXTERNAL_TAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^\s*of\s+(?:the|that)\s+(?:(?:[A-Z0-9(][\w()'-]*|and|of|for|from|in|on|to|with),?\s+)*Act\b",
    )
    .unwrap()
});

static ACT_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bAct (\d{4})\b").unwrap());

const CONNECTORS: &[&str] = &[
    "and", "of", "for", "from", "in", "on", "to", "with", "by", "under",
];

/// Capitalised words that open a sentence or clause rather than a title.
const LEADING_NOISE: &[&str] = &[
    "The",
    "In",
    "For",
    "Where",
    "If",
    "Under",
    "See",
    "By",
    "After",
    "Before",
    "Omit",
    "Insert",
    "And",
    "Or",
    "Nothing",
    "Section",
    "Sections",
    "Part",
    "Chapter",
    "Schedule",
    "Subsection",
    "Paragraph",
    "This",
    "That",
    "Any",
    "Each",
    "Every",
    "An",
    "A",
    "As",
    "To",
    "From",
    "With",
    "Of",
    "On",
    "At",
    "Subject",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Also emit every label strictly between the endpoints of a numeric
    /// range such as `sections 81 to 85`.
    pub expand_ranges: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActTitle {
    pub name: String,
    pub year: i32,
}

impl ActTitle {
    pub fn parse(name: &str) -> Option<Self> {
        let name = name.trim();
        let year = name.rsplit(' ').next()?.parse().ok()?;
        Some(ActTitle {
            name: name.to_string(),
            year,
        })
    }
}

impl fmt::Display for ActTitle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// One explicit section label inside a line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionMention {
    pub label: String,
    /// Label plus any subsection qualifier, e.g. `138(2B)`.
    pub raw: String,
    /// Byte span of `raw` within the line. `None` for labels synthesised by
    /// range expansion.
    pub span: Option<Range<usize>>,
}

/// An Act title found in a line, with the sections of it cited right before
/// the title (`section 265 of the Housing Act 1985`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActMention {
    pub title: ActTitle,
    pub span: Range<usize>,
    pub cited_sections: Vec<SectionMention>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRefs {
    pub inbound: Vec<SectionMention>,
    pub outbound: Vec<ActMention>,
    /// Section groups citing another Act that could not be named from the
    /// line alone (`section 5 of that Act`).
    pub unresolved_external: Vec<SectionMention>,
}

fn group_mentions(text: &str, group: Range<usize>, opts: ExtractOptions) -> Vec<SectionMention> {
    let slice = &text[group.clone()];
    let mut out: Vec<SectionMention> = Vec::new();
    let mut prev_end: Option<usize> = None;
    // Skip the leading `section(s)` keyword.
    let body_start = slice
        .find(|c: char| c.is_ascii_digit())
        .unwrap_or(slice.len());
    for m in ITEM.captures_iter(&slice[body_start..]) {
        let whole = m.get(0).unwrap();
        let start = group.start + body_start + whole.start();
        let end = group.start + body_start + whole.end();
        let label = m["label"].to_string();
        if let (Some(pe), Some(last)) = (prev_end, out.last()) {
            if opts.expand_ranges && RANGE_JOIN.is_match(&text[pe..start]) {
                if let (Ok(lo), Ok(hi)) = (last.label.parse::<u64>(), label.parse::<u64>()) {
                    let expanded: Vec<SectionMention> = (lo + 1..hi)
                        .map(|n| SectionMention {
                            label: n.to_string(),
                            raw: n.to_string(),
                            span: None,
                        })
                        .collect();
                    out.extend(expanded);
                }
            }
        }
        out.push(SectionMention {
            label,
            raw: whole.as_str().to_string(),
            span: Some(start..end),
        });
        prev_end = Some(end);
    }
    out
}

fn strip_token(tok: &str) -> &str {
    tok.trim_matches(|c: char| matches!(c, '(' | ')' | ',' | '“' | '”' | '"' | '‘' | '’'))
}

fn is_capitalised(tok: &str) -> bool {
    strip_token(tok)
        .chars()
        .next()
        .is_some_and(char::is_uppercase)
}

/// Start byte of the title that ends with the `Act` keyword at `act_start`.
fn title_start(text: &str, act_start: usize) -> Option<usize> {
    let before = &text[..act_start];
    let tokens: Vec<(usize, &str)> = before
        .split_whitespace()
        .map(|t| (t.as_ptr() as usize - before.as_ptr() as usize, t))
        .collect();
    let mut start: Option<usize> = None;
    let mut i = tokens.len();
    while i > 0 {
        let (pos, tok) = tokens[i - 1];
        let bare = strip_token(tok);
        if bare.is_empty() || bare.chars().any(|c| c.is_ascii_digit()) {
            break;
        }
        if tok.ends_with([';', ':', '.', '—', '–']) {
            break;
        }
        if tok.ends_with(',') && !(is_capitalised(tok) && start.is_some()) {
            break;
        }
        if bare == "the" {
            // `Representation of the People`: keep `the` only between a
            // capitalised word + `of` and the rest of the title.
            let of = i >= 2 && strip_token(tokens[i - 2].1) == "of";
            let cap = i >= 3
                && is_capitalised(tokens[i - 3].1)
                && !LEADING_NOISE.contains(&strip_token(tokens[i - 3].1));
            if of && cap && start.is_some() {
                start = Some(pos);
                i -= 1;
                continue;
            }
            break;
        }
        if is_capitalised(tok) || CONNECTORS.contains(&bare) {
            start = Some(pos);
            i -= 1;
            continue;
        }
        break;
    }
    // Trim leading connectors and clause openers.
    let mut start = start?;
    loop {
        let rest = &text[start..act_start];
        let first = rest.split_whitespace().next()?;
        let bare = strip_token(first);
        if CONNECTORS.contains(&bare) || bare == "the" || LEADING_NOISE.contains(&bare) {
            let skip = rest.find(first).unwrap() + first.len();
            start += skip;
            start += text[start..].len() - text[start..].trim_start().len();
            if start >= act_start {
                return None;
            }
        } else {
            break;
        }
    }
    Some(start)
}

/// Act titles mentioned in a line, in order of appearance, without any
/// leading article.
pub fn acts_in_single_line(line: &Line) -> Vec<ActTitle> {
    scan_acts(&line.text).into_iter().map(|(t, _)| t).collect()
}

fn scan_acts(text: &str) -> Vec<(ActTitle, Range<usize>)> {
    ACT_YEAR
        .captures_iter(text)
        .filter_map(|cap| {
            let whole = cap.get(0).unwrap();
            let start = title_start(text, whole.start())?;
            let name = text[start..whole.end()].trim_start_matches(['(', '“', '"', '‘']);
            let name = name.split_whitespace().collect::<Vec<_>>().join(" ");
            let title = ActTitle {
                name,
                year: cap[1].parse().ok()?,
            };
            Some((title, start..whole.end()))
        })
        .collect()
}

/// Every reference in one line of text.
pub fn scan_line(text: &str, opts: ExtractOptions) -> LineRefs {
    let acts = scan_acts(text);
    let mut refs = LineRefs {
        outbound: acts
            .iter()
            .map(|(title, span)| ActMention {
                title: title.clone(),
                span: span.clone(),
                cited_sections: Vec::new(),
            })
            .collect(),
        ..Default::default()
    };
    for group in SECTION_GROUP.find_iter(text) {
        let mentions = group_mentions(text, group.range(), opts);
        let tail = &text[group.end()..];
        match EXTERNAL_TAIL.find(tail) {
            Some(ext) => {
                let ext_end = group.end() + ext.end();
                // The named Act, if any, is the one whose title ends at `Act`.
                let target = refs.outbound.iter_mut().find(|a| {
                    a.span.start >= group.end()
                        && a.span.start < ext_end + 5
                        && a.span.end >= ext_end
                });
                match target {
                    Some(act) => act.cited_sections.extend(mentions),
                    None => refs.unresolved_external.extend(mentions),
                }
            }
            None => refs.inbound.extend(mentions),
        }
    }
    refs
}

/// Section labels of this Act named in a line, in order of appearance.
pub fn ref_in_single_line(line: &Line) -> Vec<String> {
    ref_in_single_line_with(line, ExtractOptions::default())
}

pub fn ref_in_single_line_with(line: &Line, opts: ExtractOptions) -> Vec<String> {
    scan_line(&line.text, opts)
        .inbound
        .into_iter()
        .map(|m| m.label)
        .collect()
}

/// Mention counts per referenced section label.
pub fn ref_in_section(section: &Section) -> BTreeMap<String, usize> {
    ref_in_section_with(section, ExtractOptions::default())
}

pub fn ref_in_section_with(section: &Section, opts: ExtractOptions) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for (_, line) in section.walk_lines() {
        for label in ref_in_single_line_with(line, opts) {
            *counts.entry(label).or_default() += 1;
        }
    }
    counts
}

/// Mention counts per external Act. Mentions of `host_title` are dropped.
pub fn acts_in_section(section: &Section, host_title: &str) -> BTreeMap<ActTitle, usize> {
    let mut counts = BTreeMap::new();
    for (_, line) in section.walk_lines() {
        for title in acts_in_single_line(line) {
            if title.name != host_title {
                *counts.entry(title).or_default() += 1;
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    Inbound,
    Outbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub from_section: String,
    pub kind: RefKind,
    /// Section label (inbound) or Act title (outbound).
    pub target: String,
    pub count: usize,
    /// Inbound record whose target is its own section.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub self_reference: bool,
    /// Matched text per mention, e.g. `270(5)(c)`; empty entries for labels
    /// produced by range expansion.
    pub raw_spans: Vec<String>,
}

fn record_order(a: &ReferenceRecord, b: &ReferenceRecord) -> std::cmp::Ordering {
    label_cmp(&a.from_section, &b.from_section)
        .then(a.kind.cmp(&b.kind))
        .then_with(|| match a.kind {
            RefKind::Inbound => label_cmp(&a.target, &b.target),
            RefKind::Outbound => a.target.cmp(&b.target),
        })
}

/// Reference records of one section.
pub fn section_records(
    section: &Section,
    host_title: &str,
    opts: ExtractOptions,
) -> Vec<ReferenceRecord> {
    let mut inbound: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut outbound: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (_, line) in section.walk_lines() {
        let refs = scan_line(&line.text, opts);
        for m in refs.inbound {
            inbound
                .entry(m.label)
                .or_default()
                .push(if m.span.is_some() {
                    m.raw
                } else {
                    String::new()
                });
        }
        for a in refs.outbound {
            if a.title.name != host_title {
                outbound
                    .entry(a.title.name.clone())
                    .or_default()
                    .push(line.text[a.span].to_string());
            }
        }
    }
    let mut out: Vec<ReferenceRecord> = inbound
        .into_iter()
        .map(|(target, raw_spans)| ReferenceRecord {
            self_reference: target == section.number,
            from_section: section.number.clone(),
            kind: RefKind::Inbound,
            count: raw_spans.len(),
            target,
            raw_spans,
        })
        .chain(
            outbound
                .into_iter()
                .map(|(target, raw_spans)| ReferenceRecord {
                    from_section: section.number.clone(),
                    kind: RefKind::Outbound,
                    count: raw_spans.len(),
                    self_reference: false,
                    target,
                    raw_spans,
                }),
        )
        .collect();
    out.sort_by(record_order);
    out
}

/// Inbound and outbound records for every parsed section of the Act, sorted
/// by (from_section, kind, target).
pub fn extract_all(model: &ActModel, opts: ExtractOptions) -> Vec<ReferenceRecord> {
    let mut out: Vec<ReferenceRecord> = model
        .sections_by_number
        .values()
        .flat_map(|s| section_records(s, &model.title, opts))
        .collect();
    out.sort_by(record_order);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingRef {
    pub from_section: String,
    pub target: String,
    pub count: usize,
}

/// Inbound records whose target is not a parsed section of the Act.
pub fn dangling_references(model: &ActModel, records: &[ReferenceRecord]) -> Vec<DanglingRef> {
    records
        .iter()
        .filter(|r| r.kind == RefKind::Inbound && !model.sections_by_number.contains_key(&r.target))
        .map(|r| DanglingRef {
            from_section: r.from_section.clone(),
            target: r.target.clone(),
            count: r.count,
        })
        .collect()
}

/// Chapter numbers of Acts cited by the fixture corpus, for linking external
/// nodes to their legislation pages.
pub fn known_act_path(name: &str) -> Option<&'static str> {
    Some(match name {
        "Housing Act 1985" => "ukpga/1985/68",
        "Housing Act 1988" => "ukpga/1988/50",
        "Housing Act 1996" => "ukpga/1996/52",
        "Housing and Regeneration Act 2008" => "ukpga/2008/17",
        "Housing and Planning Act 2016" => "ukpga/2016/22",
        "Housing Act 2004" => "ukpga/2004/34",
        "Landlord and Tenant Act 1985" => "ukpga/1985/70",
        "Protection from Eviction Act 1977" => "ukpga/1977/43",
        "Rent Act 1977" => "ukpga/1977/42",
        "Local Government and Housing Act 1989" => "ukpga/1989/42",
        "Town and Country Planning Act 1990" => "ukpga/1990/8",
        "Environmental Protection Act 1990" => "ukpga/1990/43",
        "Building Act 1984" => "ukpga/1984/55",
        "Interpretation Act 1978" => "ukpga/1978/30",
        "Localism Act 2011" => "ukpga/2011/20",
        _ => return None,
    })
}
