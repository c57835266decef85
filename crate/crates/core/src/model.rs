//! In-memory model of one Act.
//!
//! Two hierarchies are stacked on top of each other. The legal hierarchy
//! (Parts, Chapters, cross-headings) comes from the table of contents and
//! only carries [`SectionRef`] stubs. The textual hierarchy lives inside each
//! [`Section`]: subsections, paragraphs, subparagraphs and finally lines.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::ActId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActModel {
    pub id: ActId,
    pub title: String,
    pub parts: Vec<Part>,
    /// Keyed by section label. Sections whose parse failed are absent.
    pub sections_by_number: BTreeMap<String, Section>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Part {
    pub label: String,
    pub title: String,
    pub children: Vec<PartChild>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartChild {
    Chapter(Chapter),
    CrossHeading(CrossHeading),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub label: String,
    pub title: String,
    pub crossheadings: Vec<CrossHeading>,
}

/// Unnumbered group title above a run of sections. Sections that sit
/// directly under a Part or Chapter are collected under a cross-heading
/// with an empty title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossHeading {
    pub title: String,
    pub section_refs: Vec<SectionRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionRef {
    pub number: String,
    pub title: String,
    pub document_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub number: String,
    pub heading: String,
    pub subsections: Vec<SubSection>,
    pub is_contentless: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSection {
    /// `"(1)"`, or empty for an unnumbered section body.
    pub marker: String,
    /// Lead-in line before the first paragraph.
    pub intro: Option<Line>,
    pub paragraphs: Vec<Paragraph>,
    /// Free text: the whole body when there are no paragraphs, otherwise
    /// the closing words after the last paragraph.
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    /// `"(a)"`. Empty for a run of unlettered text between the intro and
    /// the first lettered paragraph.
    pub marker: String,
    pub lines: Vec<Line>,
    pub subparagraphs: Vec<SubParagraph>,
    /// Text following the last subparagraph, or standalone conjunctions
    /// ("and", "or") that sit between this paragraph and the next.
    pub trailing: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubParagraph {
    pub marker: String,
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub text: String,
    pub ordinal: usize,
    /// Text quoted from an amending block.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub amendment: bool,
}

impl Line {
    pub fn new(text: impl Into<String>, ordinal: usize) -> Self {
        Line {
            text: text.into(),
            ordinal,
            amendment: false,
        }
    }
}

/// Markers leading from a section down to one line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinePath {
    pub subsection: String,
    pub paragraph: Option<String>,
    pub subparagraph: Option<String>,
}

impl LinePath {
    /// `(3)(b)(ii)` style rendering.
    pub fn display(&self) -> String {
        let mut out = self.subsection.clone();
        if let Some(p) = &self.paragraph {
            out.push_str(p);
        }
        if let Some(sp) = &self.subparagraph {
            out.push_str(sp);
        }
        out
    }
}

impl Section {
    pub fn contentless(number: impl Into<String>, heading: impl Into<String>) -> Self {
        Section {
            number: number.into(),
            heading: heading.into(),
            subsections: Vec::new(),
            is_contentless: true,
        }
    }

    pub fn line_count(&self) -> usize {
        self.walk_lines().count()
    }

    /// Every line of the section in document order.
    pub fn walk_lines(&self) -> impl Iterator<Item = (LinePath, &Line)> + '_ {
        self.subsections.iter().flat_map(|sub| {
            let base = LinePath {
                subsection: sub.marker.clone(),
                paragraph: None,
                subparagraph: None,
            };
            let intro = sub.intro.iter().map({
                let base = base.clone();
                move |l| (base.clone(), l)
            });
            let paragraphs = sub.paragraphs.iter().flat_map({
                let base = base.clone();
                move |para| {
                    let para_path = LinePath {
                        paragraph: Some(para.marker.clone()),
                        ..base.clone()
                    };
                    let own = para.lines.iter().map({
                        let p = para_path.clone();
                        move |l| (p.clone(), l)
                    });
                    let subs = para.subparagraphs.iter().flat_map({
                        let p = para_path.clone();
                        move |sp| {
                            let sp_path = LinePath {
                                subparagraph: Some(sp.marker.clone()),
                                ..p.clone()
                            };
                            sp.lines.iter().map(move |l| (sp_path.clone(), l))
                        }
                    });
                    let trailing = para.trailing.iter().map(move |l| (para_path.clone(), l));
                    own.chain(subs).chain(trailing)
                }
            });
            let free = sub.lines.iter().map(move |l| (base.clone(), l));
            intro.chain(paragraphs).chain(free)
        })
    }
}

/// Free function form of [`Section::walk_lines`].
pub fn walk_lines(section: &Section) -> Vec<(LinePath, &Line)> {
    section.walk_lines().collect()
}

impl Part {
    pub fn chapters(&self) -> impl Iterator<Item = &Chapter> {
        self.children.iter().filter_map(|c| match c {
            PartChild::Chapter(ch) => Some(ch),
            PartChild::CrossHeading(_) => None,
        })
    }

    /// Cross-headings in document order, descending into Chapters.
    pub fn crossheadings(&self) -> impl Iterator<Item = &CrossHeading> {
        self.children.iter().flat_map(|c| match c {
            PartChild::Chapter(ch) => ch.crossheadings.iter().collect::<Vec<_>>(),
            PartChild::CrossHeading(xh) => vec![xh],
        })
    }

    pub fn section_refs(&self) -> impl Iterator<Item = &SectionRef> {
        self.crossheadings().flat_map(|xh| xh.section_refs.iter())
    }
}

impl ActModel {
    pub fn new(id: ActId, title: impl Into<String>) -> Self {
        ActModel {
            id,
            title: title.into(),
            parts: Vec::new(),
            sections_by_number: BTreeMap::new(),
        }
    }

    pub fn section_by_number(&self, label: &str) -> Option<&Section> {
        self.sections_by_number.get(label)
    }

    /// Section stubs in table-of-contents order.
    pub fn section_refs(&self) -> impl Iterator<Item = &SectionRef> {
        self.parts.iter().flat_map(|p| p.section_refs())
    }

    /// Parsed sections in table-of-contents order, with the Part label each
    /// belongs to.
    pub fn sections_in_order(&self) -> impl Iterator<Item = (&Part, &Section)> {
        self.parts.iter().flat_map(move |part| {
            part.section_refs()
                .filter_map(move |r| self.sections_by_number.get(&r.number).map(|s| (part, s)))
        })
    }

    pub fn part_of(&self, label: &str) -> Option<&Part> {
        self.parts
            .iter()
            .find(|p| p.section_refs().any(|r| r.number == label))
    }
}

/// Ordering for provision labels: numeric prefix, then alphabetic suffix,
/// so `"9" < "10" < "155" < "155A" < "155B" < "156"`. Labels without a
/// numeric prefix (letters, roman numerals) compare after numbers using
/// [`marker_rank`].
pub fn label_cmp(a: &str, b: &str) -> Ordering {
    label_key(a).cmp(&label_key(b))
}

fn label_key(label: &str) -> (u8, u64, u64, String) {
    let trimmed = label.trim_matches(|c| c == '(' || c == ')');
    let digits: String = trimmed.chars().take_while(|c| c.is_ascii_digit()).collect();
    if !digits.is_empty() {
        let n = digits.parse::<u64>().unwrap_or(u64::MAX);
        return (0, n, 0, trimmed[digits.len()..].to_string());
    }
    match marker_rank(trimmed) {
        Some((kind, rank)) => (1 + kind, rank, 0, String::new()),
        None => (9, 0, 0, trimmed.to_string()),
    }
}

/// Rank of a lettered or roman marker, with its kind: 0 for letters
/// (`a`, `b`, ..., `z`, `aa`, ...) and 1 for roman numerals.
/// Ambiguous single letters (`i`, `v`, `x`) are read as letters.
pub fn marker_rank(marker: &str) -> Option<(u8, u64)> {
    let m = marker.trim_matches(|c| c == '(' || c == ')');
    if m.is_empty() {
        return None;
    }
    let lower = m.to_ascii_lowercase();
    if lower.len() == 1 && lower.chars().all(|c| c.is_ascii_lowercase()) {
        return Some((0, (lower.as_bytes()[0] - b'a') as u64 + 1));
    }
    if let Some(r) = roman_value(&lower) {
        return Some((1, r));
    }
    if lower.chars().all(|c| c.is_ascii_lowercase()) {
        // aa, ab ... (inserted paragraphs)
        let first = (lower.as_bytes()[0] - b'a') as u64 + 1;
        let rest: u64 = lower
            .bytes()
            .skip(1)
            .fold(0, |acc, b| acc * 27 + (b - b'a') as u64 + 1);
        return Some((0, first * 1000 + rest));
    }
    None
}

/// Rank of a subparagraph marker, where `(i)`, `(v)` and `(x)` are numerals.
pub fn roman_rank(marker: &str) -> Option<u64> {
    roman_value(
        &marker
            .trim_matches(|c| c == '(' || c == ')')
            .to_ascii_lowercase(),
    )
}

fn roman_value(s: &str) -> Option<u64> {
    if s.is_empty() || !s.chars().all(|c| matches!(c, 'i' | 'v' | 'x' | 'l' | 'c')) {
        return None;
    }
    let digit = |c: char| match c {
        'i' => 1,
        'v' => 5,
        'x' => 10,
        'l' => 50,
        _ => 100,
    };
    let values: Vec<i64> = s.chars().map(digit).collect();
    let mut total = 0i64;
    for (i, &v) in values.iter().enumerate() {
        if values.get(i + 1).is_some_and(|&next| next > v) {
            total -= v;
        } else {
            total += v;
        }
    }
    u64::try_from(total).ok()
}
