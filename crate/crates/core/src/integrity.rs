//! Data-quality checks: regex surveys over the one-page text of an Act,
//! structural tallies, extractor-vs-survey comparison per external Act and
//! a side-by-side view of parsed and original section content.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, Cache, CachedResource, IngestError};
use crate::model::{ActModel, PartChild, Section};
use crate::parser::{self, OriginalPiece, ParseError};
use crate::refs::{ExtractOptions, RefKind, ReferenceRecord};
use crate::transform::{escape_html, html_single_section, LinkContext};

#[derive(Debug, Error)]
pub enum IntegrityError {
    #[error("invalid pattern {pattern:?}: {source}")]
    InvalidPattern {
        pattern: String,
        source: regex::Error,
    },
    #[error("section {0} is not in the model")]
    UnknownSection(String),
    #[error("no cached original for section {0}")]
    MissingOriginal(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// A survey pattern and, when known, the count published for the Act it was
/// first run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurveyPattern {
    pub pattern: &'static str,
    pub published: Option<usize>,
}

/// The six historical patterns verbatim, including the odd `[aA-zZ]`
/// class (it spans `A-z`, so it also admits `[`, `\`, `]`, `^`, `_` and
/// a backtick), followed by corrected variants.
pub const DEFAULT_PATTERNS: &[SurveyPattern] = &[
    SurveyPattern {
        pattern: "section [1-9]*",
        published: Some(500),
    },
    SurveyPattern {
        pattern: "section [1-9]* or [1-9]",
        published: Some(20),
    },
    SurveyPattern {
        pattern: "section [1-9]* or section [1-9]",
        published: Some(3),
    },
    SurveyPattern {
        pattern: "section [1-9]* to",
        published: Some(21),
    },
    SurveyPattern {
        pattern: "sections [1-9]* and",
        published: Some(4),
    },
    SurveyPattern {
        pattern: "of the [aA-zZ]+ Act",
        published: Some(156),
    },
    SurveyPattern {
        pattern: r"\b[Ss]ections? [1-9][0-9]*[A-Z]*",
        published: None,
    },
    SurveyPattern {
        pattern: "of the [A-Za-z]+ Act",
        published: None,
    },
    SurveyPattern {
        pattern: "of the [A-Za-z ]+ Act",
        published: None,
    },
];

/// Published (extracted, surveyed) counts for the most cited external Acts.
pub const PUBLISHED_ACT_COUNTS: &[(&str, usize, usize)] = &[
    ("Housing Act 1985", 51, 62),
    ("Housing Act 1988", 18, 20),
    ("Housing Act 1996", 17, 17),
    ("Housing and Planning Act 2016", 15, 24),
];

const MAX_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Heading,
    Body,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageLine {
    pub kind: LineKind,
    /// Owning section, if any.
    pub section: Option<String>,
    /// Marker path inside the section, empty for headings.
    pub path: String,
    pub text: String,
}

/// The whole Act as a list of lines in table-of-contents order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OnePage {
    pub lines: Vec<PageLine>,
}

impl OnePage {
    pub fn new(model: &ActModel) -> Self {
        let mut lines = Vec::new();
        let heading = |text: String, section: Option<&str>| PageLine {
            kind: LineKind::Heading,
            section: section.map(str::to_string),
            path: String::new(),
            text,
        };
        for part in &model.parts {
            if !part.label.is_empty() {
                lines.push(heading(
                    format!("Part {} {}", part.label, part.title)
                        .trim_end()
                        .to_string(),
                    None,
                ));
            }
            let mut crossheadings = Vec::new();
            for child in &part.children {
                match child {
                    PartChild::Chapter(ch) => {
                        lines.push(heading(
                            format!("Chapter {} {}", ch.label, ch.title)
                                .trim_end()
                                .to_string(),
                            None,
                        ));
                        crossheadings.extend(ch.crossheadings.iter());
                    }
                    PartChild::CrossHeading(x) => crossheadings.push(x),
                }
                for xh in crossheadings.drain(..) {
                    if !xh.title.is_empty() {
                        lines.push(heading(xh.title.clone(), None));
                    }
                    for r in &xh.section_refs {
                        let Some(section) = model.sections_by_number.get(&r.number) else {
                            continue;
                        };
                        lines.push(heading(
                            format!("{} {}", section.number, section.heading)
                                .trim_end()
                                .to_string(),
                            Some(&section.number),
                        ));
                        for (path, line) in section.walk_lines() {
                            lines.push(PageLine {
                                kind: LineKind::Body,
                                section: Some(section.number.clone()),
                                path: path.display(),
                                text: line.text.clone(),
                            });
                        }
                    }
                }
            }
        }
        OnePage { lines }
    }

    pub fn text(&self) -> String {
        self.lines
            .iter()
            .map(|l| l.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn body_lines(&self) -> usize {
        self.lines
            .iter()
            .filter(|l| l.kind == LineKind::Body)
            .count()
    }
}

/// Headings and lines of the Act, one per text line, in ToC order.
pub fn one_page_text(model: &ActModel) -> String {
    OnePage::new(model).text()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLocation {
    pub section: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegexSurveyRow {
    pub pattern: String,
    pub occurrences: usize,
    pub sample_locations: Vec<SampleLocation>,
}

fn compile(patterns: &[&str]) -> Result<Vec<Regex>, IntegrityError> {
    patterns
        .iter()
        .map(|p| {
            Regex::new(p).map_err(|source| IntegrityError::InvalidPattern {
                pattern: p.to_string(),
                source,
            })
        })
        .collect()
}

/// Non-overlapping matches per pattern, line by line. Sample locations are
/// 1-based line numbers.
pub fn regex_survey(text: &str, patterns: &[&str]) -> Result<Vec<RegexSurveyRow>, IntegrityError> {
    let page = OnePage {
        lines: text
            .lines()
            .enumerate()
            .map(|(i, t)| PageLine {
                kind: LineKind::Body,
                section: None,
                path: format!("line {}", i + 1),
                text: t.to_string(),
            })
            .collect(),
    };
    survey_page(&page, patterns)
}

/// Like [`regex_survey`] but samples carry section labels and marker paths.
pub fn survey_page(
    page: &OnePage,
    patterns: &[&str],
) -> Result<Vec<RegexSurveyRow>, IntegrityError> {
    let compiled = compile(patterns)?;
    Ok(patterns
        .iter()
        .zip(&compiled)
        .map(|(p, re)| {
            let mut row = RegexSurveyRow {
                pattern: p.to_string(),
                occurrences: 0,
                sample_locations: Vec::new(),
            };
            for line in &page.lines {
                let n = re.find_iter(&line.text).count();
                if n == 0 {
                    continue;
                }
                row.occurrences += n;
                if row.sample_locations.len() < MAX_SAMPLES {
                    row.sample_locations.push(location(line));
                }
            }
            row
        })
        .collect())
}

fn location(line: &PageLine) -> SampleLocation {
    SampleLocation {
        section: line.section.clone().unwrap_or_default(),
        path: if line.path.is_empty() {
            "heading".into()
        } else {
            line.path.clone()
        },
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionTally {
    pub subsections: usize,
    pub paragraphs: usize,
    pub subparagraphs: usize,
    pub lines: usize,
}

pub fn tally_section(section: &Section) -> SectionTally {
    let mut t = SectionTally {
        lines: section.line_count(),
        ..Default::default()
    };
    for sub in &section.subsections {
        t.subsections += 1;
        for p in &sub.paragraphs {
            t.paragraphs += 1;
            t.subparagraphs += p.subparagraphs.len();
        }
    }
    t
}

/// Counts at each hierarchy level for every parsed section.
pub fn structural_tally(model: &ActModel) -> BTreeMap<String, SectionTally> {
    model
        .sections_by_number
        .iter()
        .map(|(k, s)| (k.clone(), tally_section(s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActComparison {
    pub title: String,
    pub extracted: usize,
    pub surveyed: usize,
    /// Set when the extractor found fewer mentions than the survey.
    pub flagged: bool,
    pub sample_locations: Vec<SampleLocation>,
}

/// Per external Act, extracted outbound mentions against a literal title
/// search over the one-page text. Acts found by neither are absent.
pub fn extractor_vs_survey(model: &ActModel, records: &[ReferenceRecord]) -> Vec<ActComparison> {
    let page = OnePage::new(model);
    let extracted = extracted_act_totals(records);
    let mut titles: Vec<String> = extracted.keys().cloned().collect();
    for (title, _, _) in PUBLISHED_ACT_COUNTS {
        if !titles.iter().any(|t| t == title) && *title != model.title {
            titles.push(title.to_string());
        }
    }
    let mut rows = Vec::new();
    for title in titles {
        let re =
            Regex::new(&format!(r"\b{}\b", regex::escape(&title))).expect("escaped title compiles");
        let mut surveyed = 0;
        let mut samples = Vec::new();
        for line in &page.lines {
            let n = re.find_iter(&line.text).count();
            if n > 0 {
                surveyed += n;
                if samples.len() < MAX_SAMPLES {
                    samples.push(location(line));
                }
            }
        }
        let extracted = extracted.get(&title).copied().unwrap_or(0);
        if extracted == 0 && surveyed == 0 {
            continue;
        }
        let flagged = extracted < surveyed;
        rows.push(ActComparison {
            title,
            extracted,
            surveyed,
            flagged,
            sample_locations: if flagged { samples } else { Vec::new() },
        });
    }
    rows.sort_by(|a, b| {
        b.surveyed
            .cmp(&a.surveyed)
            .then_with(|| a.title.cmp(&b.title))
    });
    rows
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyReportRow {
    #[serde(flatten)]
    pub row: RegexSurveyRow,
    pub published: Option<usize>,
    pub delta: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub act: String,
    pub title: String,
    pub survey: Vec<SurveyReportRow>,
    pub structural: BTreeMap<String, SectionTally>,
    pub extractor_vs_survey: Vec<ActComparison>,
}

fn delta(observed: usize, published: Option<usize>) -> Option<i64> {
    published.map(|p| observed as i64 - p as i64)
}

/// Runs every check with the default patterns plus `extra`.
pub fn build_report(
    model: &ActModel,
    records: &[ReferenceRecord],
    extra: &[String],
) -> Result<IntegrityReport, IntegrityError> {
    let mut patterns: Vec<(&str, Option<usize>)> = DEFAULT_PATTERNS
        .iter()
        .map(|p| (p.pattern, p.published))
        .collect();
    patterns.extend(extra.iter().map(|p| (p.as_str(), None)));
    let page = OnePage::new(model);
    let texts: Vec<&str> = patterns.iter().map(|p| p.0).collect();
    let survey = survey_page(&page, &texts)?
        .into_iter()
        .zip(&patterns)
        .map(|(row, (_, published))| SurveyReportRow {
            delta: delta(row.occurrences, *published),
            published: *published,
            row,
        })
        .collect();
    Ok(IntegrityReport {
        act: model.id.path(),
        title: model.title.clone(),
        survey,
        structural: structural_tally(model),
        extractor_vs_survey: extractor_vs_survey(model, records),
    })
}

impl IntegrityReport {
    /// Human-readable summary: published value, observed value and delta.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "Integrity report for {} ({})\n\nRegex survey\n",
            self.title, self.act
        );
        let show = |v: Option<i64>| v.map_or("-".to_string(), |d| format!("{d:+}"));
        for r in &self.survey {
            let _ = writeln!(
                out,
                "  {:<40} published {:>5}  observed {:>5}  delta {:>6}",
                r.row.pattern,
                r.published.map_or("-".into(), |p| p.to_string()),
                r.row.occurrences,
                show(r.delta)
            );
        }
        out.push_str("\nExternal Acts (extracted / surveyed)\n");
        for c in &self.extractor_vs_survey {
            let published = PUBLISHED_ACT_COUNTS.iter().find(|(t, _, _)| *t == c.title);
            let _ = write!(
                out,
                "  {:<50} {:>4} / {:<4}",
                c.title, c.extracted, c.surveyed
            );
            if let Some((_, e, s)) = published {
                let _ = write!(
                    out,
                    "  published {e} / {s}  delta {:+} / {:+}",
                    c.extracted as i64 - *e as i64,
                    c.surveyed as i64 - *s as i64
                );
            }
            if c.flagged {
                out.push_str("  [extracted < surveyed]");
            }
            out.push('\n');
        }
        out
    }
}

/// Cached XML holding the original of a section: the per-section file when
/// present, else the full-data file.
pub fn original_resource(
    model: &ActModel,
    label: &str,
    cache: &Cache,
) -> Result<CachedResource, IntegrityError> {
    for uri in [
        ingest::section_data_url(&model.id, label),
        ingest::act_data_url(&model.id),
    ] {
        if let Some((body, fetched_at)) = cache.get(&uri)? {
            let mut res = CachedResource::from_bytes(uri, body);
            res.fetched_at = fetched_at;
            return Ok(res);
        }
    }
    Err(IntegrityError::MissingOriginal(label.to_string()))
}

fn render_original(label: &str, heading: &str, pieces: &[OriginalPiece]) -> String {
    let mut html = format!(
        "<h2><span class=\"section-number\">{}</span> {}</h2>",
        escape_html(label),
        escape_html(heading)
    );
    for piece in pieces {
        match piece {
            OriginalPiece::Marker(m) => {
                let _ = write!(html, "<span class=\"marker\">{}</span>", escape_html(m));
            }
            OriginalPiece::Text { text, amendment } => {
                let class = if *amendment { "line amendment" } else { "line" };
                let _ = write!(html, "<p class=\"{class}\">{}</p>", escape_html(text));
            }
        }
    }
    html
}

const COMPARE_STYLE: &str = "body{margin:0;font-family:serif}\
main{display:flex;gap:1em;padding:1em}\
section.frame{flex:1;border:1px solid #999;padding:0 1em;overflow:auto}\
.marker{font-weight:bold;margin-right:.4em}\
.amendment{color:#555;font-style:italic}\
.no-content{color:#a00}";

/// Self-contained page with the parsed rendering of a section on the left
/// and the cached original on the right.
pub fn compare_view(
    model: &ActModel,
    label: &str,
    cache: &Cache,
) -> Result<String, IntegrityError> {
    let section = model
        .sections_by_number
        .get(label)
        .ok_or_else(|| IntegrityError::UnknownSection(label.to_string()))?;
    let original = original_resource(model, label, cache)?;
    let (heading, pieces) = parser::original_section(&original, Some(label))?
        .ok_or_else(|| IntegrityError::MissingOriginal(label.to_string()))?;
    let mut ctx = LinkContext::new(model);
    ctx.options = ExtractOptions::default();
    let left = html_single_section(section, &ctx);
    let right = render_original(label, &heading, &pieces);
    Ok(format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Section {num}: parsed and original</title><style>{COMPARE_STYLE}</style></head>\
<body><main><section class=\"frame parsed\"><h1>Parsed</h1>{left}</section>\
<section class=\"frame original\"><h1>Original</h1><p class=\"source\">{source}</p>{right}</section></main></body></html>\n",
        num = escape_html(label),
        source = escape_html(&original.uri),
    ))
}

/// Outbound mention totals per Act, the extractor side of the comparison.
pub fn extracted_act_totals(records: &[ReferenceRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == RefKind::Outbound) {
        *out.entry(r.target.clone()).or_default() += r.count;
    }
    out
}
