//! Seeded generator of small CLML Acts whose structure and references are
//! known by construction.
#![allow(dead_code)]

pub mod checks;

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{TimeZone, Utc};
use legisgraph::ingest::{self, ActId, Cache};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NS: &str = "http://www.legislation.gov.uk/namespaces/legislation";

pub const EXTERNAL_ACTS: &[&str] = &[
    "Housing Act 1985",
    "Housing Act 1988",
    "Housing and Regeneration Act 2008",
    "Local Government and Housing Act 1989",
    "Protection from Eviction Act 1977",
];

const FILLER: &[&str] = &[
    "a local housing authority may serve a notice on the person having control",
    "in accordance with subsection (2) the notice must specify the premises",
    "this section applies to any residential premises",
    "the period mentioned in subsection (1) is 28 days",
];

/// A line of generated text and the references it carries.
#[derive(Debug, Clone, Default)]
pub struct SynthLine {
    pub text: String,
    /// Labels of this Act, in order, with only range endpoints.
    pub inbound: Vec<String>,
    /// Labels strictly inside a numeric range.
    pub range_inner: Vec<String>,
    pub acts: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthPara {
    pub marker: String,
    pub line: SynthLine,
    pub subparagraphs: Vec<(String, SynthLine)>,
}

#[derive(Debug, Clone)]
pub struct SynthSub {
    pub marker: String,
    pub intro: SynthLine,
    pub paragraphs: Vec<SynthPara>,
    pub closing: Option<SynthLine>,
}

#[derive(Debug, Clone)]
pub enum SynthBody {
    Structured(Vec<SynthSub>),
    Flat(Vec<SynthLine>),
    Repealed,
}

#[derive(Debug, Clone)]
pub struct SynthSection {
    pub label: String,
    pub heading: String,
    pub body: SynthBody,
}

impl SynthSection {
    /// Lines in document order.
    pub fn lines(&self) -> Vec<&SynthLine> {
        let mut out = Vec::new();
        match &self.body {
            SynthBody::Structured(subs) => {
                for s in subs {
                    out.push(&s.intro);
                    for p in &s.paragraphs {
                        out.push(&p.line);
                        out.extend(p.subparagraphs.iter().map(|(_, l)| l));
                    }
                    out.extend(s.closing.iter());
                }
            }
            SynthBody::Flat(lines) => out.extend(lines.iter()),
            SynthBody::Repealed => {}
        }
        out
    }

    pub fn is_repealed(&self) -> bool {
        matches!(self.body, SynthBody::Repealed)
    }

    pub fn expected_inbound(&self, expand: bool) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for l in self.lines() {
            for label in l.inbound.iter().chain(if expand {
                l.range_inner.iter()
            } else {
                [].iter()
            }) {
                *out.entry(label.clone()).or_default() += 1;
            }
        }
        out
    }

    pub fn expected_acts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for l in self.lines() {
            for a in &l.acts {
                *out.entry(a.clone()).or_default() += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthCrossHeading {
    pub title: String,
    pub sections: Vec<SynthSection>,
}

#[derive(Debug, Clone)]
pub struct SynthChapter {
    pub label: String,
    pub title: String,
    pub crossheadings: Vec<SynthCrossHeading>,
}

#[derive(Debug, Clone)]
pub struct SynthPart {
    pub label: String,
    pub title: String,
    /// Either chapters or bare cross-headings, never both.
    pub chapters: Vec<SynthChapter>,
    pub crossheadings: Vec<SynthCrossHeading>,
}

impl SynthPart {
    pub fn sections(&self) -> Vec<&SynthSection> {
        let xhs: Vec<&SynthCrossHeading> = if self.chapters.is_empty() {
            self.crossheadings.iter().collect()
        } else {
            self.chapters
                .iter()
                .flat_map(|c| c.crossheadings.iter())
                .collect()
        };
        xhs.into_iter().flat_map(|x| x.sections.iter()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthAct {
    pub id: ActId,
    pub title: String,
    pub parts: Vec<SynthPart>,
}

impl SynthAct {
    pub fn sections(&self) -> Vec<&SynthSection> {
        self.parts.iter().flat_map(|p| p.sections()).collect()
    }

    pub fn section(&self, label: &str) -> Option<&SynthSection> {
        self.sections().into_iter().find(|s| s.label == label)
    }

    pub fn part_of(&self, label: &str) -> Option<&SynthPart> {
        self.parts
            .iter()
            .find(|p| p.sections().iter().any(|s| s.label == label))
    }

    /// Writes the full-data XML into a cache rooted at `root`.
    pub fn install(&self, root: &Path) -> Cache {
        let cache = Cache::open(root).unwrap();
        let at = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        cache
            .put(
                &ingest::act_data_url(&self.id),
                self.to_xml().as_bytes(),
                at,
            )
            .unwrap();
        cache
    }

    /// Also writes one per-section XML file for every section.
    pub fn install_sections(&self, cache: &Cache) {
        let at = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        for s in self.sections() {
            let xml = format!(
                r#"<?xml version="1.0" encoding="UTF-8"?><Legislation xmlns="{NS}"><Primary><Body>{}</Body></Primary></Legislation>"#,
                self.section_xml(s)
            );
            cache
                .put(
                    &ingest::section_data_url(&self.id, &s.label),
                    xml.as_bytes(),
                    at,
                )
                .unwrap();
        }
    }

    pub fn to_xml(&self) -> String {
        let mut x = format!(
            r#"<?xml version="1.0" encoding="UTF-8"?><Legislation xmlns="{NS}" DocumentURI="http://www.legislation.gov.uk/{}"><Primary><PrimaryPrelims><Title>{}</Title></PrimaryPrelims><Body>"#,
            self.id.path(),
            self.title
        );
        for p in &self.parts {
            x.push_str(&format!(
                "<Part><Number>Part {}</Number><Title>{}</Title>",
                p.label, p.title
            ));
            for c in &p.chapters {
                x.push_str(&format!(
                    "<Chapter><Number>Chapter {}</Number><Title>{}</Title>",
                    c.label, c.title
                ));
                for xh in &c.crossheadings {
                    x.push_str(&self.crossheading_xml(xh));
                }
                x.push_str("</Chapter>");
            }
            for xh in &p.crossheadings {
                x.push_str(&self.crossheading_xml(xh));
            }
            x.push_str("</Part>");
        }
        x.push_str("</Body></Primary></Legislation>");
        x
    }

    fn crossheading_xml(&self, xh: &SynthCrossHeading) -> String {
        let mut x = format!("<Pblock><Title>{}</Title>", xh.title);
        for s in &xh.sections {
            x.push_str(&self.section_xml(s));
        }
        x.push_str("</Pblock>");
        x
    }

    pub fn section_xml(&self, s: &SynthSection) -> String {
        let text = |l: &SynthLine| format!("<Text>{}</Text>", l.text);
        let mut x = format!(
            r#"<P1group><Title>{}</Title><P1 DocumentURI="http://www.legislation.gov.uk/{}/section/{}"><Pnumber>{}</Pnumber><P1para>"#,
            s.heading,
            self.id.path(),
            s.label,
            s.label
        );
        match &s.body {
            SynthBody::Repealed => x.push_str("<Text>. . . . . . .</Text>"),
            SynthBody::Flat(lines) => lines.iter().for_each(|l| x.push_str(&text(l))),
            SynthBody::Structured(subs) => {
                for sub in subs {
                    x.push_str(&format!(
                        "<P2><Pnumber>{}</Pnumber><P2para>{}",
                        sub.marker.trim_matches(['(', ')']),
                        text(&sub.intro)
                    ));
                    for p in &sub.paragraphs {
                        x.push_str(&format!(
                            "<P3><Pnumber>{}</Pnumber><P3para>{}",
                            p.marker.trim_matches(['(', ')']),
                            text(&p.line)
                        ));
                        for (m, l) in &p.subparagraphs {
                            x.push_str(&format!(
                                "<P4><Pnumber>{}</Pnumber><P4para>{}</P4para></P4>",
                                m.trim_matches(['(', ')']),
                                text(l)
                            ));
                        }
                        x.push_str("</P3para></P3>");
                    }
                    if let Some(c) = &sub.closing {
                        x.push_str(&text(c));
                    }
                    x.push_str("</P2para></P2>");
                }
            }
        }
        x.push_str("</P1para></P1></P1group>");
        x
    }
}

const LETTERS: &[&str] = &["a", "b", "c", "d", "e"];
const ROMAN: &[&str] = &["i", "ii", "iii", "iv"];

fn make_line(rng: &mut ChaCha8Rng, labels: &[String], numeric_max: u32) -> SynthLine {
    let pick = |rng: &mut ChaCha8Rng| -> String {
        if rng.random_bool(0.08) {
            // Dangling: a section this Act does not have.
            format!("{}", numeric_max + rng.random_range(5..50))
        } else {
            labels.choose(rng).unwrap().clone()
        }
    };
    let act = |rng: &mut ChaCha8Rng| EXTERNAL_ACTS.choose(rng).unwrap().to_string();
    let mut line = SynthLine::default();
    match rng.random_range(0..12) {
        0 | 1 => {
            let a = pick(rng);
            line.text = format!("the authority must have regard to section {a}");
            line.inbound = vec![a];
        }
        2 => {
            let (a, b) = (pick(rng), pick(rng));
            line.text = format!("subject to sections {a} and {b}");
            line.inbound = vec![a, b];
        }
        3 => {
            let (a, b) = (pick(rng), pick(rng));
            line.text = format!("as mentioned in section {a} or {b}");
            line.inbound = vec![a, b];
        }
        4 => {
            let a = rng.random_range(1..=numeric_max);
            let b = a + rng.random_range(1..=4);
            line.text = format!("sections {a} to {b} apply with modifications");
            line.inbound = vec![a.to_string(), b.to_string()];
            line.range_inner = (a + 1..b).map(|n| n.to_string()).collect();
        }
        5 => {
            let a = pick(rng);
            let k = rng.random_range(1..6);
            line.text = format!("the duty under section {a}({k}) continues");
            line.inbound = vec![a];
        }
        6 => {
            let t = act(rng);
            let n = rng.random_range(1..300);
            line.text = format!("within the meaning of section {n} of the {t}");
            line.acts = vec![t];
        }
        7 => {
            let t = act(rng);
            line.text = format!("any provision of the {t}");
            line.acts = vec![t];
        }
        8 => {
            let (t, u) = (act(rng), act(rng));
            let a = pick(rng);
            line.text = format!("the {t} and the {u} as applied by section {a}");
            line.acts = vec![t, u];
            line.inbound = vec![a];
        }
        9 => {
            let n = rng.random_range(1..200);
            line.text = format!("notwithstanding section {n} of that Act");
        }
        _ => line.text = FILLER.choose(rng).unwrap().to_string(),
    }
    line
}

/// A random Act for `seed`; the same seed always yields the same Act.
pub fn generate(seed: u64) -> SynthAct {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ActId::new("ukpga", 2001, 5).unwrap();
    let title = "Synthetic Homes Act 2001".to_string();

    // Shape first, so labels are known before any text refers to them.
    let mut shape: Vec<(bool, Vec<Vec<usize>>)> = Vec::new();
    let mut total = 0;
    for _ in 0..rng.random_range(1..=4) {
        let chapters = rng.random_bool(0.5);
        let groups = if chapters { rng.random_range(1..=3) } else { 1 };
        let mut chapter_shapes = Vec::new();
        for _ in 0..groups {
            let mut xh_sizes = Vec::new();
            for _ in 0..rng.random_range(1..=3) {
                let n = rng.random_range(1..=4);
                total += n;
                xh_sizes.push(n);
            }
            chapter_shapes.push(xh_sizes);
        }
        shape.push((chapters, chapter_shapes));
    }
    let mut labels = Vec::new();
    let mut n = 0u32;
    for _ in 0..total {
        let after_plain = labels.last().is_some_and(|l: &String| !l.ends_with('A'));
        if after_plain && rng.random_bool(0.1) {
            labels.push(format!("{n}A"));
        } else {
            n += 1;
            labels.push(n.to_string());
        }
    }
    let numeric_max = n;

    let mut next = labels.iter();
    let mut make_section = |rng: &mut ChaCha8Rng| -> SynthSection {
        let label = next.next().unwrap().clone();
        let body = match rng.random_range(0..10) {
            0 => SynthBody::Repealed,
            1 => SynthBody::Flat(
                (0..rng.random_range(1..=2))
                    .map(|_| make_line(rng, &labels, numeric_max))
                    .collect(),
            ),
            _ => {
                let mut subs = Vec::new();
                for k in 1..=rng.random_range(1..=4) {
                    let intro = make_line(rng, &labels, numeric_max);
                    let mut paragraphs = Vec::new();
                    for m in &LETTERS[..rng.random_range(0..=4)] {
                        let line = make_line(rng, &labels, numeric_max);
                        let subparagraphs = ROMAN[..rng.random_range(0..=3)]
                            .iter()
                            .map(|r| (format!("({r})"), make_line(rng, &labels, numeric_max)))
                            .collect();
                        paragraphs.push(SynthPara {
                            marker: format!("({m})"),
                            line,
                            subparagraphs,
                        });
                    }
                    let closing = (!paragraphs.is_empty() && rng.random_bool(0.2))
                        .then(|| make_line(rng, &labels, numeric_max));
                    subs.push(SynthSub {
                        marker: format!("({k})"),
                        intro,
                        paragraphs,
                        closing,
                    });
                }
                SynthBody::Structured(subs)
            }
        };
        SynthSection {
            heading: format!("Provision number {label}"),
            label,
            body,
        }
    };

    let mut parts = Vec::new();
    for (pi, (chapters, chapter_shapes)) in shape.into_iter().enumerate() {
        let mut xh_of =
            |sizes: &Vec<usize>, rng: &mut ChaCha8Rng, prefix: String| -> Vec<SynthCrossHeading> {
                sizes
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| SynthCrossHeading {
                        title: format!("{prefix} heading {}", i + 1),
                        sections: (0..n).map(|_| make_section(rng)).collect(),
                    })
                    .collect()
            };
        let mut part = SynthPart {
            label: (pi + 1).to_string(),
            title: format!("Matters of kind {}", pi + 1),
            chapters: Vec::new(),
            crossheadings: Vec::new(),
        };
        if chapters {
            for (ci, sizes) in chapter_shapes.iter().enumerate() {
                part.chapters.push(SynthChapter {
                    label: (ci + 1).to_string(),
                    title: format!("Chapter topic {}", ci + 1),
                    crossheadings: xh_of(sizes, &mut rng, format!("Chapter {}", ci + 1)),
                });
            }
        } else {
            part.crossheadings = xh_of(&chapter_shapes[0], &mut rng, format!("Part {}", pi + 1));
        }
        parts.push(part);
    }
    SynthAct { id, title, parts }
}
