//! Checks shared by the synthetic suite and the acceptance gate.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use legisgraph::ingest::{FetchPolicy, Fetcher};
use legisgraph::model::{label_cmp, ActModel, PartChild, Section};
use legisgraph::parser::parse_act;
use legisgraph::refs::{self, ExtractOptions, RefKind};
use legisgraph::transform::{self, GraphDocument, EXTERNAL_GROUP};

use super::{SynthAct, SynthBody};

pub fn build(act: &SynthAct, root: &Path, per_section: bool) -> ActModel {
    let cache = act.install(root);
    if per_section {
        act.install_sections(&cache);
    }
    let mut fetcher = Fetcher::new(cache);
    let (model, diag) = parse_act(&act.id, FetchPolicy::FixtureOnly, &mut fetcher).unwrap();
    assert!(
        diag.sections_failed.is_empty(),
        "{:?}",
        diag.sections_failed
    );
    assert_eq!(fetcher.network_calls(), 0);
    model
}

/// Ordinals of each group of sibling lines.
pub fn container_ordinals(section: &Section) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for sub in &section.subsections {
        out.push(
            sub.intro
                .iter()
                .chain(&sub.lines)
                .map(|l| l.ordinal)
                .collect(),
        );
        for p in &sub.paragraphs {
            out.push(
                p.lines
                    .iter()
                    .chain(&p.trailing)
                    .map(|l| l.ordinal)
                    .collect(),
            );
            for sp in &p.subparagraphs {
                out.push(sp.lines.iter().map(|l| l.ordinal).collect());
            }
        }
    }
    out
}

pub fn check_structure(seed: u64, act: &SynthAct, model: &ActModel) {
    assert_eq!(model.title, act.title);
    assert_eq!(model.parts.len(), act.parts.len(), "seed {seed}");
    for (p, sp) in model.parts.iter().zip(&act.parts) {
        assert_eq!(p.label, sp.label);
        assert_eq!(p.title, sp.title);
        assert_eq!(
            p.chapters().count(),
            sp.chapters.len(),
            "seed {seed} part {}",
            p.label
        );
        if sp.chapters.is_empty() {
            assert!(p
                .children
                .iter()
                .all(|c| matches!(c, PartChild::CrossHeading(_))));
        }
        let refs: Vec<&str> = p.section_refs().map(|r| r.number.as_str()).collect();
        let expected: Vec<&str> = sp.sections().iter().map(|s| s.label.as_str()).collect();
        assert_eq!(refs, expected, "seed {seed}");
    }
    let order: Vec<&str> = model
        .sections_in_order()
        .map(|(_, s)| s.number.as_str())
        .collect();
    let expected: Vec<&str> = act.sections().iter().map(|s| s.label.as_str()).collect();
    assert_eq!(order, expected, "seed {seed}");
    // Labels are strictly increasing in document order.
    assert!(
        order.windows(2).all(|w| label_cmp(w[0], w[1]).is_lt()),
        "seed {seed}: {order:?}"
    );

    for s in act.sections() {
        let parsed = &model.sections_by_number[&s.label];
        assert_eq!(parsed.heading, s.heading);
        assert_eq!(
            parsed.is_contentless,
            s.is_repealed(),
            "seed {seed} section {}",
            s.label
        );
        let texts: Vec<&str> = parsed.walk_lines().map(|(_, l)| l.text.as_str()).collect();
        let expected: Vec<&str> = s.lines().iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, expected, "seed {seed} section {}", s.label);
        for ordinals in container_ordinals(parsed) {
            assert!(
                ordinals.iter().copied().eq(0..ordinals.len()),
                "seed {seed}: ordinals {ordinals:?}"
            );
        }
        match &s.body {
            SynthBody::Structured(subs) => {
                assert_eq!(parsed.subsections.len(), subs.len());
                for (ps, ss) in parsed.subsections.iter().zip(subs) {
                    assert_eq!(ps.marker, ss.marker);
                    // Without paragraphs the only text is the subsection body,
                    // not an introduction.
                    let intro = ps.intro.as_ref().map(|l| l.text.as_str());
                    if ss.paragraphs.is_empty() {
                        assert_eq!(intro, None);
                        assert_eq!(ps.lines[0].text, ss.intro.text);
                    } else {
                        assert_eq!(intro, Some(ss.intro.text.as_str()));
                    }
                    let markers: Vec<&str> =
                        ps.paragraphs.iter().map(|p| p.marker.as_str()).collect();
                    let expected: Vec<&str> =
                        ss.paragraphs.iter().map(|p| p.marker.as_str()).collect();
                    assert_eq!(markers, expected);
                    for (pp, sp) in ps.paragraphs.iter().zip(&ss.paragraphs) {
                        let subs: Vec<&str> =
                            pp.subparagraphs.iter().map(|x| x.marker.as_str()).collect();
                        let expected: Vec<&str> =
                            sp.subparagraphs.iter().map(|(m, _)| m.as_str()).collect();
                        assert_eq!(subs, expected);
                    }
                }
            }
            SynthBody::Flat(_) => {
                assert!(parsed.subsections.iter().all(|s| s.marker.is_empty()));
            }
            SynthBody::Repealed => assert!(parsed.subsections.is_empty()),
        }
    }
}

pub fn check_refs(seed: u64, act: &SynthAct, model: &ActModel) {
    for s in act.sections() {
        let parsed = &model.sections_by_number[&s.label];
        assert_eq!(
            refs::ref_in_section(parsed),
            s.expected_inbound(false),
            "seed {seed} section {}",
            s.label
        );
        let expanded = refs::ref_in_section_with(
            parsed,
            ExtractOptions {
                expand_ranges: true,
            },
        );
        assert_eq!(
            expanded,
            s.expected_inbound(true),
            "seed {seed} section {}",
            s.label
        );
        let acts: BTreeMap<String, usize> = refs::acts_in_section(parsed, &model.title)
            .into_iter()
            .map(|(t, n)| (t.name, n))
            .collect();
        assert_eq!(acts, s.expected_acts(), "seed {seed} section {}", s.label);

        // Locality: the section result is the sum of its lines.
        let mut summed: BTreeMap<String, usize> = BTreeMap::new();
        for (_, line) in parsed.walk_lines() {
            for label in refs::ref_in_single_line(line) {
                *summed.entry(label).or_default() += 1;
            }
        }
        assert_eq!(summed, refs::ref_in_section(parsed));
    }

    // Count conservation across the whole Act.
    let records = refs::extract_all(model, ExtractOptions::default());
    let inbound_total: usize = records
        .iter()
        .filter(|r| r.kind == RefKind::Inbound)
        .map(|r| r.count)
        .sum();
    let expected: usize = act
        .sections()
        .iter()
        .map(|s| s.expected_inbound(false).values().sum::<usize>())
        .sum();
    assert_eq!(inbound_total, expected, "seed {seed}");
}

/// Merged (source, target) → thick computed straight from the generator.
pub fn expected_inbound_links(act: &SynthAct) -> BTreeMap<(String, String), usize> {
    let live: BTreeSet<&str> = act
        .sections()
        .iter()
        .filter(|s| !s.is_repealed())
        .map(|s| s.label.as_str())
        .collect();
    let mut out = BTreeMap::new();
    for s in act.sections().into_iter().filter(|s| !s.is_repealed()) {
        for (target, n) in s.expected_inbound(false) {
            if live.contains(target.as_str()) {
                *out.entry((format!("s{}", s.label), format!("s{target}")))
                    .or_default() += n;
            }
        }
    }
    out
}

pub fn check_graphs(seed: u64, act: &SynthAct, model: &ActModel) -> (GraphDocument, GraphDocument) {
    let records = refs::extract_all(model, ExtractOptions::default());
    let inbound = transform::build_inbound_graph(model, &records);
    let outbound = transform::build_outbound_graph(model, &records);
    transform::validate_graph(&inbound).unwrap();
    transform::validate_graph(&outbound).unwrap();

    let links: BTreeMap<(String, String), usize> = inbound
        .links
        .iter()
        .map(|l| ((l.source.clone(), l.target.clone()), l.thick))
        .collect();
    assert_eq!(links, expected_inbound_links(act), "seed {seed}");
    let live = act.sections().iter().filter(|s| !s.is_repealed()).count();
    assert_eq!(inbound.nodes.len(), live);
    for n in &inbound.nodes {
        let label = n.id.trim_start_matches('s');
        assert_eq!(n.group, act.part_of(label).unwrap().label);
    }

    // Σ nodeSize = Σ thick.
    let sizes: usize = inbound.nodes.iter().map(|n| n.node_size).sum();
    let thick: usize = inbound.links.iter().map(|l| l.thick).sum();
    assert_eq!(sizes, thick, "seed {seed}");
    let ext_sizes: usize = outbound
        .nodes
        .iter()
        .filter(|n| n.group == EXTERNAL_GROUP)
        .map(|n| n.node_size)
        .sum();
    let ext_thick: usize = outbound
        .links
        .iter()
        .filter(|l| l.target.starts_with("a:"))
        .map(|l| l.thick)
        .sum();
    assert_eq!(ext_sizes, ext_thick);

    // inbound ⊆ outbound.
    for n in &inbound.nodes {
        assert!(outbound.nodes.contains(n), "seed {seed}: {n:?}");
    }
    for l in &inbound.links {
        assert!(outbound.links.contains(l), "seed {seed}: {l:?}");
    }

    let expected_acts: BTreeSet<String> = act
        .sections()
        .iter()
        .filter(|s| !s.is_repealed())
        .flat_map(|s| s.expected_acts().into_keys())
        .collect();
    let acts: BTreeSet<String> = outbound
        .nodes
        .iter()
        .filter(|n| n.group == EXTERNAL_GROUP)
        .map(|n| n.label.clone())
        .collect();
    assert_eq!(acts, expected_acts, "seed {seed}");
    (inbound, outbound)
}

pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Hierarchy and sequence invariants that hold for any parsed Act.
pub fn model_invariants(model: &ActModel) -> Result<(), String> {
    for (key, s) in &model.sections_by_number {
        if *key != s.number {
            return Err(format!("label {key} maps to section {}", s.number));
        }
        if s.is_contentless && !s.subsections.is_empty() {
            return Err(format!("section {key} has no content but has subsections"));
        }
        for ordinals in container_ordinals(s) {
            if !ordinals.iter().copied().eq(0..ordinals.len()) {
                return Err(format!(
                    "section {key}: ordinals {ordinals:?} are not dense"
                ));
            }
        }
        for (path, line) in s.walk_lines() {
            if line.text.is_empty()
                || line.text.split_whitespace().collect::<Vec<_>>().join(" ") != line.text
            {
                return Err(format!(
                    "section {key} {}: line not normalized: {:?}",
                    path.display(),
                    line.text
                ));
            }
        }
    }
    let mut seen = BTreeSet::new();
    for r in model.section_refs() {
        if !seen.insert(r.number.as_str()) {
            return Err(format!("section {} listed twice in the contents", r.number));
        }
    }
    for key in model.sections_by_number.keys() {
        if !seen.contains(key.as_str()) {
            return Err(format!("section {key} is parsed but not in the contents"));
        }
    }
    Ok(())
}

/// Locality and count conservation of the extractor.
pub fn refs_invariants(model: &ActModel) -> Result<(), String> {
    let records = refs::extract_all(model, ExtractOptions::default());
    let mut inbound_total = 0;
    let mut outbound_total = 0;
    for s in model.sections_by_number.values() {
        let mut summed: BTreeMap<String, usize> = BTreeMap::new();
        for (_, line) in s.walk_lines() {
            for label in refs::ref_in_single_line(line) {
                *summed.entry(label).or_default() += 1;
            }
        }
        let section = refs::ref_in_section(s);
        if summed != section {
            return Err(format!(
                "section {}: line sums {summed:?} differ from {section:?}",
                s.number
            ));
        }
        inbound_total += section.values().sum::<usize>();
        outbound_total += refs::acts_in_section(s, &model.title)
            .values()
            .sum::<usize>();
    }
    let recorded_in: usize = records
        .iter()
        .filter(|r| r.kind == RefKind::Inbound)
        .map(|r| r.count)
        .sum();
    let recorded_out: usize = records
        .iter()
        .filter(|r| r.kind == RefKind::Outbound)
        .map(|r| r.count)
        .sum();
    if recorded_in != inbound_total || recorded_out != outbound_total {
        return Err(format!(
            "records hold {recorded_in}/{recorded_out} mentions, sections {inbound_total}/{outbound_total}"
        ));
    }
    Ok(())
}

/// inbound ⊆ outbound, Σ nodeSize = Σ thick and no unflagged self-loops.
pub fn graph_invariants(model: &ActModel) -> Result<(), String> {
    let records = refs::extract_all(model, ExtractOptions::default());
    let inbound = transform::build_inbound_graph(model, &records);
    let outbound = transform::build_outbound_graph(model, &records);
    transform::validate_graph(&inbound)?;
    transform::validate_graph(&outbound)?;
    if let Some(n) = inbound.nodes.iter().find(|n| !outbound.nodes.contains(n)) {
        return Err(format!("inbound node {} missing from outbound graph", n.id));
    }
    if let Some(l) = inbound.links.iter().find(|l| !outbound.links.contains(l)) {
        return Err(format!(
            "inbound link {} -> {} missing from outbound graph",
            l.source, l.target
        ));
    }
    let sizes: usize = inbound.nodes.iter().map(|n| n.node_size).sum();
    let thick: usize = inbound.links.iter().map(|l| l.thick).sum();
    if sizes != thick {
        return Err(format!(
            "inbound: sum of nodeSize {sizes} != sum of thick {thick}"
        ));
    }
    let ext_sizes: usize = outbound
        .nodes
        .iter()
        .filter(|n| n.group == EXTERNAL_GROUP)
        .map(|n| n.node_size)
        .sum();
    let ext_thick: usize = outbound
        .links
        .iter()
        .filter(|l| l.target.starts_with("a:"))
        .map(|l| l.thick)
        .sum();
    if ext_sizes != ext_thick {
        return Err(format!(
            "outbound: external nodeSize {ext_sizes} != thick {ext_thick}"
        ));
    }
    let flagged: BTreeSet<String> = records
        .iter()
        .filter(|r| r.self_reference)
        .map(|r| format!("s{}", r.from_section))
        .collect();
    if let Some(l) = inbound
        .links
        .iter()
        .find(|l| l.source == l.target && !flagged.contains(&l.source))
    {
        return Err(format!("unflagged self-loop on {}", l.source));
    }
    Ok(())
}

/// Two emissions of the same model produce identical files.
pub fn determinism(model: &ActModel, scratch: &Path) -> Result<(), String> {
    let records = refs::extract_all(model, ExtractOptions::default());
    let one = scratch.join("one");
    let two = scratch.join("two");
    for dir in [&one, &two] {
        transform::emit_site(model, &records, ExtractOptions::default(), dir)
            .map_err(|e| e.to_string())?;
    }
    let (a, b) = (read_tree(&one), read_tree(&two));
    if a.is_empty() || a != b {
        return Err("two consecutive emissions differ".into());
    }
    Ok(())
}
