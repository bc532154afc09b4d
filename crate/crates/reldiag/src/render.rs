//! Deterministic layout and SVG emission for diagrams.
//!
//! Geometry is an enabling convention, not semantics: everything is stacked
//! vertically on an 8px grid with monospace character-count text sizing, so
//! the same diagram always produces byte-identical SVG. Negation scopes are
//! dashed rounded rectangles, fuse boxes bold rectangles (optionally joined
//! by dotted connectors), and Peirce shading fills zones of odd negation
//! depth gray.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diagram::{Diagram, DiagramError, Partition, PartitionKind, validate};

const GRID: i64 = 8;
const PAD: i64 = 8;
const GAP: i64 = 8;
const ROW_H: i64 = 16;
const CHAR_W: i64 = 8;
const TEXT_PAD: i64 = 4;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    fn center(&self) -> (i64, i64) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }

    pub fn contains_with_margin(&self, other: &Rect, margin: i64) -> bool {
        other.x - self.x >= margin
            && other.y - self.y >= margin
            && (self.x + self.w) - (other.x + other.w) >= margin
            && (self.y + self.h) - (other.y + other.h) >= margin
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Zone {
    pub id: String,
    pub kind: PartitionKind,
    pub rect: Rect,
    /// Number of enclosing negation scopes, itself included; fuse boxes do
    /// not change it.
    pub neg_depth: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BoxKind {
    TableHeader,
    Attr,
    OutputHeader,
    OutputAttr,
    BuiltinName,
    BuiltinAnchor,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SceneBox {
    /// `t1`, `t1.A`, `b2.$1`, `out`, `out.A`, ...
    pub id: String,
    pub kind: BoxKind,
    pub label: String,
    pub rect: Rect,
    pub neg_depth: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LineStyle {
    Edge,
    Arrow,
    DottedConnector,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Line {
    pub from: (i64, i64),
    pub to: (i64, i64),
    pub style: LineStyle,
    pub label: Option<String>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Scene {
    pub width: i64,
    pub height: i64,
    pub zones: Vec<Zone>,
    pub boxes: Vec<SceneBox>,
    pub lines: Vec<Line>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct RenderOptions {
    pub peirce_shading: bool,
    pub dotted_connectors: bool,
}

// ---------------------------------------------------------------------------
// layout

/// One drawable column of rows (a table with its attributes, a built-in
/// with its anchors, or the output relation).
struct Visual {
    rows: Vec<(String, BoxKind, String)>, // (scene id, kind, label)
}

impl Visual {
    fn width(&self) -> i64 {
        let chars =
            self.rows.iter().map(|(_, _, l)| l.chars().count() as i64).max().unwrap_or(1);
        let w = chars * CHAR_W + 2 * TEXT_PAD;
        (w + GRID - 1) / GRID * GRID
    }

    fn height(&self) -> i64 {
        self.rows.len() as i64 * ROW_H
    }
}

pub fn layout(d: &Diagram) -> Scene {
    let fused: Vec<&String> = d.hints.fused_selections.iter().collect();
    let arrows: Vec<&String> = d.hints.arrow_joins.iter().collect();

    // selection text appended to the attribute box a fused condition joins
    let mut fused_suffix: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for b in &d.builtins {
        if !fused.contains(&&b.id) {
            continue;
        }
        if let Some(e) = d.edges.iter().find(|e| e.a.box_id == b.id || e.b.box_id == b.id) {
            let other = if e.a.box_id == b.id { &e.b } else { &e.a };
            let c = b.constant.as_ref().expect("fused hints are unary");
            fused_suffix
                .entry((other.box_id.clone(), other.attr.clone()))
                .or_default()
                .push(format!("{}{}", b.op.symbol(), c.lexeme()));
        }
    }

    // visual blocks per partition, in document order
    let mut content: BTreeMap<String, Vec<Visual>> = BTreeMap::new();
    if let Some(o) = &d.output {
        let base = d.base_id().expect("diagram has a base partition");
        let mut rows = vec![(o.id.clone(), BoxKind::OutputHeader, o.var.clone())];
        for a in &o.attrs {
            let mut label = a.clone();
            for s in fused_suffix.get(&(o.id.clone(), a.clone())).into_iter().flatten() {
                label.push_str(s);
            }
            rows.push((format!("{}.{}", o.id, a), BoxKind::OutputAttr, label));
        }
        content.entry(base).or_default().push(Visual { rows });
    }
    for t in &d.tables {
        let mut rows = vec![(
            t.id.clone(),
            BoxKind::TableHeader,
            format!("{} {}", t.relation, t.var),
        )];
        for a in &t.attrs {
            let mut label = a.clone();
            for s in fused_suffix.get(&(t.id.clone(), a.clone())).into_iter().flatten() {
                label.push_str(s);
            }
            rows.push((format!("{}.{}", t.id, a), BoxKind::Attr, label));
        }
        content.entry(t.partition.clone()).or_default().push(Visual { rows });
    }
    for b in &d.builtins {
        if fused.contains(&&b.id) || arrows.contains(&&b.id) {
            continue;
        }
        let mut rows = vec![(b.id.clone(), BoxKind::BuiltinName, b.relation_name())];
        for a in b.anchors() {
            rows.push((format!("{}.{a}", b.id), BoxKind::BuiltinAnchor, a.to_string()));
        }
        content.entry(b.partition.clone()).or_default().push(Visual { rows });
    }

    let mut children: BTreeMap<&str, Vec<&Partition>> = BTreeMap::new();
    for p in &d.partitions {
        if let Some(parent) = &p.parent {
            children.entry(parent.as_str()).or_default().push(p);
        }
    }

    // bottom-up sizes; fuse group members are widened to the group maximum
    fn size(
        pid: &str,
        content: &BTreeMap<String, Vec<Visual>>,
        children: &BTreeMap<&str, Vec<&Partition>>,
        sizes: &mut BTreeMap<String, (i64, i64)>,
    ) -> (i64, i64) {
        let mut w: i64 = 3 * GRID;
        let mut h: i64 = 0;
        let mut first = true;
        for v in content.get(pid).into_iter().flatten() {
            if !first {
                h += GAP;
            }
            first = false;
            w = w.max(v.width());
            h += v.height();
        }
        let empty = vec![];
        let kids = children.get(pid).unwrap_or(&empty);
        let mut kid_sizes: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
        for k in kids {
            kid_sizes.insert(&k.id, size(&k.id, content, children, sizes));
        }
        // equal widths within each fuse group
        let mut group_max: BTreeMap<&String, i64> = BTreeMap::new();
        for k in kids {
            if let Some(g) = &k.group {
                let e = group_max.entry(g).or_insert(0);
                *e = (*e).max(kid_sizes[k.id.as_str()].0);
            }
        }
        for k in kids {
            if let Some(g) = &k.group {
                kid_sizes.get_mut(k.id.as_str()).unwrap().0 = group_max[g];
            }
        }
        for k in kids {
            let (kw, kh) = kid_sizes[k.id.as_str()];
            if !first {
                h += GAP;
            }
            first = false;
            w = w.max(kw);
            h += kh;
            sizes.insert(k.id.clone(), (kw, kh));
        }
        if first {
            h = ROW_H; // completely empty partition (invalid, but drawable)
        }
        let total = (w + 2 * PAD, h + 2 * PAD);
        sizes.insert(pid.to_string(), total);
        total
    }

    let base = d.base_id().expect("diagram has a base partition");
    let mut sizes = BTreeMap::new();
    let (bw, bh) = size(&base, &content, &children, &mut sizes);

    // top-down placement
    struct Placer<'a> {
        content: &'a BTreeMap<String, Vec<Visual>>,
        children: &'a BTreeMap<&'a str, Vec<&'a Partition>>,
        sizes: &'a BTreeMap<String, (i64, i64)>,
        zones: Vec<Zone>,
        boxes: Vec<SceneBox>,
        connectors: Vec<Line>,
    }
    impl Placer<'_> {
        fn place(&mut self, p_id: &str, kind: PartitionKind, x: i64, y: i64, depth: usize) {
            let depth = depth + usize::from(kind == PartitionKind::Negation);
            let (w, h) = self.sizes[p_id];
            self.zones.push(Zone { id: p_id.to_string(), kind, rect: Rect { x, y, w, h }, neg_depth: depth });
            let mut cy = y + PAD;
            for v in self.content.get(p_id).into_iter().flatten() {
                let vw = v.width();
                for (i, (id, bk, label)) in v.rows.iter().enumerate() {
                    self.boxes.push(SceneBox {
                        id: id.clone(),
                        kind: *bk,
                        label: label.clone(),
                        rect: Rect { x: x + PAD, y: cy + i as i64 * ROW_H, w: vw, h: ROW_H },
                        neg_depth: depth,
                    });
                }
                cy += v.height() + GAP;
            }
            let empty = vec![];
            let kids = self.children.get(p_id).unwrap_or(&empty).clone();
            let mut prev_in_group: BTreeMap<&String, Rect> = BTreeMap::new();
            for k in kids {
                let (kw, kh) = self.sizes[&k.id];
                let rect = Rect { x: x + PAD, y: cy, w: kw, h: kh };
                if let Some(g) = &k.group {
                    if let Some(prev) = prev_in_group.get(g) {
                        self.connectors.push(Line {
                            from: (prev.x + prev.w / 2, prev.y + prev.h),
                            to: (rect.x + rect.w / 2, rect.y),
                            style: LineStyle::DottedConnector,
                            label: None,
                        });
                    }
                    prev_in_group.insert(g, rect);
                }
                self.place(&k.id, k.kind, rect.x, rect.y, depth);
                cy += kh + GAP;
            }
        }
    }
    let mut placer = Placer {
        content: &content,
        children: &children,
        sizes: &sizes,
        zones: vec![],
        boxes: vec![],
        connectors: vec![],
    };
    placer.place(&base, PartitionKind::Base, PAD, PAD, 0);

    // edges: fused conditions vanish, arrow joins collapse two anchor edges
    // into one labeled line
    let centers: BTreeMap<&str, (i64, i64)> =
        placer.boxes.iter().map(|b| (b.id.as_str(), b.rect.center())).collect();
    let center_of = |box_id: &str, attr: &str| {
        let key = format!("{box_id}.{attr}");
        centers
            .get(key.as_str())
            .or_else(|| centers.get(box_id))
            .copied()
            .expect("validated endpoint has a drawn box")
    };
    let mut lines = Vec::new();
    for b in &d.builtins {
        if !arrows.contains(&&b.id) {
            continue;
        }
        let mut ends = (None, None);
        for e in &d.edges {
            for (ep, other) in [(&e.a, &e.b), (&e.b, &e.a)] {
                if ep.box_id == b.id {
                    let c = center_of(&other.box_id, &other.attr);
                    if ep.attr == "$1" {
                        ends.0 = Some(c);
                    } else {
                        ends.1 = Some(c);
                    }
                }
            }
        }
        if let (Some(from), Some(to)) = ends {
            lines.push(Line {
                from,
                to,
                style: LineStyle::Arrow,
                label: Some(b.op.symbol().to_string()),
            });
        }
    }
    for e in &d.edges {
        let hidden = |id: &String| fused.contains(&id) || arrows.contains(&id);
        if hidden(&e.a.box_id) || hidden(&e.b.box_id) {
            continue;
        }
        lines.push(Line {
            from: center_of(&e.a.box_id, &e.a.attr),
            to: center_of(&e.b.box_id, &e.b.attr),
            style: LineStyle::Edge,
            label: None,
        });
    }
    lines.extend(placer.connectors);

    Scene {
        width: bw + 2 * PAD,
        height: bh + 2 * PAD,
        zones: placer.zones,
        boxes: placer.boxes,
        lines,
    }
}

// ---------------------------------------------------------------------------
// SVG emission

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn to_svg(scene: &Scene, opts: RenderOptions) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"12\">\n",
        w = scene.width,
        h = scene.height
    );
    s.push_str(
        "<defs><marker id=\"arrow\" markerWidth=\"8\" markerHeight=\"8\" refX=\"7\" \
         refY=\"4\" orient=\"auto\"><path d=\"M0,0 L8,4 L0,8 z\"/></marker></defs>\n",
    );
    let _ = write!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        scene.width, scene.height
    );
    for z in &scene.zones {
        let fill = if opts.peirce_shading && z.neg_depth % 2 == 1 {
            "#d9d9d9"
        } else {
            "#ffffff"
        };
        let style = match z.kind {
            PartitionKind::Base => "stroke=\"none\"".to_string(),
            PartitionKind::Negation => {
                "stroke=\"#000000\" stroke-dasharray=\"6 3\" rx=\"6\"".to_string()
            }
            PartitionKind::Fuse => "stroke=\"#000000\" stroke-width=\"2\" rx=\"2\"".to_string(),
        };
        let _ = write!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" {}/>\n",
            z.rect.x, z.rect.y, z.rect.w, z.rect.h, fill, style
        );
    }
    for l in &scene.lines {
        let style = match l.style {
            LineStyle::Edge => "stroke=\"#000000\"".to_string(),
            LineStyle::Arrow => {
                "stroke=\"#000000\" marker-end=\"url(#arrow)\"".to_string()
            }
            LineStyle::DottedConnector => {
                if !opts.dotted_connectors {
                    continue;
                }
                "stroke=\"#000000\" stroke-dasharray=\"2 3\"".to_string()
            }
        };
        let _ = write!(
            s,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {}/>\n",
            l.from.0, l.from.1, l.to.0, l.to.1, style
        );
        if let Some(label) = &l.label {
            let mx = (l.from.0 + l.to.0) / 2;
            let my = (l.from.1 + l.to.1) / 2 - 2;
            let _ = write!(s, "<text x=\"{mx}\" y=\"{my}\">{}</text>\n", escape(label));
        }
    }
    for b in &scene.boxes {
        let stroke = match b.kind {
            BoxKind::TableHeader | BoxKind::OutputHeader | BoxKind::BuiltinName => {
                "stroke=\"#000000\" stroke-width=\"2\""
            }
            _ => "stroke=\"#000000\"",
        };
        let _ = write!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" {}/>\n",
            b.rect.x, b.rect.y, b.rect.w, b.rect.h, stroke
        );
        let _ = write!(
            s,
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            b.rect.x + TEXT_PAD,
            b.rect.y + ROW_H - TEXT_PAD,
            escape(&b.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Validate, lay out, and emit in one step.
pub fn render(d: &Diagram, opts: RenderOptions) -> Result<String, DiagramError> {
    let report = validate(d);
    if !report.is_valid() {
        return Err(DiagramError::Invalid(report.problems.join("; ")));
    }
    Ok(to_svg(&layout(d), opts))
}

/// Minimal XML well-formedness check: balanced, properly nested tags, quoted
/// attributes, and known character entities. Used by the test suites on
/// rendered output.
pub fn xml_well_formed(text: &str) -> Result<(), String> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut stack: Vec<String> = Vec::new();
    let mut seen_root = false;
    while i < bytes.len() {
        match bytes[i] {
            b'<' => {
                if text[i..].starts_with("<?") {
                    i = text[i..].find("?>").map(|j| i + j + 2).ok_or("unterminated <?")?;
                } else if text[i..].starts_with("<!--") {
                    i = text[i..].find("-->").map(|j| i + j + 3).ok_or("unterminated comment")?;
                } else if text[i..].starts_with("</") {
                    let end = text[i..].find('>').map(|j| i + j).ok_or("unterminated tag")?;
                    let name = text[i + 2..end].trim();
                    match stack.pop() {
                        Some(open) if open == name => {}
                        Some(open) => return Err(format!("</{name}> closes <{open}>")),
                        None => return Err(format!("</{name}> without opener")),
                    }
                    i = end + 1;
                } else {
                    let end = text[i..].find('>').map(|j| i + j).ok_or("unterminated tag")?;
                    let inner = &text[i + 1..end];
                    let self_closing = inner.ends_with('/');
                    let inner = inner.trim_end_matches('/');
                    let name = inner.split_whitespace().next().ok_or("empty tag")?;
                    if name.contains('=') || name.contains('"') {
                        return Err(format!("malformed tag name `{name}`"));
                    }
                    let quotes = inner.matches('"').count();
                    if quotes % 2 != 0 {
                        return Err(format!("unbalanced quotes in <{name}>"));
                    }
                    if stack.is_empty() {
                        if seen_root && !self_closing {
                            return Err("multiple root elements".to_string());
                        }
                        seen_root = true;
                    }
                    if !self_closing {
                        stack.push(name.to_string());
                    }
                    i = end + 1;
                }
            }
            b'&' => {
                let end = text[i..].find(';').map(|j| i + j).ok_or("unterminated entity")?;
                let ent = &text[i + 1..end];
                let ok = matches!(ent, "amp" | "lt" | "gt" | "quot" | "apos")
                    || (ent.starts_with('#') && ent[1..].chars().all(|c| c.is_ascii_digit()));
                if !ok {
                    return Err(format!("unknown entity &{ent};"));
                }
                i = end + 1;
            }
            b'>' => return Err("stray `>`".to_string()),
            _ => i += 1,
        }
    }
    if !stack.is_empty() {
        return Err(format!("unclosed tags: {stack:?}"));
    }
    if !seen_root {
        return Err("no root element".to_string());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Query;
    use crate::diagram::expand_fuse_boxes;
    use crate::translate::{to_builtin_form, trc_to_diagram, trc_to_representation_b};

    fn parse(s: &str) -> Query {
        crate::parser::parse_query(s).unwrap().query
    }

    fn division() -> Diagram {
        let q = parse(
            "{ q(A) | exists r in R [q.A = r.A and not(exists s in S [s.A > 0 and \
             not(exists r2 in R [(r2.B = s.B or r2.C = s.C) and r2.A = r.A])])] }",
        );
        trc_to_representation_b(&q).unwrap()
    }

    #[test]
    fn rendering_is_deterministic() {
        let d = division();
        let opts = RenderOptions { peirce_shading: true, dotted_connectors: true };
        assert_eq!(render(&d, opts).unwrap(), render(&d, opts).unwrap());
    }

    #[test]
    fn zones_nest_with_padding() {
        let scene = layout(&division());
        let by_id: std::collections::BTreeMap<&str, &Zone> =
            scene.zones.iter().map(|z| (z.id.as_str(), z)).collect();
        let d = division();
        for p in &d.partitions {
            if let Some(parent) = &p.parent {
                assert!(
                    by_id[parent.as_str()]
                        .rect
                        .contains_with_margin(&by_id[p.id.as_str()].rect, PAD),
                    "{} not inside {parent}",
                    p.id
                );
            }
        }
        // boxes sit inside their partition
        for b in &scene.boxes {
            let owner = scene
                .zones
                .iter()
                .filter(|z| z.rect.contains_with_margin(&b.rect, 0))
                .count();
            assert!(owner >= 1, "box {} outside all zones", b.id);
        }
    }

    #[test]
    fn fuse_group_members_share_a_width() {
        let scene = layout(&division());
        let d = division();
        let fuse_rects: Vec<&Zone> = scene
            .zones
            .iter()
            .filter(|z| z.kind == PartitionKind::Fuse)
            .collect();
        assert!(fuse_rects.len() >= 2);
        let widths: std::collections::BTreeSet<i64> =
            fuse_rects.iter().map(|z| z.rect.w).collect();
        assert_eq!(widths.len(), 1, "{fuse_rects:?}");
        assert_eq!(fuse_rects.len(), d.partitions.iter().filter(|p| p.kind == PartitionKind::Fuse).count());
    }

    #[test]
    fn shading_follows_negation_parity_only() {
        let d = division();
        let svg = render(&d, RenderOptions { peirce_shading: true, ..Default::default() })
            .unwrap();
        assert!(svg.contains("#d9d9d9"));
        let unshaded =
            render(&d, RenderOptions::default()).unwrap();
        assert!(!unshaded.contains("#d9d9d9"));

        // no negations -> no gray even when shading is on
        let flat = trc_to_diagram(&to_builtin_form(&parse("exists r in R [r.A = 1]")).unwrap())
            .unwrap();
        let svg =
            render(&flat, RenderOptions { peirce_shading: true, ..Default::default() }).unwrap();
        assert!(!svg.contains("#d9d9d9"));
    }

    #[test]
    fn fuse_expansion_keeps_box_parity() {
        let d = division();
        let before = layout(&d);
        let after = layout(&expand_fuse_boxes(&d).unwrap());
        let parity = |scene: &Scene| -> std::collections::BTreeMap<String, usize> {
            scene.boxes.iter().map(|b| (b.id.clone(), b.neg_depth % 2)).collect()
        };
        assert_eq!(parity(&before), parity(&after));
    }

    #[test]
    fn dotted_connectors_are_optional() {
        let d = division();
        let with = render(&d, RenderOptions { dotted_connectors: true, ..Default::default() })
            .unwrap();
        let without = render(&d, RenderOptions::default()).unwrap();
        assert!(with.contains("stroke-dasharray=\"2 3\""));
        assert!(!without.contains("stroke-dasharray=\"2 3\""));
    }

    #[test]
    fn fused_selection_text_lands_in_the_attribute_box() {
        let q = parse("{ q(A) | exists r in R [q.A = r.A and r.B < 4] }");
        let d = trc_to_representation_b(&q).unwrap();
        assert_eq!(d.hints.fused_selections.len(), 1);
        let svg = render(&d, RenderOptions::default()).unwrap();
        assert!(svg.contains("B&lt;4"), "{svg}");
    }

    #[test]
    fn arrow_joins_render_as_one_labeled_line() {
        let q = parse("exists r in R [not(exists s in S [r.A < s.B])]");
        let d = trc_to_representation_b(&q).unwrap();
        assert_eq!(d.hints.arrow_joins.len(), 1);
        let scene = layout(&d);
        let arrows: Vec<&Line> =
            scene.lines.iter().filter(|l| l.style == LineStyle::Arrow).collect();
        assert_eq!(arrows.len(), 1);
        assert_eq!(arrows[0].label.as_deref(), Some("<"));
        // the two anchor edges are not drawn separately
        assert!(scene.lines.iter().all(|l| l.style != LineStyle::Edge));
    }

    #[test]
    fn output_is_rendered_well_formed() {
        for opts in [
            RenderOptions::default(),
            RenderOptions { peirce_shading: true, dotted_connectors: true },
        ] {
            let svg = render(&division(), opts).unwrap();
            xml_well_formed(&svg).unwrap();
        }
    }

    #[test]
    fn xml_checker_rejects_broken_documents() {
        assert!(xml_well_formed("<a><b></a></b>").is_err());
        assert!(xml_well_formed("<a>").is_err());
        assert!(xml_well_formed("<a attr=\"x></a>").is_err());
        assert!(xml_well_formed("<a>&bogus;</a>").is_err());
        assert!(xml_well_formed("<a/><b/>").is_ok());
        assert!(xml_well_formed("no markup").is_err());
    }
}
