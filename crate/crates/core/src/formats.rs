//! Text file formats: detections, KITTI-style ground-truth labels,
//! weight vectors and track output. All floats are written with
//! Rust's shortest round-trip formatting, so write/parse cycles are
//! exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::TrackedBox;
use crate::geometry::BBox;
use crate::graph::Detection;
use crate::learning::GroundTruthBox;
use crate::potentials::{BlockLayout, BlockVector, WeightVector, APPEARANCE_DIM, TRANSITION_DIM};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_box(tokens: &[&str], path: &Path, line: usize) -> Result<BBox> {
    let mut vals = [0.0f64; 4];
    for (v, t) in vals.iter_mut().zip(tokens) {
        *v = t
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad coordinate '{t}'")))?;
    }
    let bbox = BBox::new(vals[0], vals[1], vals[2], vals[3]);
    if !bbox.is_valid() {
        return Err(parse_err(
            path,
            line,
            "box coordinates must satisfy x2 > x1 and y2 > y1",
        ));
    }
    Ok(bbox)
}

/// Detection files: one detection per line,
/// `frame class_id x1 y1 x2 y2 score`, `#` comments. Ids are assigned
/// by line order.
pub fn parse_detections(path: &Path) -> Result<Vec<Detection>> {
    let text = read_to_string(path)?;
    let mut dets = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 7 {
            return Err(parse_err(
                path,
                line,
                format!("expected 7 fields, found {}", tokens.len()),
            ));
        }
        let frame: u32 = tokens[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad frame '{}'", tokens[0])))?;
        let class_id: usize = tokens[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad class id '{}'", tokens[1])))?;
        let bbox = parse_box(&tokens[2..6], path, line)?;
        let score: f64 = tokens[6]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad score '{}'", tokens[6])))?;
        dets.push(Detection::new(dets.len() as u64, frame, class_id, bbox, score));
    }
    Ok(dets)
}

pub fn format_detections(dets: &[Detection]) -> String {
    let mut out = String::from("# frame class_id x1 y1 x2 y2 score\n");
    for d in dets {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            d.frame, d.class_id, d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2, d.score
        );
    }
    out
}

pub fn write_detections(path: &Path, dets: &[Detection]) -> Result<()> {
    write_file(path, &format_detections(dets))
}

/// Maps ground-truth type strings to class ids; unmapped types (and
/// DontCare) become ambiguous ignore boxes.
#[derive(Debug, Clone)]
pub struct ClassMap {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl ClassMap {
    pub fn new(names: &[&str]) -> Self {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        ClassMap { names, ids }
    }

    /// Car/Pedestrian/Cyclist, extended with ClassN fallbacks.
    pub fn default_kitti(num_classes: usize) -> Self {
        let base = ["Car", "Pedestrian", "Cyclist"];
        let mut names: Vec<String> = base
            .iter()
            .take(num_classes.min(base.len()))
            .map(|s| s.to_string())
            .collect();
        for k in names.len()..num_classes {
            names.push(format!("Class{k}"));
        }
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        ClassMap { names, ids }
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name_of(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }
}

/// KITTI tracking label lines:
/// `frame track_id type truncated occluded alpha x1 y1 x2 y2 ...`
/// (trailing 3D fields ignored). DontCare and unmapped types parse as
/// ambiguous boxes.
pub fn parse_gt_labels(path: &Path, classes: &ClassMap) -> Result<Vec<GroundTruthBox>> {
    let text = read_to_string(path)?;
    let mut gts = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() < 10 {
            return Err(parse_err(
                path,
                line,
                format!("expected at least 10 fields, found {}", tokens.len()),
            ));
        }
        let frame: u32 = tokens[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad frame '{}'", tokens[0])))?;
        let track_id: i64 = tokens[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad track id '{}'", tokens[1])))?;
        let bbox = parse_box(&tokens[6..10], path, line)?;
        let (class_id, ambiguous) = match classes.id_of(tokens[2]) {
            Some(id) => (id, false),
            None => (0, true),
        };
        gts.push(GroundTruthBox {
            frame,
            track_id,
            class_id,
            bbox,
            ambiguous,
        });
    }
    Ok(gts)
}

pub fn format_gt_labels(gts: &[GroundTruthBox], classes: &ClassMap) -> String {
    let mut out = String::new();
    for g in gts {
        let type_name = if g.ambiguous {
            "DontCare"
        } else {
            classes.name_of(g.class_id)
        };
        let _ = writeln!(
            out,
            "{} {} {} 0 0 -10 {} {} {} {} 0 0 0 0 0 0 0",
            g.frame, g.track_id, type_name, g.bbox.x1, g.bbox.y1, g.bbox.x2, g.bbox.y2
        );
    }
    out
}

pub fn write_gt_labels(path: &Path, gts: &[GroundTruthBox], classes: &ClassMap) -> Result<()> {
    write_file(path, &format_gt_labels(gts, classes))
}

/// Weight files: named blocks (`birth`, `death`, `appearance`,
/// `transition`, `pairwise K D`), each followed by whitespace-separated
/// values.
pub fn format_weights(w: &WeightVector) -> String {
    let mut out = String::new();
    let join = |vals: &[f64]| {
        vals.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "birth\n{}", w.birth());
    let _ = writeln!(out, "death\n{}", w.death());
    let _ = writeln!(out, "appearance\n{}", join(w.appearance()));
    let _ = writeln!(out, "transition\n{}", join(w.transition()));
    let k = w.layout.num_classes;
    let d = w.layout.relation_dim;
    let _ = writeln!(out, "pairwise {k} {d}");
    for a in 0..k {
        for b in 0..k {
            let _ = writeln!(out, "{}", join(w.pairwise(a, b)));
        }
    }
    out
}

pub fn write_weights(path: &Path, w: &WeightVector) -> Result<()> {
    write_file(path, &format_weights(w))
}

pub fn parse_weights(path: &Path) -> Result<WeightVector> {
    let text = read_to_string(path)?;
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        for t in trimmed.split_whitespace() {
            tokens.push((lineno + 1, t));
        }
    }
    struct Cursor<'a> {
        tokens: &'a [(usize, &'a str)],
        pos: usize,
        path: &'a Path,
    }
    impl Cursor<'_> {
        fn keyword(&mut self, expect: &str) -> Result<usize> {
            let Some(&(line, tok)) = self.tokens.get(self.pos) else {
                return Err(parse_err(self.path, 0, format!("missing '{expect}' section")));
            };
            if tok != expect {
                return Err(parse_err(
                    self.path,
                    line,
                    format!("expected section '{expect}', found '{tok}'"),
                ));
            }
            self.pos += 1;
            Ok(line)
        }
        fn floats(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
            let mut vals = Vec::with_capacity(count);
            for _ in 0..count {
                let Some(&(line, tok)) = self.tokens.get(self.pos) else {
                    return Err(parse_err(
                        self.path,
                        0,
                        format!("{what}: unexpected end of file"),
                    ));
                };
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(self.path, line, format!("{what}: bad value '{tok}'")))?;
                vals.push(v);
                self.pos += 1;
            }
            Ok(vals)
        }
    }
    let mut cur = Cursor {
        tokens: &tokens,
        pos: 0,
        path,
    };

    cur.keyword("birth")?;
    let birth = cur.floats(1, "birth")?;
    cur.keyword("death")?;
    let death = cur.floats(1, "death")?;
    cur.keyword("appearance")?;
    let appearance = cur.floats(APPEARANCE_DIM, "appearance")?;
    cur.keyword("transition")?;
    let transition = cur.floats(TRANSITION_DIM, "transition")?;
    let header_line = cur.keyword("pairwise")?;
    let dims = cur.floats(2, "pairwise dims")?;
    let (k, d) = (dims[0] as usize, dims[1] as usize);
    if k == 0 || d == 0 || dims[0].fract() != 0.0 || dims[1].fract() != 0.0 {
        return Err(parse_err(path, header_line, "bad pairwise dimensions"));
    }
    let pairwise = cur.floats(d * k * k, "pairwise")?;
    if cur.pos != tokens.len() {
        let (line, tok) = tokens[cur.pos];
        return Err(parse_err(path, line, format!("trailing content '{tok}'")));
    }

    let layout = BlockLayout::new(k, d);
    let mut values = Vec::with_capacity(layout.len());
    values.extend(birth);
    values.extend(death);
    values.extend(appearance);
    values.extend(transition);
    values.extend(pairwise);
    BlockVector::from_values(layout, values)
}

/// Track files: `frame track_id class_id x1 y1 x2 y2 score`.
pub fn format_tracks(tracks: &[TrackedBox]) -> String {
    let mut out = String::from("# frame track_id class_id x1 y1 x2 y2 score\n");
    for t in tracks {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            t.frame, t.track_id, t.class_id, t.bbox.x1, t.bbox.y1, t.bbox.x2, t.bbox.y2, t.score
        );
    }
    out
}

pub fn write_tracks(path: &Path, tracks: &[TrackedBox]) -> Result<()> {
    write_file(path, &format_tracks(tracks))
}

pub fn parse_tracks(path: &Path) -> Result<Vec<TrackedBox>> {
    let text = read_to_string(path)?;
    let mut tracks = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 8 {
            return Err(parse_err(
                path,
                line,
                format!("expected 8 fields, found {}", tokens.len()),
            ));
        }
        let frame: u32 = tokens[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad frame '{}'", tokens[0])))?;
        let track_id: i64 = tokens[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad track id '{}'", tokens[1])))?;
        let class_id: usize = tokens[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad class id '{}'", tokens[2])))?;
        let bbox = parse_box(&tokens[3..7], path, line)?;
        let score: f64 = tokens[7]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad score '{}'", tokens[7])))?;
        tracks.push(TrackedBox {
            frame,
            track_id,
            class_id,
            bbox,
            score,
        });
    }
    Ok(tracks)
}
