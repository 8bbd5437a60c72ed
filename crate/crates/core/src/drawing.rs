//! Drawings, cells and annotations, and the relational background facts
//! derived from them.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Atom, FactSet, Term, Var};
use crate::probtext::{CharDistribution, ProbString, TextError};

/// Length of an ingested visual feature vector.
pub const VISUAL_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum DrawingError {
    #[error("malformed drawing document at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("duplicate cell id `{0}`")]
    DuplicateCell(String),
    #[error("cell `{cell}` has an invalid bounding box: {reason}")]
    InvalidBox { cell: String, reason: &'static str },
    #[error("label `{label}` refers to unknown cell `{cell}`")]
    UnknownCell { label: String, cell: String },
    #[error("label `{0}` mixes indexed and unindexed annotations")]
    MixedIndexing(String),
    #[error("visual feature vector must hold {VISUAL_DIM} finite values, got {0}")]
    VisualFeatures(String),
    #[error("OCR distribution of cell `{cell}`: {source}")]
    Ocr {
        cell: String,
        #[source]
        source: TextError,
    },
}

/// Axis-aligned box in pixels; `x`, `y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl From<[u32; 4]> for BoundingBox {
    fn from([x, y, width, height]: [u32; 4]) -> Self {
        BoundingBox { x, y, width, height }
    }
}

impl From<BoundingBox> for [u32; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.width, b.height]
    }
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        BoundingBox { x, y, width, height }
    }

    pub fn right(&self) -> i64 {
        self.x as i64 + self.width as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.height as i64
    }

    fn center_y2(&self) -> i64 {
        2 * self.y as i64 + self.height as i64
    }

    fn center_x2(&self) -> i64 {
        2 * self.x as i64 + self.width as i64
    }

    /// Length of the shared extent on the x axis (zero if disjoint).
    pub fn x_overlap(&self, other: &BoundingBox) -> i64 {
        (self.right().min(other.right()) - (self.x as i64).max(other.x as i64)).max(0)
    }

    pub fn y_overlap(&self, other: &BoundingBox) -> i64 {
        (self.bottom().min(other.bottom()) - (self.y as i64).max(other.y as i64)).max(0)
    }

    fn validate(&self) -> Result<(), &'static str> {
        if self.width == 0 {
            return Err("width must be positive");
        }
        if self.height == 0 {
            return Err("height must be positive");
        }
        Ok(())
    }
}

/// Cell content: known text, or an open slot in a design under construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellText {
    Known(String),
    Open,
}

impl CellText {
    pub fn known(&self) -> Option<&str> {
        match self {
            CellText::Known(s) => Some(s),
            CellText::Open => None,
        }
    }

    /// Whitespace-delimited tokens, case and punctuation preserved.
    pub fn tokens(&self) -> Vec<&str> {
        self.known().map(|s| s.split_whitespace().collect()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    pub bbox: BoundingBox,
    pub text: CellText,
    pub ocr: Option<ProbString>,
}

impl Cell {
    pub fn new(id: impl Into<String>, bbox: BoundingBox, text: &str) -> Self {
        Cell { id: id.into(), bbox, text: CellText::Known(text.to_string()), ocr: None }
    }

    pub fn open(id: impl Into<String>, bbox: BoundingBox) -> Self {
        Cell { id: id.into(), bbox, text: CellText::Open, ocr: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub cell: String,
    #[serde(default)]
    pub index: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drawing {
    pub id: String,
    pub cells: Vec<Cell>,
    pub labels: BTreeMap<String, Vec<Annotation>>,
    pub visual_features: Option<Vec<f64>>,
}

// Wire format of the drawing document.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRepr {
    id: String,
    cells: Vec<CellRepr>,
    #[serde(default)]
    labels: BTreeMap<String, Vec<Annotation>>,
    #[serde(default)]
    visual_features: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRepr {
    id: String,
    bbox: BoundingBox,
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ocr: Option<OcrRepr>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum OcrRepr {
    Full { positions: Vec<BTreeMap<String, f64>>, length: usize },
    Positions(Vec<BTreeMap<String, f64>>),
}

fn ocr_from_repr(repr: OcrRepr, cell: &str) -> Result<ProbString, DrawingError> {
    let (positions, length) = match repr {
        OcrRepr::Full { positions, length } => (positions, length),
        OcrRepr::Positions(p) => {
            let n = p.len();
            (p, n)
        }
    };
    let mut dists = Vec::with_capacity(positions.len());
    for (i, pos) in positions.into_iter().enumerate() {
        let mut map = BTreeMap::new();
        for (k, p) in pos {
            let mut chars = k.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => {
                    map.insert(c, p);
                }
                _ => {
                    return Err(DrawingError::Parse {
                        path: format!("cells.{cell}.ocr.positions[{i}]"),
                        message: format!("key {k:?} is not a single character"),
                    })
                }
            }
        }
        dists.push(CharDistribution(map));
    }
    let ps = ProbString { positions: dists, length };
    ps.validate().map_err(|source| DrawingError::Ocr { cell: cell.to_string(), source })?;
    Ok(ps)
}

fn ocr_to_repr(ps: &ProbString) -> OcrRepr {
    OcrRepr::Full {
        positions: ps
            .positions
            .iter()
            .map(|d| d.iter().map(|(c, p)| (c.to_string(), p)).collect())
            .collect(),
        length: ps.length,
    }
}

impl Drawing {
    pub fn new(id: impl Into<String>, cells: Vec<Cell>) -> Self {
        Drawing { id: id.into(), cells, labels: BTreeMap::new(), visual_features: None }
    }

    /// Parses and validates a JSON drawing document.
    pub fn from_json(document: &[u8]) -> Result<Drawing, DrawingError> {
        let de = &mut serde_json::Deserializer::from_slice(document);
        let repr: DocumentRepr = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            DrawingError::Parse { path, message: e.into_inner().to_string() }
        })?;
        let mut cells = Vec::with_capacity(repr.cells.len());
        for c in repr.cells {
            let ocr = c.ocr.map(|o| ocr_from_repr(o, &c.id)).transpose()?;
            cells.push(Cell {
                text: c.text.map_or(CellText::Open, CellText::Known),
                id: c.id,
                bbox: c.bbox,
                ocr,
            });
        }
        let drawing = Drawing {
            id: repr.id,
            cells,
            labels: repr.labels,
            visual_features: repr.visual_features,
        };
        drawing.validate()?;
        Ok(drawing)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_repr()).expect("drawing serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_repr()).expect("drawing serializes")
    }

    fn to_repr(&self) -> DocumentRepr {
        DocumentRepr {
            id: self.id.clone(),
            cells: self
                .cells
                .iter()
                .map(|c| CellRepr {
                    id: c.id.clone(),
                    bbox: c.bbox,
                    text: c.text.known().map(str::to_string),
                    ocr: c.ocr.as_ref().map(ocr_to_repr),
                })
                .collect(),
            labels: self.labels.clone(),
            visual_features: self.visual_features.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), DrawingError> {
        let mut ids = HashSet::new();
        for c in &self.cells {
            if !ids.insert(c.id.as_str()) {
                return Err(DrawingError::DuplicateCell(c.id.clone()));
            }
            c.bbox
                .validate()
                .map_err(|reason| DrawingError::InvalidBox { cell: c.id.clone(), reason })?;
            if let Some(ocr) = &c.ocr {
                ocr.validate()
                    .map_err(|source| DrawingError::Ocr { cell: c.id.clone(), source })?;
            }
        }
        for (label, anns) in &self.labels {
            for a in anns {
                if !ids.contains(a.cell.as_str()) {
                    return Err(DrawingError::UnknownCell {
                        label: label.clone(),
                        cell: a.cell.clone(),
                    });
                }
            }
            let indexed = anns.iter().filter(|a| a.index.is_some()).count();
            if indexed != 0 && indexed != anns.len() {
                return Err(DrawingError::MixedIndexing(label.clone()));
            }
        }
        if let Some(v) = &self.visual_features {
            if v.len() != VISUAL_DIM || v.iter().any(|x| !x.is_finite()) {
                return Err(DrawingError::VisualFeatures(format!("{} values", v.len())));
            }
        }
        Ok(())
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    /// True when some cell's text is open.
    pub fn is_partial(&self) -> bool {
        self.cells.iter().any(|c| c.text == CellText::Open)
    }

    pub fn add_label(&mut self, label: &str, cell: &str, index: Option<u32>) {
        let anns = self.labels.entry(label.to_string()).or_default();
        let a = Annotation { cell: cell.to_string(), index };
        if !anns.contains(&a) {
            anns.push(a);
        }
    }

    /// Ground target atoms for `label` in annotation order: `label(cell)` or
    /// `label(index, cell)` for indexed labels.
    pub fn label_atoms(&self, label: &str) -> Vec<Atom> {
        self.labels
            .get(label)
            .map(|anns| anns.iter().map(|a| label_atom(label, a)).collect())
            .unwrap_or_default()
    }

    /// Largest annotated index of `label`, if the label is indexed here.
    pub fn max_label_index(&self, label: &str) -> Option<u32> {
        self.labels.get(label)?.iter().filter_map(|a| a.index).max()
    }

    /// Cell facts, adjacency, successor and zero facts: everything the
    /// learner and the miner read.
    pub fn background(&self, params: &AdjacencyParams) -> FactSet {
        let mut fs = drawing_to_facts(self);
        fs.extend(derive_adjacency(self, params));
        fs.extend(derive_succ(self.cells.len() as u32));
        fs.insert(Atom::new("zero", vec![Term::Int(0)]));
        fs
    }
}

pub fn label_atom(label: &str, a: &Annotation) -> Atom {
    let cell = Term::sym(&a.cell);
    match a.index {
        Some(i) => Atom::new(label, vec![Term::Int(i as i64), cell]),
        None => Atom::new(label, vec![cell]),
    }
}

pub fn load_drawing(document: &[u8]) -> Result<Drawing, DrawingError> {
    Drawing::from_json(document)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdjacencyParams {
    /// Largest vertical (or horizontal) gap, in pixels, between adjacent cells.
    pub gap_tol: f64,
    /// Required overlap as a fraction of the narrower cell's extent.
    pub overlap_frac: f64,
}

impl Default for AdjacencyParams {
    fn default() -> Self {
        AdjacencyParams { gap_tol: 5.0, overlap_frac: 0.5 }
    }
}

#[derive(Clone, Copy)]
enum Axis {
    Vertical,
    Horizontal,
}

/// Gap from `a` to `b` along the axis if `b` is adjacent after `a`.
fn adjacency_gap(a: &BoundingBox, b: &BoundingBox, axis: Axis, p: &AdjacencyParams) -> Option<i64> {
    let (gap, overlap, extent, ordered) = match axis {
        Axis::Vertical => (
            b.y as i64 - a.bottom(),
            a.x_overlap(b),
            a.width.min(b.width),
            a.center_y2() < b.center_y2(),
        ),
        Axis::Horizontal => (
            b.x as i64 - a.right(),
            a.y_overlap(b),
            a.height.min(b.height),
            a.center_x2() < b.center_x2(),
        ),
    };
    let gap_ok = (gap as f64).abs() <= p.gap_tol;
    let overlap_ok = overlap > 0 && overlap as f64 >= p.overlap_frac * extent as f64;
    (ordered && gap_ok && overlap_ok).then_some(gap)
}

fn directional(drawing: &Drawing, pred: &str, axis: Axis, p: &AdjacencyParams) -> Vec<Atom> {
    let cells = &drawing.cells;
    // For each cell, the gap to its nearest predecessor along the axis.
    let nearest: Vec<Option<i64>> = cells
        .iter()
        .enumerate()
        .map(|(j, b)| {
            cells
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .filter_map(|(_, a)| adjacency_gap(&a.bbox, &b.bbox, axis, p))
                .map(i64::abs)
                .min()
        })
        .collect();
    let mut out = Vec::new();
    for (i, a) in cells.iter().enumerate() {
        for (j, b) in cells.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Some(g) = adjacency_gap(&a.bbox, &b.bbox, axis, p) {
                if Some(g.abs()) == nearest[j] {
                    out.push(Atom::new(pred, vec![Term::sym(&a.id), Term::sym(&b.id)]));
                }
            }
        }
    }
    out
}

/// `above_below(A,B)` when A is the nearest cell directly above B, and
/// `left_right(A,B)` when A is the nearest cell directly left of B.
pub fn derive_adjacency(drawing: &Drawing, params: &AdjacencyParams) -> FactSet {
    let mut fs = FactSet::new();
    fs.extend(directional(drawing, "above_below", Axis::Vertical, params));
    fs.extend(directional(drawing, "left_right", Axis::Horizontal, params));
    fs
}

/// `succ(i, i+1)` for `0 <= i < max_index`.
pub fn derive_succ(max_index: u32) -> FactSet {
    (0..max_index as i64)
        .map(|i| Atom::new("succ", vec![Term::Int(i), Term::Int(i + 1)]))
        .collect()
}

/// `cell/1`, `cell_contains/2` per token and `bbox/5` facts. Open cells get
/// `cell_contains(C, V)` with a fresh placeholder variable.
pub fn drawing_to_facts(drawing: &Drawing) -> FactSet {
    let mut fs = FactSet::new();
    let mut next_var = 0u32;
    for c in &drawing.cells {
        let id = Term::sym(&c.id);
        fs.insert(Atom::new("cell", vec![id.clone()]));
        match &c.text {
            CellText::Known(_) => {
                for tok in c.text.tokens() {
                    fs.insert(Atom::new("cell_contains", vec![id.clone(), Term::sym(tok)]));
                }
            }
            CellText::Open => {
                fs.insert(Atom::new("cell_contains", vec![id.clone(), Term::Var(Var(next_var))]));
                next_var += 1;
            }
        }
        let b = c.bbox;
        fs.insert(Atom::new(
            "bbox",
            vec![
                id,
                Term::Int(b.x as i64),
                Term::Int(b.y as i64),
                Term::Int(b.width as i64),
                Term::Int(b.height as i64),
            ],
        ));
    }
    fs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(json: &str) -> Result<Drawing, DrawingError> {
        load_drawing(json.as_bytes())
    }

    #[test]
    fn minimal_document() {
        let d = doc(r#"{"id":"d1","cells":[{"id":"c1","bbox":[0,0,10,10],"text":"DRAWN"}]}"#)
            .unwrap();
        assert_eq!(d.cells.len(), 1);
        assert!(d.labels.is_empty());
    }

    #[test]
    fn label_mapping() {
        let d = doc(
            r#"{"id":"d","cells":[{"id":"c3","bbox":[0,0,5,5],"text":"x"}],
                "labels":{"author":[{"cell":"c3","index":null}]}}"#,
        )
        .unwrap();
        assert_eq!(d.labels["author"], vec![Annotation { cell: "c3".into(), index: None }]);
    }

    #[test]
    fn null_text_is_open() {
        let d = doc(r#"{"id":"d","cells":[{"id":"c7","bbox":[0,0,5,5],"text":null}]}"#).unwrap();
        assert_eq!(d.cells[0].text, CellText::Open);
        assert!(d.is_partial());
    }

    #[test]
    fn parse_error_names_path() {
        let e = doc(r#"{"id":"d","cells":[{"id":"c1","bbox":[0,0,"x",5],"text":"a"}]}"#)
            .unwrap_err();
        match e {
            DrawingError::Parse { path, .. } => assert!(path.starts_with("cells[0].bbox"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = doc(
            r#"{"id":"d","cells":[{"id":"c1","bbox":[0,0,5,5],"text":"a"},
                                 {"id":"c1","bbox":[9,0,5,5],"text":"b"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(e, DrawingError::DuplicateCell(id) if id == "c1"));
    }

    #[test]
    fn unknown_label_cell_and_zero_width() {
        let e = doc(r#"{"id":"d","cells":[],"labels":{"a":[{"cell":"zz"}]}}"#).unwrap_err();
        assert!(matches!(e, DrawingError::UnknownCell { .. }));
        let e = doc(r#"{"id":"d","cells":[{"id":"c","bbox":[0,0,0,5],"text":"a"}]}"#).unwrap_err();
        assert!(matches!(e, DrawingError::InvalidBox { .. }));
    }

    #[test]
    fn ocr_field_accepts_both_shapes() {
        let d = doc(
            r#"{"id":"d","cells":[{"id":"c","bbox":[0,0,5,5],"text":"ab",
                "ocr":{"positions":[{"a":0.9,"o":0.1},{"b":1.0}],"length":2}}]}"#,
        )
        .unwrap();
        assert_eq!(d.cells[0].ocr.as_ref().unwrap().best_reading(), "ab");
        let d = doc(
            r#"{"id":"d","cells":[{"id":"c","bbox":[0,0,5,5],"text":"a","ocr":[{"a":1.0}]}]}"#,
        )
        .unwrap();
        assert_eq!(d.cells[0].ocr.as_ref().unwrap().length, 1);
        let e = doc(
            r#"{"id":"d","cells":[{"id":"c","bbox":[0,0,5,5],"text":"a",
                "ocr":{"positions":[{"a":1.0}],"length":3}}]}"#,
        )
        .unwrap_err();
        assert!(matches!(e, DrawingError::Ocr { .. }));
    }

    fn grid(rows: u32, cols: u32, gap: u32) -> Drawing {
        let mut cells = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                cells.push(Cell::new(
                    format!("r{r}c{c}"),
                    BoundingBox::new(c * (40 + gap), r * (20 + gap), 40, 20),
                    "x",
                ));
            }
        }
        Drawing::new("grid", cells)
    }

    #[test]
    fn stacked_and_side_by_side() {
        let d = Drawing::new(
            "d",
            vec![
                Cell::new("a", BoundingBox::new(0, 0, 40, 20), "x"),
                Cell::new("b", BoundingBox::new(0, 22, 40, 20), "y"),
            ],
        );
        let fs = derive_adjacency(&d, &AdjacencyParams::default());
        assert_eq!(fs.to_string(), "above_below(a,b).\n");
        let d = Drawing::new(
            "d",
            vec![
                Cell::new("a", BoundingBox::new(0, 0, 40, 20), "x"),
                Cell::new("b", BoundingBox::new(41, 0, 40, 20), "y"),
            ],
        );
        let fs = derive_adjacency(&d, &AdjacencyParams::default());
        assert_eq!(fs.to_string(), "left_right(a,b).\n");
    }

    #[test]
    fn nearest_only() {
        // c sits just below b, which sits just below a; a and c overlap too
        // but a is not the nearest cell above c.
        let d = Drawing::new(
            "d",
            vec![
                Cell::new("a", BoundingBox::new(0, 0, 40, 20), "x"),
                Cell::new("b", BoundingBox::new(0, 21, 40, 2), "y"),
                Cell::new("c", BoundingBox::new(0, 24, 40, 20), "z"),
            ],
        );
        let fs = derive_adjacency(&d, &AdjacencyParams::default());
        let v: Vec<String> = fs.iter().map(|a| a.to_string()).collect();
        assert_eq!(v, ["above_below(a,b)", "above_below(b,c)"]);
    }

    #[test]
    fn wide_gap_not_adjacent() {
        let d = grid(2, 1, 6);
        assert!(derive_adjacency(&d, &AdjacencyParams::default()).is_empty());
    }

    #[test]
    fn succ_facts() {
        assert!(derive_succ(0).is_empty());
        assert_eq!(derive_succ(2).to_string(), "succ(0,1).\nsucc(1,2).\n");
        assert_eq!(derive_succ(5).len(), 5);
    }

    #[test]
    fn facts_for_cells() {
        let d = Drawing::new(
            "d",
            vec![
                Cell::new("c1", BoundingBox::new(1, 2, 3, 4), "PARTS LIST"),
                Cell::open("c2", BoundingBox::new(1, 9, 3, 4)),
            ],
        );
        let fs = drawing_to_facts(&d);
        assert_eq!(
            fs.to_string(),
            "cell(c1).\ncell_contains(c1,'PARTS').\ncell_contains(c1,'LIST').\nbbox(c1,1,2,3,4).\n\
             cell(c2).\ncell_contains(c2,A).\nbbox(c2,1,9,3,4).\n"
        );
        assert!(!fs.is_ground());
    }

    #[test]
    fn round_trip() {
        let mut d = grid(2, 2, 1);
        d.cells[1].text = CellText::Open;
        d.cells[0].ocr = Some(ProbString::certain("x"));
        d.add_label("materials", "r0c0", Some(0));
        d.visual_features = Some((0..64).map(|i| i as f64 * 0.5).collect());
        assert_eq!(load_drawing(&d.to_json()).unwrap(), d);
    }
}
