//! Seeded generator of synthetic parts-list drawings.
//!
//! Layout (image coordinates, y grows downward): a title cell `<WORD> LIST`
//! at the bottom of the table, the column header row directly above it and
//! the item rows stacked upward from the header. Row 0 is the row touching
//! the header. A small title block with author and date sits to the right.
//!
//! Labels: `header/1`, `materials/2` (row index, cell), `part_description/1`,
//! `author/1`, `date/1`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::drawing::{BoundingBox, Cell, Drawing, VISUAL_DIM};

const TITLE_WORDS: &[&str] = &["PARTS", "PART", "COMPONENT", "ITEMS"];
const HEADERS: &[&str] = &["ITEM", "DESCRIPTION", "MATERIAL", "QTY"];
const WIDTHS: &[u32] = &[60, 200, 160, 50];
const DESCRIPTIONS: &[&str] =
    &["Spring", "Jacket", "Spacer", "Ring", "Double Spring", "Seal Ring", "Washer"];
const MATERIALS: &[&str] = &["NICKEL", "COBALT", "STEEL", "BRONZE", "PTFE"];
const NAMES: &[&str] = &["SMITH", "JANSSENS", "PEETERS", "MAES", "WOUTERS"];
const ROW_H: u32 = 20;

/// Bottom-left placement of a generated table.
#[derive(Debug, Clone, Copy)]
struct Origin {
    x: u32,
    title_y: u32,
}

/// One drawing with `rows` item rows.
pub fn parts_list<R: Rng>(id: &str, rows: usize, rng: &mut R) -> Drawing {
    let origin = Origin { x: rng.gen_range(40..140), title_y: rng.gen_range(760..840) };
    let table_w: u32 = WIDTHS.iter().sum();
    let mut cells = Vec::new();
    let title = format!("{} LIST", TITLE_WORDS.choose(rng).unwrap());
    cells.push(Cell::new("title", BoundingBox::new(origin.x, origin.title_y, table_w, ROW_H), &title));

    let mut col_x = Vec::new();
    let mut x = origin.x;
    for w in WIDTHS {
        col_x.push(x);
        x += w;
    }
    let header_y = origin.title_y - ROW_H;
    for (j, h) in HEADERS.iter().enumerate() {
        cells.push(Cell::new(format!("h{j}"), BoundingBox::new(col_x[j], header_y, WIDTHS[j], ROW_H), h));
    }
    for i in 0..rows {
        let y = header_y - ROW_H * (i as u32 + 1);
        let texts = [
            format!("{}", i + 1),
            DESCRIPTIONS.choose(rng).unwrap().to_string(),
            MATERIALS.choose(rng).unwrap().to_string(),
            format!("{}", rng.gen_range(1..5)),
        ];
        for (j, t) in texts.iter().enumerate() {
            cells.push(Cell::new(format!("r{i}c{j}"), BoundingBox::new(col_x[j], y, WIDTHS[j], ROW_H), t));
        }
    }

    let block_x = origin.x + table_w + rng.gen_range(80..160);
    let author = format!("drawn {}", NAMES.choose(rng).unwrap());
    let date = format!("date 2019-{:02}-{:02}", rng.gen_range(1..13), rng.gen_range(1..29));
    cells.push(Cell::new("author", BoundingBox::new(block_x, origin.title_y, 180, ROW_H), &author));
    cells.push(Cell::new("date", BoundingBox::new(block_x, origin.title_y - ROW_H, 180, ROW_H), &date));
    cells.push(Cell::new("scale", BoundingBox::new(block_x, origin.title_y - 2 * ROW_H, 180, ROW_H), "scale 1:1"));

    let mut d = Drawing::new(id, cells);
    for j in 0..HEADERS.len() {
        d.add_label("header", &format!("h{j}"), None);
    }
    for i in 0..rows {
        for j in 0..HEADERS.len() {
            d.add_label("materials", &format!("r{i}c{j}"), Some(i as u32));
        }
        d.add_label("part_description", &format!("r{i}c1"), None);
    }
    d.add_label("author", "author", None);
    d.add_label("date", "date", None);
    d.visual_features = Some((0..VISUAL_DIM).map(|_| rng.gen_range(0.0..1.0)).collect());
    d
}

/// `row_counts.len()` drawings with ids `d00`, `d01`, ...
pub fn corpus(row_counts: &[usize], seed: u64) -> Vec<Drawing> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    row_counts
        .iter()
        .enumerate()
        .map(|(i, &rows)| parts_list(&format!("d{i:02}"), rows, &mut rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drawing::AdjacencyParams;

    #[test]
    fn generated_drawings_validate() {
        for (d, rows) in corpus(&[1, 3, 6], 7).iter().zip([1, 3, 6]) {
            d.validate().unwrap();
            assert_eq!(d.max_label_index("materials"), Some(rows - 1));
            assert_eq!(d.label_atoms("materials").len(), 4 * rows as usize);
        }
    }

    #[test]
    fn header_sits_on_title() {
        let d = &corpus(&[2], 1)[0];
        let facts = d.background(&AdjacencyParams::default());
        for j in 0..4 {
            assert!(facts.contains(&crate::logic::parse_atom(&format!("above_below(h{j}, title)")).unwrap()));
            assert!(facts.contains(&crate::logic::parse_atom(&format!("above_below(r0c{j}, h{j})")).unwrap()));
        }
    }

    #[test]
    fn seeded_output_is_stable() {
        assert_eq!(corpus(&[2, 2], 3)[1].to_json(), corpus(&[2, 2], 3)[1].to_json());
    }
}
