//! Density-based segmentation of drawing bitmaps.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drawing::BoundingBox;

pub const DEFAULT_THRESHOLD: u8 = 200;
pub const DEFAULT_EPS: f64 = 30.0;
pub const NOISE: i32 = -1;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("cannot decode image: {0}")]
    Decode(#[from] image::ImageError),
    #[error("cannot read image: {0}")]
    Io(#[from] std::io::Error),
    #[error("bitmap has no pixels")]
    Empty,
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("eps must be positive")]
    InvalidEps,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, SegmentationError> {
        if width == 0 || height == 0 {
            return Err(SegmentationError::Empty);
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(SegmentationError::BufferSize { expected, actual: pixels.len() });
        }
        Ok(Bitmap { width, height, pixels })
    }

    pub fn blank(width: u32, height: u32) -> Result<Self, SegmentationError> {
        Self::new(width, height, vec![255; width as usize * height as usize])
    }

    /// Decodes PGM or PNG data, converting color images to grayscale.
    pub fn decode(bytes: &[u8]) -> Result<Self, SegmentationError> {
        let img = image::load_from_memory(bytes)?.to_luma8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    pub fn open(path: &Path) -> Result<Self, SegmentationError> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

/// Pixels darker than `threshold`, in row-major order.
pub fn foreground_pixels(bmp: &Bitmap, threshold: u8) -> Vec<Point> {
    let mut out = Vec::new();
    for y in 0..bmp.height {
        for x in 0..bmp.width {
            if bmp.get(x, y) < threshold {
                out.push(Point { x, y });
            }
        }
    }
    out
}

/// `max(1, round(1e-5 · width · height))`.
pub fn min_pts_for(width: u32, height: u32) -> usize {
    ((1e-5 * width as f64 * height as f64).round() as usize).max(1)
}

fn within(a: Point, b: Point, eps: f64) -> bool {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    dx * dx + dy * dy <= eps * eps
}

struct Grid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[Point], eps: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(*p, eps)).or_default().push(i);
        }
        Grid { cell: eps, buckets }
    }

    fn key(p: Point, cell: f64) -> (i64, i64) {
        ((p.x as f64 / cell).floor() as i64, (p.y as f64 / cell).floor() as i64)
    }

    fn neighbors(&self, points: &[Point], i: usize, eps: f64, out: &mut Vec<usize>) {
        out.clear();
        let (kx, ky) = Self::key(points[i], self.cell);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(b) = self.buckets.get(&(kx + dx, ky + dy)) {
                    out.extend(b.iter().copied().filter(|&j| within(points[i], points[j], eps)));
                }
            }
        }
    }

    fn count_at_least(&self, points: &[Point], i: usize, eps: f64, min: usize) -> bool {
        let (kx, ky) = Self::key(points[i], self.cell);
        let mut n = 0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(b) = self.buckets.get(&(kx + dx, ky + dy)) {
                    n += b.iter().filter(|&&j| within(points[i], points[j], eps)).count();
                    if n >= min {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// DBSCAN with Euclidean distance. A point's neighborhood includes the
/// point itself; a core point has at least `min_pts` neighbors within
/// `eps`. Clusters are numbered in the scan order of their first core
/// point; a border point goes to the first cluster reaching it. Returns one
/// label per input point, [`NOISE`] for noise.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Result<Vec<i32>, SegmentationError> {
    if !(eps > 0.0) {
        return Err(SegmentationError::InvalidEps);
    }
    let min_pts = min_pts.max(1);
    let grid = Grid::new(points, eps);
    let core: Vec<bool> = (0..points.len())
        .into_par_iter()
        .map(|i| grid.count_at_least(points, i, eps, min_pts))
        .collect();
    let mut labels = vec![NOISE; points.len()];
    let mut assigned = vec![false; points.len()];
    let mut next = 0i32;
    let mut buf = Vec::new();
    let mut queue = VecDeque::new();
    for i in 0..points.len() {
        if assigned[i] || !core[i] {
            continue;
        }
        let id = next;
        next += 1;
        labels[i] = id;
        assigned[i] = true;
        queue.push_back(i);
        while let Some(p) = queue.pop_front() {
            grid.neighbors(points, p, eps, &mut buf);
            for &q in &buf {
                if assigned[q] {
                    continue;
                }
                assigned[q] = true;
                labels[q] = id;
                if core[q] {
                    queue.push_back(q);
                }
            }
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub cluster: usize,
    pub pixels: usize,
    pub bbox: BoundingBox,
}

/// Bounding box and size of every cluster, in cluster order.
pub fn segment_bboxes(points: &[Point], labels: &[i32]) -> Vec<Segment> {
    let n = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let mut acc: Vec<Option<(u32, u32, u32, u32, usize)>> = vec![None; n];
    for (p, &l) in points.iter().zip(labels) {
        if l < 0 {
            continue;
        }
        let e = &mut acc[l as usize];
        *e = Some(match *e {
            None => (p.x, p.y, p.x, p.y, 1),
            Some((x0, y0, x1, y1, c)) => (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y), c + 1),
        });
    }
    acc.into_iter()
        .enumerate()
        .filter_map(|(i, a)| {
            a.map(|(x0, y0, x1, y1, c)| Segment {
                cluster: i,
                pixels: c,
                bbox: BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub threshold: u8,
    pub eps: f64,
    /// Overrides the size-derived minimum when set.
    pub min_pts: Option<usize>,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams { threshold: DEFAULT_THRESHOLD, eps: DEFAULT_EPS, min_pts: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub bbox: BoundingBox,
    pub pixels: usize,
}

/// Output document: `{"clusters": [{"bbox": [x,y,w,h], "pixels": n}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub clusters: Vec<SegmentEntry>,
}

pub fn segment(bmp: &Bitmap, params: &SegmentParams) -> Result<Segmentation, SegmentationError> {
    let points = foreground_pixels(bmp, params.threshold);
    let min_pts = params.min_pts.unwrap_or_else(|| min_pts_for(bmp.width, bmp.height));
    let labels = dbscan(&points, params.eps, min_pts)?;
    let clusters = segment_bboxes(&points, &labels)
        .into_iter()
        .map(|s| SegmentEntry { bbox: s.bbox, pixels: s.pixels })
        .collect();
    Ok(Segmentation { clusters })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn foreground_examples() {
        let white = Bitmap::blank(4, 4).unwrap();
        assert!(foreground_pixels(&white, 200).is_empty());
        let mut one = white.clone();
        one.set(2, 1, 0);
        assert_eq!(foreground_pixels(&one, 200), vec![Point { x: 2, y: 1 }]);
        let mut checker = white;
        for y in 0..4 {
            for x in 0..4 {
                if (x + y) % 2 == 0 {
                    checker.set(x, y, 0);
                }
            }
        }
        assert_eq!(foreground_pixels(&checker, 200).len(), 8);
    }

    #[test]
    fn min_pts_formula() {
        assert_eq!(min_pts_for(2738, 2738), 75);
        assert_eq!(min_pts_for(10, 10), 1);
    }

    #[test]
    fn isolated_pixel_is_noise() {
        let pts = [Point { x: 5, y: 5 }];
        assert_eq!(dbscan(&pts, 30.0, 75).unwrap(), vec![NOISE]);
        assert!(dbscan(&[], 30.0, 1).unwrap().is_empty());
    }

    #[test]
    fn bbox_of_square() {
        let pts: Vec<Point> = (0..10).flat_map(|y| (0..10).map(move |x| Point { x, y })).collect();
        let labels = dbscan(&pts, 30.0, 5).unwrap();
        let segs = segment_bboxes(&pts, &labels);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].bbox, BoundingBox::new(0, 0, 10, 10));
        assert_eq!(segs[0].pixels, 100);
        assert!(segment_bboxes(&pts, &vec![NOISE; pts.len()]).is_empty());
    }

    #[test]
    fn decodes_pgm() {
        let mut data = b"P5\n3 2\n255\n".to_vec();
        data.extend([255, 0, 255, 255, 255, 10]);
        let bmp = Bitmap::decode(&data).unwrap();
        assert_eq!((bmp.width, bmp.height), (3, 2));
        assert_eq!(foreground_pixels(&bmp, 200), vec![Point { x: 1, y: 0 }, Point { x: 2, y: 1 }]);
    }
}
