use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdassist_core::segmentation::{dbscan, min_pts_for, segment, Bitmap, Point, SegmentParams, NOISE};

/// Textbook DBSCAN: full pairwise neighbor lists, clusters seeded from core
/// points in input order, border points to the first cluster reaching them.
fn naive(points: &[Point], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let close = |a: Point, b: Point| {
        let dx = a.x as f64 - b.x as f64;
        let dy = a.y as f64 - b.y as f64;
        (dx * dx + dy * dy).sqrt() <= eps
    };
    let nbrs: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| close(points[i], points[j])).collect()).collect();
    let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i] != NOISE || !core[i] {
            continue;
        }
        labels[i] = next;
        let mut q = VecDeque::from([i]);
        while let Some(p) = q.pop_front() {
            for &j in &nbrs[p] {
                if labels[j] == NOISE {
                    labels[j] = next;
                    if core[j] {
                        q.push_back(j);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

fn partition(points: &[Point], labels: &[i32]) -> BTreeSet<BTreeSet<Point>> {
    let mut m: BTreeMap<i32, BTreeSet<Point>> = BTreeMap::new();
    for (p, l) in points.iter().zip(labels) {
        if *l != NOISE {
            m.entry(*l).or_default().insert(*p);
        }
    }
    m.into_values().collect()
}

/// Blobs of random density plus scattered noise, deduplicated and sorted
/// row-major like foreground pixels.
fn fixture(rng: &mut ChaCha8Rng, max_points: usize) -> Vec<Point> {
    let size = rng.gen_range(50..400u32);
    let mut pts = BTreeSet::new();
    let blobs = rng.gen_range(0..6);
    for _ in 0..blobs {
        let (cx, cy) = (rng.gen_range(0..size), rng.gen_range(0..size));
        let r = rng.gen_range(2..40u32);
        for _ in 0..rng.gen_range(1..max_points / 4) {
            let x = (cx + rng.gen_range(0..=2 * r)).saturating_sub(r).min(size - 1);
            let y = (cy + rng.gen_range(0..=2 * r)).saturating_sub(r).min(size - 1);
            pts.insert((y, x));
        }
    }
    for _ in 0..rng.gen_range(0..max_points / 8) {
        pts.insert((rng.gen_range(0..size), rng.gen_range(0..size)));
    }
    pts.into_iter().take(max_points).map(|(y, x)| Point { x, y }).collect()
}

#[test]
fn dbscan_matches_naive_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for round in 0..100 {
        let pts = fixture(&mut rng, 5000);
        let eps = [1.5, 5.0, 12.0, 30.0][round % 4];
        let min_pts = rng.gen_range(1..40);
        let got = dbscan(&pts, eps, min_pts).unwrap();
        let want = naive(&pts, eps, min_pts);
        assert_eq!(partition(&pts, &got), partition(&pts, &want), "round {round}");
        assert_eq!(got, want, "numbering differs in round {round}");
    }
}

#[test]
fn two_blobs_separate_at_eps_30() {
    let blob = |ox: u32| (0..10).flat_map(move |y| (0..10).map(move |x| Point { x: ox + x, y }));
    let mut pts: Vec<Point> = blob(0).chain(blob(109)).collect();
    pts.sort_by_key(|p| (p.y, p.x));
    let labels = dbscan(&pts, 30.0, 75).unwrap();
    assert_eq!(partition(&pts, &labels), partition(&pts, &naive(&pts, 30.0, 75)));
    assert_eq!(partition(&pts, &labels).len(), 2);

    let mut bmp = Bitmap::blank(200, 20).unwrap();
    for p in &pts {
        bmp.set(p.x, p.y, 0);
    }
    let seg = segment(&bmp, &SegmentParams { min_pts: Some(75), ..Default::default() }).unwrap();
    assert_eq!(seg.clusters.len(), 2);
    assert!(seg.clusters.iter().all(|c| c.pixels == 100));
    assert_eq!(min_pts_for(2738, 2738), 75);
}

fn points_strategy() -> impl Strategy<Value = Vec<(u32, u32)>> {
    prop::collection::vec((0u32..60, 0u32..60), 0..200)
}

proptest! {
    #[test]
    fn core_membership_ignores_point_order(raw in points_strategy(), seed in any::<u64>(), min_pts in 1usize..8) {
        let pts: Vec<Point> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().map(|(x, y)| Point { x, y }).collect();
        let mut shuffled = pts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let a = dbscan(&pts, 6.0, min_pts).unwrap();
        let b = dbscan(&shuffled, 6.0, min_pts).unwrap();
        let by_point: BTreeMap<Point, i32> = shuffled.iter().copied().zip(b).collect();
        // Clusters restricted to core points must coincide; borders may move.
        let core = |p: &Point| pts.iter().filter(|q| {
            let dx = p.x as f64 - q.x as f64;
            let dy = p.y as f64 - q.y as f64;
            dx * dx + dy * dy <= 36.0
        }).count() >= min_pts;
        let core_pts: Vec<Point> = pts.iter().copied().filter(|p| core(p)).collect();
        let la: Vec<i32> = pts.iter().zip(&a).filter(|(p, _)| core(p)).map(|(_, l)| *l).collect();
        let lb: Vec<i32> = core_pts.iter().map(|p| by_point[p]).collect();
        prop_assert_eq!(partition(&core_pts, &la), partition(&core_pts, &lb));
        // Noise is exactly the set of points no core point reaches.
        let noise_a: BTreeSet<Point> = pts.iter().zip(&a).filter(|(_, l)| **l == NOISE).map(|(p, _)| *p).collect();
        let noise_b: BTreeSet<Point> = by_point.iter().filter(|(_, l)| **l == NOISE).map(|(p, _)| *p).collect();
        prop_assert_eq!(noise_a, noise_b);
    }
}
