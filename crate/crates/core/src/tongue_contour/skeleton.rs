//! Zhang-Suen thinning and skeleton-to-polyline ordering.

use std::collections::VecDeque;

use super::{BinaryMask, TongueContour};
use crate::geometry::Point2;

/// Neighbors P2..P9, clockwise from north.
const RING: [(i64, i64); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn neighbors(mask: &BinaryMask, x: i64, y: i64) -> [bool; 8] {
    RING.map(|(dx, dy)| mask.get_signed(x + dx, y + dy))
}

/// Should the pixel be removed in the given sub-iteration?
fn removable(n: &[bool; 8], first_pass: bool) -> bool {
    let b = n.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *n;
    if first_pass {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Classic two-subiteration Zhang-Suen thinning, run to a fixpoint.
/// Pixels outside the mask count as background.
pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let mut out = mask.clone();
    let w = mask.width() as i64;
    let mut candidates: Vec<(i64, i64)> = out.iter_true().map(|(x, y)| (x as i64, y as i64)).collect();
    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for first_pass in [true, false] {
            doomed.clear();
            for &(x, y) in &candidates {
                if out.get_signed(x, y) && removable(&neighbors(&out, x, y), first_pass) {
                    doomed.push((x, y));
                }
            }
            for &(x, y) in &doomed {
                out.bits_mut()[(y * w + x) as usize] = false;
            }
            changed |= !doomed.is_empty();
        }
        if !changed {
            return out;
        }
        candidates.retain(|&(x, y)| out.get_signed(x, y));
    }
}

/// Orders a skeleton into a polyline: the longest shortest-path through the
/// largest 8-connected component, oriented left to right.
pub fn skeleton_contour(skeleton: &BinaryMask) -> TongueContour {
    let dims = skeleton.dims();
    let (w, h) = (dims.width as usize, dims.height as usize);
    let bits = skeleton.bits();

    let bfs = |start: usize, dist: &mut Vec<u32>, parent: &mut Vec<usize>| -> Vec<usize> {
        let mut order = Vec::new();
        let mut queue = VecDeque::from([start]);
        dist[start] = 0;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in RING {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if bits[n] && dist[n] == u32::MAX {
                    dist[n] = dist[i] + 1;
                    parent[n] = i;
                    queue.push_back(n);
                }
            }
        }
        order
    };

    let mut dist = vec![u32::MAX; w * h];
    let mut parent = vec![usize::MAX; w * h];
    let mut largest: Vec<usize> = Vec::new();
    for i in 0..w * h {
        if bits[i] && dist[i] == u32::MAX {
            let comp = bfs(i, &mut dist, &mut parent);
            if comp.len() > largest.len() {
                largest = comp;
            }
        }
    }
    if largest.is_empty() {
        return TongueContour::empty(dims);
    }

    // Double sweep: farthest pixel from any start is one end of a long path.
    let reset = |dist: &mut Vec<u32>, comp: &[usize]| {
        for &i in comp {
            dist[i] = u32::MAX;
        }
    };
    reset(&mut dist, &largest);
    let order = bfs(largest[0], &mut dist, &mut parent);
    let a = *order.last().unwrap();
    reset(&mut dist, &largest);
    let order = bfs(a, &mut dist, &mut parent);
    let b = *order.last().unwrap();

    let mut path = vec![b];
    let mut cur = b;
    while cur != a {
        cur = parent[cur];
        path.push(cur);
    }
    let mut points: Vec<Point2> = path
        .into_iter()
        .map(|i| Point2::new((i % w) as f64, (i / w) as f64))
        .collect();
    if points.first().unwrap().x > points.last().unwrap().x {
        points.reverse();
    }
    TongueContour {
        points,
        source_dims: dims,
    }
}
