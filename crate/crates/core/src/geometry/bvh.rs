//! Binary bounding volume hierarchy over curve pieces, built with a binned
//! surface area heuristic and stored as a flat node array.

use super::{Aabb, Piece, Ray};
use crate::math::Vec3;

const LEAF_SIZE: usize = 4;
const BINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    /// For leaves, offset into the index array; for interior nodes, the
    /// index of the second child (the first child follows the node).
    pub offset: u32,
    /// Number of pieces in a leaf; zero for interior nodes.
    pub count: u32,
    pub axis: u8,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    indices: Vec<u32>,
}

struct BuildItem {
    bounds: Aabb,
    centroid: Vec3,
    index: u32,
}

impl Bvh {
    pub fn build(pieces: &[Piece]) -> Self {
        let mut items: Vec<BuildItem> = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| BuildItem {
                bounds: p.bounds(),
                centroid: p.centroid(),
                index: i as u32,
            })
            .collect();
        let mut bvh = Bvh::default();
        if items.is_empty() {
            return bvh;
        }
        bvh.build_recursive(&mut items);
        bvh.indices = items.iter().map(|i| i.index).collect();
        bvh
    }

    fn build_recursive(&mut self, items: &mut [BuildItem]) -> usize {
        self.build_range(items, 0)
    }

    fn build_range(&mut self, items: &mut [BuildItem], start: usize) -> usize {
        let bounds = items.iter().fold(Aabb::EMPTY, |b, it| b.union(it.bounds));
        let node_index = self.nodes.len();
        self.nodes.push(BvhNode {
            bounds,
            offset: start as u32,
            count: items.len() as u32,
            axis: 0,
        });
        if items.len() <= LEAF_SIZE {
            return node_index;
        }

        let cb = items
            .iter()
            .fold(Aabb::EMPTY, |b, it| b.grow(it.centroid));
        let ext = cb.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let lo = cb.min.axis(axis);
        let span = ext.axis(axis);
        if span <= 0.0 {
            // All centroids coincide; split by order.
            let mid = items.len() / 2;
            return self.finish_interior(node_index, items, start, mid, axis);
        }

        let bin_of = |c: Vec3| (((c.axis(axis) - lo) / span * BINS as f64) as usize).min(BINS - 1);
        let mut bin_bounds = [Aabb::EMPTY; BINS];
        let mut bin_counts = [0usize; BINS];
        for it in items.iter() {
            let b = bin_of(it.centroid);
            bin_counts[b] += 1;
            bin_bounds[b] = bin_bounds[b].union(it.bounds);
        }
        let mut best_cost = f64::INFINITY;
        let mut best_split = 0;
        for split in 1..BINS {
            let (mut lb, mut rb) = (Aabb::EMPTY, Aabb::EMPTY);
            let (mut lc, mut rc) = (0, 0);
            for b in 0..split {
                lb = lb.union(bin_bounds[b]);
                lc += bin_counts[b];
            }
            for b in split..BINS {
                rb = rb.union(bin_bounds[b]);
                rc += bin_counts[b];
            }
            if lc == 0 || rc == 0 {
                continue;
            }
            let cost = lb.surface_area() * lc as f64 + rb.surface_area() * rc as f64;
            if cost < best_cost {
                best_cost = cost;
                best_split = split;
            }
        }

        let mid = if best_split == 0 {
            items.sort_by(|a, b| {
                a.centroid
                    .axis(axis)
                    .total_cmp(&b.centroid.axis(axis))
                    .then(a.index.cmp(&b.index))
            });
            items.len() / 2
        } else {
            // Stable sort keeps construction deterministic.
            items.sort_by_key(|it| bin_of(it.centroid) >= best_split);
            items.iter().take_while(|it| bin_of(it.centroid) < best_split).count()
        };
        self.finish_interior(node_index, items, start, mid, axis)
    }

    fn finish_interior(
        &mut self,
        node_index: usize,
        items: &mut [BuildItem],
        start: usize,
        mid: usize,
        axis: usize,
    ) -> usize {
        let (left, right) = items.split_at_mut(mid);
        self.build_range(left, start);
        let second = self.build_range(right, start + mid);
        let node = &mut self.nodes[node_index];
        node.offset = second as u32;
        node.count = 0;
        node.axis = axis as u8;
        node_index
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Piece indices referenced by leaf `node`.
    pub fn leaf_indices(&self, node: &BvhNode) -> &[u32] {
        let start = node.offset as usize;
        &self.indices[start..start + node.count as usize]
    }

    /// Calls `visit(piece_index, limit)` for every piece in every leaf whose
    /// box the ray enters before `*limit`. The visitor may shrink `limit`.
    pub fn traverse(&self, ray: &Ray, limit: &mut f64, mut visit: impl FnMut(u32, &mut f64)) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let neg = [ray.dir.x < 0.0, ray.dir.y < 0.0, ray.dir.z < 0.0];
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        let mut current = 0usize;
        loop {
            let node = &self.nodes[current];
            if *limit >= 0.0 && node.bounds.hit(ray.origin, inv, *limit * (1.0 + 1e-9)).is_some() {
                if node.is_leaf() {
                    for &idx in self.leaf_indices(node) {
                        visit(idx, limit);
                    }
                } else {
                    // Visit the child on the ray's near side first.
                    let (first, second) = if neg[node.axis as usize] {
                        (node.offset as usize, current + 1)
                    } else {
                        (current + 1, node.offset as usize)
                    };
                    stack.push(second as u32);
                    current = first;
                    continue;
                }
            }
            match stack.pop() {
                Some(next) => current = next as usize,
                None => break,
            }
        }
    }
}
