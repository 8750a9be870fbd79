//! Exact k-d tree over 3D points with incremental insertion.
//!
//! Points are appended as leaves; when the tree becomes too deep relative to
//! its size it is rebuilt balanced around coordinate medians. All queries
//! are exact, and results are independent of insertion order.

use crate::geom::Point3;

#[derive(Debug, Clone)]
struct Node<T> {
    point: Point3,
    id: T,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct KdTree<T = usize> {
    nodes: Vec<Node<T>>,
    root: Option<usize>,
    depth: usize,
}

impl<T> Default for KdTree<T> {
    fn default() -> Self {
        Self { nodes: Vec::new(), root: None, depth: 0 }
    }
}

impl<T: Copy + Ord> KdTree<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Balanced tree over the given points.
    pub fn build(items: impl IntoIterator<Item = (Point3, T)>) -> Self {
        let mut tree = Self::new();
        let items: Vec<(Point3, T)> = items.into_iter().collect();
        tree.rebuild_from(items);
        tree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Depth of the deepest leaf (a single node has depth 1).
    pub fn depth(&self) -> usize {
        self.depth
    }

    fn depth_limit(n: usize) -> usize {
        2 * (n.max(1) as f64).log2().ceil() as usize + 8
    }

    pub fn insert(&mut self, point: Point3, id: T) {
        let mut depth = 1;
        let mut axis = 0;
        let mut parent = None;
        let mut cursor = self.root;
        while let Some(i) = cursor {
            let node = &self.nodes[i];
            axis = (node.axis + 1) % 3;
            let go_left = point[node.axis] < node.point[node.axis];
            parent = Some((i, go_left));
            cursor = if go_left { node.left } else { node.right };
            depth += 1;
        }
        let index = self.nodes.len();
        self.nodes.push(Node { point, id, axis: if parent.is_some() { axis } else { 0 }, left: None, right: None });
        match parent {
            None => self.root = Some(index),
            Some((p, true)) => self.nodes[p].left = Some(index),
            Some((p, false)) => self.nodes[p].right = Some(index),
        }
        self.depth = self.depth.max(depth);
        if self.depth > Self::depth_limit(self.nodes.len()) {
            let items = self.nodes.drain(..).map(|n| (n.point, n.id)).collect();
            self.rebuild_from(items);
        }
    }

    fn rebuild_from(&mut self, mut items: Vec<(Point3, T)>) {
        self.nodes.clear();
        self.nodes.reserve(items.len());
        self.depth = 0;
        self.root = self.build_range(&mut items, 0, 1);
    }

    fn build_range(&mut self, items: &mut [(Point3, T)], axis: usize, depth: usize) -> Option<usize> {
        if items.is_empty() {
            return None;
        }
        self.depth = self.depth.max(depth);
        // Ties go right during insertion, so the median must be the first
        // item holding the median coordinate.
        items.sort_by(|a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
        let mut mid = items.len() / 2;
        while mid > 0 && items[mid - 1].0[axis] == items[mid].0[axis] {
            mid -= 1;
        }
        let (point, id) = items[mid];
        let index = self.nodes.len();
        self.nodes.push(Node { point, id, axis, left: None, right: None });
        let (lo, rest) = items.split_at_mut(mid);
        let next = (axis + 1) % 3;
        let left = self.build_range(lo, next, depth + 1);
        let right = self.build_range(&mut rest[1..], next, depth + 1);
        self.nodes[index].left = left;
        self.nodes[index].right = right;
        Some(index)
    }

    /// Ids of all points with `|p - center| <= r`, sorted.
    pub fn radius_query(&self, center: &Point3, r: f64) -> Vec<T> {
        let mut out = Vec::new();
        self.radius_query_with(center, r, |_, id| out.push(id));
        out.sort();
        out
    }

    /// Visits every point with `|p - center| <= r` in tree order.
    pub fn radius_query_with(&self, center: &Point3, r: f64, mut visit: impl FnMut(&Point3, T)) {
        let r2 = r * r;
        let mut stack: Vec<usize> = self.root.into_iter().collect();
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if (node.point - center).norm_squared() <= r2 {
                visit(&node.point, node.id);
            }
            let delta = center[node.axis] - node.point[node.axis];
            // left holds coordinates < split, right holds >= split
            if let Some(l) = node.left {
                if delta < 0.0 || delta * delta <= r2 {
                    stack.push(l);
                }
            }
            if let Some(rt) = node.right {
                if delta >= 0.0 || delta * delta <= r2 {
                    stack.push(rt);
                }
            }
        }
    }

    /// Closest point; equal distances resolve to the smallest id.
    pub fn nearest(&self, center: &Point3) -> Option<(T, f64)> {
        let mut best: Option<(f64, T)> = None;
        self.nearest_rec(self.root, center, &mut best);
        best.map(|(d2, id)| (id, d2.sqrt()))
    }

    fn nearest_rec(&self, cursor: Option<usize>, center: &Point3, best: &mut Option<(f64, T)>) {
        let Some(i) = cursor else { return };
        let node = &self.nodes[i];
        let d2 = (node.point - center).norm_squared();
        let better = match *best {
            None => true,
            Some((bd, bid)) => d2 < bd || (d2 == bd && node.id < bid),
        };
        if better {
            *best = Some((d2, node.id));
        }
        let delta = center[node.axis] - node.point[node.axis];
        let (near, far) = if delta < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        self.nearest_rec(near, center, best);
        // `<=` keeps equidistant candidates on the far side reachable for the id tie-break
        if best.is_none_or(|(bd, _)| delta * delta <= bd) {
            self.nearest_rec(far, center, best);
        }
    }
}
