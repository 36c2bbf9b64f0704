//! Static k-d tree answering closed axis-aligned box counts.

const LEAF: usize = 16;

struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

pub struct KdTree {
    dim: usize,
    /// Row-major points, reordered so every node owns a contiguous range.
    points: Vec<f64>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// `rows[i]` is the i-th point; all rows share one length.
    pub fn build(rows: &[Vec<f64>]) -> KdTree {
        let dim = rows.first().map_or(0, Vec::len);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut tree = KdTree {
            dim,
            points: Vec::with_capacity(rows.len() * dim),
            nodes: Vec::new(),
        };
        if !rows.is_empty() {
            tree.split(rows, &mut order, 0, rows.len(), 0);
        }
        for &i in &order {
            tree.points.extend_from_slice(&rows[i]);
        }
        tree
    }

    fn split(&mut self, rows: &[Vec<f64>], order: &mut [usize], start: usize, end: usize, depth: usize) -> usize {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &i in &order[start..end] {
            for d in 0..self.dim {
                lo[d] = lo[d].min(rows[i][d]);
                hi[d] = hi[d].max(rows[i][d]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo: lo.clone(),
            hi: hi.clone(),
            start,
            end,
            children: None,
        });
        if end - start > LEAF && self.dim > 0 {
            // split on the widest axis
            let axis = (0..self.dim)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(depth % self.dim);
            if hi[axis] > lo[axis] {
                let mid = (start + end) / 2;
                order[start..end].select_nth_unstable_by(mid - start, |&a, &b| rows[a][axis].total_cmp(&rows[b][axis]));
                let left = self.split(rows, order, start, mid, depth + 1);
                let right = self.split(rows, order, mid, end, depth + 1);
                self.nodes[id].children = Some((left, right));
            }
        }
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of points `p` with `lo[d] <= p[d] <= hi[d]` on every axis.
    pub fn count(&self, lo: &[f64], hi: &[f64]) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut total = 0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let mut inside = true;
            let mut disjoint = false;
            for d in 0..self.dim {
                if node.hi[d] < lo[d] || node.lo[d] > hi[d] {
                    disjoint = true;
                    break;
                }
                if node.lo[d] < lo[d] || node.hi[d] > hi[d] {
                    inside = false;
                }
            }
            if disjoint {
                continue;
            }
            if inside {
                total += node.end - node.start;
                continue;
            }
            match node.children {
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
                None => {
                    for p in node.start..node.end {
                        let pt = &self.points[p * self.dim..(p + 1) * self.dim];
                        if pt.iter().zip(lo).zip(hi).all(|((&v, &a), &b)| v >= a && v <= b) {
                            total += 1;
                        }
                    }
                }
            }
        }
        total
    }
}
