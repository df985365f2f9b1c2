//! Static 2-d tree answering k-th nearest neighbor queries under the
//! maximum (Chebyshev) norm.

const LEAF_SIZE: usize = 12;
const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: u32,
    hi: u32,
    dim: u8,
    split: f64,
    left: u32,
    right: u32,
}

#[derive(Debug)]
pub(crate) struct KdTree2 {
    points: Vec<[f64; 2]>,
    /// Original index of each entry of `points`.
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree2 {
    pub(crate) fn build(input: &[[f64; 2]]) -> Self {
        assert!(input.len() < u32::MAX as usize, "too many points for the kd-tree");
        let mut order: Vec<u32> = (0..input.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * input.len() / LEAF_SIZE + 1);
        if !input.is_empty() {
            build_node(input, &mut order, 0, &mut nodes);
        }
        let points = order.iter().map(|&i| input[i as usize]).collect();
        KdTree2 {
            points,
            ids: order,
            nodes,
        }
    }

    /// Chebyshev distance from point `query_id` (an index into the original
    /// input) to its `k`-th nearest other point.
    pub(crate) fn kth_distance(&self, query: [f64; 2], query_id: u32, k: usize) -> f64 {
        debug_assert!(k >= 1 && k < self.points.len());
        let mut best = vec![f64::INFINITY; k];
        self.search(0, query, query_id, &mut best);
        best[k - 1]
    }

    fn search(&self, node: usize, q: [f64; 2], qid: u32, best: &mut [f64]) {
        let n = self.nodes[node];
        if n.left == NO_CHILD {
            for j in n.lo as usize..n.hi as usize {
                if self.ids[j] == qid {
                    continue;
                }
                let p = self.points[j];
                let d = (p[0] - q[0]).abs().max((p[1] - q[1]).abs());
                insert_sorted(best, d);
            }
            return;
        }
        let diff = q[n.dim as usize] - n.split;
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near as usize, q, qid, best);
        if diff.abs() <= best[best.len() - 1] {
            self.search(far as usize, q, qid, best);
        }
    }
}

fn insert_sorted(best: &mut [f64], d: f64) {
    let last = best.len() - 1;
    if d >= best[last] {
        return;
    }
    let mut i = last;
    while i > 0 && best[i - 1] > d {
        best[i] = best[i - 1];
        i -= 1;
    }
    best[i] = d;
}

fn build_node(input: &[[f64; 2]], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len();
    let len = order.len();
    nodes.push(Node {
        lo: offset as u32,
        hi: (offset + len) as u32,
        dim: 0,
        split: 0.0,
        left: NO_CHILD,
        right: NO_CHILD,
    });
    if len <= LEAF_SIZE {
        return id as u32;
    }
    // split along the wider extent
    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &i in order.iter() {
        let p = input[i as usize];
        for d in 0..2 {
            min[d] = min[d].min(p[d]);
            max[d] = max[d].max(p[d]);
        }
    }
    let dim = if max[0] - min[0] >= max[1] - min[1] { 0 } else { 1 };
    let mid = len / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        input[a as usize][dim].total_cmp(&input[b as usize][dim])
    });
    let split = input[order[mid] as usize][dim];
    let (left_part, right_part) = order.split_at_mut(mid);
    let left = build_node(input, left_part, offset, nodes);
    let right = build_node(input, right_part, offset + mid, nodes);
    let node = &mut nodes[id];
    node.dim = dim as u8;
    node.split = split;
    node.left = left;
    node.right = right;
    id as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_kth(points: &[[f64; 2]], i: usize, k: usize) -> f64 {
        let mut d: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, p)| (p[0] - points[i][0]).abs().max((p[1] - points[i][1]).abs()))
            .collect();
        d.sort_by(f64::total_cmp);
        d[k - 1]
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<[f64; 2]> = (0..700)
            .map(|_| [rng.random::<f64>() * 3.0, rng.random::<f64>().powi(3)])
            .collect();
        let tree = KdTree2::build(&points);
        for k in [1, 4, 9] {
            for i in (0..points.len()).step_by(7) {
                assert_eq!(tree.kth_distance(points[i], i as u32, k), brute_kth(&points, i, k));
            }
        }
    }

    #[test]
    fn handles_repeated_coordinates() {
        let points: Vec<[f64; 2]> = (0..200).map(|i| [(i % 5) as f64, (i / 5) as f64 * 0.5]).collect();
        let tree = KdTree2::build(&points);
        for i in 0..points.len() {
            assert_eq!(tree.kth_distance(points[i], i as u32, 3), brute_kth(&points, i, 3));
        }
    }
}
