//! Component tree of the lower level sets `{p : I(p) <= t}` under
//! 4-connectivity, built by union-find over pixels sorted by level.

use crate::raster::BoundingBox;

/// Index of a node in a [`ComponentTree`].
pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    /// Lowest level at which the component exists in exactly this form.
    pub level: u8,
    pub area: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub bbox: BoundingBox,
}

/// One node per distinct connected component across all thresholds.
///
/// A node appears at `level` and stays unchanged until its parent's level;
/// the root stays until level 255.
#[derive(Clone, Debug)]
pub struct ComponentTree {
    pub width: usize,
    pub height: usize,
    pub nodes: Vec<TreeNode>,
    pub root: NodeId,
    /// Node at which each pixel joined the tree (the smallest node containing it).
    pub pixel_node: Vec<NodeId>,
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        let (hi, lo) = if self.rank[a] >= self.rank[b] { (a, b) } else { (b, a) };
        self.parent[lo] = hi as u32;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        hi
    }
}

const NONE: usize = usize::MAX;

impl ComponentTree {
    /// Builds the tree from 8-bit levels in O(N α(N)) after a counting sort.
    ///
    /// # Panics
    ///
    /// Panics if `levels` is empty or its length is not `width * height`.
    pub fn build(levels: &[u8], width: usize, height: usize) -> Self {
        let n = width * height;
        assert!(n > 0 && levels.len() == n, "levels must cover a non-empty image");

        let mut counts = [0usize; 257];
        for &l in levels {
            counts[l as usize + 1] += 1;
        }
        for i in 1..257 {
            counts[i] += counts[i - 1];
        }
        let mut order = vec![0u32; n];
        let mut next = counts;
        for (i, &l) in levels.iter().enumerate() {
            order[next[l as usize]] = i as u32;
            next[l as usize] += 1;
        }

        let mut uf = UnionFind::new(n);
        let mut processed = vec![false; n];
        // Node owning the union-find set rooted at each pixel.
        let mut set_node = vec![NONE; n];
        let mut own_node = vec![NONE; n];
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut merged_into: Vec<NodeId> = Vec::new();

        let new_node = |nodes: &mut Vec<TreeNode>, merged: &mut Vec<NodeId>, level: u8, bbox| {
            nodes.push(TreeNode {
                level,
                area: 0,
                parent: None,
                children: Vec::new(),
                bbox,
            });
            merged.push(NONE);
            nodes.len() - 1
        };

        for &p in &order {
            let p = p as usize;
            let level = levels[p];
            let (px, py) = ((p % width) as i32, (p / width) as i32);
            let pbox = BoundingBox::new(px, py, 1, 1);
            processed[p] = true;
            let mut cur = NONE;

            let mut neighbors = [NONE; 4];
            if px > 0 {
                neighbors[0] = p - 1;
            }
            if (px as usize) + 1 < width {
                neighbors[1] = p + 1;
            }
            if py > 0 {
                neighbors[2] = p - width;
            }
            if (py as usize) + 1 < height {
                neighbors[3] = p + width;
            }

            for q in neighbors {
                if q == NONE || !processed[q] {
                    continue;
                }
                let rq = uf.find(q);
                let rp = uf.find(p);
                if rq == rp {
                    continue;
                }
                let nq = set_node[rq];
                let node = if cur == NONE {
                    if nodes[nq].level == level {
                        nq
                    } else {
                        let qbox = nodes[nq].bbox;
                        let id = new_node(&mut nodes, &mut merged_into, level, qbox);
                        nodes[id].area = nodes[nq].area;
                        nodes[id].children.push(nq);
                        nodes[nq].parent = Some(id);
                        id
                    }
                } else if nodes[nq].level == level {
                    // Same-level components fuse into one node.
                    let moved = std::mem::take(&mut nodes[nq].children);
                    for &c in &moved {
                        nodes[c].parent = Some(cur);
                    }
                    nodes[cur].children.extend(moved);
                    nodes[cur].area += nodes[nq].area;
                    nodes[cur].bbox = nodes[cur].bbox.union(&nodes[nq].bbox);
                    merged_into[nq] = cur;
                    cur
                } else {
                    nodes[cur].children.push(nq);
                    nodes[nq].parent = Some(cur);
                    nodes[cur].area += nodes[nq].area;
                    nodes[cur].bbox = nodes[cur].bbox.union(&nodes[nq].bbox);
                    cur
                };
                cur = node;
                let r = uf.union(rp, rq);
                set_node[r] = cur;
            }

            if cur == NONE {
                cur = new_node(&mut nodes, &mut merged_into, level, pbox);
            }
            nodes[cur].area += 1;
            nodes[cur].bbox = nodes[cur].bbox.union(&pbox);
            set_node[uf.find(p)] = cur;
            own_node[p] = cur;
        }

        // Drop fused nodes and renumber.
        let mut remap = vec![NONE; nodes.len()];
        let mut kept = Vec::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if merged_into[i] == NONE {
                remap[i] = kept.len();
                kept.push(node.clone());
            }
        }
        let resolve = |mut i: usize| {
            while merged_into[i] != NONE {
                i = merged_into[i];
            }
            remap[i]
        };
        for node in &mut kept {
            node.parent = node.parent.map(resolve);
            for c in &mut node.children {
                *c = resolve(*c);
            }
        }
        let pixel_node: Vec<NodeId> = own_node.iter().map(|&o| resolve(o)).collect();
        let root = kept
            .iter()
            .position(|n| n.parent.is_none())
            .expect("a connected grid has a root");

        Self {
            width,
            height,
            nodes: kept,
            root,
            pixel_node,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// First level at which the node has been absorbed into its parent
    /// (256 for the root).
    pub fn end_level(&self, id: NodeId) -> u16 {
        self.nodes[id].parent.map_or(256, |p| self.nodes[p].level as u16)
    }

    /// Flat indices of every pixel in the node's component, ascending.
    pub fn pixels(&self, id: NodeId) -> Vec<usize> {
        let mut inside = vec![false; self.nodes.len()];
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            inside[n] = true;
            stack.extend(&self.nodes[n].children);
        }
        self.pixel_node
            .iter()
            .enumerate()
            .filter(|(_, &n)| inside[n])
            .map(|(i, _)| i)
            .collect()
    }

    /// Pixel lists for many nodes in one pass over the image.
    pub fn pixels_of(&self, ids: &[NodeId]) -> Vec<Vec<usize>> {
        let mut slot = vec![usize::MAX; self.nodes.len()];
        for (k, &id) in ids.iter().enumerate() {
            slot[id] = k;
        }
        let mut out = vec![Vec::new(); ids.len()];
        // Walk from each pixel's node to the root; nodes on the way own it.
        // Memoize the nearest selected ancestor chain per node.
        let mut chains: Vec<Option<Vec<usize>>> = vec![None; self.nodes.len()];
        for (p, &n) in self.pixel_node.iter().enumerate() {
            if chains[n].is_none() {
                let mut ks = Vec::new();
                let mut cur = Some(n);
                while let Some(c) = cur {
                    if slot[c] != usize::MAX {
                        ks.push(slot[c]);
                    }
                    cur = self.nodes[c].parent;
                }
                chains[n] = Some(ks);
            }
            for &k in chains[n].as_ref().expect("filled above") {
                out[k].push(p);
            }
        }
        out
    }
}
