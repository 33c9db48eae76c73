//! The network graph: a line of buffers with an absorbing sink, or a rooted
//! tree with all edges directed toward the root.
//!
//! A line of `n` buffers is stored as the degenerate tree rooted at `n - 1`,
//! with a *virtual sink* node `n` past the last buffer. The sink may appear as
//! a packet destination but is never a buffer. Precedence queries use
//! precomputed Euler-tour intervals so `precedes` is O(1).

use crate::{AqtError, Result};
use serde::{Deserialize, Serialize};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyKind {
    Line,
    Tree,
}

/// Immutable network topology. Safe to share across concurrent runs.
#[derive(Debug, Clone)]
pub struct Topology {
    kind: TopologyKind,
    n: u32,
    root: NodeId,
    parent: Vec<NodeId>,
    children: Vec<Vec<NodeId>>,
    /// Euler-tour entry/exit times: `v` is an ancestor-or-self of `u` iff
    /// `tin[v] <= tin[u] < tout[v]`.
    tin: Vec<u32>,
    tout: Vec<u32>,
    depth: Vec<u32>,
}

/// Serialized form: `{"n": 16}` for a line, or
/// `{"n": 4, "root": 3, "parent": [2, 2, 3, 3]}` for a tree
/// (with `parent[root] == root`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologySpec {
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<Vec<NodeId>>,
}

impl Topology {
    /// A line of `n` buffers `0..n-1`, each forwarding to the next, with the
    /// absorbing sink at virtual node `n`.
    pub fn line(n: u32) -> Topology {
        assert!(n >= 1, "line needs at least one buffer");
        let parent = (0..n).map(|i| if i + 1 < n { i + 1 } else { n - 1 }).collect();
        Topology::build(TopologyKind::Line, n, n - 1, parent)
    }

    /// A rooted tree from a parent array with `parent[root] == root`.
    pub fn tree(root: NodeId, parent: Vec<NodeId>) -> Result<Topology> {
        let n = parent.len() as u32;
        if root >= n || parent[root as usize] != root {
            return Err(AqtError::Spec(format!(
                "root {root} invalid for parent array of length {n}"
            )));
        }
        for (v, &p) in parent.iter().enumerate() {
            if p >= n {
                return Err(AqtError::Spec(format!("parent[{v}] = {p} out of range")));
            }
            if v as u32 != root && p == v as u32 {
                return Err(AqtError::Spec(format!("non-root node {v} is its own parent")));
            }
        }
        let topo = Topology::build(TopologyKind::Tree, n, root, parent);
        // Reject cycles: every node must be visited by the DFS from the root.
        if topo.tin.iter().zip(&topo.tout).any(|(a, b)| a == b) {
            return Err(AqtError::Spec("parent pointers contain a cycle".into()));
        }
        Ok(topo)
    }

    pub fn from_spec(spec: &TopologySpec) -> Result<Topology> {
        match (&spec.root, &spec.parent) {
            (None, None) => Ok(Topology::line(spec.n)),
            (Some(root), Some(parent)) => {
                if parent.len() as u32 != spec.n {
                    return Err(AqtError::Spec("parent array length != n".into()));
                }
                Topology::tree(*root, parent.clone())
            }
            _ => Err(AqtError::Spec("tree spec needs both root and parent".into())),
        }
    }

    pub fn to_spec(&self) -> TopologySpec {
        match self.kind {
            TopologyKind::Line => TopologySpec { n: self.n, root: None, parent: None },
            TopologyKind::Tree => TopologySpec {
                n: self.n,
                root: Some(self.root),
                parent: Some(self.parent.clone()),
            },
        }
    }

    fn build(kind: TopologyKind, n: u32, root: NodeId, parent: Vec<NodeId>) -> Topology {
        let mut children = vec![Vec::new(); n as usize];
        for v in 0..n {
            let p = parent[v as usize];
            if v != root {
                children[p as usize].push(v);
            }
        }
        let mut tin = vec![0u32; n as usize];
        let mut tout = vec![0u32; n as usize];
        let mut depth = vec![0u32; n as usize];
        let mut clock = 0u32;
        // Iterative DFS; (node, child cursor) stack.
        let mut stack: Vec<(NodeId, usize)> = vec![(root, 0)];
        tin[root as usize] = clock;
        clock += 1;
        while let Some(top) = stack.len().checked_sub(1) {
            let (v, cursor) = stack[top];
            let kids = &children[v as usize];
            if cursor < kids.len() {
                let c = kids[cursor];
                stack[top].1 += 1;
                tin[c as usize] = clock;
                depth[c as usize] = depth[v as usize] + 1;
                clock += 1;
                stack.push((c, 0));
            } else {
                tout[v as usize] = clock;
                stack.pop();
            }
        }
        Topology { kind, n, root, parent, children, tin, tout, depth }
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn is_line(&self) -> bool {
        self.kind == TopologyKind::Line
    }

    /// Number of buffers (the line's sink `n` is not counted).
    pub fn node_count(&self) -> u32 {
        self.n
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// The virtual sink id for lines; trees have no sink.
    pub fn sink(&self) -> Option<NodeId> {
        self.is_line().then_some(self.n)
    }

    pub fn is_buffer(&self, v: NodeId) -> bool {
        v < self.n
    }

    /// True if `w` is a valid packet destination: a buffer, or the sink on a
    /// line.
    pub fn is_destination(&self, w: NodeId) -> bool {
        w < self.n || (self.is_line() && w == self.n)
    }

    pub fn parent_of(&self, v: NodeId) -> NodeId {
        self.parent[v as usize]
    }

    pub fn children_of(&self, v: NodeId) -> &[NodeId] {
        &self.children[v as usize]
    }

    pub fn depth_of(&self, v: NodeId) -> u32 {
        self.depth[v as usize]
    }

    /// Depth of the deepest buffer.
    pub fn depth(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// The node a packet forwarded from buffer `v` arrives at. On a line the
    /// last buffer forwards into the sink.
    pub fn next_hop(&self, v: NodeId) -> Option<NodeId> {
        debug_assert!(self.is_buffer(v));
        if self.is_line() {
            Some(v + 1)
        } else if v == self.root {
            None
        } else {
            Some(self.parent[v as usize])
        }
    }

    /// True iff `v` is an ancestor of `u` or `v == u` (sink counts as an
    /// ancestor of every buffer on a line).
    pub fn ancestor_or_eq(&self, v: NodeId, u: NodeId) -> bool {
        if self.is_line() && v == self.n {
            return true;
        }
        debug_assert!(self.is_buffer(v) && self.is_buffer(u));
        self.tin[v as usize] <= self.tin[u as usize]
            && self.tin[u as usize] < self.tout[v as usize]
    }

    /// The strict precedence order: `u` precedes `v` iff `v` lies on the path
    /// from `u` toward the root (equivalently, toward the sink). On a line
    /// this is plain `u < v`.
    pub fn precedes(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.ancestor_or_eq(v, u)
    }

    /// The unique directed path from `u` to `w`, inclusive of both endpoints.
    /// `w` may be the sink on a line.
    pub fn path(&self, u: NodeId, w: NodeId) -> Result<Vec<NodeId>> {
        if !self.is_buffer(u) && u != w {
            return Err(AqtError::NoPath { from: u, to: w });
        }
        if u == w {
            return Ok(vec![u]);
        }
        if !self.is_destination(w) || !self.ancestor_or_eq(w, u) {
            return Err(AqtError::NoPath { from: u, to: w });
        }
        let mut path = vec![u];
        let mut cur = u;
        while cur != w {
            cur = self
                .next_hop(cur)
                .ok_or(AqtError::NoPath { from: u, to: w })?;
            path.push(cur);
        }
        Ok(path)
    }

    /// The `prec`-minimal elements of `set`: members with no other member
    /// strictly below them. The result is an antichain that dominates `set`.
    pub fn min_antichain(&self, set: &[NodeId]) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = set
            .iter()
            .copied()
            .filter(|&u| !set.iter().any(|&v| self.precedes(v, u)))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Length of the longest precedence chain within `dests` (the sink on a
    /// line sits above every buffer). Returns 0 for an empty set.
    pub fn destination_depth(&self, dests: &[NodeId]) -> u32 {
        dests
            .iter()
            .map(|&w| {
                dests
                    .iter()
                    .filter(|&&w2| {
                        w == w2 || {
                            let sink = self.is_line() && w2 == self.n;
                            if sink {
                                true
                            } else if self.is_line() && w == self.n {
                                false
                            } else {
                                self.precedes(w, w2)
                            }
                        }
                    })
                    .count() as u32
            })
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamondless_tree() -> Topology {
        // 0 -> 2, 1 -> 2, 2 -> 3 (root)
        Topology::tree(3, vec![2, 2, 3, 3]).unwrap()
    }

    #[test]
    fn line_paths() {
        let t = Topology::line(5);
        assert_eq!(t.path(1, 3).unwrap(), vec![1, 2, 3]);
        assert_eq!(t.path(2, 2).unwrap(), vec![2]);
        assert_eq!(t.path(3, 5).unwrap(), vec![3, 4, 5]);
        assert!(t.path(3, 1).is_err());
    }

    #[test]
    fn tree_paths() {
        let t = diamondless_tree();
        assert_eq!(t.path(0, 3).unwrap(), vec![0, 2, 3]);
        assert!(t.path(0, 1).is_err());
    }

    #[test]
    fn precedes_basics() {
        let line = Topology::line(4);
        assert!(line.precedes(0, 2));
        assert!(!line.precedes(2, 0));
        assert!(!line.precedes(1, 1));
        let t = diamondless_tree();
        assert!(t.precedes(0, 2));
        assert!(t.precedes(0, 3));
        assert!(!t.precedes(0, 1));
        assert!(!t.precedes(3, 0));
    }

    #[test]
    fn min_antichain_cases() {
        let t = diamondless_tree();
        assert_eq!(t.min_antichain(&[]), Vec::<NodeId>::new());
        assert_eq!(t.min_antichain(&[0, 3]), vec![0]);
        assert_eq!(t.min_antichain(&[0, 1]), vec![0, 1]);
        let line = Topology::line(5);
        assert_eq!(line.min_antichain(&[1, 3]), vec![1]);
    }

    #[test]
    fn destination_depth_cases() {
        // star: 0,1,2 -> 3 (root)
        let star = Topology::tree(3, vec![3, 3, 3, 3]).unwrap();
        assert_eq!(star.destination_depth(&[3]), 1);
        assert_eq!(star.destination_depth(&[0, 3]), 2);
        assert_eq!(star.destination_depth(&[0, 1]), 1);
        assert_eq!(star.destination_depth(&[]), 0);
        let line = Topology::line(4);
        assert_eq!(line.destination_depth(&[1, 2, 4]), 3);
    }

    #[test]
    fn tree_validation() {
        assert!(Topology::tree(0, vec![0, 0, 1]).is_ok());
        assert!(Topology::tree(5, vec![0, 0]).is_err());
        // 1 <-> 2 cycle unreachable from root 0
        assert!(Topology::tree(0, vec![0, 2, 1]).is_err());
    }

    #[test]
    fn line_is_degenerate_tree() {
        let t = Topology::line(5);
        assert_eq!(t.root(), 4);
        assert_eq!(t.sink(), Some(5));
        assert_eq!(t.next_hop(4), Some(5));
        assert!(t.ancestor_or_eq(5, 0));
    }
}
