//! Taxonomy tree handling: parsing the flat edge-list format, level-wise
//! grouping, and the child-before-parent group ordering that makes the
//! tree penalty's proximal operator exact.
//!
//! Levels are structural: leaves sit at level 0 and every internal node is
//! one above its deepest child, so the root's level equals the tree depth.
//! Leaf nodes are assigned feature columns 0, 1, 2, ... in file order.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HierarchyError {
    #[error("line {line}: expected `id<TAB>parent_id<TAB>label`, got `{content}`")]
    Malformed { line: usize, content: String },
    #[error("duplicate node id `{id}`")]
    DuplicateId { id: String },
    #[error("node `{id}` references missing parent `{parent_id}`")]
    MissingParent { id: String, parent_id: String },
    #[error("cycle detected at node `{id}`")]
    Cycle { id: String },
    #[error("multiple roots: `{first}` and `{second}`")]
    MultipleRoots { first: String, second: String },
    #[error("hierarchy has no root")]
    NoRoot,
    #[error("level {level} out of range (tree depth is {depth})")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("extra column {column} is already mapped to a tree leaf")]
    ExtraColumnOverlap { column: usize },
    #[error("column {column} is not mapped to any leaf")]
    UnmappedColumn { column: usize },
    #[error("unknown node id `{id}`")]
    UnknownNode { id: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub parent: Option<usize>,
    pub label: String,
    pub code: Option<String>,
    pub level: usize,
    pub children: Vec<usize>,
}

/// One penalty group: the feature columns it covers plus its weight.
///
/// Tree-derived groups carry the id and level of the node they came from;
/// the group of a node is always the union of its children's groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub node_id: String,
    pub level: usize,
    pub member_columns: Vec<usize>,
    pub weight: f64,
}

impl Group {
    /// Same group with every member column shifted by `offset`. Used to move
    /// feature-space groups (leaf 0 = column 0) into design-matrix space
    /// where column 0 is the intercept.
    pub fn shifted(&self, offset: usize) -> Group {
        Group {
            node_id: self.node_id.clone(),
            level: self.level,
            member_columns: self.member_columns.iter().map(|c| c + offset).collect(),
            weight: self.weight,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HierarchyTree {
    nodes: Vec<NodeRecord>,
    index: HashMap<String, usize>,
    root: usize,
    depth: usize,
    /// feature column -> node index of the owning leaf
    column_leaves: Vec<usize>,
    /// node index -> feature column (leaves only)
    leaf_columns: HashMap<usize, usize>,
}

impl HierarchyTree {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        self.column_leaves.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn root(&self) -> &NodeRecord {
        &self.nodes[self.root]
    }

    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    /// Feature column owned by a leaf node, if `id` names a leaf.
    pub fn leaf_column(&self, id: &str) -> Option<usize> {
        let i = *self.index.get(id)?;
        self.leaf_columns.get(&i).copied()
    }

    /// All feature columns under `id`'s subtree, ascending.
    pub fn leaf_columns_under(&self, id: &str) -> Result<Vec<usize>, HierarchyError> {
        let &start = self
            .index
            .get(id)
            .ok_or_else(|| HierarchyError::UnknownNode { id: id.to_string() })?;
        let mut cols = Vec::new();
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            if let Some(&col) = self.leaf_columns.get(&i) {
                cols.push(col);
            }
            stack.extend(&self.nodes[i].children);
        }
        cols.sort_unstable();
        Ok(cols)
    }

    fn group_for(&self, node: usize) -> Group {
        let rec = &self.nodes[node];
        Group {
            node_id: rec.id.clone(),
            level: rec.level,
            member_columns: self.leaf_columns_under(&rec.id).unwrap(),
            weight: 1.0,
        }
    }
}

/// Parse the flat edge-list format: `id<TAB>parent_id<TAB>label` per line,
/// `-` as the root's parent_id, `#` starting a comment line. An optional
/// fourth field is kept as the node's taxonomy code.
pub fn parse_hierarchy(text: &str) -> Result<HierarchyTree, HierarchyError> {
    let mut nodes: Vec<NodeRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut parent_ids: Vec<Option<String>> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 || fields[0].is_empty() {
            return Err(HierarchyError::Malformed {
                line: lineno + 1,
                content: line.to_string(),
            });
        }
        let id = fields[0].to_string();
        if index.contains_key(&id) {
            return Err(HierarchyError::DuplicateId { id });
        }
        index.insert(id.clone(), nodes.len());
        parent_ids.push(if fields[1] == "-" {
            None
        } else {
            Some(fields[1].to_string())
        });
        nodes.push(NodeRecord {
            id,
            parent: None,
            label: fields[2].to_string(),
            code: fields.get(3).map(|s| s.to_string()),
            level: 0,
            children: Vec::new(),
        });
    }

    for (i, pid) in parent_ids.iter().enumerate() {
        if let Some(pid) = pid {
            let &p = index
                .get(pid)
                .ok_or_else(|| HierarchyError::MissingParent {
                    id: nodes[i].id.clone(),
                    parent_id: pid.clone(),
                })?;
            nodes[i].parent = Some(p);
        }
    }

    // Walk each parent chain once; a chain that re-enters itself is a cycle.
    // color: 0 = unseen, 1 = on the current chain, 2 = cleared.
    let mut color = vec![0u8; nodes.len()];
    for start in 0..nodes.len() {
        if color[start] != 0 {
            continue;
        }
        let mut chain = Vec::new();
        let mut cur = start;
        loop {
            match color[cur] {
                1 => {
                    return Err(HierarchyError::Cycle {
                        id: nodes[cur].id.clone(),
                    })
                }
                2 => break,
                _ => {}
            }
            color[cur] = 1;
            chain.push(cur);
            match nodes[cur].parent {
                Some(p) => cur = p,
                None => break,
            }
        }
        for n in chain {
            color[n] = 2;
        }
    }

    let mut root = None;
    for (i, node) in nodes.iter().enumerate() {
        if node.parent.is_none() {
            if let Some(r) = root {
                return Err(HierarchyError::MultipleRoots {
                    first: nodes[r as usize].id.clone(),
                    second: node.id.clone(),
                });
            }
            root = Some(i as u32);
        }
    }
    let root = root.ok_or(HierarchyError::NoRoot)? as usize;

    for i in 0..nodes.len() {
        if let Some(p) = nodes[i].parent {
            nodes[p].children.push(i);
        }
    }

    // Levels bottom-up: process in reverse topological order (children first).
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        order.push(i);
        stack.extend(&nodes[i].children);
    }
    for &i in order.iter().rev() {
        nodes[i].level = nodes[i]
            .children
            .iter()
            .map(|&c| nodes[c].level + 1)
            .max()
            .unwrap_or(0);
    }
    let depth = nodes[root].level;

    let mut column_leaves = Vec::new();
    let mut leaf_columns = HashMap::new();
    for (i, node) in nodes.iter().enumerate() {
        if node.children.is_empty() {
            leaf_columns.insert(i, column_leaves.len());
            column_leaves.push(i);
        }
    }

    Ok(HierarchyTree {
        nodes,
        index,
        root,
        depth,
        column_leaves,
        leaf_columns,
    })
}

/// Inverse of [`parse_hierarchy`] up to comments and blank lines.
pub fn serialize_hierarchy(tree: &HierarchyTree) -> String {
    let mut out = String::new();
    for node in &tree.nodes {
        let parent = match node.parent {
            Some(p) => tree.nodes[p].id.as_str(),
            None => "-",
        };
        let _ = write!(out, "{}\t{}\t{}", node.id, parent, node.label);
        if let Some(code) = &node.code {
            let _ = write!(out, "\t{}", code);
        }
        out.push('\n');
    }
    out
}

/// One group per node at the given level, each covering its descendant
/// leaves' feature columns. Groups come back sorted by node id.
pub fn groups_at_level(tree: &HierarchyTree, level: usize) -> Result<Vec<Group>, HierarchyError> {
    if level > tree.depth {
        return Err(HierarchyError::LevelOutOfRange {
            level,
            depth: tree.depth,
        });
    }
    let mut groups: Vec<Group> = (0..tree.nodes.len())
        .filter(|&i| tree.nodes[i].level == level)
        .map(|i| tree.group_for(i))
        .collect();
    groups.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    Ok(groups)
}

/// The disjoint partition used by the sparse-group penalty: the tree's
/// top-level branches plus one group holding the extra (ungrouped,
/// typically demographic) columns. For trees of depth ≥ 2 the branch
/// groups are the root's children; a depth-1 tree contributes its root
/// group whole.
pub fn top_level_groups(
    tree: &HierarchyTree,
    extra_columns: &[usize],
) -> Result<Vec<Group>, HierarchyError> {
    let level = tree.depth.saturating_sub(1).max(1).min(tree.depth);
    let mut groups = groups_at_level(tree, level)?;
    for &col in extra_columns {
        if col < tree.leaf_count() {
            return Err(HierarchyError::ExtraColumnOverlap { column: col });
        }
    }
    if !extra_columns.is_empty() {
        let mut member_columns: Vec<usize> = extra_columns.to_vec();
        member_columns.sort_unstable();
        member_columns.dedup();
        groups.push(Group {
            node_id: "(extra)".to_string(),
            level,
            member_columns,
            weight: 1.0,
        });
    }
    Ok(groups)
}

/// Every node's group, children strictly before parents: sorted by level
/// ascending, ties broken by node id. A strict descendant always has a
/// strictly smaller level, so strict subset groups come first, which is
/// the order the tree prox needs.
pub fn prox_order(tree: &HierarchyTree) -> Vec<Group> {
    let mut order: Vec<usize> = (0..tree.nodes.len()).collect();
    order.sort_by(|&a, &b| {
        (tree.nodes[a].level, &tree.nodes[a].id).cmp(&(tree.nodes[b].level, &tree.nodes[b].id))
    });
    order.into_iter().map(|i| tree.group_for(i)).collect()
}

/// Node ids on the path root → leaf for the leaf owning `column`.
pub fn ancestor_chain(tree: &HierarchyTree, column: usize) -> Result<Vec<&str>, HierarchyError> {
    let &leaf = tree
        .column_leaves
        .get(column)
        .ok_or(HierarchyError::UnmappedColumn { column })?;
    let mut chain = Vec::new();
    let mut cur = Some(leaf);
    while let Some(i) = cur {
        chain.push(tree.nodes[i].id.as_str());
        cur = tree.nodes[i].parent;
    }
    chain.reverse();
    Ok(chain)
}

/// Build a uniform tree from per-level branching factors, root first:
/// `&[2, 3]` gives a root with 2 children, each with 3 leaves. Node ids
/// are zero-padded path strings so lexicographic order matches structure.
pub fn balanced_tree(branching: &[usize]) -> HierarchyTree {
    assert!(branching.iter().all(|&b| b >= 1 && b <= 100));
    let mut text = String::from("r\t-\tr\n");
    let mut frontier = vec![String::from("r")];
    for &b in branching {
        let mut next = Vec::with_capacity(frontier.len() * b);
        for parent in &frontier {
            for k in 0..b {
                let id = format!("{}.{:02}", parent, k);
                let _ = writeln!(text, "{}\t{}\t{}", id, parent, id);
                next.push(id);
            }
        }
        frontier = next;
    }
    parse_hierarchy(&text).expect("generated tree is valid")
}
