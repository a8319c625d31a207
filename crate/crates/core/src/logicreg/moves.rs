//! Neighbourhood moves over a set of logic trees. Every move, once applied,
//! yields the countermove that restores the previous state exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Leaf, LogicTree, Node, Operator};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Grow,
    Prune,
    Split,
    Delete,
    Relabel,
    FlipOperator,
}

impl MoveKind {
    pub const ALL: [MoveKind; 6] = [
        MoveKind::Grow,
        MoveKind::Prune,
        MoveKind::Split,
        MoveKind::Delete,
        MoveKind::Relabel,
        MoveKind::FlipOperator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Grow => "grow",
            MoveKind::Prune => "prune",
            MoveKind::Split => "split",
            MoveKind::Delete => "delete",
            MoveKind::Relabel => "relabel",
            MoveKind::FlipOperator => "flip_operator",
        }
    }
}

/// A fully specified move. Nodes are addressed by preorder index within a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Move {
    /// Replace the subtree at `node` by `op(subtree, leaf)`, with the new
    /// leaf on `side`.
    Grow {
        tree: usize,
        node: usize,
        op: Operator,
        leaf: Leaf,
        side: Side,
    },
    /// Replace the operator at `node` by its `keep` child; the other child
    /// must be a leaf.
    Prune { tree: usize, node: usize, keep: Side },
    /// Insert a single-leaf tree at position `at`.
    Split { at: usize, leaf: Leaf },
    /// Remove a single-leaf tree.
    Delete { tree: usize },
    Relabel { tree: usize, node: usize, leaf: Leaf },
    FlipOperator { tree: usize, node: usize },
}

impl Move {
    pub fn kind(&self) -> MoveKind {
        match self {
            Move::Grow { .. } => MoveKind::Grow,
            Move::Prune { .. } => MoveKind::Prune,
            Move::Split { .. } => MoveKind::Split,
            Move::Delete { .. } => MoveKind::Delete,
            Move::Relabel { .. } => MoveKind::Relabel,
            Move::FlipOperator { .. } => MoveKind::FlipOperator,
        }
    }

    /// Apply to `trees`, returning the new state and the countermove.
    pub fn apply(&self, trees: &[LogicTree]) -> Result<(Vec<LogicTree>, Move)> {
        let mut out = trees.to_vec();
        let invalid = |what: &str| Error::Precondition(format!("{what} not applicable: {self:?}"));
        let counter = match *self {
            Move::Grow {
                tree,
                node,
                op,
                leaf,
                side,
            } => {
                let target = out
                    .get_mut(tree)
                    .and_then(|t| t.root.get_mut(node))
                    .ok_or_else(|| invalid("grow"))?;
                let old = std::mem::replace(target, Node::leaf(0, false));
                *target = match side {
                    Side::Right => Node::op(op, old, Node::Leaf(leaf)),
                    Side::Left => Node::op(op, Node::Leaf(leaf), old),
                };
                Move::Prune {
                    tree,
                    node,
                    keep: side.other(),
                }
            }
            Move::Prune { tree, node, keep } => {
                let target = out
                    .get_mut(tree)
                    .and_then(|t| t.root.get_mut(node))
                    .ok_or_else(|| invalid("prune"))?;
                let (op, left, right) = match target {
                    Node::Op { op, left, right } => (*op, left.as_ref().clone(), right.as_ref().clone()),
                    Node::Leaf(_) => return Err(invalid("prune")),
                };
                let (kept, dropped) = match keep {
                    Side::Left => (left, right),
                    Side::Right => (right, left),
                };
                let leaf = dropped.as_leaf().ok_or_else(|| invalid("prune"))?;
                *target = kept;
                Move::Grow {
                    tree,
                    node,
                    op,
                    leaf,
                    side: keep.other(),
                }
            }
            Move::Split { at, leaf } => {
                if at > out.len() {
                    return Err(invalid("split"));
                }
                out.insert(at, LogicTree::single(leaf));
                Move::Delete { tree: at }
            }
            Move::Delete { tree } => {
                let leaf = out
                    .get(tree)
                    .and_then(|t| t.root.as_leaf())
                    .ok_or_else(|| invalid("delete"))?;
                out.remove(tree);
                Move::Split { at: tree, leaf }
            }
            Move::Relabel { tree, node, leaf } => {
                let target = out
                    .get_mut(tree)
                    .and_then(|t| t.root.get_mut(node))
                    .ok_or_else(|| invalid("relabel"))?;
                let old = target.as_leaf().ok_or_else(|| invalid("relabel"))?;
                *target = Node::Leaf(leaf);
                Move::Relabel {
                    tree,
                    node,
                    leaf: old,
                }
            }
            Move::FlipOperator { tree, node } => {
                let target = out
                    .get_mut(tree)
                    .and_then(|t| t.root.get_mut(node))
                    .ok_or_else(|| invalid("flip_operator"))?;
                match target {
                    Node::Op { op, .. } => *op = op.flipped(),
                    Node::Leaf(_) => return Err(invalid("flip_operator")),
                }
                Move::FlipOperator { tree, node }
            }
        };
        Ok((out, counter))
    }
}

/// Size bounds a proposal must respect.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveLimits {
    pub n_vars: usize,
    pub max_leaves: usize,
    pub max_trees: usize,
    /// Bound on the leaf count summed over trees.
    pub max_total_leaves: Option<usize>,
}

impl MoveLimits {
    pub fn admits(&self, trees: &[LogicTree]) -> bool {
        let total: usize = trees.iter().map(|t| t.leaf_count()).sum();
        trees.len() <= self.max_trees
            && trees.iter().all(|t| t.leaf_count() <= self.max_leaves)
            && self.max_total_leaves.is_none_or(|m| total <= m)
            && trees
                .iter()
                .all(|t| t.leaves().iter().all(|l| l.index < self.n_vars))
    }

    fn room_for_leaf(&self, trees: &[LogicTree]) -> bool {
        let total: usize = trees.iter().map(|t| t.leaf_count()).sum();
        self.max_total_leaves.is_none_or(|m| total < m)
    }
}

fn random_leaf<R: Rng + ?Sized>(n_vars: usize, rng: &mut R) -> Leaf {
    Leaf::new(rng.random_range(0..n_vars), rng.random::<bool>())
}

fn random_op<R: Rng + ?Sized>(rng: &mut R) -> Operator {
    if rng.random::<bool>() {
        Operator::And
    } else {
        Operator::Or
    }
}

/// Preorder indices of nodes satisfying `pred`, per tree.
fn sites(trees: &[LogicTree], pred: impl Fn(&Node) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (t, tree) in trees.iter().enumerate() {
        for i in 0..tree.size() {
            if pred(tree.root.get(i).expect("index below size")) {
                out.push((t, i));
            }
        }
    }
    out
}

/// Draw a random applicable move of `kind`.
pub fn propose_move<R: Rng + ?Sized>(
    trees: &[LogicTree],
    kind: MoveKind,
    limits: &MoveLimits,
    rng: &mut R,
) -> Result<Move> {
    if limits.n_vars == 0 {
        return Err(Error::NoApplicableMove(kind.name()));
    }
    let none = || Error::NoApplicableMove(kind.name());
    match kind {
        MoveKind::Grow => {
            if !limits.room_for_leaf(trees) {
                return Err(none());
            }
            let eligible: Vec<usize> = (0..trees.len())
                .filter(|&t| trees[t].leaf_count() < limits.max_leaves)
                .collect();
            if eligible.is_empty() {
                return Err(none());
            }
            let tree = eligible[rng.random_range(0..eligible.len())];
            let node = rng.random_range(0..trees[tree].size());
            Ok(Move::Grow {
                tree,
                node,
                op: random_op(rng),
                leaf: random_leaf(limits.n_vars, rng),
                side: if rng.random::<bool>() { Side::Left } else { Side::Right },
            })
        }
        MoveKind::Prune => {
            let candidates = sites(trees, |n| match n {
                Node::Op { left, right, .. } => {
                    left.as_leaf().is_some() || right.as_leaf().is_some()
                }
                Node::Leaf(_) => false,
            });
            if candidates.is_empty() {
                return Err(none());
            }
            let (tree, node) = candidates[rng.random_range(0..candidates.len())];
            let keep = match trees[tree].root.get(node) {
                Some(Node::Op { left, right, .. }) => {
                    match (left.as_leaf().is_some(), right.as_leaf().is_some()) {
                        (true, true) => {
                            if rng.random::<bool>() {
                                Side::Left
                            } else {
                                Side::Right
                            }
                        }
                        (true, false) => Side::Right,
                        _ => Side::Left,
                    }
                }
                _ => unreachable!("candidate is an operator"),
            };
            Ok(Move::Prune { tree, node, keep })
        }
        MoveKind::Split => {
            if trees.len() >= limits.max_trees || !limits.room_for_leaf(trees) || limits.max_leaves == 0 {
                return Err(none());
            }
            Ok(Move::Split {
                at: trees.len(),
                leaf: random_leaf(limits.n_vars, rng),
            })
        }
        MoveKind::Delete => {
            let singles: Vec<usize> = (0..trees.len())
                .filter(|&t| trees[t].root.as_leaf().is_some())
                .collect();
            if singles.is_empty() {
                return Err(none());
            }
            Ok(Move::Delete {
                tree: singles[rng.random_range(0..singles.len())],
            })
        }
        MoveKind::Relabel => {
            let candidates = sites(trees, |n| n.as_leaf().is_some());
            if candidates.is_empty() {
                return Err(none());
            }
            let (tree, node) = candidates[rng.random_range(0..candidates.len())];
            let old = trees[tree].root.get(node).and_then(Node::as_leaf).expect("leaf site");
            let mut leaf = random_leaf(limits.n_vars, rng);
            while leaf == old {
                leaf = random_leaf(limits.n_vars, rng);
            }
            Ok(Move::Relabel { tree, node, leaf })
        }
        MoveKind::FlipOperator => {
            let candidates = sites(trees, |n| n.as_leaf().is_none());
            if candidates.is_empty() {
                return Err(none());
            }
            let (tree, node) = candidates[rng.random_range(0..candidates.len())];
            Ok(Move::FlipOperator { tree, node })
        }
    }
}
