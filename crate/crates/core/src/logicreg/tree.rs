use std::fmt;

use crate::dataset::{tail_mask, BitMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    And,
    Or,
}

impl Operator {
    pub fn flipped(self) -> Self {
        match self {
            Operator::And => Operator::Or,
            Operator::Or => Operator::And,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            Operator::And => "AND",
            Operator::Or => "OR",
        }
    }
}

/// A covariate reference; `conjugated` negates it (`X_j = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Leaf {
    pub index: usize,
    pub conjugated: bool,
}

impl Leaf {
    pub fn new(index: usize, conjugated: bool) -> Self {
        Self { index, conjugated }
    }

    #[inline]
    pub fn eval(self, x: &[bool]) -> bool {
        x[self.index] ^ self.conjugated
    }
}

impl fmt::Display for Leaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conjugated {
            write!(f, "!x{}", self.index)
        } else {
            write!(f, "x{}", self.index)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf(Leaf),
    Op {
        op: Operator,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn op(op: Operator, left: Node, right: Node) -> Self {
        Node::Op {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn leaf(index: usize, conjugated: bool) -> Self {
        Node::Leaf(Leaf::new(index, conjugated))
    }

    pub fn as_leaf(&self) -> Option<Leaf> {
        match self {
            Node::Leaf(l) => Some(*l),
            Node::Op { .. } => None,
        }
    }

    /// Number of nodes in the subtree.
    pub fn size(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Op { left, right, .. } => 1 + left.size() + right.size(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Op { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn eval(&self, x: &[bool]) -> bool {
        match self {
            Node::Leaf(l) => l.eval(x),
            Node::Op { op, left, right } => match op {
                Operator::And => left.eval(x) && right.eval(x),
                Operator::Or => left.eval(x) || right.eval(x),
            },
        }
    }

    fn eval_bits(&self, m: &BitMatrix) -> Vec<u64> {
        match self {
            Node::Leaf(l) => {
                let col = m.column(l.index);
                if l.conjugated {
                    col.iter().map(|w| !w).collect()
                } else {
                    col.to_vec()
                }
            }
            Node::Op { op, left, right } => {
                let mut a = left.eval_bits(m);
                let b = right.eval_bits(m);
                match op {
                    Operator::And => a.iter_mut().zip(&b).for_each(|(x, y)| *x &= y),
                    Operator::Or => a.iter_mut().zip(&b).for_each(|(x, y)| *x |= y),
                }
                a
            }
        }
    }

    fn collect_leaves(&self, out: &mut Vec<Leaf>) {
        match self {
            Node::Leaf(l) => out.push(*l),
            Node::Op { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Node at preorder position `idx` (root is 0).
    pub fn get(&self, idx: usize) -> Option<&Node> {
        if idx == 0 {
            return Some(self);
        }
        match self {
            Node::Leaf(_) => None,
            Node::Op { left, right, .. } => {
                let ls = left.size();
                if idx <= ls {
                    left.get(idx - 1)
                } else {
                    right.get(idx - 1 - ls)
                }
            }
        }
    }

    pub fn get_mut(&mut self, idx: usize) -> Option<&mut Node> {
        if idx == 0 {
            return Some(self);
        }
        match self {
            Node::Leaf(_) => None,
            Node::Op { left, right, .. } => {
                let ls = left.size();
                if idx <= ls {
                    left.get_mut(idx - 1)
                } else {
                    right.get_mut(idx - 1 - ls)
                }
            }
        }
    }

    /// Logical complement with negations pushed to the leaves (De Morgan).
    pub fn complement(&self) -> Node {
        match self {
            Node::Leaf(l) => Node::leaf(l.index, !l.conjugated),
            Node::Op { op, left, right } => Node::op(op.flipped(), left.complement(), right.complement()),
        }
    }

    fn write_prefix(&self, out: &mut String) {
        match self {
            Node::Leaf(l) => out.push_str(&l.to_string()),
            Node::Op { op, left, right } => {
                out.push_str(op.keyword());
                out.push(' ');
                left.write_prefix(out);
                out.push(' ');
                right.write_prefix(out);
            }
        }
    }
}

impl fmt::Display for Node {
    /// Fully parenthesized infix form, e.g. `((x1 AND !x2) OR x5)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Leaf(l) => write!(f, "{l}"),
            Node::Op { op, left, right } => write!(f, "({left} {} {right})", op.keyword()),
        }
    }
}

/// A Boolean expression over binary covariates in tree form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LogicTree {
    pub root: Node,
}

impl LogicTree {
    pub fn new(root: Node) -> Self {
        Self { root }
    }

    pub fn single(leaf: Leaf) -> Self {
        Self {
            root: Node::Leaf(leaf),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn leaves(&self) -> Vec<Leaf> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    pub fn max_index(&self) -> Option<usize> {
        self.leaves().iter().map(|l| l.index).max()
    }

    /// Evaluate on one sample's covariates.
    pub fn eval(&self, x: &[bool]) -> Result<bool> {
        if let Some(max) = self.max_index() {
            if max >= x.len() {
                return Err(Error::IndexOutOfRange {
                    index: max,
                    p: x.len(),
                });
            }
        }
        Ok(self.root.eval(x))
    }

    /// Evaluate on every row of `m`; bits past the last row are zero.
    pub fn eval_bits(&self, m: &BitMatrix) -> Result<Vec<u64>> {
        if let Some(max) = self.max_index() {
            if max >= m.n_cols() {
                return Err(Error::IndexOutOfRange {
                    index: max,
                    p: m.n_cols(),
                });
            }
        }
        Ok(self.eval_bits_unchecked(m))
    }

    pub(crate) fn eval_bits_unchecked(&self, m: &BitMatrix) -> Vec<u64> {
        let mut bits = self.root.eval_bits(m);
        if let Some(last) = bits.last_mut() {
            *last &= tail_mask(m.n_rows());
        }
        bits
    }

    pub fn complement(&self) -> LogicTree {
        LogicTree::new(self.root.complement())
    }

    /// Prefix notation: `OR AND x1 !x2 x5`.
    pub fn to_prefix(&self) -> String {
        let mut s = String::new();
        self.root.write_prefix(&mut s);
        s
    }

    /// Parse prefix notation. Parentheses are accepted and ignored.
    pub fn parse_prefix(text: &str) -> Result<LogicTree> {
        let cleaned = text.replace(['(', ')'], " ");
        let mut tokens = cleaned.split_whitespace();
        let root = parse_node(&mut tokens)?;
        if let Some(extra) = tokens.next() {
            return Err(Error::Parse(format!("trailing token `{extra}` in `{text}`")));
        }
        Ok(LogicTree::new(root))
    }
}

fn parse_node<'a>(tokens: &mut impl Iterator<Item = &'a str>) -> Result<Node> {
    let tok = tokens
        .next()
        .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
    match tok.to_ascii_uppercase().as_str() {
        "AND" | "OR" => {
            let op = if tok.eq_ignore_ascii_case("and") {
                Operator::And
            } else {
                Operator::Or
            };
            let left = parse_node(tokens)?;
            let right = parse_node(tokens)?;
            Ok(Node::op(op, left, right))
        }
        _ => {
            let (conj, rest) = match tok.strip_prefix('!') {
                Some(r) => (true, r),
                None => (false, tok),
            };
            let idx = rest
                .strip_prefix('x')
                .and_then(|d| d.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse(format!("bad leaf `{tok}`")))?;
            Ok(Node::leaf(idx, conj))
        }
    }
}

impl fmt::Display for LogicTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}
