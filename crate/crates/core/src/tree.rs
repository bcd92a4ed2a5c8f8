//! Unlabeled binary parse trees and their bracketed text form.
//!
//! A [`BinaryTree`] over `n` leaves is stored as the sequence of `n - 1`
//! merge positions produced by bottom-up parsing: at layer `t` there are
//! `n - t` items and merging position `p` fuses items `p` and `p + 1`. Node
//! indices follow creation order: leaves `0..n`, then one internal node per
//! merge, so the root is node `2n - 2`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryTree {
    n: usize,
    merges: Vec<usize>,
    tokens: Option<Vec<String>>,
}

/// Half-open leaf interval.
pub type Span = (usize, usize);

impl BinaryTree {
    pub fn new(n: usize, merges: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("a tree needs at least one leaf".into()));
        }
        if merges.len() != n - 1 {
            return Err(Error::Input(format!(
                "a tree over {n} leaves needs {} merges, got {}",
                n - 1,
                merges.len()
            )));
        }
        for (t, &p) in merges.iter().enumerate() {
            if p + 1 >= n - t {
                return Err(Error::Input(format!(
                    "merge {t} at position {p} is out of range for {} items",
                    n - t
                )));
            }
        }
        Ok(BinaryTree {
            n,
            merges,
            tokens: None,
        })
    }

    pub fn with_tokens(mut self, tokens: Vec<String>) -> Result<Self> {
        if tokens.len() != self.n {
            return Err(Error::Input(format!(
                "{} tokens for a tree over {} leaves",
                tokens.len(),
                self.n
            )));
        }
        self.tokens = Some(tokens);
        Ok(self)
    }

    pub fn left_branching(n: usize) -> Result<Self> {
        BinaryTree::new(n, vec![0; n.saturating_sub(1)])
    }

    pub fn right_branching(n: usize) -> Result<Self> {
        // after t merges there are n - t items; the last pair starts at n - t - 2
        BinaryTree::new(n, (0..n.saturating_sub(1)).map(|t| n - t - 2).collect())
    }

    pub fn leaf_count(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[usize] {
        &self.merges
    }

    pub fn tokens(&self) -> Option<&[String]> {
        self.tokens.as_deref()
    }

    pub fn node_count(&self) -> usize {
        2 * self.n - 1
    }

    /// Span and children of every node, in creation order.
    pub fn nodes(&self) -> Vec<(Span, Option<(usize, usize)>)> {
        let mut nodes: Vec<(Span, Option<(usize, usize)>)> = (0..self.n).map(|i| ((i, i + 1), None)).collect();
        let mut current: Vec<usize> = (0..self.n).collect();
        for &p in &self.merges {
            let (l, r) = (current[p], current[p + 1]);
            let span = (nodes[l].0 .0, nodes[r].0 .1);
            nodes.push((span, Some((l, r))));
            current.splice(p..p + 2, [nodes.len() - 1]);
        }
        nodes
    }

    /// Leaf span of every node in creation order.
    pub fn node_spans(&self) -> Vec<Span> {
        self.nodes().into_iter().map(|(s, _)| s).collect()
    }

    /// Edge count from the root to each leaf.
    pub fn leaf_depths(&self) -> Vec<usize> {
        let nodes = self.nodes();
        let mut depth = vec![0usize; nodes.len()];
        for i in (0..nodes.len()).rev() {
            if let Some((l, r)) = nodes[i].1 {
                depth[l] = depth[i] + 1;
                depth[r] = depth[i] + 1;
            }
        }
        depth.truncate(self.n);
        depth
    }

    /// The same tree with merges in left-to-right post-order, the order
    /// produced by [`BinaryTree::parse_bracketed`].
    pub fn canonical(&self) -> BinaryTree {
        let nodes = self.nodes();
        let mut order = Vec::with_capacity(self.n - 1);
        post_order(&nodes, nodes.len() - 1, &mut order);
        let merges = merges_from_spans(self.n, &order);
        BinaryTree {
            n: self.n,
            merges,
            tokens: self.tokens.clone(),
        }
    }

    /// Equal leaf count and constituents, regardless of merge order.
    pub fn same_structure(&self, other: &BinaryTree) -> bool {
        self.n == other.n && self.canonical().merges == other.canonical().merges
    }

    /// Bracketed form, e.g. `( ( w1 w2 ) w3 )`. Leaves without tokens are
    /// written `w1 … wn`; parentheses inside tokens are escaped as
    /// `-LRB-` / `-RRB-`.
    pub fn to_bracketed(&self) -> String {
        let nodes = self.nodes();
        let mut out = String::new();
        if self.n == 1 {
            out.push_str("( ");
            out.push_str(&self.leaf_label(0));
            out.push_str(" )");
            return out;
        }
        self.render(&nodes, nodes.len() - 1, &mut out);
        out
    }

    fn leaf_label(&self, i: usize) -> String {
        match &self.tokens {
            Some(t) => t[i].replace('(', "-LRB-").replace(')', "-RRB-"),
            None => format!("w{}", i + 1),
        }
    }

    fn render(&self, nodes: &[(Span, Option<(usize, usize)>)], i: usize, out: &mut String) {
        match nodes[i].1 {
            None => out.push_str(&self.leaf_label(i)),
            Some((l, r)) => {
                out.push_str("( ");
                self.render(nodes, l, out);
                out.push(' ');
                self.render(nodes, r, out);
                out.push_str(" )");
            }
        }
    }

    /// Parses one bracketed tree. Non-binary nodes are left-binarized and
    /// unary nodes collapsed; the second value counts binarized nodes.
    pub fn parse_bracketed(line: &str) -> std::result::Result<(BinaryTree, usize), String> {
        let spaced = line.replace('(', " ( ").replace(')', " ) ");
        let mut stack: Vec<Vec<Shape>> = Vec::new();
        let mut root: Option<Shape> = None;
        let mut tokens = Vec::new();
        for tok in spaced.split_whitespace() {
            if root.is_some() {
                return Err("text after the end of the tree".into());
            }
            match tok {
                "(" => stack.push(Vec::new()),
                ")" => {
                    let children = stack.pop().ok_or("unbalanced parentheses: unexpected ')'")?;
                    if children.is_empty() {
                        return Err("empty brackets".into());
                    }
                    let node = Shape::Node(children);
                    match stack.last_mut() {
                        Some(parent) => parent.push(node),
                        None => root = Some(node),
                    }
                }
                word => {
                    let parent = stack.last_mut().ok_or("leaf outside brackets")?;
                    parent.push(Shape::Leaf(tokens.len()));
                    tokens.push(word.to_string());
                }
            }
        }
        if !stack.is_empty() {
            return Err("unbalanced parentheses: missing ')'".into());
        }
        let root = root.ok_or("empty line")?;
        let mut binarized = 0;
        let root = root.binarize(&mut binarized);
        let mut order = Vec::with_capacity(tokens.len().saturating_sub(1));
        root.post_order_spans(&mut order);
        let n = tokens.len();
        let tree = BinaryTree {
            n,
            merges: merges_from_spans(n, &order),
            tokens: Some(tokens),
        };
        Ok((tree, binarized))
    }
}

impl std::fmt::Display for BinaryTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

fn post_order(nodes: &[(Span, Option<(usize, usize)>)], i: usize, order: &mut Vec<Span>) {
    if let Some((l, r)) = nodes[i].1 {
        post_order(nodes, l, order);
        post_order(nodes, r, order);
        order.push(nodes[i].0);
    }
}

/// Merge positions for internal-node spans listed in a valid bottom-up order.
fn merges_from_spans(n: usize, order: &[Span]) -> Vec<usize> {
    let mut current: Vec<Span> = (0..n).map(|i| (i, i + 1)).collect();
    let mut merges = Vec::with_capacity(order.len());
    for &(start, end) in order {
        let p = current
            .iter()
            .position(|s| s.0 == start)
            .expect("child spans are present before their parent");
        debug_assert_eq!(current[p + 1].1, end);
        current.splice(p..p + 2, [(start, end)]);
        merges.push(p);
    }
    merges
}

#[derive(Debug)]
enum Shape {
    Leaf(usize),
    Node(Vec<Shape>),
}

enum Bin {
    Leaf(usize),
    Node(Box<Bin>, Box<Bin>),
}

impl Shape {
    fn binarize(self, binarized: &mut usize) -> Bin {
        match self {
            Shape::Leaf(i) => Bin::Leaf(i),
            Shape::Node(children) => {
                if children.len() > 2 {
                    *binarized += 1;
                }
                let mut iter = children.into_iter().map(|c| c.binarize(binarized));
                let first = iter.next().expect("non-empty");
                iter.fold(first, |acc, c| Bin::Node(Box::new(acc), Box::new(c)))
            }
        }
    }
}

impl Bin {
    /// Returns the span of this subtree after pushing internal spans.
    fn post_order_spans(&self, order: &mut Vec<Span>) -> Span {
        match self {
            Bin::Leaf(i) => (*i, i + 1),
            Bin::Node(l, r) => {
                let (s, _) = l.post_order_spans(order);
                let (_, e) = r.post_order_spans(order);
                order.push((s, e));
                (s, e)
            }
        }
    }
}

/// Writes one bracketed tree per line.
pub fn write_bracketed<'a>(trees: impl IntoIterator<Item = &'a BinaryTree>) -> String {
    let mut out = String::new();
    for t in trees {
        let _ = writeln!(out, "{}", t.to_bracketed());
    }
    out
}
