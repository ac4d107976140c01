//! Newick reading and writing.
//!
//! Trees are written with branch lengths at 12 significant digits and no
//! root branch. Bracketed comments (`[...]`) are skipped on input.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tree::{PhyloTree, LEAF_AGE};

/// Absolute tolerance on root-to-leaf path length when reading.
pub const ULTRAMETRIC_TOLERANCE: f64 = 1e-9;

/// A parsed Newick node of arbitrary arity.
#[derive(Debug, Clone, PartialEq)]
pub struct NewickNode {
    pub label: Option<String>,
    pub length: Option<f64>,
    pub comment: Option<String>,
    pub children: Vec<NewickNode>,
    /// Byte offset where the node starts.
    pub offset: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Newick { offset: self.pos, message: message.into() })
    }

    /// Skip whitespace and comments; returns the last comment seen.
    fn skip(&mut self) -> Result<Option<String>> {
        let mut comment = None;
        loop {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.peek() == Some(b'[') {
                let start = self.pos + 1;
                match self.src[start..].iter().position(|&c| c == b']') {
                    Some(len) => {
                        comment = Some(String::from_utf8_lossy(&self.src[start..start + len]).into_owned());
                        self.pos = start + len + 1;
                    }
                    None => return self.err("unterminated comment"),
                }
            } else {
                return Ok(comment);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn label(&mut self) -> Result<Option<String>> {
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return self.err("unterminated quoted label"),
                    Some(b'\'') if self.src.get(self.pos + 1) == Some(&b'\'') => {
                        out.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return Ok(Some(String::from_utf8_lossy(&out).into_owned()));
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if b"():,;[]'".contains(&c) || c.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            Ok(None)
        } else {
            Ok(Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()))
        }
    }

    fn length(&mut self) -> Result<Option<f64>> {
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip()?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b"+-.eE".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Some(x)),
            _ => {
                self.pos = start;
                self.err(format!("invalid branch length `{text}`"))
            }
        }
    }

    fn node(&mut self) -> Result<NewickNode> {
        self.skip()?;
        let offset = self.pos;
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                children.push(self.node()?);
                self.skip()?;
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return self.err("expected ',' or ')'"),
                }
            }
        }
        let mut comment = self.skip()?;
        let label = self.label()?;
        if let Some(c) = self.skip()? {
            comment = Some(c);
        }
        let length = self.length()?;
        if let Some(c) = self.skip()? {
            comment = Some(c);
        }
        if children.is_empty() && label.is_none() {
            return self.err("expected a leaf label or '('");
        }
        Ok(NewickNode { label, length, comment, children, offset })
    }
}

/// Parse one Newick tree of arbitrary arity.
pub fn parse_newick(text: &str) -> Result<NewickNode> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let root = p.node()?;
    p.skip()?;
    if p.peek() != Some(b';') {
        return p.err("expected ';'");
    }
    p.pos += 1;
    p.skip()?;
    if p.pos != p.src.len() {
        return p.err("trailing characters after ';'");
    }
    Ok(root)
}

impl NewickNode {
    pub fn leaf_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            if n.children.is_empty() {
                out.push(n.label.clone().unwrap_or_default());
            }
            stack.extend(n.children.iter().rev());
        }
        out
    }
}

/// Read a binary ultrametric tree of height 1.
///
/// With `expected_leaves`, leaf `i` of the result carries `expected_leaves[i]`
/// and the label sets must agree; otherwise leaves are numbered in order of
/// appearance.
pub fn from_newick(text: &str, expected_leaves: Option<&[String]>) -> Result<PhyloTree> {
    let root = parse_newick(text)?;
    let appearance = root.leaf_labels();
    let taxa: Vec<String> = match expected_leaves {
        Some(expected) => {
            let mut a = appearance.clone();
            let mut b = expected.to_vec();
            a.sort();
            b.sort();
            if a != b {
                return Err(Error::LeafSetMismatch(format!(
                    "tree has leaves {{{}}}, expected {{{}}}",
                    a.join(","),
                    b.join(",")
                )));
            }
            expected.to_vec()
        }
        None => appearance,
    };
    let v = taxa.len();
    let index: std::collections::HashMap<&str, usize> =
        taxa.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != v {
        return Err(Error::Newick { offset: 0, message: "duplicate leaf label".into() });
    }

    let n_nodes = (2 * v).saturating_sub(1);
    let mut parents = vec![None; n_nodes.max(1)];
    let mut ages = vec![0.0; n_nodes.max(1)];
    let mut next_internal = v;
    let mut order: Vec<Vec<usize>> = vec![Vec::new(); parents.len()];
    // (node, parent slot, depth of parent)
    let mut stack: Vec<(&NewickNode, Option<usize>, f64)> = vec![(&root, None, 0.0)];
    while let Some((node, parent, parent_depth)) = stack.pop() {
        let depth = match parent {
            None => 0.0,
            Some(_) => match node.length {
                Some(len) => parent_depth + len,
                None => {
                    return Err(Error::Newick { offset: node.offset, message: "missing branch length".into() })
                }
            },
        };
        let slot = if node.children.is_empty() {
            index[node.label.as_deref().unwrap_or_default()]
        } else {
            if node.children.len() != 2 {
                return Err(Error::Newick {
                    offset: node.offset,
                    message: format!("non-binary node with {} children", node.children.len()),
                });
            }
            let s = next_internal;
            next_internal += 1;
            if s >= parents.len() {
                return Err(Error::Newick { offset: node.offset, message: "too many internal nodes".into() });
            }
            s
        };
        parents[slot] = parent;
        ages[slot] = depth;
        if let Some(p) = parent {
            order[p].push(slot);
        }
        for child in node.children.iter().rev() {
            stack.push((child, Some(slot), depth));
        }
    }
    for (i, label) in taxa.iter().enumerate() {
        let length = ages[i];
        if (length - LEAF_AGE).abs() > ULTRAMETRIC_TOLERANCE {
            return Err(Error::NotUltrametric { label: label.clone(), length, tolerance: ULTRAMETRIC_TOLERANCE });
        }
        ages[i] = LEAF_AGE;
    }
    let mut tree = PhyloTree::from_parent_table(Arc::from(taxa), &parents, &ages)?;
    for (node, kids) in tree.nodes_mut().iter_mut().zip(order) {
        if let [a, b] = kids[..] {
            node.children = Some([a, b]);
        }
    }
    Ok(tree)
}

/// Format a branch length with 12 significant digits.
pub fn format_length(x: f64) -> String {
    let rounded: f64 = format!("{:.11e}", x).parse().unwrap_or(x);
    let s = format!("{rounded}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

pub(crate) fn format_label(label: &str) -> String {
    let plain = !label.is_empty()
        && label.bytes().all(|c| !b"():,;[]'".contains(&c) && !c.is_ascii_whitespace());
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// Serialize with children in stored order.
pub fn to_newick(tree: &PhyloTree) -> String {
    to_newick_ordered(tree, |_, kids| kids)
}

/// Serialize with a caller-chosen child order.
pub fn to_newick_ordered(tree: &PhyloTree, order: impl Fn(usize, [usize; 2]) -> [usize; 2]) -> String {
    fn write(
        tree: &PhyloTree,
        n: usize,
        out: &mut String,
        order: &dyn Fn(usize, [usize; 2]) -> [usize; 2],
    ) {
        match tree.children(n) {
            None => out.push_str(&format_label(&tree.taxa()[n])),
            Some(kids) => {
                let [a, b] = order(n, kids);
                out.push('(');
                write(tree, a, out, order);
                out.push(',');
                write(tree, b, out, order);
                out.push(')');
            }
        }
        if tree.parent(n).is_some() {
            out.push(':');
            out.push_str(&format_length(tree.branch_length(n)));
        }
    }
    let mut out = String::new();
    write(tree, tree.root(), &mut out, &order);
    out.push(';');
    out
}
