//! The nested-list text format: `[[[1,5],2],3,4]`. Integers are parts, each
//! bracket pair is a subassembly, the outermost list is the finished item.

use std::collections::BTreeSet;

use super::{validate, AssemblyGraph, GraphError, PartId, Tree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NestedListError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("empty list at byte {pos}")]
    EmptyList { pos: usize },
    #[error("part {0} appears more than once")]
    DuplicatePart(PartId),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, msg: impl Into<String>) -> NestedListError {
        NestedListError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn list(&mut self) -> Result<Tree, NestedListError> {
        let start = self.pos;
        if self.peek() != Some(b'[') {
            return Err(self.err("expected `[`"));
        }
        self.pos += 1;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            return Err(NestedListError::EmptyList { pos: start });
        }
        loop {
            self.skip_ws();
            items.push(self.item()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Tree::Node(items));
                }
                Some(c) => return Err(self.err(format!("unexpected `{}`", c as char))),
                None => return Err(self.err("unbalanced brackets: missing `]`")),
            }
        }
    }

    fn item(&mut self) -> Result<Tree, NestedListError> {
        match self.peek() {
            Some(b'[') => self.list(),
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
                text.parse::<u32>()
                    .map(|v| Tree::Leaf(PartId(v)))
                    .map_err(|_| NestedListError::Syntax {
                        pos: start,
                        msg: format!("integer `{text}` out of range"),
                    })
            }
            Some(c) => Err(self.err(format!("expected integer or `[`, found `{}`", c as char))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Parses nested-list text into a tree. Rejects malformed syntax, empty
/// lists and repeated integers; everything else (including single-element
/// lists) is left for [`validate`].
pub fn parse_tree(text: &str) -> Result<Tree, NestedListError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let tree = p.list()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input after the outermost list"));
    }
    let mut seen = BTreeSet::new();
    for leaf in tree.leaves() {
        if !seen.insert(leaf) {
            return Err(NestedListError::DuplicatePart(leaf));
        }
    }
    Ok(tree)
}

pub fn parse_nested_list(
    text: &str,
    equivalences: &[(PartId, PartId)],
) -> Result<AssemblyGraph, NestedListError> {
    let tree = parse_tree(text)?;
    Ok(AssemblyGraph::from_tree(
        &tree,
        equivalences.iter().copied(),
    ))
}

/// Canonical text for a valid graph: no whitespace, children ordered by
/// their smallest part.
pub fn to_nested_list(graph: &AssemblyGraph) -> Result<String, GraphError> {
    let violations = validate(graph);
    if !violations.is_empty() {
        return Err(GraphError::Invalid(violations));
    }
    Ok(graph.canonical_form().expect("valid graphs are trees"))
}
