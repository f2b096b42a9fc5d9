//! Flat def-use extraction: `name =` defines `name`; later reads of `name` are uses
//! of the most recent definition. No scoping and no control flow.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::lexer::{TokenKind, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataFlowEdge {
    pub def_index: usize,
    pub use_index: usize,
}

struct Pending<'a> {
    name: &'a str,
    index: usize,
    depth: usize,
}

/// A definition only becomes visible once its right-hand side is finished, so
/// `x = x + 1` reads the previous `x`. The right-hand side ends at `;`, a brace,
/// a `,` at the same nesting depth, or a closing bracket that leaves that depth.
pub fn extract_dataflow(tokens: &TokenSequence) -> Vec<DataFlowEdge> {
    let toks = tokens.tokens();
    let mut live: HashMap<&str, usize> = HashMap::new();
    let mut pending: Vec<Pending<'_>> = Vec::new();
    let mut edges = Vec::new();
    let mut depth = 0usize;

    for (pos, tok) in toks.iter().enumerate() {
        match (tok.kind, tok.text.as_str()) {
            (TokenKind::Identifier, name) => {
                let is_def = toks
                    .get(pos + 1)
                    .is_some_and(|n| n.kind == TokenKind::Operator && n.text == "=");
                if is_def {
                    pending.push(Pending {
                        name,
                        index: tok.index,
                        depth,
                    });
                } else if let Some(&def_index) = live.get(name) {
                    edges.push(DataFlowEdge {
                        def_index,
                        use_index: tok.index,
                    });
                }
            }
            (TokenKind::Punctuation, ";" | "{" | "}") => {
                commit(&mut pending, &mut live, |_| true);
                if tok.text == "{" || tok.text == "}" {
                    depth = 0;
                }
            }
            (TokenKind::Punctuation, ",") => commit(&mut pending, &mut live, |p| p.depth >= depth),
            (TokenKind::Punctuation, "(" | "[") => depth += 1,
            (TokenKind::Punctuation, ")" | "]") => {
                depth = depth.saturating_sub(1);
                commit(&mut pending, &mut live, |p| p.depth > depth);
            }
            _ => {}
        }
    }
    edges
}

fn commit<'a>(
    pending: &mut Vec<Pending<'a>>,
    live: &mut HashMap<&'a str, usize>,
    ready: impl Fn(&Pending<'a>) -> bool,
) {
    // Commit in source order so chained `a = b = 1` leaves the later index live.
    let mut keep = Vec::new();
    for p in pending.drain(..) {
        if ready(&p) {
            live.insert(p.name, p.index);
        } else {
            keep.push(p);
        }
    }
    *pending = keep;
}
