use super::{render_surface, Formalism, NodeId, SyntaxError, SyntaxNode, SyntaxTree, Token};

#[derive(Debug, Clone, PartialEq)]
enum Lexeme<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str, usize),
}

fn lex(doc: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in doc.char_indices() {
        let boundary = ch == '(' || ch == ')' || ch.is_whitespace();
        if boundary {
            if let Some(s) = start.take() {
                out.push(Lexeme::Atom(&doc[s..i], s));
            }
            match ch {
                '(' => out.push(Lexeme::Open(i)),
                ')' => out.push(Lexeme::Close(i)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Lexeme::Atom(&doc[s..], s));
    }
    out
}

enum Raw {
    Leaf { tag: String, word: String },
    Inner { label: String, children: Vec<Raw> },
}

struct Reader<'a> {
    lexemes: Vec<Lexeme<'a>>,
    pos: usize,
    end: usize,
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<&Lexeme<'a>> {
        self.lexemes.get(self.pos)
    }

    fn next(&mut self) -> Option<Lexeme<'a>> {
        let lx = self.lexemes.get(self.pos).cloned();
        self.pos += 1;
        lx
    }

    fn tree(&mut self) -> Result<Raw, SyntaxError> {
        let open = match self.next() {
            Some(Lexeme::Open(o)) => o,
            Some(Lexeme::Close(o)) => return Err(SyntaxError::UnbalancedBrackets(o)),
            Some(Lexeme::Atom(t, o)) => {
                return Err(SyntaxError::UnexpectedToken {
                    token: t.to_string(),
                    offset: o,
                })
            }
            None => return Err(SyntaxError::UnbalancedBrackets(self.end)),
        };
        // `( (S ...))` style outer wrapper without a label.
        let label = match self.peek() {
            Some(Lexeme::Atom(t, _)) => {
                let t = t.to_string();
                self.pos += 1;
                t
            }
            _ => "ROOT".to_string(),
        };
        match self.peek().cloned() {
            None => Err(SyntaxError::UnbalancedBrackets(self.end)),
            Some(Lexeme::Close(_)) => Err(SyntaxError::EmptyConstituent(open)),
            Some(Lexeme::Atom(word, _)) => {
                self.pos += 1;
                match self.next() {
                    Some(Lexeme::Close(_)) => Ok(Raw::Leaf {
                        tag: label,
                        word: word.to_string(),
                    }),
                    Some(Lexeme::Atom(t, o)) => Err(SyntaxError::UnexpectedToken {
                        token: t.to_string(),
                        offset: o,
                    }),
                    Some(Lexeme::Open(o)) => Err(SyntaxError::UnexpectedToken {
                        token: "(".into(),
                        offset: o,
                    }),
                    None => Err(SyntaxError::UnbalancedBrackets(self.end)),
                }
            }
            Some(Lexeme::Open(_)) => {
                let mut children = Vec::new();
                loop {
                    match self.peek() {
                        Some(Lexeme::Open(_)) => children.push(self.tree()?),
                        Some(Lexeme::Close(_)) => {
                            self.pos += 1;
                            break;
                        }
                        Some(Lexeme::Atom(t, o)) => {
                            return Err(SyntaxError::UnexpectedToken {
                                token: t.to_string(),
                                offset: *o,
                            })
                        }
                        None => return Err(SyntaxError::UnbalancedBrackets(self.end)),
                    }
                }
                Ok(Raw::Inner { label, children })
            }
        }
    }
}

/// Parses one Penn-Treebank-style bracketed tree into a constituency tree.
///
/// Every bracket becomes a node; `(TAG word)` pre-terminals are the leaves.
/// Node ids are assigned in pre-order, so the outermost bracket is node 0.
pub fn parse_ptb(doc: &str) -> Result<SyntaxTree, SyntaxError> {
    let lexemes = lex(doc);
    if lexemes.is_empty() {
        return Err(SyntaxError::EmptySentence);
    }
    let mut reader = Reader {
        lexemes,
        pos: 0,
        end: doc.len(),
    };
    let raw = reader.tree()?;
    if let Some(extra) = reader.next() {
        return Err(match extra {
            Lexeme::Close(o) => SyntaxError::UnbalancedBrackets(o),
            Lexeme::Open(o) => SyntaxError::UnexpectedToken {
                token: "(".into(),
                offset: o,
            },
            Lexeme::Atom(t, o) => SyntaxError::UnexpectedToken {
                token: t.to_string(),
                offset: o,
            },
        });
    }

    let mut tokens = Vec::new();
    let mut nodes: Vec<SyntaxNode> = Vec::new();
    build(&raw, None, &mut tokens, &mut nodes);
    for node in &mut nodes {
        node.surface = render_surface(&tokens, &node.span);
    }
    let question = tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ");
    Ok(SyntaxTree {
        formalism: Formalism::Constituency,
        question,
        tokens,
        root: NodeId(0),
        nodes,
    })
}

fn build(raw: &Raw, parent: Option<NodeId>, tokens: &mut Vec<Token>, nodes: &mut Vec<SyntaxNode>) -> NodeId {
    let id = NodeId(nodes.len());
    let label = match raw {
        Raw::Leaf { tag, .. } => tag.clone(),
        Raw::Inner { label, .. } => label.clone(),
    };
    nodes.push(SyntaxNode {
        id,
        formalism: Formalism::Constituency,
        label,
        head_token: None,
        span: Vec::new(),
        surface: String::new(),
        children: Vec::new(),
        parent,
        skipped: false,
    });
    match raw {
        Raw::Leaf { tag, word } => {
            let index = tokens.len() + 1;
            tokens.push(Token {
                index,
                surface: word.clone(),
                upos: tag.clone(),
                deprel: None,
            });
            nodes[id.0].span = vec![index];
        }
        Raw::Inner { children, .. } => {
            let mut span = Vec::new();
            let mut kids = Vec::with_capacity(children.len());
            for child in children {
                let cid = build(child, Some(id), tokens, nodes);
                span.extend_from_slice(&nodes[cid.0].span);
                kids.push(cid);
            }
            nodes[id.0].span = span;
            nodes[id.0].children = kids;
        }
    }
    id
}

/// Renders a constituency tree back to bracketed form.
pub fn to_ptb(tree: &SyntaxTree) -> String {
    fn render(tree: &SyntaxTree, id: NodeId, out: &mut String) {
        let node = tree.node(id);
        out.push('(');
        out.push_str(&node.label);
        if node.children.is_empty() {
            out.push(' ');
            out.push_str(&tree.tokens[node.span[0] - 1].surface);
        } else {
            for &c in &node.children {
                out.push(' ');
                render(tree, c, out);
            }
        }
        out.push(')');
    }
    let mut out = String::new();
    render(tree, tree.root, &mut out);
    out
}
