use std::collections::HashSet;

use super::{SyntaxError, SyntaxTree, Token};

/// Parses a single CoNLL-U sentence block into a dependency tree.
///
/// Comment lines are allowed (a `# text = ...` comment becomes the question
/// text), multiword ranges (`3-4`) and empty nodes (`5.1`) are skipped, and
/// the DEPS/MISC columns are ignored.
pub fn parse_conllu(doc: &str) -> Result<SyntaxTree, SyntaxError> {
    let mut tokens = Vec::new();
    let mut heads = Vec::new();
    let mut seen = HashSet::new();
    let mut text_comment: Option<String> = None;
    let mut ended = false;

    for (lineno, raw) in doc.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            if !tokens.is_empty() {
                ended = true;
            }
            continue;
        }
        if ended {
            return Err(malformed(line, "content after the sentence terminator"));
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(text) = comment.trim_start().strip_prefix("text") {
                if let Some(value) = text.trim_start().strip_prefix('=') {
                    text_comment = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 10 {
            return Err(malformed(line, &format!("expected 10 columns, found {}", cols.len())));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id
            .parse()
            .map_err(|_| malformed(line, &format!("bad token id {id:?}")))?;
        if !seen.insert(id) {
            return Err(malformed(line, &format!("duplicate token id {id}")));
        }
        if id != tokens.len() + 1 {
            return Err(malformed(
                line,
                &format!("token id {id} out of sequence, expected {}", tokens.len() + 1),
            ));
        }
        let form = cols[1];
        if form.is_empty() {
            return Err(malformed(line, "empty FORM"));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| malformed(line, &format!("bad HEAD {:?}", cols[6])))?;
        tokens.push(Token {
            index: id,
            surface: form.to_string(),
            upos: cols[3].to_string(),
            deprel: Some(cols[7].to_string()),
        });
        heads.push(head);
    }

    if tokens.is_empty() {
        return Err(SyntaxError::EmptySentence);
    }
    let n = tokens.len();
    if let Some(pos) = heads.iter().position(|&h| h > n) {
        return Err(malformed(0, &format!("token {} points at missing head {}", pos + 1, heads[pos])));
    }
    let mut tree = SyntaxTree::from_heads(tokens, &heads)?;
    if let Some(text) = text_comment {
        tree.question = text;
    }
    Ok(tree)
}

/// Writes a dependency tree back out as one CoNLL-U block.
pub fn to_conllu(tree: &SyntaxTree) -> String {
    let mut out = format!("# text = {}\n", tree.question);
    for tok in &tree.tokens {
        let node = &tree.nodes[tok.index - 1];
        let head = node.parent.map(|p| p.0 + 1).unwrap_or(0);
        out.push_str(&format!(
            "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_\n",
            tok.index,
            tok.surface,
            tok.upos,
            head,
            tok.deprel.as_deref().unwrap_or("dep"),
        ));
    }
    out.push('\n');
    out
}

fn malformed(line: usize, reason: &str) -> SyntaxError {
    SyntaxError::MalformedConllu {
        line,
        reason: reason.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::NodeId;

    const DOGS: &str = "# text = Dogs chase red cats\n\
1\tDogs\tdog\tNOUN\t_\t_\t2\tnsubj\t_\t_\n\
2\tchase\tchase\tVERB\t_\t_\t0\troot\t_\t_\n\
3\tred\tred\tADJ\t_\t_\t4\tamod\t_\t_\n\
4\tcats\tcat\tNOUN\t_\t_\t2\tobj\t_\t_\n\n";

    #[test]
    fn dogs_chase_red_cats() {
        let tree = parse_conllu(DOGS).unwrap();
        assert_eq!(tree.root, NodeId(1));
        assert_eq!(tree.node(tree.root).span, vec![1, 2, 3, 4]);
        let obj = tree.nodes.iter().find(|n| n.label == "obj").unwrap();
        assert_eq!(obj.span, vec![3, 4]);
        assert_eq!(obj.surface, "red cats");
        assert_eq!(tree.question, "Dogs chase red cats");
    }

    #[test]
    fn single_token() {
        let tree = parse_conllu("1\tHello\thello\tINTJ\t_\t_\t0\troot\t_\t_\n").unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.node(tree.root).span, vec![1]);
    }

    #[test]
    fn two_roots() {
        let doc = "1\tA\t_\tX\t_\t_\t0\troot\t_\t_\n2\tB\t_\tX\t_\t_\t0\troot\t_\t_\n";
        assert_eq!(parse_conllu(doc).unwrap_err(), SyntaxError::MultipleRoots(vec![1, 2]));
    }

    #[test]
    fn cycle_without_root() {
        let doc = "1\tA\t_\tX\t_\t_\t2\tdep\t_\t_\n2\tB\t_\tX\t_\t_\t1\tdep\t_\t_\n";
        assert!(matches!(parse_conllu(doc), Err(SyntaxError::CyclicHeads(_))));
    }

    #[test]
    fn bad_column_count() {
        let doc = "1\tA\t_\tX\t_\t_\t0\troot\n";
        assert!(matches!(
            parse_conllu(doc),
            Err(SyntaxError::MalformedConllu { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_ids() {
        let doc = "1\tA\t_\tX\t_\t_\t0\troot\t_\t_\n1\tB\t_\tX\t_\t_\t1\tdep\t_\t_\n";
        let err = parse_conllu(doc).unwrap_err();
        assert!(matches!(err, SyntaxError::MalformedConllu { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn multiword_ranges_and_empty_nodes_are_skipped() {
        let doc = "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tde\t_\tADP\t_\t_\t2\tcase\t_\t_\n\
2\tel\t_\tDET\t_\t_\t0\troot\t_\t_\n\
2.1\tx\t_\t_\t_\t_\t_\t_\t2:dep\t_\n";
        let tree = parse_conllu(doc).unwrap();
        assert_eq!(tree.tokens.len(), 2);
        assert_eq!(tree.node(tree.root).surface, "de el");
    }

    #[test]
    fn non_projective_span_renders_in_index_order() {
        // 1 <- 3, 2 <- 4, 3 root, 4 <- 1  => node 1 spans {1, 2, 4}
        let doc = "1\ta\t_\tX\t_\t_\t3\tdep\t_\t_\n\
2\tb\t_\tX\t_\t_\t4\tdep\t_\t_\n\
3\tc\t_\tX\t_\t_\t0\troot\t_\t_\n\
4\td\t_\tX\t_\t_\t1\tdep\t_\t_\n";
        let tree = parse_conllu(doc).unwrap();
        assert_eq!(tree.node(NodeId(0)).span, vec![1, 2, 4]);
        assert_eq!(tree.node(NodeId(0)).surface, "a b d");
    }

    #[test]
    fn roundtrip_through_writer() {
        let tree = parse_conllu(DOGS).unwrap();
        let again = parse_conllu(&to_conllu(&tree)).unwrap();
        assert_eq!(tree.nodes, again.nodes);
    }
}
