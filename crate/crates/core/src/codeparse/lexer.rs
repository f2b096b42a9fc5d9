//! C-family lexer (Java, C, C++, C#, JavaScript-style syntax).
//!
//! Comments and whitespace are dropped. Operators are matched longest-first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    String,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 0-based position in the token sequence.
    pub index: usize,
    /// 1-based source line.
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<Token>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|t| t.text.as_str())
    }

    /// Builds a sequence of identifier tokens from bare strings. Handy for tests and
    /// synthetic corpora.
    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TokenSequence(
            texts
                .into_iter()
                .enumerate()
                .map(|(index, s)| Token {
                    kind: TokenKind::Identifier,
                    text: s.into(),
                    index,
                    line: 1,
                })
                .collect(),
        )
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "auto", "bool", "boolean", "break", "byte", "case", "catch", "char",
    "class", "const", "continue", "default", "delete", "do", "double", "else", "enum", "extends",
    "extern", "false", "final", "finally", "float", "for", "goto", "if", "implements", "import",
    "inline", "instanceof", "int", "interface", "long", "namespace", "native", "new", "null",
    "nullptr", "package", "private", "protected", "public", "register", "return", "short",
    "signed", "sizeof", "static", "strictfp", "struct", "super", "switch", "synchronized",
    "template", "this", "throw", "throws", "transient", "true", "try", "typedef", "union",
    "unsigned", "using", "var", "virtual", "void", "volatile", "while",
];

// Sorted longest first so the first hit is the longest match.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->*", "<=>", "==", "!=", "<=", ">=", "&&", "||", "++",
    "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "->", "::", "=", "+", "-",
    "*", "/", "%", "<", ">", "!", "~", "&", "|", "^", "?", ":",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', '.', '@', '#', '\\'];

pub fn is_keyword(text: &str) -> bool {
    KEYWORDS.contains(&text)
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphanumeric()
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }
}

pub fn lex(source: &str) -> Result<TokenSequence> {
    let mut cur = Cursor {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        _src: source,
    };
    let mut out: Vec<Token> = Vec::new();

    while let Some(c) = cur.peek(0) {
        let line = cur.line;
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.starts_with("//") {
            while let Some(c) = cur.peek(0) {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.starts_with("/*") {
            cur.bump();
            cur.bump();
            loop {
                if cur.starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(Error::Lex {
                        line,
                        reason: "unterminated block comment".into(),
                    });
                }
            }
            continue;
        }

        let start = cur.pos;
        let kind = if is_ident_start(c) {
            while cur.peek(0).is_some_and(is_ident_continue) {
                cur.bump();
            }
            let text: String = cur.chars[start..cur.pos].iter().collect();
            if is_keyword(&text) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else if c.is_ascii_digit() || (c == '.' && cur.peek(1).is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&mut cur);
            TokenKind::Number
        } else if c == '"' || c == '\'' {
            lex_quoted(&mut cur, c, line)?;
            TokenKind::String
        } else if let Some(op) = OPERATORS.iter().find(|op| cur.starts_with(op)) {
            for _ in 0..op.chars().count() {
                cur.bump();
            }
            TokenKind::Operator
        } else if PUNCTUATION.contains(&c) {
            cur.bump();
            TokenKind::Punctuation
        } else {
            return Err(Error::Lex {
                line,
                reason: format!("unexpected character {c:?}"),
            });
        };

        let index = out.len();
        out.push(Token {
            kind,
            text: cur.chars[start..cur.pos].iter().collect(),
            index,
            line,
        });
    }
    Ok(TokenSequence(out))
}

fn lex_number(cur: &mut Cursor<'_>) {
    if cur.starts_with("0x") || cur.starts_with("0X") || cur.starts_with("0b") || cur.starts_with("0B")
    {
        cur.bump();
        cur.bump();
        while cur
            .peek(0)
            .is_some_and(|c| c.is_ascii_hexdigit() || c == '_')
        {
            cur.bump();
        }
    } else {
        let mut seen_dot = false;
        while let Some(c) = cur.peek(0) {
            if c.is_ascii_digit() || c == '_' {
                cur.bump();
            } else if c == '.' && !seen_dot && !cur.starts_with("...") {
                seen_dot = true;
                cur.bump();
            } else if (c == 'e' || c == 'E')
                && (cur.peek(1).is_some_and(|d| d.is_ascii_digit())
                    || (matches!(cur.peek(1), Some('+' | '-'))
                        && cur.peek(2).is_some_and(|d| d.is_ascii_digit())))
            {
                cur.bump();
                cur.bump();
            } else {
                break;
            }
        }
    }
    // type suffixes: 10L, 1.5f, 3u, 7ull
    while cur
        .peek(0)
        .is_some_and(|c| matches!(c, 'l' | 'L' | 'f' | 'F' | 'd' | 'D' | 'u' | 'U'))
    {
        cur.bump();
    }
}

fn lex_quoted(cur: &mut Cursor<'_>, quote: char, line: usize) -> Result<()> {
    cur.bump();
    loop {
        match cur.bump() {
            None | Some('\n') => {
                let what = if quote == '"' { "string" } else { "character" };
                return Err(Error::Lex {
                    line,
                    reason: format!("unterminated {what} literal"),
                });
            }
            Some('\\') => {
                if cur.bump().is_none() {
                    return Err(Error::Lex {
                        line,
                        reason: "unterminated escape sequence".into(),
                    });
                }
            }
            Some(c) if c == quote => return Ok(()),
            Some(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        lex(src).unwrap().texts().map(str::to_owned).collect()
    }

    #[test]
    fn simple_declaration() {
        let toks = lex("int x = 1;").unwrap();
        assert_eq!(texts("int x = 1;"), ["int", "x", "=", "1", ";"]);
        let kinds: Vec<_> = toks.tokens().iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            [
                TokenKind::Keyword,
                TokenKind::Identifier,
                TokenKind::Operator,
                TokenKind::Number,
                TokenKind::Punctuation
            ]
        );
    }

    #[test]
    fn comments_are_stripped() {
        assert_eq!(texts("a /*c*/ b // d\n"), ["a", "b"]);
    }

    #[test]
    fn longest_match_operators() {
        assert_eq!(texts("a >>>= b >> c == d"), ["a", ">>>=", "b", ">>", "c", "==", "d"]);
        assert_eq!(texts("i++ + ++j"), ["i", "++", "+", "++", "j"]);
    }

    #[test]
    fn numbers() {
        assert_eq!(
            texts("1.5f .5 1e10 0x1F 100L 2.0e-3 1_000"),
            ["1.5f", ".5", "1e10", "0x1F", "100L", "2.0e-3", "1_000"]
        );
    }

    #[test]
    fn strings_honor_escapes() {
        assert_eq!(texts(r#"s = "a \" b"; c = '\'';"#), ["s", "=", r#""a \" b""#, ";", "c", "=", r"'\''", ";"]);
    }

    #[test]
    fn unterminated_string_reports_line() {
        match lex("int a;\nString s = \"oops;\n") {
            Err(Error::Lex { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn unterminated_block_comment_reports_line() {
        match lex("a\n\n/* never closed") {
            Err(Error::Lex { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn indices_are_dense() {
        let toks = lex("for (int i = 0; i < n; i++) { s += i; }").unwrap();
        for (i, t) in toks.tokens().iter().enumerate() {
            assert_eq!(t.index, i);
            assert!(!t.text.is_empty());
        }
    }
}
