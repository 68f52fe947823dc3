//! S-expression reader with source positions. Line comments start with `;`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Atom(..) => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SExprError {
    #[error("{pos}: unexpected `)`")]
    UnexpectedClose { pos: Pos },
    #[error("{pos}: unclosed `(`")]
    UnclosedParen { pos: Pos },
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

#[derive(Debug)]
enum Token {
    Open(Pos),
    Close(Pos),
    Atom(String, Pos),
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn next_token(&mut self) -> Option<Token> {
        loop {
            let &c = self.chars.peek()?;
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
        let pos = Pos {
            line: self.line,
            col: self.col,
        };
        let c = *self.chars.peek()?;
        if c == '(' {
            self.bump();
            return Some(Token::Open(pos));
        }
        if c == ')' {
            self.bump();
            return Some(Token::Close(pos));
        }
        let mut atom = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                break;
            }
            atom.push(c);
            self.bump();
        }
        Some(Token::Atom(atom, pos))
    }
}

/// Read every top-level form in `text`.
pub fn read_all(text: &str) -> Result<Vec<SExpr>, SExprError> {
    let mut lexer = Lexer::new(text);
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    while let Some(tok) = lexer.next_token() {
        match tok {
            Token::Open(pos) => stack.push((Vec::new(), pos)),
            Token::Close(pos) => {
                let (items, open_pos) = stack
                    .pop()
                    .ok_or(SExprError::UnexpectedClose { pos })?;
                let list = SExpr::List(items, open_pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Atom(s, pos) => {
                let atom = SExpr::Atom(s, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(atom),
                    None => top.push(atom),
                }
            }
        }
    }
    if let Some((_, pos)) = stack.pop() {
        return Err(SExprError::UnclosedParen { pos });
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_forms_with_positions() {
        let forms = read_all("(a (b c))\n; comment\n(d)").unwrap();
        assert_eq!(forms.len(), 2);
        assert_eq!(forms[1].pos(), Pos { line: 3, col: 1 });
        match &forms[0] {
            SExpr::List(items, _) => {
                assert_eq!(items[0].as_atom(), Some("a"));
                assert!(items[1].as_list().is_some());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn unbalanced_parens_error() {
        assert!(matches!(
            read_all("(a b"),
            Err(SExprError::UnclosedParen { .. })
        ));
        assert!(matches!(
            read_all("a) b"),
            Err(SExprError::UnexpectedClose { .. })
        ));
    }
}
