//! Recursive-descent parser.
//!
//! ```text
//! or     := and ('|' and)*
//! and    := until ('&' until)*
//! until  := unary ('U' until)?
//! unary  := ('!' | 'X' | 'F' | 'G') unary | '(' or ')' | atom | true | false
//! ```
//!
//! An identifier made only of `X`, `F` and `G` that is not a declared atom is
//! read as a chain of unary operators, so `GF a` means `G F a`.

use std::collections::BTreeSet;

use super::{Formula, LtlError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    atoms: &'a BTreeSet<String>,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LtlError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '!' => Tok::Not,
            '&' => Tok::And,
            '|' => Tok::Or,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(bytes[start..i].iter().collect()), start));
                continue;
            }
            other => {
                return Err(LtlError::Syntax { position: i, message: format!("unexpected character `{other}`") })
            }
        };
        out.push((tok, i));
        i += 1;
    }
    Ok(out)
}

fn is_operator_chain(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| matches!(c, 'X' | 'F' | 'G'))
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn syntax(&self, message: impl Into<String>) -> LtlError {
        LtlError::Syntax { position: self.here(), message: message.into() }
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut f = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut f = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            f = Formula::and(f, self.until()?);
        }
        Ok(f)
    }

    fn until(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.unary()?;
        if matches!(self.peek(), Some(Tok::Ident(w)) if w == "U" && !self.atoms.contains("U")) {
            self.pos += 1;
            return Ok(Formula::until(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        let Some((tok, start)) = self.toks.get(self.pos).cloned() else {
            return Err(self.syntax("unexpected end of formula"));
        };
        self.pos += 1;
        match tok {
            Tok::Not => Ok(Formula::not(self.unary()?)),
            Tok::LParen => {
                let f = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(f)
            }
            Tok::Ident(word) => {
                if self.atoms.contains(&word) {
                    return Ok(Formula::Atom(word));
                }
                match word.as_str() {
                    "true" => return Ok(Formula::True),
                    "false" => return Ok(Formula::False),
                    _ => {}
                }
                if is_operator_chain(&word) {
                    let mut f = self.unary()?;
                    for c in word.chars().rev() {
                        f = match c {
                            'X' => Formula::next(f),
                            'F' => Formula::eventually(f),
                            _ => Formula::always(f),
                        };
                    }
                    return Ok(f);
                }
                if word == "U" {
                    return Err(LtlError::Syntax { position: start, message: "`U` needs a left operand".into() });
                }
                Err(LtlError::UnknownAtom { name: word, position: start })
            }
            Tok::And | Tok::Or | Tok::RParen => Err(LtlError::Syntax {
                position: start,
                message: "expected an operand".into(),
            }),
        }
    }
}

/// Parses `text`, accepting only atoms from `atoms`.
pub fn parse_formula(text: &str, atoms: &BTreeSet<String>) -> Result<Formula, LtlError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.chars().count(), atoms };
    let f = p.or()?;
    if p.pos != p.toks.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(f)
}
