use super::{Alphabet, Formula, FormulaError};

const KEYWORDS: [&str; 6] = ["true", "false", "X", "F", "G", "U"];

pub(super) fn is_reserved(name: &str) -> bool {
    KEYWORDS.contains(&name)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    True,
    False,
    Next,
    Eventually,
    Always,
    Until,
    And,
    Or,
    Not,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, FormulaError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            _ if c.is_whitespace() => i += 1,
            '&' | '|' | '!' | '(' | ')' => {
                let tok = match c {
                    '&' => Tok::And,
                    '|' => Tok::Or,
                    '!' => Tok::Not,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                toks.push((tok, i));
                i += 1;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "X" => Tok::Next,
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    "U" => Tok::Until,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push((tok, start));
            }
            _ => {
                return Err(FormulaError::Syntax {
                    position: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    alphabet: &'a Alphabet,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn error(&self, message: impl Into<String>) -> FormulaError {
        FormulaError::Syntax {
            position: self.offset(),
            message: message.into(),
        }
    }

    fn unexpected(&self) -> FormulaError {
        match self.peek() {
            None => self.error("unexpected end of input"),
            Some(t) => self.error(format!("unexpected token {t:?}")),
        }
    }

    fn or(&mut self) -> Result<Formula, FormulaError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, FormulaError> {
        let mut lhs = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, FormulaError> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::Until) {
            self.pos += 1;
            return Ok(Formula::until(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        let wrap: fn(Formula) -> Formula = match self.peek() {
            Some(Tok::Not) => Formula::not,
            Some(Tok::Next) => Formula::next,
            Some(Tok::Eventually) => Formula::eventually,
            Some(Tok::Always) => Formula::always,
            _ => return self.atom(),
        };
        self.pos += 1;
        Ok(wrap(self.unary()?))
    }

    fn atom(&mut self) -> Result<Formula, FormulaError> {
        let offset = self.offset();
        let tok = self.peek().cloned().ok_or_else(|| self.unexpected())?;
        self.pos += 1;
        match tok {
            Tok::True => Ok(Formula::True),
            Tok::False => Ok(Formula::ff()),
            Tok::Ident(name) => match self.alphabet.index_of(&name) {
                Some(i) => Ok(Formula::Ap(i)),
                None => Err(FormulaError::UnknownProposition {
                    name,
                    position: offset,
                }),
            },
            Tok::LParen => {
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(match self.peek() {
                        None => self.error("unexpected end of input, expected `)`"),
                        Some(_) => self.error("expected `)`"),
                    });
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => {
                self.pos -= 1;
                Err(self.unexpected())
            }
        }
    }
}

/// Parses the concrete syntax: `true`, `false`, proposition names, `!`, `X`,
/// `F`, `G` (prefix), `U` (right associative), `&`, `|` and parentheses.
/// Precedence from tightest: unary operators, `U`, `&`, `|`.
pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Formula, FormulaError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(FormulaError::Syntax {
            position: 0,
            message: "empty formula".into(),
        });
    }
    let mut parser = Parser {
        toks,
        pos: 0,
        end: text.len(),
        alphabet,
    };
    let f = parser.or()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.unexpected());
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Alphabet {
        Alphabet::indexed(4)
    }

    #[test]
    fn parses_example_specification() {
        let a = abc();
        let f = parse("(p0 & (G !p1 | G !p2)) | (p2 & G !p1)", &a).unwrap();
        let expected = Formula::or(
            Formula::and(
                Formula::ap(0),
                Formula::or(
                    Formula::always(Formula::not(Formula::ap(1))),
                    Formula::always(Formula::not(Formula::ap(2))),
                ),
            ),
            Formula::and(
                Formula::ap(2),
                Formula::always(Formula::not(Formula::ap(1))),
            ),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn parses_true() {
        assert_eq!(parse("true", &abc()).unwrap(), Formula::True);
        assert_eq!(parse(" false ", &abc()).unwrap(), Formula::ff());
    }

    #[test]
    fn dangling_operator_reports_end_of_input() {
        match parse("p0 &", &abc()) {
            Err(FormulaError::Syntax { position, message }) => {
                assert_eq!(position, 4);
                assert!(message.contains("end of input"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_proposition_reported() {
        assert_eq!(
            parse("p0 | q", &abc()),
            Err(FormulaError::UnknownProposition {
                name: "q".into(),
                position: 5
            })
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let a = abc();
        assert_eq!(
            parse("p0 | p1 & p2", &a).unwrap(),
            Formula::or(Formula::ap(0), Formula::and(Formula::ap(1), Formula::ap(2)))
        );
        assert_eq!(
            parse("p0 U p1 U p2", &a).unwrap(),
            Formula::until(
                Formula::ap(0),
                Formula::until(Formula::ap(1), Formula::ap(2))
            )
        );
        assert_eq!(
            parse("!p0 U p1 & p2", &a).unwrap(),
            Formula::and(
                Formula::until(Formula::not(Formula::ap(0)), Formula::ap(1)),
                Formula::ap(2)
            )
        );
        assert_eq!(
            parse("X F G p3", &a).unwrap(),
            Formula::next(Formula::eventually(Formula::always(Formula::ap(3))))
        );
    }

    #[test]
    fn rejects_garbage() {
        let a = abc();
        assert!(parse("", &a).is_err());
        assert!(parse("(p0", &a).is_err());
        assert!(parse("p0 p1", &a).is_err());
        assert!(parse("p0 $ p1", &a).is_err());
        assert!(parse(")", &a).is_err());
    }
}
