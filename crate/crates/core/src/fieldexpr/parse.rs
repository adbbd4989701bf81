//! Recursive-descent parser.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `x^-2` is `x^(-2)`. The Unicode minus sign is accepted
//! as `-`.

use std::sync::Arc;

use super::{FieldExpr, Func, Node, RESERVED};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    chars: Vec<(usize, char)>,
    i: usize,
    src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.char_indices().collect(),
            i: 0,
            src,
        }
    }

    fn pos(&self) -> usize {
        self.chars.get(self.i).map(|c| c.0).unwrap_or(self.src.len())
    }

    fn peek_char(&self) -> Option<char> {
        self.chars.get(self.i).map(|c| c.1)
    }

    fn next(&mut self) -> Result<(usize, Tok)> {
        while matches!(self.peek_char(), Some(c) if c.is_whitespace()) {
            self.i += 1;
        }
        let start = self.pos();
        let Some(c) = self.peek_char() else {
            return Ok((start, Tok::End));
        };
        let tok = match c {
            '+' => Tok::Plus,
            '-' | '\u{2212}' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_digit() || c == '.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(c) = self.peek_char() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        self.i += 1;
                    } else {
                        break;
                    }
                }
                return Ok((start, Tok::Ident(s)));
            }
            other => {
                return Err(Error::Syntax {
                    position: start,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        self.i += 1;
        Ok((start, tok))
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok)> {
        let mut s = String::new();
        let mut digits = 0;
        while let Some(c) = self.peek_char() {
            if c.is_ascii_digit() {
                digits += 1;
            } else if c != '.' {
                break;
            }
            s.push(c);
            self.i += 1;
        }
        if digits == 0 {
            return Err(Error::Syntax {
                position: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.peek_char(), Some('e' | 'E')) {
            let save = self.i;
            let mut exp = String::from("e");
            self.i += 1;
            if let Some(c @ ('+' | '-')) = self.peek_char() {
                exp.push(c);
                self.i += 1;
            }
            let mut exp_digits = 0;
            while let Some(c) = self.peek_char().filter(char::is_ascii_digit) {
                exp.push(c);
                exp_digits += 1;
                self.i += 1;
            }
            if exp_digits == 0 {
                self.i = save;
            } else {
                s.push_str(&exp);
            }
        }
        s.parse::<f64>().map(|v| (start, Tok::Num(v))).map_err(|_| Error::Syntax {
            position: start,
            message: format!("malformed number '{s}'"),
        })
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    pos: usize,
    depth: usize,
}

const MAX_HEIGHT: usize = 512;

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        let mut lex = Lexer::new(src);
        let (pos, tok) = lex.next()?;
        Ok(Self { lex, tok, pos, depth: 0 })
    }

    fn bump(&mut self) -> Result<()> {
        let (pos, tok) = self.lex.next()?;
        self.pos = pos;
        self.tok = tok;
        Ok(())
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.pos,
            message: message.into(),
        })
    }

    fn check_height(&self, h: usize) -> Result<usize> {
        if h > MAX_HEIGHT {
            return self.err("expression nested too deeply");
        }
        Ok(h)
    }

    // Each production returns the expression and its tree height; the height
    // cap keeps every later recursive walk (printing, differentiation, drop)
    // within stack limits.
    fn expr(&mut self) -> Result<(FieldExpr, usize)> {
        let (mut lhs, mut h) = self.term()?;
        loop {
            let node = match self.tok {
                Tok::Plus => Node::Add as fn(_, _) -> _,
                Tok::Minus => Node::Sub,
                _ => break,
            };
            self.bump()?;
            let (rhs, hr) = self.term()?;
            h = self.check_height(h.max(hr) + 1)?;
            lhs = FieldExpr::from_node(node(lhs, rhs));
        }
        Ok((lhs, h))
    }

    fn term(&mut self) -> Result<(FieldExpr, usize)> {
        let (mut lhs, mut h) = self.unary()?;
        loop {
            let node = match self.tok {
                Tok::Star => Node::Mul as fn(_, _) -> _,
                Tok::Slash => Node::Div,
                _ => break,
            };
            self.bump()?;
            let (rhs, hr) = self.unary()?;
            h = self.check_height(h.max(hr) + 1)?;
            lhs = FieldExpr::from_node(node(lhs, rhs));
        }
        Ok((lhs, h))
    }

    fn unary(&mut self) -> Result<(FieldExpr, usize)> {
        if self.tok == Tok::Minus {
            self.depth += 1;
            self.check_height(self.depth)?;
            self.bump()?;
            let (inner, h) = self.unary()?;
            self.depth -= 1;
            return Ok((FieldExpr::from_node(Node::Neg(inner)), self.check_height(h + 1)?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<(FieldExpr, usize)> {
        let (base, hb) = self.atom()?;
        if self.tok == Tok::Caret {
            self.depth += 1;
            self.check_height(self.depth)?;
            self.bump()?;
            let (exp, he) = self.unary()?;
            self.depth -= 1;
            return Ok((FieldExpr::from_node(Node::Pow(base, exp)), self.check_height(hb.max(he) + 1)?));
        }
        Ok((base, hb))
    }

    fn atom(&mut self) -> Result<(FieldExpr, usize)> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok((FieldExpr::num(v), 1))
            }
            Tok::LParen => {
                self.depth += 1;
                self.check_height(self.depth)?;
                self.bump()?;
                let (e, h) = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.err("expected ')'");
                }
                self.bump()?;
                self.depth -= 1;
                Ok((e, h))
            }
            Tok::Ident(name) => {
                let at = self.pos;
                self.bump()?;
                if self.tok == Tok::LParen {
                    self.depth += 1;
                    self.check_height(self.depth)?;
                    self.bump()?;
                    let (arg, h) = self.expr()?;
                    if self.tok != Tok::RParen {
                        return self.err("expected ')' after function argument");
                    }
                    self.bump()?;
                    self.depth -= 1;
                    let node = match name.as_str() {
                        "delta" => Node::Delta(0, arg),
                        "delta1" => Node::Delta(1, arg),
                        "delta2" => Node::Delta(2, arg),
                        "heaviside" => Node::Heaviside(arg),
                        "pos" => Node::Pos(arg),
                        other => match Func::from_name(other) {
                            Some(f) => Node::Call(f, arg),
                            None => {
                                return Err(Error::Syntax {
                                    position: at,
                                    message: format!("unknown function '{other}'"),
                                })
                            }
                        },
                    };
                    Ok((FieldExpr::from_node(node), self.check_height(h + 1)?))
                } else if name == "eps" {
                    Ok((FieldExpr::eps(), 1))
                } else if RESERVED.contains(&name.as_str()) {
                    Err(Error::Syntax {
                        position: at,
                        message: format!("'{name}' is a function and needs an argument"),
                    })
                } else {
                    Ok((FieldExpr::from_node(Node::Var(Arc::from(name.as_str()))), 1))
                }
            }
            Tok::End => self.err("unexpected end of input"),
            other => self.err(format!("unexpected token {other:?}")),
        }
    }
}

/// Parse field-expression text. Nested singular composition is rejected.
pub fn parse(text: &str) -> Result<FieldExpr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser::new(text)?;
    let (e, _) = p.expr()?;
    if p.tok != Tok::End {
        return p.err(format!("unexpected trailing {:?}", p.tok));
    }
    e.validate()?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(e: &FieldExpr) -> String {
        use Node::*;
        match e.node() {
            Num(v) => format!("{v}"),
            Var(v) => v.to_string(),
            Eps => "eps".into(),
            Neg(a) => format!("Neg({})", shape(a)),
            Add(a, b) => format!("Add({},{})", shape(a), shape(b)),
            Sub(a, b) => format!("Sub({},{})", shape(a), shape(b)),
            Mul(a, b) => format!("Mul({},{})", shape(a), shape(b)),
            Div(a, b) => format!("Div({},{})", shape(a), shape(b)),
            Pow(a, b) => format!("Pow({},{})", shape(a), shape(b)),
            Call(f, a) => format!("{}({})", f.name(), shape(a)),
            Delta(k, a) => format!("Delta{k}({})", shape(a)),
            Heaviside(a) => format!("H({})", shape(a)),
            Pos(a) => format!("Pos({})", shape(a)),
        }
    }

    #[test]
    fn precedence_examples() {
        assert_eq!(shape(&parse("x^2 - y^2").unwrap()), "Sub(Pow(x,2),Pow(y,2))");
        assert_eq!(shape(&parse("f0*delta(u)").unwrap()), "Mul(f0,Delta0(u))");
        assert_eq!(shape(&parse("-x^2").unwrap()), "Neg(Pow(x,2))");
        assert_eq!(shape(&parse("x^-2").unwrap()), "Pow(x,Neg(2))");
        assert_eq!(shape(&parse("a^b^c").unwrap()), "Pow(a,Pow(b,c))");
        assert_eq!(shape(&parse("a - b - c").unwrap()), "Sub(Sub(a,b),c)");
        assert_eq!(shape(&parse("a / b * c").unwrap()), "Mul(Div(a,b),c)");
        assert_eq!(shape(&parse("2 * -x").unwrap()), "Mul(2,Neg(x))");
        assert_eq!(shape(&parse("x \u{2212} 1").unwrap()), "Sub(x,1)");
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1.5e-3").unwrap().as_num(), Some(1.5e-3));
        assert_eq!(parse(".25").unwrap().as_num(), Some(0.25));
        // "2e" lexes as 2 followed by the identifier e
        assert!(parse("2e").is_err());
        assert!(parse("1..2").is_err());
    }

    #[test]
    fn nested_delta_is_rejected() {
        assert!(matches!(parse("delta(delta(u))"), Err(Error::Validation(_))));
        assert!(matches!(parse("delta1(pos(u))"), Err(Error::Validation(_))));
        assert!(parse("delta(u)*delta(x)").is_ok());
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("x + * y") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        match parse("foo(x)") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 0),
            other => panic!("{other:?}"),
        }
        assert!(parse("").is_err());
        assert!(parse("(x").is_err());
        assert!(parse("x)").is_err());
        assert!(parse("sin").is_err());
        assert!(parse("x $ y").is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let text = "(".repeat(10_000) + "x" + &")".repeat(10_000);
        assert!(parse(&text).is_err());
        let text = "-".repeat(10_000) + "x";
        assert!(parse(&text).is_err());
        let text = vec!["x"; 10_000].join("+");
        assert!(parse(&text).is_err());
        let text = vec!["x"; 400].join("+");
        assert!(parse(&text).is_ok());
    }
}
