use thiserror::Error;

use super::{Name, RankedAlphabet, Term, Tree};
use crate::types::Type;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: unknown constant `{name}`")]
    UnknownConstant { line: usize, col: usize, name: String },
    #[error("{line}:{col}: {message}")]
    Invalid { line: usize, col: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Backslash,
    Dot,
    Bang,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Eq,
    Lolli,
    Let,
    In,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Backslash => "`\\`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Bang => "`!`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Lolli => "`-o`".into(),
            Tok::Let => "`let`".into(),
            Tok::In => "`in`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '@'
}

fn lex(text: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let single = match c {
            '\\' => Some(Tok::Backslash),
            '.' => Some(Tok::Dot),
            '!' => Some(Tok::Bang),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, l0, c0));
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'o') && !chars.get(i + 2).copied().is_some_and(ident_char) {
            out.push((Tok::Lolli, l0, c0));
            i += 2;
            col += 2;
            continue;
        }
        if ident_char(c) {
            let start = i;
            while i < chars.len() && ident_char(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match word.as_str() {
                "let" => Tok::Let,
                "in" => Tok::In,
                _ => Tok::Ident(word),
            };
            out.push((tok, l0, c0));
            continue;
        }
        return Err(ParseError::Syntax { line: l0, col: c0, message: format!("unexpected character `{c}`") });
    }
    out.push((Tok::Eof, line, col));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    sigma: Option<&'a RankedAlphabet>,
    scope: Vec<Name>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, sigma: Option<&'a RankedAlphabet>) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(text)?, pos: 0, sigma, scope: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> (usize, usize) {
        let (_, l, c) = self.toks[self.pos];
        (l, c)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, message: message.into() })
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {}, found {}", t.describe(), self.peek().describe()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.error(format!("unexpected {}", self.peek().describe()))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Tok::Backslash => {
                self.bump();
                let x: Name = self.ident()?.into();
                self.expect(Tok::Dot)?;
                self.scope.push(x.clone());
                let body = self.term();
                self.scope.pop();
                Ok(Term::lam(x, body?))
            }
            Tok::Let => {
                self.bump();
                self.expect(Tok::Bang)?;
                let x: Name = self.ident()?.into();
                self.expect(Tok::Eq)?;
                let bound = self.term()?;
                self.expect(Tok::In)?;
                self.scope.push(x.clone());
                let body = self.term();
                self.scope.pop();
                Ok(Term::let_bang(x, bound, body?))
            }
            _ => self.app(),
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_) | Tok::Bang | Tok::LParen)
    }

    fn app(&mut self) -> Result<Term, ParseError> {
        if !self.starts_atom() {
            return self.error(format!("expected a term, found {}", self.peek().describe()));
        }
        let mut t = self.atom()?;
        loop {
            if self.starts_atom() {
                let a = self.atom()?;
                t = Term::app(t, a);
            } else if matches!(self.peek(), Tok::Backslash | Tok::Let) {
                // A trailing abstraction extends to the right.
                let a = self.term()?;
                t = Term::app(t, a);
                break;
            } else {
                break;
            }
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Tok::Ident(s) => {
                if self.scope.iter().any(|x| **x == *s) {
                    return Ok(Term::Var(s.into()));
                }
                match self.sigma {
                    Some(sigma) => match sigma.name(&s) {
                        Some(n) => Ok(Term::Const(n.clone())),
                        None => Err(ParseError::UnknownConstant { line, col, name: s }),
                    },
                    None => Ok(Term::Var(s.into())),
                }
            }
            Tok::Bang => Ok(Term::bang(self.atom()?)),
            Tok::LParen => {
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            other => Err(ParseError::Syntax { line, col, message: format!("unexpected {}", other.describe()) }),
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        let a = self.ty_prefix()?;
        if *self.peek() == Tok::Lolli {
            self.bump();
            Ok(Type::arrow(a, self.ty()?))
        } else {
            Ok(a)
        }
    }

    fn ty_prefix(&mut self) -> Result<Type, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Type::bang(self.ty_prefix()?))
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(s) if s == "o" => {
                self.bump();
                Ok(Type::Base)
            }
            other => self.error(format!("expected a type, found {}", other.describe())),
        }
    }

    fn tree(&mut self, sigma: &RankedAlphabet) -> Result<Tree, ParseError> {
        let (line, col) = self.here();
        let label = self.ident()?;
        let mut children = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            children.push(self.tree(sigma)?);
            while *self.peek() == Tok::Comma {
                self.bump();
                children.push(self.tree(sigma)?);
            }
            self.expect(Tok::RParen)?;
        }
        let Some(name) = sigma.name(&label) else {
            return Err(ParseError::UnknownConstant { line, col, name: label });
        };
        let rank = sigma.rank(&label).unwrap_or(0);
        if rank != children.len() {
            return Err(ParseError::Invalid {
                line,
                col,
                message: format!("letter `{label}` has rank {rank} but {} children", children.len()),
            });
        }
        Ok(Tree { label: name.clone(), children })
    }

    fn alphabet(&mut self) -> Result<RankedAlphabet, ParseError> {
        let (line, col) = self.here();
        self.expect(Tok::LBrace)?;
        let mut letters = Vec::new();
        if *self.peek() != Tok::RBrace {
            loop {
                let name = self.ident()?;
                self.expect(Tok::Colon)?;
                let r = self.ident()?;
                let rank: usize = r.parse().or_else(|_| self.error(format!("rank `{r}` is not a number")))?;
                letters.push((name, rank));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace)?;
        RankedAlphabet::new(letters).map_err(|e| ParseError::Invalid { line, col, message: e.to_string() })
    }
}

/// Parses a closed term; identifiers not bound by a λ or let must be letters
/// of `sigma`.
pub fn parse_term(text: &str, sigma: &RankedAlphabet) -> Result<Term, ParseError> {
    parse_open_term(text, sigma, &[])
}

/// Like [`parse_term`], with `free` treated as variables in scope.
pub fn parse_open_term(text: &str, sigma: &RankedAlphabet, free: &[&str]) -> Result<Term, ParseError> {
    let mut p = Parser::new(text, Some(sigma))?;
    p.scope = free.iter().map(|s| Name::from(*s)).collect();
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    let mut p = Parser::new(text, None)?;
    let t = p.ty()?;
    p.finish()?;
    Ok(t)
}

pub fn parse_tree(text: &str, sigma: &RankedAlphabet) -> Result<Tree, ParseError> {
    let mut p = Parser::new(text, None)?;
    let t = p.tree(sigma)?;
    p.finish()?;
    Ok(t)
}

pub fn parse_alphabet(text: &str) -> Result<RankedAlphabet, ParseError> {
    let mut p = Parser::new(text, None)?;
    let a = p.alphabet()?;
    p.finish()?;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat() -> RankedAlphabet {
        RankedAlphabet::new([("S", 1), ("0", 0), ("cons", 2), ("nil", 0)]).unwrap()
    }

    #[test]
    fn parses_out_term() {
        let t = parse_term("\\f. f 0", &nat()).unwrap();
        assert_eq!(t, Term::lam("f", Term::app(Term::var("f"), Term::cst("0"))));
    }

    #[test]
    fn parses_let_bang() {
        let t = parse_open_term("let !y = x in cons y (g !(S y))", &nat(), &["x", "g"]).unwrap();
        match t {
            Term::Let(y, bound, body) => {
                assert_eq!(&*y, "y");
                assert_eq!(*bound, Term::var("x"));
                assert_eq!(body.to_string(), "cons y (g !(S y))");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(parse_term("\\x. \\x.", &nat()), Err(ParseError::Syntax { .. })));
        assert!(matches!(
            parse_term("foo", &nat()),
            Err(ParseError::UnknownConstant { line: 1, col: 1, .. })
        ));
        let err = parse_term("\\x.\n  x )", &nat()).unwrap_err();
        assert_eq!(err, ParseError::Syntax { line: 2, col: 5, message: "unexpected `)`".into() });
    }

    #[test]
    fn application_is_left_associative() {
        let t = parse_open_term("f x y", &nat(), &["f", "x", "y"]).unwrap();
        assert_eq!(t, Term::apps(Term::var("f"), [Term::var("x"), Term::var("y")]));
        let t = parse_open_term("f \\x. x y", &nat(), &["f", "y"]).unwrap();
        assert_eq!(
            t,
            Term::app(Term::var("f"), Term::lam("x", Term::app(Term::var("x"), Term::var("y"))))
        );
    }

    #[test]
    fn parses_types() {
        let t = parse_type("!o -o o -o o").unwrap();
        assert_eq!(t, Type::arrow(Type::bang(Type::Base), Type::arrow(Type::Base, Type::Base)));
        assert!(parse_type("o -o").is_err());
        assert_eq!(parse_type("!(o -o o)").unwrap(), Type::bang(Type::arrow(Type::Base, Type::Base)));
    }

    #[test]
    fn parses_trees_and_alphabets() {
        let sigma = parse_alphabet("{ a:2, b:1, c:0 }").unwrap();
        assert_eq!(sigma.rank("a"), Some(2));
        assert!(parse_tree("a(c)", &sigma).is_err());
        assert!(parse_tree("a(c,d)", &sigma).is_err());
        assert_eq!(parse_tree(" a( b(c) , c )", &sigma).unwrap().to_string(), "a(b(c),c)");
        assert!(parse_alphabet("{ a:x }").is_err());
    }
}
