use super::expr::{AttrScope, BinaryOp, Expr, Function, UnaryOp, Value};
use super::JdlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Real(f64),
    True,
    False,
    Undefined,
    Assign,
    Semi,
    Comma,
    Dot,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Not,
    Minus,
    Plus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub col: usize,
}

fn syntax(pos: Pos, message: impl Into<String>) -> JdlError {
    JdlError::Syntax { line: pos.line, column: pos.col, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, JdlError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(syntax(pos, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.to_ascii_lowercase().as_str() {
                "true" => Tok::True,
                "false" => Tok::False,
                "undefined" => Tok::Undefined,
                _ => Tok::Ident(word),
            };
            toks.push((tok, pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                real = true;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if real {
                match text.parse::<f64>() {
                    Ok(r) if r.is_finite() => Tok::Real(r),
                    _ => return Err(syntax(pos, format!("number out of range: {text}"))),
                }
            } else {
                Tok::Int(text.parse().map_err(|_| syntax(pos, format!("integer out of range: {text}")))?)
            };
            toks.push((tok, pos));
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(syntax(pos, "unterminated string")),
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some('\\') => {
                        let esc_pos = Pos { line, col };
                        bump!();
                        let e = *chars.get(i).ok_or_else(|| syntax(pos, "unterminated string"))?;
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            '"' => '"',
                            '\\' => '\\',
                            _ => return Err(syntax(esc_pos, format!("unknown escape \\{e}"))),
                        });
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            toks.push((Tok::Str(s), pos));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let tok2 = match two.as_str() {
            "<=" => Some(Tok::Le),
            ">=" => Some(Tok::Ge),
            "==" => Some(Tok::EqEq),
            "!=" => Some(Tok::Ne),
            "&&" => Some(Tok::AndAnd),
            "||" => Some(Tok::OrOr),
            _ => None,
        };
        if let Some(t) = tok2 {
            bump!();
            bump!();
            toks.push((t, pos));
            continue;
        }
        let tok = match c {
            '=' => Tok::Assign,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '!' => Tok::Not,
            '-' => Tok::Minus,
            '+' => Tok::Plus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            other => return Err(syntax(pos, format!("unexpected character {other:?}"))),
        };
        bump!();
        toks.push((tok, pos));
    }
    toks.push((Tok::Eof, Pos { line, col }));
    Ok(toks)
}

const MAX_DEPTH: usize = 200;

pub(crate) struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    depth: usize,
}

type Attribute = (String, Expr, Pos);

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Self, JdlError> {
        Ok(Self { toks: lex(src)?, at: 0, depth: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    pub(crate) fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), JdlError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected {what}")))
        }
    }

    /// `Name = expr;` pairs, optionally wrapped in `[ ... ]`.
    pub(crate) fn attributes(&mut self) -> Result<(Vec<Attribute>, Pos), JdlError> {
        let bracketed = self.eat(&Tok::LBracket);
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof if !bracketed => break,
                Tok::RBracket if bracketed => {
                    self.next();
                    if *self.peek() != Tok::Eof {
                        return Err(syntax(self.pos(), "unexpected input after closing ']'"));
                    }
                    break;
                }
                Tok::Ident(_) => {
                    let pos = self.pos();
                    let Tok::Ident(name) = self.next() else { unreachable!() };
                    self.expect(Tok::Assign, "'=' after attribute name")?;
                    let value = self.expr()?;
                    out.push((name, value, pos));
                    if !self.eat(&Tok::Semi) {
                        let end_ok = matches!(self.peek(), Tok::Eof if !bracketed) || matches!(self.peek(), Tok::RBracket if bracketed);
                        if !end_ok {
                            return Err(syntax(self.pos(), "expected ';' after attribute value"));
                        }
                    }
                }
                _ => return Err(syntax(self.pos(), "expected attribute name")),
            }
        }
        Ok((out, self.pos()))
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, JdlError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(syntax(self.pos(), "expression nested too deeply"));
        }
        let e = self.binary(1);
        self.depth -= 1;
        e
    }

    pub(crate) fn at_end(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::EqEq => BinaryOp::Eq,
            Tok::Ne => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            Tok::Plus => BinaryOp::Add,
            Tok::Minus => BinaryOp::Sub,
            Tok::Star => BinaryOp::Mul,
            Tok::Slash => BinaryOp::Div,
            _ => return None,
        })
    }

    // precedence climbing, all binary levels left-associative
    fn binary(&mut self, min_prec: u8) -> Result<Expr, JdlError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.next();
            let rhs = self.binary(p + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, JdlError> {
        let op = match self.peek() {
            Tok::Not => UnaryOp::Not,
            Tok::Minus => UnaryOp::Neg,
            _ => return self.primary(),
        };
        self.next();
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(syntax(self.pos(), "expression nested too deeply"));
        }
        let inner = self.unary();
        self.depth -= 1;
        Ok(Expr::Unary(op, Box::new(inner?)))
    }

    fn primary(&mut self) -> Result<Expr, JdlError> {
        let pos = self.pos();
        match self.next() {
            Tok::Int(i) => Ok(Expr::Literal(Value::Int(i))),
            Tok::Real(r) => Ok(Expr::Literal(Value::Real(r))),
            Tok::Str(s) => Ok(Expr::Literal(Value::Str(s))),
            Tok::True => Ok(Expr::Literal(Value::Bool(true))),
            Tok::False => Ok(Expr::Literal(Value::Bool(false))),
            Tok::Undefined => Ok(Expr::Literal(Value::Undefined)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::LBrace => {
                let mut items = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        items.push(self.expr()?);
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(Tok::Comma, "',' or '}' in list")?;
                    }
                }
                Ok(Expr::List(items))
            }
            Tok::Ident(name) => {
                let lower = name.to_ascii_lowercase();
                if (lower == "other" || lower == "self") && self.eat(&Tok::Dot) {
                    let scope = if lower == "other" { AttrScope::Other } else { AttrScope::Own };
                    let attr_pos = self.pos();
                    let attr = match self.next() {
                        Tok::Ident(a) => a,
                        Tok::True => "true".into(),
                        Tok::False => "false".into(),
                        Tok::Undefined => "undefined".into(),
                        _ => return Err(syntax(attr_pos, "expected attribute name after '.'")),
                    };
                    return Ok(Expr::AttrRef(scope, attr));
                }
                if *self.peek() == Tok::LParen {
                    if lower != "member" {
                        return Err(syntax(pos, format!("unknown function {name}")));
                    }
                    self.next();
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma, "',' or ')' in argument list")?;
                        }
                    }
                    if args.len() != 2 {
                        return Err(syntax(pos, "Member takes exactly two arguments"));
                    }
                    return Ok(Expr::Call(Function::Member, args));
                }
                Ok(Expr::AttrRef(AttrScope::Own, name))
            }
            Tok::Eof => Err(syntax(pos, "unexpected end of input")),
            other => Err(syntax(pos, format!("unexpected token {other:?}"))),
        }
    }
}
