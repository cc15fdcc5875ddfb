use super::{Expression, Func, VARIABLES};
use crate::error::{FinslerError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    column: usize,
}

fn tokenize(text: &str, line: usize, col0: usize) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let token = match c {
            '+' | '-' | '*' | '/' | '^' => Token::Op(c),
            '(' => Token::LParen,
            ')' => Token::RParen,
            '[' => Token::LBracket,
            ']' => Token::RBracket,
            ',' => Token::Comma,
            d if d.is_ascii_digit() || d == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| FinslerError::Parse {
                    line,
                    column,
                    message: format!("malformed number '{s}'"),
                })?;
                out.push(Spanned { token: Token::Num(v), column });
                continue;
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                out.push(Spanned { token: Token::Ident(s), column });
                continue;
            }
            other => {
                return Err(FinslerError::Parse {
                    line,
                    column,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        out.push(Spanned { token, column });
        i += 1;
    }
    out.push(Spanned { token: Token::End, column: col0 + chars.len() });
    Ok(out)
}

/// Nested bracket lists of expressions, as used for metric matrices and winds.
#[derive(Debug, Clone, PartialEq)]
pub enum ListValue {
    Scalar(Expression),
    List(Vec<ListValue>),
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    line: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn column(&self) -> usize {
        self.tokens[self.pos].column
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].token.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(FinslerError::Parse { line: self.line, column: self.column(), message: message.into() })
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Token::Op('+') => {
                    self.bump();
                    lhs = Expression::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Op('-') => {
                    self.bump();
                    lhs = Expression::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Token::Op('*') => {
                    self.bump();
                    lhs = Expression::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Op('/') => {
                    self.bump();
                    lhs = Expression::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expression> {
        if *self.peek() == Token::Op('-') {
            self.bump();
            let inner = self.unary()?;
            return Ok(match inner {
                Expression::Const(c) => Expression::Const(-c),
                other => Expression::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression> {
        let base = self.atom()?;
        if *self.peek() == Token::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expression::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression> {
        match self.peek().clone() {
            Token::Num(v) => {
                self.bump();
                Ok(Expression::Const(v))
            }
            Token::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(e)
            }
            Token::Ident(name) => {
                if let Some(i) = VARIABLES.iter().position(|v| *v == name) {
                    self.bump();
                    return Ok(Expression::Var(i));
                }
                if name == "pi" {
                    self.bump();
                    return Ok(Expression::Const(std::f64::consts::PI));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.bump();
                    self.expect(Token::LParen, &format!("'(' after {name}"))?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "')'")?;
                    return Ok(Expression::Call(func, Box::new(arg)));
                }
                self.error(format!("unknown identifier '{name}'"))
            }
            other => self.error(format!("expected an operand, found {}", describe(&other))),
        }
    }

    fn list_value(&mut self) -> Result<ListValue> {
        if *self.peek() != Token::LBracket {
            return Ok(ListValue::Scalar(self.expr()?));
        }
        self.bump();
        let mut items = Vec::new();
        if *self.peek() == Token::RBracket {
            self.bump();
            return Ok(ListValue::List(items));
        }
        loop {
            items.push(self.list_value()?);
            match self.peek() {
                Token::Comma => {
                    self.bump();
                }
                Token::RBracket => {
                    self.bump();
                    return Ok(ListValue::List(items));
                }
                other => return self.error(format!("expected ',' or ']', found {}", describe(other))),
            }
        }
    }

    fn finish(&self) -> Result<()> {
        if *self.peek() == Token::End {
            Ok(())
        } else {
            self.error(format!("unexpected trailing {}", describe(self.peek())))
        }
    }
}

fn describe(t: &Token) -> String {
    match t {
        Token::Num(v) => format!("number {v}"),
        Token::Ident(s) => format!("'{s}'"),
        Token::Op(c) => format!("'{c}'"),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::LBracket => "'['".into(),
        Token::RBracket => "']'".into(),
        Token::Comma => "','".into(),
        Token::End => "end of input".into(),
    }
}

/// Parses a single expression. Columns in errors are 1-based.
pub fn parse_expression(text: &str) -> Result<Expression> {
    parse_expression_at(text, 1, 1)
}

pub(crate) fn parse_expression_at(text: &str, line: usize, col0: usize) -> Result<Expression> {
    let tokens = tokenize(text, line, col0)?;
    let mut p = Parser { tokens, pos: 0, line };
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses either an expression or a bracketed (possibly nested) list of them.
pub fn parse_expression_list(text: &str) -> Result<ListValue> {
    parse_list_at(text, 1, 1)
}

pub(crate) fn parse_list_at(text: &str, line: usize, col0: usize) -> Result<ListValue> {
    let tokens = tokenize(text, line, col0)?;
    let mut p = Parser { tokens, pos: 0, line };
    let v = p.list_value()?;
    p.finish()?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dangling_operator_is_reported_at_end() {
        let err = parse_expression("x^2 +").unwrap_err();
        match err {
            FinslerError::Parse { line, column, message } => {
                assert_eq!(line, 1);
                assert_eq!(column, 6);
                assert!(message.contains("end of input"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier() {
        assert!(matches!(parse_expression("2*w"), Err(FinslerError::Parse { column: 3, .. })));
    }

    #[test]
    fn unbalanced_parenthesis() {
        assert!(parse_expression("(x + 1").is_err());
        assert!(parse_expression("x + 1)").is_err());
    }

    #[test]
    fn nested_lists() {
        let v = parse_expression_list("[[1, 0], [0, 1 + x^2]]").unwrap();
        match v {
            ListValue::List(rows) => {
                assert_eq!(rows.len(), 2);
                assert!(matches!(&rows[1], ListValue::List(r) if r.len() == 2));
            }
            _ => panic!("expected list"),
        }
    }

    #[test]
    fn scientific_notation() {
        let e = parse_expression("1.5e-3*x + 2E2").unwrap();
        assert!((e.eval(&[2.0]) - 200.003).abs() < 1e-12);
    }
}
