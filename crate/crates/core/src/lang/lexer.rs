use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Int(i64),
    Atom(String),
    Var(String),
    Underscore,
    // keywords
    Case,
    Of,
    End,
    Receive,
    When,
    Div,
    And,
    Or,
    Spawn,
    SelfKw,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Semi,
    Arrow,
    Bar,
    Bang,
    Match,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Int(n) => format!("integer {n}"),
            Tok::Atom(a) => format!("atom `{a}`"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Underscore => "_",
            Tok::Case => "case",
            Tok::Of => "of",
            Tok::End => "end",
            Tok::Receive => "receive",
            Tok::When => "when",
            Tok::Div => "div",
            Tok::And => "and",
            Tok::Or => "or",
            Tok::Spawn => "spawn",
            Tok::SelfKw => "self",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Semi => ";",
            Tok::Arrow => "->",
            Tok::Bar => "|",
            Tok::Bang => "!",
            Tok::Match => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "/=",
            Tok::Lt => "<",
            Tok::Le => "=<",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Int(_) | Tok::Atom(_) | Tok::Var(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };

        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }

        let push = |out: &mut Vec<Spanned>, tok: Tok| {
            out.push(Spanned {
                tok,
                line: start_line,
                col: start_col,
            })
        };

        if c.is_ascii_digit() {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            col += i - begin;
            let n = text.parse::<i64>().map_err(|_| ParseError {
                line: start_line,
                col: start_col,
                message: format!("integer literal {text} out of range"),
            })?;
            push(&mut out, Tok::Int(n));
            continue;
        }

        if c.is_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[begin..i].iter().collect();
            col += i - begin;
            let tok = if word == "_" {
                Tok::Underscore
            } else if c.is_uppercase() || c == '_' {
                Tok::Var(word)
            } else {
                match word.as_str() {
                    "case" => Tok::Case,
                    "of" => Tok::Of,
                    "end" => Tok::End,
                    "receive" => Tok::Receive,
                    "when" => Tok::When,
                    "div" => Tok::Div,
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "spawn" => Tok::Spawn,
                    "self" => Tok::SelfKw,
                    _ => Tok::Atom(word),
                }
            };
            push(&mut out, tok);
            continue;
        }

        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('=', Some('<')) => (Tok::Le, 2),
            ('/', Some('=')) => (Tok::NotEq, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            (',', _) => (Tok::Comma, 1),
            ('.', _) => (Tok::Dot, 1),
            (';', _) => (Tok::Semi, 1),
            ('|', _) => (Tok::Bar, 1),
            ('!', _) => (Tok::Bang, 1),
            ('=', _) => (Tok::Match, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            _ => {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        push(&mut out, tok);
        i += len;
        col += len;
    }

    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
