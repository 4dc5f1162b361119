use super::QueryError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Backtick-quoted identifier; never treated as a keyword.
    Quoted(String),
    Str(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    DotDot,
    Star,
    Minus,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Pipe,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Quoted(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Int(i) => format!("'{i}'"),
            Tok::Float(x) => format!("'{x}'"),
            Tok::Eof => "end of input".into(),
            other => format!("'{}'", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::DotDot => "..",
            Tok::Star => "*",
            Tok::Minus => "-",
            Tok::Eq => "=",
            Tok::Neq => "<>",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Pipe => "|",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

fn syntax(offset: usize, expected: &str, found: String) -> QueryError {
    QueryError::Syntax {
        offset,
        expected: expected.to_string(),
        found,
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, QueryError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let single = |t: Tok| Some((t, 1));
        let simple = match c {
            b'(' => single(Tok::LParen),
            b')' => single(Tok::RParen),
            b'[' => single(Tok::LBracket),
            b']' => single(Tok::RBracket),
            b'{' => single(Tok::LBrace),
            b'}' => single(Tok::RBrace),
            b':' => single(Tok::Colon),
            b',' => single(Tok::Comma),
            b'*' => single(Tok::Star),
            b'-' => single(Tok::Minus),
            b'=' => single(Tok::Eq),
            b'|' => single(Tok::Pipe),
            b'!' if bytes.get(i + 1) == Some(&b'=') => Some((Tok::Neq, 2)),
            b'<' => match bytes.get(i + 1) {
                Some(b'>') => Some((Tok::Neq, 2)),
                Some(b'=') => Some((Tok::Le, 2)),
                _ => single(Tok::Lt),
            },
            b'>' => match bytes.get(i + 1) {
                Some(b'=') => Some((Tok::Ge, 2)),
                _ => single(Tok::Gt),
            },
            b'.' if bytes.get(i + 1) == Some(&b'.') => Some((Tok::DotDot, 2)),
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => single(Tok::Dot),
            _ => None,
        };
        if let Some((tok, len)) = simple {
            out.push(Token { tok, offset: start });
            i += len;
            continue;
        }
        if c == b'\'' || c == b'"' {
            let (s, next) = lex_string(src, i)?;
            out.push(Token {
                tok: Tok::Str(s),
                offset: start,
            });
            i = next;
            continue;
        }
        if c == b'`' {
            let mut name = String::new();
            let mut j = i + 1;
            loop {
                match bytes.get(j) {
                    None => return Err(syntax(start, "closing '`'", "end of input".into())),
                    Some(b'`') if bytes.get(j + 1) == Some(&b'`') => {
                        name.push('`');
                        j += 2;
                    }
                    Some(b'`') => break,
                    Some(_) => {
                        let ch = src[j..].chars().next().unwrap();
                        name.push(ch);
                        j += ch.len_utf8();
                    }
                }
            }
            out.push(Token {
                tok: Tok::Quoted(name),
                offset: start,
            });
            i = j + 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            let (tok, next) = lex_number(src, i)?;
            out.push(Token { tok, offset: start });
            i = next;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[i..j].to_string()),
                offset: start,
            });
            i = j;
            continue;
        }
        let ch = src[i..].chars().next().unwrap();
        return Err(syntax(start, "a token", format!("'{ch}'")));
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}

fn lex_string(src: &str, start: usize) -> Result<(String, usize), QueryError> {
    let quote = src.as_bytes()[start] as char;
    let mut out = String::new();
    let mut chars = src[start + 1..].char_indices();
    while let Some((k, ch)) = chars.next() {
        match ch {
            c if c == quote => return Ok((out, start + 1 + k + 1)),
            '\\' => {
                let Some((k2, esc)) = chars.next() else { break };
                out.push(match esc {
                    'n' => '\n',
                    't' => '\t',
                    'r' => '\r',
                    '\\' | '\'' | '"' => esc,
                    _ => {
                        return Err(syntax(
                            start + 1 + k2,
                            "escape sequence",
                            format!("'\\{esc}'"),
                        ))
                    }
                });
            }
            c => out.push(c),
        }
    }
    Err(syntax(start, &format!("closing {quote}"), "end of input".into()))
}

fn lex_number(src: &str, start: usize) -> Result<(Tok, usize), QueryError> {
    let bytes = src.as_bytes();
    let mut j = start;
    while j < bytes.len() && bytes[j].is_ascii_digit() {
        j += 1;
    }
    let mut is_float = false;
    // `1..3` is a range, not a float
    if j < bytes.len() && bytes[j] == b'.' && bytes.get(j + 1).is_some_and(u8::is_ascii_digit) {
        is_float = true;
        j += 1;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
    }
    if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
        let mut k = j + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        if k < bytes.len() && bytes[k].is_ascii_digit() {
            is_float = true;
            j = k;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
        }
    }
    let text = &src[start..j];
    let tok = if is_float {
        Tok::Float(
            text.parse()
                .map_err(|_| syntax(start, "number", format!("'{text}'")))?,
        )
    } else {
        Tok::Int(
            text.parse()
                .map_err(|_| syntax(start, "integer in range", format!("'{text}'")))?,
        )
    };
    Ok((tok, j))
}
