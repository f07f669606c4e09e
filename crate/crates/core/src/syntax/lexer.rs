use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Kw(Kw),
    Assign,   // :=
    Define,   // ::=
    Semi,     // ;
    Comma,    // ,
    Colon,    // :
    LParen,   // (
    RParen,   // )
    LBracket, // [
    RBracket, // ]
    Box,      // []
    LBrace,   // {
    RBrace,   // }
    Lt,
    Le,
    Gt,
    Ge,
    EqSign, // =
    Ne,     // !=
    Arrow,  // ->
    IntChoice,
    Par,       // ||
    Interrupt, // |>
    Amp,       // &
    Quest,     // ?
    Bang,      // !
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Skip,
    Stop,
    Wait,
    True,
    False,
    And,
    Or,
    Not,
    Sqrt,
}

impl Kw {
    fn from_ident(s: &str) -> Option<Kw> {
        Some(match s {
            "skip" => Kw::Skip,
            "stop" => Kw::Stop,
            "wait" => Kw::Wait,
            "true" => Kw::True,
            "false" => Kw::False,
            "and" => Kw::And,
            "or" => Kw::Or,
            "not" => Kw::Not,
            "sqrt" => Kw::Sqrt,
            _ => return None,
        })
    }
}

pub fn is_keyword(s: &str) -> bool {
    Kw::from_ident(s).is_some()
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

/// Splits source text into tokens. `#` starts a comment running to the end of
/// the line. Line and column numbers are 1-based; `first_line` offsets lines
/// for fragments cut out of a larger file.
pub fn tokenize(src: &str, first_line: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = first_line;
    let mut col = 1;

    while i < chars.len() {
        let c = chars[i];
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        let peek = |k: usize| chars.get(i + k).copied();

        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            let tok = match Kw::from_ident(&word) {
                Some(kw) => Tok::Kw(kw),
                None => Tok::Ident(word),
            };
            out.push(Token { tok, line, col: start_col });
            col += j - i;
            i = j;
            continue;
        }

        if c.is_ascii_digit() || (c == '.' && peek(1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j < chars.len() && chars[j] == '.' {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[i..j].iter().collect();
            let value: f64 =
                text.parse().map_err(|_| ParseError::new(line, start_col, format!("malformed number `{text}`")))?;
            out.push(Token { tok: Tok::Num(value), line, col: start_col });
            col += j - i;
            i = j;
            continue;
        }

        let (tok, len) = match (c, peek(1), peek(2)) {
            (':', Some(':'), Some('=')) => (Tok::Define, 3),
            (':', Some('='), _) => (Tok::Assign, 2),
            (':', _, _) => (Tok::Colon, 1),
            ('|', Some('~'), Some('|')) => (Tok::IntChoice, 3),
            ('|', Some('|'), _) => (Tok::Par, 2),
            ('|', Some('>'), _) => (Tok::Interrupt, 2),
            ('[', Some(']'), _) => (Tok::Box, 2),
            ('<', Some('='), _) => (Tok::Le, 2),
            ('>', Some('='), _) => (Tok::Ge, 2),
            ('!', Some('='), _) => (Tok::Ne, 2),
            ('-', Some('>'), _) => (Tok::Arrow, 2),
            (';', _, _) => (Tok::Semi, 1),
            (',', _, _) => (Tok::Comma, 1),
            ('(', _, _) => (Tok::LParen, 1),
            (')', _, _) => (Tok::RParen, 1),
            ('[', _, _) => (Tok::LBracket, 1),
            (']', _, _) => (Tok::RBracket, 1),
            ('{', _, _) => (Tok::LBrace, 1),
            ('}', _, _) => (Tok::RBrace, 1),
            ('<', _, _) => (Tok::Lt, 1),
            ('>', _, _) => (Tok::Gt, 1),
            ('=', _, _) => (Tok::EqSign, 1),
            ('&', _, _) => (Tok::Amp, 1),
            ('?', _, _) => (Tok::Quest, 1),
            ('!', _, _) => (Tok::Bang, 1),
            ('+', _, _) => (Tok::Plus, 1),
            ('-', _, _) => (Tok::Minus, 1),
            ('*', _, _) => (Tok::Star, 1),
            ('/', _, _) => (Tok::Slash, 1),
            ('^', _, _) => (Tok::Caret, 1),
            _ => return Err(ParseError::new(line, start_col, format!("unexpected character `{c}`"))),
        };
        out.push(Token { tok, line, col: start_col });
        i += len;
        col += len;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

pub fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Kw(k) => format!("keyword `{}`", format!("{k:?}").to_lowercase()),
        Tok::Eof => "end of input".to_string(),
        other => {
            let s = match other {
                Tok::Assign => ":=",
                Tok::Define => "::=",
                Tok::Semi => ";",
                Tok::Comma => ",",
                Tok::Colon => ":",
                Tok::LParen => "(",
                Tok::RParen => ")",
                Tok::LBracket => "[",
                Tok::RBracket => "]",
                Tok::Box => "[]",
                Tok::LBrace => "{",
                Tok::RBrace => "}",
                Tok::Lt => "<",
                Tok::Le => "<=",
                Tok::Gt => ">",
                Tok::Ge => ">=",
                Tok::EqSign => "=",
                Tok::Ne => "!=",
                Tok::Arrow => "->",
                Tok::IntChoice => "|~|",
                Tok::Par => "||",
                Tok::Interrupt => "|>",
                Tok::Amp => "&",
                Tok::Quest => "?",
                Tok::Bang => "!",
                Tok::Plus => "+",
                Tok::Minus => "-",
                Tok::Star => "*",
                Tok::Slash => "/",
                Tok::Caret => "^",
                _ => unreachable!(),
            };
            format!("`{s}`")
        }
    }
}
