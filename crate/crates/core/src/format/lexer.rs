use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Identifier,
    StringLiteral,
    Equals,
    Comma,
    OpenParen,
    CloseParen,
    BooleanLiteral,
}

impl TokenKind {
    pub fn describe(self) -> &'static str {
        match self {
            TokenKind::Identifier => "identifier",
            TokenKind::StringLiteral => "string literal",
            TokenKind::Equals => "`=`",
            TokenKind::Comma => "`,`",
            TokenKind::OpenParen => "`(`",
            TokenKind::CloseParen => "`)`",
            TokenKind::BooleanLiteral => "True or False",
        }
    }
}

/// One lexeme of a `!Format` string.
///
/// `text` is the source slice for punctuation and identifiers, and the
/// unescaped contents for string literals. `offset` counts characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatToken {
    pub kind: TokenKind,
    pub text: String,
    pub offset: usize,
}

/// Single-quote delimiters. Typographic variants are what word processors
/// substitute when a format string is pasted through them.
pub(crate) fn is_single_quote(c: char) -> bool {
    matches!(c, '\'' | '\u{2018}' | '\u{2019}' | '`' | '\u{00B4}')
}

pub(crate) fn is_double_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201C}' | '\u{201D}')
}

/// Scans a quoted literal starting at `chars[start]` (the opening quote).
/// Returns the unescaped value and the index just past the closing quote.
pub(crate) fn scan_string(chars: &[char], start: usize) -> Result<(String, usize), ParseError> {
    let double = is_double_quote(chars[start]);
    let closes = |c: char| {
        if double {
            is_double_quote(c)
        } else {
            is_single_quote(c)
        }
    };
    let mut value = String::new();
    let mut i = start + 1;
    while i < chars.len() {
        let c = chars[i];
        if c == '\\' {
            match chars.get(i + 1) {
                Some(&next) => {
                    value.push(next);
                    i += 2;
                }
                None => {
                    return Err(ParseError::new(
                        chars.len(),
                        "expected character after `\\`",
                    ))
                }
            }
        } else if closes(c) {
            return Ok((value, i + 1));
        } else {
            value.push(c);
            i += 1;
        }
    }
    Err(ParseError::new(chars.len(), "expected closing quote"))
}

pub fn tokenize(text: &str) -> Result<Vec<FormatToken>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let punct = match c {
            '=' => Some(TokenKind::Equals),
            ',' => Some(TokenKind::Comma),
            '(' => Some(TokenKind::OpenParen),
            ')' => Some(TokenKind::CloseParen),
            _ => None,
        };
        if let Some(kind) = punct {
            tokens.push(FormatToken {
                kind,
                text: c.to_string(),
                offset: i,
            });
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if is_single_quote(c) || is_double_quote(c) {
            let (value, end) = scan_string(&chars, i)?;
            tokens.push(FormatToken {
                kind: TokenKind::StringLiteral,
                text: value,
                offset: i,
            });
            i = end;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let kind = if word == "True" || word == "False" {
                TokenKind::BooleanLiteral
            } else {
                TokenKind::Identifier
            };
            tokens.push(FormatToken {
                kind,
                text: word,
                offset: start,
            });
        } else {
            return Err(ParseError::new(i, format!("unexpected character {c:?}")));
        }
    }
    Ok(tokens)
}
