use super::lexer::{is_double_quote, is_single_quote, tokenize, FormatToken, TokenKind};
use super::ParseError;
use crate::schema::{AttributeFormat, AttributeKind};

struct Cursor {
    tokens: Vec<FormatToken>,
    pos: usize,
    end: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&FormatToken> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<FormatToken> {
        let token = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        token
    }

    fn expect(&mut self, kind: TokenKind) -> Result<FormatToken, ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => Ok(self.next().unwrap()),
            _ => Err(self.unexpected(kind.describe())),
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(t) => {
                ParseError::new(t.offset, format!("expected {expected}, found {:?}", t.text))
            }
            None => ParseError::new(self.end, format!("expected {expected}, found end of input")),
        }
    }
}

/// Parses `Kind` or `Kind(arg, ...)` into an [`AttributeFormat`].
pub fn parse_attribute_format(text: &str) -> Result<AttributeFormat, ParseError> {
    let tokens = tokenize(text)?;
    let mut cursor = Cursor {
        tokens,
        pos: 0,
        end: text.chars().count(),
    };

    let kind_token = match cursor.peek() {
        Some(t) if t.kind == TokenKind::Identifier => cursor.next().unwrap(),
        _ => return Err(cursor.unexpected("format kind")),
    };
    let kind = AttributeKind::from_name(&kind_token.text).ok_or_else(|| {
        ParseError::new(
            kind_token.offset,
            format!("unknown format kind '{}'", kind_token.text),
        )
    })?;
    let mut format = AttributeFormat::new(kind);

    if cursor.peek().is_some() {
        cursor.expect(TokenKind::OpenParen)?;
        parse_arguments(&mut cursor, &mut format)?;
        if cursor.peek().is_some() {
            return Err(cursor.unexpected("end of input"));
        }
    }

    let close_offset = cursor.end;
    if kind.is_relation() {
        if format.target_class.is_none() {
            return Err(ParseError::new(
                close_offset,
                format!("{kind} requires a target class argument"),
            ));
        }
        if format.related_name.is_none() {
            return Err(ParseError::new(
                close_offset,
                format!("{kind} requires related_name"),
            ));
        }
    }
    if kind == AttributeKind::Enum && format.enum_values.is_empty() {
        return Err(ParseError::new(
            close_offset,
            "Enum requires at least one value",
        ));
    }
    if format.primary {
        format.unique = true;
    }
    Ok(format)
}

fn parse_arguments(cursor: &mut Cursor, format: &mut AttributeFormat) -> Result<(), ParseError> {
    let kind = format.kind;
    let mut seen_keywords: Vec<String> = Vec::new();
    let mut positional = 0usize;

    if cursor
        .peek()
        .is_some_and(|t| t.kind == TokenKind::CloseParen)
    {
        cursor.next();
        return Ok(());
    }
    loop {
        let token = match cursor.next() {
            Some(t) => t,
            None => {
                return Err(ParseError::new(
                    cursor.end,
                    "expected argument or `)`, found end of input",
                ))
            }
        };
        match token.kind {
            TokenKind::StringLiteral => {
                if !seen_keywords.is_empty() {
                    return Err(ParseError::new(
                        token.offset,
                        "positional argument follows keyword argument",
                    ));
                }
                positional += 1;
                if kind.is_relation() && positional == 1 {
                    format.target_class = Some(token.text);
                } else if kind == AttributeKind::Enum {
                    format.enum_values.push(token.text);
                } else {
                    return Err(ParseError::new(
                        token.offset,
                        format!("unexpected positional argument for {kind}"),
                    ));
                }
            }
            TokenKind::Identifier => {
                let keyword = token.text;
                if !matches!(keyword.as_str(), "primary" | "unique" | "related_name") {
                    return Err(ParseError::new(
                        token.offset,
                        format!("unknown keyword '{keyword}'"),
                    ));
                }
                if seen_keywords.contains(&keyword) {
                    return Err(ParseError::new(
                        token.offset,
                        format!("repeated keyword '{keyword}'"),
                    ));
                }
                let valid = match keyword.as_str() {
                    "related_name" => kind.is_relation(),
                    _ => !kind.is_relation(),
                };
                if !valid {
                    return Err(ParseError::new(
                        token.offset,
                        format!("keyword '{keyword}' is not valid for {kind}"),
                    ));
                }
                cursor.expect(TokenKind::Equals)?;
                if keyword == "related_name" {
                    let value = cursor.expect(TokenKind::StringLiteral)?;
                    format.related_name = Some(value.text);
                } else {
                    let value = cursor.expect(TokenKind::BooleanLiteral)?;
                    let flag = value.text == "True";
                    if keyword == "primary" {
                        format.primary = flag;
                    } else {
                        format.unique = flag;
                    }
                }
                seen_keywords.push(keyword);
            }
            _ => {
                return Err(ParseError::new(
                    token.offset,
                    format!("expected argument, found {:?}", token.text),
                ))
            }
        }
        match cursor.next() {
            Some(t) if t.kind == TokenKind::Comma => continue,
            Some(t) if t.kind == TokenKind::CloseParen => return Ok(()),
            Some(t) => {
                return Err(ParseError::new(
                    t.offset,
                    format!("expected `,` or `)`, found {:?}", t.text),
                ))
            }
            None => {
                return Err(ParseError::new(
                    cursor.end,
                    "expected `)`, found end of input",
                ))
            }
        }
    }
}

pub(crate) fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('\'');
    for c in value.chars() {
        if c == '\\' || is_single_quote(c) || is_double_quote(c) {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

/// Canonical text for `format`: single quotes, `, ` separators, keywords in
/// the order target, related_name, primary, unique, defaults omitted.
pub fn print_attribute_format(format: &AttributeFormat) -> String {
    let mut args = Vec::new();
    if let Some(target) = &format.target_class {
        args.push(quote(target));
    }
    for value in &format.enum_values {
        args.push(quote(value));
    }
    if let Some(related) = &format.related_name {
        args.push(format!("related_name={}", quote(related)));
    }
    if format.primary {
        args.push("primary=True".to_string());
    }
    if format.unique {
        args.push("unique=True".to_string());
    }
    if args.is_empty() {
        format.kind.name().to_string()
    } else {
        format!("{}({})", format.kind.name(), args.join(", "))
    }
}
