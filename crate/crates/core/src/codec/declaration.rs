//! `!!!ObjTables ...` and `!!ObjTables ...` declaration lines.

use std::fmt;

use indexmap::IndexMap;

use crate::format::{is_double_quote, is_single_quote, quote, scan_string, ParseError};

pub const KEYWORD: &str = "ObjTables";
pub const DOCUMENT_PREFIX: &str = "!!!";
pub const SHEET_PREFIX: &str = "!!";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclarationLevel {
    Document,
    Sheet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheetType {
    Data,
    Schema,
    TableOfContents,
    Migration,
}

impl SheetType {
    pub fn as_str(self) -> &'static str {
        match self {
            SheetType::Data => "Data",
            SheetType::Schema => "Schema",
            SheetType::TableOfContents => "TableOfContents",
            SheetType::Migration => "Migration",
        }
    }

    pub fn parse(text: &str) -> Option<SheetType> {
        [
            SheetType::Data,
            SheetType::Schema,
            SheetType::TableOfContents,
            SheetType::Migration,
        ]
        .into_iter()
        .find(|t| t.as_str() == text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    pub level: DeclarationLevel,
    pub pairs: IndexMap<String, String>,
}

impl Declaration {
    pub fn sheet(sheet_type: SheetType) -> Self {
        let mut pairs = IndexMap::new();
        pairs.insert("type".to_string(), sheet_type.as_str().to_string());
        Declaration {
            level: DeclarationLevel::Sheet,
            pairs,
        }
    }

    pub fn data(class: &str) -> Self {
        Declaration::sheet(SheetType::Data).with("class", class)
    }

    pub fn document(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Declaration {
            level: DeclarationLevel::Document,
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.pairs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str)
    }

    pub fn sheet_type(&self) -> Option<SheetType> {
        self.get("type").and_then(SheetType::parse)
    }

    pub fn class(&self) -> Option<&str> {
        self.get("class")
    }
}

impl fmt::Display for Declaration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.level {
            DeclarationLevel::Document => DOCUMENT_PREFIX,
            DeclarationLevel::Sheet => SHEET_PREFIX,
        };
        write!(f, "{prefix}{KEYWORD}")?;
        for (k, v) in &self.pairs {
            write!(f, " {k}={}", quote(v))?;
        }
        Ok(())
    }
}

pub fn print_declaration(declaration: &Declaration) -> String {
    declaration.to_string()
}

pub fn parse_declaration(line: &str) -> Result<Declaration, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let (level, mut i) = if line.starts_with(DOCUMENT_PREFIX) {
        (DeclarationLevel::Document, 3)
    } else if line.starts_with(SHEET_PREFIX) {
        (DeclarationLevel::Sheet, 2)
    } else {
        return Err(ParseError::new(
            0,
            "declaration must start with `!!` or `!!!`",
        ));
    };
    let keyword: Vec<char> = KEYWORD.chars().collect();
    if chars.get(i..i + keyword.len()) != Some(keyword.as_slice()) {
        return Err(ParseError::new(i, format!("expected keyword `{KEYWORD}`")));
    }
    i += keyword.len();

    let mut pairs = IndexMap::new();
    loop {
        let before = i;
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i == chars.len() {
            break;
        }
        if i == before {
            return Err(ParseError::new(i, "expected whitespace before key"));
        }
        let key_start = i;
        while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
            i += 1;
        }
        if i == key_start {
            return Err(ParseError::new(
                i,
                format!("expected key, found {:?}", chars[i]),
            ));
        }
        let key: String = chars[key_start..i].iter().collect();
        if chars.get(i) != Some(&'=') {
            return Err(ParseError::new(
                i,
                format!("expected `=` after key '{key}'"),
            ));
        }
        i += 1;
        match chars.get(i) {
            Some(&c) if is_single_quote(c) || is_double_quote(c) => {}
            _ => {
                return Err(ParseError::new(
                    i,
                    format!("expected quoted value for key '{key}'"),
                ))
            }
        }
        let (value, end) = scan_string(&chars, i)?;
        i = end;
        if pairs.insert(key.clone(), value).is_some() {
            return Err(ParseError::new(key_start, format!("duplicate key '{key}'")));
        }
    }

    let declaration = Declaration { level, pairs };
    let end = chars.len();
    match level {
        DeclarationLevel::Document => {
            if declaration
                .get(crate::dataset::FORMAT_VERSION_KEY)
                .is_none()
            {
                return Err(ParseError::new(
                    end,
                    "document declaration requires objTablesVersion",
                ));
            }
        }
        DeclarationLevel::Sheet => match declaration.get("type") {
            None => return Err(ParseError::new(end, "sheet declaration requires `type`")),
            Some(t) => match SheetType::parse(t) {
                None => return Err(ParseError::new(end, format!("unknown sheet type '{t}'"))),
                Some(SheetType::Data) if declaration.class().is_none() => {
                    return Err(ParseError::new(end, "Data sheet requires `class`"))
                }
                Some(_) => {}
            },
        },
    }
    Ok(declaration)
}
