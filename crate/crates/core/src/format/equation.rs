//! Reaction equations written into a single cell, e.g. `2 H2 + O2 ==> 2 H2O`.
//!
//! ```text
//! equation := side arrow side
//! arrow    := "==>" | "<=>"
//! side     := term ("+" term)*
//! term     := [coefficient] species
//! ```
//!
//! Coefficients are positive decimals and default to 1. Species match
//! `[A-Za-z0-9_]+`. `<=>` marks the reaction reversible.

use std::fmt;

use serde::Serialize;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Participant {
    pub coefficient: f64,
    pub species: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChemicalEquation {
    pub reactants: Vec<Participant>,
    pub products: Vec<Participant>,
    pub reversible: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Word(String),
    Plus,
    Arrow { reversible: bool },
}

fn lex(chars: &[char]) -> Vec<(Lexeme, usize)> {
    let starts_arrow = |i: usize| {
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match rest.as_str() {
            "==>" => Some(false),
            "<=>" => Some(true),
            _ => None,
        }
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            out.push((Lexeme::Plus, i));
            i += 1;
        } else if let Some(reversible) = starts_arrow(i) {
            out.push((Lexeme::Arrow { reversible }, i));
            i += 3;
        } else {
            let start = i;
            while i < chars.len()
                && !chars[i].is_whitespace()
                && chars[i] != '+'
                && starts_arrow(i).is_none()
            {
                i += 1;
            }
            out.push((Lexeme::Word(chars[start..i].iter().collect()), start));
        }
    }
    out
}

fn is_species(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_coefficient(word: &str, offset: usize) -> Result<f64, ParseError> {
    let digits = word.strip_prefix('-').unwrap_or(word);
    let (whole, frac) = match digits.split_once('.') {
        Some((w, f)) => (w, Some(f)),
        None => (digits, None),
    };
    let well_formed = !whole.is_empty()
        && whole.chars().all(|c| c.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.chars().all(|c| c.is_ascii_digit()));
    if !well_formed {
        return Err(ParseError::new(
            offset,
            format!("malformed coefficient {word:?}"),
        ));
    }
    let value: f64 = word
        .parse()
        .map_err(|_| ParseError::new(offset, format!("malformed coefficient {word:?}")))?;
    if !value.is_finite() || value <= 0.0 {
        return Err(ParseError::new(
            offset,
            format!("coefficient {word} must be positive"),
        ));
    }
    Ok(value)
}

pub fn parse_chemical_equation(text: &str) -> Result<ChemicalEquation, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let end = chars.len();
    let lexemes = lex(&chars);
    let mut pos = 0;

    let mut sides: Vec<Vec<Participant>> = Vec::with_capacity(2);
    let mut reversible = None;
    loop {
        let mut side = Vec::new();
        loop {
            let term_offset = lexemes.get(pos).map_or(end, |(_, o)| *o);
            let first = match lexemes.get(pos) {
                Some((Lexeme::Word(w), o)) => (w.clone(), *o),
                _ => return Err(ParseError::new(term_offset, "expected term")),
            };
            pos += 1;
            let participant = match lexemes.get(pos) {
                Some((Lexeme::Word(species), species_offset)) => {
                    let coefficient = parse_coefficient(&first.0, first.1)?;
                    pos += 1;
                    if !is_species(species) {
                        return Err(ParseError::new(
                            *species_offset,
                            format!("malformed species {species:?}"),
                        ));
                    }
                    Participant {
                        coefficient,
                        species: species.clone(),
                    }
                }
                _ => {
                    if !is_species(&first.0) {
                        return Err(ParseError::new(
                            first.1,
                            format!("malformed species {:?}", first.0),
                        ));
                    }
                    Participant {
                        coefficient: 1.0,
                        species: first.0,
                    }
                }
            };
            side.push(participant);
            match lexemes.get(pos) {
                Some((Lexeme::Plus, _)) => pos += 1,
                _ => break,
            }
        }
        sides.push(side);
        if sides.len() == 2 {
            break;
        }
        match lexemes.get(pos) {
            Some((Lexeme::Arrow { reversible: r }, _)) => {
                reversible = Some(*r);
                pos += 1;
            }
            Some((_, o)) => return Err(ParseError::new(*o, "expected `==>` or `<=>`")),
            None => return Err(ParseError::new(end, "expected `==>` or `<=>`")),
        }
    }
    if let Some((_, o)) = lexemes.get(pos) {
        return Err(ParseError::new(*o, "expected end of equation"));
    }
    let products = sides.pop().unwrap_or_default();
    let reactants = sides.pop().unwrap_or_default();
    Ok(ChemicalEquation {
        reactants,
        products,
        reversible: reversible.unwrap_or(false),
    })
}

fn write_side(f: &mut fmt::Formatter<'_>, side: &[Participant]) -> fmt::Result {
    for (i, p) in side.iter().enumerate() {
        if i > 0 {
            f.write_str(" + ")?;
        }
        if p.coefficient != 1.0 {
            write!(f, "{} ", p.coefficient)?;
        }
        f.write_str(&p.species)?;
    }
    Ok(())
}

/// Canonical form: single spaces, coefficient 1 omitted.
impl fmt::Display for ChemicalEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_side(f, &self.reactants)?;
        f.write_str(if self.reversible { " <=> " } else { " ==> " })?;
        write_side(f, &self.products)
    }
}

pub fn print_chemical_equation(equation: &ChemicalEquation) -> String {
    equation.to_string()
}
