//! Mode declarations (declarative bias).
//!
//! One declaration per line:
//!
//! ```text
//! head materials(+index, +cell)
//! body above_below(+cell, -cell)
//! body cell_contains(+cell, #token)
//! body succ(-index, +index)
//! ```
//!
//! `+` marks an input variable, `-` an output variable, `#` a constant.
//! Lines starting with `%` are comments.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::PredKey;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bias line {line}: {msg}")]
pub struct BiasError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArgMode {
    Input,
    Output,
    Constant,
}

impl ArgMode {
    fn marker(self) -> char {
        match self {
            ArgMode::Input => '+',
            ArgMode::Output => '-',
            ArgMode::Constant => '#',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeArg {
    pub mode: ArgMode,
    pub ty: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    Head,
    Body,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeDecl {
    pub kind: ModeKind,
    pub pred: String,
    pub args: Vec<ModeArg>,
}

impl ModeDecl {
    pub fn key(&self) -> PredKey {
        PredKey::new(&self.pred, self.args.len())
    }

    /// Body mode letting a learned predicate be called with the argument
    /// markers of its head mode.
    pub fn as_body(&self) -> ModeDecl {
        ModeDecl { kind: ModeKind::Body, pred: self.pred.clone(), args: self.args.clone() }
    }

    pub fn parse(line: &str) -> Result<ModeDecl, String> {
        let line = line.trim();
        let (kind, rest) = if let Some(r) = line.strip_prefix("head ") {
            (ModeKind::Head, r)
        } else if let Some(r) = line.strip_prefix("body ") {
            (ModeKind::Body, r)
        } else {
            return Err("expected `head` or `body`".into());
        };
        let rest = rest.trim();
        let open = rest.find('(');
        let (pred, args_text) = match open {
            Some(i) => {
                let close = rest.rfind(')').ok_or("missing `)`")?;
                if close < i || !rest[close + 1..].trim().is_empty() {
                    return Err("malformed argument list".into());
                }
                (rest[..i].trim(), &rest[i + 1..close])
            }
            None => (rest, ""),
        };
        if pred.is_empty() || !pred.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("invalid predicate name {pred:?}"));
        }
        let mut args = Vec::new();
        if !args_text.trim().is_empty() {
            for a in args_text.split(',') {
                let a = a.trim();
                let mut chars = a.chars();
                let mode = match chars.next() {
                    Some('+') => ArgMode::Input,
                    Some('-') => ArgMode::Output,
                    Some('#') => ArgMode::Constant,
                    _ => return Err(format!("argument {a:?} lacks a +, - or # marker")),
                };
                let ty = chars.as_str().trim();
                if ty.is_empty() {
                    return Err(format!("argument {a:?} lacks a type"));
                }
                args.push(ModeArg { mode, ty: ty.to_string() });
            }
        }
        Ok(ModeDecl { kind, pred: pred.to_string(), args })
    }
}

impl fmt::Display for ModeDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ModeKind::Head => "head",
            ModeKind::Body => "body",
        };
        write!(f, "{kind} {}", self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}{}", a.mode.marker(), a.ty)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A set of mode declarations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bias {
    pub modes: Vec<ModeDecl>,
}

impl Bias {
    pub fn parse(text: &str) -> Result<Bias, BiasError> {
        let mut modes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('%').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let m = ModeDecl::parse(line).map_err(|msg| BiasError { line: i + 1, msg })?;
            modes.push(m);
        }
        Ok(Bias { modes })
    }

    pub fn head_mode(&self, key: &PredKey) -> Option<&ModeDecl> {
        self.modes.iter().find(|m| m.kind == ModeKind::Head && &m.key() == key)
    }

    pub fn body_modes(&self) -> impl Iterator<Item = &ModeDecl> {
        self.modes.iter().filter(|m| m.kind == ModeKind::Body)
    }

    pub fn head_modes(&self) -> impl Iterator<Item = &ModeDecl> {
        self.modes.iter().filter(|m| m.kind == ModeKind::Head)
    }

    /// Target predicates in declaration order.
    pub fn targets(&self) -> Vec<PredKey> {
        self.head_modes().map(ModeDecl::key).collect()
    }

    pub fn add(&mut self, mode: ModeDecl) {
        if !self.modes.contains(&mode) {
            self.modes.push(mode);
        }
    }
}

impl fmt::Display for Bias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.modes {
            writeln!(f, "{m}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bias_file() {
        let b = Bias::parse(
            "% bias\nhead materials(+index, +cell)\nbody above_below(+cell, -cell)\n\
             body cell_contains(+cell, #token)\nbody succ(-index, +index)\n",
        )
        .unwrap();
        assert_eq!(b.modes.len(), 4);
        assert_eq!(b.targets(), vec![PredKey::new("materials", 2)]);
        assert_eq!(b.modes[2].args[1], ModeArg { mode: ArgMode::Constant, ty: "token".into() });
        assert_eq!(b.to_string().lines().nth(3), Some("body succ(-index, +index)"));
    }

    #[test]
    fn rejects_missing_marker() {
        let e = Bias::parse("head p(+a)\nbody q(cell)\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn zero_arity_mode() {
        let m = ModeDecl::parse("body done").unwrap();
        assert!(m.args.is_empty());
    }
}
