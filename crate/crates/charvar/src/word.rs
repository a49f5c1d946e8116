//! Words in the free group on the handle generators of a genus `g` surface.
//!
//! Generators are numbered `1..=2g`: odd indices are the `a_j` curves and
//! even indices the `b_j` curves, so `a_j = 2j - 1` and `b_j = 2j`.  Words
//! are kept freely reduced at all times; two words are equal in the free
//! group exactly when their letter sequences match.

use crate::error::{Error, Result};
use std::fmt;

/// One letter of a word: a generator index with an exponent sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Letter {
    /// 1-based generator index; odd for `a` curves, even for `b` curves.
    pub gen: u16,
    /// `+1` or `-1`.
    pub sign: i8,
}

impl Letter {
    pub fn new(gen: u16, sign: i8) -> Result<Letter> {
        if gen == 0 {
            return Err(Error::MalformedWord("generator indices are 1-based".into()));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::MalformedWord(format!("letter sign must be +-1, got {sign}")));
        }
        Ok(Letter { gen, sign })
    }

    fn cancels(&self, other: &Letter) -> bool {
        self.gen == other.gen && self.sign == -other.sign
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FreeWord {
    letters: Vec<Letter>,
}

impl FreeWord {
    pub fn identity() -> FreeWord {
        FreeWord { letters: Vec::new() }
    }

    pub fn generator(gen: u16, sign: i8) -> Result<FreeWord> {
        Ok(FreeWord { letters: vec![Letter::new(gen, sign)?] })
    }

    /// The `a_j` handle generator (1-based `j`).
    pub fn a(j: u16) -> FreeWord {
        FreeWord { letters: vec![Letter { gen: 2 * j - 1, sign: 1 }] }
    }

    /// The `b_j` handle generator (1-based `j`).
    pub fn b(j: u16) -> FreeWord {
        FreeWord { letters: vec![Letter { gen: 2 * j, sign: 1 }] }
    }

    /// Builds a word from letters, freely reducing adjacent inverse pairs.
    pub fn from_letters(letters: Vec<Letter>) -> FreeWord {
        let mut reduced: Vec<Letter> = Vec::with_capacity(letters.len());
        for letter in letters {
            if reduced.last().is_some_and(|last| last.cancels(&letter)) {
                reduced.pop();
            } else {
                reduced.push(letter);
            }
        }
        FreeWord { letters: reduced }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> FreeWord {
        FreeWord {
            letters: self
                .letters
                .iter()
                .rev()
                .map(|l| Letter { gen: l.gen, sign: -l.sign })
                .collect(),
        }
    }

    pub fn concat(&self, other: &FreeWord) -> FreeWord {
        let mut letters = self.letters.clone();
        for letter in &other.letters {
            if letters.last().is_some_and(|last| last.cancels(letter)) {
                letters.pop();
            } else {
                letters.push(*letter);
            }
        }
        FreeWord { letters }
    }

    pub fn pow(&self, n: i32) -> FreeWord {
        let base = if n >= 0 { self.clone() } else { self.inverse() };
        let mut acc = FreeWord::identity();
        for _ in 0..n.unsigned_abs() {
            acc = acc.concat(&base);
        }
        acc
    }

    /// `p * self * p^-1`.
    pub fn conjugated_by(&self, p: &FreeWord) -> FreeWord {
        p.concat(self).concat(&p.inverse())
    }

    /// `[a_j, b_j] = a_j b_j a_j^-1 b_j^-1`.
    pub fn commutator(j: u16) -> FreeWord {
        let a = FreeWord::a(j);
        let b = FreeWord::b(j);
        a.concat(&b).concat(&a.inverse()).concat(&b.inverse())
    }

    /// Product of all handle commutators; the boundary word of the genus `g`
    /// surface with one disk removed.
    pub fn surface_relator(genus: u16) -> FreeWord {
        let mut acc = FreeWord::identity();
        for j in 1..=genus {
            acc = acc.concat(&FreeWord::commutator(j));
        }
        acc
    }

    /// Largest generator index used, 0 for the empty word.
    pub fn max_generator(&self) -> u16 {
        self.letters.iter().map(|l| l.gen).max().unwrap_or(0)
    }

    /// Renumbers every generator up by `2 * genus_shift` handles.
    pub fn shifted(&self, genus_shift: u16) -> FreeWord {
        FreeWord {
            letters: self
                .letters
                .iter()
                .map(|l| Letter { gen: l.gen + 2 * genus_shift, sign: l.sign })
                .collect(),
        }
    }

    /// Exponent-sum vector of length `2 * genus`.
    pub fn abelianize(&self, genus: u16) -> Result<Vec<i64>> {
        let mut out = vec![0i64; 2 * genus as usize];
        for letter in &self.letters {
            let slot = (letter.gen - 1) as usize;
            if slot >= out.len() {
                return Err(Error::MalformedWord(format!(
                    "generator {} exceeds genus {} surface",
                    letter.gen, genus
                )));
            }
            out[slot] += letter.sign as i64;
        }
        Ok(out)
    }
}

impl std::ops::Mul for &FreeWord {
    type Output = FreeWord;
    fn mul(self, rhs: &FreeWord) -> FreeWord {
        self.concat(rhs)
    }
}

impl std::str::FromStr for FreeWord {
    type Err = Error;

    /// Parses the display format: space-separated letters like `a1 b2^-1`,
    /// or `1` for the identity.  General integer exponents are accepted.
    fn from_str(s: &str) -> Result<FreeWord> {
        let trimmed = s.trim();
        if trimmed.is_empty() || trimmed == "1" {
            return Ok(FreeWord::identity());
        }
        let mut word = FreeWord::identity();
        for token in trimmed.split_whitespace() {
            let (name, exponent) = match token.split_once('^') {
                Some((name, e)) => {
                    let e: i32 = e
                        .parse()
                        .map_err(|_| Error::MalformedWord(format!("bad exponent in `{token}`")))?;
                    (name, e)
                }
                None => (token, 1),
            };
            let mut chars = name.chars();
            let kind = chars.next();
            let index: u16 = chars
                .as_str()
                .parse()
                .map_err(|_| Error::MalformedWord(format!("bad generator in `{token}`")))?;
            if index == 0 {
                return Err(Error::MalformedWord(format!("generator indices are 1-based: `{token}`")));
            }
            let base = match kind {
                Some('a') => FreeWord::a(index),
                Some('b') => FreeWord::b(index),
                _ => return Err(Error::MalformedWord(format!("unknown generator in `{token}`"))),
            };
            word = word.concat(&base.pow(exponent));
        }
        Ok(word)
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for l in &self.letters {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            let kind = if l.gen % 2 == 1 { 'a' } else { 'b' };
            let index = l.gen.div_ceil(2);
            if l.sign > 0 {
                write!(f, "{kind}{index}")?;
            } else {
                write!(f, "{kind}{index}^-1")?;
            }
        }
        Ok(())
    }
}
