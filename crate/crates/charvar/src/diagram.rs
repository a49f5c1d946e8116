//! Pointed Heegaard diagrams as systems of attaching words.
//!
//! A genus `g` diagram stores two families of `g` words in the handle
//! generators.  Each family must be homologically independent (its
//! abelianization matrix has full rank over `Z`), which is the word-level
//! shadow of the curves cutting the surface into a planar piece.  The moves
//! below (isotopy, handleslide, stabilization) act on words and preserve the
//! underlying 3-manifold; connected sum concatenates diagrams.

use crate::error::{Error, Result};
use crate::snf::{cokernel_invariants, integer_rank, AbelianInvariants};
use crate::word::FreeWord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeegaardDiagram {
    pub genus: u16,
    pub alpha: Vec<FreeWord>,
    pub beta: Vec<FreeWord>,
    pub name: String,
}

/// Which attaching family a move acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFamily {
    Alpha,
    Beta,
}

/// Families with known expected censuses, recovered from constructor names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardFamily {
    S3 { genus: u16 },
    S2xS1,
    Lens { p: u64, q: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub pass: bool,
    pub reasons: Vec<String>,
}

impl HeegaardDiagram {
    pub fn new(
        genus: u16,
        alpha: Vec<FreeWord>,
        beta: Vec<FreeWord>,
        name: impl Into<String>,
    ) -> HeegaardDiagram {
        HeegaardDiagram { genus, alpha, beta, name: name.into() }
    }

    /// Standard genus `g` diagram of the 3-sphere: alpha curves are the `a`
    /// handles, beta curves the `b` handles.
    pub fn s3_genus(genus: u16) -> HeegaardDiagram {
        let alpha = (1..=genus).map(FreeWord::a).collect();
        let beta = (1..=genus).map(FreeWord::b).collect();
        HeegaardDiagram::new(genus, alpha, beta, format!("s3_genus({genus})"))
    }

    /// Genus 1 diagram of S^2 x S^1: both curves are the meridian.
    pub fn s2xs1() -> HeegaardDiagram {
        HeegaardDiagram::new(1, vec![FreeWord::a(1)], vec![FreeWord::a(1)], "s2xs1")
    }

    /// Genus 1 diagram of the lens space L(p, q): alpha is the meridian and
    /// beta is `a^q b^p`.
    pub fn lens(p: u64, q: u64) -> Result<HeegaardDiagram> {
        if p == 0 {
            return Err(Error::InvalidParameter("lens space order p must be >= 1".into()));
        }
        if gcd(p, q) != 1 {
            return Err(Error::InvalidParameter(format!("lens({p}, {q}) needs gcd(p, q) = 1")));
        }
        let beta = FreeWord::a(1).pow(q as i32).concat(&FreeWord::b(1).pow(p as i32));
        Ok(HeegaardDiagram::new(1, vec![FreeWord::a(1)], vec![beta], format!("lens({p},{q})")))
    }

    /// Parses a constructor name back into its family, if it is one.
    pub fn standard_family(&self) -> Option<StandardFamily> {
        if self.name == "s2xs1" {
            return Some(StandardFamily::S2xS1);
        }
        if let Some(rest) = self.name.strip_prefix("s3_genus(").and_then(|r| r.strip_suffix(')')) {
            return rest.parse().ok().map(|genus| StandardFamily::S3 { genus });
        }
        if let Some(rest) = self.name.strip_prefix("lens(").and_then(|r| r.strip_suffix(')')) {
            let (p, q) = rest.split_once(',')?;
            return Some(StandardFamily::Lens { p: p.parse().ok()?, q: q.parse().ok()? });
        }
        None
    }

    fn family_words(&self, family: CurveFamily) -> &[FreeWord] {
        match family {
            CurveFamily::Alpha => &self.alpha,
            CurveFamily::Beta => &self.beta,
        }
    }

    fn family_words_mut(&mut self, family: CurveFamily) -> &mut Vec<FreeWord> {
        match family {
            CurveFamily::Alpha => &mut self.alpha,
            CurveFamily::Beta => &mut self.beta,
        }
    }

    /// Word-level isotopy: replaces curve `j` by its conjugate under `path`.
    pub fn isotopy(&self, family: CurveFamily, j: usize, path: &FreeWord) -> Result<HeegaardDiagram> {
        if j >= self.genus as usize {
            return Err(Error::InvalidMove(format!("curve index {j} out of range")));
        }
        if path.max_generator() > 2 * self.genus {
            return Err(Error::InvalidMove("isotopy path leaves the surface generators".into()));
        }
        let mut out = self.clone();
        let words = out.family_words_mut(family);
        words[j] = words[j].conjugated_by(path);
        out.name = format!("{}+iso", self.name);
        Ok(out)
    }

    /// Handleslide of curve `j` over curve `k` along `path`:
    /// `curve_j <- curve_j * path * curve_k^sign * path^-1`.
    pub fn handleslide(
        &self,
        family: CurveFamily,
        j: usize,
        k: usize,
        path: &FreeWord,
        sign: i8,
    ) -> Result<HeegaardDiagram> {
        let g = self.genus as usize;
        if j >= g || k >= g {
            return Err(Error::InvalidMove(format!("curve indices ({j}, {k}) out of range for genus {g}")));
        }
        if j == k {
            return Err(Error::InvalidMove("cannot slide a curve over itself".into()));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidMove(format!("slide sign must be +-1, got {sign}")));
        }
        if path.max_generator() > 2 * self.genus {
            return Err(Error::InvalidMove("slide path leaves the surface generators".into()));
        }
        let mut out = self.clone();
        let words = out.family_words_mut(family);
        let other = if sign > 0 { words[k].clone() } else { words[k].inverse() };
        words[j] = words[j].concat(&other.conjugated_by(path));
        out.name = format!("{}+slide", self.name);
        Ok(out)
    }

    /// Adds one standard handle: a new `a` curve to alpha and `b` curve to
    /// beta.  The manifold is unchanged.
    pub fn stabilize(&self) -> HeegaardDiagram {
        let g = self.genus + 1;
        let mut alpha = self.alpha.clone();
        alpha.push(FreeWord::a(g));
        let mut beta = self.beta.clone();
        beta.push(FreeWord::b(g));
        HeegaardDiagram::new(g, alpha, beta, format!("{}+stab", self.name))
    }

    /// Connected sum: the second diagram's handles are renumbered to follow
    /// the first's.
    pub fn connected_sum(&self, other: &HeegaardDiagram) -> HeegaardDiagram {
        let shift = self.genus;
        let mut alpha = self.alpha.clone();
        alpha.extend(other.alpha.iter().map(|w| w.shifted(shift)));
        let mut beta = self.beta.clone();
        beta.extend(other.beta.iter().map(|w| w.shifted(shift)));
        HeegaardDiagram::new(
            self.genus + other.genus,
            alpha,
            beta,
            format!("{}#{}", self.name, other.name),
        )
    }

    /// Exponent-sum matrix of one family, `g` rows by `2g` columns.
    pub fn abelianization_matrix(&self, family: CurveFamily) -> Result<Vec<Vec<i64>>> {
        self.family_words(family).iter().map(|w| w.abelianize(self.genus)).collect()
    }

    /// Structural checks: curve counts and homological independence of each
    /// family.  Collects every failure rather than stopping at the first.
    pub fn validate(&self) -> ValidationReport {
        let mut reasons = Vec::new();
        let g = self.genus as usize;
        if self.alpha.len() != g {
            reasons.push(format!("expected {g} alpha curves, found {}", self.alpha.len()));
        }
        if self.beta.len() != g {
            reasons.push(format!("expected {g} beta curves, found {}", self.beta.len()));
        }
        for (label, family) in [("alpha", CurveFamily::Alpha), ("beta", CurveFamily::Beta)] {
            if self.family_words(family).len() != g {
                continue;
            }
            match self.abelianization_matrix(family) {
                Err(e) => reasons.push(format!("{label}: {e}")),
                Ok(m) => {
                    if g > 0 {
                        match integer_rank(&m) {
                            Ok(rank) if rank == g => {}
                            Ok(rank) => reasons.push(format!(
                                "{label} curves span homology rank {rank}, expected {g}"
                            )),
                            Err(e) => reasons.push(format!("{label}: {e}")),
                        }
                    }
                }
            }
        }
        ValidationReport { pass: reasons.is_empty(), reasons }
    }

    /// First homology of the underlying closed 3-manifold: the cokernel of
    /// the stacked abelianization matrix of both families.
    pub fn h1_invariants(&self) -> Result<AbelianInvariants> {
        let mut rows = self.abelianization_matrix(CurveFamily::Alpha)?;
        rows.extend(self.abelianization_matrix(CurveFamily::Beta)?);
        cokernel_invariants(&rows, 2 * self.genus as usize)
    }

    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(DiagramJson::from(self))?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(crate::report::canonical_json(&self.to_json_value()?))
    }

    pub fn from_json_str(s: &str) -> Result<HeegaardDiagram> {
        let raw: DiagramJson = serde_json::from_str(s)?;
        raw.try_into()
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Wire format.  A letter is `[kind, index, sign]` with `kind` one of
/// `"a"`, `"b"`, `index` between 1 and the genus, and `sign` +-1.
#[derive(Serialize, Deserialize)]
struct DiagramJson {
    alpha: Vec<Vec<(String, u16, i8)>>,
    beta: Vec<Vec<(String, u16, i8)>>,
    genus: u16,
    name: String,
}

fn word_to_json(w: &FreeWord) -> Vec<(String, u16, i8)> {
    w.letters()
        .iter()
        .map(|l| {
            let kind = if l.gen % 2 == 1 { "a" } else { "b" };
            (kind.to_string(), l.gen.div_ceil(2), l.sign)
        })
        .collect()
}

fn word_from_json(letters: &[(String, u16, i8)], genus: u16) -> Result<FreeWord> {
    let mut out = Vec::with_capacity(letters.len());
    for (kind, index, sign) in letters {
        if *index == 0 || *index > genus {
            return Err(Error::MalformedWord(format!(
                "handle index {index} outside 1..={genus}"
            )));
        }
        let gen = match kind.as_str() {
            "a" => 2 * index - 1,
            "b" => 2 * index,
            other => return Err(Error::MalformedWord(format!("unknown curve kind {other:?}"))),
        };
        out.push(crate::word::Letter::new(gen, *sign)?);
    }
    Ok(FreeWord::from_letters(out))
}

impl From<&HeegaardDiagram> for DiagramJson {
    fn from(d: &HeegaardDiagram) -> DiagramJson {
        DiagramJson {
            alpha: d.alpha.iter().map(word_to_json).collect(),
            beta: d.beta.iter().map(word_to_json).collect(),
            genus: d.genus,
            name: d.name.clone(),
        }
    }
}

impl TryFrom<DiagramJson> for HeegaardDiagram {
    type Error = Error;
    fn try_from(raw: DiagramJson) -> Result<HeegaardDiagram> {
        let alpha =
            raw.alpha.iter().map(|w| word_from_json(w, raw.genus)).collect::<Result<Vec<_>>>()?;
        let beta =
            raw.beta.iter().map(|w| word_from_json(w, raw.genus)).collect::<Result<Vec<_>>>()?;
        Ok(HeegaardDiagram { genus: raw.genus, alpha, beta, name: raw.name })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_families_validate() {
        for d in [
            HeegaardDiagram::s3_genus(0),
            HeegaardDiagram::s3_genus(3),
            HeegaardDiagram::s2xs1(),
            HeegaardDiagram::lens(5, 2).unwrap(),
        ] {
            let report = d.validate();
            assert!(report.pass, "{}: {:?}", d.name, report.reasons);
        }
    }

    #[test]
    fn lens_words_and_parameters() {
        let d = HeegaardDiagram::lens(2, 1).unwrap();
        assert_eq!(d.beta[0].to_string(), "a1 b1 b1");
        assert_eq!(
            HeegaardDiagram::lens(5, 2).unwrap().beta[0].abelianize(1).unwrap(),
            vec![2, 5]
        );
        assert!(HeegaardDiagram::lens(4, 2).is_err(), "gcd(4, 2) = 2 is not a lens space");
        assert!(HeegaardDiagram::lens(0, 1).is_err());
    }

    #[test]
    fn family_recovery_from_names() {
        assert_eq!(
            HeegaardDiagram::lens(7, 2).unwrap().standard_family(),
            Some(StandardFamily::Lens { p: 7, q: 2 })
        );
        assert_eq!(
            HeegaardDiagram::s3_genus(2).standard_family(),
            Some(StandardFamily::S3 { genus: 2 })
        );
        assert_eq!(HeegaardDiagram::s2xs1().standard_family(), Some(StandardFamily::S2xS1));
        let summed = HeegaardDiagram::s2xs1().connected_sum(&HeegaardDiagram::s2xs1());
        assert_eq!(summed.standard_family(), None);
    }

    #[test]
    fn validation_catches_dependent_curves() {
        let bad = HeegaardDiagram::new(
            2,
            vec![FreeWord::a(1), FreeWord::a(1)],
            vec![FreeWord::b(1), FreeWord::b(2)],
            "dependent",
        );
        let report = bad.validate();
        assert!(!report.pass);
        assert!(report.reasons.iter().any(|r| r.contains("alpha")), "{:?}", report.reasons);
    }

    #[test]
    fn validation_catches_wrong_counts() {
        let bad = HeegaardDiagram::new(2, vec![FreeWord::a(1)], vec![FreeWord::b(1)], "short");
        assert!(!bad.validate().pass);
    }

    #[test]
    fn h1_of_standard_families() {
        assert!(HeegaardDiagram::s3_genus(3).h1_invariants().unwrap().is_trivial());
        let s2s1 = HeegaardDiagram::s2xs1().h1_invariants().unwrap();
        assert_eq!(s2s1, AbelianInvariants { free_rank: 1, torsion: vec![] });
        let lens = HeegaardDiagram::lens(8, 3).unwrap().h1_invariants().unwrap();
        assert_eq!(lens, AbelianInvariants { free_rank: 0, torsion: vec![8] });
    }

    #[test]
    fn connected_sum_adds_homology() {
        let sum = HeegaardDiagram::lens(2, 1)
            .unwrap()
            .connected_sum(&HeegaardDiagram::lens(3, 1).unwrap());
        assert_eq!(sum.genus, 2);
        assert!(sum.validate().pass);
        let h1 = sum.h1_invariants().unwrap();
        assert_eq!(h1.free_rank, 0);
        assert_eq!(h1.torsion_order(), 6);

        let mixed = HeegaardDiagram::lens(3, 1).unwrap().connected_sum(&HeegaardDiagram::s2xs1());
        let h1 = mixed.h1_invariants().unwrap();
        assert_eq!(h1.free_rank, 1);
        assert_eq!(h1.torsion, vec![3]);
    }

    #[test]
    fn moves_preserve_h1_and_validity() {
        let d = HeegaardDiagram::lens(2, 1)
            .unwrap()
            .connected_sum(&HeegaardDiagram::lens(3, 1).unwrap());
        let before = d.h1_invariants().unwrap();

        let path = FreeWord::a(1).concat(&FreeWord::b(2).inverse());
        let slid = d.handleslide(CurveFamily::Beta, 0, 1, &path, -1).unwrap();
        assert!(slid.validate().pass);
        assert_eq!(slid.h1_invariants().unwrap(), before);

        let iso = d.isotopy(CurveFamily::Alpha, 1, &path).unwrap();
        assert!(iso.validate().pass);
        assert_eq!(iso.h1_invariants().unwrap(), before);

        let stab = d.stabilize();
        assert!(stab.validate().pass);
        assert_eq!(stab.h1_invariants().unwrap(), before);
        assert_eq!(stab.genus, 3);
    }

    #[test]
    fn handleslide_rejects_bad_indices() {
        let d = HeegaardDiagram::s3_genus(2);
        let path = FreeWord::identity();
        assert!(d.handleslide(CurveFamily::Alpha, 0, 0, &path, 1).is_err());
        assert!(d.handleslide(CurveFamily::Alpha, 0, 2, &path, 1).is_err());
        assert!(d.handleslide(CurveFamily::Alpha, 0, 1, &path, 2).is_err());
        assert!(d.handleslide(CurveFamily::Alpha, 0, 1, &FreeWord::a(3), 1).is_err());
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let d = HeegaardDiagram::lens(5, 2)
            .unwrap()
            .connected_sum(&HeegaardDiagram::s2xs1())
            .stabilize();
        let first = d.to_json_string().unwrap();
        let back = HeegaardDiagram::from_json_str(&first).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_json_string().unwrap(), first);
    }

    #[test]
    fn json_schema_shape_is_stable() {
        let d = HeegaardDiagram::lens(2, 1).unwrap();
        assert_eq!(
            d.to_json_string().unwrap(),
            r#"{"alpha":[[["a",1,1]]],"beta":[[["a",1,1],["b",1,1],["b",1,1]]],"genus":1,"name":"lens(2,1)"}"#
        );
    }

    #[test]
    fn json_rejects_out_of_range_letters() {
        let s = r#"{"alpha":[[["a",2,1]]],"beta":[[["b",1,1]]],"genus":1,"name":"bad"}"#;
        assert!(HeegaardDiagram::from_json_str(s).is_err());
        let s = r#"{"alpha":[[["c",1,1]]],"beta":[[["b",1,1]]],"genus":1,"name":"bad"}"#;
        assert!(HeegaardDiagram::from_json_str(s).is_err());
    }
}
