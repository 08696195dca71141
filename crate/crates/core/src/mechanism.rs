//! Species, complexes, reaction steps, mechanisms, and their text grammar.
//!
//! Grammar:
//! ```text
//! mechanism := step { (";" | newline) step }
//! step      := complex ("<=>" | "->") complex
//! complex   := term { "+" term }
//! term      := [ integer ] identifier
//! ```
//! Whitespace between tokens is insignificant.

use crate::{Error, Result};
use std::fmt::Write as _;

pub type SpeciesId = usize;

/// A non-empty linear combination of species with positive integer
/// coefficients, e.g. `2X` or `X + Y`. Terms are kept sorted by species id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Complex {
    terms: Vec<(SpeciesId, u32)>,
}

impl Complex {
    pub fn new(mut terms: Vec<(SpeciesId, u32)>) -> Result<Self> {
        terms.sort_unstable_by_key(|&(s, _)| s);
        // merge duplicate species: "X + X" means 2X
        let mut merged: Vec<(SpeciesId, u32)> = Vec::with_capacity(terms.len());
        for (s, c) in terms {
            if c == 0 {
                return Err(Error::Mechanism("zero coefficient in complex".into()));
            }
            match merged.last_mut() {
                Some((ls, lc)) if *ls == s => *lc += c,
                _ => merged.push((s, c)),
            }
        }
        if merged.is_empty() {
            return Err(Error::Mechanism("empty complex".into()));
        }
        Ok(Complex { terms: merged })
    }

    pub fn terms(&self) -> &[(SpeciesId, u32)] {
        &self.terms
    }

    /// Sum of stoichiometric coefficients; a complex is "short" if this is <= 2.
    pub fn order(&self) -> u32 {
        self.terms.iter().map(|&(_, c)| c).sum()
    }

    pub fn coeff(&self, species: SpeciesId) -> u32 {
        self.terms
            .iter()
            .find(|&&(s, _)| s == species)
            .map_or(0, |&(_, c)| c)
    }

    pub fn species(&self) -> impl Iterator<Item = SpeciesId> + '_ {
        self.terms.iter().map(|&(s, _)| s)
    }

    /// Terms are listed in species-name order, so the text never depends on
    /// internal numbering (which follows first occurrence in parsed input).
    pub fn render(&self, names: &[String]) -> String {
        let mut terms: Vec<&(SpeciesId, u32)> = self.terms.iter().collect();
        terms.sort_by(|a, b| names[a.0].cmp(&names[b.0]));
        let mut out = String::new();
        for (i, &&(s, c)) in terms.iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            if c != 1 {
                let _ = write!(out, "{} ", c);
            }
            out.push_str(&names[s]);
        }
        out
    }
}

/// One reaction step `reactant -> product` or `reactant <=> product`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReactionStep {
    pub reactant: Complex,
    pub product: Complex,
    pub reversible: bool,
}

impl ReactionStep {
    pub fn new(reactant: Complex, product: Complex, reversible: bool) -> Result<Self> {
        if reactant == product {
            return Err(Error::Mechanism(
                "step with reactant equal to product does not affect concentrations".into(),
            ));
        }
        Ok(ReactionStep {
            reactant,
            product,
            reversible,
        })
    }

    /// The two sides as an unordered pair, for duplicate detection.
    pub fn unordered_key(&self) -> (Complex, Complex) {
        let (a, b) = (self.reactant.clone(), self.product.clone());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        format!(
            "{} {} {}",
            self.reactant.render(names),
            if self.reversible { "<=>" } else { "->" },
            self.product.render(names)
        )
    }

    /// Rendering with a reversible step oriented so its lexicographically
    /// smaller side is the reactant. Irreversible steps keep their direction.
    pub fn render_canonical(&self, names: &[String]) -> String {
        let r = self.reactant.render(names);
        let p = self.product.render(names);
        if self.reversible && p < r {
            format!("{} <=> {}", p, r)
        } else {
            format!("{} {} {}", r, if self.reversible { "<=>" } else { "->" }, p)
        }
    }
}

/// A set of reaction steps over a common species list.
///
/// R counts step pairs; P counts directed steps (a reversible step is two).
#[derive(Debug, Clone)]
pub struct Mechanism {
    species: Vec<String>,
    steps: Vec<ReactionStep>,
}

impl Mechanism {
    pub fn new(species: Vec<String>, steps: Vec<ReactionStep>) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::Mechanism("mechanism needs at least one species".into()));
        }
        for name in &species {
            if !is_identifier(name) {
                return Err(Error::Mechanism(format!("invalid species name {:?}", name)));
            }
        }
        let mut sorted = species.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != species.len() {
            return Err(Error::Mechanism("duplicate species name".into()));
        }
        if steps.is_empty() {
            return Err(Error::Mechanism("mechanism needs at least one step".into()));
        }
        let mut keys: Vec<_> = steps.iter().map(|s| s.unordered_key()).collect();
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Mechanism(
                "duplicate step (same complex pair appears twice)".into(),
            ));
        }
        for step in &steps {
            for s in step.reactant.species().chain(step.product.species()) {
                if s >= species.len() {
                    return Err(Error::Mechanism("species index out of range".into()));
                }
            }
        }
        Ok(Mechanism { species, steps })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text, None).parse()
    }

    /// Parse against a fixed species list; unknown names are an error and the
    /// given order is kept even for species the text does not mention.
    pub fn parse_with_species(text: &str, species: &[String]) -> Result<Self> {
        Parser::new(text, Some(species)).parse()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species
    }

    pub fn m(&self) -> usize {
        self.species.len()
    }

    pub fn r(&self) -> usize {
        self.steps.len()
    }

    /// Directed step count: reversible steps count twice.
    pub fn p(&self) -> usize {
        self.steps.iter().map(|s| if s.reversible { 2 } else { 1 }).sum()
    }

    pub fn steps(&self) -> &[ReactionStep] {
        &self.steps
    }

    pub fn reversible(&self) -> bool {
        self.steps.iter().all(|s| s.reversible)
    }

    /// Reactant-side stoichiometric matrix, M x R, column r for step r.
    pub fn alpha(&self) -> Vec<Vec<i64>> {
        self.side_matrix(|s| &s.reactant)
    }

    /// Product-side stoichiometric matrix, M x R.
    pub fn beta(&self) -> Vec<Vec<i64>> {
        self.side_matrix(|s| &s.product)
    }

    /// gamma = beta - alpha as columns; no column is zero.
    pub fn gamma_columns(&self) -> Vec<Vec<i64>> {
        self.steps
            .iter()
            .map(|step| {
                let mut col = vec![0i64; self.m()];
                for &(s, c) in step.product.terms() {
                    col[s] += c as i64;
                }
                for &(s, c) in step.reactant.terms() {
                    col[s] -= c as i64;
                }
                col
            })
            .collect()
    }

    fn side_matrix(&self, side: impl Fn(&ReactionStep) -> &Complex) -> Vec<Vec<i64>> {
        let mut rows = vec![vec![0i64; self.r()]; self.m()];
        for (r, step) in self.steps.iter().enumerate() {
            for &(s, c) in side(step).terms() {
                rows[s][r] = c as i64;
            }
        }
        rows
    }

    /// Species indices that occur in at least one step.
    pub fn used_species(&self) -> Vec<SpeciesId> {
        let mut used = vec![false; self.m()];
        for step in &self.steps {
            for s in step.reactant.species().chain(step.product.species()) {
                used[s] = true;
            }
        }
        (0..self.m()).filter(|&s| used[s]).collect()
    }

    /// Canonical text: steps in their given order and orientation.
    /// `parse(serialize(m))` reproduces `m` exactly.
    pub fn serialize(&self) -> String {
        self.steps
            .iter()
            .map(|s| s.render(&self.species))
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Identifier invariant under step reordering and reversible-step
    /// orientation flips: canonically oriented steps, sorted, joined.
    pub fn canonical_id(&self) -> String {
        let mut rendered: Vec<String> = self
            .steps
            .iter()
            .map(|s| s.render_canonical(&self.species))
            .collect();
        rendered.sort_unstable();
        rendered.join("; ")
    }
}

/// Rate coefficients for a mechanism: forward per step, backward exactly
/// zero on irreversible steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAssignment {
    pub k_plus: Vec<f64>,
    pub k_minus: Vec<f64>,
}

impl RateAssignment {
    pub fn new(mech: &Mechanism, k_plus: Vec<f64>, k_minus: Vec<f64>) -> Result<Self> {
        if k_plus.len() != mech.r() || k_minus.len() != mech.r() {
            return Err(Error::Mechanism(format!(
                "rate vectors must have length R = {}",
                mech.r()
            )));
        }
        for (r, step) in mech.steps().iter().enumerate() {
            if !k_plus[r].is_finite() || k_plus[r] <= 0.0 {
                return Err(Error::Mechanism(format!("k{} must be positive", r + 1)));
            }
            if step.reversible {
                if !k_minus[r].is_finite() || k_minus[r] <= 0.0 {
                    return Err(Error::Mechanism(format!("k-{} must be positive", r + 1)));
                }
            } else if k_minus[r] != 0.0 {
                return Err(Error::Mechanism(format!(
                    "step {} is irreversible, k-{} must be absent",
                    r + 1,
                    r + 1
                )));
            }
        }
        Ok(RateAssignment { k_plus, k_minus })
    }

    /// Coefficient names in step order, backward interleaved after forward:
    /// k1, k-1, k2, ... (k-r only for reversible steps).
    pub fn coefficient_names(mech: &Mechanism) -> Vec<String> {
        let mut names = Vec::with_capacity(mech.p());
        for (r, step) in mech.steps().iter().enumerate() {
            names.push(format!("k{}", r + 1));
            if step.reversible {
                names.push(format!("k-{}", r + 1));
            }
        }
        names
    }

    /// Values in `coefficient_names` order (length P).
    pub fn flat(&self, mech: &Mechanism) -> Vec<f64> {
        let mut values = Vec::with_capacity(mech.p());
        for (r, step) in mech.steps().iter().enumerate() {
            values.push(self.k_plus[r]);
            if step.reversible {
                values.push(self.k_minus[r]);
            }
        }
        values
    }

    /// Inverse of `flat`. Values are taken as-is (no positivity check), so
    /// unconstrained fits can round-trip sign-pathological estimates.
    pub fn from_flat(mech: &Mechanism, values: &[f64]) -> Result<Self> {
        if values.len() != mech.p() {
            return Err(Error::Mechanism(format!(
                "expected {} coefficients, got {}",
                mech.p(),
                values.len()
            )));
        }
        let mut k_plus = Vec::with_capacity(mech.r());
        let mut k_minus = Vec::with_capacity(mech.r());
        let mut it = values.iter();
        for step in mech.steps() {
            k_plus.push(*it.next().unwrap());
            k_minus.push(if step.reversible {
                *it.next().unwrap()
            } else {
                0.0
            });
        }
        Ok(RateAssignment { k_plus, k_minus })
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Generated species names used by enumeration: X, Y, Z, then A, B, ...
pub fn default_species_names(m: usize) -> Vec<String> {
    const LETTERS: &[u8] = b"XYZABCDEFGHIJKLMNOPQRSTUVW";
    (0..m)
        .map(|i| {
            if i < LETTERS.len() {
                (LETTERS[i] as char).to_string()
            } else {
                format!("S{}", i + 1)
            }
        })
        .collect()
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    species: Vec<String>,
    fixed_species: bool,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, species_hint: Option<&[String]>) -> Self {
        Parser {
            text,
            pos: 0,
            species: species_hint.map(<[String]>::to_vec).unwrap_or_default(),
            fixed_species: species_hint.is_some(),
        }
    }

    fn parse(mut self) -> Result<Mechanism> {
        let mut steps = Vec::new();
        loop {
            self.skip_ws(false);
            if self.pos >= self.text.len() {
                break;
            }
            steps.push(self.step()?);
            self.skip_ws(true);
            if self.pos < self.text.len() {
                let rest = &self.text[self.pos..];
                if rest.starts_with(';') || rest.starts_with('\n') {
                    self.pos += 1;
                } else {
                    return Err(self.error("expected \";\" or newline between steps"));
                }
            }
        }
        if steps.is_empty() {
            return Err(self.error("empty mechanism"));
        }
        Mechanism::new(self.species, steps)
    }

    fn step(&mut self) -> Result<ReactionStep> {
        let reactant = self.complex()?;
        self.skip_ws(true);
        let reversible = if self.eat("<=>") {
            true
        } else if self.eat("->") {
            false
        } else {
            return Err(self.error("expected \"<=>\" or \"->\""));
        };
        let product = self.complex()?;
        ReactionStep::new(reactant, product, reversible).map_err(|e| match e {
            Error::Mechanism(msg) => self.error(&msg),
            other => other,
        })
    }

    fn complex(&mut self) -> Result<Complex> {
        let mut terms = vec![self.term()?];
        loop {
            self.skip_ws(true);
            if self.eat("+") {
                terms.push(self.term()?);
            } else {
                break;
            }
        }
        Complex::new(terms).map_err(|e| match e {
            Error::Mechanism(msg) => self.error(&msg),
            other => other,
        })
    }

    fn term(&mut self) -> Result<(SpeciesId, u32)> {
        self.skip_ws(true);
        let bytes = self.text.as_bytes();
        let mut coeff: u32 = 1;
        if self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
            let start = self.pos;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            coeff = self.text[start..self.pos]
                .parse()
                .map_err(|_| self.error("coefficient out of range"))?;
            if coeff == 0 {
                return Err(self.error("zero coefficient"));
            }
            self.skip_ws(true);
        }
        let start = self.pos;
        if self.pos >= bytes.len() || !bytes[self.pos].is_ascii_alphabetic() {
            return Err(self.error("expected species identifier"));
        }
        self.pos += 1;
        while self.pos < bytes.len()
            && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        let id = match self.species.iter().position(|s| s == name) {
            Some(id) => id,
            None if self.fixed_species => {
                return Err(self.error(&format!("unknown species {:?}", name)));
            }
            None => {
                self.species.push(name.to_string());
                self.species.len() - 1
            }
        };
        Ok((id, coeff))
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    // newlines are step separators, so inside a step only spaces/tabs/CR skip
    fn skip_ws(&mut self, inside_step: bool) {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() {
            match bytes[self.pos] {
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'\n' if !inside_step => self.pos += 1,
                _ => break,
            }
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::Parse {
            position: self.pos,
            message: message.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_reversible_pair() {
        let m = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        assert_eq!(m.m(), 2);
        assert_eq!(m.r(), 2);
        assert_eq!(m.p(), 4);
        assert_eq!(m.species_names(), &names(&["X", "Y"]));
        assert_eq!(m.gamma_columns(), vec![vec![-1, 1], vec![-1, 1]]);
    }

    #[test]
    fn parses_irreversible_chain() {
        let m = Mechanism::parse("X -> Y; Y -> Z").unwrap();
        assert_eq!(m.m(), 3);
        assert_eq!(m.r(), 2);
        assert_eq!(m.p(), 2);
        assert!(!m.reversible());
    }

    #[test]
    fn rejects_identity_step() {
        assert!(Mechanism::parse("X <=> X").is_err());
        assert!(Mechanism::parse("2 X <=> 2 X").is_err());
        assert!(Mechanism::parse("X + Y <=> Y + X").is_err());
    }

    #[test]
    fn rejects_duplicate_step() {
        assert!(Mechanism::parse("X <=> Y; Y <=> X").is_err());
        assert!(Mechanism::parse("X -> Y; X -> Y").is_err());
    }

    #[test]
    fn rejects_unknown_species_with_hint() {
        let err = Mechanism::parse_with_species("X <=> W", &names(&["X", "Y"]));
        assert!(err.is_err());
    }

    #[test]
    fn species_hint_keeps_order_and_unused_names() {
        let m = Mechanism::parse_with_species("Y <=> Z", &names(&["X", "Y", "Z"])).unwrap();
        assert_eq!(m.m(), 3);
        assert_eq!(m.used_species(), vec![1, 2]);
    }

    #[test]
    fn merges_repeated_terms() {
        let m = Mechanism::parse("X + X <=> Y").unwrap();
        assert_eq!(m.serialize(), "2 X <=> Y");
    }

    #[test]
    fn serialize_round_trip() {
        for text in ["X <=> Y; 2 X <=> X + Y", "X -> Y", "2 X <=> Y", "X + Y <=> A + Z"] {
            let m = Mechanism::parse(text).unwrap();
            assert_eq!(m.serialize(), text);
            let again = Mechanism::parse(&m.serialize()).unwrap();
            assert_eq!(again.serialize(), text);
        }
    }

    #[test]
    fn text_identity_survives_species_renumbering() {
        // first-occurrence numbering differs, rendered text must not
        let m = Mechanism::parse("X + Y <=> Z + A").unwrap();
        assert_eq!(m.serialize(), "X + Y <=> A + Z");
        let a = Mechanism::parse("2 Y <=> X + Y; X <=> Y").unwrap();
        let b = Mechanism::parse("X <=> Y; 2 Y <=> X + Y").unwrap();
        assert_eq!(a.canonical_id(), b.canonical_id());
    }

    #[test]
    fn alpha_beta_gamma_consistent() {
        let m = Mechanism::parse("2 X <=> X + Y; X <=> Y").unwrap();
        let (a, b, g) = (m.alpha(), m.beta(), m.gamma_columns());
        for s in 0..m.m() {
            for r in 0..m.r() {
                assert!(a[s][r] >= 0 && b[s][r] >= 0);
                assert_eq!(g[r][s], b[s][r] - a[s][r]);
            }
        }
    }

    #[test]
    fn canonical_id_invariances() {
        let a = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let b = Mechanism::parse("2 X <=> X + Y; X <=> Y").unwrap();
        assert_eq!(a.canonical_id(), b.canonical_id());

        let c = Mechanism::parse("X <=> Y").unwrap();
        let d = Mechanism::parse("Y <=> X").unwrap();
        assert_eq!(c.canonical_id(), d.canonical_id());

        // irreversible direction is semantic, not presentational
        let e = Mechanism::parse("X -> Y").unwrap();
        let f = Mechanism::parse("Y -> X").unwrap();
        assert_ne!(e.canonical_id(), f.canonical_id());
    }

    #[test]
    fn canonical_ids_of_m2_mass_conserving_mechanisms_distinct() {
        let ids: Vec<String> = [
            "X <=> Y; 2 X <=> X + Y",
            "X <=> Y; 2 Y <=> X + Y",
            "2 X <=> X + Y; 2 Y <=> X + Y",
        ]
        .iter()
        .map(|t| Mechanism::parse(t).unwrap().canonical_id())
        .collect();
        assert_ne!(ids[0], ids[1]);
        assert_ne!(ids[0], ids[2]);
        assert_ne!(ids[1], ids[2]);
    }

    #[test]
    fn parse_error_reports_position() {
        match Mechanism::parse("X <=> ") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn whitespace_and_newline_separators() {
        let m = Mechanism::parse("X<=>Y\n2X<=>X+Y").unwrap();
        assert_eq!(m.serialize(), "X <=> Y; 2 X <=> X + Y");
    }
}
