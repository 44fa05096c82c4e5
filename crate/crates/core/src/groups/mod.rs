//! Group models with a solvable word problem.
//!
//! Three families are supported: free groups, free products of finite cyclic
//! groups, and C′(1/6) small-cancellation presentations. Elements are stored
//! as flat words over generator ids; every model supplies a canonical normal
//! form so that equal elements compare equal.

mod growth;
mod small_cancellation;

pub use growth::{free_product_growth_rate, free_product_sphere_sizes};
pub use small_cancellation::{CayleyBall, RelatorSet, OUTSIDE};

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Generator id. Words are sequences of these.
pub type Gen = u8;

pub const MAX_GENERATORS: usize = 64;

/// Default verified radius for small-cancellation distance tables.
pub const DEFAULT_VERIFIED_RADIUS: u32 = 12;

/// Default cap on the number of elements a ball enumeration may hold.
pub const DEFAULT_ELEMENT_BUDGET: u64 = 4_000_000;

/// Symmetric generating set: display symbols and the inverse involution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    symbols: Vec<char>,
    inverse: Vec<Gen>,
    lookup: Vec<Option<Gen>>,
}

impl GeneratorSet {
    fn new(symbols: Vec<char>, inverse: Vec<Gen>, aliases: &[(char, Gen)]) -> Result<Self> {
        if symbols.len() > MAX_GENERATORS {
            return Err(Error::InvalidModel(format!(
                "{} generators exceed the cap of {MAX_GENERATORS}",
                symbols.len()
            )));
        }
        for (i, &j) in inverse.iter().enumerate() {
            if inverse.get(j as usize).copied() != Some(i as Gen) {
                return Err(Error::InvalidModel("inverse pairing is not an involution".into()));
            }
        }
        let mut lookup = vec![None; 128];
        for (i, &c) in symbols.iter().enumerate() {
            if !c.is_ascii_alphabetic() {
                return Err(Error::InvalidModel(format!("generator symbol {c:?} is not a letter")));
            }
            if lookup[c as usize].replace(i as Gen).is_some() {
                return Err(Error::InvalidModel(format!("generator symbol {c:?} declared twice")));
            }
        }
        for &(c, g) in aliases {
            lookup[c as usize].get_or_insert(g);
        }
        Ok(Self { symbols, inverse, lookup })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = Gen> + '_ {
        (0..self.symbols.len()).map(|i| i as Gen)
    }

    pub fn inverse(&self, g: Gen) -> Gen {
        self.inverse[g as usize]
    }

    pub fn symbol(&self, g: Gen) -> char {
        self.symbols[g as usize]
    }

    pub fn is_self_inverse(&self, g: Gen) -> bool {
        self.inverse(g) == g
    }

    pub fn contains(&self, g: Gen) -> bool {
        (g as usize) < self.symbols.len()
    }

    /// Parses a word such as `"abAB"`. The string `"1"` and the empty string
    /// denote the identity; ASCII whitespace is ignored.
    pub fn parse(&self, text: &str) -> Result<Vec<Gen>> {
        let text = text.trim();
        if text == "1" {
            return Ok(Vec::new());
        }
        text.chars()
            .filter(|c| !c.is_ascii_whitespace())
            .map(|c| {
                self.lookup
                    .get(c as usize)
                    .copied()
                    .flatten()
                    .ok_or_else(|| Error::UnknownGenerator(c.to_string()))
            })
            .collect()
    }

    pub fn format(&self, word: &[Gen]) -> String {
        if word.is_empty() {
            return "1".to_string();
        }
        word.iter().map(|&g| self.symbol(g)).collect()
    }

    pub fn invert_word(&self, word: &[Gen]) -> Vec<Gen> {
        word.iter().rev().map(|&g| self.inverse(g)).collect()
    }
}

/// Group element in canonical normal form.
///
/// Ordering is shortlex: shorter words first, then lexicographic by id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Element {
    word: Vec<Gen>,
}

impl Element {
    pub fn identity() -> Self {
        Self { word: Vec::new() }
    }

    pub(crate) fn from_normal_word(word: Vec<Gen>) -> Self {
        Self { word }
    }

    pub fn word(&self) -> &[Gen] {
        &self.word
    }

    pub fn into_word(self) -> Vec<Gen> {
        self.word
    }

    /// Length of the stored word. Equals the word length for tree models;
    /// use [`GroupModel::word_length`] for a checked value in general.
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }
}

impl Ord for Element {
    fn cmp(&self, other: &Self) -> Ordering {
        self.word
            .len()
            .cmp(&other.word.len())
            .then_with(|| self.word.cmp(&other.word))
    }
}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GroupKind {
    FreeGroup { rank: usize },
    FreeProductFinite { orders: Vec<u32> },
    SmallCancellation { relators: Vec<String> },
}

/// Per-generator data for free products of cyclic groups: which factor the
/// generator belongs to and whether it is the +1 or −1 power.
#[derive(Debug, Clone)]
struct FactorTable {
    orders: Vec<u32>,
    factor: Vec<usize>,
    positive: Vec<bool>,
    /// Generator id for the +1 and −1 power of each factor.
    plus: Vec<Gen>,
    minus: Vec<Gen>,
}

impl FactorTable {
    /// Encodes exponent `e ∈ [1, m−1]` of factor `f` as a geodesic run.
    fn encode(&self, f: usize, e: u32, out: &mut Vec<Gen>) {
        let m = self.orders[f];
        if 2 * e <= m {
            out.extend(std::iter::repeat(self.plus[f]).take(e as usize));
        } else {
            out.extend(std::iter::repeat(self.minus[f]).take((m - e) as usize));
        }
    }

    fn exponent(&self, g: Gen) -> u32 {
        let f = self.factor[g as usize];
        if self.positive[g as usize] {
            1
        } else {
            self.orders[f] - 1
        }
    }
}

/// A hyperbolic group with exact normal forms.
///
/// Immutable after construction and safe to share between threads; the
/// small-cancellation distance table is built eagerly in the constructor.
#[derive(Debug, Clone)]
pub struct GroupModel {
    kind: GroupKind,
    gens: GeneratorSet,
    element_budget: u64,
    factors: Option<FactorTable>,
    relators: Option<RelatorSet>,
    ball: Option<CayleyBall>,
}

/// Construction options for small-cancellation models.
#[derive(Debug, Clone, Copy)]
pub struct BallOptions {
    pub max_radius: u32,
    pub element_budget: u64,
}

impl Default for BallOptions {
    fn default() -> Self {
        Self { max_radius: DEFAULT_VERIFIED_RADIUS, element_budget: DEFAULT_ELEMENT_BUDGET }
    }
}

const LETTERS: &str = "abcdefghijklmnopqrstuvwxyz";

impl GroupModel {
    /// Free group on `rank` letters `a, b, …`; uppercase letters are inverses.
    pub fn free_group(rank: usize) -> Result<Self> {
        if rank < 2 {
            return Err(Error::InvalidModel(format!(
                "free group of rank {rank} is elementary; rank must be at least 2"
            )));
        }
        if rank > 26 {
            return Err(Error::InvalidModel(format!("rank {rank} exceeds the 26-letter alphabet")));
        }
        let mut symbols = Vec::with_capacity(2 * rank);
        let mut inverse = Vec::with_capacity(2 * rank);
        for (i, c) in LETTERS.chars().take(rank).enumerate() {
            symbols.push(c);
            symbols.push(c.to_ascii_uppercase());
            inverse.push((2 * i + 1) as Gen);
            inverse.push((2 * i) as Gen);
        }
        Ok(Self {
            kind: GroupKind::FreeGroup { rank },
            gens: GeneratorSet::new(symbols, inverse, &[])?,
            element_budget: DEFAULT_ELEMENT_BUDGET,
            factors: None,
            relators: None,
            ball: None,
        })
    }

    /// Free product of cyclic groups of the given orders, factors named
    /// `a, b, c, …`.
    pub fn free_product(orders: &[u32]) -> Result<Self> {
        let alphabet: String = LETTERS.chars().take(orders.len()).collect();
        Self::free_product_with_alphabet(orders, &alphabet)
    }

    /// Free product of cyclic groups with one letter per factor. An order-2
    /// factor has a single self-inverse generator; larger orders get the
    /// lowercase letter and its uppercase inverse.
    pub fn free_product_with_alphabet(orders: &[u32], alphabet: &str) -> Result<Self> {
        let letters: Vec<char> = alphabet.chars().collect();
        if letters.len() != orders.len() {
            return Err(Error::InvalidModel(format!(
                "{} factor letters for {} factors",
                letters.len(),
                orders.len()
            )));
        }
        if orders.len() < 2 {
            return Err(Error::InvalidModel("a free product needs at least two factors".into()));
        }
        if let Some(m) = orders.iter().find(|&&m| m < 2) {
            return Err(Error::InvalidModel(format!("factor order {m} is below 2")));
        }
        let mass: u64 = orders.iter().map(|&m| u64::from(m) - 1).sum();
        if mass < 3 {
            return Err(Error::InvalidModel(format!(
                "free product {orders:?} is virtually cyclic (total factor mass {mass} < 3)"
            )));
        }
        let mut symbols = Vec::new();
        let mut inverse = Vec::new();
        let mut aliases = Vec::new();
        let mut table = FactorTable {
            orders: orders.to_vec(),
            factor: Vec::new(),
            positive: Vec::new(),
            plus: Vec::new(),
            minus: Vec::new(),
        };
        for (f, (&c, &m)) in letters.iter().zip(orders).enumerate() {
            if !c.is_ascii_lowercase() {
                return Err(Error::InvalidModel(format!("factor letter {c:?} must be lowercase")));
            }
            let g = symbols.len() as Gen;
            symbols.push(c);
            table.factor.push(f);
            table.positive.push(true);
            table.plus.push(g);
            if m == 2 {
                inverse.push(g);
                table.minus.push(g);
                aliases.push((c.to_ascii_uppercase(), g));
            } else {
                symbols.push(c.to_ascii_uppercase());
                inverse.push(g + 1);
                inverse.push(g);
                table.factor.push(f);
                table.positive.push(false);
                table.minus.push(g + 1);
            }
        }
        Ok(Self {
            kind: GroupKind::FreeProductFinite { orders: orders.to_vec() },
            gens: GeneratorSet::new(symbols, inverse, &aliases)?,
            element_budget: DEFAULT_ELEMENT_BUDGET,
            factors: Some(table),
            relators: None,
            ball: None,
        })
    }

    /// Small-cancellation group over lowercase `alphabet` (uppercase letters
    /// are inverses) with the given cyclically reduced relators. The C′(1/6)
    /// condition is verified and a distance table is built out to
    /// `options.max_radius`, or less if the element budget forbids it.
    pub fn small_cancellation(alphabet: &str, relators: &[&str], options: BallOptions) -> Result<Self> {
        let letters: Vec<char> = alphabet.chars().collect();
        if letters.len() < 2 {
            return Err(Error::InvalidModel("need at least two generator letters".into()));
        }
        if letters.len() > 26 {
            return Err(Error::InvalidModel("alphabet exceeds 26 letters".into()));
        }
        let mut symbols = Vec::new();
        let mut inverse = Vec::new();
        for (i, &c) in letters.iter().enumerate() {
            if !c.is_ascii_lowercase() {
                return Err(Error::InvalidModel(format!("generator letter {c:?} must be lowercase")));
            }
            symbols.push(c);
            symbols.push(c.to_ascii_uppercase());
            inverse.push((2 * i + 1) as Gen);
            inverse.push((2 * i) as Gen);
        }
        let gens = GeneratorSet::new(symbols, inverse, &[])?;
        let words = relators
            .iter()
            .map(|r| gens.parse(r))
            .collect::<Result<Vec<_>>>()?;
        let rel = RelatorSet::new(&gens, words)?;
        let ball = CayleyBall::build(&gens, &rel, options.max_radius, options.element_budget);
        Ok(Self {
            kind: GroupKind::SmallCancellation {
                relators: relators.iter().map(|r| r.to_string()).collect(),
            },
            gens,
            element_budget: options.element_budget,
            factors: None,
            relators: Some(rel),
            ball: Some(ball),
        })
    }

    /// Fundamental group of the closed orientable surface of the given
    /// genus, presented by the product of commutators `[a,b][c,d]…`.
    pub fn surface_group(genus: usize, options: BallOptions) -> Result<Self> {
        if genus < 2 {
            return Err(Error::InvalidModel(format!("genus {genus} surface group is not hyperbolic")));
        }
        if 2 * genus > 26 {
            return Err(Error::InvalidModel("genus too large for the alphabet".into()));
        }
        let alphabet: String = LETTERS.chars().take(2 * genus).collect();
        let letters: Vec<char> = alphabet.chars().collect();
        let relator: String = letters
            .chunks(2)
            .flat_map(|p| [p[0], p[1], p[0].to_ascii_uppercase(), p[1].to_ascii_uppercase()])
            .collect();
        Self::small_cancellation(&alphabet, &[relator.as_str()], options)
    }

    pub fn with_element_budget(mut self, budget: u64) -> Self {
        self.element_budget = budget;
        self
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.gens
    }

    pub fn num_generators(&self) -> usize {
        self.gens.len()
    }

    pub fn element_budget(&self) -> u64 {
        self.element_budget
    }

    /// True when the Cayley graph with respect to the standard generators is
    /// a tree: free groups and free products of copies of Z/2.
    pub fn is_tree(&self) -> bool {
        match &self.kind {
            GroupKind::FreeGroup { .. } => true,
            GroupKind::FreeProductFinite { orders } => orders.iter().all(|&m| m == 2),
            GroupKind::SmallCancellation { .. } => false,
        }
    }

    pub fn cayley_ball(&self) -> Option<&CayleyBall> {
        self.ball.as_ref()
    }

    /// Radius up to which word lengths are certified, `None` meaning
    /// unbounded (normal forms are geodesic).
    pub fn verified_radius(&self) -> Option<u32> {
        self.ball.as_ref().map(|b| b.radius())
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            GroupKind::FreeGroup { rank } => format!("F_{rank}"),
            GroupKind::FreeProductFinite { orders } => orders
                .iter()
                .map(|m| format!("Z{m}"))
                .collect::<Vec<_>>()
                .join("*"),
            GroupKind::SmallCancellation { relators } => {
                let letters: String = self
                    .gens
                    .ids()
                    .map(|g| self.gens.symbol(g))
                    .filter(char::is_ascii_lowercase)
                    .collect();
                format!("<{letters} | {}>", relators.join(", "))
            }
        }
    }

    pub fn parse_word(&self, text: &str) -> Result<Vec<Gen>> {
        self.gens.parse(text)
    }

    pub fn format_word(&self, word: &[Gen]) -> String {
        self.gens.format(word)
    }

    pub fn format(&self, x: &Element) -> String {
        self.gens.format(x.word())
    }

    /// Parses and normalizes.
    pub fn element(&self, text: &str) -> Result<Element> {
        let raw = self.parse_word(text)?;
        self.normal_form(&raw)
    }

    pub fn identity(&self) -> Element {
        Element::identity()
    }

    pub fn generator(&self, g: Gen) -> Element {
        let mut w = Vec::new();
        self.push_generator(&mut w, g);
        Element::from_normal_word(w)
    }

    pub fn normal_form(&self, raw: &[Gen]) -> Result<Element> {
        if let Some(&g) = raw.iter().find(|&&g| !self.gens.contains(g)) {
            return Err(Error::UnknownGenerator(format!("id {g}")));
        }
        Ok(self.normal_form_unchecked(raw))
    }

    fn normal_form_unchecked(&self, raw: &[Gen]) -> Element {
        match &self.kind {
            GroupKind::SmallCancellation { .. } => {
                let rel = self.relators.as_ref().expect("relators present");
                let reduced = rel.dehn_reduce(&self.gens, raw);
                let ball = self.ball.as_ref().expect("ball present");
                match ball.locate(&reduced) {
                    Some(v) => Element::from_normal_word(ball.word(v)),
                    None => Element::from_normal_word(reduced),
                }
            }
            _ => {
                let mut w = Vec::with_capacity(raw.len());
                for &g in raw {
                    self.push_generator(&mut w, g);
                }
                Element::from_normal_word(w)
            }
        }
    }

    /// Right-multiplies a tree-model or free-product normal form by one
    /// generator in place. Small-cancellation words are re-reduced.
    pub fn push_generator(&self, w: &mut Vec<Gen>, g: Gen) {
        match &self.kind {
            GroupKind::FreeGroup { .. } => {
                if w.last() == Some(&self.gens.inverse(g)) {
                    w.pop();
                } else {
                    w.push(g);
                }
            }
            GroupKind::FreeProductFinite { .. } => {
                let t = self.factors.as_ref().expect("factor table present");
                let f = t.factor[g as usize];
                let m = t.orders[f];
                let run = w
                    .iter()
                    .rev()
                    .take_while(|&&h| t.factor[h as usize] == f)
                    .count();
                let mut e = if run == 0 {
                    0
                } else {
                    let last = w[w.len() - 1];
                    let k = run as u32 % m;
                    if t.positive[last as usize] {
                        k
                    } else {
                        (m - k) % m
                    }
                };
                e = (e + t.exponent(g)) % m;
                w.truncate(w.len() - run);
                if e != 0 {
                    t.encode(f, e, w);
                }
            }
            GroupKind::SmallCancellation { .. } => {
                let mut raw = std::mem::take(w);
                raw.push(g);
                *w = self.normal_form_unchecked(&raw).into_word();
            }
        }
    }

    /// Right-multiplies a working word by `letters` in place. Tree and
    /// free-product words stay in normal form; small-cancellation words are
    /// kept Dehn-reduced and must be passed through [`Self::settle`] to
    /// obtain the canonical element.
    pub fn step_word(&self, w: &mut Vec<Gen>, letters: &[Gen]) {
        match &self.relators {
            Some(rel) => rel.dehn_extend(&self.gens, w, letters),
            None => {
                for &g in letters {
                    self.push_generator(w, g);
                }
            }
        }
    }

    /// Converts a working word produced by [`Self::step_word`] to an element.
    pub fn settle(&self, w: Vec<Gen>) -> Element {
        match &self.ball {
            Some(ball) => match ball.locate(&w) {
                Some(v) => Element::from_normal_word(ball.word(v)),
                None => Element::from_normal_word(w),
            },
            None => Element::from_normal_word(w),
        }
    }

    pub fn multiply(&self, x: &Element, y: &Element) -> Element {
        match &self.kind {
            GroupKind::SmallCancellation { .. } => {
                let mut raw = x.word().to_vec();
                raw.extend_from_slice(y.word());
                self.normal_form_unchecked(&raw)
            }
            _ => {
                let mut w = x.word().to_vec();
                for &g in y.word() {
                    self.push_generator(&mut w, g);
                }
                Element::from_normal_word(w)
            }
        }
    }

    pub fn inverse(&self, x: &Element) -> Element {
        self.normal_form_unchecked(&self.gens.invert_word(x.word()))
    }

    /// `x⁻¹·y`, the element whose length is `d_w(x, y)`.
    pub fn between(&self, x: &Element, y: &Element) -> Element {
        let mut raw = self.gens.invert_word(x.word());
        raw.extend_from_slice(y.word());
        self.normal_form_unchecked(&raw)
    }

    /// Whether the stored word of `x` is certified geodesic.
    pub fn is_verified(&self, x: &Element) -> bool {
        match &self.ball {
            Some(ball) => ball.locate(x.word()).is_some(),
            None => true,
        }
    }

    /// Word length `d_w(e, x)`.
    pub fn word_length(&self, x: &Element) -> Result<usize> {
        match &self.ball {
            Some(ball) => match ball.locate(x.word()) {
                Some(v) => Ok(ball.level(v) as usize),
                None => Err(Error::UnverifiedGeodesic { length: x.len(), radius: ball.radius() }),
            },
            None => Ok(x.len()),
        }
    }

    pub fn distance(&self, x: &Element, y: &Element) -> Result<usize> {
        self.word_length(&self.between(x, y))
    }

    /// Vertices of the canonical geodesic from the identity to `x`.
    pub fn geodesic_vertices(&self, x: &Element) -> Result<Vec<Element>> {
        self.word_length(x)?;
        Ok((0..=x.len())
            .map(|i| Element::from_normal_word(x.word()[..i].to_vec()))
            .collect())
    }

    /// Number of elements of word length exactly `r`, for `r = 0..=rmax`.
    /// Exact for tree models and free products; read from the distance
    /// table for small-cancellation groups.
    pub fn sphere_sizes(&self, rmax: u32) -> Result<Vec<u64>> {
        match &self.kind {
            GroupKind::FreeGroup { rank } => {
                let k = *rank as u64;
                Ok((0..=rmax)
                    .map(|r| {
                        if r == 0 {
                            1
                        } else {
                            (2 * k).saturating_mul((2 * k - 1).saturating_pow(r - 1))
                        }
                    })
                    .collect())
            }
            GroupKind::FreeProductFinite { orders } => Ok(free_product_sphere_sizes(orders, rmax)),
            GroupKind::SmallCancellation { .. } => {
                let ball = self.ball.as_ref().expect("ball present");
                if rmax > ball.radius() {
                    return Err(self.sc_refusal(rmax, ball));
                }
                Ok((0..=rmax).map(|r| ball.sphere_size(r)).collect())
            }
        }
    }

    fn sc_refusal(&self, r: u32, ball: &CayleyBall) -> Error {
        let required = ball.estimate_ball_size(r);
        if required > self.element_budget {
            Error::BudgetExceeded { required, budget: self.element_budget }
        } else {
            Error::UnverifiedGeodesic { length: r as usize, radius: ball.radius() }
        }
    }

    /// Estimated size of `B(e, r)`: exact for tree models and free products,
    /// extrapolated from the last sphere ratio otherwise.
    pub fn ball_size_estimate(&self, r: u32) -> u64 {
        match &self.ball {
            Some(ball) => ball.estimate_ball_size(r),
            None => self
                .sphere_sizes(r)
                .map(|s| s.iter().fold(0u64, |a, &b| a.saturating_add(b)))
                .unwrap_or(u64::MAX),
        }
    }

    /// All elements of word length at most `r`, shortlex sorted.
    pub fn ball_enumerate(&self, r: u32) -> Result<Vec<Element>> {
        let required = self.ball_size_estimate(r);
        if required > self.element_budget {
            return Err(Error::BudgetExceeded { required, budget: self.element_budget });
        }
        if let Some(ball) = &self.ball {
            if r > ball.radius() {
                return Err(self.sc_refusal(r, ball));
            }
            let mut out: Vec<Element> = (0..ball.ball_len(r) as u32)
                .map(|v| Element::from_normal_word(ball.word(v)))
                .collect();
            out.sort();
            return Ok(out);
        }
        let mut out = Vec::with_capacity(required as usize);
        out.push(Element::identity());
        let mut frontier = vec![Vec::new()];
        for len in 1..=r as usize {
            let mut next = Vec::new();
            for w in &frontier {
                for g in self.gens.ids() {
                    let mut v: Vec<Gen> = w.clone();
                    self.push_generator(&mut v, g);
                    if v.len() == len {
                        next.push(v);
                    }
                }
            }
            next.sort();
            next.dedup();
            out.extend(next.iter().cloned().map(Element::from_normal_word));
            frontier = next;
        }
        Ok(out)
    }

    /// Exponential growth rate of balls when known exactly.
    pub fn exact_growth_rate(&self) -> Option<f64> {
        match &self.kind {
            GroupKind::FreeGroup { rank } => Some(((2 * rank - 1) as f64).ln()),
            GroupKind::FreeProductFinite { orders } => Some(free_product_growth_rate(orders)),
            GroupKind::SmallCancellation { .. } => None,
        }
    }
}

impl fmt::Display for GroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f2() -> GroupModel {
        GroupModel::free_group(2).unwrap()
    }

    fn z2_cubed() -> GroupModel {
        GroupModel::free_product_with_alphabet(&[2, 2, 2], "rst").unwrap()
    }

    #[test]
    fn free_reduction() {
        let g = f2();
        assert!(g.element("aA").unwrap().is_identity());
        assert_eq!(g.format(&g.element("abBa").unwrap()), "aa");
        assert_eq!(g.word_length(&g.element("aaB").unwrap()).unwrap(), 3);
    }

    #[test]
    fn multiplication_examples() {
        let g = f2();
        let x = g.element("ab").unwrap();
        let y = g.element("Ba").unwrap();
        assert_eq!(g.format(&g.multiply(&x, &y)), "aa");
        let h = z2_cubed();
        let x = h.element("rs").unwrap();
        let y = h.element("st").unwrap();
        assert_eq!(h.format(&h.multiply(&x, &y)), "rt");
        assert_eq!(h.word_length(&h.element("rsr").unwrap()).unwrap(), 3);
        assert!(h.element("rR").unwrap().is_identity());
    }

    #[test]
    fn rejects_elementary_models() {
        assert!(GroupModel::free_group(1).is_err());
        assert!(GroupModel::free_product(&[2, 2]).is_err());
        assert!(GroupModel::free_product(&[2, 3]).is_ok());
        assert!(GroupModel::free_product(&[3]).is_err());
    }

    #[test]
    fn unknown_generators_are_reported() {
        let g = f2();
        assert!(matches!(g.element("az"), Err(Error::UnknownGenerator(_))));
        assert!(matches!(g.normal_form(&[9]), Err(Error::UnknownGenerator(_))));
    }

    #[test]
    fn cyclic_factor_syllables_are_geodesic() {
        let g = GroupModel::free_product(&[5, 2]).unwrap();
        // a^3 = a^-2 in Z5
        assert_eq!(g.format(&g.element("aaa").unwrap()), "AA");
        assert!(g.element("aaaaa").unwrap().is_identity());
        assert_eq!(g.format(&g.element("aaAbAA").unwrap()), "abAA");
        let g = GroupModel::free_product(&[4, 2]).unwrap();
        assert_eq!(g.element("AA").unwrap(), g.element("aa").unwrap());
    }

    #[test]
    fn ball_counts_match_closed_forms() {
        let g = f2();
        assert_eq!(g.ball_enumerate(1).unwrap().len(), 5);
        assert_eq!(g.ball_enumerate(2).unwrap().len(), 17);
        assert_eq!(z2_cubed().ball_enumerate(2).unwrap().len(), 10);
        for k in 2..=3usize {
            let g = GroupModel::free_group(k).unwrap();
            for r in 0..=(if k == 2 { 10 } else { 6 }) {
                let k = k as u64;
                let closed = 1 + 2 * k * ((2 * k - 1).pow(r) - 1) / (2 * k - 2);
                assert_eq!(g.ball_enumerate(r).unwrap().len() as u64, closed);
            }
        }
    }

    #[test]
    fn ball_is_shortlex_sorted_and_unique() {
        let g = GroupModel::free_product(&[4, 3]).unwrap();
        let ball = g.ball_enumerate(6).unwrap();
        assert!(ball.windows(2).all(|w| w[0] < w[1]));
        let spheres = g.sphere_sizes(6).unwrap();
        assert_eq!(ball.len() as u64, spheres.iter().sum::<u64>());
    }

    #[test]
    fn budget_refusal_carries_estimate() {
        let g = f2().with_element_budget(100);
        match g.ball_enumerate(5) {
            Err(Error::BudgetExceeded { required, budget }) => {
                assert_eq!(required, 485);
                assert_eq!(budget, 100);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn geodesic_vertices_are_prefixes() {
        let g = f2();
        let x = g.element("ab").unwrap();
        let path: Vec<String> = g.geodesic_vertices(&x).unwrap().iter().map(|v| g.format(v)).collect();
        assert_eq!(path, ["1", "a", "ab"]);
        assert_eq!(g.geodesic_vertices(&Element::identity()).unwrap().len(), 1);
    }

    #[test]
    fn exact_growth_rates() {
        assert!((f2().exact_growth_rate().unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!((z2_cubed().exact_growth_rate().unwrap() - 2f64.ln()).abs() < 1e-12);
        let z2_4 = GroupModel::free_product(&[2, 2, 2, 2]).unwrap();
        assert!((z2_4.exact_growth_rate().unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    fn raw_word(ngens: u8, max_len: usize) -> impl Strategy<Value = Vec<Gen>> {
        prop::collection::vec(0..ngens, 0..max_len)
    }

    fn models() -> Vec<GroupModel> {
        vec![
            f2(),
            GroupModel::free_group(3).unwrap(),
            z2_cubed(),
            GroupModel::free_product(&[3, 4, 2]).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn normal_form_is_idempotent(raw in raw_word(6, 30)) {
            for g in models() {
                let raw: Vec<Gen> = raw.iter().map(|&x| x % g.num_generators() as Gen).collect();
                let x = g.normal_form(&raw).unwrap();
                prop_assert_eq!(g.normal_form(x.word()).unwrap(), x.clone());
                prop_assert!(g.multiply(&x, &g.inverse(&x)).is_identity());
            }
        }

        #[test]
        fn word_metric_axioms(a in raw_word(6, 12), b in raw_word(6, 12), c in raw_word(6, 12)) {
            for g in models() {
                let n = g.num_generators() as Gen;
                let el = |w: &Vec<Gen>| g.normal_form(&w.iter().map(|&x| x % n).collect::<Vec<_>>()).unwrap();
                let (x, y, z) = (el(&a), el(&b), el(&c));
                let d = |p: &Element, q: &Element| g.distance(p, q).unwrap();
                prop_assert_eq!(d(&x, &y), d(&y, &x));
                prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z));
                prop_assert_eq!(d(&x, &y) == 0, x == y);
            }
        }

        #[test]
        fn geodesic_vertices_realize_distances(a in raw_word(6, 16)) {
            for g in models() {
                let n = g.num_generators() as Gen;
                let x = g.normal_form(&a.iter().map(|&v| v % n).collect::<Vec<_>>()).unwrap();
                let path = g.geodesic_vertices(&x).unwrap();
                prop_assert_eq!(path.len(), g.word_length(&x).unwrap() + 1);
                for i in 0..path.len() {
                    for j in 0..path.len() {
                        prop_assert_eq!(g.distance(&path[i], &path[j]).unwrap(), i.abs_diff(j));
                    }
                }
            }
        }
    }
}
