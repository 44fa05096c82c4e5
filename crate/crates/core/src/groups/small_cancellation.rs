//! C′(1/6) presentations: piece check, Dehn reduction and a verified
//! breadth-first distance table.

use std::collections::BTreeSet;

use super::{Gen, GeneratorSet};
use crate::error::{Error, Result};

/// Marks a table edge leaving the enumerated ball.
pub const OUTSIDE: u32 = u32::MAX;

/// Symmetrized relator set: all cyclic shifts of each relator and of its
/// inverse, deduplicated.
#[derive(Debug, Clone)]
pub struct RelatorSet {
    cyclic: Vec<Vec<Gen>>,
    /// Indices into `cyclic` grouped by first letter.
    by_first: Vec<Vec<usize>>,
}

impl RelatorSet {
    pub fn new(gens: &GeneratorSet, relators: Vec<Vec<Gen>>) -> Result<Self> {
        if relators.is_empty() {
            return Err(Error::InvalidModel("no relators given".into()));
        }
        let mut all = BTreeSet::new();
        for r in &relators {
            let n = r.len();
            if n == 0 {
                return Err(Error::InvalidModel("empty relator".into()));
            }
            let reduced = (0..n).all(|i| r[(i + 1) % n] != gens.inverse(r[i]));
            if !reduced || n == 1 {
                return Err(Error::InvalidModel(format!(
                    "relator {} is not cyclically reduced",
                    gens.format(r)
                )));
            }
            if (1..n).any(|k| n % k == 0 && r[k..] == r[..n - k]) {
                return Err(Error::InvalidModel(format!("relator {} is a proper power", gens.format(r))));
            }
            let inv = gens.invert_word(r);
            for word in [r, &inv] {
                for k in 0..n {
                    let mut shifted = word[k..].to_vec();
                    shifted.extend_from_slice(&word[..k]);
                    all.insert(shifted);
                }
            }
        }
        let cyclic: Vec<Vec<Gen>> = all.into_iter().collect();
        for (i, r1) in cyclic.iter().enumerate() {
            for r2 in &cyclic[i + 1..] {
                let piece = r1.iter().zip(r2).take_while(|(a, b)| a == b).count();
                if 6 * piece >= r1.len() || 6 * piece >= r2.len() {
                    return Err(Error::InvalidModel(format!(
                        "C'(1/6) fails: piece {} shared by {} and {}",
                        gens.format(&r1[..piece]),
                        gens.format(r1),
                        gens.format(r2)
                    )));
                }
            }
        }
        let mut by_first = vec![Vec::new(); gens.len()];
        for (i, r) in cyclic.iter().enumerate() {
            by_first[r[0] as usize].push(i);
        }
        Ok(Self { cyclic, by_first })
    }

    pub fn cyclic_words(&self) -> &[Vec<Gen>] {
        &self.cyclic
    }

    /// Dehn's algorithm: freely reduces and repeatedly replaces any subword
    /// forming more than half of a relator by the inverse of the remainder.
    pub fn dehn_reduce(&self, gens: &GeneratorSet, raw: &[Gen]) -> Vec<Gen> {
        let mut stack: Vec<Gen> = Vec::with_capacity(raw.len());
        self.dehn_extend(gens, &mut stack, raw);
        stack
    }

    /// Appends `letters` to an already Dehn-reduced `stack`, keeping it
    /// reduced. Only suffixes can become reducible, so this costs time
    /// proportional to the appended letters plus the replacements made.
    pub fn dehn_extend(&self, gens: &GeneratorSet, stack: &mut Vec<Gen>, letters: &[Gen]) {
        let mut pending: Vec<Gen> = letters.iter().rev().copied().collect();
        while let Some(g) = pending.pop() {
            if stack.last() == Some(&gens.inverse(g)) {
                stack.pop();
                continue;
            }
            stack.push(g);
            if let Some((cut, replacement)) = self.long_suffix_match(gens, stack) {
                stack.truncate(cut);
                // Replacement letters are re-pushed one at a time so the
                // stack stays reduced.
                pending.extend(replacement.into_iter().rev());
            }
        }
    }

    /// If a suffix of `w` equals more than half of some relator `u·v`
    /// (suffix = `u`), returns the cut point and `v⁻¹`.
    fn long_suffix_match(&self, gens: &GeneratorSet, w: &[Gen]) -> Option<(usize, Vec<Gen>)> {
        for r in &self.cyclic {
            let n = r.len();
            for k in (n / 2 + 1..=n.min(w.len())).rev() {
                if w[w.len() - k..] == r[..k] {
                    return Some((w.len() - k, gens.invert_word(&r[k..])));
                }
            }
        }
        None
    }
}

/// Breadth-first Cayley-graph ball with canonical shortlex geodesics.
///
/// Vertices are numbered in shortlex order of their canonical words. Each
/// unknown edge `(w, s)` is identified with an existing vertex by walking
/// the boundary of a relator cell from `w`; if no relator closes up, the
/// edge leads to a new vertex one level further out. For C′(1/6)
/// presentations every coincidence is detected this way, because the last
/// cell of a reduced diagram for a geodesic bigon or triangle has all its
/// other boundary edges at lower levels or already processed.
#[derive(Debug, Clone)]
pub struct CayleyBall {
    ngens: usize,
    radius: u32,
    level_start: Vec<usize>,
    parent: Vec<u32>,
    last_gen: Vec<Gen>,
    level: Vec<u8>,
    edges: Vec<u32>,
}

impl CayleyBall {
    pub fn build(gens: &GeneratorSet, rel: &RelatorSet, max_radius: u32, budget: u64) -> Self {
        let ng = gens.len();
        let mut ball = Self {
            ngens: ng,
            radius: 0,
            level_start: vec![0, 1],
            parent: vec![OUTSIDE],
            last_gen: vec![0],
            level: vec![0],
            edges: vec![OUTSIDE; ng],
        };
        let mut level = 0u32;
        loop {
            let create = level < max_radius.min(u8::MAX as u32 - 1) && {
                let predicted = ball.predict_next_sphere(level);
                (ball.len() as u64).saturating_add(predicted) <= budget
            };
            let (start, end) = (ball.level_start[level as usize], ball.level_start[level as usize + 1]);
            for w in start..end {
                for s in 0..ng {
                    if ball.edges[w * ng + s] != OUTSIDE {
                        continue;
                    }
                    let s = s as Gen;
                    let target = match ball.trace(gens, rel, w as u32, s) {
                        Some(v) => v,
                        None if create => ball.push_vertex(w as u32, s, level as u8 + 1),
                        None => continue,
                    };
                    ball.edges[w * ng + s as usize] = target;
                    ball.edges[target as usize * ng + gens.inverse(s) as usize] = w as u32;
                }
            }
            if !create {
                break;
            }
            ball.level_start.push(ball.len());
            level += 1;
        }
        ball.radius = level;
        ball
    }

    fn predict_next_sphere(&self, level: u32) -> u64 {
        let cur = self.sphere_size(level);
        if level == 0 {
            return self.ngens as u64;
        }
        let prev = self.sphere_size(level - 1).max(1);
        let ratio = cur as f64 / prev as f64;
        (cur as f64 * ratio * 1.05).ceil() as u64
    }

    fn push_vertex(&mut self, parent: u32, s: Gen, level: u8) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(parent);
        self.last_gen.push(s);
        self.level.push(level);
        self.edges.extend(std::iter::repeat(OUTSIDE).take(self.ngens));
        id
    }

    /// Follows the rest of a relator cell from `w` to find `w·s`.
    fn trace(&self, gens: &GeneratorSet, rel: &RelatorSet, w: u32, s: Gen) -> Option<u32> {
        'relators: for &ri in &rel.by_first[s as usize] {
            let r = &rel.cyclic[ri];
            let mut cur = w;
            for &x in r[1..].iter().rev() {
                cur = self.edges[cur as usize * self.ngens + gens.inverse(x) as usize];
                if cur == OUTSIDE {
                    continue 'relators;
                }
            }
            return Some(cur);
        }
        None
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Total number of vertices, i.e. `|B(e, radius)|`.
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Number of vertices with level at most `r`.
    pub fn ball_len(&self, r: u32) -> usize {
        self.level_start
            .get(r as usize + 1)
            .copied()
            .unwrap_or_else(|| self.len())
    }

    pub fn sphere_size(&self, r: u32) -> u64 {
        match self.level_start.get(r as usize) {
            Some(&start) => (self.ball_len(r) - start) as u64,
            None => 0,
        }
    }

    pub fn level(&self, v: u32) -> u32 {
        u32::from(self.level[v as usize])
    }

    pub fn num_generators(&self) -> usize {
        self.ngens
    }

    /// Neighbour `v·g`, or `None` when it lies outside the ball.
    pub fn neighbor(&self, v: u32, g: Gen) -> Option<u32> {
        let t = self.edges[v as usize * self.ngens + g as usize];
        (t != OUTSIDE).then_some(t)
    }

    /// Walks `word` from the identity; `None` if the walk leaves the ball.
    pub fn locate(&self, word: &[Gen]) -> Option<u32> {
        self.walk(0, word)
    }

    pub fn walk(&self, from: u32, word: &[Gen]) -> Option<u32> {
        word.iter().try_fold(from, |v, &g| self.neighbor(v, g))
    }

    /// Canonical (shortlex least) geodesic word of vertex `v`.
    pub fn word(&self, mut v: u32) -> Vec<Gen> {
        let mut w = Vec::with_capacity(self.level(v) as usize);
        while v != 0 {
            w.push(self.last_gen[v as usize]);
            v = self.parent[v as usize];
        }
        w.reverse();
        w
    }

    /// Extrapolates `|B(e, r)|` from the outermost sphere ratio.
    pub fn estimate_ball_size(&self, r: u32) -> u64 {
        if r <= self.radius {
            return self.ball_len(r) as u64;
        }
        let top = self.sphere_size(self.radius) as f64;
        let ratio = if self.radius == 0 {
            self.ngens as f64
        } else {
            top / self.sphere_size(self.radius - 1).max(1) as f64
        };
        let mut total = self.len() as f64;
        let mut sphere = top;
        for _ in self.radius..r {
            sphere *= ratio;
            total += sphere;
        }
        if total >= u64::MAX as f64 {
            u64::MAX
        } else {
            total.ceil() as u64
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::groups::{BallOptions, GroupModel};
    use crate::Error;

    fn genus2(radius: u32) -> GroupModel {
        GroupModel::surface_group(2, BallOptions { max_radius: radius, element_budget: 1_000_000 })
            .unwrap()
    }

    #[test]
    fn surface_spheres_match_growth_series() {
        // Coefficients of (1+2z+2z²+2z³+z⁴)/(1−6z−6z²−6z³+z⁴).
        let g = genus2(6);
        assert_eq!(g.sphere_sizes(6).unwrap(), vec![1, 8, 56, 392, 2736, 19096, 133288]);
    }

    #[test]
    fn relator_reduces_to_identity() {
        let g = genus2(4);
        assert!(g.element("abABcdCD").unwrap().is_identity());
        assert!(g.element("cdCDabAB").unwrap().is_identity());
        assert!(g.element("dcDCbaBA").unwrap().is_identity());
    }

    #[test]
    fn half_relator_is_shortened() {
        let g = genus2(4);
        // Five letters of an eight-letter relator become the other three.
        let x = g.element("abABc").unwrap();
        assert_eq!(g.word_length(&x).unwrap(), 3);
        assert_eq!(x, g.element("dcD").unwrap());
    }

    #[test]
    fn rejects_presentations_with_long_pieces() {
        assert!(GroupModel::small_cancellation("ab", &["abab"], BallOptions::default()).is_err());
        assert!(GroupModel::small_cancellation("ab", &["aA"], BallOptions::default()).is_err());
    }

    #[test]
    fn words_beyond_radius_are_flagged() {
        let g = genus2(3);
        let x = g.element("aaaaa").unwrap();
        assert!(matches!(
            g.word_length(&x),
            Err(Error::UnverifiedGeodesic { length: 5, radius: 3 })
        ));
        assert!(g.geodesic_vertices(&x).is_err());
    }

    #[test]
    fn canonical_words_are_shortlex_geodesics() {
        let g = genus2(4);
        let ball = g.ball_enumerate(4).unwrap();
        assert!(ball.windows(2).all(|w| w[0] < w[1]));
        for x in &ball {
            assert_eq!(g.word_length(x).unwrap(), x.len());
            assert_eq!(&g.normal_form(x.word()).unwrap(), x);
        }
    }

    #[test]
    fn budget_caps_the_verified_radius() {
        let g = GroupModel::surface_group(2, BallOptions { max_radius: 12, element_budget: 5_000 })
            .unwrap();
        assert_eq!(g.verified_radius(), Some(4));
        assert!(matches!(g.ball_enumerate(10), Err(Error::BudgetExceeded { .. })));
    }
}
