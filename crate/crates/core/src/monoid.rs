//! Right-angled Artin monoids: normal forms, the left-divisibility order,
//! joins (with an explicit `Infinity`), cliques and bounded enumeration.
//!
//! Generators are indices into the vertex list of a [`SimpleGraph`]. Two
//! generators commute exactly when their vertices are joined by an edge.
//! Every element is stored as the lexicographically smallest word of its
//! commutation class, so structural equality is monoid equality.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a standard generator (a vertex of the graph).
pub type Generator = usize;

/// Bitmask over generators; graphs are limited to 64 vertices.
pub type GenMask = u64;

pub const MAX_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonoidError {
    #[error("unknown generator `{0}`")]
    UnknownLetter(String),
    #[error("generator index {index} out of range for a graph on {vertices} vertices")]
    IndexOutOfRange { index: usize, vertices: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("generator set must be nonempty")]
    EmptySet,
    #[error("graph has {0} vertices, at most 64 are supported")]
    TooManyVertices(usize),
}

/// Wire form of a graph: `{"vertices":["a","b"],"edges":[["a","b"]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub edges: Vec<[String; 2]>,
}

/// A finite simple graph whose vertices are the standard generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphSpec", into = "GraphSpec")]
pub struct SimpleGraph {
    vertices: Vec<String>,
    adjacency: Vec<GenMask>,
}

impl SimpleGraph {
    pub fn new<S: AsRef<str>>(vertices: &[S], edges: &[(S, S)]) -> Result<Self, MonoidError> {
        let vertices: Vec<String> = vertices.iter().map(|v| v.as_ref().to_string()).collect();
        let n = vertices.len();
        if n > MAX_VERTICES {
            return Err(MonoidError::TooManyVertices(n));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.is_empty() {
                return Err(MonoidError::InvalidGraph("empty vertex name".into()));
            }
            if vertices[..i].contains(v) {
                return Err(MonoidError::InvalidGraph(format!("duplicate vertex `{v}`")));
            }
        }
        let mut graph = SimpleGraph { vertices, adjacency: vec![0; n] };
        for (a, b) in edges {
            let i = graph.index_of(a.as_ref())?;
            let j = graph.index_of(b.as_ref())?;
            if i == j {
                return Err(MonoidError::InvalidGraph(format!("self-loop at `{}`", a.as_ref())));
            }
            graph.adjacency[i] |= 1 << j;
            graph.adjacency[j] |= 1 << i;
        }
        Ok(graph)
    }

    /// Graph on `n` vertices from index pairs; vertex names are `s0, s1, ...`
    /// unless `n <= 26`, in which case single letters `a, b, ...` are used.
    pub fn from_index_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, MonoidError> {
        let names = default_names(n);
        let named: Vec<(String, String)> = edges
            .iter()
            .map(|&(i, j)| {
                let get =
                    |k: usize| names.get(k).cloned().ok_or(MonoidError::IndexOutOfRange { index: k, vertices: n });
                Ok((get(i)?, get(j)?))
            })
            .collect::<Result<_, MonoidError>>()?;
        SimpleGraph::new(&names, &named)
    }

    pub fn edgeless(n: usize) -> Self {
        SimpleGraph::from_index_edges(n, &[]).expect("edgeless graph is valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        SimpleGraph::from_index_edges(n, &edges).expect("complete graph is valid")
    }

    pub fn complete_named<S: AsRef<str>>(names: &[S]) -> Result<Self, MonoidError> {
        let edges: Vec<(&str, &str)> = (0..names.len())
            .flat_map(|i| (i + 1..names.len()).map(move |j| (i, j)))
            .map(|(i, j)| (names[i].as_ref(), names[j].as_ref()))
            .collect();
        let names: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
        SimpleGraph::new(&names, &edges)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn name(&self, g: Generator) -> &str {
        &self.vertices[g]
    }

    pub fn index_of(&self, name: &str) -> Result<Generator, MonoidError> {
        self.vertices.iter().position(|v| v == name).ok_or_else(|| MonoidError::UnknownLetter(name.to_string()))
    }

    /// Whether distinct generators `a` and `b` commute. A generator never
    /// commutes with itself in this sense.
    pub fn commute(&self, a: Generator, b: Generator) -> bool {
        self.adjacency[a] >> b & 1 == 1
    }

    pub fn neighbors(&self, g: Generator) -> GenMask {
        self.adjacency[g]
    }

    pub fn all_mask(&self) -> GenMask {
        mask_below(self.len())
    }

    pub fn edges(&self) -> Vec<(Generator, Generator)> {
        (0..self.len())
            .flat_map(|i| (i + 1..self.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| self.commute(i, j))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        (0..self.len()).all(|i| self.adjacency[i] == self.all_mask() & !(1 << i))
    }

    pub fn is_clique(&self, set: GenMask) -> bool {
        iter_mask(set).all(|g| set & !(1 << g) & !self.adjacency[g] == 0)
    }
}

impl TryFrom<GraphSpec> for SimpleGraph {
    type Error = MonoidError;

    fn try_from(spec: GraphSpec) -> Result<Self, Self::Error> {
        let edges: Vec<(String, String)> = spec.edges.into_iter().map(|[a, b]| (a, b)).collect();
        SimpleGraph::new(&spec.vertices, &edges)
    }
}

impl From<SimpleGraph> for GraphSpec {
    fn from(g: SimpleGraph) -> Self {
        let edges = g.edges().into_iter().map(|(i, j)| [g.vertices[i].clone(), g.vertices[j].clone()]).collect();
        GraphSpec { vertices: g.vertices, edges }
    }
}

fn default_names(n: usize) -> Vec<String> {
    if n <= 26 {
        (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
    } else {
        (0..n).map(|i| format!("s{i}")).collect()
    }
}

pub(crate) fn mask_below(n: usize) -> GenMask {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Iterate the set bits of a mask in increasing order.
pub fn iter_mask(mut mask: GenMask) -> impl Iterator<Item = Generator> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let g = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(g)
        }
    })
}

/// An element of the monoid, stored as its lexicographically smallest word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MonoidElement {
    word: Vec<Generator>,
}

// Length is word length; the empty word is `is_identity`.
#[allow(clippy::len_without_is_empty)]
impl MonoidElement {
    pub fn identity() -> Self {
        MonoidElement { word: Vec::new() }
    }

    pub fn word(&self) -> &[Generator] {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    /// Multidegree: how often each generator occurs.
    pub fn degree(&self, vertices: usize) -> Vec<usize> {
        let mut deg = vec![0; vertices];
        for &g in &self.word {
            deg[g] += 1;
        }
        deg
    }

    pub fn support(&self) -> GenMask {
        self.word.iter().fold(0, |m, &g| m | 1 << g)
    }
}

/// Shortlex: shorter words first, then lexicographic.
impl Ord for MonoidElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.word.len().cmp(&other.word.len()).then_with(|| self.word.cmp(&other.word))
    }
}

impl PartialOrd for MonoidElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A monoid element or the symbol `∞` standing for "no common upper bound".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtendedElement {
    Finite(MonoidElement),
    Infinity,
}

impl ExtendedElement {
    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedElement::Infinity)
    }

    pub fn finite(&self) -> Option<&MonoidElement> {
        match self {
            ExtendedElement::Finite(p) => Some(p),
            ExtendedElement::Infinity => None,
        }
    }

    pub fn into_finite(self) -> Option<MonoidElement> {
        match self {
            ExtendedElement::Finite(p) => Some(p),
            ExtendedElement::Infinity => None,
        }
    }
}

/// Recognizer for lexicographic normal forms, read left to right.
///
/// A word is in normal form iff it has no factor `b u a` with `a < b` where
/// `a` commutes with `b` and with every letter of `u`. The state is the set of
/// letters that may not be appended next.
#[derive(Debug, Clone)]
pub struct NormalFormAutomaton {
    neighbors: Vec<GenMask>,
    lower_neighbors: Vec<GenMask>,
}

impl NormalFormAutomaton {
    pub fn new(graph: &SimpleGraph) -> Self {
        let neighbors: Vec<GenMask> = (0..graph.len()).map(|g| graph.neighbors(g)).collect();
        let lower_neighbors = neighbors.iter().enumerate().map(|(g, &m)| m & mask_below(g)).collect();
        NormalFormAutomaton { neighbors, lower_neighbors }
    }

    pub fn start(&self) -> GenMask {
        0
    }

    pub fn letters(&self) -> usize {
        self.neighbors.len()
    }

    pub fn step(&self, state: GenMask, letter: Generator) -> Option<GenMask> {
        if state >> letter & 1 == 1 {
            None
        } else {
            Some((state & self.neighbors[letter]) | self.lower_neighbors[letter])
        }
    }
}

/// The right-angled Artin monoid `P_Γ` of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArtinMonoid {
    graph: SimpleGraph,
}

impl ArtinMonoid {
    pub fn new(graph: SimpleGraph) -> Self {
        ArtinMonoid { graph }
    }

    pub fn graph(&self) -> &SimpleGraph {
        &self.graph
    }

    pub fn generators(&self) -> usize {
        self.graph.len()
    }

    pub fn generator(&self, g: Generator) -> MonoidElement {
        MonoidElement { word: vec![g] }
    }

    fn check_letters(&self, word: &[Generator]) -> Result<(), MonoidError> {
        let n = self.graph.len();
        match word.iter().find(|&&g| g >= n) {
            Some(&g) => Err(MonoidError::IndexOutOfRange { index: g, vertices: n }),
            None => Ok(()),
        }
    }

    /// Position of the first occurrence of `s` in `word`, provided it can be
    /// commuted to the front.
    fn front_position(&self, word: &[Generator], s: Generator) -> Option<usize> {
        let blockers = !self.graph.neighbors(s);
        let mut seen: GenMask = 0;
        for (i, &g) in word.iter().enumerate() {
            if g == s {
                return (seen & blockers == 0).then_some(i);
            }
            seen |= 1 << g;
            if seen & blockers != 0 {
                return None;
            }
        }
        None
    }

    /// Lex-min representative: repeatedly extract the smallest letter that
    /// can be commuted to the front.
    fn normal_word(&self, word: &[Generator]) -> Vec<Generator> {
        let mut rest: Vec<Generator> = word.to_vec();
        let mut out = Vec::with_capacity(rest.len());
        while !rest.is_empty() {
            let mut seen: GenMask = 0;
            let mut best: Option<(Generator, usize)> = None;
            for (i, &g) in rest.iter().enumerate() {
                if seen & !self.graph.neighbors(g) == 0 && best.is_none_or(|(b, _)| g < b) {
                    best = Some((g, i));
                }
                seen |= 1 << g;
            }
            let (g, i) = best.expect("the first letter is always movable");
            out.push(g);
            rest.remove(i);
        }
        out
    }

    pub fn normalize(&self, word: &[Generator]) -> Result<MonoidElement, MonoidError> {
        self.check_letters(word)?;
        Ok(MonoidElement { word: self.normal_word(word) })
    }

    /// Parse a word of vertex names. Single-character names may be written
    /// run together (`"aba"`); otherwise separate names with whitespace, `.`
    /// or `·`. `""` and `"e"` (unless `e` is a vertex) denote the identity.
    pub fn parse(&self, text: &str) -> Result<MonoidElement, MonoidError> {
        let text = text.trim();
        if text.is_empty() || (text == "e" && self.graph.index_of("e").is_err()) {
            return Ok(MonoidElement::identity());
        }
        let single = self.graph.vertices().iter().all(|v| v.chars().count() == 1);
        let tokens: Vec<String> = if single && !text.contains(['.', '·', ' ']) {
            text.chars().map(|c| c.to_string()).collect()
        } else {
            text.split(|c: char| c == '.' || c == '·' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect()
        };
        let word = tokens.iter().map(|t| self.graph.index_of(t)).collect::<Result<Vec<_>, _>>()?;
        self.normalize(&word)
    }

    pub fn format(&self, p: &MonoidElement) -> String {
        if p.is_identity() {
            return "e".to_string();
        }
        let single = self.graph.vertices().iter().all(|v| v.chars().count() == 1);
        let names: Vec<&str> = p.word.iter().map(|&g| self.graph.name(g)).collect();
        if single {
            names.concat()
        } else {
            names.join("·")
        }
    }

    pub fn format_extended(&self, p: &ExtendedElement) -> String {
        match p {
            ExtendedElement::Finite(p) => self.format(p),
            ExtendedElement::Infinity => "∞".to_string(),
        }
    }

    pub fn multiply(&self, p: &MonoidElement, q: &MonoidElement) -> Result<MonoidElement, MonoidError> {
        self.check_letters(&p.word)?;
        self.check_letters(&q.word)?;
        let mut word = p.word.clone();
        word.extend_from_slice(&q.word);
        Ok(MonoidElement { word: self.normal_word(&word) })
    }

    /// `r` with `p r = q`, if `p` left-divides `q`.
    pub fn left_quotient(&self, p: &MonoidElement, q: &MonoidElement) -> Result<Option<MonoidElement>, MonoidError> {
        self.check_letters(&p.word)?;
        self.check_letters(&q.word)?;
        let mut rest = q.word.clone();
        for &s in &p.word {
            match self.front_position(&rest, s) {
                Some(i) => {
                    rest.remove(i);
                }
                None => return Ok(None),
            }
        }
        Ok(Some(MonoidElement { word: self.normal_word(&rest) }))
    }

    /// Left divisibility `p ≤ q`, i.e. `q ∈ pP`.
    pub fn leq(&self, p: &MonoidElement, q: &MonoidElement) -> Result<bool, MonoidError> {
        Ok(self.left_quotient(p, q)?.is_some())
    }

    /// `p ∨ s` for a generator, by the three-way case split: `s` already a
    /// prefix, `s` new and commuting with all of `p`, or no upper bound.
    pub fn join_generator(&self, p: &MonoidElement, s: Generator) -> Result<ExtendedElement, MonoidError> {
        self.check_letters(&p.word)?;
        self.check_letters(&[s])?;
        if self.front_position(&p.word, s).is_some() {
            return Ok(ExtendedElement::Finite(p.clone()));
        }
        let support = p.support();
        if support >> s & 1 == 0 && support & !self.graph.neighbors(s) == 0 {
            let mut word = p.word.clone();
            word.push(s);
            return Ok(ExtendedElement::Finite(MonoidElement { word: self.normal_word(&word) }));
        }
        Ok(ExtendedElement::Infinity)
    }

    /// Least upper bound in the left-divisibility order.
    pub fn join(&self, p: &MonoidElement, q: &MonoidElement) -> Result<ExtendedElement, MonoidError> {
        self.check_letters(&p.word)?;
        self.check_letters(&q.word)?;
        // p ∨ (s q') = s · ((s⁻¹ (p ∨ s)) ∨ q')
        let mut prefix: Vec<Generator> = Vec::with_capacity(q.len());
        let mut left = p.clone();
        for &s in &q.word {
            let upper = match self.join_generator(&left, s)? {
                ExtendedElement::Finite(t) => t,
                ExtendedElement::Infinity => return Ok(ExtendedElement::Infinity),
            };
            left = self.left_quotient(&self.generator(s), &upper)?.expect("s divides p ∨ s");
            prefix.push(s);
        }
        prefix.extend_from_slice(&left.word);
        Ok(ExtendedElement::Finite(MonoidElement { word: self.normal_word(&prefix) }))
    }

    pub fn join_extended(&self, p: &ExtendedElement, q: &ExtendedElement) -> Result<ExtendedElement, MonoidError> {
        match (p, q) {
            (ExtendedElement::Finite(p), ExtendedElement::Finite(q)) => self.join(p, q),
            _ => Ok(ExtendedElement::Infinity),
        }
    }

    /// `q_K = ∨_{s∈K} s`: the product `s_K` when `K` is a clique, else `∞`.
    pub fn join_of_set(&self, set: &BTreeSet<Generator>) -> Result<ExtendedElement, MonoidError> {
        if set.is_empty() {
            return Err(MonoidError::EmptySet);
        }
        let word: Vec<Generator> = set.iter().copied().collect();
        self.check_letters(&word)?;
        let mask = set.iter().fold(0, |m, &g| m | 1 << g);
        if self.graph.is_clique(mask) {
            Ok(ExtendedElement::Finite(MonoidElement { word }))
        } else {
            Ok(ExtendedElement::Infinity)
        }
    }

    /// Product of the generators of a clique mask, as an element.
    pub fn clique_element(&self, clique: GenMask) -> MonoidElement {
        MonoidElement { word: iter_mask(clique).collect() }
    }

    /// Nonempty cliques, ordered by size and then lexicographically.
    pub fn cliques(&self, restrict_to: Option<&BTreeSet<Generator>>) -> Vec<BTreeSet<Generator>> {
        let allowed = match restrict_to {
            Some(set) => set.iter().filter(|&&g| g < self.graph.len()).fold(0, |m, &g| m | 1 << g),
            None => self.graph.all_mask(),
        };
        self.clique_masks(allowed).into_iter().map(|m| iter_mask(m).collect()).collect()
    }

    /// Nonempty cliques inside `allowed`, as masks, ordered by size and then
    /// lexicographically by sorted members.
    pub fn clique_masks(&self, allowed: GenMask) -> Vec<GenMask> {
        let mut found = Vec::new();
        let members: Vec<Generator> = iter_mask(allowed).collect();
        // Extend cliques one vertex at a time, keeping members increasing.
        fn grow(
            graph: &SimpleGraph,
            members: &[Generator],
            start: usize,
            current: GenMask,
            candidates: GenMask,
            found: &mut Vec<GenMask>,
        ) {
            for (k, &g) in members.iter().enumerate().skip(start) {
                if candidates >> g & 1 == 1 {
                    let next = current | 1 << g;
                    found.push(next);
                    grow(graph, members, k + 1, next, candidates & graph.neighbors(g), found);
                }
            }
        }
        grow(&self.graph, &members, 0, 0, allowed, &mut found);
        found.sort_by(|a, b| a.count_ones().cmp(&b.count_ones()).then_with(|| iter_mask(*a).cmp(iter_mask(*b))));
        found
    }

    /// All elements with word length at most `up_to_length`, in shortlex order.
    pub fn enumerate(&self, up_to_length: usize) -> Vec<MonoidElement> {
        let automaton = NormalFormAutomaton::new(&self.graph);
        let mut out = vec![MonoidElement::identity()];
        let mut level: Vec<(Vec<Generator>, GenMask)> = vec![(Vec::new(), automaton.start())];
        for _ in 0..up_to_length {
            let mut next = Vec::new();
            for (word, state) in &level {
                for g in 0..self.graph.len() {
                    if let Some(s) = automaton.step(*state, g) {
                        let mut w = word.clone();
                        w.push(g);
                        next.push((w, s));
                    }
                }
            }
            out.extend(next.iter().map(|(w, _)| MonoidElement { word: w.clone() }));
            level = next;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("weight of generator {0} must be positive and finite, got {1}")]
    NotPositive(Generator, f64),
}

/// The homomorphism `N: P → (0, ∞)` given by its values on generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightMap(Vec<f64>);

impl WeightMap {
    pub fn new(values: Vec<f64>) -> Result<Self, WeightError> {
        for (g, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(WeightError::NotPositive(g, v));
            }
        }
        Ok(WeightMap(values))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self, WeightError> {
        WeightMap::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, g: Generator) -> f64 {
        self.0[g]
    }

    pub fn weight(&self, p: &MonoidElement) -> f64 {
        p.word().iter().map(|&g| self.0[g]).product()
    }

    /// `N(p)^{-β}`.
    pub fn boltzmann(&self, p: &MonoidElement, beta: f64) -> f64 {
        p.word().iter().map(|&g| self.generator_factor(g, beta)).product()
    }

    /// `N(s)^{-β}` for one generator.
    pub fn generator_factor(&self, g: Generator, beta: f64) -> f64 {
        self.0[g].powf(-beta)
    }
}

impl fmt::Display for MonoidElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.word.iter().map(|g| g.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}
