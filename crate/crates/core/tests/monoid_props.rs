use artin_kms::monoid::{ArtinMonoid, ExtendedElement, SimpleGraph};
use artin_kms::MonoidElement;
use proptest::prelude::*;

fn graph(n: usize, mask: u32) -> SimpleGraph {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let edges: Vec<(usize, usize)> =
        pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
    SimpleGraph::from_index_edges(n, &edges).unwrap()
}

fn monoid_and_words(max_len: usize, words: usize) -> impl Strategy<Value = (ArtinMonoid, Vec<Vec<usize>>)> {
    (1usize..=4, any::<u32>()).prop_flat_map(move |(n, mask)| {
        let word = proptest::collection::vec(0..n, 0..=max_len);
        (Just(ArtinMonoid::new(graph(n, mask))), proptest::collection::vec(word, words))
    })
}

/// Swaps one adjacent pair of commuting letters, if there is one at `at`.
fn swap_commuting(monoid: &ArtinMonoid, word: &[usize], at: usize) -> Vec<usize> {
    let mut w = word.to_vec();
    if w.len() >= 2 {
        let i = at % (w.len() - 1);
        if monoid.graph().commute(w[i], w[i + 1]) {
            w.swap(i, i + 1);
        }
    }
    w
}

proptest! {
    #[test]
    fn normalize_is_idempotent_and_class_invariant((m, ws) in monoid_and_words(8, 1), at in 0usize..8) {
        let p = m.normalize(&ws[0]).unwrap();
        prop_assert_eq!(&m.normalize(p.word()).unwrap(), &p);
        prop_assert_eq!(&m.normalize(&swap_commuting(&m, &ws[0], at)).unwrap(), &p);
        prop_assert_eq!(p.len(), ws[0].len());
    }

    #[test]
    fn multiplication_is_associative((m, ws) in monoid_and_words(4, 3)) {
        let [a, b, c] = [0, 1, 2].map(|i| m.normalize(&ws[i]).unwrap());
        let left = m.multiply(&m.multiply(&a, &b).unwrap(), &c).unwrap();
        let right = m.multiply(&a, &m.multiply(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn order_agrees_with_left_quotients((m, ws) in monoid_and_words(4, 2)) {
        let p = m.normalize(&ws[0]).unwrap();
        let r = m.normalize(&ws[1]).unwrap();
        let q = m.multiply(&p, &r).unwrap();
        prop_assert!(m.leq(&p, &q).unwrap());
        prop_assert_eq!(m.left_quotient(&p, &q).unwrap(), Some(r));
        prop_assert!(m.leq(&MonoidElement::identity(), &p).unwrap());
    }

    #[test]
    fn joins_are_least_upper_bounds((m, ws) in monoid_and_words(3, 3)) {
        let [p, q, r] = [0, 1, 2].map(|i| m.normalize(&ws[i]).unwrap());
        let join = m.join(&p, &q).unwrap();
        prop_assert_eq!(&join, &m.join(&q, &p).unwrap());
        // p·r is an upper bound of p; if it also bounds q the join lies below it
        let bound = m.multiply(&p, &r).unwrap();
        match &join {
            ExtendedElement::Finite(j) => {
                prop_assert!(m.leq(&p, j).unwrap() && m.leq(&q, j).unwrap());
                if m.leq(&q, &bound).unwrap() {
                    prop_assert!(m.leq(j, &bound).unwrap());
                }
            }
            ExtendedElement::Infinity => prop_assert!(!m.leq(&q, &bound).unwrap()),
        }
    }
}

#[test]
fn enumeration_counts_match_growth_series() {
    // free monoid on 2 letters: 2^k elements of length k
    let free = ArtinMonoid::new(SimpleGraph::edgeless(2));
    assert_eq!(free.enumerate(5).len(), 63);
    // Z^2_+: k + 1 elements of length k
    let abelian = ArtinMonoid::new(SimpleGraph::complete(2));
    assert_eq!(abelian.enumerate(5).len(), 21);
}

#[test]
fn order_matches_divisibility_exhaustively() {
    for graph in [SimpleGraph::edgeless(2), graph(3, 0b001), graph(3, 0b101)] {
        let m = ArtinMonoid::new(graph);
        let short = m.enumerate(4);
        let products: std::collections::HashSet<(usize, MonoidElement)> = short
            .iter()
            .enumerate()
            .flat_map(|(i, p)| short.iter().map(move |r| (i, p, r)))
            .map(|(i, p, r)| (i, m.multiply(p, r).unwrap()))
            .collect();
        for (i, p) in short.iter().enumerate() {
            for q in &short {
                let divides = products.contains(&(i, q.clone()));
                assert_eq!(m.leq(p, q).unwrap(), divides, "{} ≤ {}", m.format(p), m.format(q));
            }
        }
    }
}
