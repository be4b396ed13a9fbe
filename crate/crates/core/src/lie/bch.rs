//! Baker–Campbell–Hausdorff series truncated at the nilpotency step.
//!
//! Terms come from Dynkin's formula as right-nested brackets
//! `[w1, [w2, … [w_{m-1}, w_m]]]` of words in the letters X, Y. Words are
//! normalized (the innermost pair is always `[X, Y]`) and stored in a trie keyed
//! on the reversed word, so shared inner brackets are computed once.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::scalar::{Coords, Rational, Ring, Scalar};

use super::algebra::{bracket_with, BracketEntry};

pub const X: u8 = 0;
pub const Y: u8 = 1;

#[derive(Clone, Debug)]
struct Node<T> {
    letter: u8,
    coeff: Option<T>,
    children: Vec<usize>,
}

/// Coefficients of `log(exp X exp Y)` up to a fixed degree.
#[derive(Clone, Debug)]
pub struct BchSeries<T> {
    degree: usize,
    terms: Vec<(Vec<u8>, T)>,
    nodes: Vec<Node<T>>,
    roots: Vec<usize>,
}

fn factorial(n: usize) -> Rational {
    (1..=n).fold(Rational::one(), |acc, k| acc * Rational::from_i64(k as i64))
}

/// All sequences of `blocks` pairs `(r, s)` with `r + s >= 1` and total degree `<= max`.
fn block_sequences(blocks: usize, max: usize) -> Vec<Vec<(usize, usize)>> {
    if blocks == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in block_sequences(blocks - 1, max) {
        let used: usize = rest.iter().map(|(r, s)| r + s).sum();
        for r in 0..=max - used.min(max) {
            for s in 0..=max - used - r {
                if r + s >= 1 && used + r + s <= max {
                    let mut seq = rest.clone();
                    seq.push((r, s));
                    out.push(seq);
                }
            }
        }
    }
    out
}

impl BchSeries<Rational> {
    /// Dynkin's formula truncated at total degree `degree`.
    pub fn dynkin(degree: usize) -> Self {
        let degree = degree.max(1);
        let mut acc: BTreeMap<Vec<u8>, Rational> = BTreeMap::new();
        for n in 1..=degree {
            let sign = if n % 2 == 1 { Rational::one() } else { -Rational::one() };
            let outer = sign / Rational::from_i64(n as i64);
            for seq in block_sequences(n, degree) {
                let mut word = Vec::new();
                let mut denom = Rational::one();
                for &(r, s) in &seq {
                    word.extend(std::iter::repeat_n(X, r));
                    word.extend(std::iter::repeat_n(Y, s));
                    denom = denom * factorial(r) * factorial(s);
                }
                let m = word.len();
                denom = denom * Rational::from_i64(m as i64);
                let mut coeff = outer.clone() / denom;
                if m >= 2 {
                    if word[m - 2] == word[m - 1] {
                        continue;
                    }
                    if word[m - 2] == Y {
                        word.swap(m - 2, m - 1);
                        coeff = -coeff;
                    }
                }
                *acc.entry(word).or_insert_with(Rational::zero) += coeff;
            }
        }
        let terms: Vec<(Vec<u8>, Rational)> = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Self::from_terms(degree, terms)
    }
}

impl<T: Clone> BchSeries<T> {
    fn from_terms(degree: usize, terms: Vec<(Vec<u8>, T)>) -> Self {
        let mut nodes: Vec<Node<T>> = Vec::new();
        let mut roots: Vec<usize> = Vec::new();
        for (word, coeff) in &terms {
            let mut parent: Option<usize> = None;
            for &letter in word.iter().rev() {
                let siblings = match parent {
                    None => &roots,
                    Some(p) => &nodes[p].children,
                };
                let idx = match siblings.iter().copied().find(|&i| nodes[i].letter == letter) {
                    Some(i) => i,
                    None => {
                        nodes.push(Node { letter, coeff: None, children: Vec::new() });
                        let i = nodes.len() - 1;
                        match parent {
                            None => roots.push(i),
                            Some(p) => nodes[p].children.push(i),
                        }
                        i
                    }
                };
                parent = Some(idx);
            }
            if let Some(i) = parent {
                nodes[i].coeff = Some(coeff.clone());
            }
        }
        BchSeries { degree, terms, nodes, roots }
    }

    /// Converts coefficients to another number type.
    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> BchSeries<U> {
        BchSeries::from_terms(self.degree, self.terms.iter().map(|(w, c)| (w.clone(), f(c))).collect())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Normalized words (letters [`X`], [`Y`]) with their coefficients.
    pub fn terms(&self) -> &[(Vec<u8>, T)] {
        &self.terms
    }
}

impl<T: Ring> BchSeries<T> {
    pub(crate) fn eval(&self, brackets: &[BracketEntry<T>], x: &[T], y: &[T]) -> Coords<T> {
        let mut out: Coords<T> = x.iter().zip(y).map(|(a, b)| a.clone() + b.clone()).collect();
        if self.nodes.len() <= 2 {
            return out;
        }
        let mut stack: Vec<(usize, Coords<T>)> = Vec::with_capacity(8);
        for &r in &self.roots {
            let v: Coords<T> = if self.nodes[r].letter == X { x.iter().cloned().collect() } else { y.iter().cloned().collect() };
            for &c in &self.nodes[r].children {
                stack.push((c, v.clone()));
            }
        }
        while let Some((idx, inner)) = stack.pop() {
            let node = &self.nodes[idx];
            let letter = if node.letter == X { x } else { y };
            let v = bracket_with(brackets, letter, &inner);
            if v.iter().all(|c| *c == T::zero()) {
                continue;
            }
            if let Some(c) = &node.coeff {
                for (o, vi) in out.iter_mut().zip(&v) {
                    *o = o.clone() + c.clone() * vi.clone();
                }
            }
            for &ch in &node.children {
                stack.push((ch, v.clone()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn degree_three_terms() {
        let s = BchSeries::dynkin(3);
        let terms: Vec<(Vec<u8>, Rational)> = s.terms().to_vec();
        assert_eq!(
            terms,
            vec![
                (vec![X], ratio(1, 1)),
                (vec![X, X, Y], ratio(1, 12)),
                (vec![X, Y], ratio(1, 2)),
                (vec![Y], ratio(1, 1)),
                (vec![Y, X, Y], ratio(-1, 12)),
            ]
        );
    }
}
