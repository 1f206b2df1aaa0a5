//! The direct-product query graph and empirical checks of its sampler
//! property.
//!
//! The base domain `X` is abstract: elements are indices `0..|X|`. A right
//! vertex is a tuple in `Y = X^k`; `x` is joined to every tuple carrying `x`
//! in some slot, with the slot and the other coordinates uniform.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::hash::unit_hash;

/// Which slot the real instance occupies in a direct-product query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Auto,
    Fixed(usize),
}

/// Embeds `x` into a `k`-tuple: draws the slot `i` (unless pinned) and then
/// `k - 1` fresh co-instances in slot order. Returns the tuple and `i`.
pub fn direct_product_reduce<T, R, F>(
    x: T,
    k: usize,
    slot: Slot,
    rng: &mut R,
    mut fresh: F,
) -> Result<(Vec<T>, usize)>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<T>,
{
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let i = match slot {
        Slot::Auto => rng.gen_range(0..k),
        Slot::Fixed(i) if i < k => i,
        Slot::Fixed(i) => {
            return Err(Error::IndexOutOfRange(format!("slot {i} with k = {k}")));
        }
    };
    let mut tuple = Vec::with_capacity(k);
    let mut x = Some(x);
    for s in 0..k {
        if s == i {
            tuple.push(x.take().expect("slot visited once"));
        } else {
            tuple.push(fresh(rng)?);
        }
    }
    Ok((tuple, i))
}

/// The bipartite query graph of the `k`-wise direct-product reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QueryGraph {
    pub k: usize,
    pub base_size: u64,
}

impl QueryGraph {
    pub fn new(k: usize, base_size: u64) -> Result<Self> {
        if k == 0 || base_size == 0 {
            return Err(Error::InvalidParameter(format!(
                "query graph needs k >= 1 and |X| >= 1, got k = {k}, |X| = {base_size}"
            )));
        }
        Ok(Self { k, base_size })
    }

    /// Base domain `F_p^dim`.
    pub fn over_field(field: PrimeField, dim: u32, k: usize) -> Result<Self> {
        let size = field
            .order()
            .checked_pow(dim)
            .ok_or_else(|| Error::InstanceTooLarge(format!("{field}^{dim}")))?;
        Self::new(k, size)
    }

    /// `|Y| = |X|^k`, if it fits in a `u64`.
    pub fn right_size(&self) -> Option<u64> {
        self.base_size.checked_pow(self.k as u32)
    }

    pub fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.base_size)
    }

    pub fn sample_right<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        (0..self.k).map(|_| self.sample_base(rng)).collect()
    }

    /// One edge from `x`: the direct-product embedding of `x`.
    pub fn neighbour<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> Vec<u64> {
        let base = self.base_size;
        direct_product_reduce(x, self.k, Slot::Auto, rng, |r| Ok(r.gen_range(0..base)))
            .expect("k >= 1")
            .0
    }

    fn decode(&self, mut index: u64, out: &mut [u64]) {
        for slot in out.iter_mut().rev() {
            *slot = index % self.base_size;
            index /= self.base_size;
        }
    }
}

/// Membership rule of a right-vertex set.
#[derive(Clone)]
pub enum Membership {
    All,
    /// Keyed hash of the tuple below `threshold`.
    Hashed {
        seed: u64,
        threshold: f64,
    },
    Custom(Arc<dyn Fn(&[u64]) -> bool + Send + Sync>),
}

impl fmt::Debug for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Membership::All => write!(f, "All"),
            Membership::Hashed { seed, threshold } => {
                write!(f, "Hashed {{ seed: {seed}, threshold: {threshold} }}")
            }
            Membership::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A subset `U ⊆ Y` with a declared density.
#[derive(Debug, Clone)]
pub struct DenseSet {
    pub membership: Membership,
    pub declared_density: f64,
}

impl DenseSet {
    pub fn all() -> Self {
        Self {
            membership: Membership::All,
            declared_density: 1.0,
        }
    }

    /// A pseudorandom set of expected density `density`.
    pub fn random(seed: u64, density: f64) -> Self {
        Self {
            membership: Membership::Hashed {
                seed,
                threshold: density,
            },
            declared_density: density,
        }
    }

    pub fn custom(density: f64, f: impl Fn(&[u64]) -> bool + Send + Sync + 'static) -> Self {
        Self {
            membership: Membership::Custom(Arc::new(f)),
            declared_density: density,
        }
    }

    pub fn contains(&self, y: &[u64]) -> bool {
        match &self.membership {
            Membership::All => true,
            Membership::Hashed { seed, threshold } => unit_hash(*seed, y) < *threshold,
            Membership::Custom(f) => f(y),
        }
    }

    /// `Pr[Y ∈ U]` by enumerating `Y`.
    pub fn exact_density(&self, graph: &QueryGraph, limit: u64) -> Result<f64> {
        let size = graph
            .right_size()
            .filter(|&s| s <= limit)
            .ok_or_else(|| Error::InstanceTooLarge(format!("|X|^k exceeds {limit}")))?;
        let mut y = vec![0u64; graph.k];
        let mut hits = 0u64;
        for idx in 0..size {
            graph.decode(idx, &mut y);
            hits += self.contains(&y) as u64;
        }
        Ok(hits as f64 / size as f64)
    }

    pub fn estimate_density<R: Rng + ?Sized>(
        &self,
        graph: &QueryGraph,
        samples: u64,
        rng: &mut R,
    ) -> f64 {
        let hits = (0..samples)
            .filter(|_| self.contains(&graph.sample_right(rng)))
            .count();
        hits as f64 / samples as f64
    }
}

/// `2·exp(-k c² δ / 8) ≤ c ε`: the sampler lemma's sufficient condition.
pub fn lemma_condition(k: usize, c: f64, delta: f64, epsilon: f64) -> bool {
    2.0 * (-(k as f64) * c * c * delta / 8.0).exp() <= c * epsilon
}

/// `ε ≥ 4·exp(-δ k / 32)`: the amplification theorem's condition.
pub fn theorem_condition(k: usize, delta: f64, epsilon: f64) -> bool {
    epsilon >= 4.0 * (-delta * k as f64 / 32.0).exp()
}

/// Smallest density allowed by [`lemma_condition`] for the given `k, c, δ`.
pub fn lemma_min_density(k: usize, c: f64, delta: f64) -> f64 {
    2.0 * (-(k as f64) * c * c * delta / 8.0).exp() / c
}

/// Outcome of a sampler check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerCheck {
    /// Fraction of left vertices whose hit rate is at most `(1 - c)·Pr[Y ∈ U]`.
    pub violation_fraction: f64,
    pub violations: u64,
    pub left_samples: u64,
    /// `Pr[Y ∈ U]`, exact or estimated.
    pub density: f64,
    /// `(1 - c)·density`.
    pub threshold: f64,
}

fn check_params(set: &DenseSet, c: f64, delta: f64) -> Result<()> {
    if !(0.0 < c && c < delta && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sampler parameters need 0 < c < delta < 1, got c = {c}, delta = {delta}"
        )));
    }
    let eps = set.declared_density;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density {eps} is not in (0, 1]"
        )));
    }
    Ok(())
}

/// Largest `|Y|` enumerated when computing densities exactly.
pub const DENSITY_ENUMERATION_LIMIT: u64 = 1 << 22;

/// Monte Carlo sampler check: for `left_samples` uniform `x`, estimates
/// `Pr[Y ∈ U | X = x]` from `per_left` edges and counts how often it falls
/// to `(1 - c)·Pr[Y ∈ U]` or below. The density is exact when `|Y|` is small
/// enough to enumerate.
pub fn check_sampler<R: Rng + ?Sized>(
    graph: &QueryGraph,
    set: &DenseSet,
    c: f64,
    delta: f64,
    left_samples: u64,
    per_left: u64,
    rng: &mut R,
) -> Result<SamplerCheck> {
    check_params(set, c, delta)?;
    if left_samples == 0 || per_left == 0 {
        return Err(Error::InvalidParameter(
            "sample counts must be positive".into(),
        ));
    }
    let density = match set.exact_density(graph, DENSITY_ENUMERATION_LIMIT) {
        Ok(d) => d,
        Err(_) => set.estimate_density(graph, left_samples * per_left, rng),
    };
    let threshold = (1.0 - c) * density;
    let mut violations = 0;
    for _ in 0..left_samples {
        let x = graph.sample_base(rng);
        let hits = (0..per_left)
            .filter(|_| set.contains(&graph.neighbour(x, rng)))
            .count();
        if hits as f64 / per_left as f64 <= threshold {
            violations += 1;
        }
    }
    Ok(SamplerCheck {
        violation_fraction: violations as f64 / left_samples as f64,
        violations,
        left_samples,
        density,
        threshold,
    })
}

/// Exact conditional hit probability `Pr[Y ∈ U | X = x]` by enumerating the
/// slot and all co-instances.
pub fn exact_conditional(graph: &QueryGraph, set: &DenseSet, x: u64, limit: u64) -> Result<f64> {
    let co = graph
        .base_size
        .checked_pow(graph.k as u32 - 1)
        .filter(|&s| s.saturating_mul(graph.k as u64) <= limit)
        .ok_or_else(|| Error::InstanceTooLarge(format!("k·|X|^(k-1) exceeds {limit}")))?;
    let k = graph.k;
    let mut rest = vec![0u64; k - 1];
    let mut y = vec![0u64; k];
    let mut hits = 0u64;
    for slot in 0..k {
        for idx in 0..co {
            let mut t = idx;
            for r in rest.iter_mut().rev() {
                *r = t % graph.base_size;
                t /= graph.base_size;
            }
            y[..slot].copy_from_slice(&rest[..slot]);
            y[slot] = x;
            y[slot + 1..].copy_from_slice(&rest[slot..]);
            hits += set.contains(&y) as u64;
        }
    }
    Ok(hits as f64 / (co * k as u64) as f64)
}

/// Exact violation fraction by full enumeration of `X`, the slot, and the
/// co-instances.
pub fn exact_violation_fraction(
    graph: &QueryGraph,
    set: &DenseSet,
    c: f64,
    delta: f64,
) -> Result<SamplerCheck> {
    check_params(set, c, delta)?;
    let limit = DENSITY_ENUMERATION_LIMIT;
    let density = set.exact_density(graph, limit)?;
    let threshold = (1.0 - c) * density;
    let mut violations = 0;
    for x in 0..graph.base_size {
        if exact_conditional(graph, set, x, limit)? <= threshold {
            violations += 1;
        }
    }
    Ok(SamplerCheck {
        violation_fraction: violations as f64 / graph.base_size as f64,
        violations,
        left_samples: graph.base_size,
        density,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn reduce_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (t, i) = direct_product_reduce(7u64, 1, Slot::Auto, &mut rng, |_| Ok(0)).unwrap();
        assert_eq!((t, i), (vec![7], 0));
        let (t, i) =
            direct_product_reduce(9u64, 4, Slot::Fixed(0), &mut rng, |r| Ok(r.gen_range(0..3)))
                .unwrap();
        assert_eq!((t[0], i, t.len()), (9, 0, 4));
        assert!(direct_product_reduce(1u64, 2, Slot::Fixed(2), &mut rng, |_| Ok(0)).is_err());
        assert!(direct_product_reduce(1u64, 0, Slot::Auto, &mut rng, |_| Ok(0)).is_err());
    }

    #[test]
    fn embedded_tuple_law_matches_product_law_by_counting() {
        // With x uniform, (slot, co-instances) uniform: count how many
        // (x, slot, rest) triples produce each tuple. Every tuple of X^k must
        // arise exactly k·|X|^{k-1}·|X| / |X|^k = k times.
        for base in 1..=4u64 {
            for k in 1..=3usize {
                let mut counts: HashMap<Vec<u64>, u64> = HashMap::new();
                let co = base.pow(k as u32 - 1);
                for x in 0..base {
                    for slot in 0..k {
                        for idx in 0..co {
                            let mut rest: Vec<u64> = (0..k - 1)
                                .map(|p| (idx / base.pow(p as u32)) % base)
                                .collect();
                            rest.insert(slot, x);
                            *counts.entry(rest).or_default() += 1;
                        }
                    }
                }
                assert_eq!(counts.len() as u64, base.pow(k as u32));
                assert!(counts.values().all(|&c| c == k as u64), "base={base} k={k}");
            }
        }
    }

    #[test]
    fn embedded_tuple_chi_square() {
        // |X| = 4, k = 2: 16 cells, 15 degrees of freedom; the 0.999 quantile
        // of chi-square(15) is 37.70.
        let graph = QueryGraph::new(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 16_000;
        let mut counts = [0u64; 16];
        for _ in 0..draws {
            let x = graph.sample_base(&mut rng);
            let y = graph.neighbour(x, &mut rng);
            counts[(y[0] * 4 + y[1]) as usize] += 1;
        }
        let expect = draws as f64 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        assert!(chi2 < 37.70, "{chi2}");
    }

    #[test]
    fn left_marginal_is_uniform() {
        // chi-square(3) at 0.999 is 16.27.
        let graph = QueryGraph::new(3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut counts = [0u64; 4];
        for _ in 0..8000 {
            counts[graph.sample_base(&mut rng) as usize] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - 2000.0).powi(2) / 2000.0)
            .sum();
        assert!(chi2 < 16.27, "{chi2}");
    }

    #[test]
    fn full_set_has_no_violations() {
        let graph = QueryGraph::new(8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let check = check_sampler(&graph, &DenseSet::all(), 0.5, 0.9, 100, 20, &mut rng).unwrap();
        assert_eq!(check.violation_fraction, 0.0);
        assert_eq!(check.density, 1.0);
        let exact = exact_violation_fraction(&graph, &DenseSet::all(), 0.5, 0.9).unwrap();
        assert_eq!(exact.violations, 0);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        let graph = QueryGraph::new(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let empty = DenseSet::random(0, 0.0);
        assert!(check_sampler(&graph, &empty, 0.1, 0.5, 10, 10, &mut rng).is_err());
        let set = DenseSet::random(0, 0.5);
        assert!(check_sampler(&graph, &set, 0.5, 0.1, 10, 10, &mut rng).is_err());
        assert!(check_sampler(&graph, &set, 0.1, 1.0, 10, 10, &mut rng).is_err());
        assert!(check_sampler(&graph, &set, 0.1, 0.5, 0, 10, &mut rng).is_err());
        assert!(QueryGraph::new(0, 2).is_err());
    }

    #[test]
    fn conditions() {
        assert!(!lemma_condition(32, 0.5, 0.9, 0.25));
        let eps = lemma_min_density(16, 0.95, 0.99);
        assert!(lemma_condition(16, 0.95, 0.99, eps + 1e-12));
        assert!(!lemma_condition(16, 0.95, 0.99, eps - 1e-6));
        assert!(theorem_condition(3200, 0.01, 4.0 * (-1.0f64).exp()));
        assert!(!theorem_condition(3199, 0.01, 4.0 * (-1.0f64).exp()));
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let graph = QueryGraph::new(6, 2).unwrap();
        let set = DenseSet::random(11, 0.4);
        let x_hit: Vec<f64> = (0..2)
            .map(|x| exact_conditional(&graph, &set, x, 1 << 20).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (x, &p) in x_hit.iter().enumerate() {
            let n = 20_000;
            let hits = (0..n)
                .filter(|_| set.contains(&graph.neighbour(x as u64, &mut rng)))
                .count();
            let est = hits as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (est - p).abs() < 4.0 * sd + 1e-9,
                "x={x} exact={p} est={est}"
            );
        }
        // Averaging the conditional over uniform x recovers the density.
        let density = set.exact_density(&graph, 1 << 20).unwrap();
        let avg = x_hit.iter().sum::<f64>() / 2.0;
        assert!((avg - density).abs() < 1e-12);
    }

    #[test]
    fn field_base_domain() {
        let g = QueryGraph::over_field(PrimeField::new(2).unwrap(), 2, 3).unwrap();
        assert_eq!(g.base_size, 4);
        assert_eq!(g.right_size(), Some(64));
    }
}
