//! Finite-alphabet spin models and their one-site conditional distributions.
//!
//! A model consists of an ordered alphabet, strictly positive reference
//! weights, symmetric pair potentials per undirected edge, and a nonnegative
//! weight function h on symbols. The conditional distribution at a site given
//! its neighbor symbols is the Gibbs kernel
//!
//! ```text
//!   π_ℓ^x(ξ) ∝ σ(ξ) · exp( Σ_{ℓ'∈∂ℓ} W_{ℓℓ'}(ξ, x_{ℓ'}) )
//! ```
//!
//! which depends on x only through the neighbors of ℓ. The module also
//! provides the total-variation distance, the exhaustive per-edge sensitivity
//! estimator (the supremum of conditional-distribution distances over
//! admissible single-neighbor changes), and a full membership verification:
//! whether user-supplied matrices (κ, c) genuinely dominate the model's
//! sensitivities and conditional h-moments at cutoff K. Everything is a
//! finite maximum; nothing is sampled.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::criterion::ContractionParams;
use crate::error::SpinError;
use crate::graph::{max_degree, Graph};

/// A finite spin model bound to a graph's vertex set.
///
/// Potentials are stored once per undirected edge with rows indexed by the
/// lower-index endpoint, so the symmetry W_{ℓℓ'}(ξ, η) = W_{ℓ'ℓ}(η, ξ) holds
/// by construction. Edges without a table do not interact.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpinModel {
    alphabet: Vec<String>,
    ref_weights: Vec<f64>,
    h_values: Vec<f64>,
    potentials: BTreeMap<(usize, usize), Vec<f64>>,
}

impl FiniteSpinModel {
    /// Builds a model with no interactions yet.
    ///
    /// `ref_weights` are relative weights: they must be strictly positive and
    /// finite and are normalized internally, so the stored reference measure
    /// always sums to one. `h_values` must be nonnegative and finite.
    pub fn new(
        alphabet: Vec<String>,
        ref_weights: Vec<f64>,
        h_values: Vec<f64>,
    ) -> Result<Self, SpinError> {
        let m = alphabet.len();
        if m < 2 {
            return Err(SpinError::AlphabetTooSmall(m));
        }
        for (i, s) in alphabet.iter().enumerate() {
            if alphabet[..i].contains(s) {
                return Err(SpinError::DuplicateSymbol(s.clone()));
            }
        }
        if ref_weights.len() != m {
            return Err(SpinError::LengthMismatch {
                expected: m,
                got: ref_weights.len(),
            });
        }
        if h_values.len() != m {
            return Err(SpinError::LengthMismatch {
                expected: m,
                got: h_values.len(),
            });
        }
        for (s, &w) in alphabet.iter().zip(&ref_weights) {
            if !w.is_finite() || w <= 0.0 {
                return Err(SpinError::NonPositiveWeight {
                    symbol: s.clone(),
                    value: w,
                });
            }
        }
        for (s, &v) in alphabet.iter().zip(&h_values) {
            if !v.is_finite() || v < 0.0 {
                return Err(SpinError::InvalidH {
                    symbol: s.clone(),
                    value: v,
                });
            }
        }
        let total: f64 = ref_weights.iter().sum();
        let ref_weights = ref_weights.iter().map(|w| w / total).collect();
        Ok(FiniteSpinModel {
            alphabet,
            ref_weights,
            h_values,
            potentials: BTreeMap::new(),
        })
    }

    /// Attaches a pair potential to the edge (`a`, `b`) of `g`.
    ///
    /// `table[ξ][η]` is the interaction of symbol ξ at `a` with symbol η at
    /// `b`; the reverse orientation is the transpose. One table per edge.
    pub fn add_potential(
        &mut self,
        g: &Graph,
        a: &str,
        b: &str,
        table: &[Vec<f64>],
    ) -> Result<(), SpinError> {
        let m = self.alphabet.len();
        let i = g.index_of(a)?;
        let j = g.index_of(b)?;
        if !g.has_edge(i, j) {
            return Err(SpinError::PotentialOnNonEdge {
                a: a.to_owned(),
                b: b.to_owned(),
            });
        }
        let shape_ok = table.len() == m
            && table.iter().all(|row| row.len() == m)
            && table.iter().flatten().all(|v| v.is_finite());
        if !shape_ok {
            return Err(SpinError::BadPotentialShape {
                a: a.to_owned(),
                b: b.to_owned(),
                m,
            });
        }
        let key = (i.min(j), i.max(j));
        if self.potentials.contains_key(&key) {
            return Err(SpinError::DuplicatePotential {
                a: a.to_owned(),
                b: b.to_owned(),
            });
        }
        // Store with rows indexed by the lower endpoint.
        let mut flat = vec![0.0; m * m];
        for (xi, row) in table.iter().enumerate() {
            for (eta, &w) in row.iter().enumerate() {
                if i < j {
                    flat[xi * m + eta] = w;
                } else {
                    flat[eta * m + xi] = w;
                }
            }
        }
        self.potentials.insert(key, flat);
        Ok(())
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn symbol_count(&self) -> usize {
        self.alphabet.len()
    }

    pub fn ref_weights(&self) -> &[f64] {
        &self.ref_weights
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h_values
    }

    /// The index of a symbol by name.
    pub fn symbol_index(&self, symbol: &str) -> Result<usize, SpinError> {
        self.alphabet
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| SpinError::UnknownSymbol(symbol.to_owned()))
    }

    /// Interaction of symbol `sym_i` at vertex `i` with `sym_j` at vertex `j`.
    #[inline]
    pub fn pair_energy(&self, i: usize, j: usize, sym_i: usize, sym_j: usize) -> f64 {
        let m = self.alphabet.len();
        let key = (i.min(j), i.max(j));
        match self.potentials.get(&key) {
            None => 0.0,
            Some(flat) => {
                if i < j {
                    flat[sym_i * m + sym_j]
                } else {
                    flat[sym_j * m + sym_i]
                }
            }
        }
    }

    /// One-site conditional at `site` given symbols for its neighbors,
    /// aligned with `g.neighbors(site)`.
    pub fn conditional_codes(
        &self,
        g: &Graph,
        site: usize,
        neighbor_syms: &[usize],
    ) -> LocalDistribution {
        let nbrs = g.neighbors(site);
        assert_eq!(
            neighbor_syms.len(),
            nbrs.len(),
            "one symbol per neighbor required"
        );
        let m = self.alphabet.len();
        let mut weights = vec![0.0; m];
        for (xi, w) in weights.iter_mut().enumerate() {
            let mut energy = 0.0;
            for (k, &nb) in nbrs.iter().enumerate() {
                energy += self.pair_energy(site, nb, xi, neighbor_syms[k]);
            }
            *w = self.ref_weights[xi] * energy.exp();
        }
        LocalDistribution::from_weights(weights)
    }

    /// Conditional h-moment π_ℓ^x(h) for the same arguments.
    pub fn conditional_h(&self, g: &Graph, site: usize, neighbor_syms: &[usize]) -> f64 {
        self.conditional_codes(g, site, neighbor_syms)
            .expectation(&self.h_values)
    }
}

/// A probability distribution over the model's alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDistribution {
    probs: Vec<f64>,
}

impl LocalDistribution {
    /// Normalizes strictly positive relative weights.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        assert!(
            total > 0.0 && total.is_finite(),
            "distribution weights must have positive finite total"
        );
        LocalDistribution {
            probs: weights.iter().map(|w| w / total).collect(),
        }
    }

    /// Wraps probabilities that must already be nonnegative and sum to 1
    /// within 1e-12.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, SpinError> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0)
            || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(SpinError::LengthMismatch {
                expected: probs.len(),
                got: probs.len(),
            });
        }
        Ok(LocalDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Expectation of per-symbol values.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.probs.len());
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

/// One-site conditional distribution at `site`, with the boundary given as a
/// map from neighbor id to symbol name. Every neighbor must be assigned.
pub fn conditional(
    model: &FiniteSpinModel,
    g: &Graph,
    site: &str,
    boundary: &BTreeMap<String, String>,
) -> Result<LocalDistribution, SpinError> {
    let s = g.index_of(site)?;
    let mut codes = Vec::with_capacity(g.degree(s));
    for &nb in g.neighbors(s) {
        let id = g.id_of(nb);
        let symbol = boundary
            .get(id)
            .ok_or_else(|| SpinError::MissingNeighbor(id.to_owned()))?;
        codes.push(model.symbol_index(symbol)?);
    }
    Ok(model.conditional_codes(g, s, &codes))
}

/// Total-variation distance: half the L1 distance on a finite alphabet,
/// which equals the supremum over events.
pub fn tv_distance(p: &LocalDistribution, q: &LocalDistribution) -> Result<f64, SpinError> {
    if p.len() != q.len() {
        return Err(SpinError::AlphabetMismatch(p.len(), q.len()));
    }
    let l1: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(0.5 * l1)
}

/// Result of the exhaustive per-edge sensitivity estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaEstimate {
    /// Supremum of conditional TV distances over admissible boundary pairs
    /// differing only at the probed neighbor.
    pub value: f64,
    /// True when no boundary assignment satisfies the h-cutoff, so the
    /// supremum ranges over the empty set and the value 0 is vacuous.
    pub vacuous: bool,
}

/// Supremum of d(π_ℓ^x, π_ℓ^y) over boundary pairs x, y that keep h ≤ K at
/// every neighbor of `site` and agree everywhere except at `neighbor`.
///
/// With K = +∞ this is the classical single-flip sensitivity estimator; it
/// is nondecreasing in K since raising the cutoff only enlarges the
/// admissible set.
pub fn estimate_kappa_entry(
    model: &FiniteSpinModel,
    g: &Graph,
    site: &str,
    neighbor: &str,
    k: f64,
) -> Result<KappaEstimate, SpinError> {
    let s = g.index_of(site)?;
    let nb = g.index_of(neighbor)?;
    let nbrs = g.neighbors(s);
    let pos = nbrs
        .binary_search(&nb)
        .map_err(|_| SpinError::NotNeighbor(neighbor.to_owned(), site.to_owned()))?;

    let admissible: Vec<usize> = (0..model.symbol_count())
        .filter(|&sym| model.h_values()[sym] <= k)
        .collect();
    if admissible.is_empty() {
        return Ok(KappaEstimate {
            value: 0.0,
            vacuous: true,
        });
    }

    let mut worst = 0.0f64;
    for codes in AdmissibleAssignments::new(&admissible, nbrs.len()) {
        let base = model.conditional_codes(g, s, &codes);
        for &alt in &admissible {
            if alt == codes[pos] {
                continue;
            }
            let mut flipped = codes.clone();
            flipped[pos] = alt;
            let other = model.conditional_codes(g, s, &flipped);
            let d = tv_distance(&base, &other).expect("same alphabet");
            worst = worst.max(d);
        }
    }
    Ok(KappaEstimate {
        value: worst,
        vacuous: false,
    })
}

/// Iterator over all assignments of admissible symbols to `len` positions.
struct AdmissibleAssignments<'a> {
    admissible: &'a [usize],
    counters: Vec<usize>,
    done: bool,
}

impl<'a> AdmissibleAssignments<'a> {
    fn new(admissible: &'a [usize], len: usize) -> Self {
        AdmissibleAssignments {
            admissible,
            counters: vec![0; len],
            done: admissible.is_empty(),
        }
    }
}

impl Iterator for AdmissibleAssignments<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let current: Vec<usize> = self.counters.iter().map(|&c| self.admissible[c]).collect();
        // Advance the mixed-radix counter.
        let mut carried = true;
        for c in self.counters.iter_mut() {
            *c += 1;
            if *c < self.admissible.len() {
                carried = false;
                break;
            }
            *c = 0;
        }
        if carried {
            self.done = true;
        }
        Some(current)
    }
}

/// Worst slacks of the two membership inequalities at one site.
///
/// `sensitivity_slack` is the minimum over enumerated boundary pairs of
/// Σ κ_{ℓℓ'}·[x_{ℓ'} ≠ y_{ℓ'}] − d(π_ℓ^x, π_ℓ^y); `moment_slack` is the
/// minimum over boundary assignments of 1 + Σ c_{ℓℓ'} h(x_{ℓ'}) − π_ℓ^x(h).
/// Nonnegative slacks mean the supplied matrices dominate the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteMembership {
    pub site: String,
    pub sensitivity_slack: f64,
    pub sensitivity_witness: Option<String>,
    pub moment_slack: f64,
    pub moment_witness: Option<String>,
    /// Raw data: the largest conditional h-moment seen at this site.
    pub max_conditional_h: f64,
    /// True when no boundary assignment satisfies the h-cutoff.
    pub vacuous: bool,
}

/// Membership verification of a model against supplied (κ, c, h, K).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub k: f64,
    /// Whether boundary pairs differing at arbitrarily many neighbors were
    /// enumerated (max degree ≤ 3). Otherwise only single-neighbor changes
    /// are enumerated; multi-site changes follow by chaining single flips,
    /// each admissible because both endpoint symbols satisfy the cutoff.
    pub pair_enumeration: bool,
    pub tolerance: f64,
    pub sites: Vec<SiteMembership>,
    pub pass: bool,
}

impl MembershipReport {
    pub fn worst_sensitivity_slack(&self) -> f64 {
        self.sites
            .iter()
            .map(|s| s.sensitivity_slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn worst_moment_slack(&self) -> f64 {
        self.sites
            .iter()
            .map(|s| s.moment_slack)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Verifies, by exhaustive enumeration, that the matrices in `params`
/// dominate the model's conditional sensitivities (on boundaries obeying the
/// h-cutoff K) and conditional h-moments (on all boundaries).
///
/// Violations are report content, not errors; `pass` reflects slacks at
/// tolerance `-1e-12`.
pub fn verify_membership(
    model: &FiniteSpinModel,
    g: &Graph,
    k: f64,
    params: &ContractionParams,
) -> MembershipReport {
    let tolerance = 1e-12;
    let full_pairs = max_degree(g) <= 3;
    let m = model.symbol_count();
    let all_symbols: Vec<usize> = (0..m).collect();
    let admissible: Vec<usize> = (0..m).filter(|&s| model.h_values()[s] <= k).collect();

    let mut sites = Vec::with_capacity(g.vertex_count());
    for site in 0..g.vertex_count() {
        let nbrs = g.neighbors(site);
        let render = |codes: &[usize]| -> String {
            let parts: Vec<String> = nbrs
                .iter()
                .zip(codes)
                .map(|(&nb, &sym)| format!("{}={}", g.id_of(nb), model.alphabet()[sym]))
                .collect();
            parts.join(", ")
        };

        let mut sensitivity_slack = f64::INFINITY;
        let mut sensitivity_witness = None;
        let mut vacuous = false;
        if admissible.is_empty() {
            sensitivity_slack = 0.0;
            vacuous = true;
        } else if full_pairs {
            for x in AdmissibleAssignments::new(&admissible, nbrs.len()) {
                let px = model.conditional_codes(g, site, &x);
                for y in AdmissibleAssignments::new(&admissible, nbrs.len()) {
                    if y <= x {
                        continue; // distance is symmetric; skip the diagonal and mirrors
                    }
                    let py = model.conditional_codes(g, site, &y);
                    let d = tv_distance(&px, &py).expect("same alphabet");
                    let allowed: f64 = nbrs
                        .iter()
                        .enumerate()
                        .filter(|(p, _)| x[*p] != y[*p])
                        .map(|(_, &nb)| params.kappa.get(site, nb))
                        .sum();
                    let slack = allowed - d;
                    if slack < sensitivity_slack {
                        sensitivity_slack = slack;
                        sensitivity_witness = Some(format!("x: {}; y: {}", render(&x), render(&y)));
                    }
                }
            }
        } else {
            for (pos, &nb) in nbrs.iter().enumerate() {
                let allowed = params.kappa.get(site, nb);
                for x in AdmissibleAssignments::new(&admissible, nbrs.len()) {
                    let px = model.conditional_codes(g, site, &x);
                    for &alt in &admissible {
                        if alt == x[pos] {
                            continue;
                        }
                        let mut y = x.clone();
                        y[pos] = alt;
                        let py = model.conditional_codes(g, site, &y);
                        let d = tv_distance(&px, &py).expect("same alphabet");
                        let slack = allowed - d;
                        if slack < sensitivity_slack {
                            sensitivity_slack = slack;
                            sensitivity_witness =
                                Some(format!("x: {}; y: {}", render(&x), render(&y)));
                        }
                    }
                }
            }
        }
        if sensitivity_slack == f64::INFINITY {
            // Single admissible symbol: no pairs to compare.
            sensitivity_slack = 0.0;
        }

        let mut moment_slack = f64::INFINITY;
        let mut moment_witness = None;
        let mut max_conditional_h = f64::NEG_INFINITY;
        for x in AdmissibleAssignments::new(&all_symbols, nbrs.len()) {
            let pi_h = model.conditional_h(g, site, &x);
            max_conditional_h = max_conditional_h.max(pi_h);
            let allowed: f64 = nbrs
                .iter()
                .enumerate()
                .map(|(p, &nb)| params.c.get(site, nb) * model.h_values()[x[p]])
                .sum();
            let slack = 1.0 + allowed - pi_h;
            if slack < moment_slack {
                moment_slack = slack;
                moment_witness = Some(render(&x));
            }
        }

        sites.push(SiteMembership {
            site: g.id_of(site).to_owned(),
            sensitivity_slack,
            sensitivity_witness,
            moment_slack,
            moment_witness,
            max_conditional_h,
            vacuous,
        });
    }

    let pass = sites
        .iter()
        .all(|s| s.sensitivity_slack >= -tolerance && s.moment_slack >= -tolerance);
    MembershipReport {
        k,
        pair_enumeration: full_pairs,
        tolerance,
        sites,
        pass,
    }
}

/// Ising chain on `n` vertices v1..vn with coupling `beta`, symbols
/// ["-1", "+1"], uniform reference weights, and constant weight function
/// h ≡ `h_const`.
#[cfg(test)]
pub(crate) fn ising_path_model(n: usize, beta: f64, h_const: f64) -> (Graph, FiniteSpinModel) {
    let edges: Vec<(String, String)> = (1..n)
        .map(|i| (format!("v{i}"), format!("v{}", i + 1)))
        .collect();
    let g = crate::graph::build_graph(&edges).unwrap();
    let mut model = FiniteSpinModel::new(
        vec!["-1".into(), "+1".into()],
        vec![0.5, 0.5],
        vec![h_const, h_const],
    )
    .unwrap();
    let table = vec![vec![beta, -beta], vec![-beta, beta]];
    for i in 1..n {
        model
            .add_potential(&g, &format!("v{i}"), &format!("v{}", i + 1), &table)
            .unwrap();
    }
    (g, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::EdgeWeights;
    use crate::graph::build_graph;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn conditional_is_uniform_at_zero_coupling() {
        let (g, model) = ising_path_model(3, 0.0, 1.0);
        let boundary: BTreeMap<String, String> =
            [("v1".into(), "+1".into()), ("v3".into(), "-1".into())].into();
        let dist = conditional(&model, &g, "v2", &boundary).unwrap();
        assert_relative_eq!(dist.probs()[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(dist.probs()[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn conditional_single_neighbor_boltzmann_ratio() {
        let (g, model) = ising_path_model(2, 0.5, 1.0);
        let boundary: BTreeMap<String, String> = [("v2".into(), "+1".into())].into();
        let dist = conditional(&model, &g, "v1", &boundary).unwrap();
        let expected = (0.5f64).exp() / ((0.5f64).exp() + (-0.5f64).exp());
        assert_relative_eq!(dist.probs()[1], expected, max_relative = 1e-14);
        assert_relative_eq!(dist.probs()[1], 0.7311, max_relative = 1e-4);
    }

    #[test]
    fn conditional_without_potentials_equals_reference() {
        let g = build_graph(&[("a", "b")]).unwrap();
        let model = FiniteSpinModel::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec![1.0, 2.0, 5.0],
            vec![0.0, 0.0, 0.0],
        )
        .unwrap();
        let boundary: BTreeMap<String, String> = [("b".into(), "z".into())].into();
        let dist = conditional(&model, &g, "a", &boundary).unwrap();
        assert_relative_eq!(dist.probs()[0], 0.125, max_relative = 1e-15);
        assert_relative_eq!(dist.probs()[1], 0.25, max_relative = 1e-15);
        assert_relative_eq!(dist.probs()[2], 0.625, max_relative = 1e-15);
    }

    #[test]
    fn conditional_requires_every_neighbor() {
        let (g, model) = ising_path_model(3, 0.1, 1.0);
        let boundary: BTreeMap<String, String> = [("v1".into(), "+1".into())].into();
        assert!(matches!(
            conditional(&model, &g, "v2", &boundary),
            Err(SpinError::MissingNeighbor(_))
        ));
    }

    #[test]
    fn tv_distance_examples() {
        let p = LocalDistribution::from_probs(vec![0.5, 0.5]).unwrap();
        let q = LocalDistribution::from_probs(vec![1.0, 0.0]).unwrap();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_relative_eq!(tv_distance(&p, &q).unwrap(), 0.5, max_relative = 1e-15);
        let a = LocalDistribution::from_probs(vec![1.0, 0.0]).unwrap();
        let b = LocalDistribution::from_probs(vec![0.0, 1.0]).unwrap();
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let c = LocalDistribution::from_probs(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(
            tv_distance(&p, &c),
            Err(SpinError::AlphabetMismatch(2, 3))
        ));
    }

    #[test]
    fn kappa_entry_single_neighbor_is_tanh_beta() {
        let (g, model) = ising_path_model(2, 0.5, 0.0);
        let est = estimate_kappa_entry(&model, &g, "v1", "v2", 10.0).unwrap();
        assert!(!est.vacuous);
        assert_relative_eq!(est.value, (0.5f64).tanh(), max_relative = 1e-12);
    }

    #[test]
    fn kappa_entry_zero_coupling_is_zero() {
        let (g, model) = ising_path_model(3, 0.0, 1.0);
        let est = estimate_kappa_entry(&model, &g, "v2", "v1", 5.0).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(!est.vacuous);
    }

    #[test]
    fn kappa_entry_below_min_h_is_vacuous() {
        let (g, model) = ising_path_model(2, 0.5, 1.0);
        let est = estimate_kappa_entry(&model, &g, "v1", "v2", 0.5).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.vacuous);
    }

    #[test]
    fn kappa_entry_middle_site_is_half_tanh_two_beta() {
        let beta = 0.1;
        let (g, model) = ising_path_model(3, beta, 1.0);
        let est = estimate_kappa_entry(&model, &g, "v2", "v1", 2.0).unwrap();
        assert_relative_eq!(est.value, (2.0 * beta).tanh() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn kappa_entry_rejects_non_neighbor() {
        let (g, model) = ising_path_model(3, 0.1, 1.0);
        assert!(matches!(
            estimate_kappa_entry(&model, &g, "v1", "v3", 2.0),
            Err(SpinError::NotNeighbor(_, _))
        ));
    }

    #[test]
    fn kappa_entry_monotone_in_cutoff() {
        // Three symbols with distinct h values, so raising K enlarges the
        // admissible set in steps.
        let g = build_graph(&[("a", "b"), ("b", "c")]).unwrap();
        let mut model = FiniteSpinModel::new(
            vec!["lo".into(), "mid".into(), "hi".into()],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 1.0, 2.0],
        )
        .unwrap();
        let table = vec![
            vec![0.3, 0.0, -0.3],
            vec![0.0, 0.0, 0.0],
            vec![-0.3, 0.0, 0.6],
        ];
        model.add_potential(&g, "a", "b", &table).unwrap();
        model.add_potential(&g, "b", "c", &table).unwrap();
        let mut prev = -1.0;
        for k in [0.0, 1.0, 2.0, 10.0] {
            let est = estimate_kappa_entry(&model, &g, "b", "a", k).unwrap();
            assert!(est.value >= prev);
            prev = est.value;
        }
    }

    fn uniform_params(kappa: f64, c: f64) -> ContractionParams {
        ContractionParams::new(EdgeWeights::Uniform(kappa), EdgeWeights::Uniform(c), 2, 2).unwrap()
    }

    #[test]
    fn membership_passes_on_worked_chain() {
        let (g, model) = ising_path_model(6, 0.1, 1.0);
        let report = verify_membership(&model, &g, 600.0, &uniform_params(0.1, 0.1));
        assert!(report.pass);
        assert!(report.pair_enumeration);
        assert!(report.worst_sensitivity_slack() > 0.0);
        assert!(report.worst_moment_slack() > 0.0);
    }

    #[test]
    fn membership_fails_on_large_constant_h_with_zero_c() {
        let (g, model) = ising_path_model(3, 0.1, 3.0);
        let report = verify_membership(&model, &g, 600.0, &uniform_params(0.1, 0.0));
        assert!(!report.pass);
        let worst = report.worst_moment_slack();
        assert_relative_eq!(worst, -2.0, max_relative = 1e-12);
        assert!(report.sites.iter().any(|s| s.moment_witness.is_some()));
    }

    #[test]
    fn membership_zero_h_reads_one_slack() {
        let (g, model) = ising_path_model(3, 0.0, 0.0);
        let report = verify_membership(&model, &g, 1.0, &uniform_params(0.0, 0.1));
        assert!(report.pass);
        assert_relative_eq!(report.worst_moment_slack(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(report.worst_sensitivity_slack(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn membership_detects_undersized_kappa() {
        let (g, model) = ising_path_model(4, 0.5, 1.0);
        // tanh(0.5) ≈ 0.462 at the endpoints; kappa = 0.1 is too small.
        let report = verify_membership(&model, &g, 600.0, &uniform_params(0.1, 0.1));
        assert!(!report.pass);
        assert!(report.worst_sensitivity_slack() < -0.3);
    }

    proptest! {
        #[test]
        fn tv_is_a_metric_on_random_triples(
            raw_p in proptest::collection::vec(1e-6f64..1.0, 3),
            raw_q in proptest::collection::vec(1e-6f64..1.0, 3),
            raw_r in proptest::collection::vec(1e-6f64..1.0, 3),
        ) {
            let p = LocalDistribution::from_weights(raw_p);
            let q = LocalDistribution::from_weights(raw_q);
            let r = LocalDistribution::from_weights(raw_r);
            let dpq = tv_distance(&p, &q).unwrap();
            let dqp = tv_distance(&q, &p).unwrap();
            prop_assert!((dpq - dqp).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&dpq));
            prop_assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
            let dpr = tv_distance(&p, &r).unwrap();
            let drq = tv_distance(&r, &q).unwrap();
            prop_assert!(dpq <= dpr + drq + 1e-15);
        }

        #[test]
        fn conditionals_normalize_on_all_boundaries(beta in -1.0f64..1.0) {
            let (g, model) = crate::spin::ising_path_model(4, beta, 1.0);
            for site in 0..g.vertex_count() {
                let deg = g.degree(site);
                for code in 0..(2usize.pow(deg as u32)) {
                    let syms: Vec<usize> = (0..deg).map(|p| (code >> p) & 1).collect();
                    let dist = model.conditional_codes(&g, site, &syms);
                    let total: f64 = dist.probs().iter().sum();
                    prop_assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
