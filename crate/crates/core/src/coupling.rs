//! Exact couplings on the doubled configuration space and the one-site
//! redistribution operator.
//!
//! A coupling is a dense probability table over ordered pairs (x, y) of
//! configurations. Redistribution at a site replaces the pair of symbols
//! there by an optimal coupling of the two conditional distributions, with
//! every other coordinate frozen; chromatic sweeps compose redistributions
//! over independence classes. The module tracks the disagreement functional
//! γ (worst per-site probability that the copies differ) and the cross
//! functional λ (worst disagreement–moment product), checks the four
//! per-application inequalities that a verified model must satisfy, and
//! enforces the sweep-level matrix domination these inequalities compose
//! into. Everything is computed by full enumeration; nothing is sampled.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::criterion::{spectral_radius, ContractionParams, Matrix2};
use crate::error::{EngineError, SpinError};
use crate::graph::{ColorPartition, Graph};
use crate::oracle::{conditional_measure, ExactMeasure};
use crate::space::{ConfigSpace, KahanSum};
use crate::spin::{FiniteSpinModel, LocalDistribution};
use crate::TOL_EXACT;

/// Joint distribution on symbol pairs with marginals exactly `p` and `q` and
/// the least possible off-diagonal mass, which equals their total-variation
/// distance.
///
/// The diagonal carries the pointwise minimum of `p` and `q`; the remaining
/// mass is the normalized product of the two residuals. Row index is the
/// symbol of the first copy.
pub fn optimal_coupling(
    p: &LocalDistribution,
    q: &LocalDistribution,
) -> Result<Vec<Vec<f64>>, SpinError> {
    if p.len() != q.len() {
        return Err(SpinError::AlphabetMismatch(p.len(), q.len()));
    }
    let m = p.len();
    let mut flat = vec![0.0; m * m];
    optimal_coupling_into(p.probs(), q.probs(), &mut flat);
    Ok(flat.chunks(m).map(<[f64]>::to_vec).collect())
}

/// Writes the optimal coupling of two probability vectors into `out`
/// (row-major, `p.len()` squared). When the distance is zero the residual
/// product is 0/0, so the coupling is the pure diagonal.
fn optimal_coupling_into(p: &[f64], q: &[f64], out: &mut [f64]) {
    let m = p.len();
    out.fill(0.0);
    let mut l1 = 0.0;
    for i in 0..m {
        l1 += (p[i] - q[i]).abs();
    }
    let d = 0.5 * l1;
    if d <= 0.0 {
        for i in 0..m {
            out[i * m + i] = p[i];
        }
        return;
    }
    for i in 0..m {
        out[i * m + i] = p[i].min(q[i]);
    }
    for i in 0..m {
        let u = p[i] - p[i].min(q[i]);
        if u == 0.0 {
            continue;
        }
        // Residual supports are disjoint, so these terms never land on the
        // diagonal.
        for j in 0..m {
            let v = q[j] - p[j].min(q[j]);
            if v != 0.0 {
                out[i * m + j] += u * v / d;
            }
        }
    }
}

/// Dense probability table over ordered pairs of configurations, indexed by
/// `x * size + y` where both halves share one [`ConfigSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    space: ConfigSpace,
    weights: Vec<f64>,
}

impl CouplingTable {
    fn paired_len(space: &ConfigSpace, cap: usize) -> Result<usize, EngineError> {
        let needed = (space.size() as u128) * (space.size() as u128);
        if needed > cap as u128 {
            return Err(EngineError::CapExceeded { needed, cap });
        }
        Ok(space.size() * space.size())
    }

    fn check_prob_vector(v: &[f64], len: usize, what: &str) -> Result<(), EngineError> {
        if v.len() != len {
            return Err(EngineError::InvalidTable(format!(
                "{what} has {} entries, expected {len}",
                v.len()
            )));
        }
        if let Some(bad) = v.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(EngineError::InvalidTable(format!(
                "{what} contains the entry {bad}"
            )));
        }
        let total = crate::space::kahan_total(v);
        if (total - 1.0).abs() > TOL_EXACT {
            return Err(EngineError::InvalidTable(format!(
                "{what} has total mass {total}"
            )));
        }
        Ok(())
    }

    /// Independent coupling of two distributions on `space`.
    pub fn product(
        space: ConfigSpace,
        first: &[f64],
        second: &[f64],
        cap: usize,
    ) -> Result<Self, EngineError> {
        let len = Self::paired_len(&space, cap)?;
        Self::check_prob_vector(first, space.size(), "first marginal")?;
        Self::check_prob_vector(second, space.size(), "second marginal")?;
        let s = space.size();
        let mut weights = vec![0.0; len];
        for (x, &a) in first.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (y, &b) in second.iter().enumerate() {
                weights[x * s + y] = a * b;
            }
        }
        Ok(CouplingTable { space, weights })
    }

    /// Coupling concentrated on identical pairs, with both marginals `mu`.
    pub fn diagonal(space: ConfigSpace, mu: &[f64], cap: usize) -> Result<Self, EngineError> {
        let len = Self::paired_len(&space, cap)?;
        Self::check_prob_vector(mu, space.size(), "marginal")?;
        let s = space.size();
        let mut weights = vec![0.0; len];
        for (x, &a) in mu.iter().enumerate() {
            weights[x * s + x] = a;
        }
        Ok(CouplingTable { space, weights })
    }

    /// Wraps a raw weight table, which must already be a probability vector
    /// of length `size²`.
    pub fn from_weights(
        space: ConfigSpace,
        weights: Vec<f64>,
        cap: usize,
    ) -> Result<Self, EngineError> {
        let len = Self::paired_len(&space, cap)?;
        Self::check_prob_vector(&weights, len, "coupling table")?;
        Ok(CouplingTable { space, weights })
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of the ordered pair (`x`, `y`).
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.weights[x * self.space.size() + y]
    }

    pub fn total_mass(&self) -> f64 {
        crate::space::kahan_total(&self.weights)
    }

    /// Distribution of the first copy.
    pub fn marginal_first(&self) -> Vec<f64> {
        let s = self.space.size();
        let mut out = Vec::with_capacity(s);
        for x in 0..s {
            out.push(crate::space::kahan_total(&self.weights[x * s..(x + 1) * s]));
        }
        out
    }

    /// Distribution of the second copy.
    pub fn marginal_second(&self) -> Vec<f64> {
        let s = self.space.size();
        let mut sums = vec![KahanSum::new(); s];
        for x in 0..s {
            let row = &self.weights[x * s..(x + 1) * s];
            for (y, &w) in row.iter().enumerate() {
                sums[y].add(w);
            }
        }
        sums.iter().map(KahanSum::value).collect()
    }

    /// Distribution of the symbol at `site` in one copy (0 = first).
    pub fn marginal_site(&self, copy: usize, site: usize) -> Vec<f64> {
        assert!(copy < 2, "a coupling has two copies");
        let s = self.space.size();
        let mut sums = vec![KahanSum::new(); self.space.symbol_count()];
        for x in 0..s {
            for y in 0..s {
                let w = self.weights[x * s + y];
                if w == 0.0 {
                    continue;
                }
                let cfg = if copy == 0 { x } else { y };
                sums[self.space.symbol_at(cfg, site)].add(w);
            }
        }
        sums.iter().map(KahanSum::value).collect()
    }

    /// Expectation of f(x) − f(y) under the coupling, with `f` given per
    /// configuration. Zero whenever both marginals agree on f.
    pub fn observable_gap(&self, f: &[f64]) -> f64 {
        let s = self.space.size();
        assert_eq!(f.len(), s, "one value per configuration required");
        let mut acc = KahanSum::new();
        for x in 0..s {
            for y in 0..s {
                let w = self.weights[x * s + y];
                if w != 0.0 {
                    acc.add(w * (f[x] - f[y]));
                }
            }
        }
        acc.value()
    }

    /// Mass of pairs that disagree at `site` while agreeing at every
    /// neighbor of `site`. Redistribution at `site` sends this to zero: with
    /// all neighbors equal the two conditionals coincide and the optimal
    /// coupling is purely diagonal.
    pub fn off_support_mass(&self, g: &Graph, site: usize) -> f64 {
        let s = self.space.size();
        let mut acc = KahanSum::new();
        for x in 0..s {
            for y in 0..s {
                let w = self.weights[x * s + y];
                if w == 0.0 || self.space.symbol_at(x, site) == self.space.symbol_at(y, site) {
                    continue;
                }
                let neighbors_agree = g
                    .neighbors(site)
                    .iter()
                    .all(|&nb| self.space.symbol_at(x, nb) == self.space.symbol_at(y, nb));
                if neighbors_agree {
                    acc.add(w);
                }
            }
        }
        acc.value()
    }
}

/// All disagreement and cross functionals of one coupling, computed in a
/// single pass: `gamma(ℓ)` is the probability that the copies differ at ℓ,
/// and `cross(i, ℓ, ℓ')` is the expectation of that disagreement indicator
/// times h at ℓ' in copy i.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    n: usize,
    gamma: Vec<f64>,
    cross: [Vec<f64>; 2],
}

impl MomentTable {
    pub fn gamma(&self, site: usize) -> f64 {
        self.gamma[site]
    }

    pub fn cross(&self, copy: usize, disagree_site: usize, moment_site: usize) -> f64 {
        self.cross[copy][disagree_site * self.n + moment_site]
    }

    /// Largest per-site disagreement probability over `region`.
    pub fn gamma_sup(&self, region: &[usize]) -> f64 {
        region.iter().map(|&v| self.gamma[v]).fold(0.0, f64::max)
    }

    /// Largest cross functional over both copies and all site pairs in
    /// `region`.
    pub fn lambda_sup(&self, region: &[usize]) -> f64 {
        let mut worst = 0.0f64;
        for copy in 0..2 {
            for &a in region {
                for &b in region {
                    worst = worst.max(self.cross[copy][a * self.n + b]);
                }
            }
        }
        worst
    }
}

/// Computes the full functional table of a coupling.
pub fn moment_table(table: &CouplingTable, model: &FiniteSpinModel) -> MomentTable {
    let space = table.space();
    assert_eq!(
        model.symbol_count(),
        space.symbol_count(),
        "model and coupling must share one alphabet"
    );
    let s = space.size();
    let n = space.site_count();
    let m = space.symbol_count();

    let mut codes = vec![0usize; s * n];
    let mut hvals = vec![0.0; s * n];
    for cfg in 0..s {
        let mut rest = cfg;
        for site in 0..n {
            let sym = rest % m;
            rest /= m;
            codes[cfg * n + site] = sym;
            hvals[cfg * n + site] = model.h_values()[sym];
        }
    }

    let mut gamma = vec![0.0; n];
    let mut cross = [vec![0.0; n * n], vec![0.0; n * n]];
    let mut diff = vec![false; n];
    for x in 0..s {
        for y in 0..s {
            let w = table.weights()[x * s + y];
            if w == 0.0 || x == y {
                continue;
            }
            for site in 0..n {
                diff[site] = codes[x * n + site] != codes[y * n + site];
            }
            for a in 0..n {
                if !diff[a] {
                    continue;
                }
                gamma[a] += w;
                let row = a * n;
                for b in 0..n {
                    cross[0][row + b] += w * hvals[x * n + b];
                    cross[1][row + b] += w * hvals[y * n + b];
                }
            }
        }
    }
    MomentTable { n, gamma, cross }
}

/// The pair (γ_D, λ_D) of worst functionals over a nonempty region;
/// the full vertex set gives the global γ(ν), λ(ν).
pub fn functionals(
    table: &CouplingTable,
    region: &BTreeSet<usize>,
    model: &FiniteSpinModel,
) -> (f64, f64) {
    assert!(!region.is_empty(), "functionals need a nonempty region");
    let moments = moment_table(table, model);
    let region: Vec<usize> = region.iter().copied().collect();
    (moments.gamma_sup(&region), moments.lambda_sup(&region))
}

/// Redistributes the symbol pair at `site`: each paired configuration's
/// weight is spread over the optimal coupling of the two conditional
/// distributions there, all other coordinates kept fixed. Mass is conserved
/// by construction; nothing is renormalized.
pub fn apply_r(
    table: &CouplingTable,
    model: &FiniteSpinModel,
    g: &Graph,
    site: usize,
) -> Result<CouplingTable, EngineError> {
    let space = *table.space();
    if g.vertex_count() != space.site_count() || model.symbol_count() != space.symbol_count() {
        return Err(EngineError::SpaceMismatch);
    }
    assert!(site < space.site_count(), "site out of range");
    let s = space.size();
    let m = space.symbol_count();
    let stride = space.stride(site);
    let nbrs = g.neighbors(site);

    // The conditional at `site` depends on a configuration only through the
    // neighbor symbols; precompute it once per configuration.
    let mut cond = vec![0.0; s * m];
    let mut nsyms = vec![0usize; nbrs.len()];
    for cfg in 0..s {
        for (slot, &nb) in nbrs.iter().enumerate() {
            nsyms[slot] = space.symbol_at(cfg, nb);
        }
        let dist = model.conditional_codes(g, site, &nsyms);
        cond[cfg * m..(cfg + 1) * m].copy_from_slice(dist.probs());
    }

    let mut out = vec![0.0; s * s];
    let mut joint = vec![0.0; m * m];
    for x in 0..s {
        let x_rest = x - space.symbol_at(x, site) * stride;
        let px = &cond[x * m..(x + 1) * m];
        for y in 0..s {
            let w = table.weights()[x * s + y];
            if w == 0.0 {
                continue;
            }
            optimal_coupling_into(px, &cond[y * m..(y + 1) * m], &mut joint);
            let y_rest = y - space.symbol_at(y, site) * stride;
            for xi in 0..m {
                let row = (x_rest + xi * stride) * s + y_rest;
                for eta in 0..m {
                    let q = joint[xi * m + eta];
                    if q != 0.0 {
                        out[row + eta * stride] += w * q;
                    }
                }
            }
        }
    }
    Ok(CouplingTable {
        space,
        weights: out,
    })
}

/// Diagnostics of one redistribution inside a sweep.
///
/// The four slacks are right-hand side minus left-hand side of the
/// inequalities a verified model must satisfy; each should be ≥ −1e−10.
/// With ν the table before the application at ℓ, ν' the table after, ∂ℓ the
/// neighbors, i ranging over the two copies, and γ/λ written for the
/// per-site functionals of ν:
///
/// * `disagreement_slack`: ν'(I_ℓ) vs Σ_{ℓ'∈∂ℓ} κ_{ℓℓ'} ν(I_{ℓ'}) +
///   K⁻¹ Σ_i Σ_{a,b∈∂ℓ} ν(I_a H^i_b); new disagreement at the site is
///   paid for by κ-weighted neighbor disagreements plus the cutoff-escape
///   correction.
/// * `moment_slack`: ν'(I_{ℓ1} H^i_ℓ) vs ν(I_{ℓ1}) + Σ_{ℓ2∈∂ℓ} c_{ℓℓ2}
///   ν(I_{ℓ1} H^i_{ℓ2}), minimized over sites ℓ1 ≠ ℓ and copies; the
///   resampled moment against untouched disagreement.
/// * `cross_slack`: ν'(I_ℓ H^i_{ℓ1}) vs Σ_{ℓ2∈∂ℓ} ν(I_{ℓ2} H^i_{ℓ1}),
///   minimized over ℓ1 ≠ ℓ and copies; new disagreement against untouched
///   moments.
/// * `joint_slack`: ν'(I_ℓ H^i_ℓ) vs Σ_{ℓ1∈∂ℓ} ν(I_{ℓ1}) + Σ_{ℓ1,ℓ2∈∂ℓ}
///   c_{ℓℓ2} ν(I_{ℓ1} H^i_{ℓ2}); both functionals at the site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplicationRecord {
    pub site: String,
    pub gamma_before: f64,
    pub gamma_after: f64,
    pub lambda_before: f64,
    pub lambda_after: f64,
    pub disagreement_slack: f64,
    pub moment_slack: f64,
    pub cross_slack: f64,
    pub joint_slack: f64,
    /// Post-application mass of pairs disagreeing at the site with all its
    /// neighbors equal; zero up to rounding.
    pub off_support_mass: f64,
}

impl ApplicationRecord {
    pub fn min_slack(&self) -> f64 {
        self.disagreement_slack
            .min(self.moment_slack)
            .min(self.cross_slack)
            .min(self.joint_slack)
    }
}

/// Per-application records of one sweep, plus their worst slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepDiagnostics {
    pub applications: Vec<ApplicationRecord>,
    pub min_slack: f64,
}

fn application_slacks(
    before: &MomentTable,
    after: &MomentTable,
    g: &Graph,
    params: &ContractionParams,
    k: f64,
    site: usize,
) -> (f64, f64, f64, f64) {
    let nbrs = g.neighbors(site);
    let n = g.vertex_count();

    let mut rhs = 0.0;
    for &nb in nbrs {
        rhs += params.kappa.get(site, nb) * before.gamma(nb);
    }
    for copy in 0..2 {
        for &a in nbrs {
            for &b in nbrs {
                rhs += before.cross(copy, a, b) / k;
            }
        }
    }
    let disagreement_slack = rhs - after.gamma(site);

    let mut moment_slack = f64::INFINITY;
    let mut cross_slack = f64::INFINITY;
    for far in (0..n).filter(|&v| v != site) {
        for copy in 0..2 {
            let mut rhs = before.gamma(far);
            for &nb in nbrs {
                rhs += params.c.get(site, nb) * before.cross(copy, far, nb);
            }
            moment_slack = moment_slack.min(rhs - after.cross(copy, far, site));

            let rhs: f64 = nbrs.iter().map(|&nb| before.cross(copy, nb, far)).sum();
            cross_slack = cross_slack.min(rhs - after.cross(copy, site, far));
        }
    }

    let mut joint_slack = f64::INFINITY;
    for copy in 0..2 {
        let mut rhs = 0.0;
        for &a in nbrs {
            rhs += before.gamma(a);
            for &b in nbrs {
                rhs += params.c.get(site, b) * before.cross(copy, a, b);
            }
        }
        joint_slack = joint_slack.min(rhs - after.cross(copy, site, site));
    }

    (disagreement_slack, moment_slack, cross_slack, joint_slack)
}

fn check_partition(partition: &ColorPartition, g: &Graph) -> Result<(), EngineError> {
    if partition.class_count() == 0
        || partition.classes().iter().map(Vec::len).sum::<usize>() != g.vertex_count()
    {
        return Err(EngineError::BadPartition(format!(
            "partition covers {} vertices, graph has {}",
            partition.classes().iter().map(Vec::len).sum::<usize>(),
            g.vertex_count()
        )));
    }
    if let Some((a, b)) = partition.independence_violation(g) {
        return Err(EngineError::BadPartition(format!(
            "adjacent vertices '{}' and '{}' share a class",
            g.id_of(a),
            g.id_of(b)
        )));
    }
    Ok(())
}

/// One chromatic sweep restricted to `region`: redistribution at every
/// region vertex, color classes in ascending order and ascending vertex id
/// inside each class.
pub fn sweep_region(
    table: &CouplingTable,
    model: &FiniteSpinModel,
    g: &Graph,
    partition: &ColorPartition,
    params: &ContractionParams,
    k: f64,
    region: &BTreeSet<usize>,
) -> Result<(CouplingTable, SweepDiagnostics), EngineError> {
    assert!(!region.is_empty(), "sweep region must be nonempty");
    check_partition(partition, g)?;
    let all: Vec<usize> = (0..g.vertex_count()).collect();
    let mut current = table.clone();
    let mut before = moment_table(&current, model);
    let mut applications = Vec::new();
    for class in partition.classes() {
        for &site in class {
            if !region.contains(&site) {
                continue;
            }
            let next = apply_r(&current, model, g, site)?;
            let after = moment_table(&next, model);
            let (disagreement_slack, moment_slack, cross_slack, joint_slack) =
                application_slacks(&before, &after, g, params, k, site);
            applications.push(ApplicationRecord {
                site: g.id_of(site).to_owned(),
                gamma_before: before.gamma_sup(&all),
                gamma_after: after.gamma_sup(&all),
                lambda_before: before.lambda_sup(&all),
                lambda_after: after.lambda_sup(&all),
                disagreement_slack,
                moment_slack,
                cross_slack,
                joint_slack,
                off_support_mass: next.off_support_mass(g, site),
            });
            current = next;
            before = after;
        }
    }
    let min_slack = applications
        .iter()
        .map(ApplicationRecord::min_slack)
        .fold(f64::INFINITY, f64::min);
    Ok((
        current,
        SweepDiagnostics {
            applications,
            min_slack,
        },
    ))
}

/// One full chromatic sweep over every vertex.
pub fn sweep(
    table: &CouplingTable,
    model: &FiniteSpinModel,
    g: &Graph,
    partition: &ColorPartition,
    params: &ContractionParams,
    k: f64,
) -> Result<(CouplingTable, SweepDiagnostics), EngineError> {
    let all: BTreeSet<usize> = (0..g.vertex_count()).collect();
    sweep_region(table, model, g, partition, params, k, &all)
}

/// One row of a sweep trajectory. The transformed norm is max{ξγ, λ} with
/// the balance weight ξ that makes repeated sweeps contract it by the
/// certified factor. `min_slack` is absent on the initial row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub sweep: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub transformed: f64,
    pub min_slack: Option<f64>,
}

/// Final table and trajectory of [`iterate`], along with the certified
/// contraction factor and balance weight derived from the matrix.
#[derive(Debug, Clone)]
pub struct IterateOutcome {
    pub table: CouplingTable,
    pub rows: Vec<TrajectoryRow>,
    pub rate: f64,
    pub xi: f64,
}

/// Repeated full sweeps until γ falls below `tol` or `max_sweeps` is
/// reached. After every sweep the new (γ, λ) must be dominated by `m`
/// applied to the old pair within 1e−10 componentwise, and the transformed
/// norm must contract by at most the spectral radius of `m` plus 1e−9;
/// violations are reported as errors, never swallowed.
#[allow(clippy::too_many_arguments)]
pub fn iterate(
    table: CouplingTable,
    model: &FiniteSpinModel,
    g: &Graph,
    partition: &ColorPartition,
    params: &ContractionParams,
    k: f64,
    m: &Matrix2,
    tol: f64,
    max_sweeps: usize,
) -> Result<IterateOutcome, EngineError> {
    assert!(tol > 0.0, "termination tolerance must be positive");
    let rate = spectral_radius(m);
    let xi = m.0[1][0] / (rate - m.0[1][1]);
    assert!(
        xi.is_finite() && xi > 0.0,
        "matrix must have positive entries off the diagonal"
    );
    let all_vec: Vec<usize> = (0..g.vertex_count()).collect();
    let all_set: BTreeSet<usize> = all_vec.iter().copied().collect();

    let mut current = table;
    let moments = moment_table(&current, model);
    let mut gamma = moments.gamma_sup(&all_vec);
    let mut lambda = moments.lambda_sup(&all_vec);
    let mut rows = vec![TrajectoryRow {
        sweep: 0,
        gamma,
        lambda,
        transformed: (xi * gamma).max(lambda),
        min_slack: None,
    }];

    for n in 1..=max_sweeps {
        if gamma < tol {
            break;
        }
        let (next, diag) = sweep_region(&current, model, g, partition, params, k, &all_set)?;
        let moments = moment_table(&next, model);
        let new_gamma = moments.gamma_sup(&all_vec);
        let new_lambda = moments.lambda_sup(&all_vec);

        let gamma_bound = m.0[0][0] * gamma + m.0[0][1] * lambda + 1e-10;
        let lambda_bound = m.0[1][0] * gamma + m.0[1][1] * lambda + 1e-10;
        if new_gamma > gamma_bound || new_lambda > lambda_bound {
            return Err(EngineError::DominationFalsified {
                stage: n,
                gamma: new_gamma,
                lambda: new_lambda,
                gamma_bound,
                lambda_bound,
            });
        }
        let old_t = (xi * gamma).max(lambda);
        let new_t = (xi * new_gamma).max(new_lambda);
        // Below 1e−12 both norms are rounding noise; above it the factor
        // must hold.
        if new_t > 1e-12 {
            let observed = new_t / old_t.max(1e-12);
            if observed > rate + 1e-9 {
                return Err(EngineError::ContractionFalsified {
                    sweep: n,
                    observed,
                    expected: rate + 1e-9,
                });
            }
        }
        rows.push(TrajectoryRow {
            sweep: n,
            gamma: new_gamma,
            lambda: new_lambda,
            transformed: new_t,
            min_slack: Some(diag.min_slack),
        });
        current = next;
        gamma = new_gamma;
        lambda = new_lambda;
    }

    Ok(IterateOutcome {
        table: current,
        rows,
        rate,
        xi,
    })
}

/// One stage of a localized trajectory: functionals over the stage's shell.
/// `gap` is the tracked observable gap when requested; `min_slack` is absent
/// on the initial row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellRow {
    pub stage: usize,
    pub region_size: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub gap: Option<f64>,
    pub min_slack: Option<f64>,
}

/// Localized trajectory for one conditioning of the coordinates outside the
/// largest shell. `anchor` is a representative configuration agreeing with
/// the conditioning on the frozen sites; `boundary` renders it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditioningTrace {
    pub boundary: String,
    pub anchor: usize,
    pub rows: Vec<ShellRow>,
}

/// Shell-localized contraction around `center`: for every configuration of
/// the coordinates outside the largest of `n_shells` nested shells, couples
/// the correspondingly conditioned measure with `mu` as an independent
/// product, then sweeps over shrinking shells. Stage s records the
/// functionals over the shell of radius n_shells − 1 − s; each stage must be
/// dominated by `m` applied to the previous stage within 1e−10.
///
/// `track_gap` optionally supplies per-configuration values of an observable
/// whose expectation gap between the two copies is recorded per stage.
#[allow(clippy::too_many_arguments)]
pub fn localized_sweep(
    mu: &ExactMeasure,
    model: &FiniteSpinModel,
    g: &Graph,
    partition: &ColorPartition,
    params: &ContractionParams,
    k: f64,
    m: &Matrix2,
    center: &str,
    n_shells: usize,
    track_gap: Option<&[f64]>,
    cap: usize,
) -> Result<Vec<ConditioningTrace>, EngineError> {
    let shells = crate::graph::shells(g, center, n_shells)?;
    let space = *mu.space();
    if let Some(f) = track_gap {
        assert_eq!(
            f.len(),
            space.size(),
            "one value per configuration required"
        );
    }
    let m_sym = space.symbol_count();
    let largest = &shells[n_shells - 1];
    let outside: Vec<usize> = (0..space.site_count())
        .filter(|v| !largest.contains(v))
        .collect();
    let combos = m_sym.pow(outside.len() as u32);

    let mut traces = Vec::with_capacity(combos);
    for combo in 0..combos {
        let mut anchor = 0usize;
        let mut rest = combo;
        for &site in &outside {
            anchor = space.with_symbol(anchor, site, rest % m_sym);
            rest /= m_sym;
        }
        let mu_x = conditional_measure(mu, largest, anchor);
        let mut table = CouplingTable::product(space, mu_x.weights(), mu.weights(), cap)?;

        let region_vec: Vec<usize> = largest.iter().copied().collect();
        let moments = moment_table(&table, model);
        let mut gamma = moments.gamma_sup(&region_vec);
        let mut lambda = moments.lambda_sup(&region_vec);
        let mut rows = vec![ShellRow {
            stage: 0,
            region_size: region_vec.len(),
            gamma,
            lambda,
            gap: track_gap.map(|f| table.observable_gap(f)),
            min_slack: None,
        }];

        for s in 1..n_shells {
            let shell = &shells[n_shells - 1 - s];
            let (next, diag) = sweep_region(&table, model, g, partition, params, k, shell)?;
            let moments = moment_table(&next, model);
            let region_vec: Vec<usize> = shell.iter().copied().collect();
            let new_gamma = moments.gamma_sup(&region_vec);
            let new_lambda = moments.lambda_sup(&region_vec);
            let gamma_bound = m.0[0][0] * gamma + m.0[0][1] * lambda + 1e-10;
            let lambda_bound = m.0[1][0] * gamma + m.0[1][1] * lambda + 1e-10;
            if new_gamma > gamma_bound || new_lambda > lambda_bound {
                return Err(EngineError::DominationFalsified {
                    stage: s,
                    gamma: new_gamma,
                    lambda: new_lambda,
                    gamma_bound,
                    lambda_bound,
                });
            }
            rows.push(ShellRow {
                stage: s,
                region_size: region_vec.len(),
                gamma: new_gamma,
                lambda: new_lambda,
                gap: track_gap.map(|f| next.observable_gap(f)),
                min_slack: Some(diag.min_slack),
            });
            table = next;
            gamma = new_gamma;
            lambda = new_lambda;
        }

        let boundary = outside
            .iter()
            .map(|&v| {
                format!(
                    "{}={}",
                    g.id_of(v),
                    model.alphabet()[space.symbol_at(anchor, v)]
                )
            })
            .collect::<Vec<_>>()
            .join(", ");
        traces.push(ConditioningTrace {
            boundary,
            anchor,
            rows,
        });
    }
    Ok(traces)
}
