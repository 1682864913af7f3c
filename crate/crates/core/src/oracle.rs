//! Brute-force exact Gibbs measures on finite graphs.
//!
//! Everything here is computed by full enumeration of the configuration
//! space: the free-boundary Boltzmann measure, the resampling-consistency
//! check, h-moments, covariances, and conditional measures obtained by
//! freezing coordinates. On top of these sits the covariance-decay
//! experiment, which couples conditioned copies of the measure, contracts
//! them over shrinking shells, and compares the exact covariance against
//! the certified exponential bound.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::coupling::localized_sweep;
use crate::criterion::{certify, ContractionParams, Verdict};
use crate::error::EngineError;
use crate::graph::{greedy_color, path_distance, shells, Graph};
use crate::space::{kahan_total, ConfigSpace, KahanSum};
use crate::spin::FiniteSpinModel;
use crate::{STATE_CAP, TOL_EXACT};

/// Dense probability vector over all configurations of a finite graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMeasure {
    space: ConfigSpace,
    weights: Vec<f64>,
}

impl ExactMeasure {
    /// Wraps a weight vector, which must be nonnegative and normalized
    /// within 1e−12.
    pub fn new(space: ConfigSpace, weights: Vec<f64>) -> Result<Self, EngineError> {
        if weights.len() != space.size() {
            return Err(EngineError::InvalidTable(format!(
                "measure has {} entries, expected {}",
                weights.len(),
                space.size()
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(EngineError::InvalidTable(format!(
                "measure contains the entry {bad}"
            )));
        }
        let total = kahan_total(&weights);
        if (total - 1.0).abs() > TOL_EXACT {
            return Err(EngineError::InvalidTable(format!(
                "measure has total mass {total}"
            )));
        }
        Ok(ExactMeasure { space, weights })
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Expectation of a per-configuration function.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.weights.len(), "one value per configuration");
        let mut acc = KahanSum::new();
        for (w, v) in self.weights.iter().zip(f) {
            if *w != 0.0 {
                acc.add(w * v);
            }
        }
        acc.value()
    }
}

/// Bounded function of a single coordinate, given by one value per symbol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observable {
    pub site: usize,
    pub values: Vec<f64>,
}

impl Observable {
    pub fn new(site: usize, values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "observable needs at least one value");
        assert!(
            values.iter().all(|v| v.is_finite()),
            "observable values must be finite"
        );
        Observable { site, values }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Per-configuration values f(x) = values[x_site].
    pub fn expand(&self, space: &ConfigSpace) -> Vec<f64> {
        assert_eq!(
            self.values.len(),
            space.symbol_count(),
            "one value per symbol required"
        );
        (0..space.size())
            .map(|cfg| self.values[space.symbol_at(cfg, self.site)])
            .collect()
    }
}

/// Exact finite-volume Gibbs measure with free boundary: the product of the
/// reference weights times the exponential of the summed edge interactions,
/// normalized. Free boundary makes the one-site resampling identity hold at
/// every vertex, including those on the graph's own border.
pub fn exact_gibbs(model: &FiniteSpinModel, g: &Graph) -> Result<ExactMeasure, EngineError> {
    let space = ConfigSpace::new(g.vertex_count(), model.symbol_count())?;
    if space.size() as u128 > STATE_CAP as u128 {
        return Err(EngineError::CapExceeded {
            needed: space.size() as u128,
            cap: STATE_CAP,
        });
    }
    let edges = g.edges();
    let refs = model.ref_weights();
    let mut weights = Vec::with_capacity(space.size());
    for cfg in 0..space.size() {
        let mut w = 1.0;
        for site in 0..space.site_count() {
            w *= refs[space.symbol_at(cfg, site)];
        }
        let mut energy = 0.0;
        for &(i, j) in &edges {
            energy += model.pair_energy(i, j, space.symbol_at(cfg, i), space.symbol_at(cfg, j));
        }
        weights.push(w * energy.exp());
    }
    let total = kahan_total(&weights);
    for w in &mut weights {
        *w /= total;
    }
    ExactMeasure::new(space, weights)
}

/// Worst one-site resampling residual: for every site ℓ and configuration
/// x, the cylinder {y : y agrees with x off ℓ} must carry mass
/// π_ℓ^x(x_ℓ) times its total, if μ is consistent with the conditionals.
/// Returns the largest absolute violation.
pub fn check_consistency(mu: &ExactMeasure, model: &FiniteSpinModel, g: &Graph) -> f64 {
    let space = mu.space();
    assert_eq!(
        g.vertex_count(),
        space.site_count(),
        "graph and measure must agree on the site count"
    );
    let m = space.symbol_count();
    let mut worst = 0.0f64;
    let mut nsyms = Vec::new();
    for site in 0..space.site_count() {
        let nbrs = g.neighbors(site);
        for cfg in 0..space.size() {
            nsyms.clear();
            nsyms.extend(nbrs.iter().map(|&nb| space.symbol_at(cfg, nb)));
            let dist = model.conditional_codes(g, site, &nsyms);
            let mut cylinder = KahanSum::new();
            for sym in 0..m {
                cylinder.add(mu.weights()[space.with_symbol(cfg, site, sym)]);
            }
            let expected = dist.probs()[space.symbol_at(cfg, site)] * cylinder.value();
            worst = worst.max((mu.weights()[cfg] - expected).abs());
        }
    }
    worst
}

/// Largest per-site expectation of h: sup_ℓ E_μ[h(x_ℓ)].
pub fn h_moment(mu: &ExactMeasure, model: &FiniteSpinModel) -> f64 {
    let space = mu.space();
    let h = model.h_values();
    let mut sums = vec![KahanSum::new(); space.site_count()];
    for (cfg, &w) in mu.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (site, acc) in sums.iter_mut().enumerate() {
            acc.add(w * h[space.symbol_at(cfg, site)]);
        }
    }
    sums.iter().map(KahanSum::value).fold(0.0, f64::max)
}

/// Exact covariance μ(fg) − μ(f)μ(g) of two single-site observables.
pub fn covariance(mu: &ExactMeasure, f: &Observable, g_obs: &Observable) -> f64 {
    let space = mu.space();
    let fv = f.expand(space);
    let gv = g_obs.expand(space);
    let fg: Vec<f64> = fv.iter().zip(&gv).map(|(a, b)| a * b).collect();
    mu.expectation(&fg) - mu.expectation(&fv) * mu.expectation(&gv)
}

/// Conditional measure freezing every coordinate outside `free` to the
/// values it takes in `anchor`, renormalized over the matching cylinder.
/// `free` equal to all vertices returns `mu` itself; empty `free` returns
/// the point mass at `anchor`.
pub fn conditional_measure(
    mu: &ExactMeasure,
    free: &BTreeSet<usize>,
    anchor: usize,
) -> ExactMeasure {
    let space = *mu.space();
    let frozen: Vec<usize> = (0..space.site_count())
        .filter(|v| !free.contains(v))
        .collect();
    let mut weights = vec![0.0; space.size()];
    let mut total = KahanSum::new();
    for (cfg, &w) in mu.weights().iter().enumerate() {
        let matches = frozen
            .iter()
            .all(|&v| space.symbol_at(cfg, v) == space.symbol_at(anchor, v));
        if matches {
            weights[cfg] = w;
            total.add(w);
        }
    }
    let z = total.value();
    assert!(z > 0.0, "conditioning cylinder must carry positive mass");
    for w in &mut weights {
        *w /= z;
    }
    ExactMeasure { space, weights }
}

/// Outcome of the decay experiment for one conditioning of the coordinates
/// outside the largest shell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditioningSummary {
    /// Frozen coordinates, rendered as "site=symbol" pairs.
    pub boundary: String,
    /// Φ = conditioned expectation of f minus its unconditioned one,
    /// computed from the initial product coupling.
    pub phi: f64,
    /// The same gap read off the final contracted coupling.
    pub phi_final: f64,
    /// Largest drift of the gap across stages; the marginals never change,
    /// so this is rounding noise.
    pub phi_drift: f64,
    /// Disagreement probability at the center after the last stage.
    pub gamma_final: f64,
    /// 2‖f‖ times `gamma_final`, which must dominate |Φ|.
    pub phi_bound: f64,
    /// `phi_bound` − |`phi_final`|.
    pub phi_slack: f64,
    /// Worst componentwise slack of the stage-to-stage matrix bound; absent
    /// when the trajectory has a single stage.
    pub domination_slack: Option<f64>,
}

/// Result of [`decay_experiment`]: the exact covariance of two single-site
/// observables against the certified exponential bound, with the localized
/// contraction evidence backing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub site_f: String,
    pub site_g: String,
    /// Path distance between the two sites.
    pub distance: usize,
    pub f_sup: f64,
    pub g_sup: f64,
    pub mu_h: f64,
    /// Exact covariance of the two observables under the Gibbs measure.
    pub covariance: f64,
    /// C_K ‖f‖ ‖g‖ e^{−α_K · distance}.
    pub bound: f64,
    pub bound_holds: bool,
    pub alpha: f64,
    pub c_k: f64,
    /// Per-sweep contraction factor (spectral radius of the certified
    /// matrix).
    pub rate: f64,
    /// Balance weight of the transformed norm.
    pub xi: f64,
    /// |covariance − Σ_x μ(x) g(x) Φ(x)|; the sum telescopes to the
    /// covariance exactly, so this is rounding noise.
    pub reconstruction_residual: f64,
    /// Largest `phi_drift` over all conditionings.
    pub phi_drift_worst: f64,
    /// Smallest `phi_slack` over all conditionings.
    pub phi_slack_worst: f64,
    /// Smallest `domination_slack` over all conditionings; absent for
    /// adjacent sites, whose trajectories have a single stage.
    pub domination_slack_worst: Option<f64>,
    pub conditionings: Vec<ConditioningSummary>,
}

/// Covariance-decay experiment: certifies the model at cutoff `k`, then for
/// every conditioning of the coordinates outside the shell of radius
/// distance − 1 around `site_f`, contracts the coupling of the conditioned
/// and unconditioned measures down to the center while tracking the
/// expectation gap Φ of `f_values`. Verifies that the gap is dominated by
/// the center disagreement, that the covariance is reconstructed from Φ,
/// and that the certified bound covers the exact covariance.
///
/// `f_values` and `g_values` give the two observables per symbol, sitting
/// at `site_f` and `site_g`. `mu_h_override` substitutes for the h-moment
/// of the exact measure in the prefactor.
#[allow(clippy::too_many_arguments)]
pub fn decay_experiment(
    model: &FiniteSpinModel,
    g: &Graph,
    params: &ContractionParams,
    k: f64,
    site_f: &str,
    site_g: &str,
    f_values: &[f64],
    g_values: &[f64],
    mu_h_override: Option<f64>,
    cap: usize,
) -> Result<DecayReport, EngineError> {
    let lf = g.index_of(site_f)?;
    let lg = g.index_of(site_g)?;
    if lf == lg {
        return Err(EngineError::SameSite);
    }
    let m_sym = model.symbol_count();
    for (name, values) in [("f", f_values), ("g", g_values)] {
        if values.len() != m_sym || values.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::BadObservable(format!(
                "{name} needs {m_sym} finite values, one per symbol"
            )));
        }
    }

    let mu = exact_gibbs(model, g)?;
    let mu_h = mu_h_override.unwrap_or_else(|| h_moment(&mu, model));
    let cert = certify(params, g, k, mu_h)?;
    if cert.verdict != Verdict::Unique {
        return Err(EngineError::NotCertified {
            verdict: cert.verdict.to_string(),
        });
    }
    let m = cert.m.expect("certified run always carries the matrix");
    let rate = cert.r.expect("certified run always carries the radius");
    let xi = cert.xi.expect("certified run always carries the weight");
    let alpha = cert.alpha.expect("certified run carries the decay rate");
    let c_k = cert.c_k.expect("certified run carries the prefactor");

    let partition = greedy_color(g);
    if partition.class_count() > params.chi {
        return Err(EngineError::BadPartition(format!(
            "coloring needs {} classes but the declared chromatic bound is {}",
            partition.class_count(),
            params.chi
        )));
    }

    let distance = path_distance(g, site_f, site_g)?;
    let space = *mu.space();
    let f_obs = Observable::new(lf, f_values.to_vec());
    let g_obs = Observable::new(lg, g_values.to_vec());
    let f_full = f_obs.expand(&space);
    let cov = covariance(&mu, &f_obs, &g_obs);

    let traces = localized_sweep(
        &mu,
        model,
        g,
        &partition,
        params,
        k,
        &m,
        site_f,
        distance,
        Some(&f_full),
        cap,
    )?;

    // The observable at `site_g` never enters the shell of radius
    // distance − 1 around `site_f`, so it is measurable with respect to the
    // frozen coordinates and the covariance splits over the conditionings.
    let largest = shells(g, site_f, distance)?.pop().expect("n >= 1 shells");
    debug_assert!(!largest.contains(&lg));
    let outside: Vec<usize> = (0..space.site_count())
        .filter(|v| !largest.contains(v))
        .collect();
    let g_full = g_obs.expand(&space);
    let mut cylinder_g = vec![KahanSum::new(); traces.len()];
    for (cfg, &g_val) in g_full.iter().enumerate() {
        let w = mu.weights()[cfg];
        if w == 0.0 {
            continue;
        }
        let mut combo = 0usize;
        for (slot, &site) in outside.iter().enumerate() {
            combo += space.symbol_at(cfg, site) * m_sym.pow(slot as u32);
        }
        cylinder_g[combo].add(w * g_val);
    }

    let f_sup = f_obs.sup_norm();
    let mut reconstruction = KahanSum::new();
    let mut conditionings = Vec::with_capacity(traces.len());
    for (trace, mass) in traces.iter().zip(&cylinder_g) {
        let first = &trace.rows[0];
        let last = trace.rows.last().expect("every trace has rows");
        let phi = first.gap.expect("gap tracking was requested");
        let phi_final = last.gap.expect("gap tracking was requested");
        let phi_drift = trace
            .rows
            .iter()
            .map(|row| (row.gap.expect("gap tracking was requested") - phi).abs())
            .fold(0.0, f64::max);
        let phi_bound = 2.0 * f_sup * last.gamma;
        let mut domination_slack: Option<f64> = None;
        for pair in trace.rows.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let slack_gamma = m.0[0][0] * prev.gamma + m.0[0][1] * prev.lambda - next.gamma;
            let slack_lambda = m.0[1][0] * prev.gamma + m.0[1][1] * prev.lambda - next.lambda;
            let worst = slack_gamma.min(slack_lambda);
            domination_slack = Some(domination_slack.map_or(worst, |s| s.min(worst)));
        }
        reconstruction.add(mass.value() * phi);
        conditionings.push(ConditioningSummary {
            boundary: trace.boundary.clone(),
            phi,
            phi_final,
            phi_drift,
            gamma_final: last.gamma,
            phi_bound,
            phi_slack: phi_bound - phi_final.abs(),
            domination_slack,
        });
    }

    let g_sup = g_obs.sup_norm();
    let bound = c_k * f_sup * g_sup * (-alpha * distance as f64).exp();
    let phi_slack_worst = conditionings
        .iter()
        .map(|c| c.phi_slack)
        .fold(f64::INFINITY, f64::min);
    let phi_drift_worst = conditionings
        .iter()
        .map(|c| c.phi_drift)
        .fold(0.0, f64::max);
    let domination_slack_worst = conditionings
        .iter()
        .filter_map(|c| c.domination_slack)
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.min(s)))
        });

    Ok(DecayReport {
        site_f: site_f.to_owned(),
        site_g: site_g.to_owned(),
        distance,
        f_sup,
        g_sup,
        mu_h,
        covariance: cov,
        bound,
        bound_holds: cov.abs() <= bound,
        alpha,
        c_k,
        rate,
        xi,
        reconstruction_residual: (cov - reconstruction.value()).abs(),
        phi_drift_worst,
        phi_slack_worst,
        domination_slack_worst,
        conditionings,
    })
}
