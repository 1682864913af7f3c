//! Closed-form evaluation of the uniqueness criterion.
//!
//! Inputs are the sensitivity matrix κ, the moment-growth matrix c (given
//! per directed edge or as uniform scalars), the degree bound Δ, the class
//! count χ of the chromatic partition, and the cutoff K. From these the
//! module computes the row-sum norms κ̄ and c̄, the admissibility threshold
//! K*, the 2×2 sweep-contraction matrix M(K), its spectral radius r_K, the
//! balance weight ξ that symmetrizes M(K), the decay rate α_K = −log r_K and
//! prefactor C_K, and finally the certificate verdict.
//!
//! The spectral radius is always the exact largest eigenvalue of M(K). A
//! coarser closed form, with the off-diagonal product in the discriminant
//! enlarged by one factor of Δ, is also reported (see
//! [`conservative_radius`]); it is an upper bound on r_K but does not satisfy
//! the ξ balance identity, so nothing downstream depends on it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::CriterionError;
use crate::graph::{max_degree, Graph};

/// Per-directed-edge nonnegative weights, or one scalar for every edge.
///
/// Entries are looked up by ordered vertex-index pairs `(from, to)`; a pair
/// absent from an explicit table has weight 0.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeWeights {
    Uniform(f64),
    PerEdge(BTreeMap<(usize, usize), f64>),
}

impl EdgeWeights {
    /// Weight of the directed edge `from -> to`.
    pub fn get(&self, from: usize, to: usize) -> f64 {
        match self {
            EdgeWeights::Uniform(v) => *v,
            EdgeWeights::PerEdge(map) => map.get(&(from, to)).copied().unwrap_or(0.0),
        }
    }

    fn validate(&self, field: &str) -> Result<(), CriterionError> {
        let bad = |value: f64| CriterionError::BadEntry {
            field: field.to_owned(),
            value,
        };
        match self {
            EdgeWeights::Uniform(v) => {
                if !v.is_finite() || *v < 0.0 {
                    return Err(bad(*v));
                }
            }
            EdgeWeights::PerEdge(map) => {
                for v in map.values() {
                    if !v.is_finite() || *v < 0.0 {
                        return Err(bad(*v));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The criterion's input data: sensitivity and moment-growth matrices plus
/// the graph parameters entering the closed forms.
///
/// `delta` must be at least 2 and at least the graph's max degree wherever a
/// graph is in play; `chi` must lie in `[2, delta + 1]` and, for the sweep
/// lemmas to be checkable, must be at least the class count of the partition
/// actually used by the sweeps. Both bounds are only loosened by larger
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionParams {
    pub kappa: EdgeWeights,
    pub c: EdgeWeights,
    pub delta: usize,
    pub chi: usize,
}

impl ContractionParams {
    pub fn new(
        kappa: EdgeWeights,
        c: EdgeWeights,
        delta: usize,
        chi: usize,
    ) -> Result<Self, CriterionError> {
        kappa.validate("kappa")?;
        c.validate("c")?;
        if delta < 2 {
            return Err(CriterionError::DegreeTooSmall { delta });
        }
        if chi < 2 || chi > delta + 1 {
            return Err(CriterionError::ChiOutOfRange {
                chi,
                max: delta + 1,
            });
        }
        Ok(ContractionParams {
            kappa,
            c,
            delta,
            chi,
        })
    }
}

/// Row-sum suprema of the two matrices over a graph's directed edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub kappa_bar: f64,
    pub c_bar: f64,
}

impl Norms {
    /// Admissibility of the sensitivity norm: κ̄ < 1.
    pub fn kappa_admissible(&self) -> bool {
        self.kappa_bar < 1.0
    }

    /// Admissibility of the moment-growth norm: 0 < c̄ < Δ^{-χ}.
    ///
    /// c̄ = 0 is rejected rather than special-cased: the threshold formula
    /// divides by c̄, and the cutoff comparison A/K < c̄/2 it guarantees is
    /// unsatisfiable at zero. Models with no moment growth should supply a
    /// small positive c.
    pub fn c_admissible(&self, delta: usize, chi: usize) -> bool {
        self.c_bar > 0.0 && self.c_bar < (delta as f64).powi(-(chi as i32))
    }
}

/// Row-sum suprema κ̄ = sup_ℓ Σ_{ℓ'∈∂ℓ} κ_{ℓℓ'} and likewise c̄ over the
/// graph's adjacency.
pub fn norms(params: &ContractionParams, g: &Graph) -> Norms {
    let row_sup = |w: &EdgeWeights| {
        (0..g.vertex_count())
            .map(|v| g.neighbors(v).iter().map(|&u| w.get(v, u)).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Norms {
        kappa_bar: row_sup(&params.kappa),
        c_bar: row_sup(&params.c),
    }
}

/// The admissibility threshold for the cutoff K: the larger of
///
/// ```text
///   4 Δ^{χ+1} / (c̄ (1 − κ̄))
///   2 Δ^{χ+1} (2 Δ^{χ−1} + 1 − c̄ Δ^χ) / ((1 − κ̄)² (1 − c̄ Δ^χ))
/// ```
///
/// Any K above the threshold yields a contracting M(K).
pub fn k_star(kappa_bar: f64, c_bar: f64, delta: usize, chi: usize) -> Result<f64, CriterionError> {
    if delta < 2 {
        return Err(CriterionError::DegreeTooSmall { delta });
    }
    if kappa_bar >= 1.0 {
        return Err(CriterionError::InadmissibleKappa { kappa_bar });
    }
    let dchi = (delta as f64).powi(chi as i32);
    if c_bar == 0.0 {
        return Err(CriterionError::ZeroC);
    }
    if c_bar < 0.0 || c_bar >= 1.0 / dchi {
        return Err(CriterionError::InadmissibleC {
            c_bar,
            limit: 1.0 / dchi,
        });
    }
    let dchi1 = (delta as f64).powi(chi as i32 + 1);
    let dchim1 = (delta as f64).powi(chi as i32 - 1);
    let branch1 = 4.0 * dchi1 / (c_bar * (1.0 - kappa_bar));
    let branch2 = 2.0 * dchi1 * (2.0 * dchim1 + 1.0 - c_bar * dchi)
        / ((1.0 - kappa_bar).powi(2) * (1.0 - c_bar * dchi));
    Ok(branch1.max(branch2))
}

/// The constant A = 2 Δ^{χ+1} / (1 − κ̄) coupling the cutoff into the first
/// row of M(K).
pub fn a_constant(kappa_bar: f64, delta: usize, chi: usize) -> f64 {
    2.0 * (delta as f64).powi(chi as i32 + 1) / (1.0 - kappa_bar)
}

/// A 2×2 matrix acting on (γ, λ) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Matrix2(pub [[f64; 2]; 2]);

impl Matrix2 {
    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (
            self.0[0][0] * v.0 + self.0[0][1] * v.1,
            self.0[1][0] * v.0 + self.0[1][1] * v.1,
        )
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }
}

/// The sweep-contraction matrix
///
/// ```text
///   M(K) = [ κ̄ + A/K    2A/K  ]
///          [ Δ^{χ−1}    c̄ Δ^χ ]
/// ```
///
/// One full chromatic sweep maps the functional pair (γ, λ) below
/// M(K)·(γ, λ) componentwise.
pub fn contraction_matrix(
    kappa_bar: f64,
    c_bar: f64,
    delta: usize,
    chi: usize,
    a: f64,
    k: f64,
) -> Matrix2 {
    assert!(k > 0.0, "cutoff K must be positive");
    let d = delta as f64;
    Matrix2([
        [kappa_bar + a / k, 2.0 * a / k],
        [d.powi(chi as i32 - 1), c_bar * d.powi(chi as i32)],
    ])
}

/// Exact largest eigenvalue of a nonnegative 2×2 matrix,
/// (trace + sqrt(trace² − 4 det)) / 2.
///
/// For nonnegative entries the discriminant equals (a−d)² + 4bc ≥ 0; any
/// tiny negative value it acquires through rounding is clamped.
pub fn spectral_radius(m: &Matrix2) -> f64 {
    let t = m.trace();
    let disc = (t * t - 4.0 * m.det()).max(0.0);
    0.5 * (t + disc.sqrt())
}

/// Conservative variant of the contraction factor, with the off-diagonal
/// product under the discriminant coarsened by one factor of Δ:
///
/// ```text
///   ½ [ κ̄ + A/K + c̄Δ^χ + sqrt((κ̄ + A/K − c̄Δ^χ)² + 8 Δ^χ A/K) ]
/// ```
///
/// Since Δ ≥ 1 this never falls below [`spectral_radius`] of the matrix from
/// [`contraction_matrix`], whose exact discriminant carries 8 Δ^{χ−1} A/K.
/// Reported for diagnostics only; the balance identity defining ξ closes
/// only with the exact eigenvalue.
pub fn conservative_radius(
    kappa_bar: f64,
    c_bar: f64,
    delta: usize,
    chi: usize,
    a: f64,
    k: f64,
) -> f64 {
    let d = delta as f64;
    let top = kappa_bar + a / k;
    let bottom = c_bar * d.powi(chi as i32);
    let disc = (top - bottom).powi(2) + 8.0 * d.powi(chi as i32) * a / k;
    0.5 * (top + bottom + disc.sqrt())
}

/// The constants governing correlation decay under a contracting M(K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayConstants {
    /// Balance weight: ξ = Δ^{χ−1} / (r_K − c̄Δ^χ). Rescaling γ by ξ makes
    /// both row sums of the conjugated matrix equal r_K, so the rescaled
    /// max-norm contracts by exactly r_K per sweep.
    pub xi: f64,
    /// Decay rate α_K = −log r_K.
    pub alpha: f64,
    /// Decay prefactor C_K = 2 r_K^{-1} max{1, ξ^{-1} μ(h)}.
    pub c_k: f64,
}

/// Computes (ξ, α_K, C_K) from a contracting spectral radius.
///
/// `mu_h` is the sup over sites of the h-moment of the reference measure.
/// Fails when r ≥ 1 (no contraction). r ≤ c̄Δ^χ cannot occur for the exact
/// eigenvalue of a matrix with positive off-diagonal entries and is asserted.
#[allow(clippy::too_many_arguments)]
pub fn decay_constants(
    r: f64,
    kappa_bar: f64,
    c_bar: f64,
    delta: usize,
    chi: usize,
    a: f64,
    k: f64,
    mu_h: f64,
) -> Result<DecayConstants, CriterionError> {
    if r >= 1.0 {
        return Err(CriterionError::NoContraction { r });
    }
    let d = delta as f64;
    let bottom = c_bar * d.powi(chi as i32);
    assert!(
        r > bottom,
        "spectral radius {r} does not dominate the lower diagonal entry {bottom}"
    );
    let _ = (kappa_bar, a, k);
    let xi = d.powi(chi as i32 - 1) / (r - bottom);
    Ok(DecayConstants {
        xi,
        alpha: -r.ln(),
        c_k: 2.0 / r * 1f64.max(mu_h / xi),
    })
}

/// Certificate verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Admissible norms, K above threshold, contracting matrix: at most one
    /// consistent state with finite h-moment exists.
    Unique,
    /// Admissible norms but K at or below the threshold: the criterion is
    /// silent.
    Indeterminate,
    /// Norm bounds violated (κ̄ ≥ 1, c̄ = 0, or c̄ ≥ Δ^{-χ}).
    Inadmissible,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Unique => "Unique",
            Verdict::Indeterminate => "Indeterminate",
            Verdict::Inadmissible => "Inadmissible",
        };
        f.write_str(s)
    }
}

/// Everything the criterion derives for one (params, graph, K) triple.
///
/// Fields that require admissibility (threshold, matrix, radii) or a
/// contracting radius (decay constants) are `None` when their precondition
/// fails; the norms and the verdict are always present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessCertificate {
    pub verdict: Verdict,
    pub kappa_bar: f64,
    pub c_bar: f64,
    pub delta: usize,
    pub chi: usize,
    pub k: f64,
    pub mu_h: f64,
    pub k_star: Option<f64>,
    pub a: Option<f64>,
    pub m: Option<Matrix2>,
    /// Exact spectral radius of M(K).
    pub r: Option<f64>,
    /// Conservative upper value from [`conservative_radius`].
    pub r_upper: Option<f64>,
    pub xi: Option<f64>,
    pub alpha: Option<f64>,
    pub c_k: Option<f64>,
}

/// Full certificate evaluation.
///
/// The verdict is `Unique` iff the norms are admissible, K exceeds the
/// threshold K*, and the exact spectral radius is below 1; `Indeterminate`
/// when admissible but K does not exceed the threshold; `Inadmissible`
/// otherwise. `mu_h` enters only the prefactor C_K.
pub fn certify(
    params: &ContractionParams,
    g: &Graph,
    k: f64,
    mu_h: f64,
) -> Result<UniquenessCertificate, CriterionError> {
    if k.is_nan() || k <= 0.0 {
        return Err(CriterionError::NonPositiveK { k });
    }
    if params.delta < 2 {
        return Err(CriterionError::DegreeTooSmall {
            delta: params.delta,
        });
    }
    let observed = max_degree(g);
    if params.delta < observed {
        return Err(CriterionError::DeltaBelowGraph {
            delta: params.delta,
            observed,
        });
    }
    if params.chi < 2 || params.chi > params.delta + 1 {
        return Err(CriterionError::ChiOutOfRange {
            chi: params.chi,
            max: params.delta + 1,
        });
    }

    let n = norms(params, g);
    let (delta, chi) = (params.delta, params.chi);
    let mut cert = UniquenessCertificate {
        verdict: Verdict::Inadmissible,
        kappa_bar: n.kappa_bar,
        c_bar: n.c_bar,
        delta,
        chi,
        k,
        mu_h,
        k_star: None,
        a: None,
        m: None,
        r: None,
        r_upper: None,
        xi: None,
        alpha: None,
        c_k: None,
    };
    if !n.kappa_admissible() || !n.c_admissible(delta, chi) {
        return Ok(cert);
    }

    let threshold = k_star(n.kappa_bar, n.c_bar, delta, chi)?;
    let a = a_constant(n.kappa_bar, delta, chi);
    let m = contraction_matrix(n.kappa_bar, n.c_bar, delta, chi, a, k);
    let r = spectral_radius(&m);
    cert.k_star = Some(threshold);
    cert.a = Some(a);
    cert.m = Some(m);
    cert.r = Some(r);
    cert.r_upper = Some(conservative_radius(n.kappa_bar, n.c_bar, delta, chi, a, k));

    if r < 1.0 {
        let dc = decay_constants(r, n.kappa_bar, n.c_bar, delta, chi, a, k, mu_h)?;
        cert.xi = Some(dc.xi);
        cert.alpha = Some(dc.alpha);
        cert.c_k = Some(dc.c_k);
    }

    cert.verdict = if k > threshold && r < 1.0 {
        Verdict::Unique
    } else {
        Verdict::Indeterminate
    };
    Ok(cert)
}
