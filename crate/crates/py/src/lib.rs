//! Python bindings: load a model spec, certify the contraction criterion,
//! verify desk-scale membership, run coupled sweeps, and measure covariance
//! decay, all through the `gibbscert_py` extension module.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gibbscert::config::ModelSpec;
use gibbscert::coupling::{iterate, optimal_coupling as couple, CouplingTable};
use gibbscert::criterion::{certify, k_star as k_star_threshold};
use gibbscert::oracle::{check_consistency, decay_experiment, exact_gibbs, h_moment};
use gibbscert::spin::{tv_distance, verify_membership, LocalDistribution};

/// One sweep-trajectory row: (sweep, gamma, lambda, transformed_norm,
/// min_slack).
type SweepRow = (usize, f64, f64, f64, Option<f64>);

fn invalid<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn failed<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn distribution(name: &str, probs: Vec<f64>) -> PyResult<LocalDistribution> {
    if probs.len() < 2 {
        return Err(PyValueError::new_err(format!(
            "{name} needs at least two entries"
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(PyValueError::new_err(format!(
            "{name} must hold finite nonnegative probabilities"
        )));
    }
    LocalDistribution::from_probs(probs)
        .map_err(|_| PyValueError::new_err(format!("{name} must sum to 1 within 1e-12")))
}

/// Threshold K* above which the cutoff K admits a certified contraction.
#[pyfunction]
fn k_star(kappa_bar: f64, c_bar: f64, delta: usize, chi: usize) -> PyResult<f64> {
    k_star_threshold(kappa_bar, c_bar, delta, chi).map_err(invalid)
}

/// Optimal coupling of two probability vectors: maximal diagonal mass,
/// off-diagonal mass equal to their total-variation distance.
#[pyfunction]
fn optimal_coupling(p: Vec<f64>, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let p = distribution("p", p)?;
    let q = distribution("q", q)?;
    couple(&p, &q).map_err(invalid)
}

/// Total-variation distance between two probability vectors.
#[pyfunction]
fn distance(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let p = distribution("p", p)?;
    let q = distribution("q", q)?;
    tv_distance(&p, &q).map_err(invalid)
}

/// Outcome of evaluating the contraction criterion at a cutoff K.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Certificate {
    #[pyo3(get)]
    verdict: String,
    #[pyo3(get)]
    unique: bool,
    #[pyo3(get)]
    kappa_bar: f64,
    #[pyo3(get)]
    c_bar: f64,
    #[pyo3(get)]
    delta: usize,
    #[pyo3(get)]
    chi: usize,
    #[pyo3(get)]
    k: f64,
    #[pyo3(get)]
    mu_h: f64,
    #[pyo3(get)]
    k_star: Option<f64>,
    #[pyo3(get)]
    m: Option<Vec<Vec<f64>>>,
    #[pyo3(get)]
    spectral_radius: Option<f64>,
    #[pyo3(get)]
    conservative_radius: Option<f64>,
    #[pyo3(get)]
    xi: Option<f64>,
    #[pyo3(get)]
    alpha: Option<f64>,
    #[pyo3(get)]
    c_k: Option<f64>,
}

#[pymethods]
impl Certificate {
    fn __repr__(&self) -> String {
        match self.spectral_radius {
            Some(r) => format!(
                "Certificate(verdict={}, k={}, spectral_radius={:.6})",
                self.verdict, self.k, r
            ),
            None => format!("Certificate(verdict={}, k={})", self.verdict, self.k),
        }
    }
}

/// One site's worst slacks from the membership check.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct MembershipSite {
    #[pyo3(get)]
    site: String,
    #[pyo3(get)]
    sensitivity_slack: f64,
    #[pyo3(get)]
    sensitivity_witness: Option<String>,
    #[pyo3(get)]
    moment_slack: f64,
    #[pyo3(get)]
    moment_witness: Option<String>,
    #[pyo3(get)]
    max_conditional_h: f64,
    #[pyo3(get)]
    vacuous: bool,
}

/// Desk-scale membership check: per-site sensitivity sums against the kappa
/// table and conditional h-moments against the cutoff.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Membership {
    #[pyo3(get)]
    passed: bool,
    #[pyo3(get)]
    k: f64,
    #[pyo3(get)]
    tolerance: f64,
    #[pyo3(get)]
    full_pair_enumeration: bool,
    #[pyo3(get)]
    worst_sensitivity_slack: f64,
    #[pyo3(get)]
    worst_moment_slack: f64,
    #[pyo3(get)]
    sites: Vec<MembershipSite>,
}

#[pymethods]
impl Membership {
    fn __repr__(&self) -> String {
        format!(
            "Membership(passed={}, worst_sensitivity_slack={:.3e}, worst_moment_slack={:.3e})",
            if self.passed { "True" } else { "False" },
            self.worst_sensitivity_slack,
            self.worst_moment_slack
        )
    }
}

/// One conditioning configuration of the localized decay run.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Conditioning {
    #[pyo3(get)]
    boundary: String,
    #[pyo3(get)]
    phi: f64,
    #[pyo3(get)]
    phi_final: f64,
    #[pyo3(get)]
    phi_drift: f64,
    #[pyo3(get)]
    gamma_final: f64,
    #[pyo3(get)]
    phi_bound: f64,
    #[pyo3(get)]
    phi_slack: f64,
    #[pyo3(get)]
    domination_slack: Option<f64>,
}

/// Exact covariance of two single-site observables against the certified
/// exponential bound.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Decay {
    #[pyo3(get)]
    site_f: String,
    #[pyo3(get)]
    site_g: String,
    #[pyo3(get)]
    distance: usize,
    #[pyo3(get)]
    covariance: f64,
    #[pyo3(get)]
    bound: f64,
    #[pyo3(get)]
    bound_holds: bool,
    #[pyo3(get)]
    alpha: f64,
    #[pyo3(get)]
    c_k: f64,
    #[pyo3(get)]
    rate: f64,
    #[pyo3(get)]
    xi: f64,
    #[pyo3(get)]
    mu_h: f64,
    #[pyo3(get)]
    f_sup: f64,
    #[pyo3(get)]
    g_sup: f64,
    #[pyo3(get)]
    reconstruction_residual: f64,
    #[pyo3(get)]
    phi_drift_worst: f64,
    #[pyo3(get)]
    phi_slack_worst: f64,
    #[pyo3(get)]
    domination_slack_worst: Option<f64>,
    #[pyo3(get)]
    conditionings: Vec<Conditioning>,
}

#[pymethods]
impl Decay {
    fn __repr__(&self) -> String {
        format!(
            "Decay(sites=({}, {}), distance={}, covariance={:.6e}, bound={:.6e}, holds={})",
            self.site_f,
            self.site_g,
            self.distance,
            self.covariance,
            self.bound,
            if self.bound_holds { "True" } else { "False" }
        )
    }
}

/// A finite spin model with its graph, interaction tables, and criterion
/// parameters, loaded from the TOML spec format.
#[pyclass(frozen)]
struct Model {
    spec: ModelSpec,
}

impl Model {
    fn mu_h(&self) -> PyResult<f64> {
        if let Some(mu_h) = self.spec.mu_h_override {
            return Ok(mu_h);
        }
        let mu = exact_gibbs(&self.spec.model, &self.spec.graph).map_err(failed)?;
        Ok(h_moment(&mu, &self.spec.model))
    }

    /// Per-symbol observable values when none are given: symbols that parse
    /// as numbers, otherwise the indicator of the first symbol.
    fn default_observable(&self) -> Vec<f64> {
        let alphabet = self.spec.model.alphabet();
        let parsed: Option<Vec<f64>> = alphabet
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        parsed.unwrap_or_else(|| {
            let mut values = vec![0.0; alphabet.len()];
            values[0] = 1.0;
            values
        })
    }
}

#[pymethods]
impl Model {
    /// Parses a spec from TOML text.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let spec = ModelSpec::parse(text).map_err(invalid)?;
        Ok(Model { spec })
    }

    /// Loads a spec from a TOML file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let spec = ModelSpec::load(std::path::Path::new(path)).map_err(invalid)?;
        Ok(Model { spec })
    }

    #[getter]
    fn sites(&self) -> Vec<String> {
        (0..self.spec.graph.vertex_count())
            .map(|i| self.spec.graph.id_of(i).to_owned())
            .collect()
    }

    #[getter]
    fn alphabet(&self) -> Vec<String> {
        self.spec.model.alphabet().to_vec()
    }

    #[getter]
    fn k(&self) -> f64 {
        self.spec.k
    }

    #[getter]
    fn delta(&self) -> usize {
        self.spec.params.delta
    }

    #[getter]
    fn chi(&self) -> usize {
        self.spec.params.chi
    }

    /// Worst violation of one-site consistency by the exact measure; pure
    /// rounding noise for a correct implementation.
    fn consistency_defect(&self) -> PyResult<f64> {
        let mu = exact_gibbs(&self.spec.model, &self.spec.graph).map_err(failed)?;
        Ok(check_consistency(&mu, &self.spec.model, &self.spec.graph))
    }

    /// Evaluates the contraction criterion at the spec's cutoff, or at `k`.
    #[pyo3(signature = (k=None))]
    fn certify(&self, k: Option<f64>) -> PyResult<Certificate> {
        let mu_h = self.mu_h()?;
        let cert = certify(
            &self.spec.params,
            &self.spec.graph,
            k.unwrap_or(self.spec.k),
            mu_h,
        )
        .map_err(invalid)?;
        Ok(Certificate {
            verdict: cert.verdict.to_string(),
            unique: cert.verdict == gibbscert::Verdict::Unique,
            kappa_bar: cert.kappa_bar,
            c_bar: cert.c_bar,
            delta: cert.delta,
            chi: cert.chi,
            k: cert.k,
            mu_h: cert.mu_h,
            k_star: cert.k_star,
            m: cert.m.map(|m| vec![m.0[0].to_vec(), m.0[1].to_vec()]),
            spectral_radius: cert.r,
            conservative_radius: cert.r_upper,
            xi: cert.xi,
            alpha: cert.alpha,
            c_k: cert.c_k,
        })
    }

    /// Checks desk-scale membership at the spec's cutoff, or at `k`.
    #[pyo3(signature = (k=None))]
    fn verify(&self, k: Option<f64>) -> Membership {
        let report = verify_membership(
            &self.spec.model,
            &self.spec.graph,
            k.unwrap_or(self.spec.k),
            &self.spec.params,
        );
        Membership {
            passed: report.pass,
            k: report.k,
            tolerance: report.tolerance,
            full_pair_enumeration: report.pair_enumeration,
            worst_sensitivity_slack: report.worst_sensitivity_slack(),
            worst_moment_slack: report.worst_moment_slack(),
            sites: report
                .sites
                .into_iter()
                .map(|s| MembershipSite {
                    site: s.site,
                    sensitivity_slack: s.sensitivity_slack,
                    sensitivity_witness: s.sensitivity_witness,
                    moment_slack: s.moment_slack,
                    moment_witness: s.moment_witness,
                    max_conditional_h: s.max_conditional_h,
                    vacuous: s.vacuous,
                })
                .collect(),
        }
    }

    /// Runs full chromatic sweeps on the product self-coupling of the exact
    /// measure and returns one row per recorded state: (sweep, gamma,
    /// lambda, transformed_norm, min_slack).
    #[pyo3(signature = (sweeps=10, k=None))]
    fn sweep(&self, sweeps: usize, k: Option<f64>) -> PyResult<Vec<SweepRow>> {
        let k = k.unwrap_or(self.spec.k);
        let mu_h = self.mu_h()?;
        let cert = certify(&self.spec.params, &self.spec.graph, k, mu_h).map_err(invalid)?;
        let m = cert.m.ok_or_else(|| {
            PyRuntimeError::new_err(format!(
                "no contraction matrix: verdict is {}",
                cert.verdict
            ))
        })?;
        let mu = exact_gibbs(&self.spec.model, &self.spec.graph).map_err(failed)?;
        let table = CouplingTable::product(*mu.space(), mu.weights(), mu.weights(), self.spec.cap)
            .map_err(failed)?;
        let outcome = iterate(
            table,
            &self.spec.model,
            &self.spec.graph,
            &self.spec.partition,
            &self.spec.params,
            k,
            &m,
            self.spec.tol_exact,
            sweeps,
        )
        .map_err(failed)?;
        Ok(outcome
            .rows
            .into_iter()
            .map(|row| {
                (
                    row.sweep,
                    row.gamma,
                    row.lambda,
                    row.transformed,
                    row.min_slack,
                )
            })
            .collect())
    }

    /// Measures the exact covariance of observables at `l1` and `l2` against
    /// the certified exponential bound.
    #[pyo3(signature = (l1, l2, f=None, g=None, k=None))]
    fn decay(
        &self,
        l1: &str,
        l2: &str,
        f: Option<Vec<f64>>,
        g: Option<Vec<f64>>,
        k: Option<f64>,
    ) -> PyResult<Decay> {
        let f = f.unwrap_or_else(|| self.default_observable());
        let g = g.unwrap_or_else(|| self.default_observable());
        let report = decay_experiment(
            &self.spec.model,
            &self.spec.graph,
            &self.spec.params,
            k.unwrap_or(self.spec.k),
            l1,
            l2,
            &f,
            &g,
            self.spec.mu_h_override,
            self.spec.cap,
        )
        .map_err(failed)?;
        Ok(Decay {
            site_f: report.site_f,
            site_g: report.site_g,
            distance: report.distance,
            covariance: report.covariance,
            bound: report.bound,
            bound_holds: report.bound_holds,
            alpha: report.alpha,
            c_k: report.c_k,
            rate: report.rate,
            xi: report.xi,
            mu_h: report.mu_h,
            f_sup: report.f_sup,
            g_sup: report.g_sup,
            reconstruction_residual: report.reconstruction_residual,
            phi_drift_worst: report.phi_drift_worst,
            phi_slack_worst: report.phi_slack_worst,
            domination_slack_worst: report.domination_slack_worst,
            conditionings: report
                .conditionings
                .into_iter()
                .map(|c| Conditioning {
                    boundary: c.boundary,
                    phi: c.phi,
                    phi_final: c.phi_final,
                    phi_drift: c.phi_drift,
                    gamma_final: c.gamma_final,
                    phi_bound: c.phi_bound,
                    phi_slack: c.phi_slack,
                    domination_slack: c.domination_slack,
                })
                .collect(),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(sites={}, symbols={}, k={})",
            self.spec.graph.vertex_count(),
            self.spec.model.symbol_count(),
            self.spec.k
        )
    }
}

#[pymodule]
fn gibbscert_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Certificate>()?;
    m.add_class::<Membership>()?;
    m.add_class::<MembershipSite>()?;
    m.add_class::<Decay>()?;
    m.add_class::<Conditioning>()?;
    m.add_function(wrap_pyfunction!(k_star, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    Ok(())
}
