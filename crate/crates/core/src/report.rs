//! Deterministic report rendering.
//!
//! Every report starts with the same header block naming the command, the
//! spec file, and the active tolerances and state-space cap. Numbers are
//! printed with Rust's shortest round-trip formatting, and all iteration
//! orders upstream are fixed, so identical inputs render to identical
//! bytes. Each renderer has a plain-text form and a JSON envelope built
//! from the same data.

use serde::Serialize;

use crate::coupling::TrajectoryRow;
use crate::criterion::UniquenessCertificate;
use crate::oracle::DecayReport;
use crate::spin::MembershipReport;

/// Header printed at the top of every report: the command, the spec file,
/// and the tolerances in force.
#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub command: String,
    pub spec: String,
    pub tol_exact: f64,
    pub tol_slack: f64,
    pub cap: usize,
}

impl ReportHeader {
    fn render(&self) -> String {
        format!(
            "# gibbscert {}\n# spec: {}\n# tolerances: exact={:e}, slack={:e}; state cap: {}\n",
            self.command, self.spec, self.tol_exact, self.tol_slack, self.cap
        )
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    header: &'a ReportHeader,
    result: &'a T,
}

/// JSON form shared by all subcommands: the header plus the typed result.
pub fn render_json<T: Serialize>(header: &ReportHeader, result: &T) -> String {
    let mut out = serde_json::to_string_pretty(&Envelope { header, result })
        .expect("report types serialize without error");
    out.push('\n');
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| x.to_string())
}

/// Text form of a uniqueness certificate.
pub fn render_certificate(header: &ReportHeader, cert: &UniquenessCertificate) -> String {
    let mut out = header.render();
    out.push_str(&format!("verdict: {}\n", cert.verdict));
    out.push_str(&format!("kappa_bar: {}\n", cert.kappa_bar));
    out.push_str(&format!("c_bar: {}\n", cert.c_bar));
    out.push_str(&format!("delta: {}\n", cert.delta));
    out.push_str(&format!("chi: {}\n", cert.chi));
    out.push_str(&format!("k: {}\n", cert.k));
    out.push_str(&format!("k_star: {}\n", opt(cert.k_star)));
    out.push_str(&format!("mu_h: {}\n", cert.mu_h));
    out.push_str(&format!("a: {}\n", opt(cert.a)));
    match cert.m {
        Some(m) => out.push_str(&format!(
            "m: [[{}, {}], [{}, {}]]\n",
            m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]
        )),
        None => out.push_str("m: n/a\n"),
    }
    out.push_str(&format!("spectral_radius: {}\n", opt(cert.r)));
    out.push_str(&format!("conservative_radius: {}\n", opt(cert.r_upper)));
    out.push_str(&format!("xi: {}\n", opt(cert.xi)));
    out.push_str(&format!("alpha: {}\n", opt(cert.alpha)));
    out.push_str(&format!("c_k: {}\n", opt(cert.c_k)));
    out
}

/// Text form of a membership report: one line per site, slacks first.
pub fn render_membership(header: &ReportHeader, report: &MembershipReport) -> String {
    let mut out = header.render();
    out.push_str(&format!("k: {}\n", report.k));
    out.push_str(&format!(
        "pair_enumeration: {}\n",
        if report.pair_enumeration {
            "all differing subsets"
        } else {
            "single-neighbor changes"
        }
    ));
    out.push_str(&format!("tolerance: {:e}\n", report.tolerance));
    out.push_str(&format!(
        "worst sensitivity slack: {}\n",
        report.worst_sensitivity_slack()
    ));
    out.push_str(&format!(
        "worst moment slack: {}\n",
        report.worst_moment_slack()
    ));
    out.push_str(&format!("pass: {}\n", report.pass));
    for site in &report.sites {
        out.push_str(&format!(
            "site {}: sensitivity_slack={}, moment_slack={}, max_conditional_h={}{}\n",
            site.site,
            site.sensitivity_slack,
            site.moment_slack,
            site.max_conditional_h,
            if site.vacuous { ", vacuous" } else { "" }
        ));
        if site.sensitivity_slack < -report.tolerance {
            if let Some(witness) = &site.sensitivity_witness {
                out.push_str(&format!("  sensitivity witness: {witness}\n"));
            }
        }
        if site.moment_slack < -report.tolerance {
            if let Some(witness) = &site.moment_witness {
                out.push_str(&format!("  moment witness: {witness}\n"));
            }
        }
    }
    out
}

/// CSV form of a sweep trajectory, with the header as comment lines. The
/// initial row has no applications, hence an empty slack field.
pub fn render_trajectory(header: &ReportHeader, rows: &[TrajectoryRow]) -> String {
    let mut out = header.render();
    out.push_str("sweep,gamma,lambda,transformed_norm,min_slack\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.sweep,
            row.gamma,
            row.lambda,
            row.transformed,
            row.min_slack.map_or_else(String::new, |s| s.to_string())
        ));
    }
    out
}

/// Text form of a covariance-decay report.
pub fn render_decay(header: &ReportHeader, report: &DecayReport) -> String {
    let mut out = header.render();
    out.push_str(&format!("sites: {} and {}\n", report.site_f, report.site_g));
    out.push_str(&format!("distance: {}\n", report.distance));
    out.push_str(&format!("exact covariance: {}\n", report.covariance));
    out.push_str(&format!("bound: {}\n", report.bound));
    out.push_str(&format!("bound holds: {}\n", report.bound_holds));
    out.push_str(&format!("alpha: {}\n", report.alpha));
    out.push_str(&format!("c_k: {}\n", report.c_k));
    out.push_str(&format!("rate: {}\n", report.rate));
    out.push_str(&format!("xi: {}\n", report.xi));
    out.push_str(&format!("mu_h: {}\n", report.mu_h));
    out.push_str(&format!("f sup norm: {}\n", report.f_sup));
    out.push_str(&format!("g sup norm: {}\n", report.g_sup));
    out.push_str(&format!(
        "covariance reconstruction residual: {}\n",
        report.reconstruction_residual
    ));
    out.push_str(&format!("phi drift (worst): {}\n", report.phi_drift_worst));
    out.push_str(&format!("phi slack (worst): {}\n", report.phi_slack_worst));
    out.push_str(&format!(
        "domination slack (worst): {}\n",
        opt(report.domination_slack_worst)
    ));
    out.push_str(&format!("conditionings: {}\n", report.conditionings.len()));
    for c in &report.conditionings {
        let boundary = if c.boundary.is_empty() {
            "(none)"
        } else {
            &c.boundary
        };
        out.push_str(&format!(
            "  [{}] phi={}, phi_bound={}, phi_slack={}, domination_slack={}\n",
            boundary,
            c.phi,
            c.phi_bound,
            c.phi_slack,
            opt(c.domination_slack)
        ));
    }
    out
}
