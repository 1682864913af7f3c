//! Model specification files.
//!
//! A spec is a TOML document with four blocks: the graph (edge list), the
//! spin layer (alphabet, reference weights, h), the pair interactions
//! (a default table plus per-edge overrides), and the criterion data
//! (κ and c weights, the cutoff K, optional Δ/χ/μ(h) overrides). An
//! optional `[limits]` block adjusts tolerances and the state-space cap.
//! Parsing produces fully validated domain objects; every error names the
//! offending element.
//!
//! ```toml
//! [graph]
//! edges = [["v1", "v2"], ["v2", "v3"]]
//!
//! [spins]
//! alphabet = ["-1", "+1"]
//! ref_weights = [1.0, 1.0]   # optional, default uniform
//! h = [1.0, 1.0]             # optional, default all ones
//!
//! [interaction]
//! default = [[0.1, -0.1], [-0.1, 0.1]]
//!
//! [[interaction.edge]]       # optional overrides
//! between = ["v1", "v2"]
//! table = [[0.2, -0.2], [-0.2, 0.2]]
//!
//! [criterion]
//! kappa = 0.1                # scalar, or per-edge entry list
//! c = 0.1
//! k = 600.0
//!
//! [limits]                   # optional
//! cap = 4194304
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use crate::criterion::{ContractionParams, EdgeWeights};
use crate::error::SpecError;
use crate::graph::{build_graph, greedy_color, max_degree, ColorPartition, Graph};
use crate::spin::FiniteSpinModel;
use crate::{STATE_CAP, TOL_EXACT, TOL_SLACK};

/// A parsed and validated model specification.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub graph: Graph,
    pub model: FiniteSpinModel,
    pub params: ContractionParams,
    /// Greedy chromatic partition of the graph, fixed at load time.
    pub partition: ColorPartition,
    /// Cutoff K.
    pub k: f64,
    /// Optional substitute for the measured h-moment in the prefactor.
    pub mu_h_override: Option<f64>,
    /// Tolerance for exact identities.
    pub tol_exact: f64,
    /// Tolerance for inequality slacks.
    pub tol_slack: f64,
    /// Cap on doubled-space table sizes.
    pub cap: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    graph: RawGraph,
    spins: RawSpins,
    interaction: Option<RawInteraction>,
    criterion: RawCriterion,
    limits: Option<RawLimits>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    edges: Vec<[String; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpins {
    alphabet: Vec<String>,
    ref_weights: Option<Vec<f64>>,
    h: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInteraction {
    default: Option<Vec<Vec<f64>>>,
    edge: Option<Vec<RawEdgeTable>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdgeTable {
    between: [String; 2],
    table: Vec<Vec<f64>>,
}

/// Either a uniform weight for every directed edge or explicit per-edge
/// entries (applied symmetrically).
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawWeights {
    Uniform(f64),
    PerEdge(Vec<RawEdgeWeight>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdgeWeight {
    between: [String; 2],
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCriterion {
    kappa: RawWeights,
    c: RawWeights,
    k: f64,
    delta: Option<usize>,
    chi: Option<usize>,
    mu_h: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    tol_exact: Option<f64>,
    tol_slack: Option<f64>,
    cap: Option<usize>,
}

fn invalid(msg: String) -> SpecError {
    SpecError::Invalid(msg)
}

fn resolve_weights(raw: RawWeights, g: &Graph, field: &str) -> Result<EdgeWeights, SpecError> {
    match raw {
        RawWeights::Uniform(v) => Ok(EdgeWeights::Uniform(v)),
        RawWeights::PerEdge(entries) => {
            let mut map = std::collections::BTreeMap::new();
            for entry in entries {
                let [a, b] = &entry.between;
                let i = g.index_of(a).map_err(|_| {
                    invalid(format!(
                        "[criterion] {field} entry names unknown vertex '{a}'"
                    ))
                })?;
                let j = g.index_of(b).map_err(|_| {
                    invalid(format!(
                        "[criterion] {field} entry names unknown vertex '{b}'"
                    ))
                })?;
                if !g.has_edge(i, j) {
                    return Err(invalid(format!(
                        "[criterion] {field} entry refers to non-edge ('{a}', '{b}')"
                    )));
                }
                for key in [(i, j), (j, i)] {
                    if map.insert(key, entry.value).is_some() {
                        return Err(invalid(format!(
                            "[criterion] {field} lists edge ('{a}', '{b}') twice"
                        )));
                    }
                }
            }
            // Edges without an entry default to weight zero, which get()
            // already returns; make the omission explicit instead.
            for (i, j) in g.edges() {
                if !map.contains_key(&(i, j)) {
                    return Err(invalid(format!(
                        "[criterion] {field} is missing edge ('{}', '{}')",
                        g.id_of(i),
                        g.id_of(j)
                    )));
                }
            }
            Ok(EdgeWeights::PerEdge(map))
        }
    }
}

impl ModelSpec {
    /// Reads and validates a spec file.
    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses and validates a spec document.
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;

        let edge_refs: Vec<(&str, &str)> = raw
            .graph
            .edges
            .iter()
            .map(|[a, b]| (a.as_str(), b.as_str()))
            .collect();
        let graph = build_graph(&edge_refs)?;

        let m = raw.spins.alphabet.len();
        let ref_weights = raw.spins.ref_weights.unwrap_or_else(|| vec![1.0; m]);
        let h = raw.spins.h.unwrap_or_else(|| vec![1.0; m]);
        let mut model = FiniteSpinModel::new(raw.spins.alphabet, ref_weights, h)?;

        if let Some(interaction) = raw.interaction {
            let mut covered = BTreeSet::new();
            for entry in interaction.edge.unwrap_or_default() {
                let [a, b] = &entry.between;
                model.add_potential(&graph, a, b, &entry.table)?;
                let i = graph.index_of(a)?;
                let j = graph.index_of(b)?;
                covered.insert((i.min(j), i.max(j)));
            }
            if let Some(default) = interaction.default {
                for (i, j) in graph.edges() {
                    if !covered.contains(&(i, j)) {
                        model.add_potential(&graph, graph.id_of(i), graph.id_of(j), &default)?;
                    }
                }
            }
        }

        let observed = max_degree(&graph);
        let delta = raw.criterion.delta.unwrap_or_else(|| observed.max(2));
        if delta < observed {
            return Err(invalid(format!(
                "[criterion] delta = {delta} is below the observed maximum degree {observed}"
            )));
        }
        if delta < 2 {
            return Err(invalid(format!(
                "[criterion] delta = {delta}; the criterion needs delta >= 2"
            )));
        }

        let partition = greedy_color(&graph);
        let chi = raw
            .criterion
            .chi
            .unwrap_or_else(|| partition.class_count().max(2));
        if chi < partition.class_count() {
            return Err(invalid(format!(
                "[criterion] chi = {chi} is below the {} classes the greedy coloring uses",
                partition.class_count()
            )));
        }
        if chi < 2 || chi > delta + 1 {
            return Err(invalid(format!(
                "[criterion] chi = {chi} must lie between 2 and delta + 1 = {}",
                delta + 1
            )));
        }

        let kappa = resolve_weights(raw.criterion.kappa, &graph, "kappa")?;
        let c = resolve_weights(raw.criterion.c, &graph, "c")?;
        let params = ContractionParams::new(kappa, c, delta, chi)?;

        let k = raw.criterion.k;
        if !k.is_finite() || k <= 0.0 {
            return Err(invalid(format!(
                "[criterion] k = {k}; the cutoff must be positive and finite"
            )));
        }
        if let Some(mu_h) = raw.criterion.mu_h {
            if !mu_h.is_finite() || mu_h < 0.0 {
                return Err(invalid(format!(
                    "[criterion] mu_h = {mu_h} must be finite and nonnegative"
                )));
            }
        }

        let limits = raw.limits.unwrap_or(RawLimits {
            tol_exact: None,
            tol_slack: None,
            cap: None,
        });
        let tol_exact = limits.tol_exact.unwrap_or(TOL_EXACT);
        let tol_slack = limits.tol_slack.unwrap_or(TOL_SLACK);
        for (name, value) in [("tol_exact", tol_exact), ("tol_slack", tol_slack)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(invalid(format!(
                    "[limits] {name} = {value} must be positive and finite"
                )));
            }
        }
        let cap = limits.cap.unwrap_or(STATE_CAP);
        if cap == 0 {
            return Err(invalid("[limits] cap must be positive".to_owned()));
        }

        Ok(ModelSpec {
            graph,
            model,
            params,
            partition,
            k,
            mu_h_override: raw.criterion.mu_h,
            tol_exact,
            tol_slack,
            cap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const WORKED: &str = r#"
        [graph]
        edges = [["v1","v2"], ["v2","v3"], ["v3","v4"], ["v4","v5"], ["v5","v6"]]

        [spins]
        alphabet = ["-1", "+1"]

        [interaction]
        default = [[0.1, -0.1], [-0.1, 0.1]]

        [criterion]
        kappa = 0.1
        c = 0.1
        k = 600.0
    "#;

    #[test]
    fn worked_spec_parses_with_defaults() {
        let spec = ModelSpec::parse(WORKED).unwrap();
        assert_eq!(spec.graph.vertex_count(), 6);
        assert_eq!(spec.model.symbol_count(), 2);
        assert_relative_eq!(spec.model.ref_weights()[0], 0.5);
        assert_eq!(spec.model.h_values(), &[1.0, 1.0]);
        assert_eq!(spec.params.delta, 2);
        assert_eq!(spec.params.chi, 2);
        assert_eq!(spec.k, 600.0);
        assert_eq!(spec.tol_exact, TOL_EXACT);
        assert_eq!(spec.tol_slack, TOL_SLACK);
        assert_eq!(spec.cap, STATE_CAP);
        assert_relative_eq!(spec.model.pair_energy(0, 1, 1, 1), 0.1);
        assert_relative_eq!(spec.model.pair_energy(0, 1, 0, 1), -0.1);
    }

    #[test]
    fn per_edge_weights_apply_symmetrically() {
        let text = r#"
            [graph]
            edges = [["a","b"], ["b","c"]]
            [spins]
            alphabet = ["0", "1"]
            [criterion]
            kappa = [
                { between = ["a","b"], value = 0.05 },
                { between = ["b","c"], value = 0.15 },
            ]
            c = 0.1
            k = 500.0
        "#;
        let spec = ModelSpec::parse(text).unwrap();
        let i = spec.graph.index_of("a").unwrap();
        let j = spec.graph.index_of("b").unwrap();
        assert_eq!(spec.params.kappa.get(i, j), 0.05);
        assert_eq!(spec.params.kappa.get(j, i), 0.05);
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ModelSpec::parse("[graph\nedges = []").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "no location in: {msg}");
    }

    #[test]
    fn unknown_vertices_and_non_edges_are_named() {
        let text = r#"
            [graph]
            edges = [["a","b"]]
            [spins]
            alphabet = ["0", "1"]
            [criterion]
            kappa = [ { between = ["a","z"], value = 0.1 } ]
            c = 0.1
            k = 10.0
        "#;
        let msg = ModelSpec::parse(text).unwrap_err().to_string();
        assert!(msg.contains("'z'"), "wrong message: {msg}");

        let text = r#"
            [graph]
            edges = [["a","b"], ["b","c"]]
            [spins]
            alphabet = ["0", "1"]
            [criterion]
            kappa = [
                { between = ["a","b"], value = 0.1 },
                { between = ["b","c"], value = 0.1 },
                { between = ["a","c"], value = 0.1 },
            ]
            c = 0.1
            k = 10.0
        "#;
        let msg = ModelSpec::parse(text).unwrap_err().to_string();
        assert!(msg.contains("non-edge"), "wrong message: {msg}");
    }

    #[test]
    fn partial_per_edge_weights_are_rejected() {
        let text = r#"
            [graph]
            edges = [["a","b"], ["b","c"]]
            [spins]
            alphabet = ["0", "1"]
            [criterion]
            kappa = [ { between = ["a","b"], value = 0.1 } ]
            c = 0.1
            k = 10.0
        "#;
        let msg = ModelSpec::parse(text).unwrap_err().to_string();
        assert!(msg.contains("missing edge"), "wrong message: {msg}");
    }

    #[test]
    fn chi_below_the_coloring_is_rejected() {
        let text = r#"
            [graph]
            edges = [["a","b"], ["b","c"], ["a","c"]]
            [spins]
            alphabet = ["0", "1"]
            [criterion]
            kappa = 0.1
            c = 0.05
            k = 10.0
            chi = 2
        "#;
        // A triangle needs three classes.
        let msg = ModelSpec::parse(text).unwrap_err().to_string();
        assert!(msg.contains("chi = 2"), "wrong message: {msg}");
    }

    #[test]
    fn delta_below_the_observed_degree_is_rejected() {
        let text = r#"
            [graph]
            edges = [["a","b"], ["b","c"], ["b","d"]]
            [spins]
            alphabet = ["0", "1"]
            [criterion]
            kappa = 0.1
            c = 0.05
            k = 10.0
            delta = 2
        "#;
        let msg = ModelSpec::parse(text).unwrap_err().to_string();
        assert!(msg.contains("delta = 2"), "wrong message: {msg}");
    }

    #[test]
    fn per_edge_interaction_overrides_the_default() {
        let text = r#"
            [graph]
            edges = [["a","b"], ["b","c"]]
            [spins]
            alphabet = ["0", "1"]
            [interaction]
            default = [[0.1, -0.1], [-0.1, 0.1]]
            [[interaction.edge]]
            between = ["b", "c"]
            table = [[0.3, 0.0], [0.0, 0.3]]
            [criterion]
            kappa = 0.3
            c = 0.1
            k = 700.0
        "#;
        let spec = ModelSpec::parse(text).unwrap();
        let a = spec.graph.index_of("a").unwrap();
        let b = spec.graph.index_of("b").unwrap();
        let c = spec.graph.index_of("c").unwrap();
        assert_relative_eq!(spec.model.pair_energy(a, b, 0, 0), 0.1);
        assert_relative_eq!(spec.model.pair_energy(b, c, 0, 0), 0.3);
        assert_relative_eq!(spec.model.pair_energy(b, c, 0, 1), 0.0);
    }

    #[test]
    fn nonpositive_cutoff_is_rejected() {
        let text = r#"
            [graph]
            edges = [["a","b"]]
            [spins]
            alphabet = ["0", "1"]
            [criterion]
            kappa = 0.1
            c = 0.1
            k = 0.0
        "#;
        let msg = ModelSpec::parse(text).unwrap_err().to_string();
        assert!(msg.contains("cutoff"), "wrong message: {msg}");
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let text = r#"
            [graph]
            edges = [["a","b"]]
            typo = 1
            [spins]
            alphabet = ["0", "1"]
            [criterion]
            kappa = 0.1
            c = 0.1
            k = 10.0
        "#;
        assert!(matches!(
            ModelSpec::parse(text).unwrap_err(),
            SpecError::Parse(_)
        ));
    }
}
