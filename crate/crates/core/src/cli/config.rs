//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 1
//!
//! [manifold]
//! spec = "n=2 d=1; h1 = u1^2 + v1^2"
//! growth_c = 2.0
//! growth_n = 1
//!
//! [compact]
//! lo = [0.0, 0.0, 0.0]
//! hi = [1.0, 1.0, 1.0]
//! safety = 10.0
//!
//! [experiment]
//! functions = ["1", "zeta1"]
//! schedule = [0.4, 0.2, 0.1, 0.05]
//! ```

use serde::{Deserialize, Serialize};

use crate::graph_model::{build_compact_spec, parse_graph_spec, BoxK, CompactSpec, GrowthBound, ModelGraph, SpecError};
use crate::quadrature::{QuadConfig, TestFunction};
use crate::verify::SuiteOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required; there is no entropy fallback.
    pub seed: Option<u64>,
    pub manifold: ManifoldConfig,
    #[serde(default)]
    pub compact: Option<CompactConfig>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub quadrature: QuadConfig,
    #[serde(default)]
    pub suite: SuiteOptions,
    #[serde(default)]
    pub approx: ApproxConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub spec: String,
    pub growth_c: f64,
    pub growth_n: u32,
    /// Samples per dilation level for the growth certificate.
    #[serde(default = "default_growth_samples")]
    pub growth_samples: usize,
}

fn default_growth_samples() -> usize {
    2000
}

/// `B_K` in packed `(x, u, v)`; defaults to the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_safety() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub functions: Vec<String>,
    pub schedule: Vec<f64>,
    /// Grid points per axis of `B_K`.
    pub grid_points: usize,
    /// Final F-error must be at most `final_rel·(1 + sup|f|)`.
    pub final_rel: f64,
    /// Allowed growth of `gap/ε` over its value at the largest `ε`.
    pub ratio_slack: f64,
    /// Also run the gap experiment with `R = max(|x|+|u|) + 1`.
    pub control: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            functions: ["1", "zeta1", "eta1", "zeta1^2", "zeta1*eta1"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            schedule: vec![0.4, 0.2, 0.1, 0.05],
            grid_points: 5,
            final_rel: 1e-2,
            ratio_slack: 1.1,
            control: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub budget: usize,
    pub audit_samples: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            budget: 96,
            audit_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxConfig {
    /// `ε` for `approx`; the last schedule entry when absent.
    pub eps: Option<f64>,
    /// CSV of packed `(x, u, v)` rows.
    pub points: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

/// Parsed and cross-checked pieces of a config.
pub struct Resolved {
    pub seed: u64,
    pub graph: ModelGraph,
    pub growth: GrowthBound,
    pub k: CompactSpec,
    pub fns: Vec<TestFunction>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// Parses every DSL string and builds `K`; errors carry the offending
    /// field.
    pub fn resolve(&self) -> Result<Resolved, String> {
        let seed = self.seed.ok_or("config: missing seed")?;
        let graph = parse_graph_spec(&self.manifold.spec).map_err(|e| format!("manifold.spec: {e}"))?;
        let dim = graph.d() + 2 * graph.m();
        let (bx, safety) = match &self.compact {
            Some(c) => (
                BoxK::new(c.lo.clone(), c.hi.clone()).map_err(|e| format!("compact: {e}"))?,
                c.safety,
            ),
            None => (BoxK::unit(dim), default_safety()),
        };
        let k = build_compact_spec(&graph, &bx, safety).map_err(|e: SpecError| format!("compact: {e}"))?;
        let fns = self
            .experiment
            .functions
            .iter()
            .enumerate()
            .map(|(i, s)| {
                TestFunction::parse(s, graph.d(), graph.m())
                    .map_err(|e| format!("experiment.functions[{i}]: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !(self.manifold.growth_c > 0.0) {
            return Err("manifold.growth_c must be positive".into());
        }
        self.quadrature.validate().map_err(|e| format!("quadrature: {e}"))?;
        let s = &self.experiment.schedule;
        if s.is_empty() || s.iter().any(|&e| !(e > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(format!(
                "experiment.schedule must be nonempty, positive and strictly decreasing: {s:?}"
            ));
        }
        if self.experiment.grid_points == 0 {
            return Err("experiment.grid_points must be at least 1".into());
        }
        Ok(Resolved {
            seed,
            growth: GrowthBound {
                c: self.manifold.growth_c,
                n: self.manifold.growth_n,
            },
            graph,
            k,
            fns,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RIGID: &str = r#"
seed = 1
[manifold]
spec = "n=2 d=1; h1 = u1^2 + v1^2"
growth_c = 2.0
growth_n = 1
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_toml(RIGID).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.seed, 1);
        assert_eq!(r.k.bx, BoxK::unit(3));
        assert_eq!(r.fns.len(), 5);
        assert_eq!(c.experiment.schedule, vec![0.4, 0.2, 0.1, 0.05]);
    }

    #[test]
    fn missing_seed_is_an_error() {
        let c = RunConfig::from_toml(&RIGID.replace("seed = 1", "")).unwrap();
        assert_eq!(c.resolve().err().unwrap(), "config: missing seed");
    }

    #[test]
    fn positioned_diagnostics() {
        let c = RunConfig::from_toml(&RIGID.replace("u1^2 + v1^2", "x1^2")).unwrap();
        assert_eq!(
            c.resolve().err().unwrap(),
            "manifold.spec: decoupling violation: h1 uses x1"
        );
        assert!(RunConfig::from_toml(&format!("{RIGID}\nbogus = 3")).is_err());
        let c = RunConfig::from_toml(&format!("{RIGID}\n[experiment]\nschedule = [0.1, 0.2]")).unwrap();
        assert!(c.resolve().err().unwrap().starts_with("experiment.schedule"));
    }
}
