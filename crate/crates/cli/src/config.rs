//! JSON run configuration.

use std::path::Path;

use pcosim::montecarlo::{seeded_phases, Budget, SweepSpec};
use pcosim::{EngineSettings, NetworkTopology, PhaseMap, PhaseMapSpec, Tolerances};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case")]
pub enum TopologySpec {
    AllToAll { n: usize },
    /// `matrix[i][j]` is the strength from `i` to `j`.
    Matrix { matrix: Vec<Vec<f64>> },
    Uncoupled { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPhases {
    Explicit(Vec<f64>),
    Identical(f64),
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub phase_map: PhaseMapSpec,
    #[serde(flatten)]
    pub topology: TopologySpec,
    pub tau: f64,
    #[serde(default)]
    pub eps: f64,
    pub initial_phases: InitialPhases,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub engine: EngineSettings,
    /// Sample count for `estimate`.
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Master seed for `estimate`.
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> u64 {
    1000
}

impl RunConfig {
    pub fn n(&self) -> usize {
        match &self.topology {
            TopologySpec::AllToAll { n } | TopologySpec::Uncoupled { n } => *n,
            TopologySpec::Matrix { matrix } => matrix.len(),
        }
    }

    pub fn phase_map(&self) -> Result<PhaseMap, String> {
        self.phase_map.build().map_err(|e| format!("phase_map: {e}"))
    }

    pub fn topology(&self) -> Result<NetworkTopology, String> {
        let t = match &self.topology {
            TopologySpec::AllToAll { n } => NetworkTopology::all_to_all(*n, self.tau, self.eps),
            TopologySpec::Matrix { matrix } => NetworkTopology::custom(matrix.clone(), self.tau, self.eps),
            TopologySpec::Uncoupled { n } => {
                if self.eps != 0.0 {
                    return Err(format!("eps: uncoupled topology needs eps = 0, got {}", self.eps));
                }
                NetworkTopology::uncoupled(*n, self.tau)
            }
        };
        t.map_err(|e| format!("topology: {e}"))
    }

    pub fn phases(&self) -> Result<Vec<f64>, String> {
        let n = self.n();
        let phases = match &self.initial_phases {
            InitialPhases::Explicit(v) => {
                if v.len() != n {
                    return Err(format!("initial_phases: {} values for {n} oscillators", v.len()));
                }
                v.clone()
            }
            InitialPhases::Identical(p) => vec![*p; n],
            InitialPhases::Random(seed) => seeded_phases(n, *seed),
        };
        if let Some(p) = phases.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(format!("initial_phases: {p} outside (0, 1]"));
        }
        Ok(phases)
    }

    /// `--seed` replaces the random-phase seed and the estimation seed.
    pub fn apply_seed(&mut self, seed: u64) {
        if let InitialPhases::Random(s) = &mut self.initial_phases {
            *s = seed;
        }
        self.seed = seed;
    }
}

/// Reads and parses a JSON file, reporting line and column on syntax or field errors.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec, String> {
    let spec: SweepSpec = load(path)?;
    spec.validate().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_all_to_all() {
        let c: RunConfig = serde_json::from_str(
            r#"{"topology":"all_to_all","n":4,"tau":0.9,"eps":0.6,
                "initial_phases":{"explicit":[0.1766,0.4298,0.4079,0.7061]},
                "phase_map":{"kind":"lif","I":1.05}}"#,
        )
        .unwrap();
        assert_eq!(c.n(), 4);
        assert_eq!(c.topology().unwrap().n(), 4);
        assert_eq!(c.budget, Budget::default());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn phase_modes() {
        let c: RunConfig = serde_json::from_str(
            r#"{"topology":"matrix","matrix":[[0,0.3],[0.3,0]],"tau":0.5,"eps":0.3,"initial_phases":{"random":3}}"#,
        )
        .unwrap();
        let p = c.phases().unwrap();
        assert_eq!(p, c.phases().unwrap());
        assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
        let two = serde_json::from_str::<RunConfig>(
            r#"{"topology":"all_to_all","n":2,"tau":0.5,"eps":0.3,"initial_phases":{"random":3,"identical":0.5}}"#,
        );
        assert!(two.is_err());
    }

    #[test]
    fn uncoupled_requires_zero_eps() {
        let c: RunConfig = serde_json::from_str(
            r#"{"topology":"uncoupled","n":1,"tau":0.5,"eps":0.2,"initial_phases":{"identical":0.3}}"#,
        )
        .unwrap();
        assert!(c.topology().is_err());
    }
}
