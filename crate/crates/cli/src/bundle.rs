//! Solution bundles written by `construct` and read by the other commands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qpe_core::gluing::{embedded_solution, EmbeddingSpec, GluedSolution, GluingConfig};
use qpe_core::FrequencyVector;
use serde::{Deserialize, Serialize};

use crate::output::Manifest;

pub const SOLUTION: &str = "solution.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateEntry {
    pub theta: Vec<f64>,
    pub t: f64,
    /// Velocity snapshot `U(θ + νt)`, relative to the bundle.
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub gluing: GluingConfig,
    /// `None` for a stationary bundle.
    pub embedding: Option<EmbeddingSpec>,
    pub resolution: usize,
    pub states: Vec<StateEntry>,
}

/// The embedding a config runs with. Without an explicit one every tube
/// coordinate gets its own angle and the tube speeds form the frequency;
/// if all speeds vanish there is none.
pub fn effective_embedding(g: &GluingConfig, given: Option<&EmbeddingSpec>) -> Result<Option<EmbeddingSpec>> {
    if let Some(e) = given {
        e.validate(g)?;
        return Ok(Some(e.clone()));
    }
    let flat: Vec<f64> = g.speeds.iter().flatten().copied().collect();
    if flat.iter().all(|&v| v == 0.0) {
        return Ok(None);
    }
    Ok(Some(EmbeddingSpec::identity(FrequencyVector::new(flat)?)))
}

impl SolutionDoc {
    pub fn frequency(&self) -> Vec<f64> {
        self.embedding.as_ref().map(|e| e.frequency.entries().to_vec()).unwrap_or_default()
    }

    /// `U(θ + ν·)` as a time-dependent solution.
    pub fn solution(&self, theta: &[f64]) -> Result<GluedSolution> {
        match &self.embedding {
            Some(e) => Ok(embedded_solution(theta, &self.gluing, e)?),
            None => {
                if !theta.is_empty() {
                    bail!("stationary bundle takes no angles, got {}", theta.len());
                }
                Ok(GluedSolution::new(self.gluing.clone())?)
            }
        }
    }
}

pub struct Bundle {
    pub dir: PathBuf,
    pub doc: SolutionDoc,
}

impl Bundle {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SOLUTION);
        let text = std::fs::read_to_string(&path).with_context(|| format!("no bundle at {}", dir.display()))?;
        let doc = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Self { dir: dir.to_path_buf(), doc })
    }

    pub fn manifest(&self) -> Result<Manifest> {
        Manifest::load(&self.dir)
    }

    pub fn state(&self, k: usize) -> Result<&StateEntry> {
        self.doc.states.get(k).with_context(|| format!("bundle has {} states, asked for {k}", self.doc.states.len()))
    }
}
