use serde::{Deserialize, Serialize};

use crate::mesh::{Gate, Mesh, TechnologicalParameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    Imported,
}

/// A part with its gates, process settings and (when known) the reference
/// fill-time and deflection fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSample<T> {
    pub name: String,
    pub mesh: Mesh<T>,
    pub gates: Vec<Gate>,
    pub parameters: TechnologicalParameters,
    pub fill_time: Option<Vec<T>>,
    pub deflection: Option<Vec<T>>,
    pub provenance: Provenance,
}

impl<T> SimulationSample<T> {
    pub fn has_truth(&self) -> bool {
        self.fill_time.is_some() && self.deflection.is_some()
    }
}

/// Splits one seed into independent per-item streams (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
