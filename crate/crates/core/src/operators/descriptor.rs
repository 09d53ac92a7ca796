use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    finite_difference_2d, gaussian_measurement, partial_fourier_system, radial_fourier_system,
    random_tight_frame_operator, AnalysisOperator, MeasurementSystem,
};
use crate::error::{invalid, Result};
use crate::io::read_matrix_text;

/// JSON description of an analysis operator.
///
/// ```json
/// {"kind": "dif2d", "n": 64}
/// {"kind": "tight_frame", "p": 240, "d": 200, "seed": 7}
/// {"kind": "dense", "path": "omega.txt"}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorDescriptor {
    Dif2d { n: usize },
    TightFrame { p: usize, d: usize, seed: u64 },
    Dense { path: PathBuf },
}

impl OperatorDescriptor {
    /// Builds the operator; relative paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<AnalysisOperator> {
        match self {
            Self::Dif2d { n } => finite_difference_2d(*n),
            Self::TightFrame { p, d, seed } => random_tight_frame_operator(*p, *d, *seed),
            Self::Dense { path } => AnalysisOperator::from_dense(read_matrix_text(&base.join(path))?),
        }
    }
}

/// JSON description of a measurement system.
///
/// ```json
/// {"kind": "gaussian", "m": 100, "d": 200, "seed": 3}
/// {"kind": "radial_fourier", "n": 256, "lines": 12, "frequencies": [[0, 0], [0, 1]]}
/// {"kind": "dense", "path": "m.txt"}
/// ```
///
/// For `radial_fourier`, an explicit `frequencies` list takes precedence over
/// the line rasterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementDescriptor {
    Gaussian {
        m: usize,
        d: usize,
        seed: u64,
    },
    RadialFourier {
        n: usize,
        lines: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequencies: Option<Vec<[usize; 2]>>,
    },
    Dense {
        path: PathBuf,
    },
}

impl MeasurementDescriptor {
    pub fn build(&self, base: &Path) -> Result<MeasurementSystem> {
        match self {
            Self::Gaussian { m, d, seed } => gaussian_measurement(*m, *d, *seed),
            Self::RadialFourier {
                n,
                lines,
                frequencies,
            } => match frequencies {
                Some(f) => {
                    if f.is_empty() {
                        return Err(invalid("radial_fourier descriptor has an empty frequency list"));
                    }
                    partial_fourier_system(*n, f)
                }
                None => radial_fourier_system(*n, *lines),
            },
            Self::Dense { path } => MeasurementSystem::from_dense(read_matrix_text(&base.join(path))?),
        }
    }

    /// Descriptor of a radial system with its frequency list spelled out.
    pub fn radial_with_frequencies(n: usize, lines: usize) -> Result<Self> {
        let sys = radial_fourier_system(n, lines)?;
        let f = sys.radial().expect("radial system").frequencies().to_vec();
        Ok(Self::RadialFourier {
            n,
            lines,
            frequencies: Some(f),
        })
    }
}
