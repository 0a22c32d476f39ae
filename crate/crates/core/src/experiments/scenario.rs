use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AltitudeGrid, DensityModel, ExtinctionProfile, ForwardModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub z_min: f64,
    pub z_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<AltitudeGrid> {
        AltitudeGrid::uniform(self.z_min, self.z_max, self.n)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            z_min: 119.0,
            z_max: 15000.0,
            n: 2000,
        }
    }
}

/// `amplitude · exp(−((z − center) / width)² / 2)`, in m⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLayer {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl GaussianLayer {
    pub fn evaluate(&self, z: f64) -> f64 {
        let u = (z - self.center) / self.width;
        self.amplitude * (-0.5 * u * u).exp()
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::Config(format!(
                "layer amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if !(self.width > 0.0) || !self.width.is_finite() || !self.center.is_finite() {
            return Err(Error::Config(format!(
                "layer width must be positive, got {}",
                self.width
            )));
        }
        Ok(())
    }
}

/// `amplitude · exp(−z / scale_height)`, in m⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLayer {
    pub amplitude: f64,
    pub scale_height: f64,
}

/// Parametric truth profile plus the instrument constants that turn it into a signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenario {
    pub grid: GridSpec,
    pub boundary_layer: BoundaryLayer,
    /// Up to three aerosol layers.
    pub layers: Vec<GaussianLayer>,
    /// Extra structure in the upper range.
    pub high_structure: Option<GaussianLayer>,
    pub density: DensityModel,
    /// Explicit `C_μ`; when absent it is calibrated from `median_counts`.
    pub c_mu: Option<f64>,
    /// Median noise-free count over the grid at multiplier 1.
    pub median_counts: f64,
}

pub const MAX_LAYERS: usize = 3;

impl Default for SyntheticScenario {
    fn default() -> Self {
        Self::simulation_1(GridSpec::default().n)
    }
}

impl SyntheticScenario {
    /// Boundary-layer decay with two elevated aerosol layers below 5 km and
    /// near-zero extinction above.
    pub fn simulation_1(n: usize) -> Self {
        Self {
            grid: GridSpec {
                n,
                ..GridSpec::default()
            },
            boundary_layer: BoundaryLayer {
                amplitude: 2e-4,
                scale_height: 1200.0,
            },
            layers: vec![
                GaussianLayer {
                    center: 2500.0,
                    width: 300.0,
                    amplitude: 1e-4,
                },
                GaussianLayer {
                    center: 4000.0,
                    width: 400.0,
                    amplitude: 6e-5,
                },
            ],
            high_structure: None,
            density: DensityModel::default(),
            c_mu: None,
            median_counts: 100.0,
        }
    }

    /// [`Self::simulation_1`] with an extra layer at 10 km.
    pub fn simulation_2(n: usize) -> Self {
        Self {
            high_structure: Some(GaussianLayer {
                center: 10000.0,
                width: 500.0,
                amplitude: 5e-5,
            }),
            ..Self::simulation_1(n)
        }
    }

    fn validate(&self) -> Result<()> {
        let bl = &self.boundary_layer;
        if !(bl.amplitude >= 0.0) || !bl.amplitude.is_finite() {
            return Err(Error::Config(format!(
                "boundary-layer amplitude must be non-negative, got {}",
                bl.amplitude
            )));
        }
        if !(bl.scale_height > 0.0) {
            return Err(Error::Config(format!(
                "boundary-layer scale height must be positive, got {}",
                bl.scale_height
            )));
        }
        if self.layers.len() > MAX_LAYERS {
            return Err(Error::Config(format!(
                "at most {MAX_LAYERS} aerosol layers are supported, got {}",
                self.layers.len()
            )));
        }
        for layer in self.layers.iter().chain(&self.high_structure) {
            layer.validate()?;
        }
        if !(self.median_counts > 0.0) {
            return Err(Error::Config("median_counts must be positive".into()));
        }
        Ok(())
    }

    /// Extinction at altitude `z`.
    pub fn extinction_at(&self, z: f64) -> f64 {
        let bl = &self.boundary_layer;
        let mut value = bl.amplitude * (-z / bl.scale_height).exp();
        for layer in self.layers.iter().chain(&self.high_structure) {
            value += layer.evaluate(z);
        }
        value
    }

    /// Truth profile and forward model on the scenario grid.
    pub fn build(&self) -> Result<(ExtinctionProfile, ForwardModel)> {
        self.validate()?;
        let grid = self.grid.build()?;
        let truth =
            ExtinctionProfile::new(grid.heights().iter().map(|&z| self.extinction_at(z)).collect())?;
        self.model_for(grid, truth)
    }

    /// Uses a given truth profile (e.g. read from CSV) in place of the
    /// parametric shape; `C_μ`, density and calibration still come from `self`.
    pub fn with_truth(&self, heights: Vec<f64>, values: Vec<f64>) -> Result<(ExtinctionProfile, ForwardModel)> {
        if !(self.median_counts > 0.0) {
            return Err(Error::Config("median_counts must be positive".into()));
        }
        let grid = AltitudeGrid::from_heights(heights)?;
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                context: "truth profile",
                expected: grid.len(),
                found: values.len(),
            });
        }
        self.model_for(grid, ExtinctionProfile::new(values)?)
    }

    fn model_for(&self, grid: AltitudeGrid, truth: ExtinctionProfile) -> Result<(ExtinctionProfile, ForwardModel)> {
        let c_mu = match self.c_mu {
            Some(c) => c,
            None => {
                let unit = ForwardModel::with_density(grid.clone(), 1.0, &self.density)?;
                let mut counts = unit.expected_counts(&truth)?;
                counts.sort_by(f64::total_cmp);
                self.median_counts / median_of_sorted(&counts)
            }
        };
        let model = ForwardModel::with_density(grid, c_mu, &self.density)?;
        Ok((truth, model))
    }
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Truth profile and forward model for `spec`.
pub fn make_scenario(spec: &SyntheticScenario) -> Result<(ExtinctionProfile, ForwardModel)> {
    spec.build()
}

/// Qualitative signal-strength levels, each a `C_μ` multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrRegime {
    Low,
    Medium,
    High,
}

impl SnrRegime {
    pub const ALL: [SnrRegime; 3] = [SnrRegime::High, SnrRegime::Medium, SnrRegime::Low];

    pub fn multiplier(self) -> f64 {
        match self {
            SnrRegime::Low => 1.0,
            SnrRegime::Medium => 10.0,
            SnrRegime::High => 100.0,
        }
    }
}

/// Model with `C_μ` (and hence `d`) multiplied by `multiplier`.
pub fn set_snr_regime(model: &ForwardModel, multiplier: f64) -> Result<ForwardModel> {
    model.with_c_mu_scaled(multiplier)
}
