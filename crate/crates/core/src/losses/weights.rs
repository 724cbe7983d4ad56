use crate::error::{Error, Result};

/// Internal weights of the four reconstruction summands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconWeights {
    pub sdf: f64,
    pub normal: f64,
    pub eikonal: f64,
    pub off_surface: f64,
}

impl Default for ReconWeights {
    fn default() -> Self {
        Self {
            sdf: 3e3,
            normal: 1e2,
            eikonal: 5e1,
            off_surface: 1e2,
        }
    }
}

impl ReconWeights {
    /// Plain sum of the four summands.
    pub fn unit() -> Self {
        Self {
            sdf: 1.0,
            normal: 1.0,
            eikonal: 1.0,
            off_surface: 1.0,
        }
    }
}

/// Which points enter the consistency and scale terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConsistencyPoints {
    /// Surface samples only.
    #[default]
    Surface,
    /// Surface and query samples.
    All,
}

impl std::str::FromStr for ConsistencyPoints {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surface" => Ok(Self::Surface),
            "all" => Ok(Self::All),
            _ => Err(Error::config(format!("unknown consistency point set {s:?} (surface|all)"))),
        }
    }
}

impl std::fmt::Display for ConsistencyPoints {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Surface => "surface",
            Self::All => "all",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub pdc_geo: f64,
    pub pdc_sem: f64,
    pub scale: f64,
    pub geo: f64,
    pub smooth: f64,
    pub normal: f64,
    pub correction: f64,
    pub emb: f64,
    /// Sharpness of the off-surface penalty.
    pub delta: f64,
    /// Modulation of the correspondence uncertainty.
    pub uncertainty_gamma: f64,
    pub recon: ReconWeights,
    pub consistency_points: ConsistencyPoints,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            pdc_geo: 250.0,
            pdc_sem: 50.0,
            scale: 500.0,
            geo: 50.0,
            smooth: 1.0,
            normal: 100.0,
            correction: 500.0,
            emb: 1e6,
            delta: 100.0,
            uncertainty_gamma: 10.0,
            recon: ReconWeights::default(),
            consistency_points: ConsistencyPoints::Surface,
        }
    }
}

impl LossWeights {
    /// Reconstruction only.
    pub fn recon_only() -> Self {
        Self {
            pdc_geo: 0.0,
            pdc_sem: 0.0,
            scale: 0.0,
            geo: 0.0,
            smooth: 0.0,
            normal: 0.0,
            correction: 0.0,
            emb: 0.0,
            ..Self::default()
        }
    }

    pub fn any_consistency(&self) -> bool {
        self.pdc_geo > 0.0 || self.pdc_sem > 0.0 || self.scale > 0.0 || self.geo > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("gamma1", self.pdc_geo),
            ("gamma2", self.pdc_sem),
            ("gamma3", self.scale),
            ("gamma4", self.geo),
            ("gamma5", self.smooth),
            ("gamma6", self.normal),
            ("gamma7", self.correction),
            ("gamma8", self.emb),
            ("delta", self.delta),
            ("uncertainty_gamma", self.uncertainty_gamma),
            ("recon_sdf", self.recon.sdf),
            ("recon_normal", self.recon.normal),
            ("recon_eikonal", self.recon.eikonal),
            ("recon_off", self.recon.off_surface),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be a finite nonnegative number, got {v}")));
            }
        }
        Ok(())
    }
}
