use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Building material with a frequency-dependent penetration loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub id: String,
    /// Loss of one full-thickness traversal at `ref_ghz`, dB.
    pub base_loss_db: f64,
    #[serde(default)]
    pub loss_slope_db_per_ghz: f64,
    #[serde(default)]
    pub notch_depth_db: f64,
    #[serde(default)]
    pub notch_period_ghz: f64,
    #[serde(default)]
    pub notch_width_ghz: f64,
    #[serde(default = "default_ref_ghz")]
    pub ref_ghz: f64,
    /// Blocks completely (terrain, metal).
    #[serde(default)]
    pub opaque: bool,
}

fn default_ref_ghz() -> f64 {
    28.0
}

impl Material {
    pub fn simple(id: impl Into<String>, base_loss_db: f64) -> Self {
        Material {
            id: id.into(),
            base_loss_db,
            loss_slope_db_per_ghz: 0.0,
            notch_depth_db: 0.0,
            notch_period_ghz: 0.0,
            notch_width_ghz: 0.0,
            ref_ghz: default_ref_ghz(),
            opaque: false,
        }
    }

    pub fn opaque(id: impl Into<String>) -> Self {
        Material {
            opaque: true,
            ..Self::simple(id, 0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("material `{}`.{f}", self.id);
        if !(self.base_loss_db >= 0.0) {
            return Err(Error::validation(field("base_loss_db"), "must be >= 0"));
        }
        if !(self.notch_depth_db >= 0.0) {
            return Err(Error::validation(field("notch_depth_db"), "must be >= 0"));
        }
        if self.notch_depth_db > 0.0
            && !(self.notch_period_ghz > self.notch_width_ghz && self.notch_width_ghz > 0.0)
        {
            return Err(Error::validation(
                field("notch_period_ghz"),
                "notch period must exceed notch width, and width must be > 0",
            ));
        }
        if !self.loss_slope_db_per_ghz.is_finite() || !(self.ref_ghz > 0.0) {
            return Err(Error::validation(field("loss_slope_db_per_ghz"), "must be finite"));
        }
        Ok(())
    }

    /// True if `f_ghz` lies inside a notch.
    pub fn in_notch(&self, f_ghz: f64) -> bool {
        if self.notch_depth_db <= 0.0 || self.notch_period_ghz <= 0.0 {
            return false;
        }
        let k = ((f_ghz - self.ref_ghz) / self.notch_period_ghz).round();
        let center = self.ref_ghz + k * self.notch_period_ghz;
        (f_ghz - center).abs() <= self.notch_width_ghz / 2.0
    }

    /// Loss of one full-thickness traversal at `f_ghz`, dB.
    pub fn full_loss_db(&self, f_ghz: f64) -> f64 {
        if self.opaque {
            return f64::INFINITY;
        }
        let notch = if self.in_notch(f_ghz) {
            self.notch_depth_db
        } else {
            0.0
        };
        (self.base_loss_db + self.loss_slope_db_per_ghz * (f_ghz - self.ref_ghz) + notch).max(0.0)
    }
}

/// Penetration loss for a traversal of `length` meters through material `m`
/// whose nominal thickness is `thickness` meters.
pub fn penetration_loss_db(m: &Material, f_ghz: f64, length: f64, thickness: f64) -> f64 {
    if length <= 0.0 {
        return 0.0;
    }
    if m.opaque {
        return f64::INFINITY;
    }
    m.full_loss_db(f_ghz) * length / thickness
}

#[cfg(test)]
mod tests {
    use super::*;

    fn notched() -> Material {
        Material {
            id: "glass".into(),
            base_loss_db: 8.0,
            loss_slope_db_per_ghz: 0.2,
            notch_depth_db: 30.0,
            notch_period_ghz: 6.0,
            notch_width_ghz: 2.0,
            ref_ghz: 28.0,
            opaque: false,
        }
    }

    #[test]
    fn zero_length_is_free() {
        assert_eq!(penetration_loss_db(&notched(), 28.0, 0.0, 0.1), 0.0);
        assert_eq!(penetration_loss_db(&Material::opaque("hill"), 28.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn notch_center() {
        let m = notched();
        // 34 GHz is one period above the reference
        let l = penetration_loss_db(&m, 34.0, 0.1, 0.1);
        assert!((l - (38.0 + 0.2 * 6.0)).abs() < 1e-9, "{l}");
        assert!((penetration_loss_db(&m, 28.0, 0.1, 0.1) - 38.0).abs() < 1e-9);
    }

    #[test]
    fn between_notches() {
        let m = notched();
        let l = penetration_loss_db(&m, 31.0, 0.1, 0.1);
        assert!((l - (8.0 + 0.2 * 3.0)).abs() < 1e-9);
    }

    #[test]
    fn scales_with_traversal() {
        let m = Material::simple("drywall", 6.0);
        assert!((penetration_loss_db(&m, 28.0, 0.3, 0.15) - 12.0).abs() < 1e-12);
        assert_eq!(penetration_loss_db(&Material::opaque("hill"), 28.0, 1.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn validation() {
        assert!(notched().validate().is_ok());
        let mut m = notched();
        m.notch_width_ghz = 7.0;
        assert!(m.validate().is_err());
        let mut m = notched();
        m.base_loss_db = -1.0;
        assert!(m.validate().is_err());
        let mut m = notched();
        m.notch_depth_db = 0.0;
        m.notch_width_ghz = 0.0;
        assert!(m.validate().is_ok());
    }
}
