//! Material catalog: elastic, creep and damage parameters per rock type,
//! with the published constants for halite, potash, carnallite and
//! bischofite built in.
//!
//! Unit conventions: elasticity and creep work in SI (Pa, seconds); the
//! damage law works in MPa and days. Conversions happen only at module
//! boundaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Universal gas constant [J/(mol K)].
pub const GAS_CONSTANT: f64 = 8.314;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("invalid elastic parameters: {0}")]
    InvalidElastic(String),
    #[error("Poisson ratio {0} is at the incompressible limit")]
    IncompressibleLimit(f64),
    #[error("invalid creep law: {0}")]
    InvalidCreep(String),
    #[error("invalid damage parameters: {0}")]
    InvalidDamage(String),
    #[error("material `{0}` not found in the catalog")]
    UnknownMaterial(String),
    #[error("invalid material `{name}`: {msg}")]
    InvalidMaterial { name: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    /// Young's modulus [Pa].
    pub e: f64,
    /// Poisson ratio.
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParams {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreepLaw {
    /// Creep constant [Pa^-n s^-1].
    pub a: f64,
    /// Stress exponent.
    pub n: f64,
    /// Activation energy [J/mol]; 0 disables the Arrhenius factor.
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageParams {
    /// Resistance constant [MPa^r day].
    pub b: f64,
    /// Damage exponent.
    pub r: f64,
    /// Critical damage level at which an element is considered failed.
    pub d_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// [kg/m^3]
    pub density: f64,
    pub elastic: ElasticParams,
    pub creep: Option<CreepLaw>,
    pub damage: Option<DamageParams>,
}

impl ElasticParams {
    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.e > 0.0) {
            return Err(MaterialError::InvalidElastic(format!(
                "Young's modulus {} must be positive",
                self.e
            )));
        }
        if self.nu >= 0.5 {
            return Err(MaterialError::IncompressibleLimit(self.nu));
        }
        if self.nu < 0.0 {
            return Err(MaterialError::InvalidElastic(format!(
                "Poisson ratio {} must be non-negative",
                self.nu
            )));
        }
        Ok(())
    }
}

impl CreepLaw {
    pub fn validate(&self) -> Result<(), MaterialError> {
        if self.a < 0.0 {
            return Err(MaterialError::InvalidCreep(format!(
                "creep constant {} must be non-negative",
                self.a
            )));
        }
        if self.n < 1.0 {
            return Err(MaterialError::InvalidCreep(format!(
                "stress exponent {} must be >= 1",
                self.n
            )));
        }
        if self.q < 0.0 {
            return Err(MaterialError::InvalidCreep(format!(
                "activation energy {} must be non-negative",
                self.q
            )));
        }
        Ok(())
    }
}

impl DamageParams {
    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.b > 0.0) {
            return Err(MaterialError::InvalidDamage(format!(
                "resistance constant {} must be positive",
                self.b
            )));
        }
        if !(self.r > 0.0) {
            return Err(MaterialError::InvalidDamage(format!(
                "damage exponent {} must be positive",
                self.r
            )));
        }
        if !(self.d_star > 0.0 && self.d_star <= 1.0) {
            return Err(MaterialError::InvalidDamage(format!(
                "critical damage {} must be in (0, 1]",
                self.d_star
            )));
        }
        Ok(())
    }
}

impl Material {
    pub fn validate(&self) -> Result<(), MaterialError> {
        let err = |msg: String| MaterialError::InvalidMaterial {
            name: self.name.clone(),
            msg,
        };
        if !(self.density > 0.0) {
            return Err(err(format!("density {} must be positive", self.density)));
        }
        self.elastic.validate()?;
        if let Some(c) = &self.creep {
            c.validate()?;
        }
        if let Some(d) = &self.damage {
            d.validate()?;
            if self.creep.is_none() {
                return Err(err("damage requires a creep law".into()));
            }
        }
        Ok(())
    }
}

/// Convert (E, nu) to Lame constants.
pub fn lame_from(p: ElasticParams) -> Result<LameParams, MaterialError> {
    p.validate()?;
    let lambda = p.e * p.nu / ((1.0 + p.nu) * (1.0 - 2.0 * p.nu));
    let mu = p.e / (2.0 * (1.0 + p.nu));
    Ok(LameParams { lambda, mu })
}

impl LameParams {
    /// Recover (E, nu); inverse of `lame_from`.
    pub fn elastic(&self) -> ElasticParams {
        let LameParams { lambda, mu } = *self;
        let e = mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu);
        let nu = lambda / (2.0 * (lambda + mu));
        ElasticParams { e, nu }
    }
}

/// Plane-strain elasticity matrix relating (exx, eyy, gxy) to
/// (sxx, syy, sxy).
pub fn stiffness_c(p: LameParams) -> [[f64; 3]; 3] {
    let LameParams { lambda, mu } = p;
    [
        [lambda + 2.0 * mu, lambda, 0.0],
        [lambda, lambda + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ]
}

/// Convert a creep constant published with stress in MPa
/// [MPa^-n s^-1] to the internal SI convention [Pa^-n s^-1].
pub fn creep_constant_mpa_to_si(a_pub: f64, n: f64) -> f64 {
    a_pub * 1e-6_f64.powf(n)
}

/// Default halite damage parameters (B in MPa^r day).
pub fn default_damage() -> DamageParams {
    DamageParams {
        b: 4.0e4,
        r: 2.5,
        d_star: 0.95,
    }
}

/// Published interlayer constants, interpreted with stress in MPa and
/// rate per second (the same time base as the halite constant). `scaled`
/// applies the factor of 1e-3 quoted for the in-situ temperature
/// correction; the raw values are used unless the scenario selects the
/// scaled variant.
fn interlayer(name: &str, a_pub: f64, n: f64, e: f64, nu: f64, scaled: bool) -> Material {
    let factor = if scaled { 1e-3 } else { 1.0 };
    Material {
        name: name.to_string(),
        density: 2200.0,
        elastic: ElasticParams { e, nu },
        creep: Some(CreepLaw {
            a: creep_constant_mpa_to_si(a_pub * factor, n),
            n,
            q: 0.0,
        }),
        damage: None,
    }
}

/// The built-in material catalog. Keys: `halite`, `potash`, `carnallite`,
/// `bischofite`, plus `carnallite-scaled` / `bischofite-scaled` for the
/// temperature-corrected interlayer constants.
pub fn builtin_catalog() -> Vec<Material> {
    let halite = Material {
        name: "halite".to_string(),
        density: 2200.0,
        elastic: ElasticParams {
            e: 35.0e9,
            nu: 0.25,
        },
        creep: Some(CreepLaw {
            a: 8.10e-27,
            n: 3.5,
            q: 51_600.0,
        }),
        damage: Some(default_damage()),
    };
    // potash heterogeneity is elastic-only: creep stays halite's
    let potash = Material {
        name: "potash".to_string(),
        density: 2200.0,
        elastic: ElasticParams { e: 2.5e9, nu: 0.35 },
        creep: halite.creep,
        damage: None,
    };
    vec![
        halite,
        potash,
        interlayer("carnallite", 2.6804e-14, 5.0, 17.0e9, 0.33, false),
        interlayer("bischofite", 1.1e-9, 4.6, 18.0e9, 0.36, false),
        interlayer("carnallite-scaled", 2.6804e-14, 5.0, 17.0e9, 0.33, true),
        interlayer("bischofite-scaled", 1.1e-9, 4.6, 18.0e9, 0.36, true),
    ]
}

/// Look up a material by name.
pub fn find<'a>(catalog: &'a [Material], name: &str) -> Result<&'a Material, MaterialError> {
    catalog
        .iter()
        .find(|m| m.name == name)
        .ok_or_else(|| MaterialError::UnknownMaterial(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn halite_lame_constants() {
        let l = lame_from(ElasticParams {
            e: 35.0e9,
            nu: 0.25,
        })
        .unwrap();
        assert_relative_eq!(l.lambda, 14.0e9, max_relative = 1e-12);
        assert_relative_eq!(l.mu, 14.0e9, max_relative = 1e-12);
    }

    #[test]
    fn zero_poisson_gives_zero_lambda() {
        let l = lame_from(ElasticParams { e: 10.0, nu: 0.0 }).unwrap();
        assert_eq!(l.lambda, 0.0);
        assert_eq!(l.mu, 5.0);
    }

    #[test]
    fn potash_lame_constants() {
        let l = lame_from(ElasticParams { e: 2.5e9, nu: 0.35 }).unwrap();
        assert_relative_eq!(l.lambda, 2.160e9, max_relative = 1e-3);
        assert_relative_eq!(l.mu, 0.926e9, max_relative = 1e-3);
    }

    #[test]
    fn incompressible_limit_is_rejected() {
        assert!(matches!(
            lame_from(ElasticParams { e: 1.0, nu: 0.5 }),
            Err(MaterialError::IncompressibleLimit(_))
        ));
    }

    #[test]
    fn stiffness_matrix_entries() {
        let c = stiffness_c(LameParams {
            lambda: 14.0e9,
            mu: 14.0e9,
        });
        assert_relative_eq!(c[0][0], 42.0e9);
        assert_relative_eq!(c[1][1], 42.0e9);
        assert_relative_eq!(c[2][2], 14.0e9);
        assert_relative_eq!(c[0][1], 14.0e9);
        let c0 = stiffness_c(LameParams {
            lambda: 0.0,
            mu: 3.0,
        });
        assert_eq!(c0[0][0], 6.0);
        assert_eq!(c0[0][1], 0.0);
        assert_eq!(c0[2][2], 3.0);
    }

    #[test]
    fn stiffness_matrix_is_spd() {
        // leading principal minors positive for a representative case
        let c = stiffness_c(lame_from(ElasticParams { e: 2.5e9, nu: 0.35 }).unwrap());
        let m1 = c[0][0];
        let m2 = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let m3 = m2 * c[2][2];
        assert!(m1 > 0.0 && m2 > 0.0 && m3 > 0.0);
    }

    #[test]
    fn catalog_matches_published_constants() {
        let cat = builtin_catalog();
        let halite = find(&cat, "halite").unwrap();
        assert_eq!(halite.density, 2200.0);
        assert_eq!(halite.elastic.e, 35.0e9);
        assert_eq!(halite.elastic.nu, 0.25);
        let hc = halite.creep.unwrap();
        assert_eq!(hc.a, 8.10e-27);
        assert_eq!(hc.n, 3.5);
        assert_eq!(hc.q, 51_600.0);
        assert_eq!(halite.damage.unwrap().b, 4.0e4);
        assert_eq!(halite.damage.unwrap().r, 2.5);

        let carn = find(&cat, "carnallite").unwrap();
        assert_eq!(carn.elastic.e, 17.0e9);
        assert_eq!(carn.elastic.nu, 0.33);
        assert_eq!(carn.creep.unwrap().n, 5.0);
        let bis = find(&cat, "bischofite").unwrap();
        assert_eq!(bis.elastic.e, 18.0e9);
        assert_eq!(bis.elastic.nu, 0.36);
        assert_eq!(bis.creep.unwrap().n, 4.6);

        let potash = find(&cat, "potash").unwrap();
        assert_eq!(potash.elastic.e, 2.5e9);
        assert_eq!(potash.elastic.nu, 0.35);
        assert_eq!(potash.creep, halite.creep);
        assert!(potash.damage.is_none());

        for m in &cat {
            m.validate().unwrap();
        }
    }

    #[test]
    fn interlayer_unit_conversion() {
        // carnallite: 2.6804e-14 MPa^-5 s^-1 -> Pa^-5 s^-1
        let a = creep_constant_mpa_to_si(2.6804e-14, 5.0);
        assert_relative_eq!(a, 2.6804e-14 * 1e-30, max_relative = 1e-12);
        // scaled variant is exactly 1e-3 of the raw one
        let cat = builtin_catalog();
        let raw = find(&cat, "bischofite").unwrap().creep.unwrap().a;
        let scaled = find(&cat, "bischofite-scaled").unwrap().creep.unwrap().a;
        assert_relative_eq!(scaled, raw * 1e-3, max_relative = 1e-12);
    }

    #[test]
    fn damage_without_creep_is_rejected() {
        let m = Material {
            name: "bad".into(),
            density: 2200.0,
            elastic: ElasticParams { e: 1e9, nu: 0.2 },
            creep: None,
            damage: Some(default_damage()),
        };
        assert!(m.validate().is_err());
    }

    proptest! {
        #[test]
        fn lame_roundtrip_is_inverse_consistent(
            e in 1e8f64..1e11,
            nu in 0.0f64..0.49,
        ) {
            let l = lame_from(ElasticParams { e, nu }).unwrap();
            let back = l.elastic();
            prop_assert!((back.e - e).abs() <= 1e-12 * e);
            prop_assert!((back.nu - nu).abs() <= 1e-12 * nu.max(1e-3));
        }

        #[test]
        fn stiffness_determinant_positive(
            e in 1e8f64..1e11,
            nu in 0.0f64..0.49,
        ) {
            let c = stiffness_c(lame_from(ElasticParams { e, nu }).unwrap());
            let m2 = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            prop_assert!(c[0][0] > 0.0 && m2 > 0.0 && m2 * c[2][2] > 0.0);
        }
    }
}
