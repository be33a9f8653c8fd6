//! Pointwise material laws: stress invariants, the Norton-Bailey creep
//! flow rule with damage-intensified stress, Kachanov damage evolution,
//! and permeability from dilatant volumetric strain.
//!
//! Unit conventions: stress in Pa and time in seconds for creep; stress
//! in MPa and time in days for the damage law.

use crate::materials::{CreepLaw, DamageParams, GAS_CONSTANT};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstitutiveError {
    #[error("damage D = {0} has saturated (element fully failed)")]
    DamageSaturated(f64),
    #[error("non-physical input: {0}")]
    NonPhysical(String),
}

/// Plane-strain stress state [Pa]; `szz` is the out-of-plane component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StressState {
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
    pub szz: f64,
}

/// In-plane strain state with engineering shear.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrainState {
    pub exx: f64,
    pub eyy: f64,
    pub gxy: f64,
}

/// Scalar Kachanov damage, non-decreasing over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DamageState {
    pub d: f64,
}

/// Creep strain rate [1/s]; `gxy` is the engineering shear rate and the
/// normal components satisfy exx + eyy + ezz = 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrainRate {
    pub exx: f64,
    pub eyy: f64,
    pub gxy: f64,
    pub ezz: f64,
}

/// Von Mises equivalent stress.
pub fn von_mises(s: StressState) -> f64 {
    (0.5 * ((s.sxx - s.syy).powi(2) + (s.syy - s.szz).powi(2) + (s.szz - s.sxx).powi(2))
        + 3.0 * s.sxy * s.sxy)
        .sqrt()
}

/// Deviatoric part of the stress tensor; returned with the same layout
/// (the deviatoric shear equals the input shear).
pub fn deviatoric(s: StressState) -> StressState {
    let p = (s.sxx + s.syy + s.szz) / 3.0;
    StressState {
        sxx: s.sxx - p,
        syy: s.syy - p,
        sxy: s.sxy,
        szz: s.szz - p,
    }
}

/// Norton-Bailey creep rate with Arrhenius temperature dependence and
/// damage-intensified stress sigma / (1 - D).
pub fn creep_strain_rate(
    stress: StressState,
    law: &CreepLaw,
    temperature: f64,
    damage: DamageState,
) -> Result<StrainRate, ConstitutiveError> {
    if temperature <= 0.0 {
        return Err(ConstitutiveError::NonPhysical(format!(
            "temperature {temperature} K"
        )));
    }
    if damage.d >= 1.0 - 1e-9 {
        return Err(ConstitutiveError::DamageSaturated(damage.d));
    }
    let intensify = 1.0 / (1.0 - damage.d);
    let st = StressState {
        sxx: stress.sxx * intensify,
        syy: stress.syy * intensify,
        sxy: stress.sxy * intensify,
        szz: stress.szz * intensify,
    };
    let svm = von_mises(st);
    if svm == 0.0 {
        return Ok(StrainRate::default());
    }
    let arrhenius = if law.q > 0.0 {
        (-law.q / (GAS_CONSTANT * temperature)).exp()
    } else {
        1.0
    };
    let dev = deviatoric(st);
    let scale = 1.5 * law.a * arrhenius * svm.powf(law.n - 1.0);
    Ok(StrainRate {
        exx: scale * dev.sxx,
        eyy: scale * dev.syy,
        // engineering shear: twice the tensor shear rate
        gxy: 2.0 * scale * dev.sxy,
        ezz: scale * dev.szz,
    })
}

/// Equivalent (scalar) creep rate a exp(-Q/RT) sigma_vm^n, the magnitude
/// the flow rule distributes over the deviator.
pub fn equivalent_creep_rate(
    sigma_vm: f64,
    law: &CreepLaw,
    temperature: f64,
    damage: DamageState,
) -> Result<f64, ConstitutiveError> {
    if damage.d >= 1.0 - 1e-9 {
        return Err(ConstitutiveError::DamageSaturated(damage.d));
    }
    let arrhenius = if law.q > 0.0 {
        (-law.q / (GAS_CONSTANT * temperature)).exp()
    } else {
        1.0
    };
    Ok(law.a * arrhenius * (sigma_vm / (1.0 - damage.d)).powf(law.n))
}

/// Kachanov damage evolution rate [1/day]; `sigma_vm_mpa` in MPa.
pub fn damage_rate(
    sigma_vm_mpa: f64,
    damage: DamageState,
    p: &DamageParams,
) -> Result<f64, ConstitutiveError> {
    if sigma_vm_mpa < 0.0 {
        return Err(ConstitutiveError::NonPhysical(format!(
            "negative von Mises stress {sigma_vm_mpa}"
        )));
    }
    if damage.d >= 1.0 {
        return Err(ConstitutiveError::DamageSaturated(damage.d));
    }
    Ok(sigma_vm_mpa.powf(p.r) / (p.b * (1.0 - damage.d).powf(p.r)))
}

/// Closed-form failure time (D = 1) under constant von Mises stress,
/// in days. `None` means no failure (zero stress).
pub fn failure_time_constant_stress(sigma_vm_mpa: f64, p: &DamageParams) -> Option<f64> {
    if sigma_vm_mpa <= 0.0 {
        None
    } else {
        Some(p.b / ((p.r + 1.0) * sigma_vm_mpa.powf(p.r)))
    }
}

/// Numerically integrate the damage ODE at constant stress with RK4 until
/// D reaches 1; returns the crossing time in days, or `None` if `t_max`
/// is reached first. Used as an independent oracle for the closed form
/// and the simulator's damage update.
pub fn integrate_damage_rk4(
    sigma_vm_mpa: f64,
    p: &DamageParams,
    dt: f64,
    t_max: f64,
) -> Option<f64> {
    let rate = |d: f64| -> f64 {
        if d >= 1.0 {
            f64::INFINITY
        } else {
            sigma_vm_mpa.powf(p.r) / (p.b * (1.0 - d).powf(p.r))
        }
    };
    let mut d = 0.0;
    let mut t = 0.0;
    while t < t_max {
        let k1 = rate(d);
        let k2 = rate(d + 0.5 * dt * k1);
        let k3 = rate(d + 0.5 * dt * k2);
        let k4 = rate(d + dt * k3);
        let mut incr = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !incr.is_finite() {
            // a stage overshot D = 1; fall back to the explicit rate for
            // the remaining sliver
            incr = dt * k1;
        }
        if d + incr >= 1.0 {
            // linear interpolation of the crossing within this step
            return Some(t + dt * (1.0 - d) / incr);
        }
        d += incr;
        t += dt;
    }
    None
}

/// Dilatant volumetric strain magnitude from an in-plane strain state and
/// out-of-plane component.
pub fn volumetric_strain(e: StrainState, ezz: f64) -> f64 {
    (e.exx + e.eyy + ezz).abs()
}

/// Permeability [m^2] from volumetric strain: k = 2.13e-8 eps_vol^3.
pub const PERMEABILITY_ALPHA: f64 = 2.13e-8;
pub const PERMEABILITY_BETA: f64 = 3.0;

pub fn permeability(eps_vol: f64) -> f64 {
    debug_assert!(eps_vol >= 0.0);
    PERMEABILITY_ALPHA * eps_vol.powf(PERMEABILITY_BETA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::default_damage;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn halite_creep() -> CreepLaw {
        CreepLaw {
            a: 8.10e-27,
            n: 3.5,
            q: 51_600.0,
        }
    }

    #[test]
    fn von_mises_canonical_states() {
        let uni = StressState {
            sxx: 20.0e6,
            ..Default::default()
        };
        assert_relative_eq!(von_mises(uni), 20.0e6, max_relative = 1e-12);
        let shear = StressState {
            sxy: 5.0e6,
            ..Default::default()
        };
        assert_relative_eq!(von_mises(shear), 3.0f64.sqrt() * 5.0e6, max_relative = 1e-12);
        let hydro = StressState {
            sxx: 7.0e6,
            syy: 7.0e6,
            szz: 7.0e6,
            sxy: 0.0,
        };
        assert_eq!(von_mises(hydro), 0.0);
    }

    #[test]
    fn deviatoric_canonical_states() {
        let hydro = StressState {
            sxx: 3.0,
            syy: 3.0,
            szz: 3.0,
            sxy: 0.0,
        };
        let d = deviatoric(hydro);
        assert_eq!((d.sxx, d.syy, d.szz, d.sxy), (0.0, 0.0, 0.0, 0.0));
        let uni = StressState {
            sxx: 9.0,
            ..Default::default()
        };
        let d = deviatoric(uni);
        assert_relative_eq!(d.sxx, 6.0);
        assert_relative_eq!(d.syy, -3.0);
        assert_relative_eq!(d.szz, -3.0);
    }

    #[test]
    fn halite_creep_rate_magnitude() {
        // uniaxial 20 MPa at 313.15 K: equivalent rate ~ 7.1e-10 1/s
        let law = halite_creep();
        let rate = equivalent_creep_rate(20.0e6, &law, 313.15, DamageState::default()).unwrap();
        assert!(
            (6.5e-10..7.6e-10).contains(&rate),
            "equivalent rate {rate} out of expected band"
        );
        // axial component of the tensor rate = equivalent rate (uniaxial)
        let uni = StressState {
            sxx: 20.0e6,
            ..Default::default()
        };
        let r = creep_strain_rate(uni, &law, 313.15, DamageState::default()).unwrap();
        assert_relative_eq!(r.exx, rate, max_relative = 1e-12);
        assert_relative_eq!(r.eyy, -0.5 * rate, max_relative = 1e-12);
        assert_relative_eq!(r.ezz, -0.5 * rate, max_relative = 1e-12);
        // ~1.7% axial strain over 275 days
        let strain = rate * 275.0 * 86_400.0;
        assert!((0.012..0.022).contains(&strain), "strain {strain}");
    }

    #[test]
    fn creep_rate_is_trace_free_and_coaxial() {
        let s = StressState {
            sxx: 12.0e6,
            syy: -3.0e6,
            sxy: 4.0e6,
            szz: 5.0e6,
        };
        let r = creep_strain_rate(s, &halite_creep(), 320.0, DamageState { d: 0.2 }).unwrap();
        let tr = r.exx + r.eyy + r.ezz;
        let norm = r.exx.abs().max(r.eyy.abs()).max(r.ezz.abs());
        assert!(tr.abs() < 1e-12 * norm.max(1e-30), "trace {tr}");
        // co-axial: rate components proportional to the deviator
        let dev = deviatoric(s);
        let k = r.exx / dev.sxx;
        assert!(k > 0.0);
        assert_relative_eq!(r.eyy, k * dev.syy, max_relative = 1e-9);
        assert_relative_eq!(r.ezz, k * dev.szz, max_relative = 1e-9);
        assert_relative_eq!(r.gxy, 2.0 * k * dev.sxy, max_relative = 1e-9);
    }

    #[test]
    fn damage_halves_scale_creep_rate_by_power_law() {
        let law = halite_creep();
        let r0 =
            equivalent_creep_rate(20.0e6, &law, 313.15, DamageState::default()).unwrap();
        let r5 = equivalent_creep_rate(20.0e6, &law, 313.15, DamageState { d: 0.5 }).unwrap();
        assert_relative_eq!(r5 / r0, 2.0f64.powf(3.5), max_relative = 1e-9);
    }

    #[test]
    fn zero_stress_gives_zero_creep() {
        let r = creep_strain_rate(
            StressState::default(),
            &halite_creep(),
            313.15,
            DamageState::default(),
        )
        .unwrap();
        assert_eq!(r, StrainRate::default());
    }

    #[test]
    fn saturated_damage_is_an_error() {
        let s = StressState {
            sxx: 1.0e6,
            ..Default::default()
        };
        assert!(matches!(
            creep_strain_rate(s, &halite_creep(), 313.15, DamageState { d: 1.0 }),
            Err(ConstitutiveError::DamageSaturated(_))
        ));
        assert!(damage_rate(10.0, DamageState { d: 1.0 }, &default_damage()).is_err());
    }

    #[test]
    fn damage_rate_base_case() {
        // 30 MPa, D = 0, B = 4e4, r = 2.5 -> 30^2.5 / 4e4 per day
        let rate = damage_rate(30.0, DamageState::default(), &default_damage()).unwrap();
        assert_relative_eq!(rate, 30.0f64.powf(2.5) / 4.0e4, max_relative = 1e-12);
        assert!((0.12..0.13).contains(&rate));
        // fixed stress: halving the intact fraction scales the rate by 2^r
        let r5 = damage_rate(30.0, DamageState { d: 0.5 }, &default_damage()).unwrap();
        assert_relative_eq!(r5 / rate, 2.0f64.powf(2.5), max_relative = 1e-12);
        assert_eq!(
            damage_rate(0.0, DamageState::default(), &default_damage()).unwrap(),
            0.0
        );
    }

    #[test]
    fn failure_time_closed_form() {
        let p = default_damage();
        let tf = failure_time_constant_stress(30.0, &p).unwrap();
        assert_relative_eq!(tf, 4.0e4 / (3.5 * 30.0f64.powf(2.5)), max_relative = 1e-12);
        assert!((2.2..2.4).contains(&tf), "t_f = {tf}");
        // linear in B
        let p2 = DamageParams { b: 8.0e4, ..p };
        assert_relative_eq!(
            failure_time_constant_stress(30.0, &p2).unwrap(),
            2.0 * tf,
            max_relative = 1e-12
        );
        assert!(failure_time_constant_stress(0.0, &p).is_none());
    }

    #[test]
    fn rk4_integration_matches_closed_form_failure_time() {
        let p = default_damage();
        let tf = failure_time_constant_stress(30.0, &p).unwrap();
        let t_num = integrate_damage_rk4(30.0, &p, tf / 1.0e4, 2.0 * tf).unwrap();
        assert!(
            (t_num - tf).abs() / tf < 1e-3,
            "numeric {t_num} vs closed form {tf}"
        );
    }

    #[test]
    fn volumetric_strain_and_permeability() {
        assert_eq!(volumetric_strain(StrainState::default(), 0.0), 0.0);
        let e = StrainState {
            exx: 1e-4,
            eyy: 1e-4,
            gxy: 0.0,
        };
        assert_relative_eq!(volumetric_strain(e, 1e-4), 3e-4, max_relative = 1e-12);
        // trace-free
        let dev = StrainState {
            exx: 1e-4,
            eyy: -4e-5,
            gxy: 2e-3,
        };
        assert!(volumetric_strain(dev, -6e-5) < 1e-18);

        assert_eq!(permeability(0.0), 0.0);
        assert_relative_eq!(permeability(1e-3), 2.13e-17, max_relative = 1e-12);
        // the published intact-salt floor of 1e-21 m^2 corresponds to
        // eps_vol ~ 3.6e-5
        let eps = (1e-21 / PERMEABILITY_ALPHA).powf(1.0 / 3.0);
        assert!((3.5e-5..3.7e-5).contains(&eps), "eps {eps}");
        assert_relative_eq!(permeability(eps), 1e-21, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn von_mises_nonnegative_and_scales_linearly(
            sxx in -1e8f64..1e8, syy in -1e8f64..1e8,
            sxy in -1e8f64..1e8, szz in -1e8f64..1e8,
            k in 0.1f64..10.0,
        ) {
            let s = StressState { sxx, syy, sxy, szz };
            let v = von_mises(s);
            prop_assert!(v >= 0.0);
            let ks = StressState { sxx: k * sxx, syy: k * syy, sxy: k * sxy, szz: k * szz };
            prop_assert!((von_mises(ks) - k * v).abs() <= 1e-9 * v.max(1.0));
        }

        #[test]
        fn deviatoric_is_trace_free(
            sxx in -1e8f64..1e8, syy in -1e8f64..1e8,
            sxy in -1e8f64..1e8, szz in -1e8f64..1e8,
        ) {
            let s = StressState { sxx, syy, sxy, szz };
            let d = deviatoric(s);
            let norm = sxx.abs().max(syy.abs()).max(szz.abs()).max(1.0);
            prop_assert!((d.sxx + d.syy + d.szz).abs() <= 1e-9 * norm);
        }

        #[test]
        fn rates_are_monotone_in_stress_temperature_damage(
            svm in 1e6f64..5e7,
            t in 290.0f64..360.0,
            d in 0.0f64..0.9,
        ) {
            let law = halite_creep();
            let dmg_state = DamageState { d };
            let more_damage = DamageState { d: (d + 0.05).min(0.95) };
            let base = equivalent_creep_rate(svm, &law, t, dmg_state).unwrap();
            let higher_stress = equivalent_creep_rate(svm * 1.1, &law, t, dmg_state).unwrap();
            let hotter = equivalent_creep_rate(svm, &law, t + 5.0, dmg_state).unwrap();
            let damaged = equivalent_creep_rate(svm, &law, t, more_damage).unwrap();
            prop_assert!(higher_stress >= base);
            prop_assert!(hotter >= base);
            prop_assert!(damaged >= base);

            let p = default_damage();
            let dmg = damage_rate(svm / 1e6, dmg_state, &p).unwrap();
            let dmg_hs = damage_rate(svm / 1e6 * 1.1, dmg_state, &p).unwrap();
            let dmg_dd = damage_rate(svm / 1e6, more_damage, &p).unwrap();
            prop_assert!(dmg_hs >= dmg);
            prop_assert!(dmg_dd >= dmg);
        }
    }
}
