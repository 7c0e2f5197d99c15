//! Closed-form material laws for moisture transport, carbonation and corrosion.
//!
//! All quantities are SI (Pa, m, s, mol/m³, K) except the corrosion current
//! density, which is reported in µA/cm².
//!
//! The moisture retention curve is the van Genuchten form
//!
//! ```text
//! p_c(S) = α (S^-β - 1)^(1 - 1/β)
//! ```
//!
//! paired with the Mualem relative permeability and the Kelvin law linking
//! capillary pressure to ambient relative humidity. Power expressions that
//! lose precision near `S = 0` or `S = 1` are evaluated through `exp_m1` /
//! `ln_1p` so that every law is accurate to a few ulps over its full domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp applied to saturation before it enters any law inside the solver.
pub const S_MIN: f64 = 1e-6;

/// pH reported for fully carbonated pore solution.
pub const PH_FLOOR: f64 = 8.3;

/// Depassivation threshold used for carbonation depth and corrosion onset.
pub const PH_DEPASSIVATION: f64 = 9.0;

/// Prefactor of the CO₂ diffusivity law, m²/s.
pub const CO2_DIFFUSIVITY_PREFACTOR: f64 = 1.64e-6;

/// Which sorption branch the scenario uses. Only one is active per run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsothermBranch {
    Wetting,
    Drying,
}

/// Material and physical constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// van Genuchten pressure scale, Pa.
    pub alpha: f64,
    /// van Genuchten shape exponent, > 1.
    pub beta: f64,
    /// Permeability fitting constant C, m⁴/kg².
    pub perm_const: f64,
    /// Dynamic viscosity of water, Pa·s.
    pub viscosity: f64,
    /// Dry density of the solid, kg/m³.
    pub rho_s: f64,
    /// Density of liquid water, kg/m³.
    pub rho_l: f64,
    /// Molar mass of water, kg/mol.
    pub molar_mass_water: f64,
    /// Universal gas constant, J/(mol·K).
    pub gas_constant: f64,
    /// Absolute temperature, K.
    pub temperature: f64,
    /// Atmospheric pressure, Pa (used for CO₂ volume-fraction conversion).
    pub p_atm: f64,
    /// Porosity of uncarbonated material.
    pub theta_0: f64,
    /// Porosity of fully carbonated material.
    pub theta_c: f64,
    /// Henry constant for CO₂ dissolution, mol/(Pa·m³).
    pub henry: f64,
    /// Neutralization rate constant, m³/(mol·s).
    pub k_n: f64,
    /// OH⁻ equilibrium concentration, mol/m³.
    pub c_oh_eq: f64,
    /// Initial Ca(OH)₂ concentration, mol/m³.
    pub c_caoh2_0: f64,
    /// Asymptotic corrosion current density, µA/cm².
    pub i_max: f64,
    /// Shape constant of the corrosion-current law.
    pub k_fit: f64,
    /// Critical porosity (inflection of the corrosion-current law).
    pub theta_crit: f64,
    /// Phase-field threshold above which a crack is open.
    pub phi_t: f64,
}

impl MaterialParams {
    fn common(alpha: f64, beta: f64, perm_const: f64) -> Self {
        Self {
            alpha,
            beta,
            perm_const,
            viscosity: 1e-3,
            rho_s: 2285.0,
            rho_l: 1000.0,
            molar_mass_water: 0.018,
            gas_constant: 8.314,
            temperature: 293.15,
            p_atm: 101_325.0,
            theta_0: 0.15,
            theta_c: 0.11,
            henry: 3.375e-4,
            k_n: 8.3,
            c_oh_eq: 43.2,
            c_caoh2_0: 1.2e-4,
            i_max: 3.7,
            k_fit: 1e-3,
            theta_crit: 0.185,
            phi_t: 0.5,
        }
    }

    /// Wetting-branch parameter set.
    pub fn wetting() -> Self {
        Self::common(0.9e6, 3.85, 1.29e2)
    }

    /// Drying-branch parameter set.
    pub fn drying() -> Self {
        Self::common(18.62e6, 2.27, 7.4e6)
    }

    pub fn for_branch(branch: IsothermBranch) -> Self {
        match branch {
            IsothermBranch::Wetting => Self::wetting(),
            IsothermBranch::Drying => Self::drying(),
        }
    }

    /// Check the physical invariants of the parameter set.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("perm_const", self.perm_const),
            ("viscosity", self.viscosity),
            ("rho_s", self.rho_s),
            ("rho_l", self.rho_l),
            ("molar_mass_water", self.molar_mass_water),
            ("gas_constant", self.gas_constant),
            ("temperature", self.temperature),
            ("p_atm", self.p_atm),
            ("henry", self.henry),
            ("k_n", self.k_n),
            ("c_oh_eq", self.c_oh_eq),
            ("c_caoh2_0", self.c_caoh2_0),
            ("i_max", self.i_max),
            ("k_fit", self.k_fit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.beta.is_finite() && self.beta > 1.0) {
            return Err(Error::param("beta", format!("must be > 1, got {}", self.beta)));
        }
        if !(self.theta_c > 0.0 && self.theta_c < self.theta_0 && self.theta_0 < 1.0) {
            return Err(Error::param(
                "theta_0",
                format!(
                    "require 0 < theta_c < theta_0 < 1, got theta_c = {}, theta_0 = {}",
                    self.theta_c, self.theta_0
                ),
            ));
        }
        if !(self.theta_crit.is_finite()) {
            return Err(Error::param("theta_crit", "must be finite"));
        }
        if !(self.phi_t > 0.0 && self.phi_t < 1.0) {
            return Err(Error::param("phi_t", format!("must lie in (0, 1), got {}", self.phi_t)));
        }
        Ok(())
    }

    /// Lumped neutralization constant `H·R·T·k_n·c_OH⁻`, m³/(mol·s).
    pub fn reaction_constant(&self) -> f64 {
        self.henry * self.gas_constant * self.temperature * self.k_n * self.c_oh_eq
    }

    /// Molar CO₂ concentration of a gas with the given CO₂ volume fraction
    /// at atmospheric pressure (ideal gas).
    pub fn co2_from_volume_fraction(&self, fraction: f64) -> f64 {
        fraction * self.p_atm / (self.gas_constant * self.temperature)
    }
}

/// Liquid saturation ratio in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Saturation(f64);

impl Saturation {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && (0.0..=1.0).contains(&s) {
            Ok(Self(s))
        } else {
            Err(Error::domain("saturation", format!("{s} is outside [0, 1]")))
        }
    }

    /// Clamp into `[S_MIN, 1 - S_MIN]`, the box used by the solver.
    pub fn clamped(s: f64) -> Self {
        if s.is_nan() {
            return Self(S_MIN);
        }
        Self(s.clamp(S_MIN, 1.0 - S_MIN))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

// S^-β - 1, accurate near S = 1.
fn inv_pow_minus_one(s: f64, beta: f64) -> f64 {
    (-beta * s.ln()).exp_m1()
}

/// Capillary pressure `p_c(S)`, Pa.
pub fn capillary_pressure(s: Saturation, p: &MaterialParams) -> Result<f64> {
    let s = s.value();
    if s <= 0.0 {
        return Err(Error::domain("capillary_pressure", "saturation must be > 0"));
    }
    if s == 1.0 {
        return Ok(0.0);
    }
    let u = inv_pow_minus_one(s, p.beta);
    Ok(p.alpha * ((1.0 - 1.0 / p.beta) * u.ln()).exp())
}

/// `dp_c/dS`, Pa. Strictly negative on `(0, 1)`.
pub fn dpc_ds(s: Saturation, p: &MaterialParams) -> Result<f64> {
    let s = s.value();
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain("dpc_ds", format!("saturation {s} outside (0, 1)")));
    }
    Ok(dpc_ds_raw(s, p))
}

pub(crate) fn dpc_ds_raw(s: f64, p: &MaterialParams) -> f64 {
    let b = p.beta;
    let u = inv_pow_minus_one(s, b);
    -p.alpha * (b - 1.0) * (-u.ln() / b - (b + 1.0) * s.ln()).exp()
}

/// `d²p_c/dS²`, Pa.
pub fn d2pc_ds2(s: Saturation, p: &MaterialParams) -> Result<f64> {
    let s = s.value();
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain("d2pc_ds2", format!("saturation {s} outside (0, 1)")));
    }
    Ok(d2pc_ds2_raw(s, p))
}

pub(crate) fn d2pc_ds2_raw(s: f64, p: &MaterialParams) -> f64 {
    let b = p.beta;
    let u = inv_pow_minus_one(s, b);
    let s_neg_b = (-b * s.ln()).exp();
    let base = -p.alpha * (b - 1.0) * (-u.ln() / b - (b + 2.0) * s.ln()).exp();
    base * (s_neg_b / u - (b + 1.0))
}

/// Kelvin law: capillary pressure in equilibrium with relative humidity `h_r`.
pub fn kelvin_pc(h_r: f64, p: &MaterialParams) -> Result<f64> {
    if !(h_r > 0.0 && h_r <= 1.0) {
        return Err(Error::domain("kelvin_pc", format!("relative humidity {h_r} outside (0, 1]")));
    }
    Ok((0.0 - h_r.ln()) * p.rho_l * p.gas_constant * p.temperature / p.molar_mass_water)
}

/// Sorption isotherm: equilibrium saturation at relative humidity `h_r`.
pub fn saturation_from_humidity(h_r: f64, p: &MaterialParams) -> Result<Saturation> {
    let x = kelvin_pc(h_r, p)? / p.alpha;
    let b = p.beta;
    let xp = (b / (b - 1.0) * x.ln()).exp();
    Saturation::new((-xp.ln_1p() / b).exp())
}

/// Mualem–van Genuchten relative permeability.
pub fn relative_permeability(s: Saturation, p: &MaterialParams) -> f64 {
    kr_raw(s.value(), p.beta)
}

// 1 - (1 - S^β)^(1/β)
fn kr_bracket(s: f64, beta: f64) -> f64 {
    let sb = (beta * s.ln()).exp();
    -((-sb).ln_1p() / beta).exp_m1()
}

pub(crate) fn kr_raw(s: f64, beta: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let g = kr_bracket(s, beta);
    s.sqrt() * g * g
}

/// `dk_r/dS` on `(0, 1)`.
pub fn dkr_ds(s: Saturation, p: &MaterialParams) -> Result<f64> {
    let s = s.value();
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain("dkr_ds", format!("saturation {s} outside (0, 1)")));
    }
    Ok(dkr_ds_raw(s, p.beta))
}

pub(crate) fn dkr_ds_raw(s: f64, beta: f64) -> f64 {
    let g = kr_bracket(s, beta);
    let v = -(beta * s.ln()).exp_m1(); // 1 - S^β
    let w = 1.0 - g; // v^(1/β)
    let rs = s.sqrt();
    g * g / (2.0 * rs) + 2.0 * rs * g * (w / v) * (((beta - 1.0) * s.ln()).exp())
}

/// Scalar bulk permeability `θ⁸/(C ρ_s²)`, m².
pub fn bulk_permeability(theta: f64, p: &MaterialParams) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain("bulk_permeability", format!("porosity {theta} outside (0, 1)")));
    }
    Ok(bulk_perm_raw(theta, p))
}

pub(crate) fn bulk_perm_raw(theta: f64, p: &MaterialParams) -> f64 {
    theta.powi(8) / (p.perm_const * p.rho_s * p.rho_s)
}

pub(crate) fn dbulk_perm_raw(theta: f64, p: &MaterialParams) -> f64 {
    8.0 * theta.powi(7) / (p.perm_const * p.rho_s * p.rho_s)
}

/// Scalar moisture diffusivity factor `k_r |dp_c/dS| / η` (multiplies `K`)
/// and its derivative with respect to `S`, evaluated at the clamped value.
pub fn moisture_conductance(s: f64, p: &MaterialParams) -> (f64, f64) {
    let clamped = Saturation::clamped(s).value();
    let kr = kr_raw(clamped, p.beta);
    let dpc = dpc_ds_raw(clamped, p);
    let g = -kr * dpc / p.viscosity;
    if clamped != s {
        return (g, 0.0);
    }
    let dkr = dkr_ds_raw(clamped, p.beta);
    let d2pc = d2pc_ds2_raw(clamped, p);
    (g, -(dkr * dpc + kr * d2pc) / p.viscosity)
}

/// CO₂ diffusivity as a function of porosity, saturation and phase field, m²/s.
pub fn co2_diffusivity(theta: f64, s: Saturation, phi: f64) -> f64 {
    co2_diffusivity_with_derivs(theta, s.value(), phi).0
}

/// Returns `(D, ∂D/∂θ, ∂D/∂S)`; inputs outside their box are clamped and the
/// corresponding derivative is zero.
pub(crate) fn co2_diffusivity_with_derivs(theta: f64, s: f64, phi: f64) -> (f64, f64, f64) {
    let phi = phi.clamp(0.0, 1.0);
    let phi10 = phi.powi(10);
    let por = theta + (1.0 - theta) * phi10;
    let dry = (1.0 - s.clamp(0.0, 1.0)).max(0.0);
    if por <= 0.0 || dry <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let a = CO2_DIFFUSIVITY_PREFACTOR;
    let p18 = por.powf(1.8);
    let w22 = dry.powf(2.2);
    let d = a * p18 * w22;
    let dtheta = a * 1.8 * por.powf(0.8) * (1.0 - phi10) * w22;
    let ds = if (0.0..=1.0).contains(&s) { -a * p18 * 2.2 * dry.powf(1.2) } else { 0.0 };
    (d, dtheta, ds)
}

/// Neutralization rate `H R T k_n c_OH c_CO2 c_CaOH2`, mol/(m³·s).
/// Negative concentrations are treated as zero.
pub fn neutralization_rate(c_co2: f64, c_caoh2: f64, p: &MaterialParams) -> f64 {
    p.reaction_constant() * c_co2.max(0.0) * c_caoh2.max(0.0)
}

/// Corrosion current density, µA/cm².
pub fn corrosion_current_density(theta: f64, s: f64, p: &MaterialParams) -> f64 {
    let d = theta - p.theta_crit;
    let shape = 0.5 * (1.0 + d / (p.k_fit + d * d).sqrt());
    p.i_max * shape * s.clamp(0.0, 1.0)
}

/// Carbonation front variable `1 - c/c⁰`, clamped to `[0, 1]`.
pub fn carbonation_front(c_caoh2: f64, c_caoh2_0: f64) -> f64 {
    (1.0 - c_caoh2 / c_caoh2_0).clamp(0.0, 1.0)
}

/// Porosity after carbonation: affine in the front variable.
pub fn porosity_from_front(varphi: f64, p: &MaterialParams) -> f64 {
    porosity(p.theta_0, p.theta_c, varphi)
}

pub(crate) fn porosity(theta_0: f64, theta_c: f64, varphi: f64) -> f64 {
    theta_0 + varphi * (theta_c - theta_0)
}

/// Pore-solution pH from the Ca(OH)₂ concentration, floored at [`PH_FLOOR`].
pub fn ph_from_caoh2(c_caoh2: f64) -> f64 {
    if c_caoh2 <= 0.0 {
        return PH_FLOOR;
    }
    (14.0 + (2e3 * c_caoh2).log10()).max(PH_FLOOR)
}
