//! Phase maps and the (delay, strength) parameter partition.
//!
//! A phase map `f` takes an oscillator's phase into the "potential" domain in
//! which incoming pulses add linearly. Every map used by the simulator must
//! be a strictly increasing, strictly concave bijection of `[0, 1]` with
//! `f(0) = 0` and `f(1) = 1`; custom maps are checked against those
//! conditions when constructed.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the `[0, 1]` domain checks of `f` and `f⁻¹`.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Default half-width of the band around `f(τ) + ε = 1` classified as boundary.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-9;

/// Closed-form phase function supplied by the caller.
pub trait PhaseFunction: Send + Sync + fmt::Debug {
    fn value(&self, phi: f64) -> f64;
    fn inverse(&self, y: f64) -> f64;
    fn derivative(&self, phi: f64) -> f64;
}

#[derive(Clone)]
enum Repr {
    Lif { current: f64, rate: f64 },
    Custom(Arc<dyn PhaseFunction>),
}

/// Immutable phase map; cheap to clone and share across threads.
#[derive(Clone)]
pub struct PhaseMap {
    repr: Repr,
}

impl fmt::Debug for PhaseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Lif { current, .. } => write!(f, "PhaseMap::Lif(I = {current})"),
            Repr::Custom(func) => write!(f, "PhaseMap::Custom({func:?})"),
        }
    }
}

/// Serialized phase-map selection, e.g. `{"kind": "lif", "I": 1.05}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseMapSpec {
    Lif {
        #[serde(rename = "I")]
        current: f64,
    },
}

impl Default for PhaseMapSpec {
    fn default() -> Self {
        PhaseMapSpec::Lif { current: 1.05 }
    }
}

impl PhaseMapSpec {
    pub fn build(&self) -> Result<PhaseMap> {
        match *self {
            PhaseMapSpec::Lif { current } => PhaseMap::lif(current),
        }
    }
}

/// Position of `(τ, ε)` relative to the curve `f(τ) + ε = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionClass {
    /// `f(τ) + ε < 1`.
    A1,
    /// `f(τ) + ε > 1`.
    A2Interior,
    /// `f(τ) + ε = 1` up to the boundary tolerance; belongs to A2.
    A2Boundary,
}

impl RegionClass {
    pub fn is_a1(self) -> bool {
        self == RegionClass::A1
    }

    pub fn is_a2(self) -> bool {
        !self.is_a1()
    }

    pub fn label(self) -> &'static str {
        match self {
            RegionClass::A1 => "A1",
            RegionClass::A2Interior => "A2",
            RegionClass::A2Boundary => "A2_boundary",
        }
    }
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn check_unit(what: &'static str, value: f64) -> Result<f64> {
    if value.is_nan() || !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&value) {
        return Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        });
    }
    Ok(value.clamp(0.0, 1.0))
}

pub(crate) fn check_open_unit(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "(0, 1)",
        })
    }
}

impl PhaseMap {
    /// Leaky integrate-and-fire map `f(φ) = I (1 − e^{−cφ})`, `c = ln(I / (I − 1))`.
    pub fn lif(current: f64) -> Result<Self> {
        if !(current.is_finite() && current > 1.0) {
            return Err(Error::Parameter(format!(
                "LIF current must be finite and > 1, got {current}"
            )));
        }
        let rate = (current / (current - 1.0)).ln();
        Ok(PhaseMap {
            repr: Repr::Lif { current, rate },
        })
    }

    /// Wraps a caller-supplied map after running the full invariant suite on it.
    pub fn custom(func: Arc<dyn PhaseFunction>) -> Result<Self> {
        validate(func.as_ref())?;
        Ok(PhaseMap {
            repr: Repr::Custom(func),
        })
    }

    /// `I` for the LIF kind.
    pub fn lif_current(&self) -> Option<f64> {
        match self.repr {
            Repr::Lif { current, .. } => Some(current),
            Repr::Custom(_) => None,
        }
    }

    /// The cached `c = ln(I / (I − 1))` for the LIF kind.
    pub fn lif_rate(&self) -> Option<f64> {
        match self.repr {
            Repr::Lif { rate, .. } => Some(rate),
            Repr::Custom(_) => None,
        }
    }

    pub fn f(&self, phi: f64) -> Result<f64> {
        let phi = check_unit("phase", phi)?;
        Ok(self.f_raw(phi))
    }

    pub fn f_inverse(&self, y: f64) -> Result<f64> {
        let y = check_unit("potential", y)?;
        Ok(self.f_inverse_raw(y))
    }

    /// `f′(φ)`; exposed for diagnostics only.
    pub fn f_prime(&self, phi: f64) -> Result<f64> {
        let phi = check_unit("phase", phi)?;
        Ok(match &self.repr {
            Repr::Lif { current, rate } => current * rate * (-rate * phi).exp(),
            Repr::Custom(func) => func.derivative(phi),
        })
    }

    #[inline]
    pub(crate) fn f_raw(&self, phi: f64) -> f64 {
        match &self.repr {
            Repr::Lif { current, rate } => {
                if phi >= 1.0 {
                    1.0
                } else {
                    -current * (-rate * phi).exp_m1()
                }
            }
            Repr::Custom(func) => func.value(phi),
        }
    }

    #[inline]
    pub(crate) fn f_inverse_raw(&self, y: f64) -> f64 {
        match &self.repr {
            Repr::Lif { current, rate } => {
                if y >= 1.0 {
                    1.0
                } else {
                    (-(-y / current).ln_1p() / rate).clamp(0.0, 1.0)
                }
            }
            Repr::Custom(func) => func.inverse(y).clamp(0.0, 1.0),
        }
    }

    /// The pulse response `f⁻¹(min[1, f(φ) + strength])`.
    #[inline]
    pub fn jump(&self, phi: f64, strength: f64) -> f64 {
        let y = self.f_raw(phi) + strength;
        if y >= 1.0 {
            1.0
        } else {
            self.f_inverse_raw(y)
        }
    }

    /// `f(τ) + ε`, the quantity that separates the two parameter regions.
    pub fn region_margin(&self, tau: f64, eps: f64) -> f64 {
        self.f_raw(tau) + eps
    }

    pub fn classify_region(&self, tau: f64, eps: f64, boundary_tol: f64) -> Result<RegionClass> {
        check_open_unit("tau", tau)?;
        check_open_unit("eps", eps)?;
        if boundary_tol.is_nan() || boundary_tol < 0.0 {
            return Err(Error::Parameter(format!(
                "boundary tolerance must be non-negative, got {boundary_tol}"
            )));
        }
        let s = self.region_margin(tau, eps);
        Ok(if s < 1.0 - boundary_tol {
            RegionClass::A1
        } else if s <= 1.0 + boundary_tol {
            RegionClass::A2Boundary
        } else {
            RegionClass::A2Interior
        })
    }

    /// Interspike interval of a completely synchronized A1 solution,
    /// `1 − [f⁻¹(f(τ) + ε) − τ]`.
    pub fn sync_isi(&self, tau: f64, eps: f64) -> Result<f64> {
        check_open_unit("tau", tau)?;
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Domain {
                what: "eps",
                value: eps,
                domain: "[0, 1)",
            });
        }
        let s = self.region_margin(tau, eps);
        if s >= 1.0 {
            return Err(Error::Domain {
                what: "f(tau) + eps",
                value: s,
                domain: "< 1 (region A1)",
            });
        }
        Ok(1.0 - (self.f_inverse_raw(s) - tau))
    }
}

const VALIDATION_GRID: usize = 200;

fn validate(func: &dyn PhaseFunction) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidPhaseMap(msg));
    if (func.value(0.0)).abs() > DOMAIN_SLACK {
        return bad(format!("f(0) = {}", func.value(0.0)));
    }
    if (func.value(1.0) - 1.0).abs() > DOMAIN_SLACK {
        return bad(format!("f(1) = {}", func.value(1.0)));
    }
    let grid: Vec<f64> = (0..=VALIDATION_GRID)
        .map(|k| k as f64 / VALIDATION_GRID as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| func.value(x)).collect();
    for (k, w) in values.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return bad(format!("not strictly increasing near phase {}", grid[k]));
        }
    }
    for &x in &grid {
        let d = func.derivative(x);
        if !(d > 0.0 && d.is_finite()) {
            return bad(format!("f'({x}) = {d} is not positive"));
        }
        let back = func.inverse(func.value(x));
        if (back - x).abs() > 1e-10 {
            return bad(format!("f^-1(f({x})) = {back}"));
        }
    }
    // Midpoint concavity on every grid pair two or more steps apart.
    for i in 0..grid.len() {
        for j in (i + 2..grid.len()).step_by(2) {
            let mid = func.value(0.5 * (grid[i] + grid[j]));
            if !(mid > 0.5 * (values[i] + values[j])) {
                return bad(format!("not strictly concave on [{}, {}]", grid[i], grid[j]));
            }
        }
    }
    Ok(())
}
