//! Named damping configurations with their predicted resolvent and decay
//! behaviour.

use serde::{Deserialize, Serialize};

use crate::damping::{assemble, Coefficient, DampingOperator, DampingSpec, MFunction, Symbol};
use crate::error::{Error, Result};
use crate::spectral::{OperatorKind, SpectralModel};

pub const PRESET_NAMES: [&str; 6] =
    ["water-constant", "water-degenerate", "dw-fractional", "kelvin-voigt", "pdo-anisotropic", "undamped"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub d: usize,
    #[serde(rename = "K")]
    pub cutoff: usize,
    pub oversample: usize,
}

/// Preset parameters; unset fields take the preset default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Level of a constant coefficient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum DecayPrediction {
    Exponential,
    /// `‖e^{t𝒜}𝒜^{-1}‖ ≲ ⟨t⟩^{−beta}`.
    Polynomial { beta: f64 },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub claimed_m: Option<MFunction>,
    /// Exponent of the resolvent bound in `λ`; absent for undamped.
    pub resolvent_exponent: Option<f64>,
    pub decay: DecayPrediction,
    pub rate: String,
    /// `m` for which `G` is known to be `m`-bounded.
    pub bounded_m: MFunction,
}

impl Prediction {
    /// `s ∈ [0, 1/2]` with `G` known to be `λ^{4s}`-bounded.
    pub fn conversion_order(&self) -> Option<f64> {
        let s = self.bounded_m.exponent() / 4.0;
        (0.0..=0.5).contains(&s).then_some(s)
    }
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub geometry: Geometry,
    pub kind: OperatorKind,
    pub spec: DampingSpec,
    /// Parameters with defaults filled in.
    pub params: PresetParams,
    pub prediction: Prediction,
}

impl Preset {
    pub fn model(&self) -> Result<SpectralModel> {
        SpectralModel::new(self.geometry.d, self.geometry.cutoff, self.kind, self.geometry.oversample)
    }

    pub fn assemble(&self, model: &SpectralModel) -> Result<DampingOperator> {
        let g = assemble(&self.spec, model)?;
        Ok(match self.prediction.claimed_m {
            Some(m) => g.with_claimed_m(m),
            None => g,
        })
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetInfo {
    pub name: String,
    pub description: String,
    pub parameters: String,
    pub predicted_resolvent: String,
    pub predicted_rate: String,
}

fn range_error(name: &str, key: &str, value: f64, range: &str) -> Error {
    Error::Config(format!("{name}: {key} = {value} is outside the allowed range {range}"))
}

fn check_only(name: &str, params: &PresetParams, allowed: &[&str]) -> Result<()> {
    let set = [
        ("s", params.s.is_some()),
        ("a", params.a.is_some()),
        ("mean", params.mean.is_some()),
        ("amplitude", params.amplitude.is_some()),
        ("weights", params.weights.is_some()),
    ];
    match set.iter().find(|(k, on)| *on && !allowed.contains(k)) {
        Some((k, _)) => Err(Error::Config(format!("{name}: unknown parameter `{k}` (accepts: {})", allowed.join(", ")))),
        None => Ok(()),
    }
}

fn geometry(d: usize, cutoff: usize, oversample: usize) -> Geometry {
    Geometry { d, cutoff, oversample }
}

fn resolvent_text(e: Option<f64>) -> String {
    match e {
        None => "unbounded (eigenvalues on the axis)".into(),
        Some(e) if e == 0.0 => "bounded".into(),
        Some(e) => format!("~ λ^{e}"),
    }
}

/// Builds preset `name`; parameter ranges are checked here.
pub fn preset(name: &str, params: &PresetParams) -> Result<Preset> {
    let mut p = params.clone();
    let (description, geometry, kind, spec, prediction) = match name {
        "water-constant" => {
            check_only(name, &p, &["a"])?;
            let a = p.a.unwrap_or(1.0);
            p.a = Some(a);
            if !(a > 0.0 && a.is_finite()) {
                return Err(range_error(name, "a", a, "(0, ∞)"));
            }
            (
                "linearised water waves, constant damping a",
                geometry(1, 512, 4),
                OperatorKind::HalfLaplacian,
                DampingSpec::WaterWave(Coefficient::Constant(a)),
                Prediction {
                    claimed_m: Some(MFunction::ONE),
                    resolvent_exponent: Some(0.0),
                    decay: DecayPrediction::Exponential,
                    rate: "exponential".into(),
                    bounded_m: MFunction::power(2.0),
                },
            )
        }
        "water-degenerate" => {
            check_only(name, &p, &["s"])?;
            let s = p.s.unwrap_or(0.25);
            p.s = Some(s);
            if !(0.0..0.5).contains(&s) {
                return Err(range_error(name, "s", s, "[0, 1/2)"));
            }
            (
                "linearised water waves, damping |x|^{2s} vanishing at the origin",
                geometry(1, 512, 4),
                OperatorKind::HalfLaplacian,
                DampingSpec::WaterWave(Coefficient::AbsPower { exponent: 2.0 * s }),
                Prediction {
                    claimed_m: Some(if s == 0.0 { MFunction::ONE } else { MFunction::power(1.0 - 2.0 * s) }),
                    resolvent_exponent: Some(0.0),
                    decay: DecayPrediction::Exponential,
                    rate: "exponential for p ≥ d (a^{-1} ∈ L^p)".into(),
                    bounded_m: MFunction::power(2.0),
                },
            )
        }
        "dw-fractional" => {
            check_only(name, &p, &["s"])?;
            let s = p.s.unwrap_or(-0.25);
            p.s = Some(s);
            if !(s <= 0.5 && s.is_finite()) {
                return Err(range_error(name, "s", s, "(-∞, 1/2]"));
            }
            let (decay, rate) = if s < 0.0 {
                let beta = -1.0 / (4.0 * s);
                (DecayPrediction::Polynomial { beta }, format!("⟨t⟩^{{1/(4s)}} = ⟨t⟩^-{beta} on data in the domain"))
            } else {
                (DecayPrediction::Exponential, "exponential".into())
            };
            (
                "damped wave with a⟨Δ⟩^s, a ≡ 1",
                geometry(1, 512, 4),
                OperatorKind::Laplacian,
                DampingSpec::FourierWeight { order: s, coefficient: Coefficient::Constant(1.0) },
                Prediction {
                    claimed_m: Some(MFunction::power(4.0 * s)),
                    resolvent_exponent: Some((-4.0 * s).max(0.0)),
                    decay,
                    rate,
                    bounded_m: MFunction::power(4.0 * s),
                },
            )
        }
        "kelvin-voigt" => {
            check_only(name, &p, &["mean", "amplitude"])?;
            let mean = p.mean.unwrap_or(1.0);
            let amplitude = p.amplitude.unwrap_or(0.0);
            (p.mean, p.amplitude) = (Some(mean), Some(amplitude));
            if !(mean > amplitude.abs() && mean.is_finite()) {
                return Err(Error::Config(format!(
                    "{name}: need mean > |amplitude| so b is bounded below, got mean = {mean}, amplitude = {amplitude}"
                )));
            }
            let b = if amplitude == 0.0 {
                Coefficient::Constant(mean)
            } else {
                Coefficient::Cosine { mean, amplitude, wavenumber: 1 }
            };
            (
                "Kelvin–Voigt viscoelastic damping ∇*b∇",
                geometry(1, 256, 4),
                OperatorKind::Laplacian,
                DampingSpec::KelvinVoigt(b),
                Prediction {
                    claimed_m: Some(MFunction::power(2.0)),
                    resolvent_exponent: Some(0.0),
                    decay: DecayPrediction::Exponential,
                    rate: "exponential".into(),
                    bounded_m: MFunction::power(2.0),
                },
            )
        }
        "pdo-anisotropic" => {
            check_only(name, &p, &["s", "weights"])?;
            let s = p.s.unwrap_or(-0.25);
            p.s = Some(s);
            if !(s <= 0.5 && s.is_finite()) {
                return Err(range_error(name, "s", s, "(-∞, 1/2]"));
            }
            let weights = p.weights.clone().unwrap_or_else(|| vec![1.0, 4.0]);
            p.weights = Some(weights.clone());
            if weights.len() != 2 || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                return Err(Error::Config(format!("{name}: weights must be two positive numbers, got {weights:?}")));
            }
            let (decay, rate) = if s < 0.0 {
                let beta = -1.0 / (4.0 * s);
                (DecayPrediction::Polynomial { beta }, format!("⟨t⟩^-{beta}"))
            } else {
                (DecayPrediction::Exponential, "exponential".into())
            };
            (
                "anisotropic diagonal symbol (1 + Σ w_i ξ_i²)^{2s} on the 2-torus",
                geometry(2, 32, 4),
                OperatorKind::Laplacian,
                DampingSpec::FourierMultiplier(Symbol::Anisotropic { weights, exponent: 2.0 * s }),
                Prediction {
                    claimed_m: Some(MFunction::power(4.0 * s)),
                    resolvent_exponent: Some((-4.0 * s).max(0.0)),
                    decay,
                    rate,
                    bounded_m: MFunction::power(4.0 * s),
                },
            )
        }
        "undamped" => {
            check_only(name, &p, &[])?;
            (
                "no damping",
                geometry(1, 256, 4),
                OperatorKind::Laplacian,
                DampingSpec::zero(),
                Prediction {
                    claimed_m: None,
                    resolvent_exponent: None,
                    decay: DecayPrediction::None,
                    rate: "none (energy conserved)".into(),
                    bounded_m: MFunction::ONE,
                },
            )
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(Preset { name: name.to_string(), description: description.to_string(), geometry, kind, spec, params: p, prediction })
}

pub fn list_presets() -> Vec<PresetInfo> {
    let parameters = |name: &str| -> &'static str {
        match name {
            "water-constant" => "a > 0 (default 1); d=1, K=512, P=Δ^{1/2}",
            "water-degenerate" => "s ∈ [0, 1/2) (default 1/4); d=1, K=512, P=Δ^{1/2}",
            "dw-fractional" => "s ≤ 1/2 (default -1/4); d=1, K=512, P=Δ",
            "kelvin-voigt" => "b = mean + amplitude·cos(πx), mean > |amplitude| (default 1, 0); d=1, K=256, P=Δ",
            "pdo-anisotropic" => "s ≤ 1/2 (default -1/4), weights (default [1, 4]); d=2, K=32, P=Δ",
            _ => "none; d=1, K=256, P=Δ",
        }
    };
    PRESET_NAMES
        .iter()
        .map(|&name| {
            let p = preset(name, &PresetParams::default()).expect("defaults are valid");
            PresetInfo {
                name: name.to_string(),
                description: p.description,
                parameters: parameters(name).to_string(),
                predicted_resolvent: resolvent_text(p.prediction.resolvent_exponent),
                predicted_rate: p.prediction.rate,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_contents() {
        let t = list_presets();
        let wd = t.iter().find(|p| p.name == "water-degenerate").unwrap();
        assert!(wd.predicted_rate.contains("exponential for p ≥ d"));
        let kv = t.iter().find(|p| p.name == "kelvin-voigt").unwrap();
        assert_eq!(kv.predicted_rate, "exponential");
        assert_eq!(t.len(), PRESET_NAMES.len());
    }

    #[test]
    fn dw_fractional_prediction() {
        let p = preset("dw-fractional", &PresetParams { s: Some(-0.25), ..Default::default() }).unwrap();
        assert_eq!(p.prediction.claimed_m, Some(MFunction::power(-1.0)));
        assert_eq!(p.prediction.resolvent_exponent, Some(1.0));
        assert_eq!(p.prediction.decay, DecayPrediction::Polynomial { beta: 1.0 });
    }

    #[test]
    fn range_errors() {
        let e = preset("water-degenerate", &PresetParams { s: Some(0.6), ..Default::default() }).unwrap_err();
        assert!(e.to_string().contains("[0, 1/2)"), "{e}");
        assert!(matches!(preset("nope", &PresetParams::default()), Err(Error::UnknownPreset(_))));
        let e = preset("undamped", &PresetParams { s: Some(0.1), ..Default::default() }).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn claimed_m_matches_assembly() {
        for name in PRESET_NAMES {
            let p = preset(name, &PresetParams::default()).unwrap();
            let small = Geometry { cutoff: 6, ..p.geometry };
            let p = p.with_geometry(small);
            let model = p.model().unwrap();
            let g = assemble(&p.spec, &model).unwrap();
            if let Some(m) = p.prediction.claimed_m {
                assert_eq!(g.claimed_m, m, "{name}");
            }
        }
    }
}
