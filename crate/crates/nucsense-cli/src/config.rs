//! Simulate-command configuration: a single JSON document, dotted-path
//! overrides from the command line, and a seed override from NUCSENSE_SEED.

use serde::{Deserialize, Serialize};

use nucsense::bloch::PulseMode;
use nucsense::experiments::{SystemSpec, TrainSpec};
use nucsense::spin::{DriveField, Waveform};
use nucsense::{Error, Result};

/// Engine selector for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimEngine {
    Quantum,
    Bloch,
    Analytic,
    Aht,
}

/// Drive section of the simulate config.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Amplitude in tesla.
    pub amplitude: f64,
    #[serde(flatten)]
    pub waveform: WaveformSpec,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WaveformSpec {
    Dc,
    Sine {
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Square {
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Chirp {
        f_ini: f64,
        span: f64,
        duration: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl DriveSpec {
    pub fn build(&self) -> Result<DriveField> {
        let waveform = match self.waveform {
            WaveformSpec::Dc => Waveform::Dc,
            WaveformSpec::Sine { frequency, phase } => Waveform::Sine { frequency, phase },
            WaveformSpec::Square { frequency, phase } => Waveform::Square { frequency, phase },
            WaveformSpec::Chirp {
                f_ini,
                span,
                duration,
                phase,
            } => Waveform::Chirp {
                f_ini,
                span,
                duration,
                phase,
            },
        };
        DriveField::new(self.amplitude, waveform)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub engine: SimEngine,
    #[serde(default)]
    pub seed: u64,
    pub train: TrainSpec,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default)]
    pub k_dd: f64,
    pub drive: DriveSpec,
    #[serde(default = "default_window")]
    pub decompose_window: f64,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
    #[serde(default)]
    pub pulse_mode: Option<PulseMode>,
    /// When set for the bloch engine, keep every n-th integration step and
    /// write the sampled trajectory to trajectory.csv.
    #[serde(default)]
    pub sample_stride: Option<usize>,
}

fn default_window() -> f64 {
    73e-3
}

fn default_steps() -> usize {
    2000
}

impl SimulateConfig {
    /// Structural validation past what serde enforces; returns field-level
    /// messages.
    pub fn validate(&self) -> Result<()> {
        self.train
            .build()
            .map_err(|e| Error::invalid("train", e.to_string()))?;
        self.drive
            .build()
            .map_err(|e| Error::invalid("drive", e.to_string()))?;
        if self.decompose_window < 3.0 * self.train.tau {
            return Err(Error::invalid(
                "decompose_window",
                format!(
                    "window {} s must be at least 3 tau = {} s",
                    self.decompose_window,
                    3.0 * self.train.tau
                ),
            ));
        }
        if self.steps_per_period < 100 {
            return Err(Error::invalid(
                "steps_per_period",
                "needs at least 100 steps",
            ));
        }
        Ok(())
    }
}

/// Parse `path=value` overrides and apply them to a JSON document; values
/// parse as JSON scalars with a string fallback.
pub fn apply_overrides(doc: &mut serde_json::Value, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (path, raw) = ov.split_once('=').ok_or_else(|| {
            Error::invalid("override", format!("{ov:?} is not of the form path=value"))
        })?;
        let value: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut cursor = &mut *doc;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            if i + 1 == parts.len() {
                cursor
                    .as_object_mut()
                    .ok_or_else(|| {
                        Error::invalid("override", format!("{path}: parent is not an object"))
                    })?
                    .insert(part.to_string(), value.clone());
            } else {
                cursor = cursor
                    .as_object_mut()
                    .ok_or_else(|| {
                        Error::invalid("override", format!("{path}: parent is not an object"))
                    })?
                    .entry(part.to_string())
                    .or_insert_with(|| serde_json::json!({}));
            }
        }
    }
    Ok(())
}

/// Apply the NUCSENSE_SEED environment override to a config document.
pub fn apply_env_seed(doc: &mut serde_json::Value) -> Result<()> {
    if let Ok(s) = std::env::var("NUCSENSE_SEED") {
        let seed: u64 = s
            .parse()
            .map_err(|_| Error::invalid("NUCSENSE_SEED", format!("{s:?} is not a u64")))?;
        if let Some(obj) = doc.as_object_mut() {
            obj.insert("seed".into(), serde_json::json!(seed));
        }
    }
    Ok(())
}

/// Deserialize with field-path diagnostics.
pub fn from_document<T: serde::de::DeserializeOwned>(doc: serde_json::Value) -> Result<T> {
    let text = serde_json::to_string(&doc)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut path_track = String::new();
    match serde_path_to_error_lite(de, &mut path_track) {
        Ok(v) => Ok(v),
        Err(e) => Err(Error::invalid(
            "config",
            if path_track.is_empty() {
                e
            } else {
                format!("at {path_track}: {e}")
            },
        )),
    }
}

// Minimal field-path tracking: deserialize to Value first, then to T, and on
// failure probe which top-level key fails. Keeps the dependency set small.
fn serde_path_to_error_lite<'de, T: serde::de::DeserializeOwned>(
    de: &mut serde_json::Deserializer<serde_json::de::StrRead<'de>>,
    path_out: &mut String,
) -> std::result::Result<T, String> {
    let value: serde_json::Value = match serde::Deserialize::deserialize(de) {
        Ok(v) => v,
        Err(e) => return Err(e.to_string()),
    };
    match serde_json::from_value::<T>(value.clone()) {
        Ok(v) => Ok(v),
        Err(e) => {
            // Probe object fields one at a time for a better message.
            if let serde_json::Value::Object(map) = &value {
                for key in map.keys() {
                    let mut probe = value.clone();
                    probe.as_object_mut().unwrap().remove(key);
                    if serde_json::from_value::<T>(probe).err().map(|p| p.to_string())
                        != Some(e.to_string())
                    {
                        path_out.push_str(key);
                        break;
                    }
                }
            }
            Err(e.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "engine": "quantum",
            "train": {"theta": std::f64::consts::FRAC_PI_2, "tau": 73e-6, "n_pulses": 100},
            "drive": {"kind": "sine", "amplitude": 1e-6, "frequency": 2760.0}
        })
    }

    #[test]
    fn minimal_config_parses() {
        let cfg: SimulateConfig = from_document(minimal()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn theta_pi_rejected_with_message() {
        let mut doc = minimal();
        apply_overrides(&mut doc, &["train.theta=3.141592653589793".into()]).unwrap();
        let cfg: SimulateConfig = from_document(doc).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("pi"), "message: {err}");
    }

    #[test]
    fn window_budget_rejected() {
        let mut doc = minimal();
        apply_overrides(&mut doc, &["train.t_p=5e-5".into(), "train.t_acq=5e-5".into()]).unwrap();
        let cfg: SimulateConfig = from_document(doc).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("t_p"), "message: {err}");
    }

    #[test]
    fn chirp_missing_fields_rejected() {
        let mut doc = minimal();
        doc["drive"] = serde_json::json!({"kind": "chirp", "amplitude": 1e-6, "f_ini": 1000.0});
        let err = from_document::<SimulateConfig>(doc).unwrap_err().to_string();
        assert!(err.contains("span") || err.contains("chirp") || err.contains("missing"), "{err}");
    }

    #[test]
    fn overrides_walk_dotted_paths() {
        let mut doc = minimal();
        apply_overrides(
            &mut doc,
            &["seed=42".into(), "drive.frequency=3000.0".into(), "system.n_spins=3".into()],
        )
        .unwrap();
        let cfg: SimulateConfig = from_document(doc).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.system.n_spins, 3);
        match cfg.drive.waveform {
            WaveformSpec::Sine { frequency, .. } => assert_eq!(frequency, 3000.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
