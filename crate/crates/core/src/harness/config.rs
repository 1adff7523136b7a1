//! Configuration file loading: a TOML document whose keys mirror
//! [`SimConfig`](super::SimConfig) exactly; unknown keys are rejected.

use super::SimConfig;
use crate::{Error, Result};
use std::path::Path;

/// Parses a configuration document. Semantic validation happens separately
/// (via [`SimConfig::validate`]) so command-line overrides can be applied
/// first.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))
}

/// Reads and parses a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcode::Mode;
    use crate::harness::{Detector, Scheme};

    const BASE: &str = r#"
        mode = "sc"
        scheme = "dpsk"
        u = 32
        k = 2
        n = 64
        n_s = 2
        n_d = 2
        m = 8
        q_b = 1
        snr_grid_db = [0.0, 5.0]
        trials = 100
        seed = 42

        [channel]
        ts = 5e-8
        tau_rms = 5e-8
    "#;

    #[test]
    fn parses_minimal_config() {
        let config = parse_config(BASE).unwrap();
        assert_eq!(config.mode, Mode::Sc);
        assert_eq!(config.scheme, Scheme::Dpsk);
        assert_eq!(config.u, 32);
        assert_eq!(config.a, 2.0);
        assert_eq!(config.ser_threshold, 0.05);
        assert_eq!(config.min_bit_errors, 100);
        assert_eq!(config.detector(), Detector::Decoupled);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{BASE}\nbogus_knob = 3\n");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let text = BASE.replace("tau_rms = 5e-8", "tau_rms = 5e-8\nbogus = 1");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn rejects_detector_key_in_file() {
        let text = format!("{BASE}\ndetector = \"ml\"\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        let text = BASE.replace("q_b = 1", "q_b = 5");
        assert!(parse_config(&text).unwrap().validate().is_err());
        let text = BASE.replace("n = 64", "n = 63");
        assert!(parse_config(&text).unwrap().validate().is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_config("/nonexistent/config.toml").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
