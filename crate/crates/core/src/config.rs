//! Plain-text `key = value` overrides for [`SolverConfig`].

use std::path::Path;

use crate::driver::{Mode, SolverConfig};
use crate::error::{ArpError, Result};

fn parse<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| ArpError::Parse(format!("line {line}: invalid value {value:?} for {key}")))
}

/// Applies overrides to `base`. Blank lines and `#` comments are ignored;
/// unknown keys are errors. The result is validated.
pub fn apply_overrides(base: SolverConfig, text: &str) -> Result<SolverConfig> {
    let mut c = base;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ArpError::Parse(format!("line {line}: expected key = value, got {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "p" => c.p = parse(key, value, line)?,
            "q" => c.q = parse(key, value, line)?,
            "beta" => c.beta = parse(key, value, line)?,
            "epsilon" | "eps" => c.epsilon = parse(key, value, line)?,
            "delta_init" => c.delta_init = parse(key, value, line)?,
            "varpi" => c.varpi = parse(key, value, line)?,
            "theta" => c.theta = parse(key, value, line)?,
            "eta1" => c.eta1 = parse(key, value, line)?,
            "eta2" => c.eta2 = parse(key, value, line)?,
            "gamma1" => c.gamma1 = parse(key, value, line)?,
            "gamma2" => c.gamma2 = parse(key, value, line)?,
            "gamma3" => c.gamma3 = parse(key, value, line)?,
            "sigma0" => c.sigma0 = parse(key, value, line)?,
            "sigma_min" => c.sigma_min = parse(key, value, line)?,
            "max_iterations" => c.max_iterations = parse(key, value, line)?,
            "mode" => {
                c.mode = match value {
                    "adaptive" => Mode::Adaptive,
                    "prescribed" => Mode::Prescribed(vec![c.sigma0]),
                    _ => return Err(ArpError::Parse(format!("line {line}: mode must be adaptive or prescribed"))),
                }
            }
            "sigma_sequence" => {
                let seq = value.split(',').map(|v| parse(key, v.trim(), line)).collect::<Result<Vec<f64>>>()?;
                c.mode = Mode::Prescribed(seq);
            }
            _ => return Err(ArpError::Parse(format!("line {line}: unknown key {key:?}"))),
        }
    }
    c.validated()
}

pub fn load_config(path: &Path, base: SolverConfig) -> Result<SolverConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| ArpError::io(path, e))?;
    apply_overrides(base, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let base = SolverConfig::new(2, 1, 0.1).unwrap();
        let c = apply_overrides(base.clone(), "# comment\n eta1 = 0.1 \n\ntheta=5 # trailing\nsigma_sequence = 2, 4\n").unwrap();
        assert_eq!((c.eta1, c.theta), (0.1, 5.0));
        assert_eq!(c.mode, Mode::Prescribed(vec![2.0, 4.0]));
        assert!(apply_overrides(base.clone(), "bogus = 1").is_err());
        assert!(apply_overrides(base.clone(), "eta1").is_err());
        assert!(matches!(apply_overrides(base, "gamma1 = 2"), Err(ArpError::InvalidConfig(_))));
    }
}
