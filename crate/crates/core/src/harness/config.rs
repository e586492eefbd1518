//! Plain-text sweep configuration: `key = value` lines under `[section]`
//! headers, `#`/`;` comments. The full grammar is documented in the README.

use crate::signal::ConstellationKind;

use super::{ParamMode, PrecoderKind, SweepConfig};

/// Parse failure with the offending line number (1-based).
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

/// Parses sweep configuration text into a validated [`SweepConfig`].
pub fn parse_sweep_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let mut cfg = SweepConfig::default();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find(['#', ';']) {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return err(lineno, "unterminated section header");
            };
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(lineno, format!("expected `key = value`, got `{line}`"));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        apply(&mut cfg, &section, &key, value, lineno)?;
    }
    cfg.validate().map_err(|message| ConfigError { line: 0, message })?;
    Ok(cfg)
}

fn apply(
    cfg: &mut SweepConfig,
    section: &str,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<(), ConfigError> {
    match (section, key) {
        ("system", "antennas" | "b") => cfg.antennas = parse_num(value, lineno)?,
        ("system", "users" | "u") => cfg.users = parse_num(value, lineno)?,
        ("system", "constellation" | "mod") => {
            cfg.constellation = ConstellationKind::parse(value)
                .ok_or(())
                .or_else(|_| err(lineno, format!("unknown constellation `{value}`")))?;
        }
        ("system", "power") => {
            if value.eq_ignore_ascii_case("auto") {
                cfg.power = None;
            } else {
                cfg.power = Some(parse_float(value, lineno)?);
            }
        }
        ("sweep", "rho_db") => cfg.rho_db_grid = parse_grid(value, lineno)?,
        ("sweep", "trials") => cfg.trials = parse_num(value, lineno)?,
        ("sweep", "seed") => cfg.seed = parse_num(value, lineno)?,
        ("sweep", "threads") => cfg.threads = parse_num(value, lineno)?,
        ("precoders", "list") => {
            let mut list = Vec::new();
            for part in value.split(',') {
                let name = part.trim();
                if name.is_empty() {
                    continue;
                }
                let Some(kind) = PrecoderKind::parse(name) else {
                    return err(lineno, format!("unknown precoder `{name}`"));
                };
                list.push(kind);
            }
            cfg.precoders = list;
        }
        ("precoders", "t_max") => cfg.t_max = parse_num(value, lineno)?,
        ("precoders", "params") => {
            cfg.param_mode = match value.to_ascii_lowercase().as_str() {
                "auto" => ParamMode::Auto,
                "robust" => ParamMode::Robust,
                "hardware" => ParamMode::Hardware,
                "tuned" => ParamMode::Tuned,
                other => return err(lineno, format!("unknown params mode `{other}`")),
            };
        }
        ("params", "gamma") => cfg.overrides.gamma = Some(parse_float(value, lineno)?),
        ("params", "delta") => cfg.overrides.delta = Some(parse_float(value, lineno)?),
        ("params", "tau") => cfg.overrides.tau = Some(parse_float(value, lineno)?),
        _ => {
            return err(
                lineno,
                format!("unknown key `{key}` in section `[{section}]`"),
            )
        }
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(value: &str, lineno: usize) -> Result<T, ConfigError> {
    value
        .parse::<T>()
        .or_else(|_| err(lineno, format!("invalid integer `{value}`")))
}

fn parse_float(value: &str, lineno: usize) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .or_else(|_| err(lineno, format!("invalid number `{value}`")))
}

/// Either a comma list (`0, 2, 4`) or an inclusive range `start:step:stop`.
fn parse_grid(value: &str, lineno: usize) -> Result<Vec<f64>, ConfigError> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return err(lineno, "range must be start:step:stop");
        }
        let start = parse_float(parts[0].trim(), lineno)?;
        let step = parse_float(parts[1].trim(), lineno)?;
        let stop = parse_float(parts[2].trim(), lineno)?;
        if step <= 0.0 {
            return err(lineno, "range step must be positive");
        }
        let mut grid = Vec::new();
        let mut k = 0u32;
        loop {
            let v = start + step * k as f64;
            if v > stop + 1e-9 {
                break;
            }
            grid.push(v);
            k += 1;
        }
        Ok(grid)
    } else {
        value
            .split(',')
            .map(|p| parse_float(p.trim(), lineno))
            .collect()
    }
}
