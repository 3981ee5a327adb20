//! Flat `key = value` configuration with dotted section prefixes. Every
//! valid key is listed in one registry so typos fail loudly instead of
//! silently falling back to defaults.

use std::fmt;

/// All keys any command understands. One config file can carry several
/// sections; each command reads only the sections it needs.
pub const KEYS: &[&str] = &[
    "sunlight.directions",
    "sunlight.intensity",
    "sunlight.grid_h",
    "sunlight.grid_extent",
    "harvest.sigma",
    "harvest.a",
    "harvest.b",
    "harvest.kappa",
    "harvest.m",
    "harvest.grid_l",
    "harvest.grid_h",
    "harvest.solve_tol",
    "harvest.solve_max_iter",
    "branches.alpha",
    "branches.c",
    "branches.dim",
    "branches.lattice_spacing",
    "branches.lattice_radius",
    "branches.mass_quantum",
    "branches.budget",
    "branches.tree_budget",
    "branches.seed",
    "branches.anneal_t0",
    "branches.anneal_cooling",
    "roots.alpha",
    "roots.c",
    "roots.dim",
    "roots.lattice_spacing",
    "roots.lattice_radius",
    "roots.mass_quantum",
    "roots.budget",
    "roots.tree_budget",
    "roots.seed",
    "roots.anneal_t0",
    "roots.anneal_cooling",
];

/// Problem with the configuration text itself; always an input error.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: Vec<(String, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = lineno + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {row}: expected key = value, got '{line}'")))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(ConfigError(format!("line {row}: key '{key}' has no value")));
            }
            Self::check_key(key, &format!("line {row}"))?;
            if entries.iter().any(|(k, _)| k == key) {
                return Err(ConfigError(format!("line {row}: duplicate key '{key}'")));
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(Config { entries })
    }

    fn check_key(key: &str, at: &str) -> Result<()> {
        if KEYS.contains(&key) {
            return Ok(());
        }
        let section = key.split('.').next().unwrap_or(key);
        let near: Vec<&str> = KEYS
            .iter()
            .filter(|k| k.starts_with(section))
            .copied()
            .collect();
        let hint = if near.is_empty() {
            "known sections: sunlight, harvest, branches, roots".to_string()
        } else {
            format!("keys in that section: {}", near.join(", "))
        };
        Err(ConfigError(format!("{at}: unknown key '{key}'; {hint}")))
    }

    /// Applies `key=value` override strings from the command line; keys are
    /// validated against the same registry and replace file values.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<()> {
        for s in sets {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("--set needs key=value, got '{s}'")))?;
            let key = key.trim();
            let value = value.trim();
            Self::check_key(key, "--set")?;
            self.entries.retain(|(k, _)| k != key);
            self.entries.push((key.to_string(), value.to_string()));
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, ty: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError(format!("key '{key}': expected {ty}, got '{v}'"))),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed::<f64>(key, "a number")?.unwrap_or(default))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.parsed::<f64>(key, "a number")
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?.ok_or_else(|| ConfigError(format!("missing required key '{key}'")))
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed::<usize>(key, "a nonnegative integer")?.unwrap_or(default))
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed::<u64>(key, "a nonnegative integer")?.unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_blanks() {
        let cfg = Config::parse(
            "# exposure side\nsunlight.directions = 32\n\nbranches.alpha = 0.8\nbranches.c=2.5\n",
        )
        .unwrap();
        assert_eq!(cfg.usize("sunlight.directions", 64).unwrap(), 32);
        assert_eq!(cfg.require_f64("branches.alpha").unwrap(), 0.8);
        assert_eq!(cfg.require_f64("branches.c").unwrap(), 2.5);
        assert_eq!(cfg.f64("harvest.sigma", 1.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = Config::parse("branches.alhpa = 0.8\n").unwrap_err();
        assert!(err.0.contains("unknown key 'branches.alhpa'"), "{err}");
        let err = Config::parse("branches.c = 1\nbranches.c = 2\n").unwrap_err();
        assert!(err.0.contains("duplicate key"), "{err}");
    }

    #[test]
    fn rejects_bad_values_and_missing_required() {
        let cfg = Config::parse("branches.c = fast\n").unwrap();
        assert!(cfg.require_f64("branches.c").is_err());
        let cfg = Config::parse("").unwrap();
        assert!(cfg.require_f64("branches.c").unwrap_err().0.contains("missing required key"));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut cfg = Config::parse("branches.c = 1.0\n").unwrap();
        cfg.apply_overrides(&["branches.c=4.0".to_string()]).unwrap();
        assert_eq!(cfg.require_f64("branches.c").unwrap(), 4.0);
        assert!(cfg.apply_overrides(&["branches.speed=9".to_string()]).is_err());
    }
}
