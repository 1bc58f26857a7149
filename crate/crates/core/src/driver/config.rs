//! `key = value` configuration files. Blank lines and `#` comments are
//! ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Point2;
use crate::problems::GaussianWells;

#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (String, usize)>,
    path: std::path::PathBuf,
}

const KNOWN_KEYS: &[&str] = &[
    "theta",
    "gamma",
    "max_dofs",
    "initial_n",
    "solver_tol",
    "tau_max",
    "backtrack_cap",
    "c_interp",
    "max_steps_per_loop",
    "gaussian_centers",
    "gaussian_amplitude",
    "gaussian_width",
    "gaussian_shift",
];

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<ConfigFile> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key = value, found `{line}`")))?;
            let key = k.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(parse_err(format!("unknown key `{key}`")));
            }
            entries.insert(key, (v.trim().to_string(), i + 1));
        }
        Ok(ConfigFile {
            entries,
            path: path.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigFile::parse(&text, path)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| Error::Parse {
                path: self.path.clone(),
                line: *line,
                msg: format!("bad value `{v}` for `{key}`"),
            }),
        }
    }

    fn reals(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    path: self.path.clone(),
                    line: *line,
                    msg: format!("bad number `{s}` in `{key}`"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Gaussian-well parameters, if any are set; unset ones keep defaults.
    pub fn gaussian_wells(&self) -> Result<Option<GaussianWells>> {
        let keys = ["gaussian_centers", "gaussian_amplitude", "gaussian_width", "gaussian_shift"];
        if !keys.iter().any(|k| self.entries.contains_key(*k)) {
            return Ok(None);
        }
        let mut g = GaussianWells::default();
        if let Some(c) = self.reals("gaussian_centers")? {
            if c.is_empty() || c.len() % 2 != 0 {
                return Err(Error::InvalidArgument(
                    "gaussian_centers needs an even, nonzero count of coordinates".into(),
                ));
            }
            g.centers = c.chunks(2).map(|p| Point2::new(p[0], p[1])).collect();
        }
        if let Some(a) = self.get("gaussian_amplitude")? {
            g.amplitude = a;
        }
        if let Some(w) = self.get::<f64>("gaussian_width")? {
            if !(w > 0.0) {
                return Err(Error::InvalidArgument(format!("gaussian_width {w} must be positive")));
            }
            g.width = w;
        }
        if let Some(s) = self.get("gaussian_shift")? {
            g.shift = s;
        }
        Ok(Some(g))
    }
}
