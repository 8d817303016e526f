//! Resolution of run parameters from command-line flags, a configuration
//! file and defaults, in that order of precedence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;

use xmerge::spline::Lambda;
use xmerge::Error;

use crate::io::ConfigFile;
use crate::CliError;

/// A penalty given as `gcv` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaArg(pub Lambda);

impl FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("gcv") {
            return Ok(LambdaArg(Lambda::Gcv));
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(LambdaArg(Lambda::Fixed(v))),
            _ => Err(format!("expected 'gcv' or a positive number, found '{s}'")),
        }
    }
}

impl Display for LambdaArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Lambda::Gcv => write!(f, "gcv"),
            Lambda::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Parameters seen so far, with the configuration entries not yet consumed.
pub struct Resolver {
    file: ConfigFile,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: Option<ConfigFile>) -> Self {
        Resolver {
            file: file.unwrap_or_default(),
            used: BTreeSet::new(),
            resolved: BTreeMap::new(),
        }
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        match self.file.entries.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Lib(Error::Parse {
                    file: self.file.path.clone(),
                    line: *line,
                    message: format!("invalid value for '{key}': {e}"),
                })
            }),
        }
    }

    pub fn value<T>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.file_value::<T>(key)?;
        let v = cli.or(from_file).unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn optional<T>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.file_value::<T>(key)?;
        let v = cli.or(from_file);
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, cli: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.optional(key, cli)?
            .ok_or_else(|| CliError::Usage(format!("missing required parameter '{key}'")))
    }

    /// Comma-separated list; a non-empty command-line list replaces the file's.
    pub fn list<T>(&mut self, key: &str, cli: Vec<T>, default: Vec<T>) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        let v = if !cli.is_empty() {
            cli
        } else if let Some((raw, line)) = self.file.entries.get(key) {
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>().map_err(|e| {
                        CliError::Lib(Error::Parse {
                            file: self.file.path.clone(),
                            line: *line,
                            message: format!("invalid value for '{key}': {e}"),
                        })
                    })
                })
                .collect::<Result<_, _>>()?
        } else {
            default
        };
        if !v.is_empty() {
            let joined = v
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            self.resolved.insert(key.to_string(), joined);
        }
        Ok(v)
    }

    /// Boolean switch: `Some(_)` from the command line wins.
    pub fn flag(&mut self, key: &str, cli: Option<bool>, default: bool) -> Result<bool, CliError> {
        self.value(key, cli, default)
    }

    /// Resolved parameters; errors on configuration keys never asked for.
    pub fn finish(self) -> Result<BTreeMap<String, String>, CliError> {
        let unknown: Vec<&String> = self
            .file
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if let Some(k) = unknown.first() {
            let (_, line) = &self.file.entries[*k];
            return Err(CliError::Usage(format!(
                "{}:{}: unknown configuration key '{}'",
                self.file.path, line, k
            )));
        }
        Ok(self.resolved)
    }
}

/// `true` when `on` was given, `false` when `off` was given, else `None`.
pub fn switch(on: bool, off: bool) -> Option<bool> {
    match (on, off) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    }
}
