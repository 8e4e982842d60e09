//! Flat `key = value` run files with `[section]` headers, and the resolved
//! run specification handed to each subcommand.
//!
//! Keys before the first header apply to every subcommand; a section named
//! after a subcommand overrides them. A report written by this crate embeds
//! its spec as `# `-prefixed lines after the `# ipsdual-csv v1` marker and
//! can be fed back as a run file.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::CliError;

pub const CSV_MARKER: &str = "# ipsdual-csv v1";

/// Parsed run file: section name ("" for the global part) to key/value map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines: Vec<&str> = text.lines().collect();
        if lines.first().map(|l| l.trim_end()) == Some(CSV_MARKER) {
            lines = lines[1..]
                .iter()
                .take_while(|l| l.starts_with('#'))
                .filter(|l| !l.starts_with("#@"))
                .map(|l| l.trim_start_matches('#').trim())
                .collect();
        }
        let mut out = ConfigFile::default();
        let mut section = String::new();
        for (no, raw) in lines.iter().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("line {}: unterminated section header", no + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", no + 1)));
            }
            out.sections.entry(section.clone()).or_default().insert(k.to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    /// Global keys overlaid with the section of `command`.
    pub fn for_command(&self, command: &str) -> BTreeMap<String, String> {
        let mut m = self.sections.get("").cloned().unwrap_or_default();
        if let Some(s) = self.sections.get(command) {
            m.extend(s.clone());
        }
        m
    }
}

/// Fully resolved parameters of one subcommand run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

impl RunSpec {
    pub fn new(command: &str, values: BTreeMap<String, String>) -> Self {
        Self { command: command.to_string(), values }
    }

    pub fn str(&self, key: &str) -> Result<&str, CliError> {
        self.values.get(key).map(|s| s.as_str()).ok_or_else(|| CliError::Spec(format!("missing key `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        let s = self.str(key)?;
        s.parse::<T>().map_err(|e| CliError::Spec(format!("`{key} = {s}`: {e}")))
    }

    /// Comma-separated list; empty string gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        let s = self.str(key)?;
        s.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse::<T>().map_err(|e| CliError::Spec(format!("`{key}` entry `{x}`: {e}"))))
            .collect()
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.str(key)? {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::Spec(format!("`{key} = {other}` is not a boolean"))),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Section text that reproduces this spec when parsed back.
    pub fn to_config(&self) -> String {
        let mut s = format!("[{}]\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_override_globals() {
        let c = ConfigFile::parse("seed = 3\nn = 2\n\n[stationary]\nn = 4 \n# note\n[other]\nn = 9\n").unwrap();
        let m = c.for_command("stationary");
        assert_eq!(m["seed"], "3");
        assert_eq!(m["n"], "4");
        assert_eq!(c.for_command("absorption")["n"], "2");
    }

    #[test]
    fn rejects_garbage() {
        assert!(ConfigFile::parse("just words").is_err());
        assert!(ConfigFile::parse("[open").is_err());
        assert!(ConfigFile::parse("= 3").is_err());
    }

    #[test]
    fn report_header_round_trip() {
        let mut spec = RunSpec::new("correlate", BTreeMap::new());
        spec.set("n", 3);
        spec.set("sites", "1,3");
        let text = format!(
            "{CSV_MARKER}\n#@ ipsdual 0.1.0\n{}route,value\ndirect,0.5\n",
            spec.to_config().lines().map(|l| format!("# {l}\n")).collect::<String>()
        );
        let c = ConfigFile::parse(&text).unwrap();
        assert_eq!(c.for_command("correlate"), spec.values);
        let back = RunSpec::new("correlate", c.for_command("correlate"));
        assert_eq!(back.list::<usize>("sites").unwrap(), vec![1, 3]);
    }
}
