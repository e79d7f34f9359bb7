//! Flat `key = value` files with optional `[section]` headers.
//!
//! Keys before the first header are shared; a command reads its own section
//! first and falls back to the shared keys. `#` and `;` start comments.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        sections.insert(current.clone(), BTreeMap::new());
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section header", lineno + 1))?
                    .trim();
                if name.is_empty() {
                    bail!("line {}: empty section name", lineno + 1);
                }
                current = name.to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected 'key = value'", lineno + 1))?;
            let key = key.trim();
            if key.is_empty() {
                bail!("line {}: empty key", lineno + 1);
            }
            let section = sections.get_mut(&current).expect("section exists");
            if section.insert(key.to_string(), value.trim().to_string()).is_some() {
                bail!("line {}: duplicate key '{key}'", lineno + 1);
            }
        }
        Ok(Self { sections })
    }

    pub fn view<'a>(&'a self, section: &'a str) -> View<'a> {
        View { config: self, section }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Lookup scoped to one command.
pub struct View<'a> {
    config: &'a Config,
    section: &'a str,
}

impl View<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        let find = |s: &str| self.config.sections.get(s).and_then(|m| m.get(key)).map(String::as_str);
        find(self.section).or_else(|| find(""))
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key '{key}': cannot parse '{v}': {e}")))
            .transpose()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<T>().map_err(|e| anyhow!("config key '{key}': cannot parse '{item}': {e}"))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Fails on keys in this command's section that are not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        if let Some(section) = self.config.sections.get(self.section) {
            if let Some(key) = section.keys().find(|k| !allowed.contains(&k.as_str())) {
                bail!("unknown key '{key}' in section [{}]", self.section);
            }
        }
        Ok(())
    }
}
