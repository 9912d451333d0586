//! Pipeline configuration: a `key = value` file, then `STANDOFF_*`
//! environment overrides, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use standoff::concepts::{LexiconPaths, DEFAULT_MAX_PHRASE_TOKENS};
use standoff::graph::DEFAULT_MAX_NODES;
use standoff::inline::OffsetConvention;
use thiserror::Error;

pub const ENV_PREFIX: &str = "STANDOFF_";
pub const DEFAULT_STORE: &str = "standoff.db";
/// Read when no `--config` is given and the file exists.
pub const DEFAULT_CONFIG_FILE: &str = "standoff.conf";

pub const KEYS: [&str; 12] = [
    "store",
    "guideline",
    "lexicon.terms",
    "lexicon.tuis",
    "lexicon.pos",
    "lexicon.function_words",
    "abbreviations",
    "max_phrase_tokens",
    "min_support",
    "max_nodes",
    "convention",
    "jobs",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: expected `key = value`")]
    Syntax { origin: String },
    #[error("{origin}: unknown key {key:?} (known keys: {known})", known = KEYS.join(", "))]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: invalid {key} {value:?}: {message}")]
    Value {
        origin: String,
        key: String,
        value: String,
        message: String,
    },
    #[error("{key} refers to {path}, which does not exist")]
    MissingPath { key: &'static str, path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    /// Store connection string.
    pub store: String,
    pub guideline: Option<PathBuf>,
    pub lexicon_terms: Option<PathBuf>,
    pub lexicon_tuis: Option<PathBuf>,
    pub lexicon_pos: Option<PathBuf>,
    pub lexicon_function_words: Option<PathBuf>,
    /// Sentence splitter abbreviation list, one per line.
    pub abbreviations: Option<PathBuf>,
    pub max_phrase_tokens: usize,
    pub min_support: usize,
    pub max_nodes: usize,
    pub convention: OffsetConvention,
    pub jobs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            store: DEFAULT_STORE.into(),
            guideline: None,
            lexicon_terms: None,
            lexicon_tuis: None,
            lexicon_pos: None,
            lexicon_function_words: None,
            abbreviations: None,
            max_phrase_tokens: DEFAULT_MAX_PHRASE_TOKENS,
            min_support: 2,
            max_nodes: DEFAULT_MAX_NODES,
            convention: OffsetConvention::default(),
            jobs: 1,
        }
    }
}

/// Environment variable overriding `key`: `lexicon.terms` becomes
/// `STANDOFF_LEXICON_TERMS`.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_ascii_uppercase().replace('.', "_"))
}

fn positive(origin: &str, key: &str, value: &str) -> Result<usize, ConfigError> {
    let bad = |message: &str| ConfigError::Value {
        origin: origin.into(),
        key: key.into(),
        value: value.into(),
        message: message.into(),
    };
    match value.parse::<usize>() {
        Ok(0) => Err(bad("must be positive")),
        Ok(n) => Ok(n),
        Err(e) => Err(bad(&e.to_string())),
    }
}

impl Config {
    /// Reads `file` (if any) over the defaults, then applies environment
    /// overrides from `env`. Does not validate paths; see [`Config::validate`].
    pub fn load<I>(file: Option<&Path>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut config = Config::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            let base = path.parent().unwrap_or(Path::new(""));
            config.apply_file(&text, &path.display().to_string(), base)?;
        }
        let env: Vec<(String, String)> = env.into_iter().collect();
        for key in KEYS {
            let name = env_name(key);
            if let Some((_, value)) = env.iter().find(|(k, _)| *k == name) {
                config.set(key, value.trim(), None, &format!("environment {name}"))?;
            }
        }
        Ok(config)
    }

    fn apply_file(&mut self, text: &str, file: &str, base: &Path) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let origin = format!("{file}:{}", n + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                origin: origin.clone(),
            })?;
            self.set(key.trim(), value.trim(), Some(base), &origin)?;
        }
        Ok(())
    }

    /// Sets one key. Relative paths are resolved against `base` when given.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>, origin: &str) -> Result<(), ConfigError> {
        let path = || {
            let p = PathBuf::from(value);
            match base {
                Some(b) if p.is_relative() && !b.as_os_str().is_empty() => Some(b.join(p)),
                _ => Some(p),
            }
        };
        match key {
            "store" => {
                // a bare relative file path follows the config file too
                let is_plain_path = !value.contains(':') && !Path::new(value).is_absolute();
                self.store = match base {
                    Some(b) if is_plain_path && !b.as_os_str().is_empty() => b.join(value).display().to_string(),
                    _ => value.to_string(),
                };
            }
            "guideline" => self.guideline = path(),
            "lexicon.terms" => self.lexicon_terms = path(),
            "lexicon.tuis" => self.lexicon_tuis = path(),
            "lexicon.pos" => self.lexicon_pos = path(),
            "lexicon.function_words" => self.lexicon_function_words = path(),
            "abbreviations" => self.abbreviations = path(),
            "max_phrase_tokens" => self.max_phrase_tokens = positive(origin, key, value)?,
            "min_support" => self.min_support = positive(origin, key, value)?,
            "max_nodes" => self.max_nodes = positive(origin, key, value)?,
            "jobs" => self.jobs = positive(origin, key, value)?,
            "convention" => {
                self.convention = value.parse().map_err(|message: String| ConfigError::Value {
                    origin: origin.into(),
                    key: key.into(),
                    value: value.into(),
                    message,
                })?
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin: origin.into(),
                    key: key.into(),
                })
            }
        }
        Ok(())
    }

    /// Every configured path must exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let paths = [
            ("guideline", &self.guideline),
            ("lexicon.terms", &self.lexicon_terms),
            ("lexicon.tuis", &self.lexicon_tuis),
            ("lexicon.pos", &self.lexicon_pos),
            ("lexicon.function_words", &self.lexicon_function_words),
            ("abbreviations", &self.abbreviations),
        ];
        for (key, path) in paths {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(ConfigError::MissingPath { key, path: p.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn lexicon_paths(&self) -> Option<LexiconPaths> {
        Some(LexiconPaths {
            terms: self.lexicon_terms.clone()?,
            tuis: self.lexicon_tuis.clone(),
            pos: self.lexicon_pos.clone(),
            function_words: self.lexicon_function_words.clone(),
        })
    }

    pub fn is_in_memory(&self) -> bool {
        self.store.trim().trim_start_matches("sqlite:").trim_start_matches("//") == ":memory:"
    }
}
