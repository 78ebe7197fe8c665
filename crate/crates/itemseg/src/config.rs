//! TOML configuration file. Every key is optional; command-line flags and
//! environment variables override it, built-in defaults fill the rest.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//!
//! [edgar]
//! user_agent = "Example Research admin@example.com"
//! cache_dir = "cache"
//! rate_limit = 8.0
//!
//! [crf]
//! l2 = 1.0
//!
//! [lstm]
//! hidden_dim = 256
//! precision = "f32"
//!
//! [llm]
//! url = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4-turbo"
//! api_key_env = "OPENAI_API_KEY"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub edgar: EdgarSection,
    #[serde(default)]
    pub crf: CrfSection,
    #[serde(default)]
    pub lstm: LstmSection,
    #[serde(default)]
    pub llm: LlmSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgarSection {
    pub base_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub rate_limit: Option<f64>,
    pub user_agent: Option<String>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrfSection {
    pub l2: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub memory: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmSection {
    pub hidden_dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub val_fraction: Option<f64>,
    pub precision: Option<Precision>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub url: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub timeout_secs: Option<u64>,
    pub api_key_env: Option<String>,
    pub max_retries: Option<usize>,
    pub word_limit: Option<usize>,
    pub min_word_limit: Option<usize>,
    pub max_tokens: Option<usize>,
    pub chars_per_token: Option<f64>,
    pub demos: Option<PathBuf>,
    pub items: Option<Vec<String>>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }
}

/// First of flag (clap already folds the environment in), file, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg = FileConfig::parse(
            r#"
seed = 3
[lstm]
precision = "f32"
hidden_dim = 64
[llm]
items = ["1", "7"]
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.lstm.precision, Some(Precision::F32));
        assert_eq!(cfg.lstm.hidden_dim, Some(64));
        assert_eq!(cfg.llm.items.as_deref(), Some(&["1".to_string(), "7".to_string()][..]));
        assert_eq!(cfg.crf, CrfSection::default());
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(FileConfig::parse("[crf]\nl3 = 1.0\n").is_err());
    }

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None::<i32>, None, 3), 3);
    }
}
