use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Args;

use truthy_core::analytics::{Definitions, LabelSet, Lexicon};
use truthy_core::annotations::DEFAULT_BOT_HANDLE;
use truthy_core::theme::load_themes_file;
use truthy_core::tweet::is_valid_screen_name;
use truthy_core::EngineConfig;

use crate::cli::CliError;

/// Inputs shared by every command that builds an engine.
#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Theme definitions, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub themes: Option<PathBuf>,
    /// Sentiment lexicon, `word<TAB>valence` per line.
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Per-user partisanship and language labels (JSONL).
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Static meme definitions (JSONL).
    #[arg(long, value_name = "FILE")]
    pub definitions: Option<PathBuf>,
    /// Account that tagging tweets address.
    #[arg(long, value_name = "H", default_value = DEFAULT_BOT_HANDLE)]
    pub bot_handle: String,
}

fn open(kind: &str, path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Config(format!("cannot read {kind} file `{}`: {e}", path.display())))
}

impl EngineArgs {
    pub fn load(&self, themes_required: bool) -> Result<EngineConfig, CliError> {
        let mut config = EngineConfig::default();
        match &self.themes {
            Some(path) => {
                config.themes = load_themes_file(path)
                    .map_err(|e| CliError::Config(format!("themes file `{}`: {e}", path.display())))?;
            }
            None if themes_required => return Err(CliError::Usage("--themes is required".into())),
            None => {}
        }
        if let Some(path) = &self.lexicon {
            config.lexicon = Some(
                Lexicon::load(open("lexicon", path)?)
                    .map_err(|e| CliError::Config(format!("lexicon file `{}`: {e}", path.display())))?,
            );
        }
        if let Some(path) = &self.labels {
            config.labels = LabelSet::load(open("labels", path)?)
                .map_err(|e| CliError::Config(format!("labels file `{}`: {e}", path.display())))?;
        }
        if let Some(path) = &self.definitions {
            config.definitions = Definitions::load(open("definitions", path)?)
                .map_err(|e| CliError::Config(format!("definitions file `{}`: {e}", path.display())))?;
        }
        let handle = self.bot_handle.trim_start_matches('@');
        if !is_valid_screen_name(handle) {
            return Err(CliError::Usage(format!("invalid --bot-handle `{}`", self.bot_handle)));
        }
        config.bot_handle = handle.to_ascii_lowercase();
        Ok(config)
    }
}
