//! Python bindings: meme extraction, the tagging-tweet grammar, corpus
//! generation and a persistent or in-memory pipeline.
#![allow(clippy::useless_conversion)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::Serialize;

use truthy_core::analytics::{AnalyticsError, Interval, Lexicon};
use truthy_core::annotations::{classify_annotation_tweet, Label, TagParse, Target, DEFAULT_BOT_HANDLE};
use truthy_core::engine::MemeSort;
use truthy_core::generator::{generate, GenConfig};
use truthy_core::meme::{self, extract_entities};
use truthy_core::storage::ExportFormat;
use truthy_core::theme::load_themes_file;
use truthy_core::tweet::{parse_timestamp, Tweet};
use truthy_core::{Engine, EngineConfig, EngineError, MemeKey, PipelineOptions};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn engine_error(e: EngineError) -> PyErr {
    match e {
        EngineError::Analytics(AnalyticsError::UnknownMeme(_) | AnalyticsError::UnknownUser(_))
        | EngineError::UnknownTheme(_) => PyKeyError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py(py: Python<'_>, value: &impl Serialize) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

fn meme_key(raw: &str) -> PyResult<MemeKey> {
    raw.parse().map_err(value_error)
}

fn text_tweet(text: &str) -> Tweet {
    Tweet {
        id: 0,
        created_at: parse_timestamp("1970-01-01T00:00:00Z").expect("epoch"),
        user_id: 0,
        screen_name: "_".into(),
        text: text.into(),
        retweet_of_user_id: None,
        retweet_of_screen_name: None,
        entities: None,
    }
}

/// Memes in a tweet text as sorted `kind:value` strings.
#[pyfunction]
fn extract_memes(text: &str) -> Vec<String> {
    meme::extract_memes(&text_tweet(text)).iter().map(ToString::to_string).collect()
}

#[pyfunction]
fn normalize_url(url: &str) -> String {
    meme::normalize_url(url)
}

#[pyfunction]
fn normalize_hashtag(tag: &str) -> Option<String> {
    meme::normalize_hashtag(tag)
}

/// The phrase meme of a text, if it has one.
#[pyfunction]
fn derive_phrase(text: &str) -> Option<String> {
    meme::derive_phrase(text, &extract_entities(text))
}

/// `{"label", "target"}` for a tagging tweet, `"ambiguous"` or None.
#[pyfunction]
#[pyo3(signature = (text, bot_handle = DEFAULT_BOT_HANDLE))]
fn parse_annotation_tweet(py: Python<'_>, text: &str, bot_handle: &str) -> PyResult<PyObject> {
    Ok(match classify_annotation_tweet(text, bot_handle) {
        TagParse::Matched(tag) => {
            to_py(py, &serde_json::json!({"label": tag.label, "target": tag.target.to_string()}))?
        }
        TagParse::Ambiguous => "ambiguous".into_py(py),
        TagParse::NoMatch => py.None(),
    })
}

/// Synthetic corpus as `(jsonl, ledger)`.
#[pyfunction]
#[pyo3(signature = (themes_path, tweets, users = 2000, seed = 0))]
fn generate_corpus(py: Python<'_>, themes_path: PathBuf, tweets: u64, users: u64, seed: u64) -> PyResult<(String, PyObject)> {
    let themes = load_themes_file(&themes_path).map_err(value_error)?;
    let corpus = generate(&GenConfig { tweets, users, seed, ..GenConfig::default() }, &themes).map_err(value_error)?;
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf).map_err(|e| PyOSError::new_err(e.to_string()))?;
    let text = String::from_utf8(buf).map_err(value_error)?;
    Ok((text, to_py(py, &corpus.ledger)?))
}

/// Ingest, routing and analytics over a tweet stream. With `state_dir`
/// the log and snapshots persist and are recovered on open.
#[pyclass(unsendable, module = "truthy")]
struct Pipeline {
    inner: truthy_core::Pipeline,
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (themes_path = None, state_dir = None, lexicon_path = None, bot_handle = DEFAULT_BOT_HANDLE))]
    fn new(
        themes_path: Option<PathBuf>,
        state_dir: Option<PathBuf>,
        lexicon_path: Option<PathBuf>,
        bot_handle: &str,
    ) -> PyResult<Self> {
        let mut config = match themes_path {
            Some(p) => EngineConfig::with_themes(load_themes_file(&p).map_err(value_error)?),
            None => EngineConfig::default(),
        };
        if let Some(p) = lexicon_path {
            let file = File::open(&p).map_err(|e| PyOSError::new_err(format!("{}: {e}", p.display())))?;
            config.lexicon = Some(Lexicon::load(BufReader::new(file)).map_err(value_error)?);
        }
        config.bot_handle = bot_handle.trim_start_matches('@').to_ascii_lowercase();
        let inner = match state_dir {
            Some(dir) => truthy_core::Pipeline::open(&dir, config, PipelineOptions::default())
                .map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
            None => truthy_core::Pipeline::in_memory(Engine::new(config)),
        };
        Ok(Self { inner })
    }

    /// Feeds one JSONL record; returns how many tweets left the reorder
    /// buffer and were applied.
    fn ingest_line(&mut self, line: &str) -> PyResult<usize> {
        self.inner.push_line(line.as_bytes()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Feeds every line of a JSONL file, then flushes the buffer.
    fn ingest_file(&mut self, path: PathBuf) -> PyResult<()> {
        let file = File::open(&path).map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        self.inner.run(BufReader::new(file), None).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Releases and applies every buffered tweet.
    fn flush(&mut self) -> PyResult<usize> {
        let ready = self.inner.flush_buffer();
        let n = ready.len();
        for t in ready {
            self.inner.process(t).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        }
        Ok(n)
    }

    fn checkpoint(&mut self) -> PyResult<()> {
        self.inner.checkpoint().map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn counters(&self, py: Python<'_>) -> PyResult<PyObject> {
        let ingest = self.inner.ingest_counters();
        let engine = self.inner.engine().counters();
        to_py(py, &serde_json::json!({"ingest": ingest, "engine": engine, "errors": ingest.errors()}))
    }

    #[getter]
    fn meme_count(&self) -> usize {
        self.inner.engine().meme_count()
    }

    fn memes(&self) -> Vec<String> {
        self.inner.engine().meme_keys().map(ToString::to_string).collect()
    }

    fn themes(&self, py: Python<'_>) -> PyResult<PyObject> {
        to_py(py, &self.inner.engine().themes_summary())
    }

    #[pyo3(signature = (theme, sort = "tweets", limit = 100))]
    fn theme_memes(&self, py: Python<'_>, theme: &str, sort: &str, limit: usize) -> PyResult<PyObject> {
        let sort: MemeSort = sort.parse().map_err(value_error)?;
        to_py(py, &self.inner.engine().theme_memes(theme, sort, limit).map_err(engine_error)?)
    }

    fn stats(&self, py: Python<'_>, meme: &str) -> PyResult<PyObject> {
        to_py(py, &self.inner.engine().meme_detail(&meme_key(meme)?).map_err(engine_error)?)
    }

    #[pyo3(signature = (meme, interval = "hour"))]
    fn time_series(&self, py: Python<'_>, meme: &str, interval: &str) -> PyResult<PyObject> {
        let interval: Interval = interval.parse().map_err(value_error)?;
        to_py(py, &self.inner.engine().time_series(&meme_key(meme)?, interval).map_err(engine_error)?)
    }

    #[pyo3(signature = (meme, k = 10))]
    fn cooccurrence(&self, py: Python<'_>, meme: &str, k: usize) -> PyResult<PyObject> {
        to_py(py, &self.inner.engine().cooccurrence_top(&meme_key(meme)?, k).map_err(engine_error)?)
    }

    fn user(&self, py: Python<'_>, user_id: u64) -> PyResult<PyObject> {
        to_py(py, &self.inner.engine().user_stats(user_id).map_err(engine_error)?)
    }

    /// Network bytes in `edgelist`, `graphml` or `json`.
    #[pyo3(signature = (meme, format = "json"))]
    fn export_network<'py>(&self, py: Python<'py>, meme: &str, format: &str) -> PyResult<Bound<'py, PyBytes>> {
        let format: ExportFormat = format.parse().map_err(value_error)?;
        let bytes = self.inner.engine().export_network(&meme_key(meme)?, format).map_err(engine_error)?;
        Ok(PyBytes::new_bound(py, &bytes))
    }

    /// Stores a flag; the record's `unresolved` is true for unknown targets.
    fn annotate(&mut self, py: Python<'_>, annotator: &str, target: &str, label: &str) -> PyResult<PyObject> {
        let target: Target = target.parse().map_err(value_error)?;
        let label: Label = label.parse().map_err(value_error)?;
        let record = self
            .inner
            .engine_mut()
            .annotate(annotator, target, label, chrono::Utc::now())
            .map_err(engine_error)?;
        to_py(py, &record)
    }

    fn state_digest(&self) -> PyResult<String> {
        self.inner.engine().state_digest().map_err(engine_error)
    }

    fn __len__(&self) -> usize {
        self.inner.engine().tweet_count()
    }
}

#[pymodule]
fn truthy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(extract_memes, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_url, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_hashtag, m)?)?;
    m.add_function(wrap_pyfunction!(derive_phrase, m)?)?;
    m.add_function(wrap_pyfunction!(parse_annotation_tweet, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    Ok(())
}
