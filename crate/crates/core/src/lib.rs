//! Tweet stream analysis: ingest line-delimited tweet records, group them
//! into memes, grow one diffusion network per meme and compute dashboard
//! statistics over them.
//!
//! ```
//! use truthy_core::engine::{Engine, EngineConfig};
//! use truthy_core::meme::MemeKey;
//! use truthy_core::pipeline::Pipeline;
//! use truthy_core::theme::Theme;
//!
//! let themes = vec![Theme::new("Politics", &["#p2"]).unwrap()];
//! let mut pipeline = Pipeline::in_memory(Engine::new(EngineConfig::with_themes(themes)));
//! let line = br#"{"id":1,"created_at":"2010-10-01T10:00:00Z","user_id":7,"screen_name":"bob","text":"go #p2 @alice"}"#;
//! pipeline.push_line(line).unwrap();
//! pipeline.flush_buffer().into_iter().for_each(|t| pipeline.process(t).unwrap());
//!
//! let stats = pipeline.engine().stats(&MemeKey::hashtag("p2")).unwrap();
//! assert_eq!(stats.n_users, 2);
//! assert_eq!(stats.n_mention_edges, 1);
//! ```

pub mod analytics;
pub mod annotations;
pub mod engine;
pub mod generator;
pub mod graph;
pub mod ingest;
pub mod meme;
pub mod pipeline;
pub mod storage;
pub mod theme;
pub mod tweet;

mod serde_util;

pub use engine::{Engine, EngineConfig, EngineError};
pub use meme::{extract_memes, MemeKey, MemeKind};
pub use pipeline::{Pipeline, PipelineError, PipelineOptions};
pub use tweet::{parse_record, Tweet};
