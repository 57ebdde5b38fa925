//! Regex reference for the tagging-tweet grammar.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use truthy_core::annotations::{
    parse_annotation_tweet, AnnotationStore, AnnotationTag, Label, NewAnnotation, Source, TagParse, Target,
};
use truthy_core::meme::{MemeKey, MemeKind};

pub const TOKENS: &[&str] = &[
    "@truthybot",
    "@TruthyBot:",
    "@truthybot,",
    "@truthybots",
    "@someone",
    "#truthy",
    "#SPAM",
    "#Legitimate",
    "#legit",
    "#p2",
    "meme:hashtag:P2",
    "meme:hashtag:tcot",
    "meme:mention:BarackObama",
    "meme:url:http://News.Example/story/1",
    "meme:phrase:Hello",
    "meme:bogus:x",
    "meme:hashtag:",
    "meme:",
    "user:@Alice",
    "user:@bob_2",
    "user:@way_too_long_handle",
    "user:@",
    "user:42",
    "look",
    "at",
    "this",
    "!!",
];

pub struct Reference {
    bot: Regex,
    label: Regex,
    meme: Regex,
    handle: Regex,
}

impl Reference {
    pub fn new() -> Self {
        Self {
            bot: Regex::new(r"(?i)^@truthybot[:,]*$").unwrap(),
            label: Regex::new(r"(?i)^#(truthy|spam|legitimate)$").unwrap(),
            meme: Regex::new(r"^meme:(hashtag|mention|url|phrase):(\S+)$").unwrap(),
            handle: Regex::new(r"^user:@([A-Za-z0-9_]{1,15})$").unwrap(),
        }
    }

    pub fn target(&self, token: &str) -> Option<Target> {
        if let Some(c) = self.handle.captures(token) {
            return Some(Target::UserHandle(c[1].to_ascii_lowercase()));
        }
        let c = self.meme.captures(token)?;
        let kind: MemeKind = c[1].parse().unwrap();
        let value = match kind {
            MemeKind::Url => {
                let v = &c[2];
                let host_end = v[8..].find('/').map_or(v.len(), |p| p + 8);
                format!("{}{}", v[..host_end].to_lowercase(), &v[host_end..])
            }
            _ => c[2].to_lowercase(),
        };
        Some(Target::Meme(MemeKey { kind, value }))
    }

    pub fn classify(&self, text: &str) -> TagParse {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if !tokens.iter().any(|t| self.bot.is_match(t)) {
            return TagParse::NoMatch;
        }
        let labels: Vec<Label> = tokens
            .iter()
            .filter_map(|t| self.label.captures(t))
            .map(|c| c[1].parse().unwrap())
            .collect();
        let targets: Vec<Target> = tokens.iter().filter_map(|t| self.target(t)).collect();
        match (labels.len(), targets.len()) {
            (1, 1) => TagParse::Matched(AnnotationTag { label: labels[0], target: targets[0].clone() }),
            (l, t) if l > 1 || t > 1 => TagParse::Ambiguous,
            _ => TagParse::NoMatch,
        }
    }
}

/// Texts biased toward the grammar: most carry the bot handle, a label and a target.
pub fn corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut toks: Vec<&str> = Vec::new();
            if rng.random_bool(0.8) {
                toks.push(TOKENS[rng.random_range(0..4)]);
            }
            if rng.random_bool(0.8) {
                toks.push(TOKENS[rng.random_range(5..10)]);
            }
            if rng.random_bool(0.8) {
                toks.push(TOKENS[rng.random_range(10..23)]);
            }
            for _ in 0..rng.random_range(0..4) {
                toks.push(TOKENS.choose(&mut rng).unwrap());
            }
            let len = toks.len();
            for i in (1..len).rev() {
                toks.swap(i, rng.random_range(0..=i));
            }
            toks.join(" ")
        })
        .collect()
}

/// Runs `n` texts through both parsers; returns the verdict tally or the
/// first disagreement.
pub fn check_suite(n: usize, seed: u64) -> Result<[usize; 3], String> {
    let reference = Reference::new();
    let mut tally = [0; 3];
    for text in corpus(n, seed) {
        let want = reference.classify(&text);
        let got = truthy_core::annotations::classify_annotation_tweet(&text, "truthybot");
        if got != want {
            return Err(format!("`{text}`: got {got:?}, reference {want:?}"));
        }
        tally[match got {
            TagParse::Matched(_) => 0,
            TagParse::Ambiguous => 1,
            TagParse::NoMatch => 2,
        }] += 1;
    }
    Ok(tally)
}

fn check_store(store: &AnnotationStore, expected: &BTreeMap<Target, [u64; 3]>, flags: u64) -> Result<(), String> {
    let repeats: u64 = store.records().iter().map(|r| r.repeat as u64).sum();
    if repeats != flags || store.log_len() != flags {
        return Err(format!("{flags} flags but repeats {repeats}, log {}", store.log_len()));
    }
    let mut total = 0;
    for (target, [truthy, spam, legit]) in expected {
        let s = store.summary(target);
        if (s.truthy, s.spam, s.legitimate) != (*truthy, *spam, *legit) {
            return Err(format!("{target}: summary {s:?}, expected {:?}", [truthy, spam, legit]));
        }
        total += s.total();
    }
    if total != flags {
        return Err(format!("summaries hold {total} of {flags} flags"));
    }
    if store.summary(&Target::UserId(999_999)).total() != 0 {
        return Err("unflagged target has a summary".into());
    }
    Ok(())
}

/// Records every tag parsed from `n` generated texts into a store at
/// `path`, then checks summaries before and after reopening. Returns the
/// number of flags.
pub fn check_conservation(path: &Path, n: usize, seed: u64) -> Result<u64, String> {
    let t0: DateTime<Utc> = DateTime::parse_from_rfc3339("2010-10-01T00:00:00Z").unwrap().with_timezone(&Utc);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tags: Vec<AnnotationTag> =
        corpus(n, seed + 1).iter().filter_map(|t| parse_annotation_tweet(t, "truthybot")).collect();
    let mut expected: BTreeMap<Target, [u64; 3]> = BTreeMap::new();
    let mut flags = 0u64;
    {
        let mut store = AnnotationStore::open(path).map_err(|e| e.to_string())?;
        for (i, tag) in tags.iter().enumerate() {
            let annotation = NewAnnotation {
                annotator: ["ann", "bea", "cy"].choose(&mut rng).unwrap().to_string(),
                target: tag.target.clone(),
                label: tag.label,
                source: Source::TweetSyntax,
                created_at: t0 + Duration::hours(rng.random_range(0..72)),
                tweet_id: Some(i as u64),
            };
            store.record(annotation, true).map_err(|e| e.to_string())?;
            let slot = Label::ALL.iter().position(|l| *l == tag.label).unwrap();
            expected.entry(tag.target.clone()).or_default()[slot] += 1;
            flags += 1;
        }
        check_store(&store, &expected, flags)?;
    }
    let reopened = AnnotationStore::open(path).map_err(|e| e.to_string())?;
    check_store(&reopened, &expected, flags).map_err(|e| format!("after reopen: {e}"))?;
    if !(0..tags.len() as u64).all(|i| reopened.has_tweet(i)) {
        return Err("tagging tweet ids lost on reopen".into());
    }
    Ok(flags)
}
