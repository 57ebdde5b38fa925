//! Independent theme matching, co-occurrence counting and case variants.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use truthy_core::engine::Engine;
use truthy_core::meme::{extract_memes, MemeKey, MemeKind};
use truthy_core::theme::Theme;
use truthy_core::tweet::{parse_timestamp, Tweet};

/// Themes a tweet matches: hashtags, mentions (plus the author) and
/// whole-word runs over the lowercased text without URLs.
pub fn theme_keys(t: &Tweet, themes: &[Theme]) -> BTreeSet<String> {
    let memes = extract_memes(t);
    let tags: BTreeSet<String> = memes.iter().filter(|k| k.kind == MemeKind::Hashtag).map(|k| k.value.clone()).collect();
    let mut users: BTreeSet<String> =
        memes.iter().filter(|k| k.kind == MemeKind::Mention).map(|k| k.value.clone()).collect();
    users.insert(t.screen_name.to_lowercase());
    let words: Vec<String> = t
        .text
        .split_whitespace()
        .filter(|w| !w.starts_with("http://") && !w.starts_with("https://"))
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .collect();
    let mut out = BTreeSet::new();
    for theme in themes {
        let hit = theme.keywords.iter().any(|kw| {
            if let Some(tag) = kw.strip_prefix('#') {
                tags.contains(&tag.to_lowercase())
            } else if let Some(u) = kw.strip_prefix('@') {
                users.contains(&u.to_lowercase())
            } else {
                let run: Vec<String> = kw.split_whitespace().map(str::to_lowercase).collect();
                words.windows(run.len()).any(|w| w == run.as_slice())
            }
        });
        if hit {
            out.insert(theme.name.clone());
        }
    }
    out
}

pub struct BruteCooccurrence {
    pub joint: BTreeMap<(MemeKey, MemeKey), u64>,
    pub marginal: BTreeMap<MemeKey, u64>,
}

/// Quadratic pair counting over per-tweet meme sets.
pub fn brute_cooccurrence<'a>(tweets: impl IntoIterator<Item = &'a Tweet>) -> BruteCooccurrence {
    let mut joint = BTreeMap::new();
    let mut marginal = BTreeMap::new();
    for t in tweets {
        let memes: Vec<MemeKey> = extract_memes(t).into_iter().collect();
        for a in &memes {
            *marginal.entry(a.clone()).or_default() += 1;
            for b in &memes {
                if a != b {
                    *joint.entry((a.clone(), b.clone())).or_default() += 1;
                }
            }
        }
    }
    BruteCooccurrence { joint, marginal }
}

impl BruteCooccurrence {
    pub fn get(&self, a: &MemeKey, b: &MemeKey) -> u64 {
        self.joint.get(&(a.clone(), b.clone())).copied().unwrap_or(0)
    }
}

/// Flips the case of letters inside hashtags, mentions and URL hosts,
/// following `mask` cyclically. Other text is left alone.
pub fn recase_entities(text: &str, mask: &[bool]) -> String {
    let mut i = 0;
    text.split(' ')
        .map(|tok| {
            if tok.starts_with('#') || tok.starts_with('@') || tok.starts_with("http://") {
                let head_end = match tok.strip_prefix("http://") {
                    Some(rest) => rest.find('/').map_or(tok.len(), |p| p + 7),
                    None => tok.len(),
                };
                let head: String = tok[..head_end]
                    .chars()
                    .map(|c| {
                        i += 1;
                        if mask[i % mask.len()] { c.to_uppercase().collect::<String>() } else { c.to_lowercase().collect() }
                    })
                    .collect();
                format!("{head}{}", &tok[head_end..])
            } else {
                tok.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn without(set: BTreeSet<MemeKey>, kinds: &[MemeKind]) -> BTreeSet<MemeKey> {
    set.into_iter().filter(|k| !kinds.contains(&k.kind)).collect()
}

pub fn tweet(text: &str) -> Tweet {
    Tweet {
        id: 1,
        created_at: parse_timestamp("2010-09-01T12:00:00Z").unwrap(),
        user_id: 42,
        screen_name: "alice".into(),
        text: text.into(),
        retweet_of_user_id: None,
        retweet_of_screen_name: None,
        entities: None,
    }
}

const WORDS: &[&str] = &["Obama", "vote", "Syria", "protest", "news", "Occupy", "now", "tea", "party", "Curfew"];
const TAGS: &[&str] = &["p2", "TCOT", "Bahrain", "syria", "Occupy", "gop", "tlot", "Jan25"];
const USERS: &[&str] = &["BarackObama", "foxnews", "CNN", "user_12", "OneOfficialAcct"];
const HOSTS: &[&str] = &["Example.com", "news.example.ORG", "bit.ly", "x.co"];

fn random_case(s: &str, rng: &mut ChaCha8Rng) -> String {
    s.chars()
        .map(|c| if rng.random_bool(0.5) { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() })
        .collect()
}

/// A synthetic tweet text with randomly cased entities.
pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..10);
    let mut out = Vec::with_capacity(n);
    if rng.random_bool(0.2) {
        out.push(format!("RT @{}", random_case(USERS.choose(rng).unwrap(), rng)));
    }
    for _ in 0..n {
        let tok = match rng.random_range(0..5) {
            0 => format!("#{}", random_case(TAGS.choose(rng).unwrap(), rng)),
            1 => format!("@{}", random_case(USERS.choose(rng).unwrap(), rng)),
            2 => format!("http://{}/{}", random_case(HOSTS.choose(rng).unwrap(), rng), rng.random_range(0..50)),
            _ => random_case(WORDS.choose(rng).unwrap(), rng),
        };
        out.push(tok);
    }
    out.join(" ")
}

/// Case clustering, idempotence and confluence over `n` random texts.
pub fn check_extraction_suite(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entities = |set: BTreeSet<MemeKey>| without(set, &[MemeKind::Phrase]);
    for i in 0..n {
        let text = random_text(&mut rng);
        let memes = extract_memes(&tweet(&text));
        if memes != extract_memes(&tweet(&text)) {
            return Err(format!("#{i}: extraction not deterministic for `{text}`"));
        }
        let mask: Vec<bool> = (0..rng.random_range(1..16)).map(|_| rng.random_bool(0.5)).collect();
        let recased = recase_entities(&text, &mask);
        if entities(memes.clone()) != entities(extract_memes(&tweet(&recased))) {
            return Err(format!("#{i}: `{text}` and `{recased}` disagree"));
        }
        for k in &memes {
            match MemeKey::new(k.kind, &k.value) {
                Ok(again) if again == *k => {}
                other => return Err(format!("#{i}: {k} renormalizes to {other:?}")),
            }
        }
        // Rebuild a text from canonical values; extraction must reproduce them.
        let canonical: Vec<String> = entities(memes.clone())
            .iter()
            .map(|k| match k.kind {
                MemeKind::Hashtag => format!("#{}", k.value),
                MemeKind::Mention => format!("@{}", k.value),
                _ => k.value.clone(),
            })
            .collect();
        let rebuilt = entities(extract_memes(&tweet(&canonical.join(" "))));
        if rebuilt != entities(memes) {
            return Err(format!("#{i}: canonical rebuild of `{text}` gave {rebuilt:?}"));
        }
    }
    Ok(())
}

/// The documented extraction examples, as one check.
pub fn check_documented_examples() -> Result<(), String> {
    let key = |kind, v: &str| MemeKey { kind, value: v.to_string() };
    let cases: Vec<(&str, BTreeSet<MemeKey>)> = vec![
        (
            "RT @bob go #p2 http://x.co/1",
            [key(MemeKind::Mention, "bob"), key(MemeKind::Hashtag, "p2"), key(MemeKind::Url, "http://x.co/1")].into(),
        ),
        ("#Bahrain #bahrain", [key(MemeKind::Hashtag, "bahrain")].into()),
        ("I love #bahrain and #Bahrain", [key(MemeKind::Hashtag, "bahrain"), key(MemeKind::Phrase, "i love and")].into()),
        ("hello there friend", [key(MemeKind::Phrase, "hello there friend")].into()),
        ("see HTTP://Example.com/", [key(MemeKind::Url, "http://example.com"), key(MemeKind::Phrase, "see")].into()),
    ];
    for (text, want) in cases {
        let got = extract_memes(&tweet(text));
        if got != want {
            return Err(format!("`{text}`: got {got:?}, want {want:?}"));
        }
    }
    Ok(())
}

/// Compares every pair count, the top-10 lists, symmetry and marginal
/// bounds against a brute-force recount over the engine's tweets.
/// Returns the number of memes compared.
pub fn check_cooccurrence(engine: &Engine) -> Result<usize, String> {
    let brute = brute_cooccurrence(engine.tweets());
    let marginal = &brute.marginal;
    let keys: Vec<MemeKey> = marginal.keys().cloned().collect();
    for a in &keys {
        let count = engine.meme_tweet_count(a).map_err(|e| e.to_string())?;
        if count != marginal[a] {
            return Err(format!("{a}: {count} tweets, recount {}", marginal[a]));
        }
        for b in keys.iter().filter(|b| *b != a) {
            let got = engine.joint_count(a, b);
            if got != brute.get(a, b) {
                return Err(format!("joint({a}, {b}) = {got}, recount {}", brute.get(a, b)));
            }
            if got != engine.joint_count(b, a) {
                return Err(format!("joint({a}, {b}) is not symmetric"));
            }
            if got > marginal[a].min(marginal[b]) {
                return Err(format!("joint({a}, {b}) exceeds a marginal"));
            }
        }
        let top = engine.cooccurrence_top(a, 10).map_err(|e| e.to_string())?;
        let mut expected: Vec<(u64, &MemeKey)> =
            keys.iter().filter(|b| *b != a).map(|b| (brute.get(a, b), b)).filter(|(j, _)| *j > 0).collect();
        expected.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(y.1)));
        let got: Vec<u64> = top.iter().map(|e| e.joint_count).collect();
        let want: Vec<u64> = expected.iter().take(10).map(|e| e.0).collect();
        if got != want {
            return Err(format!("{a}: top joints {got:?}, recount {want:?}"));
        }
        if let Some(e) = top.iter().find(|e| e.meme_a != *a || e.joint_count != brute.get(a, &e.meme_b)) {
            return Err(format!("{a}: top entry {} disagrees", e.meme_b));
        }
    }
    Ok(keys.len())
}
