//! Served instances and API contract checks shared by the server suites.
#![allow(dead_code)]

#[path = "../../../core/tests/support/mod.rs"]
pub mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use serde_json::{json, Value};

use truthy_core::analytics::{Interval, Lexicon};
use truthy_core::engine::{Engine, EngineConfig};
use truthy_core::generator::{generate, Corpus, GenConfig};
use truthy_core::meme::{extract_memes, MemeKey, MemeKind};
use truthy_core::storage::ExportFormat;
use truthy_core::theme::{load_themes_file, Theme};
use truthy_core::Pipeline;
use truthy_server::api::{self, encode_meme_value, SharedPipeline, TWEET_CAP};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn themes() -> Vec<Theme> {
    load_themes_file(&data("themes.jsonl")).unwrap()
}

pub fn config() -> EngineConfig {
    let mut config = EngineConfig::with_themes(themes());
    config.lexicon = Some(Lexicon::load(BufReader::new(File::open(data("lexicon.tsv")).unwrap())).unwrap());
    config
}

/// The seed-7 corpus with the command line's default population.
pub fn seed7(tweets: u64) -> Corpus {
    generate(&GenConfig { tweets, users: 2000, seed: 7, ..GenConfig::default() }, &themes()).unwrap()
}

pub fn jsonl(corpus: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf).unwrap();
    buf
}

pub fn ingest(config: EngineConfig, lines: &[u8]) -> Pipeline {
    let mut p = Pipeline::in_memory(Engine::new(config));
    for line in lines.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
        p.push_line(line).unwrap();
    }
    for t in p.flush_buffer() {
        p.process(t).unwrap();
    }
    p
}

/// Serves `pipeline` on an ephemeral port from a background runtime that
/// lives for the rest of the process.
pub fn serve(pipeline: Pipeline) -> (String, SharedPipeline) {
    let shared = api::shared(pipeline);
    let app = api::router(shared.clone(), None);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (format!("http://{}", rx.recv().unwrap()), shared)
}

#[derive(Debug)]
pub struct Resp {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Resp {
    pub fn json(&self) -> Result<Value, String> {
        serde_json::from_slice(&self.body).map_err(|e| format!("body is not JSON: {e}"))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    /// Fails unless the status matches and, for errors, the body is
    /// `{code, message}`.
    pub fn expect(self, status: u16) -> Result<Self, String> {
        if self.status != status {
            return Err(format!("expected {status}, got {} `{}`", self.status, self.text()));
        }
        if status >= 400 {
            let v = self.json()?;
            if !(v["code"].is_string() && v["message"].is_string()) {
                return Err(format!("unstructured error body `{}`", self.text()));
            }
        }
        Ok(self)
    }
}

pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: &str) -> Self {
        Self { base: base.to_string(), http: reqwest::Client::new() }
    }

    async fn send(&self, req: reqwest::RequestBuilder) -> Result<Resp, String> {
        let r = req.send().await.map_err(|e| e.to_string())?;
        let status = r.status().as_u16();
        let content_type = r
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default()
            .to_string();
        let body = r.bytes().await.map_err(|e| e.to_string())?.to_vec();
        Ok(Resp { status, content_type, body })
    }

    pub async fn get(&self, path: &str) -> Result<Resp, String> {
        self.send(self.http.get(format!("{}{path}", self.base))).await
    }

    pub async fn post(&self, path: &str, body: impl Into<String>) -> Result<Resp, String> {
        let req = self
            .http
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body.into());
        self.send(req).await
    }
}

pub fn meme_path(key: &MemeKey) -> String {
    format!("/api/memes/{}/{}", key.kind, encode_meme_value(key))
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(what()) }
}

/// Most tweeted meme of a kind.
pub fn top_meme(p: &SharedPipeline, kind: MemeKind) -> MemeKey {
    let guard = api::read(p);
    let e = guard.engine();
    e.meme_keys()
        .filter(|k| k.kind == kind)
        .max_by_key(|k| (e.meme_tweet_count(k).unwrap(), std::cmp::Reverse((*k).clone())))
        .cloned()
        .expect("meme of that kind")
}

// ---- contract checks ------------------------------------------------------

pub async fn check_themes(c: &Client, p: &SharedPipeline) -> Result<(), String> {
    let v = c.get("/api/themes").await?.expect(200)?.json()?;
    let list = v.as_array().ok_or("not an array")?;
    let names: Vec<&str> = list.iter().filter_map(|t| t["name"].as_str()).collect();
    let want: Vec<String> = themes().into_iter().map(|t| t.name).collect();
    ensure(names == want, || format!("theme names {names:?}"))?;
    // Recount the theme index from the applied tweets.
    let mut index: BTreeMap<String, BTreeSet<MemeKey>> = BTreeMap::new();
    {
        let guard = api::read(p);
        for t in guard.engine().tweets() {
            for theme in support::memes::theme_keys(t, &themes()) {
                index.entry(theme).or_default().extend(extract_memes(t));
            }
        }
    }
    for t in list {
        let name = t["name"].as_str().unwrap();
        let want = index.get(name).map_or(0, |s| s.len()) as u64;
        ensure(t["meme_count"].as_u64() == Some(want), || format!("{name}: meme_count {} != recount {want}", t["meme_count"]))?;
    }
    Ok(())
}

pub async fn check_no_themes(c: &Client) -> Result<(), String> {
    let v = c.get("/api/themes").await?.expect(200)?.json()?;
    ensure(v == json!([]), || format!("expected [], got {v}"))
}

pub async fn check_theme_memes(c: &Client) -> Result<(), String> {
    let theme = "Politics";
    for (sort, field) in [("tweets", "n_tweets"), ("users", "n_users"), ("recency", "last_seen")] {
        let v = c.get(&format!("/api/themes/{theme}/memes?sort={sort}&limit=50")).await?.expect(200)?.json()?;
        let list = v.as_array().ok_or("not an array")?;
        ensure(!list.is_empty() && list.len() <= 50, || format!("{sort}: {} items", list.len()))?;
        for w in list.windows(2) {
            let ordered = match field {
                "last_seen" => w[0][field].as_str() >= w[1][field].as_str(),
                _ => w[0][field].as_u64() >= w[1][field].as_u64(),
            };
            ensure(ordered, || format!("sort={sort} not nonincreasing: {} then {}", w[0], w[1]))?;
        }
        for m in list.iter().take(5) {
            let key: MemeKey = m["meme_key"]["kind"]
                .as_str()
                .zip(m["meme_key"]["value"].as_str())
                .map(|(k, v)| MemeKey { kind: k.parse().unwrap(), value: v.to_string() })
                .ok_or("meme_key shape")?;
            let d = c.get(&meme_path(&key)).await?.expect(200)?.json()?;
            ensure(d["n_tweets"] == m["n_tweets"], || format!("{key}: summary and detail disagree"))?;
        }
    }
    let v = c.get(&format!("/api/themes/{theme}/memes?limit=1")).await?.expect(200)?.json()?;
    ensure(v.as_array().map(Vec::len) == Some(1), || format!("limit=1 gave {v}"))?;
    c.get("/api/themes/Nope/memes").await?.expect(404)?;
    c.get(&format!("/api/themes/{theme}/memes?sort=bogus")).await?.expect(400)?;
    c.get(&format!("/api/themes/{theme}/memes?limit=-1")).await?.expect(400)?;
    let spaced = c.get("/api/themes/Middle%20East/memes?limit=3").await?.expect(200)?.json()?;
    ensure(spaced.as_array().is_some_and(|a| !a.is_empty()), || "theme names with spaces".into())
}

pub async fn check_meme_detail(c: &Client, p: &SharedPipeline, expected_p2: Option<u64>) -> Result<(), String> {
    let p2 = MemeKey::hashtag("p2");
    let v = c.get("/api/memes/hashtag/p2").await?.expect(200)?.json()?;
    let (derived, stats) = {
        let guard = api::read(p);
        let e = guard.engine();
        (e.export_derived(&p2).map_err(|e| e.to_string())?, e.stats(&p2).map_err(|e| e.to_string())?)
    };
    ensure(v["meme"]["value"] == "p2", || format!("detail for wrong meme: {}", v["meme"]))?;
    ensure(v["n_tweets"].as_u64() == Some(derived.stats.n_tweets), || "detail vs export_derived n_tweets".into())?;
    ensure(v["n_users"].as_u64() == Some(stats.n_users), || "n_users drift".into())?;
    ensure(v["lcc_size"].as_u64() == Some(stats.lcc_size), || "lcc drift".into())?;
    let mean = v["mean_degree"].as_f64().ok_or("mean_degree missing")?;
    ensure((mean - stats.mean_degree).abs() <= 1e-12, || format!("mean_degree {mean} vs {}", stats.mean_degree))?;
    ensure(v["themes"].as_array().is_some_and(|t| t.iter().any(|x| x == "Politics")), || "themes".into())?;
    ensure(v["annotations"].is_object(), || "annotation summary missing".into())?;
    if let Some(n) = expected_p2 {
        ensure(v["n_tweets"].as_u64() == Some(n), || format!("p2 n_tweets {} != ledger {n}", v["n_tweets"]))?;
    }
    c.get("/api/memes/hashtag/definitely_not_a_meme").await?.expect(404)?;
    c.get("/api/memes/emoji/x").await?.expect(404)?;
    Ok(())
}

pub async fn check_network(c: &Client, p: &SharedPipeline) -> Result<(), String> {
    let key = top_meme(p, MemeKind::Hashtag);
    let base = meme_path(&key);
    let edgelist = c.get(&format!("{base}/network?format=edgelist")).await?.expect(200)?;
    ensure(edgelist.content_type.starts_with("text/tab-separated-values"), || edgelist.content_type.clone())?;
    ensure(edgelist.text().starts_with("source\ttarget\ttype\tweight\n"), || "edgelist header".into())?;
    for format in [ExportFormat::Json, ExportFormat::Graphml, ExportFormat::Edgelist] {
        let r = c.get(&format!("{base}/network?format={}", format.as_str())).await?.expect(200)?;
        let want = api::read(p).engine().export_network(&key, format).map_err(|e| e.to_string())?;
        ensure(r.body == want, || format!("{format:?} bytes differ from export_network"))?;
        ensure(r.content_type == format.content_type(), || format!("{format:?} content type {}", r.content_type))?;
    }
    let default = c.get(&format!("{base}/network")).await?.expect(200)?;
    ensure(default.content_type == "application/json", || "default format".into())?;
    let imported = support::graph::load_json(&default.body)?;
    let stats = c.get(&base).await?.json()?;
    ensure(Some(imported.nodes.len() as u64) == stats["n_users"].as_u64(), || "json nodes vs n_users".into())?;
    c.get(&format!("{base}/network?format=gexf")).await?.expect(400)?;
    c.get("/api/memes/hashtag/definitely_not_a_meme/network").await?.expect(404)?;
    Ok(())
}

pub async fn check_tweets(c: &Client, p: &SharedPipeline) -> Result<(), String> {
    let key = top_meme(p, MemeKind::Hashtag);
    let n = api::read(p).engine().meme_tweet_count(&key).unwrap();
    ensure(n > TWEET_CAP as u64, || format!("{key} has only {n} tweets"))?;
    let base = meme_path(&key);
    let all = c.get(&format!("{base}/tweets?limit=10000")).await?.expect(200)?.json()?;
    let list = all.as_array().ok_or("not an array")?;
    ensure(list.len() == TWEET_CAP, || format!("limit=10000 gave {}", list.len()))?;
    let default = c.get(&format!("{base}/tweets")).await?.expect(200)?.json()?;
    ensure(default.as_array().map(Vec::len) == Some(TWEET_CAP), || "default limit".into())?;
    let five = c.get(&format!("{base}/tweets?limit=5")).await?.expect(200)?.json()?;
    ensure(five.as_array().map(Vec::len) == Some(5), || "limit=5".into())?;
    let ts: Vec<&str> = list.iter().filter_map(|t| t["created_at"].as_str()).collect();
    ensure(ts.windows(2).all(|w| w[0] >= w[1]), || "recent tweets not newest first".into())?;
    c.get(&format!("{base}/tweets?limit=x")).await?.expect(400)?;
    Ok(())
}

pub async fn check_timeseries_and_cooccurrence(c: &Client, p: &SharedPipeline) -> Result<(), String> {
    let key = top_meme(p, MemeKind::Hashtag);
    let base = meme_path(&key);
    let n = api::read(p).engine().meme_tweet_count(&key).unwrap();
    for interval in ["minute", "hour", "day"] {
        let v = c.get(&format!("{base}/timeseries?interval={interval}")).await?.expect(200)?.json()?;
        let total: u64 = v["buckets"].as_array().ok_or("buckets")?.iter().filter_map(|b| b["tweet_count"].as_u64()).sum();
        ensure(total == n, || format!("{interval}: buckets sum {total} != {n}"))?;
    }
    let hour = c.get(&format!("{base}/timeseries")).await?.expect(200)?.json()?;
    let want = serde_json::to_value(api::read(p).engine().time_series(&key, Interval::Hour).unwrap()).unwrap();
    ensure(hour == want, || "default interval is not hour".into())?;
    c.get(&format!("{base}/timeseries?interval=week")).await?.expect(400)?;

    let v = c.get(&format!("{base}/cooccurrence?k=3")).await?.expect(200)?.json()?;
    let want = serde_json::to_value(api::read(p).engine().cooccurrence_top(&key, 3).unwrap()).unwrap();
    ensure(v == want, || "cooccurrence differs from engine".into())?;
    ensure(v.as_array().is_some_and(|a| a.len() <= 3), || "k not honoured".into())?;
    c.get(&format!("{base}/cooccurrence?k=z")).await?.expect(400)?;
    Ok(())
}

pub async fn check_url_memes(c: &Client, p: &SharedPipeline) -> Result<(), String> {
    let key = top_meme(p, MemeKind::Url);
    let v = c.get(&meme_path(&key)).await?.expect(200)?.json()?;
    ensure(v["meme"]["value"] == key.value.as_str(), || format!("url meme detail {}", v["meme"]))?;
    c.get("/api/memes/url/http%3A%2F%2Fnews.example%2Fstory%2F1").await?.expect(400)?;
    Ok(())
}

pub async fn check_users(c: &Client, p: &SharedPipeline) -> Result<(), String> {
    let (id, want) = {
        let guard = api::read(p);
        let e = guard.engine();
        let id = e.user_ids().max_by_key(|&id| e.user_stats(id).unwrap().activity).unwrap();
        (id, serde_json::to_value(e.user_stats(id).unwrap()).unwrap())
    };
    let v = c.get(&format!("/api/users/{id}")).await?.expect(200)?.json()?;
    ensure(v == want, || format!("user {id}: {v} != {want}"))?;
    c.get("/api/users/999999999").await?.expect(404)?;
    c.get("/api/users/alice").await?.expect(400)?;
    Ok(())
}

pub async fn check_annotations(c: &Client) -> Result<(), String> {
    let before = c.get("/api/memes/hashtag/p2").await?.expect(200)?.json()?["annotations"]["spam"].as_u64();
    let body = json!({"annotator": "reviewer", "target": "meme:hashtag:p2", "label": "spam"}).to_string();
    let r = c.post("/api/annotations", body).await?.expect(201)?.json()?;
    ensure(r["id"].as_u64().is_some(), || format!("no id in {r}"))?;
    ensure(r["label"] == "spam" && r["target"] == "meme:hashtag:p2", || format!("echo {r}"))?;
    let after = c.get("/api/memes/hashtag/p2").await?.json()?["annotations"]["spam"].as_u64();
    ensure(after == before.map(|b| b + 1), || format!("spam count {before:?} -> {after:?}"))?;

    let object_form = json!({"annotator": "r2", "target": {"meme": "hashtag:P2"}, "label": "Truthy"}).to_string();
    c.post("/api/annotations", object_form).await?.expect(201)?;
    let bogus = json!({"annotator": "r", "target": "meme:hashtag:p2", "label": "bogus"}).to_string();
    c.post("/api/annotations", bogus).await?.expect(400)?;
    let bad_target = json!({"annotator": "r", "target": "meme:nope:x", "label": "spam"}).to_string();
    c.post("/api/annotations", bad_target).await?.expect(400)?;
    c.post("/api/annotations", "{not json").await?.expect(400)?;
    let no_annotator = json!({"annotator": " ", "target": "meme:hashtag:p2", "label": "spam"}).to_string();
    c.post("/api/annotations", no_annotator).await?.expect(400)?;
    let unresolved = json!({"annotator": "r", "target": "meme:hashtag:nothing_here", "label": "spam"}).to_string();
    let r = c.post("/api/annotations", unresolved).await?.expect(422)?.json()?;
    ensure(r["record"]["unresolved"] == true && r["record"]["id"].is_u64(), || format!("422 body {r}"))?;
    Ok(())
}

pub async fn check_read_only_repeatable(c: &Client, p: &SharedPipeline) -> Result<(), String> {
    let key = top_meme(p, MemeKind::Hashtag);
    let base = meme_path(&key);
    for path in [
        "/api/themes".to_string(),
        "/api/themes/Politics/memes?sort=users".to_string(),
        base.clone(),
        format!("{base}/network?format=graphml"),
        format!("{base}/timeseries?interval=minute"),
        format!("{base}/tweets?limit=50"),
        format!("{base}/cooccurrence"),
    ] {
        let a = c.get(&path).await?;
        let b = c.get(&path).await?;
        ensure(a.status == 200 && a.body == b.body, || format!("{path} not repeatable"))?;
    }
    Ok(())
}

pub async fn check_unknown_routes(c: &Client) -> Result<(), String> {
    c.get("/api/nothing").await?.expect(404)?;
    c.get("/").await?.expect(404)?;
    Ok(())
}

/// Runs every contract check against a served seed-7 instance.
pub async fn contract(c: &Client, p: &SharedPipeline, expected_p2: Option<u64>) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("themes", check_themes(c, p).await),
        ("theme memes", check_theme_memes(c).await),
        ("meme detail", check_meme_detail(c, p, expected_p2).await),
        ("network", check_network(c, p).await),
        ("tweets cap", check_tweets(c, p).await),
        ("timeseries and cooccurrence", check_timeseries_and_cooccurrence(c, p).await),
        ("url memes", check_url_memes(c, p).await),
        ("users", check_users(c, p).await),
        ("read-only repeatable", check_read_only_repeatable(c, p).await),
        ("unknown routes", check_unknown_routes(c).await),
        ("annotations", check_annotations(c).await),
    ]
}

/// Three tweets by one author, then their user record.
pub async fn check_user_after_three_tweets() -> Result<(), String> {
    let lines: String = (1..=3)
        .map(|i| {
            format!(
                "{{\"id\":{i},\"created_at\":\"2010-10-01T10:00:0{i}Z\",\"user_id\":9,\"screen_name\":\"nine\",\"text\":\"#p2 take {i}\"}}\n"
            )
        })
        .collect();
    let (base, _) = serve(ingest(config(), lines.as_bytes()));
    let v = Client::new(&base).get("/api/users/9").await?.expect(200)?.json()?;
    ensure(v["activity"] == 3, || format!("activity {}", v["activity"]))
}

pub async fn check_empty_instance() -> Result<(), String> {
    let (base, _) = serve(ingest(EngineConfig::default(), b""));
    check_no_themes(&Client::new(&base)).await
}
