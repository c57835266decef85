//! Fetching legislation XML by persistent URI, backed by a local cache.
//!
//! Every resource lands in `<cache>/objects/<hh>/<sha256 of uri>.xml` and is
//! recorded in `<cache>/manifest.json` with its fetch time. Once a cache is
//! warm the whole pipeline runs under [`FetchPolicy::FixtureOnly`] without
//! touching the network.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const LEGISLATION_BASE: &str = "https://www.legislation.gov.uk";

/// Environment variable relocating the cache root.
pub const CACHE_ENV: &str = "LEGISGRAPH_CACHE";

/// Minimum spacing between two network requests, process-wide.
pub const POLITENESS_DELAY: Duration = Duration::from_millis(500);

pub const USER_AGENT: &str = concat!(
    "legisgraph/",
    env!("CARGO_PKG_VERSION"),
    " (offline citation-graph builder; polite single-threaded fetcher)"
);

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid act identifier `{0}`: {1}")]
    InvalidActId(String, &'static str),
    #[error("network unavailable for {0}")]
    NetworkUnavailable(String),
    #[error("response for {uri} is not well-formed XML: {reason}")]
    MalformedResponse { uri: String, reason: String },
    #[error("HTTP {status} for {uri}")]
    HttpError { uri: String, status: u16 },
    #[error("invalid uri `{0}`")]
    InvalidUri(String),
    #[error("cache I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("cache manifest is corrupt: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// URI components of an Act, e.g. `ukpga/2004/34`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ActId {
    doc_class: String,
    year: i32,
    number: u32,
}

impl ActId {
    pub fn new(doc_class: &str, year: i32, number: u32) -> Result<Self, IngestError> {
        let shown = format!("{doc_class}/{year}/{number}");
        if doc_class.is_empty()
            || !doc_class
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
            || !doc_class.starts_with(|c: char| c.is_ascii_lowercase())
        {
            return Err(IngestError::InvalidActId(
                shown,
                "document class must be lowercase ASCII",
            ));
        }
        if year < 1235 || year > Utc::now().year() {
            return Err(IngestError::InvalidActId(shown, "year out of range"));
        }
        if number == 0 {
            return Err(IngestError::InvalidActId(shown, "number must be positive"));
        }
        Ok(ActId {
            doc_class: doc_class.to_string(),
            year,
            number,
        })
    }

    pub fn housing_act_2004() -> Self {
        ActId {
            doc_class: "ukpga".into(),
            year: 2004,
            number: 34,
        }
    }

    pub fn doc_class(&self) -> &str {
        &self.doc_class
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn number(&self) -> u32 {
        self.number
    }

    /// `ukpga/2004/34`
    pub fn path(&self) -> String {
        format!("{}/{}/{}", self.doc_class, self.year, self.number)
    }

    /// Human-facing page of the Act.
    pub fn page_url(&self) -> String {
        format!("{LEGISLATION_BASE}/{}", self.path())
    }

    pub fn section_page_url(&self, label: &str) -> String {
        format!("{LEGISLATION_BASE}/{}/section/{label}", self.path())
    }
}

impl fmt::Display for ActId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path())
    }
}

impl FromStr for ActId {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().trim_matches('/').split('/').collect();
        let [class, year, number] = parts.as_slice() else {
            return Err(IngestError::InvalidActId(
                s.into(),
                "expected class/year/number",
            ));
        };
        let year = year
            .parse()
            .map_err(|_| IngestError::InvalidActId(s.into(), "year is not an integer"))?;
        let number = number
            .parse()
            .map_err(|_| IngestError::InvalidActId(s.into(), "number is not a positive integer"))?;
        ActId::new(class, year, number)
    }
}

impl TryFrom<String> for ActId {
    type Error = IngestError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ActId> for String {
    fn from(id: ActId) -> String {
        id.path()
    }
}

/// Full-data XML locator of an Act.
pub fn act_data_url(act: &ActId) -> String {
    format!("{LEGISLATION_BASE}/{}/data.xml", act.path())
}

/// XML locator of one section. Labels may carry letter suffixes (`155A`).
pub fn section_data_url(act: &ActId, section: impl fmt::Display) -> String {
    format!(
        "{LEGISLATION_BASE}/{}/section/{section}/data.xml",
        act.path()
    )
}

/// Lowercases scheme and host and strips trailing slashes from the path.
pub fn normalize_uri(uri: &str) -> Result<String, IngestError> {
    let mut parsed =
        url::Url::parse(uri.trim()).map_err(|_| IngestError::InvalidUri(uri.into()))?;
    if parsed.cannot_be_a_base() || parsed.host_str().is_none() {
        return Err(IngestError::InvalidUri(uri.into()));
    }
    let path = parsed.path().trim_end_matches('/').to_string();
    parsed.set_path(&path);
    parsed.set_fragment(None);
    let mut out = parsed.to_string();
    if parsed.query().is_none() {
        while out.ends_with('/') {
            out.pop();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchPolicy {
    CacheFirst,
    NetworkFirst,
    FixtureOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Network,
    Cache,
    Fixture,
}

#[derive(Debug, Clone)]
pub struct CachedResource {
    pub uri: String,
    pub body: Vec<u8>,
    pub fetched_at: DateTime<Utc>,
    pub source: Source,
}

impl CachedResource {
    /// Wraps in-memory XML, e.g. a test fixture.
    pub fn from_bytes(uri: impl Into<String>, body: impl Into<Vec<u8>>) -> Self {
        CachedResource {
            uri: uri.into(),
            body: body.into(),
            fetched_at: Utc::now(),
            source: Source::Fixture,
        }
    }

    pub fn text(&self) -> Result<&str, std::str::Utf8Error> {
        std::str::from_utf8(&self.body)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub fetched_at: DateTime<Utc>,
    pub bytes: usize,
}

/// On-disk store of fetched resources.
/// Body and retrieval time of a cached resource.
pub type CacheEntry = (Vec<u8>, DateTime<Utc>);

#[derive(Debug)]
pub struct Cache {
    root: PathBuf,
    manifest: Mutex<BTreeMap<String, ManifestEntry>>,
    uri_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Cache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, IngestError> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        let manifest_path = root.join("manifest.json");
        let manifest = if manifest_path.exists() {
            serde_json::from_slice(&fs::read(&manifest_path)?)?
        } else {
            BTreeMap::new()
        };
        Ok(Cache {
            root,
            manifest: Mutex::new(manifest),
            uri_locks: Mutex::new(HashMap::new()),
        })
    }

    /// `$LEGISGRAPH_CACHE`, falling back to `./.legisgraph-cache`.
    pub fn default_root() -> PathBuf {
        std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".legisgraph-cache"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn relative_path(uri: &str) -> String {
        let digest = hex::encode(Sha256::digest(uri.as_bytes()));
        format!("objects/{}/{}.xml", &digest[..2], digest)
    }

    pub fn contains(&self, uri: &str) -> bool {
        normalize_uri(uri)
            .map(|u| self.manifest.lock().unwrap().contains_key(&u))
            .unwrap_or(false)
    }

    pub fn uris(&self) -> Vec<String> {
        self.manifest.lock().unwrap().keys().cloned().collect()
    }

    pub fn get(&self, uri: &str) -> Result<Option<CacheEntry>, IngestError> {
        let uri = normalize_uri(uri)?;
        let entry = self.manifest.lock().unwrap().get(&uri).cloned();
        let Some(entry) = entry else {
            return Ok(None);
        };
        match fs::read(self.root.join(&entry.path)) {
            Ok(body) => Ok(Some((body, entry.fetched_at))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(
        &self,
        uri: &str,
        body: &[u8],
        fetched_at: DateTime<Utc>,
    ) -> Result<(), IngestError> {
        let uri = normalize_uri(uri)?;
        let lock = self
            .uri_locks
            .lock()
            .unwrap()
            .entry(uri.clone())
            .or_default()
            .clone();
        let _guard = lock.lock().unwrap();

        let rel = Self::relative_path(&uri);
        let path = self.root.join(&rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("xml.part");
        fs::write(&tmp, body)?;
        fs::rename(&tmp, &path)?;

        let mut manifest = self.manifest.lock().unwrap();
        manifest.insert(
            uri,
            ManifestEntry {
                path: rel,
                fetched_at,
                bytes: body.len(),
            },
        );
        let tmp = self.root.join("manifest.json.part");
        fs::write(&tmp, serde_json::to_vec_pretty(&*manifest)?)?;
        fs::rename(tmp, self.root.join("manifest.json"))?;
        Ok(())
    }
}

/// Blocks until at least [`POLITENESS_DELAY`] has passed since the previous
/// network request made by this process.
fn wait_for_turn() {
    static LAST: OnceLock<Mutex<Option<Instant>>> = OnceLock::new();
    let mut last = LAST.get_or_init(|| Mutex::new(None)).lock().unwrap();
    if let Some(prev) = *last {
        let elapsed = prev.elapsed();
        if elapsed < POLITENESS_DELAY {
            std::thread::sleep(POLITENESS_DELAY - elapsed);
        }
    }
    *last = Some(Instant::now());
}

pub struct Fetcher {
    cache: Cache,
    client: Option<reqwest::blocking::Client>,
    network_calls: std::sync::atomic::AtomicUsize,
}

impl Fetcher {
    pub fn new(cache: Cache) -> Self {
        Fetcher {
            cache,
            client: None,
            network_calls: Default::default(),
        }
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    /// Number of HTTP requests issued so far.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(std::sync::atomic::Ordering::SeqCst)
    }

    pub fn fetch(&mut self, uri: &str, policy: FetchPolicy) -> Result<CachedResource, IngestError> {
        let uri = normalize_uri(uri)?;
        match policy {
            FetchPolicy::FixtureOnly => self
                .cached(&uri, Source::Fixture)?
                .ok_or(IngestError::NetworkUnavailable(uri.clone())),
            FetchPolicy::CacheFirst => match self.cached(&uri, Source::Cache)? {
                Some(hit) => Ok(hit),
                None => self.download(&uri),
            },
            FetchPolicy::NetworkFirst => match self.download(&uri) {
                Ok(res) => Ok(res),
                Err(IngestError::NetworkUnavailable(_)) => self
                    .cached(&uri, Source::Cache)?
                    .ok_or(IngestError::NetworkUnavailable(uri.clone())),
                Err(e) => Err(e),
            },
        }
    }

    fn cached(&self, uri: &str, source: Source) -> Result<Option<CachedResource>, IngestError> {
        Ok(self
            .cache
            .get(uri)?
            .map(|(body, fetched_at)| CachedResource {
                uri: uri.to_string(),
                body,
                fetched_at,
                source,
            }))
    }

    fn client(&mut self) -> Result<&reqwest::blocking::Client, IngestError> {
        if self.client.is_none() {
            let client = reqwest::blocking::Client::builder()
                .user_agent(USER_AGENT)
                .timeout(Duration::from_secs(60))
                .build()
                .map_err(|e| IngestError::NetworkUnavailable(e.to_string()))?;
            self.client = Some(client);
        }
        Ok(self.client.as_ref().unwrap())
    }

    fn download(&mut self, uri: &str) -> Result<CachedResource, IngestError> {
        wait_for_turn();
        self.network_calls
            .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        log::info!("GET {uri}");
        let response = self
            .client()?
            .get(uri)
            .send()
            .map_err(|e| IngestError::NetworkUnavailable(format!("{uri}: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            return Err(IngestError::HttpError {
                uri: uri.to_string(),
                status: status.as_u16(),
            });
        }
        let body = response
            .bytes()
            .map_err(|e| IngestError::NetworkUnavailable(format!("{uri}: {e}")))?
            .to_vec();
        check_xml(uri, &body)?;
        let fetched_at = Utc::now();
        self.cache.put(uri, &body, fetched_at)?;
        Ok(CachedResource {
            uri: uri.to_string(),
            body,
            fetched_at,
            source: Source::Network,
        })
    }
}

fn check_xml(uri: &str, body: &[u8]) -> Result<(), IngestError> {
    let malformed = |reason: String| IngestError::MalformedResponse {
        uri: uri.to_string(),
        reason,
    };
    let text = std::str::from_utf8(body).map_err(|e| malformed(e.to_string()))?;
    roxmltree::Document::parse_with_options(text, crate::parser::xml_options())
        .map(|_| ())
        .map_err(|e| malformed(e.to_string()))
}
