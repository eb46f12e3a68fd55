//! Request-level caching for any [`TextBackend`].
//!
//! Tree search revisits states constantly, so identical backend requests are
//! common. The cache keys on a hash of (method, prompt, params), keeps an
//! in-memory map, and optionally persists entries as JSON files in a
//! directory. Hit/miss counters give exact call accounting for reports.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};

use super::{GenerationRequest, ScoredText, TextBackend, TokenProb};
use crate::error::Result;

/// Exact backend traffic counters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BackendStats {
    /// Requests answered from the cache.
    pub hits: u64,
    /// Requests forwarded to the inner backend.
    pub misses: u64,
}

impl BackendStats {
    pub fn total(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.hits as f64 / self.total() as f64
        }
    }
}

/// Caching decorator around a [`TextBackend`].
pub struct CachedBackend {
    inner: Arc<dyn TextBackend>,
    memory: Mutex<HashMap<String, String>>,
    disk_dir: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CachedBackend {
    pub fn new(inner: Arc<dyn TextBackend>) -> Self {
        Self {
            inner,
            memory: Mutex::new(HashMap::new()),
            disk_dir: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Persist cache entries under `dir` (created on first write).
    pub fn with_disk(mut self, dir: impl Into<PathBuf>) -> Self {
        self.disk_dir = Some(dir.into());
        self
    }

    pub fn stats(&self) -> BackendStats {
        BackendStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    fn key(method: &str, payload: &impl Serialize) -> String {
        let body = serde_json::to_string(payload).expect("cache key serialization");
        let mut hasher = Sha256::new();
        hasher.update(method.as_bytes());
        hasher.update(b"\x1f");
        hasher.update(body.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    fn lookup(&self, key: &str) -> Option<String> {
        if let Some(v) = self.memory.lock().unwrap().get(key) {
            return Some(v.clone());
        }
        if let Some(dir) = &self.disk_dir {
            let path = dir.join(format!("{key}.json"));
            if let Ok(text) = fs::read_to_string(path) {
                self.memory
                    .lock()
                    .unwrap()
                    .insert(key.to_string(), text.clone());
                return Some(text);
            }
        }
        None
    }

    fn store(&self, key: &str, value: &str) {
        self.memory
            .lock()
            .unwrap()
            .insert(key.to_string(), value.to_string());
        if let Some(dir) = &self.disk_dir {
            if fs::create_dir_all(dir).is_ok() {
                let _ = fs::write(dir.join(format!("{key}.json")), value);
            }
        }
    }

    fn cached<T, F>(&self, method: &str, payload: &impl Serialize, call: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        let key = Self::key(method, payload);
        if let Some(text) = self.lookup(&key) {
            if let Ok(value) = serde_json::from_str::<T>(&text) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(value);
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let value = call()?;
        self.store(&key, &serde_json::to_string(&value)?);
        Ok(value)
    }
}

impl TextBackend for CachedBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<ScoredText>> {
        self.cached("generate", request, || self.inner.generate(request))
    }

    fn score_continuation(&self, prompt: &str, continuation: &str) -> Result<f64> {
        self.cached("score", &(prompt, continuation), || {
            self.inner.score_continuation(prompt, continuation)
        })
    }

    fn next_token_probability(&self, prompt: &str, candidates: &[String]) -> Result<Vec<TokenProb>> {
        self.cached("next_token", &(prompt, candidates), || {
            self.inner.next_token_probability(prompt, candidates)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{Matcher, MockBackend, MockScript};

    fn cached() -> CachedBackend {
        let script = MockScript::builder()
            .respond(Matcher::glob("*"), &["hello world"])
            .score(Matcher::glob("*"), &[("x", -1.0)], false)
            .build();
        CachedBackend::new(Arc::new(MockBackend::new(script, 1)))
    }

    #[test]
    fn second_call_hits_cache() {
        let b = cached();
        let req = GenerationRequest::new("p");
        b.generate(&req).unwrap();
        b.generate(&req).unwrap();
        let stats = b.stats();
        assert_eq!(stats.misses, 1);
        assert_eq!(stats.hits, 1);
        assert_eq!(stats.hit_rate(), 0.5);
    }

    #[test]
    fn distinct_requests_miss() {
        let b = cached();
        b.score_continuation("a", "x").unwrap();
        b.score_continuation("b", "x").unwrap();
        assert_eq!(b.stats().misses, 2);
    }

    #[test]
    fn disk_store_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let req = GenerationRequest::new("p");
        {
            let b = cached().with_disk(dir.path());
            b.generate(&req).unwrap();
        }
        // A fresh cache over the same directory hits on disk.
        let script = MockScript::builder().build(); // would miss if called
        let b = CachedBackend::new(Arc::new(MockBackend::new(script, 1))).with_disk(dir.path());
        let out = b.generate(&req).unwrap();
        assert_eq!(out[0].text, "hello world");
        assert_eq!(b.stats().hits, 1);
    }
}
