use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::{load_fixture, ModelIoError, Prediction, PredictionRequest, PredictionSet};
use crate::records::{EvalSet, LabelScheme, StanceRecord};

/// Where predictions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Base URL of a server; `/predict` is appended unless already present.
    Http(String),
    /// `{id, label}` JSON-lines file.
    Fixture(PathBuf),
    /// Offline exchange: requests are written as JSON lines to `requests`;
    /// responses are read from `responses` once it exists.
    Exchange { requests: PathBuf, responses: PathBuf },
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub batch_size: usize,
    pub max_in_flight: usize,
    /// Attempts per batch, including the first.
    pub attempts: usize,
    pub backoff: Duration,
    pub timeout: Duration,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            batch_size: 16,
            max_in_flight: 4,
            attempts: 5,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
            cache_dir: None,
        }
    }
}

fn requests_for(records: &[StanceRecord], eval_set: EvalSet) -> Vec<PredictionRequest> {
    let mut reqs: Vec<PredictionRequest> = records
        .iter()
        .map(|r| PredictionRequest::from_record(r, eval_set))
        .collect();
    reqs.sort_by(|a, b| a.id.cmp(&b.id));
    reqs
}

/// Cache key of one (system, seed, eval set, dataset, content) combination.
pub fn cache_key(system: &str, seed: u64, eval_set: EvalSet, scheme: &LabelScheme, records: &[StanceRecord]) -> String {
    let content = serde_json::to_vec(&requests_for(records, eval_set)).expect("requests serialize");
    let mut h = Sha256::new();
    for part in [
        system.as_bytes(),
        seed.to_string().as_bytes(),
        eval_set.as_str().as_bytes(),
        scheme.dataset.as_str().as_bytes(),
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update(Sha256::digest(&content));
    hex::encode(h.finalize())
}

fn key_lock(key: &str) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<String, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut map = LOCKS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    map.entry(key.to_string()).or_default().clone()
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(&key[..2]).join(format!("{key}.jsonl"))
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<(), ModelIoError> {
    let parent = path.parent().expect("cache paths have a parent");
    std::fs::create_dir_all(parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(data)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Collects one label per record, validated against `scheme`.
///
/// HTTP and exchange results are cached under `options.cache_dir`; a warm
/// cache answers without touching the endpoint.
pub fn request_predictions(
    records: &[StanceRecord],
    eval_set: EvalSet,
    endpoint: &Endpoint,
    system: &str,
    seed: u64,
    scheme: &LabelScheme,
    options: &ClientOptions,
) -> Result<PredictionSet, ModelIoError> {
    let assemble = |preds| PredictionSet::assemble(system, seed, scheme.dataset, eval_set, records, preds, scheme);
    if let Endpoint::Fixture(path) = endpoint {
        return assemble(load_fixture(path)?);
    }

    let cached = options.cache_dir.as_ref().map(|dir| {
        let key = cache_key(system, seed, eval_set, scheme, records);
        (cache_path(dir, &key), key_lock(&key))
    });
    let _guard = cached
        .as_ref()
        .map(|(_, lock)| lock.lock().unwrap_or_else(|e| e.into_inner()));
    if let Some((path, _)) = &cached {
        if path.exists() {
            log::debug!("cache hit {}", path.display());
            return assemble(load_fixture(path)?);
        }
    }

    let requests = requests_for(records, eval_set);
    let preds = match endpoint {
        Endpoint::Http(url) => post_batches(url, &requests, options)?,
        Endpoint::Exchange {
            requests: req_path,
            responses,
        } => {
            if !responses.exists() {
                let mut body = String::new();
                for r in &requests {
                    body.push_str(&serde_json::to_string(r)?);
                    body.push('\n');
                }
                if let Some(parent) = req_path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::write(req_path, body)?;
                return Err(ModelIoError::AwaitingResponses(req_path.clone()));
            }
            load_fixture(responses)?
        }
        Endpoint::Fixture(_) => unreachable!(),
    };
    let set = assemble(preds)?;
    if let Some((path, _)) = &cached {
        write_atomic(path, set.to_jsonl().as_bytes())?;
    }
    Ok(set)
}

fn predict_url(base: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with("/predict") {
        base.to_string()
    } else {
        format!("{base}/predict")
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || status >= 500
}

fn post_batch(
    agent: &ureq::Agent,
    url: &str,
    batch: &[PredictionRequest],
    options: &ClientOptions,
) -> Result<Vec<Prediction>, ModelIoError> {
    let attempts = options.attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(options.backoff * 2u32.saturating_pow(attempt as u32 - 1));
        }
        match agent.post(url).send_json(batch) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                if status == 200 {
                    return serde_json::from_str(&body).map_err(|e| ModelIoError::Malformed {
                        path: url.to_string(),
                        line: 1,
                        message: e.to_string(),
                    });
                }
                if !retryable(status) {
                    return Err(ModelIoError::Http { status, body });
                }
                last = format!("status {status}: {body}");
            }
            Err(e) => last = e.to_string(),
        }
        log::warn!("{url}: attempt {} failed: {last}", attempt + 1);
    }
    Err(ModelIoError::Unreachable {
        attempts,
        message: last,
    })
}

fn post_batches(
    url: &str,
    requests: &[PredictionRequest],
    options: &ClientOptions,
) -> Result<Vec<Prediction>, ModelIoError> {
    let url = predict_url(url);
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(options.timeout))
        .build()
        .into();
    let batches: Vec<&[PredictionRequest]> = requests.chunks(options.batch_size.max(1)).collect();
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let results: Mutex<Vec<Result<Vec<Prediction>, ModelIoError>>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..options.max_in_flight.max(1).min(batches.len()) {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(batch) = batches.get(i) else { break };
                let r = post_batch(&agent, &url, batch, options);
                if r.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                results.lock().unwrap_or_else(|e| e.into_inner()).push(r);
            });
        }
    });
    let mut out = Vec::with_capacity(requests.len());
    for r in results.into_inner().unwrap_or_else(|e| e.into_inner()) {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelio::server::{majority_handler, PredictServer};
    use crate::records::{builtin_scheme, DatasetKey, Split};
    use std::sync::atomic::AtomicUsize;

    fn records(n: usize) -> Vec<StanceRecord> {
        (0..n)
            .map(|i| {
                StanceRecord::new(
                    DatasetKey::Fnc1,
                    Split::Test,
                    i,
                    Some("h".into()),
                    format!("body {i}"),
                    "agree",
                )
            })
            .collect()
    }

    fn fast() -> ClientOptions {
        ClientOptions {
            backoff: Duration::from_millis(5),
            ..Default::default()
        }
    }

    #[test]
    fn batches_and_cache() {
        let server = PredictServer::spawn(majority_handler()).unwrap();
        let rs = records(500);
        let scheme = builtin_scheme(DatasetKey::Fnc1);
        let cache = tempfile::tempdir().unwrap();
        let options = ClientOptions {
            cache_dir: Some(cache.path().to_path_buf()),
            ..fast()
        };
        let endpoint = Endpoint::Http(server.url());
        let set = request_predictions(&rs, EvalSet::Test, &endpoint, "maj", 0, &scheme, &options).unwrap();
        assert_eq!(set.labels.len(), 500);
        assert!(set.labels.values().all(|l| l == "unrelated"));
        assert_eq!(server.requests(), 32);

        let again = request_predictions(&rs, EvalSet::Test, &endpoint, "maj", 0, &scheme, &options).unwrap();
        assert_eq!(again, set);
        assert_eq!(server.requests(), 32);
        let key = cache_key("maj", 0, EvalSet::Test, &scheme, &rs);
        assert_eq!(
            std::fs::read_to_string(cache_path(cache.path(), &key)).unwrap(),
            set.to_jsonl()
        );
    }

    #[test]
    fn retries_transient_failures() {
        let calls = Arc::new(AtomicUsize::new(0));
        let seen = calls.clone();
        let inner = majority_handler();
        let server = PredictServer::spawn(move |batch: &[PredictionRequest]| {
            if seen.fetch_add(1, Ordering::SeqCst) < 2 {
                Err((503, "warming up".to_string()))
            } else {
                inner(batch)
            }
        })
        .unwrap();
        let rs = records(5);
        let scheme = builtin_scheme(DatasetKey::Fnc1);
        let set = request_predictions(
            &rs,
            EvalSet::Test,
            &Endpoint::Http(server.url()),
            "m",
            0,
            &scheme,
            &fast(),
        )
        .unwrap();
        assert_eq!(set.labels.len(), 5);
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let bad = PredictServer::spawn(|_: &[PredictionRequest]| Err((400, "nope".to_string()))).unwrap();
        let err =
            request_predictions(&rs, EvalSet::Test, &Endpoint::Http(bad.url()), "m", 0, &scheme, &fast()).unwrap_err();
        assert!(matches!(err, ModelIoError::Http { status: 400, .. }), "{err}");
        assert_eq!(bad.requests(), 1);

        let down = PredictServer::spawn(|_: &[PredictionRequest]| Err((500, "down".to_string()))).unwrap();
        let opts = ClientOptions { attempts: 3, ..fast() };
        let err =
            request_predictions(&rs, EvalSet::Test, &Endpoint::Http(down.url()), "m", 0, &scheme, &opts).unwrap_err();
        assert!(matches!(err, ModelIoError::Unreachable { attempts: 3, .. }), "{err}");
    }

    #[test]
    fn exchange_mode() {
        let dir = tempfile::tempdir().unwrap();
        let rs = records(3);
        let scheme = builtin_scheme(DatasetKey::Fnc1);
        let endpoint = Endpoint::Exchange {
            requests: dir.path().join("req.jsonl"),
            responses: dir.path().join("resp.jsonl"),
        };
        let err = request_predictions(&rs, EvalSet::Test, &endpoint, "m", 0, &scheme, &fast()).unwrap_err();
        assert!(matches!(err, ModelIoError::AwaitingResponses(_)));
        let written = std::fs::read_to_string(dir.path().join("req.jsonl")).unwrap();
        let mut resp = String::new();
        for line in written.lines() {
            let r: PredictionRequest = serde_json::from_str(line).unwrap();
            resp.push_str(&format!("{{\"id\":\"{}\",\"label\":\"discuss\"}}\n", r.id));
        }
        std::fs::write(dir.path().join("resp.jsonl"), resp).unwrap();
        let set = request_predictions(&rs, EvalSet::Test, &endpoint, "m", 0, &scheme, &fast()).unwrap();
        assert!(set.labels.values().all(|l| l == "discuss"));
    }
}
