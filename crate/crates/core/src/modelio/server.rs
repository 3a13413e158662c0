//! Minimal in-process `/predict` server for tests and offline smoke runs.
//!
//! Speaks just enough HTTP/1.1 for the client: `Content-Length` bodies and
//! keep-alive connections. Not meant for production serving.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::{Prediction, PredictionRequest};
use crate::records::builtin_scheme;

/// Error replies carry an HTTP status and a message.
pub type HandlerResult = Result<Vec<Prediction>, (u16, String)>;

/// Labels every request with its dataset's majority class.
pub fn majority_handler() -> impl Fn(&[PredictionRequest]) -> HandlerResult + Send + Sync + 'static {
    |batch: &[PredictionRequest]| {
        Ok(batch
            .iter()
            .map(|r| Prediction {
                id: r.id.clone(),
                label: builtin_scheme(r.dataset).majority_class().to_string(),
            })
            .collect())
    }
}

pub struct PredictServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<AtomicUsize>,
    accept: Option<JoinHandle<()>>,
}

impl PredictServer {
    /// Binds an ephemeral localhost port and serves until dropped.
    pub fn spawn<F>(handler: F) -> std::io::Result<Self>
    where
        F: Fn(&[PredictionRequest]) -> HandlerResult + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let handler = Arc::new(handler);
        let (stop2, requests2) = (stop.clone(), requests.clone());
        let accept = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let (handler, requests) = (handler.clone(), requests2.clone());
                std::thread::spawn(move || {
                    let _ = serve_connection(stream, &*handler, &requests);
                });
            }
        });
        Ok(PredictServer {
            addr,
            stop,
            requests,
            accept: Some(accept),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// `/predict` calls received so far.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for PredictServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        _ => "Error",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn serve_connection<F>(stream: TcpStream, handler: &F, requests: &AtomicUsize) -> std::io::Result<()>
where
    F: Fn(&[PredictionRequest]) -> HandlerResult,
{
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line)? == 0 {
            return Ok(());
        }
        let mut length = 0usize;
        let mut close = false;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                let name = name.trim().to_ascii_lowercase();
                if name == "content-length" {
                    length = value.trim().parse().unwrap_or(0);
                } else if name == "connection" && value.trim().eq_ignore_ascii_case("close") {
                    close = true;
                }
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body)?;

        let mut parts = request_line.split_whitespace();
        let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        if method != "POST" || path != "/predict" {
            respond(&mut writer, 404, "{\"error\":\"not found\"}")?;
        } else {
            requests.fetch_add(1, Ordering::SeqCst);
            match serde_json::from_slice::<Vec<PredictionRequest>>(&body) {
                Err(e) => respond(
                    &mut writer,
                    400,
                    &serde_json::json!({ "error": e.to_string() }).to_string(),
                )?,
                Ok(batch) => match handler(&batch) {
                    Ok(preds) => respond(&mut writer, 200, &serde_json::to_string(&preds)?)?,
                    Err((status, msg)) => {
                        respond(&mut writer, status, &serde_json::json!({ "error": msg }).to_string())?
                    }
                },
            }
        }
        if close {
            return Ok(());
        }
    }
}
