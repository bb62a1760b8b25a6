//! A minimal local chat-completion server that replays recorded transcripts,
//! for offline tests of the remote agent path.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crate::game::Action;

/// One scripted reply.
#[derive(Clone, Debug)]
pub enum MockReply {
    /// 200 with the given text as `choices[0].message.content`.
    Content(String),
    /// A bare status code with an empty JSON body.
    Status(u16),
}

impl MockReply {
    /// A well-formed action reply.
    pub fn action(action: Action) -> Self {
        MockReply::Content(format!(
            "{{\"action\": \"{action}\", \"reason\": \"scripted\"}}"
        ))
    }
}

/// What the server saw in one request.
#[derive(Clone, Debug)]
pub struct RecordedRequest {
    pub path: String,
    pub authorization: Option<String>,
    pub body: String,
}

/// A scripted chat-completion endpoint on a local port.
///
/// Replies are served in order; when the script runs out the server either
/// cycles (`cycling = true`) or answers 500.
pub struct MockChatServer {
    addr: std::net::SocketAddr,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
    hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockChatServer {
    pub fn start(script: Vec<MockReply>) -> std::io::Result<Self> {
        Self::spawn(script, false)
    }

    /// Serve the script repeatedly, for runs of unknown length.
    pub fn start_cycling(script: Vec<MockReply>) -> std::io::Result<Self> {
        Self::spawn(script, true)
    }

    /// Always reply with the same action.
    pub fn fixed_action(action: Action) -> std::io::Result<Self> {
        Self::start_cycling(vec![MockReply::action(action)])
    }

    fn spawn(script: Vec<MockReply>, cycling: bool) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let requests = Arc::new(Mutex::new(Vec::new()));
        let hits = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));

        let req_log = Arc::clone(&requests);
        let hit_counter = Arc::clone(&hits);
        let stop = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            let script = Arc::new(script);
            let cursor = Arc::new(AtomicUsize::new(0));
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let script = Arc::clone(&script);
                let cursor = Arc::clone(&cursor);
                let req_log = Arc::clone(&req_log);
                let hit_counter = Arc::clone(&hit_counter);
                std::thread::spawn(move || {
                    let _ = serve_one(stream, &script, cycling, &cursor, &req_log, &hit_counter);
                });
            }
        });

        Ok(MockChatServer {
            addr,
            requests,
            hits,
            shutdown,
            handle: Some(handle),
        })
    }

    /// Endpoint base URL, e.g. `http://127.0.0.1:PORT`.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for MockChatServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // unblock the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one(
    stream: TcpStream,
    script: &[MockReply],
    cycling: bool,
    cursor: &AtomicUsize,
    req_log: &Mutex<Vec<RecordedRequest>>,
    hits: &AtomicUsize,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    if request_line.is_empty() {
        return Ok(()); // shutdown poke
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();

    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let value = value.trim();
            match name.to_ascii_lowercase().as_str() {
                "content-length" => content_length = value.parse().unwrap_or(0),
                "authorization" => authorization = Some(value.to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body).into_owned();

    hits.fetch_add(1, Ordering::SeqCst);
    req_log
        .lock()
        .unwrap()
        .push(RecordedRequest { path, authorization, body });

    let idx = cursor.fetch_add(1, Ordering::SeqCst);
    let reply = if script.is_empty() {
        None
    } else if cycling {
        Some(&script[idx % script.len()])
    } else {
        script.get(idx)
    };

    let (status_line, payload) = match reply {
        Some(MockReply::Content(content)) => {
            let body = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content}}]
            });
            ("HTTP/1.1 200 OK".to_string(), body.to_string())
        }
        Some(MockReply::Status(code)) => {
            (format!("HTTP/1.1 {code} Scripted"), "{}".to_string())
        }
        None => ("HTTP/1.1 500 Script Exhausted".to_string(), "{}".to_string()),
    };

    let mut stream = stream;
    write!(
        stream,
        "{status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}
