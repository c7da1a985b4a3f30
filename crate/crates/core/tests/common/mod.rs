#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use mmrag::synthetic::Dataset;

/// One captured HTTP request.
#[derive(Debug, Clone)]
pub struct Captured {
    pub path: String,
    pub authorization: Option<String>,
    pub body: String,
}

/// Answers scripted `(status, body)` responses in order, one per connection,
/// and records what it was sent. The last response repeats once the script
/// runs out.
pub struct StubServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Captured>>>,
    _handle: JoinHandle<()>,
}

impl StubServer {
    pub fn start(script: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        let handle = std::thread::spawn(move || {
            for (i, stream) in listener.incoming().enumerate() {
                let Ok(mut stream) = stream else { break };
                let Some(captured) = read_request(&mut stream) else {
                    continue;
                };
                seen.lock().unwrap().push(captured);
                let (status, body) = script[i.min(script.len() - 1)].clone();
                let response = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        Self {
            url,
            requests,
            _handle: handle,
        }
    }

    pub fn requests(&self) -> Vec<Captured> {
        self.requests.lock().unwrap().clone()
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> Option<Captured> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let path = request_line.split_whitespace().nth(1)?.to_string();
    let mut length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let (name, value) = line.split_once(':')?;
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().ok()?,
            "authorization" => authorization = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).ok()?;
    Some(Captured {
        path,
        authorization,
        body: String::from_utf8(body).ok()?,
    })
}

/// Writes `data` into `dir` with a config around it. `extra` is appended
/// verbatim; `[selection]` is written last so callers can append keys to it.
pub fn write_experiment(
    dir: &Path,
    data: &Dataset,
    llm: &str,
    selection: &str,
    extra: &str,
) -> PathBuf {
    data.write(dir).unwrap();
    let labels: Vec<String> = data
        .task
        .label_set
        .iter()
        .map(|l| format!("{l:?}"))
        .collect();
    let format = serde_json::to_value(data.task.output_format).unwrap();
    let config = format!(
        r#"[task]
kind = "{kind}"
dataset = "{name}"
label_set = [{labels}]
output_format = {format}

[data]
train = "train.jsonl"
test = "test.jsonl"

[embedder]
kind = "reference"
dims = 128

[llm]
{llm}

{extra}

[selection]
{selection}
"#,
        kind = data.task.kind,
        name = data.name,
        labels = labels.join(", "),
    );
    let path = dir.join("experiment.toml");
    std::fs::write(&path, config).unwrap();
    path
}

pub fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref())
        .unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}
