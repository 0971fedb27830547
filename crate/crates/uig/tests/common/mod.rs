//! Shared test support: a stub HTTP server speaking the backend wire
//! protocol (wrapping the simulator, with scriptable fault injection), a
//! call-counting backend decorator, and random constraint-set generators.

#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use uig::backend::sim::SimBackend;
use uig::backend::UnifiedModelBackend;
use uig::error::Result;
use uig::image::{ImageRef, MediaKind};
use uig::sim::{ColorName, Constraint, ConstraintSet, NoiseConfig, Noun, Relation, StyleName};

// ---------------------------------------------------------------------------
// Stub HTTP server
// ---------------------------------------------------------------------------

/// A scripted deviation from normal handling, consumed one per request.
#[derive(Debug, Clone)]
pub enum Fault {
    /// Respond with this status and a JSON error body.
    Status(u16),
    /// Sleep before handling normally (drives client timeouts).
    DelayMs(u64),
    /// Respond 200 with a non-JSON body.
    Malformed,
}

#[derive(Debug, Clone)]
pub struct Hit {
    pub path: String,
    pub request_id: Option<String>,
    pub authorization: Option<String>,
    pub body: Value,
}

struct ServerState {
    running: AtomicBool,
    sim: SimBackend,
    require_token: Option<String>,
    faults: Mutex<HashMap<String, Vec<Fault>>>,
    hits: Mutex<Vec<Hit>>,
}

/// Minimal HTTP/1.1 server wrapping a [`SimBackend`] behind the wire
/// protocol. One request per connection (`Connection: close`).
pub struct StubServer {
    addr: SocketAddr,
    state: Arc<ServerState>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn serve_sim(noise: NoiseConfig) -> StubServer {
        StubServer::start(SimBackend::new(noise), None)
    }

    pub fn serve_sim_with_token(noise: NoiseConfig, token: &str) -> StubServer {
        StubServer::start(SimBackend::new(noise), Some(token.to_string()))
    }

    fn start(sim: SimBackend, require_token: Option<String>) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().unwrap();
        let state = Arc::new(ServerState {
            running: AtomicBool::new(true),
            sim,
            require_token,
            faults: Mutex::new(HashMap::new()),
            hits: Mutex::new(Vec::new()),
        });
        let thread_state = state.clone();
        let handle = std::thread::spawn(move || {
            while thread_state.running.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        // Per-connection threads so a scripted delay cannot
                        // block the accept loop and stack client timeouts.
                        let conn_state = thread_state.clone();
                        std::thread::spawn(move || handle_connection(stream, &conn_state));
                    }
                    Err(_) => break,
                }
            }
        });
        StubServer {
            addr,
            state,
            handle: Some(handle),
        }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Queue a fault for the next request(s) to `path` (FIFO).
    pub fn push_fault(&self, path: &str, fault: Fault) {
        self.state
            .faults
            .lock()
            .unwrap()
            .entry(path.to_string())
            .or_default()
            .push(fault);
    }

    pub fn hits(&self) -> Vec<Hit> {
        self.state.hits.lock().unwrap().clone()
    }

    pub fn hits_for(&self, path: &str) -> Vec<Hit> {
        self.hits().into_iter().filter(|h| h.path == path).collect()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.state.running.store(false, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, state: &ServerState) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
    let _ = stream.set_write_timeout(Some(Duration::from_secs(5)));
    let Some((method, path, headers, body)) = read_request(&mut stream) else {
        return;
    };

    if method == "GET" {
        // Health probe; status content is irrelevant to the client.
        write_response(&mut stream, 200, &json!({"ok": true}).to_string());
        return;
    }

    let request_id = headers.get("request_id").cloned();
    let authorization = headers.get("authorization").cloned();
    let body_json: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    state.hits.lock().unwrap().push(Hit {
        path: path.clone(),
        request_id,
        authorization: authorization.clone(),
        body: body_json.clone(),
    });

    // Scripted fault, if any.
    let fault = state
        .faults
        .lock()
        .unwrap()
        .get_mut(&path)
        .and_then(|q| if q.is_empty() { None } else { Some(q.remove(0)) });
    match fault {
        Some(Fault::Status(code)) => {
            let body = json!({"error": {"code": "injected", "message": "scripted fault"}});
            write_response(&mut stream, code, &body.to_string());
            return;
        }
        Some(Fault::DelayMs(ms)) => {
            std::thread::sleep(Duration::from_millis(ms));
            // Fall through; the client has usually timed out by now and the
            // write below lands on a dead socket, which is fine.
        }
        Some(Fault::Malformed) => {
            write_response(&mut stream, 200, "this is not json");
            return;
        }
        None => {}
    }

    if let Some(expected) = &state.require_token {
        let ok = authorization
            .as_deref()
            .is_some_and(|h| h == format!("Bearer {expected}"));
        if !ok {
            let body = json!({"error": {"code": "unauthorized", "message": "bad token"}});
            write_response(&mut stream, 401, &body.to_string());
            return;
        }
    }

    let response = dispatch(state, &path, &body_json);
    match response {
        Ok(value) => write_response(&mut stream, 200, &value.to_string()),
        Err((code, message)) => {
            let body = json!({"error": {"code": "bad_request", "message": message}});
            write_response(&mut stream, code, &body.to_string());
        }
    }
}

fn dispatch(state: &ServerState, path: &str, body: &Value) -> std::result::Result<Value, (u16, String)> {
    let bad = |m: String| (400u16, m);
    match path {
        "/v1/generate" => {
            let prompt = body["prompt"].as_str().ok_or_else(|| bad("missing prompt".into()))?;
            let seed = body["seed"].as_u64().ok_or_else(|| bad("missing seed".into()))?;
            let image = state.sim.generate(prompt, seed).map_err(|e| bad(e.to_string()))?;
            Ok(json!({"image": wire_image(&image)}))
        }
        "/v1/understand" => {
            let image = parse_wire_image(&body["image"]).map_err(bad)?;
            let prompt = body["prompt"].as_str().ok_or_else(|| bad("missing prompt".into()))?;
            let text = state.sim.understand(&image, prompt).map_err(|e| bad(e.to_string()))?;
            Ok(json!({"text": text}))
        }
        "/v1/edit" => {
            let image = parse_wire_image(&body["image"]).map_err(bad)?;
            let instruction = body["instruction"]
                .as_str()
                .ok_or_else(|| bad("missing instruction".into()))?;
            let seed = body["seed"].as_u64().ok_or_else(|| bad("missing seed".into()))?;
            let out = state
                .sim
                .edit(&image, instruction, seed)
                .map_err(|e| bad(e.to_string()))?;
            Ok(json!({"image": wire_image(&out)}))
        }
        _ => Err((404, format!("no such endpoint {path}"))),
    }
}

fn wire_image(image: &ImageRef) -> Value {
    let format = match image.media() {
        MediaKind::RasterPng => "png",
        MediaKind::SceneGraph => "scene-graph",
    };
    json!({"format": format, "data_b64": BASE64.encode(image.payload())})
}

fn parse_wire_image(value: &Value) -> std::result::Result<ImageRef, String> {
    let format = value["format"].as_str().ok_or("missing image.format")?;
    let media = match format {
        "png" => MediaKind::RasterPng,
        "scene-graph" => MediaKind::SceneGraph,
        other => return Err(format!("unknown format {other}")),
    };
    let data = value["data_b64"].as_str().ok_or("missing image.data_b64")?;
    let payload = BASE64.decode(data).map_err(|e| e.to_string())?;
    Ok(ImageRef::new(media, payload))
}

type ParsedRequest = (String, String, HashMap<String, String>, Vec<u8>);

fn read_request(stream: &mut TcpStream) -> Option<ParsedRequest> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        if let Some(pos) = find_header_end(&buf) {
            break pos;
        }
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buf.extend_from_slice(&chunk[..n]);
    };

    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let mut lines = head.lines();
    let request_line = lines.next()?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();

    let mut headers = HashMap::new();
    for line in lines {
        if let Some((k, v)) = line.split_once(':') {
            headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }

    let content_length: usize = headers
        .get("content-length")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let mut body = buf[header_end + 4..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            break;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    body.truncate(content_length);
    Some((method, path, headers, body))
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn write_response(stream: &mut TcpStream, code: u16, body: &str) {
    let reason = match code {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        404 => "Not Found",
        503 => "Service Unavailable",
        _ => "Response",
    };
    let response = format!(
        "HTTP/1.1 {code} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

// ---------------------------------------------------------------------------
// Call-counting backend decorator
// ---------------------------------------------------------------------------

pub struct CountingBackend<B> {
    inner: B,
    pub generates: AtomicU32,
    pub understands: AtomicU32,
    pub edits: AtomicU32,
}

impl<B> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend {
            inner,
            generates: AtomicU32::new(0),
            understands: AtomicU32::new(0),
            edits: AtomicU32::new(0),
        }
    }

    pub fn counts(&self) -> (u32, u32, u32) {
        (
            self.generates.load(Ordering::SeqCst),
            self.understands.load(Ordering::SeqCst),
            self.edits.load(Ordering::SeqCst),
        )
    }

    pub fn reset(&self) {
        self.generates.store(0, Ordering::SeqCst);
        self.understands.store(0, Ordering::SeqCst);
        self.edits.store(0, Ordering::SeqCst);
    }
}

impl<B: UnifiedModelBackend> UnifiedModelBackend for CountingBackend<B> {
    fn probe(&self) -> Result<()> {
        self.inner.probe()
    }
    fn generate(&self, prompt: &str, seed: u64) -> Result<ImageRef> {
        self.generates.fetch_add(1, Ordering::SeqCst);
        self.inner.generate(prompt, seed)
    }
    fn understand(&self, image: &ImageRef, prompt: &str) -> Result<String> {
        self.understands.fetch_add(1, Ordering::SeqCst);
        self.inner.understand(image, prompt)
    }
    fn edit(&self, image: &ImageRef, instruction: &str, seed: u64) -> Result<ImageRef> {
        self.edits.fetch_add(1, Ordering::SeqCst);
        self.inner.edit(image, instruction, seed)
    }
}

// ---------------------------------------------------------------------------
// Random constraint-set generators
// ---------------------------------------------------------------------------

fn nth_noun(i: usize) -> Noun {
    let all: Vec<Noun> = Noun::all().collect();
    all[i % all.len()]
}

fn random_color(rng: &mut ChaCha8Rng) -> ColorName {
    let all: Vec<ColorName> = ColorName::all().collect();
    all[rng.gen_range(0..all.len())]
}

fn random_relation(rng: &mut ChaCha8Rng) -> Relation {
    let all: Vec<Relation> = Relation::all().collect();
    all[rng.gen_range(0..all.len())]
}

fn random_style(rng: &mut ChaCha8Rng) -> StyleName {
    let all: Vec<StyleName> = StyleName::all().collect();
    all[rng.gen_range(0..all.len())]
}

fn maybe_not(rng: &mut ChaCha8Rng, c: Constraint) -> Constraint {
    if rng.gen_bool(0.25) {
        Constraint::negated(c)
    } else {
        c
    }
}

/// Constraints over pairwise-disjoint nouns: fully independent violation
/// draws and non-interfering repairs. `k` must not exceed half the noun
/// vocabulary (relations consume two nouns).
pub fn random_disjoint_constraints(rng: &mut ChaCha8Rng, k: usize) -> ConstraintSet {
    let mut noun_order: Vec<usize> = (0..Noun::all().count()).collect();
    // Fisher-Yates on indexes for a seeded shuffle.
    for i in (1..noun_order.len()).rev() {
        noun_order.swap(i, rng.gen_range(0..=i));
    }
    let mut pool = noun_order.into_iter().map(nth_noun);
    let mut constraints = Vec::with_capacity(k);
    for _ in 0..k {
        let kind = rng.gen_range(0..4u32);
        let c = match kind {
            0 => Constraint::Count {
                noun: pool.next().expect("noun pool exhausted"),
                n: rng.gen_range(0..=4),
            },
            1 => Constraint::Color {
                noun: pool.next().expect("noun pool exhausted"),
                color: random_color(rng),
            },
            2 => Constraint::Rel {
                subject: pool.next().expect("noun pool exhausted"),
                relation: random_relation(rng),
                object: pool.next().expect("noun pool exhausted"),
            },
            _ => Constraint::Style {
                style: random_style(rng),
                noun: pool.next().expect("noun pool exhausted"),
            },
        };
        constraints.push(maybe_not(rng, c));
    }
    ConstraintSet::new(constraints).expect("disjoint constraints cannot collide")
}

/// Internally-compatible constraint sets that do share nouns: counts and
/// colors/styles may target the same noun; relation nouns never carry
/// count constraints; one color constraint per noun; one style constraint
/// per (noun, style); one relation per unordered noun pair.
pub fn random_compatible_constraints(rng: &mut ChaCha8Rng, k: usize) -> ConstraintSet {
    #[derive(Default, Clone)]
    struct NounState {
        counted: bool,
        retired: bool, // count 0: nothing else may touch it
        colored: bool,
        styled: Vec<StyleName>,
        related: bool,
    }
    let nouns: Vec<Noun> = Noun::all().collect();
    let mut state: Vec<NounState> = vec![NounState::default(); nouns.len()];
    let mut rel_pairs: Vec<(usize, usize)> = Vec::new();
    let mut constraints: Vec<Constraint> = Vec::new();

    let mut attempts = 0;
    while constraints.len() < k && attempts < 200 {
        attempts += 1;
        let kind = rng.gen_range(0..4u32);
        let negate = rng.gen_bool(0.25);
        match kind {
            0 => {
                // count / not(count): a fresh noun untouched by anything.
                let candidates: Vec<usize> = (0..nouns.len())
                    .filter(|i| {
                        let s = &state[*i];
                        !s.counted && !s.retired && !s.colored && !s.related && s.styled.is_empty()
                    })
                    .collect();
                if candidates.is_empty() {
                    continue;
                }
                let i = candidates[rng.gen_range(0..candidates.len())];
                let n = rng.gen_range(0..=4u32);
                state[i].counted = true;
                if n == 0 && !negate {
                    state[i].retired = true;
                }
                let c = Constraint::Count { noun: nouns[i], n };
                constraints.push(if negate { Constraint::negated(c) } else { c });
            }
            1 => {
                let candidates: Vec<usize> = (0..nouns.len())
                    .filter(|i| !state[*i].colored && !state[*i].retired)
                    .collect();
                if candidates.is_empty() {
                    continue;
                }
                let i = candidates[rng.gen_range(0..candidates.len())];
                state[i].colored = true;
                let c = Constraint::Color {
                    noun: nouns[i],
                    color: random_color(rng),
                };
                constraints.push(if negate { Constraint::negated(c) } else { c });
            }
            2 => {
                // rel / not(rel): two distinct non-counted, non-retired nouns,
                // unordered pair unused.
                let candidates: Vec<usize> = (0..nouns.len())
                    .filter(|i| !state[*i].counted && !state[*i].retired)
                    .collect();
                if candidates.len() < 2 {
                    continue;
                }
                let a = candidates[rng.gen_range(0..candidates.len())];
                let b = candidates[rng.gen_range(0..candidates.len())];
                if a == b {
                    continue;
                }
                let pair = (a.min(b), a.max(b));
                if rel_pairs.contains(&pair) {
                    continue;
                }
                rel_pairs.push(pair);
                state[a].related = true;
                state[b].related = true;
                let c = Constraint::Rel {
                    subject: nouns[a],
                    relation: random_relation(rng),
                    object: nouns[b],
                };
                constraints.push(if negate { Constraint::negated(c) } else { c });
            }
            _ => {
                let style = random_style(rng);
                let candidates: Vec<usize> = (0..nouns.len())
                    .filter(|i| !state[*i].retired && !state[*i].styled.contains(&style))
                    .collect();
                if candidates.is_empty() {
                    continue;
                }
                let i = candidates[rng.gen_range(0..candidates.len())];
                state[i].styled.push(style);
                let c = Constraint::Style {
                    style,
                    noun: nouns[i],
                };
                constraints.push(if negate { Constraint::negated(c) } else { c });
            }
        }
    }
    ConstraintSet::new(constraints).expect("compatibility rules prevent duplicates")
}

/// Random canonical edit script, 1..=5 ops.
pub fn random_edit_script(rng: &mut ChaCha8Rng) -> uig::sim::EditScript {
    use uig::sim::EditOp;
    let n_ops = rng.gen_range(1..=5);
    let mut ops = Vec::with_capacity(n_ops);
    for _ in 0..n_ops {
        let noun = nth_noun(rng.gen_range(0..Noun::all().count()));
        let op = match rng.gen_range(0..7u32) {
            0 => EditOp::Add {
                noun,
                color: if rng.gen_bool(0.5) {
                    Some(random_color(rng))
                } else {
                    None
                },
            },
            1 => EditOp::Remove { noun },
            2 => EditOp::SetColor {
                noun,
                color: random_color(rng),
            },
            3 => EditOp::SetRel {
                subject: noun,
                relation: random_relation(rng),
                object: nth_noun(rng.gen_range(0..Noun::all().count())),
            },
            4 => EditOp::SetCount {
                noun,
                n: rng.gen_range(0..=6),
            },
            5 => EditOp::SetStyle {
                noun,
                style: random_style(rng),
            },
            _ => EditOp::ClearStyle {
                noun,
                style: random_style(rng),
            },
        };
        ops.push(op);
    }
    uig::sim::EditScript::new(ops).expect("non-empty")
}

/// In-memory suite over generated constraint prompts.
pub fn synthetic_suite(seed: u64, entries: usize, constraints_per_prompt: usize) -> uig::eval::Suite {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(entries);
    for i in 0..entries {
        let cs = random_disjoint_constraints(&mut rng, constraints_per_prompt);
        let prompt = uig::trace::PromptSpec::new(format!("e{i:04}"), cs.render()).unwrap();
        out.push(uig::eval::SuiteEntry {
            prompt,
            judge: uig::eval::JudgeSpec::Constraints(cs),
        });
    }
    uig::eval::Suite {
        entries: out,
        digest: format!("synthetic-{seed}-{entries}-{constraints_per_prompt}"),
    }
}
