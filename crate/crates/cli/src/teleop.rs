//! Teleoperation server.
//!
//! The engine steps on its own thread. Clients talk to it only through a
//! request queue (client to engine) and a broadcast channel of serialised
//! messages (engine to clients). The first client to connect steers; later
//! ones watch until it leaves.
//!
//! Client messages (JSON text frames on `/ws`), each answered with
//! `{"type":"ack","seq":n}` or `{"type":"err","seq":n,"msg":...}`:
//!
//! ```text
//! {"type":"set_magnet","pos":[x,y,z],"axis":[x,y,z]}   metres, any non-zero axis
//! {"type":"pause"} {"type":"resume"} {"type":"reset"}
//! {"type":"load_scenario","name":"aneurysm-embolization"}
//! {"type":"record","on":true|false}
//! ```
//!
//! `seq` may be supplied by the client; otherwise messages are numbered from
//! 1 per connection. Server messages are `hello`, `scene`, `frame` and
//! `fatal`.
//!
//! Poses are applied in arrival order, at most one per frame tick, so a
//! client sending faster than the frame rate is throttled, never reordered.
//! Starting a recording resets the run to step 0; stopping it writes the
//! command log and returns the trajectory hash that `magworm run --replay`
//! reproduces.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::mpsc as std_mpsc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, oneshot, watch};
use tower_http::services::ServeDir;

use magworm::engine::{CommandLog, Controller, ExternalController, MagnetPose, Simulation};
use magworm::scenario::Scenario;
use magworm::Trajectory;
use magworm::Vec3;

pub const DEFAULT_FRAME_RATE: f64 = 60.0;
/// Poses waiting to be applied; further `set_magnet` messages are refused.
pub const MAX_QUEUED_POSES: usize = 120;
const BROADCAST_CAPACITY: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ServeOptions {
    pub scenario: String,
    /// Simulated seconds per wall second requested.
    pub rt_factor: f64,
    /// Frames per second, at most [`DEFAULT_FRAME_RATE`].
    pub frame_rate: f64,
    pub static_dir: Option<PathBuf>,
    pub log_dir: PathBuf,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            rt_factor: 1.0,
            frame_rate: DEFAULT_FRAME_RATE,
            static_dir: None,
            log_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    SetMagnet { pos: [f64; 3], axis: [f64; 3] },
    Pause,
    Resume,
    Reset,
    LoadScenario { name: String },
    Record { on: bool },
}

enum Request {
    Join { reply: oneshot::Sender<Joined> },
    Leave { client: u64 },
    Command { client: u64, msg: ClientMessage, reply: oneshot::Sender<Result<Value, String>> },
}

struct Joined {
    client: u64,
    controlling: bool,
    scene: String,
}

struct Recording {
    trajectory: Trajectory,
}

struct Engine {
    opts: ServeOptions,
    scenario: Scenario,
    sim: Simulation,
    paused: bool,
    clients: usize,
    controller: Option<u64>,
    next_client: u64,
    poses: VecDeque<MagnetPose>,
    recording: Option<Recording>,
    sessions: u64,
    out: broadcast::Sender<String>,
    last_rt: f64,
}

fn fresh_sim(scenario: &Scenario) -> Simulation {
    let initial = scenario.world.magnet_pose();
    Simulation::new(scenario.world.clone(), Controller::External(ExternalController::new(initial)))
}

fn v3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// The `scene` message: id, time step and the wall outline in the robot's plane.
pub fn scene_message(scenario: &Scenario) -> String {
    let world = &scenario.world;
    let pts: Vec<Vec3> = world.rod.nodes.iter().map(|n| n.rest_position).collect();
    let z = pts.iter().map(|p| p.z).sum::<f64>() / pts.len() as f64;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut extend = |p: &Vec3| {
        lo = [lo[0].min(p.x), lo[1].min(p.y)];
        hi = [hi[0].max(p.x), hi[1].max(p.y)];
    };
    pts.iter().for_each(&mut extend);
    if let Some(route) = &world.scene.route {
        let n = 64;
        (0..=n).for_each(|k| extend(&route.point_at(route.length() * k as f64 / n as f64)));
    }
    let margin = 10e-3;
    let lo = [lo[0] - margin, lo[1] - margin];
    let hi = [hi[0] + margin, hi[1] + margin];
    let segments = world.scene.slice_outline(z, lo, hi, 160);
    json!({
        "type": "scene",
        "id": scenario.name,
        "dt": world.config.dt,
        "sdf_mesh": {"kind": "outline", "z": z, "bounds": [lo, hi], "segments": segments},
    })
    .to_string()
}

impl Engine {
    fn new(scenario: Scenario, opts: ServeOptions, out: broadcast::Sender<String>) -> Self {
        let sim = fresh_sim(&scenario);
        Self {
            opts,
            scenario,
            sim,
            paused: false,
            clients: 0,
            controller: None,
            next_client: 1,
            poses: VecDeque::new(),
            recording: None,
            sessions: 0,
            out,
            last_rt: 0.0,
        }
    }

    fn running(&self) -> bool {
        self.clients > 0 && !self.paused
    }

    fn broadcast(&self, msg: String) {
        // no receivers is fine
        let _ = self.out.send(msg);
    }

    fn frame_message(&self) -> String {
        let state = &self.sim.state;
        let world = &self.sim.world;
        let (kappa, speed, _, b) = world.frame_metrics(state);
        let pose = world.magnet_pose();
        json!({
            "type": "frame",
            "t": state.time(),
            "step": state.step,
            "nodes": state.rod.positions.iter().map(v3).collect::<Vec<_>>(),
            "magnet": {"pos": v3(&pose.position), "axis": v3(&pose.axis)},
            "cargo": state.cargo.iter().map(|c| v3(&c.position)).collect::<Vec<_>>(),
            "metrics": {"kappa_max": kappa, "head_speed": speed, "B_at_head": if b.is_finite() { b } else { 0.0 }},
            "rt_factor": self.last_rt,
            "recording": self.recording.is_some(),
        })
        .to_string()
    }

    fn restart(&mut self) {
        self.sim = fresh_sim(&self.scenario);
        self.poses.clear();
        if let Some(rec) = &mut self.recording {
            rec.trajectory = Trajectory::default();
            self.sim.record(&mut rec.trajectory);
        }
    }

    fn handle(&mut self, req: Request) {
        match req {
            Request::Join { reply } => {
                let client = self.next_client;
                self.next_client += 1;
                self.clients += 1;
                let controlling = self.controller.is_none();
                if controlling {
                    self.controller = Some(client);
                }
                let _ = reply.send(Joined { client, controlling, scene: scene_message(&self.scenario) });
            }
            Request::Leave { client } => {
                self.clients = self.clients.saturating_sub(1);
                if self.controller == Some(client) {
                    self.controller = None;
                }
            }
            Request::Command { client, msg, reply } => {
                let result = if self.controller == Some(client) {
                    self.command(msg)
                } else {
                    Err("read-only client: another client has control".into())
                };
                let _ = reply.send(result);
            }
        }
    }

    fn command(&mut self, msg: ClientMessage) -> Result<Value, String> {
        match msg {
            ClientMessage::SetMagnet { pos, axis } => {
                if self.sim.world.magnet.is_none() {
                    return Err("scenario has no magnet".into());
                }
                let pose = MagnetPose::new(Vec3::from(pos), Vec3::from(axis)).map_err(|e| e.to_string())?;
                if !pose.position.iter().all(|c| c.is_finite()) {
                    return Err("magnet position must be finite".into());
                }
                if self.poses.len() >= MAX_QUEUED_POSES {
                    return Err(format!("rate limited: {MAX_QUEUED_POSES} poses already queued"));
                }
                self.poses.push_back(pose);
                Ok(json!({"queued": self.poses.len()}))
            }
            ClientMessage::Pause => {
                self.paused = true;
                Ok(json!({}))
            }
            ClientMessage::Resume => {
                self.paused = false;
                Ok(json!({}))
            }
            ClientMessage::Reset => {
                self.restart();
                self.broadcast(self.frame_message());
                Ok(json!({}))
            }
            ClientMessage::LoadScenario { name } => {
                let scenario = Scenario::load(&name).map_err(|e| e.to_string())?;
                self.scenario = scenario;
                self.recording = None;
                self.restart();
                self.broadcast(scene_message(&self.scenario));
                self.broadcast(self.frame_message());
                Ok(json!({"id": self.scenario.name}))
            }
            ClientMessage::Record { on: true } => {
                if self.recording.is_some() {
                    return Err("already recording".into());
                }
                self.recording = Some(Recording { trajectory: Trajectory::default() });
                self.restart();
                Ok(json!({"recording": true}))
            }
            ClientMessage::Record { on: false } => self.finish_recording(),
        }
    }

    fn finish_recording(&mut self) -> Result<Value, String> {
        let Some(mut rec) = self.recording.take() else {
            return Err("not recording".into());
        };
        let steps = self.sim.state.step;
        if steps > 0 && steps % self.sim.world.config.record_stride != 0 {
            self.sim.record(&mut rec.trajectory);
        }
        let Controller::External(ext) = &self.sim.controller else {
            return Err("teleoperation needs the external controller".into());
        };
        let log = CommandLog {
            schema: "1".into(),
            scenario: self.scenario.name.clone(),
            dt: self.sim.world.config.dt,
            steps,
            commands: ext.logged().to_vec(),
        };
        self.sessions += 1;
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        let path = self.opts.log_dir.join(format!("session-{stamp}-{}.json", self.sessions));
        std::fs::create_dir_all(&self.opts.log_dir)
            .and_then(|_| std::fs::write(&path, log.to_json()))
            .map_err(|e| format!("writing {}: {e}", path.display()))?;
        Ok(json!({"path": path.display().to_string(), "hash": rec.trajectory.hash(), "steps": steps}))
    }

    fn step(&mut self) -> magworm::Result<()> {
        self.sim.step()?;
        if let Some(rec) = &mut self.recording {
            if self.sim.state.step % self.sim.world.config.record_stride == 0 {
                self.sim.record(&mut rec.trajectory);
            }
        }
        Ok(())
    }

    /// Applies the oldest queued pose at the current step.
    fn apply_one_pose(&mut self) -> magworm::Result<()> {
        let step = self.sim.state.step;
        if let (Some(pose), Controller::External(ext)) = (self.poses.pop_front(), &mut self.sim.controller) {
            ext.push(step, pose)?;
        }
        Ok(())
    }

    fn tick(&mut self, period: Duration) -> magworm::Result<()> {
        self.apply_one_pose()?;
        let dt = self.sim.world.config.dt;
        let start = Instant::now();
        let wanted = ((self.opts.rt_factor * period.as_secs_f64() / dt).ceil() as u64).max(1);
        let mut done = 0;
        while done < wanted {
            self.step()?;
            done += 1;
            if done % 32 == 0 && start.elapsed() >= period {
                break;
            }
        }
        let wall = start.elapsed().max(period).as_secs_f64();
        self.last_rt = done as f64 * dt / wall;
        self.broadcast(self.frame_message());
        Ok(())
    }

    /// Runs until every request sender is gone or the engine faults.
    fn run(mut self, requests: std_mpsc::Receiver<Request>) -> magworm::Result<()> {
        let period = Duration::from_secs_f64(1.0 / self.opts.frame_rate.clamp(1.0, DEFAULT_FRAME_RATE));
        let mut next_tick = Instant::now();
        loop {
            if !self.running() {
                // idle: block until something happens
                match requests.recv() {
                    Ok(req) => self.handle(req),
                    Err(_) => return Ok(()),
                }
                next_tick = Instant::now();
                continue;
            }
            let now = Instant::now();
            if now < next_tick {
                match requests.recv_timeout(next_tick - now) {
                    Ok(req) => self.handle(req),
                    Err(std_mpsc::RecvTimeoutError::Timeout) => {}
                    Err(std_mpsc::RecvTimeoutError::Disconnected) => return Ok(()),
                }
                continue;
            }
            next_tick = (next_tick + period).max(now);
            if let Err(e) = self.tick(period) {
                self.broadcast(json!({"type": "fatal", "msg": e.to_string()}).to_string());
                return Err(e);
            }
        }
    }
}

#[derive(Clone)]
struct AppState {
    requests: std_mpsc::Sender<Request>,
    out: broadcast::Sender<String>,
}

/// Serves until the engine faults (returning the fault) or ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, opts: ServeOptions) -> Result<()> {
    let scenario = Scenario::load(&opts.scenario)?;
    let (requests, inbox) = std_mpsc::channel();
    let (out, _) = broadcast::channel(BROADCAST_CAPACITY);
    let (done_tx, mut done_rx) = watch::channel(None::<String>);
    let engine = Engine::new(scenario, opts.clone(), out.clone());
    thread::Builder::new()
        .name("engine".into())
        .spawn(move || {
            let fault = engine.run(inbox).err().map(|e| e.to_string());
            let _ = done_tx.send(Some(fault.unwrap_or_default()));
        })
        .context("starting the engine thread")?;

    let mut app = Router::new().route("/ws", get(ws_handler));
    app = match &opts.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(include_str!("index.html")) })),
    };
    let app = app.with_state(AppState { requests, out });

    let mut watch_done = done_rx.clone();
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            tokio::select! {
                _ = watch_done.changed() => {}
                _ = tokio::signal::ctrl_c() => {}
            }
        })
        .await?;
    let fault = done_rx.borrow_and_update().clone();
    match fault {
        Some(msg) if !msg.is_empty() => Err(anyhow!("engine fault: {msg}")),
        _ => Ok(()),
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_session(socket, app))
}

async fn ask(app: &AppState, client: u64, msg: ClientMessage) -> Result<Value, String> {
    let (reply, rx) = oneshot::channel();
    app.requests.send(Request::Command { client, msg, reply }).map_err(|_| "engine stopped".to_string())?;
    rx.await.map_err(|_| "engine stopped".to_string())?
}

/// Parses one client text frame and returns the ack or err reply.
async fn answer(app: &AppState, client: u64, text: &str, counter: u64) -> String {
    let parsed: Result<Value, _> = serde_json::from_str(text);
    let mut value = match parsed {
        Ok(v @ Value::Object(_)) => v,
        Ok(_) => return json!({"type": "err", "seq": counter, "msg": "expected a JSON object"}).to_string(),
        Err(e) => return json!({"type": "err", "seq": counter, "msg": format!("invalid JSON: {e}")}).to_string(),
    };
    let obj = value.as_object_mut().expect("checked above");
    let seq = match obj.remove("seq") {
        None => counter,
        Some(s) => match s.as_u64() {
            Some(n) => n,
            None => return json!({"type": "err", "seq": counter, "msg": "seq must be a non-negative integer"}).to_string(),
        },
    };
    let msg: ClientMessage = match serde_json::from_value(value) {
        Ok(m) => m,
        Err(e) => return json!({"type": "err", "seq": seq, "msg": e.to_string()}).to_string(),
    };
    match ask(app, client, msg).await {
        Ok(extra) => {
            let mut ack = json!({"type": "ack", "seq": seq});
            if let (Some(a), Value::Object(extra)) = (ack.as_object_mut(), extra) {
                a.extend(extra);
            }
            ack.to_string()
        }
        Err(msg) => json!({"type": "err", "seq": seq, "msg": msg}).to_string(),
    }
}

async fn client_session(socket: WebSocket, app: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut frames = app.out.subscribe();
    let (reply, rx) = oneshot::channel();
    if app.requests.send(Request::Join { reply }).is_err() {
        return;
    }
    let Ok(joined) = rx.await else { return };
    let role = if joined.controlling { "control" } else { "observe" };
    let hello = json!({"type": "hello", "role": role}).to_string();
    if sink.send(Message::Text(hello.into())).await.is_err() || sink.send(Message::Text(joined.scene.into())).await.is_err() {
        let _ = app.requests.send(Request::Leave { client: joined.client });
        return;
    }
    let mut counter = 0u64;
    loop {
        tokio::select! {
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    counter += 1;
                    let reply = answer(&app, joined.client, text.as_str(), counter).await;
                    if sink.send(Message::Text(reply.into())).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    counter += 1;
                    let reply = json!({"type": "err", "seq": counter, "msg": "binary frames are not supported"}).to_string();
                    if sink.send(Message::Text(reply.into())).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            outgoing = frames.recv() => match outgoing {
                Ok(text) => {
                    let fatal = text.starts_with(r#"{"type":"fatal""#) || text.contains(r#""type":"fatal""#);
                    if sink.send(Message::Text(text.into())).await.is_err() || fatal {
                        break;
                    }
                }
                // a slow client skips frames rather than stalling the engine
                Err(broadcast::error::RecvError::Lagged(_)) => {}
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    let _ = sink.close().await;
    let _ = app.requests.send(Request::Leave { client: joined.client });
}
