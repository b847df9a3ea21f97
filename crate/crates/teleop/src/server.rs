//! WebSocket front end and the session's control loop.
//!
//! The control loop owns the [`Session`] and ticks it at a fixed rate.
//! Clients never touch it directly: commands go through a latest-value
//! mailbox and everything else through an ordered control channel. Refits
//! run on the blocking pool and are installed between interactions.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use reprise_core::harness::{Assistant, Method, TrainingJob};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tracing::{debug, info, warn};

use crate::protocol::{ClientMessage, ServerMessage};
use crate::session::{Mailbox, Session};

enum Control {
    Join(mpsc::UnboundedSender<String>),
    Start(Option<String>),
    End,
    SetMethod(Method),
    Invalid(String),
}

#[derive(Clone)]
struct Shared {
    control: mpsc::UnboundedSender<Control>,
    mailbox: Arc<Mutex<Mailbox>>,
    /// Index of the next tick the loop will run.
    clock: Arc<AtomicU64>,
}

/// A running session: the router to mount and the control loop task, which
/// stops once the router and every connection are dropped.
pub struct Service {
    pub router: Router,
    pub control_loop: JoinHandle<()>,
}

/// Start the control loop for `session`, ticking every `period`.
pub fn spawn(session: Session, period: Duration) -> Service {
    let (tx, rx) = mpsc::unbounded_channel();
    let shared = Shared { control: tx, mailbox: Arc::default(), clock: Arc::default() };
    let control_loop = tokio::spawn(control_loop(session, rx, shared.mailbox.clone(), shared.clock.clone(), period));
    let router = Router::new().route("/ws", get(upgrade)).with_state(shared);
    Service { router, control_loop }
}

/// Serve `session` on `addr` at the simulator's tick rate until the process
/// is stopped.
pub async fn serve(session: Session, addr: SocketAddr) -> std::io::Result<()> {
    let period = Duration::from_secs_f64(session.config().scene.sim.dt);
    let service = spawn(session, period);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!(addr = %listener.local_addr()?, "teleop service listening on /ws");
    axum::serve(listener, service.router).await
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> Response {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn client(socket: WebSocket, shared: Shared) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel();
    if shared.control.send(Control::Join(tx)).is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let control = match ClientMessage::parse(&text) {
            Ok(ClientMessage::Command { v }) => {
                let now = shared.clock.load(Ordering::SeqCst);
                shared.mailbox.lock().expect("mailbox lock").put(v, now);
                continue;
            }
            Ok(ClientMessage::Start { task_hint }) => Control::Start(task_hint),
            Ok(ClientMessage::End) => Control::End,
            Ok(ClientMessage::SetMethod { name }) => Control::SetMethod(name),
            Err(e) => Control::Invalid(format!("malformed message: {e}")),
        };
        if shared.control.send(control).is_err() {
            break;
        }
    }
    writer.abort();
}

struct Clients(Vec<mpsc::UnboundedSender<String>>);

impl Clients {
    fn send(&mut self, msg: &ServerMessage) {
        let text = msg.to_json();
        self.0.retain(|c| c.send(text.clone()).is_ok());
    }
}

type Refit = (TrainingJob, JoinHandle<reprise_core::Result<Assistant>>);

async fn control_loop(
    mut session: Session,
    mut control: mpsc::UnboundedReceiver<Control>,
    mailbox: Arc<Mutex<Mailbox>>,
    clock: Arc<AtomicU64>,
    period: Duration,
) {
    let mut clients = Clients(Vec::new());
    let mut refit: Option<Refit> = None;
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        loop {
            match control.try_recv() {
                Ok(c) => handle(c, &mut session, &mut clients, &mut refit),
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }
        if refit.as_ref().is_some_and(|(_, h)| h.is_finished()) {
            let (job, handle) = refit.take().expect("checked above");
            let result = handle.await.unwrap_or_else(|e| Err(reprise_core::Error::config(format!("retraining panicked: {e}"))));
            let event = session.publish(&job, result);
            let notice = match &event.error {
                None => format!("retrained on {} interactions; model version {}", event.dataset_len, event.version),
                Some(e) => format!("retraining failed, keeping version {}: {e}", event.version),
            };
            clients.send(&session.status(Some(notice)));
        }
        let now = clock.load(Ordering::SeqCst);
        let input = mailbox.lock().expect("mailbox lock").take(now, session.config().stale_ticks);
        clock.store(now + 1, Ordering::SeqCst);
        match session.tick(input) {
            Ok(Some(t)) => clients.send(&ServerMessage::frame(&t)),
            Ok(None) => {}
            Err(e) => {
                warn!(error = %e, "tick failed; ending the interaction");
                end(&mut session, &mut clients, &mut refit, Some(format!("tick failed: {e}")));
                continue;
            }
        }
        if session.expired() {
            end(&mut session, &mut clients, &mut refit, Some("interaction reached its time limit".into()));
        }
    }
}

fn handle(c: Control, session: &mut Session, clients: &mut Clients, refit: &mut Option<Refit>) {
    match c {
        Control::Join(tx) => {
            let mut joined = Clients(vec![tx]);
            joined.send(&session.scene_message());
            joined.send(&session.status(None));
            clients.0.extend(joined.0);
        }
        Control::Start(hint) => {
            let notice = session.start(hint).err().map(|e| format!("cannot start: {e}"));
            clients.send(&session.status(notice));
        }
        Control::End => end(session, clients, refit, None),
        Control::SetMethod(m) => {
            let notice = session.set_method(m).err().map(|e| format!("cannot switch method: {e}"));
            clients.send(&session.status(notice));
        }
        Control::Invalid(reason) => clients.send(&session.status(Some(reason))),
    }
}

fn end(session: &mut Session, clients: &mut Clients, refit: &mut Option<Refit>, reason: Option<String>) {
    let notice = match session.end() {
        Ok(ended) => {
            if let Some(job) = ended.job {
                debug!(version = job.version, "starting refit");
                let j = job.clone();
                *refit = Some((job, tokio::task::spawn_blocking(move || j.run())));
            }
            match (ended.stored, reason) {
                (false, _) => Some("interaction had no commands and was discarded".to_string()),
                (true, r) => r,
            }
        }
        Err(e) => Some(format!("cannot end: {e}")),
    };
    clients.send(&session.status(notice));
}
