//! The HTTP service. One owner thread holds the simulation and applies
//! mutations in arrival order; reads are answered from the snapshot it
//! publishes after every mutation.

use std::net::SocketAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{mpsc, Arc, RwLock};
use std::time::Duration;

use axum::body::to_bytes;
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::sync::oneshot;
use worldgrid::grid::Grid;

use crate::api::{self, AdvanceBody, ApiRequest, ExecContext, Reply};
use crate::error::ApiError;
use crate::http::from_http;

/// Largest request body accepted.
pub const BODY_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// The clock moves only on `POST /v1/sim/advance`.
    Batch,
    /// The clock advances `scale` virtual seconds per wall-clock second.
    Interactive { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub listen: SocketAddr,
    pub scenario: PathBuf,
    pub seed: u64,
    pub mode: Mode,
    /// Broker ids offered to clients, default first. Empty means all
    /// brokers of the scenario in declaration order.
    pub brokers: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("scenario: {0}")]
    Scenario(#[from] worldgrid::grid::GridError),
    #[error("no resource broker configured")]
    NoBroker,
    #[error("broker {0} is not in the scenario")]
    UnknownBroker(String),
    #[error("interactive scale must be positive, got {0}")]
    BadScale(f64),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

enum Msg {
    Request(ApiRequest, oneshot::Sender<Result<Reply, ApiError>>),
    Tick(u64),
}

#[derive(Clone)]
pub struct Gateway {
    tx: mpsc::Sender<Msg>,
    snapshot: Arc<RwLock<Arc<Grid>>>,
    ctx: Arc<ExecContext>,
}

impl Gateway {
    /// Validates the broker list and starts the owner thread.
    pub fn start(grid: Grid, brokers: &[String], interactive: bool) -> Result<Self, StartError> {
        let brokers: Vec<String> = if brokers.is_empty() {
            grid.brokers().iter().map(|b| b.config.id.clone()).collect()
        } else {
            brokers.to_vec()
        };
        if brokers.is_empty() {
            return Err(StartError::NoBroker);
        }
        if let Some(b) = brokers.iter().find(|b| grid.broker(b).is_none()) {
            return Err(StartError::UnknownBroker(b.clone()));
        }
        let ctx = Arc::new(ExecContext { brokers, interactive });
        let snapshot = Arc::new(RwLock::new(Arc::new(grid.clone())));
        let (tx, rx) = mpsc::channel::<Msg>();
        let owner_ctx = ctx.clone();
        let owner_snap = snapshot.clone();
        std::thread::Builder::new()
            .name("grid-owner".into())
            .spawn(move || owner(grid, &owner_ctx, &owner_snap, rx))
            .expect("spawn owner thread");
        Ok(Gateway { tx, snapshot, ctx })
    }

    pub fn context(&self) -> &ExecContext {
        &self.ctx
    }

    pub fn snapshot(&self) -> Arc<Grid> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub async fn call(&self, req: ApiRequest) -> Result<Reply, ApiError> {
        if req.is_read() {
            let snap = self.snapshot();
            return api::read(&snap, &self.ctx, &req);
        }
        let (tx, rx) = oneshot::channel();
        self.tx.send(Msg::Request(req, tx)).map_err(|_| unavailable())?;
        rx.await.map_err(|_| unavailable())?
    }

    fn tick(&self, secs: u64) {
        let _ = self.tx.send(Msg::Tick(secs));
    }
}

fn unavailable() -> ApiError {
    ApiError::new("Unavailable", "simulation owner is not running")
}

fn owner(mut grid: Grid, ctx: &ExecContext, snap: &RwLock<Arc<Grid>>, rx: mpsc::Receiver<Msg>) {
    for msg in rx {
        match msg {
            Msg::Request(req, reply) => {
                let r = catch_unwind(AssertUnwindSafe(|| api::execute(&mut grid, ctx, req)))
                    .unwrap_or_else(|_| Err(ApiError::new("Internal", "request handler panicked")));
                *snap.write().expect("snapshot lock") = Arc::new(grid.clone());
                let _ = reply.send(r);
            }
            Msg::Tick(secs) => {
                let _ = api::advance(&mut grid, &AdvanceBody { secs: Some(secs), ..AdvanceBody::default() });
                *snap.write().expect("snapshot lock") = Arc::new(grid.clone());
            }
        }
    }
}

fn render(r: Result<Reply, ApiError>) -> Response {
    match r {
        Ok(reply) => {
            let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::OK);
            (status, [(header::CONTENT_TYPE, HeaderValue::from_static(reply.content_type))], reply.body).into_response()
        }
        Err(e) => {
            let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            let body = format!("{}\n", serde_json::to_string_pretty(&e).expect("json"));
            (status, [(header::CONTENT_TYPE, HeaderValue::from_static(api::JSON))], body).into_response()
        }
    }
}

async fn dispatch(State(gw): State<Gateway>, req: Request) -> Response {
    let (parts, body) = req.into_parts();
    let bytes = match to_bytes(body, BODY_LIMIT).await {
        Ok(b) => b,
        Err(_) => return render(Err(ApiError::bad_request(format!("body larger than {BODY_LIMIT} bytes")))),
    };
    let ct = parts.headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok());
    let parsed = from_http(parts.method.as_str(), parts.uri.path(), parts.uri.query(), ct, &bytes);
    match parsed {
        Ok(r) => render(gw.call(r).await),
        Err(e) => render(Err(e)),
    }
}

/// Every path goes through one dispatcher so that no request escapes the
/// error mapping.
pub fn router(gw: Gateway) -> Router {
    Router::new().fallback(dispatch).with_state(gw)
}

/// Builds the simulation, binds, and serves until interrupted.
pub async fn serve(cfg: GatewayConfig) -> Result<(), StartError> {
    let grid = Grid::load(&cfg.scenario, cfg.seed)?;
    let interactive = match cfg.mode {
        Mode::Batch => false,
        Mode::Interactive { scale } if scale > 0.0 && scale.is_finite() => true,
        Mode::Interactive { scale } => return Err(StartError::BadScale(scale)),
    };
    let gw = Gateway::start(grid, &cfg.brokers, interactive)?;
    if let Mode::Interactive { scale } = cfg.mode {
        let ticker = gw.clone();
        tokio::spawn(async move {
            let mut every = tokio::time::interval(Duration::from_secs(1));
            let mut owed = 0.0;
            loop {
                every.tick().await;
                owed += scale;
                let whole = owed.floor();
                owed -= whole;
                if whole >= 1.0 {
                    ticker.tick(whole as u64);
                }
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(cfg.listen).await.map_err(|source| StartError::Bind { addr: cfg.listen, source })?;
    eprintln!("worldgrid gateway listening on http://{}/v1", listener.local_addr().map_or(cfg.listen, |a| a));
    axum::serve(listener, router(gw))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| StartError::Bind { addr: cfg.listen, source })
}
