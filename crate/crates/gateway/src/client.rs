//! Where commands are executed: an in-process simulation or a running
//! gateway reached over HTTP.

use worldgrid::grid::Grid;

use crate::api::{self, ApiRequest, ExecContext, Reply, JSON, TEXT};
use crate::error::ApiError;
use crate::http::to_http;

pub trait Backend {
    fn call(&mut self, req: ApiRequest) -> Result<Reply, ApiError>;
}

pub struct Local {
    pub grid: Grid,
    pub ctx: ExecContext,
}

impl Local {
    pub fn new(grid: Grid) -> Self {
        let ctx = ExecContext::for_grid(&grid);
        Self { grid, ctx }
    }
}

impl Backend for Local {
    fn call(&mut self, req: ApiRequest) -> Result<Reply, ApiError> {
        api::execute(&mut self.grid, &self.ctx, req)
    }
}

pub struct Remote {
    base: url::Url,
    http: reqwest::blocking::Client,
}

impl Remote {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Result<Self, ApiError> {
        let base = url::Url::parse(base).map_err(|e| ApiError::bad_request(format!("gateway url {base:?}: {e}")))?;
        Ok(Self { base, http: reqwest::blocking::Client::new() })
    }
}

impl Backend for Remote {
    fn call(&mut self, req: ApiRequest) -> Result<Reply, ApiError> {
        let h = to_http(&req);
        let mut url = self.base.clone();
        url.set_path(&h.path);
        if !h.query.is_empty() {
            url.query_pairs_mut().extend_pairs(h.query.iter());
        }
        let method = reqwest::Method::from_bytes(h.method.as_bytes()).expect("static method");
        let mut rb = self.http.request(method, url);
        if let Some(ct) = h.content_type {
            rb = rb.header(reqwest::header::CONTENT_TYPE, ct).body(h.body);
        }
        let resp = rb.send().map_err(|e| ApiError::new("Unavailable", format!("gateway unreachable: {e}")))?;
        let status = resp.status().as_u16();
        let is_json = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with("application/json"));
        let body = resp.text().map_err(|e| ApiError::new("Unavailable", format!("reading response: {e}")))?;
        if status >= 400 {
            return Err(serde_json::from_str(&body)
                .unwrap_or_else(|_| ApiError { code: "Internal".into(), message: body.trim().to_string(), status }));
        }
        Ok(Reply { status, content_type: if is_json { JSON } else { TEXT }, body })
    }
}
