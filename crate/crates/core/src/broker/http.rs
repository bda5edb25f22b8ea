//! HTTP front of the broker.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{RawQuery, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use super::{Broker, BrokerError};
use crate::bindings::{html_escape, PostMessage, RedirectMessage};

/// Header naming the error when a request is refused.
pub const ERROR_HEADER: &str = "x-fedbridge-error";

pub fn router(broker: Arc<Broker>) -> Router {
    Router::new()
        .route("/saml/sso", get(saml_sso))
        .route("/saml/acs", axum::routing::post(saml_acs))
        .route("/wsfed/signin", get(wsfed_signin))
        .route("/wsfed/return", axum::routing::post(wsfed_return))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(broker)
}

/// Serves on an already bound listener until the task is aborted.
pub fn spawn(
    broker: Arc<Broker>,
    listener: TcpListener,
) -> std::io::Result<(SocketAddr, JoinHandle<()>)> {
    let addr = listener.local_addr()?;
    let app = router(broker);
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "broker server stopped");
        }
    });
    Ok((addr, task))
}

pub fn pairs(encoded: &str) -> Vec<(String, String)> {
    url::form_urlencoded::parse(encoded.as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect()
}

pub fn redirect_response(msg: &RedirectMessage) -> Response {
    let location = msg.location();
    (
        StatusCode::FOUND,
        [(header::LOCATION, location.as_str().to_string())],
    )
        .into_response()
}

pub fn post_response(msg: &PostMessage) -> Response {
    Html(msg.to_html()).into_response()
}

/// An HTML page for the browser plus the error name in a header and a meta tag.
pub fn error_response(status: StatusCode, code: &str, message: &str) -> Response {
    let body = format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><meta name=\"fedbridge-error\" content=\"{code}\">\
         <title>Sign-in failed</title></head>\n<body><h1>Sign-in failed</h1>\n<p>{code}: {}</p></body></html>\n",
        html_escape(message)
    );
    let mut response = (status, Html(body)).into_response();
    if let Ok(value) = HeaderValue::from_str(code) {
        response.headers_mut().insert(ERROR_HEADER, value);
    }
    response
}

fn refuse(leg: &str, err: BrokerError) -> Response {
    tracing::warn!(leg, outcome = "error", code = err.code(), error = %err);
    error_response(StatusCode::BAD_REQUEST, err.code(), &err.to_string())
}

async fn saml_sso(State(broker): State<Arc<Broker>>, RawQuery(query): RawQuery) -> Response {
    match broker.handle_saml_sso(&pairs(&query.unwrap_or_default())) {
        Ok(msg) => redirect_response(&msg),
        Err(e) => refuse("saml_sso", e),
    }
}

async fn wsfed_signin(State(broker): State<Arc<Broker>>, RawQuery(query): RawQuery) -> Response {
    match broker.handle_wsfed_signin(&pairs(&query.unwrap_or_default())) {
        Ok(msg) => redirect_response(&msg),
        Err(e) => refuse("wsfed_signin", e),
    }
}

async fn saml_acs(State(broker): State<Arc<Broker>>, body: String) -> Response {
    match broker.handle_saml_acs(&pairs(&body)) {
        Ok(msg) => post_response(&msg),
        Err(e) => refuse("saml_acs", e),
    }
}

async fn wsfed_return(State(broker): State<Arc<Broker>>, body: String) -> Response {
    match broker.handle_wsfed_return(&pairs(&body)) {
        Ok(msg) => post_response(&msg),
        Err(e) => refuse("wsfed_return", e),
    }
}
