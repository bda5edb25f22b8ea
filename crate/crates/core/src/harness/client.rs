//! A simulated browser: follows 302s, submits auto-posting forms and fills in
//! login forms. It never builds a protocol message itself.

use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};
use std::time::Duration;

use regex::Regex;
use reqwest::header::{COOKIE, LOCATION, SET_COOKIE};
use url::Url;

use super::trace::{Initiator, SentParam, TraceStep};
use super::HarnessError;
use crate::bindings::{html_unescape, is_auto_submit, PostMessage};
use crate::broker::http::ERROR_HEADER;
use crate::config::ClientCredentials;

use super::mocks::ESTABLISHED_MARKER;

static LOGIN_FORM_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?s)<form method="post" action="([^"]*)" id="login">(.*?)</form>"#).unwrap()
});
static HIDDEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"<input type="hidden" name="([^"]*)" value="([^"]*)"/>"#).unwrap()
});

const CREDENTIAL_FIELDS: [&str; 2] = ["username", "password"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Get(Url),
    Post(PostMessage),
}

impl Action {
    pub fn url(&self) -> &Url {
        match self {
            Action::Get(u) => u,
            Action::Post(p) => &p.target,
        }
    }
}

/// How the client classified a response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Page {
    Redirect(Url),
    AutoPost(PostMessage),
    /// A login form: where it posts and its hidden fields.
    Login(PostMessage),
    Established(String),
    Error {
        status: u16,
        code: String,
    },
    Other {
        status: u16,
        body: String,
    },
}

impl Page {
    pub fn error_code(&self) -> Option<&str> {
        match self {
            Page::Error { code, .. } => Some(code),
            _ => None,
        }
    }
}

pub struct PassiveClient {
    http: reqwest::Client,
    credentials: ClientCredentials,
    actors: HashMap<String, String>,
    cookies: Mutex<HashMap<String, HashMap<String, String>>>,
    steps: Mutex<Vec<TraceStep>>,
}

fn origin(url: &Url) -> String {
    url.origin().ascii_serialization()
}

fn strip_query(url: &Url) -> String {
    let mut u = url.clone();
    u.set_query(None);
    u.to_string()
}

impl PassiveClient {
    /// `actors` names each server origin (`scheme://host:port`) in the trace.
    pub fn new(
        credentials: ClientCredentials,
        actors: HashMap<String, String>,
    ) -> Result<Self, HarnessError> {
        let http = reqwest::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(Duration::from_secs(20))
            .build()
            .map_err(|e| HarnessError::ScenarioSetup(e.to_string()))?;
        Ok(PassiveClient {
            http,
            credentials,
            actors,
            cookies: Mutex::default(),
            steps: Mutex::default(),
        })
    }

    pub fn steps(&self) -> Vec<TraceStep> {
        self.steps.lock().expect("trace lock").clone()
    }

    fn actor(&self, url: &Url) -> String {
        self.actors
            .get(&origin(url))
            .cloned()
            .unwrap_or_else(|| origin(url))
    }

    fn cookie_header(&self, url: &Url) -> Option<String> {
        let jar = self.cookies.lock().expect("cookie lock");
        let cookies = jar.get(&origin(url))?;
        let mut pairs: Vec<_> = cookies.iter().map(|(k, v)| format!("{k}={v}")).collect();
        pairs.sort();
        Some(pairs.join("; "))
    }

    fn store_cookies(&self, url: &Url, headers: &reqwest::header::HeaderMap) {
        let mut jar = self.cookies.lock().expect("cookie lock");
        for value in headers
            .get_all(SET_COOKIE)
            .iter()
            .filter_map(|v| v.to_str().ok())
        {
            let first = value.split(';').next().unwrap_or_default();
            if let Some((k, v)) = first.split_once('=') {
                jar.entry(origin(url))
                    .or_default()
                    .insert(k.trim().to_string(), v.trim().to_string());
            }
        }
    }

    /// Sends one request and records it.
    pub async fn perform(
        &self,
        action: &Action,
        initiator: Initiator,
    ) -> Result<Page, HarnessError> {
        let url = action.url().clone();
        let (method, sent, request) = match action {
            Action::Get(u) => (
                "GET",
                u.query_pairs()
                    .map(|(k, v)| (k.into_owned(), v.into_owned()))
                    .collect::<Vec<_>>(),
                self.http.get(u.clone()),
            ),
            Action::Post(p) => (
                "POST",
                p.fields.clone(),
                self.http
                    .post(p.target.clone())
                    .header(
                        reqwest::header::CONTENT_TYPE,
                        "application/x-www-form-urlencoded",
                    )
                    .body(p.to_form_body()),
            ),
        };
        let request = match self.cookie_header(&url) {
            Some(c) => request.header(COOKIE, c),
            None => request,
        };
        let response = request
            .send()
            .await
            .map_err(|e| HarnessError::Http(format!("{url}: {e}")))?;
        let status = response.status().as_u16();
        self.store_cookies(&url, response.headers());
        let location = response
            .headers()
            .get(LOCATION)
            .and_then(|l| l.to_str().ok())
            .and_then(|l| url.join(l).ok());
        let error_code = response
            .headers()
            .get(ERROR_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = response
            .text()
            .await
            .map_err(|e| HarnessError::Http(e.to_string()))?;
        let page = classify(status, location, error_code, body);
        let (outcome, received) = describe(&page);
        let mut steps = self.steps.lock().expect("trace lock");
        let index = steps.len();
        steps.push(TraceStep {
            index,
            actor: self.actor(&url),
            initiator,
            method: method.to_string(),
            url: strip_query(&url),
            sent: sent
                .into_iter()
                .map(|(name, value)| {
                    let credential = CREDENTIAL_FIELDS.contains(&name.as_str());
                    SentParam {
                        value: if credential { "***".into() } else { value },
                        name,
                        credential,
                    }
                })
                .collect(),
            status,
            outcome,
            received,
        });
        Ok(page)
    }

    /// What a browser does next with `page`, if anything.
    pub fn next_action(&self, page: &Page) -> Option<Action> {
        match page {
            Page::Redirect(u) => Some(Action::Get(u.clone())),
            Page::AutoPost(p) => Some(Action::Post(p.clone())),
            Page::Login(form) => {
                let mut fields = form.fields.clone();
                fields.push(("username".into(), self.credentials.username.clone()));
                fields.push(("password".into(), self.credentials.password.clone()));
                Some(Action::Post(PostMessage {
                    target: form.target.clone(),
                    fields,
                }))
            }
            _ => None,
        }
    }

    /// Starts at `entry` and follows the server until a page needs no
    /// further action.
    pub async fn browse(&self, entry: Url, max_steps: usize) -> Result<Page, HarnessError> {
        let mut page = self.perform(&Action::Get(entry), Initiator::User).await?;
        for _ in 1..max_steps {
            match self.next_action(&page) {
                Some(action) => page = self.perform(&action, Initiator::Server).await?,
                None => return Ok(page),
            }
        }
        Err(HarnessError::Stuck(format!(
            "no final page after {max_steps} requests"
        )))
    }

    /// Signs in at an identity provider's login page before any flow starts.
    pub async fn pre_login(&self, login_url: &Url) -> Result<Page, HarnessError> {
        let page = self
            .perform(&Action::Get(login_url.clone()), Initiator::User)
            .await?;
        match self.next_action(&page) {
            Some(action @ Action::Post(_)) if matches!(page, Page::Login(_)) => {
                self.perform(&action, Initiator::User).await
            }
            _ => Err(HarnessError::Stuck(
                "login page did not offer a form".into(),
            )),
        }
    }
}

fn classify(status: u16, location: Option<Url>, error_code: Option<String>, body: String) -> Page {
    if let Some(code) = error_code {
        return Page::Error { status, code };
    }
    if (300..400).contains(&status) {
        if let Some(l) = location {
            return Page::Redirect(l);
        }
    }
    if status == 200 {
        if body.contains(ESTABLISHED_MARKER) {
            return Page::Established(body);
        }
        if is_auto_submit(&body) {
            if let Some(p) = PostMessage::from_html(&body) {
                return Page::AutoPost(p);
            }
        }
        if let Some(form) = LOGIN_FORM_RE.captures(&body) {
            if let Ok(target) = Url::parse(&html_unescape(&form[1])) {
                let fields = HIDDEN_RE
                    .captures_iter(&form[2])
                    .map(|c| (html_unescape(&c[1]), html_unescape(&c[2])))
                    .collect();
                return Page::Login(PostMessage { target, fields });
            }
        }
    }
    Page::Other { status, body }
}

fn describe(page: &Page) -> (String, Vec<(String, String)>) {
    match page {
        Page::Redirect(u) => (
            format!("redirect {}", strip_query(u)),
            std::iter::once(("location".to_string(), strip_query(u)))
                .chain(
                    u.query_pairs()
                        .map(|(k, v)| (k.into_owned(), v.into_owned())),
                )
                .collect(),
        ),
        Page::AutoPost(p) => (
            format!("auto-post {}", p.target),
            std::iter::once(("action".to_string(), p.target.to_string()))
                .chain(p.fields.iter().cloned())
                .collect(),
        ),
        Page::Login(p) => (
            "login form".to_string(),
            std::iter::once(("action".to_string(), p.target.to_string()))
                .chain(p.fields.iter().cloned())
                .collect(),
        ),
        Page::Established(_) => ("established".to_string(), Vec::new()),
        Page::Error { code, .. } => (format!("error {code}"), Vec::new()),
        Page::Other { status, .. } => (format!("page {status}"), Vec::new()),
    }
}
