//! End-to-end lab: the broker, four mocks and a passive client, all on
//! loopback HTTP.

pub mod client;
pub mod mocks;
pub mod trace;

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use axum::Router;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::task::{JoinHandle, JoinSet};

use crate::broker::{http as broker_http, Broker};
use crate::config::{self, ClientCredentials, ConfigError, FederationConfig, LabPorts};
use crate::trust_registry::Dialect;
use client::{Action, Page, PassiveClient};
use mocks::{MockIdentity, MockIdentityProvider, MockServiceProvider, Tamper};
use trace::{Initiator, ScenarioTrace, Verdict};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario setup failed: {0}")]
    ScenarioSetup(String),
    #[error("unknown subject {0}")]
    UnknownSubject(String),
    #[error("http: {0}")]
    Http(String),
    #[error("flow stalled: {0}")]
    Stuck(String),
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::ScenarioSetup(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// SAML SP, broker, WS-Fed IP.
    SamlSpToWsfedIp,
    /// WS-Fed SP, broker, SAML IdP.
    WsfedSpToSamlIp,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::SamlSpToWsfedIp, Scenario::WsfedSpToSamlIp];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SamlSpToWsfedIp => "SamlSpToWsfedIp",
            Scenario::WsfedSpToSamlIp => "WsfedSpToSamlIp",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_lowercase();
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().to_lowercase() == folded)
            .ok_or_else(|| {
                format!("unknown scenario {s:?}; expected SamlSpToWsfedIp or WsfedSpToSamlIp")
            })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScenarioOptions {
    pub force_authn: bool,
    /// Sign in at the identity provider before the flow starts.
    pub pre_login: bool,
    /// Remove the broker's keys from the origin SP's trust store for this run.
    pub distrust_broker: bool,
    /// Have the identity provider corrupt its assertion after signing.
    pub tamper: Option<Tamper>,
}

/// The four mocks of the lab.
#[derive(Debug, Clone)]
pub struct Mocks {
    pub saml_idp: Arc<MockIdentityProvider>,
    pub wsfed_ip: Arc<MockIdentityProvider>,
    pub saml_sp: Arc<MockServiceProvider>,
    pub wsfed_sp: Arc<MockServiceProvider>,
    pub credentials: ClientCredentials,
}

impl Mocks {
    pub fn from_config(config: &FederationConfig) -> Result<Mocks, HarnessError> {
        let m = config.mocks.as_ref().ok_or_else(|| {
            HarnessError::ScenarioSetup("configuration has no \"mocks\" section".into())
        })?;
        let idp = |id, dialect| -> Result<Arc<MockIdentityProvider>, HarnessError> {
            let identity = MockIdentity {
                entity: crate::model::EntityId::clone(id),
                key: config.signer_for(id)?,
                users: m.users.clone(),
            };
            Ok(Arc::new(MockIdentityProvider::new(
                identity,
                dialect,
                config.topology.clone(),
            )?))
        };
        let sp = |id, dialect| -> Result<Arc<MockServiceProvider>, HarnessError> {
            let broker = config.broker.entity_id.clone();
            if !config.topology.linked(id, &broker) {
                return Err(HarnessError::ScenarioSetup(format!(
                    "{id} is not linked to the broker"
                )));
            }
            Ok(Arc::new(MockServiceProvider::new(
                crate::model::EntityId::clone(id),
                dialect,
                &config.topology,
                broker,
                config.trust_store_for(id)?,
            )?))
        };
        Ok(Mocks {
            saml_idp: idp(&m.saml_idp, Dialect::Saml2)?,
            wsfed_ip: idp(&m.wsfed_ip, Dialect::WsFed11B)?,
            saml_sp: sp(&m.saml_sp, Dialect::Saml2)?,
            wsfed_sp: sp(&m.wsfed_sp, Dialect::WsFed11B)?,
            credentials: m.client.clone(),
        })
    }

    fn parts(&self) -> [(&'static str, Router, url::Url); 4] {
        [
            (
                "saml_idp",
                self.saml_idp.clone().router(),
                self.saml_idp.login_url().clone(),
            ),
            (
                "wsfed_ip",
                self.wsfed_ip.clone().router(),
                self.wsfed_ip.login_url().clone(),
            ),
            (
                "saml_sp",
                self.saml_sp.clone().router(),
                self.saml_sp.start_url(false),
            ),
            (
                "wsfed_sp",
                self.wsfed_sp.clone().router(),
                self.wsfed_sp.start_url(false),
            ),
        ]
    }
}

/// Which services a [`Lab`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Services {
    pub broker: bool,
    pub mocks: bool,
}

impl Services {
    pub const ALL: Services = Services {
        broker: true,
        mocks: true,
    };
}

struct LabInner {
    config: FederationConfig,
    broker: Option<Arc<Broker>>,
    mocks: Option<Mocks>,
    actors: HashMap<String, String>,
    tasks: Vec<JoinHandle<()>>,
}

impl Drop for LabInner {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

/// Running services; dropping the last clone stops them.
#[derive(Clone)]
pub struct Lab {
    inner: Arc<LabInner>,
}

/// Result of posting one `wresult` to the broker twice at once.
#[derive(Debug, Clone)]
pub struct DuplicateDelivery {
    pub successes: usize,
    pub unknown_correlation: usize,
    pub other: Vec<String>,
    /// The successful copy went on to establish a session at the SP.
    pub completed: bool,
    pub trace: ScenarioTrace,
}

async fn bind(addr: &str) -> Result<TcpListener, HarnessError> {
    TcpListener::bind(addr)
        .await
        .map_err(|e| HarnessError::ScenarioSetup(format!("cannot listen on {addr}: {e}")))
}

fn spawn(router: Router, listener: TcpListener, name: &'static str) -> JoinHandle<()> {
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            tracing::error!(service = name, error = %e, "server stopped");
        }
    })
}

fn origin(url: &url::Url) -> String {
    url.origin().ascii_serialization()
}

impl Lab {
    /// Starts the selected services on the addresses named in `config`.
    pub async fn start(config: FederationConfig, services: Services) -> Result<Lab, HarnessError> {
        let broker_listener = if services.broker {
            Some(bind(&config.broker.listen).await?)
        } else {
            None
        };
        let mut mock_listeners = Vec::new();
        if services.mocks {
            for (_, _, url) in Mocks::from_config(&config)?.parts() {
                mock_listeners.push(bind(&config::listen_addr(&url)?).await?);
            }
        }
        Lab::start_on(config, services, broker_listener, mock_listeners)
    }

    /// A fresh loopback federation on ephemeral ports with new keys.
    pub async fn ephemeral() -> Result<Lab, HarnessError> {
        Lab::ephemeral_with(|_| {}).await
    }

    /// Like [`Lab::ephemeral`], letting the caller adjust the generated
    /// configuration before anything starts.
    pub async fn ephemeral_with(
        edit: impl FnOnce(&mut FederationConfig),
    ) -> Result<Lab, HarnessError> {
        let mut listeners = Vec::new();
        for _ in 0..5 {
            listeners.push(bind("127.0.0.1:0").await?);
        }
        let port = |l: &TcpListener| l.local_addr().map(|a| a.port()).unwrap_or_default();
        let ports = LabPorts {
            broker: port(&listeners[0]),
            saml_idp: port(&listeners[1]),
            wsfed_ip: port(&listeners[2]),
            saml_sp: port(&listeners[3]),
            wsfed_sp: port(&listeners[4]),
        };
        let mut config = FederationConfig::local(ports);
        edit(&mut config);
        let broker_listener = listeners.remove(0);
        Lab::start_on(config, Services::ALL, Some(broker_listener), listeners)
    }

    fn start_on(
        config: FederationConfig,
        services: Services,
        broker_listener: Option<TcpListener>,
        mock_listeners: Vec<TcpListener>,
    ) -> Result<Lab, HarnessError> {
        let mut tasks = Vec::new();
        let mut actors = HashMap::new();
        let broker = match broker_listener {
            Some(listener) => {
                let broker = Arc::new(config::broker_from_config(&config)?);
                let me = config.entity(&config.broker.entity_id)?;
                for url in me.endpoints.values() {
                    actors.insert(origin(url), "broker".to_string());
                }
                tasks.push(spawn(
                    broker_http::router(broker.clone()),
                    listener,
                    "broker",
                ));
                Some(broker)
            }
            None => None,
        };
        let mocks = if services.mocks {
            let mocks = Mocks::from_config(&config)?;
            for ((name, router, url), listener) in mocks.parts().into_iter().zip(mock_listeners) {
                actors.insert(origin(&url), name.to_string());
                tasks.push(spawn(router, listener, name));
            }
            Some(mocks)
        } else {
            None
        };
        Ok(Lab {
            inner: Arc::new(LabInner {
                config,
                broker,
                mocks,
                actors,
                tasks,
            }),
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.inner.config
    }

    pub fn broker(&self) -> Option<&Arc<Broker>> {
        self.inner.broker.as_ref()
    }

    pub fn mocks(&self) -> Result<&Mocks, HarnessError> {
        self.inner
            .mocks
            .as_ref()
            .ok_or_else(|| HarnessError::ScenarioSetup("mocks are not running in this lab".into()))
    }

    pub fn client(&self) -> Result<PassiveClient, HarnessError> {
        PassiveClient::new(self.mocks()?.credentials.clone(), self.inner.actors.clone())
    }

    fn parties(
        &self,
        scenario: Scenario,
    ) -> Result<(&Arc<MockServiceProvider>, &Arc<MockIdentityProvider>), HarnessError> {
        let m = self.mocks()?;
        Ok(match scenario {
            Scenario::SamlSpToWsfedIp => (&m.saml_sp, &m.wsfed_ip),
            Scenario::WsfedSpToSamlIp => (&m.wsfed_sp, &m.saml_idp),
        })
    }

    /// Runs one sign-in with a fresh browser. Options that alter a mock
    /// (tampering, distrust) apply lab-wide while the run lasts.
    pub async fn run(
        &self,
        scenario: Scenario,
        options: ScenarioOptions,
    ) -> Result<ScenarioTrace, HarnessError> {
        let (sp, ip) = self.parties(scenario)?;
        if self.broker().is_none() {
            return Err(HarnessError::ScenarioSetup(
                "broker is not running in this lab".into(),
            ));
        }
        let client = self.client()?;
        if options.pre_login {
            client.pre_login(ip.login_url()).await?;
        }
        let saved_trust = options.distrust_broker.then(|| {
            let mut store = sp.trust_store();
            let broker_keys: Vec<String> = store
                .key_ids()
                .filter(|k| {
                    store
                        .get(k)
                        .is_some_and(|r| r.owner == self.config().broker.entity_id)
                })
                .map(str::to_string)
                .collect();
            for k in broker_keys {
                store.remove(&k);
            }
            sp.replace_trust(store)
        });
        if options.tamper.is_some() {
            ip.set_tamper(options.tamper);
        }
        let result = client.browse(sp.start_url(options.force_authn), 40).await;
        if options.tamper.is_some() {
            ip.set_tamper(None);
        }
        if let Some(store) = saved_trust {
            sp.replace_trust(store);
        }
        let verdict = match result {
            Ok(Page::Established(_)) => Verdict::Pass,
            Ok(Page::Error { code, .. }) => Verdict::Fail(code),
            Ok(other) => Verdict::Fail(format!("unexpected final page {other:?}")),
            Err(e) => Verdict::Fail(e.to_string()),
        };
        Ok(ScenarioTrace {
            scenario,
            steps: client.steps(),
            verdict,
        })
    }

    /// Runs `n` flows at once, each with its own browser.
    pub async fn run_concurrent(
        &self,
        scenario: Scenario,
        n: usize,
    ) -> Result<Vec<ScenarioTrace>, HarnessError> {
        let mut set = JoinSet::new();
        for _ in 0..n {
            let lab = self.clone();
            set.spawn(async move { lab.run(scenario, ScenarioOptions::default()).await });
        }
        let mut traces = Vec::with_capacity(n);
        while let Some(joined) = set.join_next().await {
            traces.push(joined.map_err(|e| HarnessError::ScenarioSetup(e.to_string()))??);
        }
        Ok(traces)
    }

    /// Drives flow A up to the IP's answer, then delivers that `wresult` to
    /// the broker twice concurrently.
    pub async fn duplicate_wresult_delivery(&self) -> Result<DuplicateDelivery, HarnessError> {
        let (sp, _) = self.parties(Scenario::SamlSpToWsfedIp)?;
        let return_url = self
            .config()
            .entity(&self.config().broker.entity_id)?
            .endpoint("return")
            .cloned()
            .ok_or_else(|| HarnessError::ScenarioSetup("broker has no return endpoint".into()))?;
        let client = self.client()?;
        let mut page = client
            .perform(&Action::Get(sp.start_url(false)), Initiator::User)
            .await?;
        let delivery = loop {
            let action = client
                .next_action(&page)
                .ok_or_else(|| HarnessError::Stuck(format!("flow ended early at {page:?}")))?;
            if matches!(&action, Action::Post(p) if p.target == return_url && p.field("wresult").is_some())
            {
                break action;
            }
            if client.steps().len() > 40 {
                return Err(HarnessError::Stuck("no wresult delivery".into()));
            }
            page = client.perform(&action, Initiator::Server).await?;
        };
        let (first, second) = tokio::join!(
            client.perform(&delivery, Initiator::Server),
            client.perform(&delivery, Initiator::Server)
        );
        let mut successes = Vec::new();
        let mut unknown_correlation = 0;
        let mut other = Vec::new();
        for page in [first?, second?] {
            match page {
                Page::AutoPost(p) if p.field("SAMLResponse").is_some() => successes.push(p),
                Page::Error { ref code, .. } if code == "UnknownCorrelation" => {
                    unknown_correlation += 1
                }
                p => other.push(format!("{p:?}")),
            }
        }
        let mut completed = false;
        if let [post] = successes.as_slice() {
            let page = client
                .perform(&Action::Post(post.clone()), Initiator::Server)
                .await?;
            completed = matches!(page, Page::Established(_));
        }
        Ok(DuplicateDelivery {
            successes: successes.len(),
            unknown_correlation,
            other,
            completed,
            trace: ScenarioTrace {
                scenario: Scenario::SamlSpToWsfedIp,
                steps: client.steps(),
                verdict: if completed {
                    Verdict::Pass
                } else {
                    Verdict::Fail("duplicate delivery".into())
                },
            },
        })
    }
}
