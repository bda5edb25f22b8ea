//! Recorded browser traffic of a scenario and the checks run over it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::Scenario;

/// Who decided to send a request: the person at the keyboard (typing a URL,
/// signing in up front) or a server (a redirect or a form to submit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initiator {
    User,
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentParam {
    pub name: String,
    pub value: String,
    /// Typed by the user; the value is not recorded.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub credential: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    pub actor: String,
    pub initiator: Initiator,
    pub method: String,
    pub url: String,
    pub sent: Vec<SentParam>,
    pub status: u16,
    pub outcome: String,
    /// Values handed to the client by the response (redirect target and its
    /// query, or form action and fields).
    pub received: Vec<(String, String)>,
}

impl TraceStep {
    pub fn sends(&self, name: &str) -> bool {
        self.sent.iter().any(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        *self == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub scenario: Scenario,
    pub steps: Vec<TraceStep>,
    pub verdict: Verdict,
}

impl ScenarioTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// Every server-driven request went to an address and carried values the
    /// client had been given earlier; only credentials came from the user.
    pub fn check_passive_client(&self) -> Result<(), String> {
        let mut received: HashSet<(&str, &str)> = HashSet::new();
        let mut targets: HashSet<&str> = HashSet::new();
        for step in &self.steps {
            if step.initiator == Initiator::Server {
                if !targets.contains(step.url.as_str()) {
                    return Err(format!(
                        "step {} went to {} unprompted",
                        step.index, step.url
                    ));
                }
                if let Some(p) = step.sent.iter().find(|p| {
                    !p.credential && !received.contains(&(p.name.as_str(), p.value.as_str()))
                }) {
                    return Err(format!(
                        "step {} sent {} which no server provided",
                        step.index, p.name
                    ));
                }
            }
            for (k, v) in &step.received {
                if k == "location" || k == "action" {
                    targets.insert(v);
                } else {
                    received.insert((k, v));
                }
            }
        }
        Ok(())
    }

    /// The protocol document each request carried, in order.
    pub fn protocol_sequence(&self) -> Vec<&'static str> {
        self.steps
            .iter()
            .filter_map(|s| {
                ["SAMLRequest", "SAMLResponse", "wreq", "wresult"]
                    .into_iter()
                    .find(|name| s.sends(name))
            })
            .collect()
    }

    /// Checks the document order of a passing flow, with `wa` and `wctx`
    /// travelling beside each WS-Federation document.
    pub fn check_order(&self) -> Result<(), String> {
        let expected = match self.scenario {
            Scenario::SamlSpToWsfedIp => ["SAMLRequest", "wreq", "wresult", "SAMLResponse"],
            Scenario::WsfedSpToSamlIp => ["wreq", "SAMLRequest", "SAMLResponse", "wresult"],
        };
        let seq = self.protocol_sequence();
        if seq != expected {
            return Err(format!("documents went {seq:?}, expected {expected:?}"));
        }
        for step in self
            .steps
            .iter()
            .filter(|s| s.sends("wreq") || s.sends("wresult"))
        {
            let wa = step
                .sent
                .iter()
                .find(|p| p.name == "wa")
                .map(|p| p.value.as_str());
            if wa != Some("wsignin1.0") || !step.sends("wctx") {
                return Err(format!("step {} lacks wa=wsignin1.0 or wctx", step.index));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(
        index: usize,
        initiator: Initiator,
        url: &str,
        sent: &[(&str, &str)],
        received: &[(&str, &str)],
    ) -> TraceStep {
        TraceStep {
            index,
            actor: "x".into(),
            initiator,
            method: "GET".into(),
            url: url.into(),
            sent: sent
                .iter()
                .map(|(n, v)| SentParam {
                    name: n.to_string(),
                    value: v.to_string(),
                    credential: *n == "password",
                })
                .collect(),
            status: 200,
            outcome: String::new(),
            received: received
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    fn trace(steps: Vec<TraceStep>) -> ScenarioTrace {
        ScenarioTrace {
            scenario: Scenario::SamlSpToWsfedIp,
            steps,
            verdict: Verdict::Pass,
        }
    }

    #[test]
    fn relayed_values_pass() {
        let t = trace(vec![
            step(
                0,
                Initiator::User,
                "http://sp/start",
                &[("force_authn", "1")],
                &[("location", "http://b/sso"), ("SAMLRequest", "abc")],
            ),
            step(
                1,
                Initiator::Server,
                "http://b/sso",
                &[("SAMLRequest", "abc")],
                &[("action", "http://ip/login"), ("pending", "p")],
            ),
            step(
                2,
                Initiator::Server,
                "http://ip/login",
                &[("pending", "p"), ("password", "***")],
                &[],
            ),
        ]);
        assert_eq!(t.check_passive_client(), Ok(()));
    }

    #[test]
    fn invented_value_fails() {
        let t = trace(vec![
            step(
                0,
                Initiator::User,
                "http://sp/start",
                &[],
                &[("location", "http://b/sso"), ("SAMLRequest", "abc")],
            ),
            step(
                1,
                Initiator::Server,
                "http://b/sso",
                &[("SAMLRequest", "abd")],
                &[],
            ),
        ]);
        assert!(t.check_passive_client().is_err());
        let t = trace(vec![
            step(
                0,
                Initiator::User,
                "http://sp/start",
                &[],
                &[("location", "http://b/sso")],
            ),
            step(1, Initiator::Server, "http://elsewhere/", &[], &[]),
        ]);
        assert!(t.check_passive_client().is_err());
    }

    #[test]
    fn order_check() {
        let t = trace(vec![
            step(0, Initiator::Server, "a", &[("SAMLRequest", "1")], &[]),
            step(
                1,
                Initiator::Server,
                "b",
                &[("wa", "wsignin1.0"), ("wreq", "2"), ("wctx", "c")],
                &[],
            ),
            step(
                2,
                Initiator::Server,
                "c",
                &[("wa", "wsignin1.0"), ("wresult", "3"), ("wctx", "c")],
                &[],
            ),
            step(3, Initiator::Server, "d", &[("SAMLResponse", "4")], &[]),
        ]);
        assert_eq!(t.check_order(), Ok(()));
        let mut swapped = t.clone();
        swapped.steps.swap(1, 2);
        assert!(swapped.check_order().is_err());
        let mut no_wa = t;
        no_wa.steps[1].sent.remove(0);
        assert!(no_wa.check_order().is_err());
    }
}
