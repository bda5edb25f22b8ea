use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fedbridge::config::FederationConfig;
use fedbridge::harness::{Lab, Scenario, ScenarioOptions, Services};
use fedbridge::model::{AnyDocument, EntityId, ProtocolDocument};
use fedbridge::translation::{self, AuthnContextMapping};
use tracing_subscriber::EnvFilter;
use url::Url;

#[derive(Parser)]
#[command(
    name = "fedbridge",
    version,
    about = "SAML2 / WS-Federation interoperability broker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DialectArg {
    Saml,
    Wsfed,
}

#[derive(Subcommand)]
enum Command {
    /// Run the broker until interrupted.
    Broker {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the mock identity providers and service providers until interrupted.
    Mocks {
        #[arg(long)]
        config: PathBuf,
    },
    /// Start broker and mocks, drive one sign-in with the simulated browser.
    Scenario {
        /// SamlSpToWsfedIp or WsfedSpToSamlIp
        #[arg(value_parser = parse_scenario)]
        name: Scenario,
        #[arg(long)]
        config: PathBuf,
        /// Where to write the JSON trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        force_authn: bool,
        #[arg(long)]
        pre_login: bool,
    },
    /// Convert a sign-in request between dialects.
    Translate {
        #[arg(long, value_enum)]
        from: DialectArg,
        #[arg(long, value_enum)]
        to: DialectArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Take the authentication context table from this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Issuer of a produced AuthnRequest.
        #[arg(long, default_value = "urn:fedbridge:translate")]
        issuer: String,
        /// Destination of a produced AuthnRequest.
        #[arg(long, default_value = "urn:fedbridge:unspecified")]
        destination: String,
    },
    /// Print who is responsible for translating between an SP and an IP.
    Topo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sp: String,
        #[arg(long)]
        ip: String,
    },
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse()
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

async fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Broker { config } => {
            let config = FederationConfig::load(&config)?;
            let snapshot = config.snapshot_path();
            let lab = Lab::start(
                config,
                Services {
                    broker: true,
                    mocks: false,
                },
            )
            .await?;
            eprintln!("broker listening on {}", lab.config().broker.listen);
            tokio::signal::ctrl_c().await?;
            if let (Some(path), Some(broker)) = (snapshot, lab.broker()) {
                broker.pseudonyms().save(&path)?;
                eprintln!("pseudonym snapshot written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mocks { config } => {
            let config = FederationConfig::load(&config)?;
            let lab = Lab::start(
                config,
                Services {
                    broker: false,
                    mocks: true,
                },
            )
            .await?;
            let mocks = lab.mocks()?;
            eprintln!("SAML SP sign-in:   {}", mocks.saml_sp.start_url(false));
            eprintln!("WS-Fed SP sign-in: {}", mocks.wsfed_sp.start_url(false));
            tokio::signal::ctrl_c().await?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenario {
            name,
            config,
            trace,
            force_authn,
            pre_login,
        } => {
            let lab = Lab::start(FederationConfig::load(&config)?, Services::ALL).await?;
            let options = ScenarioOptions {
                force_authn,
                pre_login,
                ..Default::default()
            };
            let result = lab.run(name, options).await?;
            if let Some(path) = trace {
                std::fs::write(&path, result.to_json())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let checks = result
                .check_passive_client()
                .and_then(|_| result.check_order());
            match (&result.verdict, checks) {
                (v, Ok(())) if v.is_pass() => {
                    println!("{}: pass ({} requests)", name.name(), result.steps.len());
                    Ok(ExitCode::SUCCESS)
                }
                (v, Err(e)) if v.is_pass() => {
                    println!("{}: fail (trace check: {e})", name.name());
                    Ok(ExitCode::FAILURE)
                }
                (v, _) => {
                    println!("{}: fail ({v:?})", name.name());
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Translate {
            from,
            to,
            input,
            output,
            config,
            issuer,
            destination,
        } => {
            let ctx_map = match config {
                Some(path) => FederationConfig::load(&path)?.broker.authn_context_map,
                None => AuthnContextMapping::default(),
            };
            let xml = translate(from, to, &input, &ctx_map, &issuer, &destination)?;
            std::fs::write(&output, xml)
                .with_context(|| format!("writing {}", output.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Topo { config, sp, ip } => {
            let config = FederationConfig::load(&config)?;
            let (sp, ip) = (EntityId::new(sp)?, EntityId::new(ip)?);
            let path = config.topology.resolve_path(&sp, &ip);
            match config.topology.resolve_responsible(&sp, &ip) {
                Ok(responsible) => {
                    println!("responsible: {responsible}");
                    if let Ok(path) = path {
                        let hops: Vec<_> = path.iter().map(EntityId::as_str).collect();
                        println!("path: {}", hops.join(" -> "));
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("error: {e}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
    }
}

fn translate(
    from: DialectArg,
    to: DialectArg,
    input: &Path,
    ctx_map: &AuthnContextMapping,
    issuer: &str,
    destination: &str,
) -> Result<String> {
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let doc = AnyDocument::detect(&text)?;
    match (from, to, doc) {
        (DialectArg::Saml, DialectArg::Wsfed, AnyDocument::AuthnRequest(req)) => {
            Ok(translation::authn_request_to_rst(&req, ctx_map, &req.id)?.to_xml())
        }
        (DialectArg::Wsfed, DialectArg::Saml, AnyDocument::RequestSecurityToken(rst)) => {
            let issuer = EntityId::new(issuer)?;
            let destination = Url::parse(destination).context("--destination")?;
            Ok(translation::rst_to_authn_request(&rst, ctx_map, &issuer, &destination)?.to_xml())
        }
        (f, t, _) if f == t => bail!("--from and --to name the same dialect"),
        (_, _, doc) => bail!(
            "cannot translate a {:?} from the given dialect; translate handles sign-in requests only",
            doc.kind()
        ),
    }
}
