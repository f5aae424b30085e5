//! Backend selection by name: `"mock"` or `"adapter:<name>"`.
//!
//! Integrators make a real model available by calling [`register_adapter`]
//! before the CLI or service resolves its backend, e.g. from their own
//! `main` that then delegates to [`crate::cli::run`].

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use lgtm_core::{Backend, MockBackend};

use crate::{Error, Result};

pub type SharedBackend = Arc<dyn Backend>;
pub type AdapterFactory = Arc<dyn Fn() -> Result<SharedBackend> + Send + Sync>;

pub const ADAPTER_PREFIX: &str = "adapter:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSelector {
    Mock,
    Adapter(String),
}

impl std::str::FromStr for BackendSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(Self::Mock),
            _ => match s.strip_prefix(ADAPTER_PREFIX) {
                Some(name) if !name.is_empty() => Ok(Self::Adapter(name.to_owned())),
                _ => Err(Error::UnknownBackend(s.to_owned())),
            },
        }
    }
}

fn adapters() -> &'static RwLock<HashMap<String, AdapterFactory>> {
    static ADAPTERS: OnceLock<RwLock<HashMap<String, AdapterFactory>>> = OnceLock::new();
    ADAPTERS.get_or_init(Default::default)
}

/// Registers (or replaces) an adapter reachable as `adapter:<name>`.
pub fn register_adapter<F>(name: &str, factory: F)
where
    F: Fn() -> Result<SharedBackend> + Send + Sync + 'static,
{
    adapters()
        .write()
        .expect("adapter registry poisoned")
        .insert(name.to_owned(), Arc::new(factory));
}

pub fn registered_adapters() -> Vec<String> {
    let mut names: Vec<String> = adapters().read().expect("adapter registry poisoned").keys().cloned().collect();
    names.sort();
    names
}

pub fn resolve(selector: &BackendSelector) -> Result<SharedBackend> {
    match selector {
        BackendSelector::Mock => Ok(Arc::new(MockBackend::new())),
        BackendSelector::Adapter(name) => {
            let factory = adapters().read().expect("adapter registry poisoned").get(name).cloned();
            match factory {
                Some(f) => f(),
                None => Err(Error::BackendUnavailable {
                    name: format!("{ADAPTER_PREFIX}{name}"),
                    reason: "no adapter registered under this name".into(),
                }),
            }
        }
    }
}

pub fn resolve_str(selector: &str) -> Result<SharedBackend> {
    resolve(&selector.parse()?)
}
