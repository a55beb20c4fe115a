//! Assembles engine, transport, scheduler thread and router.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;

use anyhow::Context;
use wedo_core::persistence::Store;
use wedo_core::scheduler::{self, Clock};
use wedo_core::transport::{SimulatedFeed, Transport, WebhookAdapter};
use wedo_core::{Engine, EngineConfig};

use crate::api::{AppState, Inbound};
use crate::webhook::HttpSink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TransportKind {
    /// In-process feed; observations arrive through `POST /inbound`.
    Sim,
    /// Outbound posts go to `--webhook-url`; inbound arrives via `POST /inbound`.
    Webhook,
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub data_dir: PathBuf,
    pub config: EngineConfig,
    pub transport: TransportKind,
    pub webhook_url: Option<String>,
}

/// A running engine plus its scheduler thread. Dropping it stops the thread.
pub struct Service {
    pub state: AppState,
    stop: Arc<AtomicBool>,
    scheduler: Option<JoinHandle<()>>,
}

impl Service {
    /// Opens the data directory and recovers every mission. The scheduler
    /// thread only runs when `run_scheduler` is set.
    pub fn open(opts: ServiceOptions, clock: Arc<dyn Clock>, run_scheduler: bool) -> anyhow::Result<Self> {
        let store = Store::open(&opts.data_dir)
            .with_context(|| format!("opening data directory {}", opts.data_dir.display()))?;
        let (transport, inbound): (Arc<dyn Transport>, Inbound) = match opts.transport {
            TransportKind::Sim => {
                let feed = SimulatedFeed::new(clock.clone());
                (Arc::new(feed.clone()), Inbound::Sim(feed))
            }
            TransportKind::Webhook => {
                let url = opts
                    .webhook_url
                    .clone()
                    .context("--webhook-url is required with the webhook transport")?;
                let journal = WebhookAdapter::journal_path(&opts.data_dir);
                let adapter = Arc::new(
                    WebhookAdapter::with_journal(Box::new(HttpSink::new(url)), &journal)
                        .with_context(|| format!("opening {}", journal.display()))?,
                );
                (adapter.clone(), Inbound::Webhook(adapter))
            }
        };
        let engine = Arc::new(Engine::open(opts.config, store, transport).context("recovering missions")?);
        tracing::info!(missions = engine.states().len(), "engine ready");

        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        let scheduler = run_scheduler.then(|| {
            let (engine, clock, stop) = (engine.clone(), clock.clone(), stop.clone());
            std::thread::Builder::new()
                .name("scheduler".into())
                .spawn(move || scheduler::run_loop(&engine, clock.as_ref(), &stop, &rx))
                .expect("spawn scheduler thread")
        });
        Ok(Self {
            state: AppState {
                engine,
                clock,
                inbound,
                wake: Some(Arc::new(Mutex::new(tx))),
            },
            stop,
            scheduler,
        })
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(w) = &self.state.wake {
            let _ = w.lock().unwrap().send(());
        }
        if let Some(handle) = self.scheduler.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.shutdown();
    }
}
