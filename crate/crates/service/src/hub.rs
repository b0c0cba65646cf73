//! Event fan-out with a replayable backlog.
//!
//! Every event published gets a service-wide index. Subscribers first drain
//! the backlog from their requested index, then follow the live channel.
//! A subscriber that falls more than the channel capacity behind is cut off.

use std::sync::{Arc, RwLock};

use tokio::sync::broadcast;
use zonegov::Event;

#[derive(Debug, Clone)]
pub struct Indexed {
    pub index: usize,
    pub event: Event,
}

#[derive(Debug, Clone)]
pub struct EventHub {
    log: Arc<RwLock<Vec<Event>>>,
    live: broadcast::Sender<Indexed>,
}

impl EventHub {
    pub fn new(capacity: usize) -> Self {
        let (live, _) = broadcast::channel(capacity);
        EventHub {
            log: Arc::new(RwLock::new(Vec::new())),
            live,
        }
    }

    pub fn publish(&self, events: &[Event]) {
        let mut log = self.log.write().expect("event log lock");
        for e in events {
            let index = log.len();
            log.push(e.clone());
            // no receivers is fine
            let _ = self.live.send(Indexed {
                index,
                event: e.clone(),
            });
        }
    }

    pub fn len(&self) -> usize {
        self.log.read().expect("event log lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn since(&self, from: usize) -> Vec<Indexed> {
        let log = self.log.read().expect("event log lock");
        log.iter()
            .enumerate()
            .skip(from)
            .map(|(index, e)| Indexed {
                index,
                event: e.clone(),
            })
            .collect()
    }

    /// Backlog from `from` plus a live receiver that continues after it.
    /// Subscribing under the read lock means nothing falls between the two.
    pub fn subscribe(&self, from: usize) -> (Vec<Indexed>, broadcast::Receiver<Indexed>) {
        let log = self.log.read().expect("event log lock");
        let rx = self.live.subscribe();
        let backlog = log
            .iter()
            .enumerate()
            .skip(from)
            .map(|(index, e)| Indexed {
                index,
                event: e.clone(),
            })
            .collect();
        (backlog, rx)
    }
}
