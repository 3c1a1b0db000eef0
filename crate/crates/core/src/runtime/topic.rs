use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::clock::Tick;
use super::RuntimeError;

/// A value together with the tick it was published at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub stamp: Tick,
    pub value: T,
}

/// Proof of write access to one topic, handed out once.
#[derive(Debug, PartialEq, Eq)]
pub struct WriterToken {
    topic: String,
}

/// Single-writer, many-reader topic with a bounded history.
#[derive(Debug, Clone)]
pub struct Topic<T> {
    name: String,
    writer: Option<String>,
    history: VecDeque<Stamped<T>>,
    depth: usize,
    published: u64,
}

impl<T: Clone> Topic<T> {
    pub fn new(name: impl Into<String>, depth: usize) -> Self {
        Self {
            name: name.into(),
            writer: None,
            history: VecDeque::with_capacity(depth.max(1)),
            depth: depth.max(1),
            published: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Registers the one writer of this topic.
    pub fn register_writer(&mut self, writer: &str) -> Result<WriterToken, RuntimeError> {
        if let Some(existing) = &self.writer {
            return Err(RuntimeError::SecondWriter {
                topic: self.name.clone(),
                existing: existing.clone(),
                requested: writer.to_string(),
            });
        }
        self.writer = Some(writer.to_string());
        Ok(WriterToken { topic: self.name.clone() })
    }

    pub fn writer(&self) -> Option<&str> {
        self.writer.as_deref()
    }

    /// Publishes `value` stamped with `now`.
    pub fn publish(&mut self, token: &WriterToken, now: Tick, value: T) -> Result<Stamped<T>, RuntimeError> {
        if token.topic != self.name {
            return Err(RuntimeError::NotWriter { topic: self.name.clone() });
        }
        if let Some(last) = self.history.back() {
            if now < last.stamp {
                return Err(RuntimeError::StampRegression { topic: self.name.clone(), last: last.stamp, now });
            }
        }
        let rec = Stamped { stamp: now, value };
        if self.history.len() == self.depth {
            self.history.pop_front();
        }
        self.history.push_back(rec.clone());
        self.published += 1;
        Ok(rec)
    }

    pub fn latest(&self) -> Option<&Stamped<T>> {
        self.history.back()
    }

    /// Latest record whose stamp is not after `now`.
    pub fn latest_at(&self, now: Tick) -> Option<&Stamped<T>> {
        self.history.iter().rev().find(|r| r.stamp <= now)
    }

    /// Records with stamps in `(after, upto]`, oldest first.
    pub fn since(&self, after: Option<Tick>, upto: Tick) -> impl Iterator<Item = &Stamped<T>> {
        self.history.iter().filter(move |r| after.is_none_or(|a| r.stamp > a) && r.stamp <= upto)
    }

    pub fn history(&self) -> impl Iterator<Item = &Stamped<T>> {
        self.history.iter()
    }

    pub fn published_count(&self) -> u64 {
        self.published
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn publish_then_latest() {
        let mut t = Topic::new("speed", 4);
        let w = t.register_writer("plant").unwrap();
        assert!(t.latest().is_none());
        t.publish(&w, 5, 1.5).unwrap();
        let l = t.latest().unwrap();
        assert_eq!((l.stamp, l.value), (5, 1.5));
    }

    #[test]
    fn second_publish_in_tick_wins() {
        let mut t = Topic::new("x", 4);
        let w = t.register_writer("a").unwrap();
        t.publish(&w, 3, 1).unwrap();
        t.publish(&w, 3, 2).unwrap();
        assert_eq!(t.latest().unwrap().value, 2);
        let log: Vec<_> = t.history().map(|r| r.value).collect();
        assert_eq!(log, vec![1, 2]);
    }

    #[test]
    fn second_writer_rejected() {
        let mut t: Topic<u8> = Topic::new("x", 1);
        t.register_writer("a").unwrap();
        assert!(matches!(t.register_writer("b"), Err(RuntimeError::SecondWriter { .. })));
    }

    #[test]
    fn foreign_token_rejected() {
        let mut a: Topic<u8> = Topic::new("a", 1);
        let mut b: Topic<u8> = Topic::new("b", 1);
        let wa = a.register_writer("w").unwrap();
        b.register_writer("w").unwrap();
        assert!(b.publish(&wa, 0, 1).is_err());
    }

    #[test]
    fn history_is_bounded() {
        let mut t = Topic::new("x", 2);
        let w = t.register_writer("a").unwrap();
        for i in 0..5 {
            t.publish(&w, i, i).unwrap();
        }
        assert_eq!(t.history().count(), 2);
        assert_eq!(t.since(Some(3), 10).count(), 1);
        assert_eq!(t.latest_at(3).unwrap().value, 3);
    }
}
