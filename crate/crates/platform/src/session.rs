//! In-memory sessions keyed by opaque 128-bit random tokens.

use std::collections::HashMap;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use parking_lot::RwLock;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub token: String,
    pub user_id: i64,
    pub created_at: SystemTime,
    pub expires_at: SystemTime,
}

impl Session {
    pub fn expires_at_unix(&self) -> u64 {
        self.expires_at
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

pub struct SessionStore {
    ttl: Duration,
    sessions: RwLock<HashMap<String, Session>>,
}

fn new_token() -> String {
    hex::encode(rand::random::<[u8; 16]>())
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            ttl,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn issue(&self, user_id: i64) -> Session {
        self.issue_at(user_id, SystemTime::now())
    }

    fn issue_at(&self, user_id: i64, now: SystemTime) -> Session {
        let mut sessions = self.sessions.write();
        sessions.retain(|_, s| s.expires_at > now);
        let token = loop {
            let t = new_token();
            if !sessions.contains_key(&t) {
                break t;
            }
        };
        let session = Session {
            token: token.clone(),
            user_id,
            created_at: now,
            expires_at: now + self.ttl,
        };
        sessions.insert(token, session.clone());
        session
    }

    /// The live session for `token`. Expired sessions are dropped.
    pub fn authenticate(&self, token: &str) -> Option<Session> {
        self.authenticate_at(token, SystemTime::now())
    }

    fn authenticate_at(&self, token: &str, now: SystemTime) -> Option<Session> {
        let found = self.sessions.read().get(token).cloned()?;
        if found.expires_at > now {
            return Some(found);
        }
        self.sessions.write().remove(token);
        None
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.sessions.write().remove(token).is_some()
    }

    /// Drops every session of `user_id`; returns how many there were.
    pub fn revoke_user(&self, user_id: i64) -> usize {
        let mut sessions = self.sessions.write();
        let before = sessions.len();
        sessions.retain(|_, s| s.user_id != user_id);
        before - sessions.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
