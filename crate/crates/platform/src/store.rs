//! File-backed user store. Passwords are kept only as argon2 PHC strings.

use std::path::Path;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use parking_lot::Mutex;
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserType {
    Admin,
    Regular,
}

impl UserType {
    pub fn as_str(self) -> &'static str {
        match self {
            UserType::Admin => "admin",
            UserType::Regular => "regular",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "admin" => Some(UserType::Admin),
            "regular" => Some(UserType::Regular),
            _ => None,
        }
    }
}

impl std::str::FromStr for UserType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s).ok_or_else(|| format!("unknown user type {s:?} (expected admin or regular)"))
    }
}

/// Public view of a user. Carries no password material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub user_id: i64,
    pub username: String,
    pub user_type: UserType,
}

/// Fields to change; `None` leaves the column alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct UserUpdate {
    pub username: Option<String>,
    pub password: Option<String>,
    pub user_type: Option<UserType>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("username {0:?} is taken")]
    Duplicate(String),
    #[error("no user with id {0}")]
    NotFound(i64),
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("password hashing failed: {0}")]
    Hash(String),
    #[error(transparent)]
    Db(#[from] rusqlite::Error),
}

const SCHEMA: &str = "CREATE TABLE IF NOT EXISTS users (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    username TEXT NOT NULL UNIQUE,
    password_hash TEXT NOT NULL,
    user_type TEXT NOT NULL CHECK (user_type IN ('admin', 'regular'))
)";

pub struct UserStore {
    conn: Mutex<Connection>,
}

fn hash_password(password: &str) -> Result<String, StoreError> {
    let salt = SaltString::encode_b64(&rand::random::<[u8; 16]>()).map_err(|e| StoreError::Hash(e.to_string()))?;
    Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .map(|h| h.to_string())
        .map_err(|e| StoreError::Hash(e.to_string()))
}

fn is_unique_violation(e: &rusqlite::Error) -> bool {
    matches!(
        e,
        rusqlite::Error::SqliteFailure(f, _) if f.extended_code == rusqlite::ffi::SQLITE_CONSTRAINT_UNIQUE
    )
}

fn row_to_user(row: &rusqlite::Row<'_>) -> rusqlite::Result<User> {
    let kind: String = row.get(2)?;
    let user_type = UserType::parse(&kind)
        .ok_or_else(|| rusqlite::Error::FromSqlConversionFailure(2, rusqlite::types::Type::Text, kind.into()))?;
    Ok(User {
        user_id: row.get(0)?,
        username: row.get(1)?,
        user_type,
    })
}

impl UserStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::init(Connection::open(path)?)
    }

    pub fn in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    pub fn create(&self, username: &str, password: &str, user_type: UserType) -> Result<User, StoreError> {
        if username.is_empty() {
            return Err(StoreError::EmptyField("username"));
        }
        if password.is_empty() {
            return Err(StoreError::EmptyField("password"));
        }
        let hash = hash_password(password)?;
        let conn = self.conn.lock();
        conn.execute(
            "INSERT INTO users (username, password_hash, user_type) VALUES (?1, ?2, ?3)",
            params![username, hash, user_type.as_str()],
        )
        .map_err(|e| {
            if is_unique_violation(&e) {
                StoreError::Duplicate(username.to_owned())
            } else {
                e.into()
            }
        })?;
        Ok(User {
            user_id: conn.last_insert_rowid(),
            username: username.to_owned(),
            user_type,
        })
    }

    pub fn get(&self, user_id: i64) -> Result<Option<User>, StoreError> {
        let conn = self.conn.lock();
        Ok(conn
            .query_row(
                "SELECT id, username, user_type FROM users WHERE id = ?1",
                [user_id],
                row_to_user,
            )
            .optional()?)
    }

    pub fn find_by_name(&self, username: &str) -> Result<Option<User>, StoreError> {
        let conn = self.conn.lock();
        Ok(conn
            .query_row(
                "SELECT id, username, user_type FROM users WHERE username = ?1",
                [username],
                row_to_user,
            )
            .optional()?)
    }

    pub fn update(&self, user_id: i64, update: &UserUpdate) -> Result<User, StoreError> {
        if update.username.as_deref() == Some("") {
            return Err(StoreError::EmptyField("username"));
        }
        if update.password.as_deref() == Some("") {
            return Err(StoreError::EmptyField("password"));
        }
        let hash = update.password.as_deref().map(hash_password).transpose()?;

        let mut conn = self.conn.lock();
        let tx = conn.transaction()?;
        let exists: bool = tx
            .query_row("SELECT 1 FROM users WHERE id = ?1", [user_id], |_| Ok(()))
            .optional()?
            .is_some();
        if !exists {
            return Err(StoreError::NotFound(user_id));
        }
        if let Some(name) = &update.username {
            tx.execute("UPDATE users SET username = ?1 WHERE id = ?2", params![name, user_id])
                .map_err(|e| {
                    if is_unique_violation(&e) {
                        StoreError::Duplicate(name.clone())
                    } else {
                        e.into()
                    }
                })?;
        }
        if let Some(hash) = &hash {
            tx.execute(
                "UPDATE users SET password_hash = ?1 WHERE id = ?2",
                params![hash, user_id],
            )?;
        }
        if let Some(kind) = update.user_type {
            tx.execute(
                "UPDATE users SET user_type = ?1 WHERE id = ?2",
                params![kind.as_str(), user_id],
            )?;
        }
        let user = tx.query_row(
            "SELECT id, username, user_type FROM users WHERE id = ?1",
            [user_id],
            row_to_user,
        )?;
        tx.commit()?;
        Ok(user)
    }

    pub fn delete(&self, user_id: i64) -> Result<(), StoreError> {
        let n = self.conn.lock().execute("DELETE FROM users WHERE id = ?1", [user_id])?;
        if n == 0 {
            return Err(StoreError::NotFound(user_id));
        }
        Ok(())
    }

    /// Users ordered by id, optionally restricted to one type.
    pub fn list(&self, filter: Option<UserType>) -> Result<Vec<User>, StoreError> {
        let conn = self.conn.lock();
        let mut stmt = conn.prepare(
            "SELECT id, username, user_type FROM users
             WHERE ?1 IS NULL OR user_type = ?1 ORDER BY id",
        )?;
        let users = stmt
            .query_map([filter.map(UserType::as_str)], row_to_user)?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(users)
    }

    /// The user whose credentials match, or `None`.
    pub fn verify(&self, username: &str, password: &str) -> Result<Option<User>, StoreError> {
        let row = {
            let conn = self.conn.lock();
            conn.query_row(
                "SELECT id, username, user_type, password_hash FROM users WHERE username = ?1",
                [username],
                |row| Ok((row_to_user(row)?, row.get::<_, String>(3)?)),
            )
            .optional()?
        };
        let Some((user, stored)) = row else {
            return Ok(None);
        };
        let parsed = PasswordHash::new(&stored).map_err(|e| StoreError::Hash(e.to_string()))?;
        Ok(Argon2::default()
            .verify_password(password.as_bytes(), &parsed)
            .is_ok()
            .then_some(user))
    }
}
