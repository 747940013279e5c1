//! Credentials, password hashing and session tokens.
//!
//! Passwords are stored as Argon2id PHC strings (salt embedded, per-user
//! random); plaintext never touches disk. Tokens are 128-bit random values
//! held in memory with a TTL, so a server restart invalidates all sessions.

use argon2::password_hash::{PasswordHash, PasswordHasher, SaltString};
use argon2::{Argon2, PasswordVerifier};
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::{DateTime, Duration, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use std::sync::RwLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuthError {
    /// Wrong user or wrong password; the caller cannot tell which.
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("missing, unknown or expired token")]
    Unauthorized,
    #[error("credential store error: {0}")]
    Store(String),
}

/// One user entry of the credentials file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Credential {
    pub username: String,
    pub password_hash: String,
}

/// Loads the credentials file (a JSON array). A missing file is an empty
/// store.
pub fn load_credentials(path: &Path) -> Result<Vec<Credential>, AuthError> {
    match std::fs::read_to_string(path) {
        Ok(data) => serde_json::from_str(&data).map_err(|e| AuthError::Store(e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(AuthError::Store(e.to_string())),
    }
}

/// Adds or replaces a user, writing the file atomically.
pub fn add_user(path: &Path, username: &str, password: &str) -> Result<(), AuthError> {
    let mut creds = load_credentials(path)?;
    let mut salt_bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut salt_bytes);
    let salt = SaltString::encode_b64(&salt_bytes).expect("16 bytes fit a salt string");
    let hash = Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .map_err(|e| AuthError::Store(e.to_string()))?
        .to_string();
    creds.retain(|c| c.username != username);
    creds.push(Credential {
        username: username.to_string(),
        password_hash: hash,
    });
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| AuthError::Store(e.to_string()))?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(&creds).unwrap())
        .map_err(|e| AuthError::Store(e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| AuthError::Store(e.to_string()))?;
    Ok(())
}

// Verified against when the username is unknown, so both failure paths cost
// one Argon2 evaluation.
const DUMMY_HASH: &str = "$argon2id$v=19$m=19456,t=2,p=1$obBhYmNkZWZnaGlqa2xtbg$GZit3hEIl5XSSzHPsy55hvc0cHjTDNij8HAvQrcGDvM";

/// Constant-time password check; unknown users are indistinguishable from
/// wrong passwords.
pub fn verify_password(creds: &[Credential], username: &str, password: &str) -> bool {
    let entry = creds.iter().find(|c| c.username == username);
    let hash_str = entry.map(|c| c.password_hash.as_str()).unwrap_or(DUMMY_HASH);
    let Ok(parsed) = PasswordHash::new(hash_str) else {
        return false;
    };
    let ok = Argon2::default()
        .verify_password(password.as_bytes(), &parsed)
        .is_ok();
    ok && entry.is_some()
}

/// An issued session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: String,
    pub username: String,
    pub expires_at: DateTime<Utc>,
}

/// In-memory token table.
pub struct TokenStore {
    ttl: Duration,
    tokens: RwLock<HashMap<String, (String, DateTime<Utc>)>>,
}

impl TokenStore {
    pub fn new(ttl: Duration) -> Self {
        TokenStore {
            ttl,
            tokens: RwLock::new(HashMap::new()),
        }
    }

    /// Issues a fresh unguessable token: 128 bits from a CSPRNG, URL-safe
    /// base64.
    pub fn issue(&self, username: &str) -> SessionToken {
        let mut bytes = [0u8; 16];
        rand::rng().fill_bytes(&mut bytes);
        let token = URL_SAFE_NO_PAD.encode(bytes);
        let expires_at = Utc::now() + self.ttl;
        self.tokens
            .write()
            .unwrap()
            .insert(token.clone(), (username.to_string(), expires_at));
        SessionToken {
            token,
            username: username.to_string(),
            expires_at,
        }
    }

    /// Returns the username behind a live token.
    pub fn validate(&self, token: &str) -> Result<String, AuthError> {
        let tokens = self.tokens.read().unwrap();
        match tokens.get(token) {
            Some((user, expires)) if Utc::now() < *expires => Ok(user.clone()),
            _ => Err(AuthError::Unauthorized),
        }
    }

    /// Test hook: force a token to be expired.
    pub fn expire(&self, token: &str) {
        if let Some(entry) = self.tokens.write().unwrap().get_mut(token) {
            entry.1 = Utc::now() - Duration::seconds(1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn add_user_then_verify() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("credentials.json");
        add_user(&path, "alice", "correct horse").unwrap();
        let creds = load_credentials(&path).unwrap();
        assert_eq!(creds.len(), 1);
        assert!(verify_password(&creds, "alice", "correct horse"));
        assert!(!verify_password(&creds, "alice", "wrong"));
        assert!(!verify_password(&creds, "bob", "correct horse"));
    }

    #[test]
    fn plaintext_never_persisted_and_hash_is_not_the_password() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("credentials.json");
        add_user(&path, "alice", "hunter2-secret").unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(!raw.contains("hunter2-secret"));
        let creds = load_credentials(&path).unwrap();
        let hash = creds[0].password_hash.clone();
        assert!(!verify_password(&creds, "alice", &hash));
    }

    #[test]
    fn re_adding_a_user_replaces_the_entry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("credentials.json");
        add_user(&path, "alice", "one").unwrap();
        add_user(&path, "alice", "two").unwrap();
        let creds = load_credentials(&path).unwrap();
        assert_eq!(creds.len(), 1);
        assert!(verify_password(&creds, "alice", "two"));
        assert!(!verify_password(&creds, "alice", "one"));
    }

    #[test]
    fn tokens_are_unique_and_expire() {
        let store = TokenStore::new(Duration::hours(24));
        let mut seen = HashSet::new();
        for _ in 0..100 {
            let t = store.issue("alice");
            assert_eq!(t.token.len(), 22);
            assert!(seen.insert(t.token.clone()), "token repeated");
            assert_eq!(store.validate(&t.token).unwrap(), "alice");
        }
        let t = store.issue("alice");
        store.expire(&t.token);
        assert_eq!(store.validate(&t.token), Err(AuthError::Unauthorized));
        assert_eq!(store.validate("no-such-token"), Err(AuthError::Unauthorized));
    }
}
